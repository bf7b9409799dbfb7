//! Run-level metrics.
//!
//! All metrics are computed by folding step traces through a
//! [`MetricAccumulator`], so a run that keeps only a thinned trace still
//! reports aggregates over every step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::StepTrace;
use crate::model::ProcessSpec;

/// How `max_production` is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxProductionMode {
    /// Largest per-step total over all processes.
    #[default]
    StepTotal,
    /// Largest output of any single process in any step.
    SingleProcess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSummary {
    pub index: usize,
    pub beta: f64,
    pub multiplier: f64,
    pub total_output: f64,
    pub average_output: f64,
    /// Time-averaged share of labourers among the agents at this process,
    /// over the steps where at least one agent was there. `None` if the
    /// process was never chosen.
    pub labour_share: Option<f64>,
    pub mean_labourers: f64,
    pub mean_capitalists: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub steps: usize,
    pub average_production: f64,
    /// Per-step total, maximised over steps.
    pub max_production: f64,
    /// Single process, maximised over processes and steps.
    pub max_process_production: f64,
    pub labour_ratio: f64,
    /// `None` when there is only one process or all elasticities coincide.
    pub capital_strength: Option<f64>,
    pub processes: Vec<ProcessSummary>,
}

impl RunMetrics {
    pub fn max_production_by(&self, mode: MaxProductionMode) -> f64 {
        match mode {
            MaxProductionMode::StepTotal => self.max_production,
            MaxProductionMode::SingleProcess => self.max_process_production,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MetricAccumulator {
    specs: Vec<ProcessSpec>,
    n_agents: usize,
    steps: usize,
    output_sum: Vec<f64>,
    max_total: f64,
    max_single: f64,
    labour_fraction_sum: f64,
    labourers_sum: Vec<f64>,
    capitalists_sum: Vec<f64>,
    share_sum: Vec<f64>,
    share_steps: Vec<usize>,
}

impl MetricAccumulator {
    pub fn new(specs: &[ProcessSpec], n_agents: usize) -> Self {
        let k = specs.len();
        Self {
            specs: specs.to_vec(),
            n_agents,
            steps: 0,
            output_sum: vec![0.0; k],
            max_total: f64::NEG_INFINITY,
            max_single: f64::NEG_INFINITY,
            labour_fraction_sum: 0.0,
            labourers_sum: vec![0.0; k],
            capitalists_sum: vec![0.0; k],
            share_sum: vec![0.0; k],
            share_steps: vec![0; k],
        }
    }

    pub fn push(&mut self, trace: &StepTrace) -> Result<()> {
        let k = self.specs.len();
        if trace.output.len() != k
            || trace.process_labourers.len() != k
            || trace.process_capitalists.len() != k
        {
            return Err(Error::invalid(
                "traces",
                format!("step {} does not cover {k} processes", trace.step),
            ));
        }
        if trace.labourer_count + trace.capitalist_count != self.n_agents {
            return Err(Error::invalid(
                "traces",
                format!(
                    "step {} does not account for {} agents",
                    trace.step, self.n_agents
                ),
            ));
        }
        self.steps += 1;
        self.max_total = self.max_total.max(trace.total_output);
        self.labour_fraction_sum += trace.labourer_count as f64 / self.n_agents as f64;
        for p in 0..k {
            let y = trace.output[p];
            self.output_sum[p] += y;
            self.max_single = self.max_single.max(y);
            let (l, c) = (trace.process_labourers[p], trace.process_capitalists[p]);
            self.labourers_sum[p] += l as f64;
            self.capitalists_sum[p] += c as f64;
            if l + c > 0 {
                self.share_sum[p] += l as f64 / (l + c) as f64;
                self.share_steps[p] += 1;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<RunMetrics> {
        if self.steps == 0 {
            return Err(Error::invalid("traces", "no step traces to aggregate"));
        }
        let k = self.specs.len();
        let steps = self.steps as f64;
        let total: f64 = self.output_sum.iter().sum();
        let processes: Vec<ProcessSummary> = (0..k)
            .map(|p| ProcessSummary {
                index: p,
                beta: self.specs[p].beta,
                multiplier: self.specs[p].multiplier,
                total_output: self.output_sum[p],
                average_output: self.output_sum[p] / steps,
                labour_share: (self.share_steps[p] > 0)
                    .then(|| self.share_sum[p] / self.share_steps[p] as f64),
                mean_labourers: self.labourers_sum[p] / steps,
                mean_capitalists: self.capitalists_sum[p] / steps,
            })
            .collect();
        let metrics = RunMetrics {
            steps: self.steps,
            average_production: total / (k as f64 * steps),
            max_production: self.max_total,
            max_process_production: self.max_single,
            labour_ratio: self.labour_fraction_sum / steps,
            capital_strength: capital_strength_of(&processes),
            processes,
        };
        for (name, v) in [
            ("average_production", metrics.average_production),
            ("max_production", metrics.max_production),
            ("labour_ratio", metrics.labour_ratio),
        ] {
            if !v.is_finite() {
                return Err(Error::Runtime(format!("{name} is not finite ({v})")));
            }
        }
        Ok(metrics)
    }
}

fn fold(specs: &[ProcessSpec], n_agents: usize, traces: &[StepTrace]) -> Result<RunMetrics> {
    let mut acc = MetricAccumulator::new(specs, n_agents);
    for t in traces {
        acc.push(t)?;
    }
    acc.finish()
}

fn shape(traces: &[StepTrace]) -> Result<(Vec<ProcessSpec>, usize)> {
    let first = traces
        .first()
        .ok_or_else(|| Error::invalid("traces", "no step traces to aggregate"))?;
    // Elasticities do not enter these metrics; placeholders keep the fold uniform.
    let specs = vec![
        ProcessSpec {
            beta: 0.5,
            multiplier: 1.0
        };
        first.output.len()
    ];
    Ok((specs, first.labourer_count + first.capitalist_count))
}

/// Mean process output over all processes and steps.
pub fn average_production(traces: &[StepTrace]) -> Result<f64> {
    let (specs, n) = shape(traces)?;
    Ok(fold(&specs, n, traces)?.average_production)
}

/// Mean over steps of the fraction of agents that chose labour.
pub fn labour_ratio(traces: &[StepTrace]) -> Result<f64> {
    let (specs, n) = shape(traces)?;
    Ok(fold(&specs, n, traces)?.labour_ratio)
}

pub fn max_production(traces: &[StepTrace], mode: MaxProductionMode) -> Result<f64> {
    let (specs, n) = shape(traces)?;
    Ok(fold(&specs, n, traces)?.max_production_by(mode))
}

/// Normalised elasticity of the process with the largest total output:
/// `(beta* - beta_min) / (beta_max - beta_min)`. Ties in total output go to
/// the higher elasticity.
pub fn capital_strength(specs: &[ProcessSpec], traces: &[StepTrace]) -> Result<Option<f64>> {
    let n = traces
        .first()
        .map(|t| t.labourer_count + t.capitalist_count)
        .ok_or_else(|| Error::invalid("traces", "no step traces to aggregate"))?;
    Ok(fold(specs, n, traces)?.capital_strength)
}

fn capital_strength_of(processes: &[ProcessSummary]) -> Option<f64> {
    if processes.len() < 2 {
        return None;
    }
    let beta_min = processes
        .iter()
        .map(|p| p.beta)
        .fold(f64::INFINITY, f64::min);
    let beta_max = processes
        .iter()
        .map(|p| p.beta)
        .fold(f64::NEG_INFINITY, f64::max);
    if beta_max <= beta_min {
        return None;
    }
    let winner = processes.iter().max_by(|a, b| {
        a.total_output
            .total_cmp(&b.total_output)
            .then(a.beta.total_cmp(&b.beta))
    })?;
    Some((winner.beta - beta_min) / (beta_max - beta_min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(
        step: usize,
        output: Vec<f64>,
        labourers: Vec<usize>,
        capitalists: Vec<usize>,
    ) -> StepTrace {
        let n = labourers.iter().sum::<usize>() + capitalists.iter().sum::<usize>();
        StepTrace {
            step,
            total_output: output.iter().sum(),
            output,
            rewards: vec![0.0; n],
            labourer_count: labourers.iter().sum(),
            capitalist_count: capitalists.iter().sum(),
            process_labourers: labourers,
            process_capitalists: capitalists,
        }
    }

    fn specs(betas: &[f64]) -> Vec<ProcessSpec> {
        betas
            .iter()
            .map(|&b| ProcessSpec::with_beta(b).unwrap())
            .collect()
    }

    #[test]
    fn average_production_examples() {
        let zero: Vec<_> = (0..5)
            .map(|s| trace(s, vec![0.0], vec![1], vec![1]))
            .collect();
        assert_eq!(average_production(&zero).unwrap(), 0.0);
        let flat: Vec<_> = (0..5)
            .map(|s| trace(s, vec![100.0], vec![1], vec![1]))
            .collect();
        assert_eq!(average_production(&flat).unwrap(), 100.0);
        let two: Vec<_> = (0..5)
            .map(|s| trace(s, vec![100.0, 0.0], vec![1, 0], vec![1, 0]))
            .collect();
        assert_eq!(average_production(&two).unwrap(), 50.0);
    }

    #[test]
    fn labour_ratio_examples() {
        let all_l: Vec<_> = (0..4)
            .map(|s| trace(s, vec![0.0], vec![4], vec![0]))
            .collect();
        assert_eq!(labour_ratio(&all_l).unwrap(), 1.0);
        let all_c: Vec<_> = (0..4)
            .map(|s| trace(s, vec![0.0], vec![0], vec![4]))
            .collect();
        assert_eq!(labour_ratio(&all_c).unwrap(), 0.0);
        let half: Vec<_> = (0..10)
            .map(|s| {
                if s < 5 {
                    trace(s, vec![0.0], vec![2], vec![2])
                } else {
                    trace(s, vec![0.0], vec![4], vec![0])
                }
            })
            .collect();
        assert_eq!(labour_ratio(&half).unwrap(), 0.75);
    }

    #[test]
    fn max_production_examples() {
        let flat: Vec<_> = (0..3)
            .map(|s| trace(s, vec![100.0], vec![1], vec![1]))
            .collect();
        assert_eq!(
            max_production(&flat, MaxProductionMode::StepTotal).unwrap(),
            100.0
        );
        let spike: Vec<_> = (0..5)
            .map(|s| trace(s, vec![if s == 3 { 250.0 } else { 0.0 }], vec![1], vec![1]))
            .collect();
        assert_eq!(
            max_production(&spike, MaxProductionMode::StepTotal).unwrap(),
            250.0
        );

        // Process 0 peaks at step 1, process 1 at step 2.
        let outputs = [[10.0, 20.0], [100.0, 30.0], [40.0, 150.0], [5.0, 5.0]];
        let staggered: Vec<_> = outputs
            .iter()
            .enumerate()
            .map(|(s, o)| trace(s, o.to_vec(), vec![1, 1], vec![1, 1]))
            .collect();
        let summed: Vec<f64> = outputs.iter().map(|o| o[0] + o[1]).collect();
        let expected = summed.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(expected, 190.0);
        assert_eq!(
            max_production(&staggered, MaxProductionMode::StepTotal).unwrap(),
            expected
        );
        assert_eq!(
            max_production(&staggered, MaxProductionMode::SingleProcess).unwrap(),
            150.0
        );
    }

    #[test]
    fn capital_strength_examples() {
        let s = specs(&[0.2, 0.5, 0.8]);
        let run = |winner: usize| {
            let mut o = vec![1.0; 3];
            o[winner] = 10.0;
            vec![trace(0, o, vec![1, 1, 1], vec![1, 1, 1])]
        };
        assert_eq!(capital_strength(&s, &run(2)).unwrap(), Some(1.0));
        assert_eq!(capital_strength(&s, &run(0)).unwrap(), Some(0.0));
        let mid = capital_strength(&s, &run(1)).unwrap().unwrap();
        assert!((mid - (0.5 - 0.2) / (0.8 - 0.2)).abs() < 1e-15);

        let single = vec![trace(0, vec![5.0], vec![1], vec![1])];
        assert_eq!(capital_strength(&specs(&[0.4]), &single).unwrap(), None);
    }

    #[test]
    fn capital_strength_ties_go_to_higher_elasticity() {
        let s = specs(&[0.3, 0.6, 0.9]);
        let t = vec![trace(0, vec![5.0, 5.0, 1.0], vec![1, 1, 1], vec![1, 1, 1])];
        let cs = capital_strength(&s, &t).unwrap().unwrap();
        assert!((cs - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_traces_rejected() {
        assert!(average_production(&[]).is_err());
        assert!(labour_ratio(&[]).is_err());
        assert!(max_production(&[], MaxProductionMode::StepTotal).is_err());
        assert!(capital_strength(&specs(&[0.2, 0.4]), &[]).is_err());
    }

    #[test]
    fn per_process_labour_share_skips_empty_steps() {
        let s = specs(&[0.2, 0.8]);
        let t = vec![
            trace(0, vec![0.0, 0.0], vec![3, 0], vec![1, 0]),
            trace(1, vec![0.0, 0.0], vec![1, 0], vec![1, 2]),
        ];
        let mut acc = MetricAccumulator::new(&s, 4);
        for x in &t {
            acc.push(x).unwrap();
        }
        let m = acc.finish().unwrap();
        assert_eq!(m.processes[0].labour_share, Some((0.75 + 0.5) / 2.0));
        assert_eq!(m.processes[1].labour_share, Some(0.0));
        assert_eq!(m.processes[0].mean_labourers, 2.0);
    }
}
