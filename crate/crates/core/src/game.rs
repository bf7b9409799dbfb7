//! The turn loop.
//!
//! Every turn each agent commits either its whole capital stock or its whole
//! timenergy to one process. Processes produce, pay out, and agents learn
//! from their own reward. Committed capital is retained by default (the
//! reward is added on top); timenergy resets each turn.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{ActionId, AgentState, LearningParams, QTable, Resource};
use crate::error::{Error, Result};
use crate::metrics::MetricAccumulator;
use crate::model::{redistribute, ProcessSpec, Shares};
use crate::record::RunRecord;
use crate::seed;

pub const DEFAULT_INITIAL_CAPITAL: f64 = 100.0;
pub const DEFAULT_TIMENERGY: f64 = 100.0;
pub const DEFAULT_STEPS: usize = 5000;
/// Runs up to this many steps keep every step trace unless told otherwise.
pub const FULL_TRACE_LIMIT: usize = 5000;

fn default_initial_capital() -> f64 {
    DEFAULT_INITIAL_CAPITAL
}
fn default_timenergy() -> f64 {
    DEFAULT_TIMENERGY
}
fn default_steps() -> usize {
    DEFAULT_STEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub n_agents: usize,
    pub processes: Vec<ProcessSpec>,
    #[serde(default = "default_initial_capital")]
    pub initial_capital: f64,
    #[serde(default = "default_timenergy")]
    pub timenergy_per_turn: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    pub seed: u64,
    pub learning: LearningParams,
    /// Keep every `trace_stride`-th step trace; `0` keeps none. Unset means
    /// every step for runs of up to 5000 steps, thinned to about 5000
    /// traces beyond that. Aggregates always use every step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_stride: Option<usize>,
    /// Capital committed to a process is used up rather than retained.
    #[serde(default)]
    pub consume_invested_capital: bool,
}

impl GameConfig {
    /// Config with the default endowments and step count.
    pub fn new(
        n_agents: usize,
        processes: Vec<ProcessSpec>,
        learning: LearningParams,
        seed: u64,
    ) -> Self {
        Self {
            n_agents,
            processes,
            initial_capital: DEFAULT_INITIAL_CAPITAL,
            timenergy_per_turn: DEFAULT_TIMENERGY,
            n_steps: DEFAULT_STEPS,
            seed,
            learning,
            trace_stride: None,
            consume_invested_capital: false,
        }
    }

    pub fn k(&self) -> usize {
        self.processes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 1 {
            return Err(Error::invalid("n_agents", "need at least one agent"));
        }
        if self.processes.is_empty() {
            return Err(Error::invalid("processes", "need at least one process"));
        }
        if self.n_steps < 1 {
            return Err(Error::invalid("n_steps", "need at least one step"));
        }
        for (i, p) in self.processes.iter().enumerate() {
            p.validate().map_err(|e| match e {
                Error::Invalid { field, reason } => {
                    Error::invalid(format!("processes[{i}].{field}"), reason)
                }
                other => other,
            })?;
        }
        if !(self.initial_capital.is_finite() && self.initial_capital >= 0.0) {
            return Err(Error::invalid("initial_capital", "must be finite and >= 0"));
        }
        if !(self.timenergy_per_turn.is_finite() && self.timenergy_per_turn > 0.0) {
            return Err(Error::invalid(
                "timenergy_per_turn",
                "must be finite and > 0",
            ));
        }
        self.learning.validate()
    }

    pub fn effective_trace_stride(&self) -> usize {
        match self.trace_stride {
            Some(s) => s,
            None if self.n_steps <= FULL_TRACE_LIMIT => 1,
            None => self.n_steps.div_ceil(FULL_TRACE_LIMIT),
        }
    }
}

/// One agent's commitment in a turn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Commitment {
    pub agent: usize,
    pub action: ActionId,
    pub amount: f64,
}

/// Who put what where in one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRound {
    pub capital: Vec<f64>,
    pub labour: Vec<f64>,
    /// One entry per agent, in id order.
    pub commitments: Vec<Commitment>,
}

impl AllocationRound {
    pub fn shares(&self, process: usize) -> Shares {
        let mut shares = Shares::default();
        for c in self
            .commitments
            .iter()
            .filter(|c| c.action.process == process)
        {
            match c.action.resource {
                Resource::Capital => shares.capital.push((c.agent, c.amount)),
                Resource::Labour => shares.labour.push((c.agent, c.amount)),
            }
        }
        shares
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    /// Output of each process.
    pub output: Vec<f64>,
    /// Reward of each agent, in id order.
    pub rewards: Vec<f64>,
    pub labourer_count: usize,
    pub capitalist_count: usize,
    pub total_output: f64,
    pub process_labourers: Vec<usize>,
    pub process_capitalists: Vec<usize>,
}

/// Fresh agents for `config`, each with its own random stream keyed by
/// `(seed, agent id)`. The q-table is the first thing drawn from that stream.
pub fn spawn_agents(config: &GameConfig) -> Result<(Vec<AgentState>, Vec<ChaCha8Rng>)> {
    config.validate()?;
    let k = config.k();
    let mut agents = Vec::with_capacity(config.n_agents);
    let mut rngs = Vec::with_capacity(config.n_agents);
    for id in 0..config.n_agents {
        let mut rng = seed::rng(config.seed, &[seed::TAG_AGENT, id as u64]);
        agents.push(AgentState {
            id,
            capital_stock: config.initial_capital,
            timenergy: config.timenergy_per_turn,
            qtable: QTable::random(k, &mut rng)?,
            params: config.learning,
        });
        rngs.push(rng);
    }
    Ok((agents, rngs))
}

/// One turn with actions chosen by the agents' epsilon-greedy policies.
pub fn play_turn(
    agents: &mut [AgentState],
    config: &GameConfig,
    rngs: &mut [ChaCha8Rng],
    step: usize,
) -> Result<(StepTrace, AllocationRound)> {
    if rngs.len() != agents.len() {
        return Err(Error::invalid("rngs", "need one random stream per agent"));
    }
    let actions: Vec<ActionId> = agents
        .iter()
        .zip(rngs.iter_mut())
        .map(|(a, rng)| a.select_action(rng))
        .collect();
    play_turn_with_actions(agents, config, &actions, step)
}

/// One turn with the given actions, `actions[i]` belonging to `agents[i]`.
pub fn play_turn_with_actions(
    agents: &mut [AgentState],
    config: &GameConfig,
    actions: &[ActionId],
    step: usize,
) -> Result<(StepTrace, AllocationRound)> {
    let k = config.k();
    if actions.len() != agents.len() {
        return Err(Error::invalid("actions", "need one action per agent"));
    }
    if let Some(a) = actions.iter().find(|a| a.process >= k) {
        return Err(Error::invalid(
            "actions",
            format!("process {} out of range for k = {k}", a.process),
        ));
    }

    let mut round = AllocationRound {
        capital: vec![0.0; k],
        labour: vec![0.0; k],
        commitments: Vec::with_capacity(agents.len()),
    };
    let mut process_labourers = vec![0usize; k];
    let mut process_capitalists = vec![0usize; k];
    for (agent, &action) in agents.iter_mut().zip(actions) {
        agent.timenergy = config.timenergy_per_turn;
        let amount = match action.resource {
            Resource::Capital => {
                round.capital[action.process] += agent.capital_stock;
                process_capitalists[action.process] += 1;
                agent.capital_stock
            }
            Resource::Labour => {
                round.labour[action.process] += agent.timenergy;
                process_labourers[action.process] += 1;
                std::mem::replace(&mut agent.timenergy, 0.0)
            }
        };
        round.commitments.push(Commitment {
            agent: agent.id,
            action,
            amount,
        });
    }

    let mut output = vec![0.0; k];
    let mut rewards = vec![0.0; agents.len()];
    for (p, spec) in config.processes.iter().enumerate() {
        if round.capital[p] == 0.0 || round.labour[p] == 0.0 {
            continue;
        }
        let paid = redistribute(spec, &round.shares(p))?;
        output[p] = paid.output;
        for payout in paid.payouts {
            rewards[position(agents, payout.agent)?] = payout.reward;
        }
    }

    for ((agent, &action), &reward) in agents.iter_mut().zip(actions).zip(&rewards) {
        if config.consume_invested_capital && action.resource == Resource::Capital {
            agent.capital_stock = 0.0;
        }
        agent.capital_stock += reward;
        agent.update_q(action, reward)?;
        agent.timenergy = config.timenergy_per_turn;
    }

    let labourer_count = process_labourers.iter().sum();
    let capitalist_count = process_capitalists.iter().sum();
    let total_output = output.iter().sum();
    if !f64::is_finite(total_output) {
        return Err(Error::Runtime(format!("step {step}: non-finite output")));
    }
    let trace = StepTrace {
        step,
        output,
        rewards,
        labourer_count,
        capitalist_count,
        total_output,
        process_labourers,
        process_capitalists,
    };
    Ok((trace, round))
}

fn position(agents: &[AgentState], id: usize) -> Result<usize> {
    // Agents are normally stored in id order.
    match agents.get(id) {
        Some(a) if a.id == id => Ok(id),
        _ => agents
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| Error::Runtime(format!("unknown agent id {id}"))),
    }
}

/// A game in progress.
#[derive(Debug, Clone)]
pub struct Game {
    config: GameConfig,
    agents: Vec<AgentState>,
    rngs: Vec<ChaCha8Rng>,
    step: usize,
}

impl Game {
    pub fn new(config: GameConfig) -> Result<Self> {
        let (agents, rngs) = spawn_agents(&config)?;
        Ok(Self {
            config,
            agents,
            rngs,
            step: 0,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn step(&mut self) -> Result<StepTrace> {
        let (trace, _) = play_turn(&mut self.agents, &self.config, &mut self.rngs, self.step)?;
        self.step += 1;
        Ok(trace)
    }

    /// Play all remaining steps, returning the run record.
    pub fn run(mut self) -> Result<RunRecord> {
        let stride = self.config.effective_trace_stride();
        let mut metrics = MetricAccumulator::new(&self.config.processes, self.config.n_agents);
        let mut traces = Vec::new();
        while self.step < self.config.n_steps {
            let trace = self.step()?;
            metrics.push(&trace)?;
            if stride > 0 && trace.step % stride == 0 {
                traces.push(trace);
            }
        }
        let final_capital = self.agents.iter().map(|a| a.capital_stock).collect();
        RunRecord::new(
            self.config,
            metrics.finish()?,
            final_capital,
            stride,
            traces,
        )
    }
}

pub fn run_game(config: &GameConfig) -> Result<RunRecord> {
    Game::new(config.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, betas: &[f64]) -> GameConfig {
        GameConfig::new(
            n,
            betas
                .iter()
                .map(|&b| ProcessSpec::with_beta(b).unwrap())
                .collect(),
            LearningParams::new(0.3, 0.1, 0.02).unwrap(),
            17,
        )
    }

    #[test]
    fn forced_two_agent_turn() {
        let cfg = config(2, &[0.5]);
        let (mut agents, _) = spawn_agents(&cfg).unwrap();
        let actions = [
            ActionId::new(0, Resource::Capital),
            ActionId::new(0, Resource::Labour),
        ];
        let (trace, round) = play_turn_with_actions(&mut agents, &cfg, &actions, 0).unwrap();
        assert_eq!(trace.output, vec![100.0]);
        assert_eq!(trace.rewards, vec![50.0, 50.0]);
        assert_eq!(agents[0].capital_stock, 150.0);
        assert_eq!(agents[1].capital_stock, 150.0);
        assert_eq!(round.capital, vec![100.0]);
        assert_eq!(round.labour, vec![100.0]);
        assert_eq!((trace.labourer_count, trace.capitalist_count), (1, 1));
        assert!(agents.iter().all(|a| a.timenergy == 100.0));
    }

    #[test]
    fn lone_capitalist_earns_nothing() {
        let cfg = config(1, &[0.5]);
        let (mut agents, _) = spawn_agents(&cfg).unwrap();
        let before = agents[0].qtable.clone();
        let (trace, _) =
            play_turn_with_actions(&mut agents, &cfg, &[ActionId::new(0, Resource::Capital)], 0)
                .unwrap();
        assert_eq!(trace.total_output, 0.0);
        assert_eq!(trace.rewards, vec![0.0]);
        assert_eq!(agents[0].capital_stock, 100.0);
        assert_ne!(agents[0].qtable, before);
    }

    #[test]
    fn consumption_flag_uses_up_capital() {
        let mut cfg = config(2, &[0.5]);
        cfg.consume_invested_capital = true;
        let (mut agents, _) = spawn_agents(&cfg).unwrap();
        let actions = [
            ActionId::new(0, Resource::Capital),
            ActionId::new(0, Resource::Labour),
        ];
        play_turn_with_actions(&mut agents, &cfg, &actions, 0).unwrap();
        assert_eq!(agents[0].capital_stock, 50.0);
        assert_eq!(agents[1].capital_stock, 150.0);
    }

    #[test]
    fn rejects_out_of_range_action() {
        let cfg = config(1, &[0.5]);
        let (mut agents, _) = spawn_agents(&cfg).unwrap();
        let r = play_turn_with_actions(&mut agents, &cfg, &[ActionId::new(3, Resource::Labour)], 0);
        assert!(r.is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = config(2, &[0.5]);
        cfg.n_steps = 0;
        assert!(matches!(cfg.validate(), Err(Error::Invalid { field, .. }) if field == "n_steps"));
        assert!(run_game(&cfg).is_err());
        let cfg = config(0, &[0.5]);
        assert!(cfg.validate().is_err());
        let cfg = config(2, &[]);
        assert!(cfg.validate().is_err());
        let mut cfg = config(2, &[0.5]);
        cfg.processes[0].beta = 1.2;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("processes[0].beta"), "{err}");
    }

    #[test]
    fn trace_stride_defaults() {
        let mut cfg = config(2, &[0.5]);
        assert_eq!(cfg.effective_trace_stride(), 1);
        cfg.n_steps = 20_000;
        assert_eq!(cfg.effective_trace_stride(), 4);
        cfg.trace_stride = Some(0);
        assert_eq!(cfg.effective_trace_stride(), 0);
    }

    #[test]
    fn run_is_deterministic() {
        let mut cfg = config(4, &[0.2, 0.7]);
        cfg.n_steps = 300;
        let a = run_game(&cfg).unwrap();
        let b = run_game(&cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.traces.len(), 300);
    }
}
