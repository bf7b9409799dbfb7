//! Stateless Q-learning agents.
//!
//! Each agent keeps one q-value per process-resource pair and picks actions
//! epsilon-greedily. There is a single environment state, so the bootstrap
//! term of the update maxes over the same table.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resource an agent commits in full to one process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Resource {
    Capital,
    Labour,
}

/// One process-resource action. Actions are laid out as
/// `[P0-Capital, P0-Labour, P1-Capital, ...]` in a q-table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId {
    pub process: usize,
    pub resource: Resource,
}

impl ActionId {
    pub fn new(process: usize, resource: Resource) -> Self {
        Self { process, resource }
    }

    pub fn index(&self) -> usize {
        2 * self.process
            + match self.resource {
                Resource::Capital => 0,
                Resource::Labour => 1,
            }
    }

    pub fn from_index(index: usize) -> Self {
        let resource = if index.is_multiple_of(2) {
            Resource::Capital
        } else {
            Resource::Labour
        };
        Self {
            process: index / 2,
            resource,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    values: Vec<f64>,
}

/// Upper end of the uniform q-value initialisation range.
pub const INITIAL_Q_MAX: f64 = 100.0;

impl QTable {
    /// Table for `processes` processes with explicit values, `2 * processes` of them.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(2) {
            return Err(Error::invalid(
                "qtable",
                format!("need 2k values for k >= 1 processes, got {}", values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("qtable", format!("non-finite q-value {v}")));
        }
        Ok(Self { values })
    }

    /// All `2k` entries drawn i.i.d. uniform on `[0, 100]`.
    pub fn random<R: Rng + ?Sized>(processes: usize, rng: &mut R) -> Result<Self> {
        if processes < 1 {
            return Err(Error::invalid("k", "need at least one process"));
        }
        let values = (0..2 * processes)
            .map(|_| rng.gen_range(0.0..=INITIAL_Q_MAX))
            .collect();
        Ok(Self { values })
    }

    pub fn processes(&self) -> usize {
        self.values.len() / 2
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, action: ActionId) -> f64 {
        self.values[action.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn init_qtable<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<QTable> {
    QTable::random(k, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningParams {
    /// Learning rate, in (0, 1].
    pub alpha: f64,
    /// Discount, in [0, 1).
    pub gamma: f64,
    /// Exploration probability, in [0, 1].
    pub epsilon: f64,
}

impl LearningParams {
    pub fn new(alpha: f64, gamma: f64, epsilon: f64) -> Result<Self> {
        let p = Self {
            alpha,
            gamma,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(
                "alpha",
                format!("must lie in (0, 1], got {}", self.alpha),
            ));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(
                "gamma",
                format!("must lie in [0, 1), got {}", self.gamma),
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(
                "epsilon",
                format!("must lie in [0, 1], got {}", self.epsilon),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub capital_stock: f64,
    /// Labour units available this turn.
    pub timenergy: f64,
    pub qtable: QTable,
    pub params: LearningParams,
}

impl AgentState {
    /// Epsilon-greedy selection.
    ///
    /// Always consumes exactly two uniform `f64` draws from `rng`: the first
    /// decides explore vs. exploit, the second picks an index, either among
    /// all `2k` actions (explore) or among the tied maximisers (exploit).
    pub fn select_action<R: Rng + ?Sized>(&self, rng: &mut R) -> ActionId {
        let explore_draw: f64 = rng.gen();
        let pick_draw: f64 = rng.gen();
        let values = self.qtable.values();
        if explore_draw < self.params.epsilon {
            return ActionId::from_index(pick(pick_draw, values.len()));
        }
        let best = self.qtable.max_value();
        let ties = values.iter().filter(|&&v| v == best).count();
        let nth = pick(pick_draw, ties);
        let index = values
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v == best)
            .nth(nth)
            .map(|(i, _)| i)
            .expect("q-table has a maximiser");
        ActionId::from_index(index)
    }

    /// `Q(a) += alpha * (r + gamma * max Q - Q(a))`, with `max Q` read from
    /// the table before the update. Only `Q(a)` changes.
    pub fn update_q(&mut self, action: ActionId, reward: f64) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::Runtime(format!(
                "agent {}: non-finite reward {reward}",
                self.id
            )));
        }
        let index = action.index();
        if index >= self.qtable.len() {
            return Err(Error::invalid(
                "action",
                format!("process {} is outside the agent's table", action.process),
            ));
        }
        let LearningParams { alpha, gamma, .. } = self.params;
        let best = self.qtable.max_value();
        let q = &mut self.qtable.values[index];
        *q += alpha * (reward + gamma * best - *q);
        if !q.is_finite() {
            return Err(Error::Runtime(format!(
                "agent {}: q-value overflowed to {q}",
                self.id
            )));
        }
        Ok(())
    }
}

/// Map a uniform draw in [0, 1) onto `0..n`.
fn pick(u: f64, n: usize) -> usize {
    ((u * n as f64) as usize).min(n - 1)
}

pub fn select_action<R: Rng + ?Sized>(agent: &AgentState, rng: &mut R) -> ActionId {
    agent.select_action(rng)
}

pub fn update_q(agent: &AgentState, action: ActionId, reward: f64) -> Result<AgentState> {
    let mut next = agent.clone();
    next.update_q(action, reward)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent(values: Vec<f64>, alpha: f64, gamma: f64, epsilon: f64) -> AgentState {
        AgentState {
            id: 0,
            capital_stock: 100.0,
            timenergy: 100.0,
            qtable: QTable::from_values(values).unwrap(),
            params: LearningParams::new(alpha, gamma, epsilon).unwrap(),
        }
    }

    #[test]
    fn action_index_round_trip() {
        for i in 0..16 {
            assert_eq!(ActionId::from_index(i).index(), i);
        }
        assert_eq!(ActionId::new(3, Resource::Labour).index(), 7);
    }

    #[test]
    fn greedy_picks_unique_maximum() {
        let a = agent(vec![1.0, 5.0, 9.0, 2.0], 0.5, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(
                a.select_action(&mut rng),
                ActionId::new(1, Resource::Capital)
            );
        }
    }

    #[test]
    fn greedy_ties_are_split() {
        let a = agent(vec![3.0, 3.0, 1.0, 3.0], 0.5, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; 4];
        for _ in 0..30_000 {
            counts[a.select_action(&mut rng).index()] += 1;
        }
        assert_eq!(counts[2], 0);
        for i in [0, 1, 3] {
            let f = counts[i] as f64 / 30_000.0;
            assert!((f - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn uniform_when_always_exploring() {
        let a = agent(vec![0.0, 10.0, 0.0, 0.0], 0.5, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 4];
        for _ in 0..100_000 {
            counts[a.select_action(&mut rng).index()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 100_000.0 - 0.25).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn epsilon_tenth_single_process() {
        let a = agent(vec![10.0, 0.0], 0.5, 0.0, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let hits = (0..100_000)
            .filter(|_| a.select_action(&mut rng).resource == Resource::Capital)
            .count();
        assert!((hits as f64 / 100_000.0 - 0.95).abs() < 0.01);
    }

    #[test]
    fn select_consumes_two_draws() {
        use rand::RngCore;
        let a = agent(vec![1.0, 1.0, 1.0, 0.0], 0.5, 0.0, 0.3);
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            a.select_action(&mut r1);
            let _: f64 = r2.gen();
            let _: f64 = r2.gen();
        }
        assert_eq!(r1.next_u64(), r2.next_u64());
    }

    #[test]
    fn update_examples() {
        let a = agent(vec![7.0, 3.0], 1.0, 0.0, 0.0);
        let b = update_q(&a, ActionId::from_index(0), 42.0).unwrap();
        assert_eq!(b.qtable.values(), &[42.0, 3.0]);

        let a = agent(vec![10.0, 3.0], 0.5, 0.0, 0.0);
        let b = update_q(&a, ActionId::from_index(0), 20.0).unwrap();
        assert_eq!(b.qtable.values()[0], 15.0);

        let a = agent(vec![0.0, 50.0], 0.1, 0.9, 0.0);
        let b = update_q(&a, ActionId::from_index(0), 10.0).unwrap();
        assert!((b.qtable.values()[0] - 5.5).abs() < 1e-12);
        assert_eq!(b.qtable.values()[1], 50.0);
    }

    #[test]
    fn update_uses_pre_update_maximum() {
        // a is the argmax: target = r + gamma * Q(a) with the old Q(a).
        let a = agent(vec![20.0, 5.0], 0.5, 0.5, 0.0);
        let b = update_q(&a, ActionId::from_index(0), 0.0).unwrap();
        assert_eq!(b.qtable.values()[0], 20.0 + 0.5 * (0.0 + 10.0 - 20.0));
    }

    #[test]
    fn update_fixed_point() {
        let a = agent(vec![10.0, 4.0], 0.3, 0.5, 0.0);
        let b = update_q(&a, ActionId::from_index(0), 5.0).unwrap();
        assert_eq!(b.qtable, a.qtable);
    }

    #[test]
    fn update_rejects_non_finite_reward() {
        let a = agent(vec![1.0, 1.0], 0.5, 0.5, 0.0);
        assert!(update_q(&a, ActionId::from_index(0), f64::NAN).is_err());
        assert!(update_q(&a, ActionId::from_index(1), f64::INFINITY).is_err());
    }

    #[test]
    fn init_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = init_qtable(2, &mut rng).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.values().iter().all(|v| (0.0..=100.0).contains(v)));

        let t1 = init_qtable(3, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let t2 = init_qtable(3, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(t1, t2);

        let t = init_qtable(256, &mut rng).unwrap();
        assert_eq!(t.len(), 512);
        let mean = t.values().iter().sum::<f64>() / 512.0;
        assert!((45.0..=55.0).contains(&mean), "mean {mean}");

        assert!(init_qtable(0, &mut rng).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(LearningParams::new(0.0, 0.5, 0.1).is_err());
        assert!(LearningParams::new(1.0, 1.0, 0.1).is_err());
        assert!(LearningParams::new(1.0, 0.0, 1.5).is_err());
        assert!(LearningParams::new(0.01, 0.99, 0.0).is_ok());
    }
}
