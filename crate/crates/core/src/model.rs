//! Cobb-Douglas production kernel.
//!
//! A process turns capital `C` and labour `L` into output
//! `Y = M * C^beta * L^(1 - beta)` and pays `beta * Y` to its capital
//! providers and `(1 - beta) * Y` to its labourers, each side split in
//! proportion to what was committed. Every produced unit is sold at price 1,
//! so output is measured directly in capital units.
//!
//! All functions here are pure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One production process: elasticity of capital and output multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub beta: f64,
    #[serde(default = "default_multiplier")]
    pub multiplier: f64,
}

fn default_multiplier() -> f64 {
    1.0
}

impl ProcessSpec {
    pub fn new(beta: f64, multiplier: f64) -> Result<Self> {
        let spec = Self { beta, multiplier };
        spec.validate()?;
        Ok(spec)
    }

    /// Process with multiplier 1.
    pub fn with_beta(beta: f64) -> Result<Self> {
        Self::new(beta, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid(
                "beta",
                format!("elasticity must lie in (0, 1), got {}", self.beta),
            ));
        }
        if !(self.multiplier.is_finite() && self.multiplier >= 1.0) {
            return Err(Error::invalid(
                "multiplier",
                format!(
                    "multiplier must be finite and >= 1, got {}",
                    self.multiplier
                ),
            ));
        }
        Ok(())
    }
}

/// Total capital and labour committed to a process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessInput {
    pub capital: f64,
    pub labour: f64,
}

impl ProcessInput {
    pub fn new(capital: f64, labour: f64) -> Result<Self> {
        let input = Self { capital, labour };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("capital", self.capital), ("labour", self.labour)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(format!(
                    "{name} input must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-agent contributions to one process.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Shares {
    pub capital: Vec<(usize, f64)>,
    pub labour: Vec<(usize, f64)>,
}

impl Shares {
    pub fn totals(&self) -> Result<ProcessInput> {
        for &(id, v) in self.capital.iter().chain(&self.labour) {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(format!(
                    "share of agent {id} must be finite and non-negative, got {v}"
                )));
            }
        }
        let capital = self.capital.iter().map(|&(_, v)| v).sum();
        let labour = self.labour.iter().map(|&(_, v)| v).sum();
        ProcessInput::new(capital, labour)
    }
}

/// Output of a process: `M * C^beta * L^(1-beta)`, and exactly 0 when either
/// input is 0.
pub fn production(spec: &ProcessSpec, input: &ProcessInput) -> Result<f64> {
    spec.validate()?;
    input.validate()?;
    Ok(production_unchecked(spec, input.capital, input.labour))
}

#[inline]
pub(crate) fn production_unchecked(spec: &ProcessSpec, capital: f64, labour: f64) -> f64 {
    if capital == 0.0 || labour == 0.0 {
        return 0.0;
    }
    spec.multiplier * capital.powf(spec.beta) * labour.powf(1.0 - spec.beta)
}

fn interior(spec: &ProcessSpec, input: &ProcessInput) -> Result<()> {
    spec.validate()?;
    input.validate()?;
    if input.capital == 0.0 || input.labour == 0.0 {
        return Err(Error::domain(
            "marginal productivity is undefined when capital or labour is zero",
        ));
    }
    Ok(())
}

/// `dY/dC = beta * M * (L/C)^(1-beta)`.
pub fn marginal_productivity_capital(spec: &ProcessSpec, input: &ProcessInput) -> Result<f64> {
    interior(spec, input)?;
    Ok(spec.beta * spec.multiplier * (input.labour / input.capital).powf(1.0 - spec.beta))
}

/// `dY/dL = (1-beta) * M * (C/L)^beta`.
pub fn marginal_productivity_labour(spec: &ProcessSpec, input: &ProcessInput) -> Result<f64> {
    interior(spec, input)?;
    Ok((1.0 - spec.beta) * spec.multiplier * (input.capital / input.labour).powf(spec.beta))
}

/// Reward paid to one agent by a process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payout {
    pub agent: usize,
    pub reward: f64,
}

/// Result of running a process for one turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Redistribution {
    pub output: f64,
    /// Capital providers first, in the order given, then labourers.
    pub payouts: Vec<Payout>,
}

/// Produce from the share totals and split the output: `beta * Y` among
/// capital providers and `(1 - beta) * Y` among labourers, pro rata.
///
/// A process missing either side produces nothing and every payout is 0.
pub fn redistribute(spec: &ProcessSpec, shares: &Shares) -> Result<Redistribution> {
    spec.validate()?;
    let totals = shares.totals()?;
    let output = production_unchecked(spec, totals.capital, totals.labour);
    let capital_pool = spec.beta * output;
    let labour_pool = (1.0 - spec.beta) * output;

    let pay = |pool: f64, total: f64, amount: f64| {
        if output == 0.0 {
            0.0
        } else {
            pool * (amount / total)
        }
    };
    let payouts = shares
        .capital
        .iter()
        .map(|&(agent, c)| Payout {
            agent,
            reward: pay(capital_pool, totals.capital, c),
        })
        .chain(shares.labour.iter().map(|&(agent, l)| Payout {
            agent,
            reward: pay(labour_pool, totals.labour, l),
        }))
        .collect();
    Ok(Redistribution { output, payouts })
}

/// Which closed forms to use when tabulating marginal productivities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormulaMode {
    /// Partial derivatives of the production function.
    TrueDerivatives,
    /// The alternative labelling with the two right-hand sides exchanged:
    /// `mpC = (1-beta) M (C/L)^beta`, `mpL = beta M (L/C)^(1-beta)`.
    PaperPrinted,
}

/// `(mpC, mpL)` under the selected formula mode.
pub fn marginal_productivities(
    spec: &ProcessSpec,
    input: &ProcessInput,
    mode: FormulaMode,
) -> Result<(f64, f64)> {
    match mode {
        FormulaMode::TrueDerivatives => Ok((
            marginal_productivity_capital(spec, input)?,
            marginal_productivity_labour(spec, input)?,
        )),
        FormulaMode::PaperPrinted => {
            interior(spec, input)?;
            let (b, m) = (spec.beta, spec.multiplier);
            let (c, l) = (input.capital, input.labour);
            Ok((
                (1.0 - b) * m * (c / l).powf(b),
                b * m * (l / c).powf(1.0 - b),
            ))
        }
    }
}
