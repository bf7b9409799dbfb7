//! Marginal-productivity curves over the elasticity of capital, one curve
//! pair per labour:capital ratio.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{marginal_productivities, FormulaMode, ProcessInput, ProcessSpec};

pub const CURVE_COLUMNS: [&str; 7] = [
    "ratio",
    "labour",
    "capital",
    "beta",
    "multiplier",
    "mpc",
    "mpl",
];

/// Labour and capital units in a fixed proportion, written `labour:capital`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub labour: f64,
    pub capital: f64,
}

impl Ratio {
    pub fn new(labour: f64, capital: f64) -> Result<Self> {
        if !(labour.is_finite() && capital.is_finite() && labour > 0.0 && capital > 0.0) {
            return Err(Error::invalid(
                "ratios",
                format!("both sides must be positive and finite, got {labour}:{capital}"),
            ));
        }
        Ok(Self { labour, capital })
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.labour, self.capital)
    }
}

impl std::str::FromStr for Ratio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (l, c) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid("ratios", format!("`{s}` is not of the form L:C")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::invalid("ratios", format!("`{s}`: {e}")))
        };
        Ratio::new(parse(l)?, parse(c)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRequest {
    pub ratios: Vec<Ratio>,
    /// Number of interior grid points; beta takes the values `i / (points + 1)`.
    pub beta_points: usize,
    pub multiplier: f64,
    pub mode: FormulaMode,
}

impl Default for CurveRequest {
    /// Ratios 1:1, 20:1 and 1:20 on a 99-point grid (0.01 .. 0.99), M = 1.
    fn default() -> Self {
        Self {
            ratios: vec![
                Ratio {
                    labour: 1.0,
                    capital: 1.0,
                },
                Ratio {
                    labour: 20.0,
                    capital: 1.0,
                },
                Ratio {
                    labour: 1.0,
                    capital: 20.0,
                },
            ],
            beta_points: 99,
            multiplier: 1.0,
            mode: FormulaMode::TrueDerivatives,
        }
    }
}

impl CurveRequest {
    pub fn betas(&self) -> Vec<f64> {
        let denom = (self.beta_points + 1) as f64;
        (1..=self.beta_points).map(|i| i as f64 / denom).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() {
            return Err(Error::invalid("ratios", "need at least one ratio"));
        }
        if self.beta_points == 0 {
            return Err(Error::invalid(
                "beta_points",
                "need at least one grid point",
            ));
        }
        if !(self.multiplier.is_finite() && self.multiplier >= 1.0) {
            return Err(Error::invalid("multiplier", "must be finite and >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub ratio: Ratio,
    pub beta: f64,
    pub mpc: f64,
    pub mpl: f64,
}

pub fn analyze(request: &CurveRequest) -> Result<Vec<CurvePoint>> {
    request.validate()?;
    let betas = request.betas();
    let mut out = Vec::with_capacity(betas.len() * request.ratios.len());
    for ratio in &request.ratios {
        let input = ProcessInput::new(ratio.capital, ratio.labour)?;
        for &beta in &betas {
            let spec = ProcessSpec::new(beta, request.multiplier)?;
            let (mpc, mpl) = marginal_productivities(&spec, &input, request.mode)?;
            out.push(CurvePoint {
                ratio: *ratio,
                beta,
                mpc,
                mpl,
            });
        }
    }
    Ok(out)
}

pub fn write_curves<W: Write>(out: W, multiplier: f64, points: &[CurvePoint]) -> Result<()> {
    let origin = Path::new("<curves>");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_COLUMNS)
        .map_err(|e| Error::parse(origin, e))?;
    for p in points {
        w.write_record([
            p.ratio.label(),
            p.ratio.labour.to_string(),
            p.ratio.capital.to_string(),
            p.beta.to_string(),
            multiplier.to_string(),
            p.mpc.to_string(),
            p.mpl.to_string(),
        ])
        .map_err(|e| Error::parse(origin, e))?;
    }
    w.flush().map_err(|e| Error::io(origin, e))
}

pub fn read_curves<R: std::io::Read>(input: R, path: &Path) -> Result<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| Error::parse(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != CURVE_COLUMNS {
        return Err(Error::parse(
            path,
            format!("expected columns {}", CURVE_COLUMNS.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::parse(path, e))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|e| Error::parse(path, format!("column `{}`: {e}", CURVE_COLUMNS[i])))
        };
        out.push(CurvePoint {
            ratio: Ratio::new(num(1)?, num(2)?)?,
            beta: num(3)?,
            mpc: num(5)?,
            mpl: num(6)?,
        });
    }
    Ok(out)
}
