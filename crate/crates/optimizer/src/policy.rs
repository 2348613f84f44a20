use mmap_rel::economics::{cost_vector, total_profit_rate};
use mmap_rel::measures::stationary;
use mmap_rel::mmap::build_blocks;
use mmap_rel::{EconomicParameters, Matrix, Model, TimeMode};
use serde::{Deserialize, Serialize};

use crate::OptError;

/// Order-3 Coxian vacation `V = [[−V1, V2, 0], [0, −V3, V4], [0, 0, −V5]]`
/// entered in phase 1, plus one stay/leave probability per non-critical level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub v: [f64; 5],
    pub p: Vec<f64>,
}

impl PolicyParams {
    pub fn new(v: [f64; 5], p: Vec<f64>) -> Result<Self, OptError> {
        let out = Self { v, p };
        out.check()?;
        Ok(out)
    }

    pub fn check(&self) -> Result<(), OptError> {
        let [v1, v2, v3, v4, v5] = self.v;
        let bad = |msg: String| Err(OptError::InvalidParams(msg));
        if self.v.iter().chain(&self.p).any(|x| !x.is_finite()) {
            return bad("non-finite value".into());
        }
        for (name, x) in [("V1", v1), ("V3", v3), ("V5", v5)] {
            if x <= 0.0 {
                return bad(format!("{name} = {x} must be positive"));
            }
        }
        if !(0.0..=v1).contains(&v2) {
            return bad(format!("V2 = {v2} must lie in [0, V1 = {v1}]"));
        }
        if !(0.0..=v3).contains(&v4) {
            return bad(format!("V4 = {v4} must lie in [0, V3 = {v3}]"));
        }
        if let Some((k, x)) = self.p.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return bad(format!("p{} = {x} outside [0, 1]", k + 1));
        }
        Ok(())
    }

    pub fn generator(&self) -> Matrix<f64> {
        let [v1, v2, v3, v4, v5] = self.v;
        Matrix::from_rows(&[[-v1, v2, 0.0], [0.0, -v3, v4], [0.0, 0.0, -v5]]).expect("3x3 rows")
    }

    pub fn entry() -> Vec<f64> {
        vec![1.0, 0.0, 0.0]
    }

    /// The three published policies: `model1` (most profitable), `model2`
    /// (closest to the ideal point) and `model3` (most available).
    pub fn named(name: &str) -> Option<Self> {
        let (v, p) = match name {
            "model1" => ([10.1881, 10.1659, 10.1855, 9.8288, 8.3987], [0.9999, 0.5089]),
            "model2" => ([10.2026, 10.1463, 10.1936, 9.8266, 8.4319], [0.9153, 0.5088]),
            "model3" => ([959.2034, 2.1422, 634.2397, 178.3713, 390.6219], [0.0379, 0.3374]),
            _ => return None,
        };
        Some(Self { v, p: p.to_vec() })
    }

    pub const NAMES: [&'static str; 3] = ["model1", "model2", "model3"];
}

/// Replaces the vacation distribution and stay probabilities of a continuous template.
pub fn instantiate(template: &Model, params: &PolicyParams) -> Result<Model, OptError> {
    if template.time_mode != TimeMode::Continuous {
        return Err(OptError::DiscreteTemplate);
    }
    params.check()?;
    let needed = template.levels() - 1;
    if params.p.len() != needed {
        return Err(OptError::InvalidParams(format!(
            "{} stay probabilities given, the model has {needed} non-critical levels",
            params.p.len()
        )));
    }
    Ok(template.with_vacation(PolicyParams::entry(), params.generator(), params.p.clone())?)
}

/// A policy with its stationary profit rate `f1` and availability `f2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub params: PolicyParams,
    pub profit_rate: f64,
    pub availability: f64,
}

impl ParetoPoint {
    pub fn objectives(&self) -> [f64; 2] {
        [self.profit_rate, self.availability]
    }
}

/// Builds the process for the policy and evaluates both objectives.
pub fn evaluate(template: &Model, econ: &EconomicParameters, params: &PolicyParams) -> Result<ParetoPoint, OptError> {
    let model = instantiate(template, params)?;
    let process = build_blocks(&model)?;
    let pi = stationary(&process)?;
    let c = cost_vector(&model, econ)?;
    let profit_rate = total_profit_rate(&process, &pi, &c, econ)?;
    let availability = pi.availability();
    if !profit_rate.is_finite() || !availability.is_finite() {
        return Err(OptError::InvalidParams("non-finite objective".into()));
    }
    Ok(ParetoPoint {
        params: params.clone(),
        profit_rate,
        availability,
    })
}
