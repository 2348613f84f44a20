//! Net reward vector, expected total profit and the break-even time.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matkit::{expm, expm_with_integral, augmented_integrator, MatError, Matrix};
use crate::measures::{
    cumulative_occupancy, event_intensities, power_and_prefix_sum, EventKind, Horizon, MacroDistribution,
    MeasureError,
};
use crate::mmap::MarkedProcess;
use crate::model::{MacroState, SystemModel, TimeMode};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EconError {
    #[error("cannot read economics file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed economics JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{field} has length {got}, the model needs {expected}")]
    Dimension {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{field} must be nonnegative, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("{field} is not finite")]
    NonFinite { field: &'static str },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// Monetary constants. Rates are per unit time in continuous models and
/// per period in discrete ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomicParameters {
    #[serde(alias = "B")]
    pub gross_benefit: f64,
    #[serde(alias = "C")]
    pub downtime_cost: f64,
    /// One entry per internal phase.
    #[serde(alias = "c0")]
    pub level_costs: Vec<f64>,
    /// One entry per damage phase.
    #[serde(alias = "cd")]
    pub damage_costs: Vec<f64>,
    #[serde(alias = "cr1")]
    pub repair_phase_costs: Vec<f64>,
    #[serde(alias = "cr2")]
    pub pm_phase_costs: Vec<f64>,
    #[serde(alias = "H")]
    pub presence_cost: f64,
    #[serde(alias = "F")]
    pub vacation_cost: f64,
    #[serde(alias = "G")]
    pub return_cost: f64,
    #[serde(alias = "fcr")]
    pub fixed_cr: f64,
    #[serde(alias = "fpm")]
    pub fixed_pm: f64,
    #[serde(alias = "fnu", alias = "fmu")]
    pub unit_cost: f64,
}

impl EconomicParameters {
    pub fn from_json_str(s: &str) -> Result<Self, EconError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EconError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Rescales the per-unit-time rates to per-period amounts for a model
    /// discretized with step `h`. Per-event charges are left alone.
    pub fn per_period(&self, h: f64) -> Self {
        let scale = |v: &[f64]| v.iter().map(|x| x * h).collect();
        Self {
            gross_benefit: self.gross_benefit * h,
            downtime_cost: self.downtime_cost * h,
            level_costs: scale(&self.level_costs),
            damage_costs: scale(&self.damage_costs),
            repair_phase_costs: scale(&self.repair_phase_costs),
            pm_phase_costs: scale(&self.pm_phase_costs),
            presence_cost: self.presence_cost * h,
            vacation_cost: self.vacation_cost * h,
            ..self.clone()
        }
    }

    /// Checks lengths against the model and signs of the cost constants.
    pub fn check<T: Scalar>(&self, model: &SystemModel<T>) -> Result<(), EconError> {
        let lengths = [
            ("level_costs", &self.level_costs, model.m()),
            ("damage_costs", &self.damage_costs, model.d()),
            ("repair_phase_costs", &self.repair_phase_costs, model.m1()),
            ("pm_phase_costs", &self.pm_phase_costs, model.m2()),
        ];
        for (field, v, expected) in lengths {
            if v.len() != expected {
                return Err(EconError::Dimension {
                    field,
                    expected,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EconError::NonFinite { field });
            }
        }
        if !self.gross_benefit.is_finite() {
            return Err(EconError::NonFinite { field: "gross_benefit" });
        }
        let fixed = [
            ("downtime_cost", self.downtime_cost),
            ("presence_cost", self.presence_cost),
            ("vacation_cost", self.vacation_cost),
            ("return_cost", self.return_cost),
            ("fixed_cr", self.fixed_cr),
            ("fixed_pm", self.fixed_pm),
            ("unit_cost", self.unit_cost),
        ];
        for (field, value) in fixed {
            if !value.is_finite() {
                return Err(EconError::NonFinite { field });
            }
            if value < 0.0 {
                return Err(EconError::Negative { field, value });
            }
        }
        Ok(())
    }
}

/// Net reward per unit time (or per period) in every phase.
///
/// Operational phases earn `B` less the wear-level and damage costs, and pay
/// `F` while the repairperson is away or `H` while present. Down phases pay
/// `C` plus the repairperson's cost; repair and PM phases add their own
/// phase costs.
pub fn cost_vector<T: Scalar>(model: &SystemModel<T>, econ: &EconomicParameters) -> Result<Vec<T>, EconError> {
    econ.check(model)?;
    let layout = model.layout();
    let mut c = vec![T::zero(); layout.total()];
    for g in 0..layout.total() {
        let (s, x) = layout.decode(g).expect("index within layout");
        let value = match s {
            MacroState::OperationalVacation => {
                econ.gross_benefit - econ.vacation_cost - econ.level_costs[x[0]] - econ.damage_costs[x[2]]
            }
            MacroState::OperationalPresent => {
                econ.gross_benefit - econ.presence_cost - econ.level_costs[x[0]] - econ.damage_costs[x[2]]
            }
            MacroState::RepairableFailure | MacroState::NonRepairableFailure => {
                -(econ.downtime_cost + econ.vacation_cost)
            }
            MacroState::CorrectiveRepair => {
                -(econ.downtime_cost + econ.presence_cost) - econ.repair_phase_costs[x[1]]
            }
            MacroState::PreventiveMaintenance => {
                -(econ.downtime_cost + econ.presence_cost) - econ.pm_phase_costs[x[1]]
            }
        };
        c[g] = T::lit(value);
    }
    Ok(c)
}

/// Folds the fixed per-event charges into the reward vector:
/// `w = c − fnu·r_NU − fcr·r_CR − fpm·r_PM − G·r_R`, where `r_X` holds the
/// per-phase event intensities. Then `Λ(t) = θM(t)w − fnu`.
pub fn net_reward_vector<T: Scalar>(
    process: &MarkedProcess<T>,
    c: &[T],
    econ: &EconomicParameters,
) -> Result<Vec<T>, EconError> {
    if c.len() != process.dim() {
        return Err(MeasureError::Dimension {
            got: c.len(),
            expected: process.dim(),
        }
        .into());
    }
    let r = event_intensities(process);
    let charges = [
        (EventKind::NewUnit, econ.unit_cost),
        (EventKind::CorrectiveRepair, econ.fixed_cr),
        (EventKind::PreventiveMaintenance, econ.fixed_pm),
        (EventKind::Return, econ.return_cost),
    ];
    let mut w = c.to_vec();
    for (kind, cost) in charges {
        let cost = T::lit(cost);
        for (wi, &ri) in w.iter_mut().zip(&r[kind as usize]) {
            *wi -= cost * ri;
        }
    }
    Ok(w)
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Expected accumulated reward `Φ` up to the horizon.
pub fn profit_transient<T: Scalar>(
    process: &MarkedProcess<T>,
    theta: &[T],
    c: &[T],
    horizon: Horizon<T>,
) -> Result<T, EconError> {
    let occ = cumulative_occupancy(process, theta, horizon)?;
    if c.len() != occ.len() {
        return Err(MeasureError::Dimension {
            got: c.len(),
            expected: occ.len(),
        }
        .into());
    }
    Ok(dot(&occ, c))
}

/// Expected total profit `Λ` up to the horizon, including the cost of the
/// initial unit and all fixed per-event charges.
pub fn total_profit<T: Scalar>(
    process: &MarkedProcess<T>,
    theta: &[T],
    c: &[T],
    econ: &EconomicParameters,
    horizon: Horizon<T>,
) -> Result<T, EconError> {
    let w = net_reward_vector(process, c, econ)?;
    Ok(profit_transient(process, theta, &w, horizon)? - T::lit(econ.unit_cost))
}

/// Long-run profit per unit time (per period in discrete time).
pub fn total_profit_rate<T: Scalar>(
    process: &MarkedProcess<T>,
    pi: &MacroDistribution<T>,
    c: &[T],
    econ: &EconomicParameters,
) -> Result<T, EconError> {
    let w = net_reward_vector(process, c, econ)?;
    Ok(pi.dot(&w))
}

/// Outcome of the break-even search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BreakEven {
    /// First time (or period count) at which the expected total profit turns positive.
    At(f64),
    /// The long-run profit rate is not positive.
    Never,
    /// The rate is positive but no sign change was found before the cap.
    BeyondCap(f64),
}

/// Largest horizon the break-even search examines.
pub const BREAK_EVEN_CAP: f64 = 1e6;

/// Locates the first zero of `Λ(t)` on a doubling grid from `t = 1`, then
/// bisects to a relative bracket width of 1e-3 and interpolates linearly
/// inside the final bracket.
pub fn break_even<T: Scalar>(
    process: &MarkedProcess<T>,
    theta: &[T],
    c: &[T],
    econ: &EconomicParameters,
    pi: &MacroDistribution<T>,
) -> Result<BreakEven, EconError> {
    if total_profit_rate(process, pi, c, econ)? <= T::zero() {
        return Ok(BreakEven::Never);
    }
    let w = net_reward_vector(process, c, econ)?;
    let fnu = econ.unit_cost;
    match process.time_mode() {
        TimeMode::Continuous => break_even_continuous(process, theta, &w, fnu),
        TimeMode::Discrete => break_even_discrete(process, theta, &w, fnu),
    }
}

fn break_even_continuous<T: Scalar>(
    process: &MarkedProcess<T>,
    theta: &[T],
    w: &[T],
    fnu: f64,
) -> Result<BreakEven, EconError> {
    let n = process.dim();
    let lambda_from = |m: &Matrix<T>| dot(&m.left_mul_vec(theta), w).as_f64() - fnu;
    let lambda_at = |t: f64| -> Result<f64, EconError> {
        let (_, m) = expm_with_integral(process.matrix(), T::lit(t))?;
        Ok(lambda_from(&m))
    };
    if fnu <= 0.0 && lambda_at(1e-9)? >= 0.0 {
        return Ok(BreakEven::At(0.0));
    }
    // exp([[Q, I], [0, 0]]·t) carries M(t) in its upper-right block; squaring
    // doubles t.
    let mut aug = expm(&augmented_integrator(process.matrix()), T::one())?;
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut f_lo, mut f_hi) = (-fnu, lambda_from(&aug.block(0, n, n, n)));
    while f_hi <= 0.0 {
        if hi >= BREAK_EVEN_CAP {
            return Ok(BreakEven::BeyondCap(BREAK_EVEN_CAP));
        }
        aug = &aug * &aug;
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = lambda_from(&aug.block(0, n, n, n));
    }
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        let f_mid = lambda_at(mid)?;
        if f_mid > 0.0 {
            hi = mid;
            f_hi = f_mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    let root = lo + (hi - lo) * (-f_lo) / (f_hi - f_lo);
    Ok(BreakEven::At(root.clamp(lo, hi)))
}

fn break_even_discrete<T: Scalar>(
    process: &MarkedProcess<T>,
    theta: &[T],
    w: &[T],
    fnu: f64,
) -> Result<BreakEven, EconError> {
    let d = process.matrix();
    // Λ^ν uses Σ_{n=0}^{ν} θDⁿw, the prefix sum of length ν+1.
    let lambda_at = |steps: u64| -> f64 {
        let (_, s) = power_and_prefix_sum(d, steps + 1);
        dot(&s.left_mul_vec(theta), w).as_f64() - fnu
    };
    if lambda_at(0) > 0.0 {
        return Ok(BreakEven::At(0.0));
    }
    let (mut lo, mut hi) = (0u64, 1u64);
    while lambda_at(hi) <= 0.0 {
        if hi as f64 >= BREAK_EVEN_CAP {
            return Ok(BreakEven::BeyondCap(BREAK_EVEN_CAP));
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if lambda_at(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(BreakEven::At(hi as f64))
}
