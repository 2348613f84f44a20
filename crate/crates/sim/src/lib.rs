//! Monte Carlo simulation of the unit, the shock process and the vacationing
//! repairperson, sampled directly from the phase-type components. The
//! simulator never looks at the assembled generator or its event blocks, so
//! agreement with the analytic engine is a genuine cross-check.

mod engine;

use std::collections::BTreeMap;

use mmap_rel::economics::{cost_vector, total_profit_rate};
use mmap_rel::measures::{event_rates_stationary, stationary};
use mmap_rel::mmap::build_blocks;
use mmap_rel::{EconomicParameters, EventKind, EventLabel, MacroState, Model, TimeMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use engine::{Prepared, Tally};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
    #[error("at least two replications are needed for confidence intervals, got {0}")]
    TooFewReplications(usize),
    #[error("quantity {0:?} has no simulated counterpart")]
    UnknownQuantity(String),
    #[error("alpha = {0} must lie in (0, 1)")]
    Alpha(f64),
    #[error("invalid model: {0}")]
    Model(#[from] mmap_rel::ModelError),
    #[error(transparent)]
    Econ(#[from] mmap_rel::EconError),
    #[error(transparent)]
    Mmap(#[from] mmap_rel::MmapError),
    #[error(transparent)]
    Measure(#[from] mmap_rel::MeasureError),
}

/// Run length and replication settings. In discrete time `horizon` and
/// `warmup` count periods (fractions are truncated).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub replications: usize,
    pub seed: u64,
    /// Initial stretch discarded from every replication.
    pub warmup: f64,
}

impl SimConfig {
    /// Warmup defaults to 1% of the horizon.
    pub fn new(horizon: f64, replications: usize, seed: u64) -> Self {
        Self {
            horizon,
            replications,
            seed,
            warmup: 0.01 * horizon,
        }
    }

    pub fn check(&self) -> Result<(), SimError> {
        if !(self.horizon.is_finite() && self.warmup.is_finite()) {
            return Err(SimError::InvalidConfig("horizon and warmup must be finite".into()));
        }
        if !(self.warmup >= 0.0 && self.horizon > self.warmup) {
            return Err(SimError::InvalidConfig(format!(
                "need horizon > warmup >= 0, got horizon {} and warmup {}",
                self.horizon, self.warmup
            )));
        }
        if self.replications == 0 {
            return Err(SimError::InvalidConfig("replications must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sample mean over replications with a 95% t-interval half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_dev: f64,
    pub n: usize,
    pub half_width: f64,
}

impl Estimate {
    pub fn from_samples(x: &[f64]) -> Self {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let std_dev = if n > 1 {
            (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_dev,
            n,
            half_width: half_width(std_dev, n, 0.05),
        }
    }

    pub fn std_error(&self) -> f64 {
        self.std_dev / (self.n as f64).sqrt()
    }
}

/// Two-sided t-interval half-width at level `1 − alpha`; infinite below two samples.
fn half_width(std_dev: f64, n: usize, alpha: f64) -> f64 {
    if n < 2 {
        return f64::INFINITY;
    }
    t_quantile(n, alpha) * std_dev / (n as f64).sqrt()
}

fn t_quantile(n: usize, alpha: f64) -> f64 {
    StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha / 2.0)
}

/// Stationary estimates; rates are per unit time (per period in discrete time).
#[derive(Debug, Clone, Serialize)]
pub struct SimEstimates {
    pub time_mode: TimeMode,
    pub config: SimConfig,
    pub availability: Estimate,
    /// Keyed by macro-state short name.
    pub occupancy: BTreeMap<String, Estimate>,
    /// Keyed by event kind short name.
    pub event_rates: BTreeMap<String, Estimate>,
    /// Keyed by event label, only labels of the model's time mode.
    pub label_rates: BTreeMap<String, Estimate>,
    pub profit_rate: Option<Estimate>,
    /// Largest `|Σ occupancy − 1|` over replications.
    pub occupancy_residual: f64,
}

impl SimEstimates {
    /// Every estimate under the names used by [`analytic_targets`] and [`compare`].
    pub fn quantities(&self) -> BTreeMap<String, Estimate> {
        let mut out = BTreeMap::new();
        out.insert("availability".to_string(), self.availability);
        for (k, e) in &self.occupancy {
            out.insert(format!("occupancy:{k}"), *e);
        }
        for (k, e) in &self.event_rates {
            out.insert(format!("rate:{k}"), *e);
        }
        for (k, e) in &self.label_rates {
            out.insert(format!("label:{k}"), *e);
        }
        if let Some(e) = self.profit_rate {
            out.insert("profit_rate".to_string(), e);
        }
        out
    }
}

/// Runs the replications in parallel. Replication `r` draws from the ChaCha8
/// stream `r` of `seed`, so results do not depend on scheduling.
pub fn simulate(model: &Model, econ: Option<&EconomicParameters>, cfg: &SimConfig) -> Result<SimEstimates, SimError> {
    cfg.check()?;
    let issues = model.validate();
    if !issues.is_empty() {
        return Err(mmap_rel::ModelError::Invalid(issues).into());
    }
    if let Some(e) = econ {
        e.check(model)?;
    }
    let (horizon, warmup) = match model.time_mode {
        TimeMode::Continuous => (cfg.horizon, cfg.warmup),
        TimeMode::Discrete => (cfg.horizon.floor(), cfg.warmup.floor()),
    };
    if horizon <= warmup {
        return Err(SimError::InvalidConfig("no whole period left after warmup".into()));
    }
    let prepared = Prepared::new(model, econ);
    let tallies: Vec<Tally> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(rep as u64);
            prepared.run(horizon, warmup, &mut rng)
        })
        .collect();

    let span = horizon - warmup;
    let collect = |f: &dyn Fn(&Tally) -> f64| Estimate::from_samples(&tallies.iter().map(f).collect::<Vec<_>>());
    let occupancy_residual = tallies
        .iter()
        .map(|t| (t.occupancy.iter().sum::<f64>() / span - 1.0).abs())
        .fold(0.0, f64::max);
    let availability = collect(&|t| (t.occupancy[0] + t.occupancy[1]) / span);
    let occupancy = MacroState::ALL
        .iter()
        .map(|s| (s.short_name().to_string(), collect(&|t| t.occupancy[s.index()] / span)))
        .collect();
    let count = |t: &Tally, labels: &[EventLabel]| labels.iter().map(|&l| t.labels[l as usize]).sum::<u64>() as f64;
    let event_rates = EventKind::ALL
        .iter()
        .map(|k| (k.short_name().to_string(), collect(&|t| count(t, k.labels()) / span)))
        .collect();
    let label_rates = EventLabel::all(model.time_mode)
        .iter()
        .map(|&l| (l.as_str().to_string(), collect(&|t| count(t, &[l]) / span)))
        .collect();
    let profit_rate = econ.map(|_| collect(&|t| (t.reward - t.charges) / span));
    Ok(SimEstimates {
        time_mode: model.time_mode,
        config: *cfg,
        availability,
        occupancy,
        event_rates,
        label_rates,
        profit_rate,
        occupancy_residual,
    })
}

/// Stationary availability, occupancies and event rates (and the profit rate
/// when `econ` is given) from the analytic engine, named as in
/// [`SimEstimates::quantities`].
pub fn analytic_targets(model: &Model, econ: Option<&EconomicParameters>) -> Result<BTreeMap<String, f64>, SimError> {
    let process = build_blocks(model)?;
    let pi = stationary(&process)?;
    let mut out = BTreeMap::new();
    out.insert("availability".to_string(), pi.availability());
    for (s, m) in MacroState::ALL.iter().zip(pi.masses()) {
        out.insert(format!("occupancy:{}", s.short_name()), m);
    }
    for (k, r) in event_rates_stationary(&process, &pi)?.iter() {
        out.insert(format!("rate:{}", k.short_name()), r);
    }
    if let Some(e) = econ {
        let c = cost_vector(model, e)?;
        out.insert("profit_rate".to_string(), total_profit_rate(&process, &pi, &c, e)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Coverage {
    pub name: String,
    pub analytic: f64,
    pub mean: f64,
    /// Bonferroni-adjusted half-width.
    pub half_width: f64,
    /// `(mean − analytic) / std_error`; infinite when the replications agree exactly but miss.
    pub z: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub alpha: f64,
    /// Number of simultaneous intervals; each uses level `alpha / bonferroni`.
    pub bonferroni: usize,
    pub quantities: Vec<Coverage>,
    pub covered_fraction: f64,
    pub pass: bool,
}

impl Comparison {
    pub fn failures(&self) -> impl Iterator<Item = &Coverage> {
        self.quantities.iter().filter(|c| !c.covered)
    }
}

/// Checks each analytic value against a t-interval of its simulated
/// counterpart. With `m` quantities every interval has level `1 − alpha/m`;
/// the comparison passes when at least 95% of them cover.
///
/// Replications that all agree exactly give a zero-width interval, which
/// covers only values equal to the mean up to rounding.
pub fn compare(analytic: &BTreeMap<String, f64>, estimates: &SimEstimates, alpha: f64) -> Result<Comparison, SimError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SimError::Alpha(alpha));
    }
    let n = estimates.availability.n;
    if n < 2 {
        return Err(SimError::TooFewReplications(n));
    }
    let sim = estimates.quantities();
    let m = analytic.len().max(1);
    let t = t_quantile(n, alpha / m as f64);
    // pooled observed span, used when nothing at all was observed
    let exposure = n as f64 * (estimates.config.horizon - estimates.config.warmup);
    let zero_bound = (m as f64 / alpha).ln() / exposure;
    let mut quantities = Vec::with_capacity(analytic.len());
    for (name, &a) in analytic {
        let e = sim.get(name).ok_or_else(|| SimError::UnknownQuantity(name.clone()))?;
        let se = e.std_error();
        let diff = e.mean - a;
        let mut half = t * se;
        let covered = if se > 0.0 {
            diff.abs() <= half
        } else if e.mean == 0.0 && a >= 0.0 {
            // No occurrence in any replication: the t-interval collapses, so use
            // the exact Poisson interval for a zero count, [0, ln(m/alpha)/exposure].
            half = zero_bound;
            a <= zero_bound
        } else {
            diff.abs() <= 1e-12 * a.abs().max(1.0)
        };
        let z = if se > 0.0 {
            diff / se
        } else if covered {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        quantities.push(Coverage {
            name: name.clone(),
            analytic: a,
            mean: e.mean,
            half_width: half,
            z,
            covered,
        });
    }
    let covered_fraction = if quantities.is_empty() {
        1.0
    } else {
        quantities.iter().filter(|c| c.covered).count() as f64 / quantities.len() as f64
    };
    Ok(Comparison {
        alpha,
        bonferroni: m,
        quantities,
        covered_fraction,
        pass: covered_fraction >= 0.95,
    })
}
