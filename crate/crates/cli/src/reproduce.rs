//! Side-by-side rerun of the published example under its three policies.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use mmap_rel::economics::{break_even, cost_vector, total_profit_rate};
use mmap_rel::measures::{reliability, stationary};
use mmap_rel::mmap::{build_blocks, initial_distribution};
use mmap_rel::{BreakEven, EconomicParameters, MacroState, Model};
use mmap_rel_optimizer::{instantiate, PolicyParams};
use serde::Serialize;

const AVAILABILITY: [f64; 3] = [0.9089, 0.9168, 0.9187];
const PROFIT_RATE: [f64; 3] = [0.2734, 0.0164, -0.1972];
const OCCUPANCY: [[f64; 6]; 3] = [
    [0.7678, 0.1410, 0.0001, 0.0106, 0.0771, 0.0034],
    [0.2474, 0.6694, 0.0000, 0.0020, 0.0777, 0.0034],
    [0.0001, 0.9186, 0.0000, 0.0000, 0.0779, 0.0034],
];
const FIRST_FAILURE: [f64; 3] = [13.3705, 36.8556, 61.0399];
/// `None` means the profit never turns positive.
const BREAK_EVEN: [Option<f64>; 3] = [Some(155.73), Some(2646.6), None];

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    Absolute(f64),
    Relative(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub policy: &'static str,
    pub quantity: String,
    /// `None` for "never".
    pub published: Option<f64>,
    pub computed: Option<f64>,
    pub tolerance: Tolerance,
    pub within: bool,
}

impl Row {
    fn new(policy: &'static str, quantity: impl Into<String>, published: Option<f64>, computed: Option<f64>, tolerance: Tolerance) -> Self {
        let within = match (published, computed) {
            (None, None) => true,
            (Some(p), Some(c)) => match tolerance {
                Tolerance::Absolute(tol) => (c - p).abs() <= tol,
                Tolerance::Relative(tol) => (c - p).abs() <= tol * p.abs(),
            },
            _ => false,
        };
        Self {
            policy,
            quantity: quantity.into(),
            published,
            computed,
            tolerance,
            within,
        }
    }

    fn deviation(&self) -> Option<f64> {
        Some(self.computed? - self.published?)
    }
}

/// Every published scalar with its recomputed value.
pub fn compare_published(template: &Model, econ: &EconomicParameters) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (k, name) in PolicyParams::NAMES.into_iter().enumerate() {
        let params = PolicyParams::named(name).expect("named policy");
        let model = instantiate(template, &params)?;
        let process = build_blocks(&model)?;
        let pi = stationary(&process)?;
        let theta = initial_distribution(&model)?;
        let c = cost_vector(&model, econ)?;

        rows.push(Row::new(name, "availability", Some(AVAILABILITY[k]), Some(pi.availability()), Tolerance::Absolute(0.01)));
        let profit = total_profit_rate(&process, &pi, &c, econ)?;
        rows.push(Row::new(name, "profit_rate", Some(PROFIT_RATE[k]), Some(profit), Tolerance::Absolute(0.01)));
        for (s, (&want, got)) in MacroState::ALL.iter().zip(OCCUPANCY[k].iter().zip(pi.masses())) {
            rows.push(Row::new(name, format!("occupancy_{}", s.short_name()), Some(want), Some(got), Tolerance::Absolute(0.01)));
        }
        let mttf = reliability(&process, &theta)?.mean()?;
        rows.push(Row::new(name, "mean_time_to_failure", Some(FIRST_FAILURE[k]), Some(mttf), Tolerance::Relative(0.02)));
        let be = match break_even(&process, &theta, &c, econ, &pi)? {
            BreakEven::At(t) => Some(t),
            BreakEven::Never => None,
            BreakEven::BeyondCap(cap) => Some(cap),
        };
        rows.push(Row::new(name, "break_even", BREAK_EVEN[k], be, Tolerance::Relative(0.02)));
    }
    Ok(rows)
}

fn show(x: Option<f64>) -> String {
    x.map_or_else(|| "never".to_string(), |v| format!("{v:.4}"))
}

pub fn run(model: &Path, econ: &Path, out: &Path) -> Result<()> {
    let template = Model::load(model).with_context(|| format!("loading {}", model.display()))?;
    let econ = EconomicParameters::load(econ).with_context(|| format!("loading {}", econ.display()))?;
    let rows = compare_published(&template, &econ)?;

    println!("{:<7} {:<22} {:>12} {:>12} {:>11}  within", "policy", "quantity", "published", "computed", "deviation");
    for r in &rows {
        println!(
            "{:<7} {:<22} {:>12} {:>12} {:>11}  {}",
            r.policy,
            r.quantity,
            show(r.published),
            show(r.computed),
            r.deviation().map_or_else(|| "-".to_string(), |d| format!("{d:+.4}")),
            if r.within { "yes" } else { "NO" }
        );
    }
    let missed = rows.iter().filter(|r| !r.within).count();
    println!("{} of {} published values reproduced within tolerance", rows.len() - missed, rows.len());
    let economic_miss = rows
        .iter()
        .any(|r| !r.within && matches!(r.quantity.as_str(), "profit_rate" | "break_even"));
    if economic_miss {
        // the published economics line up with PM phase costs equal to the repair phase costs
        let alt = EconomicParameters {
            pm_phase_costs: econ.repair_phase_costs.clone(),
            ..econ.clone()
        };
        println!("economic values with PM phase costs set to the repair phase costs:");
        for r in compare_published(&template, &alt)?
            .iter()
            .filter(|r| matches!(r.quantity.as_str(), "profit_rate" | "break_even"))
        {
            println!(
                "  {:<7} {:<12} published {:>10}  computed {:>10}  {}",
                r.policy,
                r.quantity,
                show(r.published),
                show(r.computed),
                if r.within { "yes" } else { "NO" }
            );
        }
    }

    std::fs::create_dir_all(out)?;
    let path = out.join("reproduce.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(f, "policy,quantity,published,computed,deviation,within")?;
    for r in &rows {
        let cell = |x: Option<f64>| x.map_or_else(|| "never".to_string(), |v| format!("{v}"));
        let dev = r.deviation().map_or_else(String::new, |d| format!("{d}"));
        writeln!(f, "{},{},{},{},{dev},{}", r.policy, r.quantity, cell(r.published), cell(r.computed), r.within)?;
    }
    f.flush()?;
    println!("wrote {}", path.display());
    let path = out.join("reproduce.json");
    std::fs::write(&path, serde_json::to_string_pretty(&rows)? + "\n")?;
    println!("wrote {}", path.display());
    Ok(())
}
