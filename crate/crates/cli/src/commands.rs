use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use mmap_rel::economics::{break_even, cost_vector, net_reward_vector, total_profit_rate};
use mmap_rel::matkit::expm_with_integral;
use mmap_rel::measures::{
    cumulative_occupancy, event_intensities, event_rates_stationary, geometric_grid, reliability, stationary,
    transient as transient_at, write_csv,
};
use mmap_rel::mmap::{build_blocks, initial_distribution};
use mmap_rel::{
    BreakEven, EconomicParameters, EventKind, Horizon, MacroDistribution, MacroState, Model, ModelError, TimeMode,
};
use mmap_rel_optimizer::{
    instantiate, pareto_front, select_closest, select_max_availability, select_max_profit, GaConfig, PolicyParams,
};
use mmap_rel_sim::{analytic_targets, compare, SimConfig};
use rayon::prelude::*;
use serde_json::json;

use crate::ModelArgs;

pub fn policy(spec: &str) -> Result<PolicyParams> {
    if let Some(p) = PolicyParams::named(spec) {
        return Ok(p);
    }
    let text = std::fs::read_to_string(spec)
        .with_context(|| format!("{spec:?} is neither model1/model2/model3 nor a readable policy file"))?;
    let p: PolicyParams = serde_json::from_str(&text).with_context(|| format!("malformed policy file {spec}"))?;
    p.check()?;
    Ok(p)
}

/// The model after applying `--params` and `--discretize`, with the step.
pub fn load_model(args: &ModelArgs) -> Result<(Model, Option<f64>)> {
    let mut model = Model::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    if let Some(p) = &args.params {
        model = instantiate(&model, &policy(p)?)?;
    }
    if let Some(h) = args.discretize {
        ensure!(h > 0.0 && h.is_finite(), "--discretize needs a positive step, got {h}");
        model = model.discretize(h)?;
    }
    Ok((model, args.discretize))
}

/// Economics checked against the model; rates become per-period amounts
/// when the model was discretized here.
pub fn load_econ(path: &Path, model: &Model, step: Option<f64>) -> Result<EconomicParameters> {
    let mut econ = EconomicParameters::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(h) = step {
        econ = econ.per_period(h);
    }
    econ.check(model)?;
    Ok(econ)
}

fn write_json(out: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let path = out.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn csv_file(out: &Path, name: &str) -> Result<(BufWriter<File>, std::path::PathBuf)> {
    std::fs::create_dir_all(out)?;
    let path = out.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((BufWriter::new(f), path))
}

fn describe(model: &Model) -> String {
    format!(
        "{:?} model: {} levels, m={} t={} d={} v={} m1={} m2={}, {} states",
        model.time_mode,
        model.levels(),
        model.m(),
        model.t(),
        model.d(),
        model.v(),
        model.m1(),
        model.m2(),
        model.layout().total()
    )
}

pub fn validate(model: &Path, econ: Option<&Path>) -> Result<()> {
    let m = match Model::load(model) {
        Ok(m) => m,
        Err(e) => {
            if !e.issues().is_empty() {
                println!("{}: {} problem(s)", model.display(), e.issues().len());
                for issue in e.issues() {
                    println!("  {issue}");
                }
                return Err(e).context("validation failed");
            }
            return Err(e).with_context(|| format!("loading {}", model.display()));
        }
    };
    println!("{}: ok", model.display());
    println!("  {}", describe(&m));
    if let Some(path) = econ {
        EconomicParameters::load(path)
            .and_then(|e| e.check(&m))
            .with_context(|| format!("economics {}", path.display()))?;
        println!("{}: ok", path.display());
    }
    Ok(())
}

pub fn build(args: &ModelArgs, dump: bool, out: &Path) -> Result<()> {
    let (model, _) = load_model(args)?;
    let process = build_blocks(&model)?;
    println!("{}", describe(&model));
    for s in MacroState::ALL {
        println!("  {:<5} {:>4} states", s.short_name(), process.layout().dim(s));
    }
    let target = match model.time_mode {
        TimeMode::Continuous => 0.0,
        TimeMode::Discrete => 1.0,
    };
    let residual = process
        .matrix()
        .row_sums()
        .iter()
        .map(|s| (s - target).abs())
        .fold(0.0, f64::max);
    println!("  max row-sum residual {residual:.3e}");
    for (label, b) in process.blocks() {
        let nnz = b.as_slice().iter().filter(|x| **x != 0.0).count();
        println!("  block {:<9} {nnz} nonzeros", label.as_str());
    }
    if dump {
        let dir = out.join("blocks");
        let files = process.dump_blocks(&dir)?;
        println!("wrote {} block files to {}", files.len(), dir.display());
    }
    Ok(())
}

fn break_even_json(b: BreakEven) -> serde_json::Value {
    match b {
        BreakEven::At(t) => json!({"kind": "at", "value": t}),
        BreakEven::Never => json!({"kind": "never"}),
        BreakEven::BeyondCap(cap) => json!({"kind": "beyond_cap", "cap": cap}),
    }
}

pub fn measures(args: &ModelArgs, econ: Option<&Path>, out: &Path) -> Result<()> {
    let (model, step) = load_model(args)?;
    let econ = econ.map(|p| load_econ(p, &model, step)).transpose()?;
    let process = build_blocks(&model)?;
    let pi = stationary(&process)?;
    let theta = initial_distribution(&model)?;
    let rates = event_rates_stationary(&process, &pi)?;
    let mttf = reliability(&process, &theta)?.mean()?;
    let unit = match model.time_mode {
        TimeMode::Continuous => "per unit time",
        TimeMode::Discrete => "per period",
    };

    println!("{}", describe(&model));
    println!("occupancy");
    for (s, m) in MacroState::ALL.iter().zip(pi.masses()) {
        println!("  {:<5} {m:.6}", s.short_name());
    }
    println!("availability          {:.6}", pi.availability());
    println!("mean time to failure  {mttf:.6}");
    println!("event rates ({unit})");
    for (k, r) in rates.iter() {
        println!("  {:<4} {r:.6e}", k.short_name());
    }
    let mut report = json!({
        "time_mode": model.time_mode,
        "step": step,
        "states": process.dim(),
        "pi": pi.global(),
        "occupancy": MacroState::ALL.iter().zip(pi.masses())
            .map(|(s, m)| (s.short_name().to_string(), json!(m))).collect::<serde_json::Map<_, _>>(),
        "availability": pi.availability(),
        "mean_time_to_failure": mttf,
        "event_rates": rates.iter()
            .map(|(k, r)| (k.short_name().to_string(), json!(r))).collect::<serde_json::Map<_, _>>(),
    });
    if let Some(e) = &econ {
        let c = cost_vector(&model, e)?;
        let profit = total_profit_rate(&process, &pi, &c, e)?;
        let be = break_even(&process, &theta, &c, e, &pi)?;
        println!("profit rate ({unit})  {profit:.6}");
        match be {
            BreakEven::At(t) => println!("break-even            {t:.4}"),
            BreakEven::Never => println!("break-even            never"),
            BreakEven::BeyondCap(cap) => println!("break-even            beyond {cap:e}"),
        }
        report["profit_rate"] = json!(profit);
        report["break_even"] = break_even_json(be);
    }
    write_json(out, "measures.json", &report)
}

/// `start:stop:points`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    ensure!(parts.len() == 3, "grid must look like start:stop:points, got {s:?}");
    let start: f64 = parts[0].trim().parse().context("grid start")?;
    let stop: f64 = parts[1].trim().parse().context("grid stop")?;
    let points: usize = parts[2].trim().parse().context("grid points")?;
    ensure!(
        start > 0.0 && stop >= start && stop.is_finite() && points >= 1,
        "grid needs 0 < start <= stop and at least one point"
    );
    Ok(geometric_grid(start, stop, points))
}

pub fn transient(args: &ModelArgs, econ: Option<&Path>, grid: &str, out: &Path) -> Result<()> {
    let (model, step) = load_model(args)?;
    let econ = econ.map(|p| load_econ(p, &model, step)).transpose()?;
    let times = parse_grid(grid)?;
    let process = build_blocks(&model)?;
    let theta = initial_distribution(&model)?;
    let rel = reliability(&process, &theta)?;
    let intensities = event_intensities(&process);
    let reward = match &econ {
        Some(e) => Some((net_reward_vector(&process, &cost_vector(&model, e)?, e)?, e.unit_cost)),
        None => None,
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    // discrete models are sampled at whole periods; `h` converts back to time
    let h = step.unwrap_or(1.0);
    let horizons: Vec<Horizon<f64>> = match model.time_mode {
        TimeMode::Continuous => times.iter().map(|&t| Horizon::Time(t)).collect(),
        TimeMode::Discrete => {
            let mut steps: Vec<u64> = times.iter().map(|t| (t / h).round() as u64).collect();
            steps.dedup();
            steps.into_iter().map(Horizon::Steps).collect()
        }
    };
    let rows: Vec<Vec<f64>> = horizons
        .par_iter()
        .map(|&hz| -> Result<Vec<f64>> {
            let (p, occ) = match hz {
                Horizon::Time(t) => {
                    let (e, m) = expm_with_integral(process.matrix(), t)?;
                    (e.left_mul_vec(&theta), m.left_mul_vec(&theta))
                }
                Horizon::Steps(_) => (
                    transient_at(&process, &theta, hz)?.global().to_vec(),
                    cumulative_occupancy(&process, &theta, hz)?,
                ),
            };
            let dist = MacroDistribution::new(p, process.layout().clone())?;
            let t = match hz {
                Horizon::Time(t) => t,
                Horizon::Steps(n) => n as f64 * h,
            };
            let mut row = vec![t, dist.availability(), rel.survival(hz)?];
            row.extend(EventKind::ALL.iter().map(|&k| dot(&occ, &intensities[k as usize])));
            if let Some((w, fnu)) = &reward {
                row.push(dot(&occ, w) - fnu);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut header: Vec<String> = vec!["t".into(), "availability".into(), "reliability".into()];
    header.extend(EventKind::ALL.iter().map(|k| format!("count_{}", k.short_name())));
    if reward.is_some() {
        header.push("profit".into());
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let (mut f, path) = csv_file(out, "transient.csv")?;
    write_csv(&mut f, &header, &rows)?;
    f.flush()?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

pub fn optimize(model: &Path, econ: &Path, cfg: &GaConfig, out: &Path) -> Result<()> {
    let template = Model::load(model).with_context(|| format!("loading {}", model.display()))?;
    if template.time_mode != TimeMode::Continuous {
        return Err(ModelError::WrongTimeMode {
            expected: TimeMode::Continuous,
        })
        .context("the optimizer needs a continuous template");
    }
    let econ = load_econ(econ, &template, None)?;
    let front = pareto_front(&template, &econ, cfg)?;
    let k = template.levels() - 1;

    let mut header: Vec<String> = ["f1", "f2", "V1", "V2", "V3", "V4", "V5"].map(String::from).to_vec();
    header.extend((1..=k).map(|i| format!("p{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = front
        .iter()
        .map(|p| {
            let mut r = vec![p.profit_rate, p.availability];
            r.extend(p.params.v);
            r.extend(&p.params.p);
            r
        })
        .collect();
    let (mut f, path) = csv_file(out, "pareto.csv")?;
    write_csv(&mut f, &header, &rows)?;
    f.flush()?;
    println!("wrote {} ({} points)", path.display(), rows.len());

    let (closest, distance) = select_closest(&front)?;
    let best_profit = select_max_profit(&front)?;
    let best_avail = select_max_availability(&front)?;
    println!("max profit rate   {:.6} (A = {:.6})", best_profit.profit_rate, best_profit.availability);
    println!("max availability  {:.6} (f1 = {:.6})", best_avail.availability, best_avail.profit_rate);
    println!(
        "closest to ideal  f1 = {:.6}, A = {:.6}, distance {distance:.4}",
        closest.profit_rate, closest.availability
    );
    write_json(
        out,
        "selection.json",
        &json!({
            "config": cfg,
            "front_size": front.len(),
            "ideal_point": mmap_rel_optimizer::ideal_point(&front)?,
            "closest": { "point": closest, "normalized_distance": distance },
            "max_profit": best_profit,
            "max_availability": best_avail,
        }),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    args: &ModelArgs,
    econ: Option<&Path>,
    horizon: f64,
    reps: usize,
    seed: u64,
    warmup: Option<f64>,
    alpha: f64,
    out: &Path,
) -> Result<()> {
    let (model, step) = load_model(args)?;
    let econ = econ.map(|p| load_econ(p, &model, step)).transpose()?;
    let warmup = warmup.unwrap_or(0.01 * horizon);
    // a model discretized here runs for the same span of time
    let h = step.unwrap_or(1.0);
    let cfg = SimConfig {
        horizon: horizon / h,
        replications: reps,
        seed,
        warmup: warmup / h,
    };
    let est = mmap_rel_sim::simulate(&model, econ.as_ref(), &cfg)?;
    let targets = analytic_targets(&model, econ.as_ref())?;
    let cmp = compare(&targets, &est, alpha)?;
    println!(
        "{} quantities, {} covered at family-wise level {alpha}",
        cmp.quantities.len(),
        cmp.quantities.iter().filter(|c| c.covered).count()
    );
    for c in &cmp.quantities {
        println!(
            "  {:<16} analytic {:>12.6e}  simulated {:>12.6e} ± {:.2e}  {}",
            c.name,
            c.analytic,
            c.mean,
            c.half_width,
            if c.covered { "ok" } else { "MISS" }
        );
    }
    write_json(
        out,
        "sim_report.json",
        &json!({ "step": step, "estimates": est, "comparison": cmp }),
    )?;
    if !cmp.pass {
        bail!("simulation does not cover the analytic values");
    }
    Ok(())
}
