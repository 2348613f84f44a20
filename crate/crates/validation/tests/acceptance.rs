//! Acceptance criteria, each run at its stated tolerance. Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::cell::Cell;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use mmap_rel::economics::{break_even, cost_vector, total_profit_rate};
use mmap_rel::matkit::expm_with_integral;
use mmap_rel::measures::{
    event_intensities, event_rates_stationary, reliability, stationary, stationary_block_reduction,
    stationary_direct,
};
use mmap_rel::mmap::{build_blocks, initial_distribution};
use mmap_rel::model::Component;
use mmap_rel::testkit::random_model;
use mmap_rel::{
    BreakEven, EconomicParameters, EventKind, MacroDistribution, MacroState, MarkedProcess, Model, TimeMode,
};
use mmap_rel_optimizer::{
    dominates, instantiate, pareto_front, select_closest, GaConfig, ParetoPoint, PolicyParams,
};
use mmap_rel_sim::{analytic_targets, compare, simulate, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const AVAILABILITY: [f64; 3] = [0.9089, 0.9168, 0.9187];
const PROFIT_RATE: [f64; 3] = [0.2734, 0.0164, -0.1972];
const OCCUPANCY: [[f64; 6]; 3] = [
    [0.7678, 0.1410, 0.0001, 0.0106, 0.0771, 0.0034],
    [0.2474, 0.6694, 0.0000, 0.0020, 0.0777, 0.0034],
    [0.0001, 0.9186, 0.0000, 0.0000, 0.0779, 0.0034],
];
const FIRST_FAILURE: [f64; 3] = [13.3705, 36.8556, 61.0399];
const BREAK_EVEN: [Option<f64>; 3] = [Some(155.73), Some(2646.6), None];

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn template() -> Model {
    Model::load(data("paper_example.json")).expect("example model loads")
}

fn econ() -> EconomicParameters {
    EconomicParameters::load(data("paper_economics.json")).expect("economics load")
}

fn policy(name: &str) -> Model {
    instantiate(&template(), &PolicyParams::named(name).unwrap()).unwrap()
}

/// Collects the verdict of one criterion while printing its details.
struct Check {
    ok: bool,
}

impl Check {
    fn new() -> Self {
        Self { ok: true }
    }

    fn expect(&mut self, cond: bool, what: impl AsRef<str>) {
        if !cond {
            self.ok = false;
        }
        println!("    [{}] {}", if cond { "ok" } else { "MISS" }, what.as_ref());
    }
}

fn random_models() -> Vec<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    for _ in 0..50 {
        out.push(random_model(&mut rng, TimeMode::Continuous));
        out.push(random_model(&mut rng, TimeMode::Discrete));
    }
    out
}

fn row_sum_gap(p: &MarkedProcess<f64>) -> f64 {
    let target = match p.time_mode() {
        TimeMode::Continuous => 0.0,
        TimeMode::Discrete => 1.0,
    };
    p.matrix().row_sums().iter().map(|s| (s - target).abs()).fold(0.0, f64::max)
}

fn criterion_1() -> bool {
    let mut c = Check::new();
    let m = template();
    let cr = m.ph(Component::CorrectiveRepair).mean().unwrap();
    let pm = m.ph(Component::PreventiveMaintenance).mean().unwrap();
    let shock = m.ph(Component::ShockClock).mean().unwrap();
    c.expect((cr - 6.4384).abs() <= 1e-3, format!("corrective repair mean {cr:.6} vs 6.4384"));
    c.expect((pm - 1.1645).abs() <= 1e-3, format!("maintenance mean {pm:.6} vs 1.1645"));
    c.expect((shock - 5.0).abs() <= 1e-3, format!("shock inter-arrival mean {shock:.6} vs 5"));
    for (k, want) in [(1, 100.0), (2, 11.375), (3, 1.4)] {
        let got = m.level_sojourn_mean(k).unwrap();
        c.expect((got - want).abs() <= 1e-3, format!("level {k} sojourn mean {got:.6} vs {want}"));
    }
    c.ok
}

fn criterion_2(models: &[Model]) -> bool {
    let mut c = Check::new();
    for (name, m) in [("example", template()), ("example discretized", template().discretize(0.05).unwrap())] {
        let gap = row_sum_gap(&build_blocks(&m).unwrap());
        c.expect(gap < 1e-9, format!("{name}: max row-sum gap {gap:.2e}"));
    }
    for mode in [TimeMode::Continuous, TimeMode::Discrete] {
        let gaps: Vec<f64> = models
            .iter()
            .filter(|m| m.time_mode == mode)
            .map(|m| row_sum_gap(&build_blocks(m).unwrap()))
            .collect();
        let worst = gaps.iter().copied().fold(0.0, f64::max);
        c.expect(
            gaps.len() == 50 && worst < 1e-9,
            format!("{} random {mode:?} models: max row-sum gap {worst:.2e}", gaps.len()),
        );
    }
    c.ok
}

fn criterion_3(models: &[Model]) -> bool {
    let mut c = Check::new();
    let mut all = vec![template(), template().discretize(0.05).unwrap()];
    all.extend(models.iter().cloned());
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for m in &all {
        let p = build_blocks(m).unwrap();
        match (stationary_block_reduction(&p), stationary_direct(&p)) {
            (Ok(a), Ok(b)) => {
                let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                worst = worst.max(gap);
            }
            _ => failures += 1,
        }
    }
    c.expect(failures == 0, format!("{} models solved by both methods, {failures} failures", all.len()));
    c.expect(worst <= 1e-9, format!("max per-entry difference {worst:.2e}"));
    c.ok
}

struct Economic {
    profit: f64,
    break_even: Option<f64>,
}

fn economics_of(model: &Model, e: &EconomicParameters) -> Economic {
    let p = build_blocks(model).unwrap();
    let pi = stationary(&p).unwrap();
    let theta = initial_distribution(model).unwrap();
    let c = cost_vector(model, e).unwrap();
    let profit = total_profit_rate(&p, &pi, &c, e).unwrap();
    let break_even = match break_even(&p, &theta, &c, e, &pi).unwrap() {
        BreakEven::At(t) => Some(t),
        BreakEven::Never => None,
        BreakEven::BeyondCap(cap) => Some(cap),
    };
    Economic { profit, break_even }
}

fn economic_targets_met(k: usize, got: &Economic, c: &mut Check, tag: &str) -> bool {
    let name = PolicyParams::NAMES[k];
    let profit_ok = (got.profit - PROFIT_RATE[k]).abs() <= 0.01;
    let be_ok = match (BREAK_EVEN[k], got.break_even) {
        (None, None) => true,
        (Some(want), Some(t)) => (t - want).abs() <= 0.02 * want,
        _ => false,
    };
    let show = |x: Option<f64>| x.map_or_else(|| "never".to_string(), |v| format!("{v:.2}"));
    c.expect(profit_ok, format!("{tag}{name}: profit rate {:.4} vs {}", got.profit, PROFIT_RATE[k]));
    c.expect(be_ok, format!("{tag}{name}: break-even {} vs {}", show(got.break_even), show(BREAK_EVEN[k])));
    profit_ok && be_ok
}

/// Criterion 4 is conditional: economic misses are acceptable only when the
/// simulator agrees with the engine (criterion 5) and the miss is traced to
/// an input ambiguity.
fn criterion_4(oracle_passed: bool, conditional: &Cell<bool>) -> bool {
    let mut c = Check::new();
    let e = econ();
    let mut economic_miss = false;
    for (k, name) in PolicyParams::NAMES.into_iter().enumerate() {
        let m = policy(name);
        let p = build_blocks(&m).unwrap();
        let pi = stationary(&p).unwrap();
        let a = pi.availability();
        c.expect((a - AVAILABILITY[k]).abs() <= 0.01, format!("{name}: availability {a:.4} vs {}", AVAILABILITY[k]));
        for (s, (&want, got)) in MacroState::ALL.iter().zip(OCCUPANCY[k].iter().zip(pi.masses())) {
            c.expect((got - want).abs() <= 0.01, format!("{name}: occupancy {} {got:.4} vs {want}", s.short_name()));
        }
        let theta = initial_distribution(&m).unwrap();
        let mttf = reliability(&p, &theta).unwrap().mean().unwrap();
        let rel = (mttf - FIRST_FAILURE[k]).abs() / FIRST_FAILURE[k];
        c.expect(rel <= 0.02, format!("{name}: mean time to failure {mttf:.4} vs {} ({:.2}%)", FIRST_FAILURE[k], 100.0 * rel));
        let mut sub = Check::new();
        if !economic_targets_met(k, &economics_of(&m, &e), &mut sub, "") {
            economic_miss = true;
        }
    }
    let non_economic_ok = c.ok;
    if !economic_miss {
        return non_economic_ok;
    }
    // attribution: the shipped PM phase costs (1,2,3) against PM costs equal to the repair costs
    println!("    economic targets missed with the shipped economics; attribution run:");
    let alt = EconomicParameters {
        pm_phase_costs: e.repair_phase_costs.clone(),
        ..e.clone()
    };
    let mut attributed = true;
    for (k, name) in PolicyParams::NAMES.into_iter().enumerate() {
        let mut sub = Check::new();
        attributed &= economic_targets_met(k, &economics_of(&policy(name), &alt), &mut sub, "PM costs = repair costs, ");
    }
    println!(
        "    economic misses attributed to the PM phase-cost input: {}; criterion 5 {}",
        if attributed { "yes" } else { "no" },
        if oracle_passed { "passes" } else { "fails" }
    );
    conditional.set(true);
    non_economic_ok && attributed && oracle_passed
}

fn criterion_5() -> bool {
    let mut c = Check::new();
    for (k, name) in PolicyParams::NAMES.into_iter().enumerate() {
        let continuous = policy(name);
        let discrete = continuous.discretize(0.05).unwrap();
        // the discretized run covers the same span of time: 2·10⁵ / 0.05 periods
        for (mode, model, horizon) in [("continuous", &continuous, 2e5), ("discretized", &discrete, 2e5 / 0.05)] {
            let t0 = Instant::now();
            let est = simulate(model, None, &SimConfig::new(horizon, 20, 1000 + k as u64)).unwrap();
            let targets = analytic_targets(model, None).unwrap();
            assert_eq!(targets.len(), 14);
            let cmp = compare(&targets, &est, 0.05).unwrap();
            let missed: Vec<String> = cmp.failures().map(|f| format!("{} (z = {:.2})", f.name, f.z)).collect();
            c.expect(
                cmp.pass,
                format!(
                    "{name} {mode}: {}/{} covered at family-wise 95% ({:.1}s){}",
                    cmp.quantities.len() - missed.len(),
                    cmp.quantities.len(),
                    t0.elapsed().as_secs_f64(),
                    if missed.is_empty() { String::new() } else { format!(", missed {}", missed.join(", ")) }
                ),
            );
        }
    }
    c.ok
}

fn criterion_6() -> bool {
    let mut c = Check::new();
    let t0 = Instant::now();
    let cfg = GaConfig::default();
    let front = pareto_front(&template(), &econ(), &cfg).unwrap();
    let dominated = front
        .iter()
        .enumerate()
        .filter(|(i, a)| front.iter().enumerate().any(|(j, b)| *i != j && dominates(&b.objectives(), &a.objectives())))
        .count();
    c.expect(
        !front.is_empty() && dominated == 0,
        format!("{} front points, {dominated} dominated ({:.1}s)", front.len(), t0.elapsed().as_secs_f64()),
    );
    let f1 = front.iter().map(|p| p.profit_rate).fold(f64::NEG_INFINITY, f64::max);
    let f2 = front.iter().map(|p| p.availability).fold(f64::NEG_INFINITY, f64::max);
    c.expect(f1 >= 0.26, format!("max profit rate {f1:.4} >= 0.26"));
    c.expect(f2 >= 0.915, format!("max availability {f2:.5} >= 0.915"));

    let published: Vec<ParetoPoint> = PolicyParams::NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| ParetoPoint {
            params: PolicyParams::named(name).unwrap(),
            profit_rate: PROFIT_RATE[k],
            availability: AVAILABILITY[k],
        })
        .collect();
    let (chosen, d) = select_closest(&published).unwrap();
    c.expect(
        chosen.params == PolicyParams::named("model2").unwrap(),
        format!("ideal-point selection on the published points picks f1 = {}, distance {d:.4}", chosen.profit_rate),
    );
    c.ok
}

fn criterion_7() -> bool {
    let mut c = Check::new();
    let t = 1e4;
    let m = template();
    let p = build_blocks(&m).unwrap();
    let pi = stationary(&p).unwrap();
    let theta = initial_distribution(&m).unwrap();
    let (e, integral) = expm_with_integral(p.matrix(), t).unwrap();
    let at = MacroDistribution::new(e.left_mul_vec(&theta), p.layout().clone()).unwrap();
    let gap = (at.availability() - pi.availability()).abs();
    c.expect(gap <= 1e-6, format!("|A(t) − A| = {gap:.2e} at t = 1e4"));
    let occ = integral.left_mul_vec(&theta);
    let intensities = event_intensities(&p);
    let rates = event_rates_stationary(&p, &pi).unwrap();
    for kind in EventKind::ALL {
        let count: f64 = occ.iter().zip(&intensities[kind as usize]).map(|(a, b)| a * b).sum();
        let gap = (count / t - rates.get(kind)).abs();
        c.expect(gap <= 1e-4, format!("{kind}: |Ψ(t)/t − Ψ| = {gap:.2e} at t = 1e4"));
    }
    c.ok
}

fn main() -> ExitCode {
    let models = random_models();
    let titles = [
        "phase-type means",
        "structural row sums",
        "stationary two-method agreement",
        "published regression",
        "simulation oracle equivalence",
        "optimizer soundness",
        "transient consistency at t = 1e4",
    ];
    let run = |i: usize, f: &mut dyn FnMut() -> bool| {
        println!("criterion {}: {}", i + 1, titles[i]);
        let t0 = Instant::now();
        let ok = f();
        println!(
            "criterion {} {} {} ({:.1}s)",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            titles[i],
            t0.elapsed().as_secs_f64()
        );
        ok
    };
    let mut verdicts = [false; 7];
    verdicts[0] = run(0, &mut criterion_1);
    verdicts[1] = run(1, &mut || criterion_2(&models));
    verdicts[2] = run(2, &mut || criterion_3(&models));
    // criterion 4 depends on the oracle verdict, so the oracle runs first
    verdicts[4] = run(4, &mut criterion_5);
    let oracle = verdicts[4];
    let conditional = Cell::new(false);
    verdicts[3] = run(3, &mut || criterion_4(oracle, &conditional));
    verdicts[5] = run(5, &mut criterion_6);
    verdicts[6] = run(6, &mut criterion_7);

    println!("summary");
    for (i, ok) in verdicts.iter().enumerate() {
        let note = if i == 3 && *ok && conditional.get() {
            " (conditional: economic values match only with PM costs equal to repair costs)"
        } else {
            ""
        };
        println!("{} criterion {}: {}{note}", if *ok { "PASS" } else { "FAIL" }, i + 1, titles[i]);
    }
    if verdicts.iter().all(|v| *v) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
