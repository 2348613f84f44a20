mod common;

use mmap_rel::matkit::expm_integral;
use mmap_rel::measures::{
    availability_transient, cumulative_occupancy, event_counts, event_rates_stationary, reliability, stationary,
    transient, EventKind, Horizon,
};
use mmap_rel::mmap::{build_blocks, initial_distribution};
use mmap_rel::{MacroState, Model, Model32, ModelConfig, TimeMode};

const AVAILABILITY: [f64; 3] = [0.9089, 0.9168, 0.9187];
const OCCUPANCY: [[f64; 6]; 3] = [
    [0.7678, 0.1410, 0.0001, 0.0106, 0.0771, 0.0034],
    [0.2474, 0.6694, 0.0000, 0.0020, 0.0777, 0.0034],
    [0.0001, 0.9186, 0.0000, 0.0000, 0.0779, 0.0034],
];
const FIRST_FAILURE: [f64; 3] = [13.3705, 36.8556, 61.0399];

fn policy(k: usize) -> Model {
    common::with_policy(&common::example(), k)
}

#[test]
fn published_availability_and_occupancy() {
    for k in 0..3 {
        let p = build_blocks(&policy(k)).unwrap();
        let pi = stationary(&p).unwrap();
        assert!((pi.availability() - AVAILABILITY[k]).abs() < 1e-3, "model {}: A = {}", k + 1, pi.availability());
        for (s, (&got, &want)) in pi.masses().iter().zip(&OCCUPANCY[k]).enumerate() {
            assert!((got - want).abs() < 0.01, "model {} cell {s}: {got} vs {want}", k + 1);
        }
    }
}

#[test]
fn published_first_failure_means() {
    for k in 0..3 {
        let model = policy(k);
        let p = build_blocks(&model).unwrap();
        let theta = initial_distribution(&model).unwrap();
        let mean = reliability(&p, &theta).unwrap().mean().unwrap();
        let rel = (mean - FIRST_FAILURE[k]).abs() / FIRST_FAILURE[k];
        assert!(rel < 0.02, "model {}: mean {mean}", k + 1);
    }
}

#[test]
fn reliability_mean_is_integral_of_survival() {
    let model = common::example();
    let p = build_blocks(&model).unwrap();
    let theta = initial_distribution(&model).unwrap();
    let rel = reliability(&p, &theta).unwrap();
    let n = p.layout().offset(MacroState::RepairableFailure);
    let sub = p.matrix().block(0, 0, n, n);
    let area: f64 = expm_integral(&sub, 3000.0).unwrap().left_mul_vec(&theta[..n]).iter().sum();
    assert!((rel.mean().unwrap() - area).abs() < 1e-8);
    assert!((rel.survival(Horizon::Time(0.0)).unwrap() - 1.0).abs() < 1e-14);
    let s = [1.0, 10.0, 50.0].map(|t| rel.survival(Horizon::Time(t)).unwrap());
    assert!(s[0] > s[1] && s[1] > s[2] && s[2] > 0.0);
    assert!(rel.survival(Horizon::Steps(3)).is_err());
}

#[test]
fn transient_starts_at_theta_and_approaches_stationary() {
    let model = common::example();
    let p = build_blocks(&model).unwrap();
    let theta = initial_distribution(&model).unwrap();
    let p0 = transient(&p, &theta, Horizon::Time(0.0)).unwrap();
    assert_eq!(p0.global(), &theta[..]);
    assert!((p0.availability() - 1.0).abs() < 1e-15);
    let pi = stationary(&p).unwrap();
    let late = transient(&p, &theta, Horizon::Time(1e4)).unwrap();
    assert!((late.availability() - pi.availability()).abs() < 1e-6);
    assert!((late.total() - 1.0).abs() < 1e-9);
    let grid: Vec<_> = [0.1, 1.0, 10.0].iter().map(|&t| Horizon::Time(t)).collect();
    let a = availability_transient(&p, &theta, &grid).unwrap();
    assert!(a.iter().all(|&x| x > 0.0 && x <= 1.0 + 1e-12));
}

#[test]
fn horizon_must_match_time_mode() {
    let model = common::example();
    let p = build_blocks(&model).unwrap();
    let theta = initial_distribution(&model).unwrap();
    assert!(transient(&p, &theta, Horizon::Steps(3)).is_err());
    assert!(transient(&p, &theta, Horizon::Time(-1.0)).is_err());
    assert!(transient(&p, &theta[1..], Horizon::Time(1.0)).is_err());
}

#[test]
fn discrete_transient_is_repeated_multiplication() {
    let model = common::example().discretize(0.05).unwrap();
    let p = build_blocks(&model).unwrap();
    let theta = initial_distribution(&model).unwrap();
    let mut v = theta.clone();
    for n in 0..=60u64 {
        if n == 5 || n == 33 || n == 60 {
            let got = transient(&p, &theta, Horizon::Steps(n)).unwrap();
            let gap = got.global().iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(gap < 1e-13, "n = {n}: {gap:e}");
        }
        v = p.matrix().left_mul_vec(&v);
    }
}

#[test]
fn discrete_occupancy_sum_includes_both_ends() {
    let model = common::example().discretize(0.05).unwrap();
    let p = build_blocks(&model).unwrap();
    let theta = initial_distribution(&model).unwrap();
    let occ = cumulative_occupancy(&p, &theta, Horizon::Steps(40)).unwrap();
    let total: f64 = occ.iter().sum();
    assert!((total - 41.0).abs() < 1e-10);
    let occ0 = cumulative_occupancy(&p, &theta, Horizon::Steps(0)).unwrap();
    assert_eq!(occ0, theta);
}

#[test]
fn occupancy_integrates_to_elapsed_time() {
    let model = common::example();
    let p = build_blocks(&model).unwrap();
    let theta = initial_distribution(&model).unwrap();
    for t in [0.0, 0.3, 17.0, 500.0] {
        let total: f64 = cumulative_occupancy(&p, &theta, Horizon::Time(t)).unwrap().iter().sum();
        assert!((total - t).abs() < 1e-9 * t.max(1.0));
    }
}

#[test]
fn event_counts_grow_at_the_stationary_rate() {
    for model in [policy(1), policy(1).discretize(0.05).unwrap()] {
        let p = build_blocks(&model).unwrap();
        let theta = initial_distribution(&model).unwrap();
        let pi = stationary(&p).unwrap();
        let rates = event_rates_stationary(&p, &pi).unwrap();
        let (a, b) = match model.time_mode {
            TimeMode::Continuous => (Horizon::Time(5e3), Horizon::Time(1e4)),
            TimeMode::Discrete => (Horizon::Steps(100_000), Horizon::Steps(200_000)),
        };
        let ca = event_counts(&p, &theta, a).unwrap();
        let cb = event_counts(&p, &theta, b).unwrap();
        let span = b.length() - a.length();
        for kind in EventKind::ALL {
            let slope = (cb.get(kind) - ca.get(kind)) / span;
            assert!(
                (slope - rates.get(kind)).abs() < 1e-8,
                "{kind} ({:?}): slope {slope} rate {}",
                model.time_mode,
                rates.get(kind)
            );
            assert!(cb.get(kind) >= ca.get(kind));
        }
    }
}

#[test]
fn every_repair_or_replacement_follows_a_failure() {
    // Long-run balance: each RF starts a CR, each NRF brings a new unit.
    let p = build_blocks(&policy(0)).unwrap();
    let pi = stationary(&p).unwrap();
    let r = event_rates_stationary(&p, &pi).unwrap();
    assert!((r.get(EventKind::RepairableFailure) - r.get(EventKind::CorrectiveRepair)).abs() < 1e-10);
    assert!((r.get(EventKind::NonRepairableFailure) - r.get(EventKind::NewUnit)).abs() < 1e-10);
    assert!(r.get(EventKind::Return) >= r.get(EventKind::NewVacation));
}

#[test]
fn single_precision_tracks_double() {
    let m64 = common::example();
    let m32 = Model32::from_config(&m64.to_config()).unwrap();
    let a64 = stationary(&build_blocks(&m64).unwrap()).unwrap().availability();
    let a32 = stationary(&build_blocks(&m32).unwrap()).unwrap().availability();
    assert!((a64 - a32 as f64).abs() < 1e-4, "{a64} vs {a32}");
}

fn scale_rates(cfg: &ModelConfig, c: f64) -> ModelConfig {
    let mut out = cfg.clone();
    let scale_m = |m: &mut Vec<Vec<f64>>| m.iter_mut().flatten().for_each(|x| *x *= c);
    scale_m(&mut out.t);
    scale_m(&mut out.l);
    scale_m(&mut out.s1);
    scale_m(&mut out.s2);
    scale_m(&mut out.v);
    out.t_r0.iter_mut().for_each(|x| *x *= c);
    out.t_nr0.iter_mut().for_each(|x| *x *= c);
    out
}

#[test]
fn uniform_time_rescaling() {
    let base = common::example();
    let fast = Model::from_config(&scale_rates(&base.to_config(), 2.5)).unwrap();
    let (pb, pf) = (build_blocks(&base).unwrap(), build_blocks(&fast).unwrap());
    let (sb, sf) = (stationary(&pb).unwrap(), stationary(&pf).unwrap());
    let gap = sb.global().iter().zip(sf.global()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-10);
    let theta = initial_distribution(&base).unwrap();
    let tb = transient(&pb, &theta, Horizon::Time(10.0)).unwrap();
    let tf = transient(&pf, &theta, Horizon::Time(4.0)).unwrap();
    let gap = tb.global().iter().zip(tf.global()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-10);
    let rb = event_rates_stationary(&pb, &sb).unwrap();
    let rf = event_rates_stationary(&pf, &sf).unwrap();
    for kind in EventKind::ALL {
        assert!((rf.get(kind) - 2.5 * rb.get(kind)).abs() < 1e-10);
    }
}
