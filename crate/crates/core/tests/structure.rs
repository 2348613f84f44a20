mod common;

use mmap_rel::measures::{stationary, stationary_block_reduction, stationary_direct};
use mmap_rel::mmap::{build_blocks, initial_distribution, MarkedProcess};
use mmap_rel::testkit::random_model;
use mmap_rel::{EventLabel, MacroState, Matrix, Model, TimeMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn row_sum_gap(process: &MarkedProcess<f64>) -> f64 {
    let target = match process.time_mode() {
        TimeMode::Continuous => 0.0,
        TimeMode::Discrete => 1.0,
    };
    process
        .matrix()
        .row_sums()
        .iter()
        .map(|s| (s - target).abs())
        .fold(0.0, f64::max)
}

fn random_models(seed: u64, n: usize) -> Vec<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..n {
        out.push(random_model(&mut rng, TimeMode::Continuous));
        out.push(random_model(&mut rng, TimeMode::Discrete));
    }
    out
}

#[test]
fn example_layout_dimensions() {
    let layout = common::example().layout();
    let dims: Vec<usize> = MacroState::ALL.iter().map(|&s| layout.dim(s)).collect();
    assert_eq!(dims, vec![126, 30, 6, 6, 6, 6]);
    assert_eq!(layout.total(), 180);
}

#[test]
fn layout_encode_decode_roundtrip() {
    let layout = common::example().layout();
    for g in 0..layout.total() {
        let (s, coords) = layout.decode(g).unwrap();
        assert_eq!(layout.encode(s, &coords), Some(g));
    }
    assert_eq!(layout.decode(180), None);
    // leftmost factor varies slowest
    assert_eq!(layout.encode(MacroState::OperationalVacation, &[0, 0, 0, 1]), Some(1));
    assert_eq!(layout.encode(MacroState::OperationalVacation, &[1, 0, 0, 0]), Some(18));
}

#[test]
fn level_selectors_partition_identity() {
    let model = common::example();
    let mut sum = Matrix::zeros(model.m(), model.m());
    for k in 1..=model.levels() {
        sum += &model.level_selector(k).unwrap();
    }
    assert!((&sum - &Matrix::identity(model.m())).max_abs() == 0.0);
    assert!(model.level_selector(0).is_err());
    assert!(model.level_selector(4).is_err());
    let (u, ut) = model.noncritical_selectors();
    assert_eq!(u.shape(), (5, 7));
    let back = &u * &ut;
    assert!((&back - &Matrix::identity(5)).max_abs() == 0.0);
}

#[test]
fn example_generator_conserves() {
    let model = common::example();
    let q = build_blocks(&model).unwrap();
    assert!(row_sum_gap(&q) < 1e-9);
    let d = build_blocks(&model.discretize(0.05).unwrap()).unwrap();
    assert!(row_sum_gap(&d) < 1e-9);
}

#[test]
fn all_policies_conserve() {
    let base = common::example();
    for k in 0..3 {
        let model = common::with_policy(&base, k);
        assert!(row_sum_gap(&build_blocks(&model).unwrap()) < 1e-9);
        let disc = model.discretize(0.05).unwrap();
        assert!(row_sum_gap(&build_blocks(&disc).unwrap()) < 1e-9);
    }
}

#[test]
fn random_models_conserve() {
    for (k, model) in random_models(2024, 50).iter().enumerate() {
        let p = build_blocks(model).unwrap();
        let gap = row_sum_gap(&p);
        assert!(gap < 1e-9, "model {k}: row sums off by {gap:e}");
    }
}

#[test]
fn blocks_only_fill_their_cells() {
    let mut models = random_models(5, 5);
    models.push(common::example());
    models.push(common::example().discretize(0.05).unwrap());
    for model in &models {
        let process = build_blocks(model).unwrap();
        for (&label, block) in process.blocks() {
            let allowed = label.cells();
            for from in MacroState::ALL {
                for to in MacroState::ALL {
                    if allowed.contains(&(from, to)) {
                        continue;
                    }
                    assert!(
                        process.cell(block, from, to).is_zero(),
                        "{label} has mass in {from} -> {to}"
                    );
                }
            }
        }
        assert_eq!(process.blocks().len(), EventLabel::all(model.time_mode).len());
    }
}

#[test]
fn discrete_blocks_are_substochastic() {
    let process = build_blocks(&common::example().discretize(0.05).unwrap()).unwrap();
    for block in process.blocks().values() {
        assert!(block.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}

#[test]
fn continuous_blocks_negative_only_on_operational_diagonal() {
    let process = build_blocks(&common::example()).unwrap();
    for (&label, block) in process.blocks() {
        for i in 0..block.rows() {
            for j in 0..block.cols() {
                if block[(i, j)] < 0.0 {
                    assert_eq!(label, EventLabel::O);
                    assert_eq!(i, j);
                }
            }
        }
    }
}

#[test]
fn initial_distribution_is_probability_on_operational_vacation() {
    let model = common::example();
    let theta = initial_distribution(&model).unwrap();
    let layout = model.layout();
    let s: f64 = theta.iter().sum();
    assert!((s - 1.0).abs() < 1e-12);
    let outside: f64 = theta[layout.offset(MacroState::OperationalPresent)..].iter().sum();
    assert_eq!(outside, 0.0);
}

#[test]
fn stationary_methods_agree() {
    let mut models = random_models(77, 50);
    let base = common::example();
    for k in 0..3 {
        let m = common::with_policy(&base, k);
        models.push(m.discretize(0.05).unwrap());
        models.push(m);
    }
    for (k, model) in models.iter().enumerate() {
        let p = build_blocks(model).unwrap();
        let a = stationary_block_reduction(&p).unwrap();
        let b = stationary_direct(&p).unwrap();
        let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-9, "model {k}: gap {gap:e}");
        let pi = stationary(&p).unwrap();
        assert!((pi.total() - 1.0).abs() < 1e-9);
        assert!(pi.global().iter().all(|&x| x > -1e-12));
        // balance: πQ = 0 or πD = π
        let flow = p.matrix().left_mul_vec(pi.global());
        let resid = match model.time_mode {
            TimeMode::Continuous => flow.iter().map(|x| x.abs()).fold(0.0, f64::max),
            TimeMode::Discrete => flow.iter().zip(pi.global()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        };
        assert!(resid < 1e-10, "model {k}: balance residual {resid:e}");
    }
}

#[test]
fn block_dump_writes_one_file_per_label() {
    let process = build_blocks(&common::example()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = process.dump_blocks(dir.path()).unwrap();
    assert_eq!(files.len(), 11);
    let rf = std::fs::read_to_string(dir.path().join("Q_RF.csv")).unwrap();
    assert_eq!(rf.lines().count(), 180);
}
