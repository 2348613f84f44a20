//! Random small models that satisfy every conservation constraint, for
//! property tests. Two wear levels; every other order is 1 or 2.

use rand::Rng;

use crate::model::{ModelConfig, SystemModel, TimeMode};

/// `n` positive weights normalized to sum to `total`, each bounded away from zero.
fn split<R: Rng>(rng: &mut R, n: usize, total: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x * total / s).collect()
}

fn prob_row<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    split(rng, n, 1.0)
}

/// Sub-generator (continuous) or sub-stochastic matrix (discrete) of order
/// `n` with the given number of exit columns; returns the matrix and the
/// exit vectors.
fn transient_block<R: Rng>(rng: &mut R, mode: TimeMode, n: usize, exits: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut mat = vec![vec![0.0; n]; n];
    let mut out = vec![vec![0.0; n]; exits];
    for i in 0..n {
        match mode {
            TimeMode::Continuous => {
                let mut total = 0.0;
                for (j, x) in mat[i].iter_mut().enumerate() {
                    if j != i {
                        *x = rng.random_range(0.0..1.5);
                        total += *x;
                    }
                }
                for e in out.iter_mut() {
                    e[i] = rng.random_range(0.05..1.0);
                    total += e[i];
                }
                mat[i][i] = -total;
            }
            TimeMode::Discrete => {
                let row = prob_row(rng, n + exits);
                mat[i].copy_from_slice(&row[..n]);
                for (k, e) in out.iter_mut().enumerate() {
                    e[i] = row[n + k];
                }
            }
        }
    }
    (mat, out)
}

fn ph<R: Rng>(rng: &mut R, mode: TimeMode) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rng.random_range(1..=2);
    let (mat, _) = transient_block(rng, mode, n, 1);
    (prob_row(rng, n), mat)
}

/// A random configuration with two wear levels.
pub fn random_config<R: Rng>(rng: &mut R, mode: TimeMode) -> ModelConfig {
    let levels = vec![rng.random_range(1..=2), rng.random_range(1..=2)];
    let m: usize = levels.iter().sum();
    let (t, wear_exits) = transient_block(rng, mode, m, 2);

    let mut w = vec![vec![0.0; m]; m];
    let mut w_r0 = vec![0.0; m];
    let mut w_nr0 = vec![0.0; m];
    for i in 0..m {
        let row = prob_row(rng, m + 2);
        w[i].copy_from_slice(&row[..m]);
        w_r0[i] = row[m];
        w_nr0[i] = row[m + 1];
    }

    let d = rng.random_range(1..=2);
    let c = (0..d)
        .map(|_| {
            let row = prob_row(rng, d + 1);
            row[..d].to_vec()
        })
        .collect();

    let (gamma, l) = ph(rng, mode);
    let (beta1, s1) = ph(rng, mode);
    let (beta2, s2) = ph(rng, mode);
    let (nu, v) = ph(rng, mode);

    ModelConfig {
        note: None,
        time_mode: mode,
        alpha: prob_row(rng, m),
        levels,
        t,
        t_r0: wear_exits[0].clone(),
        t_nr0: wear_exits[1].clone(),
        gamma,
        l,
        w,
        w_r0,
        w_nr0,
        omega0: rng.random_range(0.0..0.5),
        c,
        omega: prob_row(rng, d),
        beta1,
        s1,
        beta2,
        s2,
        nu,
        v,
        p: vec![rng.random_range(0.0..1.0)],
    }
}

/// A validated random model.
pub fn random_model<R: Rng>(rng: &mut R, mode: TimeMode) -> SystemModel<f64> {
    SystemModel::from_config(&random_config(rng, mode)).expect("generator emits valid models")
}
