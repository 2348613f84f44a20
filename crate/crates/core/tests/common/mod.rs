#![allow(dead_code)]

use mmap_rel::{Matrix, Model};

pub fn data(name: &str) -> String {
    format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn example() -> Model {
    Model::load(data("paper_example.json")).unwrap()
}

/// Published vacation rates `V1..V5` and stay probabilities for the three
/// named policies.
pub const POLICIES: [([f64; 5], [f64; 2]); 3] = [
    ([10.1881, 10.1659, 10.1855, 9.8288, 8.3987], [0.9999, 0.5089]),
    ([10.2026, 10.1463, 10.1936, 9.8266, 8.4319], [0.9153, 0.5088]),
    ([959.2034, 2.1422, 634.2397, 178.3713, 390.6219], [0.0379, 0.3374]),
];

/// Order-3 Coxian vacation with entry in phase 1.
pub fn with_policy(model: &Model, which: usize) -> Model {
    let ([v1, v2, v3, v4, v5], p) = POLICIES[which];
    let v = Matrix::from_rows(&[[-v1, v2, 0.0], [0.0, -v3, v4], [0.0, 0.0, -v5]]).unwrap();
    model.with_vacation(vec![1.0, 0.0, 0.0], v, p.to_vec()).unwrap()
}
