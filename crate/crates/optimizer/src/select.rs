use std::cmp::Ordering;

use crate::{OptError, ParetoPoint};

/// `a` is at least as good in both objectives and strictly better in one.
pub fn dominates(a: &[f64; 2], b: &[f64; 2]) -> bool {
    a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1])
}

/// Points not dominated by any other point, in input order. Exact
/// duplicates keep their first occurrence only.
pub fn nondominated(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut out: Vec<ParetoPoint> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let f = p.objectives();
        let dominated = points.iter().any(|q| dominates(&q.objectives(), &f));
        let duplicate = points[..i].iter().any(|q| q.objectives() == f);
        if !dominated && !duplicate {
            out.push(p.clone());
        }
    }
    out
}

/// Componentwise maximum of the objectives.
pub fn ideal_point(front: &[ParetoPoint]) -> Result<[f64; 2], OptError> {
    if front.is_empty() {
        return Err(OptError::EmptyFront);
    }
    let mut z = [f64::NEG_INFINITY; 2];
    for p in front {
        for (zi, fi) in z.iter_mut().zip(p.objectives()) {
            *zi = zi.max(fi);
        }
    }
    Ok(z)
}

/// Min-max normalization over the front. A constant objective maps to 1.
pub fn normalize(front: &[ParetoPoint]) -> Result<Vec<[f64; 2]>, OptError> {
    let hi = ideal_point(front)?;
    let mut lo = [f64::INFINITY; 2];
    for p in front {
        for (l, f) in lo.iter_mut().zip(p.objectives()) {
            *l = l.min(f);
        }
    }
    Ok(front
        .iter()
        .map(|p| {
            let f = p.objectives();
            [0, 1].map(|i| {
                let span = hi[i] - lo[i];
                if span > 0.0 {
                    (f[i] - lo[i]) / span
                } else {
                    1.0
                }
            })
        })
        .collect())
}

fn by_objectives(a: &ParetoPoint, b: &ParetoPoint) -> Ordering {
    a.profit_rate
        .total_cmp(&b.profit_rate)
        .then(a.availability.total_cmp(&b.availability))
}

/// The point nearest the ideal point after min-max normalization. Ties go
/// to the larger profit rate, then the larger availability.
pub fn select_closest(front: &[ParetoPoint]) -> Result<(ParetoPoint, f64), OptError> {
    let norm = normalize(front)?;
    let dist = |f: &[f64; 2]| ((1.0 - f[0]).powi(2) + (1.0 - f[1]).powi(2)).sqrt();
    let (best, d) = front
        .iter()
        .zip(&norm)
        .map(|(p, f)| (p, dist(f)))
        .min_by(|(a, da), (b, db)| da.total_cmp(db).then_with(|| by_objectives(b, a)))
        .expect("front is nonempty");
    Ok((best.clone(), d))
}

pub fn select_max_profit(front: &[ParetoPoint]) -> Result<ParetoPoint, OptError> {
    front
        .iter()
        .max_by(|a, b| by_objectives(a, b))
        .cloned()
        .ok_or(OptError::EmptyFront)
}

pub fn select_max_availability(front: &[ParetoPoint]) -> Result<ParetoPoint, OptError> {
    front
        .iter()
        .max_by(|a, b| {
            a.availability
                .total_cmp(&b.availability)
                .then(a.profit_rate.total_cmp(&b.profit_rate))
        })
        .cloned()
        .ok_or(OptError::EmptyFront)
}
