//! NSGA-II over the vacation policy.
//!
//! Genes: log10 of V1, V3, V5; the ratios V2/V1 and V4/V3; then p1..p_{K−1}.
//! Every gene lives in a box and the variation operators respect it, so
//! decoded parameters are always valid.

use std::path::Path;

use log::{debug, info};
use mmap_rel::{EconomicParameters, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::select::{dominates, nondominated};
use crate::{evaluate, OptError, ParetoPoint, PolicyParams};

/// Box for the Coxian rates V1, V3, V5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub rate_min: f64,
    pub rate_max: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            rate_min: 1e-2,
            rate_max: 1e3,
        }
    }
}

impl Bounds {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, OptError> {
        let text = std::fs::read_to_string(path)?;
        let b: Bounds = serde_json::from_str(&text)?;
        b.check()?;
        Ok(b)
    }

    pub fn check(&self) -> Result<(), OptError> {
        if !(self.rate_min > 0.0 && self.rate_max > self.rate_min && self.rate_max.is_finite()) {
            return Err(OptError::InvalidConfig(format!(
                "rate bounds [{}, {}] must satisfy 0 < min < max < inf",
                self.rate_min, self.rate_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub seed: u64,
    pub bounds: Bounds,
    pub crossover_prob: f64,
    /// SBX distribution index.
    pub crossover_eta: f64,
    /// Polynomial mutation distribution index.
    pub mutation_eta: f64,
    /// Per-gene mutation probability; `None` means 1/genes.
    pub mutation_prob: Option<f64>,
    /// Attempts to replace an infeasible candidate before giving up.
    pub max_resample: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 80,
            generations: 120,
            seed: 1,
            bounds: Bounds::default(),
            crossover_prob: 0.9,
            crossover_eta: 15.0,
            mutation_eta: 20.0,
            mutation_prob: None,
            max_resample: 100,
        }
    }
}

type Genome = Vec<f64>;

struct Space {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Space {
    fn new(bounds: &Bounds, probs: usize) -> Self {
        let (a, b) = (bounds.rate_min.log10(), bounds.rate_max.log10());
        let mut lo = vec![a, a, a, 0.0, 0.0];
        let mut hi = vec![b, b, b, 1.0, 1.0];
        lo.extend(std::iter::repeat(0.0).take(probs));
        hi.extend(std::iter::repeat(1.0).take(probs));
        Self { lo, hi }
    }

    fn len(&self) -> usize {
        self.lo.len()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Genome {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| l + (h - l) * rng.random::<f64>())
            .collect()
    }

    fn decode(&self, g: &[f64]) -> PolicyParams {
        let v1 = 10f64.powf(g[0]);
        let v3 = 10f64.powf(g[1]);
        let v5 = 10f64.powf(g[2]);
        PolicyParams {
            v: [v1, g[3] * v1, v3, g[4] * v3, v5],
            p: g[5..].to_vec(),
        }
    }
}

/// Inverse of the gene decoding, clamped into the box.
pub fn encode(params: &PolicyParams, bounds: &Bounds) -> Vec<f64> {
    let space = Space::new(bounds, params.p.len());
    let [v1, v2, v3, v4, v5] = params.v;
    let mut g = vec![v1.log10(), v3.log10(), v5.log10(), v2 / v1, v4 / v3];
    g.extend(&params.p);
    g.iter()
        .enumerate()
        .map(|(i, &x)| x.clamp(space.lo[i], space.hi[i]))
        .collect()
}

#[derive(Clone)]
struct Individual {
    genes: Genome,
    point: ParetoPoint,
    rank: usize,
    crowding: f64,
}

fn evaluate_all(template: &Model, econ: &EconomicParameters, space: &Space, genomes: &[Genome]) -> Vec<Option<ParetoPoint>> {
    genomes
        .par_iter()
        .map(|g| match evaluate(template, econ, &space.decode(g)) {
            Ok(p) => Some(p),
            Err(e) => {
                debug!("infeasible candidate {:?}: {e}", space.decode(g));
                None
            }
        })
        .collect()
}

/// Evaluates the genomes; infeasible ones are replaced by fresh random
/// draws until every slot holds a feasible point.
fn evaluate_or_resample(
    template: &Model,
    econ: &EconomicParameters,
    space: &Space,
    mut genomes: Vec<Genome>,
    rng: &mut ChaCha8Rng,
    max_resample: usize,
) -> Result<Vec<Individual>, OptError> {
    let mut points = evaluate_all(template, econ, space, &genomes);
    for _ in 0..max_resample {
        let missing: Vec<usize> = (0..genomes.len()).filter(|&i| points[i].is_none()).collect();
        if missing.is_empty() {
            break;
        }
        let fresh: Vec<Genome> = missing.iter().map(|_| space.sample(rng)).collect();
        let evaluated = evaluate_all(template, econ, space, &fresh);
        for ((&i, g), p) in missing.iter().zip(fresh).zip(evaluated) {
            genomes[i] = g;
            points[i] = p;
        }
    }
    genomes
        .into_iter()
        .zip(points)
        .map(|(genes, p)| {
            let point = p.ok_or(OptError::NoFeasibleCandidate)?;
            Ok(Individual {
                genes,
                point,
                rank: 0,
                crowding: 0.0,
            })
        })
        .collect()
}

/// Fast nondominated sort; returns fronts as index lists and sets ranks.
fn sort_fronts(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let f: Vec<[f64; 2]> = pop.iter().map(|i| i.point.objectives()).collect();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if dominates(&f[i], &f[j]) {
                dominated_by[i].push(j);
            } else if dominates(&f[j], &f[i]) {
                count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    let mut rank = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            pop[i].rank = rank;
            for &j in &dominated_by[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
        rank += 1;
    }
    fronts
}

fn assign_crowding(pop: &mut [Individual], front: &[usize]) {
    for &i in front {
        pop[i].crowding = 0.0;
    }
    if front.len() <= 2 {
        for &i in front {
            pop[i].crowding = f64::INFINITY;
        }
        return;
    }
    for obj in 0..2 {
        let mut order = front.to_vec();
        order.sort_by(|&a, &b| {
            pop[a].point.objectives()[obj]
                .total_cmp(&pop[b].point.objectives()[obj])
                .then(a.cmp(&b))
        });
        let lo = pop[order[0]].point.objectives()[obj];
        let hi = pop[*order.last().expect("nonempty")].point.objectives()[obj];
        pop[order[0]].crowding = f64::INFINITY;
        pop[*order.last().expect("nonempty")].crowding = f64::INFINITY;
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        for w in order.windows(3) {
            let gap = pop[w[2]].point.objectives()[obj] - pop[w[0]].point.objectives()[obj];
            pop[w[1]].crowding += gap / span;
        }
    }
}

fn better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

fn tournament<'a>(pop: &'a [Individual], rng: &mut ChaCha8Rng) -> &'a Individual {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if better(b, a) {
        b
    } else {
        a
    }
}

/// Bounded simulated binary crossover.
fn sbx(a: &[f64], b: &[f64], space: &Space, eta: f64, rng: &mut ChaCha8Rng) -> (Genome, Genome) {
    let mut c1 = a.to_vec();
    let mut c2 = b.to_vec();
    for i in 0..a.len() {
        if rng.random::<f64>() > 0.5 || (a[i] - b[i]).abs() < 1e-14 {
            continue;
        }
        let (lo, hi) = (space.lo[i], space.hi[i]);
        let (y1, y2) = if a[i] < b[i] { (a[i], b[i]) } else { (b[i], a[i]) };
        let u: f64 = rng.random();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let beta_lo = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
        let beta_hi = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
        let x1 = 0.5 * ((y1 + y2) - spread(beta_lo) * (y2 - y1));
        let x2 = 0.5 * ((y1 + y2) + spread(beta_hi) * (y2 - y1));
        let (x1, x2) = (x1.clamp(lo, hi), x2.clamp(lo, hi));
        if rng.random::<bool>() {
            c1[i] = x2;
            c2[i] = x1;
        } else {
            c1[i] = x1;
            c2[i] = x2;
        }
    }
    (c1, c2)
}

/// Bounded polynomial mutation.
fn mutate(g: &mut [f64], space: &Space, eta: f64, prob: f64, rng: &mut ChaCha8Rng) {
    for (i, x) in g.iter_mut().enumerate() {
        if rng.random::<f64>() >= prob {
            continue;
        }
        let (lo, hi) = (space.lo[i], space.hi[i]);
        let span = hi - lo;
        let d1 = (*x - lo) / span;
        let d2 = (hi - *x) / span;
        let u: f64 = rng.random();
        let pow = 1.0 / (eta + 1.0);
        let dq = if u < 0.5 {
            let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            v.powf(pow) - 1.0
        } else {
            let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - v.powf(pow)
        };
        *x = (*x + dq * span).clamp(lo, hi);
    }
}

/// Runs the search and returns the nondominated set of the final
/// population, sorted by decreasing profit rate.
pub fn pareto_front(template: &Model, econ: &EconomicParameters, cfg: &GaConfig) -> Result<Vec<ParetoPoint>, OptError> {
    cfg.bounds.check()?;
    if cfg.population == 0 {
        return Err(OptError::InvalidConfig("population must be positive".into()));
    }
    let space = Space::new(&cfg.bounds, template.levels() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mutation_prob = cfg.mutation_prob.unwrap_or(1.0 / space.len() as f64);

    let initial: Vec<Genome> = (0..cfg.population).map(|_| space.sample(&mut rng)).collect();
    let mut pop = evaluate_or_resample(template, econ, &space, initial, &mut rng, cfg.max_resample)?;
    for front in sort_fronts(&mut pop) {
        assign_crowding(&mut pop, &front);
    }

    for gen in 0..cfg.generations {
        let mut children: Vec<Genome> = Vec::with_capacity(cfg.population + 1);
        while children.len() < cfg.population {
            let a = tournament(&pop, &mut rng).genes.clone();
            let b = tournament(&pop, &mut rng).genes.clone();
            let (mut c1, mut c2) = if rng.random::<f64>() < cfg.crossover_prob {
                sbx(&a, &b, &space, cfg.crossover_eta, &mut rng)
            } else {
                (a, b)
            };
            mutate(&mut c1, &space, cfg.mutation_eta, mutation_prob, &mut rng);
            mutate(&mut c2, &space, cfg.mutation_eta, mutation_prob, &mut rng);
            children.push(c1);
            children.push(c2);
        }
        children.truncate(cfg.population);
        let offspring = evaluate_or_resample(template, econ, &space, children, &mut rng, cfg.max_resample)?;

        let mut merged = pop;
        merged.extend(offspring);
        let fronts = sort_fronts(&mut merged);
        let mut keep: Vec<usize> = Vec::with_capacity(cfg.population);
        for front in fronts {
            assign_crowding(&mut merged, &front);
            if keep.len() + front.len() <= cfg.population {
                keep.extend(front);
            } else {
                let mut rest = front;
                rest.sort_by(|&a, &b| merged[b].crowding.total_cmp(&merged[a].crowding).then(a.cmp(&b)));
                keep.extend(rest.into_iter().take(cfg.population - keep.len()));
            }
            if keep.len() == cfg.population {
                break;
            }
        }
        pop = keep.into_iter().map(|i| merged[i].clone()).collect();
        if (gen + 1) % 20 == 0 {
            let best = pop.iter().map(|i| i.point.profit_rate).fold(f64::NEG_INFINITY, f64::max);
            let avail = pop.iter().map(|i| i.point.availability).fold(f64::NEG_INFINITY, f64::max);
            info!("generation {}: max profit rate {best:.4}, max availability {avail:.4}", gen + 1);
        }
    }

    let points: Vec<ParetoPoint> = pop.into_iter().map(|i| i.point).collect();
    let mut front = nondominated(&points);
    front.sort_by(|a, b| {
        b.profit_rate
            .total_cmp(&a.profit_rate)
            .then(a.availability.total_cmp(&b.availability))
    });
    Ok(front)
}
