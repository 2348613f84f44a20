//! Transient and stationary distributions, availability, reliability and
//! mean numbers of events.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::matkit::{expm, expm_integral, solve_normalized, MatError, Matrix};
use crate::mmap::{EventLabel, MarkedProcess};
use crate::model::{MacroState, StateLayout, TimeMode};
use crate::phdist::{ContinuousPh, DiscretePh, PhError};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("vector of length {got} does not match the {expected}-state process")]
    Dimension { got: usize, expected: usize },
    #[error("horizon {0} does not match the process time mode")]
    HorizonMode(String),
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("stationary solve failed, the process is reducible: {0}")]
    Reducible(MatError),
    #[error("block reduction and direct solve disagree by {gap:.3e}")]
    MethodGap { gap: f64 },
    #[error("macro-states beyond the first are not forward-ordered (cell {from} -> {to} is nonzero)")]
    NotForwardOrdered { from: MacroState, to: MacroState },
    #[error(transparent)]
    Matrix(#[from] MatError),
    #[error(transparent)]
    Ph(#[from] PhError),
    #[error("cannot write series: {0}")]
    Io(#[from] std::io::Error),
}

/// A time point: continuous time or a number of discrete periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon<T> {
    Time(T),
    Steps(u64),
}

impl<T: Scalar> Horizon<T> {
    /// Elapsed time as a scalar (periods for discrete horizons).
    pub fn length(self) -> T {
        match self {
            Horizon::Time(t) => t,
            Horizon::Steps(n) => T::lit(n as f64),
        }
    }

    fn check(self, mode: TimeMode) -> Result<(), MeasureError> {
        match (self, mode) {
            (Horizon::Time(t), TimeMode::Continuous) if t < T::zero() => {
                Err(MeasureError::NegativeTime(t.as_f64()))
            }
            (Horizon::Time(_), TimeMode::Continuous) | (Horizon::Steps(_), TimeMode::Discrete) => Ok(()),
            (h, _) => Err(MeasureError::HorizonMode(format!("{:?}", h.length().as_f64()))),
        }
    }
}

/// Probability vector over all phases, sliceable by macro-state.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroDistribution<T> {
    global: Vec<T>,
    layout: StateLayout,
}

impl<T: Scalar> MacroDistribution<T> {
    pub fn new(global: Vec<T>, layout: StateLayout) -> Result<Self, MeasureError> {
        if global.len() != layout.total() {
            return Err(MeasureError::Dimension {
                got: global.len(),
                expected: layout.total(),
            });
        }
        Ok(Self { global, layout })
    }

    pub fn global(&self) -> &[T] {
        &self.global
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn slice(&self, s: MacroState) -> &[T] {
        &self.global[self.layout.range(s)]
    }

    pub fn mass(&self, s: MacroState) -> T {
        self.slice(s).iter().copied().sum()
    }

    /// Occupancy of each macro-state in layout order.
    pub fn masses(&self) -> [T; 6] {
        MacroState::ALL.map(|s| self.mass(s))
    }

    pub fn total(&self) -> T {
        self.global.iter().copied().sum()
    }

    /// Mass in the operational macro-states.
    pub fn availability(&self) -> T {
        self.mass(MacroState::OperationalVacation) + self.mass(MacroState::OperationalPresent)
    }

    /// `self · v`.
    pub fn dot(&self, v: &[T]) -> T {
        self.global.iter().zip(v).map(|(&a, &b)| a * b).sum()
    }
}

fn check_len<T>(v: &[T], n: usize) -> Result<(), MeasureError> {
    if v.len() != n {
        return Err(MeasureError::Dimension {
            got: v.len(),
            expected: n,
        });
    }
    Ok(())
}

/// `D^n` together with `Σ_{k=0}^{n−1} D^k`, by binary recursion on `n`.
pub fn power_and_prefix_sum<T: Scalar>(d: &Matrix<T>, n: u64) -> (Matrix<T>, Matrix<T>) {
    let size = d.rows();
    let mut pow = Matrix::identity(size);
    let mut sum = Matrix::zeros(size, size);
    if n == 0 {
        return (pow, sum);
    }
    let bits = 64 - n.leading_zeros();
    for b in (0..bits).rev() {
        // (P, S) for N  ->  (P², S + P·S) for 2N
        let ps = &pow * &sum;
        sum = &sum + &ps;
        pow = &pow * &pow;
        if (n >> b) & 1 == 1 {
            // (P, S) for N  ->  (P·D, S + P) for N + 1
            sum = &sum + &pow;
            pow = &pow * d;
        }
    }
    (pow, sum)
}

/// Distribution at time `t` (`θe^{Qt}`) or after `ν` periods (`θD^ν`).
pub fn transient<T: Scalar>(
    process: &MarkedProcess<T>,
    theta: &[T],
    horizon: Horizon<T>,
) -> Result<MacroDistribution<T>, MeasureError> {
    check_len(theta, process.dim())?;
    horizon.check(process.time_mode())?;
    let p = match horizon {
        Horizon::Time(t) => expm(process.matrix(), t)?.left_mul_vec(theta),
        Horizon::Steps(n) if n <= 32 => {
            let mut v = theta.to_vec();
            for _ in 0..n {
                v = process.matrix().left_mul_vec(&v);
            }
            v
        }
        Horizon::Steps(n) => process.matrix().pow(n)?.left_mul_vec(theta),
    };
    MacroDistribution::new(p, process.layout().clone())
}

/// `A − I` for discrete processes, `Q` for continuous ones: the matrix whose
/// left null vector is the stationary distribution.
fn balance_matrix<T: Scalar>(process: &MarkedProcess<T>) -> Matrix<T> {
    match process.time_mode() {
        TimeMode::Continuous => process.matrix().clone(),
        TimeMode::Discrete => process.matrix() - &Matrix::identity(process.dim()),
    }
}

/// Stationary vector from the full balance system.
pub fn stationary_direct<T: Scalar>(process: &MarkedProcess<T>) -> Result<Vec<T>, MeasureError> {
    let a = balance_matrix(process);
    solve_normalized(&a, &vec![T::one(); process.dim()]).map_err(|e| match e {
        MatError::Singular { .. } => MeasureError::Reducible(e),
        other => MeasureError::Matrix(other),
    })
}

/// Stationary vector by eliminating macro-states 2–6: with `A` the balance
/// matrix, `H₁ⱼ = −(A₁ⱼ + Σ_{1<i<j} H₁ᵢAᵢⱼ)Aⱼⱼ⁻¹`, then `π₁` solves the reduced
/// system `A₁₁ + Σⱼ H₁ⱼAⱼ₁` with mass vector `e + Σⱼ H₁ⱼe` and `πⱼ = π₁H₁ⱼ`.
pub fn stationary_block_reduction<T: Scalar>(process: &MarkedProcess<T>) -> Result<Vec<T>, MeasureError> {
    let a = balance_matrix(process);
    let layout = process.layout();
    let states = MacroState::ALL;
    let first = states[0];
    let cell = |i: MacroState, j: MacroState| process.cell(&a, i, j);
    for (jx, &j) in states.iter().enumerate().skip(1) {
        for &i in &states[jx + 1..] {
            if !cell(i, j).is_zero() {
                return Err(MeasureError::NotForwardOrdered { from: i, to: j });
            }
        }
    }
    let mut h: Vec<Matrix<T>> = Vec::with_capacity(5);
    for (jx, &j) in states.iter().enumerate().skip(1) {
        let mut rhs = cell(first, j);
        for (ix, &i) in states.iter().enumerate().take(jx).skip(1) {
            rhs += &(&h[ix - 1] * &cell(i, j));
        }
        let hj = cell(j, j)
            .right_solve(&(-&rhs))
            .map_err(MeasureError::Reducible)?;
        h.push(hj);
    }
    let mut reduced = cell(first, first);
    let mut mass = vec![T::one(); layout.dim(first)];
    for (jx, &j) in states.iter().enumerate().skip(1) {
        let hj = &h[jx - 1];
        reduced += &(hj * &cell(j, first));
        for (m, s) in mass.iter_mut().zip(hj.row_sums()) {
            *m += s;
        }
    }
    let pi1 = solve_normalized(&reduced, &mass).map_err(MeasureError::Reducible)?;
    let mut out = pi1.clone();
    for hj in &h {
        out.extend(hj.left_mul_vec(&pi1));
    }
    Ok(out)
}

/// Stationary distribution by block reduction, cross-checked against the
/// direct solve.
pub fn stationary<T: Scalar>(process: &MarkedProcess<T>) -> Result<MacroDistribution<T>, MeasureError> {
    let (reduced, direct) = rayon::join(
        || stationary_block_reduction(process),
        || stationary_direct(process),
    );
    let (reduced, direct) = (reduced?, direct?);
    let gap = reduced
        .iter()
        .zip(&direct)
        .map(|(a, b)| (*a - *b).abs().as_f64())
        .fold(0.0, f64::max);
    if gap > T::tolerance().as_f64() {
        return Err(MeasureError::MethodGap { gap });
    }
    MacroDistribution::new(reduced, process.layout().clone())
}

pub fn availability<T: Scalar>(dist: &MacroDistribution<T>) -> T {
    dist.availability()
}

/// `A(t)` on a grid of horizons, evaluated in parallel.
pub fn availability_transient<T: Scalar>(
    process: &MarkedProcess<T>,
    theta: &[T],
    grid: &[Horizon<T>],
) -> Result<Vec<T>, MeasureError> {
    grid.par_iter()
        .map(|&h| transient(process, theta, h).map(|d| d.availability()))
        .collect()
}

/// Time to first exit from the operational macro-states.
#[derive(Debug, Clone)]
pub enum Reliability<T> {
    Continuous(ContinuousPh<T>),
    Discrete(DiscretePh<T>),
}

impl<T: Scalar> Reliability<T> {
    pub fn survival(&self, horizon: Horizon<T>) -> Result<T, MeasureError> {
        match (self, horizon) {
            (Reliability::Continuous(ph), Horizon::Time(t)) => Ok(ph.survival(t)?),
            (Reliability::Discrete(ph), Horizon::Steps(n)) => Ok(ph.survival(n)?),
            (_, h) => Err(MeasureError::HorizonMode(format!("{:?}", h.length().as_f64()))),
        }
    }

    /// Mean time (continuous) or mean number of periods (discrete) to first failure.
    pub fn mean(&self) -> Result<T, MeasureError> {
        Ok(match self {
            Reliability::Continuous(ph) => ph.mean()?,
            Reliability::Discrete(ph) => ph.mean()?,
        })
    }
}

/// The phase-type law of the first failure: initial vector `θ` restricted to
/// the operational macro-states and the matching operational sub-block.
/// Entering preventive maintenance also leaves the operational block.
pub fn reliability<T: Scalar>(
    process: &MarkedProcess<T>,
    theta: &[T],
) -> Result<Reliability<T>, MeasureError> {
    check_len(theta, process.dim())?;
    let n = process.layout().offset(MacroState::RepairableFailure);
    let sub = process.matrix().block(0, 0, n, n);
    let init = theta[..n].to_vec();
    Ok(match process.time_mode() {
        TimeMode::Continuous => Reliability::Continuous(ContinuousPh::new(init, sub)?),
        TimeMode::Discrete => Reliability::Discrete(DiscretePh::new(init, sub)?),
    })
}

/// Countable events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EventKind {
    RepairableFailure,
    NonRepairableFailure,
    CorrectiveRepair,
    PreventiveMaintenance,
    Return,
    NewUnit,
    NewVacation,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::RepairableFailure,
        EventKind::NonRepairableFailure,
        EventKind::CorrectiveRepair,
        EventKind::PreventiveMaintenance,
        EventKind::Return,
        EventKind::NewUnit,
        EventKind::NewVacation,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            EventKind::RepairableFailure => "RF",
            EventKind::NonRepairableFailure => "NRF",
            EventKind::CorrectiveRepair => "CR",
            EventKind::PreventiveMaintenance => "PM",
            EventKind::Return => "R",
            EventKind::NewUnit => "NU",
            EventKind::NewVacation => "NVP",
        }
    }

    /// Labels whose blocks contain this event. Labels absent from a time
    /// mode are ignored by [`MarkedProcess::event_intensity`].
    pub fn labels(self) -> &'static [EventLabel] {
        use EventLabel::*;
        match self {
            EventKind::RepairableFailure => &[Rf, RfCr, RRfCr],
            EventKind::NonRepairableFailure => &[Nrf, NrfNu, RNrfNu],
            EventKind::CorrectiveRepair => &[RfCr, RCr, RRfCr],
            EventKind::PreventiveMaintenance => &[Pm, RPm],
            EventKind::Return => &[R, RCr, RPm, RNu, RNvp, RRfCr, RNrfNu],
            EventKind::NewUnit => &[NrfNu, RNu, RNrfNu],
            EventKind::NewVacation => &[RNvp],
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// One value per [`EventKind`]: expected counts up to a horizon, or
/// stationary counts per unit time (per period in discrete time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRates<T> {
    values: [T; 7],
}

impl<T: Scalar> EventRates<T> {
    pub fn from_fn(mut f: impl FnMut(EventKind) -> T) -> Self {
        Self {
            values: EventKind::ALL.map(&mut f),
        }
    }

    pub fn get(&self, kind: EventKind) -> T {
        self.values[kind as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (EventKind, T)> + '_ {
        EventKind::ALL.iter().map(move |&k| (k, self.get(k)))
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_fn(|k| self.get(k) * s)
    }
}

/// Per-phase intensity vectors `(Σ blocks)·e` for every event kind.
pub fn event_intensities<T: Scalar>(process: &MarkedProcess<T>) -> [Vec<T>; 7] {
    EventKind::ALL.map(|k| process.event_intensity(k.labels()))
}

/// `∫₀ᵗ p(u)du` (continuous) or `Σ_{n=0}^{ν} pⁿ` (discrete).
pub fn cumulative_occupancy<T: Scalar>(
    process: &MarkedProcess<T>,
    theta: &[T],
    horizon: Horizon<T>,
) -> Result<Vec<T>, MeasureError> {
    check_len(theta, process.dim())?;
    horizon.check(process.time_mode())?;
    Ok(match horizon {
        Horizon::Time(t) => expm_integral(process.matrix(), t)?.left_mul_vec(theta),
        Horizon::Steps(n) => {
            let (_, sum) = power_and_prefix_sum(process.matrix(), n + 1);
            sum.left_mul_vec(theta)
        }
    })
}

fn contract<T: Scalar>(occ: &[T], intensities: &[Vec<T>; 7]) -> EventRates<T> {
    EventRates::from_fn(|k| {
        occ.iter()
            .zip(&intensities[k as usize])
            .map(|(&a, &b)| a * b)
            .sum()
    })
}

/// Expected number of events up to the horizon.
pub fn event_counts<T: Scalar>(
    process: &MarkedProcess<T>,
    theta: &[T],
    horizon: Horizon<T>,
) -> Result<EventRates<T>, MeasureError> {
    let occ = cumulative_occupancy(process, theta, horizon)?;
    Ok(contract(&occ, &event_intensities(process)))
}

/// Long-run events per unit time (per period in discrete time).
pub fn event_rates_stationary<T: Scalar>(
    process: &MarkedProcess<T>,
    pi: &MacroDistribution<T>,
) -> Result<EventRates<T>, MeasureError> {
    check_len(pi.global(), process.dim())?;
    Ok(contract(pi.global(), &event_intensities(process)))
}

/// Geometric grid of `points` values from `start` to `stop` inclusive.
pub fn geometric_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let ratio = (stop / start).ln() / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i + 1 == points {
                        stop
                    } else {
                        start * (ratio * i as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Writes a CSV table with a header row; values use Rust's shortest round-trip format.
pub fn write_csv<W: Write>(out: &mut W, header: &[&str], rows: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| format!("{x}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}
