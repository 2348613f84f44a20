//! Phase-type distributions in continuous and discrete time.

use std::fmt;

use thiserror::Error;

use crate::matkit::{expm, solve_normalized, Lu, MatError, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhError {
    #[error("initial vector has length {init}, matrix is {rows}x{cols}")]
    Dimension { init: usize, rows: usize, cols: usize },
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("absorption is not reachable from every phase")]
    AbsorptionUnreachable,
    #[error("renewal chain is reducible")]
    ReducibleRenewal,
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// What went wrong in a single row (or initial-vector entry) of a PH.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViolationKind {
    InitNegative,
    InitMassAboveOne,
    OffDiagonalNegative,
    DiagonalNotNegative,
    RowSumPositive,
    EntryOutOfUnitRange,
    RowMassAboveOne,
}

/// One violated invariant. `row` is zero-based; `Display` prints it one-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub row: usize,
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::InitNegative => "negative initial probability",
            ViolationKind::InitMassAboveOne => "initial mass exceeds 1",
            ViolationKind::OffDiagonalNegative => "negative off-diagonal rate",
            ViolationKind::DiagonalNotNegative => "diagonal entry is not negative",
            ViolationKind::RowSumPositive => "row sum is positive (negative exit rate)",
            ViolationKind::EntryOutOfUnitRange => "entry outside [0, 1]",
            ViolationKind::RowMassAboveOne => "row mass exceeds 1",
        };
        write!(f, "row {}: {} (by {:.3e})", self.row + 1, what, self.magnitude)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, row: usize, magnitude: f64) {
        self.violations.push(Violation {
            kind,
            row,
            magnitude,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "pass");
        }
        write!(f, "fail:")?;
        for v in &self.violations {
            write!(f, " [{v}]")?;
        }
        Ok(())
    }
}

fn check_dims<T: Scalar>(init: &[T], m: &Matrix<T>) -> Result<(), PhError> {
    if !m.is_square() || init.len() != m.rows() || init.is_empty() {
        return Err(PhError::Dimension {
            init: init.len(),
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    Ok(())
}

fn check_init<T: Scalar>(init: &[T], report: &mut ValidationReport) {
    let tol = T::tolerance();
    let mut mass = T::zero();
    for (i, &a) in init.iter().enumerate() {
        if a < -tol {
            report.push(ViolationKind::InitNegative, i, (-a).as_f64());
        }
        mass += a;
    }
    if mass > T::one() + tol {
        report.push(ViolationKind::InitMassAboveOne, 0, (mass - T::one()).as_f64());
    }
}

/// Continuous PH: `(init, sub_gen)` with exit vector `−sub_gen·e`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPh<T> {
    init: Vec<T>,
    sub_gen: Matrix<T>,
    exit: Vec<T>,
}

impl<T: Scalar> ContinuousPh<T> {
    /// Checks dimensions only; call [`validate`](Self::validate) for the sign invariants.
    pub fn new(init: Vec<T>, sub_gen: Matrix<T>) -> Result<Self, PhError> {
        check_dims(&init, &sub_gen)?;
        let exit = sub_gen.row_sums().into_iter().map(|s| -s).collect();
        Ok(Self {
            init,
            sub_gen,
            exit,
        })
    }

    /// Single exponential phase with the given rate.
    pub fn exponential(rate: T) -> Self {
        Self::new(vec![T::one()], Matrix::scalar(-rate)).expect("1x1 is square")
    }

    pub fn order(&self) -> usize {
        self.init.len()
    }

    pub fn init(&self) -> &[T] {
        &self.init
    }

    pub fn sub_gen(&self) -> &Matrix<T> {
        &self.sub_gen
    }

    pub fn exit(&self) -> &[T] {
        &self.exit
    }

    pub fn validate(&self) -> ValidationReport {
        let tol = T::tolerance();
        let mut report = ValidationReport::default();
        check_init(&self.init, &mut report);
        for i in 0..self.order() {
            for (j, &x) in self.sub_gen.row(i).iter().enumerate() {
                if i == j {
                    if x >= T::zero() {
                        report.push(ViolationKind::DiagonalNotNegative, i, x.as_f64());
                    }
                } else if x < -tol {
                    report.push(ViolationKind::OffDiagonalNegative, i, (-x).as_f64());
                }
            }
            if self.exit[i] < -tol {
                report.push(ViolationKind::RowSumPositive, i, (-self.exit[i]).as_f64());
            }
        }
        report
    }

    /// `init·(−S)⁻¹·e`.
    pub fn mean(&self) -> Result<T, PhError> {
        let lu = Lu::factor(&(-&self.sub_gen)).map_err(|_| PhError::AbsorptionUnreachable)?;
        let x = lu.solve(&vec![T::one(); self.order()]);
        Ok(self.init.iter().zip(&x).map(|(&a, &b)| a * b).sum())
    }

    /// `init·e^{S t}·e`.
    pub fn survival(&self, t: T) -> Result<T, PhError> {
        if t < T::zero() {
            return Err(PhError::NegativeTime(t.as_f64()));
        }
        let p = expm(&self.sub_gen, t)?;
        Ok(p.left_mul_vec(&self.init).into_iter().sum())
    }

    /// Generator `S + S⁰·init` of the renewal process that restarts on absorption.
    pub fn renewal_generator(&self) -> Matrix<T> {
        let restart = &Matrix::col_vector(&self.exit) * &Matrix::row_vector(&self.init);
        &self.sub_gen + &restart
    }

    /// Stationary phase distribution of the renewal process.
    pub fn embedded_stationary(&self) -> Result<Vec<T>, PhError> {
        let g = self.renewal_generator();
        solve_normalized(&g, &vec![T::one(); self.order()]).map_err(|e| match e {
            MatError::Singular { .. } => PhError::ReducibleRenewal,
            other => PhError::Matrix(other),
        })
    }
}

/// Discrete PH: `(init, sub_stoch)` with exit vector `e − sub_stoch·e`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePh<T> {
    init: Vec<T>,
    sub_stoch: Matrix<T>,
    exit: Vec<T>,
}

impl<T: Scalar> DiscretePh<T> {
    pub fn new(init: Vec<T>, sub_stoch: Matrix<T>) -> Result<Self, PhError> {
        check_dims(&init, &sub_stoch)?;
        let exit = sub_stoch.row_sums().into_iter().map(|s| T::one() - s).collect();
        Ok(Self {
            init,
            sub_stoch,
            exit,
        })
    }

    /// Single geometric phase with per-period exit probability `q`.
    pub fn geometric(q: T) -> Self {
        Self::new(vec![T::one()], Matrix::scalar(T::one() - q)).expect("1x1 is square")
    }

    pub fn order(&self) -> usize {
        self.init.len()
    }

    pub fn init(&self) -> &[T] {
        &self.init
    }

    pub fn sub_stoch(&self) -> &Matrix<T> {
        &self.sub_stoch
    }

    pub fn exit(&self) -> &[T] {
        &self.exit
    }

    pub fn validate(&self) -> ValidationReport {
        let tol = T::tolerance();
        let mut report = ValidationReport::default();
        check_init(&self.init, &mut report);
        for i in 0..self.order() {
            for &x in self.sub_stoch.row(i) {
                if x < -tol {
                    report.push(ViolationKind::EntryOutOfUnitRange, i, (-x).as_f64());
                } else if x > T::one() + tol {
                    report.push(ViolationKind::EntryOutOfUnitRange, i, (x - T::one()).as_f64());
                }
            }
            if self.exit[i] < -tol {
                report.push(ViolationKind::RowMassAboveOne, i, (-self.exit[i]).as_f64());
            }
        }
        report
    }

    /// `init·(I − S)⁻¹·e`, the mean number of periods before absorption.
    pub fn mean(&self) -> Result<T, PhError> {
        let n = self.order();
        let fundamental = &Matrix::identity(n) - &self.sub_stoch;
        let lu = Lu::factor(&fundamental).map_err(|_| PhError::AbsorptionUnreachable)?;
        let x = lu.solve(&vec![T::one(); n]);
        Ok(self.init.iter().zip(&x).map(|(&a, &b)| a * b).sum())
    }

    /// `init·Sᵏ·e`.
    pub fn survival(&self, k: u64) -> Result<T, PhError> {
        let p = self.sub_stoch.pow(k)?;
        Ok(p.left_mul_vec(&self.init).into_iter().sum())
    }

    /// Transition matrix `S + S⁰·init` of the renewal chain.
    pub fn renewal_matrix(&self) -> Matrix<T> {
        let restart = &Matrix::col_vector(&self.exit) * &Matrix::row_vector(&self.init);
        &self.sub_stoch + &restart
    }

    pub fn embedded_stationary(&self) -> Result<Vec<T>, PhError> {
        let n = self.order();
        let g = &self.renewal_matrix() - &Matrix::identity(n);
        solve_normalized(&g, &vec![T::one(); n]).map_err(|e| match e {
            MatError::Singular { .. } => PhError::ReducibleRenewal,
            other => PhError::Matrix(other),
        })
    }
}
