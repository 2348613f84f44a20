//! The marked Markovian arrival process: labelled event blocks and their sum.

pub mod continuous;
pub mod discrete;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::matkit::{kron_all, MatError, Matrix};
use crate::model::{MacroState, ModelError, StateLayout, SystemModel, TimeMode};
use crate::scalar::Scalar;

pub use continuous::{build_continuous, h_nrf, h_o, h_rf};
pub use discrete::{build_discrete, h_nrf_d, h_o_d, h_rf_d};

#[derive(Debug, Error)]
pub enum MmapError {
    #[error("dimension mismatch in {func}: {detail}")]
    Dimension { func: &'static str, detail: String },
    #[error("{kind} violated at state {state} ({macro_state} phase {coords:?}): residual {residual:.3e}")]
    Conservation {
        kind: &'static str,
        state: usize,
        macro_state: MacroState,
        coords: Vec<usize>,
        residual: f64,
    },
    #[error("block {label} has entry {value:.3e} at ({row}, {col}) outside its admissible range")]
    BlockEntry {
        label: EventLabel,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("a {expected:?}-time model is required")]
    WrongTimeMode { expected: TimeMode },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Matrix(#[from] MatError),
    #[error("cannot write block dump: {0}")]
    Io(#[from] std::io::Error),
}

/// Event marks. Combined labels denote simultaneous occurrences, with `R`
/// standing for the repairperson's return from vacation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EventLabel {
    /// No marked event (phase changes within a macro-state and service completions).
    O,
    Rf,
    Nrf,
    R,
    Pm,
    RfCr,
    NrfNu,
    RCr,
    RNu,
    RPm,
    RNvp,
    RRfCr,
    RNrfNu,
}

impl EventLabel {
    pub const CONTINUOUS: [EventLabel; 11] = [
        EventLabel::O,
        EventLabel::Rf,
        EventLabel::Nrf,
        EventLabel::R,
        EventLabel::Pm,
        EventLabel::RfCr,
        EventLabel::NrfNu,
        EventLabel::RCr,
        EventLabel::RNu,
        EventLabel::RPm,
        EventLabel::RNvp,
    ];

    pub const DISCRETE: [EventLabel; 13] = [
        EventLabel::O,
        EventLabel::Rf,
        EventLabel::Nrf,
        EventLabel::R,
        EventLabel::Pm,
        EventLabel::RfCr,
        EventLabel::NrfNu,
        EventLabel::RCr,
        EventLabel::RNu,
        EventLabel::RPm,
        EventLabel::RRfCr,
        EventLabel::RNrfNu,
        EventLabel::RNvp,
    ];

    pub fn all(mode: TimeMode) -> &'static [EventLabel] {
        match mode {
            TimeMode::Continuous => &Self::CONTINUOUS,
            TimeMode::Discrete => &Self::DISCRETE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventLabel::O => "O",
            EventLabel::Rf => "RF",
            EventLabel::Nrf => "NRF",
            EventLabel::R => "R",
            EventLabel::Pm => "PM",
            EventLabel::RfCr => "RF+CR",
            EventLabel::NrfNu => "NRF+NU",
            EventLabel::RCr => "R+CR",
            EventLabel::RNu => "R+NU",
            EventLabel::RPm => "R+PM",
            EventLabel::RNvp => "R+NVP",
            EventLabel::RRfCr => "R+RF+CR",
            EventLabel::RNrfNu => "R+NRF+NU",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::DISCRETE.iter().copied().find(|l| l.as_str() == s)
    }

    /// Macro-state cells `(from, to)` where this block may be nonzero.
    pub fn cells(self) -> &'static [(MacroState, MacroState)] {
        use MacroState::*;
        match self {
            EventLabel::O => &[
                (OperationalVacation, OperationalVacation),
                (OperationalPresent, OperationalPresent),
                (RepairableFailure, RepairableFailure),
                (NonRepairableFailure, NonRepairableFailure),
                (CorrectiveRepair, CorrectiveRepair),
                (PreventiveMaintenance, PreventiveMaintenance),
                (CorrectiveRepair, OperationalVacation),
                (PreventiveMaintenance, OperationalVacation),
            ],
            EventLabel::Rf => &[(OperationalVacation, RepairableFailure)],
            EventLabel::Nrf => &[(OperationalVacation, NonRepairableFailure)],
            EventLabel::R => &[(OperationalVacation, OperationalPresent)],
            EventLabel::Pm => &[(OperationalPresent, PreventiveMaintenance)],
            EventLabel::RfCr => &[(OperationalPresent, CorrectiveRepair)],
            EventLabel::NrfNu => &[(OperationalPresent, OperationalVacation)],
            EventLabel::RCr => &[(RepairableFailure, CorrectiveRepair)],
            EventLabel::RNu => &[(NonRepairableFailure, OperationalVacation)],
            EventLabel::RPm => &[(OperationalVacation, PreventiveMaintenance)],
            EventLabel::RNvp => &[(OperationalVacation, OperationalVacation)],
            EventLabel::RRfCr => &[(OperationalVacation, CorrectiveRepair)],
            EventLabel::RNrfNu => &[(OperationalVacation, OperationalVacation)],
        }
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Labelled blocks over the full phase space plus their sum, which is the
/// generator (continuous) or one-step transition matrix (discrete).
#[derive(Debug, Clone)]
pub struct MarkedProcess<T> {
    time_mode: TimeMode,
    layout: StateLayout,
    blocks: BTreeMap<EventLabel, Matrix<T>>,
    matrix: Matrix<T>,
}

impl<T: Scalar> MarkedProcess<T> {
    pub(crate) fn assemble(
        time_mode: TimeMode,
        layout: StateLayout,
        blocks: BTreeMap<EventLabel, Matrix<T>>,
    ) -> Result<Self, MmapError> {
        let n = layout.total();
        let mut matrix = Matrix::zeros(n, n);
        for b in blocks.values() {
            matrix += b;
        }
        let process = Self {
            time_mode,
            layout,
            blocks,
            matrix,
        };
        process.check()?;
        Ok(process)
    }

    fn check(&self) -> Result<(), MmapError> {
        let tol = T::tolerance().as_f64();
        for (&label, b) in &self.blocks {
            for i in 0..b.rows() {
                for (j, &x) in b.row(i).iter().enumerate() {
                    let x = x.as_f64();
                    let bad = match self.time_mode {
                        TimeMode::Continuous => x < -tol && (i != j || label != EventLabel::O),
                        TimeMode::Discrete => !(-tol..=1.0 + tol).contains(&x),
                    };
                    if bad || !x.is_finite() {
                        return Err(MmapError::BlockEntry {
                            label,
                            row: i,
                            col: j,
                            value: x,
                        });
                    }
                }
            }
        }
        let (kind, target) = match self.time_mode {
            TimeMode::Continuous => ("generator conservation", 0.0),
            TimeMode::Discrete => ("row stochasticity", 1.0),
        };
        for (i, s) in self.matrix.row_sums().into_iter().enumerate() {
            let residual = s.as_f64() - target;
            // Rounding grows with the exit rate, so fast rows get a proportional allowance.
            let scale = self.matrix[(i, i)].as_f64().abs().max(1.0);
            if residual.abs() > tol * scale || !residual.is_finite() {
                let (macro_state, coords) = self.layout.decode(i).expect("index within layout");
                return Err(MmapError::Conservation {
                    kind,
                    state: i,
                    macro_state,
                    coords,
                    residual,
                });
            }
        }
        Ok(())
    }

    pub fn time_mode(&self) -> TimeMode {
        self.time_mode
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total()
    }

    /// Generator `Q` (continuous) or transition matrix `D` (discrete).
    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn blocks(&self) -> &BTreeMap<EventLabel, Matrix<T>> {
        &self.blocks
    }

    /// The block for `label`; labels that do not exist in this time mode yield `None`.
    pub fn block(&self, label: EventLabel) -> Option<&Matrix<T>> {
        self.blocks.get(&label)
    }

    /// Sum of the named blocks (missing labels contribute nothing).
    pub fn block_sum(&self, labels: &[EventLabel]) -> Matrix<T> {
        let n = self.dim();
        let mut out = Matrix::zeros(n, n);
        for l in labels {
            if let Some(b) = self.blocks.get(l) {
                out += b;
            }
        }
        out
    }

    /// Row sums of the named blocks: the per-phase rate (or probability) of those events.
    pub fn event_intensity(&self, labels: &[EventLabel]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for l in labels {
            if let Some(b) = self.blocks.get(l) {
                for (o, s) in out.iter_mut().zip(b.row_sums()) {
                    *o += s;
                }
            }
        }
        out
    }

    /// Macro-state cell `(from, to)` of a matrix over the full phase space.
    pub fn cell(&self, m: &Matrix<T>, from: MacroState, to: MacroState) -> Matrix<T> {
        let l = &self.layout;
        m.block(l.offset(from), l.offset(to), l.dim(from), l.dim(to))
    }

    /// Writes every block as `<prefix>_<label>.csv` (prefix `Q` or `D`).
    pub fn dump_blocks(&self, dir: &Path) -> Result<Vec<PathBuf>, MmapError> {
        std::fs::create_dir_all(dir)?;
        let prefix = match self.time_mode {
            TimeMode::Continuous => "Q",
            TimeMode::Discrete => "D",
        };
        let mut written = Vec::new();
        for (label, b) in &self.blocks {
            let path = dir.join(format!("{prefix}_{label}.csv"));
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            for i in 0..b.rows() {
                let line: Vec<String> = b.row(i).iter().map(|x| format!("{:e}", x.as_f64())).collect();
                writeln!(f, "{}", line.join(","))?;
            }
            f.flush()?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Builds the process in the model's own time mode.
pub fn build_blocks<T: Scalar>(model: &SystemModel<T>) -> Result<MarkedProcess<T>, MmapError> {
    match model.time_mode {
        TimeMode::Continuous => build_continuous(model),
        TimeMode::Discrete => build_discrete(model),
    }
}

/// `θ = (α ⊗ π_L ⊗ ω ⊗ ν, 0)`: a new unit, shock clock in equilibrium,
/// repairperson starting a vacation.
pub fn initial_distribution<T: Scalar>(model: &SystemModel<T>) -> Result<Vec<T>, MmapError> {
    let pi_l = model.shock_stationary()?;
    let head = kron_all(&[
        &Matrix::row_vector(&model.wear.alpha),
        &Matrix::row_vector(&pi_l),
        &Matrix::row_vector(&model.shocks.omega),
        &Matrix::row_vector(&model.facility.nu),
    ]);
    let mut theta = head.row(0).to_vec();
    theta.resize(model.layout().total(), T::zero());
    Ok(theta)
}

/// Matrices shared by the continuous and discrete builders.
pub(crate) struct Parts<T> {
    pub m: usize,
    pub t: usize,
    pub d: usize,
    pub levels: usize,
    pub tm: Matrix<T>,
    pub tr0: Matrix<T>,
    pub tnr0: Matrix<T>,
    pub w: Matrix<T>,
    pub wr0: Matrix<T>,
    pub wnr0: Matrix<T>,
    pub l: Matrix<T>,
    /// `L⁰γ`
    pub lg: Matrix<T>,
    /// `L + L⁰γ`
    pub renew: Matrix<T>,
    pub omega0: T,
    pub c: Matrix<T>,
    /// `C·e`
    pub ce: Matrix<T>,
    /// `C⁰`
    pub c0: Matrix<T>,
    pub alpha: Matrix<T>,
    pub omega: Matrix<T>,
    pub nu: Matrix<T>,
    pub v: Matrix<T>,
    pub v0: Matrix<T>,
    pub beta1: Matrix<T>,
    pub s1: Matrix<T>,
    pub s1_0: Matrix<T>,
    pub beta2: Matrix<T>,
    pub s2: Matrix<T>,
    pub s2_0: Matrix<T>,
    pub p: Vec<T>,
    /// `U_1 … U_K`
    pub u: Vec<Matrix<T>>,
    /// `U_{1..K−1}`
    pub ua: Matrix<T>,
    /// `U′_{1..K−1}`
    pub up: Matrix<T>,
}

impl<T: Scalar> Parts<T> {
    pub fn new(model: &SystemModel<T>) -> Result<Self, MmapError> {
        let exit = |a: &Matrix<T>| -> Matrix<T> {
            let s = a.row_sums();
            let v: Vec<T> = match model.time_mode {
                TimeMode::Continuous => s.into_iter().map(|x| -x).collect(),
                TimeMode::Discrete => s.into_iter().map(|x| T::one() - x).collect(),
            };
            Matrix::col_vector(&v)
        };
        let sh = &model.shocks;
        let fac = &model.facility;
        let u = (1..=model.levels())
            .map(|k| model.level_selector(k))
            .collect::<Result<Vec<_>, _>>()?;
        let (ua, up) = model.noncritical_selectors();
        let c = sh.c.clone();
        Ok(Self {
            m: model.m(),
            t: model.t(),
            d: model.d(),
            levels: model.levels(),
            tm: model.wear.t.clone(),
            tr0: Matrix::col_vector(&model.wear.t_r0),
            tnr0: Matrix::col_vector(&model.wear.t_nr0),
            w: sh.w.clone(),
            wr0: Matrix::col_vector(&sh.w_r0),
            wnr0: Matrix::col_vector(&sh.w_nr0),
            l: sh.l.clone(),
            lg: model.shock_restart(),
            renew: model.shock_renewal(),
            omega0: sh.omega0,
            ce: Matrix::col_vector(&c.row_sums()),
            c0: Matrix::col_vector(&model.damage_exit()),
            c,
            alpha: Matrix::row_vector(&model.wear.alpha),
            omega: Matrix::row_vector(&sh.omega),
            nu: Matrix::row_vector(&fac.nu),
            v0: exit(&fac.v),
            v: fac.v.clone(),
            beta1: Matrix::row_vector(&fac.beta1),
            s1_0: exit(&fac.s1),
            s1: fac.s1.clone(),
            beta2: Matrix::row_vector(&fac.beta2),
            s2_0: exit(&fac.s2),
            s2: fac.s2.clone(),
            p: fac.p.clone(),
            u,
            ua,
            up,
        })
    }

    pub fn eye(n: usize) -> Matrix<T> {
        Matrix::identity(n)
    }

    pub fn ones(n: usize) -> Matrix<T> {
        Matrix::ones_col(n)
    }

    pub fn one() -> Matrix<T> {
        Matrix::scalar(T::one())
    }

    /// `U_K·e`, the indicator column of the critical level.
    pub fn critical_indicator(&self) -> Matrix<T> {
        &self.u[self.levels - 1] * &Self::ones(self.m)
    }

    pub fn check_u(&self, func: &'static str, u: &Matrix<T>) -> Result<(), MmapError> {
        if u.cols() != self.m {
            return Err(MmapError::Dimension {
                func,
                detail: format!("U has {} columns, expected {}", u.cols(), self.m),
            });
        }
        Ok(())
    }

    pub fn check_rows(
        func: &'static str,
        name: &str,
        m: &Matrix<T>,
        rows: usize,
    ) -> Result<(), MmapError> {
        if m.rows() != rows {
            return Err(MmapError::Dimension {
                func,
                detail: format!("{name} has {} rows, expected {rows}", m.rows()),
            });
        }
        Ok(())
    }
}

/// Places `m` into the macro-state cell `(from, to)` of the block for `label`.
pub(crate) struct BlockSet<'a, T> {
    pub layout: &'a StateLayout,
    pub blocks: BTreeMap<EventLabel, Matrix<T>>,
}

impl<'a, T: Scalar> BlockSet<'a, T> {
    pub fn new(layout: &'a StateLayout, labels: &[EventLabel]) -> Self {
        let n = layout.total();
        let blocks = labels.iter().map(|&l| (l, Matrix::zeros(n, n))).collect();
        Self { layout, blocks }
    }

    pub fn place(&mut self, label: EventLabel, from: MacroState, to: MacroState, m: &Matrix<T>) {
        debug_assert!(label.cells().contains(&(from, to)), "{label} placed outside its cells");
        assert_eq!(
            m.shape(),
            (self.layout.dim(from), self.layout.dim(to)),
            "{label} cell ({from}, {to}) has the wrong shape"
        );
        let b = self.blocks.get_mut(&label).expect("label registered");
        b.add_block(self.layout.offset(from), self.layout.offset(to), m);
    }
}
