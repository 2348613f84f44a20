//! The declarative system model: input matrices, level partition, validation
//! and the macro-state layout of the joint phase space.

use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matkit::{expm, solve_normalized, MatError, Matrix};
use crate::phdist::{ContinuousPh, DiscretePh, PhError, ValidationReport};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    Continuous,
    Discrete,
}

/// A single validation finding. `row` is one-based when present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub field: String,
    pub row: Option<usize>,
    pub message: String,
    pub residual: Option<f64>,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.field)?;
        if let Some(r) = self.row {
            write!(f, " row {r}")?;
        }
        write!(f, ": {}", self.message)?;
        if let Some(res) = self.residual {
            write!(f, " (residual {res:.6e})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model document: {0}")]
    Parse(String),
    #[error("invalid model: {}", join_issues(.0))]
    Invalid(Vec<Issue>),
    #[error("level {k} outside 1..={levels}")]
    LevelOutOfRange { k: usize, levels: usize },
    #[error("operation requires a {expected:?}-time model")]
    WrongTimeMode { expected: TimeMode },
    #[error(transparent)]
    Matrix(#[from] MatError),
    #[error(transparent)]
    Ph(#[from] PhError),
}

fn join_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl ModelError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            ModelError::Invalid(v) => v,
            _ => &[],
        }
    }
}

/// On-disk representation. Matrices are row-major arrays of arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub time_mode: TimeMode,
    pub levels: Vec<usize>,
    pub alpha: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    #[serde(rename = "T_r0")]
    pub t_r0: Vec<f64>,
    #[serde(rename = "T_nr0")]
    pub t_nr0: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    #[serde(rename = "W_r0")]
    pub w_r0: Vec<f64>,
    #[serde(rename = "W_nr0")]
    pub w_nr0: Vec<f64>,
    pub omega0: f64,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub omega: Vec<f64>,
    pub beta1: Vec<f64>,
    #[serde(rename = "S1")]
    pub s1: Vec<Vec<f64>>,
    pub beta2: Vec<f64>,
    #[serde(rename = "S2")]
    pub s2: Vec<Vec<f64>>,
    pub nu: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
    pub p: Vec<f64>,
}

/// Internal wear process `(α, T)` split into `K` levels.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalWear<T> {
    pub levels: Vec<usize>,
    pub alpha: Vec<T>,
    pub t: Matrix<T>,
    pub t_r0: Vec<T>,
    pub t_nr0: Vec<T>,
}

/// Shock clock `(γ, L)` and the consequences of a shock.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockStructure<T> {
    pub gamma: Vec<T>,
    pub l: Matrix<T>,
    pub w: Matrix<T>,
    pub w_r0: Vec<T>,
    pub w_nr0: Vec<T>,
    pub omega0: T,
    pub c: Matrix<T>,
    pub omega: Vec<T>,
}

/// Corrective repair, preventive maintenance, vacation time and stay policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairFacility<T> {
    pub beta1: Vec<T>,
    pub s1: Matrix<T>,
    pub beta2: Vec<T>,
    pub s2: Matrix<T>,
    pub nu: Vec<T>,
    pub v: Matrix<T>,
    /// `p[k]` is the probability of leaving again after observing level `k+1`.
    pub p: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel<T> {
    pub time_mode: TimeMode,
    pub wear: InternalWear<T>,
    pub shocks: ShockStructure<T>,
    pub facility: RepairFacility<T>,
}

/// Which embedded phase-type distribution to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    ShockClock,
    CorrectiveRepair,
    PreventiveMaintenance,
    Vacation,
}

/// A phase-type distribution in the model's own time mode.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyPh<T> {
    Continuous(ContinuousPh<T>),
    Discrete(DiscretePh<T>),
}

impl<T: Scalar> AnyPh<T> {
    pub fn mean(&self) -> Result<T, PhError> {
        match self {
            AnyPh::Continuous(p) => p.mean(),
            AnyPh::Discrete(p) => p.mean(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        match self {
            AnyPh::Continuous(p) => p.validate(),
            AnyPh::Discrete(p) => p.validate(),
        }
    }

    pub fn embedded_stationary(&self) -> Result<Vec<T>, PhError> {
        match self {
            AnyPh::Continuous(p) => p.embedded_stationary(),
            AnyPh::Discrete(p) => p.embedded_stationary(),
        }
    }

    /// Exit vector (`−Ae` or `e − Ae`).
    pub fn exit(&self) -> &[T] {
        match self {
            AnyPh::Continuous(p) => p.exit(),
            AnyPh::Discrete(p) => p.exit(),
        }
    }
}

fn mat<T: Scalar>(field: &str, rows: &[Vec<f64>], issues: &mut Vec<Issue>) -> Matrix<T> {
    match Matrix::from_rows(rows) {
        Ok(m) => Matrix::from_fn(m.rows(), m.cols(), |i, j| T::lit(m[(i, j)])),
        Err(e) => {
            issues.push(Issue {
                field: field.into(),
                row: None,
                message: e.to_string(),
                residual: None,
            });
            Matrix::zeros(1, 1)
        }
    }
}

fn vec_t<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn vec_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn rows_f64<T: Scalar>(m: &Matrix<T>) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| vec_f64(m.row(i))).collect()
}

struct Checker<'a> {
    issues: &'a mut Vec<Issue>,
    tol: f64,
}

impl Checker<'_> {
    fn push(&mut self, field: &str, row: Option<usize>, message: impl Into<String>, residual: Option<f64>) {
        self.issues.push(Issue {
            field: field.into(),
            row,
            message: message.into(),
            residual,
        });
    }

    fn len<T>(&mut self, field: &str, v: &[T], n: usize) -> bool {
        if v.len() != n {
            self.push(field, None, format!("length {} but expected {n}", v.len()), None);
            false
        } else {
            true
        }
    }

    fn shape<T: Scalar>(&mut self, field: &str, m: &Matrix<T>, r: usize, c: usize) -> bool {
        if m.shape() != (r, c) {
            self.push(
                field,
                None,
                format!("shape {}x{} but expected {r}x{c}", m.rows(), m.cols()),
                None,
            );
            false
        } else {
            true
        }
    }

    fn finite<T: Scalar>(&mut self, field: &str, v: &[T]) -> bool {
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            self.push(field, Some(i + 1), "non-finite entry", None);
            false
        } else {
            true
        }
    }

    fn nonneg<T: Scalar>(&mut self, field: &str, v: &[T]) {
        for (i, &x) in v.iter().enumerate() {
            if x.as_f64() < -self.tol {
                self.push(field, Some(i + 1), "negative entry", Some(x.as_f64()));
            }
        }
    }

    fn probability_row<T: Scalar>(&mut self, field: &str, v: &[T]) {
        self.nonneg(field, v);
        let s: f64 = v.iter().map(|x| x.as_f64()).sum();
        if (s - 1.0).abs() > self.tol {
            self.push(field, None, "entries must sum to 1", Some(s - 1.0));
        }
    }

    fn unit_interval(&mut self, field: &str, row: Option<usize>, x: f64) {
        if !(x >= -self.tol && x <= 1.0 + self.tol) {
            self.push(field, row, format!("value {x} outside [0, 1]"), None);
        }
    }

    /// Initial-vector findings are skipped: those are checked as probability rows.
    fn report(&mut self, field: &str, report: ValidationReport) {
        use crate::phdist::ViolationKind::{InitMassAboveOne, InitNegative};
        for v in report.violations {
            if matches!(v.kind, InitNegative | InitMassAboveOne) {
                continue;
            }
            self.push(field, Some(v.row + 1), v.to_string(), Some(v.magnitude));
        }
    }

    /// `m·e + Σ exits` must equal `target` on every row.
    fn balance<T: Scalar>(&mut self, field: &str, m: &Matrix<T>, exits: &[&[T]], target: f64) {
        for i in 0..m.rows() {
            let mut s: f64 = m.row(i).iter().map(|x| x.as_f64()).sum();
            for e in exits {
                s += e[i].as_f64();
            }
            let res = s - target;
            let scale = m.row(i).iter().map(|x| x.as_f64().abs()).fold(1.0, f64::max);
            if res.abs() > self.tol * scale {
                self.push(field, Some(i + 1), "conservation violated", Some(res));
            }
        }
    }
}

impl<T: Scalar> SystemModel<T> {
    pub fn from_config(cfg: &ModelConfig) -> Result<Self, ModelError> {
        let mut issues = Vec::new();
        let model = SystemModel {
            time_mode: cfg.time_mode,
            wear: InternalWear {
                levels: cfg.levels.clone(),
                alpha: vec_t(&cfg.alpha),
                t: mat("T", &cfg.t, &mut issues),
                t_r0: vec_t(&cfg.t_r0),
                t_nr0: vec_t(&cfg.t_nr0),
            },
            shocks: ShockStructure {
                gamma: vec_t(&cfg.gamma),
                l: mat("L", &cfg.l, &mut issues),
                w: mat("W", &cfg.w, &mut issues),
                w_r0: vec_t(&cfg.w_r0),
                w_nr0: vec_t(&cfg.w_nr0),
                omega0: T::lit(cfg.omega0),
                c: mat("C", &cfg.c, &mut issues),
                omega: vec_t(&cfg.omega),
            },
            facility: RepairFacility {
                beta1: vec_t(&cfg.beta1),
                s1: mat("S1", &cfg.s1, &mut issues),
                beta2: vec_t(&cfg.beta2),
                s2: mat("S2", &cfg.s2, &mut issues),
                nu: vec_t(&cfg.nu),
                v: mat("V", &cfg.v, &mut issues),
                p: vec_t(&cfg.p),
            },
        };
        if !issues.is_empty() {
            return Err(ModelError::Invalid(issues));
        }
        model.validated()
    }

    pub fn to_config(&self) -> ModelConfig {
        ModelConfig {
            note: None,
            time_mode: self.time_mode,
            levels: self.wear.levels.clone(),
            alpha: vec_f64(&self.wear.alpha),
            t: rows_f64(&self.wear.t),
            t_r0: vec_f64(&self.wear.t_r0),
            t_nr0: vec_f64(&self.wear.t_nr0),
            gamma: vec_f64(&self.shocks.gamma),
            l: rows_f64(&self.shocks.l),
            w: rows_f64(&self.shocks.w),
            w_r0: vec_f64(&self.shocks.w_r0),
            w_nr0: vec_f64(&self.shocks.w_nr0),
            omega0: self.shocks.omega0.as_f64(),
            c: rows_f64(&self.shocks.c),
            omega: vec_f64(&self.shocks.omega),
            beta1: vec_f64(&self.facility.beta1),
            s1: rows_f64(&self.facility.s1),
            beta2: vec_f64(&self.facility.beta2),
            s2: rows_f64(&self.facility.s2),
            nu: vec_f64(&self.facility.nu),
            v: rows_f64(&self.facility.v),
            p: vec_f64(&self.facility.p),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, ModelError> {
        let cfg: ModelConfig = serde_json::from_str(s).map_err(|e| ModelError::Parse(e.to_string()))?;
        Self::from_config(&cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_config()).expect("model config serializes")
    }

    /// Returns `self` if every invariant holds, otherwise the full issue list.
    pub fn validated(self) -> Result<Self, ModelError> {
        let issues = self.validate();
        if issues.is_empty() {
            Ok(self)
        } else {
            Err(ModelError::Invalid(issues))
        }
    }

    /// Every violated invariant, in a stable order.
    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        let mut ck = Checker {
            issues: &mut issues,
            tol: T::tolerance().as_f64(),
        };
        let wear = &self.wear;
        let sh = &self.shocks;
        let fac = &self.facility;

        if wear.levels.len() < 2 {
            ck.push(
                "levels",
                None,
                "at least two levels are required (a critical level and one below it)",
                None,
            );
        }
        if let Some(i) = wear.levels.iter().position(|&n| n == 0) {
            ck.push("levels", Some(i + 1), "level with zero phases", None);
        }
        let m: usize = wear.levels.iter().sum();
        let mut dims_ok = ck.shape("T", &wear.t, m, m);
        dims_ok &= ck.len("alpha", &wear.alpha, m);
        dims_ok &= ck.len("T_r0", &wear.t_r0, m);
        dims_ok &= ck.len("T_nr0", &wear.t_nr0, m);
        dims_ok &= ck.shape("W", &sh.w, m, m);
        dims_ok &= ck.len("W_r0", &sh.w_r0, m);
        dims_ok &= ck.len("W_nr0", &sh.w_nr0, m);
        let t = sh.gamma.len();
        dims_ok &= ck.shape("L", &sh.l, t, t);
        let d = sh.omega.len();
        dims_ok &= ck.shape("C", &sh.c, d, d);
        dims_ok &= ck.shape("S1", &fac.s1, fac.beta1.len(), fac.beta1.len());
        dims_ok &= ck.shape("S2", &fac.s2, fac.beta2.len(), fac.beta2.len());
        dims_ok &= ck.shape("V", &fac.v, fac.nu.len(), fac.nu.len());
        dims_ok &= ck.len("p", &fac.p, wear.levels.len().saturating_sub(1));
        for (name, empty) in [
            ("gamma", t == 0),
            ("omega", d == 0),
            ("beta1", fac.beta1.is_empty()),
            ("beta2", fac.beta2.is_empty()),
            ("nu", fac.nu.is_empty()),
        ] {
            if empty {
                ck.push(name, None, "empty vector", None);
                dims_ok = false;
            }
        }
        let mut finite = true;
        for (name, m) in [
            ("T", &wear.t),
            ("L", &sh.l),
            ("W", &sh.w),
            ("C", &sh.c),
            ("S1", &fac.s1),
            ("S2", &fac.s2),
            ("V", &fac.v),
        ] {
            finite &= ck.finite(name, m.as_slice());
        }
        for (name, v) in [
            ("alpha", &wear.alpha),
            ("T_r0", &wear.t_r0),
            ("T_nr0", &wear.t_nr0),
            ("gamma", &sh.gamma),
            ("W_r0", &sh.w_r0),
            ("W_nr0", &sh.w_nr0),
            ("omega", &sh.omega),
            ("beta1", &fac.beta1),
            ("beta2", &fac.beta2),
            ("nu", &fac.nu),
            ("p", &fac.p),
        ] {
            finite &= ck.finite(name, v);
        }
        finite &= ck.finite("omega0", &[sh.omega0]);
        if !dims_ok || !finite {
            return issues;
        }

        let discrete = self.time_mode == TimeMode::Discrete;
        ck.probability_row("alpha", &wear.alpha);
        ck.probability_row("gamma", &sh.gamma);
        ck.probability_row("omega", &sh.omega);
        ck.probability_row("beta1", &fac.beta1);
        ck.probability_row("beta2", &fac.beta2);
        ck.probability_row("nu", &fac.nu);
        ck.nonneg("T_r0", &wear.t_r0);
        ck.nonneg("T_nr0", &wear.t_nr0);
        ck.nonneg("W_r0", &sh.w_r0);
        ck.nonneg("W_nr0", &sh.w_nr0);
        ck.unit_interval("omega0", None, sh.omega0.as_f64());
        for (k, &pk) in fac.p.iter().enumerate() {
            ck.unit_interval("p", Some(k + 1), pk.as_f64());
        }

        // Internal wear: structure of T plus conservation with both exits.
        let wear_ph = self.ph_of(&wear.alpha, &wear.t);
        let wear_target = if discrete { 1.0 } else { 0.0 };
        ck.report("T", strip_row_sum(wear_ph.validate()));
        ck.balance("T", &wear.t, &[&wear.t_r0, &wear.t_nr0], wear_target);

        for i in 0..m {
            ck.nonneg("W", sh.w.row(i));
        }
        ck.balance("W", &sh.w, &[&sh.w_r0, &sh.w_nr0], 1.0);

        for i in 0..d {
            ck.nonneg("C", sh.c.row(i));
        }
        let c_ph = DiscretePh::new(sh.omega.clone(), sh.c.clone()).expect("checked shape");
        ck.report("C", c_ph.validate());

        let facility_ok = {
            let before = ck.issues.len();
            for (name, init, a) in [
                ("L", &sh.gamma, &sh.l),
                ("S1", &fac.beta1, &fac.s1),
                ("S2", &fac.beta2, &fac.s2),
                ("V", &fac.nu, &fac.v),
            ] {
                ck.report(name, self.ph_of(init, a).validate());
            }
            ck.issues.len() == before
        };
        if facility_ok {
            for (name, init, a) in [
                ("S1", &fac.beta1, &fac.s1),
                ("S2", &fac.beta2, &fac.s2),
                ("V", &fac.nu, &fac.v),
                ("L", &sh.gamma, &sh.l),
            ] {
                if self.ph_of(init, a).mean().is_err() {
                    ck.push(name, None, "absorption is not reachable from every phase", None);
                }
            }
        }
        issues
    }

    fn ph_of(&self, init: &[T], a: &Matrix<T>) -> AnyPh<T> {
        match self.time_mode {
            TimeMode::Continuous => {
                AnyPh::Continuous(ContinuousPh::new(init.to_vec(), a.clone()).expect("checked shape"))
            }
            TimeMode::Discrete => {
                AnyPh::Discrete(DiscretePh::new(init.to_vec(), a.clone()).expect("checked shape"))
            }
        }
    }

    pub fn ph(&self, which: Component) -> AnyPh<T> {
        let (init, a) = match which {
            Component::ShockClock => (&self.shocks.gamma, &self.shocks.l),
            Component::CorrectiveRepair => (&self.facility.beta1, &self.facility.s1),
            Component::PreventiveMaintenance => (&self.facility.beta2, &self.facility.s2),
            Component::Vacation => (&self.facility.nu, &self.facility.v),
        };
        self.ph_of(init, a)
    }

    /// Replaces the vacation distribution and stay probabilities, revalidating.
    pub fn with_vacation(&self, nu: Vec<T>, v: Matrix<T>, p: Vec<T>) -> Result<Self, ModelError> {
        let mut out = self.clone();
        out.facility.nu = nu;
        out.facility.v = v;
        out.facility.p = p;
        out.validated()
    }

    pub fn levels(&self) -> usize {
        self.wear.levels.len()
    }

    pub fn m(&self) -> usize {
        self.wear.levels.iter().sum()
    }

    /// Phases in the critical level.
    pub fn n_critical(&self) -> usize {
        *self.wear.levels.last().expect("validated model has levels")
    }

    pub fn t(&self) -> usize {
        self.shocks.gamma.len()
    }

    pub fn d(&self) -> usize {
        self.shocks.omega.len()
    }

    pub fn v(&self) -> usize {
        self.facility.nu.len()
    }

    pub fn m1(&self) -> usize {
        self.facility.beta1.len()
    }

    pub fn m2(&self) -> usize {
        self.facility.beta2.len()
    }

    /// Range of internal phases (zero-based) belonging to level `k` (one-based).
    pub fn level_range(&self, k: usize) -> Result<Range<usize>, ModelError> {
        let kk = self.levels();
        if k == 0 || k > kk {
            return Err(ModelError::LevelOutOfRange { k, levels: kk });
        }
        let start: usize = self.wear.levels[..k - 1].iter().sum();
        Ok(start..start + self.wear.levels[k - 1])
    }

    /// Level (one-based) of internal phase `i` (zero-based).
    pub fn level_of_phase(&self, i: usize) -> usize {
        let mut acc = 0;
        for (k, &n) in self.wear.levels.iter().enumerate() {
            acc += n;
            if i < acc {
                return k + 1;
            }
        }
        panic!("internal phase {i} out of range");
    }

    /// Diagonal selector `U_k` with ones on the level-`k` block.
    pub fn level_selector(&self, k: usize) -> Result<Matrix<T>, ModelError> {
        let r = self.level_range(k)?;
        let m = self.m();
        Ok(Matrix::from_fn(m, m, |i, j| {
            if i == j && r.contains(&i) {
                T::one()
            } else {
                T::zero()
            }
        }))
    }

    /// `(U_{1..K−1}, U′_{1..K−1})`: the `(m−n_K)×m` block `(I | 0)` and its transpose.
    pub fn noncritical_selectors(&self) -> (Matrix<T>, Matrix<T>) {
        let m = self.m();
        let r = m - self.n_critical();
        let u = Matrix::from_fn(r, m, |i, j| if i == j { T::one() } else { T::zero() });
        let ut = u.transpose();
        (u, ut)
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout::new([
            vec![self.m(), self.t(), self.d(), self.v()],
            vec![self.m() - self.n_critical(), self.t(), self.d()],
            vec![self.t(), self.v()],
            vec![self.t(), self.v()],
            vec![self.t(), self.m1()],
            vec![self.t(), self.m2()],
        ])
    }

    /// `L⁰`, the shock-clock exit vector.
    pub fn shock_exit(&self) -> Vec<T> {
        self.ph(Component::ShockClock).exit().to_vec()
    }

    /// `L⁰γ`.
    pub fn shock_restart(&self) -> Matrix<T> {
        &Matrix::col_vector(&self.shock_exit()) * &Matrix::row_vector(&self.shocks.gamma)
    }

    /// `L + L⁰γ`, the renewal shock clock that keeps running in every macro-state.
    pub fn shock_renewal(&self) -> Matrix<T> {
        &self.shocks.l + &self.shock_restart()
    }

    /// Stationary phase distribution of the shock renewal clock.
    pub fn shock_stationary(&self) -> Result<Vec<T>, ModelError> {
        let mut g = self.shock_renewal();
        if self.time_mode == TimeMode::Discrete {
            g = &g - &Matrix::identity(self.t());
        }
        Ok(solve_normalized(&g, &vec![T::one(); self.t()])?)
    }

    /// `C⁰ = e − C·e`.
    pub fn damage_exit(&self) -> Vec<T> {
        self.shocks.c.row_sums().into_iter().map(|s| T::one() - s).collect()
    }

    /// Mean time spent in level `k` when entering at its first phase, driven
    /// by internal transitions alone.
    pub fn level_sojourn_mean(&self, k: usize) -> Result<T, ModelError> {
        let r = self.level_range(k)?;
        let n = r.len();
        let block = self.wear.t.block(r.start, r.start, n, n);
        let mut init = vec![T::zero(); n];
        init[0] = T::one();
        let mean = match self.time_mode {
            TimeMode::Continuous => ContinuousPh::new(init, block)?.mean()?,
            TimeMode::Discrete => DiscretePh::new(init, block)?.mean()?,
        };
        Ok(mean)
    }

    /// Exact `h`-skeleton of a continuous model: every rate matrix `A` with exit
    /// columns `E` becomes the matching block of `exp([[A, E], [0, 0]]·h)`.
    /// Shock consequences, initial vectors and stay probabilities carry over.
    pub fn discretize(&self, h: T) -> Result<Self, ModelError> {
        if self.time_mode != TimeMode::Continuous {
            return Err(ModelError::WrongTimeMode {
                expected: TimeMode::Continuous,
            });
        }
        let skeleton = |a: &Matrix<T>, exits: &[&[T]]| -> Result<(Matrix<T>, Vec<Vec<T>>), MatError> {
            let n = a.rows();
            let k = exits.len();
            let mut aug = Matrix::zeros(n + k, n + k);
            aug.add_block(0, 0, a);
            for (c, e) in exits.iter().enumerate() {
                aug.add_block(0, n + c, &Matrix::col_vector(e));
            }
            let p = expm(&aug, h)?;
            let cols = (0..k).map(|c| p.block(0, n + c, n, 1).column(0)).collect();
            Ok((p.block(0, 0, n, n), cols))
        };
        let mut out = self.clone();
        out.time_mode = TimeMode::Discrete;
        let (t, ex) = skeleton(&self.wear.t, &[&self.wear.t_r0, &self.wear.t_nr0])?;
        out.wear.t = t;
        out.wear.t_r0 = ex[0].clone();
        out.wear.t_nr0 = ex[1].clone();
        let shock_exit = self.shock_exit();
        out.shocks.l = skeleton(&self.shocks.l, &[&shock_exit])?.0;
        for (dst, src) in [
            (&mut out.facility.s1, &self.facility.s1),
            (&mut out.facility.s2, &self.facility.s2),
            (&mut out.facility.v, &self.facility.v),
        ] {
            let exit: Vec<T> = src.row_sums().into_iter().map(|s| -s).collect();
            *dst = skeleton(src, &[&exit])?.0;
        }
        out.validated()
    }
}

/// Validation of T reports row-sum problems through the balance check instead,
/// because the exits of T are split into two explicit vectors.
fn strip_row_sum(mut r: ValidationReport) -> ValidationReport {
    use crate::phdist::ViolationKind::*;
    r.violations
        .retain(|v| !matches!(v.kind, RowSumPositive | RowMassAboveOne));
    r
}

/// The six macro-states in layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum MacroState {
    /// Operational, repairperson on vacation.
    OperationalVacation,
    /// Operational, repairperson at the workplace.
    OperationalPresent,
    RepairableFailure,
    NonRepairableFailure,
    CorrectiveRepair,
    PreventiveMaintenance,
}

impl MacroState {
    pub const ALL: [MacroState; 6] = [
        MacroState::OperationalVacation,
        MacroState::OperationalPresent,
        MacroState::RepairableFailure,
        MacroState::NonRepairableFailure,
        MacroState::CorrectiveRepair,
        MacroState::PreventiveMaintenance,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn short_name(self) -> &'static str {
        match self {
            MacroState::OperationalVacation => "O^v",
            MacroState::OperationalPresent => "O^nv",
            MacroState::RepairableFailure => "RF",
            MacroState::NonRepairableFailure => "NRF",
            MacroState::CorrectiveRepair => "CR",
            MacroState::PreventiveMaintenance => "PM",
        }
    }

    pub fn is_operational(self) -> bool {
        matches!(
            self,
            MacroState::OperationalVacation | MacroState::OperationalPresent
        )
    }
}

impl fmt::Display for MacroState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Dimensions and offsets of the macro-states in the global phase vector.
/// Within a macro-state phases are lexicographic with the leftmost factor
/// varying slowest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLayout {
    factors: [Vec<usize>; 6],
    dims: [usize; 6],
    offsets: [usize; 6],
    total: usize,
}

impl StateLayout {
    pub fn new(factors: [Vec<usize>; 6]) -> Self {
        let mut dims = [0; 6];
        let mut offsets = [0; 6];
        let mut acc = 0;
        for s in 0..6 {
            dims[s] = factors[s].iter().product();
            offsets[s] = acc;
            acc += dims[s];
        }
        Self {
            factors,
            dims,
            offsets,
            total: acc,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn dim(&self, s: MacroState) -> usize {
        self.dims[s.index()]
    }

    pub fn offset(&self, s: MacroState) -> usize {
        self.offsets[s.index()]
    }

    pub fn range(&self, s: MacroState) -> Range<usize> {
        let o = self.offset(s);
        o..o + self.dim(s)
    }

    /// Factor sizes of a macro-state, slowest first.
    pub fn factors(&self, s: MacroState) -> &[usize] {
        &self.factors[s.index()]
    }

    /// Global index of a factor-phase tuple, or `None` if any coordinate is out of range.
    pub fn encode(&self, s: MacroState, coords: &[usize]) -> Option<usize> {
        let f = self.factors(s);
        if coords.len() != f.len() || coords.iter().zip(f).any(|(&c, &n)| c >= n) {
            return None;
        }
        let local = coords.iter().zip(f).fold(0, |acc, (&c, &n)| acc * n + c);
        Some(self.offset(s) + local)
    }

    /// Inverse of [`encode`](Self::encode).
    pub fn decode(&self, global: usize) -> Option<(MacroState, Vec<usize>)> {
        let s = *MacroState::ALL
            .iter()
            .find(|&&s| self.range(s).contains(&global))?;
        let mut local = global - self.offset(s);
        let f = self.factors(s);
        let mut coords = vec![0; f.len()];
        for k in (0..f.len()).rev() {
            coords[k] = local % f[k];
            local /= f[k];
        }
        Some((s, coords))
    }

    /// Macro-state containing `global`.
    pub fn macro_of(&self, global: usize) -> Option<MacroState> {
        MacroState::ALL
            .iter()
            .copied()
            .find(|&s| self.range(s).contains(&global))
    }
}
