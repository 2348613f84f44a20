//! Discrete-time event blocks. Several events may share a period, so the
//! shock factor is `L` (no shock) or `L⁰γ` (shock) and internal moves
//! precede the shock's modification `W`.

use crate::matkit::{kron_all, Matrix};
use crate::model::{MacroState::*, SystemModel, TimeMode};
use crate::scalar::Scalar;

use super::{BlockSet, EventLabel, MarkedProcess, MmapError, Parts};

fn require_discrete<T: Scalar>(model: &SystemModel<T>) -> Result<(), MmapError> {
    if model.time_mode != TimeMode::Discrete {
        return Err(MmapError::WrongTimeMode {
            expected: TimeMode::Discrete,
        });
    }
    Ok(())
}

/// `U T_r⁰ ⊗ L ⊗ e + U(T_r⁰ + T W_r⁰) ⊗ L⁰γ(1−ω⁰) ⊗ C e`.
pub fn h_rf_d<T: Scalar>(model: &SystemModel<T>, u: &Matrix<T>) -> Result<Matrix<T>, MmapError> {
    require_discrete(model)?;
    let p = Parts::new(model)?;
    h_rf_parts(&p, u)
}

fn h_rf_parts<T: Scalar>(p: &Parts<T>, u: &Matrix<T>) -> Result<Matrix<T>, MmapError> {
    p.check_u("h_rf_d", u)?;
    let kill_free = p.lg.scale(T::one() - p.omega0);
    let via_shock = &p.tr0 + &(&p.tm * &p.wr0);
    let mut out = kron_all(&[&(u * &p.tr0), &p.l, &Parts::ones(p.d)]);
    out += &kron_all(&[&(u * &via_shock), &kill_free, &p.ce]);
    Ok(out)
}

/// `U T_nr⁰ R ⊗ L ⊗ eA + U(T_nr⁰ + T W_nr⁰) R ⊗ L⁰γ(1−ω⁰) ⊗ CeA + UeR ⊗ L⁰γω⁰ ⊗ eA + UeR ⊗ L⁰γ(1−ω⁰) ⊗ C⁰A`.
pub fn h_nrf_d<T: Scalar>(
    model: &SystemModel<T>,
    u: &Matrix<T>,
    r: &Matrix<T>,
    a: &Matrix<T>,
) -> Result<Matrix<T>, MmapError> {
    require_discrete(model)?;
    let p = Parts::new(model)?;
    h_nrf_parts(&p, u, r, a)
}

fn h_nrf_parts<T: Scalar>(
    p: &Parts<T>,
    u: &Matrix<T>,
    r: &Matrix<T>,
    a: &Matrix<T>,
) -> Result<Matrix<T>, MmapError> {
    p.check_u("h_nrf_d", u)?;
    Parts::check_rows("h_nrf_d", "R", r, 1)?;
    Parts::check_rows("h_nrf_d", "A", a, 1)?;
    let kill_free = p.lg.scale(T::one() - p.omega0);
    let kill = p.lg.scale(p.omega0);
    let ea = &Parts::ones(p.d) * a;
    let uer = &(u * &Parts::ones(p.m)) * r;
    let via_shock = &p.tnr0 + &(&p.tm * &p.wnr0);
    let mut out = kron_all(&[&(&(u * &p.tnr0) * r), &p.l, &ea]);
    out += &kron_all(&[&(&(u * &via_shock) * r), &kill_free, &(&p.ce * a)]);
    out += &kron_all(&[&uer, &kill, &ea]);
    out += &kron_all(&[&uer, &kill_free, &(&p.c0 * a)]);
    Ok(out)
}

/// `U T R ⊗ L ⊗ A + U T W R ⊗ L⁰γ(1−ω⁰) ⊗ C A`.
pub fn h_o_d<T: Scalar>(
    model: &SystemModel<T>,
    u: &Matrix<T>,
    r: &Matrix<T>,
    a: &Matrix<T>,
) -> Result<Matrix<T>, MmapError> {
    require_discrete(model)?;
    let p = Parts::new(model)?;
    h_o_parts(&p, u, r, a)
}

fn h_o_parts<T: Scalar>(
    p: &Parts<T>,
    u: &Matrix<T>,
    r: &Matrix<T>,
    a: &Matrix<T>,
) -> Result<Matrix<T>, MmapError> {
    p.check_u("h_o_d", u)?;
    Parts::check_rows("h_o_d", "R", r, p.m)?;
    Parts::check_rows("h_o_d", "A", a, p.d)?;
    let kill_free = p.lg.scale(T::one() - p.omega0);
    let ut = u * &p.tm;
    let mut out = kron_all(&[&(&ut * r), &p.l, a]);
    out += &kron_all(&[&(&(&ut * &p.w) * r), &kill_free, &(&p.c * a)]);
    Ok(out)
}

/// All thirteen discrete-time blocks and the transition matrix `D`.
pub fn build_discrete<T: Scalar>(model: &SystemModel<T>) -> Result<MarkedProcess<T>, MmapError> {
    require_discrete(model)?;
    let p = Parts::new(model)?;
    let layout = model.layout();
    let (m, d) = (p.m, p.d);
    let eye = Parts::<T>::eye;
    let one = Parts::<T>::one();
    let big_k = p.levels;
    let critical = p.critical_indicator();
    let ed = Parts::ones(d);
    let v0nu = &p.v0 * &p.nu;
    let mut set = BlockSet::new(&layout, &EventLabel::DISCRETE);

    // Repairperson present.
    set.place(
        EventLabel::Pm,
        OperationalPresent,
        PreventiveMaintenance,
        &kron_all(&[&h_o_parts(&p, &p.ua, &critical, &ed)?, &p.beta2]),
    );
    set.place(
        EventLabel::RfCr,
        OperationalPresent,
        CorrectiveRepair,
        &kron_all(&[&h_rf_parts(&p, &p.ua)?, &p.beta1]),
    );
    set.place(
        EventLabel::NrfNu,
        OperationalPresent,
        OperationalVacation,
        &kron_all(&[&h_nrf_parts(&p, &p.ua, &p.alpha, &p.omega)?, &p.nu]),
    );

    // Repairperson on vacation and not returning this period.
    let h_rf_all = h_rf_parts(&p, &eye(m))?;
    set.place(
        EventLabel::Rf,
        OperationalVacation,
        RepairableFailure,
        &kron_all(&[&h_rf_all, &p.v]),
    );
    set.place(
        EventLabel::Nrf,
        OperationalVacation,
        NonRepairableFailure,
        &kron_all(&[&h_nrf_parts(&p, &eye(m), &one, &one)?, &p.v]),
    );

    // Returns. The stay/leave decision uses the level observed after this
    // period's internal move.
    let mut stay = Matrix::zeros(layout.dim(OperationalVacation), layout.dim(OperationalPresent));
    let mut revacation = Matrix::zeros(layout.dim(OperationalVacation), layout.dim(OperationalVacation));
    for k in 0..big_k - 1 {
        let pk = p.p[k];
        let to_present = h_o_parts(&p, &eye(m), &(&p.u[k] * &p.up), &eye(d))?;
        stay += &kron_all(&[&to_present, &p.v0.scale(T::one() - pk)]);
        let keep = h_o_parts(&p, &eye(m), &p.u[k], &eye(d))?;
        revacation += &kron_all(&[&keep, &v0nu.scale(pk)]);
    }
    set.place(EventLabel::R, OperationalVacation, OperationalPresent, &stay);
    set.place(EventLabel::RNvp, OperationalVacation, OperationalVacation, &revacation);
    set.place(
        EventLabel::RPm,
        OperationalVacation,
        PreventiveMaintenance,
        &kron_all(&[&h_o_parts(&p, &eye(m), &critical, &ed)?, &p.v0, &p.beta2]),
    );
    set.place(
        EventLabel::RRfCr,
        OperationalVacation,
        CorrectiveRepair,
        &kron_all(&[&h_rf_all, &p.v0, &p.beta1]),
    );
    set.place(
        EventLabel::RNrfNu,
        OperationalVacation,
        OperationalVacation,
        &kron_all(&[&h_nrf_parts(&p, &eye(m), &p.alpha, &p.omega)?, &v0nu]),
    );
    set.place(
        EventLabel::RCr,
        RepairableFailure,
        CorrectiveRepair,
        &kron_all(&[&p.renew, &p.v0, &p.beta1]),
    );
    set.place(
        EventLabel::RNu,
        NonRepairableFailure,
        OperationalVacation,
        &kron_all(&[&p.alpha, &p.renew, &p.omega, &v0nu]),
    );

    // Unmarked transitions.
    let o = EventLabel::O;
    set.place(
        o,
        OperationalVacation,
        OperationalVacation,
        &kron_all(&[&h_o_parts(&p, &eye(m), &eye(m), &eye(d))?, &p.v]),
    );
    set.place(
        o,
        OperationalPresent,
        OperationalPresent,
        &h_o_parts(&p, &p.ua, &p.up, &eye(d))?,
    );
    let waiting = kron_all(&[&p.renew, &p.v]);
    set.place(o, RepairableFailure, RepairableFailure, &waiting);
    set.place(o, NonRepairableFailure, NonRepairableFailure, &waiting);
    set.place(o, CorrectiveRepair, CorrectiveRepair, &kron_all(&[&p.renew, &p.s1]));
    set.place(o, PreventiveMaintenance, PreventiveMaintenance, &kron_all(&[&p.renew, &p.s2]));
    set.place(
        o,
        CorrectiveRepair,
        OperationalVacation,
        &kron_all(&[&p.alpha, &p.renew, &p.omega, &p.s1_0, &p.nu]),
    );
    set.place(
        o,
        PreventiveMaintenance,
        OperationalVacation,
        &kron_all(&[&p.alpha, &p.renew, &p.omega, &p.s2_0, &p.nu]),
    );

    let blocks = set.blocks;
    MarkedProcess::assemble(TimeMode::Discrete, layout, blocks)
}
