//! Continuous-time event blocks.

use crate::matkit::{kron_all, Matrix};
use crate::model::{MacroState::*, SystemModel, TimeMode};
use crate::scalar::Scalar;

use super::{BlockSet, EventLabel, MarkedProcess, MmapError, Parts};

fn require_continuous<T: Scalar>(model: &SystemModel<T>) -> Result<(), MmapError> {
    if model.time_mode != TimeMode::Continuous {
        return Err(MmapError::WrongTimeMode {
            expected: TimeMode::Continuous,
        });
    }
    Ok(())
}

/// Repairable failure: `U T_r⁰ ⊗ I ⊗ e + U W_r⁰ ⊗ L⁰γ(1−ω⁰) ⊗ C e`.
pub fn h_rf<T: Scalar>(model: &SystemModel<T>, u: &Matrix<T>) -> Result<Matrix<T>, MmapError> {
    require_continuous(model)?;
    let p = Parts::new(model)?;
    h_rf_parts(&p, u)
}

pub(super) fn h_rf_parts<T: Scalar>(p: &Parts<T>, u: &Matrix<T>) -> Result<Matrix<T>, MmapError> {
    p.check_u("h_rf", u)?;
    let kill_free = p.lg.scale(T::one() - p.omega0);
    let internal = kron_all(&[&(u * &p.tr0), &Parts::eye(p.t), &Parts::ones(p.d)]);
    let shock = kron_all(&[&(u * &p.wr0), &kill_free, &p.ce]);
    Ok(&internal + &shock)
}

/// Non-repairable failure, with `R` applied to the internal factor of every term:
/// `U T_nr⁰ R ⊗ I ⊗ eA + U W_nr⁰ R ⊗ L⁰γ(1−ω⁰) ⊗ CeA + UeR ⊗ L⁰γω⁰ ⊗ eA + UeR ⊗ L⁰γ(1−ω⁰) ⊗ C⁰A`.
/// `R` and `A` are row factors; pass a 1×1 `[1]` to collapse either.
pub fn h_nrf<T: Scalar>(
    model: &SystemModel<T>,
    u: &Matrix<T>,
    r: &Matrix<T>,
    a: &Matrix<T>,
) -> Result<Matrix<T>, MmapError> {
    require_continuous(model)?;
    let p = Parts::new(model)?;
    h_nrf_parts(&p, u, r, a)
}

pub(super) fn h_nrf_parts<T: Scalar>(
    p: &Parts<T>,
    u: &Matrix<T>,
    r: &Matrix<T>,
    a: &Matrix<T>,
) -> Result<Matrix<T>, MmapError> {
    p.check_u("h_nrf", u)?;
    Parts::check_rows("h_nrf", "R", r, 1)?;
    Parts::check_rows("h_nrf", "A", a, 1)?;
    let kill_free = p.lg.scale(T::one() - p.omega0);
    let kill = p.lg.scale(p.omega0);
    let ea = &Parts::ones(p.d) * a;
    let uer = &(u * &Parts::ones(p.m)) * r;
    let mut out = kron_all(&[&(&(u * &p.tnr0) * r), &Parts::eye(p.t), &ea]);
    out += &kron_all(&[&(&(u * &p.wnr0) * r), &kill_free, &(&p.ce * a)]);
    out += &kron_all(&[&uer, &kill, &ea]);
    out += &kron_all(&[&uer, &kill_free, &(&p.c0 * a)]);
    Ok(out)
}

/// No failure: `U T R ⊗ I ⊗ A + U R ⊗ L ⊗ A + U W R ⊗ L⁰γ(1−ω⁰) ⊗ C A`.
pub fn h_o<T: Scalar>(
    model: &SystemModel<T>,
    u: &Matrix<T>,
    r: &Matrix<T>,
    a: &Matrix<T>,
) -> Result<Matrix<T>, MmapError> {
    require_continuous(model)?;
    let p = Parts::new(model)?;
    h_o_parts(&p, u, r, a)
}

pub(super) fn h_o_parts<T: Scalar>(
    p: &Parts<T>,
    u: &Matrix<T>,
    r: &Matrix<T>,
    a: &Matrix<T>,
) -> Result<Matrix<T>, MmapError> {
    p.check_u("h_o", u)?;
    Parts::check_rows("h_o", "R", r, p.m)?;
    Parts::check_rows("h_o", "A", a, p.d)?;
    let kill_free = p.lg.scale(T::one() - p.omega0);
    let mut out = kron_all(&[&(&(u * &p.tm) * r), &Parts::eye(p.t), a]);
    out += &kron_all(&[&(u * r), &p.l, a]);
    out += &kron_all(&[&(&(u * &p.w) * r), &kill_free, &(&p.c * a)]);
    Ok(out)
}

/// All eleven continuous-time blocks and the generator `Q`.
pub fn build_continuous<T: Scalar>(model: &SystemModel<T>) -> Result<MarkedProcess<T>, MmapError> {
    require_continuous(model)?;
    let p = Parts::new(model)?;
    let layout = model.layout();
    let (m, t, d) = (p.m, p.t, p.d);
    let v = p.v.rows();
    let (m1, m2) = (p.s1.rows(), p.s2.rows());
    let eye = Parts::<T>::eye;
    let one = Parts::<T>::one();
    let big_k = p.levels;
    let critical = p.critical_indicator();
    let ed = Parts::ones(d);
    let v0nu = &p.v0 * &p.nu;
    let mut set = BlockSet::new(&layout, &EventLabel::CONTINUOUS);

    // Repairperson present: failures and critical-level entries act at once.
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

    // Repairperson on vacation: failures wait for the return.
    set.place(
        EventLabel::Rf,
        OperationalVacation,
        RepairableFailure,
        &kron_all(&[&h_rf_parts(&p, &eye(m))?, &eye(v)]),
    );
    set.place(
        EventLabel::Nrf,
        OperationalVacation,
        NonRepairableFailure,
        &kron_all(&[&h_nrf_parts(&p, &eye(m), &one, &one)?, &eye(v)]),
    );

    // Returns from vacation.
    let mut stay = Matrix::zeros(layout.dim(OperationalVacation), layout.dim(OperationalPresent));
    let mut revacation = Matrix::zeros(layout.dim(OperationalVacation), layout.dim(OperationalVacation));
    for k in 0..big_k - 1 {
        let pk = p.p[k];
        stay += &kron_all(&[&(&p.u[k] * &p.up), &eye(t), &eye(d), &p.v0.scale(T::one() - pk)]);
        revacation += &kron_all(&[&p.u[k], &eye(t), &eye(d), &v0nu.scale(pk)]);
    }
    set.place(EventLabel::R, OperationalVacation, OperationalPresent, &stay);
    set.place(EventLabel::RNvp, OperationalVacation, OperationalVacation, &revacation);
    set.place(
        EventLabel::RPm,
        OperationalVacation,
        PreventiveMaintenance,
        &kron_all(&[&critical, &eye(t), &ed, &p.v0, &p.beta2]),
    );
    set.place(
        EventLabel::RCr,
        RepairableFailure,
        CorrectiveRepair,
        &kron_all(&[&eye(t), &p.v0, &p.beta1]),
    );
    set.place(
        EventLabel::RNu,
        NonRepairableFailure,
        OperationalVacation,
        &kron_all(&[&p.alpha, &eye(t), &p.omega, &v0nu]),
    );

    // Unmarked transitions.
    let o = EventLabel::O;
    set.place(
        o,
        OperationalVacation,
        OperationalVacation,
        &(&kron_all(&[&h_o_parts(&p, &eye(m), &eye(m), &eye(d))?, &eye(v)])
            + &kron_all(&[&eye(m), &eye(t), &eye(d), &p.v])),
    );
    set.place(
        o,
        OperationalPresent,
        OperationalPresent,
        &h_o_parts(&p, &p.ua, &p.up, &eye(d))?,
    );
    let waiting = &kron_all(&[&eye(t), &p.v]) + &kron_all(&[&p.renew, &eye(v)]);
    set.place(o, RepairableFailure, RepairableFailure, &waiting);
    set.place(o, NonRepairableFailure, NonRepairableFailure, &waiting);
    set.place(
        o,
        CorrectiveRepair,
        CorrectiveRepair,
        &(&kron_all(&[&eye(t), &p.s1]) + &kron_all(&[&p.renew, &eye(m1)])),
    );
    set.place(
        o,
        PreventiveMaintenance,
        PreventiveMaintenance,
        &(&kron_all(&[&eye(t), &p.s2]) + &kron_all(&[&p.renew, &eye(m2)])),
    );
    set.place(
        o,
        CorrectiveRepair,
        OperationalVacation,
        &kron_all(&[&p.alpha, &eye(t), &p.omega, &p.s1_0, &p.nu]),
    );
    set.place(
        o,
        PreventiveMaintenance,
        OperationalVacation,
        &kron_all(&[&p.alpha, &eye(t), &p.omega, &p.s2_0, &p.nu]),
    );

    let blocks = set.blocks;
    MarkedProcess::assemble(TimeMode::Continuous, layout, blocks)
}
