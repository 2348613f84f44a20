//! Trajectory sampling straight from the model's component distributions.

use mmap_rel::{EconomicParameters, EventKind, EventLabel, MacroState, Matrix, Model, TimeMode};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Cumulative weights; the last entry is the total.
#[derive(Debug, Clone)]
struct Choice {
    cum: Vec<f64>,
}

impl Choice {
    fn new(weights: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let cum = weights
            .into_iter()
            .map(|w| {
                acc += w.max(0.0);
                acc
            })
            .collect();
        Self { cum }
    }

    fn total(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> usize {
        let x = rng.random::<f64>() * self.total();
        match self.cum.iter().position(|&c| x < c) {
            Some(k) => k,
            // rounding put x on the total: take the last entry with positive weight
            None => (0..self.cum.len())
                .rev()
                .find(|&k| self.cum[k] > if k == 0 { 0.0 } else { self.cum[k - 1] })
                .unwrap_or(0),
        }
    }
}

/// A transient phase process: per row, the total rate (continuous) or 1
/// (discrete) and a choice over `[other phases..., exits...]`.
#[derive(Debug, Clone)]
struct Rows {
    rate: Vec<f64>,
    next: Vec<Choice>,
    n: usize,
}

impl Rows {
    /// Continuous: moves to `j ≠ i` with rate `a[i][j]` or leave through each exit.
    fn continuous(a: &Matrix<f64>, exits: &[Vec<f64>]) -> Self {
        let n = a.rows();
        let mut rate = Vec::with_capacity(n);
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let w: Vec<f64> = (0..n)
                .map(|j| if i == j { 0.0 } else { a[(i, j)] })
                .chain(exits.iter().map(|e| e[i]))
                .collect();
            let c = Choice::new(w);
            rate.push(c.total());
            next.push(c);
        }
        Self { rate, next, n }
    }

    /// Discrete: one draw per period over `[phases..., exits...]`, staying included.
    fn discrete(a: &Matrix<f64>, exits: &[Vec<f64>]) -> Self {
        let n = a.rows();
        let next: Vec<Choice> = (0..n)
            .map(|i| Choice::new(a.row(i).iter().copied().chain(exits.iter().map(|e| e[i]))))
            .collect();
        Self {
            rate: vec![1.0; n],
            next,
            n,
        }
    }

    fn draw(&self, i: usize, rng: &mut ChaCha8Rng) -> Step {
        let k = self.next[i].pick(rng);
        if k < self.n {
            Step::To(k)
        } else {
            Step::Exit(k - self.n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Step {
    To(usize),
    Exit(usize),
}

fn exit_continuous(a: &Matrix<f64>) -> Vec<f64> {
    a.row_sums().into_iter().map(|s| -s).collect()
}

fn exit_discrete(a: &Matrix<f64>) -> Vec<f64> {
    a.row_sums().into_iter().map(|s| 1.0 - s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum State {
    OpVacation { i: usize, j: usize, u: usize, r: usize },
    OpPresent { i: usize, j: usize, u: usize },
    Rf { j: usize, r: usize },
    Nrf { j: usize, r: usize },
    Cr { j: usize, a: usize },
    Pm { j: usize, a: usize },
}

impl State {
    fn macro_state(&self) -> MacroState {
        match self {
            State::OpVacation { .. } => MacroState::OperationalVacation,
            State::OpPresent { .. } => MacroState::OperationalPresent,
            State::Rf { .. } => MacroState::RepairableFailure,
            State::Nrf { .. } => MacroState::NonRepairableFailure,
            State::Cr { .. } => MacroState::CorrectiveRepair,
            State::Pm { .. } => MacroState::PreventiveMaintenance,
        }
    }
}

/// Result of wear plus shock for an operating unit.
#[derive(Debug, Clone, Copy)]
enum Fate {
    Up { i: usize, u: usize },
    Rf,
    Nrf,
}

pub(crate) struct Prepared {
    mode: TimeMode,
    critical_from: usize,
    level_of: Vec<usize>,
    p: Vec<f64>,
    wear: Rows,
    clock: Rows,
    vacation: Rows,
    repair: Rows,
    maintenance: Rows,
    /// Shock consequence on the wear phase: `[W row..., W_r0, W_nr0]`.
    modify: Vec<Choice>,
    /// Damage step: `[C row..., C0]`.
    damage: Vec<Choice>,
    omega0: f64,
    alpha: Choice,
    gamma: Choice,
    omega: Choice,
    nu: Choice,
    beta1: Choice,
    beta2: Choice,
    m: usize,
    d: usize,
    reward: Option<Reward>,
}

/// Per-state reward rates and per-event charges.
struct Reward {
    benefit_vacation: f64,
    benefit_present: f64,
    level: Vec<f64>,
    damage: Vec<f64>,
    down: f64,
    service: f64,
    repair: Vec<f64>,
    pm: Vec<f64>,
    unit: f64,
    fixed_cr: f64,
    fixed_pm: f64,
    ret: f64,
}

impl Reward {
    fn new(e: &EconomicParameters) -> Self {
        Self {
            benefit_vacation: e.gross_benefit - e.vacation_cost,
            benefit_present: e.gross_benefit - e.presence_cost,
            level: e.level_costs.clone(),
            damage: e.damage_costs.clone(),
            down: -(e.downtime_cost + e.vacation_cost),
            service: -(e.downtime_cost + e.presence_cost),
            repair: e.repair_phase_costs.clone(),
            pm: e.pm_phase_costs.clone(),
            unit: e.unit_cost,
            fixed_cr: e.fixed_cr,
            fixed_pm: e.fixed_pm,
            ret: e.return_cost,
        }
    }

    fn rate(&self, s: &State) -> f64 {
        match *s {
            State::OpVacation { i, u, .. } => self.benefit_vacation - self.level[i] - self.damage[u],
            State::OpPresent { i, u, .. } => self.benefit_present - self.level[i] - self.damage[u],
            State::Rf { .. } | State::Nrf { .. } => self.down,
            State::Cr { a, .. } => self.service - self.repair[a],
            State::Pm { a, .. } => self.service - self.pm[a],
        }
    }

    /// Fixed charges incurred by an event.
    fn charge(&self, label: EventLabel) -> f64 {
        [
            (EventKind::NewUnit, self.unit),
            (EventKind::CorrectiveRepair, self.fixed_cr),
            (EventKind::PreventiveMaintenance, self.fixed_pm),
            (EventKind::Return, self.ret),
        ]
        .into_iter()
        .filter(|(kind, _)| kind.labels().contains(&label))
        .map(|(_, cost)| cost)
        .sum()
    }
}

impl Prepared {
    pub(crate) fn new(model: &Model, econ: Option<&EconomicParameters>) -> Self {
        let mode = model.time_mode;
        let (wear, sh, fac) = (&model.wear, &model.shocks, &model.facility);
        let (build, exit): (fn(&Matrix<f64>, &[Vec<f64>]) -> Rows, fn(&Matrix<f64>) -> Vec<f64>) = match mode {
            TimeMode::Continuous => (Rows::continuous, exit_continuous),
            TimeMode::Discrete => (Rows::discrete, exit_discrete),
        };
        let mut level_of = Vec::new();
        for (k, &n) in wear.levels.iter().enumerate() {
            level_of.extend(std::iter::repeat(k).take(n));
        }
        let m = wear.t.rows();
        let d = sh.c.rows();
        let modify = (0..m)
            .map(|i| Choice::new(sh.w.row(i).iter().copied().chain([sh.w_r0[i], sh.w_nr0[i]])))
            .collect();
        let c0 = exit_discrete(&sh.c);
        let damage = (0..d)
            .map(|u| Choice::new(sh.c.row(u).iter().copied().chain([c0[u]])))
            .collect();
        Self {
            mode,
            critical_from: m - wear.levels.last().copied().unwrap_or(0),
            level_of,
            p: fac.p.clone(),
            wear: build(&wear.t, &[wear.t_r0.clone(), wear.t_nr0.clone()]),
            clock: build(&sh.l, &[exit(&sh.l)]),
            vacation: build(&fac.v, &[exit(&fac.v)]),
            repair: build(&fac.s1, &[exit(&fac.s1)]),
            maintenance: build(&fac.s2, &[exit(&fac.s2)]),
            modify,
            damage,
            omega0: sh.omega0,
            alpha: Choice::new(wear.alpha.iter().copied()),
            gamma: Choice::new(sh.gamma.iter().copied()),
            omega: Choice::new(sh.omega.iter().copied()),
            nu: Choice::new(fac.nu.iter().copied()),
            beta1: Choice::new(fac.beta1.iter().copied()),
            beta2: Choice::new(fac.beta2.iter().copied()),
            m,
            d,
            reward: econ.map(Reward::new),
        }
    }

    fn critical(&self, i: usize) -> bool {
        i >= self.critical_from
    }

    /// New (or as-good-as-new) unit with the repairperson leaving on vacation.
    fn fresh(&self, j: usize, rng: &mut ChaCha8Rng) -> State {
        State::OpVacation {
            i: self.alpha.pick(rng),
            j,
            u: self.omega.pick(rng),
            r: self.nu.pick(rng),
        }
    }

    pub(crate) fn initial(&self, rng: &mut ChaCha8Rng) -> State {
        let j = self.gamma.pick(rng);
        self.fresh(j, rng)
    }

    /// Consequence of a shock on an operating unit in wear phase `i`
    /// (`None` when the wear process already failed the unit this period).
    fn shock(&self, wear: Fate, u: usize, rng: &mut ChaCha8Rng) -> Fate {
        if rng.random::<f64>() < self.omega0 {
            return Fate::Nrf;
        }
        let k = self.damage[u].pick(rng);
        if k == self.d {
            return Fate::Nrf;
        }
        match wear {
            Fate::Up { i, .. } => {
                let w = self.modify[i].pick(rng);
                if w < self.m {
                    Fate::Up { i: w, u: k }
                } else if w == self.m {
                    Fate::Rf
                } else {
                    Fate::Nrf
                }
            }
            other => other,
        }
    }

    /// Where an observed operating unit goes once the repairperson is back
    /// and has decided to stay or leave, plus the event label.
    fn on_return(&self, i: usize, j: usize, u: usize, rng: &mut ChaCha8Rng) -> (State, EventLabel) {
        if self.critical(i) {
            return (
                State::Pm {
                    j,
                    a: self.beta2.pick(rng),
                },
                EventLabel::RPm,
            );
        }
        let k = self.level_of[i];
        if rng.random::<f64>() < self.p[k] {
            (
                State::OpVacation {
                    i,
                    j,
                    u,
                    r: self.nu.pick(rng),
                },
                EventLabel::RNvp,
            )
        } else {
            (State::OpPresent { i, j, u }, EventLabel::R)
        }
    }

    /// Operating with the repairperson present: the unit is watched.
    fn watched(&self, fate: Fate, j: usize, rng: &mut ChaCha8Rng) -> (State, EventLabel) {
        match fate {
            Fate::Up { i, .. } if self.critical(i) => (
                State::Pm {
                    j,
                    a: self.beta2.pick(rng),
                },
                EventLabel::Pm,
            ),
            Fate::Up { i, u } => (State::OpPresent { i, j, u }, EventLabel::O),
            Fate::Rf => (
                State::Cr {
                    j,
                    a: self.beta1.pick(rng),
                },
                EventLabel::RfCr,
            ),
            Fate::Nrf => (self.fresh(j, rng), EventLabel::NrfNu),
        }
    }

    fn clock_next(&self, j: usize, rng: &mut ChaCha8Rng) -> (usize, bool) {
        match self.clock.draw(j, rng) {
            Step::To(j2) => (j2, false),
            Step::Exit(_) => (self.gamma.pick(rng), true),
        }
    }

    /// Continuous time: one jump out of `s`, given which clock fired.
    fn jump(&self, s: State, rng: &mut ChaCha8Rng) -> (State, EventLabel) {
        use EventLabel as E;
        match s {
            State::OpVacation { i, j, u, r } => {
                let rates = [self.wear.rate[i], self.clock.rate[j], self.vacation.rate[r]];
                match Choice::new(rates).pick(rng) {
                    0 => match self.wear.draw(i, rng) {
                        Step::To(i2) => (State::OpVacation { i: i2, j, u, r }, E::O),
                        Step::Exit(0) => (State::Rf { j, r }, E::Rf),
                        Step::Exit(_) => (State::Nrf { j, r }, E::Nrf),
                    },
                    1 => match self.clock_next(j, rng) {
                        (j2, false) => (State::OpVacation { i, j: j2, u, r }, E::O),
                        (j2, true) => match self.shock(Fate::Up { i, u }, u, rng) {
                            Fate::Up { i: i2, u: u2 } => (State::OpVacation { i: i2, j: j2, u: u2, r }, E::O),
                            Fate::Rf => (State::Rf { j: j2, r }, E::Rf),
                            Fate::Nrf => (State::Nrf { j: j2, r }, E::Nrf),
                        },
                    },
                    _ => match self.vacation.draw(r, rng) {
                        Step::To(r2) => (State::OpVacation { i, j, u, r: r2 }, E::O),
                        Step::Exit(_) => self.on_return(i, j, u, rng),
                    },
                }
            }
            State::OpPresent { i, j, u } => {
                let rates = [self.wear.rate[i], self.clock.rate[j]];
                match Choice::new(rates).pick(rng) {
                    0 => {
                        let fate = match self.wear.draw(i, rng) {
                            Step::To(i2) => Fate::Up { i: i2, u },
                            Step::Exit(0) => Fate::Rf,
                            Step::Exit(_) => Fate::Nrf,
                        };
                        self.watched(fate, j, rng)
                    }
                    _ => match self.clock_next(j, rng) {
                        (j2, false) => (State::OpPresent { i, j: j2, u }, E::O),
                        (j2, true) => {
                            let fate = self.shock(Fate::Up { i, u }, u, rng);
                            self.watched(fate, j2, rng)
                        }
                    },
                }
            }
            State::Rf { j, r } | State::Nrf { j, r } => {
                let failed_rf = matches!(s, State::Rf { .. });
                let rates = [self.clock.rate[j], self.vacation.rate[r]];
                match Choice::new(rates).pick(rng) {
                    0 => {
                        let (j2, _) = self.clock_next(j, rng);
                        let next = if failed_rf { State::Rf { j: j2, r } } else { State::Nrf { j: j2, r } };
                        (next, E::O)
                    }
                    _ => match (self.vacation.draw(r, rng), failed_rf) {
                        (Step::To(r2), true) => (State::Rf { j, r: r2 }, E::O),
                        (Step::To(r2), false) => (State::Nrf { j, r: r2 }, E::O),
                        (Step::Exit(_), true) => (
                            State::Cr {
                                j,
                                a: self.beta1.pick(rng),
                            },
                            E::RCr,
                        ),
                        (Step::Exit(_), false) => (self.fresh(j, rng), E::RNu),
                    },
                }
            }
            State::Cr { j, a } | State::Pm { j, a } => {
                let is_cr = matches!(s, State::Cr { .. });
                let service = if is_cr { &self.repair } else { &self.maintenance };
                let rates = [self.clock.rate[j], service.rate[a]];
                match Choice::new(rates).pick(rng) {
                    0 => {
                        let (j2, _) = self.clock_next(j, rng);
                        let next = if is_cr { State::Cr { j: j2, a } } else { State::Pm { j: j2, a } };
                        (next, E::O)
                    }
                    _ => match service.draw(a, rng) {
                        Step::To(a2) => {
                            let next = if is_cr { State::Cr { j, a: a2 } } else { State::Pm { j, a: a2 } };
                            (next, E::O)
                        }
                        Step::Exit(_) => (self.fresh(j, rng), E::O),
                    },
                }
            }
        }
    }

    fn total_rate(&self, s: &State) -> f64 {
        match *s {
            State::OpVacation { i, j, r, .. } => self.wear.rate[i] + self.clock.rate[j] + self.vacation.rate[r],
            State::OpPresent { i, j, .. } => self.wear.rate[i] + self.clock.rate[j],
            State::Rf { j, r } | State::Nrf { j, r } => self.clock.rate[j] + self.vacation.rate[r],
            State::Cr { j, a } => self.clock.rate[j] + self.repair.rate[a],
            State::Pm { j, a } => self.clock.rate[j] + self.maintenance.rate[a],
        }
    }

    /// Discrete time: wear move, then shock, then the repairperson's clock.
    fn period(&self, s: State, rng: &mut ChaCha8Rng) -> (State, EventLabel) {
        use EventLabel as E;
        let operate = |i: usize, j: usize, u: usize, rng: &mut ChaCha8Rng| -> (Fate, usize) {
            let wear = match self.wear.draw(i, rng) {
                Step::To(i2) => Fate::Up { i: i2, u },
                Step::Exit(0) => Fate::Rf,
                Step::Exit(_) => Fate::Nrf,
            };
            let (j2, shocked) = self.clock_next(j, rng);
            let fate = if shocked { self.shock(wear, u, rng) } else { wear };
            (fate, j2)
        };
        match s {
            State::OpVacation { i, j, u, r } => {
                let (fate, j2) = operate(i, j, u, rng);
                match (fate, self.vacation.draw(r, rng)) {
                    (Fate::Up { i, u }, Step::To(r2)) => (State::OpVacation { i, j: j2, u, r: r2 }, E::O),
                    (Fate::Up { i, u }, Step::Exit(_)) => self.on_return(i, j2, u, rng),
                    (Fate::Rf, Step::To(r2)) => (State::Rf { j: j2, r: r2 }, E::Rf),
                    (Fate::Rf, Step::Exit(_)) => (
                        State::Cr {
                            j: j2,
                            a: self.beta1.pick(rng),
                        },
                        E::RRfCr,
                    ),
                    (Fate::Nrf, Step::To(r2)) => (State::Nrf { j: j2, r: r2 }, E::Nrf),
                    (Fate::Nrf, Step::Exit(_)) => (self.fresh(j2, rng), E::RNrfNu),
                }
            }
            State::OpPresent { i, j, u } => {
                let (fate, j2) = operate(i, j, u, rng);
                self.watched(fate, j2, rng)
            }
            State::Rf { j, r } | State::Nrf { j, r } => {
                let failed_rf = matches!(s, State::Rf { .. });
                let (j2, _) = self.clock_next(j, rng);
                match (self.vacation.draw(r, rng), failed_rf) {
                    (Step::To(r2), true) => (State::Rf { j: j2, r: r2 }, E::O),
                    (Step::To(r2), false) => (State::Nrf { j: j2, r: r2 }, E::O),
                    (Step::Exit(_), true) => (
                        State::Cr {
                            j: j2,
                            a: self.beta1.pick(rng),
                        },
                        E::RCr,
                    ),
                    (Step::Exit(_), false) => (self.fresh(j2, rng), E::RNu),
                }
            }
            State::Cr { j, a } | State::Pm { j, a } => {
                let is_cr = matches!(s, State::Cr { .. });
                let service = if is_cr { &self.repair } else { &self.maintenance };
                let (j2, _) = self.clock_next(j, rng);
                match service.draw(a, rng) {
                    Step::To(a2) => {
                        let next = if is_cr { State::Cr { j: j2, a: a2 } } else { State::Pm { j: j2, a: a2 } };
                        (next, E::O)
                    }
                    Step::Exit(_) => (self.fresh(j2, rng), E::O),
                }
            }
        }
    }

    /// One replication over `[0, horizon)`, accumulating statistics on
    /// `[warmup, horizon)`.
    pub(crate) fn run(&self, horizon: f64, warmup: f64, rng: &mut ChaCha8Rng) -> Tally {
        let mut tally = Tally::default();
        let mut s = self.initial(rng);
        match self.mode {
            TimeMode::Continuous => {
                let mut t = 0.0;
                loop {
                    let rate = self.total_rate(&s);
                    let dt = if rate > 0.0 {
                        -(1.0 - rng.random::<f64>()).ln() / rate
                    } else {
                        f64::INFINITY
                    };
                    let end = (t + dt).min(horizon);
                    let overlap = end - t.max(warmup);
                    if overlap > 0.0 {
                        tally.occupy(s.macro_state(), overlap, self.reward.as_ref().map(|r| r.rate(&s)));
                    }
                    if t + dt >= horizon {
                        break;
                    }
                    t += dt;
                    let (next, label) = self.jump(s, rng);
                    if t >= warmup {
                        tally.event(label, self.reward.as_ref().map(|r| r.charge(label)));
                    }
                    s = next;
                }
            }
            TimeMode::Discrete => {
                let periods = horizon as u64;
                let first = warmup as u64;
                for n in 0..periods {
                    let counted = n >= first;
                    if counted {
                        tally.occupy(s.macro_state(), 1.0, self.reward.as_ref().map(|r| r.rate(&s)));
                    }
                    let (next, label) = self.period(s, rng);
                    if counted {
                        tally.event(label, self.reward.as_ref().map(|r| r.charge(label)));
                    }
                    s = next;
                }
            }
        }
        tally
    }
}

/// Sufficient statistics of one replication.
#[derive(Debug, Clone, Default)]
pub(crate) struct Tally {
    pub occupancy: [f64; 6],
    pub labels: [u64; 13],
    pub reward: f64,
    pub charges: f64,
}

impl Tally {
    fn occupy(&mut self, s: MacroState, dt: f64, rate: Option<f64>) {
        self.occupancy[s.index()] += dt;
        if let Some(r) = rate {
            self.reward += r * dt;
        }
    }

    fn event(&mut self, label: EventLabel, charge: Option<f64>) {
        self.labels[label as usize] += 1;
        if let Some(c) = charge {
            self.charges += c;
        }
    }
}
