//! Multi-step generation sequences: single-qubit gate, `omega_q` retuning
//! schedule and per-step evolution for the three entangled-state targets.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::dynamics::{
    evolve_closed, evolve_effective_two_level, evolve_lindblad, fidelity, population, DecoherenceRates,
    LindbladDiagnostics, LindbladOptions, Propagator, State, TimeGrid, Trajectory,
};
use crate::error::{Error, Result};
use crate::fock::{BareLabel, CMatrix, CVector, DensityMatrix, OperatorMatrix, StateVector, Truncation, C64};
use crate::hamiltonian::{build_full, SystemParams};
use crate::perturbation::ResonantPair;
use crate::spectral::{bare_resonance, frame_levels, locate_crossing};
use crate::table::{params_meta, rates_meta, Cell, Table};

/// Couplings below this fraction of the reference frequency never complete a swap.
const MIN_COUPLING_REL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    /// Photon-magnon Bell state `(|g00> + e^{i phi}|g11>)/sqrt2`.
    BellPhotonMagnon,
    /// Qubit-photon-magnon GHZ state `(|g00> + e^{i phi}|e11>)/sqrt2`.
    Ghz,
    /// Qubit-magnon Bell state `(|g00> + e^{i phi}|e01>)/sqrt2`.
    BellQubitMagnon,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] = [ProtocolKind::BellPhotonMagnon, ProtocolKind::Ghz, ProtocolKind::BellQubitMagnon];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::BellPhotonMagnon => "bell",
            ProtocolKind::Ghz => "ghz",
            ProtocolKind::BellQubitMagnon => "qubit-magnon",
        }
    }

    /// Resonant swaps after the gate, in order.
    pub fn pairs(self) -> &'static [ResonantPair] {
        match self {
            ProtocolKind::BellPhotonMagnon => &[ResonantPair::Bell],
            ProtocolKind::Ghz => &[ResonantPair::TwoPhoton, ResonantPair::Ghz],
            ProtocolKind::BellQubitMagnon => &[ResonantPair::SinglePhoton, ResonantPair::QubitMagnon],
        }
    }

    pub fn gate(self, phi: f64) -> QubitGate {
        match self {
            ProtocolKind::BellPhotonMagnon => QubitGate::Bell(phi),
            ProtocolKind::Ghz | ProtocolKind::BellQubitMagnon => QubitGate::Ghz(phi),
        }
    }

    /// Excited component of the target.
    pub fn target_label(self) -> BareLabel {
        match self {
            ProtocolKind::BellPhotonMagnon => BareLabel::g(1, 1),
            ProtocolKind::Ghz => BareLabel::e(1, 1),
            ProtocolKind::BellQubitMagnon => BareLabel::e(0, 1),
        }
    }

    pub fn default_params(self) -> SystemParams {
        match self {
            ProtocolKind::BellPhotonMagnon => SystemParams::bell_default(),
            ProtocolKind::Ghz | ProtocolKind::BellQubitMagnon => SystemParams::ghz_default(),
        }
    }

    /// The qubit-magnon single-photon swap has no perturbative shift, so its
    /// timing comes from the numeric crossing.
    pub fn default_timing(self) -> TimingSource {
        match self {
            ProtocolKind::BellQubitMagnon => TimingSource::NumericCrossing,
            _ => TimingSource::ClosedForm,
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProtocolKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown workflow '{s}' (bell, ghz, qubit-magnon)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TimingSource {
    ClosedForm,
    NumericCrossing,
}

impl TimingSource {
    pub fn name(self) -> &'static str {
        match self {
            TimingSource::ClosedForm => "closed",
            TimingSource::NumericCrossing => "numeric",
        }
    }

    pub fn other(self) -> TimingSource {
        match self {
            TimingSource::ClosedForm => TimingSource::NumericCrossing,
            TimingSource::NumericCrossing => TimingSource::ClosedForm,
        }
    }
}

impl FromStr for TimingSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" | "closed_form" | "closed-form" => Ok(TimingSource::ClosedForm),
            "numeric" | "numeric_crossing" | "numeric-crossing" => Ok(TimingSource::NumericCrossing),
            _ => Err(Error::InvalidParameter(format!("unknown timing source '{s}' (closed, numeric)"))),
        }
    }
}

/// How `omega_q` moves between schedule values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Switching {
    Sudden,
    /// Piecewise-constant linear ramp lasting `duration` before every swap.
    LinearRamp { duration: f64 },
}

impl fmt::Display for Switching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Switching::Sudden => f.write_str("sudden"),
            Switching::LinearRamp { duration } => write!(f, "ramp:{duration}"),
        }
    }
}

impl FromStr for Switching {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "sudden" {
            return Ok(Switching::Sudden);
        }
        let bad = || Error::InvalidParameter(format!("unknown switching '{s}' (sudden, ramp:<duration>)"));
        let d = s.strip_prefix("ramp:").ok_or_else(bad)?;
        let duration: f64 = d.parse().map_err(|_| bad())?;
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidParameter(format!("ramp duration must be positive, got {duration}")));
        }
        Ok(Switching::LinearRamp { duration })
    }
}

/// Which model propagates each swap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Propagation {
    /// Full Hamiltonian, closed or Lindblad.
    Full,
    /// Exact two-level rotation on each pair; closed system only.
    Effective,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QubitGate {
    /// `|g> -> (|g> + i e^{i phi}|e>)/sqrt2`.
    Bell(f64),
    /// `|g> -> (|g> - e^{i phi}|e>)/sqrt2`.
    Ghz(f64),
}

impl QubitGate {
    /// 2x2 matrix in the `(g, e)` basis.
    pub fn matrix(self) -> [[C64; 2]; 2] {
        let s = C64::new(FRAC_1_SQRT_2, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            QubitGate::Bell(phi) => {
                let e = C64::from_polar(1.0, phi);
                [[s * one, s * i * e.conj()], [s * i * e, s * one]]
            }
            QubitGate::Ghz(phi) => {
                let e = C64::from_polar(1.0, phi);
                [[s * one, s * e.conj()], [-s * e, s * one]]
            }
        }
    }
}

/// The gate on the full space, identity on the photon and magnon factors.
pub fn gate_unitary(gate: QubitGate, trunc: Truncation) -> OperatorMatrix {
    let q = gate.matrix();
    let modes = trunc.dim() / 2;
    let mut u = CMatrix::zeros(trunc.dim(), trunc.dim());
    for k in 0..modes {
        for (r, row) in q.iter().enumerate() {
            for (c, &z) in row.iter().enumerate() {
                u[(r * modes + k, c * modes + k)] = z;
            }
        }
    }
    OperatorMatrix::new(trunc, u).expect("dimension matches truncation")
}

/// `U psi` or `U rho U^dag`.
pub fn apply_qubit_gate(state: &State, gate: QubitGate) -> State {
    let u = gate_unitary(gate, state.truncation());
    match state {
        State::Pure(s) => State::Pure(StateVector::from_raw(s.truncation(), u.matrix() * s.amplitudes())),
        State::Mixed(r) => {
            let m = u.matrix() * r.matrix() * u.matrix().adjoint();
            State::Mixed(DensityMatrix::from_raw(r.truncation(), m))
        }
    }
}

/// Bare-basis target `(|g00> + e^{i phi}|x>)/sqrt2`.
pub fn ideal_target(kind: ProtocolKind, phi: f64, trunc: Truncation) -> Result<StateVector> {
    StateVector::superposition(
        trunc,
        &[(BareLabel::g(0, 0), C64::new(1.0, 0.0)), (kind.target_label(), C64::from_polar(1.0, phi))],
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    /// `omega_q` is ignored; the schedule sets it.
    pub params: SystemParams,
    pub rates: DecoherenceRates,
    pub phi: f64,
    pub timing: TimingSource,
    pub switching: Switching,
    pub propagation: Propagation,
    /// Records per swap, endpoints included.
    pub samples_per_step: usize,
    /// Constant segments per ramp.
    pub ramp_segments: usize,
    /// Parking `omega_q` as a multiple of the largest mode frequency.
    pub parking_factor: f64,
    /// Defaults to [`LindbladOptions::for_reference`].
    pub integrator: Option<LindbladOptions>,
}

impl ProtocolSpec {
    pub fn new(kind: ProtocolKind) -> Self {
        ProtocolSpec {
            kind,
            params: kind.default_params(),
            rates: DecoherenceRates::zero(),
            phi: 0.0,
            timing: kind.default_timing(),
            switching: Switching::Sudden,
            propagation: Propagation::Full,
            samples_per_step: 101,
            ramp_segments: 16,
            parking_factor: 5.0,
            integrator: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.rates.validate()?;
        if !(self.phi.is_finite() && (0.0..2.0 * PI).contains(&self.phi)) {
            return Err(Error::InvalidParameter(format!("phi must lie in [0, 2 pi), got {}", self.phi)));
        }
        if self.samples_per_step < 2 {
            return Err(Error::InvalidParameter("samples_per_step must be at least 2".into()));
        }
        if self.ramp_segments == 0 {
            return Err(Error::InvalidParameter("ramp_segments must be positive".into()));
        }
        if !(self.parking_factor.is_finite() && self.parking_factor > 1.0) {
            return Err(Error::InvalidParameter(format!("parking factor must exceed 1, got {}", self.parking_factor)));
        }
        if self.propagation == Propagation::Effective && !self.rates.is_zero() {
            return Err(Error::InvalidParameter("effective propagation is closed-system only".into()));
        }
        Ok(())
    }

    pub fn parking_omega_q(&self) -> f64 {
        self.parking_factor * self.params.omega_a.max(self.params.omega_m)
    }

    fn lindblad_options(&self) -> LindbladOptions {
        self.integrator.unwrap_or_else(|| LindbladOptions::for_reference(self.params.reference_frequency()))
    }
}

/// Operating point and signed coupling of one swap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepTiming {
    pub source: TimingSource,
    pub omega_q: f64,
    /// `omega_q` minus the bare resonance.
    pub delta: f64,
    pub g_eff: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduledStep {
    pub pair: ResonantPair,
    pub timing: StepTiming,
    /// The other timing source at the same parameters, when it succeeds.
    pub alternative: Option<StepTiming>,
    /// `pi / (2 |g_eff|)`.
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub parking_omega_q: f64,
    pub steps: Vec<ScheduledStep>,
}

pub fn step_timing(params: &SystemParams, pair: ResonantPair, source: TimingSource) -> Result<StepTiming> {
    let labels = pair.labels();
    let w0 = bare_resonance(params, labels)?;
    let at_bare = params.with_omega_q(w0);
    match source {
        TimingSource::ClosedForm => {
            let r = pair.closed_form(&at_bare)?;
            Ok(StepTiming { source, omega_q: w0 + r.delta, delta: r.delta, g_eff: r.g_eff })
        }
        TimingSource::NumericCrossing => {
            let c = locate_crossing(&at_bare, labels)?;
            Ok(StepTiming { source, omega_q: c.omega_q_star, delta: c.delta_numeric, g_eff: c.signed_g_eff() })
        }
    }
}

/// Operating points and swap durations; protocol step numbers start at 2.
pub fn build_schedule(spec: &ProtocolSpec) -> Result<Schedule> {
    spec.validate()?;
    let floor = MIN_COUPLING_REL * spec.params.reference_frequency();
    let mut steps = Vec::new();
    for (k, &pair) in spec.kind.pairs().iter().enumerate() {
        let timing = step_timing(&spec.params, pair, spec.timing)?;
        if !(timing.g_eff.abs() > floor) {
            return Err(Error::UnreachableTarget { step: k + 2 });
        }
        let alternative = step_timing(&spec.params, pair, spec.timing.other()).ok();
        steps.push(ScheduledStep { pair, timing, alternative, duration: PI / (2.0 * timing.g_eff.abs()) });
    }
    Ok(Schedule { parking_omega_q: spec.parking_omega_q(), steps })
}

#[derive(Clone, Debug)]
pub struct ProtocolResult {
    pub spec: ProtocolSpec,
    pub schedule: Schedule,
    /// State right after the gate.
    pub initial_state: StateVector,
    /// One trajectory per swap on a global clock, with series `F` and the
    /// populations of `g00`, both pair labels and the target label.
    pub steps: Vec<Trajectory>,
    /// One trajectory per ramp; empty for sudden switching.
    pub ramps: Vec<Trajectory>,
    pub final_state: State,
    /// Bare-basis target.
    pub target: StateVector,
    /// Target carrying the dressed phases accumulated up to the final time.
    pub frame_target: StateVector,
    pub final_fidelity: f64,
    pub diagnostics: Option<LindbladDiagnostics>,
}

impl ProtocolResult {
    pub fn total_time(&self) -> f64 {
        self.steps.last().and_then(|t| t.times.last().copied()).unwrap_or(0.0)
    }

    /// Metadata header plus one row per record: segment, time, fidelity and
    /// the populations of `g00` and the target label.
    pub fn to_table(&self) -> Result<Table> {
        let spec = &self.spec;
        let target = spec.kind.target_label();
        let mut t = Table::new(["segment".to_string(), "t".into(), "F".into(), "P_g00".into(), format!("P_{target}")]);
        t.meta("dataset", format!("{} protocol fidelity dynamics", spec.kind));
        params_meta(&mut t, &spec.params);
        rates_meta(&mut t, &spec.rates);
        t.meta_float("phi", spec.phi)
            .meta("timing", spec.timing.name())
            .meta("switching", spec.switching)
            .meta("propagation", format!("{:?}", spec.propagation).to_lowercase())
            .meta_float("parking_omega_q", self.schedule.parking_omega_q);
        for (k, s) in self.schedule.steps.iter().enumerate() {
            let n = k + 2;
            t.meta(format!("step{n}_pair"), s.pair.name())
                .meta_float(format!("step{n}_omega_q"), s.timing.omega_q)
                .meta_float(format!("step{n}_delta"), s.timing.delta)
                .meta_float(format!("step{n}_g_eff"), s.timing.g_eff)
                .meta_float(format!("step{n}_duration"), s.duration);
            if let Some(a) = s.alternative {
                t.meta_float(format!("step{n}_{}_delta", a.source.name()), a.delta)
                    .meta_float(format!("step{n}_{}_g_eff", a.source.name()), a.g_eff);
            }
        }
        t.meta_float("final_fidelity", self.final_fidelity);
        let named = self.ramps.iter().enumerate().map(|(k, r)| (format!("ramp{}", k + 2), r));
        let mut all: Vec<(String, &Trajectory)> =
            named.chain(self.steps.iter().enumerate().map(|(k, r)| (format!("step{}", k + 2), r))).collect();
        all.sort_by(|a, b| a.1.times[0].total_cmp(&b.1.times[0]));
        for (name, traj) in all {
            let f = traj.series("F").unwrap_or(&[]);
            for (i, (&time, state)) in traj.times.iter().zip(&traj.states).enumerate() {
                t.push(vec![
                    Cell::Text(name.clone()),
                    time.into(),
                    f.get(i).copied().unwrap_or(f64::NAN).into(),
                    population(state, BareLabel::g(0, 0))?.into(),
                    population(state, target)?.into(),
                ])?;
            }
        }
        Ok(t)
    }

    /// `(t, F)` over ramps and swaps in time order.
    pub fn fidelity_trace(&self) -> Vec<(f64, f64)> {
        let mut all: Vec<&Trajectory> = self.ramps.iter().chain(&self.steps).collect();
        all.sort_by(|a, b| a.times[0].total_cmp(&b.times[0]));
        all.iter()
            .flat_map(|t| t.times.iter().copied().zip(t.series("F").unwrap_or(&[]).iter().copied()))
            .collect()
    }
}

/// Phases of the two target branches in the frame of the dressed levels.
#[derive(Clone, Copy, Debug)]
struct Frame {
    ground: f64,
    excited: f64,
    sign: f64,
}

impl Frame {
    fn target(&self, kind: ProtocolKind, phi: f64, trunc: Truncation) -> Result<StateVector> {
        let mut v = CVector::zeros(trunc.dim());
        v[trunc.index(BareLabel::g(0, 0))?] = C64::from_polar(FRAC_1_SQRT_2, -self.ground);
        v[trunc.index(kind.target_label())?] = C64::from_polar(self.sign * FRAC_1_SQRT_2, phi - self.excited);
        Ok(StateVector::from_raw(trunc, v))
    }
}

struct Runner<'a> {
    spec: &'a ProtocolSpec,
    trunc: Truncation,
    frame: Frame,
    clock: f64,
    state: State,
    diagnostics: Option<LindbladDiagnostics>,
}

impl Runner<'_> {
    fn evolve(&mut self, omega_q: f64, duration: f64, samples: usize, effective: Option<(f64, ResonantPair)>) -> Result<Trajectory> {
        let grid = TimeGrid::new(self.clock, self.clock + duration, samples)?;
        let traj = match (effective, &self.state) {
            (Some((g, pair)), State::Pure(psi)) => evolve_effective_two_level(g, pair.labels(), psi, &grid)?,
            (Some(_), State::Mixed(_)) => unreachable!("effective propagation starts from a pure state"),
            (None, state) => {
                let h = build_full(&self.spec.params.with_omega_q(omega_q))?;
                match state {
                    State::Pure(psi) if self.spec.rates.is_zero() => evolve_closed(&h, psi, &grid)?,
                    _ => {
                        let rho = self.state.to_density();
                        let t = evolve_lindblad(&h, &self.spec.rates, &rho, &grid, &self.spec.lindblad_options())?;
                        let d = t.diagnostics.expect("open-system runs carry diagnostics");
                        self.diagnostics = Some(self.diagnostics.map_or(d, |acc| acc.merge(&d)));
                        t
                    }
                }
            }
        };
        self.state = traj.last_state().expect("grid has at least two points").clone();
        self.clock = grid.t1();
        Ok(traj)
    }

    fn annotate(&self, mut traj: Trajectory, start: Frame, rates: (f64, f64), labels: &[BareLabel]) -> Result<Trajectory> {
        let t0 = traj.times[0];
        let f = traj
            .times
            .iter()
            .zip(&traj.states)
            .map(|(&t, s)| {
                let frame = Frame {
                    ground: start.ground + rates.0 * (t - t0),
                    excited: start.excited + rates.1 * (t - t0),
                    sign: start.sign,
                };
                fidelity(s, &frame.target(self.spec.kind, self.spec.phi, self.trunc)?).map(|x| x.clamp(0.0, 1.0))
            })
            .collect::<Result<Vec<_>>>()?;
        traj.series.push(("F".into(), f));
        for &l in labels {
            traj = traj.with_population(l)?;
        }
        Ok(traj)
    }

    fn ramp(&mut self, from: f64, to: f64, duration: f64, source: BareLabel, pair: ResonantPair) -> Result<Trajectory> {
        let n = self.spec.ramp_segments;
        let dt = duration / n as f64;
        let mut times = vec![self.clock];
        let mut states = vec![self.state.clone()];
        let mut frames = vec![self.frame];
        for k in 0..n {
            let w = from + (to - from) * (k as f64 + 0.5) / n as f64;
            let levels = frame_levels(&self.spec.params.with_omega_q(w), (source, pair.labels().1))?;
            self.evolve(w, dt, 2, None)?;
            self.frame.ground += levels.ground * dt;
            self.frame.excited += levels.source * dt;
            times.push(self.clock);
            states.push(self.state.clone());
            frames.push(self.frame);
        }
        let f = states
            .iter()
            .zip(&frames)
            .map(|(s, fr)| fidelity(s, &fr.target(self.spec.kind, self.spec.phi, self.trunc)?).map(|x| x.clamp(0.0, 1.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory { times, states, series: vec![("F".into(), f)], diagnostics: None })
    }
}

/// Runs any protocol kind.
pub fn run_protocol(spec: &ProtocolSpec) -> Result<ProtocolResult> {
    let schedule = build_schedule(spec)?;
    let trunc = spec.params.trunc;
    let kind = spec.kind;
    let ground = State::Pure(StateVector::basis(trunc, BareLabel::g(0, 0))?);
    let State::Pure(initial) = apply_qubit_gate(&ground, kind.gate(spec.phi)) else { unreachable!() };
    let state = if spec.rates.is_zero() { State::Pure(initial.clone()) } else { State::Mixed(initial.to_density()) };
    let mut run = Runner {
        spec,
        trunc,
        frame: Frame { ground: 0.0, excited: 0.0, sign: 1.0 },
        clock: 0.0,
        state,
        diagnostics: None,
    };

    let mut steps = Vec::new();
    let mut ramps = Vec::new();
    let mut omega_prev = schedule.parking_omega_q;
    for s in &schedule.steps {
        let labels = s.pair.labels();
        if let (Switching::LinearRamp { duration }, Propagation::Full) = (spec.switching, spec.propagation) {
            ramps.push(run.ramp(omega_prev, s.timing.omega_q, duration, labels.0, s.pair)?);
        }
        let start = Frame { sign: run.frame.sign * s.timing.g_eff.signum(), ..run.frame };
        let (traj, rates) = match spec.propagation {
            Propagation::Effective => {
                (run.evolve(s.timing.omega_q, s.duration, spec.samples_per_step, Some((s.timing.g_eff, s.pair)))?, (0.0, 0.0))
            }
            Propagation::Full => {
                let levels = frame_levels(&spec.params.with_omega_q(s.timing.omega_q), labels)?;
                (run.evolve(s.timing.omega_q, s.duration, spec.samples_per_step, None)?, (levels.ground, levels.pair_mean))
            }
        };
        let mut shown = vec![BareLabel::g(0, 0), labels.0, labels.1];
        if !shown.contains(&kind.target_label()) {
            shown.push(kind.target_label());
        }
        steps.push(run.annotate(traj, start, rates, &shown)?);
        run.frame = Frame {
            ground: start.ground + rates.0 * s.duration,
            excited: start.excited + rates.1 * s.duration,
            sign: start.sign,
        };
        omega_prev = s.timing.omega_q;
    }

    let frame_target = run.frame.target(kind, spec.phi, trunc)?;
    let final_fidelity = fidelity(&run.state, &frame_target)?.clamp(0.0, 1.0);
    Ok(ProtocolResult {
        spec: spec.clone(),
        schedule,
        initial_state: initial,
        steps,
        ramps,
        final_state: run.state,
        target: ideal_target(kind, spec.phi, trunc)?,
        frame_target,
        final_fidelity,
        diagnostics: run.diagnostics,
    })
}

fn require_kind(spec: &ProtocolSpec, kind: ProtocolKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidParameter(format!("expected a {kind} spec, got {}", spec.kind)));
    }
    Ok(())
}

pub fn run_bell_photon_magnon(spec: &ProtocolSpec) -> Result<ProtocolResult> {
    require_kind(spec, ProtocolKind::BellPhotonMagnon)?;
    run_protocol(spec)
}

pub fn run_ghz(spec: &ProtocolSpec) -> Result<ProtocolResult> {
    require_kind(spec, ProtocolKind::Ghz)?;
    run_protocol(spec)
}

pub fn run_bell_qubit_magnon(spec: &ProtocolSpec) -> Result<ProtocolResult> {
    require_kind(spec, ProtocolKind::BellQubitMagnon)?;
    run_protocol(spec)
}

/// Full-model and effective-model population of `pair.1` starting from `pair.0`.
#[derive(Clone, Debug, PartialEq)]
pub struct RabiTrace {
    pub pair: ResonantPair,
    pub timing: StepTiming,
    pub times: Vec<f64>,
    pub full: Vec<f64>,
    pub effective: Vec<f64>,
    /// Maximum of `full` over one population period `pi / |g_eff|`.
    pub p_max: f64,
    pub t_peak: f64,
    /// `t_peak / (pi / (2 |g_eff|)) - 1`.
    pub period_error: f64,
}

/// Samples one population period at spacing at most `dt`.
pub fn rabi_oscillation(params: &SystemParams, pair: ResonantPair, source: TimingSource, dt: f64) -> Result<RabiTrace> {
    params.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidGrid(format!("sample spacing must be positive, got {dt}")));
    }
    let timing = step_timing(params, pair, source)?;
    let g = timing.g_eff.abs();
    if !(g > MIN_COUPLING_REL * params.reference_frequency()) {
        return Err(Error::UnreachableTarget { step: 2 });
    }
    let period = PI / g;
    let n = (period / dt).ceil() as usize + 1;
    let grid = TimeGrid::new(0.0, period, n)?;
    let (from, to) = pair.labels();
    let h = build_full(&params.with_omega_q(timing.omega_q))?;
    let prop = Propagator::new(&h)?;
    let coeffs = prop.coefficients(&StateVector::basis(params.trunc, from)?)?;
    let times = grid.times();
    let full = times.iter().map(|&t| prop.amplitude_at(&coeffs, to, t).map(|a| a.norm_sqr())).collect::<Result<Vec<_>>>()?;
    let effective = times.iter().map(|&t| (g * t).sin().powi(2)).collect();
    let (k, p_max) = full.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
    let t_peak = times[k];
    Ok(RabiTrace { pair, timing, times, full, effective, p_max, t_peak, period_error: t_peak / (0.5 * period) - 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal(kind: ProtocolKind) -> ProtocolSpec {
        ProtocolSpec { samples_per_step: 11, ..ProtocolSpec::new(kind) }
    }

    #[test]
    fn gate_examples() {
        let t = Truncation::default();
        let g00 = State::Pure(StateVector::basis(t, BareLabel::g(0, 0)).unwrap());
        let State::Pure(b) = apply_qubit_gate(&g00, QubitGate::Bell(0.0)) else { panic!() };
        let s = FRAC_1_SQRT_2;
        assert!((b.amplitude(BareLabel::g(0, 0)).unwrap() - C64::new(s, 0.0)).norm() < 1e-15);
        assert!((b.amplitude(BareLabel::e(0, 0)).unwrap() - C64::new(0.0, s)).norm() < 1e-15);
        let State::Pure(g) = apply_qubit_gate(&g00, QubitGate::Ghz(0.0)) else { panic!() };
        assert!((g.amplitude(BareLabel::e(0, 0)).unwrap() - C64::new(-s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn gates_are_unitary() {
        let t = Truncation::default();
        for gate in [QubitGate::Bell(0.0), QubitGate::Bell(1.3), QubitGate::Ghz(0.0), QubitGate::Ghz(4.0)] {
            let u = gate_unitary(gate, t);
            let id = u.matrix().adjoint() * u.matrix();
            let dev = (id - CMatrix::identity(t.dim(), t.dim())).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(dev < 1e-14, "{gate:?}: {dev}");
        }
    }

    #[test]
    fn targets_are_normalized_superpositions() {
        let t = Truncation::default();
        for kind in ProtocolKind::ALL {
            let v = ideal_target(kind, 0.0, t).unwrap();
            assert!((v.population(BareLabel::g(0, 0)).unwrap() - 0.5).abs() < 1e-15);
            assert!((v.population(kind.target_label()).unwrap() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn effective_propagation_reaches_target_exactly() {
        for kind in ProtocolKind::ALL {
            for phi in [0.0, 2.0] {
                let spec = ProtocolSpec { propagation: Propagation::Effective, phi, ..ideal(kind) };
                let r = run_protocol(&spec).unwrap();
                assert!((r.final_fidelity - 1.0).abs() < 1e-12, "{kind}: {}", r.final_fidelity);
            }
        }
    }

    #[test]
    fn bell_ideal_fidelity_near_reference() {
        let r = run_bell_photon_magnon(&ideal(ProtocolKind::BellPhotonMagnon)).unwrap();
        assert!((r.final_fidelity - 0.93).abs() < 0.03, "{}", r.final_fidelity);
        let trace = r.fidelity_trace();
        assert_eq!(trace.len(), 11);
        assert!((trace.last().unwrap().1 - r.final_fidelity).abs() < 1e-12);
    }

    #[test]
    fn numeric_and_closed_signs_agree() {
        for kind in ProtocolKind::ALL {
            for s in build_schedule(&ideal(kind)).unwrap().steps {
                let alt = s.alternative.expect("both timing sources succeed at defaults");
                assert_eq!(s.timing.g_eff.signum(), alt.g_eff.signum(), "{:?}", s.pair);
            }
        }
    }

    #[test]
    fn zero_magnon_coupling_is_unreachable() {
        let mut spec = ideal(ProtocolKind::BellQubitMagnon);
        spec.params.g = 0.0;
        assert_eq!(run_protocol(&spec).unwrap_err(), Error::UnreachableTarget { step: 3 });
        spec.timing = TimingSource::ClosedForm;
        assert_eq!(run_protocol(&spec).unwrap_err(), Error::UnreachableTarget { step: 3 });
    }

    #[test]
    fn wrong_kind_rejected() {
        assert!(run_ghz(&ideal(ProtocolKind::BellPhotonMagnon)).is_err());
    }

    #[test]
    fn phi_range_checked() {
        let spec = ProtocolSpec { phi: 2.0 * PI, ..ideal(ProtocolKind::Ghz) };
        assert!(matches!(spec.validate(), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn switching_parses() {
        assert_eq!("sudden".parse::<Switching>().unwrap(), Switching::Sudden);
        assert_eq!("ramp:2.5".parse::<Switching>().unwrap(), Switching::LinearRamp { duration: 2.5 });
        assert!("ramp:-1".parse::<Switching>().is_err());
        assert!("slow".parse::<Switching>().is_err());
    }

    #[test]
    fn effective_rabi_peaks_at_half_period() {
        let r = rabi_oscillation(&SystemParams::bell_default(), ResonantPair::Bell, TimingSource::ClosedForm, 0.05).unwrap();
        let peak = r.effective.iter().copied().fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-6);
        assert!((r.p_max - 0.88).abs() < 0.03, "{}", r.p_max);
    }
}
