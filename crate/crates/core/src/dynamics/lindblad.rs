//! Dressed-operator Lindblad equation integrated in the energy eigenbasis.
//!
//! The coherent part `-i[H_diag, rho]` is applied exactly as elementwise
//! phases; the dissipator is integrated with an integrating-factor RK4 step.
//! Dressed lowering operators only move weight down the spectrum, so the
//! dynamics can be restricted to the lowest eigenstates that carry the
//! initial state without approximation beyond the discarded initial tail.

use nalgebra::DMatrix;

use super::{DecoherenceRates, State, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::fock::{embed_operator, CMatrix, DensityMatrix, OperatorKind, OperatorMatrix, C64};
use crate::linalg;

/// Relative level spacing below which the energy ordering is ill-defined.
const DEGENERACY_FLOOR: f64 = 1e-10;

/// Bare operator `o` whose dressed lowering part `O` enters as `L[O]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    Photon,
    Magnon,
    Qubit,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Photon, Channel::Magnon, Channel::Qubit];

    fn bare(self) -> OperatorKind {
        match self {
            Channel::Photon => OperatorKind::A,
            Channel::Magnon => OperatorKind::M,
            Channel::Qubit => OperatorKind::SigmaMinus,
        }
    }

    fn rate(self, r: &DecoherenceRates) -> f64 {
        match self {
            Channel::Photon => r.kappa_a,
            Channel::Magnon => r.kappa_m,
            Channel::Qubit => r.gamma,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LindbladOptions {
    /// Nominal integrator step; each output interval is split into equal steps no longer than this.
    pub step: f64,
    /// Initial population allowed above the energy window; `None` keeps the full space.
    pub tail_tolerance: Option<f64>,
    pub trace_tolerance: f64,
    /// Minimum eigenvalue below which a record triggers step halving.
    pub positivity_floor: f64,
    pub max_halvings: usize,
}

impl LindbladOptions {
    /// Default step in units of the inverse reference frequency.
    pub const STEP_PER_REFERENCE: f64 = 0.25;

    pub fn for_reference(omega_ref: f64) -> Self {
        LindbladOptions { step: Self::STEP_PER_REFERENCE / omega_ref, ..Self::default() }
    }
}

impl Default for LindbladOptions {
    fn default() -> Self {
        LindbladOptions {
            step: Self::STEP_PER_REFERENCE,
            tail_tolerance: Some(1e-9),
            trace_tolerance: 1e-8,
            positivity_floor: -1e-6,
            max_halvings: 6,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LindbladDiagnostics {
    /// Number of eigenstates kept.
    pub window_dim: usize,
    /// Initial population above the window.
    pub discarded_weight: f64,
    /// Step actually used.
    pub step: f64,
    pub halvings: usize,
    pub steps_taken: usize,
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
}

impl LindbladDiagnostics {
    /// Folds another run into a summary.
    pub fn merge(&self, other: &LindbladDiagnostics) -> LindbladDiagnostics {
        LindbladDiagnostics {
            window_dim: self.window_dim.max(other.window_dim),
            discarded_weight: self.discarded_weight.max(other.discarded_weight),
            step: if self.step == 0.0 { other.step } else { self.step.min(other.step) },
            halvings: self.halvings.max(other.halvings),
            steps_taken: self.steps_taken + other.steps_taken,
            max_trace_drift: self.max_trace_drift.max(other.max_trace_drift),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
        }
    }
}

fn check_nondegenerate(energies: &[f64]) -> Result<()> {
    let scale = (energies[energies.len() - 1] - energies[0]).abs().max(1.0);
    let min_gap = energies.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if min_gap < DEGENERACY_FLOOR * scale {
        return Err(Error::DegenerateSpectrum(min_gap / scale));
    }
    Ok(())
}

/// Strict upper triangle (ascending energy) of `U^dag (o + o^dag) U`.
fn lowering_in_eigenbasis(u: &CMatrix, channel: Channel, trunc: crate::fock::Truncation) -> CMatrix {
    let o = embed_operator(channel.bare(), trunc);
    let x = o.matrix() + o.matrix().adjoint();
    let mut xe = u.adjoint() * x * u;
    let n = xe.nrows();
    for c in 0..n {
        for r in c..n {
            xe[(r, c)] = C64::new(0.0, 0.0);
        }
    }
    xe
}

/// Dressed lowering operator in eigenbasis coordinates (ascending energies).
pub fn dressed_lowering_eigen(h: &OperatorMatrix, channel: Channel) -> Result<(Vec<f64>, CMatrix)> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian(linalg::hermitian_deviation(h.matrix())));
    }
    let (energies, u) = linalg::eigh(h.matrix())?;
    check_nondegenerate(&energies)?;
    let o = lowering_in_eigenbasis(&u, channel, h.truncation());
    Ok((energies, o))
}

/// `O = sum_{E_n > E_m} <E_m|(o + o^dag)|E_n> |E_m><E_n|` in the bare basis.
pub fn dressed_lowering(h: &OperatorMatrix, channel: Channel) -> Result<OperatorMatrix> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian(linalg::hermitian_deviation(h.matrix())));
    }
    let (energies, u) = linalg::eigh(h.matrix())?;
    check_nondegenerate(&energies)?;
    let o = lowering_in_eigenbasis(&u, channel, h.truncation());
    OperatorMatrix::new(h.truncation(), &u * o * u.adjoint())
}

/// Complex matrix stored as separate real and imaginary parts.
#[derive(Clone, Debug)]
struct Split {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

/// Operator with an optional imaginary part.
#[derive(Clone, Debug)]
struct Op {
    re: DMatrix<f64>,
    im: Option<DMatrix<f64>>,
}

impl Op {
    fn from_complex(m: &CMatrix) -> Self {
        let re = m.map(|z| z.re);
        let im = if m.iter().all(|z| z.im == 0.0) { None } else { Some(m.map(|z| z.im)) };
        Op { re, im }
    }

    fn adjoint(&self) -> Op {
        Op { re: self.re.transpose(), im: self.im.as_ref().map(|i| -i.transpose()) }
    }
}

impl Split {
    fn zeros(n: usize) -> Self {
        Split { re: DMatrix::zeros(n, n), im: DMatrix::zeros(n, n) }
    }

    fn from_complex(m: &CMatrix) -> Self {
        Split { re: m.map(|z| z.re), im: m.map(|z| z.im) }
    }

    fn to_complex(&self) -> CMatrix {
        self.re.zip_map(&self.im, C64::new)
    }

    /// `self = a + s * b`.
    fn set_axpy(&mut self, a: &Split, s: f64, b: &Split) {
        for (dst, (x, y)) in self.re.as_mut_slice().iter_mut().zip(a.re.as_slice().iter().zip(b.re.as_slice())) {
            *dst = x + s * y;
        }
        for (dst, (x, y)) in self.im.as_mut_slice().iter_mut().zip(a.im.as_slice().iter().zip(b.im.as_slice())) {
            *dst = x + s * y;
        }
    }

    /// `self = a * p` elementwise with `p = c + i s`.
    fn set_phased(&mut self, a: &Split, c: &DMatrix<f64>, s: &DMatrix<f64>) {
        let n = a.re.len();
        let (ar, ai) = (a.re.as_slice(), a.im.as_slice());
        let (cs, ss) = (c.as_slice(), s.as_slice());
        let re = self.re.as_mut_slice();
        for k in 0..n {
            re[k] = ar[k] * cs[k] - ai[k] * ss[k];
        }
        let im = self.im.as_mut_slice();
        for k in 0..n {
            im[k] = ar[k] * ss[k] + ai[k] * cs[k];
        }
    }

    fn trace(&self) -> f64 {
        self.re.trace()
    }

    /// Projects onto the Hermitian part.
    fn hermitize(&mut self) {
        let n = self.re.nrows();
        for c in 0..n {
            for r in c + 1..n {
                let a = 0.5 * (self.re[(r, c)] + self.re[(c, r)]);
                self.re[(r, c)] = a;
                self.re[(c, r)] = a;
                let b = 0.5 * (self.im[(r, c)] - self.im[(c, r)]);
                self.im[(r, c)] = b;
                self.im[(c, r)] = -b;
            }
            self.im[(c, c)] = 0.0;
        }
    }

    /// Smallest eigenvalue via the real symmetric embedding `[[R, -I], [I, R]]`.
    fn min_eigenvalue(&self) -> f64 {
        let n = self.re.nrows();
        let mut big = DMatrix::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&self.re);
        big.view_mut((n, n), (n, n)).copy_from(&self.re);
        big.view_mut((n, 0), (n, n)).copy_from(&self.im);
        big.view_mut((0, n), (n, n)).copy_from(&(-&self.im));
        big.symmetric_eigenvalues().min()
    }
}

/// `out = op * s`.
fn op_state(op: &Op, s: &Split, out: &mut Split) {
    out.re.gemm(1.0, &op.re, &s.re, 0.0);
    out.im.gemm(1.0, &op.re, &s.im, 0.0);
    if let Some(oi) = &op.im {
        out.re.gemm(-1.0, oi, &s.im, 1.0);
        out.im.gemm(1.0, oi, &s.re, 1.0);
    }
}

/// `out += s * op`.
fn acc_state_op(s: &Split, op: &Op, out: &mut Split) {
    out.re.gemm(1.0, &s.re, &op.re, 1.0);
    out.im.gemm(1.0, &s.im, &op.re, 1.0);
    if let Some(oi) = &op.im {
        out.re.gemm(-1.0, &s.im, oi, 1.0);
        out.im.gemm(1.0, &s.re, oi, 1.0);
    }
}

/// Dissipator `D(rho) = sum_k O_k rho O_k^dag - (K rho + rho K) / 2` on the window.
struct Dissipator {
    ops: Vec<(Op, Op)>,
    k: Op,
    scratch: Split,
}

impl Dissipator {
    fn apply(&mut self, rho: &Split, out: &mut Split) {
        out.re.fill(0.0);
        out.im.fill(0.0);
        for (o, o_adj) in &self.ops {
            op_state(o, rho, &mut self.scratch);
            acc_state_op(&self.scratch, o_adj, out);
        }
        if self.ops.is_empty() {
            return;
        }
        op_state(&self.k, rho, &mut self.scratch);
        let n = rho.re.nrows();
        let (sr, si) = (&self.scratch.re, &self.scratch.im);
        for c in 0..n {
            for r in 0..n {
                out.re[(r, c)] -= 0.5 * (sr[(r, c)] + sr[(c, r)]);
                out.im[(r, c)] -= 0.5 * (si[(r, c)] - si[(c, r)]);
            }
        }
    }
}

/// Elementwise phase tables for half and full steps.
struct Phases {
    half: (DMatrix<f64>, DMatrix<f64>),
    full: (DMatrix<f64>, DMatrix<f64>),
}

impl Phases {
    fn new(energies: &[f64], h: f64) -> Self {
        let n = energies.len();
        let table = |tau: f64| {
            let c = DMatrix::from_fn(n, n, |r, col| ((energies[r] - energies[col]) * tau).cos());
            let s = DMatrix::from_fn(n, n, |r, col| -((energies[r] - energies[col]) * tau).sin());
            (c, s)
        };
        Phases { half: table(0.5 * h), full: table(h) }
    }
}

struct Stepper {
    diss: Dissipator,
    phases: Phases,
    h: f64,
    k: [Split; 4],
    tmp: Split,
    p_half: Split,
    p_full: Split,
}

impl Stepper {
    fn new(diss: Dissipator, energies: &[f64], h: f64) -> Self {
        let n = energies.len();
        Stepper {
            diss,
            phases: Phases::new(energies, h),
            h,
            k: [Split::zeros(n), Split::zeros(n), Split::zeros(n), Split::zeros(n)],
            tmp: Split::zeros(n),
            p_half: Split::zeros(n),
            p_full: Split::zeros(n),
        }
    }

    /// Integrating-factor RK4 step with exact coherent phases.
    fn step(&mut self, rho: &mut Split) {
        let h = self.h;
        let (hc, hs) = (&self.phases.half.0, &self.phases.half.1);
        let (fc, fs) = (&self.phases.full.0, &self.phases.full.1);
        let [k1, k2, k3, k4] = &mut self.k;

        self.diss.apply(rho, k1);

        self.tmp.set_axpy(rho, 0.5 * h, k1);
        self.p_half.set_phased(&self.tmp, hc, hs);
        self.diss.apply(&self.p_half, k2);

        self.p_half.set_phased(rho, hc, hs);
        self.tmp.set_axpy(&self.p_half, 0.5 * h, k2);
        self.diss.apply(&self.tmp, k3);

        self.p_full.set_phased(rho, fc, fs);
        self.tmp.set_phased(k3, hc, hs);
        let k3p = self.tmp.clone();
        self.tmp.set_axpy(&self.p_full, h, &k3p);
        self.diss.apply(&self.tmp, k4);

        // rho <- P1 rho + h/6 (P1 k1 + 2 P2 (k2 + k3) + k4)
        self.tmp.set_axpy(k2, 1.0, k3);
        self.p_half.set_phased(&self.tmp, hc, hs);
        self.tmp.set_phased(k1, fc, fs);
        rho.set_axpy(&self.p_full, h / 6.0, &self.tmp);
        let r = rho.clone();
        rho.set_axpy(&r, h / 3.0, &self.p_half);
        let r = rho.clone();
        rho.set_axpy(&r, h / 6.0, k4);
        rho.hermitize();
    }
}

/// Integrates `d rho/dt = -i[H, rho] + sum_k rate_k L[O_k] rho` with dressed
/// lowering operators `O_k` for the photon, magnon and qubit channels.
pub fn evolve_lindblad(
    h: &OperatorMatrix,
    rates: &DecoherenceRates,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    opts: &LindbladOptions,
) -> Result<Trajectory> {
    rates.validate()?;
    if !h.is_hermitian() {
        return Err(Error::NotHermitian(linalg::hermitian_deviation(h.matrix())));
    }
    if rho0.truncation() != h.truncation() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: rho0.dim() });
    }
    if !(opts.step.is_finite() && opts.step > 0.0) {
        return Err(Error::InvalidParameter(format!("integrator step must be positive, got {}", opts.step)));
    }
    let trunc = h.truncation();
    let dim = h.dim();
    let (energies, u) = linalg::eigh(h.matrix())?;
    if !rates.is_zero() {
        check_nondegenerate(&energies)?;
    }

    let rho_e = u.adjoint() * rho0.matrix() * &u;
    let kdim = match opts.tail_tolerance {
        None => dim,
        Some(tail) => {
            let mut k = dim;
            let mut acc = 0.0;
            while k > 1 {
                let next = acc + rho_e[(k - 1, k - 1)].re.max(0.0);
                if next > tail {
                    break;
                }
                acc = next;
                k -= 1;
            }
            k
        }
    };
    let discarded = (kdim..dim).map(|n| rho_e[(n, n)].re).sum::<f64>();
    let window = |m: &CMatrix| m.view((0, 0), (kdim, kdim)).into_owned();

    let mut ops = Vec::new();
    let mut kmat = CMatrix::zeros(kdim, kdim);
    for channel in Channel::ALL {
        let rate = channel.rate(rates);
        if rate == 0.0 {
            continue;
        }
        let o = window(&lowering_in_eigenbasis(&u, channel, trunc)) * C64::new(rate.sqrt(), 0.0);
        kmat += o.adjoint() * &o;
        let op = Op::from_complex(&o);
        let adj = op.adjoint();
        ops.push((op, adj));
    }
    let diss = Dissipator { ops, k: Op::from_complex(&kmat), scratch: Split::zeros(kdim) };
    let e_win: Vec<f64> = energies[..kdim].to_vec();
    let u_win = u.view((0, 0), (dim, kdim)).into_owned();

    let mut rho = Split::from_complex(&window(&rho_e));
    rho.hermitize();
    let trace0 = rho.trace();

    let times = grid.times();
    let interval = grid.spacing();
    let substeps = |h: f64| (interval / h).ceil().max(1.0) as usize;
    let mut n_sub = substeps(opts.step);
    let mut stepper = Stepper::new(diss, &e_win, interval / n_sub as f64);

    let to_bare = |r: &Split| -> State {
        let m = &u_win * r.to_complex() * u_win.adjoint();
        State::Mixed(DensityMatrix::from_raw(trunc, m))
    };

    let mut diag = LindbladDiagnostics {
        window_dim: kdim,
        discarded_weight: discarded,
        step: stepper.h,
        halvings: 0,
        steps_taken: 0,
        max_trace_drift: 0.0,
        min_eigenvalue: rho.min_eigenvalue(),
    };
    let mut states = Vec::with_capacity(times.len());
    states.push(to_bare(&rho));
    for &t in &times[1..] {
        let saved = rho.clone();
        loop {
            for _ in 0..n_sub {
                stepper.step(&mut rho);
            }
            let drift = (rho.trace() - trace0).abs();
            let min_ev = rho.min_eigenvalue();
            let ok = drift <= opts.trace_tolerance && min_ev >= opts.positivity_floor;
            if ok {
                diag.steps_taken += n_sub;
                diag.max_trace_drift = diag.max_trace_drift.max(drift);
                diag.min_eigenvalue = diag.min_eigenvalue.min(min_ev);
                break;
            }
            if diag.halvings >= opts.max_halvings {
                return Err(if min_ev < opts.positivity_floor {
                    Error::PositivityViolated { time: t, min_eigenvalue: min_ev }
                } else {
                    Error::TraceDrift { time: t, drift }
                });
            }
            diag.halvings += 1;
            n_sub *= 2;
            stepper.h = interval / n_sub as f64;
            stepper.phases = Phases::new(&e_win, stepper.h);
            diag.step = stepper.h;
            rho = saved.clone();
        }
        states.push(to_bare(&rho));
    }
    Ok(Trajectory { times, states, series: Vec::new(), diagnostics: Some(diag) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_closed, fidelity};
    use crate::fock::{BareLabel, StateVector, Truncation};
    use crate::hamiltonian::{build_full, SystemParams};

    fn frob(a: &CMatrix) -> f64 {
        a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn uncoupled_lowering_is_bare_annihilation() {
        let p = SystemParams::bell_default().with_couplings(0.0, 0.0).with_omega_q(2.5);
        let h = build_full(&p).unwrap();
        let o = dressed_lowering(&h, Channel::Photon).unwrap();
        let a = embed_operator(OperatorKind::A, p.trunc);
        assert!(frob(&(o.matrix() - a.matrix())) < 1e-12);
    }

    #[test]
    fn lowering_kills_ground_state_and_has_zero_diagonal() {
        let h = build_full(&SystemParams::bell_default().with_omega_q(2.68)).unwrap();
        for ch in Channel::ALL {
            let (_, o) = dressed_lowering_eigen(&h, ch).unwrap();
            for k in 0..o.nrows() {
                assert_eq!(o[(k, k)].norm(), 0.0);
                assert_eq!(o[(k, 0)].norm(), 0.0);
            }
        }
    }

    #[test]
    fn degenerate_spectrum_rejected() {
        let p = SystemParams::bell_default().with_couplings(0.0, 0.0);
        let h = build_full(&p).unwrap();
        assert!(matches!(dressed_lowering(&h, Channel::Magnon), Err(Error::DegenerateSpectrum(_))));
    }

    #[test]
    fn weak_coupling_lowering_close_to_bare() {
        let p = SystemParams::bell_default().with_couplings(0.02, 0.02).with_omega_q(2.5);
        let h = build_full(&p).unwrap();
        let o = dressed_lowering(&h, Channel::Photon).unwrap();
        let a = embed_operator(OperatorKind::A, p.trunc);
        assert!(frob(&(o.matrix() - a.matrix())) / frob(a.matrix()) <= 0.05);
    }

    #[test]
    fn zero_rates_match_closed_evolution() {
        let p = SystemParams::bell_default().with_omega_q(2.6837);
        let h = build_full(&p).unwrap();
        let psi = StateVector::superposition(
            p.trunc,
            &[(BareLabel::g(0, 0), C64::new(1.0, 0.0)), (BareLabel::e(0, 0), C64::new(0.0, 1.0))],
        )
        .unwrap();
        let grid = TimeGrid::new(0.0, 200.0, 11).unwrap();
        let closed = evolve_closed(&h, &psi, &grid).unwrap();
        let open = evolve_lindblad(&h, &DecoherenceRates::zero(), &psi.to_density(), &grid, &LindbladOptions::default()).unwrap();
        for (c, o) in closed.states.iter().zip(&open.states) {
            let State::Pure(v) = c else { unreachable!() };
            assert!(fidelity(o, v).unwrap() > 1.0 - 1e-7);
        }
    }

    #[test]
    fn decay_conserves_trace_and_positivity() {
        let p = SystemParams::bell_default().with_omega_q(2.6837).with_truncation(Truncation::new(3, 3).unwrap());
        let h = build_full(&p).unwrap();
        let psi = StateVector::basis(p.trunc, BareLabel::e(1, 1)).unwrap();
        let rates = DecoherenceRates::uniform(0.02).unwrap();
        let grid = TimeGrid::new(0.0, 100.0, 21).unwrap();
        let traj = evolve_lindblad(&h, &rates, &psi.to_density(), &grid, &LindbladOptions::default()).unwrap();
        let d = traj.diagnostics.unwrap();
        assert!(d.max_trace_drift < 1e-8);
        assert!(d.min_eigenvalue > -1e-8);
        // Population flows towards the dressed ground state.
        let last = traj.last_state().unwrap();
        assert!(crate::dynamics::population(last, BareLabel::g(0, 0)).unwrap() > 0.5);
    }

    #[test]
    fn step_halving_converges_at_fourth_order() {
        let p = SystemParams::bell_default().with_couplings(0.2, 0.2).with_omega_q(2.6).with_truncation(Truncation::new(2, 2).unwrap());
        let h = build_full(&p).unwrap();
        let psi = StateVector::superposition(
            p.trunc,
            &[(BareLabel::e(1, 0), C64::new(1.0, 0.0)), (BareLabel::g(1, 1), C64::new(0.0, 1.0))],
        )
        .unwrap();
        let rates = DecoherenceRates::new(0.3, 0.2, 0.25).unwrap();
        let grid = TimeGrid::new(0.0, 4.0, 2).unwrap();
        let run = |step: f64| {
            let opts = LindbladOptions { step, tail_tolerance: None, ..LindbladOptions::default() };
            let t = evolve_lindblad(&h, &rates, &psi.to_density(), &grid, &opts).unwrap();
            t.last_state().unwrap().to_density().matrix().clone()
        };
        let reference = run(0.4 / 64.0);
        let e1 = frob(&(run(0.4) - &reference));
        let e2 = frob(&(run(0.2) - &reference));
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }
}
