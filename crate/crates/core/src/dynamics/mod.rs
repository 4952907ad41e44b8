//! Closed and open-system time evolution, populations and fidelities.

mod lindblad;

pub use lindblad::{dressed_lowering, dressed_lowering_eigen, evolve_lindblad, Channel, LindbladDiagnostics, LindbladOptions};

use crate::error::{Error, Result};
use crate::fock::{BareLabel, CMatrix, CVector, DensityMatrix, OperatorMatrix, StateVector, Truncation, C64};
use crate::linalg;

/// Resonator, magnon and qubit damping rates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DecoherenceRates {
    pub kappa_a: f64,
    pub kappa_m: f64,
    pub gamma: f64,
}

impl DecoherenceRates {
    pub fn new(kappa_a: f64, kappa_m: f64, gamma: f64) -> Result<Self> {
        let r = DecoherenceRates { kappa_a, kappa_m, gamma };
        r.validate()?;
        Ok(r)
    }

    /// Equal rates on all three channels.
    pub fn uniform(kappa: f64) -> Result<Self> {
        Self::new(kappa, kappa, kappa)
    }

    pub fn zero() -> Self {
        DecoherenceRates::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa_a", self.kappa_a), ("kappa_m", self.kappa_m), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.kappa_a == 0.0 && self.kappa_m == 0.0 && self.gamma == 0.0
    }
}

/// Uniform grid of `steps` points from `t0` to `t1` inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::InvalidGrid(format!("need t1 > t0, got [{t0}, {t1}]")));
        }
        if steps < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {steps}")));
        }
        Ok(TimeGrid { t0, t1, steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn spacing(&self) -> f64 {
        (self.t1 - self.t0) / (self.steps - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.steps).map(|k| if k + 1 == self.steps { self.t1 } else { self.t0 + h * k as f64 }).collect()
    }
}

/// A pure or mixed state.
#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl State {
    pub fn truncation(&self) -> Truncation {
        match self {
            State::Pure(s) => s.truncation(),
            State::Mixed(r) => r.truncation(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            State::Pure(s) => s.to_density(),
            State::Mixed(r) => r.clone(),
        }
    }
}

impl From<StateVector> for State {
    fn from(s: StateVector) -> Self {
        State::Pure(s)
    }
}

impl From<DensityMatrix> for State {
    fn from(r: DensityMatrix) -> Self {
        State::Mixed(r)
    }
}

/// `|<label|psi>|^2` or `<label|rho|label>`.
pub fn population(state: &State, label: BareLabel) -> Result<f64> {
    match state {
        State::Pure(s) => s.population(label),
        State::Mixed(r) => r.population(label),
    }
}

/// `|<phi|psi>|^2` or `<phi|rho|phi>`.
pub fn fidelity(state: &State, target: &StateVector) -> Result<f64> {
    let phi = target.amplitudes();
    match state {
        State::Pure(s) => {
            if s.dim() != target.dim() {
                return Err(Error::DimensionMismatch { expected: target.dim(), got: s.dim() });
            }
            Ok(phi.dotc(s.amplitudes()).norm_sqr())
        }
        State::Mixed(r) => {
            if r.dim() != target.dim() {
                return Err(Error::DimensionMismatch { expected: target.dim(), got: r.dim() });
            }
            Ok(phi.dotc(&(r.matrix() * phi)).re)
        }
    }
}

/// Time-ordered states with optional derived series.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// Named per-time series, each as long as `times`.
    pub series: Vec<(String, Vec<f64>)>,
    /// Present for open-system runs.
    pub diagnostics: Option<LindbladDiagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&State> {
        self.states.last()
    }

    pub fn populations(&self, label: BareLabel) -> Result<Vec<f64>> {
        self.states.iter().map(|s| population(s, label)).collect()
    }

    pub fn fidelities(&self, target: &StateVector) -> Result<Vec<f64>> {
        self.states.iter().map(|s| fidelity(s, target)).collect()
    }

    /// Appends the population of `label` as series `P_<label>`.
    pub fn with_population(mut self, label: BareLabel) -> Result<Self> {
        let p = self.populations(label)?;
        self.series.push((format!("P_{label}"), p));
        Ok(self)
    }

    pub fn with_fidelity(mut self, name: &str, target: &StateVector) -> Result<Self> {
        let f = self.fidelities(target)?;
        self.series.push((name.to_string(), f));
        Ok(self)
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

/// Spectral propagator `exp(-i H t)` from one eigendecomposition.
#[derive(Clone, Debug)]
pub struct Propagator {
    trunc: Truncation,
    energies: Vec<f64>,
    vectors: CMatrix,
}

impl Propagator {
    pub fn new(h: &OperatorMatrix) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(Error::NotHermitian(linalg::hermitian_deviation(h.matrix())));
        }
        let (energies, vectors) = linalg::eigh(h.matrix())?;
        Ok(Propagator { trunc: h.truncation(), energies, vectors })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenbasis coefficients `<E_n|psi>`.
    pub fn coefficients(&self, psi: &StateVector) -> Result<CVector> {
        if psi.truncation() != self.trunc {
            return Err(Error::DimensionMismatch { expected: self.trunc.dim(), got: psi.dim() });
        }
        Ok(self.vectors.adjoint() * psi.amplitudes())
    }

    fn phased(&self, coeffs: &CVector, t: f64) -> CVector {
        CVector::from_iterator(
            coeffs.len(),
            coeffs.iter().zip(&self.energies).map(|(c, &e)| c * C64::from_polar(1.0, -e * t)),
        )
    }

    pub fn state_at(&self, coeffs: &CVector, t: f64) -> Result<StateVector> {
        StateVector::new(self.trunc, &self.vectors * self.phased(coeffs, t))
    }

    /// `<label|psi(t)>` without building the full state.
    pub fn amplitude_at(&self, coeffs: &CVector, label: BareLabel, t: f64) -> Result<C64> {
        let row = self.trunc.index(label)?;
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..self.energies.len() {
            let c = coeffs[n];
            if c.norm_sqr() > 0.0 {
                acc += self.vectors[(row, n)] * c * C64::from_polar(1.0, -self.energies[n] * t);
            }
        }
        Ok(acc)
    }
}

/// `psi(t) = sum_n exp(-i E_n (t - t0)) |E_n><E_n|psi0>`.
pub fn evolve_closed(h: &OperatorMatrix, psi0: &StateVector, grid: &TimeGrid) -> Result<Trajectory> {
    let prop = Propagator::new(h)?;
    let coeffs = prop.coefficients(psi0)?;
    let times = grid.times();
    let states = times
        .iter()
        .map(|&t| prop.state_at(&coeffs, t - grid.t0()).map(State::Pure))
        .collect::<Result<_>>()?;
    Ok(Trajectory { times, states, series: Vec::new(), diagnostics: None })
}

/// Exact rotation inside the pair under `H_eff = g_eff (|a><b| + |b><a|)`;
/// all other amplitudes frozen.
pub fn evolve_effective_two_level(
    g_eff: f64,
    pair: (BareLabel, BareLabel),
    psi0: &StateVector,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    if !g_eff.is_finite() {
        return Err(Error::InvalidParameter(format!("g_eff must be finite, got {g_eff}")));
    }
    let t = psi0.truncation();
    let (ia, ib) = (t.index(pair.0)?, t.index(pair.1)?);
    if ia == ib {
        return Err(Error::InvalidParameter("pair members must differ".into()));
    }
    let times = grid.times();
    let states = times
        .iter()
        .map(|&time| StateVector::new(t, rotate_pair(psi0.amplitudes(), ia, ib, g_eff * (time - grid.t0()))).map(State::Pure))
        .collect::<Result<_>>()?;
    Ok(Trajectory { times, states, series: Vec::new(), diagnostics: None })
}

pub(crate) fn rotate_pair(v: &CVector, ia: usize, ib: usize, angle: f64) -> CVector {
    let (c, s) = (angle.cos(), angle.sin());
    let mi = C64::new(0.0, -s);
    let mut out = v.clone();
    out[ia] = v[ia] * c + v[ib] * mi;
    out[ib] = v[ia] * mi + v[ib] * c;
    out
}
