//! Qubit, photon and magnon Hamiltonian without the rotating-wave approximation.
//!
//! `H0 = omega_a a^dag a + omega_m m^dag m + omega_q sigma_+ sigma_-`
//! `V  = g (a + a^dag)(m + m^dag) + G (a + a^dag)(sigma_x cos(theta) + sigma_z sin(theta))`

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{embed_operator, OperatorKind, OperatorMatrix, Truncation, C64};

/// Couplings above this fraction of the smallest relevant frequency are
/// flagged as outside the dispersive regime.
pub const DISPERSIVE_RATIO: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub omega_a: f64,
    pub omega_m: f64,
    pub omega_q: f64,
    /// Photon-magnon coupling.
    pub g: f64,
    /// Photon-qubit coupling.
    pub big_g: f64,
    /// Mixing angle in `[0, pi/2]`.
    pub theta: f64,
    pub trunc: Truncation,
}

impl SystemParams {
    pub fn new(omega_a: f64, omega_m: f64, omega_q: f64, g: f64, big_g: f64, theta: f64, trunc: Truncation) -> Result<Self> {
        let p = SystemParams { omega_a, omega_m, omega_q, g, big_g, theta, trunc };
        p.validate()?;
        Ok(p)
    }

    /// `omega_a = 1`, `omega_m = 1.7`, `g = G = 0.1`, `theta = pi/4`, on the
    /// bare (e00, g11) resonance.
    pub fn bell_default() -> Self {
        SystemParams {
            omega_a: 1.0,
            omega_m: 1.7,
            omega_q: 2.7,
            g: 0.1,
            big_g: 0.1,
            theta: std::f64::consts::FRAC_PI_4,
            trunc: Truncation::default(),
        }
    }

    /// `omega_a = 2.4`, `omega_m = 1`, `g = G = 0.1`, `theta = pi/4`, on the
    /// bare (g20, e11) resonance.
    pub fn ghz_default() -> Self {
        SystemParams {
            omega_a: 2.4,
            omega_m: 1.0,
            omega_q: 1.4,
            g: 0.1,
            big_g: 0.1,
            theta: std::f64::consts::FRAC_PI_4,
            trunc: Truncation::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_a", self.omega_a),
            ("omega_m", self.omega_m),
            ("omega_q", self.omega_q),
            ("g", self.g),
            ("G", self.big_g),
            ("theta", self.theta),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        for (name, v) in [("omega_a", self.omega_a), ("omega_m", self.omega_m), ("omega_q", self.omega_q)] {
            if v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=FRAC_PI_2).contains(&self.theta) {
            return Err(Error::InvalidParameter(format!("theta must lie in [0, pi/2], got {}", self.theta)));
        }
        Ok(())
    }

    pub fn with_omega_q(mut self, omega_q: f64) -> Self {
        self.omega_q = omega_q;
        self
    }

    pub fn with_couplings(mut self, g: f64, big_g: f64) -> Self {
        self.g = g;
        self.big_g = big_g;
        self
    }

    pub fn with_truncation(mut self, trunc: Truncation) -> Self {
        self.trunc = trunc;
        self
    }

    /// The smaller mode frequency; time and rate units in the protocols.
    pub fn reference_frequency(&self) -> f64 {
        self.omega_a.min(self.omega_m)
    }

    /// `(sin theta, cos theta)`, exact at the interval ends.
    pub fn trig(&self) -> (f64, f64) {
        mixing_trig(self.theta)
    }

    /// Largest coupling over the smallest of `omega_a`, `omega_m`, `|omega_a - omega_m|`.
    pub fn dispersive_ratio(&self) -> f64 {
        let scale = self.omega_a.min(self.omega_m).min((self.omega_a - self.omega_m).abs());
        self.g.abs().max(self.big_g.abs()) / scale
    }

    /// Advisory only: true when the perturbative formulas are expected to hold.
    pub fn is_dispersive(&self) -> bool {
        self.dispersive_ratio() < DISPERSIVE_RATIO
    }
}

/// `(sin theta, cos theta)` with exact zeros at `0` and `pi/2`.
pub fn mixing_trig(theta: f64) -> (f64, f64) {
    if theta == 0.0 {
        (0.0, 1.0)
    } else if theta == FRAC_PI_2 {
        (1.0, 0.0)
    } else {
        theta.sin_cos()
    }
}

fn real(op: OperatorKind, trunc: Truncation) -> DMatrix<f64> {
    embed_operator(op, trunc).matrix().map(|z| z.re)
}

fn wrap(trunc: Truncation, m: DMatrix<f64>) -> OperatorMatrix {
    OperatorMatrix::new(trunc, m.map(|x| C64::new(x, 0.0))).expect("dimension fixed by truncation")
}

fn coupling(p: &SystemParams) -> DMatrix<f64> {
    let t = p.trunc;
    let (s, c) = p.trig();
    let xa = real(OperatorKind::A, t) + real(OperatorKind::ADag, t);
    let xm = real(OperatorKind::M, t) + real(OperatorKind::MDag, t);
    let mut qubit = real(OperatorKind::SigmaX, t) * c;
    if s != 0.0 {
        qubit += real(OperatorKind::SigmaZ, t) * s;
    }
    (&xa * &xm) * p.g + (&xa * &qubit) * p.big_g
}

/// Real parts of `H` split as `H = static + omega_q * n_q`.
#[derive(Clone, Debug)]
pub(crate) struct RealHamiltonian {
    pub stat: DMatrix<f64>,
    pub n_q: DMatrix<f64>,
}

impl RealHamiltonian {
    pub fn new(p: &SystemParams) -> Self {
        let t = p.trunc;
        let stat = real(OperatorKind::NumberA, t) * p.omega_a + real(OperatorKind::NumberM, t) * p.omega_m + coupling(p);
        RealHamiltonian { stat, n_q: real(OperatorKind::NumberQ, t) }
    }

    pub fn at(&self, omega_q: f64) -> DMatrix<f64> {
        &self.stat + &self.n_q * omega_q
    }
}

pub fn build_h0(p: &SystemParams) -> Result<OperatorMatrix> {
    p.validate()?;
    let t = p.trunc;
    let m = real(OperatorKind::NumberA, t) * p.omega_a
        + real(OperatorKind::NumberM, t) * p.omega_m
        + real(OperatorKind::NumberQ, t) * p.omega_q;
    Ok(wrap(t, m))
}

pub fn build_v(p: &SystemParams) -> Result<OperatorMatrix> {
    p.validate()?;
    Ok(wrap(p.trunc, coupling(p)))
}

pub fn build_full(p: &SystemParams) -> Result<OperatorMatrix> {
    p.validate()?;
    Ok(wrap(p.trunc, RealHamiltonian::new(p).at(p.omega_q)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::BareLabel;

    #[test]
    fn h0_is_diagonal_with_bare_energies() {
        let p = SystemParams::bell_default().with_couplings(0.0, 0.0);
        let h0 = build_h0(&p).unwrap();
        let h = build_full(&p).unwrap();
        assert_eq!(h0.matrix(), h.matrix());
        let e = h0.element(BareLabel::e(0, 0), BareLabel::e(0, 0)).unwrap().re;
        let g = h0.element(BareLabel::g(1, 1), BareLabel::g(1, 1)).unwrap().re;
        assert_eq!(e, 2.7);
        assert!((g - 2.7).abs() < 1e-15);
    }

    #[test]
    fn coupling_elements() {
        let p = SystemParams::bell_default();
        let v = build_v(&p).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // photon-magnon: (a + a^dag)(m + m^dag) between g00 and g11.
        assert!((v.element(BareLabel::g(1, 1), BareLabel::g(0, 0)).unwrap().re - 0.1).abs() < 1e-15);
        // a^dag sigma_- cos(theta) between e00 and g10.
        assert!((v.element(BareLabel::g(1, 0), BareLabel::e(0, 0)).unwrap().re - 0.1 * s).abs() < 1e-15);
        // sigma_z sin(theta) (a + a^dag) keeps the qubit: e00 -> e10 is +G s, g00 -> g10 is -G s.
        assert!((v.element(BareLabel::e(1, 0), BareLabel::e(0, 0)).unwrap().re - 0.1 * s).abs() < 1e-15);
        assert!((v.element(BareLabel::g(1, 0), BareLabel::g(0, 0)).unwrap().re + 0.1 * s).abs() < 1e-15);
        assert_eq!(v.element(BareLabel::g(0, 0), BareLabel::g(0, 0)).unwrap().re, 0.0);
    }

    #[test]
    fn full_is_real_symmetric() {
        let h = build_full(&SystemParams::ghz_default()).unwrap();
        assert!(h.is_hermitian());
        assert!(h.is_real());
        let m = h.matrix();
        assert_eq!(m, &m.transpose());
    }

    #[test]
    fn validation() {
        let p = SystemParams::bell_default();
        assert!(SystemParams { theta: 2.0, ..p }.validate().is_err());
        assert!(SystemParams { omega_a: 0.0, ..p }.validate().is_err());
        assert!(SystemParams { g: f64::NAN, ..p }.validate().is_err());
        assert!(p.validate().is_ok());
        assert!(p.is_dispersive());
        assert!(!p.with_couplings(0.3, 0.3).is_dispersive());
    }

    #[test]
    fn exact_trig_at_ends() {
        assert_eq!(mixing_trig(0.0), (0.0, 1.0));
        assert_eq!(mixing_trig(FRAC_PI_2), (1.0, 0.0));
    }
}
