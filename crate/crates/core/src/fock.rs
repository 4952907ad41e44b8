//! Truncated Fock space of a qubit, a photon mode and a magnon mode.
//!
//! Basis ordering is qubit-major, then photon number, then magnon number,
//! with `g` before `e`:
//! `index = q * (n_a_max + 1) * (n_m_max + 1) + n_a * (n_m_max + 1) + n_m`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

pub type C64 = nalgebra::Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Smallest allowed photon and magnon cutoff.
pub const MIN_CUTOFF: usize = 2;

const HERMITIAN_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;
const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Qubit {
    G,
    E,
}

impl Qubit {
    pub fn index(self) -> usize {
        match self {
            Qubit::G => 0,
            Qubit::E => 1,
        }
    }
}

/// A bare product state `|q, n_a, n_m>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BareLabel {
    pub qubit: Qubit,
    pub n_a: usize,
    pub n_m: usize,
}

impl BareLabel {
    pub const fn new(qubit: Qubit, n_a: usize, n_m: usize) -> Self {
        BareLabel { qubit, n_a, n_m }
    }

    pub const fn g(n_a: usize, n_m: usize) -> Self {
        Self::new(Qubit::G, n_a, n_m)
    }

    pub const fn e(n_a: usize, n_m: usize) -> Self {
        Self::new(Qubit::E, n_a, n_m)
    }

    /// Bare energy under `omega_a a^dag a + omega_m m^dag m + omega_q sigma_+ sigma_-`.
    pub fn bare_energy(&self, omega_a: f64, omega_m: f64, omega_q: f64) -> f64 {
        omega_a * self.n_a as f64 + omega_m * self.n_m as f64 + omega_q * self.qubit.index() as f64
    }
}

impl fmt::Display for BareLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = match self.qubit {
            Qubit::G => 'g',
            Qubit::E => 'e',
        };
        if self.n_a < 10 && self.n_m < 10 {
            write!(f, "{q}{}{}", self.n_a, self.n_m)
        } else {
            write!(f, "{q}({},{})", self.n_a, self.n_m)
        }
    }
}

impl FromStr for BareLabel {
    type Err = Error;

    /// Parses `g11`, `e00` or `g(10,2)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse bare label '{s}'"));
        let s = s.trim();
        let mut chars = s.chars();
        let qubit = match chars.next() {
            Some('g') | Some('G') => Qubit::G,
            Some('e') | Some('E') => Qubit::E,
            _ => return Err(bad()),
        };
        let rest = chars.as_str();
        let (n_a, n_m) = if let Some(inner) = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            let (a, m) = inner.split_once(',').ok_or_else(bad)?;
            (a.trim().parse().map_err(|_| bad())?, m.trim().parse().map_err(|_| bad())?)
        } else {
            let digits: Vec<usize> = rest
                .chars()
                .map(|c| c.to_digit(10).map(|d| d as usize))
                .collect::<Option<_>>()
                .ok_or_else(bad)?;
            if digits.len() != 2 {
                return Err(bad());
            }
            (digits[0], digits[1])
        };
        Ok(BareLabel::new(qubit, n_a, n_m))
    }
}

/// Photon and magnon cutoffs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Truncation {
    n_a_max: usize,
    n_m_max: usize,
}

impl Truncation {
    pub fn new(n_a_max: usize, n_m_max: usize) -> Result<Self> {
        if n_a_max < MIN_CUTOFF || n_m_max < MIN_CUTOFF {
            return Err(Error::InvalidTruncation { n_a: n_a_max, n_m: n_m_max, min: MIN_CUTOFF });
        }
        Ok(Truncation { n_a_max, n_m_max })
    }

    pub fn n_a_max(&self) -> usize {
        self.n_a_max
    }

    pub fn n_m_max(&self) -> usize {
        self.n_m_max
    }

    pub fn dim(&self) -> usize {
        2 * (self.n_a_max + 1) * (self.n_m_max + 1)
    }

    pub fn contains(&self, label: BareLabel) -> bool {
        label.n_a <= self.n_a_max && label.n_m <= self.n_m_max
    }

    pub fn index(&self, label: BareLabel) -> Result<usize> {
        if !self.contains(label) {
            return Err(Error::LabelOutOfRange(label));
        }
        let block = (self.n_a_max + 1) * (self.n_m_max + 1);
        Ok(label.qubit.index() * block + label.n_a * (self.n_m_max + 1) + label.n_m)
    }

    pub fn label(&self, index: usize) -> Result<BareLabel> {
        if index >= self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: index });
        }
        let block = (self.n_a_max + 1) * (self.n_m_max + 1);
        let qubit = if index < block { Qubit::G } else { Qubit::E };
        let rem = index % block;
        Ok(BareLabel::new(qubit, rem / (self.n_m_max + 1), rem % (self.n_m_max + 1)))
    }
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { n_a_max: 5, n_m_max: 5 }
    }
}

/// All bare labels in basis order.
pub fn build_basis(trunc: Truncation) -> Vec<BareLabel> {
    let mut labels = Vec::with_capacity(trunc.dim());
    for qubit in [Qubit::G, Qubit::E] {
        for n_a in 0..=trunc.n_a_max {
            for n_m in 0..=trunc.n_m_max {
                labels.push(BareLabel::new(qubit, n_a, n_m));
            }
        }
    }
    labels
}

/// Elementary operators that can be embedded in the product space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    A,
    ADag,
    M,
    MDag,
    SigmaMinus,
    SigmaPlus,
    SigmaX,
    /// `|e><e| - |g><g|`.
    SigmaZ,
    NumberA,
    NumberM,
    /// `sigma_+ sigma_-`.
    NumberQ,
    Identity,
}

/// Dense operator on the truncated space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    trunc: Truncation,
    matrix: CMatrix,
    hermitian: bool,
}

impl OperatorMatrix {
    pub fn new(trunc: Truncation, matrix: CMatrix) -> Result<Self> {
        let dim = trunc.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: matrix.nrows().max(matrix.ncols()) });
        }
        let hermitian = linalg::hermitian_deviation(&matrix) <= HERMITIAN_TOL * (1.0 + matrix.iter().map(|z| z.norm()).fold(0.0, f64::max));
        Ok(OperatorMatrix { trunc, matrix, hermitian })
    }

    pub fn zeros(trunc: Truncation) -> Self {
        let dim = trunc.dim();
        OperatorMatrix { trunc, matrix: CMatrix::zeros(dim, dim), hermitian: true }
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }

    /// `<row| O |col>`.
    pub fn element(&self, row: BareLabel, col: BareLabel) -> Result<C64> {
        Ok(self.matrix[(self.trunc.index(row)?, self.trunc.index(col)?)])
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix { trunc: self.trunc, matrix: self.matrix.adjoint(), hermitian: self.hermitian }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &OperatorMatrix, factor: f64) -> Result<Self> {
        if self.trunc != other.trunc {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        OperatorMatrix::new(self.trunc, &self.matrix + other.matrix.scale(factor))
    }

    pub fn mul(&self, other: &OperatorMatrix) -> Result<Self> {
        if self.trunc != other.trunc {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        OperatorMatrix::new(self.trunc, &self.matrix * &other.matrix)
    }

    pub fn scale(&self, factor: f64) -> Self {
        OperatorMatrix { trunc: self.trunc, matrix: self.matrix.scale(factor), hermitian: self.hermitian }
    }

    pub fn commutator(&self, other: &OperatorMatrix) -> Result<Self> {
        if self.trunc != other.trunc {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        OperatorMatrix::new(self.trunc, &self.matrix * &other.matrix - &other.matrix * &self.matrix)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Single-mode matrix element `<n'| op |n>` on a cutoff `n_max`.
fn ladder(n_max: usize, lowering: bool) -> DMatrix<f64> {
    let d = n_max + 1;
    let mut m = DMatrix::zeros(d, d);
    for n in 1..d {
        let v = (n as f64).sqrt();
        if lowering {
            m[(n - 1, n)] = v;
        } else {
            m[(n, n - 1)] = v;
        }
    }
    m
}

fn kron3(q: &DMatrix<f64>, a: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    q.kronecker(a).kronecker(m)
}

/// Embeds an elementary operator into the product space.
pub fn embed_operator(kind: OperatorKind, trunc: Truncation) -> OperatorMatrix {
    let ia = DMatrix::<f64>::identity(trunc.n_a_max + 1, trunc.n_a_max + 1);
    let im = DMatrix::<f64>::identity(trunc.n_m_max + 1, trunc.n_m_max + 1);
    let iq = DMatrix::<f64>::identity(2, 2);
    // Qubit basis order is (g, e).
    let sm = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let sp = sm.transpose();
    let real = match kind {
        OperatorKind::A => kron3(&iq, &ladder(trunc.n_a_max, true), &im),
        OperatorKind::ADag => kron3(&iq, &ladder(trunc.n_a_max, false), &im),
        OperatorKind::M => kron3(&iq, &ia, &ladder(trunc.n_m_max, true)),
        OperatorKind::MDag => kron3(&iq, &ia, &ladder(trunc.n_m_max, false)),
        OperatorKind::SigmaMinus => kron3(&sm, &ia, &im),
        OperatorKind::SigmaPlus => kron3(&sp, &ia, &im),
        OperatorKind::SigmaX => kron3(&(&sm + &sp), &ia, &im),
        OperatorKind::SigmaZ => kron3(&DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0])), &ia, &im),
        OperatorKind::NumberA => {
            let n = DMatrix::from_diagonal(&DVector::from_fn(trunc.n_a_max + 1, |i, _| i as f64));
            kron3(&iq, &n, &im)
        }
        OperatorKind::NumberM => {
            let n = DMatrix::from_diagonal(&DVector::from_fn(trunc.n_m_max + 1, |i, _| i as f64));
            kron3(&iq, &ia, &n)
        }
        OperatorKind::NumberQ => kron3(&(&sp * &sm), &ia, &im),
        OperatorKind::Identity => DMatrix::identity(trunc.dim(), trunc.dim()),
    };
    let hermitian = !matches!(
        kind,
        OperatorKind::A | OperatorKind::ADag | OperatorKind::M | OperatorKind::MDag | OperatorKind::SigmaMinus | OperatorKind::SigmaPlus
    );
    OperatorMatrix { trunc, matrix: real.map(|x| C64::new(x, 0.0)), hermitian }
}

/// `|label><label|`.
pub fn bare_projector(label: BareLabel, trunc: Truncation) -> Result<OperatorMatrix> {
    let i = trunc.index(label)?;
    let mut m = CMatrix::zeros(trunc.dim(), trunc.dim());
    m[(i, i)] = ONE;
    Ok(OperatorMatrix { trunc, matrix: m, hermitian: true })
}

/// Normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    trunc: Truncation,
    amplitudes: CVector,
}

impl StateVector {
    /// Wraps amplitudes that must already be normalized.
    pub fn new(trunc: Truncation, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != trunc.dim() {
            return Err(Error::DimensionMismatch { expected: trunc.dim(), got: amplitudes.len() });
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("norm {norm} differs from 1")));
        }
        Ok(StateVector { trunc, amplitudes })
    }

    pub(crate) fn from_raw(trunc: Truncation, amplitudes: CVector) -> Self {
        StateVector { trunc, amplitudes }
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(trunc: Truncation, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState("zero or non-finite vector".into()));
        }
        Self::new(trunc, amplitudes.unscale(norm))
    }

    pub fn basis(trunc: Truncation, label: BareLabel) -> Result<Self> {
        let mut v = CVector::zeros(trunc.dim());
        v[trunc.index(label)?] = ONE;
        Ok(StateVector { trunc, amplitudes: v })
    }

    /// Normalized superposition `sum_k c_k |label_k>`.
    pub fn superposition(trunc: Truncation, terms: &[(BareLabel, C64)]) -> Result<Self> {
        let mut v = CVector::zeros(trunc.dim());
        for &(label, c) in terms {
            v[trunc.index(label)?] += c;
        }
        Self::normalized(trunc, v)
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn amplitude(&self, label: BareLabel) -> Result<C64> {
        Ok(self.amplitudes[self.trunc.index(label)?])
    }

    pub fn population(&self, label: BareLabel) -> Result<f64> {
        Ok(self.amplitude(label)?.norm_sqr())
    }

    pub fn to_density(&self) -> DensityMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix { trunc: self.trunc, matrix: m }
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    trunc: Truncation,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(trunc: Truncation, matrix: CMatrix) -> Result<Self> {
        let dim = trunc.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: matrix.nrows().max(matrix.ncols()) });
        }
        let dev = linalg::hermitian_deviation(&matrix);
        if dev > 1e-10 {
            return Err(Error::NotHermitian(dev));
        }
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let rho = DensityMatrix { trunc, matrix };
        let min = rho.min_eigenvalue()?;
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    pub(crate) fn from_raw(trunc: Truncation, matrix: CMatrix) -> Self {
        DensityMatrix { trunc, matrix }
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn population(&self, label: BareLabel) -> Result<f64> {
        let i = self.trunc.index(label)?;
        Ok(self.matrix[(i, i)].re)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (values, _) = linalg::eigh(&self.matrix)?;
        Ok(values.first().copied().unwrap_or(0.0))
    }
}
