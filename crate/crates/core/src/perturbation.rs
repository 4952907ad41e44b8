//! Generic second- and third-order perturbation sums, path enumeration and
//! closed-form shifts and couplings for the resonant pairs.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::fock::{BareLabel, OperatorMatrix};
use crate::hamiltonian::{build_h0, build_v, SystemParams};
use crate::spectral::{bare_resonance, default_bracket, find_avoided_crossing, CrossingOptions};

/// Denominator floor relative to the reference frequency.
pub const DENOMINATOR_FLOOR_REL: f64 = 1e-6;

/// Chain of nonzero matrix elements of `V` from `nodes[0]` to the last node.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionPath {
    pub nodes: Vec<BareLabel>,
    pub amplitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    GenericSum,
    PathEnumeration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationReport {
    pub pair: (BareLabel, BareLabel),
    /// Shift of `pair.0`.
    pub shift_initial: f64,
    /// Shift of `pair.1`.
    pub shift_final: f64,
    /// Resonance shift: the crossing sits at `bare resonance + delta`.
    pub delta: f64,
    pub g_eff: f64,
    pub paths: Vec<TransitionPath>,
    pub method: Method,
    /// Named auxiliary quantities.
    pub extras: Vec<(&'static str, f64)>,
}

impl PerturbationReport {
    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }
}

/// Diagonal energies and sparse couplings extracted from `(H0, V)`.
struct Sums {
    energies: Vec<f64>,
    /// Nonzero `V[(n, m)]` per row `n`.
    adjacency: Vec<Vec<(usize, f64)>>,
    floor: f64,
    trunc: crate::fock::Truncation,
}

impl Sums {
    fn new(h0: &OperatorMatrix, v: &OperatorMatrix) -> Result<Self> {
        if h0.truncation() != v.truncation() {
            return Err(Error::DimensionMismatch { expected: h0.dim(), got: v.dim() });
        }
        let trunc = h0.truncation();
        let n = h0.dim();
        let h = h0.matrix();
        for i in 0..n {
            for j in 0..n {
                if i != j && h[(i, j)].norm() != 0.0 {
                    return Err(Error::InvalidParameter("H0 must be diagonal in the bare basis".into()));
                }
            }
        }
        if !v.is_real() {
            return Err(Error::InvalidParameter("V must be real".into()));
        }
        let energies: Vec<f64> = (0..n).map(|i| h[(i, i)].re).collect();
        let adjacency = (0..n)
            .map(|r| (0..n).filter_map(|c| Some((c, v.matrix()[(r, c)].re)).filter(|x| x.1 != 0.0)).collect())
            .collect();
        // The smallest single-quantum spacing stands in for the reference frequency.
        let e = |l: BareLabel| trunc.index(l).map(|i| energies[i]);
        let e0 = e(BareLabel::g(0, 0))?;
        let reference = (e(BareLabel::g(1, 0))? - e0).abs().min((e(BareLabel::g(0, 1))? - e0).abs());
        Ok(Sums { energies, adjacency, floor: DENOMINATOR_FLOOR_REL * reference, trunc })
    }

    fn v(&self, r: usize, c: usize) -> f64 {
        self.adjacency[r].iter().find(|x| x.0 == c).map_or(0.0, |x| x.1)
    }

    fn denom(&self, i: usize, n: usize) -> Result<f64> {
        let d = self.energies[i] - self.energies[n];
        if d.abs() < self.floor {
            return Err(Error::NearDegenerate {
                from: self.trunc.label(i)?,
                to: self.trunc.label(n)?,
                denominator: d,
            });
        }
        Ok(d)
    }

    fn shift(&self, i: usize, exclude: Option<usize>) -> Result<f64> {
        let mut eps = 0.0;
        for &(n, vni) in &self.adjacency[i] {
            if n == i || Some(n) == exclude {
                continue;
            }
            eps += vni * vni / self.denom(i, n)?;
        }
        Ok(eps)
    }

    fn paths(&self, i: usize, j: usize, order: usize) -> Result<Vec<(Vec<usize>, f64)>> {
        let mut out = Vec::new();
        match order {
            2 => {
                for &(n, vni) in &self.adjacency[i] {
                    if n == i || n == j {
                        continue;
                    }
                    let vjn = self.v(j, n);
                    if vjn != 0.0 {
                        out.push((vec![i, n, j], vjn * vni / self.denom(i, n)?));
                    }
                }
            }
            3 => {
                for &(m, vmi) in &self.adjacency[i] {
                    if m == i || m == j {
                        continue;
                    }
                    for &(n, vnm) in &self.adjacency[m] {
                        if n == i || n == j {
                            continue;
                        }
                        let vjn = self.v(j, n);
                        if vjn != 0.0 {
                            let amp = vjn * vnm * vmi / (self.denom(i, m)? * self.denom(i, n)?);
                            out.push((vec![i, m, n, j], amp));
                        }
                    }
                }
            }
            _ => return Err(Error::InvalidParameter(format!("path order must be 2 or 3, got {order}"))),
        }
        Ok(out)
    }
}

/// `sum_{n != i} V_in V_ni / (E_i - E_n)`.
pub fn second_order_shift(h0: &OperatorMatrix, v: &OperatorMatrix, i: BareLabel) -> Result<f64> {
    let s = Sums::new(h0, v)?;
    s.shift(h0.truncation().index(i)?, None)
}

/// `sum_{n, m not in {i, j}} V_jn V_nm V_mi / ((E_i - E_n)(E_i - E_m))`.
pub fn third_order_coupling(h0: &OperatorMatrix, v: &OperatorMatrix, i: BareLabel, j: BareLabel) -> Result<f64> {
    let s = Sums::new(h0, v)?;
    let t = h0.truncation();
    let (ii, jj) = (t.index(i)?, t.index(j)?);
    if s.v(jj, ii) != 0.0 {
        return Err(Error::LowerOrderConnection { from: i, to: j, order: 1 });
    }
    if !s.paths(ii, jj, 2)?.is_empty() {
        return Err(Error::LowerOrderConnection { from: i, to: j, order: 2 });
    }
    Ok(s.paths(ii, jj, 3)?.iter().map(|p| p.1).sum())
}

/// All order-2 or order-3 chains from `i` to `j` with intermediates outside
/// `{i, j}`, in lexicographic order of intermediate flat indices.
pub fn enumerate_paths(
    h0: &OperatorMatrix,
    v: &OperatorMatrix,
    i: BareLabel,
    j: BareLabel,
    order: usize,
) -> Result<Vec<TransitionPath>> {
    let s = Sums::new(h0, v)?;
    let t = h0.truncation();
    let mut raw = s.paths(t.index(i)?, t.index(j)?, order)?;
    raw.sort_by(|a, b| a.0.cmp(&b.0));
    raw.into_iter()
        .map(|(nodes, amplitude)| {
            Ok(TransitionPath { nodes: nodes.into_iter().map(|k| t.label(k)).collect::<Result<_>>()?, amplitude })
        })
        .collect()
}

/// Generic-sum report for a third-order pair at `p.omega_q`.
pub fn generic_report(p: &SystemParams, pair: (BareLabel, BareLabel)) -> Result<PerturbationReport> {
    let h0 = build_h0(p)?;
    let v = build_v(p)?;
    let s = Sums::new(&h0, &v)?;
    let t = p.trunc;
    let (a, b) = (t.index(pair.0)?, t.index(pair.1)?);
    let shift_initial = s.shift(a, None)?;
    let shift_final = s.shift(b, None)?;
    let dq = pair.0.qubit.index() as f64 - pair.1.qubit.index() as f64;
    if dq == 0.0 {
        return Err(Error::NoResonance(pair.0, pair.1));
    }
    let paths = enumerate_paths(&h0, &v, pair.0, pair.1, 3)?;
    let g_eff = third_order_coupling(&h0, &v, pair.0, pair.1)?;
    Ok(PerturbationReport {
        pair,
        shift_initial,
        shift_final,
        delta: (shift_final - shift_initial) / dq,
        g_eff,
        paths,
        method: Method::GenericSum,
        extras: Vec::new(),
    })
}

/// Second-order estimate of the resonance shift of a pair, leaving out the
/// direct coupling between its members and any near-resonant denominators.
pub(crate) fn pair_shift_estimate(p: &SystemParams, pair: (BareLabel, BareLabel)) -> Result<f64> {
    let h0 = build_h0(p)?;
    let v = build_v(p)?;
    let s = Sums::new(&h0, &v)?;
    let t = p.trunc;
    let (a, b) = (t.index(pair.0)?, t.index(pair.1)?);
    let lenient = |i: usize, partner: usize| -> f64 {
        s.adjacency[i]
            .iter()
            .filter(|&&(n, _)| n != i && n != partner)
            .filter_map(|&(n, vni)| {
                let d = s.energies[i] - s.energies[n];
                (d.abs() >= s.floor).then(|| vni * vni / d)
            })
            .sum()
    };
    let dq = pair.0.qubit.index() as f64 - pair.1.qubit.index() as f64;
    if dq == 0.0 {
        return Err(Error::NoResonance(pair.0, pair.1));
    }
    Ok((lenient(b, a) - lenient(a, b)) / dq)
}

/// The resonant pairs used by the protocols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ResonantPair {
    /// `(e00, g11)` at `omega_q = omega_a + omega_m`.
    Bell,
    /// `(g20, e11)` at `omega_q = omega_a - omega_m`.
    Ghz,
    /// `(e00, g20)` at `omega_q = 2 omega_a`.
    TwoPhoton,
    /// `(g10, e01)` at `omega_q = omega_a - omega_m`.
    QubitMagnon,
    /// `(e00, g10)` at `omega_q = omega_a`, first-order coupling.
    SinglePhoton,
}

impl ResonantPair {
    pub fn labels(self) -> (BareLabel, BareLabel) {
        match self {
            ResonantPair::Bell => (BareLabel::e(0, 0), BareLabel::g(1, 1)),
            ResonantPair::Ghz => (BareLabel::g(2, 0), BareLabel::e(1, 1)),
            ResonantPair::TwoPhoton => (BareLabel::e(0, 0), BareLabel::g(2, 0)),
            ResonantPair::QubitMagnon => (BareLabel::g(1, 0), BareLabel::e(0, 1)),
            ResonantPair::SinglePhoton => (BareLabel::e(0, 0), BareLabel::g(1, 0)),
        }
    }

    pub fn closed_form(self, p: &SystemParams) -> Result<PerturbationReport> {
        match self {
            ResonantPair::Bell => closed_form_bell(p),
            ResonantPair::Ghz => closed_form_ghz(p),
            ResonantPair::TwoPhoton => closed_form_two_photon(p),
            ResonantPair::QubitMagnon => closed_form_qubit_magnon(p),
            ResonantPair::SinglePhoton => closed_form_single_photon(p),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ResonantPair::Bell => "bell",
            ResonantPair::Ghz => "ghz",
            ResonantPair::TwoPhoton => "two-photon",
            ResonantPair::QubitMagnon => "qubit-magnon",
            ResonantPair::SinglePhoton => "single-photon",
        }
    }
}

struct Terms {
    wa: f64,
    wm: f64,
    wq: f64,
    g2: f64,
    gg2: f64,
    s2: f64,
    c2: f64,
    sin2: f64,
    g: f64,
}

impl Terms {
    fn new(p: &SystemParams) -> Result<Self> {
        p.validate()?;
        let (s, c) = p.trig();
        Ok(Terms {
            wa: p.omega_a,
            wm: p.omega_m,
            wq: p.omega_q,
            g2: p.g * p.g,
            gg2: p.big_g * p.big_g,
            s2: s * s,
            c2: c * c,
            sin2: 2.0 * s * c,
            g: p.g,
        })
    }

    fn require(&self, cond: bool, what: &'static str) -> Result<()> {
        if cond {
            Err(Error::Pole(what))
        } else {
            Ok(())
        }
    }

    fn no_mode_degeneracy(&self) -> Result<()> {
        self.require(self.wa == self.wm, "omega_a = omega_m")
    }

    fn qubit_off_photon(&self) -> Result<()> {
        self.require(self.wq == self.wa, "omega_q = omega_a")
    }

    fn eps_e00(&self) -> f64 {
        self.gg2 * self.c2 / (self.wq - self.wa) - self.gg2 * self.s2 / self.wa - self.g2 / (self.wa + self.wm)
    }

    fn eps_g11(&self) -> f64 {
        self.gg2 * self.c2 / (self.wa - self.wq) - 2.0 * self.gg2 * self.c2 / (self.wq + self.wa) - self.gg2 * self.s2 / self.wa
            - 3.0 * self.g2 / (self.wa + self.wm)
    }

    fn eps_e11(&self) -> f64 {
        -self.gg2 * self.s2 / self.wa + self.gg2 * self.c2 / (self.wq + self.wa) + 2.0 * self.gg2 * self.c2 / (self.wq - self.wa)
            - 3.0 * self.g2 / (self.wa + self.wm)
    }

    fn eps_g20(&self) -> f64 {
        -self.gg2 * self.s2 / self.wa + 2.0 * self.gg2 * self.c2 / (self.wa - self.wq) - 3.0 * self.gg2 * self.c2 / (self.wq + self.wa)
            + 2.0 * self.g2 / (self.wa - self.wm)
            - 3.0 * self.g2 / (self.wa + self.wm)
    }

    fn eps_g10(&self) -> f64 {
        -self.gg2 * self.s2 / self.wa + self.gg2 * self.c2 / (self.wa - self.wq) - 2.0 * self.gg2 * self.c2 / (self.wq + self.wa)
            + self.g2 / (self.wa - self.wm)
            - 2.0 * self.g2 / (self.wa + self.wm)
    }

    fn eps_e01(&self) -> f64 {
        -self.gg2 * self.s2 / self.wa + self.gg2 * self.c2 / (self.wq - self.wa) - self.g2 / (self.wa - self.wm)
            - 2.0 * self.g2 / (self.wa + self.wm)
    }

    /// Resonance shift of the (g20, e11) pair.
    fn delta_ghz(&self) -> f64 {
        4.0 * self.gg2 * self.c2 * (1.0 / self.wm - 1.0 / (2.0 * self.wa - self.wm)) + 2.0 * self.g2 / (self.wa - self.wm)
    }
}

/// Resonance shift and coupling of `(e00, g11)`; shifts evaluated at `p.omega_q`.
///
/// Extras: `A`, `B` and `delta_self_consistent = A / (1 + B)`, the resonance
/// shift with the first-order dependence of the shifts on `omega_q` resummed.
pub fn closed_form_bell(p: &SystemParams) -> Result<PerturbationReport> {
    let t = Terms::new(p)?;
    t.no_mode_degeneracy()?;
    t.qubit_off_photon()?;
    let wa2m = 2.0 * t.wa + t.wm;
    let a = -2.0 * t.gg2 * t.c2 * (1.0 / t.wm + 1.0 / wa2m) - 2.0 * t.g2 / (t.wa + t.wm);
    let b = -2.0 * t.gg2 * t.c2 * (1.0 / (t.wm * t.wm) + 1.0 / (wa2m * wa2m));
    Ok(PerturbationReport {
        pair: ResonantPair::Bell.labels(),
        shift_initial: t.eps_e00(),
        shift_final: t.eps_g11(),
        delta: a,
        g_eff: 2.0 * t.gg2 * t.g * t.sin2 / (t.wm * (t.wa - t.wm)),
        paths: Vec::new(),
        method: Method::ClosedForm,
        extras: vec![("A", a), ("B", b), ("delta_self_consistent", a / (1.0 + b))],
    })
}

/// Resonance shift and leading-order coupling of `(g20, e11)`; shifts at `p.omega_q`.
///
/// `g_eff = -2 sqrt(2) G^2 g sin(2 theta) / (omega_m (omega_a + omega_m))` is the
/// exact leading order of the 18-path sum. Extra `g_eff_alt` carries the variant
/// with the additional factor `(omega_a + 3 omega_m) / (2 omega_a)`.
pub fn closed_form_ghz(p: &SystemParams) -> Result<PerturbationReport> {
    let t = Terms::new(p)?;
    t.no_mode_degeneracy()?;
    t.require(2.0 * t.wa == t.wm, "2 omega_a = omega_m")?;
    t.qubit_off_photon()?;
    let g_eff = -2.0 * SQRT_2 * t.gg2 * t.g * t.sin2 / (t.wm * (t.wa + t.wm));
    let alt = -SQRT_2 * t.gg2 * t.g * t.sin2 * (t.wa + 3.0 * t.wm) / (t.wa * t.wm * (t.wa + t.wm));
    Ok(PerturbationReport {
        pair: ResonantPair::Ghz.labels(),
        shift_initial: t.eps_g20(),
        shift_final: t.eps_e11(),
        delta: t.delta_ghz(),
        g_eff,
        paths: Vec::new(),
        method: Method::ClosedForm,
        extras: vec![("g_eff_alt", alt)],
    })
}

/// Two-photon swap `(e00, g20)` near `omega_q = 2 omega_a`; shifts at `p.omega_q`.
///
/// `delta` carries no `theta` dependence; it equals the general second-order
/// result only at `theta = pi/4`.
pub fn closed_form_two_photon(p: &SystemParams) -> Result<PerturbationReport> {
    let t = Terms::new(p)?;
    t.no_mode_degeneracy()?;
    t.qubit_off_photon()?;
    Ok(PerturbationReport {
        pair: ResonantPair::TwoPhoton.labels(),
        shift_initial: t.eps_e00(),
        shift_final: t.eps_g20(),
        delta: -2.0 * t.gg2 / t.wa - 2.0 * t.g2 / (t.wa + t.wm) + 2.0 * t.g2 / (t.wa - t.wm),
        g_eff: -SQRT_2 * t.gg2 * t.sin2 / t.wa,
        paths: Vec::new(),
        method: Method::ClosedForm,
        extras: Vec::new(),
    })
}

/// Qubit-magnon swap `(g10, e01)` near `omega_q = omega_a - omega_m`; shifts at `p.omega_q`.
///
/// `delta` is the resonance shift of this pair. Extra `delta_ghz` carries the
/// (g20, e11) shift, which differs by `2 G^2 cos^2(theta) (1/omega_m - 1/(2 omega_a - omega_m))`.
pub fn closed_form_qubit_magnon(p: &SystemParams) -> Result<PerturbationReport> {
    let t = Terms::new(p)?;
    t.no_mode_degeneracy()?;
    t.require(2.0 * t.wa == t.wm, "2 omega_a = omega_m")?;
    t.qubit_off_photon()?;
    let delta = 2.0 * t.gg2 * t.c2 * (1.0 / t.wm - 1.0 / (2.0 * t.wa - t.wm)) + 2.0 * t.g2 / (t.wa - t.wm);
    Ok(PerturbationReport {
        pair: ResonantPair::QubitMagnon.labels(),
        shift_initial: t.eps_g10(),
        shift_final: t.eps_e01(),
        delta,
        g_eff: -2.0 * t.gg2 * t.g * t.sin2 / (t.wm * (t.wa + t.wm)),
        paths: Vec::new(),
        method: Method::ClosedForm,
        extras: vec![("delta_ghz", t.delta_ghz())],
    })
}

/// Direct swap `(e00, g10)` at `omega_q = omega_a` with coupling `G cos(theta)`.
pub fn closed_form_single_photon(p: &SystemParams) -> Result<PerturbationReport> {
    let t = Terms::new(p)?;
    Ok(PerturbationReport {
        pair: ResonantPair::SinglePhoton.labels(),
        shift_initial: f64::NAN,
        shift_final: f64::NAN,
        delta: 0.0,
        g_eff: p.big_g * t.c2.sqrt(),
        paths: Vec::new(),
        method: Method::ClosedForm,
        extras: Vec::new(),
    })
}

/// Which coupling a validity sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Vary {
    G,
    BigG,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidityRow {
    pub value: f64,
    pub delta_closed: f64,
    pub delta_numeric: f64,
    pub two_g_closed: f64,
    pub two_g_numeric: f64,
}

impl ValidityRow {
    pub fn delta_rel_error(&self) -> f64 {
        ((self.delta_closed - self.delta_numeric) / self.delta_numeric).abs()
    }

    pub fn g_rel_error(&self) -> f64 {
        ((self.two_g_closed - self.two_g_numeric) / self.two_g_numeric).abs()
    }
}

/// Closed-form versus crossing-finder `(delta, 2|g_eff|)` at one coupling value.
pub fn validity_point(p: &SystemParams, pair: ResonantPair, vary: Vary, value: f64) -> Result<ValidityRow> {
    let mut q = *p;
    match vary {
        Vary::G => q.g = value,
        Vary::BigG => q.big_g = value,
    }
    let labels = pair.labels();
    let q = q.with_omega_q(bare_resonance(&q, labels)?);
    let closed = pair.closed_form(&q)?;
    let report = find_avoided_crossing(&q, labels, default_bracket(&q, labels)?, &CrossingOptions::default())?;
    Ok(ValidityRow {
        value,
        delta_closed: closed.delta,
        delta_numeric: report.delta_numeric,
        two_g_closed: 2.0 * closed.g_eff.abs(),
        two_g_numeric: 2.0 * report.g_eff_numeric,
    })
}

pub fn validity_sweep(p: &SystemParams, pair: ResonantPair, vary: Vary, values: &[f64]) -> Result<Vec<ValidityRow>> {
    values.iter().map(|&v| validity_point(p, pair, vary, v)).collect()
}
