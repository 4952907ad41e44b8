//! Exact diagonalization, branch tracking and avoided-crossing extraction.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{BareLabel, CMatrix, OperatorMatrix, StateVector, Truncation, C64};
use crate::hamiltonian::{RealHamiltonian, SystemParams};
use crate::linalg;

/// Overlap ties closer than this keep the previous branch assignment.
const HYSTERESIS_TOL: f64 = 1e-9;

/// Eigenpairs of a Hermitian operator, energies ascending.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    trunc: Truncation,
    energies: Vec<f64>,
    /// Eigenvectors as columns, in bare-basis coordinates.
    vectors: CMatrix,
    /// `max_n |H v_n - E_n v_n| / max(1, |H|)`.
    pub residual: f64,
    /// `max |U^dag U - 1|`.
    pub orthonormality_error: f64,
}

/// The eigenvector with maximal overlap on a bare label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackedLevel {
    pub label: BareLabel,
    pub index: usize,
    pub energy: f64,
    pub overlap: f64,
}

impl EigenSystem {
    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    /// `|<label|E_n>|^2`.
    pub fn overlap(&self, label: BareLabel, n: usize) -> Result<f64> {
        Ok(self.vectors[(self.trunc.index(label)?, n)].norm_sqr())
    }

    pub fn track(&self, label: BareLabel) -> Result<TrackedLevel> {
        let row = self.trunc.index(label)?;
        let (index, overlap) = argmax((0..self.dim()).map(|n| self.vectors[(row, n)].norm_sqr()));
        Ok(TrackedLevel { label, index, energy: self.energies[index], overlap })
    }

    pub fn overlaps(&self, labels: &[BareLabel]) -> Result<Vec<TrackedLevel>> {
        labels.iter().map(|&l| self.track(l)).collect()
    }

    pub fn eigenstate(&self, n: usize) -> Result<StateVector> {
        StateVector::new(self.trunc, self.vectors.column(n).into_owned())
    }
}

fn argmax<I: Iterator<Item = f64>>(it: I) -> (usize, f64) {
    it.enumerate().fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

/// Full eigendecomposition with residual and unitarity diagnostics.
pub fn diagonalize(h: &OperatorMatrix) -> Result<EigenSystem> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian(linalg::hermitian_deviation(h.matrix())));
    }
    let (energies, vectors) = linalg::eigh(h.matrix())?;
    let n = energies.len();
    let scale = h.max_abs().max(1.0);
    let hv = h.matrix() * &vectors;
    let mut residual: f64 = 0.0;
    for k in 0..n {
        let r = (hv.column(k) - vectors.column(k) * C64::new(energies[k], 0.0)).norm();
        residual = residual.max(r / scale);
    }
    let gram = vectors.adjoint() * &vectors;
    let orthonormality_error = (gram - CMatrix::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(EigenSystem { trunc: h.truncation(), energies, vectors, residual, orthonormality_error })
}

/// Energies and tracked branches along a qubit-frequency grid.
#[derive(Clone, Debug)]
pub struct SpectrumScan {
    pub labels: Vec<BareLabel>,
    pub omega_q: Vec<f64>,
    /// `energies[k]` is the ascending spectrum at `omega_q[k]`.
    pub energies: Vec<Vec<f64>>,
    /// `tracked[k][j]` follows `labels[j]` at `omega_q[k]`.
    pub tracked: Vec<Vec<TrackedLevel>>,
}

/// Diagonalizes along `grid`, following each label by maximal overlap with
/// hysteresis: near-ties keep the previous assignment.
pub fn scan_spectrum(params: &SystemParams, grid: &[f64], labels: &[BareLabel]) -> Result<SpectrumScan> {
    params.validate()?;
    if grid.is_empty() || grid.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::InvalidGrid("qubit-frequency grid must be non-empty, finite and positive".into()));
    }
    let rows: Vec<usize> = labels.iter().map(|&l| params.trunc.index(l)).collect::<Result<_>>()?;
    let model = RealHamiltonian::new(params);
    let mut scan = SpectrumScan { labels: labels.to_vec(), omega_q: grid.to_vec(), energies: Vec::new(), tracked: Vec::new() };
    let mut previous: Option<Vec<usize>> = None;
    for &w in grid {
        let (energies, vectors) = linalg::eigh_real(&model.at(w))?;
        let mut levels = Vec::with_capacity(labels.len());
        for (j, (&label, &row)) in labels.iter().zip(&rows).enumerate() {
            let ovl = |n: usize| vectors[(row, n)].powi(2);
            let (mut index, _) = argmax((0..energies.len()).map(ovl));
            if let Some(prev) = &previous {
                if ovl(prev[j]) >= ovl(index) - HYSTERESIS_TOL {
                    index = prev[j];
                }
            }
            levels.push(TrackedLevel { label, index, energy: energies[index], overlap: ovl(index) });
        }
        previous = Some(levels.iter().map(|l| l.index).collect());
        scan.energies.push(energies);
        scan.tracked.push(levels);
    }
    Ok(scan)
}

/// Qubit frequency at which the bare energies of the pair coincide.
pub fn bare_resonance(params: &SystemParams, pair: (BareLabel, BareLabel)) -> Result<f64> {
    let (a, b) = pair;
    let dq = a.qubit.index() as f64 - b.qubit.index() as f64;
    if dq == 0.0 {
        return Err(Error::NoResonance(a, b));
    }
    let modes = |l: BareLabel| params.omega_a * l.n_a as f64 + params.omega_m * l.n_m as f64;
    let w = (modes(b) - modes(a)) / dq;
    if w <= 0.0 {
        return Err(Error::NoResonance(a, b));
    }
    Ok(w)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossingOptions {
    pub coarse_points: usize,
    /// Golden-section stop: bracket width below `xtol_rel * |omega_q|`.
    pub xtol_rel: f64,
    pub max_iterations: usize,
    /// Each branch of the pair must carry at least this weight on the pair at the minimum.
    pub min_pair_weight: f64,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        CrossingOptions { coarse_points: 201, xtol_rel: 1e-12, max_iterations: 300, min_pair_weight: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossingReport {
    pub pair: (BareLabel, BareLabel),
    pub bare_resonance: f64,
    pub omega_q_star: f64,
    pub gap_min: f64,
    /// Half the minimum gap.
    pub g_eff_numeric: f64,
    /// Sign of the effective coupling in `H_eff = [[E, g], [g, E]]` on (pair.0, pair.1).
    pub coupling_sign: f64,
    /// `omega_q_star - bare_resonance`.
    pub delta_numeric: f64,
    pub lower_index: usize,
    pub upper_index: usize,
    pub lower_energy: f64,
    pub upper_energy: f64,
    /// Smaller of the two branch weights on the pair.
    pub pair_weight: f64,
}

impl CrossingReport {
    pub fn signed_g_eff(&self) -> f64 {
        self.coupling_sign * self.g_eff_numeric
    }

    pub fn mean_energy(&self) -> f64 {
        0.5 * (self.lower_energy + self.upper_energy)
    }
}

struct PairProbe {
    gap: f64,
    lower: usize,
    upper: usize,
    lower_energy: f64,
    upper_energy: f64,
    weight: f64,
    sign: f64,
}

fn probe(model: &RealHamiltonian, rows: (usize, usize), w: f64) -> Result<PairProbe> {
    let (energies, vectors) = linalg::eigh_real(&model.at(w))?;
    Ok(probe_eigen(&energies, &vectors, rows))
}

fn probe_eigen(energies: &[f64], vectors: &DMatrix<f64>, rows: (usize, usize)) -> PairProbe {
    let weight = |n: usize| vectors[(rows.0, n)].powi(2) + vectors[(rows.1, n)].powi(2);
    let mut best = [(usize::MAX, f64::NEG_INFINITY); 2];
    for n in 0..energies.len() {
        let w = weight(n);
        if w > best[0].1 {
            best[1] = best[0];
            best[0] = (n, w);
        } else if w > best[1].1 {
            best[1] = (n, w);
        }
    }
    let (lower, upper) = if best[0].0 < best[1].0 { (best[0].0, best[1].0) } else { (best[1].0, best[0].0) };
    let prod = vectors[(rows.0, lower)] * vectors[(rows.1, lower)];
    PairProbe {
        gap: energies[upper] - energies[lower],
        lower,
        upper,
        lower_energy: energies[lower],
        upper_energy: energies[upper],
        weight: best[1].1,
        sign: if prod > 0.0 { -1.0 } else { 1.0 },
    }
}

/// Dressed energies that define the rotating frame of a protocol step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct FrameLevels {
    /// Level with maximal weight on `g00`.
    pub ground: f64,
    /// Mean of the two levels carrying the pair.
    pub pair_mean: f64,
    /// Level with maximal weight on `pair.0`.
    pub source: f64,
}

pub(crate) fn frame_levels(params: &SystemParams, pair: (BareLabel, BareLabel)) -> Result<FrameLevels> {
    let t = params.trunc;
    let rows = (t.index(pair.0)?, t.index(pair.1)?);
    let g00 = t.index(BareLabel::g(0, 0))?;
    let (energies, vectors) = linalg::eigh_real(&RealHamiltonian::new(params).at(params.omega_q))?;
    let pr = probe_eigen(&energies, &vectors, rows);
    let level = |row: usize| energies[argmax((0..energies.len()).map(|n| vectors[(row, n)].powi(2))).0];
    Ok(FrameLevels {
        ground: level(g00),
        pair_mean: 0.5 * (pr.lower_energy + pr.upper_energy),
        source: level(rows.0),
    })
}

/// Default search bracket: centered on the bare resonance plus a
/// second-order estimate of the shift.
pub fn default_bracket(params: &SystemParams, pair: (BareLabel, BareLabel)) -> Result<(f64, f64)> {
    let w0 = bare_resonance(params, pair)?;
    let p = params.with_omega_q(w0);
    let shift = crate::perturbation::pair_shift_estimate(&p, pair)?;
    let center = w0 + shift;
    let half = 0.05 * params.reference_frequency() + 3.0 * shift.abs();
    Ok(((center - half).max(1e-3 * w0), center + half))
}

/// Locates the minimum gap between the two branches carrying the pair.
pub fn find_avoided_crossing(
    params: &SystemParams,
    pair: (BareLabel, BareLabel),
    bracket: (f64, f64),
    opts: &CrossingOptions,
) -> Result<CrossingReport> {
    params.validate()?;
    let (lo, hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) || opts.coarse_points < 3 {
        return Err(Error::InvalidGrid(format!("bad bracket [{lo}, {hi}]")));
    }
    let w0 = bare_resonance(params, pair)?;
    let rows = (params.trunc.index(pair.0)?, params.trunc.index(pair.1)?);
    let model = RealHamiltonian::new(params);
    let n = opts.coarse_points;
    let xs: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let gaps: Vec<f64> = xs.iter().map(|&w| probe(&model, rows, w).map(|p| p.gap)).collect::<Result<_>>()?;
    let (kmin, _) = argmax(gaps.iter().map(|g| -g));
    if kmin == 0 || kmin == n - 1 {
        return Err(Error::NoMinimumInBracket { lo, hi });
    }
    let minima = (1..n - 1).filter(|&k| gaps[k] < gaps[k - 1] && gaps[k] <= gaps[k + 1]).count();
    if minima > 1 {
        return Err(Error::MultipleMinima { lo, hi });
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (xs[kmin - 1], xs[kmin + 1]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = probe(&model, rows, c)?.gap;
    let mut fd = probe(&model, rows, d)?.gap;
    for _ in 0..opts.max_iterations {
        if (b - a) <= opts.xtol_rel * 0.5 * (a + b).abs() {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = probe(&model, rows, c)?.gap;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = probe(&model, rows, d)?.gap;
        }
    }
    let star = if fc <= fd { c } else { d };
    let pr = probe(&model, rows, star)?;
    if pr.weight < opts.min_pair_weight {
        return Err(Error::AmbiguousBranch { omega_q: star, weight: pr.weight });
    }
    Ok(CrossingReport {
        pair,
        bare_resonance: w0,
        omega_q_star: star,
        gap_min: pr.gap,
        g_eff_numeric: 0.5 * pr.gap,
        coupling_sign: pr.sign,
        delta_numeric: star - w0,
        lower_index: pr.lower,
        upper_index: pr.upper,
        lower_energy: pr.lower_energy,
        upper_energy: pr.upper_energy,
        pair_weight: pr.weight,
    })
}

/// [`find_avoided_crossing`] with [`default_bracket`] and default options.
pub fn locate_crossing(params: &SystemParams, pair: (BareLabel, BareLabel)) -> Result<CrossingReport> {
    find_avoided_crossing(params, pair, default_bracket(params, pair)?, &CrossingOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_full;

    const BELL: (BareLabel, BareLabel) = (BareLabel::e(0, 0), BareLabel::g(1, 1));
    const GHZ: (BareLabel, BareLabel) = (BareLabel::g(2, 0), BareLabel::e(1, 1));

    #[test]
    fn uncoupled_spectrum_is_bare() {
        let p = SystemParams::bell_default().with_couplings(0.0, 0.0).with_omega_q(2.5);
        let eig = diagonalize(&build_full(&p).unwrap()).unwrap();
        let mut bare: Vec<f64> =
            crate::fock::build_basis(p.trunc).iter().map(|l| l.bare_energy(p.omega_a, p.omega_m, p.omega_q)).collect();
        bare.sort_by(f64::total_cmp);
        for (e, b) in eig.energies().iter().zip(&bare) {
            assert!((e - b).abs() < 1e-12);
        }
        assert!(eig.residual < 1e-12);
        assert!(eig.orthonormality_error < 1e-12);
    }

    #[test]
    fn ground_state_tracks_g00() {
        let p = SystemParams::bell_default();
        let eig = diagonalize(&build_full(&p).unwrap()).unwrap();
        let t = eig.track(BareLabel::g(0, 0)).unwrap();
        assert_eq!(t.index, 0);
        assert!(t.overlap > 0.95);
    }

    #[test]
    fn resonance_conditions() {
        let b = SystemParams::bell_default();
        assert_eq!(bare_resonance(&b, BELL).unwrap(), 2.7);
        let g = SystemParams::ghz_default();
        assert!((bare_resonance(&g, GHZ).unwrap() - 1.4).abs() < 1e-15);
        assert_eq!(bare_resonance(&g, (BareLabel::e(0, 0), BareLabel::g(2, 0))).unwrap(), 4.8);
        assert!(matches!(
            bare_resonance(&g, (BareLabel::g(0, 0), BareLabel::g(1, 1))),
            Err(Error::NoResonance(..))
        ));
    }

    #[test]
    fn bell_crossing_default_point() {
        let p = SystemParams::bell_default();
        let r = locate_crossing(&p, BELL).unwrap();
        eprintln!("{r:?}");
        // Closed form: delta = -1.59925e-2, |g_eff| = 1.6807e-3.
        assert!(r.delta_numeric < 0.0 && (r.delta_numeric + 1.59925e-2).abs() < 0.1 * 1.59925e-2);
        assert!((r.g_eff_numeric - 1.6807e-3).abs() < 0.1 * 1.6807e-3);
        assert_eq!(r.coupling_sign, -1.0);
        assert!(r.pair_weight > 0.9);
    }

    #[test]
    fn exact_crossing_without_coupling() {
        let p = SystemParams::bell_default().with_couplings(0.0, 0.0);
        let r = find_avoided_crossing(&p, BELL, (2.6, 2.8), &CrossingOptions::default()).unwrap();
        assert!(r.gap_min < 1e-10);
        assert!((r.omega_q_star - 2.7).abs() < 1e-9);
    }

    #[test]
    fn bracket_without_minimum() {
        let p = SystemParams::bell_default();
        assert!(matches!(
            find_avoided_crossing(&p, BELL, (2.2, 2.5), &CrossingOptions::default()),
            Err(Error::NoMinimumInBracket { .. })
        ));
    }

    #[test]
    fn scan_keeps_branch_through_exact_crossing() {
        let p = SystemParams::bell_default().with_couplings(0.0, 0.0);
        let grid: Vec<f64> = (0..21).map(|k| 2.6 + 0.01 * k as f64).collect();
        let scan = scan_spectrum(&p, &grid, &[BELL.0, BELL.1]).unwrap();
        for (k, levels) in scan.tracked.iter().enumerate() {
            assert!((levels[0].energy - grid[k]).abs() < 1e-12);
            assert!((levels[1].energy - 2.7).abs() < 1e-12);
        }
    }
}
