//! Library results checked against values computed independently here: a
//! hand-rolled Hamiltonian, brute-force perturbative sums and direct
//! arithmetic on the closed-form expressions.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use magnonic::dynamics::{fidelity, State};
use magnonic::hamiltonian::{build_full, build_h0, build_v};
use magnonic::perturbation::{
    closed_form_bell, closed_form_ghz, closed_form_qubit_magnon, closed_form_two_photon, second_order_shift,
    third_order_coupling,
};
use magnonic::protocols::{ideal_target, run_protocol, ProtocolKind, ProtocolSpec, TimingSource};
use magnonic::spectral::{diagonalize, find_avoided_crossing, locate_crossing, CrossingOptions};
use magnonic::{BareLabel, SystemParams};
use nalgebra::DMatrix;

const E00: BareLabel = BareLabel::e(0, 0);
const G11: BareLabel = BareLabel::g(1, 1);
const G20: BareLabel = BareLabel::g(2, 0);
const E11: BareLabel = BareLabel::e(1, 1);
const G10: BareLabel = BareLabel::g(1, 0);
const E01: BareLabel = BareLabel::e(0, 1);

/// Diagonal `H0` and off-diagonal `V` from matrix-element formulas.
struct Oracle {
    na: usize,
    nm: usize,
    e: Vec<f64>,
    v: DMatrix<f64>,
}

impl Oracle {
    fn new(p: &SystemParams) -> Self {
        let (na, nm) = (p.trunc.n_a_max() + 1, p.trunc.n_m_max() + 1);
        let dim = 2 * na * nm;
        let idx = |q: usize, a: usize, m: usize| q * na * nm + a * nm + m;
        let x = |to: usize, from: usize| -> f64 {
            if to == from + 1 {
                (from as f64 + 1.0).sqrt()
            } else if to + 1 == from {
                (from as f64).sqrt()
            } else {
                0.0
            }
        };
        let (s, c) = (p.theta.sin(), p.theta.cos());
        let mut e = vec![0.0; dim];
        let mut v = DMatrix::zeros(dim, dim);
        for q in 0..2 {
            for a in 0..na {
                for m in 0..nm {
                    let col = idx(q, a, m);
                    e[col] = p.omega_a * a as f64 + p.omega_m * m as f64 + p.omega_q * q as f64;
                    for q2 in 0..2 {
                        for a2 in 0..na {
                            for m2 in 0..nm {
                                let row = idx(q2, a2, m2);
                                let mut val = 0.0;
                                if q2 == q {
                                    val += p.g * x(a2, a) * x(m2, m);
                                    if m2 == m {
                                        let sz = if q == 1 { 1.0 } else { -1.0 };
                                        val += p.big_g * x(a2, a) * s * sz;
                                    }
                                } else if m2 == m {
                                    val += p.big_g * x(a2, a) * c;
                                }
                                v[(row, col)] = val;
                            }
                        }
                    }
                }
            }
        }
        Oracle { na, nm, e, v }
    }

    fn index(&self, l: BareLabel) -> usize {
        l.qubit.index() * self.na * self.nm + l.n_a * self.nm + l.n_m
    }

    fn shift(&self, l: BareLabel) -> f64 {
        let i = self.index(l);
        (0..self.e.len())
            .filter(|&n| n != i && self.v[(n, i)] != 0.0)
            .map(|n| self.v[(n, i)].powi(2) / (self.e[i] - self.e[n]))
            .sum()
    }

    fn third(&self, from: BareLabel, to: BareLabel) -> (f64, usize) {
        let (i, j) = (self.index(from), self.index(to));
        let mut sum = 0.0;
        let mut count = 0;
        for m in 0..self.e.len() {
            for n in 0..self.e.len() {
                if [i, j].contains(&m) || [i, j].contains(&n) {
                    continue;
                }
                let num = self.v[(j, n)] * self.v[(n, m)] * self.v[(m, i)];
                if num != 0.0 {
                    count += 1;
                    sum += num / ((self.e[i] - self.e[m]) * (self.e[i] - self.e[n]));
                }
            }
        }
        (sum, count)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn hamiltonian_matches_hand_built_matrix() {
    for p in [SystemParams::bell_default(), SystemParams::ghz_default().with_omega_q(1.7)] {
        let o = Oracle::new(&p);
        let h = build_full(&p).unwrap();
        let mut dev: f64 = 0.0;
        for r in 0..h.dim() {
            for c in 0..h.dim() {
                let expect = o.v[(r, c)] + if r == c { o.e[r] } else { 0.0 };
                dev = dev.max((h.matrix()[(r, c)].re - expect).abs() + h.matrix()[(r, c)].im.abs());
            }
        }
        assert!(dev < 1e-14, "{dev}");
    }
}

#[test]
fn e00_shift_three_terms() {
    let p = SystemParams::bell_default();
    let (g, big_g, wa, wm, wq) = (0.1f64, 0.1f64, 1.0, 1.7, 2.7);
    let s2 = FRAC_PI_4.sin().powi(2);
    let c2 = FRAC_PI_4.cos().powi(2);
    let by_hand = -big_g * big_g * s2 / wa + big_g * big_g * c2 / (wq - wa) - g * g / (wa + wm);
    assert!((by_hand + 5.7625e-3).abs() < 1e-7);
    let lib = second_order_shift(&build_h0(&p).unwrap(), &build_v(&p).unwrap(), E00).unwrap();
    assert!(rel(lib, by_hand) < 1e-10, "{lib} vs {by_hand}");
    assert!(rel(Oracle::new(&p).shift(E00), by_hand) < 1e-10);
}

#[test]
fn generic_second_order_matches_oracle_sum() {
    let p = SystemParams::ghz_default().with_omega_q(1.4);
    let (h0, v) = (build_h0(&p).unwrap(), build_v(&p).unwrap());
    let o = Oracle::new(&p);
    for l in [G20, E11, G10, E01] {
        let lib = second_order_shift(&h0, &v, l).unwrap();
        assert!(rel(lib, o.shift(l)) < 1e-12, "{l}");
    }
}

#[test]
fn third_order_sums_and_path_counts() {
    let bell = SystemParams::bell_default();
    let (sum, count) = Oracle::new(&bell).third(E00, G11);
    assert_eq!(count, 12);
    let lib = third_order_coupling(&build_h0(&bell).unwrap(), &build_v(&bell).unwrap(), E00, G11).unwrap();
    assert!(rel(lib, sum) < 1e-12);
    assert!(rel(sum, -1.6807e-3) < 0.05, "{sum}");

    let ghz = SystemParams::ghz_default().with_omega_q(1.4);
    let (sum, count) = Oracle::new(&ghz).third(G20, E11);
    assert_eq!(count, 18);
    let lib = third_order_coupling(&build_h0(&ghz).unwrap(), &build_v(&ghz).unwrap(), G20, E11).unwrap();
    assert!(rel(lib, sum) < 1e-12);
}

#[test]
fn bell_closed_form_arithmetic() {
    let (g, big_g, wa, wm) = (0.1f64, 0.1f64, 1.0f64, 1.7f64);
    let c2 = 0.5;
    let delta = -2.0 * big_g.powi(2) * c2 * (1.0 / wm + 1.0 / (2.0 * wa + wm)) - 2.0 * g * g / (wa + wm);
    let g_eff = 2.0 * big_g.powi(2) * g / (wm * (wa - wm));
    assert!((delta + 1.59925e-2).abs() < 1e-6);
    assert!((g_eff + 1.6807e-3).abs() < 1e-7);
    let r = closed_form_bell(&SystemParams::bell_default()).unwrap();
    assert!(rel(r.delta, delta) < 1e-12 && rel(r.g_eff, g_eff) < 1e-12);
}

#[test]
fn ghz_closed_form_arithmetic() {
    let (g, big_g, wa, wm) = (0.1f64, 0.1f64, 2.4f64, 1.0f64);
    let c2 = 0.5;
    let delta = 4.0 * big_g.powi(2) * c2 * (1.0 / wm - 1.0 / (2.0 * wa - wm)) + 2.0 * g * g / (wa - wm);
    assert!((delta - 2.90226e-2).abs() < 1e-6, "{delta}");
    let printed = -SQRT_2 * big_g.powi(2) * g * (wa + 3.0 * wm) / (wa * wm * (wa + wm));
    assert!((printed + 9.3587e-4).abs() < 1e-8);
    let r = closed_form_ghz(&SystemParams::ghz_default().with_omega_q(1.4)).unwrap();
    assert!(rel(r.delta, delta) < 1e-12);
    assert!(rel(r.extra("g_eff_alt").unwrap(), printed) < 1e-12);
    // Leading order of the oracle's 18-path sum.
    let p = SystemParams::ghz_default().with_couplings(0.01, 0.01).with_omega_q(1.4);
    let (sum, _) = Oracle::new(&p).third(G20, E11);
    assert!(rel(closed_form_ghz(&p).unwrap().g_eff, sum) < 1e-9, "{sum}");
}

#[test]
fn two_photon_and_qubit_magnon_arithmetic() {
    let (g, big_g, wa, wm) = (0.1f64, 0.1f64, 2.4f64, 1.0f64);
    let p = SystemParams::ghz_default();
    let tp = closed_form_two_photon(&p.with_omega_q(4.8)).unwrap();
    assert!((tp.g_eff + 5.8926e-3).abs() < 1e-7);
    assert!(rel(tp.g_eff, -SQRT_2 * big_g * big_g / wa) < 1e-12);
    let qm = closed_form_qubit_magnon(&p.with_omega_q(1.4)).unwrap();
    let g_prime = -2.0 * big_g * big_g * g / (wm * (wa + wm));
    assert!((g_prime + 5.8824e-4).abs() < 1e-8);
    assert!(rel(qm.g_eff, g_prime) < 1e-12);
    let (sum, _) = Oracle::new(&p.with_omega_q(1.4)).third(G10, E01);
    assert!(rel(sum, g_prime) < 0.05, "{sum}");
}

#[test]
fn far_detuned_eigenstates_stay_bare() {
    let p = SystemParams::bell_default().with_omega_q(5.0);
    let eig = diagonalize(&build_full(&p).unwrap()).unwrap();
    for l in [BareLabel::g(0, 0), E00, G11, G10, BareLabel::g(0, 1)] {
        assert!(eig.track(l).unwrap().overlap > 0.9, "{l}");
    }
}

#[test]
fn weak_coupling_shift_matches_closed_form() {
    let p = SystemParams::bell_default().with_couplings(0.01, 0.01);
    let r = locate_crossing(&p, (E00, G11)).unwrap();
    let closed = closed_form_bell(&p.with_omega_q(2.7)).unwrap();
    assert!(rel(r.delta_numeric, closed.delta) < 0.02, "{} vs {}", r.delta_numeric, closed.delta);
}

#[test]
fn crossing_half_gap_near_closed_form() {
    let r = locate_crossing(&SystemParams::bell_default(), (E00, G11)).unwrap();
    assert!(rel(r.g_eff_numeric, 1.6807e-3) < 0.1);
}

#[test]
fn limits_kill_couplings() {
    for theta in [0.0, PI / 2.0] {
        let mut p = SystemParams::bell_default();
        p.theta = theta;
        assert_eq!(closed_form_bell(&p).unwrap().g_eff, 0.0);
        let mut q = SystemParams::ghz_default().with_omega_q(1.4);
        q.theta = theta;
        assert_eq!(closed_form_ghz(&q).unwrap().g_eff, 0.0);
        assert_eq!(closed_form_qubit_magnon(&q).unwrap().g_eff, 0.0);
    }
    let p = SystemParams::bell_default().with_couplings(0.0, 0.1);
    let r = find_avoided_crossing(&p, (E00, G11), (2.6, 2.75), &CrossingOptions::default()).unwrap();
    assert!(r.gap_min < 1e-10, "{}", r.gap_min);
}

#[test]
fn qubit_magnon_numeric_timing_exceeds_point_nine() {
    let spec = ProtocolSpec { samples_per_step: 3, ..ProtocolSpec::new(ProtocolKind::BellQubitMagnon) };
    assert_eq!(spec.timing, TimingSource::NumericCrossing);
    let r = run_protocol(&spec).unwrap();
    assert!(r.final_fidelity > 0.9, "{}", r.final_fidelity);
}

#[test]
fn opposite_phase_target_is_nearly_orthogonal() {
    let t = magnonic::Truncation::default();
    let zero = ideal_target(ProtocolKind::BellQubitMagnon, 0.0, t).unwrap();
    let pi = ideal_target(ProtocolKind::BellQubitMagnon, PI, t).unwrap();
    assert!(fidelity(&State::Pure(zero), &pi).unwrap() < 1e-15);

    let spec = ProtocolSpec { samples_per_step: 3, ..ProtocolSpec::new(ProtocolKind::BellQubitMagnon) };
    let r = run_protocol(&spec).unwrap();
    // Flip the excited branch of the frame target to score against phi = pi.
    let mut flipped = r.frame_target.amplitudes().clone();
    let k = t.index(E01).unwrap();
    flipped[k] = -flipped[k];
    let flipped = magnonic::StateVector::new(t, flipped).unwrap();
    assert!(fidelity(&r.final_state, &flipped).unwrap() < 0.55);
}
