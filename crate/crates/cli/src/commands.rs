//! One function per subcommand; each returns the table to write.

use rayon::prelude::*;

use magnonic::dynamics::DecoherenceRates;
use magnonic::perturbation::{validity_point, ResonantPair, Vary};
use magnonic::protocols::{rabi_oscillation, run_protocol, ProtocolKind, ProtocolSpec};
use magnonic::spectral::{default_bracket, find_avoided_crossing, scan_spectrum, CrossingOptions};
use magnonic::table::{format_float, params_meta, rates_meta, Cell, Table};
use magnonic::SystemParams;

use crate::config::{GridSpec, RunConfig};
use crate::CliError;

/// `(g, G)` presets of the Rabi comparison, in units of the reference frequency.
pub const RABI_PRESETS: [(f64, f64); 4] = [(0.1, 0.1), (0.1, 0.05), (0.05, 0.1), (0.05, 0.05)];

/// Decoherence rates of the fidelity-dynamics comparison, in units of the reference frequency.
pub const DYNAMICS_KAPPAS: [f64; 4] = [0.0, 1e-6, 1e-5, 1e-4];

/// Sweep rate used when none is configured, in units of the reference frequency.
pub const SWEEP_KAPPA: f64 = 1e-5;

/// The pair whose crossing or swap a workflow is built around.
pub fn workflow_pair(kind: ProtocolKind) -> ResonantPair {
    match kind {
        ProtocolKind::BellPhotonMagnon => ResonantPair::Bell,
        ProtocolKind::Ghz => ResonantPair::Ghz,
        ProtocolKind::BellQubitMagnon => ResonantPair::QubitMagnon,
    }
}

fn header(t: &mut Table, dataset: &str, cfg: &RunConfig, params: &SystemParams) {
    t.meta("dataset", dataset).meta("workflow", cfg.workflow);
    params_meta(t, params);
}

fn sanitize(msg: &str) -> String {
    msg.replace([',', '\n'], ";")
}

pub fn cmd_spectrum(cfg: &RunConfig, range: Option<(f64, f64)>, points: usize) -> Result<Table, CliError> {
    let p = cfg.params;
    let pair = workflow_pair(cfg.workflow);
    let labels = pair.labels();
    let (lo, hi) = match range {
        Some(r) => r,
        None => default_bracket(&p, labels)?,
    };
    if points < 3 {
        return Err(CliError::Config("spectrum needs at least 3 points".into()));
    }
    let report = find_avoided_crossing(&p, labels, (lo, hi), &CrossingOptions::default())?;
    let grid: Vec<f64> = (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect();
    let scan = scan_spectrum(&p, &grid, &[labels.0, labels.1])?;

    let (a, b) = (labels.0.to_string(), labels.1.to_string());
    let mut t = Table::new([
        "omega_q".to_string(),
        format!("E_{a}"),
        format!("E_{b}"),
        "gap".into(),
        format!("overlap_{a}"),
        format!("overlap_{b}"),
    ]);
    header(&mut t, "dressed levels across the avoided crossing", cfg, &p);
    t.meta("pair", format!("{a}-{b}"))
        .meta("timing", "numeric")
        .meta_float("bare_resonance", report.bare_resonance)
        .meta_float("omega_q_star", report.omega_q_star)
        .meta_float("delta_numeric", report.delta_numeric)
        .meta_float("gap_min", report.gap_min)
        .meta_float("g_eff_numeric", report.signed_g_eff());
    for (k, &w) in scan.omega_q.iter().enumerate() {
        let (la, lb) = (scan.tracked[k][0], scan.tracked[k][1]);
        t.push(vec![
            w.into(),
            la.energy.into(),
            lb.energy.into(),
            (lb.energy - la.energy).abs().into(),
            la.overlap.into(),
            lb.overlap.into(),
        ])?;
    }
    Ok(t)
}

/// `dt` and all times in units of the inverse reference frequency.
pub fn cmd_rabi(cfg: &RunConfig, dt: f64, points: usize) -> Result<Table, CliError> {
    let pair = workflow_pair(cfg.workflow);
    let w_ref = cfg.params.reference_frequency();
    let presets: Vec<(f64, f64)> = if cfg.g_override.is_some() || cfg.big_g_override.is_some() {
        vec![(cfg.params.g / w_ref, cfg.params.big_g / w_ref)]
    } else {
        RABI_PRESETS.to_vec()
    };
    let (from, to) = pair.labels();
    let mut t = Table::new(["preset", "g", "G", "t", "P_full", "P_effective"]);
    header(&mut t, &format!("Rabi oscillation {from} to {to}: full versus effective model"), cfg, &cfg.params);
    t.meta("timing", cfg.timing.name()).meta_float("sample_spacing", dt);
    let mut rows = Vec::new();
    for (k, &(g, big_g)) in presets.iter().enumerate() {
        let name = char::from(b'a' + k as u8).to_string();
        let p = cfg.params.with_couplings(g * w_ref, big_g * w_ref);
        let r = rabi_oscillation(&p, pair, cfg.timing, dt / w_ref)?;
        t.meta_float(format!("preset_{name}_g"), p.g)
            .meta_float(format!("preset_{name}_G"), p.big_g)
            .meta_float(format!("preset_{name}_omega_q"), r.timing.omega_q)
            .meta_float(format!("preset_{name}_g_eff"), r.timing.g_eff)
            .meta_float(format!("preset_{name}_p_max"), r.p_max)
            .meta_float(format!("preset_{name}_t_peak"), r.t_peak)
            .meta_float(format!("preset_{name}_period_error"), r.period_error);
        let stride = r.times.len().div_ceil(points.max(2)).max(1);
        for i in (0..r.times.len()).step_by(stride) {
            rows.push(vec![
                Cell::Text(name.clone()),
                p.g.into(),
                p.big_g.into(),
                r.times[i].into(),
                r.full[i].into(),
                r.effective[i].into(),
            ]);
        }
    }
    for row in rows {
        t.push(row)?;
    }
    Ok(t)
}

/// One cell of a `(g, G)` sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub g: f64,
    pub big_g: f64,
    pub f_ideal: f64,
    pub f_dissipative: f64,
    /// `ok` or the failure message.
    pub status: String,
}

fn sweep_one(base: &ProtocolSpec, rates: DecoherenceRates, g: f64, big_g: f64) -> SweepCell {
    let mut spec = ProtocolSpec { samples_per_step: 2, ..base.clone() };
    spec.params = spec.params.with_couplings(g, big_g);
    let ideal = run_protocol(&ProtocolSpec { rates: DecoherenceRates::zero(), ..spec.clone() });
    let open = run_protocol(&ProtocolSpec { rates, ..spec });
    let mut status = Vec::new();
    let mut take = |r: magnonic::Result<magnonic::protocols::ProtocolResult>, which: &str| match r {
        Ok(r) => r.final_fidelity,
        Err(e) => {
            status.push(format!("{which}: {e}"));
            f64::NAN
        }
    };
    let f_ideal = take(ideal, "ideal");
    let f_dissipative = take(open, "dissipative");
    let status = if status.is_empty() { "ok".to_string() } else { sanitize(&status.join("; ")) };
    SweepCell { g, big_g, f_ideal, f_dissipative, status }
}

/// Runs every `(g, G)` cell on `jobs` workers; output order is `g`-major
/// regardless of scheduling.
pub fn sweep_cells(base: &ProtocolSpec, rates: DecoherenceRates, cells: &[(f64, f64)], jobs: usize) -> Result<Vec<SweepCell>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(|&(g, big_g)| sweep_one(base, rates, g, big_g)).collect()))
}

/// Grids in units of the reference frequency.
pub fn cmd_sweep(cfg: &RunConfig, g_grid: GridSpec, big_g_grid: GridSpec) -> Result<Table, CliError> {
    let w_ref = cfg.params.reference_frequency();
    let rates = if cfg.rates_explicit { cfg.rates } else { DecoherenceRates::uniform(SWEEP_KAPPA * w_ref)? };
    let cells: Vec<(f64, f64)> = g_grid
        .values()
        .into_iter()
        .flat_map(|g| big_g_grid.values().into_iter().map(move |gg| (g * w_ref, gg * w_ref)))
        .collect();
    let results = sweep_cells(&cfg.protocol_spec(), rates, &cells, cfg.jobs)?;

    let mut t = Table::new(["g", "G", "F_ideal", "F_dissipative", "status"]);
    header(&mut t, "final protocol fidelity over the (g, G) plane", cfg, &cfg.params);
    rates_meta(&mut t, &rates);
    t.meta("timing", cfg.timing.name()).meta("switching", cfg.switching).meta_float("phi", cfg.phi);
    for c in results {
        if c.status != "ok" {
            eprintln!("sweep cell g={} G={}: {}", format_float(c.g), format_float(c.big_g), c.status);
        }
        t.push(vec![c.g.into(), c.big_g.into(), c.f_ideal.into(), c.f_dissipative.into(), c.status.into()])?;
    }
    Ok(t)
}

/// `kappas` in units of the reference frequency, applied to all three channels.
pub fn cmd_fidelity_dynamics(cfg: &RunConfig, kappas: &[f64]) -> Result<Table, CliError> {
    let w_ref = cfg.params.reference_frequency();
    let mut t = Table::new(["kappa", "segment", "t", "F"]);
    header(&mut t, &format!("{} protocol fidelity versus time at several decoherence rates", cfg.workflow), cfg, &cfg.params);
    t.meta("timing", cfg.timing.name()).meta("switching", cfg.switching).meta_float("phi", cfg.phi);
    let mut rows = Vec::new();
    for &k in kappas {
        let spec = ProtocolSpec { rates: DecoherenceRates::uniform(k * w_ref)?, ..cfg.protocol_spec() };
        let r = run_protocol(&spec)?;
        t.meta(format!("final_fidelity_kappa_{}", format_float(k)), format_float(r.final_fidelity));
        let segments = r.ramps.iter().enumerate().map(|(i, x)| (format!("ramp{}", i + 2), x));
        let mut all: Vec<_> = segments.chain(r.steps.iter().enumerate().map(|(i, x)| (format!("step{}", i + 2), x))).collect();
        all.sort_by(|a, b| a.1.times[0].total_cmp(&b.1.times[0]));
        for (name, traj) in all {
            let f = traj.series("F").unwrap_or(&[]);
            for (time, fid) in traj.times.iter().zip(f) {
                rows.push(vec![(k * w_ref).into(), Cell::Text(name.clone()), (*time).into(), (*fid).into()]);
            }
        }
    }
    for row in rows {
        t.push(row)?;
    }
    Ok(t)
}

/// Couplings in units of the reference frequency. Without an explicit
/// workflow both the Bell and GHZ pairs are reported at their presets.
pub fn cmd_validity(cfg: &RunConfig, values: GridSpec) -> Result<Table, CliError> {
    let cases: Vec<(ResonantPair, SystemParams)> = if cfg.workflow_explicit {
        vec![(workflow_pair(cfg.workflow), cfg.params)]
    } else {
        [ProtocolKind::BellPhotonMagnon, ProtocolKind::Ghz]
            .into_iter()
            .map(|k| (workflow_pair(k), k.default_params().with_truncation(cfg.params.trunc)))
            .collect()
    };
    let mut t = Table::new([
        "pair",
        "vary",
        "value",
        "delta_closed",
        "delta_numeric",
        "delta_rel_error",
        "two_g_closed",
        "two_g_numeric",
        "g_rel_error",
        "status",
    ]);
    t.meta("dataset", "closed-form versus numeric resonance shift and coupling")
        .meta("timing", "closed and numeric")
        .meta("truncation", format!("{}x{}", cfg.params.trunc.n_a_max(), cfg.params.trunc.n_m_max()));
    for (pair, p) in cases {
        let w_ref = p.reference_frequency();
        t.meta(format!("{}_params", pair.name()), format!(
            "omega_a={} omega_m={} g={} G={} theta={}",
            format_float(p.omega_a),
            format_float(p.omega_m),
            format_float(p.g),
            format_float(p.big_g),
            format_float(p.theta)
        ));
        for (vary, name) in [(Vary::BigG, "G"), (Vary::G, "g")] {
            for v in values.values() {
                let row = match validity_point(&p, pair, vary, v * w_ref) {
                    Ok(r) => vec![
                        r.delta_closed.into(),
                        r.delta_numeric.into(),
                        r.delta_rel_error().into(),
                        r.two_g_closed.into(),
                        r.two_g_numeric.into(),
                        r.g_rel_error().into(),
                        "ok".into(),
                    ],
                    Err(e) => {
                        eprintln!("validity {} {name}={}: {e}", pair.name(), format_float(v));
                        let mut r: Vec<Cell> = vec![f64::NAN.into(); 6];
                        r.push(sanitize(&e.to_string()).into());
                        r
                    }
                };
                let mut full: Vec<Cell> = vec![pair.name().into(), name.into(), (v * w_ref).into()];
                full.extend(row);
                t.push(full)?;
            }
        }
    }
    Ok(t)
}

pub fn cmd_protocol(cfg: &RunConfig) -> Result<Table, CliError> {
    Ok(run_protocol(&cfg.protocol_spec())?.to_table()?)
}
