//! Run configuration: workflow preset, then `key = value` file, then flags.

use std::f64::consts::PI;
use std::path::PathBuf;

use magnonic::dynamics::DecoherenceRates;
use magnonic::protocols::{ProtocolKind, ProtocolSpec, Switching, TimingSource};
use magnonic::{SystemParams, Truncation};

use crate::CliError;

/// Parses `1.2`, `pi`, `pi/4`, `0.25pi`, `0.5*pi` or `3*pi/4`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let bad = || format!("cannot parse angle '{s}'");
    let Some(pos) = s.find("pi") else {
        return s.parse().map_err(|_| bad());
    };
    let (head, tail) = (s[..pos].trim_end_matches('*').trim(), s[pos + 2..].trim());
    let factor: f64 = if head.is_empty() { 1.0 } else { head.parse().map_err(|_| bad())? };
    let divisor: f64 = match tail.strip_prefix('/') {
        Some(d) => d.trim().parse().map_err(|_| bad())?,
        None if tail.is_empty() => 1.0,
        None => return Err(bad()),
    };
    Ok(factor * PI / divisor)
}

/// Parses `n_a,n_m` or a single cutoff for both modes.
pub fn parse_truncation(s: &str) -> Result<Truncation, String> {
    let parts: Vec<&str> = s.split([',', 'x']).map(str::trim).collect();
    let nums: Vec<usize> = parts.iter().map(|p| p.parse().map_err(|_| format!("bad truncation '{s}'"))).collect::<Result<_, _>>()?;
    let (na, nm) = match nums[..] {
        [n] => (n, n),
        [na, nm] => (na, nm),
        _ => return Err(format!("bad truncation '{s}'")),
    };
    Truncation::new(na, nm).map_err(|e| e.to_string())
}

/// Inclusive grid `lo:hi:n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n).map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.n - 1) as f64).collect()
    }
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("bad grid '{s}', expected lo:hi:n");
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts[..] else { return Err(bad()) };
        let g = GridSpec {
            lo: lo.trim().parse().map_err(|_| bad())?,
            hi: hi.trim().parse().map_err(|_| bad())?,
            n: n.trim().parse().map_err(|_| bad())?,
        };
        if !(g.lo.is_finite() && g.hi.is_finite()) || g.n == 0 || (g.n > 1 && g.hi <= g.lo) {
            return Err(bad());
        }
        Ok(g)
    }
}

/// Optional settings shared by the config file and the command line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub workflow: Option<ProtocolKind>,
    pub g: Option<f64>,
    pub big_g: Option<f64>,
    pub theta: Option<f64>,
    pub omega_a: Option<f64>,
    pub omega_m: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_a: Option<f64>,
    pub kappa_m: Option<f64>,
    pub gamma: Option<f64>,
    pub phi: Option<f64>,
    pub trunc: Option<Truncation>,
    pub timing: Option<TimingSource>,
    pub switching: Option<Switching>,
    pub jobs: Option<usize>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
}

macro_rules! take {
    ($self:ident, $other:ident; $($f:ident),*) => { $( if $other.$f.is_some() { $self.$f = $other.$f.clone(); } )* };
}

impl Overrides {
    /// Fields set in `other` win.
    pub fn merge(&mut self, other: &Overrides) {
        take!(self, other; workflow, g, big_g, theta, omega_a, omega_m, kappa, kappa_a, kappa_m, gamma, phi, trunc,
              timing, switching, jobs, samples, out);
    }

    /// Flat `key = value` lines; `#` starts a comment.
    pub fn parse_file(text: &str) -> Result<Overrides, CliError> {
        let mut o = Overrides::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| CliError::Config(format!("config line {}: {msg}", n + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            o.set(key.trim(), value.trim()).map_err(err)?;
        }
        Ok(o)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let num = |v: &str| v.parse::<f64>().map_err(|_| format!("{key}: not a number: '{v}'"));
        let int = |v: &str| v.parse::<usize>().map_err(|_| format!("{key}: not a count: '{v}'"));
        match key {
            "workflow" => self.workflow = Some(value.parse().map_err(|e: magnonic::Error| e.to_string())?),
            "g" => self.g = Some(num(value)?),
            "G" => self.big_g = Some(num(value)?),
            "theta" => self.theta = Some(parse_angle(value)?),
            "omega_a" => self.omega_a = Some(num(value)?),
            "omega_m" => self.omega_m = Some(num(value)?),
            "kappa" => self.kappa = Some(num(value)?),
            "kappa_a" => self.kappa_a = Some(num(value)?),
            "kappa_m" => self.kappa_m = Some(num(value)?),
            "gamma" => self.gamma = Some(num(value)?),
            "phi" => self.phi = Some(parse_angle(value)?),
            "trunc" => self.trunc = Some(parse_truncation(value)?),
            "timing" => self.timing = Some(value.parse().map_err(|e: magnonic::Error| e.to_string())?),
            "switching" => self.switching = Some(value.parse().map_err(|e: magnonic::Error| e.to_string())?),
            "jobs" => self.jobs = Some(int(value)?),
            "samples" => self.samples = Some(int(value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }
}

/// Fully resolved settings for one command.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub workflow: ProtocolKind,
    /// `true` when the workflow came from the file or a flag.
    pub workflow_explicit: bool,
    pub params: SystemParams,
    pub rates: DecoherenceRates,
    /// `true` when any rate was given.
    pub rates_explicit: bool,
    pub phi: f64,
    pub timing: TimingSource,
    pub switching: Switching,
    pub jobs: usize,
    pub samples: usize,
    pub out: Option<PathBuf>,
    /// Explicit coupling overrides, kept for commands with their own presets.
    pub g_override: Option<f64>,
    pub big_g_override: Option<f64>,
}

impl RunConfig {
    pub fn resolve(o: &Overrides) -> Result<RunConfig, CliError> {
        let workflow = o.workflow.unwrap_or(ProtocolKind::BellPhotonMagnon);
        let mut params = workflow.default_params();
        if let Some(x) = o.g {
            params.g = x;
        }
        if let Some(x) = o.big_g {
            params.big_g = x;
        }
        if let Some(x) = o.theta {
            params.theta = x;
        }
        if let Some(x) = o.omega_a {
            params.omega_a = x;
        }
        if let Some(x) = o.omega_m {
            params.omega_m = x;
        }
        if let Some(t) = o.trunc {
            params.trunc = t;
        }
        params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let k = o.kappa.unwrap_or(0.0);
        let rates = DecoherenceRates::new(o.kappa_a.unwrap_or(k), o.kappa_m.unwrap_or(k), o.gamma.unwrap_or(k))
            .map_err(|e| CliError::Config(e.to_string()))?;
        let phi = o.phi.unwrap_or(0.0);
        let jobs = o.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        let cfg = RunConfig {
            workflow,
            workflow_explicit: o.workflow.is_some(),
            params,
            rates,
            rates_explicit: o.kappa.is_some() || o.kappa_a.is_some() || o.kappa_m.is_some() || o.gamma.is_some(),
            phi,
            timing: o.timing.unwrap_or(workflow.default_timing()),
            switching: o.switching.unwrap_or(Switching::Sudden),
            jobs: jobs.max(1),
            samples: o.samples.unwrap_or(101),
            out: o.out.clone(),
            g_override: o.g,
            big_g_override: o.big_g,
        };
        cfg.protocol_spec().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.samples < 2 {
            return Err(CliError::Config("samples must be at least 2".into()));
        }
        Ok(cfg)
    }

    pub fn protocol_spec(&self) -> ProtocolSpec {
        ProtocolSpec {
            params: self.params,
            rates: self.rates,
            phi: self.phi,
            timing: self.timing,
            switching: self.switching,
            samples_per_step: self.samples,
            ..ProtocolSpec::new(self.workflow)
        }
    }
}
