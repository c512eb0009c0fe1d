//! Regulation signals and workload-utilization traces.
//!
//! A regulation signal is the grid's normalized control series r(t) in
//! [-1, 1], one value per step (2 s by default), with consecutive samples
//! bounded by a per-step ramp limit. A load trace is a series of utilization
//! fractions in [0, 1] driving the latency-critical side of a server.
//!
//! Three synthetic signal archetypes are provided:
//!
//! - `Extreme` dwells at +1/-1 for extended periods (exponentially
//!   distributed dwell times) with ramp-limited transitions between them.
//! - `HighTransition` sweeps repeatedly across the full range, a
//!   ramp-limited triangle wave with small slope jitter.
//! - `Noisy` makes small frequent changes: a clipped mean-reverting random
//!   walk, ramp-limited per step.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use std::time::Duration;

/// Default broadcast period of the regulation signal.
pub const DEFAULT_STEP: Duration = Duration::from_secs(2);
/// Default per-step ramp bound on the normalized signal (0.5% of provision).
pub const DEFAULT_RAMP_LIMIT: f64 = 0.005;
/// Mean dwell time at an extreme for the `Extreme` archetype.
pub const EXTREME_MEAN_DWELL_S: f64 = 240.0;
/// Dwell cap for the `Extreme` archetype: keeps every 15-minute scoring
/// window signal-active, since correlation against a rail-flat window is
/// meaningless.
pub const EXTREME_MAX_DWELL_S: f64 = 600.0;
/// Mean-reversion rate per step for the `Noisy` archetype.
pub const NOISY_REVERSION: f64 = 0.02;
/// Innovation standard deviation per step for the `Noisy` archetype.
pub const NOISY_SIGMA: f64 = 0.003;
/// Per-step drift of the `Noisy` archetype's slowly wandering mean.
pub const NOISY_MEAN_SIGMA: f64 = 0.006;
/// Wander bound of the `Noisy` archetype's mean.
pub const NOISY_MEAN_CLIP: f64 = 0.75;
/// Relative slope jitter for the `HighTransition` archetype.
pub const HIGH_TRANSITION_JITTER: f64 = 0.1;
/// Autocorrelation of the synthetic load-trace process per trace step.
pub const TRACE_AR1_PHI: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Extreme,
    Noisy,
    HighTransition,
    Imported,
}

/// Normalized 2-second regulation control series.
#[derive(Debug, Clone)]
pub struct RegulationSignal {
    pub step: Duration,
    pub samples: Vec<f64>,
    pub ramp_limit: f64,
    pub kind: SignalKind,
}

/// Outcome of checking a signal against its range and ramp invariants.
///
/// Violations are a result, not an error: each carries the first offending
/// 0-based sample index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalValidation {
    Valid,
    RangeViolation { index: usize, value: f64 },
    RampViolation { index: usize, delta: f64 },
}

impl SignalValidation {
    pub fn is_valid(&self) -> bool {
        matches!(self, SignalValidation::Valid)
    }
}

impl RegulationSignal {
    /// Build a signal, enforcing all invariants.
    pub fn new(
        step: Duration,
        samples: Vec<f64>,
        ramp_limit: f64,
        kind: SignalKind,
    ) -> Result<Self> {
        if step.is_zero() {
            return Err(Error::Parameter("signal step must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Parameter(
                "signal must contain at least one sample".into(),
            ));
        }
        if !(ramp_limit >= 0.0) {
            return Err(Error::Parameter("ramp limit must be non-negative".into()));
        }
        let sig = RegulationSignal {
            step,
            samples,
            ramp_limit,
            kind,
        };
        match validate_signal(&sig) {
            SignalValidation::Valid => Ok(sig),
            SignalValidation::RangeViolation { index, value } => Err(Error::Validation {
                index,
                message: format!("sample {value} outside [-1, 1]"),
            }),
            SignalValidation::RampViolation { index, delta } => Err(Error::Validation {
                index,
                message: format!("step change {delta} exceeds ramp limit {ramp_limit}"),
            }),
        }
    }

    /// A constant-zero signal (useful as a no-regulation reference).
    pub fn zeros(step: Duration, n: usize, ramp_limit: f64) -> Result<Self> {
        Self::new(step, vec![0.0; n.max(1)], ramp_limit, SignalKind::Imported)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> Duration {
        Duration::from_secs_f64(self.step.as_secs_f64() * self.samples.len() as f64)
    }

    /// Sub-signal over a sample range (invariants are inherited).
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        let end = start
            .checked_add(len)
            .filter(|e| *e <= self.samples.len())
            .ok_or_else(|| Error::Parameter("signal slice out of bounds".into()))?;
        RegulationSignal::new(
            self.step,
            self.samples[start..end].to_vec(),
            self.ramp_limit,
            self.kind,
        )
    }
}

/// Series of utilization fractions in [0, 1].
#[derive(Debug, Clone)]
pub struct LoadTrace {
    pub step: Duration,
    pub samples: Vec<f64>,
    pub label: String,
}

impl LoadTrace {
    pub fn new(step: Duration, samples: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if step.is_zero() {
            return Err(Error::Parameter("trace step must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Parameter(
                "trace must contain at least one sample".into(),
            ));
        }
        if let Some((i, v)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Validation {
                index: i,
                message: format!("utilization {v} outside [0, 1]"),
            });
        }
        Ok(LoadTrace {
            step,
            samples,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> Duration {
        Duration::from_secs_f64(self.step.as_secs_f64() * self.samples.len() as f64)
    }

    /// Zero-order-hold resample: the utilization in effect at time `t`.
    pub fn sample_at(&self, t: Duration) -> f64 {
        let idx = (t.as_secs_f64() / self.step.as_secs_f64()).floor() as usize;
        self.samples[idx.min(self.samples.len() - 1)]
    }

    /// Sub-trace covering `[start, start + len)` in seconds of trace time.
    pub fn slice_time(&self, start_s: f64, len_s: f64) -> Result<Self> {
        let step_s = self.step.as_secs_f64();
        let first = (start_s / step_s).floor() as usize;
        let count = ((len_s / step_s).ceil() as usize).max(1);
        let end = first
            .checked_add(count)
            .filter(|e| *e <= self.samples.len())
            .ok_or_else(|| Error::Parameter("trace slice out of bounds".into()))?;
        LoadTrace::new(
            self.step,
            self.samples[first..end].to_vec(),
            self.label.clone(),
        )
    }
}

/// Population statistics of a load trace, in percent units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStats {
    pub mean_pct: f64,
    /// Population variance, in percent squared.
    pub variance: f64,
    pub min_pct: f64,
    pub max_pct: f64,
}

/// Check the range and ramp invariants, reporting the first violation.
///
/// At each index the range check runs before the ramp check.
pub fn validate_signal(sig: &RegulationSignal) -> SignalValidation {
    for (i, &v) in sig.samples.iter().enumerate() {
        if !(-1.0..=1.0).contains(&v) || !v.is_finite() {
            return SignalValidation::RangeViolation { index: i, value: v };
        }
        if i > 0 {
            let delta = v - sig.samples[i - 1];
            if delta.abs() > sig.ramp_limit + 1e-12 {
                return SignalValidation::RampViolation { index: i, delta };
            }
        }
    }
    SignalValidation::Valid
}

/// Generate a synthetic regulation signal.
///
/// Deterministic for a fixed `(kind, duration, step, ramp_limit, seed)`.
pub fn generate_signal(
    kind: SignalKind,
    duration: Duration,
    step: Duration,
    ramp_limit: f64,
    seed: u64,
) -> Result<RegulationSignal> {
    if kind == SignalKind::Imported {
        return Err(Error::Parameter(
            "imported signals come from import_series, not the generator".into(),
        ));
    }
    if step.is_zero() {
        return Err(Error::Parameter("signal step must be positive".into()));
    }
    if duration < step {
        return Err(Error::Parameter(
            "signal duration must be at least one step".into(),
        ));
    }
    if !(ramp_limit > 0.0 && ramp_limit <= 2.0) {
        return Err(Error::Parameter("ramp limit must lie in (0, 2]".into()));
    }
    let n = (duration.as_secs_f64() / step.as_secs_f64()).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = match kind {
        SignalKind::Extreme => gen_extreme(n, step.as_secs_f64(), ramp_limit, &mut rng),
        SignalKind::HighTransition => gen_high_transition(n, ramp_limit, &mut rng),
        SignalKind::Noisy => gen_noisy(n, ramp_limit, &mut rng),
        SignalKind::Imported => unreachable!(),
    };
    RegulationSignal::new(step, samples, ramp_limit, kind)
}

fn gen_extreme(n: usize, step_s: f64, ramp: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mean_dwell_steps = (EXTREME_MEAN_DWELL_S / step_s).max(1.0);
    let max_dwell_steps = (EXTREME_MAX_DWELL_S / step_s).max(1.0);
    let dwell = Exp::new(1.0 / mean_dwell_steps).expect("positive rate");
    let draw_dwell = |rng: &mut ChaCha8Rng| {
        dwell.sample(rng).ceil().clamp(1.0, max_dwell_steps) as u64
    };

    let mut target: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let mut x = target;
    let mut dwell_left = draw_dwell(rng);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(x);
        if (x - target).abs() < 1e-12 {
            dwell_left = dwell_left.saturating_sub(1);
            if dwell_left == 0 {
                target = -target;
            }
        } else {
            let gap = target - x;
            if gap.abs() <= ramp {
                x = target;
                dwell_left = draw_dwell(rng);
            } else {
                x += ramp * gap.signum();
            }
        }
    }
    out
}

fn gen_high_transition(n: usize, ramp: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = -1.0_f64;
    let mut dir = 1.0_f64;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(x);
        let jitter = 1.0 - HIGH_TRANSITION_JITTER * rng.random::<f64>();
        x += dir * ramp * jitter;
        if x >= 1.0 {
            x = 1.0;
            dir = -1.0;
        } else if x <= -1.0 {
            x = -1.0;
            dir = 1.0;
        }
    }
    out
}

fn gen_noisy(n: usize, ramp: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let innovation = Normal::new(0.0, NOISY_SIGMA).expect("valid sigma");
    let mean_drift = Normal::new(0.0, NOISY_MEAN_SIGMA).expect("valid sigma");
    let mut mean = 0.0_f64;
    let mut x = 0.0_f64;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(x);
        mean = (mean + mean_drift.sample(rng)).clamp(-NOISY_MEAN_CLIP, NOISY_MEAN_CLIP);
        let d = NOISY_REVERSION * (mean - x) + innovation.sample(rng);
        x = (x + d.clamp(-ramp, ramp)).clamp(-1.0, 1.0);
    }
    out
}

/// Synthesize a load trace matching requested statistics.
///
/// The trace is a clipped AR(1) process fit to (mean, variance) by a scalar
/// bias/scale fixed point, so min/max are respected exactly (clamping) while
/// the mean lands within +-1.5 percentage points and the variance within
/// +-25% relative.
pub fn generate_load_trace(
    mean_pct: f64,
    variance: f64,
    min_pct: f64,
    max_pct: f64,
    duration: Duration,
    step: Duration,
    seed: u64,
) -> Result<LoadTrace> {
    if !(0.0 <= min_pct && min_pct <= mean_pct && mean_pct <= max_pct && max_pct <= 100.0) {
        return Err(Error::Parameter(
            "need 0 <= min <= mean <= max <= 100".into(),
        ));
    }
    if !(variance >= 0.0) {
        return Err(Error::Parameter("variance must be non-negative".into()));
    }
    if step.is_zero() || duration < step {
        return Err(Error::Parameter(
            "trace duration must be at least one step".into(),
        ));
    }
    let n = (duration.as_secs_f64() / step.as_secs_f64()).floor() as usize;
    let label = format!("synthetic-{mean_pct:.2}-{variance:.2}");

    if variance == 0.0 {
        return LoadTrace::new(step, vec![mean_pct / 100.0; n], label);
    }
    // Maximum population variance attainable with this mean inside [min, max].
    let bound = (mean_pct - min_pct) * (max_pct - mean_pct);
    if variance > bound {
        return Err(Error::Parameter(format!(
            "variance {variance} impossible inside [{min_pct}, {max_pct}] with mean {mean_pct} (max {bound})"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innov = Normal::new(0.0, (1.0 - TRACE_AR1_PHI * TRACE_AR1_PHI).sqrt()).unwrap();
    let mut z = Vec::with_capacity(n);
    let mut zk: f64 = Normal::new(0.0, 1.0).unwrap().sample(&mut rng);
    for _ in 0..n {
        z.push(zk);
        zk = TRACE_AR1_PHI * zk + innov.sample(&mut rng);
    }

    let target_sd = variance.sqrt();
    let mut bias = mean_pct;
    let mut scale = target_sd;
    let mut y = vec![0.0; n];
    for _ in 0..200 {
        for (yi, zi) in y.iter_mut().zip(&z) {
            *yi = (bias + scale * zi).clamp(min_pct, max_pct);
        }
        let m = y.iter().sum::<f64>() / n as f64;
        let v = y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        let mean_ok = (m - mean_pct).abs() <= 0.5;
        let var_ok = (v - variance).abs() <= 0.10 * variance;
        if mean_ok && var_ok {
            break;
        }
        bias += mean_pct - m;
        if v > 1e-12 {
            scale *= (variance / v).sqrt().clamp(0.8, 1.25);
        } else {
            scale *= 1.5;
        }
    }
    let m = y.iter().sum::<f64>() / n as f64;
    let v = y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    if (m - mean_pct).abs() > 1.5 || (v - variance).abs() > 0.25 * variance {
        return Err(Error::Parameter(format!(
            "requested statistics unattainable: fit mean {m:.2} var {v:.2} vs requested {mean_pct:.2}/{variance:.2}"
        )));
    }
    LoadTrace::new(step, y.iter().map(|v| v / 100.0).collect(), label)
}

/// Population mean/variance/min/max of a trace, in percent units.
pub fn trace_stats(trace: &LoadTrace) -> Result<TraceStats> {
    if trace.samples.is_empty() {
        return Err(Error::Parameter("trace is empty".into()));
    }
    let n = trace.samples.len() as f64;
    let mean = trace.samples.iter().sum::<f64>() / n;
    let var = trace
        .samples
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    let min = trace.samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = trace
        .samples
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(TraceStats {
        mean_pct: mean * 100.0,
        variance: var * 1.0e4,
        min_pct: min * 100.0,
        max_pct: max * 100.0,
    })
}

/// Which CSV schema to expect when importing a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesSchema {
    /// Two columns `t_s,r` with r in [-1, 1].
    Signal,
    /// Two columns `t_s,util` with util in [0, 1].
    Trace,
}

#[derive(Debug, Clone)]
pub enum ImportedSeries {
    Signal(RegulationSignal),
    Trace(LoadTrace),
}

const SIGNAL_HEADER: &str = "t_s,r";
const TRACE_HEADER: &str = "t_s,util";

/// Import a series from CSV (UTF-8, header row required, `.` decimal point).
///
/// Signals are range-validated and carry `ramp_limit` equal to the largest
/// observed step change; traces are range-checked against [0, 1]. A file with
/// a single data row gets the schema's default step (2 s signal, 60 s trace).
pub fn import_series(path: &Path, schema: SeriesSchema) -> Result<ImportedSeries> {
    let content = fs::read_to_string(path)?;
    let expected_header = match schema {
        SeriesSchema::Signal => SIGNAL_HEADER,
        SeriesSchema::Trace => TRACE_HEADER,
    };
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if lineno == 0 {
            if line != expected_header {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header '{expected_header}', found '{line}'"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (t, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(v), None) => (t, v),
            _ => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "expected exactly two comma-separated columns".into(),
                })
            }
        };
        let t: f64 = t.trim().parse().map_err(|e| Error::Parse {
            line: lineno + 1,
            message: format!("bad time value '{t}': {e}"),
        })?;
        let v: f64 = v.trim().parse().map_err(|e| Error::Parse {
            line: lineno + 1,
            message: format!("bad value '{v}': {e}"),
        })?;
        times.push(t);
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    let step = if times.len() >= 2 {
        let dt = times[1] - times[0];
        if dt <= 0.0 {
            return Err(Error::Parse {
                line: 3,
                message: "time offsets must be strictly increasing".into(),
            });
        }
        for i in 2..times.len() {
            if ((times[i] - times[i - 1]) - dt).abs() > 1e-6 * dt.max(1.0) {
                return Err(Error::Parse {
                    line: i + 2,
                    message: "non-uniform time spacing".into(),
                });
            }
        }
        Duration::from_secs_f64(dt)
    } else {
        match schema {
            SeriesSchema::Signal => DEFAULT_STEP,
            SeriesSchema::Trace => Duration::from_secs(60),
        }
    };
    match schema {
        SeriesSchema::Signal => {
            if let Some((i, v)) = values
                .iter()
                .enumerate()
                .find(|(_, v)| !(-1.0..=1.0).contains(*v))
            {
                return Err(Error::Validation {
                    index: i,
                    message: format!("sample {v} outside [-1, 1]"),
                });
            }
            let observed_ramp = values
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .fold(0.0, f64::max);
            let sig = RegulationSignal::new(step, values, observed_ramp, SignalKind::Imported)?;
            Ok(ImportedSeries::Signal(sig))
        }
        SeriesSchema::Trace => {
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "imported".into());
            let trace = LoadTrace::new(step, values, label)?;
            Ok(ImportedSeries::Trace(trace))
        }
    }
}

fn write_two_column_csv(
    path: &Path,
    header: &str,
    step_s: f64,
    values: &[f64],
) -> Result<()> {
    let mut out = String::with_capacity(values.len() * 20 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for (k, v) in values.iter().enumerate() {
        out.push_str(&format!("{:.6},{:.6}\n", k as f64 * step_s, v));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Export a signal as `t_s,r` CSV with 6 fractional digits.
pub fn export_signal(sig: &RegulationSignal, path: &Path) -> Result<()> {
    write_two_column_csv(path, SIGNAL_HEADER, sig.step.as_secs_f64(), &sig.samples)
}

/// Export a trace as `t_s,util` CSV with 6 fractional digits.
pub fn export_trace(trace: &LoadTrace, path: &Path) -> Result<()> {
    write_two_column_csv(path, TRACE_HEADER, trace.step.as_secs_f64(), &trace.samples)
}
