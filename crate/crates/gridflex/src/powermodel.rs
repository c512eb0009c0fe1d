//! Parametric per-GPU power, precision, and throughput models, composed into
//! a multi-GPU server model.
//!
//! A GPU has two modulation knobs plus pause/resume:
//!
//! - power cap: accurate control in the cap-limited band
//!   `[cap_floor, cap_max]`; caps below the floor have no further effect.
//! - core allocation: scales the uncapped draw `U(f) = cap_floor +
//!   (p_peak - cap_floor) * f^gamma`, coarse and noisier than capping.
//! - pause: halting kernel issue drops the GPU to active-idle power,
//!   unlocking the band below the cap floor.
//!
//! Expected power is `min(cap, U(f))`; the sampled variant adds seeded
//! multiplicative Gaussian noise, larger when cores are constrained.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use std::time::Duration;

/// Compute-unit granularity of the core-allocation knob.
pub const CORE_STEPS: u32 = 60;
/// Samples drawn per grid point when profiling.
pub const PROFILE_SAMPLES: usize = 20;
/// Precision at or above which a profiled point classifies green.
pub const PRECISION_GREEN: f64 = 0.90;

/// Smallest selectable core fraction (one compute unit).
pub fn core_fraction_min() -> f64 {
    1.0 / CORE_STEPS as f64
}

/// Quantize a core fraction to the CU grid, clamped to [1/60, 1].
pub fn quantize_core_fraction(f: f64) -> f64 {
    let steps = (f * CORE_STEPS as f64).round().clamp(1.0, CORE_STEPS as f64);
    steps / CORE_STEPS as f64
}

/// Static per-GPU model parameters.
///
/// Defaults follow a 300 W-class training card with an accurate 60-190 W
/// capping band, near-zero paused power, and 2% / 8% relative power noise
/// for cap-only / reduced-core operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpuModelParams {
    /// Maximum sustained power at full cap and full cores, W.
    pub p_peak: f64,
    /// Minimum effective power cap, W.
    pub cap_floor: f64,
    /// Maximum power cap, W.
    pub cap_max: f64,
    /// Active-idle power while kernel issue is paused, W.
    pub p_idle_paused: f64,
    /// Core-scaling exponent of the uncapped draw.
    pub gamma: f64,
    /// Relative power noise with all cores enabled.
    pub noise_cap_only: f64,
    /// Relative power noise with a reduced core allocation.
    pub noise_with_cores: f64,
    /// Throughput fraction at the cap floor with full cores.
    pub tp_cap_min: f64,
    /// Throughput fraction at the minimum core fraction with full cap.
    pub tp_core_min: f64,
}

impl Default for GpuModelParams {
    fn default() -> Self {
        GpuModelParams {
            p_peak: 190.0,
            cap_floor: 60.0,
            cap_max: 190.0,
            p_idle_paused: 2.0,
            gamma: 0.8,
            noise_cap_only: 0.02,
            noise_with_cores: 0.08,
            tp_cap_min: 0.6,
            tp_core_min: 0.2,
        }
    }
}

impl GpuModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.p_idle_paused && self.p_idle_paused < self.cap_floor) {
            return Err(Error::Parameter(
                "need 0 <= p_idle_paused < cap_floor".into(),
            ));
        }
        if !(self.cap_floor < self.cap_max && self.cap_max <= self.p_peak) {
            return Err(Error::Parameter(
                "need cap_floor < cap_max <= p_peak".into(),
            ));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Parameter("gamma must be positive".into()));
        }
        if !(self.noise_cap_only >= 0.0 && self.noise_with_cores >= 0.0) {
            return Err(Error::Parameter("noise levels must be non-negative".into()));
        }
        for (name, v) in [("tp_cap_min", self.tp_cap_min), ("tp_core_min", self.tp_core_min)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Parameter(format!("{name} must lie in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Dynamic knob state of one best-effort GPU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpuKnobState {
    pub paused: bool,
    /// Power cap, W. Kept within [cap_floor, cap_max] even while paused.
    pub cap: f64,
    /// Enabled core fraction in (0, 1].
    pub core_fraction: f64,
}

impl GpuKnobState {
    /// Running at full cap and full cores.
    pub fn full(params: &GpuModelParams) -> Self {
        GpuKnobState {
            paused: false,
            cap: params.cap_max,
            core_fraction: 1.0,
        }
    }

    /// Paused at the cap floor, ready to resume.
    pub fn paused(params: &GpuModelParams) -> Self {
        GpuKnobState {
            paused: true,
            cap: params.cap_floor,
            core_fraction: 1.0,
        }
    }

    pub fn validate(&self, params: &GpuModelParams) -> Result<()> {
        if !(self.core_fraction > 0.0 && self.core_fraction <= 1.0) {
            return Err(Error::Parameter("core fraction must lie in (0, 1]".into()));
        }
        if !self.paused
            && !(self.cap >= params.cap_floor - 1e-9 && self.cap <= params.cap_max + 1e-9)
        {
            return Err(Error::Parameter(format!(
                "cap {} outside [{}, {}]",
                self.cap, params.cap_floor, params.cap_max
            )));
        }
        Ok(())
    }
}

/// Uncapped draw at core fraction `f`: what the workload would pull with no
/// power cap. Never drops below the cap floor.
pub fn uncapped_power(params: &GpuModelParams, core_fraction: f64) -> f64 {
    params.cap_floor + (params.p_peak - params.cap_floor) * core_fraction.powf(params.gamma)
}

/// Expected GPU power for a knob state.
pub fn gpu_power(params: &GpuModelParams, knobs: &GpuKnobState) -> Result<f64> {
    params.validate()?;
    knobs.validate(params)?;
    Ok(expected_power(params, knobs))
}

pub(crate) fn expected_power(params: &GpuModelParams, knobs: &GpuKnobState) -> f64 {
    if knobs.paused {
        params.p_idle_paused
    } else {
        knobs.cap.min(uncapped_power(params, knobs.core_fraction))
    }
}

/// Noisy GPU power sample: expected power with multiplicative Gaussian noise,
/// clamped to [p_idle_paused, p_peak]. Paused GPUs draw exactly
/// `p_idle_paused`.
pub fn gpu_power_sampled(
    params: &GpuModelParams,
    knobs: &GpuKnobState,
    rng: &mut impl Rng,
) -> Result<f64> {
    params.validate()?;
    knobs.validate(params)?;
    Ok(sampled_power(params, knobs, rng))
}

pub(crate) fn sampled_power(
    params: &GpuModelParams,
    knobs: &GpuKnobState,
    rng: &mut impl Rng,
) -> f64 {
    if knobs.paused {
        return params.p_idle_paused;
    }
    let expected = expected_power(params, knobs);
    let sigma = if knobs.core_fraction >= 1.0 {
        params.noise_cap_only
    } else {
        params.noise_with_cores
    };
    if sigma == 0.0 {
        return expected;
    }
    let noise = Normal::new(0.0, sigma).expect("valid sigma").sample(rng);
    (expected * (1.0 + noise)).clamp(params.p_idle_paused, params.p_peak)
}

/// Throughput as a fraction of unconstrained throughput.
///
/// Linear in the cap between `tp_cap_min` at the floor and 1 at the max cap,
/// times a linear core term between `tp_core_min` at the minimum fraction and
/// 1 at full cores. Paused GPUs do no work.
pub fn gpu_throughput(params: &GpuModelParams, knobs: &GpuKnobState) -> Result<f64> {
    params.validate()?;
    knobs.validate(params)?;
    Ok(throughput(params, knobs))
}

pub(crate) fn throughput(params: &GpuModelParams, knobs: &GpuKnobState) -> f64 {
    if knobs.paused {
        return 0.0;
    }
    let cap_span = params.cap_max - params.cap_floor;
    let t_cap = if cap_span > 0.0 {
        let x = ((knobs.cap - params.cap_floor) / cap_span).clamp(0.0, 1.0);
        params.tp_cap_min + (1.0 - params.tp_cap_min) * x
    } else {
        1.0
    };
    let f_min = core_fraction_min();
    let core_span = 1.0 - f_min;
    let t_core = if core_span > 0.0 {
        let x = ((knobs.core_fraction - f_min) / core_span).clamp(0.0, 1.0);
        params.tp_core_min + (1.0 - params.tp_core_min) * x
    } else {
        1.0
    };
    t_cap * t_core
}

/// Static description of a multi-GPU server.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSpec {
    pub n_gpus: usize,
    #[serde(skip)]
    pub gpu: GpuModelParams,
    /// Host power floor (CPU, fans, platform), W.
    pub p_cpu_base: f64,
    /// Per-GPU power of the latency-critical workload at full load, W.
    pub gpu_lc_peak: f64,
}

impl Default for ServerSpec {
    fn default() -> Self {
        ServerSpec {
            n_gpus: 8,
            gpu: GpuModelParams::default(),
            p_cpu_base: 200.0,
            gpu_lc_peak: 150.0,
        }
    }
}

impl ServerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_gpus == 0 {
            return Err(Error::Parameter("server needs at least one GPU".into()));
        }
        if !(self.p_cpu_base >= 0.0) || !(self.gpu_lc_peak >= 0.0) {
            return Err(Error::Parameter("server powers must be non-negative".into()));
        }
        self.gpu.validate()
    }
}

/// Dynamic server state: latency-critical allocation plus the knob state of
/// every best-effort GPU.
///
/// LC GPUs occupy the lowest indices and BE GPUs the highest, so
/// `be_knobs[j]` controls absolute GPU index `n_gpus - be_knobs.len() + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub lc_gpus_active: usize,
    pub be_knobs: Vec<GpuKnobState>,
    /// Latency-critical utilization fraction in [0, 1].
    pub lc_load: f64,
    pub timestamp: Duration,
}

impl ServerState {
    pub fn validate(&self, spec: &ServerSpec) -> Result<()> {
        if self.lc_gpus_active + self.be_knobs.len() > spec.n_gpus {
            return Err(Error::Parameter(format!(
                "{} LC + {} BE GPUs exceed {} present",
                self.lc_gpus_active,
                self.be_knobs.len(),
                spec.n_gpus
            )));
        }
        if !(0.0..=1.0).contains(&self.lc_load) {
            return Err(Error::Parameter("lc_load must lie in [0, 1]".into()));
        }
        for k in &self.be_knobs {
            k.validate(&spec.gpu)?;
        }
        Ok(())
    }

    /// Absolute GPU index controlled by BE slot `slot`.
    pub fn be_gpu_index(&self, spec: &ServerSpec, slot: usize) -> usize {
        spec.n_gpus - self.be_knobs.len() + slot
    }
}

/// Total LC GPU power at load `lc_load`.
///
/// LC load occupies the fewest GPUs able to carry it (lowest indices first);
/// the last one runs at the fractional residue, so the total is simply
/// `lc_load * n_gpus * gpu_lc_peak`.
pub fn lc_gpu_power(spec: &ServerSpec, lc_load: f64) -> f64 {
    lc_load * spec.n_gpus as f64 * spec.gpu_lc_peak
}

/// Expected server power: host floor + LC GPUs + BE GPUs.
pub fn server_power(spec: &ServerSpec, state: &ServerState) -> Result<f64> {
    spec.validate()?;
    state.validate(spec)?;
    let be: f64 = state
        .be_knobs
        .iter()
        .map(|k| expected_power(&spec.gpu, k))
        .sum();
    Ok(spec.p_cpu_base + lc_gpu_power(spec, state.lc_load) + be)
}

/// Noisy server power sample; LC power is read, not sampled.
pub fn server_power_sampled(
    spec: &ServerSpec,
    state: &ServerState,
    rng: &mut impl Rng,
) -> Result<f64> {
    spec.validate()?;
    state.validate(spec)?;
    let be: f64 = state
        .be_knobs
        .iter()
        .map(|k| sampled_power(&spec.gpu, k, rng))
        .sum();
    Ok(spec.p_cpu_base + lc_gpu_power(spec, state.lc_load) + be)
}

/// Achievable expected power range at the current LC load: all BE GPUs
/// paused up to all BE GPUs at (cap_max, full cores).
pub fn modulation_range(spec: &ServerSpec, state: &ServerState) -> Result<(f64, f64)> {
    spec.validate()?;
    state.validate(spec)?;
    let fixed = spec.p_cpu_base + lc_gpu_power(spec, state.lc_load);
    let m = state.be_knobs.len() as f64;
    Ok((
        fixed + m * spec.gpu.p_idle_paused,
        fixed + m * spec.gpu.cap_max,
    ))
}

/// One profiled operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub cap: f64,
    pub core_fraction: f64,
    /// Mean of the sampled power draws at this point, W.
    pub mean_power: f64,
    /// 1 - mean(|sample - cap|) / cap.
    pub precision: f64,
}

impl ProfilePoint {
    pub fn is_green(&self) -> bool {
        self.precision >= PRECISION_GREEN
    }
}

/// Profile the power model over a cap x core grid.
///
/// Each point draws [`PROFILE_SAMPLES`] noisy samples; precision measures how
/// close the draws land to the cap target, classifying points green at or
/// above [`PRECISION_GREEN`].
pub fn profile_power_model(
    params: &GpuModelParams,
    cap_grid: &[f64],
    core_grid: &[f64],
    seed: u64,
) -> Result<Vec<ProfilePoint>> {
    params.validate()?;
    if cap_grid.is_empty() || core_grid.is_empty() {
        return Err(Error::Parameter("profiling grids must be non-empty".into()));
    }
    for &cap in cap_grid {
        if !(cap >= params.cap_floor && cap <= params.cap_max) {
            return Err(Error::Parameter(format!(
                "cap {cap} outside [{}, {}]",
                params.cap_floor, params.cap_max
            )));
        }
    }
    for &f in core_grid {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Parameter(format!("core fraction {f} outside (0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cap_grid.len() * core_grid.len());
    for &cap in cap_grid {
        for &f in core_grid {
            let knobs = GpuKnobState {
                paused: false,
                cap,
                core_fraction: f,
            };
            let mut sum = 0.0;
            let mut abs_err = 0.0;
            for _ in 0..PROFILE_SAMPLES {
                let p = sampled_power(params, &knobs, &mut rng);
                sum += p;
                abs_err += (p - cap).abs();
            }
            let k = PROFILE_SAMPLES as f64;
            out.push(ProfilePoint {
                cap,
                core_fraction: f,
                mean_power: sum / k,
                precision: 1.0 - (abs_err / k) / cap,
            });
        }
    }
    Ok(out)
}

/// Export a profiled table as `cap_w,core_fraction,mean_power_w,precision`.
pub fn export_profile(points: &[ProfilePoint], path: &Path) -> Result<()> {
    let mut out = String::from("cap_w,core_fraction,mean_power_w,precision\n");
    for p in points {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6}\n",
            p.cap, p.core_fraction, p.mean_power, p.precision
        ));
    }
    fs::write(path, out)?;
    Ok(())
}
