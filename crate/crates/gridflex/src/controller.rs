//! The 2-second closed-loop power-reshaping policy.
//!
//! Latency-critical (LC) GPUs grow from the lowest index and are never
//! touched; best-effort (BE) GPUs own the remaining highest indices and are
//! modulated to steer server power toward the regulation target.
//!
//! Spillover ordering: decreasing power lowers caps of active BE GPUs from
//! the lowest BE index upward to the cap floor, then pauses that GPU and
//! moves on; increasing power raises caps from the highest-index active GPU
//! toward the cap max, then resumes the most recently paused GPU at the cap
//! floor, compensating the resume jump by lowering other active caps. This
//! keeps the highest-index GPUs running longest and pauses in BE-index
//! order. Small residuals are fine-tuned with a single quantized
//! core-allocation change.
//!
//! Planning uses the expected power model; the recorded achieved power comes
//! from the noisy sampling model, mirroring a monitor/controller split.

use crate::error::{Error, Result};
use crate::market::Bid;
use crate::powermodel::{
    core_fraction_min, expected_power, lc_gpu_power, modulation_range, quantize_core_fraction,
    sampled_power, throughput, uncapped_power, GpuKnobState, GpuModelParams, ServerSpec,
    ServerState,
};
use crate::signals::{LoadTrace, RegulationSignal};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::time::Duration;

/// Residual error below which the planner leaves the knobs alone, W.
pub const FINE_TUNE_THRESHOLD: f64 = 3.0;

/// One resource-management command addressed to an absolute GPU index.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum Action {
    SetCap { gpu: usize, watts: f64 },
    SetCoreFraction { gpu: usize, fraction: f64 },
    Pause { gpu: usize },
    Resume { gpu: usize },
}

impl Action {
    pub fn gpu(&self) -> usize {
        match *self {
            Action::SetCap { gpu, .. }
            | Action::SetCoreFraction { gpu, .. }
            | Action::Pause { gpu }
            | Action::Resume { gpu } => gpu,
        }
    }

    fn kind(&self) -> u8 {
        match self {
            Action::SetCap { .. } => 0,
            Action::SetCoreFraction { .. } => 1,
            Action::Pause { .. } => 2,
            Action::Resume { .. } => 3,
        }
    }
}

/// Ordered list of commands for one 2-second step.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize)]
pub struct ActionPlan {
    pub actions: Vec<Action>,
    /// No BE GPUs were available to modulate.
    pub no_flexibility: bool,
}

impl ActionPlan {
    pub fn empty() -> Self {
        ActionPlan::default()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Telemetry for one control step.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StepRecord {
    pub timestamp: Duration,
    /// Requested (pre-clamp) target server power, W.
    pub target_power: f64,
    /// Noisy measured server power after applying the plan, W.
    pub achieved_power: f64,
    /// LC GPU power, W. Depends only on the trace.
    pub lc_power: f64,
    /// Mean BE throughput fraction across BE-owned GPUs (1.0 when none).
    pub be_throughput: f64,
    /// BE-owned GPU count at this step.
    pub be_gpus: usize,
    pub no_flexibility: bool,
    pub plan: ActionPlan,
}

/// GPUs required by the LC workload at `lc_load`: the fewest able to carry
/// it, occupying the lowest indices. The remaining highest indices are
/// BE-ownable.
pub fn lc_gpu_allocation(spec: &ServerSpec, lc_load: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&lc_load) {
        return Err(Error::Parameter("lc_load must lie in [0, 1]".into()));
    }
    Ok((lc_load * spec.n_gpus as f64).ceil() as usize)
}

fn be_expected_total(gpu: &GpuModelParams, work: &[GpuKnobState]) -> f64 {
    work.iter().map(|k| expected_power(gpu, k)).sum()
}

/// Raise caps toward the max from the highest-index active GPU downward,
/// restoring full cores where the core limit binds. `locked` slots (resumed
/// this step) are pinned at the floor.
fn raise_actives(gpu: &GpuModelParams, work: &mut [GpuKnobState], need: &mut f64, locked: &[bool]) {
    for j in (0..work.len()).rev() {
        if *need <= 1e-9 {
            return;
        }
        if work[j].paused || locked[j] {
            continue;
        }
        let e = expected_power(gpu, &work[j]);
        let target = (e + *need).min(gpu.cap_max);
        if target <= e + 1e-12 {
            continue;
        }
        if uncapped_power(gpu, work[j].core_fraction) < target {
            work[j].core_fraction = 1.0;
        }
        work[j].cap = target;
        *need -= target - e;
    }
}

/// Lower caps toward the floor from the lowest-index active GPU upward;
/// never pauses. Used to compensate resume overshoot.
fn lower_actives(gpu: &GpuModelParams, work: &mut [GpuKnobState], need: &mut f64, locked: &[bool]) {
    for j in 0..work.len() {
        if *need >= -1e-9 {
            return;
        }
        if work[j].paused || locked[j] {
            continue;
        }
        let e = expected_power(gpu, &work[j]);
        let target = (e + *need).max(gpu.cap_floor);
        if target >= e - 1e-12 {
            continue;
        }
        work[j].cap = target;
        *need += e - target;
    }
}

fn decrease_pass(gpu: &GpuModelParams, work: &mut [GpuKnobState], need: &mut f64) {
    // Cap sweep: lower caps of active GPUs from the lowest BE index upward,
    // each down to the floor at most.
    for knob in work.iter_mut() {
        if *need >= -1e-9 {
            return;
        }
        if knob.paused {
            continue;
        }
        let e = expected_power(gpu, knob);
        let target = (e + *need).max(gpu.cap_floor);
        if target < e - 1e-12 {
            knob.cap = target;
            *need += e - target;
        }
    }
    if *need >= -FINE_TUNE_THRESHOLD {
        return;
    }
    // Pause sweep, same order. The final pause overshoots; it is taken only
    // when raising the remaining actives gets closer than holding here.
    let no_lock = vec![false; work.len()];
    for j in 0..work.len() {
        if *need >= -1e-9 {
            return;
        }
        if work[j].paused {
            continue;
        }
        let gain = expected_power(gpu, &work[j]) - gpu.p_idle_paused;
        if gain <= -*need {
            work[j].paused = true;
            *need += gain;
            continue;
        }
        let headroom: f64 = work
            .iter()
            .enumerate()
            .filter(|(i, k)| *i != j && !k.paused)
            .map(|(_, k)| gpu.cap_max - expected_power(gpu, k))
            .sum();
        let overshoot = gain + *need;
        let residual_if_pause = (overshoot - headroom).max(0.0);
        let residual_if_hold = -*need;
        if residual_if_pause < residual_if_hold {
            work[j].paused = true;
            *need += gain;
            raise_actives(gpu, work, need, &no_lock);
        }
        return;
    }
}

fn increase_pass(gpu: &GpuModelParams, work: &mut [GpuKnobState], need: &mut f64, locked: &mut [bool]) {
    let jump = gpu.cap_floor - gpu.p_idle_paused;
    loop {
        raise_actives(gpu, work, need, locked);
        if *need <= FINE_TUNE_THRESHOLD {
            return;
        }
        let Some(j) = (0..work.len()).rev().find(|&j| work[j].paused) else {
            return;
        };
        if *need < jump {
            // Resuming overshoots; it only pays if lowering other active
            // caps can absorb enough of the jump.
            let down_headroom: f64 = work
                .iter()
                .enumerate()
                .filter(|(i, k)| !k.paused && !locked[*i])
                .map(|(_, k)| expected_power(gpu, k) - gpu.cap_floor)
                .sum();
            let residual_if_resume = (jump - *need - down_headroom).max(0.0);
            if residual_if_resume >= *need {
                return;
            }
        }
        work[j].paused = false;
        work[j].cap = gpu.cap_floor;
        locked[j] = true;
        *need -= jump;
        if *need < -1e-9 {
            lower_actives(gpu, work, need, locked);
            return;
        }
    }
}

/// One quantized core-allocation adjustment on a single GPU, if it brings
/// the expected total closer to the goal.
fn fine_tune(gpu: &GpuModelParams, work: &mut [GpuKnobState], resid: f64, locked: &[bool]) {
    let mut best: Option<(usize, f64, f64)> = None;
    for j in 0..work.len() {
        if work[j].paused || locked[j] {
            continue;
        }
        let k = work[j];
        let e = expected_power(gpu, &k);
        let desired = e + resid;
        let u_target = desired.min(k.cap);
        if u_target <= gpu.cap_floor {
            continue;
        }
        let x = ((u_target - gpu.cap_floor) / (gpu.p_peak - gpu.cap_floor)).clamp(0.0, 1.0);
        let f_exact = x.powf(1.0 / gpu.gamma);
        let steps = f_exact * f64::from(crate::powermodel::CORE_STEPS);
        for f_cand in [
            steps.floor() / f64::from(crate::powermodel::CORE_STEPS),
            steps.ceil() / f64::from(crate::powermodel::CORE_STEPS),
        ] {
            let f_cand = f_cand.clamp(core_fraction_min(), 1.0);
            let mut cand = k;
            cand.core_fraction = f_cand;
            let resid_after = desired - expected_power(gpu, &cand);
            let improves = match &best {
                None => resid_after.abs() + 1e-9 < resid.abs(),
                Some((_, _, b)) => resid_after.abs() + 1e-9 < *b,
            };
            if improves {
                best = Some((j, f_cand, resid_after.abs()));
            }
        }
    }
    if let Some((j, f, _)) = best {
        work[j].core_fraction = quantize_core_fraction(f);
    }
}

fn diff_plan(
    spec: &ServerSpec,
    before: &[GpuKnobState],
    after: &[GpuKnobState],
) -> ActionPlan {
    let m = before.len();
    let abs = |j: usize| spec.n_gpus - m + j;
    let mut actions = Vec::new();
    for j in (0..m).rev() {
        if before[j].paused && !after[j].paused {
            actions.push(Action::Resume { gpu: abs(j) });
            actions.push(Action::SetCap {
                gpu: abs(j),
                watts: spec.gpu.cap_floor,
            });
        }
    }
    for j in 0..m {
        if before[j].paused || after[j].paused {
            continue;
        }
        if (after[j].core_fraction - before[j].core_fraction).abs() > 1e-12 {
            actions.push(Action::SetCoreFraction {
                gpu: abs(j),
                fraction: after[j].core_fraction,
            });
        }
        if (after[j].cap - before[j].cap).abs() > 1e-9 {
            actions.push(Action::SetCap {
                gpu: abs(j),
                watts: after[j].cap,
            });
        }
    }
    for j in 0..m {
        if !before[j].paused && after[j].paused {
            actions.push(Action::Pause { gpu: abs(j) });
        }
    }
    ActionPlan {
        actions,
        no_flexibility: false,
    }
}

/// Plan one 2-second step toward `target` server power.
///
/// Out-of-range targets are clamped to the achievable range. With no BE GPUs
/// the plan is empty and flagged `no_flexibility`.
pub fn plan_step(spec: &ServerSpec, state: &ServerState, target: f64) -> Result<ActionPlan> {
    spec.validate()?;
    state.validate(spec)?;
    if state.be_knobs.is_empty() {
        return Ok(ActionPlan {
            actions: Vec::new(),
            no_flexibility: true,
        });
    }
    let gpu = &spec.gpu;
    let fixed = spec.p_cpu_base + lc_gpu_power(spec, state.lc_load);
    let (pmin, pmax) = modulation_range(spec, state)?;
    let goal = target.clamp(pmin, pmax);
    let mut work = state.be_knobs.clone();
    let mut locked = vec![false; work.len()];
    let mut need = goal - (fixed + be_expected_total(gpu, &work));
    if need < -FINE_TUNE_THRESHOLD {
        decrease_pass(gpu, &mut work, &mut need);
    } else if need > FINE_TUNE_THRESHOLD {
        increase_pass(gpu, &mut work, &mut need, &mut locked);
    }
    let resid = goal - (fixed + be_expected_total(gpu, &work));
    if resid.abs() > FINE_TUNE_THRESHOLD {
        fine_tune(gpu, &mut work, resid, &locked);
    }
    Ok(diff_plan(spec, &state.be_knobs, &work))
}

/// Apply a plan to the server state, enforcing plan legality: only BE-owned
/// GPUs, at most one action per (GPU, action kind), caps within bounds.
pub fn apply_plan(spec: &ServerSpec, state: &mut ServerState, plan: &ActionPlan) -> Result<()> {
    let m = state.be_knobs.len();
    let first_be = spec.n_gpus - m;
    let mut seen: HashSet<(usize, u8)> = HashSet::new();
    for action in &plan.actions {
        let gpu = action.gpu();
        if gpu < first_be || gpu >= spec.n_gpus {
            return Err(Error::Parameter(format!(
                "action targets GPU {gpu}, which is not BE-owned"
            )));
        }
        if !seen.insert((gpu, action.kind())) {
            return Err(Error::Parameter(format!(
                "duplicate action kind for GPU {gpu} in one plan"
            )));
        }
        let slot = gpu - first_be;
        let knob = &mut state.be_knobs[slot];
        match *action {
            Action::SetCap { watts, .. } => {
                if !(spec.gpu.cap_floor - 1e-9..=spec.gpu.cap_max + 1e-9).contains(&watts) {
                    return Err(Error::Parameter(format!(
                        "cap {watts} outside [{}, {}]",
                        spec.gpu.cap_floor, spec.gpu.cap_max
                    )));
                }
                knob.cap = watts;
            }
            Action::SetCoreFraction { fraction, .. } => {
                if !(fraction > 0.0 && fraction <= 1.0) {
                    return Err(Error::Parameter("core fraction outside (0, 1]".into()));
                }
                knob.core_fraction = fraction;
            }
            Action::Pause { .. } => knob.paused = true,
            Action::Resume { .. } => knob.paused = false,
        }
    }
    Ok(())
}

/// Run the full 2-second tracking loop over one signal horizon.
///
/// Per step: read the LC load (zero-order hold), update the LC/BE GPU split,
/// compute the target from the bid and signal, plan, apply, and record the
/// noisy achieved power and BE throughput. Deterministic for a fixed seed.
/// Newly freed GPUs join the BE set paused; GPUs reclaimed by LC leave from
/// the lowest BE index.
pub fn run_tracking(
    spec: &ServerSpec,
    lc_trace: &LoadTrace,
    signal: &RegulationSignal,
    bid: &Bid,
    seed: u64,
) -> Result<Vec<StepRecord>> {
    spec.validate()?;
    bid.validate()?;
    let sig_len_s = signal.duration().as_secs_f64();
    let trace_len_s = lc_trace.duration().as_secs_f64();
    if trace_len_s + 1e-9 < sig_len_s {
        return Err(Error::Parameter(format!(
            "trace covers {trace_len_s} s but signal needs {sig_len_s} s"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step_s = signal.step.as_secs_f64();
    let mut be: Vec<GpuKnobState> = {
        let load0 = lc_trace.sample_at(Duration::ZERO);
        let lc_n = lc_gpu_allocation(spec, load0)?;
        vec![GpuKnobState::paused(&spec.gpu); spec.n_gpus - lc_n]
    };
    let mut records = Vec::with_capacity(signal.len());
    for (k, &r) in signal.samples.iter().enumerate() {
        let t = Duration::from_secs_f64(k as f64 * step_s);
        let load = lc_trace.sample_at(t);
        let lc_n = lc_gpu_allocation(spec, load)?;
        let m_target = spec.n_gpus - lc_n;
        // LC reclaims (or releases) GPUs at the BE set's low-index end.
        while be.len() > m_target {
            be.remove(0);
        }
        while be.len() < m_target {
            be.insert(0, GpuKnobState::paused(&spec.gpu));
        }
        let mut state = ServerState {
            lc_gpus_active: lc_n,
            be_knobs: be,
            lc_load: load,
            timestamp: t,
        };
        let target = bid.target_power(r)?;
        let plan = plan_step(spec, &state, target)?;
        apply_plan(spec, &mut state, &plan)?;
        let lc_w = lc_gpu_power(spec, load);
        let be_sampled: f64 = state
            .be_knobs
            .iter()
            .map(|knob| sampled_power(&spec.gpu, knob, &mut rng))
            .sum();
        let achieved = spec.p_cpu_base + lc_w + be_sampled;
        let m = state.be_knobs.len();
        let be_tp = if m == 0 {
            1.0
        } else {
            state
                .be_knobs
                .iter()
                .map(|knob| throughput(&spec.gpu, knob))
                .sum::<f64>()
                / m as f64
        };
        records.push(StepRecord {
            timestamp: t,
            target_power: target,
            achieved_power: achieved,
            lc_power: lc_w,
            be_throughput: be_tp,
            be_gpus: m,
            no_flexibility: plan.no_flexibility,
            plan,
        });
        be = state.be_knobs;
    }
    Ok(records)
}

/// Run-level throughput summary.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ThroughputSummary {
    /// LC throughput is preserved by construction.
    pub lc_throughput: f64,
    /// Time-average BE throughput over BE-owned GPU-steps, relative to an
    /// unmodulated run at (cap_max, full cores).
    pub be_throughput: f64,
}

pub fn aggregate_throughput(records: &[StepRecord]) -> Result<ThroughputSummary> {
    if records.is_empty() {
        return Err(Error::Parameter("no records to aggregate".into()));
    }
    let gpu_steps: f64 = records.iter().map(|r| r.be_gpus as f64).sum();
    let be = if gpu_steps > 0.0 {
        records
            .iter()
            .map(|r| r.be_throughput * r.be_gpus as f64)
            .sum::<f64>()
            / gpu_steps
    } else {
        1.0
    };
    Ok(ThroughputSummary {
        lc_throughput: 1.0,
        be_throughput: be,
    })
}

/// Export step records as `t_s,target_w,achieved_w,lc_w,be_throughput`.
pub fn export_step_records(records: &[StepRecord], path: &Path) -> Result<()> {
    let mut out = String::from("t_s,target_w,achieved_w,lc_w,be_throughput\n");
    for r in records {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.timestamp.as_secs_f64(),
            r.target_power,
            r.achieved_power,
            r.lc_power,
            r.be_throughput
        ));
    }
    fs::write(path, out)?;
    Ok(())
}
