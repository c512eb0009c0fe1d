//! Market mechanics: regulation targets, performance scoring, certification,
//! settlement, and the hourly bid optimizer with a brute-force oracle.
//!
//! Sign convention (demand side): r > 0 asks the load to increase
//! consumption (regulation-down product, bounded by `r_down`); r < 0 asks it
//! to decrease (regulation-up, bounded by `r_up`). The tracked baseline is
//! the bid's `p_fr`, so the target is continuous at r = 0.

use crate::controller::StepRecord;
use crate::error::{Error, Result};
use crate::signals::RegulationSignal;
use serde::Serialize;
use std::fs;
use std::path::Path;
use std::time::Duration;

/// Margin used to implement the optimizer's strict inequalities, W.
pub const STRICT_MARGIN_W: f64 = 0.1;
/// Performance-score bar for certification.
pub const CERTIFY_BAR: f64 = 0.75;
/// Consecutive passing tests required to certify.
pub const CERTIFY_STREAK: usize = 3;
/// Score below which a certified resource is removed.
pub const REVOKE_BAR: f64 = 0.40;
/// Scoring window length.
pub const SCORE_WINDOW: Duration = Duration::from_secs(900);
/// Largest response delay scanned when scoring, seconds.
pub const MAX_DELAY_S: f64 = 300.0;
/// Delay scan granularity, seconds.
pub const DELAY_STEP_S: f64 = 10.0;
/// Mean |q - s| below which a zero-variance window counts as tracked.
pub const DEGENERATE_TRACKING_TOL: f64 = 0.02;

/// Hourly market decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bid {
    /// Participation baseline the server holds at r = 0, W.
    pub p_fr: f64,
    /// Committed decrease capability, W.
    pub r_up: f64,
    /// Committed increase capability, W.
    pub r_down: f64,
    pub symmetric: bool,
}

impl Bid {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_up >= 0.0 && self.r_down >= 0.0) {
            return Err(Error::Parameter("provisions must be non-negative".into()));
        }
        if self.symmetric && (self.r_up - self.r_down).abs() > 1e-9 {
            return Err(Error::Parameter(
                "symmetric bid requires r_up == r_down".into(),
            ));
        }
        if !(self.p_fr >= 0.0) {
            return Err(Error::Parameter("baseline must be non-negative".into()));
        }
        Ok(())
    }

    /// No-provision bid at the given baseline.
    pub fn hold(p_fr: f64) -> Self {
        Bid {
            p_fr,
            r_up: 0.0,
            r_down: 0.0,
            symmetric: true,
        }
    }

    /// Target server power for regulation value `r` in [-1, 1].
    pub fn target_power(&self, r: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::Parameter(format!("signal value {r} outside [-1, 1]")));
        }
        Ok(if r >= 0.0 {
            self.p_fr + r * self.r_down
        } else {
            self.p_fr + r * self.r_up
        })
    }

    /// Total committed provision (both directions), W.
    pub fn provision(&self) -> f64 {
        self.r_up + self.r_down
    }
}

/// Inputs to the hourly bid optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketInputs {
    /// Expected average server power over the hour, W.
    pub p_avg: f64,
    /// Expected peak-to-trough load swing over the hour, W.
    pub p_var: f64,
    /// Highest server power the bid may rely on, W.
    pub p_max: f64,
    /// Energy price, $/Wh.
    pub cost: f64,
    /// Regulation-up capacity reward, $/(W h).
    pub rew_up: f64,
    /// Regulation-down capacity reward, $/(W h).
    pub rew_down: f64,
    /// Expected performance score in [0, 1].
    pub perf_score: f64,
    /// Participation threshold: regulation cost must not exceed
    /// `threshold x` the baseline energy cost.
    pub threshold: f64,
}

impl MarketInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_avg >= 0.0 && self.p_var >= 0.0 && self.p_max > 0.0) {
            return Err(Error::Parameter("powers must be non-negative".into()));
        }
        if !(self.cost >= 0.0 && self.rew_up >= 0.0 && self.rew_down >= 0.0) {
            return Err(Error::Parameter("prices must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.perf_score) {
            return Err(Error::Parameter("perf_score must lie in [0, 1]".into()));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::Parameter("threshold must be non-negative".into()));
        }
        Ok(())
    }

    fn floor_power(&self) -> f64 {
        self.p_avg + self.p_var / 2.0
    }
}

/// Delay / accuracy / precision triple for one 15-minute window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerformanceScore {
    pub delay: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub composite: f64,
    pub window_start: Duration,
}

/// Certification state derived from a score history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificationStatus {
    Uncertified,
    Certified,
    Revoked,
}

/// Apply the certification rules to a full history of composite scores:
/// certified after three consecutive scores of 0.75 or better, revoked if a
/// certified resource ever scores below 0.40.
pub fn certify(history: &[f64]) -> CertificationStatus {
    let mut streak = 0;
    let mut status = CertificationStatus::Uncertified;
    for &score in history {
        match status {
            CertificationStatus::Uncertified => {
                if score >= CERTIFY_BAR {
                    streak += 1;
                    if streak >= CERTIFY_STREAK {
                        status = CertificationStatus::Certified;
                    }
                } else {
                    streak = 0;
                }
            }
            CertificationStatus::Certified => {
                if score < REVOKE_BAR {
                    status = CertificationStatus::Revoked;
                }
            }
            CertificationStatus::Revoked => {}
        }
    }
    status
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 1e-24 || syy <= 1e-24 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Score a tracking run in 15-minute windows.
///
/// The response is normalized per sample as `q = (achieved - p_fr) / R`
/// with R the provision on the requested side, so the score is invariant to
/// relabeling of watt units. Accuracy is the best shifted correlation over
/// delays 0..=300 s, delay rewards the smallest maximizing shift, and
/// precision penalizes mean |q - s|. A trailing window shorter than 15
/// minutes is scored if it has at least two samples.
pub fn performance_score(
    signal: &RegulationSignal,
    records: &[StepRecord],
    bid: &Bid,
) -> Result<Vec<PerformanceScore>> {
    if records.len() != signal.samples.len() {
        return Err(Error::Parameter(format!(
            "records ({}) not aligned to signal samples ({})",
            records.len(),
            signal.samples.len()
        )));
    }
    bid.validate()?;
    let step_s = signal.step.as_secs_f64();
    let window = ((SCORE_WINDOW.as_secs_f64() / step_s).round() as usize).max(1);
    let q: Vec<f64> = signal
        .samples
        .iter()
        .zip(records)
        .map(|(&s, rec)| {
            let r = if s >= 0.0 { bid.r_down } else { bid.r_up };
            if r > 0.0 {
                (rec.achieved_power - bid.p_fr) / r
            } else {
                0.0
            }
        })
        .collect();

    let mut out = Vec::new();
    let mut start = 0;
    while start < q.len() {
        let end = (start + window).min(q.len());
        if end - start < 2 {
            break;
        }
        let s = &signal.samples[start..end];
        let qw = &q[start..end];
        out.push(score_window(
            s,
            qw,
            step_s,
            Duration::from_secs_f64(start as f64 * step_s),
        ));
        start = end;
    }
    if out.is_empty() {
        return Err(Error::Parameter(
            "too few samples to score a window".into(),
        ));
    }
    Ok(out)
}

fn score_window(s: &[f64], q: &[f64], step_s: f64, window_start: Duration) -> PerformanceScore {
    let n = s.len();
    let mean_abs_err = s
        .iter()
        .zip(q)
        .map(|(a, b)| (b - a).abs())
        .sum::<f64>()
        / n as f64;
    let precision = (1.0 - mean_abs_err).max(0.0);

    let ms = s.iter().sum::<f64>() / n as f64;
    let var_s = s.iter().map(|v| (v - ms) * (v - ms)).sum::<f64>() / n as f64;
    let (delay, accuracy) = if var_s <= 1e-24 {
        // Degenerate window: no signal movement to correlate against.
        let tracked = mean_abs_err <= DEGENERATE_TRACKING_TOL;
        let v = if tracked { 1.0 } else { 0.0 };
        (v, v)
    } else {
        let mut best_corr = f64::NEG_INFINITY;
        let mut best_delay_s = 0.0;
        let mut seen_shifts = Vec::new();
        let mut d = 0.0;
        while d <= MAX_DELAY_S + 1e-9 {
            let shift = (d / step_s).round() as usize;
            if shift + 2 <= n && !seen_shifts.contains(&shift) {
                seen_shifts.push(shift);
                let corr = pearson(&s[..n - shift], &q[shift..]).clamp(0.0, 1.0);
                if corr > best_corr + 1e-12 {
                    best_corr = corr;
                    best_delay_s = d;
                }
            }
            d += DELAY_STEP_S;
        }
        let accuracy = best_corr.max(0.0);
        let delay = if accuracy > 0.0 {
            (MAX_DELAY_S - best_delay_s) / MAX_DELAY_S
        } else {
            0.0
        };
        (delay, accuracy)
    };
    PerformanceScore {
        delay,
        accuracy,
        precision,
        composite: (delay + accuracy + precision) / 3.0,
        window_start,
    }
}

/// One hour's settlement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Settlement {
    pub energy_cost: f64,
    pub reward: f64,
    pub saving: f64,
}

/// Settle one hour: energy charged on the regulation baseline, capacity
/// reward scaled by the realized mean composite score, saving relative to
/// running at `p_avg` without regulation.
pub fn hourly_settlement(
    bid: &Bid,
    scores: &[PerformanceScore],
    inputs: &MarketInputs,
) -> Result<Settlement> {
    bid.validate()?;
    inputs.validate()?;
    if scores.is_empty() {
        return Err(Error::Parameter("settlement needs at least one score".into()));
    }
    let perf = scores.iter().map(|s| s.composite).sum::<f64>() / scores.len() as f64;
    let energy_cost = bid.p_fr * inputs.cost;
    let reward = (bid.r_up * inputs.rew_up + bid.r_down * inputs.rew_down) * perf;
    let saving = inputs.p_avg * inputs.cost - (energy_cost - reward);
    Ok(Settlement {
        energy_cost,
        reward,
        saving,
    })
}

/// Result of the hourly bid optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BidOutcome {
    Optimal { bid: Bid, predicted_saving: f64 },
    /// The participation-threshold constraint admits no baseline.
    Withdraw,
}

impl BidOutcome {
    pub fn bid(&self) -> Option<&Bid> {
        match self {
            BidOutcome::Optimal { bid, .. } => Some(bid),
            BidOutcome::Withdraw => None,
        }
    }
}

struct Candidate {
    p: f64,
    r_up: f64,
    r_down: f64,
    saving: f64,
}

fn provisions_at(inputs: &MarketInputs, symmetric: bool, p: f64) -> (f64, f64) {
    let floor = inputs.floor_power();
    let eff_up = inputs.perf_score * inputs.rew_up;
    let eff_down = inputs.perf_score * inputs.rew_down;
    if symmetric {
        if eff_up + eff_down > 0.0 {
            let r = (p - floor).min(inputs.p_max - p).max(0.0);
            (r, r)
        } else {
            (0.0, 0.0)
        }
    } else {
        let r_up = if eff_up > 0.0 { (p - floor).max(0.0) } else { 0.0 };
        let r_down = if eff_down > 0.0 {
            (inputs.p_max - p).max(0.0)
        } else {
            0.0
        };
        (r_up, r_down)
    }
}

fn evaluate(inputs: &MarketInputs, symmetric: bool, p: f64) -> Candidate {
    let (r_up, r_down) = provisions_at(inputs, symmetric, p);
    let reward = (r_up * inputs.rew_up + r_down * inputs.rew_down) * inputs.perf_score;
    let cost_fr = p * inputs.cost - reward;
    let saving = inputs.p_avg * inputs.cost - cost_fr;
    Candidate {
        p,
        r_up,
        r_down,
        saving,
    }
}

fn threshold_ok(inputs: &MarketInputs, cand: &Candidate) -> bool {
    let reward =
        (cand.r_up * inputs.rew_up + cand.r_down * inputs.rew_down) * inputs.perf_score;
    let cost_fr = cand.p * inputs.cost - reward;
    let cap = inputs.threshold * inputs.p_avg * inputs.cost;
    cost_fr <= cap + 1e-9 * cap.abs().max(1.0)
}

/// Optimize the hourly bid by closed-form boundary analysis.
///
/// The objective is piecewise linear in the baseline once provisions sit at
/// their reward-optimal bounds, so the optimum lies at an interval endpoint,
/// the symmetric midpoint, or a threshold crossing; all are enumerated and
/// the best feasible candidate wins, ties broken by the smaller baseline.
/// Returns [`BidOutcome::Withdraw`] when the threshold admits no baseline.
pub fn optimize_bid(inputs: &MarketInputs, symmetric: bool) -> Result<BidOutcome> {
    inputs.validate()?;
    let floor = inputs.floor_power();
    let lo = floor + STRICT_MARGIN_W;
    let hi = inputs.p_max - STRICT_MARGIN_W;
    if floor >= inputs.p_max || lo > hi {
        return Err(Error::Infeasible(format!(
            "p_avg + p_var/2 = {floor} leaves no room below p_max = {}",
            inputs.p_max
        )));
    }

    let mut candidates = vec![lo, hi];
    if symmetric {
        let mid = (floor + inputs.p_max) / 2.0;
        if mid > lo && mid < hi {
            candidates.push(mid);
        }
    }
    // Threshold crossings: cost_fr(p) - threshold * cost_avg is piecewise
    // linear; find a root on each linear piece by bisection.
    let g = |p: f64| {
        let c = evaluate(inputs, symmetric, p);
        let reward = (c.r_up * inputs.rew_up + c.r_down * inputs.rew_down) * inputs.perf_score;
        c.p * inputs.cost - reward - inputs.threshold * inputs.p_avg * inputs.cost
    };
    let mut pieces = vec![(lo, hi)];
    if symmetric {
        let mid = (floor + inputs.p_max) / 2.0;
        if mid > lo && mid < hi {
            pieces = vec![(lo, mid), (mid, hi)];
        }
    }
    for (a, b) in pieces {
        if (g(a) <= 0.0) != (g(b) <= 0.0) {
            let (mut a, mut b) = (a, b);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if (g(a) <= 0.0) == (g(m) <= 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            let root = 0.5 * (a + b);
            // Step just inside the feasible side.
            for p in [root, root - 1e-7, root + 1e-7] {
                if p >= lo && p <= hi {
                    candidates.push(p);
                }
            }
        }
    }

    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best: Option<Candidate> = None;
    for p in candidates {
        let cand = evaluate(inputs, symmetric, p);
        if !threshold_ok(inputs, &cand) {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => cand.saving > b.saving + 1e-12,
        };
        if better {
            best = Some(cand);
        }
    }
    Ok(match best {
        None => BidOutcome::Withdraw,
        Some(c) => BidOutcome::Optimal {
            bid: Bid {
                p_fr: c.p,
                r_up: c.r_up,
                r_down: c.r_down,
                symmetric,
            },
            predicted_saving: c.saving,
        },
    })
}

/// Exhaustive grid search over the baseline, for verifying [`optimize_bid`].
///
/// Provisions are set to their reward-optimal bounds at each grid point;
/// points violating the threshold are skipped.
pub fn oracle_bid_search(
    inputs: &MarketInputs,
    symmetric: bool,
    grid_steps: usize,
) -> Result<BidOutcome> {
    inputs.validate()?;
    if grid_steps < 100 {
        return Err(Error::Parameter("oracle needs at least 100 grid steps".into()));
    }
    let floor = inputs.floor_power();
    let lo = floor + STRICT_MARGIN_W;
    let hi = inputs.p_max - STRICT_MARGIN_W;
    if floor >= inputs.p_max || lo > hi {
        return Err(Error::Infeasible(format!(
            "p_avg + p_var/2 = {floor} leaves no room below p_max = {}",
            inputs.p_max
        )));
    }
    let mut best: Option<Candidate> = None;
    for i in 0..=grid_steps {
        let p = lo + (hi - lo) * i as f64 / grid_steps as f64;
        // The oracle always maximizes both provisions to their bounds.
        let r_up = p - floor;
        let r_down = inputs.p_max - p;
        let (r_up, r_down) = if symmetric {
            let r = r_up.min(r_down);
            (r, r)
        } else {
            (r_up, r_down)
        };
        let reward = (r_up * inputs.rew_up + r_down * inputs.rew_down) * inputs.perf_score;
        let cost_fr = p * inputs.cost - reward;
        let cap = inputs.threshold * inputs.p_avg * inputs.cost;
        if cost_fr > cap + 1e-9 * cap.abs().max(1.0) {
            continue;
        }
        let saving = inputs.p_avg * inputs.cost - cost_fr;
        let better = match &best {
            None => true,
            Some(b) => saving > b.saving + 1e-12,
        };
        if better {
            best = Some(Candidate {
                p,
                r_up,
                r_down,
                saving,
            });
        }
    }
    Ok(match best {
        None => BidOutcome::Withdraw,
        Some(c) => BidOutcome::Optimal {
            bid: Bid {
                p_fr: c.p,
                r_up: c.r_up,
                r_down: c.r_down,
                symmetric,
            },
            predicted_saving: c.saving,
        },
    })
}

/// Export scores as `window_start_s,delay,accuracy,precision,composite`.
pub fn export_scores(scores: &[PerformanceScore], path: &Path) -> Result<()> {
    let mut out = String::from("window_start_s,delay,accuracy,precision,composite\n");
    for s in scores {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            s.window_start.as_secs_f64(),
            s.delay,
            s.accuracy,
            s.precision,
            s.composite
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Export settlements as `hour,energy_cost,reward,saving`.
pub fn export_settlements(rows: &[(usize, Settlement)], path: &Path) -> Result<()> {
    let mut out = String::from("hour,energy_cost,reward,saving\n");
    for (hour, s) in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            hour, s.energy_cost, s.reward, s.saving
        ));
    }
    fs::write(path, out)?;
    Ok(())
}
