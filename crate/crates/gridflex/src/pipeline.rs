//! Config-driven scenario runners behind the `gen`, `simulate`, `grid`, and
//! `report` commands, plus their file outputs.
//!
//! `simulate` runs, per hour: derive market inputs from the hour's LC trace,
//! optimize the bid, track the regulation signal, score it, settle it, and
//! feed the realized score into the next hour's optimizer. `grid` solves the
//! unit commitment with and without data-center regulation and reports the
//! marginal carbon emission of reserves. `report` combines both summaries
//! into the four-scenario carbon and TCO comparison.

use crate::carbon::{build_report, CarbonReport, Scenario, ScenarioObservations, TcoReport};
use crate::config::{MarketSection, ScenarioConfig};
use crate::controller::{aggregate_throughput, run_tracking, StepRecord};
use crate::error::{Error, Result};
use crate::grid::{export_uc_csv, mce_resv, MceResult, UcProblem};
use crate::market::{
    export_scores, export_settlements, hourly_settlement, optimize_bid, Bid, BidOutcome,
    MarketInputs, PerformanceScore, Settlement,
};
use crate::powermodel::ServerSpec;
use crate::signals::LoadTrace;
use crate::split_seed;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use std::time::Duration;

pub const HOURS_PER_YEAR: f64 = 8760.0;

/// One simulated hour.
#[derive(Debug, Clone)]
pub struct HourOutcome {
    pub hour: usize,
    /// `None` when the optimizer withdrew for the hour.
    pub bid: Option<Bid>,
    pub predicted_saving: f64,
    pub inputs: MarketInputs,
    pub records: Vec<StepRecord>,
    pub scores: Vec<PerformanceScore>,
    pub settlement: Settlement,
}

/// Horizon-level aggregates, per server.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSummary {
    pub horizon_hours: usize,
    pub seed: u64,
    /// Mean committed provision (r_up + r_down)/2 over the horizon, W.
    pub mean_provision_w: f64,
    /// Server energy with the LC workload only, MWh over the horizon.
    pub lc_energy_mwh: f64,
    /// Server energy as tracked (achieved power), MWh over the horizon.
    pub total_energy_mwh: f64,
    /// Settled regulation reward, $ over the horizon.
    pub revenue: f64,
    pub be_gpu_hours_lost: f64,
    pub mean_composite: f64,
    pub be_throughput: f64,
    pub withdrawn_hours: usize,
}

#[derive(Debug, Clone)]
pub struct SimArtifacts {
    pub hours: Vec<HourOutcome>,
    pub summary: SimSummary,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = (q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx]
}

/// Derive the optimizer's inputs from one hour of the LC trace.
///
/// The baseline is the mean LC server power; the swing spans the
/// (1-q, q) quantile range of LC power; the ceiling is a low quantile of the
/// instantaneous achievable maximum (LC power plus every BE-ownable GPU at
/// its cap max), so the bid only relies on headroom that is almost always
/// there.
pub fn derive_market_inputs(
    spec: &ServerSpec,
    trace_hour: &LoadTrace,
    market: &MarketSection,
    perf_score: f64,
) -> MarketInputs {
    let n = spec.n_gpus as f64;
    let mut lc_w: Vec<f64> = trace_hour
        .samples
        .iter()
        .map(|l| spec.p_cpu_base + l * n * spec.gpu_lc_peak)
        .collect();
    let mut ach_max: Vec<f64> = trace_hour
        .samples
        .iter()
        .zip(&lc_w)
        .map(|(l, w)| {
            let be = spec.n_gpus - ((l * n).ceil() as usize).min(spec.n_gpus);
            w + be as f64 * spec.gpu.cap_max
        })
        .collect();
    let p_avg = lc_w.iter().sum::<f64>() / lc_w.len() as f64;
    lc_w.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ach_max.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q_hi = market.swing_quantile.clamp(0.5, 1.0);
    let p_var = quantile(&lc_w, q_hi) - quantile(&lc_w, 1.0 - q_hi);
    let p_max = quantile(&ach_max, market.p_max_quantile);
    MarketInputs {
        p_avg,
        p_var,
        p_max,
        cost: market.cost_per_wh,
        rew_up: market.rew_up_per_wh,
        rew_down: market.rew_down_per_wh,
        perf_score,
        threshold: market.threshold,
    }
}

/// Run the hourly bid/track/score/settle pipeline over the whole horizon.
pub fn run_simulate(cfg: &ScenarioConfig, base_dir: &Path) -> Result<SimArtifacts> {
    let spec = cfg.server_spec();
    spec.validate()?;
    let signal = cfg.load_signal(base_dir)?;
    let trace = cfg.load_trace(base_dir)?;
    let step_s = signal.step.as_secs_f64();
    let steps_per_hour = (3600.0 / step_s).round() as usize;
    if signal.len() < steps_per_hour * cfg.run.horizon_hours {
        return Err(Error::Config(format!(
            "signal has {} samples but the horizon needs {}",
            signal.len(),
            steps_per_hour * cfg.run.horizon_hours
        )));
    }

    let mut perf = cfg.market.first_hour_perf;
    let mut hours = Vec::with_capacity(cfg.run.horizon_hours);
    for h in 0..cfg.run.horizon_hours {
        let sig_h = signal.slice(h * steps_per_hour, steps_per_hour)?;
        let trace_h = trace.slice_time(h as f64 * 3600.0, 3600.0)?;
        let inputs = derive_market_inputs(&spec, &trace_h, &cfg.market, perf);
        let outcome = match optimize_bid(&inputs, cfg.market.symmetric) {
            Ok(o) => o,
            Err(Error::Infeasible(_)) => BidOutcome::Withdraw,
            Err(e) => return Err(e),
        };
        let hour = match outcome {
            BidOutcome::Optimal {
                bid,
                predicted_saving,
            } => {
                let seed = split_seed(cfg.run.seed, &format!("tracking/{h}"));
                let mut records = run_tracking(&spec, &trace_h, &sig_h, &bid, seed)?;
                let mut scores = crate::market::performance_score(&sig_h, &records, &bid)?;
                let settlement = hourly_settlement(&bid, &scores, &inputs)?;
                perf = scores.iter().map(|s| s.composite).sum::<f64>() / scores.len() as f64;
                let offset = Duration::from_secs(3600 * h as u64);
                for r in &mut records {
                    r.timestamp += offset;
                }
                for s in &mut scores {
                    s.window_start += offset;
                }
                HourOutcome {
                    hour: h,
                    bid: Some(bid),
                    predicted_saving,
                    inputs,
                    records,
                    scores,
                    settlement,
                }
            }
            BidOutcome::Withdraw => HourOutcome {
                hour: h,
                bid: None,
                predicted_saving: 0.0,
                inputs,
                records: Vec::new(),
                scores: Vec::new(),
                settlement: Settlement {
                    energy_cost: 0.0,
                    reward: 0.0,
                    saving: 0.0,
                },
            },
        };
        hours.push(hour);
    }

    let summary = summarize(cfg, &spec, &trace, &hours, step_s)?;
    Ok(SimArtifacts { hours, summary })
}

fn summarize(
    cfg: &ScenarioConfig,
    spec: &ServerSpec,
    trace: &LoadTrace,
    hours: &[HourOutcome],
    step_s: f64,
) -> Result<SimSummary> {
    let horizon_h = cfg.run.horizon_hours;
    // LC-only energy comes straight from the trace, so it does not depend on
    // bidding or tracking.
    let trace_step_h = trace.step.as_secs_f64() / 3600.0;
    let hour_of = |i: usize| (i as f64 * trace.step.as_secs_f64() / 3600.0).floor() as usize;
    let mut lc_energy_by_hour = vec![0.0; horizon_h];
    for (i, l) in trace.samples.iter().enumerate() {
        let h = hour_of(i);
        if h >= horizon_h {
            break;
        }
        lc_energy_by_hour[h] +=
            (spec.p_cpu_base + l * spec.n_gpus as f64 * spec.gpu_lc_peak) * trace_step_h / 1.0e6;
    }
    let lc_energy_mwh: f64 = lc_energy_by_hour.iter().sum();

    let step_h = step_s / 3600.0;
    let mut total_energy_mwh = 0.0;
    let mut revenue = 0.0;
    let mut hours_lost = 0.0;
    let mut provision_sum = 0.0;
    let mut withdrawn = 0;
    let mut all_records: Vec<StepRecord> = Vec::new();
    let mut composite_sum = 0.0;
    let mut composite_n = 0usize;
    for hour in hours {
        match &hour.bid {
            Some(bid) => {
                provision_sum += bid.provision() / 2.0;
                total_energy_mwh += hour
                    .records
                    .iter()
                    .map(|r| r.achieved_power * step_h)
                    .sum::<f64>()
                    / 1.0e6;
                hours_lost += hour
                    .records
                    .iter()
                    .map(|r| (1.0 - r.be_throughput) * r.be_gpus as f64 * step_h)
                    .sum::<f64>();
                revenue += hour.settlement.reward;
                composite_sum += hour.scores.iter().map(|s| s.composite).sum::<f64>();
                composite_n += hour.scores.len();
                all_records.extend(hour.records.iter().cloned());
            }
            None => {
                withdrawn += 1;
                // A withdrawn hour idles the BE side: LC-only energy.
                total_energy_mwh += lc_energy_by_hour[hour.hour];
            }
        }
    }
    let be_throughput = if all_records.is_empty() {
        1.0
    } else {
        aggregate_throughput(&all_records)?.be_throughput
    };
    Ok(SimSummary {
        horizon_hours: horizon_h,
        seed: cfg.run.seed,
        mean_provision_w: provision_sum / horizon_h as f64,
        lc_energy_mwh,
        total_energy_mwh,
        revenue,
        be_gpu_hours_lost: hours_lost,
        mean_composite: if composite_n > 0 {
            composite_sum / composite_n as f64
        } else {
            0.0
        },
        be_throughput,
        withdrawn_hours: withdrawn,
    })
}

/// Write `steps.csv`, `scores.csv`, `settlement.csv`, `bids.csv`, and
/// `sim_summary.json` into `out_dir`.
pub fn write_simulate(artifacts: &SimArtifacts, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let all_records: Vec<StepRecord> = artifacts
        .hours
        .iter()
        .flat_map(|h| h.records.iter().cloned())
        .collect();
    crate::controller::export_step_records(&all_records, &out_dir.join("steps.csv"))?;
    let all_scores: Vec<PerformanceScore> = artifacts
        .hours
        .iter()
        .flat_map(|h| h.scores.iter().copied())
        .collect();
    export_scores(&all_scores, &out_dir.join("scores.csv"))?;
    let settlements: Vec<(usize, Settlement)> = artifacts
        .hours
        .iter()
        .map(|h| (h.hour, h.settlement))
        .collect();
    export_settlements(&settlements, &out_dir.join("settlement.csv"))?;

    let mut bids = String::from("hour,p_fr_w,r_up_w,r_down_w,predicted_saving,withdrawn\n");
    for h in &artifacts.hours {
        match &h.bid {
            Some(b) => bids.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},0\n",
                h.hour, b.p_fr, b.r_up, b.r_down, h.predicted_saving
            )),
            None => bids.push_str(&format!("{},0.000000,0.000000,0.000000,0.000000,1\n", h.hour)),
        }
    }
    fs::write(out_dir.join("bids.csv"), bids)?;

    let json = serde_json::to_string_pretty(&artifacts.summary)
        .map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out_dir.join("sim_summary.json"), json)?;
    Ok(())
}

/// Grid-stage outputs.
#[derive(Debug, Clone)]
pub struct GridArtifacts {
    pub problem: UcProblem,
    pub r_dc_mw: f64,
    pub result: MceResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSummary {
    pub horizon_hours: usize,
    pub r_dc_mw: f64,
    /// Emission change per MW of displaced reserves over the horizon.
    pub mce_t_per_mw: f64,
    pub energy_served_mwh: f64,
    pub cost_without: f64,
    pub cost_with: f64,
    pub emissions_without_t: f64,
    pub emissions_with_t: f64,
    pub c_generation_without_t: f64,
    pub c_reserve_without_t: f64,
    pub plant_hours_without: usize,
    pub plant_hours_with: usize,
}

impl GridSummary {
    fn from_result(problem: &UcProblem, r_dc_mw: f64, result: &MceResult) -> Self {
        GridSummary {
            horizon_hours: problem.demand.len(),
            r_dc_mw,
            mce_t_per_mw: result.mce,
            energy_served_mwh: problem.demand.iter().sum(),
            cost_without: result.without_dc.total_cost,
            cost_with: result.with_dc.total_cost,
            emissions_without_t: result.without_dc.total_emissions(),
            emissions_with_t: result.with_dc.total_emissions(),
            c_generation_without_t: result.without_dc.c_generation,
            c_reserve_without_t: result.without_dc.c_reserve,
            plant_hours_without: result.without_dc.committed_plant_hours,
            plant_hours_with: result.with_dc.committed_plant_hours,
        }
    }
}

/// Solve the scenario's grid instance with and without the configured
/// data-center regulation.
pub fn run_grid(cfg: &ScenarioConfig, base_dir: &Path) -> Result<GridArtifacts> {
    if !(cfg.grid.dc_regulation_mw > 0.0) {
        return Err(Error::Config(
            "grid.dc_regulation_mw must be positive for the grid stage".into(),
        ));
    }
    let reference = cfg.load_signal(base_dir)?;
    let problem = UcProblem {
        generators: cfg.grid.generators.clone(),
        demand: cfg.grid.demand_mw.clone(),
        reserve_up_req: cfg.grid.reserve_up_mw,
        reserve_down_req: cfg.grid.reserve_down_mw,
        dc_regulation: 0.0,
        reference_signal: reference,
    };
    let result = mce_resv(&problem, cfg.grid.dc_regulation_mw)?;
    Ok(GridArtifacts {
        problem,
        r_dc_mw: cfg.grid.dc_regulation_mw,
        result,
    })
}

/// Write `uc_without.csv`, `uc_with.csv`, and `grid_summary.json`.
pub fn write_grid(artifacts: &GridArtifacts, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    export_uc_csv(
        &artifacts.result.without_dc,
        &artifacts.problem,
        &out_dir.join("uc_without.csv"),
    )?;
    export_uc_csv(
        &artifacts.result.with_dc,
        &artifacts.problem,
        &out_dir.join("uc_with.csv"),
    )?;
    let summary = GridSummary::from_result(&artifacts.problem, artifacts.r_dc_mw, &artifacts.result);
    let json =
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out_dir.join("grid_summary.json"), json)?;
    Ok(())
}

/// Sweep the data-center provision and write `mce_sweep.csv` as
/// `(r_dc, mce)` pairs.
pub fn run_grid_sweep(cfg: &ScenarioConfig, base_dir: &Path, values: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::with_capacity(values.len());
    for &r_dc in values {
        let mut swept = cfg.clone();
        swept.grid.dc_regulation_mw = r_dc;
        let artifacts = run_grid(&swept, base_dir)?;
        rows.push((r_dc, artifacts.result.mce));
    }
    Ok(rows)
}

pub fn write_grid_sweep(rows: &[(f64, f64)], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut out = String::from("r_dc_mw,mce_t_per_mw\n");
    for (r, m) in rows {
        out.push_str(&format!("{:.6},{:.6}\n", r, m));
    }
    fs::write(out_dir.join("mce_sweep.csv"), out)?;
    Ok(())
}

/// Four-scenario comparison produced by the report stage.
#[derive(Debug, Clone, Serialize)]
pub struct ReportArtifacts {
    pub observations: ScenarioObservations,
    pub scenarios: Vec<ScenarioReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub carbon: CarbonReport,
    pub tco: TcoReport,
}

/// Combine prior `simulate` and `grid` outputs in `out_dir` into annualized
/// carbon and TCO reports for all four scenarios.
pub fn run_report(cfg: &ScenarioConfig, out_dir: &Path) -> Result<ReportArtifacts> {
    let sim: SimSummary = read_json(&out_dir.join("sim_summary.json"))?;
    let grid: GridSummary = read_json(&out_dir.join("grid_summary.json"))?;

    let n_servers = cfg.dc.n_servers() as f64;
    let annualize_sim = HOURS_PER_YEAR / sim.horizon_hours as f64;
    let annualize_grid = HOURS_PER_YEAR / grid.horizon_hours as f64;
    let ci_gen = if grid.energy_served_mwh > 0.0 {
        grid.c_generation_without_t / grid.energy_served_mwh
    } else {
        0.0
    };
    let observations = ScenarioObservations {
        lc_energy_mwh_per_yr: sim.lc_energy_mwh * annualize_sim * n_servers,
        total_energy_mwh_per_yr: sim.total_energy_mwh * annualize_sim * n_servers,
        provision_mw: sim.mean_provision_w * n_servers / 1.0e6,
        mce_t_per_mw_yr: grid.mce_t_per_mw * annualize_grid,
        ci_gen_t_per_mwh: ci_gen,
        revenue_per_yr: sim.revenue * annualize_sim * n_servers,
        be_gpu_hours_lost_per_yr: sim.be_gpu_hours_lost * annualize_sim * n_servers,
    };
    let mut scenarios = Vec::with_capacity(Scenario::ALL.len());
    for scenario in Scenario::ALL {
        let (carbon, tco) = build_report(scenario, &cfg.dc, &cfg.prices, &observations)?;
        scenarios.push(ScenarioReport { carbon, tco });
    }
    Ok(ReportArtifacts {
        observations,
        scenarios,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|_| Error::MissingInput(format!("{} (run the producing stage first)", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::MissingInput(format!("{}: {e}", path.display())))
}

/// Write `carbon_report.json`, `tco_report.json`, and the human-readable
/// `comparison.txt`.
pub fn write_report(artifacts: &ReportArtifacts, out_dir: &Path, horizon_hours: usize) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let carbon: Vec<&CarbonReport> = artifacts.scenarios.iter().map(|s| &s.carbon).collect();
    let tco: Vec<&TcoReport> = artifacts.scenarios.iter().map(|s| &s.tco).collect();
    fs::write(
        out_dir.join("carbon_report.json"),
        serde_json::to_string_pretty(&carbon).map_err(|e| Error::Config(e.to_string()))?,
    )?;
    fs::write(
        out_dir.join("tco_report.json"),
        serde_json::to_string_pretty(&tco).map_err(|e| Error::Config(e.to_string()))?,
    )?;

    let mut text = String::new();
    text.push_str(&format!(
        "# Annualized from a {horizon_hours}-hour simulation horizon by linear scaling.\n"
    ));
    text.push_str("# Carbon in tCO2eq/yr, money in $/yr.\n");
    text.push_str(&format!(
        "{:<10} {:>14} {:>14} {:>14} {:>14} {:>16}\n",
        "scenario", "c_op", "c_em", "c_exogenous", "c_op_w_rs", "tco_total"
    ));
    for s in &artifacts.scenarios {
        text.push_str(&format!(
            "{:<10} {:>14.1} {:>14.1} {:>14.1} {:>14.1} {:>16.0}\n",
            s.carbon.scenario.label(),
            s.carbon.c_op,
            s.carbon.c_em_amortized,
            s.carbon.c_exogenous,
            s.carbon.c_op_with_rs,
            s.tco.total
        ));
    }
    fs::write(out_dir.join("comparison.txt"), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn market_inputs_shrink_with_load() {
        let spec = ServerSpec::default();
        let market = MarketSection::default();
        let mk = |mean: f64| {
            crate::signals::generate_load_trace(
                mean,
                4.0,
                (mean - 8.0).max(0.0),
                (mean + 8.0).min(100.0),
                Duration::from_secs(3600),
                Duration::from_secs(60),
                3,
            )
            .unwrap()
        };
        let low = derive_market_inputs(&spec, &mk(10.0), &market, 0.9);
        let mid = derive_market_inputs(&spec, &mk(50.0), &market, 0.9);
        let high = derive_market_inputs(&spec, &mk(80.0), &market, 0.9);
        let room = |i: &MarketInputs| i.p_max - (i.p_avg + i.p_var / 2.0);
        assert!(room(&low) > room(&mid) && room(&mid) > room(&high));
    }
}
