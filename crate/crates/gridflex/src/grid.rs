//! Small unit-commitment / economic-dispatch model with regulation-reserve
//! constraints and output-dependent emission rates.
//!
//! Hours are independent (no inter-temporal constraints); commitment is
//! solved exactly by enumerating commitment sets (fleets up to 12
//! generators) with equal-lambda merit-order dispatch inside each set.
//! Emission rates rise as a generator backs off peak output, which is what
//! makes reserve provision carry a hidden carbon cost: holding reserves
//! forces committed plants below peak, and performing regulation moves
//! them around their dispatch point. Data-center regulation provision
//! (`dc_regulation`) displaces both reserve requirements, floored at zero.

use crate::error::{Error, Result};
use crate::signals::RegulationSignal;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Enumeration bound for exact commitment.
pub const MAX_ENUM_GENERATORS: usize = 12;

/// One dispatchable generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub name: String,
    /// Minimum stable operating load, MW.
    pub p_min: f64,
    /// Peak output, MW.
    pub p_max: f64,
    /// No-load cost while committed, $/h.
    pub cost_c0: f64,
    /// Marginal cost, $/MWh.
    pub cost_c1: f64,
    /// Emission rate at peak output, tCO2/MWh.
    pub e_peak: f64,
    /// Inefficiency slope: emission-rate growth as output drops below peak.
    pub eta: f64,
}

impl Generator {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.p_min && self.p_min <= self.p_max) {
            return Err(Error::Parameter(format!(
                "generator {}: need 0 < p_min <= p_max",
                self.name
            )));
        }
        if !(self.e_peak >= 0.0 && self.eta >= 0.0) {
            return Err(Error::Parameter(format!(
                "generator {}: emission parameters must be non-negative",
                self.name
            )));
        }
        if !(self.cost_c0 >= 0.0 && self.cost_c1 >= 0.0) {
            return Err(Error::Parameter(format!(
                "generator {}: costs must be non-negative",
                self.name
            )));
        }
        Ok(())
    }
}

/// Emission rate at output `p`: `e_peak * (1 + eta * (1 - p / p_max))`,
/// non-increasing in output.
pub fn emission_rate(g: &Generator, p: f64) -> Result<f64> {
    g.validate()?;
    if !(g.p_min - 1e-9 <= p && p <= g.p_max + 1e-9) {
        return Err(Error::Parameter(format!(
            "output {p} MW outside [{}, {}] for {}",
            g.p_min, g.p_max, g.name
        )));
    }
    Ok(rate_unchecked(g, p))
}

fn rate_unchecked(g: &Generator, p: f64) -> f64 {
    g.e_peak * (1.0 + g.eta * (1.0 - p / g.p_max))
}

/// A unit-commitment instance.
#[derive(Debug, Clone)]
pub struct UcProblem {
    pub generators: Vec<Generator>,
    /// Demand per hour, MW, over the horizon.
    pub demand: Vec<f64>,
    /// Regulation-up reserve the grid must hold, MW.
    pub reserve_up_req: f64,
    /// Regulation-down reserve the grid must hold, MW.
    pub reserve_down_req: f64,
    /// Data-center regulation provision, MW: subtracted from both reserve
    /// requirements, floored at zero.
    pub dc_regulation: f64,
    /// Reference signal for integrating reserve-performance emissions.
    pub reference_signal: RegulationSignal,
}

impl UcProblem {
    pub fn validate(&self) -> Result<()> {
        if self.generators.is_empty() {
            return Err(Error::Parameter("fleet is empty".into()));
        }
        if self.generators.len() > MAX_ENUM_GENERATORS {
            return Err(Error::Parameter(format!(
                "fleet of {} exceeds the enumeration bound of {MAX_ENUM_GENERATORS}",
                self.generators.len()
            )));
        }
        for g in &self.generators {
            g.validate()?;
        }
        if self.demand.is_empty() {
            return Err(Error::Parameter("demand horizon is empty".into()));
        }
        if self.demand.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::Parameter("demand must be non-negative".into()));
        }
        if !(self.reserve_up_req >= 0.0 && self.reserve_down_req >= 0.0) {
            return Err(Error::Parameter("reserve requirements must be non-negative".into()));
        }
        if !(self.dc_regulation >= 0.0) {
            return Err(Error::Parameter("dc_regulation must be non-negative".into()));
        }
        Ok(())
    }

    /// Residual reserve the fleet must hold after data-center provision.
    pub fn residual_reserves(&self) -> (f64, f64) {
        (
            (self.reserve_up_req - self.dc_regulation).max(0.0),
            (self.reserve_down_req - self.dc_regulation).max(0.0),
        )
    }
}

/// Commitment, dispatch, and reserve split for one hour.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HourDispatch {
    pub committed: Vec<bool>,
    /// Dispatch per generator, MW (0 when not committed).
    pub power: Vec<f64>,
    /// Up-reserve held per generator, MW.
    pub reserve_up: Vec<f64>,
    /// Down-reserve held per generator, MW.
    pub reserve_down: Vec<f64>,
    pub cost: f64,
}

/// Full-horizon solution with emissions totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UcSolution {
    pub hours: Vec<HourDispatch>,
    pub total_cost: f64,
    /// Emissions of nominal energy generation, tCO2.
    pub c_generation: f64,
    /// Emissions of performing regulation around the dispatch point, tCO2.
    pub c_reserve: f64,
    pub committed_plant_hours: usize,
}

impl UcSolution {
    pub fn total_emissions(&self) -> f64 {
        self.c_generation + self.c_reserve
    }
}

/// Equal-lambda merit-order dispatch inside a fixed commitment set.
///
/// All committed units start at p_min; remaining energy is assigned in
/// ascending marginal-cost order, groups of equal cost filling pro rata so
/// identical units share load equally.
fn dispatch_set(gens: &[Generator], members: &[usize], demand: f64) -> Option<Vec<f64>> {
    let sum_min: f64 = members.iter().map(|&i| gens[i].p_min).sum();
    let sum_max: f64 = members.iter().map(|&i| gens[i].p_max).sum();
    if demand < sum_min - 1e-9 || demand > sum_max + 1e-9 {
        return None;
    }
    let mut power = vec![0.0; gens.len()];
    for &i in members {
        power[i] = gens[i].p_min;
    }
    let mut remaining = demand - sum_min;
    // Group members by identical marginal cost, ascending.
    let mut order: Vec<usize> = members.to_vec();
    order.sort_by(|&a, &b| {
        gens[a]
            .cost_c1
            .partial_cmp(&gens[b].cost_c1)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut idx = 0;
    while idx < order.len() && remaining > 1e-12 {
        let c1 = gens[order[idx]].cost_c1;
        let mut group = Vec::new();
        while idx < order.len() && (gens[order[idx]].cost_c1 - c1).abs() <= 1e-12 {
            group.push(order[idx]);
            idx += 1;
        }
        let group_room: f64 = group.iter().map(|&i| gens[i].p_max - gens[i].p_min).sum();
        if group_room <= 0.0 {
            continue;
        }
        let take = remaining.min(group_room);
        let fill = take / group_room;
        for &i in &group {
            power[i] += fill * (gens[i].p_max - gens[i].p_min);
        }
        remaining -= take;
    }
    if remaining > 1e-6 {
        return None;
    }
    Some(power)
}

/// Greedy reserve split in ascending marginal-cost order, bounded by each
/// generator's headroom around its dispatch point.
fn split_reserves(
    gens: &[Generator],
    members: &[usize],
    power: &[f64],
    ru_req: f64,
    rd_req: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut order: Vec<usize> = members.to_vec();
    order.sort_by(|&a, &b| {
        gens[a]
            .cost_c1
            .partial_cmp(&gens[b].cost_c1)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut ru = vec![0.0; gens.len()];
    let mut rd = vec![0.0; gens.len()];
    let mut ru_left = ru_req;
    let mut rd_left = rd_req;
    for &i in &order {
        let up_room = (gens[i].p_max - power[i]).max(0.0);
        let take = ru_left.min(up_room);
        ru[i] = take;
        ru_left -= take;
        let down_room = (power[i] - gens[i].p_min).max(0.0);
        let take = rd_left.min(down_room);
        rd[i] = take;
        rd_left -= take;
    }
    if ru_left > 1e-9 || rd_left > 1e-9 {
        return None;
    }
    Some((ru, rd))
}

/// Solve the unit-commitment problem exactly by commitment-set enumeration.
///
/// Infeasible hours report the hour and the binding constraint.
pub fn solve_uc(problem: &UcProblem) -> Result<UcSolution> {
    problem.validate()?;
    let gens = &problem.generators;
    let n = gens.len();
    let (ru_req, rd_req) = problem.residual_reserves();
    let mut hours = Vec::with_capacity(problem.demand.len());
    let mut total_cost = 0.0;
    for (h, &demand) in problem.demand.iter().enumerate() {
        let mut best: Option<HourDispatch> = None;
        for mask in 1u32..(1 << n) {
            let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let sum_min: f64 = members.iter().map(|&i| gens[i].p_min).sum();
            let sum_max: f64 = members.iter().map(|&i| gens[i].p_max).sum();
            // Reserve feasibility depends only on aggregate headroom.
            if demand + ru_req > sum_max + 1e-9 || demand - rd_req < sum_min - 1e-9 {
                continue;
            }
            let Some(power) = dispatch_set(gens, &members, demand) else {
                continue;
            };
            let cost: f64 = members
                .iter()
                .map(|&i| gens[i].cost_c0 + gens[i].cost_c1 * power[i])
                .sum();
            let better = match &best {
                None => true,
                Some(b) => cost < b.cost - 1e-9,
            };
            if better {
                let Some((ru, rd)) = split_reserves(gens, &members, &power, ru_req, rd_req) else {
                    continue;
                };
                let mut committed = vec![false; n];
                for &i in &members {
                    committed[i] = true;
                }
                best = Some(HourDispatch {
                    committed,
                    power,
                    reserve_up: ru,
                    reserve_down: rd,
                    cost,
                });
            }
        }
        let Some(hour) = best else {
            let max_cap: f64 = gens.iter().map(|g| g.p_max).sum();
            let constraint = if demand + ru_req > max_cap {
                format!(
                    "demand {demand} MW + up-reserve {ru_req} MW exceeds fleet capacity {max_cap} MW"
                )
            } else {
                format!(
                    "no commitment set can hold {rd_req} MW of down-reserve at demand {demand} MW"
                )
            };
            return Err(Error::Infeasible(format!("hour {h}: {constraint}")));
        };
        total_cost += hour.cost;
        hours.push(hour);
    }
    let mut solution = UcSolution {
        hours,
        total_cost,
        c_generation: 0.0,
        c_reserve: 0.0,
        committed_plant_hours: 0,
    };
    let em = grid_emissions(&solution, problem)?;
    solution.c_generation = em.c_generation;
    solution.c_reserve = em.c_reserve;
    solution.committed_plant_hours = solution
        .hours
        .iter()
        .map(|h| h.committed.iter().filter(|c| **c).count())
        .sum();
    Ok(solution)
}

/// Emissions of a solved schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmissionsBreakdown {
    pub c_generation: f64,
    pub c_reserve: f64,
    pub total: f64,
}

/// Emissions of generation plus the cost of performing regulation.
///
/// Generation emissions integrate the nominal dispatch. Reserve-performance
/// emissions average, over the reference signal, the emission change when
/// each generator swings around its dispatch point within its held reserve:
/// generators move opposite the load-side signal, so r > 0 consumes
/// down-reserve and r < 0 consumes up-reserve. A zero signal contributes
/// nothing: providing reserves is free until they perform.
pub fn grid_emissions(solution: &UcSolution, problem: &UcProblem) -> Result<EmissionsBreakdown> {
    problem.validate()?;
    let gens = &problem.generators;
    if solution.hours.len() != problem.demand.len() {
        return Err(Error::Parameter(
            "solution horizon does not match problem horizon".into(),
        ));
    }
    let samples = &problem.reference_signal.samples;
    let mut c_gen = 0.0;
    let mut c_res = 0.0;
    for hour in &solution.hours {
        for (i, g) in gens.iter().enumerate() {
            if !hour.committed[i] {
                continue;
            }
            let p = hour.power[i];
            let nominal = p * rate_unchecked(g, p);
            c_gen += nominal;
            let ru = hour.reserve_up[i];
            let rd = hour.reserve_down[i];
            if ru <= 0.0 && rd <= 0.0 {
                continue;
            }
            let mean_delta: f64 = samples
                .iter()
                .map(|&r| {
                    let deviation = if r >= 0.0 { -r * rd } else { -r * ru };
                    let swung = (p + deviation).clamp(g.p_min, g.p_max);
                    swung * rate_unchecked(g, swung) - nominal
                })
                .sum::<f64>()
                / samples.len() as f64;
            c_res += mean_delta;
        }
    }
    Ok(EmissionsBreakdown {
        c_generation: c_gen,
        c_reserve: c_res,
        total: c_gen + c_res,
    })
}

/// Marginal carbon emission of regulation reserves.
#[derive(Debug, Clone)]
pub struct MceResult {
    /// Grid-emission change per MW of displaced reserves over the horizon,
    /// tCO2/MW.
    pub mce: f64,
    pub with_dc: UcSolution,
    pub without_dc: UcSolution,
}

/// Solve the grid with and without `r_dc` MW of data-center regulation and
/// report the per-MW emission difference.
pub fn mce_resv(problem_without_dc: &UcProblem, r_dc: f64) -> Result<MceResult> {
    if !(r_dc > 0.0) {
        return Err(Error::Parameter("r_dc must be positive".into()));
    }
    let without = solve_uc(problem_without_dc)?;
    let mut with_problem = problem_without_dc.clone();
    with_problem.dc_regulation = r_dc;
    let with = solve_uc(&with_problem)?;
    let mce = (without.total_emissions() - with.total_emissions()) / r_dc;
    Ok(MceResult {
        mce,
        with_dc: with,
        without_dc: without,
    })
}

/// The naive per-MW emission model: the reserve plant's carbon intensity
/// times the energy actually swung per MW of provision over the horizon.
pub fn simple_mce(ci_resv: f64, signal: &RegulationSignal, horizon_h: f64) -> Result<f64> {
    if !(ci_resv >= 0.0) {
        return Err(Error::Parameter("carbon intensity must be non-negative".into()));
    }
    if !(horizon_h >= 0.0) {
        return Err(Error::Parameter("horizon must be non-negative".into()));
    }
    let mean_abs =
        signal.samples.iter().map(|r| r.abs()).sum::<f64>() / signal.samples.len() as f64;
    Ok(ci_resv * mean_abs * horizon_h)
}

/// Export a solution as `hour,generator,committed,p_mw,ru_mw,rd_mw`.
pub fn export_uc_csv(solution: &UcSolution, problem: &UcProblem, path: &Path) -> Result<()> {
    let mut out = String::from("hour,generator,committed,p_mw,ru_mw,rd_mw\n");
    for (h, hour) in solution.hours.iter().enumerate() {
        for (i, g) in problem.generators.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6}\n",
                h,
                g.name,
                u8::from(hour.committed[i]),
                hour.power[i],
                hour.reserve_up[i],
                hour.reserve_down[i]
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}
