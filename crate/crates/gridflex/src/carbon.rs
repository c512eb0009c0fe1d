//! Carbon and cost accounting: operational, embodied, and exogenous carbon,
//! the UPS comparison scenario, and TCO with opportunity cost.
//!
//! All reports are on an annual basis; per-horizon simulation outputs scale
//! linearly to a year before they land here.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Per-server manufacturing footprint components, kgCO2eq.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerComponents {
    pub gpus_per_server: usize,
    pub gpu_kg: f64,
    pub cpu_kg: f64,
    pub dram_kg: f64,
    pub disk_kg: f64,
}

impl Default for ServerComponents {
    fn default() -> Self {
        ServerComponents {
            gpus_per_server: 8,
            gpu_kg: 30.0,
            cpu_kg: 18.0,
            dram_kg: 7.0,
            disk_kg: 20.0,
        }
    }
}

/// Data-center-scale description for carbon and TCO accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcSpec {
    pub capacity_mw: f64,
    pub pue: f64,
    pub server_power_kw: f64,
    pub components: ServerComponents,
    pub embodied_amortization_years: f64,
    pub ups_capacity_mwh: f64,
    pub ups_kg_per_mwh: f64,
    /// Lifespan fraction lost when the UPS provides regulation.
    pub ups_lifespan_penalty: f64,
}

impl Default for DcSpec {
    fn default() -> Self {
        DcSpec {
            capacity_mw: 100.0,
            pue: 1.09,
            server_power_kw: 7.0,
            components: ServerComponents::default(),
            embodied_amortization_years: 5.0,
            ups_capacity_mwh: 100.0,
            ups_kg_per_mwh: 74_000.0,
            ups_lifespan_penalty: 0.28,
        }
    }
}

impl DcSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.pue >= 1.0) {
            return Err(Error::Parameter("PUE must be at least 1".into()));
        }
        if !(self.capacity_mw >= 0.0
            && self.server_power_kw > 0.0
            && self.embodied_amortization_years > 0.0
            && self.ups_capacity_mwh >= 0.0
            && self.ups_kg_per_mwh >= 0.0)
        {
            return Err(Error::Parameter("data-center parameters must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.ups_lifespan_penalty) {
            return Err(Error::Parameter("UPS lifespan penalty must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Servers fitting within the power capacity, with PUE applied per
    /// server.
    pub fn n_servers(&self) -> usize {
        (self.capacity_mw * 1000.0 / (self.server_power_kw * self.pue)).floor() as usize
    }
}

/// `C_op = E_DC x CI_gen`, tCO2eq.
pub fn operational_carbon(e_dc_mwh: f64, ci_gen_t_per_mwh: f64) -> Result<f64> {
    if !(e_dc_mwh >= 0.0 && ci_gen_t_per_mwh >= 0.0) {
        return Err(Error::Parameter("inputs must be non-negative".into()));
    }
    Ok(e_dc_mwh * ci_gen_t_per_mwh)
}

/// Grid-side savings from regulation provision: `R_DC x MCE_resv`, tCO2eq.
pub fn exogenous_carbon(r_dc_mw: f64, mce_t_per_mw: f64) -> Result<f64> {
    if !(r_dc_mw >= 0.0) {
        return Err(Error::Parameter("provision must be non-negative".into()));
    }
    Ok(r_dc_mw * mce_t_per_mw)
}

/// Operational carbon net of exogenous savings; may go negative when
/// grid-side savings outweigh the facility's own emissions.
pub fn op_with_rs(c_op: f64, c_exogenous: f64) -> f64 {
    c_op - c_exogenous
}

/// Amortized embodied carbon, split into server fleet and UPS shares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmbodiedBreakdown {
    pub per_server_kg: f64,
    pub dc_amortized_t_per_yr: f64,
    pub ups_amortized_t_per_yr: f64,
}

impl EmbodiedBreakdown {
    pub fn total_t_per_yr(&self) -> f64 {
        self.dc_amortized_t_per_yr + self.ups_amortized_t_per_yr
    }
}

/// Embodied carbon from component footprints, amortized over the
/// amortization window. Regulation duty shortens the UPS lifespan, inflating
/// its amortized share by `1 / (1 - penalty)`.
pub fn embodied_carbon(spec: &DcSpec, ups_provides_regulation: bool) -> Result<EmbodiedBreakdown> {
    spec.validate()?;
    let c = &spec.components;
    let per_server_kg =
        c.gpus_per_server as f64 * c.gpu_kg + c.cpu_kg + c.dram_kg + c.disk_kg;
    let dc_t_per_yr =
        per_server_kg * spec.n_servers() as f64 / spec.embodied_amortization_years / 1000.0;
    let mut ups_t_per_yr = spec.ups_capacity_mwh * spec.ups_kg_per_mwh
        / spec.embodied_amortization_years
        / 1000.0;
    if ups_provides_regulation {
        ups_t_per_yr /= 1.0 - spec.ups_lifespan_penalty;
    }
    Ok(EmbodiedBreakdown {
        per_server_kg,
        dc_amortized_t_per_yr: dc_t_per_yr,
        ups_amortized_t_per_yr: ups_t_per_yr,
    })
}

/// Price inputs for the TCO model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Prices {
    pub elec_per_kwh: f64,
    /// Opportunity price of one lost BE GPU hour, $/h.
    pub gpu_hour: f64,
    /// Facility construction cost, $/W.
    pub facility_per_w: f64,
    pub server_cost: f64,
    /// Regulation capacity reward, $ per MWh of provision.
    pub reward_per_mwh: f64,
    /// Provision share a CPU-only service achieves relative to GPUs.
    pub cpu_provision_share: f64,
    /// Fraction of UPS capacity usable for regulation.
    pub ups_provision_fraction: f64,
    pub infra_amortization_years: f64,
    pub server_amortization_years: f64,
}

impl Default for Prices {
    fn default() -> Self {
        Prices {
            elec_per_kwh: 0.096,
            gpu_hour: 2.0,
            facility_per_w: 8.0,
            server_cost: 235_000.0,
            reward_per_mwh: 7.0,
            cpu_provision_share: 0.2,
            ups_provision_fraction: 0.2,
            infra_amortization_years: 15.0,
            server_amortization_years: 5.0,
        }
    }
}

impl Prices {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.elec_per_kwh,
            self.gpu_hour,
            self.facility_per_w,
            self.server_cost,
            self.reward_per_mwh,
            self.cpu_provision_share,
            self.ups_provision_fraction,
        ];
        if all.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Parameter("prices must be non-negative".into()));
        }
        if !(self.infra_amortization_years > 0.0 && self.server_amortization_years > 0.0) {
            return Err(Error::Parameter("amortization windows must be positive".into()));
        }
        Ok(())
    }
}

/// Annualized simulation aggregates feeding the TCO model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SimOutputs {
    /// Fleet IT energy, MWh/yr (before PUE).
    pub energy_mwh_per_yr: f64,
    pub revenue_per_yr: f64,
    pub be_gpu_hours_lost_per_yr: f64,
}

/// Annual cost breakdown, $/yr.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TcoReport {
    pub capex_servers: f64,
    pub capex_infra: f64,
    pub opex_power: f64,
    pub regulation_revenue: f64,
    pub opportunity_cost: f64,
    pub total: f64,
}

/// Annual TCO: amortized CapEx + power OpEx - regulation revenue +
/// opportunity cost of lost BE throughput.
pub fn tco(spec: &DcSpec, prices: &Prices, sim: &SimOutputs) -> Result<TcoReport> {
    spec.validate()?;
    prices.validate()?;
    if !(sim.energy_mwh_per_yr >= 0.0 && sim.be_gpu_hours_lost_per_yr >= 0.0) {
        return Err(Error::Parameter("simulation outputs must be non-negative".into()));
    }
    let capex_infra =
        spec.capacity_mw * 1.0e6 * prices.facility_per_w / prices.infra_amortization_years;
    let capex_servers =
        spec.n_servers() as f64 * prices.server_cost / prices.server_amortization_years;
    let opex_power = sim.energy_mwh_per_yr * spec.pue * prices.elec_per_kwh * 1000.0;
    let opportunity_cost = sim.be_gpu_hours_lost_per_yr * prices.gpu_hour;
    let total = capex_servers + capex_infra + opex_power - sim.revenue_per_yr + opportunity_cost;
    Ok(TcoReport {
        capex_servers,
        capex_infra,
        opex_power,
        regulation_revenue: sim.revenue_per_yr,
        opportunity_cost,
        total,
    })
}

/// Which regulation-service configuration a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// LC workload only, no regulation service.
    Baseline,
    /// GPU power modulation with multi-GPU coordination.
    Ecocenter,
    /// CPU-side modulation only.
    CpuOnly,
    /// Regulation from the UPS batteries.
    UpsOnly,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Baseline,
        Scenario::Ecocenter,
        Scenario::CpuOnly,
        Scenario::UpsOnly,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Scenario::Baseline => "baseline",
            Scenario::Ecocenter => "ecocenter",
            Scenario::CpuOnly => "cpu_only",
            Scenario::UpsOnly => "ups_only",
        }
    }
}

/// Annual carbon breakdown, tCO2eq/yr. Exogenous savings are reported
/// positive; `c_op_with_rs = c_op - c_exogenous` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarbonReport {
    pub scenario: Scenario,
    pub c_op: f64,
    pub c_em_amortized: f64,
    pub c_exogenous: f64,
    pub c_op_with_rs: f64,
}

/// Annualized observations from the simulation and grid stages, at
/// data-center scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioObservations {
    /// Fleet IT energy with the LC workload only, MWh/yr (before PUE).
    pub lc_energy_mwh_per_yr: f64,
    /// Fleet IT energy with BE modulation running, MWh/yr (before PUE).
    pub total_energy_mwh_per_yr: f64,
    /// GPU-coordination regulation provision, MW.
    pub provision_mw: f64,
    /// Annualized marginal carbon emission of reserves, tCO2eq/MW/yr.
    pub mce_t_per_mw_yr: f64,
    /// Grid generation carbon intensity, tCO2eq/MWh.
    pub ci_gen_t_per_mwh: f64,
    /// Settled regulation revenue at fleet scale, $/yr.
    pub revenue_per_yr: f64,
    pub be_gpu_hours_lost_per_yr: f64,
}

/// Build the carbon and TCO reports for one scenario.
///
/// `cpu_only` scales the GPU provision by the CPU power share; `ups_only`
/// uses the configured fraction of UPS capacity and pays the lifespan
/// penalty on embodied carbon; `baseline` provides nothing.
pub fn build_report(
    scenario: Scenario,
    spec: &DcSpec,
    prices: &Prices,
    obs: &ScenarioObservations,
) -> Result<(CarbonReport, TcoReport)> {
    spec.validate()?;
    prices.validate()?;
    if obs.lc_energy_mwh_per_yr < 0.0 || obs.total_energy_mwh_per_yr < 0.0 {
        return Err(Error::Config("scenario observations incomplete".into()));
    }
    let provision_mw = match scenario {
        Scenario::Baseline => 0.0,
        Scenario::Ecocenter => obs.provision_mw,
        Scenario::CpuOnly => obs.provision_mw * prices.cpu_provision_share,
        Scenario::UpsOnly => spec.ups_capacity_mwh * prices.ups_provision_fraction,
    };
    let it_energy = match scenario {
        Scenario::Baseline | Scenario::UpsOnly => obs.lc_energy_mwh_per_yr,
        Scenario::Ecocenter | Scenario::CpuOnly => obs.total_energy_mwh_per_yr,
    };
    let e_dc = it_energy * spec.pue;
    let c_op = operational_carbon(e_dc, obs.ci_gen_t_per_mwh)?;
    let c_exo = exogenous_carbon(provision_mw, obs.mce_t_per_mw_yr)?;
    let embodied = embodied_carbon(spec, scenario == Scenario::UpsOnly)?;
    let carbon = CarbonReport {
        scenario,
        c_op,
        c_em_amortized: embodied.total_t_per_yr(),
        c_exogenous: c_exo,
        c_op_with_rs: op_with_rs(c_op, c_exo),
    };
    let (revenue, hours_lost) = match scenario {
        Scenario::Baseline => (0.0, 0.0),
        Scenario::Ecocenter => (obs.revenue_per_yr, obs.be_gpu_hours_lost_per_yr),
        // CPU modulation sells its scaled provision at the average reward and
        // does not consume GPU hours; the UPS likewise.
        Scenario::CpuOnly => (provision_mw * 8760.0 * prices.reward_per_mwh, 0.0),
        Scenario::UpsOnly => (provision_mw * 8760.0 * prices.reward_per_mwh, 0.0),
    };
    let sim = SimOutputs {
        energy_mwh_per_yr: it_energy,
        revenue_per_yr: revenue,
        be_gpu_hours_lost_per_yr: hours_lost,
    };
    let tco_report = tco(spec, prices, &sim)?;
    Ok((carbon, tco_report))
}
