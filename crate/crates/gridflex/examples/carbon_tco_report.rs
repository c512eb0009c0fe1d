//! Annual carbon and TCO accounting for a 100 MW data center across the
//! four service scenarios, from hand-supplied observations.
//!
//! ```bash
//! cargo run -p gridflex --example carbon_tco_report
//! ```

use gridflex::carbon::{
    build_report, embodied_carbon, DcSpec, Prices, Scenario, ScenarioObservations,
};

fn main() -> gridflex::Result<()> {
    let spec = DcSpec::default();
    let prices = Prices::default();
    println!(
        "{} servers fit in {} MW at {:.1} kW each (PUE {:.2})",
        spec.n_servers(),
        spec.capacity_mw,
        spec.server_power_kw,
        spec.pue
    );
    let embodied = embodied_carbon(&spec, false)?;
    println!(
        "embodied: {:.0} kg per server, {:.0} t/yr fleet + {:.0} t/yr UPS amortized\n",
        embodied.per_server_kg, embodied.dc_amortized_t_per_yr, embodied.ups_amortized_t_per_yr
    );

    // Observations as a mid-load simulated year would produce them.
    let obs = ScenarioObservations {
        lc_energy_mwh_per_yr: 310_000.0,
        total_energy_mwh_per_yr: 425_000.0,
        provision_mw: 35.0,
        mce_t_per_mw_yr: 730.0,
        ci_gen_t_per_mwh: 0.42,
        revenue_per_yr: 2.1e6,
        be_gpu_hours_lost_per_yr: 1.6e6,
    };

    println!(
        "{:<10} {:>12} {:>12} {:>12} {:>12} {:>14}",
        "scenario", "c_op t/yr", "c_em t/yr", "c_exo t/yr", "net t/yr", "tco $/yr"
    );
    for scenario in Scenario::ALL {
        let (carbon, tco) = build_report(scenario, &spec, &prices, &obs)?;
        println!(
            "{:<10} {:>12.0} {:>12.0} {:>12.0} {:>12.0} {:>14.0}",
            carbon.scenario.label(),
            carbon.c_op,
            carbon.c_em_amortized,
            carbon.c_exogenous,
            carbon.c_op_with_rs,
            tco.total
        );
    }
    println!("\n(negative net: grid-side savings outweigh the facility's own operational carbon)");
    Ok(())
}
