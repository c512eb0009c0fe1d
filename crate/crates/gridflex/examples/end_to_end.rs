//! The whole pipeline in one program: simulate an hour of regulation
//! service, solve the grid with and without the data center's provision,
//! and roll both into the four-scenario annual report. Equivalent to
//! running `gridflex simulate`, `gridflex grid`, and `gridflex report`
//! against the default scenario config.
//!
//! ```bash
//! cargo run -p gridflex --example end_to_end
//! ```

use gridflex::config::ScenarioConfig;
use gridflex::pipeline::{
    run_grid, run_report, run_simulate, write_grid, write_report, write_simulate,
};
use std::path::Path;

fn main() -> gridflex::Result<()> {
    let cfg = ScenarioConfig::default();
    let out_dir = std::env::temp_dir().join("gridflex_end_to_end");
    let base = Path::new(".");

    let sim = run_simulate(&cfg, base)?;
    write_simulate(&sim, &out_dir)?;
    let s = &sim.summary;
    println!(
        "simulate: mean composite {:.3}, provision {:.0} W/server, BE throughput {:.2}",
        s.mean_composite, s.mean_provision_w, s.be_throughput
    );

    let grid = run_grid(&cfg, base)?;
    write_grid(&grid, &out_dir)?;
    println!(
        "grid: {} -> {} plant-hours, mce {:.4} t/MW per hour",
        grid.result.without_dc.committed_plant_hours,
        grid.result.with_dc.committed_plant_hours,
        grid.result.mce
    );

    let report = run_report(&cfg, &out_dir)?;
    write_report(&report, &out_dir, cfg.run.horizon_hours)?;
    println!(
        "report: fleet provision {:.1} MW, annualized mce {:.0} t/MW/yr",
        report.observations.provision_mw, report.observations.mce_t_per_mw_yr
    );
    for sc in &report.scenarios {
        println!(
            "  {:<10} c_op {:>10.0} t/yr  c_exo {:>10.0} t/yr  net {:>11.0} t/yr",
            sc.carbon.scenario.label(),
            sc.carbon.c_op,
            sc.carbon.c_exogenous,
            sc.carbon.c_op_with_rs
        );
    }
    println!("outputs in {}", out_dir.display());
    Ok(())
}
