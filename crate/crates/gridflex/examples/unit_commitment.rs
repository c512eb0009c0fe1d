//! The four-plant reserve example: how holding regulation reserves forces
//! extra, less efficient plants online, and how data-center provision
//! retires one. Compares the grid-detailed marginal carbon emission of
//! reserves against the naive carbon-intensity model.
//!
//! ```bash
//! cargo run -p gridflex --example unit_commitment
//! ```

use gridflex::grid::{emission_rate, mce_resv, simple_mce, solve_uc, Generator, UcProblem};
use gridflex::signals::{generate_signal, SignalKind};
use std::time::Duration;

fn main() -> gridflex::Result<()> {
    let fleet: Vec<Generator> = (1..=4)
        .map(|i| Generator {
            name: format!("gas{i}"),
            p_min: 50.0,
            p_max: 100.0,
            cost_c0: 400.0,
            cost_c1: 25.0,
            e_peak: 0.45,
            eta: 0.25,
        })
        .collect();
    let signal = generate_signal(
        SignalKind::Noisy,
        Duration::from_secs(3600),
        Duration::from_secs(2),
        0.005,
        11,
    )?;
    let problem = UcProblem {
        generators: fleet.clone(),
        demand: vec![300.0],
        reserve_up_req: 100.0,
        reserve_down_req: 100.0,
        dc_regulation: 0.0,
        reference_signal: signal.clone(),
    };

    let without = solve_uc(&problem)?;
    println!("without data-center regulation (300 MW demand, +-100 MW reserves):");
    print_hour(&problem, &without);

    let result = mce_resv(&problem, 100.0)?;
    println!("with 100 MW of data-center regulation:");
    print_hour(&problem, &result.with_dc);

    println!(
        "emission rate backs off peak: {:.4} t/MWh at 100 MW vs {:.4} t/MWh at 75 MW",
        emission_rate(&fleet[0], 100.0)?,
        emission_rate(&fleet[0], 75.0)?,
    );
    println!(
        "grid emissions: {:.2} t without vs {:.2} t with provision",
        result.without_dc.total_emissions(),
        result.with_dc.total_emissions()
    );
    let naive = simple_mce(fleet[0].e_peak, &signal, 1.0)?;
    println!(
        "marginal carbon emission of reserves: {:.4} t/MW detailed vs {:.4} t/MW naive ({:.1}x)",
        result.mce,
        naive,
        result.mce / naive
    );
    Ok(())
}

fn print_hour(problem: &UcProblem, solution: &gridflex::grid::UcSolution) {
    let hour = &solution.hours[0];
    for (i, g) in problem.generators.iter().enumerate() {
        if hour.committed[i] {
            println!(
                "  {}: {:>5.1} MW, +{:.1}/-{:.1} MW reserve",
                g.name, hour.power[i], hour.reserve_up[i], hour.reserve_down[i]
            );
        } else {
            println!("  {}: off", g.name);
        }
    }
    println!("  cost {:.0} $/h\n", hour.cost);
}
