//! Optimize an hourly regulation bid and cross-check it against the
//! brute-force grid oracle, for both asymmetric and symmetric markets.
//!
//! ```bash
//! cargo run -p gridflex --example optimize_bid
//! ```

use gridflex::market::{hourly_settlement, optimize_bid, oracle_bid_search, BidOutcome, MarketInputs, PerformanceScore};
use std::time::Duration;

fn main() -> gridflex::Result<()> {
    let inputs = MarketInputs {
        p_avg: 1000.0,
        p_var: 170.0,
        p_max: 1650.0,
        cost: 5.0e-5,
        rew_up: 2.0e-4,
        rew_down: 2.0e-4,
        perf_score: 0.9,
        threshold: 1.2,
    };

    for symmetric in [false, true] {
        let market = if symmetric { "symmetric" } else { "asymmetric" };
        match optimize_bid(&inputs, symmetric)? {
            BidOutcome::Optimal {
                bid,
                predicted_saving,
            } => {
                println!(
                    "{market:<10} bid: p_fr {:.1} W, r_up {:.1} W, r_down {:.1} W, predicted saving {:.4} $/h",
                    bid.p_fr, bid.r_up, bid.r_down, predicted_saving
                );
                match oracle_bid_search(&inputs, symmetric, 10_000)? {
                    BidOutcome::Optimal {
                        predicted_saving: oracle_saving,
                        ..
                    } => println!(
                        "{market:<10} oracle agrees within grid resolution: {:.4} $/h (diff {:+.2e})",
                        oracle_saving,
                        predicted_saving - oracle_saving
                    ),
                    BidOutcome::Withdraw => println!("oracle withdrew"),
                }
                // Settle the hour assuming the realized scores match the
                // prediction.
                let score = PerformanceScore {
                    delay: 0.9,
                    accuracy: 0.9,
                    precision: 0.9,
                    composite: 0.9,
                    window_start: Duration::ZERO,
                };
                let settle = hourly_settlement(&bid, &[score; 4], &inputs)?;
                println!(
                    "{market:<10} settlement: energy {:.4} $, reward {:.4} $, saving {:.4} $",
                    settle.energy_cost, settle.reward, settle.saving
                );
            }
            BidOutcome::Withdraw => println!("{market}: withdrew from the service"),
        }
    }

    // A hostile threshold forces withdrawal unless rewards cover the cost.
    let strict = MarketInputs {
        threshold: 0.0,
        rew_up: 0.0,
        rew_down: 0.0,
        ..inputs
    };
    if matches!(optimize_bid(&strict, true)?, BidOutcome::Withdraw) {
        println!("threshold 0 with no rewards: withdraw, as expected");
    }
    Ok(())
}
