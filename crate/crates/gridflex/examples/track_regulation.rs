//! One hour of closed-loop regulation tracking: an 8-GPU server follows a
//! noisy 2-second signal while its latency-critical load fluctuates, then
//! the run is scored the way a grid operator would.
//!
//! ```bash
//! cargo run -p gridflex --example track_regulation
//! ```

use gridflex::controller::{aggregate_throughput, export_step_records, run_tracking};
use gridflex::market::{certify, performance_score, Bid, CertificationStatus};
use gridflex::powermodel::ServerSpec;
use gridflex::signals::{generate_load_trace, generate_signal, SignalKind};
use std::time::Duration;

fn main() -> gridflex::Result<()> {
    let spec = ServerSpec::default();
    let hour = Duration::from_secs(3600);
    let trace = generate_load_trace(50.13, 46.64, 35.0, 63.0, hour, Duration::from_secs(60), 4)?;
    let signal = generate_signal(
        SignalKind::Noisy,
        hour,
        Duration::from_secs(2),
        0.005,
        11,
    )?;
    let bid = Bid {
        p_fr: 1100.0,
        r_up: 250.0,
        r_down: 250.0,
        symmetric: true,
    };

    let records = run_tracking(&spec, &trace, &signal, &bid, 42)?;
    let scores = performance_score(&signal, &records, &bid)?;
    println!("window  delay  accuracy  precision  composite");
    for s in &scores {
        println!(
            "{:>5.0}s  {:.3}     {:.3}      {:.3}      {:.3}",
            s.window_start.as_secs_f64(),
            s.delay,
            s.accuracy,
            s.precision,
            s.composite
        );
    }
    let composites: Vec<f64> = scores.iter().map(|s| s.composite).collect();
    let status = certify(&composites);
    println!(
        "certification after this hour: {}",
        match status {
            CertificationStatus::Certified => "certified (3 consecutive windows at 75%+)",
            CertificationStatus::Uncertified => "not yet certified",
            CertificationStatus::Revoked => "revoked",
        }
    );

    let throughput = aggregate_throughput(&records)?;
    let flex_events = records.iter().filter(|r| r.no_flexibility).count();
    println!(
        "BE throughput {:.2} of unmodulated; LC untouched; {} no-flexibility steps",
        throughput.be_throughput, flex_events
    );

    let out = std::env::temp_dir().join("gridflex_steps.csv");
    export_step_records(&records, &out)?;
    println!("step records written to {}", out.display());
    Ok(())
}
