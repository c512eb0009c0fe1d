//! Generate the three regulation-signal archetypes plus a canonical load
//! trace, validate them, and export everything as CSV.
//!
//! ```bash
//! cargo run -p gridflex --example generate_signals
//! ```

use gridflex::signals::{
    export_signal, export_trace, generate_load_trace, generate_signal, trace_stats,
    validate_signal, SignalKind, DEFAULT_RAMP_LIMIT, DEFAULT_STEP,
};
use std::time::Duration;

fn main() -> gridflex::Result<()> {
    let hour = Duration::from_secs(3600);
    let out = std::env::temp_dir().join("gridflex_signals");
    std::fs::create_dir_all(&out)?;

    for (kind, name) in [
        (SignalKind::Extreme, "extreme"),
        (SignalKind::Noisy, "noisy"),
        (SignalKind::HighTransition, "high_transition"),
    ] {
        let sig = generate_signal(kind, hour, DEFAULT_STEP, DEFAULT_RAMP_LIMIT, 7)?;
        let dwell = sig.samples.iter().filter(|v| v.abs() > 0.95).count() as f64
            / sig.len() as f64;
        let mean_abs = sig.samples.iter().map(|v| v.abs()).sum::<f64>() / sig.len() as f64;
        println!(
            "{name:<16} {} samples, valid: {:>5}, time at |r|>0.95: {:>5.1}%, mean |r|: {:.3}",
            sig.len(),
            validate_signal(&sig).is_valid(),
            100.0 * dwell,
            mean_abs
        );
        export_signal(&sig, &out.join(format!("{name}.csv")))?;
    }

    // The low-load/low-variance utilization window.
    let trace = generate_load_trace(28.66, 12.48, 23.0, 36.0, hour, Duration::from_secs(60), 3)?;
    let stats = trace_stats(&trace)?;
    println!(
        "low-low trace     mean {:.2}% var {:.2} min {:.0}% max {:.0}%",
        stats.mean_pct, stats.variance, stats.min_pct, stats.max_pct
    );
    export_trace(&trace, &out.join("low_low.csv"))?;

    println!("CSV files written to {}", out.display());
    Ok(())
}
