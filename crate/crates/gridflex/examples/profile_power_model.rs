//! Profile the per-GPU power model over a cap x core grid and print the
//! precision map: green cells modulate within 10% of the cap target, red
//! cells are core-limited or too noisy to trust.
//!
//! ```bash
//! cargo run -p gridflex --example profile_power_model
//! ```

use gridflex::powermodel::{
    export_profile, gpu_throughput, profile_power_model, GpuKnobState, GpuModelParams,
};

fn main() -> gridflex::Result<()> {
    let params = GpuModelParams::default();
    let caps: Vec<f64> = (0..=13).map(|i| 60.0 + 10.0 * f64::from(i)).collect();
    let cores: Vec<f64> = vec![1.0, 0.75, 0.5, 0.3, 0.15];
    let points = profile_power_model(&params, &caps, &cores, 11)?;

    print!("{:>7}", "cap\\f");
    for f in &cores {
        print!("{f:>8.2}");
    }
    println!();
    for (row, cap) in caps.iter().enumerate() {
        print!("{cap:>6.0}W");
        for col in 0..cores.len() {
            let p = &points[row * cores.len() + col];
            let mark = if p.is_green() { ' ' } else { '!' };
            print!("{:>7.2}{mark}", p.precision);
        }
        println!();
    }
    println!("('!' marks precision below 0.90: the core limit binds there)");

    // Throughput cost of each knob at its extreme.
    let full = GpuKnobState::full(&params);
    let floor_cap = GpuKnobState {
        cap: params.cap_floor,
        ..full
    };
    let min_cores = GpuKnobState {
        core_fraction: gridflex::powermodel::core_fraction_min(),
        ..full
    };
    println!(
        "throughput: full {:.2}, cap at floor {:.2}, one CU {:.2}",
        gpu_throughput(&params, &full)?,
        gpu_throughput(&params, &floor_cap)?,
        gpu_throughput(&params, &min_cores)?,
    );

    let out = std::env::temp_dir().join("gridflex_profile.csv");
    export_profile(&points, &out)?;
    println!("profile table written to {}", out.display());
    Ok(())
}
