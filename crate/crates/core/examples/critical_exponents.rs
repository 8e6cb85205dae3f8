//! The h = 0 torus run behind the two-point, one-arm and cluster-tail laws.
//!
//! `cargo run --release --example critical_exponents -- [L] [sweeps]`

use isingfield::fit::fit_power_law;
use isingfield::mc::Algorithm;
use isingfield::pipeline::{run_critical, CriticalConfig};

fn main() -> isingfield::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("integer argument"))
        .collect();
    let cfg = CriticalConfig {
        half_width: args.first().copied().unwrap_or(64),
        algorithm: Algorithm::SwendsenWang,
        therm: 300,
        sweeps: args.get(1).copied().unwrap_or(2000) as u64,
        every: 1,
        origins_per_axis: 8,
    };
    let t = run_critical(&cfg, 11, 0)?;

    println!("   n   rho(n)     stderr   tau");
    for (n, e) in t.rho.entries.iter().filter(|e| e.0.is_power_of_two()) {
        println!(
            "{n:>4}   {:.5}   {:.5}   {:.1}",
            e.value, e.stderr, e.tau_int
        );
    }
    let top = cfg.half_width / 4;
    let rho: Vec<_> = t
        .rho
        .entries
        .iter()
        .filter(|e| e.0 >= 4 && e.0 <= top)
        .map(|e| (e.0 as f64, e.1))
        .collect();
    println!("rho, n in [4, {top}]: {}", fit_power_law(&rho)?);

    let arm: Vec<_> = t
        .one_arm
        .iter()
        .filter(|e| e.0 >= 8)
        .map(|e| (e.0 as f64, e.1))
        .collect();
    for (r, e) in &arm {
        println!(
            "P(0 <-> boundary of box {r}) = {:.4} ± {:.4}",
            e.value, e.stderr
        );
    }
    if arm.len() >= 3 {
        println!("one-arm: {}", fit_power_law(&arm)?);
    }

    let tail: Vec<_> = t
        .tail
        .entries
        .iter()
        .filter(|e| e.0 >= 16)
        .map(|e| (e.0 as f64, e.1))
        .collect();
    println!(
        "cluster tail, M in [16, {}]: {}",
        tail.last().map_or(0.0, |p| p.0),
        fit_power_law(&tail)?
    );
    Ok(())
}
