//! Heat-bath, Wolff and Swendsen-Wang chains on a 3x3 plus box against the
//! exact answer, then a checkpoint round trip.

use isingfield::estimators::{Accumulator, MagnetizationMoments, Sigma0};
use isingfield::exact::{exact_moments, magnetizations, WeightedGraph};
use isingfield::mc::{stream_rng, Algorithm, ChainState, RunPlan};
use isingfield::{Boundary, LatticeSpec, ModelParams};

fn main() -> isingfield::Result<()> {
    let spec = LatticeSpec::square_box(1, Boundary::Plus);
    let h = 0.2;
    let g = WeightedGraph::from_lattice(&spec, h)?;
    let params = ModelParams::critical(h)?;
    let exact_m = exact_moments(&g, params.beta)?.mean_m;
    let exact_s0 = magnetizations(&g, params.beta)?[spec.origin()];
    println!("exact: <M> = {exact_m:.5}  <s0> = {exact_s0:.5}");

    for (k, algo) in Algorithm::ALL.into_iter().enumerate() {
        let mut state = ChainState::new(spec, params, stream_rng(1, k as u64));
        let (mut m, mut s0) = (MagnetizationMoments::new(), Sigma0::new());
        state.drive(&RunPlan::new(algo, 1000, 100_000), false, |s| {
            m.observe(s);
            s0.observe(s);
        })?;
        let (m, _) = m.finish()?;
        let s0 = s0.finish()?;
        println!(
            "{:<14} <M> = {:.5} ± {:.5} ({:+.1} sigma)  <s0> = {:.5} ± {:.5}  tau = {:.1}",
            algo.name(),
            m.value,
            m.stderr,
            (m.value - exact_m) / m.stderr,
            s0.value,
            s0.stderr,
            m.tau_int
        );
    }

    let mut a = ChainState::new(spec, params, stream_rng(2, 0));
    a.drive(&RunPlan::new(Algorithm::Wolff, 100, 100), false, |_| {})?;
    let mut buf = Vec::new();
    a.save(&mut buf)?;
    let mut b = ChainState::load(buf.as_slice())?;
    a.sweep(Algorithm::Wolff);
    b.sweep(Algorithm::Wolff);
    println!(
        "checkpoint resumes the same trajectory: {}",
        a.config() == b.config()
    );
    Ok(())
}
