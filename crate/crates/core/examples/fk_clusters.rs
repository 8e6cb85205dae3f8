//! Edwards-Sokal bonds of a critical torus: clusters, the ghost cluster, the
//! one-arm reach from the centre and the annulus events.

use isingfield::fk::{
    circuit_event, crossing_event, label_clusters, sample_bonds_from_spins, Explorer, LabelMode,
};
use isingfield::mc::{stream_rng, Algorithm, ChainState, RunPlan};
use isingfield::{LatticeSpec, ModelParams};

fn main() -> isingfield::Result<()> {
    let spec = LatticeSpec::torus(32)?;
    let params = ModelParams::critical(0.01)?;
    let mut state = ChainState::new(spec, params, stream_rng(5, 0));
    state.drive(
        &RunPlan::new(Algorithm::SwendsenWang, 200, 1),
        false,
        |_| {},
    )?;

    let lattice = spec.build();
    let mut rng = stream_rng(5, 1);
    let bonds = sample_bonds_from_spins(&lattice, state.config(), &params, &mut rng);
    println!(
        "{} open plane bonds of {}",
        bonds.n_open_plane(),
        spec.n_edges()
    );

    let plane = label_clusters(&bonds, LabelMode::PlaneOnly);
    let mut sizes: Vec<usize> = plane.cluster_sizes().map(|(_, s)| s).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    println!(
        "{} clusters, largest {:?}",
        sizes.len(),
        &sizes[..5.min(sizes.len())]
    );

    let ext = label_clusters(&bonds, LabelMode::Extended);
    let ghost = ext.ghost_root().map_or(0, |r| {
        ext.cluster_sizes().find(|c| c.0 == r).map_or(0, |c| c.1)
    });
    println!("ghost cluster holds {ghost} sites");

    let mut explorer = Explorer::new(spec.n_sites());
    let reach = explorer.reach(&bonds, &lattice, spec.origin(), 16);
    println!("origin cluster reaches sup-distance {reach}");
    for r in [4, 8, 16] {
        println!(
            "R = {r:>2}: crossing {}  circuit {}",
            crossing_event(&bonds, r)?,
            circuit_event(&bonds, r)?
        );
    }
    Ok(())
}
