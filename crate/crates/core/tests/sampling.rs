use isingfield::estimators::{Accumulator, ClusterTail, OneArm, RhoDiag, Sigma0};
use isingfield::fk::{ghost_connected, label_clusters, LabelMode};
use isingfield::mc::{stream_rng, Algorithm, ChainState, RunPlan};
use isingfield::stats::Estimate;
use isingfield::{Boundary, LatticeSpec, ModelParams};

fn sigma0(spec: LatticeSpec, h: f64, algo: Algorithm, sweeps: u64, stream: u64) -> Estimate {
    let mut state = ChainState::new(
        spec,
        ModelParams::critical(h).unwrap(),
        stream_rng(77, stream),
    );
    let mut acc = Sigma0::new();
    state
        .drive(&RunPlan::new(algo, 300, sweeps), false, |s| acc.observe(s))
        .unwrap();
    acc.finish().unwrap()
}

#[test]
fn algorithms_agree_on_a_torus_in_a_field() {
    let spec = LatticeSpec::torus(16).unwrap();
    let est: Vec<Estimate> = Algorithm::ALL
        .into_iter()
        .enumerate()
        .map(|(k, a)| sigma0(spec, 0.05, a, 3000, k as u64))
        .collect();
    for i in 0..3 {
        for j in i + 1..3 {
            let z = est[i].z_score(&est[j]);
            assert!(z.abs() < 4.0, "{:?} vs {:?}: z = {z}", est[i], est[j]);
        }
    }
}

#[test]
fn sigma0_grows_with_the_field() {
    let spec = LatticeSpec::torus(12).unwrap();
    let hs = [0.01, 0.02, 0.04, 0.08, 0.16];
    let est: Vec<Estimate> = hs
        .iter()
        .enumerate()
        .map(|(k, &h)| sigma0(spec, h, Algorithm::SwendsenWang, 3000, 10 + k as u64))
        .collect();
    for w in est.windows(2) {
        let slack = 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        assert!(
            w[1].value >= w[0].value - slack,
            "{:?} then {:?}",
            w[0],
            w[1]
        );
    }
}

#[test]
fn spin_and_bond_marginals_agree() {
    for (k, spec) in [
        LatticeSpec::square_box(1, Boundary::Plus),
        LatticeSpec::torus(3).unwrap(),
    ]
    .into_iter()
    .enumerate()
    {
        let mut state = ChainState::new(
            spec,
            ModelParams::critical(0.2).unwrap(),
            stream_rng(78, k as u64),
        );
        let (mut spin, mut bond) = (Vec::new(), Vec::new());
        state
            .drive(
                &RunPlan::new(Algorithm::SwendsenWang, 200, 40_000),
                true,
                |s| {
                    let o = s.spec().origin();
                    spin.push(s.spins.get(o) as f64);
                    let labels = label_clusters(s.bonds(), LabelMode::Extended);
                    bond.push(ghost_connected(&labels, o).unwrap() as u8 as f64);
                },
            )
            .unwrap();
        let (a, b) = (Estimate::from_series(&spin), Estimate::from_series(&bond));
        assert!(
            a.z_score(&b).abs() < 4.0,
            "{spec:?}: spins {a:?}, bonds {b:?}"
        );
    }
}

#[test]
fn plane_clusters_sit_inside_extended_clusters() {
    let spec = LatticeSpec::torus(8).unwrap();
    let mut state = ChainState::new(
        spec,
        ModelParams::critical(0.05).unwrap(),
        stream_rng(79, 0),
    );
    let mut samples = 0;
    state
        .drive(&RunPlan::new(Algorithm::SwendsenWang, 10, 200), true, |s| {
            let plane = label_clusters(s.bonds(), LabelMode::PlaneOnly);
            let ext = label_clusters(s.bonds(), LabelMode::Extended);
            for x in 0..spec.n_sites() {
                if plane.connected(spec.origin(), x) {
                    assert!(ext.connected(spec.origin(), x));
                }
            }
            assert!(plane.cluster_size(spec.origin()) <= ext.cluster_size(spec.origin()));
            samples += 1;
        })
        .unwrap();
    assert_eq!(samples, 200);
}

#[test]
fn critical_tables_are_monotone() {
    let spec = LatticeSpec::torus(24).unwrap();
    let mut rho = RhoDiag::new(&spec, &(1..=12).collect::<Vec<_>>()).unwrap();
    let mut arm = OneArm::new(&spec, &[2, 4, 8, 12], 4).unwrap();
    let mut tail = ClusterTail::new(&[1, 4, 16, 64, 256]).unwrap();
    let mut state = ChainState::new(spec, ModelParams::critical(0.0).unwrap(), stream_rng(80, 0));
    state
        .drive(
            &RunPlan::new(Algorithm::SwendsenWang, 200, 1500),
            true,
            |s| {
                rho.observe(s);
                arm.observe(s);
                tail.observe(s);
            },
        )
        .unwrap();
    let rho = rho.finish().unwrap();
    assert!(rho.monotonicity_violations(2.0).is_empty(), "{rho:?}");
    let tail = tail.finish().unwrap();
    assert!(tail.monotonicity_violations(2.0).is_empty(), "{tail:?}");
    assert!((tail.entries[0].1.value - 1.0).abs() < 1e-12);
    let arm = arm.finish().unwrap();
    for w in arm.windows(2) {
        assert!(w[1].1.value <= w[0].1.value + 1e-12, "{arm:?}");
    }
}
