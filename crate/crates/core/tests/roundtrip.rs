use isingfield::estimators::{read_csv, write_csv, ResultRow};
use isingfield::model::{energy, total_magnetization, SpinConfig};
use isingfield::pipeline::{Command, Manifest, SweepConfig};
use isingfield::stats::Estimate;
use isingfield::{Boundary, LatticeSpec};
use proptest::prelude::*;

fn row_strategy() -> impl Strategy<Value = ResultRow> {
    (
        prop::sample::select(vec!["sigma0", "rho", "one_arm", "cluster_tail"]),
        1usize..200,
        0.0f64..1.0,
        0.0f64..1e4,
        -1.0f64..1.0,
        0.0f64..1.0,
        1u64..1_000_000,
        0.5f64..100.0,
        any::<bool>(),
    )
        .prop_map(|(obs, l, h, x, v, se, n, tau, torus)| {
            let spec = if torus {
                LatticeSpec::torus(l).unwrap()
            } else {
                LatticeSpec::square_box(l, Boundary::Plus)
            };
            ResultRow::new(obs, &spec, 0.44, h, x, &Estimate::new(v, se, n, tau))
        })
}

proptest! {
    #[test]
    fn csv_round_trip(rows in prop::collection::vec(row_strategy(), 1..20)) {
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, rows);
    }

    #[test]
    fn manifest_round_trip(seed in any::<u64>(), safety in 1.0f64..10.0, hs in prop::collection::vec(1e-4f64..1.0, 1..8)) {
        let cfg = SweepConfig { h_grid: hs, safety, master_seed: seed, ..SweepConfig::default() };
        let m = Manifest::new(Command::Sweep, seed, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        m.write(dir.path()).unwrap();
        let back = Manifest::read(&dir.path().join("manifest.json")).unwrap();
        let cfg_back: SweepConfig = back.config_as().unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(cfg_back.h_grid, cfg.h_grid);
        prop_assert_eq!(cfg_back.safety, cfg.safety);
    }

    #[test]
    fn spin_file_round_trip(l in 1usize..6, bits in prop::collection::vec(any::<bool>(), 121)) {
        let spec = LatticeSpec::square_box(l, Boundary::Free);
        let spins: Vec<i8> = bits[..spec.n_sites()].iter().map(|&b| if b { 1 } else { -1 }).collect();
        let cfg = SpinConfig::from_spins(&spec, spins).unwrap();
        let mut buf = Vec::new();
        cfg.write_to(&spec, &mut buf).unwrap();
        let (spec2, back) = SpinConfig::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(spec2, spec);
        prop_assert_eq!(total_magnetization(&back), total_magnetization(&cfg));
        prop_assert_eq!(energy(&back, &spec).unwrap(), energy(&cfg, &spec).unwrap());
        prop_assert_eq!(back, cfg);
    }
}
