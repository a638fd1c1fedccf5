use std::fs;

use proptest::prelude::*;
use scnse::brownian::sample_increments;
use scnse::integrator::{run_path, InitialCondition, Scheme, SimConfig};
use scnse::io::snapshot::{encode_snapshot, SNAPSHOT_MAGIC};
use scnse::io::{
    config_to_json, parse_config, read_snapshot, read_timeseries, write_snapshot,
    write_timeseries, TIMESERIES_HEADER,
};
use scnse::operators::NoiseModel;
use scnse::spectral::{build_space, random_field};
use scnse::Error;

fn short_run() -> scnse::integrator::TrajectoryRecord {
    let noise = NoiseModel::new(vec![[0.6, 0.0], [0.0, 0.6]]).unwrap();
    let cfg = SimConfig::new(6, 1e-3, 0.02, noise);
    let u0 = cfg.initial_field().unwrap();
    run_path(&cfg, &u0, &sample_increments(5, 20, 1e-3, 2).unwrap()).unwrap()
}

#[test]
fn timeseries_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ts.csv");
    let traj = short_run();
    write_timeseries(&traj, &path).unwrap();

    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), TIMESERIES_HEADER);
    assert_eq!(text.lines().count(), 1 + 21);

    let rows = read_timeseries(&path).unwrap();
    assert_eq!(rows.len(), traj.len());
    assert_eq!(rows[0].t, 0.0);
    assert_eq!(rows[0].constraint_err, (traj.diag[0].norms.h - 1.0).abs());
    for (r, (d, &mu)) in rows.iter().zip(traj.diag.iter().zip(&traj.mu_series)) {
        assert_eq!(r.h_norm.to_bits(), d.norms.h.to_bits());
        assert_eq!(r.v_norm_sq.to_bits(), d.norms.v_sq.to_bits());
        assert_eq!(r.da_norm_sq.to_bits(), d.norms.da_sq.to_bits());
        assert_eq!(r.dissipation.to_bits(), d.dissipation.to_bits());
        assert_eq!(r.mu_n.to_bits(), mu.to_bits());
    }
}

#[test]
fn timeseries_reader_rejects_foreign_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "t,h\n0,1\n").unwrap();
    assert!(matches!(read_timeseries(&path), Err(Error::Format(_))));
    fs::write(&path, format!("{TIMESERIES_HEADER}\n0,1,2\n")).unwrap();
    assert!(matches!(read_timeseries(&path), Err(Error::Format(_))));
    let missing = dir.path().join("none.csv");
    match read_timeseries(&missing) {
        Err(Error::Io { path, .. }) => assert_eq!(path, missing),
        other => panic!("{other:?}"),
    }
}

#[test]
fn snapshot_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.snap");
    let u = random_field(17, &build_space(8).unwrap(), 3.0);
    write_snapshot(&u, &path).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], SNAPSHOT_MAGIC);
    assert_eq!(bytes, encode_snapshot(&u));
    assert_eq!(read_snapshot(&path).unwrap(), u);

    fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(read_snapshot(&path), Err(Error::Format(_))));
    let mut v2 = bytes.clone();
    v2[4..8].copy_from_slice(&2u32.to_le_bytes());
    fs::write(&path, v2).unwrap();
    assert!(matches!(read_snapshot(&path), Err(Error::Version { found: 2, .. })));
}

#[test]
fn config_file_example() {
    let text = r#"{
        "n_max": 8, "dt": 0.002, "t_end": 0.1, "seed": 3, "scheme": "heun",
        "project_each_step": false, "snapshot_stride": 5,
        "noise": {"m": 1, "c": [[0.3, 0.4]]},
        "initial": {"kind": "eigenmode", "k": [1, 2]}
    }"#;
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.scheme, Scheme::Heun);
    assert!(!cfg.project_each_step);
    assert_eq!(cfg.noise.k_c(), 0.5);
    assert_eq!(cfg.initial, InitialCondition::Eigenmode { k: [1, 2] });
    assert!(parse_config(&text.replace("[1, 2]", "[9, 0]")).is_err());
    assert!(parse_config("[]").is_err());
    assert!(parse_config("{").is_err());
}

fn arb_config() -> impl Strategy<Value = SimConfig> {
    (
        1usize..12,
        1u32..6,
        1usize..50,
        any::<u64>(),
        prop::collection::vec((-0.7f64..0.7, -0.7f64..0.7), 0..4),
        any::<bool>(),
        0usize..4,
        prop_oneof![
            (2.01f64..6.0, any::<u64>()).prop_map(|(decay, seed)| InitialCondition::Random { decay, seed }),
            Just(InitialCondition::Eigenmode { k: [1, -1] }),
        ],
    )
        .prop_map(|(n_max, e, steps, seed, c, heun, stride, initial)| {
            let dt = 2f64.powi(-(e as i32) - 6);
            let noise = NoiseModel::new(c.into_iter().map(|(a, b)| [a, b]).collect()).unwrap();
            SimConfig {
                n_max,
                dt,
                t_end: dt * steps as f64,
                scheme: if heun { Scheme::Heun } else { Scheme::Splitting },
                project_each_step: !heun,
                seed,
                snapshot_stride: stride,
                noise,
                initial,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips_losslessly(cfg in arb_config()) {
        let back = parse_config(&config_to_json(&cfg)).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn snapshot_round_trips_bitwise(seed in any::<u64>(), n in 1usize..10, decay in 0.0f64..5.0) {
        let u = random_field(seed, &build_space(n).unwrap(), decay);
        let back = scnse::io::snapshot::decode_snapshot(&encode_snapshot(&u)).unwrap();
        for (a, b) in u.coeffs().iter().zip(back.coeffs()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
}
