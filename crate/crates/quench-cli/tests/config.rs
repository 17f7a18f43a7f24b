use std::path::PathBuf;

use proptest::prelude::*;
use quench_cli::config::{validate_family, ExperimentConfig, OutputFormat};
use quench_core::{StateFamily, Tolerances};

fn family_name() -> impl Strategy<Value = Option<String>> {
    prop_oneof![
        Just(None),
        Just(Some("dimer".to_string())),
        Just(Some("dimer-2".to_string())),
        Just(Some("rainbow".to_string())),
        Just(Some("wigner".to_string())),
        Just(Some("island".to_string())),
    ]
}

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![1e-12f64..1e-3, 0.01f64..500.0]
}

prop_compose! {
    fn any_config()(
        family in family_name(),
        p in proptest::option::of(1usize..12),
        q in proptest::option::of(1usize..6),
        gamma in proptest::option::of(0.001f64..0.999),
        n in proptest::option::of(2usize..1024),
        block in proptest::option::of(1usize..200),
        dt in proptest::option::of(positive()),
        t_max in proptest::option::of(positive()),
        tols in proptest::collection::vec(positive(), 9),
        out in "[a-z][a-z0-9_/]{0,12}",
        json in any::<bool>(),
    ) -> ExperimentConfig {
        ExperimentConfig {
            family,
            p,
            q,
            gamma,
            n,
            block,
            dt,
            t_max,
            tolerances: Tolerances {
                hermiticity: tols[0],
                unitarity: tols[1],
                delta_match: tols[2],
                eigensolver: tols[3],
                purity: tols[4],
                spectrum: tols[5],
                density: tols[6],
                eigenvalue_clamp: tols[7],
                degeneracy: tols[8],
            },
            out: PathBuf::from(out),
            format: if json { OutputFormat::Json } else { OutputFormat::Csv },
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn json_round_trip(cfg in any_config()) {
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn key_value_round_trip(cfg in any_config()) {
        let back = ExperimentConfig::from_key_value(&cfg.to_key_value()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn key_value_parsing() {
    let text = "# quench run\nfamily = dimer-2\nn = 240  # chain\ndt = 0.25\ntolerances.purity = 1e-9\nformat = json\n";
    let cfg = ExperimentConfig::from_key_value(text).unwrap();
    assert_eq!(cfg.family.as_deref(), Some("dimer-2"));
    assert_eq!(cfg.n, Some(240));
    assert_eq!(cfg.dt, Some(0.25));
    assert_eq!(cfg.tolerances.purity, 1e-9);
    assert_eq!(cfg.tolerances.hermiticity, Tolerances::default().hermiticity);
    assert_eq!(cfg.format, OutputFormat::Json);
    assert_eq!(cfg.state_family().unwrap(), Some(StateFamily::DimerQ { q: 2 }));
    cfg.validate().unwrap();
}

#[test]
fn malformed_files_are_rejected() {
    assert!(ExperimentConfig::from_key_value("n 240").is_err());
    assert!(ExperimentConfig::from_key_value("n = abc").is_err());
    assert!(ExperimentConfig::from_key_value("colour = red").is_err());
    assert!(ExperimentConfig::from_json("{\"n\": 240, \"extra\": 1}").is_err());
    assert!(ExperimentConfig::from_json("[1, 2]").is_err());
    assert!(OutputFormat::parse("xml").is_err());
}

#[test]
fn validation_catches_bad_parameters() {
    let base = ExperimentConfig::default();
    let bad = [
        ExperimentConfig { n: Some(1), ..base.clone() },
        ExperimentConfig { dt: Some(0.0), ..base.clone() },
        ExperimentConfig { t_max: Some(-1.0), ..base.clone() },
        ExperimentConfig { gamma: Some(1.0), ..base.clone() },
        ExperimentConfig { n: Some(40), block: Some(40), ..base.clone() },
        ExperimentConfig { family: Some("dimer".into()), n: Some(241), ..base.clone() },
        ExperimentConfig { family: Some("dimer-3".into()), n: Some(240 + 8), ..base.clone() },
        ExperimentConfig { family: Some("wigner".into()), p: Some(7), n: Some(240), ..base.clone() },
        ExperimentConfig { family: Some("wigner".into()), n: Some(240), ..base.clone() },
        ExperimentConfig { family: Some("nonesuch".into()), ..base.clone() },
    ];
    for cfg in bad {
        assert!(cfg.validate().is_err(), "{cfg:?}");
    }
    let ok = ExperimentConfig { family: Some("wigner".into()), p: Some(3), n: Some(9), ..base };
    ok.validate().unwrap();
    assert!(validate_family(StateFamily::Island { p: 3, gamma: 0.5 }, 9).is_err());
}

#[test]
fn load_detects_the_file_format() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("a.json");
    let kv = dir.path().join("a.conf");
    let cfg = ExperimentConfig { n: Some(120), block: Some(10), ..Default::default() };
    std::fs::write(&json, cfg.to_json()).unwrap();
    std::fs::write(&kv, cfg.to_key_value()).unwrap();
    assert_eq!(ExperimentConfig::load(&json).unwrap(), cfg);
    assert_eq!(ExperimentConfig::load(&kv).unwrap(), cfg);
    assert!(ExperimentConfig::load(&dir.path().join("missing")).is_err());
}
