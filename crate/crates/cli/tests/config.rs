use horolab_cli::config::*;
use horolab_cli::output::{config_hash, Manifest};
use horolab_cli::{rerun_manifest, run};

#[test]
fn merge_prefers_flags_over_file() {
    let file = ConfigFile::parse("[mixing]\nn = 20000\nobservable = \"central-hat\"\n").unwrap();
    let cli = CommandConfig::Mixing(MixingArgs {
        n: Some(50_000),
        ..Default::default()
    });
    let CommandConfig::Mixing(m) = merge(&file, cli).unwrap().resolved() else {
        panic!()
    };
    assert_eq!(m.n, Some(50_000));
    assert_eq!(
        m.observable,
        Some(ObservableSpec::Preset("central-hat".into()))
    );
    assert_eq!(m.mean_samples, Some(100_000));
}

#[test]
fn inline_observable_parses() {
    let spec: ObservableSpec =
        r#"{"center":{"x":0.0,"y":2.0,"theta":3.0},"radii":[0.3,0.5,1.0],"amplitude":1.0,"plateau":0.2,"profile":"hat"}"#
            .parse()
            .unwrap();
    assert!(matches!(spec, ObservableSpec::Inline(_)));
    assert!(spec.build().is_ok());
    assert!("no-such-preset"
        .parse::<ObservableSpec>()
        .unwrap()
        .build()
        .is_err());
}

#[test]
fn unknown_tables_are_rejected() {
    assert!(ConfigFile::parse("[mixng]\nn = 1\n").is_err());
    let file = ConfigFile::parse("[bound]\nalfa = [1.0]\n").unwrap();
    assert!(merge(&file, CommandConfig::Bound(BoundArgs::default())).is_err());
}

#[test]
fn worker_count_does_not_enter_the_hash() {
    let a = RunConfig::new(1, 1, CommandConfig::Bound(BoundArgs::default()));
    let b = RunConfig::new(1, 8, CommandConfig::Bound(BoundArgs::default()));
    assert_eq!(config_hash(&a), config_hash(&b));
    let c = RunConfig::new(2, 1, CommandConfig::Bound(BoundArgs::default()));
    assert_ne!(config_hash(&a), config_hash(&c));
}

#[test]
fn manifest_round_trip_reproduces_artifacts() {
    let cfg = RunConfig::new(
        5,
        1,
        CommandConfig::CoverDim(CoverArgs {
            oracle: Some("cube".into()),
            n: Some(5000),
            ..Default::default()
        }),
    );
    let out = run(&cfg).unwrap();
    let text = serde_json::to_string(&Manifest::new(&cfg, &out.artifacts)).unwrap();
    let (_, mismatches) = rerun_manifest(&serde_json::from_str(&text).unwrap()).unwrap();
    assert!(mismatches.is_empty(), "{mismatches:?}");
}
