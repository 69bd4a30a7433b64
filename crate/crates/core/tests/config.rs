use uscqed::experiments::{
    config_hash, parse_override, persist, run_dir_name, run_scenario, ConfigSource, DisorderKind, ExperimentConfig,
    InitialState, Scenario, PRESETS,
};
use uscqed::Error;

fn load(preset: Option<&str>, text: Option<&str>, overrides: &[&str], scenario: Scenario) -> uscqed::Result<ExperimentConfig> {
    ConfigSource {
        preset: preset.map(str::to_string),
        text: text.map(str::to_string),
        overrides: overrides.iter().map(|o| parse_override(o).unwrap()).collect(),
    }
    .load(scenario)
}

fn config_errors(r: uscqed::Result<ExperimentConfig>) -> Vec<String> {
    match r {
        Err(Error::Config(v)) => v,
        Err(e) => panic!("expected a configuration error, got {e}"),
        Ok(_) => panic!("expected a configuration error"),
    }
}

#[test]
fn every_preset_loads_for_its_scenario() {
    let pairs = [
        ("fig2b", Scenario::Harvest),
        ("fig3b", Scenario::Sweep),
        ("fig3c", Scenario::Thermal),
        ("fig4", Scenario::Singlet),
        ("fig4", Scenario::Protect),
        ("figS2", Scenario::Disorder),
        ("figS7", Scenario::Fluxmap),
        ("figS8", Scenario::Fluxpath),
        ("figS9", Scenario::Dissipative),
    ];
    for (name, scenario) in pairs {
        load(Some(name), None, &[], scenario).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    assert_eq!(PRESETS.len(), 8);
}

#[test]
fn empty_file_keeps_preset_values() {
    let with_file = load(Some("figS9"), Some(""), &[], Scenario::Dissipative).unwrap();
    let bare = load(Some("figS9"), None, &[], Scenario::Dissipative).unwrap();
    assert_eq!(with_file, bare);
    assert_eq!(bare.n_qubits, 2);
    assert_eq!(bare.initial, InitialState::Bare);
    assert_eq!(bare.ground.omega_max, 10.0);
}

#[test]
fn layers_apply_in_order() {
    let cfg = load(
        Some("fig2b"),
        Some("n_fock = 60\n[ground]\nt3 = 0.8\n"),
        &["ground.t3=1.2", "seed=9"],
        Scenario::Harvest,
    )
    .unwrap();
    assert_eq!(cfg.n_fock, 60);
    assert_eq!(cfg.ground.t3, 1.2);
    assert_eq!(cfg.seed, 9);
}

#[test]
fn negative_t3_is_rejected_with_its_path() {
    let errs = config_errors(load(None, Some("[ground]\nt3 = -0.5\n"), &[], Scenario::Harvest));
    assert!(errs.iter().any(|e| e.contains("ground.t3")), "{errs:?}");
}

#[test]
fn unknown_keys_are_all_listed() {
    let errs = config_errors(load(
        None,
        Some("nfock = 10\n[ground]\ntee3 = 1.0\n[bogus]\nx = 1\n"),
        &[],
        Scenario::Harvest,
    ));
    for key in ["nfock", "ground.tee3", "bogus"] {
        assert!(errs.iter().any(|e| e.contains(&format!("`{key}`"))), "{key} missing in {errs:?}");
    }
}

#[test]
fn syntax_errors_carry_a_line() {
    let errs = config_errors(load(None, Some("n_fock = 10\nn_qubits = = 4\n"), &[], Scenario::Harvest));
    assert!(errs.iter().any(|e| e.contains("line 2")), "{errs:?}");
}

#[test]
fn unknown_preset_is_a_config_error() {
    let r = load(Some("fig9"), None, &[], Scenario::Harvest);
    assert!(r.unwrap_err().is_config_error());
}

#[test]
fn overrides_parse_as_toml_or_string() {
    assert_eq!(parse_override("ground.t3=0.5").unwrap().1, toml::Value::Float(0.5));
    assert_eq!(parse_override("n_fock = 30").unwrap().1, toml::Value::Integer(30));
    assert_eq!(
        parse_override("disorder.kind=coupling").unwrap().1,
        toml::Value::String("coupling".into())
    );
    assert!(parse_override("no-equals").is_err());
    let cfg = load(None, None, &["disorder.kind=frequency"], Scenario::Disorder).unwrap();
    assert_eq!(cfg.disorder.kind, DisorderKind::Frequency);
}

#[test]
fn validation_is_scenario_specific() {
    // odd registers have a spectrum but no balanced protocol split
    assert!(load(None, None, &["n_qubits=3"], Scenario::Spectrum).is_ok());
    let errs = config_errors(load(None, None, &["n_qubits=3"], Scenario::Harvest));
    assert!(errs.iter().any(|e| e.contains("n_qubits")), "{errs:?}");
}

fn tiny_spectrum() -> ExperimentConfig {
    load(
        None,
        None,
        &["n_qubits=2", "n_fock=12", "spectrum.g_stop=1.0", "spectrum.g_step=0.5", "spectrum.levels=6"],
        Scenario::Spectrum,
    )
    .unwrap()
}

#[test]
fn manifest_config_round_trips() {
    let cfg = tiny_spectrum();
    let out = run_scenario(Scenario::Spectrum, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = persist(dir.path(), &cfg, &out, 0.1).unwrap();
    assert_eq!(run.file_name().unwrap().to_str().unwrap(), run_dir_name(Scenario::Spectrum, &cfg));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("manifest.json")).unwrap()).unwrap();
    let back: ExperimentConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(manifest["config_hash"], config_hash(&cfg));
    assert_eq!(manifest["seed"], 0);

    // the manifest's config block also reloads through the TOML layer
    let text = toml::to_string(&back).unwrap();
    assert_eq!(load(None, Some(&text), &[], Scenario::Spectrum).unwrap(), cfg);
    for f in manifest["files"].as_array().unwrap() {
        assert!(run.join(f.as_str().unwrap()).exists());
    }
    assert!(std::fs::read_dir(&run)
        .unwrap()
        .all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".partial")));
}

#[test]
fn run_directory_depends_on_config_and_seed() {
    let a = tiny_spectrum();
    let mut b = a.clone();
    b.seed = 5;
    let mut c = a.clone();
    c.n_fock = 14;
    let (na, nb, nc) = (
        run_dir_name(Scenario::Spectrum, &a),
        run_dir_name(Scenario::Spectrum, &b),
        run_dir_name(Scenario::Spectrum, &c),
    );
    assert!(na.starts_with("spectrum-") && na.ends_with("-seed0"));
    assert!(nb.ends_with("-seed5"));
    assert_ne!(na, nc);
    assert_eq!(na, run_dir_name(Scenario::Spectrum, &a.clone()));
}
