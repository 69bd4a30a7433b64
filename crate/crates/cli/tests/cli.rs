use std::process::Command;

fn uscqed() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uscqed"))
}

#[test]
fn config_errors_exit_with_two() {
    let out = uscqed().args(["harvest", "--set", "ground.t3=-1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ground.t3"));

    let out = uscqed().args(["harvest", "--preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = uscqed().args(["spectrum", "--g-range", "0:5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dry_run_prints_the_resolved_config() {
    let out = uscqed()
        .args(["harvest", "--preset", "fig2b", "--n-qubits", "2", "--seed", "4", "--dry-run"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let table: toml::Table = toml::from_str(&text).unwrap();
    assert_eq!(table["n_qubits"].as_integer(), Some(2));
    assert_eq!(table["seed"].as_integer(), Some(4));
    assert_eq!(table["n_fock"].as_integer(), Some(100));
}

#[test]
fn spectrum_run_writes_a_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = uscqed()
        .args(["spectrum", "--n-qubits", "2", "--n-fock", "20", "--g-range", "0:1:0.5", "--threads", "2"])
        .env("USCQED_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    for f in ["spectrum.csv", "summary.json", "manifest.json", "timing.json"] {
        assert!(runs[0].join(f).exists(), "{f}");
    }
}
