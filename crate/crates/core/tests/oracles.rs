use uscqed::validation::{run_all, write_table};

#[test]
fn oracle_suite_passes() {
    let checks = run_all();
    let mut table = Vec::new();
    write_table(&checks, &mut table).unwrap();
    let table = String::from_utf8(table).unwrap();
    print!("{table}");
    assert!(checks.iter().all(|c| c.passed), "{table}");
}
