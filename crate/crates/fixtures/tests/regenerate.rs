//! The committed fixture tree is exactly what the builders produce.

use std::fs;

use manifestscope_fixtures::{corpus, fixtures_dir, oracle_axml, oracle_dex};

fn assert_same(rel: &str, expected: &[u8]) {
    let path = fixtures_dir().join(rel);
    let actual = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(
        actual == expected,
        "{rel} differs from the builder output; rerun gen-fixtures"
    );
}

#[test]
fn committed_fixtures_are_reproducible() {
    let apps = corpus::corpus();
    for app in &apps {
        assert_same(&format!("corpus/{}", app.file_name()), &app.apk());
    }
    assert_same("labels.csv", corpus::labels_csv(&apps).as_bytes());
    for (name, bytes) in oracle_axml() {
        assert_same(&format!("axml/{name}.axml"), &bytes);
    }
    for (name, bytes) in oracle_dex() {
        assert_same(&format!("dex/{name}.dex"), &bytes);
    }
}
