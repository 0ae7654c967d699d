//! Regenerates the committed fixture tree under `fixtures/`.

use std::fs;
use std::path::Path;

use manifestscope_fixtures::{corpus, fixtures_dir, oracle_axml, oracle_dex};

fn write(path: &Path, bytes: &[u8]) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, bytes).unwrap();
    println!("wrote {}", path.display());
}

fn main() {
    let root = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(fixtures_dir);
    let apps = corpus::corpus();
    for app in &apps {
        write(&root.join("corpus").join(app.file_name()), &app.apk());
    }
    write(
        &root.join("labels.csv"),
        corpus::labels_csv(&apps).as_bytes(),
    );
    for (name, bytes) in oracle_axml() {
        write(&root.join("axml").join(format!("{name}.axml")), &bytes);
    }
    for (name, bytes) in oracle_dex() {
        write(&root.join("dex").join(format!("{name}.dex")), &bytes);
    }
}
