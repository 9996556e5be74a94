//! Replays the fuzz seed corpus through the readers with the fuzz targets' checks.

use std::fs;
use std::path::PathBuf;

use dprank::ingest::{read_grouped, read_paired, read_single, ColumnMap};
use dprank::Error;

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds in {}", dir.display());
    files.iter().map(|p| fs::read(p).unwrap()).collect()
}

#[test]
fn grouped_seeds() {
    let mut accepted = 0;
    for data in seeds("ingest_grouped") {
        let (&b, body) = data.split_first().unwrap();
        let declared = (b % 8 != 0).then_some((b % 8) as usize);
        if let Ok(db) = read_grouped(body, &ColumnMap::default(), declared) {
            accepted += 1;
            if let Some(g) = declared {
                assert_eq!(db.g(), g);
            }
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn paired_seeds() {
    let results: Vec<_> = seeds("ingest_paired")
        .iter()
        .map(|d| read_paired(d.as_slice(), &ColumnMap::default()))
        .collect();
    assert!(results.iter().any(Result::is_ok));
    assert!(results.iter().any(|r| matches!(r, Err(Error::Parse { .. }))));
}

#[test]
fn single_seeds() {
    let mut out_of_range = 0;
    for data in seeds("ingest_single") {
        match read_single(data.as_slice(), &ColumnMap::default()) {
            Ok(db) => assert!(db.values().iter().all(|v| v.abs() <= 1.0)),
            Err(Error::OutOfRange { line, value }) => {
                assert!(line >= 2 && value.abs() > 1.0);
                out_of_range += 1;
            }
            Err(_) => {}
        }
    }
    assert_eq!(out_of_range, 1);
}
