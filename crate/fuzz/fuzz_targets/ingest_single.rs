#![no_main]

use dprank::ingest::{read_single, ColumnMap};
use dprank::Error;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    match read_single(data, &ColumnMap::default()) {
        Ok(db) => assert!(db.values().iter().all(|v| v.abs() <= 1.0)),
        Err(Error::OutOfRange { line, value }) => assert!(line >= 2 && value.abs() > 1.0),
        Err(_) => {}
    }
});
