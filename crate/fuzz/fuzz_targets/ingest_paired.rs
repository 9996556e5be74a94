#![no_main]

use dprank::ingest::{read_paired, ColumnMap};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(db) = read_paired(data, &ColumnMap::default()) {
        assert!(db.rows().iter().all(|(u, v)| u.is_finite() && v.is_finite()));
        assert_eq!(db.differences().len(), db.n());
    }
});
