#![no_main]

use dprank::ingest::{read_grouped, ColumnMap};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // First byte picks the declared group count (0 = undeclared).
    let (declared, body) = match data.split_first() {
        Some((&b, rest)) => ((b % 8 != 0).then_some((b % 8) as usize), rest),
        None => (None, data),
    };
    if let Ok(db) = read_grouped(body, &ColumnMap::default(), declared) {
        if let Some(g) = declared {
            assert_eq!(db.g(), g);
        }
        assert!(db.values().iter().all(|v| v.is_finite()));
    }
});
