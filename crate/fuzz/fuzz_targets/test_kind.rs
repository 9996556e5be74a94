#![no_main]

use dprank::inference::TestKind;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(kind) = s.parse::<TestKind>() {
            assert_eq!(kind.as_str().parse::<TestKind>().ok(), Some(kind));
        }
    }
});
