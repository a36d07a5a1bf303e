#![no_main]

use kdvb::io::{decode_snapshots, encode_snapshots};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = decode_snapshots(data) {
        // every accepted input is in canonical form
        assert_eq!(encode_snapshots(&file.meta, &file.records), data);
    }
});
