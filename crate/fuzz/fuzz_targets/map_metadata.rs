#![no_main]

use libfuzzer_sys::fuzz_target;
use trikeplan::costmap::MapMetadata;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(meta) = MapMetadata::parse(s) {
            assert!(meta.resolution > 0.0);
            assert!(meta.free_thresh <= meta.occupied_thresh);
        }
    }
});
