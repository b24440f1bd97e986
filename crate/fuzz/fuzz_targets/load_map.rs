#![no_main]

use libfuzzer_sys::fuzz_target;
use trikeplan::costmap::load_map;

// Input layout: YAML metadata, a NUL byte, then the PGM image.
fuzz_target!(|data: &[u8]| {
    let Some(split) = data.iter().position(|&b| b == 0) else {
        return;
    };
    let Ok(meta) = std::str::from_utf8(&data[..split]) else {
        return;
    };
    if let Ok(grid) = load_map(&data[split + 1..], meta) {
        assert_eq!(grid.cells().len(), grid.width() * grid.height());
        assert!(grid.cells().iter().all(|&c| c == 0 || c == 255));
    }
});
