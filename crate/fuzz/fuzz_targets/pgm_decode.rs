#![no_main]

use libfuzzer_sys::fuzz_target;
use trikeplan::costmap::{decode_pgm, encode_pgm};

fuzz_target!(|data: &[u8]| {
    if let Ok(pgm) = decode_pgm(data) {
        assert_eq!(pgm.pixels.len(), pgm.width * pgm.height);
        assert_eq!(decode_pgm(&encode_pgm(&pgm)).unwrap(), pgm);
    }
});
