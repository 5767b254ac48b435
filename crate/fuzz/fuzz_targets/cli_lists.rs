#![no_main]

use libfuzzer_sys::fuzz_target;
use neurodiff::harness::args::{parse_band, parse_freq_list, parse_seed_list};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(list) = parse_freq_list(text) {
        assert!(list.iter().all(|f| f.is_finite() && *f > 0.0));
    }
    if let Ok([lo, hi]) = parse_band(text) {
        assert!(lo < hi);
    }
    let _ = parse_seed_list(text);
});
