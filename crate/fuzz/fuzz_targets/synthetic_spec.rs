#![no_main]

use libfuzzer_sys::fuzz_target;
use neurodiff::data::SyntheticSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = SyntheticSpec::from_toml(text) {
        // Validation bounds the carriers; channel counts are only bounded by memory.
        if spec.active_channels > 1 << 16 {
            return;
        }
        let _ = spec.epoch_len();
        for c in 0..spec.num_classes.min(64) {
            let _ = spec.carriers(c);
            let _ = spec.active_set(c);
        }
    }
});
