#![no_main]

use libfuzzer_sys::fuzz_target;
use neurodiff::harness::{Profile, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for profile in [Profile::Desk, Profile::Paper] {
        if let Ok(cfg) = RunConfig::from_toml(profile, text) {
            let back = RunConfig::from_toml(profile, &cfg.to_toml()).expect("serialized config parses");
            assert_eq!(cfg.hash(), back.hash());
        }
    }
});
