#![no_main]

use libfuzzer_sys::fuzz_target;
use neurodiff::data::{Container, EpochSet};
use neurodiff::prep::Recording;

fuzz_target!(|data: &[u8]| {
    let Ok(c) = Container::decode(data) else {
        return;
    };
    // Anything that decodes must re-encode to something that decodes the same.
    let again = Container::decode(&c.encode()).expect("re-encoded container decodes");
    assert_eq!(c.meta, again.meta);
    assert_eq!(c.tensors.len(), again.tensors.len());
    let _ = EpochSet::from_container(&c);
    let _ = Recording::from_container(&c);
});
