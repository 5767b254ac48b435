mod common;

use std::path::{Path, PathBuf};

use common::containers_identical;
use neurodiff::data::{Container, EpochSet, SyntheticSpec};
use neurodiff::harness::args::{parse_band, parse_freq_list, parse_seed_list};
use neurodiff::harness::{Profile, RunConfig};
use neurodiff::prep::Recording;

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus {target}");
    out
}

#[test]
fn ndc1_seeds() {
    let mut decoded = 0;
    for (path, bytes) in corpus("ndc1_decode") {
        if let Ok(c) = Container::decode(&bytes) {
            let again = Container::decode(&c.encode()).unwrap();
            assert!(containers_identical(&c, &again), "{}", path.display());
            let _ = EpochSet::from_container(&c);
            let _ = Recording::from_container(&c);
            decoded += 1;
        }
    }
    assert!(decoded >= 1);
}

#[test]
fn config_seeds() {
    for (path, bytes) in corpus("config_parse") {
        let Ok(text) = std::str::from_utf8(&bytes) else { continue };
        for profile in [Profile::Desk, Profile::Paper] {
            if let Ok(cfg) = RunConfig::from_toml(profile, text) {
                let back = RunConfig::from_toml(profile, &cfg.to_toml()).unwrap();
                assert_eq!(cfg.hash(), back.hash(), "{}", path.display());
            }
        }
    }
}

#[test]
fn synthetic_spec_seeds() {
    for (_, bytes) in corpus("synthetic_spec") {
        let Ok(text) = std::str::from_utf8(&bytes) else { continue };
        if let Ok(spec) = SyntheticSpec::from_toml(text) {
            for c in 0..spec.num_classes {
                assert_eq!(spec.carriers(c).len(), spec.carriers_per_class);
                assert!(spec.active_set(c).iter().all(|&ch| ch < spec.channels));
            }
        }
    }
}

#[test]
fn cli_list_seeds() {
    for (_, bytes) in corpus("cli_lists") {
        let Ok(text) = std::str::from_utf8(&bytes) else { continue };
        if let Ok(list) = parse_freq_list(text) {
            assert!(list.iter().all(|f| f.is_finite() && *f > 0.0));
        }
        if let Ok([lo, hi]) = parse_band(text) {
            assert!(lo < hi);
        }
        let _ = parse_seed_list(text);
    }
}
