use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The three ablation rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Denoisers, autoencoders and classifiers.
    Full,
    /// No denoisers: the autoencoder sees clean epochs and a zero condition.
    NoDdpm,
    /// Encoder, pooling and classifier only, trained on classification loss.
    NoDdpmNoDecoder,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::NoDdpm, Variant::NoDdpmNoDecoder];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoDdpm => "no_ddpm",
            Variant::NoDdpmNoDecoder => "no_ddpm_no_decoder",
        }
    }

    pub fn uses_denoiser(self) -> bool {
        self == Variant::Full
    }

    pub fn uses_decoder(self) -> bool {
        self != Variant::NoDdpmNoDecoder
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Variant::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}
