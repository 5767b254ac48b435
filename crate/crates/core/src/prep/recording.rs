use std::path::Path;

use crate::data::ndc1::Container;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub sample: usize,
    pub label: usize,
}

/// Continuous multichannel signal `[channels, samples]` with event markers.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub data: Tensor<f32>,
    pub fs: f64,
    pub channel_names: Vec<String>,
    pub events: Vec<Event>,
    pub class_names: Vec<String>,
    pub subject: String,
}

impl Recording {
    pub fn validate(&self) -> Result<()> {
        if self.data.rank() != 2 {
            return Err(Error::dim("recording", "data rank", 2, self.data.rank()));
        }
        if self.channel_names.len() != self.data.dim(0) {
            return Err(Error::dim("recording", "channel names", self.data.dim(0), self.channel_names.len()));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::Data(format!("sampling rate {} must be positive", self.fs)));
        }
        let n = self.samples();
        for e in &self.events {
            if e.sample >= n {
                return Err(Error::Data(format!("event at sample {} beyond recording length {n}", e.sample)));
            }
            if e.label >= self.class_names.len() {
                return Err(Error::Data(format!("event label {} has no class name", e.label)));
            }
        }
        if !self.data.all_finite() {
            return Err(Error::Data("recording contains non-finite samples".into()));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.data.dim(0)
    }

    pub fn samples(&self) -> usize {
        self.data.dim(1)
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.samples();
        &self.data.data()[c * n..(c + 1) * n]
    }

    /// Same recording with new channel data.
    pub fn with_data(&self, data: Tensor<f32>) -> Self {
        Self {
            data,
            fs: self.fs,
            channel_names: self.channel_names.clone(),
            events: self.events.clone(),
            class_names: self.class_names.clone(),
            subject: self.subject.clone(),
        }
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        c.set_meta("kind", "recording");
        c.set_meta("fs", self.fs);
        c.set_meta("subject", &self.subject);
        c.set_meta("channel_names", serde_json::to_string(&self.channel_names).expect("strings serialize"));
        c.set_meta("class_names", serde_json::to_string(&self.class_names).expect("strings serialize"));
        c.put_f32("data", &self.data);
        let ev = self.events.iter().flat_map(|e| [e.sample as u32, e.label as u32]).collect();
        c.put_u32("events", &[self.events.len(), 2], ev);
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let kind = c.meta("kind")?;
        if kind != "recording" {
            return Err(Error::Data(format!("container holds {kind:?}, expected a recording")));
        }
        let names = |key: &str| -> Result<Vec<String>> {
            serde_json::from_str(c.meta(key)?).map_err(|e| Error::Data(format!("bad {key} metadata: {e}")))
        };
        let (shape, ev) = c.get_u32("events")?;
        if shape.len() != 2 || shape[1] != 2 {
            return Err(Error::Data("events tensor must be [n, 2]".into()));
        }
        let rec = Self {
            data: c.get_f32("data")?,
            fs: c.meta_parse("fs")?,
            channel_names: names("channel_names")?,
            events: ev
                .chunks_exact(2)
                .map(|p| Event {
                    sample: p[0] as usize,
                    label: p[1] as usize,
                })
                .collect(),
            class_names: names("class_names")?,
            subject: c.meta("subject")?.to_string(),
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}
