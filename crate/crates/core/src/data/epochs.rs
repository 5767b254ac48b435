use std::collections::BTreeMap;
use std::path::Path;

use super::ndc1::Container;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Labelled fixed-length trials `[N, C, L]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochSet {
    pub epochs: Tensor<f32>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub subject: String,
    pub fs: f64,
    /// Provenance: preprocessing config hash, generator seed and the like.
    pub meta: BTreeMap<String, String>,
}

impl EpochSet {
    pub fn new(
        epochs: Tensor<f32>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        subject: impl Into<String>,
        fs: f64,
    ) -> Result<Self> {
        let set = Self {
            epochs,
            labels,
            class_names,
            subject: subject.into(),
            fs,
            meta: BTreeMap::new(),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs.rank() != 3 {
            return Err(Error::dim("epoch set", "epoch tensor rank", 3, self.epochs.rank()));
        }
        if self.epochs.dim(0) != self.labels.len() {
            return Err(Error::dim("epoch set", "labels", self.epochs.dim(0), self.labels.len()));
        }
        let k = self.class_names.len();
        if let Some(&bad) = self.labels.iter().find(|&&c| c >= k) {
            return Err(Error::Data(format!("label {bad} outside 0..{k}")));
        }
        if !self.epochs.all_finite() {
            return Err(Error::Data("epoch set contains non-finite samples".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn channels(&self) -> usize {
        self.epochs.dim(1)
    }

    pub fn samples(&self) -> usize {
        self.epochs.dim(2)
    }

    /// The subset at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            epochs: self.epochs.gather(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            subject: self.subject.clone(),
            fs: self.fs,
            meta: self.meta.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &c in &self.labels {
            counts[c] += 1;
        }
        counts
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        for (k, v) in &self.meta {
            c.set_meta(format!("prov.{k}"), v);
        }
        c.set_meta("kind", "epochset");
        c.set_meta("subject", &self.subject);
        c.set_meta("fs", self.fs);
        c.set_meta("class_names", serde_json::to_string(&self.class_names).expect("strings serialize"));
        c.put_f32("epochs", &self.epochs);
        c.put_u32(
            "labels",
            &[self.labels.len()],
            self.labels.iter().map(|&l| l as u32).collect(),
        );
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let kind = c.meta("kind")?;
        if kind != "epochset" {
            return Err(Error::Data(format!("container holds {kind:?}, expected an epoch set")));
        }
        let class_names: Vec<String> = serde_json::from_str(c.meta("class_names")?)
            .map_err(|e| Error::Data(format!("bad class_names metadata: {e}")))?;
        let (_, labels) = c.get_u32("labels")?;
        let meta = c
            .meta
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("prov.").map(|k| (k.to_string(), v.clone())))
            .collect();
        let set = Self {
            epochs: c.get_f32("epochs")?,
            labels: labels.into_iter().map(|l| l as usize).collect(),
            class_names,
            subject: c.meta("subject")?.to_string(),
            fs: c.meta_parse("fs")?,
            meta,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}
