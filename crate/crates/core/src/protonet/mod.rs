//! Prototypical-network meta-detector.
//!
//! Gap vectors are embedded by a small network, each drift class is
//! represented by the mean embedding of its support samples, and a query is
//! classified by a softmax over negative cosine distances to those
//! prototypes. Training is episodic with a negative log-likelihood loss.

mod adam;
mod net;
mod train;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use net::{Architecture, Cache, EmbeddingNet, Grads, Param};
pub use train::{
    episode_loss_and_grad, evaluate, sample_episode, sample_loss_and_grad, train_meta_detector, Episode, EpisodeSpec, Evaluation,
    TrainConfig, TrainReport,
};

use crate::error::{Error, Result};
use crate::metafeat::{MetaSample, WindowSpec};
use crate::streamgen::{DriftKind, NUM_CLASSES};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `1 − cos(u, v)`; defined as 1 when either vector has zero norm.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        log::debug!("zero-norm vector in cosine distance");
        return 1.0;
    }
    1.0 - dot(u, v) / (nu * nv)
}

/// Gradients of [`cosine_distance`] with respect to `u` and `v`.
pub(crate) fn cosine_distance_grad(u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return (vec![0.0; u.len()], vec![0.0; v.len()]);
    }
    let cos = dot(u, v) / (nu * nv);
    let du = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| -(b / (nu * nv) - cos * a / (nu * nu)))
        .collect();
    let dv = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| -(a / (nu * nv) - cos * b / (nv * nv)))
        .collect();
    (du, dv)
}

/// `softmax(−d)` over the given distances.
pub fn softmax_neg(distances: &[f64]) -> Vec<f64> {
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = distances.iter().map(|d| (min - d).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// One prototype per drift class, with the number of embeddings averaged
/// into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    pub centroids: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

impl PrototypeSet {
    /// Mean embedding per class of `support`; every class must appear.
    pub fn compute(net: &EmbeddingNet, support: &[MetaSample]) -> Result<Self> {
        let mut centroids = vec![vec![0.0; net.embed_dim]; NUM_CLASSES];
        let mut counts = vec![0usize; NUM_CLASSES];
        for s in support {
            let label = s
                .label
                .ok_or_else(|| Error::Malformed("support sample without a label".into()))?;
            let z = net.embed(&s.gaps)?;
            let k = label.index();
            counts[k] += 1;
            centroids[k].iter_mut().zip(&z).for_each(|(c, v)| *c += v);
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidConfig(format!(
                "no support sample for class {}",
                DriftKind::ALL[k]
            )));
        }
        for (c, &n) in centroids.iter_mut().zip(&counts) {
            c.iter_mut().for_each(|v| *v /= n as f64);
        }
        Ok(Self { centroids, counts })
    }

    /// Folds one more embedding into the running mean of class `k`.
    pub fn absorb(&mut self, class: DriftKind, embedding: &[f64]) -> Result<()> {
        let k = class.index();
        let c = &mut self.centroids[k];
        if c.len() != embedding.len() {
            return Err(Error::DimensionMismatch {
                expected: c.len(),
                actual: embedding.len(),
            });
        }
        let m = self.counts[k] as f64;
        c.iter_mut().zip(embedding).for_each(|(ck, z)| *ck = (m * *ck + z) / (m + 1.0));
        self.counts[k] += 1;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.centroids.iter().flatten().all(|v| v.is_finite())
    }

    /// Class probabilities of an embedding.
    pub fn classify_embedding(&self, z: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = self.centroids.iter().map(|c| cosine_distance(z, c)).collect();
        softmax_neg(&d)
    }
}

/// Class probabilities of `x` under `net` and `prototypes`.
pub fn classify(net: &EmbeddingNet, prototypes: &PrototypeSet, x: &[f64]) -> Result<Vec<f64>> {
    Ok(prototypes.classify_embedding(&net.embed(x)?))
}

/// Index of the largest probability (first one on ties).
pub fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > p[best] { i } else { best })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaPrediction {
    pub class: DriftKind,
    pub probabilities: Vec<f64>,
    pub embedding: Vec<f64>,
}

/// Training metadata stored alongside a checkpoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub episodes_run: usize,
    pub best_episode: usize,
    pub corpus_size: usize,
    pub support_per_class: usize,
    pub query_per_class: usize,
    pub final_support_per_class: usize,
    pub learning_rate: f64,
    pub final_validation_loss: Option<f64>,
}

/// A trained embedding network with its prototypes and window spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaDetector {
    pub net: EmbeddingNet,
    pub prototypes: PrototypeSet,
    pub window: WindowSpec,
    #[serde(default)]
    pub training: TrainingMeta,
}

const CHECKPOINT_FORMAT: &str = "metadrift-checkpoint/1";

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    #[serde(flatten)]
    detector: MetaDetector,
}

impl MetaDetector {
    pub fn predict(&self, gaps: &[f64]) -> Result<MetaPrediction> {
        let embedding = self.net.embed(gaps)?;
        let probabilities = self.prototypes.classify_embedding(&embedding);
        let class = DriftKind::ALL[argmax(&probabilities)];
        Ok(MetaPrediction {
            class,
            probabilities,
            embedding,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.window.validate()?;
        if self.net.input_dim != self.window.l {
            return Err(Error::DimensionMismatch {
                expected: self.window.l,
                actual: self.net.input_dim,
            });
        }
        let p = &self.prototypes;
        if p.centroids.len() != NUM_CLASSES
            || p.counts.len() != NUM_CLASSES
            || p.centroids.iter().any(|c| c.len() != self.net.embed_dim)
            || p.counts.contains(&0)
            || !p.is_finite()
        {
            return Err(Error::Malformed("prototype set is incomplete or non-finite".into()));
        }
        Ok(())
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            detector: self.clone(),
        };
        serde_json::to_writer_pretty(out, &ck)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_reader(input)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Malformed(format!("unsupported checkpoint format `{}`", ck.format)));
        }
        ck.detector.validate()?;
        Ok(ck.detector)
    }
}
