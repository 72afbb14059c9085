//! Episodic training.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    argmax, cosine_distance, cosine_distance_grad, softmax_neg, Adam, Architecture, EmbeddingNet, Grads,
    MetaDetector, PrototypeSet, TrainingMeta,
};
use crate::error::{Error, Result};
use crate::metafeat::{MetaSample, WindowSpec};
use crate::streamgen::{rng_for, NUM_CLASSES};

/// Support and query counts per class in one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub support: usize,
    pub query: usize,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        Self { support: 5, query: 15 }
    }
}

/// Support and query gap vectors, grouped by class index.
#[derive(Debug, Clone)]
pub struct Episode<'a> {
    pub support: Vec<Vec<&'a [f64]>>,
    pub query: Vec<Vec<&'a [f64]>>,
}

/// Draws disjoint support and query sets from each class pool.
pub fn sample_episode<'a, R: Rng + ?Sized>(
    pools: &[Vec<&'a [f64]>],
    spec: EpisodeSpec,
    rng: &mut R,
) -> Result<Episode<'a>> {
    let need = spec.support + spec.query;
    let mut support = Vec::with_capacity(pools.len());
    let mut query = Vec::with_capacity(pools.len());
    for (k, pool) in pools.iter().enumerate() {
        if pool.len() < need {
            return Err(Error::TooShort {
                needed: need,
                actual: pool.len(),
            })
            .map_err(|e| Error::InvalidConfig(format!("class {k} pool: {e}")));
        }
        let picked = index::sample(rng, pool.len(), need);
        let mut s = Vec::with_capacity(spec.support);
        let mut q = Vec::with_capacity(spec.query);
        for (j, i) in picked.iter().enumerate() {
            if j < spec.support {
                s.push(pool[i]);
            } else {
                q.push(pool[i]);
            }
        }
        support.push(s);
        query.push(q);
    }
    Ok(Episode { support, query })
}

/// Mean negative log-likelihood of the query labels and its gradient with
/// respect to every network parameter.
pub fn episode_loss_and_grad(net: &EmbeddingNet, episode: &Episode<'_>) -> Result<(f64, Grads)> {
    let k_classes = episode.support.len();
    if k_classes == 0 || episode.query.len() != k_classes || episode.support.iter().any(Vec::is_empty) {
        return Err(Error::InvalidConfig("episode needs support for every class".into()));
    }
    let mut support = Vec::with_capacity(k_classes);
    let mut prototypes = Vec::with_capacity(k_classes);
    for class in &episode.support {
        let mut centroid = vec![0.0; net.embed_dim];
        let mut caches = Vec::with_capacity(class.len());
        for x in class {
            let (z, cache) = net.forward(x)?;
            centroid.iter_mut().zip(&z).for_each(|(c, v)| *c += v);
            caches.push(cache);
        }
        centroid.iter_mut().for_each(|c| *c /= class.len() as f64);
        prototypes.push(centroid);
        support.push(caches);
    }
    let total_queries: usize = episode.query.iter().map(Vec::len).sum();
    if total_queries == 0 {
        return Err(Error::InvalidConfig("episode has no queries".into()));
    }
    let scale = 1.0 / total_queries as f64;
    let mut grads = net.zero_grads();
    let mut proto_grads = vec![vec![0.0; net.embed_dim]; k_classes];
    let mut loss = 0.0;
    for (label, class) in episode.query.iter().enumerate() {
        for x in class {
            let (z, cache) = net.forward(x)?;
            let d: Vec<f64> = prototypes.iter().map(|c| cosine_distance(&z, c)).collect();
            let p = softmax_neg(&d);
            loss -= scale * p[label].ln();
            let mut dz = vec![0.0; net.embed_dim];
            for (k, c) in prototypes.iter().enumerate() {
                // ∂J/∂d_k = −∂J/∂logit_k = −(p_k − 1[k = label])·scale.
                let dd = -(p[k] - f64::from(u8::from(k == label))) * scale;
                if dd == 0.0 {
                    continue;
                }
                let (du, dc) = cosine_distance_grad(&z, c);
                dz.iter_mut().zip(&du).for_each(|(g, v)| *g += dd * v);
                proto_grads[k].iter_mut().zip(&dc).for_each(|(g, v)| *g += dd * v);
            }
            net.backward(&cache, &dz, &mut grads);
        }
    }
    if !loss.is_finite() {
        return Err(Error::Training(format!("non-finite episode loss {loss}")));
    }
    for (k, caches) in support.iter().enumerate() {
        let share: Vec<f64> = proto_grads[k].iter().map(|g| g / caches.len() as f64).collect();
        for cache in caches {
            net.backward(cache, &share, &mut grads);
        }
    }
    Ok((loss, grads))
}

/// Negative log-likelihood of `label` for one input against fixed
/// prototypes, with its gradient with respect to the network parameters.
pub fn sample_loss_and_grad(
    net: &EmbeddingNet,
    prototypes: &PrototypeSet,
    x: &[f64],
    label: usize,
) -> Result<(f64, Grads)> {
    if label >= prototypes.centroids.len() {
        return Err(Error::OutOfDomain(format!("class index {label}")));
    }
    let (z, cache) = net.forward(x)?;
    let d: Vec<f64> = prototypes.centroids.iter().map(|c| cosine_distance(&z, c)).collect();
    let p = softmax_neg(&d);
    let mut dz = vec![0.0; net.embed_dim];
    for (k, c) in prototypes.centroids.iter().enumerate() {
        let dd = -(p[k] - f64::from(u8::from(k == label)));
        let (du, _) = cosine_distance_grad(&z, c);
        dz.iter_mut().zip(&du).for_each(|(g, v)| *g += dd * v);
    }
    let mut grads = net.zero_grads();
    net.backward(&cache, &dz, &mut grads);
    Ok((-p[label].ln(), grads))
}

/// Held-out quality of a detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    /// Recall per class, in drift-kind order.
    pub per_class_accuracy: Vec<f64>,
    /// Mean of the per-class accuracies.
    pub macro_accuracy: f64,
}

pub fn evaluate(net: &EmbeddingNet, prototypes: &PrototypeSet, samples: &[MetaSample]) -> Result<Evaluation> {
    let mut correct = [0usize; NUM_CLASSES];
    let mut seen = vec![0usize; NUM_CLASSES];
    let mut loss = 0.0;
    for s in samples {
        let label = s
            .label
            .ok_or_else(|| Error::Malformed("evaluation sample without a label".into()))?
            .index();
        let p = prototypes.classify_embedding(&net.embed(&s.gaps)?);
        loss -= p[label].ln();
        seen[label] += 1;
        correct[label] += usize::from(argmax(&p) == label);
    }
    if samples.is_empty() {
        return Err(Error::TooShort { needed: 1, actual: 0 });
    }
    let per_class: Vec<f64> = correct
        .iter()
        .zip(&seen)
        .map(|(&c, &n)| if n == 0 { f64::NAN } else { c as f64 / n as f64 })
        .collect();
    let present: Vec<f64> = per_class.iter().copied().filter(|v| !v.is_nan()).collect();
    Ok(Evaluation {
        loss: loss / samples.len() as f64,
        accuracy: correct.iter().sum::<usize>() as f64 / samples.len() as f64,
        macro_accuracy: present.iter().sum::<f64>() / present.len() as f64,
        per_class_accuracy: per_class,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    /// Hidden widths of the FCN.
    pub fcn_hidden: Vec<usize>,
    /// Hidden state size of the RNN.
    pub rnn_hidden: usize,
    pub embed_dim: usize,
    pub episodes: usize,
    pub episode: EpisodeSpec,
    /// Supports per class drawn for the final prototypes.
    pub final_support: usize,
    pub learning_rate: f64,
    /// Episodes without validation improvement before stopping.
    pub patience: usize,
    /// Share of each class held out for early stopping.
    pub validation_fraction: f64,
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Fcn,
            fcn_hidden: vec![128, 64, 32],
            rnn_hidden: 32,
            embed_dim: 16,
            episodes: 2000,
            episode: EpisodeSpec::default(),
            final_support: 20,
            learning_rate: 1e-3,
            patience: 100,
            validation_fraction: 0.2,
            eval_every: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Training loss of every episode.
    pub losses: Vec<f64>,
    /// `(episode, loss, accuracy)` at each validation check.
    pub validation: Vec<(usize, f64, f64)>,
    pub best_episode: usize,
    pub episodes_run: usize,
    pub stopped_early: bool,
}

fn split_pools<'a, R: Rng + ?Sized>(
    corpus: &'a [MetaSample],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(Vec<Vec<&'a MetaSample>>, Vec<&'a MetaSample>)> {
    let mut by_class: Vec<Vec<&MetaSample>> = vec![Vec::new(); NUM_CLASSES];
    for s in corpus {
        let label = s
            .label
            .ok_or_else(|| Error::Malformed("training sample without a label".into()))?;
        by_class[label.index()].push(s);
    }
    let need = cfg.episode.support + cfg.episode.query;
    let mut train = Vec::with_capacity(NUM_CLASSES);
    let mut validation = Vec::new();
    for (k, mut pool) in by_class.into_iter().enumerate() {
        pool.shuffle(rng);
        let held = if cfg.episodes == 0 {
            0
        } else {
            (pool.len() as f64 * cfg.validation_fraction).floor() as usize
        };
        let kept = pool.len() - held;
        if kept < need.max(1) {
            return Err(Error::InvalidConfig(format!(
                "class {} has {kept} training samples, episodes need {need}",
                crate::streamgen::DriftKind::ALL[k]
            )));
        }
        validation.extend(pool.drain(kept..));
        train.push(pool);
    }
    Ok((train, validation))
}

fn prototypes_from(net: &EmbeddingNet, pools: &[Vec<&MetaSample>]) -> Result<PrototypeSet> {
    let support: Vec<MetaSample> = pools.iter().flatten().map(|&s| s.clone()).collect();
    PrototypeSet::compute(net, &support)
}

/// Trains an embedding network on a labeled meta-corpus.
///
/// Each episode samples `support + query` items per class, builds prototypes
/// from the supports and takes one Adam step on the query NLL. Every
/// `eval_every` episodes the held-out loss is measured with prototypes from
/// the whole training split; training stops after `patience` episodes
/// without improvement and the best parameters are kept. The returned
/// prototypes average `final_support` random training samples per class.
pub fn train_meta_detector(
    corpus: &[MetaSample],
    window: WindowSpec,
    cfg: &TrainConfig,
) -> Result<(MetaDetector, TrainReport)> {
    window.validate()?;
    if let Some(s) = corpus.iter().find(|s| s.gaps.len() != window.l) {
        return Err(Error::DimensionMismatch {
            expected: window.l,
            actual: s.gaps.len(),
        });
    }
    if !(0.0..1.0).contains(&cfg.validation_fraction) || cfg.eval_every == 0 {
        return Err(Error::InvalidConfig(
            "validation_fraction must be in [0, 1) and eval_every positive".into(),
        ));
    }
    let mut rng = rng_for(cfg.seed);
    let mut net = match cfg.architecture {
        Architecture::Fcn => EmbeddingNet::fcn(window.l, &cfg.fcn_hidden, cfg.embed_dim, &mut rng)?,
        Architecture::Rnn => EmbeddingNet::rnn(window.l, cfg.rnn_hidden, cfg.embed_dim, &mut rng)?,
    };
    let (train, validation) = split_pools(corpus, cfg, &mut rng)?;
    let gap_pools: Vec<Vec<&[f64]>> = train
        .iter()
        .map(|pool| pool.iter().map(|s| s.gaps.as_slice()).collect())
        .collect();
    let mut adam = Adam::new(cfg.learning_rate);
    let mut report = TrainReport::default();
    let mut best: Option<(f64, EmbeddingNet)> = None;
    for episode_no in 1..=cfg.episodes {
        let episode = sample_episode(&gap_pools, cfg.episode, &mut rng)?;
        let (loss, grads) = episode_loss_and_grad(&net, &episode)?;
        adam.step(&mut net.params, &grads)?;
        if !net.is_finite() {
            return Err(Error::Training(format!("parameters diverged at episode {episode_no}")));
        }
        report.losses.push(loss);
        report.episodes_run = episode_no;
        if validation.is_empty() || episode_no % cfg.eval_every != 0 {
            continue;
        }
        let protos = prototypes_from(&net, &train)?;
        let held: Vec<MetaSample> = validation.iter().map(|&s| s.clone()).collect();
        let eval = evaluate(&net, &protos, &held)?;
        report.validation.push((episode_no, eval.loss, eval.accuracy));
        log::debug!("episode {episode_no}: train {loss:.4}, validation {:.4}", eval.loss);
        if best.as_ref().is_none_or(|(b, _)| eval.loss < *b) {
            best = Some((eval.loss, net.clone()));
            report.best_episode = episode_no;
        } else if episode_no - report.best_episode >= cfg.patience {
            report.stopped_early = true;
            break;
        }
    }
    let final_validation_loss = best.as_ref().map(|(l, _)| *l);
    if let Some((_, best_net)) = best {
        net = best_net;
    } else {
        report.best_episode = report.episodes_run;
    }
    let final_support: Vec<MetaSample> = train
        .iter()
        .flat_map(|pool| {
            let take = cfg.final_support.min(pool.len()).max(1);
            index::sample(&mut rng, pool.len(), take)
                .into_iter()
                .map(|i| pool[i].clone())
                .collect::<Vec<_>>()
        })
        .collect();
    let prototypes = PrototypeSet::compute(&net, &final_support)?;
    let detector = MetaDetector {
        net,
        prototypes,
        window,
        training: TrainingMeta {
            seed: cfg.seed,
            episodes_run: report.episodes_run,
            best_episode: report.best_episode,
            corpus_size: corpus.len(),
            support_per_class: cfg.episode.support,
            query_per_class: cfg.episode.query,
            final_support_per_class: cfg.final_support,
            learning_rate: cfg.learning_rate,
            final_validation_loss,
        },
    };
    Ok((detector, report))
}
