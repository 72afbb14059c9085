//! Concept definitions for the feature-stream generators.
//!
//! Each generator exposes a concept (a labelling function, and for RBF also
//! the input distribution) and a successor rule. Drifts move the stream from
//! one regime to the next: a step for sudden drift, per-instance mixing with a
//! rising probability for gradual drift, and parameter interpolation for
//! incremental drift where the concept has continuous parameters (SEA, HYP,
//! RBF). AGRAWAL and random-tree concepts are discrete, so their incremental
//! transition falls back to mixing.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{rng_for, DriftKind, DriftSpec, GeneratorKind, Sample};
use crate::error::{Error, Result};

const SEA_THRESHOLDS: [f64; 4] = [8.0, 9.0, 7.0, 9.5];
const HYP_DIM: usize = 10;
const AGR_FUNCTIONS: usize = 3;
const RBF_CENTROIDS: usize = 50;
const RBF_DIM: usize = 10;
const RTG_DIM: usize = 10;
const RTG_MAX_DEPTH: usize = 5;
const RTG_MIN_LEAF_DEPTH: usize = 3;
const RTG_LEAF_FRACTION: f64 = 0.15;

#[derive(Debug, Clone)]
struct Centroid {
    center: Vec<f64>,
    class: u32,
    std_dev: f64,
    weight: f64,
}

#[derive(Debug, Clone)]
enum TreeNode {
    Leaf(u32),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
enum Concept {
    Sea { function: usize, threshold: f64 },
    Hyperplane { weights: Vec<f64> },
    Agrawal { function: usize },
    Rbf { centroids: Vec<Centroid>, cumulative: Vec<f64> },
    Tree { nodes: Vec<TreeNode> },
}

impl Concept {
    fn initial(generator: GeneratorKind, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(match generator {
            GeneratorKind::Sea => {
                let function = rng.random_range(0..SEA_THRESHOLDS.len());
                Concept::Sea {
                    function,
                    threshold: SEA_THRESHOLDS[function],
                }
            }
            GeneratorKind::Hyp => Concept::Hyperplane {
                weights: (0..HYP_DIM).map(|_| rng.random::<f64>()).collect(),
            },
            GeneratorKind::Agr => Concept::Agrawal {
                function: rng.random_range(0..AGR_FUNCTIONS),
            },
            GeneratorKind::Rbf => {
                let centroids: Vec<Centroid> = (0..RBF_CENTROIDS)
                    .map(|_| Centroid {
                        center: (0..RBF_DIM).map(|_| rng.random::<f64>()).collect(),
                        class: rng.random_range(0..2),
                        std_dev: rng.random::<f64>(),
                        weight: rng.random::<f64>(),
                    })
                    .collect();
                Concept::rbf(centroids)
            }
            GeneratorKind::Rtg => Concept::Tree {
                nodes: random_tree(rng),
            },
            GeneratorKind::ErrorTrace => {
                return Err(Error::InvalidConfig(
                    "error-trace generator has no feature concept".into(),
                ))
            }
        })
    }

    fn rbf(centroids: Vec<Centroid>) -> Self {
        let mut acc = 0.0;
        let cumulative = centroids
            .iter()
            .map(|c| {
                acc += c.weight;
                acc
            })
            .collect();
        Concept::Rbf {
            centroids,
            cumulative,
        }
    }

    fn successor(&self, rng: &mut ChaCha8Rng) -> Self {
        match self {
            Concept::Sea { function, .. } => {
                let function = (function + 1) % SEA_THRESHOLDS.len();
                Concept::Sea {
                    function,
                    threshold: SEA_THRESHOLDS[function],
                }
            }
            Concept::Hyperplane { weights } => Concept::Hyperplane {
                weights: (0..weights.len()).map(|_| rng.random::<f64>()).collect(),
            },
            Concept::Agrawal { function } => Concept::Agrawal {
                function: (function + 1) % AGR_FUNCTIONS,
            },
            Concept::Rbf { centroids, .. } => {
                let moved = centroids
                    .iter()
                    .map(|c| Centroid {
                        center: (0..c.center.len()).map(|_| rng.random::<f64>()).collect(),
                        ..c.clone()
                    })
                    .collect();
                Concept::rbf(moved)
            }
            Concept::Tree { .. } => Concept::Tree {
                nodes: random_tree(rng),
            },
        }
    }

    /// Parameter interpolation `(1 - t)·self + t·other`, where defined.
    fn lerp(&self, other: &Concept, t: f64) -> Option<Concept> {
        match (self, other) {
            (Concept::Sea { threshold: a, .. }, Concept::Sea { function, threshold: b }) => {
                Some(Concept::Sea {
                    function: *function,
                    threshold: a + t * (b - a),
                })
            }
            (Concept::Hyperplane { weights: a }, Concept::Hyperplane { weights: b }) => {
                Some(Concept::Hyperplane {
                    weights: a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect(),
                })
            }
            (Concept::Rbf { centroids: a, .. }, Concept::Rbf { centroids: b, .. }) => {
                let centroids = a
                    .iter()
                    .zip(b)
                    .map(|(ca, cb)| Centroid {
                        center: ca
                            .center
                            .iter()
                            .zip(&cb.center)
                            .map(|(x, y)| x + t * (y - x))
                            .collect(),
                        ..ca.clone()
                    })
                    .collect();
                Some(Concept::rbf(centroids))
            }
            _ => None,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, u32) {
        match self {
            Concept::Sea { threshold, .. } => {
                let x: Vec<f64> = (0..3).map(|_| 10.0 * rng.random::<f64>()).collect();
                let label = u32::from(x[0] + x[1] > *threshold);
                (x, label)
            }
            Concept::Hyperplane { weights } => {
                let x: Vec<f64> = (0..weights.len()).map(|_| rng.random::<f64>()).collect();
                let dot: f64 = x.iter().zip(weights).map(|(a, b)| a * b).sum();
                let half: f64 = 0.5 * weights.iter().sum::<f64>();
                (x, u32::from(dot >= half))
            }
            Concept::Agrawal { function } => {
                let x = agrawal_features(rng);
                let label = agrawal_label(*function, &x);
                (x, label)
            }
            Concept::Rbf {
                centroids,
                cumulative,
            } => {
                let total = *cumulative.last().expect("rbf has centroids");
                let pick = rng.random::<f64>() * total;
                let idx = cumulative
                    .partition_point(|&c| c <= pick)
                    .min(centroids.len() - 1);
                let c = &centroids[idx];
                let dir: Vec<f64> = (0..c.center.len())
                    .map(|_| StandardNormal.sample(rng))
                    .collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                let scale: f64 = StandardNormal.sample(rng);
                let scale = scale * c.std_dev / norm;
                let x = c.center.iter().zip(&dir).map(|(m, d)| m + d * scale).collect();
                (x, c.class)
            }
            Concept::Tree { nodes } => {
                let x: Vec<f64> = (0..RTG_DIM).map(|_| rng.random::<f64>()).collect();
                let mut node = 0;
                let label = loop {
                    match &nodes[node] {
                        TreeNode::Leaf(class) => break *class,
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => node = if x[*feature] <= *threshold { *left } else { *right },
                    }
                };
                (x, label)
            }
        }
    }
}

fn random_tree(rng: &mut ChaCha8Rng) -> Vec<TreeNode> {
    fn grow(nodes: &mut Vec<TreeNode>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let idx = nodes.len();
        let leaf = depth >= RTG_MAX_DEPTH
            || (depth >= RTG_MIN_LEAF_DEPTH && rng.random::<f64>() < RTG_LEAF_FRACTION);
        if leaf {
            nodes.push(TreeNode::Leaf(rng.random_range(0..2)));
            return idx;
        }
        nodes.push(TreeNode::Leaf(0));
        let feature = rng.random_range(0..RTG_DIM);
        let threshold = rng.random::<f64>();
        let left = grow(nodes, depth + 1, rng);
        let right = grow(nodes, depth + 1, rng);
        nodes[idx] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        idx
    }

    let mut nodes = Vec::new();
    grow(&mut nodes, 0, rng);
    // A constant tree would make every concept identical.
    let classes: Vec<u32> = nodes
        .iter()
        .filter_map(|n| match n {
            TreeNode::Leaf(c) => Some(*c),
            TreeNode::Split { .. } => None,
        })
        .collect();
    if classes.iter().all(|&c| c == classes[0]) {
        if let Some(TreeNode::Leaf(c)) = nodes.iter_mut().find(|n| matches!(n, TreeNode::Leaf(_))) {
            *c = 1 - *c;
        }
    }
    nodes
}

/// AGRAWAL attributes: salary, commission, age, elevel, car, zipcode, hvalue,
/// hyears, loan.
fn agrawal_features(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let salary = 20_000.0 + 130_000.0 * rng.random::<f64>();
    let commission = if salary >= 75_000.0 {
        0.0
    } else {
        10_000.0 + 65_000.0 * rng.random::<f64>()
    };
    let age = 20.0 + 60.0 * rng.random::<f64>();
    let elevel = f64::from(rng.random_range(0..5u32));
    let car = f64::from(rng.random_range(1..21u32));
    let zipcode = rng.random_range(0..9u32);
    let hvalue = f64::from(9 - zipcode) * 100_000.0 * (0.5 + rng.random::<f64>());
    let hyears = 1.0 + 29.0 * rng.random::<f64>();
    let loan = 500_000.0 * rng.random::<f64>();
    vec![
        salary,
        commission,
        age,
        elevel,
        car,
        f64::from(zipcode),
        hvalue,
        hyears,
        loan,
    ]
}

fn agrawal_label(function: usize, x: &[f64]) -> u32 {
    let (salary, age, elevel) = (x[0], x[2], x[3]);
    let group_a = match function {
        0 => !(40.0..60.0).contains(&age),
        1 => {
            if age < 40.0 {
                (50_000.0..=100_000.0).contains(&salary)
            } else if age < 60.0 {
                (75_000.0..=125_000.0).contains(&salary)
            } else {
                (25_000.0..=75_000.0).contains(&salary)
            }
        }
        _ => {
            if age < 40.0 {
                elevel <= 1.0
            } else if age < 60.0 {
                (1.0..=3.0).contains(&elevel)
            } else {
                elevel >= 2.0
            }
        }
    };
    u32::from(!group_a)
}

#[derive(Debug, Clone)]
enum Regime {
    Pure(Concept),
    Mix { old: Concept, new: Concept, p_new: f64 },
}

impl Regime {
    fn newest(&self) -> &Concept {
        match self {
            Regime::Pure(c) => c,
            Regime::Mix { new, .. } => new,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, u32) {
        match self {
            Regime::Pure(c) => c.sample(rng),
            Regime::Mix { old, new, p_new } => {
                if rng.random::<f64>() < *p_new {
                    new.sample(rng)
                } else {
                    old.sample(rng)
                }
            }
        }
    }
}

/// Stateful sample source walking through a drift schedule.
#[derive(Debug, Clone)]
pub struct ConceptStream {
    regimes: Vec<Regime>,
    drifts: Vec<DriftSpec>,
    rng: ChaCha8Rng,
    noise: f64,
    t: usize,
}

impl ConceptStream {
    pub fn new(
        generator: GeneratorKind,
        drifts: &[DriftSpec],
        length: usize,
        seed: u64,
        noise: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise) {
            return Err(Error::InvalidConfig(format!("noise {noise} outside [0, 1]")));
        }
        for (i, d) in drifts.iter().enumerate() {
            d.validate(length)?;
            if let Some(next) = drifts.get(i + 1) {
                if d.end() > next.position {
                    return Err(Error::InvalidConfig(
                        "drifts must be sorted and non-overlapping".into(),
                    ));
                }
            }
        }
        let mut rng = rng_for(seed);
        let mut regimes = vec![Regime::Pure(Concept::initial(generator, &mut rng)?)];
        for d in drifts {
            let prev = regimes.last().expect("initial regime").clone();
            let next = if d.kind == DriftKind::Normal || d.magnitude == 0.0 {
                prev
            } else {
                let base = prev.newest().clone();
                let target = base.successor(&mut rng);
                if d.magnitude >= 1.0 {
                    Regime::Pure(target)
                } else if let Some(c) = base.lerp(&target, d.magnitude) {
                    Regime::Pure(c)
                } else {
                    Regime::Mix {
                        old: base,
                        new: target,
                        p_new: d.magnitude,
                    }
                }
            };
            regimes.push(next);
        }
        Ok(Self {
            regimes,
            drifts: drifts.to_vec(),
            rng,
            noise,
            t: 0,
        })
    }

    pub fn next_sample(&mut self) -> Sample {
        let t = self.t;
        self.t += 1;
        let passed = self.drifts.partition_point(|d| d.position <= t);
        let (features, mut label) = if passed == 0 {
            self.regimes[0].sample(&mut self.rng)
        } else {
            let drift = self.drifts[passed - 1];
            let (before, after) = (&self.regimes[passed - 1], &self.regimes[passed]);
            if t >= drift.end() {
                after.sample(&mut self.rng)
            } else {
                let alpha = (t - drift.position + 1) as f64 / (drift.width + 1) as f64;
                let interpolated = match (drift.kind, before, after) {
                    (DriftKind::Incremental, Regime::Pure(a), Regime::Pure(b)) => a.lerp(b, alpha),
                    _ => None,
                };
                match interpolated {
                    Some(c) => c.sample(&mut self.rng),
                    None if self.rng.random::<f64>() < alpha => after.sample(&mut self.rng),
                    None => before.sample(&mut self.rng),
                }
            }
        };
        if self.noise > 0.0 && self.rng.random::<f64>() < self.noise {
            label = 1 - label;
        }
        Sample { features, label }
    }
}
