//! Deterministic generator for BIM-like project graphs.
//!
//! Labels form a two-level hierarchy (generic family → subtype). Each subtype
//! has a prototype `(1 - c)·u_s + c·g_k` mixing a direction unique to the
//! subtype with the direction of its family, where `c` is
//! `sibling_confusion`. Node features are that prototype plus the family
//! prototype plus isotropic Gaussian noise. All `u_s` and `g_k` are mutually
//! orthonormal, so at `c = 0` subtype prototypes are orthogonal and at
//! `c = 1` siblings share one prototype. Edges only connect nodes of the same
//! project and are denser between members of the same family.

use ndarray::{Array2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, Node};
use crate::error::{Error, Result};
use crate::label_encoding::{orthonormal_rows, LabelVocabulary, BIM_GENERIC_TYPES};

/// Standard deviation of the per-component feature noise.
pub const FEATURE_NOISE_STD: f64 = 0.12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_projects: usize,
    pub generic_types: usize,
    pub subtypes_per_type: usize,
    pub nodes_per_project: usize,
    pub intra_edge_prob: f64,
    pub inter_edge_prob: f64,
    pub feature_dim: usize,
    pub sibling_confusion: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_projects: 5,
            generic_types: 6,
            subtypes_per_type: 7,
            nodes_per_project: 210,
            intra_edge_prob: 0.05,
            inter_edge_prob: 0.005,
            feature_dim: 64,
            sibling_confusion: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn label_count(&self) -> usize {
        self.generic_types * self.subtypes_per_type
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_projects", self.n_projects),
            ("generic_types", self.generic_types),
            ("subtypes_per_type", self.subtypes_per_type),
            ("nodes_per_project", self.nodes_per_project),
            ("feature_dim", self.feature_dim),
        ];
        for (name, value) in counts {
            if value < 1 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        let probs = [
            ("intra_edge_prob", self.intra_edge_prob),
            ("inter_edge_prob", self.inter_edge_prob),
            ("sibling_confusion", self.sibling_confusion),
        ];
        for (name, value) in probs {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0, 1], got {value}"
                )));
            }
        }
        let needed = self.generic_types + self.label_count();
        if self.feature_dim < needed {
            return Err(Error::DimTooSmall {
                dim: self.feature_dim,
                needed,
            });
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> LabelVocabulary {
        let mut labels = Vec::with_capacity(self.label_count());
        let mut groups = Vec::with_capacity(self.label_count());
        for g in 0..self.generic_types {
            let family = BIM_GENERIC_TYPES
                .get(g)
                .map_or_else(|| format!("Type{g}"), |s| s.to_string());
            for s in 0..self.subtypes_per_type {
                labels.push(format!("{family} {}", s + 1));
                groups.push(g);
            }
        }
        LabelVocabulary::with_groups(labels, groups).expect("generated labels are distinct")
    }
}

/// Family and subtype prototype vectors, one row each.
#[derive(Debug, Clone)]
pub struct Prototypes {
    pub generic: Array2<f64>,
    pub subtype: Array2<f64>,
}

/// Recomputes the prototypes `generate_synthetic` uses for `cfg`.
pub fn subtype_prototypes(cfg: &SynthConfig) -> Result<Prototypes> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(draw_prototypes(cfg, &mut rng))
}

fn draw_prototypes(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Prototypes {
    let n_labels = cfg.label_count();
    let basis = orthonormal_rows(rng, cfg.generic_types + n_labels, cfg.feature_dim);
    let generic = basis
        .slice(ndarray::s![..cfg.generic_types, ..])
        .to_owned();
    let c = cfg.sibling_confusion;
    let mut subtype = Array2::zeros((n_labels, cfg.feature_dim));
    for (s, mut row) in subtype.axis_iter_mut(Axis(0)).enumerate() {
        let family = s / cfg.subtypes_per_type;
        let unique = basis.row(cfg.generic_types + s);
        row.assign(&(&unique * (1.0 - c) + &generic.row(family) * c));
    }
    Prototypes { generic, subtype }
}

fn project_name(i: usize, total: usize) -> String {
    if total <= 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("P{i}")
    }
}

/// Builds a dataset that is a pure function of `cfg`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let protos = draw_prototypes(cfg, &mut rng);
    let n_labels = cfg.label_count();

    let weights: Vec<f64> = (0..n_labels).map(|_| 0.5 + rng.random::<f64>()).collect();
    let sampler = WeightedIndex::new(&weights).expect("weights are positive");

    let mut nodes = Vec::with_capacity(cfg.n_projects * cfg.nodes_per_project);
    let mut edges = Vec::new();
    for project in 0..cfg.n_projects {
        // every label appears at least once when the project is large enough
        let mut labels: Vec<usize> = (0..n_labels.min(cfg.nodes_per_project)).collect();
        while labels.len() < cfg.nodes_per_project {
            labels.push(sampler.sample(&mut rng));
        }
        labels.shuffle(&mut rng);

        let first_id = nodes.len();
        for &label in &labels {
            let family = label / cfg.subtypes_per_type;
            let features = protos
                .subtype
                .row(label)
                .iter()
                .zip(protos.generic.row(family))
                .map(|(s, g)| {
                    let noise: f64 = rng.sample(StandardNormal);
                    s + g + FEATURE_NOISE_STD * noise
                })
                .collect();
            nodes.push(Node {
                id: nodes.len(),
                features,
                label_id: label,
                project_id: project,
            });
        }

        for i in 0..labels.len() {
            for j in (i + 1)..labels.len() {
                let same_family =
                    labels[i] / cfg.subtypes_per_type == labels[j] / cfg.subtypes_per_type;
                let p = if same_family {
                    cfg.intra_edge_prob
                } else {
                    cfg.inter_edge_prob
                };
                if rng.random::<f64>() < p {
                    edges.push((first_id + i, first_id + j));
                }
            }
        }
    }

    let projects = (0..cfg.n_projects)
        .map(|i| project_name(i, cfg.n_projects))
        .collect();
    Dataset::new(projects, cfg.vocabulary(), nodes, edges)
}
