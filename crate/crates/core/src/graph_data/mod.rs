//! Node-attributed project graphs, their JSON file format, and
//! leave-one-project-out fold construction.

mod synth;

use std::collections::HashSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label_encoding::LabelVocabulary;

pub use synth::{
    generate_synthetic, subtype_prototypes, Prototypes, SynthConfig, FEATURE_NOISE_STD,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub features: Vec<f64>,
    pub label_id: usize,
    pub project_id: usize,
}

/// Undirected graph without self-loops whose nodes belong to projects and
/// carry a class label. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    projects: Vec<String>,
    vocabulary: LabelVocabulary,
    features: Array2<f64>,
}

impl Dataset {
    /// Validates every invariant and derives the adjacency lists from `edges`.
    pub fn new(
        projects: Vec<String>,
        vocabulary: LabelVocabulary,
        nodes: Vec<Node>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = nodes.len();
        let feature_dim = nodes.first().map_or(0, |node| node.features.len());
        for (position, node) in nodes.iter().enumerate() {
            if node.id != position {
                return Err(Error::NonDenseIds {
                    id: node.id,
                    position,
                    count: n,
                });
            }
            if node.features.len() != feature_dim {
                return Err(Error::FeatureDimMismatch {
                    node: node.id,
                    expected: feature_dim,
                    found: node.features.len(),
                });
            }
            if node.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("features of node {}", node.id)));
            }
            if node.label_id >= vocabulary.len() {
                return Err(Error::UnknownLabel(format!(
                    "index {} on node {}",
                    node.label_id, node.id
                )));
            }
            if node.project_id >= projects.len() {
                return Err(Error::ProjectOutOfRange {
                    node: node.id,
                    project: node.project_id,
                    count: projects.len(),
                });
            }
        }

        let mut adjacency = vec![Vec::new(); n];
        let mut seen = HashSet::with_capacity(edges.len());
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(Error::DanglingEdge(a, b));
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::DuplicateEdge(a, b));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        let mut features = Array2::zeros((n, feature_dim));
        for (node, mut row) in nodes.iter().zip(features.rows_mut()) {
            row.assign(&ndarray::ArrayView1::from(node.features.as_slice()));
        }

        Ok(Self {
            nodes,
            edges,
            adjacency,
            projects,
            vocabulary,
            features,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn projects(&self) -> &[String] {
        &self.projects
    }

    pub fn vocabulary(&self) -> &LabelVocabulary {
        &self.vocabulary
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// All node features stacked row-wise, row `i` belonging to node `i`.
    pub fn feature_matrix(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn label_of(&self, id: usize) -> usize {
        self.nodes[id].label_id
    }

    /// Sorted neighbor ids of `id`.
    pub fn neighbors(&self, id: usize) -> Result<&[usize]> {
        self.adjacency
            .get(id)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownNode(id))
    }

    pub fn project_nodes(&self, project: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.project_id == project)
            .map(|n| n.id)
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DatasetFile {
            projects: self.projects.clone(),
            labels: self.vocabulary.labels().to_vec(),
            label_groups: self.vocabulary.groups().map(<[usize]>::to_vec),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id,
                    project: n.project_id,
                    label: LabelRef::Index(n.label_id),
                    features: n.features.clone(),
                })
                .collect(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
        };
        let mut s = serde_json::to_string(&file)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    projects: Vec<String>,
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_groups: Option<Vec<usize>>,
    nodes: Vec<NodeRecord>,
    edges: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: usize,
    project: usize,
    label: LabelRef,
    features: Vec<f64>,
}

/// A node's label, either as an index into `labels` or as the label string.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelRef {
    Index(usize),
    Name(String),
}

/// Parses and validates a dataset document.
pub fn load_dataset(bytes: &[u8]) -> Result<Dataset> {
    let file: DatasetFile = serde_json::from_slice(bytes)?;
    let vocabulary = match file.label_groups {
        Some(groups) => LabelVocabulary::with_groups(file.labels, groups)?,
        None => LabelVocabulary::new(file.labels)?,
    };
    let mut records = file.nodes;
    records.sort_by_key(|r| r.id);
    let nodes = records
        .into_iter()
        .map(|r| {
            let label_id = match r.label {
                LabelRef::Index(i) => i,
                LabelRef::Name(name) => vocabulary
                    .index_of(&name)
                    .ok_or(Error::UnknownLabel(name))?,
            };
            Ok(Node {
                id: r.id,
                features: r.features,
                label_id,
                project_id: r.project,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let edges = file.edges.into_iter().map(|[a, b]| (a, b)).collect();
    Dataset::new(file.projects, vocabulary, nodes, edges)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub fold_index: usize,
    pub test_project: usize,
    pub train_node_ids: Vec<usize>,
    pub test_node_ids: Vec<usize>,
}

/// One fold per project: fold `k` tests on project `k` and trains on the rest.
pub fn make_folds(ds: &Dataset) -> Result<Vec<FoldSpec>> {
    if ds.projects.len() < 2 {
        return Err(Error::TooFewProjects(ds.projects.len()));
    }
    Ok((0..ds.projects.len())
        .map(|k| {
            let (test, train): (Vec<&Node>, Vec<&Node>) =
                ds.nodes.iter().partition(|n| n.project_id == k);
            FoldSpec {
                fold_index: k,
                test_project: k,
                train_node_ids: train.iter().map(|n| n.id).collect(),
                test_node_ids: test.iter().map(|n| n.id).collect(),
            }
        })
        .collect())
}
