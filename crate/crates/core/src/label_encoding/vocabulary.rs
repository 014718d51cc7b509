use std::collections::HashMap;

use crate::error::{Error, Result};

/// Ordered set of class names, optionally grouped into generic families
/// (e.g. "Roof parapet" belongs to the "Wall" family).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVocabulary {
    labels: Vec<String>,
    generic_group: Option<Vec<usize>>,
    index: HashMap<String, usize>,
}

impl LabelVocabulary {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self {
            labels,
            generic_group: None,
            index,
        })
    }

    /// Attaches a generic-family index to every label. Group indices must be
    /// dense: every value in `0..max+1` is used by at least one label.
    pub fn with_groups(labels: Vec<String>, groups: Vec<usize>) -> Result<Self> {
        let mut vocab = Self::new(labels)?;
        if groups.len() != vocab.labels.len() {
            return Err(Error::InvalidGrouping(format!(
                "{} group indices for {} labels",
                groups.len(),
                vocab.labels.len()
            )));
        }
        let n_groups = groups.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; n_groups];
        for &g in &groups {
            used[g] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(Error::InvalidGrouping(format!(
                "group index {missing} is unused (indices must be dense)"
            )));
        }
        vocab.generic_group = Some(groups);
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: usize) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn groups(&self) -> Option<&[usize]> {
        self.generic_group.as_deref()
    }

    pub fn group_count(&self) -> usize {
        self.generic_group
            .as_ref()
            .and_then(|g| g.iter().max())
            .map_or(0, |m| m + 1)
    }

    /// The 42 building-object subtypes used for the subtype classification
    /// task, grouped into six generic families
    /// (Wall, Column, Beam, Stair, Slab, Foundation).
    pub fn bim_subtypes() -> Self {
        let labels = BIM_SUBTYPES.iter().map(|(name, _)| name.to_string()).collect();
        let groups = BIM_SUBTYPES.iter().map(|(_, g)| *g).collect();
        Self::with_groups(labels, groups).expect("builtin vocabulary is valid")
    }
}

pub const BIM_GENERIC_TYPES: [&str; 6] = ["Wall", "Column", "Beam", "Stair", "Slab", "Foundation"];

const BIM_SUBTYPES: [(&str, usize); 42] = [
    ("Core wall", 0),
    ("Horizontal wall", 0),
    ("Vertical wall", 0),
    ("Perimeter wall", 0),
    ("Side wall", 0),
    ("Entrance retaining wall", 0),
    ("Loadbearing retaining wall", 0),
    ("Miscellaneous wall", 0),
    ("Unit partition wall", 0),
    ("Non-loadbearing wall", 0),
    ("Auxiliary space wall", 0),
    ("Roof ornamental wall", 0),
    ("Roof parapet", 0),
    ("Penthouse parapet", 0),
    ("Ramp parapet", 0),
    ("Balcony parapet wall", 0),
    ("Miscellaneous parapet", 0),
    ("Transfer column", 1),
    ("Core beam", 2),
    ("Transfer beam", 2),
    ("Miscellaneous beam", 2),
    ("Wall girder", 2),
    ("Interior lintel", 2),
    ("Non-loadbearing lintel", 2),
    ("Entrance stairs", 3),
    ("Interior stairs", 3),
    ("Core slab", 4),
    ("Entrance slab", 4),
    ("Entrance ramp slab", 4),
    ("Piloti slab", 4),
    ("Basement utility pit slab", 4),
    ("Interior slab", 4),
    ("Bathroom slab", 4),
    ("Miscellaneous slab", 4),
    ("Auxiliary space slab", 4),
    ("Penthouse interior slab", 4),
    ("Penthouse core slab", 4),
    ("Roof ornamental slab", 4),
    ("Canopy slab", 4),
    ("Entrance strip foundation", 5),
    ("Mat foundation", 5),
    ("Haunch", 5),
];
