use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Name of an image category (e.g. `existence`, `ocr`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryId(String);

impl CategoryId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CategoryId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// Name of a category group (e.g. `visual_intensive`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(String);

impl GroupId {
    pub const VISUAL_INTENSIVE: &'static str = "visual_intensive";
    pub const TEXTUAL_INTENSIVE: &'static str = "textual_intensive";

    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn visual_intensive() -> Self {
        Self::new(Self::VISUAL_INTENSIVE)
    }

    pub fn textual_intensive() -> Self {
        Self::new(Self::TEXTUAL_INTENSIVE)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryEntry {
    pub name: CategoryId,
    pub group: GroupId,
}

/// The ordered category → group map used by a run.
///
/// Order matters: score tables list categories in this order and group means
/// follow the order in which groups first appear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CategoryEntry>", into = "Vec<CategoryEntry>")]
pub struct CategorySet {
    entries: Vec<CategoryEntry>,
}

const MME_VISUAL: [&str; 10] = [
    "existence",
    "count",
    "position",
    "color",
    "poster",
    "celebrity",
    "scene",
    "landmark",
    "artwork",
    "commonsense",
];

const MME_TEXTUAL: [&str; 4] = [
    "code_reasoning",
    "numerical_calculation",
    "text_translation",
    "ocr",
];

impl CategorySet {
    pub fn new(entries: Vec<CategoryEntry>) -> Result<Self, ModelError> {
        if entries.is_empty() {
            return Err(ModelError::EmptyCategorySet);
        }
        for (i, e) in entries.iter().enumerate() {
            if e.name.as_str().is_empty() {
                return Err(ModelError::InvalidCategory("empty category name".into()));
            }
            if entries[..i].iter().any(|p| p.name == e.name) {
                return Err(ModelError::InvalidCategory(format!(
                    "duplicate category `{}`",
                    e.name
                )));
            }
        }
        Ok(Self { entries })
    }

    /// The 14 MME categories: 10 visual-intensive followed by 4 textual-intensive.
    pub fn mme() -> Self {
        let visual = MME_VISUAL.iter().map(|n| CategoryEntry {
            name: CategoryId::new(*n),
            group: GroupId::visual_intensive(),
        });
        let textual = MME_TEXTUAL.iter().map(|n| CategoryEntry {
            name: CategoryId::new(*n),
            group: GroupId::textual_intensive(),
        });
        Self {
            entries: visual.chain(textual).collect(),
        }
    }

    pub fn entries(&self) -> &[CategoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn categories(&self) -> impl Iterator<Item = &CategoryId> {
        self.entries.iter().map(|e| &e.name)
    }

    pub fn contains(&self, category: &CategoryId) -> bool {
        self.index_of(category).is_some()
    }

    pub fn index_of(&self, category: &CategoryId) -> Option<usize> {
        self.entries.iter().position(|e| &e.name == category)
    }

    pub fn group_of(&self, category: &CategoryId) -> Option<&GroupId> {
        self.entries
            .iter()
            .find(|e| &e.name == category)
            .map(|e| &e.group)
    }

    /// Distinct groups in first-appearance order.
    pub fn groups(&self) -> Vec<GroupId> {
        let mut out: Vec<GroupId> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.group) {
                out.push(e.group.clone());
            }
        }
        out
    }

    pub fn members(&self, group: &GroupId) -> impl Iterator<Item = &CategoryId> {
        let group = group.clone();
        self.entries
            .iter()
            .filter(move |e| e.group == group)
            .map(|e| &e.name)
    }
}

impl Default for CategorySet {
    fn default() -> Self {
        Self::mme()
    }
}

impl TryFrom<Vec<CategoryEntry>> for CategorySet {
    type Error = ModelError;

    fn try_from(entries: Vec<CategoryEntry>) -> Result<Self, Self::Error> {
        Self::new(entries)
    }
}

impl From<CategorySet> for Vec<CategoryEntry> {
    fn from(set: CategorySet) -> Self {
        set.entries
    }
}
