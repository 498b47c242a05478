use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CategoryId, CategorySet, SampleId, SeedSample};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyId { image_ref: String },
    DuplicateId { id: SampleId, occurrences: usize },
    UnknownCategory { id: SampleId, category: CategoryId },
    UnreadableImage { id: SampleId, image_ref: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId { image_ref } => write!(f, "sample with empty id ({image_ref})"),
            Violation::DuplicateId { id, occurrences } => {
                write!(f, "duplicate id `{id}` ({occurrences} occurrences)")
            }
            Violation::UnknownCategory { id, category } => {
                write!(f, "sample `{id}` has unknown category `{category}`")
            }
            Violation::UnreadableImage { id, image_ref } => {
                write!(f, "sample `{id}` image is unreadable: {image_ref}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Set when the dataset has no samples at all.
    pub empty: bool,
    pub samples: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Collects every dataset problem instead of stopping at the first one.
///
/// `readable` decides whether a sample's image can be loaded; callers pass a
/// filesystem check, tests can pass a closure.
pub fn validate_dataset(
    dataset: &[SeedSample],
    categories: &CategorySet,
    readable: impl Fn(&SeedSample) -> bool,
) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen: BTreeMap<&SampleId, usize> = BTreeMap::new();
    for s in dataset {
        if s.id.as_str().is_empty() {
            violations.push(Violation::EmptyId {
                image_ref: s.image_ref.clone(),
            });
        } else {
            *seen.entry(&s.id).or_default() += 1;
        }
        if !categories.contains(&s.category) {
            violations.push(Violation::UnknownCategory {
                id: s.id.clone(),
                category: s.category.clone(),
            });
        }
        if !readable(s) {
            violations.push(Violation::UnreadableImage {
                id: s.id.clone(),
                image_ref: s.image_ref.clone(),
            });
        }
    }
    for (id, occurrences) in seen {
        if occurrences > 1 {
            violations.push(Violation::DuplicateId {
                id: id.clone(),
                occurrences,
            });
        }
    }
    ValidationReport {
        violations,
        empty: dataset.is_empty(),
        samples: dataset.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, cat: &str) -> SeedSample {
        SeedSample {
            id: id.into(),
            category: cat.into(),
            image_ref: format!("{id}.png"),
        }
    }

    #[test]
    fn duplicate_id_reported_once() {
        let ds = vec![sample("a", "count"), sample("a", "count"), sample("b", "ocr")];
        let r = validate_dataset(&ds, &CategorySet::mme(), |_| true);
        assert_eq!(
            r.violations,
            vec![Violation::DuplicateId {
                id: "a".into(),
                occurrences: 2
            }]
        );
    }

    #[test]
    fn empty_dataset_is_valid_but_flagged() {
        let r = validate_dataset(&[], &CategorySet::mme(), |_| true);
        assert!(r.is_valid());
        assert!(r.empty);
    }

    #[test]
    fn unknown_category_reported() {
        let ds = vec![sample("w1", "weather")];
        let r = validate_dataset(&ds, &CategorySet::mme(), |_| true);
        assert_eq!(
            r.violations,
            vec![Violation::UnknownCategory {
                id: "w1".into(),
                category: "weather".into()
            }]
        );
    }

    #[test]
    fn unreadable_image_reported() {
        let ds = vec![sample("a", "count"), sample("b", "count")];
        let r = validate_dataset(&ds, &CategorySet::mme(), |s| s.id.as_str() != "b");
        assert_eq!(r.violations.len(), 1);
        assert!(matches!(&r.violations[0], Violation::UnreadableImage { id, .. } if id.as_str() == "b"));
    }
}
