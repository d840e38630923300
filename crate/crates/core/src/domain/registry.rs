//! The PDTB 3.0 relation-sense inventory used for adjacent-sentence relations.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    Explicit,
    Implicit,
}

impl RelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::Explicit => "explicit",
            RelationKind::Implicit => "implicit",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "explicit" => Ok(RelationKind::Explicit),
            "implicit" => Ok(RelationKind::Implicit),
            other => Err(Error::structural(format!("unknown relation kind {other:?}"))),
        }
    }
}

/// A registry-validated relation sense. The name always carries the
/// registry spelling (e.g. `Level-of-detail`, `NoRel`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationSense {
    kind: RelationKind,
    name: &'static str,
}

impl RelationSense {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn kind(&self) -> RelationKind {
        self.kind
    }

    /// Lowercased presentation form, e.g. `level-of-detail`.
    pub fn render(&self) -> String {
        self.name.to_ascii_lowercase()
    }
}

#[derive(Serialize, Deserialize)]
struct SenseRepr {
    name: String,
    kind: RelationKind,
}

impl Serialize for RelationSense {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SenseRepr {
            name: self.name.to_string(),
            kind: self.kind,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RelationSense {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = SenseRepr::deserialize(deserializer)?;
        load_registry()
            .lookup(&repr.name, repr.kind)
            .map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for RelationSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind, self.name)
    }
}

const EXPLICIT: [(&str, f64); 15] = [
    ("Asynchronous", 0.0869),
    ("Cause", 0.0787),
    ("Concession", 0.1994),
    ("Condition", 0.0599),
    ("Conjunction", 0.3655),
    ("Contrast", 0.0458),
    ("Disjunction", 0.0123),
    ("Instantiation", 0.0130),
    ("Level-of-detail", 0.0101),
    ("Manner", 0.0123),
    ("Negative-condition", 0.0054),
    ("Purpose", 0.0163),
    ("Similarity", 0.0042),
    ("Substitution", 0.0096),
    ("Synchronous", 0.0807),
];

const IMPLICIT: [(&str, f64); 15] = [
    ("Asynchronous", 0.0464),
    ("Cause", 0.2423),
    ("Cause+Belief", 0.0082),
    ("Concession", 0.0672),
    ("Condition", 0.0085),
    ("Conjunction", 0.2084),
    ("Contrast", 0.0386),
    ("Equivalence", 0.0121),
    ("Instantiation", 0.0684),
    ("Level-of-detail", 0.1460),
    ("Manner", 0.0074),
    ("Purpose", 0.0331),
    ("Substitution", 0.0134),
    ("Synchronous", 0.0235),
    ("NoRel", 0.0818),
];

/// Ordered explicit and implicit sense sets with their training-corpus
/// distribution. Priors are descriptive metadata; the model never reads them.
#[derive(Debug)]
pub struct RelationSenseRegistry {
    explicit: Vec<(RelationSense, f64)>,
    implicit: Vec<(RelationSense, f64)>,
}

impl RelationSenseRegistry {
    fn build() -> Self {
        let make = |kind, table: &[(&'static str, f64)]| {
            table
                .iter()
                .map(|&(name, prior)| (RelationSense { kind, name }, prior))
                .collect()
        };
        Self {
            explicit: make(RelationKind::Explicit, &EXPLICIT),
            implicit: make(RelationKind::Implicit, &IMPLICIT),
        }
    }

    fn table(&self, kind: RelationKind) -> &[(RelationSense, f64)] {
        match kind {
            RelationKind::Explicit => &self.explicit,
            RelationKind::Implicit => &self.implicit,
        }
    }

    pub fn senses(&self, kind: RelationKind) -> impl Iterator<Item = &RelationSense> {
        self.table(kind).iter().map(|(s, _)| s)
    }

    /// Explicit senses followed by implicit senses.
    pub fn all(&self) -> impl Iterator<Item = &RelationSense> {
        self.explicit.iter().chain(self.implicit.iter()).map(|(s, _)| s)
    }

    pub fn len(&self) -> usize {
        self.explicit.len() + self.implicit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Case-insensitive lookup returning the registry spelling.
    pub fn lookup(&self, name: &str, kind: RelationKind) -> Result<RelationSense> {
        self.table(kind)
            .iter()
            .find(|(s, _)| s.name.eq_ignore_ascii_case(name.trim()))
            .map(|(s, _)| s.clone())
            .ok_or_else(|| Error::UnknownSense {
                name: name.to_string(),
                kind,
                valid: self.senses(kind).map(|s| s.name.to_string()).collect(),
            })
    }

    /// Dense index in `0..len()`: explicit senses first.
    pub fn index_of(&self, sense: &RelationSense) -> usize {
        let pos = |table: &[(RelationSense, f64)]| {
            table
                .iter()
                .position(|(s, _)| s == sense)
                .expect("RelationSense values only come from the registry")
        };
        match sense.kind {
            RelationKind::Explicit => pos(&self.explicit),
            RelationKind::Implicit => self.explicit.len() + pos(&self.implicit),
        }
    }

    pub fn prior(&self, sense: &RelationSense) -> f64 {
        self.table(sense.kind)
            .iter()
            .find(|(s, _)| s == sense)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    pub fn priors(&self, kind: RelationKind) -> impl Iterator<Item = (&RelationSense, f64)> {
        self.table(kind).iter().map(|(s, p)| (s, *p))
    }
}

/// The process-wide registry (embedded constant data).
pub fn load_registry() -> &'static RelationSenseRegistry {
    static REGISTRY: OnceLock<RelationSenseRegistry> = OnceLock::new();
    REGISTRY.get_or_init(RelationSenseRegistry::build)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_norel() {
        let reg = load_registry();
        assert_eq!(reg.senses(RelationKind::Explicit).count(), 15);
        assert_eq!(reg.senses(RelationKind::Implicit).count(), 15);
        assert!(reg.lookup("NoRel", RelationKind::Implicit).is_ok());
        assert!(reg.lookup("NoRel", RelationKind::Explicit).is_err());
    }

    #[test]
    fn conjunction_prior() {
        let reg = load_registry();
        let conj = reg.lookup("Conjunction", RelationKind::Explicit).unwrap();
        assert_eq!(reg.prior(&conj), 0.3655);
    }

    #[test]
    fn prior_sums_within_rounding() {
        let reg = load_registry();
        for kind in [RelationKind::Explicit, RelationKind::Implicit] {
            let sum: f64 = reg.priors(kind).map(|(_, p)| p).sum();
            assert!((0.99..=1.01).contains(&sum), "{kind}: {sum}");
            assert!(reg.priors(kind).all(|(_, p)| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn lookup_is_case_normalized() {
        let reg = load_registry();
        let s = reg.lookup("level-OF-detail", RelationKind::Implicit).unwrap();
        assert_eq!(s.name(), "Level-of-detail");
        assert_eq!(s.render(), "level-of-detail");
        for sense in reg.all() {
            let again = reg.lookup(&sense.name().to_uppercase(), sense.kind()).unwrap();
            assert_eq!(&again, sense);
        }
    }

    #[test]
    fn unknown_sense_lists_valid_names() {
        let err = load_registry().lookup("Foo", RelationKind::Explicit).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Foo") && msg.contains("Conjunction"), "{msg}");
    }

    #[test]
    fn names_unique_and_indices_dense() {
        let reg = load_registry();
        let idx: Vec<usize> = reg.all().map(|s| reg.index_of(s)).collect();
        assert_eq!(idx, (0..30).collect::<Vec<_>>());
        for kind in [RelationKind::Explicit, RelationKind::Implicit] {
            let mut names: Vec<_> = reg.senses(kind).map(|s| s.name()).collect();
            names.sort();
            names.dedup();
            assert_eq!(names.len(), 15);
        }
    }
}
