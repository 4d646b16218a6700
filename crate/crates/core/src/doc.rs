//! Core document model: one raw text unit with user and time metadata.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Which of the two corpora a document belongs to.
///
/// `A` is the large discussion corpus, `B` the report corpus. All
/// differential-prevalence semantics downstream (class names, regression
/// orientation) are expressed in terms of these two tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusTag {
    A,
    B,
}

impl CorpusTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CorpusTag::A => "a",
            CorpusTag::B => "b",
        }
    }
}

impl std::str::FromStr for CorpusTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(CorpusTag::A),
            "b" => Ok(CorpusTag::B),
            other => Err(format!("unknown corpus tag `{other}` (expected `a` or `b`)")),
        }
    }
}

/// One raw text unit with user and time metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub user_id: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    pub corpus_tag: CorpusTag,
}

/// Aggregate counts over one corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_docs: u64,
    pub n_users: u64,
    pub t_min: Option<DateTime<Utc>>,
    pub t_max: Option<DateTime<Utc>>,
    /// Histogram of documents-per-user: key = docs authored, value = number
    /// of users with that count.
    pub docs_per_user: BTreeMap<u64, u64>,
}

impl CorpusStats {
    pub fn empty() -> Self {
        CorpusStats {
            n_docs: 0,
            n_users: 0,
            t_min: None,
            t_max: None,
            docs_per_user: BTreeMap::new(),
        }
    }
}
