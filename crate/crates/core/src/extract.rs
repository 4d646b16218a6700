//! Condition mention extraction.
//!
//! Two interchangeable sources produce [`MentionRecord`]s: a built-in
//! dictionary tagger (longest-match, left-to-right, non-overlapping over
//! normalized tokens) and a loader for externally produced annotation files,
//! for setups where an upstream tagger has already been run over the corpus.
//!
//! All offsets are character offsets into the original document text.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::doc::Document;
use crate::error::{CoreError, Result};

/// One extracted condition occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionRecord {
    pub doc_id: String,
    pub condition: String,
    pub start: usize,
    pub end: usize,
}

/// A token from [`normalize`], with char offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Lowercase and split on anything that is not alphanumeric. Offsets index
/// characters of the original string, so slicing the source by them
/// recovers the surface form.
pub fn normalize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0usize;
    for (i, ch) in text.chars().enumerate() {
        if ch.is_alphanumeric() {
            if current.is_empty() {
                start = i;
            }
            for lc in ch.to_lowercase() {
                current.push(lc);
            }
        } else if !current.is_empty() {
            tokens.push(Token { text: std::mem::take(&mut current), start, end: i });
        }
    }
    if !current.is_empty() {
        let end = text.chars().count();
        tokens.push(Token { text: current, start, end });
    }
    tokens
}

/// Normalize a phrase to its canonical form: tokens joined by single spaces.
pub fn canonical_phrase(text: &str) -> String {
    normalize(text)
        .into_iter()
        .map(|t| t.text)
        .collect::<Vec<_>>()
        .join(" ")
}

/// A set of canonical condition phrases, 1 to 6 tokens each.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashSet<String>,
    /// first token -> longest phrase (in tokens) starting with it
    max_len_by_first: HashMap<String, usize>,
}

pub const MAX_PHRASE_TOKENS: usize = 6;

impl Lexicon {
    /// Build from raw phrases; each is normalized, empty and duplicate
    /// entries are dropped, and phrases longer than six tokens are rejected.
    pub fn from_phrases<I, S>(phrases: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut entries = HashSet::new();
        let mut max_len_by_first: HashMap<String, usize> = HashMap::new();
        for phrase in phrases {
            let tokens = normalize(phrase.as_ref());
            if tokens.is_empty() {
                continue;
            }
            if tokens.len() > MAX_PHRASE_TOKENS {
                return Err(CoreError::Config(format!(
                    "lexicon phrase {:?} has {} tokens (max {MAX_PHRASE_TOKENS})",
                    phrase.as_ref(),
                    tokens.len()
                )));
            }
            let first = tokens[0].text.clone();
            let canon = tokens.into_iter().map(|t| t.text).collect::<Vec<_>>();
            let len = canon.len();
            let entry = max_len_by_first.entry(first).or_insert(0);
            *entry = (*entry).max(len);
            entries.insert(canon.join(" "));
        }
        if entries.is_empty() {
            return Err(CoreError::Config("lexicon has no usable entries".into()));
        }
        Ok(Lexicon { entries, max_len_by_first })
    }

    /// Load from a plain-text file: one phrase per line, `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| {
            CoreError::Config(format!("cannot open lexicon {}: {e}", path.display()))
        })?;
        let mut phrases = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line?;
            let line = match line.find('#') {
                Some(i) => &line[..i],
                None => &line[..],
            };
            let line = line.trim();
            if !line.is_empty() {
                phrases.push(line.to_string());
            }
        }
        Self::from_phrases(phrases)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, canonical: &str) -> bool {
        self.entries.contains(canonical)
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|s| s.as_str())
    }
}

/// Longest-match, left-to-right, non-overlapping dictionary tagging.
/// Returned mentions carry original-text char offsets and never overlap.
pub fn extract_dictionary(doc: &Document, lexicon: &Lexicon) -> Vec<MentionRecord> {
    let tokens = normalize(&doc.text);
    let mut mentions = Vec::new();
    let mut i = 0;
    let mut phrase = String::new();
    while i < tokens.len() {
        let cap = match lexicon.max_len_by_first.get(&tokens[i].text) {
            Some(&m) => m.min(tokens.len() - i),
            None => {
                i += 1;
                continue;
            }
        };
        let mut matched = 0;
        for len in (1..=cap).rev() {
            phrase.clear();
            for t in &tokens[i..i + len] {
                if !phrase.is_empty() {
                    phrase.push(' ');
                }
                phrase.push_str(&t.text);
            }
            if lexicon.contains(&phrase) {
                mentions.push(MentionRecord {
                    doc_id: doc.doc_id.clone(),
                    condition: phrase.clone(),
                    start: tokens[i].start,
                    end: tokens[i + len - 1].end,
                });
                matched = len;
                break;
            }
        }
        i += if matched > 0 { matched } else { 1 };
    }
    mentions
}

/// A pluggable mention source: dictionary tagger or pre-computed annotations.
pub trait Extractor {
    fn mentions_for(&self, doc: &Document) -> Vec<MentionRecord>;
}

impl Extractor for Lexicon {
    fn mentions_for(&self, doc: &Document) -> Vec<MentionRecord> {
        extract_dictionary(doc, self)
    }
}

/// Mentions loaded from an external annotation file, keyed by document.
#[derive(Debug, Default)]
pub struct ExternalAnnotations {
    by_doc: HashMap<String, Vec<MentionRecord>>,
    pub n_records: u64,
    pub unknown_docs: u64,
    pub bad_offsets: u64,
    pub malformed: u64,
}

impl Extractor for ExternalAnnotations {
    fn mentions_for(&self, doc: &Document) -> Vec<MentionRecord> {
        self.by_doc.get(&doc.doc_id).cloned().unwrap_or_default()
    }
}

#[derive(Deserialize)]
struct RawAnnotation {
    doc_id: String,
    condition: String,
    start: usize,
    end: usize,
}

/// Load a JSONL annotation file (keys `doc_id`, `condition`, `start`, `end`)
/// and validate it against the corpus. `doc_lengths` maps each known doc_id
/// to its text length in characters.
///
/// Records for unknown documents and records with out-of-range offsets are
/// skipped and counted. If more than 10% of records reference unknown
/// documents the load fails: that signals a corpus/annotation mismatch.
/// Condition strings are canonicalized the same way the dictionary tagger
/// canonicalizes matches, so surface variants like "corona virus" and
/// "coronavirus" stay distinct while case and punctuation differences merge.
pub fn load_external_annotations(
    path: &Path,
    doc_lengths: &HashMap<String, usize>,
) -> Result<ExternalAnnotations> {
    let file = File::open(path).map_err(|e| {
        CoreError::Data(format!("cannot open annotations {}: {e}", path.display()))
    })?;
    let mut out = ExternalAnnotations::default();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.n_records += 1;
        let raw: RawAnnotation = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(_) => {
                out.malformed += 1;
                continue;
            }
        };
        let len = match doc_lengths.get(&raw.doc_id) {
            Some(&len) => len,
            None => {
                out.unknown_docs += 1;
                continue;
            }
        };
        if raw.start >= raw.end || raw.end > len {
            out.bad_offsets += 1;
            continue;
        }
        let condition = canonical_phrase(&raw.condition);
        if condition.is_empty() {
            out.malformed += 1;
            continue;
        }
        out.by_doc
            .entry(raw.doc_id.clone())
            .or_default()
            .push(MentionRecord {
                doc_id: raw.doc_id,
                condition,
                start: raw.start,
                end: raw.end,
            });
    }
    if out.n_records > 0 && out.unknown_docs * 10 > out.n_records {
        return Err(CoreError::Data(format!(
            "{} of {} annotation records reference unknown doc_ids (>10%): \
             annotations likely belong to a different corpus",
            out.unknown_docs, out.n_records
        )));
    }
    Ok(out)
}

/// Collapse mentions into per-document condition sets. Duplicate mentions of
/// a condition within one document count once; mention order is irrelevant.
pub fn conditions_per_document<'a, I>(mentions: I) -> BTreeMap<String, BTreeSet<String>>
where
    I: IntoIterator<Item = &'a MentionRecord>,
{
    let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for m in mentions {
        map.entry(m.doc_id.clone())
            .or_default()
            .insert(m.condition.clone());
    }
    map
}

/// Slice a string by char offsets (mention offsets are char-based).
pub fn slice_chars(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}
