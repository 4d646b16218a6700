//! Corpus loading, validation, and hygiene filtering.
//!
//! Input formats: JSONL (one object per line, keys `id`, `user`, `ts`,
//! `text`) and CSV (header row with the same column names). Malformed
//! records are skipped and counted rather than aborting the load; skipped
//! records can be mirrored to a `.rejects.jsonl` sidecar for inspection.
//! A load where more than half of all records are malformed fails, since
//! that points at a format mismatch rather than noise.
//!
//! All hygiene filters are pure with respect to documents: they only ever
//! drop documents, never invent or mutate them, and applying any filter
//! twice equals applying it once.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::doc::{CorpusStats, CorpusTag, Document};
use crate::error::{CoreError, Result};

/// Schema marker written as the first line of document JSONL intermediates.
pub const DOCS_SCHEMA: &str = "prevnet.docs.v1";

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaMarker {
    schema: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for InputFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(InputFormat::Jsonl),
            "csv" => Ok(InputFormat::Csv),
            other => Err(format!("unknown input format `{other}` (expected jsonl or csv)")),
        }
    }
}

/// Guess the format from the file extension; defaults to JSONL.
pub fn format_for_path(path: &Path) -> InputFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => InputFormat::Csv,
        _ => InputFormat::Jsonl,
    }
}

#[derive(Debug, Serialize)]
struct RejectRecord<'a> {
    line: u64,
    reason: &'a str,
    raw: &'a str,
}

/// Sink for skipped-record diagnostics (one JSON object per reject).
pub struct RejectSink {
    out: BufWriter<File>,
    pub path: PathBuf,
}

impl RejectSink {
    /// Create the conventional sidecar next to `input`: `<input>.rejects.jsonl`.
    pub fn sidecar_for(input: &Path) -> Result<Self> {
        let mut name = input.as_os_str().to_owned();
        name.push(".rejects.jsonl");
        Self::at(&PathBuf::from(name))
    }

    /// Create a reject sink at an explicit path.
    pub fn at(path: &Path) -> Result<Self> {
        let out = BufWriter::new(File::create(path)?);
        Ok(RejectSink { out, path: path.to_path_buf() })
    }

    fn write(&mut self, line: u64, reason: &str, raw: &str) -> Result<()> {
        serde_json::to_writer(&mut self.out, &RejectRecord { line, reason, raw })?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

fn parse_fields(
    tag: CorpusTag,
    id: &str,
    user: &str,
    ts: &str,
    text: &str,
) -> std::result::Result<Document, String> {
    if id.is_empty() {
        return Err("empty `id`".into());
    }
    if user.is_empty() {
        return Err("empty `user`".into());
    }
    if text.trim().is_empty() {
        return Err("empty `text`".into());
    }
    let timestamp = DateTime::parse_from_rfc3339(ts)
        .map_err(|e| format!("bad `ts` {ts:?}: {e}"))?
        .with_timezone(&Utc);
    Ok(Document {
        doc_id: id.to_string(),
        user_id: user.to_string(),
        timestamp,
        text: text.to_string(),
        corpus_tag: tag,
    })
}

enum Decoder {
    Jsonl(std::io::Lines<BufReader<File>>),
    Csv {
        rdr: csv::Reader<File>,
        // column indexes of id, user, ts, text
        cols: [usize; 4],
        record: csv::StringRecord,
    },
}

/// Streaming document loader.
///
/// Iterates `Result<Document>`: malformed records are skipped (counted, and
/// mirrored to the reject sink when one is attached); the only mid-stream
/// errors are I/O failures. After the final record, if skipped records
/// outnumber valid ones the stream yields one terminal `Data` error.
pub struct DocumentStream {
    decoder: Decoder,
    tag: CorpusTag,
    line_no: u64,
    n_ok: u64,
    n_skipped: u64,
    rejects: Option<RejectSink>,
    finished: bool,
}

impl DocumentStream {
    pub fn open(path: &Path, format: InputFormat, tag: CorpusTag) -> Result<Self> {
        let file = File::open(path).map_err(|e| {
            CoreError::Data(format!("cannot open corpus file {}: {e}", path.display()))
        })?;
        let decoder = match format {
            InputFormat::Jsonl => Decoder::Jsonl(BufReader::new(file).lines()),
            InputFormat::Csv => {
                let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(file);
                let headers = rdr.headers()?.clone();
                let find = |name: &str| {
                    headers.iter().position(|h| h == name).ok_or_else(|| {
                        CoreError::Data(format!(
                            "csv {} is missing required column `{name}` (have: {})",
                            path.display(),
                            headers.iter().collect::<Vec<_>>().join(", ")
                        ))
                    })
                };
                let cols = [find("id")?, find("user")?, find("ts")?, find("text")?];
                Decoder::Csv { rdr, cols, record: csv::StringRecord::new() }
            }
        };
        Ok(DocumentStream {
            decoder,
            tag,
            line_no: 0,
            n_ok: 0,
            n_skipped: 0,
            rejects: None,
            finished: false,
        })
    }

    /// Attach a reject sidecar; every skipped record is mirrored to it.
    pub fn with_rejects(mut self, sink: RejectSink) -> Self {
        self.rejects = Some(sink);
        self
    }

    pub fn loaded(&self) -> u64 {
        self.n_ok
    }

    pub fn skipped(&self) -> u64 {
        self.n_skipped
    }

    pub fn take_rejects(&mut self) -> Option<RejectSink> {
        self.rejects.take()
    }

    fn reject(&mut self, reason: &str, raw: &str) {
        self.n_skipped += 1;
        if let Some(sink) = self.rejects.as_mut() {
            // Sidecar write failures must not mask the load itself.
            let _ = sink.write(self.line_no, reason, raw);
        }
    }

    fn finalize(&mut self) -> Option<Result<Document>> {
        self.finished = true;
        if let Some(sink) = self.rejects.take() {
            let _ = sink.finish();
        }
        let total = self.n_ok + self.n_skipped;
        if total > 0 && self.n_skipped * 2 > total {
            return Some(Err(CoreError::Data(format!(
                "{} of {} records malformed (>50%): input format likely wrong",
                self.n_skipped, total
            ))));
        }
        None
    }
}

impl Iterator for DocumentStream {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        loop {
            match &mut self.decoder {
                Decoder::Jsonl(lines) => match lines.next() {
                    None => return self.finalize(),
                    Some(Err(e)) => {
                        self.finished = true;
                        return Some(Err(e.into()));
                    }
                    Some(Ok(line)) => {
                        self.line_no += 1;
                        if line.trim().is_empty() {
                            continue;
                        }
                        // A bare {"schema": ...} first line marks a stage
                        // intermediate; validate and skip it.
                        if self.line_no == 1 {
                            if let Ok(marker) = serde_json::from_str::<SchemaMarker>(&line) {
                                if marker.schema != DOCS_SCHEMA {
                                    self.finished = true;
                                    return Some(Err(CoreError::Data(format!(
                                        "schema mismatch: expected {DOCS_SCHEMA}, found {}",
                                        marker.schema
                                    ))));
                                }
                                continue;
                            }
                        }
                        #[derive(serde::Deserialize)]
                        struct Raw {
                            id: String,
                            user: String,
                            ts: String,
                            text: String,
                        }
                        let parsed: std::result::Result<Document, String> =
                            match serde_json::from_str::<Raw>(&line) {
                                Ok(raw) => {
                                    parse_fields(self.tag, &raw.id, &raw.user, &raw.ts, &raw.text)
                                }
                                Err(e) => Err(format!("bad json: {e}")),
                            };
                        match parsed {
                            Ok(doc) => {
                                self.n_ok += 1;
                                return Some(Ok(doc));
                            }
                            Err(reason) => {
                                self.reject(&reason, &line);
                                continue;
                            }
                        }
                    }
                },
                Decoder::Csv { rdr, cols, record } => {
                    match rdr.read_record(record) {
                        Ok(false) => return self.finalize(),
                        Err(e) => {
                            self.line_no += 1;
                            let msg = e.to_string();
                            self.reject(&format!("bad csv: {msg}"), "");
                            continue;
                        }
                        Ok(true) => {
                            self.line_no += 1;
                            let field = |i: usize| record.get(cols[i]).unwrap_or("");
                            let parsed =
                                parse_fields(self.tag, field(0), field(1), field(2), field(3));
                            match parsed {
                                Ok(doc) => {
                                    self.n_ok += 1;
                                    return Some(Ok(doc));
                                }
                                Err(reason) => {
                                    let raw = record.iter().collect::<Vec<_>>().join(",");
                                    self.reject(&reason, &raw);
                                    continue;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Load a whole corpus into memory, reporting `(documents, skipped)`.
pub fn load_documents(path: &Path, format: InputFormat, tag: CorpusTag) -> Result<(Vec<Document>, u64)> {
    let mut stream = DocumentStream::open(path, format, tag)?;
    let mut docs = Vec::new();
    for item in &mut stream {
        docs.push(item?);
    }
    Ok((docs, stream.skipped()))
}

/// Keep documents with `start <= timestamp <= end` (inclusive bounds),
/// preserving order.
pub fn filter_time_window(
    docs: Vec<Document>,
    start: DateTime<Utc>,
    end: DateTime<Utc>,
) -> Result<Vec<Document>> {
    if start > end {
        return Err(CoreError::Config(format!(
            "time window start {start} is after end {end}"
        )));
    }
    Ok(docs
        .into_iter()
        .filter(|d| d.timestamp >= start && d.timestamp <= end)
        .collect())
}

/// Keep only the earliest document per user, ties broken by `doc_id`.
///
/// The input is sorted by `(timestamp, doc_id)` first, so the result is
/// ordered the same way regardless of input order.
pub fn dedup_first_per_user(mut docs: Vec<Document>) -> Vec<Document> {
    docs.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    let mut seen = std::collections::HashSet::new();
    docs.retain(|d| seen.insert(d.user_id.clone()));
    docs
}

/// Drop every document of any user whose document count exceeds the cap.
/// Order of surviving documents is preserved.
pub fn filter_bots(docs: Vec<Document>, max_docs_per_user: u64) -> Result<Vec<Document>> {
    if max_docs_per_user < 1 {
        return Err(CoreError::Config(
            "bot cap must be at least 1 document per user".into(),
        ));
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for d in &docs {
        *counts.entry(d.user_id.as_str()).or_insert(0) += 1;
    }
    let banned: std::collections::HashSet<String> = counts
        .into_iter()
        .filter(|(_, n)| *n > max_docs_per_user)
        .map(|(u, _)| u.to_string())
        .collect();
    Ok(docs
        .into_iter()
        .filter(|d| !banned.contains(&d.user_id))
        .collect())
}

/// Exact corpus-level counts. Deterministic for any input order.
pub fn corpus_stats(docs: &[Document]) -> CorpusStats {
    let mut per_user: BTreeMap<&str, u64> = BTreeMap::new();
    let mut t_min = None;
    let mut t_max = None;
    for d in docs {
        *per_user.entry(d.user_id.as_str()).or_insert(0) += 1;
        t_min = Some(match t_min {
            None => d.timestamp,
            Some(t) if d.timestamp < t => d.timestamp,
            Some(t) => t,
        });
        t_max = Some(match t_max {
            None => d.timestamp,
            Some(t) if d.timestamp > t => d.timestamp,
            Some(t) => t,
        });
    }
    let mut docs_per_user: BTreeMap<u64, u64> = BTreeMap::new();
    for n in per_user.values() {
        *docs_per_user.entry(*n).or_insert(0) += 1;
    }
    CorpusStats {
        n_docs: docs.len() as u64,
        n_users: per_user.len() as u64,
        t_min,
        t_max,
        docs_per_user,
    }
}

/// Per-user aggregates for the streaming (two-pass) ingest path.
///
/// Pass one folds every document into this structure; pass two decides,
/// per document, whether it survives the bot cap and the first-per-user
/// rule without ever holding the corpus in memory. Merging two aggregates
/// is associative, so shards can be folded independently and combined.
#[derive(Debug, Default, Clone)]
pub struct UserAggregates {
    /// user -> (doc count, earliest (timestamp, doc_id))
    per_user: std::collections::HashMap<String, (u64, (DateTime<Utc>, String))>,
    pub n_docs: u64,
    pub t_min: Option<DateTime<Utc>>,
    pub t_max: Option<DateTime<Utc>>,
}

impl UserAggregates {
    pub fn observe(&mut self, doc: &Document) {
        self.n_docs += 1;
        self.t_min = Some(self.t_min.map_or(doc.timestamp, |t| t.min(doc.timestamp)));
        self.t_max = Some(self.t_max.map_or(doc.timestamp, |t| t.max(doc.timestamp)));
        let key = (doc.timestamp, doc.doc_id.clone());
        self.per_user
            .entry(doc.user_id.clone())
            .and_modify(|(n, first)| {
                *n += 1;
                if key < *first {
                    *first = key.clone();
                }
            })
            .or_insert((1, key));
    }

    pub fn merge(mut self, other: UserAggregates) -> UserAggregates {
        self.n_docs += other.n_docs;
        self.t_min = match (self.t_min, other.t_min) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.t_max = match (self.t_max, other.t_max) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        for (user, (n, first)) in other.per_user {
            self.per_user
                .entry(user)
                .and_modify(|(sn, sfirst)| {
                    *sn += n;
                    if first < *sfirst {
                        *sfirst = first.clone();
                    }
                })
                .or_insert((n, first));
        }
        self
    }

    pub fn n_users(&self) -> u64 {
        self.per_user.len() as u64
    }

    /// True when the document's user is over the bot cap.
    pub fn over_cap(&self, doc: &Document, cap: u64) -> bool {
        self.per_user
            .get(&doc.user_id)
            .map(|(n, _)| *n > cap)
            .unwrap_or(false)
    }

    /// True when the document is its user's earliest (the one dedup keeps).
    pub fn is_first(&self, doc: &Document) -> bool {
        self.per_user
            .get(&doc.user_id)
            .map(|(_, first)| *first == (doc.timestamp, doc.doc_id.clone()))
            .unwrap_or(false)
    }

    pub fn stats(&self) -> CorpusStats {
        let mut docs_per_user: BTreeMap<u64, u64> = BTreeMap::new();
        for (n, _) in self.per_user.values() {
            *docs_per_user.entry(*n).or_insert(0) += 1;
        }
        CorpusStats {
            n_docs: self.n_docs,
            n_users: self.per_user.len() as u64,
            t_min: self.t_min,
            t_max: self.t_max,
            docs_per_user,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    fn ts(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    fn doc(id: &str, user: &str, t: &str, text: &str) -> Document {
        Document {
            doc_id: id.into(),
            user_id: user.into(),
            timestamp: ts(t),
            text: text.into(),
            corpus_tag: CorpusTag::B,
        }
    }

    fn write_tmp(content: &str, ext: &str) -> tempfile::TempPath {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.into_temp_path()
    }

    #[test]
    fn empty_file_yields_empty_stream() {
        let p = write_tmp("", ".jsonl");
        let (docs, skipped) = load_documents(&p, InputFormat::Jsonl, CorpusTag::A).unwrap();
        assert!(docs.is_empty());
        assert_eq!(skipped, 0);
    }

    #[test]
    fn three_valid_records_in_order() {
        let p = write_tmp(
            r#"{"id":"d1","user":"u1","ts":"2020-03-01T10:00:00Z","text":"fever"}
{"id":"d2","user":"u2","ts":"2020-03-01T11:00:00Z","text":"cough"}
{"id":"d3","user":"u1","ts":"2020-03-01T12:00:00Z","text":"ache"}
"#,
            ".jsonl",
        );
        let (docs, skipped) = load_documents(&p, InputFormat::Jsonl, CorpusTag::A).unwrap();
        assert_eq!(skipped, 0);
        assert_eq!(
            docs.iter().map(|d| d.doc_id.as_str()).collect::<Vec<_>>(),
            ["d1", "d2", "d3"]
        );
    }

    #[test]
    fn missing_text_is_skipped_and_counted() {
        let p = write_tmp(
            r#"{"id":"d1","user":"u1","ts":"2020-03-01T10:00:00Z","text":"fever"}
{"id":"d2","user":"u2","ts":"2020-03-01T11:00:00Z"}
{"id":"d3","user":"u3","ts":"2020-03-01T12:00:00Z","text":"ache"}
"#,
            ".jsonl",
        );
        let (docs, skipped) = load_documents(&p, InputFormat::Jsonl, CorpusTag::A).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(skipped, 1);
    }

    #[test]
    fn majority_malformed_is_fatal() {
        let p = write_tmp(
            "not json\nalso not json\n{\"id\":\"d1\",\"user\":\"u\",\"ts\":\"2020-03-01T10:00:00Z\",\"text\":\"x\"}\n",
            ".jsonl",
        );
        let err = load_documents(&p, InputFormat::Jsonl, CorpusTag::A).unwrap_err();
        assert!(err.to_string().contains(">50%"), "{err}");
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = match DocumentStream::open(
            Path::new("/nonexistent/x.jsonl"),
            InputFormat::Jsonl,
            CorpusTag::A,
        ) {
            Err(e) => e,
            Ok(_) => panic!("missing file must fail"),
        };
        assert!(matches!(err, CoreError::Data(_)));
    }

    #[test]
    fn rejects_sidecar_records_reasons() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.jsonl");
        std::fs::write(
            &input,
            "{\"id\":\"d1\",\"user\":\"u\",\"ts\":\"2020-03-01T10:00:00Z\",\"text\":\"x\"}\nbroken\n",
        )
        .unwrap();
        let sink = RejectSink::sidecar_for(&input).unwrap();
        let mut stream = DocumentStream::open(&input, InputFormat::Jsonl, CorpusTag::A)
            .unwrap()
            .with_rejects(sink);
        let docs: Vec<_> = (&mut stream).collect::<Result<_>>().unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(stream.skipped(), 1);
        let side = std::fs::read_to_string(dir.path().join("in.jsonl.rejects.jsonl")).unwrap();
        assert!(side.contains("bad json"), "{side}");
        assert!(side.contains("\"line\":2"), "{side}");
    }

    #[test]
    fn csv_loading_locates_columns_by_name() {
        let p = write_tmp(
            "text,id,user,ts\nfever and chills,d1,u1,2020-03-01T10:00:00Z\n",
            ".csv",
        );
        let (docs, skipped) = load_documents(&p, InputFormat::Csv, CorpusTag::B).unwrap();
        assert_eq!(skipped, 0);
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].doc_id, "d1");
        assert_eq!(docs[0].text, "fever and chills");
    }

    #[test]
    fn csv_missing_column_is_fatal() {
        let p = write_tmp("id,user,when,text\n", ".csv");
        let err = match DocumentStream::open(&p, InputFormat::Csv, CorpusTag::A) {
            Err(e) => e,
            Ok(_) => panic!("missing ts column must fail"),
        };
        assert!(err.to_string().contains("`ts`"), "{err}");
    }

    #[test]
    fn time_window_inclusive_bounds() {
        let docs = vec![
            doc("d1", "u1", "2020-02-01T00:00:00Z", "x"),
            doc("d2", "u2", "2020-03-01T00:00:00Z", "x"),
            doc("d3", "u3", "2020-03-15T00:00:00Z", "x"),
            doc("d4", "u4", "2020-04-30T23:59:59Z", "x"),
            doc("d5", "u5", "2020-05-01T00:00:00Z", "x"),
        ];
        let out = filter_time_window(
            docs.clone(),
            ts("2020-03-01T00:00:00Z"),
            ts("2020-03-31T00:00:00Z"),
        )
        .unwrap();
        assert_eq!(
            out.iter().map(|d| d.doc_id.as_str()).collect::<Vec<_>>(),
            ["d2", "d3"]
        );

        // Covering window is the identity.
        let all = filter_time_window(
            docs.clone(),
            ts("2000-01-01T00:00:00Z"),
            ts("2030-01-01T00:00:00Z"),
        )
        .unwrap();
        assert_eq!(all, docs);

        // Disjoint window keeps nothing.
        let none =
            filter_time_window(docs, ts("1990-01-01T00:00:00Z"), ts("1990-12-31T00:00:00Z"))
                .unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn time_window_rejects_inverted_bounds() {
        let err = filter_time_window(vec![], ts("2020-04-01T00:00:00Z"), ts("2020-03-01T00:00:00Z"))
            .unwrap_err();
        assert!(matches!(err, CoreError::Config(_)));
    }

    #[test]
    fn dedup_keeps_earliest_per_user() {
        let docs = vec![
            doc("d3", "u1", "2020-03-03T00:00:00Z", "third"),
            doc("d1", "u1", "2020-03-01T00:00:00Z", "first"),
            doc("d2", "u1", "2020-03-02T00:00:00Z", "second"),
            doc("d4", "u2", "2020-03-04T00:00:00Z", "other"),
        ];
        let out = dedup_first_per_user(docs);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].doc_id, "d1");
        assert_eq!(out[1].doc_id, "d4");
    }

    #[test]
    fn dedup_tie_broken_by_doc_id() {
        let docs = vec![
            doc("db", "u1", "2020-03-01T00:00:00Z", "x"),
            doc("da", "u1", "2020-03-01T00:00:00Z", "x"),
        ];
        let out = dedup_first_per_user(docs);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].doc_id, "da");
    }

    #[test]
    fn dedup_distinct_users_is_identity() {
        let docs = vec![
            doc("d1", "u1", "2020-03-01T00:00:00Z", "x"),
            doc("d2", "u2", "2020-03-02T00:00:00Z", "x"),
        ];
        assert_eq!(dedup_first_per_user(docs.clone()), docs);
    }

    #[test]
    fn bot_filter_removes_all_docs_of_heavy_users() {
        // Users with counts 2 / 2 / 600 at cap 500: 4 docs remain.
        let mut docs = Vec::new();
        for i in 0..2 {
            docs.push(doc(&format!("a{i}"), "u1", "2020-03-01T00:00:00Z", "x"));
            docs.push(doc(&format!("b{i}"), "u2", "2020-03-01T00:00:00Z", "x"));
        }
        for i in 0..600 {
            docs.push(doc(&format!("c{i}"), "bot", "2020-03-01T00:00:00Z", "x"));
        }
        let out = filter_bots(docs, 500).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|d| d.user_id != "bot"));
    }

    #[test]
    fn bot_filter_extreme_account_removed_at_default_cap() {
        // One account with 15,823 documents is wiped out by a cap of 500.
        let mut docs = vec![doc("keep", "human", "2020-03-01T00:00:00Z", "x")];
        for i in 0..15_823 {
            docs.push(doc(&format!("t{i}"), "heavy", "2020-03-01T00:00:00Z", "x"));
        }
        let out = filter_bots(docs, 500).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].doc_id, "keep");
    }

    #[test]
    fn bot_filter_disabled_cap_is_identity() {
        let docs = vec![
            doc("d1", "u1", "2020-03-01T00:00:00Z", "x"),
            doc("d2", "u1", "2020-03-02T00:00:00Z", "x"),
        ];
        assert_eq!(filter_bots(docs.clone(), u64::MAX).unwrap(), docs);
    }

    #[test]
    fn stats_counts_and_extremes() {
        assert_eq!(corpus_stats(&[]), CorpusStats::empty());

        let docs = vec![
            doc("d1", "u1", "2020-03-02T00:00:00Z", "x"),
            doc("d2", "u1", "2020-03-01T00:00:00Z", "x"),
            doc("d3", "u2", "2020-03-05T00:00:00Z", "x"),
            doc("d4", "u1", "2020-03-09T00:00:00Z", "x"),
        ];
        let s = corpus_stats(&docs);
        assert_eq!(s.n_docs, 4);
        assert_eq!(s.n_users, 2);
        assert_eq!(s.t_min.unwrap(), ts("2020-03-01T00:00:00Z"));
        assert_eq!(s.t_max.unwrap(), ts("2020-03-09T00:00:00Z"));
        assert_eq!(s.docs_per_user.get(&3), Some(&1));
        assert_eq!(s.docs_per_user.get(&1), Some(&1));

        let single = corpus_stats(&docs[..1]);
        assert_eq!(single.n_docs, 1);
        assert_eq!(single.n_users, 1);
        assert_eq!(single.t_min, single.t_max);
    }

    #[test]
    fn filters_are_idempotent_and_subsets() {
        let docs = vec![
            doc("d1", "u1", "2020-03-01T00:00:00Z", "x"),
            doc("d2", "u1", "2020-03-02T00:00:00Z", "x"),
            doc("d3", "u2", "2020-03-03T00:00:00Z", "x"),
            doc("d4", "u3", "2020-03-04T00:00:00Z", "x"),
            doc("d5", "u3", "2020-03-05T00:00:00Z", "x"),
            doc("d6", "u3", "2020-03-06T00:00:00Z", "x"),
        ];
        let once = filter_bots(docs.clone(), 2).unwrap();
        let twice = filter_bots(once.clone(), 2).unwrap();
        assert_eq!(once, twice);
        assert!(once.iter().all(|d| docs.contains(d)));

        let d_once = dedup_first_per_user(docs.clone());
        let d_twice = dedup_first_per_user(d_once.clone());
        assert_eq!(d_once, d_twice);
        assert!(d_once.iter().all(|d| docs.contains(d)));

        let w_once = filter_time_window(
            docs.clone(),
            ts("2020-03-02T00:00:00Z"),
            ts("2020-03-05T00:00:00Z"),
        )
        .unwrap();
        let w_twice = filter_time_window(
            w_once.clone(),
            ts("2020-03-02T00:00:00Z"),
            ts("2020-03-05T00:00:00Z"),
        )
        .unwrap();
        assert_eq!(w_once, w_twice);
    }

    #[test]
    fn dedup_after_bot_cap_one_doc_per_user() {
        let docs = vec![
            doc("d1", "u1", "2020-03-01T00:00:00Z", "x"),
            doc("d2", "u2", "2020-03-02T00:00:00Z", "x"),
            doc("d3", "u2", "2020-03-03T00:00:00Z", "x"),
        ];
        let out = dedup_first_per_user(docs);
        let stats = corpus_stats(&out);
        assert_eq!(stats.n_docs, stats.n_users);
    }

    #[test]
    fn user_aggregates_merge_is_associative() {
        let docs: Vec<Document> = (0..30)
            .map(|i| {
                doc(
                    &format!("d{i:02}"),
                    &format!("u{}", i % 7),
                    &format!("2020-03-{:02}T00:00:00Z", (i % 28) + 1),
                    "x",
                )
            })
            .collect();
        let fold = |chunk: &[Document]| {
            let mut agg = UserAggregates::default();
            for d in chunk {
                agg.observe(d);
            }
            agg
        };
        let whole = fold(&docs);
        let (x, yz) = docs.split_at(10);
        let (y, z) = yz.split_at(10);
        let merged_left = fold(x).merge(fold(y)).merge(fold(z));
        let merged_right = fold(x).merge(fold(y).merge(fold(z)));
        assert_eq!(whole.stats(), merged_left.stats());
        assert_eq!(whole.stats(), merged_right.stats());
        for d in &docs {
            assert_eq!(whole.is_first(d), merged_left.is_first(d));
            assert_eq!(whole.over_cap(d, 4), merged_right.over_cap(d, 4));
        }
    }

    #[test]
    fn streaming_pass_matches_vec_ops() {
        let docs = vec![
            doc("d1", "u1", "2020-03-01T00:00:00Z", "x"),
            doc("d2", "u1", "2020-03-02T00:00:00Z", "x"),
            doc("d3", "u2", "2020-03-03T00:00:00Z", "x"),
            doc("d4", "u3", "2020-03-04T00:00:00Z", "x"),
            doc("d5", "u3", "2020-03-05T00:00:00Z", "x"),
            doc("d6", "u3", "2020-03-06T00:00:00Z", "x"),
        ];
        let mut agg = UserAggregates::default();
        for d in &docs {
            agg.observe(d);
        }
        let cap = 2;
        let streamed: Vec<_> = docs
            .iter()
            .filter(|d| !agg.over_cap(d, cap))
            .cloned()
            .collect();
        assert_eq!(streamed, filter_bots(docs.clone(), cap).unwrap());

        let first_only: Vec<_> = docs.iter().filter(|d| agg.is_first(d)).cloned().collect();
        assert_eq!(first_only, dedup_first_per_user(docs));
    }

    #[test]
    fn stats_match_timezone_normalization() {
        // RFC 3339 offsets are normalized to UTC on load.
        let p = write_tmp(
            "{\"id\":\"d1\",\"user\":\"u\",\"ts\":\"2020-03-01T12:00:00+02:00\",\"text\":\"x\"}\n",
            ".jsonl",
        );
        let (docs, _) = load_documents(&p, InputFormat::Jsonl, CorpusTag::A).unwrap();
        assert_eq!(docs[0].timestamp, Utc.with_ymd_and_hms(2020, 3, 1, 10, 0, 0).unwrap());
    }
}
