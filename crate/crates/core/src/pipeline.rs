//! Full-pipeline orchestration: ingest both corpora, extract mentions,
//! classify, build and filter the network, compute metrics, and write all
//! artifacts atomically into the output directory.
//!
//! Artifacts: `class_table.csv`, `conet.graphml`, `conet_edges.csv`,
//! `metrics.json`, `core.dot`, `run_manifest.json`. Everything is written
//! to temporary names first and renamed into place only when the whole run
//! succeeded, so a failed run leaves no partial artifacts behind.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::conet::{
    build_cooccurrence_with, filter_edges, remove_singletons, EdgeFilter, DEFAULT_CI_MULTIPLIER,
};
use crate::doc::{CorpusTag, Document};
use crate::error::{CoreError, Result};
use crate::export;
use crate::extract::{
    conditions_per_document, load_external_annotations, Extractor, Lexicon, MentionRecord,
};
use crate::ingest::{self};
use crate::metrics::{compute_metrics, CoreMode, PageRankParams};
use crate::prevalence::{classify_iterative, count_conditions, rank_conditions, ClassifyParams};

/// Where mentions come from: the built-in dictionary tagger or external
/// annotation files (one per corpus).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MentionSource {
    Lexicon(PathBuf),
    Annotations { corpus_a: PathBuf, corpus_b: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

/// Hygiene settings for one corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HygieneConfig {
    pub window: Option<TimeWindow>,
    /// Per-user document cap; users over it lose all their documents.
    pub bot_cap: Option<u64>,
    /// Keep only each user's earliest document.
    pub dedup_first: bool,
}

impl Default for HygieneConfig {
    fn default() -> Self {
        HygieneConfig { window: None, bot_cap: Some(500), dedup_first: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub corpus_a: PathBuf,
    pub corpus_b: PathBuf,
    pub source: MentionSource,
    pub out_dir: PathBuf,
    pub hygiene_a: HygieneConfig,
    pub hygiene_b: HygieneConfig,
    pub classify: ClassifyParams,
    pub edge_filter: EdgeFilter,
    pub ci_multiplier: f64,
    pub drop_post_filter_isolates: bool,
    pub pagerank: PageRankParams,
    pub core_min_degree: usize,
    pub core_mode: CoreMode,
    /// Worker threads for extraction (0 = library default).
    pub threads: usize,
}

impl PipelineConfig {
    pub fn new(
        corpus_a: impl Into<PathBuf>,
        corpus_b: impl Into<PathBuf>,
        source: MentionSource,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        PipelineConfig {
            corpus_a: corpus_a.into(),
            corpus_b: corpus_b.into(),
            source,
            out_dir: out_dir.into(),
            hygiene_a: HygieneConfig::default(),
            hygiene_b: HygieneConfig { dedup_first: true, ..Default::default() },
            classify: ClassifyParams::default(),
            edge_filter: EdgeFilter::default(),
            ci_multiplier: DEFAULT_CI_MULTIPLIER,
            drop_post_filter_isolates: false,
            pagerank: PageRankParams::default(),
            core_min_degree: 5,
            core_mode: CoreMode::OneShot,
            threads: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        for (what, path) in [("corpus_a", &self.corpus_a), ("corpus_b", &self.corpus_b)] {
            if !path.exists() {
                return Err(CoreError::Config(format!(
                    "{what} path does not exist: {}",
                    path.display()
                )));
            }
        }
        match &self.source {
            MentionSource::Lexicon(p) => {
                if !p.exists() {
                    return Err(CoreError::Config(format!(
                        "lexicon path does not exist: {}",
                        p.display()
                    )));
                }
            }
            MentionSource::Annotations { corpus_a, corpus_b } => {
                for p in [corpus_a, corpus_b] {
                    if !p.exists() {
                        return Err(CoreError::Config(format!(
                            "annotation path does not exist: {}",
                            p.display()
                        )));
                    }
                }
            }
        }
        if !(0.0..=1.0).contains(&self.edge_filter.alpha) {
            return Err(CoreError::Config(format!(
                "alpha must lie in [0, 1], got {}",
                self.edge_filter.alpha
            )));
        }
        if self.ci_multiplier <= 0.0 {
            return Err(CoreError::Config(format!(
                "ci multiplier must be positive, got {}",
                self.ci_multiplier
            )));
        }
        if !(0.0..1.0).contains(&self.pagerank.damping) {
            return Err(CoreError::Config(format!(
                "damping must lie in [0, 1), got {}",
                self.pagerank.damping
            )));
        }
        Ok(())
    }
}

/// Hygiene-filter one loaded corpus in the canonical order:
/// time window, bot cap, first-per-user dedup.
pub fn apply_hygiene(docs: Vec<Document>, hygiene: &HygieneConfig) -> Result<Vec<Document>> {
    let mut docs = match hygiene.window {
        Some(w) => ingest::filter_time_window(docs, w.start, w.end)?,
        None => docs,
    };
    if let Some(cap) = hygiene.bot_cap {
        docs = ingest::filter_bots(docs, cap)?;
    }
    if hygiene.dedup_first {
        docs = ingest::dedup_first_per_user(docs);
    }
    Ok(docs)
}

/// Extract mentions for a corpus, in document order.
pub fn extract_mentions<E: Extractor + Sync>(docs: &[Document], extractor: &E) -> Vec<MentionRecord> {
    use rayon::prelude::*;
    docs.par_iter()
        .map(|d| extractor.mentions_for(d))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Per-document condition sets for every document (documents without
/// mentions get an empty set, so the map size equals the corpus size and
/// can serve as `N` for the co-occurrence statistics).
pub fn doc_conditions_full(
    docs: &[Document],
    mentions: &[MentionRecord],
) -> BTreeMap<String, BTreeSet<String>> {
    let mut map = conditions_per_document(mentions);
    for d in docs {
        map.entry(d.doc_id.clone()).or_default();
    }
    map
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusSummary {
    pub path: String,
    pub loaded: u64,
    pub skipped: u64,
    pub after_hygiene: u64,
    pub n_users: u64,
    pub mentions: u64,
    pub unique_conditions: u64,
}

/// Summary of one full run, also embedded into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub corpus_a: CorpusSummary,
    pub corpus_b: CorpusSummary,
    pub class_counts: BTreeMap<String, usize>,
    pub classify_iterations: usize,
    pub nodes_before_singleton_removal: usize,
    pub nodes_after_singleton_removal: usize,
    pub edges_before_filter: usize,
    pub edges_after_filter: usize,
    pub post_filter_isolates: usize,
    pub giant_component_size: usize,
    pub assortativity: Option<f64>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

/// Writes artifacts under temporary names and renames them into place on
/// success; dropping the writer without committing removes the temps.
struct ArtifactDir {
    out_dir: PathBuf,
    pending: Vec<(PathBuf, PathBuf)>,
}

impl ArtifactDir {
    fn new(out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir)?;
        Ok(ArtifactDir { out_dir: out_dir.to_path_buf(), pending: Vec::new() })
    }

    fn stage(&mut self, name: &str) -> PathBuf {
        let tmp = self.out_dir.join(format!(".{name}.tmp"));
        self.pending.push((tmp.clone(), self.out_dir.join(name)));
        tmp
    }

    fn commit(mut self) -> Result<Vec<String>> {
        let mut names = Vec::new();
        for (tmp, target) in self.pending.drain(..) {
            fs::rename(&tmp, &target)?;
            names.push(target.file_name().unwrap().to_string_lossy().into_owned());
        }
        Ok(names)
    }
}

impl Drop for ArtifactDir {
    fn drop(&mut self) {
        for (tmp, _) in &self.pending {
            let _ = fs::remove_file(tmp);
        }
    }
}

fn load_and_clean(
    path: &Path,
    tag: CorpusTag,
    hygiene: &HygieneConfig,
    rejects_path: &Path,
) -> Result<(Vec<Document>, u64)> {
    let format = ingest::format_for_path(path);
    let sink = ingest::RejectSink::at(rejects_path)?;
    let mut stream = ingest::DocumentStream::open(path, format, tag)?.with_rejects(sink);
    let mut docs = Vec::new();
    for item in &mut stream {
        docs.push(item?);
    }
    let skipped = stream.skipped();
    let docs = apply_hygiene(docs, hygiene)?;
    Ok((docs, skipped))
}

/// Run the whole pipeline per the configuration. Deterministic for fixed
/// inputs and configuration, independent of the thread count.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport> {
    config.validate()?;

    let run = || run_stages(config);
    if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| CoreError::Config(format!("cannot build thread pool: {e}")))?;
        pool.install(run)
    } else {
        run()
    }
}

fn run_stages(config: &PipelineConfig) -> Result<RunReport> {
    let mut artifacts = ArtifactDir::new(&config.out_dir)?;
    let mut warnings = Vec::new();

    // Ingest + hygiene.
    let rejects_a = artifacts.stage("ingest_a.rejects.jsonl");
    let rejects_b = artifacts.stage("ingest_b.rejects.jsonl");
    let (docs_a, skipped_a) =
        load_and_clean(&config.corpus_a, CorpusTag::A, &config.hygiene_a, &rejects_a)?;
    let (docs_b, skipped_b) =
        load_and_clean(&config.corpus_b, CorpusTag::B, &config.hygiene_b, &rejects_b)?;
    if docs_a.is_empty() {
        return Err(CoreError::Data("empty corpus: corpus a has no documents after hygiene".into()));
    }
    if docs_b.is_empty() {
        return Err(CoreError::Data("empty corpus: corpus b has no documents after hygiene".into()));
    }

    // Extraction.
    let (mentions_a, mentions_b) = match &config.source {
        MentionSource::Lexicon(path) => {
            let lexicon = Lexicon::from_file(path)?;
            (extract_mentions(&docs_a, &lexicon), extract_mentions(&docs_b, &lexicon))
        }
        MentionSource::Annotations { corpus_a, corpus_b } => {
            let lens = |docs: &[Document]| {
                docs.iter()
                    .map(|d| (d.doc_id.clone(), d.text.chars().count()))
                    .collect::<std::collections::HashMap<_, _>>()
            };
            let ann_a = load_external_annotations(corpus_a, &lens(&docs_a))?;
            let ann_b = load_external_annotations(corpus_b, &lens(&docs_b))?;
            for (tag, ann) in [("a", &ann_a), ("b", &ann_b)] {
                if ann.unknown_docs + ann.bad_offsets + ann.malformed > 0 {
                    warnings.push(format!(
                        "annotations {tag}: skipped {} unknown-doc, {} bad-offset, {} malformed records",
                        ann.unknown_docs, ann.bad_offsets, ann.malformed
                    ));
                }
            }
            (extract_mentions(&docs_a, &ann_a), extract_mentions(&docs_b, &ann_b))
        }
    };

    // Counting, ranking, classification.
    let doc_conditions_a = conditions_per_document(&mentions_a);
    let freq_a = count_conditions(&doc_conditions_a, CorpusTag::A);
    let doc_conditions_b_full = doc_conditions_full(&docs_b, &mentions_b);
    let doc_conditions_b_mentioned = conditions_per_document(&mentions_b);
    let freq_b = count_conditions(&doc_conditions_b_mentioned, CorpusTag::B);
    if freq_a.counts.is_empty() {
        return Err(CoreError::Data("empty corpus: no conditions extracted from corpus a".into()));
    }
    if freq_b.counts.is_empty() {
        return Err(CoreError::Data("empty corpus: no conditions extracted from corpus b".into()));
    }
    let rank_a = rank_conditions(&freq_a)?;
    let rank_b = rank_conditions(&freq_b)?;
    let outcome = classify_iterative(&rank_a, &rank_b, &config.classify)?;
    warnings.extend(outcome.warnings.iter().cloned());

    let rows: Vec<export::ClassTableRow> = outcome
        .classified
        .iter()
        .map(|c| export::ClassTableRow::from_classified(c, Some(&freq_a.counts), Some(&freq_b.counts)))
        .collect();
    let class_table_path = artifacts.stage("class_table.csv");
    export::write_class_table(&class_table_path, &rows)?;

    // Co-occurrence network over corpus B.
    let graph_raw =
        build_cooccurrence_with(&doc_conditions_b_full, &outcome.classified, config.ci_multiplier);
    let nodes_before = graph_raw.n_nodes();
    let graph_connected = remove_singletons(&graph_raw);
    let nodes_after = graph_connected.n_nodes();
    let edges_before = graph_connected.n_edges();
    let filtered = filter_edges(&graph_connected, &config.edge_filter);
    let edges_after = filtered.n_edges();
    let isolates_after = {
        let deg = filtered.degrees();
        filtered.nodes.keys().filter(|n| deg[n.as_str()] == 0).count()
    };
    let mut network = if config.drop_post_filter_isolates {
        remove_singletons(&filtered)
    } else {
        filtered
    };
    if isolates_after > 0 {
        warnings.push(format!(
            "{isolates_after} node(s) lost all edges in the significance filter{}",
            if config.drop_post_filter_isolates { " and were dropped" } else { "" }
        ));
    }

    // Metrics over the filtered network.
    let report = compute_metrics(&network, &config.pagerank, config.core_min_degree, config.core_mode)?;
    if !report.pagerank_converged {
        warnings.push("pagerank did not converge within max_iters".into());
    }
    for (name, info) in network.nodes.iter_mut() {
        info.pagerank = report.pagerank.get(name).copied();
    }

    let graphml_path = artifacts.stage("conet.graphml");
    export::write_graphml(&graphml_path, &network, config.ci_multiplier)?;
    let edges_path = artifacts.stage("conet_edges.csv");
    export::write_edge_csv(&edges_path, &network)?;
    let metrics_path = artifacts.stage("metrics.json");
    fs::write(&metrics_path, serde_json::to_string_pretty(&report)? + "\n")?;
    let core_path = artifacts.stage("core.dot");
    let core = crate::metrics::extract_core(&network, config.core_min_degree, config.core_mode);
    export::write_dot(&core_path, &core)?;

    // Manifest: configuration, input digests, versions.
    let manifest_path = artifacts.stage("run_manifest.json");
    let mut digests = BTreeMap::new();
    digests.insert("corpus_a".to_string(), export::file_digest(&config.corpus_a)?);
    digests.insert("corpus_b".to_string(), export::file_digest(&config.corpus_b)?);
    match &config.source {
        MentionSource::Lexicon(p) => {
            digests.insert("lexicon".to_string(), export::file_digest(p)?);
        }
        MentionSource::Annotations { corpus_a, corpus_b } => {
            digests.insert("annotations_a".to_string(), export::file_digest(corpus_a)?);
            digests.insert("annotations_b".to_string(), export::file_digest(corpus_b)?);
        }
    }

    let mk_summary = |path: &Path,
                      loaded: u64,
                      skipped: u64,
                      docs: &[Document],
                      mentions: &[MentionRecord],
                      freq: &crate::prevalence::FrequencyTable| {
        CorpusSummary {
            path: path.display().to_string(),
            loaded,
            skipped,
            after_hygiene: docs.len() as u64,
            n_users: ingest::corpus_stats(docs).n_users,
            mentions: mentions.len() as u64,
            unique_conditions: freq.counts.len() as u64,
        }
    };
    let summary_a = mk_summary(
        &config.corpus_a,
        docs_a.len() as u64 + skipped_a,
        skipped_a,
        &docs_a,
        &mentions_a,
        &freq_a,
    );
    let summary_b = mk_summary(
        &config.corpus_b,
        docs_b.len() as u64 + skipped_b,
        skipped_b,
        &docs_b,
        &mentions_b,
        &freq_b,
    );

    let report_out = RunReport {
        corpus_a: summary_a,
        corpus_b: summary_b,
        class_counts: outcome
            .class_counts()
            .into_iter()
            .map(|(class, n)| (class.as_str().to_string(), n))
            .collect(),
        classify_iterations: outcome.iterations,
        nodes_before_singleton_removal: nodes_before,
        nodes_after_singleton_removal: nodes_after,
        edges_before_filter: edges_before,
        edges_after_filter: edges_after,
        post_filter_isolates: isolates_after,
        giant_component_size: report.giant_component_size,
        assortativity: report.assortativity,
        warnings: warnings.clone(),
        artifacts: Vec::new(),
    };

    let manifest = serde_json::json!({
        "tool": { "name": "prevnet", "version": env!("CARGO_PKG_VERSION") },
        "schemas": {
            "docs": export::DOCS_SCHEMA,
            "mentions": export::MENTIONS_SCHEMA,
        },
        "config": config,
        "input_digests": digests,
        "report": report_out,
    });
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;

    let names = artifacts.commit()?;
    let mut final_report = report_out;
    final_report.artifacts = names;
    Ok(final_report)
}

// ---------------------------------------------------------------------------
// Key-value configuration files
// ---------------------------------------------------------------------------

/// Parse the simple `key = value` configuration format (`#` comments,
/// blank lines ignored). Later keys override earlier ones.
pub fn parse_kv_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CoreError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(idx) => &raw[..idx],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CoreError::Config(format!(
                "bad config line {} in {}: expected `key = value`, got {raw:?}",
                i + 1,
                path.display()
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}
