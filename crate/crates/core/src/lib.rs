//! Corpus-comparison toolkit: extract condition mentions from two text
//! corpora, classify each condition by differential prevalence with an
//! iterative regression-residual procedure, and build a statistically
//! filtered co-occurrence network with centrality and assortativity
//! analytics.
//!
//! Modules follow the pipeline order:
//!
//! - [`ingest`] — load, validate, and hygiene-filter corpora
//! - [`extract`] — dictionary tagging or external annotations
//! - [`prevalence`] — counts, fractional ranks, iterative classification
//! - [`conet`] — co-occurrence graph, RR/phi statistics, edge filtering
//! - [`metrics`] — PageRank, assortativity, components, display core
//! - [`synth`] — deterministic planted-structure corpus generator
//! - [`pipeline`] — end-to-end orchestration with atomic artifact output
//! - [`export`] — GraphML/DOT/CSV/JSONL file formats

pub mod conet;
pub mod dist;
pub mod doc;
pub mod error;
pub mod export;
pub mod extract;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod prevalence;
pub mod synth;

pub use conet::{
    build_cooccurrence, edge_stats, filter_edges, remove_singletons, CoGraph, EdgeFilter,
    EdgeStats,
};
pub use doc::{CorpusStats, CorpusTag, Document};
pub use error::{CoreError, Result};
pub use extract::{extract_dictionary, normalize, Lexicon, MentionRecord};
pub use metrics::{
    attribute_assortativity, class_average_pagerank, connected_components, extract_core,
    pagerank, CoreMode, MetricsReport, PageRankParams,
};
pub use prevalence::{
    classify_iterative, count_conditions, fit_ols, rank_conditions, ClassificationOutcome,
    ClassifiedCondition, ClassifyParams, FrequencyTable, PrevalenceClass, RankTable,
};
pub use pipeline::{run_pipeline, MentionSource, PipelineConfig, RunReport};
pub use synth::{generate, planted_spec, PlantedParams, SynthSpec};
