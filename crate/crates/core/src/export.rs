//! File formats: GraphML and DOT graph exports, edge-list and class-table
//! CSVs, and the JSONL intermediates passed between pipeline stages.
//!
//! Stage files embed a schema marker (a `{"schema": ...}` first line for
//! JSONL, the exact column header for CSV); readers check it and report
//! expected vs. found on mismatch so stage wiring mistakes fail loudly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::conet::{edge_stats_with, CoGraph, EdgeInfo, NodeInfo, DEFAULT_CI_MULTIPLIER};
use crate::doc::{CorpusTag, Document};
use crate::error::{CoreError, Result};
use crate::extract::MentionRecord;
use crate::prevalence::{ClassifiedCondition, PrevalenceClass};

pub use crate::ingest::DOCS_SCHEMA;
pub const MENTIONS_SCHEMA: &str = "prevnet.mentions.v1";
pub const CLASS_TABLE_HEADER: [&str; 7] =
    ["condition", "count_a", "count_b", "rank_a", "rank_b", "residual", "class"];
pub const COUNTS_HEADER: [&str; 2] = ["condition", "count"];

// ---------------------------------------------------------------------------
// JSONL intermediates
// ---------------------------------------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaLine {
    schema: String,
}

fn check_schema_line(line: &str, expected: &str) -> Result<bool> {
    if let Ok(marker) = serde_json::from_str::<SchemaLine>(line) {
        if marker.schema != expected {
            return Err(CoreError::Data(format!(
                "schema mismatch: expected {expected}, found {}",
                marker.schema
            )));
        }
        return Ok(true);
    }
    Ok(false)
}

/// Write cleaned documents in the corpus JSONL format (keys `id`, `user`,
/// `ts`, `text`) with a schema marker line.
pub fn write_documents_jsonl(path: &Path, docs: &[Document]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", serde_json::json!({ "schema": DOCS_SCHEMA }))?;
    for d in docs {
        let row = serde_json::json!({
            "id": d.doc_id,
            "user": d.user_id,
            "ts": d.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            "text": d.text,
        });
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

/// Write mention records with a schema marker line.
pub fn write_mentions_jsonl(path: &Path, mentions: &[MentionRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", serde_json::json!({ "schema": MENTIONS_SCHEMA }))?;
    for m in mentions {
        writeln!(out, "{}", serde_json::to_string(m)?)?;
    }
    out.flush()?;
    Ok(())
}

/// Read a mentions JSONL file produced by the extract stage (or an external
/// annotation file in the same shape, schema line optional).
pub fn read_mentions_jsonl(path: &Path) -> Result<Vec<MentionRecord>> {
    let file = File::open(path)
        .map_err(|e| CoreError::Data(format!("cannot open mentions {}: {e}", path.display())))?;
    let mut mentions = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && check_schema_line(&line, MENTIONS_SCHEMA)? {
            continue;
        }
        let m: MentionRecord = serde_json::from_str(&line).map_err(|e| {
            CoreError::Data(format!(
                "bad mention record at {}:{}: {e}",
                path.display(),
                i + 1
            ))
        })?;
        mentions.push(m);
    }
    Ok(mentions)
}

// ---------------------------------------------------------------------------
// Class table CSV
// ---------------------------------------------------------------------------

/// One row of the class table artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTableRow {
    pub condition: String,
    pub count_a: Option<u64>,
    pub count_b: Option<u64>,
    pub rank_a: Option<f64>,
    pub rank_b: Option<f64>,
    pub residual: Option<f64>,
    pub class: PrevalenceClass,
}

impl ClassTableRow {
    pub fn from_classified(
        c: &ClassifiedCondition,
        counts_a: Option<&BTreeMap<String, u64>>,
        counts_b: Option<&BTreeMap<String, u64>>,
    ) -> Self {
        ClassTableRow {
            condition: c.condition.clone(),
            count_a: counts_a.and_then(|m| m.get(&c.condition).copied()),
            count_b: counts_b.and_then(|m| m.get(&c.condition).copied()),
            rank_a: c.rank_a,
            rank_b: c.rank_b,
            residual: c.residual,
            class: c.class,
        }
    }

    pub fn to_classified(&self) -> ClassifiedCondition {
        ClassifiedCondition {
            condition: self.condition.clone(),
            rank_a: self.rank_a,
            rank_b: self.rank_b,
            residual: self.residual,
            class: self.class,
        }
    }
}

/// Display order mirrors the usual presentation: the shared class first,
/// then the two differential classes, then single-corpus conditions.
fn class_order(class: PrevalenceClass) -> u8 {
    match class {
        PrevalenceClass::EquallyPrevalent => 0,
        PrevalenceClass::TypicalA => 1,
        PrevalenceClass::TypicalB => 2,
        PrevalenceClass::OnlyA => 3,
        PrevalenceClass::OnlyB => 4,
    }
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write the class table: one row per condition, grouped by class, most
/// frequent first within each class (total count across corpora, then best
/// rank, then condition name).
pub fn write_class_table(path: &Path, rows: &[ClassTableRow]) -> Result<()> {
    let mut sorted: Vec<&ClassTableRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        let total = |r: &ClassTableRow| r.count_a.unwrap_or(0) + r.count_b.unwrap_or(0);
        let best_rank = |r: &ClassTableRow| {
            let ra = r.rank_a.unwrap_or(f64::INFINITY);
            let rb = r.rank_b.unwrap_or(f64::INFINITY);
            ra.min(rb)
        };
        class_order(a.class)
            .cmp(&class_order(b.class))
            .then_with(|| total(b).cmp(&total(a)))
            .then_with(|| best_rank(a).total_cmp(&best_rank(b)))
            .then_with(|| a.condition.cmp(&b.condition))
    });

    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(CLASS_TABLE_HEADER)?;
    for r in sorted {
        w.write_record([
            r.condition.as_str(),
            &fmt_opt_u64(r.count_a),
            &fmt_opt_u64(r.count_b),
            &fmt_opt_f64(r.rank_a),
            &fmt_opt_f64(r.rank_b),
            &fmt_opt_f64(r.residual),
            r.class.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_class_table(path: &Path) -> Result<Vec<ClassTableRow>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CoreError::Data(format!("cannot open class table {}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found != CLASS_TABLE_HEADER {
        return Err(CoreError::Data(format!(
            "schema mismatch in {}: expected columns {:?}, found {:?}",
            path.display(),
            CLASS_TABLE_HEADER,
            found
        )));
    }
    let parse_f64 = |s: &str, what: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>()
                .map(Some)
                .map_err(|e| CoreError::Data(format!("bad {what} value {s:?}: {e}")))
        }
    };
    let parse_u64 = |s: &str, what: &str| -> Result<Option<u64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<u64>()
                .map(Some)
                .map_err(|e| CoreError::Data(format!("bad {what} value {s:?}: {e}")))
        }
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        rows.push(ClassTableRow {
            condition: get(0).to_string(),
            count_a: parse_u64(get(1), "count_a")?,
            count_b: parse_u64(get(2), "count_b")?,
            rank_a: parse_f64(get(3), "rank_a")?,
            rank_b: parse_f64(get(4), "rank_b")?,
            residual: parse_f64(get(5), "residual")?,
            class: get(6)
                .parse::<PrevalenceClass>()
                .map_err(CoreError::Data)?,
        });
    }
    Ok(rows)
}

/// Write a per-corpus condition count CSV (streaming-count output).
pub fn write_counts_csv(path: &Path, counts: &BTreeMap<String, u64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(COUNTS_HEADER)?;
    for (cond, n) in counts {
        w.write_record([cond.as_str(), &n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_counts_csv(path: &Path) -> Result<BTreeMap<String, u64>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CoreError::Data(format!("cannot open counts {}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found != COUNTS_HEADER {
        return Err(CoreError::Data(format!(
            "schema mismatch in {}: expected columns {:?}, found {:?}",
            path.display(),
            COUNTS_HEADER,
            found
        )));
    }
    let mut counts = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let cond = rec.get(0).unwrap_or("").to_string();
        let n: u64 = rec
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|e| CoreError::Data(format!("bad count for {cond:?}: {e}")))?;
        counts.insert(cond, n);
    }
    Ok(counts)
}

// ---------------------------------------------------------------------------
// Edge-list CSV
// ---------------------------------------------------------------------------

pub fn write_edge_csv(path: &Path, graph: &CoGraph) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["source", "target", "p_ij", "rr", "phi", "p", "lb", "ub"])?;
    for ((a, b), info) in &graph.edges {
        let s = &info.stats;
        w.write_record([
            a.as_str(),
            b.as_str(),
            &info.p_ij.to_string(),
            &s.rr.to_string(),
            &s.phi.to_string(),
            &s.p.to_string(),
            &s.lb.to_string(),
            &s.ub.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// GraphML
// ---------------------------------------------------------------------------

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
    out
}

/// Write the graph as GraphML with node attributes (class, p, pagerank) and
/// edge attributes (weight = co-occurrence count, rr, phi, p, lb, ub).
/// `n_docs` and the CI multiplier ride along as graph attributes so the
/// statistics can be reconstructed exactly on read.
pub fn write_graphml(path: &Path, graph: &CoGraph, ci_multiplier: f64) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(out, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#)?;
    let keys = [
        ("n_docs", "graph", "long"),
        ("ci_multiplier", "graph", "double"),
        ("class", "node", "string"),
        ("p", "node", "long"),
        ("pagerank", "node", "double"),
        ("weight", "edge", "long"),
        ("rr", "edge", "double"),
        ("phi", "edge", "double"),
        ("p_value", "edge", "double"),
        ("lb", "edge", "double"),
        ("ub", "edge", "double"),
    ];
    for (name, target, ty) in keys {
        writeln!(
            out,
            r#"  <key id="{name}" for="{target}" attr.name="{name}" attr.type="{ty}"/>"#
        )?;
    }
    writeln!(out, r#"  <graph id="conet" edgedefault="undirected">"#)?;
    writeln!(out, r#"    <data key="n_docs">{}</data>"#, graph.n_docs)?;
    writeln!(out, r#"    <data key="ci_multiplier">{ci_multiplier}</data>"#)?;
    for (name, info) in &graph.nodes {
        writeln!(out, r#"    <node id="{}">"#, xml_escape(name))?;
        writeln!(out, r#"      <data key="class">{}</data>"#, info.class.as_str())?;
        writeln!(out, r#"      <data key="p">{}</data>"#, info.p)?;
        if let Some(pr) = info.pagerank {
            writeln!(out, r#"      <data key="pagerank">{pr}</data>"#)?;
        }
        writeln!(out, r#"    </node>"#)?;
    }
    for ((a, b), info) in &graph.edges {
        writeln!(
            out,
            r#"    <edge source="{}" target="{}">"#,
            xml_escape(a),
            xml_escape(b)
        )?;
        writeln!(out, r#"      <data key="weight">{}</data>"#, info.p_ij)?;
        writeln!(out, r#"      <data key="rr">{}</data>"#, info.stats.rr)?;
        writeln!(out, r#"      <data key="phi">{}</data>"#, info.stats.phi)?;
        writeln!(out, r#"      <data key="p_value">{}</data>"#, info.stats.p)?;
        writeln!(out, r#"      <data key="lb">{}</data>"#, info.stats.lb)?;
        writeln!(out, r#"      <data key="ub">{}</data>"#, info.stats.ub)?;
        writeln!(out, r#"    </edge>"#)?;
    }
    writeln!(out, r#"  </graph>"#)?;
    writeln!(out, r#"</graphml>"#)?;
    out.flush()?;
    Ok(())
}

/// Read a GraphML file written by [`write_graphml`] (or any GraphML using
/// the same attribute names). Edge statistics are recomputed from the
/// marginals (`p`, `weight`, `n_docs`), so a graph round-trips exactly.
pub fn read_graphml(path: &Path) -> Result<CoGraph> {
    use quick_xml::events::Event;

    let file = File::open(path)
        .map_err(|e| CoreError::Data(format!("cannot open graphml {}: {e}", path.display())))?;
    let mut reader = quick_xml::Reader::from_reader(BufReader::new(file));
    let mut buf = Vec::new();

    // attr.name by key id, from <key> declarations.
    let mut key_names: BTreeMap<String, String> = BTreeMap::new();

    #[derive(Default)]
    struct PendingNode {
        id: String,
        data: BTreeMap<String, String>,
    }
    #[derive(Default)]
    struct PendingEdge {
        source: String,
        target: String,
        data: BTreeMap<String, String>,
    }

    enum Scope {
        Graph,
        Node(PendingNode),
        Edge(PendingEdge),
    }

    let bad = |what: &str, e: &dyn std::fmt::Display| {
        CoreError::Data(format!("bad graphml {}: {what}: {e}", path.display()))
    };

    let mut scope = Scope::Graph;
    let mut current_data_key: Option<String> = None;
    let mut graph_data: BTreeMap<String, String> = BTreeMap::new();
    let mut raw_nodes: Vec<PendingNode> = Vec::new();
    let mut raw_edges: Vec<PendingEdge> = Vec::new();

    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| bad("xml parse", &e))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let name = e.name().as_ref().to_vec();
                let mut attrs: BTreeMap<String, String> = BTreeMap::new();
                for a in e.attributes() {
                    let a = a.map_err(|e| bad("attribute", &e))?;
                    let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
                    let value = a
                        .unescape_value()
                        .map_err(|e| bad("attribute value", &e))?
                        .into_owned();
                    attrs.insert(key, value);
                }
                match name.as_slice() {
                    b"key" => {
                        if let (Some(id), Some(attr_name)) =
                            (attrs.get("id"), attrs.get("attr.name"))
                        {
                            key_names.insert(id.clone(), attr_name.clone());
                        }
                    }
                    b"node" => {
                        let id = attrs.remove("id").ok_or_else(|| {
                            CoreError::Data(format!(
                                "bad graphml {}: node without id",
                                path.display()
                            ))
                        })?;
                        scope = Scope::Node(PendingNode { id, data: BTreeMap::new() });
                    }
                    b"edge" => {
                        let source = attrs.remove("source").unwrap_or_default();
                        let target = attrs.remove("target").unwrap_or_default();
                        if source.is_empty() || target.is_empty() {
                            return Err(CoreError::Data(format!(
                                "bad graphml {}: edge missing source/target",
                                path.display()
                            )));
                        }
                        scope = Scope::Edge(PendingEdge { source, target, data: BTreeMap::new() });
                    }
                    b"data" => {
                        current_data_key = attrs.remove("key");
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                if let Some(key) = &current_data_key {
                    let value = t.unescape().map_err(|e| bad("text", &e))?.into_owned();
                    let value = value.trim().to_string();
                    if !value.is_empty() {
                        let attr = key_names.get(key).cloned().unwrap_or_else(|| key.clone());
                        match &mut scope {
                            Scope::Graph => {
                                graph_data.insert(attr, value);
                            }
                            Scope::Node(n) => {
                                n.data.insert(attr, value);
                            }
                            Scope::Edge(e) => {
                                e.data.insert(attr, value);
                            }
                        }
                    }
                }
            }
            Event::End(ref e) => match e.name().as_ref() {
                b"node" => {
                    if let Scope::Node(n) = std::mem::replace(&mut scope, Scope::Graph) {
                        raw_nodes.push(n);
                    }
                }
                b"edge" => {
                    if let Scope::Edge(e) = std::mem::replace(&mut scope, Scope::Graph) {
                        raw_edges.push(e);
                    }
                }
                b"data" => {
                    current_data_key = None;
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    let n_docs: u64 = graph_data
        .get("n_docs")
        .ok_or_else(|| {
            CoreError::Data(format!(
                "schema mismatch in {}: graph attribute `n_docs` missing \
                 (expected a graphml written by this toolkit)",
                path.display()
            ))
        })?
        .parse()
        .map_err(|e| bad("n_docs", &e))?;
    let ci_multiplier: f64 = graph_data
        .get("ci_multiplier")
        .map(|s| s.parse::<f64>())
        .transpose()
        .map_err(|e| bad("ci_multiplier", &e))?
        .unwrap_or(DEFAULT_CI_MULTIPLIER);

    let mut graph = CoGraph { nodes: BTreeMap::new(), edges: BTreeMap::new(), n_docs };
    for n in raw_nodes {
        let class = n
            .data
            .get("class")
            .map(|s| s.parse::<PrevalenceClass>())
            .transpose()
            .map_err(CoreError::Data)?
            .unwrap_or(PrevalenceClass::OnlyB);
        let p: u64 = match n.data.get("p") {
            Some(s) => s.parse().map_err(|e| bad("node p", &e))?,
            None => 1,
        };
        let pagerank = n
            .data
            .get("pagerank")
            .map(|s| s.parse::<f64>())
            .transpose()
            .map_err(|e| bad("pagerank", &e))?;
        graph.nodes.insert(n.id, NodeInfo { class, p, pagerank });
    }
    for e in raw_edges {
        let p_ij: u64 = match e.data.get("weight") {
            Some(s) => s.parse().map_err(|err| bad("edge weight", &err))?,
            None => 1,
        };
        let (p_i, p_j) = match (graph.nodes.get(&e.source), graph.nodes.get(&e.target)) {
            (Some(a), Some(b)) => (a.p, b.p),
            _ => {
                return Err(CoreError::Data(format!(
                    "bad graphml {}: edge {} -- {} references unknown node",
                    path.display(),
                    e.source,
                    e.target
                )))
            }
        };
        let stats = edge_stats_with(p_i, p_j, p_ij, n_docs, ci_multiplier);
        let key = crate::conet::edge_key(&e.source, &e.target);
        graph.edges.insert(key, EdgeInfo { p_ij, stats });
    }
    Ok(graph)
}

// ---------------------------------------------------------------------------
// DOT
// ---------------------------------------------------------------------------

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT rendering of a (core) subgraph for external layout tools. Node size
/// hints carry PageRank; colors follow the prevalence class.
pub fn write_dot(path: &Path, graph: &CoGraph) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "graph core {{")?;
    writeln!(out, "  node [style=filled];")?;
    for (name, info) in &graph.nodes {
        let color = match info.class {
            PrevalenceClass::EquallyPrevalent => "orange",
            PrevalenceClass::TypicalA => "green",
            PrevalenceClass::TypicalB => "skyblue",
            PrevalenceClass::OnlyA => "darkgreen",
            PrevalenceClass::OnlyB => "blue",
        };
        let mut attrs = format!("class=\"{}\" fillcolor={color} p={}", info.class.as_str(), info.p);
        if let Some(pr) = info.pagerank {
            attrs.push_str(&format!(" pagerank=\"{pr}\""));
        }
        writeln!(out, "  \"{}\" [{attrs}];", dot_escape(name))?;
    }
    for ((a, b), info) in &graph.edges {
        writeln!(
            out,
            "  \"{}\" -- \"{}\" [weight={}];",
            dot_escape(a),
            dot_escape(b),
            info.p_ij
        )?;
    }
    writeln!(out, "}}")?;
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Misc
// ---------------------------------------------------------------------------

/// SHA-256 digest of a file, hex-encoded. Used for the run manifest.
pub fn file_digest(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    let mut file = File::open(path)?;
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Documents loader for stage intermediates (the schema marker line is
/// validated and skipped by the underlying stream).
pub fn read_documents_jsonl(path: &Path, tag: CorpusTag) -> Result<(Vec<Document>, u64)> {
    crate::ingest::load_documents(path, crate::ingest::InputFormat::Jsonl, tag)
}
