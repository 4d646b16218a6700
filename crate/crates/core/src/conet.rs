//! Condition co-occurrence graph with statistical edge filtering.
//!
//! Nodes are conditions; an edge joins two conditions that appear together
//! in at least one document, weighted by the number of such documents.
//! Each edge carries relative risk and phi-correlation statistics used to
//! discard associations indistinguishable from chance: an edge survives
//! when phi is positive and significant (t-test on N-2 degrees of freedom)
//! and the lower bound of the relative-risk confidence interval stays
//! above 1.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dist::student_t_two_sided_p;
use crate::prevalence::{ClassifiedCondition, PrevalenceClass};

/// Normal quantile for the 99% confidence interval on log RR.
pub const DEFAULT_CI_MULTIPLIER: f64 = 2.56;

/// Significance statistics for one condition pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeStats {
    /// Relative risk: observed co-occurrence over the independence
    /// expectation, `P_ij * N / (P_i * P_j)`.
    pub rr: f64,
    /// Phi correlation of the two per-document indicator variables.
    pub phi: f64,
    /// t statistic for phi on N-2 degrees of freedom.
    pub t: f64,
    /// Two-sided p-value for the t statistic.
    pub p: f64,
    /// Log-scale spread of the RR confidence interval.
    pub sigma: f64,
    /// Confidence-interval bounds on RR.
    pub lb: f64,
    pub ub: f64,
    /// Set when phi is undefined (a condition present in every document);
    /// degenerate edges never pass the filter.
    pub degenerate: bool,
}

/// Compute edge statistics from the marginals of one pair:
/// `p_i`/`p_j` documents mention each condition, `p_ij` mention both,
/// out of `n` documents total. Uses the default 99% CI multiplier.
pub fn edge_stats(p_i: u64, p_j: u64, p_ij: u64, n: u64) -> EdgeStats {
    edge_stats_with(p_i, p_j, p_ij, n, DEFAULT_CI_MULTIPLIER)
}

pub fn edge_stats_with(p_i: u64, p_j: u64, p_ij: u64, n: u64, ci_multiplier: f64) -> EdgeStats {
    debug_assert!(p_ij >= 1 && p_ij <= p_i.min(p_j) && p_i.max(p_j) <= n);
    let nf = n as f64;
    let pi = p_i as f64;
    let pj = p_j as f64;
    let pij = p_ij as f64;

    let rr = pij * nf / (pi * pj);
    let sigma = (1.0 / pij + 1.0 / (pi * pj) - 1.0 / nf - 1.0 / (nf * nf)).sqrt();
    let lb = rr * (-ci_multiplier * sigma).exp();
    let ub = rr * (ci_multiplier * sigma).exp();

    if p_i == n || p_j == n {
        // A condition present in every document: the phi denominator is
        // zero and the correlation is undefined.
        return EdgeStats { rr, phi: 0.0, t: 0.0, p: 1.0, sigma, lb, ub, degenerate: true };
    }

    let denom = (pi * pj * (nf - pi) * (nf - pj)).sqrt();
    let phi = (pij * nf - pi * pj) / denom;
    let (t, p) = if phi * phi >= 1.0 {
        (f64::INFINITY.copysign(phi), 0.0)
    } else if phi == 0.0 {
        (0.0, 1.0)
    } else {
        let t = phi * (nf - 2.0).sqrt() / (1.0 - phi * phi).sqrt();
        (t, student_t_two_sided_p(t, nf - 2.0))
    };
    EdgeStats { rr, phi, t, p, sigma, lb, ub, degenerate: false }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub class: PrevalenceClass,
    /// Number of documents mentioning this condition.
    pub p: u64,
    /// Node centrality, filled in by the metrics pass.
    pub pagerank: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeInfo {
    /// Number of documents mentioning both conditions.
    pub p_ij: u64,
    pub stats: EdgeStats,
}

/// Unordered condition pair, stored with the lexicographically smaller
/// condition first so the edge set is canonical.
pub type EdgeKey = (String, String);

pub fn edge_key(a: &str, b: &str) -> EdgeKey {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Condition co-occurrence graph over one corpus.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoGraph {
    pub nodes: BTreeMap<String, NodeInfo>,
    pub edges: BTreeMap<EdgeKey, EdgeInfo>,
    /// Total number of documents behind the graph (including documents
    /// that mention no condition, when the caller includes them).
    pub n_docs: u64,
}

impl CoGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> BTreeMap<&str, usize> {
        let mut deg: BTreeMap<&str, usize> = BTreeMap::new();
        for n in self.nodes.keys() {
            deg.insert(n.as_str(), 0);
        }
        for (a, b) in self.edges.keys() {
            *deg.get_mut(a.as_str()).unwrap() += 1;
            *deg.get_mut(b.as_str()).unwrap() += 1;
        }
        deg
    }

    /// Adjacency with co-occurrence counts as weights.
    pub fn adjacency(&self) -> BTreeMap<&str, Vec<(&str, u64)>> {
        let mut adj: BTreeMap<&str, Vec<(&str, u64)>> = BTreeMap::new();
        for n in self.nodes.keys() {
            adj.insert(n.as_str(), Vec::new());
        }
        for ((a, b), info) in &self.edges {
            adj.get_mut(a.as_str()).unwrap().push((b.as_str(), info.p_ij));
            adj.get_mut(b.as_str()).unwrap().push((a.as_str(), info.p_ij));
        }
        adj
    }
}

/// Build the co-occurrence graph from per-document condition sets.
///
/// `doc_conditions` must contain one entry per document of the corpus —
/// including documents whose set is empty — because its size defines `N`,
/// the denominator of every edge statistic. Classes are looked up in
/// `classes`; a condition missing from the table is treated as present in
/// this corpus only (the network corpus is corpus B by convention).
pub fn build_cooccurrence(
    doc_conditions: &BTreeMap<String, BTreeSet<String>>,
    classes: &[ClassifiedCondition],
) -> CoGraph {
    build_cooccurrence_with(doc_conditions, classes, DEFAULT_CI_MULTIPLIER)
}

pub fn build_cooccurrence_with(
    doc_conditions: &BTreeMap<String, BTreeSet<String>>,
    classes: &[ClassifiedCondition],
    ci_multiplier: f64,
) -> CoGraph {
    let class_by_cond: BTreeMap<&str, PrevalenceClass> = classes
        .iter()
        .map(|c| (c.condition.as_str(), c.class))
        .collect();

    let n_docs = doc_conditions.len() as u64;
    let mut node_counts: BTreeMap<&str, u64> = BTreeMap::new();
    let mut pair_counts: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for conditions in doc_conditions.values() {
        let list: Vec<&str> = conditions.iter().map(|c| c.as_str()).collect();
        for (idx, &c) in list.iter().enumerate() {
            *node_counts.entry(c).or_insert(0) += 1;
            for &d in &list[idx + 1..] {
                *pair_counts.entry((c, d)).or_insert(0) += 1;
            }
        }
    }

    let nodes: BTreeMap<String, NodeInfo> = node_counts
        .iter()
        .map(|(&cond, &p)| {
            let class = class_by_cond
                .get(cond)
                .copied()
                .unwrap_or(PrevalenceClass::OnlyB);
            (cond.to_string(), NodeInfo { class, p, pagerank: None })
        })
        .collect();

    let edges: BTreeMap<EdgeKey, EdgeInfo> = pair_counts
        .into_iter()
        .map(|((a, b), p_ij)| {
            let stats =
                edge_stats_with(node_counts[a], node_counts[b], p_ij, n_docs, ci_multiplier);
            ((a.to_string(), b.to_string()), EdgeInfo { p_ij, stats })
        })
        .collect();

    CoGraph { nodes, edges, n_docs }
}

/// Edge-filter knobs: significance level for phi's p-value and whether the
/// RR lower-bound condition is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeFilter {
    pub alpha: f64,
    pub require_rr_lb: bool,
}

impl Default for EdgeFilter {
    fn default() -> Self {
        EdgeFilter { alpha: 0.01, require_rr_lb: true }
    }
}

impl EdgeFilter {
    pub fn keeps(&self, stats: &EdgeStats) -> bool {
        !stats.degenerate
            && stats.phi > 0.0
            && stats.p < self.alpha
            && (!self.require_rr_lb || stats.lb > 1.0)
    }
}

/// Drop edges that fail the significance filter. Nodes are untouched.
pub fn filter_edges(graph: &CoGraph, filter: &EdgeFilter) -> CoGraph {
    CoGraph {
        nodes: graph.nodes.clone(),
        edges: graph
            .edges
            .iter()
            .filter(|(_, info)| filter.keeps(&info.stats))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
        n_docs: graph.n_docs,
    }
}

/// Drop nodes that have no incident edges.
pub fn remove_singletons(graph: &CoGraph) -> CoGraph {
    let mut connected: BTreeSet<&str> = BTreeSet::new();
    for (a, b) in graph.edges.keys() {
        connected.insert(a.as_str());
        connected.insert(b.as_str());
    }
    CoGraph {
        nodes: graph
            .nodes
            .iter()
            .filter(|(n, _)| connected.contains(n.as_str()))
            .map(|(n, i)| (n.clone(), i.clone()))
            .collect(),
        edges: graph.edges.clone(),
        n_docs: graph.n_docs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc_sets(docs: &[&[&str]]) -> BTreeMap<String, BTreeSet<String>> {
        docs.iter()
            .enumerate()
            .map(|(i, conds)| {
                (format!("d{i:03}"), conds.iter().map(|c| c.to_string()).collect())
            })
            .collect()
    }

    /// Brute-force 2x2 contingency oracle: rr and phi from the four cells.
    fn contingency_oracle(p_i: u64, p_j: u64, p_ij: u64, n: u64) -> (f64, f64) {
        let a = p_ij as f64;
        let b = (p_i - p_ij) as f64;
        let c = (p_j - p_ij) as f64;
        let d = n as f64 - p_i as f64 - p_j as f64 + p_ij as f64;
        let rr = a * (n as f64) / ((a + b) * (a + c));
        let phi = (a * d - b * c) / ((a + b) * (c + d) * (a + c) * (b + d)).sqrt();
        (rr, phi)
    }

    #[test]
    fn stats_exact_independence() {
        // N=100, P_i=10, P_j=10, P_ij=1: P_ij*N == P_i*P_j exactly.
        let s = edge_stats(10, 10, 1, 100);
        assert_eq!(s.rr, 1.0);
        assert_eq!(s.phi, 0.0);
        assert_eq!(s.t, 0.0);
        assert_eq!(s.p, 1.0);
        assert!(s.lb < 1.0);
        assert!(!s.degenerate);
    }

    #[test]
    fn stats_hand_computed_case() {
        // N=10, P_i=4, P_j=5, P_ij=3.
        let s = edge_stats(4, 5, 3, 10);
        assert!((s.rr - 1.5).abs() < 1e-12);
        assert!((s.phi - 10.0 / 600.0_f64.sqrt()).abs() < 1e-12);
        assert!((s.t - 1.2649110640673518).abs() < 1e-10);
        // Two-sided tail on 8 dof (reference value from SciPy).
        assert!((s.p - 0.24150397191306).abs() < 1e-10);
        let sigma = (1.0 / 3.0 + 1.0 / 20.0 - 1.0 / 10.0 - 1.0 / 100.0_f64).sqrt();
        assert!((s.sigma - sigma).abs() < 1e-12);
        assert!((s.sigma - 0.52281).abs() < 1e-5);
        assert!((s.lb - 1.5 * (-2.56 * sigma).exp()).abs() < 1e-12);
        assert!((s.lb - 0.3933).abs() < 1e-4);
    }

    #[test]
    fn stats_match_contingency_oracle_small_exhaustive() {
        for n in 2..=12u64 {
            for p_i in 1..n {
                for p_j in 1..n {
                    for p_ij in 1..=p_i.min(p_j) {
                        let s = edge_stats(p_i, p_j, p_ij, n);
                        let (rr, phi) = contingency_oracle(p_i, p_j, p_ij, n);
                        assert!(
                            (s.rr - rr).abs() <= 1e-12 * rr.abs().max(1.0),
                            "rr mismatch at ({p_i},{p_j},{p_ij},{n})"
                        );
                        assert!(
                            (s.phi - phi).abs() <= 1e-12 * phi.abs().max(1.0),
                            "phi mismatch at ({p_i},{p_j},{p_ij},{n})"
                        );
                        // Exact sign agreement with the integer numerator.
                        let num = (p_ij * n) as i128 - (p_i * p_j) as i128;
                        assert_eq!(s.phi > 0.0, num > 0, "phi sign at ({p_i},{p_j},{p_ij},{n})");
                        assert_eq!(s.rr > 1.0, num > 0, "rr sign at ({p_i},{p_j},{p_ij},{n})");
                        assert_eq!(s.phi < 0.0, num < 0);
                        assert!(s.lb <= s.rr && s.rr <= s.ub);
                    }
                }
            }
        }
    }

    #[test]
    fn stats_degenerate_when_condition_everywhere() {
        let s = edge_stats(10, 4, 3, 10);
        assert!(s.degenerate);
        assert!(!EdgeFilter::default().keeps(&s));
    }

    #[test]
    fn stats_perfect_correlation_p_zero() {
        // N=2, both conditions in exactly the same single document.
        let s = edge_stats(1, 1, 1, 2);
        assert_eq!(s.phi, 1.0);
        assert_eq!(s.p, 0.0);
        assert!(s.t.is_infinite());
    }

    #[test]
    fn p_monotone_decreasing_in_phi() {
        let n = 200u64;
        let mut last_p = f64::INFINITY;
        let mut last_phi = -1.0;
        for p_ij in 1..=30 {
            let s = edge_stats(30, 30, p_ij, n);
            if s.phi > 0.0 {
                assert!(s.phi > last_phi);
                assert!(s.p < last_p, "p not decreasing at p_ij={p_ij}");
                last_p = s.p;
                last_phi = s.phi;
            }
        }
    }

    #[test]
    fn build_counts_pairs_by_hand() {
        let docs = doc_sets(&[&["a", "b", "c"], &["a", "b"]]);
        let g = build_cooccurrence(&docs, &[]);
        assert_eq!(g.n_docs, 2);
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.edges[&edge_key("a", "b")].p_ij, 2);
        assert_eq!(g.edges[&edge_key("a", "c")].p_ij, 1);
        assert_eq!(g.edges[&edge_key("b", "c")].p_ij, 1);
        assert_eq!(g.nodes["a"].p, 2);
        assert_eq!(g.nodes["c"].p, 1);
    }

    #[test]
    fn build_single_condition_docs_have_no_edges() {
        let docs = doc_sets(&[&["a"], &["b"], &["a"]]);
        let g = build_cooccurrence(&docs, &[]);
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.n_edges(), 0);
    }

    #[test]
    fn build_no_self_loops() {
        // Duplicate mentions collapse at the set level upstream; a doc's set
        // never yields a (c, c) pair.
        let docs = doc_sets(&[&["a"]]);
        let g = build_cooccurrence(&docs, &[]);
        assert_eq!(g.n_nodes(), 1);
        assert_eq!(g.n_edges(), 0);
    }

    #[test]
    fn build_respects_class_table_and_falls_back() {
        let docs = doc_sets(&[&["a", "b"]]);
        let classes = vec![ClassifiedCondition {
            condition: "a".into(),
            rank_a: Some(1.0),
            rank_b: Some(1.0),
            residual: Some(0.0),
            class: PrevalenceClass::EquallyPrevalent,
        }];
        let g = build_cooccurrence(&docs, &classes);
        assert_eq!(g.nodes["a"].class, PrevalenceClass::EquallyPrevalent);
        assert_eq!(g.nodes["b"].class, PrevalenceClass::OnlyB);
    }

    #[test]
    fn build_invariant_pij_bounded_by_marginals() {
        let docs = doc_sets(&[
            &["a", "b", "c"],
            &["a", "b"],
            &["b", "c"],
            &["a"],
            &[],
        ]);
        let g = build_cooccurrence(&docs, &[]);
        assert_eq!(g.n_docs, 5);
        for ((a, b), info) in &g.edges {
            assert!(info.p_ij <= g.nodes[a].p.min(g.nodes[b].p));
            assert!(g.nodes[a].p <= g.n_docs);
        }
    }

    #[test]
    fn filter_drops_independence_and_weak_edges() {
        // Independence: rr=1, phi=0 -> removed.
        let s = edge_stats(10, 10, 1, 100);
        assert!(!EdgeFilter::default().keeps(&s));

        // Positive phi but lb < 1 (the N=10 hand case) -> removed.
        let s = edge_stats(4, 5, 3, 10);
        assert!(s.phi > 0.0);
        assert!(s.lb < 1.0);
        assert!(!EdgeFilter::default().keeps(&s));

        // Strong planted association -> retained.
        let s = edge_stats(20, 20, 15, 1000);
        assert!((s.rr - 37.5).abs() < 1e-12);
        assert!((s.phi - 0.7448979591836735).abs() < 1e-12);
        assert!(s.p < 0.01);
        assert!((s.lb - 19.22020201121528).abs() < 1e-9);
        assert!(EdgeFilter::default().keeps(&s));
    }

    #[test]
    fn filter_is_subset_and_idempotent() {
        let docs = doc_sets(&[
            &["a", "b"],
            &["a", "b"],
            &["a", "b"],
            &["c", "d"],
            &["a", "c"],
            &["b"],
            &[],
            &[],
            &[],
            &[],
        ]);
        let g = build_cooccurrence(&docs, &[]);
        let f1 = filter_edges(&g, &EdgeFilter::default());
        let f2 = filter_edges(&f1, &EdgeFilter::default());
        assert_eq!(f1, f2);
        assert!(f1.edges.keys().all(|k| g.edges.contains_key(k)));
        assert_eq!(f1.nodes, g.nodes);
    }

    #[test]
    fn no_rr_filter_keeps_significant_positive_phi() {
        let s = edge_stats(4, 5, 3, 10);
        let filter = EdgeFilter { alpha: 1.0, require_rr_lb: false };
        assert!(filter.keeps(&s));
        assert!(!EdgeFilter::default().keeps(&s));
    }

    #[test]
    fn singleton_removal() {
        let docs = doc_sets(&[&["a", "b"], &["c"]]);
        let g = build_cooccurrence(&docs, &[]);
        assert_eq!(g.n_nodes(), 3);
        let pruned = remove_singletons(&g);
        assert_eq!(pruned.n_nodes(), 2);
        assert!(!pruned.nodes.contains_key("c"));
        assert_eq!(pruned.n_edges(), 1);
        // Identity on a graph without isolates.
        assert_eq!(remove_singletons(&pruned), pruned);
    }
}
