//! Graph analytics over the filtered co-occurrence network: PageRank
//! centrality, per-class centrality averages, categorical assortativity,
//! connected components, and the high-degree display core.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::conet::CoGraph;
use crate::error::{CoreError, Result};
use crate::prevalence::PrevalenceClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankParams {
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Use co-occurrence counts as edge weights; unweighted otherwise.
    pub weighted: bool,
}

impl Default for PageRankParams {
    fn default() -> Self {
        PageRankParams { damping: 0.85, tol: 1e-9, max_iters: 200, weighted: true }
    }
}

#[derive(Debug, Clone)]
pub struct PageRankResult {
    pub scores: BTreeMap<String, f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration on the edge-weight-normalized transition matrix.
///
/// Undirected edges act as two directed edges; teleport is uniform, and the
/// mass of isolated (dangling) nodes is redistributed uniformly. Stops when
/// the L1 change drops below `tol`; scores always sum to 1.
pub fn pagerank(graph: &CoGraph, params: &PageRankParams) -> Result<PageRankResult> {
    if graph.nodes.is_empty() {
        return Err(CoreError::Data("pagerank needs a non-empty graph".into()));
    }
    let names: Vec<&str> = graph.nodes.keys().map(|s| s.as_str()).collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let n = names.len();

    // Out-neighbour lists with weights, plus per-node total outgoing weight.
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for ((a, b), info) in &graph.edges {
        let w = if params.weighted { info.p_ij as f64 } else { 1.0 };
        let ia = index[a.as_str()];
        let ib = index[b.as_str()];
        adj[ia].push((ib, w));
        adj[ib].push((ia, w));
    }
    let out_weight: Vec<f64> = adj
        .iter()
        .map(|nbrs| nbrs.iter().map(|(_, w)| w).sum())
        .collect();

    let nf = n as f64;
    let d = params.damping;
    let mut x = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < params.max_iters {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&i| out_weight[i] == 0.0).map(|i| x[i]).sum();
        let base = (1.0 - d) / nf + d * dangling / nf;
        next.iter_mut().for_each(|v| *v = base);
        for i in 0..n {
            if out_weight[i] > 0.0 {
                let share = d * x[i] / out_weight[i];
                for &(j, w) in &adj[i] {
                    next[j] += share * w;
                }
            }
        }
        let delta: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if delta < params.tol {
            converged = true;
            break;
        }
    }

    // Normalize away accumulated rounding so the scores sum to exactly 1.
    let total: f64 = x.iter().sum();
    let scores = names
        .iter()
        .zip(&x)
        .map(|(&name, &score)| (name.to_string(), score / total))
        .collect();
    Ok(PageRankResult { scores, iterations, converged })
}

/// Arithmetic mean of PageRank per prevalence class; classes without nodes
/// are omitted.
pub fn class_average_pagerank(
    scores: &BTreeMap<String, f64>,
    graph: &CoGraph,
) -> BTreeMap<PrevalenceClass, f64> {
    let mut sums: BTreeMap<PrevalenceClass, (f64, usize)> = BTreeMap::new();
    for (name, info) in &graph.nodes {
        if let Some(&score) = scores.get(name) {
            let entry = sums.entry(info.class).or_insert((0.0, 0));
            entry.0 += score;
            entry.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(class, (sum, count))| (class, sum / count as f64))
        .collect()
}

/// Newman's categorical assortativity over the unweighted edge mixing
/// matrix: `r = (sum_i e_ii - sum_i a_i b_i) / (1 - sum_i a_i b_i)`.
/// Returns `None` when every node shares one class (undefined denominator)
/// or the graph has no edges.
pub fn attribute_assortativity(graph: &CoGraph) -> Option<f64> {
    if graph.edges.is_empty() {
        return None;
    }
    // Mixing matrix over class pairs, accumulated as integer counts (each
    // undirected edge contributes one count per direction) and normalized
    // once at the end, so the perfectly (dis)assortative cases come out
    // exact.
    let mut e: BTreeMap<(PrevalenceClass, PrevalenceClass), u64> = BTreeMap::new();
    for (a, b) in graph.edges.keys() {
        let ca = graph.nodes[a.as_str()].class;
        let cb = graph.nodes[b.as_str()].class;
        *e.entry((ca, cb)).or_insert(0) += 1;
        *e.entry((cb, ca)).or_insert(0) += 1;
    }
    let m2 = (2 * graph.edges.len()) as f64;
    let mut trace_count = 0u64;
    let mut row_counts: BTreeMap<PrevalenceClass, u64> = BTreeMap::new();
    for (&(ca, cb), &v) in &e {
        if ca == cb {
            trace_count += v;
        }
        *row_counts.entry(ca).or_insert(0) += v;
    }
    let trace = trace_count as f64 / m2;
    let sum_ab: f64 = row_counts
        .values()
        .map(|&c| {
            let a = c as f64 / m2;
            a * a
        })
        .sum();
    if sum_ab >= 1.0 {
        return None;
    }
    Some((trace - sum_ab) / (1.0 - sum_ab))
}

/// Undirected connected components, largest first; ties broken by the
/// smallest member condition.
pub fn connected_components(graph: &CoGraph) -> Vec<BTreeSet<String>> {
    let adj = graph.adjacency();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut components = Vec::new();
    for start in graph.nodes.keys() {
        if seen.contains(start.as_str()) {
            continue;
        }
        let mut component = BTreeSet::new();
        let mut queue = VecDeque::from([start.as_str()]);
        seen.insert(start.as_str());
        while let Some(node) = queue.pop_front() {
            component.insert(node.to_string());
            for &(next, _) in &adj[node] {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        components.push(component);
    }
    components.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then_with(|| a.iter().next().cmp(&b.iter().next()))
    });
    components
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoreMode {
    /// Single pass: keep nodes whose degree in the input graph is at least
    /// the threshold, plus induced edges.
    OneShot,
    /// Classic iterative k-core: peel until every remaining node has degree
    /// at least the threshold within the remaining subgraph.
    KCore,
}

/// Extract the high-degree display core as an induced subgraph.
pub fn extract_core(graph: &CoGraph, min_degree: usize, mode: CoreMode) -> CoGraph {
    let mut keep: BTreeSet<String> = {
        let deg = graph.degrees();
        graph
            .nodes
            .keys()
            .filter(|n| deg[n.as_str()] >= min_degree)
            .cloned()
            .collect()
    };
    if mode == CoreMode::KCore {
        loop {
            let mut deg: BTreeMap<&str, usize> = keep.iter().map(|n| (n.as_str(), 0)).collect();
            for (a, b) in graph.edges.keys() {
                if keep.contains(a) && keep.contains(b) {
                    *deg.get_mut(a.as_str()).unwrap() += 1;
                    *deg.get_mut(b.as_str()).unwrap() += 1;
                }
            }
            let drop: Vec<String> = deg
                .iter()
                .filter(|(_, &d)| d < min_degree)
                .map(|(n, _)| n.to_string())
                .collect();
            if drop.is_empty() {
                break;
            }
            for n in drop {
                keep.remove(&n);
            }
        }
    }
    CoGraph {
        nodes: graph
            .nodes
            .iter()
            .filter(|(n, _)| keep.contains(n.as_str()))
            .map(|(n, i)| (n.clone(), i.clone()))
            .collect(),
        edges: graph
            .edges
            .iter()
            .filter(|((a, b), _)| keep.contains(a.as_str()) && keep.contains(b.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
        n_docs: graph.n_docs,
    }
}

/// Full analytics report over one graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub pagerank: BTreeMap<String, f64>,
    pub pagerank_converged: bool,
    pub pagerank_weighted: bool,
    pub damping: f64,
    pub class_avg_pagerank: BTreeMap<PrevalenceClass, f64>,
    /// `None` when undefined (single class or no edges).
    pub assortativity: Option<f64>,
    pub components: Vec<BTreeSet<String>>,
    pub giant_component_size: usize,
    pub core: BTreeSet<String>,
    pub core_min_degree: usize,
}

pub fn compute_metrics(
    graph: &CoGraph,
    pr_params: &PageRankParams,
    core_min_degree: usize,
    core_mode: CoreMode,
) -> Result<MetricsReport> {
    let pr = pagerank(graph, pr_params)?;
    let class_avg = class_average_pagerank(&pr.scores, graph);
    let assortativity = attribute_assortativity(graph);
    let components = connected_components(graph);
    let giant = components.first().map(|c| c.len()).unwrap_or(0);
    let core = extract_core(graph, core_min_degree, core_mode);
    Ok(MetricsReport {
        n_nodes: graph.n_nodes(),
        n_edges: graph.n_edges(),
        pagerank: pr.scores,
        pagerank_converged: pr.converged,
        pagerank_weighted: pr_params.weighted,
        damping: pr_params.damping,
        class_avg_pagerank: class_avg,
        assortativity,
        components,
        giant_component_size: giant,
        core: core.nodes.keys().cloned().collect(),
        core_min_degree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conet::{edge_key, edge_stats, EdgeInfo, NodeInfo};

    /// Build a test graph from plain edges (unit co-occurrence weights
    /// unless given) and per-node classes.
    fn graph(nodes: &[(&str, PrevalenceClass)], edges: &[(&str, &str, u64)]) -> CoGraph {
        let n_docs = 1000;
        let mut g = CoGraph { nodes: BTreeMap::new(), edges: BTreeMap::new(), n_docs };
        for &(name, class) in nodes {
            g.nodes.insert(name.to_string(), NodeInfo { class, p: 10, pagerank: None });
        }
        for &(a, b, w) in edges {
            g.edges.insert(
                edge_key(a, b),
                EdgeInfo { p_ij: w, stats: edge_stats(10, 10, w.min(10).max(1), n_docs) },
            );
        }
        g
    }

    const EP: PrevalenceClass = PrevalenceClass::EquallyPrevalent;
    const TA: PrevalenceClass = PrevalenceClass::TypicalA;
    const TB: PrevalenceClass = PrevalenceClass::TypicalB;

    /// Dense power-iteration oracle, independent of the sparse routine.
    fn dense_pagerank_oracle(g: &CoGraph, damping: f64, weighted: bool) -> BTreeMap<String, f64> {
        let names: Vec<&String> = g.nodes.keys().collect();
        let n = names.len();
        let idx: BTreeMap<&str, usize> =
            names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut w = vec![vec![0.0; n]; n];
        for ((a, b), info) in &g.edges {
            let weight = if weighted { info.p_ij as f64 } else { 1.0 };
            w[idx[a.as_str()]][idx[b.as_str()]] = weight;
            w[idx[b.as_str()]][idx[a.as_str()]] = weight;
        }
        let mut t = vec![vec![0.0; n]; n];
        for i in 0..n {
            let row: f64 = w[i].iter().sum();
            for j in 0..n {
                t[i][j] = if row > 0.0 { w[i][j] / row } else { 1.0 / n as f64 };
            }
        }
        let nf = n as f64;
        let mut x = vec![1.0 / nf; n];
        for _ in 0..20_000 {
            let mut next = vec![(1.0 - damping) / nf; n];
            for i in 0..n {
                for j in 0..n {
                    next[j] += damping * x[i] * t[i][j];
                }
            }
            let delta: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            x = next;
            if delta < 1e-13 {
                break;
            }
        }
        names.iter().zip(x).map(|(n, s)| (n.to_string(), s)).collect()
    }

    #[test]
    fn pagerank_single_node() {
        let g = graph(&[("a", EP)], &[]);
        let pr = pagerank(&g, &PageRankParams::default()).unwrap();
        assert!((pr.scores["a"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pagerank_triangle_uniform() {
        let g = graph(&[("a", EP), ("b", EP), ("c", EP)], &[("a", "b", 1), ("b", "c", 1), ("a", "c", 1)]);
        let pr = pagerank(&g, &PageRankParams::default()).unwrap();
        for v in pr.scores.values() {
            assert!((v - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pagerank_path_matches_closed_form_and_oracle() {
        let g = graph(&[("a", EP), ("b", EP), ("c", EP)], &[("a", "b", 1), ("b", "c", 1)]);
        let params = PageRankParams { tol: 1e-12, ..Default::default() };
        let pr = pagerank(&g, &params).unwrap();
        // Closed form for the 3-path at damping 0.85.
        assert!((pr.scores["b"] - 0.135 / 0.2775).abs() < 1e-9);
        assert!((pr.scores["a"] - 0.25675675675675674).abs() < 1e-9);
        assert!((pr.scores["a"] - pr.scores["c"]).abs() < 1e-12);
        assert!(pr.scores["b"] > pr.scores["a"]);

        let oracle = dense_pagerank_oracle(&g, 0.85, true);
        for (n, s) in &pr.scores {
            assert!((s - oracle[n]).abs() < 1e-10);
        }
    }

    #[test]
    fn pagerank_sums_to_one_with_dangling_nodes() {
        let g = graph(
            &[("a", EP), ("b", EP), ("c", EP), ("isolated", TB)],
            &[("a", "b", 3), ("b", "c", 1)],
        );
        let pr = pagerank(&g, &PageRankParams::default()).unwrap();
        let total: f64 = pr.scores.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(pr.converged);
        assert!(pr.scores["isolated"] > 0.0);
    }

    #[test]
    fn pagerank_weights_matter() {
        // b-c carries 9x the weight of a-b, pulling mass toward c.
        let g = graph(&[("a", EP), ("b", EP), ("c", EP)], &[("a", "b", 1), ("b", "c", 9)]);
        let weighted = pagerank(&g, &PageRankParams::default()).unwrap();
        let unweighted =
            pagerank(&g, &PageRankParams { weighted: false, ..Default::default() }).unwrap();
        assert!(weighted.scores["c"] > unweighted.scores["c"]);
        assert!((unweighted.scores["a"] - unweighted.scores["c"]).abs() < 1e-12);

        let oracle = dense_pagerank_oracle(&g, 0.85, true);
        for (n, s) in &weighted.scores {
            assert!((s - oracle[n]).abs() < 1e-8);
        }
    }

    #[test]
    fn class_average_pagerank_by_hand() {
        // Two disjoint symmetric pairs; all scores 1/4 by symmetry.
        let g = graph(
            &[("a", EP), ("b", EP), ("c", TA), ("d", TA)],
            &[("a", "b", 1), ("c", "d", 1)],
        );
        let pr = pagerank(&g, &PageRankParams::default()).unwrap();
        let avg = class_average_pagerank(&pr.scores, &g);
        assert!((avg[&EP] - 0.25).abs() < 1e-9);
        assert!((avg[&TA] - 0.25).abs() < 1e-9);
        assert_eq!(avg.len(), 2);

        // All nodes one class: mean is 1/n.
        let g = graph(&[("a", EP), ("b", EP)], &[("a", "b", 1)]);
        let pr = pagerank(&g, &PageRankParams::default()).unwrap();
        let avg = class_average_pagerank(&pr.scores, &g);
        assert!((avg[&EP] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn assortativity_same_class_cliques() {
        let g = graph(
            &[("a", EP), ("b", EP), ("c", EP), ("x", TA), ("y", TA), ("z", TA)],
            &[
                ("a", "b", 1), ("b", "c", 1), ("a", "c", 1),
                ("x", "y", 1), ("y", "z", 1), ("x", "z", 1),
            ],
        );
        assert_eq!(attribute_assortativity(&g), Some(1.0));
    }

    #[test]
    fn assortativity_complete_bipartite() {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let left = ["l1", "l2", "l3"];
        let right = ["r1", "r2"];
        for l in left {
            nodes.push((l, TA));
            for r in right {
                edges.push((l, r, 1));
            }
        }
        for r in right {
            nodes.push((r, TB));
        }
        let g = graph(&nodes, &edges);
        assert_eq!(attribute_assortativity(&g), Some(-1.0));
    }

    #[test]
    fn assortativity_mixed_fixture_hand_mixing_matrix() {
        // Classes {1,2,3}=EP, {4,5,6}=TA; 2 within-EP edges, 2 within-TA
        // edges, 1 cross edge. e_EPEP = e_TATA = 0.4, e_cross = 0.1 each
        // direction; a = (0.5, 0.5); r = (0.8 - 0.5) / (1 - 0.5) = 0.6.
        let g = graph(
            &[("n1", EP), ("n2", EP), ("n3", EP), ("n4", TA), ("n5", TA), ("n6", TA)],
            &[("n1", "n2", 1), ("n2", "n3", 1), ("n4", "n5", 1), ("n5", "n6", 1), ("n3", "n4", 1)],
        );
        let r = attribute_assortativity(&g).unwrap();
        assert!((r - 0.6).abs() < 1e-12);
    }

    #[test]
    fn assortativity_single_class_undefined() {
        let g = graph(&[("a", EP), ("b", EP)], &[("a", "b", 1)]);
        assert_eq!(attribute_assortativity(&g), None);
        let empty = graph(&[("a", EP)], &[]);
        assert_eq!(attribute_assortativity(&empty), None);
    }

    #[test]
    fn assortativity_invariant_under_class_relabeling() {
        let build = |c1: PrevalenceClass, c2: PrevalenceClass| {
            graph(
                &[("a", c1), ("b", c1), ("c", c2), ("d", c2), ("e", c1)],
                &[("a", "b", 1), ("b", "c", 1), ("c", "d", 1), ("d", "e", 1), ("a", "e", 1)],
            )
        };
        let r1 = attribute_assortativity(&build(EP, TA)).unwrap();
        let r2 = attribute_assortativity(&build(TB, PrevalenceClass::OnlyA)).unwrap();
        assert!((r1 - r2).abs() < 1e-12);
    }

    #[test]
    fn components_ordering_and_partition() {
        assert!(connected_components(&graph(&[], &[])).is_empty());

        let g = graph(
            &[("a", EP), ("b", EP), ("c", EP), ("x", EP), ("y", EP), ("z", EP), ("solo", EP)],
            &[("a", "b", 1), ("b", "c", 1), ("x", "y", 1), ("y", "z", 1)],
        );
        let comps = connected_components(&g);
        assert_eq!(comps.len(), 3);
        assert_eq!(comps[0].len(), 3);
        assert_eq!(comps[1].len(), 3);
        // Tie broken by smallest member: {a,b,c} before {x,y,z}.
        assert!(comps[0].contains("a"));
        assert!(comps[1].contains("x"));
        assert_eq!(comps[2].len(), 1);
        let total: usize = comps.iter().map(|c| c.len()).sum();
        assert_eq!(total, g.n_nodes());
    }

    #[test]
    fn core_star_and_clique() {
        // Star with 6 leaves: only the hub has degree >= 5.
        let leaves = ["l1", "l2", "l3", "l4", "l5", "l6"];
        let mut nodes = vec![("hub", EP)];
        let mut edges = Vec::new();
        for l in leaves {
            nodes.push((l, EP));
            edges.push(("hub", l, 1));
        }
        let g = graph(&nodes, &edges);
        let core = extract_core(&g, 5, CoreMode::OneShot);
        assert_eq!(core.nodes.keys().collect::<Vec<_>>(), ["hub"]);
        assert_eq!(core.n_edges(), 0);

        // 6-clique: everyone has degree 5.
        let names = ["a", "b", "c", "d", "e", "f"];
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (i, n) in names.iter().enumerate() {
            nodes.push((*n, EP));
            for m in &names[i + 1..] {
                edges.push((*n, *m, 1));
            }
        }
        let g = graph(&nodes, &edges);
        let core = extract_core(&g, 5, CoreMode::OneShot);
        assert_eq!(core.n_nodes(), 6);
        assert_eq!(core.n_edges(), 15);
    }

    #[test]
    fn core_degree_fixture() {
        // Degrees: hub=6, u=5, v=5, w=3, x=2, y=2, z=1 -> threshold 5 keeps 3.
        let g = graph(
            &[("hub", EP), ("u", EP), ("v", EP), ("w", EP), ("x", EP), ("y", EP), ("z", EP)],
            &[
                ("hub", "u", 1), ("hub", "v", 1), ("hub", "w", 1), ("hub", "x", 1),
                ("hub", "y", 1), ("hub", "z", 1),
                ("u", "v", 1), ("u", "w", 1), ("u", "x", 1), ("u", "y", 1),
                ("v", "w", 1),
                // v needs degree 5: add two more
                ("v", "x", 1), ("v", "y", 1),
            ],
        );
        let deg = g.degrees();
        assert_eq!(deg["hub"], 6);
        assert_eq!(deg["u"], 5);
        assert_eq!(deg["v"], 5);
        let core = extract_core(&g, 5, CoreMode::OneShot);
        assert_eq!(core.n_nodes(), 3);
        assert!(core.nodes.contains_key("hub") && core.nodes.contains_key("u"));
    }

    #[test]
    fn one_shot_core_differs_from_kcore() {
        // Path of high-degree stars: one-shot keeps hubs whose original
        // degree qualifies even if the induced degree drops; k-core peels.
        let g = graph(
            &[
                ("h1", EP), ("h2", EP),
                ("a1", EP), ("a2", EP), ("a3", EP), ("a4", EP),
                ("b1", EP), ("b2", EP), ("b3", EP), ("b4", EP),
            ],
            &[
                ("h1", "a1", 1), ("h1", "a2", 1), ("h1", "a3", 1), ("h1", "a4", 1), ("h1", "h2", 1),
                ("h2", "b1", 1), ("h2", "b2", 1), ("h2", "b3", 1), ("h2", "b4", 1),
            ],
        );
        let one_shot = extract_core(&g, 5, CoreMode::OneShot);
        assert_eq!(one_shot.n_nodes(), 2); // h1 (deg 5) and h2 (deg 5)
        let kcore = extract_core(&g, 5, CoreMode::KCore);
        assert_eq!(kcore.n_nodes(), 0); // induced degrees collapse
    }

    #[test]
    fn metrics_report_consistency() {
        let g = graph(
            &[("a", EP), ("b", TA), ("c", TB), ("d", EP)],
            &[("a", "b", 2), ("b", "c", 1), ("a", "c", 1)],
        );
        let report =
            compute_metrics(&g, &PageRankParams::default(), 2, CoreMode::OneShot).unwrap();
        let total: f64 = report.pagerank.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
        let covered: usize = report.components.iter().map(|c| c.len()).sum();
        assert_eq!(covered, report.n_nodes);
        assert_eq!(report.giant_component_size, 3);
        assert!(report.core.contains("a") && report.core.contains("b") && report.core.contains("c"));
    }
}
