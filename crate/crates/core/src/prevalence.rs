//! Differential-prevalence classification.
//!
//! Conditions are counted per corpus (document-level: one count per document
//! mentioning the condition), ranked by frequency with fractional ranks for
//! ties, and then classified by an iterative regression-residual procedure:
//! fit a line through the (rank in A, rank in B) cloud, peel off conditions
//! whose residual deviates from the mean residual by at least `k` standard
//! deviations, refit on the remainder, and stop once the remainder hugs a
//! straight line. Conditions found in only one corpus never enter the
//! regression: they are classified up front.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::doc::CorpusTag;
use crate::error::{CoreError, Result};

/// One of the five differential-prevalence classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrevalenceClass {
    /// Present in corpus A only.
    OnlyA,
    /// Present in corpus B only.
    OnlyB,
    /// Present in both, markedly better-ranked in A than the fit predicts.
    TypicalA,
    /// Present in both, markedly better-ranked in B than the fit predicts.
    TypicalB,
    /// Present in both with comparable ranks.
    EquallyPrevalent,
}

impl PrevalenceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PrevalenceClass::OnlyA => "only_a",
            PrevalenceClass::OnlyB => "only_b",
            PrevalenceClass::TypicalA => "typical_a",
            PrevalenceClass::TypicalB => "typical_b",
            PrevalenceClass::EquallyPrevalent => "equally_prevalent",
        }
    }

    pub fn all() -> [PrevalenceClass; 5] {
        [
            PrevalenceClass::OnlyA,
            PrevalenceClass::OnlyB,
            PrevalenceClass::TypicalA,
            PrevalenceClass::TypicalB,
            PrevalenceClass::EquallyPrevalent,
        ]
    }

    /// Class with the roles of the two corpora exchanged.
    pub fn swapped(self) -> PrevalenceClass {
        match self {
            PrevalenceClass::OnlyA => PrevalenceClass::OnlyB,
            PrevalenceClass::OnlyB => PrevalenceClass::OnlyA,
            PrevalenceClass::TypicalA => PrevalenceClass::TypicalB,
            PrevalenceClass::TypicalB => PrevalenceClass::TypicalA,
            PrevalenceClass::EquallyPrevalent => PrevalenceClass::EquallyPrevalent,
        }
    }
}

impl std::str::FromStr for PrevalenceClass {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "only_a" => Ok(PrevalenceClass::OnlyA),
            "only_b" => Ok(PrevalenceClass::OnlyB),
            "typical_a" => Ok(PrevalenceClass::TypicalA),
            "typical_b" => Ok(PrevalenceClass::TypicalB),
            "equally_prevalent" => Ok(PrevalenceClass::EquallyPrevalent),
            other => Err(format!("unknown prevalence class `{other}`")),
        }
    }
}

/// Document-level condition counts for one corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    pub corpus_tag: CorpusTag,
    pub counts: BTreeMap<String, u64>,
}

impl FrequencyTable {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Count conditions across per-document sets: a condition counts once per
/// document that mentions it.
pub fn count_conditions(
    doc_conditions: &BTreeMap<String, BTreeSet<String>>,
    corpus_tag: CorpusTag,
) -> FrequencyTable {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for conditions in doc_conditions.values() {
        for c in conditions {
            *counts.entry(c.clone()).or_insert(0) += 1;
        }
    }
    FrequencyTable { corpus_tag, counts }
}

/// Fractional ranks: rank 1 is the highest count, tied counts share the
/// average of the positions they occupy.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub ranks: BTreeMap<String, f64>,
}

impl RankTable {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

pub fn rank_conditions(freq: &FrequencyTable) -> Result<RankTable> {
    if freq.counts.is_empty() {
        return Err(CoreError::Data(format!(
            "cannot rank an empty frequency table (corpus {})",
            freq.corpus_tag.as_str()
        )));
    }
    let mut by_count: Vec<(&str, u64)> =
        freq.counts.iter().map(|(c, n)| (c.as_str(), *n)).collect();
    // Descending by count; order within a tie group does not matter because
    // the whole group receives the same fractional rank.
    by_count.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut ranks = BTreeMap::new();
    let mut pos = 0usize;
    while pos < by_count.len() {
        let count = by_count[pos].1;
        let mut end = pos + 1;
        while end < by_count.len() && by_count[end].1 == count {
            end += 1;
        }
        // Positions pos+1 ..= end (1-based) share the average rank.
        let rank = (pos + 1 + end) as f64 / 2.0;
        for &(cond, _) in &by_count[pos..end] {
            ranks.insert(cond.to_string(), rank);
        }
        pos = end;
    }
    Ok(RankTable { ranks })
}

/// How the residual standard deviation is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Divide by n.
    Population,
    /// Divide by n - 1.
    Sample,
}

/// Ordinary least squares fit of `y = slope * x + intercept`.
///
/// `residuals[i]` corresponds to `points[i]` and equals `y_i - predicted`.
/// `mu` and `sigma` are the mean and standard deviation of the residuals
/// (population formula unless `SigmaMode::Sample` is requested). When the
/// y-values have zero variance the fit is exact and `r_squared` is 1.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    pub fn residual_at(&self, x: f64, y: f64) -> f64 {
        y - self.predict(x)
    }
}

pub fn fit_ols(points: &[(f64, f64)]) -> Result<RegressionFit> {
    fit_ols_with(points, SigmaMode::Population)
}

pub fn fit_ols_with(points: &[(f64, f64)], sigma_mode: SigmaMode) -> Result<RegressionFit> {
    let n = points.len();
    if n < 3 {
        return Err(CoreError::Degenerate(format!(
            "need at least 3 points for a regression, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in points {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(CoreError::Degenerate(
            "regression input is degenerate: all x values identical".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;

    let residuals: Vec<f64> = points
        .iter()
        .map(|&(x, y)| y - (slope * x + intercept))
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };

    let mu = residuals.iter().sum::<f64>() / nf;
    let denom = match sigma_mode {
        SigmaMode::Population => nf,
        SigmaMode::Sample => nf - 1.0,
    };
    let var = residuals.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>() / denom;
    let sigma = var.sqrt();

    Ok(RegressionFit { slope, intercept, r_squared, residuals, mu, sigma })
}

/// A condition with its per-corpus ranks, final-fit residual, and class.
///
/// The residual is present exactly when both ranks are present. It is
/// measured against the final regression line, matching how the separation
/// is usually drawn; the class itself was decided by the fit of the
/// iteration that removed the condition. When the regression is skipped
/// because the intersection is too small or degenerate, residuals of the
/// affected conditions are reported as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedCondition {
    pub condition: String,
    pub rank_a: Option<f64>,
    pub rank_b: Option<f64>,
    pub residual: Option<f64>,
    pub class: PrevalenceClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams {
    /// Residual threshold in units of sigma.
    pub k: f64,
    /// Stop once the retained points fit with at least this r².
    pub r2_stop: f64,
    /// Hard cap on regression iterations.
    pub max_iters: usize,
    pub sigma_mode: SigmaMode,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams {
            k: 1.5,
            r2_stop: 0.99,
            max_iters: 100,
            sigma_mode: SigmaMode::Population,
        }
    }
}

impl ClassifyParams {
    fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(CoreError::Config(format!(
                "threshold multiplier k must be positive, got {}",
                self.k
            )));
        }
        if !(0.0..=1.0).contains(&self.r2_stop) {
            return Err(CoreError::Config(format!(
                "r² stop must lie in [0, 1], got {}",
                self.r2_stop
            )));
        }
        if self.max_iters == 0 {
            return Err(CoreError::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    RSquaredReached,
    NoConditionMoved,
    MaxIterations,
    /// Fewer than 3 conditions in both corpora: regression skipped.
    IntersectionTooSmall,
    /// The fit could not separate anything (zero sigma or degenerate x).
    DegenerateFit,
}

#[derive(Debug, Clone)]
pub struct ClassificationOutcome {
    /// One entry per condition in the union of both corpora, sorted by
    /// condition. Classes partition the union.
    pub classified: Vec<ClassifiedCondition>,
    /// Number of regression fits performed.
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Final regression line over the retained set, when one was fit.
    pub final_slope: Option<f64>,
    pub final_intercept: Option<f64>,
    pub final_r_squared: Option<f64>,
    pub warnings: Vec<String>,
}

impl ClassificationOutcome {
    pub fn class_counts(&self) -> BTreeMap<PrevalenceClass, usize> {
        let mut out = BTreeMap::new();
        for c in &self.classified {
            *out.entry(c.class).or_insert(0) += 1;
        }
        out
    }
}

/// Classify every condition in the union of the two rank tables.
///
/// Conditions present in only one corpus are assigned `OnlyA` / `OnlyB`.
/// On the intersection, a line is fit with x = rank in A and y = rank in B;
/// conditions with residual `res - mu >= k * sigma` are `TypicalA` (their
/// rank in B is much worse than predicted, so they are characteristic of A),
/// and `res - mu <= -k * sigma` are `TypicalB`. The fit is repeated on the
/// remainder until nothing moves, the remainder is almost collinear
/// (`r² >= r2_stop`), or `max_iters` fits have run. Whatever remains is
/// `EquallyPrevalent`.
pub fn classify_iterative(
    rank_a: &RankTable,
    rank_b: &RankTable,
    params: &ClassifyParams,
) -> Result<ClassificationOutcome> {
    params.validate()?;
    if rank_a.is_empty() || rank_b.is_empty() {
        return Err(CoreError::Data(
            "cannot classify: at least one corpus has no ranked conditions (empty corpus?)".into(),
        ));
    }

    let mut warnings = Vec::new();
    let mut classes: BTreeMap<&str, PrevalenceClass> = BTreeMap::new();

    // Single-corpus conditions first.
    for cond in rank_a.ranks.keys() {
        if !rank_b.ranks.contains_key(cond) {
            classes.insert(cond, PrevalenceClass::OnlyA);
        }
    }
    for cond in rank_b.ranks.keys() {
        if !rank_a.ranks.contains_key(cond) {
            classes.insert(cond, PrevalenceClass::OnlyB);
        }
    }

    // Intersection, in deterministic (sorted) order.
    let intersection: Vec<&str> = rank_a
        .ranks
        .keys()
        .filter(|c| rank_b.ranks.contains_key(c.as_str()))
        .map(|c| c.as_str())
        .collect();

    let point = |cond: &str| (rank_a.ranks[cond], rank_b.ranks[cond]);

    let mut iterations = 0usize;
    let stop_reason;
    let mut final_fit: Option<RegressionFit> = None;
    let mut retained: Vec<&str> = intersection.clone();

    if intersection.len() < 3 {
        if !intersection.is_empty() {
            warnings.push(format!(
                "only {} condition(s) present in both corpora: regression skipped, \
                 all assigned equally_prevalent",
                intersection.len()
            ));
        }
        for cond in &retained {
            classes.insert(cond, PrevalenceClass::EquallyPrevalent);
        }
        stop_reason = StopReason::IntersectionTooSmall;
    } else {
        loop {
            let points: Vec<(f64, f64)> = retained.iter().map(|c| point(c)).collect();
            let fit = match fit_ols_with(&points, params.sigma_mode) {
                Ok(fit) => fit,
                Err(e) => {
                    warnings.push(format!(
                        "regression degenerate on {} retained conditions ({e}); \
                         remainder assigned equally_prevalent",
                        retained.len()
                    ));
                    stop_reason = StopReason::DegenerateFit;
                    break;
                }
            };
            iterations += 1;

            if fit.r_squared >= params.r2_stop {
                final_fit = Some(fit);
                stop_reason = StopReason::RSquaredReached;
                break;
            }
            if fit.sigma == 0.0 {
                final_fit = Some(fit);
                stop_reason = StopReason::DegenerateFit;
                break;
            }

            let mut moved = Vec::new();
            for (i, _) in retained.iter().enumerate() {
                let dev = fit.residuals[i] - fit.mu;
                if dev >= params.k * fit.sigma {
                    moved.push((i, PrevalenceClass::TypicalA));
                } else if dev <= -params.k * fit.sigma {
                    moved.push((i, PrevalenceClass::TypicalB));
                }
            }
            if moved.is_empty() {
                final_fit = Some(fit);
                stop_reason = StopReason::NoConditionMoved;
                break;
            }
            for &(i, class) in &moved {
                classes.insert(retained[i], class);
            }
            let moved_idx: BTreeSet<usize> = moved.iter().map(|&(i, _)| i).collect();
            retained = retained
                .iter()
                .enumerate()
                .filter(|(i, _)| !moved_idx.contains(i))
                .map(|(_, c)| *c)
                .collect();

            final_fit = Some(fit);
            if iterations >= params.max_iters {
                stop_reason = StopReason::MaxIterations;
                break;
            }
            if retained.len() < 3 {
                warnings.push(format!(
                    "only {} condition(s) left after trimming: regression stopped",
                    retained.len()
                ));
                stop_reason = StopReason::DegenerateFit;
                break;
            }
        }
        for cond in &retained {
            classes.insert(cond, PrevalenceClass::EquallyPrevalent);
        }
    }

    // Residuals for every intersection condition, against the final line.
    let classified: Vec<ClassifiedCondition> = classes
        .iter()
        .map(|(cond, &class)| {
            let ra = rank_a.ranks.get(*cond).copied();
            let rb = rank_b.ranks.get(*cond).copied();
            let residual = match (ra, rb) {
                (Some(x), Some(y)) => Some(match &final_fit {
                    Some(fit) => fit.residual_at(x, y),
                    None => 0.0,
                }),
                _ => None,
            };
            ClassifiedCondition { condition: cond.to_string(), rank_a: ra, rank_b: rb, residual, class }
        })
        .collect();

    debug_assert_eq!(
        classified.len(),
        rank_a
            .ranks
            .keys()
            .chain(rank_b.ranks.keys())
            .collect::<BTreeSet<_>>()
            .len(),
        "classes must partition the union of conditions"
    );

    Ok(ClassificationOutcome {
        classified,
        iterations,
        stop_reason,
        final_slope: final_fit.as_ref().map(|f| f.slope),
        final_intercept: final_fit.as_ref().map(|f| f.intercept),
        final_r_squared: final_fit.as_ref().map(|f| f.r_squared),
        warnings,
    })
}
