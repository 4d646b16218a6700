//! Synthetic two-corpus generator with planted structure.
//!
//! Documents are constructed by dealing condition slots into documents, so
//! target frequency tables and planted pair co-occurrence counts are
//! realized exactly — the generator re-extracts its own output and fails if
//! the realized counts deviate (which can only happen when condition
//! phrases collide inside one document). Everything is deterministic for a
//! given seed.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::doc::{CorpusTag, Document};
use crate::error::{CoreError, Result};
use crate::extract::{conditions_per_document, extract_dictionary, Lexicon};
use crate::prevalence::PrevalenceClass;

/// Per-condition target document frequencies (0 = absent from that corpus).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub name: String,
    pub freq_a: u64,
    pub freq_b: u64,
}

/// A pair planted to co-occur in corpus B. The members' marginals are their
/// `freq_b` values; `p_ij` documents contain both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSpec {
    pub a: String,
    pub b: String,
    pub p_ij: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_docs_a: u64,
    pub n_docs_b: u64,
    pub conditions: Vec<ConditionSpec>,
    #[serde(default)]
    pub planted_pairs: Vec<PairSpec>,
    /// Ground-truth class labels, filled in by the preset builders (or by
    /// hand for custom specs). Conditions without a label get no entry.
    #[serde(default)]
    pub expected_classes: BTreeMap<String, PrevalenceClass>,
}

/// Ground truth emitted next to the generated corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub classes: BTreeMap<String, PrevalenceClass>,
    pub pairs: Vec<PlantedPairTruth>,
    pub n_docs_a: u64,
    pub n_docs_b: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedPairTruth {
    pub a: String,
    pub b: String,
    pub p_i: u64,
    pub p_j: u64,
    pub p_ij: u64,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub docs_a: Vec<Document>,
    pub docs_b: Vec<Document>,
    pub truth: GroundTruth,
    /// All condition phrases, usable directly as the extraction lexicon.
    pub lexicon: Vec<String>,
}

fn validate(spec: &SynthSpec) -> Result<()> {
    if spec.conditions.is_empty() {
        return Err(CoreError::Config("synth spec has no conditions".into()));
    }
    let mut names = BTreeSet::new();
    for c in &spec.conditions {
        if !names.insert(c.name.as_str()) {
            return Err(CoreError::Config(format!(
                "condition {:?} appears twice in the pool",
                c.name
            )));
        }
        if c.freq_a == 0 && c.freq_b == 0 {
            return Err(CoreError::Config(format!(
                "condition {:?} has zero frequency in both corpora",
                c.name
            )));
        }
    }
    let freq_b: BTreeMap<&str, u64> =
        spec.conditions.iter().map(|c| (c.name.as_str(), c.freq_b)).collect();
    let mut in_pair = BTreeSet::new();
    for p in &spec.planted_pairs {
        for name in [p.a.as_str(), p.b.as_str()] {
            if !freq_b.contains_key(name) {
                return Err(CoreError::Config(format!(
                    "planted pair references unknown condition {name:?}"
                )));
            }
            if !in_pair.insert(name) {
                return Err(CoreError::Config(format!(
                    "condition {name:?} participates in more than one planted pair"
                )));
            }
        }
        if p.a == p.b {
            return Err(CoreError::Config(format!(
                "planted pair ({:?}, {:?}) is a self-pair",
                p.a, p.b
            )));
        }
        let (fa, fb) = (freq_b[p.a.as_str()], freq_b[p.b.as_str()]);
        if p.p_ij == 0 || p.p_ij > fa.min(fb) {
            return Err(CoreError::Config(format!(
                "planted pair ({}, {}): p_ij={} must lie in 1..=min({fa}, {fb})",
                p.a, p.b, p.p_ij
            )));
        }
    }

    let need_a: u64 = spec.conditions.iter().map(|c| c.freq_a).sum();
    if need_a > spec.n_docs_a {
        return Err(CoreError::Config(format!(
            "corpus a frequencies need {need_a} documents but n_docs_a = {}",
            spec.n_docs_a
        )));
    }
    let pair_docs: u64 = spec
        .planted_pairs
        .iter()
        .map(|p| freq_b[p.a.as_str()] + freq_b[p.b.as_str()] - p.p_ij)
        .sum();
    let single_docs: u64 = spec
        .conditions
        .iter()
        .filter(|c| !in_pair.contains(c.name.as_str()))
        .map(|c| c.freq_b)
        .sum();
    if pair_docs + single_docs > spec.n_docs_b {
        return Err(CoreError::Config(format!(
            "corpus b frequencies need {} documents but n_docs_b = {}",
            pair_docs + single_docs,
            spec.n_docs_b
        )));
    }
    Ok(())
}

fn emit_corpus(
    contents: Vec<Vec<&str>>,
    n_docs: u64,
    tag: CorpusTag,
    rng: &mut ChaCha8Rng,
) -> Vec<Document> {
    let mut slots: Vec<Vec<&str>> = contents;
    slots.resize(n_docs as usize, Vec::new());
    slots.shuffle(rng);
    let (prefix, base) = match tag {
        CorpusTag::A => ("a", Utc.with_ymd_and_hms(2020, 2, 1, 0, 0, 0).unwrap()),
        CorpusTag::B => ("b", Utc.with_ymd_and_hms(2020, 3, 23, 0, 0, 0).unwrap()),
    };
    slots
        .into_iter()
        .enumerate()
        .map(|(i, conds)| {
            let text = if conds.is_empty() {
                "...".to_string()
            } else {
                conds.join(" ; ")
            };
            Document {
                doc_id: format!("{prefix}{i:08}"),
                user_id: format!("u{prefix}{i:08}"),
                timestamp: base + Duration::seconds(i as i64),
                text,
                corpus_tag: tag,
            }
        })
        .collect()
}

fn verify_realization(spec: &SynthSpec, docs: &[Document], tag: CorpusTag) -> Result<()> {
    let lexicon = Lexicon::from_phrases(spec.conditions.iter().map(|c| c.name.as_str()))?;
    let mentions: Vec<_> = docs
        .iter()
        .flat_map(|d| extract_dictionary(d, &lexicon))
        .collect();
    let doc_conditions = conditions_per_document(&mentions);
    let counts = crate::prevalence::count_conditions(&doc_conditions, tag);
    for c in &spec.conditions {
        let target = match tag {
            CorpusTag::A => c.freq_a,
            CorpusTag::B => c.freq_b,
        };
        let got = counts.counts.get(&crate::extract::canonical_phrase(&c.name)).copied().unwrap_or(0);
        if got != target {
            return Err(CoreError::Data(format!(
                "generated corpus {} does not realize the spec: condition {:?} \
                 extracted {got} times, target {target} (phrases likely collide)",
                tag.as_str(),
                c.name
            )));
        }
    }
    if tag == CorpusTag::B {
        for p in &spec.planted_pairs {
            let ca = crate::extract::canonical_phrase(&p.a);
            let cb = crate::extract::canonical_phrase(&p.b);
            let got = doc_conditions
                .values()
                .filter(|set| set.contains(&ca) && set.contains(&cb))
                .count() as u64;
            if got != p.p_ij {
                return Err(CoreError::Data(format!(
                    "generated corpus b does not realize planted pair ({}, {}): \
                     co-occurs {got} times, target {}",
                    p.a, p.b, p.p_ij
                )));
            }
        }
    }
    Ok(())
}

/// Generate both corpora. Deterministic for a given spec; the generated
/// corpora realize the target counts exactly (verified by re-extraction).
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    validate(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Corpus A: one condition per document.
    let mut contents_a: Vec<Vec<&str>> = Vec::new();
    for c in &spec.conditions {
        for _ in 0..c.freq_a {
            contents_a.push(vec![c.name.as_str()]);
        }
    }

    // Corpus B: planted pairs get dedicated documents, everything else is
    // dealt one condition per document.
    let in_pair: BTreeSet<&str> = spec
        .planted_pairs
        .iter()
        .flat_map(|p| [p.a.as_str(), p.b.as_str()])
        .collect();
    let freq_b: BTreeMap<&str, u64> =
        spec.conditions.iter().map(|c| (c.name.as_str(), c.freq_b)).collect();
    let mut contents_b: Vec<Vec<&str>> = Vec::new();
    for p in &spec.planted_pairs {
        let (fa, fb) = (freq_b[p.a.as_str()], freq_b[p.b.as_str()]);
        for _ in 0..p.p_ij {
            contents_b.push(vec![p.a.as_str(), p.b.as_str()]);
        }
        for _ in 0..fa - p.p_ij {
            contents_b.push(vec![p.a.as_str()]);
        }
        for _ in 0..fb - p.p_ij {
            contents_b.push(vec![p.b.as_str()]);
        }
    }
    for c in &spec.conditions {
        if !in_pair.contains(c.name.as_str()) {
            for _ in 0..c.freq_b {
                contents_b.push(vec![c.name.as_str()]);
            }
        }
    }

    let docs_a = emit_corpus(contents_a, spec.n_docs_a, CorpusTag::A, &mut rng);
    let docs_b = emit_corpus(contents_b, spec.n_docs_b, CorpusTag::B, &mut rng);

    verify_realization(spec, &docs_a, CorpusTag::A)?;
    verify_realization(spec, &docs_b, CorpusTag::B)?;

    let truth = GroundTruth {
        classes: spec.expected_classes.clone(),
        pairs: spec
            .planted_pairs
            .iter()
            .map(|p| PlantedPairTruth {
                a: p.a.clone(),
                b: p.b.clone(),
                p_i: freq_b[p.a.as_str()],
                p_j: freq_b[p.b.as_str()],
                p_ij: p.p_ij,
            })
            .collect(),
        n_docs_a: spec.n_docs_a,
        n_docs_b: spec.n_docs_b,
    };
    let lexicon = spec.conditions.iter().map(|c| c.name.clone()).collect();
    Ok(SynthOutput { docs_a, docs_b, truth, lexicon })
}

/// Knobs for [`planted_spec`]: a diagonal bulk of conditions with matched
/// frequencies, rank-displaced outliers on both sides, single-corpus
/// conditions, and co-occurring pairs in corpus B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedParams {
    pub seed: u64,
    pub n_diagonal: usize,
    pub n_outliers_a: usize,
    pub n_outliers_b: usize,
    pub n_only_a: usize,
    pub n_only_b: usize,
    /// Diagonal frequency band (distinct counts are drawn from it).
    pub count_min: u64,
    pub count_max: u64,
    /// Maximum |freq_a - freq_b| noise on diagonal conditions.
    pub jitter: u64,
    pub n_pairs: usize,
    /// Marginal document count of each pair member in corpus B.
    pub pair_p: u64,
    /// Co-occurrence count of each planted pair.
    pub pair_p_ij: u64,
    pub n_docs_a: u64,
    pub n_docs_b: u64,
}

impl Default for PlantedParams {
    fn default() -> Self {
        PlantedParams {
            seed: 7,
            n_diagonal: 200,
            n_outliers_a: 5,
            n_outliers_b: 5,
            n_only_a: 0,
            n_only_b: 0,
            count_min: 20,
            count_max: 220,
            jitter: 1,
            n_pairs: 0,
            pair_p: 20,
            pair_p_ij: 15,
            n_docs_a: 30_000,
            n_docs_b: 30_000,
        }
    }
}

/// Build a [`SynthSpec`] with planted ground truth:
/// diagonal conditions share a frequency in both corpora (up to jitter), an
/// "outlier for A" is one of the most frequent conditions in A but among the
/// rarest in B (and symmetrically for B), and planted pairs co-occur far
/// above independence.
pub fn planted_spec(params: &PlantedParams) -> Result<SynthSpec> {
    if params.count_min <= params.jitter + params.n_outliers_a.max(params.n_outliers_b) as u64 {
        return Err(CoreError::Config(format!(
            "count_min={} too small: must exceed jitter={} plus outlier low-band {}",
            params.count_min,
            params.jitter,
            params.n_outliers_a.max(params.n_outliers_b)
        )));
    }
    let band = params.count_max.saturating_sub(params.count_min) + 1;
    if (band as usize) < params.n_diagonal {
        return Err(CoreError::Config(format!(
            "diagonal band [{}, {}] holds {band} distinct counts, need {}",
            params.count_min, params.count_max, params.n_diagonal
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut counts: Vec<u64> = (params.count_min..=params.count_max).collect();
    counts.shuffle(&mut rng);
    counts.truncate(params.n_diagonal);

    let mut conditions = Vec::new();
    let mut expected = BTreeMap::new();

    for (i, &count) in counts.iter().enumerate() {
        let name = format!("diag{i:04}");
        let jitter = if params.jitter > 0 {
            rng.gen_range(0..=params.jitter * 2) as i64 - params.jitter as i64
        } else {
            0
        };
        let freq_b = (count as i64 + jitter).max(params.count_min as i64) as u64;
        conditions.push(ConditionSpec { name: name.clone(), freq_a: count, freq_b });
        expected.insert(name, PrevalenceClass::EquallyPrevalent);
    }

    // Outliers sit above the diagonal band in their strong corpus and below
    // it (but present) in the weak one.
    let high_base = params.count_max + params.jitter + 1;
    for i in 0..params.n_outliers_a {
        let name = format!("outa{i:02}");
        conditions.push(ConditionSpec {
            name: name.clone(),
            freq_a: high_base + i as u64,
            freq_b: 1 + i as u64,
        });
        expected.insert(name, PrevalenceClass::TypicalA);
    }
    for i in 0..params.n_outliers_b {
        let name = format!("outb{i:02}");
        conditions.push(ConditionSpec {
            name: name.clone(),
            freq_a: 1 + i as u64,
            freq_b: high_base + i as u64,
        });
        expected.insert(name, PrevalenceClass::TypicalB);
    }

    for i in 0..params.n_only_a {
        let name = format!("onlya{i:02}");
        let freq = rng.gen_range(params.count_min..=params.count_max);
        conditions.push(ConditionSpec { name: name.clone(), freq_a: freq, freq_b: 0 });
        expected.insert(name, PrevalenceClass::OnlyA);
    }
    for i in 0..params.n_only_b {
        let name = format!("onlyb{i:02}");
        let freq = rng.gen_range(params.count_min..=params.count_max);
        conditions.push(ConditionSpec { name: name.clone(), freq_a: 0, freq_b: freq });
        expected.insert(name, PrevalenceClass::OnlyB);
    }

    let mut planted_pairs = Vec::new();
    for i in 0..params.n_pairs {
        let (pa, pb) = (format!("pair{i:03}x", ), format!("pair{i:03}y"));
        for name in [&pa, &pb] {
            conditions.push(ConditionSpec {
                name: name.clone(),
                freq_a: params.pair_p,
                freq_b: params.pair_p,
            });
            expected.insert(name.clone(), PrevalenceClass::EquallyPrevalent);
        }
        planted_pairs.push(PairSpec { a: pa, b: pb, p_ij: params.pair_p_ij });
    }

    Ok(SynthSpec {
        seed: params.seed,
        n_docs_a: params.n_docs_a,
        n_docs_b: params.n_docs_b,
        conditions,
        planted_pairs,
        expected_classes: expected,
    })
}
