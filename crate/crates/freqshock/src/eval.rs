//! Evaluation and diagnostics: Hit@k with macro averaging, score mixing and
//! the oracle upper bound, Common/Rare set rates and conditional accuracy,
//! answer overlap, category cross-tabs, improvement by similarity bin, and
//! the aggregate recipe table.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::Query;
use crate::predict::{Candidate, ScoredCandidates};
use crate::stats::{bin_index, RelationSimilarity};

pub const DEFAULT_KS: [usize; 3] = [1, 3, 5];

/// Default Common city set (birthplace-style relations).
pub const COMMON_CITIES: [&str; 10] = [
    "London", "Paris", "Tokyo", "Boston", "Rome", "Chicago", "Berlin", "Montreal", "Moscow",
    "Milan",
];

/// Default Rare city set.
pub const RARE_CITIES: [&str; 10] = [
    "Boise", "Tirana", "Myanmar", "Hanover", "Aberdeen", "Chelsea", "Kentucky", "Oldham",
    "Hastings", "Parma",
];

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub test_vocabulary: Option<BTreeSet<String>>,
    pub common_set: Option<BTreeSet<String>>,
    pub rare_set: Option<BTreeSet<String>>,
    pub category_map: Option<BTreeMap<String, String>>,
}

impl EvalConfig {
    pub fn new() -> Self {
        EvalConfig {
            ks: DEFAULT_KS.to_vec(),
            ..EvalConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty()
            || self.ks[0] == 0
            || self.ks.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidInput(
                "ks must be strictly increasing positive integers".to_string(),
            ));
        }
        Ok(())
    }

    pub fn default_city_sets() -> (BTreeSet<String>, BTreeSet<String>) {
        (
            COMMON_CITIES.iter().map(|s| s.to_string()).collect(),
            RARE_CITIES.iter().map(|s| s.to_string()).collect(),
        )
    }
}

/// Hit@k percentages for one relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationScore {
    pub hits: BTreeMap<usize, f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub per_relation: BTreeMap<String, RelationScore>,
    /// Unweighted mean over relations present in the test set, in [0, 100].
    pub macro_hits: BTreeMap<usize, f64>,
    pub n_queries: usize,
}

impl EvalReport {
    pub fn macro_hit(&self, k: usize) -> Option<f64> {
        self.macro_hits.get(&k).copied()
    }
}

/// Candidates surviving the optional test-vocabulary filter, in rank order.
fn filtered<'a>(
    scored: &'a ScoredCandidates,
    vocabulary: Option<&BTreeSet<String>>,
) -> Vec<&'a Candidate> {
    scored
        .candidates
        .iter()
        .filter(|c| vocabulary.is_none_or(|v| v.contains(&c.entity)))
        .collect()
}

/// The top-1 entity after vocabulary filtering, if any.
pub fn top1<'a>(
    scored: &'a ScoredCandidates,
    vocabulary: Option<&BTreeSet<String>>,
) -> Option<&'a str> {
    filtered(scored, vocabulary)
        .first()
        .map(|c| c.entity.as_str())
}

fn gold_hit(scored: &ScoredCandidates, gold: &str, k: usize, vocab: Option<&BTreeSet<String>>) -> bool {
    filtered(scored, vocab)
        .iter()
        .take(k)
        .any(|c| c.entity == gold)
}

fn require_prediction<'a>(
    predictions: &'a BTreeMap<String, ScoredCandidates>,
    query_id: &str,
) -> Result<&'a ScoredCandidates> {
    predictions
        .get(query_id)
        .ok_or_else(|| Error::MissingPrediction(query_id.to_string()))
}

fn aggregate_hits(
    per_query: &[(String, Vec<bool>)],
    ks: &[usize],
) -> (BTreeMap<String, RelationScore>, BTreeMap<usize, f64>) {
    let mut by_relation: BTreeMap<&str, Vec<&Vec<bool>>> = BTreeMap::new();
    for (relation, flags) in per_query {
        by_relation.entry(relation.as_str()).or_default().push(flags);
    }
    let mut per_relation = BTreeMap::new();
    let mut macro_hits: BTreeMap<usize, f64> = ks.iter().map(|&k| (k, 0.0)).collect();
    for (relation, rows) in &by_relation {
        let mut hits = BTreeMap::new();
        for (i, &k) in ks.iter().enumerate() {
            let pct =
                100.0 * rows.iter().filter(|f| f[i]).count() as f64 / rows.len() as f64;
            hits.insert(k, pct);
            *macro_hits.get_mut(&k).unwrap() += pct;
        }
        per_relation.insert(
            relation.to_string(),
            RelationScore {
                hits,
                count: rows.len(),
            },
        );
    }
    let n_rel = by_relation.len().max(1) as f64;
    for v in macro_hits.values_mut() {
        *v /= n_rel;
    }
    (per_relation, macro_hits)
}

/// Hit@k per relation and the unweighted macro average. Every gold query must
/// have a prediction record (an empty candidate list is a miss, a missing
/// record is an error).
pub fn hit_at_k(
    predictions: &BTreeMap<String, ScoredCandidates>,
    gold: &[Query],
    config: &EvalConfig,
) -> Result<EvalReport> {
    config.validate()?;
    let vocab = config.test_vocabulary.as_ref();
    let mut per_query = Vec::with_capacity(gold.len());
    for q in gold {
        let scored = require_prediction(predictions, &q.query_id)?;
        let flags: Vec<bool> = config
            .ks
            .iter()
            .map(|&k| gold_hit(scored, &q.gold, k, vocab))
            .collect();
        per_query.push((q.relation.clone(), flags));
    }
    let (per_relation, macro_hits) = aggregate_hits(&per_query, &config.ks);
    Ok(EvalReport {
        ks: config.ks.clone(),
        per_relation,
        macro_hits,
        n_queries: gold.len(),
    })
}

/// Averages two candidate lists for the same query over the union of their
/// entities, zero-filling absent entries: weight·a(e) + (1−weight)·b(e).
pub fn mix(a: &ScoredCandidates, b: &ScoredCandidates, weight: f64) -> Result<ScoredCandidates> {
    if a.query_id != b.query_id {
        return Err(Error::Misaligned(format!(
            "cannot mix predictions for {} and {}",
            a.query_id, b.query_id
        )));
    }
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidInput(format!(
            "mix weight must be in [0, 1], got {weight}"
        )));
    }
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for c in &a.candidates {
        *scores.entry(c.entity.clone()).or_insert(0.0) += weight * c.score;
    }
    for c in &b.candidates {
        *scores.entry(c.entity.clone()).or_insert(0.0) += (1.0 - weight) * c.score;
    }
    ScoredCandidates::from_scores(&a.query_id, scores)
}

/// Mixes two aligned prediction logs.
pub fn mix_logs(
    a: &BTreeMap<String, ScoredCandidates>,
    b: &BTreeMap<String, ScoredCandidates>,
    weight: f64,
) -> Result<BTreeMap<String, ScoredCandidates>> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        return Err(Error::Misaligned(
            "prediction logs cover different query sets".to_string(),
        ));
    }
    a.iter()
        .map(|(qid, sa)| Ok((qid.clone(), mix(sa, &b[qid], weight)?)))
        .collect()
}

/// Hit@k of an oracle that per query trusts whichever of the two models
/// ranks the gold answer inside the top k.
pub fn oracle_upper_bound(
    a: &BTreeMap<String, ScoredCandidates>,
    b: &BTreeMap<String, ScoredCandidates>,
    gold: &[Query],
    config: &EvalConfig,
) -> Result<EvalReport> {
    config.validate()?;
    let vocab = config.test_vocabulary.as_ref();
    let mut per_query = Vec::with_capacity(gold.len());
    for q in gold {
        let sa = require_prediction(a, &q.query_id)?;
        let sb = require_prediction(b, &q.query_id)?;
        let flags: Vec<bool> = config
            .ks
            .iter()
            .map(|&k| gold_hit(sa, &q.gold, k, vocab) || gold_hit(sb, &q.gold, k, vocab))
            .collect();
        per_query.push((q.relation.clone(), flags));
    }
    let (per_relation, macro_hits) = aggregate_hits(&per_query, &config.ks);
    Ok(EvalReport {
        ks: config.ks.clone(),
        per_relation,
        macro_hits,
        n_queries: gold.len(),
    })
}

/// Percentage of queries whose top-1 prediction falls in the entity set.
/// Queries with empty candidate lists count as not-in-set.
pub fn set_prediction_rate(
    predictions: &BTreeMap<String, ScoredCandidates>,
    entity_set: &BTreeSet<String>,
) -> Result<f64> {
    if entity_set.is_empty() {
        return Err(Error::InvalidInput("empty entity set".to_string()));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidInput("no predictions".to_string()));
    }
    let hits = predictions
        .values()
        .filter(|s| top1(s, None).is_some_and(|e| entity_set.contains(e)))
        .count();
    Ok(100.0 * hits as f64 / predictions.len() as f64)
}

/// Among queries whose top-1 is in the entity set, the percentage where the
/// top-1 equals the gold answer. None when no query qualifies.
pub fn conditional_accuracy(
    predictions: &BTreeMap<String, ScoredCandidates>,
    gold: &[Query],
    entity_set: &BTreeSet<String>,
) -> Result<Option<f64>> {
    if entity_set.is_empty() {
        return Err(Error::InvalidInput("empty entity set".to_string()));
    }
    let mut qualifying = 0usize;
    let mut correct = 0usize;
    for q in gold {
        let scored = require_prediction(predictions, &q.query_id)?;
        if let Some(e) = top1(scored, None) {
            if entity_set.contains(e) {
                qualifying += 1;
                if e == q.gold {
                    correct += 1;
                }
            }
        }
    }
    if qualifying == 0 {
        return Ok(None);
    }
    Ok(Some(100.0 * correct as f64 / qualifying as f64))
}

/// Percentages of queries whose top-1 belongs to the train and the test
/// answer sets respectively.
pub fn answer_overlap(
    predictions: &BTreeMap<String, ScoredCandidates>,
    train_answers: &BTreeSet<String>,
    test_answers: &BTreeSet<String>,
) -> Result<(f64, f64)> {
    if train_answers.is_empty() || test_answers.is_empty() {
        return Err(Error::InvalidInput("empty answer set".to_string()));
    }
    let train = set_prediction_rate(predictions, train_answers)?;
    let test = set_prediction_rate(predictions, test_answers)?;
    Ok((train, test))
}

/// Per-model classification of a top-1 prediction against a target category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CategoryClass {
    /// Top-1 missing or not in the target category.
    Nc,
    /// Top-1 in category and equal to gold.
    Cc,
    /// Top-1 in category but wrong.
    Ic,
}

impl CategoryClass {
    pub fn index(&self) -> usize {
        match self {
            CategoryClass::Nc => 0,
            CategoryClass::Cc => 1,
            CategoryClass::Ic => 2,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CategoryClass::Nc => "NC",
            CategoryClass::Cc => "CC",
            CategoryClass::Ic => "IC",
        }
    }
}

pub fn classify(
    scored: &ScoredCandidates,
    gold: &str,
    category_map: &BTreeMap<String, String>,
    target_category: &str,
) -> CategoryClass {
    match top1(scored, None) {
        Some(e) if category_map.get(e).map(|c| c.as_str()) == Some(target_category) => {
            if e == gold {
                CategoryClass::Cc
            } else {
                CategoryClass::Ic
            }
        }
        _ => CategoryClass::Nc,
    }
}

/// 3×3 count matrix over (model A class, model B class) with row/column order
/// NC, CC, IC.
pub fn category_crosstab(
    preds_a: &BTreeMap<String, ScoredCandidates>,
    preds_b: &BTreeMap<String, ScoredCandidates>,
    gold: &[Query],
    category_map: &BTreeMap<String, String>,
    target_category: &str,
) -> Result<[[usize; 3]; 3]> {
    let mut matrix = [[0usize; 3]; 3];
    for q in gold {
        let sa = require_prediction(preds_a, &q.query_id)?;
        let sb = require_prediction(preds_b, &q.query_id)?;
        let ca = classify(sa, &q.gold, category_map, target_category);
        let cb = classify(sb, &q.gold, category_map, target_category);
        matrix[ca.index()][cb.index()] += 1;
    }
    Ok(matrix)
}

/// Per-coverage-bin mean relative improvement (percent) of report B over
/// report A on hit@1: (hit1_B − hit1_A) / max(hit1_A, 0.1) · 100, averaged
/// over the relations falling in each bin. Empty bins are None.
pub fn improvement_by_bin(
    report_a: &EvalReport,
    report_b: &EvalReport,
    similarity: &[RelationSimilarity],
    coverage_edges: &[f64],
) -> Result<Vec<Option<f64>>> {
    if report_a.per_relation.len() != report_b.per_relation.len()
        || report_a
            .per_relation
            .keys()
            .zip(report_b.per_relation.keys())
            .any(|(x, y)| x != y)
    {
        return Err(Error::Misaligned(
            "reports cover different relation sets".to_string(),
        ));
    }
    if coverage_edges.len() < 2 || coverage_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "coverage bin edges must be strictly increasing".to_string(),
        ));
    }
    let n_bins = coverage_edges.len() - 1;
    let mut sums = vec![0.0f64; n_bins];
    let mut counts = vec![0usize; n_bins];
    for row in similarity {
        let (Some(a), Some(b)) = (
            report_a.per_relation.get(&row.relation),
            report_b.per_relation.get(&row.relation),
        ) else {
            continue;
        };
        let Some(bin) = bin_index(row.coverage, coverage_edges) else {
            continue;
        };
        let hit_a = a.hits.get(&1).copied().unwrap_or(0.0);
        let hit_b = b.hits.get(&1).copied().unwrap_or(0.0);
        // Denominator floor of 0.1 points keeps zero baselines finite.
        sums[bin] += 100.0 * (hit_b - hit_a) / hit_a.max(0.1);
        counts[bin] += 1;
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| if c == 0 { None } else { Some(s / c as f64) })
        .collect())
}

/// One row of the aggregate recipe table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecipeRow {
    pub strategy: String,
    /// regime -> macro hit@1.
    pub per_regime: BTreeMap<String, f64>,
    pub mean: f64,
}

/// Per strategy, the unweighted mean of macro hit@1 over the given regimes,
/// ranked descending by mean (ties by strategy name). Every strategy must
/// cover every regime.
pub fn recipe_report(
    results: &BTreeMap<String, BTreeMap<String, f64>>,
    regimes: &[&str],
) -> Result<Vec<RecipeRow>> {
    if regimes.is_empty() {
        return Err(Error::InvalidInput("no regimes given".to_string()));
    }
    let mut missing = Vec::new();
    let mut rows = Vec::new();
    for (strategy, by_regime) in results {
        let mut per_regime = BTreeMap::new();
        for &regime in regimes {
            match by_regime.get(regime) {
                Some(&v) => {
                    per_regime.insert(regime.to_string(), v);
                }
                None => missing.push(format!("{strategy}/{regime}")),
            }
        }
        if per_regime.len() == regimes.len() {
            let mean = per_regime.values().sum::<f64>() / regimes.len() as f64;
            rows.push(RecipeRow {
                strategy: strategy.clone(),
                per_regime,
                mean,
            });
        }
    }
    if !missing.is_empty() {
        return Err(Error::InsufficientData(format!(
            "incomplete strategy/regime matrix, missing: {}",
            missing.join(", ")
        )));
    }
    rows.sort_by(|a, b| {
        b.mean
            .partial_cmp(&a.mean)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.strategy.cmp(&b.strategy))
    });
    Ok(rows)
}

/// Renders a percentage with one decimal place for console tables; stored
/// documents keep full precision.
pub fn render_pct(x: f64) -> String {
    format!("{x:.1}")
}
