//! Predictor abstraction: variants, masked-span output parsing, and
//! probability aggregation over decoder outputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::Query;
use crate::manifest::labeled_rng;
use rand::seq::SliceRandom;

pub const DEFAULT_TOP_K: usize = 20;
pub const DEFAULT_DEMOS_PER_RELATION: usize = 10;

/// The four predictor variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Zs,
    Fs,
    Ft,
    Rr,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Zs => "zs",
            Variant::Fs => "fs",
            Variant::Ft => "ft",
            Variant::Rr => "rr",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zs" => Ok(Variant::Zs),
            "fs" => Ok(Variant::Fs),
            "ft" => Ok(Variant::Ft),
            "rr" => Ok(Variant::Rr),
            other => Err(Error::InvalidInput(format!("unknown variant {other:?}"))),
        }
    }
}

/// A raw decoder string with its sequence probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawDecoderOutput {
    pub text: String,
    pub probability: f64,
}

impl RawDecoderOutput {
    pub fn new(text: &str, probability: f64) -> Result<Self> {
        if probability <= 0.0 || probability.is_nan() {
            return Err(Error::InvalidInput(format!(
                "decoder output probability must be positive, got {probability}"
            )));
        }
        Ok(RawDecoderOutput {
            text: text.to_string(),
            probability,
        })
    }
}

/// One scored candidate entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub entity: String,
    pub score: f64,
}

/// Ranked candidates for one query: descending by score, ties broken
/// lexicographically by entity, no duplicate entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidates {
    pub query_id: String,
    pub candidates: Vec<Candidate>,
}

impl ScoredCandidates {
    /// Builds a ranked list from unordered (entity, score) pairs.
    /// Duplicate entities are rejected.
    pub fn from_scores<I: IntoIterator<Item = (String, f64)>>(
        query_id: &str,
        scores: I,
    ) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut candidates: Vec<Candidate> = Vec::new();
        for (entity, score) in scores {
            if score < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "negative score {score} for entity {entity:?}"
                )));
            }
            if !seen.insert(entity.clone()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate entity {entity:?} in candidate list"
                )));
            }
            candidates.push(Candidate { entity, score });
        }
        candidates.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.entity.cmp(&b.entity))
        });
        Ok(ScoredCandidates {
            query_id: query_id.to_string(),
            candidates,
        })
    }

    pub fn top(&self) -> Option<&Candidate> {
        self.candidates.first()
    }

    pub fn score_of(&self, entity: &str) -> f64 {
        self.candidates
            .iter()
            .find(|c| c.entity == entity)
            .map(|c| c.score)
            .unwrap_or(0.0)
    }

    pub fn truncated(mut self, top_k: usize) -> Self {
        self.candidates.truncate(top_k);
        self
    }

    pub fn total_score(&self) -> f64 {
        self.candidates.iter().map(|c| c.score).sum()
    }
}

/// Extracts the span strictly between the two mask sentinels.
///
/// Everything after the second sentinel is returned separately and is
/// discarded by callers. A missing second sentinel means the whole remainder
/// is the span.
pub fn parse_decoder_output(raw: &str, sentinels: (&str, &str)) -> Result<(String, String)> {
    let (m1, m2) = sentinels;
    let trimmed = raw.trim_start();
    let rest = trimmed.strip_prefix(m1).ok_or_else(|| Error::Malformed {
        line: 0,
        msg: format!("decoder output does not begin with {m1:?}: {raw:?}"),
    })?;
    match rest.find(m2) {
        Some(pos) => {
            let span = rest[..pos].trim().to_string();
            let extra = rest[pos + m2.len()..].trim().to_string();
            Ok((span, extra))
        }
        None => Ok((rest.trim().to_string(), String::new())),
    }
}

/// Groups decoder outputs by parsed span and sums their probabilities.
pub fn aggregate_candidates(
    query_id: &str,
    outputs: &[RawDecoderOutput],
    sentinels: (&str, &str),
) -> Result<ScoredCandidates> {
    let mut grouped: BTreeMap<String, f64> = BTreeMap::new();
    for (index, out) in outputs.iter().enumerate() {
        let (span, _extra) =
            parse_decoder_output(&out.text, sentinels).map_err(|e| Error::DecoderParse {
                index,
                msg: e.to_string(),
            })?;
        *grouped.entry(span).or_insert(0.0) += out.probability;
    }
    ScoredCandidates::from_scores(query_id, grouped)
}

/// A demonstration pool for few-shot prompting, grouped by relation.
#[derive(Debug, Clone, Default)]
pub struct DemoPool {
    by_relation: BTreeMap<String, Vec<(String, String)>>,
}

impl DemoPool {
    pub fn from_queries(queries: &[Query]) -> Self {
        let mut by_relation: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        for q in queries {
            by_relation
                .entry(q.relation.clone())
                .or_default()
                .push((q.prompt.clone(), q.gold.clone()));
        }
        DemoPool { by_relation }
    }

    pub fn is_empty(&self) -> bool {
        self.by_relation.is_empty()
    }

    /// Demonstration selection is a pure function of (relation, seed).
    pub fn select(&self, relation: &str, n: usize, seed: u64) -> Vec<(String, String)> {
        let Some(pool) = self.by_relation.get(relation) else {
            return Vec::new();
        };
        let mut rng = labeled_rng(seed, &format!("fs-demos/{relation}"));
        let mut indices: Vec<usize> = (0..pool.len()).collect();
        indices.shuffle(&mut rng);
        indices.truncate(n);
        indices.into_iter().map(|i| pool[i].clone()).collect()
    }

    /// Rendered query + gold + newline, prepended in sampled order.
    pub fn render_prefix(&self, relation: &str, n: usize, seed: u64) -> String {
        self.select(relation, n, seed)
            .into_iter()
            .map(|(prompt, gold)| format!("{prompt} {gold}\n"))
            .collect()
    }
}

/// Variant-independent prediction context.
#[derive(Debug, Clone)]
pub struct PredictContext {
    pub seed: u64,
    pub demos: Option<DemoPool>,
    pub demos_per_relation: usize,
}

impl PredictContext {
    pub fn new(seed: u64) -> Self {
        PredictContext {
            seed,
            demos: None,
            demos_per_relation: DEFAULT_DEMOS_PER_RELATION,
        }
    }

    pub fn with_demos(mut self, demos: DemoPool) -> Self {
        self.demos = Some(demos);
        self
    }

    pub fn require_demos(&self) -> Result<&DemoPool> {
        match &self.demos {
            Some(d) if !d.is_empty() => Ok(d),
            _ => Err(Error::MissingDemonstrations),
        }
    }
}

/// A scoring backend for the predictor variants.
pub trait Backend {
    fn supports(&self, variant: Variant) -> bool;

    fn predict(
        &self,
        variant: Variant,
        query: &Query,
        ctx: &PredictContext,
        top_k: usize,
    ) -> Result<ScoredCandidates>;
}

/// Dispatches a variant prediction through a backend.
pub fn predict<B: Backend>(
    variant: Variant,
    backend: &B,
    query: &Query,
    ctx: &PredictContext,
    top_k: usize,
) -> Result<ScoredCandidates> {
    if !backend.supports(variant) {
        return Err(Error::UnsupportedVariant(variant.as_str().to_string()));
    }
    if variant == Variant::Fs {
        ctx.require_demos()?;
    }
    backend.predict(variant, query, ctx, top_k)
}

/// One line of the prediction log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub query_id: String,
    pub variant: String,
    pub candidates: Vec<Candidate>,
}

impl PredictionRecord {
    pub fn new(variant: Variant, scored: &ScoredCandidates) -> Self {
        PredictionRecord {
            query_id: scored.query_id.clone(),
            variant: variant.as_str().to_string(),
            candidates: scored.candidates.clone(),
        }
    }
}

/// Reads a JSONL prediction log into a map keyed by query id.
pub fn read_prediction_log<R: std::io::BufRead>(
    reader: R,
) -> Result<BTreeMap<String, ScoredCandidates>> {
    let mut map = BTreeMap::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(&line)?;
        map.insert(
            record.query_id.clone(),
            ScoredCandidates {
                query_id: record.query_id,
                candidates: record.candidates,
            },
        );
    }
    Ok(map)
}

pub fn write_prediction_log<W: std::io::Write>(
    records: &[PredictionRecord],
    mut writer: W,
) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const M1: &str = "<extra_id_0>";
    const M2: &str = "<extra_id_1>";

    #[test]
    fn parse_worked_example() {
        let (span, extra) =
            parse_decoder_output("<extra_id_0> Politician <extra_id_1>", (M1, M2)).unwrap();
        assert_eq!(span, "Politician");
        assert_eq!(extra, "");
    }

    #[test]
    fn parse_discards_extra_text() {
        let (span, extra) =
            parse_decoder_output("<extra_id_0> Paris <extra_id_1> capital of", (M1, M2)).unwrap();
        assert_eq!(span, "Paris");
        assert_eq!(extra, "capital of");
    }

    #[test]
    fn parse_missing_second_sentinel() {
        let (span, extra) = parse_decoder_output("<extra_id_0> Paris is", (M1, M2)).unwrap();
        assert_eq!(span, "Paris is");
        assert_eq!(extra, "");
    }

    #[test]
    fn parse_rejects_missing_leading_sentinel() {
        assert!(parse_decoder_output("Paris <extra_id_1>", (M1, M2)).is_err());
    }

    #[test]
    fn aggregate_sums_equivalent_spans() {
        let outputs = vec![
            RawDecoderOutput::new("<extra_id_0> Politician <extra_id_1> x", 0.3).unwrap(),
            RawDecoderOutput::new("<extra_id_0> Politician <extra_id_1> y", 0.2).unwrap(),
        ];
        let scored = aggregate_candidates("q", &outputs, (M1, M2)).unwrap();
        assert_eq!(scored.candidates.len(), 1);
        assert_eq!(scored.candidates[0].entity, "Politician");
        assert!((scored.candidates[0].score - 0.5).abs() < 1e-12);
    }

    #[test]
    fn aggregate_orders_by_summed_score() {
        let outputs = vec![
            RawDecoderOutput::new("<extra_id_0> a <extra_id_1>", 0.2).unwrap(),
            RawDecoderOutput::new("<extra_id_0> b <extra_id_1>", 0.3).unwrap(),
            RawDecoderOutput::new("<extra_id_0> a <extra_id_1> t", 0.05).unwrap(),
        ];
        let scored = aggregate_candidates("q", &outputs, (M1, M2)).unwrap();
        assert_eq!(scored.candidates[0].entity, "b");
        assert_eq!(scored.candidates[1].entity, "a");
        assert!((scored.total_score() - 0.55).abs() < 1e-12);
    }

    #[test]
    fn aggregate_reports_failing_index() {
        let outputs = vec![
            RawDecoderOutput::new("<extra_id_0> a <extra_id_1>", 0.2).unwrap(),
            RawDecoderOutput::new("broken", 0.3).unwrap(),
        ];
        match aggregate_candidates("q", &outputs, (M1, M2)) {
            Err(Error::DecoderParse { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn candidates_tie_break_lexicographic() {
        let scored =
            ScoredCandidates::from_scores("q", [("b".to_string(), 0.5), ("a".to_string(), 0.5)])
                .unwrap();
        assert_eq!(scored.candidates[0].entity, "a");
    }

    #[test]
    fn candidates_reject_duplicates() {
        let result = ScoredCandidates::from_scores(
            "q",
            [("a".to_string(), 0.5), ("a".to_string(), 0.2)],
        );
        assert!(result.is_err());
    }

    #[test]
    fn demo_selection_is_pure() {
        let queries: Vec<Query> = (0..30)
            .map(|i| Query {
                query_id: crate::kg::query_id("P1", i),
                subject: format!("s{i}"),
                relation: "P1".to_string(),
                gold: format!("g{i}"),
                prompt: format!("s{i} P1 <M>"),
            })
            .collect();
        let pool = DemoPool::from_queries(&queries);
        let a = pool.select("P1", 10, 7);
        let b = pool.select("P1", 10, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        let c = pool.select("P1", 10, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn prediction_log_roundtrip() {
        let scored = ScoredCandidates::from_scores(
            "P1/00000",
            [("x".to_string(), 0.6), ("y".to_string(), 0.4)],
        )
        .unwrap();
        let records = vec![PredictionRecord::new(Variant::Zs, &scored)];
        let mut out = Vec::new();
        write_prediction_log(&records, &mut out).unwrap();
        let map = read_prediction_log(std::io::Cursor::new(out)).unwrap();
        assert_eq!(map["P1/00000"].candidates[0].entity, "x");
    }
}
