//! Frequency statistics over query sets and the two similarity measures
//! between them: Pearson correlation and entity coverage.
//!
//! Undefined statistics (zero variance, universe smaller than two) are
//! reported as errors, never silently coerced to 0: uniform training splits
//! legitimately produce constant count vectors per relation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::Query;

/// Map from entity label to how many times it appeared as a gold answer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyStats {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl FrequencyStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_queries(queries: &[Query]) -> Self {
        Self::from_answers(queries.iter().map(|q| q.gold.as_str()))
    }

    pub fn from_answers<'a, I: IntoIterator<Item = &'a str>>(answers: I) -> Self {
        let mut stats = FrequencyStats::new();
        for a in answers {
            stats.add(a);
        }
        stats
    }

    pub fn add(&mut self, entity: &str) {
        self.add_count(entity, 1);
    }

    pub fn add_count(&mut self, entity: &str, n: u64) {
        *self.counts.entry(entity.to_string()).or_insert(0) += n;
        self.total += n;
    }

    /// Absent entities count as 0.
    pub fn get(&self, entity: &str) -> u64 {
        self.counts.get(entity).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Entities with count > 0.
    pub fn support(&self) -> impl Iterator<Item = &str> {
        self.counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(e, _)| e.as_str())
    }

    pub fn support_size(&self) -> usize {
        self.counts.values().filter(|&&c| c > 0).count()
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }
}

/// Two frequency statistics joined over the union of their supports.
#[derive(Debug, Clone)]
pub struct StatsPair<'a> {
    pub stats1: &'a FrequencyStats,
    pub stats2: &'a FrequencyStats,
    pub universe: BTreeSet<&'a str>,
    pub mean1: f64,
    pub mean2: f64,
}

impl<'a> StatsPair<'a> {
    pub fn new(stats1: &'a FrequencyStats, stats2: &'a FrequencyStats) -> Self {
        let universe: BTreeSet<&str> = stats1.support().chain(stats2.support()).collect();
        let tau = universe.len() as f64;
        let (mut sum1, mut sum2) = (0.0, 0.0);
        for e in &universe {
            sum1 += stats1.get(e) as f64;
            sum2 += stats2.get(e) as f64;
        }
        let (mean1, mean2) = if universe.is_empty() {
            (0.0, 0.0)
        } else {
            (sum1 / tau, sum2 / tau)
        };
        StatsPair {
            stats1,
            stats2,
            universe,
            mean1,
            mean2,
        }
    }

    pub fn size(&self) -> usize {
        self.universe.len()
    }
}

/// Standard Pearson correlation of the two zero-filled count vectors over
/// the union universe.
pub fn pearson(pair: &StatsPair) -> Result<f64> {
    if pair.size() < 2 {
        return Err(Error::UndefinedStatistic(format!(
            "pearson requires a universe of at least 2 entities, got {}",
            pair.size()
        )));
    }
    let (mut cov, mut var1, mut var2) = (0.0, 0.0, 0.0);
    for e in &pair.universe {
        let d1 = pair.stats1.get(e) as f64 - pair.mean1;
        let d2 = pair.stats2.get(e) as f64 - pair.mean2;
        cov += d1 * d2;
        var1 += d1 * d1;
        var2 += d2 * d2;
    }
    if var1 == 0.0 || var2 == 0.0 {
        return Err(Error::UndefinedStatistic(
            "pearson undefined for a constant count vector".to_string(),
        ));
    }
    Ok(cov / (var1.sqrt() * var2.sqrt()))
}

/// Proportion of the target's answer entities that also answer at least one
/// query in the source (coverage of test with respect to train).
pub fn entity_coverage(target: &FrequencyStats, source: &FrequencyStats) -> Result<f64> {
    let target_support = target.support_size();
    if target_support == 0 {
        return Err(Error::UndefinedStatistic(
            "entity coverage undefined for an empty target".to_string(),
        ));
    }
    let covered = target.support().filter(|e| source.get(e) > 0).count();
    Ok(covered as f64 / target_support as f64)
}

/// Per-relation similarity row. Pearson is absent when undefined.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationSimilarity {
    pub relation: String,
    pub coverage: f64,
    pub pearson: Option<f64>,
    pub train_count: usize,
    pub test_count: usize,
}

fn group_by_relation(queries: &[Query]) -> BTreeMap<&str, Vec<&Query>> {
    let mut map: BTreeMap<&str, Vec<&Query>> = BTreeMap::new();
    for q in queries {
        map.entry(q.relation.as_str()).or_default().push(q);
    }
    map
}

/// Entity coverage and Pearson correlation between the per-relation
/// frequency statistics, for each relation present in the test set.
pub fn per_relation_similarity(train: &[Query], test: &[Query]) -> Vec<RelationSimilarity> {
    let train_by_rel = group_by_relation(train);
    let test_by_rel = group_by_relation(test);
    let empty: Vec<&Query> = Vec::new();
    test_by_rel
        .iter()
        .map(|(relation, test_queries)| {
            let train_queries = train_by_rel.get(relation).unwrap_or(&empty);
            let train_stats =
                FrequencyStats::from_answers(train_queries.iter().map(|q| q.gold.as_str()));
            let test_stats =
                FrequencyStats::from_answers(test_queries.iter().map(|q| q.gold.as_str()));
            let coverage = entity_coverage(&test_stats, &train_stats).unwrap_or(0.0);
            let pair = StatsPair::new(&train_stats, &test_stats);
            RelationSimilarity {
                relation: relation.to_string(),
                coverage,
                pearson: pearson(&pair).ok(),
                train_count: train_queries.len(),
                test_count: test_queries.len(),
            }
        })
        .collect()
}

/// Dataset-level similarity over pooled answer multisets (Table-1 style).
pub fn pooled_similarity(train: &[Query], test: &[Query]) -> (Result<f64>, Result<f64>) {
    let train_stats = FrequencyStats::from_queries(train);
    let test_stats = FrequencyStats::from_queries(test);
    let pair = StatsPair::new(&train_stats, &test_stats);
    (entity_coverage(&test_stats, &train_stats), pearson(&pair))
}

/// Mean of per-relation coverage and pearson (pearson over relations where
/// it is defined). Alternative to the pooled default.
pub fn averaged_similarity(train: &[Query], test: &[Query]) -> (Option<f64>, Option<f64>) {
    let table = per_relation_similarity(train, test);
    if table.is_empty() {
        return (None, None);
    }
    let coverage = table.iter().map(|r| r.coverage).sum::<f64>() / table.len() as f64;
    let defined: Vec<f64> = table.iter().filter_map(|r| r.pearson).collect();
    let pearson = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };
    (Some(coverage), pearson)
}

/// Index of `x` in half-open bins [lo, hi) defined by `edges`; the last bin
/// is closed at the top. Returns None for x outside [first, last].
pub fn bin_index(x: f64, edges: &[f64]) -> Option<usize> {
    if edges.len() < 2 || x < edges[0] || x > *edges.last().unwrap() {
        return None;
    }
    for i in 0..edges.len() - 1 {
        if x < edges[i + 1] {
            return Some(i);
        }
    }
    Some(edges.len() - 2)
}

fn check_edges(edges: &[f64], name: &str) -> Result<()> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!(
            "{name} bin edges must be strictly increasing with at least 2 entries"
        )));
    }
    Ok(())
}

/// A relation's bin assignment on each similarity axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinnedRelation {
    pub relation: String,
    pub coverage_bin: Option<usize>,
    pub pearson_bin: Option<usize>,
}

/// Assigns each relation to exactly one bin per axis.
pub fn bin_by_similarity(
    table: &[RelationSimilarity],
    coverage_edges: &[f64],
    pearson_edges: &[f64],
) -> Result<Vec<BinnedRelation>> {
    check_edges(coverage_edges, "coverage")?;
    check_edges(pearson_edges, "pearson")?;
    Ok(table
        .iter()
        .map(|row| BinnedRelation {
            relation: row.relation.clone(),
            coverage_bin: bin_index(row.coverage, coverage_edges),
            pearson_bin: row.pearson.and_then(|p| bin_index(p, pearson_edges)),
        })
        .collect())
}

/// Writes the similarity table as delimited text, "NA" for undefined pearson.
pub fn write_similarity_table<W: Write>(table: &[RelationSimilarity], mut writer: W) -> Result<()> {
    writeln!(writer, "relation\tcoverage\tpearson\ttrain_count\ttest_count")?;
    for row in table {
        let pearson = row
            .pearson
            .map(|p| format!("{p}"))
            .unwrap_or_else(|| "NA".to_string());
        writeln!(
            writer,
            "{}\t{}\t{}\t{}\t{}",
            row.relation, row.coverage, pearson, row.train_count, row.test_count
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Query;

    fn stats(pairs: &[(&str, u64)]) -> FrequencyStats {
        let mut s = FrequencyStats::new();
        for (e, n) in pairs {
            for _ in 0..*n {
                s.add(e);
            }
        }
        s
    }

    fn query(relation: &str, gold: &str, ordinal: usize) -> Query {
        Query {
            query_id: crate::kg::query_id(relation, ordinal),
            subject: format!("s{ordinal}"),
            relation: relation.to_string(),
            gold: gold.to_string(),
            prompt: format!("s{ordinal} {relation} <M>"),
        }
    }

    #[test]
    fn frequency_counts_direct() {
        let s = stats(&[("a", 2), ("b", 1)]);
        assert_eq!(s.get("a"), 2);
        assert_eq!(s.get("b"), 1);
        assert_eq!(s.get("absent"), 0);
        assert_eq!(s.total(), 3);
    }

    #[test]
    fn frequency_empty() {
        let s = FrequencyStats::new();
        assert_eq!(s.total(), 0);
        assert_eq!(s.support_size(), 0);
    }

    #[test]
    fn pearson_self_correlation() {
        let s = stats(&[("a", 2), ("b", 1)]);
        let pair = StatsPair::new(&s, &s);
        assert!((pearson(&pair).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_anticorrelated() {
        // Φ1=(2,1,0), Φ2=(0,1,2) over {a,b,c}: exact -1.
        let s1 = stats(&[("a", 2), ("b", 1)]);
        let s2 = stats(&[("b", 1), ("c", 2)]);
        let pair = StatsPair::new(&s1, &s2);
        assert_eq!(pair.size(), 3);
        assert!((pearson(&pair).unwrap() - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn pearson_rejects_constant_vector() {
        let s1 = stats(&[("a", 1), ("b", 1), ("c", 1)]);
        let s2 = stats(&[("a", 3), ("b", 1), ("c", 2)]);
        let pair = StatsPair::new(&s1, &s2);
        assert!(matches!(
            pearson(&pair),
            Err(Error::UndefinedStatistic(_))
        ));
    }

    #[test]
    fn pearson_rejects_tiny_universe() {
        let s1 = stats(&[("a", 2)]);
        let s2 = stats(&[("a", 1)]);
        let pair = StatsPair::new(&s1, &s2);
        assert!(pearson(&pair).is_err());
    }

    #[test]
    fn pearson_symmetric_and_zero_pad_invariant() {
        let s1 = stats(&[("a", 3), ("b", 1), ("c", 2)]);
        let s2 = stats(&[("a", 1), ("b", 4), ("d", 2)]);
        let p12 = pearson(&StatsPair::new(&s1, &s2)).unwrap();
        let p21 = pearson(&StatsPair::new(&s2, &s1)).unwrap();
        assert!((p12 - p21).abs() < 1e-12);
        // entities absent from both sets do not join the universe
        let pair = StatsPair::new(&s1, &s2);
        assert!(!pair.universe.contains("zzz"));
    }

    #[test]
    fn coverage_identity_half_disjoint() {
        let s = stats(&[("a", 1), ("b", 2)]);
        assert_eq!(entity_coverage(&s, &s).unwrap(), 1.0);

        let target = stats(&[("a", 1), ("b", 1), ("c", 1), ("d", 1)]);
        let source = stats(&[("a", 5), ("c", 1)]);
        assert_eq!(entity_coverage(&target, &source).unwrap(), 0.5);

        let disjoint = stats(&[("x", 1)]);
        assert_eq!(entity_coverage(&target, &disjoint).unwrap(), 0.0);

        assert!(entity_coverage(&FrequencyStats::new(), &s).is_err());
    }

    #[test]
    fn coverage_one_when_support_subset() {
        let target = stats(&[("a", 1)]);
        let source = stats(&[("a", 9), ("b", 2)]);
        assert_eq!(entity_coverage(&target, &source).unwrap(), 1.0);
    }

    #[test]
    fn per_relation_identity() {
        let queries: Vec<Query> = vec![
            query("P1", "a", 0),
            query("P1", "b", 1),
            query("P2", "x", 0),
            query("P2", "y", 1),
        ];
        let table = per_relation_similarity(&queries, &queries);
        assert_eq!(table.len(), 2);
        for row in &table {
            assert_eq!(row.coverage, 1.0);
            if let Some(p) = row.pearson {
                assert!((p - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn per_relation_missing_in_train() {
        let train = vec![query("P1", "a", 0)];
        let test = vec![query("P2", "x", 0)];
        let table = per_relation_similarity(&train, &test);
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].relation, "P2");
        assert_eq!(table[0].coverage, 0.0);
    }

    #[test]
    fn bin_boundary_rules() {
        let edges = [0.0, 0.5, 1.0];
        assert_eq!(bin_index(0.5, &edges), Some(1));
        assert_eq!(bin_index(1.0, &edges), Some(1)); // top bin closed
        assert_eq!(bin_index(0.0, &edges), Some(0));
        assert_eq!(bin_index(1.5, &edges), None);
    }

    #[test]
    fn bin_populations_sum() {
        let table: Vec<RelationSimilarity> = (0..41)
            .map(|i| RelationSimilarity {
                relation: format!("P{i}"),
                coverage: (i as f64) / 40.0,
                pearson: Some((i as f64) / 20.0 - 1.0),
                train_count: 1,
                test_count: 1,
            })
            .collect();
        let cov_edges = [0.0, 0.25, 0.5, 0.75, 1.0];
        let pea_edges = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let binned = bin_by_similarity(&table, &cov_edges, &pea_edges).unwrap();
        let mut cov_counts = [0usize; 4];
        for b in &binned {
            cov_counts[b.coverage_bin.unwrap()] += 1;
        }
        assert_eq!(cov_counts.iter().sum::<usize>(), 41);
    }

    #[test]
    fn bin_rejects_non_monotone_edges() {
        let table: Vec<RelationSimilarity> = Vec::new();
        assert!(bin_by_similarity(&table, &[0.0, 0.0, 1.0], &[-1.0, 1.0]).is_err());
    }

    #[test]
    fn similarity_table_export_uses_na() {
        let table = vec![RelationSimilarity {
            relation: "P1".to_string(),
            coverage: 0.5,
            pearson: None,
            train_count: 3,
            test_count: 2,
        }];
        let mut out = Vec::new();
        write_similarity_table(&table, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("P1\t0.5\tNA\t3\t2"));
    }
}
