//! Dataset construction: the three mismatch regimes, uniform-answer subsets,
//! and seeded train/validation/test splits.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeBase, Triple};
use crate::manifest::{labeled_rng, PRNG_NAME};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Low,
    Medium,
    High,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Low => "low",
            Regime::Medium => "medium",
            Regime::High => "high",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Regime::Low),
            "medium" => Ok(Regime::Medium),
            "high" => Ok(Regime::High),
            other => Err(Error::InvalidInput(format!("unknown regime {other:?}"))),
        }
    }
}

/// Split sizes. The dev set is train + validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub dev_size: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size_high: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            dev_size: 40_000,
            train_size: 30_000,
            validation_size: 10_000,
            test_size_high: 30_000,
        }
    }
}

impl SplitSpec {
    pub fn new(train_size: usize, validation_size: usize, test_size_high: usize) -> Self {
        SplitSpec {
            dev_size: train_size + validation_size,
            train_size,
            validation_size,
            test_size_high,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_size + self.validation_size != self.dev_size {
            return Err(Error::InvalidInput(format!(
                "train ({}) + validation ({}) must equal dev size ({})",
                self.train_size, self.validation_size, self.dev_size
            )));
        }
        Ok(())
    }
}

/// A triple together with the input corpus it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedTriple {
    pub triple: Triple,
    pub source: String,
}

#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub regime: Regime,
    pub seed: u64,
    pub train: Vec<TaggedTriple>,
    pub validation: Vec<TaggedTriple>,
    pub test: Vec<TaggedTriple>,
}

impl DatasetBundle {
    pub fn split(&self, name: &str) -> Option<&[TaggedTriple]> {
        match name {
            "train" => Some(&self.train),
            "validation" => Some(&self.validation),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn kb_of(split: &[TaggedTriple]) -> KnowledgeBase {
        KnowledgeBase::from_triples(split.iter().map(|t| t.triple.clone()))
    }

    /// Checks the bundle invariants: splits are pairwise triple-disjoint, and
    /// in the high regime dev and test gold-answer sets are disjoint.
    pub fn validate(&self) -> Result<()> {
        let train = Self::kb_of(&self.train);
        let validation = Self::kb_of(&self.validation);
        let test = Self::kb_of(&self.test);
        for (a, b, name) in [
            (&train, &validation, "train/validation"),
            (&train, &test, "train/test"),
            (&validation, &test, "validation/test"),
        ] {
            let n = a.intersection_count(b);
            if n > 0 {
                return Err(Error::Overlap(format!("{n} shared triple(s) in {name}")));
            }
        }
        if self.regime == Regime::High {
            let dev_answers: std::collections::BTreeSet<&str> = self
                .train
                .iter()
                .chain(&self.validation)
                .map(|t| t.triple.object.as_str())
                .collect();
            if let Some(shared) = self
                .test
                .iter()
                .find(|t| dev_answers.contains(t.triple.object.as_str()))
            {
                return Err(Error::Overlap(format!(
                    "high regime answer {:?} appears in both dev and test",
                    shared.triple.object
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let splits = [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ];
        let mut provenance = fs::File::create(dir.join("provenance.tsv"))?;
        for (name, rows) in splits {
            let mut file = fs::File::create(dir.join(format!("{name}.tsv")))?;
            for row in rows {
                let t = &row.triple;
                writeln!(file, "{}\t{}\t{}", t.subject, t.relation, t.object)?;
                writeln!(
                    provenance,
                    "{name}\t{}\t{}\t{}\t{}",
                    t.subject, t.relation, t.object, row.source
                )?;
            }
        }
        let manifest = BundleManifest {
            tool: "freqshock".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            prng: PRNG_NAME.to_string(),
            regime: self.regime,
            seed: self.seed,
            sizes: [
                ("train".to_string(), self.train.len()),
                ("validation".to_string(), self.validation.len()),
                ("test".to_string(), self.test.len()),
            ]
            .into_iter()
            .collect(),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<DatasetBundle> {
        let manifest: BundleManifest =
            serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        let mut by_split: BTreeMap<String, Vec<TaggedTriple>> = BTreeMap::new();
        let file = fs::File::open(dir.join("provenance.tsv"))?;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(Error::Malformed {
                    line: idx + 1,
                    msg: format!("expected 5 provenance fields, found {}", fields.len()),
                });
            }
            by_split
                .entry(fields[0].to_string())
                .or_default()
                .push(TaggedTriple {
                    triple: Triple::new(fields[1], fields[2], fields[3])?,
                    source: fields[4].to_string(),
                });
        }
        Ok(DatasetBundle {
            regime: manifest.regime,
            seed: manifest.seed,
            train: by_split.remove("train").unwrap_or_default(),
            validation: by_split.remove("validation").unwrap_or_default(),
            test: by_split.remove("test").unwrap_or_default(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleManifest {
    pub tool: String,
    pub version: String,
    pub prng: String,
    pub regime: Regime,
    pub seed: u64,
    pub sizes: BTreeMap<String, usize>,
}

fn tag(triples: impl IntoIterator<Item = Triple>, source: &str) -> Vec<TaggedTriple> {
    triples
        .into_iter()
        .map(|triple| TaggedTriple {
            triple,
            source: source.to_string(),
        })
        .collect()
}

fn require_disjoint(a: &KnowledgeBase, b: &KnowledgeBase, what: &str) -> Result<()> {
    let n = a.intersection_count(b);
    if n > 0 {
        return Err(Error::Overlap(format!("{what}: {n} shared triple(s)")));
    }
    Ok(())
}

fn shuffled(kb: &KnowledgeBase, seed: u64, label: &str) -> Vec<Triple> {
    let mut triples: Vec<Triple> = kb.triples().to_vec();
    triples.shuffle(&mut labeled_rng(seed, label));
    triples
}

/// LowMismatch: dev and test corpora share the answer distribution. The dev
/// split is drawn from `dev_corpus`; when the dev corpus falls short of
/// `spec.dev_size`, the shortfall is topped up from `filler` into the
/// validation split only. Test is the whole test corpus.
pub fn build_low_mismatch(
    dev_corpus: &KnowledgeBase,
    test_corpus: &KnowledgeBase,
    filler: &KnowledgeBase,
    spec: &SplitSpec,
    seed: u64,
) -> Result<DatasetBundle> {
    spec.validate()?;
    require_disjoint(dev_corpus, test_corpus, "dev vs test corpus")?;
    require_disjoint(filler, test_corpus, "filler vs test corpus")?;
    let filler = filler.remove_overlap(dev_corpus);

    if dev_corpus.len() + filler.len() < spec.dev_size {
        return Err(Error::InsufficientData(format!(
            "dev corpus ({}) + filler ({}) < dev size {}",
            dev_corpus.len(),
            filler.len(),
            spec.dev_size
        )));
    }
    if dev_corpus.len() < spec.train_size {
        return Err(Error::InsufficientData(format!(
            "dev corpus ({}) smaller than train size {}; filler tops up validation only",
            dev_corpus.len(),
            spec.train_size
        )));
    }

    let mut dev = shuffled(dev_corpus, seed, "low/dev");
    dev.truncate(spec.dev_size);
    let validation_from_dev = dev.split_off(spec.train_size);
    let need_filler = spec.validation_size - validation_from_dev.len();
    let mut filler_sample = shuffled(&filler, seed, "low/filler");
    filler_sample.truncate(need_filler);

    let mut validation = tag(validation_from_dev, "dev_corpus");
    validation.extend(tag(filler_sample, "filler"));

    let bundle = DatasetBundle {
        regime: Regime::Low,
        seed,
        train: tag(dev, "dev_corpus"),
        validation,
        test: tag(test_corpus.triples().to_vec(), "test_corpus"),
    };
    bundle.validate()?;
    Ok(bundle)
}

/// MediumMismatch: dev split sampled from a uniform-answer corpus, stratified
/// per (relation, answer entity) with largest-remainder rounding so the train
/// sample stays exactly uniform per relation where sizes divide evenly.
pub fn build_medium_mismatch(
    uniform_dev: &KnowledgeBase,
    test_corpus: &KnowledgeBase,
    spec: &SplitSpec,
    seed: u64,
) -> Result<DatasetBundle> {
    spec.validate()?;
    require_disjoint(uniform_dev, test_corpus, "dev vs test corpus")?;
    if uniform_dev.len() < spec.dev_size {
        return Err(Error::InsufficientData(format!(
            "uniform dev corpus ({}) smaller than dev size {}",
            uniform_dev.len(),
            spec.dev_size
        )));
    }

    // Cells keyed by (relation, answer entity); shuffled once per cell.
    let mut cells: BTreeMap<(String, String), Vec<Triple>> = BTreeMap::new();
    for t in uniform_dev.iter() {
        cells
            .entry((t.relation.clone(), t.object.clone()))
            .or_default()
            .push(t.clone());
    }
    for ((relation, entity), cell) in cells.iter_mut() {
        cell.shuffle(&mut labeled_rng(
            seed,
            &format!("medium/cell/{relation}/{entity}"),
        ));
    }

    let capacities: Vec<usize> = cells.values().map(|c| c.len()).collect();
    let train_quotas = largest_remainder(&capacities, spec.train_size)?;
    let remaining: Vec<usize> = capacities
        .iter()
        .zip(&train_quotas)
        .map(|(cap, q)| cap - q)
        .collect();
    let validation_quotas = largest_remainder(&remaining, spec.validation_size)?;

    let mut train = Vec::with_capacity(spec.train_size);
    let mut validation = Vec::with_capacity(spec.validation_size);
    for (i, cell) in cells.values().enumerate() {
        train.extend(cell[..train_quotas[i]].iter().cloned());
        validation.extend(
            cell[train_quotas[i]..train_quotas[i] + validation_quotas[i]]
                .iter()
                .cloned(),
        );
    }

    let bundle = DatasetBundle {
        regime: Regime::Medium,
        seed,
        train: tag(train, "uniform_dev"),
        validation: tag(validation, "uniform_dev"),
        test: tag(test_corpus.triples().to_vec(), "test_corpus"),
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Allocates `target` items across cells proportionally to `capacities`
/// using largest-remainder rounding, never exceeding any cell's capacity.
fn largest_remainder(capacities: &[usize], target: usize) -> Result<Vec<usize>> {
    let total: usize = capacities.iter().sum();
    if target > total {
        return Err(Error::InsufficientData(format!(
            "cannot allocate {target} items from capacity {total}"
        )));
    }
    if target == 0 || total == 0 {
        return Ok(vec![0; capacities.len()]);
    }
    let mut quotas: Vec<usize> = Vec::with_capacity(capacities.len());
    let mut fractions: Vec<(usize, f64)> = Vec::with_capacity(capacities.len());
    let mut assigned = 0usize;
    for (i, &cap) in capacities.iter().enumerate() {
        let exact = target as f64 * cap as f64 / total as f64;
        let base = (exact.floor() as usize).min(cap);
        quotas.push(base);
        assigned += base;
        fractions.push((i, exact - base as f64));
    }
    // Hand out the remainder by descending fractional part, ties by cell
    // order, skipping full cells.
    fractions.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut cursor = 0;
    while assigned < target {
        let (i, _) = fractions[cursor % fractions.len()];
        cursor += 1;
        if quotas[i] < capacities[i] {
            quotas[i] += 1;
            assigned += 1;
        }
    }
    Ok(quotas)
}

/// The answer-disjoint partition of a pool: entities sorted by descending
/// triple count (ties by name) are greedily assigned to the side with fewer
/// triples so far; side A seeds the dev split.
pub fn partition_answers(pool: &KnowledgeBase) -> (Vec<Triple>, Vec<Triple>) {
    let mut by_answer: BTreeMap<&str, Vec<&Triple>> = BTreeMap::new();
    for t in pool.iter() {
        by_answer.entry(t.object.as_str()).or_default().push(t);
    }
    let mut entities: Vec<(&str, usize)> =
        by_answer.iter().map(|(e, ts)| (*e, ts.len())).collect();
    entities.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));

    let (mut side_a, mut side_b) = (Vec::new(), Vec::new());
    for (entity, _) in entities {
        let side = if side_a.len() <= side_b.len() {
            &mut side_a
        } else {
            &mut side_b
        };
        side.extend(by_answer[entity].iter().map(|t| (*t).clone()));
    }
    (side_a, side_b)
}

/// HighMismatch: dev and test answer sets are mutually exclusive by
/// construction, so entity coverage of test with respect to dev is 0.
pub fn build_high_mismatch(
    pool: &KnowledgeBase,
    spec: &SplitSpec,
    seed: u64,
) -> Result<DatasetBundle> {
    spec.validate()?;
    if pool.is_empty() {
        return Err(Error::InvalidInput("empty pool".to_string()));
    }
    let (side_a, side_b) = partition_answers(pool);
    if side_a.len() < spec.dev_size {
        return Err(Error::InsufficientData(format!(
            "dev side has {} triples, need {}",
            side_a.len(),
            spec.dev_size
        )));
    }
    if side_b.len() < spec.test_size_high {
        return Err(Error::InsufficientData(format!(
            "test side has {} triples, need {}",
            side_b.len(),
            spec.test_size_high
        )));
    }

    let mut dev = side_a;
    dev.shuffle(&mut labeled_rng(seed, "high/dev"));
    dev.truncate(spec.dev_size);
    let validation = dev.split_off(spec.train_size);

    let mut test = side_b;
    test.shuffle(&mut labeled_rng(seed, "high/test"));
    test.truncate(spec.test_size_high);

    let bundle = DatasetBundle {
        regime: Regime::High,
        seed,
        train: tag(dev, "pool"),
        validation: tag(validation, "pool"),
        test: tag(test, "pool"),
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Keeps, per relation, only answer entities with at least `per_entity_target`
/// triples and samples exactly that many per kept entity, making the
/// per-relation answer distribution exactly uniform on its support.
/// Relations with no qualifying entity are dropped with a warning record.
pub fn uniform_answer_sample(
    pool: &KnowledgeBase,
    per_entity_target: usize,
    seed: u64,
) -> Result<(KnowledgeBase, Vec<String>)> {
    if per_entity_target < 1 {
        return Err(Error::InvalidInput(
            "per-entity target must be >= 1".to_string(),
        ));
    }
    let mut cells: BTreeMap<(String, String), Vec<Triple>> = BTreeMap::new();
    let mut relations: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for t in pool.iter() {
        relations.insert(t.relation.clone());
        cells
            .entry((t.relation.clone(), t.object.clone()))
            .or_default()
            .push(t.clone());
    }
    let mut out = KnowledgeBase::new();
    let mut kept_relations: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for ((relation, entity), mut cell) in cells {
        if cell.len() < per_entity_target {
            continue;
        }
        cell.shuffle(&mut labeled_rng(
            seed,
            &format!("uniform/{relation}/{entity}"),
        ));
        cell.truncate(per_entity_target);
        for t in cell {
            out.insert(t);
        }
        kept_relations.insert(relation);
    }
    let warnings = relations
        .iter()
        .filter(|r| !kept_relations.contains(*r))
        .map(|r| format!("relation {r}: no answer entity with >= {per_entity_target} triples, dropped"))
        .collect();
    Ok((out, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str, r: &str, o: &str) -> Triple {
        Triple::new(s, r, o).unwrap()
    }

    fn corpus(n: usize, relation: &str, prefix: &str) -> KnowledgeBase {
        KnowledgeBase::from_triples(
            (0..n).map(|i| t(&format!("{prefix}{i}"), relation, &format!("o{i}"))),
        )
    }

    #[test]
    fn low_mismatch_tops_up_validation_only() {
        // Scaled-down analogue of a 38,896-query dev corpus under a 40k spec.
        let dev = corpus(38, "P1", "d");
        let test = corpus(5, "P1", "t");
        let filler = corpus(10, "P1", "f");
        let spec = SplitSpec::new(30, 10, 5);
        let bundle = build_low_mismatch(&dev, &test, &filler, &spec, 7).unwrap();
        assert_eq!(bundle.train.len(), 30);
        assert_eq!(bundle.validation.len(), 10);
        assert!(bundle.train.iter().all(|x| x.source == "dev_corpus"));
        let filler_count = bundle
            .validation
            .iter()
            .filter(|x| x.source == "filler")
            .count();
        assert_eq!(filler_count, 2);
        assert_eq!(bundle.test.len(), 5);
    }

    #[test]
    fn low_mismatch_skips_filler_when_dev_sufficient() {
        let dev = corpus(50, "P1", "d");
        let test = corpus(5, "P1", "t");
        let filler = KnowledgeBase::new();
        let spec = SplitSpec::new(30, 10, 5);
        let bundle = build_low_mismatch(&dev, &test, &filler, &spec, 7).unwrap();
        assert!(bundle.validation.iter().all(|x| x.source == "dev_corpus"));
    }

    #[test]
    fn low_mismatch_is_deterministic() {
        let dev = corpus(38, "P1", "d");
        let test = corpus(5, "P1", "t");
        let filler = corpus(10, "P1", "f");
        let spec = SplitSpec::new(30, 10, 5);
        let a = build_low_mismatch(&dev, &test, &filler, &spec, 7).unwrap();
        let b = build_low_mismatch(&dev, &test, &filler, &spec, 7).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.validation, b.validation);
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn low_mismatch_errors_when_short() {
        let dev = corpus(20, "P1", "d");
        let filler = corpus(5, "P1", "f");
        let test = corpus(5, "P1", "t");
        let spec = SplitSpec::new(30, 10, 5);
        assert!(matches!(
            build_low_mismatch(&dev, &test, &filler, &spec, 7),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn medium_mismatch_rejects_dev_equal_test() {
        let pool = corpus(40, "P1", "x");
        let spec = SplitSpec::new(20, 10, 5);
        assert!(matches!(
            build_medium_mismatch(&pool, &pool, &spec, 7),
            Err(Error::Overlap(_))
        ));
    }

    #[test]
    fn medium_mismatch_preserves_uniformity_when_divisible() {
        // 4 entities x 10 triples each; train 20 => exactly 5 per entity.
        let mut kb = KnowledgeBase::new();
        for e in 0..4 {
            for i in 0..10 {
                kb.insert(t(&format!("s{e}_{i}"), "P1", &format!("e{e}")));
            }
        }
        let test = corpus(3, "P1", "t");
        let spec = SplitSpec::new(20, 8, 3);
        let bundle = build_medium_mismatch(&kb, &test, &spec, 7).unwrap();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for row in &bundle.train {
            *counts.entry(row.triple.object.as_str()).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c == 5), "counts {counts:?}");
        assert_eq!(bundle.validation.len(), 8);
    }

    #[test]
    fn medium_mismatch_seed_changes_sample() {
        let mut kb = KnowledgeBase::new();
        for e in 0..4 {
            for i in 0..10 {
                kb.insert(t(&format!("s{e}_{i}"), "P1", &format!("e{e}")));
            }
        }
        let test = corpus(3, "P1", "t");
        let spec = SplitSpec::new(20, 8, 3);
        let a = build_medium_mismatch(&kb, &test, &spec, 7).unwrap();
        let b = build_medium_mismatch(&kb, &test, &spec, 8).unwrap();
        assert_eq!(a.train.len(), b.train.len());
        assert_ne!(a.train, b.train);
    }

    #[test]
    fn high_mismatch_answers_disjoint() {
        let mut kb = KnowledgeBase::new();
        for e in 0..10 {
            for i in 0..6 {
                kb.insert(t(&format!("s{e}_{i}"), "P1", &format!("e{e}")));
            }
        }
        let spec = SplitSpec::new(15, 5, 15);
        let bundle = build_high_mismatch(&kb, &spec, 7).unwrap();
        let dev_answers: std::collections::BTreeSet<&str> = bundle
            .train
            .iter()
            .chain(&bundle.validation)
            .map(|x| x.triple.object.as_str())
            .collect();
        assert!(bundle
            .test
            .iter()
            .all(|x| !dev_answers.contains(x.triple.object.as_str())));
    }

    #[test]
    fn high_mismatch_rejects_single_answer_pool() {
        let kb = KnowledgeBase::from_triples((0..50).map(|i| t(&format!("s{i}"), "P1", "only")));
        let spec = SplitSpec::new(10, 5, 10);
        assert!(build_high_mismatch(&kb, &spec, 7).is_err());
    }

    #[test]
    fn greedy_partition_is_balanced() {
        let mut kb = KnowledgeBase::new();
        let mut max_cell = 0;
        for e in 0..20 {
            let n = 1 + (e * 7) % 13;
            max_cell = max_cell.max(n);
            for i in 0..n {
                kb.insert(t(&format!("s{e}_{i}"), "P1", &format!("e{e}")));
            }
        }
        let (a, b) = partition_answers(&kb);
        assert_eq!(a.len() + b.len(), kb.len());
        assert!(
            a.len().abs_diff(b.len()) <= max_cell,
            "|A|={} |B|={} max cell {max_cell}",
            a.len(),
            b.len()
        );
    }

    #[test]
    fn uniform_sample_filters_and_truncates() {
        // counts {a:5, b:3, c:1}, target 3 -> {a:3, b:3}, c dropped.
        let mut kb = KnowledgeBase::new();
        for i in 0..5 {
            kb.insert(t(&format!("sa{i}"), "P1", "a"));
        }
        for i in 0..3 {
            kb.insert(t(&format!("sb{i}"), "P1", "b"));
        }
        kb.insert(t("sc0", "P1", "c"));
        let (out, warnings) = uniform_answer_sample(&kb, 3, 7).unwrap();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for triple in out.iter() {
            *counts.entry(triple.object.as_str()).or_insert(0) += 1;
        }
        assert_eq!(counts.get("a"), Some(&3));
        assert_eq!(counts.get("b"), Some(&3));
        assert_eq!(counts.get("c"), None);
        assert!(warnings.is_empty());
    }

    #[test]
    fn uniform_sample_target_one_keeps_one_each() {
        let mut kb = KnowledgeBase::new();
        for i in 0..4 {
            kb.insert(t(&format!("s{i}"), "P1", &format!("e{}", i % 2)));
        }
        let (out, _) = uniform_answer_sample(&kb, 1, 7).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn uniform_sample_warns_on_dropped_relation() {
        let mut kb = KnowledgeBase::new();
        kb.insert(t("s0", "P9", "x"));
        for i in 0..3 {
            kb.insert(t(&format!("s{i}"), "P1", "a"));
        }
        let (out, warnings) = uniform_answer_sample(&kb, 2, 7).unwrap();
        assert_eq!(out.relations().len(), 1);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("P9"));
    }

    #[test]
    fn bundle_save_load_roundtrip() {
        let dev = corpus(38, "P1", "d");
        let test = corpus(5, "P1", "t");
        let filler = corpus(10, "P1", "f");
        let spec = SplitSpec::new(30, 10, 5);
        let bundle = build_low_mismatch(&dev, &test, &filler, &spec, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        bundle.save(dir.path()).unwrap();
        let loaded = DatasetBundle::load(dir.path()).unwrap();
        assert_eq!(loaded.train, bundle.train);
        assert_eq!(loaded.validation, bundle.validation);
        assert_eq!(loaded.test, bundle.test);
        assert_eq!(loaded.regime, Regime::Low);
    }

    #[test]
    fn largest_remainder_exact_and_capped() {
        assert_eq!(largest_remainder(&[10, 10, 10], 15).unwrap(), vec![5, 5, 5]);
        let q = largest_remainder(&[1, 10, 10], 20).unwrap();
        assert_eq!(q.iter().sum::<usize>(), 20);
        assert!(q[0] <= 1);
        assert!(largest_remainder(&[2, 2], 5).is_err());
    }
}
