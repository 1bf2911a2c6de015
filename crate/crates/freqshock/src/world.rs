//! Synthetic world generation for desk-scale experiments.
//!
//! A world consists of gold facts, a Zipfian "pretraining" prior over each
//! relation's answer vocabulary, and a per-query knowledge-strength table
//! consumed by the simulated LM.
//!
//! Gold answers are drawn from a Zipf law over a seeded permutation of the
//! vocabulary, so an entity's answer frequency is decoupled from its
//! pretraining prior the way real fact corpora decouple from web text.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{query_id, KnowledgeBase, Triple};
use crate::manifest::{labeled_rng, sha256_file, PRNG_NAME};

/// Largest prior count, assigned to each relation's rank-1 entity.
const PRIOR_BASE: f64 = 1_000_000.0;
/// Knowledge strengths are MAX * u^SHAPE: most facts are barely known,
/// a thin tail is known well.
const KNOWLEDGE_MAX: f64 = 0.95;
const KNOWLEDGE_SHAPE: i32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorldSpec {
    pub n_relations: usize,
    pub n_entities_per_relation: usize,
    pub zipf_exponent: f64,
    pub facts_per_relation: usize,
    pub seed: u64,
}

impl Default for SyntheticWorldSpec {
    fn default() -> Self {
        SyntheticWorldSpec {
            n_relations: 20,
            n_entities_per_relation: 200,
            zipf_exponent: 1.1,
            facts_per_relation: 100,
            seed: 42,
        }
    }
}

impl SyntheticWorldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_relations == 0 || self.n_entities_per_relation == 0 || self.facts_per_relation == 0
        {
            return Err(Error::InvalidInput(
                "world spec counts must be positive".to_string(),
            ));
        }
        if self.zipf_exponent <= 0.0 || self.zipf_exponent.is_nan() {
            return Err(Error::InvalidInput(format!(
                "zipf exponent must be > 0, got {}",
                self.zipf_exponent
            )));
        }
        Ok(())
    }
}

/// A generated world: facts, prior table, knowledge table.
#[derive(Debug, Clone)]
pub struct World {
    pub spec: SyntheticWorldSpec,
    pub relations: Vec<String>,
    pub kb: KnowledgeBase,
    /// Prior rows grouped by relation, in descending-rank order within each.
    pub prior: Vec<(String, u64)>,
    /// query_id -> knowledge strength in [0, 1].
    pub knowledge: Vec<(String, f64)>,
}

pub fn relation_name(index: usize) -> String {
    format!("R{index:02}")
}

pub fn entity_name(relation: &str, prior_rank: usize) -> String {
    format!("{}_e{:03}", relation.to_lowercase(), prior_rank)
}

pub fn generate_world(spec: &SyntheticWorldSpec) -> Result<World> {
    spec.validate()?;
    let mut kb = KnowledgeBase::new();
    let mut prior = Vec::new();
    let mut knowledge = Vec::new();
    let relations: Vec<String> = (0..spec.n_relations).map(relation_name).collect();

    for relation in &relations {
        let vocab: Vec<String> = (0..spec.n_entities_per_relation)
            .map(|rank| entity_name(relation, rank))
            .collect();
        for (rank, entity) in vocab.iter().enumerate() {
            let count = (PRIOR_BASE / ((rank + 1) as f64).powf(spec.zipf_exponent)).round() as u64;
            prior.push((entity.clone(), count.max(1)));
        }

        // Gold answers follow a Zipf law over an independently permuted order.
        let mut perm: Vec<usize> = (0..spec.n_entities_per_relation).collect();
        perm.shuffle(&mut labeled_rng(spec.seed, &format!("gold-perm/{relation}")));
        let weights: Vec<f64> = (0..spec.n_entities_per_relation)
            .map(|j| 1.0 / ((j + 1) as f64).powf(spec.zipf_exponent))
            .collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidInput(format!("zipf weights: {e}")))?;
        let mut gold_rng = labeled_rng(spec.seed, &format!("gold-sample/{relation}"));
        let mut knowledge_rng = labeled_rng(spec.seed, &format!("knowledge/{relation}"));

        for i in 0..spec.facts_per_relation {
            let gold = &vocab[perm[dist.sample(&mut gold_rng)]];
            let subject = format!("{}_s{:04}", relation.to_lowercase(), i);
            let triple = Triple::new(&subject, relation, gold)?;
            kb.insert(triple);
            let u: f64 = knowledge_rng.gen();
            let strength = KNOWLEDGE_MAX * u.powi(KNOWLEDGE_SHAPE);
            knowledge.push((query_id(relation, i), strength));
        }
    }

    Ok(World {
        spec: *spec,
        relations,
        kb,
        prior,
        knowledge,
    })
}

impl World {
    /// Per-relation prior vocabulary, rank-ordered.
    pub fn prior_by_relation(&self) -> BTreeMap<String, Vec<(String, u64)>> {
        let n = self.spec.n_entities_per_relation;
        self.relations
            .iter()
            .enumerate()
            .map(|(i, r)| (r.clone(), self.prior[i * n..(i + 1) * n].to_vec()))
            .collect()
    }

    /// Entities in the top `common_top` prior ranks of any relation, and
    /// entities at prior rank >= `rare_from`.
    pub fn common_rare_sets(
        &self,
        common_top: usize,
        rare_from: usize,
    ) -> (Vec<String>, Vec<String>) {
        let n = self.spec.n_entities_per_relation;
        let mut common = Vec::new();
        let mut rare = Vec::new();
        for (idx, (entity, _)) in self.prior.iter().enumerate() {
            let rank = idx % n;
            if rank < common_top {
                common.push(entity.clone());
            } else if rank >= rare_from {
                rare.push(entity.clone());
            }
        }
        (common, rare)
    }

    pub fn knowledge_map(&self) -> BTreeMap<String, f64> {
        self.knowledge.iter().cloned().collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut triples = fs::File::create(dir.join("triples.tsv"))?;
        self.kb.write_tsv(&mut triples)?;

        let mut prior = fs::File::create(dir.join("prior.tsv"))?;
        for (entity, count) in &self.prior {
            writeln!(prior, "{entity}\t{count}")?;
        }

        let mut knowledge = fs::File::create(dir.join("knowledge.tsv"))?;
        for (qid, strength) in &self.knowledge {
            writeln!(knowledge, "{qid}\t{strength}")?;
        }

        let manifest = WorldManifest {
            tool: "freqshock".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            prng: PRNG_NAME.to_string(),
            spec: self.spec,
            relations: self.relations.clone(),
            checksums: [
                ("triples.tsv", sha256_file(&dir.join("triples.tsv"))?),
                ("prior.tsv", sha256_file(&dir.join("prior.tsv"))?),
                ("knowledge.tsv", sha256_file(&dir.join("knowledge.tsv"))?),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<World> {
        let manifest: WorldManifest =
            serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        let kb = KnowledgeBase::parse_tsv(BufReader::new(fs::File::open(dir.join("triples.tsv"))?))?;
        let prior = load_prior_table(&dir.join("prior.tsv"))?;
        let knowledge = load_knowledge_table(&dir.join("knowledge.tsv"))?;
        Ok(World {
            spec: manifest.spec,
            relations: manifest.relations,
            kb,
            prior,
            knowledge,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldManifest {
    pub tool: String,
    pub version: String,
    pub prng: String,
    pub spec: SyntheticWorldSpec,
    pub relations: Vec<String>,
    pub checksums: BTreeMap<String, String>,
}

pub fn load_prior_table(path: &Path) -> Result<Vec<(String, u64)>> {
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (entity, count) = line.split_once('\t').ok_or_else(|| Error::Malformed {
            line: idx + 1,
            msg: "expected entity⟨TAB⟩count".to_string(),
        })?;
        let count: u64 = count.trim().parse().map_err(|_| Error::Malformed {
            line: idx + 1,
            msg: format!("invalid count {count:?}"),
        })?;
        rows.push((entity.to_string(), count));
    }
    Ok(rows)
}

pub fn load_knowledge_table(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (qid, strength) = line.split_once('\t').ok_or_else(|| Error::Malformed {
            line: idx + 1,
            msg: "expected query_id⟨TAB⟩strength".to_string(),
        })?;
        let strength: f64 = strength.trim().parse().map_err(|_| Error::Malformed {
            line: idx + 1,
            msg: format!("invalid strength {strength:?}"),
        })?;
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::Malformed {
                line: idx + 1,
                msg: format!("strength {strength} outside [0, 1]"),
            });
        }
        rows.push((qid.to_string(), strength));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_world_counts() {
        let spec = SyntheticWorldSpec::default();
        let world = generate_world(&spec).unwrap();
        assert_eq!(world.kb.len(), 2000);
        assert_eq!(world.prior.len(), 20 * 200);
        assert_eq!(world.knowledge.len(), 2000);
        assert_eq!(world.relations.len(), 20);
    }

    #[test]
    fn prior_slope_matches_exponent() {
        // log-log regression of prior count on rank should recover -zipf.
        let spec = SyntheticWorldSpec {
            n_relations: 1,
            ..SyntheticWorldSpec::default()
        };
        let world = generate_world(&spec).unwrap();
        let points: Vec<(f64, f64)> = world
            .prior
            .iter()
            .enumerate()
            .map(|(rank, (_, count))| (((rank + 1) as f64).ln(), (*count as f64).ln()))
            .collect();
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!(
            (slope + spec.zipf_exponent).abs() < 0.1,
            "slope {slope} vs exponent {}",
            spec.zipf_exponent
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticWorldSpec::default();
        let a = generate_world(&spec).unwrap();
        let b = generate_world(&spec).unwrap();
        assert_eq!(a.kb.triples(), b.kb.triples());
        assert_eq!(a.prior, b.prior);
        assert_eq!(a.knowledge, b.knowledge);
    }

    #[test]
    fn seed_changes_world() {
        let a = generate_world(&SyntheticWorldSpec::default()).unwrap();
        let b = generate_world(&SyntheticWorldSpec {
            seed: 43,
            ..SyntheticWorldSpec::default()
        })
        .unwrap();
        assert_ne!(a.kb.triples(), b.kb.triples());
    }

    #[test]
    fn rejects_invalid_spec() {
        let spec = SyntheticWorldSpec {
            zipf_exponent: 0.0,
            ..SyntheticWorldSpec::default()
        };
        assert!(generate_world(&spec).is_err());
    }

    #[test]
    fn strengths_in_unit_interval() {
        let world = generate_world(&SyntheticWorldSpec::default()).unwrap();
        assert!(world
            .knowledge
            .iter()
            .all(|(_, s)| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let world = generate_world(&SyntheticWorldSpec {
            n_relations: 3,
            n_entities_per_relation: 10,
            facts_per_relation: 5,
            ..SyntheticWorldSpec::default()
        })
        .unwrap();
        world.save(dir.path()).unwrap();
        let loaded = World::load(dir.path()).unwrap();
        assert_eq!(loaded.kb.triples(), world.kb.triples());
        assert_eq!(loaded.prior, world.prior);
        assert_eq!(loaded.relations, world.relations);
    }
}
