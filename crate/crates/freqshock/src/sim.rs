//! Deterministic simulated language model.
//!
//! The simulator scores a masked query over the relation's answer vocabulary
//! plus a shared wrong-type distractor vocabulary. Zero-shot belief blends
//! per-query knowledge with a smoothed pretraining prior; finetuning
//! geometrically interpolates that belief toward the smoothed training-answer
//! distribution, reproducing task learning (type leak drops, knowledge
//! boost), frequency shock (the training-count factor), and range shift
//! (unseen answers keep only smoothing mass).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeBase, Query};
use crate::predict::{Backend, PredictContext, ScoredCandidates, Variant};
use crate::schedule::MixtureSchedule;
use crate::world::World;

pub const N_DISTRACTORS: usize = 20;

/// The simulator's tunable constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConstants {
    /// ε: probability mass leaked to the wrong-type distractor vocabulary.
    pub type_leak: f64,
    /// δ: additive smoothing for the prior and training distributions.
    pub smoothing: f64,
    /// Δ: knowledge boost finetuning gives queries of trained relations.
    pub task_boost: f64,
    /// Δ_fs: knowledge boost from few-shot demonstrations.
    pub fs_boost: f64,
    /// ρ_fs: factor by which demonstrations shrink the type leak.
    pub fs_leak_factor: f64,
    /// μ: retention of pretraining behavior per mixture unit.
    pub retention: f64,
    /// Default shock target for finetuning.
    pub eta_target: f64,
    /// w: reranker bonus for candidates of the expected answer type.
    pub rr_bonus: f64,
    /// K_rr: candidate depth the reranker operates on.
    pub rr_depth: usize,
}

impl Default for SimConstants {
    fn default() -> Self {
        SimConstants {
            type_leak: 0.15,
            smoothing: 0.5,
            task_boost: 0.25,
            fs_boost: 0.1,
            fs_leak_factor: 0.5,
            retention: 1.0,
            eta_target: 0.8,
            rr_bonus: 0.1,
            rr_depth: 20,
        }
    }
}

impl SimConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("type_leak", self.type_leak),
            ("task_boost", self.task_boost),
            ("fs_boost", self.fs_boost),
            ("fs_leak_factor", self.fs_leak_factor),
            ("eta_target", self.eta_target),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.smoothing <= 0.0 || self.smoothing.is_nan() {
            return Err(Error::InvalidInput(format!(
                "smoothing must be > 0, got {}",
                self.smoothing
            )));
        }
        if self.retention <= 0.0 || self.retention.is_nan() {
            return Err(Error::InvalidInput(format!(
                "retention must be > 0, got {}",
                self.retention
            )));
        }
        if self.rr_depth == 0 || self.rr_bonus < 0.0 {
            return Err(Error::InvalidInput(
                "reranker depth must be positive and bonus non-negative".to_string(),
            ));
        }
        Ok(())
    }
}

/// Per-relation smoothed prior and answer vocabulary.
#[derive(Debug, Clone)]
struct RelationPrior {
    /// entity -> smoothed prior probability; sums to 1 over the vocabulary.
    probs: BTreeMap<String, f64>,
}

/// The simulated LM. Finetuning returns a new instance.
#[derive(Debug, Clone)]
pub struct SimLm {
    constants: SimConstants,
    priors: BTreeMap<String, RelationPrior>,
    /// (subject, relation) -> (known answer, strength k in [0, 1]).
    knowledge: BTreeMap<(String, String), (String, f64)>,
    distractors: Vec<String>,
    /// Current type leak (ε before finetuning, 0 after).
    type_leak: f64,
    /// Effective shock η_eff (0 before finetuning).
    shock: f64,
    /// relation -> (entity -> gold-answer count in training).
    train_counts: BTreeMap<String, BTreeMap<String, u64>>,
    finetuned: bool,
}

fn distractor_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("offtype_{i:02}")).collect()
}

impl SimLm {
    /// Builds a pretrained (not finetuned) simulator from a prior table
    /// grouped by relation, a fact base, and per-query knowledge strengths
    /// keyed by query id (relation/ordinal in fact-base order).
    pub fn new(
        prior_by_relation: &BTreeMap<String, Vec<(String, u64)>>,
        kb: &KnowledgeBase,
        knowledge_table: &[(String, f64)],
        constants: SimConstants,
    ) -> Result<SimLm> {
        constants.validate()?;
        let mut priors = BTreeMap::new();
        for (relation, rows) in prior_by_relation {
            if rows.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "relation {relation} has an empty answer vocabulary"
                )));
            }
            let total: f64 = rows.iter().map(|(_, c)| *c as f64).sum();
            let denom = total + constants.smoothing * rows.len() as f64;
            let probs = rows
                .iter()
                .map(|(e, c)| (e.clone(), (*c as f64 + constants.smoothing) / denom))
                .collect();
            priors.insert(relation.clone(), RelationPrior { probs });
        }

        let strengths: BTreeMap<&str, f64> = knowledge_table
            .iter()
            .map(|(q, s)| (q.as_str(), *s))
            .collect();
        let mut ordinals: BTreeMap<&str, usize> = BTreeMap::new();
        let mut knowledge = BTreeMap::new();
        for t in kb.iter() {
            let ordinal = ordinals.entry(t.relation.as_str()).or_insert(0);
            let qid = crate::kg::query_id(&t.relation, *ordinal);
            *ordinal += 1;
            let k = strengths.get(qid.as_str()).copied().unwrap_or(0.0);
            knowledge.insert(
                (t.subject.clone(), t.relation.clone()),
                (t.object.clone(), k),
            );
        }

        Ok(SimLm {
            constants,
            priors,
            knowledge,
            distractors: distractor_names(N_DISTRACTORS),
            type_leak: constants.type_leak,
            shock: 0.0,
            train_counts: BTreeMap::new(),
            finetuned: false,
        })
    }

    pub fn from_world(world: &World, constants: SimConstants) -> Result<SimLm> {
        SimLm::new(
            &world.prior_by_relation(),
            &world.kb,
            &world.knowledge,
            constants,
        )
    }

    pub fn constants(&self) -> &SimConstants {
        &self.constants
    }

    pub fn shock(&self) -> f64 {
        self.shock
    }

    pub fn is_finetuned(&self) -> bool {
        self.finetuned
    }

    pub fn relations(&self) -> Vec<&str> {
        self.priors.keys().map(|s| s.as_str()).collect()
    }

    pub fn answer_vocabulary(&self, relation: &str) -> Option<BTreeSet<&str>> {
        self.priors
            .get(relation)
            .map(|p| p.probs.keys().map(|s| s.as_str()).collect())
    }

    fn lookup(&self, query: &Query) -> (Option<&str>, f64) {
        match self
            .knowledge
            .get(&(query.subject.clone(), query.relation.clone()))
        {
            Some((known, k)) => (Some(known.as_str()), *k),
            None => (None, 0.0),
        }
    }

    /// ZS-style belief over answers and distractors with the given leak and
    /// knowledge strength; sums to 1 over the full vocabulary.
    fn belief(
        &self,
        prior: &RelationPrior,
        known: Option<&str>,
        k: f64,
        leak: f64,
    ) -> BTreeMap<String, f64> {
        let mut scores = BTreeMap::new();
        for (entity, p0) in &prior.probs {
            let mut b = (1.0 - k) * p0;
            if known == Some(entity.as_str()) {
                b += k;
            }
            scores.insert(entity.clone(), (1.0 - leak) * b);
        }
        let d = leak / self.distractors.len() as f64;
        for name in &self.distractors {
            *scores.entry(name.clone()).or_insert(0.0) += d;
        }
        scores
    }

    /// Smoothed training-answer distribution over the relation's vocabulary.
    fn train_dist(&self, relation: &str, prior: &RelationPrior) -> BTreeMap<String, f64> {
        let counts = self.train_counts.get(relation);
        let n: u64 = counts.map(|c| c.values().sum()).unwrap_or(0);
        let denom = n as f64 + self.constants.smoothing * prior.probs.len() as f64;
        prior
            .probs
            .keys()
            .map(|e| {
                let c = counts.and_then(|m| m.get(e)).copied().unwrap_or(0);
                (e.clone(), (c as f64 + self.constants.smoothing) / denom)
            })
            .collect()
    }

    fn full_distribution(
        &self,
        variant: Variant,
        query: &Query,
    ) -> Result<BTreeMap<String, f64>> {
        let prior = self
            .priors
            .get(&query.relation)
            .ok_or_else(|| Error::UnknownRelation(query.relation.clone()))?;
        let (known, k) = self.lookup(query);
        match variant {
            Variant::Zs | Variant::Rr => Ok(self.belief(prior, known, k, self.type_leak)),
            Variant::Fs => {
                let leak = self.type_leak * self.constants.fs_leak_factor;
                let k = (k + self.constants.fs_boost).min(1.0);
                Ok(self.belief(prior, known, k, leak))
            }
            Variant::Ft => {
                let k = if self.train_counts.contains_key(&query.relation) {
                    (k + self.constants.task_boost).min(1.0)
                } else {
                    k
                };
                let belief = self.belief(prior, known, k, self.type_leak);
                let train = self.train_dist(&query.relation, prior);
                let eta = self.shock;
                let mut scores: BTreeMap<String, f64> = belief
                    .into_iter()
                    .map(|(e, b)| {
                        let t = train.get(&e).copied().unwrap_or(0.0);
                        (e, zpow(b, 1.0 - eta) * zpow(t, eta))
                    })
                    .collect();
                let z: f64 = scores.values().sum();
                if z > 0.0 {
                    for v in scores.values_mut() {
                        *v /= z;
                    }
                }
                Ok(scores)
            }
        }
    }
}

/// x^p with the convention 0^p = 0 for all p, so entities outside a factor's
/// support stay at zero even in the p -> 0 limit.
fn zpow(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(p)
    }
}

/// Finetunes the simulator on a training set under a mixture schedule,
/// returning a new model: training gold-answer counts are recorded, the type
/// leak drops to zero, knowledge of trained relations is boosted by Δ, and
/// the effective shock becomes eta_target / (1 + β·μ).
pub fn sim_finetune(
    model: &SimLm,
    train: &KnowledgeBase,
    eta_target: f64,
    schedule: &MixtureSchedule,
) -> Result<SimLm> {
    if train.is_empty() {
        return Err(Error::InsufficientData("empty training set".to_string()));
    }
    if !(0.0..=1.0).contains(&eta_target) {
        return Err(Error::InvalidInput(format!(
            "eta_target must be in [0, 1], got {eta_target}"
        )));
    }
    let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for t in train.iter() {
        *counts
            .entry(t.relation.clone())
            .or_default()
            .entry(t.object.clone())
            .or_insert(0) += 1;
    }
    let mut out = model.clone();
    out.train_counts = counts;
    out.type_leak = 0.0;
    out.shock = effective_shock(eta_target, schedule, model.constants.retention);
    out.finetuned = true;
    Ok(out)
}

/// η_eff = eta_target / (1 + β·μ): more pretraining replay, less shock.
pub fn effective_shock(eta_target: f64, schedule: &MixtureSchedule, retention: f64) -> f64 {
    eta_target / (1.0 + schedule.beta as f64 * retention)
}

impl Backend for SimLm {
    fn supports(&self, variant: Variant) -> bool {
        match variant {
            Variant::Ft => self.finetuned,
            _ => true,
        }
    }

    fn predict(
        &self,
        variant: Variant,
        query: &Query,
        _ctx: &PredictContext,
        top_k: usize,
    ) -> Result<ScoredCandidates> {
        if variant == Variant::Ft && !self.finetuned {
            return Err(Error::UnsupportedVariant(
                "ft requires a finetuned backend".to_string(),
            ));
        }
        let scores = self.full_distribution(variant, query)?;
        if variant == Variant::Rr {
            let zs = ScoredCandidates::from_scores(&query.query_id, scores)?
                .truncated(self.constants.rr_depth);
            let vocab = self
                .answer_vocabulary(&query.relation)
                .ok_or_else(|| Error::UnknownRelation(query.relation.clone()))?;
            let mut bonused: Vec<(String, f64)> = zs
                .candidates
                .into_iter()
                .map(|c| {
                    let bonus = if vocab.contains(c.entity.as_str()) {
                        self.constants.rr_bonus
                    } else {
                        0.0
                    };
                    (c.entity, c.score + bonus)
                })
                .collect();
            let z: f64 = bonused.iter().map(|(_, s)| *s).sum();
            if z > 0.0 {
                for (_, s) in bonused.iter_mut() {
                    *s /= z;
                }
            }
            return Ok(ScoredCandidates::from_scores(&query.query_id, bonused)?.truncated(top_k));
        }
        Ok(ScoredCandidates::from_scores(&query.query_id, scores)?.truncated(top_k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Triple;

    fn toy_model(type_leak: f64, k: f64) -> SimLm {
        // One relation, vocabulary {a, b, c} with prior counts 6, 3, 1.
        let mut prior = BTreeMap::new();
        prior.insert(
            "P1".to_string(),
            vec![
                ("a".to_string(), 6),
                ("b".to_string(), 3),
                ("c".to_string(), 1),
            ],
        );
        let kb = KnowledgeBase::from_triples([Triple::new("s0", "P1", "b").unwrap()]);
        let knowledge = vec![("P1/00000".to_string(), k)];
        let constants = SimConstants {
            type_leak,
            ..SimConstants::default()
        };
        SimLm::new(&prior, &kb, &knowledge, constants).unwrap()
    }

    fn query() -> Query {
        Query {
            query_id: "P1/00000".to_string(),
            subject: "s0".to_string(),
            relation: "P1".to_string(),
            gold: "b".to_string(),
            prompt: "s0 P1 <M>".to_string(),
        }
    }

    fn ctx() -> PredictContext {
        PredictContext::new(42)
    }

    #[test]
    fn zs_full_knowledge_limit() {
        let model = toy_model(0.0, 1.0);
        let out = model.predict(Variant::Zs, &query(), &ctx(), 5).unwrap();
        assert_eq!(out.top().unwrap().entity, "b");
        assert!((out.top().unwrap().score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zs_zero_knowledge_follows_prior() {
        let model = toy_model(0.0, 0.0);
        let out = model.predict(Variant::Zs, &query(), &ctx(), 3).unwrap();
        let order: Vec<&str> = out.candidates.iter().map(|c| c.entity.as_str()).collect();
        assert_eq!(order, ["a", "b", "c"]);
    }

    #[test]
    fn half_leak_puts_half_mass_on_distractors() {
        let model = toy_model(0.5, 0.0);
        let out = model
            .predict(Variant::Zs, &query(), &ctx(), usize::MAX)
            .unwrap();
        let distractor_mass: f64 = out
            .candidates
            .iter()
            .filter(|c| c.entity.starts_with("offtype_"))
            .map(|c| c.score)
            .sum();
        assert!((distractor_mass - 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_variants_normalize_over_full_vocabulary() {
        let model = toy_model(0.15, 0.4);
        let train = KnowledgeBase::from_triples([
            Triple::new("t0", "P1", "c").unwrap(),
            Triple::new("t1", "P1", "c").unwrap(),
            Triple::new("t2", "P1", "a").unwrap(),
        ]);
        let ft = sim_finetune(&model, &train, 0.8, &MixtureSchedule::standard()).unwrap();
        for (m, v) in [
            (&model, Variant::Zs),
            (&model, Variant::Fs),
            (&model, Variant::Rr),
            (&ft, Variant::Ft),
            (&ft, Variant::Zs),
        ] {
            let out = m.predict(v, &query(), &ctx(), usize::MAX).unwrap();
            assert!(
                (out.total_score() - 1.0).abs() < 1e-9,
                "variant {v:?} total {}",
                out.total_score()
            );
        }
    }

    #[test]
    fn effective_shock_formula() {
        let c = SimConstants::default();
        let s = |beta| MixtureSchedule::new(1, beta, 128).unwrap();
        assert!((effective_shock(0.8, &s(0), c.retention) - 0.8).abs() < 1e-12);
        assert!((effective_shock(0.8, &s(15), c.retention) - 0.05).abs() < 1e-12);
        let mut last = f64::INFINITY;
        for beta in [0, 1, 5, 15] {
            let eta = effective_shock(0.8, &s(beta), c.retention);
            assert!(eta < last, "eta_eff not strictly decreasing at beta {beta}");
            last = eta;
        }
    }

    #[test]
    fn null_few_shot_equals_zero_shot() {
        let mut model = toy_model(0.15, 0.4);
        model.constants.fs_leak_factor = 1.0;
        model.constants.fs_boost = 0.0;
        let zs = model.predict(Variant::Zs, &query(), &ctx(), 10).unwrap();
        let fs = model.predict(Variant::Fs, &query(), &ctx(), 10).unwrap();
        assert_eq!(zs.candidates, fs.candidates);
    }

    #[test]
    fn null_reranker_preserves_zs_ranking() {
        let mut model = toy_model(0.15, 0.4);
        model.constants.rr_bonus = 0.0;
        let zs = model
            .predict(Variant::Zs, &query(), &ctx(), model.constants.rr_depth)
            .unwrap();
        let rr = model
            .predict(Variant::Rr, &query(), &ctx(), model.constants.rr_depth)
            .unwrap();
        let zs_order: Vec<&str> = zs.candidates.iter().map(|c| c.entity.as_str()).collect();
        let rr_order: Vec<&str> = rr.candidates.iter().map(|c| c.entity.as_str()).collect();
        assert_eq!(zs_order, rr_order);
    }

    #[test]
    fn reranker_demotes_distractors() {
        let model = toy_model(0.6, 0.0);
        let zs = model.predict(Variant::Zs, &query(), &ctx(), 23).unwrap();
        let rr = model.predict(Variant::Rr, &query(), &ctx(), 23).unwrap();
        let in_vocab = |cands: &ScoredCandidates, k: usize| {
            cands
                .candidates
                .iter()
                .take(k)
                .filter(|c| !c.entity.starts_with("offtype_"))
                .count()
        };
        assert!(in_vocab(&rr, 3) >= in_vocab(&zs, 3));
        assert_eq!(rr.candidates[0].entity, "a");
    }

    #[test]
    fn full_shock_uniform_train_is_uniform_over_support() {
        let mut model = toy_model(0.15, 0.0);
        model.constants.task_boost = 0.0;
        let train = KnowledgeBase::from_triples([
            Triple::new("t0", "P1", "b").unwrap(),
            Triple::new("t1", "P1", "c").unwrap(),
        ]);
        let ft = sim_finetune(&model, &train, 1.0, &MixtureSchedule::standard()).unwrap();
        let out = ft.predict(Variant::Ft, &query(), &ctx(), 10).unwrap();
        let b = out.score_of("b");
        let c = out.score_of("c");
        let a = out.score_of("a");
        assert!((b - c).abs() < 1e-12, "trained support not uniform: {b} vs {c}");
        assert!(a < b, "untrained entity should keep only smoothing mass");
        assert_eq!(out.score_of("offtype_00"), 0.0);
    }

    #[test]
    fn untrained_gold_score_non_increasing_in_shock() {
        let model = toy_model(0.15, 0.3);
        // Gold "b" absent from training answers.
        let train = KnowledgeBase::from_triples([
            Triple::new("t0", "P1", "a").unwrap(),
            Triple::new("t1", "P1", "a").unwrap(),
            Triple::new("t2", "P1", "c").unwrap(),
        ]);
        let mut last = f64::INFINITY;
        for eta in [0.0, 0.2, 0.5, 0.8, 1.0] {
            let ft = sim_finetune(&model, &train, eta, &MixtureSchedule::standard()).unwrap();
            let out = ft.predict(Variant::Ft, &query(), &ctx(), 30).unwrap();
            let s = out.score_of("b");
            assert!(s <= last + 1e-12, "gold score rose at eta {eta}");
            last = s;
        }
    }

    #[test]
    fn finetune_requires_training_data() {
        let model = toy_model(0.15, 0.3);
        let empty = KnowledgeBase::new();
        assert!(sim_finetune(&model, &empty, 0.8, &MixtureSchedule::standard()).is_err());
    }

    #[test]
    fn ft_unsupported_before_finetune() {
        let model = toy_model(0.15, 0.3);
        assert!(!model.supports(Variant::Ft));
        assert!(model.predict(Variant::Ft, &query(), &ctx(), 5).is_err());
    }

    #[test]
    fn unknown_relation_rejected() {
        let model = toy_model(0.15, 0.3);
        let mut q = query();
        q.relation = "P9".to_string();
        assert!(matches!(
            model.predict(Variant::Zs, &q, &ctx(), 5),
            Err(Error::UnknownRelation(_))
        ));
    }
}
