//! The end-to-end desk-scale experiment: generate a synthetic world, build
//! the three mismatch regimes, run every predictor strategy on the simulated
//! LM, and aggregate evaluation reports and diagnostics.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    build_high_mismatch, build_low_mismatch, build_medium_mismatch, uniform_answer_sample,
    DatasetBundle, SplitSpec, TaggedTriple,
};
use crate::error::{Error, Result};
use crate::eval::{
    answer_overlap, conditional_accuracy, hit_at_k, improvement_by_bin, mix_logs, recipe_report,
    set_prediction_rate, EvalConfig, EvalReport, RecipeRow,
};
use crate::kg::{build_queries, KnowledgeBase, Query, TemplateSet, DEFAULT_MASK_SENTINEL};
use crate::manifest::labeled_rng;
use crate::predict::{predict, Backend, DemoPool, PredictContext, ScoredCandidates, Variant};
use crate::schedule::MixtureSchedule;
use crate::sim::{sim_finetune, SimConstants, SimLm};
use crate::stats::{per_relation_similarity, RelationSimilarity};
use crate::world::{generate_world, SyntheticWorldSpec, World};

pub const REGIMES: [&str; 3] = ["low", "medium", "high"];
pub const STRATEGIES: [&str; 9] = [
    "zs", "fs", "rr", "ft", "ft+zs", "ft+fs", "mix", "mix+zs", "mix+fs",
];

/// Desk-scale pipeline configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecipeConfig {
    pub world: SyntheticWorldSpec,
    pub constants: SimConstants,
    pub seed: u64,
    pub top_k: usize,
    /// Shared test-corpus size for the low and medium regimes.
    pub test_size: usize,
    /// (train, validation) sizes per regime.
    pub low_split: (usize, usize),
    pub medium_split: (usize, usize),
    pub high_split: (usize, usize),
    pub high_test_size: usize,
    pub per_entity_target: usize,
    /// β of the mixture-finetuned strategies (α is fixed at 1).
    pub mixture_beta: u32,
    pub mix_weight: f64,
    /// Prior ranks < common_top are the Common set; ranks >= rare_from the
    /// Rare set.
    pub common_top: usize,
    pub rare_from: usize,
    pub coverage_edges: Vec<f64>,
}

impl Default for RecipeConfig {
    fn default() -> Self {
        RecipeConfig {
            world: SyntheticWorldSpec::default(),
            constants: SimConstants::default(),
            seed: 42,
            top_k: 20,
            test_size: 600,
            low_split: (900, 300),
            medium_split: (330, 60),
            high_split: (600, 200),
            high_test_size: 600,
            per_entity_target: 2,
            mixture_beta: 15,
            mix_weight: 0.5,
            common_top: 2,
            rare_from: 50,
            coverage_edges: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

/// Everything produced for one regime.
#[derive(Debug, Clone)]
pub struct RegimeArtifacts {
    pub bundle: DatasetBundle,
    pub train_queries: Vec<Query>,
    pub test_queries: Vec<Query>,
    pub predictions: BTreeMap<String, BTreeMap<String, ScoredCandidates>>,
    pub reports: BTreeMap<String, EvalReport>,
    pub similarity: Vec<RelationSimilarity>,
}

/// Frequency-shock and range-shift diagnostics (medium and high regimes).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecipeDiagnostics {
    pub common_rate_zs: f64,
    pub common_rate_ft: f64,
    pub rare_rate_zs: f64,
    pub rare_rate_ft: f64,
    pub common_accuracy_zs: Option<f64>,
    pub common_accuracy_ft: Option<f64>,
    pub rare_accuracy_zs: Option<f64>,
    pub rare_accuracy_ft: Option<f64>,
    /// Percentage of high-regime top-1 predictions drawn from train answers.
    pub train_overlap_ft: f64,
    pub train_overlap_fs: f64,
    pub test_overlap_ft: f64,
    pub test_overlap_fs: f64,
    /// Low-regime mean relative FT-over-ZS improvement per coverage bin.
    pub improvement_bins: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct RecipeOutcome {
    pub config: RecipeConfig,
    pub world: World,
    pub regimes: BTreeMap<String, RegimeArtifacts>,
    pub table: Vec<RecipeRow>,
    pub diagnostics: RecipeDiagnostics,
    pub warnings: Vec<String>,
}

fn split_queries(
    split: &[TaggedTriple],
    templates: &TemplateSet,
) -> Result<(Vec<Query>, Vec<String>)> {
    let kb = DatasetBundle::kb_of(split);
    build_queries(&kb, templates, DEFAULT_MASK_SENTINEL)
}

fn predict_all<B: Backend>(
    backend: &B,
    variant: Variant,
    queries: &[Query],
    ctx: &PredictContext,
    top_k: usize,
) -> Result<BTreeMap<String, ScoredCandidates>> {
    queries
        .iter()
        .map(|q| Ok((q.query_id.clone(), predict(variant, backend, q, ctx, top_k)?)))
        .collect()
}

fn answers_of(split: &[TaggedTriple]) -> BTreeSet<String> {
    split.iter().map(|t| t.triple.object.clone()).collect()
}

/// Builds the three regime bundles from the world's fact pool.
pub fn build_regimes(
    world: &World,
    config: &RecipeConfig,
) -> Result<BTreeMap<String, DatasetBundle>> {
    // Shared test corpus for low and medium; the remainder is the dev pool.
    let mut pool: Vec<_> = world.kb.triples().to_vec();
    pool.shuffle(&mut labeled_rng(config.seed, "recipe/test-corpus"));
    if pool.len() < config.test_size {
        return Err(Error::InsufficientData(format!(
            "world has {} facts, test corpus needs {}",
            pool.len(),
            config.test_size
        )));
    }
    let dev_pool = KnowledgeBase::from_triples(pool.split_off(config.test_size));
    let test_corpus = KnowledgeBase::from_triples(pool);

    let low_spec = SplitSpec::new(config.low_split.0, config.low_split.1, config.test_size);
    let low = build_low_mismatch(
        &dev_pool,
        &test_corpus,
        &KnowledgeBase::new(),
        &low_spec,
        config.seed,
    )?;

    let (uniform_dev, _warnings) =
        uniform_answer_sample(&dev_pool, config.per_entity_target, config.seed)?;
    let medium_spec = SplitSpec::new(
        config.medium_split.0,
        config.medium_split.1,
        config.test_size,
    );
    let medium = build_medium_mismatch(&uniform_dev, &test_corpus, &medium_spec, config.seed)?;

    let high_spec = SplitSpec::new(
        config.high_split.0,
        config.high_split.1,
        config.high_test_size,
    );
    let high = build_high_mismatch(&world.kb, &high_spec, config.seed)?;

    Ok([
        ("low".to_string(), low),
        ("medium".to_string(), medium),
        ("high".to_string(), high),
    ]
    .into_iter()
    .collect())
}

/// Runs every strategy on one regime.
pub fn run_regime(
    sim: &SimLm,
    bundle: DatasetBundle,
    config: &RecipeConfig,
    warnings: &mut Vec<String>,
) -> Result<RegimeArtifacts> {
    let templates = TemplateSet::synthetic_for(sim.relations());
    let (train_queries, mut w1) = split_queries(&bundle.train, &templates)?;
    let (test_queries, mut w2) = split_queries(&bundle.test, &templates)?;
    warnings.append(&mut w1);
    warnings.append(&mut w2);

    let train_kb = DatasetBundle::kb_of(&bundle.train);
    let standard = MixtureSchedule::standard();
    let mixture = MixtureSchedule::new(1, config.mixture_beta, standard.batch_size)?;
    let ft_model = sim_finetune(sim, &train_kb, config.constants.eta_target, &standard)?;
    let mix_model = sim_finetune(sim, &train_kb, config.constants.eta_target, &mixture)?;

    let ctx = PredictContext::new(config.seed).with_demos(DemoPool::from_queries(&train_queries));
    let k = config.top_k;
    let mut predictions: BTreeMap<String, BTreeMap<String, ScoredCandidates>> = BTreeMap::new();
    predictions.insert(
        "zs".to_string(),
        predict_all(sim, Variant::Zs, &test_queries, &ctx, k)?,
    );
    predictions.insert(
        "fs".to_string(),
        predict_all(sim, Variant::Fs, &test_queries, &ctx, k)?,
    );
    predictions.insert(
        "rr".to_string(),
        predict_all(sim, Variant::Rr, &test_queries, &ctx, k)?,
    );
    predictions.insert(
        "ft".to_string(),
        predict_all(&ft_model, Variant::Ft, &test_queries, &ctx, k)?,
    );
    predictions.insert(
        "mix".to_string(),
        predict_all(&mix_model, Variant::Ft, &test_queries, &ctx, k)?,
    );
    for (combined, base, other) in [
        ("ft+zs", "ft", "zs"),
        ("ft+fs", "ft", "fs"),
        ("mix+zs", "mix", "zs"),
        ("mix+fs", "mix", "fs"),
    ] {
        let mixed = mix_logs(
            &predictions[base],
            &predictions[other],
            config.mix_weight,
        )?;
        predictions.insert(combined.to_string(), mixed);
    }

    let eval_config = EvalConfig::new();
    let reports = predictions
        .iter()
        .map(|(name, preds)| Ok((name.clone(), hit_at_k(preds, &test_queries, &eval_config)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let similarity = per_relation_similarity(&train_queries, &test_queries);

    Ok(RegimeArtifacts {
        bundle,
        train_queries,
        test_queries,
        predictions,
        reports,
        similarity,
    })
}

/// Runs the full pipeline: world, regimes, strategies, diagnostics, table.
pub fn run_recipe(config: &RecipeConfig) -> Result<RecipeOutcome> {
    let world = generate_world(&config.world)?;
    let sim = SimLm::from_world(&world, config.constants)?;
    let bundles = build_regimes(&world, config)?;
    let mut warnings = Vec::new();

    let mut regimes = BTreeMap::new();
    for (name, bundle) in bundles {
        regimes.insert(name.clone(), run_regime(&sim, bundle, config, &mut warnings)?);
    }

    // Aggregate strategy table over the three regimes.
    let mut results: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (regime, artifacts) in &regimes {
        for (strategy, report) in &artifacts.reports {
            results
                .entry(strategy.clone())
                .or_default()
                .insert(regime.clone(), report.macro_hit(1).unwrap_or(0.0));
        }
    }
    let table = recipe_report(&results, &REGIMES)?;

    let diagnostics = compute_diagnostics(&world, config, &regimes)?;

    Ok(RecipeOutcome {
        config: config.clone(),
        world,
        regimes,
        table,
        diagnostics,
        warnings,
    })
}

impl RecipeOutcome {
    /// Writes every artifact under `dir`: world files, per-regime bundles,
    /// prediction logs, evaluation reports, plot-ready diagnostic tables,
    /// and the aggregate strategy table. All outputs are byte-reproducible.
    pub fn save(&self, dir: &std::path::Path) -> Result<()> {
        use std::fs;
        use std::io::Write;

        self.world.save(&dir.join("world"))?;
        for (regime, artifacts) in &self.regimes {
            let regime_dir = dir.join(regime);
            artifacts.bundle.save(&regime_dir)?;
            let pred_dir = regime_dir.join("predictions");
            fs::create_dir_all(&pred_dir)?;
            for (strategy, preds) in &artifacts.predictions {
                let records: Vec<crate::predict::PredictionRecord> = preds
                    .values()
                    .map(|scored| crate::predict::PredictionRecord {
                        query_id: scored.query_id.clone(),
                        variant: strategy.clone(),
                        candidates: scored.candidates.clone(),
                    })
                    .collect();
                let file = fs::File::create(pred_dir.join(format!("{strategy}.jsonl")))?;
                crate::predict::write_prediction_log(&records, file)?;
            }
            let report_dir = regime_dir.join("reports");
            fs::create_dir_all(&report_dir)?;
            for (strategy, report) in &artifacts.reports {
                let text = serde_json::to_string_pretty(report)?;
                fs::write(report_dir.join(format!("{strategy}.json")), text + "\n")?;
            }
            let similarity = fs::File::create(regime_dir.join("similarity.tsv"))?;
            crate::stats::write_similarity_table(&artifacts.similarity, similarity)?;
        }

        let text = serde_json::to_string_pretty(&self.diagnostics)?;
        fs::write(dir.join("diagnostics.json"), text + "\n")?;

        // Aggregate table, JSON (full precision) and CSV (rendered).
        let text = serde_json::to_string_pretty(&self.table)?;
        fs::write(dir.join("recipe_table.json"), text + "\n")?;
        let mut csv = fs::File::create(dir.join("recipe_table.csv"))?;
        writeln!(csv, "strategy,low,medium,high,mean")?;
        for row in &self.table {
            writeln!(
                csv,
                "{},{},{},{},{}",
                row.strategy,
                crate::eval::render_pct(row.per_regime["low"]),
                crate::eval::render_pct(row.per_regime["medium"]),
                crate::eval::render_pct(row.per_regime["high"]),
                crate::eval::render_pct(row.mean),
            )?;
        }

        self.write_diagnostic_csvs(dir)?;
        Ok(())
    }

    /// Plot-ready tables mirroring the set-rate, conditional-accuracy,
    /// overlap, and improvement-by-bin figures.
    fn write_diagnostic_csvs(&self, dir: &std::path::Path) -> Result<()> {
        use std::fs;
        use std::io::Write;
        let d = &self.diagnostics;

        let mut rates = fs::File::create(dir.join("set_rates.csv"))?;
        writeln!(rates, "set,zs,ft")?;
        writeln!(rates, "common,{},{}", d.common_rate_zs, d.common_rate_ft)?;
        writeln!(rates, "rare,{},{}", d.rare_rate_zs, d.rare_rate_ft)?;

        let fmt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".to_string());
        let mut acc = fs::File::create(dir.join("conditional_accuracy.csv"))?;
        writeln!(acc, "set,zs,ft")?;
        writeln!(
            acc,
            "common,{},{}",
            fmt(&d.common_accuracy_zs),
            fmt(&d.common_accuracy_ft)
        )?;
        writeln!(
            acc,
            "rare,{},{}",
            fmt(&d.rare_accuracy_zs),
            fmt(&d.rare_accuracy_ft)
        )?;

        let mut overlap = fs::File::create(dir.join("answer_overlap.csv"))?;
        writeln!(overlap, "model,train_overlap,test_overlap")?;
        writeln!(overlap, "ft,{},{}", d.train_overlap_ft, d.test_overlap_ft)?;
        writeln!(overlap, "fs,{},{}", d.train_overlap_fs, d.test_overlap_fs)?;

        let mut bins = fs::File::create(dir.join("improvement_by_bin.csv"))?;
        writeln!(bins, "coverage_lo,coverage_hi,mean_relative_improvement")?;
        for (i, value) in d.improvement_bins.iter().enumerate() {
            writeln!(
                bins,
                "{},{},{}",
                self.config.coverage_edges[i],
                self.config.coverage_edges[i + 1],
                value.map(|v| v.to_string()).unwrap_or_else(|| "NA".to_string())
            )?;
        }
        Ok(())
    }

    /// Console rendering of the strategy table, 1-decimal percentages.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<8} {:>7} {:>7} {:>7} {:>7}\n",
            "strategy", "low", "medium", "high", "mean"
        ));
        for row in &self.table {
            out.push_str(&format!(
                "{:<8} {:>7} {:>7} {:>7} {:>7}\n",
                row.strategy,
                crate::eval::render_pct(row.per_regime["low"]),
                crate::eval::render_pct(row.per_regime["medium"]),
                crate::eval::render_pct(row.per_regime["high"]),
                crate::eval::render_pct(row.mean),
            ));
        }
        out
    }
}

fn compute_diagnostics(
    world: &World,
    config: &RecipeConfig,
    regimes: &BTreeMap<String, RegimeArtifacts>,
) -> Result<RecipeDiagnostics> {
    let medium = &regimes["medium"];
    let high = &regimes["high"];
    let low = &regimes["low"];

    let (common, rare) = world.common_rare_sets(config.common_top, config.rare_from);
    let common: BTreeSet<String> = common.into_iter().collect();
    let rare: BTreeSet<String> = rare.into_iter().collect();

    let zs = &medium.predictions["zs"];
    let ft = &medium.predictions["ft"];
    let gold = &medium.test_queries;

    let high_train = answers_of(&high.bundle.train)
        .union(&answers_of(&high.bundle.validation))
        .cloned()
        .collect::<BTreeSet<_>>();
    let high_test = answers_of(&high.bundle.test);
    let (train_overlap_ft, test_overlap_ft) =
        answer_overlap(&high.predictions["ft"], &high_train, &high_test)?;
    let (train_overlap_fs, test_overlap_fs) =
        answer_overlap(&high.predictions["fs"], &high_train, &high_test)?;

    let improvement_bins = improvement_by_bin(
        &low.reports["zs"],
        &low.reports["ft"],
        &low.similarity,
        &config.coverage_edges,
    )?;

    Ok(RecipeDiagnostics {
        common_rate_zs: set_prediction_rate(zs, &common)?,
        common_rate_ft: set_prediction_rate(ft, &common)?,
        rare_rate_zs: set_prediction_rate(zs, &rare)?,
        rare_rate_ft: set_prediction_rate(ft, &rare)?,
        common_accuracy_zs: conditional_accuracy(zs, gold, &common)?,
        common_accuracy_ft: conditional_accuracy(ft, gold, &common)?,
        rare_accuracy_zs: conditional_accuracy(zs, gold, &rare)?,
        rare_accuracy_ft: conditional_accuracy(ft, gold, &rare)?,
        train_overlap_ft,
        train_overlap_fs,
        test_overlap_ft,
        test_overlap_fs,
        improvement_bins,
    })
}
