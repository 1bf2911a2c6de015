//! Command-line orchestration of the pipeline: world generation, dataset
//! building, statistics, prediction, evaluation, and the aggregate recipe.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Parser, Subcommand};

use freqshock::dataset::{
    build_high_mismatch, build_low_mismatch, build_medium_mismatch, uniform_answer_sample,
    DatasetBundle, Regime, SplitSpec,
};
use freqshock::eval::{
    conditional_accuracy, hit_at_k, mix_logs, oracle_upper_bound, set_prediction_rate, EvalConfig,
    EvalReport,
};
use freqshock::kg::{build_queries, KnowledgeBase, Query, TemplateSet, DEFAULT_MASK_SENTINEL};
use freqshock::manifest::RunManifest;
use freqshock::predict::{
    predict, read_prediction_log, write_prediction_log, Backend, DemoPool, PredictContext,
    PredictionRecord, Variant, DEFAULT_DEMOS_PER_RELATION, DEFAULT_TOP_K,
};
use freqshock::recipe::{run_recipe, RecipeConfig};
use freqshock::remote::{RemoteBackend, RemoteConfig, ENDPOINT_ENV};
use freqshock::schedule::MixtureSchedule;
use freqshock::sim::{effective_shock, sim_finetune, SimConstants, SimLm};
use freqshock::stats::{
    pearson, per_relation_similarity, write_similarity_table, FrequencyStats, StatsPair,
};
use freqshock::world::{generate_world, SyntheticWorldSpec, World};

#[derive(Parser)]
#[command(name = "freqshock", version, about = "Factual-knowledge extraction experiments")]
struct Cli {
    /// Root seed; all sub-seeds derive from it by labeled hashing.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, action = ArgAction::SetTrue)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world: facts, pretraining prior, knowledge table.
    Generate {
        #[arg(long, default_value_t = 20)]
        relations: usize,
        #[arg(long, default_value_t = 200)]
        entities: usize,
        #[arg(long, default_value_t = 100)]
        facts: usize,
        #[arg(long, default_value_t = 1.1)]
        zipf: f64,
    },
    /// Build a mismatch-regime dataset bundle from triple files.
    Build {
        #[arg(long)]
        regime: Regime,
        /// Development corpus (low and medium regimes).
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Test corpus (low and medium regimes).
        #[arg(long)]
        test: Option<PathBuf>,
        /// Validation top-up corpus (low regime).
        #[arg(long)]
        filler: Option<PathBuf>,
        /// Fact pool to partition (high regime).
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long, default_value_t = 30_000)]
        train_size: usize,
        #[arg(long, default_value_t = 10_000)]
        validation_size: usize,
        /// Test sample size (high regime only; low/medium use the whole
        /// test corpus).
        #[arg(long, default_value_t = 30_000)]
        test_size: usize,
        /// When > 0, uniform-sample the dev corpus to this many triples per
        /// answer entity before the medium build.
        #[arg(long, default_value_t = 0)]
        per_entity_target: usize,
    },
    /// Coverage and Pearson similarity between two query corpora.
    Stats {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Also write the per-relation similarity table.
        #[arg(long, action = ArgAction::SetTrue)]
        per_relation: bool,
    },
    /// Run a predictor variant over a bundle split.
    Predict {
        #[arg(long)]
        variant: Variant,
        #[arg(long, default_value = "sim")]
        backend: String,
        /// World directory (required by the sim backend).
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Relation templates TSV; synthetic templates when omitted.
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        /// Shock target for FT finetuning.
        #[arg(long, default_value_t = 0.8)]
        eta: f64,
        /// Pretraining-task units per batch during FT finetuning.
        #[arg(long, default_value_t = 0)]
        beta: u32,
        #[arg(long, default_value_t = DEFAULT_DEMOS_PER_RELATION)]
        demos: usize,
        /// Remote endpoint; FREQSHOCK_ENDPOINT overrides.
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
        #[arg(long, default_value_t = 2)]
        retries: u32,
        #[arg(long, default_value_t = 8)]
        max_in_flight: usize,
        /// Remote model was finetuned: enables the FT variant remotely.
        #[arg(long, action = ArgAction::SetTrue)]
        assume_finetuned: bool,
        /// Maximum tolerated per-query failure rate before the run fails.
        #[arg(long, default_value_t = 0.0)]
        failure_threshold: f64,
    },
    /// Evaluate prediction logs against a bundle split.
    Eval {
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Two logs to mix (weight 0.5) and evaluate.
        #[arg(long, num_args = 2)]
        mix: Option<Vec<PathBuf>>,
        /// Second log for the oracle upper bound.
        #[arg(long)]
        oracle_ub: Option<PathBuf>,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 3, 5])]
        ks: Vec<usize>,
        /// Entity-set file (one per line) or "default" for the city list.
        #[arg(long)]
        common: Option<String>,
        #[arg(long)]
        rare: Option<String>,
        /// Restrict candidates to this vocabulary file at test time.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Run the full default pipeline and print the strategy table.
    Recipe {
        #[arg(long, action = ArgAction::SetTrue)]
        run_all: bool,
        #[arg(long, default_value_t = 600)]
        test_size: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(
                e.downcast_ref::<freqshock::Error>(),
                Some(freqshock::Error::InvalidInput(_))
            );
            std::process::exit(if usage { 2 } else { 1 });
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            relations,
            entities,
            facts,
            zipf,
        } => cmd_generate(&cli_out(&cli)?, cli.seed, relations, entities, facts, zipf),
        Command::Build {
            regime,
            ref dev,
            ref test,
            ref filler,
            ref pool,
            train_size,
            validation_size,
            test_size,
            per_entity_target,
        } => cmd_build(
            &cli_out(&cli)?,
            cli.seed,
            regime,
            dev.as_deref(),
            test.as_deref(),
            filler.as_deref(),
            pool.as_deref(),
            SplitSpec::new(train_size, validation_size, test_size),
            per_entity_target,
        ),
        Command::Stats {
            ref train,
            ref test,
            per_relation,
        } => cmd_stats(train, test, per_relation, cli.out.as_deref()),
        Command::Predict { .. } => cmd_predict(cli),
        Command::Eval { .. } => cmd_eval(cli),
        Command::Recipe { run_all, test_size } => {
            if !run_all {
                bail!(freqshock::Error::InvalidInput(
                    "recipe requires --run-all (no precomputed strategy/regime cells to collect)"
                        .to_string()
                ));
            }
            cmd_recipe(&cli_out(&cli)?, cli.seed, test_size)
        }
    }
}

fn cli_out(cli: &Cli) -> Result<PathBuf> {
    cli.out
        .clone()
        .ok_or_else(|| freqshock::Error::InvalidInput("--out is required".to_string()).into())
}

fn load_kb(path: &Path) -> Result<KnowledgeBase> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    KnowledgeBase::parse_tsv(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))
}

fn load_entity_set(spec: &str, default: &[&str]) -> Result<BTreeSet<String>> {
    if spec == "default" {
        return Ok(default.iter().map(|s| s.to_string()).collect());
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn queries_for_split(
    bundle: &DatasetBundle,
    split: &str,
    templates: Option<&Path>,
) -> Result<Vec<Query>> {
    let rows = bundle
        .split(split)
        .ok_or_else(|| freqshock::Error::InvalidInput(format!("unknown split {split:?}")))?;
    let kb = DatasetBundle::kb_of(rows);
    let templates = match templates {
        Some(path) => {
            let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            TemplateSet::parse_tsv(BufReader::new(file))?
        }
        None => TemplateSet::synthetic_for(kb.relations()),
    };
    let (queries, warnings) = build_queries(&kb, &templates, DEFAULT_MASK_SENTINEL)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(queries)
}

fn cmd_generate(
    out: &Path,
    seed: u64,
    relations: usize,
    entities: usize,
    facts: usize,
    zipf: f64,
) -> Result<()> {
    let spec = SyntheticWorldSpec {
        n_relations: relations,
        n_entities_per_relation: entities,
        zipf_exponent: zipf,
        facts_per_relation: facts,
        seed,
    };
    let world = generate_world(&spec)?;
    world.save(out)?;
    println!(
        "world: {} facts, {} relations, prior table of {} rows -> {}",
        world.kb.len(),
        world.relations.len(),
        world.prior.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_build(
    out: &Path,
    seed: u64,
    regime: Regime,
    dev: Option<&Path>,
    test: Option<&Path>,
    filler: Option<&Path>,
    pool: Option<&Path>,
    spec: SplitSpec,
    per_entity_target: usize,
) -> Result<()> {
    let need = |path: Option<&Path>, flag: &str| -> Result<KnowledgeBase> {
        match path {
            Some(p) => load_kb(p),
            None => bail!(freqshock::Error::InvalidInput(format!(
                "--{flag} is required for the {} regime",
                regime.as_str()
            ))),
        }
    };
    let bundle = match regime {
        Regime::Low => {
            let dev = need(dev, "dev")?;
            let test = need(test, "test")?;
            let filler = match filler {
                Some(p) => load_kb(p)?,
                None => KnowledgeBase::new(),
            };
            build_low_mismatch(&dev, &test, &filler, &spec, seed)?
        }
        Regime::Medium => {
            let mut dev = need(dev, "dev")?;
            let test = need(test, "test")?;
            if per_entity_target > 0 {
                let (uniform, warnings) = uniform_answer_sample(&dev, per_entity_target, seed)?;
                for w in warnings {
                    eprintln!("warning: {w}");
                }
                dev = uniform;
            }
            build_medium_mismatch(&dev, &test, &spec, seed)?
        }
        Regime::High => {
            let pool = need(pool, "pool")?;
            build_high_mismatch(&pool, &spec, seed)?
        }
    };
    fs::create_dir_all(out)?;
    bundle.save(out)?;

    let mut manifest = RunManifest::new(
        "build",
        seed,
        serde_json::json!({
            "regime": regime.as_str(),
            "spec": spec,
            "per_entity_target": per_entity_target,
        }),
    );
    for (name, path) in [("dev", dev), ("test", test), ("filler", filler), ("pool", pool)] {
        if let Some(p) = path {
            manifest.record_input(name, p)?;
        }
    }
    manifest.write(&out.join("run_manifest.json"))?;

    // Table-1-style summary over gold answers: dev = train + validation.
    let dev_stats = FrequencyStats::from_answers(
        bundle
            .train
            .iter()
            .chain(&bundle.validation)
            .map(|t| t.triple.object.as_str()),
    );
    let test_stats =
        FrequencyStats::from_answers(bundle.test.iter().map(|t| t.triple.object.as_str()));
    let coverage = freqshock::stats::entity_coverage(&test_stats, &dev_stats)?;
    let pearson_text = match pearson(&StatsPair::new(&dev_stats, &test_stats)) {
        Ok(p) => format!("{p:.4}"),
        Err(_) => "NA".to_string(),
    };
    println!(
        "{} bundle: train {} validation {} test {} | entity coverage {:.4} pearson {}",
        regime.as_str(),
        bundle.train.len(),
        bundle.validation.len(),
        bundle.test.len(),
        coverage,
        pearson_text
    );
    if regime == Regime::Medium {
        let mut per_relation: BTreeMap<&str, BTreeMap<&str, u64>> = BTreeMap::new();
        for t in &bundle.train {
            *per_relation
                .entry(t.triple.relation.as_str())
                .or_default()
                .entry(t.triple.object.as_str())
                .or_insert(0) += 1;
        }
        for (relation, counts) in per_relation {
            let values: Vec<u64> = counts.values().copied().collect();
            let mean = values.iter().sum::<u64>() as f64 / values.len() as f64;
            let variance = values
                .iter()
                .map(|&v| (v as f64 - mean).powi(2))
                .sum::<f64>()
                / values.len() as f64;
            println!("train answer counts {relation}: support {} variance {variance:.4}", values.len());
        }
    }
    Ok(())
}

fn cmd_stats(train: &Path, test: &Path, per_relation: bool, out: Option<&Path>) -> Result<()> {
    let train_kb = load_kb(train)?;
    let test_kb = load_kb(test)?;
    let train_stats = FrequencyStats::from_answers(train_kb.iter().map(|t| t.object.as_str()));
    let test_stats = FrequencyStats::from_answers(test_kb.iter().map(|t| t.object.as_str()));
    let coverage = freqshock::stats::entity_coverage(&test_stats, &train_stats)?;
    let pearson_text = match pearson(&StatsPair::new(&train_stats, &test_stats)) {
        Ok(p) => format!("{p:.4}"),
        Err(e) => format!("NA ({e})"),
    };
    println!("entity coverage (test w.r.t. train): {coverage:.4}");
    println!("pearson: {pearson_text}");
    if per_relation {
        let to_queries = |kb: &KnowledgeBase| -> Vec<Query> {
            kb.iter()
                .enumerate()
                .map(|(i, t)| Query {
                    query_id: freqshock::kg::query_id(&t.relation, i),
                    subject: t.subject.clone(),
                    relation: t.relation.clone(),
                    gold: t.object.clone(),
                    prompt: String::new(),
                })
                .collect()
        };
        let table = per_relation_similarity(&to_queries(&train_kb), &to_queries(&test_kb));
        match out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                let file = fs::File::create(dir.join("similarity.tsv"))?;
                write_similarity_table(&table, file)?;
                println!("wrote {}", dir.join("similarity.tsv").display());
            }
            None => {
                let mut buf = Vec::new();
                write_similarity_table(&table, &mut buf)?;
                print!("{}", String::from_utf8_lossy(&buf));
            }
        }
    }
    Ok(())
}

fn cmd_predict(cli: Cli) -> Result<()> {
    let Command::Predict {
        variant,
        backend,
        world,
        bundle,
        split,
        templates,
        top_k,
        eta,
        beta,
        demos,
        endpoint,
        timeout_secs,
        retries,
        max_in_flight,
        assume_finetuned,
        failure_threshold,
    } = cli.command
    else {
        unreachable!()
    };
    let out = cli
        .out
        .ok_or_else(|| freqshock::Error::InvalidInput("--out is required".to_string()))?;
    let bundle_data = DatasetBundle::load(&bundle)
        .with_context(|| format!("loading bundle {}", bundle.display()))?;
    let queries = queries_for_split(&bundle_data, &split, templates.as_deref())?;
    let train_queries = queries_for_split(&bundle_data, "train", templates.as_deref())?;
    let mut ctx = PredictContext::new(cli.seed);
    ctx.demos_per_relation = demos;
    if variant == Variant::Fs {
        ctx = ctx.with_demos(DemoPool::from_queries(&train_queries));
    }

    let schedule = MixtureSchedule::new(1, beta, MixtureSchedule::standard().batch_size)?;
    let constants = SimConstants::default();
    let eta_eff = effective_shock(eta, &schedule, constants.retention);

    let mut manifest = RunManifest::new(
        "predict",
        cli.seed,
        serde_json::json!({
            "variant": variant.as_str(),
            "backend": backend,
            "split": split,
            "top_k": top_k,
            "eta_target": eta,
            "beta": beta,
            "eta_eff": eta_eff,
            "demos_per_relation": demos,
        }),
    );

    let run_queries = |backend: &dyn Backend| -> (Vec<PredictionRecord>, Vec<(String, String)>) {
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for q in &queries {
            match predict(variant, &BackendRef(backend), q, &ctx, top_k) {
                Ok(scored) => records.push(PredictionRecord::new(variant, &scored)),
                Err(e) => failures.push((q.query_id.clone(), e.to_string())),
            }
        }
        (records, failures)
    };

    let (records, failures) = match backend.as_str() {
        "sim" => {
            let world_dir = world.ok_or_else(|| {
                freqshock::Error::InvalidInput(
                    "--world is required for the sim backend".to_string(),
                )
            })?;
            let world_data = World::load(&world_dir)
                .with_context(|| format!("loading world {}", world_dir.display()))?;
            let sim = SimLm::from_world(&world_data, constants)?;
            let model = if variant == Variant::Ft {
                let train_kb = DatasetBundle::kb_of(&bundle_data.train);
                sim_finetune(&sim, &train_kb, eta, &schedule)?
            } else {
                sim
            };
            manifest.record_input("world", &world_dir.join("triples.tsv"))?;
            run_queries(&model)
        }
        "remote" => {
            let endpoint = std::env::var(ENDPOINT_ENV).ok().or(endpoint).ok_or_else(|| {
                freqshock::Error::InvalidInput(format!(
                    "remote backend needs --endpoint or {ENDPOINT_ENV}"
                ))
            })?;
            let mut config = RemoteConfig::new(&endpoint);
            config.timeout = Duration::from_secs(timeout_secs);
            config.retries = retries;
            config.max_in_flight = max_in_flight;
            config.assume_finetuned = assume_finetuned;
            let backend = RemoteBackend::new(config)?;
            run_queries(&backend)
        }
        other => bail!(freqshock::Error::InvalidInput(format!(
            "unknown backend {other:?}"
        ))),
    };

    fs::create_dir_all(&out)?;
    let log = fs::File::create(out.join("predictions.jsonl"))?;
    write_prediction_log(&records, log)?;
    if !failures.is_empty() {
        let mut failure_log = String::new();
        for (qid, msg) in &failures {
            failure_log.push_str(&serde_json::json!({"query_id": qid, "error": msg}).to_string());
            failure_log.push('\n');
        }
        fs::write(out.join("failures.jsonl"), failure_log)?;
    }
    manifest.write(&out.join("run_manifest.json"))?;

    let rate = failures.len() as f64 / queries.len().max(1) as f64;
    println!(
        "{} predictions, {} failures -> {}",
        records.len(),
        failures.len(),
        out.display()
    );
    if rate > failure_threshold {
        bail!(
            "failure rate {:.4} exceeds threshold {:.4}; see failures.jsonl",
            rate,
            failure_threshold
        );
    }
    Ok(())
}

/// Adapter so `predict` can take a trait object.
struct BackendRef<'a>(&'a dyn Backend);

impl Backend for BackendRef<'_> {
    fn supports(&self, variant: Variant) -> bool {
        self.0.supports(variant)
    }
    fn predict(
        &self,
        variant: Variant,
        query: &Query,
        ctx: &PredictContext,
        top_k: usize,
    ) -> freqshock::Result<freqshock::predict::ScoredCandidates> {
        self.0.predict(variant, query, ctx, top_k)
    }
}

fn cmd_eval(cli: Cli) -> Result<()> {
    let Command::Eval {
        pred,
        mix,
        oracle_ub,
        bundle,
        split,
        ks,
        common,
        rare,
        vocab,
    } = cli.command
    else {
        unreachable!()
    };
    let bundle_data = DatasetBundle::load(&bundle)
        .with_context(|| format!("loading bundle {}", bundle.display()))?;
    let gold = queries_for_split(&bundle_data, &split, None)?;

    let load_log = |path: &Path| -> Result<BTreeMap<String, _>> {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(read_prediction_log(BufReader::new(file))?)
    };
    let predictions = match (&pred, &mix) {
        (Some(p), None) => load_log(p)?,
        (None, Some(paths)) => mix_logs(&load_log(&paths[0])?, &load_log(&paths[1])?, 0.5)?,
        _ => bail!(freqshock::Error::InvalidInput(
            "exactly one of --pred or --mix is required".to_string()
        )),
    };

    // Coverage gaps are reported together, naming every missing query id.
    let missing: Vec<&str> = gold
        .iter()
        .filter(|q| !predictions.contains_key(&q.query_id))
        .map(|q| q.query_id.as_str())
        .collect();
    if !missing.is_empty() {
        bail!("prediction log misses {} queries: {}", missing.len(), missing.join(", "));
    }

    let mut config = EvalConfig::new();
    config.ks = ks;
    if let Some(path) = vocab {
        config.test_vocabulary = Some(load_entity_set(&path.display().to_string(), &[])?);
    }
    let report = hit_at_k(&predictions, &gold, &config)?;
    print_macro("model", &report);

    let mut documents: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    documents.insert("report".to_string(), serde_json::to_value(&report)?);

    if let Some(other) = oracle_ub {
        let other_log = load_log(&other)?;
        let ub = oracle_upper_bound(&predictions, &other_log, &gold, &config)?;
        print_macro("oracle-ub", &ub);
        documents.insert("oracle_ub".to_string(), serde_json::to_value(&ub)?);
    }

    if common.is_some() || rare.is_some() {
        let mut diag = serde_json::Map::new();
        for (name, spec, default) in [
            ("common", &common, &freqshock::eval::COMMON_CITIES[..]),
            ("rare", &rare, &freqshock::eval::RARE_CITIES[..]),
        ] {
            if let Some(spec) = spec {
                let set = load_entity_set(spec, default)?;
                let rate = set_prediction_rate(&predictions, &set)?;
                let accuracy = conditional_accuracy(&predictions, &gold, &set)?;
                println!(
                    "{name}: prediction rate {rate:.1} conditional accuracy {}",
                    accuracy.map(|a| format!("{a:.1}")).unwrap_or_else(|| "NA".to_string())
                );
                diag.insert(format!("{name}_rate"), serde_json::json!(rate));
                diag.insert(format!("{name}_accuracy"), serde_json::json!(accuracy));
            }
        }
        documents.insert("set_diagnostics".to_string(), serde_json::Value::Object(diag));
    }

    if let Some(out) = cli.out {
        fs::create_dir_all(&out)?;
        for (name, value) in documents {
            let text = serde_json::to_string_pretty(&value)?;
            fs::write(out.join(format!("{name}.json")), text + "\n")?;
        }
        println!("reports -> {}", out.display());
    }
    Ok(())
}

fn print_macro(label: &str, report: &EvalReport) {
    let rendered: Vec<String> = report
        .ks
        .iter()
        .map(|k| {
            format!(
                "hit@{k} {}",
                freqshock::eval::render_pct(report.macro_hit(*k).unwrap_or(0.0))
            )
        })
        .collect();
    println!(
        "{label}: {} over {} relations, {} queries",
        rendered.join(" "),
        report.per_relation.len(),
        report.n_queries
    );
}

fn cmd_recipe(out: &Path, seed: u64, test_size: usize) -> Result<()> {
    let config = RecipeConfig {
        seed,
        test_size,
        ..RecipeConfig::default()
    };
    let outcome = run_recipe(&config)?;
    fs::create_dir_all(out)?;
    outcome.save(out)?;
    let mut manifest = RunManifest::new("recipe", seed, serde_json::to_value(&config)?);
    manifest.record_input("world", &out.join("world").join("triples.tsv"))?;
    manifest.write(&out.join("run_manifest.json"))?;
    print!("{}", outcome.render_table());
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    println!("artifacts -> {}", out.display());
    Ok(())
}
