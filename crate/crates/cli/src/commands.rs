use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use feedsim::corpus::{
    filter_structural, load_examples, load_schemas, split_lowdata, write_examples, DatabaseSchema, FeedbackExample,
    LowDataSplitConfig, Provenance, SchemaStore,
};
use feedsim::edit_engine::{self, classify_structural, EditScript};
use feedsim::embedding::{EmbeddingError, EmbeddingProvider};
use feedsim::evaluator::{mrr, train_with, write_log_jsonl, RankEntry, Scorer, ScorerModel, TrainConfig, TrainExample};
use feedsim::metrics::{build_records, load_predictions, report, E2eCounts, ReportOptions};
use feedsim::simulator::{
    augment_dataset, select_best, AuditLog, Mistake, SimulatedCandidate, Simulator, SimulatorVariant,
};
use feedsim::sql::{parse_sql, Query};
use feedsim::verbalizer::{explain as explain_query, sample_negative, template_feedback_with, TemplateFeedback, TemplateInventory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::PipelineConfig;

pub struct Ctx {
    pub config: PipelineConfig,
}

impl Ctx {
    pub fn new(config: PipelineConfig) -> Self {
        Ctx { config }
    }

    fn schemas(&self) -> Result<SchemaStore> {
        let path = self
            .config
            .paths
            .schemas
            .as_ref()
            .ok_or_else(|| anyhow!("no schema file given (use --schemas or paths.schemas)"))?;
        Ok(load_schemas(path)?)
    }

    fn inventory(&self) -> Result<Option<TemplateInventory>> {
        match &self.config.paths.templates {
            Some(p) => Ok(Some(TemplateInventory::from_path(p)?)),
            None => Ok(None),
        }
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let out = self.config.paths.out.clone();
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(out)
    }

    fn provider(&self) -> Result<Box<dyn EmbeddingProvider>> {
        self.config.embedding.provider()
    }

    /// The configured model, or the identity over the provider width.
    fn model(&self, provider: &dyn EmbeddingProvider) -> Result<ScorerModel> {
        if let Some(p) = &self.config.paths.model {
            return Ok(ScorerModel::load(p)?);
        }
        let dim = match provider.dim() {
            Some(d) => d,
            None => provider.embed_tokens(&["probe".to_string()])?.dim(),
        };
        Ok(ScorerModel::identity(dim, provider.id()))
    }

    fn load(&self, path: &Path, store: &SchemaStore) -> Result<Vec<FeedbackExample>> {
        let report = load_examples(path, store, &self.config.load_options())?;
        for e in &report.errors {
            eprintln!("{}: skipped {e}", path.display());
        }
        Ok(report.examples)
    }

    /// The example file named on the command line, else `paths.examples`.
    fn examples_path(&self, arg: &Option<PathBuf>) -> Result<PathBuf> {
        match arg.as_ref().or(self.config.paths.examples.as_ref()) {
            Some(p) if p.exists() => Ok(p.clone()),
            Some(p) => bail!("example file does not exist: {}", p.display()),
            None => bail!("no example file given (pass one or set paths.examples)"),
        }
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.config.seed)
    }
}

fn pick_db<'a>(store: &'a SchemaStore, db: Option<&str>) -> Result<&'a DatabaseSchema> {
    match db {
        Some(id) => Ok(store.resolve(id)?),
        None if store.len() == 1 => Ok(store.iter().next().expect("one schema")),
        None => bail!("the schema file has {} databases; pick one with --db", store.len()),
    }
}

/// SQL given inline, or read from a file when the argument names one.
fn read_sql(arg: &str) -> Result<String> {
    let p = Path::new(arg);
    if p.is_file() || arg.ends_with(".sql") {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        return Ok(text.trim().to_string());
    }
    Ok(arg.to_string())
}

fn parse(arg: &str, which: &str, schema: &DatabaseSchema) -> Result<Query> {
    let text = read_sql(arg)?;
    parse_sql(&text, schema).with_context(|| format!("{which} parse"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Template feedback for an example, or `None` when the parses agree or the
/// mistake is structural.
fn reference_for(ex: &FeedbackExample, schema: &DatabaseSchema, inv: &TemplateInventory) -> Result<Option<TemplateFeedback>> {
    let wrong = parse_sql(&ex.wrong_parse, schema).with_context(|| format!("example {}: wrong parse", ex.id))?;
    let gold = parse_sql(&ex.gold_parse, schema).with_context(|| format!("example {}: gold parse", ex.id))?;
    let script = edit_engine::diff(&wrong, &gold);
    if script.is_empty() || classify_structural(&script).is_some() {
        return Ok(None);
    }
    Ok(Some(template_feedback_with(&script, schema, inv).with_context(|| format!("example {}", ex.id))?))
}

/// Ranking entries for examples that carry feedback. Examples without a
/// usable template or without replaceable mentions are reported by id.
fn rank_entries(
    examples: &[FeedbackExample],
    store: &SchemaStore,
    inv: &TemplateInventory,
    negatives: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<RankEntry>, Vec<String>)> {
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for ex in examples {
        let schema = store.resolve(&ex.db_id)?;
        let (Some(feedback), Some(reference)) = (ex.feedback.as_ref(), reference_for(ex, schema, inv)?) else {
            skipped.push(ex.id.clone());
            continue;
        };
        let negs: Result<Vec<String>, _> = (0..negatives).map(|_| sample_negative(feedback, schema, rng)).collect();
        match negs {
            Ok(negatives) => entries.push(RankEntry {
                reference,
                positive: feedback.clone(),
                negatives,
            }),
            Err(_) => skipped.push(ex.id.clone()),
        }
    }
    Ok((entries, skipped))
}

#[derive(Args)]
pub struct IngestArgs {
    /// Raw examples, one JSON object per line.
    #[arg(long)]
    input: Option<PathBuf>,
}

pub fn ingest(ctx: &Ctx, a: &IngestArgs) -> Result<()> {
    let store = ctx.schemas()?;
    let input = ctx.examples_path(&a.input)?;
    let report = load_examples(&input, &store, &ctx.config.load_options())?;
    for e in &report.errors {
        eprintln!("{}: skipped {e}", input.display());
    }
    let (kept, structural) = filter_structural(&report.examples, &store)?;
    let out = ctx.out_dir()?;
    write_examples(&out.join("examples.jsonl"), &kept)?;
    write_examples(&out.join("structural.jsonl"), &structural)?;
    let mut summary = json!({
        "loaded": report.examples.len(),
        "rejected": report.errors.len(),
        "kept": kept.len(),
        "structural": structural.len(),
    });
    if let Some(k) = ctx.config.split.k_percent {
        let (annotated, rest) = split_lowdata(&kept, &LowDataSplitConfig::new(k, ctx.config.seed)?)?;
        write_examples(&out.join("annotated.jsonl"), &annotated)?;
        write_examples(&out.join("to_simulate.jsonl"), &rest)?;
        summary["annotated"] = json!(annotated.len());
        summary["to_simulate"] = json!(rest.len());
    }
    println!("{summary}");
    Ok(())
}

#[derive(Args)]
pub struct PairArgs {
    /// Wrong parse, inline or a file.
    #[arg(long)]
    wrong: String,
    /// Gold parse, inline or a file.
    #[arg(long)]
    gold: String,
    /// Database id; optional when the schema file holds one database.
    #[arg(long)]
    db: Option<String>,
}

impl PairArgs {
    fn script(&self, store: &SchemaStore) -> Result<EditScript> {
        let schema = pick_db(store, self.db.as_deref())?;
        let wrong = parse(&self.wrong, "wrong", schema)?;
        let gold = parse(&self.gold, "gold", schema)?;
        Ok(edit_engine::diff(&wrong, &gold))
    }

    fn template(&self, ctx: &Ctx, store: &SchemaStore) -> Result<TemplateFeedback> {
        let script = self.script(store)?;
        if let Some(kind) = classify_structural(&script) {
            bail!("structural mistake ({}) has no template feedback", kind.name());
        }
        let inv = ctx.inventory()?;
        let schema = pick_db(store, self.db.as_deref())?;
        Ok(template_feedback_with(&script, schema, inv.as_ref().unwrap_or(TemplateInventory::builtin()))?)
    }
}

pub fn diff(ctx: &Ctx, a: &PairArgs) -> Result<()> {
    let script = a.script(&ctx.schemas()?)?;
    for e in &script.edits {
        println!("{}", e.linearize());
    }
    Ok(())
}

#[derive(Args)]
pub struct ExplainArgs {
    /// Query to explain, inline or a file.
    #[arg(long)]
    sql: String,
    #[arg(long)]
    db: Option<String>,
}

pub fn explain(ctx: &Ctx, a: &ExplainArgs) -> Result<()> {
    let store = ctx.schemas()?;
    let schema = pick_db(&store, a.db.as_deref())?;
    let q = parse(&a.sql, "input", schema)?;
    println!("{}", explain_query(&q, schema).text());
    Ok(())
}

#[derive(Args)]
pub struct TemplateArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Print spans and source edits as JSON.
    #[arg(long)]
    json: bool,
}

pub fn template(ctx: &Ctx, a: &TemplateArgs) -> Result<()> {
    let t = a.pair.template(ctx, &ctx.schemas()?)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&t)?);
    } else {
        println!("{}", t.text());
    }
    Ok(())
}

#[derive(Args)]
pub struct NegativesArgs {
    #[arg(long)]
    feedback: String,
    #[arg(long, default_value_t = 5)]
    count: usize,
    #[arg(long)]
    db: Option<String>,
}

pub fn negatives(ctx: &Ctx, a: &NegativesArgs) -> Result<()> {
    let store = ctx.schemas()?;
    let schema = pick_db(&store, a.db.as_deref())?;
    let mut rng = ctx.rng();
    for _ in 0..a.count {
        println!("{}", sample_negative(&a.feedback, schema, &mut rng)?);
    }
    Ok(())
}

#[derive(Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    feedback: String,
}

pub fn score(ctx: &Ctx, a: &ScoreArgs) -> Result<()> {
    let reference = a.pair.template(ctx, &ctx.schemas()?)?;
    let provider = ctx.provider()?;
    let model = ctx.model(provider.as_ref())?;
    let scorer = Scorer::new(&model, provider.as_ref(), &ctx.config.hyperparams);
    let s = scorer.score(&reference, &a.feedback)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({ "template": reference.text(), "feedback": a.feedback, "score": s }))?
    );
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    /// Training examples with feedback.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Held-out examples for MRR during training.
    #[arg(long)]
    dev: Option<PathBuf>,
}

pub fn train_eval(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let store = ctx.schemas()?;
    let inv = ctx.inventory()?;
    let inv = inv.as_ref().unwrap_or(TemplateInventory::builtin());
    let cfg = &ctx.config;
    let provider = ctx.provider()?;
    let mut skipped = Vec::new();
    let mut data = Vec::new();
    for ex in ctx.load(&ctx.examples_path(&a.train)?, &store)? {
        let schema = store.resolve(&ex.db_id)?;
        match (ex.feedback.clone(), reference_for(&ex, schema, inv)?) {
            (Some(positive), Some(reference)) => data.push(TrainExample {
                id: ex.id.clone(),
                reference,
                positive,
                schema,
            }),
            _ => skipped.push(ex.id.clone()),
        }
    }
    let dev = match &a.dev {
        Some(p) => {
            let examples = ctx.load(p, &store)?;
            let (entries, dev_skipped) = rank_entries(&examples, &store, inv, cfg.eval.negatives, &mut ctx.rng())?;
            for id in dev_skipped {
                eprintln!("dev example {id} has no usable feedback; skipped");
            }
            Some(entries)
        }
        None => None,
    };
    let init = match &cfg.paths.model {
        Some(p) => Some(ScorerModel::load(p)?),
        None => None,
    };
    let outcome = train_with(
        &data,
        provider.as_ref(),
        &cfg.hyperparams,
        &TrainConfig {
            seed: cfg.seed,
            init,
            dev: dev.as_deref(),
            dev_every: cfg.eval.dev_every,
        },
    )?;
    skipped.extend(outcome.skipped.iter().cloned());
    let out = ctx.out_dir()?;
    outcome.model.save(&out.join("model.json"))?;
    let mut log = Vec::new();
    write_log_jsonl(&outcome.log, &mut log)?;
    fs::write(out.join("train_log.jsonl"), log)?;
    let summary = json!({
        "trained": data.len() - outcome.skipped.len(),
        "skipped": skipped,
        "epochs": outcome.log.len(),
        "final_loss": outcome.log.last().map(|l| l.mean_loss),
        "mrr_dev": outcome.log.iter().rev().find_map(|l| l.mrr_dev),
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!("{summary}");
    Ok(())
}

#[derive(Args)]
pub struct RankArgs {
    /// Examples with feedback.
    #[arg(long)]
    examples: Option<PathBuf>,
}

pub fn rank(ctx: &Ctx, a: &RankArgs) -> Result<()> {
    let store = ctx.schemas()?;
    let inv = ctx.inventory()?;
    let examples = ctx.load(&ctx.examples_path(&a.examples)?, &store)?;
    let (entries, skipped) = rank_entries(
        &examples,
        &store,
        inv.as_ref().unwrap_or(TemplateInventory::builtin()),
        ctx.config.eval.negatives,
        &mut ctx.rng(),
    )?;
    let provider = ctx.provider()?;
    let model = ctx.model(provider.as_ref())?;
    let value = mrr(&entries, &model, provider.as_ref(), &ctx.config.hyperparams)?;
    println!("{}", json!({ "entries": entries.len(), "skipped": skipped, "mrr": value }));
    Ok(())
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Examples to simulate feedback for.
    #[arg(long)]
    examples: Option<PathBuf>,
}

pub fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<()> {
    let store = ctx.schemas()?;
    let inv = ctx.inventory()?;
    let inv = inv.as_ref().unwrap_or(TemplateInventory::builtin());
    let examples = ctx.load(&ctx.examples_path(&a.examples)?, &store)?;
    let out = ctx.out_dir()?;
    let audit = fs::File::create(out.join("audit.jsonl"))?;
    let sim = Simulator::from_config(&ctx.config.generation).with_audit(AuditLog::new(audit));
    let mut candidates: BTreeMap<SimulatorVariant, Vec<SimulatedCandidate>> = BTreeMap::new();
    let mut simulated = Vec::new();
    let mut skipped = Vec::new();
    for ex in &examples {
        let schema = store.resolve(&ex.db_id)?;
        let Some(reference) = reference_for(ex, schema, inv)? else {
            skipped.push(ex.id.clone());
            continue;
        };
        let explanation = match &ex.explanation {
            Some(e) => e.clone(),
            None => explain_query(&parse_sql(&ex.wrong_parse, schema)?, schema).text(),
        };
        for &v in &ctx.config.variants {
            let text = sim.simulate(ex, v, schema)?;
            simulated.push(FeedbackExample {
                id: format!("{}:{v}", ex.id),
                explanation: Some(explanation.clone()),
                feedback: Some(text.clone()),
                provenance: Provenance::Simulated,
                ..ex.clone()
            });
            candidates.entry(v).or_default().push(SimulatedCandidate {
                reference: reference.clone(),
                feedback: text,
            });
        }
    }
    write_examples(&out.join("simulated.jsonl"), &simulated)?;
    let provider = ctx.provider()?;
    let model = ctx.model(provider.as_ref())?;
    let selection = select_best(&candidates, &Scorer::new(&model, provider.as_ref(), &ctx.config.hyperparams))?;
    write_json(&out.join("selection.json"), &selection)?;
    println!("{}", json!({ "best": selection.best, "means": selection.means, "skipped": skipped }));
    Ok(())
}

#[derive(Args)]
pub struct AugmentArgs {
    /// Parser mistakes, one JSON object per line.
    #[arg(long)]
    mistakes: PathBuf,
    /// Simulator variant; defaults to the one in `selection.json`, else tqes.
    #[arg(long)]
    variant: Option<SimulatorVariant>,
}

fn read_mistakes(path: &Path) -> Result<Vec<Mistake>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

pub fn augment(ctx: &Ctx, a: &AugmentArgs) -> Result<()> {
    let store = ctx.schemas()?;
    let mistakes = read_mistakes(&a.mistakes)?;
    let out = ctx.out_dir()?;
    let variant = match a.variant {
        Some(v) => v,
        None => {
            let sel = out.join("selection.json");
            if sel.exists() {
                let s: feedsim::simulator::Selection = serde_json::from_str(&fs::read_to_string(&sel)?)
                    .with_context(|| format!("reading {}", sel.display()))?;
                s.best
            } else {
                SimulatorVariant::Tqes
            }
        }
    };
    let audit = fs::OpenOptions::new().create(true).append(true).open(out.join("augment_audit.jsonl"))?;
    let sim = Simulator::from_config(&ctx.config.generation).with_audit(AuditLog::new(audit));
    let checkpoint = out.join("augmented.partial.jsonl");
    let report = augment_dataset(&mistakes, &store, &sim, variant, Some(&checkpoint))?;
    write_examples(&out.join("augmented.jsonl"), &report.examples)?;
    fs::remove_file(&checkpoint)?;
    println!(
        "{}",
        json!({
            "variant": variant,
            "examples": report.examples.len(),
            "skipped_structural": report.skipped_structural,
            "resumed": report.resumed,
        })
    );
    Ok(())
}

fn parse_e2e(s: &str) -> Result<E2eCounts, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b, c] = parts[..] else {
        return Err("expected INITIAL_CORRECT,CORRECTED,TOTAL".into());
    };
    let n = |x: &str| x.parse::<usize>().map_err(|e| format!("'{x}': {e}"));
    Ok(E2eCounts {
        initial_correct: n(a)?,
        corrected: n(b)?,
        total: n(c)?,
    })
}

#[derive(Args)]
pub struct MetricsArgs {
    /// Examples with wrong and gold parses.
    #[arg(long)]
    examples: Option<PathBuf>,
    /// JSONL of `{"example_id", "fixed_parse"}`.
    #[arg(long)]
    predictions: PathBuf,
    /// End-to-end counts: initially correct, corrected, total.
    #[arg(long, value_parser = parse_e2e, value_name = "A,B,C")]
    e2e: Option<E2eCounts>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

pub fn metrics(ctx: &Ctx, a: &MetricsArgs) -> Result<()> {
    let store = ctx.schemas()?;
    let examples = ctx.load(&ctx.examples_path(&a.examples)?, &store)?;
    let predictions = load_predictions(&a.predictions)?;
    let records = build_records(&examples, &predictions, &store)?;
    let r = report(&records, &ReportOptions { e2e: a.e2e })?;
    let out = ctx.out_dir()?;
    fs::write(out.join("metrics.json"), r.to_json() + "\n")?;
    if a.json {
        println!("{}", r.to_json());
    } else {
        println!("{}", r.to_text().trim_end());
    }
    Ok(())
}

pub fn health(ctx: &Ctx) -> Result<()> {
    let provider = ctx.provider()?;
    let status = provider.healthcheck();
    println!("{}", serde_json::to_string_pretty(&status)?);
    if !status.reachable {
        return Err(EmbeddingError::Transport {
            attempts: 1,
            message: "health check failed".into(),
        }
        .into());
    }
    Ok(())
}
