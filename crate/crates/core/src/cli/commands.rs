//! Subcommand bodies. Each reads its declared inputs under the data or out
//! directory and writes its outputs under the out directory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use serde_json::json;

use super::config::RunConfig;
use super::log::StageLog;
use super::CliError;
use crate::features::{
    balance_dataset, corpus_stats, derive_all, read_profiles_jsonl, split, write_profiles_csv, write_profiles_jsonl,
    CompanyProfile, ExecutiveTitles, FeatureError, SplitSpec,
};
use crate::gbdt::fit;
use crate::ingest::{load_dir, write_dir, ColumnMapping, CompanyStore, IngestError, LoadOptions, TableKind};
use crate::llm::{read_audit, rescore, run_eval, write_audit, ChatClient, EvalRun, LlmError};
use crate::metrics::{
    bertscore, classification_report, compute_idf, mean_bertscore, render_report_text, BertScoreResult,
    CachingProvider, ClassificationReport, EmbeddingProvider, FixtureProvider, HttpEmbeddingProvider, MetricsError,
};
use crate::prompt::{
    compile_records, emit_jsonl, emit_training_manifest, read_jsonl_file, sample_fewshot, PromptError, PromptSettings,
    PromptTemplates, RenderMode, RenderOptions, SftRecord,
};
use crate::synth::{estimate_bayes_accuracy, generate, NoiseMode, SynthConfig, SynthError};
use crate::tokens::DefaultCounter;

/// Output locations under the out directory.
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }
    pub fn ingest(&self) -> PathBuf {
        self.root.join("ingest")
    }
    pub fn profiles(&self) -> PathBuf {
        self.root.join("features").join("profiles.jsonl")
    }
    pub fn profiles_csv(&self) -> PathBuf {
        self.root.join("features").join("profiles.csv")
    }
    pub fn stats(&self) -> PathBuf {
        self.root.join("stats").join("stats.json")
    }
    pub fn split(&self, name: &str) -> PathBuf {
        self.root.join("splits").join(format!("{name}.jsonl"))
    }
    pub fn prompts(&self, name: &str) -> PathBuf {
        self.root.join("prompts").join(format!("{name}.jsonl"))
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("prompts").join("training_manifest.json")
    }
    pub fn baseline(&self) -> PathBuf {
        self.root.join("baseline")
    }
    pub fn eval(&self, regime: &str) -> PathBuf {
        self.root.join("eval").join(regime)
    }
}

pub const SYNTH_SUMMARY_FILE: &str = "synth_summary.json";
const BAYES_MC_SAMPLES: usize = 100_000;

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn require(path: &Path, hint: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("missing input {} ({hint})", path.display())))
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(data)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| data(format!("{}: {e}", path.display())))
}

fn ingest_error(e: IngestError) -> CliError {
    match e {
        IngestError::Io { .. } => CliError::Usage(e.to_string()),
        IngestError::Mapping { .. } => CliError::Usage(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

fn prompt_error(e: PromptError) -> CliError {
    match e {
        PromptError::Template(_) | PromptError::Manifest(_) | PromptError::UnknownVariant(_) => {
            CliError::Usage(e.to_string())
        }
        _ => CliError::Data(e.to_string()),
    }
}

fn read_profiles(path: &Path) -> Result<Vec<CompanyProfile>, CliError> {
    let f = File::open(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    read_profiles_jsonl(BufReader::new(f)).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn write_profiles(path: &Path, profiles: &[CompanyProfile]) -> Result<(), CliError> {
    let mut out = create(path)?;
    write_profiles_jsonl(&mut out, profiles).map_err(data)?;
    out.flush().map_err(data)
}

fn load_tables(dir: &Path, mapping: &ColumnMapping, strict: bool) -> Result<crate::ingest::IngestResult, CliError> {
    load_dir(dir, mapping, LoadOptions { strict }).map_err(ingest_error)
}

pub fn synth(cfg: &RunConfig, dest: Option<&Path>) -> Result<(), CliError> {
    let log = StageLog::start("synth");
    let mut sc = match &cfg.synth_config {
        Some(p) => SynthConfig::from_json_file(p).map_err(|e| CliError::Usage(e.to_string()))?,
        None => SynthConfig::reference(),
    };
    if let Some(n) = cfg.synth_n {
        sc.n_companies = n;
    }
    if let Some(m) = cfg.synth_mode {
        sc.mode = m;
    }
    sc.seed = cfg.stage_seed("synth");
    sc.reference_date = cfg.reference_date;
    let dir = dest.unwrap_or(&cfg.data_dir);
    let summary = generate(&sc, dir).map_err(|e| match e {
        SynthError::Config(m) => CliError::Usage(m),
        SynthError::Io(m) => CliError::Data(m),
    })?;
    let bayes = match sc.mode {
        NoiseMode::LogisticSampling => Some(estimate_bayes_accuracy(&sc, BAYES_MC_SAMPLES).map_err(data)?),
        NoiseMode::DeterministicThreshold => None,
    };
    write_json(
        &dir.join(SYNTH_SUMMARY_FILE),
        &json!({ "summary": summary, "bayes_accuracy": bayes, "config": sc }),
    )?;
    println!(
        "synthesized {} companies ({} positive) into {}",
        summary.companies,
        summary.positives,
        dir.display()
    );
    log.finish(json!({ "companies": summary.companies, "positives": summary.positives, "ipos": summary.ipos, "acquisitions": summary.acquisitions }));
    Ok(())
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let log = StageLog::start("ingest");
    let mut mapping = ColumnMapping::crunchbase_default();
    if let Some(p) = &cfg.mapping {
        mapping = mapping.overlay(&ColumnMapping::from_file(p).map_err(|e| CliError::Usage(e.to_string()))?);
    }
    for kind in TableKind::ALL {
        require(&cfg.data_dir.join(kind.file_name()), "expected one CSV per table in the data directory")?;
    }
    let result = load_tables(&cfg.data_dir, &mapping, cfg.strict_ingest)?;
    let counts = result.counts();
    for e in &result.row_errors {
        log.warn("row_error", json!({ "table": e.table, "line": e.line, "reason": e.reason }));
    }
    let out = Layout::new(&cfg.out_dir).ingest();
    write_dir(&out, &result.tables).map_err(ingest_error)?;
    let store = CompanyStore::build(result.tables);
    let integrity = store.integrity();
    if !integrity.is_clean() {
        log.warn("dangling_references", json!({ "total": integrity.total() }));
    }
    write_json(&out.join("integrity.json"), integrity)?;
    write_json(&out.join("counts.json"), &counts)?;
    let mut errs = create(&out.join("row_errors.jsonl"))?;
    for e in &result.row_errors {
        writeln!(errs, "{}", serde_json::to_string(e).map_err(data)?).map_err(data)?;
    }
    errs.flush().map_err(data)?;
    for c in &counts {
        println!("{:<16} rows {:>8}  errors {:>6}", c.table, c.rows, c.errors);
    }
    log.finish(json!({ "tables": counts, "row_errors": result.row_errors.len(), "dangling": integrity.total() }));
    Ok(())
}

pub fn features(cfg: &RunConfig) -> Result<(), CliError> {
    let log = StageLog::start("features");
    let layout = Layout::new(&cfg.out_dir);
    let dir = layout.ingest();
    for kind in TableKind::ALL {
        require(&dir.join(kind.file_name()), "run `exitlens ingest` first")?;
    }
    let titles = match &cfg.executive_titles {
        Some(p) => ExecutiveTitles::parse(
            &std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        ),
        None => ExecutiveTitles::default(),
    };
    let result = load_tables(&dir, &ColumnMapping::identity(), cfg.strict_ingest)?;
    let store = CompanyStore::build(result.tables);
    let profiles = derive_all(&store, cfg.reference_date, &titles);
    write_profiles(&layout.profiles(), &profiles)?;
    let mut csv_out = create(&layout.profiles_csv())?;
    write_profiles_csv(&mut csv_out, &profiles).map_err(data)?;
    csv_out.flush().map_err(data)?;
    let positives = profiles.iter().filter(|p| p.success == 1).count();
    println!("derived {} profiles ({positives} positive)", profiles.len());
    log.finish(json!({ "profiles": profiles.len(), "positives": positives }));
    Ok(())
}

pub fn stats(cfg: &RunConfig) -> Result<(), CliError> {
    let log = StageLog::start("stats");
    let layout = Layout::new(&cfg.out_dir);
    require(&layout.profiles(), "run `exitlens features` first")?;
    let profiles = read_profiles(&layout.profiles())?;
    let s = corpus_stats(&profiles, &DefaultCounter);
    write_json(&layout.stats(), &s)?;
    println!(
        "companies {}  positives {}  negatives {}  positive_ratio {:.4}",
        s.companies, s.positives, s.negatives, s.positive_ratio
    );
    for f in &s.features {
        println!(
            "{:<22} min {:>14.2}  median {:>14.2}  max {:>14.2}  missing {:.3}",
            f.name, f.min, f.median, f.max, f.missing_rate
        );
    }
    log.finish(json!({ "companies": s.companies, "positives": s.positives }));
    Ok(())
}

fn feature_error(e: FeatureError) -> CliError {
    match e {
        FeatureError::BadRatios(_) => CliError::Usage(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

pub fn split_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let log = StageLog::start("split");
    let layout = Layout::new(&cfg.out_dir);
    require(&layout.profiles(), "run `exitlens features` first")?;
    let profiles = read_profiles(&layout.profiles())?;
    let pool = if cfg.balance {
        balance_dataset(&profiles, cfg.stage_seed("balance")).map_err(feature_error)?
    } else {
        profiles
    };
    let spec = SplitSpec {
        seed: cfg.stage_seed("split"),
        ..cfg.split
    };
    let parts = split(&pool, &spec).map_err(feature_error)?;
    let mut sizes = serde_json::Map::new();
    for (name, part) in [("train", &parts.train), ("val", &parts.val), ("test", &parts.test)] {
        write_profiles(&layout.split(name), part)?;
        let pos = part.iter().filter(|p| p.success == 1).count();
        println!("{name:<5} {:>7} companies  {pos:>7} positive", part.len());
        sizes.insert(name.into(), json!({ "companies": part.len(), "positives": pos }));
    }
    log.finish(json!({ "pool": pool.len(), "balanced": cfg.balance, "splits": sizes }));
    Ok(())
}

fn prompt_settings(cfg: &RunConfig, mode: RenderMode) -> Result<PromptSettings, CliError> {
    let templates = match &cfg.templates {
        Some(dir) => PromptTemplates::from_dir(dir).map_err(prompt_error)?,
        None => PromptTemplates::default(),
    };
    Ok(PromptSettings {
        variant: cfg.variant,
        mode,
        max_tokens: cfg.budget,
        options: RenderOptions {
            include_description: cfg.include_description,
            leakage_guard: cfg.leakage_guard,
        },
        templates,
    })
}

fn compile_part(
    profiles: &[CompanyProfile],
    cfg: &RunConfig,
    mode: RenderMode,
    name: &str,
) -> Result<Vec<SftRecord>, CliError> {
    let mut records = compile_records(profiles, &prompt_settings(cfg, mode)?, &DefaultCounter).map_err(prompt_error)?;
    for r in &mut records {
        r.chat.meta.split = Some(name.into());
    }
    Ok(records)
}

/// Without splits every profile becomes an inference record in `all.jsonl`.
pub fn prompts(cfg: &RunConfig) -> Result<(), CliError> {
    let log = StageLog::start("prompts");
    let layout = Layout::new(&cfg.out_dir);
    let mut counts = serde_json::Map::new();
    let have_splits = ["train", "val", "test"].iter().all(|s| layout.split(s).is_file());
    let dir = layout.manifest().parent().expect("prompts dir").to_path_buf();
    std::fs::create_dir_all(&dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    if have_splits {
        let mut train = Vec::new();
        for (name, mode) in [("train", RenderMode::Sft), ("val", RenderMode::Sft), ("test", RenderMode::Inference)] {
            let records = compile_part(&read_profiles(&layout.split(name))?, cfg, mode, name)?;
            emit_jsonl(&records, &layout.prompts(name)).map_err(prompt_error)?;
            counts.insert(name.into(), records.len().into());
            if name == "train" {
                train = records;
            }
        }
        for &k in &cfg.fewshot_k {
            let subset = sample_fewshot(&train, k, cfg.stage_seed("fewshot")).map_err(prompt_error)?;
            let name = format!("fewshot_{k}");
            emit_jsonl(&subset, &layout.prompts(&name)).map_err(prompt_error)?;
            counts.insert(name, subset.len().into());
        }
    } else {
        if !cfg.fewshot_k.is_empty() {
            return Err(CliError::Usage(
                "few-shot subsets are drawn from the training split; run `exitlens split` first".into(),
            ));
        }
        require(&layout.profiles(), "run `exitlens features` first")?;
        let records = compile_part(&read_profiles(&layout.profiles())?, cfg, RenderMode::Inference, "all")?;
        emit_jsonl(&records, &layout.prompts("all")).map_err(prompt_error)?;
        counts.insert("all".into(), records.len().into());
    }
    let manifest = emit_training_manifest(&cfg.manifest_overrides).map_err(prompt_error)?;
    write_bytes(&layout.manifest(), manifest.as_bytes())?;
    for (name, n) in &counts {
        println!("{name:<14} {n:>7} records");
    }
    log.finish(json!({ "variant": cfg.variant.as_str(), "budget": cfg.budget, "records": counts }));
    Ok(())
}

fn xy(profiles: &[CompanyProfile]) -> (Vec<Vec<f64>>, Vec<u8>) {
    profiles
        .iter()
        .map(|p| (p.feature_vector().to_vec(), p.success))
        .unzip()
}

#[derive(Serialize)]
struct BaselineReport<'a> {
    split: &'static str,
    n_train: usize,
    n_test: usize,
    rounds: usize,
    report: &'a ClassificationReport,
}

pub fn train_baseline(cfg: &RunConfig) -> Result<(), CliError> {
    let log = StageLog::start("train-baseline");
    let layout = Layout::new(&cfg.out_dir);
    for s in ["train", "test"] {
        require(&layout.split(s), "run `exitlens split` first")?;
    }
    let train = read_profiles(&layout.split("train"))?;
    let test = read_profiles(&layout.split("test"))?;
    let mut gcfg = cfg.gbdt.clone();
    gcfg.seed = cfg.stage_seed("gbdt");
    let (x, y) = xy(&train);
    let model = fit(&x, &y, &gcfg).map_err(data)?;
    let (tx, ty) = xy(&test);
    let preds = tx
        .iter()
        .map(|row| model.predict(row, 0.5))
        .collect::<Result<Vec<u8>, _>>()
        .map_err(data)?;
    let report = classification_report(&preds, &ty).map_err(data)?;
    let dir = layout.baseline();
    write_bytes(&dir.join("model.json"), format!("{}\n", model.to_json()).as_bytes())?;
    write_json(
        &dir.join("report.json"),
        &BaselineReport {
            split: "test",
            n_train: train.len(),
            n_test: test.len(),
            rounds: model.trees.len(),
            report: &report,
        },
    )?;
    let text = render_report_text(&report, None);
    write_bytes(&dir.join("report.txt"), text.as_bytes())?;
    print!("{text}");
    log.finish(json!({ "n_train": train.len(), "n_test": test.len(), "trees": model.trees.len(), "accuracy": report.accuracy }));
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    regime: &'a str,
    model: &'a str,
    records: usize,
    parse_failures: usize,
    transport_errors: usize,
    status_counts: crate::llm::StatusCounts,
    report: &'a ClassificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    bertscore: Option<BertScoreResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bertscore_pairs: Option<usize>,
}

fn eval_summary<'a>(cfg: &'a RunConfig, run: &'a EvalRun, bert: Option<(BertScoreResult, usize)>) -> EvalSummary<'a> {
    EvalSummary {
        regime: &cfg.regime,
        model: &cfg.endpoint.model,
        records: run.outcomes.len(),
        parse_failures: run.parse_failures,
        transport_errors: run.transport_errors,
        status_counts: run.status_counts,
        report: &run.report,
        bertscore: bert.map(|b| b.0),
        bertscore_pairs: bert.map(|b| b.1),
    }
}

fn llm_error(e: LlmError) -> CliError {
    match e {
        LlmError::Config(m) => CliError::Usage(m),
        LlmError::Io(m) | LlmError::Protocol(m) => CliError::Data(m),
        other => CliError::Transport(other.to_string()),
    }
}

pub fn eval_endpoint(cfg: &RunConfig, input: Option<&Path>) -> Result<(), CliError> {
    let log = StageLog::start("eval-endpoint");
    let layout = Layout::new(&cfg.out_dir);
    let path = match input {
        Some(p) => p.to_path_buf(),
        None if layout.prompts("test").is_file() => layout.prompts("test"),
        None => layout.prompts("all"),
    };
    require(&path, "run `exitlens prompts` first or pass --input")?;
    let records = read_jsonl_file(&path).map_err(prompt_error)?;
    if records.is_empty() {
        return Err(CliError::Data(format!("{} holds no records", path.display())));
    }
    let client = ChatClient::new(cfg.endpoint.clone()).map_err(llm_error)?;
    log.info(
        "requesting",
        json!({ "records": records.len(), "url": cfg.endpoint.completions_url(), "max_in_flight": cfg.endpoint.max_in_flight }),
    );
    let run = run_eval(&client, &records, cfg.endpoint.max_in_flight).map_err(llm_error)?;
    let dir = layout.eval(&cfg.regime);
    let mut audit = create(&dir.join("audit.jsonl"))?;
    write_audit(&mut audit, &run.outcomes).map_err(data)?;
    audit.flush().map_err(data)?;
    write_json(&dir.join("report.json"), &eval_summary(cfg, &run, None))?;
    let text = render_report_text(&run.report, None);
    write_bytes(&dir.join("report.txt"), text.as_bytes())?;
    print!("{text}");
    println!("parse_failures   {}\ntransport_errors {}", run.parse_failures, run.transport_errors);
    log.finish(json!({
        "records": run.outcomes.len(),
        "accuracy": run.report.accuracy,
        "parse_failures": run.parse_failures,
        "transport_errors": run.transport_errors,
    }));
    if run.transport_errors == run.outcomes.len() {
        return Err(CliError::Transport(format!(
            "every request failed; first error: {}",
            run.outcomes[0].error.as_deref().unwrap_or("unknown")
        )));
    }
    Ok(())
}

fn embedding_provider(cfg: &RunConfig) -> Result<Option<Box<dyn EmbeddingProvider>>, CliError> {
    if let Some(p) = &cfg.embeddings_fixture {
        let f = FixtureProvider::from_file(p).map_err(|e| CliError::Usage(e.to_string()))?;
        return Ok(Some(Box::new(CachingProvider::new(f))));
    }
    if let Some(url) = &cfg.embeddings_url {
        let http = HttpEmbeddingProvider::new(
            url.clone(),
            cfg.endpoint.retry_policy(),
            Duration::from_secs(cfg.endpoint.timeout_secs),
        )
        .map_err(|e| CliError::Transport(e.to_string()))?;
        return Ok(Some(Box::new(CachingProvider::new(http))));
    }
    Ok(None)
}

fn metrics_error(e: MetricsError, remote: bool) -> CliError {
    match e {
        MetricsError::Provider(m) if remote => CliError::Transport(m),
        other => CliError::Data(other.to_string()),
    }
}

/// Mean BERTScore of parsed justifications against their references, over
/// outcomes that have both.
fn score_justifications(
    run: &EvalRun,
    provider: &dyn EmbeddingProvider,
    idf: bool,
    remote: bool,
) -> Result<Option<(BertScoreResult, usize)>, CliError> {
    let mut pairs = Vec::new();
    for o in &run.outcomes {
        if let Some(j) = o.parsed.justification.as_deref() {
            if !o.reference.trim().is_empty() {
                let c = provider.embed(j).map_err(|e| metrics_error(e, remote))?;
                let r = provider.embed(&o.reference).map_err(|e| metrics_error(e, remote))?;
                pairs.push((c, r));
            }
        }
    }
    if idf && !pairs.is_empty() {
        let docs: Vec<Vec<String>> = pairs.iter().map(|(_, r)| r.tokens.clone()).collect();
        let (weights, unseen) = compute_idf(&docs);
        pairs = pairs
            .into_iter()
            .map(|(c, r)| (c.with_idf(&weights, unseen), r.with_idf(&weights, unseen)))
            .collect();
    }
    let scores = pairs
        .iter()
        .map(|(c, r)| bertscore(c, r))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| metrics_error(e, remote))?;
    Ok(mean_bertscore(&scores).map(|m| (m, scores.len())))
}

pub fn score(cfg: &RunConfig, audit: Option<&Path>) -> Result<(), CliError> {
    let log = StageLog::start("score");
    let dir = Layout::new(&cfg.out_dir).eval(&cfg.regime);
    let path = audit.map(Path::to_path_buf).unwrap_or_else(|| dir.join("audit.jsonl"));
    require(&path, "run `exitlens eval-endpoint` first or pass --audit")?;
    let f = File::open(&path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let lines = read_audit(BufReader::new(f)).map_err(|e| data(format!("{}: {e}", path.display())))?;
    if lines.is_empty() {
        return Err(CliError::Data(format!("{} holds no audit lines", path.display())));
    }
    let run = rescore(&lines).map_err(data)?;
    let bert = match embedding_provider(cfg)? {
        Some(p) => score_justifications(&run, p.as_ref(), cfg.idf, cfg.embeddings_url.is_some())?,
        None => None,
    };
    write_json(&dir.join("score.json"), &eval_summary(cfg, &run, bert))?;
    let text = render_report_text(&run.report, bert.as_ref().map(|b| &b.0));
    write_bytes(&dir.join("score.txt"), text.as_bytes())?;
    print!("{text}");
    log.finish(json!({
        "records": run.outcomes.len(),
        "accuracy": run.report.accuracy,
        "bertscore_pairs": bert.map(|b| b.1),
    }));
    Ok(())
}
