//! `oas-enrich`: enrich OpenAPI documents with rules extracted from their
//! parameter descriptions.
//!
//! Exit codes: 0 success, 1 error, 2 findings (conflicts for `enhance` and
//! `record`, diagnostics for `validate`). The conflict exit code can be
//! changed with `--conflicts-exit-code`.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use oas_enrich::enhance::{enhance, validate_document, validate_enhanced};
use oas_enrich::eval::{self, DatasetError, EvalReport, ValueJudgment};
use oas_enrich::extract::{self, ExtractionSettings};
use oas_enrich::llm::{
    Backend, CachedBackend, ConcurrencyLimited, LiveBackend, ReplayCache, ScriptedBackend,
};
use oas_enrich::model::{self, extract_descriptors, SourceFormat};
use oas_enrich::prompt::PromptTemplateSet;
use oas_enrich::rules::RuleBody;

use config::{BackendArg, RunArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "oas-enrich",
    version,
    about = "Enrich OpenAPI documents with rules extracted from parameter descriptions"
)]
struct Cli {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract rules and write the enhanced specification.
    Enhance(EnhanceArgs),
    /// Like `enhance`, sending cache misses upstream and saving the cache.
    Record(EnhanceArgs),
    /// Score an extraction log against ground truth.
    Evaluate(EvaluateArgs),
    /// Check a specification for keyword inconsistencies.
    Validate {
        /// Specification to check (YAML or JSON).
        spec: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
struct EnhanceArgs {
    /// Specification to enhance (YAML or JSON).
    spec: PathBuf,
    /// Output path [default: <input>.enhanced.<ext>].
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Extraction log path [default: <input>.extraction.jsonl next to the output].
    #[arg(long)]
    log: Option<PathBuf>,
    /// Conflict report path [default: <input>.conflicts.json next to the output].
    #[arg(long)]
    report: Option<PathBuf>,
    /// Service label for descriptor identities [default: document title].
    #[arg(long)]
    service: Option<String>,
    /// Exit code when conflicts were recorded (0 to ignore them).
    #[arg(long)]
    conflicts_exit_code: Option<u8>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, clap::Args)]
struct EvaluateArgs {
    /// Extraction log (JSONL) written by `enhance` or `record`.
    log: PathBuf,
    /// Ground truth (JSONL).
    truth: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Value judgments (CSV) to report accuracy for.
    #[arg(long)]
    judgments: Option<PathBuf>,
    /// Externally reported average accuracy to reconcile against, in percent.
    #[arg(long)]
    reference_average: Option<f64>,
    /// Write a judgment sheet with up to `--sample-size` sampled example
    /// values per parameter.
    #[arg(long)]
    sample_to: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    sample_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Enhance(args) => cmd_enhance(cli.config.as_deref(), args, false),
        Command::Record(args) => cmd_enhance(cli.config.as_deref(), args, true),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Validate { spec } => cmd_validate(&spec),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn input_format(path: &Path) -> Option<SourceFormat> {
    path.extension()
        .and_then(|e| e.to_str())
        .and_then(SourceFormat::from_extension)
}

/// `<dir>/<stem of input>.<suffix>`.
fn sibling(dir: &Path, input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("spec");
    dir.join(format!("{stem}.{suffix}"))
}

/// Answers keyed by `<parameter>/<kind>`, `<kind>` or `*`; anything else
/// gets "None".
fn scripted_backend(script: Option<&Path>) -> Result<ScriptedBackend> {
    let table: BTreeMap<String, String> = match script {
        Some(path) => serde_json::from_str(&read(path)?)
            .with_context(|| format!("parsing {}", path.display()))?,
        None => BTreeMap::new(),
    };
    Ok(ScriptedBackend::from_fn(move |request| {
        let answer = request.request_tag.as_ref().and_then(|tag| {
            let kind = tag.rule_kind.as_str();
            table
                .get(&format!("{}/{kind}", tag.descriptor.name))
                .or_else(|| table.get(kind))
                .or_else(|| table.get("*"))
        });
        Ok(answer.cloned().unwrap_or_else(|| "None".to_string()))
    }))
}

fn upstream_backend(cfg: &RunConfig) -> Result<Arc<dyn Backend>> {
    Ok(match cfg.backend {
        BackendArg::Live => Arc::new(
            LiveBackend::from_env(
                cfg.base_url.as_deref(),
                Duration::from_secs(cfg.timeout_secs),
            )
            .context("live backend")?,
        ),
        BackendArg::Scripted => Arc::new(scripted_backend(cfg.script.as_deref())?),
        BackendArg::Replay => bail!("replay has no upstream; use --backend live or scripted"),
    })
}

fn cmd_enhance(config_file: Option<&Path>, args: EnhanceArgs, record: bool) -> Result<ExitCode> {
    let mut run_args = args.run.clone();
    if record && run_args.backend.is_none() {
        run_args.backend = Some(BackendArg::Live);
    }
    let cfg = RunConfig::resolve(config_file, &run_args, args.conflicts_exit_code)?;

    let text = read(&args.spec)?;
    let in_format = input_format(&args.spec);
    let mut spec = model::parse_spec(&text, in_format)
        .with_context(|| format!("parsing {}", args.spec.display()))?;
    if let Some(service) = &args.service {
        spec = spec.with_service(service.clone());
    }
    let templates = match &cfg.templates {
        Some(dir) => PromptTemplateSet::load_dir(dir)
            .with_context(|| format!("templates in {}", dir.display()))?,
        None => PromptTemplateSet::builtin(),
    };

    // Backend: record keeps a cache in front of the upstream; replay
    // serves only from the cache.
    let mut cache = None;
    let backend: Arc<dyn Backend> = match (record, cfg.backend) {
        (true, BackendArg::Replay) => bail!("record needs --backend live or scripted"),
        (true, _) => {
            let path = cfg
                .cache
                .clone()
                .ok_or_else(|| anyhow!("record needs --cache"))?;
            let c = Arc::new(ReplayCache::load_or_empty(&path)?);
            cache = Some((path, c.clone()));
            Arc::new(CachedBackend::record(c, upstream_backend(&cfg)?))
        }
        (false, BackendArg::Replay) => {
            let path = cfg
                .cache
                .clone()
                .ok_or_else(|| anyhow!("replay needs --cache"))?;
            Arc::new(CachedBackend::replay(Arc::new(ReplayCache::load(&path)?)))
        }
        (false, _) => upstream_backend(&cfg)?,
    };
    let backend = ConcurrencyLimited::new(backend, cfg.concurrency);

    let settings = ExtractionSettings {
        model_name: cfg.model_name.clone(),
        temperature: cfg.temperature,
        max_output_tokens: cfg.max_output_tokens,
        k_shots: cfg.k_shots,
    };
    let descriptors = extract_descriptors(&spec);
    log::info!(
        "{} descriptors, {} completions",
        descriptors.len(),
        descriptors.len() * 4
    );
    let run = extract::extract_all(
        &descriptors,
        &backend,
        &templates,
        &settings,
        cfg.concurrency,
    );

    let in_dir = args.spec.parent().unwrap_or(Path::new(""));
    let out_format = cfg
        .format
        .map(SourceFormat::from)
        .or(in_format)
        .unwrap_or(spec.source_format);
    let ext = match (cfg.format, args.spec.extension().and_then(|e| e.to_str())) {
        (None, Some(ext)) => ext,
        _ => out_format.extension(),
    };
    let out_path = args
        .output
        .clone()
        .unwrap_or_else(|| sibling(in_dir, &args.spec, &format!("enhanced.{ext}")));
    let out_dir = out_path.parent().unwrap_or(Path::new(""));

    // All files are written here, after the run.
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| sibling(out_dir, &args.spec, "extraction.jsonl"));
    write(&log_path, &run.log_jsonl())?;
    if let Some((path, c)) = &cache {
        c.save(path)?;
        log::info!("cache {} holds {} entries", path.display(), c.len());
    }
    if let Some(first) = run.errors.first() {
        for e in &run.errors {
            log::error!("{e}");
        }
        bail!("{} completion(s) failed; first: {first}", run.errors.len());
    }

    let enhanced = enhance(&spec, &run.rules)?;
    // Nothing applied and same format: keep the input bytes.
    let rendered = if enhanced.applied.is_empty() && Some(out_format) == in_format {
        text
    } else {
        model::serialize_document(&enhanced.document, out_format)?
    };
    write(&out_path, &rendered)?;

    for d in validate_enhanced(&enhanced) {
        log::warn!("{}: {:?}: {}", d.pointer, d.check, d.message);
    }
    eprintln!(
        "{}: {} rules, {} applied, {} conflicts, {} duplicates -> {}",
        spec.service,
        enhanced.rule_count(),
        enhanced.applied.len(),
        enhanced.conflicts.len(),
        enhanced.duplicates.len(),
        out_path.display()
    );
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| sibling(out_dir, &args.spec, "conflicts.json"));
    write(
        &report_path,
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&enhanced.conflict_report())?
        ),
    )?;
    if enhanced.conflicts.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(cfg.conflicts_exit_code))
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<ExitCode> {
    let entries = extract::parse_log_jsonl(&read(&args.log)?)
        .with_context(|| format!("in {}", args.log.display()))?;
    let truth = eval::parse_ground_truth(&read(&args.truth)?)
        .with_context(|| format!("in {}", args.truth.display()))?;
    if truth.is_empty() {
        return Err(DatasetError::EmptyTruth)
            .with_context(|| format!("in {}", args.truth.display()));
    }
    let rules: Vec<_> = entries.iter().flat_map(|e| e.extracted_rules()).collect();
    let per_service = eval::compare_by_service(&rules, &truth)?;
    let report = EvalReport::from_counts(&per_service);
    print!("{}", report.to_markdown());

    let mut json = serde_json::json!({ "rules": report });
    if let Some(path) = &args.judgments {
        let judgments = eval::parse_judgments(&read(path)?)
            .with_context(|| format!("in {}", path.display()))?;
        let services: Vec<String> = per_service.keys().cloned().collect();
        let accuracy =
            eval::accuracy_report(&judgments, &services).with_reference(args.reference_average);
        println!();
        print!("{}", accuracy.to_markdown());
        json["values"] = serde_json::to_value(&accuracy)?;
    }
    if let Some(path) = &args.json {
        write(path, &format!("{}\n", serde_json::to_string_pretty(&json)?))?;
    }
    if let Some(path) = &args.sample_to {
        if args.sample_size == 0 {
            bail!("--sample-size must be positive");
        }
        let mut sheet = Vec::new();
        for entry in &entries {
            for body in &entry.rules {
                let RuleBody::Examples { values, .. } = body else {
                    continue;
                };
                for v in eval::sample_values(values, args.sample_size, args.seed) {
                    sheet.push(ValueJudgment {
                        service: entry.descriptor.service.clone(),
                        path: entry.descriptor.path.clone(),
                        method: entry.descriptor.method.as_str().to_string(),
                        parameter: entry.descriptor.name.clone(),
                        value: v.to_string(),
                        syntactic: false,
                        semantic: false,
                        judge: String::new(),
                    });
                }
            }
        }
        write(path, &eval::judgments_to_csv(&sheet)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(path: &Path) -> Result<ExitCode> {
    let text = read(path)?;
    let spec = model::parse_spec(&text, input_format(path))
        .with_context(|| format!("parsing {}", path.display()))?;
    let diagnostics = validate_document(&spec.raw_document, spec.source_format);
    for d in &diagnostics {
        println!(
            "{}: {}: {}",
            d.pointer,
            serde_json::to_value(d.check)?.as_str().unwrap_or_default(),
            d.message
        );
    }
    Ok(if diagnostics.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
