//! `qbaf`: verify claims, run datasets, contest frameworks, check properties, serve the API.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or input error,
//! 3 property counterexample or inconsistent contest prediction.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qbaf_client::ServiceClient;
use qbaf_core::api::{CreateSessionRequest, VerifyRequest};
use qbaf_core::backend::{Backend, MockBackend};
use qbaf_core::contestation::{apply_edit, ContestationDiff, ContestationEdit, EditKind};
use qbaf_core::generation::{ClaimBaseMode, GenerationParams};
use qbaf_core::harness::{self, Dataset, HarnessError, RunOptions};
use qbaf_core::llm::{ChatClient, ClientOptions, ModelConfig};
use qbaf_core::pipeline::{verify, Claim, Method, MethodConfig, PipelineError, Verdict};
use qbaf_core::properties::{check_properties, PROPERTY_TOLERANCE};
use qbaf_core::qbaf::Qbaf;
use qbaf_core::semantics::{evaluate_with, SemanticsId};
use qbaf_core::templates::TemplateSet;
use qbaf_service::{AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "qbaf", version, about = "Argumentation-based claim verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify one claim and print the verdict with its framework.
    Verify(VerifyArgs),
    /// Run methods over a labelled dataset and write an accuracy table.
    Evaluate(EvaluateArgs),
    /// Apply a file of edits to a framework and print each diff.
    Contest(ContestArgs),
    /// Run the randomized monotonicity and contestability suites.
    CheckProperties(CheckArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct BackendArgs {
    /// Use the offline deterministic backend instead of a model endpoint.
    #[arg(long)]
    mock: bool,
    /// Seed for the mock backend and for dataset sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model name (default: $QBAF_MODEL or gpt-4o-mini).
    #[arg(long)]
    model: Option<String>,
    /// Chat-completions URL (default: $QBAF_ENDPOINT or the OpenAI one).
    #[arg(long)]
    endpoint: Option<String>,
    /// Response cache directory (default: $QBAF_CACHE_DIR).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Do not read cached responses. New responses are still written.
    #[arg(long)]
    no_cache: bool,
    /// Directory of `<template-name>.txt` files overriding the built-in prompts.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Maximum concurrent model requests.
    #[arg(long, default_value_t = 8)]
    max_in_flight: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseMode {
    FixedHalf,
    Estimated,
}

impl From<BaseMode> for ClaimBaseMode {
    fn from(m: BaseMode) -> Self {
        match m {
            BaseMode::FixedHalf => ClaimBaseMode::FixedHalf,
            BaseMode::Estimated => ClaimBaseMode::Estimated,
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    claim: String,
    /// Background information the claim is judged against.
    #[arg(long)]
    context: Option<String>,
    #[arg(long, default_value = "argllm")]
    method: Method,
    #[arg(long, default_value = "df-quad")]
    semantics: SemanticsId,
    /// Levels of arguments below the claim.
    #[arg(long, default_value_t = 1, value_parser = parse_depth)]
    depth: usize,
    #[arg(long, value_enum, default_value = "fixed-half")]
    base_mode: BaseMode,
    /// Write the framework document to this file.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Print the verdict as JSON.
    #[arg(long)]
    json: bool,
    /// Send the request to a running service instead of verifying in-process.
    #[arg(long)]
    server: Option<String>,
    #[command(flatten)]
    backend: BackendArgs,
}

fn parse_depth(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(d) if d >= 1 => Ok(d),
        _ => Err("depth must be a whole number of at least 1".into()),
    }
}

#[derive(Args)]
struct EvaluateArgs {
    /// Line-delimited claim file.
    dataset: PathBuf,
    /// Comma-separated methods: `all`, `baselines`, a method name, or
    /// `argllm-<half|est>-d<depth>[-<semantics>]`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    methods: Vec<String>,
    /// Semantics for argumentative methods that do not name one.
    #[arg(long, default_value = "df-quad")]
    semantics: SemanticsId,
    /// Evaluate a label-balanced sample of this many claims.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Claims verified at once.
    #[arg(long, default_value_t = 8)]
    concurrency: usize,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct ContestArgs {
    /// Framework document.
    framework: PathBuf,
    /// JSON array (or one JSON object per line) of edits.
    edits: PathBuf,
    #[arg(long, default_value = "df-quad")]
    semantics: SemanticsId,
    /// Write the edited framework to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the diffs as JSON.
    #[arg(long)]
    json: bool,
    /// Run the edits as a session on a running service.
    #[arg(long)]
    server: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SemanticsChoice {
    All,
    DfQuad,
    Qem,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, value_enum, default_value = "all")]
    semantics: SemanticsChoice,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Persist sessions here and restore them on start.
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
    /// Allow cross-origin requests from any origin.
    #[arg(long)]
    cors: bool,
    #[command(flatten)]
    backend: BackendArgs,
}

enum Failure {
    Runtime(String),
    Usage(String),
    Counterexample(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Counterexample(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Runtime(m) | Failure::Usage(m) | Failure::Counterexample(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => run_verify(a).await,
        Command::Evaluate(a) => run_evaluate(a).await,
        Command::Contest(a) => run_contest(a).await,
        Command::CheckProperties(a) => run_check(a),
        Command::Serve(a) => run_serve(a).await,
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

/// The selected backend and, for network backends, a handle for call counts.
type Backends = (Arc<dyn Backend>, Option<Arc<ChatClient>>);

fn make_backend(args: &BackendArgs, batch: bool) -> Result<Backends, Failure> {
    if args.mock {
        return Ok((Arc::new(MockBackend::new(args.seed)), None));
    }
    let mut config = ModelConfig::from_env();
    if let Some(m) = &args.model {
        config.model_name = m.clone();
    }
    if let Some(e) = &args.endpoint {
        config.endpoint_url = e.clone();
    }
    let mut options = if batch {
        ClientOptions::for_batch()
    } else {
        ClientOptions::for_interactive()
    };
    if let Some(dir) = &args.cache_dir {
        options.cache_dir = Some(dir.clone());
    }
    options.read_cache = !args.no_cache;
    options.max_in_flight = args.max_in_flight;
    let client = Arc::new(ChatClient::new(config, options).map_err(runtime)?);
    Ok((client.clone(), Some(client)))
}

fn templates(args: &BackendArgs) -> Result<TemplateSet, Failure> {
    match &args.templates {
        Some(dir) => TemplateSet::from_dir(dir).map_err(usage),
        None => Ok(TemplateSet::default()),
    }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::UnknownMethod(_) | PipelineError::EmptyClaim(_) => usage(e),
        _ => runtime(e),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    std::fs::write(path, text + "\n").map_err(|e| runtime(format!("writing {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("reading {}: {e}", path.display())))
}

fn print_verdict(verdict: &Verdict, semantics: Option<SemanticsId>, session: Option<&str>) {
    println!("Method: {}", verdict.method);
    if let Some(s) = semantics {
        println!("Semantics: {s}");
    }
    println!(
        "Verdict: {} (root strength {:.6})",
        output::truth(verdict.label),
        verdict.root_strength
    );
    if let Some(q) = &verdict.qbaf {
        println!("Framework ({} arguments):", q.len());
        print!("{}", output::framework(q, verdict.strengths.as_ref()));
    }
    if let Some(id) = session {
        println!("Session: {id}");
    }
}

async fn run_verify(a: VerifyArgs) -> Outcome {
    let config = MethodConfig {
        method: a.method,
        semantics: a.semantics,
        generation: GenerationParams::new(a.depth, a.base_mode.into()),
    };
    if a.dump.is_some() && !a.method.is_contestable() {
        return Err(usage(format!("--dump needs a framework; method {} has none", a.method)));
    }
    let (verdict, session) = match &a.server {
        Some(url) => {
            let resp = ServiceClient::new(url.as_str())
                .verify(&VerifyRequest {
                    claim: a.claim.clone(),
                    context: a.context.clone(),
                    config,
                })
                .await
                .map_err(runtime)?;
            (resp.verdict, resp.session_id)
        }
        None => {
            let (backend, _) = make_backend(&a.backend, false)?;
            let templates = templates(&a.backend)?;
            let claim = Claim {
                id: "cli".into(),
                text: a.claim.clone(),
                context: a.context.clone(),
                gold_label: None,
            };
            let v = verify(&claim, &config, backend.as_ref(), &templates)
                .await
                .map_err(pipeline_failure)?;
            (v, None)
        }
    };
    if let (Some(path), Some(q)) = (&a.dump, &verdict.qbaf) {
        write_json(path, q)?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&verdict).map_err(runtime)?);
    } else {
        let sem = a.method.is_contestable().then_some(a.semantics);
        print_verdict(&verdict, sem, session.as_deref());
    }
    Ok(())
}

fn expand_methods(tokens: &[String], semantics: SemanticsId) -> Result<Vec<MethodConfig>, Failure> {
    let mut out = Vec::new();
    for token in tokens.iter().map(|t| t.trim()).filter(|t| !t.is_empty()) {
        match token {
            "all" => out.extend(MethodConfig::table_columns(semantics)),
            "baselines" => out.extend(
                MethodConfig::table_columns(semantics)
                    .into_iter()
                    .filter(|m| m.method != Method::Argllm),
            ),
            _ => {
                let mut m: MethodConfig = token.parse().map_err(usage)?;
                let named = SemanticsId::ALL.iter().any(|s| token.ends_with(s.as_str()));
                if m.method == Method::Argllm && !named {
                    m.semantics = semantics;
                }
                out.push(m);
            }
        }
    }
    if out.is_empty() {
        return Err(usage("no methods selected"));
    }
    Ok(out)
}

async fn run_evaluate(a: EvaluateArgs) -> Outcome {
    let dataset = Dataset::load(&a.dataset).map_err(usage)?;
    let methods = expand_methods(&a.methods, a.semantics)?;
    let (backend, client) = make_backend(&a.backend, true)?;
    let templates = templates(&a.backend)?;
    eprintln!(
        "dataset {}: {} claims, {:.0}% true{}",
        dataset.name,
        dataset.len(),
        dataset.balance() * 100.0,
        if dataset.conditioned { ", conditioned" } else { "" }
    );
    let options = RunOptions {
        sample: a.sample,
        seed: a.backend.seed,
        concurrency: a.concurrency,
    };
    let results = harness::run(&dataset, &methods, &options, backend.as_ref(), &templates)
        .await
        .map_err(|e| match e {
            HarnessError::Sample { .. } | HarnessError::Concurrency => usage(e),
            other => runtime(other),
        })?;
    let model = backend.describe();
    harness::write_outputs(&a.out, &model, &results)
        .map_err(|e| runtime(format!("writing {}: {e}", a.out.display())))?;
    print!("{}", harness::render_table(&model, &results));
    for r in results.iter().filter(|r| r.skipped > 0) {
        eprintln!("{}: {} of {} claims skipped", r.method, r.skipped, r.total());
    }
    if let Some(c) = client {
        eprintln!("network calls: {}, cache hits: {}", c.network_calls(), c.cache_hits());
    }
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn parse_edits(text: &str) -> Result<Vec<ContestationEdit>, String> {
    let edits: Vec<ContestationEdit> = if text.trim_start().starts_with('[') {
        serde_json::from_str(text).map_err(|e| e.to_string())?
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
            .collect::<Result<_, _>>()?
    };
    for (i, e) in edits.iter().enumerate() {
        e.check_shape().map_err(|err| format!("edit {}: {err}", i + 1))?;
    }
    Ok(edits)
}

async fn run_contest(a: ContestArgs) -> Outcome {
    let framework: Qbaf = serde_json::from_str(&read_file(&a.framework)?)
        .map_err(|e| usage(format!("{}: {e}", a.framework.display())))?;
    framework.ensure_valid().map_err(usage)?;
    let edits = parse_edits(&read_file(&a.edits)?)
        .map_err(|e| usage(format!("{}: {e}", a.edits.display())))?;

    let before = evaluate_with(&framework, a.semantics).map_err(runtime)?;
    let root0 = before.get(framework.root()).expect("root evaluated");
    let mut diffs: Vec<ContestationDiff> = Vec::new();
    let mut text = format!(
        "framework: {} arguments, root {}, semantics {}\ninitial: root strength {root0:.6}, verdict {}\n",
        framework.len(),
        framework.root(),
        a.semantics,
        output::truth(qbaf_core::decision::decide(root0))
    );
    let mut current = framework.clone();
    let session = match &a.server {
        Some(url) => {
            let client = ServiceClient::new(url.as_str());
            let view = client
                .create_session(&CreateSessionRequest {
                    qbaf: framework.clone(),
                    semantics: a.semantics,
                })
                .await
                .map_err(runtime)?;
            Some((client, view.session_id))
        }
        None => None,
    };
    for (i, edit) in edits.iter().enumerate() {
        let old_score = match edit.kind {
            EditKind::SetBaseScore => current.argument(&edit.target).map(|x| x.base_score),
            _ => None,
        };
        let diff = match &session {
            Some((client, id)) => {
                let resp = client
                    .contest(id, edit)
                    .await
                    .map_err(|e| runtime(format!("edit {}: {e}", i + 1)))?;
                current = resp.session.qbaf;
                resp.diff
            }
            None => {
                let (next, diff) = apply_edit(&current, edit, a.semantics)
                    .map_err(|e| runtime(format!("edit {}: {e}", i + 1)))?;
                current = next;
                diff
            }
        };
        text.push_str(&output::diff(i + 1, &diff, old_score, PROPERTY_TOLERANCE));
        diffs.push(diff);
    }
    let last = diffs.last().map(|d| (d.after_root_strength, d.after_label));
    let (root, label) = last.unwrap_or((root0, qbaf_core::decision::decide(root0)));
    text.push_str(&format!(
        "final: root strength {root:.6}, verdict {}\n",
        output::truth(label)
    ));
    if let Some((_, id)) = &session {
        text.push_str(&format!("session: {id}\n"));
    }
    if let Some(path) = &a.out {
        write_json(path, &current)?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&diffs).map_err(runtime)?);
    } else {
        print!("{text}");
    }
    let bad = diffs
        .iter()
        .position(|d| !d.is_consistent(PROPERTY_TOLERANCE));
    match bad {
        Some(i) => Err(Failure::Counterexample(format!(
            "edit {} moved the root against the predicted direction",
            i + 1
        ))),
        None => Ok(()),
    }
}

fn run_check(a: CheckArgs) -> Outcome {
    let selected: Vec<SemanticsId> = match a.semantics {
        SemanticsChoice::All => SemanticsId::ALL.to_vec(),
        SemanticsChoice::DfQuad => vec![SemanticsId::DfQuad],
        SemanticsChoice::Qem => vec![SemanticsId::Qem],
    };
    let reports: Vec<_> = selected
        .into_iter()
        .map(|s| check_properties(s, a.trials, a.seed))
        .collect();
    if a.json {
        println!("{}", serde_json::to_string_pretty(&reports).map_err(runtime)?);
    } else {
        for r in &reports {
            print!("{}", output::property_report(r));
        }
    }
    let violations: usize = reports.iter().map(|r| r.violations()).sum();
    if violations > 0 {
        return Err(Failure::Counterexample(format!("{violations} property violations")));
    }
    Ok(())
}

async fn run_serve(a: ServeArgs) -> Outcome {
    let (backend, _) = make_backend(&a.backend, false)?;
    let templates = templates(&a.backend)?;
    let state = Arc::new(AppState::new(
        backend,
        templates,
        ServiceConfig {
            snapshot_dir: a.snapshot_dir.clone(),
            permissive_cors: a.cors,
        },
    ));
    let restored = state.restore().map_err(runtime)?;
    if restored > 0 {
        eprintln!("restored {restored} sessions");
    }
    let listener = tokio::net::TcpListener::bind((a.bind.as_str(), a.port))
        .await
        .map_err(|e| runtime(format!("binding {}:{}: {e}", a.bind, a.port)))?;
    eprintln!("listening on http://{}", listener.local_addr().map_err(runtime)?);
    qbaf_service::serve(listener, state).await.map_err(runtime)
}
