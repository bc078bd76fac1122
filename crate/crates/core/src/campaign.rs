//! The end-to-end commands: generate, campaign, evaluate, report, replay.
//!
//! These functions take a parsed [`CampaignConfig`] and a progress writer;
//! the CLI maps their errors onto process exit codes (0 ok, 1 missing
//! tooling, 2 bad config/args, 3 corrupt log). Individual snippet failures
//! are data, not errors: a refused completion or a crashing program is
//! logged and scored 0, and the run carries on.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;

use crate::config::{Aggregation, CampaignConfig};
use crate::eval::{
    evaluate_batch, snippet_id, CompileSpec, EvalRecord,
};
use crate::extract::{extract_code, ExtractionResult, ExtractionStatus};
use crate::gateway::{FinishReason, SamplingParams};
use crate::hash::{derive_seed, fnv1a64_hex};
use crate::metrics::{campaign_stats, round4, CampaignStats};
use crate::optimize::{parse_algorithm_atom, Lexicon, OptPlan};
use crate::prompt::{default_prompt, render_prompt, PromptSpec, RenderedPrompt};
use crate::store::{replay, CampaignStore, LogPayload, ReplayedCampaign, StoreError};
use crate::tpe::{
    default_slt_space, run_study_with_sampler, sampler_by_name, StudyOutcome, TrialConfig,
};

#[derive(Debug, Error)]
pub enum CampaignError {
    /// Bad configuration or arguments (exit 2).
    #[error("config error: {0}")]
    Config(String),
    /// Missing or broken external tooling (exit 1).
    #[error("tooling error: {0}")]
    Tooling(String),
    /// Unreadable or inconsistent campaign log (exit 3).
    #[error("corrupt log: {0}")]
    Corrupt(String),
}

impl CampaignError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CampaignError::Tooling(_) => 1,
            CampaignError::Config(_) => 2,
            CampaignError::Corrupt(_) => 3,
        }
    }
}

fn store_error(e: StoreError) -> CampaignError {
    match e {
        StoreError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            CampaignError::Config(format!("log not found: {io}"))
        }
        StoreError::Io(io) => CampaignError::Tooling(format!("log io error: {io}")),
        other => CampaignError::Corrupt(other.to_string()),
    }
}

/// Verify the compiler named by the compile template can be spawned.
fn check_compiler(spec: &CompileSpec) -> Result<(), CampaignError> {
    let compiler = spec
        .compiler()
        .ok_or_else(|| CampaignError::Config("empty compile template".into()))?;
    match Command::new(compiler).arg("--version").output() {
        Ok(_) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(CampaignError::Tooling(
            format!("compiler not found: {compiler} (install it or change compile.profile)"),
        )),
        Err(e) => Err(CampaignError::Tooling(format!(
            "cannot run compiler {compiler}: {e}"
        ))),
    }
}

fn load_prompt_spec(config: &CampaignConfig) -> Result<PromptSpec, CampaignError> {
    match &config.prompt_spec {
        None => Ok(default_prompt()),
        Some(path) => PromptSpec::from_json_file(path)
            .map_err(|e| CampaignError::Config(format!("prompt spec: {e}"))),
    }
}

fn aggregate(records: &[EvalRecord], aggregation: Aggregation) -> f64 {
    let scores = records.iter().map(|r| r.ipc.unwrap_or(0.0));
    match aggregation {
        Aggregation::Max => scores.fold(0.0, f64::max),
        Aggregation::Mean => {
            let n = records.len().max(1) as f64;
            scores.sum::<f64>() / n
        }
    }
}

fn config_summary(config: &TrialConfig) -> String {
    config
        .assignments
        .iter()
        .map(|(name, value)| format!("{name}={value}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug)]
pub struct GenerateSummary {
    pub requested: u64,
    pub statuses: Vec<(String, ExtractionStatus)>,
    pub log_dir: PathBuf,
}

/// Render the configured prompt, request `count` completions, extract and
/// log every snippet. Gateway failures are logged with `finish_reason:
/// error`, never raised.
pub fn run_generate(
    config: &CampaignConfig,
    count: u64,
    out: &mut dyn Write,
) -> Result<GenerateSummary, CampaignError> {
    if count < 1 {
        return Err(CampaignError::Config("count must be at least 1".into()));
    }
    config.validate()?;
    let gateway = config.build_gateway()?;
    let lexicon = config.load_lexicon()?;
    let mut spec = load_prompt_spec(config)?;
    if let Some(opt) = &config.prompt_opt {
        let plan = opt
            .to_plan(config.seed)
            .map_err(|e| CampaignError::Config(e.to_string()))?;
        spec = crate::optimize::apply_plan(&spec, &plan, &lexicon)
            .map_err(|e| CampaignError::Config(e.to_string()))?;
    }
    let rendered = render_prompt(&spec, config.include_examples)
        .map_err(|e| CampaignError::Config(e.to_string()))?;
    let prompt_hash = fnv1a64_hex(rendered.text.as_bytes());

    let mut store = CampaignStore::open(&config.output_dir).map_err(store_error)?;
    let mut statuses = Vec::new();
    for index in 0..count {
        let mut params = config.sampling.clone();
        params.seed = config
            .sampling
            .seed
            .map(|seed| derive_seed(seed, index));
        let response = gateway
            .complete(&rendered, &params)
            .map_err(|e| CampaignError::Config(e.to_string()))?;
        let extraction = extract_code(&response.text);
        if let Some(code) = &extraction.code {
            store.put_blob(code).map_err(store_error)?;
        }
        let id = snippet_id(&extraction);
        store
            .append(LogPayload::SnippetGenerated {
                trial_id: 0,
                snippet_id: id.clone(),
                prompt_hash: prompt_hash.clone(),
                finish_reason: response.finish_reason,
            })
            .map_err(store_error)?;
        let note = match response.finish_reason {
            FinishReason::Error => format!(
                " [gateway error: {}]",
                response.diagnostic.as_deref().unwrap_or("unknown")
            ),
            FinishReason::Length => " [truncated]".to_string(),
            FinishReason::Stop => String::new(),
        };
        writeln!(
            out,
            "snippet {}/{} {} {}{}",
            index + 1,
            count,
            id,
            extraction.status.as_str(),
            note
        )
        .ok();
        statuses.push((id, extraction.status));
    }
    Ok(GenerateSummary {
        requested: count,
        statuses,
        log_dir: config.output_dir.clone(),
    })
}

#[derive(Debug)]
pub struct CampaignSummary {
    pub outcome: StudyOutcome,
    pub stats: CampaignStats,
    pub log_dir: PathBuf,
}

/// Run the full hyperparameter study: every trial derives its prompt plan
/// and sampling knobs from the suggested config, generates
/// `snippets_per_trial` completions, evaluates them on the backend and
/// feeds the aggregate IPC back to the sampler. Everything is logged.
pub fn run_campaign(
    config: &CampaignConfig,
    out: &mut dyn Write,
) -> Result<CampaignSummary, CampaignError> {
    config.validate()?;
    let compile_spec = config.compile.resolve()?;
    check_compiler(&compile_spec)?;
    let backend = config.build_backend();
    backend
        .check_tooling()
        .map_err(CampaignError::Tooling)?;
    let gateway = config.build_gateway()?;
    let lexicon = config.load_lexicon()?;
    let base_spec = load_prompt_spec(config)?;
    // Fail on an unrenderable prompt now, not inside trial 1.
    render_prompt(&base_spec, true).map_err(|e| CampaignError::Config(e.to_string()))?;

    let mut store = CampaignStore::open(&config.output_dir).map_err(store_error)?;
    let space = default_slt_space();
    let mut sampler = sampler_by_name(&config.sampler, space, config.seed).ok_or_else(|| {
        CampaignError::Config(format!(
            "unknown sampler '{}' (expected tpe or random)",
            config.sampler
        ))
    })?;

    let workers = config.workers.unwrap_or_else(crate::eval::default_workers);
    let n_trials = config.n_trials;
    let mut trial_counter = 0u64;
    let mut best_so_far = f64::NEG_INFINITY;
    let mut live_records: Vec<EvalRecord> = Vec::new();
    let mut fatal: Option<CampaignError> = None;

    let objective = |trial_config: &TrialConfig| -> Result<f64, String> {
        trial_counter += 1;
        let trial_id = trial_counter;
        let mut run_trial = || -> Result<f64, CampaignError> {
            let (rendered, params) =
                trial_prompt_and_params(config, &base_spec, &lexicon, trial_config, trial_id)
                    .map_err(CampaignError::Config)?;
            let prompt_hash = fnv1a64_hex(rendered.text.as_bytes());
            store
                .append(LogPayload::TrialStarted {
                    trial_id,
                    config: trial_config.clone(),
                })
                .map_err(store_error)?;

            let mut extractions = Vec::new();
            for snippet_index in 0..config.snippets_per_trial {
                let mut snippet_params = params.clone();
                snippet_params.seed =
                    Some(derive_seed(config.seed, (trial_id << 16) | snippet_index));
                let response = gateway
                    .complete(&rendered, &snippet_params)
                    .map_err(|e| CampaignError::Config(e.to_string()))?;
                let extraction = extract_code(&response.text);
                if let Some(code) = &extraction.code {
                    store.put_blob(code).map_err(store_error)?;
                }
                store
                    .append(LogPayload::SnippetGenerated {
                        trial_id,
                        snippet_id: snippet_id(&extraction),
                        prompt_hash: prompt_hash.clone(),
                        finish_reason: response.finish_reason,
                    })
                    .map_err(store_error)?;
                extractions.push(extraction);
            }

            let records = evaluate_batch(&extractions, backend.as_ref(), &compile_spec, workers);
            for record in &records {
                store
                    .append(LogPayload::SnippetEvaluated {
                        snippet_id: record.snippet_id.clone(),
                        record: record.clone(),
                    })
                    .map_err(store_error)?;
            }
            let objective = aggregate(&records, config.objective_aggregation);
            live_records.extend(records);
            store
                .append(LogPayload::TrialCompleted {
                    trial_id,
                    objective,
                })
                .map_err(store_error)?;
            Ok(objective)
        };
        match run_trial() {
            Ok(objective) => {
                if objective > best_so_far {
                    best_so_far = objective;
                }
                writeln!(
                    out,
                    "trial {trial_id}/{n_trials} objective={objective:.6} best={best_so_far:.6}"
                )
                .ok();
                Ok(objective)
            }
            Err(e) => {
                // Store/tooling failures abort the campaign once the study
                // loop finishes this pass; config-shaped issues only fail
                // the trial.
                let message = e.to_string();
                if fatal.is_none() {
                    fatal = Some(e);
                }
                Err(message)
            }
        }
    };

    let outcome = run_study_with_sampler(sampler.as_mut(), objective, n_trials as usize);
    if let Some(e) = fatal {
        return Err(e);
    }

    match &outcome.best {
        Some(best) => {
            writeln!(
                out,
                "best trial: objective={:.6} {}",
                best.objective,
                config_summary(&best.config)
            )
            .ok();
        }
        None => {
            writeln!(out, "no trial completed").ok();
        }
    }
    let stats = campaign_stats(&live_records, 0.5)
        .map_err(|e| CampaignError::Config(format!("no records produced: {e}")))?;
    Ok(CampaignSummary {
        outcome,
        stats,
        log_dir: config.output_dir.clone(),
    })
}

/// Map one suggested trial config onto a rendered prompt and sampling
/// parameters.
fn trial_prompt_and_params(
    config: &CampaignConfig,
    base_spec: &PromptSpec,
    lexicon: &Lexicon,
    trial_config: &TrialConfig,
    trial_id: u64,
) -> Result<(RenderedPrompt, SamplingParams), String> {
    let temperature = trial_config
        .real("temperature")
        .ok_or("trial config missing temperature")?;
    let repetition_penalty = trial_config
        .real("repetition_penalty")
        .ok_or("trial config missing repetition_penalty")?;
    let prompt_opt_enabled = trial_config
        .flag("prompt_opt_enabled")
        .ok_or("trial config missing prompt_opt_enabled")?;
    let optimize_system_prompt = trial_config
        .flag("optimize_system_prompt")
        .ok_or("trial config missing optimize_system_prompt")?;
    let include_examples = trial_config
        .flag("include_examples")
        .ok_or("trial config missing include_examples")?;

    let spec = if prompt_opt_enabled {
        let atom = trial_config
            .atom("prompt_opt_algorithms")
            .ok_or("trial config missing prompt_opt_algorithms")?;
        let algorithms = parse_algorithm_atom(atom).map_err(|e| e.to_string())?;
        let plan = OptPlan::new(
            algorithms,
            optimize_system_prompt,
            derive_seed(config.seed, trial_id),
        )
        .map_err(|e| e.to_string())?;
        crate::optimize::apply_plan(base_spec, &plan, lexicon).map_err(|e| e.to_string())?
    } else {
        base_spec.clone()
    };
    let rendered = render_prompt(&spec, include_examples).map_err(|e| e.to_string())?;
    let params = SamplingParams {
        temperature,
        repetition_penalty,
        max_new_tokens: config.sampling.max_new_tokens,
        seed: None,
    };
    Ok((rendered, params))
}

#[derive(Debug)]
pub struct ReportOutput {
    pub stats: CampaignStats,
    pub json_path: PathBuf,
    pub table: String,
}

/// Replay a log and print/emit the campaign statistics.
pub fn run_report(
    log: &Path,
    ipc_threshold: f64,
    out: &mut dyn Write,
) -> Result<ReportOutput, CampaignError> {
    let replayed = replay(log).map_err(store_error)?;
    if replayed.records.is_empty() {
        return Err(CampaignError::Corrupt("empty campaign".into()));
    }
    let stats = campaign_stats(&replayed.records, ipc_threshold)
        .map_err(|e| CampaignError::Corrupt(e.to_string()))?;
    let table = render_report(&stats);
    out.write_all(table.as_bytes()).ok();

    let json_dir = if log.is_dir() {
        log.to_path_buf()
    } else {
        log.parent().unwrap_or(Path::new(".")).to_path_buf()
    };
    let json_path = json_dir.join("report.json");
    let json = serde_json::to_string_pretty(&stats)
        .map_err(|e| CampaignError::Tooling(format!("cannot encode report: {e}")))?;
    std::fs::write(&json_path, json)
        .map_err(|e| CampaignError::Tooling(format!("cannot write report: {e}")))?;
    writeln!(out, "json report: {}", json_path.display()).ok();
    Ok(ReportOutput {
        stats,
        json_path,
        table,
    })
}

/// Human-readable stats table. Probabilities show 4 decimal places of the
/// underlying probability (two of the percentage).
pub fn render_report(stats: &CampaignStats) -> String {
    let mut table = String::new();
    let percent = |key: &str| -> String {
        match stats.pass_at.get(key) {
            Some(p) => format!("{:.2}%", round4(*p) * 100.0),
            None => "n/a (k > n)".to_string(),
        }
    };
    table.push_str("campaign report\n");
    table.push_str(&format!("  snippets (n):        {}\n", stats.n));
    table.push_str(&format!("  valid (c_valid):     {}\n", stats.c_valid));
    table.push_str(&format!(
        "  ipc >= {:<4}          {}\n",
        format!("{}:", stats.threshold),
        stats.c_ipc
    ));
    match stats.best_ipc {
        Some(best) => table.push_str(&format!("  best ipc:            {best:.6}\n")),
        None => table.push_str("  best ipc:            none\n"),
    }
    table.push_str(&format!("  pass@1 (valid):      {}\n", percent("valid@1")));
    table.push_str(&format!("  pass@5 (valid):      {}\n", percent("valid@5")));
    table.push_str(&format!("  pass@1 (ipc):        {}\n", percent("ipc@1")));
    table.push_str(&format!("  pass@5 (ipc):        {}\n", percent("ipc@5")));
    table.push_str("  failures:\n");
    for (class, count) in &stats.failure_histogram {
        table.push_str(&format!("    {:<18} {}\n", class.as_str(), count));
    }
    table
}

/// Replay a log, printing the reconstructed history; exit path for the
/// `replay` command.
pub fn run_replay(log: &Path, out: &mut dyn Write) -> Result<ReplayedCampaign, CampaignError> {
    let replayed = replay(log).map_err(store_error)?;
    for (index, trial) in replayed.trials.iter().enumerate() {
        writeln!(
            out,
            "trial {} objective={:.6} {}",
            index + 1,
            trial.objective,
            config_summary(&trial.config)
        )
        .ok();
    }
    writeln!(
        out,
        "log ok: {} records, {} trials, {} evaluations",
        replayed.log.len(),
        replayed.trials.len(),
        replayed.records.len()
    )
    .ok();
    Ok(replayed)
}

#[derive(Debug)]
pub struct EvaluateSummary {
    pub results: Vec<(PathBuf, EvalRecord)>,
    pub stats: CampaignStats,
}

/// Compile and score every `.c` file in a directory on the configured
/// backend.
pub fn run_evaluate(
    config: &CampaignConfig,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<EvaluateSummary, CampaignError> {
    config.validate()?;
    if !dir.is_dir() {
        return Err(CampaignError::Config(format!(
            "not a directory: {}",
            dir.display()
        )));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CampaignError::Config(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| path.extension().is_some_and(|ext| ext == "c"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CampaignError::Config(format!(
            "no .c files in {}",
            dir.display()
        )));
    }

    let compile_spec = config.compile.resolve()?;
    check_compiler(&compile_spec)?;
    let backend = config.build_backend();
    backend.check_tooling().map_err(CampaignError::Tooling)?;

    let extractions: Vec<ExtractionResult> = files
        .iter()
        .map(|path| {
            let source = std::fs::read_to_string(path).unwrap_or_default();
            let trimmed = source.trim().to_string();
            if trimmed.is_empty() {
                extract_code("")
            } else {
                ExtractionResult {
                    status: ExtractionStatus::BareCode,
                    code: Some(source),
                    diagnostics: Vec::new(),
                }
            }
        })
        .collect();
    let workers = config.workers.unwrap_or_else(crate::eval::default_workers);
    let records = evaluate_batch(&extractions, backend.as_ref(), &compile_spec, workers);

    for (path, record) in files.iter().zip(&records) {
        let ipc = record
            .ipc
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "-".to_string());
        writeln!(
            out,
            "{}: {} ipc={}",
            path.file_name().unwrap_or_default().to_string_lossy(),
            record.failure.as_str(),
            ipc
        )
        .ok();
    }
    let stats = campaign_stats(&records, 0.5)
        .map_err(|e| CampaignError::Config(e.to_string()))?;
    out.write_all(render_report(&stats).as_bytes()).ok();
    Ok(EvaluateSummary {
        results: files.into_iter().zip(records).collect(),
        stats,
    })
}
