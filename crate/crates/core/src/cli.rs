//! Command-line front end. `run` parses argv, dispatches, and maps errors
//! to exit codes: 0 ok, 1 usage, 2 data or schema, 3 internal.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dataset::{self, DistractorPolicy, Manifest, Protocol, Split};
use crate::error::Error;
use crate::grammar::{self, Grammar, ParseOptions};
use crate::review::{self, service, ReviewStore};
use crate::reward::{
    self, AnswerExtraction, ComponentWeights, GroundTruthBundle, RewardBreakdown, RewardConfig,
};
use crate::scorer::{self, LocMode, NormalClipLoc, PredictionRecord, ScoreOptions};
use crate::visibility::{self, CandidateDoc, DiffParams, DirFrames};
use crate::{jsonl, IntervalSet};

pub const CONFIG_ENV: &str = "MMVIAD_CONFIG";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Internal(_) => "internal",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Contract(m) => CliError::Internal(m),
            other => CliError::Data(other),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Settings that may come from the TOML config file. Flags override them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub grammar: Grammar,
    pub qa: DistractorPolicy,
    pub reward: RewardConfig,
    pub diff: DiffParams,
    pub score: ScoreSection,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSection {
    pub loc_mode: LocMode,
    pub normal_clips: NormalClipLoc,
}

#[derive(Parser, Debug)]
#[command(
    name = "mmviad",
    version,
    about = "Industrial video anomaly QA toolkit"
)]
struct Cli {
    /// TOML file with default settings (sections: grammar, qa, reward, diff, score).
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Expand a manifest into the four QA instances per clip (JSON Lines).
    GenQa(GenQaArgs),
    /// Split a trace file into format-valid and rejected traces.
    FilterTraces(FilterArgs),
    /// Score rollout groups and attach group-relative advantages.
    Reward(RewardArgs),
    /// Group-normalize plain reward vectors.
    Advantages(AdvantageArgs),
    /// Score predictions against a manifest.
    Score(ScoreArgs),
    /// Derive candidate visible-time intervals from marked/unmarked frames.
    Derive(DeriveArgs),
    /// Run the review HTTP service.
    Serve(ServeArgs),
    /// Write a verified manifest from the decision log without starting the service.
    ExportManifest(ExportArgs),
    /// Validate a manifest and compare its counts with the published ones.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct GenQaArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Only clips tagged with this split.
    #[arg(long)]
    split: Option<Split>,
    #[arg(long)]
    q3_options: Option<usize>,
    /// Salt for option ordering.
    #[arg(long)]
    salt: Option<String>,
}

#[derive(Args, Debug)]
struct FilterArgs {
    /// JSON Lines with `response` and `qa_id` or `clip_id`.
    #[arg(long)]
    traces: PathBuf,
    #[arg(long)]
    kept: PathBuf,
    #[arg(long)]
    rejected: PathBuf,
    #[arg(long)]
    grammar: Option<Grammar>,
}

#[derive(Args, Debug)]
struct RewardArgs {
    /// JSON Lines of `{group_id, clip_id, responses: [..]}`.
    #[arg(long)]
    groups: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    grammar: Option<Grammar>,
    #[arg(long)]
    no_semantic_gate: bool,
    #[arg(long)]
    flat_iou: bool,
    /// Component weights as `fmt,ans,sg,vis`.
    #[arg(long, value_parser = parse_weights)]
    weights: Option<ComponentWeights>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_bon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_iou: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_pen: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Zero the answer rewards of responses that fail the strict format check.
    #[arg(long)]
    strict_answers: bool,
}

#[derive(Args, Debug)]
struct AdvantageArgs {
    /// JSON Lines of `{group_id?, rewards: [..]}`.
    #[arg(long)]
    rewards: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    std_epsilon: Option<f64>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    preds: PathBuf,
    /// Restrict scoring to one split, e.g. `unseen_test`.
    #[arg(long)]
    protocol: Option<Split>,
    #[arg(long, value_parser = parse_loc_mode)]
    loc_mode: Option<LocMode>,
    #[arg(long, value_parser = parse_normal_clips)]
    normal_clips: Option<NormalClipLoc>,
    #[arg(long)]
    grammar: Option<Grammar>,
    /// Row label in the table; defaults to the prediction file stem.
    #[arg(long)]
    name: Option<String>,
    /// Also write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DeriveArgs {
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Restrict to these clips; all clip directories otherwise.
    #[arg(long)]
    clip: Vec<String>,
    #[arg(long)]
    channel_threshold: Option<u8>,
    #[arg(long)]
    red_dominance_delta: Option<u8>,
    #[arg(long)]
    area_threshold: Option<u32>,
    #[arg(long)]
    gap_fill: Option<u32>,
    #[arg(long)]
    min_interval: Option<u32>,
    #[arg(long)]
    downscale: Option<u32>,
}

#[derive(Args, Debug)]
struct ReviewInputs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of candidate documents from `derive`.
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// Decision log (JSON Lines).
    #[arg(long)]
    log: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[command(flatten)]
    inputs: ReviewInputs,
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Directory with a built review UI bundle, served at `/`.
    #[arg(long)]
    ui: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    inputs: ReviewInputs,
    #[arg(long)]
    protocol: Option<Protocol>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Protocol whose published split sizes to check; the manifest's own otherwise.
    #[arg(long)]
    protocol: Option<Protocol>,
    /// Exit with status 2 when any count differs from the published one.
    #[arg(long)]
    strict_counts: bool,
}

fn parse_weights(s: &str) -> Result<ComponentWeights, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [fmt, ans, sg, vis] => Ok(ComponentWeights { fmt, ans, sg, vis }),
        _ => Err(format!(
            "expected four comma-separated weights, got {}",
            parts.len()
        )),
    }
}

fn parse_loc_mode(s: &str) -> Result<LocMode, String> {
    match s {
        "set_iou" | "set-iou" => Ok(LocMode::SetIou),
        "max_iou" | "max-iou" => Ok(LocMode::MaxIou),
        _ => Err("expected set_iou or max_iou".into()),
    }
}

fn parse_normal_clips(s: &str) -> Result<NormalClipLoc, String> {
    match s {
        "include" => Ok(NormalClipLoc::Include),
        "exclude" => Ok(NormalClipLoc::Exclude),
        _ => Err("expected include or exclude".into()),
    }
}

fn load_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(Error::io(path, e)))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Data(Error::Schema(format!("{}: {e}", path.display()))))
}

fn meta(command: &str, config: &Value) -> Value {
    json!({
        "tool": "mmviad",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
    })
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(e.to_string()))
}

fn echo(meta: &Value) {
    eprintln!("{meta}");
}

fn write_out(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Data(Error::io(p, e))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Internal(e.to_string())),
    }
}

/// JSON Lines output plus a `<out>.meta.json` sidecar when writing a file.
fn write_jsonl_out<T: Serialize>(out: Option<&Path>, rows: &[T], meta: &Value) -> CliResult {
    write_out(out, &jsonl::to_string(rows)?)?;
    if let Some(p) = out {
        let mut side = p.as_os_str().to_owned();
        side.push(".meta.json");
        let side = PathBuf::from(side);
        fs::write(&side, pretty(meta)).map_err(|e| CliError::Data(Error::io(&side, e)))?;
    }
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn load_manifest_file(path: &Path) -> CliResult<Manifest> {
    let f = fs::File::open(path).map_err(|e| CliError::Data(Error::io(path, e)))?;
    let m = dataset::load_manifest(std::io::BufReader::new(f))?;
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    Ok(m)
}

fn line_error(path: &Path, line: usize, e: impl std::fmt::Display) -> CliError {
    CliError::Data(Error::Line {
        path: path.display().to_string(),
        line,
        message: e.to_string(),
    })
}

/// Parses argv (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!(
                "{}",
                json!({ "error": { "kind": e.kind(), "message": e.to_string() } })
            );
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> CliResult {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::GenQa(a) => gen_qa(a, &mut cfg),
        Command::FilterTraces(a) => filter_traces(a, &mut cfg),
        Command::Reward(a) => reward_cmd(a, &mut cfg),
        Command::Advantages(a) => advantages(a, &mut cfg),
        Command::Score(a) => score_cmd(a, &mut cfg),
        Command::Derive(a) => derive(a, &mut cfg),
        Command::Serve(a) => serve(a),
        Command::ExportManifest(a) => export_manifest(a),
        Command::Validate(a) => validate(a),
    }
}

fn gen_qa(a: GenQaArgs, cfg: &mut FileConfig) -> CliResult {
    if let Some(n) = a.q3_options {
        cfg.qa.q3_options = n;
    }
    if let Some(s) = a.salt {
        cfg.qa.salt = s;
    }
    let m = meta(
        "gen-qa",
        &json!({ "qa": to_value(&cfg.qa)?, "split": a.split }),
    );
    echo(&m);
    let manifest = load_manifest_file(&a.manifest)?;
    let clips: Vec<_> = manifest
        .clips
        .iter()
        .filter(|c| a.split.is_none_or(|s| c.in_split(s)))
        .collect();
    let rows: Vec<dataset::QaInstance> = clips
        .par_iter()
        .map(|c| dataset::generate_qa(c, &cfg.qa))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    write_jsonl_out(a.out.as_deref(), &rows, &m)
}

#[derive(Deserialize)]
struct TraceLine {
    #[serde(default)]
    qa_id: Option<String>,
    #[serde(default)]
    clip_id: Option<String>,
    response: String,
}

fn filter_traces(a: FilterArgs, cfg: &mut FileConfig) -> CliResult {
    if let Some(g) = a.grammar {
        cfg.grammar = g;
    }
    let m = meta("filter-traces", &json!({ "grammar": cfg.grammar }));
    echo(&m);
    let lines = jsonl::read_lines(&a.traces)?;
    let mut traces = Vec::with_capacity(lines.len());
    for (n, line) in &lines {
        let t: TraceLine = serde_json::from_str(line).map_err(|e| line_error(&a.traces, *n, e))?;
        if t.qa_id.is_none() && t.clip_id.is_none() {
            return Err(line_error(
                &a.traces,
                *n,
                "trace needs `qa_id` or `clip_id`",
            ));
        }
        let raw: Value = serde_json::from_str(line).map_err(|e| line_error(&a.traces, *n, e))?;
        traces.push((t.response, raw));
    }
    let outcome =
        grammar::filter_sft_traces(traces, cfg.grammar, |t: &(String, Value)| t.0.as_str());
    let kept: Vec<&Value> = outcome.kept.iter().map(|t| &t.1).collect();
    let rejected: Vec<Value> = outcome
        .rejected
        .iter()
        .map(|(t, v)| {
            let mut row = t.1.clone();
            row["violations"] = serde_json::to_value(v).expect("violations serialize");
            row
        })
        .collect();
    write_jsonl_out(Some(&a.kept), &kept, &m)?;
    write_jsonl_out(Some(&a.rejected), &rejected, &m)?;
    let (k, r) = outcome.counts();
    println!("{}", json!({ "kept": k, "rejected": r, "meta": m }));
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupLine {
    group_id: String,
    clip_id: String,
    responses: Vec<String>,
}

#[derive(Serialize)]
struct RewardRow<'a> {
    group_id: &'a str,
    clip_id: &'a str,
    index: usize,
    #[serde(flatten)]
    breakdown: RewardBreakdown,
    advantage: f64,
}

fn reward_cmd(a: RewardArgs, cfg: &mut FileConfig) -> CliResult {
    let r = &mut cfg.reward;
    if a.no_semantic_gate {
        r.semantic_gate_enabled = false;
    }
    if a.flat_iou {
        r.flat_iou_mode = true;
    }
    if let Some(w) = a.weights {
        r.weights = w;
    }
    if let Some(v) = a.alpha_bon {
        r.alpha_bon = v;
    }
    if let Some(v) = a.alpha_iou {
        r.alpha_iou = v;
    }
    if let Some(v) = a.alpha_pen {
        r.alpha_pen = v;
    }
    if let Some(v) = a.lambda {
        r.lambda = v;
    }
    if a.strict_answers {
        r.extraction = AnswerExtraction::Strict;
    }
    if let Some(g) = a.grammar {
        cfg.grammar = g;
    }
    cfg.reward
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let m = meta(
        "reward",
        &json!({ "grammar": cfg.grammar, "qa": to_value(&cfg.qa)?, "reward": to_value(&cfg.reward)? }),
    );
    echo(&m);

    let manifest = load_manifest_file(&a.manifest)?;
    let mut groups = Vec::new();
    for (n, line) in jsonl::read_lines(&a.groups)? {
        let g: GroupLine = serde_json::from_str(&line).map_err(|e| line_error(&a.groups, n, e))?;
        let clip = manifest
            .get(&g.clip_id)
            .ok_or_else(|| line_error(&a.groups, n, format!("unknown clip `{}`", g.clip_id)))?;
        if g.responses.is_empty() {
            return Err(line_error(&a.groups, n, "group has no responses"));
        }
        groups.push((g, clip));
    }
    let cfg = &*cfg;
    let per_group: Vec<Vec<RewardRow>> = groups
        .par_iter()
        .map(|(g, clip)| -> Result<Vec<RewardRow>, Error> {
            let gt = GroundTruthBundle::from_qa(&dataset::generate_qa(clip, &cfg.qa)?)?;
            let opts = ParseOptions {
                duration_sec: clip.duration_sec,
                ..Default::default()
            };
            let breakdowns: Vec<RewardBreakdown> = g
                .responses
                .iter()
                .map(|resp| {
                    reward::reward_total(
                        &grammar::parse_with(resp, cfg.grammar, &opts),
                        &gt,
                        &cfg.reward,
                    )
                })
                .collect();
            let totals: Vec<f64> = breakdowns.iter().map(|b| b.total).collect();
            let adv = reward::group_advantages(&totals, &cfg.reward)?;
            Ok(breakdowns
                .into_iter()
                .zip(adv)
                .enumerate()
                .map(|(index, (breakdown, advantage))| RewardRow {
                    group_id: &g.group_id,
                    clip_id: &g.clip_id,
                    index,
                    breakdown,
                    advantage,
                })
                .collect())
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<RewardRow> = per_group.into_iter().flatten().collect();
    write_jsonl_out(a.out.as_deref(), &rows, &m)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardsLine {
    #[serde(default)]
    group_id: Option<String>,
    rewards: Vec<f64>,
}

fn advantages(a: AdvantageArgs, cfg: &mut FileConfig) -> CliResult {
    if let Some(e) = a.std_epsilon {
        cfg.reward.std_epsilon = e;
    }
    if cfg.reward.std_epsilon.is_nan() || cfg.reward.std_epsilon <= 0.0 {
        return Err(CliError::Usage("std_epsilon must be positive".into()));
    }
    let m = meta(
        "advantages",
        &json!({ "std_epsilon": cfg.reward.std_epsilon }),
    );
    echo(&m);
    let mut rows = Vec::new();
    for (n, line) in jsonl::read_lines(&a.rewards)? {
        let g: RewardsLine =
            serde_json::from_str(&line).map_err(|e| line_error(&a.rewards, n, e))?;
        let adv = reward::group_advantages(&g.rewards, &cfg.reward)
            .map_err(|e| line_error(&a.rewards, n, e))?;
        rows.push(json!({ "group_id": g.group_id, "advantages": adv }));
    }
    write_jsonl_out(a.out.as_deref(), &rows, &m)
}

fn score_cmd(a: ScoreArgs, cfg: &mut FileConfig) -> CliResult {
    if let Some(v) = a.loc_mode {
        cfg.score.loc_mode = v;
    }
    if let Some(v) = a.normal_clips {
        cfg.score.normal_clips = v;
    }
    if let Some(g) = a.grammar {
        cfg.grammar = g;
    }
    let opts = ScoreOptions {
        loc_mode: cfg.score.loc_mode,
        normal_clips: cfg.score.normal_clips,
        policy: cfg.qa.clone(),
    };
    let m = meta(
        "score",
        &json!({ "grammar": cfg.grammar, "split": a.protocol, "score": to_value(&opts)? }),
    );
    echo(&m);
    let manifest = load_manifest_file(&a.manifest)?;
    let mut preds = Vec::new();
    for (n, line) in jsonl::read_lines(&a.preds)? {
        let p = PredictionRecord::from_json_line(&line, cfg.grammar, manifest.duration_sec)
            .map_err(|e| line_error(&a.preds, n, e))?;
        preds.push(p);
    }
    let report = scorer::score(&preds, &manifest, a.protocol, &opts)?;
    let name = a.name.unwrap_or_else(|| {
        a.preds
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "predictions".into())
    });
    let reports = BTreeMap::from([(name, report)]);
    write_out(None, &scorer::report_table(&reports)?)?;
    if let Some(path) = &a.json {
        let doc = json!({ "meta": m, "reports": scorer::report_json(&reports)? });
        write_out(Some(path), &pretty(&doc))?;
    }
    Ok(())
}

fn derive(a: DeriveArgs, cfg: &mut FileConfig) -> CliResult {
    let p = &mut cfg.diff;
    if let Some(v) = a.channel_threshold {
        p.channel_threshold = v;
    }
    if let Some(v) = a.red_dominance_delta {
        p.red_dominance_delta = v;
    }
    if let Some(v) = a.area_threshold {
        p.area_threshold = v;
    }
    if let Some(v) = a.gap_fill {
        p.gap_fill_frames = v;
    }
    if let Some(v) = a.min_interval {
        p.min_interval_frames = v;
    }
    if let Some(v) = a.downscale {
        p.downscale_factor = v;
    }
    if p.downscale_factor == 0 {
        return Err(CliError::Usage("--downscale must be at least 1".into()));
    }
    let params = *p;
    let m = meta("derive", &json!({ "diff": to_value(&params)? }));
    echo(&m);
    let clips = if a.clip.is_empty() {
        visibility::list_clip_dirs(&a.frames)?
    } else {
        a.clip.clone()
    };
    fs::create_dir_all(&a.out).map_err(|e| CliError::Data(Error::io(&a.out, e)))?;
    for id in clips {
        let source = DirFrames::new(&a.frames, &id);
        let (trace, cands) =
            visibility::derive_clip(&id, &source, &params, visibility::DEFAULT_FPS)?;
        println!("{id}\t{cands}");
        let mut doc = CandidateDoc::from_trace(&trace, cands);
        doc.meta = Some(m.clone());
        let path = a.out.join(format!("{id}.json"));
        write_out(Some(&path), &pretty(&to_value(&doc)?))?;
    }
    Ok(())
}

fn load_review_inputs(i: &ReviewInputs) -> CliResult<(Manifest, BTreeMap<String, IntervalSet>)> {
    let manifest = load_manifest_file(&i.manifest)?;
    let cands = match &i.candidates {
        Some(dir) => visibility::load_candidate_dir(dir)?,
        None => BTreeMap::new(),
    };
    Ok((manifest, cands))
}

fn serve(a: ServeArgs) -> CliResult {
    let m = meta(
        "serve",
        &json!({ "addr": a.addr.to_string(), "log": a.inputs.log, "frames": a.frames, "ui": a.ui }),
    );
    echo(&m);
    let (manifest, cands) = load_review_inputs(&a.inputs)?;
    let store = ReviewStore::open(manifest, cands, &a.inputs.log, a.frames)?;
    let state = service::AppState::new(store, a.ui);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    rt.block_on(service::run(a.addr, state))
        .map_err(|e| CliError::Data(Error::io(a.addr.to_string(), e)))
}

fn export_manifest(a: ExportArgs) -> CliResult {
    let m = meta(
        "export-manifest",
        &json!({ "protocol": a.protocol, "log": a.inputs.log }),
    );
    echo(&m);
    let (manifest, cands) = load_review_inputs(&a.inputs)?;
    let exported = review::export_offline(&manifest, &cands, &a.inputs.log, a.protocol)?;
    let mut doc = to_value(&exported)?;
    doc["meta"] = m;
    write_out(a.out.as_deref(), &pretty(&doc))
}

fn validate(a: ValidateArgs) -> CliResult {
    let manifest = load_manifest_file(&a.manifest)?;
    let protocol = a.protocol.unwrap_or(manifest.protocol);
    let m = meta(
        "validate",
        &json!({ "protocol": protocol, "strict_counts": a.strict_counts }),
    );
    echo(&m);
    let report = dataset::validate_counts(&manifest.clips, protocol);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let doc = json!({ "meta": m, "manifest_warnings": manifest.warnings, "report": report });
    write_out(None, &pretty(&doc))?;
    if a.strict_counts && !report.all_match() {
        let bad: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.matches)
            .map(|c| c.name.as_str())
            .collect();
        return Err(CliError::Data(Error::Schema(format!(
            "counts differ from published: {}",
            bad.join(", ")
        ))));
    }
    Ok(())
}
