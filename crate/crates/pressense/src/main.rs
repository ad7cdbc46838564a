use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use pressense::checkpoint::Checkpoint;
use pressense::core::metrics::evaluate_frames;
use pressense::core::nn::{evaluate_model, train_toy, TrainConfig};
use pressense::core::synth::{generate_dataset, keys_for_text, typing_session, SplitPlan, SynthConfig, TypingPlan};
use pressense::core::touch::EngineConfig;
use pressense::core::CONTACT_THRESHOLD_KPA;
use pressense::layouts::{load_layout, LayoutRegistry};
use pressense::records::{read_predictions_file, read_records_file, write_predictions_file, write_records_file, Prediction};
use pressense::replay::{replay, report_json, ReplayOptions};
use pressense::{calibration::Calibration, jsonl, Error, Result};

/// Weakly-supervised fingertip pressure: synthetic data, training,
/// evaluation, replay and the touch-event server.
#[derive(Parser)]
#[command(name = "pressense", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic session records.
    Synth(SynthArgs),
    /// Train the desk-scale model on synthetic data and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on its held-out synthetic participants.
    Evaluate(EvaluateArgs),
    /// Feed a record file through the touch engine and report metrics.
    Replay(ReplayArgs),
    /// Serve the WebSocket session endpoint.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Synthesis settings as JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Participants per split: full-train, full-test, weak-train, weak-test.
    #[arg(long, num_args = 4, value_names = ["FT", "FE", "WT", "WE"], default_values_t = [4, 2, 8, 2])]
    participants: Vec<u32>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    frame_rate: Option<f64>,
    /// Use the small 16×16 grid of the training benchmark.
    #[arg(long)]
    toy: bool,
    /// Write one typing session of this sentence instead of prompt sessions.
    #[arg(long)]
    typing: Option<String>,
    /// Layout for --typing (defaults to the bundled QWERTY).
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training settings as JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    /// Disable the contact-label loss.
    #[arg(long)]
    no_contact_loss: bool,
    /// Disable the domain-adversarial loss.
    #[arg(long)]
    no_domain_loss: bool,
    #[arg(long, num_args = 4, value_names = ["FT", "FE", "WT", "WE"], default_values_t = [4, 2, 8, 2])]
    participants: Vec<u32>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Report path (stdout when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the evaluated test records.
    #[arg(long)]
    records_out: Option<PathBuf>,
    /// Also write the model's pressure estimates for those records.
    #[arg(long)]
    predictions_out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    records: PathBuf,
    /// Estimates to replay in place of recorded pressure.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Key layout for key events and transcripts.
    #[arg(long)]
    layout: Option<PathBuf>,
    /// Use the bundled QWERTY layout.
    #[arg(long, conflicts_with = "layout")]
    qwerty: bool,
    /// Sensor-to-surface calibration applied before the engine.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Engine settings as JSON.
    #[arg(long)]
    engine: Option<PathBuf>,
    /// Reference sentence for typing sessions (default: the record prompt).
    #[arg(long)]
    reference: Option<String>,
    #[arg(long, default_value_t = 15.0)]
    frame_rate: f64,
    /// Write per-frame engine events as line-delimited JSON.
    #[arg(long)]
    events_out: Option<PathBuf>,
    /// Report path (stdout when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Extra layout files offered alongside the bundled QWERTY.
    #[arg(long)]
    layout: Vec<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Replay(a) => replay_cmd(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { source_name: path.display().to_string(), line: e.line(), message: e.to_string() })
}

fn plan(p: &[u32]) -> SplitPlan {
    SplitPlan::sequential(p[0], p[1], p[2], p[3])
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io { path: p.into(), source: e }),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io { path: "<stdout>".into(), source: e }),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => read_json(p)?,
        None if a.toy => SynthConfig::toy(0),
        None => SynthConfig::default(),
    };
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.width = a.width.unwrap_or(cfg.width);
    cfg.height = a.height.unwrap_or(cfg.height);
    cfg.frame_rate_hz = a.frame_rate.unwrap_or(cfg.frame_rate_hz);
    if let Some(sentence) = &a.typing {
        let layout = match &a.layout {
            Some(p) => load_layout(p)?,
            None => pressense::layouts::qwerty(),
        };
        let keys = keys_for_text(sentence);
        let keys: Vec<&str> = keys.iter().map(String::as_str).collect();
        let records = typing_session(sentence, &keys, &layout, &cfg, &TypingPlan::default(), "typing-000")?;
        write_records_file(&a.out, &records)?;
        log::info!("wrote {} typing frames to {}", records.len(), a.out.display());
        return Ok(());
    }
    let ds = generate_dataset(&cfg, &plan(&a.participants))?;
    write_records_file(&a.out, ds.records())?;
    log::info!("wrote {} records to {}", ds.records().count(), a.out.display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::desk_scale(a.seed),
    };
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.lr = a.lr.unwrap_or(cfg.lr);
    cfg.weights.lambda1 = a.lambda1.unwrap_or(cfg.weights.lambda1);
    cfg.weights.lambda2 = a.lambda2.unwrap_or(cfg.weights.lambda2);
    cfg.use_contact_loss &= !a.no_contact_loss;
    cfg.use_domain_loss &= !a.no_domain_loss;
    let synth = SynthConfig { width: cfg.model.width, height: cfg.model.height, ..SynthConfig::toy(a.seed) };
    let split = plan(&a.participants);
    let ds = generate_dataset(&synth, &split)?;
    let outcome = train_toy(&ds.to_toy(&cfg.bins), &cfg)?;
    for h in &outcome.history {
        println!("{}", serde_json::to_string(h).expect("metrics serialize"));
    }
    Checkpoint::new(&outcome, cfg, synth, split).save(&a.out)?;
    log::info!("wrote checkpoint {}", a.out.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let params = ck.params()?;
    let ds = generate_dataset(&ck.synth, &ck.split)?;
    let test: Vec<_> = ds.full_test.iter().chain(&ds.weak_test).collect();
    let samples: Vec<_> = test.iter().map(|f| f.to_sample(&ck.train.bins)).collect();
    let frames = evaluate_model(&params, &samples, &ck.train.bins, ck.train.decode)?;
    let report = evaluate_frames(&frames, CONTACT_THRESHOLD_KPA)?;
    if let Some(p) = &a.records_out {
        write_records_file(p, test.iter().map(|f| &f.record))?;
    }
    if let Some(p) = &a.predictions_out {
        let predictions: Vec<Prediction> = test
            .iter()
            .zip(&frames)
            .map(|(f, e)| Prediction {
                session_id: f.record.session_id.clone(),
                frame_index: f.record.frame_index,
                pressure: e.estimate.clone(),
                contact_label: e.estimated_label,
            })
            .collect();
        write_predictions_file(p, &predictions)?;
    }
    write_output(a.out.as_deref(), &jsonl::to_document(&report))
}

fn replay_cmd(a: ReplayArgs) -> Result<()> {
    let records = read_records_file(&a.records)?;
    let predictions = a.predictions.as_deref().map(read_predictions_file).transpose()?;
    let layout = match (&a.layout, a.qwerty) {
        (Some(p), _) => Some(load_layout(p)?),
        (None, true) => Some(pressense::layouts::qwerty()),
        (None, false) => None,
    };
    let options = ReplayOptions {
        engine: match &a.engine {
            Some(p) => read_json::<EngineConfig>(p)?,
            None => EngineConfig::default(),
        },
        layout,
        calibration: a.calibration.as_deref().map(Calibration::load).transpose()?,
        reference: a.reference,
        frame_rate_hz: a.frame_rate,
    };
    let (events, report) = replay(&records, predictions.as_deref(), &options)?;
    if let Some(p) = &a.events_out {
        jsonl::write_lines_file(p, pressense::replay::REPORT_VERSION, &events)?;
    }
    write_output(a.out.as_deref(), &report_json(&report))
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut registry = LayoutRegistry::default();
    for p in &a.layout {
        registry.insert(load_layout(p)?);
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Io { path: "<runtime>".into(), source: e })?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.addr)
            .await
            .map_err(|e| Error::Core(pressense::core::Error::InvalidArgument(format!("cannot bind {}: {e}", a.addr))))?;
        pressense::service::serve(listener, Arc::new(registry))
            .await
            .map_err(|e| Error::Io { path: a.addr.clone().into(), source: e })
    })
}
