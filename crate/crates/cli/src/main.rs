//! `audionav` command-line front end.

use std::collections::BTreeMap;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use audionav::config::{parse_config, RunConfig};
use audionav::dataset::prepare_dataset;
use audionav::dsp::{ReverbKind, VadParams};
use audionav::env::{EnvKind, Partition, FRAME_LEN};
use audionav::eval::{
    combine_seeds, evaluate_params, fine_tune, read_report, render_table, render_table_with, run_eval,
    write_report, zero_shot, CurveComparison, ExperimentReport, ExperimentSpec, PolicySource, Scenario,
};
use audionav::neural::load_checkpoint;
use audionav::ppo::{train, LogRow, TrainOutputs, Trainer, UpdateStats, LOG_HEADER};
use audionav::session::{serve, SessionSettings};
use audionav::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "audionav", version, about = "Audio navigation and sound-source localization agents")]
struct Cli {
    /// Run configuration file (`[section]` headers, `key = value` lines).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set ppo.learning_rate=1e-4`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment raw per-speaker recordings into an utterance dataset.
    PrepareData {
        /// Directory with one subdirectory of WAV files per speaker.
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Split seed; defaults to `run.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train an agent on `environment.kind`.
    Train {
        /// Run directory; defaults to `<run.output_dir>/train-<kind>-seed<seed>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Training utterances per speaker (overrides `audio.utterance_cap`).
        #[arg(long)]
        cap: Option<usize>,
        /// Start from these weights instead of a fresh initialization.
        #[arg(long, conflicts_with = "resume")]
        init: Option<PathBuf>,
        /// Continue an interrupted run from one of its checkpoints.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint, the random baseline or a human session log.
    Eval(EvalArgs),
    /// Evaluate an agent trained on one task on the other, optionally
    /// fine-tuning it next to a from-scratch run.
    Transfer(TransferArgs),
    /// Host lockstep play sessions for human players.
    Serve(ServeArgs),
    /// Collect written evaluation reports into summary tables.
    Report {
        #[arg(long)]
        dir: PathBuf,
        /// Also write the tables to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PartitionArg {
    Train,
    Test,
}

impl From<PartitionArg> for Partition {
    fn from(p: PartitionArg) -> Self {
        match p {
            PartitionArg::Train => Partition::Train,
            PartitionArg::Test => Partition::Test,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, group = "policy")]
    checkpoint: Option<PathBuf>,
    /// Uniform random actions.
    #[arg(long, group = "policy")]
    random: bool,
    #[arg(long, group = "policy")]
    human_log: Option<PathBuf>,
    /// Defaults to `run.eval_episodes`.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, value_enum, default_value = "test")]
    partition: PartitionArg,
    /// Test-time reverb (none, room, auditorium); defaults to `audio.reverb`.
    #[arg(long)]
    reverb: Option<String>,
    /// Test-time pitch shift; also enabled by `audio.pitch_shift`.
    #[arg(long)]
    pitch_shift: bool,
    /// Defaults to `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory; defaults to `<run.output_dir>/eval`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TransferArgs {
    /// Agent trained on `environment.kind`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Agent trained on the target task, for the comparison row.
    #[arg(long)]
    native: Option<PathBuf>,
    /// Also fine-tune on the target task next to a from-scratch run.
    #[arg(long)]
    fine_tune: bool,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Defaults to `<run.output_dir>/transfer-<source>-to-<target>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8765)]
    port: u16,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Stop after this many sessions (runs forever otherwise).
    #[arg(long)]
    sessions: Option<usize>,
    /// Pace audio at one chunk per 21.3 ms.
    #[arg(long)]
    realtime: bool,
    /// Milliseconds to wait for an action before repeating the previous one.
    #[arg(long, default_value_t = 250, conflicts_with = "block")]
    timeout_ms: u64,
    /// Wait for every action however long it takes.
    #[arg(long)]
    block: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Session log directory; defaults to `<run.output_dir>/sessions`.
    #[arg(long)]
    log_dir: Option<PathBuf>,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text).map_err(|e| match &cli.config {
        Some(path) => Error::Config(format!("{}: {e}", path.display())),
        None => e,
    })?;
    cfg.apply_overrides(&cli.overrides)?;
    Ok(cfg)
}

fn other(kind: EnvKind) -> EnvKind {
    match kind {
        EnvKind::Navigation => EnvKind::Localization,
        EnvKind::Localization => EnvKind::Navigation,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn progress_line(start: Instant, total_updates: u64) -> impl FnMut(&Trainer, &UpdateStats, &[LogRow]) {
    move |t, stats, rows| {
        let n = rows.len().max(1) as f64;
        let wins = rows.iter().filter(|r| r.termination.is_success()).count() as f64;
        let reward = rows.iter().map(|r| r.episode_reward).sum::<f64>() / n;
        println!(
            "update {}/{} steps {} episodes {} success {:.2} reward {:+.3} entropy {:.3} clip {:.3} ({:.0}s)",
            t.updates(),
            total_updates,
            t.steps(),
            rows.len(),
            wins / n,
            reward,
            stats.entropy,
            stats.clip_fraction,
            start.elapsed().as_secs_f64()
        );
    }
}

fn cmd_prepare(cfg: &RunConfig, raw: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let report = prepare_dataset(raw, out, seed.unwrap_or(cfg.run.seed), &VadParams::default())?;
    for (path, why) in &report.skipped {
        eprintln!("skipped {}: {why}", path.display());
    }
    let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for r in &report.rows {
        *counts.entry((r.speaker_id.as_str(), r.partition.as_str())).or_default() += 1;
    }
    let speakers: std::collections::BTreeSet<&str> = counts.keys().map(|k| k.0).collect();
    for s in speakers {
        let get = |p| counts.get(&(s, p)).copied().unwrap_or(0);
        println!("{s}: {} train, {} test, {} unused", get("train"), get("test"), get("unused"));
    }
    println!(
        "wrote {} utterances to {}; use it with --set audio.dataset={}",
        report.rows.len(),
        out.display(),
        out.display()
    );
    Ok(())
}

fn cmd_train(
    cfg: &RunConfig,
    out: Option<PathBuf>,
    cap: Option<usize>,
    init: Option<PathBuf>,
    resume: Option<PathBuf>,
) -> Result<()> {
    let scenario = Scenario::from_config(cfg)?;
    let kind = cfg.environment.kind;
    let cap = cap.or(cfg.audio.utterance_cap);
    if let Some(c) = cap {
        scenario.check_cap(c)?;
    }
    let dir = out.unwrap_or_else(|| {
        let suffix = cap.map(|c| format!("-cap{c}")).unwrap_or_default();
        cfg.run.output_dir.join(format!("train-{kind}-seed{}{suffix}", cfg.run.seed))
    });
    let envs = scenario.training_envs(kind, cap)?;
    let mut trainer = match (resume, init) {
        (Some(path), _) => {
            let t = Trainer::resume(scenario.ppo.clone(), load_checkpoint(&path)?, envs)?;
            println!("resuming {} at step {}", path.display(), t.steps());
            t
        }
        (None, Some(path)) => {
            let params = load_checkpoint(&path)?.params;
            if params.spec != scenario.network {
                return Err(Error::Shape(format!(
                    "{} holds a different network than the config describes",
                    path.display()
                )));
            }
            Trainer::with_params(scenario.ppo.clone(), params, envs, cfg.run.seed)?
        }
        (None, None) => Trainer::new(scenario.ppo.clone(), scenario.network.clone(), envs, cfg.run.seed)?,
    };
    write_file(&dir.join("config.ini"), &cfg.to_ini())?;
    let outputs = TrainOutputs {
        dir: dir.clone(),
        checkpoint_interval: cfg.run.checkpoint_interval,
    };
    println!(
        "training {kind} for {} steps ({} updates) into {}",
        scenario.ppo.total_steps,
        scenario.ppo.num_updates(),
        dir.display()
    );
    train(&mut trainer, Some(&outputs), progress_line(Instant::now(), scenario.ppo.num_updates()))?;
    println!("final checkpoint: {}", outputs.final_checkpoint().display());
    Ok(())
}

fn eval_spec(cfg: &RunConfig, kind: EnvKind, policy: PolicySource, episodes: Option<usize>, seed: Option<u64>) -> ExperimentSpec {
    ExperimentSpec {
        episodes: episodes.unwrap_or(cfg.run.eval_episodes),
        reverb: cfg.audio.reverb,
        pitch_shift: cfg.audio.pitch_shift,
        ..ExperimentSpec::new(kind, policy, seed.unwrap_or(cfg.run.seed))
    }
}

fn save_report(dir: &Path, report: &ExperimentReport) -> Result<()> {
    let files = write_report(dir, report)?;
    println!("{}", report.to_markdown().lines().take(5).collect::<Vec<_>>().join("\n"));
    println!("report: {}", files.markdown.display());
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, a: EvalArgs) -> Result<()> {
    let policy = match (a.checkpoint, a.random, a.human_log) {
        (Some(p), _, _) => PolicySource::Checkpoint(p),
        (None, true, _) => PolicySource::Random,
        (None, false, Some(p)) => PolicySource::HumanLog(p),
        (None, false, None) => {
            return Err(Error::InvalidArgument(
                "choose a policy: --checkpoint PATH, --random or --human-log PATH".into(),
            ))
        }
    };
    let scenario = Scenario::from_config(cfg)?;
    let mut spec = eval_spec(cfg, cfg.environment.kind, policy, a.episodes, a.seed);
    spec.partition = a.partition.into();
    if let Some(r) = a.reverb {
        spec.reverb = r.parse::<ReverbKind>()?;
    }
    spec.pitch_shift |= a.pitch_shift;
    let report = run_eval(&scenario, &spec)?;
    save_report(&a.out.unwrap_or_else(|| cfg.run.output_dir.join("eval")), &report)
}

fn curve_csv(rows: &[LogRow]) -> String {
    let mut text = format!("{LOG_HEADER}\n");
    for r in rows {
        text.push_str(&r.to_csv());
        text.push('\n');
    }
    text
}

fn cmd_transfer(cfg: &RunConfig, a: TransferArgs) -> Result<()> {
    let scenario = Scenario::from_config(cfg)?;
    let source_kind = cfg.environment.kind;
    let target = other(source_kind);
    let dir = a
        .out
        .unwrap_or_else(|| cfg.run.output_dir.join(format!("transfer-{source_kind}-to-{target}")));
    let source = load_checkpoint(&a.checkpoint)?.params;
    let base = eval_spec(cfg, target, PolicySource::Checkpoint(a.checkpoint.clone()), a.episodes, a.seed);

    let transferred = zero_shot(&scenario, &source, target, &base)?;
    let random = run_eval(&scenario, &ExperimentSpec { policy: PolicySource::Random, ..base.clone() })?;
    write_report(&dir, &transferred)?;
    write_report(&dir, &random)?;
    let mut rows = Vec::new();
    if let Some(native) = &a.native {
        let spec = ExperimentSpec { policy: PolicySource::Checkpoint(native.clone()), ..base.clone() };
        let report = run_eval(&scenario, &spec)?;
        write_report(&dir, &report)?;
        rows.push((title(target), report.summary));
    }
    rows.push((title(source_kind), transferred.summary.clone()));
    rows.push(("Random".to_string(), random.summary.clone()));
    let mut text = render_table_with(&format!("Transfer results for {target}"), "Trained for", &rows);

    if a.fine_tune {
        println!("fine-tuning on {target} next to a from-scratch run ({} steps each)", scenario.ppo.total_steps);
        let seed = a.seed.unwrap_or(cfg.run.seed);
        let outcome = fine_tune(&scenario, &source, target, seed)?;
        write_file(&dir.join("fine_tune_log.csv"), &curve_csv(&outcome.fine_tune_log))?;
        write_file(&dir.join("scratch_log.csv"), &curve_csv(&outcome.scratch_log))?;
        let early = scenario.ppo.total_steps / 5;
        let cmp = CurveComparison::new(&outcome.fine_tune_log, &outcome.scratch_log, early, 5);
        let tuned = evaluate_params(&scenario, &base, &outcome.fine_tuned)?;
        let scratch = evaluate_params(&scenario, &base, &outcome.scratch)?;
        text.push('\n');
        text.push_str(&render_table(
            &format!("After {} steps on {target}", scenario.ppo.total_steps),
            &[
                ("Fine-tuned".to_string(), tuned.summary),
                ("From scratch".to_string(), scratch.summary),
            ],
        ));
        text.push_str(&format!("\nFirst {early} steps, mean episode reward per bin (fine-tuned vs scratch):\n\n"));
        for (end, ft, sc) in &cmp.bins {
            text.push_str(&format!("- up to step {end}: {ft:+.3} vs {sc:+.3}\n"));
        }
        text.push_str(&format!(
            "\nFine-tuned curve dominates over the first 20%: {}\n",
            if cmp.a_dominates() { "yes" } else { "no" }
        ));
    }
    let path = dir.join("transfer.md");
    write_file(&path, &text)?;
    println!("{text}");
    println!("summary: {}", path.display());
    Ok(())
}

fn title(kind: EnvKind) -> String {
    let s = kind.to_string();
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

fn cmd_serve(cfg: &RunConfig, a: ServeArgs) -> Result<()> {
    let scenario = Scenario::from_config(cfg)?;
    let kind = cfg.environment.kind;
    let listener = TcpListener::bind((a.host.as_str(), a.port)).map_err(|e| Error::io(&a.host, e))?;
    let addr = listener.local_addr().map_err(|e| Error::io(&a.host, e))?;
    let mut settings = SessionSettings::new(kind, a.episodes, a.seed.unwrap_or(cfg.run.seed));
    settings.realtime = a.realtime;
    settings.action_timeout = (!a.block).then(|| Duration::from_millis(a.timeout_ms));
    settings.log_dir = Some(a.log_dir.unwrap_or_else(|| cfg.run.output_dir.join("sessions")));
    println!("serving {kind} sessions on ws://{addr}");
    let make = move || {
        let mut audio = scenario.audio.clone();
        audio.buffer_len = FRAME_LEN;
        scenario.eval_env(kind, scenario.bank(Partition::Test, None)?, &audio)
    };
    serve(listener, make, settings, a.sessions, |i, outcome| match outcome {
        Ok(o) => println!(
            "session {i}: {} episodes, {} chunks, {} timeouts, {}",
            o.log.episodes.iter().filter(|e| e.is_complete()).count(),
            o.chunks_sent,
            o.timeouts,
            if o.log.completed { "complete" } else { "incomplete" }
        ),
        Err(e) => eprintln!("session {i} failed: {e}"),
    })
}

fn row_label(r: &ExperimentReport) -> String {
    let mut label = r.label.clone();
    let mut notes = Vec::new();
    if r.spec.reverb != ReverbKind::None {
        notes.push(format!("reverb {}", r.spec.reverb));
    }
    if r.spec.pitch_shift {
        notes.push("pitch shift".to_string());
    }
    if let Some(c) = r.spec.utterance_cap {
        notes.push(format!("cap {c}"));
    }
    if r.spec.partition == Partition::Train {
        notes.push("train partition".to_string());
    }
    if !notes.is_empty() {
        label = format!("{label} ({})", notes.join(", "));
    }
    label
}

fn cmd_report(dir: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut groups: BTreeMap<(String, String), Vec<ExperimentReport>> = BTreeMap::new();
    for p in paths {
        if let Ok(r) = read_report(&p) {
            groups.entry((r.spec.kind.to_string(), row_label(&r))).or_default().push(r);
        }
    }
    if groups.is_empty() {
        return Err(Error::InvalidArgument(format!("no evaluation reports in {}", dir.display())));
    }
    let mut tables: BTreeMap<String, Vec<(String, audionav::eval::Summary)>> = BTreeMap::new();
    for ((kind, label), reports) in groups {
        let summary = if reports.len() == 1 {
            reports[0].summary.clone()
        } else {
            combine_seeds(&reports)?
        };
        tables.entry(kind).or_default().push((label, summary));
    }
    let text: String = tables
        .iter()
        .map(|(kind, rows)| render_table(&format!("Results for {kind}"), rows))
        .collect::<Vec<_>>()
        .join("\n");
    println!("{text}");
    if let Some(path) = out {
        write_file(&path, &text)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load(&cli)?;
    match cli.command {
        Command::PrepareData { raw, out, seed } => cmd_prepare(&cfg, &raw, &out, seed),
        Command::Train { out, cap, init, resume } => cmd_train(&cfg, out, cap, init, resume),
        Command::Eval(a) => cmd_eval(&cfg, a),
        Command::Transfer(a) => cmd_transfer(&cfg, a),
        Command::Serve(a) => cmd_serve(&cfg, a),
        Command::Report { dir, out } => cmd_report(&dir, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
