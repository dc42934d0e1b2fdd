//! Command-line front end for the motion-synthesis toolkit.
//!
//! Exit codes: 0 on success, 2 when no feasible plan exists, 3 on
//! parse/config errors, 4 on numeric failures.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rand::rngs::StdRng;
use rand::SeedableRng;

use stylemotion::dataset::{
    load_sequences, load_skeleton, parse_synth_spec, save_dataset, split, synth_dataset,
    window_clips, DataError, SynthSpec, CLIP_LEN, CLIP_STRIDE,
};
use stylemotion::geom::{format_motion, parse_motion};
use stylemotion::longrange::{self, TransitionConfig};
use stylemotion::nn::{grad_check, AdamConfig, NnError};
use stylemotion::pipeline::{
    evaluate, export_frames, format_report, generate, ClipDatabase, EvalConfig,
    GenerationConfig, Models, PipelineError, StylePolicy,
};
use stylemotion::refsearch::{match_clip_widening, sample_subgoals, SearchError};
use stylemotion::shortrange::{self, ShortRangeConfig};
use stylemotion::{
    MotionSequence64, MotionState64, ShortRangeModel64, SkeletonTopology64, TransitionModel64,
};

#[derive(Parser)]
#[command(name = "stylemotion", version, about = "Hierarchical motion synthesis")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory: skeleton.skel plus *.mseq files.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write a deterministic synthetic walker dataset.
    SynthData {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Spec file with `walkers K frames T styles S seed X`; flags below
        /// are ignored when given.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        walkers: usize,
        #[arg(long, default_value_t = 300)]
        frames: usize,
        #[arg(long, default_value_t = 2)]
        styles: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Sample a sub-goal plan over the clip database and print it.
    Plan {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long = "num-segments", default_value_t = 3)]
        num_segments: usize,
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Write the plan here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the short-range content/style model.
    TrainShort {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// key = value overrides, one per line.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the long-range transition model.
    TrainLong {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long = "transition-length", default_value_t = 40)]
        transition_length: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Synthesize a full sequence between two endpoint states.
    Generate {
        #[command(flatten)]
        data: DataArgs,
        /// Short-range model checkpoint.
        #[arg(long)]
        short: PathBuf,
        /// Long-range model checkpoint.
        #[arg(long)]
        long: PathBuf,
        #[arg(long = "num-segments", default_value_t = 3)]
        num_segments: usize,
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
        /// Plan seed.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long = "style-seed", default_value_t = 11)]
        style_seed: u64,
        /// Start state as `file.mseq@frame`; defaults to the first frame of
        /// the first dataset sequence.
        #[arg(long)]
        start: Option<String>,
        /// End state as `file.mseq@frame`; defaults to the last frame of the
        /// last dataset sequence.
        #[arg(long)]
        end: Option<String>,
        /// Output directory for the .mseq and frame dump.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate one transition between two states.
    Interpolate {
        #[command(flatten)]
        data: DataArgs,
        /// Long-range model checkpoint.
        #[arg(long)]
        model: PathBuf,
        /// `file.mseq@frame`.
        #[arg(long)]
        start: String,
        /// `file.mseq@frame`.
        #[arg(long)]
        end: String,
        #[arg(long, default_value_t = 40)]
        length: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metric sweep over held-out clips.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        short: PathBuf,
        #[arg(long)]
        long: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long = "transition-length", default_value_t = 40)]
        transition_length: usize,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify analytic gradients of the primitives and both model graphs.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Re-dump a motion file as an annotated per-frame text listing.
    Export {
        /// Input .mseq file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                print!("{e}");
                std::process::exit(0);
            }
            _ => {
                eprintln!("{e}");
                std::process::exit(3);
            }
        },
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) => 2,
            CliError::Config(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::PlanInfeasible | SearchError::NoMatch { .. } => {
                CliError::Infeasible(e.to_string())
            }
            SearchError::EmptyDatabase => CliError::Config(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Checkpoint(_) | NnError::DuplicateParam(_) | NnError::Io(_) => {
                CliError::Config(e.to_string())
            }
            NnError::ShapeMismatch { .. } | NnError::MissingGrad(_) => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Search(inner) => inner.into(),
            PipelineError::CheckpointMismatch { .. }
            | PipelineError::EmptyEval
            | PipelineError::BadReport { .. }
            | PipelineError::Data(_)
            | PipelineError::Io(_) => CliError::Config(e.to_string()),
            PipelineError::Geom(_) => CliError::Numeric(e.to_string()),
            PipelineError::Nn(inner) => inner.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<shortrange::TrainError> for CliError {
    fn from(e: shortrange::TrainError) -> Self {
        match e {
            shortrange::TrainError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            shortrange::TrainError::Nn(inner) => inner.into(),
            shortrange::TrainError::Data(inner) => inner.into(),
        }
    }
}

impl From<longrange::TrainError> for CliError {
    fn from(e: longrange::TrainError) -> Self {
        match e {
            longrange::TrainError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            longrange::TrainError::Nn(inner) => inner.into(),
            longrange::TrainError::Geom(_) => CliError::Numeric(e.to_string()),
        }
    }
}

/// `key = value` (or `key value`) lines; `#` starts a comment.
fn read_config(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = match line.split_once('=') {
            Some((k, v)) => (k, v),
            None => line
                .split_once(char::is_whitespace)
                .ok_or_else(|| CliError::Config(format!("{}: line {}: expected key = value", path.display(), i + 1)))?,
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

struct ConfigMap(Vec<(String, String)>);

impl ConfigMap {
    fn load(path: &Option<PathBuf>) -> Result<Self, CliError> {
        Ok(ConfigMap(match path {
            Some(p) => read_config(p)?,
            None => Vec::new(),
        }))
    }

    fn apply<T: std::str::FromStr>(&self, key: &str, slot: &mut T) -> Result<(), CliError> {
        if let Some((_, v)) = self.0.iter().find(|(k, _)| k == key) {
            *slot = v
                .parse()
                .map_err(|_| CliError::Config(format!("bad value {v:?} for {key}")))?;
        }
        Ok(())
    }

    fn known(&self, keys: &[&str]) -> Result<(), CliError> {
        for (k, _) in &self.0 {
            if !keys.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown config key {k:?}")));
            }
        }
        Ok(())
    }
}

struct LoadedData {
    topo: SkeletonTopology64,
    seqs: Vec<(String, MotionSequence64)>,
}

fn load_data(dir: &Path) -> Result<LoadedData, CliError> {
    let topo = load_skeleton::<f64>(dir)?;
    let seqs = load_sequences::<f64>(dir)?;
    for (name, seq) in &seqs {
        if seq.joint_count() != topo.joint_count() {
            return Err(CliError::Config(format!(
                "{name}: sequence has {} joints, skeleton has {}",
                seq.joint_count(),
                topo.joint_count()
            )));
        }
    }
    Ok(LoadedData { topo, seqs })
}

fn state_ref(spec: &str, fallback_dir: &Path) -> Result<MotionState64, CliError> {
    let (file, idx) = spec
        .split_once('@')
        .ok_or_else(|| CliError::Config(format!("state reference {spec:?} must be file.mseq@frame")))?;
    let idx: usize = idx
        .parse()
        .map_err(|_| CliError::Config(format!("bad frame index in {spec:?}")))?;
    let mut path = PathBuf::from(file);
    if !path.exists() {
        path = fallback_dir.join(file);
    }
    let text = std::fs::read_to_string(&path)?;
    let seq: MotionSequence64 =
        parse_motion(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if idx >= seq.len() {
        return Err(CliError::Config(format!(
            "{spec:?}: frame {idx} out of range (sequence has {})",
            seq.len()
        )));
    }
    Ok(seq.frames[idx].clone())
}

fn adam_from_config(cfg: &ConfigMap) -> Result<AdamConfig<f64>, CliError> {
    let mut adam = AdamConfig::default();
    cfg.apply("learning_rate", &mut adam.learning_rate)?;
    cfg.apply("lr_decay", &mut adam.lr_decay)?;
    cfg.apply("weight_decay", &mut adam.weight_decay)?;
    Ok(adam)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Command::SynthData {
            out,
            spec,
            walkers,
            frames,
            styles,
            seed,
        } => {
            let spec = match spec {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)?;
                    parse_synth_spec(&text)?
                }
                None => SynthSpec {
                    walkers,
                    frames,
                    styles,
                    seed,
                },
            };
            let (topo, seqs) = synth_dataset::<f64>(spec);
            save_dataset(&out, &topo, &seqs)?;
            println!(
                "wrote {} sequences x {} frames to {}",
                seqs.len(),
                spec.frames,
                out.display()
            );
            Ok(())
        }
        Command::Plan {
            data,
            num_segments,
            sigma,
            seed,
            out,
        } => {
            let loaded = load_data(&data.data)?;
            let seqs: Vec<MotionSequence64> = loaded.seqs.into_iter().map(|(_, s)| s).collect();
            let windows = window_clips(&seqs, &loaded.topo, CLIP_LEN.min(longest(&seqs)), CLIP_STRIDE)?;
            let db = ClipDatabase::new(loaded.topo, windows.clips)?;
            let root = db.topo.root();
            let p_start = [0.0, 0.0];
            let any = &db.clips[db.clips.len() - 1].seq;
            let far = any.frames[any.len() - 1].positions[root];
            let p_end = [far[0] + 2.0, far[2] + 2.0];
            let mut rng = StdRng::seed_from_u64(seed);
            let plan = sample_subgoals(p_start, p_end, num_segments, &db.index, &mut rng)?;
            let mut text = String::new();
            text.push_str(&format!("segments {num_segments}\n"));
            text.push_str(&format!("d_min {}\nd_max {}\n", db.index.d_min, db.index.d_max));
            for (i, p) in plan.points.iter().enumerate() {
                text.push_str(&format!("point {i} {} {}\n", p[0], p[1]));
            }
            for i in 0..plan.segments() {
                let (clip, used_sigma) =
                    match_clip_widening(plan.segment_dists[i], &db.index, sigma, &mut rng)?;
                text.push_str(&format!(
                    "segment {i} dist {} heading {} {} clip {clip} sigma {used_sigma}\n",
                    plan.segment_dists[i], plan.headings[i][0], plan.headings[i][1]
                ));
            }
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::TrainShort {
            data,
            epochs,
            seed,
            out,
            config,
        } => {
            let cfgmap = ConfigMap::load(&config)?;
            cfgmap.known(&[
                "content_channels",
                "style_channels",
                "fused_channels",
                "content_hidden",
                "style_hidden",
                "decoder_hidden",
                "clip_len",
                "batch_size",
                "cst_weight",
                "heldout_fraction",
                "stride",
                "learning_rate",
                "lr_decay",
                "weight_decay",
            ])?;
            let mut cfg = ShortRangeConfig::<f64>::default();
            cfgmap.apply("content_channels", &mut cfg.content_channels)?;
            cfgmap.apply("style_channels", &mut cfg.style_channels)?;
            cfgmap.apply("fused_channels", &mut cfg.fused_channels)?;
            cfgmap.apply("content_hidden", &mut cfg.content_hidden)?;
            cfgmap.apply("style_hidden", &mut cfg.style_hidden)?;
            cfgmap.apply("decoder_hidden", &mut cfg.decoder_hidden)?;
            cfgmap.apply("clip_len", &mut cfg.clip_len)?;
            cfgmap.apply("batch_size", &mut cfg.batch_size)?;
            cfgmap.apply("cst_weight", &mut cfg.weights.cst)?;
            let mut heldout_fraction = 0.25;
            cfgmap.apply("heldout_fraction", &mut heldout_fraction)?;
            let mut stride = CLIP_STRIDE;
            cfgmap.apply("stride", &mut stride)?;
            let adam = adam_from_config(&cfgmap)?;

            let loaded = load_data(&data.data)?;
            let seqs: Vec<MotionSequence64> = loaded.seqs.into_iter().map(|(_, s)| s).collect();
            let windows = window_clips(&seqs, &loaded.topo, cfg.clip_len, stride)?;
            if windows.skipped > 0 {
                eprintln!("skipped {} sequences shorter than the clip length", windows.skipped);
            }
            let ds = split(windows.clips, heldout_fraction, seed);
            let mut rng = StdRng::seed_from_u64(seed);
            let mut model =
                ShortRangeModel64::new(cfg, loaded.topo.joint_count(), 30.0, &mut rng);
            let report =
                shortrange::train(&mut model, &ds, &loaded.topo, epochs, &adam, &mut rng)?;
            model.save(&out)?;
            println!(
                "trained {} epochs on {} clips; loss {} -> {}",
                epochs,
                ds.train.len(),
                report.epoch_loss.first().unwrap(),
                report.epoch_loss.last().unwrap()
            );
            println!("checkpoint: {}", out.display());
            Ok(())
        }
        Command::TrainLong {
            data,
            epochs,
            transition_length,
            seed,
            out,
            config,
        } => {
            let cfgmap = ConfigMap::load(&config)?;
            cfgmap.known(&[
                "hidden",
                "fuse_hidden",
                "disc_hidden",
                "disc_window",
                "disc_blocks",
                "batch_size",
                "adv_batch",
                "adv_weight",
                "deviation_scale",
                "clip_len",
                "heldout_fraction",
                "stride",
                "learning_rate",
                "lr_decay",
                "weight_decay",
            ])?;
            let mut cfg = TransitionConfig::<f64> {
                transition_len: transition_length,
                ..TransitionConfig::default()
            };
            cfgmap.apply("hidden", &mut cfg.hidden)?;
            cfgmap.apply("fuse_hidden", &mut cfg.fuse_hidden)?;
            cfgmap.apply("disc_hidden", &mut cfg.disc_hidden)?;
            cfgmap.apply("disc_window", &mut cfg.disc_window)?;
            cfgmap.apply("disc_blocks", &mut cfg.disc_blocks)?;
            cfgmap.apply("batch_size", &mut cfg.batch_size)?;
            cfgmap.apply("adv_batch", &mut cfg.adv_batch)?;
            cfgmap.apply("adv_weight", &mut cfg.adv_weight)?;
            cfgmap.apply("deviation_scale", &mut cfg.deviation_scale)?;
            let mut clip_len = CLIP_LEN;
            cfgmap.apply("clip_len", &mut clip_len)?;
            let mut heldout_fraction = 0.25;
            cfgmap.apply("heldout_fraction", &mut heldout_fraction)?;
            let mut stride = CLIP_STRIDE;
            cfgmap.apply("stride", &mut stride)?;
            let adam = adam_from_config(&cfgmap)?;

            let loaded = load_data(&data.data)?;
            let seqs: Vec<MotionSequence64> = loaded.seqs.into_iter().map(|(_, s)| s).collect();
            let windows = window_clips(&seqs, &loaded.topo, clip_len, stride)?;
            let ds = split(windows.clips, heldout_fraction, seed);
            let mut rng = StdRng::seed_from_u64(seed);
            let mut model =
                TransitionModel64::new(cfg, loaded.topo.joint_count(), 30.0, &mut rng);
            let report = longrange::train(&mut model, &ds, &loaded.topo, epochs, &adam, &mut rng)?;
            model.save(&out)?;
            println!(
                "trained {} epochs on {} clips; position loss {} -> {}",
                epochs,
                ds.train.len(),
                report.epoch_pos_loss.first().unwrap(),
                report.epoch_pos_loss.last().unwrap()
            );
            println!("checkpoint: {}", out.display());
            Ok(())
        }
        Command::Generate {
            data,
            short,
            long,
            num_segments,
            sigma,
            seed,
            style_seed,
            start,
            end,
            out,
            config,
        } => {
            let cfgmap = ConfigMap::load(&config)?;
            cfgmap.known(&["transition_len", "clip_len", "stride", "style_policy"])?;
            let loaded = load_data(&data.data)?;
            let short = ShortRangeModel64::load(&short)?;
            let long = TransitionModel64::load(&long)?;
            let mut clip_len = short.cfg.clip_len;
            cfgmap.apply("clip_len", &mut clip_len)?;
            let mut stride = (clip_len / 2).max(1);
            cfgmap.apply("stride", &mut stride)?;
            let mut transition_len = long.cfg.transition_len;
            cfgmap.apply("transition_len", &mut transition_len)?;
            let mut policy_name = "random".to_string();
            cfgmap.apply("style_policy", &mut policy_name)?;
            let style_policy = match policy_name.as_str() {
                "random" => StylePolicy::Random,
                "identity" => StylePolicy::Identity,
                other => {
                    return Err(CliError::Config(format!(
                        "style_policy must be random or identity, got {other:?}"
                    )))
                }
            };

            let seqs: Vec<MotionSequence64> =
                loaded.seqs.iter().map(|(_, s)| s.clone()).collect();
            let start_state = match &start {
                Some(spec) => state_ref(spec, &data.data)?,
                None => seqs
                    .first()
                    .ok_or_else(|| CliError::Config("dataset has no sequences".into()))?
                    .frames[0]
                    .clone(),
            };
            let end_state = match &end {
                Some(spec) => state_ref(spec, &data.data)?,
                None => {
                    let last = seqs
                        .last()
                        .ok_or_else(|| CliError::Config("dataset has no sequences".into()))?;
                    last.frames[last.len() - 1].clone()
                }
            };
            let windows = window_clips(&seqs, &loaded.topo, clip_len, stride)?;
            let db = ClipDatabase::new(loaded.topo, windows.clips)?;
            let models = Models { short, long };
            let cfg = GenerationConfig {
                num_segments,
                transition_len,
                sigma,
                plan_seed: seed,
                style_seed,
                style_policy,
            };
            let result = generate(&cfg, &start_state, &end_state, &db, &models)?;
            export_frames(&result, &out, "generated")?;
            println!(
                "generated {} frames over {} spans -> {}",
                result.sequence.len(),
                result.spans.len(),
                out.display()
            );
            Ok(())
        }
        Command::Interpolate {
            data,
            model,
            start,
            end,
            length,
            out,
        } => {
            let loaded = load_data(&data.data)?;
            let model = TransitionModel64::load(&model)?;
            if model.joints != loaded.topo.joint_count() {
                return Err(CliError::Config(format!(
                    "model expects {} joints, skeleton has {}",
                    model.joints,
                    loaded.topo.joint_count()
                )));
            }
            let s1 = state_ref(&start, &data.data)?;
            let s2 = state_ref(&end, &data.data)?;
            let seq = longrange::interpolate(&model, &s1, &s2, length, &loaded.topo)?;
            std::fs::write(&out, format_motion(&seq))?;
            println!("wrote {} frames to {}", seq.len(), out.display());
            Ok(())
        }
        Command::Eval {
            data,
            short,
            long,
            seed,
            transition_length,
            out,
        } => {
            let loaded = load_data(&data.data)?;
            let short = ShortRangeModel64::load(&short)?;
            let long = TransitionModel64::load(&long)?;
            let seqs: Vec<MotionSequence64> = loaded.seqs.into_iter().map(|(_, s)| s).collect();
            let windows = window_clips(&seqs, &loaded.topo, short.cfg.clip_len, CLIP_STRIDE)?;
            let ds = split(windows.clips, 0.25, seed);
            let models = Models { short, long };
            let report = evaluate(
                &models,
                &ds.train,
                &ds.heldout,
                &loaded.topo,
                &EvalConfig {
                    transition_len: transition_length,
                    style_seed: seed,
                    ..EvalConfig::default()
                },
            )?;
            let text = format_report(&report);
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Gradcheck { seed } => gradcheck_cmd(seed),
        Command::Export { input, out } => {
            let text = std::fs::read_to_string(&input)?;
            let seq: MotionSequence64 = parse_motion(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
            std::fs::create_dir_all(&out)?;
            let stem = input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "sequence".into());
            std::fs::write(out.join(format!("{stem}.mseq")), format_motion(&seq))?;
            let mut dump = String::new();
            dump.push_str(&format!("frames {} joints {}\n", seq.len(), seq.joint_count()));
            dump.push_str(&format!("span 0 start 0 len {} sequence\n", seq.len()));
            for (t, frame) in seq.frames.iter().enumerate() {
                dump.push_str(&format!("frame {t}"));
                for p in &frame.positions {
                    for c in p {
                        dump.push_str(&format!(" {c}"));
                    }
                }
                dump.push('\n');
            }
            std::fs::write(out.join(format!("{stem}.frames.txt")), dump)?;
            println!("exported {} frames to {}", seq.len(), out.display());
            Ok(())
        }
    }
}

fn longest(seqs: &[MotionSequence64]) -> usize {
    seqs.iter().map(|s| s.len()).max().unwrap_or(CLIP_LEN)
}

/// Gradient checks of the primitive suite plus both full model graphs at
/// tiny dimensions; exits 4 if anything drifts past 1e-4.
fn gradcheck_cmd(seed: u64) -> Result<(), CliError> {
    use stylemotion::dataset::{synth_skeleton, MotionClip};
    use stylemotion::nn::ParamStore;

    let tol = 1e-4;
    let mut worst: f64 = 0.0;
    let mut record = |name: &str, err: f64| {
        println!("gradcheck {name}: max relative error {err:.3e}");
        worst = worst.max(err);
    };

    // Primitive sweep.
    {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let rt = |shape: Vec<usize>, rng: &mut StdRng| {
            use rand::Rng;
            let len = shape.iter().product();
            stylemotion::Tensor64::new(
                shape,
                (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap()
        };
        store.insert("x", rt(vec![2, 6], &mut rng)).map_err(CliError::from)?;
        store.insert("w", rt(vec![3, 2, 3], &mut rng)).map_err(CliError::from)?;
        store.insert("b", rt(vec![3], &mut rng)).map_err(CliError::from)?;
        store.insert("hc", rt(vec![3], &mut rng)).map_err(CliError::from)?;
        store.insert("bw", rt(vec![3, 2, 4], &mut rng)).map_err(CliError::from)?;
        store.insert("hs", rt(vec![4], &mut rng)).map_err(CliError::from)?;
        store.insert("mat", rt(vec![4, 3], &mut rng)).map_err(CliError::from)?;
        let err = grad_check(&mut store, 1e-5, seed, |g, p| {
            let conv = g.conv1d(p.value("x"), p.value("w"), p.value("b"))?;
            let act = g.tanh(conv);
            let bil = g.bilinear(p.value("hc"), p.value("bw"), p.value("hs"))?;
            let sig = g.sigmoid(bil);
            let gm = g.gram(p.value("mat"))?;
            let pieces = [g.mean_all(act), g.mean_all(sig), g.mean_all(gm)];
            g.sum_values(&pieces)
        })
        .map_err(CliError::from)?;
        record("primitives", err);
    }

    // Short-range model graph.
    {
        let topo = synth_skeleton::<f64>();
        let mut rng = StdRng::seed_from_u64(seed + 1);
        let mut model =
            ShortRangeModel64::new(ShortRangeConfig::tiny(16), topo.joint_count(), 30.0, &mut rng);
        let (_, seqs) = synth_dataset::<f64>(SynthSpec {
            walkers: 2,
            frames: 16,
            styles: 1,
            seed,
        });
        let clips: Vec<MotionClip<f64>> = seqs
            .into_iter()
            .map(|(_, s)| MotionClip::from_sequence(s, &topo))
            .collect::<Result<_, _>>()?;
        let mats: Vec<stylemotion::Tensor64> = clips
            .iter()
            .map(|c| shortrange::clip_channels(c, &topo))
            .collect();
        model.norm = shortrange::Normalization::fit(&mats);
        let x_m = model.norm.normalize(&mats[0]);
        let x_n = model.norm.normalize(&mats[1]);
        let mut store = model.store.clone();
        let err = grad_check(&mut store, 1e-5, seed, |g, p| {
            shortrange::training_loss_graph(&model, g, p, &x_m, &x_n, (3, 11))
        })
        .map_err(CliError::from)?;
        record("short-range model", err);
    }

    // Long-range generator graph.
    {
        let topo = synth_skeleton::<f64>();
        let mut rng = StdRng::seed_from_u64(seed + 2);
        let model =
            TransitionModel64::new(TransitionConfig::tiny(8), topo.joint_count(), 30.0, &mut rng);
        let (_, seqs) = synth_dataset::<f64>(SynthSpec {
            walkers: 1,
            frames: 8,
            styles: 1,
            seed,
        });
        let frames = seqs.into_iter().next().unwrap().1.frames;
        let boundary = longrange::TransitionBoundary::from_window(&frames, &topo, 30.0)
            .map_err(|e| CliError::Numeric(e.to_string()))?;
        let mut store = model.gen_store.clone();
        let err = grad_check(&mut store, 1e-5, seed, |g, p| {
            longrange::supervised_loss_graph(&model, g, p, &boundary, &topo)
                .map_err(|e| NnError::Checkpoint(e.to_string()))
        })
        .map_err(CliError::from)?;
        record("long-range generator", err);
    }

    if worst < tol {
        println!("gradcheck: all graphs within {tol:.0e}");
        Ok(())
    } else {
        Err(CliError::Numeric(format!(
            "gradient error {worst:.3e} exceeds {tol:.0e}"
        )))
    }
}
