//! The `eap` command line: `simulate`, `propose` and `eval`.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use eap_core::io::{
    parse_meta, parse_proposals_csv, read_ground_truth, write_ground_truth_csv, write_meta_csv,
    write_scores_csv, ProposalWriter, ScoreReader,
};
use eap_core::metrics::{DEFAULT_MAX_PROPOSALS, DEFAULT_TIOU_THRESHOLD};
use eap_core::simulator::simulate;
use eap_core::timeline::{DEFAULT_CLIP_LEN, DEFAULT_STRIDE};
use eap_core::{
    EvalConfig, EvalCorpus, EvalReport, Execution, Proposer, ProposerConfig, SimConfig, VideoMeta,
};

const IO_BUFFER: usize = 1 << 20;

#[derive(Debug, Parser)]
#[command(
    name = "eap",
    version,
    about = "Early temporal action proposals from clip score streams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a clip score CSV into proposals, one video stream at a time.
    Propose(ProposeArgs),
    /// Evaluate proposals against ground truth (AR-AN and precision-recall).
    Eval(EvalArgs),
    /// Write a seeded synthetic corpus: scores.csv, ground_truth.csv, meta.csv.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GeometryArgs {
    /// Frames per second.
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Clip length in frames.
    #[arg(long, default_value_t = DEFAULT_CLIP_LEN)]
    pub clip_len: u32,
    /// Clip stride in frames.
    #[arg(long, default_value_t = DEFAULT_STRIDE)]
    pub stride: u32,
}

#[derive(Debug, Clone, Args)]
pub struct ProposeArgs {
    /// Score CSV: video_id,clip_index,t_start,t_end,score
    pub scores: PathBuf,
    /// Output proposal CSV.
    pub output: PathBuf,
    /// Per-video metadata CSV (video_id,fps,clip_len,stride). Without it,
    /// every video uses --fps/--clip-len/--stride.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// A clip is action when its score is at least this value.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Background clips absorbed inside a run before it closes.
    #[arg(long, default_value_t = 0)]
    pub gap_tolerance: u64,
    /// Minimum number of action clips for a proposal.
    #[arg(long, default_value_t = 1)]
    pub min_clips: u64,
    #[command(flatten)]
    pub geometry: GeometryArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Proposal CSV as written by `propose`.
    pub proposals: PathBuf,
    /// Ground truth: a CSV file (video_id,t_start,t_end,label) or a
    /// directory of THUMOS-style per-class annotation files.
    pub ground_truth: PathBuf,
    /// Directory receiving ar_an.csv, pr.csv and summary.txt.
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TIOU_THRESHOLD)]
    pub tiou: f64,
    /// Proposals consulted per video.
    #[arg(long, default_value_t = DEFAULT_MAX_PROPOSALS)]
    pub max_proposals: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Directory receiving scores.csv, ground_truth.csv and meta.csv.
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub num_videos: usize,
    /// Clips per video.
    #[arg(long, default_value_t = 500)]
    pub video_len: u64,
    /// Expected fraction of action clips, in (0, 1).
    #[arg(long, default_value_t = 0.25)]
    pub prevalence: f64,
    /// Distance between action and background score means.
    #[arg(long, default_value_t = 0.5)]
    pub separability: f64,
    /// Half-width of the bounded score noise; 0 for noiseless scores.
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    /// Mean action run length in clips.
    #[arg(long, default_value_t = 8.0)]
    pub mean_action_clips: f64,
    /// Jitter ground-truth boundaries off the clip grid.
    #[arg(long)]
    pub no_snap: bool,
    #[command(flatten)]
    pub geometry: GeometryArgs,
}

impl SimulateArgs {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            num_videos: self.num_videos,
            video_len_clips: self.video_len,
            action_prevalence: self.prevalence,
            separability: self.separability,
            noise_width: self.noise,
            mean_action_clips: self.mean_action_clips,
            snap_to_grid: !self.no_snap,
            fps: self.geometry.fps,
            clip_len: self.geometry.clip_len,
            stride: self.geometry.stride,
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Propose(args) => {
            let summary = cmd_propose(&args)?;
            eprintln!(
                "{} clips from {} videos -> {} proposals",
                summary.clips, summary.videos, summary.proposals
            );
        }
        Command::Eval(args) => {
            let report = cmd_eval(&args)?;
            print!("{}", report.summary());
        }
        Command::Simulate(args) => {
            let config = cmd_simulate(&args)?;
            println!("seed = {}", config.seed);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProposeSummary {
    pub videos: usize,
    pub clips: u64,
    pub proposals: u64,
}

/// Streams the score file through one proposer per video, writing each
/// proposal the moment it is emitted. Memory is one proposer per open video.
pub fn cmd_propose(args: &ProposeArgs) -> Result<ProposeSummary> {
    let config = ProposerConfig::new(args.threshold, args.gap_tolerance, args.min_clips)?;
    let fallback = VideoMeta::new(
        "default",
        args.geometry.fps,
        args.geometry.clip_len,
        args.geometry.stride,
    )?;
    let metas: Option<HashMap<String, VideoMeta>> = match &args.meta {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let list = parse_meta(BufReader::new(file)).map_err(|e| e.in_file(path))?;
            Some(
                list.into_iter()
                    .map(|m| (m.video_id().to_owned(), m))
                    .collect(),
            )
        }
        None => None,
    };

    let input =
        File::open(&args.scores).with_context(|| format!("opening {}", args.scores.display()))?;
    let reader = ScoreReader::new(BufReader::with_capacity(IO_BUFFER, input))
        .map_err(|e| e.in_file(&args.scores))?;

    let output = File::create(&args.output)
        .with_context(|| format!("creating {}", args.output.display()))?;
    let writer = ProposalWriter::new(BufWriter::with_capacity(IO_BUFFER, output))?;

    let result = stream_proposals(
        reader,
        writer,
        config,
        &fallback,
        metas.as_ref(),
        &args.scores,
    );
    if result.is_err() {
        let _ = fs::remove_file(&args.output);
    }
    result
}

fn stream_proposals<R: std::io::Read, W: Write>(
    reader: ScoreReader<R>,
    mut writer: ProposalWriter<W>,
    config: ProposerConfig,
    fallback: &VideoMeta,
    metas: Option<&HashMap<String, VideoMeta>>,
    path: &Path,
) -> Result<ProposeSummary> {
    let mut open: HashMap<String, Proposer> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut summary = ProposeSummary {
        videos: 0,
        clips: 0,
        proposals: 0,
    };

    for row in reader {
        let row = row.map_err(|e| e.in_file(path))?;
        let clip = row.clip;
        if !open.contains_key(&clip.video_id) {
            let meta = match metas {
                Some(m) => m.get(&clip.video_id).cloned().ok_or_else(|| {
                    anyhow!(
                        "{}:{}: no metadata for video {}",
                        path.display(),
                        row.line,
                        clip.video_id
                    )
                })?,
                None => fallback.with_video_id(clip.video_id.as_str())?,
            };
            order.push(clip.video_id.clone());
            open.insert(clip.video_id.clone(), Proposer::new(config, meta));
        }
        let proposer = open.get_mut(&clip.video_id).expect("inserted above");
        let emitted = proposer
            .process_clip(&clip)
            .map_err(|e| anyhow!("{}:{}: {}", path.display(), row.line, e))?;
        summary.clips += 1;
        if let Some(p) = emitted {
            writer.write(&p)?;
            summary.proposals += 1;
        }
    }

    for id in &order {
        if let Some(p) = open.get_mut(id).and_then(Proposer::flush) {
            writer.write(&p)?;
            summary.proposals += 1;
        }
    }
    writer.finish()?;
    summary.videos = order.len();
    Ok(summary)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let config = EvalConfig::new(args.tiou, args.max_proposals)?;
    let file = File::open(&args.proposals)
        .with_context(|| format!("opening {}", args.proposals.display()))?;
    let proposals =
        parse_proposals_csv(BufReader::new(file)).map_err(|e| e.in_file(&args.proposals))?;
    let ground_truth = read_ground_truth(&args.ground_truth)?;

    let corpus = EvalCorpus::new(proposals, ground_truth, config);
    let report = corpus.evaluate(Execution::default())?;

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    report.write_ar_an_csv(BufWriter::new(File::create(
        args.out_dir.join("ar_an.csv"),
    )?))?;
    report.write_pr_csv(BufWriter::new(File::create(args.out_dir.join("pr.csv"))?))?;
    fs::write(args.out_dir.join("summary.txt"), report.summary())?;
    Ok(report)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<SimConfig> {
    let config = args.sim_config();
    config.validate()?;
    let corpus = simulate(&config, Execution::default())?;

    if args.out_dir.exists() && !args.out_dir.is_dir() {
        bail!("{} is not a directory", args.out_dir.display());
    }
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let create = |name: &str| -> Result<BufWriter<File>> {
        let path = args.out_dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::with_capacity(IO_BUFFER, f))
    };
    write_scores_csv(create("scores.csv")?, corpus.clips())?;
    write_ground_truth_csv(create("ground_truth.csv")?, corpus.ground_truth())?;
    write_meta_csv(create("meta.csv")?, corpus.videos.iter().map(|v| &v.meta))?;
    Ok(config)
}
