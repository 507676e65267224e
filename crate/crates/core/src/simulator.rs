//! Seeded synthetic corpora: ground-truth action runs plus a clip score
//! stream whose action/background separation is a single knob.
//!
//! Every video draws from its own ChaCha substream derived from the master
//! seed and the video's position, so parallel and sequential generation are
//! bit-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::Execution;
use crate::proposer::VideoStream;
use crate::timeline::{
    clip_to_segment, ClipScore, GroundTruthSegment, TemporalSegment, TimelineError, VideoMeta,
    DEFAULT_CLIP_LEN, DEFAULT_STRIDE,
};

pub const SIM_LABEL: &str = "action";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("action prevalence must lie strictly between 0 and 1 (got {0})")]
    Prevalence(f64),
    #[error("separability must be finite and non-negative (got {0})")]
    Separability(f64),
    #[error("noise width must be finite and non-negative (got {0})")]
    NoiseWidth(f64),
    #[error("mean action run length must be at least one clip (got {0})")]
    MeanActionClips(f64),
    #[error("need at least one video")]
    NoVideos,
    #[error("videos need at least one clip")]
    EmptyVideos,
    #[error(transparent)]
    Geometry(#[from] TimelineError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub num_videos: usize,
    pub video_len_clips: u64,
    /// Expected fraction of action clips.
    pub action_prevalence: f64,
    /// Distance between the action and background score means, capped at 1.
    pub separability: f64,
    /// Half-width of the bounded score noise; 0 gives noiseless scores.
    pub noise_width: f64,
    /// Mean length of an action run, in clips.
    pub mean_action_clips: f64,
    pub snap_to_grid: bool,
    pub fps: f64,
    pub clip_len: u32,
    pub stride: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_videos: 20,
            video_len_clips: 500,
            action_prevalence: 0.25,
            separability: 0.5,
            noise_width: 0.5,
            mean_action_clips: 8.0,
            snap_to_grid: true,
            fps: 30.0,
            clip_len: DEFAULT_CLIP_LEN,
            stride: DEFAULT_STRIDE,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let p = self.action_prevalence;
        if !(p > 0.0 && p < 1.0) {
            return Err(SimError::Prevalence(p));
        }
        if !(self.separability.is_finite() && self.separability >= 0.0) {
            return Err(SimError::Separability(self.separability));
        }
        if !(self.noise_width.is_finite() && self.noise_width >= 0.0) {
            return Err(SimError::NoiseWidth(self.noise_width));
        }
        if !(self.mean_action_clips.is_finite() && self.mean_action_clips >= 1.0) {
            return Err(SimError::MeanActionClips(self.mean_action_clips));
        }
        if self.num_videos == 0 {
            return Err(SimError::NoVideos);
        }
        if self.video_len_clips == 0 {
            return Err(SimError::EmptyVideos);
        }
        self.meta(0)?;
        Ok(())
    }

    pub fn video_id(index: usize) -> String {
        format!("sim_video_{index:06}")
    }

    pub fn meta(&self, index: usize) -> Result<VideoMeta, TimelineError> {
        VideoMeta::new(Self::video_id(index), self.fps, self.clip_len, self.stride)
    }

    /// Score mean offset from 0.5.
    pub fn half_separation(&self) -> f64 {
        (self.separability / 2.0).min(0.5)
    }

    /// Mean (action, background) run lengths in clips.
    ///
    /// Runs are at least one clip long, so at high prevalence the background
    /// mean is pinned to one clip and the action mean grows instead.
    pub fn mean_run_lengths(&self) -> (f64, f64) {
        let p = self.action_prevalence;
        let action = self.mean_action_clips;
        let background = action * (1.0 - p) / p;
        if background < 1.0 {
            (p / (1.0 - p), 1.0)
        } else {
            (action, background)
        }
    }

    fn rng(&self, video: usize, purpose: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(video as u64 * 2 + purpose);
        rng
    }
}

/// One synthetic video: timing plus annotated action instances.
#[derive(Debug, Clone, PartialEq)]
pub struct SimVideo {
    pub meta: VideoMeta,
    pub ground_truth: Vec<GroundTruthSegment>,
}

/// Ground truth and score streams for a whole synthetic corpus.
#[derive(Debug, Clone)]
pub struct SimCorpus {
    pub videos: Vec<SimVideo>,
    pub streams: Vec<VideoStream>,
}

impl SimCorpus {
    pub fn ground_truth(&self) -> impl Iterator<Item = &GroundTruthSegment> {
        self.videos.iter().flat_map(|v| v.ground_truth.iter())
    }

    pub fn clips(&self) -> impl Iterator<Item = &ClipScore> {
        self.streams.iter().flat_map(|s| s.clips.iter())
    }
}

/// Geometric draw on {1, 2, ...} with the given mean.
fn geometric<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 1.0 {
        return 1;
    }
    let q = 1.0 / mean;
    // 1 - u lies in (0, 1], keeping the log finite
    let u: f64 = 1.0 - rng.random::<f64>();
    1 + (u.ln() / (1.0 - q).ln()).floor() as u64
}

/// Bounded, symmetric, unimodal draw on [-1, 1]: the mean of four uniforms.
fn bell<R: Rng>(rng: &mut R) -> f64 {
    (0..4).map(|_| rng.random_range(-1.0..=1.0)).sum::<f64>() / 4.0
}

/// Action runs as inclusive clip ranges, alternating with background.
fn action_runs<R: Rng>(rng: &mut R, config: &SimConfig) -> Vec<(u64, u64)> {
    let (mean_action, mean_background) = config.mean_run_lengths();
    let n = config.video_len_clips;
    let mut runs = Vec::new();
    let mut in_action = rng.random_bool(config.action_prevalence);
    let mut pos = 0u64;
    while pos < n {
        let len = geometric(
            rng,
            if in_action {
                mean_action
            } else {
                mean_background
            },
        );
        let end = (pos + len).min(n);
        if in_action {
            runs.push((pos, end - 1));
        }
        pos = end;
        in_action = !in_action;
    }
    runs
}

fn ground_truth_for(config: &SimConfig, index: usize) -> Result<SimVideo, SimError> {
    let meta = config.meta(index)?;
    let mut rng = config.rng(index, 0);
    let runs = action_runs(&mut rng, config);
    let jitter = f64::from(config.clip_len.min(config.stride)) / 4.0;
    let ground_truth = runs
        .into_iter()
        .map(|(first, last)| {
            let segment = if config.snap_to_grid {
                clip_to_segment(&meta, first, last)?
            } else {
                let lo =
                    first as f64 * f64::from(config.stride) + rng.random_range(-jitter..=jitter);
                let hi = last as f64 * f64::from(config.stride)
                    + f64::from(config.clip_len)
                    + rng.random_range(-jitter..=jitter);
                TemporalSegment::new(lo.max(0.0) / config.fps, hi / config.fps)?
            };
            GroundTruthSegment::new(meta.video_id(), segment, Some(SIM_LABEL.to_owned()))
        })
        .collect::<Result<Vec<_>, TimelineError>>()?;
    Ok(SimVideo { meta, ground_truth })
}

/// Alternating background/action ground truth for every video.
pub fn generate_ground_truth(
    config: &SimConfig,
    exec: Execution,
) -> Result<Vec<SimVideo>, SimError> {
    config.validate()?;
    let indices: Vec<usize> = (0..config.num_videos).collect();
    exec.try_map(&indices, |&i| ground_truth_for(config, i))
}

/// Clip-level action labels: a clip is action iff at least half of its
/// duration lies inside the union of the ground-truth segments.
pub fn label_clips(
    meta: &VideoMeta,
    ground_truth: &[GroundTruthSegment],
    num_clips: u64,
) -> Vec<bool> {
    let mut spans: Vec<(f64, f64)> = ground_truth
        .iter()
        .map(|g| (g.segment.start(), g.segment.end()))
        .collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(spans.len());
    for (s, e) in spans {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }

    let mut k = 0;
    (0..num_clips)
        .map(|i| {
            let (cs, ce) = (meta.clip_start(i), meta.clip_end(i));
            while k < merged.len() && merged[k].1 <= cs {
                k += 1;
            }
            let mut covered = 0.0;
            for &(s, e) in merged[k..].iter().take_while(|(s, _)| *s < ce) {
                covered += (e.min(ce) - s.max(cs)).max(0.0);
            }
            covered >= 0.5 * (ce - cs)
        })
        .collect()
}

fn scores_for(config: &SimConfig, index: usize, video: &SimVideo) -> VideoStream {
    let mut rng = config.rng(index, 1);
    let s = config.half_separation();
    let labels = label_clips(&video.meta, &video.ground_truth, config.video_len_clips);
    let clips = labels
        .into_iter()
        .enumerate()
        .map(|(i, is_action)| {
            let mean = if is_action { 0.5 + s } else { 0.5 - s };
            let noise = if config.noise_width > 0.0 {
                config.noise_width * bell(&mut rng)
            } else {
                0.0
            };
            let score = (mean + noise).clamp(0.0, 1.0);
            ClipScore::on_grid(&video.meta, i as u64, score).expect("valid geometry and score")
        })
        .collect();
    VideoStream {
        meta: video.meta.clone(),
        clips,
    }
}

/// One score per clip for every video, action clips centred on `0.5 + s`
/// and background clips on `0.5 - s` with `s = min(0.5, separability / 2)`.
pub fn generate_scores(
    videos: &[SimVideo],
    config: &SimConfig,
    exec: Execution,
) -> Result<Vec<VideoStream>, SimError> {
    config.validate()?;
    let indexed: Vec<(usize, &SimVideo)> = videos.iter().enumerate().collect();
    Ok(exec.map(&indexed, |&(i, v)| scores_for(config, i, v)))
}

pub fn simulate(config: &SimConfig, exec: Execution) -> Result<SimCorpus, SimError> {
    let videos = generate_ground_truth(config, exec)?;
    let streams = generate_scores(&videos, config, exec)?;
    Ok(SimCorpus { videos, streams })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_config() -> SimConfig {
        SimConfig {
            fps: 1.0,
            clip_len: 1,
            stride: 1,
            ..SimConfig::default()
        }
    }

    #[test]
    fn prevalence_law_of_large_numbers() {
        // 100 videos x 10,000 clips = 1,000,000 clips
        let config = SimConfig {
            seed: 11,
            num_videos: 100,
            video_len_clips: 10_000,
            action_prevalence: 0.25,
            ..unit_config()
        };
        let videos = generate_ground_truth(&config, Execution::default()).unwrap();
        let action: usize = videos
            .iter()
            .map(|v| {
                label_clips(&v.meta, &v.ground_truth, config.video_len_clips)
                    .into_iter()
                    .filter(|&a| a)
                    .count()
            })
            .sum();
        let frac = action as f64 / 1_000_000.0;
        assert!((frac - 0.25).abs() <= 0.01, "action fraction {frac}");
    }

    #[test]
    fn high_prevalence_still_hits_target() {
        let config = SimConfig {
            seed: 3,
            num_videos: 20,
            video_len_clips: 10_000,
            action_prevalence: 0.95,
            ..unit_config()
        };
        let videos = generate_ground_truth(&config, Execution::default()).unwrap();
        let action: usize = videos
            .iter()
            .map(|v| {
                v.ground_truth
                    .iter()
                    .map(|g| g.segment.duration() as usize)
                    .sum::<usize>()
            })
            .sum();
        let frac = action as f64 / 200_000.0;
        assert!((frac - 0.95).abs() <= 0.01, "action fraction {frac}");
    }

    #[test]
    fn deterministic_under_seed() {
        let config = SimConfig {
            seed: 42,
            num_videos: 5,
            video_len_clips: 300,
            ..SimConfig::default()
        };
        let a = simulate(&config, Execution::Sequential).unwrap();
        let b = simulate(&config, Execution::Sequential).unwrap();
        assert_eq!(a.videos, b.videos);
        assert!(a
            .streams
            .iter()
            .zip(&b.streams)
            .all(|(x, y)| x.clips == y.clips));
    }

    #[test]
    fn parallel_equals_sequential() {
        let config = SimConfig {
            seed: 5,
            num_videos: 16,
            snap_to_grid: false,
            ..SimConfig::default()
        };
        let a = simulate(&config, Execution::Sequential).unwrap();
        let b = simulate(&config, Execution::Parallel).unwrap();
        assert_eq!(a.videos, b.videos);
        assert!(a
            .streams
            .iter()
            .zip(&b.streams)
            .all(|(x, y)| x.clips == y.clips));
    }

    #[test]
    fn distinct_seeds_differ() {
        let base = SimConfig {
            num_videos: 2,
            video_len_clips: 200,
            ..SimConfig::default()
        };
        let runs: Vec<Vec<f64>> = (0..20)
            .map(|seed| {
                let c = simulate(
                    &SimConfig {
                        seed,
                        ..base.clone()
                    },
                    Execution::Sequential,
                )
                .unwrap();
                c.clips().map(|c| c.score()).collect()
            })
            .collect();
        for i in 0..runs.len() {
            for j in i + 1..runs.len() {
                assert_ne!(runs[i], runs[j], "seeds {i} and {j} collided");
            }
        }
    }

    #[test]
    fn snapped_boundaries_are_integral_on_unit_grid() {
        let config = SimConfig {
            seed: 9,
            num_videos: 10,
            ..unit_config()
        };
        for v in generate_ground_truth(&config, Execution::Sequential).unwrap() {
            for g in &v.ground_truth {
                assert_eq!(g.segment.start().fract(), 0.0);
                assert_eq!(g.segment.end().fract(), 0.0);
            }
        }
    }

    #[test]
    fn unsnapped_boundaries_move_off_grid() {
        let config = SimConfig {
            seed: 9,
            num_videos: 4,
            snap_to_grid: false,
            ..unit_config()
        };
        let off_grid = generate_ground_truth(&config, Execution::Sequential)
            .unwrap()
            .iter()
            .flat_map(|v| v.ground_truth.iter())
            .filter(|g| g.segment.start().fract() != 0.0)
            .count();
        assert!(off_grid > 0);
    }

    #[test]
    fn noiseless_limit_is_binary() {
        let config = SimConfig {
            seed: 1,
            num_videos: 3,
            separability: 1.0,
            noise_width: 0.0,
            ..SimConfig::default()
        };
        let corpus = simulate(&config, Execution::Sequential).unwrap();
        for (v, s) in corpus.videos.iter().zip(&corpus.streams) {
            let labels = label_clips(&v.meta, &v.ground_truth, config.video_len_clips);
            for (c, a) in s.clips.iter().zip(labels) {
                assert_eq!(c.score(), if a { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn scores_stay_in_unit_interval() {
        let config = SimConfig {
            seed: 2,
            num_videos: 4,
            separability: 0.9,
            noise_width: 2.0,
            ..SimConfig::default()
        };
        let corpus = simulate(&config, Execution::Sequential).unwrap();
        assert!(corpus.clips().all(|c| (0.0..=1.0).contains(&c.score())));
    }

    #[test]
    fn half_overlap_labels_action() {
        let meta = VideoMeta::new("v", 1.0, 2, 2).unwrap();
        let gt =
            |a, b| GroundTruthSegment::new("v", TemporalSegment::new(a, b).unwrap(), None).unwrap();
        // clips [0,2) [2,4) [4,6) [6,8)
        let labels = label_clips(&meta, &[gt(1.0, 3.0), gt(5.0, 5.9)], 4);
        assert_eq!(labels, vec![true, true, false, false]);
        // two overlapping gts: union counted once
        let labels = label_clips(&meta, &[gt(4.0, 5.5), gt(4.5, 5.0)], 4);
        assert_eq!(labels, vec![false, false, true, false]);
    }

    #[test]
    fn validation() {
        let bad = |f: fn(&mut SimConfig)| {
            let mut c = SimConfig::default();
            f(&mut c);
            c.validate()
        };
        assert_eq!(
            bad(|c| c.action_prevalence = 1.5),
            Err(SimError::Prevalence(1.5))
        );
        assert_eq!(
            bad(|c| c.action_prevalence = 0.0),
            Err(SimError::Prevalence(0.0))
        );
        assert!(bad(|c| c.separability = f64::INFINITY).is_err());
        assert!(bad(|c| c.separability = -0.1).is_err());
        assert!(bad(|c| c.noise_width = -1.0).is_err());
        assert!(bad(|c| c.mean_action_clips = 0.5).is_err());
        assert_eq!(bad(|c| c.num_videos = 0), Err(SimError::NoVideos));
        assert_eq!(bad(|c| c.video_len_clips = 0), Err(SimError::EmptyVideos));
        assert!(bad(|c| c.fps = 0.0).is_err());
        assert!(SimConfig::default().validate().is_ok());
    }
}
