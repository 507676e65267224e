//! Class-agnostic proposal evaluation: greedy tIoU matching, capped
//! AR-AN and precision-recall.
//!
//! Conventions:
//!
//! * Proposals are ranked per video by descending score, then earlier start,
//!   then earlier end, then ingestion order. Only the top
//!   `max_proposals_per_video` survive ranking; nothing downstream sees the rest.
//! * Ground truth within a video is ordered by start, then end.
//! * Matching walks proposals in rank order and pairs each one with the
//!   unmatched ground truth of highest tIoU, provided that tIoU reaches the
//!   threshold. Ties go to the earlier ground truth.
//! * Recall is pooled: matched ground truth over all ground truth in the
//!   corpus, not a per-video average.
//! * The evaluated video set is the union of videos that have proposals or
//!   ground truth.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use thiserror::Error;

use crate::exec::Execution;
use crate::timeline::{tiou, GroundTruthSegment, Proposal, TemporalSegment};

pub const DEFAULT_TIOU_THRESHOLD: f64 = 0.5;
pub const DEFAULT_MAX_PROPOSALS: usize = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("recall is undefined: the corpus has no ground truth")]
    UndefinedRecall,
    #[error("cutoff {n} must lie in 1..={max}")]
    InvalidCutoff { n: usize, max: usize },
    #[error("tIoU threshold must lie in (0, 1] (got {0})")]
    Threshold(f64),
    #[error("max proposals per video must be at least 1")]
    ZeroCap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    tiou_threshold: f64,
    max_proposals_per_video: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tiou_threshold: DEFAULT_TIOU_THRESHOLD,
            max_proposals_per_video: DEFAULT_MAX_PROPOSALS,
        }
    }
}

impl EvalConfig {
    pub fn new(tiou_threshold: f64, max_proposals_per_video: usize) -> Result<Self, MetricsError> {
        if !(tiou_threshold > 0.0 && tiou_threshold <= 1.0) {
            return Err(MetricsError::Threshold(tiou_threshold));
        }
        if max_proposals_per_video == 0 {
            return Err(MetricsError::ZeroCap);
        }
        Ok(Self {
            tiou_threshold,
            max_proposals_per_video,
        })
    }

    pub fn tiou_threshold(&self) -> f64 {
        self.tiou_threshold
    }

    pub fn max_proposals_per_video(&self) -> usize {
        self.max_proposals_per_video
    }
}

impl AsRef<TemporalSegment> for TemporalSegment {
    fn as_ref(&self) -> &TemporalSegment {
        self
    }
}

impl AsRef<TemporalSegment> for Proposal {
    fn as_ref(&self) -> &TemporalSegment {
        &self.segment
    }
}

impl AsRef<TemporalSegment> for GroundTruthSegment {
    fn as_ref(&self) -> &TemporalSegment {
        &self.segment
    }
}

/// Outcome of one-to-one matching within a single video.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    /// One flag per ranked proposal: true positive or not.
    pub proposal_tp: Vec<bool>,
    /// One flag per ground truth: matched or not.
    pub gt_matched: Vec<bool>,
}

impl Matching {
    pub fn true_positives(&self) -> usize {
        self.proposal_tp.iter().filter(|&&tp| tp).count()
    }
}

/// Greedy matching of rank-ordered proposals against ground truth.
///
/// Because each decision depends only on higher-ranked proposals, the
/// matching of the top `n` proposals is the prefix of the full matching.
pub fn match_greedy<P, G>(ranked: &[P], gts: &[G], tiou_threshold: f64) -> Matching
where
    P: AsRef<TemporalSegment>,
    G: AsRef<TemporalSegment>,
{
    let mut gt_matched = vec![false; gts.len()];
    let proposal_tp = ranked
        .iter()
        .map(|p| {
            let p = p.as_ref();
            let mut best: Option<(usize, f64)> = None;
            for (j, g) in gts.iter().enumerate() {
                if gt_matched[j] {
                    continue;
                }
                let overlap = tiou(p, g.as_ref());
                if overlap >= tiou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((j, overlap));
                }
            }
            match best {
                Some((j, _)) => {
                    gt_matched[j] = true;
                    true
                }
                None => false,
            }
        })
        .collect();
    Matching {
        proposal_tp,
        gt_matched,
    }
}

/// Total order used to rank proposals inside one video.
pub fn rank_order(a: &Proposal, b: &Proposal) -> Ordering {
    b.score()
        .total_cmp(&a.score())
        .then(a.segment.start().total_cmp(&b.segment.start()))
        .then(a.segment.end().total_cmp(&b.segment.end()))
}

/// Proposals and ground truth for one video, ranked and capped.
#[derive(Debug, Clone)]
pub struct VideoEval {
    pub video_id: String,
    pub proposals: Vec<Proposal>,
    pub ground_truth: Vec<GroundTruthSegment>,
}

/// Evaluation input grouped by video (sorted by video id).
#[derive(Debug, Clone)]
pub struct EvalCorpus {
    config: EvalConfig,
    videos: Vec<VideoEval>,
    num_ground_truth: usize,
}

impl EvalCorpus {
    pub fn new(
        proposals: impl IntoIterator<Item = Proposal>,
        ground_truth: impl IntoIterator<Item = GroundTruthSegment>,
        config: EvalConfig,
    ) -> Self {
        let mut by_video: BTreeMap<String, VideoEval> = BTreeMap::new();
        for p in proposals {
            video_entry(&mut by_video, &p.video_id).proposals.push(p);
        }
        let mut num_ground_truth = 0;
        for g in ground_truth {
            num_ground_truth += 1;
            video_entry(&mut by_video, &g.video_id).ground_truth.push(g);
        }
        let videos = by_video
            .into_values()
            .map(|mut v| {
                // stable: equal keys keep ingestion order
                v.proposals.sort_by(rank_order);
                v.proposals.truncate(config.max_proposals_per_video);
                v.ground_truth.sort_by(|a, b| {
                    a.segment
                        .start()
                        .total_cmp(&b.segment.start())
                        .then(a.segment.end().total_cmp(&b.segment.end()))
                });
                v
            })
            .collect();
        Self {
            config,
            videos,
            num_ground_truth,
        }
    }

    pub fn config(&self) -> &EvalConfig {
        &self.config
    }

    pub fn videos(&self) -> &[VideoEval] {
        &self.videos
    }

    pub fn num_ground_truth(&self) -> usize {
        self.num_ground_truth
    }

    /// Proposals retained after capping, summed over videos.
    pub fn num_proposals(&self) -> usize {
        self.videos.iter().map(|v| v.proposals.len()).sum()
    }

    /// Greedy matching of every video's capped proposal list.
    pub fn match_videos(&self, exec: Execution) -> Vec<Matching> {
        let thr = self.config.tiou_threshold;
        exec.map(&self.videos, |v| {
            match_greedy(&v.proposals, &v.ground_truth, thr)
        })
    }

    /// Average number of proposals and pooled recall when keeping the top `n`
    /// proposals of each video.
    pub fn recall_at_n(&self, n: usize) -> Result<ArAnPoint, MetricsError> {
        self.check_cutoff(n)?;
        let matchings = self.match_videos(Execution::Sequential);
        self.ar_an_point(&matchings, n)
    }

    pub fn ar_an_curve(&self) -> Result<Vec<ArAnPoint>, MetricsError> {
        let matchings = self.match_videos(Execution::Sequential);
        (1..=self.config.max_proposals_per_video)
            .map(|n| self.ar_an_point(&matchings, n))
            .collect()
    }

    pub fn pr_curve(&self) -> Result<Vec<PrPoint>, MetricsError> {
        let matchings = self.match_videos(Execution::Sequential);
        self.pr_points(&matchings)
    }

    /// Computes both curves and the summary scalars from a single matching pass.
    pub fn evaluate(&self, exec: Execution) -> Result<EvalReport, MetricsError> {
        if self.num_ground_truth == 0 {
            return Err(MetricsError::UndefinedRecall);
        }
        let matchings = self.match_videos(exec);
        let ar_an_points = (1..=self.config.max_proposals_per_video)
            .map(|n| self.ar_an_point(&matchings, n))
            .collect::<Result<Vec<_>, _>>()?;
        let pr_points = self.pr_points(&matchings)?;
        let recall_at_max = ar_an_points.last().map_or(0.0, |p| p.recall);
        let auc_ar_an = normalized_auc(&ar_an_points);
        Ok(EvalReport {
            config: self.config,
            num_videos: self.videos.len(),
            num_ground_truth: self.num_ground_truth,
            num_proposals: self.num_proposals(),
            ar_an_points,
            pr_points,
            recall_at_max,
            auc_ar_an,
        })
    }

    fn check_cutoff(&self, n: usize) -> Result<(), MetricsError> {
        let max = self.config.max_proposals_per_video;
        if n == 0 || n > max {
            return Err(MetricsError::InvalidCutoff { n, max });
        }
        Ok(())
    }

    fn ar_an_point(&self, matchings: &[Matching], n: usize) -> Result<ArAnPoint, MetricsError> {
        if self.num_ground_truth == 0 {
            return Err(MetricsError::UndefinedRecall);
        }
        let mut kept = 0usize;
        let mut matched = 0usize;
        for m in matchings {
            let k = n.min(m.proposal_tp.len());
            kept += k;
            matched += m.proposal_tp[..k].iter().filter(|&&tp| tp).count();
        }
        Ok(ArAnPoint {
            avg_num_proposals: kept as f64 / self.videos.len() as f64,
            recall: matched as f64 / self.num_ground_truth as f64,
        })
    }

    fn pr_points(&self, matchings: &[Matching]) -> Result<Vec<PrPoint>, MetricsError> {
        if self.num_ground_truth == 0 {
            return Err(MetricsError::UndefinedRecall);
        }
        // videos are sorted by id, so the video index breaks ties lexicographically
        let mut pooled: Vec<(usize, usize)> = self
            .videos
            .iter()
            .enumerate()
            .flat_map(|(vi, v)| (0..v.proposals.len()).map(move |r| (vi, r)))
            .collect();
        pooled.sort_by(|&(va, ra), &(vb, rb)| {
            let pa = &self.videos[va].proposals[ra];
            let pb = &self.videos[vb].proposals[rb];
            pb.score()
                .total_cmp(&pa.score())
                .then(pa.segment.start().total_cmp(&pb.segment.start()))
                .then(va.cmp(&vb))
                .then(ra.cmp(&rb))
        });
        let total = self.num_ground_truth as f64;
        let mut tp = 0usize;
        Ok(pooled
            .iter()
            .enumerate()
            .map(|(i, &(v, r))| {
                if matchings[v].proposal_tp[r] {
                    tp += 1;
                }
                PrPoint {
                    recall: tp as f64 / total,
                    precision: tp as f64 / (i + 1) as f64,
                }
            })
            .collect())
    }
}

fn video_entry<'a>(map: &'a mut BTreeMap<String, VideoEval>, id: &str) -> &'a mut VideoEval {
    if !map.contains_key(id) {
        map.insert(
            id.to_owned(),
            VideoEval {
                video_id: id.to_owned(),
                proposals: Vec::new(),
                ground_truth: Vec::new(),
            },
        );
    }
    map.get_mut(id).expect("inserted above")
}

/// Trapezoidal area under recall(AN), divided by the AN extent.
///
/// A curve with zero AN extent (every point at the same AN) has no area; its
/// normalized value is taken to be its final recall.
pub fn normalized_auc(points: &[ArAnPoint]) -> f64 {
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return 0.0;
    };
    let extent = last.avg_num_proposals - first.avg_num_proposals;
    if extent <= 0.0 {
        return last.recall;
    }
    let area: f64 = points
        .windows(2)
        .map(|w| {
            (w[1].avg_num_proposals - w[0].avg_num_proposals) * (w[0].recall + w[1].recall) / 2.0
        })
        .sum();
    (area / extent).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArAnPoint {
    pub avg_num_proposals: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub num_videos: usize,
    pub num_ground_truth: usize,
    pub num_proposals: usize,
    pub ar_an_points: Vec<ArAnPoint>,
    pub pr_points: Vec<PrPoint>,
    pub recall_at_max: f64,
    pub auc_ar_an: f64,
}

pub const AR_AN_HEADER: &str = "avg_num_proposals,recall";
pub const PR_HEADER: &str = "recall,precision";

impl EvalReport {
    pub fn write_ar_an_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{AR_AN_HEADER}")?;
        for p in &self.ar_an_points {
            writeln!(w, "{:.6},{:.6}", p.avg_num_proposals, p.recall)?;
        }
        w.flush()
    }

    pub fn write_pr_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{PR_HEADER}")?;
        for p in &self.pr_points {
            writeln!(w, "{:.6},{:.6}", p.recall, p.precision)?;
        }
        w.flush()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# class-agnostic proposal evaluation");
        let _ = writeln!(
            s,
            "# recall is pooled: matched ground truth / total ground truth over the corpus"
        );
        let _ = writeln!(s, "tiou_threshold = {:.6}", self.config.tiou_threshold);
        let _ = writeln!(
            s,
            "max_proposals_per_video = {}",
            self.config.max_proposals_per_video
        );
        let _ = writeln!(s, "videos = {}", self.num_videos);
        let _ = writeln!(s, "ground_truth = {}", self.num_ground_truth);
        let _ = writeln!(s, "proposals_considered = {}", self.num_proposals);
        let _ = writeln!(s, "recall_at_max = {:.6}", self.recall_at_max);
        let _ = writeln!(s, "auc_ar_an = {:.6}", self.auc_ar_an);
        s
    }
}
