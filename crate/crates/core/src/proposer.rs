//! On-line proposal construction from a per-clip score stream.
//!
//! Each clip is judged action when its score reaches the threshold.
//! Consecutive action clips form a run; a run may bridge up to
//! `gap_tolerance` background clips. A run closes on the
//! `gap_tolerance + 1`-th consecutive background clip, and the proposal is
//! returned from that very call. Its extent spans the first through the last
//! *action* clip and its score is the mean of the action clip scores only.
//!
//! The state is a fixed-size accumulator: memory does not grow with the
//! length of the stream.

use thiserror::Error;

use crate::exec::Execution;
use crate::timeline::{clip_to_segment, ClipScore, ClipSpan, Proposal, VideoMeta};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("threshold must lie strictly between 0 and 1 (got {0})")]
    Threshold(f64),
    #[error("min_clips must be at least 1")]
    MinClips,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("video {video_id}: expected clip index {expected}, got {got}")]
    OutOfOrder {
        video_id: String,
        expected: u64,
        got: u64,
    },
    #[error("clip belongs to video {got}, but this stream is video {expected}")]
    VideoMismatch { expected: String, got: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposerConfig {
    threshold: f64,
    gap_tolerance: u64,
    min_clips: u64,
}

impl Default for ProposerConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            gap_tolerance: 0,
            min_clips: 1,
        }
    }
}

impl ProposerConfig {
    pub fn new(threshold: f64, gap_tolerance: u64, min_clips: u64) -> Result<Self, ConfigError> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(ConfigError::Threshold(threshold));
        }
        if min_clips == 0 {
            return Err(ConfigError::MinClips);
        }
        Ok(Self {
            threshold,
            gap_tolerance,
            min_clips,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn gap_tolerance(&self) -> u64 {
        self.gap_tolerance
    }

    pub fn min_clips(&self) -> u64 {
        self.min_clips
    }

    pub fn is_action(&self, score: f64) -> bool {
        score >= self.threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    InRun,
    InGap,
}

/// Accumulator for the currently open run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposerState {
    pub phase: Phase,
    pub run_first_clip: u64,
    pub run_last_action_clip: u64,
    pub score_sum: f64,
    pub member_count: u64,
    pub pending_gap: u64,
}

impl ProposerState {
    const IDLE: ProposerState = ProposerState {
        phase: Phase::Idle,
        run_first_clip: 0,
        run_last_action_clip: 0,
        score_sum: 0.0,
        member_count: 0,
        pending_gap: 0,
    };
}

impl Default for ProposerState {
    fn default() -> Self {
        Self::IDLE
    }
}

/// Drives one video's score stream.
#[derive(Debug, Clone)]
pub struct Proposer {
    config: ProposerConfig,
    meta: VideoMeta,
    state: ProposerState,
    next_clip: u64,
}

impl Proposer {
    pub fn new(config: ProposerConfig, meta: VideoMeta) -> Self {
        Self {
            config,
            meta,
            state: ProposerState::IDLE,
            next_clip: 0,
        }
    }

    pub fn state(&self) -> &ProposerState {
        &self.state
    }

    pub fn meta(&self) -> &VideoMeta {
        &self.meta
    }

    pub fn config(&self) -> &ProposerConfig {
        &self.config
    }

    /// Index the next clip must carry.
    pub fn next_clip(&self) -> u64 {
        self.next_clip
    }

    /// Feeds one clip. Returns the proposal closed by this clip, if any.
    pub fn process_clip(&mut self, clip: &ClipScore) -> Result<Option<Proposal>, StreamError> {
        if clip.video_id != self.meta.video_id() {
            return Err(StreamError::VideoMismatch {
                expected: self.meta.video_id().to_owned(),
                got: clip.video_id.clone(),
            });
        }
        if clip.clip_index != self.next_clip {
            return Err(StreamError::OutOfOrder {
                video_id: clip.video_id.clone(),
                expected: self.next_clip,
                got: clip.clip_index,
            });
        }
        self.next_clip += 1;

        let index = clip.clip_index;
        let score = clip.score();
        let st = &mut self.state;

        if self.config.is_action(score) {
            if st.phase == Phase::Idle {
                st.run_first_clip = index;
            }
            st.phase = Phase::InRun;
            st.run_last_action_clip = index;
            st.score_sum += score;
            st.member_count += 1;
            st.pending_gap = 0;
            return Ok(None);
        }

        match st.phase {
            Phase::Idle => Ok(None),
            Phase::InRun | Phase::InGap => {
                st.pending_gap += 1;
                if st.pending_gap > self.config.gap_tolerance {
                    Ok(self.close(index))
                } else {
                    st.phase = Phase::InGap;
                    Ok(None)
                }
            }
        }
    }

    /// Closes any open run at end of stream and returns its proposal.
    ///
    /// Calling it again, or on an idle stream, returns `None`.
    pub fn flush(&mut self) -> Option<Proposal> {
        match self.state.phase {
            Phase::Idle => None,
            // next_clip >= 1 whenever a run is open
            _ => self.close(self.next_clip - 1),
        }
    }

    fn close(&mut self, emitted_at: u64) -> Option<Proposal> {
        let st = std::mem::take(&mut self.state);
        if st.member_count < self.config.min_clips {
            return None;
        }
        let segment = clip_to_segment(&self.meta, st.run_first_clip, st.run_last_action_clip)
            .expect("run span is ordered");
        let span = ClipSpan {
            first: st.run_first_clip,
            last: st.run_last_action_clip,
        };
        let score = (st.score_sum / st.member_count as f64).clamp(0.0, 1.0);
        Some(
            Proposal::new(self.meta.video_id(), segment, score, span, emitted_at)
                .expect("proposal fields validated by construction"),
        )
    }
}

/// Runs a whole stream through a fresh [`Proposer`] and flushes it.
pub fn propose_stream<'a, I>(
    clips: I,
    config: ProposerConfig,
    meta: &VideoMeta,
) -> Result<Vec<Proposal>, StreamError>
where
    I: IntoIterator<Item = &'a ClipScore>,
{
    let mut proposer = Proposer::new(config, meta.clone());
    let mut out = Vec::new();
    for clip in clips {
        out.extend(proposer.process_clip(clip)?);
    }
    out.extend(proposer.flush());
    Ok(out)
}

/// One video's metadata together with its ordered clip stream.
#[derive(Debug, Clone)]
pub struct VideoStream {
    pub meta: VideoMeta,
    pub clips: Vec<ClipScore>,
}

/// Proposes every video independently; output order follows `videos`.
pub fn propose_corpus(
    videos: &[VideoStream],
    config: ProposerConfig,
    exec: Execution,
) -> Result<Vec<Vec<Proposal>>, StreamError> {
    exec.try_map(videos, |v| propose_stream(&v.clips, config, &v.meta))
}
