//! Temporal value types shared by the proposer, the evaluator and the parsers.
//!
//! All times are seconds as `f64`. Frame indices are converted to seconds
//! once, through [`VideoMeta`], and never carried around afterwards.

use std::fmt;

use thiserror::Error;

/// Canonical clip geometry for 3D-conv clip classifiers.
pub const DEFAULT_CLIP_LEN: u32 = 16;
pub const DEFAULT_STRIDE: u32 = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimelineError {
    #[error("segment end {end} must be greater than start {start}")]
    EmptySegment { start: f64, end: f64 },
    #[error("segment bounds must be finite and non-negative (got [{start}, {end}])")]
    BadBounds { start: f64, end: f64 },
    #[error("score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("video id must not be empty")]
    EmptyVideoId,
    #[error("fps must be a positive finite number (got {0})")]
    BadFps(f64),
    #[error("clip length must be at least one frame")]
    ZeroClipLen,
    #[error("stride must be at least one frame")]
    ZeroStride,
    #[error("first clip {first} is after last clip {last}")]
    ReversedClipSpan { first: u64, last: u64 },
    #[error("proposal emitted at clip {emitted} before its last clip {last}")]
    EmittedBeforeEnd { emitted: u64, last: u64 },
}

/// A half-open interval `[start, end)` in seconds with `end > start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalSegment {
    start: f64,
    end: f64,
}

impl TemporalSegment {
    pub fn new(start: f64, end: f64) -> Result<Self, TimelineError> {
        if !start.is_finite() || !end.is_finite() || start < 0.0 {
            return Err(TimelineError::BadBounds { start, end });
        }
        if end <= start {
            return Err(TimelineError::EmptySegment { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Duration of the overlap with `other`, zero when they are disjoint or touch.
    pub fn intersection(&self, other: &TemporalSegment) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }
}

impl fmt::Display for TemporalSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Temporal intersection-over-union of two segments.
///
/// Touching segments (`a.end == b.start`) score 0; identical segments score
/// exactly 1.
pub fn tiou(a: &TemporalSegment, b: &TemporalSegment) -> f64 {
    let inter = a.intersection(b);
    if inter <= 0.0 {
        return 0.0;
    }
    // Overlapping intervals: the union is the hull.
    let union = a.end.max(b.end) - a.start.min(b.start);
    inter / union
}

/// Per-video timing: how clip indices map onto seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoMeta {
    video_id: String,
    fps: f64,
    clip_len: u32,
    stride: u32,
}

impl VideoMeta {
    pub fn new(
        video_id: impl Into<String>,
        fps: f64,
        clip_len: u32,
        stride: u32,
    ) -> Result<Self, TimelineError> {
        let video_id = video_id.into();
        if video_id.is_empty() {
            return Err(TimelineError::EmptyVideoId);
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(TimelineError::BadFps(fps));
        }
        if clip_len == 0 {
            return Err(TimelineError::ZeroClipLen);
        }
        if stride == 0 {
            return Err(TimelineError::ZeroStride);
        }
        Ok(Self {
            video_id,
            fps,
            clip_len,
            stride,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn clip_len(&self) -> u32 {
        self.clip_len
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    /// Same geometry, different video.
    pub fn with_video_id(&self, video_id: impl Into<String>) -> Result<Self, TimelineError> {
        Self::new(video_id, self.fps, self.clip_len, self.stride)
    }

    /// Start time of clip `index` in seconds.
    pub fn clip_start(&self, index: u64) -> f64 {
        (index as f64 * self.stride as f64) / self.fps
    }

    /// End time of clip `index` in seconds.
    pub fn clip_end(&self, index: u64) -> f64 {
        (index as f64 * self.stride as f64 + self.clip_len as f64) / self.fps
    }
}

/// The segment covered by clips `first..=last`.
pub fn clip_to_segment(
    meta: &VideoMeta,
    first_clip: u64,
    last_clip: u64,
) -> Result<TemporalSegment, TimelineError> {
    if first_clip > last_clip {
        return Err(TimelineError::ReversedClipSpan {
            first: first_clip,
            last: last_clip,
        });
    }
    TemporalSegment::new(meta.clip_start(first_clip), meta.clip_end(last_clip))
}

/// One classifier output for one clip of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipScore {
    pub video_id: String,
    pub clip_index: u64,
    pub segment: TemporalSegment,
    score: f64,
}

impl ClipScore {
    pub fn new(
        video_id: impl Into<String>,
        clip_index: u64,
        t_start: f64,
        t_end: f64,
        score: f64,
    ) -> Result<Self, TimelineError> {
        let video_id = video_id.into();
        if video_id.is_empty() {
            return Err(TimelineError::EmptyVideoId);
        }
        Ok(Self {
            video_id,
            clip_index,
            segment: TemporalSegment::new(t_start, t_end)?,
            score: check_score(score)?,
        })
    }

    /// Builds the clip with times derived from the video's geometry.
    pub fn on_grid(meta: &VideoMeta, clip_index: u64, score: f64) -> Result<Self, TimelineError> {
        Self::new(
            meta.video_id(),
            clip_index,
            meta.clip_start(clip_index),
            meta.clip_end(clip_index),
            score,
        )
    }

    pub fn score(&self) -> f64 {
        self.score
    }
}

pub(crate) fn check_score(score: f64) -> Result<f64, TimelineError> {
    if (0.0..=1.0).contains(&score) {
        Ok(score)
    } else {
        Err(TimelineError::ScoreOutOfRange(score))
    }
}

/// Inclusive range of clip indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClipSpan {
    pub first: u64,
    pub last: u64,
}

impl ClipSpan {
    pub fn new(first: u64, last: u64) -> Result<Self, TimelineError> {
        if first > last {
            return Err(TimelineError::ReversedClipSpan { first, last });
        }
        Ok(Self { first, last })
    }

    pub fn clip_count(&self) -> u64 {
        self.last - self.first + 1
    }
}

/// A scored temporal segment emitted by the proposer.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub video_id: String,
    pub segment: TemporalSegment,
    score: f64,
    pub clip_span: ClipSpan,
    /// Index of the clip whose arrival (or the end of stream) closed the run.
    pub emitted_at_clip: u64,
}

impl Proposal {
    pub fn new(
        video_id: impl Into<String>,
        segment: TemporalSegment,
        score: f64,
        clip_span: ClipSpan,
        emitted_at_clip: u64,
    ) -> Result<Self, TimelineError> {
        let video_id = video_id.into();
        if video_id.is_empty() {
            return Err(TimelineError::EmptyVideoId);
        }
        if emitted_at_clip < clip_span.last {
            return Err(TimelineError::EmittedBeforeEnd {
                emitted: emitted_at_clip,
                last: clip_span.last,
            });
        }
        Ok(Self {
            video_id,
            segment,
            score: check_score(score)?,
            clip_span,
            emitted_at_clip,
        })
    }

    pub fn score(&self) -> f64 {
        self.score
    }
}

/// An annotated action instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSegment {
    pub video_id: String,
    pub segment: TemporalSegment,
    pub label: Option<String>,
}

impl GroundTruthSegment {
    pub fn new(
        video_id: impl Into<String>,
        segment: TemporalSegment,
        label: Option<String>,
    ) -> Result<Self, TimelineError> {
        let video_id = video_id.into();
        if video_id.is_empty() {
            return Err(TimelineError::EmptyVideoId);
        }
        Ok(Self {
            video_id,
            segment,
            label,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(a: f64, b: f64) -> TemporalSegment {
        TemporalSegment::new(a, b).unwrap()
    }

    #[test]
    fn tiou_examples() {
        assert_eq!(tiou(&seg(3.0, 9.0), &seg(3.0, 9.0)), 1.0);
        assert_eq!(tiou(&seg(0.0, 1.0), &seg(5.0, 6.0)), 0.0);
        // intersection [5,10] = 5, union [0,15] = 15
        assert!((tiou(&seg(0.0, 10.0), &seg(5.0, 15.0)) - 5.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn touching_segments_do_not_overlap() {
        assert_eq!(tiou(&seg(0.0, 2.0), &seg(2.0, 4.0)), 0.0);
    }

    #[test]
    fn degenerate_segments_rejected() {
        assert!(matches!(
            TemporalSegment::new(1.0, 1.0),
            Err(TimelineError::EmptySegment { .. })
        ));
        assert!(TemporalSegment::new(2.0, 1.0).is_err());
        assert!(TemporalSegment::new(-1.0, 1.0).is_err());
        assert!(TemporalSegment::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn clip_to_segment_examples() {
        let meta = VideoMeta::new("v", 30.0, 16, 16).unwrap();
        let s = clip_to_segment(&meta, 0, 0).unwrap();
        assert_eq!((s.start(), s.end()), (0.0, 16.0 / 30.0));
        let s = clip_to_segment(&meta, 2, 4).unwrap();
        assert_eq!((s.start(), s.end()), (32.0 / 30.0, 80.0 / 30.0));
        assert!((s.start() - 1.066_666_666_666_666_7).abs() < 1e-15);
        assert!((s.end() - 2.666_666_666_666_666_5).abs() < 1e-15);

        let unit = VideoMeta::new("v", 1.0, 1, 1).unwrap();
        let s = clip_to_segment(&unit, 0, 9).unwrap();
        assert_eq!((s.start(), s.end()), (0.0, 10.0));

        assert!(matches!(
            clip_to_segment(&meta, 3, 2),
            Err(TimelineError::ReversedClipSpan { first: 3, last: 2 })
        ));
    }

    #[test]
    fn video_meta_validation() {
        assert_eq!(
            VideoMeta::new("", 30.0, 16, 16),
            Err(TimelineError::EmptyVideoId)
        );
        assert_eq!(
            VideoMeta::new("v", 0.0, 16, 16),
            Err(TimelineError::BadFps(0.0))
        );
        assert_eq!(
            VideoMeta::new("v", 30.0, 0, 16),
            Err(TimelineError::ZeroClipLen)
        );
        assert_eq!(
            VideoMeta::new("v", 30.0, 16, 0),
            Err(TimelineError::ZeroStride)
        );
    }

    #[test]
    fn clip_score_validation() {
        assert!(ClipScore::new("v", 0, 0.0, 0.5, 1.5).is_err());
        assert!(ClipScore::new("v", 0, 0.0, 0.5, -0.1).is_err());
        assert!(ClipScore::new("v", 0, 0.5, 0.5, 0.3).is_err());
        let meta = VideoMeta::new("v", 30.0, 16, 16).unwrap();
        let c = ClipScore::on_grid(&meta, 3, 0.25).unwrap();
        assert_eq!(c.segment.start(), 48.0 / 30.0);
        assert_eq!(c.segment.end(), 64.0 / 30.0);
    }

    fn any_segment() -> impl Strategy<Value = TemporalSegment> {
        (0.0f64..100.0, 0.001f64..50.0).prop_map(|(s, d)| seg(s, s + d))
    }

    proptest! {
        #[test]
        fn tiou_is_symmetric_and_bounded(a in any_segment(), b in any_segment()) {
            let ab = tiou(&a, &b);
            prop_assert_eq!(ab, tiou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab == 0.0, a.intersection(&b) == 0.0);
        }

        #[test]
        fn tiou_self_is_one(a in any_segment()) {
            prop_assert_eq!(tiou(&a, &a), 1.0);
        }

        #[test]
        fn tiou_decreases_under_translation(a in any_segment()) {
            // b has a's length and slides right until it only touches a
            let steps = 64;
            let len = a.duration();
            let mut prev = f64::INFINITY;
            for k in 0..=steps {
                let shift = len * k as f64 / steps as f64;
                let b = seg(a.start() + shift, a.start() + shift + len);
                let v = tiou(&a, &b);
                prop_assert!(v < prev || (v == 0.0 && prev == 0.0), "shift {} gave {} after {}", shift, v, prev);
                prev = v;
            }
            prop_assert_eq!(prev, 0.0);
        }

        #[test]
        fn clip_to_segment_monotone(first in 0u64..1000, extra in 0u64..1000, fps in 1.0f64..120.0, cl in 1u32..64, st in 1u32..64) {
            let meta = VideoMeta::new("v", fps, cl, st).unwrap();
            let a = clip_to_segment(&meta, first, first + extra).unwrap();
            let b = clip_to_segment(&meta, first, first + extra + 1).unwrap();
            prop_assert!(b.end() >= a.end());
        }
    }
}
