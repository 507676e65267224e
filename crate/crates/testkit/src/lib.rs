//! Slow, obviously-correct reference implementations for tests.
//!
//! Nothing here calls into the proposer or the metrics code; only the plain
//! value types are shared.

use std::collections::BTreeSet;

use eap_core::timeline::{ClipSpan, GroundTruthSegment, Proposal, TemporalSegment, VideoMeta};
use rand::Rng;

/// Offline grouping of a complete score array.
///
/// Thresholds everything up front, finds maximal action runs, merges runs
/// separated by at most `gap_tolerance` background clips, drops groups with
/// fewer than `min_clips` action clips and averages the action scores.
pub fn offline_group(
    scores: &[f64],
    threshold: f64,
    gap_tolerance: u64,
    min_clips: u64,
    meta: &VideoMeta,
) -> Vec<Proposal> {
    let n = scores.len();
    let action: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();

    // maximal runs of action clips, inclusive
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        if action[i] {
            let start = i;
            while i + 1 < n && action[i + 1] {
                i += 1;
            }
            runs.push((start, i));
        }
        i += 1;
    }

    // merge across short gaps
    let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
    for run in runs {
        if let Some(last) = groups.last_mut() {
            let prev_end = last.last().unwrap().1;
            let gap = (run.0 - prev_end - 1) as u64;
            if gap <= gap_tolerance {
                last.push(run);
                continue;
            }
        }
        groups.push(vec![run]);
    }

    let stride = meta.stride() as f64;
    let clip_len = meta.clip_len() as f64;
    let fps = meta.fps();
    groups
        .into_iter()
        .filter_map(|g| {
            let members: Vec<usize> = g.iter().flat_map(|&(a, b)| a..=b).collect();
            if (members.len() as u64) < min_clips {
                return None;
            }
            let mut sum = 0.0;
            for &m in &members {
                sum += scores[m];
            }
            let score = sum / members.len() as f64;
            let first = g[0].0 as u64;
            let last = g.last().unwrap().1 as u64;
            let seg = TemporalSegment::new(
                (first as f64 * stride) / fps,
                (last as f64 * stride + clip_len) / fps,
            )
            .unwrap();
            let closing = last + gap_tolerance + 1;
            let emitted = if closing < n as u64 {
                closing
            } else {
                n as u64 - 1
            };
            Some(
                Proposal::new(
                    meta.video_id(),
                    seg,
                    score,
                    ClipSpan { first, last },
                    emitted,
                )
                .unwrap(),
            )
        })
        .collect()
}

/// tIoU as |a∩b| / (|a| + |b| - |a∩b|).
pub fn ref_tiou(a: &TemporalSegment, b: &TemporalSegment) -> f64 {
    let inter = (a.end().min(b.end()) - a.start().max(b.start())).max(0.0);
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.duration() + b.duration() - inter)
}

/// Greedy matching recomputed from scratch; returns the number of matches.
///
/// Tie on tIoU goes to the ground truth with the smaller (start, end).
pub fn ref_greedy_count(ranked: &[&Proposal], gts: &[&GroundTruthSegment], thr: f64) -> usize {
    let mut used = vec![false; gts.len()];
    let mut tp = 0;
    for p in ranked {
        let mut best: Option<usize> = None;
        for j in 0..gts.len() {
            if used[j] {
                continue;
            }
            let o = ref_tiou(&p.segment, &gts[j].segment);
            if o < thr {
                continue;
            }
            best = match best {
                None => Some(j),
                Some(b) => {
                    let ob = ref_tiou(&p.segment, &gts[b].segment);
                    let key = |g: &GroundTruthSegment| (g.segment.start(), g.segment.end());
                    if o > ob || (o == ob && key(gts[j]) < key(gts[b])) {
                        Some(j)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        if let Some(j) = best {
            used[j] = true;
            tp += 1;
        }
    }
    tp
}

/// Size of a maximum one-to-one matching (pairs with tIoU >= thr), by
/// exhaustive search.
pub fn max_matching(props: &[TemporalSegment], gts: &[TemporalSegment], thr: f64) -> usize {
    fn go(
        i: usize,
        props: &[TemporalSegment],
        gts: &[TemporalSegment],
        used: &mut Vec<bool>,
        thr: f64,
    ) -> usize {
        if i == props.len() {
            return 0;
        }
        let mut best = go(i + 1, props, gts, used, thr);
        for j in 0..gts.len() {
            if !used[j] && ref_tiou(&props[i], &gts[j]) >= thr {
                used[j] = true;
                best = best.max(1 + go(i + 1, props, gts, used, thr));
                used[j] = false;
            }
        }
        best
    }
    go(0, props, gts, &mut vec![false; gts.len()], thr)
}

/// Selection sort by an explicit "comes before" predicate.
fn selection_order<T>(items: &[T], before: impl Fn(&T, usize, &T, usize) -> bool) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..items.len()).collect();
    let mut out = Vec::with_capacity(items.len());
    while !remaining.is_empty() {
        let mut best = 0;
        for k in 1..remaining.len() {
            let (a, b) = (remaining[k], remaining[best]);
            if before(&items[a], a, &items[b], b) {
                best = k;
            }
        }
        out.push(remaining.remove(best));
    }
    out
}

fn ranks_before(a: &Proposal, ia: usize, b: &Proposal, ib: usize) -> bool {
    if a.score() != b.score() {
        return a.score() > b.score();
    }
    if a.segment.start() != b.segment.start() {
        return a.segment.start() < b.segment.start();
    }
    if a.segment.end() != b.segment.end() {
        return a.segment.end() < b.segment.end();
    }
    ia < ib
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefReport {
    /// (average number of proposals, recall) for n = 1..=cap
    pub ar_an: Vec<(f64, f64)>,
    /// (recall, precision) per pooled rank
    pub pr: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Brute-force AR-AN and PR. `None` when there is no ground truth.
pub fn brute_force_eval(
    proposals: &[Proposal],
    gts: &[GroundTruthSegment],
    thr: f64,
    cap: usize,
) -> Option<RefReport> {
    if gts.is_empty() {
        return None;
    }
    let videos: Vec<String> = proposals
        .iter()
        .map(|p| p.video_id.clone())
        .chain(gts.iter().map(|g| g.video_id.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    // per video: ranked, capped proposals and its ground truth
    let per_video: Vec<(Vec<&Proposal>, Vec<&GroundTruthSegment>)> = videos
        .iter()
        .map(|v| {
            let mine: Vec<Proposal> = proposals
                .iter()
                .filter(|p| &p.video_id == v)
                .cloned()
                .collect();
            let order = selection_order(&mine, ranks_before);
            let ranked: Vec<&Proposal> = order
                .into_iter()
                .take(cap)
                .map(|i| {
                    proposals
                        .iter()
                        .filter(|p| &p.video_id == v)
                        .nth(i)
                        .unwrap()
                })
                .collect();
            let g: Vec<&GroundTruthSegment> = gts.iter().filter(|g| &g.video_id == v).collect();
            (ranked, g)
        })
        .collect();

    let total_gt = gts.len() as f64;
    let mut ar_an = Vec::with_capacity(cap);
    for n in 1..=cap {
        let mut kept = 0usize;
        let mut matched = 0usize;
        for (ranked, g) in &per_video {
            let top = &ranked[..n.min(ranked.len())];
            kept += top.len();
            matched += ref_greedy_count(top, g, thr);
        }
        ar_an.push((kept as f64 / videos.len() as f64, matched as f64 / total_gt));
    }

    // pooled ranking: score desc, start asc, video id asc, per-video rank asc
    let pooled: Vec<(usize, usize, &Proposal)> = per_video
        .iter()
        .enumerate()
        .flat_map(|(vi, (ranked, _))| ranked.iter().enumerate().map(move |(r, p)| (vi, r, *p)))
        .collect();
    let order = selection_order(&pooled, |a, _, b, _| {
        if a.2.score() != b.2.score() {
            return a.2.score() > b.2.score();
        }
        if a.2.segment.start() != b.2.segment.start() {
            return a.2.segment.start() < b.2.segment.start();
        }
        if a.0 != b.0 {
            return videos[a.0] < videos[b.0];
        }
        a.1 < b.1
    });
    let mut pr = Vec::with_capacity(order.len());
    for k in 1..=order.len() {
        let prefix: Vec<(usize, usize, &Proposal)> =
            order[..k].iter().map(|&i| pooled[i]).collect();
        let mut tp = 0;
        for (vi, (_, g)) in per_video.iter().enumerate() {
            let mine: Vec<&Proposal> = prefix.iter().filter(|e| e.0 == vi).map(|e| e.2).collect();
            tp += ref_greedy_count(&mine, g, thr);
        }
        pr.push((tp as f64 / total_gt, tp as f64 / k as f64));
    }

    let auc = {
        let (x0, _) = ar_an[0];
        let (x1, y1) = *ar_an.last().unwrap();
        if x1 - x0 <= 0.0 {
            y1
        } else {
            let mut area = 0.0;
            for w in ar_an.windows(2) {
                area += (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0;
            }
            area / (x1 - x0)
        }
    };
    Some(RefReport { ar_an, pr, auc })
}

/// A random score stream; about a fifth of the scores sit exactly on common
/// thresholds to exercise the inclusive comparison.
pub fn random_scores<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| match rng.random_range(0..10) {
            0 => 0.5,
            1 => [0.1, 0.3, 0.7, 0.9][rng.random_range(0..4)],
            _ => rng.random::<f64>(),
        })
        .collect()
}

/// Random corpus on a half-second grid with scores in sixteenths, so ties
/// in score, start time and tIoU are frequent and all arithmetic is exact.
pub fn random_corpus<R: Rng>(
    rng: &mut R,
    max_videos: usize,
    max_props: usize,
    max_gts: usize,
) -> (Vec<Proposal>, Vec<GroundTruthSegment>) {
    let num_videos = rng.random_range(1..=max_videos);
    let mut props = Vec::new();
    let mut gts = Vec::new();
    let seg = |rng: &mut R| {
        let s = rng.random_range(0..40) as f64 * 0.5;
        let d = rng.random_range(1..12) as f64 * 0.5;
        TemporalSegment::new(s, s + d).unwrap()
    };
    for v in 0..num_videos {
        let id = format!("vid{v:02}");
        for _ in 0..rng.random_range(0..=max_props) {
            let score = rng.random_range(0..=16) as f64 / 16.0;
            let s = seg(rng);
            props.push(Proposal::new(&id, s, score, ClipSpan { first: 0, last: 0 }, 0).unwrap());
        }
        for _ in 0..rng.random_range(0..=max_gts) {
            let s = seg(rng);
            gts.push(GroundTruthSegment::new(&id, s, None).unwrap());
        }
    }
    (props, gts)
}

/// Format a reference curve the way the evaluation CSVs are written.
pub fn format_curve(header: &str, points: &[(f64, f64)]) -> String {
    let mut s = format!("{header}\n");
    for (a, b) in points {
        s.push_str(&format!("{a:.6},{b:.6}\n"));
    }
    s
}
