use eap_core::proposer::{propose_stream, Proposer, ProposerConfig};
use eap_core::timeline::{ClipScore, VideoMeta};
use eap_testkit::{offline_group, random_scores};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn clips(meta: &VideoMeta, scores: &[f64]) -> Vec<ClipScore> {
    scores
        .iter()
        .enumerate()
        .map(|(i, &s)| ClipScore::on_grid(meta, i as u64, s).unwrap())
        .collect()
}

fn unit() -> VideoMeta {
    VideoMeta::new("v", 1.0, 1, 1).unwrap()
}

#[test]
fn worked_examples_match_offline_grouper() {
    let meta = unit();
    let cases: &[(&[f64], u64)] = &[
        (&[0.1, 0.9, 0.8, 0.7, 0.2], 0),
        (&[0.9, 0.2, 0.9, 0.1, 0.1], 1),
        (&[0.9, 0.9], 0),
        (&[0.1], 0),
        (&[], 0),
    ];
    for &(scores, gap) in cases {
        let cfg = ProposerConfig::new(0.5, gap, 1).unwrap();
        let online = propose_stream(&clips(&meta, scores), cfg, &meta).unwrap();
        assert_eq!(
            online,
            offline_group(scores, 0.5, gap, 1, &meta),
            "{scores:?}"
        );
    }
}

#[test]
fn two_hundred_random_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let meta = VideoMeta::new("v", 30.0, 16, 16).unwrap();
    for gap in [0, 1, 3] {
        for min_clips in [1, 2, 5] {
            let scores = random_scores(&mut rng, 200);
            let cfg = ProposerConfig::new(0.5, gap, min_clips).unwrap();
            let online = propose_stream(&clips(&meta, &scores), cfg, &meta).unwrap();
            assert_eq!(online, offline_group(&scores, 0.5, gap, min_clips, &meta));
        }
    }
}

#[test]
fn perfect_indicator_reconstructs_ground_truth() {
    let meta = VideoMeta::new("v", 30.0, 16, 16).unwrap();
    let mut scores = vec![0.0; 40];
    scores[10..25].fill(1.0);
    let out = propose_stream(&clips(&meta, &scores), ProposerConfig::default(), &meta).unwrap();
    assert_eq!(out.len(), 1);
    let gt = eap_core::clip_to_segment(&meta, 10, 24).unwrap();
    assert_eq!(eap_core::tiou(&out[0].segment, &gt), 1.0);
}

fn any_config() -> impl Strategy<Value = ProposerConfig> {
    (
        prop_oneof![Just(0.5), Just(0.3), Just(0.9), 0.01f64..0.99],
        prop_oneof![Just(0u64), Just(1), Just(3), 0u64..6],
        1u64..6,
    )
        .prop_map(|(t, g, m)| ProposerConfig::new(t, g, m).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn online_equals_offline(seed in any::<u64>(), len in 0usize..300, cfg in any_config()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let meta = VideoMeta::new("v", rng.random_range(1.0..60.0), rng.random_range(1..32), rng.random_range(1..32)).unwrap();
        let scores = random_scores(&mut rng, len);
        let online = propose_stream(&clips(&meta, &scores), cfg, &meta).unwrap();
        let offline = offline_group(&scores, cfg.threshold(), cfg.gap_tolerance(), cfg.min_clips(), &meta);
        prop_assert_eq!(online, offline);
    }

    #[test]
    fn latency_ordering_and_score_bounds(seed in any::<u64>(), len in 0usize..300, cfg in any_config()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let meta = VideoMeta::new("v", 30.0, 16, 16).unwrap();
        let scores = random_scores(&mut rng, len);
        let out = propose_stream(&clips(&meta, &scores), cfg, &meta).unwrap();
        for p in &out {
            prop_assert!(p.emitted_at_clip >= p.clip_span.last);
            prop_assert!(p.emitted_at_clip - p.clip_span.last <= cfg.gap_tolerance() + 1);
            let members: Vec<f64> = (p.clip_span.first..=p.clip_span.last)
                .map(|i| scores[i as usize])
                .filter(|&s| s >= cfg.threshold())
                .collect();
            let lo = members.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = members.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= p.score() && p.score() <= hi);
            if cfg.gap_tolerance() == 0 {
                prop_assert!(p.score() >= cfg.threshold());
            }
        }
        for w in out.windows(2) {
            prop_assert!(w[0].clip_span.last < w[1].clip_span.first);
            prop_assert!(w[0].segment.end() <= w[1].segment.start());
        }
    }

    #[test]
    fn causality_under_truncation(seed in any::<u64>(), len in 1usize..200, cfg in any_config()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let meta = unit();
        let scores = random_scores(&mut rng, len);
        let full = propose_stream(&clips(&meta, &scores), cfg, &meta).unwrap();
        for p in &full {
            let cut = p.emitted_at_clip as usize + 1;
            let prefix = propose_stream(&clips(&meta, &scores[..cut]), cfg, &meta).unwrap();
            prop_assert!(prefix.contains(p), "proposal {:?} changed when truncating at {}", p, cut);
        }
    }

    #[test]
    fn state_is_constant_size(seed in any::<u64>(), len in 0usize..500) {
        // the state is a fixed-size Copy value; check it never reports more
        // members than clips seen
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let meta = unit();
        let scores = random_scores(&mut rng, len);
        let mut p = Proposer::new(ProposerConfig::default(), meta.clone());
        for c in clips(&meta, &scores) {
            p.process_clip(&c).unwrap();
            let st = *p.state();
            prop_assert!(st.member_count <= p.next_clip());
            if st.member_count > 0 {
                let mean = st.score_sum / st.member_count as f64;
                prop_assert!((0.0..=1.0).contains(&mean));
            }
        }
    }
}

#[test]
fn proposer_state_has_no_history() {
    assert!(std::mem::size_of::<eap_core::proposer::ProposerState>() <= 64);
}
