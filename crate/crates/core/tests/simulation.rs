use eap_core::metrics::{EvalConfig, EvalCorpus};
use eap_core::proposer::{propose_corpus, ProposerConfig};
use eap_core::simulator::{label_clips, simulate, SimConfig};
use eap_core::{tiou, Execution};

#[test]
fn noiseless_snapped_corpus_is_reconstructed_exactly() {
    let config = SimConfig {
        seed: 17,
        num_videos: 12,
        separability: 1.0,
        noise_width: 0.0,
        snap_to_grid: true,
        ..SimConfig::default()
    };
    let corpus = simulate(&config, Execution::default()).unwrap();
    let proposals = propose_corpus(
        &corpus.streams,
        ProposerConfig::default(),
        Execution::default(),
    )
    .unwrap();
    for (video, props) in corpus.videos.iter().zip(&proposals) {
        assert_eq!(props.len(), video.ground_truth.len());
        for (p, g) in props.iter().zip(&video.ground_truth) {
            assert_eq!(tiou(&p.segment, &g.segment), 1.0);
            assert_eq!(p.score(), 1.0);
        }
    }
    let report = EvalCorpus::new(
        proposals.into_iter().flatten(),
        corpus.ground_truth().cloned(),
        EvalConfig::default(),
    )
    .evaluate(Execution::default())
    .unwrap();
    assert_eq!(report.recall_at_max, 1.0);
    assert!(report.pr_points.iter().all(|p| p.precision == 1.0));
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

fn split_scores(config: &SimConfig) -> (Vec<f64>, Vec<f64>) {
    let corpus = simulate(config, Execution::default()).unwrap();
    let mut action = Vec::new();
    let mut background = Vec::new();
    for (v, s) in corpus.videos.iter().zip(&corpus.streams) {
        let labels = label_clips(&v.meta, &v.ground_truth, config.video_len_clips);
        for (c, a) in s.clips.iter().zip(labels) {
            if a {
                action.push(c.score());
            } else {
                background.push(c.score());
            }
        }
    }
    (action, background)
}

#[test]
fn zero_separability_makes_classes_indistinguishable() {
    let base = SimConfig {
        seed: 23,
        num_videos: 20,
        video_len_clips: 1000,
        ..SimConfig::default()
    };
    let (a, b) = split_scores(&SimConfig {
        separability: 0.0,
        ..base.clone()
    });
    let (n, m) = (a.len() as f64, b.len() as f64);
    // alpha = 0.001
    let critical = 1.95 * ((n + m) / (n * m)).sqrt();
    let d = ks_statistic(a, b);
    assert!(d < critical, "KS {d} >= {critical}");

    // control: positive separability is detected
    let (a, b) = split_scores(&SimConfig {
        separability: 0.2,
        ..base
    });
    assert!(ks_statistic(a, b) > critical);
}

#[test]
fn recall_degrades_with_separability() {
    let recall = |sep: f64| -> f64 {
        (0..8)
            .map(|seed| {
                let config = SimConfig {
                    seed,
                    num_videos: 10,
                    video_len_clips: 400,
                    separability: sep,
                    ..SimConfig::default()
                };
                let corpus = simulate(&config, Execution::default()).unwrap();
                let props = propose_corpus(
                    &corpus.streams,
                    ProposerConfig::default(),
                    Execution::default(),
                )
                .unwrap();
                EvalCorpus::new(
                    props.into_iter().flatten(),
                    corpus.ground_truth().cloned(),
                    EvalConfig::default(),
                )
                .recall_at_n(10)
                .unwrap()
                .recall
            })
            .sum::<f64>()
            / 8.0
    };
    let r: Vec<f64> = [1.0, 0.5, 0.25, 0.1].into_iter().map(recall).collect();
    assert!(r[0] > r[3] + 0.1, "{r:?}");
    for w in r.windows(2) {
        assert!(w[1] <= w[0] + 0.02, "{r:?}");
    }
}
