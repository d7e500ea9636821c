use approx::{assert_abs_diff_eq, assert_relative_eq};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use arsq::data::{SentencePair, BOS, EOS};
use arsq::evaluation::{argmax_recent, bleu, max_attention_histogram, perplexity, token_accuracy};
use arsq::inference::AttentionTrace;
use arsq::model::{DecoderVariant, ModelConfig, ModelParams, Scoring, TargetAttention};
use arsq::training::{train, TrainConfig};
use arsq::{Error, Precision};

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

#[test]
fn bleu_examples() {
    let refs = vec![words("the cat sat on the mat"), words("a b c d e f")];
    let same = bleu(&refs, &refs).unwrap();
    assert_eq!(same.bleu, 1.0);

    let r = bleu(&[words("the the the the")], &[words("the cat")]).unwrap();
    assert_eq!(r.precisions[0], 0.25);
    assert_eq!(r.precisions[1], 0.0);
    assert_eq!(r.bleu, 0.0);

    // every hypothesis n-gram matches, but the hypothesis is half as long
    let r = bleu(&[words("a b c d e")], &[words("a b c d e a b c d e")]).unwrap();
    assert_eq!(r.precisions, [1.0; 4]);
    assert_abs_diff_eq!(r.brevity_penalty, (-1f64).exp(), epsilon = 1e-9);
    assert_abs_diff_eq!(r.bleu, (-1f64).exp(), epsilon = 1e-9);

    assert!(matches!(bleu::<String>(&[], &[]), Err(Error::Input(_))));
    assert!(bleu(&refs, &refs[..1]).is_err());
}

/// Reference formula: geometric mean of clipped precisions times BP.
fn bleu_oracle(hyps: &[Vec<u8>], refs: &[Vec<u8>]) -> f64 {
    let (mut m, mut t) = ([0f64; 4], [0f64; 4]);
    let (mut hl, mut rl) = (0f64, 0f64);
    for (h, r) in hyps.iter().zip(refs) {
        hl += h.len() as f64;
        rl += r.len() as f64;
        for n in 1..=4 {
            if h.len() < n {
                continue;
            }
            let grams: Vec<&[u8]> = h.windows(n).collect();
            t[n - 1] += grams.len() as f64;
            let mut seen: Vec<&[u8]> = Vec::new();
            for g in &grams {
                if seen.contains(g) {
                    continue;
                }
                seen.push(g);
                let hc = grams.iter().filter(|x| *x == g).count();
                let rc = if r.len() >= n {
                    r.windows(n).filter(|x| x == g).count()
                } else {
                    0
                };
                m[n - 1] += hc.min(rc) as f64;
            }
        }
    }
    if m.contains(&0.0) || hl == 0.0 {
        return 0.0;
    }
    let bp = (1.0 - rl / hl).exp().min(1.0);
    bp * ((0..4).map(|k| (m[k] / t[k]).ln()).sum::<f64>() / 4.0).exp()
}

fn corpus() -> impl Strategy<Value = Vec<(Vec<u8>, Vec<u8>)>> {
    prop::collection::vec(
        (
            prop::collection::vec(0u8..5, 0..9),
            prop::collection::vec(0u8..5, 1..9),
        ),
        1..6,
    )
}

proptest! {
    #[test]
    fn bleu_matches_the_oracle_and_ignores_pair_order(pairs in corpus(), seed in any::<u64>()) {
        let (h, r): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let b = bleu(&h, &r).unwrap().bleu;
        prop_assert!((b - bleu_oracle(&h, &r)).abs() < 1e-12);

        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let hp: Vec<_> = order.iter().map(|&i| h[i].clone()).collect();
        let rp: Vec<_> = order.iter().map(|&i| r[i].clone()).collect();
        prop_assert!((bleu(&hp, &rp).unwrap().bleu - b).abs() < 1e-12);
    }

    #[test]
    fn bleu_is_one_only_for_identical_corpora(pairs in corpus()) {
        let (h, r): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let b = bleu(&h, &r).unwrap().bleu;
        if h == r && h.iter().all(|s| s.len() >= 4) {
            prop_assert_eq!(b, 1.0);
        }
        if h != r {
            prop_assert!(b < 1.0);
        }
    }
}

#[test]
fn accuracy_examples() {
    assert_eq!(token_accuracy(&[vec![5, 6, 7]], &[vec![5, 6, 7]]), 1.0);
    assert_eq!(token_accuracy(&[vec![1, 2]], &[vec![8, 9]]), 0.0);
    assert_eq!(token_accuracy(&[vec![1, 2]], &[vec![1, 9]]), 0.5);
}

#[test]
fn uniform_model_perplexity_is_the_vocabulary_size() {
    let v = 17;
    let cfg = ModelConfig::language_model(DecoderVariant::AttnResidual(Scoring::Content), 4, 5, v).unwrap();
    let p: ModelParams<f64> = ModelParams::zeros(cfg).unwrap();
    let corpus = vec![vec![BOS, 5, 6, EOS], vec![BOS, 9, EOS]];
    assert_relative_eq!(
        perplexity(&p, &corpus, 2).unwrap(),
        v as f64,
        max_relative = 1e-12
    );
}

#[test]
fn memorised_sentence_has_perplexity_near_one() {
    let sentence = vec![BOS, 5, 9, 6, 11, 7, EOS];
    let pairs: Vec<SentencePair> = (0..40)
        .map(|_| SentencePair {
            source: vec![],
            target: sentence.clone(),
        })
        .collect();
    let cfg = TrainConfig {
        variant: DecoderVariant::MeanResidual,
        mode: arsq::model::Mode::LanguageModel,
        embed_dim: 8,
        hidden_dim: 16,
        batch_size: 4,
        dropout_p: 0.0,
        clip_norm: 0.0,
        max_epochs: 150,
        precision: Precision::Double,
        ..TrainConfig::default()
    };
    let r = train::<f64>(
        &cfg,
        cfg.model_config(0, 12).unwrap(),
        &pairs,
        &pairs[..1],
        Default::default(),
        |_| {},
    )
    .unwrap();
    let ppl = perplexity(&r.best, &[sentence], 1).unwrap();
    assert!((1.0..=1.05).contains(&ppl), "{ppl}");
}

fn trace(rows: Vec<Vec<f64>>) -> AttentionTrace {
    AttentionTrace {
        tokens: vec!["w".into(); rows.len()],
        source_attention: vec![vec![1.0]; rows.len()],
        target_attention: rows,
        target_kind: Some(TargetAttention::Embeddings),
    }
}

#[test]
fn histogram_examples() {
    let previous = trace(
        (1..=6)
            .map(|n| {
                let mut r = vec![0.01; n];
                r[n - 1] = 1.0;
                r
            })
            .collect(),
    );
    let h = max_attention_histogram(&[previous]).unwrap();
    assert_eq!(h.at(1), 1.0);
    assert!(h.frequencies[1..].iter().all(|&f| f == 0.0));

    let short = max_attention_histogram(&[trace(vec![vec![1.0], vec![0.7, 0.3]])]).unwrap();
    assert!(short.frequencies.len() <= 2);
    assert_abs_diff_eq!(short.at(1) + short.at(2), 1.0, epsilon = 1e-12);

    // ties go to the most recent position
    assert_eq!(argmax_recent(&[0.25; 4]), Some(3));
    let tied =
        max_attention_histogram(&[trace(vec![vec![1.0], vec![0.5, 0.5], vec![0.2, 0.4, 0.4]])]).unwrap();
    assert_eq!(tied.at(1), 1.0);

    let missing = AttentionTrace {
        target_kind: None,
        ..trace(vec![])
    };
    assert!(matches!(
        max_attention_histogram(&[missing]),
        Err(Error::Contract(_))
    ));
}

#[test]
fn random_argmax_gives_a_flat_histogram() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let traces: Vec<AttentionTrace> = (0..3000)
        .map(|_| {
            let n = rng.random_range(1..=10);
            trace(
                (1..=n)
                    .map(|k| {
                        let mut r = vec![0.0; k];
                        r[rng.random_range(0..k)] = 1.0;
                        r
                    })
                    .collect(),
            )
        })
        .collect();
    let h = max_attention_histogram(&traces).unwrap();
    assert_eq!(h.max_len(), 10);
    assert_abs_diff_eq!(h.frequencies.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    // each position is hit with probability 1/k at a step with k items, so the
    // opportunity-normalised rates agree up to the harmonic weighting of k
    let expected: Vec<f64> = {
        let mut rate = [0.0; 10];
        let mut opp = [0.0; 10];
        for t in &traces {
            for r in &t.target_attention {
                let k = r.len();
                for j in 0..k {
                    rate[j] += 1.0 / k as f64;
                    opp[j] += 1.0;
                }
            }
        }
        let r: Vec<f64> = rate.iter().zip(&opp).map(|(a, b)| a / b).collect();
        let s: f64 = r.iter().sum();
        r.iter().map(|x| x / s).collect()
    };
    for (f, e) in h.frequencies.iter().zip(&expected) {
        assert_abs_diff_eq!(f, e, epsilon = 0.015);
    }
}
