use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use arsq::data::{make_synthetic_dev_task, make_synthetic_task, TaskKind, Vocabulary, BOS, EOS};
use arsq::inference::{
    beam_decode, decode_all, greedy_decode, score_tokens, AttentionTrace, DecodeOptions, TraceFile,
};
use arsq::model::{
    decoder_step, encode, initial_state, DecoderVariant, ModelConfig, ModelParams, Scoring, TargetAttention,
};
use arsq::tensor::Tape;
use arsq::training::{init_params, train, Dropout, TrainConfig, TrainOutputs};
use arsq::Precision;

const V: usize = 14;

fn model<T: arsq::Scalar>(variant: DecoderVariant, seed: u64) -> ModelParams<T> {
    let cfg = ModelConfig::translation(variant, 6, 8, V, V).unwrap();
    init_params(cfg, 0.6, seed).unwrap()
}

fn random_sources(n: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=6);
            let mut s: Vec<usize> = (0..len).map(|_| rng.random_range(4..V)).collect();
            s.push(EOS);
            s
        })
        .collect()
}

#[test]
fn greedy_respects_the_length_limit_and_records_traces() {
    for v in DecoderVariant::ALL {
        let p: ModelParams<f64> = model(v, 1);
        let src = [5, 6, 7, EOS];
        let one = greedy_decode(&p, &src, 1).unwrap();
        assert_eq!(one.tokens.len(), 1);
        let h = greedy_decode(&p, &src, 12).unwrap();
        let n = h.tokens.len();
        assert_eq!(h.source_attention.len(), n);
        assert!(h.source_attention.iter().all(|r| r.len() == src.len()));
        for r in &h.source_attention {
            assert_abs_diff_eq!(r.iter().sum::<f64>(), 1.0, epsilon = 1e-6);
        }
        match v.target_attention() {
            Some(TargetAttention::Embeddings) => {
                for (t, r) in h.target_attention.iter().enumerate() {
                    assert_eq!(r.len(), t + 1);
                }
                assert_eq!(h.target_attention[0], vec![1.0]);
            }
            Some(TargetAttention::Hiddens) => {
                for (t, r) in h.target_attention.iter().enumerate() {
                    assert_eq!(r.len(), t);
                }
            }
            None => {}
        }
        assert!(greedy_decode(&p, &src, 0).is_err());
    }
}

#[test]
fn beam_of_one_is_greedy() {
    let sources = random_sources(40, 2);
    for v in DecoderVariant::ALL {
        let p: ModelParams<f32> = model(v, 2);
        for src in &sources {
            let g = greedy_decode(&p, src, 15).unwrap();
            let b = beam_decode(&p, src, 1, 15, 1.0).unwrap();
            assert_eq!(g.tokens, b.tokens, "{v}");
            assert_eq!(g.log_prob, b.log_prob);
        }
    }
}

#[test]
fn wider_beams_find_at_least_the_greedy_score() {
    let sources = random_sources(30, 3);
    for v in DecoderVariant::ALL {
        let p: ModelParams<f64> = model(v, 3);
        for src in &sources {
            let g = beam_decode(&p, src, 1, 12, 0.0).unwrap();
            let b = beam_decode(&p, src, 4, 12, 0.0).unwrap();
            assert!(
                b.log_prob >= g.log_prob - 1e-9,
                "{v}: {} < {}",
                b.log_prob,
                g.log_prob
            );
            assert_eq!(b, beam_decode(&p, src, 4, 12, 0.0).unwrap());
        }
    }
}

#[test]
fn rescoring_reproduces_the_hypothesis_log_probability() {
    let sources = random_sources(10, 4);
    for v in DecoderVariant::ALL {
        let p64: ModelParams<f64> = model(v, 4);
        let p32: ModelParams<f32> = p64.cast();
        for src in &sources {
            for h in [
                beam_decode(&p64, src, 3, 10, 1.0).unwrap(),
                greedy_decode(&p64, src, 10).unwrap(),
            ] {
                assert_abs_diff_eq!(
                    score_tokens(&p64, src, &h.tokens).unwrap(),
                    h.log_prob,
                    epsilon = 1e-5
                );
                let sum: f64 = h.step_log_probs.iter().sum();
                assert_abs_diff_eq!(sum, h.log_prob, epsilon = 1e-9);
            }
            let h = greedy_decode(&p32, src, 10).unwrap();
            assert_abs_diff_eq!(
                score_tokens(&p32, src, &h.tokens).unwrap(),
                h.log_prob,
                epsilon = 1e-5
            );
        }
    }
}

#[test]
fn residual_summary_is_the_recorded_mixture_of_embeddings() {
    let src = [4, 9, 11, 5, EOS];
    for v in [
        DecoderVariant::MeanResidual,
        DecoderVariant::AttnResidual(Scoring::Content),
        DecoderVariant::AttnResidual(Scoring::ContentScope),
    ] {
        let p: ModelParams<f64> = model(v, 5);
        let h = greedy_decode(&p, &src, 10).unwrap();
        let table = p.get("tgt.embed").unwrap().value().values();
        let e = p.config().embed_dim;
        let emb = |tok: usize| &table[tok * e..(tok + 1) * e];

        let mut tape = Tape::new();
        let w = p.bind_frozen(&mut tape);
        let enc = encode(&mut tape, &w, &src).unwrap();
        let mut state = initial_state(&mut tape, &w, Some(&enc), 1).unwrap();
        let mut history = vec![BOS];
        for t in 0..h.tokens.len() {
            let prev = *history.last().unwrap();
            let out = decoder_step(
                &mut tape,
                &w,
                &state,
                &[prev],
                Some(&enc),
                &mut Dropout::inactive(),
            )
            .unwrap();
            let forward = tape.value(out.summary.unwrap()).values().to_vec();
            let alpha = match v {
                DecoderVariant::MeanResidual => vec![1.0 / history.len() as f64; history.len()],
                _ => h.target_attention[t].clone(),
            };
            assert_eq!(alpha.len(), history.len());
            for (k, &f) in forward.iter().enumerate() {
                let mix: f64 = history.iter().zip(&alpha).map(|(&tok, a)| a * emb(tok)[k]).sum();
                // recorded weights carry full precision, so this is much tighter than needed
                assert_abs_diff_eq!(mix, f, epsilon = 1e-6);
            }
            state = out.state;
            history.push(h.tokens[t]);
        }
    }
}

#[test]
fn parallel_decoding_matches_sequential() {
    let sources = random_sources(9, 6);
    let p: ModelParams<f32> = model(DecoderVariant::SelfAttentiveRnn, 6);
    let opts = DecodeOptions {
        beam: 3,
        max_len: 10,
        length_norm: 1.0,
    };
    let one = decode_all(&p, &sources, opts, 1).unwrap();
    let many = decode_all(&p, &sources, opts, 4).unwrap();
    assert_eq!(one, many);
}

fn vocab() -> Vocabulary {
    Vocabulary::synthetic(V).unwrap()
}

#[test]
fn exported_traces_round_trip() {
    let p: ModelParams<f64> = model(DecoderVariant::AttnResidual(Scoring::ContentScope), 7);
    let sources = random_sources(5, 7);
    let traces: Vec<AttentionTrace> = sources
        .iter()
        .map(|s| greedy_decode(&p, s, 8).unwrap().trace(&p, &vocab()))
        .collect();
    let file = TraceFile {
        variant: "attn-residual".into(),
        target_kind: Some(TargetAttention::Embeddings),
        traces,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    file.write(&path).unwrap();
    let back = TraceFile::read(&path).unwrap();
    assert_eq!(back.traces.len(), file.traces.len());
    for (a, b) in file.traces.iter().zip(&back.traces) {
        assert_eq!(a.tokens, b.tokens);
        for (ra, rb) in a
            .source_attention
            .iter()
            .chain(&a.target_attention)
            .zip(b.source_attention.iter().chain(&b.target_attention))
        {
            assert_eq!(ra.len(), rb.len());
            for (x, y) in ra.iter().zip(rb) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-6);
            }
        }
    }

    // three emitted tokens give embedding rows of lengths 1, 2, 3
    let three = AttentionTrace {
        tokens: vec!["w5".into(), "w6".into(), "</s>".into()],
        source_attention: vec![vec![1.0]; 3],
        target_attention: vec![vec![1.0], vec![0.5, 0.5], vec![0.2, 0.3, 0.5]],
        target_kind: Some(TargetAttention::Embeddings),
    };
    let text = TraceFile {
        variant: "attn-residual".into(),
        target_kind: Some(TargetAttention::Embeddings),
        traces: vec![three],
    }
    .to_text();
    let lens: Vec<usize> = text
        .lines()
        .skip(6)
        .take(3)
        .map(|l| l.split_whitespace().count())
        .collect();
    assert_eq!(lens, vec![1, 2, 3]);

    let empty = TraceFile {
        variant: "baseline".into(),
        target_kind: None,
        traces: vec![],
    };
    let text = empty.to_text();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("#ARSQ-TRACE v1"));
}

#[test]
fn trained_copy_model_copies_a_short_source() {
    let train_pairs: Vec<_> = make_synthetic_task(TaskKind::Copy, 20, (2, 10), 5000, 1)
        .unwrap()
        .collect();
    let dev: Vec<_> = make_synthetic_dev_task(TaskKind::Copy, 20, (2, 10), 500, 1)
        .unwrap()
        .collect();
    let cfg = TrainConfig {
        variant: DecoderVariant::Baseline,
        embed_dim: 16,
        hidden_dim: 32,
        batch_size: 4,
        dropout_p: 0.0,
        clip_norm: 0.0,
        max_epochs: 30,
        precision: Precision::Single,
        target_accuracy: Some(0.99),
        ..TrainConfig::default()
    };
    let r = train::<f32>(
        &cfg,
        cfg.model_config(20, 20).unwrap(),
        &train_pairs,
        &dev,
        TrainOutputs::default(),
        |_| {},
    )
    .unwrap();
    assert!(r.metrics[r.best_epoch - 1].dev_accuracy >= 0.99);
    let h = greedy_decode(&r.best, &[5, 7, EOS], 10).unwrap();
    assert_eq!(h.tokens, vec![5, 7, EOS]);
}
