mod common;

use common::{random_model, rel_err, Owned};
use dance_core::audio::FeatureStats;
use dance_core::model::{
    Checkpoint, StreamConfig, TrainConfig, TrainState, TrainingExample, Tsmt, TsmtConfig,
};
use dance_core::motion::QuantizationSpec;
use dance_core::numerics::Graph;
use dance_core::sampler::{incremental_nll, Session};
use dance_core::SeededRng;

fn micro_with_audio_stats() -> TsmtConfig {
    TsmtConfig::micro()
}

#[test]
fn untrained_loss_is_log_bins() {
    let cfg = TsmtConfig::default();
    let m = Tsmt::<f64>::new(cfg.clone(), 3).unwrap();
    let mut rng = SeededRng::new(4);
    let x = Owned::random(&cfg, 6, &mut rng);
    let loss = m.batch_loss(&[x.input()]).unwrap();
    assert!((loss - 300f64.ln()).abs() < 1e-12, "{loss}");
    let lp = m.log_probs(&x.input()).unwrap();
    assert_eq!(lp.shape(), &[6 * 51, 300]);
    assert_eq!(m.params().get(m.ids().embed).len(), 1500);
}

#[test]
fn log_probs_are_normalized() {
    let cfg = micro_with_audio_stats();
    let m = random_model(cfg.clone(), 1);
    let x = Owned::random(&cfg, 5, &mut SeededRng::new(2));
    let lp = m.log_probs(&x.input()).unwrap();
    for r in 0..lp.rows() {
        let lse = lp.row(r).iter().map(|v| v.exp()).sum::<f64>().ln();
        assert!(lse.abs() < 1e-10);
    }
}

#[test]
fn end_to_end_gradient_matches_finite_differences() {
    let mut cfg = TsmtConfig::micro();
    cfg.max_context = 4;
    let mut m = random_model(cfg.clone(), 7);
    let x = Owned::random(&cfg, 4, &mut SeededRng::new(8));
    let (_, grads) = m.loss_and_grads(&[x.input()], None).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for id in 0..m.params().len() {
        for i in 0..m.params().get(id).len() {
            let orig = m.params().get(id).data()[i];
            m.params_mut().get_mut(id).data_mut()[i] = orig + h;
            let lp = m.batch_loss(&[x.input()]).unwrap();
            m.params_mut().get_mut(id).data_mut()[i] = orig - h;
            let lm = m.batch_loss(&[x.input()]).unwrap();
            m.params_mut().get_mut(id).data_mut()[i] = orig;
            let num = (lp - lm) / (2.0 * h);
            let e = rel_err(grads[id].data()[i], num);
            assert!(
                e < 1e-4,
                "{} [{i}]: analytic {} numeric {num}",
                m.params().name(id),
                grads[id].data()[i]
            );
            worst = worst.max(e);
        }
    }
    assert!(worst < 1e-4);
}

#[test]
fn parallel_loss_equals_incremental_mean() {
    for (seed, cfg) in [
        (1, TsmtConfig::micro()),
        (2, small_cfg()),
        (3, no_audio(small_cfg())),
    ] {
        let m = random_model(cfg.clone(), seed);
        let x = Owned::random(&cfg, 12, &mut SeededRng::new(seed + 10));
        let parallel = m.batch_loss(&[x.input()]).unwrap();
        let steps = incremental_nll(&m, &x.input()).unwrap();
        let inc = steps.iter().sum::<f64>() / steps.len() as f64;
        assert!((parallel - inc).abs() < 1e-10, "{parallel} vs {inc}");
    }
}

fn small_cfg() -> TsmtConfig {
    TsmtConfig {
        pose: StreamConfig {
            model_dim: 16,
            head_dim: 8,
            heads: 2,
            blocks: 2,
        },
        audio: StreamConfig {
            model_dim: 8,
            head_dim: 4,
            heads: 2,
            blocks: 2,
        },
        embed_dim: 3,
        bins: 7,
        pose_dims: 9,
        audio_dims: 26,
        beat_embed_dim: 4,
        dropout: 0.0,
        max_context: 32,
        ..TsmtConfig::default()
    }
}

fn no_audio(mut c: TsmtConfig) -> TsmtConfig {
    c.use_audio = false;
    c
}

#[test]
fn cached_step_matches_full_recompute() {
    let cfg = small_cfg();
    let m = random_model(cfg.clone(), 5);
    let t_len = 10;
    let x = Owned::random(&cfg, t_len, &mut SeededRng::new(6));
    let full = m.log_probs(&x.input()).unwrap();
    let mut s = Session::new(&m).unwrap();
    for t in 0..t_len {
        let lp = s
            .predict(&x.audio[t * 26..(t + 1) * 26], x.beat[t])
            .unwrap();
        for d in 0..cfg.pose_dims {
            for k in 0..cfg.bins {
                let a = lp.row(d)[k];
                let b = full.row(t * cfg.pose_dims + d)[k];
                assert!((a - b).abs() < 1e-12, "t={t} d={d} k={k}: {a} vs {b}");
            }
        }
        s.commit(&x.tokens[t * cfg.pose_dims..(t + 1) * cfg.pose_dims])
            .unwrap();
    }
    let f = s.step_flops();
    let d1 = f[1] - f[0];
    for w in f.windows(2) {
        assert_eq!(w[1] - w[0], d1, "per-step cost grows linearly");
    }
    assert!(d1 > 0);
}

#[test]
fn session_rejects_steps_past_context() {
    let mut cfg = TsmtConfig::micro();
    cfg.max_context = 2;
    let m = random_model(cfg.clone(), 1);
    let mut s = Session::new(&m).unwrap();
    for _ in 0..2 {
        s.predict(&[0.0; 3], false).unwrap();
        s.commit(&[0; 6]).unwrap();
    }
    assert!(s
        .predict(&[0.0; 3], false)
        .unwrap_err()
        .to_string()
        .contains("exhausted"));
}

#[test]
fn causality_of_logits() {
    let cfg = small_cfg();
    let m = random_model(cfg.clone(), 11);
    let t_len = 8;
    let mut rng = SeededRng::new(12);
    let base = Owned::random(&cfg, t_len, &mut rng);
    let lp0 = m.log_probs(&base.input()).unwrap();
    for t in 0..t_len {
        let mut x = Owned::random(&cfg, t_len, &mut rng);
        x.tokens[..t * cfg.pose_dims].copy_from_slice(&base.tokens[..t * cfg.pose_dims]);
        x.audio[..(t + 1) * 26].copy_from_slice(&base.audio[..(t + 1) * 26]);
        x.beat[..=t].copy_from_slice(&base.beat[..=t]);
        let lp = m.log_probs(&x.input()).unwrap();
        for r in t * cfg.pose_dims..(t + 1) * cfg.pose_dims {
            for (a, b) in lp.row(r).iter().zip(lp0.row(r)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn loss_decreases_over_first_adam_steps() {
    let cfg = small_cfg();
    let mut m = Tsmt::<f64>::new(cfg.clone(), 21).unwrap();
    let mut rng = SeededRng::new(22);
    let xs: Vec<Owned> = (0..2).map(|_| Owned::random(&cfg, 8, &mut rng)).collect();
    let batch: Vec<_> = xs.iter().map(|x| x.input()).collect();
    let tc = TrainConfig {
        lr: 1e-3,
        ..TrainConfig::default()
    };
    let mut st = TrainState::new(&m, &tc);
    let mut prev = f64::INFINITY;
    for _ in 0..10 {
        let (loss, g) = m.loss_and_grads(&batch, None).unwrap();
        assert!(loss < prev, "{loss} !< {prev}");
        prev = loss;
        st.adam.step(m.params_mut(), &g).unwrap();
    }
}

#[test]
fn batch_order_does_not_change_loss() {
    let cfg = small_cfg();
    let m = random_model(cfg.clone(), 31);
    let mut rng = SeededRng::new(32);
    let xs: Vec<Owned> = (0..5).map(|_| Owned::random(&cfg, 6, &mut rng)).collect();
    let a: Vec<_> = xs.iter().map(|x| x.input()).collect();
    let b: Vec<_> = xs.iter().rev().map(|x| x.input()).collect();
    let la = m.batch_loss(&a).unwrap();
    let lb = m.batch_loss(&b).unwrap();
    assert!((la - lb).abs() < 1e-10);
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let cfg = small_cfg();
    let m = random_model(cfg.clone(), 41);
    let spec = QuantizationSpec::uniform(cfg.pose_dims, -1.0, 1.0, cfg.bins).unwrap();
    let mut ck =
        Checkpoint::new(m, spec, FeatureStats::identity(), vec![0.0; cfg.pose_dims]).unwrap();
    let tc = TrainConfig::default();
    let mut st = TrainState::new(&ck.model, &tc);
    st.epoch = 3;
    ck.train = Some((tc, st));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.ckpt");
    ck.save(&p).unwrap();
    let back = Checkpoint::<f64>::load(&p).unwrap();
    let x = Owned::random(&cfg, 5, &mut SeededRng::new(42));
    assert_eq!(
        ck.model.log_probs(&x.input()).unwrap().data(),
        back.model.log_probs(&x.input()).unwrap().data()
    );
    assert_eq!(back.train.as_ref().unwrap().1.epoch, 3);
    assert_eq!(back.to_bytes().unwrap(), ck.to_bytes().unwrap());
    let mut bytes = ck.to_bytes().unwrap();
    bytes[0] = b'X';
    assert!(Checkpoint::<f64>::from_bytes(&bytes).is_err());
}

#[test]
fn no_audio_model_trains() {
    let cfg = no_audio(small_cfg());
    let mut m = Tsmt::<f64>::new(cfg.clone(), 51).unwrap();
    let mut rng = SeededRng::new(52);
    let ex: Vec<TrainingExample> = (0..3)
        .map(|_| {
            let o = Owned::random(&cfg, 8, &mut rng);
            TrainingExample {
                tokens: o.tokens,
                audio: Vec::new(),
                beat: o.beat,
            }
        })
        .collect();
    let tc = TrainConfig {
        lr: 3e-3,
        batch_size: 2,
        ..TrainConfig::default()
    };
    let mut st = TrainState::new(&m, &tc);
    let first = dance_core::model::train_epoch(&mut m, &mut st, &tc, &ex, 1).unwrap();
    let mut last = first.clone();
    for _ in 0..20 {
        last = dance_core::model::train_epoch(&mut m, &mut st, &tc, &ex, 1).unwrap();
    }
    assert!(last.loss < first.loss);
    let lp = m.log_probs(&ex[0].input()).unwrap();
    for r in 0..lp.rows() {
        assert!(lp.row(r).iter().map(|v| v.exp()).sum::<f64>().ln().abs() < 1e-10);
    }
}

#[test]
fn zero_depth_stream_is_identity() {
    use dance_core::model::layers::stream_forward;
    use dance_core::numerics::{Array, ParamStore};
    let cfg = StreamConfig {
        model_dim: 4,
        head_dim: 2,
        heads: 2,
        blocks: 0,
    };
    let store = ParamStore::<f64>::new();
    let mut g = Graph::new();
    let x = g.constant(Array::from_rows(&[vec![1.0, 2.0, 3.0, 4.0]]).unwrap());
    let y = stream_forward(&mut g, &store, &[], &cfg, x, true, 1e-5, None).unwrap();
    assert_eq!(g.value(y), g.value(x));
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let mut cfg = small_cfg();
    cfg.dropout = 0.1;
    let mut rng = SeededRng::new(61);
    let ex: Vec<TrainingExample> = (0..4)
        .map(|_| {
            let o = Owned::random(&cfg, 6, &mut rng);
            TrainingExample {
                tokens: o.tokens,
                audio: o.audio,
                beat: o.beat,
            }
        })
        .collect();
    let tc = TrainConfig {
        lr: 1e-3,
        batch_size: 3,
        epochs: 6,
        ..TrainConfig::default()
    };
    let mut a = Tsmt::<f64>::new(cfg.clone(), 1).unwrap();
    let mut sa = TrainState::new(&a, &tc);
    dance_core::model::train(&mut a, &mut sa, &tc, &ex, 9, |_, _, _| Ok(())).unwrap();

    let mut b = Tsmt::<f64>::new(cfg.clone(), 1).unwrap();
    let mut sb = TrainState::new(&b, &tc);
    let half = TrainConfig {
        epochs: 3,
        ..tc.clone()
    };
    dance_core::model::train(&mut b, &mut sb, &half, &ex, 9, |_, _, _| Ok(())).unwrap();
    let spec = QuantizationSpec::uniform(cfg.pose_dims, -1.0, 1.0, cfg.bins).unwrap();
    let mut ck =
        Checkpoint::new(b, spec, FeatureStats::identity(), vec![0.0; cfg.pose_dims]).unwrap();
    ck.train = Some((tc.clone(), sb));
    let mut ck = Checkpoint::<f64>::from_bytes(&ck.to_bytes().unwrap()).unwrap();
    let (_, mut sb) = ck.train.take().unwrap();
    dance_core::model::train(&mut ck.model, &mut sb, &tc, &ex, 9, |_, _, _| Ok(())).unwrap();
    assert_eq!(sa.log, sb.log);
}
