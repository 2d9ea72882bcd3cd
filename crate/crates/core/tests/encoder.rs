use ndarray::{Array1, Array2};
use polycl_core::augment::{make_pair_batch, AugmentationSpec, ExplicitMode};
use polycl_core::encoder::{
    contextual, embed_ids, encode, forward_pair, from_bytes, pool_cls, prepare_ids, project, save, load, to_bytes,
    EmbeddingBatch, EncoderConfig, EncoderParams, PaddedBatch, ProjectorActivation,
};
use polycl_core::seed::rng_from;
use polycl_core::smiles::{tokenize, Special, Vocabulary};
use rand::Rng;

fn ids(vocab: &Vocabulary, s: &str, max_len: usize) -> Vec<u32> {
    prepare_ids(&tokenize(s).unwrap(), vocab, max_len).unwrap()
}

#[test]
fn pooled_h_ignores_padding() {
    let vocab = Vocabulary::builtin();
    let cfg = EncoderConfig::desk(vocab.len());
    let params = EncoderParams::init(&cfg, 3);
    let seqs: Vec<Vec<u32>> = ["[*]CC[*]", "[*]CC([*])c1ccccc1", "[*]OC(=O)c1ccc(cc1)C(=O)OCC[*]"]
        .iter()
        .map(|s| ids(&vocab, s, cfg.max_len))
        .collect();
    let alone: Vec<Array1<f64>> = seqs.iter().map(|s| pool_cls(&contextual(&params, s, None).unwrap())).collect();

    let mut batch = PaddedBatch::from_sequences(&seqs);
    let padded: Vec<Array1<f64>> = encode(&batch, &params, false, 0).unwrap().iter().map(pool_cls).collect();
    // Overwrite every padding slot with arbitrary ids.
    let mut rng = rng_from(17);
    let width = batch.ids.ncols();
    for (i, &len) in batch.lengths.clone().iter().enumerate() {
        for j in len..width {
            batch.ids[[i, j]] = rng.gen_range(0..vocab.len() as u32);
        }
    }
    let perturbed: Vec<Array1<f64>> = encode(&batch, &params, false, 0).unwrap().iter().map(pool_cls).collect();
    for k in 0..seqs.len() {
        let d1 = (&alone[k] - &padded[k]).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        let d2 = (&padded[k] - &perturbed[k]).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(d1 <= 1e-12 && d2 <= 1e-12, "row {k}: {d1:e} {d2:e}");
    }
    assert_eq!(batch.ids[[0, 0]], Special::Cls.id());
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let vocab = Vocabulary::builtin();
    let params = EncoderParams::init(&EncoderConfig::desk(vocab.len()), 8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.bin");
    save(&params, &path).unwrap();
    let loaded = load(&path).unwrap();
    assert_eq!(loaded, params);
    assert_eq!(to_bytes(&loaded), std::fs::read(&path).unwrap());
    assert_eq!(from_bytes(&to_bytes(&loaded)).unwrap(), params);
}

#[test]
fn identity_projector_truncates_h() {
    let mut cfg = EncoderConfig::desk(40);
    cfg.projector_activation = ProjectorActivation::Identity;
    let mut p = EncoderParams::init(&cfg, 1);
    let (d, o) = (cfg.d_model, cfg.projector_out);
    p.proj_w1 = Array2::eye(d);
    p.proj_b1.fill(0.0);
    p.proj_w2 = Array2::from_shape_fn((d, o), |(i, j)| (i == j) as u8 as f64);
    p.proj_b2.fill(0.0);
    let h: Array1<f64> = (0..d).map(|i| (i as f64 * 0.37).sin() - 0.2).collect();
    let z = project(h.view(), &p);
    assert_eq!(z, h.slice(ndarray::s![..o]).to_owned());
}

#[test]
fn projector_matches_dense_oracle() {
    let cfg = EncoderConfig::desk(40);
    let p = EncoderParams::init(&cfg, 6);
    let mut rng = rng_from(2);
    for _ in 0..10 {
        let h: Vec<f64> = (0..cfg.d_model).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut hidden = vec![0.0; cfg.d_model];
        for (j, out) in hidden.iter_mut().enumerate() {
            let mut acc = p.proj_b1[[0, j]];
            for (i, hv) in h.iter().enumerate() {
                acc += hv * p.proj_w1[[i, j]];
            }
            *out = acc.max(0.0);
        }
        let z = project(Array1::from(h.clone()).view(), &p);
        for k in 0..cfg.projector_out {
            let mut acc = p.proj_b2[[0, k]];
            for (j, a) in hidden.iter().enumerate() {
                acc += a * p.proj_w2[[j, k]];
            }
            assert!((z[k] - acc).abs() <= 1e-12 * acc.abs().max(1.0), "{} vs {acc}", z[k]);
        }
    }
}

#[test]
fn forward_pair_cases() {
    let vocab = Vocabulary::builtin();
    let params = EncoderParams::init(&EncoderConfig::desk(vocab.len()), 4);
    let anchors = ["[*]CC([*])Cl", "[*]CC([*])c1ccccc1"];
    let plain = AugmentationSpec::baseline();
    for pair in make_pair_batch(&anchors, &plain, 9).unwrap() {
        let e = forward_pair(&pair, &params, &vocab, &plain).unwrap();
        assert_eq!(e.h_i, e.h_j);
        assert_eq!(e.z_i, e.z_j);
    }
    let implicit = AugmentationSpec::new(ExplicitMode::Original, ExplicitMode::Original, true);
    for pair in make_pair_batch(&anchors, &implicit, 9).unwrap() {
        let e = forward_pair(&pair, &params, &vocab, &implicit).unwrap();
        assert_ne!(e.h_i, e.h_j);
    }
    for spec in [AugmentationSpec::default(), AugmentationSpec::new(ExplicitMode::Drop, ExplicitMode::Masking, false)] {
        let pairs = make_pair_batch(&anchors, &spec, 3).unwrap();
        for pair in &pairs {
            let e = forward_pair(pair, &params, &vocab, &spec).unwrap();
            for z in [&e.z_i, &e.z_j] {
                let n = z.dot(z).sqrt();
                assert!(n.is_finite() && n > 0.0);
            }
        }
        let batch = EmbeddingBatch::from_pairs(&pairs, &params, &vocab, &spec).unwrap();
        assert_eq!(batch.h.dim(), (4, 64));
        assert_eq!(batch.z.dim(), (4, 32));
        assert!(batch.all_finite());
    }
}

#[test]
fn dropout_off_is_pure_and_dropout_seeds_matter() {
    let vocab = Vocabulary::builtin();
    let params = EncoderParams::init(&EncoderConfig::desk(vocab.len()), 4);
    let seqs = vec![ids(&vocab, "[*]CC([*])Cl", 128), ids(&vocab, "C", 128)];
    assert_eq!(embed_ids(&params, &seqs).unwrap(), embed_ids(&params, &seqs).unwrap());
    let batch = PaddedBatch::from_sequences(&seqs);
    let a = encode(&batch, &params, true, 1).unwrap();
    let b = encode(&batch, &params, true, 2).unwrap();
    assert_ne!(a[0], b[0]);
    assert_eq!(a, encode(&batch, &params, true, 1).unwrap());
    assert_eq!(a[1].dim(), (3, 64));
}

#[test]
fn paper_shape_dimensions() {
    let vocab = Vocabulary::builtin();
    let cfg = EncoderConfig::paper_shape(vocab.len());
    let params = EncoderParams::init(&cfg, 1);
    let c = contextual(&params, &ids(&vocab, "[*]CC([*])Cl", cfg.max_len), None).unwrap();
    assert_eq!(c.dim(), (9, 600));
    let z = project(pool_cls(&c).view(), &params);
    assert_eq!(z.len(), 128);
    assert!(z.iter().all(|v| v.is_finite()));
}
