//! Acceptance gate. Runs every end-to-end criterion, prints one PASS/FAIL
//! line each, and exits non-zero if any failed.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use common::{check_pipeline, naive_alignment, naive_uniformity, random_ids, rel_err, STEP, TOL};
use ndarray::{array, Array1, Array2};
use polycl_core::augment::{drop_tokens, make_pair_batch, mask_tokens, AugmentationSpec, ExplicitMode};
use polycl_core::commands::cmd_sweep;
use polycl_core::config::{explicit_grid, Grid, RunConfig};
use polycl_core::corpus::{generate_polymers, toy_affinity, toy_gap};
use polycl_core::encoder::{contextual, encode, from_bytes, pool_cls, prepare_ids, save, to_bytes, EncoderConfig, EncoderParams, PaddedBatch};
use polycl_core::metrics::{alignment_loss, evaluate_representation, uniformity_loss};
use polycl_core::pretrain::{nt_xent_loss, pretrain, ContrastiveConfig};
use polycl_core::seed::rng_from;
use polycl_core::smiles::{enumerate_random, parse, tokenize, Special, Token, TokenSequence, Vocabulary};
use polycl_core::transfer::{cross_validate_features, extract_features, fit_loop, fold_partition, HeadConfig};
use rand::Rng;

/// Carries the pretrained encoder from the toy regression to the transfer check.
#[derive(Default)]
struct Shared {
    pretrained: Option<EncoderParams>,
}

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn nt_xent() -> Outcome {
    let start = Instant::now();
    let (l1, _) = nt_xent_loss(&array![[0.3, -0.2], [0.5, 0.1]], 0.1).unwrap();
    ensure(l1 == 0.0, || format!("N=1 loss {l1:e}, expected 0"))?;

    let z = array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
    let (l2, _) = nt_xent_loss(&z, 1.0).unwrap();
    let e = 1f64.exp();
    let closed = -(e / (e + 2.0)).ln();
    ensure((l2 - closed).abs() <= 1e-9, || format!("N=2 loss {l2:.12} vs closed form {closed:.12}"))?;
    ensure((l2 - 0.551445).abs() <= 1e-6, || format!("N=2 loss {l2:.12} vs 0.551445"))?;

    let mut rng = rng_from(2024);
    let mut worst = 0.0f64;
    for inst in 0..50 {
        let n = rng.gen_range(1..=4);
        let dim = rng.gen_range(2..=8);
        let tau = [0.05, 0.1, 0.5, 1.0][inst % 4];
        let z = Array2::from_shape_simple_fn((2 * n, dim), || rng.gen_range(-1.0..1.0));
        let (_, g) = nt_xent_loss(&z, tau).unwrap();
        for idx in 0..z.len() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp.as_slice_mut().unwrap()[idx] += STEP;
            zm.as_slice_mut().unwrap()[idx] -= STEP;
            let num = (nt_xent_loss(&zp, tau).unwrap().0 - nt_xent_loss(&zm, tau).unwrap().0) / (2.0 * STEP);
            worst = worst.max(rel_err(g.as_slice().unwrap()[idx], num));
        }
    }
    ensure(worst <= TOL, || format!("worst gradient rel err {worst:e}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!("N=2 loss {l2:.10}, 50 gradient instances worst rel err {worst:.1e}, {secs:.2} s"))
}

fn metrics() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from(77);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=20);
        let d = rng.gen_range(1..=8);
        let mut draw = || {
            Array2::from_shape_simple_fn((n, d), || {
                let v: f64 = rng.gen_range(0.1..3.0);
                if rng.gen_bool(0.5) { v } else { -v }
            })
        };
        let (x, y) = (draw(), draw());
        worst = worst.max((alignment_loss(&x, &y).unwrap() - naive_alignment(&x, &y)).abs());
        worst = worst.max((uniformity_loss(&x).unwrap() - naive_uniformity(&x)).abs());
    }
    ensure(worst <= 1e-12, || format!("worst deviation from naive loop {worst:e}"))?;
    let anti = uniformity_loss(&array![[1.0, 0.0], [-1.0, 0.0]]).unwrap();
    ensure(anti == -8.0, || format!("antipodal uniformity {anti}"))?;
    let same = array![[0.6, 0.8], [0.6, 0.8], [0.6, 0.8]];
    let a = alignment_loss(&same, &same).unwrap();
    ensure(a == 0.0, || format!("identical-pair alignment {a}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.1} s"))?;
    Ok(format!("100 random sets, worst deviation {worst:.1e}, antipodal {anti}, {secs:.2} s"))
}

fn smiles_soundness() -> Outcome {
    let start = Instant::now();
    common::check_smiles_soundness();
    Ok(format!("200 polymers x 8 seeds round-trip, oracle agrees, {:.1} s", start.elapsed().as_secs_f64()))
}

fn augmentation() -> Outcome {
    let pool: Vec<Token> = vec![
        Token::Atom("C".into()),
        Token::Atom("c".into()),
        Token::Atom("O".into()),
        Token::Atom("Cl".into()),
        Token::Atom("[nH]".into()),
        Token::Attachment,
        Token::Bond('='),
        Token::Bond('#'),
        Token::BranchOpen,
        Token::BranchClose,
        Token::RingDigit("1".into()),
    ];
    let mut rng = rng_from(404);
    for case in 0..1000 {
        let len = rng.gen_range(1..=120);
        let seq = TokenSequence((0..len).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect());
        let expected = (0.1 * len as f64).round() as usize;
        let seed: u64 = rng.gen();
        let m = mask_tokens(&seq, 0.1, seed).unwrap();
        let masked = m.0.iter().filter(|t| **t == Token::Special(Special::Mask)).count();
        ensure(masked == expected && m.len() == len, || format!("case {case}: len {len} masked {masked}, expected {expected}"))?;
        let d = drop_tokens(&seq, 0.1, seed).unwrap();
        ensure(d.len() == len - expected, || format!("case {case}: len {len} kept {}, expected {}", d.len(), len - expected))?;
        ensure(mask_tokens(&seq, 0.1, seed).unwrap() == m && drop_tokens(&seq, 0.1, seed).unwrap() == d, || {
            format!("case {case}: repeated seed changed the view")
        })?;
    }
    let corpus = generate_polymers(64, 12);
    for (k, s) in corpus.iter().enumerate() {
        let g = parse(s).unwrap();
        ensure(enumerate_random(&g, k as u64) == enumerate_random(&g, k as u64), || format!("enumeration of {s} not repeatable"))?;
    }
    for &bi in &ExplicitMode::ALL {
        for &bj in &ExplicitMode::ALL {
            let spec = AugmentationSpec::new(bi, bj, true);
            let a = make_pair_batch(&corpus, &spec, 31).unwrap();
            ensure(a == make_pair_batch(&corpus, &spec, 31).unwrap(), || format!("{} batch not repeatable", spec.tag()))?;
        }
    }
    Ok("1000 sequences match round(0.1*len), views repeat bitwise under fixed seeds".into())
}

fn max_abs(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    (a - b).mapv(f64::abs).fold(0.0, |m, &v| m.max(v))
}

fn encoder() -> Outcome {
    let vocab = Vocabulary::builtin();
    let cfg = EncoderConfig::desk(vocab.len());
    let params = EncoderParams::init(&cfg, 3);
    let seqs: Vec<Vec<u32>> = generate_polymers(6, 8)
        .iter()
        .map(|s| prepare_ids(&tokenize(s).unwrap(), &vocab, cfg.max_len).unwrap())
        .collect();
    let alone: Vec<Array1<f64>> = seqs.iter().map(|s| pool_cls(&contextual(&params, s, None).unwrap())).collect();
    let mut batch = PaddedBatch::from_sequences(&seqs);
    let mut rng = rng_from(17);
    let width = batch.ids.ncols();
    for (i, &len) in batch.lengths.clone().iter().enumerate() {
        for j in len..width {
            batch.ids[[i, j]] = rng.gen_range(0..vocab.len() as u32);
        }
    }
    let padded: Vec<Array1<f64>> = encode(&batch, &params, false, 0).unwrap().iter().map(pool_cls).collect();
    let pad_dev = (0..seqs.len()).map(|k| max_abs(&alone[k], &padded[k])).fold(0.0, f64::max);
    ensure(pad_dev <= 1e-12, || format!("padding changed h by {pad_dev:e}"))?;

    let grad_params = EncoderParams::init(&cfg, 5);
    let ids = random_ids(&mut rng_from(9), 4, cfg.vocab_size, 12);
    let (worst, at) = check_pipeline(&grad_params, &ids, &vec![None; ids.len()], 0.05, 12, 4);
    ensure(worst <= TOL, || format!("pipeline gradient rel err {worst:e} at {at}"))?;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.bin");
    save(&params, &path).unwrap();
    let bytes = fs::read(&path).unwrap();
    let loaded = from_bytes(&bytes).unwrap();
    ensure(loaded == params && to_bytes(&loaded) == bytes, || "checkpoint round trip changed bytes".into())?;
    Ok(format!("padding deviation {pad_dev:.1e}, desk gradient worst rel err {worst:.1e}, checkpoint {} bytes round-trips", bytes.len()))
}

const TOY_SEED: u64 = 42;

fn toy_pretraining(shared: &mut Shared) -> Outcome {
    let start = Instant::now();
    let vocab = Vocabulary::builtin();
    let all = generate_polymers(1200, 11);
    let (train, held) = all.split_at(1000);
    let enc = EncoderConfig::desk(vocab.len());
    let cfg = ContrastiveConfig { max_steps: Some(500), ..ContrastiveConfig::desk(TOY_SEED) };
    let out = pretrain(train, None, &AugmentationSpec::default(), &enc, &cfg, &vocab, None).map_err(|e| e.to_string())?;
    let (first, last) = out.log.initial_final_loss(10).ok_or("fewer than 10 logged steps")?;
    let random = EncoderParams::init(&enc, TOY_SEED);
    let (a_init, _) = evaluate_representation(held, &random, &vocab, 1).unwrap();
    let (a_trained, _) = evaluate_representation(held, &out.params, &vocab, 1).unwrap();
    shared.pretrained = Some(out.params);
    ensure(last <= 0.5 * first, || format!("loss {first:.4} -> {last:.4}, above half"))?;
    ensure(a_trained < a_init, || format!("held-out alignment {a_init:.5} -> {a_trained:.5}, not lower"))?;
    Ok(format!(
        "loss {first:.4} -> {last:.4}, held-out alignment {a_init:.5} -> {a_trained:.5}, {:.0} s",
        start.elapsed().as_secs_f64()
    ))
}

fn transfer(shared: &mut Shared) -> Outcome {
    let params = shared.pretrained.as_ref().ok_or("needs the pretrained encoder from the toy regression")?;
    let vocab = Vocabulary::builtin();
    let x = extract_features(&generate_polymers(500, 3), params, &vocab).map_err(|e| e.to_string())?;
    let w: Array1<f64> = (0..x.ncols()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
    let y = x.dot(&w);
    let report = cross_validate_features(&x, &y, &HeadConfig::default(), 9).map_err(|e| e.to_string())?;
    let min_r2 = report.folds.iter().map(|f| f.r2).fold(f64::INFINITY, f64::min);
    ensure(min_r2 >= 0.99, || format!("fold R^2 down to {min_r2:.5} (mean {:.5})", report.mean_r2))?;

    for n in [10, 11, 37, 100, 499, 500] {
        let folds = fold_partition(n, 5, 3);
        let mut all = folds.concat();
        all.sort_unstable();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
        ensure(all == (0..n).collect::<Vec<_>>() && spread <= 1, || format!("n={n}: folds {sizes:?} are not a balanced cover"))?;
    }

    let cfg = HeadConfig::default();
    let s = fit_loop(&cfg, |e| Ok((e as f64 - 50.0).abs())).map_err(|e| e.to_string())?;
    ensure(s.epochs_run == 100, || format!("stopped at epoch {}", s.epochs_run))?;
    Ok(format!("fold R^2 min {min_r2:.5} mean {:.5}, folds balanced, early stop at epoch {}", report.mean_r2, s.epochs_run))
}

fn sweep() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let all = generate_polymers(900, 21);
    fs::write(dir.path().join("corpus.txt"), all[..600].join("\n")).unwrap();
    for (name, f) in [("gap", toy_gap as fn(&str) -> f64), ("affinity", toy_affinity)] {
        let mut t = String::from("smiles,value\n");
        for p in &all[600..] {
            t.push_str(&format!("{p},{}\n", f(p)));
        }
        fs::write(dir.path().join(format!("{name}.csv")), t).unwrap();
    }
    let text = r#"{"seed": 5,
      "encoder": {"d_model": 32, "n_layers": 1, "n_heads": 2, "d_feedforward": 64, "projector_out": 16},
      "contrastive": {"batch_size": 32, "max_steps": 150, "eval_size": 64},
      "paths": {"corpus": "corpus.txt", "datasets": ["gap.csv", "affinity.csv"]}}"#;
    fs::write(dir.path().join("run.json"), text).unwrap();
    let mut cfg = RunConfig::load(&dir.path().join("run.json")).map_err(|e| e.to_string())?;
    let mut grid = explicit_grid();
    grid.push(AugmentationSpec::new(ExplicitMode::Original, ExplicitMode::Original, true));
    cfg.sweep.grid = Grid::Specs(grid);
    let rows = cmd_sweep(&cfg, &dir.path().join("out")).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for ds in ["gap", "affinity"] {
        let of = |v: &str| rows.iter().filter(|r| r.dataset == ds && r.verdict == v).collect::<Vec<_>>();
        let base = of("baseline");
        let best = rows.iter().filter(|r| r.dataset == ds).filter_map(|r| r.mean_r2.map(|m| (m, &r.spec_tag))).fold(None, |acc: Option<(f64, &String)>, c| {
            match acc {
                Some(a) if a.0 >= c.0 => Some(a),
                _ => Some(c),
            }
        });
        let improved = of("improved").len();
        let (b, (m, tag)) = (base[0].mean_r2.unwrap_or(f64::NAN), best.ok_or("no scored cells")?);
        ensure(improved > 0, || format!("{ds}: no cell beats baseline R^2 {b:.4}"))?;
        notes.push(format!("{ds} baseline {b:.4}, best {m:.4} ({tag}), {improved} improved"));
    }
    Ok(format!("{} cells; {}; {:.0} s", rows.len() / 2, notes.join("; "), start.elapsed().as_secs_f64()))
}

fn main() -> ExitCode {
    let checks: Vec<(&str, Box<dyn Fn(&mut Shared) -> Outcome>)> = vec![
        ("NT-Xent loss and gradient", Box::new(|_| nt_xent())),
        ("alignment/uniformity oracles", Box::new(|_| metrics())),
        ("SMILES enumeration and canonical soundness", Box::new(|_| smiles_soundness())),
        ("augmentation laws and determinism", Box::new(|_| augmentation())),
        ("encoder padding, gradient, checkpoint", Box::new(|_| encoder())),
        ("toy contrastive pretraining", Box::new(toy_pretraining)),
        ("transfer head sanity", Box::new(transfer)),
        ("augmentation sweep beats baseline", Box::new(|_| sweep())),
    ];
    let mut shared = Shared::default();
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(|| check(&mut shared))).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        match result {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
