use avfuse_core::nn::Forward;
use avfuse_core::params::ParamStore;
use avfuse_core::tensor::{FlopClass, Tape, Tensor};
use avfuse_core::tokenizer::{embed, patchify, tubeletize, unpatchify, TokenizerParams};
use avfuse_core::transformer::{Encoder, EncoderConfig, Readout, LN_EPS};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

proptest! {
    #[test]
    fn patch_round_trip(gr in 1usize..4, gc in 1usize..4, ph in 1usize..5, pw in 1usize..5, c in 1usize..4, seed in any::<u64>()) {
        let img = random_tensor(&[gr * ph, gc * pw, c], seed);
        let g = patchify(&img, (ph, pw)).unwrap();
        prop_assert_eq!(g.count(), gr * gc);
        prop_assert_eq!(unpatchify(&g), img);
    }

    #[test]
    fn position_free_embedding_permutes_rows(seed in any::<u64>()) {
        let img = random_tensor(&[8, 8, 3], seed);
        let grid = patchify(&img, (4, 4)).unwrap();
        let mut perm: Vec<usize> = (0..4).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let e = random_tensor(&[48, 6], seed ^ 1);
        let run = |g: &avfuse_core::tokenizer::PatchGrid| {
            let mut t = Tape::new();
            let p = t.constant(g.patches().clone());
            let ev = t.constant(e.clone());
            let cls = t.constant(Tensor::vector(vec![0.5; 6]));
            let pos = t.constant(Tensor::zeros(&[5, 6]));
            let z = embed(&mut t, p, ev, cls, pos).unwrap();
            t.value(z).clone()
        };
        let base = run(&grid);
        let moved = run(&grid.permuted(&perm));
        prop_assert_eq!(moved.row(0), base.row(0));
        for (i, &p) in perm.iter().enumerate() {
            prop_assert_eq!(moved.row(i + 1), base.row(p + 1));
        }
    }
}

#[test]
fn identity_projection_copies_patches() {
    let img = random_tensor(&[4, 4, 2], 3);
    let grid = patchify(&img, (2, 2)).unwrap();
    let mut t = Tape::new();
    let p = t.constant(grid.patches().clone());
    let e = t.constant(Tensor::identity(8));
    let cls = t.constant(Tensor::zeros(&[8]));
    let pos = t.constant(Tensor::zeros(&[5, 8]));
    let z = embed(&mut t, p, e, cls, pos).unwrap();
    for i in 0..4 {
        assert_eq!(t.value(z).row(i + 1), grid.patches().row(i));
    }
}

#[test]
fn tubelet_order_matches_index_enumeration() {
    let (vt, vh, vw, c) = (4, 6, 4, 2);
    let (tt, th, tw) = (2, 3, 2);
    let video = Tensor::from_fn(&[vt, vh, vw, c], |i| i as f64);
    let g = tubeletize(&video, (tt, th, tw)).unwrap();
    assert_eq!(g.dims(), (2, 2, 2));
    let mut row = 0;
    for bt in 0..vt / tt {
        for bh in 0..vh / th {
            for bw in 0..vw / tw {
                let mut expect = Vec::new();
                for dt in 0..tt {
                    for dy in 0..th {
                        for dx in 0..tw {
                            for ch in 0..c {
                                expect.push(video.at(&[bt * tt + dt, bh * th + dy, bw * tw + dx, ch]));
                            }
                        }
                    }
                }
                assert_eq!(g.tubelets().row(row), expect.as_slice(), "tubelet {row}");
                row += 1;
            }
        }
    }
}

#[test]
fn constant_video_gives_identical_tokens() {
    let video = Tensor::full(&[4, 8, 8, 3], 0.3);
    let names = TokenizerParams::new("v");
    let mut p = ParamStore::new();
    names.register(&mut p, 2 * 4 * 4 * 3, 8, 5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    *p.get_mut("v.pos").unwrap() = Tensor::zeros(&[9, 5]);
    let g = tubeletize(&video, (2, 4, 4)).unwrap();
    let mut fw = Forward::eval(&p);
    let z = names.tokens(&mut fw, g.tubelets()).unwrap();
    let z = fw.tape.value(z);
    assert_eq!(z.shape(), &[9, 5]);
    for r in 2..9 {
        assert_eq!(z.row(r), z.row(1));
    }
}

fn encoder(dim: usize, layers: usize, dropout: f64, seed: u64) -> (Encoder, ParamStore) {
    let cfg = EncoderConfig {
        layers,
        dim,
        heads: 2,
        mlp_ratio: 2,
        dropout,
        readout: Readout::Cls,
    };
    let enc = Encoder::new("enc", cfg).unwrap();
    let mut p = ParamStore::new();
    enc.register(&mut p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    for (name, t) in p.iter_mut() {
        if name.contains("attn.w") || name.contains("mlp.w") {
            *t = Tensor::from_fn(t.shape(), |_| rng.random_range(-0.4..0.4));
        }
    }
    (enc, p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cls_readout_is_permutation_invariant(seed in any::<u64>(), n in 2usize..7) {
        let (enc, p) = encoder(8, 2, 0.0, seed % 1000);
        let x = random_tensor(&[n + 1, 8], seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut xp = x.data()[..8].to_vec();
        for &i in &perm {
            xp.extend_from_slice(x.row(i + 1));
        }
        let xp = Tensor::new(vec![n + 1, 8], xp).unwrap();
        let run = |x: &Tensor| {
            let mut fw = Forward::eval(&p);
            let v = fw.input(x.clone());
            let out = enc.encode(&mut fw, v, true).unwrap();
            (fw.tape.value(out.cls).clone(), fw.tape.value(out.tokens).clone(), out.attention.unwrap())
        };
        let (c1, t1, att) = run(&x);
        let (c2, t2, _) = run(&xp);
        prop_assert!(c1.max_abs_diff(&c2) < 1e-9);
        for (i, &src) in perm.iter().enumerate() {
            for (a, b) in t2.row(i + 1).iter().zip(t1.row(src + 1)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
        for m in att.layers.iter().flatten() {
            prop_assert_eq!(m.shape(), &[n + 1, n + 1]);
            for r in 0..=n {
                let s: f64 = m.row(r).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-6);
                prop_assert!(m.row(r).iter().all(|v| *v >= 0.0));
            }
        }
    }
}

#[test]
fn identity_layers_reduce_to_final_norm() {
    let cfg = EncoderConfig {
        layers: 3,
        dim: 6,
        heads: 3,
        mlp_ratio: 2,
        dropout: 0.0,
        readout: Readout::Cls,
    };
    let enc = Encoder::new("enc", cfg).unwrap();
    let mut p = ParamStore::new();
    enc.register(&mut p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let x = random_tensor(&[4, 6], 10);
    let mut fw = Forward::eval(&p);
    let v = fw.input(x.clone());
    let out = enc.encode(&mut fw, v, false).unwrap();
    let row = x.row(0);
    let mean = row.iter().sum::<f64>() / 6.0;
    let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0;
    let expect: Vec<f64> = row.iter().map(|v| (v - mean) / (var + LN_EPS).sqrt()).collect();
    for (a, b) in fw.tape.value(out.cls).data().iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn dropout_masks_are_seeded() {
    let (enc, p) = encoder(8, 1, 0.5, 4);
    let x = random_tensor(&[5, 8], 11);
    let run = |seed: u64| {
        let mut fw = Forward::train(&p, ChaCha8Rng::seed_from_u64(seed));
        let v = fw.input(x.clone());
        let (y, _) = enc.layer(&mut fw, 0, v, false).unwrap();
        fw.tape.value(y).clone()
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
    let eval = |_: ()| {
        let mut fw = Forward::eval(&p);
        let v = fw.input(x.clone());
        let (y, _) = enc.layer(&mut fw, 0, v, false).unwrap();
        fw.tape.value(y).clone()
    };
    assert_eq!(eval(()), eval(()));
}

fn macs(n: usize, class: FlopClass) -> u64 {
    let (enc, p) = encoder(16, 1, 0.0, 0);
    let mut fw = Forward::eval(&p);
    let v = fw.input(random_tensor(&[n, 16], 1));
    enc.encode(&mut fw, v, false).unwrap();
    fw.tape.flops().get(class)
}

#[test]
fn attention_macs_quadruple_mlp_doubles() {
    for n in [8, 16, 33] {
        assert_eq!(macs(2 * n, FlopClass::AttentionScore), 4 * macs(n, FlopClass::AttentionScore));
        assert_eq!(macs(2 * n, FlopClass::AttentionMix), 4 * macs(n, FlopClass::AttentionMix));
        assert_eq!(macs(2 * n, FlopClass::Mlp), 2 * macs(n, FlopClass::Mlp));
    }
    assert_eq!(macs(10, FlopClass::AttentionScore), 10 * 10 * 16);
}
