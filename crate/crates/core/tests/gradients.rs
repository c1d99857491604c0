//! Finite-difference checks of analytic gradients through each stage of
//! the model.

use avfuse_core::fusion::{multimodal_loss, FusionConfig, FusionHead, Modality};
use avfuse_core::gradcheck::{check_params, GradReport, STEP};
use avfuse_core::model::{Model, ModelConfig, ModelInput};
use avfuse_core::nn::Forward;
use avfuse_core::parallel::Execution;
use avfuse_core::params::{normal_tensor, ParamStore};
use avfuse_core::tensor::{Tensor, Var};
use avfuse_core::tokenizer::{patchify, TokenizerParams};
use avfuse_core::transformer::{Encoder, EncoderConfig, Readout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;

/// Worst relative error between backprop and central differences for the
/// scalar that `build` computes.
fn check<F>(p: &ParamStore, build: F) -> GradReport
where
    F: Fn(&mut Forward<'_>) -> Var + Sync,
{
    let mut fw = Forward::eval(p);
    let loss = build(&mut fw);
    let g = fw.backward(loss).unwrap();
    check_params(p, &g, STEP, Execution::Parallel, |q| {
        let mut fw = Forward::eval(q);
        let loss = build(&mut fw);
        fw.tape.value(loss).data()[0]
    })
}

/// Replaces every parameter with a draw of the given scale so no gradient
/// is structurally tiny (fresh models have zero output projections).
fn randomize(params: &mut ParamStore, std: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, t) in params.iter_mut() {
        let fresh = normal_tensor(t.shape(), std, &mut rng);
        *t = if name.ends_with("gain") {
            Tensor::from_fn(t.shape(), |i| 1.0 + fresh.data()[i])
        } else {
            fresh
        };
    }
}

fn uniform(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn encoder_cfg(layers: usize, dim: usize) -> EncoderConfig {
    EncoderConfig {
        layers,
        dim,
        heads: 2,
        mlp_ratio: 2,
        dropout: 0.0,
        readout: Readout::Cls,
    }
}

#[test]
fn mhsa_five_tokens() {
    let enc = Encoder::new("e", encoder_cfg(1, 8)).unwrap();
    let mut p = ParamStore::new();
    enc.register(&mut p, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    randomize(&mut p, 0.5, 1);
    let x = uniform(&[5, 8], &mut ChaCha8Rng::seed_from_u64(2));
    let w = uniform(&[5, 8], &mut ChaCha8Rng::seed_from_u64(20));
    let r = check(&p, |fw| {
        let xv = fw.input(x.clone());
        let (y, _) = enc.mhsa(fw, 0, xv, false).unwrap();
        let w = fw.input(w.clone());
        let y = fw.tape.mul(y, w).unwrap();
        
        fw.tape.sum(y)
    });
    assert!(r.max_rel_error() < TOL, "{:?}", r.worst());
}

#[test]
fn encoder_two_layers() {
    let enc = Encoder::new("e", encoder_cfg(2, 16)).unwrap();
    let mut p = ParamStore::new();
    enc.register(&mut p, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    randomize(&mut p, 0.3, 3);
    let x = uniform(&[5, 16], &mut ChaCha8Rng::seed_from_u64(4));
    let target = uniform(&[1, 16], &mut ChaCha8Rng::seed_from_u64(5));
    let r = check(&p, |fw| {
        let xv = fw.input(x.clone());
        let out = enc.encode(fw, xv, false).unwrap();
        let t = fw.input(target.clone());
        let y = fw.tape.mul(out.cls, t).unwrap();
        
        fw.tape.sum(y)
    });
    assert!(r.max_rel_error() < TOL, "{:?}", r.worst());
}

#[test]
fn patch_embedding_projection() {
    let names = TokenizerParams::new("t");
    let mut p = ParamStore::new();
    names.register(&mut p, 12, 4, 6, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    randomize(&mut p, 0.5, 6);
    let img = uniform(&[4, 4, 3], &mut ChaCha8Rng::seed_from_u64(7));
    let grid = patchify(&img, (2, 2)).unwrap();
    let w = uniform(&[5, 6], &mut ChaCha8Rng::seed_from_u64(8));
    let r = check(&p, |fw| {
        let z = names.tokens(fw, grid.patches()).unwrap();
        let z = fw.tape.gelu(z);
        let wv = fw.input(w.clone());
        let y = fw.tape.mul(z, wv).unwrap();
        
        fw.tape.sum(y)
    });
    assert!(r.max_rel_error() < TOL, "{:?}", r.worst());
}

#[test]
fn fusion_cross_entropy() {
    let head = FusionHead::new(&FusionConfig::default(), 6, 3, Modality::Both).unwrap();
    let mut p = ParamStore::new();
    head.register(&mut p, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    randomize(&mut p, 0.5, 9);
    let a = uniform(&[1, 6], &mut ChaCha8Rng::seed_from_u64(10));
    let v = uniform(&[1, 6], &mut ChaCha8Rng::seed_from_u64(11));
    let r = check(&p, |fw| {
        let (av, vv) = (fw.input(a.clone()), fw.input(v.clone()));
        let out = head.fuse(fw, Some(av), Some(vv)).unwrap();
        
        multimodal_loss(fw, &out, 2, 0.5, 0.5).unwrap()
    });
    assert!(r.max_rel_error() < TOL, "{:?}", r.worst());
}

/// Desk-scale configuration of the full pipeline used by the end-to-end
/// check: two 16×16 audio patches per side, a 2×16×16 clip.
pub fn desk_config() -> ModelConfig {
    ModelConfig {
        num_classes: 3,
        image_size: 16,
        patch_size: 8,
        video_frames: 2,
        frame_size: 16,
        tubelet: [2, 8, 8],
        encoder: EncoderConfig {
            layers: 2,
            dim: 16,
            heads: 2,
            mlp_ratio: 4,
            dropout: 0.0,
            readout: Readout::Cls,
        },
        ..ModelConfig::default()
    }
}

#[test]
fn full_pipeline() {
    let model = Model::new(desk_config()).unwrap();
    let mut p = model.init(0).unwrap();
    randomize(&mut p, 0.3, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let input = ModelInput {
        audio: vec![uniform(&[16, 16, 3], &mut rng)],
        video: uniform(&[2, 16, 16, 3], &mut rng),
    };
    let r = check(&p, |fw| {
        let out = model.forward(fw, &input, false).unwrap();
        
        multimodal_loss(fw, &out.fusion, 1, 0.5, 0.5).unwrap()
    });
    assert!(r.max_rel_error() < TOL, "{:?}", r.worst());
}
