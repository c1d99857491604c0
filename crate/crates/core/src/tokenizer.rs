//! Patch and tubelet tokenization.
//!
//! Images are `[H, W, C]` tensors and videos `[T, H, W, C]`. A patch is
//! flattened in `(y, x, c)` order and patches are enumerated row-major over
//! the grid; a tubelet is flattened in `(dt, dy, dx, c)` order and tubelets
//! are enumerated time-major, then row-major in space.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Forward;
use crate::params::{normal_tensor, ParamStore};
use crate::tensor::{FlopClass, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    patches: Tensor,
    grid: (usize, usize),
    patch_size: (usize, usize),
    channels: usize,
}

impl PatchGrid {
    /// `[N, h·w·c]` matrix of flattened patches.
    pub fn patches(&self) -> &Tensor {
        &self.patches
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn patch_size(&self) -> (usize, usize) {
        self.patch_size
    }

    pub fn count(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    pub fn patch_len(&self) -> usize {
        self.patch_size.0 * self.patch_size.1 * self.channels
    }

    /// Returns a grid whose patches are reordered so that new patch `i` is
    /// old patch `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> PatchGrid {
        assert_eq!(perm.len(), self.count());
        let len = self.patch_len();
        let mut data = Vec::with_capacity(self.patches.len());
        for &p in perm {
            data.extend_from_slice(self.patches.row(p));
        }
        PatchGrid {
            patches: Tensor::new(vec![perm.len(), len], data).expect("same layout"),
            ..self.clone()
        }
    }
}

fn image_dims(image: &Tensor) -> Result<(usize, usize, usize)> {
    match *image.shape() {
        [h, w, c] => Ok((h, w, c)),
        [h, w] => Ok((h, w, 1)),
        ref s => Err(Error::Config(format!(
            "expected an image of shape [H, W, C], got {s:?}"
        ))),
    }
}

fn check_divisible(what: &str, size: &[usize], part: &[usize]) -> Result<()> {
    if size.iter().zip(part).any(|(s, p)| *p == 0 || s % p != 0) {
        return Err(Error::Config(format!(
            "{what} size {part:?} does not evenly divide input size {size:?}"
        )));
    }
    Ok(())
}

/// Splits an image into non-overlapping `h × w` patches.
pub fn patchify(image: &Tensor, patch_size: (usize, usize)) -> Result<PatchGrid> {
    let (ih, iw, c) = image_dims(image)?;
    let (ph, pw) = patch_size;
    check_divisible("patch", &[ih, iw], &[ph, pw])?;
    let (rows, cols) = (ih / ph, iw / pw);
    let src = image.data();
    let mut data = Vec::with_capacity(src.len());
    for gr in 0..rows {
        for gc in 0..cols {
            for y in 0..ph {
                let start = ((gr * ph + y) * iw + gc * pw) * c;
                data.extend_from_slice(&src[start..start + pw * c]);
            }
        }
    }
    Ok(PatchGrid {
        patches: Tensor::new(vec![rows * cols, ph * pw * c], data)?,
        grid: (rows, cols),
        patch_size,
        channels: c,
    })
}

/// Reassembles the `[H, W, C]` image a grid was cut from.
pub fn unpatchify(grid: &PatchGrid) -> Tensor {
    let (rows, cols) = grid.grid;
    let (ph, pw) = grid.patch_size;
    let c = grid.channels;
    let iw = cols * pw;
    let mut out = vec![0.0; rows * ph * iw * c];
    for gr in 0..rows {
        for gc in 0..cols {
            let patch = grid.patches.row(gr * cols + gc);
            for y in 0..ph {
                let dst = ((gr * ph + y) * iw + gc * pw) * c;
                out[dst..dst + pw * c].copy_from_slice(&patch[y * pw * c..(y + 1) * pw * c]);
            }
        }
    }
    Tensor::new(vec![rows * ph, iw, c], out).expect("consistent geometry")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeletGrid {
    tubelets: Tensor,
    dims: (usize, usize, usize),
    tubelet_size: (usize, usize, usize),
}

impl TubeletGrid {
    /// `[n_t·n_h·n_w, t·h·w·c]` matrix of flattened tubelets.
    pub fn tubelets(&self) -> &Tensor {
        &self.tubelets
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn tubelet_size(&self) -> (usize, usize, usize) {
        self.tubelet_size
    }

    pub fn count(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }
}

/// Cuts a `[T, H, W, C]` video into non-overlapping `t × h × w` tubelets.
pub fn tubeletize(video: &Tensor, tubelet_size: (usize, usize, usize)) -> Result<TubeletGrid> {
    let (vt, vh, vw, c) = match *video.shape() {
        [t, h, w, c] => (t, h, w, c),
        ref s => {
            return Err(Error::Config(format!(
                "expected a video of shape [T, H, W, C], got {s:?}"
            )))
        }
    };
    let (tt, th, tw) = tubelet_size;
    check_divisible("tubelet", &[vt, vh, vw], &[tt, th, tw])?;
    let (nt, nh, nw) = (vt / tt, vh / th, vw / tw);
    let src = video.data();
    let mut data = Vec::with_capacity(src.len());
    for bt in 0..nt {
        for bh in 0..nh {
            for bw in 0..nw {
                for dt in 0..tt {
                    for dy in 0..th {
                        let start = (((bt * tt + dt) * vh + bh * th + dy) * vw + bw * tw) * c;
                        data.extend_from_slice(&src[start..start + tw * c]);
                    }
                }
            }
        }
    }
    Ok(TubeletGrid {
        tubelets: Tensor::new(vec![nt * nh * nw, tt * th * tw * c], data)?,
        dims: (nt, nh, nw),
        tubelet_size,
    })
}

/// `[cls; patches·E] + pos` on the tape. `cls` is `[d]`, `pos` `[N+1, d]`.
pub fn embed(tape: &mut Tape, patches: Var, e: Var, cls: Var, pos: Var) -> Result<Var> {
    let projected = tape.matmul_as(FlopClass::Embedding, patches, e)?;
    let tokens = tape.concat_rows(&[cls, projected])?;
    Ok(tape.add(tokens, pos)?)
}

/// Parameter names of one tokenizer, all under a common prefix.
#[derive(Debug, Clone)]
pub struct TokenizerParams {
    pub projection: String,
    pub cls: String,
    pub pos: String,
}

impl TokenizerParams {
    pub fn new(prefix: &str) -> Self {
        Self {
            projection: format!("{prefix}.projection"),
            cls: format!("{prefix}.cls"),
            pos: format!("{prefix}.pos"),
        }
    }

    /// Registers `E: [input_len, d]`, `cls: [d]` (zeros) and
    /// `pos: [tokens + 1, d]`.
    pub fn register(
        &self,
        params: &mut ParamStore,
        input_len: usize,
        tokens: usize,
        d: usize,
        rng: &mut impl Rng,
    ) -> Result<()> {
        params.insert(&self.projection, normal_tensor(&[input_len, d], 0.02, rng))?;
        params.insert(&self.cls, Tensor::zeros(&[d]))?;
        params.insert(&self.pos, normal_tensor(&[tokens + 1, d], 0.02, rng))?;
        Ok(())
    }

    /// Embeds an `[N, input_len]` matrix of flattened patches or tubelets.
    pub fn tokens(&self, fw: &mut Forward<'_>, flat: &Tensor) -> Result<Var> {
        let x = fw.input(flat.clone());
        let e = fw.param(&self.projection)?;
        let cls = fw.param(&self.cls)?;
        let pos = fw.param(&self.pos)?;
        embed(&mut fw.tape, x, e, cls, pos)
    }
}

/// Tubelet-tokenizes a video with the parameters named by `names`.
pub fn tubelet_tokenize(
    fw: &mut Forward<'_>,
    video: &Tensor,
    tubelet_size: (usize, usize, usize),
    names: &TokenizerParams,
) -> Result<Var> {
    let grid = tubeletize(video, tubelet_size)?;
    names.tokens(fw, grid.tubelets())
}
