//! Baseline noises that spatiotemporal masks are compared against.
//!
//! Isotropic 3D blue noise has no helper of its own: it is
//! [`generate`](crate::generate) with [`MaskSpec::isotropic`] over all
//! three axes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::{finalize, generate, Finalize, Mask, RankMask};
use crate::grid::{MaskSpec, DEFAULT_SIGMA};

/// `(sqrt(5) - 1) / 2`, the fractional golden ratio.
pub const GOLDEN_RATIO_FRACT: f64 = 0.618_033_988_749_894_8;

/// Default tile edge for [`hb_retarget`].
pub const DEFAULT_RETARGET_PATCH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Spatiotemporal blue noise, groups `{x, y}` and `{t}`.
    Stbn,
    /// One group over all axes.
    Blue3d,
    /// Independent 2D masks stacked over time.
    Blue2dStack,
    /// A 2D mask animated by the golden-ratio recurrence.
    GoldenRatio,
    White,
    /// Loaded from an external file.
    Imported(String),
}

impl Provenance {
    pub fn label(&self) -> &str {
        match self {
            Provenance::Stbn => "stbn",
            Provenance::Blue3d => "3dbn",
            Provenance::Blue2dStack => "2dbn",
            Provenance::GoldenRatio => "gr",
            Provenance::White => "white",
            Provenance::Imported(name) => name,
        }
    }
}

/// Scalar noise over a grid, values in `[0, 1)`, axis 0 fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCube {
    sizes: Vec<usize>,
    values: Vec<f64>,
    provenance: Provenance,
}

impl NoiseCube {
    pub fn new(sizes: Vec<usize>, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let len: usize = sizes.iter().product();
        if sizes.is_empty() || sizes.contains(&0) || len != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for sizes {sizes:?}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("noise value {v} outside [0, 1)")));
        }
        Ok(Self {
            sizes,
            values,
            provenance,
        })
    }

    pub fn from_mask(mask: &Mask, provenance: Provenance) -> Self {
        Self {
            sizes: mask.spec().sizes().to_vec(),
            values: mask.unit_values(),
            provenance,
        }
    }

    /// Float-finalized values of a rank mask.
    pub fn from_ranks(ranks: &RankMask, provenance: Provenance) -> Self {
        let n = ranks.len() as f64;
        Self {
            sizes: ranks.spec().sizes().to_vec(),
            values: ranks
                .ranks()
                .iter()
                .map(|&r| (r as f64 + 0.5) / n)
                .collect(),
            provenance,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pixels per frame: product of every extent but the last.
    pub fn frame_len(&self) -> usize {
        if self.sizes.len() < 2 {
            return self.values.len();
        }
        self.sizes[..self.sizes.len() - 1].iter().product()
    }

    /// Extent of the last axis, taken as time.
    pub fn frames(&self) -> usize {
        if self.sizes.len() < 2 {
            1
        } else {
            self.sizes[self.sizes.len() - 1]
        }
    }

    /// Frame `t` of the last axis, wrapping.
    pub fn frame(&self, t: usize) -> &[f64] {
        let len = self.frame_len();
        let t = t % self.frames();
        &self.values[t * len..(t + 1) * len]
    }
}

/// I.i.d. uniform values from `ChaCha8Rng::seed_from_u64(seed)`.
pub fn white_cube(sizes: &[usize], seed: u64) -> NoiseCube {
    let len: usize = sizes.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..len).map(|_| rng.random::<f64>()).collect();
    NoiseCube {
        sizes: sizes.to_vec(),
        values,
        provenance: Provenance::White,
    }
}

/// Seed for the `index`-th member of a family derived from `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `frames` independently seeded `width x height` blue noise masks, stacked.
pub fn independent_2d_stack(width: usize, height: usize, frames: usize, seed: u64) -> Result<NoiseCube> {
    let masks: Vec<RankMask> = (0..frames)
        .into_par_iter()
        .map(|t| {
            let spec = MaskSpec::isotropic(vec![width, height], DEFAULT_SIGMA)?
                .with_seed(derive_seed(seed, t as u64));
            generate(&spec)
        })
        .collect::<Result<_>>()?;
    let n = (width * height) as f64;
    let values = masks
        .iter()
        .flat_map(|m| m.ranks().iter().map(move |&r| (r as f64 + 0.5) / n))
        .collect();
    Ok(NoiseCube {
        sizes: vec![width, height, frames],
        values,
        provenance: Provenance::Blue2dStack,
    })
}

fn fract(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Frame `n` is `fract(base + n * GOLDEN_RATIO_FRACT)`.
pub fn golden_ratio_animate(base: &Mask, frames: usize) -> Result<NoiseCube> {
    let sizes = base.spec().sizes();
    if sizes.len() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "golden-ratio animation needs a 2D mask, got {} axes",
            sizes.len()
        )));
    }
    let sizes = vec![sizes[0], sizes[1], frames];
    Ok(golden_ratio_values(&base.unit_values(), sizes))
}

fn golden_ratio_values(base: &[f64], sizes: Vec<usize>) -> NoiseCube {
    let frames = sizes[2];
    let values = (0..frames)
        .flat_map(|n| {
            base.iter()
                .map(move |&b| fract(b + n as f64 * GOLDEN_RATIO_FRACT))
        })
        .collect();
    NoiseCube {
        sizes,
        values,
        provenance: Provenance::GoldenRatio,
    }
}

/// Real root of `g^3 = g + 1`.
pub fn plastic_constant() -> f64 {
    let r = 69f64.sqrt();
    ((9.0 + r) / 18.0).cbrt() + ((9.0 - r) / 18.0).cbrt()
}

/// First `n` points of the R2 sequence, starting at the origin.
pub fn r2_offsets(n: usize) -> Vec<[f64; 2]> {
    let g = plastic_constant();
    let (a1, a2) = (1.0 / g, 1.0 / (g * g));
    (0..n)
        .map(|k| [fract(k as f64 * a1), fract(k as f64 * a2)])
        .collect()
}

/// Integer texel shift for the `k`-th R2 offset on a `width x height` texture.
pub fn r2_pixel_shift(k: usize, width: usize, height: usize) -> (usize, usize) {
    let [ox, oy] = r2_offsets(k + 1)[k];
    (
        ((ox * width as f64) as usize).min(width - 1),
        ((oy * height as f64) as usize).min(height - 1),
    )
}

/// Ordinal retargeting of per-pixel seeds.
///
/// Arrays are `width x height x frames`, axis 0 fastest. Inside each
/// `patch` tile the seed whose rendered value has rank `r` moves to the
/// pixel whose target value has rank `r`. Ties sort by pixel index.
pub fn hb_retarget(
    seeds: &[f64],
    rendered: &[f64],
    target: &[f64],
    shape: (usize, usize, usize),
    patch: (usize, usize, usize),
) -> Result<Vec<f64>> {
    let (w, h, t) = shape;
    let len = w * h * t;
    if seeds.len() != len || rendered.len() != len || target.len() != len {
        return Err(Error::ShapeMismatch(format!(
            "seeds {}, rendered {}, target {} for shape {w}x{h}x{t}",
            seeds.len(),
            rendered.len(),
            target.len()
        )));
    }
    let (px, py, pt) = patch;
    if px == 0 || py == 0 || pt == 0 || w % px != 0 || h % py != 0 || t % pt != 0 {
        return Err(Error::ShapeMismatch(format!(
            "patch {px}x{py}x{pt} does not tile {w}x{h}x{t}"
        )));
    }
    let mut out = vec![0.0; len];
    let mut tile = Vec::with_capacity(px * py * pt);
    let mut by_rendered = Vec::with_capacity(px * py * pt);
    for tz in (0..t).step_by(pt) {
        for ty in (0..h).step_by(py) {
            for tx in (0..w).step_by(px) {
                tile.clear();
                for z in tz..tz + pt {
                    for y in ty..ty + py {
                        for x in tx..tx + px {
                            tile.push(x + w * (y + h * z));
                        }
                    }
                }
                by_rendered.clone_from(&tile);
                by_rendered.sort_by(|&a, &b| rendered[a].total_cmp(&rendered[b]).then(a.cmp(&b)));
                tile.sort_by(|&a, &b| target[a].total_cmp(&target[b]).then(a.cmp(&b)));
                for (&dst, &src) in tile.iter().zip(&by_rendered) {
                    out[dst] = seeds[src];
                }
            }
        }
    }
    Ok(out)
}

/// Blue-noise rank mask finalized to floats; a convenience for comparisons.
pub fn blue_cube(spec: &MaskSpec, provenance: Provenance) -> Result<NoiseCube> {
    let ranks = generate(spec)?;
    Ok(NoiseCube::from_mask(&finalize(&ranks, Finalize::Float)?, provenance))
}
