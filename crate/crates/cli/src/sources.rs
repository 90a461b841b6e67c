//! Argument parsing helpers and noise sources shared by the subcommands.

use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use stbn::noise_zoo::{blue_cube, golden_ratio_animate, independent_2d_stack, white_cube};
use stbn::{finalize, generate_with, AxisGroup, Finalize, GenerateOptions, MaskSpec, NoiseCube, Observer, Progress, Provenance};

use crate::container::{self, Contents};

/// `64x64x16` style extents.
pub fn parse_size(s: &str) -> Result<Vec<usize>> {
    s.split('x')
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("bad extent {p:?} in {s:?}")))
        .collect()
}

/// Axis letters `x y z w`, with `t` naming the last axis, or decimal indices.
pub fn parse_axis(c: char, dims: usize) -> Result<usize> {
    let a = match c {
        'x' => 0,
        'y' => 1,
        'z' => 2,
        'w' => 3,
        't' => dims.saturating_sub(1),
        d if d.is_ascii_digit() => d as usize - '0' as usize,
        other => bail!("unknown axis {other:?}"),
    };
    if a >= dims {
        bail!("axis {c:?} outside {dims} dimensions");
    }
    Ok(a)
}

pub fn parse_axes(s: &str, dims: usize) -> Result<Vec<usize>> {
    s.chars().map(|c| parse_axis(c, dims)).collect()
}

/// Axis pair such as `xy` or `zy`.
pub fn parse_plane(s: &str, dims: usize) -> Result<(usize, usize)> {
    match parse_axes(s, dims)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => bail!("plane {s:?} must name two axes"),
    }
}

/// Builds a `MaskSpec` from `--groups xy,z`, per-group sigmas and non-wrapping axes.
pub fn build_spec(sizes: Vec<usize>, groups: &str, sigmas: &[f64], open: &str) -> Result<MaskSpec> {
    let dims = sizes.len();
    let group_axes: Vec<Vec<usize>> = groups
        .split(',')
        .map(|g| parse_axes(g.trim(), dims))
        .collect::<Result<_>>()?;
    if sigmas.len() != 1 && sigmas.len() != group_axes.len() {
        bail!(
            "{} sigma values for {} groups",
            sigmas.len(),
            group_axes.len()
        );
    }
    let open = parse_axes(open, dims)?;
    let groups = group_axes
        .into_iter()
        .enumerate()
        .map(|(i, axes)| {
            let sigma = sigmas[if sigmas.len() == 1 { 0 } else { i }];
            let wrap = axes.iter().map(|a| !open.contains(a)).collect();
            AxisGroup::with_toroidal(axes, sigma, wrap)
        })
        .collect();
    Ok(MaskSpec::new(sizes, groups)?)
}

/// One `progress phase=... done=... total=...` line per report on stderr.
pub struct StderrProgress;

impl Observer for StderrProgress {
    fn on_progress(&mut self, p: &Progress) {
        eprintln!("progress phase={} done={} total={}", p.phase.name(), p.done, p.total);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NoiseSource {
    Stbn,
    Blue3d,
    Stack,
    GoldenRatio,
    White,
    File(String),
}

impl FromStr for NoiseSource {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "stbn" => NoiseSource::Stbn,
            "blue3d" => NoiseSource::Blue3d,
            "stack" | "2dbn" => NoiseSource::Stack,
            "gr" | "golden" => NoiseSource::GoldenRatio,
            "white" => NoiseSource::White,
            path => NoiseSource::File(path.to_string()),
        })
    }
}

pub fn load_cube(path: &Path) -> Result<NoiseCube> {
    let c = container::read_file(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(match &c.contents {
        Contents::Mask(m) => NoiseCube::from_mask(m, Provenance::Imported(path.display().to_string())),
        Contents::Ranks(r) => NoiseCube::from_ranks(r, Provenance::Imported(path.display().to_string())),
    })
}

/// Noise cube of extents `sizes` (`w x h x t`) for the named source.
pub fn noise_cube(source: &NoiseSource, sizes: &[usize], seed: u64, progress: bool) -> Result<NoiseCube> {
    let [w, h, t] = match sizes {
        [w, h, t] => [*w, *h, *t],
        [w, h] => [*w, *h, 1],
        _ => bail!("noise size must be WxH or WxHxT"),
    };
    let mut quiet = ();
    let mut loud = StderrProgress;
    let obs: &mut dyn Observer = if progress { &mut loud } else { &mut quiet };
    let opts = GenerateOptions::default();
    Ok(match source {
        NoiseSource::File(p) => load_cube(Path::new(p))?,
        NoiseSource::White => white_cube(&[w, h, t], seed),
        NoiseSource::Stack => independent_2d_stack(w, h, t, seed)?,
        NoiseSource::Stbn => {
            let spec = MaskSpec::spatiotemporal(w, h, t)?.with_seed(seed);
            NoiseCube::from_ranks(&generate_with(&spec, opts, obs)?, Provenance::Stbn)
        }
        NoiseSource::Blue3d => {
            let spec = MaskSpec::isotropic(vec![w, h, t], stbn::grid::DEFAULT_SIGMA)?.with_seed(seed);
            blue_cube(&spec, Provenance::Blue3d)?
        }
        NoiseSource::GoldenRatio => {
            let spec = MaskSpec::isotropic(vec![w, h], stbn::grid::DEFAULT_SIGMA)?.with_seed(seed);
            let base = finalize(&generate_with(&spec, opts, obs)?, Finalize::Float)?;
            golden_ratio_animate(&base, t)?
        }
    })
}
