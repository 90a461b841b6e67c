//! Small rendering experiments driven by noise textures: k-bit dithering,
//! stochastic transparency and single scattering in a procedural volume.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::DEFAULT_EMA_ALPHA;
use crate::error::{Error, Result};
use crate::noise_zoo::{r2_pixel_shift, NoiseCube};

/// Primary march steps when none are given.
pub const DEFAULT_STEPS: usize = 64;
/// Shadow march steps when none are given.
pub const DEFAULT_SHADOW_STEPS: usize = 32;

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{what}: {a} vs {b} pixels")));
    }
    Ok(())
}

/// `clamp(floor(v * L + n), 0, L) / L` with `L = 2^k - 1`.
pub fn dither_kbit(image: &[f64], noise: &[f64], k: u32) -> Result<Vec<f64>> {
    check_len(image.len(), noise.len(), "image and noise")?;
    if !(1..=8).contains(&k) {
        return Err(Error::OutOfRange(format!("{k} bits, expected 1..=8")));
    }
    let levels = ((1u32 << k) - 1) as f64;
    Ok(image
        .par_iter()
        .zip(noise)
        .map(|(&v, &n)| (v * levels + n).floor().clamp(0.0, levels) / levels)
        .collect())
}

/// Reads `noise` at `(x, y)` shifted by the `k`-th R2 texel offset, wrapping.
pub fn shifted_read(noise: &[f64], width: usize, height: usize, x: usize, y: usize, k: usize) -> f64 {
    let (dx, dy) = r2_pixel_shift(k, width, height);
    noise[(x + dx) % width + width * ((y + dy) % height)]
}

/// Dithers interleaved RGB; channel `c` reads the one noise texture at R2 offset `c`.
pub fn dither_rgb(image: &[f64], noise: &[f64], width: usize, height: usize, k: u32) -> Result<Vec<f64>> {
    check_len(noise.len(), width * height, "noise and dimensions")?;
    check_len(image.len(), 3 * width * height, "RGB image and dimensions")?;
    let channel_noise: Vec<f64> = (0..width * height * 3)
        .map(|i| {
            let p = i / 3;
            shifted_read(noise, width, height, p % width, p / width, i % 3)
        })
        .collect();
    dither_kbit(image, &channel_noise, k)
}

/// Dithers interleaved RGB with a separate noise texture per channel.
pub fn dither_rgb_masks(image: &[f64], noise: [&[f64]; 3], k: u32) -> Result<Vec<f64>> {
    let pixels = image.len() / 3;
    check_len(image.len(), 3 * pixels, "RGB image")?;
    for n in noise {
        check_len(n.len(), pixels, "channel noise")?;
    }
    let channel_noise: Vec<f64> = (0..pixels * 3).map(|i| noise[i % 3][i / 3]).collect();
    dither_kbit(image, &channel_noise, k)
}

/// Keeps a sample of coverage `alpha` when `noise < alpha`.
pub fn stochastic_alpha(alpha: f64, noise: f64) -> bool {
    noise < alpha
}

/// Alpha-tested composite: the foreground where the sample is kept, the background elsewhere.
pub fn alpha_composite(foreground: &[f64], background: &[f64], alpha: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    check_len(foreground.len(), background.len(), "foreground and background")?;
    check_len(foreground.len(), alpha.len(), "foreground and alpha")?;
    check_len(foreground.len(), noise.len(), "foreground and noise")?;
    Ok((0..foreground.len())
        .into_par_iter()
        .map(|i| {
            if stochastic_alpha(alpha[i], noise[i]) {
                foreground[i]
            } else {
                background[i]
            }
        })
        .collect())
}

/// `alpha * foreground + (1 - alpha) * background`.
pub fn alpha_reference(foreground: &[f64], background: &[f64], alpha: &[f64]) -> Vec<f64> {
    foreground
        .iter()
        .zip(background)
        .zip(alpha)
        .map(|((f, b), a)| a * f + (1.0 - a) * b)
        .collect()
}

/// Horizontal grayscale ramp from 0 to 1 over pixel centres.
pub fn gray_ramp(width: usize, height: usize) -> Vec<f64> {
    (0..width * height)
        .map(|i| ((i % width) as f64 + 0.5) / width as f64)
        .collect()
}

/// Isotropic Gaussian density bump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: [f64; 3],
    pub radius: f64,
    pub amplitude: f64,
}

/// Participating medium filling the unit cube `[0, 1]^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeScene {
    pub bumps: Vec<Bump>,
    /// Constant density added everywhere inside the cube.
    pub base_density: f64,
    pub albedo: f64,
    /// Unit vector pointing toward the light.
    pub light_dir: [f64; 3],
    pub light_intensity: f64,
    /// Multiplies density into extinction per unit length.
    pub extinction: f64,
    /// Radiance of rays that leave the volume.
    pub background: f64,
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn along(o: [f64; 3], d: [f64; 3], t: f64) -> [f64; 3] {
    [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]]
}

impl VolumeScene {
    /// Three to five bumps placed from `seed`.
    pub fn procedural(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = rng.random_range(3..=5);
        let bumps = (0..count)
            .map(|_| Bump {
                center: [
                    rng.random_range(0.25..0.75),
                    rng.random_range(0.25..0.75),
                    rng.random_range(0.25..0.75),
                ],
                radius: rng.random_range(0.08..0.2),
                amplitude: rng.random_range(2.0..8.0),
            })
            .collect();
        Self {
            bumps,
            ..Self::homogeneous(0.0)
        }
    }

    pub fn homogeneous(density: f64) -> Self {
        Self {
            bumps: Vec::new(),
            base_density: density,
            albedo: 0.8,
            light_dir: normalize([0.3, 0.8, -0.5]),
            light_intensity: 1.0,
            extinction: 1.0,
            background: 0.0,
        }
    }

    pub fn with_light(mut self, toward_light: [f64; 3]) -> Self {
        self.light_dir = normalize(toward_light);
        self
    }

    pub fn with_background(mut self, background: f64) -> Self {
        self.background = background;
        self
    }

    /// Density at `p`; zero outside the unit cube.
    pub fn density(&self, p: [f64; 3]) -> f64 {
        if p.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return 0.0;
        }
        self.base_density
            + self
                .bumps
                .iter()
                .map(|b| {
                    let d2: f64 = (0..3).map(|a| (p[a] - b.center[a]).powi(2)).sum();
                    b.amplitude * (-d2 / (2.0 * b.radius * b.radius)).exp()
                })
                .sum::<f64>()
    }
}

/// Parameter interval `[t0, t1]`, `t0 >= 0`, where the ray is inside the unit cube.
pub fn unit_cube_interval(origin: [f64; 3], dir: [f64; 3]) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        if dir[a] == 0.0 {
            if !(0.0..=1.0).contains(&origin[a]) {
                return None;
            }
            continue;
        }
        let (mut lo, mut hi) = ((0.0 - origin[a]) / dir[a], (1.0 - origin[a]) / dir[a]);
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        t0 = t0.max(lo);
        t1 = t1.min(hi);
    }
    (t1 > t0).then_some((t0, t1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    /// March step at which the stop rule fired.
    pub index: usize,
    pub position: [f64; 3],
    /// Ray parameter of `position`.
    pub t: f64,
}

/// Marches `p_s = o + (s (t_max - t_min) / n + t_min) w` for `s = 0..n`,
/// accumulating `f_s = density * step * extinction`, and stops at the
/// first `s` with `sum >= -ln(1 - xi)` and `sum > 0`.
pub fn free_flight(
    scene: &VolumeScene,
    origin: [f64; 3],
    dir: [f64; 3],
    t_min: f64,
    t_max: f64,
    n: usize,
    xi: f64,
) -> Option<Collision> {
    if n == 0 || t_max.is_nan() || t_max <= t_min || xi.is_nan() || xi >= 1.0 {
        return None;
    }
    let step = (t_max - t_min) / n as f64;
    let target = -(1.0 - xi).ln();
    let mut sum = 0.0;
    for s in 0..n {
        let t = s as f64 * step + t_min;
        let p = along(origin, dir, t);
        sum += scene.density(p) * step * scene.extinction;
        if sum > 0.0 && sum >= target {
            return Some(Collision { index: s, position: p, t });
        }
    }
    None
}

/// `exp(-sum f)` over `m` steps from `p` to the cube boundary toward the light,
/// samples placed at `(s + jitter)` step lengths.
pub fn shadow_transmittance(scene: &VolumeScene, p: [f64; 3], m: usize, jitter: f64) -> f64 {
    let Some((_, exit)) = unit_cube_interval(p, scene.light_dir) else {
        return 1.0;
    };
    if m == 0 {
        return 1.0;
    }
    let step = exit / m as f64;
    let depth: f64 = (0..m)
        .map(|s| scene.density(along(p, scene.light_dir, (s as f64 + jitter) * step)) * step * scene.extinction)
        .sum();
    (-depth).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: [f64; 3],
    pub dir: [f64; 3],
}

impl Ray {
    pub fn new(origin: [f64; 3], dir: [f64; 3]) -> Self {
        Self {
            origin,
            dir: normalize(dir),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarchSteps {
    pub primary: usize,
    pub shadow: usize,
}

impl Default for MarchSteps {
    fn default() -> Self {
        Self {
            primary: DEFAULT_STEPS,
            shadow: DEFAULT_SHADOW_STEPS,
        }
    }
}

/// One single-scattering estimate: `light * T * albedo` at the sampled
/// collision, the background when the ray escapes.
pub fn single_scatter_pixel(scene: &VolumeScene, ray: &Ray, xi: f64, shadow_jitter: f64, steps: MarchSteps) -> f64 {
    let Some((t0, t1)) = unit_cube_interval(ray.origin, ray.dir) else {
        return scene.background;
    };
    match free_flight(scene, ray.origin, ray.dir, t0, t1, steps.primary, xi) {
        Some(hit) => {
            scene.light_intensity * shadow_transmittance(scene, hit.position, steps.shadow, shadow_jitter) * scene.albedo
        }
        None => scene.background,
    }
}

/// Orthographic view along +z: pixel `(x, y)` shoots from `((x + 0.5) / w, (y + 0.5) / h, -1)`.
///
/// The collision draw reads `noise` directly; the shadow jitter reads it at R2 offset 1.
pub fn render_volume(scene: &VolumeScene, width: usize, height: usize, noise: &[f64], steps: MarchSteps) -> Result<Vec<f64>> {
    check_len(noise.len(), width * height, "noise and dimensions")?;
    Ok((0..width * height)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % width, i / width);
            let ray = Ray::new(
                [(x as f64 + 0.5) / width as f64, (y as f64 + 0.5) / height as f64, -1.0],
                [0.0, 0.0, 1.0],
            );
            let jitter = shifted_read(noise, width, height, x, y, 1);
            single_scatter_pixel(scene, &ray, noise[i], jitter, steps)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Accumulation {
    MonteCarlo,
    Ema { alpha: f64 },
}

impl Default for Accumulation {
    fn default() -> Self {
        Accumulation::Ema {
            alpha: DEFAULT_EMA_ALPHA,
        }
    }
}

/// Rendered frames and the image they estimate. Samples are interleaved per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub frames: Vec<Vec<f64>>,
    pub truth: Vec<f64>,
    pub mode: Accumulation,
}

impl FrameStack {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        frames: Vec<Vec<f64>>,
        truth: Vec<f64>,
        mode: Accumulation,
    ) -> Result<Self> {
        let len = width * height * channels;
        if frames.is_empty() {
            return Err(Error::ShapeMismatch("no frames".into()));
        }
        check_len(truth.len(), len, "ground truth")?;
        for f in &frames {
            check_len(f.len(), len, "frame")?;
        }
        if let Accumulation::Ema { alpha } = mode {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::OutOfRange(format!("EMA alpha {alpha} outside (0, 1]")));
            }
        }
        Ok(Self {
            width,
            height,
            channels,
            frames,
            truth,
            mode,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accumulated {
    pub image: Vec<f64>,
    /// RMSE against the truth after each frame.
    pub rmse: Vec<f64>,
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Running mean or EMA (`y_0 = x_0`) of the frames.
pub fn accumulate(stack: &FrameStack) -> Accumulated {
    let mut image = stack.frames[0].clone();
    let mut errors = vec![rmse(&image, &stack.truth)];
    for (n, frame) in stack.frames.iter().enumerate().skip(1) {
        let w = match stack.mode {
            Accumulation::MonteCarlo => 1.0 / (n + 1) as f64,
            Accumulation::Ema { alpha } => alpha,
        };
        for (y, &x) in image.iter_mut().zip(frame) {
            *y += w * (x - *y);
        }
        errors.push(rmse(&image, &stack.truth));
    }
    Accumulated {
        image,
        rmse: errors,
    }
}

/// Dithers `image` with frames `0..frames` of a `width x height x T` noise cube.
pub fn dither_frames(image: &[f64], noise: &NoiseCube, k: u32, frames: usize) -> Result<Vec<Vec<f64>>> {
    (0..frames).map(|t| dither_kbit(image, noise.frame(t), k)).collect()
}

/// Alpha-tested composites over frames `0..frames` of a noise cube.
pub fn alpha_frames(
    foreground: &[f64],
    background: &[f64],
    alpha: &[f64],
    noise: &NoiseCube,
    frames: usize,
) -> Result<Vec<Vec<f64>>> {
    (0..frames)
        .map(|t| alpha_composite(foreground, background, alpha, noise.frame(t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise_zoo::white_cube;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn dither_edges() {
        let noise = [0.0, 0.3, 0.999];
        assert_eq!(dither_kbit(&[0.0; 3], &noise, 3).unwrap(), vec![0.0; 3]);
        assert_eq!(dither_kbit(&[1.0; 3], &noise, 3).unwrap(), vec![1.0; 3]);
        assert!(dither_kbit(&[0.5; 3], &noise, 0).is_err());
        assert!(dither_kbit(&[0.5; 3], &noise, 9).is_err());
        assert!(dither_kbit(&[0.5; 2], &noise, 1).is_err());
    }

    #[test]
    fn half_gray_over_ranks() {
        let n = 64 * 64;
        let noise: Vec<f64> = (0..n).map(|i| ((i * 2_654_435_761) % n) as f64 / n as f64 + 0.5 / n as f64).collect();
        let out = dither_kbit(&vec![0.5; n], &noise, 1).unwrap();
        let ones = out.iter().filter(|&&v| v == 1.0).count();
        assert!((ones as f64 / n as f64 - 0.5).abs() <= 1.0 / n as f64);
    }

    #[test]
    fn rgb_channels_use_shifted_reads() {
        let (w, h) = (8, 8);
        let noise: Vec<f64> = (0..64).map(|i| i as f64 / 64.0).collect();
        let image = vec![0.5; 3 * 64];
        let out = dither_rgb(&image, &noise, w, h, 2).unwrap();
        let manual: Vec<f64> = (0..3)
            .map(|c| {
                let n = shifted_read(&noise, w, h, 0, 0, c);
                (0.5f64 * 3.0 + n).floor() / 3.0
            })
            .collect();
        assert_eq!(&out[..3], &manual[..]);
        let same = dither_rgb_masks(&image, [&noise, &noise, &noise], 2).unwrap();
        assert_eq!(same[0], same[1]);
    }

    #[test]
    fn alpha_rules() {
        assert!(stochastic_alpha(0.9, 0.5));
        assert!(!stochastic_alpha(0.0, 0.0));
        let noise: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        for a in [0.05, 0.333, 0.9] {
            let kept = noise.iter().filter(|&&n| stochastic_alpha(a, n)).count();
            let exact = a * 100.0;
            assert!(kept == exact.floor() as usize || kept == exact.ceil() as usize);
        }
    }

    #[test]
    fn cube_interval() {
        let (t0, t1) = unit_cube_interval([0.5, 0.5, -1.0], [0.0, 0.0, 1.0]).unwrap();
        assert!((t0 - 1.0).abs() < 1e-12 && (t1 - 2.0).abs() < 1e-12);
        assert!(unit_cube_interval([2.0, 0.5, -1.0], [0.0, 0.0, 1.0]).is_none());
        let (t0, _) = unit_cube_interval([0.5, 0.5, 0.5], [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(t0, 0.0);
    }

    #[test]
    fn free_flight_rules() {
        let empty = VolumeScene::homogeneous(0.0);
        assert!(free_flight(&empty, [0.5, 0.5, 0.0], [0.0, 0.0, 1.0], 0.0, 1.0, 64, 0.7).is_none());
        let slab = VolumeScene::homogeneous(2.0);
        let n = 100;
        let tau = 2.0 / n as f64;
        for xi in [0.05, 0.3, 0.6, 0.8] {
            let hit = free_flight(&slab, [0.5, 0.5, 0.0], [0.0, 0.0, 1.0], 0.0, 1.0, n, xi).unwrap();
            let expect = (-(1.0f64 - xi).ln() / tau).ceil() as usize - 1;
            assert_eq!(hit.index, expect, "xi {xi}");
        }
        let mut partial = VolumeScene::homogeneous(0.0);
        partial.bumps.push(Bump {
            center: [0.5, 0.5, 1.0],
            radius: 0.05,
            amplitude: 1.0,
        });
        let hit = free_flight(&partial, [0.5, 0.5, 0.0], [0.0, 0.0, 1.0], 0.0, 1.0, 10, 0.0).unwrap();
        let first = (0..10).find(|&s| partial.density([0.5, 0.5, s as f64 / 10.0]) > 0.0).unwrap();
        assert_eq!(hit.index, first);
    }

    #[test]
    fn scatter_edges() {
        let ray = Ray::new([0.5, 0.5, -1.0], [0.0, 0.0, 1.0]);
        let empty = VolumeScene::homogeneous(0.0).with_background(0.25);
        assert_eq!(single_scatter_pixel(&empty, &ray, 0.5, 0.5, MarchSteps::default()), 0.25);
        let wall = VolumeScene::homogeneous(1000.0).with_light([0.0, 0.0, 1.0]);
        let r = single_scatter_pixel(&wall, &ray, 0.5, 0.5, MarchSteps::default());
        assert!(r < 1e-100, "{r}");
    }

    #[test]
    fn stratified_slab_matches_reference() {
        let scene = VolumeScene::homogeneous(1.5).with_light([0.0, 1.0, 0.0]).with_background(0.1);
        let ray = Ray::new([0.5, 0.3, -1.0], [0.0, 0.0, 1.0]);
        let steps = MarchSteps::default();
        let strat = (0..4096)
            .map(|i| single_scatter_pixel(&scene, &ray, (i as f64 + 0.5) / 4096.0, 0.5, steps))
            .sum::<f64>()
            / 4096.0;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let reference = (0..100_000)
            .map(|_| single_scatter_pixel(&scene, &ray, rng.random::<f64>(), 0.5, steps))
            .sum::<f64>()
            / 100_000.0;
        assert!((strat / reference - 1.0).abs() < 0.01, "{strat} vs {reference}");
    }

    #[test]
    fn procedural_scene() {
        let s = VolumeScene::procedural(4);
        assert!((3..=5).contains(&s.bumps.len()));
        assert_eq!(s, VolumeScene::procedural(4));
        assert_eq!(s.density([1.5, 0.5, 0.5]), 0.0);
    }

    #[test]
    fn accumulation_cases() {
        let truth = vec![0.5; 4];
        let one = FrameStack::new(2, 2, 1, vec![vec![0.2; 4]], truth.clone(), Accumulation::MonteCarlo).unwrap();
        assert_eq!(accumulate(&one).image, vec![0.2; 4]);
        let same = FrameStack::new(2, 2, 1, vec![vec![0.2; 4]; 5], truth.clone(), Accumulation::MonteCarlo).unwrap();
        let acc = accumulate(&same);
        assert!(acc.image.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        assert!(acc.rmse.iter().all(|&e| (e - 0.3).abs() < 1e-15));

        let alternating: Vec<Vec<f64>> = (0..40).map(|n| vec![(n % 2) as f64; 4]).collect();
        let ema = FrameStack::new(2, 2, 1, alternating, truth.clone(), Accumulation::default()).unwrap();
        let acc = accumulate(&ema);
        // Limit cycle +-a with a = alpha / (2 (2 - alpha)); the transient decays as (1 - alpha)^n.
        let alpha = 0.1f64;
        let a = alpha / (2.0 * (2.0 - alpha));
        for (n, e) in acc.rmse.iter().enumerate() {
            let cycle = if n % 2 == 1 { a } else { -a };
            let expect = cycle + (1.0 - alpha).powi(n as i32) * (-0.5 + a);
            assert!((e - expect.abs()).abs() < 1e-12, "frame {n}");
        }
        assert!(FrameStack::new(2, 2, 1, vec![], truth.clone(), Accumulation::MonteCarlo).is_err());
        assert!(FrameStack::new(2, 2, 1, vec![vec![0.0; 3]], truth, Accumulation::MonteCarlo).is_err());
    }

    #[test]
    fn frames_from_cube() {
        let cube = white_cube(&[4, 4, 3], 1);
        let ramp = gray_ramp(4, 4);
        let f = dither_frames(&ramp, &cube, 1, 5).unwrap();
        assert_eq!(f.len(), 5);
        assert_eq!(f[3], f[0]);
    }

    proptest! {
        #[test]
        fn quantized_levels_are_fixed(k in 1u32..=8, level in 0u32..256) {
            let l = (1u32 << k) - 1;
            let v = (level % (l + 1)) as f64 / l as f64;
            let n = 0.5 / l as f64;
            let once = dither_kbit(&[v], &[n], k).unwrap();
            prop_assert_eq!(once[0], v);
            prop_assert_eq!(dither_kbit(&once, &[n], k).unwrap(), once);
        }

        #[test]
        fn dither_is_unbiased(k in 1u32..=8, v in 0.0..=1.0f64) {
            let m = 512;
            let noise: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
            let out = dither_kbit(&vec![v; m], &noise, k).unwrap();
            let mean = out.iter().sum::<f64>() / m as f64;
            let l = ((1u32 << k) - 1) as f64;
            prop_assert!((mean - v).abs() <= 1.0 / (2.0 * l));
        }
    }
}
