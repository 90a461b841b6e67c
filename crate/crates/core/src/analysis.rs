//! Spectral and convergence measurements.
//!
//! DFT conventions: the forward transform is unnormalized,
//! `X[k] = sum_n x[n] exp(-2 pi i k n / N)`, so for one slice
//! `sum |X|^2 = W * H * sum |x - mean|^2`. Every spectrum is taken after
//! subtracting the slice (or column) mean. Radii are expressed as a
//! fraction of Nyquist: `rho = 2 * sqrt(fx^2 + fy^2)` with `fx, fy` in
//! cycles per pixel, so `rho = 1` at the Nyquist frequency along an axis.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::OnceLock;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::noise_zoo::NoiseCube;

/// Upper edge of the low band, as a fraction of Nyquist.
pub const LOW_BAND_EDGE: f64 = 0.25;
/// Lower edge of the high band, as a fraction of Nyquist.
pub const HIGH_BAND_EDGE: f64 = 0.5;
/// EMA blend factor used when none is given.
pub const DEFAULT_EMA_ALPHA: f64 = 0.1;

const AXIS_NAMES: [char; 4] = ['X', 'Y', 'Z', 'W'];

fn axis_name(a: usize) -> String {
    AXIS_NAMES
        .get(a)
        .map(|c| c.to_string())
        .unwrap_or_else(|| format!("A{a}"))
}

/// Averaged DFT magnitudes of one plane, DC at `(width / 2, height / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumImage {
    width: usize,
    height: usize,
    magnitudes: Vec<f64>,
    label: String,
    count: usize,
}

impl SpectrumImage {
    pub fn new(width: usize, height: usize, magnitudes: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if magnitudes.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} magnitudes for {width}x{height}",
                magnitudes.len()
            )));
        }
        Ok(Self {
            width,
            height,
            magnitudes,
            label: label.into(),
            count: 1,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    /// Plane name such as `XY` or `ZY`.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of slices averaged.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.magnitudes[x + self.width * y]
    }

    /// Frequency radius of a bin as a fraction of Nyquist.
    pub fn radius(&self, x: usize, y: usize) -> f64 {
        let fx = (x as f64 - (self.width / 2) as f64) / self.width as f64;
        let fy = (y as f64 - (self.height / 2) as f64) / self.height as f64;
        2.0 * (fx * fx + fy * fy).sqrt()
    }

    fn radii(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.height).flat_map(move |y| {
            (0..self.width).map(move |x| (self.radius(x, y), self.at(x, y)))
        })
    }

    /// Magnitudes scaled so the 99th percentile maps to 1, clamped to `[0, 1]`.
    pub fn normalized(&self) -> Vec<f64> {
        let mut sorted = self.magnitudes.clone();
        sorted.sort_by(f64::total_cmp);
        let p99 = sorted[((sorted.len() - 1) as f64 * 0.99).round() as usize];
        if p99 <= 0.0 {
            return vec![0.0; self.magnitudes.len()];
        }
        self.magnitudes
            .iter()
            .map(|&m| (m / p99).clamp(0.0, 1.0))
            .collect()
    }
}

/// Mean magnitude per frequency band.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    /// Band centres. Radial profiles use cycles per texture width, temporal
    /// profiles cycles per sequence length.
    pub centers: Vec<f64>,
    pub means: Vec<f64>,
    /// Samples averaged into each band.
    pub counts: Vec<usize>,
}

impl RadialProfile {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Sum of `mean * count`: the total magnitude accounted for.
    pub fn total(&self) -> f64 {
        self.means
            .iter()
            .zip(&self.counts)
            .map(|(m, &c)| m * c as f64)
            .sum()
    }

    /// Mean of the lowest quarter of bands over the mean of the highest quarter.
    pub fn quartile_ratio(&self) -> f64 {
        let q = (self.len() / 4).max(1);
        let low: f64 = self.means[..q].iter().sum::<f64>() / q as f64;
        let high: f64 = self.means[self.len() - q..].iter().sum::<f64>() / q as f64;
        low / high
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin,center,mean,count\n");
        for (i, ((c, m), n)) in self.centers.iter().zip(&self.means).zip(&self.counts).enumerate() {
            let _ = writeln!(s, "{i},{c},{m},{n}");
        }
        s
    }
}

fn fft_2d(data: &mut [Complex<f64>], width: usize, height: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    for r in data.chunks_exact_mut(width) {
        row.process(r);
    }
    let mut column = vec![Complex::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[x + width * y];
        }
        col.process(&mut column);
        for y in 0..height {
            data[x + width * y] = column[y];
        }
    }
}

/// Unshifted DFT magnitudes of a mean-subtracted `width x height` slice.
pub fn dft2_magnitudes(values: &[f64], width: usize, height: usize) -> Result<Vec<f64>> {
    if values.len() != width * height {
        return Err(Error::ShapeMismatch(format!(
            "{} values for {width}x{height}",
            values.len()
        )));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    fft_2d(&mut data, width, height, &mut FftPlanner::new(), false);
    Ok(data.iter().map(|c| c.norm()).collect())
}

/// Iterates the linear start index of every line or plane orthogonal to `axes`.
fn orthogonal_bases(sizes: &[usize], axes: &[usize]) -> Vec<usize> {
    let mut strides = Vec::with_capacity(sizes.len());
    let mut acc = 1;
    for &s in sizes {
        strides.push(acc);
        acc *= s;
    }
    let others: Vec<usize> = (0..sizes.len()).filter(|a| !axes.contains(a)).collect();
    let count: usize = others.iter().map(|&a| sizes[a]).product();
    (0..count)
        .map(|mut k| {
            let mut base = 0;
            for &a in &others {
                base += (k % sizes[a]) * strides[a];
                k /= sizes[a];
            }
            base
        })
        .collect()
}

fn strides_of(sizes: &[usize]) -> Vec<usize> {
    let mut strides = Vec::with_capacity(sizes.len());
    let mut acc = 1;
    for &s in sizes {
        strides.push(acc);
        acc *= s;
    }
    strides
}

/// Mean DFT magnitude over every slice spanned by `plane = (u_axis, v_axis)`.
pub fn dft_plane_averaged(cube: &NoiseCube, plane: (usize, usize)) -> Result<SpectrumImage> {
    let sizes = cube.sizes();
    let (a, b) = plane;
    if a == b || a >= sizes.len() || b >= sizes.len() {
        return Err(Error::UnsupportedExtent(format!(
            "plane ({a}, {b}) for {} axes",
            sizes.len()
        )));
    }
    let (w, h) = (sizes[a], sizes[b]);
    if w < 2 || h < 2 {
        return Err(Error::UnsupportedExtent(format!("plane extents {w}x{h}")));
    }
    let strides = strides_of(sizes);
    let bases = orthogonal_bases(sizes, &[a, b]);
    let mut planner = FftPlanner::new();
    let mut acc = vec![0.0; w * h];
    let mut data = vec![Complex::new(0.0, 0.0); w * h];
    let values = cube.values();
    for &base in &bases {
        for v in 0..h {
            for u in 0..w {
                data[u + w * v] = Complex::new(values[base + u * strides[a] + v * strides[b]], 0.0);
            }
        }
        let mean = data.iter().map(|c| c.re).sum::<f64>() / (w * h) as f64;
        for c in data.iter_mut() {
            c.re -= mean;
        }
        fft_2d(&mut data, w, h, &mut planner, false);
        for (s, c) in acc.iter_mut().zip(&data) {
            *s += c.norm();
        }
    }
    let k = bases.len() as f64;
    let mut shifted = vec![0.0; w * h];
    for v in 0..h {
        for u in 0..w {
            let su = (u + w / 2) % w;
            let sv = (v + h / 2) % h;
            shifted[su + w * sv] = acc[u + w * v] / k;
        }
    }
    Ok(SpectrumImage {
        width: w,
        height: h,
        magnitudes: shifted,
        label: format!("{}{}", axis_name(a), axis_name(b)),
        count: bases.len(),
    })
}

/// Annular means over `(0, Nyquist]`, DC and corners beyond Nyquist excluded.
pub fn radial_profile(spectrum: &SpectrumImage, bins: usize) -> Result<RadialProfile> {
    if bins < 4 {
        return Err(Error::OutOfRange(format!("{bins} bins, need at least 4")));
    }
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (rho, m) in spectrum.radii() {
        if rho <= 0.0 || rho > 1.0 {
            continue;
        }
        let bin = ((rho * bins as f64).ceil() as usize).clamp(1, bins) - 1;
        sums[bin] += m;
        counts[bin] += 1;
    }
    let half_width = spectrum.width as f64 / 2.0;
    Ok(RadialProfile {
        centers: (0..bins)
            .map(|i| (i as f64 + 0.5) / bins as f64 * half_width)
            .collect(),
        means: sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect(),
        counts,
    })
}

/// Mean magnitude below a quarter of Nyquist over the mean in `[Nyquist/2, Nyquist]`.
///
/// Lower is bluer; white noise sits near 1. Returns NaN when the high band is empty or zero.
pub fn low_freq_ratio(spectrum: &SpectrumImage) -> f64 {
    let (mut low, mut nlow, mut high, mut nhigh) = (0.0, 0usize, 0.0, 0usize);
    for (rho, m) in spectrum.radii() {
        if rho > 0.0 && rho < LOW_BAND_EDGE {
            low += m;
            nlow += 1;
        } else if (HIGH_BAND_EDGE..=1.0).contains(&rho) {
            high += m;
            nhigh += 1;
        }
    }
    if nlow == 0 || nhigh == 0 || high == 0.0 {
        return f64::NAN;
    }
    (low / nlow as f64) / (high / nhigh as f64)
}

/// Per-column 1D spectrum along `axis`, averaged over all columns.
///
/// Bands are the frequencies `1..=T/2` in cycles per sequence length.
pub fn temporal_spectrum(cube: &NoiseCube, axis: usize) -> Result<RadialProfile> {
    let sizes = cube.sizes();
    if axis >= sizes.len() {
        return Err(Error::UnsupportedExtent(format!("axis {axis} of {}", sizes.len())));
    }
    let t = sizes[axis];
    if t < 8 {
        return Err(Error::UnsupportedExtent(format!(
            "temporal extent {t}, need at least 8"
        )));
    }
    let stride = strides_of(sizes)[axis];
    let bases = orthogonal_bases(sizes, &[axis]);
    let fft = FftPlanner::new().plan_fft_forward(t);
    let half = t / 2;
    let mut acc = vec![0.0; half];
    let mut column = vec![Complex::new(0.0, 0.0); t];
    let values = cube.values();
    for &base in &bases {
        let mut mean = 0.0;
        for (k, c) in column.iter_mut().enumerate() {
            *c = Complex::new(values[base + k * stride], 0.0);
            mean += c.re;
        }
        mean /= t as f64;
        for c in column.iter_mut() {
            c.re -= mean;
        }
        fft.process(&mut column);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += column[k + 1].norm();
        }
    }
    let n = bases.len();
    Ok(RadialProfile {
        centers: (1..=half).map(|k| k as f64).collect(),
        means: acc.iter().map(|a| a / n as f64).collect(),
        counts: vec![n; half],
    })
}

/// Normalized circular autocorrelation, lag `(0, 0)` at index 0 and equal to 1.
pub fn autocorrelation(values: &[f64], width: usize, height: usize) -> Result<Vec<f64>> {
    if values.len() != width * height {
        return Err(Error::ShapeMismatch(format!(
            "{} values for {width}x{height}",
            values.len()
        )));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    fft_2d(&mut data, width, height, &mut planner, false);
    for c in data.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    fft_2d(&mut data, width, height, &mut planner, true);
    let zero = data[0].re;
    if zero <= 0.0 {
        let mut out = vec![0.0; values.len()];
        out[0] = 1.0;
        return Ok(out);
    }
    Ok(data.iter().map(|c| c.re / zero).collect())
}

/// 1D test functions on `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrand {
    /// `f(x) = 1`.
    Constant,
    /// `f(x) = x`.
    Linear,
    /// `f(x) = sin(pi x)`.
    Sine,
    /// `f(x) = 3x^2 - 2x^3`.
    Smoothstep,
    /// `f(x) = 1` for `x >= 1/3`, else 0.
    Step,
    /// `f(x) = exp(-(x - 0.5)^2 / (2 * 0.1^2))`.
    GaussianBump,
}

impl Integrand {
    pub const ALL: [Integrand; 6] = [
        Integrand::Constant,
        Integrand::Linear,
        Integrand::Sine,
        Integrand::Smoothstep,
        Integrand::Step,
        Integrand::GaussianBump,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Integrand::Constant => "constant",
            Integrand::Linear => "linear",
            Integrand::Sine => "sine",
            Integrand::Smoothstep => "smoothstep",
            Integrand::Step => "step",
            Integrand::GaussianBump => "gaussian",
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Integrand::Constant => 1.0,
            Integrand::Linear => x,
            Integrand::Sine => (std::f64::consts::PI * x).sin(),
            Integrand::Smoothstep => x * x * (3.0 - 2.0 * x),
            Integrand::Step => {
                if x >= 1.0 / 3.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Integrand::GaussianBump => {
                let d = x - 0.5;
                (-d * d / 0.02).exp()
            }
        }
    }

    /// Integral over `[0, 1]`. The Gaussian bump uses composite Simpson with 10^6 intervals.
    pub fn truth(self) -> f64 {
        match self {
            Integrand::Constant => 1.0,
            Integrand::Linear => 0.5,
            Integrand::Sine => 2.0 / std::f64::consts::PI,
            Integrand::Smoothstep => 0.5,
            Integrand::Step => 2.0 / 3.0,
            Integrand::GaussianBump => {
                static TRUTH: OnceLock<f64> = OnceLock::new();
                *TRUTH.get_or_init(|| simpson(|x| Integrand::GaussianBump.eval(x), 1_000_000))
            }
        }
    }
}

impl FromStr for Integrand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Integrand::ALL
            .into_iter()
            .find(|i| i.id() == s)
            .ok_or_else(|| Error::UnknownIntegrand(s.to_string()))
    }
}

fn simpson(f: impl Fn(f64) -> f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = 1.0 / n as f64;
    let mut sum = f(0.0) + f(1.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    sum * h / 3.0
}

/// Per-pixel value sequences; frame `n` of a pixel reads `(offset + n) mod period`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelStreams {
    pixels: usize,
    period: usize,
    offset: usize,
    values: Vec<f64>,
    provenance: String,
}

impl PixelStreams {
    /// Streams along the last axis of `cube`.
    pub fn from_cube(cube: &NoiseCube, offset: usize) -> Self {
        let pixels = cube.frame_len();
        let period = cube.frames();
        let mut values = vec![0.0; pixels * period];
        for t in 0..period {
            for (p, &v) in cube.frame(t).iter().enumerate() {
                values[p * period + t] = v;
            }
        }
        Self {
            pixels,
            period,
            offset,
            values,
            provenance: cube.provenance().label().to_string(),
        }
    }

    /// One stream per row; all rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>], provenance: impl Into<String>) -> Result<Self> {
        let period = rows.first().map_or(0, Vec::len);
        if period == 0 || rows.iter().any(|r| r.len() != period) {
            return Err(Error::ShapeMismatch("streams must be non-empty and equally long".into()));
        }
        if rows.iter().flatten().any(|v| !(0.0..1.0).contains(v)) {
            return Err(Error::OutOfRange("stream values must lie in [0, 1)".into()));
        }
        Ok(Self {
            pixels: rows.len(),
            period,
            offset: 0,
            values: rows.concat(),
            provenance: provenance.into(),
        })
    }

    pub fn with_offset(mut self, offset: usize) -> Self {
        self.offset = offset;
        self
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn period(&self) -> usize {
        self.period
    }

    #[inline]
    pub fn sample(&self, pixel: usize, frame: usize) -> f64 {
        self.values[pixel * self.period + (self.offset + frame) % self.period]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    MonteCarlo,
    Ema { alpha: f64 },
}

impl Scheme {
    pub fn label(&self) -> String {
        match self {
            Scheme::MonteCarlo => "mc".into(),
            Scheme::Ema { alpha } => format!("ema({alpha})"),
        }
    }
}

/// Error after each frame, averaged over pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub integrand: Integrand,
    pub scheme: Scheme,
    pub provenance: String,
    /// Mean absolute error; entry `n - 1` is after `n` frames.
    pub mae: Vec<f64>,
    pub rmse: Vec<f64>,
}

impl ConvergenceReport {
    pub fn frames(&self) -> usize {
        self.mae.len()
    }

    /// Columns `frame,mae,rmse`; frames count from 1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame,mae,rmse\n");
        for (i, (m, r)) in self.mae.iter().zip(&self.rmse).enumerate() {
            let _ = writeln!(s, "{},{m},{r}", i + 1);
        }
        s
    }
}

fn error_series(
    streams: &PixelStreams,
    integrand: Integrand,
    frames: usize,
    scheme: Scheme,
) -> ConvergenceReport {
    let truth = integrand.truth();
    let mut abs_sum = vec![0.0; frames];
    let mut sq_sum = vec![0.0; frames];
    for p in 0..streams.pixels {
        let mut acc = 0.0;
        for n in 0..frames {
            let f = integrand.eval(streams.sample(p, n));
            let estimate = match scheme {
                Scheme::MonteCarlo => {
                    acc += f;
                    acc / (n + 1) as f64
                }
                Scheme::Ema { alpha } => {
                    acc = if n == 0 { f } else { (1.0 - alpha) * acc + alpha * f };
                    acc
                }
            };
            let e = estimate - truth;
            abs_sum[n] += e.abs();
            sq_sum[n] += e * e;
        }
    }
    let k = streams.pixels as f64;
    ConvergenceReport {
        integrand,
        scheme,
        provenance: streams.provenance.clone(),
        mae: abs_sum.iter().map(|s| s / k).collect(),
        rmse: sq_sum.iter().map(|s| (s / k).sqrt()).collect(),
    }
}

/// Running-mean estimates of the integrand, error per frame.
pub fn mc_error_series(streams: &PixelStreams, integrand: Integrand, frames: usize) -> ConvergenceReport {
    error_series(streams, integrand, frames, Scheme::MonteCarlo)
}

/// `y_0 = f(x_0)`, `y_n = (1 - alpha) y_{n-1} + alpha f(x_n)`, error per frame.
pub fn ema_error_series(
    streams: &PixelStreams,
    integrand: Integrand,
    alpha: f64,
    frames: usize,
) -> Result<ConvergenceReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::OutOfRange(format!("EMA alpha {alpha} outside (0, 1]")));
    }
    Ok(error_series(streams, integrand, frames, Scheme::Ema { alpha }))
}
