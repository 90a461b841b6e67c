//! Command-line front end for generating, analyzing and applying blue noise masks.

pub mod container;
pub mod sources;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use stbn::analysis::{
    autocorrelation, dft_plane_averaged, ema_error_series, low_freq_ratio, mc_error_series,
    radial_profile, temporal_spectrum, Integrand, PixelStreams, SpectrumImage, DEFAULT_EMA_ALPHA,
};
use stbn::apps::{
    accumulate, alpha_frames, alpha_reference, dither_frames, gray_ramp, render_volume, Accumulation,
    FrameStack, MarchSteps, VolumeScene, DEFAULT_SHADOW_STEPS, DEFAULT_STEPS,
};
use stbn::pnm::Image;
use stbn::{finalize, generate_with, threshold_mask, threshold_points, Finalize, GenerateOptions, NoiseCube};

use crate::container::{Container, Contents, Flags};
use crate::sources::{build_spec, noise_cube, parse_plane, parse_size, NoiseSource, StderrProgress};

#[derive(Debug, Parser)]
#[command(name = "stbn", version, about = "Spatiotemporal blue noise masks")]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a mask and write it as a container file.
    Gen(GenArgs),
    /// Spectra and autocorrelation of a mask.
    Analyze(AnalyzeArgs),
    /// Threshold a mask into a point set.
    Threshold(ThresholdArgs),
    /// Per-pixel convergence of MC or EMA estimates of a 1D integral.
    Bench(BenchArgs),
    /// Dither an image over several frames and accumulate.
    Dither(DitherArgs),
    /// Stochastic transparency over several frames.
    Alpha(AlphaArgs),
    /// Single scattering through a procedural volume.
    Volume(VolumeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PayloadKind {
    F32,
    U8,
    U16,
    Ranks,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Extents, e.g. 64x64x16.
    #[arg(long)]
    pub size: String,
    /// Axis groups, e.g. xy,z.
    #[arg(long, default_value = "xy,z")]
    pub groups: String,
    /// One sigma for all groups or one per group, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1.9")]
    pub sigma: Vec<f64>,
    /// Axes without wrap-around, e.g. z.
    #[arg(long, default_value = "")]
    pub open: String,
    #[arg(long, default_value_t = stbn::grid::DEFAULT_INITIAL_DENSITY)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "f32")]
    pub payload: PayloadKind,
    /// Bit depth for u8/u16 payloads; defaults to the element width.
    #[arg(long)]
    pub bits: Option<u32>,
    /// Strict rank / N values and untruncated energy.
    #[arg(long)]
    pub paper_fidelity: bool,
    /// Suppress progress lines.
    #[arg(long)]
    pub quiet: bool,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["dft", "radial", "temporal", "autocorr"])))]
pub struct AnalyzeArgs {
    pub input: PathBuf,
    /// Plane of a DFT image, e.g. xy or zy.
    #[arg(long)]
    pub dft: Option<String>,
    /// Plane of a radial profile.
    #[arg(long)]
    pub radial: Option<String>,
    /// Per-pixel spectrum along the last axis.
    #[arg(long)]
    pub temporal: bool,
    /// Autocorrelation of one XY slice.
    #[arg(long)]
    pub autocorr: bool,
    /// Average over all slices instead of taking one.
    #[arg(long)]
    pub avg: bool,
    /// Slice index along the remaining axes when not averaging.
    #[arg(long, default_value_t = 0)]
    pub slice: usize,
    #[arg(long, default_value_t = 32)]
    pub bins: usize,
    /// Output path prefix; `.csv` and `.pgm` are appended.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PointFormat {
    Csv,
    U16,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    pub input: PathBuf,
    /// Fraction of pixels to keep.
    #[arg(long = "t")]
    pub t: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: PointFormat,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Mc,
    Ema,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// stbn, blue3d, stack, gr, white, or a container path.
    #[arg(long, default_value = "stbn")]
    pub noise: String,
    /// Extents of generated noise, WxHxT.
    #[arg(long, default_value = "64x64x16")]
    pub size: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl NoiseArgs {
    fn cube(&self) -> Result<NoiseCube> {
        let source: NoiseSource = self.noise.parse().expect("infallible");
        noise_cube(&source, &parse_size(&self.size)?, self.seed, false)
    }
}

#[derive(Debug, Args)]
pub struct AccumulateArgs {
    #[arg(long, value_enum, default_value = "mc")]
    pub mode: SchemeArg,
    #[arg(long, default_value_t = DEFAULT_EMA_ALPHA)]
    pub ema_alpha: f64,
    #[arg(long, default_value_t = 4)]
    pub frames: usize,
}

impl AccumulateArgs {
    fn accumulation(&self) -> Accumulation {
        match self.mode {
            SchemeArg::Mc => Accumulation::MonteCarlo,
            SchemeArg::Ema => Accumulation::Ema {
                alpha: self.ema_alpha,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "mc")]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = DEFAULT_EMA_ALPHA)]
    pub alpha: f64,
    /// constant, linear, sine, smoothstep, step, gaussian.
    #[arg(long, default_value = "sine")]
    pub integrand: String,
    #[arg(long, default_value_t = 64)]
    pub frames: usize,
    /// Start index into each pixel's sequence.
    #[arg(long, default_value_t = 0)]
    pub offset: usize,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct DitherArgs {
    /// Grayscale PGM to dither; a horizontal ramp when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub bits: u32,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub acc: AccumulateArgs,
    /// Output prefix; writes `.pgm` and `.csv`.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AlphaArgs {
    /// Coverage of the foreground layer.
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub foreground: f64,
    #[arg(long, default_value_t = 0.0)]
    pub background: f64,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub acc: AccumulateArgs,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    #[arg(long, default_value_t = 1)]
    pub scene_seed: u64,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    #[arg(long, default_value_t = DEFAULT_SHADOW_STEPS)]
    pub shadow_steps: usize,
    /// Stratified draws per pixel for the reference image.
    #[arg(long, default_value_t = 256)]
    pub reference_samples: usize,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub acc: AccumulateArgs,
    #[arg(long, short)]
    pub output: PathBuf,
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn gen(args: &GenArgs) -> Result<()> {
    let spec = build_spec(parse_size(&args.size)?, &args.groups, &args.sigma, &args.open)?
        .with_seed(args.seed)
        .with_initial_density(args.density)?;
    let mode = match (args.payload, args.bits) {
        (PayloadKind::F32 | PayloadKind::Ranks, Some(_)) => bail!("--bits applies to u8 and u16 payloads"),
        (PayloadKind::U8, Some(k)) if k > 8 => bail!("{k} bits do not fit a u8 payload"),
        (PayloadKind::U16, Some(k)) if k <= 8 => bail!("{k} bits belong in a u8 payload"),
        (PayloadKind::U8, k) => Some(Finalize::Bits(k.unwrap_or(8))),
        (PayloadKind::U16, k) => Some(Finalize::Bits(k.unwrap_or(16))),
        (PayloadKind::F32, _) if args.paper_fidelity => Some(Finalize::FloatStrict),
        (PayloadKind::F32, _) => Some(Finalize::Float),
        (PayloadKind::Ranks, _) => None,
    };
    if let Some(Finalize::Bits(k)) = mode {
        if spec.len() < 1 << k {
            return Err(stbn::Error::BitDepth {
                depth: k,
                needed: 1 << k,
                pixels: spec.len(),
            }
            .into());
        }
    }
    let opts = if args.paper_fidelity {
        GenerateOptions::exact()
    } else {
        GenerateOptions::default()
    };
    let mut quiet = ();
    let mut loud = StderrProgress;
    let obs: &mut dyn stbn::Observer = if args.quiet { &mut quiet } else { &mut loud };
    let ranks = generate_with(&spec, opts, obs)?;
    let flags = Flags {
        strict: mode == Some(Finalize::FloatStrict),
        exact_energy: args.paper_fidelity,
    };
    let c = match mode {
        Some(m) => Container::mask(finalize(&ranks, m)?, flags),
        None => Container::ranks(ranks, flags),
    };
    container::write_file(&args.output, &c)?;
    println!("wrote {} pixels to {}", c.spec().len(), args.output.display());
    Ok(())
}

fn slice_cube(cube: &NoiseCube, plane: (usize, usize), slice: usize) -> Result<NoiseCube> {
    let sizes = cube.sizes();
    let (a, b) = plane;
    let mut strides = vec![1; sizes.len()];
    for i in 1..sizes.len() {
        strides[i] = strides[i - 1] * sizes[i - 1];
    }
    let base: usize = (0..sizes.len())
        .filter(|&i| i != a && i != b)
        .map(|i| (slice % sizes[i]) * strides[i])
        .sum();
    let values = (0..sizes[b])
        .flat_map(|v| (0..sizes[a]).map(move |u| (u, v)))
        .map(|(u, v)| cube.values()[base + u * strides[a] + v * strides[b]])
        .collect();
    Ok(NoiseCube::new(vec![sizes[a], sizes[b]], values, cube.provenance().clone())?)
}

fn spectrum(cube: &NoiseCube, plane_arg: &str, avg: bool, slice: usize) -> Result<SpectrumImage> {
    let plane = parse_plane(plane_arg, cube.sizes().len())?;
    let s = if avg || cube.sizes().len() == 2 {
        dft_plane_averaged(cube, plane)?
    } else {
        let one = dft_plane_averaged(&slice_cube(cube, plane, slice)?, (0, 1))?;
        SpectrumImage::new(one.width(), one.height(), one.magnitudes().to_vec(), plane_arg.to_uppercase())?
    };
    Ok(s)
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let cube = sources::load_cube(&args.input)?;
    let csv = with_ext(&args.output, "csv");
    if let Some(plane) = &args.dft {
        let s = spectrum(&cube, plane, args.avg, args.slice)?;
        let ratio = low_freq_ratio(&s);
        let img = Image::gray(s.width(), s.height(), s.normalized())?;
        write(&with_ext(&args.output, "pgm"), img.encode(65535)?)?;
        write(
            &csv,
            format!(
                "metric,value\nplane,{}\nslices,{}\nlow_freq_ratio,{ratio}\n",
                s.label(),
                s.count()
            ),
        )?;
        println!("low_freq_ratio={ratio}");
    } else if let Some(plane) = &args.radial {
        let s = spectrum(&cube, plane, args.avg, args.slice)?;
        write(&csv, radial_profile(&s, args.bins)?.to_csv())?;
    } else if args.temporal {
        let p = temporal_spectrum(&cube, cube.sizes().len() - 1)?;
        write(&csv, p.to_csv())?;
        println!("quartile_ratio={}", p.quartile_ratio());
    } else {
        let plane = slice_cube(&cube, (0, 1), args.slice)?;
        let (w, h) = (plane.sizes()[0], plane.sizes()[1]);
        let r = autocorrelation(plane.values(), w, h)?;
        let mut centered = vec![0.0; w * h];
        let mut rows = String::from("dx,dy,r\n");
        for y in 0..h {
            for x in 0..w {
                let v = r[x + w * y];
                centered[(x + w / 2) % w + w * ((y + h / 2) % h)] = 0.5 + 0.5 * v;
                let dx = if x > w / 2 { x as i64 - w as i64 } else { x as i64 };
                let dy = if y > h / 2 { y as i64 - h as i64 } else { y as i64 };
                rows.push_str(&format!("{dx},{dy},{v}\n"));
            }
        }
        write(&with_ext(&args.output, "pgm"), Image::gray(w, h, centered)?.encode(65535)?)?;
        write(&csv, rows)?;
    }
    Ok(())
}

fn threshold(args: &ThresholdArgs) -> Result<()> {
    let c = container::read_file(&args.input)?;
    let points = match &c.contents {
        Contents::Mask(m) => threshold_mask(m, args.t)?,
        Contents::Ranks(r) => threshold_points(r, args.t)?,
    };
    match args.format {
        PointFormat::Csv => write(&args.output, points.to_csv())?,
        PointFormat::U16 => write(&args.output, points.to_packed_u16()?)?,
    }
    let counts: Vec<String> = points.slice_counts().iter().map(usize::to_string).collect();
    println!("points={} slice_counts={}", points.len(), counts.join(","));
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let integrand: Integrand = args.integrand.parse()?;
    let cube = args.noise.cube()?;
    let streams = PixelStreams::from_cube(&cube, args.offset);
    let report = match args.scheme {
        SchemeArg::Mc => mc_error_series(&streams, integrand, args.frames),
        SchemeArg::Ema => ema_error_series(&streams, integrand, args.alpha, args.frames)?,
    };
    write(&args.output, report.to_csv())?;
    println!(
        "integrand={} scheme={} noise={} final_mae={}",
        integrand.id(),
        report.scheme.label(),
        report.provenance,
        report.mae.last().copied().unwrap_or(0.0)
    );
    Ok(())
}

fn errors_csv(rmse: &[f64]) -> String {
    let mut s = String::from("frame,rmse\n");
    for (i, e) in rmse.iter().enumerate() {
        s.push_str(&format!("{},{e}\n", i + 1));
    }
    s
}

fn finish_stack(stack: FrameStack, output: &Path) -> Result<()> {
    let acc = accumulate(&stack);
    write(
        &with_ext(output, "pgm"),
        Image::gray(stack.width, stack.height, acc.image)?.encode(255)?,
    )?;
    write(&with_ext(output, "csv"), errors_csv(&acc.rmse))?;
    println!("final_rmse={}", acc.rmse.last().copied().unwrap_or(0.0));
    Ok(())
}

fn frame_dims(cube: &NoiseCube) -> (usize, usize) {
    (cube.sizes()[0], cube.sizes().get(1).copied().unwrap_or(1))
}

fn dither(args: &DitherArgs) -> Result<()> {
    let cube = args.noise.cube()?;
    let (w, h) = frame_dims(&cube);
    let image = match &args.input {
        Some(p) => {
            let img = Image::decode(&fs::read(p).with_context(|| format!("reading {}", p.display()))?)?;
            if img.channels != 1 || (img.width, img.height) != (w, h) {
                bail!("input must be a {w}x{h} grayscale image");
            }
            img.samples
        }
        None => gray_ramp(w, h),
    };
    let frames = dither_frames(&image, &cube, args.bits, args.acc.frames)?;
    finish_stack(FrameStack::new(w, h, 1, frames, image, args.acc.accumulation())?, &args.output)
}

fn alpha(args: &AlphaArgs) -> Result<()> {
    let cube = args.noise.cube()?;
    let (w, h) = frame_dims(&cube);
    let n = w * h;
    let (fg, bg, a) = (vec![args.foreground; n], vec![args.background; n], vec![args.alpha; n]);
    let frames = alpha_frames(&fg, &bg, &a, &cube, args.acc.frames)?;
    let truth = alpha_reference(&fg, &bg, &a);
    finish_stack(FrameStack::new(w, h, 1, frames, truth, args.acc.accumulation())?, &args.output)
}

fn volume(args: &VolumeArgs) -> Result<()> {
    let cube = args.noise.cube()?;
    let (w, h) = frame_dims(&cube);
    let scene = VolumeScene::procedural(args.scene_seed);
    let steps = MarchSteps {
        primary: args.steps,
        shadow: args.shadow_steps,
    };
    let k = args.reference_samples.max(1);
    let mut truth = vec![0.0; w * h];
    for i in 0..k {
        let xi = vec![(i as f64 + 0.5) / k as f64; w * h];
        for (t, v) in truth.iter_mut().zip(render_volume(&scene, w, h, &xi, steps)?) {
            *t += v / k as f64;
        }
    }
    let frames = (0..args.acc.frames)
        .map(|t| render_volume(&scene, w, h, cube.frame(t), steps))
        .collect::<stbn::Result<Vec<_>>>()?;
    finish_stack(FrameStack::new(w, h, 1, frames, truth, args.acc.accumulation())?, &args.output)
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Analyze(a) => analyze(a),
        Command::Threshold(a) => threshold(a),
        Command::Bench(a) => bench(a),
        Command::Dither(a) => dither(a),
        Command::Alpha(a) => alpha(a),
        Command::Volume(a) => volume(a),
    }
}

/// Identifier of the innermost known error in the chain.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<container::ContainerError>() {
            return e.kind();
        }
        if let Some(e) = cause.downcast_ref::<stbn::Error>() {
            return e.kind();
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "invalid_argument"
}

/// Runs the CLI and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: kind=usage message={first}");
            return 2;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: kind={} message={msg}", error_kind(&e));
            1
        }
    }
}

