//! Void-and-cluster ordering over an arbitrary [`MaskSpec`].
//!
//! The pipeline is: seeded white-noise initial pattern, redistribution of
//! that pattern into blue noise, then three ordering phases that assign
//! every pixel a unique rank. [`generate`] runs all of it; the individual
//! phases are public so each step can be checked against a brute-force
//! recomputation.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(spec.seed())`, which is
//! portable across platforms; the initial pattern is
//! `rand::seq::index::sample(rng, N, round(density * N))`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::{EnergyField, EnergyOptions};
use crate::error::{Error, Result};
use crate::grid::MaskSpec;

/// Marker for pixels that have not been ranked yet.
pub const UNRANKED: u32 = u32::MAX;

/// Redistribution stops with an error after `REDISTRIBUTION_CAP_FACTOR * N` swaps.
pub const REDISTRIBUTION_CAP_FACTOR: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryPattern {
    bits: Vec<bool>,
    count_on: usize,
}

impl BinaryPattern {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        let count_on = bits.iter().filter(|&&b| b).count();
        Self { bits, count_on }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_on(&self) -> usize {
        self.count_on
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn on_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }
}

/// Seeded white-noise pattern with `round(density * N)` pixels on, capped at `N / 2`.
pub fn initial_pattern(spec: &MaskSpec) -> Result<BinaryPattern> {
    let density = spec.initial_density();
    if !(density > 0.0 && density <= 0.5) {
        return Err(Error::DensityOutOfRange(density));
    }
    let n = spec.len();
    let count = ((density * n as f64).round() as usize).min(n / 2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed());
    let mut bits = vec![false; n];
    for i in sample(&mut rng, n, count).iter() {
        bits[i] = true;
    }
    Ok(BinaryPattern {
        bits,
        count_on: count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Redistribute,
    /// Order the initial pattern by removing clusters.
    Initial,
    /// Fill voids until half of the pixels are on.
    FirstHalf,
    /// Invert and remove clusters of the unranked pixels.
    SecondHalf,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Redistribute => "redistribute",
            Phase::Initial => "phase1",
            Phase::FirstHalf => "phase2",
            Phase::SecondHalf => "phase3",
        }
    }
}

/// One state change made by the generator, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// The tightest cluster was turned off.
    Cluster { phase: Phase, index: usize },
    /// The largest void was turned on.
    Void { phase: Phase, index: usize },
    /// The redistributed pattern was switched back on after phase I.
    Restore,
    /// Every pixel state was flipped before phase III.
    Invert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub phase: Phase,
    pub done: usize,
    pub total: usize,
}

/// Receives generator events. Both hooks default to doing nothing.
pub trait Observer {
    fn on_step(&mut self, _step: &Step) {}
    fn on_progress(&mut self, _progress: &Progress) {}
}

impl Observer for () {}

/// Collects every step; used by oracle tests.
#[derive(Debug, Default, Clone)]
pub struct StepLog(pub Vec<Step>);

impl Observer for StepLog {
    fn on_step(&mut self, step: &Step) {
        self.0.push(*step);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerateOptions {
    pub energy: EnergyOptions,
}

impl GenerateOptions {
    /// No stencil truncation.
    pub fn exact() -> Self {
        Self {
            energy: EnergyOptions { truncate: false },
        }
    }
}

fn report(obs: &mut dyn Observer, phase: Phase, done: usize, total: usize) {
    let every = (total / 64).max(1);
    if done.is_multiple_of(every) || done == total {
        obs.on_progress(&Progress { phase, done, total });
    }
}

/// Swaps tightest clusters into largest voids until the two coincide.
pub fn redistribute(
    pattern: &BinaryPattern,
    spec: &MaskSpec,
    opts: GenerateOptions,
    obs: &mut dyn Observer,
) -> Result<BinaryPattern> {
    let mut field = EnergyField::from_bits(spec, opts.energy, pattern.bits())?;
    redistribute_field(&mut field, obs)?;
    Ok(BinaryPattern::from_bits(field.on_bits().to_vec()))
}

fn redistribute_field(field: &mut EnergyField, obs: &mut dyn Observer) -> Result<usize> {
    if field.count_on() == 0 || field.count_on() == field.len() {
        return Ok(0);
    }
    let cap = REDISTRIBUTION_CAP_FACTOR * field.len();
    for swaps in 0..=cap {
        let cluster = field.tightest_cluster()?;
        field.turn_off(cluster)?;
        obs.on_step(&Step::Cluster {
            phase: Phase::Redistribute,
            index: cluster,
        });
        let void = field.largest_void()?;
        field.turn_on(void)?;
        obs.on_step(&Step::Void {
            phase: Phase::Redistribute,
            index: void,
        });
        if void == cluster {
            return Ok(swaps);
        }
        if swaps % 256 == 0 {
            obs.on_progress(&Progress {
                phase: Phase::Redistribute,
                done: swaps,
                total: cap,
            });
        }
    }
    Err(Error::RedistributionCap(cap))
}

/// Ranking state carried through phases I to III.
#[derive(Debug, Clone)]
pub struct Ordering {
    spec: MaskSpec,
    opts: GenerateOptions,
    pattern: BinaryPattern,
    field: EnergyField,
    ranks: Vec<u32>,
}

impl Ordering {
    /// Starts ordering from an already redistributed pattern.
    pub fn new(spec: &MaskSpec, pattern: &BinaryPattern, opts: GenerateOptions) -> Result<Self> {
        if spec.len() > UNRANKED as usize {
            return Err(Error::InvalidSpec(format!(
                "{} pixels exceed the 32-bit rank range",
                spec.len()
            )));
        }
        let field = EnergyField::from_bits(spec, opts.energy, pattern.bits())?;
        Ok(Self {
            spec: spec.clone(),
            opts,
            pattern: pattern.clone(),
            field,
            ranks: vec![UNRANKED; spec.len()],
        })
    }

    /// Current ranks; unranked pixels hold [`UNRANKED`].
    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn field(&self) -> &EnergyField {
        &self.field
    }

    /// Ranks the initial pattern from `count_on - 1` down to 0, then restores it.
    pub fn phase1(&mut self, obs: &mut dyn Observer) -> Result<()> {
        let saved = self.field.clone();
        let total = self.pattern.count_on();
        while self.field.count_on() > 0 {
            let cluster = self.field.tightest_cluster()?;
            self.field.turn_off(cluster)?;
            self.ranks[cluster] = self.field.count_on() as u32;
            obs.on_step(&Step::Cluster {
                phase: Phase::Initial,
                index: cluster,
            });
            report(obs, Phase::Initial, total - self.field.count_on(), total);
        }
        self.field = saved;
        obs.on_step(&Step::Restore);
        Ok(())
    }

    /// Turns on largest voids until `floor(N / 2)` pixels are on.
    pub fn phase2(&mut self, obs: &mut dyn Observer) -> Result<()> {
        let half = self.spec.len() / 2;
        let start = self.field.count_on();
        while self.field.count_on() < half {
            let void = self.field.largest_void()?;
            self.ranks[void] = self.field.count_on() as u32;
            self.field.turn_on(void)?;
            obs.on_step(&Step::Void {
                phase: Phase::FirstHalf,
                index: void,
            });
            report(
                obs,
                Phase::FirstHalf,
                self.field.count_on() - start,
                half.saturating_sub(start),
            );
        }
        Ok(())
    }

    /// Inverts the pattern and ranks the remaining pixels by cluster removal.
    pub fn phase3(mut self, obs: &mut dyn Observer) -> Result<RankMask> {
        let n = self.spec.len();
        let inverted: Vec<bool> = self.field.on_bits().iter().map(|&b| !b).collect();
        self.field = EnergyField::from_bits(&self.spec, self.opts.energy, &inverted)?;
        obs.on_step(&Step::Invert);
        let total = self.field.count_on();
        while self.field.count_on() > 0 {
            let cluster = self.field.tightest_cluster()?;
            self.ranks[cluster] = (n - self.field.count_on()) as u32;
            self.field.turn_off(cluster)?;
            obs.on_step(&Step::Cluster {
                phase: Phase::SecondHalf,
                index: cluster,
            });
            report(obs, Phase::SecondHalf, total - self.field.count_on(), total);
        }
        RankMask::new(self.spec, self.ranks)
    }
}

/// Runs the whole pipeline with default options.
pub fn generate(spec: &MaskSpec) -> Result<RankMask> {
    generate_with(spec, GenerateOptions::default(), &mut ())
}

pub fn generate_with(
    spec: &MaskSpec,
    opts: GenerateOptions,
    obs: &mut dyn Observer,
) -> Result<RankMask> {
    let pattern = initial_pattern(spec)?;
    let mut field = EnergyField::from_bits(spec, opts.energy, pattern.bits())?;
    redistribute_field(&mut field, obs)?;
    let pattern = BinaryPattern::from_bits(field.on_bits().to_vec());
    let mut ordering = Ordering {
        spec: spec.clone(),
        opts,
        pattern,
        field,
        ranks: vec![UNRANKED; spec.len()],
    };
    ordering.phase1(obs)?;
    ordering.phase2(obs)?;
    ordering.phase3(obs)
}

/// Per-pixel insertion order, a permutation of `0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankMask {
    spec: MaskSpec,
    ranks: Vec<u32>,
}

impl RankMask {
    /// Fails unless `ranks` is a permutation of `0..spec.len()`.
    pub fn new(spec: MaskSpec, ranks: Vec<u32>) -> Result<Self> {
        if ranks.len() != spec.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} ranks for {} pixels",
                ranks.len(),
                spec.len()
            )));
        }
        if !is_permutation(&ranks) {
            return Err(Error::InvalidSpec("ranks are not a permutation".into()));
        }
        Ok(Self { spec, ranks })
    }

    pub fn spec(&self) -> &MaskSpec {
        &self.spec
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

pub fn is_permutation(ranks: &[u32]) -> bool {
    let mut seen = vec![false; ranks.len()];
    for &r in ranks {
        match seen.get_mut(r as usize) {
            Some(s) if !*s => *s = true,
            _ => return false,
        }
    }
    true
}

/// How ranks become texture values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Finalize {
    /// `(rank + 0.5) / N`: mean exactly one half.
    Float,
    /// `rank / N`.
    FloatStrict,
    /// `floor(rank * 2^k / N)` with bit depth `k` in `1..=16`.
    Bits(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskPayload {
    Float(Vec<f32>),
    Bits { depth: u32, values: Vec<u16> },
}

/// Finalized scalar texture.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    spec: MaskSpec,
    payload: MaskPayload,
}

impl Mask {
    /// Checks value ranges against the payload kind.
    pub fn new(spec: MaskSpec, payload: MaskPayload) -> Result<Self> {
        let len = match &payload {
            MaskPayload::Float(v) => {
                if let Some(x) = v.iter().find(|x| !(0.0..1.0).contains(*x)) {
                    return Err(Error::OutOfRange(format!("mask value {x} outside [0, 1)")));
                }
                v.len()
            }
            MaskPayload::Bits { depth, values } => {
                if !(1..=16).contains(depth) {
                    return Err(Error::OutOfRange(format!("bit depth {depth}")));
                }
                let max = ((1u32 << depth) - 1) as u16;
                if let Some(x) = values.iter().find(|&&x| x > max) {
                    return Err(Error::OutOfRange(format!(
                        "value {x} exceeds {depth}-bit range"
                    )));
                }
                values.len()
            }
        };
        if len != spec.len() {
            return Err(Error::ShapeMismatch(format!(
                "{len} values for {} pixels",
                spec.len()
            )));
        }
        Ok(Self { spec, payload })
    }

    pub fn spec(&self) -> &MaskSpec {
        &self.spec
    }

    pub fn payload(&self) -> &MaskPayload {
        &self.payload
    }

    pub fn len(&self) -> usize {
        self.spec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.is_empty()
    }

    /// Values in `[0, 1)`; k-bit levels map to their bucket centres.
    pub fn unit_values(&self) -> Vec<f64> {
        match &self.payload {
            MaskPayload::Float(v) => v.iter().map(|&x| x as f64).collect(),
            MaskPayload::Bits { depth, values } => {
                let levels = (1u32 << depth) as f64;
                values.iter().map(|&x| (x as f64 + 0.5) / levels).collect()
            }
        }
    }

    /// Ranks by ascending value, ties broken by pixel index.
    ///
    /// Recovers the generating ranks exactly for float payloads; for k-bit
    /// payloads it yields a permutation consistent with the stored levels.
    pub fn ordinal_ranks(&self) -> RankMask {
        let values = self.unit_values();
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let mut ranks = vec![0u32; values.len()];
        for (r, &i) in order.iter().enumerate() {
            ranks[i] = r as u32;
        }
        RankMask {
            spec: self.spec.clone(),
            ranks,
        }
    }
}

const LARGEST_BELOW_ONE: f32 = 0.999_999_94;

pub fn finalize(rank: &RankMask, mode: Finalize) -> Result<Mask> {
    let n = rank.len() as u64;
    let payload = match mode {
        Finalize::Float => MaskPayload::Float(
            rank.ranks
                .iter()
                .map(|&r| ((r as f64 + 0.5) / n as f64) as f32)
                .collect(),
        ),
        Finalize::FloatStrict => MaskPayload::Float(
            rank.ranks
                .iter()
                .map(|&r| (r as f64 / n as f64) as f32)
                .collect(),
        ),
        Finalize::Bits(depth) => {
            if !(1..=16).contains(&depth) {
                return Err(Error::OutOfRange(format!("bit depth {depth}")));
            }
            let levels = 1u64 << depth;
            if n < levels {
                return Err(Error::BitDepth {
                    depth,
                    needed: levels as usize,
                    pixels: n as usize,
                });
            }
            MaskPayload::Bits {
                depth,
                values: rank
                    .ranks
                    .iter()
                    .map(|&r| (r as u64 * levels / n) as u16)
                    .collect(),
            }
        }
    };
    // Above 2^24 pixels the f32 cast can round up to 1.0.
    let payload = match payload {
        MaskPayload::Float(v) => {
            MaskPayload::Float(v.into_iter().map(|x| x.min(LARGEST_BELOW_ONE)).collect())
        }
        other => other,
    };
    Mask::new(rank.spec.clone(), payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AxisGroup;

    #[test]
    fn initial_pattern_counts() {
        let spec = MaskSpec::isotropic(vec![64, 64], 1.9).unwrap();
        let p = initial_pattern(&spec).unwrap();
        assert_eq!(p.count_on(), 410);
        assert_eq!(p.on_indices().count(), 410);
        let spec = MaskSpec::isotropic(vec![4, 4], 1.9)
            .unwrap()
            .with_initial_density(0.5)
            .unwrap();
        assert_eq!(initial_pattern(&spec).unwrap().count_on(), 8);
    }

    #[test]
    fn initial_pattern_is_seeded() {
        let spec = MaskSpec::spatiotemporal(16, 16, 4).unwrap().with_seed(9);
        assert_eq!(initial_pattern(&spec).unwrap(), initial_pattern(&spec).unwrap());
        let other = spec.clone().with_seed(10);
        assert_ne!(initial_pattern(&spec).unwrap(), initial_pattern(&other).unwrap());
    }

    #[test]
    fn redistribute_fixed_point() {
        let spec = MaskSpec::isotropic(vec![16, 16], 1.5).unwrap().with_seed(3);
        let p = initial_pattern(&spec).unwrap();
        let once = redistribute(&p, &spec, GenerateOptions::default(), &mut ()).unwrap();
        let mut log = StepLog::default();
        let twice = redistribute(&once, &spec, GenerateOptions::default(), &mut log).unwrap();
        assert_eq!(once, twice);
        // One probe: remove a cluster, put it straight back.
        assert_eq!(log.0.len(), 2);
    }

    #[test]
    fn redistribute_preserves_count() {
        for seed in 0..100 {
            let spec = MaskSpec::isotropic(vec![12, 12], 1.5).unwrap().with_seed(seed);
            let p = initial_pattern(&spec).unwrap();
            let r = redistribute(&p, &spec, GenerateOptions::default(), &mut ()).unwrap();
            assert_eq!(r.count_on(), p.count_on());
        }
    }

    #[test]
    fn single_pixel_spec() {
        let spec = MaskSpec::spatiotemporal(1, 1, 1).unwrap();
        let r = generate(&spec).unwrap();
        assert_eq!(r.ranks(), &[0]);
    }

    #[test]
    fn phase_rank_ranges() {
        let spec = MaskSpec::isotropic(vec![8, 4], 1.5)
            .unwrap()
            .with_seed(5)
            .with_initial_density(0.25)
            .unwrap();
        let p = initial_pattern(&spec).unwrap();
        let p = redistribute(&p, &spec, GenerateOptions::default(), &mut ()).unwrap();
        let mut ord = Ordering::new(&spec, &p, GenerateOptions::default()).unwrap();
        ord.phase1(&mut ()).unwrap();
        let mut got: Vec<u32> = ord.ranks().iter().copied().filter(|&r| r != UNRANKED).collect();
        got.sort_unstable();
        assert_eq!(got, (0..p.count_on() as u32).collect::<Vec<_>>());
        assert_eq!(ord.field().count_on(), p.count_on());
        ord.phase2(&mut ()).unwrap();
        assert_eq!(ord.field().count_on(), 16);
        let mut got: Vec<u32> = ord.ranks().iter().copied().filter(|&r| r != UNRANKED).collect();
        got.sort_unstable();
        assert_eq!(got, (0..16).collect::<Vec<_>>());
        let mask = ord.phase3(&mut ()).unwrap();
        assert!(is_permutation(mask.ranks()));
    }

    #[test]
    fn single_on_pixel_gets_rank_zero() {
        let spec = MaskSpec::isotropic(vec![4, 4], 1.5).unwrap();
        let mut bits = vec![false; 16];
        bits[6] = true;
        let p = BinaryPattern::from_bits(bits);
        let mut ord = Ordering::new(&spec, &p, GenerateOptions::default()).unwrap();
        ord.phase1(&mut ()).unwrap();
        assert_eq!(ord.ranks()[6], 0);
    }

    #[test]
    fn phase2_is_monotone() {
        let spec = MaskSpec::spatiotemporal(8, 8, 4).unwrap().with_seed(2);
        let p = initial_pattern(&spec).unwrap();
        let mut ord = Ordering::new(&spec, &p, GenerateOptions::default()).unwrap();
        ord.phase1(&mut ()).unwrap();
        let before = ord.field().on_bits().to_vec();
        let mut log = StepLog::default();
        ord.phase2(&mut log).unwrap();
        let after = ord.field().on_bits();
        assert!(before.iter().zip(after).all(|(&b, &a)| !b || a));
        let mut seen = std::collections::HashSet::new();
        for s in &log.0 {
            if let Step::Void { index, .. } = s {
                assert!(!before[*index]);
                assert!(seen.insert(*index));
            }
        }
    }

    #[test]
    fn generate_is_deterministic() {
        let spec = MaskSpec::new(
            vec![8, 8, 4, 4],
            vec![
                AxisGroup::new(vec![0, 1], 1.9),
                AxisGroup::new(vec![2], 1.9),
                AxisGroup::new(vec![3], 1.9),
            ],
        )
        .unwrap()
        .with_seed(77);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        assert!(is_permutation(a.ranks()));
    }

    #[test]
    fn finalize_examples() {
        let spec = MaskSpec::isotropic(vec![2], 1.0).unwrap();
        let r = RankMask::new(spec, vec![0, 1]).unwrap();
        let m = finalize(&r, Finalize::Float).unwrap();
        assert_eq!(m.payload(), &MaskPayload::Float(vec![0.25, 0.75]));
        let m = finalize(&r, Finalize::FloatStrict).unwrap();
        assert_eq!(m.payload(), &MaskPayload::Float(vec![0.0, 0.5]));
        assert!(matches!(
            finalize(&r, Finalize::Bits(2)),
            Err(Error::BitDepth { .. })
        ));

        let spec = MaskSpec::isotropic(vec![256, 256], 1.0).unwrap();
        let ranks: Vec<u32> = (0..65536u32).rev().collect();
        let r = RankMask::new(spec, ranks).unwrap();
        let MaskPayload::Bits { values, .. } = finalize(&r, Finalize::Bits(8)).unwrap().payload().clone()
        else {
            panic!()
        };
        let mut hist = [0usize; 256];
        for v in values {
            hist[v as usize] += 1;
        }
        assert!(hist.iter().all(|&c| c == 256));

        let spec = MaskSpec::isotropic(vec![64, 64], 1.0).unwrap();
        let r = RankMask::new(spec, (0..4096).collect()).unwrap();
        let m = finalize(&r, Finalize::Bits(8)).unwrap();
        let MaskPayload::Bits { values, .. } = m.payload() else {
            panic!()
        };
        assert_eq!(values[0], 0);
        assert_eq!(values[4095], 255);
    }

    #[test]
    fn ordinal_ranks_recover_float_masks() {
        let spec = MaskSpec::isotropic(vec![16, 16], 1.5).unwrap().with_seed(1);
        let r = generate(&spec).unwrap();
        let m = finalize(&r, Finalize::Float).unwrap();
        assert_eq!(m.ordinal_ranks(), r);
    }

    #[test]
    fn rank_mask_rejects_non_permutations() {
        let spec = MaskSpec::isotropic(vec![3], 1.0).unwrap();
        assert!(RankMask::new(spec.clone(), vec![0, 0, 1]).is_err());
        assert!(RankMask::new(spec.clone(), vec![0, 1, 3]).is_err());
        assert!(RankMask::new(spec, vec![0, 1]).is_err());
    }
}
