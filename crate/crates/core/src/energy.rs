//! Gaussian pair energy and the incrementally maintained energy field.
//!
//! Every ON pixel emits energy into the hyperplane of each axis group that
//! passes through it: for group `g` the contribution to `q` is
//! `exp(-|p_g - q_g|^2 / (2 sigma_g^2))` when `p` and `q` agree on all axes
//! outside `g`, and zero otherwise.
//!
//! Field values are held in signed 64-bit fixed point. Each pair weight is
//! rounded once when the stencil is built, so turning a pixel on and off
//! again restores the field bit for bit and equal neighbourhoods always
//! compare equal, independent of update order. The scale leaves headroom
//! for the largest possible field value (every pixel ON), which for the
//! default sigma puts the resolution near `2^-57`.

use crate::error::{Error, Result};
use crate::grid::{complement_equal, group_distance_sq, Coord, MaskSpec};

/// Group terms whose exponent exceeds this are dropped when truncating.
pub const TRUNCATION_EXPONENT: f64 = 40.0;

/// Energy between two pixels, evaluated directly from the formula.
pub fn pair_energy(p: &Coord, q: &Coord, spec: &MaskSpec) -> f64 {
    spec.groups()
        .iter()
        .filter(|g| complement_equal(p, q, g))
        .map(|g| {
            let d2 = group_distance_sq(p, q, g, spec) as f64;
            (-d2 / (2.0 * g.sigma() * g.sigma())).exp()
        })
        .sum()
}

/// Direction of a deposit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// Turn an OFF pixel on and add its energy.
    Deposit,
    /// Turn an ON pixel off and remove its energy.
    Withdraw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyOptions {
    /// Skip group terms below `exp(-TRUNCATION_EXPONENT)`.
    pub truncate: bool,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self { truncate: true }
    }
}

#[derive(Debug, Clone)]
struct GroupStencil {
    axes: Vec<usize>,
    toroidal: Vec<bool>,
    /// Start of each axis' shift table within the scratch buffer.
    table_base: Vec<usize>,
    table_len: usize,
    /// `axes.len()` scratch slots per entry. A wrapping axis indexes its
    /// table by forward offset in `0..extent`, an open axis by
    /// `delta + extent - 1`.
    slots: Vec<u32>,
    weights: Vec<i64>,
}

/// Marks a shift that leaves the grid on an open axis.
const OUTSIDE: i64 = i64::MIN;

#[derive(Debug, Clone)]
struct Kernel {
    groups: Vec<GroupStencil>,
    scale: f64,
}

impl Kernel {
    fn build(spec: &MaskSpec, opts: EnergyOptions) -> Self {
        // axes, toroidal flags, offsets, energies
        type Stencil = (Vec<usize>, Vec<bool>, Vec<i64>, Vec<f64>);
        let mut raw: Vec<Stencil> = Vec::new();
        let mut bound = 0.0f64;
        for g in spec.groups() {
            let two_sigma_sq = 2.0 * g.sigma() * g.sigma();
            // Candidate (offset, delta^2) lists per axis.
            let per_axis: Vec<Vec<(i64, f64)>> = g
                .axes()
                .iter()
                .zip(g.toroidal())
                .map(|(&a, &wrap)| {
                    let ext = spec.sizes()[a] as i64;
                    if wrap {
                        (0..ext)
                            .map(|o| {
                                let d = o.min(ext - o);
                                (o, (d * d) as f64)
                            })
                            .collect()
                    } else {
                        (-(ext - 1)..ext).map(|o| (o, (o * o) as f64)).collect()
                    }
                })
                .collect();
            let cutoff = if opts.truncate {
                TRUNCATION_EXPONENT * two_sigma_sq
            } else {
                f64::INFINITY
            };
            let mut offsets = Vec::new();
            let mut energies = Vec::new();
            let mut cursor = vec![0usize; per_axis.len()];
            'product: loop {
                let d2: f64 = cursor
                    .iter()
                    .zip(&per_axis)
                    .map(|(&c, list)| list[c].1)
                    .sum();
                if d2 <= cutoff {
                    let e = (-d2 / two_sigma_sq).exp();
                    if e > 0.0 {
                        offsets.extend(cursor.iter().zip(&per_axis).map(|(&c, list)| list[c].0));
                        energies.push(e);
                    }
                }
                for k in 0..cursor.len() {
                    cursor[k] += 1;
                    if cursor[k] < per_axis[k].len() {
                        continue 'product;
                    }
                    cursor[k] = 0;
                }
                break;
            }
            bound += energies.iter().sum::<f64>();
            raw.push((g.axes().to_vec(), g.toroidal().to_vec(), offsets, energies));
        }

        let headroom = (bound + 1.0).log2().ceil() as i32;
        let frac_bits = (62 - headroom).clamp(1, 60);
        let scale = (frac_bits as f64).exp2();
        let groups = raw
            .into_iter()
            .map(|(axes, toroidal, offsets, energies)| {
                let n = axes.len();
                let mut table_base = Vec::with_capacity(n);
                let mut table_len = 0;
                for (&a, &wrap) in axes.iter().zip(&toroidal) {
                    table_base.push(table_len);
                    let ext = spec.sizes()[a];
                    table_len += if wrap { ext } else { 2 * ext - 1 };
                }
                let mut slots = Vec::with_capacity(offsets.len());
                let mut weights = Vec::with_capacity(energies.len());
                for (e, off) in energies.iter().zip(offsets.chunks(n)) {
                    let w = (e * scale).round() as i64;
                    if w > 0 {
                        weights.push(w);
                        for k in 0..n {
                            let local = if toroidal[k] {
                                off[k]
                            } else {
                                off[k] + spec.sizes()[axes[k]] as i64 - 1
                            };
                            slots.push((table_base[k] as i64 + local) as u32);
                        }
                    }
                }
                GroupStencil {
                    axes,
                    toroidal,
                    table_base,
                    table_len,
                    slots,
                    weights,
                }
            })
            .collect();
        Self { groups, scale }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Block {
    max_on: Option<(i64, usize)>,
    min_off: Option<(i64, usize)>,
    dirty: bool,
}

/// Values, states and the per-block extremum cache.
#[derive(Debug, Clone)]
struct State {
    values: Vec<i64>,
    on: Vec<bool>,
    block_len: usize,
    blocks: Vec<Block>,
    dirty: Vec<usize>,
}

impl State {
    fn mark_dirty(&mut self, block: usize) {
        let b = &mut self.blocks[block];
        if !b.dirty {
            b.dirty = true;
            self.dirty.push(block);
        }
    }

    fn refresh(&mut self) {
        while let Some(bi) = self.dirty.pop() {
            let start = bi * self.block_len;
            let end = (start + self.block_len).min(self.values.len());
            let mut max_on: Option<(i64, usize)> = None;
            let mut min_off: Option<(i64, usize)> = None;
            for i in start..end {
                let v = self.values[i];
                if self.on[i] {
                    if max_on.is_none_or(|(m, _)| v > m) {
                        max_on = Some((v, i));
                    }
                } else if min_off.is_none_or(|(m, _)| v < m) {
                    min_off = Some((v, i));
                }
            }
            self.blocks[bi] = Block {
                max_on,
                min_off,
                dirty: false,
            };
        }
    }

    #[inline]
    fn update(&mut self, i: usize, delta: i64) {
        let v = self.values[i] + delta;
        self.values[i] = v;
        let bi = i / self.block_len;
        let block = &mut self.blocks[bi];
        if block.dirty {
            return;
        }
        let slot = if self.on[i] {
            &mut block.max_on
        } else {
            &mut block.min_off
        };
        // `better(a, b)`: value `a` beats `b` for this slot's extremum.
        let better = |a: i64, b: i64| if self.on[i] { a > b } else { a < b };
        let invalid = match *slot {
            Some((m, mi)) if mi == i => {
                if v == m || better(v, m) {
                    *slot = Some((v, i));
                    false
                } else {
                    true
                }
            }
            Some((m, mi)) => {
                if better(v, m) || (v == m && i < mi) {
                    *slot = Some((v, i));
                }
                false
            }
            None => true,
        };
        if invalid {
            block.dirty = true;
            self.dirty.push(bi);
        }
    }
}

/// Dense energy field with the ON/OFF state of every pixel.
///
/// Extremum queries use per-block cached candidates. A block is rescanned
/// only when an update can no longer be resolved from its cached extremum,
/// so results always equal a full scan with smallest-index tie-breaking.
#[derive(Debug, Clone)]
pub struct EnergyField {
    spec: MaskSpec,
    kernel: Kernel,
    state: State,
    count_on: usize,
    scratch: Vec<i64>,
}

impl EnergyField {
    /// An all-OFF, all-zero field.
    pub fn new(spec: &MaskSpec, opts: EnergyOptions) -> Self {
        let n = spec.len();
        let block_len = ((n as f64).sqrt() as usize)
            .next_power_of_two()
            .clamp(8, 1024);
        let blocks = (0..n.div_ceil(block_len))
            .map(|b| Block {
                max_on: None,
                min_off: Some((0, b * block_len)),
                dirty: false,
            })
            .collect();
        Self {
            spec: spec.clone(),
            kernel: Kernel::build(spec, opts),
            state: State {
                values: vec![0; n],
                on: vec![false; n],
                block_len,
                blocks,
                dirty: Vec::new(),
            },
            count_on: 0,
            scratch: Vec::new(),
        }
    }

    /// A field with every pixel in `bits` switched on.
    pub fn from_bits(spec: &MaskSpec, opts: EnergyOptions, bits: &[bool]) -> Result<Self> {
        if bits.len() != spec.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} bits for {} pixels",
                bits.len(),
                spec.len()
            )));
        }
        let mut field = Self::new(spec, opts);
        for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            field.turn_on(i)?;
        }
        Ok(field)
    }

    pub fn spec(&self) -> &MaskSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.state.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.values.is_empty()
    }

    pub fn count_on(&self) -> usize {
        self.count_on
    }

    pub fn is_on(&self, index: usize) -> bool {
        self.state.on[index]
    }

    pub fn on_bits(&self) -> &[bool] {
        &self.state.on
    }

    /// Field value at a pixel.
    pub fn value(&self, index: usize) -> f64 {
        self.state.values[index] as f64 / self.kernel.scale
    }

    pub fn values(&self) -> Vec<f64> {
        self.state
            .values
            .iter()
            .map(|&v| v as f64 / self.kernel.scale)
            .collect()
    }

    /// Fixed-point values; one unit is `1 / fixed_point_scale()`.
    pub fn raw_values(&self) -> &[i64] {
        &self.state.values
    }

    pub fn fixed_point_scale(&self) -> f64 {
        self.kernel.scale
    }

    /// Adds or removes the energy of pixel `p`, flipping its state.
    pub fn deposit(&mut self, p: &Coord, sign: Sign) -> Result<()> {
        let index = self.spec.linearize(p)?;
        match sign {
            Sign::Deposit => self.turn_on(index),
            Sign::Withdraw => self.turn_off(index),
        }
    }

    pub fn turn_on(&mut self, index: usize) -> Result<()> {
        self.toggle(index, true)
    }

    pub fn turn_off(&mut self, index: usize) -> Result<()> {
        self.toggle(index, false)
    }

    /// ON pixel of maximal energy; ties go to the smallest index.
    pub fn tightest_cluster(&mut self) -> Result<usize> {
        self.state.refresh();
        let mut best: Option<(i64, usize)> = None;
        for (v, i) in self.state.blocks.iter().filter_map(|b| b.max_on) {
            if best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, i));
            }
        }
        best.map(|(_, i)| i).ok_or(Error::EmptyOnSet)
    }

    /// OFF pixel of minimal energy; ties go to the smallest index.
    pub fn largest_void(&mut self) -> Result<usize> {
        self.state.refresh();
        let mut best: Option<(i64, usize)> = None;
        for (v, i) in self.state.blocks.iter().filter_map(|b| b.min_off) {
            if best.is_none_or(|(bv, _)| v < bv) {
                best = Some((v, i));
            }
        }
        best.map(|(_, i)| i).ok_or(Error::EmptyOffSet)
    }

    pub fn tightest_cluster_coord(&mut self) -> Result<Coord> {
        let i = self.tightest_cluster()?;
        self.spec.delinearize(i)
    }

    pub fn largest_void_coord(&mut self) -> Result<Coord> {
        let i = self.largest_void()?;
        self.spec.delinearize(i)
    }

    fn toggle(&mut self, index: usize, turn_on: bool) -> Result<()> {
        let len = self.len();
        if index >= len {
            return Err(Error::IndexOutOfRange { index, len });
        }
        if self.state.on[index] == turn_on {
            return Err(Error::DepositPrecondition {
                index,
                state: if turn_on { "on" } else { "off" },
            });
        }
        self.state.on[index] = turn_on;
        self.state.mark_dirty(index / self.state.block_len);
        let sign = if turn_on {
            self.count_on += 1;
            1
        } else {
            self.count_on -= 1;
            -1
        };
        self.apply(index, sign);
        Ok(())
    }

    fn apply(&mut self, index: usize, sign: i64) {
        let coords = self.spec.components(index);
        let Self {
            spec,
            kernel,
            state,
            scratch,
            ..
        } = self;
        let sizes = spec.sizes();
        let strides = spec.strides();
        for g in &kernel.groups {
            // Linear-index shift for every admissible per-axis offset.
            scratch.clear();
            scratch.resize(g.table_len, OUTSIDE);
            let mut open = false;
            for (k, (&a, &wrap)) in g.axes.iter().zip(&g.toroidal).enumerate() {
                let c = coords[a] as i64;
                let ext = sizes[a] as i64;
                let stride = strides[a] as i64;
                let table = &mut scratch[g.table_base[k]..];
                if wrap {
                    for o in 0..ext {
                        let nc = if c + o >= ext { c + o - ext } else { c + o };
                        table[o as usize] = (nc - c) * stride;
                    }
                } else {
                    open = true;
                    for d in (-c).max(-(ext - 1))..(ext - c) {
                        table[(d + ext - 1) as usize] = d * stride;
                    }
                }
            }
            let n = g.axes.len();
            let base = index as i64;
            match (n, open) {
                (1, false) => {
                    for (s, &w) in g.slots.iter().zip(&g.weights) {
                        let t = base + scratch[*s as usize];
                        state.update(t as usize, sign * w);
                    }
                }
                (2, false) => {
                    for (s, &w) in g.slots.chunks_exact(2).zip(&g.weights) {
                        let t = base + scratch[s[0] as usize] + scratch[s[1] as usize];
                        state.update(t as usize, sign * w);
                    }
                }
                _ => {
                    'entry: for (s, &w) in g.slots.chunks_exact(n).zip(&g.weights) {
                        let mut t = base;
                        for &slot in s {
                            let shift = scratch[slot as usize];
                            if shift == OUTSIDE {
                                continue 'entry;
                            }
                            t += shift;
                        }
                        state.update(t as usize, sign * w);
                    }
                }
            }
        }
    }
}
