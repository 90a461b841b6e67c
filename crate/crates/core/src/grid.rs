//! Grid geometry: extents, axis groups, row-major indexing and wrapped
//! distances.
//!
//! Linear indices are row-major with axis 0 varying fastest, so a
//! `64x64x16` mask stores sixteen contiguous `64x64` slices.

use crate::error::{Error, Result};

/// Default energy falloff for every group.
pub const DEFAULT_SIGMA: f64 = 1.9;

/// Default fraction of pixels switched on in the initial binary pattern.
pub const DEFAULT_INITIAL_DENSITY: f64 = 0.10;

/// A set of axes that must form joint blue noise when only they vary.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisGroup {
    axes: Vec<usize>,
    sigma: f64,
    toroidal: Vec<bool>,
}

impl AxisGroup {
    /// A group wrapping on all of its axes.
    pub fn new(axes: Vec<usize>, sigma: f64) -> Self {
        let toroidal = vec![true; axes.len()];
        Self {
            axes,
            sigma,
            toroidal,
        }
    }

    /// A group with an explicit wrap flag per axis (same order as `axes`).
    pub fn with_toroidal(axes: Vec<usize>, sigma: f64, toroidal: Vec<bool>) -> Self {
        Self {
            axes,
            sigma,
            toroidal,
        }
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn toroidal(&self) -> &[bool] {
        &self.toroidal
    }

    /// Wrap flag for `axis`, if the axis belongs to this group.
    pub fn is_toroidal(&self, axis: usize) -> Option<bool> {
        self.axes
            .iter()
            .position(|&a| a == axis)
            .map(|i| self.toroidal[i])
    }
}

/// Full description of a mask to generate.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    sizes: Vec<usize>,
    groups: Vec<AxisGroup>,
    seed: u64,
    initial_density: f64,
    strides: Vec<usize>,
    len: usize,
}

impl MaskSpec {
    /// Validates and builds a spec with seed 0 and the default density.
    pub fn new(sizes: Vec<usize>, groups: Vec<AxisGroup>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidSpec("no axes".into()));
        }
        if let Some(a) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidSpec(format!("axis {a} has extent 0")));
        }
        let mut len: usize = 1;
        let mut strides = Vec::with_capacity(sizes.len());
        for &s in &sizes {
            strides.push(len);
            len = len
                .checked_mul(s)
                .ok_or_else(|| Error::InvalidSpec("pixel count overflows".into()))?;
        }
        if groups.is_empty() {
            return Err(Error::InvalidSpec("no axis groups".into()));
        }
        let mut seen = vec![false; sizes.len()];
        for (gi, g) in groups.iter().enumerate() {
            if g.axes.is_empty() {
                return Err(Error::InvalidSpec(format!("group {gi} has no axes")));
            }
            if g.toroidal.len() != g.axes.len() {
                return Err(Error::InvalidSpec(format!(
                    "group {gi} has {} wrap flags for {} axes",
                    g.toroidal.len(),
                    g.axes.len()
                )));
            }
            if !(g.sigma > 0.0 && g.sigma.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "group {gi} sigma {} is not positive",
                    g.sigma
                )));
            }
            for &a in &g.axes {
                if a >= sizes.len() {
                    return Err(Error::InvalidSpec(format!(
                        "group {gi} names axis {a}, spec has {} axes",
                        sizes.len()
                    )));
                }
                if seen[a] {
                    return Err(Error::InvalidSpec(format!("axis {a} appears in two groups")));
                }
                seen[a] = true;
            }
        }
        if let Some(a) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidSpec(format!("axis {a} belongs to no group")));
        }
        Ok(Self {
            sizes,
            groups,
            seed: 0,
            initial_density: DEFAULT_INITIAL_DENSITY,
            strides,
            len,
        })
    }

    /// One group containing every axis: classic D-dimensional blue noise.
    pub fn isotropic(sizes: Vec<usize>, sigma: f64) -> Result<Self> {
        let axes = (0..sizes.len()).collect();
        Self::new(sizes, vec![AxisGroup::new(axes, sigma)])
    }

    /// `width x height x frames` with groups `{x, y}` and `{t}`.
    pub fn spatiotemporal(width: usize, height: usize, frames: usize) -> Result<Self> {
        Self::new(
            vec![width, height, frames],
            vec![
                AxisGroup::new(vec![0, 1], DEFAULT_SIGMA),
                AxisGroup::new(vec![2], DEFAULT_SIGMA),
            ],
        )
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_initial_density(mut self, density: f64) -> Result<Self> {
        if !(density > 0.0 && density <= 0.5) {
            return Err(Error::DensityOutOfRange(density));
        }
        self.initial_density = density;
        Ok(self)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn groups(&self) -> &[AxisGroup] {
        &self.groups
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn initial_density(&self) -> f64 {
        self.initial_density
    }

    pub fn dims(&self) -> usize {
        self.sizes.len()
    }

    /// Total pixel count.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Wrap flag of an axis.
    pub fn axis_toroidal(&self, axis: usize) -> bool {
        self.groups
            .iter()
            .find_map(|g| g.is_toroidal(axis))
            .unwrap_or(true)
    }

    pub fn linearize(&self, p: &Coord) -> Result<usize> {
        if p.0.len() != self.sizes.len() {
            return Err(Error::InvalidCoord(format!(
                "{} components for {} axes",
                p.0.len(),
                self.sizes.len()
            )));
        }
        let mut index = 0;
        for (a, (&c, &s)) in p.0.iter().zip(&self.sizes).enumerate() {
            if c >= s {
                return Err(Error::InvalidCoord(format!(
                    "component {c} on axis {a} exceeds extent {s}"
                )));
            }
            index += c * self.strides[a];
        }
        Ok(index)
    }

    pub fn delinearize(&self, index: usize) -> Result<Coord> {
        if index >= self.len {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.len,
            });
        }
        Ok(Coord(self.components(index)))
    }

    /// Unchecked coordinate components of an in-range index.
    pub(crate) fn components(&self, mut index: usize) -> Vec<usize> {
        self.sizes
            .iter()
            .map(|&s| {
                let c = index % s;
                index /= s;
                c
            })
            .collect()
    }
}

/// Integer grid coordinate, one component per axis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord(pub Vec<usize>);

impl Coord {
    pub fn new(components: impl Into<Vec<usize>>) -> Self {
        Self(components.into())
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Coord {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Squared per-axis distance, taking the short way around when wrapping.
#[inline]
pub fn toroidal_delta_sq(a: usize, b: usize, extent: usize, toroidal: bool) -> usize {
    let d = a.abs_diff(b);
    let d = if toroidal { d.min(extent - d) } else { d };
    d * d
}

/// Squared distance between the projections of `p` and `q` onto the group's axes.
pub fn group_distance_sq(p: &Coord, q: &Coord, group: &AxisGroup, spec: &MaskSpec) -> usize {
    group
        .axes
        .iter()
        .zip(&group.toroidal)
        .map(|(&a, &wrap)| toroidal_delta_sq(p.0[a], q.0[a], spec.sizes[a], wrap))
        .sum()
}

/// True when `p` and `q` agree on every axis outside the group.
pub fn complement_equal(p: &Coord, q: &Coord, group: &AxisGroup) -> bool {
    p.0.iter()
        .zip(&q.0)
        .enumerate()
        .all(|(a, (x, y))| x == y || group.axes.contains(&a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn delta_examples() {
        assert_eq!(toroidal_delta_sq(2, 62, 64, true), 16);
        assert_eq!(toroidal_delta_sq(5, 5, 64, true), 0);
        assert_eq!(toroidal_delta_sq(0, 32, 64, true), 1024);
        assert_eq!(toroidal_delta_sq(2, 62, 64, false), 3600);
    }

    #[test]
    fn group_distance_examples() {
        let spec = MaskSpec::spatiotemporal(64, 64, 16).unwrap();
        let xy = &spec.groups()[0];
        let z = &spec.groups()[1];
        let p = Coord::new([1, 1, 0]);
        let q = Coord::new([4, 5, 7]);
        assert_eq!(group_distance_sq(&p, &q, xy, &spec), 25);
        assert_eq!(group_distance_sq(&p, &p, xy, &spec), 0);
        let p = Coord::new([0, 0, 1]);
        let q = Coord::new([0, 0, 15]);
        assert_eq!(group_distance_sq(&p, &q, z, &spec), 4);
    }

    #[test]
    fn linearize_corners() {
        let spec = MaskSpec::spatiotemporal(64, 64, 16).unwrap();
        assert_eq!(spec.linearize(&Coord::new([0, 0, 0])).unwrap(), 0);
        assert_eq!(
            spec.linearize(&Coord::new([63, 63, 15])).unwrap(),
            spec.len() - 1
        );
        assert_eq!(spec.linearize(&Coord::new([1, 0, 0])).unwrap(), 1);
        assert_eq!(spec.linearize(&Coord::new([0, 1, 0])).unwrap(), 64);
        assert!(spec.linearize(&Coord::new([64, 0, 0])).is_err());
        assert!(spec.linearize(&Coord::new([0, 0])).is_err());
        assert!(matches!(
            spec.delinearize(spec.len()),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_bad_groups() {
        let dup = MaskSpec::new(
            vec![8, 8, 4],
            vec![AxisGroup::new(vec![0, 1], 1.9), AxisGroup::new(vec![1, 2], 1.9)],
        );
        assert!(matches!(dup, Err(Error::InvalidSpec(_))));
        let missing = MaskSpec::new(vec![8, 8, 4], vec![AxisGroup::new(vec![0, 1], 1.9)]);
        assert!(missing.is_err());
        let sigma = MaskSpec::new(vec![8], vec![AxisGroup::new(vec![0], 0.0)]);
        assert!(sigma.is_err());
        assert!(MaskSpec::new(vec![8, 0], vec![AxisGroup::new(vec![0, 1], 1.0)]).is_err());
        let spec = MaskSpec::isotropic(vec![4, 4], 1.5).unwrap();
        assert!(spec.clone().with_initial_density(0.0).is_err());
        assert!(spec.clone().with_initial_density(0.51).is_err());
        assert!(spec.with_initial_density(0.5).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn delta_symmetric_and_bounded(ext in 1usize..200, a in 0usize..200, b in 0usize..200) {
            let (a, b) = (a % ext, b % ext);
            let d = toroidal_delta_sq(a, b, ext, true);
            prop_assert_eq!(d, toroidal_delta_sq(b, a, ext, true));
            prop_assert!(4 * d <= ext * ext);
        }

        #[test]
        fn group_distance_symmetric(
            p in proptest::collection::vec(0usize..16, 3),
            q in proptest::collection::vec(0usize..16, 3),
        ) {
            let spec = MaskSpec::spatiotemporal(16, 16, 16).unwrap();
            let (p, q) = (Coord(p), Coord(q));
            for g in spec.groups() {
                let d = group_distance_sq(&p, &q, g, &spec);
                prop_assert_eq!(d, group_distance_sq(&q, &p, g, &spec));
                let same = g.axes().iter().all(|&a| p.0[a] == q.0[a]);
                prop_assert_eq!(d == 0, same);
            }
        }

        #[test]
        fn linearize_round_trip(i in 0usize..(13 * 7 * 5 * 3)) {
            let spec = MaskSpec::isotropic(vec![13, 7, 5, 3], 1.0).unwrap();
            let c = spec.delinearize(i).unwrap();
            prop_assert_eq!(spec.linearize(&c).unwrap(), i);
        }
    }
}
