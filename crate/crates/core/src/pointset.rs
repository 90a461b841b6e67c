//! Point sets from thresholded masks and importance-driven sample selection.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::{Mask, RankMask};
use crate::grid::{Coord, MaskSpec};

const AXIS_NAMES: [&str; 4] = ["x", "y", "z", "w"];

/// Pixels whose rank falls under a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    sizes: Vec<usize>,
    threshold: f64,
    indices: Vec<usize>,
    points: Vec<Coord>,
    slice_counts: Vec<usize>,
}

impl PointSet {
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Coordinates in ascending linear index order.
    pub fn points(&self) -> &[Coord] {
        &self.points
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point count per slice of the last axis.
    pub fn slice_counts(&self) -> &[usize] {
        &self.slice_counts
    }

    /// Points of one slice of the last axis, as coordinates over the remaining axes.
    pub fn slice(&self, t: usize) -> Vec<Vec<usize>> {
        let last = self.sizes.len() - 1;
        self.points
            .iter()
            .filter(|c| c.0[last] == t)
            .map(|c| c.0[..last].to_vec())
            .collect()
    }

    /// Header `x,y,z,...` then one coordinate per row.
    pub fn to_csv(&self) -> String {
        let mut s = (0..self.sizes.len())
            .map(|a| AXIS_NAMES.get(a).map_or_else(|| format!("a{a}"), |n| n.to_string()))
            .collect::<Vec<_>>()
            .join(",");
        s.push('\n');
        for c in &self.points {
            let row: Vec<String> = c.0.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    /// Each coordinate as consecutive little-endian `u16` components.
    pub fn to_packed_u16(&self) -> Result<Vec<u8>> {
        if self.sizes.iter().any(|&s| s > 1 << 16) {
            return Err(Error::UnsupportedExtent(format!(
                "extents {:?} exceed u16 coordinates",
                self.sizes
            )));
        }
        let mut out = Vec::with_capacity(self.points.len() * self.sizes.len() * 2);
        for c in &self.points {
            for &v in &c.0 {
                out.extend_from_slice(&(v as u16).to_le_bytes());
            }
        }
        Ok(out)
    }
}

fn points_from_ranks(spec: &MaskSpec, ranks: &[u32], t: f64) -> Result<PointSet> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("threshold {t} outside [0, 1]")));
    }
    let n = ranks.len();
    let keep = ((t * n as f64).floor() as usize).min(n);
    let indices: Vec<usize> = (0..n).filter(|&i| (ranks[i] as usize) < keep).collect();
    let mut points = Vec::with_capacity(indices.len());
    let last = spec.dims() - 1;
    let mut slice_counts = vec![0; spec.sizes()[last]];
    for &i in &indices {
        let c = spec.delinearize(i)?;
        slice_counts[c.0[last]] += 1;
        points.push(c);
    }
    Ok(PointSet {
        sizes: spec.sizes().to_vec(),
        threshold: t,
        indices,
        points,
        slice_counts,
    })
}

/// `{p : rank[p] < floor(t * N)}`.
pub fn threshold_points(ranks: &RankMask, t: f64) -> Result<PointSet> {
    points_from_ranks(ranks.spec(), ranks.ranks(), t)
}

/// Thresholds a finalized mask through its ordinal ranks, so counts stay exact under quantization ties.
pub fn threshold_mask(mask: &Mask, t: f64) -> Result<PointSet> {
    threshold_points(&mask.ordinal_ranks(), t)
}

/// `decision[p] = importance[p] > mask[p]`.
pub fn select_samples(importance: &[f64], mask: &[f64]) -> Result<Vec<bool>> {
    if importance.len() != mask.len() {
        return Err(Error::ShapeMismatch(format!(
            "importance has {} pixels, mask {}",
            importance.len(),
            mask.len()
        )));
    }
    Ok(importance
        .par_iter()
        .zip(mask)
        .map(|(f, g)| f > g)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub frames: usize,
    /// Fraction of pixels selected at least once.
    pub unique_fraction: f64,
    /// Entry `k` counts pixels selected in exactly `k` frames.
    pub histogram: Vec<usize>,
}

pub fn coverage_stats(decisions: &[Vec<bool>]) -> Result<CoverageReport> {
    let pixels = decisions.first().map_or(0, Vec::len);
    if decisions.iter().any(|d| d.len() != pixels) {
        return Err(Error::ShapeMismatch("decision maps differ in size".into()));
    }
    let mut counts = vec![0usize; pixels];
    for d in decisions {
        for (c, &hit) in counts.iter_mut().zip(d) {
            *c += hit as usize;
        }
    }
    let mut histogram = vec![0; decisions.len() + 1];
    for &c in &counts {
        histogram[c] += 1;
    }
    let unique = pixels - histogram[0];
    Ok(CoverageReport {
        frames: decisions.len(),
        unique_fraction: if pixels == 0 { 0.0 } else { unique as f64 / pixels as f64 },
        histogram,
    })
}

/// Smallest wrap-around Euclidean distance between two distinct points of a 2D set.
pub fn min_toroidal_distance(points: &[Vec<usize>], width: usize, height: usize) -> f64 {
    let wrap = |a: usize, b: usize, n: usize| {
        let d = a.abs_diff(b);
        d.min(n - d) as f64
    };
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            points[i + 1..]
                .iter()
                .map(|q| wrap(p[0], q[0], width).hypot(wrap(p[1], q[1], height)))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{finalize, generate, Finalize};
    use proptest::prelude::*;

    fn identity_mask(sizes: Vec<usize>) -> RankMask {
        let spec = MaskSpec::isotropic(sizes, 1.9).unwrap();
        let n = spec.len() as u32;
        RankMask::new(spec, (0..n).rev().collect()).unwrap()
    }

    #[test]
    fn extremes() {
        let m = identity_mask(vec![4, 4, 2]);
        assert!(threshold_points(&m, 0.0).unwrap().is_empty());
        let all = threshold_points(&m, 1.0).unwrap();
        assert_eq!(all.len(), 32);
        assert_eq!(all.slice_counts(), &[16, 16]);
        assert!(threshold_points(&m, 1.5).is_err());
        assert!(threshold_points(&m, -0.1).is_err());
    }

    #[test]
    fn quantized_mask_keeps_exact_count() {
        let spec = MaskSpec::spatiotemporal(16, 16, 4).unwrap().with_seed(3);
        let ranks = generate(&spec).unwrap();
        let mask = finalize(&ranks, Finalize::Bits(4)).unwrap();
        for t in [0.1, 0.25, 0.33, 0.5] {
            let p = threshold_mask(&mask, t).unwrap();
            assert_eq!(p.len(), (t * 1024.0).floor() as usize);
        }
    }

    #[test]
    fn selection_rules() {
        let mask: Vec<f64> = (0..64).map(|i| (i as f64 + 0.5) / 64.0).collect();
        assert!(select_samples(&[1.0; 64], &mask).unwrap().iter().all(|&b| b));
        assert!(select_samples(&[0.0; 64], &mask).unwrap().iter().all(|&b| !b));
        for c in [0.1, 0.25, 0.3, 0.77] {
            let n = select_samples(&[c; 64], &mask).unwrap().iter().filter(|&&b| b).count();
            let exact = c * 64.0;
            assert!(n == exact.floor() as usize || n == exact.ceil() as usize, "{c}: {n}");
        }
        assert!(select_samples(&[0.5; 3], &mask).is_err());
    }

    #[test]
    fn single_frame_coverage() {
        let d = vec![vec![true, false, true, false]];
        let r = coverage_stats(&d).unwrap();
        assert_eq!(r.unique_fraction, 0.5);
        assert_eq!(r.histogram, vec![2, 2]);
        assert!(coverage_stats(&[vec![true], vec![]]).is_err());
    }

    #[test]
    fn exports() {
        let m = identity_mask(vec![2, 2]);
        let p = threshold_points(&m, 0.5).unwrap();
        assert_eq!(p.to_csv(), "x,y\n0,1\n1,1\n");
        assert_eq!(p.to_packed_u16().unwrap(), vec![0, 0, 1, 0, 1, 0, 1, 0]);
        assert_eq!(p.slice(1), vec![vec![0], vec![1]]);
    }

    #[test]
    fn min_distance() {
        let pts = vec![vec![0, 0], vec![7, 0], vec![3, 4]];
        assert_eq!(min_toroidal_distance(&pts, 8, 8), 1.0);
        assert_eq!(min_toroidal_distance(&pts[..1], 8, 8), f64::INFINITY);
    }

    proptest! {
        #[test]
        fn thresholds_nest(perm in Just((0..60u32).collect::<Vec<_>>()).prop_shuffle(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let spec = MaskSpec::isotropic(vec![6, 10], 1.9).unwrap();
            let m = RankMask::new(spec, perm).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let small = threshold_points(&m, lo).unwrap();
            let large = threshold_points(&m, hi).unwrap();
            prop_assert!(small.indices().iter().all(|i| large.indices().contains(i)));
            prop_assert_eq!(large.len(), (hi * 60.0).floor() as usize);
        }

        #[test]
        fn selection_monotone(mask in prop::collection::vec(0.0..1.0f64, 32), f in prop::collection::vec(0.0..=1.0f64, 32), bump in prop::collection::vec(0.0..0.5f64, 32)) {
            let g: Vec<f64> = f.iter().zip(&bump).map(|(a, b)| (a + b).min(1.0)).collect();
            let lo = select_samples(&f, &mask).unwrap();
            let hi = select_samples(&g, &mask).unwrap();
            prop_assert!(lo.iter().zip(&hi).all(|(a, b)| !a || *b));
        }
    }
}
