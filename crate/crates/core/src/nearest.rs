//! Nearest-neighbour queries on planar point sets.

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Static kd-tree over points of the plane.
pub(crate) struct PointIndex {
    tree: ImmutableKdTree<f64, 2>,
}

/// Tree coordinates are rotated off the axes: point sets on axis-parallel
/// lines otherwise produce degenerate splits and slow queries.
fn key(z: Complex64) -> [f64; 2] {
    let w = z * Complex64::new(0.5f64.cos(), 0.5f64.sin());
    [w.re, w.im]
}

impl PointIndex {
    pub(crate) fn new(points: &[Complex64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Resolution {
                detail: "nearest-neighbour index over an empty point set".into(),
            });
        }
        let keys: Vec<[f64; 2]> = points.iter().map(|&z| key(z)).collect();
        let tree = ImmutableKdTree::new_from_slice(&keys).map_err(|e| Error::Resolution {
            detail: format!("kd-tree construction failed: {e:?}"),
        })?;
        Ok(Self { tree })
    }

    /// Index of and distance to the nearest point.
    pub(crate) fn nearest(&self, z: Complex64) -> (usize, f64) {
        let res = self
            .tree
            .query(&key(z))
            .nearest_one::<SquaredEuclidean<f64>>()
            .execute();
        (res.item as usize, res.distance.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_brute_force(
            pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..200),
            q in (-12.0f64..12.0, -12.0f64..12.0),
        ) {
            let pts: Vec<Complex64> = pts.into_iter().map(|(x, y)| Complex64::new(x, y)).collect();
            let z = Complex64::new(q.0, q.1);
            let idx = PointIndex::new(&pts).unwrap();
            let (_, d) = idx.nearest(z);
            let brute = pts.iter().map(|p| (p - z).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!((d - brute).abs() <= 1e-12 * (1.0 + brute));
        }
    }

    #[test]
    fn collinear_points() {
        let pts: Vec<Complex64> = (0..1000)
            .map(|i| Complex64::new(1.0, i as f64 * 1e-3))
            .collect();
        let idx = PointIndex::new(&pts).unwrap();
        let (i, d) = idx.nearest(Complex64::new(1.5, 0.2501));
        assert_eq!(i, 250);
        assert!((d - (0.25f64 + 1e-8).sqrt()).abs() < 1e-9);
    }
}
