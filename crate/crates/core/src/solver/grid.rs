use crate::error::{Error, Result};

/// Lattice `(i/M, j/M)` with `i + j <= M` over `(q_low, q_high)`.
///
/// Points are ordered by `i`, then `j`. Off-grid values are interpolated
/// linearly on the triangulation that splits each lattice square along its
/// anti-diagonal, so a function of `q_low + q_high` alone interpolates to a
/// function of the sum alone.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGrid {
    resolution: usize,
    row_offsets: Vec<usize>,
}

impl SimplexGrid {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidParameter(
                "grid resolution must be at least 1".into(),
            ));
        }
        let mut row_offsets = Vec::with_capacity(resolution + 2);
        let mut acc = 0;
        for i in 0..=resolution {
            row_offsets.push(acc);
            acc += resolution - i + 1;
        }
        row_offsets.push(acc);
        Ok(Self {
            resolution,
            row_offsets,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.row_offsets[self.resolution + 1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + j <= self.resolution);
        self.row_offsets[i] + j
    }

    /// Lattice coordinates `(i, j)` of point `idx`.
    pub fn lattice(&self, idx: usize) -> (usize, usize) {
        let i = self.row_offsets.partition_point(|&o| o <= idx) - 1;
        (i, idx - self.row_offsets[i])
    }

    /// `(q_low, q_high)` of point `idx`.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.lattice(idx);
        let m = self.resolution as f64;
        (i as f64 / m, j as f64 / m)
    }

    /// Sum level `i + j` of point `idx`; the belief sum is `level / M`.
    pub fn level(&self, idx: usize) -> usize {
        let (i, j) = self.lattice(idx);
        i + j
    }

    pub fn iter_lattice(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.resolution).flat_map(move |i| (0..=self.resolution - i).map(move |j| (i, j)))
    }

    /// Vertices and barycentric weights of the cell containing the point.
    pub fn weights(&self, q_low: f64, q_high: f64) -> [(usize, f64); 3] {
        let m = self.resolution;
        let mf = m as f64;
        let mut u = (q_low * mf).max(0.0);
        let mut v = (q_high * mf).max(0.0);
        if u + v > mf {
            let scale = mf / (u + v);
            u *= scale;
            v *= scale;
        }
        let i = (u.floor() as usize).min(m);
        let j = (v.floor() as usize).min(m - i);
        let fu = (u - i as f64).clamp(0.0, 1.0);
        let fv = (v - j as f64).clamp(0.0, 1.0);
        if i + j == m {
            return [(self.index(i, j), 1.0), (self.index(i, j), 0.0), (self.index(i, j), 0.0)];
        }
        if fu + fv <= 1.0 || i + j + 2 > m {
            [
                (self.index(i, j), 1.0 - fu - fv),
                (self.index(i + 1, j), fu),
                (self.index(i, j + 1), fv),
            ]
        } else {
            [
                (self.index(i + 1, j + 1), fu + fv - 1.0),
                (self.index(i + 1, j), 1.0 - fv),
                (self.index(i, j + 1), 1.0 - fu),
            ]
        }
    }

    #[inline]
    pub fn interpolate(&self, values: &[f64], q_low: f64, q_high: f64) -> f64 {
        self.weights(q_low, q_high)
            .iter()
            .map(|&(idx, w)| w * values[idx])
            .sum()
    }
}
