use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Symmetric banded matrix with packed lower-band storage.
///
/// Row `i` stores `A[i][i]`, `A[i][i-1]`, …, `A[i][i-bandwidth]`; entries that
/// would fall left of column 0 are kept as zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSpdMatrix {
    dim: usize,
    bandwidth: usize,
    bands: Vec<f64>,
}

impl BandedSpdMatrix {
    pub fn zeros(dim: usize, bandwidth: usize) -> Self {
        BandedSpdMatrix {
            dim,
            bandwidth,
            bands: vec![0.0; dim * (bandwidth + 1)],
        }
    }

    /// Builds from a dense matrix, reading only the lower band.
    pub fn from_dense_lower(m: &DenseMatrix, bandwidth: usize) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch(
                "banded matrix must be square".into(),
            ));
        }
        let mut b = Self::zeros(m.rows(), bandwidth);
        for i in 0..m.rows() {
            for j in i.saturating_sub(bandwidth)..=i {
                b.set(i, j, m[(i, j)]);
            }
        }
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let off = hi - lo;
        (off <= self.bandwidth && hi < self.dim).then_some(hi * (self.bandwidth + 1) + off)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.bands[s])
    }

    /// Sets the symmetric pair `(i, j)` / `(j, i)`.
    ///
    /// Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.bands[s] = v;
    }

    /// Adds `v` to the symmetric pair `(i, j)` / `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.bands[s] += v;
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in i.saturating_sub(self.bandwidth)..=i {
                let v = self.get(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            out[i] += self.get(i, i) * x[i];
            for j in i.saturating_sub(self.bandwidth)..i {
                let v = self.get(i, j);
                out[i] += v * x[j];
                out[j] += v * x[i];
            }
        }
        out
    }

    /// Band Cholesky `A = L Lᵀ`; `L` shares the band layout.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let bw = self.bandwidth;
        let w = bw + 1;
        let mut l = self.bands.clone();
        for j in 0..self.dim {
            let k0 = j.saturating_sub(bw);
            let mut d = l[j * w];
            for k in k0..j {
                let v = l[j * w + (j - k)];
                d -= v * v;
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[j * w] = d;
            for i in j + 1..(j + w).min(self.dim) {
                let mut s = l[i * w + (i - j)];
                for k in i.saturating_sub(bw)..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                l[i * w + (i - j)] = s / d;
            }
        }
        Ok(BandedCholesky {
            dim: self.dim,
            bandwidth: bw,
            factor: l,
        })
    }
}

/// Lower band Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    dim: usize,
    bandwidth: usize,
    factor: Vec<f64>,
}

impl BandedCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let w = self.bandwidth + 1;
        let mut x = rhs.to_vec();
        for i in 0..self.dim {
            let mut s = x[i];
            for k in i.saturating_sub(self.bandwidth)..i {
                s -= self.factor[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.factor[i * w];
        }
        for i in (0..self.dim).rev() {
            let mut s = x[i];
            for k in i + 1..(i + w).min(self.dim) {
                s -= self.factor[k * w + (k - i)] * x[k];
            }
            x[i] = s / self.factor[i * w];
        }
        x
    }
}

/// Solves `matrix · x = rhs` for a symmetric positive definite banded matrix.
pub fn solve_banded_spd(matrix: &BandedSpdMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != matrix.dim {
        return Err(Error::DimensionMismatch(format!(
            "rhs length {} for dimension {}",
            rhs.len(),
            matrix.dim
        )));
    }
    if matrix.bands.iter().chain(rhs).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("banded system"));
    }
    Ok(matrix.cholesky()?.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_system() {
        let mut m = BandedSpdMatrix::zeros(3, 0);
        for i in 0..3 {
            m.set(i, i, 2.0);
        }
        let x = solve_banded_spd(&m, &[2.0, 4.0, 6.0]).unwrap();
        for (a, b) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn upper_and_lower_access_are_symmetric() {
        let mut m = BandedSpdMatrix::zeros(4, 2);
        m.add(1, 3, 0.5);
        assert_eq!(m.get(3, 1), 0.5);
        assert_eq!(m.get(0, 3), 0.0);
    }

    #[test]
    fn indefinite_reports_pivot() {
        let mut m = BandedSpdMatrix::zeros(2, 1);
        m.set(0, 0, 1.0);
        m.set(1, 1, 1.0);
        m.set(1, 0, 2.0);
        assert!(matches!(
            solve_banded_spd(&m, &[1.0, 1.0]),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn rhs_length_checked() {
        let m = BandedSpdMatrix::zeros(3, 1);
        assert!(matches!(
            solve_banded_spd(&m, &[1.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
