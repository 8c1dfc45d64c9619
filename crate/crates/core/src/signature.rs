//! Truncated path signatures of piecewise-linear paths.
//!
//! A signature of depth `d` over an alphabet of `k` letters is stored as one
//! flat vector graded by word length, each level in lexicographic word order
//! with letters `1..=k`. The empty word comes first and is always 1, so the
//! vector doubles as a regression feature row with a built-in intercept. For
//! `k = 2, d = 2` the layout is `(∅, 1, 2, 11, 12, 21, 22)`.
//!
//! The signature of a single linear segment with increment `Δ` is the
//! truncated tensor exponential `exp(Δ) = Σ Δ^{⊗m}/m!`; a polyline is
//! handled by multiplying segment signatures left to right (Chen's
//! identity), which is exact with no quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Number of words of length `0..=depth` over `alphabet` letters,
/// `(k^{d+1} − 1)/(k − 1)` for `k > 1`.
pub fn signature_dim(alphabet: usize, depth: usize) -> usize {
    (0..=depth).map(|m| alphabet.pow(m as u32)).sum()
}

fn level_offset(alphabet: usize, level: usize) -> usize {
    signature_dim(alphabet, level) - alphabet.pow(level as u32)
}

/// Sample points of a path in `Rᵏ`, joined by straight segments.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricPath {
    points: DenseMatrix,
}

impl GeometricPath {
    pub fn new(points: DenseMatrix) -> Result<Self> {
        if points.rows() < 2 {
            return Err(Error::PathTooShort(points.rows()));
        }
        if points.cols() == 0 {
            return Err(Error::DimensionMismatch(
                "path points need at least one coordinate".into(),
            ));
        }
        if !points.is_finite() {
            return Err(Error::NonFinite("path points"));
        }
        Ok(GeometricPath { points })
    }

    pub fn from_points<R: AsRef<[f64]>>(points: &[R]) -> Result<Self> {
        Self::new(DenseMatrix::from_rows(points)?)
    }

    pub fn points(&self) -> &DenseMatrix {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureVector {
    depth: usize,
    alphabet: usize,
    coefficients: Vec<f64>,
}

impl SignatureVector {
    /// Signature of the trivial path: 1 on the empty word, 0 elsewhere.
    pub fn identity(alphabet: usize, depth: usize) -> Self {
        let mut coefficients = vec![0.0; signature_dim(alphabet, depth)];
        coefficients[0] = 1.0;
        SignatureVector {
            depth,
            alphabet,
            coefficients,
        }
    }

    /// Truncated tensor exponential of one increment.
    pub fn segment(increment: &[f64], depth: usize) -> Self {
        let k = increment.len();
        let mut sig = Self::identity(k, depth);
        for m in 1..=depth {
            let (prev, cur) = sig.coefficients.split_at_mut(level_offset(k, m));
            let prev = &prev[level_offset(k, m - 1)..];
            // Δ^{⊗m}/m! = (Δ^{⊗(m−1)}/(m−1)!) ⊗ Δ / m
            for (i, p) in prev.iter().enumerate() {
                for (j, d) in increment.iter().enumerate() {
                    cur[i * k + j] = p * d / m as f64;
                }
            }
        }
        sig
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    /// Coefficients of words of length `m`.
    pub fn level(&self, m: usize) -> &[f64] {
        let start = level_offset(self.alphabet, m);
        &self.coefficients[start..start + self.alphabet.pow(m as u32)]
    }

    /// Coefficient of a word given as 1-based letters.
    pub fn word(&self, letters: &[usize]) -> f64 {
        let idx = letters
            .iter()
            .fold(0, |acc, &l| acc * self.alphabet + (l - 1));
        self.level(letters.len())[idx]
    }

    /// Truncated tensor product; the signature of `self`'s path followed by
    /// `other`'s.
    pub fn concat(&self, other: &SignatureVector) -> Result<SignatureVector> {
        if self.alphabet != other.alphabet || self.depth != other.depth {
            return Err(Error::DimensionMismatch(
                "signatures differ in alphabet or depth".into(),
            ));
        }
        let k = self.alphabet;
        let mut out = vec![0.0; self.coefficients.len()];
        for m in 0..=self.depth {
            let dst_off = level_offset(k, m);
            for i in 0..=m {
                let a = self.level(i);
                let b = other.level(m - i);
                let b_len = b.len();
                for (ia, va) in a.iter().enumerate() {
                    if *va == 0.0 {
                        continue;
                    }
                    let base = dst_off + ia * b_len;
                    for (ib, vb) in b.iter().enumerate() {
                        out[base + ib] += va * vb;
                    }
                }
            }
        }
        Ok(SignatureVector {
            depth: self.depth,
            alphabet: k,
            coefficients: out,
        })
    }
}

/// Depth-`depth` signature of the piecewise-linear interpolation of `path`.
pub fn signature(path: &GeometricPath, depth: usize) -> Result<SignatureVector> {
    if depth == 0 {
        return Err(Error::InvalidConfig(
            "signature depth must be at least 1".into(),
        ));
    }
    let pts = path.points();
    let k = pts.cols();
    let mut sig = SignatureVector::identity(k, depth);
    let mut inc = vec![0.0; k];
    for i in 1..pts.rows() {
        for (j, d) in inc.iter_mut().enumerate() {
            *d = pts[(i, j)] - pts[(i - 1, j)];
        }
        sig = sig.concat(&SignatureVector::segment(&inc, depth))?;
    }
    Ok(sig)
}

/// Two-dimensional path from a window of values in time-ascending order:
/// the values themselves, paired with their running sum.
///
/// A delay vector is newest-first; pass the window oldest-first, e.g. the
/// slice `y[t−r+1..=t]` of a series.
pub fn embed_to_path(window: &[f64]) -> Result<GeometricPath> {
    if window.len() < 2 {
        return Err(Error::EmbeddingTooShort(window.len()));
    }
    let mut data = Vec::with_capacity(window.len() * 2);
    let mut cum = 0.0;
    for &v in window {
        cum += v;
        data.push(v);
        data.push(cum);
    }
    GeometricPath::new(DenseMatrix::new(window.len(), 2, data)?)
}
