//! Small dense symmetric linear algebra.
//!
//! The design matrices in this crate are symmetric positive definite, of
//! dimension `N*d` (tens, not thousands), and they change by one rank-one
//! term per round. That workload is served best by three hand-rolled pieces:
//!
//! - [`SymMatrix`]: full row-major storage with mirrored writes, so reads
//!   need no triangle bookkeeping;
//! - [`MaintainedPsd`]: a matrix paired with its inverse, kept in sync via
//!   the Sherman-Morrison identity and periodically re-inverted from scratch
//!   (Cholesky) to cap floating-point drift;
//! - a cyclic Jacobi eigensolver, used for minimum eigenvalues, inverse
//!   square roots, and ellipsoid geometry. Jacobi is slow for large n but at
//!   n <= ~100 it is simple, accurate to near machine precision, and has no
//!   failure modes worth trading for.
//!
//! Eigenvalues are always returned sorted ascending.

use crate::tol;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix or vector contains a non-finite entry")]
    NonFinite,
    #[error("matrix is not positive definite (offending pivot/eigenvalue {value})")]
    NotPositiveDefinite { value: f64 },
    #[error("empty block list")]
    EmptyBlockList,
    #[error("eigensolver failed to converge after {sweeps} sweeps (off-diagonal {offdiag})")]
    NonConvergence { sweeps: usize, offdiag: f64 },
    #[error("rank-one update weight must be nonnegative, got {weight}")]
    NegativeWeight { weight: f64 },
    #[error("matrix must have positive dimension")]
    ZeroDimension,
}

/// Dense symmetric matrix, full row-major storage. Writes mirror across the
/// diagonal so the invariant `m[i][j] == m[j][i]` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = c;
        }
        m
    }

    /// Build from a row-major slice; the strict lower triangle is ignored and
    /// refilled from the upper one, so near-symmetric inputs are symmetrized.
    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self, LinalgError> {
        if data.len() != dim * dim {
            return Err(LinalgError::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = data[i * dim + j];
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v;
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if v.len() != self.dim {
            return Err(LinalgError::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// `v^T self v`.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64, LinalgError> {
        if v.len() != self.dim {
            return Err(LinalgError::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        let mut acc = 0.0;
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            let mut ri = 0.0;
            for (a, b) in row.iter().zip(v) {
                ri += a * b;
            }
            acc += v[i] * ri;
        }
        Ok(acc)
    }

    /// `self += w * v v^T`.
    pub fn add_scaled_outer(&mut self, v: &[f64], w: f64) -> Result<(), LinalgError> {
        if v.len() != self.dim {
            return Err(LinalgError::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        for i in 0..self.dim {
            let wi = w * v[i];
            for j in 0..self.dim {
                self.data[i * self.dim + j] += wi * v[j];
            }
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `ca * a + cb * b`.
    pub fn lin_comb(ca: f64, a: &SymMatrix, cb: f64, b: &SymMatrix) -> Result<SymMatrix, LinalgError> {
        if a.dim != b.dim {
            return Err(LinalgError::DimensionMismatch { expected: a.dim, got: b.dim });
        }
        let data: Vec<f64> =
            a.data.iter().zip(&b.data).map(|(x, y)| ca * x + cb * y).collect();
        Ok(SymMatrix { dim: a.dim, data })
    }

    /// Gershgorin upper bound on the largest eigenvalue: cheap, deterministic,
    /// and never below the true maximum.
    pub fn eig_max_upper_bound(&self) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.dim {
            let mut radius = 0.0;
            for j in 0..self.dim {
                if j != i {
                    radius += self.get(i, j).abs();
                }
            }
            best = best.max(self.get(i, i) + radius);
        }
        best
    }
}

/// Block-diagonal assembly of symmetric blocks.
pub fn block_diag(blocks: &[&SymMatrix]) -> Result<SymMatrix, LinalgError> {
    if blocks.is_empty() {
        return Err(LinalgError::EmptyBlockList);
    }
    let total: usize = blocks.iter().map(|b| b.dim).sum();
    let mut out = SymMatrix::zeros(total);
    let mut off = 0;
    for b in blocks {
        for i in 0..b.dim {
            for j in 0..b.dim {
                out.data[(off + i) * total + (off + j)] = b.get(i, j);
            }
        }
        off += b.dim;
    }
    Ok(out)
}

/// `sqrt(v^T M^-1 v)` where the *inverse* is supplied directly. Tiny negative
/// quadratic forms from roundoff are clamped to zero, so vectors in the
/// kernel report exactly 0.
pub fn mahalanobis_norm(v: &[f64], m_inv: &SymMatrix) -> Result<f64, LinalgError> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let q = m_inv.quad_form(v)?;
    Ok(q.max(0.0).sqrt())
}

// ---------------------------------------------------------------------------
// Jacobi eigensolver
// ---------------------------------------------------------------------------

/// Cyclic Jacobi with the standard stable rotation. Returns eigenvalues
/// ascending; when `with_vectors` is set, also an orthogonal matrix whose
/// column `j` (row-major `vecs[i*n + j]`) is the eigenvector for value `j`.
fn jacobi(m: &SymMatrix, with_vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>), LinalgError> {
    if m.dim == 0 {
        return Err(LinalgError::ZeroDimension);
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = m.dim;
    let mut a = m.data.clone();
    let mut v = if with_vectors {
        let mut id = vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        Some(id)
    } else {
        None
    };

    let scale = m.frobenius_norm().max(1.0);
    let stop = tol::JACOBI_REL_TOL * scale;

    let mut offdiag = f64::INFINITY;
    for _sweep in 0..tol::JACOBI_MAX_SWEEPS {
        let mut off2 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                off2 += 2.0 * apq * apq;
            }
        }
        offdiag = off2.sqrt();
        if offdiag <= stop {
            let mut vals: Vec<(f64, usize)> =
                (0..n).map(|i| (a[i * n + i], i)).collect();
            vals.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            let eigenvalues: Vec<f64> = vals.iter().map(|(val, _)| *val).collect();
            let vecs = v.map(|v| {
                let mut sorted = vec![0.0; n * n];
                for (new_j, &(_, old_j)) in vals.iter().enumerate() {
                    for i in 0..n {
                        sorted[i * n + new_j] = v[i * n + old_j];
                    }
                }
                sorted
            });
            return Ok((eigenvalues, vecs));
        }

        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                // t = sign(theta) / (|theta| + sqrt(theta^2 + 1)), guarded
                // against theta^2 overflow.
                let t = if theta.abs() > 1e153 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = arp - s * (arq + tau * arp);
                    let new_rq = arq + s * (arp - tau * arq);
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
                if let Some(vm) = v.as_mut() {
                    for r in 0..n {
                        let vrp = vm[r * n + p];
                        let vrq = vm[r * n + q];
                        vm[r * n + p] = vrp - s * (vrq + tau * vrp);
                        vm[r * n + q] = vrq + s * (vrp - tau * vrq);
                    }
                }
            }
        }
    }
    Err(LinalgError::NonConvergence { sweeps: tol::JACOBI_MAX_SWEEPS, offdiag })
}

/// All eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>, LinalgError> {
    jacobi(m, false).map(|(vals, _)| vals)
}

/// Eigendecomposition `m = Q diag(vals) Q^T`; `vecs` is Q in row-major order
/// (column j is the eigenvector of `vals[j]`).
pub fn sym_eigen(m: &SymMatrix) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    let (vals, vecs) = jacobi(m, true)?;
    Ok((vals, vecs.expect("vectors requested")))
}

/// Smallest eigenvalue.
pub fn min_eigenvalue(m: &SymMatrix) -> Result<f64, LinalgError> {
    Ok(sym_eigenvalues(m)?[0])
}

/// Symmetric inverse square root `m^{-1/2}` via eigendecomposition. Errors if
/// any eigenvalue is nonpositive.
pub fn inv_sqrt(m: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let n = m.dim;
    let (vals, q) = sym_eigen(m)?;
    if vals[0] <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite { value: vals[0] });
    }
    let inv_roots: Vec<f64> = vals.iter().map(|l| 1.0 / l.sqrt()).collect();
    let mut out = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += q[i * n + k] * inv_roots[k] * q[j * n + k];
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// Checks `lo * u <= w <= hi * u` in the PSD order. Returns
/// `(holds, min_eig(w - lo*u), min_eig(hi*u - w))`; `holds` allows a tiny
/// numerical slack around zero.
pub fn psd_sandwich_check(
    u: &SymMatrix,
    w: &SymMatrix,
    lo: f64,
    hi: f64,
) -> Result<(bool, f64, f64), LinalgError> {
    let lower = SymMatrix::lin_comb(1.0, w, -lo, u)?;
    let upper = SymMatrix::lin_comb(hi, u, -1.0, w)?;
    let margin_lo = min_eigenvalue(&lower)?;
    let margin_hi = min_eigenvalue(&upper)?;
    let holds =
        margin_lo >= -tol::SANDWICH_EIG_SLACK && margin_hi >= -tol::SANDWICH_EIG_SLACK;
    Ok((holds, margin_lo, margin_hi))
}

// ---------------------------------------------------------------------------
// Cholesky (used for the periodic full re-inversion)
// ---------------------------------------------------------------------------

/// Lower-triangular Cholesky factor, row-major. Errors on nonpositive pivots.
fn cholesky(m: &SymMatrix) -> Result<Vec<f64>, LinalgError> {
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = m.dim;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m.get(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(LinalgError::NotPositiveDefinite { value: sum });
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Fresh inverse of a positive-definite matrix via Cholesky; also returns
/// `log det`.
pub fn chol_inverse(m: &SymMatrix) -> Result<(SymMatrix, f64), LinalgError> {
    let n = m.dim;
    if n == 0 {
        return Err(LinalgError::ZeroDimension);
    }
    let l = cholesky(m)?;
    let mut log_det = 0.0;
    for i in 0..n {
        log_det += 2.0 * l[i * n + i].ln();
    }
    // Solve L L^T X = I column by column.
    let mut inv = SymMatrix::zeros(n);
    let mut y = vec![0.0; n];
    let mut x = vec![0.0; n];
    for col in 0..n {
        for i in 0..n {
            let mut sum = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                sum -= l[i * n + k] * y[k];
            }
            y[i] = sum / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= l[k * n + i] * x[k];
            }
            x[i] = sum / l[i * n + i];
        }
        // The true inverse is symmetric, so writing the solved column through
        // the mirroring setter keeps the storage consistent.
        for i in 0..n {
            inv.set(i, col, x[i]);
        }
    }
    Ok((inv, log_det))
}

// ---------------------------------------------------------------------------
// MaintainedPsd
// ---------------------------------------------------------------------------

/// A positive-definite matrix together with its inverse, kept consistent
/// under rank-one updates. The inverse follows each update through the
/// Sherman-Morrison identity; every `refresh_every` updates the pair is
/// re-synchronized by a fresh Cholesky inversion so drift cannot accumulate
/// over long runs. `log_det` rides along for free (it is the running sum of
/// `ln(1 + w v^T M^-1 v)`).
#[derive(Debug, Clone)]
pub struct MaintainedPsd {
    matrix: SymMatrix,
    inverse: SymMatrix,
    log_det: f64,
    refresh_every: u32,
    since_refresh: u32,
}

impl MaintainedPsd {
    pub fn identity(dim: usize, refresh_every: u32) -> Self {
        MaintainedPsd {
            matrix: SymMatrix::identity(dim),
            inverse: SymMatrix::identity(dim),
            log_det: 0.0,
            refresh_every: refresh_every.max(1),
            since_refresh: 0,
        }
    }

    pub fn scaled_identity(dim: usize, c: f64, refresh_every: u32) -> Result<Self, LinalgError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { value: c });
        }
        Ok(MaintainedPsd {
            matrix: SymMatrix::scaled_identity(dim, c),
            inverse: SymMatrix::scaled_identity(dim, 1.0 / c),
            log_det: dim as f64 * c.ln(),
            refresh_every: refresh_every.max(1),
            since_refresh: 0,
        })
    }

    pub fn from_matrix(matrix: SymMatrix, refresh_every: u32) -> Result<Self, LinalgError> {
        let (inverse, log_det) = chol_inverse(&matrix)?;
        Ok(MaintainedPsd {
            matrix,
            inverse,
            log_det,
            refresh_every: refresh_every.max(1),
            since_refresh: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn inverse(&self) -> &SymMatrix {
        &self.inverse
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `self += w * v v^T` with the inverse updated in O(dim^2).
    pub fn rank1_update(&mut self, v: &[f64], w: f64) -> Result<(), LinalgError> {
        if v.len() != self.matrix.dim {
            return Err(LinalgError::DimensionMismatch { expected: self.matrix.dim, got: v.len() });
        }
        if !w.is_finite() || !v.iter().all(|x| x.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        if w < 0.0 {
            return Err(LinalgError::NegativeWeight { weight: w });
        }
        if w == 0.0 {
            return Ok(());
        }
        let u = self.inverse.matvec(v)?;
        let vtu: f64 = v.iter().zip(&u).map(|(a, b)| a * b).sum();
        let denom = 1.0 + w * vtu;
        self.matrix.add_scaled_outer(v, w)?;
        self.inverse.add_scaled_outer(&u, -w / denom)?;
        self.log_det += denom.ln();
        self.since_refresh += 1;
        if self.since_refresh >= self.refresh_every {
            self.refresh()?;
        }
        Ok(())
    }

    /// Recompute the inverse (and log-determinant) from scratch.
    pub fn refresh(&mut self) -> Result<(), LinalgError> {
        let (inverse, log_det) = chol_inverse(&self.matrix)?;
        self.inverse = inverse;
        self.log_det = log_det;
        self.since_refresh = 0;
        Ok(())
    }

    /// Frobenius error of `matrix * inverse - I`, divided by the dimension.
    pub fn verify(&self) -> f64 {
        let n = self.matrix.dim;
        let mut err2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.matrix.get(i, k) * self.inverse.get(k, j);
                }
                let target = if i == j { 1.0 } else { 0.0 };
                let diff = acc - target;
                err2 += diff * diff;
            }
        }
        err2.sqrt() / n as f64
    }
}
