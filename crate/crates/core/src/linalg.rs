//! Dense complex linear algebra and the quantum-information metrics built on it.
//!
//! Basis convention: qubit 0 is the most significant bit of a basis index, so
//! for an `n`-qubit register qubit `q` lives at bit `n - 1 - q`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;
/// Eigenvalues below this are treated as exact zeros in `x ln x`.
pub const EIG_CLAMP: f64 = 1e-12;
/// Floor applied to `q` before the logarithm in [`kl_divergence`].
pub const KL_FLOOR: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = C64::new(d, 0.0);
        }
        m
    }

    /// `|v><v|`
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = Self::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.data[(i * other.rows + k) * cols + j * other.cols + l] = a * other.get(k, l);
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `max |A - A^H|` elementwise; infinite for non-square input.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: v.len() });
        }
        Ok((0..self.rows)
            .map(|r| self.data[r * self.cols..(r + 1) * self.cols].iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Pure state on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// `|0...0>`
    pub fn zero_state(n_qubits: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Self { n_qubits, amplitudes }
    }

    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, found: index });
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Ok(Self { n_qubits, amplitudes })
    }

    /// Normalizes the given amplitudes; rejects zero vectors and non power-of-two lengths.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::InvalidSize { size: dim, reason: "amplitude count must be a power of two" });
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidSize { size: dim, reason: "state has zero or non-finite norm" });
        }
        let n_qubits = dim.trailing_zeros() as usize;
        Ok(Self { n_qubits, amplitudes: amplitudes.into_iter().map(|a| a / norm).collect() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix { n_qubits: self.n_qubits, matrix: ComplexMatrix::outer(&self.amplitudes) }
    }
}

/// Mixed state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity before accepting `matrix`.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare { rows: matrix.rows, cols: matrix.cols });
        }
        let dim = matrix.rows;
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::InvalidDensityMatrix(format!("dimension {dim} is not a power of two")));
        }
        let dev = matrix.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (deviation {dev:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
        }
        let min = eigenvalues(&matrix).first().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { n_qubits: dim.trailing_zeros() as usize, matrix })
    }

    /// Skips validation; callers guarantee a valid state by construction.
    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        let n_qubits = matrix.rows.trailing_zeros() as usize;
        Self { n_qubits, matrix }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self { n_qubits, matrix: ComplexMatrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)) }
    }

    pub fn from_diagonal(p: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_diag(p))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Computational-basis populations.
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }
}

/// Ascending eigenvalues with orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    /// `V f(diag(lambda)) V^H`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let v = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = ZERO;
                for (k, &w) in fl.iter().enumerate() {
                    acc += v.get(i, k) * v.get(j, k).conj() * w;
                }
                out.set(i, j, acc);
                if i != j {
                    out.set(j, i, acc.conj());
                } else {
                    out.set(i, i, C64::new(acc.re, 0.0));
                }
            }
        }
        out
    }
}

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.rows, cols: m.cols });
    }
    let scale = m.data.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(())
}

pub fn hermitian_eig(m: &ComplexMatrix) -> Result<Spectrum> {
    check_hermitian(m)?;
    let eig = m.to_nalgebra().symmetric_eigen();
    let n = m.rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = ComplexMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for r in 0..n {
            vecs.set(r, col, eig.eigenvectors[(r, k)]);
        }
    }
    Ok(Spectrum { eigenvalues, eigenvectors: vecs })
}

/// Eigenvalues only, ascending; no Hermiticity check.
pub(crate) fn eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `exp(scale * m)` for Hermitian `m`.
pub fn expm_hermitian(m: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    let spec = hermitian_eig(m)?;
    Ok(spec.map(|l| (scale * l).exp()))
}

/// Either representation accepted by [`partial_trace`].
pub enum QuantumState<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a StateVector> for QuantumState<'a> {
    fn from(s: &'a StateVector) -> Self {
        QuantumState::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for QuantumState<'a> {
    fn from(s: &'a DensityMatrix) -> Self {
        QuantumState::Mixed(s)
    }
}

/// Traces out every qubit not in `keep`. The kept qubits appear in ascending
/// order in the result.
pub fn partial_trace<'a>(state: impl Into<QuantumState<'a>>, keep: &[usize]) -> Result<DensityMatrix> {
    let state = state.into();
    let n = match &state {
        QuantumState::Pure(s) => s.n_qubits,
        QuantumState::Mixed(r) => r.n_qubits,
    };
    if keep.is_empty() {
        return Err(Error::InvalidSize { size: 0, reason: "keep set must be nonempty" });
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&bad) = kept.iter().find(|&&q| q >= n) {
        return Err(Error::IndexOutOfRange { index: bad, n_qubits: n });
    }
    let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();
    let compose = |k: usize, t: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &q) in kept.iter().enumerate() {
            if (k >> (kept.len() - 1 - pos)) & 1 == 1 {
                idx |= 1 << (n - 1 - q);
            }
        }
        for (pos, &q) in traced.iter().enumerate() {
            if (t >> (traced.len() - 1 - pos)) & 1 == 1 {
                idx |= 1 << (n - 1 - q);
            }
        }
        idx
    };
    let dk = 1usize << kept.len();
    let dt = 1usize << traced.len();
    let mut out = ComplexMatrix::zeros(dk, dk);
    match state {
        QuantumState::Pure(s) => {
            let amp = &s.amplitudes;
            let mut m = vec![ZERO; dk * dt];
            for k in 0..dk {
                for t in 0..dt {
                    m[k * dt + t] = amp[compose(k, t)];
                }
            }
            gram_rows(&m, dk, dt, &mut out);
        }
        QuantumState::Mixed(r) => {
            for a in 0..dk {
                for b in 0..dk {
                    let mut acc = ZERO;
                    for t in 0..dt {
                        acc += r.matrix.get(compose(a, t), compose(b, t));
                    }
                    out.set(a, b, acc);
                }
            }
        }
    }
    Ok(DensityMatrix::new_unchecked(out))
}

/// `out = M M^H` for row-major `M` of shape `rows x cols`.
pub(crate) fn gram_rows(m: &[C64], rows: usize, cols: usize, out: &mut ComplexMatrix) {
    for i in 0..rows {
        let ri = &m[i * cols..(i + 1) * cols];
        for j in i..rows {
            let rj = &m[j * cols..(j + 1) * cols];
            let acc: C64 = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum();
            if i == j {
                out.set(i, i, C64::new(acc.re, 0.0));
            } else {
                out.set(i, j, acc);
                out.set(j, i, acc.conj());
            }
        }
    }
}

fn check_trace(rho: &DensityMatrix) -> Result<()> {
    let tr = rho.matrix.trace();
    if (tr.re - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
    }
    Ok(())
}

/// Entropy in nats of an eigenvalue list, with small eigenvalues clamped to 0.
pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&l| l > EIG_CLAMP)
        .map(|&l| -l * l.ln())
        .sum()
}

/// `S = -Tr rho ln rho` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    check_trace(rho)?;
    Ok(entropy_of_spectrum(&eigenvalues(&rho.matrix)))
}

fn same_dim(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    Ok(())
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    let sqrt_rho = hermitian_eig(&rho.matrix)?.map(|l| l.max(0.0).sqrt());
    let inner = sqrt_rho.matmul(&sigma.matrix)?.matmul(&sqrt_rho)?;
    let inner = symmetrize(inner);
    let root_sum: f64 = eigenvalues(&inner).iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}

/// `D = 1/2 Tr |rho - sigma|`
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    let diff = rho.matrix.sub(&sigma.matrix)?;
    let d: f64 = eigenvalues(&symmetrize(diff)).iter().map(|l| l.abs()).sum::<f64>() * 0.5;
    Ok(d.clamp(0.0, 1.0))
}

fn symmetrize(m: ComplexMatrix) -> ComplexMatrix {
    let h = m.adjoint();
    let mut out = m.add(&h).expect("same shape");
    for z in out.as_mut_slice() {
        *z *= 0.5;
    }
    out
}

/// How [`kl_divergence`] treats `q_i` near zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroSupport {
    /// Clamp `q_i` to at least [`KL_FLOOR`].
    Floor,
    /// Fail with [`Error::ZeroSupport`] when `q_i < KL_FLOOR` and `p_i > 0`.
    Reject,
}

/// `KL(p || q) = sum p ln(p/q)` in nats.
pub fn kl_divergence(p: &[f64], q: &[f64], mode: ZeroSupport) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: q.len() });
    }
    for v in [p, q] {
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || v.iter().any(|&x| x < -1e-12 || !x.is_finite()) {
            return Err(Error::NotNormalized { sum });
        }
    }
    let mut kl = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi <= 0.0 {
            continue;
        }
        let qi = if qi < KL_FLOOR {
            match mode {
                ZeroSupport::Floor => KL_FLOOR,
                ZeroSupport::Reject => return Err(Error::ZeroSupport { index: i }),
            }
        } else {
            qi
        };
        kl += pi * (pi / qi).ln();
    }
    Ok(kl.max(0.0))
}
