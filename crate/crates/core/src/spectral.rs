//! Spectra of discretized integral operators and Hilbert–Schmidt distances.
//!
//! A kernel `K` on an `m`-node grid acts on L²(μ) as the matrix `A = K / m`.
//! Eigenpairs of `A` approximate operator eigenpairs; eigenvectors are scaled
//! by `√m` so that they have unit L²(μ) norm under the grid inner product.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::estimate::CovKernelGrid;
use crate::measure::MeasureSpec;
use crate::quadrature::{GridFunction, QuadratureGrid};
use crate::scalar::Scalar;

/// Default convergence tolerance, relative to the trace.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Sweep cap of the Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;

const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T = f64> {
    eigenvalues: Vec<T>,
    eigenfunctions: Vec<GridFunction<T>>,
    grid: QuadratureGrid<T>,
}

impl<T: Scalar> Spectrum<T> {
    /// Descending.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[GridFunction<T>] {
        &self.eigenfunctions
    }

    pub fn grid(&self) -> &QuadratureGrid<T> {
        &self.grid
    }

    /// `Σ_j θ_j ψ_j ⊗ ψ_j` as the operator matrix `A` (row-major).
    pub fn reconstruct(&self) -> Vec<T> {
        let m = self.grid.len();
        let mm = T::of_usize(m);
        let mut out = vec![T::zero(); m * m];
        for (theta, psi) in self.eigenvalues.iter().zip(&self.eigenfunctions) {
            let w = *theta / mm;
            for i in 0..m {
                let wi = w * psi.values[i];
                for j in 0..m {
                    out[i * m + j] = out[i * m + j] + wi * psi.values[j];
                }
            }
        }
        out
    }

    pub fn to_file(&self) -> SpectrumFile<T> {
        SpectrumFile {
            measure: *self.grid.measure(),
            m: self.grid.len(),
            points: self.grid.points().to_vec(),
            eigenvalues: self.eigenvalues.clone(),
            eigenfunctions: self.eigenfunctions.iter().map(|f| f.values.clone()).collect(),
        }
    }
}

/// JSON form of a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFile<T> {
    pub measure: MeasureSpec<T>,
    pub m: usize,
    pub points: Vec<T>,
    pub eigenvalues: Vec<T>,
    pub eigenfunctions: Vec<Vec<T>>,
}

/// Symmetric eigendecomposition of a kernel's operator matrix by cyclic
/// Jacobi rotations, iterated until the off-diagonal Frobenius norm drops
/// below `tol · trace` (the Frobenius norm is used instead when it is larger,
/// which only happens for indefinite input).
///
/// Eigenfunctions are normalized in L²(μ) and signed so that their entry of
/// largest magnitude is positive.
pub fn eigendecompose<T: Scalar>(kernel: &CovKernelGrid<T>, tol: T) -> Result<Spectrum<T>> {
    if tol.is_nan() || tol <= T::zero() {
        return usage(format!("eigendecompose needs tol > 0, got {tol}"));
    }
    let m = kernel.m();
    let max_abs = kernel.values().iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let asym = kernel.max_asymmetry();
    if asym > T::of(SYMMETRY_TOL) * max_abs.max(T::one()) {
        return usage(format!("eigendecompose needs a symmetric kernel, asymmetry {asym}"));
    }

    let mm = T::of_usize(m);
    let mut a: Vec<T> = kernel.values().iter().map(|&v| v / mm).collect();
    // symmetrize exactly so rotations act on a truly symmetric matrix
    for i in 0..m {
        for j in i + 1..m {
            let s = (a[i * m + j] + a[j * m + i]) / T::of(2.0);
            a[i * m + j] = s;
            a[j * m + i] = s;
        }
    }
    let vectors = jacobi(&mut a, m, tol)?;

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[j * m + j].partial_cmp(&a[i * m + i]).expect("finite eigenvalues"));
    let scale = mm.sqrt();
    let mut eigenvalues = Vec::with_capacity(m);
    let mut eigenfunctions = Vec::with_capacity(m);
    for &c in &order {
        eigenvalues.push(a[c * m + c]);
        let mut psi: Vec<T> = (0..m).map(|r| vectors[r * m + c] * scale).collect();
        let pivot = psi
            .iter()
            .copied()
            .enumerate()
            .fold((0, T::zero()), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best })
            .0;
        if psi[pivot] < T::zero() {
            psi.iter_mut().for_each(|v| *v = -*v);
        }
        eigenfunctions.push(GridFunction::new(psi));
    }
    Ok(Spectrum {
        eigenvalues,
        eigenfunctions,
        grid: kernel.grid().clone(),
    })
}

fn off_diagonal_norm<T: Scalar>(a: &[T], m: usize) -> T {
    let mut s = T::zero();
    for i in 0..m {
        for j in 0..m {
            if i != j {
                s = s + a[i * m + j] * a[i * m + j];
            }
        }
    }
    s.sqrt()
}

/// Diagonalizes `a` in place and returns the accumulated rotations (columns
/// are eigenvectors).
fn jacobi<T: Scalar>(a: &mut [T], m: usize, tol: T) -> Result<Vec<T>> {
    let mut v = vec![T::zero(); m * m];
    for i in 0..m {
        v[i * m + i] = T::one();
    }
    let trace = (0..m).fold(T::zero(), |s, i| s + a[i * m + i]);
    let fro = a.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
    let threshold = tol * trace.abs().max(fro);
    let two = T::of(2.0);

    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(a, m);
        if off == T::zero() || off < threshold {
            return Ok(v);
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q * m + q] - a[p * m + p]) / (two * apq);
                let t = if theta.abs() > T::of(1e150) {
                    T::one() / (two * theta)
                } else {
                    let r = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    if theta < T::zero() { -r } else { r }
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
                a[p * m + q] = T::zero();
                a[q * m + p] = T::zero();
                for k in 0..m {
                    let vkp = v[k * m + p];
                    let vkq = v[k * m + q];
                    v[k * m + p] = c * vkp - s * vkq;
                    v[k * m + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let off = off_diagonal_norm(a, m);
    if off < threshold {
        return Ok(v);
    }
    Err(Error::Numeric(format!(
        "Jacobi iteration did not converge in {MAX_SWEEPS} sweeps: off-diagonal norm {off} vs threshold {threshold}"
    )))
}

/// `‖K‖_HS = sqrt((1/m²) Σ_ij K_ij²)`.
pub fn hs_norm<T: Scalar>(kernel: &CovKernelGrid<T>) -> T {
    let s = kernel.values().iter().fold(T::zero(), |s, &v| s + v * v);
    s.sqrt() / T::of_usize(kernel.m())
}

/// `‖A - B‖_HS` for kernels on the same grid.
pub fn hs_distance<T: Scalar>(a: &CovKernelGrid<T>, b: &CovKernelGrid<T>) -> Result<T> {
    a.grid().ensure_same(b.grid(), "hs_distance")?;
    let s = a
        .values()
        .iter()
        .zip(b.values())
        .fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y));
    Ok(s.sqrt() / T::of_usize(a.m()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGap<T> {
    /// `sup_j |θ̂_j - θ_j|`, the shorter sequence padded with zeros.
    pub sup_eigenvalue_gap: T,
    /// `min_± ‖ψ̂_j ∓ ψ_j‖_{L²(μ)}` for each index present in both spectra.
    pub eigenfunction_gaps: Vec<T>,
}

pub fn spectrum_distance<T: Scalar>(a: &Spectrum<T>, b: &Spectrum<T>) -> Result<SpectrumGap<T>> {
    a.grid.ensure_same(&b.grid, "spectrum_distance")?;
    let len = a.eigenvalues.len().max(b.eigenvalues.len());
    let at = |s: &[T], j: usize| s.get(j).copied().unwrap_or(T::zero());
    let sup_eigenvalue_gap = (0..len)
        .map(|j| (at(&a.eigenvalues, j) - at(&b.eigenvalues, j)).abs())
        .fold(T::zero(), T::max);
    let eigenfunction_gaps = a
        .eigenfunctions
        .iter()
        .zip(&b.eigenfunctions)
        .map(|(f, g)| aligned_l2_gap(f, g, &a.grid))
        .collect();
    Ok(SpectrumGap {
        sup_eigenvalue_gap,
        eigenfunction_gaps,
    })
}

/// `min(‖f - g‖, ‖f + g‖)` in L²(μ).
pub fn aligned_l2_gap<T: Scalar>(f: &GridFunction<T>, g: &GridFunction<T>, grid: &QuadratureGrid<T>) -> T {
    let mm = T::of_usize(grid.len());
    let (mut minus, mut plus) = (T::zero(), T::zero());
    for (&x, &y) in f.values.iter().zip(&g.values) {
        minus = minus + (x - y) * (x - y);
        plus = plus + (x + y) * (x + y);
    }
    (minus.min(plus) / mm).sqrt()
}
