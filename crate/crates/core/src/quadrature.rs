//! Quantile-transform quadrature for integrals against a reference measure.
//!
//! Nodes sit at the probability midpoints `quantile((i - 1/2) / m)`, so every
//! node carries weight `1/m` and a discretized kernel operator stays exactly
//! symmetric whenever its kernel is.

use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Result};
use crate::measure::MeasureSpec;
use crate::scalar::{compensated_sum, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid<T> {
    measure: MeasureSpec<T>,
    points: Vec<T>,
}

impl<T: Scalar> QuadratureGrid<T> {
    pub fn new(measure: MeasureSpec<T>, m: usize) -> Result<Self> {
        build_grid(measure, m)
    }

    pub fn measure(&self) -> &MeasureSpec<T> {
        &self.measure
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weight of every node, `1/m`.
    pub fn weight(&self) -> T {
        T::one() / T::of_usize(self.len())
    }

    /// Quadrature mass of `[a, b)`: the fraction of nodes inside it.
    pub fn mass_of(&self, a: T, b: T) -> T {
        let inside = self.points.iter().filter(|&&z| z >= a && z < b).count();
        T::of_usize(inside) / T::of_usize(self.len())
    }

    /// Tabulates `f` at the nodes.
    pub fn evaluate(&self, f: impl Fn(T) -> T) -> GridFunction<T> {
        GridFunction {
            values: self.points.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| a.as_f64().to_bits() == b.as_f64().to_bits())
    }

    pub(crate) fn ensure_same(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            usage(format!(
                "{what}: grid mismatch (m = {} vs m = {})",
                self.len(),
                other.len()
            ))
        }
    }
}

/// Builds the midpoint-in-probability grid `z_i = quantile((i - 1/2) / m)`.
pub fn build_grid<T: Scalar>(measure: MeasureSpec<T>, m: usize) -> Result<QuadratureGrid<T>> {
    if m == 0 {
        return config("quadrature grid needs m >= 1");
    }
    let measure = measure.validated()?;
    let half = T::of(0.5);
    let mm = T::of_usize(m);
    let mut points = Vec::with_capacity(m);
    for i in 0..m {
        let u = (T::of_usize(i) + half) / mm;
        let z = measure.quantile(u);
        if !z.is_finite() {
            return config(format!(
                "non-finite quantile at node i = {} (u = {u}) for {} measure",
                i + 1,
                measure.name()
            ));
        }
        if let Some(&prev) = points.last() {
            if z <= prev {
                return config(format!(
                    "quadrature nodes not strictly increasing at i = {} (precision exhausted for m = {m})",
                    i + 1
                ));
            }
        }
        points.push(z);
    }
    Ok(QuadratureGrid { measure, points })
}

/// Values of an L²(μ) element at the nodes of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn constant(value: T, m: usize) -> Self {
        Self {
            values: vec![value; m],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self, grid: &QuadratureGrid<T>) -> Result<()> {
        if self.len() == grid.len() {
            Ok(())
        } else {
            usage(format!(
                "grid function has {} values, grid has {} nodes",
                self.len(),
                grid.len()
            ))
        }
    }
}

/// `(1/m) Σ f(z_i)`, exact for constants.
pub fn integrate<T: Scalar>(f: &GridFunction<T>, grid: &QuadratureGrid<T>) -> Result<T> {
    f.check(grid)?;
    Ok(mean(&f.values))
}

/// `(1/m) Σ f(z_i) g(z_i)`.
pub fn inner_product<T: Scalar>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    grid: &QuadratureGrid<T>,
) -> Result<T> {
    f.check(grid)?;
    g.check(grid)?;
    let products: Vec<T> = f.values.iter().zip(&g.values).map(|(&a, &b)| a * b).collect();
    Ok(mean(&products))
}

pub fn l2_norm<T: Scalar>(f: &GridFunction<T>, grid: &QuadratureGrid<T>) -> Result<T> {
    inner_product(f, f, grid).map(|v| v.sqrt())
}

// Mean taken around the first value, so a constant sequence returns that
// constant bit-for-bit.
fn mean<T: Scalar>(values: &[T]) -> T {
    let Some(&pivot) = values.first() else {
        return T::zero();
    };
    let dev = compensated_sum(values.iter().map(|&v| v - pivot));
    pivot + dev / T::of_usize(values.len())
}
