//! Empirical CDFs, the sample lag-1 covariance kernel `Ĉ₁` and the operator
//! kernel `R̂_μ(x, y) = ∫ Ĉ₁(x, z) Ĉ₁(y, z) μ(dz)` on a quadrature grid.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::latent::{csv_err, true_c1, true_r_kernel, LatentState};
use crate::measure::MeasureSpec;
use crate::quadrature::{GridFunction, QuadratureGrid};
use crate::scalar::{compensated_sum, Scalar};

/// A right-continuous step CDF with finitely many jumps.
///
/// Implemented by [`EmpiricalCdf`] and by the latent states themselves, which
/// is how the estimators run in oracle mode.
pub trait StepCdf<T> {
    fn cdf(&self, x: T) -> T;
    /// Locations where the CDF may jump, ascending. The CDF is constant on
    /// every interval between consecutive jump locations.
    fn jumps(&self) -> &[T];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf<T = f64> {
    sorted_sample: Vec<T>,
}

impl<T: Scalar> EmpiricalCdf<T> {
    pub fn new(mut sample: Vec<T>) -> Result<Self> {
        if sample.is_empty() {
            return usage("empirical CDF of an empty sample");
        }
        if sample.iter().any(|v| v.is_nan()) {
            return usage("empirical CDF sample contains NaN");
        }
        sample.sort_by(|a, b| a.partial_cmp(b).expect("NaN filtered"));
        Ok(Self {
            sorted_sample: sample,
        })
    }

    pub fn size(&self) -> usize {
        self.sorted_sample.len()
    }

    pub fn sorted_sample(&self) -> &[T] {
        &self.sorted_sample
    }
}

impl<T: Scalar> StepCdf<T> for EmpiricalCdf<T> {
    fn cdf(&self, x: T) -> T {
        let below = self.sorted_sample.partition_point(|&v| v <= x);
        T::of_usize(below) / T::of_usize(self.sorted_sample.len())
    }

    fn jumps(&self) -> &[T] {
        &self.sorted_sample
    }
}

impl<T: Scalar> StepCdf<T> for LatentState<T> {
    fn cdf(&self, x: T) -> T {
        LatentState::cdf(self, x)
    }

    fn jumps(&self) -> &[T] {
        self.support()
    }
}

pub fn empirical_cdf<T: Scalar>(samples: &[T]) -> Result<EmpiricalCdf<T>> {
    EmpiricalCdf::new(samples.to_vec())
}

/// `F̄₀ = (1/n) Σ F̂_t` on the grid.
pub fn mean_cdf<T: Scalar, C: StepCdf<T>>(
    cdfs: &[C],
    grid: &QuadratureGrid<T>,
) -> Result<GridFunction<T>> {
    if cdfs.is_empty() {
        return usage("mean_cdf of an empty list");
    }
    let n = T::of_usize(cdfs.len());
    Ok(grid.evaluate(|z| compensated_sum(cdfs.iter().map(|c| c.cdf(z))) / n))
}

/// `F̄₀(x)` at an arbitrary point.
pub fn mean_cdf_at<T: Scalar, C: StepCdf<T>>(cdfs: &[C], x: T) -> Result<T> {
    if cdfs.is_empty() {
        return usage("mean_cdf of an empty list");
    }
    Ok(compensated_sum(cdfs.iter().map(|c| c.cdf(x))) / T::of_usize(cdfs.len()))
}

/// `Ĉ₁(x, y)` evaluated from the defining sum, off any grid.
pub fn c1_hat_at<T: Scalar, C: StepCdf<T>>(cdfs: &[C], x: T, y: T) -> Result<T> {
    let n = cdfs.len();
    if n < 2 {
        return usage(format!("c1_hat needs n >= 2 cycles, got {n}"));
    }
    let fx = mean_cdf_at(cdfs, x)?;
    let fy = mean_cdf_at(cdfs, y)?;
    let terms = cdfs
        .windows(2)
        .map(|w| (w[0].cdf(x) - fx) * (w[1].cdf(y) - fy));
    Ok(compensated_sum(terms) / T::of_usize(n - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    C1Hat,
    RHat,
    C1True,
    RTrue,
}

impl KernelKind {
    pub fn is_operator(self) -> bool {
        matches!(self, KernelKind::RHat | KernelKind::RTrue)
    }
}

/// Where an estimated kernel came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub n: usize,
    pub q_t: usize,
    pub oracle_mode: bool,
}

/// A kernel tabulated on a quadrature grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovKernelGrid<T = f64> {
    grid: QuadratureGrid<T>,
    values: Vec<T>,
    kind: KernelKind,
    provenance: Option<Provenance>,
}

impl<T: Scalar> CovKernelGrid<T> {
    pub fn from_values(grid: QuadratureGrid<T>, kind: KernelKind, values: Vec<T>) -> Result<Self> {
        let m = grid.len();
        if values.len() != m * m {
            return usage(format!("kernel needs {} values for m = {m}, got {}", m * m, values.len()));
        }
        Ok(Self {
            grid,
            values,
            kind,
            provenance: None,
        })
    }

    pub fn from_fn(grid: &QuadratureGrid<T>, kind: KernelKind, f: impl Fn(T, T) -> T) -> Self {
        let pts = grid.points();
        let values = pts.iter().flat_map(|&x| pts.iter().map(move |&y| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self {
            grid: grid.clone(),
            values,
            kind,
            provenance: None,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn grid(&self) -> &QuadratureGrid<T> {
        &self.grid
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn m(&self) -> usize {
        self.grid.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.m() + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        let m = self.m();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn max_asymmetry(&self) -> T {
        let m = self.m();
        let mut worst = T::zero();
        for i in 0..m {
            for j in i + 1..m {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Operator-kind kernels must be symmetric (within 1e-12) and positive
    /// semidefinite (smallest eigenvalue ≥ -1e-9 · trace).
    pub fn check_invariants(&self) -> Result<()> {
        if !self.kind.is_operator() {
            return Ok(());
        }
        let asym = self.max_asymmetry();
        if asym > T::of(1e-12) {
            return usage(format!("{:?} kernel asymmetric by {asym}", self.kind));
        }
        let spectrum = crate::spectral::eigendecompose(self, T::of(crate::spectral::DEFAULT_TOL))?;
        let trace: T = spectrum.eigenvalues().iter().copied().sum();
        if let Some(&min) = spectrum.eigenvalues().last() {
            if min < -T::of(1e-9) * trace.abs() {
                return Err(crate::Error::Numeric(format!(
                    "{:?} kernel not PSD: eigenvalue {min} with trace {trace}",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    /// Dense CSV: header `x\y, z_1, …, z_m`, then one row per `z_i`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["x\\y".to_string()];
        header.extend(self.grid.points().iter().map(|z| format!("{}", z.as_f64())));
        w.write_record(&header).map_err(csv_err)?;
        for (i, &z) in self.grid.points().iter().enumerate() {
            let mut rec = vec![format!("{}", z.as_f64())];
            rec.extend(self.row(i).iter().map(|v| format!("{}", v.as_f64())));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_file(&self) -> KernelFile<T> {
        KernelFile {
            kind: self.kind,
            measure: *self.grid.measure(),
            m: self.m(),
            points: self.grid.points().to_vec(),
            values: (0..self.m()).map(|i| self.row(i).to_vec()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn from_file(file: KernelFile<T>) -> Result<Self> {
        let grid = QuadratureGrid::new(file.measure, file.m)?;
        if !grid
            .points()
            .iter()
            .zip(&file.points)
            .all(|(a, b)| (*a - *b).abs() <= T::of(1e-12) * (T::one() + a.abs()))
            || file.points.len() != file.m
        {
            return usage("kernel file points do not match the declared measure and m");
        }
        if file.values.iter().any(|r| r.len() != file.m) {
            return usage("kernel file rows must have m entries");
        }
        let values = file.values.into_iter().flatten().collect();
        let mut k = Self::from_values(grid, file.kind, values)?;
        k.provenance = file.provenance;
        Ok(k)
    }
}

/// JSON form of a kernel: grid description, dense matrix, kind and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFile<T> {
    pub kind: KernelKind,
    pub measure: MeasureSpec<T>,
    pub m: usize,
    pub points: Vec<T>,
    pub values: Vec<Vec<T>>,
    pub provenance: Option<Provenance>,
}

/// Partition of the grid into cells on which every CDF is constant.
struct Cells {
    /// Cell id of each grid node.
    of_node: Vec<usize>,
    /// One representative node per cell.
    representative: Vec<usize>,
}

fn cells<T: Scalar, C: StepCdf<T>>(cdfs: &[C], grid: &QuadratureGrid<T>) -> Cells {
    let mut jumps: Vec<T> = cdfs.iter().flat_map(|c| c.jumps().iter().copied()).collect();
    jumps.sort_by(|a, b| a.partial_cmp(b).expect("finite jump locations"));
    jumps.dedup();
    let mut of_node = Vec::with_capacity(grid.len());
    let mut representative = Vec::new();
    let mut last = usize::MAX;
    for (i, &z) in grid.points().iter().enumerate() {
        let c = jumps.partition_point(|&b| b <= z);
        if c != last {
            representative.push(i);
            last = c;
        }
        of_node.push(representative.len() - 1);
    }
    Cells {
        of_node,
        representative,
    }
}

/// `Ĉ₁` on the grid:
/// `(1/(n-1)) Σ_{t=1}^{n-1} (F̂_t(z_i) - F̄₀(z_i)) (F̂_{t+1}(z_j) - F̄₀(z_j))`.
///
/// Grid nodes lying between the same pair of consecutive jump locations share
/// every CDF value, so the sum runs over those cells only and is then expanded.
pub fn c1_hat<T: Scalar, C: StepCdf<T> + Sync>(
    cdfs: &[C],
    grid: &QuadratureGrid<T>,
) -> Result<CovKernelGrid<T>> {
    let n = cdfs.len();
    if n < 2 {
        return usage(format!("c1_hat needs n >= 2 cycles, got {n}"));
    }
    let cells = cells(cdfs, grid);
    let k = cells.representative.len();
    let reps: Vec<T> = cells.representative.iter().map(|&i| grid.points()[i]).collect();

    let mut centered: Vec<T> = cdfs
        .iter()
        .flat_map(|c| reps.iter().map(move |&z| c.cdf(z)))
        .collect();
    let nn = T::of_usize(n);
    for c in 0..k {
        let mean = compensated_sum((0..n).map(|t| centered[t * k + c])) / nn;
        for t in 0..n {
            centered[t * k + c] = centered[t * k + c] - mean;
        }
    }

    let mut cell_kernel = vec![T::zero(); k * k];
    for t in 0..n - 1 {
        let now = &centered[t * k..(t + 1) * k];
        let next = &centered[(t + 1) * k..(t + 2) * k];
        for (a, &da) in now.iter().enumerate() {
            if da == T::zero() {
                continue;
            }
            let row = &mut cell_kernel[a * k..(a + 1) * k];
            for (acc, &db) in row.iter_mut().zip(next) {
                *acc = *acc + da * db;
            }
        }
    }
    let denom = T::of_usize(n - 1);
    cell_kernel.iter_mut().for_each(|v| *v = *v / denom);

    let values = cells
        .of_node
        .iter()
        .flat_map(|&a| cells.of_node.iter().map(move |&b| (a, b)))
        .map(|(a, b)| cell_kernel[a * k + b])
        .collect();
    CovKernelGrid::from_values(grid.clone(), KernelKind::C1Hat, values)
}

/// `R(x_i, x_j) = (1/m) Σ_k C(x_i, z_k) C(x_j, z_k)`: symmetric and PSD by
/// construction (a Gram matrix). Identical rows of `C` are computed once.
pub fn r_hat<T: Scalar>(c1: &CovKernelGrid<T>) -> Result<CovKernelGrid<T>> {
    let kind = match c1.kind() {
        KernelKind::C1Hat => KernelKind::RHat,
        KernelKind::C1True => KernelKind::RTrue,
        other => return usage(format!("r_hat needs a lag-1 kernel, got {other:?}")),
    };
    let m = c1.m();
    if c1.values().len() != m * m {
        return usage("r_hat: kernel values do not match its grid");
    }

    let mut distinct: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut row_class = Vec::with_capacity(m);
    let mut class_rows: Vec<usize> = Vec::new();
    for i in 0..m {
        let key: Vec<u64> = c1.row(i).iter().map(|v| v.as_f64().to_bits()).collect();
        let next = class_rows.len();
        let class = *distinct.entry(key).or_insert(next);
        if class == next {
            class_rows.push(i);
        }
        row_class.push(class);
    }

    let d = class_rows.len();
    let mm = T::of_usize(m);
    let mut gram = vec![T::zero(); d * d];
    for a in 0..d {
        let ra = c1.row(class_rows[a]);
        for b in a..d {
            let rb = c1.row(class_rows[b]);
            let dot = ra.iter().zip(rb).fold(T::zero(), |acc, (&x, &y)| acc + x * y) / mm;
            gram[a * d + b] = dot;
            gram[b * d + a] = dot;
        }
    }
    let values = row_class
        .iter()
        .flat_map(|&a| row_class.iter().map(move |&b| (a, b)))
        .map(|(a, b)| gram[a * d + b])
        .collect();
    let mut out = CovKernelGrid::from_values(c1.grid().clone(), kind, values)?;
    out.provenance = c1.provenance.clone();
    Ok(out)
}

/// Population `C_1` of the two-point example on the grid.
pub fn true_c1_grid<T: Scalar>(grid: &QuadratureGrid<T>) -> CovKernelGrid<T> {
    CovKernelGrid::from_fn(grid, KernelKind::C1True, true_c1)
}

/// Population `R_μ` of the two-point example, using the exact μ-mass of
/// `[0, 1)` rather than its quadrature approximation.
pub fn true_r_grid<T: Scalar>(grid: &QuadratureGrid<T>) -> CovKernelGrid<T> {
    let measure = *grid.measure();
    CovKernelGrid::from_fn(grid, KernelKind::RTrue, |x, y| true_r_kernel(x, y, &measure))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureSpec;
    use crate::quadrature::build_grid;
    use proptest::prelude::*;

    fn grid(m: usize) -> QuadratureGrid<f64> {
        build_grid(MeasureSpec::default(), m).unwrap()
    }

    fn ecdfs(samples: &[&[f64]]) -> Vec<EmpiricalCdf> {
        samples.iter().map(|s| empirical_cdf(s).unwrap()).collect()
    }

    // Direct evaluation of the defining sums, node by node.
    fn brute_c1(cdfs: &[EmpiricalCdf], g: &QuadratureGrid<f64>) -> Vec<f64> {
        let n = cdfs.len();
        let pts = g.points();
        let fbar = |x: f64| cdfs.iter().map(|c| c.cdf(x)).sum::<f64>() / n as f64;
        let mut out = Vec::new();
        for &x in pts {
            for &y in pts {
                let mut s = 0.0;
                for t in 0..n - 1 {
                    s += (cdfs[t].cdf(x) - fbar(x)) * (cdfs[t + 1].cdf(y) - fbar(y));
                }
                out.push(s / (n - 1) as f64);
            }
        }
        out
    }

    fn brute_r(c: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = (0..m).map(|k| c[i * m + k] * c[j * m + k]).sum::<f64>() / m as f64;
            }
        }
        out
    }

    #[test]
    fn empirical_cdf_examples() {
        let f = empirical_cdf(&[0.0]).unwrap();
        assert_eq!((f.cdf(-0.5), f.cdf(0.0)), (0.0, 1.0));
        let f = empirical_cdf(&[0.0, 1.0]).unwrap();
        assert_eq!((f.cdf(0.0), f.cdf(1.0)), (0.5, 1.0));
        let f = empirical_cdf(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(f.cdf(0.5), 0.5);
        assert_eq!(f.sorted_sample(), &[0.0, 0.0, 1.0, 1.0]);
        assert!(matches!(empirical_cdf::<f64>(&[]), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn mean_cdf_examples() {
        let g = grid(16);
        let same = ecdfs(&[&[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0]]);
        let mean = mean_cdf(&same, &g).unwrap();
        assert_eq!(mean, g.evaluate(|z| same[0].cdf(z)));

        let two = ecdfs(&[&[0.0], &[1.0]]);
        let mean = mean_cdf(&two, &g).unwrap();
        for (z, v) in g.points().iter().zip(&mean.values) {
            if (0.0..1.0).contains(z) {
                assert_eq!(*v, 0.5);
            }
        }

        // hand computation at x = 0.5: F̂ values 1, 1/2, 0 -> mean 1/2;
        // at x = 1.5: 1, 1, 1 -> 1; at x = -1: 0
        let three = ecdfs(&[&[0.0], &[0.0, 1.0], &[1.0]]);
        assert_eq!(mean_cdf_at(&three, 0.5).unwrap(), 0.5);
        assert_eq!(mean_cdf_at(&three, 1.5).unwrap(), 1.0);
        assert_eq!(mean_cdf_at(&three, -1.0).unwrap(), 0.0);
        assert!(mean_cdf::<f64, EmpiricalCdf>(&[], &g).is_err());
    }

    #[test]
    fn c1_hat_examples() {
        let g = grid(8);
        let same = ecdfs(&[&[0.3], &[0.3], &[0.3]]);
        assert!(c1_hat(&same, &g).unwrap().values().iter().all(|&v| v == 0.0));

        // observations 0, 1, 0 at q_t = 1: F̂_t(0) = 1, 0, 1; mean 2/3
        // Ĉ₁(0,0) = [(1/3)(-2/3) + (-2/3)(1/3)] / 2 = -2/9
        let three = ecdfs(&[&[0.0], &[1.0], &[0.0]]);
        let v = c1_hat_at(&three, 0.0, 0.0).unwrap();
        assert!((v - (-2.0 / 9.0)).abs() < 1e-15);
        let k = c1_hat(&three, &g).unwrap();
        for (i, &x) in g.points().iter().enumerate() {
            for (j, &y) in g.points().iter().enumerate() {
                assert!((k.get(i, j) - c1_hat_at(&three, x, y).unwrap()).abs() < 1e-15);
            }
        }
        assert!(matches!(c1_hat(&three[..1], &g), Err(crate::Error::Usage(_))));
        assert!(c1_hat_at(&three[..1], 0.0, 0.0).is_err());
    }

    #[test]
    fn r_hat_examples() {
        let g = grid(32);
        let zero = CovKernelGrid::from_fn(&g, KernelKind::C1Hat, |_, _| 0.0);
        assert!(r_hat(&zero).unwrap().values().iter().all(|&v| v == 0.0));

        let c = 0.37;
        let box_kernel = CovKernelGrid::from_fn(&g, KernelKind::C1Hat, |x, y| {
            if (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y) { c } else { 0.0 }
        });
        let r = r_hat(&box_kernel).unwrap();
        assert_eq!(r.kind(), KernelKind::RHat);
        let mu_hat = g.mass_of(0.0, 1.0);
        for (i, &x) in g.points().iter().enumerate() {
            for (j, &y) in g.points().iter().enumerate() {
                let inside = (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y);
                let expect = if inside { c * c * mu_hat } else { 0.0 };
                assert!((r.get(i, j) - expect).abs() < 1e-15);
            }
        }
        assert!(r_hat(&r).is_err());
    }

    #[test]
    fn r_hat_of_true_c1_matches_closed_form() {
        let g = grid(4096);
        let r = r_hat(&true_c1_grid(&g)).unwrap();
        assert_eq!(r.kind(), KernelKind::RTrue);
        let mu = *g.measure();
        let worst = g
            .points()
            .iter()
            .enumerate()
            .step_by(7)
            .flat_map(|(i, &x)| g.points().iter().enumerate().step_by(5).map(move |(j, &y)| (i, j, x, y)))
            .map(|(i, j, x, y)| (r.get(i, j) - true_r_kernel(x, y, &mu)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3);
        let closed = true_r_grid(&g);
        let d: f64 = r.values().iter().zip(closed.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-3);
    }

    #[test]
    fn oracle_mode_uses_latent_cdfs() {
        let states: Vec<LatentState> = [0.2, 0.7, 0.4, 0.5]
            .iter()
            .enumerate()
            .map(|(t, &p)| LatentState::two_point(p, t as i64).unwrap())
            .collect();
        let g = grid(8);
        let k = c1_hat(&states, &g).unwrap();
        let mean = (0.2 + 0.7 + 0.4 + 0.5) / 4.0;
        let expect = ((0.2 - mean) * (0.7 - mean) + (0.7 - mean) * (0.4 - mean) + (0.4 - mean) * (0.5 - mean)) / 3.0;
        for (i, x) in g.points().iter().enumerate() {
            for (j, y) in g.points().iter().enumerate() {
                let inside = (0.0..1.0).contains(x) && (0.0..1.0).contains(y);
                let v = k.get(i, j);
                if inside {
                    assert!((v - expect).abs() < 1e-15);
                } else {
                    assert!(v.abs() < 1e-16);
                }
            }
        }
        assert!(g.mass_of(0.0, 1.0) > 0.0);
    }

    #[test]
    fn small_instances_match_brute_force() {
        let cases: [&[&[f64]]; 4] = [
            &[&[0.0], &[1.0]],
            &[&[0.0, 1.0], &[1.0, 1.0], &[0.0, 0.0]],
            &[&[0.2, 0.9], &[-0.3, 1.4], &[0.6, 0.1], &[1.0, 0.0]],
            &[&[0.5], &[0.4], &[0.3], &[0.2]],
        ];
        for m in 1..=4 {
            let g = grid(m);
            for case in cases {
                let cdfs = ecdfs(case);
                let c = c1_hat(&cdfs, &g).unwrap();
                let bc = brute_c1(&cdfs, &g);
                for (a, b) in c.values().iter().zip(&bc) {
                    assert!((a - b).abs() < 1e-12);
                }
                let r = r_hat(&c).unwrap();
                for (a, b) in r.values().iter().zip(brute_r(&bc, m)) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn csv_and_json_round_trip() {
        let g = grid(3);
        let k = true_c1_grid(&g).with_provenance(Provenance { seed: 1, n: 10, q_t: 1, oracle_mode: false });
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("x\\y,"));

        let json = serde_json::to_string(&k.to_file()).unwrap();
        let back = CovKernelGrid::from_file(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, k);
    }

    proptest! {
        #[test]
        fn ecdf_is_a_cdf(sample in proptest::collection::vec(-3.0f64..3.0, 1..20)) {
            let f = empirical_cdf(&sample).unwrap();
            let lo = sample.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(f.cdf(lo - 1e-9), 0.0);
            prop_assert_eq!(f.cdf(hi), 1.0);
            let mut prev = 0.0;
            for i in -40..=40 {
                let v = f.cdf(i as f64 * 0.1);
                prop_assert!(v >= prev);
                prev = v;
            }
        }

        #[test]
        fn r_hat_is_symmetric_psd(vals in proptest::collection::vec(-1.0f64..1.0, 36)) {
            let g = grid(6);
            let c = CovKernelGrid::from_values(g, KernelKind::C1Hat, vals).unwrap();
            let r = r_hat(&c).unwrap();
            prop_assert_eq!(r.max_asymmetry(), 0.0);
            prop_assert!(r.check_invariants().is_ok());
        }
    }
}
