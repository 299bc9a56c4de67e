//! Local polynomial smoothing of residuals.
//!
//! For evaluation point `x0`, bandwidth `h`, degree `ℓ` and `m` fold-2
//! covariates `X_i`, with `u_i = (X_i - x0) / h`:
//!
//! ```text
//! ρ(u)      = (1, u, u²/2!, ..., u^ℓ/ℓ!)
//! B(x0)     = 1/(m h) Σ ρ(u_i) ρ(u_i)ᵀ K(u_i)
//! ŵ(X_i)    = 1/h ρ(0)ᵀ B(x0)⁻¹ ρ(u_i) K(u_i)
//! b̂(x0)     = 1/m Σ r_i ŵ(X_i)
//! ```
//!
//! The normalized weights `W_i = ŵ(X_i)/m` reproduce polynomials of degree
//! at most `ℓ` exactly and vanish outside `|X_i - x0| ≤ h`.
//!
//! [`wls_oracle`] solves the same local least squares problem by forming and
//! eliminating the normal equations directly. It shares no numerical code
//! with [`lp_weights`] and exists to cross-check it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SingularDesign};

pub const MAX_DEGREE: usize = 10;

/// Relative eigenvalue floor below which a design matrix counts as singular.
pub const SINGULAR_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `K(u) = 1[|u| ≤ 1]`.
    #[default]
    Boxcar,
}

impl Kernel {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Boxcar => {
                if u.abs() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `K((x - x0)/h)` given the raw offset `dx = x - x0`.
    ///
    /// Support is decided on `|dx| ≤ h` so that rounding in the division can
    /// never leak weight outside the window.
    #[inline]
    pub fn weight(self, dx: f64, h: f64) -> f64 {
        if dx.abs() > h {
            0.0
        } else {
            self.eval((dx / h).clamp(-1.0, 1.0))
        }
    }
}

/// Boxcar kernel on the scaled argument.
pub fn kernel_eval(u: f64) -> f64 {
    Kernel::Boxcar.eval(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPolyConfig {
    pub degree: usize,
    pub bandwidth: f64,
    pub kernel: Kernel,
}

impl LocalPolyConfig {
    pub fn new(degree: usize, bandwidth: f64) -> Result<Self> {
        Self::with_kernel(degree, bandwidth, Kernel::Boxcar)
    }

    pub fn with_kernel(degree: usize, bandwidth: f64, kernel: Kernel) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::InvalidConfig(format!(
                "degree {degree} exceeds maximum {MAX_DEGREE}"
            )));
        }
        if !(bandwidth > 0.0 && bandwidth <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must lie in (0, 1], got {bandwidth}"
            )));
        }
        Ok(Self {
            degree,
            bandwidth,
            kernel,
        })
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }
}

/// `ρ(u)`: component `k` is `u^k / k!`.
pub fn poly_basis(u: f64, degree: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(degree + 1);
    let mut term = 1.0;
    out.push(term);
    for k in 1..=degree {
        term *= u / k as f64;
        out.push(term);
    }
    out
}

/// `B(x0)` as a dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    dim: usize,
    entries: Vec<f64>,
    pub x0: f64,
    pub in_window_count: usize,
    distinct_in_window: usize,
}

impl DesignMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    /// `(smallest, largest)` eigenvalue.
    pub fn eigen_range(&self) -> (f64, f64) {
        let eig = self.to_matrix().symmetric_eigen();
        eig.eigenvalues
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Fewer distinct in-window covariates than basis functions, or smallest
    /// eigenvalue below `SINGULAR_RTOL` times the largest.
    pub fn is_singular(&self) -> bool {
        if self.distinct_in_window < self.dim {
            return true;
        }
        let (lo, hi) = self.eigen_range();
        !(hi > 0.0) || lo < SINGULAR_RTOL * hi
    }
}

fn accumulate_design<I>(offsets: I, x0: f64, m: usize, cfg: &LocalPolyConfig) -> DesignMatrix
where
    I: IntoIterator<Item = f64>,
{
    let dim = cfg.dim();
    let h = cfg.bandwidth;
    let mut entries = vec![0.0; dim * dim];
    let mut count = 0;
    let mut distinct = 0;
    let mut seen: Vec<f64> = Vec::new();
    for dx in offsets {
        let k = cfg.kernel.weight(dx, h);
        if k == 0.0 {
            continue;
        }
        count += 1;
        if distinct < dim && !seen.contains(&dx) {
            seen.push(dx);
            distinct += 1;
        }
        let rho = poly_basis(dx / h, cfg.degree);
        for a in 0..dim {
            for b in a..dim {
                entries[a * dim + b] += rho[a] * rho[b] * k;
            }
        }
    }
    let scale = 1.0 / (m as f64 * h);
    for a in 0..dim {
        for b in a..dim {
            let v = entries[a * dim + b] * scale;
            entries[a * dim + b] = v;
            entries[b * dim + a] = v;
        }
    }
    DesignMatrix {
        dim,
        entries,
        x0,
        in_window_count: count,
        distinct_in_window: distinct,
    }
}

/// Evaluates `B(x0)` over every fold-2 covariate, in index order.
pub fn design_matrix(xs_fold2: &[f64], x0: f64, cfg: &LocalPolyConfig) -> DesignMatrix {
    accumulate_design(xs_fold2.iter().map(|&x| x - x0), x0, xs_fold2.len(), cfg)
}

/// Sparse weights over `m` fold-2 observations.
///
/// `values` hold `ŵ(X_i)` (raw) or `W_i = ŵ(X_i)/m` (when `normalized`), at
/// positions `support`, which are sorted ascending. All other entries are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub x0: f64,
    pub bandwidth: f64,
    pub normalized: bool,
    len: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.support
            .binary_search(&i)
            .map(|k| self.values[k])
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support.iter().copied().zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for (i, w) in self.iter() {
            out[i] = w;
        }
        out
    }

    /// `W_i = ŵ(X_i) / m`.
    pub fn normalized(&self) -> WeightVector {
        if self.normalized {
            return self.clone();
        }
        let m = self.len as f64;
        WeightVector {
            normalized: true,
            values: self.values.iter().map(|w| w / m).collect(),
            ..self.clone()
        }
    }
}

/// Local polynomial smoother over a fixed set of fold-2 covariates.
///
/// Keeps a sorted view of the covariates so each evaluation only touches the
/// points inside its window.
#[derive(Debug, Clone)]
pub struct LocalPolySmoother {
    cfg: LocalPolyConfig,
    xs: Vec<f64>,
    order: Vec<usize>,
    sorted: Vec<f64>,
}

/// Local fit at one point: the weights and the Cholesky factor needed to
/// recover the full coefficient vector.
struct LocalSolve {
    weights: WeightVector,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    window: Vec<usize>,
}

impl LocalPolySmoother {
    pub fn new(xs_fold2: &[f64], cfg: LocalPolyConfig) -> Self {
        let mut order: Vec<usize> = (0..xs_fold2.len()).collect();
        order.sort_by(|&a, &b| xs_fold2[a].total_cmp(&xs_fold2[b]).then(a.cmp(&b)));
        let sorted = order.iter().map(|&i| xs_fold2[i]).collect();
        Self {
            cfg,
            xs: xs_fold2.to_vec(),
            order,
            sorted,
        }
    }

    pub fn config(&self) -> &LocalPolyConfig {
        &self.cfg
    }

    pub fn m(&self) -> usize {
        self.xs.len()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    /// Indices (ascending) of covariates with nonzero kernel weight at `x0`.
    pub fn window(&self, x0: f64) -> Vec<usize> {
        let h = self.cfg.bandwidth;
        // Slightly widened search range; the kernel decides membership.
        let pad = 4.0 * f64::EPSILON * (x0.abs() + h + 1.0);
        let lo = self.sorted.partition_point(|&x| x < x0 - h - pad);
        let hi = self.sorted.partition_point(|&x| x <= x0 + h + pad);
        let mut idx: Vec<usize> = self.order[lo..hi]
            .iter()
            .copied()
            .filter(|&i| self.cfg.kernel.weight(self.xs[i] - x0, h) != 0.0)
            .collect();
        idx.sort_unstable();
        idx
    }

    pub fn design_matrix(&self, x0: f64) -> DesignMatrix {
        let window = self.window(x0);
        accumulate_design(window.iter().map(|&i| self.xs[i] - x0), x0, self.m(), &self.cfg)
    }

    fn solve(&self, x0: f64) -> Result<LocalSolve, SingularDesign> {
        let cfg = &self.cfg;
        let h = cfg.bandwidth;
        let window = self.window(x0);
        let design = accumulate_design(window.iter().map(|&i| self.xs[i] - x0), x0, self.m(), cfg);
        let singular = || SingularDesign {
            x0,
            bandwidth: h,
            degree: cfg.degree,
            in_window_count: design.in_window_count,
        };
        if design.is_singular() {
            return Err(singular());
        }
        let chol = design.to_matrix().cholesky().ok_or_else(singular)?;
        let mut e0 = DVector::zeros(cfg.dim());
        e0[0] = 1.0;
        let v = chol.solve(&e0);
        let values = window
            .iter()
            .map(|&i| {
                let dx = self.xs[i] - x0;
                let rho = poly_basis(dx / h, cfg.degree);
                let dot: f64 = rho.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                dot * cfg.kernel.weight(dx, h) / h
            })
            .collect();
        Ok(LocalSolve {
            weights: WeightVector {
                x0,
                bandwidth: h,
                normalized: false,
                len: self.m(),
                support: window.clone(),
                values,
            },
            chol,
            window,
        })
    }

    /// Raw weights `ŵ(X_i, x0)`.
    pub fn weights_at(&self, x0: f64) -> Result<WeightVector, SingularDesign> {
        self.solve(x0).map(|s| s.weights)
    }

    /// `b̂(x0)` for the given residuals.
    pub fn fit_at(&self, x0: f64, residuals: &[f64]) -> Result<f64> {
        let w = self.weights_at(x0)?;
        residual_fit(residuals, &w, self.m())
    }

    /// Full local coefficient vector `β̂(x0)` (intercept first), via the
    /// closed form `B⁻¹ · 1/(m h) Σ ρ(u_i) K(u_i) r_i`.
    pub fn coefficients_at(&self, x0: f64, residuals: &[f64]) -> Result<Vec<f64>> {
        if residuals.len() != self.m() {
            return Err(Error::LengthMismatch {
                what: "residuals vs fold-2 covariates",
                left: residuals.len(),
                right: self.m(),
            });
        }
        let solve = self.solve(x0)?;
        let cfg = &self.cfg;
        let h = cfg.bandwidth;
        let mut rhs = DVector::zeros(cfg.dim());
        for &i in &solve.window {
            let dx = self.xs[i] - x0;
            let rho = poly_basis(dx / h, cfg.degree);
            let k = cfg.kernel.weight(dx, h);
            for (a, r) in rho.iter().enumerate() {
                rhs[a] += r * k * residuals[i];
            }
        }
        rhs /= self.m() as f64 * h;
        Ok(solve.chol.solve(&rhs).iter().copied().collect())
    }
}

/// Closed-form weights `ŵ(X_i, x0)` for every fold-2 observation.
pub fn lp_weights(
    xs_fold2: &[f64],
    x0: f64,
    cfg: &LocalPolyConfig,
) -> Result<WeightVector, SingularDesign> {
    LocalPolySmoother::new(xs_fold2, *cfg).weights_at(x0)
}

/// `b̂(x0) = 1/m Σ r_i ŵ(X_i)` (or `Σ r_i W_i` for normalized weights).
pub fn residual_fit(residuals: &[f64], w: &WeightVector, m: usize) -> Result<f64> {
    if residuals.len() != w.len() {
        return Err(Error::LengthMismatch {
            what: "residuals vs weights",
            left: residuals.len(),
            right: w.len(),
        });
    }
    let sum: f64 = w.iter().map(|(i, wi)| residuals[i] * wi).sum();
    Ok(if w.normalized { sum } else { sum / m as f64 })
}

/// Brute-force local weighted least squares.
///
/// Builds the normal equations `(Σ K ρρᵀ) β = Σ K ρ r` over in-window points
/// and solves them by Gaussian elimination with partial pivoting. Returns
/// `β̂(x0)`, intercept first.
pub fn wls_oracle(
    xs: &[f64],
    rs: &[f64],
    x0: f64,
    cfg: &LocalPolyConfig,
) -> Result<Vec<f64>> {
    if xs.len() != rs.len() {
        return Err(Error::LengthMismatch {
            what: "covariates vs residuals",
            left: xs.len(),
            right: rs.len(),
        });
    }
    let dim = cfg.dim();
    let h = cfg.bandwidth;
    let rows: Vec<(Vec<f64>, f64, f64)> = xs
        .iter()
        .zip(rs)
        .filter_map(|(&x, &r)| {
            let k = kernel_eval((x - x0) / h);
            ((x - x0).abs() <= h && k > 0.0).then(|| {
                let u = (x - x0) / h;
                let row = (0..dim)
                    .map(|p| u.powi(p as i32) / (1..=p).map(|q| q as f64).product::<f64>())
                    .collect();
                (row, k, r)
            })
        })
        .collect();
    let singular = || {
        Error::Singular(SingularDesign {
            x0,
            bandwidth: h,
            degree: cfg.degree,
            in_window_count: rows.len(),
        })
    };
    let mut distinct: Vec<f64> = rows.iter().map(|(row, _, _)| row.get(1).copied().unwrap_or(0.0)).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if rows.is_empty() || (dim > 1 && distinct.len() < dim) {
        return Err(singular());
    }

    // Augmented normal equations [A | b].
    let mut a = vec![vec![0.0; dim + 1]; dim];
    for (row, k, r) in &rows {
        for p in 0..dim {
            for q in 0..dim {
                a[p][q] += k * row[p] * row[q];
            }
            a[p][dim] += k * row[p] * r;
        }
    }
    let scale = a
        .iter()
        .flat_map(|r| r[..dim].iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() <= 1e-13 * scale {
            return Err(singular());
        }
        a.swap(col, pivot);
        for row in col + 1..dim {
            let f = a[row][col] / a[col][col];
            for c in col..=dim {
                a[row][c] -= f * a[col][c];
            }
        }
    }
    let mut beta = vec![0.0; dim];
    for p in (0..dim).rev() {
        let tail: f64 = (p + 1..dim).map(|q| a[p][q] * beta[q]).sum();
        beta[p] = (a[p][dim] - tail) / a[p][p];
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_design(seed: u64, n: usize) -> Vec<f64> {
        let mut g = rng::stream(seed);
        (0..n).map(|_| g.random::<f64>()).collect()
    }

    #[test]
    fn basis_values() {
        assert_eq!(poly_basis(0.0, 3), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(poly_basis(1.0, 2), vec![1.0, 1.0, 0.5]);
        // (-2)^k / k! evaluated independently.
        let expected: Vec<f64> = (0..=3)
            .map(|k| (-2.0f64).powi(k) / [1.0, 1.0, 2.0, 6.0][k as usize])
            .collect();
        let got = poly_basis(-2.0, 3);
        for (g, e) in got.iter().zip(&expected) {
            assert_relative_eq!(g, e, epsilon = 1e-15);
        }
        assert_relative_eq!(got[3], -4.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn boxcar_kernel() {
        assert_eq!(kernel_eval(0.0), 1.0);
        assert_eq!(kernel_eval(1.0), 1.0);
        assert_eq!(kernel_eval(-1.0), 1.0);
        assert_eq!(kernel_eval(1.000_000_1), 0.0);
        assert_eq!(Kernel::Boxcar.weight(0.3, 0.3), 1.0);
        assert_eq!(Kernel::Boxcar.weight(0.300_000_1, 0.3), 0.0);
    }

    #[test]
    fn config_bounds() {
        assert!(LocalPolyConfig::new(11, 0.5).is_err());
        assert!(LocalPolyConfig::new(1, 0.0).is_err());
        assert!(LocalPolyConfig::new(1, 1.01).is_err());
        assert!(LocalPolyConfig::new(10, 1.0).is_ok());
    }

    #[test]
    fn single_point_design() {
        let cfg = LocalPolyConfig::new(0, 0.1).unwrap();
        let d = design_matrix(&[0.4], 0.4, &cfg);
        assert_eq!(d.dim(), 1);
        assert_relative_eq!(d.get(0, 0), 10.0, epsilon = 1e-12);
        assert_eq!(d.in_window_count, 1);
    }

    #[test]
    fn empty_window_design_is_zero() {
        let cfg = LocalPolyConfig::new(2, 0.1).unwrap();
        let d = design_matrix(&[0.0, 0.05, 0.9], 0.5, &cfg);
        assert!(d.entries().iter().all(|&v| v == 0.0));
        assert_eq!(d.in_window_count, 0);
        assert!(d.is_singular());
    }

    #[test]
    fn design_matches_naive_double_loop() {
        let xs = random_design(11, 20);
        let cfg = LocalPolyConfig::new(2, 0.35).unwrap();
        let x0 = 0.45;
        let d = design_matrix(&xs, x0, &cfg);
        let m = xs.len() as f64;
        for a in 0..3 {
            for b in 0..3 {
                let mut s = 0.0;
                for &x in &xs {
                    let u = (x - x0) / cfg.bandwidth;
                    let k = if u.abs() <= 1.0 { 1.0 } else { 0.0 };
                    let fa = [1.0, u, u * u / 2.0][a];
                    let fb = [1.0, u, u * u / 2.0][b];
                    s += fa * fb * k;
                }
                assert!((d.get(a, b) - s / (m * cfg.bandwidth)).abs() < 1e-12);
                assert!((d.get(a, b) - d.get(b, a)).abs() < 1e-12);
            }
        }
        // Smoother's windowed accumulation agrees with the full scan.
        let s = LocalPolySmoother::new(&xs, cfg).design_matrix(x0);
        for (p, q) in s.entries().iter().zip(d.entries()) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn degree_zero_weights_are_uniform_in_window() {
        let xs = [0.1, 0.45, 0.5, 0.55, 0.9];
        let cfg = LocalPolyConfig::new(0, 0.1).unwrap();
        let w = lp_weights(&xs, 0.5, &cfg).unwrap().normalized();
        let dense = w.to_dense();
        assert_eq!(dense[0], 0.0);
        assert_eq!(dense[4], 0.0);
        for &i in &[1, 2, 3] {
            assert_relative_eq!(dense[i], 1.0 / 3.0, epsilon = 1e-14);
        }
        let w3 = lp_weights(&[0.49, 0.5, 0.51], 0.5, &cfg).unwrap().normalized();
        for v in w3.to_dense() {
            assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn singular_design_reports_context() {
        let cfg = LocalPolyConfig::new(2, 0.05).unwrap();
        let err = lp_weights(&[0.5, 0.52, 0.9], 0.5, &cfg).unwrap_err();
        assert_eq!(err.in_window_count, 2);
        assert_eq!(err.degree, 2);
        assert_eq!(err.bandwidth, 0.05);
        // Repeated covariates do not count as distinct support.
        let err = lp_weights(&[0.5, 0.5, 0.5], 0.5, &LocalPolyConfig::new(1, 0.1).unwrap())
            .unwrap_err();
        assert_eq!(err.in_window_count, 3);
    }

    #[test]
    fn residual_fit_basics() {
        let xs = random_design(3, 40);
        let cfg = LocalPolyConfig::new(1, 0.3).unwrap();
        let w = lp_weights(&xs, 0.4, &cfg).unwrap();
        assert_eq!(residual_fit(&vec![0.0; 40], &w, 40).unwrap(), 0.0);
        let rs: Vec<f64> = xs.iter().map(|x| 2.0 + 3.0 * x).collect();
        assert!((residual_fit(&rs, &w, 40).unwrap() - (2.0 + 3.0 * 0.4)).abs() < 1e-10);
        // Raw and normalized forms agree.
        let a = residual_fit(&rs, &w, 40).unwrap();
        let b = residual_fit(&rs, &w.normalized(), 40).unwrap();
        assert!((a - b).abs() < 1e-13);
        assert!(matches!(
            residual_fit(&[1.0], &w, 40),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn oracle_constant_and_single_point() {
        let xs = random_design(8, 30);
        for degree in 0..=3 {
            let cfg = LocalPolyConfig::new(degree, 0.4).unwrap();
            let beta = wls_oracle(&xs, &vec![1.7; 30], 0.5, &cfg).unwrap();
            assert!((beta[0] - 1.7).abs() < 1e-12);
            for b in &beta[1..] {
                assert!(b.abs() < 1e-9);
            }
        }
        let cfg = LocalPolyConfig::new(0, 0.05).unwrap();
        let beta = wls_oracle(&[0.1, 0.52, 0.9], &[5.0, -2.5, 7.0], 0.5, &cfg).unwrap();
        assert_eq!(beta, vec![-2.5]);
        assert!(matches!(
            wls_oracle(&[0.1, 0.9], &[1.0, 1.0], 0.5, &cfg),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn coefficients_match_oracle() {
        let xs = random_design(21, 80);
        let mut g = rng::stream(22);
        let rs: Vec<f64> = xs.iter().map(|_| g.random::<f64>() - 0.5).collect();
        for degree in 0..=3 {
            let cfg = LocalPolyConfig::new(degree, 0.3).unwrap();
            let sm = LocalPolySmoother::new(&xs, cfg);
            let beta = sm.coefficients_at(0.6, &rs).unwrap();
            let oracle = wls_oracle(&xs, &rs, 0.6, &cfg).unwrap();
            for (a, b) in beta.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8, "degree {degree}: {a} vs {b}");
            }
            assert!((beta[0] - sm.fit_at(0.6, &rs).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn weight_vector_accessors() {
        let xs = [0.2, 0.5, 0.55, 0.95];
        let w = lp_weights(&xs, 0.5, &LocalPolyConfig::new(0, 0.1).unwrap()).unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(w.support(), &[1, 2]);
        assert_eq!(w.get(0), 0.0);
        assert!(w.get(1) > 0.0);
        assert!(!w.normalized);
        assert!(w.normalized().normalized);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn polynomial_reproduction(
            seed in any::<u64>(),
            n in 20usize..120,
            degree in 0usize..=3,
            h in 0.15f64..0.8,
            x0 in 0.0f64..1.0,
            coeffs in proptest::collection::vec(-3.0f64..3.0, 4),
        ) {
            let xs = random_design(seed, n);
            let cfg = LocalPolyConfig::new(degree, h).unwrap();
            if let Ok(w) = lp_weights(&xs, x0, &cfg) {
                let w = w.normalized();
                let q = |x: f64| (0..=degree).map(|k| coeffs[k] * x.powi(k as i32)).sum::<f64>();
                let lhs: f64 = w.iter().map(|(i, wi)| q(xs[i]) * wi).sum();
                prop_assert!((lhs - q(x0)).abs() < 1e-9, "{} vs {}", lhs, q(x0));
            }
        }

        #[test]
        fn compact_support(seed in any::<u64>(), n in 5usize..80, h in 0.01f64..0.5, x0 in 0.0f64..1.0) {
            let xs = random_design(seed, n);
            let cfg = LocalPolyConfig::new(1, h).unwrap();
            if let Ok(w) = lp_weights(&xs, x0, &cfg) {
                for (i, &x) in xs.iter().enumerate() {
                    if (x - x0).abs() > h {
                        prop_assert_eq!(w.get(i), 0.0);
                    }
                }
            }
        }

        #[test]
        fn scale_equivariance(seed in any::<u64>(), c in -10.0f64..10.0) {
            let xs = random_design(seed, 60);
            let mut g = rng::stream(seed ^ 1);
            let rs: Vec<f64> = (0..60).map(|_| g.random::<f64>()).collect();
            let scaled: Vec<f64> = rs.iter().map(|r| r * c).collect();
            let cfg = LocalPolyConfig::new(1, 0.3).unwrap();
            if let Ok(w) = lp_weights(&xs, 0.5, &cfg) {
                let a = residual_fit(&rs, &w, 60).unwrap();
                let b = residual_fit(&scaled, &w, 60).unwrap();
                prop_assert!((b - c * a).abs() <= 1e-12 * (1.0 + (c * a).abs()));
            }
        }
    }
}
