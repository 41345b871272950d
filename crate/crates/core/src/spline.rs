//! Penalized natural cubic regression splines.
//!
//! The basis is the natural cubic spline space on `q` knots, parameterized by
//! the function values at the knots (a "cardinal" parameterization). For a
//! coefficient vector `β` of knot values the second derivatives at the knots
//! are `γ = Fβ`, with `γ₀ = γ_{q-1} = 0` and the interior values solving the
//! tridiagonal system `B γ_int = D β`. The integrated squared second
//! derivative is then exactly `βᵀ Dᵀ B⁻¹ D β`.
//!
//! Constants and straight lines have zero curvature, so they lie in the null
//! space of the penalty and are reproduced exactly for every smoothing
//! parameter. Outside the outermost knots the spline continues linearly.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lower and upper bound of the GCV search, in log10 units of the
/// scale-normalized smoothing parameter.
pub const LOG10_LAMBDA_RANGE: (f64, f64) = (-6.0, 8.0);
const GRID_POINTS: usize = 15;
const GOLDEN_TOL: f64 = 1e-4;
const RIDGE_FACTOR: f64 = 1e-10;

/// Knot layout of a natural cubic spline basis. `knots` includes both
/// boundary knots, so `boundary == (knots[0], knots[n_basis - 1])` and the
/// basis has one function per knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasisSpec {
    knots: Vec<f64>,
    boundary: (f64, f64),
    n_basis: usize,
}

impl SplineBasisSpec {
    pub fn from_knots(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "a natural spline basis needs at least 3 knots, got {}",
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "knots must be finite and strictly increasing".into(),
            ));
        }
        let boundary = (knots[0], knots[knots.len() - 1]);
        Ok(Self {
            n_basis: knots.len(),
            knots,
            boundary,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn boundary(&self) -> (f64, f64) {
        self.boundary
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    /// Shifts every knot by `delta`.
    pub fn translated(&self, delta: f64) -> Result<Self> {
        Self::from_knots(self.knots.iter().map(|k| k + delta).collect())
    }

    fn spacing(&self) -> Vec<f64> {
        self.knots.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `D` ((q-2) × q) and `B` ((q-2) × (q-2)) of the second-derivative
    /// relations `B γ_int = D β`.
    fn curvature_system(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let q = self.n_basis;
        let h = self.spacing();
        let m = q - 2;
        let mut d = DMatrix::zeros(m, q);
        let mut b = DMatrix::zeros(m, m);
        for i in 0..m {
            d[(i, i)] = 1.0 / h[i];
            d[(i, i + 1)] = -1.0 / h[i] - 1.0 / h[i + 1];
            d[(i, i + 2)] = 1.0 / h[i + 1];
            b[(i, i)] = (h[i] + h[i + 1]) / 3.0;
            if i + 1 < m {
                b[(i, i + 1)] = h[i + 1] / 6.0;
                b[(i + 1, i)] = h[i + 1] / 6.0;
            }
        }
        (d, b)
    }

    /// The q × q matrix `F` mapping knot values to knot second derivatives.
    pub fn curvature_map(&self) -> DMatrix<f64> {
        let q = self.n_basis;
        let (d, b) = self.curvature_system();
        let chol = Cholesky::new(b).expect("spline B matrix is positive definite");
        let inner = chol.solve(&d);
        let mut f = DMatrix::zeros(q, q);
        f.view_mut((1, 0), (q - 2, q)).copy_from(&inner);
        f
    }

    /// Integrated squared second derivative penalty `S = Dᵀ B⁻¹ D`.
    pub fn penalty_matrix(&self) -> DMatrix<f64> {
        let (d, b) = self.curvature_system();
        let chol = Cholesky::new(b).expect("spline B matrix is positive definite");
        let s = d.transpose() * chol.solve(&d);
        // Symmetrize away rounding asymmetry.
        (&s + s.transpose()) * 0.5
    }

    /// Index of the knot interval used to evaluate at `t` together with the
    /// weights on `(β_j, β_{j+1}, γ_j, γ_{j+1})`.
    fn local_weights(&self, t: f64) -> (usize, [f64; 4]) {
        let k = &self.knots;
        let q = k.len();
        if t < k[0] {
            let h = k[1] - k[0];
            let d = t - k[0];
            return (0, [1.0 - d / h, d / h, -d * h / 3.0, -d * h / 6.0]);
        }
        if t > k[q - 1] {
            let j = q - 2;
            let h = k[q - 1] - k[j];
            let d = t - k[q - 1];
            return (j, [-d / h, 1.0 + d / h, d * h / 6.0, d * h / 3.0]);
        }
        let j = k.partition_point(|&x| x <= t).saturating_sub(1).min(q - 2);
        let h = k[j + 1] - k[j];
        let left = t - k[j];
        let right = k[j + 1] - t;
        (
            j,
            [
                right / h,
                left / h,
                (right * right * right / h - h * right) / 6.0,
                (left * left * left / h - h * left) / 6.0,
            ],
        )
    }

    /// Dense design matrix, one row per time, one column per basis function.
    pub fn design_matrix(&self, times: &[f64]) -> DMatrix<f64> {
        let q = self.n_basis;
        let f = self.curvature_map();
        let mut x = DMatrix::zeros(times.len(), q);
        for (r, &t) in times.iter().enumerate() {
            let (j, w) = self.local_weights(t);
            x[(r, j)] += w[0];
            x[(r, j + 1)] += w[1];
            for c in 0..q {
                x[(r, c)] += w[2] * f[(j, c)] + w[3] * f[(j + 1, c)];
            }
        }
        x
    }
}

/// Builds a basis with knots at quantiles of the distinct values in `times`.
///
/// The basis size is `maxdf` (intercept included), capped at one less than
/// the number of distinct times and never below 3.
pub fn make_basis_spec(times: &[f64], maxdf: usize) -> Result<SplineBasisSpec> {
    let mut distinct: Vec<f64> = times.iter().copied().filter(|t| t.is_finite()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let d = distinct.len();
    if d < 4 {
        return Err(Error::InsufficientSupport { distinct: d });
    }
    let q = maxdf.min(d - 1).max(3);
    let mut knots: Vec<f64> = (0..q)
        .map(|j| {
            let pos = (d - 1) as f64 * j as f64 / (q - 1) as f64;
            let lo = (pos.floor() as usize).min(d - 1);
            if lo + 1 >= d {
                distinct[d - 1]
            } else {
                let frac = pos - lo as f64;
                distinct[lo] + frac * (distinct[lo + 1] - distinct[lo])
            }
        })
        .collect();
    knots[0] = distinct[0];
    knots[q - 1] = distinct[d - 1];
    knots.dedup_by(|a, b| *a <= *b);
    if knots.len() < 3 {
        return Err(Error::InsufficientSupport { distinct: d });
    }
    SplineBasisSpec::from_knots(knots)
}

/// A fitted penalized spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineModel {
    pub spec: SplineBasisSpec,
    /// Fitted values at the knots.
    pub coefficients: Vec<f64>,
    /// Second derivatives at the knots implied by `coefficients`.
    pub curvature: Vec<f64>,
    pub lambda: f64,
    pub edf: f64,
    pub n_obs: usize,
    pub rss: f64,
}

impl SplineModel {
    pub fn from_coefficients(
        spec: SplineBasisSpec,
        coefficients: Vec<f64>,
        lambda: f64,
        edf: f64,
        n_obs: usize,
        rss: f64,
    ) -> Self {
        let beta = DVector::from_column_slice(&coefficients);
        let curvature = (spec.curvature_map() * beta).as_slice().to_vec();
        Self {
            spec,
            coefficients,
            curvature,
            lambda,
            edf,
            n_obs,
            rss,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (j, w) = self.spec.local_weights(t);
        w[0] * self.coefficients[j]
            + w[1] * self.coefficients[j + 1]
            + w[2] * self.curvature[j]
            + w[3] * self.curvature[j + 1]
    }

    pub fn predict(&self, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.eval(t)).collect()
    }

    /// `n log(rss / n) + 2 edf`.
    pub fn aic(&self) -> f64 {
        let n = self.n_obs as f64;
        n * (self.rss.max(f64::MIN_POSITIVE) / n).ln() + 2.0 * self.edf
    }

    pub fn gcv(&self) -> f64 {
        gcv_score(self.n_obs, self.rss, self.edf)
    }
}

/// `n · rss / (n − edf)²`, infinite when `edf ≥ n`.
pub fn gcv_score(n: usize, rss: f64, edf: f64) -> f64 {
    let n = n as f64;
    let dof = n - edf;
    if dof <= 0.0 {
        f64::INFINITY
    } else {
        n * rss / (dof * dof)
    }
}

/// Sufficient statistics of a penalized least-squares problem on a fixed
/// basis: `XᵀX`, `Xᵀ(y − ȳ)` and `‖y − ȳ‖²`.
///
/// Internally the coefficients are rotated into `β = N a + Z b`, where `N`
/// spans constants and lines (the penalty null space) and `Z` holds the
/// eigenvectors of `S` with positive eigenvalues. The penalty is then
/// diagonal with exact zeros on the null block, which keeps the affine part
/// of the fit accurate however large `λ` gets.
#[derive(Debug, Clone)]
pub struct PenalizedProblem {
    spec: SplineBasisSpec,
    rotation: DMatrix<f64>,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    penalty: DVector<f64>,
    yty: f64,
    y_mean: f64,
    n: usize,
}

/// Orthonormal `[N | Z]` and the penalty eigenvalues in the same column
/// order (zeros for `N`).
fn null_space_rotation(spec: &SplineBasisSpec) -> (DMatrix<f64>, DVector<f64>) {
    let q = spec.n_basis();
    let s = spec.penalty_matrix();
    let mean = spec.knots().iter().sum::<f64>() / q as f64;
    let ones = DVector::from_element(q, 1.0 / (q as f64).sqrt());
    let centered = DVector::from_iterator(q, spec.knots().iter().map(|k| k - mean));
    let centered = &centered / centered.norm();

    let eig = s.symmetric_eigen();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut rot = DMatrix::zeros(q, q);
    let mut pen = DVector::zeros(q);
    rot.set_column(0, &ones);
    rot.set_column(1, &centered);
    for (c, &i) in order.iter().take(q - 2).enumerate() {
        // Project out the null space so the rotation stays orthonormal.
        let mut v = eig.eigenvectors.column(i).into_owned();
        v -= &ones * ones.dot(&v);
        v -= &centered * centered.dot(&v);
        let v = &v / v.norm();
        rot.set_column(c + 2, &v);
        pen[c + 2] = eig.eigenvalues[i].max(0.0);
    }
    (rot, pen)
}

#[derive(Debug, Clone)]
pub struct PenalizedSolution {
    pub coefficients: Vec<f64>,
    pub edf: f64,
    /// Residual sum of squares computed from the sufficient statistics.
    pub rss: f64,
}

impl PenalizedProblem {
    pub fn new(times: &[f64], responses: &[f64], spec: &SplineBasisSpec) -> Result<Self> {
        if times.len() != responses.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: responses.len(),
            });
        }
        if times.is_empty() {
            return Err(Error::FitFailure("no observations".into()));
        }
        let q = spec.n_basis();
        let n = times.len();
        let y_mean = responses.iter().sum::<f64>() / n as f64;

        // Accumulate in (β, γ) coordinates, where every row has at most four
        // non-zeros, then map through T = [I; F].
        let mut g2 = DMatrix::<f64>::zeros(2 * q, 2 * q);
        let mut v2 = DVector::<f64>::zeros(2 * q);
        let mut yty = 0.0;
        for (&t, &y) in times.iter().zip(responses) {
            let (j, w) = spec.local_weights(t);
            let idx = [j, j + 1, q + j, q + j + 1];
            let yc = y - y_mean;
            yty += yc * yc;
            for a in 0..4 {
                v2[idx[a]] += w[a] * yc;
                for b in 0..4 {
                    g2[(idx[a], idx[b])] += w[a] * w[b];
                }
            }
        }
        let mut t_map = DMatrix::<f64>::zeros(2 * q, q);
        t_map.view_mut((0, 0), (q, q)).fill_with_identity();
        t_map.view_mut((q, 0), (q, q)).copy_from(&spec.curvature_map());
        let (rotation, penalty) = null_space_rotation(spec);
        let t_map = t_map * &rotation;
        let gram = t_map.transpose() * &g2 * &t_map;
        let gram = (&gram + gram.transpose()) * 0.5;
        let xty = t_map.transpose() * v2;
        Ok(Self {
            spec: spec.clone(),
            rotation,
            gram,
            xty,
            penalty,
            yty,
            y_mean,
            n,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n
    }

    /// Ratio `tr(XᵀX) / tr(S)` that puts the data and penalty terms on a
    /// comparable footing; the GCV search works in multiples of it.
    pub fn lambda_scale(&self) -> f64 {
        let ts = self.penalty.sum();
        if ts > 0.0 {
            self.gram.trace() / ts
        } else {
            1.0
        }
    }

    fn factor(&self, lambda: f64) -> Result<Cholesky<f64, Dyn>> {
        let a = &self.gram + DMatrix::from_diagonal(&(&self.penalty * lambda));
        if let Some(c) = Cholesky::new(a.clone()) {
            return Ok(c);
        }
        let q = a.nrows();
        let ridge = RIDGE_FACTOR * a.trace() / q as f64;
        let ridged = a + DMatrix::identity(q, q) * ridge;
        Cholesky::new(ridged).ok_or_else(|| {
            Error::FitFailure(format!(
                "penalized normal equations singular (n = {}, lambda = {lambda:e})",
                self.n
            ))
        })
    }

    pub fn solve(&self, lambda: f64) -> Result<PenalizedSolution> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "smoothing parameter must be finite and nonnegative, got {lambda}"
            )));
        }
        let chol = self.factor(lambda)?;
        let beta = chol.solve(&self.xty);
        let edf = chol.solve(&self.gram).trace();
        let rss = (self.yty - 2.0 * beta.dot(&self.xty) + beta.dot(&(&self.gram * &beta))).max(0.0);
        if !beta.iter().all(|b| b.is_finite()) || !edf.is_finite() {
            return Err(Error::FitFailure("non-finite coefficients".into()));
        }
        let coefficients = (&self.rotation * beta)
            .iter()
            .map(|b| b + self.y_mean)
            .collect();
        Ok(PenalizedSolution {
            coefficients,
            edf,
            rss,
        })
    }

    pub fn gcv(&self, lambda: f64) -> f64 {
        match self.solve(lambda) {
            Ok(s) => gcv_score(self.n, s.rss, s.edf),
            Err(_) => f64::INFINITY,
        }
    }

    fn gcv_log10(&self, rho: f64) -> f64 {
        self.gcv(self.lambda_scale() * 10f64.powf(rho))
    }

    /// GCV-optimal smoothing parameter: 15-point grid on the scaled
    /// log10 range, then golden-section refinement around the best point.
    pub fn select_lambda(&self) -> Result<f64> {
        let (lo, hi) = LOG10_LAMBDA_RANGE;
        let step = (hi - lo) / (GRID_POINTS - 1) as f64;
        let grid: Vec<(f64, f64)> = (0..GRID_POINTS)
            .map(|i| {
                let rho = lo + step * i as f64;
                (rho, self.gcv_log10(rho))
            })
            .collect();
        let (best_rho, best_score) = grid
            .iter()
            .copied()
            .fold((f64::NAN, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
        if !best_score.is_finite() {
            return Err(Error::FitFailure(format!(
                "GCV undefined on the whole grid (n = {}, basis = {})",
                self.n,
                self.spec.n_basis()
            )));
        }
        let (mut a, mut b) = ((best_rho - step).max(lo), (best_rho + step).min(hi));
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = self.gcv_log10(c);
        let mut fd = self.gcv_log10(d);
        while b - a > GOLDEN_TOL {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = self.gcv_log10(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = self.gcv_log10(d);
            }
        }
        let (rho, score) = if fc < fd { (c, fc) } else { (d, fd) };
        let rho = if score <= best_score { rho } else { best_rho };
        Ok(self.lambda_scale() * 10f64.powf(rho))
    }
}

fn exact_rss(model: &SplineModel, times: &[f64], responses: &[f64]) -> f64 {
    times
        .iter()
        .zip(responses)
        .map(|(&t, &y)| {
            let r = y - model.eval(t);
            r * r
        })
        .sum()
}

/// Minimizes `Σ (y − f(t))² + λ ∫ f″²` over the basis for a fixed `λ`.
pub fn fit_penalized(
    times: &[f64],
    responses: &[f64],
    spec: &SplineBasisSpec,
    lambda: f64,
) -> Result<SplineModel> {
    let problem = PenalizedProblem::new(times, responses, spec)?;
    fit_problem(&problem, times, responses, lambda)
}

fn fit_problem(
    problem: &PenalizedProblem,
    times: &[f64],
    responses: &[f64],
    lambda: f64,
) -> Result<SplineModel> {
    let sol = problem.solve(lambda)?;
    let mut model = SplineModel::from_coefficients(
        problem.spec.clone(),
        sol.coefficients,
        lambda,
        sol.edf,
        problem.n,
        0.0,
    );
    model.rss = exact_rss(&model, times, responses);
    Ok(model)
}

/// Chooses `λ` by GCV and returns it with the model refit at that value.
pub fn select_lambda(
    times: &[f64],
    responses: &[f64],
    spec: &SplineBasisSpec,
) -> Result<(f64, SplineModel)> {
    if times.len() < 4 {
        return Err(Error::InsufficientSupport {
            distinct: times.len(),
        });
    }
    let problem = PenalizedProblem::new(times, responses, spec)?;
    let lambda = problem.select_lambda()?;
    let model = fit_problem(&problem, times, responses, lambda)?;
    Ok((lambda, model))
}
