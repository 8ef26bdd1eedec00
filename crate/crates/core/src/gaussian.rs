//! Closed-form Gaussian facts and samplers.
//!
//! Everything here is a pure function of its inputs plus an explicit
//! [`RngStream`]. Covariances may be rank deficient (conditionals on a
//! noiseless linear constraint are exactly singular), so sampling uses a
//! symmetric eigendecomposition square root rather than Cholesky.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::erf;

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

/// Symmetry tolerance for covariance matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;

/// Standard normal CDF.
///
/// Computed as `erfc(-x/sqrt 2)/2` with the rational approximations of
/// `statrs::function::erf` (Boost constant set, relative error near 1e-16).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnivariateGaussian {
    pub mean: f64,
    pub variance: f64,
}

impl UnivariateGaussian {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
            return Err(invalid(format!(
                "univariate gaussian needs finite mean and variance >= 0, got N({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std_dev();
        (-0.5 * z * z).exp() / (self.std_dev() * (2.0 * std::f64::consts::PI).sqrt())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        normal_cdf((x - self.mean) / self.std_dev())
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.mean + self.std_dev() * rng.normal()
    }
}

fn equal_positive_variance(g1: &UnivariateGaussian, g2: &UnivariateGaussian) -> Result<f64> {
    if g1.variance != g2.variance {
        return Err(invalid(format!(
            "variances must be equal, got {} and {}",
            g1.variance, g2.variance
        )));
    }
    if g1.variance <= 0.0 {
        return Err(invalid("variance must be positive"));
    }
    Ok(g1.std_dev())
}

/// Upper bound `|mu1 - mu2| / (sqrt(2) sigma)` on the total variation
/// distance between two equal-variance Gaussians.
pub fn tv_bound_univariate(g1: &UnivariateGaussian, g2: &UnivariateGaussian) -> Result<f64> {
    let sd = equal_positive_variance(g1, g2)?;
    Ok((g1.mean - g2.mean).abs() / (std::f64::consts::SQRT_2 * sd))
}

/// Exact total variation distance `2 Phi(|delta| / 2 sigma) - 1` between two
/// equal-variance Gaussians, evaluated as `erf(|delta| / (2 sqrt(2) sigma))`
/// to keep precision at both ends.
pub fn tv_exact_univariate_equal_var(
    g1: &UnivariateGaussian,
    g2: &UnivariateGaussian,
) -> Result<f64> {
    let sd = equal_positive_variance(g1, g2)?;
    Ok(tv_exact_from_shift((g1.mean - g2.mean).abs(), sd))
}

pub(crate) fn tv_exact_from_shift(shift: f64, sd: f64) -> f64 {
    erf::erf(shift / (2.0 * std::f64::consts::SQRT_2 * sd)).clamp(0.0, 1.0)
}

/// Pinsker's inequality: `TV <= sqrt(KL / 2)`. The bound may exceed one.
pub fn pinsker_tv_bound(kl: f64) -> Result<f64> {
    if !(kl >= 0.0) {
        return Err(invalid(format!("KL divergence must be >= 0, got {kl}")));
    }
    Ok((kl / 2.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultivariateGaussian {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

impl MultivariateGaussian {
    /// Validates shape, symmetry (within [`SYMMETRY_TOL`]) and positive
    /// semidefiniteness (smallest eigenvalue >= `-PSD_TOL`).
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(invalid(format!(
                "covariance is {}x{}, mean has length {d}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite entry in mean or covariance"));
        }
        for i in 0..d {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(invalid(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        let min_eig = SymmetricEigen::new(covariance.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(invalid(format!(
                "covariance not positive semidefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { mean, covariance })
    }

    pub fn standard(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d], DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Precomputes a sampler for repeated draws.
    pub fn sampler(&self) -> GaussianSampler {
        GaussianSampler::new(self)
    }
}

/// KL divergence `KL(p || q)` between two multivariate Gaussians:
/// `(tr(Sq^-1 Sp) + dmu' Sq^-1 dmu - d + ln(|Sq| / |Sp|)) / 2`.
///
/// Returns `+inf` when `p` is singular and `q` is not.
pub fn kl_gaussians(p: &MultivariateGaussian, q: &MultivariateGaussian) -> Result<f64> {
    let d = p.dim();
    if q.dim() != d {
        return Err(invalid(format!("dimension mismatch: {d} vs {}", q.dim())));
    }
    let chol_q = q
        .covariance
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("covariance of q is not positive definite".into()))?;
    let logdet_q = 2.0 * chol_q.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let logdet_p = match p.covariance.clone().cholesky() {
        Some(c) => 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
        None => return Ok(f64::INFINITY),
    };
    let trace = chol_q.solve(&p.covariance).trace();
    let dmu = DVector::from_iterator(d, q.mean.iter().zip(&p.mean).map(|(a, b)| a - b));
    let maha = dmu.dot(&chol_q.solve(&dmu));
    let kl = 0.5 * (trace + maha - d as f64 + logdet_q - logdet_p);
    Ok(kl.max(0.0))
}

/// Inverse of `I + u v'` via Sherman-Morrison: `I - u v' / (1 + v'u)`.
pub fn sherman_morrison_inverse(u: &[f64], v: &[f64]) -> Result<DMatrix<f64>> {
    let d = u.len();
    if v.len() != d {
        return Err(invalid(format!("length mismatch: {d} vs {}", v.len())));
    }
    let pivot = 1.0 + u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    if pivot.abs() < 1e-12 {
        return Err(Error::Singular(format!("1 + v'u = {pivot:e}")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - u[i] * v[j] / pivot
    }))
}

/// Law of `X ~ N(0, I_d)` conditioned on `u'X + xi = r` with
/// `xi ~ N(0, sigma^2)` independent of `X`:
/// `N(r u / (|u|^2 + sigma^2), I - u u' / (|u|^2 + sigma^2))`.
pub fn conditional_given_linear(
    d: usize,
    u: &[f64],
    sigma: f64,
    r: f64,
) -> Result<MultivariateGaussian> {
    if u.len() != d {
        return Err(invalid(format!("u has length {}, expected {d}", u.len())));
    }
    if !(sigma >= 0.0) {
        return Err(invalid("sigma must be >= 0"));
    }
    let denom = u.iter().map(|v| v * v).sum::<f64>() + sigma * sigma;
    if denom <= 0.0 {
        return Err(invalid("u = 0 with sigma = 0 gives a degenerate constraint"));
    }
    let mean = u.iter().map(|v| r * v / denom).collect();
    let covariance = DMatrix::from_fn(d, d, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - u[i] * u[j] / denom
    });
    MultivariateGaussian::new(mean, covariance)
}

/// Repeated-draw sampler holding the symmetric square root of a covariance.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: DVector<f64>,
    root: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(g: &MultivariateGaussian) -> Self {
        let eig = SymmetricEigen::new(g.covariance.clone());
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let root = &eig.eigenvectors
            * DMatrix::from_diagonal(&sqrt_vals)
            * eig.eigenvectors.transpose();
        Self {
            mean: DVector::from_column_slice(&g.mean),
            root,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let d = self.mean.len();
        let z = DVector::from_fn(d, |_, _| rng.normal());
        (&self.mean + &self.root * z).iter().cloned().collect()
    }
}

/// One draw from `g`. Rank-deficient covariances are supported; the PSD check
/// happens when `g` is constructed.
pub fn sample_gaussian(g: &MultivariateGaussian, rng: &mut RngStream) -> Vec<f64> {
    if g.covariance.iter().all(|v| *v == 0.0) {
        return g.mean.clone();
    }
    GaussianSampler::new(g).sample(rng)
}

/// Draw from `N(0, I_d)` conditioned on the coordinates summing to `t`,
/// i.e. `N((t/d) 1, I - 1 1'/d)`.
pub fn sample_sum_conditioned(d: usize, t: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let mut x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    fill_sum_conditioned(&mut x, t);
    Ok(x)
}

/// Projects a vector of i.i.d. standard normals onto the hyperplane
/// `sum = t`; the last coordinate absorbs rounding so the sum is exact to
/// within one ulp-scale error.
pub(crate) fn fill_sum_conditioned(x: &mut [f64], t: f64) {
    let d = x.len();
    let shift = t / d as f64 - x.iter().sum::<f64>() / d as f64;
    for v in x.iter_mut() {
        *v += shift;
    }
    let head: f64 = x[..d - 1].iter().sum();
    x[d - 1] = t - head;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_statistic;

    fn n(mean: f64, var: f64) -> UnivariateGaussian {
        UnivariateGaussian::new(mean, var).unwrap()
    }

    /// Composite Simpson quadrature of `|p - q| / 2`, independent of erf.
    fn tv_by_quadrature(p: &UnivariateGaussian, q: &UnivariateGaussian) -> f64 {
        let (lo, hi, steps) = (-40.0, 40.0, 400_000);
        let h = (hi - lo) / steps as f64;
        let f = |x: f64| 0.5 * (p.pdf(x) - q.pdf(x)).abs();
        let mut acc = f(lo) + f(hi);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn tv_bound_examples() {
        let b = tv_bound_univariate(&n(0.0, 1.0), &n(1.0, 1.0)).unwrap();
        assert!((b - 0.70711).abs() < 1e-5);
        assert!((b - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert_eq!(tv_bound_univariate(&n(3.0, 4.0), &n(3.0, 4.0)).unwrap(), 0.0);
        let b = tv_bound_univariate(&n(0.0, 1.0), &n(0.5, 1.0)).unwrap();
        assert!(b >= 0.19741);
    }

    #[test]
    fn tv_rejects_bad_variances() {
        assert!(tv_bound_univariate(&n(0.0, 1.0), &n(0.0, 2.0)).is_err());
        assert!(tv_bound_univariate(&n(0.0, 0.0), &n(1.0, 0.0)).is_err());
        assert!(tv_exact_univariate_equal_var(&n(0.0, 1.0), &n(0.0, 2.0)).is_err());
    }

    #[test]
    fn tv_exact_matches_quadrature() {
        let (p, q) = (n(0.0, 1.0), n(1.0, 1.0));
        let oracle = tv_by_quadrature(&p, &q);
        assert!((oracle - 0.38292).abs() < 1e-5);
        let v = tv_exact_univariate_equal_var(&p, &q).unwrap();
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");

        let (p, q) = (n(0.0, 1.0), n(0.5, 1.0));
        let oracle = tv_by_quadrature(&p, &q);
        assert!((oracle - 0.19741).abs() < 1e-5);
        assert!((tv_exact_univariate_equal_var(&p, &q).unwrap() - oracle).abs() < 1e-6);

        let (p, q) = (n(2.0, 9.0), n(-1.0, 9.0));
        let oracle = tv_by_quadrature(&p, &q);
        assert!((tv_exact_univariate_equal_var(&p, &q).unwrap() - oracle).abs() < 1e-6);
    }

    #[test]
    fn tv_exact_edges() {
        assert_eq!(tv_exact_univariate_equal_var(&n(0.0, 1.0), &n(0.0, 1.0)).unwrap(), 0.0);
        let far = tv_exact_univariate_equal_var(&n(0.0, 1.0), &n(100.0, 1.0)).unwrap();
        assert!(1.0 - far < 1e-12);
    }

    #[test]
    fn pinsker_examples() {
        assert_eq!(pinsker_tv_bound(0.0).unwrap(), 0.0);
        assert_eq!(pinsker_tv_bound(0.5).unwrap(), 0.5);
        assert_eq!(pinsker_tv_bound(2.0).unwrap(), 1.0);
        assert!(pinsker_tv_bound(-0.1).is_err());
        assert!(pinsker_tv_bound(f64::NAN).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = MultivariateGaussian::standard(2).unwrap();
        assert!(kl_gaussians(&p, &p).unwrap().abs() < 1e-14);
        let q = MultivariateGaussian::new(vec![1.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        assert!((kl_gaussians(&p, &q).unwrap() - 0.5).abs() < 1e-14);
        let singular = MultivariateGaussian::new(vec![0.0; 2], DMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(kl_gaussians(&p, &singular), Err(Error::Singular(_))));
    }

    fn random_spd(d: usize, rng: &mut RngStream) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |_, _| rng.normal());
        &a * a.transpose() + DMatrix::identity(d, d) * 0.5
    }

    fn log_density(g: &MultivariateGaussian, x: &DVector<f64>) -> f64 {
        let d = g.dim() as f64;
        let chol = g.covariance.clone().cholesky().unwrap();
        let diff = x - DVector::from_column_slice(&g.mean);
        let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        -0.5 * (diff.dot(&chol.solve(&diff)) + logdet + d * (2.0 * std::f64::consts::PI).ln())
    }

    #[test]
    fn kl_matches_monte_carlo() {
        let mut rng = RngStream::new(11);
        let p = MultivariateGaussian::new(
            (0..3).map(|_| rng.normal()).collect(),
            random_spd(3, &mut rng),
        )
        .unwrap();
        let q = MultivariateGaussian::new(
            (0..3).map(|_| rng.normal()).collect(),
            random_spd(3, &mut rng),
        )
        .unwrap();
        let exact = kl_gaussians(&p, &q).unwrap();
        let sampler = p.sampler();
        let m = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..m {
            let x = DVector::from_vec(sampler.sample(&mut rng));
            let v = log_density(&p, &x) - log_density(&q, &x);
            s += v;
            s2 += v * v;
        }
        let mean = s / m as f64;
        let se = ((s2 / m as f64 - mean * mean) / m as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "MC {mean} +- {se} vs {exact}");
    }

    #[test]
    fn kl_nonnegative_on_random_pairs() {
        let mut rng = RngStream::new(5);
        for _ in 0..1000 {
            let d = 1 + rng.index(4);
            let p = MultivariateGaussian::new(
                (0..d).map(|_| rng.normal()).collect(),
                random_spd(d, &mut rng),
            )
            .unwrap();
            let q = MultivariateGaussian::new(
                (0..d).map(|_| rng.normal()).collect(),
                random_spd(d, &mut rng),
            )
            .unwrap();
            assert!(kl_gaussians(&p, &q).unwrap() >= 0.0);
            assert!(kl_gaussians(&p, &p).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn sherman_morrison_examples() {
        let id = sherman_morrison_inverse(&[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(id, DMatrix::identity(3, 3));
        // inverse of I - 1 1'/3 in two dimensions, checked against direct 2x2 inversion
        let m = sherman_morrison_inverse(&[1.0, 1.0], &[-1.0 / 3.0, -1.0 / 3.0]).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0]);
        let direct = a.try_inverse().unwrap();
        assert!((&m - &direct).norm() < 1e-12);
        assert!((&m - DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).norm() < 1e-12);
        assert!(matches!(
            sherman_morrison_inverse(&[1.0], &[-1.0]),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn sherman_morrison_multiplies_back() {
        let mut rng = RngStream::new(9);
        let mut checked = 0;
        while checked < 1000 {
            let d = 1 + rng.index(6);
            let u: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let pivot = 1.0 + u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            if pivot.abs() <= 0.1 {
                continue;
            }
            let inv = sherman_morrison_inverse(&u, &v).unwrap();
            let m = DMatrix::identity(d, d)
                + DVector::from_vec(u.clone()) * DVector::from_vec(v.clone()).transpose();
            assert!((inv * m - DMatrix::identity(d, d)).norm() < 1e-10);
            checked += 1;
        }
    }

    #[test]
    fn conditional_examples() {
        let g = conditional_given_linear(3, &[1.0, 0.0, 0.0], 0.0, 5.0).unwrap();
        assert_eq!(g.mean, vec![5.0, 0.0, 0.0]);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 1.0]));
        assert!((&g.covariance - expected).norm() < 1e-15);

        let d = 5;
        let t = 2.5;
        let g = conditional_given_linear(d, &vec![1.0; d], 0.0, t).unwrap();
        for m in &g.mean {
            assert!((m - t / d as f64).abs() < 1e-15);
        }
        let expected = DMatrix::from_fn(d, d, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) - 1.0 / d as f64
        });
        assert!((&g.covariance - expected).norm() < 1e-14);

        let g = conditional_given_linear(3, &[0.3, -2.0, 1.0], 0.7, 0.0).unwrap();
        assert!(g.mean.iter().all(|m| *m == 0.0));
        assert!(conditional_given_linear(2, &[0.0, 0.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn conditional_kernel_when_noiseless() {
        let mut rng = RngStream::new(3);
        for _ in 0..200 {
            let d = 1 + rng.index(6);
            let u: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let g = conditional_given_linear(d, &u, 0.0, rng.normal()).unwrap();
            let su = &g.covariance * DVector::from_vec(u);
            assert!(su.norm() < 1e-10);
        }
    }

    #[test]
    fn degenerate_sample_returns_mean() {
        let g = MultivariateGaussian::new(vec![1.0, -2.0, 3.5], DMatrix::zeros(3, 3)).unwrap();
        let mut rng = RngStream::new(0);
        assert_eq!(sample_gaussian(&g, &mut rng), g.mean);
    }

    #[test]
    fn rejects_non_psd() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(MultivariateGaussian::new(vec![0.0; 2], c).is_err());
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(MultivariateGaussian::new(vec![0.0; 2], c).is_err());
    }

    #[test]
    fn standard_sample_mean() {
        let g = MultivariateGaussian::standard(5).unwrap();
        let sampler = g.sampler();
        let mut rng = RngStream::new(17);
        let n = 100_000;
        let mut sum = [0.0; 5];
        for _ in 0..n {
            for (s, v) in sum.iter_mut().zip(sampler.sample(&mut rng)) {
                *s += v;
            }
        }
        for s in sum {
            assert!((s / n as f64).abs() < 0.02);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = conditional_given_linear(4, &[1.0, 1.0, 0.5, 0.0], 0.0, 1.0).unwrap();
        let a = sample_gaussian(&g, &mut RngStream::new(99));
        let b = sample_gaussian(&g, &mut RngStream::new(99));
        assert_eq!(a, b);
    }

    #[test]
    fn sum_conditioned_examples() {
        let mut rng = RngStream::new(1);
        assert_eq!(sample_sum_conditioned(1, 3.0, &mut rng).unwrap(), vec![3.0]);
        let x = sample_sum_conditioned(10, 7.0, &mut rng).unwrap();
        assert!((x.iter().sum::<f64>() - 7.0).abs() < 1e-9);
        assert!(sample_sum_conditioned(0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn sum_conditioned_pair_marginal() {
        let mut rng = RngStream::new(2);
        let n = 100_000;
        let mut first = Vec::with_capacity(n);
        for _ in 0..n {
            let x = sample_sum_conditioned(2, 0.0, &mut rng).unwrap();
            assert_eq!(x[0], -x[1]);
            first.push(x[0]);
        }
        let target = n_cdf(0.0, 0.5);
        let ks = ks_statistic(&mut first, &target);
        assert!(ks < crate::stats::ks_critical_value(n, 0.01), "ks {ks}");
    }

    fn n_cdf(mean: f64, var: f64) -> impl Fn(f64) -> f64 {
        let g = UnivariateGaussian::new(mean, var).unwrap();
        move |x| g.cdf(x)
    }

    #[test]
    fn sum_conditioned_coordinate_marginals() {
        let (d, t) = (6, 1.5);
        let mut rng = RngStream::new(4);
        let n = 100_000;
        let mut cols = vec![Vec::with_capacity(n); d];
        for _ in 0..n {
            let x = sample_sum_conditioned(d, t, &mut rng).unwrap();
            for (c, v) in cols.iter_mut().zip(x) {
                c.push(v);
            }
        }
        let target = n_cdf(t / d as f64, 1.0 - 1.0 / d as f64);
        let crit = crate::stats::ks_critical_value(n, 0.01 / d as f64);
        for c in cols.iter_mut() {
            assert!(ks_statistic(c, &target) < crit);
        }
    }
}
