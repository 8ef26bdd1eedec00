//! Maximal, one-step, hybrid and sum-conditioned couplings of Gaussians.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::gaussian::{
    fill_sum_conditioned, GaussianSampler, MultivariateGaussian, UnivariateGaussian,
};
use crate::rng::RngStream;

/// Conditional variances at or below this are treated as deterministic.
const DEGENERATE_VAR: f64 = 1e-12;

/// Given `w ~ N(c, v)`, returns a partner distributed as `N(c + delta, v)`
/// under the reflection maximal coupling. One uniform is always consumed.
///
/// On disagreement the partner is the mirror image of `w` about
/// `c + delta/2`, so `sign(w - partner) = -sign(delta)`.
pub(crate) fn reflect(w: f64, c: f64, delta: f64, v: f64, rng: &mut RngStream) -> f64 {
    let u = rng.uniform();
    if delta == 0.0 {
        return w;
    }
    if v <= DEGENERATE_VAR {
        return w + delta;
    }
    // log q(w)/p(w) for p = N(c, v), q = N(c + delta, v)
    let log_ratio = delta * (w - c - 0.5 * delta) / v;
    if u.ln() < log_ratio {
        w
    } else {
        2.0 * c + delta - w
    }
}

/// Maximal coupling of two equal-variance Gaussians: `Pr[x != x']` equals
/// their total variation distance, and whenever the draws differ
/// `sign(x - x') = sign(p.mean - q.mean)`.
pub fn maximal_coupling_univariate(
    p: &UnivariateGaussian,
    q: &UnivariateGaussian,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if p.variance != q.variance {
        return Err(invalid(format!(
            "maximal coupling needs equal variances, got {} and {}",
            p.variance, q.variance
        )));
    }
    if !(p.variance > 0.0) {
        return Err(invalid("maximal coupling needs positive variance"));
    }
    let w = p.sample(rng);
    let partner = reflect(w, p.mean, q.mean - p.mean, p.variance, rng);
    Ok((w, partner))
}

/// Regression of coordinate `i` on the others: `coef` (with `coef[i] = 0`)
/// and residual variance. Uses a pseudo-inverse so singular covariances are
/// fine.
fn conditional_coefficients(cov: &DMatrix<f64>, i: usize) -> Result<(Vec<f64>, f64)> {
    let d = cov.nrows();
    if d == 1 {
        return Ok((vec![0.0], cov[(0, 0)].max(0.0)));
    }
    let others: Vec<usize> = (0..d).filter(|&j| j != i).collect();
    let sub = DMatrix::from_fn(d - 1, d - 1, |a, b| cov[(others[a], others[b])]);
    let cross = DVector::from_fn(d - 1, |a, _| cov[(i, others[a])]);
    let pinv = sub
        .pseudo_inverse(1e-10)
        .map_err(|e| invalid(format!("pseudo-inverse failed: {e}")))?;
    let a = pinv * &cross;
    let var = (cov[(i, i)] - a.dot(&cross)).max(0.0);
    let mut coef = vec![0.0; d];
    for (k, &j) in others.iter().enumerate() {
        coef[j] = a[k];
    }
    Ok((coef, var))
}

fn check_square(cov: &DMatrix<f64>, d: usize) -> Result<()> {
    if cov.nrows() != d || cov.ncols() != d {
        return Err(invalid(format!(
            "covariance is {}x{}, expected {d}x{d}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    Ok(())
}

/// Couples `q` and `qprime`, which share a covariance and whose means differ
/// only at coordinate `i`. Every other coordinate agrees.
pub fn one_step_coupling(
    q: &MultivariateGaussian,
    qprime: &MultivariateGaussian,
    i: usize,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = q.dim();
    if qprime.dim() != d {
        return Err(invalid("dimension mismatch"));
    }
    if i >= d {
        return Err(invalid(format!("coordinate {i} out of range for d = {d}")));
    }
    if q.covariance != qprime.covariance {
        return Err(invalid("one-step coupling needs a shared covariance"));
    }
    if (0..d).any(|j| j != i && q.mean[j] != qprime.mean[j]) {
        return Err(invalid(format!("means differ outside coordinate {i}")));
    }
    let (coef, var) = conditional_coefficients(&q.covariance, i)?;
    let x = GaussianSampler::new(q).sample(rng);
    let c = q.mean[i]
        + (0..d)
            .filter(|&j| j != i)
            .map(|j| coef[j] * (x[j] - q.mean[j]))
            .sum::<f64>();
    let mut xp = x.clone();
    xp[i] = reflect(x[i], c, qprime.mean[i] - q.mean[i], var, rng);
    Ok((x, xp))
}

/// Hybrid coupling for a general (possibly singular) shared covariance.
///
/// Samples `X ~ N(mu, cov)` and walks the chain of interpolating means one
/// coordinate at a time, applying a one-step coupling at each link.
#[derive(Debug, Clone)]
pub struct HybridCoupler {
    cov: DMatrix<f64>,
    coef: Vec<Vec<f64>>,
    var: Vec<f64>,
}

impl HybridCoupler {
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        let d = cov.nrows();
        check_square(&cov, d)?;
        if d == 0 {
            return Err(invalid("dimension must be positive"));
        }
        // validates symmetry and PSD
        MultivariateGaussian::new(vec![0.0; d], cov.clone())?;
        let mut coef = Vec::with_capacity(d);
        let mut var = Vec::with_capacity(d);
        for i in 0..d {
            let (c, v) = conditional_coefficients(&cov, i)?;
            coef.push(c);
            var.push(v);
        }
        Ok(Self { cov, coef, var })
    }

    pub fn dim(&self) -> usize {
        self.var.len()
    }

    pub fn couple(
        &self,
        mu: &[f64],
        muprime: &[f64],
        rng: &mut RngStream,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.dim();
        if mu.len() != d || muprime.len() != d {
            return Err(invalid("mean length does not match the covariance"));
        }
        let g = MultivariateGaussian {
            mean: mu.to_vec(),
            covariance: self.cov.clone(),
        };
        let x = GaussianSampler::new(&g).sample(rng);
        let mut w = x.clone();
        let mut m = mu.to_vec();
        for i in 0..d {
            let delta = muprime[i] - mu[i];
            let c = m[i]
                + (0..d)
                    .filter(|&j| j != i)
                    .map(|j| self.coef[i][j] * (w[j] - m[j]))
                    .sum::<f64>();
            w[i] = reflect(w[i], c, delta, self.var[i], rng);
            m[i] = muprime[i];
        }
        Ok((x, w))
    }
}

/// Lemma-style hybrid coupling of `N(mu, cov)` and `N(muprime, cov)`.
/// Coordinates with `mu[i] == muprime[i]` always agree bitwise.
pub fn hybrid_coupling(
    mu: &[f64],
    muprime: &[f64],
    cov: &DMatrix<f64>,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if mu.len() != muprime.len() {
        return Err(invalid("mean vectors differ in length"));
    }
    check_square(cov, mu.len())?;
    HybridCoupler::new(cov.clone())?.couple(mu, muprime, rng)
}

/// Hybrid coupling specialised to `cov = I - u u' / (|u|^2 + s2)`, whose
/// precision is `I + u u' / s2`. Each draw costs `O(d)`.
#[derive(Debug, Clone)]
pub(crate) struct RankOneChain {
    u: Vec<f64>,
    k: f64,
    kappa: f64,
}

impl RankOneChain {
    pub(crate) fn new(u: Vec<f64>, s2: f64) -> Result<Self> {
        if !(s2 > 0.0) || !s2.is_finite() {
            return Err(invalid(format!("rank-one chain needs s2 > 0, got {s2}")));
        }
        let a: f64 = u.iter().map(|v| v * v).sum();
        let kappa = if a > 0.0 {
            (1.0 - (s2 / (a + s2)).sqrt()) / a
        } else {
            0.0
        };
        Ok(Self {
            u,
            k: 1.0 / s2,
            kappa,
        })
    }

    pub(crate) fn dim(&self) -> usize {
        self.u.len()
    }

    /// Draws `N(mu, cov)` as `mu + g - kappa u (u'g)`.
    pub(crate) fn sample(&self, mu: &[f64], rng: &mut RngStream) -> Vec<f64> {
        let g: Vec<f64> = (0..self.dim()).map(|_| rng.normal()).collect();
        let ug: f64 = self.u.iter().zip(&g).map(|(a, b)| a * b).sum();
        mu.iter()
            .zip(&g)
            .zip(&self.u)
            .map(|((m, gi), ui)| m + gi - self.kappa * ui * ug)
            .collect()
    }

    /// Partner of `x ~ N(mu, cov)` distributed as `N(muprime, cov)`.
    pub(crate) fn couple(
        &self,
        x: &[f64],
        mu: &[f64],
        muprime: &[f64],
        rng: &mut RngStream,
    ) -> Vec<f64> {
        let mut w = x.to_vec();
        let mut m = mu.to_vec();
        let mut s: f64 = self
            .u
            .iter()
            .zip(w.iter().zip(&m))
            .map(|(ui, (wi, mi))| ui * (wi - mi))
            .sum();
        for i in 0..self.dim() {
            let ui = self.u[i];
            let ri = w[i] - m[i];
            let lii = 1.0 + self.k * ui * ui;
            let c = m[i] - self.k * ui * (s - ui * ri) / lii;
            let delta = muprime[i] - mu[i];
            w[i] = reflect(w[i], c, delta, 1.0 / lii, rng);
            m[i] = muprime[i];
            s += ui * ((w[i] - m[i]) - ri);
        }
        w
    }
}

/// Couples `N(0, I_d) | sum = t` with `N(0, I_d) | sum = tprime`.
///
/// The first `d - 1` coordinates follow `N((t/d) 1, I - 1 1'/d)` and are
/// chained one coordinate at a time; the last coordinate closes the sum.
/// Equal targets give bitwise-equal vectors.
pub fn sum_conditioned_coupling(
    d: usize,
    t: f64,
    tprime: f64,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if d == 1 {
        return Ok((vec![t], vec![tprime]));
    }
    let chain = RankOneChain::new(vec![1.0; d - 1], 1.0)?;
    Ok(couple_sum_conditioned(&chain, d, t, tprime, rng))
}

/// `chain` must be the rank-one chain for `u = 1_{d-1}`, `s2 = 1`.
pub(crate) fn couple_sum_conditioned(
    chain: &RankOneChain,
    d: usize,
    t: f64,
    tprime: f64,
    rng: &mut RngStream,
) -> (Vec<f64>, Vec<f64>) {
    if d == 1 {
        return (vec![t], vec![tprime]);
    }
    let mut x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    fill_sum_conditioned(&mut x, t);
    let df = d as f64;
    let mu = vec![t / df; d - 1];
    let mup = vec![tprime / df; d - 1];
    let mut xp = chain.couple(&x[..d - 1], &mu, &mup, rng);
    let head: f64 = xp.iter().sum();
    xp.push(tprime - head);
    (x, xp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{tv_exact_from_shift, tv_exact_univariate_equal_var};
    use crate::stats::{ks_critical_value, ks_statistic, Running};
    use proptest::prelude::*;

    fn n(mean: f64, var: f64) -> UnivariateGaussian {
        UnivariateGaussian::new(mean, var).unwrap()
    }

    #[test]
    fn maximal_identical_never_disagrees() {
        let mut rng = RngStream::new(1);
        for _ in 0..1000 {
            let (a, b) = maximal_coupling_univariate(&n(0.3, 2.0), &n(0.3, 2.0), &mut rng).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn maximal_rate_and_sign() {
        let (p, q) = (n(0.0, 1.0), n(1.0, 1.0));
        let oracle = tv_exact_univariate_equal_var(&p, &q).unwrap();
        let mut rng = RngStream::new(2);
        let trials = 100_000;
        let mut diff = 0;
        for _ in 0..trials {
            let (a, b) = maximal_coupling_univariate(&p, &q, &mut rng).unwrap();
            if a != b {
                diff += 1;
                assert!(a < b, "sign property violated: {a} vs {b}");
            }
        }
        let rate = diff as f64 / trials as f64;
        assert!((rate - oracle).abs() < 0.005, "{rate} vs {oracle}");
    }

    #[test]
    fn maximal_marginals_pass_ks() {
        let (p, q) = (n(0.0, 4.0), n(1.5, 4.0));
        let mut rng = RngStream::new(3);
        let trials = 100_000;
        let (mut xs, mut ys): (Vec<f64>, Vec<f64>) = (0..trials)
            .map(|_| maximal_coupling_univariate(&p, &q, &mut rng).unwrap())
            .unzip();
        let crit = ks_critical_value(trials, 0.01);
        assert!(ks_statistic(&mut xs, |x| p.cdf(x)) < crit);
        assert!(ks_statistic(&mut ys, |x| q.cdf(x)) < crit);
    }

    #[test]
    fn maximal_rejects_unequal_variance() {
        let mut rng = RngStream::new(4);
        assert!(maximal_coupling_univariate(&n(0.0, 1.0), &n(0.0, 2.0), &mut rng).is_err());
    }

    #[test]
    fn one_step_identity_covariance() {
        let q = MultivariateGaussian::new(vec![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let qp = MultivariateGaussian::new(vec![1.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let mut rng = RngStream::new(5);
        let trials = 100_000;
        let mut diff = 0;
        for _ in 0..trials {
            let (a, b) = one_step_coupling(&q, &qp, 0, &mut rng).unwrap();
            assert_eq!(a[1], b[1]);
            diff += usize::from(a[0] != b[0]);
        }
        let rate = diff as f64 / trials as f64;
        assert!((rate - 0.38292).abs() < 0.005, "{rate}");
    }

    #[test]
    fn one_step_matches_conditional_tv() {
        let cov = DMatrix::from_fn(3, 3, |i, j| (if i == j { 1.0 } else { 0.0 }) - 1.0 / 3.0);
        let delta = 0.4;
        let q = MultivariateGaussian::new(vec![0.0; 3], cov.clone()).unwrap();
        let qp = MultivariateGaussian::new(vec![0.0, delta, 0.0], cov).unwrap();
        // Sigma is singular here: x_1 is determined by the others given the
        // zero-sum constraint, so the conditional variance is zero and the
        // coordinate moves deterministically.
        let (_, var) = conditional_coefficients(&q.covariance, 1).unwrap();
        let oracle = if var <= DEGENERATE_VAR {
            1.0
        } else {
            tv_exact_from_shift(delta, var.sqrt())
        };
        let mut rng = RngStream::new(6);
        let trials = 20_000;
        let mut r = Running::default();
        for _ in 0..trials {
            let (a, b) = one_step_coupling(&q, &qp, 1, &mut rng).unwrap();
            assert_eq!(a[0], b[0]);
            assert_eq!(a[2], b[2]);
            r.push(f64::from(u8::from(a[1] != b[1])));
        }
        assert!((r.mean() - oracle).abs() <= 3.0 * r.std_error().max(1e-3));
    }

    #[test]
    fn one_step_nonsingular_conditional() {
        // Sigma = I - 11'/4 restricted to 3 coordinates is nonsingular.
        let cov = DMatrix::from_fn(3, 3, |i, j| (if i == j { 1.0 } else { 0.0 }) - 0.25);
        let delta = 0.8;
        let q = MultivariateGaussian::new(vec![0.0; 3], cov.clone()).unwrap();
        let qp = MultivariateGaussian::new(vec![delta, 0.0, 0.0], cov.clone()).unwrap();
        // Schur complement oracle computed independently
        let s = cov.view((1, 1), (2, 2)).into_owned();
        let b = cov.view((0, 1), (1, 2)).into_owned();
        let var = cov[(0, 0)] - (&b * s.try_inverse().unwrap() * b.transpose())[(0, 0)];
        let oracle = tv_exact_from_shift(delta, var.sqrt());
        let mut rng = RngStream::new(7);
        let mut r = Running::default();
        for _ in 0..40_000 {
            let (a, b) = one_step_coupling(&q, &qp, 0, &mut rng).unwrap();
            r.push(f64::from(u8::from(a[0] != b[0])));
        }
        assert!((r.mean() - oracle).abs() <= 3.0 * r.std_error(), "{} vs {oracle}", r.mean());
    }

    #[test]
    fn one_step_rejects_other_shifts() {
        let q = MultivariateGaussian::standard(2).unwrap();
        let qp = MultivariateGaussian::new(vec![1.0, 1.0], DMatrix::identity(2, 2)).unwrap();
        assert!(one_step_coupling(&q, &qp, 0, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn hybrid_independent_coordinates() {
        let cov = DMatrix::identity(2, 2);
        let mut rng = RngStream::new(8);
        let coupler = HybridCoupler::new(cov).unwrap();
        let trials = 100_000;
        let mut total = 0usize;
        for _ in 0..trials {
            let (a, b) = coupler.couple(&[0.0, 0.0], &[1.0, 1.0], &mut rng).unwrap();
            total += a.iter().zip(&b).filter(|(x, y)| x != y).count();
        }
        let mean = total as f64 / trials as f64;
        assert!((mean - 2.0 * 0.38292).abs() < 0.01, "{mean}");
    }

    #[test]
    fn hybrid_equal_means_identical() {
        let cov = DMatrix::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 0.5 });
        let mut rng = RngStream::new(9);
        for _ in 0..100 {
            let (a, b) = hybrid_coupling(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &cov, &mut rng).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn hybrid_rejects_mismatch() {
        let cov = DMatrix::identity(2, 2);
        assert!(hybrid_coupling(&[0.0], &[0.0, 1.0], &cov, &mut RngStream::new(0)).is_err());
        assert!(hybrid_coupling(&[0.0; 3], &[0.0; 3], &cov, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn hybrid_marginals_correlated_cov() {
        let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.6, 0.2, 0.6, 1.0, 0.3, 0.2, 0.3, 1.5]);
        let mu = [0.0, 1.0, -1.0];
        let mup = [0.5, 1.0, 0.0];
        let coupler = HybridCoupler::new(cov.clone()).unwrap();
        let mut rng = RngStream::new(10);
        let trials = 50_000;
        let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(trials); 3];
        for _ in 0..trials {
            let (a, b) = coupler.couple(&mu, &mup, &mut rng).unwrap();
            assert_eq!(a[1], b[1]);
            for i in 0..3 {
                cols[i].push(b[i]);
            }
        }
        let crit = ks_critical_value(trials, 0.01 / 3.0);
        for i in 0..3 {
            let g = UnivariateGaussian::new(mup[i], cov[(i, i)]).unwrap();
            assert!(ks_statistic(&mut cols[i], |x| g.cdf(x)) < crit, "coordinate {i}");
        }
    }

    #[test]
    fn rank_one_matches_dense() {
        let u = vec![0.3, -0.5, 1.1, 0.2];
        let s2 = 0.7;
        let a: f64 = u.iter().map(|v| v * v).sum();
        let cov = DMatrix::from_fn(4, 4, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) - u[i] * u[j] / (a + s2)
        });
        let dense = HybridCoupler::new(cov.clone()).unwrap();
        let chain = RankOneChain::new(u, s2).unwrap();
        let mu = [0.1, 0.2, -0.3, 0.0];
        let mup = [-0.1, 0.5, 0.3, 0.0];
        let mut rng = RngStream::new(11);
        for _ in 0..200 {
            let x = chain.sample(&mu, &mut rng);
            let mut r1 = rng.child(1);
            let mut r2 = rng.child(1);
            let fast = chain.couple(&x, &mu, &mup, &mut r1);
            // drive the dense chain from the same starting point
            let mut w = x.clone();
            let mut m = mu.to_vec();
            for i in 0..4 {
                let c = m[i]
                    + (0..4)
                        .filter(|&j| j != i)
                        .map(|j| dense.coef[i][j] * (w[j] - m[j]))
                        .sum::<f64>();
                w[i] = reflect(w[i], c, mup[i] - mu[i], dense.var[i], &mut r2);
                m[i] = mup[i];
            }
            for (p, q) in fast.iter().zip(&w) {
                assert!((p - q).abs() < 1e-9, "{fast:?} vs {w:?}");
            }
            rng = rng.child(2);
        }
    }

    #[test]
    fn rank_one_sampler_covariance() {
        let u = vec![1.0, 2.0, -1.0];
        let s2 = 0.5;
        let a: f64 = u.iter().map(|v| v * v).sum();
        let chain = RankOneChain::new(u.clone(), s2).unwrap();
        let mut rng = RngStream::new(12);
        let trials = 200_000;
        let mut cov = [[0.0; 3]; 3];
        for _ in 0..trials {
            let x = chain.sample(&[0.0; 3], &mut rng);
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += x[i] * x[j] / trials as f64;
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = (if i == j { 1.0 } else { 0.0 }) - u[i] * u[j] / (a + s2);
                assert!((cov[i][j] - want).abs() < 0.02, "({i},{j}): {} vs {want}", cov[i][j]);
            }
        }
    }

    #[test]
    fn sum_conditioned_trivial_cases() {
        let mut rng = RngStream::new(13);
        assert_eq!(
            sum_conditioned_coupling(1, 2.0, -1.0, &mut rng).unwrap(),
            (vec![2.0], vec![-1.0])
        );
        for _ in 0..100 {
            let (a, b) = sum_conditioned_coupling(20, 1.7, 1.7, &mut rng).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sum_conditioned_budget() {
        let mut rng = RngStream::new(14);
        let trials = 10_000;
        let mut r = Running::default();
        for _ in 0..trials {
            let (a, b) = sum_conditioned_coupling(50, 2.0, -2.0, &mut rng).unwrap();
            assert!((a.iter().sum::<f64>() - 2.0).abs() < 1e-9);
            assert!((b.iter().sum::<f64>() + 2.0).abs() < 1e-9);
            r.push(a.iter().zip(&b).filter(|(x, y)| x != y).count() as f64);
        }
        assert!(r.mean() <= 5.0 + 3.0 * r.std_error());
        // exact expectation: last coordinate plus 49 steps with shift 4/50 and
        // conditional variance 1/2
        let oracle = 1.0 + 49.0 * tv_exact_from_shift(4.0 / 50.0, 0.5f64.sqrt());
        assert!((r.mean() - oracle).abs() <= 3.0 * r.std_error(), "{} vs {oracle}", r.mean());
    }

    #[test]
    fn sum_conditioned_marginals() {
        let mut rng = RngStream::new(15);
        let trials = 50_000;
        let d = 5;
        let (mut c0, mut c4): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        for _ in 0..trials {
            let (_, b) = sum_conditioned_coupling(d, 1.0, -3.0, &mut rng).unwrap();
            c0.push(b[0]);
            c4.push(b[d - 1]);
        }
        let g = UnivariateGaussian::new(-3.0 / d as f64, 1.0 - 1.0 / d as f64).unwrap();
        let crit = ks_critical_value(trials, 0.005);
        assert!(ks_statistic(&mut c0, |x| g.cdf(x)) < crit);
        assert!(ks_statistic(&mut c4, |x| g.cdf(x)) < crit);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reflect_sign_property(seed in any::<u64>(), c in -5.0f64..5.0, delta in -3.0f64..3.0, v in 0.01f64..4.0) {
            let mut rng = RngStream::new(seed);
            for _ in 0..50 {
                let w = c + v.sqrt() * rng.normal();
                let p = reflect(w, c, delta, v, &mut rng);
                if p != w {
                    prop_assert!((w - p) * delta < 0.0);
                }
            }
        }

        #[test]
        fn sum_conditioned_hits_targets(seed in any::<u64>(), d in 1usize..40, t in -20.0f64..20.0, tp in -20.0f64..20.0) {
            let (a, b) = sum_conditioned_coupling(d, t, tp, &mut RngStream::new(seed)).unwrap();
            prop_assert!((a.iter().sum::<f64>() - t).abs() < 1e-9);
            prop_assert!((b.iter().sum::<f64>() - tp).abs() < 1e-9);
        }

        #[test]
        fn hybrid_shared_coordinates_bitwise(seed in any::<u64>(), shifts in proptest::collection::vec(proptest::option::of(-2.0f64..2.0), 4)) {
            let cov = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.2 });
            let mu = vec![0.0; 4];
            let mup: Vec<f64> = shifts.iter().map(|s| s.unwrap_or(0.0)).collect();
            let (a, b) = hybrid_coupling(&mu, &mup, &cov, &mut RngStream::new(seed)).unwrap();
            for i in 0..4 {
                if mup[i] == mu[i] {
                    prop_assert_eq!(a[i].to_bits(), b[i].to_bits());
                }
            }
        }
    }
}
