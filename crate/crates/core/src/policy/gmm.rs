//! Gaussian mixture fitting: seeded k-means initialization, EM refinement
//! and BIC model selection.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Mixture `p(x) = sum_k pi_k N(x | mu_k, Sigma_k)` whose first
/// `input_dim` coordinates are regression inputs and the rest outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl GaussianMixture {
    /// Validates shapes, weights and positive definiteness.
    pub fn new(
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
        input_dim: usize,
        output_dim: usize,
    ) -> Result<Self> {
        let k = weights.len();
        let dim = input_dim + output_dim;
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(Error::InvalidArgument(format!(
                "mixture needs matching non-empty component lists (weights {k}, means {}, covariances {})",
                means.len(),
                covariances.len()
            )));
        }
        if input_dim == 0 {
            return Err(Error::InvalidArgument("input_dim must be at least 1".into()));
        }
        for (m, c) in means.iter().zip(&covariances) {
            if m.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.len(),
                });
            }
            if c.nrows() != dim || c.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.nrows(),
                });
            }
            if (c - c.transpose()).abs().max() > 1e-12 * c.abs().max().max(1.0) {
                return Err(Error::InvalidArgument("covariance is not symmetric".into()));
            }
            if c.clone().cholesky().is_none() {
                return Err(Error::InvalidArgument(
                    "covariance is not positive definite".into(),
                ));
            }
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "weights must be positive and sum to one (sum {total})"
            )));
        }
        Ok(Self {
            weights,
            means,
            covariances,
            input_dim,
            output_dim,
        })
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.input_dim + self.output_dim
    }

    /// Free parameters with full covariances.
    pub fn n_parameters(&self) -> usize {
        bic_parameter_count(self.n_components(), self.dim())
    }

    /// Log density of one sample.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.n_components());
        for k in 0..self.n_components() {
            let g = GaussianTerm::new(&self.means[k], &self.covariances[k])?;
            terms.push(self.weights[k].ln() + g.log_pdf(x));
        }
        Ok(log_sum_exp(&terms))
    }

    /// Total log-likelihood of a data set.
    pub fn log_likelihood(&self, data: &[DVector<f64>]) -> Result<f64> {
        data.iter().map(|x| self.log_density(x)).sum()
    }
}

/// `K - 1 + K d + K d (d + 1) / 2`.
pub fn bic_parameter_count(k: usize, d: usize) -> usize {
    k - 1 + k * d + k * d * (d + 1) / 2
}

/// Cached Cholesky factor of one Gaussian.
pub(crate) struct GaussianTerm<'a> {
    mean: &'a DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    log_norm: f64,
}

impl<'a> GaussianTerm<'a> {
    pub(crate) fn new(mean: &'a DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let chol = cov
            .clone()
            .cholesky()
            .ok_or(Error::NumericalUnderflow("covariance lost positive definiteness"))?;
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let log_norm = -0.5 * (mean.len() as f64 * LN_2PI + log_det);
        Ok(Self {
            mean,
            chol,
            log_norm,
        })
    }

    pub(crate) fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let diff = x - self.mean;
        let z = self.chol.l().solve_lower_triangular(&diff).expect("triangular solve");
        self.log_norm - 0.5 * z.norm_squared()
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once the per-sample log-likelihood gains less than this.
    pub tolerance: f64,
    pub kmeans_restarts: usize,
    /// Diagonal regularization, relative to the mean per-dimension variance.
    pub regularization: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-7,
            kmeans_restarts: 10,
            regularization: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub mixture: GaussianMixture,
    /// Log-likelihood after each E-step.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub reseeded: bool,
}

impl FitReport {
    pub fn log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().expect("at least one E-step")
    }
}

/// Fits a `k`-component mixture. Deterministic for a given seed.
pub fn fit_gmm(
    data: &[DVector<f64>],
    k: usize,
    input_dim: usize,
    seed: u64,
) -> Result<GaussianMixture> {
    Ok(fit_gmm_with(data, k, input_dim, seed, &FitOptions::default())?.mixture)
}

pub fn fit_gmm_with(
    data: &[DVector<f64>],
    k: usize,
    input_dim: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<FitReport> {
    check_data(data, k)?;
    let dim = data[0].len();
    if input_dim == 0 || input_dim >= dim {
        return Err(Error::InvalidArgument(format!(
            "input_dim {input_dim} must be in 1..{dim}"
        )));
    }
    match fit_once(data, k, input_dim, seed, opts) {
        Err(Error::DegenerateComponent { .. }) => {
            let mut report = fit_once(data, k, input_dim, reseed(seed), opts)?;
            report.reseeded = true;
            Ok(report)
        }
        other => other,
    }
}

fn reseed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1)
}

fn check_data(data: &[DVector<f64>], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("number of components must be positive".into()));
    }
    if data.len() < 10 * k {
        return Err(Error::InsufficientData {
            got: data.len(),
            need: 10 * k,
        });
    }
    let dim = data[0].len();
    for x in data {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
    }
    Ok(())
}

fn variance_scale(data: &[DVector<f64>]) -> f64 {
    let n = data.len() as f64;
    let dim = data[0].len();
    let mean = data.iter().fold(DVector::zeros(dim), |acc, x| acc + x) / n;
    let var: f64 = data.iter().map(|x| (x - &mean).norm_squared()).sum::<f64>() / n;
    let scale = var / dim as f64;
    if scale > 0.0 {
        scale
    } else {
        1.0
    }
}

fn fit_once(
    data: &[DVector<f64>],
    k: usize,
    input_dim: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<FitReport> {
    let n = data.len();
    let dim = data[0].len();
    let reg = opts.regularization * variance_scale(data);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = kmeans(data, k, opts.kmeans_restarts.max(1), &mut rng);

    let mut resp = DMatrix::<f64>::zeros(n, k);
    for (i, &c) in labels.iter().enumerate() {
        resp[(i, c)] = 1.0;
    }
    let (mut weights, mut means, mut covs) = m_step(data, &resp, reg)?;

    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let ll = e_step(data, &weights, &means, &covs, &mut resp)?;
        let converged = trace
            .last()
            .is_some_and(|prev: &f64| (ll - prev) / (n as f64) < opts.tolerance);
        trace.push(ll);
        if converged || iterations >= opts.max_iterations {
            break;
        }
        (weights, means, covs) = m_step(data, &resp, reg)?;
        iterations += 1;
    }
    let mixture = GaussianMixture {
        weights,
        means,
        covariances: covs,
        input_dim,
        output_dim: dim - input_dim,
    };
    Ok(FitReport {
        mixture,
        log_likelihood_trace: trace,
        iterations,
        reseeded: false,
    })
}

type Params = (Vec<f64>, Vec<DVector<f64>>, Vec<DMatrix<f64>>);

fn m_step(data: &[DVector<f64>], resp: &DMatrix<f64>, reg: f64) -> Result<Params> {
    let n = data.len();
    let dim = data[0].len();
    let k = resp.ncols();
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for c in 0..k {
        let mass: f64 = resp.column(c).sum();
        if mass < 1e-6 {
            return Err(Error::DegenerateComponent {
                component: c,
                mass,
            });
        }
        let mean = data
            .iter()
            .enumerate()
            .fold(DVector::zeros(dim), |acc, (i, x)| acc + x * resp[(i, c)])
            / mass;
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for (i, x) in data.iter().enumerate() {
            let d = x - &mean;
            cov.ger(resp[(i, c)], &d, &d, 1.0);
        }
        cov /= mass;
        cov = (&cov + cov.transpose()) * 0.5;
        for j in 0..dim {
            cov[(j, j)] += reg;
        }
        weights.push(mass / n as f64);
        means.push(mean);
        covs.push(cov);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok((weights, means, covs))
}

/// Fills responsibilities and returns the data log-likelihood.
fn e_step(
    data: &[DVector<f64>],
    weights: &[f64],
    means: &[DVector<f64>],
    covs: &[DMatrix<f64>],
    resp: &mut DMatrix<f64>,
) -> Result<f64> {
    let terms: Vec<GaussianTerm> = means
        .iter()
        .zip(covs)
        .map(|(m, c)| GaussianTerm::new(m, c))
        .collect::<Result<_>>()?;
    let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mut ll = 0.0;
    let mut row = vec![0.0; weights.len()];
    for (i, x) in data.iter().enumerate() {
        for (c, g) in terms.iter().enumerate() {
            row[c] = log_w[c] + g.log_pdf(x);
        }
        let lse = log_sum_exp(&row);
        ll += lse;
        for (c, v) in row.iter().enumerate() {
            resp[(i, c)] = (v - lse).exp();
        }
    }
    Ok(ll)
}

/// Seeded k-means with k-means++ seeding; returns the labels of the restart
/// with the lowest inertia.
pub fn kmeans(data: &[DVector<f64>], k: usize, restarts: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts {
        let (inertia, labels) = kmeans_once(data, k, rng);
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, labels));
        }
    }
    best.expect("at least one restart").1
}

fn kmeans_once(data: &[DVector<f64>], k: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<usize>) {
    let n = data.len();
    let mut centers: Vec<DVector<f64>> = vec![data[rng.gen_range(0..n)].clone()];
    let mut nearest: Vec<f64> = data.iter().map(|x| (x - &centers[0]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centers.push(data[idx].clone());
        for (d, x) in nearest.iter_mut().zip(data) {
            *d = d.min((x - &centers[centers.len() - 1]).norm_squared());
        }
    }

    let mut labels = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, x) in data.iter().enumerate() {
            let c = closest(&centers, x).0;
            if c != labels[i] {
                labels[i] = c;
                changed = true;
            }
        }
        let dim = data[0].len();
        let mut sums = vec![DVector::<f64>::zeros(dim); k];
        let mut counts = vec![0usize; k];
        for (x, &c) in data.iter().zip(&labels) {
            sums[c] += x;
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the worst-fit point.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = (&data[a] - &centers[labels[a]]).norm_squared();
                        let db = (&data[b] - &centers[labels[b]]).norm_squared();
                        da.total_cmp(&db)
                    })
                    .expect("non-empty data");
                centers[c] = data[far].clone();
                labels[far] = c;
                changed = true;
            } else {
                centers[c] = &sums[c] / counts[c] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = data
        .iter()
        .zip(&labels)
        .map(|(x, &c)| (x - &centers[c]).norm_squared())
        .sum();
    (inertia, labels)
}

fn closest(centers: &[DVector<f64>], x: &DVector<f64>) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| (i, (x - c).norm_squared()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one center")
}

/// `-2 ln L + p ln N`.
pub fn bic(mixture: &GaussianMixture, log_likelihood: f64, n_samples: usize) -> f64 {
    -2.0 * log_likelihood + mixture.n_parameters() as f64 * (n_samples as f64).ln()
}

/// Component count with the lowest BIC; ties go to the smaller count.
pub fn select_k_bic(
    data: &[DVector<f64>],
    k_range: &[usize],
    input_dim: usize,
    seed: u64,
) -> Result<usize> {
    let mut ks: Vec<usize> = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::InvalidArgument("empty component range".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for k in ks {
        let report = fit_gmm_with(data, k, input_dim, seed, &FitOptions::default())?;
        let score = bic(&report.mixture, report.log_likelihood(), data.len());
        if best.is_none_or(|(_, b)| score < b) {
            best = Some((k, score));
        }
    }
    Ok(best.expect("non-empty range").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn blob(rng: &mut ChaCha8Rng, center: &[f64], sigma: f64, n: usize) -> Vec<DVector<f64>> {
        (0..n)
            .map(|_| {
                DVector::from_iterator(
                    center.len(),
                    center.iter().map(|c| {
                        let z: f64 = StandardNormal.sample(rng);
                        c + sigma * z
                    }),
                )
            })
            .collect()
    }

    #[test]
    fn parameter_count() {
        assert_eq!(bic_parameter_count(1, 3), 3 + 6);
        assert_eq!(bic_parameter_count(3, 2), 2 + 6 + 9);
    }

    #[test]
    fn too_little_data() {
        let data = vec![DVector::from_vec(vec![0.0, 1.0]); 19];
        assert!(matches!(
            fit_gmm(&data, 2, 1, 0),
            Err(Error::InsufficientData { got: 19, need: 20 })
        ));
    }

    #[test]
    fn em_is_monotone_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut data = blob(&mut rng, &[0.0, 0.0], 1.0, 150);
        data.extend(blob(&mut rng, &[3.0, 1.0], 0.7, 150));
        let a = fit_gmm_with(&data, 3, 1, 11, &FitOptions::default()).unwrap();
        let n = data.len() as f64;
        for w in a.log_likelihood_trace.windows(2) {
            assert!(w[1] / n >= w[0] / n - 1e-10, "{:?}", w);
        }
        let b = fit_gmm_with(&data, 3, 1, 11, &FitOptions::default()).unwrap();
        assert_eq!(a.mixture, b.mixture);
    }

    #[test]
    fn duplicate_range_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut data = blob(&mut rng, &[0.0, 0.0], 1.0, 100);
        data.extend(blob(&mut rng, &[10.0, 10.0], 1.0, 100));
        let a = select_k_bic(&data, &[1, 2, 2, 3, 1], 1, 4).unwrap();
        let b = select_k_bic(&data, &[1, 2, 3], 1, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, 2);
    }

    #[test]
    fn rejects_bad_mixture() {
        let m = vec![DVector::zeros(2)];
        let c = vec![DMatrix::identity(2, 2)];
        assert!(GaussianMixture::new(vec![0.5], m.clone(), c.clone(), 1, 1).is_err());
        assert!(GaussianMixture::new(vec![1.0], m.clone(), vec![-DMatrix::identity(2, 2)], 1, 1).is_err());
        assert!(GaussianMixture::new(vec![1.0], m, c, 1, 1).is_ok());
    }
}
