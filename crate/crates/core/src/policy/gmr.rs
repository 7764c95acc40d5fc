//! Gaussian mixture regression.

use nalgebra::{DMatrix, DVector};

use super::gmm::{log_sum_exp, GaussianMixture, GaussianTerm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Component responsibilities for the query input.
    pub responsibilities: Vec<f64>,
}

/// Conditions the mixture on its input block.
pub fn gmr_condition(gmm: &GaussianMixture, input: &DVector<f64>) -> Result<Conditional> {
    let di = gmm.input_dim;
    let dout = gmm.output_dim;
    if input.len() != di {
        return Err(Error::DimensionMismatch {
            expected: di,
            got: input.len(),
        });
    }
    if !input.iter().all(|v| v.is_finite()) {
        return Err(Error::NumericalUnderflow("non-finite regression input"));
    }

    let k = gmm.n_components();
    let mut log_h = Vec::with_capacity(k);
    let mut cond_means = Vec::with_capacity(k);
    let mut cond_covs = Vec::with_capacity(k);
    for c in 0..k {
        let mu = &gmm.means[c];
        let sigma = &gmm.covariances[c];
        let mu_i = mu.rows(0, di).into_owned();
        let mu_o = mu.rows(di, dout);
        let s_ii = sigma.view((0, 0), (di, di)).into_owned();
        let s_oi = sigma.view((di, 0), (dout, di));
        let s_oo = sigma.view((di, di), (dout, dout));

        let term = GaussianTerm::new(&mu_i, &s_ii)?;
        log_h.push(gmm.weights[c].ln() + term.log_pdf(input));

        let chol = s_ii
            .cholesky()
            .ok_or(Error::NumericalUnderflow("input covariance block not positive definite"))?;
        let gain = chol.solve(&s_oi.transpose()).transpose();
        cond_means.push(mu_o + &gain * (input - &mu_i));
        cond_covs.push(s_oo - &gain * s_oi.transpose());
    }

    let lse = log_sum_exp(&log_h);
    if !lse.is_finite() {
        return Err(Error::NumericalUnderflow("all responsibilities vanished"));
    }
    let h: Vec<f64> = log_h.iter().map(|v| (v - lse).exp()).collect();

    let mut mean = DVector::zeros(dout);
    for (w, m) in h.iter().zip(&cond_means) {
        mean += m * *w;
    }
    let mut covariance = DMatrix::zeros(dout, dout);
    for ((w, m), c) in h.iter().zip(&cond_means).zip(&cond_covs) {
        covariance += (c + m * m.transpose()) * *w;
    }
    covariance -= &mean * mean.transpose();

    Ok(Conditional {
        mean,
        covariance,
        responsibilities: h,
    })
}
