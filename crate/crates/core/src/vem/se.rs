//! Standard errors from the curvature of the collapsed posterior, averaged
//! over latent configurations drawn from the variational distribution.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{compute_stats, Hyperparams, LatentState, VariationalParams};
use crate::network::DynamicNetwork;
use crate::vem::elbo::hyper_gradient;
use crate::vem::mstep::ParamLayout;
use crate::vem::{FittedModel, VemConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    /// Free parameters in packing order.
    pub names: Vec<String>,
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    pub n_samples: usize,
}

impl StandardErrors {
    /// Standard errors arranged like the hyperparameters (reference-group
    /// `beta` entries are zero).
    pub fn as_hyper(&self, k: usize, m: usize, jx: usize, jd: usize, directed: bool) -> Hyperparams {
        ParamLayout {
            k,
            m,
            jx,
            jd,
            directed,
        }
        .unpack(&self.se)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.se[i])
    }
}

fn draw(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn sample_latent(rng: &mut ChaCha8Rng, vp: &VariationalParams) -> LatentState {
    let n = vp.n_dyads();
    let mut z = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        z.push(draw(rng, vp.phi_row(i)));
        w.push(draw(rng, vp.psi_row(i)));
    }
    let s = (0..vp.n_periods()).map(|t| draw(rng, vp.kappa_row(t))).collect();
    LatentState { s, z, w }
}

pub fn standard_errors(fitted: &FittedModel, net: &DynamicNetwork, config: &VemConfig) -> Result<StandardErrors> {
    if config.se_samples == 0 {
        return Err(Error::InvalidConfig("se_samples must be >= 1".into()));
    }
    let spec = &fitted.spec;
    let layout = ParamLayout::new(spec, net);
    let x0 = layout.pack(&fitted.hyper);
    let p = x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut hess = DMatrix::<f64>::zeros(p, p);

    for _ in 0..config.se_samples {
        let latent = sample_latent(&mut rng, &fitted.vparams);
        let vp = VariationalParams::from_latent(&latent, spec.k, spec.m);
        let stats = compute_stats(&latent, net, spec.k, spec.m)?;
        let grad_at = |x: &[f64]| -> Result<Vec<f64>> {
            let h = layout.unpack(x);
            Ok(layout.pack_gradient(&hyper_gradient(net, &vp, &stats, &h, spec)?))
        };
        for j in 0..p {
            let step = 1e-5 * x0[j].abs().max(1.0);
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[j] += step;
            xm[j] -= step;
            let gp = grad_at(&xp)?;
            let gm = grad_at(&xm)?;
            for i in 0..p {
                hess[(i, j)] += (gp[i] - gm[i]) / (2.0 * step);
            }
        }
    }

    let n = config.se_samples as f64;
    let info = DMatrix::from_fn(p, p, |i, j| -(hess[(i, j)] + hess[(j, i)]) / (2.0 * n));
    if info.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observed information".into()));
    }
    let chol = info.cholesky().ok_or_else(|| {
        Error::NotPositiveDefinite("averaged negative Hessian of the collapsed posterior".into())
    })?;
    let mut se = Vec::with_capacity(p);
    for j in 0..p {
        let mut e = DVector::zeros(p);
        e[j] = 1.0;
        let col = chol.solve(&e);
        let v = col[j];
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NotPositiveDefinite(format!("non-positive variance for parameter {j}")));
        }
        se.push(v.sqrt());
    }
    Ok(StandardErrors {
        names: layout.names(),
        estimate: x0,
        se,
        n_samples: config.se_samples,
    })
}
