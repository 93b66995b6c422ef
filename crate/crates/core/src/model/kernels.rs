use crate::error::{Error, Result};
use crate::model::Hyperparams;
use crate::network::DynamicNetwork;

/// Edge probabilities are kept inside `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-12;

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Membership weights `alpha_k = exp(x . beta_k)` for one state; returns
/// `xi = Sum_k alpha_k`. `beta_m` is the K x Jx block of that state.
pub fn alpha(x: &[f64], beta_m: &[f64], out: &mut [f64]) -> Result<f64> {
    let jx = x.len();
    if beta_m.len() != out.len() * jx {
        return Err(Error::Dimension(format!(
            "beta block has {} entries, expected {} x {jx}",
            beta_m.len(),
            out.len()
        )));
    }
    let mut xi = 0.0;
    for (k, a) in out.iter_mut().enumerate() {
        let row = &beta_m[k * jx..(k + 1) * jx];
        let eta: f64 = x.iter().zip(row).map(|(xv, b)| xv * b).sum();
        *a = eta.exp();
        if !a.is_finite() || *a == 0.0 {
            return Err(Error::AlphaOverflow {
                max_abs_x: x.iter().fold(0.0, |m, v| m.max(v.abs())),
                max_abs_beta: beta_m.iter().fold(0.0, |m, v| m.max(v.abs())),
            });
        }
        xi += *a;
    }
    Ok(xi)
}

/// `logistic(B_gh + d . gamma)` clamped away from 0 and 1.
pub fn edge_prob(b_gh: f64, d: &[f64], gamma: &[f64]) -> Result<f64> {
    if d.len() != gamma.len() {
        return Err(Error::Dimension(format!(
            "dyadic row has {} columns but gamma has {}",
            d.len(),
            gamma.len()
        )));
    }
    let lin = b_gh + d.iter().zip(gamma).map(|(a, b)| a * b).sum::<f64>();
    if !lin.is_finite() {
        return Err(Error::NonFinite("edge linear predictor".into()));
    }
    Ok(clamped_logistic(lin))
}

#[inline]
pub(crate) fn clamped_logistic(x: f64) -> f64 {
    logistic(x).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

#[inline]
pub fn log_bernoulli(y: bool, theta: f64) -> f64 {
    if y {
        theta.ln()
    } else {
        (1.0 - theta).ln()
    }
}

/// `d . gamma` for every dyad.
pub fn dyad_offsets(net: &DynamicNetwork, gamma: &[f64]) -> Vec<f64> {
    (0..net.n_dyads())
        .map(|i| net.d_row(i).iter().zip(gamma).map(|(a, b)| a * b).sum())
        .collect()
}

/// Cached `alpha`/`xi` for every node-period and state.
#[derive(Clone, Debug)]
pub struct MembershipPrior {
    pub k: usize,
    pub m: usize,
    alpha: Vec<f64>,
    xi: Vec<f64>,
}

impl MembershipPrior {
    pub fn new(net: &DynamicNetwork, hyper: &Hyperparams) -> Result<Self> {
        let (k, m) = (hyper.k, hyper.m);
        if net.jx() != hyper.jx {
            return Err(Error::Dimension(format!(
                "network has {} monadic columns, hyperparameters expect {}",
                net.jx(),
                hyper.jx
            )));
        }
        let n = net.n_slots();
        let mut alpha_v = vec![0.0; n * m * k];
        let mut xi = vec![0.0; n * m];
        for slot in 0..n {
            let x = net.x_row(slot);
            for s in 0..m {
                let base = (slot * m + s) * k;
                xi[slot * m + s] = alpha(x, hyper.beta_state(s), &mut alpha_v[base..base + k])?;
            }
        }
        Ok(MembershipPrior {
            k,
            m,
            alpha: alpha_v,
            xi,
        })
    }

    #[inline]
    pub fn alpha(&self, slot: usize, state: usize) -> &[f64] {
        let base = (slot * self.m + state) * self.k;
        &self.alpha[base..base + self.k]
    }

    #[inline]
    pub fn xi(&self, slot: usize, state: usize) -> f64 {
        self.xi[slot * self.m + state]
    }
}
