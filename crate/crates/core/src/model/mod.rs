//! Model dimensions, hyperparameters, latent configurations and the
//! sufficient statistics shared by every inference engine.

mod collapsed;
pub(crate) mod kernels;

pub use collapsed::{
    collapsed_terms, compute_stats, log_collapsed_posterior, membership_factor, transition_term,
    CollapsedTerms,
};
pub use kernels::{
    alpha, dyad_offsets, edge_prob, log_bernoulli, logistic, logit, MembershipPrior, PROB_CLAMP,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::DynamicNetwork;

/// Independent Normal prior on a scalar parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl Default for NormalPrior {
    fn default() -> Self {
        NormalPrior { mean: 0.0, sd: 1.0 }
    }
}

impl NormalPrior {
    pub fn new(mean: f64, sd: f64) -> Self {
        NormalPrior { mean, sd }
    }

    /// Log density up to the normalizing constant.
    pub fn log_kernel(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        -0.5 * z * z
    }

    pub fn grad(&self, x: f64) -> f64 {
        -(x - self.mean) / (self.sd * self.sd)
    }
}

/// Normalizer used in the Dirichlet-multinomial membership term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountNorm {
    /// Exact number of indicators the node-period instantiates.
    #[default]
    Exact,
    /// `2 * N_t`, the asymptotic count used in the original derivation.
    TwicePeriodSize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Number of latent groups.
    pub k: usize,
    /// Number of hidden Markov states.
    pub m: usize,
    /// Symmetric Dirichlet concentration on transition rows.
    pub eta: f64,
    pub prior_b: NormalPrior,
    pub prior_gamma: NormalPrior,
    pub prior_beta: NormalPrior,
    pub directed: bool,
    #[serde(default)]
    pub count_norm: CountNorm,
}

impl ModelSpec {
    pub fn new(k: usize, m: usize, directed: bool) -> Self {
        ModelSpec {
            k,
            m,
            eta: 1.0,
            prior_b: NormalPrior::default(),
            prior_gamma: NormalPrior::default(),
            prior_beta: NormalPrior::default(),
            directed,
            count_norm: CountNorm::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::InvalidSpec("K and M must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidSpec(format!("eta must be > 0, got {}", self.eta)));
        }
        for (name, p) in [
            ("B", self.prior_b),
            ("gamma", self.prior_gamma),
            ("beta", self.prior_beta),
        ] {
            if !(p.sd > 0.0) || !p.mean.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "prior on {name} needs finite mean and sd > 0"
                )));
            }
        }
        Ok(())
    }

    pub fn check_network(&self, net: &DynamicNetwork) -> Result<()> {
        self.validate()?;
        if self.directed != net.directed() {
            return Err(Error::InvalidSpec(format!(
                "spec directed={} but network directed={}",
                self.directed,
                net.directed()
            )));
        }
        if net.jx() == 0 {
            return Err(Error::InvalidSpec(
                "at least one monadic column (the intercept) is required".into(),
            ));
        }
        Ok(())
    }

    /// Count used in `lnGamma(xi + n)` for node-period `slot`.
    pub fn norm_count(&self, net: &DynamicNetwork, slot: usize) -> f64 {
        match self.count_norm {
            CountNorm::Exact => net.n_inter(slot) as f64,
            CountNorm::TwicePeriodSize => 2.0 * net.n_present(net.slot_period(slot)) as f64,
        }
    }
}

/// Blockmodel `B` (K x K), membership coefficients `beta` (M x K x Jx) and
/// dyadic coefficients `gamma` (Jd).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub k: usize,
    pub m: usize,
    pub jx: usize,
    pub jd: usize,
    /// Row-major `B[g][h]`.
    pub b: Vec<f64>,
    /// `beta[(m * K + k) * Jx + j]`; the `k = 0` slices stay at zero.
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Hyperparams {
    pub fn zeros(k: usize, m: usize, jx: usize, jd: usize) -> Self {
        Hyperparams {
            k,
            m,
            jx,
            jd,
            b: vec![0.0; k * k],
            beta: vec![0.0; m * k * jx],
            gamma: vec![0.0; jd],
        }
    }

    pub fn for_network(spec: &ModelSpec, net: &DynamicNetwork) -> Self {
        Self::zeros(spec.k, spec.m, net.jx(), net.jd())
    }

    #[inline]
    pub fn b(&self, g: usize, h: usize) -> f64 {
        self.b[g * self.k + h]
    }

    pub fn set_b(&mut self, g: usize, h: usize, v: f64) {
        self.b[g * self.k + h] = v;
    }

    #[inline]
    pub fn beta_index(&self, m: usize, k: usize, j: usize) -> usize {
        (m * self.k + k) * self.jx + j
    }

    pub fn beta(&self, m: usize, k: usize, j: usize) -> f64 {
        self.beta[self.beta_index(m, k, j)]
    }

    pub fn set_beta(&mut self, m: usize, k: usize, j: usize, v: f64) {
        let i = self.beta_index(m, k, j);
        self.beta[i] = v;
    }

    /// The K x Jx coefficient block of state `m`.
    pub fn beta_state(&self, m: usize) -> &[f64] {
        let n = self.k * self.jx;
        &self.beta[m * n..(m + 1) * n]
    }

    pub fn validate(&self, directed: bool) -> Result<()> {
        if self.b.len() != self.k * self.k
            || self.beta.len() != self.m * self.k * self.jx
            || self.gamma.len() != self.jd
        {
            return Err(Error::Dimension("hyperparameter arrays do not match (K, M, Jx, Jd)".into()));
        }
        for m in 0..self.m {
            for j in 0..self.jx {
                if self.beta(m, 0, j) != 0.0 {
                    return Err(Error::InvalidSpec(
                        "beta slice of the reference group must be zero".into(),
                    ));
                }
            }
        }
        if !directed {
            for g in 0..self.k {
                for h in 0..g {
                    if self.b(g, h) != self.b(h, g) {
                        return Err(Error::InvalidSpec(
                            "undirected blockmodel must be symmetric".into(),
                        ));
                    }
                }
            }
        }
        let all = self.b.iter().chain(&self.beta).chain(&self.gamma);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("hyperparameters".into()));
        }
        Ok(())
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Hyperparams) -> f64 {
        self.b
            .iter()
            .zip(&other.b)
            .chain(self.beta.iter().zip(&other.beta))
            .chain(self.gamma.iter().zip(&other.gamma))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Applies a group relabeling: new group `g` is old group `perm[g]`.
    pub fn permute_groups(&self, perm: &[usize]) -> Hyperparams {
        let mut out = self.clone();
        for g in 0..self.k {
            for h in 0..self.k {
                out.set_b(g, h, self.b(perm[g], perm[h]));
            }
        }
        for m in 0..self.m {
            for k in 0..self.k {
                for j in 0..self.jx {
                    out.set_beta(m, k, j, self.beta(m, perm[k], j));
                }
            }
        }
        out
    }

    /// Sum of Normal prior log-kernels over every free parameter.
    pub fn log_prior(&self, spec: &ModelSpec) -> f64 {
        let mut lp = 0.0;
        for g in 0..self.k {
            for h in 0..self.k {
                if spec.directed || g <= h {
                    lp += spec.prior_b.log_kernel(self.b(g, h));
                }
            }
        }
        for m in 0..self.m {
            for k in 1..self.k {
                for j in 0..self.jx {
                    lp += spec.prior_beta.log_kernel(self.beta(m, k, j));
                }
            }
        }
        lp + self
            .gamma
            .iter()
            .map(|&g| spec.prior_gamma.log_kernel(g))
            .sum::<f64>()
    }
}

/// A single configuration of the latent indicators (0-based labels).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentState {
    /// Hidden state per period.
    pub s: Vec<usize>,
    /// Sender group per dyad-period.
    pub z: Vec<usize>,
    /// Receiver group per dyad-period.
    pub w: Vec<usize>,
}

/// Group-instantiation counts `C` per node-period and transition counts `U`.
/// Holds exact integer counts or their expectations under a variational
/// distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalStats {
    pub k: usize,
    pub m: usize,
    /// `c[slot * K + k]`.
    pub c: Vec<f64>,
    /// `u[m * M + n]`, transitions from `m` to `n`.
    pub u: Vec<f64>,
}

impl GlobalStats {
    pub fn zeros(n_slots: usize, k: usize, m: usize) -> Self {
        GlobalStats {
            k,
            m,
            c: vec![0.0; n_slots * k],
            u: vec![0.0; m * m],
        }
    }

    #[inline]
    pub fn c_row(&self, slot: usize) -> &[f64] {
        &self.c[slot * self.k..(slot + 1) * self.k]
    }

    pub fn c_row_mut(&mut self, slot: usize) -> &mut [f64] {
        &mut self.c[slot * self.k..(slot + 1) * self.k]
    }

    #[inline]
    pub fn u(&self, m: usize, n: usize) -> f64 {
        self.u[m * self.m + n]
    }

    /// `U_m.`: transitions out of `m`.
    pub fn u_row(&self, m: usize) -> f64 {
        self.u[m * self.m..(m + 1) * self.m].iter().sum()
    }

    pub fn u_total(&self) -> f64 {
        self.u.iter().sum()
    }

    /// `Sum_k C[slot][k]`.
    pub fn c_total(&self, slot: usize) -> f64 {
        self.c_row(slot).iter().sum()
    }

    /// `E U_mn = Sum_t kappa[t][m] * kappa[t+1][n]`.
    pub fn transitions_from_kappa(kappa: &[f64], m: usize) -> Vec<f64> {
        let t_len = kappa.len() / m;
        let mut u = vec![0.0; m * m];
        for t in 1..t_len {
            let prev = &kappa[(t - 1) * m..t * m];
            let next = &kappa[t * m..(t + 1) * m];
            for a in 0..m {
                for b in 0..m {
                    u[a * m + b] += prev[a] * next[b];
                }
            }
        }
        u
    }
}

/// Mean-field parameters: sender `phi` and receiver `psi` per dyad-period
/// (K each) and state weights `kappa` per period (M each).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalParams {
    pub k: usize,
    pub m: usize,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl VariationalParams {
    pub fn uniform(net: &DynamicNetwork, k: usize, m: usize) -> Self {
        let n = net.n_dyads();
        VariationalParams {
            k,
            m,
            phi: vec![1.0 / k as f64; n * k],
            psi: vec![1.0 / k as f64; n * k],
            kappa: vec![1.0 / m as f64; net.n_periods() * m],
        }
    }

    /// Point mass on a latent configuration.
    pub fn from_latent(latent: &LatentState, k: usize, m: usize) -> Self {
        let one_hot = |labels: &[usize], width: usize| {
            let mut v = vec![0.0; labels.len() * width];
            for (i, &l) in labels.iter().enumerate() {
                v[i * width + l] = 1.0;
            }
            v
        };
        VariationalParams {
            k,
            m,
            phi: one_hot(&latent.z, k),
            psi: one_hot(&latent.w, k),
            kappa: one_hot(&latent.s, m),
        }
    }

    pub fn n_dyads(&self) -> usize {
        self.phi.len() / self.k
    }

    pub fn n_periods(&self) -> usize {
        self.kappa.len() / self.m
    }

    #[inline]
    pub fn phi_row(&self, i: usize) -> &[f64] {
        &self.phi[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn psi_row(&self, i: usize) -> &[f64] {
        &self.psi[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn kappa_row(&self, t: usize) -> &[f64] {
        &self.kappa[t * self.m..(t + 1) * self.m]
    }

    pub fn kappa_row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.kappa[t * self.m..(t + 1) * self.m]
    }

    pub fn check_shape(&self, net: &DynamicNetwork) -> Result<()> {
        if self.phi.len() != net.n_dyads() * self.k
            || self.psi.len() != net.n_dyads() * self.k
            || self.kappa.len() != net.n_periods() * self.m
        {
            return Err(Error::Dimension(
                "variational parameters do not match the network".into(),
            ));
        }
        Ok(())
    }

    /// Expected counts: `E C` by summing `phi`/`psi` into their node-periods
    /// and `E U` from consecutive `kappa` products.
    pub fn expected_stats(&self, net: &DynamicNetwork) -> GlobalStats {
        let k = self.k;
        let mut stats = GlobalStats::zeros(net.n_slots(), k, self.m);
        for (i, dy) in net.dyads().iter().enumerate() {
            let phi = self.phi_row(i);
            let psi = self.psi_row(i);
            for g in 0..k {
                stats.c[dy.p_slot * k + g] += phi[g];
                stats.c[dy.q_slot * k + g] += psi[g];
            }
        }
        stats.u = GlobalStats::transitions_from_kappa(&self.kappa, self.m);
        stats
    }

    /// Relabels groups: new group `g` is old group `perm[g]`.
    pub fn permute_groups(&self, perm: &[usize]) -> VariationalParams {
        let mut out = self.clone();
        let k = self.k;
        for i in 0..self.n_dyads() {
            for g in 0..k {
                out.phi[i * k + g] = self.phi[i * k + perm[g]];
                out.psi[i * k + g] = self.psi[i * k + perm[g]];
            }
        }
        out
    }
}

/// Normalizes log-weights in place into a probability vector.
pub(crate) fn softmax_in_place(v: &mut [f64]) -> Result<()> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Underflow(
            "all log-weights are -inf or non-finite".into(),
        ));
    }
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    if !(sum > 0.0) {
        return Err(Error::Underflow("unnormalized weights sum to zero".into()));
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    Ok(())
}
