use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::kernels::clamped_logistic;
use crate::model::{
    dyad_offsets, log_bernoulli, GlobalStats, Hyperparams, LatentState, MembershipPrior, ModelSpec,
};
use crate::network::DynamicNetwork;

/// Exact sufficient statistics of a latent configuration.
pub fn compute_stats(latent: &LatentState, net: &DynamicNetwork, k: usize, m: usize) -> Result<GlobalStats> {
    if latent.z.len() != net.n_dyads() || latent.w.len() != net.n_dyads() {
        return Err(Error::Structural(format!(
            "latent state covers {} / {} dyads, network has {}",
            latent.z.len(),
            latent.w.len(),
            net.n_dyads()
        )));
    }
    if latent.s.len() != net.n_periods() {
        return Err(Error::Structural(format!(
            "latent state has {} periods, network has {}",
            latent.s.len(),
            net.n_periods()
        )));
    }
    if latent.z.iter().chain(&latent.w).any(|&g| g >= k) || latent.s.iter().any(|&s| s >= m) {
        return Err(Error::Structural("latent label out of range".into()));
    }
    let mut stats = GlobalStats::zeros(net.n_slots(), k, m);
    for (i, dy) in net.dyads().iter().enumerate() {
        stats.c[dy.p_slot * k + latent.z[i]] += 1.0;
        stats.c[dy.q_slot * k + latent.w[i]] += 1.0;
    }
    for t in 1..latent.s.len() {
        stats.u[latent.s[t - 1] * m + latent.s[t]] += 1.0;
    }
    Ok(stats)
}

/// Gamma-ratio term from integrating the transition matrix rows against
/// (possibly expected) transition counts `u` (M x M).
pub fn transition_term(u: &[f64], m: usize, eta: f64) -> f64 {
    let m_eta = m as f64 * eta;
    let lg_eta = ln_gamma(eta);
    let mut total = 0.0;
    for a in 0..m {
        let row = &u[a * m..(a + 1) * m];
        let row_sum: f64 = row.iter().sum();
        total += ln_gamma(m_eta) - ln_gamma(m_eta + row_sum);
        for &count in row {
            total += ln_gamma(eta + count) - lg_eta;
        }
    }
    total
}

/// Dirichlet-multinomial factor of one node-period under state `state`:
/// `lnG(xi) - lnG(xi + n) + Sum_k [lnG(alpha_k + C_k) - lnG(alpha_k)]`.
pub fn membership_factor(prior: &MembershipPrior, slot: usize, state: usize, c: &[f64], n: f64) -> f64 {
    let alpha = prior.alpha(slot, state);
    let xi = prior.xi(slot, state);
    let mut v = ln_gamma(xi) - ln_gamma(xi + n);
    for (a, &ck) in alpha.iter().zip(c) {
        v += ln_gamma(a + ck) - ln_gamma(*a);
    }
    v
}

/// Additive pieces of the log collapsed joint.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CollapsedTerms {
    pub transition: f64,
    pub initial: f64,
    pub membership: f64,
    pub edge: f64,
}

impl CollapsedTerms {
    pub fn total(&self) -> f64 {
        self.transition + self.initial + self.membership + self.edge
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("transition term", self.transition),
            ("initial-state term", self.initial),
            ("membership term", self.membership),
            ("edge term", self.edge),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name.into()));
            }
        }
        Ok(())
    }
}

pub fn collapsed_terms(
    net: &DynamicNetwork,
    latent: &LatentState,
    hyper: &Hyperparams,
    spec: &ModelSpec,
) -> Result<CollapsedTerms> {
    spec.check_network(net)?;
    let (k, m) = (spec.k, spec.m);
    let stats = compute_stats(latent, net, k, m)?;
    let prior = MembershipPrior::new(net, hyper)?;
    let offsets = dyad_offsets(net, &hyper.gamma);

    let transition = if net.n_periods() > 1 {
        transition_term(&stats.u, m, spec.eta)
    } else {
        0.0
    };
    let initial = -(m as f64).ln();

    let mut membership = 0.0;
    for slot in 0..net.n_slots() {
        let state = latent.s[net.slot_period(slot)];
        membership += membership_factor(&prior, slot, state, stats.c_row(slot), spec.norm_count(net, slot));
    }

    let mut edge = 0.0;
    for (i, dy) in net.dyads().iter().enumerate() {
        let theta = clamped_logistic(hyper.b(latent.z[i], latent.w[i]) + offsets[i]);
        edge += log_bernoulli(dy.y, theta);
    }

    let terms = CollapsedTerms {
        transition,
        initial,
        membership,
        edge,
    };
    terms.check()?;
    Ok(terms)
}

/// Log of the unnormalized collapsed joint `P(Y, Z, W, S | B, beta, gamma, X, D)`
/// with the membership vectors and transition matrix integrated out. The
/// Normal priors on the hyperparameters are not included.
pub fn log_collapsed_posterior(
    net: &DynamicNetwork,
    latent: &LatentState,
    hyper: &Hyperparams,
    spec: &ModelSpec,
) -> Result<f64> {
    Ok(collapsed_terms(net, latent, hyper, spec)?.total())
}
