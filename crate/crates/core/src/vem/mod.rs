//! Batch collapsed variational EM.

pub mod elbo;
pub mod estep;
pub mod lbfgs;
pub mod mstep;
mod se;

pub use elbo::{elbo, grad_b, grad_beta, grad_gamma, hyper_gradient, ElboTerms, HyperGradient};
pub use estep::{e_step, update_dyads, update_kappa, update_phi, update_psi, update_states, EStepContext};
pub use mstep::{m_step, MStepOutcome, ParamLayout};
pub use se::{standard_errors, StandardErrors};

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GlobalStats, Hyperparams, MembershipPrior, ModelSpec, VariationalParams};
use crate::network::DynamicNetwork;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VemConfig {
    /// Stop once every hyperparameter moves less than this between iterations.
    pub tol_hyper: f64,
    pub max_iter: usize,
    /// Quasi-Newton iterations per M-step.
    pub inner_mstep_iters: usize,
    pub seed: u64,
    /// Latent draws averaged for the standard-error Hessian.
    pub se_samples: usize,
    pub compute_se: bool,
}

impl Default for VemConfig {
    fn default() -> Self {
        VemConfig {
            tol_hyper: 1e-4,
            max_iter: 200,
            inner_mstep_iters: 50,
            seed: 0,
            se_samples: 100,
            compute_se: false,
        }
    }
}

impl VemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_hyper > 0.0) {
            return Err(Error::InvalidConfig("tol_hyper must be > 0".into()));
        }
        if self.max_iter == 0 || self.inner_mstep_iters == 0 {
            return Err(Error::InvalidConfig("iteration caps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Vem,
    Svi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Hyperparameter change below tolerance.
    Tolerance,
    MaxIter,
    /// Held-out log-likelihood change below tolerance.
    HeldoutTolerance,
    /// No held-out improvement within the patience window.
    Patience,
}

/// Starting point for an inference run.
#[derive(Clone, Debug)]
pub struct Init {
    pub vparams: VariationalParams,
    pub hyper: Hyperparams,
}

/// Estimates plus derived summaries and convergence metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub engine: Engine,
    pub spec: ModelSpec,
    pub hyper: Hyperparams,
    pub vparams: VariationalParams,
    pub stats: GlobalStats,
    pub lower_bound: f64,
    /// M x M posterior-mean transition matrix.
    pub trans_hat: Vec<f64>,
    /// Posterior-mean membership per node-period slot (slots x K).
    pub pi_hat: Vec<f64>,
    pub se: Option<StandardErrors>,
    pub iters: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Per-iteration lower bound (VEM) or held-out log-likelihood (SVI).
    pub trace: Vec<f64>,
    pub node_ids: Vec<String>,
    pub period_labels: Vec<i64>,
    pub x_names: Vec<String>,
    pub d_names: Vec<String>,
}

impl FittedModel {
    pub fn pi_row(&self, slot: usize) -> &[f64] {
        &self.pi_hat[slot * self.spec.k..(slot + 1) * self.spec.k]
    }

    pub fn trans(&self, m: usize, n: usize) -> f64 {
        self.trans_hat[m * self.spec.m + n]
    }

    /// Most probable state per period (lowest index on ties).
    pub fn modal_states(&self) -> Vec<usize> {
        (0..self.vparams.n_periods())
            .map(|t| argmax(self.vparams.kappa_row(t)))
            .collect()
    }

    pub(crate) fn assemble(
        engine: Engine,
        net: &DynamicNetwork,
        spec: &ModelSpec,
        hyper: Hyperparams,
        vparams: VariationalParams,
        stats: GlobalStats,
        lower_bound: f64,
        progress: Progress,
    ) -> Result<FittedModel> {
        let pi_hat = posterior_memberships(net, &vparams, &stats, &hyper)?;
        let trans_hat = transition_estimate(&stats, spec);
        Ok(FittedModel {
            engine,
            spec: spec.clone(),
            hyper,
            vparams,
            stats,
            lower_bound,
            trans_hat,
            pi_hat,
            se: None,
            iters: progress.iters,
            converged: progress.converged,
            stop_reason: progress.stop_reason,
            trace: progress.trace,
            node_ids: net.node_ids().to_vec(),
            period_labels: net.period_labels().to_vec(),
            x_names: net.x_names().to_vec(),
            d_names: net.d_names().to_vec(),
        })
    }
}

pub(crate) struct Progress {
    pub iters: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub trace: Vec<f64>,
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `pi_hat[slot][k] = Sum_m kappa[t][m] (alpha_k + E C_k) / (xi + Sum_k E C_k)`.
pub fn posterior_memberships(
    net: &DynamicNetwork,
    vp: &VariationalParams,
    stats: &GlobalStats,
    hyper: &Hyperparams,
) -> Result<Vec<f64>> {
    let prior = MembershipPrior::new(net, hyper)?;
    let k = hyper.k;
    let mut out = vec![0.0; net.n_slots() * k];
    for slot in 0..net.n_slots() {
        let t = net.slot_period(slot);
        let c = stats.c_row(slot);
        let n: f64 = c.iter().sum();
        for (m, &w) in vp.kappa_row(t).iter().enumerate() {
            let alpha = prior.alpha(slot, m);
            let denom = prior.xi(slot, m) + n;
            for g in 0..k {
                out[slot * k + g] += w * (alpha[g] + c[g]) / denom;
            }
        }
    }
    Ok(out)
}

/// `A_hat[m][n] = (eta + E U_mn) / (M eta + E U_m.)`.
pub fn transition_estimate(stats: &GlobalStats, spec: &ModelSpec) -> Vec<f64> {
    let m = spec.m;
    let mut out = vec![0.0; m * m];
    for a in 0..m {
        let denom = m as f64 * spec.eta + stats.u_row(a);
        for b in 0..m {
            out[a * m + b] = (spec.eta + stats.u(a, b)) / denom;
        }
    }
    out
}

/// Per-iteration report passed to fit observers.
#[derive(Debug)]
pub struct IterationReport<'a> {
    pub iter: usize,
    /// Lower bound (VEM) or mean held-out log-likelihood (SVI).
    pub value: f64,
    pub hyper: &'a Hyperparams,
    pub stats: &'a GlobalStats,
}

pub fn fit_vem(net: &DynamicNetwork, spec: &ModelSpec, init: &Init, config: &VemConfig) -> Result<FittedModel> {
    fit_vem_observed(net, spec, init, config, |_| {})
}

/// [`fit_vem`] with a callback after every EM iteration.
pub fn fit_vem_observed(
    net: &DynamicNetwork,
    spec: &ModelSpec,
    init: &Init,
    config: &VemConfig,
    mut observer: impl FnMut(&IterationReport),
) -> Result<FittedModel> {
    config.validate()?;
    spec.check_network(net)?;
    init.vparams.check_shape(net)?;
    let mut vp = init.vparams.clone();
    let mut hyper = init.hyper.clone();
    hyper.validate(spec.directed)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    let mut stats = vp.expected_stats(net);
    let mut lower_bound = f64::NAN;

    for iter in 1..=config.max_iter {
        iters = iter;
        let ctx = EStepContext::new(net, spec, &hyper)?;
        stats = e_step(&ctx, &mut vp)?;
        let out = m_step(net, &vp, &stats, &hyper, spec, config.inner_mstep_iters)?;
        let delta = out.hyper.max_abs_diff(&hyper);
        hyper = out.hyper;
        lower_bound = elbo(net, &vp, &stats, &hyper, spec)?.value();
        trace.push(lower_bound);
        info!("vem iter {iter}: elbo {lower_bound:.6} max|dhyper| {delta:.3e}");
        observer(&IterationReport {
            iter,
            value: lower_bound,
            hyper: &hyper,
            stats: &stats,
        });
        if delta < config.tol_hyper {
            converged = true;
            break;
        }
    }

    let progress = Progress {
        iters,
        converged,
        stop_reason: if converged {
            StopReason::Tolerance
        } else {
            StopReason::MaxIter
        },
        trace,
    };
    let mut fitted = FittedModel::assemble(Engine::Vem, net, spec, hyper, vp, stats, lower_bound, progress)?;
    if config.compute_se {
        fitted.se = Some(standard_errors(&fitted, net, config)?);
    }
    Ok(fitted)
}
