//! Variational lower bound and its hyperparameter gradients.

use rayon::prelude::*;
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::model::kernels::clamped_logistic;
use crate::model::{
    membership_factor, transition_term, GlobalStats, Hyperparams, MembershipPrior, ModelSpec,
    VariationalParams,
};
use crate::network::DynamicNetwork;
use crate::vem::estep::{EStepContext, CHUNK};

/// Additive pieces of the lower bound. `value()` includes the Normal log-prior
/// on the hyperparameters (the quantity the M-step maximizes); `bound()`
/// excludes it.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElboTerms {
    pub transition: f64,
    pub initial: f64,
    pub membership: f64,
    pub edge: f64,
    pub entropy: f64,
    pub log_prior: f64,
}

impl ElboTerms {
    pub fn value(&self) -> f64 {
        self.bound() + self.log_prior
    }

    pub fn bound(&self) -> f64 {
        self.transition + self.initial + self.membership + self.edge + self.entropy
    }
}

fn entropy(v: &[f64]) -> f64 {
    v.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Evaluates the lower bound at `(vp, stats, hyper)`. `stats` supplies the
/// expected counts `E C` and `E U`; log-Gamma expectations use the same
/// zeroth-order substitution as the local updates.
pub fn elbo(
    net: &DynamicNetwork,
    vp: &VariationalParams,
    stats: &GlobalStats,
    hyper: &Hyperparams,
    spec: &ModelSpec,
) -> Result<ElboTerms> {
    vp.check_shape(net)?;
    let ctx = EStepContext::new(net, spec, hyper)?;
    let transition = if net.n_periods() > 1 {
        transition_term(&stats.u, spec.m, spec.eta)
    } else {
        0.0
    };
    let (membership, _) = membership_part(&ctx, vp, stats, false);
    let (edge, _) = edge_part(&ctx, vp, &EdgeSelection::All, false);
    let terms = ElboTerms {
        transition,
        initial: -(spec.m as f64).ln(),
        membership,
        edge,
        entropy: entropy(&vp.phi) + entropy(&vp.psi) + entropy(&vp.kappa),
        log_prior: hyper.log_prior(spec),
    };
    for (name, v) in [
        ("transition term", terms.transition),
        ("membership term", terms.membership),
        ("edge term", terms.edge),
        ("entropy term", terms.entropy),
        ("log-prior term", terms.log_prior),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(name.into()));
        }
    }
    Ok(terms)
}

/// Which dyads enter the edge term, and with what per-period weight.
#[derive(Clone, Debug)]
pub(crate) enum EdgeSelection<'a> {
    All,
    Subset {
        dyads: &'a [usize],
        period_scale: &'a [f64],
    },
}

/// Gradient of the lower bound (with priors) in the hyperparameters. For
/// undirected networks `b[g][h]` and `b[h][g]` both hold the derivative with
/// respect to the single shared parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperGradient {
    pub b: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

struct EdgeAcc {
    value: f64,
    b: Vec<f64>,
    gamma: Vec<f64>,
}

fn edge_part(ctx: &EStepContext, vp: &VariationalParams, sel: &EdgeSelection, want_grad: bool) -> (f64, Option<EdgeAcc>) {
    let k = ctx.spec.k;
    let jd = ctx.net.jd();
    let all: Vec<usize>;
    let (idx, scale): (&[usize], Option<&[f64]>) = match sel {
        EdgeSelection::All => {
            all = (0..ctx.net.n_dyads()).collect();
            (&all, None)
        }
        EdgeSelection::Subset { dyads, period_scale } => (dyads, Some(period_scale)),
    };
    let partials: Vec<EdgeAcc> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = EdgeAcc {
                value: 0.0,
                b: vec![0.0; if want_grad { k * k } else { 0 }],
                gamma: vec![0.0; if want_grad { jd } else { 0 }],
            };
            for &i in chunk {
                let dy = &ctx.net.dyads()[i];
                let w_scale = scale.map_or(1.0, |s| s[dy.t]);
                let phi = vp.phi_row(i);
                let psi = vp.psi_row(i);
                let y = if dy.y { 1.0 } else { 0.0 };
                let mut resid_sum = 0.0;
                for g in 0..k {
                    if phi[g] == 0.0 {
                        continue;
                    }
                    for h in 0..k {
                        let w = phi[g] * psi[h] * w_scale;
                        if w == 0.0 {
                            continue;
                        }
                        let theta = clamped_logistic(ctx.hyper.b(g, h) + ctx.offsets[i]);
                        acc.value += w * if dy.y { theta.ln() } else { (1.0 - theta).ln() };
                        if want_grad {
                            let r = w * (y - theta);
                            acc.b[g * k + h] += r;
                            resid_sum += r;
                        }
                    }
                }
                if want_grad && jd > 0 {
                    for (a, &dv) in acc.gamma.iter_mut().zip(ctx.net.d_row(i)) {
                        *a += resid_sum * dv;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = EdgeAcc {
        value: 0.0,
        b: vec![0.0; k * k],
        gamma: vec![0.0; jd],
    };
    for p in partials {
        total.value += p.value;
        if want_grad {
            for (a, b) in total.b.iter_mut().zip(&p.b) {
                *a += b;
            }
            for (a, b) in total.gamma.iter_mut().zip(&p.gamma) {
                *a += b;
            }
        }
    }
    let value = total.value;
    (value, want_grad.then_some(total))
}

fn membership_part(ctx: &EStepContext, vp: &VariationalParams, stats: &GlobalStats, want_grad: bool) -> (f64, Option<Vec<f64>>) {
    let (k, m_states) = (ctx.spec.k, ctx.spec.m);
    let jx = ctx.net.jx();
    let prior: &MembershipPrior = &ctx.prior;
    let mut value = 0.0;
    let mut grad = if want_grad {
        vec![0.0; m_states * k * jx]
    } else {
        Vec::new()
    };
    for slot in 0..ctx.net.n_slots() {
        let t = ctx.net.slot_period(slot);
        let n = ctx.spec.norm_count(ctx.net, slot);
        let c = stats.c_row(slot);
        let x = ctx.net.x_row(slot);
        for (m, &w) in vp.kappa_row(t).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            value += w * membership_factor(prior, slot, m, c, n);
            if want_grad && k > 1 {
                let alpha = prior.alpha(slot, m);
                let xi = prior.xi(slot, m);
                let common = digamma(xi) - digamma(xi + n);
                for kk in 1..k {
                    let a = alpha[kk];
                    let coef = w * a * (digamma(a + c[kk]) - digamma(a) + common);
                    let base = (m * k + kk) * jx;
                    for (j, &xv) in x.iter().enumerate() {
                        grad[base + j] += coef * xv;
                    }
                }
            }
        }
    }
    (value, want_grad.then_some(grad))
}

/// Hyperparameter-dependent part of the bound (edge + membership + log-prior)
/// and optionally its gradient.
pub(crate) fn hyper_objective(
    net: &DynamicNetwork,
    vp: &VariationalParams,
    stats: &GlobalStats,
    hyper: &Hyperparams,
    spec: &ModelSpec,
    sel: &EdgeSelection,
    want_grad: bool,
) -> Result<(f64, Option<HyperGradient>)> {
    let ctx = EStepContext::new(net, spec, hyper)?;
    let (edge, edge_acc) = edge_part(&ctx, vp, sel, want_grad);
    let (memb, beta_grad) = membership_part(&ctx, vp, stats, want_grad);
    let value = edge + memb + hyper.log_prior(spec);
    let grad = match (edge_acc, beta_grad) {
        (Some(acc), Some(mut beta)) => {
            let k = spec.k;
            let mut b = acc.b;
            if !spec.directed {
                for g in 0..k {
                    for h in (g + 1)..k {
                        let s = b[g * k + h] + b[h * k + g];
                        b[g * k + h] = s;
                        b[h * k + g] = s;
                    }
                }
            }
            for g in 0..k {
                for h in 0..k {
                    b[g * k + h] += spec.prior_b.grad(hyper.b(g, h));
                }
            }
            for m in 0..spec.m {
                for kk in 0..k {
                    for j in 0..hyper.jx {
                        let i = hyper.beta_index(m, kk, j);
                        if kk == 0 {
                            beta[i] = 0.0;
                        } else {
                            beta[i] += spec.prior_beta.grad(hyper.beta[i]);
                        }
                    }
                }
            }
            let gamma = acc
                .gamma
                .iter()
                .zip(&hyper.gamma)
                .map(|(g, &v)| g + spec.prior_gamma.grad(v))
                .collect();
            Some(HyperGradient { b, beta, gamma })
        }
        _ => None,
    };
    if !value.is_finite() {
        return Err(Error::NonFinite("hyperparameter objective".into()));
    }
    Ok((value, grad))
}

/// Full gradient of [`elbo`]`.value()` with respect to `B`, `beta`, `gamma`.
pub fn hyper_gradient(
    net: &DynamicNetwork,
    vp: &VariationalParams,
    stats: &GlobalStats,
    hyper: &Hyperparams,
    spec: &ModelSpec,
) -> Result<HyperGradient> {
    let (_, g) = hyper_objective(net, vp, stats, hyper, spec, &EdgeSelection::All, true)?;
    Ok(g.expect("gradient requested"))
}

/// `dL/dB` (K x K, row-major).
pub fn grad_b(net: &DynamicNetwork, vp: &VariationalParams, stats: &GlobalStats, hyper: &Hyperparams, spec: &ModelSpec) -> Result<Vec<f64>> {
    Ok(hyper_gradient(net, vp, stats, hyper, spec)?.b)
}

/// `dL/dgamma`.
pub fn grad_gamma(net: &DynamicNetwork, vp: &VariationalParams, stats: &GlobalStats, hyper: &Hyperparams, spec: &ModelSpec) -> Result<Vec<f64>> {
    Ok(hyper_gradient(net, vp, stats, hyper, spec)?.gamma)
}

/// `dL/dbeta` (M x K x Jx); the reference-group slice is zero.
pub fn grad_beta(net: &DynamicNetwork, vp: &VariationalParams, stats: &GlobalStats, hyper: &Hyperparams, spec: &ModelSpec) -> Result<Vec<f64>> {
    Ok(hyper_gradient(net, vp, stats, hyper, spec)?.beta)
}

/// Edge term plus the `B`/`gamma` log-priors, with gradient and Hessian over
/// the free `B` cells followed by `gamma` (row-major `n x n`).
pub(crate) struct EdgeBlock {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

/// Position of each `B` cell in the packed `(B, gamma)` vector.
pub(crate) fn b_cell_index(k: usize, directed: bool) -> (Vec<usize>, usize) {
    let mut idx = vec![0; k * k];
    let mut n = 0;
    for g in 0..k {
        for h in 0..k {
            if directed || g <= h {
                idx[g * k + h] = n;
                n += 1;
            }
        }
    }
    if !directed {
        for g in 0..k {
            for h in 0..g {
                idx[g * k + h] = idx[h * k + g];
            }
        }
    }
    (idx, n)
}

pub(crate) fn edge_block(
    net: &DynamicNetwork,
    vp: &VariationalParams,
    hyper: &Hyperparams,
    spec: &ModelSpec,
    sel: &EdgeSelection,
) -> Result<EdgeBlock> {
    let ctx = EStepContext::new(net, spec, hyper)?;
    let k = spec.k;
    let jd = net.jd();
    let (cell, nb) = b_cell_index(k, spec.directed);
    let n = nb + jd;
    let all: Vec<usize>;
    let (idx, scale): (&[usize], Option<&[f64]>) = match sel {
        EdgeSelection::All => {
            all = (0..net.n_dyads()).collect();
            (&all, None)
        }
        EdgeSelection::Subset { dyads, period_scale } => (dyads, Some(period_scale)),
    };
    let partials: Vec<EdgeBlock> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = EdgeBlock {
                value: 0.0,
                grad: vec![0.0; n],
                hess: vec![0.0; n * n],
            };
            let mut cell_s = vec![0.0; nb];
            for &i in chunk {
                let dy = &net.dyads()[i];
                let w_scale = scale.map_or(1.0, |s| s[dy.t]);
                let phi = vp.phi_row(i);
                let psi = vp.psi_row(i);
                let y = if dy.y { 1.0 } else { 0.0 };
                let (mut r_sum, mut s_sum) = (0.0, 0.0);
                cell_s.iter_mut().for_each(|v| *v = 0.0);
                for g in 0..k {
                    if phi[g] == 0.0 {
                        continue;
                    }
                    for h in 0..k {
                        let w = phi[g] * psi[h] * w_scale;
                        if w == 0.0 {
                            continue;
                        }
                        let theta = clamped_logistic(hyper.b(g, h) + ctx.offsets[i]);
                        acc.value += w * if dy.y { theta.ln() } else { (1.0 - theta).ln() };
                        let c = cell[g * k + h];
                        let r = w * (y - theta);
                        let s = w * theta * (1.0 - theta);
                        acc.grad[c] += r;
                        acc.hess[c * n + c] -= s;
                        cell_s[c] += s;
                        r_sum += r;
                        s_sum += s;
                    }
                }
                if jd > 0 {
                    let d = net.d_row(i);
                    for a in 0..jd {
                        acc.grad[nb + a] += r_sum * d[a];
                        for (c, &s) in cell_s.iter().enumerate() {
                            acc.hess[c * n + nb + a] -= s * d[a];
                        }
                        for b in 0..jd {
                            acc.hess[(nb + a) * n + nb + b] -= s_sum * d[a] * d[b];
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = EdgeBlock {
        value: 0.0,
        grad: vec![0.0; n],
        hess: vec![0.0; n * n],
    };
    for p in partials {
        total.value += p.value;
        total.grad.iter_mut().zip(&p.grad).for_each(|(a, b)| *a += b);
        total.hess.iter_mut().zip(&p.hess).for_each(|(a, b)| *a += b);
    }
    for c in 0..nb {
        for a in 0..jd {
            total.hess[(nb + a) * n + c] = total.hess[c * n + nb + a];
        }
    }
    for g in 0..k {
        for h in 0..k {
            if spec.directed || g <= h {
                let c = cell[g * k + h];
                let b = hyper.b(g, h);
                total.value += spec.prior_b.log_kernel(b);
                total.grad[c] += spec.prior_b.grad(b);
                total.hess[c * n + c] -= 1.0 / (spec.prior_b.sd * spec.prior_b.sd);
            }
        }
    }
    for (a, &v) in hyper.gamma.iter().enumerate() {
        total.value += spec.prior_gamma.log_kernel(v);
        total.grad[nb + a] += spec.prior_gamma.grad(v);
        total.hess[(nb + a) * n + nb + a] -= 1.0 / (spec.prior_gamma.sd * spec.prior_gamma.sd);
    }
    if !total.value.is_finite() {
        return Err(Error::NonFinite("edge objective".into()));
    }
    Ok(total)
}

/// Membership term plus the `beta` log-prior, with its gradient (full
/// `M x K x Jx` layout, reference slice zero).
pub(crate) fn beta_block(
    net: &DynamicNetwork,
    vp: &VariationalParams,
    stats: &GlobalStats,
    hyper: &Hyperparams,
    spec: &ModelSpec,
) -> Result<(f64, Vec<f64>)> {
    let ctx = EStepContext::new(net, spec, hyper)?;
    let (memb, grad) = membership_part(&ctx, vp, stats, true);
    let mut grad = grad.expect("gradient requested");
    let mut value = memb;
    for m in 0..spec.m {
        for kk in 0..spec.k {
            for j in 0..hyper.jx {
                let i = hyper.beta_index(m, kk, j);
                if kk == 0 {
                    grad[i] = 0.0;
                } else {
                    value += spec.prior_beta.log_kernel(hyper.beta[i]);
                    grad[i] += spec.prior_beta.grad(hyper.beta[i]);
                }
            }
        }
    }
    if !value.is_finite() {
        return Err(Error::NonFinite("membership objective".into()));
    }
    Ok((value, grad))
}
