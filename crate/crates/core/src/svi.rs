//! Stochastic variational inference over node mini-batches.

use log::info;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::kernels::clamped_logistic;
use crate::model::{dyad_offsets, GlobalStats, Hyperparams, ModelSpec, VariationalParams};
use crate::network::DynamicNetwork;
use crate::vem::elbo::{hyper_objective, EdgeSelection};
use crate::vem::mstep::{optimize_hyper, ParamLayout};
use crate::vem::{
    elbo, posterior_memberships, update_dyads, update_states, EStepContext, Engine, FittedModel, Init,
    IterationReport, Progress, StopReason,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SviConfig {
    /// Nodes sampled per period per step.
    pub batch_nodes: usize,
    /// Step-size delay; `rho_s = (tau + s)^(-p_exp)`.
    pub tau: f64,
    pub p_exp: f64,
    /// Fixed step size overriding the decaying schedule.
    pub constant_rho: Option<f64>,
    pub holdout_frac: f64,
    /// Stop once the mean absolute change of the held-out score over the
    /// last `tol_window` steps falls below this.
    pub tol_holdout: f64,
    pub tol_window: usize,
    pub patience: usize,
    pub max_steps: usize,
    pub inner_mstep_iters: usize,
    pub seed: u64,
}

impl Default for SviConfig {
    fn default() -> Self {
        SviConfig {
            batch_nodes: 10,
            tau: 1.0,
            p_exp: 0.51,
            constant_rho: None,
            holdout_frac: 0.01,
            tol_holdout: 1e-3,
            tol_window: 20,
            patience: 20,
            max_steps: 500,
            inner_mstep_iters: 50,
            seed: 0,
        }
    }
}

impl SviConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_nodes == 0 {
            return Err(Error::InvalidConfig("batch_nodes must be >= 1".into()));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidConfig("tau must be >= 0".into()));
        }
        match self.constant_rho {
            Some(r) if !(r > 0.0 && r <= 1.0) => {
                return Err(Error::InvalidConfig("constant_rho must lie in (0, 1]".into()))
            }
            None if !(self.p_exp > 0.5 && self.p_exp <= 1.0) => {
                return Err(Error::InvalidConfig("p_exp must lie in (0.5, 1]".into()))
            }
            _ => {}
        }
        if !(self.holdout_frac >= 0.0 && self.holdout_frac < 0.5) {
            return Err(Error::InvalidConfig("holdout_frac must lie in [0, 0.5)".into()));
        }
        if !(self.tol_holdout > 0.0) {
            return Err(Error::InvalidConfig("tol_holdout must be > 0".into()));
        }
        if self.tol_window == 0 || self.max_steps == 0 || self.inner_mstep_iters == 0 {
            return Err(Error::InvalidConfig("tol_window and iteration caps must be >= 1".into()));
        }
        Ok(())
    }

    /// Step size for step `s` (1-based).
    pub fn rho(&self, s: usize) -> f64 {
        self.constant_rho
            .unwrap_or_else(|| step_size(s, self.tau, self.p_exp))
    }
}

/// `(tau + s)^(-p)`.
pub fn step_size(s: usize, tau: f64, p: f64) -> f64 {
    (tau + s as f64).powf(-p)
}

/// Probability that a fixed dyad in a period of `n` nodes touches at least
/// one of `b` nodes sampled uniformly without replacement.
pub fn dyad_inclusion_prob(n: usize, b: usize) -> f64 {
    if b >= n {
        return 1.0;
    }
    let (n, b) = (n as f64, b as f64);
    1.0 - (n - b) * (n - b - 1.0) / (n * (n - 1.0))
}

/// Training network plus the dyads withheld from it.
#[derive(Clone, Debug)]
pub struct HoldoutSplit {
    pub full: DynamicNetwork,
    pub train: DynamicNetwork,
    /// Indices into `full`'s dyads, ascending.
    pub heldout: Vec<usize>,
}

/// Withholds `round(frac * n_dyads)` dyads drawn uniformly at random.
pub fn split_holdout(net: &DynamicNetwork, frac: f64, seed: u64) -> Result<HoldoutSplit> {
    if !(frac >= 0.0 && frac < 0.5) {
        return Err(Error::InvalidConfig("holdout fraction must lie in [0, 0.5)".into()));
    }
    let n = net.n_dyads();
    let n_hold = (frac * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut heldout = sample(&mut rng, n, n_hold).into_vec();
    heldout.sort_unstable();
    let mut mask = vec![false; n];
    for &i in &heldout {
        mask[i] = true;
    }
    let train = net.filter_dyads(|i| !mask[i])?;
    Ok(HoldoutSplit {
        full: net.clone(),
        train,
        heldout,
    })
}

/// Mean log-likelihood of the listed dyads of `net` under membership-mixed
/// edge probabilities `Sum_gh pi_pg pi_qh theta_gh`.
pub fn heldout_loglik(net: &DynamicNetwork, dyads: &[usize], pi_hat: &[f64], hyper: &Hyperparams) -> f64 {
    if dyads.is_empty() {
        return f64::NAN;
    }
    let k = hyper.k;
    let offsets = dyad_offsets(net, &hyper.gamma);
    let mut total = 0.0;
    for &i in dyads {
        let dy = &net.dyads()[i];
        let pp = &pi_hat[dy.p_slot * k..(dy.p_slot + 1) * k];
        let pq = &pi_hat[dy.q_slot * k..(dy.q_slot + 1) * k];
        let mut prob = 0.0;
        for g in 0..k {
            for h in 0..k {
                prob += pp[g] * pq[h] * clamped_logistic(hyper.b(g, h) + offsets[i]);
            }
        }
        total += if dy.y { prob.ln() } else { (1.0 - prob).ln() };
    }
    total / dyads.len() as f64
}

/// Dyads touching the sampled nodes of every period.
#[derive(Clone, Debug)]
pub struct Minibatch {
    /// Ascending dyad indices.
    pub dyads: Vec<usize>,
    /// Per slot, whether the node was sampled.
    pub sampled: Vec<bool>,
    /// Minibatch dyads per period.
    pub per_period: Vec<usize>,
}

pub fn sample_minibatch(net: &DynamicNetwork, batch_nodes: usize, rng: &mut ChaCha8Rng) -> Result<Minibatch> {
    let min_present = (0..net.n_periods()).map(|t| net.n_present(t)).min().unwrap_or(0);
    if batch_nodes == 0 || batch_nodes > min_present {
        return Err(Error::InvalidConfig(format!(
            "batch_nodes = {batch_nodes} must lie in 1..={min_present} (smallest period size)"
        )));
    }
    let mut sampled = vec![false; net.n_slots()];
    let mut dyads = Vec::new();
    let mut per_period = vec![0; net.n_periods()];
    for t in 0..net.n_periods() {
        let slots = net.period_slots(t);
        for j in sample(rng, slots.len(), batch_nodes) {
            sampled[slots.start + j] = true;
        }
        for i in net.period_dyads(t) {
            let dy = &net.dyads()[i];
            if sampled[dy.p_slot] || sampled[dy.q_slot] {
                dyads.push(i);
                per_period[t] += 1;
            }
        }
    }
    if dyads.is_empty() {
        return Err(Error::EmptyMinibatch("no modeled dyad touches the sampled nodes".into()));
    }
    Ok(Minibatch {
        dyads,
        sampled,
        per_period,
    })
}

/// Intermediate count estimate: each node-period's minibatch contributions
/// rescaled to its full interaction count. Node-periods with no minibatch
/// dyad keep their current counts.
pub fn intermediate_counts(net: &DynamicNetwork, vp: &VariationalParams, batch: &Minibatch, current: &GlobalStats) -> GlobalStats {
    let k = vp.k;
    let mut est = GlobalStats::zeros(net.n_slots(), k, vp.m);
    let mut seen = vec![0usize; net.n_slots()];
    for &i in &batch.dyads {
        let dy = &net.dyads()[i];
        let phi = vp.phi_row(i);
        let psi = vp.psi_row(i);
        for g in 0..k {
            est.c[dy.p_slot * k + g] += phi[g];
            est.c[dy.q_slot * k + g] += psi[g];
        }
        seen[dy.p_slot] += 1;
        seen[dy.q_slot] += 1;
    }
    for (slot, &n_seen) in seen.iter().enumerate() {
        let row = est.c_row_mut(slot);
        if n_seen == 0 {
            row.copy_from_slice(current.c_row(slot));
        } else {
            let scale = net.n_inter(slot) as f64 / n_seen as f64;
            if scale != 1.0 {
                for v in row.iter_mut() {
                    *v *= scale;
                }
            }
        }
    }
    est.u = current.u.clone();
    est
}

/// Mutable SVI state.
#[derive(Clone, Debug)]
pub struct SviState {
    pub vparams: VariationalParams,
    pub stats: GlobalStats,
    pub hyper: Hyperparams,
    /// Steps taken so far.
    pub step: usize,
}

impl SviState {
    pub fn new(net: &DynamicNetwork, init: &Init) -> Result<Self> {
        init.vparams.check_shape(net)?;
        Ok(SviState {
            stats: init.vparams.expected_stats(net),
            vparams: init.vparams.clone(),
            hyper: init.hyper.clone(),
            step: 0,
        })
    }
}

fn blend(a: &mut [f64], b: &[f64], rho: f64) {
    for (x, y) in a.iter_mut().zip(b) {
        *x = (1.0 - rho) * *x + rho * y;
    }
}

fn blend_hyper(old: &Hyperparams, target: &Hyperparams, rho: f64, layout: &ParamLayout) -> Hyperparams {
    let mut v = layout.pack(old);
    blend(&mut v, &layout.pack(target), rho);
    layout.unpack(&v)
}

/// One stochastic step on `net` (the training network): local updates on
/// the minibatch against the current counts, count averaging, a state
/// sweep, and a hyperparameter move of size `rho` toward the maximizer of
/// the rescaled minibatch objective.
pub fn svi_step(
    net: &DynamicNetwork,
    spec: &ModelSpec,
    state: &mut SviState,
    batch: &Minibatch,
    config: &SviConfig,
) -> Result<()> {
    let s = state.step + 1;
    let rho = config.rho(s);
    {
        let ctx = EStepContext::new(net, spec, &state.hyper)?;
        update_dyads(&ctx, &mut state.vparams, &state.stats, Some(&batch.dyads))?;
        let est = intermediate_counts(net, &state.vparams, batch, &state.stats);
        blend(&mut state.stats.c, &est.c, rho);
        let u_old = state.stats.u.clone();
        update_states(&ctx, &mut state.vparams, &mut state.stats)?;
        let u_new = std::mem::replace(&mut state.stats.u, u_old);
        blend(&mut state.stats.u, &u_new, rho);
    }

    let scale: Vec<f64> = (0..net.n_periods())
        .map(|t| {
            if batch.per_period[t] == 0 {
                0.0
            } else {
                net.period_dyads(t).len() as f64 / batch.per_period[t] as f64
            }
        })
        .collect();
    let sel = EdgeSelection::Subset {
        dyads: &batch.dyads,
        period_scale: &scale,
    };
    let layout = ParamLayout::new(spec, net);
    let target = optimize_hyper(net, &state.vparams, &state.stats, &state.hyper, spec, &sel, config.inner_mstep_iters)?;
    let mut eff = rho;
    let mut next = blend_hyper(&state.hyper, &target.hyper, eff, &layout);
    let finite = |h: &Hyperparams| {
        hyper_objective(net, &state.vparams, &state.stats, h, spec, &sel, true)
            .map(|(v, g)| {
                v.is_finite()
                    && g.is_some_and(|g| g.b.iter().chain(&g.beta).chain(&g.gamma).all(|x| x.is_finite()))
            })
            .unwrap_or(false)
    };
    if !finite(&next) {
        eff *= 0.5;
        next = blend_hyper(&state.hyper, &target.hyper, eff, &layout);
        if !finite(&next) {
            return Err(Error::NonFinite(format!("hyperparameter gradient at SVI step {s}")));
        }
    }
    state.hyper = next;
    state.step = s;
    Ok(())
}

pub fn fit_svi(split: &HoldoutSplit, spec: &ModelSpec, init: &Init, config: &SviConfig) -> Result<FittedModel> {
    fit_svi_observed(split, spec, init, config, |_| {})
}

/// [`fit_svi`] with a callback after every step. The reported value is the
/// mean held-out log-likelihood, or the in-sample mean when nothing is held
/// out.
pub fn fit_svi_observed(
    split: &HoldoutSplit,
    spec: &ModelSpec,
    init: &Init,
    config: &SviConfig,
    mut observer: impl FnMut(&IterationReport),
) -> Result<FittedModel> {
    config.validate()?;
    let net = &split.train;
    spec.check_network(net)?;
    init.hyper.validate(spec.directed)?;
    let mut state = SviState::new(net, init)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let in_sample: Vec<usize>;
    let (score_net, score_dyads) = if split.heldout.is_empty() {
        in_sample = (0..net.n_dyads()).collect();
        (net, &in_sample[..])
    } else {
        (&split.full, &split.heldout[..])
    };

    let mut trace = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut since_best = 0;
    let mut stop_reason = StopReason::MaxIter;
    for s in 1..=config.max_steps {
        let batch = sample_minibatch(net, config.batch_nodes, &mut rng)?;
        svi_step(net, spec, &mut state, &batch, config)?;
        let pi_hat = posterior_memberships(net, &state.vparams, &state.stats, &state.hyper)?;
        let score = heldout_loglik(score_net, score_dyads, &pi_hat, &state.hyper);
        info!("svi step {s}: held-out ll {score:.6}");
        observer(&IterationReport {
            iter: s,
            value: score,
            hyper: &state.hyper,
            stats: &state.stats,
        });
        trace.push(score);
        if score > best {
            best = score;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if mean_abs_change(&trace, config.tol_window).is_some_and(|c| c < config.tol_holdout) {
            stop_reason = StopReason::HeldoutTolerance;
            break;
        }
        if since_best > config.patience {
            stop_reason = StopReason::Patience;
            break;
        }
    }

    let SviState {
        vparams,
        stats,
        hyper,
        step,
    } = state;
    let lower_bound = elbo(net, &vparams, &stats, &hyper, spec)?.value();
    let progress = Progress {
        iters: step,
        converged: stop_reason != StopReason::MaxIter,
        stop_reason,
        trace,
    };
    FittedModel::assemble(Engine::Svi, net, spec, hyper, vparams, stats, lower_bound, progress)
}

fn mean_abs_change(trace: &[f64], window: usize) -> Option<f64> {
    if trace.len() <= window {
        return None;
    }
    let tail = &trace[trace.len() - window - 1..];
    Some(tail.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / window as f64)
}
