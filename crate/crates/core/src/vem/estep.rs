//! Closed-form local updates under the zeroth-order Taylor approximation
//! `E[log(a + X)] ~ log(a + E[X])`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::kernels::clamped_logistic;
use crate::model::{
    dyad_offsets, log_bernoulli, membership_factor, softmax_in_place, GlobalStats, Hyperparams,
    MembershipPrior, ModelSpec, VariationalParams,
};
use crate::network::DynamicNetwork;

/// Dyads per parallel work unit. Fixed so reductions do not depend on the
/// thread count.
pub(crate) const CHUNK: usize = 2048;

/// Hyperparameter-derived quantities shared by the local updates.
pub struct EStepContext<'a> {
    pub net: &'a DynamicNetwork,
    pub spec: &'a ModelSpec,
    pub hyper: &'a Hyperparams,
    pub(crate) prior: MembershipPrior,
    pub(crate) offsets: Vec<f64>,
}

impl<'a> EStepContext<'a> {
    pub fn new(net: &'a DynamicNetwork, spec: &'a ModelSpec, hyper: &'a Hyperparams) -> Result<Self> {
        spec.check_network(net)?;
        hyper.validate(spec.directed)?;
        if hyper.k != spec.k || hyper.m != spec.m || hyper.jd != net.jd() {
            return Err(Error::Dimension(
                "hyperparameters do not match the spec/network".into(),
            ));
        }
        Ok(EStepContext {
            net,
            spec,
            hyper,
            prior: MembershipPrior::new(net, hyper)?,
            offsets: dyad_offsets(net, &hyper.gamma),
        })
    }

    pub fn prior(&self) -> &MembershipPrior {
        &self.prior
    }

    /// `y log(theta_gh) + (1 - y) log(1 - theta_gh)` for dyad `i`.
    #[inline]
    pub(crate) fn edge_loglik(&self, i: usize, g: usize, h: usize) -> f64 {
        let dy = &self.net.dyads()[i];
        log_bernoulli(dy.y, clamped_logistic(self.hyper.b(g, h) + self.offsets[i]))
    }

    fn edge_table(&self, i: usize, out: &mut [f64]) {
        let k = self.spec.k;
        for g in 0..k {
            for h in 0..k {
                out[g * k + h] = self.edge_loglik(i, g, h);
            }
        }
    }
}

fn membership_log_weight(ctx: &EStepContext, slot: usize, kappa_t: &[f64], c_prime: &[f64], out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        let mut v = 0.0;
        for (m, &w) in kappa_t.iter().enumerate() {
            if w != 0.0 {
                v += w * (ctx.prior.alpha(slot, m)[k] + c_prime[k]).ln();
            }
        }
        *o = v;
    }
}

/// Sender update for dyad `i`. `c_prime` is the sender's expected count
/// vector with this dyad's own contribution removed.
pub fn update_phi(
    ctx: &EStepContext,
    i: usize,
    psi: &[f64],
    kappa_t: &[f64],
    c_prime: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let k = ctx.spec.k;
    let dy = &ctx.net.dyads()[i];
    membership_log_weight(ctx, dy.p_slot, kappa_t, c_prime, out);
    for (g, o) in out.iter_mut().enumerate().take(k) {
        for (h, &w) in psi.iter().enumerate() {
            if w != 0.0 {
                *o += w * ctx.edge_loglik(i, g, h);
            }
        }
    }
    softmax_in_place(out)
}

/// Receiver update for dyad `i`, the mirror of [`update_phi`] with the
/// blockmodel column indexed by the receiver's group.
pub fn update_psi(
    ctx: &EStepContext,
    i: usize,
    phi: &[f64],
    kappa_t: &[f64],
    c_prime: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let k = ctx.spec.k;
    let dy = &ctx.net.dyads()[i];
    membership_log_weight(ctx, dy.q_slot, kappa_t, c_prime, out);
    for (h, o) in out.iter_mut().enumerate().take(k) {
        for (g, &w) in phi.iter().enumerate() {
            if w != 0.0 {
                *o += w * ctx.edge_loglik(i, g, h);
            }
        }
    }
    softmax_in_place(out)
}

fn leave_one_out(c: &[f64], own: &[f64], out: &mut [f64]) {
    for ((o, a), b) in out.iter_mut().zip(c).zip(own) {
        *o = (a - b).max(0.0);
    }
}

/// Updates `phi` then `psi` for every dyad in `subset` (all dyads if `None`)
/// against the frozen expected counts `c`. Each dyad's `psi` update sees its
/// freshly updated `phi`; dyads are otherwise independent.
pub fn update_dyads(
    ctx: &EStepContext,
    vp: &mut VariationalParams,
    c: &GlobalStats,
    subset: Option<&[usize]>,
) -> Result<()> {
    let k = ctx.spec.k;
    let all: Vec<usize>;
    let idx: &[usize] = match subset {
        Some(s) => s,
        None => {
            all = (0..ctx.net.n_dyads()).collect();
            &all
        }
    };
    let vp_ref = &*vp;
    let updated: Vec<Result<Vec<f64>>> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut buf = Vec::with_capacity(chunk.len() * 2 * k);
            let mut c_prime = vec![0.0; k];
            let mut phi = vec![0.0; k];
            let mut psi = vec![0.0; k];
            let mut table = vec![0.0; k * k];
            for &i in chunk {
                let dy = &ctx.net.dyads()[i];
                let kappa_t = vp_ref.kappa_row(dy.t);
                ctx.edge_table(i, &mut table);

                leave_one_out(c.c_row(dy.p_slot), vp_ref.phi_row(i), &mut c_prime);
                membership_log_weight(ctx, dy.p_slot, kappa_t, &c_prime, &mut phi);
                for g in 0..k {
                    for (h, &w) in vp_ref.psi_row(i).iter().enumerate() {
                        phi[g] += w * table[g * k + h];
                    }
                }
                softmax_in_place(&mut phi)?;

                leave_one_out(c.c_row(dy.q_slot), vp_ref.psi_row(i), &mut c_prime);
                membership_log_weight(ctx, dy.q_slot, kappa_t, &c_prime, &mut psi);
                for h in 0..k {
                    for (g, &w) in phi.iter().enumerate() {
                        psi[h] += w * table[g * k + h];
                    }
                }
                softmax_in_place(&mut psi)?;

                buf.extend_from_slice(&phi);
                buf.extend_from_slice(&psi);
            }
            Ok(buf)
        })
        .collect();
    for (chunk, res) in idx.chunks(CHUNK).zip(updated) {
        let buf = res?;
        for (j, &i) in chunk.iter().enumerate() {
            let base = j * 2 * k;
            vp.phi[i * k..(i + 1) * k].copy_from_slice(&buf[base..base + k]);
            vp.psi[i * k..(i + 1) * k].copy_from_slice(&buf[base + k..base + 2 * k]);
        }
    }
    Ok(())
}

#[inline]
fn ln_pos(x: f64) -> f64 {
    x.max(0.0).ln()
}

/// State update for period `t` (0-based). `kappa` holds every period's
/// current weights, `u` the expected transition counts consistent with them,
/// and `c` the expected group counts.
///
/// Interior periods use the full expression; the first period drops the
/// predecessor terms (uniform initial-state prior) and the last period drops
/// the successor terms together with the outgoing-row normalizer, since
/// `s_T` originates no transition.
pub fn update_kappa(ctx: &EStepContext, t: usize, kappa: &[f64], u: &[f64], c: &GlobalStats) -> Result<Vec<f64>> {
    let m_states = ctx.spec.m;
    let n_periods = ctx.net.n_periods();
    if m_states == 1 {
        return Ok(vec![1.0]);
    }
    let eta = ctx.spec.eta;
    let m_eta = m_states as f64 * eta;
    let zeros = vec![0.0; m_states];
    let cur = &kappa[t * m_states..(t + 1) * m_states];
    let prev = if t > 0 {
        &kappa[(t - 1) * m_states..t * m_states]
    } else {
        &zeros[..]
    };
    let next = if t + 1 < n_periods {
        &kappa[(t + 1) * m_states..(t + 2) * m_states]
    } else {
        &zeros[..]
    };
    // transition counts with both transitions touching period t removed
    let u_excl = |a: usize, b: usize| u[a * m_states + b] - prev[a] * cur[b] - cur[a] * next[b];

    let mut lw = vec![0.0; m_states];
    for m in 0..m_states {
        let mut v = 0.0;
        if t + 1 < n_periods {
            let row: f64 = (0..m_states).map(|n| u[m * m_states + n]).sum();
            v -= ln_pos(m_eta + row - cur[m]);
        }
        let u_mm = u_excl(m, m);
        v += prev[m] * next[m] * ln_pos(eta + u_mm + 1.0);
        v += (prev[m] - prev[m] * next[m] + next[m]) * ln_pos(eta + u_mm);
        for n in 0..m_states {
            if n == m {
                continue;
            }
            if next[n] != 0.0 {
                v += next[n] * ln_pos(eta + u_excl(m, n));
            }
            if prev[n] != 0.0 {
                v += prev[n] * ln_pos(eta + u_excl(n, m));
            }
        }
        for slot in ctx.net.period_slots(t) {
            v += membership_factor(&ctx.prior, slot, m, c.c_row(slot), ctx.spec.norm_count(ctx.net, slot));
        }
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("kappa log-weight at period {t}")));
        }
        lw[m] = v;
    }
    softmax_in_place(&mut lw)?;
    Ok(lw)
}

/// Sequential state sweep `t = 0..T`, refreshing `stats.u` as it goes.
pub fn update_states(ctx: &EStepContext, vp: &mut VariationalParams, stats: &mut GlobalStats) -> Result<()> {
    let m = ctx.spec.m;
    for t in 0..ctx.net.n_periods() {
        let u = GlobalStats::transitions_from_kappa(&vp.kappa, m);
        let new = update_kappa(ctx, t, &vp.kappa, &u, stats)?;
        vp.kappa_row_mut(t).copy_from_slice(&new);
    }
    stats.u = GlobalStats::transitions_from_kappa(&vp.kappa, m);
    Ok(())
}

/// One full E-step: all dyads against the current expected counts, count
/// refresh, then the state sweep. Returns the refreshed expected statistics.
pub fn e_step(ctx: &EStepContext, vp: &mut VariationalParams) -> Result<GlobalStats> {
    let snapshot = vp.expected_stats(ctx.net);
    update_dyads(ctx, vp, &snapshot, None)?;
    let mut stats = vp.expected_stats(ctx.net);
    update_states(ctx, vp, &mut stats)?;
    Ok(stats)
}
