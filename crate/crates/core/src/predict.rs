//! Post-fit quantities: dyad probabilities, counterfactual covariate effects,
//! forecasts, AUROC and expanding-window refits.
//!
//! Counterfactual and forecast memberships use the prior mean
//! `Sum_m kappa_m alpha_m(x) / xi_m(x)` rather than re-running inference.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{align_labels, initialize, AlignMode, InitConfig};
use crate::model::kernels::clamped_logistic;
use crate::model::{alpha, logistic, Hyperparams, ModelSpec};
use crate::network::DynamicNetwork;
use crate::vem::{fit_vem, FittedModel, Init, VemConfig};

fn check_compat(fitted: &FittedModel, net: &DynamicNetwork) -> Result<()> {
    if fitted.node_ids != net.node_ids()
        || fitted.period_labels != net.period_labels()
        || fitted.x_names != net.x_names()
        || fitted.d_names != net.d_names()
        || fitted.pi_hat.len() != net.n_slots() * fitted.spec.k
    {
        return Err(Error::Prediction(
            "network does not match the one the model was fitted on".into(),
        ));
    }
    Ok(())
}

fn missing_columns(kind: &str, names: &[String]) -> Error {
    Error::Prediction(format!(
        "{kind} covariates required: [{}]",
        names.join(", ")
    ))
}

/// Prior-mean membership under state weights `kappa_t` for covariates `x`.
pub fn prior_membership(hyper: &Hyperparams, kappa_t: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let k = hyper.k;
    let mut out = vec![0.0; k];
    let mut a = vec![0.0; k];
    for (m, &w) in kappa_t.iter().enumerate() {
        let xi = alpha(x, hyper.beta_state(m), &mut a)?;
        for g in 0..k {
            out[g] += w * a[g] / xi;
        }
    }
    Ok(out)
}

/// Posterior-mean membership with the node-period's fitted counts but
/// covariates `x` in place of the observed ones.
fn posterior_membership(fitted: &FittedModel, slot: usize, t: usize, x: &[f64]) -> Result<Vec<f64>> {
    let k = fitted.spec.k;
    let c = fitted.stats.c_row(slot);
    let n: f64 = c.iter().sum();
    let mut out = vec![0.0; k];
    let mut a = vec![0.0; k];
    for (m, &w) in fitted.vparams.kappa_row(t).iter().enumerate() {
        let xi = alpha(x, fitted.hyper.beta_state(m), &mut a)?;
        let denom = xi + n;
        for g in 0..k {
            out[g] += w * (a[g] + c[g]) / denom;
        }
    }
    Ok(out)
}

/// Membership of `node` (global index, `None` for a node not in the data)
/// at period `t`, optionally with replacement covariates.
pub fn membership(
    fitted: &FittedModel,
    net: &DynamicNetwork,
    t: usize,
    node: Option<usize>,
    x: Option<&[f64]>,
) -> Result<Vec<f64>> {
    check_compat(fitted, net)?;
    if t >= net.n_periods() {
        return Err(Error::Prediction(format!("period index {t} out of range")));
    }
    if let Some(x) = x {
        if x.len() != net.jx() {
            return Err(Error::Prediction(format!(
                "monadic override has {} values, expected {} ({})",
                x.len(),
                net.jx(),
                net.x_names().join(", ")
            )));
        }
    }
    match (node.and_then(|n| net.slot(t, n)), x) {
        (Some(slot), None) => Ok(fitted.pi_row(slot).to_vec()),
        (Some(slot), Some(x)) => posterior_membership(fitted, slot, t, x),
        (None, Some(x)) => prior_membership(&fitted.hyper, fitted.vparams.kappa_row(t), x),
        (None, None) => Err(missing_columns("monadic", net.x_names())),
    }
}

/// `Sum_gh pi_p[g] pi_q[h] logistic(B_gh + d . gamma)`.
pub fn mixture_prob(hyper: &Hyperparams, pi_p: &[f64], pi_q: &[f64], d: &[f64]) -> f64 {
    let k = hyper.k;
    let off: f64 = d.iter().zip(&hyper.gamma).map(|(a, b)| a * b).sum();
    let mut prob = 0.0;
    for g in 0..k {
        for h in 0..k {
            prob += pi_p[g] * pi_q[h] * clamped_logistic(hyper.b(g, h) + off);
        }
    }
    prob
}

/// Replacement covariates for [`dyad_prob`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DyadOverrides {
    pub x_p: Option<Vec<f64>>,
    pub x_q: Option<Vec<f64>>,
    pub d: Option<Vec<f64>>,
}

/// Expected edge value for `p -> q` at period `t`.
pub fn dyad_prob(
    fitted: &FittedModel,
    net: &DynamicNetwork,
    t: usize,
    p: Option<usize>,
    q: Option<usize>,
    ov: &DyadOverrides,
) -> Result<f64> {
    let pi_p = membership(fitted, net, t, p, ov.x_p.as_deref())?;
    let pi_q = membership(fitted, net, t, q, ov.x_q.as_deref())?;
    let d: Vec<f64> = match &ov.d {
        Some(d) if d.len() == net.jd() => d.clone(),
        Some(d) => {
            return Err(Error::Prediction(format!(
                "dyadic override has {} values, expected {}",
                d.len(),
                net.jd()
            )))
        }
        None if net.jd() == 0 => Vec::new(),
        None => {
            let found = match (p, q) {
                (Some(p), Some(q)) => net.find_dyad(t, p, q),
                _ => None,
            };
            match found {
                Some(i) => net.d_row(i).to_vec(),
                None => return Err(missing_columns("dyadic", net.d_names())),
            }
        }
    };
    Ok(mixture_prob(&fitted.hyper, &pi_p, &pi_q, &d))
}

/// Fitted edge probability of every modeled dyad, in dyad order.
pub fn fitted_probs(fitted: &FittedModel, net: &DynamicNetwork) -> Result<Vec<f64>> {
    check_compat(fitted, net)?;
    Ok(net
        .dyads()
        .iter()
        .enumerate()
        .map(|(i, dy)| mixture_prob(&fitted.hyper, fitted.pi_row(dy.p_slot), fitted.pi_row(dy.q_slot), net.d_row(i)))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    Overall,
    ByNode,
    ByNodeYear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    /// Monadic covariate name.
    pub column: String,
    pub delta: f64,
    /// Shifted values never move past this bound.
    pub cap: Option<f64>,
}

impl Shift {
    fn apply(&self, x: f64) -> f64 {
        let v = x + self.delta;
        match self.cap {
            Some(c) if self.delta >= 0.0 => v.min(c.max(x)),
            Some(c) => v.max(c.min(x)),
            None => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub node: Option<String>,
    pub period: Option<i64>,
    pub effect: f64,
    pub n_dyads: usize,
}

/// Average change in expected edge value when a monadic covariate is
/// shifted. `Overall` shifts every node at once and averages over all
/// modeled dyad-periods; the node-level aggregations shift only the focal
/// node and average over the dyads it takes part in.
pub fn covariate_effect(fitted: &FittedModel, net: &DynamicNetwork, shift: &Shift, agg: Aggregation) -> Result<Vec<EffectRow>> {
    check_compat(fitted, net)?;
    let Some(col) = net.x_names().iter().position(|n| *n == shift.column) else {
        if net.d_names().contains(&shift.column) {
            return Err(Error::Prediction(format!(
                "{:?} is a dyadic covariate; use dyad_prob overrides for dyadic shifts",
                shift.column
            )));
        }
        return Err(Error::Prediction(format!("unknown covariate {:?}", shift.column)));
    };
    let k = fitted.spec.k;
    let n_slots = net.n_slots();
    let mut base = Vec::with_capacity(n_slots * k);
    let mut shifted = Vec::with_capacity(n_slots * k);
    for slot in 0..n_slots {
        let t = net.slot_period(slot);
        let kappa = fitted.vparams.kappa_row(t);
        let x = net.x_row(slot);
        base.extend(prior_membership(&fitted.hyper, kappa, x)?);
        let mut xs = x.to_vec();
        xs[col] = shift.apply(xs[col]);
        shifted.extend(prior_membership(&fitted.hyper, kappa, &xs)?);
    }
    let row = |v: &[f64], s: usize| v[s * k..(s + 1) * k].to_vec();

    let mut rows = Vec::new();
    match agg {
        Aggregation::Overall => {
            let mut total = 0.0;
            for (i, dy) in net.dyads().iter().enumerate() {
                let d = net.d_row(i);
                let after = mixture_prob(&fitted.hyper, &row(&shifted, dy.p_slot), &row(&shifted, dy.q_slot), d);
                let before = mixture_prob(&fitted.hyper, &row(&base, dy.p_slot), &row(&base, dy.q_slot), d);
                total += after - before;
            }
            let n = net.n_dyads();
            rows.push(EffectRow {
                node: None,
                period: None,
                effect: if n > 0 { total / n as f64 } else { 0.0 },
                n_dyads: n,
            });
        }
        Aggregation::ByNode | Aggregation::ByNodeYear => {
            let mut sum = vec![0.0; n_slots];
            let mut cnt = vec![0usize; n_slots];
            for (i, dy) in net.dyads().iter().enumerate() {
                let d = net.d_row(i);
                let (bp, bq) = (row(&base, dy.p_slot), row(&base, dy.q_slot));
                let before = mixture_prob(&fitted.hyper, &bp, &bq, d);
                sum[dy.p_slot] += mixture_prob(&fitted.hyper, &row(&shifted, dy.p_slot), &bq, d) - before;
                sum[dy.q_slot] += mixture_prob(&fitted.hyper, &bp, &row(&shifted, dy.q_slot), d) - before;
                cnt[dy.p_slot] += 1;
                cnt[dy.q_slot] += 1;
            }
            if agg == Aggregation::ByNodeYear {
                for slot in 0..n_slots {
                    rows.push(EffectRow {
                        node: Some(net.node_ids()[net.slot_node(slot)].clone()),
                        period: Some(net.period_labels()[net.slot_period(slot)]),
                        effect: if cnt[slot] > 0 { sum[slot] / cnt[slot] as f64 } else { 0.0 },
                        n_dyads: cnt[slot],
                    });
                }
            } else {
                let mut by_node: Vec<(f64, usize)> = vec![(0.0, 0); net.n_nodes()];
                for slot in 0..n_slots {
                    let e = &mut by_node[net.slot_node(slot)];
                    e.0 += sum[slot];
                    e.1 += cnt[slot];
                }
                for (node, (s, c)) in by_node.into_iter().enumerate() {
                    rows.push(EffectRow {
                        node: Some(net.node_ids()[node].clone()),
                        period: None,
                        effect: if c > 0 { s / c as f64 } else { 0.0 },
                        n_dyads: c,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Covariates for forecast steps. Missing entries fall back to the last
/// observed values only when `carry_forward` is set.
#[derive(Clone, Debug, Default)]
pub struct FutureCovariates {
    /// Per step, monadic rows keyed by node index.
    pub monadic: Vec<HashMap<usize, Vec<f64>>>,
    /// Per step, dyadic rows keyed by `(p, q)`.
    pub dyadic: Vec<HashMap<(usize, usize), Vec<f64>>>,
    pub carry_forward: bool,
}

/// A dyadic counter of periods since the last edge, updated by sampling
/// forecast outcomes.
#[derive(Clone, Debug)]
pub struct ArImputation {
    pub column: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub step: usize,
    pub p: String,
    pub q: String,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    /// State distribution per step (h x M).
    pub state_probs: Vec<Vec<f64>>,
    pub dyads: Vec<ForecastRow>,
}

/// `kappa_T A^h` for `h = 1..=horizon`.
pub fn propagate_states(kappa_last: &[f64], trans: &[f64], horizon: usize) -> Vec<Vec<f64>> {
    let m = kappa_last.len();
    let mut cur = kappa_last.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let next: Vec<f64> = (0..m).map(|b| (0..m).map(|a| cur[a] * trans[a * m + b]).sum()).collect();
        out.push(next.clone());
        cur = next;
    }
    out
}

/// Edge probabilities for the dyads modeled in the last period, `horizon`
/// steps ahead.
pub fn forecast(
    fitted: &FittedModel,
    net: &DynamicNetwork,
    horizon: usize,
    future: &FutureCovariates,
    ar: Option<&ArImputation>,
) -> Result<Forecast> {
    check_compat(fitted, net)?;
    if horizon == 0 {
        return Err(Error::Prediction("horizon must be >= 1".into()));
    }
    let last = net.n_periods() - 1;
    let states = propagate_states(fitted.vparams.kappa_row(last), &fitted.trans_hat, horizon);
    let ar_col = match ar {
        Some(a) => Some(
            net.d_names()
                .iter()
                .position(|n| *n == a.column)
                .ok_or_else(|| Error::Prediction(format!("unknown dyadic covariate {:?}", a.column)))?,
        ),
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ar.map_or(0, |a| a.seed));

    let mut x_cur: HashMap<usize, Vec<f64>> = net
        .period_slots(last)
        .map(|s| (net.slot_node(s), net.x_row(s).to_vec()))
        .collect();
    let dyad_idx: Vec<usize> = net.period_dyads(last).collect();
    let mut d_cur: Vec<Vec<f64>> = dyad_idx.iter().map(|&i| net.d_row(i).to_vec()).collect();
    let ids = net.node_ids();

    let mut rows = Vec::with_capacity(horizon * dyad_idx.len());
    for (h, kappa) in states.iter().enumerate() {
        let mut pis: HashMap<usize, Vec<f64>> = HashMap::new();
        for (&node, x) in x_cur.iter_mut() {
            match future.monadic.get(h).and_then(|m| m.get(&node)) {
                Some(row) if row.len() == net.jx() => *x = row.clone(),
                Some(_) => return Err(Error::Prediction("future monadic row has the wrong width".into())),
                None if future.carry_forward => {}
                None => {
                    return Err(Error::Prediction(format!(
                        "no monadic covariates for node {:?} at forecast step {}; supply them or enable carry-forward",
                        ids[node],
                        h + 1
                    )))
                }
            }
            pis.insert(node, prior_membership(&fitted.hyper, kappa, x)?);
        }
        for (j, &i) in dyad_idx.iter().enumerate() {
            let dy = &net.dyads()[i];
            let supplied = future.dyadic.get(h).and_then(|m| m.get(&(dy.p, dy.q)));
            match supplied {
                Some(row) if row.len() == net.jd() => d_cur[j] = row.clone(),
                Some(_) => return Err(Error::Prediction("future dyadic row has the wrong width".into())),
                None if future.carry_forward || net.jd() == 0 => {}
                None => {
                    return Err(Error::Prediction(format!(
                        "no dyadic covariates for ({:?}, {:?}) at forecast step {}; supply them or enable carry-forward",
                        ids[dy.p],
                        ids[dy.q],
                        h + 1
                    )))
                }
            }
            let prob = mixture_prob(&fitted.hyper, &pis[&dy.p], &pis[&dy.q], &d_cur[j]);
            if let Some(c) = ar_col {
                let y = rng.random::<f64>() < prob;
                d_cur[j][c] = if y { 0.0 } else { d_cur[j][c] + 1.0 };
            }
            rows.push(ForecastRow {
                step: h + 1,
                p: ids[dy.p].clone(),
                q: ids[dy.q].clone(),
                prob,
            });
        }
    }
    Ok(Forecast {
        state_probs: states,
        dyads: rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Auroc {
    pub value: f64,
    /// DeLong standard error; NaN with fewer than two cases in a class.
    pub sd: f64,
}

/// 1-based ranks with ties given their average rank.
fn midranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn sample_var(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

/// Area under the ROC curve from midranks, with the DeLong variance
/// `S10 / n1 + S01 / n0` built from per-case placement values.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<Auroc> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("AUROC scores".into()));
    }
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    let (n1, n0) = (pos.len(), neg.len());
    if n1 == 0 || n0 == 0 {
        return Err(Error::Prediction("AUROC needs at least one case of each class".into()));
    }
    let all_ranks = midranks(scores);
    let pos_ranks = midranks(&pos);
    let neg_ranks = midranks(&neg);
    let pos_all: Vec<f64> = all_ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(&r, _)| r).collect();
    let neg_all: Vec<f64> = all_ranks.iter().zip(labels).filter(|(_, &l)| !l).map(|(&r, _)| r).collect();
    let (f1, f0) = (n1 as f64, n0 as f64);
    let r_sum: f64 = pos_all.iter().sum();
    let value = (r_sum - f1 * (f1 + 1.0) / 2.0) / (f1 * f0);
    let v10: Vec<f64> = pos_all.iter().zip(&pos_ranks).map(|(a, b)| (a - b) / f0).collect();
    let v01: Vec<f64> = neg_all.iter().zip(&neg_ranks).map(|(a, b)| 1.0 - (a - b) / f1).collect();
    let sd = if n1 < 2 || n0 < 2 {
        f64::NAN
    } else {
        (sample_var(&v10) / f1 + sample_var(&v01) / f0).sqrt()
    };
    Ok(Auroc { value, sd })
}

/// ROC curve points `(threshold, fpr, tpr)`, thresholds descending.
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64, f64)>> {
    auroc(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let n1 = labels.iter().filter(|&&l| l).count() as f64;
    let n0 = labels.len() as f64 - n1;
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut out = vec![(f64::INFINITY, 0.0, 0.0)];
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            if labels[idx[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        out.push((s, fp / n0, tp / n1));
    }
    Ok(out)
}

/// Soft blockmodel estimate of period `t` from the variational group
/// assignments, in probability scale.
fn period_rates(net: &DynamicNetwork, phi: &[f64], psi: &[f64], k: usize, t: usize, default_prob: f64) -> Vec<f64> {
    let mut num = vec![0.0; k * k];
    let mut den = vec![0.0; k * k];
    for i in net.period_dyads(t) {
        let y = if net.dyads()[i].y { 1.0 } else { 0.0 };
        for g in 0..k {
            for h in 0..k {
                let w = phi[i * k + g] * psi[i * k + h];
                num[g * k + h] += w * y;
                den[g * k + h] += w;
                if !net.directed() {
                    num[h * k + g] += w * y;
                    den[h * k + g] += w;
                }
            }
        }
    }
    num.iter().zip(&den).map(|(&a, &b)| if b > 0.0 { a / b } else { default_prob }).collect()
}

/// Builds the starting point for a window from the previous window's fit:
/// earlier periods keep their variational parameters, new periods come from
/// a fresh initialization relabeled to match the previous blockmodel, and
/// their state weights are the previous last period propagated by the
/// estimated transition matrix.
pub fn warm_start(prev: &FittedModel, prev_periods: usize, net: &DynamicNetwork, spec: &ModelSpec, init_cfg: &InitConfig) -> Result<Init> {
    let mut init = initialize(net, spec, init_cfg)?;
    let k = spec.k;
    let m = spec.m;
    let n_prev = net.period_dyads(prev_periods - 1).end;
    if prev.vparams.n_dyads() != n_prev || prev.vparams.n_periods() != prev_periods {
        return Err(Error::Dimension("previous fit does not cover the window prefix".into()));
    }
    init.vparams.phi[..n_prev * k].copy_from_slice(&prev.vparams.phi);
    init.vparams.psi[..n_prev * k].copy_from_slice(&prev.vparams.psi);
    init.vparams.kappa[..prev_periods * m].copy_from_slice(&prev.vparams.kappa);

    let reference: Vec<f64> = prev.hyper.b.iter().map(|&b| logistic(b)).collect();
    let default_prob = logistic(spec.prior_b.mean);
    let states = propagate_states(prev.vparams.kappa_row(prev_periods - 1), &prev.trans_hat, net.n_periods() - prev_periods);
    for t in prev_periods..net.n_periods() {
        let rates = period_rates(net, &init.vparams.phi, &init.vparams.psi, k, t, default_prob);
        let perm = align_labels(&rates, &reference, k, AlignMode::Relaxed)
            .or_else(|_| align_labels(&rates, &reference, k, AlignMode::Auto))?;
        for i in net.period_dyads(t) {
            let phi: Vec<f64> = perm.iter().map(|&s| init.vparams.phi[i * k + s]).collect();
            let psi: Vec<f64> = perm.iter().map(|&s| init.vparams.psi[i * k + s]).collect();
            init.vparams.phi[i * k..(i + 1) * k].copy_from_slice(&phi);
            init.vparams.psi[i * k..(i + 1) * k].copy_from_slice(&psi);
        }
        init.vparams.kappa_row_mut(t).copy_from_slice(&states[t - prev_periods]);
    }
    init.hyper = prev.hyper.clone();
    Ok(init)
}

/// Fits expanding windows (numbers of leading periods). The first window is
/// initialized from scratch; later ones warm-start from the previous fit.
pub fn online_refit(
    net: &DynamicNetwork,
    spec: &ModelSpec,
    windows: &[usize],
    init_cfg: &InitConfig,
    config: &VemConfig,
) -> Result<Vec<FittedModel>> {
    if windows.is_empty() {
        return Err(Error::InvalidConfig("at least one window is required".into()));
    }
    if windows[0] == 0 || windows.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig("window ends must be >= 1 and nondecreasing".into()));
    }
    if *windows.last().unwrap() != net.n_periods() {
        return Err(Error::InvalidConfig(format!(
            "last window must end at the final period ({})",
            net.n_periods()
        )));
    }
    let mut fits: Vec<FittedModel> = Vec::with_capacity(windows.len());
    for (i, &w) in windows.iter().enumerate() {
        let sub = net.window(w)?;
        let init = match fits.last() {
            None => initialize(&sub, spec, init_cfg)?,
            Some(prev) => warm_start(prev, windows[i - 1], &sub, spec, init_cfg)?,
        };
        fits.push(fit_vem(&sub, spec, &init, config)?);
    }
    Ok(fits)
}
