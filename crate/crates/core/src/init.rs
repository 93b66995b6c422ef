//! Starting values: per-period spectral clustering, label alignment across
//! periods, and a clustering of periods into hidden states.

use itertools::Itertools;
use log::debug;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{logistic, logit, Hyperparams, ModelSpec, VariationalParams};
use crate::network::DynamicNetwork;
use crate::vem::Init;

/// Largest K aligned by exhaustive permutation search.
pub const EXACT_ALIGN_MAX_K: usize = 8;
/// Largest K aligned by assignment without an explicit opt-in.
pub const RELAXED_ALIGN_MAX_K: usize = 12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignMode {
    /// Exhaustive for small K, assignment-based up to
    /// [`RELAXED_ALIGN_MAX_K`], error beyond.
    #[default]
    Auto,
    /// Assignment-based alignment for any K.
    Relaxed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    pub seed: u64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    /// Weight on the assigned group/state; the rest is spread evenly.
    pub concentration: f64,
    pub align: AlignMode,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            seed: 0,
            kmeans_restarts: 10,
            kmeans_max_iter: 100,
            concentration: 0.9,
            align: AlignMode::Auto,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_once(points: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centers.last().unwrap()));
        }
    }

    let dim = points[0].len();
    let mut labels = vec![0; n];
    for iter in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                .unwrap();
            if best != labels[i] || iter == 0 {
                changed |= best != labels[i];
                labels[i] = best;
            }
        }
        if iter > 0 && !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centers[l])).sum();
    (labels, inertia)
}

/// k-means++ with restarts; returns the labeling with the lowest inertia.
/// With fewer points than clusters every point gets its own label.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if points.len() <= k {
        return (0..points.len()).collect();
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let (labels, inertia) = kmeans_once(points, k, max_iter, rng);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((labels, inertia));
        }
    }
    best.unwrap().0
}

/// Hard group labels for the nodes present in period `t` (in slot order)
/// from the leading eigenvectors of the regularized symmetrized adjacency
/// matrix. Falls back to uniformly random labels when the spectrum has fewer
/// than `k` informative directions.
pub fn spectral_labels(net: &DynamicNetwork, t: usize, k: usize, cfg: &InitConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let nodes = net.present(t);
    let n = nodes.len();
    if k == 1 {
        return vec![0; n];
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    let base = net.period_slots(t).start;
    for dy in &net.dyads()[net.period_dyads(t)] {
        if dy.y {
            let (i, j) = (dy.p_slot - base, dy.q_slot - base);
            a[(i, j)] += 1.0;
            a[(j, i)] += 1.0;
        }
    }
    let mean_degree = a.sum() / n.max(1) as f64;
    let tau = mean_degree / n.max(1) as f64;
    a.add_scalar_mut(tau);

    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].abs().total_cmp(&eig.eigenvalues[x].abs()));
    let scale = eig.eigenvalues[order[0]].abs().max(1e-300);
    let informative = order.iter().filter(|&&i| eig.eigenvalues[i].abs() > 1e-8 * scale).count();
    if n < k || informative < k {
        debug!("period {t}: spectrum rank {informative} < K, random labels");
        return (0..n).map(|_| rng.random_range(0..k)).collect();
    }
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = order[..k].iter().map(|&c| eig.eigenvectors[(i, c)]).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|v| v / norm).collect()
            } else {
                row
            }
        })
        .collect();
    kmeans(&points, k, cfg.kmeans_restarts, cfg.kmeans_max_iter, rng)
}

fn spread(label: usize, width: usize, conc: f64) -> Vec<f64> {
    if width == 1 {
        return vec![1.0];
    }
    let rest = (1.0 - conc) / (width - 1) as f64;
    (0..width).map(|i| if i == label { conc } else { rest }).collect()
}

/// Soft blockmodel estimate for period `t` given node memberships (one row
/// per present node, slot order). Cells without weight fall back to
/// `default_prob`.
pub fn estimate_period_blockmodel(net: &DynamicNetwork, t: usize, memberships: &[Vec<f64>], k: usize, default_prob: f64) -> Vec<f64> {
    let base = net.period_slots(t).start;
    let mut num = vec![0.0; k * k];
    let mut den = vec![0.0; k * k];
    for dy in &net.dyads()[net.period_dyads(t)] {
        let (pp, pq) = (&memberships[dy.p_slot - base], &memberships[dy.q_slot - base]);
        let y = if dy.y { 1.0 } else { 0.0 };
        for g in 0..k {
            for h in 0..k {
                let w = pp[g] * pq[h];
                num[g * k + h] += w * y;
                den[g * k + h] += w;
                if !net.directed() {
                    num[h * k + g] += w * y;
                    den[h * k + g] += w;
                }
            }
        }
    }
    num.iter()
        .zip(&den)
        .map(|(&a, &b)| if b > 0.0 { a / b } else { default_prob })
        .collect()
}

fn permuted_cost(b: &[f64], reference: &[f64], perm: &[usize], k: usize) -> f64 {
    let mut c = 0.0;
    for g in 0..k {
        for h in 0..k {
            let d = b[perm[g] * k + perm[h]] - reference[g * k + h];
            c += d * d;
        }
    }
    c
}

/// Minimum-cost perfect assignment on a square cost matrix (row-major).
/// Returns `assign[row] = column`.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // potentials formulation, 1-based internally
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Permutation `perm` minimizing `Sum (b[perm[g]][perm[h]] - reference[g][h])^2`,
/// so that group `g` of the aligned estimate is group `perm[g]` of `b`.
pub fn align_labels(b: &[f64], reference: &[f64], k: usize, mode: AlignMode) -> Result<Vec<usize>> {
    if b.len() != k * k || reference.len() != k * k {
        return Err(Error::Dimension("blockmodel size does not match K".into()));
    }
    if k <= EXACT_ALIGN_MAX_K && mode == AlignMode::Auto {
        let mut best = (0..k).collect::<Vec<_>>();
        let mut best_cost = permuted_cost(b, reference, &best, k);
        for perm in (0..k).permutations(k) {
            let c = permuted_cost(b, reference, &perm, k);
            if c < best_cost {
                best_cost = c;
                best = perm;
            }
        }
        return Ok(best);
    }
    if k > RELAXED_ALIGN_MAX_K && mode != AlignMode::Relaxed {
        return Err(Error::Alignment(format!(
            "exact label alignment is limited to K <= {RELAXED_ALIGN_MAX_K}; request relaxed alignment for K = {k}"
        )));
    }
    // match each reference group to a source group by diagonal and row/column profiles
    let mut cost = vec![0.0; k * k];
    for g in 0..k {
        for a in 0..k {
            let mut c = (reference[g * k + g] - b[a * k + a]).powi(2);
            let (mut rr, mut rc, mut br, mut bc) = (0.0, 0.0, 0.0, 0.0);
            for h in 0..k {
                rr += reference[g * k + h];
                rc += reference[h * k + g];
                br += b[a * k + h];
                bc += b[h * k + a];
            }
            c += ((rr - br) / k as f64).powi(2) + ((rc - bc) / k as f64).powi(2);
            cost[g * k + a] = c;
        }
    }
    Ok(hungarian(&cost, k))
}

/// Per-period features used to group periods into states: mean group
/// proportions followed by the slopes of each group's membership on each
/// non-constant monadic covariate.
fn period_features(net: &DynamicNetwork, t: usize, memberships: &[Vec<f64>], k: usize) -> Vec<f64> {
    let slots = net.period_slots(t);
    let n = slots.len() as f64;
    let mut feat = vec![0.0; k];
    for m in memberships {
        for (f, v) in feat.iter_mut().zip(m) {
            *f += v / n;
        }
    }
    for j in 0..net.jx() {
        let xs: Vec<f64> = slots.clone().map(|s| net.x_row(s)[j]).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        if sxx <= 1e-12 {
            continue;
        }
        for g in 0..k {
            let sxy: f64 = xs.iter().zip(memberships).map(|(x, m)| (x - mx) * (m[g] - feat[g])).sum();
            feat.push(sxy / sxx);
        }
    }
    feat
}

fn standardize(points: &mut [Vec<f64>]) {
    let Some(dim) = points.first().map(Vec::len) else {
        return;
    };
    let n = points.len() as f64;
    for d in 0..dim {
        let mean = points.iter().map(|p| p[d]).sum::<f64>() / n;
        let sd = (points.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / n).sqrt();
        for p in points.iter_mut() {
            p[d] = if sd > 1e-12 { (p[d] - mean) / sd } else { 0.0 };
        }
    }
}

/// Relabels so that labels appear in increasing order of first occurrence.
pub fn first_appearance_order(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Builds starting variational parameters and hyperparameters.
pub fn initialize(net: &DynamicNetwork, spec: &ModelSpec, cfg: &InitConfig) -> Result<Init> {
    spec.check_network(net)?;
    if !(cfg.concentration > 0.0 && cfg.concentration <= 1.0) {
        return Err(Error::InvalidConfig("init concentration must lie in (0, 1]".into()));
    }
    let k = spec.k;
    let m_states = spec.m;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let default_prob = logistic(spec.prior_b.mean);

    let mut memberships: Vec<Vec<Vec<f64>>> = Vec::with_capacity(net.n_periods());
    let mut reference: Option<Vec<f64>> = None;
    let mut b_sum = vec![0.0; k * k];
    for t in 0..net.n_periods() {
        let labels = spectral_labels(net, t, k, cfg, &mut rng);
        let hard: Vec<Vec<f64>> = labels.iter().map(|&l| spread(l, k, 1.0)).collect();
        let mut b = estimate_period_blockmodel(net, t, &hard, k, default_prob);
        let mut mem: Vec<Vec<f64>> = labels.iter().map(|&l| spread(l, k, cfg.concentration)).collect();
        if let Some(r) = &reference {
            let perm = align_labels(&b, r, k, cfg.align)?;
            mem = mem.iter().map(|row| perm.iter().map(|&src| row[src]).collect()).collect();
            b = (0..k * k).map(|i| b[perm[i / k] * k + perm[i % k]]).collect();
        }
        for (s, v) in b_sum.iter_mut().zip(&b) {
            *s += v;
        }
        reference = Some(b_sum.iter().map(|s| s / (t + 1) as f64).collect());
        memberships.push(mem);
    }

    let mut hyper = Hyperparams::for_network(spec, net);
    let b_mean = reference.unwrap();
    for g in 0..k {
        for h in 0..k {
            let v = if spec.directed {
                b_mean[g * k + h]
            } else {
                0.5 * (b_mean[g * k + h] + b_mean[h * k + g])
            };
            hyper.set_b(g, h, logit(v.clamp(1e-3, 1.0 - 1e-3)));
        }
    }

    let state_labels = if m_states == 1 {
        vec![0; net.n_periods()]
    } else {
        let mut feats: Vec<Vec<f64>> = (0..net.n_periods())
            .map(|t| period_features(net, t, &memberships[t], k))
            .collect();
        standardize(&mut feats);
        let raw = if feats.iter().all(|f| f.iter().all(|v| *v == 0.0)) {
            let choices: Vec<usize> = (0..m_states).collect();
            (0..net.n_periods()).map(|_| *choices.choose(&mut rng).unwrap()).collect()
        } else {
            kmeans(&feats, m_states, cfg.kmeans_restarts, cfg.kmeans_max_iter, &mut rng)
        };
        first_appearance_order(&raw)
    };

    let mut vp = VariationalParams::uniform(net, k, m_states);
    for (t, &s) in state_labels.iter().enumerate() {
        vp.kappa_row_mut(t).copy_from_slice(&spread(s, m_states, cfg.concentration));
    }
    for (i, dy) in net.dyads().iter().enumerate() {
        let base = net.period_slots(dy.t).start;
        let mem = &memberships[dy.t];
        vp.phi[i * k..(i + 1) * k].copy_from_slice(&mem[dy.p_slot - base]);
        vp.psi[i * k..(i + 1) * k].copy_from_slice(&mem[dy.q_slot - base]);
    }
    Ok(Init { vparams: vp, hyper })
}
