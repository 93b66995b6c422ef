//! Synthetic dynamic networks with known memberships, states and blockmodel.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::logit;
use crate::network::{DyadRecord, DynamicNetwork, NetworkParts};

/// Generator parameters. Coefficients are indexed `(m * K + k) * Jx + j`
/// with `j = 0` the intercept; every group has its own coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpPreset {
    pub name: String,
    pub k: usize,
    pub m: usize,
    /// K x K edge probabilities, row-major.
    pub b_probs: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Hidden state of each period (0-based).
    pub schedule: Vec<usize>,
    pub n_nodes: usize,
    pub rw_init_sd: f64,
    pub rw_step_sd: f64,
    pub directed: bool,
}

fn two_state_schedule(n_periods: usize, switch_after: usize) -> Vec<usize> {
    (0..n_periods).map(|t| usize::from(t >= switch_after)).collect()
}

/// `beta_m` given as per-group `(intercept, slope)` pairs.
fn pack_beta(states: &[[(f64, f64); 2]]) -> Vec<f64> {
    states
        .iter()
        .flat_map(|groups| groups.iter().flat_map(|&(a, b)| [a, b]))
        .collect()
}

impl DgpPreset {
    pub fn easy() -> Self {
        Self::base(
            "easy",
            vec![0.85, 0.01, 0.01, 0.99],
            pack_beta(&[[(-4.5, 0.0), (-4.5, 0.0)], [(-4.5, 0.0), (-4.5, 0.0)]]),
        )
    }

    pub fn medium() -> Self {
        Self::base(
            "medium",
            vec![0.65, 0.35, 0.20, 0.75],
            pack_beta(&[[(0.05, -0.75), (0.75, -1.0)], [(-0.05, -0.75), (0.55, 0.75)]]),
        )
    }

    pub fn hard() -> Self {
        Self::base(
            "hard",
            vec![0.65, 0.40, 0.50, 0.45],
            pack_beta(&[[(0.0, -0.75), (0.0, -1.0)], [(0.0, -0.75), (0.0, 0.75)]]),
        )
    }

    fn base(name: &str, b_probs: Vec<f64>, beta: Vec<f64>) -> Self {
        DgpPreset {
            name: name.into(),
            k: 2,
            m: 2,
            b_probs,
            beta,
            gamma: vec![0.1],
            schedule: two_state_schedule(9, 5),
            n_nodes: 100,
            rw_init_sd: 2f64.sqrt(),
            rw_step_sd: 1.0,
            directed: true,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "easy" => Ok(Self::easy()),
            "medium" => Ok(Self::medium()),
            "hard" => Ok(Self::hard()),
            other => Err(Error::InvalidSpec(format!(
                "unknown preset {other:?} (expected easy, medium or hard)"
            ))),
        }
    }

    pub fn n_periods(&self) -> usize {
        self.schedule.len()
    }

    /// Monadic columns including the intercept.
    pub fn jx(&self) -> usize {
        self.beta.len() / (self.m * self.k).max(1)
    }

    pub fn jd(&self) -> usize {
        self.gamma.len()
    }

    /// Same preset with `n` nodes and `t` periods; the state switch stays
    /// after the first `switch_after` periods.
    pub fn resized(mut self, n_nodes: usize, n_periods: usize, switch_after: usize) -> Self {
        self.n_nodes = n_nodes;
        self.schedule = two_state_schedule(n_periods, switch_after.min(n_periods));
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(format!("preset {}: {m}", self.name)));
        if self.k == 0 || self.m == 0 {
            return bad("K and M must be >= 1");
        }
        if self.b_probs.len() != self.k * self.k || self.b_probs.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return bad("B_probs must be K x K with entries in (0, 1)");
        }
        if self.beta.is_empty() || self.beta.len() % (self.m * self.k) != 0 {
            return bad("beta must have M * K * Jx entries");
        }
        if self.schedule.is_empty() || self.schedule.iter().any(|&s| s >= self.m) {
            return bad("schedule must cover every period with states < M");
        }
        if self.n_nodes < 2 {
            return bad("need at least 2 nodes");
        }
        if !(self.rw_init_sd >= 0.0 && self.rw_step_sd >= 0.0) {
            return bad("random-walk sds must be >= 0");
        }
        if !self.directed {
            for g in 0..self.k {
                for h in 0..g {
                    if self.b_probs[g * self.k + h] != self.b_probs[h * self.k + g] {
                        return bad("undirected generation needs a symmetric B");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn b_logits(&self) -> Vec<f64> {
        self.b_probs.iter().map(|&p| logit(p)).collect()
    }
}

/// Latent quantities behind a generated network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Membership per node-period slot (slots x K).
    pub pi: Vec<f64>,
    pub s: Vec<usize>,
    /// Sender / receiver groups per modeled dyad (for undirected output,
    /// those of the `p -> q` draw).
    pub z: Vec<usize>,
    pub w: Vec<usize>,
    pub b_probs: Vec<f64>,
}

/// Dirichlet draw computed in log space so that tiny concentrations do not
/// underflow to an all-zero vector.
fn dirichlet(rng: &mut ChaCha8Rng, alpha: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            let g: f64 = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            g.ln() + u.ln() / a
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn categorical(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

fn walk(rng: &mut ChaCha8Rng, n_periods: usize, init: &Normal<f64>, step: &Normal<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(n_periods);
    let mut cur = init.sample(rng);
    v.push(cur);
    for _ in 1..n_periods {
        cur += step.sample(rng);
        v.push(cur);
    }
    v
}

/// Draws a network from `preset`. Each non-intercept monadic column and
/// each dyadic column follows an independent Gaussian random walk.
pub fn generate(preset: &DgpPreset, seed: u64) -> Result<(DynamicNetwork, GroundTruth)> {
    preset.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, t_len, k, jx, jd) = (preset.n_nodes, preset.n_periods(), preset.k, preset.jx(), preset.jd());
    let init = Normal::new(0.0, preset.rw_init_sd).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let step = Normal::new(0.0, preset.rw_step_sd).map_err(|e| Error::InvalidSpec(e.to_string()))?;

    // x[node][col][t] for the non-intercept columns
    let x: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|_| (1..jx).map(|_| walk(&mut rng, t_len, &init, &step)).collect())
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n).cartesian_product(0..n).filter(|(p, q)| p != q).collect();
    let d: Vec<Vec<Vec<f64>>> = pairs
        .iter()
        .map(|_| (0..jd).map(|_| walk(&mut rng, t_len, &init, &step)).collect())
        .collect();

    let mut pi = Vec::with_capacity(n * t_len * k);
    let mut monadic = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let m = preset.schedule[t];
        let mut rows = Vec::with_capacity(n);
        for (node, xn) in x.iter().enumerate() {
            let row: Vec<f64> = std::iter::once(1.0).chain(xn.iter().map(|c| c[t])).collect();
            let alpha: Vec<f64> = (0..k)
                .map(|g| {
                    let b = &preset.beta[(m * k + g) * jx..(m * k + g + 1) * jx];
                    row.iter().zip(b).map(|(a, c)| a * c).sum::<f64>().exp()
                })
                .collect();
            pi.extend(dirichlet(&mut rng, &alpha));
            rows.push((node, row));
        }
        monadic.push(rows);
    }

    let b_logit = preset.b_logits();
    let mut dyads = Vec::new();
    let mut z = Vec::new();
    let mut w = Vec::new();
    for t in 0..t_len {
        let mut draws = vec![None; n * n];
        for (idx, &(p, q)) in pairs.iter().enumerate() {
            let zp = categorical(&mut rng, &pi[(t * n + p) * k..(t * n + p + 1) * k]);
            let wq = categorical(&mut rng, &pi[(t * n + q) * k..(t * n + q + 1) * k]);
            let dv: Vec<f64> = d[idx].iter().map(|c| c[t]).collect();
            let lin = b_logit[zp * k + wq] + dv.iter().zip(&preset.gamma).map(|(a, b)| a * b).sum::<f64>();
            let prob = 1.0 / (1.0 + (-lin).exp());
            let y = rng.random::<f64>() < prob;
            draws[p * n + q] = Some((zp, wq, y, dv));
        }
        for &(p, q) in &pairs {
            if !preset.directed && p > q {
                continue;
            }
            let (zp, wq, y, dv) = draws[p * n + q].clone().expect("drawn");
            let y = if preset.directed {
                y
            } else {
                y || draws[q * n + p].as_ref().expect("drawn").2
            };
            z.push(zp);
            w.push(wq);
            dyads.push(DyadRecord { t, p, q, y, d: dv });
        }
    }

    let parts = NetworkParts {
        directed: preset.directed,
        node_ids: (1..=n).map(|i| i.to_string()).collect(),
        period_labels: (1..=t_len as i64).collect(),
        x_names: std::iter::once("intercept".to_string())
            .chain((1..jx).map(|j| format!("x{j}")))
            .collect(),
        d_names: (1..=jd).map(|j| format!("d{j}")).collect(),
        monadic,
        dyads,
    };
    let net = DynamicNetwork::from_parts(parts)?;
    Ok((
        net,
        GroundTruth {
            pi,
            s: preset.schedule.clone(),
            z,
            w,
            b_probs: preset.b_probs.clone(),
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    /// Pearson correlation over all (node-period, group) entries.
    pub correlation: f64,
    /// Mean Euclidean distance per node-period.
    pub mean_l2: f64,
    /// Largest absolute blockmodel error in probability scale, if given.
    pub b_max_abs: Option<f64>,
    /// Estimated group `perm[g]` is matched to true group `g`.
    pub perm: Vec<usize>,
}

fn mean_l2(truth: &[f64], est: &[f64], k: usize, perm: &[usize]) -> f64 {
    let rows = truth.len() / k;
    let mut total = 0.0;
    for r in 0..rows {
        let d2: f64 = (0..k).map(|g| (truth[r * k + g] - est[r * k + perm[g]]).powi(2)).sum();
        total += d2.sqrt();
    }
    total / rows as f64
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Compares estimated memberships (and optionally blockmodel probabilities)
/// with the truth after the group relabeling that minimizes mean L2 error.
pub fn recovery_metrics(
    truth_pi: &[f64],
    est_pi: &[f64],
    k: usize,
    blockmodels: Option<(&[f64], &[f64])>,
) -> Result<RecoveryMetrics> {
    if truth_pi.len() != est_pi.len() || k == 0 || truth_pi.len() % k != 0 || truth_pi.is_empty() {
        return Err(Error::Dimension("membership arrays do not agree".into()));
    }
    if let Some((tb, eb)) = blockmodels {
        if tb.len() != k * k || eb.len() != k * k {
            return Err(Error::Dimension("blockmodels must be K x K".into()));
        }
    }
    let perm = (0..k)
        .permutations(k)
        .min_by(|a, b| mean_l2(truth_pi, est_pi, k, a).total_cmp(&mean_l2(truth_pi, est_pi, k, b)))
        .expect("k >= 1");
    let aligned: Vec<f64> = (0..truth_pi.len()).map(|i| est_pi[i - i % k + perm[i % k]]).collect();
    let b_max_abs = blockmodels.map(|(tb, eb)| {
        (0..k * k)
            .map(|i| (tb[i] - eb[perm[i / k] * k + perm[i % k]]).abs())
            .fold(0.0, f64::max)
    });
    Ok(RecoveryMetrics {
        correlation: pearson(truth_pi, &aligned),
        mean_l2: mean_l2(truth_pi, est_pi, k, &perm),
        b_max_abs,
        perm,
    })
}
