#![allow(dead_code)]

pub mod oracles;

use dynmmsbm::network::{DyadRecord, NetworkParts};
use dynmmsbm::{DynamicNetwork, GlobalStats, Hyperparams, ModelSpec, VariationalParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Complete network over `n` nodes and `t` periods with an intercept plus
/// `jx - 1` random monadic columns and `jd` random dyadic columns.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize, t: usize, directed: bool, jx: usize, jd: usize, density: f64) -> DynamicNetwork {
    let mut x_names = vec!["intercept".to_string()];
    x_names.extend((1..jx).map(|j| format!("x{j}")));
    let monadic = (0..t)
        .map(|_| {
            (0..n)
                .map(|i| {
                    let mut row = vec![1.0];
                    row.extend((1..jx).map(|_| 0.5 * normal(rng)));
                    (i, row)
                })
                .collect()
        })
        .collect();
    let mut dyads = Vec::new();
    for tt in 0..t {
        for p in 0..n {
            for q in 0..n {
                if p == q || (!directed && q < p) {
                    continue;
                }
                dyads.push(DyadRecord {
                    t: tt,
                    p,
                    q,
                    y: rng.random::<f64>() < density,
                    d: (0..jd).map(|_| normal(rng)).collect(),
                });
            }
        }
    }
    DynamicNetwork::from_parts(NetworkParts {
        directed,
        node_ids: (0..n).map(|i| format!("n{i}")).collect(),
        period_labels: (0..t as i64).map(|y| 2000 + y).collect(),
        x_names,
        d_names: (0..jd).map(|j| format!("d{j}")).collect(),
        monadic,
        dyads,
    })
    .unwrap()
}

pub fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

pub fn random_vparams(rng: &mut ChaCha8Rng, net: &DynamicNetwork, k: usize, m: usize) -> VariationalParams {
    let mut vp = VariationalParams::uniform(net, k, m);
    for i in 0..net.n_dyads() {
        vp.phi[i * k..(i + 1) * k].copy_from_slice(&random_simplex(rng, k));
        vp.psi[i * k..(i + 1) * k].copy_from_slice(&random_simplex(rng, k));
    }
    for t in 0..net.n_periods() {
        vp.kappa_row_mut(t).copy_from_slice(&random_simplex(rng, m));
    }
    vp
}

pub fn random_hyper(rng: &mut ChaCha8Rng, spec: &ModelSpec, net: &DynamicNetwork) -> Hyperparams {
    let mut h = Hyperparams::for_network(spec, net);
    for g in 0..spec.k {
        for hh in 0..spec.k {
            if spec.directed || g <= hh {
                let v = -1.0 + normal(rng);
                h.set_b(g, hh, v);
                h.set_b(hh, g, if spec.directed { h.b(hh, g) } else { v });
            }
        }
    }
    for m in 0..spec.m {
        for k in 1..spec.k {
            for j in 0..h.jx {
                h.set_beta(m, k, j, 0.5 * normal(rng));
            }
        }
    }
    for g in h.gamma.iter_mut() {
        *g = 0.5 * normal(rng);
    }
    h
}

pub fn stats_of(vp: &VariationalParams, net: &DynamicNetwork) -> GlobalStats {
    vp.expected_stats(net)
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn adjusted_rand(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![vec![0.0f64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1.0;
    }
    let c2 = |n: f64| n * (n - 1.0) / 2.0;
    let index: f64 = table.iter().flatten().map(|&n| c2(n)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let expected = rows * cols / c2(a.len() as f64);
    let max = (rows + cols) / 2.0;
    (index - expected) / (max - expected)
}

/// Undirected network whose `k` hidden blocks connect with `p_in` inside and
/// `p_out` across.
pub fn planted_partition(n: usize, t: usize, k: usize, p_in: f64, p_out: f64, seed: u64) -> (DynamicNetwork, Vec<usize>) {
    let mut r = rng(seed);
    let mut blocks: Vec<usize> = (0..n).map(|i| i % k).collect();
    blocks.shuffle(&mut r);
    let mut dyads = Vec::new();
    for tt in 0..t {
        for p in 0..n {
            for q in (p + 1)..n {
                let prob = if blocks[p] == blocks[q] { p_in } else { p_out };
                dyads.push(DyadRecord { t: tt, p, q, y: r.random::<f64>() < prob, d: vec![] });
            }
        }
    }
    let net = DynamicNetwork::from_parts(NetworkParts {
        directed: false,
        node_ids: (0..n).map(|i| format!("v{i}")).collect(),
        period_labels: (0..t as i64).collect(),
        x_names: vec!["intercept".into()],
        d_names: vec![],
        monadic: (0..t).map(|_| (0..n).map(|i| (i, vec![1.0])).collect()).collect(),
        dyads,
    })
    .unwrap();
    (net, blocks)
}

/// Complete network over `n` nodes with an intercept only; `edges` lists
/// `(period, sender, receiver)` triples.
pub fn network_from_edges(n: usize, t: usize, directed: bool, edges: &[(usize, usize, usize)]) -> DynamicNetwork {
    let mut dyads = Vec::new();
    for tt in 0..t {
        for p in 0..n {
            for q in 0..n {
                if p == q || (!directed && q < p) {
                    continue;
                }
                let y = edges
                    .iter()
                    .any(|&(et, a, b)| et == tt && ((a, b) == (p, q) || (!directed && (b, a) == (p, q))));
                dyads.push(DyadRecord { t: tt, p, q, y, d: vec![] });
            }
        }
    }
    DynamicNetwork::from_parts(NetworkParts {
        directed,
        node_ids: (0..n).map(|i| format!("v{i}")).collect(),
        period_labels: (0..t as i64).collect(),
        x_names: vec!["intercept".into()],
        d_names: vec![],
        monadic: (0..t).map(|_| (0..n).map(|i| (i, vec![1.0])).collect()).collect(),
        dyads,
    })
    .unwrap()
}
