use dynmmsbm::model::LatentState;
use dynmmsbm::network::NetworkParts;
use dynmmsbm::{DynamicNetwork, Hyperparams, ModelSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::rng;

/// Joint probability of one latent configuration computed by sequential
/// urn draws: each indicator is predicted from the counts before it, which
/// integrates the Dirichlet memberships and transition rows exactly.
pub fn urn_log_joint(net: &DynamicNetwork, lat: &LatentState, hyper: &Hyperparams, spec: &ModelSpec) -> f64 {
    let (k, m) = (spec.k, spec.m);
    let mut lp = -(m as f64).ln();
    let mut trans = vec![0.0; m * m];
    for t in 1..lat.s.len() {
        let (a, b) = (lat.s[t - 1], lat.s[t]);
        let row: f64 = trans[a * m..(a + 1) * m].iter().sum();
        lp += ((spec.eta + trans[a * m + b]) / (m as f64 * spec.eta + row)).ln();
        trans[a * m + b] += 1.0;
    }
    let mut counts = vec![vec![0.0; k]; net.n_slots()];
    for (i, dy) in net.dyads().iter().enumerate() {
        for (slot, g) in [(dy.p_slot, lat.z[i]), (dy.q_slot, lat.w[i])] {
            let x = net.x_row(slot);
            let s = lat.s[dy.t];
            let alpha: Vec<f64> = (0..k)
                .map(|kk| (0..x.len()).map(|j| x[j] * hyper.beta(s, kk, j)).sum::<f64>().exp())
                .collect();
            let total: f64 = alpha.iter().sum::<f64>() + counts[slot].iter().sum::<f64>();
            lp += ((alpha[g] + counts[slot][g]) / total).ln();
            counts[slot][g] += 1.0;
        }
        let lin = hyper.b(lat.z[i], lat.w[i]) + net.d_row(i).iter().zip(&hyper.gamma).map(|(a, b)| a * b).sum::<f64>();
        let theta = 1.0 / (1.0 + (-lin).exp());
        lp += if dy.y { theta.ln() } else { (1.0 - theta).ln() };
    }
    lp
}

pub fn state_paths(m: usize, t: usize) -> Vec<Vec<usize>> {
    (0..m.pow(t as u32))
        .map(|mut c| {
            (0..t)
                .map(|_| {
                    let s = c % m;
                    c /= m;
                    s
                })
                .collect()
        })
        .collect()
}

pub fn rel_err_log(a: f64, b: f64) -> f64 {
    ((a - b).exp() - 1.0).abs()
}

pub fn fd4(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
}

/// Ridge-penalized logistic regression by iteratively reweighted least
/// squares; returns the estimate and the inverse penalized information.
pub fn penalized_irls(x: &DMatrix<f64>, y: &[f64], prior_sd: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let p = x.ncols();
    let mut beta = DVector::zeros(p);
    let penalty = DMatrix::from_diagonal(&DVector::from_iterator(p, prior_sd.iter().map(|s| 1.0 / (s * s))));
    for _ in 0..100 {
        let eta = x * &beta;
        let mu: Vec<f64> = eta.iter().map(|e| 1.0 / (1.0 + (-e).exp())).collect();
        let w = DVector::from_iterator(mu.len(), mu.iter().map(|m| m * (1.0 - m)));
        let resid = DVector::from_iterator(mu.len(), y.iter().zip(&mu).map(|(a, b)| a - b));
        let grad = x.transpose() * resid - &penalty * &beta;
        let info = x.transpose() * DMatrix::from_diagonal(&w) * x + &penalty;
        let step = info.clone().lu().solve(&grad).unwrap();
        beta += &step;
        if step.amax() < 1e-13 {
            break;
        }
    }
    let eta = x * &beta;
    let w = DVector::from_iterator(eta.len(), eta.iter().map(|e| {
        let m = 1.0 / (1.0 + (-e).exp());
        m * (1.0 - m)
    }));
    let info = x.transpose() * DMatrix::from_diagonal(&w) * x + penalty;
    (beta, info.try_inverse().unwrap())
}

pub fn with_logistic_edges(net: &DynamicNetwork, intercept: f64, gamma: &[f64], seed: u64) -> DynamicNetwork {
    let mut r = rng(seed);
    let mut parts: NetworkParts = net.to_parts();
    for d in parts.dyads.iter_mut() {
        let lin = intercept + d.d.iter().zip(gamma).map(|(a, b)| a * b).sum::<f64>();
        d.y = r.random::<f64>() < 1.0 / (1.0 + (-lin).exp());
    }
    DynamicNetwork::from_parts(parts).unwrap()
}

pub fn brute_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let (mut n1, mut n0) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        if li {
            n1 += 1.0;
        } else {
            n0 += 1.0;
        }
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / (n1 * n0)
}
