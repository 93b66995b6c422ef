mod common;

use common::oracles::*;
use common::*;
use dynmmsbm::model::{log_collapsed_posterior, LatentState};
use dynmmsbm::predict::auroc;
use dynmmsbm::svi::{dyad_inclusion_prob, sample_minibatch};
use dynmmsbm::vem::{elbo, hyper_gradient};
use dynmmsbm::{fit_vem, DynamicNetwork, Hyperparams, ModelSpec, VemConfig};
use nalgebra::DMatrix;
use rand::Rng;

#[test]
fn collapsed_posterior_matches_urn_enumeration() {
    let cases = [(3, false, true), (2, true, true), (4, true, false), (3, true, false), (4, false, false)];
    for (seed, &(n, directed, exhaustive)) in cases.iter().enumerate() {
        let mut r = rng(100 + seed as u64);
        let net = random_network(&mut r, n, 2, directed, 2, 1, 0.4);
        let spec = ModelSpec::new(2, 2, directed);
        let hyper = random_hyper(&mut r, &spec, &net);
        let nd = net.n_dyads();
        let paths = state_paths(2, 2);
        let configs: Vec<(Vec<usize>, Vec<usize>)> = if exhaustive {
            (0..1usize << (2 * nd))
                .map(|c| ((0..nd).map(|i| (c >> i) & 1).collect(), (0..nd).map(|i| (c >> (nd + i)) & 1).collect()))
                .collect()
        } else {
            (0..300)
                .map(|_| {
                    let z = (0..nd).map(|_| r.random_range(0..2)).collect();
                    let w = (0..nd).map(|_| r.random_range(0..2)).collect();
                    (z, w)
                })
                .collect()
        };
        let mut lib_all = Vec::new();
        let mut oracle_all = Vec::new();
        for (z, w) in configs {
            let mut lib = Vec::new();
            let mut oracle = Vec::new();
            for s in &paths {
                let lat = LatentState { s: s.clone(), z: z.clone(), w: w.clone() };
                lib.push(log_collapsed_posterior(&net, &lat, &hyper, &spec).unwrap());
                oracle.push(urn_log_joint(&net, &lat, &hyper, &spec));
            }
            let (a, b) = (log_sum_exp(&lib), log_sum_exp(&oracle));
            assert!(rel_err_log(a, b) <= 1e-8, "seed {seed}: {a} vs {b}");
            lib_all.push(a);
            oracle_all.push(b);
        }
        let (a, b) = (log_sum_exp(&lib_all), log_sum_exp(&oracle_all));
        assert!(rel_err_log(a, b) <= 1e-8, "seed {seed} total: {a} vs {b}");
        if exhaustive {
            assert!(b < 0.0);
        }
    }
}

#[test]
fn exhaustive_sum_is_the_evidence_of_a_tiny_network() {
    // summing the joint over every labeling and both possible edge values
    // of a single dyad yields a normalized distribution
    let mut r = rng(7);
    let net = random_network(&mut r, 2, 1, false, 2, 1, 0.5);
    let spec = ModelSpec::new(2, 2, false);
    let hyper = random_hyper(&mut r, &spec, &net);
    let mut total = Vec::new();
    for y in [false, true] {
        let mut parts = net.to_parts();
        parts.dyads[0].y = y;
        let net_y = DynamicNetwork::from_parts(parts).unwrap();
        for c in 0..4 {
            for s in 0..2 {
                let lat = LatentState { s: vec![s], z: vec![c & 1], w: vec![c >> 1] };
                total.push(log_collapsed_posterior(&net_y, &lat, &hyper, &spec).unwrap());
            }
        }
    }
    assert!(log_sum_exp(&total).abs() < 1e-12);
}

fn assert_close(analytic: f64, numeric: f64, what: &str) {
    let err = (analytic - numeric).abs() / numeric.abs().max(1.0);
    assert!(err <= 1e-6, "{what}: analytic {analytic} numeric {numeric}");
}

#[test]
fn hyper_gradients_match_finite_differences() {
    for seed in 0..20u64 {
        let mut r = rng(200 + seed);
        let directed = seed % 2 == 0;
        let k = 2 + (seed % 2) as usize;
        let m = 1 + (seed % 3 == 0) as usize;
        let n = 4 + (seed % 3) as usize;
        let jd = 1 + (seed % 2) as usize;
        let net = random_network(&mut r, n, 3, directed, 2, jd, 0.3);
        let spec = ModelSpec::new(k, m, directed);
        let hyper = random_hyper(&mut r, &spec, &net);
        let vp = random_vparams(&mut r, &net, k, m);
        let stats = stats_of(&vp, &net);
        let grad = hyper_gradient(&net, &vp, &stats, &hyper, &spec).unwrap();
        let value = |h: &Hyperparams| elbo(&net, &vp, &stats, h, &spec).unwrap().value();
        let h = 1e-4;
        for g in 0..k {
            for hh in 0..k {
                if !directed && hh < g {
                    continue;
                }
                let f = |v: f64| {
                    let mut p = hyper.clone();
                    p.set_b(g, hh, v);
                    if !directed {
                        p.set_b(hh, g, v);
                    }
                    value(&p)
                };
                assert_close(grad.b[g * k + hh], fd4(f, hyper.b(g, hh), h), &format!("seed {seed} B[{g}][{hh}]"));
            }
        }
        for j in 0..jd {
            let f = |v: f64| {
                let mut p = hyper.clone();
                p.gamma[j] = v;
                value(&p)
            };
            assert_close(grad.gamma[j], fd4(f, hyper.gamma[j], h), &format!("seed {seed} gamma[{j}]"));
        }
        for s in 0..m {
            for kk in 1..k {
                for j in 0..hyper.jx {
                    let idx = hyper.beta_index(s, kk, j);
                    let f = |v: f64| {
                        let mut p = hyper.clone();
                        p.beta[idx] = v;
                        value(&p)
                    };
                    assert_close(grad.beta[idx], fd4(f, hyper.beta[idx], h), &format!("seed {seed} beta[{s}][{kk}][{j}]"));
                }
            }
            for j in 0..hyper.jx {
                assert_eq!(grad.beta[hyper.beta_index(s, 0, j)], 0.0);
            }
        }
    }
}

#[test]
fn single_group_fit_is_penalized_logistic_regression() {
    let mut r = rng(31);
    let base = random_network(&mut r, 25, 3, true, 1, 2, 0.5);
    let net = with_logistic_edges(&base, -1.0, &[0.8, -0.5], 32);
    let spec = ModelSpec::new(1, 1, true);
    let init = dynmmsbm::init::initialize(&net, &spec, &Default::default()).unwrap();
    let cfg = VemConfig { compute_se: true, se_samples: 2, ..VemConfig::default() };
    let fit = fit_vem(&net, &spec, &init, &cfg).unwrap();
    assert!(fit.converged);

    let nd = net.n_dyads();
    let x = DMatrix::from_fn(nd, 3, |i, j| if j == 0 { 1.0 } else { net.d_row(i)[j - 1] });
    let y: Vec<f64> = net.dyads().iter().map(|d| if d.y { 1.0 } else { 0.0 }).collect();
    let sds = [spec.prior_b.sd, spec.prior_gamma.sd, spec.prior_gamma.sd];
    let (coef, cov) = penalized_irls(&x, &y, &sds);

    assert!((fit.hyper.b[0] - coef[0]).abs() < 1e-4);
    for j in 0..2 {
        assert!((fit.hyper.gamma[j] - coef[j + 1]).abs() < 1e-4, "gamma {j}: {} vs {}", fit.hyper.gamma[j], coef[j + 1]);
    }
    let se = fit.se.as_ref().unwrap().as_hyper(1, 1, net.jx(), net.jd(), true);
    let oracle_se = [cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt(), cov[(2, 2)].sqrt()];
    let fitted_se = [se.b[0], se.gamma[0], se.gamma[1]];
    for (a, b) in fitted_se.iter().zip(&oracle_se) {
        assert!((a / b - 1.0).abs() < 0.10, "se {a} vs {b}");
    }
}

#[test]
fn auroc_equals_pairwise_count() {
    let mut r = rng(9);
    for case in 0..100 {
        let n = r.random_range(2..300);
        let discrete = case % 3 == 0;
        let mut labels: Vec<bool> = (0..n).map(|_| r.random::<f64>() < 0.3).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = labels
            .iter()
            .map(|&l| {
                let s = r.random::<f64>() + if l { 0.2 } else { 0.0 };
                if discrete {
                    (s * 5.0).floor() / 5.0
                } else {
                    s
                }
            })
            .collect();
        assert_eq!(auroc(&scores, &labels).unwrap().value, brute_auroc(&scores, &labels), "case {case}");
    }
}

fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).map(|i| (n - i) as f64 / (k - i) as f64).product()
}

#[test]
fn inclusion_probability_is_hypergeometric() {
    for n in 2..30 {
        for b in 1..=n {
            let oracle = 1.0 - choose(n - 2, b) / choose(n, b);
            assert!((dyad_inclusion_prob(n, b) - oracle).abs() < 1e-12, "n {n} b {b}");
        }
    }
    let mut r = rng(3);
    let net = random_network(&mut r, 9, 1, true, 1, 0, 0.2);
    let draws = 20_000;
    let mut hits = vec![0usize; net.n_dyads()];
    for _ in 0..draws {
        for i in sample_minibatch(&net, 3, &mut r).unwrap().dyads {
            hits[i] += 1;
        }
    }
    let p = dyad_inclusion_prob(9, 3);
    let sd = (p * (1.0 - p) / draws as f64).sqrt();
    for h in hits {
        assert!((h as f64 / draws as f64 - p).abs() < 5.0 * sd);
    }
}
