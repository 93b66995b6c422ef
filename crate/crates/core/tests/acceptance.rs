mod common;

use std::fs;
use std::process::Command;
use std::time::Instant;

use common::oracles::*;
use common::*;
use dynmmsbm::init::{initialize, InitConfig};
use dynmmsbm::model::{log_collapsed_posterior, logistic, LatentState};
use dynmmsbm::network::NetworkParts;
use dynmmsbm::predict::auroc;
use dynmmsbm::simulate::{generate, recovery_metrics, DgpPreset, GroundTruth};
use dynmmsbm::svi::{fit_svi, fit_svi_observed, heldout_loglik, split_holdout, SviConfig};
use dynmmsbm::vem::{elbo, fit_vem_observed, hyper_gradient};
use dynmmsbm::{fit_vem, DynamicNetwork, FittedModel, Hyperparams, ModelSpec, VemConfig};
use nalgebra::DMatrix;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn fit_preset(preset: &DgpPreset, seed: u64) -> (DynamicNetwork, GroundTruth, FittedModel) {
    let (net, truth) = generate(preset, seed).unwrap();
    let spec = ModelSpec::new(preset.k, preset.m, preset.directed);
    let init = initialize(&net, &spec, &InitConfig { seed, ..InitConfig::default() }).unwrap();
    let fit = fit_vem(&net, &spec, &init, &VemConfig { seed, ..VemConfig::default() }).unwrap();
    (net, truth, fit)
}

fn b_probs(fit: &FittedModel) -> Vec<f64> {
    let k = fit.spec.k;
    (0..k * k).map(|i| logistic(fit.hyper.b(i / k, i % k))).collect()
}

fn marginalization() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let mut r = rng(500 + seed);
        let n = 2 + (seed % 3) as usize;
        let directed = seed % 2 == 0;
        let net = random_network(&mut r, n, 2, directed, 2, 1, 0.4);
        let spec = ModelSpec::new(2, 2, directed);
        let hyper = random_hyper(&mut r, &spec, &net);
        let nd = net.n_dyads();
        let exhaustive = 2 * nd <= 16;
        let configs: Vec<(Vec<usize>, Vec<usize>)> = if exhaustive {
            (0..1usize << (2 * nd))
                .map(|c| ((0..nd).map(|i| (c >> i) & 1).collect(), (0..nd).map(|i| (c >> (nd + i)) & 1).collect()))
                .collect()
        } else {
            (0..2000)
                .map(|_| ((0..nd).map(|_| r.random_range(0..2)).collect(), (0..nd).map(|_| r.random_range(0..2)).collect()))
                .collect()
        };
        let (mut lib, mut oracle) = (Vec::new(), Vec::new());
        for (z, w) in configs {
            for s in state_paths(2, 2) {
                let lat = LatentState { s, z: z.clone(), w: w.clone() };
                lib.push(log_collapsed_posterior(&net, &lat, &hyper, &spec).unwrap());
                oracle.push(urn_log_joint(&net, &lat, &hyper, &spec));
            }
        }
        worst = worst.max(rel_err_log(log_sum_exp(&lib), log_sum_exp(&oracle)));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-8 && secs < 10.0, format!("max relative error {worst:.2e} in {secs:.1}s"))
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut r = rng(600 + seed);
        let directed = seed % 2 == 1;
        let (k, m) = (2 + (seed % 2) as usize, 1 + (seed % 3 == 0) as usize);
        let net = random_network(&mut r, 4 + (seed % 3) as usize, 3, directed, 2, 2, 0.3);
        let spec = ModelSpec::new(k, m, directed);
        let hyper = random_hyper(&mut r, &spec, &net);
        let vp = random_vparams(&mut r, &net, k, m);
        let stats = stats_of(&vp, &net);
        let grad = hyper_gradient(&net, &vp, &stats, &hyper, &spec).unwrap();
        let value = |h: &Hyperparams| elbo(&net, &vp, &stats, h, &spec).unwrap().value();
        let mut check = |analytic: f64, set: &dyn Fn(&mut Hyperparams, f64), x: f64| {
            let numeric = fd4(
                |v| {
                    let mut p = hyper.clone();
                    set(&mut p, v);
                    value(&p)
                },
                x,
                1e-4,
            );
            worst = worst.max((analytic - numeric).abs() / numeric.abs().max(1.0));
        };
        for g in 0..k {
            for h in 0..k {
                if directed || g <= h {
                    let set = |p: &mut Hyperparams, v: f64| {
                        p.set_b(g, h, v);
                        if !directed {
                            p.set_b(h, g, v);
                        }
                    };
                    check(grad.b[g * k + h], &set, hyper.b(g, h));
                }
            }
        }
        for j in 0..net.jd() {
            check(grad.gamma[j], &|p: &mut Hyperparams, v| p.gamma[j] = v, hyper.gamma[j]);
        }
        for s in 0..m {
            for g in 1..k {
                for j in 0..hyper.jx {
                    let idx = hyper.beta_index(s, g, j);
                    check(grad.beta[idx], &|p: &mut Hyperparams, v| p.beta[idx] = v, hyper.beta[idx]);
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-6 && secs < 30.0, format!("max relative error {worst:.2e} in {secs:.1}s"))
}

fn monotone_elbo() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 1..=3u64 {
        let (net, _) = generate(&DgpPreset::medium().resized(40, 5, 3), seed).unwrap();
        let spec = ModelSpec::new(2, 2, true);
        let init = initialize(&net, &spec, &InitConfig { seed, ..InitConfig::default() }).unwrap();
        let cfg = VemConfig { max_iter: 20, tol_hyper: 1e-300, seed, ..VemConfig::default() };
        let fit = fit_vem(&net, &spec, &init, &cfg).unwrap();
        assert_eq!(fit.trace.len(), 20);
        for w in fit.trace.windows(2) {
            worst = worst.max(w[0] - w[1]);
        }
    }
    outcome(worst <= 1e-6, format!("largest decrease {worst:.2e} over 3 x 20 iterations"))
}

fn recovery() -> Outcome {
    let start = Instant::now();
    let mut easy_corr = Vec::new();
    let mut easy_b = Vec::new();
    let mut hard_corr = Vec::new();
    for seed in 1..=10u64 {
        for (name, preset) in [("easy", DgpPreset::easy()), ("hard", DgpPreset::hard())] {
            let (_, truth, fit) = fit_preset(&preset, seed);
            let est_b = b_probs(&fit);
            let rm = recovery_metrics(&truth.pi, &fit.pi_hat, 2, Some((&truth.b_probs, &est_b))).unwrap();
            if name == "easy" {
                easy_corr.push(rm.correlation);
                easy_b.push(rm.b_max_abs.unwrap());
            } else {
                hard_corr.push(rm.correlation);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let (ec, eb, hc) = (median(easy_corr), median(easy_b), median(hard_corr));
    outcome(
        ec >= 0.95 && eb <= 0.08 && hc >= 0.90 && secs < 900.0,
        format!("easy correlation {ec:.4}, easy blockmodel error {eb:.4}, hard correlation {hc:.4}, {secs:.0}s"),
    )
}

struct MediumRun {
    net: DynamicNetwork,
    truth: GroundTruth,
    fit: FittedModel,
}

fn medium_runs(n: u64) -> Vec<MediumRun> {
    (1..=n)
        .map(|seed| {
            let (net, truth, fit) = fit_preset(&DgpPreset::medium(), seed);
            MediumRun { net, truth, fit }
        })
        .collect()
}

fn changepoint(runs: &[MediumRun]) -> Outcome {
    let hits = runs[..10]
        .iter()
        .filter(|r| {
            let s = r.fit.modal_states();
            s[4] != s[5] && s[..5].iter().all(|&v| v == s[0]) && s[5..].iter().all(|&v| v == s[5])
        })
        .count();
    outcome(hits >= 8, format!("{hits}/10 seeds switch only between periods 5 and 6"))
}

fn single_period(net: &DynamicNetwork, t: usize) -> DynamicNetwork {
    let parts = net.to_parts();
    DynamicNetwork::from_parts(NetworkParts {
        directed: parts.directed,
        node_ids: parts.node_ids,
        period_labels: vec![parts.period_labels[t]],
        x_names: vec![parts.x_names[0].clone()],
        d_names: vec![],
        monadic: vec![parts.monadic[t].iter().map(|(i, _)| (*i, vec![1.0])).collect()],
        dyads: parts
            .dyads
            .into_iter()
            .filter(|d| d.t == t)
            .map(|mut d| {
                d.t = 0;
                d.d.clear();
                d
            })
            .collect(),
    })
    .unwrap()
}

fn static_error(run: &MediumRun, seed: u64) -> f64 {
    let (net, k) = (&run.net, 2);
    let mut total = 0.0;
    for t in 0..net.n_periods() {
        let one = single_period(net, t);
        let spec = ModelSpec::new(k, 1, net.directed());
        let init = initialize(&one, &spec, &InitConfig { seed, ..InitConfig::default() }).unwrap();
        let fit = fit_vem(&one, &spec, &init, &VemConfig { seed, ..VemConfig::default() }).unwrap();
        let slots = net.period_slots(t);
        let truth = &run.truth.pi[slots.start * k..slots.end * k];
        let rm = recovery_metrics(truth, &fit.pi_hat, k, None).unwrap();
        total += rm.mean_l2 * slots.len() as f64;
    }
    total / net.n_slots() as f64
}

fn dynamic_vs_static(runs: &[MediumRun]) -> Outcome {
    let mut dynamic = Vec::new();
    let mut fixed = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        dynamic.push(recovery_metrics(&run.truth.pi, &run.fit.pi_hat, 2, None).unwrap().mean_l2);
        fixed.push(static_error(run, i as u64 + 1));
    }
    let (d, s) = (median(dynamic), median(fixed));
    outcome(d < s, format!("median L2 error {d:.4} dynamic vs {s:.4} per-period, {} replicates", runs.len()))
}

fn svi_validity() -> Outcome {
    let (net, _) = generate(&DgpPreset::medium(), 7).unwrap();
    let spec = ModelSpec::new(2, 2, true);
    let init = initialize(&net, &spec, &InitConfig { seed: 7, ..InitConfig::default() }).unwrap();

    let mut vem_iterates = Vec::new();
    let cfg = VemConfig { max_iter: 3, tol_hyper: 1e-300, ..VemConfig::default() };
    fit_vem_observed(&net, &spec, &init, &cfg, |r| vem_iterates.push(r.hyper.clone())).unwrap();
    let full = split_holdout(&net, 0.0, 7).unwrap();
    let unit = SviConfig {
        batch_nodes: net.n_nodes(),
        constant_rho: Some(1.0),
        holdout_frac: 0.0,
        max_steps: 3,
        ..SviConfig::default()
    };
    let mut svi_iterates = Vec::new();
    fit_svi_observed(&full, &spec, &init, &unit, |r| svi_iterates.push(r.hyper.clone())).unwrap();
    let gap = vem_iterates
        .iter()
        .zip(&svi_iterates)
        .map(|(a, b)| a.max_abs_diff(b))
        .fold(0.0, f64::max);
    let matched = vem_iterates.len() == 3 && svi_iterates.len() == 3 && gap <= 1e-8;

    let split = split_holdout(&net, 0.05, 7).unwrap();
    let init = initialize(&split.train, &spec, &InitConfig { seed: 7, ..InitConfig::default() }).unwrap();
    let start = Instant::now();
    let batch = fit_vem(&split.train, &spec, &init, &VemConfig { seed: 7, ..VemConfig::default() }).unwrap();
    let batch_secs = start.elapsed().as_secs_f64();
    let batch_ll = heldout_loglik(&split.full, &split.heldout, &batch.pi_hat, &batch.hyper);
    let svi_cfg = SviConfig {
        batch_nodes: 20,
        holdout_frac: 0.05,
        tol_holdout: 1e-5,
        patience: 100,
        max_steps: 400,
        seed: 7,
        ..SviConfig::default()
    };
    let start = Instant::now();
    let svi = fit_svi(&split, &spec, &init, &svi_cfg).unwrap();
    let svi_secs = start.elapsed().as_secs_f64();
    let svi_ll = heldout_loglik(&split.full, &split.heldout, &svi.pi_hat, &svi.hyper);
    let rel = (svi_ll - batch_ll).abs() / batch_ll.abs();
    let ratio = svi_secs / batch_secs;
    outcome(
        matched && rel <= 0.02 && ratio < 2.0,
        format!(
            "unit-step gap {gap:.1e}; held-out {svi_ll:.4} vs {batch_ll:.4} ({:.2}%), time {svi_secs:.1}s vs {batch_secs:.1}s",
            100.0 * rel
        ),
    )
}

fn degenerate_model() -> Outcome {
    let mut r = rng(41);
    let base = random_network(&mut r, 30, 3, true, 1, 2, 0.5);
    let net = with_logistic_edges(&base, -0.8, &[0.6, -0.4], 42);
    let spec = ModelSpec::new(1, 1, true);
    let init = initialize(&net, &spec, &InitConfig::default()).unwrap();
    let fit = fit_vem(&net, &spec, &init, &VemConfig { compute_se: true, se_samples: 2, ..VemConfig::default() }).unwrap();
    let nd = net.n_dyads();
    let x = DMatrix::from_fn(nd, 3, |i, j| if j == 0 { 1.0 } else { net.d_row(i)[j - 1] });
    let y: Vec<f64> = net.dyads().iter().map(|d| if d.y { 1.0 } else { 0.0 }).collect();
    let (coef, cov) = penalized_irls(&x, &y, &[spec.prior_b.sd, spec.prior_gamma.sd, spec.prior_gamma.sd]);
    let coef_gap = (0..2).map(|j| (fit.hyper.gamma[j] - coef[j + 1]).abs()).fold(0.0, f64::max);
    let se = fit.se.as_ref().unwrap().as_hyper(1, 1, net.jx(), net.jd(), true);
    let se_gap = (0..2)
        .map(|j| (se.gamma[j] / cov[(j + 1, j + 1)].sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        coef_gap <= 1e-4 && se_gap < 0.10,
        format!("gamma gap {coef_gap:.1e}, standard-error gap {:.2}%", 100.0 * se_gap),
    )
}

fn auroc_unit() -> Outcome {
    let mut r = rng(77);
    let mut equal = 0;
    for case in 0..100 {
        let n = r.random_range(2..200);
        let mut labels: Vec<bool> = (0..n).map(|_| r.random::<f64>() < 0.4).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = labels
            .iter()
            .map(|&l| {
                let s = r.random::<f64>() + if l { 0.3 } else { 0.0 };
                if case % 2 == 0 {
                    (s * 4.0).round()
                } else {
                    s
                }
            })
            .collect();
        equal += usize::from(auroc(&scores, &labels).unwrap().value == brute_auroc(&scores, &labels));
    }
    outcome(equal == 100, format!("{equal}/100 exact matches"))
}

fn determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_dynmmsbm");
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let status = Command::new(exe)
        .args(["simulate", "--seed", "5", "--preset", "medium", "--nodes", "30", "--periods", "5", "--switch-after", "3"])
        .arg("--out")
        .arg(&data)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let runs = [
        vec!["--engine", "vem", "--threads", "1"],
        vec!["--engine", "vem", "--threads", "2", "--se", "--se-samples", "3"],
        vec!["--engine", "svi", "--threads", "1", "--batch-nodes", "8", "--max-steps", "40"],
        vec!["--engine", "svi", "--threads", "2", "--batch-nodes", "8", "--max-steps", "40"],
    ];
    let mut same = 0;
    for (i, extra) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("fit{i}-{rep}"));
            let res = Command::new(exe)
                .args(["fit", "--seed", "11", "-k", "2", "-m", "2", "--max-iter", "40"])
                .arg("--data")
                .arg(&data)
                .args(extra)
                .arg("--out")
                .arg(&out)
                .output()
                .unwrap();
            assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
            outputs.push(fs::read(out.join("metrics.json")).unwrap());
        }
        same += usize::from(outputs[0] == outputs[1]);
    }
    outcome(same == runs.len(), format!("{same}/{} configurations bit-identical", runs.len()))
}

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |c: usize| only.is_empty() || only.contains(&c);
    let mut lines = Vec::new();
    let mut record = |c: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(c) {
            return;
        }
        let start = Instant::now();
        let o = f();
        let line = format!(
            "criterion {c:>2} {name}: {} ({}; {:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        println!("{line}");
        lines.push((o.pass, line));
    };
    record(1, "marginalization oracle", &mut marginalization);
    record(2, "gradient suite", &mut gradients);
    record(3, "ELBO monotonicity", &mut monotone_elbo);
    record(4, "recovery", &mut recovery);
    if wanted(5) || wanted(6) {
        let runs = medium_runs(if wanted(6) { 20 } else { 10 });
        record(5, "changepoint detection", &mut || changepoint(&runs));
        record(6, "dynamic vs static", &mut || dynamic_vs_static(&runs));
    }
    record(7, "SVI validity", &mut svi_validity);
    record(8, "degenerate model", &mut degenerate_model);
    record(9, "AUROC unit", &mut auroc_unit);
    record(10, "determinism", &mut determinism);
    let passed = lines.iter().filter(|(p, _)| *p).count();
    println!("{passed}/{} acceptance criteria pass", lines.len());
}
