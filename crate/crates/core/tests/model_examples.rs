mod common;

use common::{log_sum_exp, random_hyper, random_network, random_vparams, rng};
use dynmmsbm::init::{initialize, InitConfig};
use dynmmsbm::model::{logistic, MembershipPrior};
use dynmmsbm::model::{compute_stats, log_collapsed_posterior};
use dynmmsbm::network::{DyadRecord, NetworkParts};
use dynmmsbm::vem::{
    e_step, elbo, posterior_memberships, standard_errors, transition_estimate, update_kappa, EStepContext,
};
use dynmmsbm::{fit_vem, DynamicNetwork, GlobalStats, Hyperparams, LatentState, ModelSpec, VariationalParams, VemConfig};
use itertools::Itertools;
use rand::Rng;
use statrs::function::gamma::ln_gamma;

fn three_node_directed() -> DynamicNetwork {
    let mut dyads = Vec::new();
    for t in 0..2 {
        for p in 0..3 {
            for q in 0..3 {
                if p != q {
                    dyads.push(DyadRecord {
                        t,
                        p,
                        q,
                        y: (p + q + t) % 2 == 0,
                        d: vec![],
                    });
                }
            }
        }
    }
    DynamicNetwork::from_parts(NetworkParts {
        directed: true,
        node_ids: vec!["a".into(), "b".into(), "c".into()],
        period_labels: vec![1, 2],
        x_names: vec!["intercept".into()],
        d_names: vec![],
        monadic: (0..2).map(|_| (0..3).map(|i| (i, vec![1.0])).collect()).collect(),
        dyads,
    })
    .unwrap()
}

#[test]
fn stats_tally_by_hand() {
    let net = three_node_directed();
    assert_eq!(net.n_dyads(), 12);
    // dyad order within a period: (0,1) (0,2) (1,0) (1,2) (2,0) (2,1)
    let z = vec![0, 1, 1, 0, 1, 1, 0, 0, 0, 0, 0, 0];
    let w = vec![1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1];
    for (i, dy) in net.dyads().iter().take(6).enumerate() {
        let expect = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)][i];
        assert_eq!((net.slot_node(dy.p_slot), net.slot_node(dy.q_slot)), expect);
    }
    let latent = LatentState { s: vec![1, 0], z, w };
    let st = compute_stats(&latent, &net, 2, 2).unwrap();
    // node a, period 1: sends z=0,1 and receives w=0 (from b), w=0 (from c)
    assert_eq!(st.c_row(net.slot(0, 0).unwrap()), &[3.0, 1.0]);
    // node b: sends z=1,0; receives w=1 (from a), w=1 (from c)
    assert_eq!(st.c_row(net.slot(0, 1).unwrap()), &[1.0, 3.0]);
    // node c: sends z=1,1; receives w=1 (from a), w=0 (from b)
    assert_eq!(st.c_row(net.slot(0, 2).unwrap()), &[1.0, 3.0]);
    assert_eq!(st.c_row(net.slot(1, 1).unwrap()), &[3.0, 1.0]);
    assert_eq!(st.u, vec![0.0, 0.0, 1.0, 0.0]);

    let one = LatentState {
        s: vec![0, 0],
        z: vec![0; 12],
        w: vec![0; 12],
    };
    let st = compute_stats(&one, &net, 1, 1).unwrap();
    for slot in 0..net.n_slots() {
        assert_eq!(st.c_row(slot)[0], net.n_inter(slot) as f64);
    }
    let single = net.window(1).unwrap();
    let st = compute_stats(
        &LatentState {
            s: vec![1],
            z: vec![0; 6],
            w: vec![1; 6],
        },
        &single,
        2,
        2,
    )
    .unwrap();
    assert_eq!(st.u_total(), 0.0);
}

#[test]
fn out_of_range_labels_are_rejected() {
    let net = three_node_directed();
    let bad = LatentState {
        s: vec![0, 2],
        z: vec![0; 12],
        w: vec![0; 12],
    };
    assert!(compute_stats(&bad, &net, 2, 2).is_err());
    let short = LatentState {
        s: vec![0, 0],
        z: vec![0; 11],
        w: vec![0; 12],
    };
    assert!(compute_stats(&short, &net, 2, 2).is_err());
}

#[test]
fn one_group_one_state_is_logistic_likelihood() {
    let mut r = rng(11);
    for directed in [true, false] {
        let net = random_network(&mut r, 6, 3, directed, 2, 2, 0.3);
        let spec = ModelSpec::new(1, 1, directed);
        let mut hyper = Hyperparams::for_network(&spec, &net);
        hyper.set_b(0, 0, -0.7);
        hyper.gamma = vec![0.4, -1.1];
        let latent = LatentState {
            s: vec![0; 3],
            z: vec![0; net.n_dyads()],
            w: vec![0; net.n_dyads()],
        };
        let got = log_collapsed_posterior(&net, &latent, &hyper, &spec).unwrap();
        let want: f64 = (0..net.n_dyads())
            .map(|i| {
                let d = net.d_row(i);
                let p: f64 = logistic(-0.7 + 0.4 * d[0] - 1.1 * d[1]);
                if net.dyads()[i].y {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            })
            .sum();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn eta_is_irrelevant_with_one_period() {
    let mut r = rng(12);
    let net = random_network(&mut r, 5, 1, true, 2, 1, 0.4);
    let mut spec = ModelSpec::new(2, 2, true);
    let hyper = random_hyper(&mut r, &spec, &net);
    let latent = LatentState {
        s: vec![1],
        z: (0..net.n_dyads()).map(|_| r.random_range(0..2)).collect(),
        w: (0..net.n_dyads()).map(|_| r.random_range(0..2)).collect(),
    };
    let a = log_collapsed_posterior(&net, &latent, &hyper, &spec).unwrap();
    spec.eta *= 2.0;
    let b = log_collapsed_posterior(&net, &latent, &hyper, &spec).unwrap();
    assert_eq!(a, b);
}

fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (g, &o) in perm.iter().enumerate() {
        inv[o] = g;
    }
    inv
}

#[test]
fn relabeling_groups_leaves_the_joint_unchanged() {
    let mut r = rng(13);
    let net = random_network(&mut r, 5, 2, true, 2, 1, 0.4);
    let spec = ModelSpec::new(3, 2, true);
    let hyper = random_hyper(&mut r, &spec, &net);
    let latent = LatentState {
        s: vec![0, 1],
        z: (0..net.n_dyads()).map(|_| r.random_range(0..3)).collect(),
        w: (0..net.n_dyads()).map(|_| r.random_range(0..3)).collect(),
    };
    let base = log_collapsed_posterior(&net, &latent, &hyper, &spec).unwrap();
    let perm = [0, 2, 1];
    let inv = inverse(&perm);
    let relabeled = LatentState {
        s: latent.s.clone(),
        z: latent.z.iter().map(|&g| inv[g]).collect(),
        w: latent.w.iter().map(|&g| inv[g]).collect(),
    };
    let moved = log_collapsed_posterior(&net, &relabeled, &hyper.permute_groups(&perm), &spec).unwrap();
    assert!((base - moved).abs() < 1e-10);

    let vp = random_vparams(&mut r, &net, 3, 2);
    let st = vp.expected_stats(&net);
    let e0 = elbo(&net, &vp, &st, &hyper, &spec).unwrap().value();
    let vp_p = vp.permute_groups(&perm);
    let e1 = elbo(&net, &vp_p, &vp_p.expected_stats(&net), &hyper.permute_groups(&perm), &spec)
        .unwrap()
        .value();
    assert!((e0 - e1).abs() < 1e-9, "{e0} vs {e1}");
}

#[test]
fn point_mass_bound_equals_collapsed_joint() {
    let mut r = rng(14);
    for seed in 0..10 {
        let directed = seed % 2 == 0;
        let net = random_network(&mut r, 5, 3, directed, 2, 1, 0.35);
        let spec = ModelSpec::new(2, 2, directed);
        let hyper = random_hyper(&mut r, &spec, &net);
        let latent = LatentState {
            s: (0..3).map(|_| r.random_range(0..2)).collect(),
            z: (0..net.n_dyads()).map(|_| r.random_range(0..2)).collect(),
            w: (0..net.n_dyads()).map(|_| r.random_range(0..2)).collect(),
        };
        let vp = VariationalParams::from_latent(&latent, 2, 2);
        let bound = elbo(&net, &vp, &vp.expected_stats(&net), &hyper, &spec).unwrap().bound();
        let joint = log_collapsed_posterior(&net, &latent, &hyper, &spec).unwrap();
        assert!((bound - joint).abs() < 1e-9, "{bound} vs {joint}");
    }
}

#[test]
fn bound_stays_below_log_evidence() {
    let mut r = rng(15);
    for _ in 0..20 {
        let net = random_network(&mut r, 3, 1, false, 2, 1, 0.5);
        let spec = ModelSpec::new(2, 1, false);
        let hyper = random_hyper(&mut r, &spec, &net);
        let n = net.n_dyads();
        let mut logs = Vec::new();
        for labels in (0..2 * n).map(|_| 0..2usize).multi_cartesian_product() {
            let latent = LatentState {
                s: vec![0],
                z: labels[..n].to_vec(),
                w: labels[n..].to_vec(),
            };
            logs.push(log_collapsed_posterior(&net, &latent, &hyper, &spec).unwrap());
        }
        let evidence = log_sum_exp(&logs);
        let vp = random_vparams(&mut r, &net, 2, 1);
        let bound = elbo(&net, &vp, &vp.expected_stats(&net), &hyper, &spec).unwrap().bound();
        assert!(bound <= evidence + 1e-12, "{bound} > {evidence}");
        let uniform = VariationalParams::uniform(&net, 2, 1);
        let bound = elbo(&net, &uniform, &uniform.expected_stats(&net), &hyper, &spec).unwrap().bound();
        assert!(bound <= evidence + 1e-12);
    }
}

/// Transitions of a kappa sequence, skipping those that touch period `skip`.
fn transitions_without(kappa: &[Vec<f64>], skip: usize) -> Vec<Vec<f64>> {
    let m = kappa[0].len();
    let mut u = vec![vec![0.0; m]; m];
    for t in 1..kappa.len() {
        if t == skip || t - 1 == skip {
            continue;
        }
        for a in 0..m {
            for b in 0..m {
                u[a][b] += kappa[t - 1][a] * kappa[t][b];
            }
        }
    }
    u
}

fn kappa_oracle(net: &DynamicNetwork, spec: &ModelSpec, hyper: &Hyperparams, kappa: &[Vec<f64>], c: &GlobalStats, t: usize) -> Vec<f64> {
    let m = spec.m;
    let last = kappa.len() - 1;
    let eta = spec.eta;
    let up = transitions_without(kappa, t);
    let zero = vec![0.0; m];
    let prev = if t > 0 { &kappa[t - 1] } else { &zero };
    let next = if t < last { &kappa[t + 1] } else { &zero };
    let mut lw = Vec::new();
    for s in 0..m {
        let mut v = 0.0;
        if t < last {
            let out_of_s: f64 = (0..last).filter(|&tt| tt != t).map(|tt| kappa[tt][s]).sum();
            v -= (m as f64 * eta + out_of_s).ln();
        }
        v += next[s] * prev[s] * (eta + up[s][s] + 1.0).ln();
        v += (prev[s] - prev[s] * next[s] + next[s]) * (eta + up[s][s]).ln();
        for n in (0..m).filter(|&n| n != s) {
            v += next[n] * (eta + up[s][n]).ln() + prev[n] * (eta + up[n][s]).ln();
        }
        for slot in net.period_slots(t) {
            let x = net.x_row(slot);
            let alpha: Vec<f64> = (0..spec.k)
                .map(|k| (0..x.len()).map(|j| x[j] * hyper.beta(s, k, j)).sum::<f64>().exp())
                .collect();
            let xi: f64 = alpha.iter().sum();
            let cr = c.c_row(slot);
            let n_i = net.n_inter(slot) as f64;
            v += ln_gamma(xi) - ln_gamma(xi + n_i);
            for k in 0..spec.k {
                v += ln_gamma(alpha[k] + cr[k]) - ln_gamma(alpha[k]);
            }
        }
        lw.push(v);
    }
    let z = log_sum_exp(&lw);
    lw.iter().map(|v| (v - z).exp()).collect()
}

#[test]
fn state_update_matches_direct_transcription() {
    let mut r = rng(16);
    for _ in 0..10 {
        let net = random_network(&mut r, 4, 3, true, 2, 1, 0.4);
        let spec = ModelSpec::new(2, 2, true);
        let hyper = random_hyper(&mut r, &spec, &net);
        let vp = random_vparams(&mut r, &net, 2, 2);
        let stats = vp.expected_stats(&net);
        let kappa: Vec<Vec<f64>> = (0..3).map(|t| vp.kappa_row(t).to_vec()).collect();
        let ctx = EStepContext::new(&net, &spec, &hyper).unwrap();
        for t in 0..3 {
            let got = update_kappa(&ctx, t, &vp.kappa, &stats.u, &stats).unwrap();
            let want = kappa_oracle(&net, &spec, &hyper, &kappa, &stats, t);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "t={t}: {got:?} vs {want:?}");
            }
        }
    }
}

#[test]
fn e_step_outputs_are_distributions() {
    let mut r = rng(17);
    let net = random_network(&mut r, 7, 4, false, 3, 2, 0.3);
    let spec = ModelSpec::new(3, 2, false);
    let hyper = random_hyper(&mut r, &spec, &net);
    let mut vp = random_vparams(&mut r, &net, 3, 2);
    let ctx = EStepContext::new(&net, &spec, &hyper).unwrap();
    for _ in 0..3 {
        let stats = e_step(&ctx, &mut vp).unwrap();
        for row in vp.phi.chunks(3).chain(vp.psi.chunks(3)).chain(vp.kappa.chunks(2)) {
            assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for slot in 0..net.n_slots() {
            assert!((stats.c_total(slot) - net.n_inter(slot) as f64).abs() < 1e-9);
        }
        assert!((stats.u_total() - 3.0).abs() < 1e-12);
    }
}

#[test]
fn posterior_summaries_from_hand_counts() {
    let mut r = rng(18);
    let net = random_network(&mut r, 4, 2, true, 2, 0, 0.5);
    let spec = ModelSpec::new(3, 2, true);
    let hyper = random_hyper(&mut r, &spec, &net);
    let vp = random_vparams(&mut r, &net, 3, 2);
    let zero = GlobalStats::zeros(net.n_slots(), 3, 2);
    let pi = posterior_memberships(&net, &vp, &zero, &hyper).unwrap();
    let prior = MembershipPrior::new(&net, &hyper).unwrap();
    for slot in 0..net.n_slots() {
        let kappa = vp.kappa_row(net.slot_period(slot));
        for g in 0..3 {
            let want: f64 = (0..2)
                .map(|m| kappa[m] * prior.alpha(slot, m)[g] / prior.xi(slot, m))
                .sum();
            assert!((pi[slot * 3 + g] - want).abs() < 1e-14);
        }
    }
    let a = transition_estimate(&zero, &spec);
    assert!(a.iter().all(|&v| (v - 0.5).abs() < 1e-15));
    let mut counts = zero.clone();
    counts.u = vec![3.0, 1.0, 0.0, 2.0];
    let a = transition_estimate(&counts, &spec);
    let want = [4.0 / 6.0, 2.0 / 6.0, 0.25, 0.75];
    for (g, w) in a.iter().zip(want) {
        assert!((g - w).abs() < 1e-15);
    }
}

fn quick_config(seed: u64) -> VemConfig {
    VemConfig {
        max_iter: 30,
        seed,
        ..VemConfig::default()
    }
}

#[test]
fn reference_group_coefficients_stay_zero() {
    let mut r = rng(19);
    let net = random_network(&mut r, 10, 3, true, 2, 1, 0.3);
    let spec = ModelSpec::new(3, 2, true);
    let init = initialize(&net, &spec, &InitConfig::default()).unwrap();
    let fit = fit_vem(&net, &spec, &init, &quick_config(0)).unwrap();
    for m in 0..2 {
        for j in 0..2 {
            assert_eq!(fit.hyper.beta(m, 0, j), 0.0);
        }
    }
    assert!(fit.hyper.beta.iter().any(|&b| b != 0.0));
}

#[test]
fn fits_are_reproducible() {
    let mut r = rng(20);
    let net = random_network(&mut r, 10, 3, false, 2, 1, 0.3);
    let spec = ModelSpec::new(2, 2, false);
    let cfg = InitConfig {
        seed: 5,
        ..InitConfig::default()
    };
    let a = fit_vem(&net, &spec, &initialize(&net, &spec, &cfg).unwrap(), &quick_config(5)).unwrap();
    let b = fit_vem(&net, &spec, &initialize(&net, &spec, &cfg).unwrap(), &quick_config(5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn standard_errors_shrink_with_more_data() {
    let mut r = rng(21);
    let big = random_network(&mut r, 20, 8, true, 1, 1, 0.3);
    let small = big.window(4).unwrap();
    let spec = ModelSpec::new(1, 1, true);
    let cfg = VemConfig {
        max_iter: 50,
        se_samples: 5,
        ..VemConfig::default()
    };
    let se_of = |net: &DynamicNetwork| {
        let init = initialize(net, &spec, &InitConfig::default()).unwrap();
        let fit = fit_vem(net, &spec, &init, &cfg).unwrap();
        standard_errors(&fit, net, &cfg).unwrap()
    };
    let (s, b) = (se_of(&small), se_of(&big));
    for (name, (x, y)) in s.names.iter().zip(s.se.iter().zip(&b.se)) {
        let ratio = x / y;
        assert!(
            (ratio / 2f64.sqrt() - 1.0).abs() < 0.15,
            "{name}: ratio {ratio}"
        );
    }
}
