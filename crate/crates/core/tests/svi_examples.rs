mod common;

use common::{random_hyper, random_network, random_vparams, rng};
use dynmmsbm::init::{initialize, InitConfig};
use dynmmsbm::svi::{
    fit_svi, intermediate_counts, sample_minibatch, split_holdout, svi_step, SviConfig, SviState,
};
use dynmmsbm::vem::{Init, StopReason};
use dynmmsbm::ModelSpec;

#[test]
fn one_sampled_node_touches_its_dyads() {
    let mut r = rng(1);
    let net = random_network(&mut r, 5, 3, true, 1, 0, 0.3);
    for _ in 0..20 {
        let b = sample_minibatch(&net, 1, &mut r).unwrap();
        assert_eq!(b.per_period, vec![8, 8, 8]);
        assert_eq!(b.dyads.len(), 24);
        assert_eq!(b.sampled.iter().filter(|&&s| s).count(), 3);
        assert!(b.dyads.windows(2).all(|w| w[0] < w[1]));
    }
    let und = random_network(&mut r, 5, 1, false, 1, 0, 0.3);
    assert_eq!(sample_minibatch(&und, 1, &mut r).unwrap().per_period, vec![4]);
    assert!(sample_minibatch(&net, 0, &mut r).is_err());
    assert!(sample_minibatch(&net, 6, &mut r).is_err());
    assert_eq!(sample_minibatch(&net, 5, &mut r).unwrap().dyads.len(), net.n_dyads());
}

#[test]
fn rescaled_counts_are_unbiased() {
    let mut r = rng(2);
    let net = random_network(&mut r, 8, 2, true, 1, 0, 0.3);
    let vp = random_vparams(&mut r, &net, 3, 1);
    let exact = vp.expected_stats(&net);
    let draws = 20_000;
    let mut mean = vec![0.0; exact.c.len()];
    let mut sq = vec![0.0; exact.c.len()];
    for _ in 0..draws {
        let b = sample_minibatch(&net, 2, &mut r).unwrap();
        let est = intermediate_counts(&net, &vp, &b, &exact);
        for slot in 0..net.n_slots() {
            assert!((est.c_total(slot) - net.n_inter(slot) as f64).abs() < 1e-9);
        }
        for (i, v) in est.c.iter().enumerate() {
            mean[i] += v / draws as f64;
            sq[i] += v * v / draws as f64;
        }
    }
    for i in 0..mean.len() {
        let sd = (sq[i] - mean[i] * mean[i]).max(0.0).sqrt();
        let se = sd / (draws as f64).sqrt();
        assert!((mean[i] - exact.c[i]).abs() <= 5.0 * se + 1e-9, "entry {i}: {} vs {}", mean[i], exact.c[i]);
    }
}

#[test]
fn steps_preserve_count_totals() {
    let mut r = rng(3);
    let net = random_network(&mut r, 9, 3, false, 2, 1, 0.3);
    let spec = ModelSpec::new(2, 2, false);
    let init = Init {
        vparams: random_vparams(&mut r, &net, 2, 2),
        hyper: random_hyper(&mut r, &spec, &net),
    };
    let mut state = SviState::new(&net, &init).unwrap();
    let cfg = SviConfig {
        batch_nodes: 3,
        ..SviConfig::default()
    };
    for _ in 0..10 {
        let b = sample_minibatch(&net, 3, &mut r).unwrap();
        svi_step(&net, &spec, &mut state, &b, &cfg).unwrap();
        for slot in 0..net.n_slots() {
            assert!((state.stats.c_total(slot) - net.n_inter(slot) as f64).abs() < 1e-9);
        }
        assert!((state.stats.u_total() - 2.0).abs() < 1e-9);
        state.hyper.validate(false).unwrap();
    }
    assert_eq!(state.step, 10);
}

fn small_fit(seed: u64, config: SviConfig) -> dynmmsbm::FittedModel {
    let mut r = rng(seed);
    let net = random_network(&mut r, 12, 3, true, 2, 1, 0.25);
    let spec = ModelSpec::new(2, 2, true);
    let split = split_holdout(&net, 0.1, config.seed).unwrap();
    let init = initialize(&split.train, &spec, &InitConfig::default()).unwrap();
    fit_svi(&split, &spec, &init, &config).unwrap()
}

#[test]
fn zero_patience_stops_at_first_setback() {
    let cfg = SviConfig {
        batch_nodes: 4,
        patience: 0,
        tol_holdout: 1e-300,
        max_steps: 60,
        ..SviConfig::default()
    };
    let fit = small_fit(4, cfg);
    let trace = &fit.trace;
    let n = trace.len();
    assert!(trace[..n - 1].windows(2).all(|w| w[1] > w[0]));
    if fit.stop_reason == StopReason::Patience {
        assert!(trace[n - 1] <= trace[n - 2]);
    } else {
        assert_eq!(n, 60);
    }
}

#[test]
fn same_seed_same_fit() {
    let cfg = SviConfig {
        batch_nodes: 4,
        max_steps: 15,
        seed: 9,
        ..SviConfig::default()
    };
    let a = small_fit(5, cfg.clone());
    let b = small_fit(5, cfg.clone());
    assert_eq!(a, b);
    let c = small_fit(5, SviConfig { seed: 10, ..cfg });
    assert_ne!(a.hyper, c.hyper);
}

#[test]
fn minibatch_heldout_score_tracks_batch() {
    use dynmmsbm::fit_vem;
    use dynmmsbm::simulate::{generate, DgpPreset};
    use dynmmsbm::svi::heldout_loglik;
    use dynmmsbm::VemConfig;

    let spec = ModelSpec::new(2, 2, true);
    for seed in 1..=3u64 {
        let (net, _) = generate(&DgpPreset::medium().resized(50, 5, 3), seed).unwrap();
        let split = split_holdout(&net, 0.05, seed).unwrap();
        let init = initialize(&split.train, &spec, &InitConfig { seed, ..InitConfig::default() }).unwrap();
        let batch = fit_vem(&split.train, &spec, &init, &VemConfig { seed, ..VemConfig::default() }).unwrap();
        let cfg = SviConfig {
            batch_nodes: 10,
            holdout_frac: 0.05,
            tol_holdout: 1e-5,
            patience: 100,
            max_steps: 400,
            seed,
            ..SviConfig::default()
        };
        let svi = fit_svi(&split, &spec, &init, &cfg).unwrap();
        let b = heldout_loglik(&split.full, &split.heldout, &batch.pi_hat, &batch.hyper);
        let s = heldout_loglik(&split.full, &split.heldout, &svi.pi_hat, &svi.hyper);
        assert!(s >= b - 0.02 * b.abs(), "seed {seed}: svi {s} vs batch {b}");
    }
}
