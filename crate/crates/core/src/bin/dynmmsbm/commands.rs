use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde_json::{json, Value};

use dynmmsbm::init::{initialize, AlignMode, InitConfig};
use dynmmsbm::io::{load_model_with_config, load_network, save_model, write_network, LoadOptions, NetworkFiles, INTERCEPT};
use dynmmsbm::model::{logistic, CountNorm, ModelSpec};
use dynmmsbm::network::DynamicNetwork;
use dynmmsbm::predict::{
    auroc, covariate_effect, fitted_probs, forecast, online_refit, roc_points, Aggregation, ArImputation, FutureCovariates, Shift,
};
use dynmmsbm::simulate::{generate, recovery_metrics, DgpPreset};
use dynmmsbm::svi::{fit_svi_observed, heldout_loglik, split_holdout, SviConfig};
use dynmmsbm::vem::{fit_vem_observed, FittedModel, VemConfig};

use crate::args::*;
use crate::config::Resolved;
use crate::error::CliError;
use crate::run::RunDir;

const TRUTH_FILE: &str = "truth.json";
const MODEL_FILE: &str = "model.json";

fn required<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, CliError> {
    v.clone().ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn existing(path: PathBuf) -> Result<PathBuf, CliError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Usage(format!("input file not found: {}", path.display())))
    }
}

fn load_data(d: &DataArgs) -> Result<DynamicNetwork, CliError> {
    let (edges, monadic, dyadic) = match &d.data {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(CliError::Usage(format!("data directory not found: {}", dir.display())));
            }
            let f = NetworkFiles::in_dir(dir);
            (
                d.edges.clone().unwrap_or(f.edges),
                d.monadic.clone().or(Some(f.monadic).filter(|p| p.exists())),
                d.dyadic.clone().or(f.dyadic),
            )
        }
        None => (required(&d.edges, "edges (or --data)")?, d.monadic.clone(), d.dyadic.clone()),
    };
    let edges = existing(edges)?;
    let monadic = monadic.map(existing).transpose()?;
    let dyadic = dyadic.map(existing).transpose()?;
    let opts = LoadOptions {
        directed: !d.undirected,
        dense: d.dense,
        intercept: !d.no_intercept,
    };
    let net = load_network(&edges, monadic.as_deref(), dyadic.as_deref(), &opts)?;
    info!(
        "loaded {} nodes, {} periods, {} dyads",
        net.n_nodes(),
        net.n_periods(),
        net.n_dyads()
    );
    Ok(net)
}

fn model_spec(a: &ModelArgs, directed: bool) -> Result<ModelSpec, CliError> {
    let mut spec = ModelSpec::new(a.groups.unwrap_or(2), a.states.unwrap_or(1), directed);
    if let Some(eta) = a.eta {
        spec.eta = eta;
    }
    spec.count_norm = match a.count_norm {
        Some(CountNormName::TwicePeriodSize) => CountNorm::TwicePeriodSize,
        _ => CountNorm::Exact,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

fn init_config(a: &InitArgs, seed: u64) -> InitConfig {
    let d = InitConfig::default();
    InitConfig {
        seed,
        kmeans_restarts: a.kmeans_restarts.unwrap_or(d.kmeans_restarts),
        concentration: a.init_concentration.unwrap_or(d.concentration),
        align: if a.relaxed_align { AlignMode::Relaxed } else { AlignMode::Auto },
        ..d
    }
}

fn vem_config(a: &VemArgs, seed: u64) -> Result<VemConfig, CliError> {
    let d = VemConfig::default();
    let cfg = VemConfig {
        tol_hyper: a.tol.unwrap_or(d.tol_hyper),
        max_iter: a.max_iter.unwrap_or(d.max_iter),
        inner_mstep_iters: a.inner_iters.unwrap_or(d.inner_mstep_iters),
        seed,
        se_samples: a.se_samples.unwrap_or(d.se_samples),
        compute_se: a.se,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn svi_config(a: &SviArgs, seed: u64) -> Result<SviConfig, CliError> {
    let d = SviConfig::default();
    let cfg = SviConfig {
        batch_nodes: a.batch_nodes.unwrap_or(d.batch_nodes),
        tau: a.rho_tau.unwrap_or(d.tau),
        p_exp: a.rho_p.unwrap_or(d.p_exp),
        constant_rho: a.rho_const,
        holdout_frac: a.holdout.unwrap_or(d.holdout_frac),
        tol_holdout: a.tol_holdout.unwrap_or(d.tol_holdout),
        tol_window: a.tol_window.unwrap_or(d.tol_window),
        patience: a.patience.unwrap_or(d.patience),
        max_steps: a.max_steps.unwrap_or(d.max_steps),
        inner_mstep_iters: d.inner_mstep_iters,
        seed,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn load_fitted(path: &Option<PathBuf>) -> Result<FittedModel, CliError> {
    let path = existing(required(path, "model")?)?;
    Ok(load_model_with_config(&path)?.0)
}

fn b_probs(fitted: &FittedModel) -> Vec<Vec<f64>> {
    let k = fitted.spec.k;
    (0..k)
        .map(|g| (0..k).map(|h| logistic(fitted.hyper.b(g, h))).collect())
        .collect()
}

fn fit_summary(fitted: &FittedModel) -> Value {
    let m = fitted.spec.m;
    let trans: Vec<Vec<f64>> = (0..m).map(|a| (0..m).map(|b| fitted.trans(a, b)).collect()).collect();
    let mut out = json!({
        "engine": fitted.engine,
        "iterations": fitted.iters,
        "converged": fitted.converged,
        "stop_reason": fitted.stop_reason,
        "lower_bound": fitted.lower_bound,
        "trace": fitted.trace,
        "blockmodel": b_probs(fitted),
        "beta": fitted.hyper.beta,
        "gamma": fitted.hyper.gamma,
        "transitions": trans,
        "modal_states": fitted.modal_states(),
    });
    if let Some(se) = &fitted.se {
        out["standard_errors"] = json!(se
            .names
            .iter()
            .zip(se.estimate.iter().zip(&se.se))
            .map(|(n, (e, s))| json!({"name": n, "estimate": e, "se": s}))
            .collect::<Vec<_>>());
    }
    out
}

pub fn simulate(r: Resolved<SimulateArgs>) -> Result<(), CliError> {
    let a = &r.args;
    let out = required(&a.out, "out")?;
    let name = match a.preset.unwrap_or(PresetName::Medium) {
        PresetName::Easy => "easy",
        PresetName::Medium => "medium",
        PresetName::Hard => "hard",
    };
    let mut preset = DgpPreset::by_name(name)?;
    if a.nodes.is_some() || a.periods.is_some() || a.switch_after.is_some() {
        let first = preset.schedule.iter().take_while(|&&s| s == preset.schedule[0]).count();
        let periods = a.periods.unwrap_or(preset.n_periods());
        let nodes = a.nodes.unwrap_or(preset.n_nodes);
        preset = preset.resized(nodes, periods, a.switch_after.unwrap_or(first));
    }
    preset.directed = !a.undirected;
    preset.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let run = RunDir::create(&out, &r.snapshot)?;
    info!("simulating preset {name} with seed {}", r.seed);
    let (net, truth) = generate(&preset, r.seed)?;
    write_network(&net, &out)?;

    let k = preset.k;
    let memberships: Vec<Value> = (0..net.n_slots())
        .map(|s| {
            json!({
                "node": net.node_ids()[net.slot_node(s)],
                "period": net.period_labels()[net.slot_period(s)],
                "pi": &truth.pi[s * k..(s + 1) * k],
            })
        })
        .collect();
    let blockmodel: Vec<&[f64]> = truth.b_probs.chunks(k).collect();
    run.write_json(
        TRUTH_FILE,
        &json!({
            "preset": name,
            "k": k,
            "blockmodel": blockmodel,
            "states": truth.s,
            "memberships": memberships,
        }),
    )?;
    let edges: Vec<usize> = (0..net.n_periods()).map(|t| net.n_edges(t)).collect();
    let density: Vec<f64> = (0..net.n_periods()).map(|t| net.density(t)).collect();
    run.write_metrics(&json!({
        "nodes": net.n_nodes(),
        "periods": net.n_periods(),
        "dyads": net.n_dyads(),
        "edges": edges,
        "density": density,
    }))?;
    println!(
        "wrote {} nodes x {} periods ({} edges) to {}",
        net.n_nodes(),
        net.n_periods(),
        edges.iter().sum::<usize>(),
        out.display()
    );
    Ok(())
}

/// Membership recovery against a `simulate` truth file, matched by node id
/// and period label.
fn recovery(path: &Path, net: &DynamicNetwork, fitted: &FittedModel) -> Result<Option<Value>, CliError> {
    let truth: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let k = fitted.spec.k;
    if truth["k"].as_u64() != Some(k as u64) {
        info!("truth has a different number of groups; skipping recovery metrics");
        return Ok(None);
    }
    let mut by_key: HashMap<(String, i64), Vec<f64>> = HashMap::new();
    for row in truth["memberships"].as_array().into_iter().flatten() {
        let node = row["node"].as_str().unwrap_or_default().to_string();
        let period = row["period"].as_i64().unwrap_or_default();
        let pi: Vec<f64> = row["pi"].as_array().into_iter().flatten().filter_map(Value::as_f64).collect();
        by_key.insert((node, period), pi);
    }
    let mut truth_pi = Vec::with_capacity(net.n_slots() * k);
    for s in 0..net.n_slots() {
        let key = (net.node_ids()[net.slot_node(s)].clone(), net.period_labels()[net.slot_period(s)]);
        match by_key.get(&key) {
            Some(pi) if pi.len() == k => truth_pi.extend_from_slice(pi),
            _ => return Err(CliError::Run(format!("truth file has no membership for node {:?} period {}", key.0, key.1))),
        }
    }
    let truth_b: Vec<f64> = truth["blockmodel"]
        .as_array()
        .into_iter()
        .flatten()
        .flat_map(|r| r.as_array().cloned().unwrap_or_default())
        .filter_map(|v| v.as_f64())
        .collect();
    let est_b: Vec<f64> = b_probs(fitted).concat();
    let bm = (truth_b.len() == k * k).then_some((&truth_b[..], &est_b[..]));
    let rm = recovery_metrics(&truth_pi, &fitted.pi_hat, k, bm)?;
    Ok(Some(json!({
        "membership_correlation": rm.correlation,
        "mean_l2": rm.mean_l2,
        "blockmodel_max_abs": rm.b_max_abs,
        "permutation": rm.perm,
    })))
}

pub fn fit(r: Resolved<FitArgs>) -> Result<(), CliError> {
    let a = &r.args;
    let out = required(&a.out, "out")?;
    let net = load_data(&a.data)?;
    let spec = model_spec(&a.model, net.directed())?;
    let init_cfg = init_config(&a.init, r.seed);
    let engine = a.engine.unwrap_or(EngineName::Vem);
    let vem_cfg = vem_config(&a.vem, r.seed)?;
    let svi_cfg = svi_config(&a.svi, r.seed)?;
    let truth = match (&a.truth, &a.data.data) {
        (Some(p), _) => Some(existing(p.clone())?),
        (None, Some(dir)) => Some(dir.join(TRUTH_FILE)).filter(|p| p.is_file()),
        _ => None,
    };
    let run = RunDir::create(&out, &r.snapshot)?;

    let holdout = match engine {
        EngineName::Vem => a.svi.holdout.unwrap_or(0.0),
        EngineName::Svi => svi_cfg.holdout_frac,
    };
    let split = split_holdout(&net, holdout, r.seed)?;
    let init = initialize(&split.train, &spec, &init_cfg)?;
    let fitted = match engine {
        EngineName::Vem => fit_vem_observed(&split.train, &spec, &init, &vem_cfg, |rep| {
            println!("iter {:>4}  elbo {:.6}", rep.iter, rep.value);
            info!("iter {} elbo {:.9}", rep.iter, rep.value);
        })?,
        EngineName::Svi => fit_svi_observed(&split, &spec, &init, &svi_cfg, |rep| {
            println!("step {:>4}  heldout-ll {:.6}", rep.iter, rep.value);
            info!("step {} heldout-ll {:.9}", rep.iter, rep.value);
        })?,
    };
    save_model(&fitted, &run.file(MODEL_FILE), Some(&r.snapshot))?;

    let mut metrics = fit_summary(&fitted);
    if !split.heldout.is_empty() {
        metrics["heldout_loglik"] = json!(heldout_loglik(&split.full, &split.heldout, &fitted.pi_hat, &fitted.hyper));
        metrics["heldout_dyads"] = json!(split.heldout.len());
    }
    if let Some(p) = truth {
        if let Some(rec) = recovery(&p, &net, &fitted)? {
            metrics["recovery"] = rec;
        }
    }
    run.write_metrics(&metrics)?;
    println!(
        "{} after {} iterations ({:?}); model written to {}",
        if fitted.converged { "converged" } else { "stopped" },
        fitted.iters,
        fitted.stop_reason,
        run.file(MODEL_FILE).display()
    );
    Ok(())
}

pub fn predict(r: Resolved<PredictArgs>) -> Result<(), CliError> {
    let a = &r.args;
    let out = required(&a.out, "out")?;
    let fitted = load_fitted(&a.model)?;
    let net = load_data(&a.data)?;
    let run = RunDir::create(&out, &r.snapshot)?;
    let probs = fitted_probs(&fitted, &net)?;
    let ids = net.node_ids();
    let periods = net.period_labels();
    let mut w = run.csv_writer("predictions.csv")?;
    w.write_record(["period", "sender", "receiver", "y", "prob"])?;
    for (dy, p) in net.dyads().iter().zip(&probs) {
        w.write_record([
            periods[dy.t].to_string(),
            ids[dy.p].clone(),
            ids[dy.q].clone(),
            u8::from(dy.y).to_string(),
            p.to_string(),
        ])?;
    }
    w.flush()?;
    let labels: Vec<bool> = net.dyads().iter().map(|d| d.y).collect();
    let n = probs.len() as f64;
    let log_loss = -probs
        .iter()
        .zip(&labels)
        .map(|(&p, &y)| if y { p.max(1e-12).ln() } else { (1.0 - p).max(1e-12).ln() })
        .sum::<f64>()
        / n;
    let mut metrics = json!({ "dyads": probs.len(), "log_loss": log_loss });
    if let Ok(auc) = auroc(&probs, &labels) {
        metrics["auroc"] = json!(auc.value);
        metrics["auroc_sd"] = json!(auc.sd);
    }
    run.write_metrics(&metrics)?;
    println!("scored {} dyads; log loss {log_loss:.6}", probs.len());
    Ok(())
}

fn column_map(headers: &csv::StringRecord, names: &[String], keys: usize, path: &Path) -> Result<Vec<usize>, CliError> {
    names
        .iter()
        .map(|n| {
            headers
                .iter()
                .skip(keys)
                .position(|h| h == n)
                .map(|i| i + keys)
                .ok_or_else(|| CliError::Run(format!("{}: missing column {n:?}", path.display())))
        })
        .collect()
}

fn parse_field(v: &str, path: &Path, line: usize) -> Result<f64, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Run(format!("{}:{line}: not a number: {v:?}", path.display())))
}

fn parse_step(v: &str, horizon: usize, path: &Path, line: usize) -> Result<Option<usize>, CliError> {
    let s: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Run(format!("{}:{line}: bad step {v:?}", path.display())))?;
    if s == 0 {
        return Err(CliError::Run(format!("{}:{line}: steps start at 1", path.display())));
    }
    Ok((s <= horizon).then_some(s - 1))
}

fn node_of(net: &DynamicNetwork, id: &str, path: &Path, line: usize) -> Result<usize, CliError> {
    net.node_index(id.trim())
        .ok_or_else(|| CliError::Run(format!("{}:{line}: unknown node {id:?}", path.display())))
}

fn read_future(net: &DynamicNetwork, a: &ForecastArgs, horizon: usize) -> Result<FutureCovariates, CliError> {
    let mut fut = FutureCovariates {
        monadic: vec![HashMap::new(); horizon],
        dyadic: vec![HashMap::new(); horizon],
        carry_forward: !a.no_carry_forward,
    };
    if let Some(path) = &a.future_monadic {
        let path = existing(path.clone())?;
        let mut rdr = csv::Reader::from_path(&path)?;
        let with_intercept = net.x_names().first().is_some_and(|n| n == INTERCEPT);
        let names: Vec<String> = net.x_names().iter().skip(usize::from(with_intercept)).cloned().collect();
        let cols = column_map(rdr.headers()?, &names, 2, &path)?;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let node = node_of(net, &rec[0], &path, line)?;
            if let Some(h) = parse_step(&rec[1], horizon, &path, line)? {
                let mut row = Vec::with_capacity(net.jx());
                if with_intercept {
                    row.push(1.0);
                }
                for &c in &cols {
                    row.push(parse_field(&rec[c], &path, line)?);
                }
                fut.monadic[h].insert(node, row);
            }
        }
    }
    if let Some(path) = &a.future_dyadic {
        let path = existing(path.clone())?;
        let mut rdr = csv::Reader::from_path(&path)?;
        let cols = column_map(rdr.headers()?, net.d_names(), 3, &path)?;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let (mut p, mut q) = (node_of(net, &rec[0], &path, line)?, node_of(net, &rec[1], &path, line)?);
            if !net.directed() && p > q {
                std::mem::swap(&mut p, &mut q);
            }
            if let Some(h) = parse_step(&rec[2], horizon, &path, line)? {
                let row = cols.iter().map(|&c| parse_field(&rec[c], &path, line)).collect::<Result<Vec<_>, _>>()?;
                fut.dyadic[h].insert((p, q), row);
            }
        }
    }
    Ok(fut)
}

pub fn forecast_cmd(r: Resolved<ForecastArgs>) -> Result<(), CliError> {
    let a = &r.args;
    let out = required(&a.out, "out")?;
    let fitted = load_fitted(&a.model)?;
    let net = load_data(&a.data)?;
    let horizon = a.horizon.unwrap_or(1);
    if horizon == 0 {
        return Err(CliError::Usage("--horizon must be >= 1".into()));
    }
    let future = read_future(&net, a, horizon)?;
    let run = RunDir::create(&out, &r.snapshot)?;
    let ar = a.ar_column.as_ref().map(|c| ArImputation {
        column: c.clone(),
        seed: r.seed,
    });
    let fc = forecast(&fitted, &net, horizon, &future, ar.as_ref())?;
    let mut w = run.csv_writer("forecast.csv")?;
    w.write_record(["step", "sender", "receiver", "prob"])?;
    for row in &fc.dyads {
        w.write_record([row.step.to_string(), row.p.clone(), row.q.clone(), row.prob.to_string()])?;
    }
    w.flush()?;
    let mean: Vec<f64> = (1..=horizon)
        .map(|h| {
            let ps: Vec<f64> = fc.dyads.iter().filter(|r| r.step == h).map(|r| r.prob).collect();
            ps.iter().sum::<f64>() / ps.len().max(1) as f64
        })
        .collect();
    run.write_metrics(&json!({
        "horizon": horizon,
        "state_probs": fc.state_probs,
        "mean_prob": mean,
        "dyads_per_step": fc.dyads.len() / horizon,
    }))?;
    println!("forecast {} dyads over {horizon} step(s)", fc.dyads.len() / horizon);
    Ok(())
}

pub fn effects(r: Resolved<EffectsArgs>) -> Result<(), CliError> {
    let a = &r.args;
    let out = required(&a.out, "out")?;
    let shift = Shift {
        column: required(&a.column, "column")?,
        delta: required(&a.delta, "delta")?,
        cap: a.cap,
    };
    let agg = match a.aggregate.unwrap_or(AggregateName::Overall) {
        AggregateName::Overall => Aggregation::Overall,
        AggregateName::Node => Aggregation::ByNode,
        AggregateName::NodeYear => Aggregation::ByNodeYear,
    };
    let fitted = load_fitted(&a.model)?;
    let net = load_data(&a.data)?;
    let run = RunDir::create(&out, &r.snapshot)?;
    let rows = covariate_effect(&fitted, &net, &shift, agg)?;
    let mut w = run.csv_writer("effects.csv")?;
    w.write_record(["node", "period", "effect", "dyads"])?;
    for row in &rows {
        w.write_record([
            row.node.clone().unwrap_or_default(),
            row.period.map(|p| p.to_string()).unwrap_or_default(),
            row.effect.to_string(),
            row.n_dyads.to_string(),
        ])?;
    }
    w.flush()?;
    let mean = rows.iter().map(|r| r.effect).sum::<f64>() / rows.len().max(1) as f64;
    run.write_metrics(&json!({ "rows": rows.len(), "mean_effect": mean }))?;
    println!("{} effect row(s); mean effect {mean:.6}", rows.len());
    Ok(())
}

fn parse_label(v: &str, path: &Path, line: usize) -> Result<bool, CliError> {
    match v.trim() {
        "1" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "false" | "FALSE" | "False" => Ok(false),
        other => Err(CliError::Run(format!("{}:{line}: bad label {other:?}", path.display()))),
    }
}

pub fn eval_auroc(r: Resolved<EvalAurocArgs>) -> Result<(), CliError> {
    let a = &r.args;
    let out = required(&a.out, "out")?;
    let path = existing(required(&a.predictions, "predictions")?)?;
    let label_col = a.label_column.clone().unwrap_or_else(|| "y".into());
    let score_col = a.score_column.clone().unwrap_or_else(|| "prob".into());
    let mut rdr = csv::Reader::from_path(&path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Run(format!("{}: missing column {name:?}", path.display())))
    };
    let (li, si) = (find(&label_col)?, find(&score_col)?);
    let (mut labels, mut scores) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        labels.push(parse_label(&rec[li], &path, i + 2)?);
        scores.push(parse_field(&rec[si], &path, i + 2)?);
    }
    let run = RunDir::create(&out, &r.snapshot)?;
    let auc = auroc(&scores, &labels)?;
    let mut w = run.csv_writer("roc.csv")?;
    w.write_record(["threshold", "fpr", "tpr"])?;
    for (t, f, tp) in roc_points(&scores, &labels)? {
        w.write_record([t.to_string(), f.to_string(), tp.to_string()])?;
    }
    w.flush()?;
    run.write_metrics(&json!({
        "auroc": auc.value,
        "auroc_sd": auc.sd,
        "n": labels.len(),
        "positives": labels.iter().filter(|&&l| l).count(),
    }))?;
    println!("AUROC {:.6} (sd {:.6}) over {} cases", auc.value, auc.sd, labels.len());
    Ok(())
}

fn parse_windows(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|w| {
            w.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad window end {w:?}")))
        })
        .collect()
}

pub fn online_fit(r: Resolved<OnlineFitArgs>) -> Result<(), CliError> {
    let a = &r.args;
    let out = required(&a.out, "out")?;
    let net = load_data(&a.data)?;
    let spec = model_spec(&a.model, net.directed())?;
    let init_cfg = init_config(&a.init, r.seed);
    let vem_cfg = vem_config(&a.vem, r.seed)?;
    let windows = match &a.windows {
        Some(s) => parse_windows(s)?,
        None => (1..=net.n_periods()).collect(),
    };
    let run = RunDir::create(&out, &r.snapshot)?;
    let fits = online_refit(&net, &spec, &windows, &init_cfg, &vem_cfg)?;
    let mut summary = Vec::with_capacity(fits.len());
    for (&w, fitted) in windows.iter().zip(&fits) {
        let name = format!("model-window-{w}.json");
        save_model(fitted, &run.file(&name), Some(&r.snapshot))?;
        let mut s = fit_summary(fitted);
        s["window"] = json!(w);
        s["model"] = json!(name);
        println!(
            "window {w:>3}: {} iterations, lower bound {:.6}",
            fitted.iters, fitted.lower_bound
        );
        summary.push(s);
    }
    run.write_metrics(&json!({ "windows": summary }))?;
    Ok(())
}
