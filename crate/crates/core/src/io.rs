//! Delimited-text network input/output and model files.
//!
//! Edge file columns: `time, node_a, node_b, y`. Monadic file: `time, node,
//! covariates...`. Dyadic file: `time, node_a, node_b, covariates...`. All
//! files are comma-delimited UTF-8 with a header row; columns are read by
//! position and named by the header. Missing covariate cells are empty or
//! `NA`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{all_pairs, DyadRecord, DynamicNetwork, NetworkParts};
use crate::vem::FittedModel;

pub const MODEL_FORMAT: &str = "dynmmsbm-model";
pub const MODEL_SCHEMA_VERSION: u32 = 1;
pub const INTERCEPT: &str = "intercept";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadOptions {
    pub directed: bool,
    /// Model every pair of present nodes; unlisted dyads have `y = 0`.
    pub dense: bool,
    /// Prepend a constant monadic column.
    pub intercept: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            directed: true,
            dense: false,
            intercept: true,
        }
    }
}

/// Covariate columns with possibly missing cells.
#[derive(Clone, Debug, PartialEq)]
pub struct CovTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

/// Adds a `<name>_missing` indicator (appended after the original columns)
/// for every column with missing cells and fills those cells with zero.
pub fn expand_missing(table: &CovTable) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let ncol = table.names.len();
    let mut missing = vec![0usize; ncol];
    for row in &table.rows {
        if row.len() != ncol {
            return Err(Error::Dimension(format!(
                "covariate row has {} cells, expected {ncol}",
                row.len()
            )));
        }
        for (c, v) in row.iter().enumerate() {
            if v.is_none() {
                missing[c] += 1;
            }
        }
    }
    if !table.rows.is_empty() {
        if let Some(c) = (0..ncol).find(|&c| missing[c] == table.rows.len()) {
            return Err(Error::InvalidNetwork(format!(
                "covariate {:?} is missing in every row",
                table.names[c]
            )));
        }
    }
    let flagged: Vec<usize> = (0..ncol).filter(|&c| missing[c] > 0).collect();
    let mut names = table.names.clone();
    names.extend(flagged.iter().map(|&c| format!("{}_missing", table.names[c])));
    let rows = table
        .rows
        .iter()
        .map(|row| {
            let mut out: Vec<f64> = row.iter().map(|v| v.unwrap_or(0.0)).collect();
            out.extend(flagged.iter().map(|&c| if row[c].is_none() { 1.0 } else { 0.0 }));
            out
        })
        .collect();
    Ok((names, rows))
}

struct Reader {
    path: String,
    header: Vec<String>,
    records: Vec<(usize, Vec<String>)>,
}

fn read_table(path: &Path, min_cols: usize, what: &str) -> Result<Reader> {
    let shown = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                path: shown.clone(),
                line: 1,
                msg: format!("{other:?}"),
            },
        })?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            path: shown.clone(),
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < min_cols {
        return Err(Error::Parse {
            path: shown,
            line: 1,
            msg: format!("{what} file needs at least {min_cols} columns, header has {}", header.len()),
        });
    }
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: shown.clone(),
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(Error::Parse {
                path: shown,
                line,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        records.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Reader {
        path: shown,
        header,
        records,
    })
}

impl Reader {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    fn time(&self, line: usize, s: &str) -> Result<i64> {
        s.parse().map_err(|_| self.err(line, format!("time {s:?} is not an integer")))
    }

    fn cov(&self, line: usize, s: &str) -> Result<Option<f64>> {
        if s.is_empty() || s == "NA" {
            return Ok(None);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => Err(self.err(line, format!("covariate value {s:?} is not a finite number"))),
        }
    }
}

fn sort_ids(ids: BTreeSet<String>) -> Vec<String> {
    let mut v: Vec<String> = ids.into_iter().collect();
    if v.iter().all(|s| s.parse::<i64>().is_ok()) {
        v.sort_by_key(|s| s.parse::<i64>().unwrap());
    }
    v
}

type DyadKey = (i64, usize, usize);

/// Reads a network from an edge file and optional monadic and dyadic files.
/// Without a monadic file, node-period presence comes from the edge file and
/// the only monadic column is the intercept.
pub fn load_network(
    edges_path: &Path,
    monadic_path: Option<&Path>,
    dyadic_path: Option<&Path>,
    opts: &LoadOptions,
) -> Result<DynamicNetwork> {
    let edges = read_table(edges_path, 4, "edge")?;
    let monadic = monadic_path.map(|p| read_table(p, 2, "monadic")).transpose()?;
    let dyadic = dyadic_path.map(|p| read_table(p, 3, "dyadic")).transpose()?;

    // registries
    let mut ids = BTreeSet::new();
    let mut times = BTreeSet::new();
    if let Some(m) = &monadic {
        for (line, r) in &m.records {
            times.insert(m.time(*line, &r[0])?);
            ids.insert(r[1].clone());
        }
    } else {
        for (line, r) in &edges.records {
            times.insert(edges.time(*line, &r[0])?);
            ids.insert(r[1].clone());
            ids.insert(r[2].clone());
        }
    }
    let node_ids = sort_ids(ids);
    let node_index: HashMap<&str, usize> = node_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let period_labels: Vec<i64> = times.into_iter().collect();
    let period_index: HashMap<i64, usize> = period_labels.iter().enumerate().map(|(i, &t)| (t, i)).collect();

    // monadic covariates
    let mut presence: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); period_labels.len()];
    let mut x_names = Vec::new();
    let mut x_rows: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    if let Some(m) = &monadic {
        let mut keys = Vec::with_capacity(m.records.len());
        let mut table = CovTable {
            names: m.header[2..].to_vec(),
            rows: Vec::with_capacity(m.records.len()),
        };
        for (line, r) in &m.records {
            let t = period_index[&m.time(*line, &r[0])?];
            let node = node_index[r[1].as_str()];
            if !presence[t].insert(node) {
                return Err(m.err(*line, format!("node {:?} listed twice for time {}", r[1], r[0])));
            }
            keys.push((t, node));
            table.rows.push(r[2..].iter().map(|s| m.cov(*line, s)).collect::<Result<_>>()?);
        }
        let (names, rows) = expand_missing(&table)?;
        x_names = names;
        x_rows = keys.into_iter().zip(rows).collect();
    }
    if opts.intercept {
        x_names.insert(0, INTERCEPT.to_string());
    }

    // edges
    let directed = opts.directed;
    let mut y: BTreeMap<DyadKey, bool> = BTreeMap::new();
    let mut edge_periods = vec![BTreeSet::new(); period_labels.len()];
    for (line, r) in &edges.records {
        let time = edges.time(*line, &r[0])?;
        let Some(&t) = period_index.get(&time) else {
            return Err(edges.err(*line, format!("time {time} has no monadic rows")));
        };
        let lookup = |s: &str| {
            node_index
                .get(s)
                .copied()
                .ok_or_else(|| edges.err(*line, format!("unknown node {s:?}")))
        };
        let (mut a, mut b) = (lookup(&r[1])?, lookup(&r[2])?);
        if a == b {
            return Err(edges.err(*line, format!("self-loop on node {:?}", r[1])));
        }
        if !directed && a > b {
            std::mem::swap(&mut a, &mut b);
        }
        let val = match r[3].as_str() {
            "0" => false,
            "1" => true,
            other => return Err(edges.err(*line, format!("edge value {other:?} is not 0 or 1"))),
        };
        if monadic.is_some() {
            for (node, id) in [(a, &r[1]), (b, &r[2])] {
                if !presence[t].contains(&node) {
                    return Err(edges.err(*line, format!("node {id:?} is not present at time {time}")));
                }
            }
        } else {
            edge_periods[t].insert(a);
            edge_periods[t].insert(b);
        }
        if y.insert((time, a, b), val).is_some() {
            return Err(edges.err(*line, format!("duplicate dyad ({}, {}) at time {time}", r[1], r[2])));
        }
    }
    if monadic.is_none() {
        presence = edge_periods;
    }

    // dyadic covariates
    let mut d_header = Vec::new();
    let mut d_raw: HashMap<DyadKey, Vec<Option<f64>>> = HashMap::new();
    if let Some(dy) = &dyadic {
        d_header = dy.header[3..].to_vec();
        for (line, r) in &dy.records {
            let time = dy.time(*line, &r[0])?;
            let lookup = |s: &str| {
                node_index
                    .get(s)
                    .copied()
                    .ok_or_else(|| dy.err(*line, format!("unknown node {s:?}")))
            };
            let (mut a, mut b) = (lookup(&r[1])?, lookup(&r[2])?);
            if !directed && a > b {
                std::mem::swap(&mut a, &mut b);
            }
            let row = r[3..].iter().map(|s| dy.cov(*line, s)).collect::<Result<_>>()?;
            if d_raw.insert((time, a, b), row).is_some() {
                return Err(dy.err(*line, format!("duplicate dyad ({}, {}) at time {time}", r[1], r[2])));
            }
        }
    }

    let mut monadic_parts = Vec::with_capacity(period_labels.len());
    for (t, nodes) in presence.iter().enumerate() {
        let mut rows = Vec::with_capacity(nodes.len());
        for &node in nodes {
            let mut row = Vec::with_capacity(x_names.len());
            if opts.intercept {
                row.push(1.0);
            }
            if let Some(r) = x_rows.get(&(t, node)) {
                row.extend_from_slice(r);
            }
            rows.push((node, row));
        }
        monadic_parts.push(rows);
    }

    let mut keys: Vec<DyadKey> = if opts.dense {
        let mut all = Vec::new();
        for (t, nodes) in presence.iter().enumerate() {
            let nodes: Vec<usize> = nodes.iter().copied().collect();
            all.extend(all_pairs(&nodes, directed).into_iter().map(|(p, q)| (period_labels[t], p, q)));
        }
        all
    } else {
        y.keys().copied().collect()
    };
    keys.sort_unstable();
    // dyads without a row are missing on every column
    let mut d_names = Vec::new();
    let mut d_rows: Vec<Vec<f64>> = vec![Vec::new(); keys.len()];
    if dyadic.is_some() {
        let mut no_row = 0usize;
        let table = CovTable {
            names: d_header,
            rows: keys
                .iter()
                .map(|key| {
                    d_raw.remove(key).unwrap_or_else(|| {
                        no_row += 1;
                        vec![None; dyadic.as_ref().map_or(0, |d| d.header.len() - 3)]
                    })
                })
                .collect(),
        };
        if no_row > 0 {
            warn!("{no_row} modeled dyads have no dyadic row; treated as missing");
        }
        if !d_raw.is_empty() {
            warn!("{} dyadic rows refer to dyads that are not modeled", d_raw.len());
        }
        (d_names, d_rows) = expand_missing(&table)?;
    }
    let dyads = keys
        .iter()
        .zip(d_rows)
        .map(|(key, d)| DyadRecord {
            t: period_index[&key.0],
            p: key.1,
            q: key.2,
            y: y.get(key).copied().unwrap_or(false),
            d,
        })
        .collect();

    DynamicNetwork::from_parts(NetworkParts {
        directed,
        node_ids,
        period_labels,
        x_names,
        d_names,
        monadic: monadic_parts,
        dyads,
    })
}

/// Paths of the three files written by [`write_network`].
#[derive(Clone, Debug)]
pub struct NetworkFiles {
    pub edges: PathBuf,
    pub monadic: PathBuf,
    pub dyadic: Option<PathBuf>,
}

impl NetworkFiles {
    pub fn in_dir(dir: &Path) -> Self {
        let dyadic = dir.join("dyadic.csv");
        NetworkFiles {
            edges: dir.join("edges.csv"),
            monadic: dir.join("monadic.csv"),
            dyadic: dyadic.exists().then_some(dyadic),
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(content.as_bytes()).map_err(|e| Error::io(path, e))
}

fn csv_line(fields: impl IntoIterator<Item = String>) -> String {
    let mut out = String::new();
    for (i, f) in fields.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        if f.contains([',', '"', '\n']) {
            out.push('"');
            out.push_str(&f.replace('"', "\"\""));
            out.push('"');
        } else {
            out.push_str(&f);
        }
    }
    out.push('\n');
    out
}

/// Writes every modeled dyad (sparse listing, so loading with `dense = false`
/// reproduces the network). A leading intercept column is not written.
pub fn write_network(net: &DynamicNetwork, dir: &Path) -> Result<NetworkFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ids = net.node_ids();
    let labels = net.period_labels();

    let mut edges = csv_line(["time", "node_a", "node_b", "y"].map(String::from));
    for dy in net.dyads() {
        edges.push_str(&csv_line([
            labels[dy.t].to_string(),
            ids[dy.p].clone(),
            ids[dy.q].clone(),
            u8::from(dy.y).to_string(),
        ]));
    }

    let skip = usize::from(net.x_names().first().is_some_and(|n| n == INTERCEPT));
    let mut monadic = csv_line(
        ["time", "node"]
            .map(String::from)
            .into_iter()
            .chain(net.x_names()[skip..].iter().cloned()),
    );
    for slot in 0..net.n_slots() {
        monadic.push_str(&csv_line(
            [labels[net.slot_period(slot)].to_string(), ids[net.slot_node(slot)].clone()]
                .into_iter()
                .chain(net.x_row(slot)[skip..].iter().map(|v| v.to_string())),
        ));
    }

    let files = NetworkFiles {
        edges: dir.join("edges.csv"),
        monadic: dir.join("monadic.csv"),
        dyadic: (net.jd() > 0).then(|| dir.join("dyadic.csv")),
    };
    write_file(&files.edges, &edges)?;
    write_file(&files.monadic, &monadic)?;
    if let Some(path) = &files.dyadic {
        let mut dyadic = csv_line(
            ["time", "node_a", "node_b"]
                .map(String::from)
                .into_iter()
                .chain(net.d_names().iter().cloned()),
        );
        for (i, dy) in net.dyads().iter().enumerate() {
            dyadic.push_str(&csv_line(
                [labels[dy.t].to_string(), ids[dy.p].clone(), ids[dy.q].clone()]
                    .into_iter()
                    .chain(net.d_row(i).iter().map(|v| v.to_string())),
            ));
        }
        write_file(path, &dyadic)?;
    }
    Ok(files)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    schema_version: u32,
    #[serde(default)]
    config: serde_json::Value,
    model: FittedModel,
}

/// Writes a fitted model as versioned JSON, with an optional snapshot of
/// the run configuration.
pub fn save_model(fitted: &FittedModel, path: &Path, config: Option<&serde_json::Value>) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        schema_version: MODEL_SCHEMA_VERSION,
        config: config.cloned().unwrap_or(serde_json::Value::Null),
        model: fitted.clone(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::ModelFormat(e.to_string()))?;
    write_file(path, &text)
}

/// Reads a model file and its stored configuration snapshot.
pub fn load_model_with_config(path: &Path) -> Result<(FittedModel, serde_json::Value)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))?;
    match value.get("format").and_then(|v| v.as_str()) {
        Some(MODEL_FORMAT) => {}
        _ => {
            return Err(Error::ModelFormat(format!(
                "{} is not a {MODEL_FORMAT} file",
                path.display()
            )))
        }
    }
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::ModelFormat("missing schema_version".into()))?;
    if version != u64::from(MODEL_SCHEMA_VERSION) {
        return Err(Error::SchemaVersion {
            found: version as u32,
            expected: MODEL_SCHEMA_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))?;
    Ok((file.model, file.config))
}

pub fn load_model(path: &Path) -> Result<FittedModel> {
    Ok(load_model_with_config(path)?.0)
}
