//! Heterogeneous graph model, meta-path views and the on-disk directory format.
//!
//! A graph directory holds:
//!
//! ```text
//! manifest.tsv          node_type <name> <count>
//!                       relation <name> <src_type> <dst_type>
//!                       metapath <name> <t1,t2,...> <r1,r2,...>
//!                       target <type>
//! edges_<relation>.tsv  src<TAB>dst[<TAB>weight]   (0-based)
//! features_<type>.tsv   header "n d", then n rows of d floats
//! labels.tsv            node_index<TAB>class_index (target nodes)
//! ```
//!
//! Lines starting with `#` are comments in every file.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing manifest: {0}")]
    MissingManifest(PathBuf),
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
    #[error("dangling endpoint in relation {relation}: index {index} >= {count} nodes of type {node_type}")]
    DanglingEndpoint {
        relation: String,
        node_type: String,
        index: usize,
        count: usize,
    },
    #[error("feature matrix for {node_type} has {rows} rows, expected {count}")]
    FeatureRows {
        node_type: String,
        rows: usize,
        count: usize,
    },
    #[error("non-positive weight {weight} in relation {relation}")]
    NonPositiveWeight { relation: String, weight: f64 },
    #[error("unknown node type {0}")]
    UnknownType(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("invalid meta-path {name}: {msg}")]
    InvalidMetaPath { name: String, msg: String },
    #[error("invalid graph: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, GraphError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub name: String,
    pub src_type: usize,
    pub dst_type: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(src: usize, dst: usize) -> Self {
        Edge { src, dst, weight: 1.0 }
    }
}

/// Composite relation between target nodes, e.g. author-paper-author.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaPath {
    pub name: String,
    pub node_types: Vec<String>,
    pub relations: Vec<String>,
}

impl MetaPath {
    pub fn new(name: &str, node_types: &[&str], relations: &[&str]) -> Self {
        MetaPath {
            name: name.to_string(),
            node_types: node_types.iter().map(|s| s.to_string()).collect(),
            relations: relations.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Typed nodes, typed edge lists, optional per-type features and target labels.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    pub node_types: Vec<String>,
    pub node_counts: Vec<usize>,
    pub relations: Vec<Relation>,
    /// Edge list per relation, parallel to `relations`.
    pub edges: Vec<Vec<Edge>>,
    /// Dense feature matrix per node type, parallel to `node_types`.
    pub features: Vec<Option<Array2<f64>>>,
    /// Class per target node; `None` entries are unlabeled.
    pub labels: Option<Vec<Option<usize>>>,
    pub target_type: usize,
    pub metapaths: Vec<MetaPath>,
}

impl HeteroGraph {
    pub fn type_index(&self, name: &str) -> Result<usize> {
        self.node_types
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| GraphError::UnknownType(name.to_string()))
    }

    pub fn relation_index(&self, name: &str) -> Result<usize> {
        self.relations
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| GraphError::UnknownRelation(name.to_string()))
    }

    pub fn num_targets(&self) -> usize {
        self.node_counts[self.target_type]
    }

    pub fn target_name(&self) -> &str {
        &self.node_types[self.target_type]
    }

    /// Relations with the target type on exactly one side, paired with the
    /// other endpoint type.
    pub fn target_relations(&self) -> Vec<(usize, usize)> {
        self.relations
            .iter()
            .enumerate()
            .filter_map(|(r, rel)| {
                if rel.src_type == self.target_type && rel.dst_type != self.target_type {
                    Some((r, rel.dst_type))
                } else if rel.dst_type == self.target_type && rel.src_type != self.target_type {
                    Some((r, rel.src_type))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Neighbor lists of each target node under relation `r` (deduplicated, sorted).
    pub fn target_neighbors(&self, r: usize) -> Vec<Vec<usize>> {
        let rel = &self.relations[r];
        let mut nbrs = vec![BTreeSet::new(); self.num_targets()];
        for e in &self.edges[r] {
            if rel.src_type == self.target_type {
                nbrs[e.src].insert(e.dst);
            } else {
                nbrs[e.dst].insert(e.src);
            }
        }
        nbrs.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Target features, or a one-hot identity matrix when the target type has none.
    pub fn target_features(&self) -> Array2<f64> {
        self.features_or_identity(self.target_type)
    }

    pub fn features_or_identity(&self, t: usize) -> Array2<f64> {
        match &self.features[t] {
            Some(x) => x.clone(),
            None => Array2::eye(self.node_counts[t]),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().flatten().max().map(|m| m + 1))
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Violation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn violations(&self) -> impl Iterator<Item = &Issue> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Violation)
    }

    pub fn has_violations(&self) -> bool {
        self.violations().next().is_some()
    }

    fn warn(&mut self, message: String) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            message,
        });
    }

    fn violation(&mut self, message: String) {
        self.issues.push(Issue {
            severity: Severity::Violation,
            message,
        });
    }
}

/// Checks every structural invariant and reports instead of failing.
pub fn validate_heterograph(g: &HeteroGraph) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n_types = g.node_types.len();

    if g.node_counts.len() != n_types {
        report.violation(format!(
            "{} node counts for {} node types",
            g.node_counts.len(),
            n_types
        ));
        return report;
    }
    if g.features.len() != n_types {
        report.violation(format!(
            "{} feature slots for {} node types",
            g.features.len(),
            n_types
        ));
    }
    if g.edges.len() != g.relations.len() {
        report.violation(format!(
            "{} edge lists for {} relations",
            g.edges.len(),
            g.relations.len()
        ));
    }
    if g.target_type >= n_types {
        report.violation(format!("target type index {} out of range", g.target_type));
        return report;
    }
    if n_types + g.relations.len() <= 2 {
        report.warn(format!(
            "homogeneous graph: {} node types + {} relations <= 2",
            n_types,
            g.relations.len()
        ));
    }

    for (rel, edges) in g.relations.iter().zip(&g.edges) {
        if rel.src_type >= n_types || rel.dst_type >= n_types {
            report.violation(format!("relation {} references unknown type", rel.name));
            continue;
        }
        let (ns, nd) = (g.node_counts[rel.src_type], g.node_counts[rel.dst_type]);
        for e in edges {
            if e.src >= ns {
                report.violation(format!(
                    "dangling endpoint: relation {} src {} >= {}",
                    rel.name, e.src, ns
                ));
            }
            if e.dst >= nd {
                report.violation(format!(
                    "dangling endpoint: relation {} dst {} >= {}",
                    rel.name, e.dst, nd
                ));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                report.violation(format!(
                    "relation {} has non-positive weight {}",
                    rel.name, e.weight
                ));
            }
        }
    }

    for (t, feat) in g.features.iter().enumerate() {
        if let Some(x) = feat {
            if x.nrows() != g.node_counts[t] {
                report.violation(format!(
                    "feature rows {} != node count {} for type {}",
                    x.nrows(),
                    g.node_counts[t],
                    g.node_types[t]
                ));
            }
            if x.iter().any(|v| !v.is_finite()) {
                report.violation(format!("non-finite feature for type {}", g.node_types[t]));
            }
        }
    }

    if let Some(labels) = &g.labels {
        if labels.len() != g.num_targets() {
            report.violation(format!(
                "{} labels for {} target nodes",
                labels.len(),
                g.num_targets()
            ));
        }
    }

    for mp in &g.metapaths {
        if let Err(e) = resolve_metapath(g, mp) {
            report.violation(e.to_string());
        }
    }
    report
}

/// A resolved hop: relation index and whether it is traversed dst -> src.
#[derive(Debug, Clone, Copy)]
struct Hop {
    relation: usize,
    reversed: bool,
}

fn resolve_metapath(g: &HeteroGraph, p: &MetaPath) -> Result<Vec<Hop>> {
    let invalid = |msg: String| GraphError::InvalidMetaPath {
        name: p.name.clone(),
        msg,
    };
    if p.relations.len() < 2 {
        return Err(invalid(format!(
            "length {} < 2",
            p.relations.len()
        )));
    }
    if p.node_types.len() != p.relations.len() + 1 {
        return Err(invalid(format!(
            "{} node types for {} relations",
            p.node_types.len(),
            p.relations.len()
        )));
    }
    let types = p
        .node_types
        .iter()
        .map(|t| g.type_index(t))
        .collect::<Result<Vec<_>>>()?;
    if types[0] != g.target_type || types[types.len() - 1] != g.target_type {
        return Err(invalid("must start and end at the target type".into()));
    }
    p.relations
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let ri = g.relation_index(r)?;
            let rel = &g.relations[ri];
            let (from, to) = (types[i], types[i + 1]);
            if rel.src_type == from && rel.dst_type == to {
                Ok(Hop {
                    relation: ri,
                    reversed: false,
                })
            } else if rel.src_type == to && rel.dst_type == from {
                Ok(Hop {
                    relation: ri,
                    reversed: true,
                })
            } else {
                Err(invalid(format!(
                    "relation {} does not connect {} and {}",
                    r, p.node_types[i], p.node_types[i + 1]
                )))
            }
        })
        .collect()
}

/// Weighted symmetric graph over target nodes induced by one meta-path.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaPathView {
    pub metapath: MetaPath,
    pub adjacency: Array2<f64>,
}

impl MetaPathView {
    /// Wraps an adjacency after checking symmetry, range and zero diagonal.
    pub fn new(metapath: MetaPath, adjacency: Array2<f64>) -> Result<Self> {
        check_view_adjacency(&adjacency)?;
        Ok(MetaPathView {
            metapath,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn num_edges(&self) -> usize {
        let n = self.n();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency[[i, j]] > 0.0)
            .count()
    }
}

pub fn check_view_adjacency(a: &Array2<f64>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(GraphError::Invalid(format!(
            "adjacency is {}x{}",
            n,
            a.ncols()
        )));
    }
    for i in 0..n {
        if a[[i, i]] != 0.0 {
            return Err(GraphError::Invalid(format!("nonzero diagonal at {i}")));
        }
        for j in 0..n {
            let v = a[[i, j]];
            if !(0.0..=1.0).contains(&v) {
                return Err(GraphError::Invalid(format!(
                    "entry ({i},{j}) = {v} outside [0,1]"
                )));
            }
            if v != a[[j, i]] {
                return Err(GraphError::Invalid(format!("asymmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// Divides by the maximum entry; the all-zero matrix passes through.
pub fn normalize_view_weights(raw: &Array2<f64>) -> Array2<f64> {
    let max = raw.iter().cloned().fold(0.0_f64, f64::max);
    if max > 0.0 {
        raw / max
    } else {
        raw.clone()
    }
}

/// Path-count composition of 0/1 biadjacencies along `p`, diagonal zeroed,
/// symmetrized and max-normalized.
pub fn build_metapath_view(g: &HeteroGraph, p: &MetaPath) -> Result<MetaPathView> {
    let hops = resolve_metapath(g, p)?;
    let n = g.num_targets();

    // dense (targets x current type) on the left, sparse biadjacency on the right
    let mut left = Array2::<f64>::eye(n);
    for hop in &hops {
        let rel = &g.relations[hop.relation];
        let (from, to) = if hop.reversed {
            (rel.dst_type, rel.src_type)
        } else {
            (rel.src_type, rel.dst_type)
        };
        let mut pairs: Vec<(usize, usize)> = g.edges[hop.relation]
            .iter()
            .map(|e| if hop.reversed { (e.dst, e.src) } else { (e.src, e.dst) })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        debug_assert_eq!(left.ncols(), g.node_counts[from]);
        let mut next = Array2::<f64>::zeros((n, g.node_counts[to]));
        for (u, v) in pairs {
            let col = left.column(u).to_owned();
            let mut dst = next.column_mut(v);
            dst += &col;
        }
        left = next;
    }

    for i in 0..n {
        left[[i, i]] = 0.0;
    }
    let sym = (&left + &left.t()) * 0.5;
    Ok(MetaPathView {
        metapath: p.clone(),
        adjacency: normalize_view_weights(&sym),
    })
}

pub fn build_all_views(g: &HeteroGraph) -> Result<Vec<MetaPathView>> {
    g.metapaths
        .iter()
        .map(|p| build_metapath_view(g, p))
        .collect()
}

/// Type-level graph: node types plus one edge per relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSchema {
    pub nodes: Vec<String>,
    /// (relation, src type, dst type)
    pub edges: Vec<(String, String, String)>,
}

pub fn network_schema(g: &HeteroGraph) -> NetworkSchema {
    NetworkSchema {
        nodes: g.node_types.clone(),
        edges: g
            .relations
            .iter()
            .map(|r| {
                (
                    r.name.clone(),
                    g.node_types[r.src_type].clone(),
                    g.node_types[r.dst_type].clone(),
                )
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// directory format

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-comment, non-blank lines with their 1-based line numbers.
pub fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> GraphError {
    GraphError::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(file: &str, line: usize, tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(file, line, format!("bad number {tok:?}")))
}

/// Parses a `features_<type>.tsv` style matrix: header `n d`, then n rows.
pub fn parse_matrix(file: &str, text: &str) -> Result<Array2<f64>> {
    let mut lines = data_lines(text);
    let (ln, header) = lines
        .next()
        .ok_or_else(|| parse_err(file, 0, "missing header"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_err(file, ln, "header must be `n d`"));
    }
    let rows: usize = parse_num(file, ln, dims[0])?;
    let cols: usize = parse_num(file, ln, dims[1])?;
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (ln, line) in lines {
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(parse_num::<f64>(file, ln, tok)?);
        }
        if values.len() - before != cols {
            return Err(parse_err(
                file,
                ln,
                format!("expected {cols} values, got {}", values.len() - before),
            ));
        }
        seen += 1;
    }
    Array2::from_shape_vec((seen, cols), values)
        .map_err(|e| parse_err(file, 0, e.to_string()))
        .and_then(|m| {
            if seen != rows {
                // row count is checked against the node count by validation;
                // the header must at least agree with the body
                Err(parse_err(
                    file,
                    0,
                    format!("header declares {rows} rows, body has {seen}"),
                ))
            } else {
                Ok(m)
            }
        })
}

pub fn format_matrix(m: &Array2<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join("\t"));
        out.push('\n');
    }
    out
}

/// Loads and validates a graph directory.
pub fn load_heterograph(dir: &Path) -> Result<HeteroGraph> {
    let manifest_path = dir.join("manifest.tsv");
    if !manifest_path.is_file() {
        return Err(GraphError::MissingManifest(manifest_path));
    }
    let manifest = read(&manifest_path)?;
    let mf = "manifest.tsv";

    let mut node_types = Vec::new();
    let mut node_counts = Vec::new();
    let mut raw_relations: Vec<(String, String, String, usize)> = Vec::new();
    let mut metapaths = Vec::new();
    let mut target: Option<(String, usize)> = None;

    for (ln, line) in data_lines(&manifest) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["node_type", name, count] => {
                node_types.push(name.to_string());
                node_counts.push(parse_num(mf, ln, count)?);
            }
            ["relation", name, src, dst] => {
                raw_relations.push((name.to_string(), src.to_string(), dst.to_string(), ln));
            }
            ["metapath", name, types, rels] => metapaths.push(MetaPath {
                name: name.to_string(),
                node_types: types.split(',').map(str::to_string).collect(),
                relations: rels.split(',').map(str::to_string).collect(),
            }),
            ["target", t] => target = Some((t.to_string(), ln)),
            _ => return Err(parse_err(mf, ln, format!("unrecognized line {line:?}"))),
        }
    }

    let type_of = |name: &str, ln: usize| {
        node_types
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| parse_err(mf, ln, format!("unknown node type {name}")))
    };
    let relations = raw_relations
        .iter()
        .map(|(name, s, d, ln)| {
            Ok(Relation {
                name: name.clone(),
                src_type: type_of(s, *ln)?,
                dst_type: type_of(d, *ln)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (target_name, tln) = target.ok_or_else(|| parse_err(mf, 0, "missing `target` line"))?;
    let target_type = type_of(&target_name, tln)?;

    let mut edges = Vec::with_capacity(relations.len());
    for rel in &relations {
        let fname = format!("edges_{}.tsv", rel.name);
        let text = read(&dir.join(&fname))?;
        let mut list = Vec::new();
        for (ln, line) in data_lines(&text) {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 && toks.len() != 3 {
                return Err(parse_err(&fname, ln, "expected `src dst [weight]`"));
            }
            let src = parse_num(&fname, ln, toks[0])?;
            let dst = parse_num(&fname, ln, toks[1])?;
            let weight = match toks.get(2) {
                Some(w) => parse_num(&fname, ln, w)?,
                None => 1.0,
            };
            if !(weight > 0.0 && f64::is_finite(weight)) {
                return Err(GraphError::NonPositiveWeight {
                    relation: rel.name.clone(),
                    weight,
                });
            }
            for (idx, ty) in [(src, rel.src_type), (dst, rel.dst_type)] {
                if idx >= node_counts[ty] {
                    return Err(GraphError::DanglingEndpoint {
                        relation: rel.name.clone(),
                        node_type: node_types[ty].clone(),
                        index: idx,
                        count: node_counts[ty],
                    });
                }
            }
            list.push(Edge { src, dst, weight });
        }
        edges.push(list);
    }

    let mut features = Vec::with_capacity(node_types.len());
    for (t, name) in node_types.iter().enumerate() {
        let fname = format!("features_{name}.tsv");
        let path = dir.join(&fname);
        if path.is_file() {
            let m = parse_matrix(&fname, &read(&path)?)?;
            if m.nrows() != node_counts[t] {
                return Err(GraphError::FeatureRows {
                    node_type: name.clone(),
                    rows: m.nrows(),
                    count: node_counts[t],
                });
            }
            features.push(Some(m));
        } else {
            features.push(None);
        }
    }

    let labels_path = dir.join("labels.tsv");
    let labels = if labels_path.is_file() {
        let text = read(&labels_path)?;
        let mut labels = vec![None; node_counts[target_type]];
        for (ln, line) in data_lines(&text) {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(parse_err("labels.tsv", ln, "expected `node class`"));
            }
            let node: usize = parse_num("labels.tsv", ln, toks[0])?;
            let class: usize = parse_num("labels.tsv", ln, toks[1])?;
            if node >= labels.len() {
                return Err(GraphError::DanglingEndpoint {
                    relation: "labels".into(),
                    node_type: target_name.clone(),
                    index: node,
                    count: labels.len(),
                });
            }
            labels[node] = Some(class);
        }
        Some(labels)
    } else {
        None
    };

    let g = HeteroGraph {
        node_types,
        node_counts,
        relations,
        edges,
        features,
        labels,
        target_type,
        metapaths,
    };
    let report = validate_heterograph(&g);
    if let Some(v) = report.violations().next() {
        return Err(GraphError::Invalid(v.message.clone()));
    }
    for issue in &report.issues {
        log::warn!("{}", issue.message);
    }
    Ok(g)
}

/// Writes `g` in the directory format. `header`, if given, is written as a
/// `#` comment line at the top of every file.
pub fn save_heterograph(g: &HeteroGraph, dir: &Path, header: Option<&str>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| GraphError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let head = || header.map(|h| format!("# {h}\n")).unwrap_or_default();

    let mut manifest = head();
    for (name, count) in g.node_types.iter().zip(&g.node_counts) {
        writeln!(manifest, "node_type\t{name}\t{count}").unwrap();
    }
    for r in &g.relations {
        writeln!(
            manifest,
            "relation\t{}\t{}\t{}",
            r.name, g.node_types[r.src_type], g.node_types[r.dst_type]
        )
        .unwrap();
    }
    for p in &g.metapaths {
        writeln!(
            manifest,
            "metapath\t{}\t{}\t{}",
            p.name,
            p.node_types.join(","),
            p.relations.join(",")
        )
        .unwrap();
    }
    writeln!(manifest, "target\t{}", g.target_name()).unwrap();
    write(&dir.join("manifest.tsv"), &manifest)?;

    for (r, list) in g.relations.iter().zip(&g.edges) {
        let mut out = head();
        for e in list {
            if e.weight == 1.0 {
                writeln!(out, "{}\t{}", e.src, e.dst).unwrap();
            } else {
                writeln!(out, "{}\t{}\t{}", e.src, e.dst, e.weight).unwrap();
            }
        }
        write(&dir.join(format!("edges_{}.tsv", r.name)), &out)?;
    }

    for (name, feat) in g.node_types.iter().zip(&g.features) {
        if let Some(m) = feat {
            let out = head() + &format_matrix(m);
            write(&dir.join(format!("features_{name}.tsv")), &out)?;
        }
    }

    if let Some(labels) = &g.labels {
        let mut out = head();
        for (i, l) in labels.iter().enumerate() {
            if let Some(c) = l {
                writeln!(out, "{i}\t{c}").unwrap();
            }
        }
        write(&dir.join("labels.tsv"), &out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Authors and papers with a writes relation; `links` are (author, paper).
    fn authors_papers(n_a: usize, n_p: usize, links: &[(usize, usize)]) -> HeteroGraph {
        HeteroGraph {
            node_types: vec!["author".into(), "paper".into()],
            node_counts: vec![n_a, n_p],
            relations: vec![Relation {
                name: "writes".into(),
                src_type: 0,
                dst_type: 1,
            }],
            edges: vec![links.iter().map(|&(a, p)| Edge::new(a, p)).collect()],
            features: vec![None, None],
            labels: None,
            target_type: 0,
            metapaths: vec![apa()],
        }
    }

    fn apa() -> MetaPath {
        MetaPath::new("APA", &["author", "paper", "author"], &["writes", "writes"])
    }

    #[test]
    fn single_shared_paper() {
        let g = authors_papers(2, 1, &[(0, 0), (1, 0)]);
        let v = build_metapath_view(&g, &apa()).unwrap();
        assert_eq!(v.adjacency, array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn no_shared_paper_means_no_edge() {
        let g = authors_papers(2, 2, &[(0, 0), (1, 1)]);
        let v = build_metapath_view(&g, &apa()).unwrap();
        assert_eq!(v.adjacency[[0, 1]], 0.0);
    }

    #[test]
    fn path_counts_are_max_normalized() {
        // a0,a1 share p0,p1; a0,a2 share p2
        let g = authors_papers(3, 3, &[(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 2)]);
        let v = build_metapath_view(&g, &apa()).unwrap();
        assert_eq!(v.adjacency[[0, 1]], 1.0);
        assert_eq!(v.adjacency[[0, 2]], 0.5);
        assert_eq!(v.adjacency[[1, 2]], 0.0);
    }

    #[test]
    fn normalize_examples() {
        let raw = array![[0.0, 2.0, 1.0], [2.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let n = normalize_view_weights(&raw);
        assert_eq!(n[[0, 1]], 1.0);
        assert_eq!(n[[0, 2]], 0.5);
        let z = Array2::<f64>::zeros((3, 3));
        assert_eq!(normalize_view_weights(&z), z);
        assert_eq!(normalize_view_weights(&n), n);
    }

    #[test]
    fn unknown_relation_in_metapath() {
        let g = authors_papers(2, 1, &[(0, 0)]);
        let p = MetaPath::new("bad", &["author", "paper", "author"], &["cites", "writes"]);
        assert!(matches!(
            build_metapath_view(&g, &p),
            Err(GraphError::UnknownRelation(_))
        ));
        let p = MetaPath::new("bad", &["author", "venue", "author"], &["writes", "writes"]);
        assert!(matches!(
            build_metapath_view(&g, &p),
            Err(GraphError::UnknownType(_))
        ));
    }

    #[test]
    fn metapath_must_have_length_two() {
        let g = authors_papers(2, 1, &[(0, 0)]);
        let p = MetaPath::new("A", &["author", "paper"], &["writes"]);
        assert!(build_metapath_view(&g, &p).is_err());
    }

    #[test]
    fn validation_reports() {
        let mut g = authors_papers(2, 1, &[(0, 0), (1, 0)]);
        assert!(validate_heterograph(&g).is_empty());

        g.features[0] = Some(Array2::zeros((3, 4)));
        let r = validate_heterograph(&g);
        assert!(r.has_violations());

        let homo = HeteroGraph {
            node_types: vec!["u".into()],
            node_counts: vec![3],
            relations: vec![Relation {
                name: "knows".into(),
                src_type: 0,
                dst_type: 0,
            }],
            edges: vec![vec![Edge::new(0, 1)]],
            features: vec![None],
            labels: None,
            target_type: 0,
            metapaths: vec![],
        };
        let r = validate_heterograph(&homo);
        assert_eq!(r.issues.len(), 1);
        assert_eq!(r.issues[0].severity, Severity::Warning);
        assert!(r.issues[0].message.contains("homogeneous graph"));
        let s = network_schema(&homo);
        assert_eq!((s.nodes.len(), s.edges.len()), (1, 1));
    }

    #[test]
    fn view_adjacency_checks() {
        assert!(check_view_adjacency(&array![[0.0, 0.5], [0.5, 0.0]]).is_ok());
        assert!(check_view_adjacency(&array![[0.0, 0.5], [0.4, 0.0]]).is_err());
        assert!(check_view_adjacency(&array![[0.1, 0.5], [0.5, 0.0]]).is_err());
        assert!(check_view_adjacency(&array![[0.0, 1.5], [1.5, 0.0]]).is_err());
    }

    #[test]
    fn target_neighbors_from_either_side() {
        let mut g = authors_papers(2, 3, &[(0, 0), (0, 2), (0, 2), (1, 1)]);
        assert_eq!(g.target_neighbors(0), vec![vec![0, 2], vec![1]]);
        g.target_type = 1;
        assert_eq!(g.target_neighbors(0), vec![vec![0], vec![1], vec![0]]);
    }

    #[test]
    fn matrix_format_parses() {
        let m = parse_matrix("f", "# c\n2 2\n1 2\n3.5\t-4e-3\n").unwrap();
        assert_eq!(m, array![[1.0, 2.0], [3.5, -4e-3]]);
        assert!(parse_matrix("f", "2 2\n1 2\n").is_err());
        assert!(parse_matrix("f", "1 2\n1 2 3\n").is_err());
    }
}
