//! Dual-aggregation contrastive encoder.
//!
//! The meta-path branch runs one GCN layer per view and fuses the views with
//! semantic attention; the schema branch aggregates typed neighbors with
//! node-level and type-level attention. Both branches share the per-type
//! feature projections and feed a two-layer projection head.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::augment::AugmentConfig;
use crate::hetgraph::{HeteroGraph, MetaPathView};
use crate::tensor::{xavier_init, AdamState, ParamStore, Tape, TensorError, Var};

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("no meta-path views")]
    NoViews,
    #[error("view {index} has {got} nodes, expected {expected}")]
    NodeCount {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("target type has no relation to another node type")]
    NoSchemaRelations,
    #[error("non-finite loss at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("params file: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EncoderError>;

/// How feature columns are chosen for masking in the schema view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskBias {
    #[default]
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub dim: usize,
    pub tau: f64,
    pub lambda: f64,
    /// keep probability of each feature column of non-target types
    pub p_tau: f64,
    /// keep probability of each target-neighbor edge in the schema view
    pub p_e: f64,
    pub epochs: usize,
    pub patience: usize,
    pub t_pos: usize,
    pub seed: u64,
    pub mask_bias: MaskBias,
    pub aug: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            dim: 64,
            tau: 0.5,
            lambda: 0.5,
            p_tau: 0.7,
            p_e: 0.7,
            epochs: 200,
            patience: 20,
            t_pos: 5,
            seed: 0,
            mask_bias: MaskBias::Uniform,
            aug: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EncoderError::Config(m.to_string()));
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0,1]");
        }
        if !(0.0..=1.0).contains(&self.p_tau) || !(0.0..=1.0).contains(&self.p_e) {
            return bad("p_tau and p_e must lie in [0,1]");
        }
        if !(self.lr > 0.0) || self.dim == 0 {
            return bad("lr and dim must be positive");
        }
        Ok(())
    }
}

const LEAKY_SLOPE: f64 = 0.2;

fn proj_w(t: &str) -> String {
    format!("proj.{t}.w")
}
fn proj_b(t: &str) -> String {
    format!("proj.{t}.b")
}
fn gcn_w(m: &str) -> String {
    format!("mp.gcn.{m}.w")
}
fn node_att(r: &str, side: &str) -> String {
    format!("sc.node.{r}.{side}")
}

/// Node types whose features the encoder projects: the target first, then the
/// neighbor types of target relations in relation order.
fn projected_types(g: &HeteroGraph) -> Vec<usize> {
    let mut types = vec![g.target_type];
    for (_, t) in g.target_relations() {
        if !types.contains(&t) {
            types.push(t);
        }
    }
    types
}

/// Xavier-initialized weights and zero biases, in a fixed name order.
pub fn init_params(g: &HeteroGraph, metapaths: &[String], dim: usize, seed: u64) -> ParamStore {
    let mut store = ParamStore::new();
    let mut k = 0u64;
    let mut xavier = |rows: usize, cols: usize| {
        k += 1;
        xavier_init(rows, cols, seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
    };
    for t in projected_types(g) {
        let name = &g.node_types[t];
        let d_in = g.features[t].as_ref().map_or(g.node_counts[t], |x| x.ncols());
        store.insert(proj_w(name), xavier(d_in, dim));
        store.insert(proj_b(name), Array2::zeros((1, dim)));
    }
    for m in metapaths {
        store.insert(gcn_w(m), xavier(dim, dim));
    }
    store.insert("mp.att.w", xavier(dim, dim));
    store.insert("mp.att.b", Array2::zeros((1, dim)));
    store.insert("mp.att.q", xavier(dim, 1));
    for (r, _) in g.target_relations() {
        let rel = &g.relations[r].name;
        store.insert(node_att(rel, "a_self"), xavier(dim, 1));
        store.insert(node_att(rel, "a_nbr"), xavier(dim, 1));
    }
    store.insert("sc.att.w", xavier(dim, dim));
    store.insert("sc.att.b", Array2::zeros((1, dim)));
    store.insert("sc.att.q", xavier(dim, 1));
    store.insert("head.w1", xavier(dim, dim));
    store.insert("head.b1", Array2::zeros((1, dim)));
    store.insert("head.w2", xavier(dim, dim));
    store.insert("head.b2", Array2::zeros((1, dim)));
    store
}

/// Parameters placed on a tape, looked up by name.
pub struct BoundParams {
    vars: HashMap<String, Var>,
    order: Vec<Var>,
}

impl BoundParams {
    pub fn bind(store: &ParamStore, tape: &mut Tape) -> Result<Self> {
        let order = store.load(tape)?;
        let vars = store.names.iter().cloned().zip(order.iter().copied()).collect();
        Ok(BoundParams { vars, order })
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| EncoderError::MissingParam(name.to_string()))
    }

    pub fn vars(&self) -> &[Var] {
        &self.order
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}`.
pub fn gcn_normalize(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for i in 0..n {
        m[[i, i]] += 1.0;
    }
    let s: Array1<f64> = m.rows().into_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| s[i] * m[[i, j]] * s[j])
}

/// `elu(X W + b)`.
pub fn project(tape: &mut Tape, x: Var, params: &BoundParams, type_name: &str) -> Result<Var> {
    let h = tape.matmul(x, params.get(&proj_w(type_name))?)?;
    let h = tape.add_row(h, params.get(&proj_b(type_name))?)?;
    Ok(tape.elu(h)?)
}

/// Attention over equally shaped parts: `β = softmax_m(mean_i(tanh(Z_m W + b)) q)`,
/// returns `(Σ β_m Z_m, β)`.
pub fn attention_fuse(tape: &mut Tape, parts: &[Var], w: Var, b: Var, q: Var) -> Result<(Var, Var)> {
    let mut scores = Vec::with_capacity(parts.len());
    for &z in parts {
        let t = tape.matmul(z, w)?;
        let t = tape.add_row(t, b)?;
        let t = tape.tanh(t)?;
        let m = tape.mean_rows(t)?;
        scores.push(tape.matmul(m, q)?);
    }
    let s = tape.concat_cols(&scores)?;
    let beta = tape.softmax_rows(s)?;
    let mut acc = tape.scale_by_entry(parts[0], beta, (0, 0))?;
    for (m, &z) in parts.iter().enumerate().skip(1) {
        let term = tape.scale_by_entry(z, beta, (0, m))?;
        acc = tape.add(acc, term)?;
    }
    Ok((acc, beta))
}

/// Meta-path branch. `views` are GCN-normalized adjacencies paired with their
/// meta-path names; `h` is the projected target feature matrix.
pub fn encode_metapath_scheme(
    tape: &mut Tape,
    views: &[(&str, Var)],
    h: Var,
    params: &BoundParams,
) -> Result<(Var, Var)> {
    if views.is_empty() {
        return Err(EncoderError::NoViews);
    }
    let n = tape.shape(h).0;
    let mut parts = Vec::with_capacity(views.len());
    for (index, (name, a)) in views.iter().enumerate() {
        let got = tape.shape(*a).0;
        if got != n {
            return Err(EncoderError::NodeCount { index, got, expected: n });
        }
        let hw = tape.matmul(h, params.get(&gcn_w(name))?)?;
        let z = tape.matmul(*a, hw)?;
        parts.push(tape.elu(z)?);
    }
    attention_fuse(
        tape,
        &parts,
        params.get("mp.att.w")?,
        params.get("mp.att.b")?,
        params.get("mp.att.q")?,
    )
}

/// Graph-derived inputs of the schema branch.
#[derive(Debug, Clone)]
pub struct SchemaInputs {
    pub n: usize,
    pub target_name: String,
    pub target_features: Array2<f64>,
    /// `(type name, features)` of each projected neighbor type
    pub neighbor_types: Vec<(String, Array2<f64>)>,
    /// `(relation name, index into neighbor_types, adjacency lists)`
    pub relations: Vec<(String, usize, Vec<Vec<usize>>)>,
}

impl SchemaInputs {
    pub fn from_graph(g: &HeteroGraph) -> Result<Self> {
        let rels = g.target_relations();
        if rels.is_empty() {
            return Err(EncoderError::NoSchemaRelations);
        }
        let types = projected_types(g);
        let neighbor_types = types[1..]
            .iter()
            .map(|&t| (g.node_types[t].clone(), g.features_or_identity(t)))
            .collect();
        let relations = rels
            .iter()
            .map(|&(r, t)| {
                let slot = types[1..].iter().position(|&x| x == t).expect("projected type");
                (g.relations[r].name.clone(), slot, g.target_neighbors(r))
            })
            .collect();
        Ok(SchemaInputs {
            n: g.num_targets(),
            target_name: g.target_name().to_string(),
            target_features: g.target_features(),
            neighbor_types,
            relations,
        })
    }
}

/// Schema branch with feature-column masking (keep probability `p_tau`) on
/// neighbor types and edge dropping (keep probability `p_e`). Randomness is
/// drawn only for probabilities below 1.
pub fn encode_schema_scheme(
    tape: &mut Tape,
    inputs: &SchemaInputs,
    h_target: Var,
    params: &BoundParams,
    p_tau: f64,
    p_e: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Var> {
    let n = inputs.n;
    let mut projected = Vec::with_capacity(inputs.neighbor_types.len());
    for (name, x) in &inputs.neighbor_types {
        let mut xm = x.clone();
        if p_tau < 1.0 {
            for mut col in xm.columns_mut() {
                if rng.random::<f64>() >= p_tau {
                    col.fill(0.0);
                }
            }
        }
        let xv = tape.constant(xm)?;
        projected.push(project(tape, xv, params, name)?);
    }

    let mut has_neighbor = vec![false; n];
    let mut per_relation = Vec::with_capacity(inputs.relations.len());
    for (rel, slot, lists) in &inputs.relations {
        let h_nbr = projected[*slot];
        let n_nbr = tape.shape(h_nbr).0;
        let mut mask = Array2::from_elem((n, n_nbr), false);
        for (i, list) in lists.iter().enumerate() {
            for &j in list {
                if p_e >= 1.0 || rng.random::<f64>() < p_e {
                    mask[[i, j]] = true;
                    has_neighbor[i] = true;
                }
            }
        }
        let s_self = tape.matmul(h_target, params.get(&node_att(rel, "a_self"))?)?;
        let s_nbr = tape.matmul(h_nbr, params.get(&node_att(rel, "a_nbr"))?)?;
        let s_nbr = tape.transpose(s_nbr)?;
        let e = tape.outer_sum(s_self, s_nbr)?;
        let e = tape.leaky_relu(e, LEAKY_SLOPE)?;
        let alpha = tape.masked_softmax_rows(e, mask)?;
        let agg = tape.matmul(alpha, h_nbr)?;
        per_relation.push(tape.elu(agg)?);
    }
    let (fused, _) = attention_fuse(
        tape,
        &per_relation,
        params.get("sc.att.w")?,
        params.get("sc.att.b")?,
        params.get("sc.att.q")?,
    )?;
    if has_neighbor.iter().all(|&b| b) {
        return Ok(fused);
    }
    // isolated targets fall back to their own projection
    let d = tape.shape(h_target).1;
    let keep = Array2::from_shape_fn((n, d), |(i, _)| if has_neighbor[i] { 0.0 } else { 1.0 });
    let keep = tape.constant(keep)?;
    let own = tape.hadamard(h_target, keep)?;
    Ok(tape.add(fused, own)?)
}

/// `normalize(elu(z W1 + b1) W2 + b2)`.
pub fn projection_head(tape: &mut Tape, z: Var, params: &BoundParams) -> Result<Var> {
    let h = tape.matmul(z, params.get("head.w1")?)?;
    let h = tape.add_row(h, params.get("head.b1")?)?;
    let h = tape.elu(h)?;
    let o = tape.matmul(h, params.get("head.w2")?)?;
    let o = tape.add_row(o, params.get("head.b2")?)?;
    Ok(tape.row_normalize_l2(o)?)
}

/// Each node's positives: itself plus up to `t_pos` nodes sharing the most
/// views with it (ties to the smaller index). Nodes sharing no view are never
/// positives.
pub fn select_positives(views: &[MetaPathView], t_pos: usize) -> Vec<Vec<usize>> {
    let n = views.first().map_or(0, |v| v.n());
    (0..n)
        .map(|i| {
            let mut counts: Vec<(usize, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (views.iter().filter(|v| v.adjacency[[i, j]] > 0.0).count(), j))
                .filter(|&(c, _)| c > 0)
                .collect();
            counts.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut p: Vec<usize> = std::iter::once(i)
                .chain(counts.into_iter().take(t_pos).map(|(_, j)| j))
                .collect();
            p.sort_unstable();
            p
        })
        .collect()
}

pub fn positives_mask(positives: &[Vec<usize>]) -> Array2<bool> {
    let n = positives.len();
    let mut m = Array2::from_elem((n, n), false);
    for (i, p) in positives.iter().enumerate() {
        for &j in p {
            m[[i, j]] = true;
        }
    }
    m
}

/// Symmetric InfoNCE with cosine similarity and temperature `tau`.
pub fn contrastive_loss(tape: &mut Tape, za: Var, zb: Var, positives: &Array2<bool>, tau: f64) -> Result<Var> {
    let a = tape.row_normalize_l2(za)?;
    let b = tape.row_normalize_l2(zb)?;
    let sim = tape.matmul_t(a, b)?;
    let sim = tape.scale(sim, 1.0 / tau)?;
    let mut directions = Vec::with_capacity(2);
    for s in [sim, tape.transpose(sim)?] {
        let all = tape.log_sum_exp_rows(s, None)?;
        let pos = tape.log_sum_exp_rows(s, Some(positives.clone()))?;
        let gap = tape.sub(all, pos)?;
        directions.push(tape.mean(gap)?);
    }
    let total = tape.add(directions[0], directions[1])?;
    Ok(tape.scale(total, 0.5)?)
}

/// Everything the training loop needs besides parameters.
pub struct TrainingData<'a> {
    pub schema: SchemaInputs,
    pub names: Vec<String>,
    pub gamma1: Vec<Array2<f64>>,
    pub gamma2: Vec<Array2<f64>>,
    pub original: Vec<Array2<f64>>,
    pub positives: Array2<bool>,
    pub cfg: &'a TrainConfig,
}

impl<'a> TrainingData<'a> {
    pub fn new(
        g: &HeteroGraph,
        original: &[MetaPathView],
        gamma1: &[MetaPathView],
        gamma2: &[MetaPathView],
        cfg: &'a TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if original.is_empty() {
            return Err(EncoderError::NoViews);
        }
        let n = g.num_targets();
        for (index, v) in original.iter().chain(gamma1).chain(gamma2).enumerate() {
            if v.n() != n {
                return Err(EncoderError::NodeCount {
                    index,
                    got: v.n(),
                    expected: n,
                });
            }
        }
        let norm = |vs: &[MetaPathView]| vs.iter().map(|v| gcn_normalize(&v.adjacency)).collect();
        Ok(TrainingData {
            schema: SchemaInputs::from_graph(g)?,
            names: original.iter().map(|v| v.metapath.name.clone()).collect(),
            gamma1: norm(gamma1),
            gamma2: norm(gamma2),
            original: norm(original),
            positives: positives_mask(&select_positives(original, cfg.t_pos)),
            cfg,
        })
    }

    fn bind_views(&self, tape: &mut Tape, mats: &[Array2<f64>]) -> Result<Vec<(usize, Var)>> {
        mats.iter()
            .enumerate()
            .map(|(k, a)| Ok((k, tape.constant(a.clone())?)))
            .collect()
    }

    fn metapath_embedding(&self, tape: &mut Tape, mats: &[Array2<f64>], h: Var, params: &BoundParams) -> Result<Var> {
        let bound = self.bind_views(tape, mats)?;
        let views: Vec<(&str, Var)> = bound.iter().map(|&(k, v)| (self.names[k].as_str(), v)).collect();
        Ok(encode_metapath_scheme(tape, &views, h, params)?.0)
    }

    /// The training loss on a fresh tape; returns the tape, bound parameters and loss.
    pub fn loss(&self, store: &ParamStore, rng: &mut ChaCha8Rng) -> Result<(Tape, BoundParams, Var)> {
        let cfg = self.cfg;
        let mut tape = Tape::new();
        let params = BoundParams::bind(store, &mut tape)?;
        let x = tape.constant(self.schema.target_features.clone())?;
        let h = project(&mut tape, x, &params, &self.schema.target_name)?;
        let z1 = self.metapath_embedding(&mut tape, &self.gamma1, h, &params)?;
        let z2 = self.metapath_embedding(&mut tape, &self.gamma2, h, &params)?;
        let p1 = projection_head(&mut tape, z1, &params)?;
        let p2 = projection_head(&mut tape, z2, &params)?;
        let intra = contrastive_loss(&mut tape, p1, p2, &self.positives, cfg.tau)?;
        let loss = if cfg.lambda >= 1.0 {
            intra
        } else {
            let zsc = encode_schema_scheme(&mut tape, &self.schema, h, &params, cfg.p_tau, cfg.p_e, rng)?;
            let psc = projection_head(&mut tape, zsc, &params)?;
            let mid = tape.add(z1, z2)?;
            let mid = tape.scale(mid, 0.5)?;
            let pmid = projection_head(&mut tape, mid, &params)?;
            let cross = contrastive_loss(&mut tape, psc, pmid, &self.positives, cfg.tau)?;
            let a = tape.scale(intra, cfg.lambda)?;
            let b = tape.scale(cross, 1.0 - cfg.lambda)?;
            tape.add(a, b)?
        };
        Ok((tape, params, loss))
    }

    /// Pre-head meta-path embedding of the unaugmented views.
    pub fn embed(&self, store: &ParamStore) -> Result<Array2<f64>> {
        let mut tape = Tape::new();
        let params = BoundParams::bind(store, &mut tape)?;
        let x = tape.constant(self.schema.target_features.clone())?;
        let h = project(&mut tape, x, &params, &self.schema.target_name)?;
        let z = self.metapath_embedding(&mut tape, &self.original, h, &params)?;
        Ok(tape.value(z).clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub params: ParamStore,
    pub embeddings: Array2<f64>,
    /// loss of every completed epoch
    pub losses: Vec<f64>,
    /// epoch whose parameters were kept
    pub best_epoch: Option<usize>,
}

/// Trains on the augmented view sets `gamma1`, `gamma2` (one view per
/// meta-path, in the order of `original`) with Adam and early stopping, then
/// embeds the unaugmented views with the best parameters.
pub fn train(
    g: &HeteroGraph,
    original: &[MetaPathView],
    gamma1: &[MetaPathView],
    gamma2: &[MetaPathView],
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    let data = TrainingData::new(g, original, gamma1, gamma2, cfg)?;
    let mut store = init_params(g, &data.names, cfg.dim, cfg.seed);
    let mut adam = AdamState::new(cfg.lr, &store.shapes());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5c4e_3a11_0000);
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut stale = 0;

    for epoch in 0..cfg.epochs {
        let (mut tape, params, loss) = data.loss(&store, &mut rng)?;
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(EncoderError::NonFiniteLoss(epoch));
        }
        losses.push(value);
        if best.as_ref().is_none_or(|(b, _, _)| value < *b) {
            best = Some((value, epoch, store.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        if stale > cfg.patience {
            log::info!("early stop at epoch {epoch}");
            break;
        }
        tape.backward(loss)?;
        let grads: Vec<Array2<f64>> = params.vars().iter().map(|v| tape.grad(*v)).collect();
        adam.step(&mut store.values, &grads)?;
    }

    let best_epoch = best.as_ref().map(|b| b.1);
    if let Some((_, _, p)) = best {
        store = p;
    }
    let embeddings = data.embed(&store)?;
    Ok(TrainOutput {
        params: store,
        embeddings,
        losses,
        best_epoch,
    })
}

// ---------------------------------------------------------------------------
// files

/// One row per target node, tab-separated.
pub fn format_embeddings(z: &Array2<f64>, header: Option<&str>) -> String {
    let mut out = header.map(|h| format!("# {h}\n")).unwrap_or_default();
    for row in z.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join("\t")).unwrap();
    }
    out
}

pub fn save_embeddings(z: &Array2<f64>, path: &Path, header: Option<&str>) -> Result<()> {
    std::fs::write(path, format_embeddings(z, header))?;
    Ok(())
}

pub fn load_embeddings(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = crate::hetgraph::data_lines(&text)
        .map(|(ln, l)| {
            l.split('\t')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| EncoderError::Checkpoint(format!("line {ln}: bad float {t:?}")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let d = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != d) {
        return Err(EncoderError::Checkpoint("ragged embedding rows".into()));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((flat.len() / d.max(1), d), flat).map_err(|e| EncoderError::Checkpoint(e.to_string()))
}

const PARAMS_MAGIC: &[u8; 8] = b"HSPARAM1";

/// Binary parameter file: optional `# header` line, magic, parameter count,
/// then per parameter a length-prefixed name, rows, cols and little-endian
/// f64 values.
pub fn write_params<W: Write>(w: &mut W, store: &ParamStore, header: Option<&str>) -> Result<()> {
    if let Some(h) = header {
        writeln!(w, "# {h}")?;
    }
    w.write_all(PARAMS_MAGIC)?;
    w.write_all(&(store.len() as u64).to_le_bytes())?;
    for (name, v) in store.names.iter().zip(&store.values) {
        w.write_all(&(name.len() as u64).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(v.nrows() as u64).to_le_bytes())?;
        w.write_all(&(v.ncols() as u64).to_le_bytes())?;
        for x in v.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_params<R: Read>(r: &mut R) -> Result<ParamStore> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0;
    while bytes.get(pos) == Some(&b'#') {
        pos += bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| EncoderError::Checkpoint("unterminated header".into()))?
            + 1;
    }
    let mut cur = std::io::Cursor::new(&bytes[pos..]);
    let truncated = |_| EncoderError::Checkpoint("truncated".into());
    let mut magic = [0u8; 8];
    cur.read_exact(&mut magic).map_err(truncated)?;
    if &magic != PARAMS_MAGIC {
        return Err(EncoderError::Checkpoint("bad magic".into()));
    }
    let word = |cur: &mut std::io::Cursor<&[u8]>| -> Result<usize> {
        let mut b = [0u8; 8];
        cur.read_exact(&mut b).map_err(truncated)?;
        Ok(u64::from_le_bytes(b) as usize)
    };
    let count = word(&mut cur)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = word(&mut cur)?;
        let mut name = vec![0u8; len];
        cur.read_exact(&mut name).map_err(truncated)?;
        let name = String::from_utf8(name).map_err(|e| EncoderError::Checkpoint(e.to_string()))?;
        let rows = word(&mut cur)?;
        let cols = word(&mut cur)?;
        let mut vals = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let mut b = [0u8; 8];
            cur.read_exact(&mut b).map_err(truncated)?;
            vals.push(f64::from_le_bytes(b));
        }
        let m = Array2::from_shape_vec((rows, cols), vals).map_err(|e| EncoderError::Checkpoint(e.to_string()))?;
        store.insert(name, m);
    }
    Ok(store)
}

pub fn save_params(store: &ParamStore, path: &Path, header: Option<&str>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_params(&mut f, store, header)?;
    f.flush()?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<ParamStore> {
    read_params(&mut std::fs::File::open(path)?)
}
