//! The fusion transformer: forward pass, reverse-mode gradients and loss.
//!
//! The relative-position terms are evaluated as
//! `(q_i + v)·(pe_ij W_r) = ((q_i + v) W_rᵀ)·pe_ij`, so each head needs one
//! `n × d_model` projection plus a dot product per visible pair. Masked pairs
//! get exactly zero attention weight, so their scores are never formed.

use std::fmt;
use std::sync::Arc;

use ndarray::{s, Array1, Array2, Array3, ArrayView1, Axis};

use super::attention::HeadParams;
use super::config::{ModelConfig, Pooling};
use super::encoder::{bucket, token_buckets, SentenceEncoder};
use super::mask::visible_lists;
use super::params::{init_params, Layout, ParamSet};
use super::position::{PositionEncoder, PositionTables};
use crate::domain::{load_registry, CoherenceLabel, Document};
use crate::error::{Error, Result};
use crate::graph::build_graph;
use crate::linearize::{linearize_capped, FlatSequence, Payload};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ElementInput {
    Tokens(Vec<usize>),
    Fixed(Array1<f64>),
    Entity(usize),
    Relation(usize),
}

/// A document turned into model inputs: flat sequence, embedding lookups and
/// the visibility lists derived from it.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub seq: FlatSequence,
    pub label: Option<CoherenceLabel>,
    pub(crate) inputs: Vec<ElementInput>,
    pub(crate) visible: Vec<Vec<usize>>,
    pub(crate) sentence_rows: Vec<usize>,
}

impl Prepared {
    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }
}

/// Identifies one document's slot in one optimizer step; dropout masks are a
/// pure function of this key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropoutKey {
    pub seed: u64,
    pub epoch: u64,
    pub step: u64,
    pub slot: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train(DropoutKey),
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl DropoutKey {
    fn uniform(&self, layer: usize, site: u64, elem: usize, dim: usize) -> f64 {
        let h = [self.epoch, self.step, self.slot, layer as u64, site, elem as u64, dim as u64]
            .into_iter()
            .fold(mix(self.seed), |h, part| mix(h ^ part));
        (h >> 11) as f64 / (1u64 << 53) as f64
    }

    fn mask(&self, rate: f64, layer: usize, site: u64, shape: (usize, usize)) -> Array2<f64> {
        let keep = 1.0 / (1.0 - rate);
        Array2::from_shape_fn(shape, |(i, c)| {
            if self.uniform(layer, site, i, c) < rate {
                0.0
            } else {
                keep
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Array1<f64>,
    pub pooled: Array1<f64>,
}

impl ForwardOutput {
    pub fn predicted(&self) -> CoherenceLabel {
        let best = self
            .logits
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc })
            .0;
        CoherenceLabel::from_index(best).expect("three classes")
    }
}

#[derive(Clone)]
pub struct FusionModel {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub layout: Layout,
    encoder: Option<Arc<dyn SentenceEncoder>>,
}

impl fmt::Debug for FusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FusionModel")
            .field("config", &self.config)
            .field("n_params", &self.params.n_scalars())
            .field("external_encoder", &self.encoder.is_some())
            .finish()
    }
}

struct HeadCache {
    k: Array2<f64>,
    v: Array2<f64>,
    qu: Array2<f64>,
    qv: Array2<f64>,
    w: Array2<f64>,
    p: Array2<f64>,
}

struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

struct LayerCache {
    x: Array2<f64>,
    heads: Vec<HeadCache>,
    ocat: Array2<f64>,
    drop1: Option<Array2<f64>>,
    ln1: LnCache,
    h1: Array2<f64>,
    pre: Array2<f64>,
    act: Array2<f64>,
    drop2: Option<Array2<f64>>,
    ln2: LnCache,
}

struct PosCache {
    tables: PositionTables,
    pe: Array3<f64>,
    pe_pre: Option<Array3<f64>>,
}

struct Cache {
    pos: PosCache,
    layers: Vec<LayerCache>,
    out: Array2<f64>,
    pooled: Array1<f64>,
}

fn layer_norm(z: &Array2<f64>, g: ArrayView1<f64>, b: ArrayView1<f64>) -> (Array2<f64>, LnCache) {
    let d = z.ncols() as f64;
    let mut xhat = z.clone();
    let mut inv_std = Array1::zeros(z.nrows());
    for (i, mut row) in xhat.rows_mut().into_iter().enumerate() {
        let mean = row.sum() / d;
        row -= mean;
        let var = row.dot(&row) / d;
        let is = 1.0 / (var + LN_EPS).sqrt();
        row *= is;
        inv_std[i] = is;
    }
    let y = &xhat * &g + b;
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward(dy: &Array2<f64>, g: ArrayView1<f64>, cache: &LnCache, dg: &mut Array2<f64>, db: &mut Array2<f64>) -> Array2<f64> {
    let d = dy.ncols() as f64;
    dg.row_mut(0).scaled_add(1.0, &(dy * &cache.xhat).sum_axis(Axis(0)));
    db.row_mut(0).scaled_add(1.0, &dy.sum_axis(Axis(0)));
    let mut dz = dy * &g;
    for (i, mut row) in dz.rows_mut().into_iter().enumerate() {
        let xh = cache.xhat.row(i);
        let mean = row.sum() / d;
        let mean_x = row.dot(&xh) / d;
        row.zip_mut_with(&xh, |v, &x| *v = cache.inv_std[i] * (*v - mean - x * mean_x));
    }
    dz
}

fn check_finite(a: &Array2<f64>, layer: usize, site: &'static str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { layer, site })
    }
}

fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let e = logits.mapv(|x| (x - max).exp());
    let s = e.sum();
    e / s
}

impl FusionModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (params, layout) = init_params(&config);
        Ok(FusionModel {
            config,
            params,
            layout,
            encoder: None,
        })
    }

    /// Rebuilds a model around existing parameters, checking names and shapes
    /// against what `config` implies.
    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let (expected, layout) = init_params(&config);
        if expected.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "config implies {} tensors, found {}",
                expected.len(),
                params.len()
            )));
        }
        for (e, p) in expected.params.iter().zip(&params.params) {
            if e.name != p.name || e.value.dim() != p.value.dim() {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    p.name,
                    p.value.dim(),
                    e.name,
                    e.value.dim()
                )));
            }
        }
        Ok(FusionModel {
            config,
            params,
            layout,
            encoder: None,
        })
    }

    pub fn with_encoder(mut self, encoder: Arc<dyn SentenceEncoder>) -> Result<Self> {
        if encoder.dim() != self.config.d_model {
            return Err(Error::Config(format!(
                "encoder width {} does not match d_model {}",
                encoder.dim(),
                self.config.d_model
            )));
        }
        self.encoder = Some(encoder);
        Ok(self)
    }

    pub fn head_params(&self, layer: usize, head: usize) -> HeadParams {
        let h = self.layout.layers[layer].heads[head];
        let p = &self.params;
        HeadParams {
            w_q: p.get(h.w_q).clone(),
            w_k: p.get(h.w_k).clone(),
            w_v: p.get(h.w_v).clone(),
            w_r: p.get(h.w_r).clone(),
            u: p.get(h.u).row(0).to_owned(),
            v: p.get(h.v).row(0).to_owned(),
        }
    }

    pub fn position_encoder(&self) -> PositionEncoder {
        PositionEncoder {
            d_model: self.config.d_model,
            max_relative_distance: self.config.max_relative_distance,
            w_p: self.params.get(self.layout.w_p).clone(),
            relu: self.config.pe_relu,
        }
    }

    /// Graph → variant filter → capped linearization → embedding lookups.
    pub fn prepare(&self, doc: &Document) -> Result<Prepared> {
        if doc.sentences.is_empty() {
            return Err(Error::Contract(format!("{}: document has no sentences", doc.id)));
        }
        let graph = build_graph(doc)?.restrict(self.config.variant);
        let (seq, _) = linearize_capped(&graph, self.config.max_elements)?;
        self.prepare_sequence(seq, doc)
    }

    /// Uses `seq` as given (any element order), resolving sentence content from `doc`.
    pub fn prepare_sequence(&self, seq: FlatSequence, doc: &Document) -> Result<Prepared> {
        let registry = load_registry();
        let mut inputs = Vec::with_capacity(seq.len());
        let mut sentence_rows = Vec::new();
        for (row, el) in seq.elements.iter().enumerate() {
            let input = match &el.payload {
                Payload::Sentence(k) => {
                    let sentence = doc
                        .sentences
                        .get(k.wrapping_sub(1))
                        .ok_or_else(|| Error::structural(format!("sequence references missing sentence {k}")))?;
                    sentence_rows.push(row);
                    match &self.encoder {
                        Some(enc) => ElementInput::Fixed(enc.encode(&sentence.tokens)),
                        None => ElementInput::Tokens(token_buckets(&sentence.tokens, self.config.token_buckets)),
                    }
                }
                Payload::Entity { surface, .. } => ElementInput::Entity(bucket(surface, self.config.entity_buckets)),
                Payload::Relation { sense, .. } => ElementInput::Relation(registry.index_of(sense)),
            };
            inputs.push(input);
        }
        if sentence_rows.is_empty() {
            return Err(Error::Contract("sequence has no sentence elements".into()));
        }
        let visible = visible_lists(&seq);
        Ok(Prepared {
            seq,
            label: doc.label,
            inputs,
            visible,
            sentence_rows,
        })
    }

    /// Initial element representations, one row per flat element.
    pub fn embed(&self, prep: &Prepared) -> Array2<f64> {
        let d = self.config.d_model;
        let p = &self.params;
        let mut x = Array2::zeros((prep.len(), d));
        for (row, input) in prep.inputs.iter().enumerate() {
            let mut out = x.row_mut(row);
            match input {
                ElementInput::Tokens(buckets) => {
                    let table = p.get(self.layout.token_embed);
                    for &b in buckets {
                        out += &table.row(b);
                    }
                    if !buckets.is_empty() {
                        out /= buckets.len() as f64;
                    }
                }
                ElementInput::Fixed(v) => out.assign(v),
                ElementInput::Entity(b) => out.assign(&p.get(self.layout.entity_embed).row(*b)),
                ElementInput::Relation(r) => out.assign(&p.get(self.layout.relation_embed).row(*r)),
            }
        }
        x
    }

    fn position_cache(&self, prep: &Prepared) -> PosCache {
        let d = self.config.d_model;
        let tables = PositionTables::new(
            prep.seq.n_sentences,
            self.config.max_relative_distance,
            self.params.get(self.layout.w_p).view(),
        );
        let n = prep.len();
        let mut pe = Array3::zeros((n, n, d));
        let els = &prep.seq.elements;
        for i in 0..n {
            for &j in &prep.visible[i] {
                let idx = tables.row_indices(&els[i], &els[j]);
                let mut cell = pe.slice_mut(s![i, j, ..]);
                for (k, &r) in idx.iter().enumerate() {
                    cell += &tables.proj[k].row(r);
                }
            }
        }
        let pe_pre = if self.config.pe_relu {
            let pre = pe.clone();
            pe.mapv_inplace(|x| x.max(0.0));
            Some(pre)
        } else {
            None
        };
        PosCache { tables, pe, pe_pre }
    }

    fn score_factor(&self) -> f64 {
        if self.config.scale_scores {
            1.0 / (self.config.d_head() as f64).sqrt()
        } else {
            1.0
        }
    }

    fn layer_forward_cached(
        &self,
        prep: &Prepared,
        x: Array2<f64>,
        pe: &Array3<f64>,
        l: usize,
        mode: Mode,
    ) -> Result<(Array2<f64>, LayerCache)> {
        let n = prep.len();
        let d = self.config.d_model;
        let dh = self.config.d_head();
        let p = &self.params;
        let li = &self.layout.layers[l];
        let factor = self.score_factor();

        let mut ocat = Array2::zeros((n, d));
        let mut heads = Vec::with_capacity(li.heads.len());
        for (h, hi) in li.heads.iter().enumerate() {
            let q = x.dot(p.get(hi.w_q));
            let k = x.dot(p.get(hi.w_k));
            let v = x.dot(p.get(hi.w_v));
            let qu = &q + p.get(hi.u);
            let qv = &q + p.get(hi.v);
            let w = qv.dot(&p.get(hi.w_r).t());
            let content = qu.dot(&k.t());
            let mut probs = Array2::zeros((n, n));
            let mut row_scores = Vec::new();
            for i in 0..n {
                row_scores.clear();
                let wi = w.row(i);
                for &j in &prep.visible[i] {
                    let pos = wi.dot(&pe.slice(s![i, j, ..]));
                    row_scores.push(factor * (content[[i, j]] + pos));
                }
                let max = row_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for s in row_scores.iter_mut() {
                    *s = (*s - max).exp();
                    sum += *s;
                }
                for (&j, &e) in prep.visible[i].iter().zip(&row_scores) {
                    probs[[i, j]] = e / sum;
                }
            }
            ocat.slice_mut(s![.., h * dh..(h + 1) * dh]).assign(&probs.dot(&v));
            heads.push(HeadCache { k, v, qu, qv, w, p: probs });
        }

        let mut attn = ocat.dot(p.get(li.w_o)) + p.get(li.b_o);
        let drop1 = match mode {
            Mode::Train(key) if self.config.dropout_rate > 0.0 => {
                let m = key.mask(self.config.dropout_rate, l, 0, (n, d));
                attn *= &m;
                Some(m)
            }
            _ => None,
        };
        let z1 = &x + &attn;
        check_finite(&z1, l, "attention")?;
        let (h1, ln1) = layer_norm(&z1, p.get(li.ln1_g).row(0), p.get(li.ln1_b).row(0));

        let pre = h1.dot(p.get(li.w1)) + p.get(li.b1);
        let act = pre.mapv(|v| v.max(0.0));
        let mut ffn = act.dot(p.get(li.w2)) + p.get(li.b2);
        let drop2 = match mode {
            Mode::Train(key) if self.config.dropout_rate > 0.0 => {
                let m = key.mask(self.config.dropout_rate, l, 1, (n, d));
                ffn *= &m;
                Some(m)
            }
            _ => None,
        };
        let z2 = &h1 + &ffn;
        check_finite(&z2, l, "feed-forward")?;
        let (out, ln2) = layer_norm(&z2, p.get(li.ln2_g).row(0), p.get(li.ln2_b).row(0));

        Ok((
            out,
            LayerCache {
                x,
                heads,
                ocat,
                drop1,
                ln1,
                h1,
                pre,
                act,
                drop2,
                ln2,
            },
        ))
    }

    /// One fusion layer applied to `x` (one row per element of `prep`).
    pub fn layer_forward(&self, prep: &Prepared, x: Array2<f64>, layer: usize, mode: Mode) -> Result<Array2<f64>> {
        if x.dim() != (prep.len(), self.config.d_model) || layer >= self.config.n_layers {
            return Err(Error::structural(format!(
                "layer {layer} input {:?} does not match {} elements × {}",
                x.dim(),
                prep.len(),
                self.config.d_model
            )));
        }
        let pos = self.position_cache(prep);
        Ok(self.layer_forward_cached(prep, x, &pos.pe, layer, mode)?.0)
    }

    fn pool(&self, prep: &Prepared, out: &Array2<f64>) -> Array1<f64> {
        match self.config.pooling {
            Pooling::MeanSentences => {
                let mut pooled = Array1::zeros(out.ncols());
                for &r in &prep.sentence_rows {
                    pooled += &out.row(r);
                }
                pooled / prep.sentence_rows.len() as f64
            }
            Pooling::FirstSentence => out.row(prep.sentence_rows[0]).to_owned(),
        }
    }

    fn forward_cached(&self, prep: &Prepared, mode: Mode) -> Result<(ForwardOutput, Cache)> {
        let pos = self.position_cache(prep);
        let mut x = self.embed(prep);
        let mut layers = Vec::with_capacity(self.config.n_layers);
        for l in 0..self.config.n_layers {
            let (out, cache) = self.layer_forward_cached(prep, x, &pos.pe, l, mode)?;
            layers.push(cache);
            x = out;
        }
        let pooled = self.pool(prep, &x);
        let logits = pooled.dot(self.params.get(self.layout.classifier))
            + self.params.get(self.layout.classifier_bias).row(0);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                layer: self.config.n_layers,
                site: "classifier",
            });
        }
        let output = ForwardOutput {
            logits,
            pooled: pooled.clone(),
        };
        Ok((
            output,
            Cache {
                pos,
                layers,
                out: x,
                pooled,
            },
        ))
    }

    pub fn forward_prepared(&self, prep: &Prepared, mode: Mode) -> Result<ForwardOutput> {
        Ok(self.forward_cached(prep, mode)?.0)
    }

    /// Eval-mode forward that also reports the on/off state of every ReLU.
    /// The loss is smooth in the parameters wherever this pattern is constant.
    pub fn forward_with_gates(&self, prep: &Prepared) -> Result<(ForwardOutput, Vec<bool>)> {
        let (out, cache) = self.forward_cached(prep, Mode::Eval)?;
        let mut gates = Vec::new();
        if let Some(pe_pre) = &cache.pos.pe_pre {
            gates.extend(pe_pre.iter().map(|&v| v > 0.0));
        }
        for layer in &cache.layers {
            gates.extend(layer.pre.iter().map(|&v| v > 0.0));
        }
        Ok((out, gates))
    }

    pub fn forward(&self, doc: &Document, mode: Mode) -> Result<ForwardOutput> {
        self.forward_prepared(&self.prepare(doc)?, mode)
    }

    pub fn predict(&self, doc: &Document) -> Result<CoherenceLabel> {
        Ok(self.forward(doc, Mode::Eval)?.predicted())
    }

    /// Cross-entropy of one prepared document; adds `weight ×` its gradient into `grads`.
    pub(crate) fn accumulate(&self, prep: &Prepared, mode: Mode, weight: f64, grads: &mut ParamSet) -> Result<(f64, ForwardOutput)> {
        let label = prep
            .label
            .ok_or_else(|| Error::Contract(format!("{}: unlabeled document in a training batch", prep.seq.doc_id)))?;
        let (output, cache) = self.forward_cached(prep, mode)?;
        let probs = softmax(&output.logits);
        let y = label.index();
        let loss = -probs[y].ln();
        let mut dlogits = probs;
        dlogits[y] -= 1.0;
        dlogits *= weight;
        self.backward(prep, &cache, &dlogits, grads);
        Ok((loss, output))
    }

    fn backward(&self, prep: &Prepared, cache: &Cache, dlogits: &Array1<f64>, grads: &mut ParamSet) {
        let lay = &self.layout;
        let p = &self.params;
        let n = prep.len();
        let d = self.config.d_model;

        // classifier and pooling
        {
            let dc = grads.get_mut(lay.classifier);
            for a in 0..d {
                for c in 0..dlogits.len() {
                    dc[[a, c]] += cache.pooled[a] * dlogits[c];
                }
            }
        }
        grads.get_mut(lay.classifier_bias).row_mut(0).scaled_add(1.0, dlogits);
        let dpooled = p.get(lay.classifier).dot(dlogits);
        let mut dx = Array2::zeros((n, d));
        match self.config.pooling {
            Pooling::MeanSentences => {
                let share = 1.0 / prep.sentence_rows.len() as f64;
                for &r in &prep.sentence_rows {
                    dx.row_mut(r).scaled_add(share, &dpooled);
                }
            }
            Pooling::FirstSentence => dx.row_mut(prep.sentence_rows[0]).assign(&dpooled),
        }
        debug_assert_eq!(cache.out.dim(), dx.dim());

        let mut dpe = Array3::<f64>::zeros((n, n, d));
        for l in (0..self.config.n_layers).rev() {
            dx = self.layer_backward(prep, &cache.layers[l], &cache.pos.pe, l, dx, &mut dpe, grads);
        }

        // position encoder
        if let Some(pre) = &cache.pos.pe_pre {
            dpe.zip_mut_with(pre, |g, &z| {
                if z <= 0.0 {
                    *g = 0.0
                }
            });
        }
        let tables = &cache.pos.tables;
        let m = tables.sin.nrows();
        let mut dproj: [Array2<f64>; 4] = std::array::from_fn(|_| Array2::zeros((m, d)));
        let els = &prep.seq.elements;
        for i in 0..n {
            for &j in &prep.visible[i] {
                let idx = tables.row_indices(&els[i], &els[j]);
                let g = dpe.slice(s![i, j, ..]);
                for (k, &r) in idx.iter().enumerate() {
                    dproj[k].row_mut(r).scaled_add(1.0, &g);
                }
            }
        }
        let dwp = grads.get_mut(lay.w_p);
        for (k, dp) in dproj.iter().enumerate() {
            let block = tables.sin.t().dot(dp);
            dwp.slice_mut(s![k * d..(k + 1) * d, ..]).scaled_add(1.0, &block);
        }

        // embeddings
        for (row, input) in prep.inputs.iter().enumerate() {
            let g = dx.row(row);
            match input {
                ElementInput::Tokens(buckets) => {
                    if self.config.train_token_embed && !buckets.is_empty() {
                        let share = 1.0 / buckets.len() as f64;
                        let table = grads.get_mut(lay.token_embed);
                        for &b in buckets {
                            table.row_mut(b).scaled_add(share, &g);
                        }
                    }
                }
                ElementInput::Fixed(_) => {}
                ElementInput::Entity(b) => grads.get_mut(lay.entity_embed).row_mut(*b).scaled_add(1.0, &g),
                ElementInput::Relation(r) => grads.get_mut(lay.relation_embed).row_mut(*r).scaled_add(1.0, &g),
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn layer_backward(
        &self,
        prep: &Prepared,
        c: &LayerCache,
        pe: &Array3<f64>,
        l: usize,
        dout: Array2<f64>,
        dpe: &mut Array3<f64>,
        grads: &mut ParamSet,
    ) -> Array2<f64> {
        let p = &self.params;
        let li = &self.layout.layers[l];
        let n = prep.len();
        let dh = self.config.d_head();
        let factor = self.score_factor();

        // second sublayer: z2 = h1 + drop(ffn(h1)), out = ln2(z2)
        let (mut dg, mut db) = (grads.get(li.ln2_g).clone(), grads.get(li.ln2_b).clone());
        let dz2 = layer_norm_backward(&dout, p.get(li.ln2_g).row(0), &c.ln2, &mut dg, &mut db);
        *grads.get_mut(li.ln2_g) = dg;
        *grads.get_mut(li.ln2_b) = db;
        let mut dffn = dz2.clone();
        if let Some(m) = &c.drop2 {
            dffn *= m;
        }
        grads.get_mut(li.w2).scaled_add(1.0, &c.act.t().dot(&dffn));
        grads.get_mut(li.b2).row_mut(0).scaled_add(1.0, &dffn.sum_axis(Axis(0)));
        let mut dpre = dffn.dot(&p.get(li.w2).t());
        dpre.zip_mut_with(&c.pre, |g, &z| {
            if z <= 0.0 {
                *g = 0.0
            }
        });
        grads.get_mut(li.w1).scaled_add(1.0, &c.h1.t().dot(&dpre));
        grads.get_mut(li.b1).row_mut(0).scaled_add(1.0, &dpre.sum_axis(Axis(0)));
        let dh1 = dz2 + dpre.dot(&p.get(li.w1).t());

        // first sublayer: z1 = x + drop(attn(x)), h1 = ln1(z1)
        let (mut dg, mut db) = (grads.get(li.ln1_g).clone(), grads.get(li.ln1_b).clone());
        let dz1 = layer_norm_backward(&dh1, p.get(li.ln1_g).row(0), &c.ln1, &mut dg, &mut db);
        *grads.get_mut(li.ln1_g) = dg;
        *grads.get_mut(li.ln1_b) = db;
        let mut dattn = dz1.clone();
        if let Some(m) = &c.drop1 {
            dattn *= m;
        }
        grads.get_mut(li.w_o).scaled_add(1.0, &c.ocat.t().dot(&dattn));
        grads.get_mut(li.b_o).row_mut(0).scaled_add(1.0, &dattn.sum_axis(Axis(0)));
        let docat = dattn.dot(&p.get(li.w_o).t());

        let mut dx = dz1;
        for (h, (hi, hc)) in li.heads.iter().zip(&c.heads).enumerate() {
            let do_h = docat.slice(s![.., h * dh..(h + 1) * dh]);
            let dp = do_h.dot(&hc.v.t());
            let dv = hc.p.t().dot(&do_h);

            // softmax backward restricted to the visible set, then the score scale
            let mut gs = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                let dot: f64 = prep.visible[i].iter().map(|&j| hc.p[[i, j]] * dp[[i, j]]).sum();
                for &j in &prep.visible[i] {
                    gs[[i, j]] = factor * hc.p[[i, j]] * (dp[[i, j]] - dot);
                }
            }

            let dqu = gs.dot(&hc.k);
            let dk = gs.t().dot(&hc.qu);

            let mut dw = Array2::<f64>::zeros(hc.w.raw_dim());
            for i in 0..n {
                let wi = hc.w.row(i);
                for &j in &prep.visible[i] {
                    let g = gs[[i, j]];
                    if g == 0.0 {
                        continue;
                    }
                    dw.row_mut(i).scaled_add(g, &pe.slice(s![i, j, ..]));
                    dpe.slice_mut(s![i, j, ..]).scaled_add(g, &wi);
                }
            }
            grads.get_mut(hi.w_r).scaled_add(1.0, &dw.t().dot(&hc.qv));
            let dqv = dw.dot(p.get(hi.w_r));

            grads.get_mut(hi.u).row_mut(0).scaled_add(1.0, &dqu.sum_axis(Axis(0)));
            grads.get_mut(hi.v).row_mut(0).scaled_add(1.0, &dqv.sum_axis(Axis(0)));
            let dq = dqu + dqv;

            grads.get_mut(hi.w_q).scaled_add(1.0, &c.x.t().dot(&dq));
            grads.get_mut(hi.w_k).scaled_add(1.0, &c.x.t().dot(&dk));
            grads.get_mut(hi.w_v).scaled_add(1.0, &c.x.t().dot(&dv));
            dx += &dq.dot(&p.get(hi.w_q).t());
            dx += &dk.dot(&p.get(hi.w_k).t());
            dx += &dv.dot(&p.get(hi.w_v).t());
        }
        dx
    }

    /// Mean cross-entropy over `batch` and its gradient (eval mode, no dropout).
    pub fn loss_and_grad(&self, batch: &[Document]) -> Result<(f64, ParamSet)> {
        let preps = batch.iter().map(|d| self.prepare(d)).collect::<Result<Vec<_>>>()?;
        self.loss_and_grad_prepared(&preps, |_| Mode::Eval)
    }

    pub fn loss_and_grad_prepared(&self, batch: &[Prepared], mode_for: impl Fn(usize) -> Mode) -> Result<(f64, ParamSet)> {
        if batch.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let mut grads = self.params.zeros_like();
        let weight = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (slot, prep) in batch.iter().enumerate() {
            loss += self.accumulate(prep, mode_for(slot), weight, &mut grads)?.0;
        }
        Ok((loss * weight, grads))
    }

    /// Mean cross-entropy without gradients.
    pub fn loss(&self, batch: &[Document]) -> Result<f64> {
        let preps = batch.iter().map(|d| self.prepare(d)).collect::<Result<Vec<_>>>()?;
        self.loss_prepared(&preps)
    }

    pub fn loss_prepared(&self, batch: &[Prepared]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let mut total = 0.0;
        for prep in batch {
            let label = prep
                .label
                .ok_or_else(|| Error::Contract(format!("{}: unlabeled document", prep.seq.doc_id)))?;
            let out = self.forward_prepared(prep, Mode::Eval)?;
            total -= softmax(&out.logits)[label.index()].ln();
        }
        Ok(total / batch.len() as f64)
    }

    /// `loss_prepared` plus the concatenated ReLU gate pattern of the batch.
    pub fn loss_with_gates(&self, batch: &[Prepared]) -> Result<(f64, Vec<bool>)> {
        if batch.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let mut total = 0.0;
        let mut gates = Vec::new();
        for prep in batch {
            let label = prep
                .label
                .ok_or_else(|| Error::Contract(format!("{}: unlabeled document", prep.seq.doc_id)))?;
            let (out, g) = self.forward_with_gates(prep)?;
            total -= softmax(&out.logits)[label.index()].ln();
            gates.extend(g);
        }
        Ok((total / batch.len() as f64, gates))
    }
}
