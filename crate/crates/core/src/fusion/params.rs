//! Flat, ordered parameter storage shared by the model, its gradients,
//! the optimizer and checkpoints.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::domain::load_registry;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    pub params: Vec<Param>,
}

impl ParamSet {
    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: Array2::zeros(p.value.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn get(&self, idx: usize) -> &Array2<f64> {
        &self.params[idx].value
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Array2<f64> {
        &mut self.params[idx].value
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// `self += scale * other`, parameter by parameter in order.
    pub fn add_scaled(&mut self, other: &ParamSet, scale: f64) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            a.value.scaled_add(scale, &b.value);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.iter().all(|x| x.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadIdx {
    pub w_q: usize,
    pub w_k: usize,
    pub w_v: usize,
    pub w_r: usize,
    pub u: usize,
    pub v: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerIdx {
    pub heads: Vec<HeadIdx>,
    pub w_o: usize,
    pub b_o: usize,
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
}

/// Indices of every named tensor inside a [`ParamSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub token_embed: usize,
    pub entity_embed: usize,
    pub relation_embed: usize,
    pub w_p: usize,
    pub layers: Vec<LayerIdx>,
    pub classifier: usize,
    pub classifier_bias: usize,
}

#[derive(Clone, Copy)]
enum Init {
    Zeros,
    Ones,
    Xavier,
    Uniform(f64),
}

struct Builder {
    rng: ChaCha8Rng,
    set: ParamSet,
}

impl Builder {
    fn add(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        let value = match init {
            Init::Zeros => Array2::zeros((rows, cols)),
            Init::Ones => Array2::ones((rows, cols)),
            Init::Xavier => {
                let a = (6.0 / (rows + cols) as f64).sqrt();
                Array2::from_shape_simple_fn((rows, cols), || self.rng.gen_range(-a..a))
            }
            Init::Uniform(a) => Array2::from_shape_simple_fn((rows, cols), || self.rng.gen_range(-a..a)),
        };
        self.set.params.push(Param { name, value });
        self.set.params.len() - 1
    }
}

const EMBED_RANGE: f64 = 0.866;
const BIAS_VEC_RANGE: f64 = 0.1;

/// Deterministically initialized parameters for `config`.
pub fn init_params(config: &ModelConfig) -> (ParamSet, Layout) {
    let d = config.d_model;
    let dh = config.d_head();
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        set: ParamSet::default(),
    };
    let token_embed = b.add("token_embed".into(), config.token_buckets, d, Init::Uniform(EMBED_RANGE));
    let entity_embed = b.add("entity_embed".into(), config.entity_buckets, d, Init::Uniform(EMBED_RANGE));
    let relation_embed = b.add("relation_embed".into(), load_registry().len(), d, Init::Uniform(EMBED_RANGE));
    let w_p = b.add("w_p".into(), 4 * d, d, Init::Xavier);
    let shared_uv = config.share_uv.then(|| {
        (
            b.add("u".into(), 1, dh, Init::Uniform(BIAS_VEC_RANGE)),
            b.add("v".into(), 1, dh, Init::Uniform(BIAS_VEC_RANGE)),
        )
    });

    let mut layers = Vec::with_capacity(config.n_layers);
    for l in 0..config.n_layers {
        let mut heads = Vec::with_capacity(config.n_heads);
        for h in 0..config.n_heads {
            let p = |s: &str| format!("layers.{l}.heads.{h}.{s}");
            let w_q = b.add(p("w_q"), d, dh, Init::Xavier);
            let w_k = b.add(p("w_k"), d, dh, Init::Xavier);
            let w_v = b.add(p("w_v"), d, dh, Init::Xavier);
            let w_r = b.add(p("w_r"), d, dh, Init::Xavier);
            let (u, v) = match shared_uv {
                Some(uv) => uv,
                None => (
                    b.add(p("u"), 1, dh, Init::Uniform(BIAS_VEC_RANGE)),
                    b.add(p("v"), 1, dh, Init::Uniform(BIAS_VEC_RANGE)),
                ),
            };
            heads.push(HeadIdx { w_q, w_k, w_v, w_r, u, v });
        }
        let p = |s: &str| format!("layers.{l}.{s}");
        layers.push(LayerIdx {
            heads,
            w_o: b.add(p("w_o"), d, d, Init::Xavier),
            b_o: b.add(p("b_o"), 1, d, Init::Zeros),
            ln1_g: b.add(p("ln1_g"), 1, d, Init::Ones),
            ln1_b: b.add(p("ln1_b"), 1, d, Init::Zeros),
            w1: b.add(p("w1"), d, config.d_ffn, Init::Xavier),
            b1: b.add(p("b1"), 1, config.d_ffn, Init::Zeros),
            w2: b.add(p("w2"), config.d_ffn, d, Init::Xavier),
            b2: b.add(p("b2"), 1, d, Init::Zeros),
            ln2_g: b.add(p("ln2_g"), 1, d, Init::Ones),
            ln2_b: b.add(p("ln2_b"), 1, d, Init::Zeros),
        });
    }
    let classifier = b.add("classifier".into(), d, config.n_classes, Init::Xavier);
    let classifier_bias = b.add("classifier_bias".into(), 1, config.n_classes, Init::Zeros);
    (
        b.set,
        Layout {
            token_embed,
            entity_embed,
            relation_embed,
            w_p,
            layers,
            classifier,
            classifier_bias,
        },
    )
}
