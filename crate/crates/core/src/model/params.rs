use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::UpsamplerConfig;
use crate::autodiff::{ParamStore, Tensor};

/// How a weight matrix starts out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Glorot,
    Zero,
}

/// Declared shape of one named parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

fn dense(specs: &mut Vec<ParamSpec>, name: &str, fan_in: usize, fan_out: usize, init: Init) {
    specs.push(ParamSpec { name: format!("{name}.w"), shape: vec![fan_in, fan_out], init });
    specs.push(ParamSpec { name: format!("{name}.b"), shape: vec![fan_out], init: Init::Zero });
}

/// Edge convolution split into a center map and an edge map (see `edge_conv`).
fn edge_conv(specs: &mut Vec<ParamSpec>, name: &str, fan_in: usize, fan_out: usize) {
    for part in ["center", "edge"] {
        specs.push(ParamSpec {
            name: format!("{name}.{part}.w"),
            shape: vec![fan_in, fan_out],
            init: Init::Glorot,
        });
    }
    specs.push(ParamSpec { name: format!("{name}.b"), shape: vec![fan_out], init: Init::Zero });
}

fn attention(specs: &mut Vec<ParamSpec>, prefix: &str, code_width: usize, c: usize) {
    dense(specs, &format!("{prefix}.pos1"), code_width, c, Init::Glorot);
    dense(specs, &format!("{prefix}.pos2"), c, c, Init::Glorot);
    for map in ["gamma1", "gamma2", "phi", "psi", "alpha"] {
        dense(specs, &format!("{prefix}.{map}"), c, c, Init::Glorot);
    }
}

/// Every parameter of the network, in a fixed order.
pub fn param_specs(config: &UpsamplerConfig) -> Vec<ParamSpec> {
    let (c, c_up, h) = (config.c, config.c_up, config.head_hidden);
    let mut specs = Vec::new();
    for block in 0..config.extractor_depth {
        edge_conv(&mut specs, &format!("extract.block{block}"), 3 + block * c, c);
    }
    attention(&mut specs, "pacm.enhance", config.spne_width(), c);
    edge_conv(&mut specs, "pacm.expand", c, config.r * c_up);
    dense(&mut specs, "pacm.recon1", c_up, h, Init::Glorot);
    dense(&mut specs, "pacm.recon2", h, 3, Init::Zero);
    attention(&mut specs, "pocm.correct", config.lse_width(), c_up);
    dense(&mut specs, "pocm.offset1", c_up, h, Init::Glorot);
    dense(&mut specs, "pocm.offset2", h, 3, Init::Zero);
    specs
}

/// Fresh parameters: Glorot-uniform weights, zero biases, and zero output
/// layers for both coordinate heads.
pub fn init_params(config: &UpsamplerConfig, seed: u64) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for spec in param_specs(config) {
        let numel = spec.shape.iter().product();
        let data = match spec.init {
            Init::Zero => vec![0.0; numel],
            Init::Glorot => {
                let limit = (6.0 / (spec.shape[0] + spec.shape[1]) as f64).sqrt();
                (0..numel).map(|_| rng.random_range(-limit..=limit)).collect()
            }
        };
        store.insert(spec.name, Tensor::new(spec.shape, data).expect("spec shape matches data"));
    }
    store
}

/// Overwrites the parameters that start at zero with small random values,
/// leaving everything else untouched. Useful when a test needs every path
/// through the network to carry signal.
pub fn randomize_zero_layers(store: &mut ParamStore, config: &UpsamplerConfig, scale: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for spec in param_specs(config) {
        if spec.init == Init::Zero {
            if let Some(t) = store.get_mut(&spec.name) {
                for v in t.data_mut() {
                    *v = rng.random_range(-scale..=scale);
                }
            }
        }
    }
}
