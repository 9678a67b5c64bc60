//! The upsampling network: dense edge-convolution feature extraction, the
//! cross-patch enhancement stage with feature expansion and coarse
//! coordinate regression, and the per-point offset refinement stage.
//!
//! Every stage takes a [`Graph`] so the same code serves training (recording)
//! and inference ([`Graph::inference`]).

mod config;
mod encode;
mod params;

pub use config::{Ablation, UpsamplerConfig};
pub use encode::{
    lse_encode, lse_encode_var, neighbor_coordinates, spne_encode, union_cloud, PositionCode, LSE_WIDTH,
    SPNE_WIDTH,
};
pub use params::{init_params, param_specs, randomize_zero_layers, Init, ParamSpec};

use crate::autodiff::{Activation, Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::{knn_indices, NeighborhoodIndex, Point3};
use crate::pairing::PatchPair;

fn param(g: &mut Graph, params: &ParamStore, name: &str) -> Result<Var> {
    Ok(g.param(name, params.require(name)?))
}

/// `x W + b` with the weights stored under `{name}.w` / `{name}.b`.
pub fn dense(g: &mut Graph, params: &ParamStore, name: &str, x: Var) -> Result<Var> {
    let w = param(g, params, &format!("{name}.w"))?;
    let b = param(g, params, &format!("{name}.b"))?;
    g.linear(x, w, Some(b))
}

/// Two dense layers with a ReLU between them.
fn perceptron(g: &mut Graph, params: &ParamStore, first: &str, second: &str, x: Var) -> Result<Var> {
    let h = dense(g, params, first, x)?;
    let h = g.relu(h)?;
    dense(g, params, second, h)
}

/// Pre-activation edge responses, one row per `(query, neighbor)`.
///
/// The shared map on `[h_i, h_j - h_i]` is evaluated as
/// `h_i (W_c - W_e) + h_j W_e + b`, which lets both products run once per
/// point instead of once per edge.
fn edge_responses(g: &mut Graph, params: &ParamStore, name: &str, h: Var, index: &NeighborhoodIndex) -> Result<Var> {
    let wc = param(g, params, &format!("{name}.center.w"))?;
    let we = param(g, params, &format!("{name}.edge.w"))?;
    let b = param(g, params, &format!("{name}.b"))?;
    let center = g.linear(h, wc, Some(b))?;
    let edge = g.linear(h, we, None)?;
    let center = g.sub(center, edge)?;
    let center = g.gather_rows(center, index.query_of_each())?;
    let neighbor = g.gather_rows(edge, index.flat().to_vec())?;
    g.add(center, neighbor)
}

/// Max over the neighbor axis of `[queries * k, width]` rows.
fn pool_neighbors(g: &mut Graph, x: Var, index: &NeighborhoodIndex) -> Result<Var> {
    let width = g.shape(x)[1];
    let x = g.reshape(x, &[index.query_count(), index.k(), width])?;
    g.max_axis(x, 1)
}

/// Per-point features `n x c` from a dense stack of edge-convolution blocks
/// over the coordinate KNN graph. Each block sees the coordinates and the
/// outputs of every earlier block.
pub fn extract_features(g: &mut Graph, params: &ParamStore, config: &UpsamplerConfig, points: &[Point3]) -> Result<Var> {
    let index = knn_indices(points, points, config.k)?;
    let coords = g.constant(Tensor::from_points(points));
    let mut inputs = vec![coords];
    let mut last = coords;
    for block in 0..config.extractor_depth {
        let h = if inputs.len() == 1 { coords } else { g.concat(&inputs, 1)? };
        let e = edge_responses(g, params, &format!("extract.block{block}"), h, &index)?;
        // relu commutes with max; pooling first avoids ties among zeros
        let pooled = pool_neighbors(g, e, &index)?;
        last = g.relu(pooled)?;
        inputs.push(last);
    }
    Ok(last)
}

/// Residual vector attention over a KNN table.
///
/// With `X` the neighbor features gathered from `features` by `index` and
/// `d = act(pos2(relu(pos1(code))))`, the weights are
/// `softmax_k(gamma(phi(F_i) - psi(X_ik) + d_ik))` and the output is
/// `F_i + sum_k w_ik * (alpha(X_ik) + d_ik)`. `phi`, `psi` and `alpha` are
/// per-point maps, so they are applied before gathering.
pub fn attention_block(
    g: &mut Graph,
    params: &ParamStore,
    prefix: &str,
    features: Var,
    index: &NeighborhoodIndex,
    code: Var,
    activation: Activation,
) -> Result<Var> {
    let shape = g.shape(features).to_vec();
    if shape.len() != 2 || shape[0] != index.query_count() {
        return Err(Error::ShapeMismatch {
            op: "attention",
            lhs: shape,
            rhs: vec![index.query_count(), 0],
        });
    }
    let (m, width, k) = (shape[0], shape[1], index.k());

    let delta = perceptron(g, params, &format!("{prefix}.pos1"), &format!("{prefix}.pos2"), code)?;
    let delta = g.activation(delta, activation)?;

    let query = dense(g, params, &format!("{prefix}.phi"), features)?;
    let query = g.gather_rows(query, index.query_of_each())?;
    let key = dense(g, params, &format!("{prefix}.psi"), features)?;
    let key = g.gather_rows(key, index.flat().to_vec())?;
    let value = dense(g, params, &format!("{prefix}.alpha"), features)?;
    let value = g.gather_rows(value, index.flat().to_vec())?;

    let relation = g.sub(query, key)?;
    let relation = g.add(relation, delta)?;
    let logits = perceptron(g, params, &format!("{prefix}.gamma1"), &format!("{prefix}.gamma2"), relation)?;
    let logits = g.reshape(logits, &[m, k, width])?;
    let weights = g.softmax(logits, 1)?;

    let value = g.add(value, delta)?;
    let value = g.reshape(value, &[m, k, width])?;
    let weighted = g.mul(weights, value)?;
    let update = g.sum_axis(weighted, 1)?;
    g.add(features, update)
}

/// Widens each point's features `r`-fold with an edge convolution (no
/// nonlinearity) and rearranges the result to `r n x c_up`: the `j`-th
/// channel block of point `i` becomes output row `i r + j`.
pub fn expand_features(
    g: &mut Graph,
    params: &ParamStore,
    config: &UpsamplerConfig,
    features: Var,
    index: &NeighborhoodIndex,
) -> Result<Var> {
    let e = edge_responses(g, params, "pacm.expand", features, index)?;
    let wide = pool_neighbors(g, e, index)?;
    let width = g.shape(wide)[1];
    if width != config.r * config.c_up {
        return Err(Error::ShapeMismatch {
            op: "expand",
            lhs: vec![width],
            rhs: vec![config.r * config.c_up],
        });
    }
    let rows = g.shape(wide)[0];
    // Row-major reshape is exactly the point-major shuffle.
    g.reshape(wide, &[rows * config.r, config.c_up])
}

/// Inverse of the rearrangement in [`expand_features`].
pub fn unshuffle(expanded: &Tensor, r: usize) -> Result<Tensor> {
    let shape = expanded.shape();
    if shape.len() != 2 || r == 0 || !shape[0].is_multiple_of(r) {
        return Err(Error::invalid(format!("cannot unshuffle shape {shape:?} by {r}")));
    }
    expanded.clone().reshape(&[shape[0] / r, shape[1] * r])
}

/// Coordinate head `c_up -> hidden -> 3` applied to every expanded point.
pub fn reconstruct_coarse(g: &mut Graph, params: &ParamStore, expanded: Var) -> Result<Var> {
    perceptron(g, params, "pacm.recon1", "pacm.recon2", expanded)
}

/// Cross-patch stage: enhancement attention with the SPNE code, expansion
/// and coarse coordinates. With `coarse_skip`, row `i r + j` of the coarse
/// output is primary point `i` plus the head's output. Returns
/// `(coarse, expanded features)`.
pub fn pacm_forward(
    g: &mut Graph,
    params: &ParamStore,
    config: &UpsamplerConfig,
    primary: &[Point3],
    adjacent: &[Point3],
    features: Var,
) -> Result<(Var, Var)> {
    let within = knn_indices(primary, primary, config.k)?;
    let union = union_cloud(primary, adjacent);
    let code = if config.ablation.raw_coordinate_codes {
        neighbor_coordinates(primary, &within)?
    } else {
        let across = knn_indices(&union, primary, config.k)?;
        spne_encode(primary, &within, &union, &across)?
    };
    let code = g.constant(code.to_tensor());
    let enhanced = attention_block(g, params, "pacm.enhance", features, &within, code, Activation::Tanh)?;
    let expanded = expand_features(g, params, config, enhanced, &within)?;
    let mut coarse = reconstruct_coarse(g, params, expanded)?;
    if config.coarse_skip {
        let replicas: Vec<Point3> = primary.iter().flat_map(|p| std::iter::repeat_n(*p, config.r)).collect();
        let replicas = g.constant(Tensor::from_points(&replicas));
        coarse = g.add(coarse, replicas)?;
    }
    Ok((coarse, expanded))
}

/// Refinement stage: correction attention with the LSE code on the coarse
/// cloud, then `coarse + offset`.
pub fn pocm_forward(g: &mut Graph, params: &ParamStore, config: &UpsamplerConfig, coarse: Var, expanded: Var) -> Result<Var> {
    let rows = g.shape(coarse)[0];
    if g.shape(expanded)[0] != rows {
        return Err(Error::ShapeMismatch {
            op: "pocm",
            lhs: g.shape(coarse).to_vec(),
            rhs: g.shape(expanded).to_vec(),
        });
    }
    let points = g.value(coarse).to_points()?;
    let index = knn_indices(&points, &points, config.k)?;
    let code = if config.ablation.raw_coordinate_codes {
        g.gather_rows(coarse, index.flat().to_vec())?
    } else {
        lse_encode_var(g, coarse, &index)?
    };
    let corrected = attention_block(g, params, "pocm.correct", expanded, &index, code, Activation::Relu)?;
    let offset = perceptron(g, params, "pocm.offset1", "pocm.offset2", corrected)?;
    g.add(coarse, offset)
}

/// Graph handles of both network outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outputs {
    pub coarse: Var,
    pub refined: Var,
}

/// The full pipeline on a normalized patch pair.
pub fn forward(
    g: &mut Graph,
    params: &ParamStore,
    config: &UpsamplerConfig,
    primary: &[Point3],
    adjacent: &[Point3],
) -> Result<Outputs> {
    config.validate()?;
    if primary.len() != config.n {
        return Err(Error::invalid(format!(
            "primary patch has {} points, the network expects n = {}",
            primary.len(),
            config.n
        )));
    }
    let adjacent = if config.ablation.no_pacm_pairs { primary } else { adjacent };
    let features = extract_features(g, params, config, primary)?;
    let (coarse, expanded) = pacm_forward(g, params, config, primary, adjacent, features)?;
    let refined = if config.ablation.no_pocm {
        coarse
    } else {
        pocm_forward(g, params, config, coarse, expanded)?
    };
    Ok(Outputs { coarse, refined })
}

/// Coarse and refined point sets in the pair's normalized frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Upsampled {
    pub coarse: Vec<Point3>,
    pub refined: Vec<Point3>,
}

/// Inference without recording a tape.
pub fn upsample_patch_pair(pair: &PatchPair, params: &ParamStore, config: &UpsamplerConfig) -> Result<Upsampled> {
    upsample_points(&pair.primary, &pair.adjacent, params, config)
}

pub fn upsample_points(
    primary: &[Point3],
    adjacent: &[Point3],
    params: &ParamStore,
    config: &UpsamplerConfig,
) -> Result<Upsampled> {
    let mut g = Graph::inference();
    let out = forward(&mut g, params, config, primary, adjacent)?;
    let refined = g.value(out.refined).to_points()?;
    if !refined.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::Degenerate("network produced non-finite coordinates".into()));
    }
    Ok(Upsampled {
        coarse: g.value(out.coarse).to_points()?,
        refined,
    })
}
