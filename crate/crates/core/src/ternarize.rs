//! Real parameters to ternary layers via a sparsity target.
//!
//! For a tensor of `N` values and sparsity `λ`, the boundary `β` is the
//! `round(λN)`-th smallest magnitude (or 0 when that rank is 0). Values with
//! `|v| <= β` become 0, the rest keep their sign. Ties at `β` all go to zero, so
//! the achieved sparsity can exceed `λ` by the size of the tie.

use crate::bitcore::TernaryLayer;
use crate::error::{Error, Result};
use crate::realnet::RealNetwork;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TernarizeSpec {
    sparsity: f64,
}

impl TernarizeSpec {
    pub fn new(sparsity: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&sparsity) {
            return Err(Error::InvalidSparsity(sparsity));
        }
        Ok(Self { sparsity })
    }

    pub fn sparsity(&self) -> f64 {
        self.sparsity
    }
}

pub fn compute_beta(values: &[f64], sparsity: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyTensor);
    }
    TernarizeSpec::new(sparsity)?;
    let k = (sparsity * values.len() as f64).round() as usize;
    if k == 0 {
        return Ok(0.0);
    }
    let mut mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let (_, kth, _) = mags.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

#[inline]
pub fn ternary_value(v: f64, beta: f64) -> i8 {
    if v.abs() <= beta {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

pub fn ternarize_values(values: &[f64], beta: f64) -> Vec<i8> {
    values.iter().map(|&v| ternary_value(v, beta)).collect()
}

/// Boundaries used for one layer's weights and biases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub weights: f64,
    pub bias: f64,
}

/// Per-tensor boundaries for every layer of `net`.
pub fn network_thresholds(net: &RealNetwork, spec: TernarizeSpec) -> Result<Vec<Thresholds>> {
    net.layers()
        .iter()
        .map(|l| {
            Ok(Thresholds {
                weights: compute_beta(&l.weights, spec.sparsity)?,
                bias: compute_beta(&l.bias, spec.sparsity)?,
            })
        })
        .collect()
}

/// Ternarizes every layer with the given boundaries.
pub fn ternarize_with(net: &RealNetwork, thresholds: &[Thresholds]) -> Result<Vec<TernaryLayer>> {
    if thresholds.len() != net.layers().len() {
        return Err(Error::dim("thresholds", net.layers().len(), thresholds.len()));
    }
    net.layers()
        .iter()
        .zip(thresholds)
        .map(|(l, t)| {
            TernaryLayer::from_values(
                l.rows(),
                l.cols(),
                &ternarize_values(&l.weights, t.weights),
                &ternarize_values(&l.bias, t.bias),
            )
        })
        .collect()
}

/// Result of ternarizing a trained network.
#[derive(Clone, Debug)]
pub struct Ternarized {
    pub layers: Vec<TernaryLayer>,
    /// Copy of the real parameters, updated during phase-2 training.
    pub shadow: RealNetwork,
    pub thresholds: Vec<Thresholds>,
}

pub fn ternarize_network(net: &RealNetwork, spec: TernarizeSpec) -> Result<Ternarized> {
    let thresholds = network_thresholds(net, spec)?;
    Ok(Ternarized {
        layers: ternarize_with(net, &thresholds)?,
        shadow: net.clone(),
        thresholds,
    })
}

/// The real network whose parameters are the ternary values themselves.
pub fn implied_network(layers: &[TernaryLayer]) -> Result<RealNetwork> {
    RealNetwork::from_layers(
        layers
            .iter()
            .map(|l| {
                crate::realnet::RealLayer::from_parts(
                    l.rows(),
                    l.cols(),
                    l.weights().into_iter().map(f64::from).collect(),
                    l.biases().into_iter().map(f64::from).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?,
    )
}
