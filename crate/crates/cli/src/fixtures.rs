//! The XOR network from the bitwise-network construction, packaged as a model
//! and a four-sample IDX dataset.

use bitwise_nn::bitcore::TernaryLayer;
use bitwise_nn::bnn::{BetaMode, BnnState};
use bitwise_nn::dataio::{write_idx, Encoding};
use bitwise_nn::ternarize::{implied_network, TernarizeSpec, Thresholds};

use crate::model_file::Model;

/// Hidden units `sign(x1 - x2 + 1)` and `sign(-x1 + x2 + 1)`; class 0 fires when
/// the inputs agree, class 1 (XOR true) when they differ.
pub fn xor_layers() -> Vec<TernaryLayer> {
    vec![
        TernaryLayer::from_values(2, 2, &[1, -1, -1, 1], &[1, 1]).unwrap(),
        TernaryLayer::from_values(2, 2, &[1, 1, -1, -1], &[-1, 1]).unwrap(),
    ]
}

pub fn xor_model() -> Model {
    let layers = xor_layers();
    let shadow = implied_network(&layers).unwrap();
    let thresholds = vec![Thresholds { weights: 0.0, bias: 0.0 }; layers.len()];
    let state = BnnState::from_parts(
        layers,
        shadow,
        TernarizeSpec::new(0.0).unwrap(),
        BetaMode::Frozen,
        thresholds,
        0,
    )
    .unwrap();
    Model::Ternary {
        encoding: Encoding::Bipolar,
        state,
    }
}

/// `(images, labels)` IDX files: 1x2 images with pixels 0 or 255.
pub fn xor_idx() -> (Vec<u8>, Vec<u8>) {
    let pixels = [255, 255, 0, 0, 255, 0, 0, 255];
    let labels = [0, 0, 1, 1];
    (write_idx(&[4, 1, 2], &pixels), write_idx(&[4], &labels))
}
