//! Bitwise neural networks.
//!
//! Every input, weight, bias and hidden signal of a deployed network is a single
//! bit (weights additionally may be switched off), and the forward pass needs
//! only XNOR and popcount. Training happens in two phases:
//!
//! 1. [`realnet`] trains a real-valued network whose weights are squashed by
//!    `tanh`, so it behaves like a relaxed version of the bitwise one.
//! 2. [`ternarize`] turns those parameters into `{-1, 0, +1}` and [`bnn`]
//!    refines them with noisy backpropagation: the forward pass runs through the
//!    bitwise network while updates accumulate in real-valued shadow copies.
//!
//! [`dataio`] reads MNIST and produces the input binarizations, and [`bitcore`]
//! holds the packed representations and kernels.

pub mod bitcore;
pub mod bnn;
pub mod dataio;
pub mod error;
mod linalg;
pub mod realnet;
pub mod ternarize;

pub use error::{Error, Result};
