//! Packed bipolar bit planes and the XNOR/popcount feedforward kernel.
//!
//! A bipolar value is stored as one bit: `1` encodes `+1`, `0` encodes `-1`.
//! Bits are laid out LSB-first inside 64-bit words and the unused tail of the
//! last word is always zero, so whole-word popcounts never see garbage.
//!
//! Ternary weights (`-1`, `0`, `+1`) use a second plane as an activity mask.
//! With `s` the sign plane, `m` the mask and `z` the input, one row computes
//!
//! ```text
//! sum_j w_j * z_j = 2 * popcount(!(s ^ z) & m) - popcount(m)
//! ```

mod layer;
mod plane;

pub use layer::{bitwise_error, sign_bit, xnor_dot, PreActivation, TernaryLayer};
pub use plane::{BitPlane, WORD_BITS};
