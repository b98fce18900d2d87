use super::plane::{word_count, BitPlane};
use crate::error::{Error, Result};

/// The sign activation on an integer accumulator. Zero maps to `+1`.
#[inline]
pub fn sign_bit(a: i32) -> bool {
    a >= 0
}

/// Dot product of a ternary row (sign/mask words) with a bipolar input, over raw words.
///
/// All three slices must have the same length and clear padding in `mask`.
#[inline]
pub(crate) fn xnor_dot_words(sign: &[u64], mask: &[u64], input: &[u64]) -> i32 {
    debug_assert!(sign.len() == mask.len() && mask.len() == input.len());
    let mut agree = 0u32;
    let mut active = 0u32;
    for ((&s, &m), &z) in sign.iter().zip(mask).zip(input) {
        agree += (!(s ^ z) & m).count_ones();
        active += m.count_ones();
    }
    2 * agree as i32 - active as i32
}

/// `sum_j w_j * z_j` for a ternary row given as a (sign, mask) plane pair.
pub fn xnor_dot(sign: &BitPlane, mask: &BitPlane, input: &BitPlane) -> Result<i32> {
    if sign.len() != input.len() {
        return Err(Error::dim("weight sign row", input.len(), sign.len()));
    }
    if mask.len() != input.len() {
        return Err(Error::dim("weight mask row", input.len(), mask.len()));
    }
    Ok(xnor_dot_words(sign.words(), mask.words(), input.words()))
}

/// Bitwise prediction error: the number of positions where target and output disagree.
pub fn bitwise_error(target: &BitPlane, output: &BitPlane) -> Result<u32> {
    if target.len() != output.len() {
        return Err(Error::dim("bitwise error output", target.len(), output.len()));
    }
    Ok(target
        .words()
        .iter()
        .zip(output.words())
        .map(|(t, z)| (t ^ z).count_ones())
        .sum())
}

/// Exact integer pre-activations of one layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreActivation(pub Vec<i32>);

impl PreActivation {
    pub fn values(&self) -> &[i32] {
        &self.0
    }
}

/// A layer with weights and biases in {-1, 0, +1}, stored as sign and mask planes.
///
/// Inactive entries always carry a zero sign bit so that two layers with the same
/// effective weights are identical word for word.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TernaryLayer {
    rows: usize,
    cols: usize,
    sign: Vec<BitPlane>,
    mask: Vec<BitPlane>,
    bias_sign: BitPlane,
    bias_mask: BitPlane,
}

fn ternary_planes(values: &[i8], offset: usize) -> Result<(BitPlane, BitPlane)> {
    let mut sign = BitPlane::new(values.len());
    let mut mask = BitPlane::new(values.len());
    for (j, &v) in values.iter().enumerate() {
        match v {
            1 => {
                sign.set(j, true);
                mask.set(j, true);
            }
            -1 => mask.set(j, true),
            0 => {}
            other => {
                return Err(Error::NotTernary {
                    index: offset + j,
                    value: other as i64,
                })
            }
        }
    }
    Ok((sign, mask))
}

impl TernaryLayer {
    /// Builds a layer from row-major weights (`rows * cols`) and `rows` biases.
    pub fn from_values(rows: usize, cols: usize, weights: &[i8], bias: &[i8]) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::dim("ternary weights", rows * cols, weights.len()));
        }
        if bias.len() != rows {
            return Err(Error::dim("ternary bias", rows, bias.len()));
        }
        let mut sign = Vec::with_capacity(rows);
        let mut mask = Vec::with_capacity(rows);
        for (i, row) in weights.chunks(cols.max(1)).take(rows).enumerate() {
            let (s, m) = ternary_planes(row, i * cols)?;
            sign.push(s);
            mask.push(m);
        }
        // cols == 0 leaves `chunks` empty
        while sign.len() < rows {
            sign.push(BitPlane::new(0));
            mask.push(BitPlane::new(0));
        }
        let (bias_sign, bias_mask) = ternary_planes(bias, 0)?;
        Ok(Self {
            rows,
            cols,
            sign,
            mask,
            bias_sign,
            bias_mask,
        })
    }

    /// Assembles a layer from planes, checking shapes and the canonical zero-sign form.
    pub fn from_planes(
        sign: Vec<BitPlane>,
        mask: Vec<BitPlane>,
        bias_sign: BitPlane,
        bias_mask: BitPlane,
    ) -> Result<Self> {
        let rows = bias_sign.len();
        if bias_mask.len() != rows {
            return Err(Error::dim("bias mask", rows, bias_mask.len()));
        }
        if sign.len() != rows || mask.len() != rows {
            return Err(Error::dim("weight rows", rows, sign.len().min(mask.len())));
        }
        let cols = sign.first().map_or(0, BitPlane::len);
        let canonical = |s: &BitPlane, m: &BitPlane| {
            s.words().iter().zip(m.words()).all(|(s, m)| s & !m == 0)
        };
        for (s, m) in sign.iter().zip(&mask) {
            if s.len() != cols || m.len() != cols {
                return Err(Error::dim("weight row", cols, s.len().max(m.len())));
            }
            if !canonical(s, m) {
                return Err(Error::Config(
                    "inactive weight with a set sign bit".to_string(),
                ));
            }
        }
        if !canonical(&bias_sign, &bias_mask) {
            return Err(Error::Config("inactive bias with a set sign bit".to_string()));
        }
        Ok(Self {
            rows,
            cols,
            sign,
            mask,
            bias_sign,
            bias_mask,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn sign_row(&self, i: usize) -> &BitPlane {
        &self.sign[i]
    }

    pub fn mask_row(&self, i: usize) -> &BitPlane {
        &self.mask[i]
    }

    pub fn bias_sign(&self) -> &BitPlane {
        &self.bias_sign
    }

    pub fn bias_mask(&self) -> &BitPlane {
        &self.bias_mask
    }

    /// Effective weight `w[i][j]` in {-1, 0, +1}.
    pub fn weight(&self, i: usize, j: usize) -> i8 {
        ternary_at(&self.sign[i], &self.mask[i], j)
    }

    pub fn bias(&self, i: usize) -> i8 {
        ternary_at(&self.bias_sign, &self.bias_mask, i)
    }

    pub fn weights(&self) -> Vec<i8> {
        (0..self.rows)
            .flat_map(|i| (0..self.cols).map(move |j| self.weight(i, j)))
            .collect()
    }

    pub fn biases(&self) -> Vec<i8> {
        (0..self.rows).map(|i| self.bias(i)).collect()
    }

    /// Number of inactive weights (biases excluded).
    pub fn zero_weights(&self) -> usize {
        let active: u32 = self.mask.iter().map(BitPlane::count_ones).sum();
        self.rows * self.cols - active as usize
    }

    /// Bias plus XNOR dot product of row `i`, without shape checks.
    #[inline]
    pub(crate) fn row_preactivation(&self, i: usize, input: &[u64]) -> i32 {
        let bias = match (self.bias_mask.get(i), self.bias_sign.get(i)) {
            (false, _) => 0,
            (true, true) => 1,
            (true, false) => -1,
        };
        bias + xnor_dot_words(self.sign[i].words(), self.mask[i].words(), input)
    }

    /// Computes `a_i = b_i + sum_j w_ij z_j` and `z'_i = sign(a_i)`.
    pub fn forward(&self, input: &BitPlane) -> Result<(PreActivation, BitPlane)> {
        let mut pre = vec![0; self.rows];
        let mut out = BitPlane::new(self.rows);
        self.forward_into(input, &mut pre, &mut out)?;
        Ok((PreActivation(pre), out))
    }

    /// Allocation-free form of [`TernaryLayer::forward`].
    pub fn forward_into(
        &self,
        input: &BitPlane,
        pre: &mut [i32],
        out: &mut BitPlane,
    ) -> Result<()> {
        if input.len() != self.cols {
            return Err(Error::dim("layer input", self.cols, input.len()));
        }
        if pre.len() != self.rows || out.len() != self.rows {
            return Err(Error::dim("layer output", self.rows, pre.len()));
        }
        debug_assert_eq!(input.words().len(), word_count(self.cols));
        let words = out.words_mut();
        words.fill(0);
        for (i, a) in pre.iter_mut().enumerate() {
            *a = self.row_preactivation(i, input.words());
            if sign_bit(*a) {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Ok(())
    }

    /// Row-major `f64` copy of the effective weights.
    pub fn dense_weights(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                dense[i * self.cols + j] = self.weight(i, j) as f64;
            }
        }
        dense
    }
}

#[inline]
fn ternary_at(sign: &BitPlane, mask: &BitPlane, j: usize) -> i8 {
    match (mask.get(j), sign.get(j)) {
        (false, _) => 0,
        (true, true) => 1,
        (true, false) => -1,
    }
}
