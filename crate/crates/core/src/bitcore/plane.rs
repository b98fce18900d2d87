use crate::error::{Error, Result};

/// Width of a storage word in bits.
pub const WORD_BITS: usize = 64;

/// A packed vector of bipolar values, one bit each.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BitPlane {
    n_bits: usize,
    words: Vec<u64>,
}

#[inline]
pub(crate) fn word_count(n_bits: usize) -> usize {
    n_bits.div_ceil(WORD_BITS)
}

impl BitPlane {
    /// A plane of `n_bits` values, all `-1`.
    pub fn new(n_bits: usize) -> Self {
        Self {
            n_bits,
            words: vec![0; word_count(n_bits)],
        }
    }

    /// A plane of `n_bits` values, all `+1`.
    pub fn ones(n_bits: usize) -> Self {
        let mut plane = Self {
            n_bits,
            words: vec![u64::MAX; word_count(n_bits)],
        };
        plane.clear_padding();
        plane
    }

    /// Packs a bipolar vector. Element `j` lands in bit `j % 64` of word `j / 64`.
    pub fn pack(values: &[i8]) -> Result<Self> {
        let mut plane = Self::new(values.len());
        for (index, &v) in values.iter().enumerate() {
            match v {
                1 => plane.set(index, true),
                -1 => {}
                other => {
                    return Err(Error::NotBipolar {
                        index,
                        value: other as i64,
                    })
                }
            }
        }
        Ok(plane)
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut n_bits = 0;
        for bit in bits {
            if n_bits % WORD_BITS == 0 {
                words.push(0);
            }
            if bit {
                words[n_bits / WORD_BITS] |= 1 << (n_bits % WORD_BITS);
            }
            n_bits += 1;
        }
        Self { n_bits, words }
    }

    /// Rebuilds a plane from raw words, rejecting a wrong word count or set pad bits.
    pub fn from_words(n_bits: usize, words: Vec<u64>) -> Result<Self> {
        let plane = Self { n_bits, words };
        if plane.words.len() != word_count(n_bits) || plane.padding_dirty() {
            return Err(Error::BadPadding { n_bits });
        }
        Ok(plane)
    }

    pub fn unpack(&self) -> Vec<i8> {
        (0..self.n_bits).map(|i| self.value(i)).collect()
    }

    /// Unpacks into `out` as `±1.0`.
    pub fn unpack_f64_into(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.n_bits);
        for (i, o) in out.iter_mut().enumerate() {
            *o = if self.get(i) { 1.0 } else { -1.0 };
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_bits
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n_bits == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.n_bits, "bit {i} out of range for {} bits", self.n_bits);
        self.words[i / WORD_BITS] >> (i % WORD_BITS) & 1 == 1
    }

    /// The bipolar value at `i`.
    #[inline]
    pub fn value(&self, i: usize) -> i8 {
        if self.get(i) {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.n_bits, "bit {i} out of range for {} bits", self.n_bits);
        let w = &mut self.words[i / WORD_BITS];
        let m = 1u64 << (i % WORD_BITS);
        if bit {
            *w |= m;
        } else {
            *w &= !m;
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Flips every value, keeping the padding clear.
    pub fn complement(&self) -> Self {
        let mut out = Self {
            n_bits: self.n_bits,
            words: self.words.iter().map(|w| !w).collect(),
        };
        out.clear_padding();
        out
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    fn tail_mask(&self) -> u64 {
        match self.n_bits % WORD_BITS {
            0 => u64::MAX,
            r => (1u64 << r) - 1,
        }
    }

    fn clear_padding(&mut self) {
        let mask = self.tail_mask();
        if let Some(last) = self.words.last_mut() {
            *last &= mask;
        }
    }

    fn padding_dirty(&self) -> bool {
        self.words
            .last()
            .is_some_and(|&last| last & !self.tail_mask() != 0)
    }
}
