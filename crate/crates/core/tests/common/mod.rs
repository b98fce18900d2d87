#![allow(dead_code)]

use bitwise_nn::dataio::{encode, EncodedDataset, Encoding, RawDataset, Split};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The four XOR points as 1x2 images; class 1 means the inputs differ.
pub fn xor_dataset() -> EncodedDataset {
    let pixels = vec![255, 255, 0, 0, 255, 0, 0, 255];
    let raw = RawDataset::new(Split::Train, 1, 2, pixels, vec![0, 0, 1, 1]).unwrap();
    encode(&raw, Encoding::Bipolar)
}

/// Random images with labels from a fixed random linear rule, so they are learnable.
pub fn synthetic_dataset(n: usize, pixels: usize, encoding: Encoding, seed: u64) -> EncodedDataset {
    let mut r = rng(seed);
    let proj: Vec<f64> = (0..pixels * 10).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut data = Vec::with_capacity(n * pixels);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let img: Vec<u8> = (0..pixels).map(|_| r.random()).collect();
        let scores: Vec<f64> = (0..10)
            .map(|c| {
                img.iter()
                    .enumerate()
                    .map(|(j, &p)| proj[c * pixels + j] * (p as f64 / 255.0 - 0.5))
                    .sum()
            })
            .collect();
        let label = (0..10).fold(0, |b, c| if scores[c] > scores[b] { c } else { b });
        data.extend(img);
        labels.push(label as u8);
    }
    encode(&RawDataset::new(Split::Train, 1, pixels, data, labels).unwrap(), encoding)
}

pub fn random_ternary(r: &mut ChaCha8Rng, n: usize, zero_p: f64) -> Vec<i8> {
    (0..n)
        .map(|_| {
            if r.random_bool(zero_p) {
                0
            } else if r.random_bool(0.5) {
                1
            } else {
                -1
            }
        })
        .collect()
}

pub fn random_bipolar(r: &mut ChaCha8Rng, n: usize) -> Vec<i8> {
    (0..n).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect()
}
