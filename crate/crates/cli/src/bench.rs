//! Packed XNOR/popcount forward pass against a plain `f64` loop on the same layer.

use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use anyhow::{bail, Result};
use bitwise_nn::bitcore::{BitPlane, TernaryLayer};
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once('x').ok_or("expected ROWSxCOLS")?;
    let r = r.parse().map_err(|e| format!("{e}"))?;
    let c = c.parse().map_err(|e| format!("{e}"))?;
    Ok((r, c))
}

#[derive(Args, Clone, Debug)]
pub struct BenchArgs {
    /// Layer shape as ROWSxCOLS.
    #[arg(long, value_parser = parse_dims, default_value = "1024x1024")]
    pub dims: (usize, usize),
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    /// Fraction of zero weights in the random layer.
    #[arg(long, default_value_t = 0.0)]
    pub sparsity: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: usize,
    pub cols: usize,
    pub iters: usize,
    pub packed_per_sec: f64,
    pub naive_per_sec: f64,
}

impl BenchReport {
    pub fn speedup(&self) -> f64 {
        self.packed_per_sec / self.naive_per_sec
    }
}

struct DenseLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayer {
    fn forward(&self, x: &[f64], pre: &mut [f64], out: &mut [bool]) {
        for i in 0..self.rows {
            let row = &self.weights[i * self.cols..(i + 1) * self.cols];
            let mut a = self.bias[i];
            for (w, v) in row.iter().zip(x) {
                a += w * v;
            }
            pre[i] = a;
            out[i] = a >= 0.0;
        }
    }
}

const POOL: usize = 64;

pub fn run_bench(args: &BenchArgs) -> Result<BenchReport> {
    let (rows, cols) = args.dims;
    if rows == 0 || cols == 0 {
        bail!("dims must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut ternary = |n: usize| -> Vec<i8> {
        (0..n)
            .map(|_| {
                if rng.random_bool(args.sparsity.clamp(0.0, 1.0)) {
                    0
                } else if rng.random_bool(0.5) {
                    1
                } else {
                    -1
                }
            })
            .collect()
    };
    let w = ternary(rows * cols);
    let b = ternary(rows);
    let packed = TernaryLayer::from_values(rows, cols, &w, &b)?;
    let dense = DenseLayer {
        rows,
        cols,
        weights: w.iter().map(|&v| v as f64).collect(),
        bias: b.iter().map(|&v| v as f64).collect(),
    };

    let inputs: Vec<Vec<i8>> = (0..POOL)
        .map(|_| (0..cols).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect())
        .collect();
    let planes: Vec<BitPlane> = inputs.iter().map(|v| BitPlane::pack(v)).collect::<Result<_, _>>()?;
    let reals: Vec<Vec<f64>> = inputs.iter().map(|v| v.iter().map(|&x| x as f64).collect()).collect();

    let mut pre_i = vec![0i32; rows];
    let mut out_bits = BitPlane::new(rows);
    let mut pre_f = vec![0.0; rows];
    let mut out_f = vec![false; rows];

    // correctness gate before any timing
    for (plane, real) in planes.iter().zip(&reals) {
        packed.forward_into(plane, &mut pre_i, &mut out_bits)?;
        dense.forward(real, &mut pre_f, &mut out_f);
        let agree = pre_i.iter().zip(&pre_f).all(|(&a, &f)| a as f64 == f)
            && out_f.iter().enumerate().all(|(i, &o)| out_bits.get(i) == o);
        if !agree {
            bail!("packed and f64 forward passes disagree");
        }
    }

    let start = Instant::now();
    for k in 0..args.iters {
        packed.forward_into(black_box(&planes[k % POOL]), &mut pre_i, &mut out_bits)?;
        black_box(&out_bits);
    }
    let packed_secs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    for k in 0..args.iters {
        dense.forward(black_box(&reals[k % POOL]), &mut pre_f, &mut out_f);
        black_box(&out_f);
    }
    let naive_secs = start.elapsed().as_secs_f64();

    let rate = |secs: f64| args.iters as f64 / secs.max(1e-9);
    Ok(BenchReport {
        rows,
        cols,
        iters: args.iters,
        packed_per_sec: rate(packed_secs),
        naive_per_sec: rate(naive_secs),
    })
}

pub fn bench(args: &BenchArgs, out: &mut dyn Write) -> Result<BenchReport> {
    let report = run_bench(args)?;
    writeln!(out, "precheck=ok dims={}x{} iters={}", report.rows, report.cols, report.iters)?;
    writeln!(out, "packed_samples_per_sec={:.1}", report.packed_per_sec)?;
    writeln!(out, "naive_f64_samples_per_sec={:.1}", report.naive_per_sec)?;
    writeln!(out, "speedup={:.2}", report.speedup())?;
    Ok(report)
}
