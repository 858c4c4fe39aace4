//! Fast Walsh-Hadamard transform and the Fastfood structured projection.
//!
//! A Fastfood block approximates a dense Gaussian matrix by the product
//! `S H G P H B`, where `B` is a random sign diagonal, `P` a permutation,
//! `G` a Gaussian diagonal, `S` a chi-distributed row-norm correction and
//! `H` the (never materialized) Walsh-Hadamard matrix. Blocks are stacked
//! until they cover the requested output dimension and the concatenated
//! output is truncated.
//!
//! All randomness comes from ChaCha8 keyed by the projector seed, with one
//! independent stream per `(block_index, component)` pair, so a projector is
//! fully described by `(d, D, seed)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const PROJECTOR_SCHEMA_VERSION: u32 = 1;

const TAG_SIGNS: u64 = 0;
const TAG_GAUSS: u64 = 1;
const TAG_PERM: u64 = 2;
const TAG_CHI: u64 = 3;
const TAG_COUNT: u64 = 4;

/// In-place unnormalized Walsh-Hadamard transform.
pub fn fwht_in_place(x: &mut [f64]) -> Result<()> {
    let n = x.len();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo { len: n });
    }
    let mut half = 1;
    while half < n {
        for start in (0..n).step_by(half * 2) {
            for i in start..start + half {
                let a = x[i];
                let b = x[i + half];
                x[i] = a + b;
                x[i + half] = a - b;
            }
        }
        half *= 2;
    }
    Ok(())
}

/// Returns `H x` for a power-of-two length `x`.
pub fn fwht(x: &[f64]) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

fn block_rng(seed: u64, block: usize, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64 * TAG_COUNT + tag);
    rng
}

/// One `S H G P H B` factorization of size `n x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FastfoodBlock {
    signs: Vec<i8>,
    gauss: Vec<f64>,
    perm: Vec<u32>,
    scale: Vec<f64>,
}

impl FastfoodBlock {
    fn generate(n: usize, seed: u64, block: usize) -> Self {
        let mut rng = block_rng(seed, block, TAG_SIGNS);
        let signs = (0..n)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();

        let mut rng = block_rng(seed, block, TAG_GAUSS);
        let gauss: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();

        let mut rng = block_rng(seed, block, TAG_PERM);
        let mut perm: Vec<u32> = (0..n as u32).collect();
        perm.shuffle(&mut rng);

        // Each row of H G P H B has norm sqrt(n) * ||G||_F. Rescaling row i by
        // chi_n / ||G||_F gives it the norm distribution of an n-dimensional
        // standard Gaussian row (up to the sqrt(n) absorbed by the output scale).
        let mut rng = block_rng(seed, block, TAG_CHI);
        let frob = gauss.iter().map(|g| g * g).sum::<f64>().sqrt();
        let chi_sq = ChiSquared::new(n as f64).expect("n >= 1");
        let scale = (0..n)
            .map(|_| {
                let s = chi_sq.sample(&mut rng).sqrt() / frob;
                // chi_n is almost surely positive; keep the invariant strict.
                s.max(f64::MIN_POSITIVE)
            })
            .collect();

        FastfoodBlock {
            signs,
            gauss,
            perm,
            scale,
        }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    /// Diagonal of `B`, entries in {-1, +1}.
    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Diagonal of `G`.
    pub fn gauss(&self) -> &[f64] {
        &self.gauss
    }

    /// `(P x)[i] = x[perm[i]]`.
    pub fn perm(&self) -> &[u32] {
        &self.perm
    }

    /// Diagonal of `S`.
    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    fn stored_bytes(&self) -> usize {
        self.signs.len() * std::mem::size_of::<i8>()
            + self.gauss.len() * std::mem::size_of::<f64>()
            + self.perm.len() * std::mem::size_of::<u32>()
            + self.scale.len() * std::mem::size_of::<f64>()
    }

    /// `out = factor * S H G P H B x`. `work` and `out` have the block length.
    fn apply(&self, x: &[f64], factor: f64, work: &mut [f64], out: &mut [f64]) {
        for ((w, &xi), &s) in work.iter_mut().zip(x).zip(&self.signs) {
            *w = xi * f64::from(s);
        }
        fwht_in_place(work).expect("block length is a power of two");
        for ((o, &p), &g) in out.iter_mut().zip(&self.perm).zip(&self.gauss) {
            *o = work[p as usize] * g;
        }
        fwht_in_place(out).expect("block length is a power of two");
        for (o, &s) in out.iter_mut().zip(&self.scale) {
            *o *= s * factor;
        }
    }
}

/// Frozen linear map from `R^d` to `R^D` built from stacked Fastfood blocks.
///
/// The composite approximates a dense matrix with i.i.d. `N(0, 1/d)` entries,
/// so a standard-normal input produces output coordinates of unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct FastfoodProjector {
    input_dim: usize,
    output_dim: usize,
    padded_dim: usize,
    seed: u64,
    blocks: Vec<FastfoodBlock>,
}

impl FastfoodProjector {
    pub fn new(input_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::invalid(format!(
                "projector dimensions must be positive (d={input_dim}, D={output_dim})"
            )));
        }
        let padded_dim = input_dim.next_power_of_two();
        let block_count = output_dim.div_ceil(padded_dim);
        let blocks = (0..block_count)
            .map(|b| FastfoodBlock::generate(padded_dim, seed, b))
            .collect();
        Ok(FastfoodProjector {
            input_dim,
            output_dim,
            padded_dim,
            seed,
            blocks,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn padded_dim(&self) -> usize {
        self.padded_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn blocks(&self) -> &[FastfoodBlock] {
        &self.blocks
    }

    /// Scalar applied to every block output in addition to `S`.
    pub fn output_factor(&self) -> f64 {
        1.0 / ((self.padded_dim * self.input_dim) as f64).sqrt()
    }

    /// Bytes held by the explicitly stored diagonals and permutations.
    pub fn stored_bytes(&self) -> usize {
        self.blocks.iter().map(FastfoodBlock::stored_bytes).sum()
    }

    /// Bytes a dense `D x d` float32 matrix would need.
    pub fn dense_f32_bytes(&self) -> usize {
        self.output_dim * self.input_dim * std::mem::size_of::<f32>()
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.output_dim];
        self.project_into(v, &mut out)?;
        Ok(out)
    }

    pub fn project_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        if v.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "projector input",
                expected: self.input_dim,
                got: v.len(),
            });
        }
        if out.len() != self.output_dim {
            return Err(Error::DimensionMismatch {
                what: "projector output",
                expected: self.output_dim,
                got: out.len(),
            });
        }
        let n = self.padded_dim;
        let mut padded = vec![0.0; n];
        padded[..self.input_dim].copy_from_slice(v);
        let mut work = vec![0.0; n];
        let mut block_out = vec![0.0; n];
        let factor = self.output_factor();
        for (b, block) in self.blocks.iter().enumerate() {
            let start = b * n;
            let end = (start + n).min(self.output_dim);
            block.apply(&padded, factor, &mut work, &mut block_out);
            out[start..end].copy_from_slice(&block_out[..end - start]);
        }
        Ok(())
    }

    pub fn record(&self) -> ProjectorRecord {
        ProjectorRecord {
            schema_version: PROJECTOR_SCHEMA_VERSION,
            d: self.input_dim,
            output_dim: self.output_dim,
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.record())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: ProjectorRecord = serde_json::from_str(text)?;
        record.build()
    }
}

/// Serialized form of a projector; block contents are regenerated from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectorRecord {
    pub schema_version: u32,
    pub d: usize,
    #[serde(rename = "D")]
    pub output_dim: usize,
    pub seed: u64,
}

impl ProjectorRecord {
    pub fn build(&self) -> Result<FastfoodProjector> {
        if self.schema_version != PROJECTOR_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "projector",
                expected: PROJECTOR_SCHEMA_VERSION,
                found: self.schema_version,
            });
        }
        FastfoodProjector::new(self.d, self.output_dim, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// Sylvester construction: H_1 = [1], H_2n = [[H, H], [H, -H]].
    fn sylvester(n: usize) -> Vec<Vec<f64>> {
        let mut h = vec![vec![1.0]];
        while h.len() < n {
            let m = h.len();
            let mut next = vec![vec![0.0; 2 * m]; 2 * m];
            for i in 0..m {
                for j in 0..m {
                    next[i][j] = h[i][j];
                    next[i][j + m] = h[i][j];
                    next[i + m][j] = h[i][j];
                    next[i + m][j + m] = -h[i][j];
                }
            }
            h = next;
        }
        h
    }

    fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        m.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn fwht_small_cases() {
        assert_eq!(fwht(&[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![1.0; 4]);
        assert_eq!(fwht(&[1.0, 1.0]).unwrap(), vec![2.0, 0.0]);
        assert_eq!(fwht(&[3.5]).unwrap(), vec![3.5]);
    }

    #[test]
    fn fwht_rejects_non_power_of_two() {
        assert!(matches!(
            fwht(&[1.0, 2.0, 3.0]),
            Err(Error::NotPowerOfTwo { len: 3 })
        ));
        assert!(matches!(fwht(&[]), Err(Error::NotPowerOfTwo { len: 0 })));
    }

    #[test]
    fn fwht_matches_naive_16() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let expected = matvec(&sylvester(16), &x);
        for (a, b) in fwht(&x).unwrap().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn build_rejects_zero_dims() {
        assert!(FastfoodProjector::new(0, 4, 1).is_err());
        assert!(FastfoodProjector::new(4, 0, 1).is_err());
    }

    #[test]
    fn exact_fit_has_one_block() {
        let p = FastfoodProjector::new(4, 4, 9).unwrap();
        assert_eq!(p.padded_dim(), 4);
        assert_eq!(p.blocks().len(), 1);
    }

    #[test]
    fn large_layout_and_memory() {
        let p = FastfoodProjector::new(2304, 34800, 0).unwrap();
        assert_eq!(p.padded_dim(), 4096);
        assert_eq!(p.blocks().len(), 9);
        assert!(p.stored_bytes() < 1 << 20);
        // Dense float32: 34800 * 2304 * 4 bytes, about 306 MiB.
        let mib = p.dense_f32_bytes() as f64 / (1 << 20) as f64;
        assert!((mib - 306.0).abs() < 1.0, "{mib}");
    }

    #[test]
    fn block_invariants() {
        let p = FastfoodProjector::new(20, 100, 3).unwrap();
        for block in p.blocks() {
            assert!(block.signs().iter().all(|&s| s == 1 || s == -1));
            assert!(block.scale().iter().all(|&s| s > 0.0));
            let mut seen = vec![false; block.len()];
            for &i in block.perm() {
                assert!(!seen[i as usize]);
                seen[i as usize] = true;
            }
        }
    }

    #[test]
    fn golden_values() {
        // Frozen outputs of the ChaCha8 stream layout; a change here means
        // previously saved projector records no longer reproduce.
        let p = FastfoodProjector::new(4, 6, 42).unwrap();
        let out = p.project(&[1.0, -0.5, 0.25, 2.0]).unwrap();
        let golden = GOLDEN_42;
        for (a, b) in out.iter().zip(golden.iter()) {
            assert!((a - b).abs() < 1e-12, "{out:?}");
        }
    }

    const GOLDEN_42: [f64; 6] = [
        -0.22542730477750336,
        0.8552378766715605,
        1.1191386735020266,
        -1.0314194488373134,
        0.39243346512580585,
        -0.25969594969149506,
    ];

    #[test]
    fn zero_maps_to_zero() {
        let p = FastfoodProjector::new(5, 37, 1).unwrap();
        assert_eq!(p.project(&[0.0; 5]).unwrap(), vec![0.0; 37]);
    }

    #[test]
    fn wrong_input_length_rejected() {
        let p = FastfoodProjector::new(5, 37, 1).unwrap();
        assert!(p.project(&[0.0; 4]).is_err());
    }

    #[test]
    fn record_round_trip_regenerates_blocks() {
        let p = FastfoodProjector::new(12, 70, 77).unwrap();
        let text = p.to_json().unwrap();
        assert!(text.contains("\"D\""));
        assert_eq!(FastfoodProjector::from_json(&text).unwrap(), p);
        let bad = text.replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(
            FastfoodProjector::from_json(&bad),
            Err(Error::SchemaVersion { .. })
        ));
    }

    proptest! {
        #[test]
        fn fwht_twice_scales_by_n(k in 0u32..8, seed in any::<u64>()) {
            let n = 1usize << k;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let y = fwht(&fwht(&x).unwrap()).unwrap();
            for (a, b) in y.iter().zip(&x) {
                prop_assert!((a - n as f64 * b).abs() < 1e-9);
            }
        }

        #[test]
        fn projection_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let p = FastfoodProjector::new(7, 50, 5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let pu = p.project(&u).unwrap();
            let pv = p.project(&v).unwrap();
            let pm = p.project(&mix).unwrap();
            for i in 0..50 {
                prop_assert!((pm[i] - (a * pu[i] + b * pv[i])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn output_statistics_match_a_dense_gaussian() {
        let d = 256;
        let p = FastfoodProjector::new(d, d, 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let dense: Vec<Vec<f64>> = (0..d)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z / (d as f64).sqrt()
                    })
                    .collect()
            })
            .collect();
        let draws = 10_000;
        let (mut sum, mut sq) = (vec![0.0; d], vec![0.0; d]);
        let (mut ref_sum, mut ref_sq) = (vec![0.0; d], vec![0.0; d]);
        for _ in 0..draws {
            let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let y = p.project(&x).unwrap();
            let r = matvec(&dense, &x);
            for i in 0..d {
                sum[i] += y[i];
                sq[i] += y[i] * y[i];
                ref_sum[i] += r[i];
                ref_sq[i] += r[i] * r[i];
            }
        }
        let n = draws as f64;
        let variances = |s: &[f64], q: &[f64]| -> Vec<f64> {
            let mut v: Vec<f64> = s
                .iter()
                .zip(q)
                .map(|(a, b)| b / n - (a / n).powi(2))
                .collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let overall_mean = sum.iter().sum::<f64>() / (n * d as f64);
        assert!(overall_mean.abs() <= 0.05, "mean {overall_mean}");
        assert!(sum.iter().all(|s| (s / n).abs() <= 0.05));

        let (v, r) = (variances(&sum, &sq), variances(&ref_sum, &ref_sq));
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let q = |v: &[f64], f: f64| v[((v.len() - 1) as f64 * f) as usize];
        assert!(
            (avg(&v) / avg(&r) - 1.0).abs() <= 0.15,
            "{} vs {}",
            avg(&v),
            avg(&r)
        );
        for f in [0.05, 0.5, 0.95] {
            assert!(
                (q(&v, f) / q(&r, f) - 1.0).abs() <= 0.15,
                "quantile {f}: {} vs {}",
                q(&v, f),
                q(&r, f)
            );
        }
    }
}
