//! Capacity-bounded bank of archived CMA-ES means.
//!
//! Retrieval picks the archived vector with the lowest fitness on the current
//! batch (the zero vector is always a candidate unless disabled). When the
//! bank overflows, the vector with the highest mean cosine similarity to all
//! others is dropped, oldest first on ties.

use serde::{Deserialize, Serialize};

use crate::fitness::CandidateEvaluator;
use crate::model::Matrix;
use crate::{Error, Result};

pub const BANK_SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_CAPACITY: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorBank {
    dim: usize,
    capacity: usize,
    // Oldest first.
    vectors: Vec<Vec<f64>>,
}

/// Cosine similarity, defined as -1 when either vector is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return -1.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// Mean cosine similarity of each vector to all the others.
pub fn mean_similarities(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut sums = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let c = cosine_similarity(&vectors[i], &vectors[j]);
            sums[i] += c;
            sums[j] += c;
        }
    }
    sums.into_iter().map(|s| s / (n - 1) as f64).collect()
}

/// Outcome of a bank lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub vector: Vec<f64>,
    /// Bank index of the winner, `None` for the zero vector.
    pub index: Option<usize>,
    pub fitness: f64,
    pub forward_passes: usize,
    /// Every candidate evaluated to a non-finite fitness.
    pub all_non_finite: bool,
}

impl VectorBank {
    pub fn new(dim: usize, capacity: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("bank dimension must be positive"));
        }
        Ok(VectorBank {
            dim,
            capacity,
            vectors: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Stored vectors, oldest first.
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Appends `vector` and, if that overflows the capacity, evicts and
    /// returns the most redundant entry (which may be `vector` itself).
    pub fn archive(&mut self, vector: Vec<f64>) -> Result<Option<Vec<f64>>> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "archived vector",
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("archived vector"));
        }
        if self.capacity == 0 {
            return Ok(Some(vector));
        }
        self.vectors.push(vector);
        if self.vectors.len() <= self.capacity {
            return Ok(None);
        }
        let drop = self.eviction_index();
        Ok(Some(self.vectors.remove(drop)))
    }

    /// Index that [`Self::archive`] would evict from the current contents.
    pub fn eviction_index(&self) -> usize {
        let sims = mean_similarities(&self.vectors);
        let mut best = 0;
        for (i, &s) in sims.iter().enumerate() {
            if s > sims[best] {
                best = i;
            }
        }
        best
    }

    /// Picks the initial CMA-ES mean for a new domain by evaluating every
    /// archived vector (and the zero vector when `include_zero`) on `batch`.
    pub fn retrieve_init(
        &self,
        batch: &Matrix,
        evaluator: &CandidateEvaluator<'_>,
        include_zero: bool,
    ) -> Result<Retrieval> {
        let zero = vec![0.0; self.dim];
        let mut candidates: Vec<(Option<usize>, &[f64])> = Vec::with_capacity(self.len() + 1);
        if include_zero {
            candidates.push((None, &zero));
        }
        candidates.extend(
            self.vectors
                .iter()
                .enumerate()
                .map(|(i, v)| (Some(i), v.as_slice())),
        );
        if candidates.is_empty() {
            return Ok(Retrieval {
                vector: zero,
                index: None,
                fitness: f64::NAN,
                forward_passes: 0,
                all_non_finite: false,
            });
        }

        let mut best: Option<(Option<usize>, f64)> = None;
        for &(index, v) in &candidates {
            let f = evaluator.evaluate(v, batch)?.fitness;
            if f.is_finite() && best.is_none_or(|(_, bf)| f < bf) {
                best = Some((index, f));
            }
        }
        let forward_passes = candidates.len();
        Ok(match best {
            Some((index, fitness)) => Retrieval {
                vector: index.map_or(zero, |i| self.vectors[i].clone()),
                index,
                fitness,
                forward_passes,
                all_non_finite: false,
            },
            None => Retrieval {
                vector: zero,
                index: None,
                fitness: f64::NAN,
                forward_passes,
                all_non_finite: true,
            },
        })
    }

    pub fn record(&self) -> BankRecord {
        BankRecord {
            schema_version: BANK_SCHEMA_VERSION,
            d: self.dim,
            capacity: self.capacity,
            vectors: self.vectors.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.record())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: BankRecord = serde_json::from_str(text)?;
        record.into_bank()
    }
}

/// File form of a [`VectorBank`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankRecord {
    pub schema_version: u32,
    pub d: usize,
    pub capacity: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl BankRecord {
    pub fn into_bank(self) -> Result<VectorBank> {
        if self.schema_version != BANK_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "vector bank",
                expected: BANK_SCHEMA_VERSION,
                found: self.schema_version,
            });
        }
        if self.vectors.len() > self.capacity {
            return Err(Error::invalid(format!(
                "bank holds {} vectors but capacity is {}",
                self.vectors.len(),
                self.capacity
            )));
        }
        let mut bank = VectorBank::new(self.d, self.capacity)?;
        for v in self.vectors {
            if v.len() != self.d {
                return Err(Error::DimensionMismatch {
                    what: "bank vector",
                    expected: self.d,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("bank vector"));
            }
            bank.vectors.push(v);
        }
        Ok(bank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn archive_into_empty_bank() {
        let mut bank = VectorBank::new(3, 2).unwrap();
        assert_eq!(bank.archive(vec![1.0, 2.0, 3.0]).unwrap(), None);
        assert_eq!(bank.vectors(), &[vec![1.0, 2.0, 3.0]]);
    }

    #[test]
    fn near_duplicate_is_evicted() {
        let a = vec![1.0, 0.0, 0.0];
        let a2 = vec![0.999, 0.0447, 0.0];
        let b = vec![0.0, 0.0, 1.0];
        let c = vec![-0.3, 1.0, 0.2];
        let mut bank = VectorBank::new(3, 3).unwrap();
        for v in [a.clone(), b.clone(), a2.clone()] {
            bank.archive(v).unwrap();
        }
        let evicted = bank.archive(c).unwrap().unwrap();
        assert!(evicted == a || evicted == a2);
        assert_eq!(bank.len(), 3);
    }

    #[test]
    fn default_capacity_orthogonal_plus_duplicate() {
        let d = 32;
        let mut bank = VectorBank::new(d, DEFAULT_CAPACITY).unwrap();
        for i in 0..30 {
            bank.archive(unit(d, i)).unwrap();
        }
        // Duplicate of vector 0; both members of the pair share the highest
        // mean similarity, so the oldest (index 0) goes.
        let evicted = bank.archive(unit(d, 0)).unwrap().unwrap();
        assert_eq!(evicted, unit(d, 0));
        assert_eq!(bank.len(), 30);
        assert_eq!(bank.vectors()[29], unit(d, 0));
        assert_eq!(bank.vectors()[0], unit(d, 1));
    }

    #[test]
    fn zero_vector_is_never_preferred_for_eviction() {
        let mut bank = VectorBank::new(2, 2).unwrap();
        bank.archive(vec![0.0, 0.0]).unwrap();
        bank.archive(vec![1.0, 0.0]).unwrap();
        let evicted = bank.archive(vec![1.0, 0.1]).unwrap().unwrap();
        assert_ne!(evicted, vec![0.0, 0.0]);
        assert!(bank.vectors().contains(&vec![0.0, 0.0]));
    }

    #[test]
    fn zero_capacity_stores_nothing() {
        let mut bank = VectorBank::new(2, 0).unwrap();
        assert!(bank.archive(vec![1.0, 0.0]).unwrap().is_some());
        assert!(bank.is_empty());
    }

    #[test]
    fn archive_validates_input() {
        let mut bank = VectorBank::new(2, 2).unwrap();
        assert!(bank.archive(vec![1.0]).is_err());
        assert!(bank.archive(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn record_round_trip_and_validation() {
        let mut bank = VectorBank::new(2, 3).unwrap();
        bank.archive(vec![1.0, 0.5]).unwrap();
        bank.archive(vec![-2.0, 0.25]).unwrap();
        let json = bank.to_json().unwrap();
        assert_eq!(VectorBank::from_json(&json).unwrap(), bank);

        let mut rec = bank.record();
        rec.vectors[1].push(0.0);
        assert!(rec.into_bank().is_err());
        let mut rec = bank.record();
        rec.capacity = 1;
        assert!(rec.into_bank().is_err());
    }

    mod properties {
        use super::*;
        use crate::fitness::{CandidateEvaluator, FitnessConfig};
        use crate::model::{compute_source_stats, AdaptableModel, ArchConfig, Matrix};
        use crate::projection::FastfoodProjector;
        use proptest::prelude::*;

        fn oracle(vectors: &[Vec<f64>]) -> usize {
            let n = vectors.len();
            let mean = |i: usize| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| cosine_similarity(&vectors[i], &vectors[j]))
                    .sum::<f64>()
                    / (n - 1) as f64
            };
            (0..n).fold(0, |best, i| if mean(i) > mean(best) { i } else { best })
        }

        fn vectors(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 6), 1..max)
        }

        proptest! {
            #[test]
            fn capacity_and_eviction_oracle(vs in vectors(40), capacity in 1usize..12) {
                let mut bank = VectorBank::new(6, capacity).unwrap();
                for v in vs {
                    let mut all = bank.vectors().to_vec();
                    all.push(v.clone());
                    let evicted = bank.archive(v).unwrap();
                    prop_assert!(bank.len() <= capacity);
                    if all.len() > capacity {
                        let gone = all.remove(oracle(&all));
                        prop_assert_eq!(evicted, Some(gone));
                    } else {
                        prop_assert_eq!(evicted, None);
                    }
                    prop_assert_eq!(bank.vectors(), all.as_slice());
                }
            }

            #[test]
            fn retrieval_is_never_worse_than_zero(seed in 0u64..1000, scale in 0.01f64..5.0, n in 1usize..6) {
                let model = AdaptableModel::init(ArchConfig::mlp(4, 3), seed).unwrap();
                let data = |rows: usize, offset: f64| {
                    let v = (0..rows * 4).map(|i| (i as f64 * 0.37 + seed as f64).sin() + offset).collect();
                    Matrix::new(rows, 4, v).unwrap()
                };
                let source = compute_source_stats(&model, [&data(40, 0.0)]).unwrap();
                let projector = FastfoodProjector::new(6, model.offset_dim(), seed).unwrap();
                let ev = CandidateEvaluator::new(&model, &projector, &source, FitnessConfig::default()).unwrap();
                let mut bank = VectorBank::new(6, 10).unwrap();
                for i in 0..n {
                    bank.archive((0..6).map(|j| scale * ((i * 6 + j) as f64).cos()).collect()).unwrap();
                }
                let batch = data(16, 1.0);
                let got = bank.retrieve_init(&batch, &ev, true).unwrap();
                let zero = ev.evaluate(&[0.0; 6], &batch).unwrap().fitness;
                prop_assert!(got.fitness <= zero);
                prop_assert_eq!(got.forward_passes, n + 1);
            }
        }
    }
}
