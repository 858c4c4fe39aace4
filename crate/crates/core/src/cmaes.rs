//! Full-covariance CMA-ES.
//!
//! Canonical variant: weighted recombination of the best `floor(K/2)`
//! candidates, cumulative step-size adaptation, and a rank-one plus rank-mu
//! covariance update. The covariance is eigendecomposed after every update;
//! if it stops being positive definite it is repaired by adding a growing
//! multiple of the identity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

/// A candidate vector together with its (to be minimized) fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidate {
    pub vector: Vec<f64>,
    pub fitness: f64,
}

impl RankedCandidate {
    pub fn new(vector: Vec<f64>, fitness: f64) -> Self {
        RankedCandidate { vector, fitness }
    }
}

fn rank_key(fitness: f64) -> f64 {
    if fitness.is_finite() {
        fitness
    } else {
        f64::INFINITY
    }
}

/// Indices of `fitness` from best to worst. Non-finite values rank last,
/// ties keep their original order.
pub fn rank_order(fitness: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| rank_key(fitness[a]).total_cmp(&rank_key(fitness[b])));
    order
}

/// Index of the lowest-fitness candidate; ties go to the lowest index and
/// non-finite fitness never wins over a finite one.
pub fn best_candidate(ranked: &[RankedCandidate]) -> Result<usize> {
    if ranked.is_empty() {
        return Err(Error::invalid("best_candidate on an empty population"));
    }
    let fitness: Vec<f64> = ranked.iter().map(|c| c.fitness).collect();
    Ok(rank_order(&fitness)[0])
}

/// Strategy constants derived from `(dim, population_size)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyParams {
    pub parents: usize,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub expected_norm: f64,
}

impl StrategyParams {
    pub fn new(dim: usize, population_size: usize) -> Self {
        let n = dim as f64;
        let parents = population_size / 2;
        let raw: Vec<f64> = (1..=parents)
            .map(|i| (population_size as f64 / 2.0 + 0.5).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff))
            .max(0.0);
        let expected_norm = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

        StrategyParams {
            parents,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            expected_norm,
        }
    }
}

/// Search distribution `N(mean, step_size^2 * covariance)` plus evolution paths.
#[derive(Debug, Clone)]
pub struct CmaesState {
    mean: DVector<f64>,
    step_size: f64,
    covariance: DMatrix<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    iteration: u64,
    population_size: usize,
    params: StrategyParams,
    // covariance = basis * diag(axis^2) * basis^T
    basis: DMatrix<f64>,
    axis: DVector<f64>,
    repairs: u64,
}

impl CmaesState {
    pub fn new(mean: Vec<f64>, step_size: f64, population_size: usize) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 {
            return Err(Error::invalid("CMA-ES dimension must be positive"));
        }
        if population_size < 2 {
            return Err(Error::invalid(format!(
                "population size must be at least 2, got {population_size}"
            )));
        }
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::invalid(format!(
                "step size must be positive and finite, got {step_size}"
            )));
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("initial mean"));
        }
        Ok(CmaesState {
            mean: DVector::from_vec(mean),
            step_size,
            covariance: DMatrix::identity(dim, dim),
            path_sigma: DVector::zeros(dim),
            path_c: DVector::zeros(dim),
            iteration: 0,
            population_size,
            params: StrategyParams::new(dim, population_size),
            basis: DMatrix::identity(dim, dim),
            axis: DVector::from_element(dim, 1.0),
            repairs: 0,
        })
    }

    /// Default population size `4 + floor(3 ln d)`.
    pub fn default_population_size(dim: usize) -> usize {
        4 + (3.0 * (dim.max(1) as f64).ln()).floor() as usize
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn path_sigma(&self) -> &[f64] {
        self.path_sigma.as_slice()
    }

    pub fn path_c(&self) -> &[f64] {
        self.path_c.as_slice()
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn population_size(&self) -> usize {
        self.population_size
    }

    pub fn params(&self) -> &StrategyParams {
        &self.params
    }

    /// Number of times the covariance needed a jitter repair.
    pub fn repairs(&self) -> u64 {
        self.repairs
    }

    /// Draws `population_size` candidates `mean + step_size * A z` with
    /// `A A^T = covariance`.
    pub fn sample_population<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let dim = self.dim();
        (0..self.population_size)
            .map(|_| {
                let z =
                    DVector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(&mut *rng)));
                let y = &self.basis * z.component_mul(&self.axis);
                (&self.mean + y * self.step_size).as_slice().to_vec()
            })
            .collect()
    }

    /// One generation of the distribution update from evaluated candidates.
    ///
    /// Returns `||m_new - m_old|| / ||m_old||`, or `+inf` when the old mean
    /// is the origin. On error the state is left untouched.
    pub fn update(&mut self, candidates: &[RankedCandidate]) -> Result<f64> {
        let dim = self.dim();
        if candidates.len() != self.population_size {
            return Err(Error::DimensionMismatch {
                what: "population",
                expected: self.population_size,
                got: candidates.len(),
            });
        }
        if let Some(bad) = candidates.iter().find(|c| c.vector.len() != dim) {
            return Err(Error::DimensionMismatch {
                what: "candidate vector",
                expected: dim,
                got: bad.vector.len(),
            });
        }
        if candidates.iter().all(|c| !c.fitness.is_finite()) {
            return Err(Error::AllNonFinite);
        }
        if candidates
            .iter()
            .any(|c| c.vector.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::NonFinite("candidate vector"));
        }

        let p = &self.params;
        let n = dim as f64;
        let fitness: Vec<f64> = candidates.iter().map(|c| c.fitness).collect();
        let order = rank_order(&fitness);

        let old_mean = self.mean.clone();
        let steps: Vec<DVector<f64>> = order[..p.parents]
            .iter()
            .map(|&i| {
                (DVector::from_column_slice(&candidates[i].vector) - &old_mean) / self.step_size
            })
            .collect();
        let mut mean_step = DVector::zeros(dim);
        for (w, y) in p.weights.iter().zip(&steps) {
            mean_step.axpy(*w, y, 1.0);
        }
        let new_mean = &old_mean + &mean_step * self.step_size;

        // C^{-1/2} y_w through the cached eigendecomposition.
        let inv_sqrt_step =
            &self.basis * (self.basis.transpose() * &mean_step).component_div(&self.axis);
        let path_sigma = &self.path_sigma * (1.0 - p.c_sigma)
            + inv_sqrt_step * (p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt();

        let generation = (self.iteration + 1) as f64;
        let ps_norm = path_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - p.c_sigma).powf(2.0 * generation)).sqrt()
            < (1.4 + 2.0 / (n + 1.0)) * p.expected_norm;
        let h_sigma = if h_sigma { 1.0 } else { 0.0 };

        let path_c = &self.path_c * (1.0 - p.c_c)
            + &mean_step * (h_sigma * (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt());

        let decay = 1.0 - p.c_1 - p.c_mu + (1.0 - h_sigma) * p.c_1 * p.c_c * (2.0 - p.c_c);
        let mut covariance = &self.covariance * decay;
        covariance.ger(p.c_1, &path_c, &path_c, 1.0);
        for (w, y) in p.weights.iter().zip(&steps) {
            covariance.ger(p.c_mu * w, y, y, 1.0);
        }

        let step_size =
            self.step_size * ((p.c_sigma / p.d_sigma) * (ps_norm / p.expected_norm - 1.0)).exp();
        if !step_size.is_finite() || step_size <= 0.0 {
            return Err(Error::NonFinite("step size"));
        }

        let (covariance, basis, axis, repaired) = factorize(covariance)?;

        let old_norm = old_mean.norm();
        let rel_change = if old_norm == 0.0 {
            f64::INFINITY
        } else {
            (&new_mean - &old_mean).norm() / old_norm
        };

        self.mean = new_mean;
        self.step_size = step_size;
        self.covariance = covariance;
        self.path_sigma = path_sigma;
        self.path_c = path_c;
        self.basis = basis;
        self.axis = axis;
        self.iteration += 1;
        self.repairs += u64::from(repaired);
        Ok(rel_change)
    }

    pub fn snapshot(&self) -> CmaesSnapshot {
        let dim = self.dim();
        let mut lower = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                lower.push(self.covariance[(i, j)]);
            }
        }
        CmaesSnapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            population_size: self.population_size,
            mean: self.mean.as_slice().to_vec(),
            step_size: self.step_size,
            covariance_lower: lower,
            path_sigma: self.path_sigma.as_slice().to_vec(),
            path_c: self.path_c.as_slice().to_vec(),
            iteration: self.iteration,
        }
    }

    pub fn restore(snapshot: &CmaesSnapshot) -> Result<Self> {
        if snapshot.schema_version != SNAPSHOT_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "cmaes snapshot",
                expected: SNAPSHOT_SCHEMA_VERSION,
                found: snapshot.schema_version,
            });
        }
        let mut state = CmaesState::new(
            snapshot.mean.clone(),
            snapshot.step_size,
            snapshot.population_size,
        )?;
        let dim = state.dim();
        for (what, len, expected) in [
            (
                "covariance lower triangle",
                snapshot.covariance_lower.len(),
                dim * (dim + 1) / 2,
            ),
            ("path_sigma", snapshot.path_sigma.len(), dim),
            ("path_c", snapshot.path_c.len(), dim),
        ] {
            if len != expected {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    got: len,
                });
            }
        }
        let mut cov = DMatrix::zeros(dim, dim);
        let mut k = 0;
        for i in 0..dim {
            for j in 0..=i {
                cov[(i, j)] = snapshot.covariance_lower[k];
                cov[(j, i)] = snapshot.covariance_lower[k];
                k += 1;
            }
        }
        let (covariance, basis, axis, _) = factorize(cov)?;
        state.covariance = covariance;
        state.basis = basis;
        state.axis = axis;
        state.path_sigma = DVector::from_column_slice(&snapshot.path_sigma);
        state.path_c = DVector::from_column_slice(&snapshot.path_c);
        state.iteration = snapshot.iteration;
        Ok(state)
    }
}

type Factorization = (DMatrix<f64>, DMatrix<f64>, DVector<f64>, bool);

/// Symmetrizes `cov`, eigendecomposes it and adds `lambda * I` (starting at
/// `1e-10 * trace / d`, doubling) until every eigenvalue is positive.
fn factorize(cov: DMatrix<f64>) -> Result<Factorization> {
    if cov.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("covariance"));
    }
    let dim = cov.nrows();
    let mut cov = (&cov + cov.transpose()) * 0.5;
    let trace = cov.trace();
    let mut jitter = if trace > 0.0 {
        1e-10 * trace / dim as f64
    } else {
        1e-10
    };
    let mut repaired = false;
    for _ in 0..200 {
        let eig = SymmetricEigen::new(cov.clone());
        if eig.eigenvalues.iter().all(|&l| l > 0.0 && l.is_finite()) {
            let axis = eig.eigenvalues.map(f64::sqrt);
            return Ok((cov, eig.eigenvectors, axis, repaired));
        }
        for i in 0..dim {
            cov[(i, i)] += jitter;
        }
        jitter *= 2.0;
        repaired = true;
    }
    Err(Error::NonFinite("covariance repair"))
}

/// Serializable checkpoint of a [`CmaesState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaesSnapshot {
    pub schema_version: u32,
    pub population_size: usize,
    pub mean: Vec<f64>,
    pub step_size: f64,
    /// Row-major lower triangle including the diagonal.
    pub covariance_lower: Vec<f64>,
    pub path_sigma: Vec<f64>,
    pub path_c: Vec<f64>,
    pub iteration: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn evaluate(pop: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> f64) -> Vec<RankedCandidate> {
        pop.into_iter()
            .map(|v| {
                let fit = f(&v);
                RankedCandidate::new(v, fit)
            })
            .collect()
    }

    #[test]
    fn init_is_identity_at_given_mean() {
        let s = CmaesState::new(vec![0.0; 3], 0.1, 6).unwrap();
        assert_eq!(s.mean(), &[0.0, 0.0, 0.0]);
        assert_eq!(s.covariance(), &DMatrix::<f64>::identity(3, 3));
        assert_eq!(s.iteration(), 0);
        assert!(s.path_sigma().iter().all(|&x| x == 0.0));

        let warm = vec![0.3, -1.25, 7.0];
        let s = CmaesState::new(warm.clone(), 0.1, 6).unwrap();
        assert_eq!(s.mean(), warm.as_slice());
    }

    #[test]
    fn init_rejects_bad_arguments() {
        assert!(CmaesState::new(vec![0.0; 3], 0.1, 1).is_err());
        assert!(CmaesState::new(vec![0.0; 3], 0.0, 6).is_err());
        assert!(CmaesState::new(vec![], 0.1, 6).is_err());
    }

    #[test]
    fn weights_are_positive_decreasing_and_normalized() {
        let p = StrategyParams::new(2304, 28);
        assert_eq!(p.parents, 14);
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.weights.windows(2).all(|w| w[0] >= w[1] && w[1] > 0.0));
    }

    #[test]
    fn tiny_step_size_collapses_samples_to_mean() {
        let s = CmaesState::new(vec![1.0, -2.0, 0.5], 1e-14, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for v in s.sample_population(&mut rng) {
            for (a, b) in v.iter().zip(s.mean()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = CmaesState::new(vec![0.0; 4], 0.5, 6).unwrap();
        let a = s.sample_population(&mut ChaCha8Rng::seed_from_u64(5));
        let b = s.sample_population(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn unit_sampling_has_unit_variance() {
        let s = CmaesState::new(vec![0.0; 5], 1.0, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0.0;
        for _ in 0..2_000 {
            for v in s.sample_population(&mut rng) {
                for x in v {
                    sum += x;
                    sum_sq += x * x;
                    count += 1.0;
                }
            }
        }
        let mean = sum / count;
        let var = sum_sq / count - mean * mean;
        assert!(count >= 1e5);
        assert!((var - 1.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn new_mean_is_weighted_sum_of_best() {
        let mut s = CmaesState::new(vec![0.5, -0.5], 0.3, 6).unwrap();
        let pop = s.sample_population(&mut ChaCha8Rng::seed_from_u64(3));
        let ranked = evaluate(pop, |v| v.iter().map(|x| x * x).sum());
        // Independent oracle: sort by fitness, weighted sum of the top three.
        let mut sorted = ranked.clone();
        sorted.sort_by(|a, b| a.fitness.partial_cmp(&b.fitness).unwrap());
        let raw: Vec<f64> = (1..=3).map(|i| 3.5f64.ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let mut expected = [0.0; 2];
        for (w, c) in raw.iter().zip(&sorted) {
            expected[0] += w / total * c.vector[0];
            expected[1] += w / total * c.vector[1];
        }
        s.update(&ranked).unwrap();
        assert!((s.mean()[0] - expected[0]).abs() < 1e-12);
        assert!((s.mean()[1] - expected[1]).abs() < 1e-12);
    }

    #[test]
    fn relative_change_from_origin_is_infinite() {
        let mut s = CmaesState::new(vec![0.0; 3], 0.3, 6).unwrap();
        let pop = s.sample_population(&mut ChaCha8Rng::seed_from_u64(4));
        let ranked = evaluate(pop, |v| v[0]);
        assert_eq!(s.update(&ranked).unwrap(), f64::INFINITY);
        let pop = s.sample_population(&mut ChaCha8Rng::seed_from_u64(5));
        let ranked = evaluate(pop, |v| v[0]);
        let rel = s.update(&ranked).unwrap();
        assert!(rel.is_finite() && rel >= 0.0);
    }

    #[test]
    fn non_finite_fitness_ranks_last() {
        let ranked = vec![
            RankedCandidate::new(vec![0.0], 3.0),
            RankedCandidate::new(vec![0.0], f64::NAN),
            RankedCandidate::new(vec![0.0], 1.0),
            RankedCandidate::new(vec![0.0], 2.0),
        ];
        assert_eq!(best_candidate(&ranked).unwrap(), 2);
        assert_eq!(
            rank_order(&[f64::NAN, 1.0, f64::INFINITY, 0.5]),
            vec![3, 1, 0, 2]
        );
    }

    #[test]
    fn best_candidate_examples() {
        let mk = |fs: &[f64]| -> Vec<RankedCandidate> {
            fs.iter()
                .map(|&f| RankedCandidate::new(vec![], f))
                .collect()
        };
        assert_eq!(best_candidate(&mk(&[3.0, 1.0, 2.0])).unwrap(), 1);
        assert_eq!(best_candidate(&mk(&[2.0, 2.0, 2.0])).unwrap(), 0);
        assert!(best_candidate(&[]).is_err());
    }

    #[test]
    fn all_non_finite_update_is_rejected_without_change() {
        let mut s = CmaesState::new(vec![1.0; 3], 0.3, 4).unwrap();
        let before = s.snapshot();
        let pop = s.sample_population(&mut ChaCha8Rng::seed_from_u64(4));
        let ranked = evaluate(pop, |_| f64::NAN);
        assert!(matches!(s.update(&ranked), Err(Error::AllNonFinite)));
        assert_eq!(s.snapshot(), before);
    }

    #[test]
    fn repair_restores_positive_definiteness() {
        let mut cov = DMatrix::from_element(3, 3, 1.0);
        cov[(0, 0)] = 1.0;
        let (fixed, _, axis, repaired) = factorize(cov).unwrap();
        assert!(repaired);
        assert!(axis.iter().all(|&a| a > 0.0));
        assert_eq!(fixed, fixed.transpose());
    }

    #[test]
    fn snapshot_round_trip() {
        let mut s = CmaesState::new(vec![0.2, 0.1, -0.3], 0.4, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let pop = s.sample_population(&mut rng);
            s.update(&evaluate(pop, |v| v.iter().map(|x| x * x).sum()))
                .unwrap();
        }
        let snap = s.snapshot();
        let json = serde_json::to_string(&snap).unwrap();
        let back: CmaesSnapshot = serde_json::from_str(&json).unwrap();
        let restored = CmaesState::restore(&back).unwrap();
        assert_eq!(restored.snapshot(), snap);
        let a = s.sample_population(&mut ChaCha8Rng::seed_from_u64(1));
        let b = restored.sample_population(&mut ChaCha8Rng::seed_from_u64(1));
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn rosenbrock(x: &[f64]) -> f64 {
            x.windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum()
        }

        proptest! {
            #[test]
            fn covariance_stays_symmetric_and_change_is_finite(
                seed in any::<u64>(),
                dim in 2usize..8,
                k in 4usize..14,
                start in prop::collection::vec(-2.0f64..2.0, 8),
                sigma in 0.01f64..1.0,
            ) {
                let mean = start[..dim].to_vec();
                prop_assume!(mean.iter().any(|x| x.abs() > 1e-3));
                let mut s = CmaesState::new(mean, sigma, k).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..10 {
                    let before_norm = s.mean().iter().map(|x| x * x).sum::<f64>().sqrt();
                    let ranked = evaluate(s.sample_population(&mut rng), rosenbrock);
                    let change = s.update(&ranked).unwrap();
                    if before_norm > 0.0 {
                        prop_assert!(change.is_finite() && change >= 0.0);
                    }
                    let c = s.covariance();
                    for i in 0..dim {
                        for j in 0..dim {
                            prop_assert!((c[(i, j)] - c[(j, i)]).abs() < 1e-12);
                        }
                    }
                    prop_assert!(c.clone().cholesky().is_some());
                }
            }

            #[test]
            fn update_depends_only_on_ranks(
                seed in any::<u64>(),
                shift in -5.0f64..5.0,
                gain in 0.1f64..10.0,
                cube in any::<bool>(),
            ) {
                let mut a = CmaesState::new(vec![0.3, -0.2, 0.5, 0.1], 0.3, 8).unwrap();
                let mut b = a.clone();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..3 {
                    let pop = a.sample_population(&mut rng);
                    let f: Vec<f64> = pop.iter().map(|x| rosenbrock(x)).collect();
                    let g: Vec<f64> = f
                        .iter()
                        .map(|y| if cube { (y + shift).powi(3) } else { gain * y + shift })
                        .collect();
                    prop_assume!(rank_order(&f) == rank_order(&g));
                    let ra = pop.iter().zip(&f).map(|(x, y)| RankedCandidate::new(x.clone(), *y)).collect::<Vec<_>>();
                    let rb = pop.iter().zip(&g).map(|(x, y)| RankedCandidate::new(x.clone(), *y)).collect::<Vec<_>>();
                    a.update(&ra).unwrap();
                    b.update(&rb).unwrap();
                }
                prop_assert_eq!(a.snapshot(), b.snapshot());
            }
        }
    }
}
