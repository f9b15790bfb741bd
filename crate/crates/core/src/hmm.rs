//! Gaussian hidden Markov models with diagonal covariance: log-space forward
//! evaluation and multi-sequence Baum-Welch training.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HmmTopology {
    /// All transitions allowed.
    Ergodic,
    /// States advance monotonically (self-loop or next state only).
    LeftToRight,
}

/// A single Gaussian HMM. `transition` is row-stochastic K x K (row-major);
/// emissions are per-state diagonal Gaussians over d-dimensional frames.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianHmm {
    pub initial: Vec<f64>,
    pub transition: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy)]
pub struct HmmTrainConfig {
    pub states: usize,
    pub topology: HmmTopology,
    pub max_iterations: usize,
    /// Stop when the total log-likelihood improves by less than this.
    pub tolerance: f64,
    pub variance_floor: f64,
    pub seed: u64,
}

impl Default for HmmTrainConfig {
    fn default() -> Self {
        HmmTrainConfig {
            states: 3,
            topology: HmmTopology::LeftToRight,
            max_iterations: 100,
            tolerance: 1e-6,
            variance_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HmmFitReport {
    /// Total training log-likelihood at the start of each EM iteration.
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

impl GaussianHmm {
    pub fn num_states(&self) -> usize {
        self.initial.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    fn log_emission(&self, state: usize, frame: &[f64]) -> f64 {
        let mean = &self.means[state];
        let var = &self.variances[state];
        let mut ll = 0.0;
        for ((x, m), v) in frame.iter().zip(mean).zip(var) {
            let diff = x - m;
            ll -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + diff * diff / v);
        }
        ll
    }

    /// Forward-algorithm log-likelihood of a frame sequence.
    pub fn log_likelihood(&self, frames: &[Vec<f64>]) -> Result<f64> {
        if frames.is_empty() {
            return Err(Error::EmptySequence);
        }
        let k = self.num_states();
        for (t, f) in frames.iter().enumerate() {
            if f.len() != self.dim() {
                return Err(Error::dimension(format!(
                    "frame {} has {} dims, model expects {}",
                    t,
                    f.len(),
                    self.dim()
                )));
            }
        }
        let log_pi: Vec<f64> = self.initial.iter().map(|p| p.ln()).collect();
        let log_a: Vec<f64> = self.transition.iter().map(|p| p.ln()).collect();
        let mut alpha: Vec<f64> = (0..k)
            .map(|j| log_pi[j] + self.log_emission(j, &frames[0]))
            .collect();
        let mut scratch = vec![0.0; k];
        for frame in &frames[1..] {
            let mut next = vec![0.0; k];
            for (j, slot) in next.iter_mut().enumerate() {
                for i in 0..k {
                    scratch[i] = alpha[i] + log_a[i * k + j];
                }
                *slot = log_sum_exp(&scratch) + self.log_emission(j, frame);
            }
            alpha = next;
        }
        let ll = log_sum_exp(&alpha);
        if ll.is_nan() {
            return Err(Error::numerical("HMM forward produced NaN".to_string()));
        }
        Ok(ll)
    }

    /// Samples a frame sequence from the model.
    pub fn sample(&self, len: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let k = self.num_states();
        let pick = |weights: &[f64], rng: &mut ChaCha8Rng| -> usize {
            let r: f64 = rng.random_range(0.0..1.0);
            let mut acc = 0.0;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if r < acc {
                    return i;
                }
            }
            weights.len() - 1
        };
        let mut state = pick(&self.initial, rng);
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let frame: Vec<f64> = self.means[state]
                .iter()
                .zip(&self.variances[state])
                .map(|(m, v)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + z * v.sqrt()
                })
                .collect();
            out.push(frame);
            state = pick(&self.transition[state * k..(state + 1) * k], rng);
        }
        out
    }
}

/// Multi-sequence Baum-Welch with diagonal-Gaussian emissions.
pub fn fit_gaussian_hmm(
    sequences: &[Vec<Vec<f64>>],
    cfg: &HmmTrainConfig,
) -> Result<(GaussianHmm, HmmFitReport)> {
    if sequences.is_empty() {
        return Err(Error::config("HMM training needs at least one sequence"));
    }
    let k = cfg.states;
    if k == 0 {
        return Err(Error::config("HMM needs at least one state"));
    }
    let dim = sequences[0]
        .first()
        .ok_or(Error::EmptySequence)?
        .len();
    for (i, seq) in sequences.iter().enumerate() {
        if seq.len() < k {
            return Err(Error::config(format!(
                "sequence {} has {} frames, fewer than {} states",
                i,
                seq.len(),
                k
            )));
        }
        for f in seq {
            if f.len() != dim {
                return Err(Error::dimension(format!(
                    "sequence {i} has inconsistent frame dimension"
                )));
            }
        }
    }

    let mut model = initialize(sequences, dim, cfg);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut prev_ll = f64::NEG_INFINITY;

    for iter in 0..cfg.max_iterations {
        let (ll, stats) = e_step(&model, sequences)?;
        history.push(ll);
        if iter > 0 && (ll - prev_ll).abs() < cfg.tolerance {
            converged = true;
            break;
        }
        prev_ll = ll;
        m_step(&mut model, &stats, sequences.len(), cfg);
        iterations += 1;
    }

    Ok((
        model,
        HmmFitReport {
            log_likelihoods: history,
            iterations,
            converged,
        },
    ))
}

struct SufficientStats {
    /// Expected initial-state occupancy, summed over sequences.
    pi: Vec<f64>,
    /// Expected transition counts (K x K).
    xi: Vec<f64>,
    /// Expected state occupancy over all frames.
    gamma: Vec<f64>,
    /// Occupancy-weighted frame sums and square sums (K x d).
    obs_sum: Vec<Vec<f64>>,
    obs_sq_sum: Vec<Vec<f64>>,
}

fn e_step(model: &GaussianHmm, sequences: &[Vec<Vec<f64>>]) -> Result<(f64, SufficientStats)> {
    let k = model.num_states();
    let dim = model.dim();
    let log_pi: Vec<f64> = model.initial.iter().map(|p| p.ln()).collect();
    let log_a: Vec<f64> = model.transition.iter().map(|p| p.ln()).collect();

    let mut stats = SufficientStats {
        pi: vec![0.0; k],
        xi: vec![0.0; k * k],
        gamma: vec![0.0; k],
        obs_sum: vec![vec![0.0; dim]; k],
        obs_sq_sum: vec![vec![0.0; dim]; k],
    };
    let mut total_ll = 0.0;

    for seq in sequences {
        let t_len = seq.len();
        // Emission log-densities, computed once.
        let mut log_b = vec![0.0; t_len * k];
        for (t, frame) in seq.iter().enumerate() {
            for j in 0..k {
                log_b[t * k + j] = model.log_emission(j, frame);
            }
        }

        let mut alpha = vec![f64::NEG_INFINITY; t_len * k];
        for j in 0..k {
            alpha[j] = log_pi[j] + log_b[j];
        }
        let mut scratch = vec![0.0; k];
        for t in 1..t_len {
            for j in 0..k {
                for i in 0..k {
                    scratch[i] = alpha[(t - 1) * k + i] + log_a[i * k + j];
                }
                alpha[t * k + j] = log_sum_exp(&scratch) + log_b[t * k + j];
            }
        }
        let ll = log_sum_exp(&alpha[(t_len - 1) * k..t_len * k]);
        if !ll.is_finite() {
            return Err(Error::numerical(
                "HMM forward log-likelihood is not finite".to_string(),
            ));
        }
        total_ll += ll;

        let mut beta = vec![f64::NEG_INFINITY; t_len * k];
        for j in 0..k {
            beta[(t_len - 1) * k + j] = 0.0;
        }
        for t in (0..t_len - 1).rev() {
            for i in 0..k {
                for j in 0..k {
                    scratch[j] = log_a[i * k + j] + log_b[(t + 1) * k + j] + beta[(t + 1) * k + j];
                }
                beta[t * k + i] = log_sum_exp(&scratch);
            }
        }

        for t in 0..t_len {
            for j in 0..k {
                let g = (alpha[t * k + j] + beta[t * k + j] - ll).exp();
                if t == 0 {
                    stats.pi[j] += g;
                }
                stats.gamma[j] += g;
                for (d, x) in seq[t].iter().enumerate() {
                    stats.obs_sum[j][d] += g * x;
                    stats.obs_sq_sum[j][d] += g * x * x;
                }
            }
        }
        for t in 0..t_len - 1 {
            for i in 0..k {
                for j in 0..k {
                    let x = alpha[t * k + i]
                        + log_a[i * k + j]
                        + log_b[(t + 1) * k + j]
                        + beta[(t + 1) * k + j]
                        - ll;
                    stats.xi[i * k + j] += x.exp();
                }
            }
        }
    }

    Ok((total_ll, stats))
}

fn m_step(model: &mut GaussianHmm, stats: &SufficientStats, num_sequences: usize, cfg: &HmmTrainConfig) {
    let k = model.num_states();
    for j in 0..k {
        model.initial[j] = stats.pi[j] / num_sequences as f64;
    }
    for i in 0..k {
        let row_sum: f64 = stats.xi[i * k..(i + 1) * k].iter().sum();
        if row_sum > 0.0 {
            for j in 0..k {
                model.transition[i * k + j] = stats.xi[i * k + j] / row_sum;
            }
        }
        // A state with no expected outgoing transitions keeps its row.
    }
    for j in 0..k {
        let w = stats.gamma[j];
        if w <= 0.0 {
            continue; // unoccupied state keeps its emission parameters
        }
        for d in 0..model.means[j].len() {
            let mean = stats.obs_sum[j][d] / w;
            let var = (stats.obs_sq_sum[j][d] / w - mean * mean).max(cfg.variance_floor);
            model.means[j][d] = mean;
            model.variances[j][d] = var;
        }
    }
}

/// Deterministic seeded initialization. Left-to-right models start states on
/// contiguous temporal segments; ergodic models on quantile groups of the
/// pooled frames.
fn initialize(sequences: &[Vec<Vec<f64>>], dim: usize, cfg: &HmmTrainConfig) -> GaussianHmm {
    let k = cfg.states;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Pooled per-dimension moments for variance init and jitter scale.
    let mut count = 0usize;
    let mut sum = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    for seq in sequences {
        for f in seq {
            count += 1;
            for (d, x) in f.iter().enumerate() {
                sum[d] += x;
                sq[d] += x * x;
            }
        }
    }
    let pooled_mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let pooled_var: Vec<f64> = sq
        .iter()
        .zip(&pooled_mean)
        .map(|(s, m)| (s / count as f64 - m * m).max(cfg.variance_floor))
        .collect();

    let mut means = vec![vec![0.0; dim]; k];
    let mut weights = vec![0.0; k];
    match cfg.topology {
        HmmTopology::LeftToRight => {
            // State j covers the j-th temporal segment of every sequence.
            for seq in sequences {
                let t_len = seq.len();
                for (t, frame) in seq.iter().enumerate() {
                    let j = (t * k / t_len).min(k - 1);
                    weights[j] += 1.0;
                    for (d, x) in frame.iter().enumerate() {
                        means[j][d] += x;
                    }
                }
            }
        }
        HmmTopology::Ergodic => {
            // Quantile groups of the pooled frames sorted by first coordinate.
            let mut pooled: Vec<&Vec<f64>> = sequences.iter().flatten().collect();
            pooled.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap_or(std::cmp::Ordering::Equal));
            for (rank, frame) in pooled.iter().enumerate() {
                let j = (rank * k / pooled.len()).min(k - 1);
                weights[j] += 1.0;
                for (d, x) in frame.iter().enumerate() {
                    means[j][d] += x;
                }
            }
        }
    }
    for (j, w) in weights.iter().enumerate() {
        for d in 0..dim {
            if *w > 0.0 {
                means[j][d] /= w;
            } else {
                means[j][d] = pooled_mean[d];
            }
            // Seeded jitter breaks ties between identical segments.
            let z: f64 = StandardNormal.sample(&mut rng);
            means[j][d] += 1e-3 * pooled_var[d].sqrt() * z;
        }
    }

    let (initial, transition) = match cfg.topology {
        HmmTopology::LeftToRight => {
            let mut pi = vec![0.0; k];
            pi[0] = 1.0;
            let mut a = vec![0.0; k * k];
            for i in 0..k {
                if i + 1 < k {
                    a[i * k + i] = 0.9;
                    a[i * k + i + 1] = 0.1;
                } else {
                    a[i * k + i] = 1.0;
                }
            }
            (pi, a)
        }
        HmmTopology::Ergodic => {
            let pi = vec![1.0 / k as f64; k];
            let mut a = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..k {
                    a[i * k + j] = if i == j {
                        if k == 1 {
                            1.0
                        } else {
                            0.8
                        }
                    } else {
                        0.2 / (k - 1) as f64
                    };
                }
            }
            (pi, a)
        }
    };

    GaussianHmm {
        initial,
        transition,
        means,
        variances: vec![pooled_var; k],
    }
}
