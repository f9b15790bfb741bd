//! One-vs-rest linear soft-margin SVM trained by hinge-loss subgradient
//! descent (Pegasos-style schedule) on standardized features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::ExpressionLabel;
use crate::error::{Error, Result};

/// Per-dimension train-set standardization. Dimensions with zero spread map
/// to zero, which keeps prediction invariant to a common positive rescaling
/// of all features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &[Vec<f64>]) -> Self {
        let n = features.len() as f64;
        let dim = features[0].len();
        let mut mean = vec![0.0; dim];
        for x in features {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for x in features {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt()).collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SvmParams {
    /// Soft-margin penalty.
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            epochs: 40,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    /// Classes present in the training set, in canonical label order.
    pub classes: Vec<ExpressionLabel>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub standardizer: Standardizer,
}

impl SvmModel {
    /// One-vs-rest decision values in `classes` order.
    pub fn decision_values(&self, feature: &[f64]) -> Result<Vec<f64>> {
        if feature.len() != self.standardizer.mean.len() {
            return Err(Error::dimension(format!(
                "feature has {} dims, model expects {}",
                feature.len(),
                self.standardizer.mean.len()
            )));
        }
        let x = self.standardizer.apply(feature);
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, &x) + b)
            .collect())
    }

    /// Argmax decision value; ties resolve to the earlier class in canonical
    /// order.
    pub fn predict(&self, feature: &[f64]) -> Result<(ExpressionLabel, Vec<f64>)> {
        let scores = self.decision_values(feature)?;
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        Ok((self.classes[best], scores))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains one-vs-rest linear SVMs. Deterministic for a fixed seed.
pub fn train_svm(
    features: &[Vec<f64>],
    labels: &[ExpressionLabel],
    params: &SvmParams,
) -> Result<SvmModel> {
    if features.len() != labels.len() {
        return Err(Error::dimension(format!(
            "{} features but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.len() < 2 {
        return Err(Error::config("SVM training needs at least two samples"));
    }
    let mut classes: Vec<ExpressionLabel> = ExpressionLabel::ALL
        .iter()
        .filter(|c| labels.contains(c))
        .copied()
        .collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    classes.shrink_to_fit();

    let standardizer = Standardizer::fit(features);
    // The bias rides along as a constant unit feature.
    let xs: Vec<Vec<f64>> = features
        .iter()
        .map(|x| {
            let mut v = standardizer.apply(x);
            v.push(1.0);
            v
        })
        .collect();
    let n = xs.len();
    let dim = xs[0].len();
    let lambda = 1.0 / (params.c * n as f64);

    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    for (ci, class) in classes.iter().enumerate() {
        let y: Vec<f64> = labels
            .iter()
            .map(|l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(
            params.seed ^ 0x9e3779b97f4a7c15u64.wrapping_mul(ci as u64 + 1),
        );
        let mut w = vec![0.0; dim];
        let mut order: Vec<usize> = (0..n).collect();
        let mut t = 0usize;
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let decay = 1.0 - eta * lambda;
                if y[i] * dot(&w, &xs[i]) < 1.0 {
                    for (wj, xj) in w.iter_mut().zip(&xs[i]) {
                        *wj = *wj * decay + eta * y[i] * xj;
                    }
                } else {
                    for wj in &mut w {
                        *wj *= decay;
                    }
                }
            }
        }
        let b = w.pop().expect("bias slot");
        weights.push(w);
        biases.push(b);
    }

    Ok(SvmModel {
        classes,
        weights,
        biases,
        standardizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blob(rng: &mut ChaCha8Rng, center: (f64, f64), n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                vec![
                    center.0 + rng.random_range(-0.5..0.5),
                    center.1 + rng.random_range(-0.5..0.5),
                ]
            })
            .collect()
    }

    #[test]
    fn separable_blobs_reach_full_training_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut features = blob(&mut rng, (-3.0, 0.0), 50);
        features.extend(blob(&mut rng, (3.0, 0.5), 50));
        let labels: Vec<ExpressionLabel> = std::iter::repeat(ExpressionLabel::An)
            .take(50)
            .chain(std::iter::repeat(ExpressionLabel::Ha).take(50))
            .collect();
        let model = train_svm(&features, &labels, &SvmParams::default()).unwrap();
        let correct = features
            .iter()
            .zip(&labels)
            .filter(|(x, l)| model.predict(x).unwrap().0 == **l)
            .count();
        assert_eq!(correct, 100);
    }

    #[test]
    fn contradictory_duplicate_limits_accuracy() {
        // The same point under two labels cannot both be right.
        let features = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![-1.0, 0.0], vec![-1.2, 0.1]];
        let labels = vec![
            ExpressionLabel::An,
            ExpressionLabel::Ha,
            ExpressionLabel::Su,
            ExpressionLabel::Su,
        ];
        let model = train_svm(&features, &labels, &SvmParams::default()).unwrap();
        let on_pair = [0usize, 1]
            .iter()
            .filter(|&&i| model.predict(&features[i]).unwrap().0 == labels[i])
            .count();
        assert!(on_pair <= 1);
    }

    #[test]
    fn single_class_is_an_error() {
        let features = vec![vec![0.0], vec![1.0]];
        let labels = vec![ExpressionLabel::An, ExpressionLabel::An];
        assert!(matches!(
            train_svm(&features, &labels, &SvmParams::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn prediction_is_invariant_to_common_feature_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut features = blob(&mut rng, (-2.0, 1.0), 30);
        features.extend(blob(&mut rng, (2.0, -1.0), 30));
        let labels: Vec<ExpressionLabel> = std::iter::repeat(ExpressionLabel::Di)
            .take(30)
            .chain(std::iter::repeat(ExpressionLabel::Sa).take(30))
            .collect();
        let scaled: Vec<Vec<f64>> = features
            .iter()
            .map(|x| x.iter().map(|v| v * 250.0).collect())
            .collect();
        let m1 = train_svm(&features, &labels, &SvmParams::default()).unwrap();
        let m2 = train_svm(&scaled, &labels, &SvmParams::default()).unwrap();
        for (x, sx) in features.iter().zip(&scaled) {
            assert_eq!(m1.predict(x).unwrap().0, m2.predict(sx).unwrap().0);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut features = blob(&mut rng, (0.0, 0.0), 20);
        features.extend(blob(&mut rng, (1.0, 1.0), 20));
        let labels: Vec<ExpressionLabel> = std::iter::repeat(ExpressionLabel::Fe)
            .take(20)
            .chain(std::iter::repeat(ExpressionLabel::Su).take(20))
            .collect();
        let params = SvmParams {
            seed: 7,
            ..SvmParams::default()
        };
        let m1 = train_svm(&features, &labels, &params).unwrap();
        let m2 = train_svm(&features, &labels, &params).unwrap();
        assert_eq!(m1.weights, m2.weights);
        assert_eq!(m1.biases, m2.biases);
    }
}
