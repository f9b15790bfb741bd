//! Expression labels, sequence classifiers built on the SVM and HMM
//! trainers, and the stratified subject-grouped cross-validation harness.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsf::DsfSequence;
use crate::error::{Error, Result};
use crate::features::{frame_features, mean_deformation, PoolGrid};
use crate::hmm::{fit_gaussian_hmm, GaussianHmm, HmmFitReport, HmmTrainConfig};
use crate::svm::{train_svm, SvmModel, SvmParams};

/// The six universal expression classes. The declaration order is the
/// canonical tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExpressionLabel {
    An,
    Di,
    Fe,
    Ha,
    Sa,
    Su,
}

impl ExpressionLabel {
    pub const ALL: [ExpressionLabel; 6] = [
        ExpressionLabel::An,
        ExpressionLabel::Di,
        ExpressionLabel::Fe,
        ExpressionLabel::Ha,
        ExpressionLabel::Sa,
        ExpressionLabel::Su,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|l| *l == self).unwrap()
    }

    pub fn code(self) -> &'static str {
        match self {
            ExpressionLabel::An => "AN",
            ExpressionLabel::Di => "DI",
            ExpressionLabel::Fe => "FE",
            ExpressionLabel::Ha => "HA",
            ExpressionLabel::Sa => "SA",
            ExpressionLabel::Su => "SU",
        }
    }
}

impl fmt::Display for ExpressionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ExpressionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AN" => Ok(ExpressionLabel::An),
            "DI" => Ok(ExpressionLabel::Di),
            "FE" => Ok(ExpressionLabel::Fe),
            "HA" => Ok(ExpressionLabel::Ha),
            "SA" => Ok(ExpressionLabel::Sa),
            "SU" => Ok(ExpressionLabel::Su),
            other => Err(Error::format(format!(
                "unknown expression label `{other}` (expected AN, DI, FE, HA, SA, SU)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabeledSequence {
    pub sequence: DsfSequence,
    pub label: ExpressionLabel,
    pub subject: String,
}

/// Row-normalized 6x6 confusion matrix; rows are true classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 6]; 6],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        ConfusionMatrix {
            counts: [[0; 6]; 6],
        }
    }

    pub fn record(&mut self, truth: ExpressionLabel, predicted: ExpressionLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    /// Rows as percentages; a row with no samples stays zero.
    pub fn percentages(&self) -> [[f64; 6]; 6] {
        let mut out = [[0.0; 6]; 6];
        for (row, counts) in out.iter_mut().zip(&self.counts) {
            let total: usize = counts.iter().sum();
            if total > 0 {
                for (o, c) in row.iter_mut().zip(counts) {
                    *o = 100.0 * *c as f64 / total as f64;
                }
            }
        }
        out
    }

    pub fn accuracy(&self) -> f64 {
        let correct: usize = (0..6).map(|i| self.counts[i][i]).sum();
        let total: usize = self.counts.iter().flatten().sum();
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub confusion: ConfusionMatrix,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Sample standard deviation over folds.
    pub std_accuracy: f64,
}

/// Assigns subjects to `k` folds: subjects never span folds, and each fold
/// must end up with at least one sample of every class present. Assignment
/// greedily balances per-class counts over a seeded subject shuffle.
pub fn stratified_subject_folds(
    data: &[LabeledSequence],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Stratification {
            msg: format!("need at least 2 folds, got {k}"),
        });
    }
    let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, item) in data.iter().enumerate() {
        by_subject.entry(&item.subject).or_default().push(i);
    }
    if by_subject.len() < k {
        return Err(Error::Stratification {
            msg: format!("{} subjects cannot fill {} folds", by_subject.len(), k),
        });
    }
    let mut subjects: Vec<&str> = by_subject.keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    subjects.shuffle(&mut rng);

    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut fold_class_counts = vec![[0usize; 6]; k];
    for subject in subjects {
        let indices = &by_subject[subject];
        let mut subject_counts = [0usize; 6];
        for &i in indices {
            subject_counts[data[i].label.index()] += 1;
        }
        // Pick the fold that minimizes the resulting class imbalance,
        // breaking ties by fold size then fold index.
        let mut best = 0usize;
        let mut best_key = (f64::INFINITY, usize::MAX);
        for (f, counts) in fold_class_counts.iter().enumerate() {
            let imbalance: f64 = counts
                .iter()
                .zip(&subject_counts)
                .map(|(c, s)| ((c + s) as f64).powi(2))
                .sum();
            let key = (imbalance, folds[f].len());
            if key < best_key {
                best_key = key;
                best = f;
            }
        }
        for (c, s) in fold_class_counts[best].iter_mut().zip(&subject_counts) {
            *c += s;
        }
        folds[best].extend_from_slice(indices);
    }

    let classes_present: Vec<usize> = (0..6)
        .filter(|&c| data.iter().any(|d| d.label.index() == c))
        .collect();
    for (f, fold) in folds.iter().enumerate() {
        if fold.is_empty() {
            return Err(Error::Stratification {
                msg: format!("fold {f} received no samples"),
            });
        }
        for &c in &classes_present {
            if !fold.iter().any(|&i| data[i].label.index() == c) {
                return Err(Error::Stratification {
                    msg: format!(
                        "fold {f} has no sample of class {}",
                        ExpressionLabel::ALL[c]
                    ),
                });
            }
        }
    }
    Ok(folds)
}

/// Runs k-fold cross-validation with a classifier factory. `fit` receives
/// the training split and a fold-specific seed and returns a predictor.
pub fn cross_validate<F, P>(
    data: &[LabeledSequence],
    k: usize,
    seed: u64,
    fit: F,
) -> Result<CvReport>
where
    F: Fn(&[&LabeledSequence], u64) -> Result<P>,
    P: Fn(&DsfSequence) -> Result<ExpressionLabel>,
{
    let folds = stratified_subject_folds(data, k, seed)?;
    let mut confusion = ConfusionMatrix::new();
    let mut fold_accuracies = Vec::with_capacity(k);
    for (f, test_idx) in folds.iter().enumerate() {
        let train: Vec<&LabeledSequence> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, idxs)| idxs.iter().map(|&i| &data[i]))
            .collect();
        let fold_seed = seed
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add(f as u64 + 1);
        let predict = fit(&train, fold_seed)?;
        let mut correct = 0usize;
        for &i in test_idx {
            let predicted = predict(&data[i].sequence)?;
            confusion.record(data[i].label, predicted);
            if predicted == data[i].label {
                correct += 1;
            }
        }
        fold_accuracies.push(correct as f64 / test_idx.len() as f64);
    }
    let mean = fold_accuracies.iter().sum::<f64>() / k as f64;
    let var = fold_accuracies
        .iter()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / (k - 1) as f64;
    Ok(CvReport {
        confusion,
        fold_accuracies,
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
    })
}

/// A trained sequence classifier, serializable for the `classify` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TrainedModel {
    Svm(SvmSequenceModel),
    Hmm(HmmSequenceModel),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmSequenceModel {
    pub svm: SvmModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HmmSequenceModel {
    pub pool: PoolGrid,
    pub classes: Vec<(ExpressionLabel, GaussianHmm)>,
}

impl TrainedModel {
    /// Predicted label plus per-class scores (decision values for the SVM,
    /// log-likelihoods for the HMM). Ties resolve in canonical class order.
    pub fn predict(&self, seq: &DsfSequence) -> Result<(ExpressionLabel, Vec<(ExpressionLabel, f64)>)> {
        match self {
            TrainedModel::Svm(m) => {
                let feature = mean_deformation(seq)?;
                let (label, scores) = m.svm.predict(&feature.values)?;
                Ok((
                    label,
                    m.svm.classes.iter().copied().zip(scores).collect(),
                ))
            }
            TrainedModel::Hmm(m) => {
                let frames = frame_features(seq, &m.pool)?;
                let mut scores = Vec::with_capacity(m.classes.len());
                for (label, model) in &m.classes {
                    scores.push((*label, model.log_likelihood(&frames)?));
                }
                let mut best = 0;
                for (i, (_, s)) in scores.iter().enumerate() {
                    if *s > scores[best].1 {
                        best = i;
                    }
                }
                Ok((scores[best].0, scores))
            }
        }
    }
}

/// Trains the SVM pipeline (time-mean feature, one-vs-rest linear SVM).
pub fn fit_svm_sequence_model(
    train: &[&LabeledSequence],
    params: &SvmParams,
    seed: u64,
) -> Result<TrainedModel> {
    let mut features = Vec::with_capacity(train.len());
    let mut labels = Vec::with_capacity(train.len());
    for item in train {
        features.push(mean_deformation(&item.sequence)?.values);
        labels.push(item.label);
    }
    let svm = train_svm(
        &features,
        &labels,
        &SvmParams {
            seed,
            ..*params
        },
    )?;
    Ok(TrainedModel::Svm(SvmSequenceModel { svm }))
}

/// Trains the HMM pipeline: pooled per-frame features, one left-to-right
/// Gaussian HMM per class.
pub fn fit_hmm_sequence_model(
    train: &[&LabeledSequence],
    pool: &PoolGrid,
    cfg: &HmmTrainConfig,
    seed: u64,
) -> Result<TrainedModel> {
    let mut by_class: BTreeMap<ExpressionLabel, Vec<Vec<Vec<f64>>>> = BTreeMap::new();
    for item in train {
        by_class
            .entry(item.label)
            .or_default()
            .push(frame_features(&item.sequence, pool)?);
    }
    let mut classes = Vec::with_capacity(by_class.len());
    for (label, sequences) in by_class {
        let class_cfg = HmmTrainConfig {
            seed: seed ^ 0x9e3779b97f4a7c15u64.wrapping_mul(label.index() as u64 + 1),
            ..*cfg
        };
        let (model, report) = fit_gaussian_hmm(&sequences, &class_cfg)?;
        check_monotone(&report, label)?;
        classes.push((label, model));
    }
    Ok(TrainedModel::Hmm(HmmSequenceModel {
        pool: *pool,
        classes,
    }))
}

/// EM must not decrease the log-likelihood; tolerate only round-off drift.
fn check_monotone(report: &HmmFitReport, label: ExpressionLabel) -> Result<()> {
    for w in report.log_likelihoods.windows(2) {
        let slack = 1e-8 * w[0].abs().max(1.0);
        if w[1] < w[0] - slack {
            return Err(Error::numerical(format!(
                "Baum-Welch log-likelihood decreased for class {label}: {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}
