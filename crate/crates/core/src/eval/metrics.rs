//! Confusion matrix, precision/recall/F1 and one-vs-rest ROC-AUC.

use super::EvalError;

/// C×C count matrix over true labels (rows) and predictions (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
    class_names: Vec<String>,
}

impl ConfusionMatrix {
    /// Tallies `counts[label][prediction] += 1` per sample.
    pub fn from_pairs(
        predictions: &[usize],
        labels: &[usize],
        class_names: &[&str],
    ) -> Result<ConfusionMatrix, EvalError> {
        if predictions.len() != labels.len() {
            return Err(EvalError::LengthMismatch(predictions.len(), labels.len()));
        }
        let c = class_names.len();
        let mut counts = vec![vec![0usize; c]; c];
        for (&p, &l) in predictions.iter().zip(labels) {
            for index in [p, l] {
                if index >= c {
                    return Err(EvalError::IndexOutOfRange { index, classes: c });
                }
            }
            counts[l][p] += 1;
        }
        Ok(ConfusionMatrix {
            counts,
            class_names: class_names.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Number of samples whose true label is `c` (row sum).
    pub fn support(&self, c: usize) -> usize {
        self.counts[c].iter().sum()
    }

    /// Number of samples predicted as `c` (column sum).
    pub fn predicted(&self, c: usize) -> usize {
        self.counts.iter().map(|row| row[c]).sum()
    }

    pub fn true_positives(&self, c: usize) -> usize {
        self.counts[c][c]
    }

    /// trace / total; zero on an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: usize = (0..self.num_classes()).map(|c| self.counts[c][c]).sum();
        trace as f64 / total as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassScore {
    pub name: String,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassMetrics {
    pub per_class: Vec<ClassScore>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    /// Human-readable notes for every 0/0 that was reported as 0.
    pub flags: Vec<String>,
}

/// P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R). A zero denominator
/// yields 0 and a flag naming the class and metric.
pub fn precision_recall_f1(cm: &ConfusionMatrix) -> ClassMetrics {
    let c = cm.num_classes();
    let mut flags = Vec::new();
    let mut per_class = Vec::with_capacity(c);
    fn ratio(flags: &mut Vec<String>, num: usize, den: usize, metric: &str, name: &str) -> f64 {
        if den == 0 {
            flags.push(format!("class {name}: {metric} is 0/0, reported as 0"));
            0.0
        } else {
            num as f64 / den as f64
        }
    }
    for k in 0..c {
        let name = cm.class_names()[k].clone();
        let tp = cm.true_positives(k);
        let precision = ratio(&mut flags, tp, cm.predicted(k), "precision", &name);
        let recall = ratio(&mut flags, tp, cm.support(k), "recall", &name);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            flags.push(format!("class {name}: F1 is 0/0, reported as 0"));
            0.0
        };
        per_class.push(ClassScore { name, support: cm.support(k), precision, recall, f1 });
    }
    let mean = |f: fn(&ClassScore) -> f64| -> f64 {
        per_class.iter().map(f).sum::<f64>() / per_class.len().max(1) as f64
    };
    ClassMetrics {
        macro_precision: mean(|s| s.precision),
        macro_recall: mean(|s| s.recall),
        macro_f1: mean(|s| s.f1),
        accuracy: cm.accuracy(),
        per_class,
        flags,
    }
}

/// One-vs-rest ROC-AUC for `class` from per-sample probability vectors, via
/// the Mann–Whitney rank statistic with midrank ties — equivalent to
/// trapezoidal integration of the ROC curve.
pub fn roc_auc_ovr(
    scores: &[Vec<f64>],
    labels: &[usize],
    class: usize,
) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(scores.len());
    for (row, &label) in scores.iter().zip(labels) {
        let score = *row.get(class).ok_or(EvalError::IndexOutOfRange {
            index: class,
            classes: row.len(),
        })?;
        pairs.push((score, label == class));
    }
    let n_pos = pairs.iter().filter(|p| p.1).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::DegenerateClass(class));
    }

    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        // Ranks are 1-based; the tied block [i, j) shares the midrank.
        let midrank = (i + 1 + j) as f64 / 2.0;
        let tied_pos = pairs[i..j].iter().filter(|p| p.1).count();
        rank_sum_pos += midrank * tied_pos as f64;
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}
