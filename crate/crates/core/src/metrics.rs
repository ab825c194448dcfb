//! Accuracy, per-class precision/recall/F1 and macro-F1 over the four
//! relation classes.

use serde::{Deserialize, Serialize};

use crate::pairs::Label;
use crate::{Error, Result};

/// Precision/recall/F1 of one class, with the 0/0 convention F1 = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences of the class.
    pub support: usize,
    /// Predicted occurrences of the class.
    pub predicted: usize,
    /// True when the class appears in neither golds nor predictions; its
    /// zero F1 is then a convention, not a measurement.
    pub degenerate: bool,
}

/// Full evaluation report over a prediction/gold pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[gold][predicted]` counts.
    pub confusion: [[usize; 4]; 4],
    pub total: usize,
}

fn ratio(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Score predictions against golds. Inputs must be nonempty and of equal
/// length.
pub fn evaluate(predictions: &[Label], golds: &[Label]) -> Result<EvalReport> {
    if predictions.len() != golds.len() {
        return Err(Error::argument(format!(
            "length mismatch: {} predictions vs {} golds",
            predictions.len(),
            golds.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::argument("cannot evaluate an empty label sequence"));
    }

    let mut confusion = [[0usize; 4]; 4];
    for (prediction, gold) in predictions.iter().zip(golds) {
        confusion[gold.index()][prediction.index()] += 1;
    }

    let total = predictions.len();
    let correct: usize = (0..4).map(|i| confusion[i][i]).sum();

    let mut per_class = Vec::with_capacity(4);
    for label in Label::ALL {
        let i = label.index();
        let tp = confusion[i][i];
        let support: usize = confusion[i].iter().sum();
        let predicted: usize = (0..4).map(|g| confusion[g][i]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            label,
            precision,
            recall,
            f1,
            support,
            predicted,
            degenerate: support == 0 && predicted == 0,
        });
    }

    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / 4.0;
    Ok(EvalReport {
        accuracy: ratio(correct, total),
        macro_f1,
        per_class,
        confusion,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn perfect_predictions() {
        let golds = vec![Contrasting, Reasoning, Entailment, Neutral];
        let report = evaluate(&golds, &golds).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.macro_f1, 1.0);
    }

    /// The 8-example confusion fixture: two golds per class, the two
    /// Neutral golds predicted Contrasting, everything else correct.
    ///
    /// Hand computation: accuracy 6/8. Contrasting has TP = 2, FP = 2,
    /// FN = 0, so P = 1/2, R = 1, F1 = 2/3. Reasoning and Entailment are
    /// perfect, Neutral scores 0, so macro-F1 = (2/3 + 1 + 1 + 0)/4 = 2/3.
    #[test]
    fn eight_example_confusion_fixture() {
        let golds = vec![
            Contrasting,
            Contrasting,
            Reasoning,
            Reasoning,
            Entailment,
            Entailment,
            Neutral,
            Neutral,
        ];
        let predictions = vec![
            Contrasting,
            Contrasting,
            Reasoning,
            Reasoning,
            Entailment,
            Entailment,
            Contrasting,
            Contrasting,
        ];
        let report = evaluate(&predictions, &golds).unwrap();
        assert_eq!(report.accuracy, 0.75);
        let f1s: Vec<f64> = report.per_class.iter().map(|c| c.f1).collect();
        assert_eq!(f1s[0], 2.0 / 3.0);
        assert_eq!(f1s[1], 1.0);
        assert_eq!(f1s[2], 1.0);
        assert_eq!(f1s[3], 0.0);
        assert_eq!(report.macro_f1, (2.0 / 3.0 + 2.0) / 4.0);
        assert_eq!(report.confusion[3][0], 2);
    }

    #[test]
    fn absent_class_flagged_degenerate() {
        let golds = vec![Contrasting, Reasoning, Contrasting];
        let predictions = vec![Contrasting, Reasoning, Reasoning];
        let report = evaluate(&predictions, &golds).unwrap();
        let neutral = &report.per_class[Neutral.index()];
        assert_eq!(neutral.f1, 0.0);
        assert!(neutral.degenerate);
        let contrasting = &report.per_class[Contrasting.index()];
        assert!(!contrasting.degenerate);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            evaluate(&[Contrasting], &[Contrasting, Neutral]),
            Err(Error::Argument { .. })
        ));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(evaluate(&[], &[]), Err(Error::Argument { .. })));
    }

    #[test]
    fn accuracy_equals_confusion_trace_over_total() {
        let golds = vec![Contrasting, Reasoning, Entailment, Neutral, Neutral];
        let predictions = vec![Reasoning, Reasoning, Entailment, Neutral, Contrasting];
        let report = evaluate(&predictions, &golds).unwrap();
        let trace: usize = (0..4).map(|i| report.confusion[i][i]).sum();
        assert_eq!(report.accuracy, trace as f64 / report.total as f64);
    }
}
