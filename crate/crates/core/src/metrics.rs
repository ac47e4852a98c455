//! Confusion matrices and per-class precision / recall / F1 tables.
//!
//! All table values are percentages kept at full precision; rounding to two
//! decimals happens only when a table is rendered as CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// `counts[true][predicted]`
    pub counts: Vec<Vec<u64>>,
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], classes: &[String]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    let k = classes.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(Error::UnknownLabel(t.max(p).to_string()));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn one_vs_rest(&self, c: usize) -> BinaryCounts {
        let tp = self.counts[c][c];
        let actual: u64 = self.counts[c].iter().sum();
        let predicted: u64 = self.counts.iter().map(|r| r[c]).sum();
        let fp = predicted - tp;
        let fn_ = actual - tp;
        BinaryCounts {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fp - fn_,
        }
    }

    /// Trace over total: the multi-class reading of (TP + TN) / all.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: u64 = (0..self.classes.len()).map(|c| self.counts[c][c]).sum();
        trace as f64 / total as f64
    }

    /// Micro-averaged (precision, recall); both equal accuracy for single-label data.
    pub fn micro(&self) -> (f64, f64) {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for c in 0..self.classes.len() {
            let b = self.one_vs_rest(c);
            tp += b.tp;
            fp += b.fp;
            fn_ += b.fn_;
        }
        (ratio(tp, tp + fp), ratio(tp, tp + fn_))
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// No actual and no predicted instances: every score is defined as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub support: u64,
}

pub fn metric_table(cm: &ConfusionMatrix) -> MetricTable {
    let per_class: Vec<ClassMetrics> = (0..cm.classes.len())
        .map(|c| {
            let b = cm.one_vs_rest(c);
            let precision = ratio(b.tp, b.tp + b.fp);
            let recall = ratio(b.tp, b.tp + b.fn_);
            ClassMetrics {
                class: cm.classes[c].clone(),
                precision: 100.0 * precision,
                recall: 100.0 * recall,
                f1: 100.0 * f1(precision, recall),
                support: b.tp + b.fn_,
                degenerate: b.tp + b.fn_ == 0 && b.tp + b.fp == 0,
            }
        })
        .collect();
    let support = cm.total();
    let k = per_class.len().max(1) as f64;
    let macro_avg = Averages {
        precision: per_class.iter().map(|m| m.precision).sum::<f64>() / k,
        recall: per_class.iter().map(|m| m.recall).sum::<f64>() / k,
        f1: per_class.iter().map(|m| m.f1).sum::<f64>() / k,
    };
    let w = |f: fn(&ClassMetrics) -> f64| {
        if support == 0 {
            0.0
        } else {
            per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / support as f64
        }
    };
    let weighted_avg = Averages {
        precision: w(|m| m.precision),
        recall: w(|m| m.recall),
        f1: w(|m| m.f1),
    };
    MetricTable {
        accuracy: 100.0 * cm.accuracy(),
        per_class,
        macro_avg,
        weighted_avg,
        support,
    }
}

/// Cell-wise mean over folds; supports are summed, degenerate flags OR-ed.
pub fn cv_aggregate(tables: &[MetricTable]) -> Result<MetricTable> {
    let first = tables
        .first()
        .ok_or_else(|| Error::EmptyInput("no fold tables to aggregate".into()))?;
    let names: Vec<&str> = first.per_class.iter().map(|m| m.class.as_str()).collect();
    for t in tables {
        if t.per_class.iter().map(|m| m.class.as_str()).ne(names.iter().copied()) {
            return Err(Error::InvalidConfig("fold tables have different class lists".into()));
        }
    }
    let n = tables.len() as f64;
    let mean = |f: &dyn Fn(&MetricTable) -> f64| tables.iter().map(f).sum::<f64>() / n;
    let per_class = (0..names.len())
        .map(|c| ClassMetrics {
            class: names[c].to_string(),
            precision: mean(&|t| t.per_class[c].precision),
            recall: mean(&|t| t.per_class[c].recall),
            f1: mean(&|t| t.per_class[c].f1),
            support: tables.iter().map(|t| t.per_class[c].support).sum(),
            degenerate: tables.iter().any(|t| t.per_class[c].degenerate),
        })
        .collect();
    Ok(MetricTable {
        per_class,
        accuracy: mean(&|t| t.accuracy),
        macro_avg: Averages {
            precision: mean(&|t| t.macro_avg.precision),
            recall: mean(&|t| t.macro_avg.recall),
            f1: mean(&|t| t.macro_avg.f1),
        },
        weighted_avg: Averages {
            precision: mean(&|t| t.weighted_avg.precision),
            recall: mean(&|t| t.weighted_avg.recall),
            f1: mean(&|t| t.weighted_avg.f1),
        },
        support: tables.iter().map(|t| t.support).sum(),
    })
}

impl MetricTable {
    /// Does every reported value equal `value` after two-decimal rounding?
    pub fn all_rounded_equal(&self, value: f64) -> bool {
        let r = |v: f64| (v * 100.0).round() / 100.0;
        let mut all = vec![self.accuracy];
        for a in [self.macro_avg, self.weighted_avg] {
            all.extend([a.precision, a.recall, a.f1]);
        }
        for m in &self.per_class {
            all.extend([m.precision, m.recall, m.f1]);
        }
        all.into_iter().all(|v| r(v) == value)
    }
}

/// Render one or more tables side by side: one row per class, then macro avg,
/// weighted avg and accuracy; precision/recall/F1 columns per configuration.
/// All tables must share the same class list.
pub fn tables_to_csv(configs: &[(&str, &MetricTable)]) -> Result<String> {
    let Some((_, first)) = configs.first() else {
        return Err(Error::EmptyInput("no tables to render".into()));
    };
    for (_, t) in configs {
        if t.per_class.len() != first.per_class.len() {
            return Err(Error::InvalidConfig("tables have different class lists".into()));
        }
    }
    let mut out = String::from("class");
    for (label, _) in configs {
        write!(out, ",{label}_precision,{label}_recall,{label}_f1").unwrap();
    }
    out.push_str(",support\n");
    let cell = |v: f64| format!("{v:.2}");
    for c in 0..first.per_class.len() {
        out.push_str(&first.per_class[c].class);
        for (_, t) in configs {
            let m = &t.per_class[c];
            write!(out, ",{},{},{}", cell(m.precision), cell(m.recall), cell(m.f1)).unwrap();
        }
        writeln!(out, ",{}", first.per_class[c].support).unwrap();
    }
    for (name, pick) in [
        ("macro avg", (|t: &MetricTable| t.macro_avg) as fn(&MetricTable) -> Averages),
        ("weighted avg", |t: &MetricTable| t.weighted_avg),
    ] {
        out.push_str(name);
        for (_, t) in configs {
            let a = pick(t);
            write!(out, ",{},{},{}", cell(a.precision), cell(a.recall), cell(a.f1)).unwrap();
        }
        writeln!(out, ",{}", first.support).unwrap();
    }
    out.push_str("accuracy");
    for (_, t) in configs {
        write!(out, ",,,{}", cell(t.accuracy)).unwrap();
    }
    writeln!(out, ",{}", first.support).unwrap();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classes(k: usize) -> Vec<String> {
        (0..k).map(|c| format!("C{c}")).collect()
    }

    #[test]
    fn tally_examples() {
        let cm = confusion(&[0, 0, 1], &[0, 1, 1], &classes(2)).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 1]]);
        let diag = confusion(&[0, 1, 2, 1], &[0, 1, 2, 1], &classes(3)).unwrap();
        assert_eq!(diag.counts, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
        assert!(confusion(&[0], &[0, 1], &classes(2)).is_err());
        assert!(matches!(confusion(&[0], &[3], &classes(2)), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn perfect_predictions_are_all_hundred() {
        let y = [0, 1, 2, 2, 1];
        let t = metric_table(&confusion(&y, &y, &classes(3)).unwrap());
        assert!(t.all_rounded_equal(100.0));
    }

    #[test]
    fn binary_hand_example() {
        // TP 95, FN 5, FP 0, TN 100 for class 1
        let cm = ConfusionMatrix {
            classes: classes(2),
            counts: vec![vec![100, 0], vec![5, 95]],
        };
        let t = metric_table(&cm);
        let m = &t.per_class[1];
        assert_eq!(m.precision, 100.0);
        assert!((m.recall - 95.0).abs() < 1e-12);
        assert!((m.f1 - 2.0 * 100.0 * 95.0 / 195.0).abs() < 1e-12);
        assert_eq!(format!("{:.2}", m.f1), "97.44");
    }

    #[test]
    fn degenerate_class_is_zero_and_flagged() {
        let t = metric_table(&confusion(&[0, 1], &[0, 1], &classes(3)).unwrap());
        let m = &t.per_class[2];
        assert!(m.degenerate);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(!t.per_class[0].degenerate);
    }

    #[test]
    fn cv_mean_examples() {
        let a = metric_table(&confusion(&[0, 1, 1, 1, 0], &[0, 1, 1, 1, 1], &classes(2)).unwrap());
        assert_eq!(cv_aggregate(&[a.clone(), a.clone()]).unwrap().per_class, {
            let mut pc = a.per_class.clone();
            pc.iter_mut().for_each(|m| m.support *= 2);
            pc
        });
        let mut b = a.clone();
        let mut a2 = a.clone();
        a2.accuracy = 98.0;
        b.accuracy = 100.0;
        assert_eq!(cv_aggregate(&[a2, b]).unwrap().accuracy, 99.0);
        let other = metric_table(&confusion(&[0], &[0], &classes(3)).unwrap());
        assert!(cv_aggregate(&[a, other]).is_err());
        assert!(cv_aggregate(&[]).is_err());
    }

    #[test]
    fn csv_layout() {
        let t = metric_table(&confusion(&[0, 1], &[0, 1], &classes(2)).unwrap());
        let csv = tables_to_csv(&[("11", &t), ("17", &t)]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "class,11_precision,11_recall,11_f1,17_precision,17_recall,17_f1,support");
        assert_eq!(lines[1], "C0,100.00,100.00,100.00,100.00,100.00,100.00,1");
        assert!(lines[3].starts_with("macro avg,"));
        assert!(lines[4].starts_with("weighted avg,"));
        assert!(lines[5].starts_with("accuracy,,,100.00"));
    }

    proptest! {
        #[test]
        fn table_invariants(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..300), perm in Just(vec![2usize, 0, 3, 1])) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().cloned().unzip();
            let cm = confusion(&t, &p, &classes(4)).unwrap();
            let table = metric_table(&cm);
            let (mp, mr) = cm.micro();
            prop_assert!((mp - cm.accuracy()).abs() < 1e-12);
            prop_assert!((mr - cm.accuracy()).abs() < 1e-12);
            let supported: Vec<f64> = table.per_class.iter().filter(|m| m.support > 0).map(|m| m.f1).collect();
            let lo = supported.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = supported.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(table.weighted_avg.f1 >= lo - 1e-9 && table.weighted_avg.f1 <= hi + 1e-9);

            // relabel classes: rows permute, accuracy and averages do not change
            let names: Vec<String> = perm.iter().map(|&c| format!("C{c}")).collect();
            let inv = |c: usize| perm.iter().position(|&x| x == c).unwrap();
            let t2: Vec<usize> = t.iter().map(|&c| inv(c)).collect();
            let p2: Vec<usize> = p.iter().map(|&c| inv(c)).collect();
            let table2 = metric_table(&confusion(&t2, &p2, &names).unwrap());
            prop_assert!((table.accuracy - table2.accuracy).abs() < 1e-9);
            prop_assert!((table.macro_avg.f1 - table2.macro_avg.f1).abs() < 1e-9);
            prop_assert!((table.weighted_avg.f1 - table2.weighted_avg.f1).abs() < 1e-9);
            for (i, &c) in perm.iter().enumerate() {
                prop_assert_eq!(&table2.per_class[i], &table.per_class[c]);
            }
        }
    }
}
