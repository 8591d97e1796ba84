//! Confusion-matrix metrics shared by the emotion and empathy evaluations.

use std::fmt::Write as _;

use serde::Serialize;

/// Rows are gold labels, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        assert!(counts.iter().all(|r| r.len() == counts.len()), "matrix must be square");
        Self { counts }
    }

    pub fn record(&mut self, gold: usize, predicted: usize) {
        self.counts[gold][predicted] += 1;
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    /// Per-class F1; a class with no gold items and no predictions scores 0.
    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.counts[class][class];
        let gold: u64 = self.counts[class].iter().sum();
        let predicted: u64 = self.counts.iter().map(|r| r[class]).sum();
        let denom = gold + predicted;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    }

    pub fn macro_f1(&self) -> f64 {
        let n = self.classes();
        if n == 0 {
            return 0.0;
        }
        (0..n).map(|c| self.f1(c)).sum::<f64>() / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub labels: Vec<String>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn from_confusion(labels: Vec<String>, confusion: ConfusionMatrix) -> Self {
        assert_eq!(labels.len(), confusion.classes());
        Self {
            labels,
            accuracy: confusion.accuracy(),
            macro_f1: confusion.macro_f1(),
            confusion,
        }
    }

    /// Metrics as a two-line CSV followed by the labelled confusion matrix.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "accuracy,macro_f1,total");
        let _ = writeln!(
            out,
            "{:.6},{:.6},{}",
            self.accuracy,
            self.macro_f1,
            self.confusion.total()
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "gold\\predicted,{}", self.labels.join(","));
        for (label, row) in self.labels.iter().zip(self.confusion.counts()) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{label},{}", cells.join(","));
        }
        out
    }
}
