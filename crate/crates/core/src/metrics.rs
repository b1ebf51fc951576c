//! Evaluation reports and chance-corrected agreement.
//!
//! Reports keep full precision; the renderers round to two decimals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Counts indexed `[gold][predicted]` by [`Label::index`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Confusion(pub [[u64; 2]; 2]);

impl Confusion {
    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn get(&self, gold: Label, pred: Label) -> u64 {
        self.0[gold.index()][pred.index()]
    }
}

pub fn confusion(golds: &[Label], preds: &[Label]) -> Result<Confusion> {
    if golds.len() != preds.len() {
        return Err(Error::LengthMismatch {
            left: golds.len(),
            right: preds.len(),
        });
    }
    let mut m = Confusion::default();
    for (g, p) in golds.iter().zip(preds) {
        m.0[g.index()][p.index()] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold items of this class.
    pub support: u64,
}

/// Which average the two-decimal renderers show.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Average {
    #[default]
    Weighted,
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: Confusion,
    pub n_items: u64,
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassScores>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn scores(m: &Confusion) -> Result<EvalReport> {
    let n = m.total();
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let per_class: Vec<ClassScores> = Label::ALL
        .iter()
        .map(|&label| {
            let c = label.index();
            let tp = m.0[c][c];
            let row: u64 = m.0[c].iter().sum();
            let col: u64 = m.0.iter().map(|r| r[c]).sum();
            let precision = ratio(tp, col);
            let recall = ratio(tp, row);
            ClassScores {
                label,
                precision,
                recall,
                f1: harmonic(precision, recall),
                support: row,
            }
        })
        .collect();
    let weighted = |f: fn(&ClassScores) -> f64| per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / n as f64;
    let mean = |f: fn(&ClassScores) -> f64| per_class.iter().map(f).sum::<f64>() / per_class.len() as f64;
    Ok(EvalReport {
        confusion: *m,
        n_items: n,
        accuracy: ratio(m.trace(), n),
        weighted_precision: weighted(|c| c.precision),
        weighted_recall: weighted(|c| c.recall),
        weighted_f1: weighted(|c| c.f1),
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        per_class,
    })
}

/// `confusion` then `scores`.
pub fn evaluate(golds: &[Label], preds: &[Label]) -> Result<EvalReport> {
    scores(&confusion(golds, preds)?)
}

impl EvalReport {
    /// Accuracy, recall and F1 under the chosen average.
    pub fn headline(&self, average: Average) -> (f64, f64, f64) {
        match average {
            Average::Weighted => (self.accuracy, self.weighted_recall, self.weighted_f1),
            Average::Macro => (self.accuracy, self.macro_recall, self.macro_f1),
        }
    }

    /// Key-value lines followed by the confusion block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "evaluated: {}", self.n_items);
        for (k, v) in [
            ("accuracy", self.accuracy),
            ("weighted_precision", self.weighted_precision),
            ("weighted_recall", self.weighted_recall),
            ("weighted_f1", self.weighted_f1),
            ("macro_precision", self.macro_precision),
            ("macro_recall", self.macro_recall),
            ("macro_f1", self.macro_f1),
        ] {
            let _ = writeln!(s, "{k}: {v:.2}");
        }
        for c in &self.per_class {
            let _ = writeln!(
                s,
                "{}: precision {:.2} recall {:.2} f1 {:.2} support {}",
                c.label, c.precision, c.recall, c.f1, c.support
            );
        }
        s.push('\n');
        s.push_str(&render_confusion(&self.confusion));
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Rows are gold labels, columns predictions.
pub fn render_confusion(m: &Confusion) -> String {
    let names: Vec<&str> = Label::ALL.iter().map(|l| l.as_str()).collect();
    let width = names
        .iter()
        .map(|n| n.len())
        .chain(m.0.iter().flatten().map(|v| v.to_string().len()))
        .max()
        .unwrap_or(1);
    let mut s = String::new();
    let _ = writeln!(s, "confusion (rows gold, columns predicted)");
    let _ = write!(s, "{:width$}", "");
    for n in &names {
        let _ = write!(s, "  {n:>width$}");
    }
    s.push('\n');
    for (g, row) in m.0.iter().enumerate() {
        let _ = write!(s, "{:width$}", names[g]);
        for v in row {
            let _ = write!(s, "  {v:>width$}");
        }
        s.push('\n');
    }
    s
}

/// One line of a results table. `scores` is `None` for a run that failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dataset: String,
    pub model: String,
    pub scores: Option<(f64, f64, f64)>,
}

impl TableRow {
    pub fn from_report(dataset: impl Into<String>, model: impl Into<String>, report: &EvalReport, average: Average) -> Self {
        TableRow {
            dataset: dataset.into(),
            model: model.into(),
            scores: Some(report.headline(average)),
        }
    }

    pub fn failed(dataset: impl Into<String>, model: impl Into<String>) -> Self {
        TableRow {
            dataset: dataset.into(),
            model: model.into(),
            scores: None,
        }
    }
}

/// Dataset / Model / Accuracy / Recall / F1, rows in the given order.
pub fn render_table(rows: &[TableRow]) -> String {
    let header = ["Dataset", "Model", "Accuracy", "Recall", "F1"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            let (a, rc, f) = match r.scores {
                Some((a, rc, f)) => (format!("{a:.2}"), format!("{rc:.2}"), format!("{f:.2}")),
                None => ("FAILED".into(), "-".into(), "-".into()),
            };
            [r.dataset.clone(), r.model.clone(), a, rc, f]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |vals: [&str; 5]| {
        let mut s = String::new();
        for (i, v) in vals.iter().enumerate() {
            let pad = widths[i] - v.chars().count();
            if i > 0 {
                s.push_str(" | ");
            }
            // text columns left, numbers right
            if i < 2 {
                s.push_str(v);
                s.extend(std::iter::repeat_n(' ', pad));
            } else {
                s.extend(std::iter::repeat_n(' ', pad));
                s.push_str(v);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&rule.join("-+-"));
    out.push('\n');
    for row in &cells {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3], &row[4]]));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub kappa: f64,
    pub p_o: f64,
    pub p_e: f64,
    pub n_items: usize,
}

/// Cohen's kappa between two labelings of the same items. When chance
/// agreement is already 1 both raters used one identical constant label,
/// and kappa is taken as 1.
pub fn cohen_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<AgreementReport> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("kappa needs at least one item".into()));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count();
    let mut marg: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    for x in a {
        marg.entry(x).or_default().0 += 1;
    }
    for y in b {
        marg.entry(y).or_default().1 += 1;
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = marg.values().map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n)).sum();
    let kappa = if p_e >= 1.0 { 1.0 } else { (p_o - p_e) / (1.0 - p_e) };
    Ok(AgreementReport {
        kappa,
        p_o,
        p_e,
        n_items: a.len(),
    })
}
