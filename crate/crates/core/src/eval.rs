//! Word error rate, the confidence/WER scatter with its regression fits,
//! rank correlation, and confidence-bin histograms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::WordId;
use crate::decoder::DecodedPool;
use crate::error::{Error, Result};
use crate::protocols::{Bin, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
}

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// Utterance-level WER in percent.
    pub fn wer(&self) -> Result<f64> {
        if self.ref_len == 0 {
            return Err(Error::Evaluation("WER of an empty reference".into()));
        }
        Ok(100.0 * self.errors() as f64 / self.ref_len as f64)
    }
}

impl std::ops::Add for EditCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
            ref_len: self.ref_len + o.ref_len,
        }
    }
}

/// Minimal-cost Levenshtein alignment counts. Among minimal alignments the
/// backtrace prefers substitution (or match), then deletion, then insertion.
pub fn edit_distance(reference: &[WordId], hyp: &[WordId]) -> EditCounts {
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            d[i * w + j] = sub.min(d[(i - 1) * w + j] + 1).min(d[i * w + j - 1] + 1);
        }
    }
    let mut counts = EditCounts {
        ref_len: n,
        ..EditCounts::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let mismatch = reference[i - 1] != hyp[j - 1];
            if here == d[(i - 1) * w + j - 1] + usize::from(mismatch) {
                counts.substitutions += usize::from(mismatch);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == d[(i - 1) * w + j] + 1 {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

/// Corpus WER in percent, pooling edit counts before dividing.
pub fn corpus_wer<'a>(pairs: impl IntoIterator<Item = (&'a [WordId], &'a [WordId])>) -> Result<f64> {
    let total = pairs
        .into_iter()
        .map(|(r, h)| edit_distance(r, h))
        .fold(EditCounts::default(), |a, b| a + b);
    if total.ref_len == 0 {
        return Err(Error::Evaluation("corpus WER over zero reference words".into()));
    }
    total.wer()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub utterance_id: String,
    pub confidence: f64,
    pub wer: f64,
}

/// One (confidence, utterance WER) point per decoded utterance, id order.
pub fn scatter(decoded: &DecodedPool, truth: &BTreeMap<String, Vec<WordId>>) -> Result<Vec<ScatterPoint>> {
    decoded
        .iter()
        .map(|d| {
            let r = truth
                .get(&d.utterance_id)
                .ok_or_else(|| Error::Evaluation(format!("no reference for {}", d.utterance_id)))?;
            Ok(ScatterPoint {
                utterance_id: d.utterance_id.clone(),
                confidence: d.confidence,
                wer: edit_distance(r, &d.best.words).wer()?,
            })
        })
        .collect()
}

/// `y ≈ a·x² + b·x + c` (a linear fit has `a = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rss: f64,
}

impl RegressionFit {
    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }
}

fn solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
    let n = rhs.len();
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .expect("nonempty range");
        if m[pivot][col].abs() <= 1e-12 * scale {
            return Err(Error::Evaluation("rank-deficient regression design".into()));
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    Ok(x)
}

fn fit_polynomial(points: &[(f64, f64)], degree: usize) -> Result<RegressionFit> {
    let terms = degree + 1;
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if points.len() < terms || xs.len() < terms {
        return Err(Error::Evaluation(format!(
            "degree-{degree} fit needs at least {terms} distinct abscissae"
        )));
    }
    // normal equations: (XᵀX) β = Xᵀy, β in ascending powers
    let mut xtx = vec![vec![0.0; terms]; terms];
    let mut xty = vec![0.0; terms];
    for &(x, y) in points {
        let pows: Vec<f64> = (0..terms).map(|p| x.powi(p as i32)).collect();
        for r in 0..terms {
            xty[r] += pows[r] * y;
            for c in 0..terms {
                xtx[r][c] += pows[r] * pows[c];
            }
        }
    }
    let beta = solve(xtx, xty)?;
    let (c, b, a) = (beta[0], beta[1], if degree >= 2 { beta[2] } else { 0.0 });
    let mut fit = RegressionFit { a, b, c, rss: 0.0 };
    fit.rss = points.iter().map(|&(x, y)| (y - fit.eval(x)).powi(2)).sum();
    Ok(fit)
}

pub fn fit_quadratic(points: &[(f64, f64)]) -> Result<RegressionFit> {
    fit_polynomial(points, 2)
}

pub fn fit_linear(points: &[(f64, f64)]) -> Result<RegressionFit> {
    fit_polynomial(points, 1)
}

/// 1-based ranks with ties sharing their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Evaluation("rank correlation needs at least 2 points".into()));
    }
    let rx = average_ranks(&points.iter().map(|p| p.0).collect::<Vec<_>>());
    let ry = average_ranks(&points.iter().map(|p| p.1).collect::<Vec<_>>());
    let n = points.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in rx.iter().zip(&ry) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Evaluation("rank correlation of a constant variable".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinHistogram {
    pub model_id: String,
    pub iteration: usize,
    pub counts: Vec<(Interval, usize)>,
}

impl BinHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().map(|c| c.1).sum()
    }

    /// Fraction of the pool in the first (for SSL ordering, the top) bin.
    pub fn first_fraction(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.counts[0].1 as f64 / total as f64
        }
    }
}

pub fn bin_histogram(bins: &[Bin], pool_size: usize, model_id: &str, iteration: usize) -> Result<BinHistogram> {
    let counts: Vec<(Interval, usize)> = bins.iter().map(|b| (b.interval, b.members.len())).collect();
    let total: usize = counts.iter().map(|c| c.1).sum();
    if total != pool_size {
        return Err(Error::invariant(
            "histogram-mass-conservation",
            format!("bins hold {total} utterances, pool has {pool_size}"),
        ));
    }
    Ok(BinHistogram {
        model_id: model_id.to_string(),
        iteration,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edit_distance_examples() {
        let c = edit_distance(&[0, 1], &[0, 1]);
        assert_eq!((c.substitutions, c.deletions, c.insertions, c.ref_len), (0, 0, 0, 2));
        let c = edit_distance(&[], &[0]);
        assert_eq!((c.substitutions, c.deletions, c.insertions, c.ref_len), (0, 0, 1, 0));
        // a b c  vs  a x c d
        let c = edit_distance(&[0, 1, 2], &[0, 9, 2, 3]);
        assert_eq!((c.substitutions, c.deletions, c.insertions, c.ref_len), (1, 0, 1, 3));
    }

    #[test]
    fn tie_break_prefers_substitution_over_deletion_and_insertion() {
        // "a b" vs "c": S+D either way; substitution is taken at the last slot
        let c = edit_distance(&[0, 1], &[2]);
        assert_eq!((c.substitutions, c.deletions, c.insertions), (1, 1, 0));
    }

    #[test]
    fn corpus_wer_examples() {
        let r: Vec<WordId> = (0..10).collect();
        let mut h = r.clone();
        h[0] = 99; // S
        h.remove(5); // D
        h.push(77); // I
        assert!((corpus_wer([(r.as_slice(), h.as_slice())]).unwrap() - 30.0).abs() < 1e-12);
        assert_eq!(corpus_wer([(r.as_slice(), r.as_slice())]).unwrap(), 0.0);
        assert_eq!(corpus_wer([(&[0][..], &[1, 2][..])]).unwrap(), 200.0);
        assert!(corpus_wer([(&[][..], &[1][..])]).is_err());
    }

    #[test]
    fn quadratic_fit_is_exact_on_parabolas() {
        let pts: Vec<(f64, f64)> = (0..7).map(|i| i as f64 / 6.0).map(|x| (x, x * x)).collect();
        let f = fit_quadratic(&pts).unwrap();
        assert!((f.a - 1.0).abs() < 1e-9 && f.b.abs() < 1e-9 && f.c.abs() < 1e-9);
        assert!(f.rss < 1e-9);
        assert!(fit_quadratic(&pts[..2]).is_err());
        let dup = [(0.5, 1.0), (0.5, 2.0), (0.7, 1.0), (0.7, 3.0)];
        assert!(fit_quadratic(&dup).is_err());
    }

    #[test]
    fn three_points_solve_the_interpolation_system() {
        // independent route: Lagrange interpolation through the three points
        let pts = [(0.2, 40.0), (0.5, 22.0), (0.9, 3.0)];
        let f = fit_quadratic(&pts).unwrap();
        let (x0, x1, x2) = (pts[0].0, pts[1].0, pts[2].0);
        let (y0, y1, y2) = (pts[0].1, pts[1].1, pts[2].1);
        let d0 = (x0 - x1) * (x0 - x2);
        let d1 = (x1 - x0) * (x1 - x2);
        let d2 = (x2 - x0) * (x2 - x1);
        let a = y0 / d0 + y1 / d1 + y2 / d2;
        let b = -(y0 * (x1 + x2) / d0 + y1 * (x0 + x2) / d1 + y2 * (x0 + x1) / d2);
        let c = y0 * x1 * x2 / d0 + y1 * x0 * x2 / d1 + y2 * x0 * x1 / d2;
        assert!((f.a - a).abs() < 1e-8 && (f.b - b).abs() < 1e-8 && (f.c - c).abs() < 1e-8);
        assert!(f.rss < 1e-12);
    }

    #[test]
    fn spearman_extremes_and_errors() {
        let inc: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, (i * i) as f64)).collect();
        let dec: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, -(i as f64))).collect();
        assert!((spearman(&inc).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&dec).unwrap() + 1.0).abs() < 1e-12);
        assert!(spearman(&inc[..1]).is_err());
    }

    #[test]
    fn spearman_with_ties_matches_the_rank_formula() {
        let pts = [(1.0, 2.0), (2.0, 2.0), (2.0, 3.0), (3.0, 1.0), (4.0, 5.0), (4.0, 5.0)];
        // hand-assigned average ranks
        let rx = [1.0, 2.5, 2.5, 4.0, 5.5, 5.5];
        let ry = [2.5, 2.5, 4.0, 1.0, 5.5, 5.5];
        let mean = 3.5;
        let num: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
        let den = (rx.iter().map(|a| (a - mean).powi(2)).sum::<f64>()
            * ry.iter().map(|b| (b - mean).powi(2)).sum::<f64>())
        .sqrt();
        assert!((spearman(&pts).unwrap() - num / den).abs() < 1e-12);
    }
}
