//! Reports: Hamming-weight histograms, pattern bias, controller overhead and
//! parameter heatmaps. All emitters are deterministic byte streams.

use std::fmt::Write as _;

use crate::bits::binomial;
use crate::controller::{extract_weights, WeightMatrix};
use crate::circuit::IqpCircuit;
use crate::error::invalid;
use crate::evaluator::BornDistribution;
use crate::mmd::{population_variance, ModeAssignment};
use crate::datasets::nearest_pattern;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HwHistogram {
    pub counts: Vec<u64>,
    pub total: u64,
}

pub fn hw_histogram(samples: &[u64], n: usize) -> Result<HwHistogram> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset(": histogram needs samples".into()));
    }
    let mut counts = vec![0u64; n + 1];
    for &x in samples {
        let w = x.count_ones() as usize;
        if w > n {
            return invalid(format!("sample weight {w} exceeds {n} bits"));
        }
        counts[w] += 1;
    }
    Ok(HwHistogram { counts, total: samples.len() as u64 })
}

impl HwHistogram {
    /// Fraction of shots with weight in `lo..=hi`.
    pub fn mass_in_range(&self, lo: usize, hi: usize) -> f64 {
        let hi = hi.min(self.counts.len() - 1);
        if lo > hi {
            return 0.0;
        }
        self.counts[lo..=hi].iter().sum::<u64>() as f64 / self.total as f64
    }

    pub fn mean(&self) -> f64 {
        self.counts.iter().enumerate().map(|(w, &c)| w as f64 * c as f64).sum::<f64>() / self.total as f64
    }

    /// Population standard deviation of the weight.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        let var = self.counts.iter().enumerate().map(|(w, &c)| (w as f64 - m).powi(2) * c as f64).sum::<f64>()
            / self.total as f64;
        var.sqrt()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("weight,count,fraction\n");
        for (w, &c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{w},{c},{:?}", c as f64 / self.total as f64);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasReport {
    pub frequencies: Vec<f64>,
    /// Population standard deviation across patterns.
    pub std: f64,
    /// `max / min` frequency; infinite when a pattern never occurs.
    pub max_min_ratio: f64,
    /// `Σ_i |f_i − 1/k|` over `k` patterns.
    pub total_deviation: f64,
}

impl BiasReport {
    pub fn from_frequencies(frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.is_empty() {
            return invalid("bias report needs at least one pattern");
        }
        let k = frequencies.len() as f64;
        let max = frequencies.iter().cloned().fold(f64::MIN, f64::max);
        let min = frequencies.iter().cloned().fold(f64::MAX, f64::min);
        Ok(BiasReport {
            std: population_variance(&frequencies).sqrt(),
            max_min_ratio: if min > 0.0 { max / min } else { f64::INFINITY },
            total_deviation: frequencies.iter().map(|f| (f - 1.0 / k).abs()).sum(),
            frequencies,
        })
    }

    pub fn from_samples(samples: &[u64], patterns: &[u64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset(": bias report needs samples".into()));
        }
        if patterns.is_empty() {
            return invalid("bias report needs at least one pattern");
        }
        let mut counts = vec![0u64; patterns.len()];
        for &x in samples {
            counts[nearest_pattern(x, patterns)] += 1;
        }
        let total = samples.len() as f64;
        Self::from_frequencies(counts.iter().map(|&c| c as f64 / total).collect())
    }

    pub fn from_distribution(dist: &BornDistribution, patterns: &[u64]) -> Result<Self> {
        Self::from_frequencies(ModeAssignment::new(dist.n_qubits(), patterns)?.probabilities(dist))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("# total_deviation = sum_i |f_i - 1/k| over k patterns\npattern,frequency\n");
        for (i, f) in self.frequencies.iter().enumerate() {
            let _ = writeln!(out, "{i},{f:?}");
        }
        let _ = writeln!(out, "std,{:?}", self.std);
        let _ = writeln!(out, "max_min_ratio,{:?}", self.max_min_ratio);
        let _ = writeln!(out, "total_deviation,{:?}", self.total_deviation);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverheadRow {
    pub n: usize,
    pub base_params: u128,
    pub modes: usize,
    pub controller_params: u128,
    pub overhead_percent: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverheadReport {
    pub rows: Vec<OverheadRow>,
}

/// Base circuits have every generator up to this order.
pub const BASE_MAX_ORDER: usize = 6;

/// `Σ_{k=1..min(6,n)} C(n, k)`.
pub fn base_param_count(n: usize) -> u128 {
    (1..=BASE_MAX_ORDER.min(n)).map(|k| binomial(n, k)).sum()
}

/// Parameters of a weight-objective controller: `n + (n−1) + (n−2)`.
pub fn controller_param_count(n: usize) -> u128 {
    3 * n as u128 - 3
}

pub fn overhead_report(ns: &[usize], modes: &[usize]) -> Result<OverheadReport> {
    let mut rows = Vec::new();
    for &n in ns {
        if n < 4 {
            return invalid(format!("overhead needs n >= 4, got {n}"));
        }
        let base = base_param_count(n);
        for &m in modes {
            let ctrl = m as u128 * controller_param_count(n);
            rows.push(OverheadRow {
                n,
                base_params: base,
                modes: m,
                controller_params: ctrl,
                overhead_percent: 100.0 * ctrl as f64 / base as f64,
            });
        }
    }
    Ok(OverheadReport { rows })
}

impl OverheadReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,base_params,modes,controller_params,overhead_percent\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{:.4}", r.n, r.base_params, r.modes, r.controller_params, r.overhead_percent);
        }
        out
    }
}

/// `extract_weights` as CSV: one row per qubit.
pub fn heatmap_csv(w: &WeightMatrix) -> String {
    let mut out = String::new();
    for row in w.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// A self-contained SVG grid; darker cells hold larger magnitudes.
pub fn heatmap_svg(w: &WeightMatrix) -> String {
    let n = w.n();
    let cell = 24;
    let size = n * cell;
    let max = w.rows().flatten().cloned().fold(0.0f64, f64::max);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
    );
    for (i, row) in w.rows().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let t = if max > 0.0 { v / max } else { 0.0 };
            let shade = (255.0 * (1.0 - t)).round() as u8;
            let _ = writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},255)\"><title>{i},{j}: {v:?}</title></rect>",
                j * cell,
                i * cell
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn parameter_heatmap(c: &IqpCircuit) -> (String, String) {
    let w = extract_weights(c);
    (heatmap_csv(&w), heatmap_svg(&w))
}

/// Mean `|θ|` of the gates of each order, index 0 unused.
pub fn mean_magnitude_by_order(c: &IqpCircuit) -> Vec<f64> {
    let max = c.generators().iter().map(|g| g.order()).max().unwrap_or(0);
    let mut sum = vec![0.0; max + 1];
    let mut cnt = vec![0usize; max + 1];
    for (g, t) in c.gates() {
        sum[g.order()] += t.abs();
        cnt[g.order()] += 1;
    }
    sum.iter().zip(&cnt).map(|(s, &k)| if k > 0 { s / k as f64 } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Generator;

    #[test]
    fn histogram_of_zero_strings() {
        let h = hw_histogram(&[0u64; 100], 16).unwrap();
        assert_eq!(h.mass_in_range(0, 5), 1.0);
        assert_eq!(h.mean(), 0.0);
        assert!(hw_histogram(&[], 4).is_err());
        assert!(hw_histogram(&[0b11111], 4).is_err());
        assert_eq!(h.to_csv().lines().count(), 18);
    }

    #[test]
    fn uniform_bias_report() {
        let r = BiasReport::from_frequencies(vec![0.125; 8]).unwrap();
        assert_eq!(r.std, 0.0);
        assert_eq!(r.max_min_ratio, 1.0);
        assert_eq!(r.total_deviation, 0.0);
    }

    #[test]
    fn two_pattern_toy() {
        let d = BornDistribution::new(2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        // 00, 01, 10 -> pattern 0 (ties low); 11 -> pattern 1
        let r = BiasReport::from_distribution(&d, &[0b00, 0b11]).unwrap();
        assert!((r.frequencies[0] - 0.6).abs() < 1e-15);
        assert!((r.frequencies[1] - 0.4).abs() < 1e-15);
        assert!((r.std - 0.1).abs() < 1e-15);
        assert!((r.max_min_ratio - 1.5).abs() < 1e-15);
        assert!((r.total_deviation - 0.2).abs() < 1e-15);
        let s = BiasReport::from_samples(&[0b00, 0b11, 0b11, 0b01], &[0b00, 0b11]).unwrap();
        assert_eq!(s.frequencies, vec![0.5, 0.5]);
    }

    #[test]
    fn overhead_closed_form() {
        let r = overhead_report(&[16], &[1, 3, 5, 7]).unwrap();
        let pct: Vec<f64> = r.rows.iter().map(|r| r.overhead_percent).collect();
        assert_eq!(r.rows[0].base_params, 14_892);
        assert_eq!(r.rows[0].controller_params, 45);
        for (got, want) in pct.iter().zip([0.302, 0.91, 1.51, 2.12]) {
            assert!((got - want).abs() < 0.005, "{got} vs {want}");
        }
        let r25 = overhead_report(&[25], &[7]).unwrap();
        assert_eq!(r25.rows[0].base_params, 245_505);
        assert_eq!(r25.rows[0].controller_params, 504);
        assert!(r25.rows[0].overhead_percent < 1.5);
        assert!(overhead_report(&[3], &[1]).is_err());
        assert!(r.to_csv().contains("\n16,14892,1,45,0.3022\n"));
    }

    #[test]
    fn heatmap_of_single_pair() {
        let c = IqpCircuit::new(8, vec![Generator::pair(3, 7)], vec![0.5]).unwrap();
        let (csv, svg) = parameter_heatmap(&c);
        let cells: Vec<f64> = csv.lines().flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>()).collect();
        assert_eq!(cells.iter().filter(|v| **v != 0.0).count(), 2);
        assert_eq!(cells[3 * 8 + 7], 0.5);
        assert_eq!(cells[7 * 8 + 3], 0.5);
        assert_eq!(svg.matches("<rect").count(), 64);
        assert_eq!(svg.matches("rgb(0,0,255)").count(), 2);
        let zero = c.with_theta(vec![0.0]).unwrap();
        assert!(parameter_heatmap(&zero).0.split([',', '\n']).filter(|s| !s.is_empty()).all(|v| v == "0.0"));
    }
}
