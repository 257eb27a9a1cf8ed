//! Disparity error metrics and histogram diagnostics.
//!
//! Everything is accumulated as integer counts and float sums so frames can
//! be evaluated independently and merged with pixel weighting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DisparityMap, Mask};
use crate::placement::{bin_of, DisparityTarget};

/// Bad-pixel thresholds reported by default, in table order.
pub const DEFAULT_TAUS: [f64; 3] = [1.0, 2.0, 4.0];

/// KITTI outlier rule: absolute error above 3 px and above 5% of the truth.
pub fn is_d1_outlier(pred: f64, gt: f64) -> bool {
    let e = (pred - gt).abs();
    e > 3.0 && e > 0.05 * gt.abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadEntry {
    pub tau: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub avgerr: f64,
    pub rms: f64,
    /// Sorted by ascending threshold.
    pub bad: Vec<BadEntry>,
    pub d1_all: f64,
    pub pixel_count: u64,
}

impl MetricsReport {
    pub fn bad_at(&self, tau: f64) -> Option<f64> {
        self.bad.iter().find(|b| b.tau == tau).map(|b| b.percent)
    }

    /// Column headers in table order.
    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["avgerr".to_string(), "rms".to_string()];
        cols.extend(self.bad.iter().map(|b| format!("bad-{:.1}", b.tau)));
        cols.push("D1-all".into());
        cols.push("pixels".into());
        cols
    }

    pub fn row(&self) -> Vec<String> {
        let mut cols = vec![format!("{:.3}", self.avgerr), format!("{:.3}", self.rms)];
        cols.extend(self.bad.iter().map(|b| format!("{:.3}", b.percent)));
        cols.push(format!("{:.3}", self.d1_all));
        cols.push(self.pixel_count.to_string());
        cols
    }

    fn assert_consistent(&self) {
        assert!(
            self.rms >= self.avgerr * (1.0 - 1e-12),
            "rms {} below avgerr {}",
            self.rms,
            self.avgerr
        );
        for w in self.bad.windows(2) {
            assert!(w[0].percent >= w[1].percent, "bad-tau not monotone: {:?}", self.bad);
        }
        for p in self.bad.iter().map(|b| b.percent).chain([self.d1_all]) {
            assert!((0.0..=100.0).contains(&p));
        }
    }
}

/// Renders labelled rows as an aligned plain-text table.
pub fn format_table(rows: &[(String, MetricsReport)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let mut lines: Vec<Vec<String>> = vec![std::iter::once("frame".to_string()).chain(first.header()).collect()];
    for (label, r) in rows {
        lines.push(std::iter::once(label.clone()).chain(r.row()).collect());
    }
    let ncol = lines[0].len();
    let widths: Vec<usize> = (0..ncol)
        .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for l in &lines {
        let cells: Vec<String> = l
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn check_shapes(pred: &DisparityMap, gt: &DisparityMap, mask: Option<&Mask>) -> Result<()> {
    if !pred.same_shape(gt) {
        return Err(Error::ShapeMismatch(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    if let Some(m) = mask {
        if (m.width, m.height) != (gt.width, gt.height) {
            return Err(Error::ShapeMismatch(format!(
                "mask is {}x{}, ground truth is {}x{}",
                m.width, m.height, gt.width, gt.height
            )));
        }
    }
    Ok(())
}

/// Running sums for one evaluation; merge across frames, then `finish`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsAccumulator {
    taus: Vec<f64>,
    count: u64,
    sum_abs: f64,
    sum_sq: f64,
    bad: Vec<u64>,
    d1: u64,
}

impl Default for MetricsAccumulator {
    fn default() -> Self {
        Self::new(&DEFAULT_TAUS)
    }
}

impl MetricsAccumulator {
    pub fn new(taus: &[f64]) -> Self {
        let mut taus = taus.to_vec();
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        Self {
            bad: vec![0; taus.len()],
            taus,
            count: 0,
            sum_abs: 0.0,
            sum_sq: 0.0,
            d1: 0,
        }
    }

    /// Adds the pixels selected by `mask` (all pixels when `None`).
    pub fn add(&mut self, pred: &DisparityMap, gt: &DisparityMap, mask: Option<&Mask>) -> Result<()> {
        check_shapes(pred, gt, mask)?;
        for i in 0..gt.data.len() {
            if mask.is_some_and(|m| m.data[i] == 0) {
                continue;
            }
            let (p, g) = (pred.data[i] as f64, gt.data[i] as f64);
            let e = (p - g).abs();
            self.count += 1;
            self.sum_abs += e;
            self.sum_sq += e * e;
            for (k, &tau) in self.taus.iter().enumerate() {
                self.bad[k] += (e > tau) as u64;
            }
            self.d1 += is_d1_outlier(p, g) as u64;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        assert_eq!(self.taus, other.taus, "merging accumulators with different thresholds");
        self.count += other.count;
        self.sum_abs += other.sum_abs;
        self.sum_sq += other.sum_sq;
        self.d1 += other.d1;
        for (a, b) in self.bad.iter_mut().zip(&other.bad) {
            *a += b;
        }
    }

    pub fn pixel_count(&self) -> u64 {
        self.count
    }

    pub fn finish(&self) -> Result<MetricsReport> {
        if self.count == 0 {
            return Err(Error::EmptyEvaluation);
        }
        let n = self.count as f64;
        let pct = |c: u64| 100.0 * c as f64 / n;
        let avgerr = self.sum_abs / n;
        let report = MetricsReport {
            avgerr,
            rms: (self.sum_sq / n).sqrt(),
            bad: self
                .taus
                .iter()
                .zip(&self.bad)
                .map(|(&tau, &c)| BadEntry { tau, percent: pct(c) })
                .collect(),
            d1_all: pct(self.d1),
            pixel_count: self.count,
        };
        report.assert_consistent();
        Ok(report)
    }
}

pub fn evaluate(pred: &DisparityMap, gt: &DisparityMap, mask: Option<&Mask>, taus: &[f64]) -> Result<MetricsReport> {
    let mut acc = MetricsAccumulator::new(taus);
    acc.add(pred, gt, mask)?;
    acc.finish()
}

/// Percentage of evaluated pixels whose absolute error is strictly above `tau`.
pub fn bad_tau(pred: &DisparityMap, gt: &DisparityMap, mask: Option<&Mask>, tau: f64) -> Result<f64> {
    Ok(evaluate(pred, gt, mask, &[tau])?.bad[0].percent)
}

pub fn avgerr(pred: &DisparityMap, gt: &DisparityMap, mask: Option<&Mask>) -> Result<f64> {
    Ok(evaluate(pred, gt, mask, &[])?.avgerr)
}

pub fn rms(pred: &DisparityMap, gt: &DisparityMap, mask: Option<&Mask>) -> Result<f64> {
    Ok(evaluate(pred, gt, mask, &[])?.rms)
}

pub fn d1_all(pred: &DisparityMap, gt: &DisparityMap, mask: Option<&Mask>) -> Result<f64> {
    Ok(evaluate(pred, gt, mask, &[])?.d1_all)
}

/// Normalized disparity histogram. Pixels outside the edges land in `overflow`;
/// `mass` and `overflow` together sum to 1 when any pixel was counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
    pub overflow: f64,
    pub pixel_count: u64,
}

impl From<&DisparityTarget> for Histogram {
    fn from(t: &DisparityTarget) -> Self {
        Self {
            edges: t.bin_edges.clone(),
            mass: t.mass.clone(),
            overflow: 0.0,
            pixel_count: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramAccumulator {
    edges: Vec<f64>,
    counts: Vec<u64>,
    overflow: u64,
}

impl HistogramAccumulator {
    pub fn new(edges: &[f64]) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParam("histogram edges must ascend strictly".into()));
        }
        Ok(Self {
            edges: edges.to_vec(),
            counts: vec![0; edges.len() - 1],
            overflow: 0,
        })
    }

    pub fn add(&mut self, disp: &DisparityMap, mask: Option<&Mask>) -> Result<()> {
        if let Some(m) = mask {
            if (m.width, m.height) != (disp.width, disp.height) {
                return Err(Error::ShapeMismatch(format!(
                    "mask is {}x{}, disparity is {}x{}",
                    m.width, m.height, disp.width, disp.height
                )));
            }
        }
        for (i, &d) in disp.data.iter().enumerate() {
            if mask.is_some_and(|m| m.data[i] == 0) {
                continue;
            }
            match bin_of(&self.edges, d as f64) {
                Some(b) => self.counts[b] += 1,
                None => self.overflow += 1,
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &HistogramAccumulator) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::BinMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        Ok(())
    }

    pub fn counts(&self) -> (&[u64], u64) {
        (&self.counts, self.overflow)
    }

    pub fn finish(&self) -> Histogram {
        let total = self.counts.iter().sum::<u64>() + self.overflow;
        let norm = |c: u64| if total == 0 { 0.0 } else { c as f64 / total as f64 };
        Histogram {
            edges: self.edges.clone(),
            mass: self.counts.iter().map(|&c| norm(c)).collect(),
            overflow: norm(self.overflow),
            pixel_count: total,
        }
    }
}

pub fn disparity_histogram(disp: &DisparityMap, mask: Option<&Mask>, bin_edges: &[f64]) -> Result<Histogram> {
    let mut acc = HistogramAccumulator::new(bin_edges)?;
    acc.add(disp, mask)?;
    Ok(acc.finish())
}

/// L1 distance between two histograms over identical edges, in `[0, 2]`.
/// Overflow mass counts as its own bin.
pub fn histogram_l1(h1: &Histogram, h2: &Histogram) -> Result<f64> {
    if h1.edges != h2.edges || h1.mass.len() != h2.mass.len() {
        return Err(Error::BinMismatch);
    }
    let bins: f64 = h1.mass.iter().zip(&h2.mass).map(|(a, b)| (a - b).abs()).sum();
    Ok(bins + (h1.overflow - h2.overflow).abs())
}
