//! Sample-based (equal-count) binning, bin assignment, reliability tables
//! and expected calibration error.
//!
//! Bin indices are zero-based throughout. A partition with `N` bins has
//! `N - 1` cut points; bin `i` covers `[b_{i-1}, b_i)` with the outermost
//! bins extended to `-inf` and `+inf`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of bins for every binned statistic.
pub const DEFAULT_BINS: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinPartition {
    boundaries: Vec<f64>,
    source_counts: Vec<usize>,
}

impl BinPartition {
    /// Rebuilds a partition from serialized parts.
    pub fn from_parts(boundaries: Vec<f64>, source_counts: Vec<usize>) -> Result<Self> {
        if source_counts.len() != boundaries.len() + 1 {
            return Err(Error::contract(format!(
                "{} boundaries need {} source counts, got {}",
                boundaries.len(),
                boundaries.len() + 1,
                source_counts.len()
            )));
        }
        if boundaries.windows(2).any(|w| w[0] > w[1]) || boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::contract("boundaries must be finite and non-decreasing"));
        }
        Ok(BinPartition {
            boundaries,
            source_counts,
        })
    }

    pub fn bin_count(&self) -> usize {
        self.source_counts.len()
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Bin sizes on the data the partition was fit on.
    pub fn source_counts(&self) -> &[usize] {
        &self.source_counts
    }

    /// Zero-based bin of `c` under the half-open interval rule.
    pub fn assign(&self, c: f64) -> usize {
        self.boundaries.partition_point(|&b| b <= c)
    }
}

fn check_unit(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(Error::contract(format!(
            "{what} at index {i} is {} (outside [0, 1])",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// Sorts by (confidence, original index) and cuts the stream into `bins`
/// runs whose sizes differ by at most one, larger runs first. Each cut
/// point sits midway between the neighbouring runs' edge confidences.
pub fn equal_count_partition(confidences: &[f64], bins: usize) -> Result<BinPartition> {
    if bins < 1 {
        return Err(Error::contract("bin count must be at least 1"));
    }
    if bins > confidences.len() {
        return Err(Error::contract(format!(
            "bin count {bins} exceeds sample count {}",
            confidences.len()
        )));
    }
    check_unit(confidences, "confidence")?;

    let mut sorted = confidences.to_vec();
    // total_cmp on finite values equals numeric order; stable sort keeps index order on ties
    sorted.sort_by(f64::total_cmp);

    let n = sorted.len();
    let (base, extra) = (n / bins, n % bins);
    let source_counts: Vec<usize> = (0..bins).map(|i| base + usize::from(i < extra)).collect();

    let mut boundaries = Vec::with_capacity(bins - 1);
    let mut end = 0;
    for &count in &source_counts[..bins - 1] {
        end += count;
        let (last, first) = (sorted[end - 1], sorted[end]);
        let mid = last + (first - last) / 2.0;
        // adjacent doubles can round the midpoint down onto `last`
        boundaries.push(if mid > last { mid } else { first });
    }
    Ok(BinPartition {
        boundaries,
        source_counts,
    })
}

/// Zero-based bin index of `c`.
pub fn assign_bin(partition: &BinPartition, c: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::contract(format!("confidence {c} outside [0, 1]")));
    }
    Ok(partition.assign(c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub bin: usize,
    pub count: usize,
    /// Absent for bins with no members.
    pub mean_conf: Option<f64>,
    pub mean_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityTable {
    pub rows: Vec<ReliabilityRow>,
}

impl ReliabilityTable {
    pub fn total(&self) -> usize {
        self.rows.iter().map(|r| r.count).sum()
    }

    /// Spearman rank correlation between bin index and bin accuracy over
    /// the nonempty bins. `None` with fewer than two nonempty bins or when
    /// bin accuracy is constant.
    pub fn monotonicity(&self) -> Option<f64> {
        let accs: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter_map(|r| r.mean_acc.map(|a| (r.bin as f64, a)))
            .collect();
        if accs.len() < 2 {
            return None;
        }
        let x: Vec<f64> = accs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = accs.iter().map(|p| p.1).collect();
        pearson(&average_ranks(&x), &average_ranks(&y))
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["bin", "count", "mean_conf", "mean_acc"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for row in &self.rows {
            writer.write_record([
                row.bin.to_string(),
                row.count.to_string(),
                opt(row.mean_conf),
                opt(row.mean_acc),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

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
        let rank = (i + j) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

fn check_pairs(confidences: &[f64], outcomes: &[f64]) -> Result<()> {
    if confidences.len() != outcomes.len() {
        return Err(Error::contract(format!(
            "misaligned lengths: {} confidences, {} outcomes",
            confidences.len(),
            outcomes.len()
        )));
    }
    if confidences.is_empty() {
        return Err(Error::contract("no samples"));
    }
    check_unit(confidences, "confidence")?;
    check_unit(outcomes, "outcome")
}

/// Per-bin sums of (count, confidence, outcome), accumulated in ascending
/// sample order.
fn bin_sums(
    confidences: &[f64],
    outcomes: &[f64],
    bins: usize,
    assign: impl Fn(f64) -> usize,
) -> Vec<(usize, f64, f64)> {
    let mut sums = vec![(0usize, 0.0, 0.0); bins];
    for (&c, &v) in confidences.iter().zip(outcomes) {
        let s = &mut sums[assign(c)];
        s.0 += 1;
        s.1 += c;
        s.2 += v;
    }
    sums
}

fn table_from_sums(sums: Vec<(usize, f64, f64)>) -> ReliabilityTable {
    let rows = sums
        .into_iter()
        .enumerate()
        .map(|(bin, (count, sc, sv))| {
            let mean = |s: f64| (count > 0).then(|| s / count as f64);
            ReliabilityRow {
                bin,
                count,
                mean_conf: mean(sc),
                mean_acc: mean(sv),
            }
        })
        .collect();
    ReliabilityTable { rows }
}

fn ece_from_table(table: &ReliabilityTable) -> f64 {
    let n = table.total() as f64;
    table
        .rows
        .iter()
        .filter_map(|r| match (r.mean_conf, r.mean_acc) {
            (Some(c), Some(v)) => Some(r.count as f64 / n * (c - v).abs()),
            _ => None,
        })
        .sum()
}

/// Per-bin mean confidence and mean verifier value of the evaluated data.
pub fn reliability_stats(
    confidences: &[f64],
    outcomes: &[f64],
    partition: &BinPartition,
) -> Result<ReliabilityTable> {
    check_pairs(confidences, outcomes)?;
    Ok(table_from_sums(bin_sums(
        confidences,
        outcomes,
        partition.bin_count(),
        |c| partition.assign(c),
    )))
}

/// Expected calibration error; bin weights count the evaluated samples.
pub fn ece(confidences: &[f64], outcomes: &[f64], partition: &BinPartition) -> Result<f64> {
    Ok(ece_from_table(&reliability_stats(confidences, outcomes, partition)?))
}

/// Reliability table over `bins` equal-width intervals of `[0, 1]`.
pub fn reliability_stats_equal_width(
    confidences: &[f64],
    outcomes: &[f64],
    bins: usize,
) -> Result<ReliabilityTable> {
    if bins < 1 {
        return Err(Error::contract("bin count must be at least 1"));
    }
    check_pairs(confidences, outcomes)?;
    Ok(table_from_sums(bin_sums(confidences, outcomes, bins, |c| {
        ((c * bins as f64) as usize).min(bins - 1)
    })))
}

/// ECE over equal-width intervals; reporting only.
pub fn ece_equal_width(confidences: &[f64], outcomes: &[f64], bins: usize) -> Result<f64> {
    Ok(ece_from_table(&reliability_stats_equal_width(
        confidences,
        outcomes,
        bins,
    )?))
}
