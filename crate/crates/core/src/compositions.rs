//! Count tables and their compositional transforms.
//!
//! The usual preprocessing chain is
//! `filter_taxa -> filter_samples_by_depth -> add_pseudocount -> total_sum_scale -> clr_transform`,
//! followed by [`empirical_covariance`] on the clr data.
//!
//! The clr covariance relates to the covariance of the log absolute abundances
//! through the centering matrix `G = I - J/p`; for large `p` the two are treated
//! as interchangeable and `G` is never applied explicitly.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Layout of a count table on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    SamplesAsRows,
    TaxaAsRows,
}

/// Integer OTU counts, samples x taxa.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    values: DMatrix<u64>,
    sample_ids: Vec<String>,
    taxon_ids: Vec<String>,
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

impl CountMatrix {
    pub fn new(values: DMatrix<u64>, sample_ids: Vec<String>, taxon_ids: Vec<String>) -> Result<Self> {
        let (n, p) = values.shape();
        if p < 2 {
            return Err(Error::TooFewTaxa(p));
        }
        if n < 1 {
            return Err(Error::AllSamplesRemoved);
        }
        if sample_ids.len() != n || taxon_ids.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{n}x{p} counts with {} sample ids and {} taxon ids",
                sample_ids.len(),
                taxon_ids.len()
            )));
        }
        check_unique(&sample_ids)?;
        check_unique(&taxon_ids)?;
        Ok(Self { values, sample_ids, taxon_ids })
    }

    /// Builds a matrix with generated identifiers `S1..Sn` and `T1..Tp`.
    pub fn from_values(values: DMatrix<u64>) -> Result<Self> {
        let (n, p) = values.shape();
        let sample_ids = (1..=n).map(|i| format!("S{i}")).collect();
        let taxon_ids = (1..=p).map(|j| format!("T{j}")).collect();
        Self::new(values, sample_ids, taxon_ids)
    }

    pub fn values(&self) -> &DMatrix<u64> {
        &self.values
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn taxon_ids(&self) -> &[String] {
        &self.taxon_ids
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_taxa(&self) -> usize {
        self.values.ncols()
    }

    /// Row sums (sequencing depth per sample).
    pub fn depths(&self) -> Vec<u64> {
        self.values.row_iter().map(|r| r.iter().sum()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<u64> {
        self.values.column(j).iter().copied().collect()
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.values.map(|v| v as f64)
    }

    /// Keeps the given sample rows, in the given order.
    pub fn select_samples(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::AllSamplesRemoved);
        }
        let p = self.n_taxa();
        let values = DMatrix::from_fn(rows.len(), p, |i, j| self.values[(rows[i], j)]);
        let sample_ids = rows.iter().map(|&r| self.sample_ids[r].clone()).collect();
        Self::new(values, sample_ids, self.taxon_ids.clone())
    }

    /// Keeps the given taxon columns, in the given order.
    pub fn select_taxa(&self, cols: &[usize]) -> Result<Self> {
        if cols.len() < 2 {
            return Err(Error::TooFewTaxa(cols.len()));
        }
        let n = self.n_samples();
        let values = DMatrix::from_fn(n, cols.len(), |i, j| self.values[(i, cols[j])]);
        let taxon_ids = cols.iter().map(|&c| self.taxon_ids[c].clone()).collect();
        Self::new(values, self.sample_ids.clone(), taxon_ids)
    }
}

/// Relative abundances; every row sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionMatrix {
    values: DMatrix<f64>,
    taxon_ids: Vec<String>,
}

impl CompositionMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn taxon_ids(&self) -> &[String] {
        &self.taxon_ids
    }
}

/// Centered log-ratio coordinates; every row sums to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ClrMatrix {
    values: DMatrix<f64>,
    taxon_ids: Vec<String>,
}

impl ClrMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn taxon_ids(&self) -> &[String] {
        &self.taxon_ids
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_taxa(&self) -> usize {
        self.values.ncols()
    }

    /// Rows are samples, so subsampling keeps the clr invariant.
    pub fn select_samples(&self, rows: &[usize]) -> ClrMatrix {
        let p = self.values.ncols();
        ClrMatrix {
            values: DMatrix::from_fn(rows.len(), p, |i, j| self.values[(rows[i], j)]),
            taxon_ids: self.taxon_ids.clone(),
        }
    }
}

fn detect_delimiter(first_line: &str) -> u8 {
    if first_line.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn parse_count(cell: &str, row: usize, col: usize) -> Result<u64> {
    let cell = cell.trim();
    if let Ok(v) = cell.parse::<u64>() {
        return Ok(v);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() && v < 0.0 => Err(Error::NegativeCount { row, col, value: cell.to_string() }),
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(v as u64),
        Ok(_) => Err(Error::NonIntegerCount { row, col, value: cell.to_string() }),
        Err(_) if cell.starts_with('-') && cell[1..].parse::<u64>().is_ok() => {
            Err(Error::NegativeCount { row, col, value: cell.to_string() })
        }
        Err(_) => Err(Error::Malformed(format!("cannot parse {cell:?} at row {row}, column {col}"))),
    }
}

/// Parses a count table from text. The delimiter (tab or comma) is taken from the header line.
pub fn parse_count_table(text: &str, orientation: Orientation) -> Result<CountMatrix> {
    let first_line = text.lines().next().ok_or_else(|| Error::Malformed("empty table".into()))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(first_line))
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());

    let header = reader.headers().map_err(|e| Error::Malformed(e.to_string()))?.clone();
    if header.len() < 2 {
        return Err(Error::Malformed("header needs at least one column id".into()));
    }
    let col_ids: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();

    let mut row_ids = Vec::new();
    let mut cells = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Malformed(e.to_string()))?;
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        row_ids.push(record[0].trim().to_string());
        for (c, cell) in record.iter().skip(1).enumerate() {
            cells.push(parse_count(cell, r, c)?);
        }
    }
    if row_ids.is_empty() {
        return Err(Error::Malformed("table has no data rows".into()));
    }
    let table = DMatrix::from_row_slice(row_ids.len(), col_ids.len(), &cells);
    match orientation {
        Orientation::SamplesAsRows => CountMatrix::new(table, row_ids, col_ids),
        Orientation::TaxaAsRows => CountMatrix::new(table.transpose(), col_ids, row_ids),
    }
}

/// Reads a tab- or comma-separated count table with one header row and one id column.
pub fn load_count_table(path: impl AsRef<Path>, orientation: Orientation) -> Result<CountMatrix> {
    let path = path.as_ref();
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_count_table(&text, orientation)
}

/// Fraction of samples in which each taxon has a nonzero count.
pub fn presence_fractions(c: &CountMatrix) -> Vec<f64> {
    let n = c.n_samples() as f64;
    c.values
        .column_iter()
        .map(|col| col.iter().filter(|&&v| v > 0).count() as f64 / n)
        .collect()
}

/// Keeps taxa present (count > 0) in at least `min_presence_fraction` of the samples.
pub fn filter_taxa(c: &CountMatrix, min_presence_fraction: f64) -> Result<CountMatrix> {
    if !(min_presence_fraction > 0.0 && min_presence_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "presence fraction must lie in (0, 1], got {min_presence_fraction}"
        )));
    }
    let keep: Vec<usize> = presence_fractions(c)
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= min_presence_fraction)
        .map(|(j, _)| j)
        .collect();
    if keep.len() < 2 {
        return Err(Error::TooFewTaxa(keep.len()));
    }
    c.select_taxa(&keep)
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`, the R type-7 rule).
pub fn quantile_linear(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Drops samples whose sequencing depth falls below the given depth quantile.
/// Returns the filtered table and the threshold used.
pub fn filter_samples_by_depth(c: &CountMatrix, quantile: f64) -> Result<(CountMatrix, f64)> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::InvalidParameter(format!("depth quantile must lie in (0, 1), got {quantile}")));
    }
    let depths: Vec<f64> = c.depths().into_iter().map(|d| d as f64).collect();
    let threshold = quantile_linear(&depths, quantile);
    // Depths are integers, so the cut-off is the integer part of the interpolated quantile.
    let cutoff = threshold.floor();
    let keep: Vec<usize> = (0..depths.len()).filter(|&i| depths[i] >= cutoff).collect();
    if keep.is_empty() {
        return Err(Error::AllSamplesRemoved);
    }
    Ok((c.select_samples(&keep)?, threshold))
}

/// Rescales every sample to `target_depth` total reads, rounding half away from zero.
pub fn normalize_depth(c: &CountMatrix, target_depth: u64) -> Result<CountMatrix> {
    if target_depth == 0 {
        return Err(Error::InvalidParameter("target depth must be positive".into()));
    }
    let depths = c.depths();
    if let Some(i) = depths.iter().position(|&d| d == 0) {
        return Err(Error::ZeroDepth(i));
    }
    let mut values = c.values.clone();
    for (i, mut row) in values.row_iter_mut().enumerate() {
        let scale = target_depth as f64 / depths[i] as f64;
        for v in row.iter_mut() {
            *v = (*v as f64 * scale).round() as u64;
        }
    }
    CountMatrix::new(values, c.sample_ids.clone(), c.taxon_ids.clone())
}

/// Median sequencing depth, rounded to the nearest integer.
pub fn median_depth(c: &CountMatrix) -> u64 {
    let depths: Vec<f64> = c.depths().into_iter().map(|d| d as f64).collect();
    quantile_linear(&depths, 0.5).round() as u64
}

pub fn add_pseudocount(c: &CountMatrix, value: u64) -> Result<CountMatrix> {
    if value == 0 {
        return Err(Error::InvalidParameter("pseudocount must be positive".into()));
    }
    CountMatrix::new(c.values.map(|v| v + value), c.sample_ids.clone(), c.taxon_ids.clone())
}

/// Closes each sample to the unit simplex. All entries must already be positive.
pub fn total_sum_scale(c: &CountMatrix) -> Result<CompositionMatrix> {
    let depths = c.depths();
    if let Some(i) = depths.iter().position(|&d| d == 0) {
        return Err(Error::ZeroDepth(i));
    }
    if let Some(idx) = c.values.iter().position(|&v| v == 0) {
        let n = c.n_samples();
        return Err(Error::NonPositive { row: idx % n, col: idx / n, value: 0.0 });
    }
    let mut values = c.to_f64();
    for (i, mut row) in values.row_iter_mut().enumerate() {
        row /= depths[i] as f64;
    }
    Ok(CompositionMatrix { values, taxon_ids: c.taxon_ids.clone() })
}

fn clr_rows(values: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = values.nrows();
    if let Some(idx) = values.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonPositive { row: idx % n, col: idx / n, value: values[idx] });
    }
    let mut out = values.map(f64::ln);
    for mut row in out.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    Ok(out)
}

/// `z_ij = log x_ij - mean_k log x_ik`.
pub fn clr_transform(x: &CompositionMatrix) -> Result<ClrMatrix> {
    Ok(ClrMatrix { values: clr_rows(&x.values)?, taxon_ids: x.taxon_ids.clone() })
}

/// clr computed straight from positive counts; equals the clr of their compositions.
pub fn clr_counts(c: &CountMatrix) -> Result<ClrMatrix> {
    Ok(ClrMatrix { values: clr_rows(&c.to_f64())?, taxon_ids: c.taxon_ids.clone() })
}

/// Pseudocount, closure and clr in one step.
pub fn clr_from_counts(c: &CountMatrix, pseudocount: u64) -> Result<ClrMatrix> {
    clr_transform(&total_sum_scale(&add_pseudocount(c, pseudocount)?)?)
}

/// Wraps an arbitrary real data matrix (e.g. log counts) so it can feed the inference routines.
pub fn clr_matrix_unchecked(values: DMatrix<f64>, taxon_ids: Vec<String>) -> ClrMatrix {
    ClrMatrix { values, taxon_ids }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    Covariance,
    Correlation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub kind: CovarianceKind,
}

/// Sample covariance (1/(n-1)) of clr data, or its rescaling to unit diagonal.
pub fn empirical_covariance(z: &ClrMatrix, kind: CovarianceKind) -> Result<CovarianceEstimate> {
    covariance_of(&z.values, kind)
}

pub fn covariance_of(data: &DMatrix<f64>, kind: CovarianceKind) -> Result<CovarianceEstimate> {
    if data.nrows() < 2 {
        return Err(Error::Degenerate("covariance needs at least two samples".into()));
    }
    let cov = linalg::sample_covariance(data);
    let matrix = match kind {
        CovarianceKind::Covariance => cov,
        CovarianceKind::Correlation => {
            if let Some(j) = linalg::constant_column(data) {
                return Err(Error::ConstantColumn(j));
            }
            linalg::cov_to_cor(&cov)
        }
    };
    Ok(CovarianceEstimate { matrix, kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn counts(rows: &[&[u64]]) -> CountMatrix {
        let n = rows.len();
        let p = rows[0].len();
        let flat: Vec<u64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        CountMatrix::from_values(DMatrix::from_row_slice(n, p, &flat)).unwrap()
    }

    #[test]
    fn parses_tsv() {
        let c = parse_count_table("id\ta\tb\ns1\t1\t2\ns2\t3\t4\ns3\t0\t5\n", Orientation::SamplesAsRows).unwrap();
        assert_eq!((c.n_samples(), c.n_taxa()), (3, 2));
        assert_eq!(c.values()[(1, 0)], 3);
        assert_eq!(c.taxon_ids(), &["a", "b"]);
    }

    #[test]
    fn parses_transposed_csv() {
        let c = parse_count_table("taxon,s1,s2,s3\na,1,3,0\nb,2,4,5\n", Orientation::TaxaAsRows).unwrap();
        assert_eq!((c.n_samples(), c.n_taxa()), (3, 2));
        assert_eq!(c.values()[(2, 1)], 5);
        assert_eq!(c.sample_ids(), &["s1", "s2", "s3"]);
    }

    #[test]
    fn rejects_bad_cells() {
        let neg = parse_count_table("id\ta\tb\ns1\t-1\t2\n", Orientation::SamplesAsRows);
        assert!(matches!(neg, Err(Error::NegativeCount { .. })));
        let frac = parse_count_table("id\ta\tb\ns1\t2.5\t2\n", Orientation::SamplesAsRows);
        assert!(matches!(frac, Err(Error::NonIntegerCount { .. })));
        let junk = parse_count_table("id\ta\tb\ns1\tx\t2\n", Orientation::SamplesAsRows);
        assert!(matches!(junk, Err(Error::Malformed(_))));
        let dup = parse_count_table("id\ta\ta\ns1\t1\t2\n", Orientation::SamplesAsRows);
        assert!(matches!(dup, Err(Error::DuplicateId(_))));
        let narrow = parse_count_table("id\ta\ns1\t1\n", Orientation::SamplesAsRows);
        assert!(matches!(narrow, Err(Error::TooFewTaxa(1))));
        let ragged = parse_count_table("id\ta\tb\ns1\t1\n", Orientation::SamplesAsRows);
        assert!(matches!(ragged, Err(Error::Malformed(_))));
    }

    #[test]
    fn filter_taxa_threshold() {
        // presence: a = 4/10, b = 10/10, c = 3/10
        let mut rows = vec![[0u64, 1, 0]; 10];
        for r in rows.iter_mut().take(4) {
            r[0] = 5;
        }
        for r in rows.iter_mut().skip(7) {
            r[2] = 1;
        }
        let refs: Vec<&[u64]> = rows.iter().map(|r| &r[..]).collect();
        let c = counts(&refs);
        let f = filter_taxa(&c, 0.37).unwrap();
        assert_eq!(f.taxon_ids(), &["T1", "T2"]);
        assert_eq!(filter_taxa(&f, 0.37).unwrap(), f);
        assert!(matches!(filter_taxa(&c, 0.41), Err(Error::TooFewTaxa(1))));
        assert!(matches!(filter_taxa(&c, 1.01), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn depth_filter_uses_linear_quantile() {
        let c = counts(&[&[5, 5], &[10, 10], &[15, 15], &[20, 20]]);
        let (f, thr) = filter_samples_by_depth(&c, 0.25).unwrap();
        assert_abs_diff_eq!(thr, 17.5, epsilon = 1e-12);
        assert_eq!(f.sample_ids(), &["S2", "S3", "S4"]);

        let (f, _) = filter_samples_by_depth(&c, 1e-9).unwrap();
        assert_eq!(f.n_samples(), 4);
        let flat = counts(&[&[3, 3], &[2, 4], &[6, 0]]);
        assert_eq!(filter_samples_by_depth(&flat, 0.9).unwrap().0.n_samples(), 3);
    }

    #[test]
    fn depth_normalisation_rounding() {
        let c = counts(&[&[2, 2, 0], &[1, 2, 0]]);
        let a = normalize_depth(&c, 8).unwrap();
        assert_eq!(a.values().row(0).iter().copied().collect::<Vec<_>>(), vec![4, 4, 0]);
        let b = normalize_depth(&c, 6).unwrap();
        assert_eq!(b.values().row(1).iter().copied().collect::<Vec<_>>(), vec![2, 4, 0]);
        let c3 = counts(&[&[1, 1, 1]]);
        let d = normalize_depth(&c3, 4).unwrap();
        assert_eq!(d.values().row(0).iter().copied().collect::<Vec<_>>(), vec![1, 1, 1]);
        // 1 * 5/2 = 2.5 rounds away from zero
        let e = normalize_depth(&counts(&[&[1, 1]]), 5).unwrap();
        assert_eq!(e.values()[(0, 0)], 3);
        assert!(matches!(normalize_depth(&counts(&[&[0, 0]]), 5), Err(Error::ZeroDepth(0))));
    }

    #[test]
    fn pseudocount_and_closure() {
        let c = counts(&[&[0, 7]]);
        let one = add_pseudocount(&c, 1).unwrap();
        assert_eq!(one.values()[(0, 0)], 1);
        assert_eq!(one.values()[(0, 1)], 8);
        assert_eq!(add_pseudocount(&c, 2).unwrap().values()[(0, 0)], 2);

        let x = total_sum_scale(&counts(&[&[1, 1, 2]])).unwrap();
        assert_abs_diff_eq!(x.values()[(0, 2)], 0.5);
        let y = total_sum_scale(&counts(&[&[3, 1]])).unwrap();
        assert_abs_diff_eq!(y.values()[(0, 0)], 0.75);
        assert!(total_sum_scale(&c).is_err());
        assert!(matches!(
            CountMatrix::from_values(DMatrix::from_row_slice(1, 1, &[5])),
            Err(Error::TooFewTaxa(1))
        ));
    }

    #[test]
    fn clr_values() {
        let x = total_sum_scale(&counts(&[&[1, 1, 2], &[3, 3, 3]])).unwrap();
        let z = clr_transform(&x).unwrap();
        let l2 = std::f64::consts::LN_2;
        assert_abs_diff_eq!(z.values()[(0, 0)], -l2 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z.values()[(0, 2)], 2.0 * l2 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z.values()[(0, 0)], -0.2310, epsilon = 5e-5);
        assert_abs_diff_eq!(z.values()[(0, 2)], 0.4621, epsilon = 5e-5);
        for j in 0..3 {
            assert_abs_diff_eq!(z.values()[(1, j)], 0.0, epsilon = 1e-15);
        }

        let w = counts(&[&[4, 9, 1], &[2, 2, 7]]);
        let via_counts = clr_counts(&w).unwrap();
        let via_comp = clr_transform(&total_sum_scale(&w).unwrap()).unwrap();
        assert_abs_diff_eq!(via_counts.values(), via_comp.values(), epsilon = 1e-12);
    }

    #[test]
    fn covariance_hand_example() {
        // columns (1,2,3), (2,4,9): means 2, 5; cov = [[1, 3.5], [3.5, 13]]
        let data = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 9.0]);
        let z = clr_matrix_unchecked(data, vec!["a".into(), "b".into()]);
        let cov = empirical_covariance(&z, CovarianceKind::Covariance).unwrap();
        assert_abs_diff_eq!(cov.matrix[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cov.matrix[(0, 1)], 3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cov.matrix[(1, 1)], 13.0, epsilon = 1e-12);

        let cor = empirical_covariance(&z, CovarianceKind::Correlation).unwrap();
        assert_abs_diff_eq!(cor.matrix[(0, 1)], 3.5 / 13f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn correlation_signs_and_constant_columns() {
        let data = DMatrix::from_row_slice(4, 3, &[1.0, 1.0, -1.0, 2.0, 2.0, -2.0, 5.0, 5.0, -5.0, 3.0, 3.0, -3.0]);
        let z = clr_matrix_unchecked(data, vec!["a".into(), "b".into(), "c".into()]);
        let cor = empirical_covariance(&z, CovarianceKind::Correlation).unwrap();
        assert_abs_diff_eq!(cor.matrix[(0, 1)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cor.matrix[(0, 2)], -1.0, epsilon = 1e-12);

        let flat = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 3.0, 1.0, 7.0]);
        let z = clr_matrix_unchecked(flat, vec!["a".into(), "b".into()]);
        assert!(matches!(empirical_covariance(&z, CovarianceKind::Correlation), Err(Error::ConstantColumn(0))));
        assert!(empirical_covariance(&z, CovarianceKind::Covariance).is_ok());
    }

    fn arb_counts() -> impl Strategy<Value = CountMatrix> {
        (2usize..7, 2usize..7).prop_flat_map(|(n, p)| {
            proptest::collection::vec(0u64..500, n * p)
                .prop_map(move |v| CountMatrix::from_values(DMatrix::from_row_slice(n, p, &v)).unwrap())
        })
    }

    proptest! {
        #[test]
        fn clr_ignores_sample_scaling(c in arb_counts(), scales in proptest::collection::vec(1u64..50, 6)) {
            let w = add_pseudocount(&c, 1).unwrap();
            let mut scaled = w.values().clone();
            for (i, mut row) in scaled.row_iter_mut().enumerate() {
                row *= scales[i];
            }
            let scaled = CountMatrix::from_values(scaled).unwrap();
            let a = clr_transform(&total_sum_scale(&w).unwrap()).unwrap();
            let b = clr_transform(&total_sum_scale(&scaled).unwrap()).unwrap();
            prop_assert!((a.values() - b.values()).abs().max() < 1e-9);
        }

        #[test]
        fn closure_and_clr_row_sums(c in arb_counts()) {
            let x = total_sum_scale(&add_pseudocount(&c, 1).unwrap()).unwrap();
            for row in x.values().row_iter() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            }
            let z = clr_transform(&x).unwrap();
            for row in z.values().row_iter() {
                prop_assert!(row.sum().abs() < 1e-9);
            }
            let cov = empirical_covariance(&z, CovarianceKind::Covariance).unwrap().matrix;
            let scale = cov.abs().max().max(1.0);
            for row in cov.row_iter() {
                prop_assert!(row.sum().abs() < 1e-9 * scale);
            }
        }

        #[test]
        fn correlation_is_bounded_with_unit_diagonal(c in arb_counts()) {
            let z = clr_from_counts(&c, 1).unwrap();
            if let Ok(cor) = empirical_covariance(&z, CovarianceKind::Correlation) {
                for i in 0..cor.matrix.nrows() {
                    prop_assert_eq!(cor.matrix[(i, i)], 1.0);
                }
                prop_assert!(cor.matrix.iter().all(|v| (-1.0..=1.0).contains(v)));
            }
        }

        #[test]
        fn taxon_filter_is_idempotent(c in arb_counts(), threshold in 0.0f64..1.0) {
            if let Ok(once) = filter_taxa(&c, threshold) {
                prop_assert_eq!(filter_taxa(&once, threshold).unwrap(), once);
            }
        }
    }
}
