//! Regression data containers and the acceptability (identifiability) check.
//!
//! A [`Dataset`] holds the empirical distribution: an N×p regressor matrix, a
//! response vector, column names, and optional nonnegative case weights stored
//! mean-normalized (mean 1) so weighted empirical means read as `Ê[w·g]`.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::path::Path;

/// Relative singular-value threshold below which regressors are declared collinear.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Tolerance on `|mean(w) - 1|` for stored case weights.
pub const WEIGHT_MEAN_TOLERANCE: f64 = 1e-12;

/// Outcome of the identifiability check on a regressor matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acceptability {
    Acceptable,
    Collinear,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    regressors: DMatrix<f64>,
    response: DVector<f64>,
    column_names: Vec<String>,
    case_weights: Option<DVector<f64>>,
}

impl Dataset {
    /// Build a dataset, validating shapes and finiteness.
    pub fn new(
        regressors: DMatrix<f64>,
        response: DVector<f64>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = regressors.shape();
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput("need N >= 1 and p >= 1".into()));
        }
        if response.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: response.len() });
        }
        if column_names.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: column_names.len() });
        }
        if regressors.iter().any(|v| !v.is_finite()) || response.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry in dataset".into()));
        }
        Ok(Self { regressors, response, column_names, case_weights: None })
    }

    /// Attach nonnegative case weights, rescaled to mean 1.
    pub fn with_weights(mut self, weights: DVector<f64>) -> Result<Self> {
        if weights.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("case weights must be finite and nonnegative".into()));
        }
        let mean = weights.mean();
        if mean <= 0.0 {
            return Err(Error::InvalidInput("case weights sum to zero".into()));
        }
        self.case_weights = Some(weights / mean);
        Ok(self)
    }

    /// Attach possibly signed weights with mean 1, bypassing the nonnegativity
    /// invariant. Used for mixture-derivative probes such as the contamination
    /// finite difference `(1-t)·P̂ + t·δ`, where a central difference needs a
    /// small negative mass. Not intended for ordinary fitting.
    pub fn with_weights_signed(mut self, weights: DVector<f64>) -> Result<Self> {
        if weights.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("case weights must be finite".into()));
        }
        if (weights.mean() - 1.0).abs() > WEIGHT_MEAN_TOLERANCE {
            return Err(Error::InvalidInput("signed case weights must have mean 1".into()));
        }
        self.case_weights = Some(weights);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.regressors.nrows()
    }

    pub fn p(&self) -> usize {
        self.regressors.ncols()
    }

    pub fn regressors(&self) -> &DMatrix<f64> {
        &self.regressors
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn weights(&self) -> Option<&DVector<f64>> {
        self.case_weights.as_ref()
    }

    /// Weight of case `i` (1 when no weights are attached).
    pub fn weight(&self, i: usize) -> f64 {
        self.case_weights.as_ref().map_or(1.0, |w| w[i])
    }

    /// Index of a regressor column by name.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// Append one case, keeping any weights untouched is not supported;
    /// returns an unweighted dataset of N+1 rows.
    pub fn with_appended_case(&self, x: &DVector<f64>, y: f64) -> Result<Dataset> {
        if x.len() != self.p() {
            return Err(Error::DimensionMismatch { expected: self.p(), got: x.len() });
        }
        let n = self.n();
        let mut reg = DMatrix::zeros(n + 1, self.p());
        reg.view_mut((0, 0), (n, self.p())).copy_from(&self.regressors);
        for j in 0..self.p() {
            reg[(n, j)] = x[j];
        }
        let mut resp = DVector::zeros(n + 1);
        resp.rows_mut(0, n).copy_from(&self.response);
        resp[n] = y;
        Dataset::new(reg, resp, self.column_names.clone())
    }

    /// Identifiability of the raw regressor matrix (weights are ignored here;
    /// resampling paths use [`Dataset::weighted_acceptability`]).
    pub fn acceptability(&self) -> Acceptability {
        acceptability_of(&self.regressors)
    }

    /// Identifiability of the weight-scaled design: rows are scaled by
    /// `sqrt(w_i)` so zero-weight cases do not count toward rank.
    pub fn weighted_acceptability(&self) -> Acceptability {
        match &self.case_weights {
            None => self.acceptability(),
            Some(w) => {
                let mut scaled = self.regressors.clone();
                for i in 0..self.n() {
                    let s = w[i].max(0.0).sqrt();
                    for j in 0..self.p() {
                        scaled[(i, j)] *= s;
                    }
                }
                acceptability_of(&scaled)
            }
        }
    }

    /// Weighted empirical second moment `Ê[w·xx']` (p×p).
    pub fn weighted_gram(&self) -> DMatrix<f64> {
        let n = self.n() as f64;
        let mut gram = DMatrix::zeros(self.p(), self.p());
        for i in 0..self.n() {
            let w = self.weight(i);
            let xi = self.regressors.row(i);
            for a in 0..self.p() {
                for b in 0..self.p() {
                    gram[(a, b)] += w * xi[a] * xi[b];
                }
            }
        }
        gram / n
    }

    /// Weighted empirical cross moment `Ê[w·xy]` (length p).
    pub fn weighted_xy(&self) -> DVector<f64> {
        let n = self.n() as f64;
        let mut v = DVector::zeros(self.p());
        for i in 0..self.n() {
            let w = self.weight(i);
            let xi = self.regressors.row(i);
            for a in 0..self.p() {
                v[a] += w * xi[a] * self.response[i];
            }
        }
        v / n
    }

    /// Read a dataset from CSV: first row is the header, `response_column`
    /// names the response, remaining columns become regressors in file order.
    /// Missing or non-numeric values are rejected.
    pub fn from_csv<P: AsRef<Path>>(path: P, response_column: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let headers: Vec<String> = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let resp_idx = headers
            .iter()
            .position(|h| h == response_column)
            .ok_or_else(|| Error::InvalidInput(format!("response column `{response_column}` not found")))?;
        let reg_names: Vec<String> =
            headers.iter().enumerate().filter(|(i, _)| *i != resp_idx).map(|(_, h)| h.clone()).collect();
        if reg_names.is_empty() {
            return Err(Error::InvalidInput("no regressor columns".into()));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut response: Vec<f64> = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::InvalidInput(format!("row {}: wrong field count", line + 2)));
            }
            let mut row = Vec::with_capacity(reg_names.len());
            for (i, field) in record.iter().enumerate() {
                let value: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidInput(format!("row {}: cannot parse `{}` as a real", line + 2, field))
                })?;
                if i == resp_idx {
                    response.push(value);
                } else {
                    row.push(value);
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput("csv has no data rows".into()));
        }
        let n = rows.len();
        let p = reg_names.len();
        let regressors = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Dataset::new(regressors, DVector::from_vec(response), reg_names)
    }
}

/// Check identifiability of a regressor matrix: collinear iff the ratio of the
/// smallest to the largest singular value falls below [`RANK_TOLERANCE`].
pub fn acceptability_check(data: &Dataset) -> Acceptability {
    data.acceptability()
}

fn acceptability_of(matrix: &DMatrix<f64>) -> Acceptability {
    let svals = matrix.clone().singular_values();
    let max = svals.max();
    let min = svals.min();
    if max <= 0.0 || min / max < RANK_TOLERANCE {
        Acceptability::Collinear
    } else {
        Acceptability::Acceptable
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::SeededStream;
    use rand_distr::{Distribution, StandardNormal};

    fn small(reg: Vec<f64>, n: usize, p: usize, y: Vec<f64>) -> Dataset {
        let names = (0..p).map(|j| format!("x{j}")).collect();
        Dataset::new(DMatrix::from_row_slice(n, p, &reg), DVector::from_vec(y), names).unwrap()
    }

    #[test]
    fn full_rank_matrix_is_acceptable() {
        let d = small(vec![1.0, 1.0, 1.0, 2.0, 1.0, 3.0], 3, 2, vec![0.0; 3]);
        assert_eq!(acceptability_check(&d), Acceptability::Acceptable);
    }

    #[test]
    fn proportional_columns_are_collinear() {
        let d = small(vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0], 3, 2, vec![0.0; 3]);
        assert_eq!(acceptability_check(&d), Acceptability::Collinear);
    }

    #[test]
    fn random_normal_matrix_is_acceptable_with_sv_oracle() {
        let mut rng = SeededStream::new(1).rng();
        let m = DMatrix::from_fn(200, 3, |_, _| StandardNormal.sample(&mut rng));
        let d = Dataset::new(m.clone(), DVector::zeros(200), vec!["a".into(), "b".into(), "c".into()])
            .unwrap();
        assert_eq!(acceptability_check(&d), Acceptability::Acceptable);
        // independent oracle: singular values via the eigenvalues of the Gram matrix
        let gram = m.transpose() * &m;
        let eigs = gram.symmetric_eigen().eigenvalues;
        let smax = eigs.max().sqrt();
        let smin = eigs.min().max(0.0).sqrt();
        assert!(smin / smax > RANK_TOLERANCE);
    }

    #[test]
    fn acceptability_invariant_to_row_permutation() {
        let d = small(vec![1.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 5.0], 4, 2, vec![0.0; 4]);
        let perm = small(vec![1.0, 5.0, 1.0, 3.0, 1.0, 1.0, 1.0, 2.0], 4, 2, vec![0.0; 4]);
        assert_eq!(d.acceptability(), perm.acceptability());
    }

    #[test]
    fn weights_are_mean_normalized() {
        let d = small(vec![1.0, 1.0, 1.0], 3, 1, vec![1.0, 2.0, 3.0])
            .with_weights(DVector::from_vec(vec![2.0, 4.0, 6.0]))
            .unwrap();
        let w = d.weights().unwrap();
        assert!((w.mean() - 1.0).abs() <= WEIGHT_MEAN_TOLERANCE);
        assert!((w[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn negative_weights_rejected_on_checked_path() {
        let d = small(vec![1.0, 1.0], 2, 1, vec![1.0, 2.0]);
        assert!(d.with_weights(DVector::from_vec(vec![1.5, -0.5])).is_err());
    }

    #[test]
    fn signed_weights_require_unit_mean() {
        let d = small(vec![1.0, 1.0], 2, 1, vec![1.0, 2.0]);
        assert!(d
            .clone()
            .with_weights_signed(DVector::from_vec(vec![1.5, 0.5]))
            .is_ok());
        assert!(d.with_weights_signed(DVector::from_vec(vec![1.5, 0.4])).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join("modelrobust_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("data.csv");
        std::fs::write(&path, "intercept,x,y\n1,1,3\n1,2,5\n1,3,7\n").unwrap();
        let d = Dataset::from_csv(&path, "y").unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.p(), 2);
        assert_eq!(d.column_names(), ["intercept".to_string(), "x".to_string()]);
        assert_eq!(d.response()[2], 7.0);
        assert!(Dataset::from_csv(&path, "missing").is_err());
        std::fs::write(&path, "x,y\n1,oops\n").unwrap();
        assert!(Dataset::from_csv(&path, "y").is_err());
    }
}
