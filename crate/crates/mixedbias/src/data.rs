//! Columnar observation store and the empirical mean operator.
//!
//! A [`Dataset`] holds named real-valued columns of equal length; each row is
//! one observation. Ingestion rejects NaN and infinities outright: every
//! identity this crate verifies is an exact-arithmetic claim, and silently
//! imputed values would turn an algebra bug into a plausible-looking number.
//!
//! All empirical means use compensated (Neumaier) summation so that the
//! identity residuals asserted elsewhere are not eroded by naive accumulation
//! at n = 10^4 and beyond.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Compensated accumulator (Neumaier variant of Kahan summation).
///
/// The running error term is carried separately and folded in by `value()`,
/// which keeps the total rounding error at O(eps * sum |x_i|) independent of
/// summation order.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of an iterator of values.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Dot product with a compensated accumulator and exact product error
/// recovery via fused multiply-add (Ogita-Rump-Oishi `dot2`).
pub fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = CompensatedSum::new();
    for (&x, &y) in a.iter().zip(b) {
        let p = x * y;
        let e = x.mul_add(y, -p);
        acc.add(p);
        acc.add(e);
    }
    acc.value()
}

/// The subvector Z of one observation, in the functional's declared
/// coordinate order.
#[derive(Debug, Clone, PartialEq)]
pub struct ZPoint {
    values: Vec<f64>,
}

impl ZPoint {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl std::ops::Index<usize> for ZPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Immutable column store of named real-valued observation fields.
#[derive(Debug, Clone)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
    n: usize,
}

impl Dataset {
    /// Builds a dataset from `(name, values)` pairs, validating that all
    /// columns have the same length n >= 1, names are unique, and every
    /// value is a finite real.
    pub fn new(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = columns[0].1.len();
        if n == 0 {
            return Err(Error::NoRows);
        }
        let mut names = Vec::with_capacity(columns.len());
        let mut cols = Vec::with_capacity(columns.len());
        let mut index = HashMap::new();
        for (name, values) in columns {
            if values.len() != n {
                return Err(Error::ColumnLengthMismatch {
                    column: name,
                    len: values.len(),
                    expected: n,
                });
            }
            for (row, &v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue {
                        column: name,
                        row,
                        value: v,
                    });
                }
            }
            if index.insert(name.clone(), names.len()).is_some() {
                return Err(Error::DuplicateColumn { column: name });
            }
            names.push(name);
            cols.push(values);
        }
        Ok(Self {
            names,
            columns: cols,
            index,
            n,
        })
    }

    /// Row count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Column names in ingestion order.
    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.index
            .get(name)
            .map(|&i| self.columns[i].as_slice())
            .ok_or_else(|| Error::UnknownColumn {
                column: name.to_string(),
            })
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// A borrowed view of one row. The row index is validated here; column
    /// lookups inside the view are validated at first evaluation.
    pub fn row(&self, row: usize) -> Result<Observation<'_>> {
        if row >= self.n {
            return Err(Error::RowOutOfRange { row, n: self.n });
        }
        Ok(Observation { dataset: self, row })
    }

    /// Iterates the rows in order.
    pub fn rows(&self) -> impl Iterator<Item = Observation<'_>> {
        (0..self.n).map(move |row| Observation { dataset: self, row })
    }
}

/// A single observation O, viewed as a row of the dataset.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'d> {
    dataset: &'d Dataset,
    row: usize,
}

impl<'d> Observation<'d> {
    pub fn row(&self) -> usize {
        self.row
    }

    pub fn value(&self, column: &str) -> Result<f64> {
        Ok(self.dataset.column(column)?[self.row])
    }
}

/// The empirical mean operator: (1/n) * sum_i f(O_i), rows in dataset order,
/// compensated accumulation. A non-finite `f(O_i)` is an error naming the row.
pub fn empirical_mean<F>(dataset: &Dataset, mut f: F) -> Result<f64>
where
    F: FnMut(&Observation<'_>) -> Result<f64>,
{
    let mut acc = CompensatedSum::new();
    for obs in dataset.rows() {
        let v = f(&obs)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteEvaluation {
                row: obs.row(),
                value: v,
            });
        }
        acc.add(v);
    }
    Ok(acc.value() / dataset.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::test_fixture::fix4;

    #[test]
    fn rejects_ragged_columns() {
        let err = Dataset::new(vec![
            ("a".into(), vec![1.0, 2.0]),
            ("b".into(), vec![1.0]),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::ColumnLengthMismatch { .. }));
    }

    #[test]
    fn rejects_non_finite_values() {
        let err = Dataset::new(vec![("a".into(), vec![1.0, f64::NAN])]).unwrap_err();
        match err {
            Error::NonFiniteValue { column, row, .. } => {
                assert_eq!(column, "a");
                assert_eq!(row, 1);
            }
            other => panic!("unexpected error {other:?}"),
        }
        let err = Dataset::new(vec![("a".into(), vec![f64::INFINITY])]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { .. }));
    }

    #[test]
    fn rejects_empty_and_duplicate() {
        assert!(matches!(Dataset::new(vec![]), Err(Error::EmptyDataset)));
        assert!(matches!(
            Dataset::new(vec![("a".into(), vec![])]),
            Err(Error::NoRows)
        ));
        assert!(matches!(
            Dataset::new(vec![("a".into(), vec![1.0]), ("a".into(), vec![2.0])]),
            Err(Error::DuplicateColumn { .. })
        ));
    }

    #[test]
    fn empirical_mean_on_fix4() {
        // Hand sums: (1+2+3+4)/4 and (1*1 + 0 + 1*3 + 0)/4.
        let ds = fix4();
        let ybar = empirical_mean(&ds, |o| o.value("y")).unwrap();
        assert_eq!(ybar, 2.5);
        let aybar = empirical_mean(&ds, |o| Ok(o.value("a")? * o.value("y")?)).unwrap();
        assert_eq!(aybar, 1.0);
        let zero = empirical_mean(&ds, |_| Ok(0.0)).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn empirical_mean_reports_non_finite_row() {
        let ds = fix4();
        let err = empirical_mean(&ds, |o| {
            Ok(if o.row() == 2 { f64::NAN } else { 1.0 })
        })
        .unwrap_err();
        match err {
            Error::NonFiniteEvaluation { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn row_bounds_checked() {
        let ds = fix4();
        assert!(ds.row(3).is_ok());
        assert!(matches!(ds.row(4), Err(Error::RowOutOfRange { .. })));
    }

    #[test]
    fn compensated_sum_beats_naive_on_cancellation() {
        // 1 followed by 1e16 copies of tiny values would lose them naively;
        // use a small version of the classic pattern.
        let mut acc = CompensatedSum::new();
        acc.add(1e16);
        for _ in 0..10 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 10.0);
    }
}
