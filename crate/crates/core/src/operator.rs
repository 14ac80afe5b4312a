//! Continuous linear operators on ω as finitely described row-finite matrices.
//!
//! An operator is a finite set of exceptional rows `1..n0` followed by an
//! eventually periodic banded regime: row `n >= n0` with `n ≡ r (mod p)` has
//! an entry `c` at column `n + d` for every `(d, c)` in the pattern of
//! residue `r`, dropping columns below 1.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::vector::SequenceVector;

/// Default cap on intermediate support sizes and explored index sets.
pub const DEFAULT_SUPPORT_CAP: usize = 1_000_000;

/// One row of a row-finite matrix: sorted, distinct columns, no zeros.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseRow {
    entries: Vec<(usize, Rational)>,
}

impl SparseRow {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The identity row `[(n, 1)]`.
    pub fn unit(n: usize) -> Self {
        Self {
            entries: vec![(n, rational::int(1))],
        }
    }

    /// Validates and sorts `entries` as row `row` of some operator.
    pub fn new(row: usize, mut entries: Vec<(usize, Rational)>) -> Result<Self> {
        entries.sort_by_key(|(col, _)| *col);
        for (i, (col, coeff)) in entries.iter().enumerate() {
            if *col == 0 {
                return Err(Error::ColumnOutOfRange { row });
            }
            if coeff.is_zero() {
                return Err(Error::ZeroCoefficient { row, col: *col });
            }
            if i > 0 && entries[i - 1].0 == *col {
                return Err(Error::DuplicateColumn { row, col: *col });
            }
        }
        Ok(Self { entries })
    }

    fn from_map(map: BTreeMap<usize, Rational>) -> Self {
        Self {
            entries: map.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, Rational)] {
        &self.entries
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|(c, _)| *c)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, col: usize) -> Option<&Rational> {
        self.entries
            .binary_search_by_key(&col, |(c, _)| *c)
            .ok()
            .map(|i| &self.entries[i].1)
    }

    pub fn max_column(&self) -> Option<usize> {
        self.entries.last().map(|(c, _)| *c)
    }

    /// `Σ_j coeff_j · x_j`.
    pub fn dot(&self, x: &SequenceVector) -> Rational {
        self.entries
            .iter()
            .map(|(col, c)| c * x.coordinate(*col))
            .sum()
    }

    /// This row (as a row vector) times the matrix of `op`.
    pub fn times(&self, op: &RowFiniteOperator) -> Result<SparseRow> {
        let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
        for (j, c) in &self.entries {
            for (col, a) in op.row(*j).entries {
                *acc.entry(col).or_insert_with(Rational::zero) += c * a;
            }
            if acc.len() > op.support_cap {
                return Err(Error::ResourceLimit {
                    what: "row support",
                    reached: acc.len(),
                    cap: op.support_cap,
                });
            }
        }
        Ok(Self::from_map(acc))
    }
}

/// A row-finite infinite matrix with a finite description. Immutable once
/// built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowFiniteOperator {
    exceptional: BTreeMap<usize, SparseRow>,
    n0: usize,
    pattern: Vec<Vec<(i64, Rational)>>,
    support_cap: usize,
}

impl RowFiniteOperator {
    /// `pattern[r]` lists `(offset, coeff)` for rows `n >= n0` with
    /// `n % period == r`; `pattern.len()` must equal the period.
    pub fn new(
        n0: usize,
        pattern: Vec<Vec<(i64, Rational)>>,
        exceptional: BTreeMap<usize, Vec<(usize, Rational)>>,
    ) -> Result<Self> {
        if n0 < 1 {
            return Err(Error::InvalidFirstPeriodicRow);
        }
        if pattern.is_empty() {
            return Err(Error::InvalidPeriod);
        }
        let mut checked_pattern = Vec::with_capacity(pattern.len());
        for (residue, mut entries) in pattern.into_iter().enumerate() {
            entries.sort_by_key(|(d, _)| *d);
            for (i, (d, c)) in entries.iter().enumerate() {
                if c.is_zero() {
                    return Err(Error::ZeroPatternCoefficient {
                        residue,
                        offset: *d,
                    });
                }
                if i > 0 && entries[i - 1].0 == *d {
                    return Err(Error::DuplicateOffset {
                        residue,
                        offset: *d,
                    });
                }
            }
            checked_pattern.push(entries);
        }
        let mut rows = BTreeMap::new();
        for (row, entries) in exceptional {
            if row == 0 {
                return Err(Error::ZeroIndex);
            }
            if row >= n0 {
                return Err(Error::ExceptionalRowOutOfRange { row, n0 });
            }
            let sparse = SparseRow::new(row, entries)?;
            if !sparse.is_empty() {
                rows.insert(row, sparse);
            }
        }
        Ok(Self {
            exceptional: rows,
            n0,
            pattern: checked_pattern,
            support_cap: DEFAULT_SUPPORT_CAP,
        })
    }

    /// Purely periodic operator (`n0 = 1`, no exceptional rows).
    pub fn periodic(pattern: Vec<Vec<(i64, Rational)>>) -> Result<Self> {
        Self::new(1, pattern, BTreeMap::new())
    }

    pub fn zero() -> Self {
        Self::periodic(vec![vec![]]).expect("zero operator is valid")
    }

    pub fn identity() -> Self {
        Self::diagonal(rational::int(1))
    }

    pub fn diagonal(d: Rational) -> Self {
        if d.is_zero() {
            return Self::zero();
        }
        Self::periodic(vec![vec![(0, d)]]).expect("diagonal operator is valid")
    }

    /// `x ↦ (x_2, x_3, …)`.
    pub fn backward_shift() -> Self {
        Self::periodic(vec![vec![(1, rational::int(1))]]).expect("valid")
    }

    /// `x ↦ (0, x_1, x_2, …)`.
    pub fn forward_shift() -> Self {
        Self::periodic(vec![vec![(-1, rational::int(1))]]).expect("valid")
    }

    /// Replaces the resource cap used by power and closure computations.
    pub fn with_support_cap(mut self, cap: usize) -> Self {
        self.support_cap = cap.max(1);
        self
    }

    pub fn support_cap(&self) -> usize {
        self.support_cap
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn period(&self) -> usize {
        self.pattern.len()
    }

    pub fn pattern(&self) -> &[Vec<(i64, Rational)>] {
        &self.pattern
    }

    pub fn exceptional_rows(&self) -> &BTreeMap<usize, SparseRow> {
        &self.exceptional
    }

    pub fn residue(&self, n: usize) -> usize {
        n % self.period()
    }

    /// Largest `|offset|` in the periodic pattern.
    pub fn max_abs_offset(&self) -> u64 {
        self.pattern
            .iter()
            .flatten()
            .map(|(d, _)| d.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// Row `n` (1-based).
    pub fn row(&self, n: usize) -> SparseRow {
        assert!(n >= 1, "rows are 1-based");
        if n < self.n0 {
            return self.exceptional.get(&n).cloned().unwrap_or_default();
        }
        let entries = self.pattern[self.residue(n)]
            .iter()
            .filter_map(|(d, c)| {
                let col = n as i64 + d;
                (col >= 1).then(|| (col as usize, c.clone()))
            })
            .collect();
        SparseRow { entries }
    }

    /// Row `n` of `A^k`, by exact sparse row-by-matrix products.
    pub fn power_row(&self, n: usize, k: usize) -> Result<SparseRow> {
        let mut row = SparseRow::unit(n);
        for _ in 0..k {
            if row.is_empty() {
                break;
            }
            row = row.times(self)?;
        }
        Ok(row)
    }

    /// Iterator over `power_row(n, 0), power_row(n, 1), …`.
    pub fn power_rows(&self, n: usize) -> PowerRows<'_> {
        PowerRows {
            op: self,
            n,
            current: None,
            failed: false,
        }
    }

    /// Coordinates `1..=n_out` of `A x`, exactly.
    pub fn apply(&self, x: &SequenceVector, n_out: usize) -> Vec<Rational> {
        (1..=n_out).map(|i| self.row(i).dot(x)).collect()
    }

    /// Support of row `n`, as a set.
    pub fn row_support(&self, n: usize) -> BTreeSet<usize> {
        self.row(n).support().collect()
    }
}

pub struct PowerRows<'a> {
    op: &'a RowFiniteOperator,
    n: usize,
    current: Option<SparseRow>,
    failed: bool,
}

impl Iterator for PowerRows<'_> {
    type Item = Result<SparseRow>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let row = match &self.current {
            None => Ok(SparseRow::unit(self.n)),
            Some(prev) => prev.times(self.op),
        };
        match row {
            Ok(row) => {
                self.current = Some(row.clone());
                Some(Ok(row))
            }
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// JSON schema for an operator file.
///
/// ```json
/// {"n0": 1, "period": 2,
///  "pattern": [[], [{"offset": 1, "coeff": "1"}]],
///  "exceptional_rows": {}}
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub n0: i64,
    pub period: i64,
    pub pattern: Vec<Vec<PatternEntry>>,
    #[serde(default)]
    pub exceptional_rows: BTreeMap<String, Vec<RowEntry>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternEntry {
    pub offset: i64,
    pub coeff: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowEntry {
    pub col: i64,
    pub coeff: String,
}

fn field_err(field: String, message: impl Into<String>) -> Error {
    Error::InvalidField {
        field,
        message: message.into(),
    }
}

impl OperatorSpec {
    /// Validates the description and builds the operator.
    pub fn build(&self) -> Result<RowFiniteOperator> {
        if self.n0 < 1 {
            return Err(Error::InvalidFirstPeriodicRow);
        }
        if self.period < 1 {
            return Err(Error::InvalidPeriod);
        }
        if self.pattern.len() != self.period as usize {
            return Err(Error::PatternLength {
                period: self.period as usize,
                found: self.pattern.len(),
            });
        }
        let parse = |field: String, s: &str| {
            rational::parse(s).map_err(|_| field_err(field, format!("not a rational: {s:?}")))
        };
        let mut pattern = Vec::with_capacity(self.pattern.len());
        for (r, entries) in self.pattern.iter().enumerate() {
            let mut out = Vec::with_capacity(entries.len());
            for (i, e) in entries.iter().enumerate() {
                out.push((
                    e.offset,
                    parse(format!("pattern[{r}][{i}].coeff"), &e.coeff)?,
                ));
            }
            pattern.push(out);
        }
        let mut exceptional = BTreeMap::new();
        for (key, entries) in &self.exceptional_rows {
            let row: usize = key.trim().parse().map_err(|_| {
                field_err(
                    format!("exceptional_rows.{key}"),
                    "row key must be a positive integer",
                )
            })?;
            let mut out = Vec::with_capacity(entries.len());
            for (i, e) in entries.iter().enumerate() {
                if e.col < 1 {
                    return Err(field_err(
                        format!("exceptional_rows.{key}[{i}].col"),
                        "column index must be >= 1",
                    ));
                }
                let c = parse(format!("exceptional_rows.{key}[{i}].coeff"), &e.coeff)?;
                out.push((e.col as usize, c));
            }
            exceptional.insert(row, out);
        }
        RowFiniteOperator::new(self.n0 as usize, pattern, exceptional)
    }
}

impl From<&RowFiniteOperator> for OperatorSpec {
    fn from(op: &RowFiniteOperator) -> Self {
        Self {
            n0: op.n0 as i64,
            period: op.period() as i64,
            pattern: op
                .pattern
                .iter()
                .map(|entries| {
                    entries
                        .iter()
                        .map(|(d, c)| PatternEntry {
                            offset: *d,
                            coeff: rational::format(c),
                        })
                        .collect()
                })
                .collect(),
            exceptional_rows: op
                .exceptional
                .iter()
                .map(|(row, entries)| {
                    let list = entries
                        .entries()
                        .iter()
                        .map(|(col, c)| RowEntry {
                            col: *col as i64,
                            coeff: rational::format(c),
                        })
                        .collect();
                    (row.to_string(), list)
                })
                .collect(),
        }
    }
}

impl RowFiniteOperator {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: OperatorSpec = serde_json::from_str(text)?;
        spec.build()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&OperatorSpec::from(self)).expect("operator spec serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn nilpotent_b() -> RowFiniteOperator {
        RowFiniteOperator::periodic(vec![vec![], vec![(1, int(1))]]).unwrap()
    }

    fn row_of(entries: &[(usize, i64)]) -> Vec<(usize, Rational)> {
        entries.iter().map(|(c, v)| (*c, int(*v))).collect()
    }

    #[test]
    fn backward_shift_rows() {
        let a = RowFiniteOperator::backward_shift();
        assert_eq!(a.row(7).entries(), row_of(&[(8, 1)]).as_slice());
        assert_eq!(
            a.power_row(1, 5).unwrap().entries(),
            row_of(&[(6, 1)]).as_slice()
        );
    }

    #[test]
    fn nilpotent_rows() {
        let b = nilpotent_b();
        assert!(b.row(4).is_empty());
        assert_eq!(b.row(3).entries(), row_of(&[(4, 1)]).as_slice());
        assert!(b.power_row(1, 2).unwrap().is_empty());
    }

    #[test]
    fn zero_operator_has_empty_rows() {
        let z = RowFiniteOperator::zero();
        for n in 1..10 {
            assert!(z.row(n).is_empty());
        }
    }

    #[test]
    fn zeroth_and_first_powers() {
        let op = RowFiniteOperator::periodic(vec![vec![(-1, ratio(1, 2)), (2, int(3))]]).unwrap();
        for n in 1..6 {
            assert_eq!(op.power_row(n, 0).unwrap(), SparseRow::unit(n));
            assert_eq!(op.power_row(n, 1).unwrap(), op.row(n));
        }
    }

    #[test]
    fn forward_shift_drops_column_zero() {
        let s = RowFiniteOperator::forward_shift();
        assert!(s.row(1).is_empty());
        assert_eq!(s.row(2).entries(), row_of(&[(1, 1)]).as_slice());
    }

    #[test]
    fn validation_errors() {
        let dup = RowFiniteOperator::new(
            4,
            vec![vec![]],
            BTreeMap::from([(2, vec![(3, ratio(1, 2)), (3, ratio(1, 2))])]),
        );
        assert!(matches!(
            dup,
            Err(Error::DuplicateColumn { row: 2, col: 3 })
        ));

        let zero =
            RowFiniteOperator::new(2, vec![vec![]], BTreeMap::from([(1, vec![(1, int(0))])]));
        assert!(matches!(zero, Err(Error::ZeroCoefficient { .. })));

        let zero_pattern = RowFiniteOperator::periodic(vec![vec![(1, int(0))]]);
        assert!(matches!(
            zero_pattern,
            Err(Error::ZeroPatternCoefficient { .. })
        ));

        assert!(matches!(
            RowFiniteOperator::new(0, vec![vec![]], BTreeMap::new()),
            Err(Error::InvalidFirstPeriodicRow)
        ));
        assert!(matches!(
            RowFiniteOperator::new(1, vec![], BTreeMap::new()),
            Err(Error::InvalidPeriod)
        ));
        let late =
            RowFiniteOperator::new(2, vec![vec![]], BTreeMap::from([(2, row_of(&[(1, 1)]))]));
        assert!(matches!(
            late,
            Err(Error::ExceptionalRowOutOfRange { row: 2, n0: 2 })
        ));
    }

    #[test]
    fn unsorted_input_is_normalized() {
        let op = RowFiniteOperator::new(
            3,
            vec![vec![(2, int(1)), (-1, int(2))]],
            BTreeMap::from([(1, row_of(&[(5, 1), (2, 2)]))]),
        )
        .unwrap();
        assert_eq!(op.row(1).entries(), row_of(&[(2, 2), (5, 1)]).as_slice());
        assert_eq!(op.row(4).entries(), row_of(&[(3, 2), (6, 1)]).as_slice());
    }

    #[test]
    fn apply_examples() {
        let a = RowFiniteOperator::backward_shift();
        let x = SequenceVector::finite(vec![int(1), int(2), int(3)]);
        assert_eq!(a.apply(&x, 3), vec![int(2), int(3), int(0)]);

        let ones = SequenceVector::constant(int(1));
        assert_eq!(
            nilpotent_b().apply(&ones, 4),
            vec![int(1), int(0), int(1), int(0)]
        );

        assert_eq!(
            RowFiniteOperator::zero().apply(&ones, 2),
            vec![int(0), int(0)]
        );
    }

    #[test]
    fn resource_cap_is_an_error() {
        // row n -> {n+1, n+2}: the support of row 1 of A^k has k+1 entries
        let op = RowFiniteOperator::periodic(vec![vec![(1, int(1)), (2, int(1))]])
            .unwrap()
            .with_support_cap(5);
        assert!(op.power_row(1, 4).is_ok());
        match op.power_row(1, 6) {
            Err(Error::ResourceLimit { reached, cap, .. }) => {
                assert_eq!(cap, 5);
                assert!(reached > 5);
            }
            other => panic!("expected resource limit, got {other:?}"),
        }
    }

    #[test]
    fn json_spec_round_trip_and_diagnostics() {
        let text = r#"{"n0": 3, "period": 2,
            "pattern": [[{"offset": -1, "coeff": "1/2"}], [{"offset": 1, "coeff": "2"}]],
            "exceptional_rows": {"1": [{"col": 4, "coeff": "-3"}]}}"#;
        let op = RowFiniteOperator::from_json(text).unwrap();
        assert_eq!(op.row(1).entries(), row_of(&[(4, -3)]).as_slice());
        assert!(op.row(2).is_empty());
        assert_eq!(op.row(4).entries(), &[(3, ratio(1, 2))]);
        assert_eq!(RowFiniteOperator::from_json(&op.to_json()).unwrap(), op);

        let bad = r#"{"n0": 1, "period": 1, "pattern": [[{"offset": 1, "coeff": "q"}]]}"#;
        let err = RowFiniteOperator::from_json(bad).unwrap_err();
        assert!(err.to_string().contains("pattern[0][0].coeff"), "{err}");

        let short = r#"{"n0": 1, "period": 2, "pattern": [[]]}"#;
        assert!(matches!(
            RowFiniteOperator::from_json(short),
            Err(Error::PatternLength {
                period: 2,
                found: 1
            })
        ));
    }
}
