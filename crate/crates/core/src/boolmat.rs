//! Boolean matrices over the semiring `({0,1}, OR, AND)`.
//!
//! Rows are stored bit-packed into `u64` words. A matrix may carry labels for
//! its rows and columns; these name the domain constants an evidence matrix
//! talks about and are required once a matrix is turned into ground literals.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

const WORD: usize = 64;

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoolMatError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },
    #[error("index ({row}, {col}) out of range for {rows}x{cols} matrix")]
    OutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("{axis} labels: expected {expected}, got {got}")]
    LabelCount {
        axis: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{axis} label `{label}` appears more than once")]
    DuplicateLabel { axis: &'static str, label: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Fixed-length packed bit vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len {
            v.set(i, true);
        }
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }

    /// Number of positions set in both vectors.
    pub fn and_count(&self, other: &BitVector) -> usize {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Number of positions set in `self` but not in `other`.
    pub fn and_not_count(&self, other: &BitVector) -> usize {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & !b).count_ones() as usize)
            .sum()
    }

    /// Number of positions set in `self` and `and`, but not in `not`.
    pub fn masked_count(&self, and: &BitVector, not: &BitVector) -> usize {
        self.words
            .iter()
            .zip(&and.words)
            .zip(&not.words)
            .map(|((a, b), c)| (a & b & !c).count_ones() as usize)
            .sum()
    }

    pub fn hamming(&self, other: &BitVector) -> usize {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// `true` when every bit of `self` is also set in `other`.
    pub fn is_subset(&self, other: &BitVector) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn or_assign(&mut self, other: &BitVector) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn and_assign(&mut self, other: &BitVector) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD + b)
                }
            })
        })
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector(")?;
        for i in 0..self.len {
            write!(f, "{}", u8::from(self.get(i)))?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Mismatch count between two matrices, split by flip direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HammingError {
    /// Entries that are 1 in the reference and 0 in the approximation.
    pub ones_to_zero: usize,
    /// Entries that are 0 in the reference and 1 in the approximation.
    pub zeros_to_one: usize,
}

impl HammingError {
    pub fn total(&self) -> usize {
        self.ones_to_zero + self.zeros_to_one
    }
}

/// Dense `rows x cols` Boolean matrix with optional axis labels.
#[derive(Clone, PartialEq, Eq)]
pub struct BoolMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BitVector>,
    row_labels: Option<Vec<String>>,
    col_labels: Option<Vec<String>>,
}

impl BoolMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BoolMatrix {
            rows,
            cols,
            data: vec![BitVector::zeros(cols); rows],
            row_labels: None,
            col_labels: None,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from rows of 0/1 values. Any nonzero value counts as 1.
    ///
    /// Panics if the rows are ragged.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged row {i}");
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v != 0);
            }
        }
        m
    }

    pub fn from_bit_rows(cols: usize, data: Vec<BitVector>) -> Self {
        assert!(data.iter().all(|r| r.len() == cols));
        BoolMatrix {
            rows: data.len(),
            cols,
            data,
            row_labels: None,
            col_labels: None,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                if f(i, j) {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    pub fn with_labels(
        mut self,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    ) -> Result<Self, BoolMatError> {
        check_labels("row", self.rows, &row_labels)?;
        check_labels("column", self.cols, &col_labels)?;
        self.row_labels = Some(row_labels);
        self.col_labels = Some(col_labels);
        Ok(self)
    }

    pub fn set_row_labels(&mut self, labels: Option<Vec<String>>) -> Result<(), BoolMatError> {
        if let Some(l) = &labels {
            check_labels("row", self.rows, l)?;
        }
        self.row_labels = labels;
        Ok(())
    }

    pub fn set_col_labels(&mut self, labels: Option<Vec<String>>) -> Result<(), BoolMatError> {
        if let Some(l) = &labels {
            check_labels("column", self.cols, l)?;
        }
        self.col_labels = labels;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row_labels(&self) -> Option<&[String]> {
        self.row_labels.as_deref()
    }

    pub fn col_labels(&self) -> Option<&[String]> {
        self.col_labels.as_deref()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i].get(j)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.data[i].set(j, value);
    }

    pub fn row(&self, i: usize) -> &BitVector {
        &self.data[i]
    }

    pub fn row_vectors(&self) -> &[BitVector] {
        &self.data
    }

    pub fn column(&self, j: usize) -> BitVector {
        let mut v = BitVector::zeros(self.rows);
        for i in 0..self.rows {
            if self.get(i, j) {
                v.set(i, true);
            }
        }
        v
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(BitVector::count_ones).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|r| !r.any())
    }

    pub fn transpose(&self) -> BoolMatrix {
        let mut t = BoolMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in self.data[i].iter_ones() {
                t.set(j, i, true);
            }
        }
        t.row_labels = self.col_labels.clone();
        t.col_labels = self.row_labels.clone();
        t
    }

    pub fn complement(&self) -> BoolMatrix {
        let mut c = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                c.set(i, j, !self.get(i, j));
            }
        }
        c
    }

    /// Reorders rows and columns: row `i` of the result is row `row_perm[i]` of `self`.
    /// Labels move with their rows and columns.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> BoolMatrix {
        assert_eq!(row_perm.len(), self.rows);
        assert_eq!(col_perm.len(), self.cols);
        let mut out = BoolMatrix::from_fn(self.rows, self.cols, |i, j| {
            self.get(row_perm[i], col_perm[j])
        });
        out.row_labels = self
            .row_labels
            .as_ref()
            .map(|l| row_perm.iter().map(|&i| l[i].clone()).collect());
        out.col_labels = self
            .col_labels
            .as_ref()
            .map(|l| col_perm.iter().map(|&j| l[j].clone()).collect());
        out
    }

    /// Rank over the rationals, by fraction-free Gaussian elimination.
    pub fn real_rank(&self) -> usize {
        let mut a: Vec<Vec<i128>> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| i128::from(self.get(i, j))).collect())
            .collect();
        let mut rank = 0;
        let mut prev_pivot: i128 = 1;
        for col in 0..self.cols {
            let Some(p) = (rank..self.rows).find(|&r| a[r][col] != 0) else {
                continue;
            };
            a.swap(rank, p);
            for r in rank + 1..self.rows {
                for c in col + 1..self.cols {
                    // Bareiss update keeps entries integral and bounded.
                    a[r][c] = (a[rank][col] * a[r][c] - a[r][col] * a[rank][c]) / prev_pivot;
                }
                a[r][col] = 0;
            }
            prev_pivot = a[rank][col];
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        rank
    }

    /// Parses the text matrix format.
    ///
    /// ```text
    /// 4 4
    /// #rows a,b,c,d
    /// #cols a,b,c,d
    /// 1100
    /// 1101
    /// 0010
    /// 1001
    /// ```
    ///
    /// The first non-comment line holds the dimensions. `#rows` and `#cols`
    /// carry labels; any other line starting with `#` is a comment.
    pub fn parse(text: &str) -> Result<BoolMatrix, BoolMatError> {
        let mut dims: Option<(usize, usize)> = None;
        let mut row_labels = None;
        let mut col_labels = None;
        let mut data: Vec<BitVector> = Vec::new();
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            last_line = line_no;
            let line = raw.trim_end_matches('\r');
            if let Some(rest) = line.strip_prefix("#rows") {
                row_labels = Some(parse_label_list(rest, line_no)?);
                continue;
            }
            if let Some(rest) = line.strip_prefix("#cols") {
                col_labels = Some(parse_label_list(rest, line_no)?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            match dims {
                None => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    dims = Some(parse_dims(line, line_no)?);
                }
                Some((k, l)) => {
                    if data.len() == k {
                        if line.trim().is_empty() {
                            continue;
                        }
                        return Err(BoolMatError::Parse {
                            line: line_no,
                            msg: format!("unexpected data after {k} rows"),
                        });
                    }
                    let line = line.trim();
                    if line.chars().count() != l {
                        return Err(BoolMatError::Parse {
                            line: line_no,
                            msg: format!("expected {l} characters, found {}", line.chars().count()),
                        });
                    }
                    let mut row = BitVector::zeros(l);
                    for (j, ch) in line.chars().enumerate() {
                        match ch {
                            '0' => {}
                            '1' => row.set(j, true),
                            other => {
                                return Err(BoolMatError::Parse {
                                    line: line_no,
                                    msg: format!("invalid character `{other}`"),
                                })
                            }
                        }
                    }
                    data.push(row);
                }
            }
        }
        let Some((k, l)) = dims else {
            return Err(BoolMatError::Parse {
                line: last_line.max(1),
                msg: "missing dimension line".into(),
            });
        };
        if data.len() != k {
            return Err(BoolMatError::Parse {
                line: last_line,
                msg: format!("expected {k} rows, found {}", data.len()),
            });
        }
        let mut m = BoolMatrix::from_bit_rows(l, data);
        m.rows = k;
        m.set_row_labels(row_labels).map_err(|e| at_line(e, 0))?;
        m.set_col_labels(col_labels).map_err(|e| at_line(e, 0))?;
        Ok(m)
    }

    /// Serializes to the text format accepted by [`BoolMatrix::parse`].
    pub fn to_text(&self) -> String {
        self.to_text_with_header(&[])
    }

    /// Like [`BoolMatrix::to_text`], with extra `#` comment lines after the dimensions.
    pub fn to_text_with_header(&self, comments: &[String]) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for c in comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        if let Some(l) = &self.row_labels {
            out.push_str(&format!("#rows {}\n", l.join(",")));
        }
        if let Some(l) = &self.col_labels {
            out.push_str(&format!("#cols {}\n", l.join(",")));
        }
        for r in &self.data {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }
}

fn at_line(e: BoolMatError, line: usize) -> BoolMatError {
    match e {
        BoolMatError::Parse { .. } => e,
        other => BoolMatError::Parse {
            line,
            msg: other.to_string(),
        },
    }
}

fn parse_dims(line: &str, line_no: usize) -> Result<(usize, usize), BoolMatError> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    let bad = || BoolMatError::Parse {
        line: line_no,
        msg: format!("expected `rows cols`, found `{}`", line.trim()),
    };
    if parts.len() != 2 {
        return Err(bad());
    }
    let k = parts[0].parse().map_err(|_| bad())?;
    let l = parts[1].parse().map_err(|_| bad())?;
    Ok((k, l))
}

pub(crate) fn parse_label_list(rest: &str, line_no: usize) -> Result<Vec<String>, BoolMatError> {
    let rest = rest.trim();
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    rest.split(',')
        .map(|s| {
            let s = s.trim();
            if s.is_empty() {
                Err(BoolMatError::Parse {
                    line: line_no,
                    msg: "empty label".into(),
                })
            } else {
                Ok(s.to_string())
            }
        })
        .collect()
}

fn check_labels(axis: &'static str, expected: usize, labels: &[String]) -> Result<(), BoolMatError> {
    if labels.len() != expected {
        return Err(BoolMatError::LabelCount {
            axis,
            expected,
            got: labels.len(),
        });
    }
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(BoolMatError::DuplicateLabel {
                axis,
                label: l.clone(),
            });
        }
    }
    Ok(())
}

impl fmt::Debug for BoolMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BoolMatrix {}x{}", self.rows, self.cols)?;
        for r in &self.data {
            writeln!(f, "  {r}")?;
        }
        Ok(())
    }
}

fn shape_str(m: &BoolMatrix) -> String {
    format!("{}x{}", m.rows, m.cols)
}

/// Boolean product `Q R^T`: entry `(i, j)` is 1 iff some column `r` has
/// `Q[i][r] = R[j][r] = 1`.
pub fn boolean_product(q: &BoolMatrix, r: &BoolMatrix) -> Result<BoolMatrix, BoolMatError> {
    if q.cols != r.cols {
        return Err(BoolMatError::DimensionMismatch {
            left: format!("Q {}", shape_str(q)),
            right: format!("R {}", shape_str(r)),
        });
    }
    let mut out = BoolMatrix::zeros(q.rows, r.rows);
    for i in 0..q.rows {
        for j in 0..r.rows {
            if q.data[i].and_count(&r.data[j]) > 0 {
                out.set(i, j, true);
            }
        }
    }
    out.row_labels = q.row_labels.clone();
    out.col_labels = r.row_labels.clone();
    Ok(out)
}

/// Entry `(i, j)` of the product `Q R^T` taken over the integers.
pub fn integer_product_entry(
    q: &BoolMatrix,
    r: &BoolMatrix,
    i: usize,
    j: usize,
) -> Result<usize, BoolMatError> {
    if q.cols != r.cols {
        return Err(BoolMatError::DimensionMismatch {
            left: format!("Q {}", shape_str(q)),
            right: format!("R {}", shape_str(r)),
        });
    }
    if i >= q.rows || j >= r.rows {
        return Err(BoolMatError::OutOfRange {
            row: i,
            col: j,
            rows: q.rows,
            cols: r.rows,
        });
    }
    Ok(q.data[i].and_count(&r.data[j]))
}

/// Positions where `approx` differs from `reference`.
pub fn hamming_error(reference: &BoolMatrix, approx: &BoolMatrix) -> Result<HammingError, BoolMatError> {
    if reference.shape() != approx.shape() {
        return Err(BoolMatError::DimensionMismatch {
            left: shape_str(reference),
            right: shape_str(approx),
        });
    }
    let mut err = HammingError::default();
    for (p, a) in reference.data.iter().zip(&approx.data) {
        err.ones_to_zero += p.and_not_count(a);
        err.zeros_to_one += a.and_not_count(p);
    }
    Ok(err)
}

/// Cells where `approx` differs from `reference`, as `(row, col, reference_value)`.
pub fn error_locations(reference: &BoolMatrix, approx: &BoolMatrix) -> Result<Vec<(usize, usize, bool)>, BoolMatError> {
    if reference.shape() != approx.shape() {
        return Err(BoolMatError::DimensionMismatch {
            left: shape_str(reference),
            right: shape_str(approx),
        });
    }
    let mut out = Vec::new();
    for i in 0..reference.rows {
        for j in 0..reference.cols {
            let p = reference.get(i, j);
            if p != approx.get(i, j) {
                out.push((i, j, p));
            }
        }
    }
    Ok(out)
}
