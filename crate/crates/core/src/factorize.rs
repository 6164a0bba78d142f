//! Exact and approximate Boolean matrix factorization.
//!
//! A [`Factorization`] is an ordered list of `(q, r)` vector pairs whose
//! Boolean outer products, OR-ed together, reconstruct (or approximate) a
//! target matrix. [`exact_boolean_rank`] finds the smallest exact one by
//! covering the 1-entries with maximal all-ones rectangles; [`asso_factorize`]
//! is the greedy association-based heuristic for low-rank approximations.

use std::collections::HashSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::boolmat::{hamming_error, BitVector, BoolMatError, BoolMatrix, HammingError};

/// Default bound on `rows * cols` for the exact solver.
pub const DEFAULT_EXACT_CELL_CAP: usize = 400;
/// Default search-node budget for the exact solver.
pub const DEFAULT_MAX_SEARCH: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorizeError {
    #[error("{rows}x{cols} matrix exceeds the exact-solver cap of {cap} cells; use approximate factorization")]
    SizeCap { rows: usize, cols: usize, cap: usize },
    #[error("exact search exceeded {nodes} nodes; best rank found so far is {best_bound}")]
    Timeout { nodes: usize, best_bound: usize },
    #[error("exhaustive search would examine {candidates} candidate factor sets (cap {cap})")]
    SearchCap { candidates: u128, cap: u128 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("cannot truncate a rank-{rank} factorization to {requested} pairs")]
    TruncateBeyondRank { requested: usize, rank: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Matrix(#[from] BoolMatError),
}

/// One rank-1 term `q r^T` of a factorization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorPair {
    pub q: BitVector,
    pub r: BitVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    rows: usize,
    cols: usize,
    pairs: Vec<FactorPair>,
    row_labels: Option<Vec<String>>,
    col_labels: Option<Vec<String>>,
    target: Option<BoolMatrix>,
    error: Option<HammingError>,
    recorded_error: Option<usize>,
}

impl Factorization {
    /// Rank-0 factorization of a `rows x cols` matrix.
    pub fn empty(rows: usize, cols: usize) -> Self {
        Factorization {
            rows,
            cols,
            pairs: Vec::new(),
            row_labels: None,
            col_labels: None,
            target: None,
            error: None,
            recorded_error: None,
        }
    }

    /// Builds a factorization from factor matrices `Q` (k x n) and `R` (l x n).
    /// Row labels of `Q` and `R` become the row and column labels.
    pub fn from_factors(q: &BoolMatrix, r: &BoolMatrix) -> Result<Self, FactorizeError> {
        if q.cols() != r.cols() {
            return Err(BoolMatError::DimensionMismatch {
                left: format!("Q {}x{}", q.rows(), q.cols()),
                right: format!("R {}x{}", r.rows(), r.cols()),
            }
            .into());
        }
        let mut f = Factorization::empty(q.rows(), r.rows());
        for c in 0..q.cols() {
            f.pairs.push(FactorPair {
                q: q.column(c),
                r: r.column(c),
            });
        }
        f.row_labels = q.row_labels().map(<[String]>::to_vec);
        f.col_labels = r.row_labels().map(<[String]>::to_vec);
        Ok(f)
    }

    pub fn rank(&self) -> usize {
        self.pairs.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn pairs(&self) -> &[FactorPair] {
        &self.pairs
    }

    pub fn row_labels(&self) -> Option<&[String]> {
        self.row_labels.as_deref()
    }

    pub fn col_labels(&self) -> Option<&[String]> {
        self.col_labels.as_deref()
    }

    pub fn target(&self) -> Option<&BoolMatrix> {
        self.target.as_ref()
    }

    /// Mismatches against the attached target, split by direction.
    pub fn error(&self) -> Option<HammingError> {
        self.error
    }

    /// Total mismatch count: from the attached target if any, otherwise the
    /// value read from a factorization file.
    pub fn error_count(&self) -> Option<usize> {
        self.error.map(|e| e.total()).or(self.recorded_error)
    }

    pub fn push_pair(&mut self, q: BitVector, r: BitVector) {
        assert_eq!(q.len(), self.rows);
        assert_eq!(r.len(), self.cols);
        self.pairs.push(FactorPair { q, r });
        self.refresh_error();
    }

    /// Attaches the matrix this factorization approximates. Labels are taken
    /// from the target when the factorization has none.
    pub fn attach_target(&mut self, target: &BoolMatrix) -> Result<(), FactorizeError> {
        if target.shape() != (self.rows, self.cols) {
            return Err(BoolMatError::DimensionMismatch {
                left: format!("factorization {}x{}", self.rows, self.cols),
                right: format!("target {}x{}", target.rows(), target.cols()),
            }
            .into());
        }
        if self.row_labels.is_none() {
            self.row_labels = target.row_labels().map(<[String]>::to_vec);
        }
        if self.col_labels.is_none() {
            self.col_labels = target.col_labels().map(<[String]>::to_vec);
        }
        self.target = Some(target.clone());
        self.refresh_error();
        Ok(())
    }

    pub fn set_labels(&mut self, rows: Vec<String>, cols: Vec<String>) -> Result<(), FactorizeError> {
        // validated through BoolMatrix
        let probe = BoolMatrix::zeros(self.rows, self.cols).with_labels(rows, cols)?;
        self.row_labels = probe.row_labels().map(<[String]>::to_vec);
        self.col_labels = probe.col_labels().map(<[String]>::to_vec);
        Ok(())
    }

    fn refresh_error(&mut self) {
        if let Some(t) = &self.target {
            let rec = self.reconstruct();
            self.error = Some(hamming_error(t, &rec).expect("shapes checked on attach"));
            self.recorded_error = None;
        }
    }

    /// The `k x n` factor whose columns are the `q` vectors.
    pub fn q_matrix(&self) -> BoolMatrix {
        let mut m = BoolMatrix::from_fn(self.rows, self.rank(), |i, c| self.pairs[c].q.get(i));
        m.set_row_labels(self.row_labels.clone()).expect("labels validated");
        m
    }

    /// The `l x n` factor whose columns are the `r` vectors.
    pub fn r_matrix(&self) -> BoolMatrix {
        let mut m = BoolMatrix::from_fn(self.cols, self.rank(), |j, c| self.pairs[c].r.get(j));
        m.set_row_labels(self.col_labels.clone()).expect("labels validated");
        m
    }

    /// The Boolean product `Q R^T`.
    pub fn reconstruct(&self) -> BoolMatrix {
        let mut m = BoolMatrix::zeros(self.rows, self.cols);
        for p in &self.pairs {
            for i in p.q.iter_ones() {
                for j in p.r.iter_ones() {
                    m.set(i, j, true);
                }
            }
        }
        if let (Some(r), Some(c)) = (&self.row_labels, &self.col_labels) {
            m = m.with_labels(r.clone(), c.clone()).expect("labels validated");
        }
        m
    }

    /// Serializes to the factorization file format: a `n k l error` line, optional
    /// `#rows`/`#cols` label lines, then `q` and `r` as 0/1 strings for each pair.
    pub fn to_text(&self) -> String {
        let err = match self.error_count() {
            Some(e) => e.to_string(),
            None => "-".to_string(),
        };
        let mut out = format!("{} {} {} {}\n", self.rank(), self.rows, self.cols, err);
        if let Some(e) = self.error {
            out.push_str(&format!("#flips {} {}\n", e.ones_to_zero, e.zeros_to_one));
        }
        if let Some(l) = &self.row_labels {
            out.push_str(&format!("#rows {}\n", l.join(",")));
        }
        if let Some(l) = &self.col_labels {
            out.push_str(&format!("#cols {}\n", l.join(",")));
        }
        for p in &self.pairs {
            out.push_str(&format!("{}\n{}\n", p.q, p.r));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, FactorizeError> {
        let perr = |line: usize, msg: String| FactorizeError::Parse { line, msg };
        let mut header: Option<(usize, usize, usize, Option<usize>)> = None;
        let mut flips = None;
        let mut row_labels = None;
        let mut col_labels = None;
        let mut vectors: Vec<(usize, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix("#rows") {
                row_labels = Some(crate::boolmat::parse_label_list(rest, line_no)?);
                continue;
            }
            if let Some(rest) = line.strip_prefix("#cols") {
                col_labels = Some(crate::boolmat::parse_label_list(rest, line_no)?);
                continue;
            }
            if let Some(rest) = line.strip_prefix("#flips") {
                let nums: Vec<usize> = rest
                    .split_whitespace()
                    .map(|s| s.parse().map_err(|_| perr(line_no, format!("bad flip count `{s}`"))))
                    .collect::<Result<_, _>>()?;
                if nums.len() != 2 {
                    return Err(perr(line_no, "expected `#flips <1->0> <0->1>`".into()));
                }
                flips = Some(HammingError {
                    ones_to_zero: nums[0],
                    zeros_to_one: nums[1],
                });
                continue;
            }
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            if header.is_none() {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 {
                    return Err(perr(line_no, format!("expected `n k l error`, found `{line}`")));
                }
                let num = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| perr(line_no, format!("expected a count, found `{s}`")))
                };
                let err = if parts[3] == "-" { None } else { Some(num(parts[3])?) };
                header = Some((num(parts[0])?, num(parts[1])?, num(parts[2])?, err));
            } else {
                vectors.push((line_no, line.to_string()));
            }
        }
        let Some((n, k, l, err)) = header else {
            return Err(perr(1, "missing header line".into()));
        };
        if vectors.len() != 2 * n {
            return Err(perr(
                vectors.last().map_or(1, |v| v.0),
                format!("expected {} vector lines, found {}", 2 * n, vectors.len()),
            ));
        }
        let parse_vec = |(line_no, s): &(usize, String), len: usize| -> Result<BitVector, FactorizeError> {
            if s.chars().count() != len {
                return Err(perr(*line_no, format!("expected {len} characters, found {}", s.chars().count())));
            }
            let mut v = BitVector::zeros(len);
            for (i, ch) in s.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => v.set(i, true),
                    other => return Err(perr(*line_no, format!("invalid character `{other}`"))),
                }
            }
            Ok(v)
        };
        let mut f = Factorization::empty(k, l);
        for chunk in vectors.chunks(2) {
            let q = parse_vec(&chunk[0], k)?;
            let r = parse_vec(&chunk[1], l)?;
            f.pairs.push(FactorPair { q, r });
        }
        if row_labels.is_some() || col_labels.is_some() {
            let probe = BoolMatrix::zeros(k, l);
            let mut probe = probe;
            probe.set_row_labels(row_labels)?;
            probe.set_col_labels(col_labels)?;
            f.row_labels = probe.row_labels().map(<[String]>::to_vec);
            f.col_labels = probe.col_labels().map(<[String]>::to_vec);
        }
        f.recorded_error = err;
        if let Some(fl) = flips {
            if Some(fl.total()) != err {
                return Err(perr(1, "flip counts disagree with the error field".into()));
            }
        }
        f.error = flips;
        Ok(f)
    }
}

/// Keeps the first `n` pairs. The error is recomputed against the attached target.
pub fn truncate(f: &Factorization, n: usize) -> Result<Factorization, FactorizeError> {
    if n > f.rank() {
        return Err(FactorizeError::TruncateBeyondRank {
            requested: n,
            rank: f.rank(),
        });
    }
    let mut out = f.clone();
    out.pairs.truncate(n);
    if out.target.is_some() {
        out.refresh_error();
    } else if n != f.rank() {
        out.error = None;
        out.recorded_error = None;
    }
    Ok(out)
}

/// Memberships (bitmask over basis vectors) per target row minimizing that
/// row's Hamming distance to the OR of the chosen basis vectors. Current
/// memberships are kept on ties. Returns the total error.
fn best_memberships(targets: &[BitVector], basis: &[BitVector], members: &mut [u64]) -> usize {
    let n = basis.len();
    let union_of = |mask: u64| {
        let mut u = BitVector::zeros(targets.first().map_or(0, BitVector::len));
        for (c, b) in basis.iter().enumerate() {
            if mask >> c & 1 == 1 {
                u.or_assign(b);
            }
        }
        u
    };
    if n <= 12 {
        let mut unions = vec![union_of(0)];
        for s in 1u64..1 << n {
            let low = s.trailing_zeros() as usize;
            let mut u = unions[(s & (s - 1)) as usize].clone();
            u.or_assign(&basis[low]);
            unions.push(u);
        }
        let mut total = 0;
        for (t, m) in targets.iter().zip(members.iter_mut()) {
            let mut best = (t.hamming(&unions[*m as usize]), *m);
            for (s, u) in unions.iter().enumerate() {
                let e = t.hamming(u);
                if e < best.0 {
                    best = (e, s as u64);
                }
            }
            *m = best.1;
            total += best.0;
        }
        total
    } else {
        let mut total = 0;
        for (t, m) in targets.iter().zip(members.iter_mut()) {
            let mut err = t.hamming(&union_of(*m));
            let mut improved = true;
            while improved {
                improved = false;
                for c in 0..n {
                    let e = t.hamming(&union_of(*m ^ 1 << c));
                    if e < err {
                        err = e;
                        *m ^= 1 << c;
                        improved = true;
                    }
                }
            }
            total += err;
        }
        total
    }
}

/// Alternating refinement of `f` against `p`: each row's membership in the
/// `q` vectors is re-chosen optimally with the `r` vectors fixed, then each
/// column's membership in the `r` vectors with `q` fixed. Repeats until a
/// sweep brings no improvement or `max_sweeps` is reached. The error never
/// increases and the rank is unchanged.
pub fn refine(p: &BoolMatrix, f: &Factorization, max_sweeps: usize) -> Result<Factorization, FactorizeError> {
    let (k, l) = p.shape();
    if f.dims() != (k, l) {
        return Err(BoolMatError::DimensionMismatch {
            left: format!("matrix {k}x{l}"),
            right: format!("factorization {}x{}", f.dims().0, f.dims().1),
        }
        .into());
    }
    let n = f.rank();
    if n > 64 {
        return Err(FactorizeError::InvalidParams(format!("refinement supports rank <= 64, got {n}")));
    }
    let mask_of = |pick: &dyn Fn(&FactorPair) -> &BitVector, len: usize| -> Vec<u64> {
        (0..len)
            .map(|i| f.pairs.iter().enumerate().fold(0u64, |m, (c, pair)| m | (u64::from(pick(pair).get(i)) << c)))
            .collect()
    };
    let mut q_members = mask_of(&|pair| &pair.q, k);
    let mut r_members = mask_of(&|pair| &pair.r, l);
    let vectors = |members: &[u64], len: usize| -> Vec<BitVector> {
        (0..n)
            .map(|c| BitVector::from_bools(&(0..len).map(|i| members[i] >> c & 1 == 1).collect::<Vec<_>>()))
            .collect()
    };
    let rows = p.row_vectors().to_vec();
    let cols: Vec<BitVector> = (0..l).map(|j| p.column(j)).collect();
    let mut error = hamming_error(p, &f.reconstruct())?.total();
    for _ in 0..max_sweeps {
        best_memberships(&rows, &vectors(&r_members, l), &mut q_members);
        let after = best_memberships(&cols, &vectors(&q_members, k), &mut r_members);
        if after >= error {
            error = after;
            break;
        }
        error = after;
    }
    let mut out = f.clone();
    out.pairs = vectors(&q_members, k)
        .into_iter()
        .zip(vectors(&r_members, l))
        .map(|(q, r)| FactorPair { q, r })
        .collect();
    out.target = Some(p.clone());
    out.refresh_error();
    debug_assert_eq!(out.error_count(), Some(error));
    Ok(out)
}

/// Limits for [`exact_boolean_rank`].
#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    /// Largest `rows * cols` accepted.
    pub cell_cap: usize,
    /// Search-node budget shared by concept enumeration and the cover search.
    pub max_search: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            cell_cap: DEFAULT_EXACT_CELL_CAP,
            max_search: DEFAULT_MAX_SEARCH,
        }
    }
}

/// A maximal all-ones submatrix: `extent` rows times `intent` columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Concept {
    pub extent: BitVector,
    pub intent: BitVector,
}

/// Enumerates every maximal all-ones rectangle of `p`.
///
/// Intents are exactly the nonempty intersections of row sets, so they are
/// generated by closing the set of rows under intersection.
pub fn maximal_rectangles(p: &BoolMatrix, budget: usize) -> Result<Vec<Concept>, usize> {
    let mut seen: HashSet<BitVector> = HashSet::new();
    let mut intents: Vec<BitVector> = Vec::new();
    let mut work = 0usize;
    for i in 0..p.rows() {
        let row = p.row(i);
        if !row.any() {
            continue;
        }
        let mut fresh = Vec::new();
        if seen.insert(row.clone()) {
            fresh.push(row.clone());
        }
        for existing in &intents {
            work += 1;
            if work > budget {
                return Err(work);
            }
            let mut meet = existing.clone();
            meet.and_assign(row);
            if meet.any() && seen.insert(meet.clone()) {
                fresh.push(meet);
            }
        }
        intents.extend(fresh);
    }
    Ok(intents
        .into_iter()
        .map(|intent| {
            let mut extent = BitVector::zeros(p.rows());
            for i in 0..p.rows() {
                if intent.is_subset(p.row(i)) {
                    extent.set(i, true);
                }
            }
            Concept { extent, intent }
        })
        .collect())
}

struct CoverSearch<'a> {
    p: &'a BoolMatrix,
    cells: Vec<(usize, usize)>,
    /// Cells covered by each concept, as bitsets over `cells`.
    sets: Vec<BitVector>,
    /// Concepts containing each cell.
    containing: Vec<Vec<usize>>,
    best: Vec<usize>,
    nodes: usize,
    budget: usize,
}

impl CoverSearch<'_> {
    /// Greedy fooling set: uncovered cells no two of which fit in one all-ones
    /// rectangle. Its size bounds the number of rectangles still needed.
    fn lower_bound(&self, uncovered: &BitVector) -> usize {
        let mut picked: Vec<(usize, usize)> = Vec::new();
        for c in uncovered.iter_ones() {
            let (i, j) = self.cells[c];
            if picked
                .iter()
                .all(|&(a, b)| !(self.p.get(i, b) && self.p.get(a, j)))
            {
                picked.push((i, j));
            }
        }
        picked.len()
    }

    fn search(&mut self, uncovered: &BitVector, chosen: &mut Vec<usize>) -> Result<(), ()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(());
        }
        if !uncovered.any() {
            if chosen.len() < self.best.len() {
                self.best = chosen.clone();
            }
            return Ok(());
        }
        if chosen.len() + self.lower_bound(uncovered) >= self.best.len() {
            return Ok(());
        }
        let cell = uncovered
            .iter_ones()
            .min_by_key(|&c| self.containing[c].len())
            .expect("nonempty");
        let mut options: Vec<(usize, usize)> = self.containing[cell]
            .iter()
            .map(|&s| (self.sets[s].and_count(uncovered), s))
            .collect();
        options.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, s) in options {
            let mut rest = uncovered.clone();
            for c in self.sets[s].iter_ones() {
                rest.set(c, false);
            }
            chosen.push(s);
            self.search(&rest, chosen)?;
            chosen.pop();
            if chosen.len() + 1 >= self.best.len() {
                break;
            }
        }
        Ok(())
    }
}

/// Smallest `n` with `P = Q R^T` exactly, plus a witness factorization.
///
/// Solved as a minimum cover of the 1-entries by maximal all-ones rectangles,
/// with branch and bound over the cover.
pub fn exact_boolean_rank(
    p: &BoolMatrix,
    opts: ExactOptions,
) -> Result<(usize, Factorization), FactorizeError> {
    let (k, l) = p.shape();
    if k * l > opts.cell_cap {
        return Err(FactorizeError::SizeCap {
            rows: k,
            cols: l,
            cap: opts.cell_cap,
        });
    }
    let mut witness = Factorization::empty(k, l);
    if p.is_zero() {
        witness.attach_target(p)?;
        return Ok((0, witness));
    }
    let concepts = maximal_rectangles(p, opts.max_search).map_err(|nodes| FactorizeError::Timeout {
        nodes,
        best_bound: k.min(l),
    })?;

    let mut cells = Vec::new();
    let mut cell_index = vec![vec![usize::MAX; l]; k];
    for i in 0..k {
        for j in p.row(i).iter_ones() {
            cell_index[i][j] = cells.len();
            cells.push((i, j));
        }
    }
    let mut containing = vec![Vec::new(); cells.len()];
    let sets: Vec<BitVector> = concepts
        .iter()
        .enumerate()
        .map(|(s, c)| {
            let mut set = BitVector::zeros(cells.len());
            for i in c.extent.iter_ones() {
                for j in c.intent.iter_ones() {
                    let idx = cell_index[i][j];
                    set.set(idx, true);
                    containing[idx].push(s);
                }
            }
            set
        })
        .collect();

    let all = BitVector::ones(cells.len());
    let greedy = greedy_cover(&sets, &all);
    let by_rows = axis_cover(&concepts, p, true);
    let by_cols = axis_cover(&concepts, p, false);
    let initial = [greedy, by_rows, by_cols]
        .into_iter()
        .min_by_key(Vec::len)
        .expect("three candidates");

    let mut search = CoverSearch {
        p,
        cells,
        sets,
        containing,
        best: initial,
        nodes: 0,
        budget: opts.max_search,
    };
    if search.search(&all, &mut Vec::new()).is_err() {
        return Err(FactorizeError::Timeout {
            nodes: search.nodes,
            best_bound: search.best.len(),
        });
    }
    let best = search.best;
    for s in best {
        witness.pairs.push(FactorPair {
            q: concepts[s].extent.clone(),
            r: concepts[s].intent.clone(),
        });
    }
    witness.attach_target(p)?;
    debug_assert_eq!(witness.error().map(|e| e.total()), Some(0));
    Ok((witness.rank(), witness))
}

fn greedy_cover(sets: &[BitVector], all: &BitVector) -> Vec<usize> {
    let mut uncovered = all.clone();
    let mut chosen = Vec::new();
    while uncovered.any() {
        let (best, _) = sets
            .iter()
            .enumerate()
            .map(|(s, set)| (s, set.and_count(&uncovered)))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("sets cover every cell");
        for c in sets[best].iter_ones() {
            uncovered.set(c, false);
        }
        chosen.push(best);
    }
    chosen
}

/// One rectangle per nonzero row (or column): always a valid cover.
fn axis_cover(concepts: &[Concept], p: &BoolMatrix, rows: bool) -> Vec<usize> {
    let mut out = Vec::new();
    if rows {
        for i in 0..p.rows() {
            let row = p.row(i);
            if row.any() {
                let s = concepts.iter().position(|c| &c.intent == row).expect("row intents are concepts");
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
    } else {
        for j in 0..p.cols() {
            let col = p.column(j);
            if col.any() {
                let s = concepts.iter().position(|c| c.extent == col).expect("column extents are concepts");
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
    }
    out
}

/// Default bound on candidate factor sets for [`optimal_factorization`].
pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 50_000_000;

fn multiset_count(kinds: u128, n: usize) -> u128 {
    // C(kinds + n - 1, n), saturating
    let mut c: u128 = 1;
    for i in 0..n as u128 {
        c = c.saturating_mul(kinds + i) / (i + 1);
    }
    c
}

/// A rank-`n` factorization with the smallest possible error, by exhaustive
/// search over the `r` vectors of the shorter side. Each row's `q` entries
/// are then chosen independently. Ties resolve to the lexicographically
/// smallest `r` tuple.
pub fn optimal_factorization(p: &BoolMatrix, n: usize, cap: u128) -> Result<Factorization, FactorizeError> {
    let (k, l) = p.shape();
    if l > k {
        let t = optimal_factorization(&p.transpose(), n, cap)?;
        let mut f = Factorization::empty(k, l);
        for pair in t.pairs() {
            f.push_pair(pair.r.clone(), pair.q.clone());
        }
        f.attach_target(p)?;
        return Ok(f);
    }
    let n = n.min(l);
    if l > 32 {
        return Err(FactorizeError::SearchCap { candidates: u128::MAX, cap });
    }
    let kinds = 1u128 << l;
    let candidates = multiset_count(kinds, n);
    if candidates > cap {
        return Err(FactorizeError::SearchCap { candidates, cap });
    }
    let rows: Vec<u64> = (0..k)
        .map(|i| p.row(i).iter_ones().fold(0u64, |acc, j| acc | 1 << j))
        .collect();
    let error_of = |codes: &[u64]| -> usize {
        let unions: Vec<u64> = (0u32..1 << codes.len())
            .map(|s| (0..codes.len()).filter(|c| s >> c & 1 == 1).fold(0, |acc, c| acc | codes[c]))
            .collect();
        rows.iter()
            .map(|&row| unions.iter().map(|u| (u ^ row).count_ones() as usize).min().unwrap_or(0))
            .sum()
    };
    // depth-first over nondecreasing code tuples extending `prefix`
    fn best_under(prefix: &mut Vec<u64>, n: usize, kinds: u64, error_of: &dyn Fn(&[u64]) -> usize) -> (usize, Vec<u64>) {
        if prefix.len() == n {
            return (error_of(prefix), prefix.clone());
        }
        let start = prefix.last().copied().unwrap_or(0);
        let mut best = (usize::MAX, Vec::new());
        for c in start..kinds {
            prefix.push(c);
            let cand = best_under(prefix, n, kinds, error_of);
            prefix.pop();
            if cand.0 < best.0 {
                best = cand;
                if best.0 == 0 {
                    break;
                }
            }
        }
        best
    }
    let kinds = kinds as u64;
    let (_, codes) = if n == 0 {
        (error_of(&[]), Vec::new())
    } else {
        (0..kinds)
            .into_par_iter()
            .map(|first| best_under(&mut vec![first], n, kinds, &error_of))
            .reduce(|| (usize::MAX, Vec::new()), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
    };
    let mut qs = vec![BitVector::zeros(k); codes.len()];
    for (i, &row) in rows.iter().enumerate() {
        let best = (0u32..1 << codes.len())
            .min_by_key(|&s| {
                let u = (0..codes.len()).filter(|c| s >> c & 1 == 1).fold(0, |acc, c| acc | codes[c]);
                (u ^ row).count_ones()
            })
            .unwrap_or(0);
        for (c, q) in qs.iter_mut().enumerate() {
            q.set(i, best >> c & 1 == 1);
        }
    }
    let mut f = Factorization::empty(k, l);
    for (q, &code) in qs.into_iter().zip(&codes) {
        let r = BitVector::from_bools(&(0..l).map(|j| code >> j & 1 == 1).collect::<Vec<_>>());
        f.push_pair(q, r);
    }
    f.attach_target(p)?;
    Ok(f)
}

/// Parameters of the association-based greedy factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssoParams {
    /// Association confidence threshold in `(0, 1]`.
    pub tau: f64,
    /// Reward for covering a 1.
    pub w_plus: f64,
    /// Penalty for covering a 0.
    pub w_minus: f64,
    pub max_rank: usize,
}

impl AssoParams {
    pub fn with_rank(max_rank: usize) -> Self {
        AssoParams {
            max_rank,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), FactorizeError> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(FactorizeError::InvalidParams(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if !(self.w_plus > 0.0) || !self.w_plus.is_finite() {
            return Err(FactorizeError::InvalidParams(format!("w_plus must be > 0, got {}", self.w_plus)));
        }
        if !(self.w_minus >= 0.0) || !self.w_minus.is_finite() {
            return Err(FactorizeError::InvalidParams(format!("w_minus must be >= 0, got {}", self.w_minus)));
        }
        Ok(())
    }
}

impl Default for AssoParams {
    fn default() -> Self {
        AssoParams {
            tau: 0.7,
            w_plus: 1.0,
            w_minus: 1.0,
            max_rank: 1,
        }
    }
}

/// Candidate `r` vectors: one per nonzero column `i` of `p`, with
/// `r[j] = 1` iff `|col_i AND col_j| / |col_i| >= tau`.
pub fn association_candidates(p: &BoolMatrix, tau: f64) -> Vec<BitVector> {
    let columns: Vec<BitVector> = (0..p.cols()).map(|j| p.column(j)).collect();
    columns
        .iter()
        .filter(|c| c.any())
        .map(|ci| {
            let norm = ci.count_ones() as f64;
            let mut r = BitVector::zeros(p.cols());
            for (j, cj) in columns.iter().enumerate() {
                if ci.and_count(cj) as f64 / norm >= tau {
                    r.set(j, true);
                }
            }
            r
        })
        .collect()
}

/// Greedy association-based factorization of rank at most `params.max_rank`
/// (clamped to `min(rows, cols)`). Stops early once no pair has positive gain.
pub fn asso_factorize(p: &BoolMatrix, params: AssoParams) -> Result<Factorization, FactorizeError> {
    params.validate()?;
    let (k, l) = p.shape();
    let mut f = Factorization::empty(k, l);
    f.attach_target(p)?;
    let max_rank = params.max_rank.min(k.min(l));
    if max_rank == 0 || p.is_zero() {
        return Ok(f);
    }
    let candidates = association_candidates(p, params.tau);
    let mut covered: Vec<BitVector> = vec![BitVector::zeros(l); k];

    for _ in 0..max_rank {
        let best = candidates
            .par_iter()
            .enumerate()
            .map(|(idx, r)| (pair_gain(p, &covered, r, &params).0, idx))
            .reduce(
                || (f64::NEG_INFINITY, usize::MAX),
                |a, b| {
                    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                        b
                    } else {
                        a
                    }
                },
            );
        if best.1 == usize::MAX || best.0 <= 0.0 {
            break;
        }
        let r = candidates[best.1].clone();
        let (_, q) = pair_gain(p, &covered, &r, &params);
        for i in q.iter_ones() {
            covered[i].or_assign(&r);
        }
        f.push_pair(q, r);
    }
    Ok(f)
}

/// Total gain of adding `r` with its best companion `q`, and that `q`.
fn pair_gain(p: &BoolMatrix, covered: &[BitVector], r: &BitVector, params: &AssoParams) -> (f64, BitVector) {
    let mut q = BitVector::zeros(p.rows());
    let mut total = 0.0;
    for (i, cov) in covered.iter().enumerate() {
        let fresh = r.and_not_count(cov);
        if fresh == 0 {
            continue;
        }
        let ones = r.masked_count(p.row(i), cov);
        let zeros = fresh - ones;
        let gain = params.w_plus * ones as f64 - params.w_minus * zeros as f64;
        if gain > 0.0 {
            q.set(i, true);
            total += gain;
        }
    }
    (total, q)
}
