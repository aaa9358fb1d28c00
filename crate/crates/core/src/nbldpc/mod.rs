//! Outer non-binary LDPC code over GF(B).
//!
//! [`ParityCheckMatrix`] keeps the sparse rows of H together with a reduced
//! row-echelon form used for systematic encoding. Soft-in soft-out belief
//! propagation lives in [`bp`].

pub mod bp;
mod io;

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gf::{FieldElement, FieldSpec};

pub use bp::{
    check_node_update, check_to_variable, siso_decode, siso_decode_into, BpWorkspace, PROB_FLOOR,
};

/// One nonzero of a parity-check row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub col: usize,
    pub coeff: FieldElement,
}

/// Systematic encoding data derived from the reduced row-echelon form of H.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Echelon {
    /// Pivot column of each reduced row.
    pivots: Vec<usize>,
    /// Non-pivot columns in increasing order; the information positions.
    info_cols: Vec<usize>,
    /// For each reduced row, the nonzeros on information columns.
    parity_rows: Vec<Vec<(usize, FieldElement)>>,
}

/// Sparse parity-check matrix of the outer code.
#[derive(Debug, Clone)]
pub struct ParityCheckMatrix {
    field: Arc<FieldSpec>,
    cols: usize,
    rows: Vec<Vec<Entry>>,
    /// Edge offset of each row in the flattened edge list.
    row_offsets: Vec<usize>,
    /// For each variable, the global edge indices touching it.
    var_edges: Vec<Vec<usize>>,
    echelon: Echelon,
}

impl PartialEq for ParityCheckMatrix {
    fn eq(&self, other: &Self) -> bool {
        *self.field == *other.field && self.cols == other.cols && self.rows == other.rows
    }
}

/// A length-L vector of field elements with zero syndrome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OuterCodeword {
    symbols: Vec<FieldElement>,
}

impl OuterCodeword {
    pub fn symbols(&self) -> &[FieldElement] {
        &self.symbols
    }

    pub fn into_symbols(self) -> Vec<FieldElement> {
        self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Checked constructor: fails unless `H * symbols = 0`.
    pub fn new(symbols: Vec<FieldElement>, h: &ParityCheckMatrix) -> Result<Self> {
        if !h.is_codeword(&symbols)? {
            return Err(Error::InvalidParameter(
                "vector has nonzero syndrome".into(),
            ));
        }
        Ok(OuterCodeword { symbols })
    }
}

impl ParityCheckMatrix {
    /// Builds a matrix from explicit rows, validating coefficients, column
    /// indices and full row rank.
    pub fn from_rows(field: Arc<FieldSpec>, cols: usize, rows: Vec<Vec<Entry>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Construction(
                "parity-check matrix has no rows".into(),
            ));
        }
        if rows.len() >= cols {
            return Err(Error::Construction(format!(
                "{} rows for {} columns leaves no information symbols",
                rows.len(),
                cols
            )));
        }
        for (a, row) in rows.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for e in row {
                if e.col >= cols {
                    return Err(Error::Construction(format!(
                        "row {a}: column {} out of range",
                        e.col
                    )));
                }
                if e.coeff.is_zero() || e.coeff.index() >= field.size() {
                    return Err(Error::Construction(format!(
                        "row {a}: invalid coefficient {} at column {}",
                        e.coeff.value(),
                        e.col
                    )));
                }
                if !seen.insert(e.col) {
                    return Err(Error::Construction(format!(
                        "row {a}: column {} repeated",
                        e.col
                    )));
                }
            }
        }
        let echelon = reduce(&field, cols, &rows)?;
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut var_edges = vec![Vec::new(); cols];
        let mut edge = 0;
        for row in &rows {
            row_offsets.push(edge);
            for e in row {
                var_edges[e.col].push(edge);
                edge += 1;
            }
        }
        row_offsets.push(edge);
        Ok(ParityCheckMatrix {
            field,
            cols,
            rows,
            row_offsets,
            var_edges,
            echelon,
        })
    }

    #[inline]
    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn field_arc(&self) -> Arc<FieldSpec> {
        Arc::clone(&self.field)
    }

    /// Number of variable nodes L.
    #[inline]
    pub fn num_cols(&self) -> usize {
        self.cols
    }

    /// Number of checks L - L_inf.
    #[inline]
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Number of information symbols L_inf.
    #[inline]
    pub fn num_info(&self) -> usize {
        self.cols - self.rows.len()
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    pub fn rows(&self) -> &[Vec<Entry>] {
        &self.rows
    }

    pub fn row(&self, a: usize) -> &[Entry] {
        &self.rows[a]
    }

    pub(crate) fn row_offset(&self, a: usize) -> usize {
        self.row_offsets[a]
    }

    pub(crate) fn var_edges(&self, i: usize) -> &[usize] {
        &self.var_edges[i]
    }

    /// Column indices carrying the information symbols, in encoding order.
    pub fn info_positions(&self) -> &[usize] {
        &self.echelon.info_cols
    }

    /// Smallest and largest column weight.
    pub fn column_degree_range(&self) -> (usize, usize) {
        let min = self.var_edges.iter().map(Vec::len).min().unwrap_or(0);
        let max = self.var_edges.iter().map(Vec::len).max().unwrap_or(0);
        (min, max)
    }

    /// Number of length-4 cycles: pairs of columns sharing at least two rows,
    /// counted once per shared row pair.
    pub fn four_cycles(&self) -> usize {
        let m = self.rows.len();
        let mut pair_count = vec![0usize; m * m];
        for edges in &self.var_edges {
            let rows: Vec<usize> = edges.iter().map(|&e| self.edge_row(e)).collect();
            for (k, &a) in rows.iter().enumerate() {
                for &b in &rows[k + 1..] {
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    pair_count[lo * m + hi] += 1;
                }
            }
        }
        pair_count
            .iter()
            .map(|&c| c * c.saturating_sub(1) / 2)
            .sum()
    }

    /// Length of the shortest cycle of the Tanner graph, `None` if acyclic.
    pub fn girth(&self) -> Option<usize> {
        let l = self.cols;
        let total = l + self.rows.len();
        let neighbours = |v: usize| -> Vec<usize> {
            if v < l {
                self.var_edges[v]
                    .iter()
                    .map(|&e| l + self.edge_row(e))
                    .collect()
            } else {
                self.rows[v - l].iter().map(|e| e.col).collect()
            }
        };
        let adjacency: Vec<Vec<usize>> = (0..total).map(neighbours).collect();
        let mut best: Option<usize> = None;
        let mut dist = vec![usize::MAX; total];
        let mut parent = vec![usize::MAX; total];
        let mut queue = std::collections::VecDeque::new();
        for start in 0..total {
            dist.fill(usize::MAX);
            dist[start] = 0;
            parent[start] = usize::MAX;
            queue.clear();
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                if best.is_some_and(|g| 2 * dist[u] + 1 >= g) {
                    break;
                }
                for &w in &adjacency[u] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        parent[w] = u;
                        queue.push_back(w);
                    } else if parent[u] != w {
                        let len = dist[u] + dist[w] + 1;
                        best = Some(best.map_or(len, |g| g.min(len)));
                    }
                }
            }
        }
        best
    }

    fn edge_row(&self, edge: usize) -> usize {
        self.row_offsets.partition_point(|&o| o <= edge) - 1
    }

    /// `s_a = sum_i H_ai c_i` for every row.
    pub fn syndrome(&self, word: &[FieldElement]) -> Result<Vec<FieldElement>> {
        if word.len() != self.cols {
            return Err(Error::dim("syndrome input", self.cols, word.len()));
        }
        let f = &*self.field;
        Ok(self
            .rows
            .iter()
            .map(|row| {
                row.iter().fold(FieldElement::ZERO, |acc, e| {
                    f.add(acc, f.mul(e.coeff, word[e.col]))
                })
            })
            .collect())
    }

    pub fn is_codeword(&self, word: &[FieldElement]) -> Result<bool> {
        Ok(self.syndrome(word)?.iter().all(|s| s.is_zero()))
    }

    /// Systematic encoding: `info` is placed on [`Self::info_positions`] and
    /// the pivot positions are solved from the reduced rows.
    pub fn encode(&self, info: &[FieldElement]) -> Result<OuterCodeword> {
        let e = &self.echelon;
        if info.len() != e.info_cols.len() {
            return Err(Error::dim(
                "information symbols",
                e.info_cols.len(),
                info.len(),
            ));
        }
        let f = &*self.field;
        let mut symbols = vec![FieldElement::ZERO; self.cols];
        for (&col, &v) in e.info_cols.iter().zip(info) {
            if v.index() >= f.size() {
                return Err(Error::Field(format!(
                    "symbol {} outside GF({})",
                    v.value(),
                    f.size()
                )));
            }
            symbols[col] = v;
        }
        for (k, &pivot) in e.pivots.iter().enumerate() {
            // pivot + sum_j R_kj x_j = 0, and -1 = 1 in characteristic 2
            symbols[pivot] = e.parity_rows[k]
                .iter()
                .fold(FieldElement::ZERO, |acc, &(c, r)| {
                    f.add(acc, f.mul(r, symbols[c]))
                });
        }
        Ok(OuterCodeword { symbols })
    }

    /// Recovers the information symbols of a codeword.
    pub fn extract_info(&self, word: &[FieldElement]) -> Vec<FieldElement> {
        self.echelon.info_cols.iter().map(|&c| word[c]).collect()
    }

    /// Dense copy of H, row-major, for small-size reference checks.
    pub fn to_dense(&self) -> Vec<Vec<FieldElement>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![FieldElement::ZERO; self.cols];
                for e in row {
                    dense[e.col] = e.coeff;
                }
                dense
            })
            .collect()
    }
}

/// Gaussian elimination over GF(B). Pivots are searched from the last column
/// backwards so the parity symbols land at the end for typical matrices.
fn reduce(field: &FieldSpec, cols: usize, rows: &[Vec<Entry>]) -> Result<Echelon> {
    let m = rows.len();
    let mut dense: Vec<Vec<FieldElement>> = rows
        .iter()
        .map(|row| {
            let mut d = vec![FieldElement::ZERO; cols];
            for e in row {
                d[e.col] = e.coeff;
            }
            d
        })
        .collect();
    let mut pivots = Vec::with_capacity(m);
    let mut rank = 0;
    for col in (0..cols).rev() {
        if rank == m {
            break;
        }
        let Some(p) = (rank..m).find(|&r| !dense[r][col].is_zero()) else {
            continue;
        };
        dense.swap(rank, p);
        let inv = field.inv(dense[rank][col])?;
        for v in dense[rank].iter_mut() {
            *v = field.mul(*v, inv);
        }
        let pivot_row = dense[rank].clone();
        for (r, row) in dense.iter_mut().enumerate() {
            if r == rank || row[col].is_zero() {
                continue;
            }
            let factor = row[col];
            for (v, &p) in row.iter_mut().zip(&pivot_row) {
                *v = field.add(*v, field.mul(factor, p));
            }
        }
        pivots.push(col);
        rank += 1;
    }
    if rank < m {
        return Err(Error::Construction(format!(
            "parity-check matrix has rank {rank} < {m} rows"
        )));
    }
    let is_pivot = {
        let mut v = vec![false; cols];
        for &p in &pivots {
            v[p] = true;
        }
        v
    };
    let info_cols: Vec<usize> = (0..cols).filter(|&c| !is_pivot[c]).collect();
    let parity_rows = dense
        .iter()
        .map(|row| {
            info_cols
                .iter()
                .filter(|&&c| !row[c].is_zero())
                .map(|&c| (c, row[c]))
                .collect()
        })
        .collect();
    Ok(Echelon {
        pivots,
        info_cols,
        parity_rows,
    })
}

const SUPPORT_ATTEMPTS: usize = 64;
const RANK_ATTEMPTS: usize = 16;

/// Random parity-check matrix with `L - L_inf` rows, column weight
/// `variable_degree`, balanced row weights and uniform nonzero coefficients.
///
/// Column supports avoid 4-cycles whenever the greedy construction finds
/// such a placement within a bounded number of attempts; when the
/// dimensions make that impossible (e.g. more weight-2 columns than row
/// pairs) the attempt with the fewest 4-cycles is kept.
pub fn generate_code(
    sections: usize,
    info_sections: usize,
    field_size: usize,
    variable_degree: usize,
    seed: u64,
) -> Result<ParityCheckMatrix> {
    if info_sections == 0 || info_sections >= sections {
        return Err(Error::InvalidParameter(format!(
            "need L > L_inf >= 1, got L={sections}, L_inf={info_sections}"
        )));
    }
    let checks = sections - info_sections;
    if variable_degree < 2 {
        return Err(Error::InvalidParameter(format!(
            "variable degree {variable_degree} < 2"
        )));
    }
    let degree = variable_degree.min(checks);
    let field = Arc::new(FieldSpec::with_size(field_size)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best: Option<(usize, Vec<Vec<usize>>)> = None;
    for _ in 0..SUPPORT_ATTEMPTS {
        let supports = place_supports(sections, checks, degree, &mut rng);
        let cycles = count_support_cycles(&supports, checks);
        if best.as_ref().is_none_or(|(c, _)| cycles < *c) {
            best = Some((cycles, supports));
        }
        if cycles == 0 {
            break;
        }
    }
    let (cycles, supports) = best.expect("at least one attempt");
    if cycles > 0 {
        log::debug!(
            "parity-check matrix keeps {cycles} four-cycles ({sections}x{checks}, degree {degree})"
        );
    }

    let mut last_err = None;
    for _ in 0..RANK_ATTEMPTS {
        let mut rows: Vec<Vec<Entry>> = vec![Vec::new(); checks];
        for (col, support) in supports.iter().enumerate() {
            for &r in support {
                let coeff = FieldElement(rng.random_range(1..field.size()) as u16);
                rows[r].push(Entry { col, coeff });
            }
        }
        match ParityCheckMatrix::from_rows(Arc::clone(&field), sections, rows) {
            Ok(h) => return Ok(h),
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::Construction(format!(
        "no full-rank matrix after {RANK_ATTEMPTS} attempts: {}",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Greedy support placement: each new row of a column minimizes the number
/// of already-used row pairs it would create, then the row weight.
fn place_supports(
    cols: usize,
    checks: usize,
    degree: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let mut row_weight = vec![0usize; checks];
    let mut pair_used = vec![0u32; checks * checks];
    let mut order: Vec<usize> = (0..checks).collect();
    let mut supports = Vec::with_capacity(cols);
    for _ in 0..cols {
        let mut support: Vec<usize> = Vec::with_capacity(degree);
        for _ in 0..degree {
            order.shuffle(rng);
            let pick = order
                .iter()
                .copied()
                .filter(|r| !support.contains(r))
                .min_by_key(|&r| {
                    let clash: u32 = support.iter().map(|&s| pair_used[s * checks + r]).sum();
                    (clash, row_weight[r])
                })
                .expect("degree <= checks");
            support.push(pick);
        }
        for (k, &a) in support.iter().enumerate() {
            row_weight[a] += 1;
            for &b in &support[k + 1..] {
                pair_used[a * checks + b] += 1;
                pair_used[b * checks + a] += 1;
            }
        }
        support.sort_unstable();
        supports.push(support);
    }
    supports
}

fn count_support_cycles(supports: &[Vec<usize>], checks: usize) -> usize {
    let mut pair_count = vec![0usize; checks * checks];
    for s in supports {
        for (k, &a) in s.iter().enumerate() {
            for &b in &s[k + 1..] {
                pair_count[a * checks + b] += 1;
            }
        }
    }
    pair_count
        .iter()
        .map(|&c| c * c.saturating_sub(1) / 2)
        .sum()
}
