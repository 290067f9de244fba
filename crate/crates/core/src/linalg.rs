//! Exact field arithmetic and affine solving.
//!
//! Two fields are supported: the rationals (arbitrary precision) and prime
//! fields `F_p` with `p < 2^31`. Every decision procedure in the crate
//! eventually lands in [`solve_affine`] or [`rank`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cannot parse scalar {0:?}")]
    Parse(String),
    #[error("invalid field: {0}")]
    Field(String),
}

/// The base field of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "Q")]
    Rational,
    #[serde(rename = "Fp")]
    Prime(u64),
}

impl Field {
    pub fn prime(p: u64) -> Result<Field, LinalgError> {
        if !(2..1 << 31).contains(&p) || !is_prime(p) {
            return Err(LinalgError::Field(format!("{p} is not a prime below 2^31")));
        }
        Ok(Field::Prime(p))
    }

    pub fn zero(self) -> Scalar {
        self.from_i64(0)
    }

    pub fn one(self) -> Scalar {
        self.from_i64(1)
    }

    pub fn from_i64(self, v: i64) -> Scalar {
        match self {
            Field::Rational => Scalar::Q(BigRational::from_integer(BigInt::from(v))),
            Field::Prime(p) => Scalar::Fp {
                value: v.rem_euclid(p as i64) as u64,
                p,
            },
        }
    }

    pub fn sign(self, negative: bool) -> Scalar {
        self.from_i64(if negative { -1 } else { 1 })
    }

    pub fn zeros(self, len: usize) -> Vec<Scalar> {
        vec![self.zero(); len]
    }

    pub fn parse(self, s: &str) -> Result<Scalar, LinalgError> {
        let s = s.trim();
        match self {
            Field::Rational => {
                let (num, den) = match s.split_once('/') {
                    Some((n, d)) => (n.trim(), d.trim()),
                    None => (s, "1"),
                };
                let num = BigInt::from_str(num).map_err(|_| LinalgError::Parse(s.into()))?;
                let den = BigInt::from_str(den).map_err(|_| LinalgError::Parse(s.into()))?;
                if den.is_zero() {
                    return Err(LinalgError::Parse(s.into()));
                }
                Ok(Scalar::Q(BigRational::new(num, den)))
            }
            Field::Prime(p) => {
                let v = i128::from_str(s).map_err(|_| LinalgError::Parse(s.into()))?;
                Ok(Scalar::Fp {
                    value: v.rem_euclid(p as i128) as u64,
                    p,
                })
            }
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Rational => write!(f, "q"),
            Field::Prime(p) => write!(f, "fp:{p}"),
        }
    }
}

impl FromStr for Field {
    type Err = LinalgError;

    /// Accepts `q` or `fp:P`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("q") {
            return Ok(Field::Rational);
        }
        let p = s
            .strip_prefix("fp:")
            .or_else(|| s.strip_prefix("Fp:"))
            .and_then(|p| p.parse::<u64>().ok())
            .ok_or_else(|| LinalgError::Field(s.into()))?;
        Field::prime(p)
    }
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// An exact field element. Rationals are kept reduced with a positive
/// denominator; residues are kept in `[0, p)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Scalar {
    Q(BigRational),
    Fp { value: u64, p: u64 },
}

impl Scalar {
    pub fn field(&self) -> Field {
        match self {
            Scalar::Q(_) => Field::Rational,
            Scalar::Fp { p, .. } => Field::Prime(*p),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Q(q) => q.is_zero(),
            Scalar::Fp { value, .. } => *value == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Q(q) => q.is_one(),
            Scalar::Fp { value, .. } => *value == 1,
        }
    }

    /// Multiplicative inverse, `None` for zero.
    pub fn inv(&self) -> Option<Scalar> {
        if self.is_zero() {
            return None;
        }
        Some(match self {
            Scalar::Q(q) => Scalar::Q(q.recip()),
            Scalar::Fp { value, p } => Scalar::Fp {
                value: pow_mod(*value, p - 2, *p),
                p: *p,
            },
        })
    }

    pub fn add_assign_ref(&mut self, other: &Scalar) {
        match (self, other) {
            (Scalar::Q(a), Scalar::Q(b)) => *a += b,
            (Scalar::Fp { value, p }, Scalar::Fp { value: v, p: q }) if p == q => {
                *value = (*value + v) % *p
            }
            (a, b) => panic!("field mismatch: {a:?} + {b:?}"),
        }
    }

    /// `self += a * b`
    pub fn add_mul(&mut self, a: &Scalar, b: &Scalar) {
        match (self, a, b) {
            (Scalar::Q(s), Scalar::Q(x), Scalar::Q(y)) => {
                if !x.is_zero() && !y.is_zero() {
                    *s += x * y
                }
            }
            (Scalar::Fp { value, p }, Scalar::Fp { value: x, .. }, Scalar::Fp { value: y, .. }) => {
                *value = (*value + x * y % *p) % *p
            }
            (s, a, b) => panic!("field mismatch: {s:?} + {a:?} * {b:?}"),
        }
    }
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Q(q) => {
                if q.denom().is_one() {
                    write!(f, "{}", q.numer())
                } else {
                    write!(f, "{}/{}", q.numer(), q.denom())
                }
            }
            Scalar::Fp { value, .. } => write!(f, "{value}"),
        }
    }
}

impl<'a> Add<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn add(self, rhs: &'a Scalar) -> Scalar {
        let mut out = self.clone();
        out.add_assign_ref(rhs);
        out
    }
}

impl<'a> Sub<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &'a Scalar) -> Scalar {
        let mut out = self.clone();
        out.add_assign_ref(&-rhs);
        out
    }
}

impl<'a> Mul<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &'a Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a * b),
            (Scalar::Fp { value: a, p }, Scalar::Fp { value: b, p: q }) if p == q => Scalar::Fp {
                value: a * b % p,
                p: *p,
            },
            (a, b) => panic!("field mismatch: {a:?} * {b:?}"),
        }
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Q(q) => Scalar::Q(-q),
            Scalar::Fp { value, p } => Scalar::Fp {
                value: (p - value) % p,
                p: *p,
            },
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

/// Absolute size of a scalar, used only for diagnostics.
pub fn height(s: &Scalar) -> usize {
    match s {
        Scalar::Q(q) => q.numer().abs().bits().max(q.denom().bits()) as usize,
        Scalar::Fp { .. } => 0,
    }
}

/// `out += c * x`
pub fn axpy(out: &mut [Scalar], c: &Scalar, x: &[Scalar]) {
    assert_eq!(out.len(), x.len(), "axpy length mismatch");
    if c.is_zero() {
        return;
    }
    for (o, v) in out.iter_mut().zip(x) {
        if !v.is_zero() {
            o.add_mul(c, v);
        }
    }
}

pub fn scale(c: &Scalar, x: &[Scalar]) -> Vec<Scalar> {
    x.iter().map(|v| c * v).collect()
}

pub fn is_zero_vec(x: &[Scalar]) -> bool {
    x.iter().all(Scalar::is_zero)
}

/// Dense matrix over a field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

impl Matrix {
    pub fn zeros(field: Field, rows: usize, cols: usize) -> Matrix {
        Matrix {
            field,
            rows,
            cols,
            data: field.zeros(rows * cols),
        }
    }

    pub fn identity(field: Field, n: usize) -> Matrix {
        let mut m = Matrix::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, field.one());
        }
        m
    }

    pub fn from_rows(field: Field, rows: Vec<Vec<Scalar>>, cols: usize) -> Result<Matrix, LinalgError> {
        let r = rows.len();
        let mut data = Vec::with_capacity(r * cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != cols {
                return Err(LinalgError::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Matrix { field, rows: r, cols, data })
    }

    pub fn from_i64(field: Field, rows: &[&[i64]]) -> Matrix {
        let cols = rows.first().map_or(0, |r| r.len());
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&v| field.from_i64(v)).collect())
            .collect();
        Matrix::from_rows(field, rows, cols).expect("ragged integer matrix")
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Scalar {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Scalar] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Scalar> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn set_column(&mut self, c: usize, col: &[Scalar]) {
        for (r, v) in col.iter().enumerate() {
            self.set(r, c, v.clone());
        }
    }

    pub fn is_zero(&self) -> bool {
        is_zero_vec(&self.data)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[Scalar]) -> Result<Vec<Scalar>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::Dimension(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut out = self.field.zeros(self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            for (a, b) in self.row(r).iter().zip(x) {
                if !a.is_zero() && !b.is_zero() {
                    o.add_mul(a, b);
                }
            }
        }
        Ok(out)
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.field, self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let b = other.get(k, c);
                    if !b.is_zero() {
                        out.data[r * other.cols + c].add_mul(a, b);
                    }
                }
            }
        }
        Ok(out)
    }

    fn sparse_rows(&self) -> Vec<SparseRow> {
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| !v.is_zero())
                    .map(|(c, v)| (c, v.clone()))
                    .collect()
            })
            .collect()
    }
}

/// A row stored as `(column, value)` pairs with increasing column and no
/// zero values.
pub type SparseRow = Vec<(usize, Scalar)>;

/// `row -= c * pivot`, both sorted sparse rows.
fn sparse_sub_mul(row: &SparseRow, c: &Scalar, pivot: &SparseRow) -> SparseRow {
    let mut out = Vec::with_capacity(row.len() + pivot.len());
    let (mut i, mut j) = (0, 0);
    while i < row.len() || j < pivot.len() {
        let take_row = j >= pivot.len() || (i < row.len() && row[i].0 < pivot[j].0);
        let take_piv = i >= row.len() || (j < pivot.len() && pivot[j].0 < row[i].0);
        if take_row {
            out.push(row[i].clone());
            i += 1;
        } else if take_piv {
            out.push((pivot[j].0, -&(c * &pivot[j].1)));
            j += 1;
        } else {
            let mut v = row[i].1.clone();
            v.add_mul(&-c, &pivot[j].1);
            if !v.is_zero() {
                out.push((row[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Row echelon form of an augmented sparse system with unit pivots.
/// Pivot columns are taken from the left; among the rows leading in a
/// column, the sparsest becomes the pivot to limit fill-in. Returns
/// `(rows, pivot columns)`; the augmented column index is `cols`.
fn echelon(field: Field, cols: usize, mut rows: Vec<SparseRow>) -> (Vec<SparseRow>, Vec<usize>) {
    rows.retain(|r| !r.is_empty());
    let mut pivots = Vec::new();
    let mut done = 0usize;
    for col in 0..=cols {
        let Some(pr) = (done..rows.len())
            .filter(|&r| rows[r][0].0 == col)
            .min_by_key(|&r| rows[r].len())
        else {
            continue;
        };
        rows.swap(done, pr);
        let inv = rows[done][0].1.inv().expect("pivot is nonzero");
        let pivot: SparseRow = rows[done].iter().map(|(c, v)| (*c, &inv * v)).collect();
        debug_assert!(pivot[0].1 == field.one());
        let mut r = done + 1;
        while r < rows.len() {
            if rows[r][0].0 == col {
                let c = rows[r][0].1.clone();
                rows[r] = sparse_sub_mul(&rows[r], &c, &pivot);
                if rows[r].is_empty() {
                    rows.swap_remove(r);
                    continue;
                }
            }
            r += 1;
        }
        rows[done] = pivot;
        pivots.push(col);
        done += 1;
    }
    rows.truncate(done);
    (rows, pivots)
}

/// Reduced row echelon form: [`echelon`] followed by clearing every pivot
/// column above its pivot, bottom up.
fn rref(field: Field, cols: usize, rows: Vec<SparseRow>) -> (Vec<SparseRow>, Vec<usize>) {
    let (mut rows, pivots) = echelon(field, cols, rows);
    for i in (0..rows.len()).rev() {
        let (head, tail) = rows.split_at_mut(i);
        let pivot = &tail[0];
        for row in head.iter_mut() {
            if let Ok(pos) = row.binary_search_by_key(&pivots[i], |(c, _)| *c) {
                let c = row[pos].1.clone();
                *row = sparse_sub_mul(row, &c, pivot);
            }
        }
    }
    (rows, pivots)
}

/// Rank over the matrix's field by exact row reduction.
pub fn rank(m: &Matrix) -> usize {
    let (_, pivots) = rref(m.field, m.cols, m.sparse_rows());
    pivots.len()
}

/// Inverse of a square matrix, if it is invertible.
pub fn inverse(m: &Matrix) -> Option<Matrix> {
    let n = m.rows;
    if m.cols != n {
        return None;
    }
    let field = m.field;
    let rows: Vec<SparseRow> = m
        .sparse_rows()
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            r.push((n + i, field.one()));
            r
        })
        .collect();
    let (rows, pivots) = rref(field, 2 * n, rows);
    if pivots.len() < n || pivots[n - 1] != n - 1 {
        return if n == 0 { Some(m.clone()) } else { None };
    }
    let mut out = Matrix::zeros(field, n, n);
    for (i, row) in rows.iter().take(n).enumerate() {
        for (c, v) in row {
            if *c >= n {
                out.set(i, c - n, v.clone());
            }
        }
    }
    Some(out)
}

/// Basis of the right kernel `{x : m x = 0}`, one vector per free column.
pub fn kernel(m: &Matrix) -> Vec<Vec<Scalar>> {
    let field = m.field;
    let (rows, pivots) = rref(field, m.cols, m.sparse_rows());
    let mut is_pivot = vec![false; m.cols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let mut basis = Vec::new();
    for free in (0..m.cols).filter(|&c| !is_pivot[c]) {
        let mut v = field.zeros(m.cols);
        v[free] = field.one();
        for (row, &p) in rows.iter().zip(&pivots) {
            if let Ok(pos) = row.binary_search_by_key(&free, |(c, _)| *c) {
                v[p] = -&row[pos].1;
            }
        }
        basis.push(v);
    }
    basis
}

/// A named contiguous block of unknowns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// `coefficient · x = rhs` with a recorded layout of the unknowns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineSystem {
    pub coefficient: Matrix,
    pub rhs: Vec<Scalar>,
    pub layout: Vec<Block>,
}

impl AffineSystem {
    /// A system whose unknowns form one anonymous block.
    pub fn new(coefficient: Matrix, rhs: Vec<Scalar>) -> AffineSystem {
        let layout = vec![Block {
            name: "x".into(),
            offset: 0,
            len: coefficient.cols(),
        }];
        AffineSystem {
            coefficient,
            rhs,
            layout,
        }
    }

    pub fn check(&self) -> Result<(), LinalgError> {
        if self.rhs.len() != self.coefficient.rows() {
            return Err(LinalgError::Dimension(format!(
                "rhs has {} entries for {} equations",
                self.rhs.len(),
                self.coefficient.rows()
            )));
        }
        let mut next = 0;
        for b in &self.layout {
            if b.offset != next {
                return Err(LinalgError::Dimension(format!("block {} is not contiguous", b.name)));
            }
            next += b.len;
        }
        if next != self.coefficient.cols() {
            return Err(LinalgError::Dimension(format!(
                "layout covers {next} of {} unknowns",
                self.coefficient.cols()
            )));
        }
        Ok(())
    }
}

/// Solve `A x = b` exactly. Free variables are pinned to zero, so the
/// answer is a deterministic function of the input.
pub fn solve_affine(sys: &AffineSystem) -> Result<Option<Vec<Scalar>>, LinalgError> {
    sys.check()?;
    let mut rows = sys.coefficient.sparse_rows();
    for (row, b) in rows.iter_mut().zip(&sys.rhs) {
        if !b.is_zero() {
            row.push((sys.coefficient.cols(), b.clone()));
        }
    }
    Ok(solve_sparse(sys.coefficient.field(), sys.coefficient.cols(), rows))
}

/// Solve a system given as sparse augmented rows (augmented column index
/// is `cols`).
pub fn solve_sparse(field: Field, cols: usize, rows: Vec<SparseRow>) -> Option<Vec<Scalar>> {
    let (rows, pivots) = echelon(field, cols, rows);
    if pivots.last() == Some(&cols) {
        return None;
    }
    // Back substitution with every free unknown set to zero.
    let mut x = field.zeros(cols);
    for (row, &p) in rows.iter().zip(&pivots).rev() {
        let mut v = field.zero();
        for (c, a) in &row[1..] {
            if *c == cols {
                v.add_assign_ref(a);
            } else if !x[*c].is_zero() {
                v.add_mul(&-a, &x[*c]);
            }
        }
        x[p] = v;
    }
    Some(x)
}

/// Incremental builder for large structured systems. Unknowns and
/// equations are grouped into named blocks; the caller supplies the image
/// of every unknown basis vector, column by column.
pub struct SystemBuilder {
    field: Field,
    unknowns: Vec<Block>,
    equations: Vec<Block>,
    columns: Vec<Vec<(usize, Scalar)>>,
    rhs: Vec<Scalar>,
}

impl SystemBuilder {
    pub fn new(field: Field) -> SystemBuilder {
        SystemBuilder {
            field,
            unknowns: Vec::new(),
            equations: Vec::new(),
            columns: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn unknown(&mut self, name: &str, len: usize) -> usize {
        let offset = self.unknowns.last().map_or(0, |b| b.offset + b.len);
        self.unknowns.push(Block {
            name: name.into(),
            offset,
            len,
        });
        self.columns.extend((0..len).map(|_| Vec::new()));
        self.unknowns.len() - 1
    }

    pub fn equation(&mut self, name: &str, rhs: Vec<Scalar>) -> usize {
        let offset = self.equations.last().map_or(0, |b| b.offset + b.len);
        self.equations.push(Block {
            name: name.into(),
            offset,
            len: rhs.len(),
        });
        self.rhs.extend(rhs);
        self.equations.len() - 1
    }

    pub fn unknown_len(&self, block: usize) -> usize {
        self.unknowns[block].len
    }

    /// Add `image` to column `j` of unknown block `block`, in the rows of
    /// equation block `eq`.
    pub fn add_image(&mut self, block: usize, j: usize, eq: usize, image: &[Scalar]) {
        let eqb = &self.equations[eq];
        assert_eq!(image.len(), eqb.len, "image length for equation {}", eqb.name);
        let col = self.unknowns[block].offset + j;
        let off = eqb.offset;
        for (i, v) in image.iter().enumerate() {
            if !v.is_zero() {
                self.columns[col].push((off + i, v.clone()));
            }
        }
    }

    pub fn layout(&self) -> &[Block] {
        &self.unknowns
    }

    /// Solve and split the solution by unknown block.
    pub fn solve(self) -> Option<Vec<Vec<Scalar>>> {
        let ncols = self.columns.len();
        let mut rows: Vec<SparseRow> = vec![Vec::new(); self.rhs.len()];
        for (c, col) in self.columns.into_iter().enumerate() {
            for (r, v) in col {
                rows[r].push((c, v));
            }
        }
        for row in rows.iter_mut() {
            row.sort_by_key(|(c, _)| *c);
            // merge duplicates from repeated add_image calls
            let mut merged: SparseRow = Vec::with_capacity(row.len());
            for (c, v) in row.drain(..) {
                match merged.last_mut() {
                    Some((lc, lv)) if *lc == c => lv.add_assign_ref(&v),
                    _ => merged.push((c, v)),
                }
            }
            merged.retain(|(_, v)| !v.is_zero());
            *row = merged;
        }
        for (row, b) in rows.iter_mut().zip(&self.rhs) {
            if !b.is_zero() {
                row.push((ncols, b.clone()));
            }
        }
        let x = solve_sparse(self.field, ncols, rows)?;
        Some(
            self.unknowns
                .iter()
                .map(|b| x[b.offset..b.offset + b.len].to_vec())
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_canonical_form() {
        let f = Field::Rational;
        let a = f.parse("2/4").unwrap();
        let b = f.parse("-3/-6").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "1/2");
        assert_eq!(f.parse("6/3").unwrap().to_string(), "2");
        assert!(f.parse("1/0").is_err());
    }

    #[test]
    fn prime_field_arithmetic() {
        let f = Field::prime(7).unwrap();
        let a = f.from_i64(3);
        assert_eq!((&a * &a.inv().unwrap()), f.one());
        assert_eq!(f.from_i64(-1).to_string(), "6");
        assert!(Field::prime(65536).is_err());
        assert_eq!("fp:65537".parse::<Field>().unwrap(), Field::Prime(65537));
    }

    #[test]
    fn identity_system() {
        let f = Field::Rational;
        let sys = AffineSystem::new(
            Matrix::identity(f, 3),
            vec![f.from_i64(1), f.from_i64(2), f.from_i64(3)],
        );
        let x = solve_affine(&sys).unwrap().unwrap();
        assert_eq!(x, vec![f.from_i64(1), f.from_i64(2), f.from_i64(3)]);
    }

    #[test]
    fn inconsistent_system() {
        let f = Field::Rational;
        let sys = AffineSystem::new(Matrix::from_i64(f, &[&[1], &[1]]), vec![f.zero(), f.one()]);
        assert_eq!(solve_affine(&sys).unwrap(), None);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let f = Field::Rational;
        let sys = AffineSystem::new(Matrix::identity(f, 2), vec![f.zero()]);
        assert!(solve_affine(&sys).is_err());
    }

    #[test]
    fn free_variables_are_zero() {
        let f = Field::Rational;
        // x0 + x1 = 1 -> (1, 0)
        let sys = AffineSystem::new(Matrix::from_i64(f, &[&[1, 1]]), vec![f.one()]);
        assert_eq!(solve_affine(&sys).unwrap().unwrap(), vec![f.one(), f.zero()]);
    }

    #[test]
    fn rank_basics() {
        let f = Field::Rational;
        assert_eq!(rank(&Matrix::zeros(f, 4, 5)), 0);
        assert_eq!(rank(&Matrix::identity(f, 4)), 4);
        let m = Matrix::from_i64(f, &[&[1, 2], &[2, 4]]);
        assert_eq!(rank(&m), 1);
        assert_eq!(rank(&m), rank(&m.transpose()));
    }

    #[test]
    fn kernel_is_annihilated() {
        let f = Field::Rational;
        let m = Matrix::from_i64(f, &[&[1, 2, 3, 4], &[2, 4, 6, 8], &[0, 1, 1, 0]]);
        let k = kernel(&m);
        assert_eq!(k.len(), 4 - rank(&m));
        for v in k {
            assert!(is_zero_vec(&m.mul_vec(&v).unwrap()));
        }
    }

    #[test]
    fn builder_merges_duplicate_entries() {
        let f = Field::Rational;
        let mut b = SystemBuilder::new(f);
        let u = b.unknown("u", 1);
        let e = b.equation("e", vec![f.from_i64(4)]);
        b.add_image(u, 0, e, &[f.one()]);
        b.add_image(u, 0, e, &[f.one()]);
        let sol = b.solve().unwrap();
        assert_eq!(sol[0], vec![f.from_i64(2)]);
    }
}
