//! Parity-typed matrices over supernumbers.
//!
//! Every entry of a [`SuperMatrix`] is homogeneous of parity
//! `row_sig(i) + col_sig(j)`; this is enforced on construction. Rows
//! represent vectors and columns represent covectors. Within each index
//! family all even indices precede all odd indices ("standard" layout);
//! matrices whose signatures interleave parities (as stacked form arguments
//! do) are handled by sorting with an even permutation before block
//! operations.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grassmann::{Context, GenArena, GrassmannError, Parity, Supernumber};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MatrixError {
    Shape(String),
    ParityViolation { row: usize, col: usize },
    NotInvertible,
    Grassmann(GrassmannError),
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::Shape(m) => write!(f, "shape mismatch: {m}"),
            MatrixError::ParityViolation { row, col } => {
                write!(f, "entry ({row},{col}) is not homogeneous of the required parity")
            }
            MatrixError::NotInvertible => write!(f, "matrix has no invertible pivot block"),
            MatrixError::Grassmann(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for MatrixError {}

impl From<GrassmannError> for MatrixError {
    fn from(e: GrassmannError) -> MatrixError {
        match e {
            GrassmannError::NotInvertible => MatrixError::NotInvertible,
            other => MatrixError::Grassmann(other),
        }
    }
}

/// One parity per row or column index.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ParitySignature(Vec<Parity>);

impl ParitySignature {
    pub fn new(parities: Vec<Parity>) -> ParitySignature {
        ParitySignature(parities)
    }

    /// `evens` even indices followed by `odds` odd indices.
    pub fn standard(evens: usize, odds: usize) -> ParitySignature {
        let mut v = vec![Parity::Even; evens];
        v.extend(std::iter::repeat(Parity::Odd).take(odds));
        ParitySignature(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parity(&self, i: usize) -> Parity {
        self.0[i]
    }

    pub fn evens(&self) -> usize {
        self.0.iter().filter(|p| **p == Parity::Even).count()
    }

    pub fn odds(&self) -> usize {
        self.len() - self.evens()
    }

    pub fn iter(&self) -> impl Iterator<Item = Parity> + '_ {
        self.0.iter().copied()
    }

    pub fn concat(&self, other: &ParitySignature) -> ParitySignature {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        ParitySignature(v)
    }

    pub fn select(&self, indices: &[usize]) -> ParitySignature {
        ParitySignature(indices.iter().map(|&i| self.0[i]).collect())
    }

    pub fn is_standard(&self) -> bool {
        self.0.windows(2).all(|w| !(w[0] == Parity::Odd && w[1] == Parity::Even))
    }

    /// Stable permutation listing all even indices, then all odd indices.
    pub fn permutation_to_standard(&self) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..self.len())
            .filter(|&i| self.0[i] == Parity::Even)
            .collect();
        perm.extend((0..self.len()).filter(|&i| self.0[i] == Parity::Odd));
        perm
    }
}

/// Rectangular matrix of supernumbers with row and column parities.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SuperMatrix {
    ctx: Context,
    row_sig: ParitySignature,
    col_sig: ParitySignature,
    entries: Vec<Supernumber>, // row-major
}

impl SuperMatrix {
    pub fn new(
        ctx: Context,
        row_sig: ParitySignature,
        col_sig: ParitySignature,
        entries: Vec<Vec<Supernumber>>,
    ) -> Result<SuperMatrix, MatrixError> {
        if entries.len() != row_sig.len() || entries.iter().any(|r| r.len() != col_sig.len()) {
            return Err(MatrixError::Shape(format!(
                "expected {}x{} entries",
                row_sig.len(),
                col_sig.len()
            )));
        }
        let flat: Vec<Supernumber> = entries.into_iter().flatten().collect();
        let m = SuperMatrix {
            ctx,
            row_sig,
            col_sig,
            entries: flat,
        };
        m.check_parity()?;
        Ok(m)
    }

    pub fn from_fn<F>(
        ctx: Context,
        row_sig: ParitySignature,
        col_sig: ParitySignature,
        mut f: F,
    ) -> Result<SuperMatrix, MatrixError>
    where
        F: FnMut(usize, usize) -> Supernumber,
    {
        let rows = row_sig.len();
        let cols = col_sig.len();
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        let m = SuperMatrix {
            ctx,
            row_sig,
            col_sig,
            entries,
        };
        m.check_parity()?;
        Ok(m)
    }

    pub fn zeros(ctx: Context, row_sig: ParitySignature, col_sig: ParitySignature) -> SuperMatrix {
        let n = row_sig.len() * col_sig.len();
        SuperMatrix {
            ctx,
            row_sig,
            col_sig,
            entries: vec![Supernumber::zero(ctx); n],
        }
    }

    pub fn identity(ctx: Context, sig: ParitySignature) -> SuperMatrix {
        let n = sig.len();
        let mut m = SuperMatrix::zeros(ctx, sig.clone(), sig);
        for i in 0..n {
            m.entries[i * n + i] = Supernumber::one(ctx);
        }
        m
    }

    fn check_parity(&self) -> Result<(), MatrixError> {
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                let want = self.row_sig.parity(i) + self.col_sig.parity(j);
                if !self.get(i, j).is_homogeneous(want) {
                    return Err(MatrixError::ParityViolation { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn context(&self) -> Context {
        self.ctx
    }

    pub fn rows(&self) -> usize {
        self.row_sig.len()
    }

    pub fn cols(&self) -> usize {
        self.col_sig.len()
    }

    pub fn row_sig(&self) -> &ParitySignature {
        &self.row_sig
    }

    pub fn col_sig(&self) -> &ParitySignature {
        &self.col_sig
    }

    pub fn get(&self, i: usize, j: usize) -> &Supernumber {
        &self.entries[i * self.cols() + j]
    }

    pub fn entry_parity(&self, i: usize, j: usize) -> Parity {
        self.row_sig.parity(i) + self.col_sig.parity(j)
    }

    /// Copy with `delta` added to entry (i, j); used by derivative probes.
    pub fn with_entry_added(&self, i: usize, j: usize, delta: &Supernumber) -> SuperMatrix {
        let mut out = self.clone();
        let cols = out.cols();
        out.entries[i * cols + j] = &out.entries[i * cols + j] + delta;
        out
    }

    pub fn with_entry(&self, i: usize, j: usize, value: Supernumber) -> Result<SuperMatrix, MatrixError> {
        if !value.is_homogeneous(self.entry_parity(i, j)) {
            return Err(MatrixError::ParityViolation { row: i, col: j });
        }
        let mut out = self.clone();
        let cols = out.cols();
        out.entries[i * cols + j] = value;
        Ok(out)
    }

    pub fn mul(&self, rhs: &SuperMatrix) -> Result<SuperMatrix, MatrixError> {
        if self.col_sig != rhs.row_sig {
            return Err(MatrixError::Shape(format!(
                "product of {}x{} with {}x{} (or inner signatures differ)",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        let mut entries = Vec::with_capacity(self.rows() * rhs.cols());
        for i in 0..self.rows() {
            for j in 0..rhs.cols() {
                let mut acc = Supernumber::zero(self.ctx);
                for k in 0..self.cols() {
                    let a = self.get(i, k);
                    if a.is_zero() {
                        continue;
                    }
                    let b = rhs.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    acc = &acc + &(a * b);
                }
                entries.push(acc);
            }
        }
        Ok(SuperMatrix {
            ctx: self.ctx,
            row_sig: self.row_sig.clone(),
            col_sig: rhs.col_sig.clone(),
            entries,
        })
    }

    pub fn add(&self, rhs: &SuperMatrix) -> Result<SuperMatrix, MatrixError> {
        if self.row_sig != rhs.row_sig || self.col_sig != rhs.col_sig {
            return Err(MatrixError::Shape("sum of differently shaped matrices".into()));
        }
        let entries = self
            .entries
            .iter()
            .zip(rhs.entries.iter())
            .map(|(a, b)| a + b)
            .collect();
        Ok(SuperMatrix {
            ctx: self.ctx,
            row_sig: self.row_sig.clone(),
            col_sig: self.col_sig.clone(),
            entries,
        })
    }

    pub fn sub(&self, rhs: &SuperMatrix) -> Result<SuperMatrix, MatrixError> {
        if self.row_sig != rhs.row_sig || self.col_sig != rhs.col_sig {
            return Err(MatrixError::Shape("difference of differently shaped matrices".into()));
        }
        let entries = self
            .entries
            .iter()
            .zip(rhs.entries.iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(SuperMatrix {
            ctx: self.ctx,
            row_sig: self.row_sig.clone(),
            col_sig: self.col_sig.clone(),
            entries,
        })
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SuperMatrix {
        let mut entries = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                entries.push(self.get(i, j).clone());
            }
        }
        SuperMatrix {
            ctx: self.ctx,
            row_sig: self.row_sig.select(rows),
            col_sig: self.col_sig.select(cols),
            entries,
        }
    }

    pub fn row(&self, i: usize) -> SuperMatrix {
        self.submatrix(&[i], &(0..self.cols()).collect::<Vec<_>>())
    }

    pub fn col(&self, j: usize) -> SuperMatrix {
        self.submatrix(&(0..self.rows()).collect::<Vec<_>>(), &[j])
    }

    pub fn remove_row(&self, i: usize) -> SuperMatrix {
        let rows: Vec<usize> = (0..self.rows()).filter(|&r| r != i).collect();
        self.submatrix(&rows, &(0..self.cols()).collect::<Vec<_>>())
    }

    pub fn remove_col(&self, j: usize) -> SuperMatrix {
        let cols: Vec<usize> = (0..self.cols()).filter(|&c| c != j).collect();
        self.submatrix(&(0..self.rows()).collect::<Vec<_>>(), &cols)
    }

    /// Insert `row` (a 1 x cols matrix) so that it becomes row `at`.
    pub fn insert_row(&self, at: usize, row: &SuperMatrix, parity: Parity) -> Result<SuperMatrix, MatrixError> {
        if row.rows() != 1 || row.cols() != self.cols() {
            return Err(MatrixError::Shape("inserted row has wrong length".into()));
        }
        let mut sig: Vec<Parity> = self.row_sig.iter().collect();
        sig.insert(at, parity);
        let mut entries = Vec::with_capacity((self.rows() + 1) * self.cols());
        for i in 0..=self.rows() {
            if i == at {
                entries.extend(row.entries.iter().cloned());
            }
            if i < self.rows() {
                entries.extend((0..self.cols()).map(|j| self.get(i, j).clone()));
            }
        }
        let m = SuperMatrix {
            ctx: self.ctx,
            row_sig: ParitySignature::new(sig),
            col_sig: self.col_sig.clone(),
            entries,
        };
        m.check_parity()?;
        Ok(m)
    }

    pub fn vstack(&self, bottom: &SuperMatrix) -> Result<SuperMatrix, MatrixError> {
        if self.col_sig != bottom.col_sig {
            return Err(MatrixError::Shape("vstack with different column signatures".into()));
        }
        let mut entries = self.entries.clone();
        entries.extend(bottom.entries.iter().cloned());
        Ok(SuperMatrix {
            ctx: self.ctx,
            row_sig: self.row_sig.concat(&bottom.row_sig),
            col_sig: self.col_sig.clone(),
            entries,
        })
    }

    fn permute(&self, row_perm: &[usize], col_perm: &[usize]) -> SuperMatrix {
        self.submatrix(row_perm, col_perm)
    }

    /// Two-sided inverse via block Schur elimination.
    ///
    /// Requires a square, parity-consistent matrix whose even-even and
    /// odd-odd blocks (after sorting to standard layout) have bodies with
    /// nonzero determinant; this is exactly invertibility over the
    /// Grassmann algebra.
    pub fn inv(&self) -> Result<SuperMatrix, MatrixError> {
        if self.rows() != self.cols() {
            return Err(MatrixError::Shape("inverse of a non-square matrix".into()));
        }
        let rp = self.row_sig.permutation_to_standard();
        let cp = self.col_sig.permutation_to_standard();
        let std = self.permute(&rp, &cp);
        if std.row_sig.evens() != std.col_sig.evens() {
            return Err(MatrixError::Shape(
                "inverse requires matching row/column parity counts".into(),
            ));
        }
        let inv_std = std.invert_standard()?;
        // std = M[rp, cp]  =>  M^{-1}[cp[a]][rp[b]] = std^{-1}[a][b]
        let n = self.rows();
        let mut out = SuperMatrix::zeros(self.ctx, self.col_sig.clone(), self.row_sig.clone());
        for a in 0..n {
            for b in 0..n {
                out.entries[cp[a] * n + rp[b]] = inv_std.get(a, b).clone();
            }
        }
        out.check_parity()?;
        Ok(out)
    }

    /// Inverse of a matrix already in standard (evens then odds) layout.
    fn invert_standard(&self) -> Result<SuperMatrix, MatrixError> {
        let ne = self.row_sig.evens();
        let no = self.row_sig.odds();
        let n = ne + no;
        if no == 0 || ne == 0 {
            return invert_even_block(self);
        }
        let er: Vec<usize> = (0..ne).collect();
        let or: Vec<usize> = (ne..n).collect();
        let a = self.submatrix(&er, &er);
        let b = self.submatrix(&er, &or);
        let c = self.submatrix(&or, &er);
        let d = self.submatrix(&or, &or);
        let d_inv = invert_even_block(&d)?;
        // Schur complement S = A - B D^{-1} C, then assemble the block inverse.
        let bdi = b.mul(&d_inv)?;
        let s = a.sub(&bdi.mul(&c)?)?;
        let s_inv = invert_even_block(&s)?;
        let dic = d_inv.mul(&c)?;
        let top_left = s_inv.clone();
        let top_right = neg(&s_inv.mul(&bdi)?);
        let bottom_left = neg(&dic.mul(&s_inv)?);
        let bottom_right = d_inv.add(&dic.mul(&s_inv.mul(&bdi)?)?)?;
        let top = hconcat(&top_left, &top_right)?;
        let bottom = hconcat(&bottom_left, &bottom_right)?;
        top.vstack(&bottom)
    }

    /// Berezinian of a square matrix with equal row and column signatures.
    ///
    /// Uses the odd-odd Schur form `det(A - B D^{-1} C) det(D)^{-1}` when the
    /// odd-odd block is invertible, and falls back to the even-even form
    /// `det(A) det(D - C A^{-1} B)^{-1}` otherwise.
    pub fn berezinian(&self) -> Result<Supernumber, MatrixError> {
        if self.rows() != self.cols() {
            return Err(MatrixError::Shape("Berezinian of a non-square matrix".into()));
        }
        if self.row_sig != self.col_sig {
            return Err(MatrixError::Shape(
                "Berezinian requires equal row and column signatures".into(),
            ));
        }
        let perm = self.row_sig.permutation_to_standard();
        let std = self.permute(&perm, &perm);
        let ne = std.row_sig.evens();
        let n = std.rows();
        let er: Vec<usize> = (0..ne).collect();
        let or: Vec<usize> = (ne..n).collect();
        let a = std.submatrix(&er, &er);
        let d = std.submatrix(&or, &or);
        if or.is_empty() {
            return det_even(&a);
        }
        if er.is_empty() {
            return Ok(det_even(&d)?.inv()?);
        }
        let b = std.submatrix(&er, &or);
        let c = std.submatrix(&or, &er);
        let det_d = det_even(&d)?;
        if !det_d.body().is_zero() {
            let d_inv = invert_even_block(&d)?;
            let s = a.sub(&b.mul(&d_inv)?.mul(&c)?)?;
            return Ok(&det_even(&s)? * &det_d.inv()?);
        }
        let det_a = det_even(&a)?;
        if !det_a.body().is_zero() {
            let a_inv = invert_even_block(&a)?;
            let t = d.sub(&c.mul(&a_inv)?.mul(&b)?)?;
            return Ok(&det_a * &det_even(&t)?.inv()?);
        }
        Err(MatrixError::NotInvertible)
    }
}

fn neg(m: &SuperMatrix) -> SuperMatrix {
    SuperMatrix {
        ctx: m.ctx,
        row_sig: m.row_sig.clone(),
        col_sig: m.col_sig.clone(),
        entries: m.entries.iter().map(|e| -e).collect(),
    }
}

fn hconcat(left: &SuperMatrix, right: &SuperMatrix) -> Result<SuperMatrix, MatrixError> {
    if left.row_sig != right.row_sig {
        return Err(MatrixError::Shape("hconcat with different row signatures".into()));
    }
    let mut entries = Vec::with_capacity(left.entries.len() + right.entries.len());
    for i in 0..left.rows() {
        entries.extend((0..left.cols()).map(|j| left.get(i, j).clone()));
        entries.extend((0..right.cols()).map(|j| right.get(i, j).clone()));
    }
    Ok(SuperMatrix {
        ctx: left.ctx,
        row_sig: left.row_sig.clone(),
        col_sig: left.col_sig.concat(&right.col_sig),
        entries,
    })
}

/// Gauss-Jordan inverse of a square matrix of even supernumbers; pivots are
/// entries with invertible body. Even supernumbers commute, so ordinary row
/// reduction applies.
fn invert_even_block(m: &SuperMatrix) -> Result<SuperMatrix, MatrixError> {
    let n = m.rows();
    let ctx = m.ctx;
    let mut work: Vec<Vec<Supernumber>> = (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j).clone()).collect())
        .collect();
    let mut inv: Vec<Vec<Supernumber>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Supernumber::one(ctx)
                    } else {
                        Supernumber::zero(ctx)
                    }
                })
                .collect()
        })
        .collect();
    for k in 0..n {
        let pivot_row = (k..n)
            .find(|&i| !work[i][k].body().is_zero())
            .ok_or(MatrixError::NotInvertible)?;
        work.swap(k, pivot_row);
        inv.swap(k, pivot_row);
        let piv_inv = work[k][k].inv()?;
        for j in 0..n {
            work[k][j] = &work[k][j] * &piv_inv;
            inv[k][j] = &inv[k][j] * &piv_inv;
        }
        for i in 0..n {
            if i == k || work[i][k].is_zero() {
                continue;
            }
            let factor = work[i][k].clone();
            for j in 0..n {
                work[i][j] = &work[i][j] - &(&factor * &work[k][j]);
                inv[i][j] = &inv[i][j] - &(&factor * &inv[k][j]);
            }
        }
    }
    SuperMatrix::new(ctx, m.col_sig.clone(), m.row_sig.clone(), inv)
}

/// Determinant of a square matrix of even (hence commuting) supernumbers.
///
/// Gaussian elimination with full pivoting on invertible-body entries; when
/// the remaining block has no such entry (all entries nilpotent) it falls
/// back to Laplace expansion, which always terminates because products of
/// nilpotent souls die out.
pub fn det_even(m: &SuperMatrix) -> Result<Supernumber, MatrixError> {
    let n = m.rows();
    if n != m.cols() {
        return Err(MatrixError::Shape("determinant of a non-square matrix".into()));
    }
    let ctx = m.ctx;
    let mut work: Vec<Vec<Supernumber>> = (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j).clone()).collect())
        .collect();
    let mut det = Supernumber::one(ctx);
    let mut negate = false;
    for k in 0..n {
        let mut pivot = None;
        'search: for i in k..n {
            for j in k..n {
                if !work[i][j].body().is_zero() {
                    pivot = Some((i, j));
                    break 'search;
                }
            }
        }
        let (pi, pj) = match pivot {
            Some(p) => p,
            None => {
                let rest = laplace_det(ctx, &work, k, n);
                let tail = &det * &rest;
                return Ok(if negate { -tail } else { tail });
            }
        };
        if pi != k {
            work.swap(k, pi);
            negate = !negate;
        }
        if pj != k {
            for row in work.iter_mut() {
                row.swap(k, pj);
            }
            negate = !negate;
        }
        det = &det * &work[k][k];
        let piv_inv = work[k][k].inv()?;
        for i in k + 1..n {
            if work[i][k].is_zero() {
                continue;
            }
            let factor = &work[i][k] * &piv_inv;
            for j in k + 1..n {
                work[i][j] = &work[i][j] - &(&factor * &work[k][j]);
            }
        }
    }
    Ok(if negate { -det } else { det })
}

/// Laplace expansion of the trailing block `work[from..][from..]`.
fn laplace_det(ctx: Context, work: &[Vec<Supernumber>], from: usize, n: usize) -> Supernumber {
    let size = n - from;
    let rows: Vec<usize> = (from..n).collect();
    let cols: Vec<usize> = (from..n).collect();
    laplace_rec(ctx, work, &rows, &cols, size)
}

fn laplace_rec(
    ctx: Context,
    work: &[Vec<Supernumber>],
    rows: &[usize],
    cols: &[usize],
    size: usize,
) -> Supernumber {
    if size == 0 {
        return Supernumber::one(ctx);
    }
    let mut acc = Supernumber::zero(ctx);
    let col = cols[0];
    let rest_cols: Vec<usize> = cols[1..].to_vec();
    for (pos, &row) in rows.iter().enumerate() {
        let entry = &work[row][col];
        if entry.is_zero() {
            continue;
        }
        let rest_rows: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|&r| r != row)
            .collect();
        let minor = laplace_rec(ctx, work, &rest_rows, &rest_cols, size - 1);
        let term = entry * &minor;
        acc = if pos % 2 == 0 { &acc + &term } else { &acc - &term };
    }
    acc
}

/// Pairing of a row vector with a column covector: `Σ_A v^A α_A`, the vector
/// component multiplied on the left.
pub fn pairing(v: &SuperMatrix, alpha: &SuperMatrix) -> Result<Supernumber, MatrixError> {
    if v.rows() != 1 || alpha.cols() != 1 {
        return Err(MatrixError::Shape("pairing expects a row and a column".into()));
    }
    if v.col_sig != alpha.row_sig {
        return Err(MatrixError::Shape("pairing over mismatched component signatures".into()));
    }
    let mut acc = Supernumber::zero(v.ctx);
    for a in 0..v.cols() {
        acc = &acc + &(v.get(0, a) * alpha.get(a, 0));
    }
    Ok(acc)
}

/// Random element of GL(evens|odds): integer diagonal blocks with nonzero
/// determinant bodies, odd blocks built from fresh generators with small
/// integer coefficients. Resamples the diagonal blocks until they are
/// invertible.
pub fn sample_gl<R: Rng>(
    ctx: Context,
    arena: &mut GenArena,
    rng: &mut R,
    evens: usize,
    odds: usize,
) -> Result<SuperMatrix, MatrixError> {
    let sig = ParitySignature::standard(evens, odds);
    let even_block = |rng: &mut R, size: usize| -> Vec<Vec<i64>> {
        (0..size)
            .map(|_| (0..size).map(|_| rng.gen_range(-4..=4)).collect())
            .collect()
    };
    let block_invertible = |b: &[Vec<i64>]| -> bool {
        // rational determinant of the integer body
        let n = b.len();
        let mut m: Vec<Vec<BigRational>> = b
            .iter()
            .map(|r| r.iter().map(|&x| BigRational::from_integer(x.into())).collect())
            .collect();
        let mut det = BigRational::one();
        for k in 0..n {
            let piv = match (k..n).find(|&i| !m[i][k].is_zero()) {
                Some(p) => p,
                None => return false,
            };
            if piv != k {
                m.swap(k, piv);
                det = -det;
            }
            det *= m[k][k].clone();
            let inv = m[k][k].recip();
            for i in k + 1..n {
                let f = &m[i][k] * &inv;
                for j in k..n {
                    let sub = &f * &m[k][j];
                    m[i][j] -= sub;
                }
            }
        }
        !det.is_zero()
    };
    let mut a = even_block(rng, evens);
    for _ in 0..1000 {
        if block_invertible(&a) {
            break;
        }
        a = even_block(rng, evens);
    }
    let mut d = even_block(rng, odds);
    for _ in 0..1000 {
        if block_invertible(&d) {
            break;
        }
        d = even_block(rng, odds);
    }
    let n = evens + odds;
    let mut entries: Vec<Vec<Supernumber>> = vec![vec![Supernumber::zero(ctx); n]; n];
    for i in 0..evens {
        for j in 0..evens {
            entries[i][j] = Supernumber::from_int(ctx, a[i][j]);
        }
    }
    for i in 0..odds {
        for j in 0..odds {
            entries[evens + i][evens + j] = Supernumber::from_int(ctx, d[i][j]);
        }
    }
    for i in 0..evens {
        for j in 0..odds {
            let c: i64 = rng.gen_range(-2..=2);
            let theta = arena.fresh_generator()?;
            entries[i][evens + j] = theta.scale(&BigRational::from_integer(c.into()));
        }
    }
    for i in 0..odds {
        for j in 0..evens {
            let c: i64 = rng.gen_range(-2..=2);
            let theta = arena.fresh_generator()?;
            entries[evens + i][j] = theta.scale(&BigRational::from_integer(c.into()));
        }
    }
    SuperMatrix::new(ctx, sig.clone(), sig, entries)
}

impl fmt::Display for SuperMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows() {
            write!(f, "[")?;
            for j in 0..self.cols() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}
