//! Structured matrices over a prime field.
//!
//! A [`StructuredMatrix`] remembers how it was built (identity, permutation,
//! Vandermonde, Cauchy, block diagonal) so that row and column deletions can
//! keep the structure the synchronization protocols rely on. Permutations are
//! stored as a row-to-column map and only materialized on request.

use crate::error::{Error, Result};
use crate::gf::FieldSpec;

/// Row `i` of the permutation matrix has its single one in column `map[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationCompact {
    map: Vec<usize>,
}

impl PermutationCompact {
    pub fn identity(len: usize) -> Self {
        Self {
            map: (0..len).collect(),
        }
    }

    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &c in &map {
            if c >= map.len() {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    len: map.len(),
                });
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::InvalidParameter(
                    "permutation map is not a bijection".into(),
                ));
            }
        }
        Ok(Self { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Column holding the one in row `row`.
    pub fn image(&self, row: usize) -> usize {
        self.map[row]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    /// Moves row `from` to index `to`, shifting the rows in between.
    pub fn move_row(&mut self, from: usize, to: usize) -> Result<()> {
        let len = self.map.len();
        for idx in [from, to] {
            if idx >= len {
                return Err(Error::IndexOutOfRange { index: idx, len });
            }
        }
        let row = self.map.remove(from);
        self.map.insert(to, row);
        Ok(())
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (row, &col) in self.map.iter().enumerate() {
            inv[col] = row;
        }
        Self { map: inv }
    }
}

/// Structural tag of a [`StructuredMatrix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixKind {
    Identity,
    Permutation,
    /// `entry(i, j) = nodes[i]^j`.
    Vandermonde {
        nodes: Vec<u64>,
    },
    /// `entry(i, j) = (a[i] - b[j])^-1`.
    Cauchy {
        a: Vec<u64>,
        b: Vec<u64>,
    },
    BlockDiag {
        top: Box<StructuredMatrix>,
        bottom: Box<StructuredMatrix>,
    },
    General,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Body {
    Identity,
    Permutation(PermutationCompact),
    Dense(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuredMatrix {
    field: FieldSpec,
    rows: usize,
    cols: usize,
    kind: MatrixKind,
    body: Body,
}

impl StructuredMatrix {
    pub fn identity(field: FieldSpec, size: usize) -> Self {
        Self {
            field,
            rows: size,
            cols: size,
            kind: MatrixKind::Identity,
            body: Body::Identity,
        }
    }

    pub fn permutation(field: FieldSpec, perm: PermutationCompact) -> Self {
        let n = perm.len();
        Self {
            field,
            rows: n,
            cols: n,
            kind: MatrixKind::Permutation,
            body: Body::Permutation(perm),
        }
    }

    /// Vandermonde matrix with one row per node and powers `0..cols`.
    pub fn vandermonde(field: FieldSpec, nodes: &[u64], cols: usize) -> Result<Self> {
        let nodes = field.elems(nodes);
        if nodes.len() as u64 > field.q() {
            return Err(Error::FieldTooSmall {
                q: field.q(),
                needed: nodes.len(),
            });
        }
        if has_duplicates(&nodes) {
            return Err(Error::DuplicateNodes);
        }
        let mut data = Vec::with_capacity(nodes.len() * cols);
        for &node in &nodes {
            let mut p = 1 % field.q();
            for _ in 0..cols {
                data.push(p);
                p = field.mul(p, node);
            }
        }
        Ok(Self {
            field,
            rows: nodes.len(),
            cols,
            kind: MatrixKind::Vandermonde { nodes },
            body: Body::Dense(data),
        })
    }

    pub fn cauchy(field: FieldSpec, a: &[u64], b: &[u64]) -> Result<Self> {
        let a = field.elems(a);
        let b = field.elems(b);
        let needed = a.len() + b.len();
        if needed as u64 > field.q() {
            return Err(Error::FieldTooSmall {
                q: field.q(),
                needed,
            });
        }
        let union: Vec<u64> = a.iter().chain(b.iter()).copied().collect();
        if has_duplicates(&union) {
            return Err(Error::DuplicateNodes);
        }
        let mut data = Vec::with_capacity(a.len() * b.len());
        for &ai in &a {
            for &bj in &b {
                data.push(field.inv(field.sub(ai, bj))?);
            }
        }
        Ok(Self {
            field,
            rows: a.len(),
            cols: b.len(),
            kind: MatrixKind::Cauchy { a, b },
            body: Body::Dense(data),
        })
    }

    pub fn block_diag(top: StructuredMatrix, bottom: StructuredMatrix) -> Result<Self> {
        if top.field != bottom.field {
            return Err(Error::MixedFields {
                left: top.field.q(),
                right: bottom.field.q(),
            });
        }
        let rows = top.rows + bottom.rows;
        let cols = top.cols + bottom.cols;
        let mut data = vec![0; rows * cols];
        for i in 0..top.rows {
            for j in 0..top.cols {
                data[i * cols + j] = top.entry(i, j);
            }
        }
        for i in 0..bottom.rows {
            for j in 0..bottom.cols {
                data[(top.rows + i) * cols + top.cols + j] = bottom.entry(i, j);
            }
        }
        Ok(Self {
            field: top.field,
            rows,
            cols,
            kind: MatrixKind::BlockDiag {
                top: Box::new(top),
                bottom: Box::new(bottom),
            },
            body: Body::Dense(data),
        })
    }

    /// Untagged matrix from row-major rows; entries are reduced mod `q`.
    pub fn from_rows(field: FieldSpec, rows: &[Vec<u64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            data.extend(r.iter().map(|&v| field.reduce(v)));
        }
        Ok(Self::general(field, rows.len(), cols, data))
    }

    fn general(field: FieldSpec, rows: usize, cols: usize, data: Vec<u64>) -> Self {
        Self {
            field,
            rows,
            cols,
            kind: MatrixKind::General,
            body: Body::Dense(data),
        }
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> &MatrixKind {
        &self.kind
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_permutation(&self) -> Option<PermutationCompact> {
        match &self.body {
            Body::Identity => Some(PermutationCompact::identity(self.rows)),
            Body::Permutation(p) => Some(p.clone()),
            Body::Dense(_) => None,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> u64 {
        debug_assert!(i < self.rows && j < self.cols);
        match &self.body {
            Body::Identity => u64::from(i == j),
            Body::Permutation(p) => u64::from(p.image(i) == j),
            Body::Dense(d) => d[i * self.cols + j],
        }
    }

    pub fn row(&self, i: usize) -> Vec<u64> {
        (0..self.cols).map(|j| self.entry(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    /// Same entries with the structural tag dropped.
    pub fn to_general(&self) -> Self {
        Self::general(self.field, self.rows, self.cols, self.dense_data())
    }

    fn dense_data(&self) -> Vec<u64> {
        match &self.body {
            Body::Dense(d) => d.clone(),
            _ => self.to_rows().concat(),
        }
    }

    fn check_row(&self, i: usize) -> Result<()> {
        if i >= self.rows {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.rows,
            });
        }
        Ok(())
    }

    fn check_col(&self, j: usize) -> Result<()> {
        if j >= self.cols {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.cols,
            });
        }
        Ok(())
    }

    fn dense_without_row(&self, i: usize) -> Vec<u64> {
        let mut d = self.dense_data();
        d.drain(i * self.cols..(i + 1) * self.cols);
        d
    }

    fn dense_without_col(&self, j: usize) -> Vec<u64> {
        let d = self.dense_data();
        let mut out = Vec::with_capacity(self.rows * (self.cols - 1));
        for r in d.chunks(self.cols.max(1)).take(self.rows) {
            out.extend(
                r.iter()
                    .enumerate()
                    .filter(|&(c, _)| c != j)
                    .map(|(_, &v)| v),
            );
        }
        out
    }

    pub fn delete_row(&self, i: usize) -> Result<Self> {
        self.check_row(i)?;
        let rows = self.rows - 1;
        Ok(match &self.kind {
            MatrixKind::Vandermonde { nodes } => {
                let mut nodes = nodes.clone();
                nodes.remove(i);
                Self {
                    field: self.field,
                    rows,
                    cols: self.cols,
                    kind: MatrixKind::Vandermonde { nodes },
                    body: Body::Dense(self.dense_without_row(i)),
                }
            }
            MatrixKind::Cauchy { a, b } => {
                let mut a = a.clone();
                a.remove(i);
                Self {
                    field: self.field,
                    rows,
                    cols: self.cols,
                    kind: MatrixKind::Cauchy { a, b: b.clone() },
                    body: Body::Dense(self.dense_without_row(i)),
                }
            }
            MatrixKind::BlockDiag { top, bottom } => {
                if i < top.rows {
                    Self::block_diag(top.delete_row(i)?, (**bottom).clone())?
                } else {
                    Self::block_diag((**top).clone(), bottom.delete_row(i - top.rows)?)?
                }
            }
            _ => Self::general(self.field, rows, self.cols, self.dense_without_row(i)),
        })
    }

    pub fn delete_col(&self, j: usize) -> Result<Self> {
        self.check_col(j)?;
        let cols = self.cols - 1;
        Ok(match &self.kind {
            MatrixKind::Vandermonde { nodes } if j == self.cols - 1 => Self {
                field: self.field,
                rows: self.rows,
                cols,
                kind: MatrixKind::Vandermonde {
                    nodes: nodes.clone(),
                },
                body: Body::Dense(self.dense_without_col(j)),
            },
            MatrixKind::Cauchy { a, b } => {
                let mut b = b.clone();
                b.remove(j);
                Self {
                    field: self.field,
                    rows: self.rows,
                    cols,
                    kind: MatrixKind::Cauchy { a: a.clone(), b },
                    body: Body::Dense(self.dense_without_col(j)),
                }
            }
            MatrixKind::BlockDiag { top, bottom } => {
                if j < top.cols {
                    Self::block_diag(top.delete_col(j)?, (**bottom).clone())?
                } else {
                    Self::block_diag((**top).clone(), bottom.delete_col(j - top.cols)?)?
                }
            }
            _ => Self::general(self.field, self.rows, cols, self.dense_without_col(j)),
        })
    }

    /// Deletes row `i` and column `j` together; an identity stays an identity
    /// when `i == j`.
    pub fn delete_row_col(&self, i: usize, j: usize) -> Result<Self> {
        self.check_row(i)?;
        self.check_col(j)?;
        match (&self.kind, &self.body) {
            (MatrixKind::Identity, Body::Identity) if i == j => {
                Ok(Self::identity(self.field, self.rows - 1))
            }
            _ => self.delete_row(i)?.delete_col(j),
        }
    }

    /// Keeps the first `cols` columns.
    pub fn truncate_cols(&self, cols: usize) -> Result<Self> {
        if cols > self.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot truncate {} columns to {cols}",
                self.cols
            )));
        }
        let mut m = self.clone();
        while m.cols > cols {
            m = m.delete_col(m.cols - 1)?;
        }
        Ok(m)
    }

    /// Moves row `from` to position `to`, shifting the rows in between.
    pub fn move_row(&self, from: usize, to: usize) -> Result<Self> {
        self.check_row(from)?;
        self.check_row(to)?;
        match &self.body {
            Body::Identity | Body::Permutation(_) => {
                let mut p = self.as_permutation().expect("permutation body");
                p.move_row(from, to)?;
                Ok(Self::permutation(self.field, p))
            }
            Body::Dense(_) => {
                let mut rows = self.to_rows();
                let r = rows.remove(from);
                rows.insert(to, r);
                let data = rows.concat();
                let kind = match &self.kind {
                    MatrixKind::Vandermonde { nodes } => {
                        let mut nodes = nodes.clone();
                        let n = nodes.remove(from);
                        nodes.insert(to, n);
                        MatrixKind::Vandermonde { nodes }
                    }
                    MatrixKind::Cauchy { a, b } => {
                        let mut a = a.clone();
                        let x = a.remove(from);
                        a.insert(to, x);
                        MatrixKind::Cauchy { a, b: b.clone() }
                    }
                    _ => MatrixKind::General,
                };
                Ok(Self {
                    field: self.field,
                    rows: self.rows,
                    cols: self.cols,
                    kind,
                    body: Body::Dense(data),
                })
            }
        }
    }

    pub fn transpose(&self) -> Self {
        match &self.body {
            Body::Identity => self.clone(),
            Body::Permutation(p) => Self::permutation(self.field, p.inverse()),
            Body::Dense(d) => {
                let mut t = vec![0; d.len()];
                for i in 0..self.rows {
                    for j in 0..self.cols {
                        t[j * self.rows + i] = d[i * self.cols + j];
                    }
                }
                Self::general(self.field, self.cols, self.rows, t)
            }
        }
    }

    pub fn mat_mul(&self, other: &Self) -> Result<Self> {
        if self.field != other.field {
            return Err(Error::MixedFields {
                left: self.field.q(),
                right: other.field.q(),
            });
        }
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if let (Some(a), Some(b)) = (self.as_permutation(), other.as_permutation()) {
            let map = (0..a.len()).map(|i| b.image(a.image(i))).collect();
            return Ok(Self::permutation(self.field, PermutationCompact { map }));
        }
        let mut data = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            data.extend(other.left_mul_unchecked(&self.row(i)));
        }
        Ok(Self::general(self.field, self.rows, other.cols, data))
    }

    /// Row vector times matrix, `x * M`.
    pub fn vec_mat_mul(&self, x: &[u64]) -> Result<Vec<u64>> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} times {}x{} matrix",
                x.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(self.left_mul_unchecked(x))
    }

    fn left_mul_unchecked(&self, x: &[u64]) -> Vec<u64> {
        let f = self.field;
        match &self.body {
            Body::Identity => x.to_vec(),
            Body::Permutation(p) => {
                let mut out = vec![0; self.cols];
                for (i, &v) in x.iter().enumerate() {
                    out[p.image(i)] = v;
                }
                out
            }
            Body::Dense(d) => {
                // accumulate in u128 and reduce once per column
                let q = f.q() as u128;
                let mut acc = vec![0u128; self.cols];
                for (i, &xi) in x.iter().enumerate() {
                    if xi == 0 {
                        continue;
                    }
                    let row = &d[i * self.cols..(i + 1) * self.cols];
                    for (a, &m) in acc.iter_mut().zip(row) {
                        *a = (*a + xi as u128 * m as u128) % q;
                    }
                }
                acc.into_iter().map(|a| a as u64).collect()
            }
        }
    }

    /// Row echelon reduction returning the pivot columns.
    fn pivot_columns(&self) -> Vec<usize> {
        let f = self.field;
        let mut m = self.to_rows();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| m[i][c] != 0) else {
                continue;
            };
            m.swap(r, p);
            let inv = f.inv(m[r][c]).expect("nonzero pivot");
            for v in m[r].iter_mut() {
                *v = f.mul(*v, inv);
            }
            let (top, rest) = m.split_at_mut(r + 1);
            let pivot_row = &top[r];
            for row in rest.iter_mut() {
                let factor = row[c];
                if factor != 0 {
                    for (v, &pv) in row[c..].iter_mut().zip(&pivot_row[c..]) {
                        *v = f.sub(*v, f.mul(factor, pv));
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.pivot_columns().len()
    }

    pub fn is_nonsingular(&self) -> bool {
        self.is_square() && self.rank() == self.rows
    }

    /// Gauss-Jordan inverse with first-nonzero pivoting.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "inverse of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        match &self.body {
            Body::Identity => return Ok(self.clone()),
            Body::Permutation(p) => return Ok(Self::permutation(self.field, p.inverse())),
            Body::Dense(_) => {}
        }
        let f = self.field;
        let n = self.rows;
        let mut m = self.to_rows();
        let mut inv: Vec<Vec<u64>> = (0..n)
            .map(|i| (0..n).map(|j| u64::from(i == j)).collect())
            .collect();
        for c in 0..n {
            let p = (c..n).find(|&i| m[i][c] != 0).ok_or(Error::Singular)?;
            m.swap(c, p);
            inv.swap(c, p);
            let s = f.inv(m[c][c])?;
            for j in 0..n {
                m[c][j] = f.mul(m[c][j], s);
                inv[c][j] = f.mul(inv[c][j], s);
            }
            for i in 0..n {
                let factor = m[i][c];
                if i == c || factor == 0 {
                    continue;
                }
                for j in 0..n {
                    let t = f.mul(factor, m[c][j]);
                    m[i][j] = f.sub(m[i][j], t);
                    let t = f.mul(factor, inv[c][j]);
                    inv[i][j] = f.sub(inv[i][j], t);
                }
            }
        }
        Ok(Self::general(f, n, n, inv.concat()))
    }

    /// A matrix `R` with `self * R = I_rows`, for `rows <= cols` and full row
    /// rank. The square submatrix on a set of pivot columns is inverted and
    /// the remaining rows of `R` are zero.
    pub fn right_inverse(&self) -> Result<Self> {
        if self.is_square() {
            return self.inverse().map_err(|e| match e {
                Error::Singular => Error::RankDeficient,
                other => other,
            });
        }
        if self.rows > self.cols {
            return Err(Error::RankDeficient);
        }
        let pivots = self.pivot_columns();
        if pivots.len() < self.rows {
            return Err(Error::RankDeficient);
        }
        let sub: Vec<Vec<u64>> = (0..self.rows)
            .map(|i| pivots.iter().map(|&c| self.entry(i, c)).collect())
            .collect();
        let sub_inv = Self::from_rows(self.field, &sub)?.inverse()?;
        let mut data = vec![0; self.cols * self.rows];
        for (k, &c) in pivots.iter().enumerate() {
            for j in 0..self.rows {
                data[c * self.rows + j] = sub_inv.entry(k, j);
            }
        }
        Ok(Self::general(self.field, self.cols, self.rows, data))
    }

    /// Entry-wise equality regardless of structural tag.
    pub fn same_entries(&self, other: &Self) -> bool {
        self.field == other.field
            && self.rows == other.rows
            && self.cols == other.cols
            && (0..self.rows).all(|i| (0..self.cols).all(|j| self.entry(i, j) == other.entry(i, j)))
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..self.cols).all(|j| self.entry(i, j) == u64::from(i == j)))
    }
}

fn has_duplicates(values: &[u64]) -> bool {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.windows(2).any(|w| w[0] == w[1])
}
