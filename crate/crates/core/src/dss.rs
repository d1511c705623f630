//! Base distributed-storage codes and their extension to blocks.
//!
//! A linear `(n, k, d, alpha, B)` code encodes `B` message symbols into `n`
//! nodes holding `alpha` symbols each. Any `k` nodes reconstruct the message
//! and any `d` helpers repair a lost node. Encoding `B` blocks of length `ell`
//! applies the scalar code to every coordinate independently, so node `t`
//! ends up holding an `alpha x ell` array.

use crate::error::{Error, Result};
use crate::gf::FieldSpec;
use crate::matlib::StructuredMatrix;

/// Contract every base code exposes to the block layer.
///
/// The encoder maps a row vector `u` of length `B` to `u * E`, a row of
/// length `n * alpha` whose entries `t*alpha .. (t+1)*alpha` belong to node
/// `t`.
pub trait LinearDssCode {
    fn field(&self) -> FieldSpec;
    fn n(&self) -> usize;
    fn k(&self) -> usize;
    fn d(&self) -> usize;
    fn alpha(&self) -> usize;
    /// Message symbols per codeword.
    fn message_len(&self) -> usize;
    /// `B x (n * alpha)` encoder matrix.
    fn encoder(&self) -> &StructuredMatrix;
    /// Matrix `R` with `y * R = u` where `y` concatenates the contents of the
    /// nodes in `subset`, in the order given.
    fn reconstruction_matrix(&self, subset: &[usize]) -> Result<StructuredMatrix>;
    /// Matrix `R` with `y * R` equal to node `target`'s content, where `y`
    /// concatenates the helpers' contents.
    fn repair_matrix(&self, target: usize, helpers: &[usize]) -> Result<StructuredMatrix>;

    /// Nodes whose content depends on message symbol `s`.
    fn connected_nodes(&self, s: usize) -> Vec<usize> {
        let e = self.encoder();
        let a = self.alpha();
        (0..self.n())
            .filter(|&t| (t * a..(t + 1) * a).any(|c| e.entry(s, c) != 0))
            .collect()
    }
}

/// A systematic MDS code with `alpha = 1`, `B = k` and `d = k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSpec {
    n: usize,
    k: usize,
    field: FieldSpec,
    generator: StructuredMatrix,
}

impl CodeSpec {
    /// `[k+1, k]` single parity code with generator `[I_k | 1]`.
    pub fn single_parity(k: usize, q: u64) -> Result<Self> {
        let field = FieldSpec::new(q)?;
        if k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        let rows: Vec<Vec<u64>> = (0..k)
            .map(|r| (0..=k).map(|c| u64::from(c == r || c == k)).collect())
            .collect();
        Self::from_generator(field, StructuredMatrix::from_rows(field, &rows)?)
    }

    /// Systematic Reed-Solomon code `V_[k]^-1 * V`, where `V` is the `k x n`
    /// Vandermonde matrix on the points `1, 2, ..., n` reduced mod `q`.
    pub fn rs_systematic(n: usize, k: usize, q: u64) -> Result<Self> {
        let field = FieldSpec::new(q)?;
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= k <= n, got n = {n}, k = {k}"
            )));
        }
        if n as u64 > q {
            return Err(Error::FieldTooSmall { q, needed: n });
        }
        let points: Vec<u64> = (1..=n as u64).map(|p| p % q).collect();
        // rows of V are powers, columns are points
        let v = StructuredMatrix::vandermonde(field, &points, k)?.transpose();
        let head_rows: Vec<Vec<u64>> = (0..k)
            .map(|r| (0..k).map(|c| v.entry(r, c)).collect())
            .collect();
        let head = StructuredMatrix::from_rows(field, &head_rows)?;
        let generator = head.inverse()?.mat_mul(&v)?;
        Self::from_generator(field, generator)
    }

    /// Wraps a `k x n` generator, checking systematic form and the MDS
    /// property on every `k`-subset of columns.
    pub fn from_generator(field: FieldSpec, generator: StructuredMatrix) -> Result<Self> {
        let (k, n) = (generator.rows(), generator.cols());
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "generator must be k x n with 1 <= k <= n, got {k} x {n}"
            )));
        }
        for r in 0..k {
            for c in 0..k {
                if generator.entry(r, c) != u64::from(r == c) {
                    return Err(Error::InvalidParameter(
                        "generator is not in systematic form".into(),
                    ));
                }
            }
        }
        let spec = Self {
            n,
            k,
            field,
            generator,
        };
        for subset in k_subsets(n, k) {
            if !spec.columns(&subset).is_nonsingular() {
                return Err(Error::InvalidParameter(format!(
                    "columns {subset:?} of the generator are singular"
                )));
            }
        }
        Ok(spec)
    }

    pub fn generator(&self) -> &StructuredMatrix {
        &self.generator
    }

    /// Systematic nodes hold the message symbols verbatim.
    pub fn is_systematic_node(&self, t: usize) -> bool {
        t < self.k
    }

    fn columns(&self, subset: &[usize]) -> StructuredMatrix {
        let rows: Vec<Vec<u64>> = (0..self.k)
            .map(|r| subset.iter().map(|&c| self.generator.entry(r, c)).collect())
            .collect();
        StructuredMatrix::from_rows(self.field, &rows).expect("rectangular rows")
    }

    fn check_subset(&self, subset: &[usize], expected: usize) -> Result<()> {
        if subset.len() != expected {
            return Err(Error::BadSubsetSize {
                expected,
                found: subset.len(),
            });
        }
        for (idx, &t) in subset.iter().enumerate() {
            if t >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: t,
                    len: self.n,
                });
            }
            if subset[..idx].contains(&t) {
                return Err(Error::InvalidParameter(format!("node {t} listed twice")));
            }
        }
        Ok(())
    }
}

impl LinearDssCode for CodeSpec {
    fn field(&self) -> FieldSpec {
        self.field
    }

    fn n(&self) -> usize {
        self.n
    }

    fn k(&self) -> usize {
        self.k
    }

    fn d(&self) -> usize {
        self.k
    }

    fn alpha(&self) -> usize {
        1
    }

    fn message_len(&self) -> usize {
        self.k
    }

    fn encoder(&self) -> &StructuredMatrix {
        &self.generator
    }

    fn reconstruction_matrix(&self, subset: &[usize]) -> Result<StructuredMatrix> {
        self.check_subset(subset, self.k)?;
        self.columns(subset).inverse()
    }

    fn repair_matrix(&self, target: usize, helpers: &[usize]) -> Result<StructuredMatrix> {
        self.check_subset(helpers, self.k)?;
        if target >= self.n {
            return Err(Error::IndexOutOfRange {
                index: target,
                len: self.n,
            });
        }
        if helpers.contains(&target) {
            return Err(Error::InvalidParameter(format!(
                "node {target} cannot help repair itself"
            )));
        }
        self.columns(helpers)
            .inverse()?
            .mat_mul(&self.columns(&[target]))
    }
}

/// Every `m`-subset of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if m > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        out.push(idx.clone());
        let Some(pos) = (0..m).rev().find(|&p| idx[p] < n - m + p) else {
            return out;
        };
        idx[pos] += 1;
        for p in pos + 1..m {
            idx[p] = idx[p - 1] + 1;
        }
    }
}

/// Contents of all `n` nodes: node `t` holds `alpha * ell` symbols with
/// symbol `(a, i)` at index `a * ell + i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageTensor {
    alpha: usize,
    ell: usize,
    nodes: Vec<Vec<u64>>,
}

impl StorageTensor {
    pub fn zeros(n: usize, alpha: usize, ell: usize) -> Self {
        Self {
            alpha,
            ell,
            nodes: vec![vec![0; alpha * ell]; n],
        }
    }

    /// Builds a tensor from per-node rows (`alpha = 1`).
    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let ell = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != ell) {
            return Err(Error::LengthMismatch {
                expected: ell,
                found: r.len(),
            });
        }
        Ok(Self {
            alpha: 1,
            ell,
            nodes: rows,
        })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn node(&self, t: usize) -> &[u64] {
        &self.nodes[t]
    }

    pub fn get(&self, t: usize, a: usize, i: usize) -> u64 {
        self.nodes[t][a * self.ell + i]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.nodes
    }

    /// Contents of the listed nodes, in order.
    pub fn restrict(&self, subset: &[usize]) -> Vec<Vec<u64>> {
        subset.iter().map(|&t| self.nodes[t].clone()).collect()
    }

    /// Keeps the first `ell` columns of every node.
    pub fn truncate(&mut self, ell: usize) {
        if ell >= self.ell {
            return;
        }
        let old = self.ell;
        for node in &mut self.nodes {
            let mut kept = Vec::with_capacity(self.alpha * ell);
            for a in 0..self.alpha {
                kept.extend_from_slice(&node[a * old..a * old + ell]);
            }
            *node = kept;
        }
        self.ell = ell;
    }

    /// Removes column `i` from every node, shifting later columns left.
    pub fn remove_column(&mut self, i: usize) -> Result<()> {
        if i >= self.ell {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.ell,
            });
        }
        let old = self.ell;
        for node in &mut self.nodes {
            for a in (0..self.alpha).rev() {
                node.remove(a * old + i);
            }
        }
        self.ell -= 1;
        Ok(())
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if (self.n(), self.alpha, self.ell) != (other.n(), other.alpha, other.ell) {
            return Err(Error::DimensionMismatch(format!(
                "tensor {}x{}x{} vs {}x{}x{}",
                self.n(),
                self.alpha,
                self.ell,
                other.n(),
                other.alpha,
                other.ell
            )));
        }
        Ok(())
    }

    /// Entrywise `self -= other` restricted to `nodes`.
    pub fn sub_on(&mut self, field: FieldSpec, other: &Self, nodes: &[usize]) -> Result<()> {
        self.check_shape(other)?;
        for &t in nodes {
            for (x, &y) in self.nodes[t].iter_mut().zip(&other.nodes[t]) {
                *x = field.sub(*x, y);
            }
        }
        Ok(())
    }

    /// Entrywise `self += other` restricted to `nodes`.
    pub fn add_on(&mut self, field: FieldSpec, other: &Self, nodes: &[usize]) -> Result<()> {
        self.check_shape(other)?;
        for &t in nodes {
            for (x, &y) in self.nodes[t].iter_mut().zip(&other.nodes[t]) {
                *x = field.add(*x, y);
            }
        }
        Ok(())
    }

    /// Overwrites columns `start..start+values.len()` of node `t` (alpha = 1
    /// layout, plane `a`).
    pub fn write_span(&mut self, t: usize, a: usize, start: usize, values: &[u64]) {
        let base = a * self.ell + start;
        self.nodes[t][base..base + values.len()].copy_from_slice(values);
    }

    pub fn is_zero(&self) -> bool {
        self.nodes.iter().all(|r| r.iter().all(|&v| v == 0))
    }
}

fn check_blocks(code: &impl LinearDssCode, blocks: &[Vec<u64>]) -> Result<usize> {
    if blocks.len() != code.message_len() {
        return Err(Error::DimensionMismatch(format!(
            "{} blocks supplied, code expects {}",
            blocks.len(),
            code.message_len()
        )));
    }
    let ell = blocks.first().map_or(0, Vec::len);
    if let Some(b) = blocks.iter().find(|b| b.len() != ell) {
        return Err(Error::LengthMismatch {
            expected: ell,
            found: b.len(),
        });
    }
    Ok(ell)
}

/// Applies the base code to each coordinate of the `B` blocks.
pub fn encode_block(code: &impl LinearDssCode, blocks: &[Vec<u64>]) -> Result<StorageTensor> {
    let ell = check_blocks(code, blocks)?;
    let mut out = StorageTensor::zeros(code.n(), code.alpha(), ell);
    for (s, block) in blocks.iter().enumerate() {
        accumulate_user(code, s, block, &mut out);
    }
    Ok(out)
}

/// Encoding of `(0, .., block, .., 0)` with `block` in slot `s`.
pub fn encode_user(code: &impl LinearDssCode, s: usize, block: &[u64]) -> Result<StorageTensor> {
    if s >= code.message_len() {
        return Err(Error::IndexOutOfRange {
            index: s,
            len: code.message_len(),
        });
    }
    let mut out = StorageTensor::zeros(code.n(), code.alpha(), block.len());
    accumulate_user(code, s, block, &mut out);
    Ok(out)
}

fn accumulate_user(code: &impl LinearDssCode, s: usize, block: &[u64], out: &mut StorageTensor) {
    let f = code.field();
    let e = code.encoder();
    let (alpha, ell) = (code.alpha(), block.len());
    for c in 0..code.n() * alpha {
        let g = e.entry(s, c);
        if g == 0 {
            continue;
        }
        let (t, a) = (c / alpha, c % alpha);
        let row = &mut out.nodes[t][a * ell..(a + 1) * ell];
        for (x, &b) in row.iter_mut().zip(block) {
            *x = f.add(*x, f.mul(g, b));
        }
    }
}

/// Applies a `(m * alpha) x w` matrix coordinatewise to stacked node slices,
/// returning `w` rows of length `ell`.
fn apply_coordinatewise(
    m: &StructuredMatrix,
    alpha: usize,
    slices: &[Vec<u64>],
) -> Result<Vec<Vec<u64>>> {
    let ell = slices.first().map_or(0, |s| s.len() / alpha.max(1));
    if let Some(s) = slices.iter().find(|s| s.len() != alpha * ell) {
        return Err(Error::LengthMismatch {
            expected: alpha * ell,
            found: s.len(),
        });
    }
    let f = m.field();
    let mut out = vec![vec![0u64; ell]; m.cols()];
    for (h, slice) in slices.iter().enumerate() {
        for a in 0..alpha {
            let r = h * alpha + a;
            let src = &slice[a * ell..(a + 1) * ell];
            for (col, dst) in out.iter_mut().enumerate() {
                let g = m.entry(r, col);
                if g == 0 {
                    continue;
                }
                for (x, &y) in dst.iter_mut().zip(src) {
                    *x = f.add(*x, f.mul(g, y));
                }
            }
        }
    }
    Ok(out)
}

/// Recovers the `B` blocks from the contents of the nodes in `subset`.
pub fn reconstruct_block(
    code: &impl LinearDssCode,
    subset: &[usize],
    slices: &[Vec<u64>],
) -> Result<Vec<Vec<u64>>> {
    if slices.len() != subset.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} slices for {} nodes",
            slices.len(),
            subset.len()
        )));
    }
    let r = code.reconstruction_matrix(subset)?;
    apply_coordinatewise(&r, code.alpha(), slices)
}

/// Regenerates node `target` from the helpers' contents.
pub fn repair_node(
    code: &impl LinearDssCode,
    target: usize,
    helpers: &[usize],
    slices: &[Vec<u64>],
) -> Result<Vec<u64>> {
    if slices.len() != helpers.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} slices for {} helpers",
            slices.len(),
            helpers.len()
        )));
    }
    let r = code.repair_matrix(target, helpers)?;
    Ok(apply_coordinatewise(&r, code.alpha(), slices)?.concat())
}
