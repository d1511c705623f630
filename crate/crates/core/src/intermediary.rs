//! Encoding through per-user intermediary matrices.
//!
//! User `s` contributes `x_s * A_s` to the base encoder instead of `x_s`.
//! Because every `A_s` has a right inverse, any `k` nodes still determine the
//! raw blocks, and repair is untouched since it never looks at the matrices.
//! Blocks may be shorter than the common width `ell` when `A_s` is a wide
//! `ell_s x ell` matrix.

use std::sync::OnceLock;

use crate::dss::{self, LinearDssCode, StorageTensor};
use crate::error::{Error, Result};
use crate::gf::FieldSpec;
use crate::matlib::StructuredMatrix;

/// The matrices `A_1 .. A_B` together with the storage mode.
#[derive(Debug, Clone)]
pub struct IntermediaryConfig {
    matrices: Vec<StructuredMatrix>,
    systematic: bool,
    right_inverses: Vec<OnceLock<Result<StructuredMatrix>>>,
}

impl IntermediaryConfig {
    /// Checks that all matrices share a field and a column count and are no
    /// taller than they are wide.
    pub fn new(matrices: Vec<StructuredMatrix>, systematic: bool) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidParameter("at least one matrix required".into()))?;
        let (field, ell) = (first.field(), first.cols());
        for m in &matrices {
            if m.field() != field {
                return Err(Error::MixedFields {
                    left: field.q(),
                    right: m.field().q(),
                });
            }
            if m.cols() != ell {
                return Err(Error::DimensionMismatch(format!(
                    "matrix width {} differs from {ell}",
                    m.cols()
                )));
            }
            if m.rows() > m.cols() {
                return Err(Error::DimensionMismatch(format!(
                    "{}x{} matrix is taller than wide",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        let right_inverses = matrices.iter().map(|_| OnceLock::new()).collect();
        Ok(Self {
            matrices,
            systematic,
            right_inverses,
        })
    }

    /// All matrices equal to `I_ell`: plain block encoding.
    pub fn identity(field: FieldSpec, users: usize, ell: usize) -> Self {
        let m = StructuredMatrix::identity(field, ell);
        Self::new(vec![m; users.max(1)], false).expect("identity config is valid")
    }

    pub fn field(&self) -> FieldSpec {
        self.matrices[0].field()
    }

    pub fn users(&self) -> usize {
        self.matrices.len()
    }

    /// Common width of the matrices, i.e. the stored block dimension.
    pub fn ell(&self) -> usize {
        self.matrices[0].cols()
    }

    /// Length of user `s`'s block.
    pub fn user_len(&self, s: usize) -> usize {
        self.matrices[s].rows()
    }

    pub fn is_systematic(&self) -> bool {
        self.systematic
    }

    pub fn matrix(&self, s: usize) -> &StructuredMatrix {
        &self.matrices[s]
    }

    pub fn matrices(&self) -> &[StructuredMatrix] {
        &self.matrices
    }

    /// Copy with `A_s` replaced.
    pub fn with_matrix(&self, s: usize, m: StructuredMatrix) -> Result<Self> {
        let mut matrices = self.matrices.clone();
        matrices[s] = m;
        Self::new(matrices, self.systematic)
    }

    /// Copy with every matrix replaced.
    pub fn with_matrices(&self, matrices: Vec<StructuredMatrix>) -> Result<Self> {
        Self::new(matrices, self.systematic)
    }

    /// Right inverse of `A_s`, computed on first use.
    pub fn right_inverse(&self, s: usize) -> Result<&StructuredMatrix> {
        self.right_inverses[s]
            .get_or_init(|| self.matrices[s].right_inverse())
            .as_ref()
            .map_err(|e| match e {
                Error::RankDeficient | Error::Singular => Error::Singular,
                other => other.clone(),
            })
    }

    fn check_users(&self, code: &impl LinearDssCode) -> Result<()> {
        if self.users() != code.message_len() {
            return Err(Error::DimensionMismatch(format!(
                "{} matrices for {} users",
                self.users(),
                code.message_len()
            )));
        }
        if self.systematic && code.alpha() != 1 {
            return Err(Error::InvalidParameter(
                "systematic storage requires alpha = 1".into(),
            ));
        }
        Ok(())
    }

    /// User whose raw block node `t` stores, when in systematic mode.
    fn raw_owner(&self, code: &impl LinearDssCode, t: usize) -> Option<usize> {
        if self.systematic {
            systematic_owner(code, t)
        } else {
            None
        }
    }
}

/// User `s` when node `t`'s encoder column is the unit vector `e_s`.
pub fn systematic_owner(code: &impl LinearDssCode, t: usize) -> Option<usize> {
    if code.alpha() != 1 {
        return None;
    }
    let e = code.encoder();
    let nonzero: Vec<usize> = (0..e.rows()).filter(|&s| e.entry(s, t) != 0).collect();
    match nonzero.as_slice() {
        [s] if e.entry(*s, t) == 1 => Some(*s),
        _ => None,
    }
}

fn transform(config: &IntermediaryConfig, s: usize, x: &[u64]) -> Result<Vec<u64>> {
    let a = config.matrix(s);
    if x.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "block {s} has length {}, matrix expects {}",
            x.len(),
            a.rows()
        )));
    }
    a.vec_mat_mul(x)
}

fn padded(x: &[u64], ell: usize) -> Vec<u64> {
    let mut v = x.to_vec();
    v.resize(ell, 0);
    v
}

/// `Encode(ell)(x_1 A_1, .., x_B A_B)`; in systematic mode the systematic
/// nodes hold the raw blocks, zero padded to `ell`.
pub fn encode_star(
    code: &impl LinearDssCode,
    config: &IntermediaryConfig,
    blocks: &[Vec<u64>],
) -> Result<StorageTensor> {
    config.check_users(code)?;
    if blocks.len() != config.users() {
        return Err(Error::DimensionMismatch(format!(
            "{} blocks for {} users",
            blocks.len(),
            config.users()
        )));
    }
    let y = blocks
        .iter()
        .enumerate()
        .map(|(s, x)| transform(config, s, x))
        .collect::<Result<Vec<_>>>()?;
    let mut tensor = dss::encode_block(code, &y)?;
    for t in 0..code.n() {
        if let Some(s) = config.raw_owner(code, t) {
            tensor.write_span(t, 0, 0, &padded(&blocks[s], config.ell()));
        }
    }
    Ok(tensor)
}

/// Maps stored slices to the coded domain: raw systematic rows are
/// multiplied by their matrix, the rest pass through.
fn to_coded_domain(
    code: &impl LinearDssCode,
    config: &IntermediaryConfig,
    nodes: &[usize],
    slices: &[Vec<u64>],
) -> Result<Vec<Vec<u64>>> {
    nodes
        .iter()
        .zip(slices)
        .map(|(&t, slice)| match config.raw_owner(code, t) {
            Some(s) => {
                let len = config.user_len(s);
                if slice.len() < len {
                    return Err(Error::LengthMismatch {
                        expected: len,
                        found: slice.len(),
                    });
                }
                transform(config, s, &slice[..len])
            }
            None => Ok(slice.clone()),
        })
        .collect()
}

/// Recovers the raw blocks from any `k` nodes.
pub fn reconstruct_star(
    code: &impl LinearDssCode,
    config: &IntermediaryConfig,
    subset: &[usize],
    slices: &[Vec<u64>],
) -> Result<Vec<Vec<u64>>> {
    config.check_users(code)?;
    let coded = to_coded_domain(code, config, subset, slices)?;
    let y = dss::reconstruct_block(code, subset, &coded)?;
    y.iter()
        .enumerate()
        .map(|(s, ys)| config.right_inverse(s)?.vec_mat_mul(ys))
        .collect()
}

/// Regenerates node `target` exactly as [`encode_star`] would store it.
pub fn repair_star(
    code: &impl LinearDssCode,
    config: &IntermediaryConfig,
    target: usize,
    helpers: &[usize],
    slices: &[Vec<u64>],
) -> Result<Vec<u64>> {
    config.check_users(code)?;
    let coded = to_coded_domain(code, config, helpers, slices)?;
    let repaired = dss::repair_node(code, target, helpers, &coded)?;
    match config.raw_owner(code, target) {
        Some(s) => {
            let raw = config.right_inverse(s)?.vec_mat_mul(&repaired)?;
            Ok(padded(&raw, config.ell()))
        }
        None => Ok(repaired),
    }
}
