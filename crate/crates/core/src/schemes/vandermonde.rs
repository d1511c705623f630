//! Deletions absorbed by Vandermonde matrices.
//!
//! Deleting `x_i` from a block and row `i` (plus trailing columns) from its
//! Vandermonde matrix changes the coded vector by exactly `x_i * A_i`,
//! truncated. The nodes subtract the encoding of that difference and drop
//! their trailing columns, so each deletion costs one position and one value.

use super::{
    one_deletion_per_user, sorted_deletions, without_positions, Deletion, EditEvent, Endpoint,
    RoundReport, SyncMessage, SyncState,
};
use crate::dss::{self, LinearDssCode, StorageTensor};
use crate::error::{Error, Result};
use crate::matlib::MatrixKind;

/// One known deletion per user.
pub fn scheme_v_round(state: &mut SyncState, edits: &[EditEvent]) -> Result<RoundReport> {
    let dels = one_deletion_per_user(edits, state.users())?;
    let per_user: Vec<Vec<Deletion>> = dels.into_iter().map(|d| vec![d]).collect();
    scheme_v_round_nonuniform(state, &per_user)
}

/// Any number of known deletions per user, positions referring to the
/// blocks before the round. The new width is the longest resulting block.
pub fn scheme_v_round_nonuniform(
    state: &mut SyncState,
    per_user: &[Vec<Deletion>],
) -> Result<RoundReport> {
    let ell = state.ell();
    let field = state.field();
    let correction = apply_deletions(state, per_user)?;
    let mut messages = Vec::new();
    for (s, dels) in per_user.iter().enumerate() {
        if dels.is_empty() {
            continue;
        }
        for t in state.code.connected_nodes(s) {
            for _ in dels {
                let (u, n) = (Endpoint::User(s), Endpoint::Node(t));
                messages.push(SyncMessage::position(u, n, ell));
                messages.push(SyncMessage::value(u, n, field));
            }
        }
    }
    Ok(state.finish(messages, Some(correction), None))
}

/// Mutates the state for the given deletions and returns the subtracted
/// tensor, without recording messages.
pub(crate) fn apply_deletions(
    state: &mut SyncState,
    per_user: &[Vec<Deletion>],
) -> Result<StorageTensor> {
    let users = state.users();
    if per_user.len() != users {
        return Err(Error::DimensionMismatch(format!(
            "deletions for {} users, system has {users}",
            per_user.len()
        )));
    }
    if let Some(s) = state
        .config
        .matrices()
        .iter()
        .position(|m| !matches!(m.kind(), MatrixKind::Vandermonde { .. }))
    {
        return Err(Error::ConfigMismatch(format!(
            "matrix of user {s} is not Vandermonde"
        )));
    }
    let field = state.field();
    let mut sorted = Vec::with_capacity(users);
    for (s, dels) in per_user.iter().enumerate() {
        let d = sorted_deletions(s, dels, state.lengths[s])?;
        for del in &d {
            let v = del.value.ok_or(Error::MissingValue { user: s })?;
            let stored = state.blocks[s][del.position];
            if field.reduce(v) != stored {
                return Err(Error::ValueMismatch {
                    user: s,
                    reported: v,
                    stored,
                });
            }
        }
        sorted.push(d.iter().map(|d| d.position).collect::<Vec<_>>());
    }

    let ell = state.ell();
    let diffs: Vec<Vec<u64>> = (0..users)
        .map(|s| {
            let a = state.config.matrix(s);
            let mut d = vec![0u64; ell];
            for &i in &sorted[s] {
                let x = state.blocks[s][i];
                for (acc, r) in d.iter_mut().zip(a.row(i)) {
                    *acc = field.add(*acc, field.mul(x, r));
                }
            }
            d
        })
        .collect();
    let correction = dss::encode_block(&state.code, &diffs)?;

    let new_ell = (0..users)
        .map(|s| state.lengths[s] - sorted[s].len())
        .max()
        .unwrap_or(0);
    let mut matrices = Vec::with_capacity(users);
    for (s, rows) in sorted.iter().enumerate() {
        let mut m = state.config.matrix(s).clone();
        for &i in rows.iter().rev() {
            m = m.delete_row(i)?;
        }
        matrices.push(m.truncate_cols(new_ell)?);
    }
    let config = state.config.with_matrices(matrices)?;

    let all: Vec<usize> = (0..state.code.n()).collect();
    state.tensor.sub_on(field, &correction, &all)?;
    state.tensor.truncate(new_ell);
    for (s, positions) in sorted.iter().enumerate() {
        state.blocks[s] = without_positions(&state.blocks[s], positions);
        state.lengths[s] = state.blocks[s].len();
    }
    state.config = config;
    Ok(correction)
}
