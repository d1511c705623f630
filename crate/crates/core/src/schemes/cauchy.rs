//! Position-only updates for one user via Cauchy matrices.
//!
//! User 0 keeps the identity matrix and every other user a Cauchy matrix.
//! When user 0 deletes coordinate `i_0`, column `i_0` is dropped from every
//! matrix and from the nodes. Every square submatrix of a Cauchy matrix is
//! nonsingular, so the other users' matrices stay invertible after losing
//! their own deleted row, and user 0 never has to reveal the deleted value.

use super::{one_deletion_per_user, EditEvent, Endpoint, RoundReport, SyncMessage, SyncState};
use crate::dss::{self, LinearDssCode};
use crate::error::{Error, Result};
use crate::matlib::MatrixKind;

/// One deletion per user. User 0's value is not needed; the others' are.
pub fn scheme_c_round(state: &mut SyncState, edits: &[EditEvent]) -> Result<RoundReport> {
    let users = state.users();
    let dels = one_deletion_per_user(edits, users)?;
    if *state.config.matrix(0).kind() != MatrixKind::Identity {
        return Err(Error::ConfigMismatch(
            "user 0 must hold the identity matrix".into(),
        ));
    }
    if let Some(s) =
        (1..users).find(|&s| !matches!(state.config.matrix(s).kind(), MatrixKind::Cauchy { .. }))
    {
        return Err(Error::ConfigMismatch(format!(
            "matrix of user {s} is not Cauchy"
        )));
    }
    let field = state.field();
    let ell = state.ell();
    for (s, d) in dels.iter().enumerate() {
        let len = state.lengths[s];
        if d.position >= len {
            return Err(Error::IndexOutOfRange {
                index: d.position,
                len,
            });
        }
        let stored = state.blocks[s][d.position];
        match d.value {
            Some(v) if field.reduce(v) != stored => {
                return Err(Error::ValueMismatch {
                    user: s,
                    reported: v,
                    stored,
                })
            }
            None if s > 0 => return Err(Error::MissingValue { user: s }),
            _ => {}
        }
    }

    let column = dels[0].position;
    let diffs: Vec<Vec<u64>> = (0..users)
        .map(|s| {
            let x = state.blocks[s][dels[s].position];
            state
                .config
                .matrix(s)
                .row(dels[s].position)
                .into_iter()
                .map(|a| field.mul(x, a))
                .collect()
        })
        .collect();
    let correction = dss::encode_block(&state.code, &diffs)?;
    let mut matrices = Vec::with_capacity(users);
    matrices.push(state.config.matrix(0).delete_row_col(column, column)?);
    for (s, d) in dels.iter().enumerate().skip(1) {
        matrices.push(state.config.matrix(s).delete_row_col(d.position, column)?);
    }
    let config = state.config.with_matrices(matrices)?;

    let all: Vec<usize> = (0..state.code.n()).collect();
    state.tensor.sub_on(field, &correction, &all)?;
    state.tensor.remove_column(column)?;
    for (s, d) in dels.iter().enumerate() {
        state.blocks[s].remove(d.position);
        state.lengths[s] -= 1;
    }
    state.config = config;

    let mut messages = Vec::new();
    for t in 0..state.code.n() {
        messages.push(SyncMessage::position(
            Endpoint::User(0),
            Endpoint::Node(t),
            ell,
        ));
    }
    for s in 1..users {
        messages.push(SyncMessage::position(
            Endpoint::User(0),
            Endpoint::User(s),
            ell,
        ));
    }
    for s in 1..users {
        for t in state.code.connected_nodes(s) {
            let (u, n) = (Endpoint::User(s), Endpoint::Node(t));
            messages.push(SyncMessage::position(u, n, ell));
            messages.push(SyncMessage::value(u, n, field));
        }
    }
    Ok(state.finish(messages, Some(correction), None))
}
