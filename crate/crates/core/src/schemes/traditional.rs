//! Span updates under plain block encoding.
//!
//! With identity matrices a deletion shifts every later coordinate of the
//! block, so the nodes must be sent the whole affected range. A coordinator
//! collects the deletion positions, announces the range `[lo, hi)` and every
//! user sends its new symbols in that range to its connected nodes. Columns
//! past the range are shifted locally at the nodes.

use super::{
    one_deletion_per_user, sorted_deletions, without_positions, Deletion, EditEvent, Endpoint,
    RoundReport, SyncMessage, SyncState,
};
use crate::dss::{self, LinearDssCode, StorageTensor};
use crate::error::{Error, Result};
use crate::intermediary::IntermediaryConfig;
use crate::matlib::MatrixKind;

/// One deletion per user.
pub fn scheme_t_round(state: &mut SyncState, edits: &[EditEvent]) -> Result<RoundReport> {
    let dels = one_deletion_per_user(edits, state.users())?;
    let per_user: Vec<Vec<Deletion>> = dels.into_iter().map(|d| vec![d]).collect();
    scheme_t_apply(state, &per_user)
}

/// Any number of deletions per user.
///
/// When every user deletes the same number `c` of symbols the block width
/// drops by `c` and columns at or beyond `max_s(last position) - c + 1` are
/// shifted in place; otherwise the width becomes the longest new block and
/// everything from the first deletion onwards is re-sent.
pub fn scheme_t_apply(state: &mut SyncState, per_user: &[Vec<Deletion>]) -> Result<RoundReport> {
    apply(state, per_user, false)
}

/// Any number of deletions per user, always re-sending the suffix from the
/// first deletion to the end of the new width.
pub fn scheme_t_apply_suffix(
    state: &mut SyncState,
    per_user: &[Vec<Deletion>],
) -> Result<RoundReport> {
    apply(state, per_user, true)
}

fn apply(state: &mut SyncState, per_user: &[Vec<Deletion>], suffix: bool) -> Result<RoundReport> {
    let users = state.users();
    if per_user.len() != users {
        return Err(Error::DimensionMismatch(format!(
            "deletions for {} users, system has {users}",
            per_user.len()
        )));
    }
    if state
        .config
        .matrices()
        .iter()
        .any(|m| *m.kind() != MatrixKind::Identity)
    {
        return Err(Error::ConfigMismatch(
            "span updates require identity matrices".into(),
        ));
    }
    let field = state.field();
    let ell = state.ell();
    let mut positions = Vec::with_capacity(users);
    for (s, dels) in per_user.iter().enumerate() {
        let sorted = sorted_deletions(s, dels, state.lengths[s])?;
        positions.push(sorted.iter().map(|d| d.position).collect::<Vec<_>>());
    }
    let counts: Vec<usize> = positions.iter().map(Vec::len).collect();
    if counts.iter().all(|&c| c == 0) {
        return Ok(state.finish(Vec::new(), None, None));
    }
    let new_logical: Vec<Vec<u64>> = (0..users)
        .map(|s| without_positions(state.block(s), &positions[s]))
        .collect();
    let i_min = positions
        .iter()
        .flatten()
        .copied()
        .min()
        .expect("some deletion");
    let c = counts[0];
    let uniform = !suffix && counts.iter().all(|&d| d == c);
    let (new_ell, hi) = if uniform {
        let last = positions.iter().map(|p| p[c - 1]).max().expect("users");
        (ell - c, last + 1 - c)
    } else {
        let w = new_logical.iter().map(Vec::len).max().unwrap_or(0);
        (w, w)
    };
    let lo = i_min.min(hi);
    let shift = ell - new_ell;

    let stored: Vec<Vec<u64>> = new_logical
        .iter()
        .map(|b| {
            let mut b = b.clone();
            b.resize(new_ell, 0);
            b
        })
        .collect();
    let spans: Vec<Vec<u64>> = stored.iter().map(|b| b[lo..hi].to_vec()).collect();
    let fresh = dss::encode_block(&state.code, &spans)?;
    let rows: Vec<Vec<u64>> = (0..state.code.n())
        .map(|t| {
            let old = state.tensor.node(t);
            let mut row = Vec::with_capacity(new_ell);
            row.extend_from_slice(&old[..lo]);
            row.extend_from_slice(fresh.node(t));
            row.extend_from_slice(&old[hi + shift..new_ell + shift]);
            row
        })
        .collect();
    let tensor = StorageTensor::from_rows(rows)?;

    let mut messages = Vec::new();
    for (s, &d) in counts.iter().enumerate() {
        if d > 0 {
            messages.push(SyncMessage::coordination(
                Endpoint::User(s),
                Endpoint::Coordinator,
                d,
                ell,
            ));
        }
    }
    for s in 0..users {
        messages.push(SyncMessage::coordination(
            Endpoint::Coordinator,
            Endpoint::User(s),
            2,
            ell,
        ));
    }
    if hi > lo {
        for s in 0..users {
            for t in state.code.connected_nodes(s) {
                messages.push(SyncMessage::span(
                    Endpoint::User(s),
                    Endpoint::Node(t),
                    hi - lo,
                    field,
                ));
            }
        }
    }

    state.config = IntermediaryConfig::identity(field, users, new_ell);
    state.lengths = new_logical.iter().map(Vec::len).collect();
    state.blocks = stored;
    state.tensor = tensor;
    Ok(state.finish(messages, None, Some((lo, hi))))
}
