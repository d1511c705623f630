//! Removal of a shared pattern from every block that contains it.
//!
//! The coordinator broadcasts the pattern. Each user looks for its leftmost
//! occurrence and, if found, announces where it starts; the deleted values
//! are the pattern itself, so no values travel. The nodes then apply one
//! Vandermonde deletion per pattern symbol.

use super::vandermonde::apply_deletions;
use super::{Deletion, Endpoint, RoundReport, SyncMessage, SyncState};
use crate::dss::LinearDssCode;
use crate::error::Result;

/// Leftmost start of `pattern` inside `block`.
pub fn find_pattern(block: &[u64], pattern: &[u64]) -> Option<usize> {
    if pattern.is_empty() || pattern.len() > block.len() {
        return None;
    }
    block.windows(pattern.len()).position(|w| w == pattern)
}

pub fn dedup_round(state: &mut SyncState, pattern: &[u64]) -> Result<RoundReport> {
    let field = state.field();
    let pattern = field.elems(pattern);
    let ell = state.ell();
    let e = pattern.len();
    let mut messages = Vec::new();
    for s in 0..state.users() {
        messages.push(SyncMessage::span(
            Endpoint::Coordinator,
            Endpoint::User(s),
            e,
            field,
        ));
    }
    for t in 0..state.code.n() {
        messages.push(SyncMessage::span(
            Endpoint::Coordinator,
            Endpoint::Node(t),
            e,
            field,
        ));
    }
    let starts: Vec<Option<usize>> = (0..state.users())
        .map(|s| find_pattern(state.block(s), &pattern))
        .collect();
    if starts.iter().any(Option::is_some) {
        let mut trial = state.clone();
        for value in &pattern {
            let per_user: Vec<Vec<Deletion>> = starts
                .iter()
                .map(|p| {
                    p.map(|position| Deletion {
                        position,
                        value: Some(*value),
                    })
                    .into_iter()
                    .collect()
                })
                .collect();
            apply_deletions(&mut trial, &per_user)?;
        }
        *state = trial;
        for (s, p) in starts.iter().enumerate() {
            if p.is_none() {
                continue;
            }
            for t in state.code.connected_nodes(s) {
                for _ in 0..e {
                    messages.push(SyncMessage::position(
                        Endpoint::User(s),
                        Endpoint::Node(t),
                        ell,
                    ));
                }
            }
        }
    }
    Ok(state.finish(messages, None, None))
}
