//! Single-symbol updates through permutation matrices.
//!
//! Blocks keep a fixed length `ell` by zero padding. The permutation `A_s`
//! records where each block coordinate lives in the nodes' original order:
//! deleting coordinate `i` moves row `i` of `A_s` to the bottom, inserting at
//! `i` moves the bottom row up to `i`. Either way the coded vector changes in
//! a single coordinate `j`, so the user only sends the value, an edit-type bit
//! and `j`.

use super::{EditEvent, EditKind, Endpoint, RoundReport, SyncMessage, SyncState};
use crate::dss::{self, LinearDssCode};
use crate::error::{Error, Result};
use crate::matlib::StructuredMatrix;

pub fn scheme_p_apply_edit(state: &mut SyncState, edit: EditEvent) -> Result<RoundReport> {
    let s = edit.user;
    state.check_user(s)?;
    let field = state.field();
    let ell = state.config.ell();
    let mut perm =
        state.config.matrix(s).as_permutation().ok_or_else(|| {
            Error::ConfigMismatch(format!("matrix of user {s} is not a permutation"))
        })?;
    let len = state.lengths[s];
    let mut block = state.blocks[s].clone();

    let (value, j) = match edit.kind {
        EditKind::Deletion => {
            if edit.position >= len {
                return Err(Error::IndexOutOfRange {
                    index: edit.position,
                    len,
                });
            }
            let stored = block[edit.position];
            if let Some(v) = edit.value {
                if field.reduce(v) != stored {
                    return Err(Error::ValueMismatch {
                        user: s,
                        reported: v,
                        stored,
                    });
                }
            }
            let j = perm.image(edit.position);
            perm.move_row(edit.position, ell - 1)?;
            block.remove(edit.position);
            block.push(0);
            (stored, j)
        }
        EditKind::Insertion => {
            if edit.position > len {
                return Err(Error::IndexOutOfRange {
                    index: edit.position,
                    len: len + 1,
                });
            }
            if len >= ell {
                return Err(Error::NoPadSlack { user: s });
            }
            let v = field.reduce(edit.value.ok_or(Error::MissingValue { user: s })?);
            let j = perm.image(ell - 1);
            perm.move_row(ell - 1, edit.position)?;
            block.insert(edit.position, v);
            block.pop();
            (v, j)
        }
    };

    let mut unit = vec![0; ell];
    unit[j] = value;
    let correction = dss::encode_user(&state.code, s, &unit)?;
    let nodes = state.code.connected_nodes(s);
    match edit.kind {
        EditKind::Deletion => state.tensor.sub_on(field, &correction, &nodes)?,
        EditKind::Insertion => state.tensor.add_on(field, &correction, &nodes)?,
    }
    state.config = state
        .config
        .with_matrix(s, StructuredMatrix::permutation(field, perm))?;
    state.blocks[s] = block;
    state.lengths[s] = match edit.kind {
        EditKind::Deletion => len - 1,
        EditKind::Insertion => len + 1,
    };

    let mut messages = Vec::with_capacity(3 * nodes.len());
    for &t in &nodes {
        let (u, n) = (Endpoint::User(s), Endpoint::Node(t));
        messages.push(SyncMessage::value(u, n, field));
        messages.push(SyncMessage::type_bit(u, n));
        messages.push(SyncMessage::position(u, n, ell));
    }
    Ok(state.finish(messages, Some(correction), None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dss::CodeSpec;
    use crate::schemes::{initial_config, pair_bits, SchemeKind};

    fn reference_state() -> SyncState {
        let code = CodeSpec::single_parity(2, 5).unwrap();
        let cfg = initial_config(SchemeKind::P, code.field(), 2, 5, 0).unwrap();
        SyncState::new(code, cfg, vec![vec![1, 2, 3, 4, 4], vec![1, 1, 1, 1, 1]]).unwrap()
    }

    fn order(st: &SyncState) -> Vec<usize> {
        st.config()
            .matrix(0)
            .as_permutation()
            .unwrap()
            .as_slice()
            .to_vec()
    }

    #[test]
    fn reference_edit_sequence() {
        let mut st = reference_state();
        scheme_p_apply_edit(&mut st, EditEvent::deletion(0, 1)).unwrap();
        assert_eq!(
            st.tensor().rows(),
            &[
                vec![1, 0, 3, 4, 4],
                vec![1, 1, 1, 1, 1],
                vec![2, 1, 4, 0, 0]
            ]
        );
        assert_eq!(order(&st), vec![0, 2, 3, 4, 1]);

        let r = scheme_p_apply_edit(&mut st, EditEvent::deletion(0, 2)).unwrap();
        assert_eq!(r.correction.unwrap().node(0), &[0, 0, 0, 4, 0]);
        assert_eq!(
            st.tensor().rows(),
            &[
                vec![1, 0, 3, 0, 4],
                vec![1, 1, 1, 1, 1],
                vec![2, 1, 4, 1, 0]
            ]
        );
        assert_eq!(order(&st), vec![0, 2, 4, 1, 3]);

        let r = scheme_p_apply_edit(&mut st, EditEvent::insertion(0, 1, 4)).unwrap();
        assert_eq!(
            st.tensor().rows(),
            &[
                vec![1, 0, 3, 4, 4],
                vec![1, 1, 1, 1, 1],
                vec![2, 1, 4, 0, 0]
            ]
        );
        assert_eq!(order(&st), vec![0, 3, 2, 4, 1]);
        assert_eq!(st.block(0), &[1, 4, 3, 4]);
        assert_eq!(st.stored_blocks()[0], vec![1, 4, 3, 4, 0]);
        assert_eq!(
            pair_bits(&r.messages, Endpoint::User(0), Endpoint::Node(2)),
            3 + 1 + 3
        );
        assert!(st.verify(64).unwrap().ok());
    }

    #[test]
    fn insertion_needs_padding() {
        let mut st = reference_state();
        assert_eq!(
            scheme_p_apply_edit(&mut st, EditEvent::insertion(1, 0, 2)),
            Err(Error::NoPadSlack { user: 1 })
        );
        assert_eq!(
            scheme_p_apply_edit(&mut st, EditEvent::deletion_of(1, 0, 3)),
            Err(Error::ValueMismatch {
                user: 1,
                reported: 3,
                stored: 1
            })
        );
    }
}
