//! Hybrid updates and the tuning of the split between its two halves.
//!
//! Each matrix is `diag(V, I)` with a Vandermonde head of width
//! `ell - ell_star` and an identity tail of width `ell_star`. A deletion in
//! the head is handled like a Vandermonde update (position plus value); a
//! deletion in the tail re-sends the tail difference, `ell_star` symbols.
//! The tensor width never changes, and the user only has to remember which
//! head rows are gone, so the head width trades storage for communication.

use super::{EditEvent, EditKind, Endpoint, RoundReport, SyncMessage, SyncState};
use crate::analysis::{lambert_w_exp, lev_lower_bound, LevMode};
use crate::dss::{self, LinearDssCode};
use crate::error::{Error, Result};
use crate::matlib::MatrixKind;

/// Applies one deletion under the hybrid configuration.
pub fn scheme_h_apply_edit(state: &mut SyncState, edit: EditEvent) -> Result<RoundReport> {
    let s = edit.user;
    state.check_user(s)?;
    if edit.kind != EditKind::Deletion {
        return Err(Error::InvalidParameter(
            "hybrid updates handle deletions only".into(),
        ));
    }
    let (head_rows, head_cols, tail) = match state.config.matrix(s).kind() {
        MatrixKind::BlockDiag { top, bottom } if *bottom.kind() == MatrixKind::Identity => {
            (top.rows(), top.cols(), bottom.rows())
        }
        _ => {
            return Err(Error::ConfigMismatch(format!(
                "matrix of user {s} is not a Vandermonde/identity block diagonal"
            )))
        }
    };
    let field = state.field();
    let len = state.lengths[s];
    let i = edit.position;
    if i >= len {
        return Err(Error::IndexOutOfRange { index: i, len });
    }
    let stored = state.blocks[s][i];
    if let Some(v) = edit.value {
        if field.reduce(v) != stored {
            return Err(Error::ValueMismatch {
                user: s,
                reported: v,
                stored,
            });
        }
    }

    let nodes = state.code.connected_nodes(s);
    let mut messages = Vec::new();
    let (diff, matrix, block) = if i < head_rows {
        let a = state.config.matrix(s);
        let diff: Vec<u64> = a.row(i).into_iter().map(|r| field.mul(stored, r)).collect();
        let mut block = state.blocks[s].clone();
        block.remove(i);
        for &t in &nodes {
            let (u, n) = (Endpoint::User(s), Endpoint::Node(t));
            messages.push(SyncMessage::position(u, n, head_cols));
            messages.push(SyncMessage::value(u, n, field));
        }
        (diff, a.delete_row(i)?, block)
    } else {
        let old_tail = &state.blocks[s][head_rows..];
        let mut new_tail = old_tail.to_vec();
        new_tail.remove(i - head_rows);
        new_tail.push(0);
        let mut diff = vec![0; head_cols];
        diff.extend(
            old_tail
                .iter()
                .zip(&new_tail)
                .map(|(&a, &b)| field.sub(a, b)),
        );
        let mut block = state.blocks[s][..head_rows].to_vec();
        block.extend(new_tail);
        for &t in &nodes {
            messages.push(SyncMessage::span(
                Endpoint::User(s),
                Endpoint::Node(t),
                tail,
                field,
            ));
        }
        (diff, state.config.matrix(s).clone(), block)
    };

    let correction = dss::encode_user(&state.code, s, &diff)?;
    let config = state.config.with_matrix(s, matrix)?;
    state.tensor.sub_on(field, &correction, &nodes)?;
    state.blocks[s] = block;
    state.lengths[s] = len - 1;
    state.config = config;
    Ok(state.finish(messages, Some(correction), None))
}

/// Head fraction chosen for a storage budget, with the closed forms it is
/// compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaChoice {
    /// `min(balance, cap)`.
    pub gamma: f64,
    /// Root of `log(g*ell) + log q = (1 - g) * ell * log q`, by bisection.
    pub balance: f64,
    /// Largest fraction the budget allows, `2^budget / ell`.
    pub cap: f64,
    /// `min(W(q^(ell-1) ln q) / (ell ln q), cap)`.
    pub lambert: f64,
    /// Same with `q^(ell+1)` inside `W`.
    pub lambert_shifted: f64,
    /// Worst-case bits per edit at `gamma`.
    pub worst_case_bits: f64,
    /// Bits of edit history kept per user at `gamma`.
    pub storage_bits: f64,
}

/// Worst-case bits per edit of the hybrid scheme with head fraction `gamma`.
pub fn hybrid_worst_case(ell: usize, q: u64, gamma: f64) -> f64 {
    let (l, lq) = (ell as f64, (q as f64).log2());
    ((gamma * l).log2() + lq).max((1.0 - gamma) * l * lq)
}

/// Picks the head fraction minimizing the worst-case cost subject to
/// `log2(gamma * ell) <= budget`.
pub fn choose_gamma(ell: usize, q: u64, budget: f64) -> Result<GammaChoice> {
    if budget.is_nan() || budget <= 0.0 {
        return Err(Error::InfeasibleBudget);
    }
    if ell < 2 || q < 2 {
        return Err(Error::InvalidParameter(format!(
            "need ell >= 2 and q >= 2, got ell = {ell}, q = {q}"
        )));
    }
    let (l, lq) = (ell as f64, (q as f64).log2());
    let residual = |g: f64| (g * l).log2() + lq - (1.0 - g) * l * lq;
    // residual is increasing, negative near 0 and positive at 1
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, 1.0);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let balance = if residual(lo).abs() < residual(hi).abs() {
        lo
    } else {
        hi
    };
    let cap = budget.exp2() / l;
    let ln_q = (q as f64).ln();
    let lambert_at = |power: f64| -> Result<f64> {
        let w = lambert_w_exp(power * ln_q + ln_q.ln())?;
        Ok((w / (l * ln_q)).min(cap))
    };
    let gamma = balance.min(cap);
    Ok(GammaChoice {
        gamma,
        balance,
        cap,
        lambert: lambert_at(l - 1.0)?,
        lambert_shifted: lambert_at(l + 1.0)?,
        worst_case_bits: hybrid_worst_case(ell, q, gamma),
        storage_bits: (gamma * l).log2().max(0.0),
    })
}

/// One budget of the storage/communication tradeoff, with the fixed
/// schemes and the single-deletion lower bound alongside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    pub budget: f64,
    pub gamma: f64,
    pub hybrid_bits: f64,
    pub hybrid_storage_bits: f64,
    /// `log ell + log q + 1`, storing `log ell`.
    pub scheme_p_bits: f64,
    /// `log ell + log q`, storing `log ell`.
    pub scheme_v_bits: f64,
    pub scheme_v_storage_bits: f64,
    /// `(ell - 1) log q` worst case, storing nothing.
    pub scheme_t_bits: f64,
    pub lower_bound_bits: f64,
}

pub fn tradeoff_point(ell: usize, q: u64, budget: f64) -> Result<TradeoffPoint> {
    let g = choose_gamma(ell, q, budget)?;
    let (ll, lq) = ((ell as f64).log2(), (q as f64).log2());
    Ok(TradeoffPoint {
        budget,
        gamma: g.gamma,
        hybrid_bits: g.worst_case_bits,
        hybrid_storage_bits: g.storage_bits,
        scheme_p_bits: ll + lq + 1.0,
        scheme_v_bits: ll + lq,
        scheme_v_storage_bits: ll,
        scheme_t_bits: (ell as f64 - 1.0) * lq,
        lower_bound_bits: lev_lower_bound(ell, 1, q, LevMode::Deletions)?,
    })
}

/// Expected aggregate cost when the users in the assigned set (total edit
/// probability `p`) use Vandermonde updates and the rest span updates, with
/// `theta` weighting the storage of edit positions.
pub fn aggregate_cost(ell: usize, q: u64, theta: f64, p: f64) -> f64 {
    let (l, lq, ll) = (ell as f64, (q as f64).log2(), (ell as f64).log2());
    ll + p * lq + (1.0 - p) * l * lq + theta * p * ll
}

/// All users take Vandermonde updates iff `theta <= (ell - 1) log q / log ell`,
/// otherwise none do. Returns the chosen users and their aggregate cost.
pub fn aggregate_assignment(ell: usize, q: u64, theta: f64, probs: &[f64]) -> (Vec<usize>, f64) {
    let threshold = (ell as f64 - 1.0) * (q as f64).log2() / (ell as f64).log2();
    let chosen: Vec<usize> = if theta <= threshold {
        (0..probs.len()).collect()
    } else {
        Vec::new()
    };
    let p: f64 = chosen.iter().map(|&s| probs[s]).sum();
    (chosen, aggregate_cost(ell, q, theta, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dss::CodeSpec;
    use crate::schemes::{initial_config, pair_bits, SchemeKind};

    fn reference_state() -> SyncState {
        let code = CodeSpec::single_parity(2, 5).unwrap();
        let cfg = initial_config(SchemeKind::H, code.field(), 2, 7, 3).unwrap();
        SyncState::new(
            code,
            cfg,
            vec![vec![1, 1, 1, 1, 1, 1, 1], vec![1, 2, 3, 4, 3, 2, 1]],
        )
        .unwrap()
    }

    #[test]
    fn reference_edit_sequence() {
        let mut st = reference_state();
        let r = scheme_h_apply_edit(&mut st, EditEvent::deletion(0, 2)).unwrap();
        assert_eq!(
            r.correction.unwrap().rows(),
            &[
                vec![1, 3, 4, 2, 0, 0, 0],
                vec![0; 7],
                vec![1, 3, 4, 2, 0, 0, 0]
            ]
        );
        assert_eq!(st.tensor().node(0), &[3, 2, 1, 3, 1, 1, 1]);
        assert_eq!(
            pair_bits(&r.messages, Endpoint::User(0), Endpoint::Node(0)),
            2 + 3
        );

        let r = scheme_h_apply_edit(&mut st, EditEvent::deletion(1, 4)).unwrap();
        assert_eq!(r.correction.unwrap().node(1), &[0, 0, 0, 0, 1, 1, 1]);
        assert_eq!(st.tensor().node(1), &[0, 0, 0, 4, 2, 1, 0]);
        assert_eq!(
            pair_bits(&r.messages, Endpoint::User(1), Endpoint::Node(1)),
            3 * 3
        );

        scheme_h_apply_edit(&mut st, EditEvent::deletion(1, 0)).unwrap();
        assert_eq!(
            st.tensor().rows(),
            &[
                vec![3, 2, 1, 3, 1, 1, 1],
                vec![4, 4, 4, 3, 2, 1, 0],
                vec![2, 1, 0, 1, 3, 2, 1]
            ]
        );
        assert_eq!(st.block(0), &[1, 1, 1, 1, 1, 1]);
        assert_eq!(st.block(1), &[2, 3, 4, 2, 1]);
        assert_eq!(st.stored_blocks()[1], vec![2, 3, 4, 2, 1, 0]);
        assert!(st.verify(64).unwrap().ok());
    }

    #[test]
    fn out_of_range_deletion() {
        let mut st = reference_state();
        assert_eq!(
            scheme_h_apply_edit(&mut st, EditEvent::deletion(0, 7)),
            Err(Error::IndexOutOfRange { index: 7, len: 7 })
        );
    }

    #[test]
    fn gamma_balance_and_cap() {
        let g = choose_gamma(64, 5, 6.0).unwrap();
        let (l, lq) = (64.0f64, 5f64.log2());
        let residual = (g.balance * l).log2() + lq - (1.0 - g.balance) * l * lq;
        assert!(residual.abs() <= 1e-9, "residual {residual}");
        assert!((g.lambert - g.balance).abs() < 1e-9);
        assert!(g.lambert_shifted > g.lambert);

        let tiny = choose_gamma(64, 5, 0.5).unwrap();
        assert_eq!(tiny.gamma, 0.5f64.exp2() / 64.0);

        let mid = choose_gamma(8, 5, 2.0).unwrap();
        assert_eq!(mid.cap, 0.5);
        assert_eq!(mid.gamma, mid.balance.min(0.5));
        assert_eq!(choose_gamma(8, 5, 0.0), Err(Error::InfeasibleBudget));
    }

    #[test]
    fn tradeoff_ordering() {
        let (ell, q) = (64, 5);
        for i in 1..=60 {
            let t = tradeoff_point(ell, q, f64::from(i) * 0.1).unwrap();
            assert!(t.lower_bound_bits <= t.hybrid_bits);
            assert!(t.hybrid_bits <= t.scheme_t_bits + 1e-9);
        }
        let near_zero = tradeoff_point(ell, q, 1e-9).unwrap();
        assert!((near_zero.hybrid_bits - near_zero.scheme_t_bits).abs() < 1e-6);
        let full = tradeoff_point(ell, q, 6.0).unwrap();
        assert!(full.hybrid_bits <= full.scheme_v_bits);
        assert_eq!(full.scheme_v_storage_bits, 6.0);
    }

    #[test]
    fn aggregate_threshold() {
        // log q = log ell at ell = q = 5, so the threshold is ell - 1 = 4
        let (v, _) = aggregate_assignment(5, 5, 3.0, &[0.1, 0.2]);
        assert_eq!(v, vec![0, 1]);
        let (v, c) = aggregate_assignment(5, 5, 5.0, &[0.1, 0.2]);
        assert!(v.is_empty());
        assert_eq!(c, aggregate_cost(5, 5, 5.0, 0.0));
    }
}
