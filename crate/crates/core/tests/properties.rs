use proptest::prelude::*;

use dss_sync::analysis::{edit_ball_size, expected_imin, expected_span, lambert_w, run_count};
use dss_sync::dss::{self, CodeSpec};
use dss_sync::schemes::{
    dedup_round, find_pattern, initial_config, scheme_c_round, scheme_h_apply_edit,
    scheme_p_apply_edit, scheme_t_apply, scheme_t_apply_suffix, scheme_t_round, scheme_v_round,
    Deletion, EditEvent, SchemeKind, SyncState,
};
use dss_sync::vtsync::{vt_recover, vt_syndrome};
use dss_sync::{EditModel, FieldSpec, PermutationCompact, StructuredMatrix};

const PRIMES: [u64; 6] = [2, 3, 5, 7, 13, 257];

fn field() -> impl Strategy<Value = FieldSpec> {
    prop::sample::select(PRIMES.to_vec()).prop_map(|q| FieldSpec::new(q).unwrap())
}

fn state(
    scheme: SchemeKind,
    q: u64,
    k: usize,
    blocks: Vec<Vec<u64>>,
    ell_star: usize,
) -> SyncState {
    let f = FieldSpec::new(q).unwrap();
    let ell = blocks.iter().map(Vec::len).max().unwrap();
    let code = if k + 2 <= q as usize {
        CodeSpec::rs_systematic(k + 2, k, q).unwrap()
    } else {
        CodeSpec::single_parity(k, q).unwrap()
    };
    let cfg = initial_config(scheme, f, k, ell, ell_star).unwrap();
    SyncState::new(code, cfg, blocks).unwrap()
}

fn assert_consistent(st: &SyncState, oracle: &[Vec<u64>]) {
    assert_eq!(st.blocks(), oracle);
    let report = st.verify(64).unwrap();
    assert!(report.ok(), "{report:?}");
}

proptest! {
    #[test]
    fn field_axioms(f in field(), a in 0u64..1000, b in 0u64..1000, c in 0u64..1000) {
        let (a, b, c) = (f.reduce(a), f.reduce(b), f.reduce(c));
        prop_assert_eq!(f.add(a, b), f.add(b, a));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.sub(f.add(a, b), b), a);
        prop_assert_eq!(f.add(a, f.neg(a)), 0);
        if a != 0 {
            prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        } else {
            prop_assert!(f.inv(a).is_err());
        }
    }

    #[test]
    fn structured_product_matches_general(f in field(), len in 1usize..12, seed in any::<u64>()) {
        let len = len.min(f.q() as usize);
        let nodes: Vec<u64> = (1..=len as u64).map(|p| p % f.q()).collect();
        let v = StructuredMatrix::vandermonde(f, &nodes, len).unwrap();
        let x: Vec<u64> = (0..len as u64).map(|i| f.reduce(seed.rotate_left(i as u32 * 7) ^ i)).collect();
        prop_assert_eq!(v.vec_mat_mul(&x).unwrap(), v.to_general().vec_mat_mul(&x).unwrap());
        let inv = v.inverse().unwrap();
        prop_assert!(v.mat_mul(&inv).unwrap().is_identity());
    }

    #[test]
    fn permutation_inverse(map in Just((0..16usize).collect::<Vec<_>>()).prop_shuffle()) {
        let p = PermutationCompact::from_map(map).unwrap();
        let inv = p.inverse();
        for i in 0..p.len() {
            prop_assert_eq!(inv.image(p.image(i)), i);
        }
    }

    #[test]
    fn mds_reconstructs_from_any_k(
        blocks in prop::collection::vec(prop::collection::vec(0u64..7, 4), 3),
    ) {
        let code = CodeSpec::rs_systematic(6, 3, 7).unwrap();
        let tensor = dss::encode_block(&code, &blocks).unwrap();
        for subset in dss::k_subsets(6, 3) {
            let slices = tensor.restrict(&subset);
            prop_assert_eq!(&dss::reconstruct_block(&code, &subset, &slices).unwrap(), &blocks);
        }
    }

    #[test]
    fn scheme_p_histories(
        blocks in prop::collection::vec(prop::collection::vec(0u64..13, 1..20), 2..4),
        ops in prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>(), 0u64..13, any::<bool>()), 1..8),
    ) {
        let k = blocks.len();
        let ell = blocks.iter().map(Vec::len).max().unwrap();
        let mut oracle = blocks.clone();
        let mut st = state(SchemeKind::P, 13, k, blocks, 0);
        for (u, p, v, insert) in ops {
            let s = u.index(k);
            let len = oracle[s].len();
            let e = if insert && len < ell || len == 0 {
                if len == ell { continue; }
                let pos = p.index(len + 1);
                oracle[s].insert(pos, v);
                EditEvent::insertion(s, pos, v)
            } else {
                let pos = p.index(len);
                oracle[s].remove(pos);
                EditEvent::deletion(s, pos)
            };
            scheme_p_apply_edit(&mut st, e).unwrap();
            assert_consistent(&st, &oracle);
        }
    }

    #[test]
    fn one_deletion_rounds(
        scheme in prop::sample::select(vec![SchemeKind::T, SchemeKind::V, SchemeKind::C]),
        ell in 2usize..7,
        k in 2usize..4,
        seed in any::<u64>(),
        rounds in 1usize..4,
    ) {
        let q = 13;
        let mut x = seed;
        let mut next = |m: u64| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 33) % m
        };
        let mut oracle: Vec<Vec<u64>> = (0..k).map(|_| (0..ell).map(|_| next(q)).collect()).collect();
        let mut st = state(scheme, q, k, oracle.clone(), 0);
        for _ in 0..rounds.min(ell - 1) {
            let edits: Vec<EditEvent> = oracle
                .iter_mut()
                .enumerate()
                .map(|(s, b)| {
                    let pos = next(b.len() as u64) as usize;
                    let v = b.remove(pos);
                    EditEvent::deletion_of(s, pos, v)
                })
                .collect();
            match scheme {
                SchemeKind::T => scheme_t_round(&mut st, &edits),
                SchemeKind::V => scheme_v_round(&mut st, &edits),
                _ => scheme_c_round(&mut st, &edits),
            }
            .unwrap();
            assert_consistent(&st, &oracle);
        }
    }

    #[test]
    fn scheme_t_multi_deletion(
        blocks in prop::collection::vec(prop::collection::vec(0u64..13, 12), 2..4),
        masks in prop::collection::vec(prop::collection::vec(any::<bool>(), 12), 3),
        suffix in any::<bool>(),
    ) {
        let k = blocks.len();
        let mut st = state(SchemeKind::T, 13, k, blocks.clone(), 0);
        let per_user: Vec<Vec<Deletion>> = (0..k)
            .map(|s| {
                (0..12)
                    .filter(|&i| masks[s][i] && i % 3 == 0)
                    .map(|position| Deletion { position, value: Some(blocks[s][position]) })
                    .collect()
            })
            .collect();
        let oracle: Vec<Vec<u64>> = (0..k)
            .map(|s| {
                let gone: Vec<usize> = per_user[s].iter().map(|d| d.position).collect();
                (0..12).filter(|i| !gone.contains(i)).map(|i| blocks[s][i]).collect()
            })
            .collect();
        let r = if suffix {
            scheme_t_apply_suffix(&mut st, &per_user)
        } else {
            scheme_t_apply(&mut st, &per_user)
        }
        .unwrap();
        assert_consistent(&st, &oracle);
        if let (true, Some((lo, hi))) = (suffix, r.span) {
            let width = oracle.iter().map(Vec::len).max().unwrap();
            prop_assert_eq!(hi, width);
            prop_assert_eq!(Some(lo), per_user.iter().flatten().map(|d| d.position).min());
        }
    }

    #[test]
    fn scheme_h_histories(
        blocks in prop::collection::vec(prop::collection::vec(0u64..13, 10), 2..4),
        ell_star in 0usize..10,
        picks in prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), 1..6),
    ) {
        let k = blocks.len();
        let mut oracle = blocks.clone();
        let mut st = state(SchemeKind::H, 13, k, blocks, ell_star);
        for (u, p) in picks {
            let s = u.index(k);
            if oracle[s].is_empty() { continue; }
            let pos = p.index(oracle[s].len());
            oracle[s].remove(pos);
            scheme_h_apply_edit(&mut st, EditEvent::deletion(s, pos)).unwrap();
            assert_consistent(&st, &oracle);
        }
    }

    #[test]
    fn dedup_matches_oracle(
        blocks in prop::collection::vec(prop::collection::vec(0u64..3, 8), 3),
        pattern in prop::collection::vec(0u64..3, 1..3),
    ) {
        let mut st = state(SchemeKind::V, 11, 3, blocks.clone(), 0);
        dedup_round(&mut st, &pattern).unwrap();
        let expected: Vec<Vec<u64>> = blocks
            .iter()
            .map(|b| match find_pattern(b, &pattern) {
                Some(at) => [&b[..at], &b[at + pattern.len()..]].concat(),
                None => b.clone(),
            })
            .collect();
        prop_assert_eq!(st.blocks(), expected);
        prop_assert!(st.verify(64).unwrap().ok());
    }

    #[test]
    fn vt_recovers_any_single_deletion(
        q in prop::sample::select(vec![3u64, 5, 7]),
        x in prop::collection::vec(0u64..7, 1..24),
        at in any::<prop::sample::Index>(),
    ) {
        let f = FieldSpec::new(q).unwrap();
        let x: Vec<u64> = x.into_iter().map(|v| f.reduce(v)).collect();
        let syn = vt_syndrome(f, &x).unwrap();
        let mut y = x.clone();
        y.remove(at.index(x.len()));
        prop_assert_eq!(vt_recover(f, &y, syn).unwrap().recovered, x);
    }

    #[test]
    fn ball_lower_bound_by_runs(x in prop::collection::vec(0u64..3, 1..10), d in 0usize..3) {
        let size = edit_ball_size(&x, d).unwrap();
        let r = run_count(&x);
        prop_assert!(size >= 1);
        if d <= r {
            let floor = dss_sync::analysis::binomial::<f64>((r + 1 - d.min(r + 1)) as u64, d as u64);
            prop_assert!(size as f64 >= floor);
        }
    }

    #[test]
    fn lambert_w_inverts(x in 0.0f64..1e6) {
        let w = lambert_w(x).unwrap();
        prop_assert!((w * w.exp() - x).abs() <= 1e-9 * x.max(1.0));
    }
}

/// Exact expectations by enumerating every deletion pattern.
#[test]
fn expected_imin_matches_enumeration() {
    for ell in 1..=6usize {
        for users in 1..=3usize {
            let total = ell.pow(users as u32);
            let (mut imin, mut span) = (0.0, 0.0);
            for code in 0..total {
                let mut c = code;
                let pos: Vec<usize> = (0..users)
                    .map(|_| {
                        let p = c % ell + 1;
                        c /= ell;
                        p
                    })
                    .collect();
                let (lo, hi) = (*pos.iter().min().unwrap(), *pos.iter().max().unwrap());
                imin += lo as f64;
                span += (hi - lo) as f64;
            }
            let m = EditModel::Uniform { ell, users };
            let n = total as f64;
            assert!((expected_imin(&m).unwrap() - imin / n).abs() < 1e-12);
            // E[i_max - i_min]
            assert!((expected_span(&m).unwrap() - span / n).abs() < 1e-12);
        }
    }
}

#[test]
fn combinatorial_imin_matches_enumeration() {
    let (ell, users) = (4usize, 2usize);
    for deletions in 0..=ell * users {
        let subsets = dss::k_subsets(ell * users, deletions);
        let sum: f64 = subsets
            .iter()
            .map(|s| s.iter().map(|&c| c % ell + 1).min().unwrap_or(ell) as f64)
            .sum();
        let m = EditModel::Combinatorial {
            ell,
            users,
            deletions,
        };
        let exact = expected_imin(&m).unwrap();
        assert!(
            (exact - sum / subsets.len() as f64).abs() < 1e-12,
            "D = {deletions}: {exact}"
        );
    }
}
