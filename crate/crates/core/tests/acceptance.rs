//! Acceptance checks, one PASS/FAIL line each. Exits nonzero on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::Rng;

use dss_sync::analysis::{
    self, edit_ball_size, expected_cost_pv, expected_cost_t, expected_imin, run_count, EditModel,
};
use dss_sync::demo;
use dss_sync::dss::CodeSpec;
use dss_sync::gf::ceil_log2;
use dss_sync::schemes::hybrid::aggregate_cost;
use dss_sync::schemes::{
    aggregate_assignment, choose_gamma, initial_config, pair_bits, scheme_p_apply_edit,
    scheme_v_round, scheme_v_round_nonuniform, tradeoff_point, Deletion, EditEvent, Endpoint,
    SchemeKind, SyncState,
};
use dss_sync::simnet::{monte_carlo, trial_rng, MonteCarloOptions, SystemParams};
use dss_sync::vtsync::{vt_recover, vt_syndrome};
use dss_sync::{FieldSpec, LinearDssCode, PermutationCompact, Result, StructuredMatrix};

/// Pinned tolerances and sizes.
const DEMO_BUDGET: Duration = Duration::from_secs(1);
const COST_GRID_ELL: [usize; 8] = [2, 3, 4, 5, 16, 64, 100, 256];
const COST_GRID_Q: [u64; 6] = [3, 5, 7, 13, 101, 257];
const T_TRIALS: usize = 100_000;
const T_ELL: usize = 1024;
const T_TOLERANCE: f64 = 0.02;
const T_BUDGET: Duration = Duration::from_secs(60);
const IMIN_TRIALS: usize = 20_000;
const IMIN_Z: f64 = 3.0;
const HISTORIES: usize = 10_000;
const EQ_INSTANCES: usize = 10_000;
const VT_BUDGET: Duration = Duration::from_secs(60);
const BALANCE_TOL: f64 = 1e-9;
const AGGREGATE_DRAWS: usize = 100;
const AGGREGATE_TOL: f64 = 1e-9;
const DOMINANCE_LIMIT: f64 = 0.05;

type Outcome = std::result::Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn fail<T>(msg: impl Into<String>) -> std::result::Result<T, String> {
    Err(msg.into())
}

fn wrap<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn c1_worked_examples() -> Outcome {
    let mut notes = Vec::new();
    for name in ["scheme-p", "scheme-v", "scheme-h"] {
        let start = Instant::now();
        let out = demo::run_demo(name).map_err(|e| format!("{name}: {e}"))?;
        let took = start.elapsed();
        if took >= DEMO_BUDGET {
            return fail(format!("{name} took {took:?}"));
        }
        let rows = out.lines().filter(|l| l.starts_with("row ")).count();
        notes.push(format!("{name} {rows} rows in {took:.1?}"));
    }
    Ok(notes.join(", "))
}

fn c2_cost_exactness() -> Outcome {
    let mut checked = 0usize;
    for &ell in &COST_GRID_ELL {
        for &q in &COST_GRID_Q {
            let f = wrap(FieldSpec::new(q))?;
            let mut rng = trial_rng(2, (ell as u64) << 16 | q);
            let code = wrap(CodeSpec::single_parity(2, q))?;
            let blocks: Vec<Vec<u64>> = (0..2)
                .map(|_| (0..ell).map(|_| rng.random_range(0..q)).collect())
                .collect();
            let lg = ceil_log2(ell as u64) + ceil_log2(q);

            let cfg = wrap(initial_config(SchemeKind::P, f, 2, ell, 0))?;
            let mut st = wrap(SyncState::new(code.clone(), cfg, blocks.clone()))?;
            for s in 0..2 {
                let pos = rng.random_range(0..ell);
                let r = wrap(scheme_p_apply_edit(&mut st, EditEvent::deletion(s, pos)))?;
                for t in 0..3 {
                    let bits = pair_bits(&r.messages, Endpoint::User(s), Endpoint::Node(t));
                    let want = if code.connected_nodes(s).contains(&t) {
                        lg + 1
                    } else {
                        0
                    };
                    if bits != want {
                        return fail(format!(
                            "P ell={ell} q={q} user {s} node {t}: {bits} bits, expected {want}"
                        ));
                    }
                }
                checked += 1;
            }

            if ell as u64 > q {
                continue;
            }
            let cfg = wrap(initial_config(SchemeKind::V, f, 2, ell, 0))?;
            let mut st = wrap(SyncState::new(code.clone(), cfg, blocks.clone()))?;
            let edits: Vec<EditEvent> = (0..2)
                .map(|s| {
                    let p = rng.random_range(0..ell);
                    EditEvent::deletion_of(s, p, blocks[s][p])
                })
                .collect();
            let r = wrap(scheme_v_round(&mut st, &edits))?;
            for s in 0..2 {
                for t in code.connected_nodes(s) {
                    let bits = pair_bits(&r.messages, Endpoint::User(s), Endpoint::Node(t));
                    if bits != lg {
                        return fail(format!(
                            "V ell={ell} q={q} user {s} node {t}: {bits} bits, expected {lg}"
                        ));
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (scheme, ell, q, user) cases exact"))
}

fn c3_scheme_t_expectation() -> Outcome {
    let start = Instant::now();
    let params = SystemParams::new(SchemeKind::T, 3, 2, 2, T_ELL, 5);
    let model = EditModel::Uniform {
        ell: T_ELL,
        users: 2,
    };
    let s = wrap(monte_carlo(
        params,
        &model,
        T_TRIALS,
        3,
        MonteCarloOptions { verify_every: 1000 },
    ))?;
    let took = start.elapsed();
    let frac = s.span_fraction.mean;
    if s.failed > 0 || s.verify_failures > 0 {
        return fail(format!(
            "{} failed trials, {} inconsistent",
            s.failed, s.verify_failures
        ));
    }
    if (frac - 1.0 / 3.0).abs() > T_TOLERANCE {
        return fail(format!("span fraction {frac:.4}"));
    }
    if took >= T_BUDGET {
        return fail(format!("took {took:?}"));
    }
    Ok(format!(
        "E|I|/ell = {frac:.4} +- {:.4} over {T_TRIALS} trials in {took:.1?}",
        s.span_fraction.stderr
    ))
}

fn c4_order_statistics() -> Outcome {
    let grid: [EditModel<f64>; 12] = [
        EditModel::Uniform { ell: 8, users: 2 },
        EditModel::Uniform { ell: 32, users: 3 },
        EditModel::Uniform { ell: 64, users: 5 },
        EditModel::Uniform { ell: 16, users: 1 },
        EditModel::Combinatorial {
            ell: 16,
            users: 2,
            deletions: 2,
        },
        EditModel::Combinatorial {
            ell: 32,
            users: 3,
            deletions: 5,
        },
        EditModel::Combinatorial {
            ell: 8,
            users: 4,
            deletions: 8,
        },
        EditModel::Combinatorial {
            ell: 64,
            users: 2,
            deletions: 1,
        },
        EditModel::Bernoulli {
            ell: 16,
            users: 2,
            p: 0.05,
        },
        EditModel::Bernoulli {
            ell: 32,
            users: 3,
            p: 0.01,
        },
        EditModel::Bernoulli {
            ell: 8,
            users: 4,
            p: 0.2,
        },
        EditModel::Bernoulli {
            ell: 64,
            users: 2,
            p: 1.0 / 64.0,
        },
    ];
    let mut worst: f64 = 0.0;
    for (i, m) in grid.iter().enumerate() {
        let params = SystemParams::new(
            SchemeKind::T,
            m.users() + 1,
            m.users(),
            m.users(),
            m.ell(),
            5,
        );
        let s = wrap(monte_carlo(
            params,
            m,
            IMIN_TRIALS,
            40 + i as u64,
            MonteCarloOptions { verify_every: 0 },
        ))?;
        let exact = wrap(expected_imin(m))?;
        if s.failed > 0 {
            return fail(format!("{m:?}: {:?}", s.first_error));
        }
        let z = (s.i_min.mean - exact).abs() / s.i_min.stderr.max(f64::MIN_POSITIVE);
        if !s.i_min.within(exact, IMIN_Z) {
            return fail(format!(
                "{m:?}: Monte Carlo {:.4} +- {:.4}, exact {exact:.4}",
                s.i_min.mean, s.i_min.stderr
            ));
        }
        worst = worst.max(z);
    }
    Ok(format!(
        "12 grid points, largest deviation {worst:.2} standard errors"
    ))
}

fn c5_round_trips() -> Outcome {
    let mut rounds = 0usize;
    let mut subsets = 0usize;
    for h in 0..HISTORIES {
        let mut rng = trial_rng(5, h as u64);
        let q = *[5u64, 7, 13].choose(&mut rng).expect("nonempty");
        let f = wrap(FieldSpec::new(q))?;
        let k = rng.random_range(2..=4usize);
        let n = rng.random_range(k + 1..=(k + 3).min(q as usize).max(k + 1));
        let code = if n == k + 1 {
            wrap(CodeSpec::single_parity(k, q))?
        } else {
            wrap(CodeSpec::rs_systematic(n, k, q))?
        };
        let use_p = h % 2 == 0;
        let ell = if use_p {
            rng.random_range(1..=64usize)
        } else {
            rng.random_range(2..=q as usize)
        };
        let mut oracle: Vec<Vec<u64>> = (0..k)
            .map(|_| {
                let len = if use_p {
                    rng.random_range(ell / 2..=ell)
                } else {
                    ell
                };
                (0..len).map(|_| rng.random_range(0..q)).collect()
            })
            .collect();
        let scheme = if use_p { SchemeKind::P } else { SchemeKind::V };
        let cfg = wrap(initial_config(scheme, f, k, ell, 0))?;
        let mut st = wrap(SyncState::new(code, cfg, oracle.clone()))?;
        for _ in 0..rng.random_range(1..=4) {
            if use_p {
                let s = rng.random_range(0..k);
                let len = oracle[s].len();
                let insert = len == 0 || (len < ell && rng.random_bool(0.5));
                let e = if insert {
                    let pos = rng.random_range(0..=len);
                    let v = rng.random_range(0..q);
                    oracle[s].insert(pos, v);
                    EditEvent::insertion(s, pos, v)
                } else {
                    let pos = rng.random_range(0..len);
                    oracle[s].remove(pos);
                    EditEvent::deletion(s, pos)
                };
                wrap(scheme_p_apply_edit(&mut st, e))?;
            } else {
                if oracle.iter().any(|b| b.len() < 2) {
                    break;
                }
                let mut per_user = Vec::with_capacity(k);
                for b in oracle.iter_mut() {
                    let count = rng.random_range(0..=2usize.min(b.len() - 1));
                    let mut pos = rand::seq::index::sample(&mut rng, b.len(), count).into_vec();
                    pos.sort_unstable();
                    let dels: Vec<Deletion> = pos
                        .iter()
                        .map(|&p| Deletion {
                            position: p,
                            value: Some(b[p]),
                        })
                        .collect();
                    for &p in pos.iter().rev() {
                        b.remove(p);
                    }
                    per_user.push(dels);
                }
                wrap(scheme_v_round_nonuniform(&mut st, &per_user))?;
            }
            rounds += 1;
            if st.blocks() != oracle {
                return fail(format!("history {h}: blocks diverge from the oracle"));
            }
            let report = wrap(st.verify(64))?;
            if !report.ok() {
                return fail(format!("history {h}: {report:?}"));
            }
            subsets += report.subsets_checked;
        }
    }
    Ok(format!(
        "{HISTORIES} histories, {rounds} rounds, {subsets} subset reconstructions, 0 failures"
    ))
}

fn c6_equation_checks() -> Outcome {
    let mut rng = trial_rng(6, 0);
    for inst in 0..EQ_INSTANCES {
        let q = *[5u64, 7, 13, 257].choose(&mut rng).expect("nonempty");
        let f = wrap(FieldSpec::new(q))?;
        let sub = |a: &[u64], b: &[u64]| -> Vec<u64> {
            a.iter().zip(b).map(|(&x, &y)| f.sub(x, y)).collect()
        };

        // permutation: x A - x~ A~ = x_i e_j
        let ell = rng.random_range(2..=32usize);
        let mut map: Vec<usize> = (0..ell).collect();
        for i in (1..ell).rev() {
            map.swap(i, rng.random_range(0..=i));
        }
        let perm = wrap(PermutationCompact::from_map(map))?;
        let a = StructuredMatrix::permutation(f, perm.clone());
        let len = rng.random_range(1..=ell);
        let mut x: Vec<u64> = (0..len).map(|_| rng.random_range(0..q)).collect();
        x.resize(ell, 0);
        let i = rng.random_range(0..len);
        let mut xt = x.clone();
        xt.remove(i);
        xt.push(0);
        let mut moved = perm.clone();
        wrap(moved.move_row(i, ell - 1))?;
        let at = StructuredMatrix::permutation(f, moved);
        let lhs = sub(&wrap(a.vec_mat_mul(&x))?, &wrap(at.vec_mat_mul(&xt))?);
        let mut rhs = vec![0; ell];
        rhs[perm.image(i)] = x[i];
        if lhs != rhs {
            return fail(format!("permutation instance {inst}: {lhs:?} vs {rhs:?}"));
        }

        // Vandermonde: (x A)|[ell-1] - x~ A~ = x_i A_i|[ell-1]
        let ell = rng.random_range(2..=(q as usize).min(32));
        let nodes: Vec<u64> = (1..=ell as u64).map(|p| p % q).collect();
        let a = wrap(StructuredMatrix::vandermonde(f, &nodes, ell))?;
        let x: Vec<u64> = (0..ell).map(|_| rng.random_range(0..q)).collect();
        let i = rng.random_range(0..ell);
        let mut xt = x.clone();
        xt.remove(i);
        let at = wrap(wrap(a.delete_row(i))?.truncate_cols(ell - 1))?;
        let full = wrap(a.vec_mat_mul(&x))?;
        let lhs = sub(&full[..ell - 1], &wrap(at.vec_mat_mul(&xt))?);
        let rhs: Vec<u64> = a.row(i)[..ell - 1]
            .iter()
            .map(|&v| f.mul(x[i], v))
            .collect();
        if lhs != rhs {
            return fail(format!("Vandermonde instance {inst}: {lhs:?} vs {rhs:?}"));
        }
    }
    Ok(format!(
        "{EQ_INSTANCES} instances of each identity hold entrywise"
    ))
}

fn c7_vt_recovery() -> Outcome {
    let start = Instant::now();
    let f = wrap(FieldSpec::new(3))?;
    let mut cases = 0usize;
    for ell in 1..=6u32 {
        for code in 0..3u64.pow(ell) {
            let mut c = code;
            let x: Vec<u64> = (0..ell)
                .map(|_| {
                    let v = c % 3;
                    c /= 3;
                    v
                })
                .collect();
            let syn = wrap(vt_syndrome(f, &x))?;
            for i in 0..x.len() {
                let mut y = x.clone();
                y.remove(i);
                match vt_recover(f, &y, syn) {
                    Ok(r) if r.recovered == x => cases += 1,
                    Ok(r) => return fail(format!("{x:?} minus {i}: recovered {:?}", r.recovered)),
                    Err(e) => return fail(format!("{x:?} minus {i}: {e}")),
                }
            }
        }
    }
    let took = start.elapsed();
    if took >= VT_BUDGET {
        return fail(format!("took {took:?}"));
    }
    Ok(format!("{cases} single deletions recovered in {took:.1?}"))
}

fn c8_levenshtein() -> Outcome {
    let mut strings = 0usize;
    for q in 2..=3u64 {
        for ell in 1..=10u32 {
            for d in 0..=2usize {
                let floor =
                    analysis::binomial::<f64>((ell as u64).saturating_sub(d as u64), d as u64);
                let mut best = 0u128;
                for code in 0..q.pow(ell) {
                    let mut c = code;
                    let x: Vec<u64> = (0..ell)
                        .map(|_| {
                            let v = c % q;
                            c /= q;
                            v
                        })
                        .collect();
                    let size = wrap(edit_ball_size(&x, d))?;
                    // every string reaches at least C(r - d + 1, d) strings
                    let runs = run_count(&x) as u64;
                    let per_x =
                        analysis::binomial::<f64>((runs + 1).saturating_sub(d as u64), d as u64);
                    if (size as f64) < per_x {
                        return fail(format!("{x:?}, d={d}: {size} < run bound {per_x}"));
                    }
                    best = best.max(size);
                    strings += 1;
                }
                if (best as f64) < floor {
                    return fail(format!("q={q} ell={ell} d={d}: max ball {best} < {floor}"));
                }
            }
        }
    }
    Ok(format!("{strings} (string, d) pairs, zero violations"))
}

fn c9_hybrid_tuning() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for ell in [8usize, 16, 64, 256, 1024] {
        for q in [2u64, 3, 5, 13, 257] {
            let budget = (ell as f64).log2();
            let g = wrap(choose_gamma(ell, q, budget))?;
            if g.balance > g.cap {
                continue;
            }
            let (l, lq) = (ell as f64, (q as f64).log2());
            let r = ((g.gamma * l).log2() + lq - (1.0 - g.gamma) * l * lq).abs();
            if r > BALANCE_TOL {
                return fail(format!("ell={ell} q={q}: residual {r:e}"));
            }
            worst = worst.max(r);
            points += 1;
        }
    }
    let mut rng = trial_rng(9, 0);
    for draw in 0..AGGREGATE_DRAWS {
        let b = rng.random_range(1..=4usize);
        let ell = rng.random_range(2..=64usize);
        let q = *[2u64, 3, 5, 7, 13].choose(&mut rng).expect("nonempty");
        let weights: Vec<f64> = (0..b).map(|_| rng.random::<f64>()).collect();
        let total: f64 = weights.iter().sum::<f64>() / rng.random_range(0.05..1.0);
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let threshold = (ell as f64 - 1.0) * (q as f64).log2() / (ell as f64).log2();
        let theta = rng.random_range(0.0..2.0 * threshold);
        let (_, cost) = aggregate_assignment(ell, q, theta, &probs);
        let best = (0u32..1 << b)
            .map(|mask| {
                let p: f64 = (0..b)
                    .filter(|&s| mask >> s & 1 == 1)
                    .map(|s| probs[s])
                    .sum();
                aggregate_cost(ell, q, theta, p)
            })
            .fold(f64::INFINITY, f64::min);
        if (cost - best).abs() > AGGREGATE_TOL {
            return fail(format!("draw {draw}: assignment {cost}, exhaustive {best}"));
        }
    }
    Ok(format!(
        "{points} balanced budgets, max residual {worst:.1e}; {AGGREGATE_DRAWS} assignments optimal"
    ))
}

fn c10_dominance() -> Outcome {
    let (b, q) = (4usize, 5u64);
    let mut notes = Vec::new();
    for kind in ["UD", "CND", "PND"] {
        let mut prev = f64::INFINITY;
        let mut last = 0.0;
        for e in 6..=14 {
            let ell = 1usize << e;
            let m = match kind {
                "UD" => EditModel::Uniform { ell, users: b },
                "CND" => EditModel::Combinatorial {
                    ell,
                    users: b,
                    deletions: b,
                },
                _ => EditModel::Bernoulli {
                    ell,
                    users: b,
                    p: 1.0 / ell as f64,
                },
            };
            let ratio = wrap(expected_cost_pv(&m, q))?.bits / wrap(expected_cost_t(&m, q))?.bits;
            if ratio >= prev {
                return fail(format!("{kind}: ratio rises to {ratio} at ell = 2^{e}"));
            }
            prev = ratio;
            last = ratio;
        }
        if last >= DOMINANCE_LIMIT {
            return fail(format!("{kind}: ratio {last} at ell = 2^14"));
        }
        notes.push(format!("{kind} {last:.2e}"));
    }
    Ok(format!("decreasing; at 2^14: {}", notes.join(", ")))
}

fn tradeoff_ordering() -> Outcome {
    let mut rows = 0;
    for (ell, q) in [(64usize, 5u64), (256, 13), (1024, 2)] {
        let top = (ell as f64).log2();
        for i in 1..=100 {
            let budget = top * f64::from(i) / 100.0;
            let t = wrap(tradeoff_point(ell, q, budget))?;
            if !(t.lower_bound_bits <= t.hybrid_bits && t.hybrid_bits <= t.scheme_t_bits + 1e-9) {
                return fail(format!("ell={ell} q={q} budget={budget}: {t:?}"));
            }
            rows += 1;
        }
    }
    Ok(format!(
        "lower bound <= hybrid <= T worst case on {rows} budgets"
    ))
}

fn main() -> ExitCode {
    let checks: [Check; 11] = [
        ("1 worked examples", c1_worked_examples),
        ("2 protocol cost exactness", c2_cost_exactness),
        ("3 scheme T expectation", c3_scheme_t_expectation),
        ("4 order statistics", c4_order_statistics),
        ("5 round-trip suite", c5_round_trips),
        ("6 equation checks", c6_equation_checks),
        ("7 VT recovery", c7_vt_recovery),
        ("8 Levenshtein bound", c8_levenshtein),
        ("9 hybrid tuning", c9_hybrid_tuning),
        ("10 asymptotic dominance", c10_dominance),
        ("tradeoff ordering", tradeoff_ordering),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS [{name}] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{name}] {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance checks failed");
        ExitCode::FAILURE
    }
}
