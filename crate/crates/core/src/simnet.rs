//! Seeded simulation of users, nodes and protocol rounds.
//!
//! Every trial draws its blocks and edits from a ChaCha8 stream selected by
//! the trial index, so results do not depend on how trials are scheduled
//! across threads. Summaries are folded in trial order.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::statistics::Statistics;

use crate::analysis::{self, EditModel};
use crate::dss::{CodeSpec, LinearDssCode};
use crate::error::{Error, Result};
use crate::gf::ceil_log2;
use crate::schemes::{
    self, initial_config, Deletion, EditEvent, EditKind, Endpoint, MessageKind, RoundReport,
    SchemeKind, SyncState,
};

/// Shape of a simulated system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemParams {
    pub scheme: SchemeKind,
    pub n: usize,
    pub k: usize,
    /// Number of users, equal to `k` for the codes used here.
    pub users: usize,
    pub ell: usize,
    pub q: u64,
    /// Identity tail length for scheme H.
    pub ell_star: usize,
    /// Scheme T re-sends the whole suffix from the first deletion.
    pub suffix_spans: bool,
}

impl SystemParams {
    pub fn new(scheme: SchemeKind, n: usize, k: usize, users: usize, ell: usize, q: u64) -> Self {
        Self {
            scheme,
            n,
            k,
            users,
            ell,
            q,
            ell_star: 0,
            suffix_spans: false,
        }
    }

    pub fn with_ell_star(self, ell_star: usize) -> Self {
        Self { ell_star, ..self }
    }

    pub fn with_suffix_spans(self, suffix_spans: bool) -> Self {
        Self {
            suffix_spans,
            ..self
        }
    }

    /// `[k+1, k]` single parity when `n = k + 1`, systematic Reed-Solomon
    /// otherwise.
    pub fn code(&self) -> Result<CodeSpec> {
        if self.users != self.k {
            return Err(Error::InvalidParameter(format!(
                "B = {} users need k = {} message symbols",
                self.users, self.k
            )));
        }
        if self.n <= self.k {
            return Err(Error::InvalidParameter(format!(
                "need n > k, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        if self.n == self.k + 1 {
            CodeSpec::single_parity(self.k, self.q)
        } else {
            CodeSpec::rs_systematic(self.n, self.k, self.q)
        }
    }
}

/// A system under simulation, with the generator that drives it.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub params: SystemParams,
    pub sync: SyncState,
    pub rng_seed: u64,
    pub rng: ChaCha8Rng,
}

impl SystemState {
    pub fn round(&self) -> u64 {
        self.sync.ledger().round()
    }

    /// Draws a round of edits from the current blocks.
    pub fn sample_edits(&mut self, model: &EditModel<f64>) -> Result<Vec<EditEvent>> {
        let blocks = self.sync.blocks();
        sample_edits(model, &blocks, &mut self.rng)
    }
}

/// Generator for stream `stream` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Builds a system whose blocks are uniform random symbols drawn from
/// stream `stream` of `seed`; the same stream then drives its edits.
pub fn build_system(params: SystemParams, seed: u64, stream: u64) -> Result<SystemState> {
    let mut rng = trial_rng(seed, stream);
    let blocks: Vec<Vec<u64>> = (0..params.users)
        .map(|_| {
            (0..params.ell)
                .map(|_| rng.random_range(0..params.q))
                .collect()
        })
        .collect();
    let mut sys = build_system_with_blocks(params, blocks)?;
    sys.rng_seed = seed;
    sys.rng = rng;
    Ok(sys)
}

/// Builds a system around given blocks, with a generator seeded by 0.
pub fn build_system_with_blocks(
    params: SystemParams,
    blocks: Vec<Vec<u64>>,
) -> Result<SystemState> {
    let code = params.code()?;
    let config = initial_config(
        params.scheme,
        code.field(),
        params.users,
        params.ell,
        params.ell_star,
    )?;
    Ok(SystemState {
        params,
        sync: SyncState::new(code, config, blocks)?,
        rng_seed: 0,
        rng: trial_rng(0, 0),
    })
}

/// Draws deletions (with their values) from the current blocks.
pub fn sample_edits(
    model: &EditModel<f64>,
    blocks: &[Vec<u64>],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<EditEvent>> {
    model.validate()?;
    let mut edits = Vec::new();
    let del = |s: usize, i: usize| EditEvent::deletion_of(s, i, blocks[s][i]);
    match *model {
        EditModel::Uniform { .. } => {
            for (s, b) in blocks.iter().enumerate() {
                if !b.is_empty() {
                    edits.push(del(s, rng.random_range(0..b.len())));
                }
            }
        }
        EditModel::Combinatorial { deletions, .. } => {
            let total: usize = blocks.iter().map(Vec::len).sum();
            if deletions > total {
                return Err(Error::InvalidParameter(format!(
                    "{deletions} deletions exceed the {total} stored symbols"
                )));
            }
            let mut picked = sample(rng, total, deletions).into_vec();
            picked.sort_unstable();
            let mut offset = 0;
            let mut it = picked.into_iter().peekable();
            for (s, b) in blocks.iter().enumerate() {
                while let Some(&c) = it.peek() {
                    if c >= offset + b.len() {
                        break;
                    }
                    edits.push(del(s, c - offset));
                    it.next();
                }
                offset += b.len();
            }
        }
        EditModel::Bernoulli { p, .. } => {
            for (s, b) in blocks.iter().enumerate() {
                for i in 0..b.len() {
                    if rng.random_bool(p) {
                        edits.push(del(s, i));
                    }
                }
            }
        }
    }
    Ok(edits)
}

/// Costs and checks of one simulated round.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub scheme: SchemeKind,
    pub deletions: usize,
    /// Smallest deleted position, 1-based, capped at `ell` (also `ell` when
    /// nothing is deleted).
    pub i_min: usize,
    pub total_bits: u64,
    pub bits_by_kind: Vec<(MessageKind, u64)>,
    /// Average user-to-node bits over all (user, connected node) pairs.
    pub mean_pair_bits: f64,
    /// Symbols per block re-sent by a span update.
    pub span_symbols: usize,
    /// Outcome of the consistency check, when run.
    pub verified: Option<bool>,
}

const KINDS: [MessageKind; 6] = [
    MessageKind::Position,
    MessageKind::Value,
    MessageKind::TypeBit,
    MessageKind::SymbolSpan,
    MessageKind::SyndromeShare,
    MessageKind::Coordination,
];

fn per_user(edits: &[EditEvent], users: usize) -> Result<Vec<Vec<Deletion>>> {
    let mut out = vec![Vec::new(); users];
    for e in edits {
        if e.kind != EditKind::Deletion {
            return Err(Error::InvalidParameter(
                "simulated rounds carry deletions only".into(),
            ));
        }
        out.get_mut(e.user)
            .ok_or(Error::IndexOutOfRange {
                index: e.user,
                len: users,
            })?
            .push(Deletion {
                position: e.position,
                value: e.value,
            });
    }
    Ok(out)
}

/// Runs one round of the system's protocol. Schemes P and H apply each
/// user's deletions one at a time from the highest position down, so the
/// positions stay those of the pre-round block.
pub fn run_round(sys: &mut SystemState, edits: &[EditEvent], verify: bool) -> Result<TrialResult> {
    let users = sys.sync.users();
    let ell = sys.sync.ell();
    let grouped = per_user(edits, users)?;
    let first = sys.sync.ledger().entries().len();
    let reports: Vec<RoundReport> = match sys.params.scheme {
        SchemeKind::T if sys.params.suffix_spans => {
            vec![schemes::scheme_t_apply_suffix(&mut sys.sync, &grouped)?]
        }
        SchemeKind::T => vec![schemes::scheme_t_apply(&mut sys.sync, &grouped)?],
        SchemeKind::V => vec![schemes::scheme_v_round_nonuniform(&mut sys.sync, &grouped)?],
        SchemeKind::C => vec![schemes::scheme_c_round(&mut sys.sync, edits)?],
        SchemeKind::P | SchemeKind::H => {
            let mut reports = Vec::new();
            for (s, dels) in grouped.iter().enumerate() {
                let mut dels = dels.clone();
                dels.sort_by_key(|d| std::cmp::Reverse(d.position));
                for d in dels {
                    let e = EditEvent {
                        user: s,
                        kind: EditKind::Deletion,
                        position: d.position,
                        value: d.value,
                    };
                    reports.push(if sys.params.scheme == SchemeKind::P {
                        schemes::scheme_p_apply_edit(&mut sys.sync, e)?
                    } else {
                        schemes::scheme_h_apply_edit(&mut sys.sync, e)?
                    });
                }
            }
            reports
        }
    };
    let messages = &sys.sync.ledger().entries()[first..];
    let bits_by_kind = KINDS
        .iter()
        .map(|&k| {
            (
                k,
                messages
                    .iter()
                    .filter(|m| m.kind == k)
                    .map(|m| m.bits)
                    .sum(),
            )
        })
        .collect();
    let code = sys.sync.code();
    let (mut pair_sum, mut pairs) = (0u64, 0usize);
    for s in 0..users {
        for t in code.connected_nodes(s) {
            pairs += 1;
            pair_sum += messages
                .iter()
                .filter(|m| m.src == Endpoint::User(s) && m.dst == Endpoint::Node(t))
                .map(|m| m.bits)
                .sum::<u64>();
        }
    }
    let i_min = edits
        .iter()
        .map(|e| e.position + 1)
        .min()
        .map_or(ell, |i| i.min(ell));
    let span_symbols = reports
        .iter()
        .filter_map(|r| r.span)
        .map(|(lo, hi)| hi - lo)
        .sum();
    let verified = if verify {
        Some(sys.sync.verify(64)?.ok())
    } else {
        None
    };
    Ok(TrialResult {
        scheme: sys.params.scheme,
        deletions: edits.len(),
        i_min,
        total_bits: messages.iter().map(|m| m.bits).sum(),
        bits_by_kind,
        mean_pair_bits: pair_sum as f64 / pairs.max(1) as f64,
        span_symbols,
        verified,
    })
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let sd = if values.len() > 1 {
            values.std_dev()
        } else {
            0.0
        };
        Self {
            mean: values.mean(),
            stderr: sd / n.sqrt(),
        }
    }

    /// Whether `target` lies within `z` standard errors (plus a float slack
    /// for zero-variance samples).
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.stderr + 1e-9 * target.abs().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarloOptions {
    /// Run the consistency check after every `verify_every`-th trial
    /// (0 disables it).
    pub verify_every: usize,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        Self { verify_every: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub params: SystemParams,
    pub trials: usize,
    pub seed: u64,
    /// Trials aborted by a protocol error.
    pub failed: usize,
    pub first_error: Option<Error>,
    pub verified: usize,
    pub verify_failures: usize,
    pub pair_bits: Estimate,
    /// `span_symbols / ell`.
    pub span_fraction: Estimate,
    pub i_min: Estimate,
    pub deletions: Estimate,
}

/// One fresh system per trial: random blocks, one round of edits from
/// `model`, the protocol, and optionally the consistency check. Under the
/// multi-deletion models Scheme T uses suffix spans.
pub fn monte_carlo(
    params: SystemParams,
    model: &EditModel<f64>,
    trials: usize,
    seed: u64,
    options: MonteCarloOptions,
) -> Result<MonteCarloSummary> {
    model.validate()?;
    if model.ell() != params.ell || model.users() != params.users {
        return Err(Error::InvalidParameter(
            "edit model and system disagree on ell or B".into(),
        ));
    }
    params.code()?;
    let params = params.with_suffix_spans(!matches!(model, EditModel::Uniform { .. }));
    let results: Vec<Result<TrialResult>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut sys = build_system(params, seed, i as u64)?;
            let edits = sys.sample_edits(model)?;
            let verify = options.verify_every > 0 && i % options.verify_every == 0;
            run_round(&mut sys, &edits, verify)
        })
        .collect();

    let mut failed = 0;
    let mut first_error = None;
    let (mut verified, mut verify_failures) = (0, 0);
    let (mut bits, mut span, mut imin, mut dels) = (vec![], vec![], vec![], vec![]);
    for r in results {
        match r {
            Ok(t) => {
                if let Some(ok) = t.verified {
                    verified += 1;
                    verify_failures += usize::from(!ok);
                }
                bits.push(t.mean_pair_bits);
                span.push(t.span_symbols as f64 / params.ell as f64);
                imin.push(t.i_min as f64);
                dels.push(t.deletions as f64);
            }
            Err(e) => {
                failed += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    Ok(MonteCarloSummary {
        params,
        trials,
        seed,
        failed,
        first_error,
        verified,
        verify_failures,
        pair_bits: Estimate::of(&bits),
        span_fraction: Estimate::of(&span),
        i_min: Estimate::of(&imin),
        deletions: Estimate::of(&dels),
    })
}

/// Expected ledger bits per (user, connected node) pair, using the same
/// integer bit widths as the ledger. `None` where no closed form applies.
pub fn ledger_prediction(params: &SystemParams, model: &EditModel<f64>) -> Result<Option<f64>> {
    let (ell, q) = (params.ell, params.q);
    let lq = ceil_log2(q) as f64;
    let ll = ceil_log2(ell as u64) as f64;
    let edits = model.expected_edits_per_user();
    Ok(match params.scheme {
        SchemeKind::T => Some(analysis::expected_span(model)? * lq),
        SchemeKind::P => Some(edits * (ll + lq + 1.0)),
        SchemeKind::V => Some(edits * (ll + lq)),
        SchemeKind::H => {
            let head = (ell - params.ell_star) as f64;
            let tail = params.ell_star as f64;
            let head_bits = ceil_log2(head as u64) as f64 + lq;
            Some(edits * (head * head_bits + tail * tail * lq) / ell as f64)
        }
        SchemeKind::C => match model {
            EditModel::Uniform { users, .. } => {
                let b = *users as f64;
                Some(((b - 1.0) * (ll + lq) + ll) / b)
            }
            _ => None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_edits_one_per_user() {
        let mut rng = trial_rng(1, 0);
        let blocks = vec![vec![3], vec![4], vec![0]];
        let m = EditModel::Uniform { ell: 1, users: 3 };
        let e = sample_edits(&m, &blocks, &mut rng).unwrap();
        assert_eq!(e.len(), 3);
        assert!(e.iter().all(|e| e.position == 0));
        assert_eq!(e[1].value, Some(4));
    }

    #[test]
    fn combinatorial_full_deletion() {
        let mut rng = trial_rng(2, 0);
        let blocks = vec![vec![1, 2, 3], vec![4, 0, 1]];
        let m = EditModel::Combinatorial {
            ell: 3,
            users: 2,
            deletions: 6,
        };
        let e = sample_edits(&m, &blocks, &mut rng).unwrap();
        assert_eq!(e.len(), 6);
    }

    #[test]
    fn bernoulli_frequency() {
        let mut rng = trial_rng(3, 0);
        let blocks = vec![vec![0u64; 1000]; 100];
        let m = EditModel::Bernoulli {
            ell: 1000,
            users: 100,
            p: 0.1,
        };
        let e = sample_edits(&m, &blocks, &mut rng).unwrap();
        let freq = e.len() as f64 / 1e5;
        assert!((freq - 0.1).abs() < 0.003, "{freq}");
    }

    #[test]
    fn reference_blocks_reproduce_examples() {
        let p = SystemParams::new(SchemeKind::P, 3, 2, 2, 5, 5);
        let mut sys =
            build_system_with_blocks(p, vec![vec![1, 2, 3, 4, 4], vec![1, 1, 1, 1, 1]]).unwrap();
        run_round(&mut sys, &[EditEvent::deletion(0, 1)], true).unwrap();
        assert_eq!(sys.sync.tensor().node(2), &[2, 1, 4, 0, 0]);

        let v = SystemParams::new(SchemeKind::V, 3, 2, 2, 4, 5);
        let mut sys =
            build_system_with_blocks(v, vec![vec![0, 1, 0, 1], vec![1, 0, 1, 0]]).unwrap();
        run_round(
            &mut sys,
            &[
                EditEvent::deletion_of(0, 3, 1),
                EditEvent::deletion_of(1, 0, 1),
            ],
            true,
        )
        .unwrap();
        assert_eq!(sys.sync.tensor().node(2), &[2, 0, 3]);
    }

    #[test]
    fn vandermonde_uniform_cost_is_exact() {
        let p = SystemParams::new(SchemeKind::V, 5, 3, 3, 16, 17);
        let m = EditModel::Uniform { ell: 16, users: 3 };
        let s = monte_carlo(p, &m, 50, 9, MonteCarloOptions::default()).unwrap();
        assert_eq!(s.failed, 0);
        assert_eq!(s.verify_failures, 0);
        assert_eq!(s.pair_bits.mean, 4.0 + 5.0);
        assert_eq!(s.pair_bits.stderr, 0.0);
        assert_eq!(ledger_prediction(&p, &m).unwrap(), Some(9.0));
    }

    #[test]
    fn deterministic() {
        let p = SystemParams::new(SchemeKind::T, 3, 2, 2, 32, 5);
        let m = EditModel::Bernoulli {
            ell: 32,
            users: 2,
            p: 0.05,
        };
        let a = monte_carlo(p, &m, 200, 42, MonteCarloOptions::default()).unwrap();
        let b = monte_carlo(p, &m, 200, 42, MonteCarloOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.verify_failures, 0);
        assert_eq!(a.failed, 0);
    }

    #[test]
    fn every_scheme_stays_consistent() {
        let m = |ell| EditModel::Combinatorial {
            ell,
            users: 3,
            deletions: 4,
        };
        for (scheme, ell, q, star) in [
            (SchemeKind::T, 8, 7, 0),
            (SchemeKind::P, 8, 7, 0),
            (SchemeKind::V, 8, 11, 0),
            (SchemeKind::H, 8, 11, 3),
        ] {
            let p = SystemParams::new(scheme, 5, 3, 3, ell, q).with_ell_star(star);
            let s = monte_carlo(p, &m(ell), 40, 5, MonteCarloOptions::default()).unwrap();
            assert_eq!(s.failed, 0, "{scheme:?}: {:?}", s.first_error);
            assert_eq!(s.verify_failures, 0, "{scheme:?}");
        }
        let p = SystemParams::new(SchemeKind::C, 5, 3, 3, 6, 13);
        let ud = EditModel::Uniform { ell: 6, users: 3 };
        let s = monte_carlo(p, &ud, 40, 5, MonteCarloOptions::default()).unwrap();
        assert_eq!((s.failed, s.verify_failures), (0, 0));
        let predicted = ledger_prediction(&p, &ud).unwrap().unwrap();
        assert!((s.pair_bits.mean - predicted).abs() < 1e-12);
    }
}
