//! Update protocols run when users edit their blocks.
//!
//! Every protocol mutates a [`SyncState`] (raw user blocks, intermediary
//! matrices and the node tensor) and appends the messages it needed to the
//! state's [`CostLedger`]. After any successful round the tensor equals the
//! intermediary encoding of the current blocks; [`SyncState::verify`] checks
//! this along with reconstruction and repair.
//!
//! Positions are 0-based throughout.

pub mod cauchy;
pub mod dedup;
pub mod hybrid;
pub mod permutation;
pub mod traditional;
pub mod vandermonde;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dss::{k_subsets, CodeSpec, LinearDssCode, StorageTensor};
use crate::error::{Error, Result};
use crate::gf::{ceil_log2, FieldSpec};
use crate::intermediary::{self, IntermediaryConfig};
use crate::matlib::StructuredMatrix;

pub use cauchy::scheme_c_round;
pub use dedup::{dedup_round, find_pattern};
pub use hybrid::{
    aggregate_assignment, choose_gamma, scheme_h_apply_edit, tradeoff_point, GammaChoice,
    TradeoffPoint,
};
pub use permutation::scheme_p_apply_edit;
pub use traditional::{scheme_t_apply, scheme_t_apply_suffix, scheme_t_round};
pub use vandermonde::{scheme_v_round, scheme_v_round_nonuniform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditKind {
    Deletion,
    Insertion,
}

/// One edit of one user's block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditEvent {
    pub user: usize,
    pub kind: EditKind,
    pub position: usize,
    /// Inserted value, or the deleted value when the sender knows it.
    pub value: Option<u64>,
}

impl EditEvent {
    pub fn deletion(user: usize, position: usize) -> Self {
        Self {
            user,
            kind: EditKind::Deletion,
            position,
            value: None,
        }
    }

    pub fn deletion_of(user: usize, position: usize, value: u64) -> Self {
        Self {
            value: Some(value),
            ..Self::deletion(user, position)
        }
    }

    pub fn insertion(user: usize, position: usize, value: u64) -> Self {
        Self {
            user,
            kind: EditKind::Insertion,
            position,
            value: Some(value),
        }
    }
}

/// A deletion at `position` whose removed symbol is `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deletion {
    pub position: usize,
    pub value: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    User(usize),
    Node(usize),
    Coordinator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    Position,
    Value,
    TypeBit,
    SymbolSpan,
    SyndromeShare,
    /// Positions exchanged with the coordinator before a span update.
    Coordination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncMessage {
    pub round: u64,
    pub src: Endpoint,
    pub dst: Endpoint,
    pub kind: MessageKind,
    pub payload_symbols: usize,
    pub bits: u64,
}

impl SyncMessage {
    fn new(src: Endpoint, dst: Endpoint, kind: MessageKind, payload: usize, bits: u64) -> Self {
        Self {
            round: 0,
            src,
            dst,
            kind,
            payload_symbols: payload,
            bits,
        }
    }

    /// One coordinate in a block of length `ell`.
    pub fn position(src: Endpoint, dst: Endpoint, ell: usize) -> Self {
        Self::new(src, dst, MessageKind::Position, 1, ceil_log2(ell as u64))
    }

    pub fn value(src: Endpoint, dst: Endpoint, field: FieldSpec) -> Self {
        Self::new(src, dst, MessageKind::Value, 1, field.symbol_bits())
    }

    pub fn type_bit(src: Endpoint, dst: Endpoint) -> Self {
        Self::new(src, dst, MessageKind::TypeBit, 1, 1)
    }

    pub fn span(src: Endpoint, dst: Endpoint, symbols: usize, field: FieldSpec) -> Self {
        Self::new(
            src,
            dst,
            MessageKind::SymbolSpan,
            symbols,
            symbols as u64 * field.symbol_bits(),
        )
    }

    pub fn syndrome_share(src: Endpoint, dst: Endpoint, symbols: usize, field: FieldSpec) -> Self {
        Self::new(
            src,
            dst,
            MessageKind::SyndromeShare,
            symbols,
            symbols as u64 * field.symbol_bits(),
        )
    }

    /// `positions` coordinates of a block of length `ell`, to or from the
    /// coordinator.
    pub fn coordination(src: Endpoint, dst: Endpoint, positions: usize, ell: usize) -> Self {
        Self::new(
            src,
            dst,
            MessageKind::Coordination,
            positions,
            positions as u64 * ceil_log2(ell as u64),
        )
    }
}

/// Append-only message log, stamped with round numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostLedger {
    entries: Vec<SyncMessage>,
    round: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of completed rounds.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn entries(&self) -> &[SyncMessage] {
        &self.entries
    }

    /// Stamps `messages` with a fresh round number and appends them.
    pub fn record(&mut self, mut messages: Vec<SyncMessage>) -> Vec<SyncMessage> {
        self.round += 1;
        for m in &mut messages {
            m.round = self.round;
        }
        self.entries.extend_from_slice(&messages);
        messages
    }

    pub fn round_entries(&self, round: u64) -> impl Iterator<Item = &SyncMessage> {
        self.entries.iter().filter(move |m| m.round == round)
    }

    pub fn total_bits(&self) -> u64 {
        self.entries.iter().map(|m| m.bits).sum()
    }

    pub fn bits_between(&self, src: Endpoint, dst: Endpoint) -> u64 {
        pair_bits(&self.entries, src, dst)
    }

    pub fn bits_of_kind(&self, kind: MessageKind) -> u64 {
        self.entries
            .iter()
            .filter(|m| m.kind == kind)
            .map(|m| m.bits)
            .sum()
    }
}

/// Total bits sent from `src` to `dst` among `messages`.
pub fn pair_bits(messages: &[SyncMessage], src: Endpoint, dst: Endpoint) -> u64 {
    messages
        .iter()
        .filter(|m| m.src == src && m.dst == dst)
        .map(|m| m.bits)
        .sum()
}

/// What one protocol round did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundReport {
    pub round: u64,
    pub messages: Vec<SyncMessage>,
    /// The tensor subtracted from (or added to) the nodes, when the protocol
    /// works by difference.
    pub correction: Option<StorageTensor>,
    /// Coordinates rewritten by a span update, as a half-open range.
    pub span: Option<(usize, usize)>,
}

/// Which protocol a system is configured for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Identity matrices; edits re-send the affected span.
    T,
    /// Permutation matrices over zero-padded blocks of fixed length.
    P,
    /// Vandermonde matrices; storage shrinks with deletions.
    V,
    /// Identity for the first user, Cauchy matrices for the others.
    C,
    /// Vandermonde head and identity tail.
    H,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::T => "T",
            SchemeKind::P => "P",
            SchemeKind::V => "V",
            SchemeKind::C => "C",
            SchemeKind::H => "H",
        }
    }
}

/// Evaluation points `1, 2, .., m` reduced mod `q`.
pub fn default_nodes(m: usize, field: FieldSpec) -> Result<Vec<u64>> {
    if m as u64 > field.q() {
        return Err(Error::FieldTooSmall {
            q: field.q(),
            needed: m,
        });
    }
    Ok((1..=m as u64).map(|p| p % field.q()).collect())
}

/// Initial intermediary matrices for `scheme` with `users` blocks of length
/// `ell`. `ell_star` is the identity tail length used by scheme H.
pub fn initial_config(
    scheme: SchemeKind,
    field: FieldSpec,
    users: usize,
    ell: usize,
    ell_star: usize,
) -> Result<IntermediaryConfig> {
    let matrices = match scheme {
        SchemeKind::T | SchemeKind::P => vec![StructuredMatrix::identity(field, ell); users],
        SchemeKind::V => {
            let v = StructuredMatrix::vandermonde(field, &default_nodes(ell, field)?, ell)?;
            vec![v; users]
        }
        SchemeKind::C => {
            if 2 * ell as u64 > field.q() {
                return Err(Error::FieldTooSmall {
                    q: field.q(),
                    needed: 2 * ell,
                });
            }
            let a: Vec<u64> = (0..ell as u64).collect();
            let b: Vec<u64> = (ell as u64..2 * ell as u64).collect();
            let c = StructuredMatrix::cauchy(field, &a, &b)?;
            let mut m = vec![c; users];
            m[0] = StructuredMatrix::identity(field, ell);
            m
        }
        SchemeKind::H => {
            if ell_star > ell {
                return Err(Error::InvalidParameter(format!(
                    "identity tail {ell_star} exceeds block length {ell}"
                )));
            }
            let head = ell - ell_star;
            let v = StructuredMatrix::vandermonde(field, &default_nodes(head, field)?, head)?;
            let a = StructuredMatrix::block_diag(v, StructuredMatrix::identity(field, ell_star))?;
            vec![a; users]
        }
    };
    IntermediaryConfig::new(matrices, false)
}

/// Outcome of [`SyncState::verify`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub tensor_matches: bool,
    pub subsets_checked: usize,
    pub reconstruct_failures: usize,
    pub repair_failures: usize,
}

impl ConsistencyReport {
    pub fn ok(&self) -> bool {
        self.tensor_matches && self.reconstruct_failures == 0 && self.repair_failures == 0
    }
}

/// Users' blocks, their matrices, and what the nodes store.
///
/// Blocks are kept at the length of their matrix (`config.user_len(s)`).
/// Protocols that pad blocks with trailing zeros track the unpadded length
/// separately in `lengths`.
#[derive(Debug, Clone)]
pub struct SyncState {
    pub(crate) code: CodeSpec,
    pub(crate) config: IntermediaryConfig,
    pub(crate) blocks: Vec<Vec<u64>>,
    pub(crate) lengths: Vec<usize>,
    pub(crate) tensor: StorageTensor,
    pub(crate) ledger: CostLedger,
}

impl SyncState {
    /// Encodes `blocks` under `config`. A block shorter than its matrix is
    /// zero padded and its unpadded length remembered.
    pub fn new(code: CodeSpec, config: IntermediaryConfig, blocks: Vec<Vec<u64>>) -> Result<Self> {
        if blocks.len() != config.users() {
            return Err(Error::DimensionMismatch(format!(
                "{} blocks for {} users",
                blocks.len(),
                config.users()
            )));
        }
        if config.field() != code.field() {
            return Err(Error::MixedFields {
                left: code.field().q(),
                right: config.field().q(),
            });
        }
        let f = code.field();
        let mut stored = Vec::with_capacity(blocks.len());
        let mut lengths = Vec::with_capacity(blocks.len());
        for (s, b) in blocks.into_iter().enumerate() {
            let len = config.user_len(s);
            if b.len() > len {
                return Err(Error::LengthMismatch {
                    expected: len,
                    found: b.len(),
                });
            }
            lengths.push(b.len());
            let mut b = f.elems(&b);
            b.resize(len, 0);
            stored.push(b);
        }
        let tensor = intermediary::encode_star(&code, &config, &stored)?;
        Ok(Self {
            code,
            config,
            blocks: stored,
            lengths,
            tensor,
            ledger: CostLedger::new(),
        })
    }

    pub fn code(&self) -> &CodeSpec {
        &self.code
    }

    pub fn field(&self) -> FieldSpec {
        self.code.field()
    }

    pub fn config(&self) -> &IntermediaryConfig {
        &self.config
    }

    /// Blocks as multiplied by the matrices, padding included.
    pub fn stored_blocks(&self) -> &[Vec<u64>] {
        &self.blocks
    }

    /// User `s`'s data without padding.
    pub fn block(&self, s: usize) -> &[u64] {
        &self.blocks[s][..self.lengths[s]]
    }

    pub fn blocks(&self) -> Vec<Vec<u64>> {
        (0..self.users()).map(|s| self.block(s).to_vec()).collect()
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn users(&self) -> usize {
        self.blocks.len()
    }

    pub fn tensor(&self) -> &StorageTensor {
        &self.tensor
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    /// Width of the stored arrays.
    pub fn ell(&self) -> usize {
        self.tensor.ell()
    }

    pub(crate) fn check_user(&self, s: usize) -> Result<()> {
        if s >= self.users() {
            return Err(Error::IndexOutOfRange {
                index: s,
                len: self.users(),
            });
        }
        Ok(())
    }

    pub(crate) fn finish(
        &mut self,
        messages: Vec<SyncMessage>,
        correction: Option<StorageTensor>,
        span: Option<(usize, usize)>,
    ) -> RoundReport {
        let messages = self.ledger.record(messages);
        RoundReport {
            round: self.ledger.round(),
            messages,
            correction,
            span,
        }
    }

    /// Checks the tensor against a fresh encoding, reconstruction from every
    /// `k`-subset of nodes (at most `max_subsets`, sampled deterministically
    /// beyond that) and repair of every node.
    pub fn verify(&self, max_subsets: usize) -> Result<ConsistencyReport> {
        let code = &self.code;
        let fresh = intermediary::encode_star(code, &self.config, &self.blocks)?;
        let (n, k) = (code.n(), code.k());
        let all = k_subsets(n, k);
        let subsets: Vec<Vec<usize>> = if all.len() <= max_subsets {
            all
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.ledger.round());
            sample(&mut rng, all.len(), max_subsets)
                .into_iter()
                .map(|i| all[i].clone())
                .collect()
        };
        let mut reconstruct_failures = 0;
        for s in &subsets {
            let got =
                intermediary::reconstruct_star(code, &self.config, s, &self.tensor.restrict(s));
            if got.as_ref().ok() != Some(&self.blocks) {
                reconstruct_failures += 1;
            }
        }
        let mut repair_failures = 0;
        for target in 0..n {
            let helpers: Vec<usize> = (0..n).filter(|&h| h != target).take(code.d()).collect();
            let got = intermediary::repair_star(
                code,
                &self.config,
                target,
                &helpers,
                &self.tensor.restrict(&helpers),
            );
            if got.as_deref().ok() != Some(self.tensor.node(target)) {
                repair_failures += 1;
            }
        }
        Ok(ConsistencyReport {
            tensor_matches: fresh == self.tensor,
            subsets_checked: subsets.len(),
            reconstruct_failures,
            repair_failures,
        })
    }
}

/// Sorts and validates one user's deletions against its current length.
pub(crate) fn sorted_deletions(
    user: usize,
    deletions: &[Deletion],
    len: usize,
) -> Result<Vec<Deletion>> {
    let mut d = deletions.to_vec();
    d.sort_by_key(|x| x.position);
    for (i, x) in d.iter().enumerate() {
        if x.position >= len {
            return Err(Error::IndexOutOfRange {
                index: x.position,
                len,
            });
        }
        if i > 0 && d[i - 1].position == x.position {
            return Err(Error::InvalidParameter(format!(
                "user {user} deletes position {} twice",
                x.position
            )));
        }
    }
    Ok(d)
}

/// Removes the given (sorted, distinct) positions.
pub(crate) fn without_positions(x: &[u64], sorted_positions: &[usize]) -> Vec<u64> {
    let mut out = Vec::with_capacity(x.len());
    let mut it = sorted_positions.iter().peekable();
    for (i, &v) in x.iter().enumerate() {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(v);
        }
    }
    out
}

/// Groups single-deletion edits by user, requiring exactly one per user.
pub(crate) fn one_deletion_per_user(edits: &[EditEvent], users: usize) -> Result<Vec<Deletion>> {
    let mut slots: Vec<Option<Deletion>> = vec![None; users];
    for e in edits {
        if e.kind != EditKind::Deletion || e.user >= users || slots[e.user].is_some() {
            return Err(Error::NonUniformEdits);
        }
        slots[e.user] = Some(Deletion {
            position: e.position,
            value: e.value,
        });
    }
    slots
        .into_iter()
        .map(|s| s.ok_or(Error::NonUniformEdits))
        .collect()
}
