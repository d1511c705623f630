//! Closed-form expected costs, order statistics and bounds.
//!
//! Everything here is generic over the float type `T`; the crate root
//! re-exports `f64` aliases. Logs are base 2 and real-valued, except for the
//! ceilings used by reduced-range position encoding. Binomial coefficients are
//! exact integers up to `n = 64` and go through `ln_gamma` beyond that.

use std::collections::HashSet;

use num_traits::Float;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gf::ceil_log2;

fn cast<T: Float>(x: f64) -> T {
    T::from(x).expect("finite f64 converts to any Float")
}

fn cast_usize<T: Float>(x: usize) -> T {
    T::from(x).expect("usize converts to any Float")
}

/// How deletions are drawn over `users` blocks of length `ell`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EditModel<T> {
    /// One deletion per block at a uniform position.
    Uniform { ell: usize, users: usize },
    /// Exactly `deletions` deletions, uniform over all `users * ell` coordinates.
    Combinatorial {
        ell: usize,
        users: usize,
        deletions: usize,
    },
    /// Every coordinate deleted independently with probability `p`.
    Bernoulli { ell: usize, users: usize, p: T },
}

impl<T: Float> EditModel<T> {
    pub fn ell(&self) -> usize {
        match *self {
            Self::Uniform { ell, .. }
            | Self::Combinatorial { ell, .. }
            | Self::Bernoulli { ell, .. } => ell,
        }
    }

    pub fn users(&self) -> usize {
        match *self {
            Self::Uniform { users, .. }
            | Self::Combinatorial { users, .. }
            | Self::Bernoulli { users, .. } => users,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell() == 0 || self.users() == 0 {
            return Err(Error::InvalidParameter(
                "edit model needs ell >= 1 and at least one user".into(),
            ));
        }
        match *self {
            Self::Combinatorial {
                ell,
                users,
                deletions,
            } if deletions > ell * users => Err(Error::InvalidParameter(format!(
                "{deletions} deletions exceed the {} coordinates",
                ell * users
            ))),
            Self::Bernoulli { p, .. } if !(p >= T::zero() && p <= T::one()) => Err(
                Error::InvalidParameter("deletion probability must lie in [0, 1]".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Expected number of deletions in one user's block.
    pub fn expected_edits_per_user(&self) -> T {
        match *self {
            Self::Uniform { .. } => T::one(),
            Self::Combinatorial {
                users, deletions, ..
            } => cast_usize::<T>(deletions) / cast_usize(users),
            Self::Bernoulli { ell, p, .. } => p * cast_usize(ell),
        }
    }
}

/// Expected bits between a user and one connected node, split by content.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate<T> {
    pub bits: T,
    pub position_bits: T,
    pub value_bits: T,
    pub span_bits: T,
}

impl<T: Float> CostEstimate<T> {
    pub fn new(position_bits: T, value_bits: T, span_bits: T) -> Self {
        Self {
            bits: position_bits + value_bits + span_bits,
            position_bits,
            value_bits,
            span_bits,
        }
    }
}

/// Large-`ell` limit of the expected span fraction of Scheme T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaLimit<T> {
    Exact(T),
    LowerBound(T),
}

impl<T: Copy> EtaLimit<T> {
    pub fn value(&self) -> T {
        match *self {
            Self::Exact(v) | Self::LowerBound(v) => v,
        }
    }
}

/// `C(n, k)` as an exact integer, for `n <= 64`.
fn binomial_exact(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

/// `ln C(n, k)`, or `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        f64::NEG_INFINITY
    } else if n <= 64 {
        (binomial_exact(n, k) as f64).ln()
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    }
}

/// `C(n, k)` as a float, zero when `k > n`.
pub fn binomial<T: Float>(n: u64, k: u64) -> T {
    if k > n {
        T::zero()
    } else if n <= 64 {
        cast(binomial_exact(n, k) as f64)
    } else {
        cast(ln_binomial(n, k).exp())
    }
}

/// `C(a, k) / C(b, k)` for `a <= b`, computed without overflow.
fn binomial_ratio<T: Float>(a: u64, b: u64, k: u64) -> T {
    if k > a {
        T::zero()
    } else if b <= 64 {
        cast(binomial_exact(a, k) as f64 / binomial_exact(b, k) as f64)
    } else {
        cast((ln_binomial(a, k) - ln_binomial(b, k)).exp())
    }
}

/// Expected smallest deleted position (1-based) over all users, with the
/// convention that `i_min = ell` when nothing is deleted.
pub fn expected_imin<T: Float>(model: &EditModel<T>) -> Result<T> {
    model.validate()?;
    let ell = model.ell();
    let b = model.users();
    let terms = (1..=ell).map(|i| match *model {
        EditModel::Uniform { .. } => {
            (cast_usize::<T>(ell - i + 1) / cast_usize(ell)).powi(b as i32)
        }
        EditModel::Combinatorial { deletions, .. } => binomial_ratio(
            (b * (ell - i + 1)) as u64,
            (b * ell) as u64,
            deletions as u64,
        ),
        EditModel::Bernoulli { p, .. } => (T::one() - p).powi((b * (i - 1)) as i32),
    });
    Ok(terms.fold(T::zero(), |acc, t| acc + t))
}

/// Expected number of symbols Scheme T re-sends per user-node pair:
/// `i_max - i_min` for one deletion per block, `ell - i_min` otherwise.
pub fn expected_span<T: Float>(model: &EditModel<T>) -> Result<T> {
    let imin = expected_imin(model)?;
    let ell = cast_usize::<T>(model.ell());
    Ok(match model {
        // E[i_max] = ell + 1 - E[i_min] by symmetry
        EditModel::Uniform { .. } => ell + T::one() - imin - imin,
        _ => ell - imin,
    })
}

pub fn expected_cost_t<T: Float>(model: &EditModel<T>, q: u64) -> Result<CostEstimate<T>> {
    let span = expected_span(model)?;
    let lq = cast_usize::<T>(q as usize).log2();
    Ok(CostEstimate::new(T::zero(), T::zero(), span * lq))
}

/// Limit of `E|I| / ell` for constant `B` (exact for the uniform model,
/// a lower bound otherwise). For the Bernoulli model `c = B p`.
pub fn eta_limit<T: Float>(model: &EditModel<T>) -> Result<EtaLimit<T>> {
    model.validate()?;
    let b = cast_usize::<T>(model.users());
    Ok(match *model {
        EditModel::Uniform { .. } => EtaLimit::Exact((b - T::one()) / (b + T::one())),
        EditModel::Combinatorial { deletions, .. } => {
            let d = cast_usize::<T>(deletions);
            EtaLimit::LowerBound(d / (d + T::one()))
        }
        EditModel::Bernoulli { p, .. } => EtaLimit::LowerBound(T::one() - (-(b * p)).exp()),
    })
}

/// Lower bound on the uniform-model limit when `B / ell -> c`.
pub fn eta_limit_growing_users<T: Float>(c: T) -> EtaLimit<T> {
    EtaLimit::LowerBound(T::one() - cast::<T>(2.0) * (-c).exp())
}

/// Expected bits per user-node pair for Schemes P and V:
/// expected edits times `log ell + log q`.
pub fn expected_cost_pv<T: Float>(model: &EditModel<T>, q: u64) -> Result<CostEstimate<T>> {
    model.validate()?;
    let edits = model.expected_edits_per_user();
    let ll = cast_usize::<T>(model.ell()).log2();
    let lq = cast_usize::<T>(q as usize).log2();
    Ok(CostEstimate::new(edits * ll, edits * lq, T::zero()))
}

/// Per-edit communication and storage of one fixed scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeFeatures<T> {
    pub scheme: &'static str,
    pub comm_bits: T,
    pub storage_bits: T,
}

/// Schemes T (worst case), P and V for one block length and field size.
pub fn scheme_features<T: Float>(ell: usize, q: u64) -> [SchemeFeatures<T>; 3] {
    let ll = cast_usize::<T>(ell).log2();
    let lq = cast_usize::<T>(q as usize).log2();
    [
        SchemeFeatures {
            scheme: "T",
            comm_bits: cast_usize::<T>(ell.saturating_sub(1)) * lq,
            storage_bits: T::zero(),
        },
        SchemeFeatures {
            scheme: "P",
            comm_bits: ll + lq + T::one(),
            storage_bits: ll,
        },
        SchemeFeatures {
            scheme: "V",
            comm_bits: ll + lq,
            storage_bits: ll,
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevMode {
    Deletions,
    Indels,
}

/// Bits needed to describe `d` edits of a length-`ell` string:
/// `log C(ell - d, d)` for deletions, `log((q-1)^d C(ell + d, d))` with insertions.
pub fn lev_lower_bound<T: Float>(ell: usize, d: usize, q: u64, mode: LevMode) -> Result<T> {
    if d > ell {
        return Err(Error::InvalidParameter(format!(
            "{d} edits exceed length {ell}"
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    let bits = match mode {
        LevMode::Deletions => ln_binomial((ell - d) as u64, d as u64) / ln2,
        LevMode::Indels => {
            d as f64 * ((q - 1) as f64).log2() + ln_binomial((ell + d) as u64, d as u64) / ln2
        }
    };
    Ok(cast(bits.max(0.0)))
}

/// Number of maximal runs of equal symbols.
pub fn run_count(x: &[u64]) -> usize {
    if x.is_empty() {
        0
    } else {
        1 + x.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// Cap on enumerated strings in [`edit_ball_size`].
pub const BALL_LIMIT: u128 = 5_000_000;

/// Number of distinct strings obtained from `x` by at most `d` deletions.
pub fn edit_ball_size(x: &[u64], d: usize) -> Result<u128> {
    let bound: u128 = (0..=d.min(x.len()))
        .map(|j| binomial_exact_u128(x.len() as u64, j as u64))
        .fold(0u128, u128::saturating_add);
    if bound > BALL_LIMIT {
        return Err(Error::TooLarge(bound));
    }
    let mut frontier: HashSet<Vec<u64>> = HashSet::from([x.to_vec()]);
    let mut total = 1u128;
    for _ in 0..d {
        let mut next = HashSet::new();
        for y in &frontier {
            for i in 0..y.len() {
                if i > 0 && y[i] == y[i - 1] {
                    continue;
                }
                let mut z = y.clone();
                z.remove(i);
                next.insert(z);
            }
        }
        total += next.len() as u128;
        frontier = next;
    }
    Ok(total)
}

fn binomial_exact_u128(n: u64, k: u64) -> u128 {
    if k > n {
        0
    } else if n <= 64 {
        binomial_exact(n, k)
    } else {
        u128::MAX
    }
}

/// Expected position bits saved per deletion when positions are encoded in
/// `ceil(log i_max)` bits instead of `ceil(log ell)`, given `d` deletions:
/// `s(ell, d) = sum_{i=1}^{ceil(log ell)} C(2^(i-1), d) / C(ell, d)`.
pub fn reduced_range_savings<T: Float>(ell: usize, d: usize) -> Result<T> {
    if d == 0 || d > ell {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= d <= ell, got d = {d}, ell = {ell}"
        )));
    }
    let levels = ceil_log2(ell as u64) as u32;
    Ok((1..=levels)
        .map(|i| binomial_ratio::<T>(1u64 << (i - 1), ell as u64, d as u64))
        .fold(T::zero(), |a, t| a + t))
}

/// `E[ceil(log i_max)]` given `d` deletions at uniform distinct positions.
pub fn expected_log_imax<T: Float>(ell: usize, d: usize) -> Result<T> {
    let s = reduced_range_savings::<T>(ell, d)?;
    Ok(cast_usize::<T>(ceil_log2(ell as u64) as usize) - s)
}

/// Expected bits of one user's reduced-range positions, `d (ceil(log ell) - s)`
/// averaged over the user's deletion count `d`. The combinatorial model
/// weighs all compositions of the `D` deletions over the `B` users equally.
pub fn expected_cost_reduced_range<T: Float>(model: &EditModel<T>) -> Result<T> {
    model.validate()?;
    let ell = model.ell();
    let levels = cast_usize::<T>(ceil_log2(ell as u64) as usize);
    let per_d = |d: usize| -> Result<T> {
        Ok(cast_usize::<T>(d) * (levels - reduced_range_savings::<T>(ell, d)?))
    };
    match *model {
        EditModel::Uniform { .. } => per_d(1),
        EditModel::Combinatorial {
            users, deletions, ..
        } => {
            let (b, big_d) = (users as u64, deletions as u64);
            if big_d == 0 {
                return Ok(T::zero());
            }
            if b == 1 {
                return if deletions > ell {
                    Err(Error::InvalidParameter(format!(
                        "{deletions} deletions in one block of length {ell}"
                    )))
                } else {
                    per_d(deletions)
                };
            }
            let ln_total = ln_binomial(b + big_d - 1, big_d);
            let mut acc = T::zero();
            for d in 1..=deletions.min(ell) {
                let rest = big_d - d as u64;
                let w = (ln_binomial(rest + b - 2, rest) - ln_total).exp();
                acc = acc + cast::<T>(w) * per_d(d)?;
            }
            Ok(acc)
        }
        EditModel::Bernoulli { p, .. } => {
            if p == T::zero() {
                return Ok(T::zero());
            }
            let mut acc = T::zero();
            for d in 1..=ell {
                let w = binomial::<T>(ell as u64, d as u64)
                    * p.powi(d as i32)
                    * (T::one() - p).powi((ell - d) as i32);
                acc = acc + w * per_d(d)?;
            }
            Ok(acc)
        }
    }
}

/// Reduced-range cost of user `s` when a composition `(d_1..d_B)` of `D`
/// has probability proportional to `prod lambda_i^(d_i)`.
pub fn expected_cost_reduced_range_weighted<T: Float>(
    ell: usize,
    deletions: usize,
    weights: &[T],
    s: usize,
) -> Result<T> {
    if s >= weights.len() {
        return Err(Error::IndexOutOfRange {
            index: s,
            len: weights.len(),
        });
    }
    let levels = cast_usize::<T>(ceil_log2(ell as u64) as usize);
    let others: Vec<T> = weights
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != s)
        .map(|(_, &w)| w)
        .collect();
    let mut num = T::zero();
    for d in 1..=deletions.min(ell) {
        let per = cast_usize::<T>(d) * (levels - reduced_range_savings::<T>(ell, d)?);
        num = num + weights[s].powi(d as i32) * per * homogeneous_h(deletions - d, &others);
    }
    Ok(num / homogeneous_h(deletions, weights))
}

/// Complete homogeneous symmetric polynomial `h_k(weights)`.
pub fn homogeneous_h<T: Float>(k: usize, weights: &[T]) -> T {
    let mut h = vec![T::zero(); k + 1];
    h[0] = T::one();
    for &w in weights {
        for j in 1..=k {
            h[j] = h[j] + w * h[j - 1];
        }
    }
    h[k]
}

const LAMBERT_ITERATIONS: usize = 200;

fn lambert_tolerance<T: Float>() -> T {
    cast::<T>(1e-12).max(T::epsilon() * cast(8.0))
}

/// Principal branch of Lambert W for `x >= 0`, by Newton iteration from
/// `ln(1 + x)`.
pub fn lambert_w<T: Float>(x: T) -> Result<T> {
    if x.is_nan() || x < T::zero() || x.is_infinite() {
        return Err(Error::InvalidParameter(
            "Lambert W is evaluated on finite x >= 0 only".into(),
        ));
    }
    let tol = lambert_tolerance::<T>() * x.max(T::one());
    let mut w = x.ln_1p();
    for _ in 0..LAMBERT_ITERATIONS {
        let ew = w.exp();
        let r = w * ew - x;
        if r.abs() <= tol {
            return Ok(w);
        }
        w = w - r / (ew * (w + T::one()));
    }
    Err(Error::NonConvergence)
}

/// `W(e^l)`, i.e. the solution of `w + ln w = l`, for arguments too large
/// to exponentiate.
pub fn lambert_w_exp<T: Float>(l: T) -> Result<T> {
    if l.is_nan() || l.is_infinite() {
        return Err(Error::InvalidParameter("argument must be finite".into()));
    }
    if l < cast(20.0) {
        return lambert_w(l.exp());
    }
    let tol = lambert_tolerance::<T>() * l;
    let mut w = l - l.ln();
    for _ in 0..LAMBERT_ITERATIONS {
        let g = w + w.ln() - l;
        if g.abs() <= tol {
            return Ok(w);
        }
        w = w - g / (T::one() + w.recip());
    }
    Err(Error::NonConvergence)
}
