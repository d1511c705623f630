//! Recovering a single deletion whose position and value are unknown.
//!
//! Each block keeps the pair `nu1 = sum x_i` (in F_q) and
//! `nu2 = sum_i i * [x_i <= x_{i+1}] mod ell`. After one deletion, the only
//! completion with the stored syndrome is the original block. To survive the
//! loss of a user's own syndrome, the `k` syndromes are also encoded with the
//! base code and the `n - k` parity values are stored on the check nodes.

use std::collections::BTreeMap;

use crate::dss::{self, CodeSpec, LinearDssCode};
use crate::error::{Error, Result};
use crate::gf::{ceil_log2, FieldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VtSyndrome {
    pub nu1: u64,
    pub nu2: u64,
}

/// Syndrome of `x`, comparing symbols by their canonical representatives.
pub fn vt_syndrome(field: FieldSpec, x: &[u64]) -> Result<VtSyndrome> {
    if x.is_empty() {
        return Err(Error::InvalidParameter(
            "syndrome of an empty string".into(),
        ));
    }
    let ell = x.len() as u64;
    let nu1 = x.iter().fold(0, |acc, &v| field.add(acc, field.reduce(v)));
    let nu2 = x
        .windows(2)
        .enumerate()
        .filter(|(_, w)| field.reduce(w[0]) <= field.reduce(w[1]))
        .fold(0u64, |acc, (i, _)| (acc + (i as u64 + 1) % ell) % ell);
    Ok(VtSyndrome { nu1, nu2 })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VtRecovery {
    pub recovered: Vec<u64>,
    /// First position at which inserting `value` gives `recovered`.
    pub position: usize,
    pub value: u64,
}

/// Finds the length-`|x_tilde| + 1` string with the given syndrome that
/// contains `x_tilde` as a one-deletion subsequence.
pub fn vt_recover(field: FieldSpec, x_tilde: &[u64], syndrome: VtSyndrome) -> Result<VtRecovery> {
    let mut found: Option<VtRecovery> = None;
    let mut candidate = Vec::with_capacity(x_tilde.len() + 1);
    for position in 0..=x_tilde.len() {
        for value in 0..field.q() {
            candidate.clear();
            candidate.extend_from_slice(&x_tilde[..position]);
            candidate.push(value);
            candidate.extend_from_slice(&x_tilde[position..]);
            if vt_syndrome(field, &candidate)? != syndrome {
                continue;
            }
            match &found {
                None => {
                    found = Some(VtRecovery {
                        recovered: candidate.clone(),
                        position,
                        value,
                    })
                }
                Some(f) if f.recovered == candidate => {}
                Some(_) => return Err(Error::AmbiguousRecovery),
            }
        }
    }
    found.ok_or(Error::NoCandidate)
}

/// Parity values of the syndrome vectors, one pair per check node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyndromeShares {
    /// Check node index (`k..n`) to `(nu1 share, nu2 share)`.
    pub shares: BTreeMap<usize, (u64, u64)>,
}

fn check_share_params(code: &CodeSpec, ell: usize) -> Result<()> {
    let q = code.field().q();
    if ell as u64 > q {
        return Err(Error::FieldTooSmall { q, needed: ell });
    }
    if ell as u64 != q {
        return Err(Error::InvalidParameter(format!(
            "coded syndromes need ell = q, got ell = {ell}, q = {q}"
        )));
    }
    if code.n() - code.k() >= code.k() {
        return Err(Error::InvalidParameter(format!(
            "coded syndromes need n - k < k, got n = {}, k = {}",
            code.n(),
            code.k()
        )));
    }
    Ok(())
}

/// Encodes the `k` users' syndromes; `nu2` is read as an element of F_q,
/// which is exact because `ell = q`.
pub fn encode_syndrome_shares(
    code: &CodeSpec,
    ell: usize,
    syndromes: &[VtSyndrome],
) -> Result<SyndromeShares> {
    check_share_params(code, ell)?;
    let blocks: Vec<Vec<u64>> = syndromes.iter().map(|s| vec![s.nu1, s.nu2]).collect();
    let tensor = dss::encode_block(code, &blocks)?;
    Ok(SyndromeShares {
        shares: (code.k()..code.n())
            .map(|t| {
                let v = tensor.node(t);
                (t, (v[0], v[1]))
            })
            .collect(),
    })
}

/// Recovers user `s`'s syndrome from `k` available values, each keyed by
/// node: node `t < k` contributes user `t`'s own syndrome, node `t >= k` its
/// share.
pub fn recover_own_syndrome(
    code: &CodeSpec,
    ell: usize,
    s: usize,
    available: &[(usize, VtSyndrome)],
) -> Result<VtSyndrome> {
    check_share_params(code, ell)?;
    let (n, k) = (code.n(), code.k());
    if s >= k {
        return Err(Error::IndexOutOfRange { index: s, len: k });
    }
    if available.len() < k {
        return Err(Error::TooManyAffected {
            affected: n - available.len(),
            limit: n - k,
        });
    }
    let used = &available[..k];
    let subset: Vec<usize> = used.iter().map(|&(t, _)| t).collect();
    let slices: Vec<Vec<u64>> = used.iter().map(|(_, v)| vec![v.nu1, v.nu2]).collect();
    let all = dss::reconstruct_block(code, &subset, &slices)?;
    Ok(VtSyndrome {
        nu1: all[s][0],
        nu2: all[s][1],
    })
}

/// Extra bits on the check nodes for the coded syndromes.
pub fn share_storage_bits(n: usize, k: usize, q: u64) -> u64 {
    2 * (n - k) as u64 * ceil_log2(q)
}

/// Bits to store every user's syndrome uncoded.
pub fn plain_storage_bits(k: usize, q: u64, ell: usize) -> u64 {
    k as u64 * (ceil_log2(q) + ceil_log2(ell as u64))
}
