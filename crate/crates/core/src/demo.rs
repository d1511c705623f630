//! Small reference runs with known outcomes.
//!
//! Each demo replays a fixed edit sequence, prints every intermediate table
//! (blocks, correction `D`, node tensor and intermediary matrices) and
//! compares it against hard-coded values. Positions in the transcripts are
//! 1-based.

use std::fmt::Write as _;

use crate::dss::CodeSpec;
use crate::error::{Error, Result};
use crate::schemes::{
    self, dedup_round, initial_config, EditEvent, RoundReport, SchemeKind, SyncState,
};
use crate::vtsync::{vt_recover, vt_syndrome, VtSyndrome};
use crate::FieldSpec;

type Rows = Vec<Vec<u64>>;

/// Names accepted by [`run_demo`].
pub const DEMOS: [&str; 5] = ["scheme-p", "scheme-v", "scheme-h", "vt", "dedup"];

struct Expected {
    label: &'static str,
    blocks: Rows,
    d: Option<Rows>,
    tensor: Rows,
    matrices: [Rows; 2],
}

fn rows<const C: usize>(r: &[[u64; C]]) -> Rows {
    r.iter().map(|x| x.to_vec()).collect()
}

fn identity(n: usize) -> Rows {
    (0..n)
        .map(|i| (0..n).map(|j| u64::from(i == j)).collect())
        .collect()
}

fn permutation(order: &[usize]) -> Rows {
    let n = order.len();
    order
        .iter()
        .map(|&c| (0..n).map(|j| u64::from(j == c)).collect())
        .collect()
}

fn format_rows(out: &mut String, name: &str, r: &[Vec<u64>]) {
    let _ = writeln!(out, "  {name}:");
    for row in r {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "    {}", cells.join(" "));
    }
}

fn compare(demo: &str, row: usize, what: &str, got: &[Vec<u64>], want: &[Vec<u64>]) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::DemoMismatch(format!(
            "{demo}, row {row}, {what}: got {got:?}, expected {want:?}"
        )))
    }
}

fn check_row(
    out: &mut String,
    demo: &str,
    row: usize,
    state: &SyncState,
    report: Option<&RoundReport>,
    want: &Expected,
) -> Result<()> {
    let _ = writeln!(out, "row {row}: {}", want.label);
    let blocks = state.stored_blocks().to_vec();
    let _ = writeln!(out, "  blocks: {blocks:?}");
    compare(demo, row, "blocks", &blocks, &want.blocks)?;
    match (&want.d, report.and_then(|r| r.correction.as_ref())) {
        (Some(d), Some(got)) => {
            format_rows(out, "D", got.rows());
            compare(demo, row, "D", got.rows(), d)?;
        }
        (Some(_), None) => {
            return Err(Error::DemoMismatch(format!(
                "{demo}, row {row}: no correction tensor"
            )))
        }
        (None, _) => {}
    }
    format_rows(out, "nodes", state.tensor().rows());
    compare(demo, row, "nodes", state.tensor().rows(), &want.tensor)?;
    for (s, m) in want.matrices.iter().enumerate() {
        let got = state.config().matrix(s).to_rows();
        format_rows(out, &format!("A{}", s + 1), &got);
        compare(demo, row, &format!("A{}", s + 1), &got, m)?;
    }
    Ok(())
}

fn parity_state(
    scheme: SchemeKind,
    ell: usize,
    ell_star: usize,
    blocks: Rows,
) -> Result<SyncState> {
    let code = CodeSpec::single_parity(2, 5)?;
    let cfg = initial_config(scheme, FieldSpec::new(5)?, 2, ell, ell_star)?;
    SyncState::new(code, cfg, blocks)
}

pub fn demo_scheme_p() -> Result<String> {
    let name = "scheme-p";
    let mut out = String::from("[3,2] single parity code over F_5, ell = 5\n");
    let mut st = parity_state(
        SchemeKind::P,
        5,
        0,
        vec![vec![1, 2, 3, 4, 4], vec![1, 1, 1, 1, 1]],
    )?;
    let u2 = vec![1, 1, 1, 1, 1];
    let table = [
        Expected {
            label: "initial",
            blocks: vec![vec![1, 2, 3, 4, 4], u2.clone()],
            d: None,
            tensor: rows(&[[1, 2, 3, 4, 4], [1, 1, 1, 1, 1], [2, 3, 4, 0, 0]]),
            matrices: [identity(5), identity(5)],
        },
        Expected {
            label: "user 1 deletes position 2",
            blocks: vec![vec![1, 3, 4, 4, 0], u2.clone()],
            d: Some(rows(&[[0, 2, 0, 0, 0], [0; 5], [0, 2, 0, 0, 0]])),
            tensor: rows(&[[1, 0, 3, 4, 4], [1, 1, 1, 1, 1], [2, 1, 4, 0, 0]]),
            matrices: [permutation(&[0, 2, 3, 4, 1]), identity(5)],
        },
        Expected {
            label: "user 1 deletes position 3",
            blocks: vec![vec![1, 3, 4, 0, 0], u2.clone()],
            d: Some(rows(&[[0, 0, 0, 4, 0], [0; 5], [0, 0, 0, 4, 0]])),
            tensor: rows(&[[1, 0, 3, 0, 4], [1, 1, 1, 1, 1], [2, 1, 4, 1, 0]]),
            matrices: [permutation(&[0, 2, 4, 1, 3]), identity(5)],
        },
        Expected {
            label: "user 1 inserts 4 at position 2",
            blocks: vec![vec![1, 4, 3, 4, 0], u2],
            d: Some(rows(&[[0, 0, 0, 4, 0], [0; 5], [0, 0, 0, 4, 0]])),
            tensor: rows(&[[1, 0, 3, 4, 4], [1, 1, 1, 1, 1], [2, 1, 4, 0, 0]]),
            matrices: [permutation(&[0, 3, 2, 4, 1]), identity(5)],
        },
    ];
    let edits = [
        EditEvent::deletion(0, 1),
        EditEvent::deletion(0, 2),
        EditEvent::insertion(0, 1, 4),
    ];
    check_row(&mut out, name, 1, &st, None, &table[0])?;
    for (i, e) in edits.into_iter().enumerate() {
        let r = schemes::scheme_p_apply_edit(&mut st, e)?;
        check_row(&mut out, name, i + 2, &st, Some(&r), &table[i + 1])?;
    }
    Ok(out)
}

fn vandermonde4() -> Rows {
    rows(&[[1, 1, 1, 1], [1, 2, 4, 3], [1, 3, 4, 2], [1, 4, 1, 4]])
}

pub fn demo_scheme_v() -> Result<String> {
    let name = "scheme-v";
    let mut out = String::from("[3,2] single parity code over F_5, ell = 4\n");
    let mut st = parity_state(
        SchemeKind::V,
        4,
        0,
        vec![vec![0, 1, 0, 1], vec![1, 0, 1, 0]],
    )?;
    let table = [
        Expected {
            label: "initial",
            blocks: vec![vec![0, 1, 0, 1], vec![1, 0, 1, 0]],
            d: None,
            tensor: rows(&[[2, 1, 0, 2], [2, 4, 0, 3], [4, 0, 0, 0]]),
            matrices: [vandermonde4(), vandermonde4()],
        },
        Expected {
            label: "user 1 deletes position 4, user 2 deletes position 1",
            blocks: vec![vec![0, 1, 0], vec![0, 1, 0]],
            d: Some(rows(&[[1, 4, 1, 4], [1, 1, 1, 1], [2, 0, 2, 0]])),
            tensor: rows(&[[1, 2, 4], [1, 3, 4], [2, 0, 3]]),
            matrices: [
                rows(&[[1, 1, 1], [1, 2, 4], [1, 3, 4]]),
                rows(&[[1, 2, 4], [1, 3, 4], [1, 4, 1]]),
            ],
        },
    ];
    check_row(&mut out, name, 1, &st, None, &table[0])?;
    let r = schemes::scheme_v_round(
        &mut st,
        &[
            EditEvent::deletion_of(0, 3, 1),
            EditEvent::deletion_of(1, 0, 1),
        ],
    )?;
    check_row(&mut out, name, 2, &st, Some(&r), &table[1])?;
    Ok(out)
}

fn hybrid_matrix(head_rows: &[usize]) -> Rows {
    let v = vandermonde4();
    let mut m: Rows = head_rows
        .iter()
        .map(|&r| {
            let mut row = v[r].clone();
            row.extend([0, 0, 0]);
            row
        })
        .collect();
    for i in 0..3 {
        let mut row = vec![0; 7];
        row[4 + i] = 1;
        m.push(row);
    }
    m
}

pub fn demo_scheme_h() -> Result<String> {
    let name = "scheme-h";
    let mut out = String::from("[3,2] single parity code over F_5, ell = 7, identity tail 3\n");
    let mut st = parity_state(
        SchemeKind::H,
        7,
        3,
        vec![vec![1, 1, 1, 1, 1, 1, 1], vec![1, 2, 3, 4, 3, 2, 1]],
    )?;
    let table = [
        Expected {
            label: "initial",
            blocks: vec![vec![1; 7], vec![1, 2, 3, 4, 3, 2, 1]],
            d: None,
            tensor: rows(&[
                [4, 0, 0, 0, 1, 1, 1],
                [0, 0, 0, 4, 3, 2, 1],
                [4, 0, 0, 4, 4, 3, 2],
            ]),
            matrices: [hybrid_matrix(&[0, 1, 2, 3]), hybrid_matrix(&[0, 1, 2, 3])],
        },
        Expected {
            label: "user 1 deletes position 3",
            blocks: vec![vec![1; 6], vec![1, 2, 3, 4, 3, 2, 1]],
            d: Some(rows(&[
                [1, 3, 4, 2, 0, 0, 0],
                [0; 7],
                [1, 3, 4, 2, 0, 0, 0],
            ])),
            tensor: rows(&[
                [3, 2, 1, 3, 1, 1, 1],
                [0, 0, 0, 4, 3, 2, 1],
                [3, 2, 1, 2, 4, 3, 2],
            ]),
            matrices: [hybrid_matrix(&[0, 1, 3]), hybrid_matrix(&[0, 1, 2, 3])],
        },
        Expected {
            label: "user 2 deletes position 5",
            blocks: vec![vec![1; 6], vec![1, 2, 3, 4, 2, 1, 0]],
            d: Some(rows(&[
                [0; 7],
                [0, 0, 0, 0, 1, 1, 1],
                [0, 0, 0, 0, 1, 1, 1],
            ])),
            tensor: rows(&[
                [3, 2, 1, 3, 1, 1, 1],
                [0, 0, 0, 4, 2, 1, 0],
                [3, 2, 1, 2, 3, 2, 1],
            ]),
            matrices: [hybrid_matrix(&[0, 1, 3]), hybrid_matrix(&[0, 1, 2, 3])],
        },
        Expected {
            label: "user 2 deletes position 1",
            blocks: vec![vec![1; 6], vec![2, 3, 4, 2, 1, 0]],
            d: Some(rows(&[
                [0; 7],
                [1, 1, 1, 1, 0, 0, 0],
                [1, 1, 1, 1, 0, 0, 0],
            ])),
            tensor: rows(&[
                [3, 2, 1, 3, 1, 1, 1],
                [4, 4, 4, 3, 2, 1, 0],
                [2, 1, 0, 1, 3, 2, 1],
            ]),
            matrices: [hybrid_matrix(&[0, 1, 3]), hybrid_matrix(&[1, 2, 3])],
        },
    ];
    let edits = [
        EditEvent::deletion(0, 2),
        EditEvent::deletion(1, 4),
        EditEvent::deletion(1, 0),
    ];
    check_row(&mut out, name, 1, &st, None, &table[0])?;
    for (i, e) in edits.into_iter().enumerate() {
        let r = schemes::scheme_h_apply_edit(&mut st, e)?;
        check_row(&mut out, name, i + 2, &st, Some(&r), &table[i + 1])?;
    }
    Ok(out)
}

pub fn demo_vt() -> Result<String> {
    let field = FieldSpec::new(5)?;
    let x = [1u64, 2, 3, 4, 4];
    let syn = vt_syndrome(field, &x)?;
    let mut out = format!(
        "x = {x:?} over F_5, syndrome (nu1, nu2) = ({}, {})\n",
        syn.nu1, syn.nu2
    );
    if syn != (VtSyndrome { nu1: 4, nu2: 0 }) {
        return Err(Error::DemoMismatch(format!(
            "vt: syndrome {syn:?}, expected (4, 0)"
        )));
    }
    for i in 0..x.len() {
        let mut y = x.to_vec();
        y.remove(i);
        let r = vt_recover(field, &y, syn)?;
        let _ = writeln!(
            out,
            "delete position {}: {y:?} -> insert {} at position {} -> {:?}",
            i + 1,
            r.value,
            r.position + 1,
            r.recovered
        );
        if r.recovered != x {
            return Err(Error::DemoMismatch(format!(
                "vt: deletion at {} recovered {:?}",
                i + 1,
                r.recovered
            )));
        }
    }
    Ok(out)
}

/// Removes a shared pattern from two of three blocks under Vandermonde
/// matrices over a `[5,3]` Reed-Solomon code.
pub fn demo_dedup() -> Result<String> {
    let code = CodeSpec::rs_systematic(5, 3, 11)?;
    let field = FieldSpec::new(11)?;
    let blocks = vec![
        vec![3, 7, 7, 1, 9, 2],
        vec![7, 1, 0, 4, 4, 5],
        vec![2, 2, 2, 2, 2, 2],
    ];
    let cfg = initial_config(SchemeKind::V, field, 3, 6, 0)?;
    let mut st = SyncState::new(code, cfg, blocks.clone())?;
    let pattern = [7u64, 1];
    let mut out = format!("[5,3] Reed-Solomon code over F_11, pattern {pattern:?}\n");
    let _ = writeln!(out, "before: {blocks:?}");
    let r = dedup_round(&mut st, &pattern)?;
    let after = st.blocks();
    let _ = writeln!(out, "after:  {after:?}");
    let _ = writeln!(
        out,
        "bits: {} total over {} messages, stored width {}",
        r.messages.iter().map(|m| m.bits).sum::<u64>(),
        r.messages.len(),
        st.ell()
    );
    let want = vec![vec![3, 7, 9, 2], vec![0, 4, 4, 5], vec![2, 2, 2, 2, 2, 2]];
    if after != want {
        return Err(Error::DemoMismatch(format!(
            "dedup: got {after:?}, expected {want:?}"
        )));
    }
    let report = st.verify(64)?;
    if !report.ok() {
        return Err(Error::DemoMismatch(format!("dedup: {report:?}")));
    }
    let _ = writeln!(
        out,
        "reconstruction and repair checked on {} subsets",
        report.subsets_checked
    );
    Ok(out)
}

/// Runs the demo called `name`.
pub fn run_demo(name: &str) -> Result<String> {
    match name {
        "scheme-p" => demo_scheme_p(),
        "scheme-v" => demo_scheme_v(),
        "scheme-h" => demo_scheme_h(),
        "vt" => demo_vt(),
        "dedup" => demo_dedup(),
        other => Err(Error::InvalidParameter(format!(
            "unknown demo {other}; expected one of {}",
            DEMOS.join(", ")
        ))),
    }
}
