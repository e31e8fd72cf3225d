//! SDPA sparse text format.
//!
//! An `SdpProblem` is written as the SDPA *dual* form
//! `max <F0, Y> s.t. <F_i, Y> = c_i, Y >= 0`, i.e. `F_i = A_i`, `c_i = b_i`,
//! `F0 = -C`. Free scalars `u_k` are split as `u_k = Y[2k] - Y[2k+1]` in a
//! trailing diagonal (LP) block, and a `* free <n>` comment line records that
//! so [`read`] can fold them back.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{BlockEntry, EqualityRow, LinearRow, SdpProblem};
use crate::error::{Error, Result};

/// `(matno, block, i, j) -> value`, 0-based block and indices, `i <= j`.
type EntryMap = BTreeMap<(usize, usize, usize, usize), f64>;

fn collect_row(out: &mut EntryMap, matno: usize, row: &LinearRow, sign: f64, nblocks: usize) {
    for (e, c) in &row.blocks {
        let v = if e.i == e.j { *c } else { 0.5 * c };
        *out.entry((matno, e.block, e.i, e.j)).or_insert(0.0) += sign * v;
    }
    for &(k, c) in &row.free {
        *out.entry((matno, nblocks, 2 * k, 2 * k)).or_insert(0.0) += sign * c;
        *out.entry((matno, nblocks, 2 * k + 1, 2 * k + 1)).or_insert(0.0) -= sign * c;
    }
}

pub fn write(prob: &SdpProblem) -> String {
    let nblocks = prob.block_sizes.len();
    let mut s = String::new();
    s.push_str("\"pars-reduce SDP dump\n");
    if prob.n_free > 0 {
        let _ = writeln!(s, "* free {}", prob.n_free);
    }
    let _ = writeln!(s, "{}", prob.equalities.len());
    let _ = writeln!(s, "{}", nblocks + usize::from(prob.n_free > 0));
    let mut sizes: Vec<String> = prob.block_sizes.iter().map(|n| n.to_string()).collect();
    if prob.n_free > 0 {
        sizes.push(format!("-{}", 2 * prob.n_free));
    }
    let _ = writeln!(s, "{}", sizes.join(" "));
    let rhs: Vec<String> = prob.equalities.iter().map(|r| format!("{:e}", r.rhs)).collect();
    let _ = writeln!(s, "{}", rhs.join(" "));

    let mut entries = EntryMap::new();
    collect_row(&mut entries, 0, &prob.objective, -1.0, nblocks);
    for (i, r) in prob.equalities.iter().enumerate() {
        collect_row(&mut entries, i + 1, &r.lhs, 1.0, nblocks);
    }
    for ((mat, blk, i, j), v) in entries {
        if v != 0.0 {
            let _ = writeln!(s, "{} {} {} {} {:e}", mat, blk + 1, i + 1, j + 1, v);
        }
    }
    s
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse::<T>().map_err(|_| Error::Parse(format!("SDPA line {line}: cannot parse `{tok}`")))
}

pub fn read(text: &str) -> Result<SdpProblem> {
    let mut n_free = 0usize;
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('"') || t.starts_with('*') {
            let body = t.trim_start_matches('*').trim();
            if let Some(rest) = body.strip_prefix("free") {
                n_free = parse_num(rest.trim(), ln + 1)?;
            }
            continue;
        }
        let cleaned: String = t.chars().map(|c| if ",{}()".contains(c) { ' ' } else { c }).collect();
        for tok in cleaned.split_whitespace() {
            tokens.push((ln + 1, tok.to_string()));
        }
    }
    let mut it = tokens.into_iter();
    let mut next = |what: &str| -> Result<(usize, String)> {
        it.next().ok_or_else(|| Error::Parse(format!("SDPA: unexpected end of input reading {what}")))
    };
    let (l, t) = next("m")?;
    let m: usize = parse_num(&t, l)?;
    let (l, t) = next("nBlocks")?;
    let nb: usize = parse_num(&t, l)?;
    let mut sizes: Vec<i64> = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (l, t) = next("blockStruct")?;
        sizes.push(parse_num(&t, l)?);
    }
    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        let (l, t) = next("c")?;
        rhs.push(parse_num::<f64>(&t, l)?);
    }

    let lp_block = if n_free > 0 {
        match sizes.last() {
            Some(&s) if s == -(2 * n_free as i64) => Some(nb - 1),
            _ => return Err(Error::Parse("SDPA: `free` comment without a matching trailing LP block".into())),
        }
    } else {
        None
    };
    let psd_blocks = lp_block.unwrap_or(nb);
    let mut block_sizes = Vec::with_capacity(psd_blocks);
    for &s in &sizes[..psd_blocks] {
        if s <= 0 {
            return Err(Error::Parse("SDPA: diagonal blocks are only supported for free variables".into()));
        }
        block_sizes.push(s as usize);
    }

    let mut rows: Vec<LinearRow> = vec![LinearRow::default(); m + 1];
    let mut free_acc: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); m + 1];
    let mut rest = it.collect::<Vec<_>>().into_iter();
    loop {
        let Some((l, t)) = rest.next() else { break };
        let mat: usize = parse_num(&t, l)?;
        let mut field = |what: &str| -> Result<(usize, String)> {
            rest.next().ok_or_else(|| Error::Parse(format!("SDPA line {l}: truncated entry ({what})")))
        };
        let (l1, t1) = field("block")?;
        let blk: usize = parse_num(&t1, l1)?;
        let (l2, t2) = field("i")?;
        let i: usize = parse_num(&t2, l2)?;
        let (l3, t3) = field("j")?;
        let j: usize = parse_num(&t3, l3)?;
        let (l4, t4) = field("value")?;
        let v: f64 = parse_num(&t4, l4)?;
        if mat > m || blk == 0 || blk > nb || i == 0 || j == 0 {
            return Err(Error::Parse(format!("SDPA line {l}: entry out of range")));
        }
        let sign = if mat == 0 { -1.0 } else { 1.0 };
        let (blk, i, j) = (blk - 1, i - 1, j - 1);
        if Some(blk) == lp_block {
            if i != j {
                return Err(Error::Parse(format!("SDPA line {l}: off-diagonal entry in LP block")));
            }
            // only the `+u` half carries information
            if i % 2 == 0 {
                *free_acc[mat].entry(i / 2).or_insert(0.0) += sign * v;
            }
            continue;
        }
        let e = BlockEntry::new(blk, i, j);
        if e.j >= block_sizes[blk] {
            return Err(Error::Parse(format!("SDPA line {l}: index exceeds block size")));
        }
        let c = if e.i == e.j { v } else { 2.0 * v };
        rows[mat].blocks.push((e, sign * c));
    }
    for (row, acc) in rows.iter_mut().zip(free_acc) {
        row.free = acc.into_iter().collect();
    }
    let mut rows = rows.into_iter();
    let objective = rows.next().unwrap_or_default();
    let equalities = rows.zip(rhs).map(|(lhs, rhs)| EqualityRow { lhs, rhs }).collect();
    let prob = SdpProblem { block_sizes, n_free, equalities, objective };
    prob.validate()?;
    Ok(prob)
}
