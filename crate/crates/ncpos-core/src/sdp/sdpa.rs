//! SDPA sparse format (`.dat-s`).
//!
//! Our primal `min ⟨C, X⟩, ⟨A_i, X⟩ = b_i` is the SDPA dual with `F_i = A_i`,
//! `c = b` and `F_0 = −C`. Runs of consecutive `1×1` blocks are written as
//! one diagonal block and expanded again on import.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::{Entry, Functional, SdpProblem};
use crate::error::{Error, Result};
use crate::linalg::c;

/// SDPA block layout: `(sdpa block, offset)` for each of our blocks.
fn layout(blocks: &[usize]) -> (Vec<i64>, Vec<(usize, usize)>) {
    let mut sizes: Vec<i64> = Vec::new();
    let mut place = Vec::with_capacity(blocks.len());
    for &n in blocks {
        if n == 1 {
            let idx = sizes.len().wrapping_sub(1);
            if let Some(last) = sizes.last_mut().filter(|s| **s < 0) {
                place.push((idx, (-*last) as usize));
                *last -= 1;
                continue;
            }
            sizes.push(-1);
            place.push((sizes.len() - 1, 0));
        } else {
            sizes.push(n as i64);
            place.push((sizes.len() - 1, 0));
        }
    }
    (sizes, place)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

/// Writes the problem in SDPA sparse format. Complex problems are realified first.
pub fn export_sdpa(p: &SdpProblem) -> String {
    let owned;
    let p = if p.is_real() {
        p
    } else {
        owned = p.realified();
        &owned
    };
    let (sizes, place) = layout(&p.blocks);
    let mut out = String::new();
    let _ = writeln!(out, "{}", p.constraints.len());
    let _ = writeln!(out, "{}", sizes.len());
    let sizes_line: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "{}", sizes_line.join(" "));
    let rhs: Vec<String> = p.constraints.iter().map(|c| fmt_f64(c.rhs)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));
    let write_matrix = |out: &mut String, matno: usize, f: &Functional, sign: f64| {
        for e in f.entries() {
            let (blk, off) = place[e.block];
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                matno,
                blk + 1,
                off + e.row + 1,
                off + e.col + 1,
                fmt_f64(sign * e.value.re)
            );
        }
    };
    write_matrix(&mut out, 0, &p.objective, -1.0);
    for (i, con) in p.constraints.iter().enumerate() {
        write_matrix(&mut out, i + 1, &con.functional, 1.0);
    }
    out
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(format!("SDPA: {}", msg.into()))
}

/// Reads an SDPA sparse file. Negative (diagonal) blocks become runs of `1×1` blocks.
pub fn import_sdpa(text: &str) -> Result<SdpProblem> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let numbers = |line: &str| -> Vec<String> {
        line.split(|ch: char| ch.is_whitespace() || ",{}()".contains(ch))
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    };
    let mut header: Vec<String> = Vec::new();
    // m, nblocks, the block sizes and the rhs may share or span lines.
    let mut next_tokens = |want: usize, header: &mut Vec<String>| -> Result<Vec<String>> {
        while header.len() < want {
            let line = lines.next().ok_or_else(|| parse_err("unexpected end of header"))?;
            // Header lines may end in free text such as `=mdim`.
            header.extend(
                numbers(line)
                    .into_iter()
                    .take_while(|t| t.starts_with(|ch: char| ch.is_ascii_digit() || "+-.".contains(ch))),
            );
        }
        Ok(header.drain(..want).collect())
    };
    let int = |s: &str| -> Result<i64> { s.parse::<i64>().map_err(|_| parse_err(format!("bad integer {s:?}"))) };
    let float = |s: &str| -> Result<f64> { s.parse::<f64>().map_err(|_| parse_err(format!("bad number {s:?}"))) };

    let m = int(&next_tokens(1, &mut header)?[0])?;
    let nb = int(&next_tokens(1, &mut header)?[0])?;
    if m < 0 || nb <= 0 {
        return Err(parse_err(format!("bad sizes m = {m}, nblocks = {nb}")));
    }
    let sizes: Vec<i64> = next_tokens(nb as usize, &mut header)?.iter().map(|s| int(s)).collect::<Result<_>>()?;
    let rhs: Vec<f64> = next_tokens(m as usize, &mut header)?.iter().map(|s| float(s)).collect::<Result<_>>()?;
    if !header.is_empty() {
        return Err(parse_err("trailing tokens after the rhs vector"));
    }

    let mut blocks = Vec::new();
    // First of our blocks for each SDPA block.
    let mut first = Vec::new();
    for &s in &sizes {
        first.push(blocks.len());
        match s {
            0 => return Err(parse_err("zero block size")),
            s if s > 0 => blocks.push(s as usize),
            s => blocks.extend(core::iter::repeat_n(1, (-s) as usize)),
        }
    }
    let mut p = SdpProblem::new(blocks);
    let mut funcs = alloc::vec![Functional::new(); m as usize + 1];
    for line in lines {
        let t = numbers(line);
        if t.len() < 5 {
            return Err(parse_err(format!("short entry line {line:?}")));
        }
        let matno = int(&t[0])?;
        let blk = int(&t[1])?;
        let (i, j) = (int(&t[2])?, int(&t[3])?);
        let v = float(&t[4])?;
        if matno < 0 || matno > m || blk < 1 || blk > nb || i < 1 || j < 1 {
            return Err(parse_err(format!("entry out of range {line:?}")));
        }
        let (i, j) = ((i.min(j) - 1) as usize, (i.max(j) - 1) as usize);
        let size = sizes[blk as usize - 1];
        let (block, row, col) = if size < 0 {
            if i != j || i as i64 >= -size {
                return Err(parse_err(format!("bad diagonal-block entry {line:?}")));
            }
            (first[blk as usize - 1] + i, 0, 0)
        } else {
            if j as i64 >= size {
                return Err(parse_err(format!("entry outside block {line:?}")));
            }
            (first[blk as usize - 1], i, j)
        };
        let sign = if matno == 0 { -1.0 } else { 1.0 };
        let f = &mut funcs[matno as usize];
        let prev = f.entries.get(&(block, row, col)).map_or(0.0, |z| z.re);
        f.set_entry(Entry { block, row, col, value: c(prev + sign * v, 0.0) });
    }
    let mut funcs = funcs.into_iter();
    p.objective = funcs.next().unwrap_or_default();
    for (f, b) in funcs.zip(rhs) {
        p.add_constraint(f, b);
    }
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::super::{solve, tests::random_feasible_problem, SdpOptions};
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_merges_scalar_runs() {
        let (sizes, place) = layout(&[1, 1, 3, 1, 2, 1, 1, 1]);
        assert_eq!(sizes, vec![-2, 3, -1, 2, -3]);
        assert_eq!(place, vec![(0, 0), (0, 1), (1, 0), (2, 0), (3, 0), (4, 0), (4, 1), (4, 2)]);
    }

    #[test]
    fn small_file_reads_as_expected() {
        let text = "\"example\n2 =mdim\n2 =nblocks\n{2, -2}\n10.0 20.0\n0 1 1 1 -1.0\n0 2 2 2 -3.0\n1 1 1 2 1.0\n2 2 1 1 1.0\n2 1 2 2 1.0\n";
        let p = import_sdpa(text).unwrap();
        assert_eq!(p.blocks, vec![2, 1, 1]);
        assert_eq!(p.constraints.len(), 2);
        assert_eq!(p.constraints[1].rhs, 20.0);
        assert_eq!(p.objective.entries().count(), 2);
        assert_eq!(p.objective.dense_block(2, 1)[(0, 0)].re, 3.0);
        assert_eq!(p.constraints[0].functional.dense_block(0, 2)[(1, 0)].re, 1.0);
    }

    #[test]
    fn export_import_preserves_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_feasible_problem(&mut rng, &[3, 1, 1, 2], 4);
        let q = import_sdpa(&export_sdpa(&p)).unwrap();
        let realified = if p.is_real() { p.clone() } else { p.realified() };
        assert_eq!(q.blocks, realified.blocks);
        let a = solve(&p, &SdpOptions::default()).unwrap();
        let b = solve(&q, &SdpOptions::default()).unwrap();
        assert!((a.primal_objective - b.primal_objective).abs() < 1e-6);
    }

    #[test]
    fn malformed_input_rejected() {
        assert!(import_sdpa("").is_err());
        assert!(import_sdpa("1\n1\n2\n1.0\n1 1 3 1 1.0\n").is_err());
        assert!(import_sdpa("1\n1\n-2\n1.0\n1 1 1 2 1.0\n").is_err());
    }
}
