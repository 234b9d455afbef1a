//! Textual cycle format (one instruction per line) and DOT export.
//!
//! ```text
//! cycle l_top=9 l_std=5
//! relax L9 gsf l1 cf
//! relax L9 jacobi weighted lex w=1.25
//! restrict L9
//! vsolve L5
//! cgc L6 alpha=1.15
//! ```
//!
//! Weighted hybrid sweeps carry `wi=`/`wo=`; weighted Jacobi carries `w=`.
//! Parsing and emission round-trip losslessly.

use crate::cycle::{FlexProgram, Instr};
use crate::smoother::{Ordering, SmootherKind, SmootherSpec, SmootherVariant};
use crate::Error;

fn kind_str(kind: SmootherKind) -> &'static str {
    match kind {
        SmootherKind::Jacobi => "jacobi",
        SmootherKind::Gsf => "gsf",
        SmootherKind::Gsb => "gsb",
        SmootherKind::Gss => "gss",
    }
}

fn fmt_weight(w: f64) -> String {
    // Shortest round-trip float formatting keeps emission stable.
    format!("{w}")
}

pub fn emit_program(prog: &FlexProgram) -> String {
    let mut out = format!("cycle l_top={} l_std={}\n", prog.l_top, prog.l_std);
    for instr in &prog.instrs {
        match *instr {
            Instr::Relax { level, spec } => {
                let variant = match spec.variant {
                    SmootherVariant::Weighted => "weighted",
                    SmootherVariant::L1 => "l1",
                };
                let ordering = match (spec.ordering, spec.cf_reverse) {
                    (Ordering::Lex, _) => "lex",
                    (Ordering::Cf, false) => "cf",
                    (Ordering::Cf, true) => "fc",
                };
                out.push_str(&format!(
                    "relax L{level} {} {variant} {ordering}",
                    kind_str(spec.kind)
                ));
                if spec.variant == SmootherVariant::Weighted {
                    match spec.kind {
                        SmootherKind::Jacobi => {
                            out.push_str(&format!(" w={}", fmt_weight(spec.omega)))
                        }
                        _ => out.push_str(&format!(
                            " wi={} wo={}",
                            fmt_weight(spec.omega_i),
                            fmt_weight(spec.omega_o)
                        )),
                    }
                }
                out.push('\n');
            }
            Instr::Restrict { from_level } => {
                out.push_str(&format!("restrict L{from_level}\n"));
            }
            Instr::CoarseCorrection { to_level, alpha } => {
                out.push_str(&format!("cgc L{to_level} alpha={}\n", fmt_weight(alpha)));
            }
            Instr::StdVSolve { level } => {
                out.push_str(&format!("vsolve L{level}\n"));
            }
        }
    }
    out
}

fn parse_level(tok: Option<&str>, line_no: usize) -> Result<usize, Error> {
    let tok = tok.ok_or_else(|| Error::Io(format!("line {line_no}: missing level")))?;
    let digits = tok
        .strip_prefix('L')
        .or_else(|| tok.strip_prefix('l'))
        .ok_or_else(|| Error::Io(format!("line {line_no}: level must look like L9")))?;
    digits
        .parse()
        .map_err(|_| Error::Io(format!("line {line_no}: bad level '{tok}'")))
}

fn parse_kv(tok: &str, key: &str, line_no: usize) -> Result<f64, Error> {
    tok.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| Error::Io(format!("line {line_no}: expected {key}=<value>, got '{tok}'")))?
        .parse()
        .map_err(|_| Error::Io(format!("line {line_no}: bad value in '{tok}'")))
}

pub fn parse_program(text: &str) -> Result<FlexProgram, Error> {
    let mut l_top = None;
    let mut l_std = None;
    let mut instrs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let head = toks.next().unwrap();
        match head {
            "cycle" => {
                for tok in toks.by_ref() {
                    if let Some(v) = tok.strip_prefix("l_top=") {
                        l_top = Some(v.parse().map_err(|_| {
                            Error::Io(format!("line {line_no}: bad l_top '{tok}'"))
                        })?);
                    } else if let Some(v) = tok.strip_prefix("l_std=") {
                        l_std = Some(v.parse().map_err(|_| {
                            Error::Io(format!("line {line_no}: bad l_std '{tok}'"))
                        })?);
                    } else {
                        return Err(Error::Io(format!(
                            "line {line_no}: unknown cycle field '{tok}'"
                        )));
                    }
                }
            }
            "relax" => {
                let level = parse_level(toks.next(), line_no)?;
                let kind = match toks.next() {
                    Some("jacobi") => SmootherKind::Jacobi,
                    Some("gsf") => SmootherKind::Gsf,
                    Some("gsb") => SmootherKind::Gsb,
                    Some("gss") => SmootherKind::Gss,
                    other => {
                        return Err(Error::Io(format!(
                            "line {line_no}: unknown smoother {other:?}"
                        )))
                    }
                };
                let variant = match toks.next() {
                    Some("weighted") => SmootherVariant::Weighted,
                    Some("l1") => SmootherVariant::L1,
                    other => {
                        return Err(Error::Io(format!(
                            "line {line_no}: unknown variant {other:?}"
                        )))
                    }
                };
                let (ordering, cf_reverse) = match toks.next() {
                    Some("lex") => (Ordering::Lex, false),
                    Some("cf") => (Ordering::Cf, false),
                    Some("fc") => (Ordering::Cf, true),
                    other => {
                        return Err(Error::Io(format!(
                            "line {line_no}: unknown ordering {other:?}"
                        )))
                    }
                };
                let mut spec = match variant {
                    SmootherVariant::L1 => SmootherSpec::l1(kind, ordering),
                    SmootherVariant::Weighted => match kind {
                        SmootherKind::Jacobi => {
                            let tok = toks.next().ok_or_else(|| {
                                Error::Io(format!("line {line_no}: weighted jacobi needs w="))
                            })?;
                            let w = parse_kv(tok, "w", line_no)?;
                            SmootherSpec::jacobi(SmootherVariant::Weighted, ordering, w)
                        }
                        _ => {
                            let ti = toks.next().ok_or_else(|| {
                                Error::Io(format!("line {line_no}: weighted GS needs wi="))
                            })?;
                            let wi = parse_kv(ti, "wi", line_no)?;
                            let to = toks.next().ok_or_else(|| {
                                Error::Io(format!("line {line_no}: weighted GS needs wo="))
                            })?;
                            let wo = parse_kv(to, "wo", line_no)?;
                            SmootherSpec::hybrid(kind, ordering, wi, wo)
                        }
                    },
                };
                spec.cf_reverse = cf_reverse;
                instrs.push(Instr::Relax { level, spec });
            }
            "restrict" => {
                let level = parse_level(toks.next(), line_no)?;
                instrs.push(Instr::Restrict { from_level: level });
            }
            "cgc" => {
                let level = parse_level(toks.next(), line_no)?;
                let tok = toks
                    .next()
                    .ok_or_else(|| Error::Io(format!("line {line_no}: cgc needs alpha=")))?;
                let alpha = parse_kv(tok, "alpha", line_no)?;
                instrs.push(Instr::CoarseCorrection {
                    to_level: level,
                    alpha,
                });
            }
            "vsolve" => {
                let level = parse_level(toks.next(), line_no)?;
                instrs.push(Instr::StdVSolve { level });
            }
            other => {
                return Err(Error::Io(format!(
                    "line {line_no}: unknown instruction '{other}'"
                )));
            }
        }
        if let Some(extra) = toks.next() {
            return Err(Error::Io(format!(
                "line {line_no}: trailing token '{extra}'"
            )));
        }
    }
    // Without a header, infer the range from the instructions.
    let inferred_top = instrs
        .iter()
        .map(|i| match *i {
            Instr::Relax { level, .. } => level,
            Instr::Restrict { from_level } => from_level,
            Instr::CoarseCorrection { to_level, .. } => to_level,
            Instr::StdVSolve { level } => level,
        })
        .max()
        .unwrap_or(0);
    let inferred_std = instrs
        .iter()
        .filter_map(|i| match *i {
            Instr::StdVSolve { level } => Some(level),
            _ => None,
        })
        .min()
        .unwrap_or(0);
    Ok(FlexProgram::new(
        instrs,
        l_top.unwrap_or(inferred_top),
        l_std.unwrap_or(inferred_std),
    ))
}

/// DOT rendering of the cycle shape: one node per instruction placed by
/// level, colored by smoother kind, edges in execution order.
pub fn export_dot(prog: &FlexProgram) -> String {
    let color = |spec: &SmootherSpec| match (spec.kind, spec.variant) {
        (SmootherKind::Jacobi, SmootherVariant::Weighted) => "gold",
        (SmootherKind::Jacobi, SmootherVariant::L1) => "khaki",
        (SmootherKind::Gsf, SmootherVariant::Weighted) => "steelblue",
        (SmootherKind::Gsf, SmootherVariant::L1) => "lightblue",
        (SmootherKind::Gsb, SmootherVariant::Weighted) => "tomato",
        (SmootherKind::Gsb, SmootherVariant::L1) => "lightsalmon",
        (SmootherKind::Gss, _) => "mediumpurple",
    };
    let mut out = String::from("digraph cycle {\n  rankdir=LR;\n  node [style=filled];\n");
    out.push_str(&format!(
        "  start [label=\"x0 (L{})\", shape=circle, fillcolor=white];\n",
        prog.l_top
    ));
    let mut ranks: Vec<(usize, usize)> = Vec::new(); // (node index, level)
    for (i, instr) in prog.instrs.iter().enumerate() {
        let (label, shape, fill, level) = match instr {
            Instr::Relax { level, spec } => (
                format!("{} {:?}", kind_str(spec.kind), spec.ordering),
                "ellipse",
                color(spec),
                *level,
            ),
            Instr::Restrict { from_level } => {
                ("restrict".to_string(), "invtriangle", "gray80", *from_level)
            }
            Instr::CoarseCorrection { to_level, alpha } => {
                (format!("cgc a={alpha}"), "triangle", "palegreen", *to_level)
            }
            Instr::StdVSolve { level } => ("V-solve".to_string(), "box", "gray60", *level),
        };
        out.push_str(&format!(
            "  n{i} [label=\"{label}\", shape={shape}, fillcolor={fill}];\n"
        ));
        ranks.push((i, level));
    }
    out.push_str("  start");
    for i in 0..prog.instrs.len() {
        out.push_str(&format!(" -> n{i}"));
    }
    out.push_str(";\n");
    // Group nodes of equal level so the V-shape is visible.
    let mut levels: Vec<usize> = ranks.iter().map(|&(_, l)| l).collect();
    levels.sort_unstable();
    levels.dedup();
    for l in levels {
        let members: Vec<String> = ranks
            .iter()
            .filter(|&&(_, lvl)| lvl == l)
            .map(|&(i, _)| format!("n{i}"))
            .collect();
        if members.len() > 1 {
            out.push_str(&format!("  {{ rank=same; {} }}\n", members.join("; ")));
        }
    }
    out.push_str("}\n");
    out
}
