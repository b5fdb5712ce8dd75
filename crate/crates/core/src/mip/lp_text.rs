//! CPLEX-style LP text export and import.
//!
//! The writer emits one constraint per line and an explicit bound line
//! for every variable, in declaration order. The parser registers
//! variables from the Bounds section first, so a model written by
//! `write_lp_string` parses back with identical variable ordering.
//! Numbers use Rust's shortest round-trip formatting, so coefficients
//! survive the trip bit-for-bit. Constraints must fit on one line.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::model::{ConstraintSense, MipModel, ObjectiveSense, VarKind};
use crate::error::{parse_err, Result};

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        String::from("+inf")
    } else if v == f64::NEG_INFINITY {
        String::from("-inf")
    } else {
        let mut s = format!("{v}");
        if s == "-0" {
            s = String::from("0");
        }
        s
    }
}

fn fmt_expr(terms: &[(usize, f64)], names: &[String]) -> String {
    if terms.is_empty() {
        return String::from("0 __zero__");
    }
    let mut s = String::new();
    for (pos, &(j, c)) in terms.iter().enumerate() {
        if pos == 0 {
            if c < 0.0 {
                s.push_str("- ");
            }
        } else if c < 0.0 {
            s.push_str(" - ");
        } else {
            s.push_str(" + ");
        }
        s.push_str(&fmt_num(c.abs()));
        s.push(' ');
        s.push_str(&names[j]);
    }
    s
}

pub fn write_lp_string(model: &MipModel) -> String {
    let names: Vec<String> = model.variables.iter().map(|v| v.name.clone()).collect();
    let mut out = String::new();
    out.push_str(match model.objective_sense {
        ObjectiveSense::Minimize => "Minimize\n",
        ObjectiveSense::Maximize => "Maximize\n",
    });
    out.push_str(" obj: ");
    out.push_str(&fmt_expr(&model.objective, &names));
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let op = match c.sense {
            ConstraintSense::Le => "<=",
            ConstraintSense::Ge => ">=",
            ConstraintSense::Eq => "=",
        };
        out.push_str(&format!(
            " {}: {} {} {}\n",
            c.name,
            fmt_expr(&c.terms, &names),
            op,
            fmt_num(c.rhs)
        ));
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        let line = if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            format!(" {} free\n", v.name)
        } else if v.lower == v.upper {
            format!(" {} = {}\n", v.name, fmt_num(v.lower))
        } else if v.upper == f64::INFINITY {
            format!(" {} >= {}\n", v.name, fmt_num(v.lower))
        } else if v.lower == f64::NEG_INFINITY {
            format!(" {} <= {}\n", v.name, fmt_num(v.upper))
        } else {
            format!(" {} <= {} <= {}\n", fmt_num(v.lower), v.name, fmt_num(v.upper))
        };
        out.push_str(&line);
    }
    let binaries: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n ");
        out.push_str(&binaries.join(" "));
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn tokenize(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        match ch {
            c if c.is_whitespace() => flush(&mut cur, &mut out),
            '+' | '-' => {
                flush(&mut cur, &mut out);
                out.push(ch.to_string());
            }
            '<' | '>' => {
                flush(&mut cur, &mut out);
                if i + 1 < chars.len() && chars[i + 1] == '=' {
                    i += 1;
                }
                out.push(if ch == '<' { "<=".into() } else { ">=".into() });
            }
            '=' => {
                flush(&mut cur, &mut out);
                out.push("=".into());
            }
            ':' => {
                flush(&mut cur, &mut out);
                out.push(":".into());
            }
            _ => cur.push(ch),
        }
        i += 1;
    }
    flush(&mut cur, &mut out);
    out
}

fn flush(cur: &mut String, out: &mut Vec<String>) {
    if !cur.is_empty() {
        out.push(core::mem::take(cur));
    }
}

fn is_number(tok: &str) -> bool {
    tok.parse::<f64>().is_ok() || tok.eq_ignore_ascii_case("inf")
}

/// Parses an optionally signed number starting at `*i`, advancing it.
fn parse_num(tokens: &[String], i: &mut usize) -> Result<f64> {
    let mut sign = 1.0;
    while *i < tokens.len() && (tokens[*i] == "+" || tokens[*i] == "-") {
        if tokens[*i] == "-" {
            sign = -sign;
        }
        *i += 1;
    }
    if *i >= tokens.len() {
        return Err(parse_err!("expected a number, found end of line"));
    }
    let tok = &tokens[*i];
    *i += 1;
    if tok.eq_ignore_ascii_case("inf") || tok.eq_ignore_ascii_case("infinity") {
        return Ok(sign * f64::INFINITY);
    }
    tok.parse::<f64>()
        .map(|v| sign * v)
        .map_err(|_| parse_err!("expected a number, found '{tok}'"))
}

struct Builder {
    model: MipModel,
    index: alloc::collections::BTreeMap<String, usize>,
}

impl Builder {
    fn lookup(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        // LP default bounds: [0, +inf).
        let id = self.model.add_continuous(name.to_string(), 0.0, f64::INFINITY);
        self.index.insert(name.to_string(), id.0);
        id.0
    }
}

/// Parses `expr` tokens in `tokens[start..stop]` into (var, coeff) terms.
fn parse_expr(
    b: &mut Builder,
    tokens: &[String],
    start: usize,
    stop: usize,
) -> Result<Vec<(usize, f64)>> {
    let mut terms: Vec<(usize, f64)> = Vec::new();
    let mut sign = 1.0;
    let mut coeff: Option<f64> = None;
    let mut i = start;
    while i < stop {
        let tok = &tokens[i];
        if tok == "+" || tok == "-" {
            if coeff.is_some() {
                return Err(parse_err!("dangling coefficient before '{tok}'"));
            }
            if tok == "-" {
                sign = -sign;
            }
        } else if is_number(tok) {
            if coeff.is_some() {
                return Err(parse_err!("two consecutive numbers near '{tok}'"));
            }
            let mut k = i;
            coeff = Some(parse_num(tokens, &mut k)?);
            i = k - 1;
        } else {
            let c = sign * coeff.take().unwrap_or(1.0);
            if tok != "__zero__" {
                let j = b.lookup(tok);
                terms.push((j, c));
            }
            sign = 1.0;
        }
        i += 1;
    }
    if coeff.is_some() {
        return Err(parse_err!("expression ends with a dangling coefficient"));
    }
    Ok(terms)
}

fn section_of(line: &str) -> Option<Section> {
    let l = line.trim().to_ascii_lowercase();
    match l.as_str() {
        "minimize" | "minimise" | "min" => Some(Section::Objective),
        "maximize" | "maximise" | "max" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn parse_bound_line(b: &mut Builder, tokens: &[String]) -> Result<()> {
    // Forms: `x free`, `x = v`, `x <= v`, `x >= v`, `l <= x <= u`.
    if tokens.len() == 2 && tokens[1].eq_ignore_ascii_case("free") {
        let j = b.lookup(&tokens[0]);
        b.model.variables[j].lower = f64::NEG_INFINITY;
        b.model.variables[j].upper = f64::INFINITY;
        return Ok(());
    }
    if !tokens.is_empty() && !is_number(&tokens[0]) && tokens[0] != "+" && tokens[0] != "-" {
        let j = b.lookup(&tokens[0]);
        if tokens.len() < 3 {
            return Err(parse_err!("malformed bound line"));
        }
        let mut i = 2;
        let v = parse_num(tokens, &mut i)?;
        match tokens[1].as_str() {
            "=" => {
                b.model.variables[j].lower = v;
                b.model.variables[j].upper = v;
            }
            "<=" => b.model.variables[j].upper = v,
            ">=" => b.model.variables[j].lower = v,
            op => return Err(parse_err!("unexpected bound operator '{op}'")),
        }
        return Ok(());
    }
    let mut i = 0;
    let lo = parse_num(tokens, &mut i)?;
    if i >= tokens.len() || tokens[i] != "<=" {
        return Err(parse_err!("malformed range bound line"));
    }
    i += 1;
    if i >= tokens.len() {
        return Err(parse_err!("malformed range bound line"));
    }
    let j = b.lookup(&tokens[i].clone());
    i += 1;
    if i >= tokens.len() || tokens[i] != "<=" {
        return Err(parse_err!("malformed range bound line"));
    }
    i += 1;
    let hi = parse_num(tokens, &mut i)?;
    b.model.variables[j].lower = lo;
    b.model.variables[j].upper = hi;
    Ok(())
}

pub fn parse_lp_string(text: &str) -> Result<MipModel> {
    let mut sense = ObjectiveSense::Minimize;
    let mut section: Option<Section> = None;
    // Collect lines per section; comments start with '\'.
    let mut objective_lines: Vec<&str> = Vec::new();
    let mut constraint_lines: Vec<&str> = Vec::new();
    let mut bound_lines: Vec<&str> = Vec::new();
    let mut binary_lines: Vec<&str> = Vec::new();
    for raw in text.lines() {
        let line = match raw.find('\\') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        if let Some(sec) = section_of(line) {
            if sec == Section::Objective {
                let l = line.trim().to_ascii_lowercase();
                if l.starts_with("max") {
                    sense = ObjectiveSense::Maximize;
                }
            }
            section = Some(sec);
            continue;
        }
        let l = line.trim().to_ascii_lowercase();
        if l == "general" || l == "generals" || l == "gen" {
            return Err(parse_err!("general integer variables are not supported"));
        }
        match section {
            Some(Section::Objective) => objective_lines.push(line),
            Some(Section::Constraints) => constraint_lines.push(line),
            Some(Section::Bounds) => bound_lines.push(line),
            Some(Section::Binaries) => binary_lines.push(line),
            Some(Section::End) | None => {
                return Err(parse_err!("content outside any section: '{}'", line.trim()))
            }
        }
    }

    let mut b = Builder {
        model: MipModel::new(),
        index: alloc::collections::BTreeMap::new(),
    };
    b.model.objective_sense = sense;

    // Register variables from Bounds first to preserve writer ordering.
    let bound_tokens: Vec<Vec<String>> = bound_lines.iter().map(|l| tokenize(l)).collect();
    for tokens in &bound_tokens {
        for tok in tokens {
            let named = !is_number(tok)
                && tok != "+"
                && tok != "-"
                && tok != "<="
                && tok != ">="
                && tok != "="
                && !tok.eq_ignore_ascii_case("free");
            if named {
                b.lookup(tok);
            }
        }
    }
    for line in &binary_lines {
        for tok in tokenize(line) {
            let j = b.lookup(&tok);
            b.model.variables[j].kind = VarKind::Binary;
            b.model.variables[j].lower = 0.0;
            b.model.variables[j].upper = 1.0;
        }
    }
    for tokens in &bound_tokens {
        parse_bound_line(&mut b, tokens)?;
    }

    // Objective: strip an optional `name:` label.
    let obj_tokens: Vec<String> = objective_lines.iter().flat_map(|l| tokenize(l)).collect();
    let obj_start = if obj_tokens.len() >= 2 && obj_tokens[1] == ":" {
        2
    } else {
        0
    };
    b.model.objective = super::model::canonical_terms(parse_expr(
        &mut b,
        &obj_tokens,
        obj_start,
        obj_tokens.len(),
    )?);

    for line in &constraint_lines {
        let tokens = tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        let (name, start) = if tokens.len() >= 2 && tokens[1] == ":" {
            (tokens[0].clone(), 2)
        } else {
            (format!("r{}", b.model.constraints.len()), 0)
        };
        let sense_pos = tokens
            .iter()
            .position(|t| t == "<=" || t == ">=" || t == "=")
            .ok_or_else(|| parse_err!("constraint '{name}' has no relational operator"))?;
        let sense = match tokens[sense_pos].as_str() {
            "<=" => ConstraintSense::Le,
            ">=" => ConstraintSense::Ge,
            _ => ConstraintSense::Eq,
        };
        let terms = super::model::canonical_terms(parse_expr(&mut b, &tokens, start, sense_pos)?);
        let mut i = sense_pos + 1;
        let rhs = parse_num(&tokens, &mut i)?;
        if i != tokens.len() {
            return Err(parse_err!("trailing tokens after rhs in constraint '{name}'"));
        }
        b.model.constraints.push(super::model::LinearConstraint {
            name,
            terms,
            sense,
            rhs,
        });
    }

    b.model.validate()?;
    Ok(b.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::model::VarId;
    use alloc::vec;

    fn sample_model() -> MipModel {
        let mut m = MipModel::new();
        let c0 = m.add_binary("c_0");
        let c1 = m.add_binary("c_1");
        let x = m.add_continuous("x_0", -1.5, 2.25);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        let z = m.add_continuous("z", f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint(
            "cov",
            vec![(c0, 1.0), (c1, 1.0), (x, -0.125)],
            ConstraintSense::Ge,
            1.0,
        );
        m.add_constraint("cap", vec![(x, 3.0), (y, 1.0)], ConstraintSense::Le, 7.5);
        m.add_constraint("pin", vec![(z, 1.0), (c0, -2.0)], ConstraintSense::Eq, 0.0);
        m.set_objective(
            ObjectiveSense::Maximize,
            vec![(c0, 2.0), (x, -1.0), (y, 0.5)],
        );
        m
    }

    #[test]
    fn round_trip_preserves_model_exactly() {
        let m = sample_model();
        let text = write_lp_string(&m);
        let back = parse_lp_string(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn round_trip_survives_awkward_coefficients() {
        let mut m = MipModel::new();
        let a = m.add_continuous("a", 0.0, 1e30);
        let b = m.add_continuous("b", -0.1, 0.3);
        m.add_constraint(
            "r",
            vec![(a, 0.1 + 0.2), (b, -1.0 / 3.0)],
            ConstraintSense::Le,
            1e-17,
        );
        m.set_objective(ObjectiveSense::Minimize, vec![(a, core::f64::consts::PI)]);
        let back = parse_lp_string(&write_lp_string(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn parses_hand_written_lp() {
        let text = "\\ a comment line\n\
                    Minimize\n obj: 2 w_1 + w_2 - 0.5 w_3\n\
                    Subject To\n keep: w_1 + w_2 >= 1\n lim: w_1 + w_3 <= 1\n\
                    Bounds\n 0 <= w_3 <= 4\n\
                    Binaries\n w_1 w_2\nEnd\n";
        let m = parse_lp_string(text).unwrap();
        assert_eq!(m.num_vars(), 3);
        assert_eq!(m.variables[0].name, "w_3");
        assert_eq!(m.variables[1].kind, VarKind::Binary);
        assert_eq!(m.constraints.len(), 2);
        assert_eq!(m.constraints[0].sense, ConstraintSense::Ge);
        // w_1 has index 1 after bounds-section registration of w_3.
        assert_eq!(m.objective, vec![(0, -0.5), (1, 2.0), (2, 1.0)]);
    }

    #[test]
    fn implicit_coefficients_and_signs() {
        let text = "Minimize\n obj: x - y + 2 z\nSubject To\n r0: - x + y - - z >= -2\nEnd\n";
        let m = parse_lp_string(text).unwrap();
        let r = &m.constraints[0];
        assert_eq!(r.terms, vec![(0, -1.0), (1, 1.0), (2, 1.0)]);
        assert_eq!(r.rhs, -2.0);
        let _ = VarId(0);
    }

    #[test]
    fn empty_objective_round_trips() {
        let mut m = MipModel::new();
        let a = m.add_binary("a");
        m.add_constraint("r", vec![(a, 1.0)], ConstraintSense::Ge, 1.0);
        let back = parse_lp_string(&write_lp_string(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_lp_string("Minimize\n obj: x\nSubject To\n r: x\nEnd\n").is_err());
        assert!(parse_lp_string("stray text\n").is_err());
        assert!(parse_lp_string("Minimize\n obj: x\nGenerals\n x\nEnd\n").is_err());
        assert!(parse_lp_string("Minimize\n obj: 2 3 x\nEnd\n").is_err());
    }
}
