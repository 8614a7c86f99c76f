//! Reader and writer for the CPLEX-style `.lp` text format.
//!
//! The writer lists every variable in the `Bounds` section, so columns that
//! appear in no row survive a round trip and keep their original order.

use std::fmt::Write as _;

use super::{Constraint, ConstraintSense, LpError, LpProblem, ObjectiveSense};

const WRAP: usize = 200;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_terms(out: &mut String, line: &mut String, p: &LpProblem, terms: &[(usize, f64)]) {
    for &(j, a) in terms {
        if line.len() > WRAP {
            out.push_str(line);
            out.push('\n');
            line.clear();
            line.push_str("   ");
        }
        let sign = if a.is_sign_negative() { '-' } else { '+' };
        let _ = write!(line, " {sign} {} {}", num(a.abs()), p.variables[j].name);
    }
}

/// Renders `p` in the `.lp` format. Coefficients carry 17 significant digits.
pub fn export_lp_text(p: &LpProblem) -> String {
    let mut out = String::new();
    if !p.name.is_empty() {
        let _ = writeln!(out, "\\ Problem: {}", p.name);
    }
    out.push_str(match p.sense {
        ObjectiveSense::Minimize => "Minimize\n",
        ObjectiveSense::Maximize => "Maximize\n",
    });
    let mut line = String::from(" obj:");
    push_terms(&mut out, &mut line, p, &p.objective);
    out.push_str(&line);
    out.push('\n');

    out.push_str("Subject To\n");
    for c in &p.constraints {
        let mut line = format!(" {}:", c.name);
        push_terms(&mut out, &mut line, p, &c.coeffs);
        if c.coeffs.is_empty() {
            // An empty left-hand side is written as a zero multiple of the first column.
            if let Some(v) = p.variables.first() {
                let _ = write!(line, " + 0 {}", v.name);
            }
        }
        let _ = write!(line, " {} {}", c.sense, num(c.rhs));
        out.push_str(&line);
        out.push('\n');
    }

    out.push_str("Bounds\n");
    for v in &p.variables {
        let line = match (v.lower, v.upper) {
            (l, None) if l == f64::NEG_INFINITY => format!(" {} free", v.name),
            (l, None) => format!(" {} >= {}", v.name, num(l)),
            (l, Some(u)) if l == u => format!(" {} = {}", v.name, num(l)),
            (l, Some(u)) if l == f64::NEG_INFINITY => format!(" -inf <= {} <= {}", v.name, num(u)),
            (l, Some(u)) => format!(" {} <= {} <= {}", num(l), v.name, num(u)),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sign(f64),
    Sense(ConstraintSense),
    Colon,
}

fn err(line: usize, msg: impl Into<String>) -> LpError {
    LpError::Parse { line, msg: msg.into() }
}

fn tokenize(text: &str, line_no: usize) -> Result<Vec<Tok>, LpError> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        match c {
            b' ' | b'\t' | b'\r' => i += 1,
            b'+' => {
                out.push(Tok::Sign(1.0));
                i += 1;
            }
            b'-' => {
                out.push(Tok::Sign(-1.0));
                i += 1;
            }
            b':' => {
                out.push(Tok::Colon);
                i += 1;
            }
            b'<' | b'>' | b'=' => {
                let mut j = i + 1;
                while j < b.len() && matches!(b[j], b'<' | b'>' | b'=') {
                    j += 1;
                }
                let sense = match &text[i..j] {
                    "<=" | "=<" | "<" => ConstraintSense::Le,
                    ">=" | "=>" | ">" => ConstraintSense::Ge,
                    "=" => ConstraintSense::Eq,
                    other => return Err(err(line_no, format!("unknown operator '{other}'"))),
                };
                out.push(Tok::Sense(sense));
                i = j;
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < b.len() && (b[j].is_ascii_digit() || b[j] == b'.') {
                    j += 1;
                }
                if j < b.len() && matches!(b[j], b'e' | b'E') {
                    let mut k = j + 1;
                    if k < b.len() && matches!(b[k], b'+' | b'-') {
                        k += 1;
                    }
                    if k < b.len() && b[k].is_ascii_digit() {
                        while k < b.len() && b[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let v: f64 = text[i..j]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad number '{}'", &text[i..j])))?;
                out.push(Tok::Num(v));
                i = j;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < b.len() && (b[j].is_ascii_alphanumeric() || b"_.()".contains(&b[j])) {
                    j += 1;
                }
                let word = &text[i..j];
                if word.eq_ignore_ascii_case("inf") || word.eq_ignore_ascii_case("infinity") {
                    out.push(Tok::Num(f64::INFINITY));
                } else {
                    out.push(Tok::Ident(word.to_string()));
                }
                i = j;
            }
            _ => return Err(err(line_no, format!("unexpected character '{}'", c as char))),
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    End,
}

fn section_header(line: &str) -> Option<Section> {
    let lower = line.trim().to_ascii_lowercase();
    match lower.as_str() {
        "minimize" | "minimise" | "minimum" | "min" | "maximize" | "maximise" | "maximum" | "max" => {
            Some(Section::Objective)
        }
        "subject to" | "such that" | "st" | "s.t." | "st." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "end" => Some(Section::End),
        _ => None,
    }
}

struct Builder {
    problem: LpProblem,
    index: std::collections::HashMap<String, usize>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        let j = self.problem.add_variable(name, 0.0, None);
        self.index.insert(name.to_string(), j);
        j
    }
}

/// Reads terms `[sign] [coef] name` starting at `*pos`. Stops at a sense token
/// or at an identifier followed by a colon (the next row's label).
fn parse_terms(b: &mut Builder, toks: &[(Tok, usize)], pos: &mut usize) -> Result<Vec<(usize, f64)>, LpError> {
    let mut terms: Vec<(usize, f64)> = Vec::new();
    loop {
        let Some((tok, line)) = toks.get(*pos) else { break };
        match tok {
            Tok::Sense(_) => break,
            Tok::Ident(_) if matches!(toks.get(*pos + 1), Some((Tok::Colon, _))) => break,
            _ => {}
        }
        let mut coef = 1.0;
        while let Some((Tok::Sign(s), _)) = toks.get(*pos) {
            coef *= s;
            *pos += 1;
        }
        if let Some((Tok::Num(v), _)) = toks.get(*pos) {
            coef *= v;
            *pos += 1;
        }
        match toks.get(*pos) {
            Some((Tok::Ident(name), _)) => {
                let j = b.var(name);
                *pos += 1;
                match terms.iter_mut().find(|t| t.0 == j) {
                    Some(t) => t.1 += coef,
                    None => terms.push((j, coef)),
                }
            }
            _ => return Err(err(*line, "expected a variable name")),
        }
    }
    terms.retain(|t| t.1 != 0.0);
    Ok(terms)
}

fn parse_bound(b: &mut Builder, toks: &[Tok], line: usize) -> Result<(), LpError> {
    // Collapse sign tokens into the following number.
    let mut t: Vec<Tok> = Vec::new();
    let mut sign = 1.0;
    for tok in toks {
        match tok {
            Tok::Sign(s) => sign *= s,
            Tok::Num(v) => {
                t.push(Tok::Num(sign * v));
                sign = 1.0;
            }
            other => t.push(other.clone()),
        }
    }
    use ConstraintSense::*;
    let set = |b: &mut Builder, name: &str, lo: Option<f64>, hi: Option<Option<f64>>| {
        let j = b.var(name);
        let v = &mut b.problem.variables[j];
        if let Some(lo) = lo {
            v.lower = lo;
        }
        if let Some(hi) = hi {
            v.upper = hi;
        }
    };
    let upper = |u: f64| if u == f64::INFINITY { None } else { Some(u) };
    match t.as_slice() {
        [Tok::Ident(x), Tok::Ident(kw)] if kw.eq_ignore_ascii_case("free") => {
            set(b, x, Some(f64::NEG_INFINITY), Some(None))
        }
        [Tok::Ident(x), Tok::Sense(s), Tok::Num(v)] => match s {
            Ge => set(b, x, Some(*v), None),
            Le => set(b, x, None, Some(upper(*v))),
            Eq => set(b, x, Some(*v), Some(Some(*v))),
        },
        [Tok::Num(v), Tok::Sense(s), Tok::Ident(x)] => match s {
            Le => set(b, x, Some(*v), None),
            Ge => set(b, x, None, Some(upper(*v))),
            Eq => set(b, x, Some(*v), Some(Some(*v))),
        },
        [Tok::Num(l), Tok::Sense(Le), Tok::Ident(x), Tok::Sense(Le), Tok::Num(u)] => {
            set(b, x, Some(*l), Some(upper(*u)))
        }
        _ => return Err(err(line, "unrecognized bound")),
    }
    Ok(())
}

/// Parses `.lp` text produced by [`export_lp_text`] or a compatible writer.
pub fn parse_lp_text(text: &str) -> Result<LpProblem, LpError> {
    let mut b = Builder { problem: LpProblem::new(""), index: Default::default() };
    let mut section = Section::None;
    let mut objective_toks: Vec<(Tok, usize)> = Vec::new();
    let mut row_toks: Vec<(Tok, usize)> = Vec::new();
    let mut bound_lines: Vec<(Vec<Tok>, usize)> = Vec::new();
    let mut sense = None;

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let (body, comment) = match raw.find('\\') {
            Some(c) => (&raw[..c], Some(&raw[c + 1..])),
            None => (raw, None),
        };
        if let Some(name) = comment.and_then(|c| c.trim().strip_prefix("Problem:")) {
            b.problem.name = name.trim().to_string();
        }
        if body.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_header(body) {
            if s == Section::Objective {
                if sense.is_some() {
                    return Err(err(line_no, "second objective section"));
                }
                let max = body.trim().to_ascii_lowercase().starts_with("max");
                sense = Some(if max { ObjectiveSense::Maximize } else { ObjectiveSense::Minimize });
            }
            section = s;
            continue;
        }
        let toks = tokenize(body, line_no)?;
        match section {
            Section::None => return Err(err(line_no, "content before the objective section")),
            Section::End => return Err(err(line_no, "content after End")),
            Section::Objective => objective_toks.extend(toks.into_iter().map(|t| (t, line_no))),
            Section::Constraints => row_toks.extend(toks.into_iter().map(|t| (t, line_no))),
            Section::Bounds => bound_lines.push((toks, line_no)),
        }
    }
    if section != Section::End {
        return Err(err(text.lines().count(), "missing End"));
    }
    let sense = sense.ok_or_else(|| err(1, "missing objective section"))?;

    // Bounds first so that variable order follows the Bounds listing.
    for (toks, line) in &bound_lines {
        match toks.iter().find(|t| matches!(t, Tok::Ident(_))) {
            Some(Tok::Ident(x)) => {
                b.var(x);
            }
            _ => return Err(err(*line, "unrecognized bound")),
        }
    }

    let mut pos = 0;
    if let (Some((Tok::Ident(_), _)), Some((Tok::Colon, _))) = (objective_toks.first(), objective_toks.get(1)) {
        pos = 2;
    }
    let objective = parse_terms(&mut b, &objective_toks, &mut pos)?;
    if let Some((_, line)) = objective_toks.get(pos) {
        return Err(err(*line, "unexpected token in objective"));
    }

    let mut pos = 0;
    while pos < row_toks.len() {
        let line = row_toks[pos].1;
        let name = match (&row_toks[pos].0, row_toks.get(pos + 1)) {
            (Tok::Ident(name), Some((Tok::Colon, _))) => {
                pos += 2;
                name.clone()
            }
            _ => format!("R{}", b.problem.constraints.len() + 1),
        };
        let coeffs = parse_terms(&mut b, &row_toks, &mut pos)?;
        let Some((Tok::Sense(s), _)) = row_toks.get(pos) else {
            return Err(err(line, format!("row '{name}' has no sense")));
        };
        pos += 1;
        let mut rhs_sign = 1.0;
        while let Some((Tok::Sign(sg), _)) = row_toks.get(pos) {
            rhs_sign *= sg;
            pos += 1;
        }
        let Some((Tok::Num(rhs), _)) = row_toks.get(pos) else {
            return Err(err(line, format!("row '{name}' has no right-hand side")));
        };
        pos += 1;
        b.problem.constraints.push(Constraint { name, coeffs, sense: *s, rhs: rhs_sign * rhs });
    }

    for (toks, line) in &bound_lines {
        parse_bound(&mut b, toks, *line)?;
    }
    b.problem.objective = objective;
    b.problem.sense = sense;
    let Builder { problem, .. } = b;
    problem.validate()?;
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{size_stats, solve};
    use proptest::prelude::*;

    fn sample() -> LpProblem {
        let mut p = LpProblem::new("sample");
        let x = p.add_variable("x", 0.0, None);
        let y = p.add_variable("y", -2.0, Some(3.5));
        let z = p.add_variable("z", f64::NEG_INFINITY, None);
        let w = p.add_variable("w_unused", 1.0, Some(1.0));
        p.add_constraint("c1", [(x, 1.0 / 3.0), (y, -2.0)], ConstraintSense::Le, 4.0);
        p.add_constraint("c2", [(x, 1.0), (z, 1.0)], ConstraintSense::Eq, -1.25);
        p.add_constraint("c3", [(y, 1.0), (z, -1e-9)], ConstraintSense::Ge, -7.0);
        p.set_objective(ObjectiveSense::Minimize, [(x, 1.0), (y, 0.1), (w, 2.0)]);
        p
    }

    #[test]
    fn round_trip_is_exact() {
        let p = sample();
        let q = parse_lp_text(&export_lp_text(&p)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn empty_objective_still_has_constraint_block() {
        let mut p = LpProblem::new("t");
        let x = p.add_variable("x", 0.0, None);
        p.add_constraint("only", [(x, 2.0)], ConstraintSense::Ge, 1.0);
        let text = export_lp_text(&p);
        assert!(text.contains("Subject To\n only:"));
        let q = parse_lp_text(&text).unwrap();
        assert_eq!(size_stats(&p), size_stats(&q));
        assert!(q.objective.is_empty());
    }

    #[test]
    fn reads_hand_written_file() {
        let text = "\\ comment\nMaximize\n obj: 3x + 2 y\nSubject To\n c1: x + y <= 4\n c2: x + 3y <= 6\n -x <= 0\nBounds\n x <= 3\nEnd\n";
        let p = parse_lp_text(text).unwrap();
        assert_eq!(p.num_constraints(), 3);
        assert_eq!(p.constraints[2].name, "R3");
        assert_eq!(p.variables[0].upper, Some(3.0));
        let s = solve(&p).unwrap();
        assert!((s.objective - 11.0).abs() < 1e-9);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "Minimize\n obj: x\nSubject To\n c1: x ? 3\nEnd\n";
        match parse_lp_text(text) {
            Err(LpError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(parse_lp_text("Minimize\n obj: x\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, rng_seed: proptest::test_runner::RngSeed::Fixed(11), ..ProptestConfig::default() })]

        #[test]
        fn random_problems_round_trip(
            rows in proptest::collection::vec(
                (proptest::collection::vec(-1e3f64..1e3, 4), 0u8..3, -50.0f64..50.0), 1..6),
            obj in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            let mut p = LpProblem::new("rand");
            for j in 0..4 {
                p.add_variable(format!("v{j}"), 0.0, Some(10.0));
            }
            for (i, (coeffs, s, rhs)) in rows.iter().enumerate() {
                let sense = [ConstraintSense::Le, ConstraintSense::Ge, ConstraintSense::Eq][*s as usize];
                p.add_constraint(format!("r{i}"), coeffs.iter().copied().enumerate(), sense, *rhs);
            }
            p.set_objective(ObjectiveSense::Minimize, obj.iter().copied().enumerate());
            let q = parse_lp_text(&export_lp_text(&p)).unwrap();
            prop_assert_eq!(&p, &q);
            let (a, b) = (solve(&p).unwrap(), solve(&q).unwrap());
            prop_assert_eq!(a.status, b.status);
            if a.is_optimal() {
                prop_assert!((a.objective - b.objective).abs() <= 1e-6);
            }
        }
    }
}
