//! Linear programming layer: sparse problems, a bounded primal simplex solver
//! and the textual `.lp` file format.

mod format;
mod simplex;

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use format::{export_lp_text, parse_lp_text};
pub use simplex::{solve, solve_with};

/// Numerical tolerances shared by the solver and all verification paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed absolute constraint or bound violation.
    pub feasibility: f64,
    /// Threshold used when comparing objective values and witnesses.
    pub comparison: f64,
    /// Smallest tableau entry accepted as a pivot.
    pub pivot: f64,
    /// Reduced-cost threshold for declaring optimality.
    pub optimality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        TOLERANCES
    }
}

pub const TOLERANCES: Tolerances = Tolerances { feasibility: 1e-8, comparison: 1e-7, pivot: 1e-10, optimality: 1e-9 };

#[derive(Debug, Error)]
pub enum LpError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ConstraintSense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl fmt::Display for ConstraintSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintSense::Le => "<=",
            ConstraintSense::Ge => ">=",
            ConstraintSense::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ObjectiveSense {
    #[default]
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            ConstraintSense::Le => (lhs - self.rhs).max(0.0),
            ConstraintSense::Ge => (self.rhs - lhs).max(0.0),
            ConstraintSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A linear program in general form with sparse rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpProblem {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(usize, f64)>,
    pub sense: ObjectiveSense,
}

impl LpProblem {
    pub fn new(name: impl Into<String>) -> Self {
        LpProblem { name: name.into(), ..Default::default() }
    }

    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: Option<f64>) -> usize {
        self.variables.push(Variable { name: name.into(), lower, upper });
        self.variables.len() - 1
    }

    /// Adds a row; zero coefficients are dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (usize, f64)>,
        sense: ConstraintSense,
        rhs: f64,
    ) -> usize {
        let coeffs = coeffs.into_iter().filter(|&(_, a)| a != 0.0).collect();
        self.constraints.push(Constraint { name: name.into(), coeffs, sense, rhs });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, sense: ObjectiveSense, coeffs: impl IntoIterator<Item = (usize, f64)>) {
        self.sense = sense;
        self.objective = coeffs.into_iter().filter(|&(_, c)| c != 0.0).collect();
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Checks index ranges, duplicate entries, names and bounds.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.variables.len();
        let mut names = HashSet::new();
        for v in &self.variables {
            check_name(&v.name)?;
            if !names.insert(v.name.as_str()) {
                return Err(LpError::Invalid(format!("duplicate variable name '{}'", v.name)));
            }
            if v.lower.is_nan() || v.lower == f64::INFINITY {
                return Err(LpError::Invalid(format!("bad lower bound on '{}'", v.name)));
            }
            match v.upper {
                Some(u) if u.is_nan() || u < v.lower || u == f64::NEG_INFINITY => {
                    return Err(LpError::Invalid(format!("bad upper bound on '{}'", v.name)));
                }
                _ => {}
            }
        }
        let mut row_names = HashSet::new();
        let mut seen = vec![usize::MAX; n];
        for (i, c) in self.constraints.iter().enumerate() {
            check_name(&c.name)?;
            if !row_names.insert(c.name.as_str()) {
                return Err(LpError::Invalid(format!("duplicate constraint name '{}'", c.name)));
            }
            if !c.rhs.is_finite() {
                return Err(LpError::Invalid(format!("non-finite rhs in '{}'", c.name)));
            }
            for &(j, a) in &c.coeffs {
                if j >= n {
                    return Err(LpError::Invalid(format!("variable index {j} out of range in '{}'", c.name)));
                }
                if !a.is_finite() {
                    return Err(LpError::Invalid(format!("non-finite coefficient in '{}'", c.name)));
                }
                if seen[j] == i {
                    return Err(LpError::Invalid(format!(
                        "variable '{}' appears twice in '{}'",
                        self.variables[j].name, c.name
                    )));
                }
                seen[j] = i;
            }
        }
        let mut seen_obj = vec![false; n];
        for &(j, c) in &self.objective {
            if j >= n || !c.is_finite() {
                return Err(LpError::Invalid(format!("bad objective entry for index {j}")));
            }
            if std::mem::replace(&mut seen_obj[j], true) {
                return Err(LpError::Invalid(format!("objective repeats variable index {j}")));
            }
        }
        Ok(())
    }
}

/// Names must be usable verbatim in the `.lp` format.
fn check_name(name: &str) -> Result<(), LpError> {
    let bytes = name.as_bytes();
    let ok_first = matches!(bytes.first(), Some(c) if c.is_ascii_alphabetic() || *c == b'_');
    let ok_rest = bytes.iter().all(|&c| c.is_ascii_alphanumeric() || b"_.()".contains(&c));
    // `e1` would read as an exponent, `inf` and `free` are keywords.
    let exponent_like = matches!(bytes, [b'e' | b'E', d, ..] if d.is_ascii_digit());
    let keyword = ["inf", "infinity", "free"].iter().any(|k| name.eq_ignore_ascii_case(k));
    if !ok_first || !ok_rest || exponent_like || keyword || name.len() > 255 {
        return Err(LpError::Invalid(format!("name '{name}' is not a valid identifier")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: Status,
    pub objective: f64,
    pub values: Vec<f64>,
    /// `d objective / d rhs` per constraint, when the solve ended optimal.
    pub duals: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Lagrangian lower (minimize) or upper (maximize) bound implied by `duals`.
///
/// Multipliers with the wrong sign for their row are clipped to zero, so the
/// result is a valid bound for any input vector.
pub fn dual_bound(p: &LpProblem, duals: &[f64]) -> f64 {
    let flip = if p.sense == ObjectiveSense::Maximize { -1.0 } else { 1.0 };
    let mut reduced = vec![0.0; p.num_variables()];
    for &(j, c) in &p.objective {
        reduced[j] = flip * c;
    }
    let mut bound = 0.0;
    for (c, &y) in p.constraints.iter().zip(duals) {
        let y = flip * y;
        let y = match c.sense {
            ConstraintSense::Ge => y.max(0.0),
            ConstraintSense::Le => y.min(0.0),
            ConstraintSense::Eq => y,
        };
        bound += y * c.rhs;
        for &(j, a) in &c.coeffs {
            reduced[j] -= y * a;
        }
    }
    for (v, &r) in p.variables.iter().zip(&reduced) {
        let term = if r >= 0.0 {
            r * v.lower
        } else {
            match v.upper {
                Some(u) => r * u,
                None => f64::NEG_INFINITY,
            }
        };
        if r != 0.0 {
            bound += term;
        }
    }
    flip * bound
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SizeStats {
    pub rows: usize,
    pub columns: usize,
    pub nonzeros: usize,
}

pub fn size_stats(p: &LpProblem) -> SizeStats {
    SizeStats {
        rows: p.constraints.len(),
        columns: p.variables.len(),
        nonzeros: p.constraints.iter().map(|c| c.coeffs.len()).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_count_coefficients() {
        let mut p = LpProblem::new("t");
        let x = p.add_variable("x", 0.0, None);
        let y = p.add_variable("y", 0.0, None);
        p.add_constraint("c", [(x, 1.0), (y, 2.0)], ConstraintSense::Le, 3.0);
        assert_eq!(size_stats(&p), SizeStats { rows: 1, columns: 2, nonzeros: 2 });
    }

    #[test]
    fn validate_rejects_bad_input() {
        let mut p = LpProblem::new("t");
        let x = p.add_variable("x", 0.0, None);
        p.add_constraint("c", [(x, 1.0), (x, 1.0)], ConstraintSense::Le, 1.0);
        assert!(p.validate().is_err());

        let mut p = LpProblem::new("t");
        p.add_variable("x", 0.0, None);
        p.add_variable("x", 0.0, None);
        assert!(p.validate().is_err());

        let mut p = LpProblem::new("t");
        p.add_variable("x", 0.0, None);
        p.add_constraint("c", [(3, 1.0)], ConstraintSense::Le, 1.0);
        assert!(p.validate().is_err());

        for bad in ["1x", "e2", "free", "x[0]", ""] {
            let mut p = LpProblem::new("t");
            p.add_variable(bad, 0.0, None);
            assert!(p.validate().is_err(), "{bad:?} accepted");
        }
    }
}
