use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSense {
    Le,
    Ge,
    Eq,
}

/// Sparse linear constraint; terms are sorted by variable index with
/// duplicates merged at construction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    pub objective: Vec<(usize, f64)>,
    pub objective_sense: ObjectiveSense,
}

impl Default for MipModel {
    fn default() -> Self {
        Self::new()
    }
}

pub(super) fn canonical_terms(mut terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    terms.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (j, c) in terms {
        match out.last_mut() {
            Some((lj, lc)) if *lj == j => *lc += c,
            _ => out.push((j, c)),
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    out
}

impl MipModel {
    pub fn new() -> Self {
        Self {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            objective_sense: ObjectiveSense::Minimize,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            kind: VarKind::Binary,
            lower: 0.0,
            upper: 1.0,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            kind: VarKind::Continuous,
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: ConstraintSense,
        rhs: f64,
    ) {
        let raw = terms.into_iter().map(|(v, c)| (v.0, c)).collect();
        self.constraints.push(LinearConstraint {
            name: name.into(),
            terms: canonical_terms(raw),
            sense,
            rhs,
        });
    }

    pub fn set_objective(&mut self, sense: ObjectiveSense, terms: Vec<(VarId, f64)>) {
        self.objective_sense = sense;
        self.objective = canonical_terms(terms.into_iter().map(|(v, c)| (v.0, c)).collect());
    }

    /// Structural sanity checks: declared variables only, binary bounds
    /// within [0, 1], finite coefficients, lower <= upper.
    pub fn validate(&self) -> Result<()> {
        let n = self.variables.len();
        if n == 0 {
            return Err(input_err!("model has no variables"));
        }
        for (idx, v) in self.variables.iter().enumerate() {
            if v.lower > v.upper {
                return Err(input_err!(
                    "variable {} ({}) has lower {} > upper {}",
                    idx,
                    v.name,
                    v.lower,
                    v.upper
                ));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(input_err!(
                    "binary variable {} must have bounds within [0, 1]",
                    v.name
                ));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(input_err!("constraint {} has non-finite rhs", c.name));
            }
            for &(j, coeff) in &c.terms {
                if j >= n {
                    return Err(input_err!(
                        "constraint {} references undeclared variable {}",
                        c.name,
                        j
                    ));
                }
                if !coeff.is_finite() {
                    return Err(input_err!("constraint {} has non-finite coefficient", c.name));
                }
            }
        }
        for &(j, coeff) in &self.objective {
            if j >= n {
                return Err(input_err!("objective references undeclared variable {}", j));
            }
            if !coeff.is_finite() {
                return Err(input_err!("objective has non-finite coefficient"));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, assignment: &[f64]) -> f64 {
        self.objective
            .iter()
            .map(|&(j, c)| c * assignment[j])
            .sum()
    }
}
