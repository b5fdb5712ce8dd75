//! Independent feasibility auditor.
//!
//! Checks an assignment against a model by direct evaluation of every
//! bound, integrality requirement, and constraint row. Shares no code
//! with the simplex or branch-and-bound machinery so it can vouch for
//! their output.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::model::{ConstraintSense, MipModel, VarKind};

#[derive(Debug, Clone, PartialEq)]
pub struct AuditViolation {
    /// Variable or constraint name.
    pub subject: String,
    pub detail: String,
    pub amount: f64,
}

/// Returns every violation exceeding `tol`; an empty vector means the
/// assignment is feasible.
pub fn audit_assignment(model: &MipModel, assignment: &[f64], tol: f64) -> Vec<AuditViolation> {
    let mut out = Vec::new();
    if assignment.len() != model.variables.len() {
        out.push(AuditViolation {
            subject: String::from("<assignment>"),
            detail: format!(
                "length {} does not match variable count {}",
                assignment.len(),
                model.variables.len()
            ),
            amount: f64::INFINITY,
        });
        return out;
    }
    for (j, v) in model.variables.iter().enumerate() {
        let x = assignment[j];
        if !x.is_finite() {
            out.push(AuditViolation {
                subject: v.name.clone(),
                detail: String::from("non-finite value"),
                amount: f64::INFINITY,
            });
            continue;
        }
        if x < v.lower - tol {
            out.push(AuditViolation {
                subject: v.name.clone(),
                detail: format!("value {} below lower bound {}", x, v.lower),
                amount: v.lower - x,
            });
        }
        if x > v.upper + tol {
            out.push(AuditViolation {
                subject: v.name.clone(),
                detail: format!("value {} above upper bound {}", x, v.upper),
                amount: x - v.upper,
            });
        }
        if v.kind == VarKind::Binary {
            let nearest = if x < 0.5 { 0.0 } else { 1.0 };
            let frac = (x - nearest).abs();
            if frac > tol {
                out.push(AuditViolation {
                    subject: v.name.clone(),
                    detail: format!("value {} is not integral", x),
                    amount: frac,
                });
            }
        }
    }
    for c in &model.constraints {
        let lhs: f64 = c.terms.iter().map(|&(j, coeff)| coeff * assignment[j]).sum();
        let slack = match c.sense {
            ConstraintSense::Le => c.rhs - lhs,
            ConstraintSense::Ge => lhs - c.rhs,
            ConstraintSense::Eq => -(lhs - c.rhs).abs(),
        };
        if slack < -tol {
            let op = match c.sense {
                ConstraintSense::Le => "<=",
                ConstraintSense::Ge => ">=",
                ConstraintSense::Eq => "=",
            };
            out.push(AuditViolation {
                subject: c.name.clone(),
                detail: format!("lhs {} violates {} {}", lhs, op, c.rhs),
                amount: -slack,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::model::{MipModel, ObjectiveSense};
    use alloc::vec;

    fn toy() -> MipModel {
        let mut m = MipModel::new();
        let a = m.add_binary("a");
        let x = m.add_continuous("x", 0.0, 3.0);
        m.add_constraint("cap", vec![(a, 2.0), (x, 1.0)], ConstraintSense::Le, 4.0);
        m.add_constraint("floor", vec![(x, 1.0)], ConstraintSense::Ge, 1.0);
        m.add_constraint("tie", vec![(a, 1.0), (x, -1.0)], ConstraintSense::Eq, -1.0);
        m.set_objective(ObjectiveSense::Minimize, vec![(x, 1.0)]);
        m
    }

    #[test]
    fn feasible_point_passes() {
        let m = toy();
        assert!(audit_assignment(&m, &[1.0, 2.0], 1e-9).is_empty());
    }

    #[test]
    fn each_violation_kind_is_caught() {
        let m = toy();
        // x above its upper bound and the cap constraint broken.
        let v = audit_assignment(&m, &[1.0, 5.0], 1e-9);
        assert!(v.iter().any(|v| v.subject == "x"));
        assert!(v.iter().any(|v| v.subject == "cap"));
        // fractional binary.
        let v = audit_assignment(&m, &[0.4, 1.0], 1e-6);
        assert!(v.iter().any(|v| v.subject == "a" && v.detail.contains("integral")));
        // equality off by 0.5.
        let v = audit_assignment(&m, &[0.0, 1.5], 1e-6);
        assert!(v.iter().any(|v| v.subject == "tie" && (v.amount - 0.5).abs() < 1e-12));
        // >= broken.
        let v = audit_assignment(&m, &[1.0, 0.0], 1e-6);
        assert!(v.iter().any(|v| v.subject == "floor"));
    }

    #[test]
    fn tolerance_is_respected() {
        let m = toy();
        assert!(audit_assignment(&m, &[1.0, 2.0 + 5e-7], 1e-6).is_empty());
        assert!(!audit_assignment(&m, &[1.0, 2.0 + 5e-5], 1e-6).is_empty());
    }

    #[test]
    fn wrong_length_reported() {
        let m = toy();
        let v = audit_assignment(&m, &[1.0], 1e-6);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].subject, "<assignment>");
    }
}
