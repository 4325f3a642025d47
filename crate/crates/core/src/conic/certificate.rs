use super::cones::{self, dot, norm};
use super::{ConeProgram, ConeSolution, ConeStatus, ResidualReport, SolverTolerances};
use crate::error::{Error, Result};

/// Recomputes feasibility, optimality or infeasibility-ray residuals of
/// `solution` from the program data alone, ignoring the solver's own
/// residual report and slack vector.
pub fn check_certificate(
    program: &ConeProgram,
    solution: &ConeSolution,
    tol: &SolverTolerances,
) -> Result<ResidualReport> {
    let n = program.num_vars();
    let m = program.num_rows();
    if solution.primal.len() != n || solution.dual.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} primal / {} dual entries, program has {n} variables / {m} rows",
            solution.primal.len(),
            solution.dual.len()
        )));
    }
    let g = &program.matrix;
    let c = &program.objective;
    let h = &program.offset;
    let ranges = cones::block_ranges(&program.cones);
    let hnorm = norm(h).max(1.0);
    let cnorm = norm(c).max(1.0);
    let cone_violation = |u: &[f64]| {
        ranges
            .iter()
            .map(|(cone, r)| cones::violation(*cone, &u[r.clone()]))
            .fold(0.0, f64::max)
    };

    let mut report = match solution.status {
        ConeStatus::Optimal | ConeStatus::NumericalFailure => {
            let x = &solution.primal;
            let z = &solution.dual;
            let gx = g.mul_vec(x);
            let s: Vec<f64> = h.iter().zip(&gx).map(|(a, b)| a - b).collect();
            let gtz = g.tr_mul_vec(z);
            let dres: Vec<f64> = gtz.iter().zip(c).map(|(a, b)| a + b).collect();
            let pcost = dot(c, x);
            let dcost = -dot(h, z);
            let mut report = ResidualReport {
                primal: cone_violation(&s) / hnorm,
                dual: (norm(&dres) / cnorm).max(cone_violation(z) / cnorm),
                gap: (pcost - dcost).abs() / pcost.abs().max(1.0),
                violations: Vec::new(),
            };
            if report.primal > tol.feasibility {
                report
                    .violations
                    .push(format!("primal residual {:.3e}", report.primal));
            }
            if report.dual > tol.feasibility {
                report.violations.push(format!("dual residual {:.3e}", report.dual));
            }
            if report.gap > tol.gap {
                report.violations.push(format!("duality gap {:.3e}", report.gap));
            }
            report
        }
        ConeStatus::PrimalInfeasible => {
            // Farkas: z in K, G'z = 0, h'z < 0
            let z = &solution.dual;
            let hz = dot(h, z);
            let mut report = ResidualReport::default();
            if !(hz < 0.0) {
                report.gap = f64::INFINITY;
                report.violations.push(format!("h'z = {hz:.3e} is not negative"));
            } else {
                report.dual = norm(&g.tr_mul_vec(z)) / (-hz) / cnorm;
                report.primal = cone_violation(z) / (-hz);
                report.gap = (hz + 1.0).abs();
                if report.dual > tol.infeasibility {
                    report
                        .violations
                        .push(format!("ray residual ||G'z|| {:.3e}", report.dual));
                }
                if report.primal > tol.infeasibility {
                    report.violations.push("ray leaves the dual cone".into());
                }
            }
            report
        }
        ConeStatus::DualInfeasible => {
            // ray: -Gx in K, c'x < 0
            let x = &solution.primal;
            let cx = dot(c, x);
            let mut report = ResidualReport::default();
            if !(cx < 0.0) {
                report.gap = f64::INFINITY;
                report.violations.push(format!("c'x = {cx:.3e} is not negative"));
            } else {
                let neg_gx: Vec<f64> = g.mul_vec(x).iter().map(|v| -v).collect();
                report.primal = cone_violation(&neg_gx) / (-cx) / hnorm;
                report.gap = (cx + 1.0).abs();
                if report.primal > tol.infeasibility {
                    report
                        .violations
                        .push(format!("ray residual {:.3e}", report.primal));
                }
            }
            report
        }
    };
    if solution.status == ConeStatus::NumericalFailure {
        report
            .violations
            .push("solver reported numerical failure".into());
    }
    Ok(report)
}
