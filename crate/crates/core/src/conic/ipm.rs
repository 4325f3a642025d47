//! Primal-dual interior point method on the homogeneous self-dual embedding
//!
//! ```text
//! G'z + c tau       = 0
//! G x + s - h tau   = 0
//! c'x + h'z + kappa = 0,     s, z in K,  tau, kappa >= 0
//! ```
//!
//! Directions use Nesterov-Todd scaling and a Mehrotra predictor-corrector.
//! The scaled KKT system is reduced to the normal equations
//! `G' W^{-2} G dx = r`, assembled block by block and factored densely.

use std::ops::Range;

use super::cones::{self, dot, norm, Scaling};
use super::linalg::{Cholesky, SymMatrix};
use super::{ConeBlock, ConeProgram, ConeSolution, ConeStatus, ResidualReport, SolverTolerances};
use crate::error::Result;

const STEP_FRACTION: f64 = 0.99;
const MIN_STEP: f64 = 1e-12;
const REFINE_STEPS: usize = 6;

/// Rows of one cone block restricted to the columns they touch.
struct DenseBlock {
    cone: ConeBlock,
    rows: Range<usize>,
    cols: Vec<usize>,
    /// row-major `rows.len() x cols.len()`
    g: Vec<f64>,
    /// `G_b' G_b`, row-major `cols.len()^2`; second-order cones only
    gram: Vec<f64>,
}

struct Kkt<'a> {
    program: &'a ConeProgram,
    blocks: Vec<DenseBlock>,
    scalings: Vec<Scaling>,
    normal: SymMatrix,
    chol: Option<Cholesky>,
    scratch: Vec<f64>,
}

impl<'a> Kkt<'a> {
    fn new(program: &'a ConeProgram) -> Self {
        let g = &program.matrix;
        let blocks = cones::block_ranges(&program.cones)
            .into_iter()
            .flat_map(|(cone, rows)| match cone {
                // orthant rows decouple; keep them as one-row blocks
                ConeBlock::Nonnegative(_) => rows
                    .map(|r| dense_block(g, ConeBlock::Nonnegative(1), r..r + 1))
                    .collect::<Vec<_>>(),
                ConeBlock::SecondOrder(_) => vec![dense_block(g, cone, rows)],
            })
            .collect();
        Kkt {
            program,
            blocks,
            scalings: Vec::new(),
            normal: SymMatrix::zeros(program.num_vars()),
            chol: None,
            scratch: Vec::new(),
        }
    }

    /// Recomputes scaling at `(s, z)`, returns `lambda = W z`.
    fn update_scaling(&mut self, s: &[f64], z: &[f64]) -> Vec<f64> {
        self.scalings = self
            .blocks
            .iter()
            .map(|b| Scaling::new(b.cone, &s[b.rows.clone()], &z[b.rows.clone()]))
            .collect();
        let mut lambda = vec![0.0; z.len()];
        self.apply_w(z, &mut lambda);
        lambda
    }

    fn apply_w(&self, x: &[f64], out: &mut [f64]) {
        for (b, w) in self.blocks.iter().zip(&self.scalings) {
            w.apply(&x[b.rows.clone()], &mut out[b.rows.clone()]);
        }
    }

    fn apply_w_inv(&self, x: &[f64], out: &mut [f64]) {
        for (b, w) in self.blocks.iter().zip(&self.scalings) {
            w.apply_inv(&x[b.rows.clone()], &mut out[b.rows.clone()]);
        }
    }

    fn factor(&mut self) -> bool {
        self.normal.clear();
        for (b, w) in self.blocks.iter().zip(&self.scalings) {
            let d = b.rows.len();
            let nb = b.cols.len();
            if nb == 0 {
                continue;
            }
            match w {
                Scaling::Orthant { d: diag } => {
                    // one row: G_r' (1/d^2) G_r
                    let f = diag[0].powi(-2);
                    for a in 0..nb {
                        for bb in 0..=a {
                            self.normal.add(b.cols[a], b.cols[bb], f * b.g[a] * b.g[bb]);
                        }
                    }
                }
                Scaling::Soc { beta, v } => {
                    // W^{-2} = (I + 4 (v'v) a a' - 2 a v' - 2 v a') / beta^2
                    // with a = J v, so only a rank-two update of G'G changes
                    let vv = dot(v, v);
                    self.scratch.clear();
                    self.scratch.resize(2 * nb, 0.0);
                    let (p, q) = self.scratch.split_at_mut(nb);
                    for r in 0..d {
                        let ar = if r == 0 { v[0] } else { -v[r] };
                        let row = &b.g[r * nb..(r + 1) * nb];
                        for j in 0..nb {
                            p[j] += row[j] * ar;
                            q[j] += row[j] * v[r];
                        }
                    }
                    let f = beta.powi(-2);
                    for a in 0..nb {
                        let ca = b.cols[a];
                        let gram = &b.gram[a * nb..a * nb + a + 1];
                        let (pa, qa) = (p[a], q[a]);
                        for bb in 0..=a {
                            let val = gram[bb] + 4.0 * vv * pa * p[bb] - 2.0 * (pa * q[bb] + qa * p[bb]);
                            self.normal.add(ca, b.cols[bb], f * val);
                        }
                    }
                }
            }
        }
        let scale = self.normal.diag_max().max(1.0);
        let mut shift = 0.0;
        loop {
            if let Some(c) = Cholesky::factor(&self.normal, shift) {
                self.chol = Some(c);
                return true;
            }
            shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
            if shift > 1e-6 * scale {
                self.chol = None;
                return false;
            }
        }
    }

    /// Solves `[0 G'; G -W^2] [x; z] = [bx; bz]` with iterative refinement.
    fn solve(&self, bx: &[f64], bz: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut x, mut z) = self.solve_once(bx, bz);
        for _ in 0..REFINE_STEPS {
            let (rx, rz) = self.residual(bx, bz, &x, &z);
            let scale = norm(bx).max(norm(bz)).max(1e-300);
            if norm(&rx).max(norm(&rz)) <= 1e-14 * scale {
                break;
            }
            let (cx, cz) = self.solve_once(&rx, &rz);
            x.iter_mut().zip(&cx).for_each(|(a, b)| *a += b);
            z.iter_mut().zip(&cz).for_each(|(a, b)| *a += b);
        }
        (x, z)
    }

    fn solve_once(&self, bx: &[f64], bz: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = &self.program.matrix;
        let m = bz.len();
        let mut t = vec![0.0; m];
        let mut t2 = vec![0.0; m];
        self.apply_w_inv(bz, &mut t);
        self.apply_w_inv(&t, &mut t2);
        let gt = g.tr_mul_vec(&t2);
        let mut x: Vec<f64> = bx.iter().zip(&gt).map(|(a, b)| a + b).collect();
        self.chol
            .as_ref()
            .expect("factor() succeeded before solve")
            .solve_in_place(&mut x);
        let gx = g.mul_vec(&x);
        let diff: Vec<f64> = gx.iter().zip(bz).map(|(a, b)| a - b).collect();
        self.apply_w_inv(&diff, &mut t);
        let mut z = vec![0.0; m];
        self.apply_w_inv(&t, &mut z);
        (x, z)
    }

    fn residual(&self, bx: &[f64], bz: &[f64], x: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = &self.program.matrix;
        let gtz = g.tr_mul_vec(z);
        let rx = bx.iter().zip(&gtz).map(|(a, b)| a - b).collect();
        let gx = g.mul_vec(x);
        let mut wz = vec![0.0; z.len()];
        let mut w2z = vec![0.0; z.len()];
        self.apply_w(z, &mut wz);
        self.apply_w(&wz, &mut w2z);
        let rz = bz
            .iter()
            .zip(&gx)
            .zip(&w2z)
            .map(|((b, gx), w)| b - (gx - w))
            .collect();
        (rx, rz)
    }
}

fn dense_block(g: &super::SparseMatrix, cone: ConeBlock, rows: Range<usize>) -> DenseBlock {
    let mut cols: Vec<usize> = rows.clone().flat_map(|r| g.row(r).map(|(c, _)| c)).collect();
    cols.sort_unstable();
    cols.dedup();
    let nb = cols.len();
    let mut dense = vec![0.0; rows.len() * nb];
    for (i, r) in rows.clone().enumerate() {
        for (c, v) in g.row(r) {
            let j = cols.binary_search(&c).expect("column collected above");
            dense[i * nb + j] = v;
        }
    }
    let mut gram = Vec::new();
    if let ConeBlock::SecondOrder(_) = cone {
        let d = rows.len();
        gram = vec![0.0; nb * nb];
        for r in 0..d {
            let row = &dense[r * nb..(r + 1) * nb];
            for a in 0..nb {
                if row[a] == 0.0 {
                    continue;
                }
                for bb in 0..=a {
                    gram[a * nb + bb] += row[a] * row[bb];
                }
            }
        }
    }
    DenseBlock {
        cone,
        rows,
        cols,
        g: dense,
        gram,
    }
}

struct Iterate {
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

/// Solves a conic program. Infeasible programs return the corresponding
/// certificate status; `Err` only for malformed input.
pub fn solve(program: &ConeProgram, tol: &SolverTolerances) -> Result<ConeSolution> {
    program.validate()?;
    let n = program.num_vars();
    let m = program.num_rows();
    let c = &program.objective;
    let h = &program.offset;
    let g = &program.matrix;
    let ranges = cones::block_ranges(&program.cones);
    let nu = program.degree() as f64;
    let hnorm = norm(h).max(1.0);
    let cnorm = norm(c).max(1.0);

    let mut it = Iterate {
        x: vec![0.0; n],
        s: vec![0.0; m],
        z: vec![0.0; m],
        tau: 1.0,
        kappa: 1.0,
    };
    for (cone, r) in &ranges {
        cones::set_identity(*cone, &mut it.s[r.clone()]);
        cones::set_identity(*cone, &mut it.z[r.clone()]);
    }

    let mut kkt = Kkt::new(program);
    let mut best: Option<(f64, ConeSolution)> = None;

    for iter in 0..=tol.max_iterations {
        let gtz = g.tr_mul_vec(&it.z);
        let gx = g.mul_vec(&it.x);
        let rx: Vec<f64> = gtz.iter().zip(c).map(|(a, b)| a + b * it.tau).collect();
        let rz: Vec<f64> = gx
            .iter()
            .zip(&it.s)
            .zip(h)
            .map(|((a, s), hh)| a + s - hh * it.tau)
            .collect();
        let cx = dot(c, &it.x);
        let hz = dot(h, &it.z);
        let rt = it.kappa + cx + hz;
        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / (nu + 1.0);

        let pcost = cx / it.tau;
        let dcost = -hz / it.tau;
        let report = ResidualReport {
            primal: norm(&rz) / it.tau / hnorm,
            dual: norm(&rx) / it.tau / cnorm,
            gap: (pcost - dcost).abs() / pcost.abs().max(1.0),
            violations: Vec::new(),
        };
        if !report.max_residual().is_finite() || !mu.is_finite() {
            break;
        }
        let candidate = ConeSolution {
            status: ConeStatus::Optimal,
            primal: it.x.iter().map(|v| v / it.tau).collect(),
            slack: it.s.iter().map(|v| v / it.tau).collect(),
            dual: it.z.iter().map(|v| v / it.tau).collect(),
            objective_value: pcost,
            dual_objective: dcost,
            residuals: report.clone(),
            iterations: iter,
        };
        if report.primal <= tol.feasibility
            && report.dual <= tol.feasibility
            && report.gap <= tol.gap
        {
            return Ok(candidate);
        }
        if hz < 0.0 {
            let res = norm(&gtz) / (-hz) / cnorm;
            if res <= tol.infeasibility {
                let ray: Vec<f64> = it.z.iter().map(|v| v / -hz).collect();
                return Ok(ConeSolution {
                    status: ConeStatus::PrimalInfeasible,
                    primal: vec![0.0; n],
                    slack: vec![0.0; m],
                    dual: ray,
                    objective_value: f64::INFINITY,
                    dual_objective: f64::INFINITY,
                    residuals: ResidualReport {
                        primal: 0.0,
                        dual: res,
                        gap: 0.0,
                        violations: Vec::new(),
                    },
                    iterations: iter,
                });
            }
        }
        if cx < 0.0 {
            let gxs: Vec<f64> = gx.iter().zip(&it.s).map(|(a, b)| a + b).collect();
            let res = norm(&gxs) / (-cx) / hnorm;
            if res <= tol.infeasibility {
                return Ok(ConeSolution {
                    status: ConeStatus::DualInfeasible,
                    primal: it.x.iter().map(|v| v / -cx).collect(),
                    slack: it.s.iter().map(|v| v / -cx).collect(),
                    dual: vec![0.0; m],
                    objective_value: f64::NEG_INFINITY,
                    dual_objective: f64::NEG_INFINITY,
                    residuals: ResidualReport {
                        primal: res,
                        dual: 0.0,
                        gap: 0.0,
                        violations: Vec::new(),
                    },
                    iterations: iter,
                });
            }
        }
        let score = report.max_residual();
        if best.as_ref().map_or(true, |(b, _)| score < *b) {
            best = Some((score, candidate));
        }
        if iter == tol.max_iterations {
            break;
        }

        let lambda = kkt.update_scaling(&it.s, &it.z);
        if !kkt.factor() {
            log::debug!("normal equations lost definiteness at iteration {iter}");
            break;
        }
        // tau-direction: [0 G'; G -W^2] [x1; z1] = [-c; h]
        let negc: Vec<f64> = c.iter().map(|v| -v).collect();
        let (x1, z1) = kkt.solve(&negc, h);
        let mut wz1 = vec![0.0; m];
        kkt.apply_w(&z1, &mut wz1);
        let denom = -(dot(&wz1, &wz1) + it.kappa / it.tau);

        let newton = |f: f64, ds_target: &[f64], dk: f64| -> Direction {
            let mut q = vec![0.0; m];
            for (cone, r) in &ranges {
                cones::jordan_div(*cone, &lambda[r.clone()], &ds_target[r.clone()], &mut q[r.clone()]);
            }
            let mut wq = vec![0.0; m];
            kkt.apply_w(&q, &mut wq);
            let bx: Vec<f64> = rx.iter().map(|v| -f * v).collect();
            let bz: Vec<f64> = rz.iter().zip(&wq).map(|(r, w)| -f * r - w).collect();
            let (x2, z2) = kkt.solve(&bx, &bz);
            let dtau = (-f * rt - dk / it.tau - dot(c, &x2) - dot(h, &z2)) / denom;
            let dx: Vec<f64> = x2.iter().zip(&x1).map(|(a, b)| a + dtau * b).collect();
            let dz: Vec<f64> = z2.iter().zip(&z1).map(|(a, b)| a + dtau * b).collect();
            let mut wdz = vec![0.0; m];
            kkt.apply_w(&dz, &mut wdz);
            let inner: Vec<f64> = q.iter().zip(&wdz).map(|(a, b)| a - b).collect();
            let mut ds = vec![0.0; m];
            kkt.apply_w(&inner, &mut ds);
            let dkappa = (dk - it.kappa * dtau) / it.tau;
            Direction {
                x: dx,
                s: ds,
                z: dz,
                tau: dtau,
                kappa: dkappa,
            }
        };

        let step_to_boundary = |d: &Direction| -> f64 {
            let mut a = f64::INFINITY;
            for (cone, r) in &ranges {
                a = a
                    .min(cones::max_step(*cone, &it.s[r.clone()], &d.s[r.clone()]))
                    .min(cones::max_step(*cone, &it.z[r.clone()], &d.z[r.clone()]));
            }
            if d.tau < 0.0 {
                a = a.min(-it.tau / d.tau);
            }
            if d.kappa < 0.0 {
                a = a.min(-it.kappa / d.kappa);
            }
            a
        };

        // predictor
        let mut target = vec![0.0; m];
        for (cone, r) in &ranges {
            cones::jordan_product(*cone, &lambda[r.clone()], &lambda[r.clone()], &mut target[r.clone()]);
        }
        target.iter_mut().for_each(|v| *v = -*v);
        let aff = newton(1.0, &target, -it.tau * it.kappa);
        let alpha_aff = step_to_boundary(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // corrector: -lambda o lambda - (W^{-1} ds_a) o (W dz_a) + sigma mu e
        let mut winv_ds = vec![0.0; m];
        let mut w_dz = vec![0.0; m];
        kkt.apply_w_inv(&aff.s, &mut winv_ds);
        kkt.apply_w(&aff.z, &mut w_dz);
        let mut corr = vec![0.0; m];
        let mut e = vec![0.0; m];
        for (cone, r) in &ranges {
            cones::jordan_product(*cone, &winv_ds[r.clone()], &w_dz[r.clone()], &mut corr[r.clone()]);
            cones::set_identity(*cone, &mut e[r.clone()]);
        }
        for k in 0..m {
            target[k] += -corr[k] + sigma * mu * e[k];
        }
        let dk = -it.tau * it.kappa - aff.tau * aff.kappa + sigma * mu;
        let dir = newton(1.0 - sigma, &target, dk);
        let alpha = (STEP_FRACTION * step_to_boundary(&dir)).min(1.0);
        if !(alpha > MIN_STEP) {
            log::debug!("step length collapsed at iteration {iter}");
            break;
        }
        it.x.iter_mut().zip(&dir.x).for_each(|(a, b)| *a += alpha * b);
        it.s.iter_mut().zip(&dir.s).for_each(|(a, b)| *a += alpha * b);
        it.z.iter_mut().zip(&dir.z).for_each(|(a, b)| *a += alpha * b);
        it.tau += alpha * dir.tau;
        it.kappa += alpha * dir.kappa;
    }

    let mut failure = best.map(|(_, s)| s).unwrap_or_else(|| ConeSolution {
        status: ConeStatus::NumericalFailure,
        primal: vec![f64::NAN; n],
        slack: vec![f64::NAN; m],
        dual: vec![f64::NAN; m],
        objective_value: f64::NAN,
        dual_objective: f64::NAN,
        residuals: ResidualReport::default(),
        iterations: tol.max_iterations,
    });
    failure.status = ConeStatus::NumericalFailure;
    failure
        .residuals
        .violations
        .push("no certified point within the iteration budget".into());
    Ok(failure)
}
