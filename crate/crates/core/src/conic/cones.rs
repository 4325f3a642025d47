//! Jordan algebra of the orthant and the second-order cone, plus
//! Nesterov-Todd scaling.

use super::ConeBlock;

/// Row range of each block.
pub(crate) fn block_ranges(cones: &[ConeBlock]) -> Vec<(ConeBlock, std::ops::Range<usize>)> {
    let mut start = 0;
    cones
        .iter()
        .map(|&c| {
            let r = start..start + c.dim();
            start = r.end;
            (c, r)
        })
        .collect()
}

fn soc_det(u: &[f64]) -> f64 {
    let n1 = norm(&u[1..]);
    (u[0] - n1) * (u[0] + n1)
}

pub(crate) fn norm(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn set_identity(cone: ConeBlock, u: &mut [f64]) {
    match cone {
        ConeBlock::Nonnegative(_) => u.iter_mut().for_each(|x| *x = 1.0),
        ConeBlock::SecondOrder(_) => {
            u.iter_mut().for_each(|x| *x = 0.0);
            u[0] = 1.0;
        }
    }
}

/// `out = u o v`
pub(crate) fn jordan_product(cone: ConeBlock, u: &[f64], v: &[f64], out: &mut [f64]) {
    match cone {
        ConeBlock::Nonnegative(_) => {
            for ((o, a), b) in out.iter_mut().zip(u).zip(v) {
                *o = a * b;
            }
        }
        ConeBlock::SecondOrder(_) => {
            out[0] = dot(u, v);
            for k in 1..u.len() {
                out[k] = u[0] * v[k] + v[0] * u[k];
            }
        }
    }
}

/// Solves `lam o x = d` for `x`, `lam` in the cone interior.
pub(crate) fn jordan_div(cone: ConeBlock, lam: &[f64], d: &[f64], out: &mut [f64]) {
    match cone {
        ConeBlock::Nonnegative(_) => {
            for ((o, l), b) in out.iter_mut().zip(lam).zip(d) {
                *o = b / l;
            }
        }
        ConeBlock::SecondOrder(_) => {
            let det = soc_det(lam);
            let x0 = (lam[0] * d[0] - dot(&lam[1..], &d[1..])) / det;
            out[0] = x0;
            for k in 1..lam.len() {
                out[k] = (d[k] - x0 * lam[k]) / lam[0];
            }
        }
    }
}

/// Largest `a >= 0` with `u + a du` in the cone, `u` interior. `INFINITY`
/// when the ray never leaves.
pub(crate) fn max_step(cone: ConeBlock, u: &[f64], du: &[f64]) -> f64 {
    match cone {
        ConeBlock::Nonnegative(_) => u
            .iter()
            .zip(du)
            .filter(|(_, &d)| d < 0.0)
            .map(|(&x, &d)| -x / d)
            .fold(f64::INFINITY, f64::min),
        ConeBlock::SecondOrder(_) => {
            let d1 = norm(&du[1..]);
            if du[0] >= d1 {
                return f64::INFINITY;
            }
            let c = soc_det(u).max(0.0);
            let b = 2.0 * (u[0] * du[0] - dot(&u[1..], &du[1..]));
            let a = (du[0] - d1) * (du[0] + d1);
            let mut best = f64::INFINITY;
            if du[0] < 0.0 {
                best = -u[0] / du[0];
            }
            if a.abs() < 1e-300 {
                if b < 0.0 {
                    best = best.min(-c / b);
                }
                return best;
            }
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                let q = -0.5 * (b + b.signum() * sq);
                for r in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
                    if r > 0.0 {
                        best = best.min(r);
                    }
                }
            }
            best
        }
    }
}

/// How far `u` sits outside the cone (0 when inside).
pub(crate) fn violation(cone: ConeBlock, u: &[f64]) -> f64 {
    match cone {
        ConeBlock::Nonnegative(_) => u.iter().fold(0.0_f64, |m, &x| m.max(-x)),
        ConeBlock::SecondOrder(_) => (norm(&u[1..]) - u[0]).max(0.0),
    }
}

/// Nesterov-Todd scaling `W` for one block: `W z = W^{-1} s = lambda`.
#[derive(Debug, Clone)]
pub(crate) enum Scaling {
    /// `W = diag(d)`, `d = sqrt(s / z)`
    Orthant { d: Vec<f64> },
    /// `W = beta (2 v v' - J)` with `v' J v = 1`
    Soc { beta: f64, v: Vec<f64> },
}

impl Scaling {
    pub(crate) fn new(cone: ConeBlock, s: &[f64], z: &[f64]) -> Scaling {
        match cone {
            ConeBlock::Nonnegative(_) => Scaling::Orthant {
                d: s.iter().zip(z).map(|(a, b)| (a / b).sqrt()).collect(),
            },
            ConeBlock::SecondOrder(_) => {
                let sn = soc_det(s).sqrt();
                let zn = soc_det(z).sqrt();
                let sb: Vec<f64> = s.iter().map(|x| x / sn).collect();
                let zb: Vec<f64> = z.iter().map(|x| x / zn).collect();
                let gamma = ((1.0 + dot(&sb, &zb)) / 2.0).sqrt();
                // wb = (sb + J zb) / (2 gamma)
                let wb: Vec<f64> = sb
                    .iter()
                    .zip(&zb)
                    .enumerate()
                    .map(|(k, (a, b))| (if k == 0 { a + b } else { a - b }) / (2.0 * gamma))
                    .collect();
                let scale = (2.0 * (wb[0] + 1.0)).sqrt();
                let mut v = wb;
                v[0] += 1.0;
                v.iter_mut().for_each(|x| *x /= scale);
                Scaling::Soc {
                    beta: (sn / zn).sqrt(),
                    v,
                }
            }
        }
    }

    /// `out = W x`
    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Orthant { d } => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(d) {
                    *o = a * b;
                }
            }
            Scaling::Soc { beta, v } => {
                let vx = dot(v, x);
                out[0] = beta * (2.0 * v[0] * vx - x[0]);
                for k in 1..x.len() {
                    out[k] = beta * (2.0 * v[k] * vx + x[k]);
                }
            }
        }
    }

    /// `out = W^{-1} x`, using `W^{-1} = (2 Jv (Jv)' - J) / beta`.
    pub(crate) fn apply_inv(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Orthant { d } => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(d) {
                    *o = a / b;
                }
            }
            Scaling::Soc { beta, v } => {
                let jvx = v[0] * x[0] - dot(&v[1..], &x[1..]);
                out[0] = (2.0 * v[0] * jvx - x[0]) / beta;
                for k in 1..x.len() {
                    out[k] = (-2.0 * v[k] * jvx + x[k]) / beta;
                }
            }
        }
    }
}
