//! Dense convex QP by a dual active-set method (Goldfarb–Idnani style) with
//! every step computed from a full KKT solve.
//!
//! Solves `min ½ xᵀHx + gᵀx  s.t.  A_eq x = b_eq,  A_in x ≤ b_in`, where `H`
//! only has to be positive definite on the null space of `A_eq`. The
//! Lagrangian is `f + λᵀ(A_eq x − b_eq) + μᵀ(A_in x − b_in)` with `μ ≥ 0`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("constraints are infeasible (constraint {constraint} cannot be satisfied)")]
    Infeasible { constraint: usize },
    #[error("KKT system is singular with {active} active inequalities")]
    SingularKkt { active: usize },
    #[error("no convergence after {0} iterations")]
    IterationLimit(usize),
}

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    /// One multiplier per inequality, zero when inactive.
    pub mu: DVector<f64>,
    /// Active inequalities in the order they entered.
    pub active: Vec<usize>,
    pub iterations: usize,
}

const PIVOT_RATIO: f64 = 1e-13;
const RANK_RATIO: f64 = 1e-10;

struct Kkt<'a> {
    p: &'a QpProblem,
}

impl Kkt<'_> {
    /// Solves `[H Nᵀ; N 0] [x; y] = [r1; r2]` with `N` = equalities then the
    /// listed inequality rows.
    fn solve(
        &self,
        active: &[usize],
        r1: &DVector<f64>,
        r2: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>), QpError> {
        let n = self.p.h.nrows();
        let me = self.p.a_eq.nrows();
        let m = me + active.len();
        let mut k = DMatrix::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).copy_from(&self.p.h);
        for (row, src) in (0..me)
            .map(|i| (i, self.p.a_eq.row(i)))
            .chain(active.iter().enumerate().map(|(j, &c)| (me + j, self.p.a_in.row(c))))
        {
            for col in 0..n {
                k[(n + row, col)] = src[col];
                k[(col, n + row)] = src[col];
            }
        }
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(r1);
        rhs.rows_mut(n, m).copy_from(r2);

        let lu = k.full_piv_lu();
        let diag = lu.u().diagonal();
        let big = diag.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let small = diag.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        if !(big > 0.0) || small <= PIVOT_RATIO * big {
            return Err(QpError::SingularKkt { active: active.len() });
        }
        let sol = lu.solve(&rhs).ok_or(QpError::SingularKkt { active: active.len() })?;
        Ok((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
    }

    /// Whether inequality `c` is a linear combination of the equalities and
    /// the active inequalities, which are independent by construction.
    fn dependent(&self, active: &[usize], c: usize) -> bool {
        let n = self.p.h.nrows();
        let rows: Vec<_> = (0..self.p.a_eq.nrows())
            .map(|i| self.p.a_eq.row(i))
            .chain(active.iter().chain([&c]).map(|&j| self.p.a_in.row(j)))
            .collect();
        if rows.len() > n {
            return true;
        }
        let sv = DMatrix::from_rows(&rows).singular_values();
        let big = sv.iter().fold(0.0f64, |a, v| a.max(*v));
        let small = sv.iter().fold(f64::INFINITY, |a, v| a.min(*v));
        small <= RANK_RATIO * big
    }
}

fn feasibility_tol(b: f64) -> f64 {
    1e-11 * (1.0 + b.abs())
}

pub fn solve_qp(p: &QpProblem) -> Result<QpSolution, QpError> {
    let n = p.h.nrows();
    let me = p.a_eq.nrows();
    let mi = p.a_in.nrows();
    let kkt = Kkt { p };

    let (mut x, mut lambda) = kkt.solve(&[], &(-&p.g), &p.b_eq)?;
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let max_iter = 50 * (n + me + mi + 1);
    let mut iterations = 0;

    loop {
        // most violated inequality, lowest index on ties
        let mut pick: Option<(usize, f64)> = None;
        for c in 0..mi {
            if active.contains(&c) {
                continue;
            }
            let s = p.a_in.row(c).dot(&x.transpose()) - p.b_in[c];
            if s > feasibility_tol(p.b_in[c]) && pick.is_none_or(|(_, best)| s > best) {
                pick = Some((c, s));
            }
        }
        let Some((np, mut slack)) = pick else {
            break;
        };
        let normal: DVector<f64> = p.a_in.row(np).transpose();
        let mut u_new = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::IterationLimit(max_iter));
            }
            let zero_rhs = DVector::zeros(me + active.len());
            let (z, dy) = kkt.solve(&active, &(-&normal), &zero_rhs)?;
            let dlambda = dy.rows(0, me).into_owned();
            let du: Vec<f64> = dy.iter().skip(me).copied().collect();

            // dual step limit: first active multiplier to hit zero
            let mut t1 = f64::INFINITY;
            let mut block = None;
            for (j, (&uj, &dj)) in u.iter().zip(&du).enumerate() {
                if dj < 0.0 {
                    let t = -uj / dj;
                    if t < t1 {
                        t1 = t;
                        block = Some(j);
                    }
                }
            }
            // a dependent normal admits only a dual step
            let nz = normal.dot(&z);
            let t2 = if nz < 0.0 && !kkt.dependent(&active, np) { -slack / nz } else { f64::INFINITY };

            if t1.is_infinite() && t2.is_infinite() {
                return Err(QpError::Infeasible { constraint: np });
            }
            let t = t1.min(t2);
            if t2.is_finite() {
                x += &z * t;
                slack += t * nz;
            }
            lambda += &dlambda * t;
            for (uj, dj) in u.iter_mut().zip(&du) {
                *uj += t * dj;
            }
            u_new += t;

            if t2 <= t1 {
                active.push(np);
                u.push(u_new);
                break;
            }
            let j = block.expect("finite t1 has a blocking constraint");
            active.remove(j);
            u.remove(j);
        }
    }

    let mut mu = DVector::zeros(mi);
    for (&c, &uc) in active.iter().zip(&u) {
        mu[c] = uc.max(0.0);
    }
    Ok(QpSolution { x, lambda, mu, active, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(
        h: &[f64],
        g: &[f64],
        a_eq: (&[f64], usize),
        b_eq: &[f64],
        a_in: (&[f64], usize),
        b_in: &[f64],
    ) -> QpProblem {
        let n = g.len();
        QpProblem {
            h: DMatrix::from_row_slice(n, n, h),
            g: DVector::from_row_slice(g),
            a_eq: DMatrix::from_row_slice(a_eq.1, n, a_eq.0),
            b_eq: DVector::from_row_slice(b_eq),
            a_in: DMatrix::from_row_slice(a_in.1, n, a_in.0),
            b_in: DVector::from_row_slice(b_in),
        }
    }

    #[test]
    fn box_constrained_minimum() {
        // min (x-3)^2 + (y+1)^2 with x <= 1, y >= 0  ->  (1, 0), mu = (4, 2)
        let p = problem(&[2.0, 0.0, 0.0, 2.0], &[-6.0, 2.0], (&[], 0), &[], (&[1.0, 0.0, 0.0, -1.0], 2), &[1.0, 0.0]);
        let s = solve_qp(&p).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && s.x[1].abs() < 1e-12);
        assert!((s.mu[0] - 4.0).abs() < 1e-12 && (s.mu[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn equality_multiplier_sign() {
        // min x^2 + y^2 s.t. x + y = 2: x = y = 1, stationarity 2 + lambda = 0
        let p = problem(&[2.0, 0.0, 0.0, 2.0], &[0.0, 0.0], (&[1.0, 1.0], 1), &[2.0], (&[], 0), &[]);
        let s = solve_qp(&p).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert!((s.lambda[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        // x <= 1 and -x <= -2
        let p = problem(&[2.0], &[0.0], (&[], 0), &[], (&[1.0, -1.0], 2), &[1.0, -2.0]);
        assert!(matches!(solve_qp(&p), Err(QpError::Infeasible { .. })));
    }

    #[test]
    fn singular_hessian_reported() {
        let p = problem(&[0.0], &[1.0], (&[], 0), &[], (&[], 0), &[]);
        assert!(matches!(solve_qp(&p), Err(QpError::SingularKkt { .. })));
    }
}
