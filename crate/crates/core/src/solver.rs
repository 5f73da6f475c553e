//! Weighted basis pursuit: `min ‖x‖_{1,w}` subject to `Ax = b`.
//!
//! The problem is solved as the linear program
//!
//! ```text
//! min Σ_j w_j (u_j + v_j)   s.t.  A(u − v) = b,  u, v ≥ 0
//! ```
//!
//! with a dense Mehrotra predictor-corrector interior-point method. Its dual
//! is `max bᵀy` subject to `|Aᵀy|_j ≤ w_j`, so every optimal solve carries a
//! certificate `y` that [`kkt_report`] can check independently.
//!
//! Rank-deficient or overdetermined systems are first reduced to an
//! equivalent full-row-rank system through a thin SVD; inconsistent systems
//! are reported as [`BpStatus::Infeasible`].

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SVD};
use serde::Serialize;

use crate::error::{Error, Result};

/// Duality-gap and feasibility tolerance used by the experiments.
pub const DEFAULT_TOL: f64 = 1e-8;

const MAX_ITER: usize = 200;
const STEP_DAMPING: f64 = 0.995;
const NEAR_CONVERGED: f64 = 1e3;
const POLISH_EXTRA: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct BpProblem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    w: Vec<f64>,
}

impl BpProblem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, w: Vec<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "matrix has {} rows but right-hand side has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.ncols() != w.len() {
            return Err(Error::Dimension(format!(
                "matrix has {} columns but {} weights were given",
                a.ncols(),
                w.len()
            )));
        }
        if a.ncols() == 0 {
            return Err(Error::Dimension("problem has no unknowns".into()));
        }
        if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Domain(format!(
                "weights must be finite and non-negative, got {bad}"
            )));
        }
        if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Domain(
                "matrix and right-hand side must be finite".into(),
            ));
        }
        Ok(BpProblem { a, b, w })
    }

    /// Row-major constructor.
    pub fn from_rows(m: usize, d: usize, a: &[f64], b: &[f64], w: &[f64]) -> Result<Self> {
        if a.len() != m * d {
            return Err(Error::Dimension(format!(
                "expected {} matrix entries, got {}",
                m * d,
                a.len()
            )));
        }
        Self::new(
            DMatrix::from_row_slice(m, d, a),
            DVector::from_column_slice(b),
            w.to_vec(),
        )
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BpStatus {
    Optimal,
    Infeasible,
    /// Solved, but some weight is zero so the minimizer may not be unique.
    DegenerateWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpSolution {
    pub x_hat: Vec<f64>,
    /// `‖x̂‖_{1,w}`.
    pub objective: f64,
    pub status: BpStatus,
    /// Dual vector `y` (length `m`); zeros when infeasible.
    pub dual: Vec<f64>,
    /// `‖A x̂ − b‖₂`.
    pub residual: f64,
    pub iterations: usize,
}

/// Equality system after removing redundant rows: `reduced_a·x = reduced_b`
/// with `reduced_a = Uᵀ A`, so the original dual is `U·ỹ`.
struct Reduced {
    a: DMatrix<f64>,
    b: DVector<f64>,
    back: Option<DMatrix<f64>>,
}

fn has_full_row_rank(a: &DMatrix<f64>) -> bool {
    if a.nrows() > a.ncols() {
        return false;
    }
    let gram = a * a.transpose();
    match Cholesky::new(gram) {
        Some(ch) => {
            let diag = ch.l_dirty().diagonal();
            let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
            // condition number of the Gram matrix below ~1e13
            lo > 0.0 && (lo / hi) > 3e-7
        }
        None => false,
    }
}

/// Either the reduced system or the least-squares point of an inconsistent one.
fn reduce(problem: &BpProblem, tol: f64) -> std::result::Result<Reduced, DVector<f64>> {
    if has_full_row_rank(&problem.a) {
        return Ok(Reduced {
            a: problem.a.clone(),
            b: problem.b.clone(),
            back: None,
        });
    }
    let svd = SVD::new(problem.a.clone(), true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let s_max = svd.singular_values.max();
    let cutoff = s_max * 1e-10 * (problem.m().max(problem.d()) as f64);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff)
        .collect();
    let u_r = u.select_columns(&keep);
    let ub = u_r.transpose() * &problem.b;
    let projected = &u_r * &ub;
    let b_norm = problem.b.norm();
    if (&problem.b - projected).norm() > tol.sqrt() * (1.0 + b_norm) {
        let mut x = DVector::zeros(problem.d());
        for (k, &i) in keep.iter().enumerate() {
            let coef = ub[k] / svd.singular_values[i];
            x += v_t.row(i).transpose() * coef;
        }
        return Err(x);
    }
    let a = u_r.transpose() * &problem.a;
    Ok(Reduced {
        a,
        b: ub,
        back: Some(u_r),
    })
}

/// Iterate state for the split LP in `z = [u; v]`.
struct Ipm<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    c: DVector<f64>,
    d: usize,
}

impl Ipm<'_> {
    /// `M z = A(u − v)`.
    fn m_mul(&self, z: &DVector<f64>) -> DVector<f64> {
        let diff = z.rows(0, self.d) - z.rows(self.d, self.d);
        self.a * diff
    }

    /// `Mᵀ y = [Aᵀy; −Aᵀy]`.
    fn mt_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        let aty = self.a.tr_mul(y);
        let mut out = DVector::zeros(2 * self.d);
        out.rows_mut(0, self.d).copy_from(&aty);
        out.rows_mut(self.d, self.d).copy_from(&(-aty));
        out
    }

    /// Factor `A·diag(D_u + D_v)·Aᵀ`, adding diagonal regularization if the
    /// iterate has made it numerically singular.
    fn factor(&self, scale: &DVector<f64>) -> Result<Cholesky<f64, Dyn>> {
        let mut sqrt_diag = DVector::zeros(self.d);
        for j in 0..self.d {
            sqrt_diag[j] = (scale[j] + scale[self.d + j]).sqrt();
        }
        let mut scaled = self.a.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= sqrt_diag[j];
        }
        let normal = &scaled * scaled.transpose();
        let base = normal.diagonal().max().max(1e-300);
        let mut reg = 0.0;
        for _ in 0..12 {
            let mut trial = normal.clone();
            for i in 0..trial.nrows() {
                trial[(i, i)] += reg;
            }
            if let Some(ch) = Cholesky::new(trial) {
                return Ok(ch);
            }
            reg = if reg == 0.0 {
                base * 1e-14
            } else {
                reg * 100.0
            };
        }
        Err(Error::Numerical(
            "normal equations are not positive definite".into(),
        ))
    }

    /// Newton direction for residuals `(r_p, r_d)` and complementarity
    /// right-hand side `r_c`.
    fn direction(
        &self,
        ch: &Cholesky<f64, Dyn>,
        z: &DVector<f64>,
        s: &DVector<f64>,
        r_p: &DVector<f64>,
        r_d: &DVector<f64>,
        r_c: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let n = 2 * self.d;
        let mut q = DVector::zeros(n);
        for i in 0..n {
            q[i] = (z[i] * r_d[i] - r_c[i]) / s[i];
        }
        let rhs = r_p + self.m_mul(&q);
        let dy = ch.solve(&rhs);
        let ds = r_d - self.mt_mul(&dy);
        let mut dz = DVector::zeros(n);
        for i in 0..n {
            dz[i] = (r_c[i] - z[i] * ds[i]) / s[i];
        }
        (dz, dy, ds)
    }
}

fn max_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(1.0, f64::min)
}

/// Active-set refinement of a converged interior-point pair.
///
/// Entries whose magnitude exceeds their dual slack `w_j − |Aᵀy|_j` form the
/// support `J`. On it `x_J` is re-solved from `A_J x_J = b` and `y` is
/// projected onto `{y : A_Jᵀy = w_J sgn x_J}`. If that fails, the next few
/// entries by `|x_j|`/slack ratio are added to `J` one at a time. A refined
/// pair replaces the original only if signs, feasibility, dual feasibility
/// and objective all hold up.
fn polish(
    problem: &BpProblem,
    x: &[f64],
    y: &DVector<f64>,
    tol: f64,
) -> Option<(Vec<f64>, DVector<f64>)> {
    let aty = problem.a.tr_mul(y);
    let slack = |j: usize| (problem.w[j] - aty[j].abs()).max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..problem.d()).filter(|&j| x[j] != 0.0).collect();
    order.sort_by(|&i, &j| (x[j].abs() / slack(j)).total_cmp(&(x[i].abs() / slack(i))));
    let strict = order.iter().take_while(|&&j| x[j].abs() > slack(j)).count();
    if strict == 0 {
        return None;
    }
    let limit = problem.m().min(order.len()).min(strict + POLISH_EXTRA);
    (strict..=limit).find_map(|n| refine(problem, x, y, &aty, &order[..n], tol))
}

fn refine(
    problem: &BpProblem,
    x: &[f64],
    y: &DVector<f64>,
    aty: &DVector<f64>,
    support: &[usize],
    tol: f64,
) -> Option<(Vec<f64>, DVector<f64>)> {
    let a_j = problem.a.select_columns(support);
    // A_J = U Σ Vᵀ: x_J = V Σ⁻¹ Uᵀ b, and the min-norm dual correction is U Σ⁻¹ Vᵀ r
    let svd = SVD::new(a_j.clone(), true, true);
    let sv = &svd.singular_values;
    if sv.min() <= sv.max() * 1e-12 {
        return None;
    }
    let (u, v_t) = (svd.u.as_ref()?, svd.v_t.as_ref()?);
    let x_j = v_t.tr_mul(&u.tr_mul(&problem.b).component_div(sv));
    let target = DVector::from_iterator(
        support.len(),
        support.iter().map(|&j| problem.w[j] * x[j].signum()),
    );
    let r = target - a_j.tr_mul(y);
    let y_new = y + u * (v_t * r).component_div(sv);

    let mut x_new = vec![0.0; problem.d()];
    for (k, &j) in support.iter().enumerate() {
        if x_j[k].signum() != x[j].signum() {
            return None;
        }
        x_new[j] = x_j[k];
    }
    let b_scale = 1.0 + problem.b.norm();
    let w_scale = 1.0 + problem.w.iter().fold(0.0f64, |m, &v| m.max(v));
    let residual = (&a_j * &x_j - &problem.b).norm();
    let violation = |aty: &DVector<f64>| {
        aty.iter()
            .zip(&problem.w)
            .fold(0.0f64, |m, (a, w)| m.max(a.abs() - w))
    };
    let objective = |x: &[f64]| {
        x.iter()
            .zip(&problem.w)
            .map(|(xi, wi)| wi * xi.abs())
            .sum::<f64>()
    };
    let ok = residual <= tol * b_scale
        && violation(&problem.a.tr_mul(&y_new)) <= violation(aty).max(tol * w_scale)
        && objective(&x_new) <= objective(x) + tol * (1.0 + objective(x));
    ok.then_some((x_new, y_new))
}

fn finish(
    problem: &BpProblem,
    x: Vec<f64>,
    dual: Vec<f64>,
    status: BpStatus,
    iterations: usize,
) -> BpSolution {
    let xv = DVector::from_column_slice(&x);
    let residual = (&problem.a * &xv - &problem.b).norm();
    let objective = x.iter().zip(&problem.w).map(|(xi, wi)| wi * xi.abs()).sum();
    BpSolution {
        x_hat: x,
        objective,
        status,
        dual,
        residual,
        iterations,
    }
}

/// Orthonormal basis of the column space of `a`.
fn range_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = SVD::new(a.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let cutoff = svd.singular_values.max() * 1e-10 * (a.nrows().max(a.ncols()) as f64);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff)
        .collect();
    u.select_columns(&keep)
}

/// Solve weighted basis pursuit to duality gap and feasibility residual
/// `tol` (relative to the problem scale).
///
/// Zero-weight coordinates are unpenalized: they are eliminated by projecting
/// the system onto the orthogonal complement of their columns, and recovered
/// afterwards as the minimum-norm least-squares fit of the remaining residual.
pub fn weighted_bp(problem: &BpProblem, tol: f64) -> Result<BpSolution> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let free: Vec<usize> = (0..problem.d()).filter(|&j| problem.w[j] == 0.0).collect();
    if free.is_empty() {
        return solve_positive(problem, tol, BpStatus::Optimal);
    }
    let penalized: Vec<usize> = (0..problem.d()).filter(|&j| problem.w[j] != 0.0).collect();
    let a_f = problem.a.select_columns(&free);
    let q = range_basis(&a_f);
    let project = |v: DMatrix<f64>| {
        let qtv = q.tr_mul(&v);
        v - &q * qtv
    };

    let (x_n, dual, status, iterations) = if penalized.is_empty() {
        (
            Vec::new(),
            vec![0.0; problem.m()],
            BpStatus::DegenerateWeights,
            0,
        )
    } else {
        let a_n = project(problem.a.select_columns(&penalized));
        let b_n = project(DMatrix::from_column_slice(
            problem.m(),
            1,
            problem.b.as_slice(),
        ))
        .column(0)
        .into_owned();
        let w_n = penalized.iter().map(|&j| problem.w[j]).collect();
        let sub = BpProblem {
            a: a_n,
            b: b_n,
            w: w_n,
        };
        let sol = solve_positive(&sub, tol, BpStatus::DegenerateWeights)?;
        (sol.x_hat, sol.dual, sol.status, sol.iterations)
    };

    let mut x = vec![0.0; problem.d()];
    for (k, &j) in penalized.iter().enumerate() {
        x[j] = x_n[k];
    }
    let rest = &problem.b - &problem.a * DVector::from_column_slice(&x);
    let x_f = SVD::new(a_f, true, true).solve(&rest, 1e-12).map_err(|e| {
        Error::Numerical(format!(
            "least-squares fit of unpenalized entries failed: {e}"
        ))
    })?;
    for (k, &j) in free.iter().enumerate() {
        x[j] = x_f[k];
    }
    let mut sol = finish(problem, x, dual, status, iterations);
    if sol.status != BpStatus::Infeasible && sol.residual > tol.sqrt() * (1.0 + problem.b.norm()) {
        sol.status = BpStatus::Infeasible;
    }
    Ok(sol)
}

/// Interior-point solve for strictly positive weights.
fn solve_positive(problem: &BpProblem, tol: f64, solved: BpStatus) -> Result<BpSolution> {
    let d = problem.d();
    let finish = |x: Vec<f64>, dual: Vec<f64>, status: BpStatus, iterations: usize| {
        finish(problem, x, dual, status, iterations)
    };

    if problem.m() == 0 {
        return Ok(finish(vec![0.0; d], vec![], solved, 0));
    }
    let reduced = match reduce(problem, tol) {
        Ok(r) => r,
        Err(ls) => {
            return Ok(finish(
                ls.iter().copied().collect(),
                vec![0.0; problem.m()],
                BpStatus::Infeasible,
                0,
            ))
        }
    };
    if reduced.a.nrows() == 0 {
        // A = 0 and b = 0: x = 0 is optimal
        return Ok(finish(vec![0.0; d], vec![0.0; problem.m()], solved, 0));
    }

    let n = 2 * d;
    let mut c = DVector::zeros(n);
    for j in 0..d {
        c[j] = problem.w[j];
        c[d + j] = problem.w[j];
    }
    let ipm = Ipm {
        a: &reduced.a,
        b: &reduced.b,
        c,
        d,
    };

    // Mehrotra starting point; M c = 0, so the least-squares dual start is y = 0.
    let gram = &reduced.a * reduced.a.transpose() * 2.0;
    let t = Cholesky::new(gram)
        .ok_or_else(|| Error::Numerical("reduced system lost full row rank".into()))?
        .solve(ipm.b);
    let mut z = ipm.mt_mul(&t);
    let mut y = DVector::zeros(reduced.a.nrows());
    let mut s = ipm.c.clone();
    let shift_z = (-1.5 * z.min()).max(0.0);
    let shift_s = (-1.5 * s.min()).max(0.0);
    z.add_scalar_mut(shift_z);
    s.add_scalar_mut(shift_s);
    let zs = z.dot(&s);
    if zs > 0.0 && zs.is_finite() {
        z.add_scalar_mut(0.5 * zs / s.sum());
        s.add_scalar_mut(0.5 * zs / z.sum());
    } else {
        z.fill(1.0);
        s.fill(1.0);
    }

    let b_scale = 1.0 + ipm.b.norm();
    let c_scale = 1.0 + ipm.c.norm();
    for iter in 0..MAX_ITER {
        let r_p = ipm.b - ipm.m_mul(&z);
        let r_d = &ipm.c - ipm.mt_mul(&y) - &s;
        let primal_obj = ipm.c.dot(&z);
        let gap = (primal_obj - ipm.b.dot(&y)).abs();
        let worst = (r_p.norm() / b_scale)
            .max(r_d.norm() / c_scale)
            .max(gap / (1.0 + primal_obj.abs()));
        // near convergence, try to finish through the active-set refinement;
        // the iterates tend to stall just above `tol` on ill-conditioned systems
        if worst <= NEAR_CONVERGED * tol {
            let x: Vec<f64> = (0..d).map(|j| z[j] - z[d + j]).collect();
            let dual = match &reduced.back {
                Some(u) => u * &y,
                None => y.clone(),
            };
            match polish(problem, &x, &dual, tol) {
                Some((x, dual)) => {
                    return Ok(finish(x, dual.iter().copied().collect(), solved, iter))
                }
                None if worst <= tol => {
                    return Ok(finish(x, dual.iter().copied().collect(), solved, iter))
                }
                None => {}
            }
        }

        let mu = z.dot(&s) / n as f64;
        let scale = z.component_div(&s);
        let ch = ipm.factor(&scale)?;

        let r_aff = -z.component_mul(&s);
        let (dz_a, _, ds_a) = ipm.direction(&ch, &z, &s, &r_p, &r_d, &r_aff);
        let ap = max_step(&z, &dz_a);
        let ad = max_step(&s, &ds_a);
        let mu_aff = (&z + &dz_a * ap).dot(&(&s + &ds_a * ad)) / n as f64;
        let centering = (mu_aff / mu).powi(3);

        let mut r_c = r_aff - dz_a.component_mul(&ds_a);
        r_c.add_scalar_mut(centering * mu);
        let (dz, dy, ds) = ipm.direction(&ch, &z, &s, &r_p, &r_d, &r_c);
        let ap = (STEP_DAMPING * max_step(&z, &dz)).min(1.0);
        let ad = (STEP_DAMPING * max_step(&s, &ds)).min(1.0);
        z += dz * ap;
        y += dy * ad;
        s += ds * ad;
        if z.iter().chain(s.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "interior-point iterate diverged at iteration {iter}"
            )));
        }
    }
    Err(Error::Numerical(format!(
        "interior-point method did not converge in {MAX_ITER} iterations"
    )))
}

/// Exact recovery test `‖x̂ − x₀‖₂ ≤ threshold` (inclusive).
pub fn success(x_hat: &[f64], x0: &[f64], threshold: f64) -> bool {
    debug_assert_eq!(x_hat.len(), x0.len());
    let err: f64 = x_hat
        .iter()
        .zip(x0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    err <= threshold
}

/// Optimality certificate residuals of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    /// `max_j pos(|Aᵀy|_j − w_j)`.
    pub dual_violation: f64,
    /// `max |(Aᵀy)_j − w_j sgn x̂_j|` over the support of `x̂`.
    pub complementarity: f64,
    /// Number of entries counted as support.
    pub support_size: usize,
}

/// Check the LP optimality conditions of `solution`. An entry belongs to the
/// support when `|x̂_j| > support_tol·max(1, ‖x̂‖_∞)`.
pub fn kkt_report(problem: &BpProblem, solution: &BpSolution, support_tol: f64) -> KktReport {
    let y = DVector::from_column_slice(&solution.dual);
    let aty = problem.a.tr_mul(&y);
    let x_max = solution.x_hat.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut report = KktReport {
        dual_violation: 0.0,
        complementarity: 0.0,
        support_size: 0,
    };
    for j in 0..problem.d() {
        let wj = problem.w[j];
        report.dual_violation = report.dual_violation.max(aty[j].abs() - wj);
        let xj = solution.x_hat[j];
        if xj.abs() > support_tol * x_max {
            report.support_size += 1;
            report.complementarity = report
                .complementarity
                .max((aty[j] - wj * xj.signum()).abs());
        }
    }
    report.dual_violation = report.dual_violation.max(0.0);
    report
}
