//! Dense convex QP solver.
//!
//! Minimizes 0.5 x'Hx + g'x subject to lb <= Cx <= ub using operator
//! splitting (ADMM) with over-relaxation and a fixed penalty. The KKT matrix
//! is factored once per solve; warm starting reuses the previous primal/dual
//! iterates, which keeps per-tick cost low inside a 20 Hz control loop.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Hessian is not symmetric: asymmetry {0}")]
    NotSymmetric(f64),
    #[error("failed to write QP dump to {path}: {source}")]
    Dump {
        path: String,
        source: std::io::Error,
    },
}

/// Inequality-constrained QP: 0.5 x'Hx + g'x, lb <= Cx <= ub.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub c: DMatrix<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

pub const QP_INF: f64 = 1e20;

impl QpProblem {
    pub fn unconstrained(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        Self {
            h,
            g,
            c: DMatrix::zeros(0, n),
            lb: DVector::zeros(0),
            ub: DVector::zeros(0),
        }
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn m(&self) -> usize {
        self.lb.len()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.n();
        let m = self.m();
        if self.h.nrows() != n || self.h.ncols() != n {
            return Err(QpError::DimensionMismatch(format!(
                "H is {}x{}, expected {n}x{n}",
                self.h.nrows(),
                self.h.ncols()
            )));
        }
        if self.c.nrows() != m || self.c.ncols() != n || self.ub.len() != m {
            return Err(QpError::DimensionMismatch(format!(
                "C is {}x{}, bounds {}/{}, expected {m} rows and {n} cols",
                self.c.nrows(),
                self.c.ncols(),
                self.lb.len(),
                self.ub.len()
            )));
        }
        let asym = (&self.h - self.h.transpose()).abs().max();
        if asym > 1e-10 {
            return Err(QpError::NotSymmetric(asym));
        }
        for i in 0..m {
            if self.lb[i] > self.ub[i] {
                return Err(QpError::DimensionMismatch(format!(
                    "lb[{i}] = {} exceeds ub[{i}] = {}",
                    self.lb[i], self.ub[i]
                )));
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x.transpose() * &self.h * x)[(0, 0)] + self.g.dot(x)
    }

    /// Plain-text dump of (H, g, C, lb, ub) for offline inspection.
    pub fn dump(&self, path: &Path) -> Result<(), QpError> {
        let mut out = String::new();
        let mut write_matrix = |name: &str, m: &DMatrix<f64>| {
            out.push_str(&format!("# {name} {}x{}\n", m.nrows(), m.ncols()));
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.12e}", m[(r, c)])).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        };
        write_matrix("H", &self.h);
        write_matrix("C", &self.c);
        let mut write_vector = |name: &str, v: &DVector<f64>| {
            out.push_str(&format!("# {name} {}\n", v.len()));
            for r in 0..v.len() {
                out.push_str(&format!("{:.12e}\n", v[r]));
            }
        };
        write_vector("g", &self.g);
        write_vector("lb", &self.lb);
        write_vector("ub", &self.ub);
        let mut f = std::fs::File::create(path).map_err(|e| QpError::Dump {
            path: path.display().to_string(),
            source: e,
        })?;
        f.write_all(out.as_bytes()).map_err(|e| QpError::Dump {
            path: path.display().to_string(),
            source: e,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Constraint multipliers, one per row of C.
    pub y: DVector<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QpOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// ADMM penalty, fixed across the solve.
    pub rho: f64,
    /// Proximal regularization on the x update.
    pub sigma: f64,
    /// Over-relaxation factor.
    pub alpha: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            max_iter: 4000,
            tol: 1e-6,
            rho: 10.0,
            sigma: 1e-6,
            alpha: 1.6,
        }
    }
}

/// Diagonal (Ruiz) equilibration of the stacked [H; C] data plus a scalar
/// cost factor. The scaled problem is
///   min 0.5 x~'(c D H D)x~ + (c D g)'x~  s.t.  E lb <= (E C D) x~ <= E ub
/// with x = D x~ and y = E y~ / c, so a fixed ADMM penalty behaves
/// consistently across problems with very different natural units.
#[derive(Debug, Clone)]
struct Scaling {
    d: DVector<f64>,
    e: DVector<f64>,
    cost: f64,
}

impl Scaling {
    fn compute(prob: &QpProblem) -> Self {
        let n = prob.n();
        let m = prob.m();
        let mut d = DVector::from_element(n, 1.0);
        let mut e = DVector::from_element(m, 1.0);
        let mut h = prob.h.clone();
        let mut cmat = prob.c.clone();
        for _ in 0..10 {
            // Equilibrate the KKT block [[H, C'], [C, 0]]: column j sees the
            // H column and the C column; constraint row i sees the C row.
            let mut dd = DVector::from_element(n, 1.0);
            for j in 0..n {
                let mut norm: f64 = 0.0;
                for i in 0..n {
                    norm = norm.max(h[(i, j)].abs());
                }
                for i in 0..m {
                    norm = norm.max(cmat[(i, j)].abs());
                }
                if norm > 1e-12 {
                    dd[j] = (1.0 / norm.sqrt()).clamp(1e-6, 1e6);
                }
            }
            let mut ee = DVector::from_element(m, 1.0);
            for i in 0..m {
                let mut norm: f64 = 0.0;
                for j in 0..n {
                    norm = norm.max(cmat[(i, j)].abs() * dd[j]);
                }
                if norm > 1e-12 {
                    ee[i] = (1.0 / norm.sqrt()).clamp(1e-6, 1e6);
                }
            }
            for i in 0..n {
                for j in 0..n {
                    h[(i, j)] *= dd[i] * dd[j];
                }
            }
            for i in 0..m {
                for j in 0..n {
                    cmat[(i, j)] *= ee[i] * dd[j];
                }
            }
            d.component_mul_assign(&dd);
            e.component_mul_assign(&ee);
        }
        // Cost scaling normalizes the objective magnitude against the
        // (already equilibrated) constraint block.
        let mut mean_col: f64 = 0.0;
        for j in 0..n {
            let mut norm: f64 = 0.0;
            for i in 0..n {
                norm = norm.max(h[(i, j)].abs());
            }
            mean_col += norm;
        }
        mean_col /= n.max(1) as f64;
        let g_inf = (0..n).fold(0.0f64, |acc, j| acc.max((prob.g[j] * d[j]).abs()));
        let denom = mean_col.max(g_inf);
        let cost = if denom > 1e-12 {
            (1.0 / denom).clamp(1e-8, 1e8)
        } else {
            1.0
        };
        Self { d, e, cost }
    }

    fn apply(&self, prob: &QpProblem) -> QpProblem {
        let n = prob.n();
        let m = prob.m();
        let mut h = prob.h.clone();
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] *= self.cost * self.d[i] * self.d[j];
            }
        }
        let g = DVector::from_fn(n, |j, _| self.cost * self.d[j] * prob.g[j]);
        let mut c = prob.c.clone();
        for i in 0..m {
            for j in 0..n {
                c[(i, j)] *= self.e[i] * self.d[j];
            }
        }
        // Infinite bounds stay infinite rather than being rescaled.
        let lb = DVector::from_fn(m, |i, _| {
            if prob.lb[i] <= -QP_INF {
                prob.lb[i]
            } else {
                self.e[i] * prob.lb[i]
            }
        });
        let ub = DVector::from_fn(m, |i, _| {
            if prob.ub[i] >= QP_INF {
                prob.ub[i]
            } else {
                self.e[i] * prob.ub[i]
            }
        });
        QpProblem { h, g, c, lb, ub }
    }

    fn scale_primal(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_div(&self.d)
    }

    fn unscale_primal(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.d)
    }

    fn scale_dual(&self, y: &DVector<f64>) -> DVector<f64> {
        self.cost * y.component_div(&self.e)
    }

    fn unscale_dual(&self, y: &DVector<f64>) -> DVector<f64> {
        y.component_mul(&self.e) / self.cost
    }
}

/// ADMM solver instance holding warm-start state between solves.
#[derive(Debug, Default)]
pub struct QpSolver {
    warm_x: Option<DVector<f64>>,
    warm_y: Option<DVector<f64>>,
}

impl QpSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset_warm_start(&mut self) {
        self.warm_x = None;
        self.warm_y = None;
    }

    pub fn solve(&mut self, prob: &QpProblem, opts: &QpOptions) -> Result<QpSolution, QpError> {
        prob.validate()?;
        let n = prob.n();
        let m = prob.m();

        if n == 0 {
            return Ok(QpSolution {
                x: DVector::zeros(0),
                y: DVector::zeros(m),
                objective: 0.0,
                status: QpStatus::Optimal,
                kkt_residual: 0.0,
                iterations: 0,
            });
        }

        // Equilibrate the problem data so a fixed penalty converges at a
        // scale-independent rate, then run ADMM on the scaled problem.
        let scaling = Scaling::compute(prob);
        let sprob = scaling.apply(prob);

        // Regularize rank-deficient Hessians.
        let mut h = sprob.h.clone();
        let min_eig = h.clone().symmetric_eigenvalues().min();
        if min_eig < 1e-9 {
            for i in 0..n {
                h[(i, i)] += 1e-9 - min_eig.min(0.0);
            }
        }

        let rho = opts.rho;
        let sigma = opts.sigma;
        let mut kkt = h.clone();
        for i in 0..n {
            kkt[(i, i)] += sigma;
        }
        if m > 0 {
            kkt += rho * sprob.c.transpose() * &sprob.c;
        }
        let chol: Cholesky<f64, Dyn> = Cholesky::new(kkt)
            .expect("regularized KKT matrix must be positive definite");

        // Warm starts are stored in problem units; map into scaled space.
        let mut x = match &self.warm_x {
            Some(w) if w.len() == n => scaling.scale_primal(w),
            _ => DVector::zeros(n),
        };
        let mut y = match &self.warm_y {
            Some(w) if w.len() == m => scaling.scale_dual(w),
            _ => DVector::zeros(m),
        };
        let mut z = if m > 0 {
            clamp(&(&sprob.c * &x), &sprob.lb, &sprob.ub)
        } else {
            DVector::zeros(0)
        };

        let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
        let mut status = QpStatus::MaxIter;
        let mut iterations = opts.max_iter;

        for iter in 0..opts.max_iter {
            // x update: (H + sigma I + rho C'C) x = sigma x - g + C'(rho z - y)
            let mut rhs = sigma * &x - &sprob.g;
            if m > 0 {
                rhs += sprob.c.transpose() * (rho * &z - &y);
            }
            let x_new = chol.solve(&rhs);

            let (z_new, y_new, r_prim) = if m > 0 {
                let cx = &sprob.c * &x_new;
                let cx_relax = opts.alpha * &cx + (1.0 - opts.alpha) * &z;
                let z_new = clamp(&(&cx_relax + &y / rho), &sprob.lb, &sprob.ub);
                let y_new = &y + rho * (&cx_relax - &z_new);
                let r_prim = (&cx - &z_new).abs().max();
                (z_new, y_new, r_prim)
            } else {
                (z, y.clone(), 0.0)
            };

            // Track the best iterate by a feasibility-weighted merit.
            let merit = sprob.objective(&x_new) + rho * r_prim;
            match &best {
                Some((b, _, _)) if *b <= merit => {}
                _ => best = Some((merit, x_new.clone(), y_new.clone())),
            }

            let dy = &y_new - &y;
            x = x_new;
            z = z_new;
            y = y_new;

            // Termination is checked on the residuals of the original
            // (unscaled) problem so the tolerance keeps its physical units.
            {
                let xu = scaling.unscale_primal(&x);
                let yu = scaling.unscale_dual(&y);
                let rd_u = (&prob.h * &xu + &prob.g + prob.c.transpose() * &yu)
                    .abs()
                    .max();
                let mut rp_u: f64 = 0.0;
                if m > 0 {
                    let cxu = &prob.c * &xu;
                    for i in 0..m {
                        rp_u = rp_u
                            .max(prob.lb[i] - cxu[i])
                            .max(cxu[i] - prob.ub[i]);
                    }
                }
                if rp_u < opts.tol && rd_u < opts.tol {
                    status = QpStatus::Optimal;
                    iterations = iter + 1;
                    break;
                }
            }

            // Primal infeasibility certificate: the dual step direction
            // stops producing progress while its support function is
            // negative and C' dy vanishes.
            if m > 0 && iter > 50 && iter % 25 == 0 {
                let dy_norm = dy.abs().max();
                if dy_norm > 1e-12 {
                    let dyn_ = &dy / dy_norm;
                    let ct_dy = (sprob.c.transpose() * &dyn_).abs().max();
                    let mut support = 0.0;
                    for i in 0..m {
                        if dyn_[i] > 0.0 {
                            support += bounded(sprob.ub[i]) * dyn_[i];
                        } else {
                            support += bounded(sprob.lb[i]) * dyn_[i];
                        }
                    }
                    if ct_dy < 1e-8 && support < -1e-8 {
                        status = QpStatus::Infeasible;
                        iterations = iter + 1;
                        break;
                    }
                }
            }
        }

        let (x_scaled, y_scaled) = if status == QpStatus::MaxIter {
            match best {
                Some((_, bx, by)) => (bx, by),
                None => (x, y),
            }
        } else {
            (x, y)
        };
        let mut x_out = scaling.unscale_primal(&x_scaled);
        let mut y_out = scaling.unscale_dual(&y_scaled);

        // Polish: re-solve the equality-constrained KKT system on the active
        // set. ADMM iterates carry O(tol) infeasibility; polishing recovers
        // near-machine accuracy when the active set is identified correctly.
        if status != QpStatus::Infeasible {
            if let Some((xp, yp)) = polish(prob, &prob.h, &x_out, &y_out) {
                let before = kkt_residual(prob, &x_out, &y_out);
                let after = kkt_residual(prob, &xp, &yp);
                if after < before {
                    x_out = xp;
                    y_out = yp;
                    if status == QpStatus::MaxIter && after < opts.tol {
                        status = QpStatus::Optimal;
                    }
                }
            }
        }

        self.warm_x = Some(x_out.clone());
        self.warm_y = Some(y_out.clone());

        let kkt_res = kkt_residual(prob, &x_out, &y_out);
        Ok(QpSolution {
            objective: prob.objective(&x_out),
            x: x_out,
            y: y_out,
            status,
            kkt_residual: kkt_res,
            iterations,
        })
    }
}

/// Equality-constrained re-solve on the active set identified by the signs
/// of the multipliers. Returns the polished primal/dual pair, or None when
/// the active-set system cannot be solved.
fn polish(
    prob: &QpProblem,
    h: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let m = prob.m();
    let cx = if m > 0 {
        &prob.c * x
    } else {
        DVector::zeros(0)
    };
    // Seed the working set from the multiplier signs; near-boundary rows with
    // tiny multipliers are included so weakly-active constraints stay pinned.
    // `true` marks the upper bound.
    let mut active: Vec<(usize, bool)> = Vec::new();
    for i in 0..m {
        if y[i] > 1e-10 && prob.ub[i] < QP_INF {
            active.push((i, true));
        } else if y[i] < -1e-10 && prob.lb[i] > -QP_INF {
            active.push((i, false));
        } else if (cx[i] - prob.ub[i]).abs() < 1e-7 && prob.ub[i] < QP_INF {
            active.push((i, true));
        } else if (cx[i] - prob.lb[i]).abs() < 1e-7 && prob.lb[i] > -QP_INF {
            active.push((i, false));
        }
    }
    // Active-set refinement: solve the equality KKT system on the working
    // set, drop rows whose multiplier sign contradicts the bound, add rows
    // the solution violates, and repeat until the set is consistent.
    let mut result: Option<(DVector<f64>, DVector<f64>)> = None;
    for _ in 0..20 {
        let (xp, yp) = solve_equality_kkt(prob, h, &active)?;
        let mut changed = false;
        active.retain(|&(row, upper)| {
            let keep = if upper {
                yp[row] >= -1e-9
            } else {
                yp[row] <= 1e-9
            };
            if !keep {
                changed = true;
            }
            keep
        });
        if m > 0 {
            let cxp = &prob.c * &xp;
            for i in 0..m {
                if active.iter().any(|&(row, _)| row == i) {
                    continue;
                }
                if cxp[i] > prob.ub[i] + 1e-9 && prob.ub[i] < QP_INF {
                    active.push((i, true));
                    changed = true;
                } else if cxp[i] < prob.lb[i] - 1e-9 && prob.lb[i] > -QP_INF {
                    active.push((i, false));
                    changed = true;
                }
            }
        }
        result = Some((xp, yp));
        if !changed {
            break;
        }
    }
    let (xp, yp) = result?;
    // Reject polishes that leave a constraint violated.
    if m > 0 {
        let cxp = &prob.c * &xp;
        for i in 0..m {
            if cxp[i] < prob.lb[i] - 1e-8 || cxp[i] > prob.ub[i] + 1e-8 {
                return None;
            }
        }
    }
    Some((xp, yp))
}

/// Solve the KKT system with the working-set rows held at their bounds,
/// using a lightly regularized LU factorization plus iterative refinement
/// against the exact system.
fn solve_equality_kkt(
    prob: &QpProblem,
    h: &DMatrix<f64>,
    active: &[(usize, bool)],
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = prob.n();
    let m = prob.m();
    let k = active.len();
    let dim = n + k;
    let delta = 1e-9;
    let mut kkt_exact = DMatrix::zeros(dim, dim);
    kkt_exact.view_mut((0, 0), (n, n)).copy_from(h);
    for (a, &(row, _)) in active.iter().enumerate() {
        for j in 0..n {
            kkt_exact[(n + a, j)] = prob.c[(row, j)];
            kkt_exact[(j, n + a)] = prob.c[(row, j)];
        }
    }
    let mut kkt = kkt_exact.clone();
    for i in 0..n {
        kkt[(i, i)] += delta;
    }
    for i in n..dim {
        kkt[(i, i)] -= delta;
    }
    let lu = kkt.full_piv_lu();
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(&(-&prob.g));
    for (a, &(row, upper)) in active.iter().enumerate() {
        rhs[n + a] = if upper { prob.ub[row] } else { prob.lb[row] };
    }
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..3 {
        let resid = &rhs - &kkt_exact * &sol;
        let corr = lu.solve(&resid)?;
        sol += corr;
    }
    let xp = DVector::from_fn(n, |i, _| sol[i]);
    let mut yp = DVector::zeros(m);
    for (a, &(row, _)) in active.iter().enumerate() {
        yp[row] = sol[n + a];
    }
    Some((xp, yp))
}

fn bounded(v: f64) -> f64 {
    v.clamp(-QP_INF, QP_INF)
}

fn clamp(v: &DVector<f64>, lb: &DVector<f64>, ub: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| v[i].clamp(lb[i], ub[i]))
}

/// Max of stationarity norm, primal violation and complementary slackness.
pub fn kkt_residual(prob: &QpProblem, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let stationarity = (&prob.h * x + &prob.g + prob.c.transpose() * y).abs().max();
    let mut primal: f64 = 0.0;
    let mut compl_slack: f64 = 0.0;
    if prob.m() > 0 {
        let cx = &prob.c * x;
        for i in 0..prob.m() {
            let below = prob.lb[i] - cx[i];
            let above = cx[i] - prob.ub[i];
            primal = primal.max(below.max(above).max(0.0));
            // y < 0 pairs with the lower bound, y > 0 with the upper.
            if y[i] > 0.0 {
                compl_slack = compl_slack.max((y[i] * (cx[i] - prob.ub[i])).abs());
            } else if y[i] < 0.0 {
                compl_slack = compl_slack.max((y[i] * (cx[i] - prob.lb[i])).abs());
            }
        }
    }
    stationarity.max(primal).max(compl_slack)
}

/// Projected-gradient reference solver. Test oracle and debugging aid; slow
/// but independent of the ADMM path. Only supports box-style constraint rows
/// by projecting Cx onto [lb, ub] via alternating projection on x when C has
/// orthogonal rows, so it is exact for bound constraints and used in tests
/// with general C through a penalty formulation.
pub fn projected_gradient_oracle(
    prob: &QpProblem,
    iters: usize,
) -> DVector<f64> {
    // Penalty formulation: quadratic penalty on constraint violation with an
    // increasing weight. Each stage is a piecewise-quadratic minimization,
    // solved by Newton steps on the current violation set.
    let n = prob.n();
    let m = prob.m();
    let penalty_obj = |x: &DVector<f64>, w: f64| -> f64 {
        let mut obj = prob.objective(x);
        if m > 0 {
            let cx = &prob.c * x;
            for i in 0..m {
                let v = (cx[i] - prob.ub[i]).max(prob.lb[i] - cx[i]).max(0.0);
                obj += 0.5 * w * v * v;
            }
        }
        obj
    };
    let mut x = DVector::zeros(n);
    let mut w = 1e3;
    for _stage in 0..8 {
        for _ in 0..iters.min(100) {
            let mut grad = &prob.h * &x + &prob.g;
            let mut hess = prob.h.clone();
            if m > 0 {
                let cx = &prob.c * &x;
                for i in 0..m {
                    let v = if cx[i] > prob.ub[i] {
                        cx[i] - prob.ub[i]
                    } else if cx[i] < prob.lb[i] {
                        cx[i] - prob.lb[i]
                    } else {
                        continue;
                    };
                    let row = prob.c.row(i);
                    grad += w * v * row.transpose();
                    hess += w * row.transpose() * row;
                }
            }
            if grad.abs().max() < 1e-11 * (1.0 + w.sqrt()) {
                break;
            }
            for i in 0..n {
                hess[(i, i)] += 1e-12;
            }
            let Some(chol) = Cholesky::new(hess) else {
                break;
            };
            let step = chol.solve(&grad);
            // Backtracking keeps full Newton steps from cycling between
            // violation sets of the piecewise-quadratic penalty.
            let f0 = penalty_obj(&x, w);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand = &x - alpha * &step;
                if penalty_obj(&cand, w) < f0 {
                    x = cand;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        w *= 10.0;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn solve_default(prob: &QpProblem) -> QpSolution {
        QpSolver::new().solve(prob, &QpOptions::default()).unwrap()
    }

    #[test]
    fn unconstrained_scalar() {
        let prob = QpProblem::unconstrained(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, -1.0),
        );
        let sol = solve_default(&prob);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(sol.objective, -0.5, epsilon = 1e-6);
        assert!(sol.kkt_residual < 1e-5);
    }

    #[test]
    fn active_upper_bound() {
        let prob = QpProblem {
            h: DMatrix::from_element(1, 1, 1.0),
            g: DVector::from_element(1, -1.0),
            c: DMatrix::from_element(1, 1, 1.0),
            lb: DVector::from_element(1, -QP_INF),
            ub: DVector::from_element(1, 0.5),
        };
        let sol = solve_default(&prob);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_detected() {
        // x <= -1 and x >= 1 simultaneously.
        let prob = QpProblem {
            h: DMatrix::from_element(1, 1, 1.0),
            g: DVector::zeros(1),
            c: DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            lb: DVector::from_vec(vec![-QP_INF, 1.0]),
            ub: DVector::from_vec(vec![-1.0, QP_INF]),
        };
        let sol = solve_default(&prob);
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn kkt_residual_at_optimum_and_perturbed() {
        let prob = QpProblem::unconstrained(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, -1.0),
        );
        let x_star = DVector::from_element(1, 1.0);
        let y = DVector::zeros(0);
        assert!(kkt_residual(&prob, &x_star, &y) < 1e-10);
        let x_pert = DVector::from_element(1, 1.0 + 1e-3);
        // Gradient grows linearly with the perturbation, scaled by H.
        assert!(kkt_residual(&prob, &x_pert, &y) >= 0.9e-3);
    }

    #[test]
    fn kkt_residual_matches_direct_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 3;
        let m = 2;
        let h = DMatrix::identity(n, n) * 2.0;
        let g = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let c = DMatrix::from_fn(m, n, |_, _, | rng.gen_range(-1.0..1.0));
        let lb = DVector::from_element(m, -1.0);
        let ub = DVector::from_element(m, 1.0);
        let prob = QpProblem { h, g, c, lb, ub };
        let x = DVector::from_fn(n, |_, _| rng.gen_range(-0.3..0.3));
        let y = DVector::from_fn(m, |_, _| rng.gen_range(-0.5..0.5));

        let stat = (&prob.h * &x + &prob.g + prob.c.transpose() * &y)
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        let cx = &prob.c * &x;
        let mut prim = 0.0f64;
        let mut cs = 0.0f64;
        for i in 0..m {
            prim = prim
                .max(prob.lb[i] - cx[i])
                .max(cx[i] - prob.ub[i])
                .max(0.0);
            if y[i] > 0.0 {
                cs = cs.max((y[i] * (cx[i] - prob.ub[i])).abs());
            } else if y[i] < 0.0 {
                cs = cs.max((y[i] * (cx[i] - prob.lb[i])).abs());
            }
        }
        let expected = stat.max(prim).max(cs);
        assert_relative_eq!(kkt_residual(&prob, &x, &y), expected, epsilon = 1e-14);
    }

    pub(crate) fn random_psd_problem(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QpProblem {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut h = &a * a.transpose();
        for i in 0..n {
            h[(i, i)] += 0.1;
        }
        let g = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let c = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        // Bounds around a known feasible point keep the problem feasible.
        let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
        let cx0 = &c * &x0;
        let lb = DVector::from_fn(m, |i, _| cx0[i] - rng.gen_range(0.1..1.0));
        let ub = DVector::from_fn(m, |i, _| cx0[i] + rng.gen_range(0.1..1.0));
        QpProblem { h, g, c, lb, ub }
    }

    #[test]
    fn matches_projected_gradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let opts = QpOptions {
            tol: 1e-9,
            max_iter: 50_000,
            ..QpOptions::default()
        };
        for trial in 0..30 {
            let n = rng.gen_range(1..=8);
            let m = rng.gen_range(1..=12);
            let prob = random_psd_problem(&mut rng, n, m);
            let mut solver = QpSolver::new();
            let sol = solver.solve(&prob, &opts).unwrap();
            assert_eq!(sol.status, QpStatus::Optimal, "trial {trial}");
            let x_ref = projected_gradient_oracle(&prob, 40_000);
            let obj_ref = prob.objective(&x_ref);
            assert!(
                (sol.objective - obj_ref).abs() < 1e-6 * (1.0 + obj_ref.abs()),
                "trial {trial}: {} vs oracle {}",
                sol.objective,
                obj_ref
            );
        }
    }

    #[test]
    fn warm_start_matches_cold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prob = random_psd_problem(&mut rng, 6, 8);
        let opts = QpOptions::default();
        let mut cold = QpSolver::new();
        let sol_cold = cold.solve(&prob, &opts).unwrap();
        let mut warm = QpSolver::new();
        warm.solve(&prob, &opts).unwrap();
        let sol_warm = warm.solve(&prob, &opts).unwrap();
        assert!((sol_cold.objective - sol_warm.objective).abs() < 1e-6);
        assert!(sol_warm.iterations <= sol_cold.iterations);
    }

    #[test]
    fn row_scaling_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let prob = random_psd_problem(&mut rng, 5, 6);
        let mut scaled = prob.clone();
        for i in 0..scaled.m() {
            let s = 3.0;
            for j in 0..scaled.n() {
                scaled.c[(i, j)] *= s;
            }
            scaled.lb[i] *= s;
            scaled.ub[i] *= s;
        }
        let opts = QpOptions {
            tol: 1e-9,
            ..QpOptions::default()
        };
        let a = QpSolver::new().solve(&prob, &opts).unwrap();
        let b = QpSolver::new().solve(&scaled, &opts).unwrap();
        assert!((a.x - b.x).abs().max() < 1e-6);
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let prob = random_psd_problem(&mut rng, 5, 6);
        let n = prob.n();
        // Reverse-order permutation.
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut pp = prob.clone();
        for r in 0..n {
            for c in 0..n {
                pp.h[(r, c)] = prob.h[(perm[r], perm[c])];
            }
            pp.g[r] = prob.g[perm[r]];
        }
        for r in 0..prob.m() {
            for c in 0..n {
                pp.c[(r, c)] = prob.c[(r, perm[c])];
            }
        }
        let opts = QpOptions {
            tol: 1e-9,
            ..QpOptions::default()
        };
        let a = QpSolver::new().solve(&prob, &opts).unwrap();
        let b = QpSolver::new().solve(&pp, &opts).unwrap();
        let unpermuted = DVector::from_fn(n, |i, _| b.x[perm.iter().position(|&p| p == i).unwrap()]);
        assert!((a.x - unpermuted).abs().max() < 1e-5);
    }

    #[test]
    fn feasibility_of_optimal_solutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let prob = random_psd_problem(&mut rng, 6, 10);
            let sol = solve_default(&prob);
            assert_eq!(sol.status, QpStatus::Optimal);
            let cx = &prob.c * &sol.x;
            for i in 0..prob.m() {
                assert!(cx[i] >= prob.lb[i] - 1e-7 && cx[i] <= prob.ub[i] + 1e-7);
            }
        }
    }

    #[test]
    fn dump_writes_plain_text() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prob = random_psd_problem(&mut rng, 3, 2);
        let dir = std::env::temp_dir().join("quadmpc_qp_dump_test.txt");
        prob.dump(&dir).unwrap();
        let text = std::fs::read_to_string(&dir).unwrap();
        assert!(text.contains("# H 3x3"));
        assert!(text.contains("# lb 2"));
        std::fs::remove_file(dir).ok();
    }

    #[test]
    fn determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let prob = random_psd_problem(&mut rng, 6, 8);
        let a = QpSolver::new().solve(&prob, &QpOptions::default()).unwrap();
        let b = QpSolver::new().solve(&prob, &QpOptions::default()).unwrap();
        assert_eq!(a.x.as_slice(), b.x.as_slice());
    }
}
