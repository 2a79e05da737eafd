//! Dense convex quadratic programming with a diagonal quadratic term,
//! general linear inequality rows and box bounds:
//!
//! ```text
//!     minimize    sum_j q_j x_j^2 + c_j x_j        (q_j >= 0)
//!     subject to  A x <= b
//!                 lo <= x <= hi
//! ```
//!
//! Solved by an infeasible-start primal-dual interior-point method with
//! Mehrotra predictor-corrector steps. Variables with `lo == hi` are fixed
//! and eliminated up front (the diagonal objective keeps the reduction
//! exact). Infeasibility is certified by a phase-one solve that minimizes
//! the worst constraint violation over the box.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Feasibility tolerance: `status == Optimal` implies the max constraint
/// violation is below this.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// KKT tolerance for optimal solutions.
pub const KKT_TOL: f64 = 1e-6;
/// Default iteration budget.
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("negative quadratic coefficient q[{0}] breaks convexity")]
    NonConvex(usize),
    #[error("box bound lo[{0}] > hi[{0}]")]
    InvertedBox(usize),
    #[error("problem data contains a non-finite value")]
    NotFinite,
    #[error("invalid problem dump: {0}")]
    BadDump(#[from] serde_json::Error),
}

/// Problem data. `a` is the k x n constraint matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProblemDump {
    n: usize,
    q: Vec<f64>,
    c: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<f64>,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl QpProblem {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn k(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.n();
        if self.c.len() != n || self.lo.len() != n || self.hi.len() != n {
            return Err(QpError::Dimension(format!(
                "n={n} but c/lo/hi have lengths {}/{}/{}",
                self.c.len(),
                self.lo.len(),
                self.hi.len()
            )));
        }
        if self.a.len() != self.k() * n {
            return Err(QpError::Dimension(format!(
                "A has {} entries, expected {}x{}",
                self.a.len(),
                self.k(),
                n
            )));
        }
        for (j, &qj) in self.q.iter().enumerate() {
            if qj < 0.0 {
                return Err(QpError::NonConvex(j));
            }
        }
        for j in 0..n {
            if self.lo[j] > self.hi[j] {
                return Err(QpError::InvertedBox(j));
            }
        }
        let finite = self.q.iter().chain(&self.c).chain(&self.a).chain(&self.b)
            .chain(&self.lo).chain(&self.hi).all(|v| v.is_finite());
        if !finite {
            return Err(QpError::NotFinite);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let dump = ProblemDump {
            n: self.n(),
            q: self.q.clone(),
            c: self.c.clone(),
            a: self.a.clone(),
            b: self.b.clone(),
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        };
        serde_json::to_string(&dump).expect("dump serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, QpError> {
        let dump: ProblemDump = serde_json::from_str(text)?;
        let p = QpProblem {
            q: dump.q,
            c: dump.c,
            a: dump.a,
            b: dump.b,
            lo: dump.lo,
            hi: dump.hi,
        };
        if p.n() != dump.n {
            return Err(QpError::Dimension(format!(
                "declared n={} but q has length {}",
                dump.n,
                p.n()
            )));
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

/// Solver output. `duals` holds multipliers for the k general rows, then the
/// n upper-bound rows, then the n lower-bound rows, in original problem
/// units. `kkt_residual` is measured on the internally equilibrated problem
/// (identical to the raw residual when rows and objective are unit-scale);
/// `constraint_violation` is always in original units.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub constraint_violation: f64,
    pub duals: Vec<f64>,
}

/// `sum q_j x_j^2 + c_j x_j`
pub fn objective_value(p: &QpProblem, x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(j, &v)| p.q[j] * v * v + p.c[j] * v)
        .sum()
}

/// Max violation over general rows and box bounds (0 when feasible).
pub fn constraint_violation(p: &QpProblem, x: &[f64]) -> f64 {
    let n = p.n();
    let mut worst = 0.0f64;
    for i in 0..p.k() {
        let row = &p.a[i * n..(i + 1) * n];
        let ax: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
        worst = worst.max(ax - p.b[i]);
    }
    for j in 0..n {
        worst = worst.max(x[j] - p.hi[j]).max(p.lo[j] - x[j]);
    }
    worst.max(0.0)
}

/// Max-norm of the KKT stationarity residual plus the largest complementary
/// slackness violation, plus any primal or dual infeasibility; zero exactly
/// at a KKT point. `duals` is laid out as in [`QpSolution`].
pub fn kkt_residual(p: &QpProblem, x: &[f64], duals: &[f64]) -> f64 {
    let n = p.n();
    let k = p.k();
    assert_eq!(duals.len(), k + 2 * n, "dual vector length mismatch");
    let (lam_a, rest) = duals.split_at(k);
    let (lam_hi, lam_lo) = rest.split_at(n);

    let mut stat = 0.0f64;
    for j in 0..n {
        let mut g = 2.0 * p.q[j] * x[j] + p.c[j] + lam_hi[j] - lam_lo[j];
        for i in 0..k {
            g += lam_a[i] * p.a[i * n + j];
        }
        stat = stat.max(g.abs());
    }

    let mut comp = 0.0f64;
    for i in 0..k {
        let row = &p.a[i * n..(i + 1) * n];
        let ax: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
        comp = comp.max((lam_a[i] * (ax - p.b[i])).abs());
    }
    for j in 0..n {
        comp = comp.max((lam_hi[j] * (x[j] - p.hi[j])).abs());
        comp = comp.max((lam_lo[j] * (p.lo[j] - x[j])).abs());
    }
    let dual_neg = duals.iter().fold(0.0f64, |acc, &l| acc.max(-l));
    stat + comp + constraint_violation(p, x) + dual_neg
}

pub fn solve_qp(p: &QpProblem, max_iterations: usize) -> Result<QpSolution, QpError> {
    solve_qp_from(p, None, max_iterations)
}

/// Solve with an optional initial point (projected into the box interior
/// before iterating). The starting point does not change the minimizer of a
/// strictly convex problem; it only warm-starts the path.
pub fn solve_qp_from(
    p: &QpProblem,
    start: Option<&[f64]>,
    max_iterations: usize,
) -> Result<QpSolution, QpError> {
    p.validate()?;
    if let Some(s) = start {
        if s.len() != p.n() {
            return Err(QpError::Dimension(format!(
                "start has length {}, expected {}",
                s.len(),
                p.n()
            )));
        }
    }

    let red = Reduction::build(p);

    // Every variable pinned by its box: the point is fully determined.
    if red.free.is_empty() {
        let x = red.fixed_point(p);
        let cv = constraint_violation(p, &x);
        let duals = red.duals_for_fixed_only(p, &x);
        let kkt = kkt_residual(p, &x, &duals);
        let status = if cv <= FEASIBILITY_TOL {
            QpStatus::Optimal
        } else {
            QpStatus::Infeasible
        };
        return Ok(QpSolution {
            objective: objective_value(p, &x),
            x,
            status,
            kkt_residual: kkt,
            constraint_violation: cv,
            duals,
        });
    }

    // A reduced row with no free coefficients left is either trivially true
    // or a certificate of infeasibility.
    if red.constant_row_violated {
        let x = red.fixed_point(p);
        let cv = constraint_violation(p, &x);
        return Ok(QpSolution {
            objective: objective_value(p, &x),
            x,
            status: QpStatus::Infeasible,
            kkt_residual: f64::INFINITY,
            constraint_violation: cv,
            duals: vec![0.0; p.k() + 2 * p.n()],
        });
    }

    // equilibrate: constraint rows to unit inf-norm, objective to unit
    // gradient scale over the box. The variable space is untouched, so x,
    // the bounds and score-unit feasibility all keep their original
    // meaning; only the multipliers need mapping back.
    let (sub, row_scale, obj_scale) = equilibrate(&red.sub);

    let x0_red = red.project_start(p, start);
    let mut out = ipm(&sub, &x0_red, max_iterations);

    if out.converged {
        // exact active-set refinement; keep the interior iterate when the
        // candidate fails verification
        if let Some((x_pol, lam_pol)) = polish(&sub, &out) {
            let nr = sub.n();
            let kr = sub.k();
            out.x = x_pol;
            out.lam_a = lam_pol[..kr].to_vec();
            out.lam_hi = lam_pol[kr..kr + nr].to_vec();
            out.lam_lo = lam_pol[kr + nr..].to_vec();
        }
        let kkt = kkt_sub(&sub, &out);
        unscale_duals(&mut out, &row_scale, obj_scale);
        let (x, duals) = red.assemble(p, &out);
        let cv = constraint_violation(p, &x);
        let status = if cv <= FEASIBILITY_TOL && kkt <= KKT_TOL {
            QpStatus::Optimal
        } else {
            QpStatus::MaxIterations
        };
        return Ok(QpSolution {
            objective: objective_value(p, &x),
            x,
            status,
            kkt_residual: kkt,
            constraint_violation: cv,
            duals,
        });
    }

    // No convergence: decide between infeasible and out-of-budget via
    // phase one. Its verdict only counts when it converged itself.
    let (xf_red, tau, phase_converged) = phase_one(&sub, max_iterations);
    let mut xf = red.fixed_point(p);
    for (slot, &j) in red.free.iter().enumerate() {
        xf[j] = xf_red[slot].clamp(p.lo[j], p.hi[j]);
    }
    let cv_f = constraint_violation(p, &xf);
    if phase_converged && tau > FEASIBILITY_TOL && cv_f > FEASIBILITY_TOL {
        return Ok(QpSolution {
            objective: objective_value(p, &xf),
            x: xf,
            status: QpStatus::Infeasible,
            kkt_residual: f64::INFINITY,
            constraint_violation: cv_f,
            duals: vec![0.0; p.k() + 2 * p.n()],
        });
    }
    let kkt = kkt_sub(&sub, &out);
    unscale_duals(&mut out, &row_scale, obj_scale);
    let (x, duals) = red.assemble(p, &out);
    let cv = constraint_violation(p, &x);
    Ok(QpSolution {
        objective: objective_value(p, &x),
        x,
        status: QpStatus::MaxIterations,
        kkt_residual: kkt,
        constraint_violation: cv,
        duals,
    })
}

/// Scale rows to unit inf-norm and the objective so its largest gradient
/// magnitude over the box is about one. Returns the scaled problem plus the
/// factors needed to map multipliers back.
fn equilibrate(p: &SubProblem) -> (SubProblem, Vec<f64>, f64) {
    let n = p.n();
    let k = p.k();
    let mut a = p.a.clone();
    let mut b = p.b.clone();
    let mut row_scale = vec![1.0; k];
    for i in 0..k {
        let row = &mut a[i * n..(i + 1) * n];
        let norm = row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if norm > 0.0 {
            row_scale[i] = norm;
            for v in row.iter_mut() {
                *v /= norm;
            }
            b[i] /= norm;
        }
    }
    let mut obj_scale = 1.0f64;
    for j in 0..n {
        let span = p.lo[j].abs().max(p.hi[j].abs());
        obj_scale = obj_scale.max(2.0 * p.q[j] * span + p.c[j].abs());
    }
    let q = p.q.iter().map(|v| v / obj_scale).collect();
    let c = p.c.iter().map(|v| v / obj_scale).collect();
    (
        SubProblem {
            q,
            c,
            a,
            b,
            lo: p.lo.clone(),
            hi: p.hi.clone(),
        },
        row_scale,
        obj_scale,
    )
}

/// Map multipliers of the equilibrated problem back to original units:
/// general rows pick up obj_scale / row_scale, box rows obj_scale.
fn unscale_duals(out: &mut IpmOut, row_scale: &[f64], obj_scale: f64) {
    for (lam, r) in out.lam_a.iter_mut().zip(row_scale) {
        *lam *= obj_scale / r;
    }
    for lam in out.lam_hi.iter_mut().chain(out.lam_lo.iter_mut()) {
        *lam *= obj_scale;
    }
}

/// KKT residual of a (reduced, scaled) subproblem at the iterate, same
/// composition as the public [`kkt_residual`].
fn kkt_sub(p: &SubProblem, out: &IpmOut) -> f64 {
    let n = p.n();
    let k = p.k();
    let x = &out.x;
    let mut stat = 0.0f64;
    for j in 0..n {
        let mut g = 2.0 * p.q[j] * x[j] + p.c[j] + out.lam_hi[j] - out.lam_lo[j];
        for i in 0..k {
            g += out.lam_a[i] * p.a[i * n + j];
        }
        stat = stat.max(g.abs());
    }
    let mut comp = 0.0f64;
    let mut primal = 0.0f64;
    for i in 0..k {
        let row = &p.a[i * n..(i + 1) * n];
        let ax: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
        comp = comp.max((out.lam_a[i] * (ax - p.b[i])).abs());
        primal = primal.max(ax - p.b[i]);
    }
    for j in 0..n {
        comp = comp.max((out.lam_hi[j] * (x[j] - p.hi[j])).abs());
        comp = comp.max((out.lam_lo[j] * (p.lo[j] - x[j])).abs());
        primal = primal.max(x[j] - p.hi[j]).max(p.lo[j] - x[j]);
    }
    let dual_neg = out
        .lam_a
        .iter()
        .chain(&out.lam_hi)
        .chain(&out.lam_lo)
        .fold(0.0f64, |acc, &l| acc.max(-l));
    stat + comp + primal.max(0.0) + dual_neg
}

/// A point satisfying all constraints within [`FEASIBILITY_TOL`], or `None`
/// when phase-one optimization cannot push the violation below tolerance.
pub fn feasible_point(p: &QpProblem) -> Result<Option<Vec<f64>>, QpError> {
    p.validate()?;
    let red = Reduction::build(p);
    if red.constant_row_violated {
        return Ok(None);
    }
    // cheap candidates first: zero and the box centre
    let mut zero = red.fixed_point(p);
    for j in 0..p.n() {
        zero[j] = 0.0f64.clamp(p.lo[j], p.hi[j]);
    }
    if constraint_violation(p, &zero) <= FEASIBILITY_TOL {
        return Ok(Some(zero));
    }
    if red.free.is_empty() {
        let x = red.fixed_point(p);
        return Ok(if constraint_violation(p, &x) <= FEASIBILITY_TOL {
            Some(x)
        } else {
            None
        });
    }
    let (x_red, _tau, _converged) = phase_one(&red.sub, DEFAULT_MAX_ITERATIONS);
    let mut x = red.fixed_point(p);
    for (slot, &j) in red.free.iter().enumerate() {
        x[j] = x_red[slot].clamp(p.lo[j], p.hi[j]);
    }
    Ok(if constraint_violation(p, &x) <= FEASIBILITY_TOL {
        Some(x)
    } else {
        None
    })
}

// ---------------------------------------------------------------------------
// presolve

/// Reduced problem after eliminating fixed variables and constant rows.
struct Reduction {
    free: Vec<usize>,
    rows: Vec<usize>,
    constant_row_violated: bool,
    sub: SubProblem,
}

struct SubProblem {
    q: Vec<f64>,
    c: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SubProblem {
    fn n(&self) -> usize {
        self.q.len()
    }
    fn k(&self) -> usize {
        self.b.len()
    }
}

impl Reduction {
    fn build(p: &QpProblem) -> Reduction {
        let n = p.n();
        let fixed: Vec<bool> = (0..n).map(|j| p.hi[j] - p.lo[j] <= 1e-12).collect();
        let free: Vec<usize> = (0..n).filter(|&j| !fixed[j]).collect();

        let mut rows = Vec::new();
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut constant_row_violated = false;
        for i in 0..p.k() {
            let row = &p.a[i * n..(i + 1) * n];
            let mut rhs = p.b[i];
            for j in 0..n {
                if fixed[j] {
                    rhs -= row[j] * p.lo[j];
                }
            }
            let coefs: Vec<f64> = free.iter().map(|&j| row[j]).collect();
            if coefs.iter().all(|v| v.abs() <= 1e-14) {
                if rhs < -FEASIBILITY_TOL {
                    constant_row_violated = true;
                }
                continue;
            }
            rows.push(i);
            a.extend_from_slice(&coefs);
            b.push(rhs);
        }

        let sub = SubProblem {
            q: free.iter().map(|&j| p.q[j]).collect(),
            c: free.iter().map(|&j| p.c[j]).collect(),
            a,
            b,
            lo: free.iter().map(|&j| p.lo[j]).collect(),
            hi: free.iter().map(|&j| p.hi[j]).collect(),
        };
        Reduction {
            free,
            rows,
            constant_row_violated,
            sub,
        }
    }

    /// Full-length x with fixed variables at their pinned value, free at lo.
    fn fixed_point(&self, p: &QpProblem) -> Vec<f64> {
        (0..p.n()).map(|j| p.lo[j]).collect()
    }

    fn project_start(&self, p: &QpProblem, start: Option<&[f64]>) -> Vec<f64> {
        self.free
            .iter()
            .map(|&j| {
                let v = start.map(|s| s[j]).unwrap_or(0.0);
                let span = p.hi[j] - p.lo[j];
                let margin = 1e-3 * span;
                v.clamp(p.lo[j] + margin, p.hi[j] - margin)
            })
            .collect()
    }

    fn assemble(&self, p: &QpProblem, out: &IpmOut) -> (Vec<f64>, Vec<f64>) {
        let n = p.n();
        let k = p.k();
        let mut x = self.fixed_point(p);
        for (slot, &j) in self.free.iter().enumerate() {
            x[j] = out.x[slot].clamp(p.lo[j], p.hi[j]);
        }
        let mut duals = vec![0.0; k + 2 * n];
        for (slot, &i) in self.rows.iter().enumerate() {
            duals[i] = out.lam_a[slot];
        }
        for (slot, &j) in self.free.iter().enumerate() {
            duals[k + j] = out.lam_hi[slot];
            duals[k + n + j] = out.lam_lo[slot];
        }
        // fixed variables: both bounds active, pick multipliers that zero the
        // stationarity residual
        for j in 0..n {
            if !self.free.contains(&j) {
                let mut g = 2.0 * p.q[j] * x[j] + p.c[j];
                for i in 0..k {
                    g += duals[i] * p.a[i * n + j];
                }
                duals[k + j] = (-g).max(0.0);
                duals[k + n + j] = g.max(0.0);
            }
        }
        (x, duals)
    }

    fn duals_for_fixed_only(&self, p: &QpProblem, x: &[f64]) -> Vec<f64> {
        let n = p.n();
        let k = p.k();
        let mut duals = vec![0.0; k + 2 * n];
        for j in 0..n {
            let g = 2.0 * p.q[j] * x[j] + p.c[j];
            duals[k + j] = (-g).max(0.0);
            duals[k + n + j] = g.max(0.0);
        }
        duals
    }
}

// ---------------------------------------------------------------------------
// interior point core

struct IpmOut {
    x: Vec<f64>,
    lam_a: Vec<f64>,
    lam_hi: Vec<f64>,
    lam_lo: Vec<f64>,
    s: Vec<f64>,
    converged: bool,
}

/// Constraint rows in the order: general, upper bounds, lower bounds.
fn ipm(p: &SubProblem, x0: &[f64], max_iterations: usize) -> IpmOut {
    let n = p.n();
    let k = p.k();
    let m_total = k + 2 * n;

    let h_scale = 1.0
        + p.b.iter().chain(&p.hi).chain(&p.lo).fold(0.0f64, |acc, v| acc.max(v.abs()));
    let c_scale = 1.0 + p.c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol_p = 1e-10 * h_scale;
    let tol_mu = 1e-10 * (h_scale + c_scale);

    let mut x = x0.to_vec();
    let mut s = vec![0.0; m_total];
    let mut lam = vec![1.0; m_total];
    {
        let gx = eval_gx(p, &x);
        for i in 0..m_total {
            s[i] = (rhs_h(p, i) - gx[i]).max(1.0);
        }
    }

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None; // (merit, x, lam)
    let mut stall = 0usize;

    let mut r_d = vec![0.0; n];
    let mut r_p = vec![0.0; m_total];
    let mut converged = false;

    for _ in 0..max_iterations {
        let gx = eval_gx(p, &x);
        for i in 0..m_total {
            r_p[i] = gx[i] + s[i] - rhs_h(p, i);
        }
        dual_residual(p, &x, &lam, &mut r_d);
        let mu = dot(&s, &lam) / m_total as f64;
        let rp_inf = inf_norm(&r_p);
        let rd_inf = inf_norm(&r_d);

        // stationarity tolerance scaled by the dual magnitudes actually in
        // play, so large multipliers do not make the target unreachable
        let lam_scale = inf_norm(&lam);
        let tol_d = 1e-9 * (c_scale + lam_scale);

        if rp_inf <= tol_p && rd_inf <= tol_d && mu <= tol_mu {
            converged = true;
            break;
        }

        let merit = (rp_inf / tol_p).max(rd_inf / tol_d).max(mu / tol_mu);
        match &best {
            Some((prev, _, _)) if merit >= *prev * 0.999 => stall += 1,
            _ => {
                best = Some((merit, x.clone(), lam.clone()));
                stall = 0;
            }
        }
        if stall > 30 {
            break;
        }

        // normal matrix H + G' D G with D = lam/s
        let d: Vec<f64> = (0..m_total).map(|i| lam[i] / s[i]).collect();
        let mut mat = vec![0.0; n * n];
        for j in 0..n {
            mat[j * n + j] = 2.0 * p.q[j] + d[k + j] + d[k + n + j];
        }
        for i in 0..k {
            let row = &p.a[i * n..(i + 1) * n];
            let di = d[i];
            for jj in 0..n {
                let ajj = row[jj];
                if ajj == 0.0 {
                    continue;
                }
                for kk in jj..n {
                    mat[jj * n + kk] += di * ajj * row[kk];
                }
            }
        }
        // mirror + static regularization; must not scale with the barrier
        // diagonals, which grow without bound as mu -> 0
        let q_scale = p.q.iter().fold(0.0f64, |acc, v| acc.max(*v));
        let reg = 1e-12 * (1.0 + 2.0 * q_scale);
        for jj in 0..n {
            mat[jj * n + jj] += reg;
            for kk in 0..jj {
                mat[jj * n + kk] = mat[kk * n + jj];
            }
        }
        let chol = match cholesky(mat, n) {
            Some(f) => f,
            None => break, // numerically stuck; fall back to best iterate
        };

        // affine direction: rc = s.lam
        let mut v = vec![0.0; m_total];
        for i in 0..m_total {
            v[i] = lam[i] - d[i] * r_p[i];
        }
        let mut rhs = gt_mul(p, &v);
        for j in 0..n {
            rhs[j] += -r_d[j];
        }
        let dx_aff = chol_solve(&chol, n, &rhs);
        let (ds_aff, dlam_aff) = recover_step(p, &r_p, &s, &lam, &d, &dx_aff, None, 0.0);

        let alpha_p_aff = max_step(&s, &ds_aff);
        let alpha_d_aff = max_step(&lam, &dlam_aff);
        let mut mu_aff = 0.0;
        for i in 0..m_total {
            mu_aff += (s[i] + alpha_p_aff * ds_aff[i]) * (lam[i] + alpha_d_aff * dlam_aff[i]);
        }
        mu_aff /= m_total as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // corrector: rc = s.lam + ds.dlam - sigma*mu
        for i in 0..m_total {
            let rc = s[i] * lam[i] + ds_aff[i] * dlam_aff[i] - sigma * mu;
            v[i] = rc / s[i] - d[i] * r_p[i];
        }
        let mut rhs = gt_mul(p, &v);
        for j in 0..n {
            rhs[j] += -r_d[j];
        }
        let dx = chol_solve(&chol, n, &rhs);
        let (ds, dlam) = recover_step(p, &r_p, &s, &lam, &d, &dx, Some((&ds_aff, &dlam_aff)), sigma * mu);

        let tau = 0.995;
        let alpha_p = (tau * max_step(&s, &ds)).min(1.0);
        let alpha_d = (tau * max_step(&lam, &dlam)).min(1.0);
        for j in 0..n {
            x[j] += alpha_p * dx[j];
        }
        for i in 0..m_total {
            s[i] += alpha_p * ds[i];
            lam[i] += alpha_d * dlam[i];
        }
    }

    if !converged {
        if let Some((_, bx, blam)) = best {
            x = bx;
            lam = blam;
        }
    }
    IpmOut {
        lam_a: lam[..k].to_vec(),
        lam_hi: lam[k..k + n].to_vec(),
        lam_lo: lam[k + n..].to_vec(),
        s,
        x,
        converged,
    }
}

/// Exact solve on the active set detected by the interior-point iterate:
/// stack the stationarity conditions with the active rows as equalities and
/// solve the dense KKT system. Returns None when the system is singular or
/// the candidate fails primal/dual verification; the caller then keeps the
/// interior-point solution.
fn polish(p: &SubProblem, out: &IpmOut) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = p.n();
    let k = p.k();
    let m_total = k + 2 * n;
    let lam_full: Vec<f64> = out
        .lam_a
        .iter()
        .chain(&out.lam_hi)
        .chain(&out.lam_lo)
        .copied()
        .collect();
    let active: Vec<usize> = (0..m_total)
        .filter(|&i| lam_full[i] > out.s[i])
        .collect();
    let na = active.len();
    let dim = n + na;

    // row coefficients of constraint r as a dense vector
    let row_coef = |r: usize, j: usize| -> f64 {
        if r < k {
            p.a[r * n + j]
        } else if r < k + n {
            if r - k == j { 1.0 } else { 0.0 }
        } else if r - k - n == j {
            -1.0
        } else {
            0.0
        }
    };
    let rhs_of = |r: usize| -> f64 {
        if r < k {
            p.b[r]
        } else if r < k + n {
            p.hi[r - k]
        } else {
            -p.lo[r - k - n]
        }
    };

    let mut mat = vec![0.0; dim * dim];
    let mut rhs = vec![0.0; dim];
    for j in 0..n {
        mat[j * dim + j] = 2.0 * p.q[j];
        rhs[j] = -p.c[j];
    }
    for (ai, &r) in active.iter().enumerate() {
        for j in 0..n {
            let g = row_coef(r, j);
            mat[j * dim + n + ai] = g;
            mat[(n + ai) * dim + j] = g;
        }
        rhs[n + ai] = rhs_of(r);
    }
    let sol = lu_solve(mat, dim, rhs)?;
    let mut x = sol[..n].to_vec();
    let nu = &sol[n..];
    // active bounds hold exactly; remove elimination dust
    for &r in &active {
        if r >= k && r < k + n {
            x[r - k] = p.hi[r - k];
        } else if r >= k + n {
            x[r - k - n] = p.lo[r - k - n];
        }
    }
    let x = &x[..];

    let nu_scale = 1.0 + inf_norm(nu);
    if nu.iter().any(|&v| v < -1e-8 * nu_scale) {
        return None;
    }
    let h_scale = 1.0
        + p.b.iter().chain(&p.hi).chain(&p.lo).fold(0.0f64, |acc, v| acc.max(v.abs()));
    for r in 0..m_total {
        let gx: f64 = (0..n).map(|j| row_coef(r, j) * x[j]).sum();
        if gx - rhs_of(r) > 1e-9 * h_scale {
            return None;
        }
    }

    let mut lam_polished = vec![0.0; m_total];
    for (ai, &r) in active.iter().enumerate() {
        lam_polished[r] = nu[ai].max(0.0);
    }
    Some((x.to_vec(), lam_polished))
}

/// Dense LU with partial pivoting; None on singular systems.
fn lu_solve(mut mat: Vec<f64>, n: usize, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let scale = 1.0 + inf_norm(&mat);
    for col in 0..n {
        let mut pivot = col;
        for r in (col + 1)..n {
            if mat[r * n + col].abs() > mat[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if mat[pivot * n + col].abs() <= 1e-13 * scale {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                mat.swap(col * n + j, pivot * n + j);
            }
            rhs.swap(col, pivot);
        }
        let diag = mat[col * n + col];
        for r in (col + 1)..n {
            let factor = mat[r * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                mat[r * n + j] -= factor * mat[col * n + j];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    for col in (0..n).rev() {
        rhs[col] /= mat[col * n + col];
        for r in 0..col {
            rhs[r] -= mat[r * n + col] * rhs[col];
        }
    }
    Some(rhs)
}

/// Phase one: minimize t subject to `a_i x - t <= b_i`, the original box and
/// `t` boxed generously. Returns (x, minimal worst violation, converged).
fn phase_one(p: &SubProblem, max_iterations: usize) -> (Vec<f64>, f64, bool) {
    let n = p.n();
    let k = p.k();
    let centre: Vec<f64> = (0..n).map(|j| 0.5 * (p.lo[j] + p.hi[j])).collect();
    let mut worst = 0.0f64;
    for i in 0..k {
        let row = &p.a[i * n..(i + 1) * n];
        let ax: f64 = row.iter().zip(&centre).map(|(a, v)| a * v).sum();
        worst = worst.max(ax - p.b[i]);
    }
    let t_hi = worst + 1.0;

    let mut a = Vec::with_capacity(k * (n + 1));
    for i in 0..k {
        a.extend_from_slice(&p.a[i * n..(i + 1) * n]);
        a.push(-1.0);
    }
    let aug = SubProblem {
        q: vec![0.0; n + 1],
        c: {
            let mut c = vec![0.0; n + 1];
            c[n] = 1.0;
            c
        },
        a,
        b: p.b.clone(),
        lo: {
            let mut lo = p.lo.to_vec();
            lo.push(-1.0);
            lo
        },
        hi: {
            let mut hi = p.hi.to_vec();
            hi.push(t_hi);
            hi
        },
    };
    let mut x0 = centre;
    x0.push((worst + 0.5).clamp(-0.9, t_hi - 1e-3 * (t_hi + 1.0)));
    for (j, v) in x0.iter_mut().enumerate().take(n) {
        let margin = 1e-3 * (aug.hi[j] - aug.lo[j]);
        *v = v.clamp(aug.lo[j] + margin, aug.hi[j] - margin);
    }
    let out = ipm(&aug, &x0, max_iterations);
    let x = out.x[..n].to_vec();
    (x, out.x[n], out.converged)
}

fn rhs_h(p: &SubProblem, i: usize) -> f64 {
    let k = p.k();
    let n = p.n();
    if i < k {
        p.b[i]
    } else if i < k + n {
        p.hi[i - k]
    } else {
        -p.lo[i - k - n]
    }
}

fn eval_gx(p: &SubProblem, x: &[f64]) -> Vec<f64> {
    let n = p.n();
    let k = p.k();
    let mut gx = vec![0.0; k + 2 * n];
    for i in 0..k {
        let row = &p.a[i * n..(i + 1) * n];
        gx[i] = row.iter().zip(x).map(|(a, v)| a * v).sum();
    }
    for j in 0..n {
        gx[k + j] = x[j];
        gx[k + n + j] = -x[j];
    }
    gx
}

/// G' v for v over all constraint rows.
fn gt_mul(p: &SubProblem, v: &[f64]) -> Vec<f64> {
    let n = p.n();
    let k = p.k();
    let mut out = vec![0.0; n];
    for i in 0..k {
        let row = &p.a[i * n..(i + 1) * n];
        let vi = v[i];
        if vi == 0.0 {
            continue;
        }
        for j in 0..n {
            out[j] += vi * row[j];
        }
    }
    for j in 0..n {
        out[j] += v[k + j] - v[k + n + j];
    }
    out
}

fn dual_residual(p: &SubProblem, x: &[f64], lam: &[f64], r_d: &mut [f64]) {
    let n = p.n();
    let k = p.k();
    for j in 0..n {
        r_d[j] = 2.0 * p.q[j] * x[j] + p.c[j] + lam[k + j] - lam[k + n + j];
    }
    for i in 0..k {
        let row = &p.a[i * n..(i + 1) * n];
        let li = lam[i];
        if li == 0.0 {
            continue;
        }
        for j in 0..n {
            r_d[j] += li * row[j];
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn recover_step(
    p: &SubProblem,
    r_p: &[f64],
    s: &[f64],
    lam: &[f64],
    _d: &[f64],
    dx: &[f64],
    corrector: Option<(&[f64], &[f64])>,
    sigma_mu: f64,
) -> (Vec<f64>, Vec<f64>) {
    let gdx = eval_gx(p, dx);
    let m_total = s.len();
    let mut ds = vec![0.0; m_total];
    let mut dlam = vec![0.0; m_total];
    for i in 0..m_total {
        ds[i] = -r_p[i] - gdx[i];
        let rc = match corrector {
            None => s[i] * lam[i],
            Some((ds_aff, dlam_aff)) => s[i] * lam[i] + ds_aff[i] * dlam_aff[i] - sigma_mu,
        };
        dlam[i] = -(rc + lam[i] * ds[i]) / s[i];
    }
    (ds, dlam)
}

/// Largest step in [0, 1] keeping v + alpha*dv nonnegative.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut alpha = 1.0f64;
    for i in 0..v.len() {
        if dv[i] < 0.0 {
            alpha = alpha.min(-v[i] / dv[i]);
        }
    }
    alpha
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// In-place lower Cholesky factor; None when the matrix is not numerically
/// positive definite.
fn cholesky(mut mat: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for j in 0..n {
        let mut diag = mat[j * n + j];
        for t in 0..j {
            diag -= mat[j * n + t] * mat[j * n + t];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return None;
        }
        let diag = diag.sqrt();
        mat[j * n + j] = diag;
        for i in (j + 1)..n {
            let mut v = mat[i * n + j];
            for t in 0..j {
                v -= mat[i * n + t] * mat[j * n + t];
            }
            mat[i * n + j] = v / diag;
        }
    }
    Some(mat)
}

fn chol_solve(l: &[f64], n: usize, rhs: &[f64]) -> Vec<f64> {
    let mut y = rhs.to_vec();
    for i in 0..n {
        for j in 0..i {
            y[i] -= l[i * n + j] * y[j];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            y[i] -= l[j * n + i] * y[j];
        }
        y[i] /= l[i * n + i];
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unconstrained(q: Vec<f64>, c: Vec<f64>, lo: f64, hi: f64) -> QpProblem {
        let n = q.len();
        QpProblem {
            q,
            c,
            a: vec![],
            b: vec![],
            lo: vec![lo; n],
            hi: vec![hi; n],
        }
    }

    #[test]
    fn scalar_parabola() {
        // minimize (x-1)^2 encoded as x^2 - 2x
        let p = unconstrained(vec![1.0], vec![-2.0], -10.0, 10.0);
        let sol = solve_qp(&p, DEFAULT_MAX_ITERATIONS).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-7);
        assert!((sol.x[0] - 1.0).powi(2) <= 1e-12);
        assert!(sol.kkt_residual <= KKT_TOL);
    }

    #[test]
    fn active_box_bound() {
        let p = unconstrained(vec![1.0], vec![0.0], 2.0, 5.0);
        let sol = solve_qp(&p, DEFAULT_MAX_ITERATIONS).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 2.0, epsilon = 1e-7);
        assert!(sol.x[0] >= 2.0);
    }

    #[test]
    fn symmetric_constrained_pair() {
        // minimize x1^2 + x2^2 s.t. x1 + x2 <= -2 in [-5, 5]^2
        let p = QpProblem {
            q: vec![1.0, 1.0],
            c: vec![0.0, 0.0],
            a: vec![-1.0, -1.0], // encode x1 + x2 >= ... no: we need a.x <= b
            b: vec![-2.0],
            lo: vec![-5.0, -5.0],
            hi: vec![5.0, 5.0],
        };
        // row is x1 + x2 <= -2, coefficient +1 each
        let p = QpProblem {
            a: vec![1.0, 1.0],
            ..p
        };
        let sol = solve_qp(&p, DEFAULT_MAX_ITERATIONS).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.x[1], -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.objective, 2.0, epsilon = 1e-6);
        assert!(sol.constraint_violation <= FEASIBILITY_TOL);
    }

    #[test]
    fn kkt_zero_at_unconstrained_optimum() {
        let p = unconstrained(vec![1.0], vec![-2.0], -10.0, 10.0);
        let r = kkt_residual(&p, &[1.0], &[0.0, 0.0]);
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn kkt_positive_off_optimum() {
        let p = QpProblem {
            q: vec![1.0, 1.0],
            c: vec![0.0, 0.0],
            a: vec![1.0, 1.0],
            b: vec![-2.0],
            lo: vec![-5.0, -5.0],
            hi: vec![5.0, 5.0],
        };
        let r = kkt_residual(&p, &[0.0, 0.0], &[0.0; 5]);
        assert!(r > 0.0);
    }

    #[test]
    fn kkt_of_random_point_exceeds_solver_residual() {
        let p = QpProblem {
            q: vec![1.0, 2.0],
            c: vec![-1.0, 0.5],
            a: vec![1.0, 1.0],
            b: vec![1.5],
            lo: vec![-2.0, -2.0],
            hi: vec![2.0, 2.0],
        };
        let sol = solve_qp(&p, DEFAULT_MAX_ITERATIONS).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        // feasible, non-optimal point with zero duals
        let r = kkt_residual(&p, &[0.5, -0.5], &[0.0; 5]);
        assert!(r > sol.kkt_residual);
    }

    #[test]
    fn feasible_point_zero_box() {
        let p = QpProblem {
            q: vec![1.0, 1.0],
            c: vec![0.0, 0.0],
            a: vec![1.0, 1.0],
            b: vec![0.0],
            lo: vec![0.0, 0.0],
            hi: vec![0.0, 0.0],
        };
        let x = feasible_point(&p).unwrap().unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn feasible_point_detects_infeasible() {
        let p = QpProblem {
            q: vec![1.0],
            c: vec![0.0],
            a: vec![1.0],
            b: vec![-1.0],
            lo: vec![0.0],
            hi: vec![1.0],
        };
        assert!(feasible_point(&p).unwrap().is_none());
    }

    #[test]
    fn solver_reports_infeasible() {
        let p = QpProblem {
            q: vec![1.0],
            c: vec![0.0],
            a: vec![1.0],
            b: vec![-1.0],
            lo: vec![0.0],
            hi: vec![1.0],
        };
        let sol = solve_qp(&p, DEFAULT_MAX_ITERATIONS).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn fixed_variables_only() {
        let p = QpProblem {
            q: vec![1.0, 0.0],
            c: vec![0.0, 1.0],
            a: vec![1.0, 1.0],
            b: vec![3.0],
            lo: vec![1.0, 2.0],
            hi: vec![1.0, 2.0],
        };
        let sol = solve_qp(&p, DEFAULT_MAX_ITERATIONS).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_eq!(sol.x, vec![1.0, 2.0]);
        assert!(sol.kkt_residual <= KKT_TOL);
    }

    #[test]
    fn grid_search_bound_2d() {
        let p = QpProblem {
            q: vec![1.0, 1.0],
            c: vec![0.0, 0.0],
            a: vec![1.0, 1.0],
            b: vec![-2.0],
            lo: vec![-5.0, -5.0],
            hi: vec![5.0, 5.0],
        };
        let sol = solve_qp(&p, DEFAULT_MAX_ITERATIONS).unwrap();
        let mut best = f64::INFINITY;
        let steps = (10.0_f64 / 0.05) as i64;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = [-5.0 + i as f64 * 0.05, -5.0 + j as f64 * 0.05];
                if x[0] + x[1] <= -2.0 + 1e-9 {
                    best = best.min(objective_value(&p, &x));
                }
            }
        }
        assert!(sol.objective <= best + 1e-4);
    }

    #[test]
    fn grid_search_bound_3d() {
        let p = QpProblem {
            q: vec![1.0, 0.5, 2.0],
            c: vec![-1.0, 1.0, 0.25],
            a: vec![1.0, 1.0, 0.0, 0.0, -1.0, 1.0],
            b: vec![0.5, 0.75],
            lo: vec![-2.0; 3],
            hi: vec![2.0; 3],
        };
        let sol = solve_qp(&p, DEFAULT_MAX_ITERATIONS).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        let mut best = f64::INFINITY;
        let steps = (4.0_f64 / 0.05) as i64;
        for i in 0..=steps {
            for j in 0..=steps {
                for l in 0..=steps {
                    let x = [
                        -2.0 + i as f64 * 0.05,
                        -2.0 + j as f64 * 0.05,
                        -2.0 + l as f64 * 0.05,
                    ];
                    if x[0] + x[1] <= 0.5 + 1e-9 && -x[1] + x[2] <= 0.75 + 1e-9 {
                        best = best.min(objective_value(&p, &x));
                    }
                }
            }
        }
        assert!(sol.objective <= best + 1e-4);
    }

    #[test]
    fn tightening_never_improves() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..25 {
            let n = rng.gen_range(1..=4);
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // keep the origin feasible before and after tightening
            let slack = rng.gen_range(0.5..2.0);
            let p = QpProblem {
                q,
                c,
                a,
                b: vec![slack],
                lo: vec![-3.0; n],
                hi: vec![3.0; n],
            };
            let loose = solve_qp(&p, DEFAULT_MAX_ITERATIONS).unwrap();
            let mut tight = p.clone();
            tight.b[0] = slack * 0.25;
            let tighter = solve_qp(&tight, DEFAULT_MAX_ITERATIONS).unwrap();
            assert_eq!(loose.status, QpStatus::Optimal);
            assert_eq!(tighter.status, QpStatus::Optimal);
            assert!(tighter.objective >= loose.objective - 1e-7);
        }
    }

    #[test]
    fn deterministic_bitwise() {
        let p = QpProblem {
            q: vec![1.0, 2.0, 0.5],
            c: vec![-1.0, 0.3, 0.7],
            a: vec![1.0, -1.0, 0.5],
            b: vec![0.25],
            lo: vec![-1.0; 3],
            hi: vec![1.0; 3],
        };
        let a = solve_qp(&p, DEFAULT_MAX_ITERATIONS).unwrap();
        let b = solve_qp(&p, DEFAULT_MAX_ITERATIONS).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.x), bits(&b.x));
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn scaling_objective_keeps_argmin() {
        let p = QpProblem {
            q: vec![1.0, 2.0],
            c: vec![-1.0, 0.5],
            a: vec![1.0, 1.0],
            b: vec![0.5],
            lo: vec![-2.0, -2.0],
            hi: vec![2.0, 2.0],
        };
        let mut scaled = p.clone();
        for v in scaled.q.iter_mut().chain(scaled.c.iter_mut()) {
            *v *= 3.7;
        }
        let a = solve_qp(&p, DEFAULT_MAX_ITERATIONS).unwrap();
        let b = solve_qp(&scaled, DEFAULT_MAX_ITERATIONS).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(a.x[j], b.x[j], epsilon = 1e-6);
        }
    }

    #[test]
    fn dump_round_trip() {
        let p = QpProblem {
            q: vec![1.0, 0.0],
            c: vec![-0.5, 1.0],
            a: vec![1.0, 2.0],
            b: vec![0.1],
            lo: vec![0.0, -1.0],
            hi: vec![1.0, 1.0],
        };
        let text = p.to_json();
        assert!(text.contains("\"A\""));
        let q = QpProblem::from_json(&text).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_negative_q() {
        let p = unconstrained(vec![-1.0], vec![0.0], 0.0, 1.0);
        assert!(matches!(p.validate(), Err(QpError::NonConvex(0))));
    }

    #[test]
    fn tiny_iteration_budget_never_misreports_infeasible() {
        let p = QpProblem {
            q: vec![1.0, 1.0],
            c: vec![0.0, 0.0],
            a: vec![1.0, 1.0],
            b: vec![-2.0],
            lo: vec![-5.0, -5.0],
            hi: vec![5.0, 5.0],
        };
        let sol = solve_qp(&p, 1).unwrap();
        assert_ne!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn large_multiplier_instance_converges_exactly() {
        // regression: small constraint coefficients force multipliers in the
        // hundreds, which once pushed the dual residual above a fixed
        // tolerance and stalled the solve
        let base = 1.0 / 21.0 - 12.0 / 42.0;
        let p = QpProblem {
            q: vec![1.0; 4],
            c: vec![0.0; 4],
            a: vec![
                1.0 / 21.0, 1.0 / 21.0, -1.0 / 42.0, -1.0 / 42.0,
                -1.0 / 21.0, -1.0 / 21.0, 1.0 / 42.0, 1.0 / 42.0,
            ],
            b: vec![0.05 - base, 0.05 + base],
            lo: vec![-1.0, 0.0, -12.0, 0.0],
            hi: vec![0.0, 20.0, 0.0, 30.0],
        };
        let start = vec![-1.0, 0.0, -12.0, 0.0];
        let sol = solve_qp_from(&p, Some(&start), DEFAULT_MAX_ITERATIONS).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        // inactive variables polish to exact zero
        assert_eq!(sol.x[0], 0.0);
        assert_eq!(sol.x[3], 0.0);
        assert!(sol.kkt_residual <= KKT_TOL);
    }
}

