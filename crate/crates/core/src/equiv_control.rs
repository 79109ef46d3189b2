//! Equivalent control in the sliding phase.
//!
//! After the reaching time `T`, keeping `y = C x = 0` forces
//! `u~ = u_eq + gamma` to solve a Volterra equation of the second kind,
//!
//! ```text
//! u~(s) = g(s) + int_T^s K(s,tau) u~(tau) dtau,    K = -(CB)^{-1} C Phi B~,
//! ```
//!
//! solved here by a truncated Neumann series and, independently, by forward
//! substitution. Both use trapezoidal quadrature on the same grid, so the
//! series converges to the discrete fixed point computed by the direct solver.

use crate::error::{Error, Result};
use crate::fields::FeedbackLaw;
use crate::integrator::Trajectory;
use crate::kernels::GridKernel;
use crate::linalg::{inverse, spectral_norm, Mat, Vector, WeightedNorm};
use crate::smc_design::LinearIdePlant;

/// Kernel weights on the grid, stored flat (column-major `m x m` blocks).
#[derive(Debug, Clone)]
enum Table {
    /// Depends on `k - i` only.
    Lag(Vec<f64>),
    /// Lower triangle, row `k` holds `i = 0..=k`.
    Triangle(Vec<f64>),
}

/// `u(s) = g(s) + int_{start}^s K(s,tau) u(tau) dtau` on the grid
/// `start + k h`, `k = 0..len`.
#[derive(Debug, Clone)]
pub struct VolterraProblem {
    dim: usize,
    start: f64,
    h: f64,
    forcing: Vec<Vector>,
    table: Table,
    /// Upper bound on `||K||` over the triangle.
    pub kernel_bound: f64,
}

impl VolterraProblem {
    /// Samples `K(s, tau)` (any kernel) and `g` on the grid covering `[start, end]`.
    pub fn new<K, G>(
        dim: usize,
        kernel: K,
        forcing: G,
        start: f64,
        end: f64,
        h: f64,
    ) -> Result<Self>
    where
        K: Fn(f64, f64) -> Mat,
        G: Fn(f64) -> Vector,
    {
        let len = grid_len(start, end, h)?;
        let time = |k: usize| start + k as f64 * h;
        let mut table = Vec::with_capacity(len * (len + 1) / 2 * dim * dim);
        for k in 0..len {
            for i in 0..=k {
                table.extend_from_slice(kernel(time(k), time(i)).as_slice());
            }
        }
        let g = (0..len).map(|k| forcing(time(k))).collect();
        Self::from_parts(dim, start, h, g, Table::Triangle(table))
    }

    /// Kernel depending on the lag only, `K(s, tau) = k(s - tau)`.
    pub fn stationary<K>(
        dim: usize,
        kernel: K,
        forcing: Vec<Vector>,
        start: f64,
        h: f64,
    ) -> Result<Self>
    where
        K: Fn(f64) -> Mat,
    {
        let mut table = Vec::with_capacity(forcing.len() * dim * dim);
        for j in 0..forcing.len() {
            table.extend_from_slice(kernel(j as f64 * h).as_slice());
        }
        Self::from_parts(dim, start, h, forcing, Table::Lag(table))
    }

    fn from_parts(
        dim: usize,
        start: f64,
        h: f64,
        forcing: Vec<Vector>,
        table: Table,
    ) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Param(format!(
                "Volterra step must be positive, got {h}"
            )));
        }
        if forcing.is_empty() {
            return Err(Error::Param(
                "Volterra problem needs at least one grid node".into(),
            ));
        }
        if forcing.iter().any(|g| g.len() != dim) {
            return Err(Error::Dimension(format!(
                "forcing must have {dim} components"
            )));
        }
        let blocks = match &table {
            Table::Lag(t) | Table::Triangle(t) => t.chunks(dim * dim),
        };
        let kernel_bound = blocks
            .map(|b| spectral_norm(&Mat::from_column_slice(dim, dim, b)))
            .fold(0.0, f64::max);
        Ok(Self {
            dim,
            start,
            h,
            forcing,
            table,
            kernel_bound,
        })
    }

    /// Replaces the kernel bound by a larger analytic one.
    pub fn with_kernel_bound(mut self, bound: f64) -> Result<Self> {
        if bound < self.kernel_bound {
            return Err(Error::Param(format!(
                "kernel bound {bound} is below the sampled sup {}",
                self.kernel_bound
            )));
        }
        self.kernel_bound = bound;
        Ok(self)
    }

    /// Same kernel, new forcing.
    pub fn with_forcing(&self, forcing: Vec<Vector>) -> Result<Self> {
        if forcing.len() != self.len() || forcing.iter().any(|g| g.len() != self.dim) {
            return Err(Error::Dimension("forcing does not match the grid".into()));
        }
        Ok(Self {
            forcing,
            ..self.clone()
        })
    }

    pub fn len(&self) -> usize {
        self.forcing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forcing.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.h
    }

    /// Interval length `t1 - t*`.
    pub fn span(&self) -> f64 {
        (self.len() - 1) as f64 * self.h
    }

    pub fn forcing(&self) -> &[Vector] {
        &self.forcing
    }

    pub fn sup_forcing(&self) -> f64 {
        self.forcing.iter().map(|g| g.norm()).fold(0.0, f64::max)
    }

    fn block(&self, k: usize, i: usize) -> &[f64] {
        let sq = self.dim * self.dim;
        let at = match &self.table {
            Table::Lag(_) => (k - i) * sq,
            Table::Triangle(_) => (k * (k + 1) / 2 + i) * sq,
        };
        match &self.table {
            Table::Lag(t) | Table::Triangle(t) => &t[at..at + sq],
        }
    }

    fn is_zero(&self) -> bool {
        match &self.table {
            Table::Lag(t) | Table::Triangle(t) => t.iter().all(|v| *v == 0.0),
        }
    }

    /// `acc += w * K(k, i) v`.
    fn accumulate(&self, acc: &mut [f64], w: f64, k: usize, i: usize, v: &Vector) {
        let block = self.block(k, i);
        let m = self.dim;
        for col in 0..m {
            let vc = w * v[col];
            if vc == 0.0 {
                continue;
            }
            for row in 0..m {
                acc[row] += block[col * m + row] * vc;
            }
        }
    }

    /// Trapezoidal quadrature of `int_{start}^{t_k} K(t_k, tau) v(tau) dtau`.
    pub fn apply(&self, v: &[Vector]) -> Vec<Vector> {
        let m = self.dim;
        let h = self.h;
        (0..self.len())
            .map(|k| {
                let mut acc = vec![0.0; m];
                if k > 0 {
                    self.accumulate(&mut acc, 0.5 * h, k, 0, &v[0]);
                    for i in 1..k {
                        self.accumulate(&mut acc, h, k, i, &v[i]);
                    }
                    self.accumulate(&mut acc, 0.5 * h, k, k, &v[k]);
                }
                Vector::from_vec(acc)
            })
            .collect()
    }
}

fn grid_len(start: f64, end: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !(end >= start) {
        return Err(Error::Param(format!(
            "Volterra grid needs h > 0 and end >= start (h = {h}, [{start}, {end}])"
        )));
    }
    Ok(((end - start) / h * (1.0 + 1e-12)).floor() as usize + 1)
}

fn sup(v: &[Vector]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Analytic bound `(M T)^i / i! * sup ||g||` on the `i`-th Neumann term.
pub fn factorial_term_bound(kernel_bound: f64, span: f64, i: usize, sup_g: f64) -> f64 {
    let x = kernel_bound * span;
    let mut term = sup_g;
    for j in 1..=i {
        term *= x / j as f64;
    }
    term
}

/// Bounds on the discrete Neumann terms: the larger of the analytic factorial
/// bound and the discrete majorant obtained by iterating the quadrature with
/// the constant kernel `M_K` (the trapezoid rule slightly overestimates
/// integrals of convex monomials, so the analytic bound alone is not a strict
/// majorant of the discrete terms).
fn term_bounds(problem: &VolterraProblem, count: usize) -> Vec<f64> {
    let n = problem.len();
    let h = problem.h;
    let mk = problem.kernel_bound;
    let sup_g = problem.sup_forcing();
    let mut out = Vec::with_capacity(count);
    let mut major = vec![sup_g; n];
    for i in 0..count {
        let analytic = factorial_term_bound(mk, problem.span(), i, sup_g);
        let discrete = major.iter().cloned().fold(0.0, f64::max);
        // round-off slack: the terms and the majorant are summed in different orders
        out.push(analytic.max(discrete) * (1.0 + 64.0 * f64::EPSILON));
        // trapezoid cumulative integral of the (nondecreasing) majorant
        let mut next = vec![0.0; n];
        let mut running = 0.0;
        for k in 1..n {
            running += 0.5 * h * (major[k - 1] + major[k]);
            next[k] = mk * running;
        }
        major = next;
    }
    out
}

/// What a Neumann solve did and how far it is from the full series.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannReport {
    /// Highest power `n` of the operator included (`sum_{i=0}^n K^i g`).
    pub n_terms: usize,
    /// Bound on the sup-norm of the neglected tail `sum_{i>n} K^i g`.
    pub truncation_bound: f64,
    /// Measured sup-norm of each computed term `K^i g`.
    pub term_sups: Vec<f64>,
    /// Bound on each computed term.
    pub term_bounds: Vec<f64>,
}

const TAIL_TERMS: usize = 400;

fn tail_bound(bounds: &[f64], n: usize) -> f64 {
    bounds.iter().skip(n + 1).sum()
}

/// Smallest `n` with truncation bound below `1e-10 sup ||g||`.
pub fn default_terms(problem: &VolterraProblem) -> usize {
    let bounds = term_bounds(problem, TAIL_TERMS);
    let target = 1e-10 * problem.sup_forcing();
    (1..TAIL_TERMS - 1)
        .find(|&n| tail_bound(&bounds, n) < target)
        .unwrap_or(TAIL_TERMS - 2)
}

/// `sum_{i=0}^{n} K^i g` with `K` applied by trapezoidal quadrature.
pub fn neumann_solve(
    problem: &VolterraProblem,
    n_terms: Option<usize>,
) -> (Vec<Vector>, NeumannReport) {
    let n = n_terms.unwrap_or_else(|| default_terms(problem));
    let mut total = problem.forcing.clone();
    let mut term = problem.forcing.clone();
    let mut term_sups = vec![sup(&term)];
    if !problem.is_zero() {
        for _ in 0..n {
            term = problem.apply(&term);
            for (t, v) in total.iter_mut().zip(&term) {
                *t += v;
            }
            term_sups.push(sup(&term));
        }
    } else {
        term_sups.resize(n + 1, 0.0);
    }
    let bounds = term_bounds(problem, (n + TAIL_TERMS).max(n + 2));
    let report = NeumannReport {
        n_terms: n,
        truncation_bound: tail_bound(&bounds, n),
        term_sups,
        term_bounds: bounds[..=n].to_vec(),
    };
    (total, report)
}

/// Forward substitution for the trapezoid-discretized equation,
/// `(I - h/2 K_kk) u_k = g_k + h (K_k0 u_0 / 2 + sum_{0<i<k} K_ki u_i)`.
pub fn direct_volterra_solve(problem: &VolterraProblem) -> Result<Vec<Vector>> {
    let m = problem.dim;
    let h = problem.h;
    let mut u: Vec<Vector> = Vec::with_capacity(problem.len());
    u.push(problem.forcing[0].clone());
    for k in 1..problem.len() {
        let mut acc = problem.forcing[k].as_slice().to_vec();
        problem.accumulate(&mut acc, 0.5 * h, k, 0, &u[0]);
        for i in 1..k {
            problem.accumulate(&mut acc, h, k, i, &u[i]);
        }
        let diag = Mat::from_column_slice(m, m, problem.block(k, k));
        let lhs = Mat::identity(m, m) - diag * (0.5 * h);
        let rhs = Vector::from_vec(acc);
        let uk = if m == 1 {
            rhs / lhs[(0, 0)]
        } else {
            lhs.lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Singular(format!("I - h K/2 at step {k}")))?
        };
        u.push(uk);
    }
    Ok(u)
}

/// Threshold used by [`detect_reaching`]: `5 h ||C|| max_k ||x_k||`.
pub fn reaching_threshold(traj: &Trajectory, c: &Mat) -> f64 {
    let scale = traj.states.iter().map(|x| x.norm()).fold(0.0, f64::max);
    5.0 * traj.h() * spectral_norm(c) * scale
}

pub const REACHING_WINDOW: usize = 100;

/// First node after which `||y||_P` stays below `threshold` for
/// [`REACHING_WINDOW`] consecutive steps.
pub fn detect_reaching(traj: &Trajectory, p: &Mat, threshold: f64) -> Result<Option<usize>> {
    let norm = WeightedNorm::new(p)?;
    let below: Vec<bool> = traj
        .outputs
        .iter()
        .map(|y| norm.vector_norm(y) < threshold)
        .collect();
    let mut start = None;
    let mut count = 0usize;
    for (k, &b) in below.iter().enumerate() {
        if b {
            if count == 0 {
                start = Some(k);
            }
            count += 1;
            if count >= REACHING_WINDOW {
                return Ok(start);
            }
        } else {
            count = 0;
        }
    }
    Ok(None)
}

/// The sliding-phase equation assembled from a simulated closed loop.
#[derive(Debug, Clone)]
pub struct SlidingVolterra {
    pub problem: VolterraProblem,
    /// Grid index of the reaching time on the trajectory.
    pub reach_index: usize,
    /// `g~(t_k)`, memory of the reaching phase.
    pub reaching_memory: Vec<Vector>,
}

/// `K(s,tau) = -(CB)^{-1} C Phi(s,tau) B~`,
/// `g = -(CB)^{-1} (C p + g~)`, with `g~(t) = int_{t0}^{T} C Phi(t,tau) B~ (u + gamma) dtau`
/// taken by the rectangle rule from the recorded inputs.
pub fn build_sliding_volterra(
    plant: &LinearIdePlant,
    traj: &Trajectory,
    law: &FeedbackLaw,
    reach_index: usize,
) -> Result<SlidingVolterra> {
    if reach_index >= traj.len() {
        return Err(Error::Param(format!(
            "reaching index {reach_index} beyond trajectory of {} nodes",
            traj.len()
        )));
    }
    if law.input_dim() != plant.input_dim() {
        return Err(Error::Dimension(
            "feedback law and plant disagree on m".into(),
        ));
    }
    let h = traj.h();
    let scale = traj.states.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let limit = 10.0 * h * spectral_norm(&plant.c) * scale.max(1.0);
    let worst = traj.outputs[reach_index..]
        .iter()
        .map(|y| y.norm())
        .fold(0.0, f64::max);
    if worst > limit {
        return Err(Error::NotSliding(format!(
            "max |y| after t = {} is {worst:e} > {limit:e}",
            traj.time(reach_index)
        )));
    }

    let cb_inv = inverse(&plant.cb(), "CB")?;
    let steps = traj.len() - 1;
    let grid = GridKernel::projected(
        &plant.kernel,
        traj.t0(),
        h,
        steps,
        Some(plant.c.clone()),
        Some(plant.b_tilde.clone()),
    );
    let driven: Vec<Vector> = (0..reach_index)
        .map(|i| &traj.inputs[i] + plant.gamma_at(traj.time(i)))
        .collect();
    let m = plant.input_dim();
    let memoryless = plant.kernel.is_trivially_zero();
    let reaching_memory: Vec<Vector> = (reach_index..traj.len())
        .map(|k| {
            let mut acc = Vector::zeros(m);
            if !memoryless {
                for i in grid.first_index(k)..reach_index {
                    acc.gemv(h, &grid.weight(k, i), &driven[i], 1.0);
                }
            }
            acc
        })
        .collect();
    let forcing: Vec<Vector> = (reach_index..traj.len())
        .zip(&reaching_memory)
        .map(|(k, gt)| -(&cb_inv * (&plant.c * plant.p_at(traj.time(k)) + gt)))
        .collect();

    let left = -(&cb_inv * &plant.c);
    let right = plant.b_tilde.clone();
    let start = traj.time(reach_index);
    let problem = if plant.kernel.is_stationary() {
        let kernel = plant.kernel.clone();
        let t0 = traj.t0();
        VolterraProblem::stationary(
            m,
            move |lag| {
                let j = (lag / h).round() as usize;
                &left * kernel.eval_grid(t0, h, j, 0) * &right
            },
            forcing,
            start,
            h,
        )?
    } else {
        let kernel = plant.kernel.clone();
        let t0 = traj.t0();
        let len = forcing.len();
        let problem = VolterraProblem::new(
            m,
            move |s, tau| {
                let k = ((s - t0) / h).round() as usize;
                let i = ((tau - t0) / h).round() as usize;
                &left * kernel.eval_grid(t0, h, k, i) * &right
            },
            |_| Vector::zeros(m),
            start,
            start + (len - 1) as f64 * h,
            h,
        )?;
        problem.with_forcing(forcing)?
    };
    Ok(SlidingVolterra {
        problem,
        reach_index,
        reaching_memory,
    })
}

/// Residual of the sliding constraint
/// `CB (u_eq + gamma) + C p + int_{t0}^t C Phi B~ (u + gamma) dtau`
/// on every node from the reaching index on, with the recorded input used
/// before it and `u_eq` after it. Earlier nodes are reported as zero.
pub fn sliding_residual(
    traj: &Trajectory,
    plant: &LinearIdePlant,
    u_eq: &[Vector],
    reach_index: usize,
) -> Result<Vec<Vector>> {
    if reach_index + u_eq.len() != traj.len() {
        return Err(Error::Dimension(format!(
            "u_eq has {} samples for {} sliding nodes",
            u_eq.len(),
            traj.len() - reach_index
        )));
    }
    let h = traj.h();
    let m = plant.input_dim();
    let cb = plant.cb();
    let driven: Vec<Vector> = (0..traj.len())
        .map(|i| {
            let u = if i < reach_index {
                &traj.inputs[i]
            } else {
                &u_eq[i - reach_index]
            };
            u + plant.gamma_at(traj.time(i))
        })
        .collect();
    let grid = GridKernel::projected(
        &plant.kernel,
        traj.t0(),
        h,
        traj.len() - 1,
        Some(plant.c.clone()),
        Some(plant.b_tilde.clone()),
    );
    let memoryless = plant.kernel.is_trivially_zero();
    Ok((0..traj.len())
        .map(|k| {
            if k < reach_index {
                return Vector::zeros(m);
            }
            let t = traj.time(k);
            let mut r = &cb * &driven[k] + &plant.c * plant.p_at(t);
            if !memoryless {
                r += grid.rectangle_sum(k, &driven);
            }
            r
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector;

    fn constant_problem(h: f64) -> VolterraProblem {
        let n = grid_len(0.0, 1.0, h).unwrap();
        VolterraProblem::stationary(1, |_| Mat::identity(1, 1), vec![vector(&[1.0]); n], 0.0, h)
            .unwrap()
    }

    fn sup_gap(a: &[Vector], b: &[Vector]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_kernel_returns_forcing() {
        let g: Vec<Vector> = (0..50).map(|k| vector(&[(k as f64).sin()])).collect();
        let p = VolterraProblem::stationary(1, |_| Mat::zeros(1, 1), g.clone(), 0.0, 0.01).unwrap();
        let (u, report) = neumann_solve(&p, Some(5));
        assert_eq!(u, g);
        assert_eq!(report.truncation_bound, 0.0);
        assert_eq!(direct_volterra_solve(&p).unwrap(), g);
    }

    #[test]
    fn constant_kernel_resolvent() {
        let p = constant_problem(1e-3);
        let exact: Vec<Vector> = (0..p.len()).map(|k| vector(&[p.time(k).exp()])).collect();
        let direct = direct_volterra_solve(&p).unwrap();
        assert!(sup_gap(&direct, &exact) < 1e-4);
        let (series, report) = neumann_solve(&p, Some(10));
        assert!(sup_gap(&series, &exact) < 1e-6);
        assert!(sup_gap(&series, &direct) <= report.truncation_bound + 1e-12);
    }

    #[test]
    fn neumann_terms_decay_factorially() {
        let p = constant_problem(1e-2);
        let (_, report) = neumann_solve(&p, Some(12));
        for (i, (s, b)) in report.term_sups.iter().zip(&report.term_bounds).enumerate() {
            assert!(s <= b, "term {i}: {s} > {b}");
            // the trapezoid majorant exceeds the analytic bound by O((i h)^2)
            let analytic = factorial_term_bound(1.0, 1.0, i, 1.0);
            let slack = (i as f64 * p.h()).powi(2) + 1e-13;
            assert!(
                *b <= analytic * (1.0 + slack),
                "term {i} majorant {b} vs {analytic}"
            );
        }
    }

    #[test]
    fn default_terms_meet_target() {
        let p = constant_problem(1e-2);
        let n = default_terms(&p);
        let (_, report) = neumann_solve(&p, None);
        assert_eq!(report.n_terms, n);
        assert!(report.truncation_bound < 1e-10);
        let (_, shorter) = neumann_solve(&p, Some(n - 1));
        assert!(shorter.truncation_bound >= 1e-10);
    }

    #[test]
    fn solvers_are_linear() {
        let h = 0.01;
        let n = 101;
        let kernel = |s: f64, tau: f64| Mat::from_element(1, 1, (s - 2.0 * tau).cos());
        let g1 = |t: f64| vector(&[t.sin()]);
        let g2 = |t: f64| vector(&[1.0 - t * t]);
        let p1 = VolterraProblem::new(1, kernel, g1, 0.0, 1.0, h).unwrap();
        let p2 = VolterraProblem::new(1, kernel, g2, 0.0, 1.0, h).unwrap();
        let sum: Vec<Vector> = p1
            .forcing()
            .iter()
            .zip(p2.forcing())
            .map(|(a, b)| a + b)
            .collect();
        let p12 = p1.with_forcing(sum).unwrap();
        assert_eq!(p1.len(), n);
        let d = |p: &VolterraProblem| direct_volterra_solve(p).unwrap();
        let lhs = d(&p12);
        let rhs: Vec<Vector> = d(&p1).iter().zip(d(&p2)).map(|(a, b)| a + b).collect();
        let scale = sup(&lhs);
        assert!(sup_gap(&lhs, &rhs) <= 1e-12 * scale);
        let ns = |p: &VolterraProblem| neumann_solve(p, Some(15)).0;
        let lhs = ns(&p12);
        let rhs: Vec<Vector> = ns(&p1).iter().zip(ns(&p2)).map(|(a, b)| a + b).collect();
        assert!(sup_gap(&lhs, &rhs) <= 1e-12 * scale);
    }

    #[test]
    fn random_kernel_cross_check() {
        // a fixed "random" smooth 2x2 kernel
        let kernel = |s: f64, tau: f64| {
            Mat::from_row_slice(
                2,
                2,
                &[
                    (s * tau).sin(),
                    0.3 * (s - tau),
                    -0.7 * (tau).cos(),
                    0.5 * (-s).exp(),
                ],
            )
        };
        let p =
            VolterraProblem::new(2, kernel, |t| vector(&[1.0, t.cos()]), 0.0, 2.0, 1e-2).unwrap();
        let direct = direct_volterra_solve(&p).unwrap();
        for n in [2, 5, 10, 20] {
            let (series, report) = neumann_solve(&p, Some(n));
            let roundoff = 64.0 * f64::EPSILON * sup(&direct);
            assert!(
                sup_gap(&series, &direct) <= report.truncation_bound + roundoff,
                "n = {n}"
            );
        }
    }

    #[test]
    fn multi_input_trapezoid_converges() {
        // K = [[0, 1], [-1, 0]], g = (1, 0): u = (cos t, -sin t)
        let p = VolterraProblem::stationary(
            2,
            |_| Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            vec![vector(&[1.0, 0.0]); 1001],
            0.0,
            1e-3,
        )
        .unwrap();
        let u = direct_volterra_solve(&p).unwrap();
        let err = (0..p.len())
            .map(|k| (&u[k] - vector(&[p.time(k).cos(), -p.time(k).sin()])).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }
}
