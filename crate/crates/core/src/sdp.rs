//! Small dense LMI solver.
//!
//! Problems have the form `F_k(x) = C_k + sum_i x_i A_ki <= 0` for every
//! constraint `k`, with optional scalar bounds on each variable. Feasibility
//! is decided by maximising the common margin `t` in `F_k(x) + t I <= 0`
//! (phase I); linear objectives are then minimised over
//! `F_k(x) <= -strictness I` (phase II). Both phases use a log-det barrier
//! with damped Newton steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, invert_spd, max_eigenvalue, Matrix, SymmetricMatrix};

pub type VarId = usize;

/// `constant + sum(x[id] * coeff)`.
#[derive(Debug, Clone)]
pub struct AffineMatrixFunction {
    constant: SymmetricMatrix,
    terms: Vec<(VarId, SymmetricMatrix)>,
}

impl AffineMatrixFunction {
    pub fn new(constant: SymmetricMatrix) -> Self {
        AffineMatrixFunction {
            constant,
            terms: Vec::new(),
        }
    }

    pub fn with_term(mut self, var: VarId, coeff: SymmetricMatrix) -> Result<Self> {
        self.add_term(var, coeff)?;
        Ok(self)
    }

    pub fn add_term(&mut self, var: VarId, coeff: SymmetricMatrix) -> Result<()> {
        if coeff.dim() != self.constant.dim() {
            return Err(Error::Dimension(format!(
                "LMI term for variable {var} has dim {}, constant has dim {}",
                coeff.dim(),
                self.constant.dim()
            )));
        }
        if self.terms.iter().any(|(v, _)| *v == var) {
            return Err(Error::InvalidProblem(format!(
                "variable {var} appears twice in one LMI"
            )));
        }
        self.terms.push((var, coeff));
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn constant(&self) -> &SymmetricMatrix {
        &self.constant
    }

    pub fn terms(&self) -> &[(VarId, SymmetricMatrix)] {
        &self.terms
    }

    pub fn eval(&self, x: &[f64]) -> SymmetricMatrix {
        let mut out = self.constant.clone();
        for (v, c) in &self.terms {
            out.axpy(x[*v], c);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VarBounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Every constraint is required to be negative semidefinite (strictly
/// negative definite up to the solver's strictness).
#[derive(Debug, Clone)]
pub struct LmiProblem {
    num_vars: usize,
    constraints: Vec<AffineMatrixFunction>,
    bounds: Vec<VarBounds>,
    objective: Option<Vec<f64>>,
}

impl LmiProblem {
    pub fn new(num_vars: usize) -> Self {
        LmiProblem {
            num_vars,
            constraints: Vec::new(),
            bounds: vec![VarBounds::default(); num_vars],
            objective: None,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constraints(&self) -> &[AffineMatrixFunction] {
        &self.constraints
    }

    pub fn bounds(&self) -> &[VarBounds] {
        &self.bounds
    }

    pub fn objective(&self) -> Option<&[f64]> {
        self.objective.as_deref()
    }

    pub fn add_constraint(&mut self, f: AffineMatrixFunction) -> Result<()> {
        if let Some((v, _)) = f.terms.iter().find(|(v, _)| *v >= self.num_vars) {
            return Err(Error::InvalidProblem(format!(
                "variable {v} out of range (problem has {})",
                self.num_vars
            )));
        }
        self.constraints.push(f);
        Ok(())
    }

    pub fn set_lower(&mut self, var: VarId, lower: f64) {
        self.bounds[var].lower = Some(lower);
    }

    pub fn set_upper(&mut self, var: VarId, upper: f64) {
        self.bounds[var].upper = Some(upper);
    }

    pub fn set_objective(&mut self, c: Vec<f64>) -> Result<()> {
        if c.len() != self.num_vars {
            return Err(Error::Dimension(format!(
                "objective has {} coefficients for {} variables",
                c.len(),
                self.num_vars
            )));
        }
        self.objective = Some(c);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.constraints.is_empty() {
            return Err(Error::InvalidProblem("no constraints".into()));
        }
        let mut used = vec![false; self.num_vars];
        for f in &self.constraints {
            for (v, _) in &f.terms {
                used[*v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidProblem(format!(
                "variable {v} is not referenced by any constraint"
            )));
        }
        for (i, b) in self.bounds.iter().enumerate() {
            if let (Some(l), Some(u)) = (b.lower, b.upper) {
                if l >= u {
                    return Err(Error::InvalidProblem(format!(
                        "variable {i} has empty bound interval [{l}, {u}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `-max_k lambda_max(F_k(x))`, evaluated directly.
    pub fn margin_at(&self, x: &[f64]) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for f in &self.constraints {
            worst = worst.max(max_eigenvalue(&f.eval(x))?);
        }
        Ok(-worst)
    }

    pub fn bounds_satisfied(&self, x: &[f64]) -> bool {
        self.bounds
            .iter()
            .zip(x)
            .all(|(b, &v)| b.lower.is_none_or(|l| v >= l) && b.upper.is_none_or(|u| v <= u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LmiStatus {
    Feasible,
    InfeasibleToTolerance,
    NumericalFailure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmiSolution {
    pub values: Vec<f64>,
    /// Most positive eigenvalue over all constraints, negated.
    pub margin: f64,
    pub status: LmiStatus,
    pub objective: Option<f64>,
    pub newton_steps: usize,
}

impl LmiSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == LmiStatus::Feasible
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Required margin for a point to count as feasible.
    pub strictness: f64,
    /// Phase I stops increasing the margin past this value.
    pub margin_cap: f64,
    /// Variables without explicit bounds are kept inside `[-r, r]`.
    pub box_radius: f64,
    /// Target duality-gap bound `m / s` of the barrier method.
    pub gap_tolerance: f64,
    pub max_newton_steps: usize,
    pub barrier_growth: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            strictness: 1e-8,
            margin_cap: 1.0,
            box_radius: 1e4,
            gap_tolerance: 1e-11,
            max_newton_steps: 5000,
            barrier_growth: 12.0,
        }
    }
}

/// Maximises the margin. Reports `Feasible` iff the best margin reaches
/// `strictness`.
pub fn solve_feasibility(p: &LmiProblem, strictness: f64) -> Result<LmiSolution> {
    let opts = SolverOptions {
        strictness,
        ..SolverOptions::default()
    };
    solve_feasibility_with(p, &opts)
}

pub fn solve_feasibility_with(p: &LmiProblem, opts: &SolverOptions) -> Result<LmiSolution> {
    check_inputs(p, opts)?;
    let phase1 = maximize_margin(p, opts, None);
    finish(p, opts, phase1, None)
}

/// Minimises the problem's linear objective over the strictly feasible set.
pub fn minimize_linear(p: &LmiProblem) -> Result<LmiSolution> {
    minimize_linear_with(p, &SolverOptions::default())
}

pub fn minimize_linear_with(p: &LmiProblem, opts: &SolverOptions) -> Result<LmiSolution> {
    check_inputs(p, opts)?;
    let c = p
        .objective
        .clone()
        .ok_or_else(|| Error::InvalidProblem("minimize_linear needs an objective".into()))?;
    // Phase I only needs to clear the strictness level comfortably.
    let target = (10.0 * opts.strictness).min(0.5 * opts.margin_cap);
    let phase1 = maximize_margin(p, opts, Some(target));
    if phase1.failed || phase1.t <= opts.strictness {
        return finish(p, opts, phase1, None);
    }
    let phase2 = minimize_objective(p, opts, &c, &phase1.x);
    let mut steps = phase1.steps;
    let out = match phase2 {
        Some(run) => {
            steps += run.steps;
            Iterate {
                x: run.x,
                t: opts.strictness,
                steps,
                failed: run.failed,
            }
        }
        None => Iterate {
            failed: true,
            ..phase1
        },
    };
    finish(p, opts, out, Some(&c))
}

fn check_inputs(p: &LmiProblem, opts: &SolverOptions) -> Result<()> {
    if !(opts.strictness > 0.0) {
        return Err(Error::InvalidProblem("strictness must be positive".into()));
    }
    p.validate()
}

fn finish(
    p: &LmiProblem,
    opts: &SolverOptions,
    it: Iterate,
    objective: Option<&[f64]>,
) -> Result<LmiSolution> {
    let margin = p.margin_at(&it.x)?;
    let status = if margin >= opts.strictness && p.bounds_satisfied(&it.x) {
        LmiStatus::Feasible
    } else if it.failed {
        LmiStatus::NumericalFailure
    } else {
        LmiStatus::InfeasibleToTolerance
    };
    Ok(LmiSolution {
        objective: objective.map(|c| crate::linalg::dot(c, &it.x)),
        values: it.x,
        margin,
        status,
        newton_steps: it.steps,
    })
}

struct Iterate {
    x: Vec<f64>,
    t: f64,
    steps: usize,
    failed: bool,
}

/// Barrier problem over `z` with LMI blocks `G_k(z) = G0_k + sum z_i Gi_k > 0`
/// and linear constraints `a^T z + b > 0`.
struct Barrier {
    n: usize,
    blocks: Vec<(SymmetricMatrix, Vec<(usize, SymmetricMatrix)>)>,
    linear: Vec<(Vec<(usize, f64)>, f64)>,
}

impl Barrier {
    fn dims(&self) -> f64 {
        (self.blocks.iter().map(|b| b.0.dim()).sum::<usize>() + self.linear.len()) as f64
    }

    fn block_value(
        block: &(SymmetricMatrix, Vec<(usize, SymmetricMatrix)>),
        z: &[f64],
    ) -> SymmetricMatrix {
        let mut g = block.0.clone();
        for (i, gi) in &block.1 {
            g.axpy(z[*i], gi);
        }
        g
    }

    fn linear_value(l: &(Vec<(usize, f64)>, f64), z: &[f64]) -> f64 {
        l.0.iter().map(|(i, a)| a * z[*i]).sum::<f64>() + l.1
    }

    /// -sum log det G_k - sum log(lin), or None outside the domain.
    fn value(&self, z: &[f64]) -> Option<f64> {
        let mut acc = 0.0;
        for b in &self.blocks {
            acc -= crate::linalg::log_det_pd(&Self::block_value(b, z))?;
        }
        for l in &self.linear {
            let v = Self::linear_value(l, z);
            if !(v > 0.0) {
                return None;
            }
            acc -= v.ln();
        }
        Some(acc)
    }

    fn grad_hess(&self, z: &[f64]) -> Option<(Vec<f64>, Matrix)> {
        let n = self.n;
        let mut g = vec![0.0; n];
        let mut h = Matrix::zeros(n, n);
        for b in &self.blocks {
            let gv = Self::block_value(b, z);
            let ginv = invert_spd(&gv).ok()?.to_matrix();
            let prods: Vec<(usize, Matrix)> =
                b.1.iter()
                    .map(|(i, gi)| (*i, &ginv * &gi.to_matrix()))
                    .collect();
            for (a, (i, mi)) in prods.iter().enumerate() {
                g[*i] -= trace(mi);
                for (j, mj) in prods.iter().skip(a) {
                    let v = trace_of_product(mi, mj);
                    h[(*i, *j)] += v;
                    if i != j {
                        h[(*j, *i)] += v;
                    }
                }
            }
        }
        for l in &self.linear {
            let v = Self::linear_value(l, z);
            if !(v > 0.0) {
                return None;
            }
            for (i, ai) in &l.0 {
                g[*i] -= ai / v;
                for (j, aj) in &l.0 {
                    h[(*i, *j)] += ai * aj / (v * v);
                }
            }
        }
        Some((g, h))
    }
}

fn trace(m: &Matrix) -> f64 {
    (0..m.rows()).map(|i| m[(i, i)]).sum()
}

fn trace_of_product(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Solves H d = -g for the Newton direction; H is PSD by construction, so
/// add a tiny ridge if Cholesky hits a zero pivot.
fn newton_direction(h: &Matrix, g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let scale = (0..n)
        .map(|i| h[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    for ridge in [0.0, 1e-14, 1e-12, 1e-10] {
        let mut hs = SymmetricMatrix::symmetrize(h);
        for i in 0..n {
            hs.set(i, i, hs.get(i, i) + ridge * scale);
        }
        if let Ok(l) = cholesky(&hs) {
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut s = -g[i];
                for k in 0..i {
                    s -= l[(i, k)] * y[k];
                }
                y[i] = s / l[(i, i)];
            }
            let mut d = vec![0.0; n];
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= l[(k, i)] * d[k];
                }
                d[i] = s / l[(i, i)];
            }
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
    }
    None
}

struct CenterResult {
    z: Vec<f64>,
    steps: usize,
    failed: bool,
    stop: bool,
}

/// Minimises `s c^T z + barrier(z)` from a strictly feasible `z`.
/// `early` is checked after every step and ends the whole solve when true.
fn center(
    bar: &Barrier,
    c: &[f64],
    s: f64,
    mut z: Vec<f64>,
    budget: usize,
    early: &dyn Fn(&[f64]) -> bool,
) -> CenterResult {
    let f = |z: &[f64]| bar.value(z).map(|b| s * crate::linalg::dot(c, z) + b);
    let mut steps = 0;
    let mut fz = match f(&z) {
        Some(v) => v,
        None => {
            return CenterResult {
                z,
                steps,
                failed: true,
                stop: false,
            }
        }
    };
    while steps < budget {
        let (mut g, h) = match bar.grad_hess(&z) {
            Some(gh) => gh,
            None => {
                return CenterResult {
                    z,
                    steps,
                    failed: true,
                    stop: false,
                }
            }
        };
        for (gi, ci) in g.iter_mut().zip(c) {
            *gi += s * ci;
        }
        let d = match newton_direction(&h, &g) {
            Some(d) => d,
            None => {
                return CenterResult {
                    z,
                    steps,
                    failed: true,
                    stop: false,
                }
            }
        };
        let decrement = -crate::linalg::dot(&g, &d);
        if decrement / 2.0 <= 1e-12 {
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-14 {
            let trial: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            if let Some(ft) = f(&trial) {
                if ft <= fz - 0.25 * alpha * decrement {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            alpha *= 0.5;
        }
        steps += 1;
        match accepted {
            Some((zn, fn_)) => {
                let progress = fz - fn_;
                z = zn;
                fz = fn_;
                if early(&z) {
                    return CenterResult {
                        z,
                        steps,
                        failed: false,
                        stop: true,
                    };
                }
                if progress.abs() <= 1e-15 * (1.0 + fz.abs()) {
                    break;
                }
            }
            // Line search stalled: the iterate is as central as round-off allows.
            None => break,
        }
    }
    CenterResult {
        z,
        steps,
        failed: false,
        stop: false,
    }
}

fn bound_constraints(
    p: &LmiProblem,
    opts: &SolverOptions,
    offset_lower: f64,
) -> Vec<(Vec<(usize, f64)>, f64)> {
    let mut lin = Vec::new();
    for (i, b) in p.bounds.iter().enumerate() {
        match b.lower {
            Some(l) => lin.push((vec![(i, 1.0)], -(l + offset_lower))),
            None => lin.push((vec![(i, 1.0)], opts.box_radius)),
        }
        match b.upper {
            Some(u) => lin.push((vec![(i, -1.0)], u)),
            None => lin.push((vec![(i, -1.0)], opts.box_radius)),
        }
    }
    lin
}

fn initial_point(p: &LmiProblem, opts: &SolverOptions) -> Vec<f64> {
    p.bounds
        .iter()
        .map(|b| match (b.lower, b.upper) {
            (Some(l), Some(u)) => 0.5 * (l + u),
            (Some(l), None) => l + 1.0_f64.min(0.5 * (opts.box_radius - l).max(0.0)),
            (None, Some(u)) => u - 1.0_f64.min(0.5 * (opts.box_radius + u).max(0.0)),
            (None, None) => 0.0,
        })
        .collect()
}

/// Phase I: maximise t s.t. F_k(x) + t I < 0, t < cap. Returns the best
/// iterate; with `target`, stops as soon as t exceeds it.
fn maximize_margin(p: &LmiProblem, opts: &SolverOptions, target: Option<f64>) -> Iterate {
    let n = p.num_vars;
    let tvar = n;
    let mut blocks = Vec::with_capacity(p.constraints.len());
    for f in &p.constraints {
        let d = f.dim();
        let terms = f
            .terms
            .iter()
            .map(|(v, a)| (*v, a.scale(-1.0)))
            .chain(std::iter::once((
                tvar,
                SymmetricMatrix::identity(d).scale(-1.0),
            )))
            .collect();
        blocks.push((f.constant.scale(-1.0), terms));
    }
    let mut linear = bound_constraints(p, opts, 0.0);
    linear.push((vec![(tvar, -1.0)], opts.margin_cap));
    let bar = Barrier {
        n: n + 1,
        blocks,
        linear,
    };
    let x0 = initial_point(p, opts);
    let m0 = p.margin_at(&x0).unwrap_or(f64::NEG_INFINITY);
    if !m0.is_finite() {
        return Iterate {
            x: x0,
            t: f64::NEG_INFINITY,
            steps: 0,
            failed: true,
        };
    }
    let t0 = (m0 - 1.0).min(opts.margin_cap - 1.0);
    let mut z = x0;
    z.push(t0);
    let mut c = vec![0.0; n + 1];
    c[tvar] = -1.0;
    let early = |z: &[f64]| target.is_some_and(|tg| z[tvar] >= tg);
    run_barrier(&bar, &c, z, opts, &early, 1.0)
        .map(|(z, steps, failed)| Iterate {
            t: z[tvar],
            x: z[..n].to_vec(),
            steps,
            failed,
        })
        .unwrap()
}

fn minimize_objective(
    p: &LmiProblem,
    opts: &SolverOptions,
    c: &[f64],
    x0: &[f64],
) -> Option<Iterate> {
    let n = p.num_vars;
    let blocks = p
        .constraints
        .iter()
        .map(|f| {
            let d = f.dim();
            let g0 = f
                .constant
                .scale(-1.0)
                .add(&SymmetricMatrix::identity(d).scale(-opts.strictness));
            let terms = f.terms.iter().map(|(v, a)| (*v, a.scale(-1.0))).collect();
            (g0, terms)
        })
        .collect();
    let bar = Barrier {
        n,
        blocks,
        linear: bound_constraints(p, opts, 0.0),
    };
    bar.value(x0)?;
    let scale = c.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let s0 = 1.0 / scale;
    run_barrier(&bar, c, x0.to_vec(), opts, &|_| false, s0).map(|(x, steps, failed)| Iterate {
        x,
        t: opts.strictness,
        steps,
        failed,
    })
}

fn run_barrier(
    bar: &Barrier,
    c: &[f64],
    mut z: Vec<f64>,
    opts: &SolverOptions,
    early: &dyn Fn(&[f64]) -> bool,
    s0: f64,
) -> Option<(Vec<f64>, usize, bool)> {
    let m = bar.dims();
    let mut s = s0;
    let mut steps = 0;
    loop {
        let res = center(
            bar,
            c,
            s,
            z,
            opts.max_newton_steps.saturating_sub(steps),
            early,
        );
        z = res.z;
        steps += res.steps;
        if res.failed {
            return Some((z, steps, true));
        }
        if res.stop || m / s <= opts.gap_tolerance {
            return Some((z, steps, false));
        }
        if steps >= opts.max_newton_steps {
            return Some((z, steps, true));
        }
        s *= opts.barrier_growth;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_containment() -> LmiProblem {
        // x I - I <= 0, x >= 0
        let mut p = LmiProblem::new(1);
        p.add_constraint(
            AffineMatrixFunction::new(SymmetricMatrix::identity(2).scale(-1.0))
                .with_term(0, SymmetricMatrix::identity(2))
                .unwrap(),
        )
        .unwrap();
        p.set_lower(0, 0.0);
        p
    }

    #[test]
    fn scalar_containment_is_feasible() {
        let sol = solve_feasibility(&scalar_containment(), 1e-8).unwrap();
        assert!(sol.is_feasible());
        assert!(sol.values[0] >= 0.0 && sol.values[0] < 1.0);
        assert!(sol.margin >= 1e-8);
    }

    #[test]
    fn constant_positive_definite_is_infeasible() {
        let mut p = LmiProblem::new(1);
        p.add_constraint(
            AffineMatrixFunction::new(SymmetricMatrix::identity(2))
                .with_term(0, SymmetricMatrix::zeros(2))
                .unwrap(),
        )
        .unwrap();
        let sol = solve_feasibility(&p, 1e-8).unwrap();
        assert_eq!(sol.status, LmiStatus::InfeasibleToTolerance);
        assert!(sol.margin <= 0.0);
    }

    #[test]
    fn minimize_scalar_reaches_lower_bound() {
        let mut p = scalar_containment();
        p.set_objective(vec![1.0]).unwrap();
        let sol = minimize_linear(&p).unwrap();
        assert!(sol.is_feasible());
        assert!(sol.values[0].abs() < 1e-8, "x = {}", sol.values[0]);
    }

    #[test]
    fn minimize_trace_with_identity_floor() {
        // variables: P00, P01, P11; constraint -P + I <= 0
        let mut p = LmiProblem::new(3);
        let mut f = AffineMatrixFunction::new(SymmetricMatrix::identity(2));
        for (v, (i, j)) in [(0, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            let mut e = SymmetricMatrix::zeros(2);
            e.set(i, j, -1.0);
            f.add_term(v, e).unwrap();
        }
        p.add_constraint(f).unwrap();
        p.set_objective(vec![1.0, 0.0, 1.0]).unwrap();
        let sol = minimize_linear(&p).unwrap();
        assert!(sol.is_feasible());
        assert!((sol.objective.unwrap() - 2.0).abs() < 1e-6);
        assert!((sol.values[0] - 1.0).abs() < 1e-6 && sol.values[1].abs() < 1e-6);
    }

    #[test]
    fn minimize_without_objective_is_an_error() {
        assert!(matches!(
            minimize_linear(&scalar_containment()),
            Err(Error::InvalidProblem(_))
        ));
    }

    #[test]
    fn malformed_problems_are_rejected() {
        let p = LmiProblem::new(1);
        assert!(solve_feasibility(&p, 1e-8).is_err());
        let mut p = LmiProblem::new(2);
        p.add_constraint(
            AffineMatrixFunction::new(SymmetricMatrix::identity(1).scale(-1.0))
                .with_term(0, SymmetricMatrix::identity(1))
                .unwrap(),
        )
        .unwrap();
        assert!(matches!(p.validate(), Err(Error::InvalidProblem(_))));
        let f = AffineMatrixFunction::new(SymmetricMatrix::identity(2))
            .with_term(0, SymmetricMatrix::identity(3));
        assert!(f.is_err());
        let f = AffineMatrixFunction::new(SymmetricMatrix::identity(2))
            .with_term(0, SymmetricMatrix::identity(2))
            .unwrap()
            .with_term(0, SymmetricMatrix::identity(2));
        assert!(f.is_err());
        assert!(solve_feasibility(&scalar_containment(), 0.0).is_err());
    }

    #[test]
    fn tightening_strictness_never_creates_feasibility() {
        // eigenvalues x - 1 and -x - 0.5: margin min(1 - x, x + 0.5) peaks at 0.75
        let mut p = LmiProblem::new(1);
        p.add_constraint(
            AffineMatrixFunction::new(SymmetricMatrix::diag(&[-1.0, -0.5]))
                .with_term(0, SymmetricMatrix::diag(&[1.0, -1.0]))
                .unwrap(),
        )
        .unwrap();
        let mut last_feasible = true;
        for strict in [1e-8, 0.1, 0.5, 0.74, 0.76, 0.9] {
            let sol = solve_feasibility(&p, strict).unwrap();
            if !last_feasible {
                assert!(!sol.is_feasible());
            }
            last_feasible = sol.is_feasible();
            assert_eq!(sol.is_feasible(), strict <= 0.75, "strictness {strict}");
        }
    }

    #[test]
    fn single_variable_agrees_with_bisection() {
        // F(x) = C + x A with A indefinite-free direction; minimise x.
        let c = SymmetricMatrix::from_upper(2, vec![1.0, 0.5, -3.0]).unwrap();
        let a = SymmetricMatrix::from_upper(2, vec![-1.0, 0.2, -0.4]).unwrap();
        let mut p = LmiProblem::new(1);
        p.add_constraint(
            AffineMatrixFunction::new(c.clone())
                .with_term(0, a.clone())
                .unwrap(),
        )
        .unwrap();
        p.set_upper(0, 50.0);
        p.set_objective(vec![1.0]).unwrap();
        let sol = minimize_linear(&p).unwrap();
        assert!(sol.is_feasible());
        // bisection on lambda_max(C + x A) = -1e-8 over [lo, hi]
        let g = |x: f64| {
            let mut m = c.clone();
            m.axpy(x, &a);
            max_eigenvalue(&m).unwrap() + 1e-8
        };
        let (mut lo, mut hi) = (0.0, 50.0);
        assert!(g(lo) > 0.0 && g(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!(
            (sol.values[0] - hi).abs() < 1e-6,
            "{} vs {}",
            sol.values[0],
            hi
        );
    }
}
