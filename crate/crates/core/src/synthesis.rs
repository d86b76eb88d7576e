//! Nash cost-guaranteeing feedback synthesis.
//!
//! Each player's certificate is a 5x5 block LMI in `(P~_i, tau^i, nu^i)` for
//! given gains; the gains in turn solve a coupled linear equation in
//! `(P~_1, P~_2)`. The two are iterated to a fixed point. The guaranteed
//! cost matrix is `P_i = (P~_i^-1 - H Xi^-1 H')^-1` with
//! `Xi = T Xi0 + S0c' T N^-1 T S0c`, which is what the LMI certifies after
//! eliminating its last block (see `recover_p`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameModel, Player};
use crate::linalg::{
    inverse, invert_spd, is_positive_definite, max_eigenvalue, solve_linear, spectral_radius,
    Matrix, SymmetricMatrix,
};
use crate::sdp::{minimize_linear_with, AffineMatrixFunction, LmiProblem, SolverOptions};

/// S-procedure multipliers of one player, one pair per uncertainty block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub tau: Vec<f64>,
    pub nu: Vec<f64>,
}

impl Multipliers {
    pub fn new(tau: Vec<f64>, nu: Vec<f64>) -> Self {
        assert_eq!(tau.len(), nu.len(), "one tau and one nu per block");
        Multipliers { tau, nu }
    }

    pub fn uniform(blocks: usize, tau: f64, nu: f64) -> Self {
        Multipliers::new(vec![tau; blocks], vec![nu; blocks])
    }

    pub fn all_positive(&self) -> bool {
        self.tau
            .iter()
            .chain(&self.nu)
            .all(|&v| v > 0.0 && v.is_finite())
    }

    /// Effective `mu = tau / nu` weighting of the coupling term.
    pub fn mu(&self) -> Vec<f64> {
        self.tau.iter().zip(&self.nu).map(|(t, n)| t / n).collect()
    }

    /// `Xi = T Xi0 + S0c' T N^-1 T S0c`, block-diagonal.
    pub fn xi(&self, m: &GameModel) -> SymmetricMatrix {
        let mut out = Matrix::zeros(m.p_dim(), m.p_dim());
        let mut r0 = 0;
        for (j, b) in m.blocks().iter().enumerate() {
            let s = b.coupling();
            let w = self.tau[j] * self.tau[j] / self.nu[j];
            let blk = &b.xi0().to_matrix().scale(self.tau[j]) + &(&s.transpose() * &s).scale(w);
            out.set_block(r0, r0, &blk);
            r0 += b.p_dim();
        }
        SymmetricMatrix::symmetrize(&out)
    }

    fn check_len(&self, m: &GameModel) -> Result<()> {
        let s = m.blocks().len();
        if self.tau.len() != s || self.nu.len() != s {
            return Err(Error::Dimension(format!(
                "{} multiplier pairs for {s} uncertainty blocks",
                self.tau.len()
            )));
        }
        Ok(())
    }
}

/// Block-diagonal `N Xi0 + S0c' T S0c`.
pub fn multiplier_matrix(m: &GameModel, mult: &Multipliers) -> SymmetricMatrix {
    let mut out = Matrix::zeros(m.p_dim(), m.p_dim());
    let mut r0 = 0;
    for (j, b) in m.blocks().iter().enumerate() {
        let s = b.coupling();
        let blk =
            &b.xi0().to_matrix().scale(mult.nu[j]) + &(&s.transpose() * &s).scale(mult.tau[j]);
        out.set_block(r0, r0, &blk);
        r0 += b.p_dim();
    }
    SymmetricMatrix::symmetrize(&out)
}

/// Whether `N Xi0 + S0c' T S0c` is negative definite with margin 1e-10.
pub fn check_multiplier_inequality(m: &GameModel, mult: &Multipliers) -> bool {
    mult.check_len(m).is_ok()
        && mult.all_positive()
        && max_eigenvalue(&multiplier_matrix(m, mult)).is_ok_and(|l| l < -1e-10)
}

fn gain_system(m: &GameModel, pt1: &SymmetricMatrix, pt2: &SymmetricMatrix) -> (Matrix, Matrix) {
    let (b1, b2, a) = (m.b1(), m.b2(), m.a());
    let (p1, p2) = (pt1.to_matrix(), pt2.to_matrix());
    let b1p = &b1.transpose() * &p1;
    let b2p = &b2.transpose() * &p2;
    let lhs = Matrix::from_blocks(&[
        vec![
            Some(&(&m.r_own(Player::One).to_matrix() + &(&b1p * b1))),
            Some(&(&b1p * b2)),
        ],
        vec![
            Some(&(&b2p * b1)),
            Some(&(&m.r_own(Player::Two).to_matrix() + &(&b2p * b2))),
        ],
    ])
    .expect("gain blocks conform");
    let rhs = Matrix::from_blocks(&[vec![Some(&(&b1p * a))], vec![Some(&(&b2p * a))]])
        .expect("gain blocks conform")
        .scale(-1.0);
    (lhs, rhs)
}

/// Solves the coupled gain equation for `(K1, K2)`.
pub fn solve_gain_equation(
    m: &GameModel,
    pt1: &SymmetricMatrix,
    pt2: &SymmetricMatrix,
) -> Result<(Matrix, Matrix)> {
    let n = m.state_dim();
    if pt1.dim() != n || pt2.dim() != n {
        return Err(Error::Dimension("P~ must match the state dimension".into()));
    }
    let (lhs, rhs) = gain_system(m, pt1, pt2);
    let k = solve_linear(&lhs, &rhs).map_err(|e| match e {
        Error::Singular { condition } => Error::Degenerate(format!(
            "gain equation coefficient matrix is singular (condition estimate {condition:.3e}); \
             R_ii may be too small or P~ has collapsed"
        )),
        other => other,
    })?;
    let m1 = m.u1_dim();
    Ok((k.submatrix(0, 0, m1, n), k.submatrix(m1, 0, m.u2_dim(), n)))
}

/// Relative residual of the gain equation at the given gains.
pub fn gain_equation_residual(
    m: &GameModel,
    pt1: &SymmetricMatrix,
    pt2: &SymmetricMatrix,
    k1: &Matrix,
    k2: &Matrix,
) -> f64 {
    let (lhs, rhs) = gain_system(m, pt1, pt2);
    let k = Matrix::from_blocks(&[vec![Some(k1)], vec![Some(k2)]]).expect("gain shapes");
    (&(&lhs * &k) - &rhs).frobenius_norm() / (1.0 + rhs.frobenius_norm())
}

pub fn closed_loop(m: &GameModel, k1: &Matrix, k2: &Matrix) -> Matrix {
    &(m.a() + &(m.b1() * k1)) + &(m.b2() * k2)
}

fn gains_of(player: Player, k1: &Matrix, k2: &Matrix) -> (Matrix, Matrix) {
    match player {
        Player::One => (k1.clone(), k2.clone()),
        Player::Two => (k2.clone(), k1.clone()),
    }
}

/// The 5x5 block matrix of `player`'s certificate,
///
/// ```text
/// [ Phi - P~   Acl'P~   P~H            K_i'     0     ]
/// [ P~Acl      -P~      0              0        0     ]
/// [ H'P~       0        -H'P~H + T Xi0 0        S0c'T ]
/// [ K_i        0        0              -R_ii^-1 0     ]
/// [ 0          0        T S0c          0        -N    ]
/// ```
///
/// with `Phi = Q_i + K_j'R_ij K_j + Aq'(T R0 + N)Aq`. It is affine in
/// `(P~, tau, nu)`; `with_constant = false` drops the parts that do not
/// depend on them.
pub fn assemble_player_matrix(
    m: &GameModel,
    k1: &Matrix,
    k2: &Matrix,
    player: Player,
    ptilde: &SymmetricMatrix,
    mult: &Multipliers,
    with_constant: bool,
) -> SymmetricMatrix {
    let n = m.state_dim();
    let (np, nq) = (m.p_dim(), m.q_dim());
    let (ki, kj) = gains_of(player, k1, k2);
    let mi = ki.rows();
    let (o2, o3, o4, o5) = (n, 2 * n, 2 * n + np, 2 * n + np + mi);
    let dim = o5 + nq;
    let acl = closed_loop(m, k1, k2);
    let pt = ptilde.to_matrix();
    let h = m.h();
    let aq = m.aq();

    // Multiplier-weighted pieces, block by block.
    let mut r0_w = Matrix::zeros(nq, nq);
    let mut xi_w = Matrix::zeros(np, np);
    let mut s_w = Matrix::zeros(nq, np);
    let (mut pr, mut qr) = (0, 0);
    for (j, b) in m.blocks().iter().enumerate() {
        let (t, v) = (mult.tau[j], mult.nu[j]);
        let mut r = b.r0().to_matrix().scale(t);
        for d in 0..b.q_dim() {
            r[(d, d)] += v;
        }
        r0_w.set_block(qr, qr, &r);
        xi_w.set_block(pr, pr, &b.xi0().to_matrix().scale(t));
        s_w.set_block(qr, pr, &b.coupling().scale(t));
        pr += b.p_dim();
        qr += b.q_dim();
    }

    let mut phi = &(&(&aq.transpose() * &r0_w) * &aq) - &pt;
    if with_constant {
        phi = &phi + &m.q(player).to_matrix();
        phi = &phi + &m.r_cross(player).congruence(&kj).to_matrix();
    }
    let mut full = Matrix::zeros(dim, dim);
    let mut put = |r: usize, c: usize, blk: &Matrix| {
        full.set_block(r, c, blk);
        if r != c {
            full.set_block(c, r, &blk.transpose());
        }
    };
    put(0, 0, &phi);
    put(0, o2, &(&acl.transpose() * &pt));
    put(0, o3, &(&pt * h));
    put(o2, o2, &pt.scale(-1.0));
    put(o3, o3, &(&xi_w - &(&(&h.transpose() * &pt) * h)));
    put(o3, o5, &s_w.transpose());
    let mut nn = Matrix::zeros(nq, nq);
    let mut qr = 0;
    for (j, b) in m.blocks().iter().enumerate() {
        for d in 0..b.q_dim() {
            nn[(qr + d, qr + d)] = -mult.nu[j];
        }
        qr += b.q_dim();
    }
    put(o5, o5, &nn);
    if with_constant {
        put(0, o4, &ki.transpose());
        let rinv = invert_spd(m.r_own(player)).expect("R_ii validated positive definite");
        put(o4, o4, &rinv.to_matrix().scale(-1.0));
    }
    SymmetricMatrix::symmetrize(&full)
}

/// LMI of one player in the variables `[upper(P~), tau_1..tau_s, nu_1..nu_s]`.
#[derive(Debug, Clone)]
pub struct PlayerLmi {
    pub problem: LmiProblem,
    pub player: Player,
    state_dim: usize,
    blocks: usize,
}

impl PlayerLmi {
    fn p_vars(&self) -> usize {
        self.state_dim * (self.state_dim + 1) / 2
    }

    pub fn num_vars(&self) -> usize {
        self.p_vars() + 2 * self.blocks
    }

    pub fn decode(&self, x: &[f64]) -> (SymmetricMatrix, Multipliers) {
        let np = self.p_vars();
        let p = SymmetricMatrix::from_upper(self.state_dim, x[..np].to_vec())
            .expect("packed length matches");
        let s = self.blocks;
        (
            p,
            Multipliers::new(x[np..np + s].to_vec(), x[np + s..np + 2 * s].to_vec()),
        )
    }

    pub fn encode(&self, ptilde: &SymmetricMatrix, mult: &Multipliers) -> Vec<f64> {
        let mut x = ptilde.upper().to_vec();
        x.extend_from_slice(&mult.tau);
        x.extend_from_slice(&mult.nu);
        x
    }
}

/// Builds the certificate LMI (required `<= 0`; the solver's strictness
/// supplies the margin) plus the multiplier inequality, with
/// `tau, nu >= multiplier_floor` and objective `trace(P~)`.
pub fn build_player_lmi(
    m: &GameModel,
    k1: &Matrix,
    k2: &Matrix,
    player: Player,
    multiplier_floor: f64,
) -> Result<PlayerLmi> {
    let n = m.state_dim();
    if k1.shape() != (m.u1_dim(), n) || k2.shape() != (m.u2_dim(), n) {
        return Err(Error::Dimension(format!(
            "gains must be {}x{n} and {}x{n}",
            m.u1_dim(),
            m.u2_dim()
        )));
    }
    let s = m.blocks().len();
    let np = n * (n + 1) / 2;
    let nv = np + 2 * s;
    let zero_mult = Multipliers::uniform(s, 0.0, 0.0);
    let zero_p = SymmetricMatrix::zeros(n);
    let mut main = AffineMatrixFunction::new(assemble_player_matrix(
        m, k1, k2, player, &zero_p, &zero_mult, true,
    ));
    let mut side = AffineMatrixFunction::new(SymmetricMatrix::zeros(m.p_dim()));
    let mut objective = vec![0.0; nv];
    for v in 0..np {
        let mut e = vec![0.0; np];
        e[v] = 1.0;
        let basis = SymmetricMatrix::from_upper(n, e)?;
        objective[v] = basis.trace();
        main.add_term(
            v,
            assemble_player_matrix(m, k1, k2, player, &basis, &zero_mult, false),
        )?;
    }
    for j in 0..s {
        for (offset, is_tau) in [(np, true), (np + s, false)] {
            let mut mult = zero_mult.clone();
            if is_tau {
                mult.tau[j] = 1.0;
            } else {
                mult.nu[j] = 1.0;
            }
            main.add_term(
                offset + j,
                assemble_player_matrix(m, k1, k2, player, &zero_p, &mult, false),
            )?;
            side.add_term(offset + j, multiplier_matrix(m, &mult))?;
        }
    }
    let mut problem = LmiProblem::new(nv);
    problem.add_constraint(main)?;
    problem.add_constraint(side)?;
    for v in np..nv {
        problem.set_lower(v, multiplier_floor);
    }
    problem.set_objective(objective)?;
    Ok(PlayerLmi {
        problem,
        player,
        state_dim: n,
        blocks: s,
    })
}

/// Certificate margin by direct eigenvalue evaluation: the negated largest
/// eigenvalue over the block LMI and the multiplier inequality, or
/// `-inf` if some multiplier is not positive.
pub fn certificate_margin(
    m: &GameModel,
    k1: &Matrix,
    k2: &Matrix,
    player: Player,
    ptilde: &SymmetricMatrix,
    mult: &Multipliers,
) -> Result<f64> {
    mult.check_len(m)?;
    if !mult.all_positive() {
        return Ok(f64::NEG_INFINITY);
    }
    let big = assemble_player_matrix(m, k1, k2, player, ptilde, mult, true);
    let side = multiplier_matrix(m, mult);
    Ok(-max_eigenvalue(&big)?.max(max_eigenvalue(&side)?))
}

/// `P = (P~^-1 - H Xi^-1 H')^-1`.
pub fn recover_p(
    m: &GameModel,
    ptilde: &SymmetricMatrix,
    mult: &Multipliers,
) -> Result<SymmetricMatrix> {
    mult.check_len(m)?;
    if !mult.all_positive() {
        return Err(Error::Certificate("multipliers must be positive".into()));
    }
    let xi = mult.xi(m);
    if !(max_eigenvalue(&xi)? < 0.0) {
        return Err(Error::Certificate(
            "Xi(tau, mu) is not negative definite".into(),
        ));
    }
    let pt_inv =
        invert_spd(ptilde).map_err(|_| Error::Certificate("P~ is not positive definite".into()))?;
    let xi_inv = SymmetricMatrix::symmetrize(&inverse(&xi.to_matrix())?);
    let p_inv = pt_inv.sub(&xi_inv.congruence(&m.h().transpose()));
    let p = invert_spd(&p_inv).map_err(|_| {
        Error::Certificate("implied P^-1 = P~^-1 - H Xi^-1 H' is not positive definite".into())
    })?;
    Ok(p)
}

/// Forward map `P~ = (P^-1 + H Xi^-1 H')^-1`.
pub fn forward_map(
    m: &GameModel,
    p: &SymmetricMatrix,
    mult: &Multipliers,
) -> Result<SymmetricMatrix> {
    let xi_inv = SymmetricMatrix::symmetrize(&inverse(&mult.xi(m).to_matrix())?);
    invert_spd(&invert_spd(p)?.add(&xi_inv.congruence(&m.h().transpose())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisOptions {
    /// Margin every accepted certificate must have.
    pub certificate_margin: f64,
    /// Strictness of the trace-minimising LMI solves; kept above the
    /// certificate margin so re-solving the gains cannot erode it.
    pub solver_strictness: f64,
    pub multiplier_floor: f64,
    /// Relative change of P~ and absolute change of the gains.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping: f64,
    /// Coordinate sweeps over the multipliers after convergence; 0 disables.
    pub refine_sweeps: usize,
    pub nominal_max_iterations: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            certificate_margin: 1e-8,
            solver_strictness: 2e-8,
            multiplier_floor: 1e-8,
            tolerance: 1e-7,
            max_iterations: 200,
            damping: 0.5,
            refine_sweeps: 12,
            nominal_max_iterations: 20_000,
        }
    }
}

impl SynthesisOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.certificate_margin > 0.0
            && self.solver_strictness >= self.certificate_margin
            && self.multiplier_floor > 0.0
            && self.tolerance > 0.0
            && self.max_iterations > 0
            && self.damping > 0.0
            && self.damping < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid synthesis options {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub ptilde_change: f64,
    pub gain_change: f64,
    pub traces: [f64; 2],
    pub margins: [f64; 2],
    pub damped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteedSolution {
    pub model_hash: String,
    pub k1: Matrix,
    pub k2: Matrix,
    pub ptilde: [SymmetricMatrix; 2],
    pub p: [SymmetricMatrix; 2],
    pub multipliers: [Multipliers; 2],
    pub x0: Vec<f64>,
    pub costs: [f64; 2],
    pub margins: [f64; 2],
    pub gain_residual: f64,
    pub closed_loop_spectral_radius: f64,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
}

impl GuaranteedSolution {
    pub fn gain(&self, player: Player) -> &Matrix {
        match player {
            Player::One => &self.k1,
            Player::Two => &self.k2,
        }
    }

    pub fn cost(&self, player: Player, x0: &[f64]) -> f64 {
        guaranteed_cost(self, player, x0)
    }

    pub fn check_model(&self, m: &GameModel) -> Result<()> {
        let h = m.model_hash();
        if h != self.model_hash {
            return Err(Error::StaleSolution(format!(
                "solution was computed for model {} but the current model hashes to {h}",
                self.model_hash
            )));
        }
        Ok(())
    }

    /// Re-derives every certificate quantity from the stored matrices.
    pub fn verify(&self, m: &GameModel, required_margin: f64) -> Result<CertificateReport> {
        self.check_model(m)?;
        let (k1, k2) = solve_gain_equation(m, &self.ptilde[0], &self.ptilde[1])?;
        let gain_change = (&k1 - &self.k1)
            .frobenius_norm()
            .max((&k2 - &self.k2).frobenius_norm());
        let residual =
            gain_equation_residual(m, &self.ptilde[0], &self.ptilde[1], &self.k1, &self.k2);
        let mut margins = [0.0; 2];
        let mut p_consistent = true;
        for player in Player::BOTH {
            let i = player.index();
            margins[i] = certificate_margin(
                m,
                &self.k1,
                &self.k2,
                player,
                &self.ptilde[i],
                &self.multipliers[i],
            )?;
            let p = recover_p(m, &self.ptilde[i], &self.multipliers[i])?;
            let scale = 1.0 + p.frobenius_norm();
            p_consistent &=
                p.sub(&self.p[i]).frobenius_norm() <= 1e-8 * scale && is_positive_definite(&p, 0.0);
        }
        let rho = spectral_radius(&closed_loop(m, &self.k1, &self.k2));
        Ok(CertificateReport {
            margins,
            gain_residual: residual,
            gain_change,
            p_consistent,
            closed_loop_spectral_radius: rho,
            required_margin,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub margins: [f64; 2],
    pub gain_residual: f64,
    pub gain_change: f64,
    pub p_consistent: bool,
    pub closed_loop_spectral_radius: f64,
    pub required_margin: f64,
}

impl CertificateReport {
    pub fn valid(&self) -> bool {
        self.margins.iter().all(|&g| g >= self.required_margin)
            && self.gain_residual <= 1e-8
            && self.gain_change <= 1e-8
            && self.p_consistent
            && self.closed_loop_spectral_radius < 1.0
    }
}

pub fn guaranteed_cost(sol: &GuaranteedSolution, player: Player, x0: &[f64]) -> f64 {
    sol.p[player.index()].quadratic_form(x0)
}

/// Coupled value iteration without uncertainty, used as the starting point.
pub fn nominal_value_iteration(
    m: &GameModel,
    max_iterations: usize,
) -> Result<[SymmetricMatrix; 2]> {
    let n = m.state_dim();
    let mut pt = [SymmetricMatrix::identity(n), SymmetricMatrix::identity(n)];
    for _ in 0..max_iterations {
        let (k1, k2) = solve_gain_equation(m, &pt[0], &pt[1])?;
        let acl = closed_loop(m, &k1, &k2);
        let mut next = [SymmetricMatrix::zeros(n), SymmetricMatrix::zeros(n)];
        let mut change: f64 = 0.0;
        for player in Player::BOTH {
            let i = player.index();
            let (ki, kj) = gains_of(player, &k1, &k2);
            let mut v = pt[i].congruence(&acl).add(m.q(player));
            v.axpy(1.0, &m.r_own(player).congruence(&ki));
            v.axpy(1.0, &m.r_cross(player).congruence(&kj));
            if !v.to_matrix().is_finite() {
                return Err(Error::NotConverged {
                    what: "nominal value iteration",
                    iterations: max_iterations,
                });
            }
            change = change.max(v.sub(&pt[i]).frobenius_norm() / (1.0 + v.frobenius_norm()));
            next[i] = v;
        }
        pt = next;
        if change < 1e-13 {
            return Ok(pt);
        }
    }
    Err(Error::NotConverged {
        what: "nominal value iteration",
        iterations: max_iterations,
    })
}

fn solve_player(
    m: &GameModel,
    k1: &Matrix,
    k2: &Matrix,
    player: Player,
    opts: &SynthesisOptions,
) -> Result<(SymmetricMatrix, Multipliers, f64)> {
    let lmi = build_player_lmi(m, k1, k2, player, opts.multiplier_floor)?;
    let solver = SolverOptions {
        strictness: opts.solver_strictness,
        ..SolverOptions::default()
    };
    let sol = minimize_linear_with(&lmi.problem, &solver)?;
    if !sol.is_feasible() {
        return Err(Error::Synthesis(format!(
            "certificate LMI of {player} is infeasible at the current gains \
             (best margin {:.3e}, status {:?})",
            sol.margin, sol.status
        )));
    }
    let (p, mult) = lmi.decode(&sol.values);
    Ok((p, mult, sol.margin))
}

/// Runs the gain / certificate fixed point, then refines the multipliers
/// for the lowest guaranteed costs at `x0`.
pub fn synthesize(
    m: &GameModel,
    x0: &[f64],
    opts: &SynthesisOptions,
) -> Result<GuaranteedSolution> {
    opts.validate()?;
    if x0.len() != m.state_dim() {
        return Err(Error::Dimension(format!(
            "x0 has {} entries, state has {}",
            x0.len(),
            m.state_dim()
        )));
    }
    crate::game::check_assumption1(m).into_result()?;
    crate::game::check_assumption2(m).into_result()?;

    let mut pt = nominal_value_iteration(m, opts.nominal_max_iterations)?;
    let (mut k1, mut k2) = solve_gain_equation(m, &pt[0], &pt[1])?;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut damped = false;
    let mut rises = 0;
    let mut prev_change = f64::INFINITY;

    for it in 1..=opts.max_iterations {
        let s1 = solve_player(m, &k1, &k2, Player::One, opts)?;
        let s2 = solve_player(m, &k1, &k2, Player::Two, opts)?;
        let fresh = [s1.0.clone(), s2.0.clone()];
        let change = (0..2)
            .map(|i| fresh[i].sub(&pt[i]).frobenius_norm() / fresh[i].frobenius_norm())
            .fold(0.0, f64::max);
        if change > prev_change {
            rises += 1;
            if rises >= 2 {
                damped = true;
            }
        }
        prev_change = change;
        pt = if damped {
            [
                pt[0]
                    .scale(1.0 - opts.damping)
                    .add(&fresh[0].scale(opts.damping)),
                pt[1]
                    .scale(1.0 - opts.damping)
                    .add(&fresh[1].scale(opts.damping)),
            ]
        } else {
            fresh.clone()
        };
        let (n1, n2) = solve_gain_equation(m, &pt[0], &pt[1])?;
        let gain_change = (&n1 - &k1).max_abs().max((&n2 - &k2).max_abs());
        history.push(IterationRecord {
            iteration: it,
            ptilde_change: change,
            gain_change,
            traces: [fresh[0].trace(), fresh[1].trace()],
            margins: [s1.2, s2.2],
            damped,
        });
        k1 = n1;
        k2 = n2;
        if change > opts.tolerance || gain_change > opts.tolerance {
            continue;
        }
        // Certify the undamped LMI solutions at the gains they imply.
        let (f1, f2) = solve_gain_equation(m, &fresh[0], &fresh[1])?;
        let mults = [s1.1, s2.1];
        let margins = [
            certificate_margin(m, &f1, &f2, Player::One, &fresh[0], &mults[0])?,
            certificate_margin(m, &f1, &f2, Player::Two, &fresh[1], &mults[1])?,
        ];
        if margins.iter().all(|&g| g >= opts.certificate_margin) {
            return finish(m, x0, opts, f1, f2, fresh, mults, it, history);
        }
    }
    let tail: Vec<String> = history
        .iter()
        .rev()
        .take(5)
        .map(|r| {
            format!(
                "#{}: dP~ {:.2e}, dK {:.2e}, margins [{:.2e}, {:.2e}]{}",
                r.iteration,
                r.ptilde_change,
                r.gain_change,
                r.margins[0],
                r.margins[1],
                if r.damped { " (damped)" } else { "" }
            )
        })
        .collect();
    Err(Error::Synthesis(format!(
        "fixed point not reached after {} iterations; last iterates: {}; last gains K1 = {:?}, K2 = {:?}",
        opts.max_iterations,
        tail.join("; "),
        k1.as_slice(),
        k2.as_slice()
    )))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    m: &GameModel,
    x0: &[f64],
    opts: &SynthesisOptions,
    k1: Matrix,
    k2: Matrix,
    ptilde: [SymmetricMatrix; 2],
    mut mults: [Multipliers; 2],
    iterations: usize,
    history: Vec<IterationRecord>,
) -> Result<GuaranteedSolution> {
    let rho = spectral_radius(&closed_loop(m, &k1, &k2));
    if !(rho < 1.0) {
        return Err(Error::Synthesis(format!(
            "closed loop is not stable (spectral radius {rho:.6})"
        )));
    }
    let mut p = [SymmetricMatrix::zeros(0), SymmetricMatrix::zeros(0)];
    let mut margins = [0.0; 2];
    for player in Player::BOTH {
        let i = player.index();
        if opts.refine_sweeps > 0 && x0.iter().any(|&v| v != 0.0) {
            mults[i] = refine_multipliers(m, &k1, &k2, player, &ptilde[i], &mults[i], x0, opts)?;
        }
        margins[i] = certificate_margin(m, &k1, &k2, player, &ptilde[i], &mults[i])?;
        p[i] = recover_p(m, &ptilde[i], &mults[i])?;
        if !is_positive_definite(&p[i], 0.0) {
            return Err(Error::Certificate(format!(
                "recovered P of {player} is not positive definite"
            )));
        }
    }
    let gain_residual = gain_equation_residual(m, &ptilde[0], &ptilde[1], &k1, &k2);
    let costs = [p[0].quadratic_form(x0), p[1].quadratic_form(x0)];
    Ok(GuaranteedSolution {
        model_hash: m.model_hash(),
        k1,
        k2,
        ptilde,
        p,
        multipliers: mults,
        x0: x0.to_vec(),
        costs,
        margins,
        gain_residual,
        closed_loop_spectral_radius: rho,
        iterations,
        history,
    })
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Coordinate descent on `log tau_j, log nu_j` minimising `x0'P x0` with
/// `P~` and the gains held fixed; every accepted point keeps the margin.
#[allow(clippy::too_many_arguments)]
fn refine_multipliers(
    m: &GameModel,
    k1: &Matrix,
    k2: &Matrix,
    player: Player,
    ptilde: &SymmetricMatrix,
    start: &Multipliers,
    x0: &[f64],
    opts: &SynthesisOptions,
) -> Result<Multipliers> {
    // Headroom over the certificate margin keeps reloaded solutions valid.
    let need = 1.5 * opts.certificate_margin;
    let floor = opts.multiplier_floor.ln();
    let s = start.tau.len();
    let to_mult = |theta: &[f64]| {
        Multipliers::new(
            theta[..s].iter().map(|v| v.exp()).collect(),
            theta[s..].iter().map(|v| v.exp()).collect(),
        )
    };
    let feasible = |theta: &[f64]| -> bool {
        theta.iter().all(|&v| v >= floor)
            && certificate_margin(m, k1, k2, player, ptilde, &to_mult(theta))
                .is_ok_and(|g| g >= need)
    };
    let value = |theta: &[f64]| -> f64 {
        if !feasible(theta) {
            return f64::INFINITY;
        }
        recover_p(m, ptilde, &to_mult(theta))
            .map(|p| p.quadratic_form(x0))
            .unwrap_or(f64::INFINITY)
    };

    let mut theta: Vec<f64> = start.tau.iter().chain(&start.nu).map(|v| v.ln()).collect();
    let mut best = value(&theta);
    if !best.is_finite() {
        // The solver point sits right at the strictness level; keep it.
        return Ok(start.clone());
    }
    for _ in 0..opts.refine_sweeps {
        let before = best;
        for c in 0..theta.len() {
            let probe = |v: f64| {
                let mut t = theta.clone();
                t[c] = v;
                t
            };
            let edge = |dir: f64| -> f64 {
                let (mut good, mut step) = (theta[c], 1e-3);
                let mut bad = None;
                while step < 64.0 {
                    let v = theta[c] + dir * step;
                    if feasible(&probe(v)) {
                        good = v;
                        step *= 2.0;
                    } else {
                        bad = Some(v);
                        break;
                    }
                }
                let Some(mut bad) = bad else { return good };
                for _ in 0..60 {
                    let mid = 0.5 * (good + bad);
                    if feasible(&probe(mid)) {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                good
            };
            let (mut lo, mut hi) = (edge(-1.0), edge(1.0));
            if hi - lo < 1e-12 {
                continue;
            }
            let f = |v: f64| value(&probe(v));
            let mut a = hi - GOLDEN * (hi - lo);
            let mut b = lo + GOLDEN * (hi - lo);
            let (mut fa, mut fb) = (f(a), f(b));
            for _ in 0..80 {
                if fa <= fb {
                    hi = b;
                    b = a;
                    fb = fa;
                    a = hi - GOLDEN * (hi - lo);
                    fa = f(a);
                } else {
                    lo = a;
                    a = b;
                    fa = fb;
                    b = lo + GOLDEN * (hi - lo);
                    fb = f(b);
                }
                if hi - lo < 1e-10 {
                    break;
                }
            }
            for (v, fv) in [(a, fa), (b, fb), (lo, f(lo)), (hi, f(hi))] {
                if fv < best {
                    best = fv;
                    theta[c] = v;
                }
            }
        }
        if before - best <= 1e-12 * before {
            break;
        }
    }
    Ok(to_mult(&theta))
}
