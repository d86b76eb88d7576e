//! The canonical uncertain two-player LQ game
//!
//! ```text
//! x+ = A x + B1 u1 + B2 u2 + H p
//! q  = Aq x + G p
//! J_i = sum x'Q_i x + u1'R_i1 u1 + u2'R_i2 u2
//! ```
//!
//! where the uncertainty `p` and the output `q` are only known to lie in a
//! product of quadratic sets `Omega_j = {[p_j; q_j]' [Q0 S0; S0' R0] [p_j; q_j] >= 0}`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, numerical_rank, sym_eigendecompose, Matrix, SymmetricMatrix};

/// Eigenvalues with modulus above this count as on or outside the unit circle.
pub const UNIT_CIRCLE_TOL: f64 = 1e-9;
/// Relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-9;
/// Eigenvalues of Q1+Q2 below this are dropped from the detectability factor.
pub const FACTOR_DROP_TOL: f64 = 1e-12;

/// One quadratic constraint set and the rows of `Aq`/`G` it binds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlockRepr", into = "BlockRepr")]
pub struct UncertaintyBlock {
    q0: SymmetricMatrix,
    s0: Matrix,
    r0: SymmetricMatrix,
    aq: Matrix,
    g: Matrix,
}

#[derive(Serialize, Deserialize)]
struct BlockRepr {
    q0: SymmetricMatrix,
    s0: Matrix,
    r0: SymmetricMatrix,
    aq: Matrix,
    g: Matrix,
}

impl TryFrom<BlockRepr> for UncertaintyBlock {
    type Error = Error;

    fn try_from(r: BlockRepr) -> Result<Self> {
        UncertaintyBlock::new(r.q0, r.s0, r.r0, r.aq, r.g)
    }
}

impl From<UncertaintyBlock> for BlockRepr {
    fn from(b: UncertaintyBlock) -> Self {
        BlockRepr {
            q0: b.q0,
            s0: b.s0,
            r0: b.r0,
            aq: b.aq,
            g: b.g,
        }
    }
}

impl UncertaintyBlock {
    pub fn new(
        q0: SymmetricMatrix,
        s0: Matrix,
        r0: SymmetricMatrix,
        aq: Matrix,
        g: Matrix,
    ) -> Result<Self> {
        let (np, nq) = (q0.dim(), r0.dim());
        if np == 0 || nq == 0 {
            return Err(Error::Dimension(
                "uncertainty block with empty p or q".into(),
            ));
        }
        if s0.shape() != (np, nq) {
            return Err(Error::Dimension(format!(
                "S0 must be {np}x{nq}, got {}x{}",
                s0.rows(),
                s0.cols()
            )));
        }
        if aq.rows() != nq {
            return Err(Error::Dimension(format!(
                "Aq block must have {nq} rows, got {}",
                aq.rows()
            )));
        }
        if g.shape() != (nq, np) {
            return Err(Error::Dimension(format!(
                "G block must be {nq}x{np}, got {}x{}",
                g.rows(),
                g.cols()
            )));
        }
        Ok(UncertaintyBlock { q0, s0, r0, aq, g })
    }

    /// Scalar block (`n_p = n_q = 1`).
    pub fn scalar(q0: f64, s0: f64, r0: f64, aq_row: &[f64], g: f64) -> Self {
        UncertaintyBlock::new(
            SymmetricMatrix::scalar(q0),
            Matrix::scalar(s0),
            SymmetricMatrix::scalar(r0),
            Matrix::row(aq_row),
            Matrix::scalar(g),
        )
        .expect("scalar block dimensions are consistent")
    }

    pub fn p_dim(&self) -> usize {
        self.q0.dim()
    }

    pub fn q_dim(&self) -> usize {
        self.r0.dim()
    }

    pub fn q0(&self) -> &SymmetricMatrix {
        &self.q0
    }

    pub fn s0(&self) -> &Matrix {
        &self.s0
    }

    pub fn r0(&self) -> &SymmetricMatrix {
        &self.r0
    }

    pub fn aq(&self) -> &Matrix {
        &self.aq
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }

    /// The full constraint matrix `[Q0 S0; S0' R0]`.
    pub fn constraint_matrix(&self) -> SymmetricMatrix {
        let m = Matrix::from_blocks(&[
            vec![Some(&self.q0.to_matrix()), Some(&self.s0)],
            vec![Some(&self.s0.transpose()), Some(&self.r0.to_matrix())],
        ])
        .expect("block shapes checked at construction");
        SymmetricMatrix::symmetrize(&m)
    }

    /// `Q0 + G'S0' + S0 G + G'R0 G`.
    pub fn xi0(&self) -> SymmetricMatrix {
        let sg = &self.s0 * &self.g;
        let mut out = self.q0.add(&SymmetricMatrix::symmetrize(&sg).scale(2.0));
        out.axpy(1.0, &self.r0.congruence(&self.g));
        out
    }

    /// `S0' + R0 G`, the cross term between p and Aq x.
    pub fn coupling(&self) -> Matrix {
        &self.s0.transpose() + &(&self.r0.to_matrix() * &self.g)
    }
}

/// Membership of `(p, q)` in the block's quadratic set, with a 1e-12 slack.
pub fn omega_membership(block: &UncertaintyBlock, p: &[f64], q: &[f64]) -> bool {
    assert_eq!(p.len(), block.p_dim(), "p dimension");
    assert_eq!(q.len(), block.q_dim(), "q dimension");
    let mut v = p.to_vec();
    v.extend_from_slice(q);
    block.constraint_matrix().quadratic_form(&v) >= -1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameRepr", into = "GameRepr")]
pub struct GameModel {
    a: Matrix,
    b1: Matrix,
    b2: Matrix,
    h: Matrix,
    blocks: Vec<UncertaintyBlock>,
    q1: SymmetricMatrix,
    q2: SymmetricMatrix,
    r11: SymmetricMatrix,
    r22: SymmetricMatrix,
    r12: SymmetricMatrix,
    r21: SymmetricMatrix,
}

/// JSON layout of a game. Every matrix is `{rows, cols, data}` with
/// row-major `data`. `r12` weighs player 2's input in player 1's cost and
/// `r21` player 1's input in player 2's cost.
#[derive(Serialize, Deserialize)]
struct GameRepr {
    a: Matrix,
    b1: Matrix,
    b2: Matrix,
    h: Matrix,
    blocks: Vec<UncertaintyBlock>,
    q1: SymmetricMatrix,
    q2: SymmetricMatrix,
    r11: SymmetricMatrix,
    r22: SymmetricMatrix,
    r12: SymmetricMatrix,
    r21: SymmetricMatrix,
}

impl TryFrom<GameRepr> for GameModel {
    type Error = Error;

    fn try_from(r: GameRepr) -> Result<Self> {
        GameModel::builder(r.a, r.b1, r.b2, r.h)
            .blocks(r.blocks)
            .costs(r.q1, r.q2)
            .input_weights(r.r11, r.r22)
            .cross_weights(r.r12, r.r21)
            .build()
    }
}

impl From<GameModel> for GameRepr {
    fn from(g: GameModel) -> Self {
        GameRepr {
            a: g.a,
            b1: g.b1,
            b2: g.b2,
            h: g.h,
            blocks: g.blocks,
            q1: g.q1,
            q2: g.q2,
            r11: g.r11,
            r22: g.r22,
            r12: g.r12,
            r21: g.r21,
        }
    }
}

pub struct GameModelBuilder {
    a: Matrix,
    b1: Matrix,
    b2: Matrix,
    h: Matrix,
    blocks: Vec<UncertaintyBlock>,
    q: Option<(SymmetricMatrix, SymmetricMatrix)>,
    r: Option<(SymmetricMatrix, SymmetricMatrix)>,
    cross: Option<(SymmetricMatrix, SymmetricMatrix)>,
}

impl GameModelBuilder {
    pub fn blocks(mut self, blocks: Vec<UncertaintyBlock>) -> Self {
        self.blocks = blocks;
        self
    }

    pub fn costs(mut self, q1: SymmetricMatrix, q2: SymmetricMatrix) -> Self {
        self.q = Some((q1, q2));
        self
    }

    pub fn input_weights(mut self, r11: SymmetricMatrix, r22: SymmetricMatrix) -> Self {
        self.r = Some((r11, r22));
        self
    }

    /// Defaults to zero when not given.
    pub fn cross_weights(mut self, r12: SymmetricMatrix, r21: SymmetricMatrix) -> Self {
        self.cross = Some((r12, r21));
        self
    }

    pub fn build(self) -> Result<GameModel> {
        let (m1, m2) = (self.b1.cols(), self.b2.cols());
        let (q1, q2) = self
            .q
            .ok_or_else(|| Error::Dimension("state cost matrices missing".into()))?;
        let (r11, r22) = self
            .r
            .ok_or_else(|| Error::Dimension("input weights missing".into()))?;
        let (r12, r21) = self
            .cross
            .unwrap_or_else(|| (SymmetricMatrix::zeros(m2), SymmetricMatrix::zeros(m1)));
        let model = GameModel {
            a: self.a,
            b1: self.b1,
            b2: self.b2,
            h: self.h,
            blocks: self.blocks,
            q1,
            q2,
            r11,
            r22,
            r12,
            r21,
        };
        model.validate()?;
        Ok(model)
    }
}

fn min_eig(m: &SymmetricMatrix) -> Result<f64> {
    Ok(sym_eigendecompose(m)?
        .values
        .first()
        .copied()
        .unwrap_or(f64::INFINITY))
}

impl GameModel {
    pub fn builder(a: Matrix, b1: Matrix, b2: Matrix, h: Matrix) -> GameModelBuilder {
        GameModelBuilder {
            a,
            b1,
            b2,
            h,
            blocks: Vec::new(),
            q: None,
            r: None,
            cross: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.a.rows();
        let dim = |what: &str, got: (usize, usize), want: (usize, usize)| -> Result<()> {
            if got != want {
                return Err(Error::Dimension(format!(
                    "{what} must be {}x{}, got {}x{}",
                    want.0, want.1, got.0, got.1
                )));
            }
            Ok(())
        };
        dim("A", self.a.shape(), (n, n))?;
        if n == 0 {
            return Err(Error::Dimension("empty state".into()));
        }
        let (m1, m2) = (self.b1.cols(), self.b2.cols());
        dim("B1", self.b1.shape(), (n, m1))?;
        dim("B2", self.b2.shape(), (n, m2))?;
        if m1 == 0 || m2 == 0 {
            return Err(Error::Dimension(
                "each player needs at least one input".into(),
            ));
        }
        if self.blocks.is_empty() {
            return Err(Error::Dimension(
                "at least one uncertainty block is required".into(),
            ));
        }
        dim("H", self.h.shape(), (n, self.p_dim()))?;
        for (j, b) in self.blocks.iter().enumerate() {
            if b.aq.cols() != n {
                return Err(Error::Dimension(format!(
                    "Aq of block {j} has {} columns, state has {n}",
                    b.aq.cols()
                )));
            }
        }
        dim("Q1", (self.q1.dim(), self.q1.dim()), (n, n))?;
        dim("Q2", (self.q2.dim(), self.q2.dim()), (n, n))?;
        dim("R11", (self.r11.dim(), self.r11.dim()), (m1, m1))?;
        dim("R22", (self.r22.dim(), self.r22.dim()), (m2, m2))?;
        dim("R12", (self.r12.dim(), self.r12.dim()), (m2, m2))?;
        dim("R21", (self.r21.dim(), self.r21.dim()), (m1, m1))?;
        let psd = |name: &str, m: &SymmetricMatrix| -> Result<()> {
            let l = min_eig(m)?;
            if l < -1e-12 * (1.0 + m.frobenius_norm()) {
                return Err(Error::Assumption(format!(
                    "{name} must be positive semidefinite (min eigenvalue {l:.3e})"
                )));
            }
            Ok(())
        };
        psd("Q1", &self.q1)?;
        psd("Q2", &self.q2)?;
        psd("R12", &self.r12)?;
        psd("R21", &self.r21)?;
        for (name, r) in [("R11", &self.r11), ("R22", &self.r22)] {
            let l = min_eig(r)?;
            if !(l > 0.0) {
                return Err(Error::Assumption(format!(
                    "{name} must be positive definite (min eigenvalue {l:.3e})"
                )));
            }
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn u1_dim(&self) -> usize {
        self.b1.cols()
    }

    pub fn u2_dim(&self) -> usize {
        self.b2.cols()
    }

    pub fn input_dim(&self, player: Player) -> usize {
        match player {
            Player::One => self.u1_dim(),
            Player::Two => self.u2_dim(),
        }
    }

    pub fn p_dim(&self) -> usize {
        self.blocks.iter().map(UncertaintyBlock::p_dim).sum()
    }

    pub fn q_dim(&self) -> usize {
        self.blocks.iter().map(UncertaintyBlock::q_dim).sum()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b1(&self) -> &Matrix {
        &self.b1
    }

    pub fn b2(&self) -> &Matrix {
        &self.b2
    }

    pub fn b(&self, player: Player) -> &Matrix {
        match player {
            Player::One => &self.b1,
            Player::Two => &self.b2,
        }
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn blocks(&self) -> &[UncertaintyBlock] {
        &self.blocks
    }

    pub fn q(&self, player: Player) -> &SymmetricMatrix {
        match player {
            Player::One => &self.q1,
            Player::Two => &self.q2,
        }
    }

    /// R_ii.
    pub fn r_own(&self, player: Player) -> &SymmetricMatrix {
        match player {
            Player::One => &self.r11,
            Player::Two => &self.r22,
        }
    }

    /// R_ij with j the other player: weight of the opponent's input.
    pub fn r_cross(&self, player: Player) -> &SymmetricMatrix {
        match player {
            Player::One => &self.r12,
            Player::Two => &self.r21,
        }
    }

    /// Stacked Aq (rows of all blocks).
    pub fn aq(&self) -> Matrix {
        let mut out = Matrix::zeros(self.q_dim(), self.state_dim());
        let mut r0 = 0;
        for b in &self.blocks {
            out.set_block(r0, 0, &b.aq);
            r0 += b.q_dim();
        }
        out
    }

    pub fn g(&self) -> Matrix {
        Matrix::block_diag(&self.blocks.iter().map(|b| &b.g).collect::<Vec<_>>())
    }

    pub fn q0(&self) -> SymmetricMatrix {
        block_diag_sym(self.blocks.iter().map(|b| b.q0.clone()))
    }

    pub fn s0(&self) -> Matrix {
        Matrix::block_diag(&self.blocks.iter().map(|b| &b.s0).collect::<Vec<_>>())
    }

    pub fn r0(&self) -> SymmetricMatrix {
        block_diag_sym(self.blocks.iter().map(|b| b.r0.clone()))
    }

    /// `S0' + R0 G` over all blocks (q_dim x p_dim).
    pub fn coupling(&self) -> Matrix {
        let c: Vec<Matrix> = self.blocks.iter().map(UncertaintyBlock::coupling).collect();
        Matrix::block_diag(&c.iter().collect::<Vec<_>>())
    }

    /// Output `q = Aq x + G p`.
    pub fn uncertain_output(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        let aqx = self.aq().mul_vec(x);
        let gp = self.g().mul_vec(p);
        aqx.iter().zip(&gp).map(|(a, b)| a + b).collect()
    }

    /// Nominal-plus-uncertainty step `A x + B1 u1 + B2 u2 + H p`.
    pub fn step(&self, x: &[f64], u1: &[f64], u2: &[f64], p: &[f64]) -> Vec<f64> {
        let terms = [
            self.a.mul_vec(x),
            self.b1.mul_vec(u1),
            self.b2.mul_vec(u2),
            self.h.mul_vec(p),
        ];
        (0..self.state_dim())
            .map(|i| terms.iter().map(|t| t[i]).sum())
            .collect()
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn model_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("model serialises");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn block_diag_sym(blocks: impl Iterator<Item = SymmetricMatrix>) -> SymmetricMatrix {
    let mats: Vec<Matrix> = blocks.map(|b| b.to_matrix()).collect();
    SymmetricMatrix::symmetrize(&Matrix::block_diag(&mats.iter().collect::<Vec<_>>()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Player> {
        match i {
            1 => Some(Player::One),
            2 => Some(Player::Two),
            _ => None,
        }
    }
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Player::One => write!(f, "player 1"),
            Player::Two => write!(f, "player 2"),
        }
    }
}

/// Block-diagonal `Q0 + G'S0' + S0 G + G'R0 G`.
pub fn xi0(m: &GameModel) -> SymmetricMatrix {
    block_diag_sym(m.blocks.iter().map(UncertaintyBlock::xi0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionFailure {
    pub check: String,
    pub block: Option<usize>,
    pub value: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub failures: Vec<AssumptionFailure>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(Error::Assumption(self.to_string()))
        }
    }
}

impl std::fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            return write!(f, "all checks passed");
        }
        let parts: Vec<&str> = self.failures.iter().map(|x| x.detail.as_str()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// `R0 >= 0` for every block and `Xi0 < 0`.
pub fn check_assumption1(m: &GameModel) -> AssumptionReport {
    let mut report = AssumptionReport::default();
    for (j, b) in m.blocks.iter().enumerate() {
        match min_eig(&b.r0) {
            Ok(l) if l >= -1e-12 => {}
            Ok(l) => report.failures.push(AssumptionFailure {
                check: "R0 positive semidefinite".into(),
                block: Some(j),
                value: Some(l),
                detail: format!("R0 of block {} has eigenvalue {l:.6}", j + 1),
            }),
            Err(e) => report.failures.push(AssumptionFailure {
                check: "R0 positive semidefinite".into(),
                block: Some(j),
                value: None,
                detail: e.to_string(),
            }),
        }
        match sym_eigendecompose(&b.xi0()) {
            Ok(e) => {
                let lmax = *e.values.last().expect("non-empty block");
                if !(lmax < 0.0) {
                    report.failures.push(AssumptionFailure {
                        check: "Xi0 negative definite".into(),
                        block: Some(j),
                        value: Some(lmax),
                        detail: format!("Xi0 of block {} has eigenvalue {lmax:.6}", j + 1),
                    });
                }
            }
            Err(e) => report.failures.push(AssumptionFailure {
                check: "Xi0 negative definite".into(),
                block: Some(j),
                value: None,
                detail: e.to_string(),
            }),
        }
    }
    report
}

/// Real embedding `[[Re, -Im], [Im, Re]]` of a complex matrix.
fn realify(re: &Matrix, im: &Matrix) -> Matrix {
    Matrix::from_blocks(&[
        vec![Some(re), Some(&im.scale(-1.0))],
        vec![Some(im), Some(re)],
    ])
    .expect("same-shaped parts")
}

/// PBH test: is `[A - lambda I, B]` of full row rank for every eigenvalue
/// with |lambda| >= 1? Returns the offending eigenvalue otherwise.
fn pbh_stabilizable(a: &Matrix, b: &Matrix) -> Result<Option<(f64, f64)>> {
    let n = a.rows();
    for ev in eigenvalues(a)? {
        if ev.modulus() < 1.0 - UNIT_CIRCLE_TOL {
            continue;
        }
        let re_part = Matrix::from_blocks(&[vec![
            Some(&(a - &Matrix::identity(n).scale(ev.re))),
            Some(b),
        ]])?;
        let mut im_part = Matrix::zeros(n, n + b.cols());
        im_part.set_block(0, 0, &Matrix::identity(n).scale(-ev.im));
        let r = numerical_rank(&realify(&re_part, &im_part), RANK_TOL);
        if r < 2 * n {
            return Ok(Some((ev.re, ev.im)));
        }
    }
    Ok(None)
}

/// Detectability factor: C with C'C = Q, from the eigendecomposition.
pub fn psd_factor(q: &SymmetricMatrix) -> Result<Matrix> {
    let e = sym_eigendecompose(q)?;
    let n = q.dim();
    let keep: Vec<usize> = (0..n).filter(|&k| e.values[k] > FACTOR_DROP_TOL).collect();
    let mut c = Matrix::zeros(keep.len(), n);
    for (r, &k) in keep.iter().enumerate() {
        let s = e.values[k].sqrt();
        for j in 0..n {
            c[(r, j)] = s * e.vectors[(j, k)];
        }
    }
    Ok(c)
}

/// Stabilizability of (A, [B1 B2]) and detectability of (A, Q1 + Q2).
pub fn check_assumption2(m: &GameModel) -> AssumptionReport {
    let mut report = AssumptionReport::default();
    let b = Matrix::from_blocks(&[vec![Some(&m.b1), Some(&m.b2)]]).expect("B1, B2 share rows");
    match pbh_stabilizable(&m.a, &b) {
        Ok(None) => {}
        Ok(Some((re, im))) => report.failures.push(AssumptionFailure {
            check: "stabilizability".into(),
            block: None,
            value: Some(re.hypot(im)),
            detail: format!(
                "(A, [B1 B2]) is not stabilizable: mode {re:.6}{im:+.6}i is uncontrollable"
            ),
        }),
        Err(e) => report.failures.push(AssumptionFailure {
            check: "stabilizability".into(),
            block: None,
            value: None,
            detail: e.to_string(),
        }),
    }
    // Detectability of (A, C) is stabilizability of (A', C').
    let detect = psd_factor(&m.q1.add(&m.q2))
        .and_then(|c| pbh_stabilizable(&m.a.transpose(), &c.transpose()));
    match detect {
        Ok(None) => {}
        Ok(Some((re, im))) => report.failures.push(AssumptionFailure {
            check: "detectability".into(),
            block: None,
            value: Some(re.hypot(im)),
            detail: format!(
                "(A, Q1 + Q2) is not detectable: mode {re:.6}{im:+.6}i is unobservable"
            ),
        }),
        Err(e) => report.failures.push(AssumptionFailure {
            check: "detectability".into(),
            block: None,
            value: None,
            detail: e.to_string(),
        }),
    }
    report
}
