//! Fiscal-monetary interaction model.
//!
//! State `x = [z, pi~]` (relative GDP deviation from the target path and
//! inflation deviation from target), fiscal control `g` (budget balance
//! deviation per target GDP) and monetary control `i~` (interest rate
//! deviation). All quantities are fractions, e.g. 0.04 for 4 %.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{check_assumption1, check_assumption2, GameModel, UncertaintyBlock};
use crate::linalg::{Matrix, SymmetricMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacroParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub delta: [f64; 4],
    pub pi_star: f64,
    pub i_star: f64,
}

impl Default for MacroParams {
    /// Estimated Hungarian coefficients with a 3 % inflation target.
    fn default() -> Self {
        MacroParams {
            alpha1: 0.16,
            alpha2: 0.19,
            beta1: 0.699,
            beta2: 0.433,
            gamma1: 0.2,
            gamma2: 0.075,
            rho1: 0.2,
            rho2: 0.01,
            delta: [0.0, 0.1, 0.15, 0.15],
            pi_star: 0.03,
            i_star: 0.03,
        }
    }
}

impl MacroParams {
    pub fn validate(&self) -> Result<()> {
        // signs of the dynamic coefficients are left free; the design
        // assumptions decide whether a parameter set is usable
        for (name, v) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        for (name, v, strict) in [
            ("gamma1", self.gamma1, false),
            ("rho1", self.rho1, false),
            ("gamma2", self.gamma2, true),
            ("rho2", self.rho2, true),
        ] {
            let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
            if !ok {
                let need = if strict { "positive" } else { "nonnegative" };
                return Err(Error::Config(format!(
                    "{name} must be {need} and finite, got {v}"
                )));
            }
        }
        if self.delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::Config("delta coefficients must be finite".into()));
        }
        if self.pi_star != self.i_star || !self.pi_star.is_finite() {
            return Err(Error::Config(format!(
                "the model assumes pi_star = i_star, got {} and {}",
                self.pi_star, self.i_star
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroState {
    pub z: f64,
    pub pi_tilde: f64,
}

impl MacroState {
    pub fn new(z: f64, pi_tilde: f64) -> Self {
        MacroState { z, pi_tilde }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.z, self.pi_tilde]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        MacroState {
            z: x[0],
            pi_tilde: x[1],
        }
    }
}

/// Canonical game for the fiscal (player 1) and monetary (player 2)
/// authorities. Fails with the assumption report if the parameters break
/// the design assumptions.
pub fn build_canonical(p: &MacroParams) -> Result<GameModel> {
    build_unchecked(p).and_then(|m| {
        check_assumption1(&m).into_result()?;
        check_assumption2(&m).into_result()?;
        Ok(m)
    })
}

/// As `build_canonical` without the assumption checks.
pub fn build_unchecked(p: &MacroParams) -> Result<GameModel> {
    p.validate()?;
    let [d1, d2, d3, d4] = p.delta;
    let a = Matrix::from_rows(&[&[0.0, p.alpha1], &[p.beta1, 1.0]]);
    let h = Matrix::from_rows(&[&[0.0, p.alpha1], &[p.beta1, 1.0]]);
    GameModel::builder(
        a,
        Matrix::column(&[-p.alpha2, 0.0]),
        Matrix::column(&[-p.alpha1, p.beta2]),
        h,
    )
    .blocks(vec![
        UncertaintyBlock::scalar(-1.0, 1.0, 1.0, &[d1, d2], -1.0),
        UncertaintyBlock::scalar(0.0, 1.0, 0.0, &[d3, d4], -1.0),
    ])
    .costs(
        SymmetricMatrix::diag(&[p.gamma1, 0.0]),
        SymmetricMatrix::diag(&[0.0, p.rho1]),
    )
    .input_weights(
        SymmetricMatrix::scalar(p.gamma2),
        SymmetricMatrix::scalar(p.rho2),
    )
    .build()
}

/// One period of the state-space dynamics.
pub fn step_dynamics(
    p: &MacroParams,
    s: MacroState,
    g: f64,
    i_tilde: f64,
    p1: f64,
    p2: f64,
) -> MacroState {
    MacroState {
        z: p.alpha1 * s.pi_tilde - p.alpha1 * i_tilde - p.alpha2 * g + p.alpha1 * p2,
        pi_tilde: p.beta1 * s.z + s.pi_tilde + p.beta2 * i_tilde + p.beta1 * p1 + p2,
    }
}

/// Uncertain expectations `(E[z+], E[pi+])`; the inflation expectation is a
/// level, not a deviation.
pub fn expectations(p: &MacroParams, s: MacroState, p1: f64, p2: f64) -> (f64, f64) {
    (s.z + p1, s.pi_tilde + p.pi_star + p2)
}

/// Real-sphere equation: `z+ = -alpha1 (i - E[pi+]) - alpha2 g` with the
/// nominal rate `i`.
pub fn real_sphere(p: &MacroParams, i: f64, e_pi_next: f64, g: f64) -> f64 {
    -p.alpha1 * (i - e_pi_next) - p.alpha2 * g
}

/// Monetary equation: `pi+ = beta1 E[z+] + E[pi+] + beta2 (i - i*)`,
/// returning the inflation level.
pub fn monetary(p: &MacroParams, e_z_next: f64, e_pi_next: f64, i: f64) -> f64 {
    p.beta1 * e_z_next + e_pi_next + p.beta2 * (i - p.i_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::xi0;
    use crate::linalg::spectral_radius;
    use proptest::prelude::*;

    #[test]
    fn canonical_matrices() {
        let m = build_canonical(&MacroParams::default()).unwrap();
        assert_eq!(m.a(), &Matrix::from_rows(&[&[0.0, 0.16], &[0.699, 1.0]]));
        assert_eq!(m.b1(), &Matrix::column(&[-0.19, 0.0]));
        assert_eq!(m.b2(), &Matrix::column(&[-0.16, 0.433]));
        assert_eq!(m.h(), &Matrix::from_rows(&[&[0.0, 0.16], &[0.699, 1.0]]));
        assert_eq!(m.aq(), Matrix::from_rows(&[&[0.0, 0.1], &[0.15, 0.15]]));
        assert_eq!(m.g(), Matrix::diag(&[-1.0, -1.0]));
        assert_eq!(xi0(&m), SymmetricMatrix::diag(&[-2.0, -2.0]));
        assert_eq!(m.r_cross(crate::game::Player::One).frobenius_norm(), 0.0);
    }

    #[test]
    fn open_loop_is_unstable() {
        let m = build_canonical(&MacroParams::default()).unwrap();
        // closed-form roots of l^2 - l - alpha1 beta1
        let oracle = (1.0 + (1.0f64 + 4.0 * 0.16 * 0.699).sqrt()) / 2.0;
        let rho = spectral_radius(m.a());
        assert!((rho - oracle).abs() < 1e-12);
        assert!((rho - 1.1015).abs() < 1e-3);
    }

    #[test]
    fn alpha1_limit_decouples() {
        let p = MacroParams {
            alpha1: 1e-300,
            ..MacroParams::default()
        };
        let m = build_unchecked(&p).unwrap();
        assert!(m.a()[(0, 1)].abs() < 1e-299);
        assert!(m.b2()[(0, 0)].abs() < 1e-299);
    }

    #[test]
    fn invalid_parameters() {
        let p = MacroParams {
            rho2: 0.0,
            ..MacroParams::default()
        };
        assert!(matches!(build_canonical(&p), Err(Error::Config(_))));
        let p = MacroParams {
            i_star: 0.04,
            ..MacroParams::default()
        };
        assert!(build_canonical(&p).is_err());
    }

    #[test]
    fn step_examples() {
        let p = MacroParams::default();
        assert_eq!(
            step_dynamics(&p, MacroState::new(0.0, 0.0), 0.0, 0.0, 0.0, 0.0),
            MacroState::new(0.0, 0.0)
        );
        let s = step_dynamics(&p, MacroState::new(0.0, 0.175), 0.0, 0.0, 0.0, 0.0);
        assert!((s.z - 0.028).abs() < 1e-15);
        assert_eq!(s.pi_tilde, 0.175);
    }

    #[test]
    fn expectation_examples() {
        let p = MacroParams::default();
        let s = MacroState::new(-0.04, 0.01);
        let (ez, epi) = expectations(&p, s, 0.0, 0.0);
        assert_eq!(ez, -0.04);
        assert_eq!(epi, 0.01 + p.pi_star);
        let (ez, _) = expectations(&p, s, 0.01, 0.0);
        assert!((ez + 0.03).abs() < 1e-16);
    }

    proptest! {
        #[test]
        fn step_matches_matrix_form(
            z in -1.0f64..1.0, pi in -1.0f64..1.0, g in -1.0f64..1.0,
            i in -1.0f64..1.0, p1 in -1.0f64..1.0, p2 in -1.0f64..1.0,
        ) {
            let p = MacroParams::default();
            let m = build_canonical(&p).unwrap();
            let s = step_dynamics(&p, MacroState::new(z, pi), g, i, p1, p2);
            let x = m.step(&[z, pi], &[g], &[i], &[p1, p2]);
            prop_assert!((s.z - x[0]).abs() <= 1e-14);
            prop_assert!((s.pi_tilde - x[1]).abs() <= 1e-14);
        }

        #[test]
        fn raw_equations_with_expectations_give_state_space(
            z in -1.0f64..1.0, pi in -1.0f64..1.0, g in -1.0f64..1.0,
            i in -1.0f64..1.0, p1 in -1.0f64..1.0, p2 in -1.0f64..1.0,
        ) {
            let p = MacroParams::default();
            let s = MacroState::new(z, pi);
            let (ez, epi) = expectations(&p, s, p1, p2);
            let i_nominal = i + p.i_star;
            let z_next = real_sphere(&p, i_nominal, epi, g);
            let pi_next = monetary(&p, ez, epi, i_nominal) - p.pi_star;
            let direct = step_dynamics(&p, s, g, i, p1, p2);
            prop_assert!((z_next - direct.z).abs() <= 1e-14);
            prop_assert!((pi_next - direct.pi_tilde).abs() <= 1e-14);
        }
    }
}
