//! Admissible uncertainties: cone intervals, the oscillating realizations,
//! coefficient-type realizations and seeded random samplers.
//!
//! For a scalar block with output `y = Aq x` and `q = y + G p` the quadratic
//! constraint reads `Xi0 p^2 + 2 S y p + R0 y^2 >= 0` with
//! `S = S0 + R0 G`. Since `Xi0 < 0` and `R0 >= 0` this is an interval
//! `[c y - w |y|, c y + w |y|]` containing 0, with `c = -S / Xi0` and
//! `w = sqrt(S^2 - Xi0 R0) / |Xi0|`.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameModel, UncertaintyBlock};
use crate::linalg::dot;

pub const CONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeKind {
    /// `|p| <= scale |y|`
    Symmetric,
    /// `p` between 0 and `y`
    OneSided,
    /// Any other interval `c y ± w |y|`.
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub output_row: Vec<f64>,
    pub center: f64,
    pub half_width: f64,
}

impl ConeSpec {
    pub fn symmetric(output_row: Vec<f64>, scale: f64) -> Self {
        assert!(scale > 0.0, "cone scale must be positive");
        ConeSpec {
            output_row,
            center: 0.0,
            half_width: scale,
        }
    }

    pub fn one_sided(output_row: Vec<f64>) -> Self {
        ConeSpec {
            output_row,
            center: 0.5,
            half_width: 0.5,
        }
    }

    /// Interval description of a scalar block's quadratic set.
    pub fn from_block(block: &UncertaintyBlock) -> Result<Self> {
        if block.p_dim() != 1 || block.q_dim() != 1 {
            return Err(Error::Dimension(
                "cone intervals exist only for scalar uncertainty blocks".into(),
            ));
        }
        let xi = block.xi0().get(0, 0);
        if !(xi < 0.0) {
            return Err(Error::Assumption(format!(
                "block has non-negative Xi0 = {xi}; its admissible set is unbounded"
            )));
        }
        let r0 = block.r0().get(0, 0);
        let s = block.coupling()[(0, 0)];
        let (center, half_width) = (-s / xi, (s * s - xi * r0).max(0.0).sqrt() / -xi);
        let (center, half_width) = (snap(center), snap(half_width));
        Ok(ConeSpec {
            output_row: block.aq().row_slice(0).to_vec(),
            center,
            half_width,
        })
    }

    pub fn kind(&self) -> ConeKind {
        if self.center == 0.0 {
            ConeKind::Symmetric
        } else if self.center == self.half_width {
            ConeKind::OneSided
        } else {
            ConeKind::General
        }
    }

    /// The `scale` of a symmetric cone (`w`) or of a one-sided cone (`1/2`).
    pub fn scale(&self) -> f64 {
        self.half_width
    }

    pub fn output(&self, x: &[f64]) -> f64 {
        dot(&self.output_row, x)
    }

    /// Admissible interval `[lo, hi]` at output `y`.
    pub fn interval(&self, y: f64) -> (f64, f64) {
        let (c, r) = (self.center * y, self.half_width * y.abs());
        (c - r, c + r)
    }
}

/// Rounds values that are within a few ulps of 1/2 or 1/sqrt(2), so that
/// the textbook cones are recognised exactly.
fn snap(v: f64) -> f64 {
    for t in [0.0, 0.5, FRAC_1_SQRT_2, 1.0] {
        if (v - t).abs() <= 4.0 * f64::EPSILON {
            return t;
        }
    }
    v
}

pub fn verify_cone(cone: &ConeSpec, x: &[f64], p: f64) -> bool {
    let (lo, hi) = cone.interval(cone.output(x));
    p >= lo - CONE_TOL && p <= hi + CONE_TOL
}

/// `|y|/sqrt(2) sin(1/y)`, zero at `y = 0`.
pub fn eval_p1_sin(y1: f64) -> f64 {
    if y1 == 0.0 {
        0.0
    } else {
        y1.abs() * FRAC_1_SQRT_2 * (1.0 / y1).sin()
    }
}

/// `y/2 + |y|/2 sin(1/y)`, zero at `y = 0`.
pub fn eval_p2_sin(y2: f64) -> f64 {
    if y2 == 0.0 {
        0.0
    } else {
        y2 / 2.0 + y2.abs() / 2.0 * (1.0 / y2).sin()
    }
}

/// The same oscillating construction for an arbitrary cone interval:
/// centre plus half-width times `sin(1/y)`, clamped into the interval to
/// absorb rounding at the boundary.
pub fn eval_sin(cone: &ConeSpec, y: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let (lo, hi) = cone.interval(y);
    (cone.center * y + cone.half_width * y.abs() * (1.0 / y).sin()).clamp(lo, hi)
}

/// Uniform draw from the cone interval at `y`.
pub fn sample_in_cone<R: Rng>(cone: &ConeSpec, y: f64, rng: &mut R) -> f64 {
    let (lo, hi) = cone.interval(y);
    let u: f64 = rng.gen();
    (lo + (hi - lo) * u).clamp(lo, hi)
}

/// One uniform draw at the state `x`, deterministic per seed.
pub fn sample_admissible(cone: &ConeSpec, x: &[f64], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_in_cone(cone, cone.output(x), &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Realization {
    Zero,
    Sin,
    /// Time-invariant `p_j = c_j y_j`, each `c_j` inside its cone.
    LinearCoefficient {
        coefficients: Vec<f64>,
    },
    /// `p_j = c_jt y_j` with `c_jt` redrawn uniformly every period.
    RandomCoefficient {
        seed: u64,
    },
    /// `p_j` drawn uniformly from its interval every period.
    RandomAdmissible {
        seed: u64,
    },
}

impl Realization {
    pub fn label(&self) -> &'static str {
        match self {
            Realization::Zero => "zero",
            Realization::Sin => "sin",
            Realization::LinearCoefficient { .. } => "linear-coefficient",
            Realization::RandomCoefficient { .. } => "random-coefficient",
            Realization::RandomAdmissible { .. } => "random",
        }
    }
}

/// Stateful evaluator of a realization over a trajectory.
#[derive(Debug, Clone)]
pub struct UncertaintySource {
    realization: Realization,
    cones: Vec<ConeSpec>,
    rng: Option<ChaCha8Rng>,
}

impl UncertaintySource {
    pub fn new(model: &GameModel, realization: Realization) -> Result<Self> {
        let cones = if realization == Realization::Zero {
            Vec::new()
        } else {
            model
                .blocks()
                .iter()
                .map(ConeSpec::from_block)
                .collect::<Result<Vec<_>>>()?
        };
        if let Realization::LinearCoefficient { coefficients } = &realization {
            if coefficients.len() != cones.len() {
                return Err(Error::Dimension(format!(
                    "{} coefficients for {} uncertainty blocks",
                    coefficients.len(),
                    cones.len()
                )));
            }
            for (j, (&c, cone)) in coefficients.iter().zip(&cones).enumerate() {
                let (lo, hi) = cone.interval(1.0);
                if !(c >= lo - CONE_TOL && c <= hi + CONE_TOL) {
                    return Err(Error::Config(format!(
                        "coefficient {c} of block {} lies outside [{lo}, {hi}]",
                        j + 1
                    )));
                }
            }
        }
        let rng = match realization {
            Realization::RandomCoefficient { seed } | Realization::RandomAdmissible { seed } => {
                Some(ChaCha8Rng::seed_from_u64(seed))
            }
            _ => None,
        };
        Ok(UncertaintySource {
            realization,
            cones,
            rng,
        })
    }

    pub fn cones(&self) -> &[ConeSpec] {
        &self.cones
    }

    /// Uncertainty vector `p` at state `x` (one entry per block).
    pub fn next(&mut self, model: &GameModel, x: &[f64]) -> Vec<f64> {
        if self.realization == Realization::Zero {
            return vec![0.0; model.p_dim()];
        }
        let mut out = Vec::with_capacity(self.cones.len());
        for (j, cone) in self.cones.iter().enumerate() {
            let y = cone.output(x);
            let (lo, hi) = cone.interval(y);
            let p = match &self.realization {
                Realization::Zero => 0.0,
                Realization::Sin => eval_sin(cone, y),
                Realization::LinearCoefficient { coefficients } => {
                    (coefficients[j] * y).clamp(lo, hi)
                }
                Realization::RandomCoefficient { .. } => {
                    let rng = self.rng.as_mut().expect("seeded");
                    let (clo, chi) = cone.interval(1.0);
                    let u: f64 = rng.gen();
                    ((clo + (chi - clo) * u) * y).clamp(lo, hi)
                }
                Realization::RandomAdmissible { .. } => {
                    sample_in_cone(cone, y, self.rng.as_mut().expect("seeded"))
                }
            };
            out.push(p);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::omega_membership;
    use crate::game::tests::fimo_like;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cones() -> (ConeSpec, ConeSpec) {
        let m = fimo_like();
        (
            ConeSpec::from_block(&m.blocks()[0]).unwrap(),
            ConeSpec::from_block(&m.blocks()[1]).unwrap(),
        )
    }

    #[test]
    fn blocks_map_to_the_textbook_cones() {
        let (c1, c2) = cones();
        assert_eq!(c1.kind(), ConeKind::Symmetric);
        assert_eq!(c1.scale(), FRAC_1_SQRT_2);
        assert_eq!(c1.output_row, vec![0.0, 0.1]);
        assert_eq!(c2.kind(), ConeKind::OneSided);
        assert_eq!(c2.scale(), 0.5);
        assert_eq!(c2.output_row, vec![0.15, 0.15]);
    }

    #[test]
    fn sin_examples() {
        assert_eq!(eval_p1_sin(0.0), 0.0);
        assert!((eval_p1_sin(2.0 / PI) - 2f64.sqrt() / PI).abs() < 1e-15);
        assert_eq!(eval_p2_sin(0.0), 0.0);
        assert!((eval_p2_sin(2.0 / PI) - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn generic_sin_matches_named_forms() {
        let (c1, c2) = cones();
        for y in [-3.0, -0.2, -1e-7, 1e-9, 0.05, 2.0 / PI, 7.0] {
            assert!((eval_sin(&c1, y) - eval_p1_sin(y)).abs() <= 1e-15 * (1.0 + y.abs()));
            assert!((eval_sin(&c2, y) - eval_p2_sin(y)).abs() <= 1e-15 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn verify_cone_examples() {
        let sym = ConeSpec::symmetric(vec![1.0], FRAC_1_SQRT_2);
        let one = ConeSpec::one_sided(vec![1.0]);
        assert!(verify_cone(&sym, &[1.0], 0.70));
        assert!(!verify_cone(&sym, &[1.0], 0.72));
        assert!(verify_cone(&one, &[1.0], 1.0));
        assert!(verify_cone(&sym, &[3.0], 0.0));
        assert!(verify_cone(&one, &[-3.0], 0.0));
    }

    #[test]
    fn sample_admissible_examples() {
        let sym = ConeSpec::symmetric(vec![1.0], FRAC_1_SQRT_2);
        let one = ConeSpec::one_sided(vec![1.0]);
        assert_eq!(sample_admissible(&sym, &[0.0], 3), 0.0);
        for seed in 0..200 {
            let v = sample_admissible(&sym, &[1.0], seed);
            assert!(v.abs() <= FRAC_1_SQRT_2);
            let w = sample_admissible(&one, &[-2.0], seed);
            assert!((-2.0..=0.0).contains(&w));
        }
        assert_eq!(
            sample_admissible(&one, &[-2.0], 9),
            sample_admissible(&one, &[-2.0], 9)
        );
    }

    #[test]
    fn random_sources_are_deterministic_per_seed() {
        let m = fimo_like();
        let run = |seed| {
            let mut s = UncertaintySource::new(&m, Realization::RandomAdmissible { seed }).unwrap();
            (0..20)
                .map(|k| s.next(&m, &[0.1 * k as f64, -0.3]))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn coefficient_validation() {
        let m = fimo_like();
        let ok = Realization::LinearCoefficient {
            coefficients: vec![-0.7, 1.0],
        };
        assert!(UncertaintySource::new(&m, ok).is_ok());
        let bad = Realization::LinearCoefficient {
            coefficients: vec![0.0, 1.2],
        };
        assert!(UncertaintySource::new(&m, bad).is_err());
        let short = Realization::LinearCoefficient {
            coefficients: vec![0.0],
        };
        assert!(UncertaintySource::new(&m, short).is_err());
    }

    proptest! {
        #[test]
        fn cone_matches_quadratic_set(
            x in prop::array::uniform2(-5.0f64..5.0),
            t in -2.0f64..2.0,
        ) {
            let m = fimo_like();
            for block in m.blocks() {
                let cone = ConeSpec::from_block(block).unwrap();
                let y = cone.output(&x);
                let p = t * y;
                let q = y + block.g()[(0, 0)] * p;
                prop_assert_eq!(verify_cone(&cone, &x, p), omega_membership(block, &[p], &[q]));
            }
        }

        #[test]
        fn sin_realizations_stay_in_their_cones(y in prop_oneof![-1e3f64..1e3, -1e-6f64..1e-6]) {
            let (c1, c2) = cones();
            let x = |row: &[f64]| if row[0] == 0.0 { [0.0, y / row[1]] } else { [y / (row[0] + row[1]), y / (row[0] + row[1])] };
            prop_assert!(eval_p1_sin(y).abs() <= y.abs() * FRAC_1_SQRT_2 * (1.0 + 1e-15));
            let p2 = eval_p2_sin(y);
            prop_assert!(p2 >= y.min(0.0) - 1e-15 * y.abs() && p2 <= y.max(0.0) + 1e-15 * y.abs());
            prop_assert!(verify_cone(&c1, &x(&c1.output_row), eval_sin(&c1, c1.output(&x(&c1.output_row)))));
            prop_assert!(verify_cone(&c2, &x(&c2.output_row), eval_sin(&c2, c2.output(&x(&c2.output_row)))));
        }

        #[test]
        fn coefficient_form_satisfies_one_sided_cone(c_bar in 0.0f64..3.0, frac in 0.0f64..=1.0, pi in -1.0f64..1.0) {
            let c = frac * c_bar;
            let cone = ConeSpec::one_sided(vec![c_bar]);
            prop_assert!(verify_cone(&cone, &[pi], c * pi));
        }

        #[test]
        fn sources_produce_admissible_values(seed in any::<u64>(), x in prop::array::uniform2(-1.0f64..1.0)) {
            let m = fimo_like();
            for r in [
                Realization::Sin,
                Realization::RandomCoefficient { seed },
                Realization::RandomAdmissible { seed },
                Realization::LinearCoefficient { coefficients: vec![FRAC_1_SQRT_2, 0.0] },
            ] {
                let mut src = UncertaintySource::new(&m, r).unwrap();
                let p = src.next(&m, &x);
                let q = m.uncertain_output(&x, &p);
                for (j, block) in m.blocks().iter().enumerate() {
                    prop_assert!(omega_membership(block, &[p[j]], &[q[j]]));
                }
            }
        }
    }
}
