//! The three analytic example systems with closed-form solutions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hypotheses::{EquilibriumManifold, Verdict};
use crate::jet::Scalar;
use crate::system::{SingularField, SystemSpec};

/// ζ = u1, F = (−u2, −u2·u1).
#[derive(Debug, Clone, Copy)]
pub struct FastBlowup;

impl SingularField for FastBlowup {
    fn dim(&self) -> usize {
        2
    }
    fn field<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        vec![-u[1].clone(), -(u[1].clone() * u[0].clone())]
    }
    fn zeta<T: Scalar>(&self, u: &[T]) -> T {
        u[0].clone()
    }
}

/// U = (u1, u2, ε), ζ = ε, F = (−5·u1·ε, −u2, 0).
#[derive(Debug, Clone, Copy)]
pub struct LinearSlaving;

impl SingularField for LinearSlaving {
    fn dim(&self) -> usize {
        3
    }
    fn field<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        vec![
            u[0].clone() * u[2].clone() * -5.0,
            -u[1].clone(),
            u[2].constant(0.0),
        ]
    }
    fn zeta<T: Scalar>(&self, u: &[T]) -> T {
        u[2].clone()
    }
}

/// U = (u1, u2, ε), ζ = ε, F = (u2, −u1, 0).
#[derive(Debug, Clone, Copy)]
pub struct Rotation;

impl SingularField for Rotation {
    fn dim(&self) -> usize {
        3
    }
    fn field<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        vec![u[1].clone(), -u[0].clone(), u[2].constant(0.0)]
    }
    fn zeta<T: Scalar>(&self, u: &[T]) -> T {
        u[2].clone()
    }
}

pub fn fast_blowup() -> SystemSpec {
    SystemSpec::new("fast_blowup", FastBlowup).expect("origin is a singular equilibrium")
}

pub fn linear_slaving() -> SystemSpec {
    SystemSpec::new("linear_slaving", LinearSlaving).expect("origin is a singular equilibrium")
}

pub fn rotation() -> SystemSpec {
    SystemSpec::new("rotation", Rotation).expect("origin is a singular equilibrium")
}

pub const EXAMPLE_NAMES: [&str; 3] = ["fast_blowup", "linear_slaving", "rotation"];

/// A built-in example with its published pass/fail pattern for H1..H5.
#[derive(Debug, Clone)]
pub struct NamedSystem {
    pub name: &'static str,
    pub spec: SystemSpec,
    pub expected_hypotheses: [Verdict; 5],
}

impl NamedSystem {
    pub fn has_analytic_solution(&self) -> bool {
        true
    }

    pub fn analytic_solution(&self, t: f64, u0: &DVector<f64>) -> Result<DVector<f64>> {
        analytic_oracle(self.name, t, u0)
    }

    /// The equilibrium manifold near the origin.
    pub fn equilibrium_manifold(&self) -> EquilibriumManifold {
        let d = self.spec.dim();
        match self.name {
            // {u2 = 0}
            "fast_blowup" => EquilibriumManifold::affine(
                DVector::zeros(d),
                DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            ),
            // {(0, 0, ε)}
            _ => EquilibriumManifold::affine(
                DVector::zeros(d),
                DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]),
            ),
        }
    }
}

pub fn load_example(name: &str) -> Result<NamedSystem> {
    use Verdict::{Fail, Pass};
    let (name, spec, expected) = match name {
        "fast_blowup" => ("fast_blowup", fast_blowup(), [Pass, Pass, Pass, Fail, Pass]),
        "linear_slaving" => ("linear_slaving", linear_slaving(), [Pass; 5]),
        "rotation" => ("rotation", rotation(), [Pass, Fail, Pass, Pass, Pass]),
        other => return Err(Error::UnknownName(other.to_string())),
    };
    Ok(NamedSystem {
        name,
        spec,
        expected_hypotheses: expected,
    })
}

/// Blow-up time of fast_blowup from `u0`, if the orbit reaches S.
///
/// u1² = u1(0)² + 2·u2(0)·(e^{−t} − 1) hits zero at
/// t* = ln(2u2 / (2u2 − u1²)) when 2u2 > u1².
pub fn fast_blowup_time(u0: &DVector<f64>) -> Option<f64> {
    let (a, b) = (u0[0], u0[1]);
    if b > 0.0 && 2.0 * b > a * a {
        Some((2.0 * b / (2.0 * b - a * a)).ln())
    } else {
        None
    }
}

fn check_len(u0: &DVector<f64>, d: usize) -> Result<()> {
    if u0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: u0.len(),
        });
    }
    Ok(())
}

/// Closed-form state at time `t` of the named example started at `u0`.
pub fn analytic_oracle(name: &str, t: f64, u0: &DVector<f64>) -> Result<DVector<f64>> {
    match name {
        "fast_blowup" => {
            check_len(u0, 2)?;
            if u0[0] == 0.0 {
                return Err(Error::InvalidInitialState { zeta: 0.0 });
            }
            if let Some(t_star) = fast_blowup_time(u0) {
                if t >= t_star {
                    return Err(Error::BlowupReached { t_star });
                }
            }
            let decay = (-t).exp();
            let s = u0[0] * u0[0] + 2.0 * u0[1] * (decay - 1.0);
            let u1 = s.sqrt().copysign(u0[0]);
            Ok(DVector::from_vec(vec![u1, u0[1] * decay]))
        }
        "linear_slaving" => {
            check_len(u0, 3)?;
            let eps = u0[2];
            if eps == 0.0 {
                return Err(Error::InvalidInitialState { zeta: 0.0 });
            }
            Ok(DVector::from_vec(vec![
                u0[0] * (-5.0 * t).exp(),
                u0[1] * (-t / eps).exp(),
                eps,
            ]))
        }
        "rotation" => {
            check_len(u0, 3)?;
            let eps = u0[2];
            if u0[0] == 0.0 && u0[1] == 0.0 {
                return Ok(u0.clone());
            }
            if eps == 0.0 {
                return Err(Error::InvalidInitialState { zeta: 0.0 });
            }
            // u1 = A cos(t/ε) + B sin(t/ε), u2 = ε·u1'
            let (s, c) = (t / eps).sin_cos();
            let (a, b) = (u0[0], u0[1]);
            Ok(DVector::from_vec(vec![a * c + b * s, -a * s + b * c, eps]))
        }
        other => Err(Error::UnknownName(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn registry() {
        for name in EXAMPLE_NAMES {
            let sys = load_example(name).unwrap();
            assert_eq!(sys.spec.name(), name);
        }
        assert!(matches!(load_example("lorenz"), Err(Error::UnknownName(_))));
    }

    #[test]
    fn published_values() {
        let fb = load_example("fast_blowup").unwrap();
        assert_eq!(fb.spec.f(&v(&[1.0, 1.0])).as_slice(), &[-1.0, -1.0]);
        let ls = load_example("linear_slaving").unwrap();
        for eps in [-0.3, 0.0, 0.7] {
            assert_eq!(ls.spec.f(&v(&[0.0, 0.0, eps])).amax(), 0.0);
        }
    }

    #[test]
    fn fast_blowup_closed_form_at_half() {
        // u1(0.5) = sqrt(2e^{-1/2} - 1)
        let u = analytic_oracle("fast_blowup", 0.5, &v(&[1.0, 1.0])).unwrap();
        assert!((u[0] - 0.461_585_657_733_499).abs() < 1e-15);
        assert!((u[1] - (-0.5f64).exp()).abs() < 1e-15);
        let err = analytic_oracle("fast_blowup", 0.7, &v(&[1.0, 1.0])).unwrap_err();
        match err {
            Error::BlowupReached { t_star } => assert!((t_star - std::f64::consts::LN_2).abs() < 1e-15),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn closed_forms_satisfy_the_ode() {
        let cases: [(&str, [f64; 3], usize); 3] = [
            ("fast_blowup", [0.8, 0.5, 0.0], 2),
            ("linear_slaving", [0.7, -1.2, 0.4], 3),
            ("rotation", [0.3, 0.9, 0.25], 3),
        ];
        for (name, u0, d) in cases {
            let sys = load_example(name).unwrap();
            let u0 = v(&u0[..d]);
            for t in [0.05, 0.2, 0.4] {
                let h = 1e-5;
                let up = sys.analytic_solution(t + h, &u0).unwrap();
                let um = sys.analytic_solution(t - h, &u0).unwrap();
                let u = sys.analytic_solution(t, &u0).unwrap();
                let du = (up - um) / (2.0 * h);
                let rhs = sys.spec.f(&u) / sys.spec.zeta(&u);
                assert!((du - rhs).amax() < 1e-7, "{name} at t = {t}");
            }
        }
    }

    #[test]
    fn rotation_axis_is_fixed() {
        let u0 = v(&[0.0, 0.0, 0.3]);
        assert_eq!(analytic_oracle("rotation", 2.0, &u0).unwrap(), u0);
    }

    #[test]
    fn blowup_time_formula() {
        assert!((fast_blowup_time(&v(&[1.0, 1.0])).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(fast_blowup_time(&v(&[1.0, 0.4])).is_none());
        assert!(fast_blowup_time(&v(&[1.0, -1.0])).is_none());
    }
}
