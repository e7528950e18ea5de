use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::integrate::{dopri5, Finish, Flow, StageFailure, StepControl};
use crate::jet::{Jet, JetSpace};
use crate::manifolds::TaylorManifold;
use crate::system::SystemSpec;

/// Below this |ζ| the slow field switches to the transverse quotient.
const TOL_S: f64 = 1e-10;

/// The flow on a center manifold in original time t, with ζ divided out.
#[derive(Debug, Clone)]
pub struct SlowField {
    spec: SystemSpec,
    cm: TaylorManifold,
    tol_s: f64,
}

/// Value, x-Jacobian of ẋ (τ-time), ζ and ∇ₓζ along the graph.
struct Linearization {
    g: DVector<f64>,
    dg: nalgebra::DMatrix<f64>,
    zeta: f64,
    grad_zeta: DVector<f64>,
}

impl SlowField {
    pub fn manifold(&self) -> &TaylorManifold {
        &self.cm
    }

    pub fn dim(&self) -> usize {
        self.cm.k()
    }

    pub fn lift(&self, x: &DVector<f64>) -> DVector<f64> {
        self.cm.point(x)
    }

    fn linearize(&self, x: &DVector<f64>) -> Linearization {
        let k = self.cm.k();
        let d = self.cm.dim();
        let space = JetSpace::get(k, 1);
        let xj: Vec<Jet> = (0..k).map(|i| Jet::variable(&space, i, x[i])).collect();
        let h = self.cm.poly().eval(&xj);
        let base = self.cm.base();
        let (p, q) = (self.cm.domain(), self.cm.codomain());
        let u: Vec<Jet> = (0..d)
            .map(|i| {
                let mut acc = Jet::constant_in(&space, base[i]);
                for (j, xjj) in xj.iter().enumerate() {
                    acc = acc + xjj.clone() * p[(i, j)];
                }
                for (l, hl) in h.iter().enumerate() {
                    acc = acc + hl.clone() * q[(i, l)];
                }
                acc
            })
            .collect();
        let f = self.spec.field_jet(&u);
        let z = self.spec.zeta_jet(&u);
        // ẋ is the first k rows of T⁻¹F
        let (gx, _) = self.cm.split_field(&self.spec, x);
        let tinv_rows = {
            let t = crate::linalg::hstack(&[p, q]);
            t.try_inverse().expect("manifold bases are complementary")
        };
        let mut dg = nalgebra::DMatrix::zeros(k, k);
        for r in 0..k {
            for v in 0..k {
                dg[(r, v)] = (0..d).map(|c| tinv_rows[(r, c)] * f[c].gradient_entry(v)).sum();
            }
        }
        Linearization {
            g: gx,
            dg,
            zeta: z.coeffs()[0],
            grad_zeta: DVector::from_fn(k, |v, _| z.gradient_entry(v)),
        }
    }

    /// ẋ in τ-time.
    pub fn tau_field(&self, x: &DVector<f64>) -> DVector<f64> {
        self.cm.split_field(&self.spec, x).0
    }

    /// dx/dt = ẋ/ζ, continued across S by the transverse quotient.
    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let u = self.cm.point(x);
        let zeta = self.spec.zeta(&u);
        if zeta.abs() > self.tol_s {
            return Ok(self.tau_field(x) / zeta);
        }
        let lin = self.linearize(x);
        let v = &lin.grad_zeta;
        let denom = v.norm_squared();
        let bound = 1e-8 * (1.0 + x.norm()) + 10.0 * self.cm.invariance_defect(&self.spec, x);
        if denom == 0.0 || lin.g.norm() > bound {
            return Err(Error::DivisionDefect {
                numerator: lin.g.norm(),
            });
        }
        debug_assert!(lin.zeta.abs() <= self.tol_s);
        Ok(&lin.dg * v / denom)
    }

    /// x(t) at each of `times` (sorted, starting at or after 0) from x(0) = x0.
    pub fn flow(&self, x0: &DVector<f64>, times: &[f64]) -> Result<Vec<DVector<f64>>> {
        let k = self.dim();
        let mut out = Vec::with_capacity(times.len());
        let mut rest = times;
        while let Some((&t, tail)) = rest.split_first() {
            if t > 0.0 {
                break;
            }
            out.push(x0.clone());
            rest = tail;
        }
        if rest.is_empty() {
            return Ok(out);
        }
        let ctl = StepControl::with_tolerances(1e-13, 1e-15);
        let t_end = *rest.last().expect("nonempty");
        let rhs = |_t: f64, y: &[f64]| -> std::result::Result<Vec<f64>, StageFailure> {
            self.eval(&DVector::from_column_slice(y))
                .map(|v| v.as_slice().to_vec())
                .map_err(|_| StageFailure)
        };
        let mut recorded: Vec<DVector<f64>> = Vec::new();
        let outcome = dopri5(rhs, 0.0, x0.as_slice(), t_end, &ctl, Some(rest), |_t, y, on_grid| {
            if on_grid {
                recorded.push(DVector::from_column_slice(&y[..k]));
            }
            Flow::Continue
        });
        match outcome.finish {
            Finish::Completed if recorded.len() == rest.len() => {}
            _ => {
                return Err(Error::StepFailure {
                    t: outcome.t,
                    h: 0.0,
                })
            }
        }
        out.extend(recorded);
        Ok(out)
    }
}

/// Reduced flow on `cm` with the singular factor removed.
///
/// Fails with `DivisionDefect` when ẋ does not vanish on M^c ∩ S, which
/// would give the quotient a pole.
pub fn reduced_slow_field(spec: &SystemSpec, cm: &TaylorManifold) -> Result<SlowField> {
    let field = SlowField {
        spec: spec.clone(),
        cm: cm.clone(),
        tol_s: TOL_S,
    };
    let radius = if cm.validity_radius() > 0.0 {
        cm.validity_radius().min(0.1)
    } else {
        0.05
    };
    for x in cm.singular_intersections(spec, radius, 64, TOL_S) {
        field.eval(&x)?;
    }
    Ok(field)
}
