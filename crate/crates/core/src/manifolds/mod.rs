//! Center and uniformly stable manifolds of the desingularized field, the
//! reduced slow flow, orbit decomposition and sign preservation.

mod decompose;
mod slow;
mod stable;
mod taylor;

pub use decompose::{decompose_orbit, verify_sign_preservation, DecomposeOptions, OrbitDecomposition, SignCheck};
pub use slow::{reduced_slow_field, SlowField};
pub use stable::{stable_fiber, uniformly_stable_manifold, Boundary, Fiber, FiberRecord, StableFiberBundle, StableOptions};
pub use taylor::{
    grid_points, solve_graph, sphere_directions, CoefficientRecord, GraphPoly, ManifoldRecord, ResidualSample,
    TaylorManifold, VALIDITY_RESIDUAL,
};

use crate::error::{Error, Result};
use crate::linalg::{canonical_basis, hstack, spectral_split, SpectralSplit};
use crate::system::SystemSpec;

/// Default |Re λ| threshold for center eigenvalues.
pub const TOL_CENTER: f64 = 1e-8;
/// Default expansion degree.
pub const DEFAULT_ORDER: usize = 3;

/// Spectral split of DF at the distinguished point.
pub fn origin_split(spec: &SystemSpec, tol_center: f64) -> Result<SpectralSplit> {
    spectral_split(&spec.jacobian_analytic(spec.origin()), tol_center)
}

/// Local center manifold of dU/dτ = F(U) at the distinguished point.
pub fn center_manifold(spec: &SystemSpec, order: usize) -> Result<TaylorManifold> {
    center_manifold_with(spec, order, TOL_CENTER)
}

pub fn center_manifold_with(spec: &SystemSpec, order: usize, tol_center: f64) -> Result<TaylorManifold> {
    let split = origin_split(spec, tol_center)?;
    if split.center.ncols() == 0 {
        return Err(Error::NoCenterDirections);
    }
    let codomain = canonical_basis(&hstack(&[&split.stable, &split.unstable]));
    solve_graph(spec, spec.origin(), &split.center, &codomain, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{linear_slaving, rotation};
    use crate::inline::{Poly, PolySystem};
    use nalgebra::DVector;

    /// x' = xy, y' = −y − x², with ζ = x.
    fn quadratic() -> SystemSpec {
        let sys = PolySystem::new(
            2,
            vec![
                Poly::from_pairs(&[(1.0, &[1, 1])]),
                Poly::from_pairs(&[(-1.0, &[0, 1]), (-1.0, &[2, 0])]),
            ],
            Poly::from_pairs(&[(1.0, &[1, 0])]),
        )
        .unwrap();
        SystemSpec::new("quadratic", sys).unwrap()
    }

    #[test]
    fn quadratic_center_manifold() {
        let spec = quadratic();
        let cm = center_manifold(&spec, 3).unwrap();
        assert_eq!(cm.k(), 1);
        assert!((cm.coefficient(&[2])[0] + 1.0).abs() < 1e-12);
        assert!(cm.coefficient(&[3])[0].abs() < 1e-12);
        // h = −x² − 2x⁴ + …, so at order 4 the quartic coefficient is −2
        let cm4 = center_manifold(&spec, 4).unwrap();
        assert!((cm4.coefficient(&[4])[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn residual_scales_with_order() {
        let spec = quadratic();
        for order in [2, 3, 4] {
            let cm = center_manifold(&spec, order).unwrap();
            let r1 = cm.residual_on_sphere(&spec, 1e-3);
            let r2 = cm.residual_on_sphere(&spec, 2e-3);
            let ratio = r2 / r1;
            // h has only even powers, so the defect is O(r⁴) for order 2 and 3
            // and O(r⁶) for order 4
            let expected = if order == 4 { 64.0 } else { 16.0 };
            assert!(ratio > expected / 2.0 && ratio < expected * 2.0, "order {order}: {ratio}");
        }
    }

    #[test]
    fn slaving_center_manifold_is_flat() {
        let spec = linear_slaving();
        let cm = center_manifold(&spec, 3).unwrap();
        assert_eq!(cm.k(), 2);
        assert!(cm.poly().is_zero());
        // the plane u2 = 0
        let p = cm.point(&DVector::from_vec(vec![0.3, -0.2]));
        assert_eq!(p[1], 0.0);
        assert!(cm.residual().iter().all(|s| s.defect == 0.0));
    }

    #[test]
    fn hyperbolic_has_no_center() {
        let sys = PolySystem::new(
            2,
            vec![
                Poly::from_pairs(&[(-1.0, &[1, 0])]),
                Poly::from_pairs(&[(2.0, &[0, 1]), (1.0, &[1, 1])]),
            ],
            Poly::from_pairs(&[(1.0, &[1, 0])]),
        )
        .unwrap();
        let spec = SystemSpec::new("saddle", sys).unwrap();
        assert!(matches!(center_manifold(&spec, 3), Err(Error::NoCenterDirections)));
    }

    #[test]
    fn rotation_center_is_everything() {
        let spec = rotation();
        let cm = center_manifold(&spec, 3).unwrap();
        assert_eq!(cm.k(), 3);
        assert_eq!(cm.codomain().ncols(), 0);
    }
}
