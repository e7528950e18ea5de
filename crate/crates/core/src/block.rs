//! Block-structured profile equations of mixed hyperbolic-parabolic systems
//! and their reduction to singular form.
//!
//! The base state is u = (u_0, u_1, .., u_n) with u_0 the hyperbolic
//! component and the rest parabolic. Profiles satisfy
//!
//! ```text
//! a11 ζ w + A21ᵗ z          = 0
//! a21 w  + A22 z            = b z'
//! ```
//!
//! with w = u_0', z = (u_1', .., u_n') and ζ = u_v − σ for a designated
//! velocity component u_v. Eliminating w gives the singular system on
//! U = (u, z) with ζ(U) = u_v − σ.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotheses::EquilibriumManifold;
use crate::inline::{Poly, MAX_INLINE_DEGREE};
use crate::jet::Scalar;
use crate::manifolds::grid_points;
use crate::singular::Trajectory;
use crate::system::{SingularField, SystemSpec};

/// Condition number of b above which it is treated as singular.
pub const MAX_CONDITION_B: f64 = 1e8;

pub trait BlockSystem: Send + Sync {
    fn name(&self) -> String {
        "block".into()
    }

    fn n_par(&self) -> usize;

    fn n_hyp(&self) -> usize {
        1
    }

    /// Base-state dimension N = 1 + n_par.
    fn n_base(&self) -> usize {
        1 + self.n_par()
    }

    fn sigma(&self) -> f64;

    /// Index of the velocity in u; ζ = u[v] − σ.
    fn velocity_index(&self) -> usize;

    fn zeta<T: Scalar>(&self, u: &[T]) -> T {
        u[self.velocity_index()].clone() - self.sigma()
    }

    fn a11<T: Scalar>(&self, u: &[T]) -> T;

    fn a21<T: Scalar>(&self, u: &[T]) -> Vec<T>;

    /// Coefficient of w in the parabolic rows. Equal to A21 when z = 0.
    fn a21_lower<T: Scalar>(&self, u: &[T], _z: &[T]) -> Vec<T> {
        self.a21(u)
    }

    /// Row-major n_par × n_par.
    fn a22<T: Scalar>(&self, u: &[T], z: &[T]) -> Vec<Vec<T>>;

    fn b<T: Scalar>(&self, u: &[T]) -> Vec<Vec<T>>;

    /// Matrix multiplying −σ in the full first-order block A(u, 0).
    fn e_mat(&self, _u: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

/// Solves m·x = rhs by Gaussian elimination with partial pivoting on the
/// constant parts.
pub(crate) fn solve_small<T: Scalar>(mut m: Vec<Vec<T>>, mut rhs: Vec<T>) -> Vec<T> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| {
                m[a][col]
                    .value()
                    .abs()
                    .partial_cmp(&m[b][col].value().abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("nonempty range");
        m.swap(col, piv);
        rhs.swap(col, piv);
        let inv = m[col][col].recip();
        for row in col + 1..n {
            let factor = m[row][col].clone() * inv.clone();
            for k in col..n {
                let t = m[col][k].clone() * factor.clone();
                m[row][k] = m[row][k].clone() - t;
            }
            let t = rhs[col].clone() * factor;
            rhs[row] = rhs[row].clone() - t;
        }
    }
    let mut x: Vec<T> = rhs.clone();
    for row in (0..n).rev() {
        let mut acc = rhs[row].clone();
        for k in row + 1..n {
            acc = acc - m[row][k].clone() * x[k].clone();
        }
        x[row] = acc / m[row][row].clone();
    }
    x
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(a[0].constant(0.0), |acc, (x, y)| acc + x.clone() * y.clone())
}

fn to_dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

/// The reduced singular field on U = (u, z).
struct Reduced<B> {
    blocks: Arc<B>,
}

impl<B: BlockSystem> SingularField for Reduced<B> {
    fn dim(&self) -> usize {
        self.blocks.n_base() + self.blocks.n_par()
    }

    fn field<T: Scalar>(&self, uz: &[T]) -> Vec<T> {
        let bs = &*self.blocks;
        let nb = bs.n_base();
        let (u, z) = uz.split_at(nb);
        let zeta = bs.zeta(u);
        // ζ·w
        let zw = -(dot(&bs.a21(u), z) / bs.a11(u));
        let a22 = bs.a22(u, z);
        let lower = bs.a21_lower(u, z);
        let rhs: Vec<T> = (0..z.len())
            .map(|i| dot(&a22[i], z) * zeta.clone() + lower[i].clone() * zw.clone())
            .collect();
        let zx = solve_small(bs.b(u), rhs);
        let mut out = Vec::with_capacity(uz.len());
        out.push(zw);
        out.extend(z.iter().map(|zi| zi.clone() * zeta.clone()));
        out.extend(zx);
        out
    }

    fn zeta<T: Scalar>(&self, uz: &[T]) -> T {
        self.blocks.zeta(&uz[..self.blocks.n_base()])
    }
}

/// The singular system obtained from a [`BlockSystem`].
#[derive(Debug, Clone)]
pub struct ProfileODE {
    pub spec: SystemSpec,
    /// Index of the velocity in U; ζ(U) = U[zeta_index] − σ.
    pub zeta_index: usize,
    pub n_par: usize,
    pub sigma: f64,
}

impl ProfileODE {
    pub fn n_base(&self) -> usize {
        1 + self.n_par
    }

    pub fn state(&self, u: &[f64], z: &[f64]) -> DVector<f64> {
        DVector::from_iterator(u.len() + z.len(), u.iter().chain(z).copied())
    }

    pub fn base<'a>(&self, uz: &'a [f64]) -> &'a [f64] {
        &uz[..self.n_base()]
    }

    pub fn z<'a>(&self, uz: &'a [f64]) -> &'a [f64] {
        &uz[self.n_base()..]
    }

    /// Constant profiles {z = 0} through the anchor, parameterized by u.
    pub fn constant_states(&self) -> EquilibriumManifold {
        let d = self.spec.dim();
        let nb = self.n_base();
        EquilibriumManifold::affine(self.spec.origin().clone(), DMatrix::from_fn(d, nb, |i, j| (i == j) as u8 as f64))
    }
}

/// Worst condition number of b over a grid on the box anchor ± half_width.
pub fn audit_b<B: BlockSystem>(bs: &B, anchor: &[f64], half_width: f64, n: usize) -> Result<f64> {
    let c = DVector::from_column_slice(anchor);
    let mut worst: f64 = 0.0;
    for g in grid_points(anchor.len(), half_width, n) {
        let u = &c + g;
        let sv = to_dmatrix(&bs.b(u.as_slice())).singular_values();
        let cond = sv.max() / sv.min();
        if !(cond < MAX_CONDITION_B) {
            return Err(Error::NonInvertibleB { condition: cond });
        }
        worst = worst.max(cond);
    }
    Ok(worst)
}

/// Reduces `bs` to singular form with distinguished point (anchor, 0).
///
/// The anchor must lie on ζ = 0.
pub fn reduce<B: BlockSystem + 'static>(bs: B, anchor: &[f64]) -> Result<ProfileODE> {
    let nb = bs.n_base();
    if anchor.len() != nb {
        return Err(Error::DimensionMismatch {
            expected: nb,
            got: anchor.len(),
        });
    }
    let v = bs.velocity_index();
    if v == 0 || v >= nb {
        return Err(Error::InvalidInput(format!("velocity index {v} is not a parabolic component")));
    }
    let a11 = bs.a11(anchor);
    if !(a11.abs() > 1e-8) {
        return Err(Error::InvalidInput(format!("a11 = {a11} at the anchor")));
    }
    audit_b(&bs, anchor, 0.1, 64)?;
    let (n_par, sigma, name) = (bs.n_par(), bs.sigma(), bs.name());
    let origin = DVector::from_iterator(nb + n_par, anchor.iter().copied().chain(std::iter::repeat_n(0.0, n_par)));
    let spec = SystemSpec::with_origin(name, Reduced { blocks: Arc::new(bs) }, origin)?;
    Ok(ProfileODE {
        spec,
        zeta_index: v,
        n_par,
        sigma,
    })
}

/// First-order block matrix A(u, z) of the profile equations.
pub fn block_matrix<B: BlockSystem>(bs: &B, u: &[f64], z: &[f64]) -> DMatrix<f64> {
    let nb = bs.n_base();
    let mut a = DMatrix::zeros(nb, nb);
    a[(0, 0)] = bs.a11(u) * bs.zeta(u);
    for (j, x) in bs.a21(u).into_iter().enumerate() {
        a[(0, j + 1)] = x;
    }
    for (i, x) in bs.a21_lower(u, z).into_iter().enumerate() {
        a[(i + 1, 0)] = x;
    }
    for (i, row) in bs.a22(u, z).into_iter().enumerate() {
        for (j, x) in row.into_iter().enumerate() {
            a[(i + 1, j + 1)] = x;
        }
    }
    a
}

/// max |A − Aᵗ| for A = A(u, 0).
pub fn symmetry_defect<B: BlockSystem>(bs: &B, u: &[f64]) -> f64 {
    let a = block_matrix(bs, u, &vec![0.0; bs.n_par()]);
    (&a - a.transpose()).amax()
}

/// Defect of the second-order profile equations at (u, u', u'').
pub fn block_residual<B: BlockSystem>(bs: &B, u: &[f64], du: &[f64], d2u: &[f64]) -> DVector<f64> {
    let nb = bs.n_base();
    let z = &du[1..];
    let a = block_matrix(bs, u, z);
    let b = to_dmatrix(&bs.b(u));
    let mut r = a * DVector::from_column_slice(du);
    let visc = b * DVector::from_column_slice(&d2u[1..nb]);
    for i in 0..bs.n_par() {
        r[i + 1] -= visc[i];
    }
    r
}

/// Three-point first and second derivatives at the interior samples of a
/// profile, restricted to the first `n` components.
pub fn profile_derivatives(traj: &Trajectory, n: usize) -> Result<Vec<(f64, Vec<f64>, Vec<f64>, Vec<f64>)>> {
    let s = &traj.samples;
    if s.len() < 5 {
        return Err(Error::InsufficientSamples { got: s.len() });
    }
    let mut out = Vec::with_capacity(s.len() - 2);
    for i in 1..s.len() - 1 {
        let h1 = s[i].t - s[i - 1].t;
        let h2 = s[i + 1].t - s[i].t;
        if !(h1 > 0.0 && h2 > 0.0) {
            continue;
        }
        let (um, u0, up) = (&s[i - 1].u, &s[i].u, &s[i + 1].u);
        let c1 = (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)));
        let c2 = (2.0 / (h1 * (h1 + h2)), -2.0 / (h1 * h2), 2.0 / (h2 * (h1 + h2)));
        let du: Vec<f64> = (0..n).map(|k| c1.0 * um[k] + c1.1 * u0[k] + c1.2 * up[k]).collect();
        let d2u: Vec<f64> = (0..n).map(|k| c2.0 * um[k] + c2.1 * u0[k] + c2.2 * up[k]).collect();
        out.push((s[i].t, u0.as_slice()[..n].to_vec(), du, d2u));
    }
    Ok(out)
}

/// Max-norm defect of the block equations along a reduced profile, with u'
/// and u'' reconstructed by finite differences on the samples.
pub fn residual_check<B: BlockSystem>(bs: &B, profile: &Trajectory) -> Result<f64> {
    let nb = bs.n_base();
    let pts = profile_derivatives(profile, nb)?;
    Ok(pts
        .iter()
        .map(|(_, u, du, d2u)| block_residual(bs, u, du, d2u).amax())
        .fold(0.0, f64::max))
}

/// Blocks given by polynomial tables in the base state u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyBlocks {
    pub n_par: usize,
    #[serde(default)]
    pub sigma: f64,
    pub velocity_index: usize,
    pub a11: Poly,
    pub a21: Vec<Poly>,
    pub a22: Vec<Vec<Poly>>,
    pub b: Vec<Vec<Poly>>,
}

impl PolyBlocks {
    pub fn validate(&self) -> Result<()> {
        let nb = 1 + self.n_par;
        let square = |m: &Vec<Vec<Poly>>| m.len() == self.n_par && m.iter().all(|r| r.len() == self.n_par);
        if self.n_par == 0 || self.a21.len() != self.n_par || !square(&self.a22) || !square(&self.b) {
            return Err(Error::InvalidInput("block shapes do not match n_par".into()));
        }
        if self.velocity_index == 0 || self.velocity_index >= nb {
            return Err(Error::InvalidInput("velocity_index must name a parabolic component".into()));
        }
        std::iter::once(&self.a11)
            .chain(&self.a21)
            .chain(self.a22.iter().flatten())
            .chain(self.b.iter().flatten())
            .try_for_each(|p| p.validate(nb, MAX_INLINE_DEGREE))
    }
}

impl BlockSystem for PolyBlocks {
    fn name(&self) -> String {
        "poly_blocks".into()
    }
    fn n_par(&self) -> usize {
        self.n_par
    }
    fn sigma(&self) -> f64 {
        self.sigma
    }
    fn velocity_index(&self) -> usize {
        self.velocity_index
    }
    fn a11<T: Scalar>(&self, u: &[T]) -> T {
        self.a11.eval(u)
    }
    fn a21<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        self.a21.iter().map(|p| p.eval(u)).collect()
    }
    fn a22<T: Scalar>(&self, u: &[T], _z: &[T]) -> Vec<Vec<T>> {
        self.a22.iter().map(|r| r.iter().map(|p| p.eval(u)).collect()).collect()
    }
    fn b<T: Scalar>(&self, u: &[T]) -> Vec<Vec<T>> {
        self.b.iter().map(|r| r.iter().map(|p| p.eval(u)).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{Jet, JetSpace};
    use crate::singular::{integrate_singular, Output, SingularOptions};
    use proptest::prelude::*;

    fn c(x: f64) -> Poly {
        Poly::from_pairs(&[(x, &[0, 0, 0])])
    }

    /// u = (r, v, s), a11 = 1, A21 = 0, A22 = diag(−1, −2), b = I.
    fn decoupled() -> PolyBlocks {
        PolyBlocks {
            n_par: 2,
            sigma: 0.0,
            velocity_index: 1,
            a11: c(1.0),
            a21: vec![Poly::default(), Poly::default()],
            a22: vec![vec![c(-1.0), Poly::default()], vec![Poly::default(), c(-2.0)]],
            b: vec![vec![c(1.0), Poly::default()], vec![Poly::default(), c(1.0)]],
        }
    }

    /// Coupled blocks with state-dependent entries.
    fn coupled() -> PolyBlocks {
        PolyBlocks {
            n_par: 2,
            sigma: 0.0,
            velocity_index: 1,
            a11: Poly::from_pairs(&[(1.0, &[0, 0, 0]), (0.5, &[1, 0, 0])]),
            a21: vec![c(0.3), Poly::from_pairs(&[(0.2, &[0, 0, 1])])],
            a22: vec![
                vec![Poly::from_pairs(&[(1.0, &[0, 1, 0])]), c(0.1)],
                vec![c(0.1), Poly::from_pairs(&[(0.5, &[0, 1, 0]), (-0.3, &[0, 0, 0])])],
            ],
            b: vec![vec![c(1.0), c(0.2)], vec![c(-0.1), Poly::from_pairs(&[(2.0, &[0, 0, 0]), (1.0, &[1, 0, 0])])]],
        }
    }

    #[test]
    fn small_solve_matches_lu() {
        let m = vec![vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]];
        let rhs = vec![1.0, 2.0, 3.0];
        let x = solve_small(m.clone(), rhs.clone());
        let xm = to_dmatrix(&m).lu().solve(&DVector::from_vec(rhs)).unwrap();
        for i in 0..3 {
            assert!((x[i] - xm[i]).abs() < 1e-14);
        }
        let space = JetSpace::get(1, 2);
        let mj: Vec<Vec<Jet>> = m
            .iter()
            .map(|r| r.iter().map(|&v| Jet::constant_in(&space, v)).collect())
            .collect();
        let rj: Vec<Jet> = (0..3).map(|i| Jet::variable(&space, 0, i as f64 + 1.0)).collect();
        let xj = solve_small(mj, rj);
        assert!((xj[0].value() - xm[0]).abs() < 1e-14);
    }

    #[test]
    fn decoupled_reduction() {
        let ode = reduce(decoupled(), &[0.0, 0.0, 0.0]).unwrap();
        let u = DVector::from_vec(vec![0.3, 0.7, -0.2, 0.1, 0.4]);
        let f = ode.spec.f(&u);
        // w = 0, u' = z, z' = A22 z, all times ζ = 0.7
        let expected = [0.0, 0.07, 0.28, -0.07, -0.56];
        for i in 0..5 {
            assert!((f[i] - expected[i]).abs() < 1e-15, "{f}");
        }
        assert_eq!(ode.spec.zeta(&u), 0.7);
    }

    #[test]
    fn anchor_off_singular_set_is_rejected() {
        assert!(matches!(
            reduce(decoupled(), &[0.0, 0.5, 0.0]),
            Err(Error::OriginNotEquilibrium { .. })
        ));
    }

    #[test]
    fn singular_b_is_rejected() {
        let mut bs = decoupled();
        bs.b[1][1] = Poly::default();
        assert!(matches!(reduce(bs, &[0.0, 0.0, 0.0]), Err(Error::NonInvertibleB { .. })));
    }

    #[test]
    fn residual_of_constant_state() {
        let ode = reduce(coupled(), &[0.2, 0.0, 0.1]).unwrap();
        let u0 = DVector::from_vec(vec![0.2, 0.5, 0.1, 0.0, 0.0]);
        let traj = integrate_singular(
            &ode.spec,
            &u0,
            1.0,
            &SingularOptions::default().output(Output::Uniform(0.1)).without_equilibrium_stop(),
        )
        .unwrap();
        assert!(residual_check(&coupled(), &traj).unwrap() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let ode = reduce(decoupled(), &[0.0, 0.0, 0.0]).unwrap();
        let u0 = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        let traj = integrate_singular(
            &ode.spec,
            &u0,
            0.3,
            &SingularOptions::default().output(Output::Uniform(0.1)).without_equilibrium_stop(),
        )
        .unwrap();
        assert!(matches!(
            residual_check(&decoupled(), &traj),
            Err(Error::InsufficientSamples { got: 4 })
        ));
    }

    fn residual_at(bs: &PolyBlocks, u0: &DVector<f64>, h: f64) -> f64 {
        let anchor = [u0[0], bs.sigma, u0[2]];
        let ode = reduce(bs.clone(), &anchor).unwrap();
        let opts = SingularOptions::with_tolerances(1e-13, 1e-15)
            .output(Output::Uniform(h))
            .without_equilibrium_stop();
        let traj = integrate_singular(&ode.spec, u0, 2.0, &opts).unwrap();
        residual_check(bs, &traj).unwrap()
    }

    #[test]
    fn decoupled_profile_matches_exponentials() {
        let bs = decoupled();
        let ode = reduce(bs.clone(), &[0.0, 0.0, 0.0]).unwrap();
        let u0 = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.1, 0.2]);
        let opts = SingularOptions::with_tolerances(1e-13, 1e-15)
            .output(Output::Uniform(0.25))
            .without_equilibrium_stop();
        let traj = integrate_singular(&ode.spec, &u0, 2.0, &opts).unwrap();
        for s in &traj.samples {
            let x = s.t;
            let z1 = 0.1 * (-x).exp();
            let z2 = 0.2 * (-2.0 * x).exp();
            assert!((s.u[3] - z1).abs() < 1e-11);
            assert!((s.u[4] - z2).abs() < 1e-11);
            assert!((s.u[1] - (1.0 + 0.1 * (1.0 - (-x).exp()))).abs() < 1e-11);
            assert_eq!(s.u[0], 0.0);
        }
    }

    #[test]
    fn residual_converges_at_second_order() {
        for bs in [decoupled(), coupled()] {
            let u0 = DVector::from_vec(vec![0.1, 1.0, 0.0, 0.1, 0.2]);
            let r: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&h| residual_at(&bs, &u0, h)).collect();
            for w in r.windows(2) {
                let order = (w[0] / w[1]).log2();
                assert!(order > 1.8 && order < 2.2, "{r:?}");
            }
        }
    }

    #[test]
    fn poly_blocks_json() {
        let bs = coupled();
        let s = serde_json::to_string(&bs).unwrap();
        let back: PolyBlocks = serde_json::from_str(&s).unwrap();
        assert_eq!(back, bs);
        back.validate().unwrap();
        let mut bad = bs;
        bad.a21.pop();
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn zeta_is_velocity(u in proptest::collection::vec(-2.0f64..2.0, 5)) {
            let ode = reduce(coupled(), &[0.0, 0.0, 0.0]).unwrap();
            let uv = DVector::from_vec(u.clone());
            prop_assert_eq!(ode.spec.zeta(&uv), u[1]);
        }

        #[test]
        fn field_vanishes_without_gradients(u in proptest::collection::vec(-0.5f64..0.5, 3)) {
            let ode = reduce(coupled(), &[0.0, 0.0, 0.0]).unwrap();
            let uz = ode.state(&u, &[0.0, 0.0]);
            prop_assert_eq!(ode.spec.f(&uz).amax(), 0.0);
        }

        #[test]
        fn reduced_field_solves_block_equations(
            u in proptest::collection::vec(-0.4f64..0.4, 3),
            z in proptest::collection::vec(-1.0f64..1.0, 2),
        ) {
            // (w, z') recovered from F/ζ must satisfy the block equations
            let bs = coupled();
            let ode = reduce(bs.clone(), &[0.0, 0.0, 0.0]).unwrap();
            let mut u = u;
            u[1] = 0.3 + u[1].abs();
            let f = ode.spec.f(&ode.state(&u, &z)) / u[1];
            let du = [f[0], z[0], z[1]];
            let d2u = [0.0, f[3], f[4]];
            prop_assert!(block_residual(&bs, &u, &du, &d2u).amax() < 1e-12);
        }
    }
}
