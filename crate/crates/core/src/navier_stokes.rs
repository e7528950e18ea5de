//! Steady and travelling viscous profiles of 1-D compressible Navier–Stokes
//! in Eulerian coordinates, for a polytropic gas.
//!
//! The primitive profile equations for u = (ρ, v, e) with ζ = v − σ are
//!
//! ```text
//! ζ ρ' + ρ v'                            = 0
//! ρ ζ v' + p'                            = (ν v')'
//! ρ ζ e' + p v'                          = (κ e')' + ν v'²
//! ```
//!
//! with κ = k (γ−1)/R. Multiplying by diag(p_ρ/ρ², 1/ρ, p_e/(ρ p)) gives a
//! block system whose first-order part is symmetric at z = 0.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::block::{block_residual, profile_derivatives, reduce, BlockSystem, ProfileODE};
use crate::error::{Error, Result};
use crate::hypotheses::{audit, EquilibriumManifold, HypothesisOptions, HypothesisReport};
use crate::jet::Scalar;
use crate::manifolds::{stable_fiber, StableOptions};
use crate::singular::{integrate_singular, Output, SingularOptions, Termination, Trajectory};

/// Transport coefficient as a function of density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficient {
    Constant(f64),
    /// scale · ρ^exponent
    Power { scale: f64, exponent: f64 },
}

impl Coefficient {
    pub fn eval<T: Scalar>(&self, rho: &T) -> T {
        match *self {
            Coefficient::Constant(c) => rho.constant(c),
            Coefficient::Power { scale, exponent } => rho.powf(exponent) * scale,
        }
    }

    pub fn derivative<T: Scalar>(&self, rho: &T) -> T {
        match *self {
            Coefficient::Constant(_) => rho.constant(0.0),
            Coefficient::Power { scale, exponent } => rho.powf(exponent - 1.0) * (scale * exponent),
        }
    }

    fn is_positive(&self) -> bool {
        match *self {
            Coefficient::Constant(c) => c > 0.0,
            Coefficient::Power { scale, exponent } => scale > 0.0 && exponent.is_finite(),
        }
    }
}

/// Polytropic gas p = (γ−1) ρ e with density-dependent viscosity and heat
/// conduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GasModel {
    pub gamma: f64,
    pub r_gas: f64,
    pub nu: Coefficient,
    pub k_heat: Coefficient,
    pub rho_min: f64,
}

impl Default for GasModel {
    fn default() -> Self {
        GasModel {
            gamma: 1.4,
            r_gas: 1.0,
            nu: Coefficient::Constant(1.0),
            k_heat: Coefficient::Constant(1.0),
            rho_min: 0.1,
        }
    }
}

impl GasModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.r_gas > 0.0 && self.r_gas.is_finite()) {
            return Err(Error::InvalidInput(format!("R must be positive, got {}", self.r_gas)));
        }
        if !(self.rho_min > 0.0) {
            return Err(Error::InvalidInput("rho_min must be positive".into()));
        }
        if !self.nu.is_positive() || !self.k_heat.is_positive() {
            return Err(Error::InvalidInput("viscosity and heat conduction must be positive".into()));
        }
        Ok(())
    }

    pub fn pressure<T: Scalar>(&self, rho: &T, e: &T) -> T {
        rho.clone() * e.clone() * (self.gamma - 1.0)
    }

    pub fn p_rho<T: Scalar>(&self, _rho: &T, e: &T) -> T {
        e.clone() * (self.gamma - 1.0)
    }

    pub fn p_e<T: Scalar>(&self, rho: &T, _e: &T) -> T {
        rho.clone() * (self.gamma - 1.0)
    }

    /// Conductivity for e: k θ_x = κ e_x.
    pub fn kappa<T: Scalar>(&self, rho: &T) -> T {
        self.k_heat.eval(rho) * ((self.gamma - 1.0) / self.r_gas)
    }

    pub fn kappa_prime<T: Scalar>(&self, rho: &T) -> T {
        self.k_heat.derivative(rho) * ((self.gamma - 1.0) / self.r_gas)
    }

    /// Squared sound speed p_ρ + p p_e/ρ².
    pub fn sound_speed_sq(&self, rho: f64, e: f64) -> f64 {
        self.p_rho(&rho, &e) + self.pressure(&rho, &e) * self.p_e(&rho, &e) / (rho * rho)
    }
}

/// θ = e (γ−1)/R.
pub fn polytropic_theta(gas: &GasModel, e: f64) -> Result<f64> {
    if !(e > 0.0) {
        return Err(Error::NonPositiveEnergy { e });
    }
    Ok(e * (gas.gamma - 1.0) / gas.r_gas)
}

/// a11 = p_ρ/ρ².
pub fn ns_a11(gas: &GasModel, rho: f64, e: f64) -> f64 {
    gas.p_rho(&rho, &e) / (rho * rho)
}

/// Symmetrized NS blocks for u = (ρ, v, e), z = (v', e').
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsBlocks {
    pub gas: GasModel,
    pub sigma: f64,
}

impl NsBlocks {
    /// p_e/(ρ p), the weight of the energy equation.
    fn s3<T: Scalar>(&self, rho: &T, e: &T) -> T {
        self.gas.p_e(rho, e) / (rho.clone() * self.gas.pressure(rho, e))
    }

    /// diag(p_ρ/ρ², 1/ρ, p_e/(ρ p)).
    pub fn symmetrizer(&self, u: &[f64]) -> DMatrix<f64> {
        let (rho, e) = (u[0], u[2]);
        DMatrix::from_diagonal(&DVector::from_vec(vec![
            ns_a11(&self.gas, rho, e),
            1.0 / rho,
            self.s3(&rho, &e),
        ]))
    }
}

impl BlockSystem for NsBlocks {
    fn name(&self) -> String {
        "navier_stokes".into()
    }
    fn n_par(&self) -> usize {
        2
    }
    fn sigma(&self) -> f64 {
        self.sigma
    }
    fn velocity_index(&self) -> usize {
        1
    }
    fn a11<T: Scalar>(&self, u: &[T]) -> T {
        let rho = &u[0];
        self.gas.p_rho(rho, &u[2]) / (rho.clone() * rho.clone())
    }
    fn a21<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let rho = &u[0];
        vec![self.gas.p_rho(rho, &u[2]) / rho.clone(), rho.constant(0.0)]
    }
    fn a21_lower<T: Scalar>(&self, u: &[T], z: &[T]) -> Vec<T> {
        let (rho, e) = (&u[0], &u[2]);
        let s3 = self.s3(rho, e);
        vec![
            (self.gas.p_rho(rho, e) - self.gas.nu.derivative(rho) * z[0].clone()) / rho.clone(),
            -(s3 * self.gas.kappa_prime(rho) * z[1].clone()),
        ]
    }
    fn a22<T: Scalar>(&self, u: &[T], z: &[T]) -> Vec<Vec<T>> {
        let (rho, e) = (&u[0], &u[2]);
        let zeta = self.zeta(u);
        let pe_rho = self.gas.p_e(rho, e) / rho.clone();
        let s3 = self.s3(rho, e);
        vec![
            vec![zeta.clone(), pe_rho.clone()],
            vec![
                pe_rho - s3 * self.gas.nu.eval(rho) * z[0].clone(),
                self.gas.p_e(rho, e) * zeta / self.gas.pressure(rho, e),
            ],
        ]
    }
    fn b<T: Scalar>(&self, u: &[T]) -> Vec<Vec<T>> {
        let (rho, e) = (&u[0], &u[2]);
        vec![
            vec![self.gas.nu.eval(rho) / rho.clone(), rho.constant(0.0)],
            vec![rho.constant(0.0), self.s3(rho, e) * self.gas.kappa(rho)],
        ]
    }
    fn e_mat(&self, u: &[f64]) -> Option<DMatrix<f64>> {
        let (rho, e) = (u[0], u[2]);
        Some(DMatrix::from_diagonal(&DVector::from_vec(vec![
            ns_a11(&self.gas, rho, e),
            1.0,
            self.gas.p_e(&rho, &e) / self.gas.pressure(&rho, &e),
        ])))
    }
}

/// Defect of the primitive mass, momentum and energy equations.
pub fn primitive_residual(gas: &GasModel, sigma: f64, u: &[f64], du: &[f64], d2u: &[f64]) -> [f64; 3] {
    let (rho, v, e) = (u[0], u[1], u[2]);
    let (r1, v1, e1) = (du[0], du[1], du[2]);
    let zeta = v - sigma;
    let p = gas.pressure(&rho, &e);
    let (nu, nu1) = (gas.nu.eval(&rho), gas.nu.derivative(&rho));
    let (ka, ka1) = (gas.kappa(&rho), gas.kappa_prime(&rho));
    [
        zeta * r1 + rho * v1,
        rho * zeta * v1 + gas.p_rho(&rho, &e) * r1 + gas.p_e(&rho, &e) * e1 - nu1 * r1 * v1 - nu * d2u[1],
        rho * zeta * e1 + p * v1 - ka1 * r1 * e1 - ka * d2u[2] - nu * v1 * v1,
    ]
}

/// Compares the block equations with the symmetrizer applied to the
/// primitive equations at `n` random (u, u', u'').
pub fn check_derivation<B: BlockSystem>(bs: &B, gas: &GasModel, sigma: f64, n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = NsBlocks { gas: *gas, sigma };
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let u = [
            rng.gen_range(gas.rho_min..3.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.1..3.0),
        ];
        let du: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d2u: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs = block_residual(bs, &u, &du, &d2u);
        let rhs = ns.symmetrizer(&u) * DVector::from_row_slice(&primitive_residual(gas, sigma, &u, &du, &d2u));
        let scale = 1.0 + rhs.amax();
        worst = worst.max((lhs - rhs).amax() / scale);
    }
    if worst > 1e-12 {
        return Err(Error::DerivationInconsistency { residual: worst });
    }
    Ok(worst)
}

/// The symmetrized blocks, checked against the primitive equations.
pub fn build_steady_system(gas: &GasModel, sigma: f64) -> Result<NsBlocks> {
    gas.validate()?;
    let bs = NsBlocks { gas: *gas, sigma };
    check_derivation(&bs, gas, sigma, 256, 0)?;
    Ok(bs)
}

/// Reduced singular system anchored at (ρ, σ, e, 0, 0).
pub fn ns_profile_ode(gas: &GasModel, sigma: f64, rho: f64, e: f64) -> Result<ProfileODE> {
    polytropic_theta(gas, e)?;
    if rho < gas.rho_min {
        return Err(Error::InvalidInput(format!("density {rho} below rho_min {}", gas.rho_min)));
    }
    reduce(build_steady_system(gas, sigma)?, &[rho, sigma, e])
}

/// The constant states {z = 0} near the anchor, parameterized by (ρ, v, e).
pub fn ns_equilibrium_manifold(ode: &ProfileODE) -> EquilibriumManifold {
    ode.constant_states()
}

/// H1..H5 for the reduced system around (ρ, σ, e, 0, 0).
pub fn ns_hypotheses(gas: &GasModel, sigma: f64, rho: f64, e: f64, opts: &HypothesisOptions) -> Result<HypothesisReport> {
    let ode = ns_profile_ode(gas, sigma, rho, e)?;
    audit(&ode.spec, Some(&ns_equilibrium_manifold(&ode)), opts)
}

#[derive(Debug, Clone)]
pub struct ProfileOptions {
    /// Distance along the stable fiber from the constant state.
    pub amplitude: f64,
    /// Output spacing in x.
    pub spacing: f64,
    pub rtol: f64,
    pub atol: f64,
    pub order: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            amplitude: 1e-3,
            spacing: 0.05,
            rtol: 1e-12,
            atol: 1e-14,
            order: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NsProfile {
    pub trajectory: Trajectory,
    /// The constant state whose stable fiber was followed.
    pub base: DVector<f64>,
    /// Slowest stable rate at the base, in τ.
    pub decay_rate: f64,
    pub ode: ProfileODE,
}

/// Profile leaving the constant state `left = (ρ, v, e)` along its stable
/// fiber, integrated in x over [0, length].
pub fn compute_profile(
    gas: &GasModel,
    left: [f64; 3],
    sigma: f64,
    length: f64,
    opts: &ProfileOptions,
) -> Result<NsProfile> {
    let [rho, v, e] = left;
    if !(v - sigma > 0.0) {
        return Err(Error::InvalidInput(format!("left state needs v > σ, got v = {v}")));
    }
    let ode = ns_profile_ode(gas, sigma, rho, e)?;
    let base = ode.state(&left, &[0.0, 0.0]);
    let sopts = StableOptions {
        order: opts.order,
        ..Default::default()
    };
    let fiber = stable_fiber(&ode.spec, &base, &sopts)?;
    let mut x = DVector::zeros(fiber.stable_dim);
    x[0] = opts.amplitude;
    let u0 = fiber.manifold.point(&x);
    let iopts = SingularOptions::with_tolerances(opts.rtol, opts.atol)
        .output(Output::Uniform(opts.spacing))
        .without_equilibrium_stop();
    let trajectory = integrate_singular(&ode.spec, &u0, length, &iopts)?;
    if let Some(s) = trajectory.samples.iter().find(|s| !(s.zeta > 0.0)) {
        return Err(Error::SignViolation { t: s.t });
    }
    if trajectory.termination == Termination::SingularityReached {
        return Err(Error::SignViolation {
            t: trajectory.last().t,
        });
    }
    Ok(NsProfile {
        trajectory,
        base,
        decay_rate: fiber.decay_rate,
        ode,
    })
}

/// Max-norm defect of the primitive equations along a profile, with
/// derivatives reconstructed by finite differences.
pub fn primitive_residual_check(gas: &GasModel, sigma: f64, profile: &Trajectory) -> Result<f64> {
    let pts = profile_derivatives(profile, 3)?;
    Ok(pts
        .iter()
        .flat_map(|(_, u, du, d2u)| primitive_residual(gas, sigma, u, du, d2u))
        .fold(0.0, |m, r| m.max(r.abs())))
}

/// Mass, momentum and energy fluxes at a state (ρ, v, e, v', e').
pub fn fluxes(gas: &GasModel, sigma: f64, uz: &[f64]) -> [f64; 3] {
    let (rho, v, e, v1, e1) = (uz[0], uz[1], uz[2], uz[3], uz[4]);
    let zeta = v - sigma;
    let p = gas.pressure(&rho, &e);
    let nu = gas.nu.eval(&rho);
    let total = rho * e + 0.5 * rho * v * v;
    [
        rho * zeta,
        rho * v * zeta + p - nu * v1,
        zeta * total + v * p - gas.kappa(&rho) * e1 - nu * v * v1,
    ]
}

/// Largest drift of the fluxes from their initial values.
pub fn flux_defect(gas: &GasModel, sigma: f64, profile: &Trajectory) -> f64 {
    let Some(first) = profile.samples.first() else {
        return 0.0;
    };
    let f0 = fluxes(gas, sigma, first.u.as_slice());
    profile
        .samples
        .iter()
        .flat_map(|s| {
            let f = fluxes(gas, sigma, s.u.as_slice());
            (0..3).map(move |i| (f[i] - f0[i]).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::{symmetry_defect, block_matrix};
    use crate::hypotheses::Verdict;
    use proptest::prelude::*;

    fn gas() -> GasModel {
        GasModel::default()
    }

    #[test]
    fn theta_examples() {
        let g = GasModel {
            r_gas: 8.314,
            ..gas()
        };
        assert!((polytropic_theta(&g, 8.314).unwrap() - 0.4).abs() < 1e-15);
        let g2 = GasModel { gamma: 2.0, ..gas() };
        assert_eq!(polytropic_theta(&g2, 1.0).unwrap(), 1.0);
        let g3 = GasModel { gamma: 1.0 + 1e-12, ..gas() };
        assert!(polytropic_theta(&g3, 1.0).unwrap() < 1e-11);
        assert!(matches!(polytropic_theta(&gas(), 0.0), Err(Error::NonPositiveEnergy { .. })));
        assert!(matches!(polytropic_theta(&gas(), -1.0), Err(Error::NonPositiveEnergy { .. })));
    }

    #[test]
    fn a11_examples() {
        let g = gas();
        // central difference of p in ρ
        let h = 1e-6;
        let p_rho = (g.pressure(&(1.0 + h), &1.0) - g.pressure(&(1.0 - h), &1.0)) / (2.0 * h);
        assert!((ns_a11(&g, 1.0, 1.0) - p_rho).abs() < 1e-9);
        assert!((ns_a11(&g, 1.0, 1.0) - 0.4).abs() < 1e-15);
        assert!((ns_a11(&g, 2.0, 1.0) - 0.1).abs() < 1e-15);
        for i in 0..20 {
            for j in 1..20 {
                assert!(ns_a11(&g, 0.1 + 0.2 * i as f64, 0.15 * j as f64) > 0.0);
            }
        }
    }

    #[test]
    fn invalid_gas() {
        assert!(GasModel { gamma: 1.0, ..gas() }.validate().is_err());
        assert!(GasModel {
            nu: Coefficient::Constant(0.0),
            ..gas()
        }
        .validate()
        .is_err());
        assert!(build_steady_system(&GasModel { r_gas: -1.0, ..gas() }, 0.0).is_err());
    }

    #[test]
    fn derivation_is_consistent() {
        for sigma in [0.0, 0.3] {
            let g = GasModel {
                nu: Coefficient::Power { scale: 1.5, exponent: 0.7 },
                k_heat: Coefficient::Power { scale: 0.8, exponent: -0.5 },
                ..gas()
            };
            let bs = NsBlocks { gas: g, sigma };
            assert!(check_derivation(&bs, &g, sigma, 500, 7).unwrap() < 1e-13);
        }
    }

    /// NS blocks with the w-coupling of the first reduced row sign-flipped.
    struct FlippedCoupling(NsBlocks);

    impl BlockSystem for FlippedCoupling {
        fn n_par(&self) -> usize {
            2
        }
        fn sigma(&self) -> f64 {
            self.0.sigma
        }
        fn velocity_index(&self) -> usize {
            1
        }
        fn a11<T: Scalar>(&self, u: &[T]) -> T {
            -self.0.a11(u)
        }
        fn a21<T: Scalar>(&self, u: &[T]) -> Vec<T> {
            self.0.a21(u)
        }
        fn a21_lower<T: Scalar>(&self, u: &[T], z: &[T]) -> Vec<T> {
            self.0.a21_lower(u, z)
        }
        fn a22<T: Scalar>(&self, u: &[T], z: &[T]) -> Vec<Vec<T>> {
            self.0.a22(u, z)
        }
        fn b<T: Scalar>(&self, u: &[T]) -> Vec<Vec<T>> {
            self.0.b(u)
        }
    }

    #[test]
    fn wrong_sign_is_caught() {
        let bs = FlippedCoupling(NsBlocks { gas: gas(), sigma: 0.0 });
        assert!(matches!(
            check_derivation(&bs, &gas(), 0.0, 50, 1),
            Err(Error::DerivationInconsistency { .. })
        ));
    }

    #[test]
    fn travelling_blocks_shift_by_e() {
        let a0 = NsBlocks { gas: gas(), sigma: 0.0 };
        let a1 = NsBlocks { gas: gas(), sigma: 0.35 };
        let u = [1.3, 0.2, 0.8];
        let z = [0.0, 0.0];
        let diff = block_matrix(&a0, &u, &z) - block_matrix(&a1, &u, &z);
        let e = a1.e_mat(&u).unwrap() * 0.35;
        assert!((diff - e).amax() < 1e-15);
    }

    #[test]
    fn reduced_layout() {
        let ode = ns_profile_ode(&gas(), 0.0, 1.0, 1.0).unwrap();
        assert_eq!(ode.spec.dim(), 5);
        assert_eq!(ode.zeta_index, 1);
        let u = DVector::from_vec(vec![1.2, 0.3, 0.9, 0.0, 0.0]);
        assert_eq!(ode.spec.f(&u).amax(), 0.0);
        // stable direction at the anchor: eigenvalue −p_ρ ρ/ν = −0.4
        let split = crate::manifolds::origin_split(&ode.spec, 1e-8).unwrap();
        assert_eq!(split.center.ncols(), 4);
        assert_eq!(split.stable_eigs.len(), 1);
        assert!((split.stable_eigs[0].0 + 0.4).abs() < 1e-12);
    }

    #[test]
    fn anchor_rejects_vacuum_and_bad_energy() {
        assert!(ns_profile_ode(&gas(), 0.0, 0.05, 1.0).is_err());
        assert!(matches!(
            ns_profile_ode(&gas(), 0.0, 1.0, -1.0),
            Err(Error::NonPositiveEnergy { .. })
        ));
    }

    #[test]
    fn zero_amplitude_is_constant() {
        let opts = ProfileOptions {
            amplitude: 0.0,
            ..Default::default()
        };
        let p = compute_profile(&gas(), [1.0, 0.2, 1.0], 0.0, 2.0, &opts).unwrap();
        assert!(p.trajectory.len() > 10);
        for s in &p.trajectory.samples {
            assert_eq!(s.u, p.base);
        }
    }

    #[test]
    fn profile_decays_and_keeps_sign() {
        let g = gas();
        let p = compute_profile(&g, [1.0, 0.2, 1.0], 0.0, 8.0, &ProfileOptions::default()).unwrap();
        let traj = &p.trajectory;
        assert!(traj.samples.iter().all(|s| s.u[1] > 0.0));
        let zn: Vec<f64> = traj.samples.iter().map(|s| s.u.rows(3, 2).norm()).collect();
        assert!(zn[0] > 1e-4);
        // monotone decay once the fiber direction dominates
        for w in zn[5..].windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(zn.last().unwrap() / zn[0] < 1e-4);
        assert!(flux_defect(&g, 0.0, traj) < 1e-11);
    }

    #[test]
    fn profile_residual_is_second_order() {
        let g = gas();
        let r: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| {
                let opts = ProfileOptions {
                    spacing: h,
                    rtol: 1e-13,
                    atol: 1e-16,
                    ..Default::default()
                };
                let p = compute_profile(&g, [1.0, 0.2, 1.0], 0.0, 4.0, &opts).unwrap();
                let bs = NsBlocks { gas: g, sigma: 0.0 };
                let rb = crate::block::residual_check(&bs, &p.trajectory).unwrap();
                let rp = primitive_residual_check(&g, 0.0, &p.trajectory).unwrap();
                assert!(rb > 0.0 && rp > 0.0);
                rp
            })
            .collect();
        for w in r.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "{r:?}");
        }
    }

    #[test]
    fn hypotheses_hold_at_rest_state() {
        let r = ns_hypotheses(&gas(), 0.0, 1.0, 1.0, &HypothesisOptions::default()).unwrap();
        assert_eq!(r.verdicts(), [Verdict::Pass; 5], "{}", r.to_json());
    }

    proptest! {
        #[test]
        fn symmetric_at_zero_gradient(rho in 0.1f64..3.0, v in -2.0f64..2.0, e in 0.05f64..3.0, sigma in -1.0f64..1.0) {
            let bs = NsBlocks { gas: gas(), sigma };
            prop_assert!(symmetry_defect(&bs, &[rho, v, e]) < 1e-14);
        }

        #[test]
        fn zeta_is_v(rho in 0.1f64..3.0, v in -2.0f64..2.0, e in 0.05f64..3.0, z1 in -1.0f64..1.0, z2 in -1.0f64..1.0) {
            let ode = ns_profile_ode(&gas(), 0.0, 1.0, 1.0).unwrap();
            let u = DVector::from_vec(vec![rho, v, e, z1, z2]);
            prop_assert_eq!(ode.spec.zeta(&u), v);
        }

        #[test]
        fn constant_states_are_equilibria(rho in 0.1f64..3.0, v in -2.0f64..2.0, e in 0.05f64..3.0) {
            let ode = ns_profile_ode(&gas(), 0.0, 1.0, 1.0).unwrap();
            prop_assert_eq!(ode.spec.f(&ode.state(&[rho, v, e], &[0.0, 0.0])).amax(), 0.0);
        }
    }
}
