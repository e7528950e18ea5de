//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use singode::builtins::{fast_blowup_time, load_example};
use singode::hypotheses::{audit, EquilibriumManifold, HypothesisOptions, Verdict};
use singode::inline::{Poly, PolySystem};
use singode::manifolds::{
    center_manifold, decompose_orbit, stable_fiber, uniformly_stable_manifold, verify_sign_preservation,
    DecomposeOptions, StableOptions,
};
use singode::navier_stokes::{compute_profile, ns_hypotheses, ns_profile_ode, primitive_residual_check, GasModel, ProfileOptions};
use singode::singular::{integrate_singular, time_rescale, Output, SingularOptions, Termination, Trajectory};
use singode::system::SystemSpec;

const SEED: u64 = 20_240_601;

// criterion 1
const TOL_BLOWUP_TIME: f64 = 1e-3;
const N_RANDOM_BLOWUP: usize = 20;
const ORACLE_STEP: f64 = 1e-5;
// criterion 2
const TOL_SLAVING: f64 = 1e-6;
const TOL_PERT_LINEAR: f64 = 1e-12;
// criterion 4
const TOL_QUADRATIC_COEFF: f64 = 1e-10;
const RESIDUAL_RATIO_FACTOR: f64 = 2.0;
// criterion 5
const N_SIGN_ORBITS: usize = 50;
const SIGN_HORIZON: f64 = 10.0;
// criterion 6
const EXPONENT_TARGET: f64 = 1.0;
const EXPONENT_TOL: f64 = 0.2;
// criterion 7
const MIN_ORDER: f64 = 1.8;
const NS_RUNTIME_LIMIT_S: f64 = 300.0;

type Outcome = (bool, String);

/// Zero of u1² along the regular system w' = −2 u2, u2' = −u2, by RK4
/// with a fixed step and linear interpolation at the crossing.
fn rk4_blowup_time(u0: &DVector<f64>) -> f64 {
    let f = |y: [f64; 2]| [-2.0 * y[1], -y[1]];
    let mut y = [u0[0] * u0[0], u0[1]];
    let mut t = 0.0;
    let h = ORACLE_STEP;
    loop {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
        let next = [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if next[0] <= 0.0 {
            return t + h * y[0] / (y[0] - next[0]);
        }
        y = next;
        t += h;
    }
}

fn detected_blowup(spec: &SystemSpec, u0: &DVector<f64>, horizon: f64) -> Option<f64> {
    let traj = integrate_singular(spec, u0, horizon, &SingularOptions::default()).ok()?;
    (traj.termination == Termination::SingularityReached).then(|| traj.last().t)
}

fn criterion_1() -> Outcome {
    let fb = load_example("fast_blowup").unwrap();
    let u0 = DVector::from_vec(vec![1.0, 1.0]);
    let Some(t) = detected_blowup(&fb.spec, &u0, 2.0) else {
        return (false, "no singularity detected from (1, 1)".into());
    };
    let mut worst = (t - LN_2).abs();
    let mut oracle_gap: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..N_RANDOM_BLOWUP {
        let u1: f64 = rng.gen_range(0.1..1.5);
        let u2: f64 = rng.gen_range(0.55 * u1 * u1..2.0);
        let u0 = DVector::from_vec(vec![u1, u2]);
        let t_star = fast_blowup_time(&u0).unwrap();
        oracle_gap = oracle_gap.max((rk4_blowup_time(&u0) - t_star).abs());
        match detected_blowup(&fb.spec, &u0, t_star + 1.0) {
            Some(t) => worst = worst.max((t - t_star).abs()),
            None => return (false, format!("no singularity detected from {:?}", u0.as_slice())),
        }
    }
    (
        worst <= TOL_BLOWUP_TIME && oracle_gap <= TOL_BLOWUP_TIME,
        format!("max |t_detected - t*| = {worst:.2e}, closed form vs RK4 = {oracle_gap:.2e} (tol {TOL_BLOWUP_TIME:e})"),
    )
}

fn criterion_2() -> Outcome {
    let sys = load_example("linear_slaving").unwrap();
    let bundle = uniformly_stable_manifold(&sys.spec, &sys.equilibrium_manifold(), 5, &StableOptions::default()).unwrap();
    let mut err: f64 = 0.0;
    let mut pert: f64 = 0.0;
    for eps in [1.0, 0.1, 0.01] {
        let u0 = DVector::from_vec(vec![1.0, 1.0, eps]);
        let opts = SingularOptions::with_tolerances(1e-13, 1e-16)
            .output(Output::Uniform(0.01))
            .without_equilibrium_stop();
        let traj = integrate_singular(&sys.spec, &u0, 1.0, &opts).unwrap();
        for s in &traj.samples {
            let exact = [(-5.0 * s.t).exp(), (-s.t / eps).exp(), eps];
            for i in 0..3 {
                err = err.max((s.u[i] - exact[i]).abs());
            }
        }
        match decompose_orbit(&sys.spec, &bundle, &traj, &DecomposeOptions::default()) {
            Ok(dec) => pert = pert.max(dec.max_pert),
            Err(e) => return (false, format!("decomposition failed at eps = {eps}: {e}")),
        }
    }
    (
        err <= TOL_SLAVING && pert <= TOL_PERT_LINEAR,
        format!("max state error = {err:.2e} (tol {TOL_SLAVING:e}), max |pert| = {pert:.2e} (tol {TOL_PERT_LINEAR:e})"),
    )
}

fn criterion_3() -> Outcome {
    let opts = HypothesisOptions::default();
    let verdicts = |name: &str| {
        let sys = load_example(name).unwrap();
        audit(&sys.spec, Some(&sys.equilibrium_manifold()), &opts).unwrap().verdicts()
    };
    let rot = verdicts("rotation");
    let fb = verdicts("fast_blowup");
    let ls = verdicts("linear_slaving");
    let ns = ns_hypotheses(&GasModel::default(), 0.0, 1.0, 1.0, &opts).unwrap().verdicts();
    let ok = rot[1] == Verdict::Fail
        && fb[3] == Verdict::Fail
        && ls == [Verdict::Pass; 5]
        && ns == [Verdict::Pass; 5];
    let show = |v: [Verdict; 5]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("/");
    (
        ok,
        format!(
            "rotation {}, fast_blowup {}, linear_slaving {}, navier_stokes {}",
            show(rot),
            show(fb),
            show(ls),
            show(ns)
        ),
    )
}

/// x' = xy, y' = −y − x², ζ = x.
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

fn criterion_4() -> Outcome {
    let spec = quadratic();
    let cm = center_manifold(&spec, 3).unwrap();
    let coeff = cm.coefficient(&[2])[0];
    let mut ok = (coeff + 1.0).abs() <= TOL_QUADRATIC_COEFF;
    let mut ratios = Vec::new();
    // h is even in x, so odd orders are the ones whose truncation error
    // starts exactly at degree order + 1
    for order in [3, 5] {
        let cm = center_manifold(&spec, order).unwrap();
        let expected = 2f64.powi(order as i32 + 1);
        let radii = [1e-3, 2e-3, 4e-3, 8e-3];
        for w in radii.windows(2) {
            let ratio = cm.residual_on_sphere(&spec, w[1]) / cm.residual_on_sphere(&spec, w[0]);
            ok &= ratio >= expected / RESIDUAL_RATIO_FACTOR && ratio <= expected * RESIDUAL_RATIO_FACTOR;
            ratios.push(format!("{order}:{ratio:.1}"));
        }
    }
    (
        ok,
        format!("degree-2 coefficient = {coeff:.12}, doubling ratios [{}]", ratios.join(" ")),
    )
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let ls = load_example("linear_slaving").unwrap();
    let gas = GasModel::default();
    let opts = SingularOptions::default().without_equilibrium_stop();
    let mut kept = 0;
    let mut min_zeta = f64::INFINITY;
    for i in 0..N_SIGN_ORBITS {
        let z0 = log_uniform(&mut rng, 1e-4, 1e-1);
        let traj = if i % 2 == 0 {
            let u0 = DVector::from_vec(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), z0]);
            integrate_singular(&ls.spec, &u0, SIGN_HORIZON, &opts)
        } else {
            let rho = rng.gen_range(0.8..1.2);
            let e = rng.gen_range(0.8..1.2);
            let ode = ns_profile_ode(&gas, 0.0, rho, e).unwrap();
            let base = ode.state(&[rho, z0, e], &[0.0, 0.0]);
            let fiber = stable_fiber(&ode.spec, &base, &StableOptions::default()).unwrap();
            let x = DVector::from_element(fiber.stable_dim, rng.gen_range(-1e-3..1e-3));
            integrate_singular(&ode.spec, &fiber.manifold.point(&x), SIGN_HORIZON, &opts)
        };
        if let Ok(traj) = traj {
            let check = verify_sign_preservation(&traj);
            if check.preserved && traj.termination == Termination::HorizonReached {
                kept += 1;
            }
            min_zeta = min_zeta.min(check.min_zeta);
        }
    }
    let fb = load_example("fast_blowup").unwrap();
    let mut crossings = 0;
    for _ in 0..N_SIGN_ORBITS {
        let u0 = DVector::from_vec(vec![log_uniform(&mut rng, 1e-4, 1e-1), rng.gen_range(0.1..1.0)]);
        let traj = integrate_singular(&fb.spec, &u0, SIGN_HORIZON, &opts).unwrap();
        if !verify_sign_preservation(&traj).preserved {
            crossings += 1;
        }
    }
    (
        kept == N_SIGN_ORBITS && crossings >= 1,
        format!(
            "{kept}/{N_SIGN_ORBITS} passing-system orbits keep zeta > 0 (min {min_zeta:.2e}); fast_blowup reached S on {crossings}/{N_SIGN_ORBITS}"
        ),
    )
}

/// Linear slaving plus ε u2³ in the first component.
fn weakly_nonlinear() -> SystemSpec {
    let sys = PolySystem::new(
        3,
        vec![
            Poly::from_pairs(&[(-5.0, &[1, 0, 1]), (1.0, &[0, 3, 1])]),
            Poly::from_pairs(&[(-1.0, &[0, 1, 0])]),
            Poly::default(),
        ],
        Poly::from_pairs(&[(1.0, &[0, 0, 1])]),
    )
    .unwrap();
    SystemSpec::new("weakly_nonlinear", sys).unwrap()
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn criterion_6() -> Outcome {
    let spec = weakly_nonlinear();
    let eq = EquilibriumManifold::affine(DVector::zeros(3), DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]));
    let bundle = match uniformly_stable_manifold(&spec, &eq, 5, &StableOptions::default()) {
        Ok(b) => b,
        Err(e) => return (false, format!("stable manifold failed: {e}")),
    };
    let opts = SingularOptions::with_tolerances(1e-12, 1e-15).without_equilibrium_stop();
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for k in 3..=8 {
        let eps = 2f64.powi(-k);
        let u0 = DVector::from_vec(vec![1.0, 1.0, eps]);
        let traj = integrate_singular(&spec, &u0, 2.0, &opts).unwrap();
        match decompose_orbit(&spec, &bundle, &traj, &DecomposeOptions::default()) {
            Ok(dec) => {
                lx.push(eps.ln());
                ly.push(dec.max_pert.ln());
            }
            Err(e) => return (false, format!("decomposition failed at eps = {eps}: {e}")),
        }
    }
    let p = slope(&lx, &ly);
    (
        (p - EXPONENT_TARGET).abs() <= EXPONENT_TOL,
        format!("fitted exponent of max|pert| vs zeta(U0) = {p:.3} (target {EXPONENT_TARGET} +/- {EXPONENT_TOL})"),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let gas = GasModel::default();
    let mut residuals = Vec::new();
    let mut v_min = f64::INFINITY;
    for h in [0.1, 0.05, 0.025] {
        let opts = ProfileOptions {
            spacing: h,
            rtol: 1e-13,
            atol: 1e-16,
            ..Default::default()
        };
        let p = match compute_profile(&gas, [1.0, 0.2, 1.0], 0.0, 6.0, &opts) {
            Ok(p) => p,
            Err(e) => return (false, format!("profile failed: {e}")),
        };
        v_min = p.trajectory.samples.iter().map(|s| s.u[1]).fold(v_min, f64::min);
        residuals.push(primitive_residual_check(&gas, 0.0, &p.trajectory).unwrap());
    }
    let orders: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let elapsed = start.elapsed().as_secs_f64();
    (
        orders.iter().all(|&o| o >= MIN_ORDER) && v_min > 0.0 && elapsed < NS_RUNTIME_LIMIT_S,
        format!(
            "residuals {:.2e}/{:.2e}/{:.2e}, orders {:.2}/{:.2}, min v = {v_min:.4}, {elapsed:.1}s",
            residuals[0], residuals[1], residuals[2], orders[0], orders[1]
        ),
    )
}

/// τ strictly increasing at every accepted step, and τ(T) ≥ T / max ζ for
/// each horizon in a doubling sequence.
fn tau_grows(traj_at: impl Fn(f64) -> Trajectory) -> (bool, f64) {
    let mut ok = true;
    let mut tau_end = 0.0;
    for horizon in [2.5, 5.0, 10.0] {
        let traj = traj_at(horizon);
        let map = time_rescale(&traj).unwrap();
        let zmax = traj.samples.iter().map(|s| s.zeta).fold(0.0, f64::max);
        let t_end = traj.last().t;
        tau_end = traj.last().tau;
        ok &= map.is_strictly_increasing()
            && (t_end - horizon).abs() < 1e-9
            && tau_end >= (t_end - traj.samples[0].t) / zmax * (1.0 - 1e-9);
    }
    (ok, tau_end)
}

fn criterion_8() -> Outcome {
    let opts = SingularOptions::default().without_equilibrium_stop();
    let ls = load_example("linear_slaving").unwrap();
    let (ok_ls, tau_ls) = tau_grows(|h| integrate_singular(&ls.spec, &DVector::from_vec(vec![0.5, -0.5, 0.05]), h, &opts).unwrap());
    let gas = GasModel::default();
    let ode = ns_profile_ode(&gas, 0.0, 1.0, 1.0).unwrap();
    let base = ode.state(&[1.0, 0.2, 1.0], &[0.0, 0.0]);
    let fiber = stable_fiber(&ode.spec, &base, &StableOptions::default()).unwrap();
    let u0 = fiber.manifold.point(&DVector::from_element(1, 1e-3));
    let (ok_ns, tau_ns) = tau_grows(|h| integrate_singular(&ode.spec, &u0, h, &opts).unwrap());
    (
        ok_ls && ok_ns,
        format!("tau strictly increasing at every step; tau(10) = {tau_ls:.1} (slaving), {tau_ns:.1} (navier_stokes)"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("fast blow-up time", criterion_1),
        ("linear slaving exactness", criterion_2),
        ("hypothesis pattern", criterion_3),
        ("center-manifold order", criterion_4),
        ("sign preservation", criterion_5),
        ("perturbation-bound scaling", criterion_6),
        ("navier-stokes self-consistency", criterion_7),
        ("time-rescale diffeomorphism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (ok, detail) = run();
        println!("criterion {} {}: {name}: {detail}", i + 1, if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed += 1;
        }
    }
    println!("acceptance: {}/8 passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
