//! Numerical audit of the five structural hypotheses on (F, ζ) near the
//! distinguished point.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_norm_solve, numerical_rank};
use crate::manifolds::{center_manifold_with, grid_points, TaylorManifold, DEFAULT_ORDER, TOL_CENTER};
use crate::system::{fd_step, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Verdict for one hypothesis. `margin` is the audited statistic; a
/// failing check names the worst state and its violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub verdict: Verdict,
    pub margin: f64,
    pub witness: Option<Vec<f64>>,
    pub violation: Option<f64>,
}

impl Check {
    fn pass(margin: f64) -> Self {
        Check {
            verdict: Verdict::Pass,
            margin,
            witness: None,
            violation: None,
        }
    }

    fn fail(margin: f64, witness: &DVector<f64>, violation: f64) -> Self {
        Check {
            verdict: Verdict::Fail,
            margin,
            witness: Some(witness.iter().copied().collect()),
            violation: Some(violation),
        }
    }

    fn inconclusive() -> Self {
        Check {
            verdict: Verdict::Inconclusive,
            margin: 0.0,
            witness: None,
            violation: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub h1: Check,
    pub h2: Check,
    pub h3: Check,
    pub h4: Check,
    pub h5: Check,
    pub s_samples: Vec<Vec<f64>>,
}

impl HypothesisReport {
    pub fn checks(&self) -> [&Check; 5] {
        [&self.h1, &self.h2, &self.h3, &self.h4, &self.h5]
    }

    pub fn verdicts(&self) -> [Verdict; 5] {
        self.checks().map(|c| c.verdict)
    }

    pub fn all_pass(&self) -> bool {
        self.checks().iter().all(|c| c.passed())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

#[derive(Debug, Clone)]
pub struct HypothesisOptions {
    pub tol_s: f64,
    pub tol_grad: f64,
    pub tol_h4: f64,
    pub tol_h5: f64,
    pub tol_eq: f64,
    /// Relative to the largest singular value.
    pub tol_rank: f64,
    /// Disagreement allowed between directional quotients of G.
    pub tol_ext: f64,
    pub half_width: f64,
    pub n_samples: usize,
    pub n_directions: usize,
    pub seed: u64,
    pub cm_order: usize,
    pub tol_center: f64,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        HypothesisOptions {
            tol_s: 1e-10,
            tol_grad: 1e-8,
            tol_h4: 1e-8,
            tol_h5: 1e-8,
            tol_eq: 1e-10,
            tol_rank: 1e-8,
            tol_ext: 1e-6,
            half_width: 0.1,
            n_samples: 64,
            n_directions: 8,
            seed: 0,
            cm_order: DEFAULT_ORDER,
            tol_center: TOL_CENTER,
        }
    }
}

/// Axis-aligned box center ± half_width.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBox {
    pub center: DVector<f64>,
    pub half_width: DVector<f64>,
}

impl StateBox {
    pub fn around(center: &DVector<f64>, half_width: f64) -> Self {
        StateBox {
            center: center.clone(),
            half_width: DVector::from_element(center.len(), half_width),
        }
    }

    pub fn contains(&self, u: &DVector<f64>, inflate: f64) -> bool {
        (0..u.len()).all(|i| (u[i] - self.center[i]).abs() <= inflate * self.half_width[i])
    }

    fn seeds(&self, n: usize) -> Vec<DVector<f64>> {
        let d = self.center.len();
        grid_points(d, 1.0, n)
            .into_iter()
            .map(|g| &self.center + g.component_mul(&self.half_width))
            .collect()
    }
}

type ParamMap = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// A parameterized manifold of equilibria p ↦ U(p).
#[derive(Clone)]
pub struct EquilibriumManifold {
    n_eq: usize,
    dim: usize,
    map: Arc<ParamMap>,
    tangent: Option<Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>>,
}

impl fmt::Debug for EquilibriumManifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EquilibriumManifold")
            .field("n_eq", &self.n_eq)
            .field("dim", &self.dim)
            .finish()
    }
}

impl EquilibriumManifold {
    pub fn new(
        n_eq: usize,
        dim: usize,
        map: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        EquilibriumManifold {
            n_eq,
            dim,
            map: Arc::new(map),
            tangent: None,
        }
    }

    /// {base + D p}.
    pub fn affine(base: DVector<f64>, directions: DMatrix<f64>) -> Self {
        let n_eq = directions.ncols();
        let dim = base.len();
        let dirs = directions.clone();
        EquilibriumManifold {
            n_eq,
            dim,
            map: Arc::new(move |p| &base + &directions * p),
            tangent: Some(Arc::new(move |_| dirs.clone())),
        }
    }

    /// Equilibria near the distinguished point, parameterized over ker DF by
    /// Gauss–Newton projection onto {F = 0}.
    pub fn from_kernel(spec: &SystemSpec) -> Result<Self> {
        let a = spec.jacobian(spec.origin());
        let d = spec.dim();
        let svd = a.svd(false, true);
        let vt = svd.v_t.expect("requested Vᵗ");
        let smax = svd.singular_values.max().max(1e-300);
        let kernel: Vec<DVector<f64>> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] <= 1e-10 * smax.max(1.0))
            .map(|i| vt.row(i).transpose().into_owned())
            .collect();
        if kernel.is_empty() {
            return Err(Error::InvalidInput("DF is invertible: equilibria are isolated".into()));
        }
        let basis = crate::linalg::canonical_basis(&DMatrix::from_columns(&kernel));
        let origin = spec.origin().clone();
        let spec = spec.clone();
        Ok(EquilibriumManifold {
            n_eq: basis.ncols(),
            dim: d,
            map: Arc::new(move |p| {
                let guess = &origin + &basis * p;
                project_equilibrium(&spec, guess, None)
            }),
            tangent: None,
        })
    }

    pub fn n_eq(&self) -> usize {
        self.n_eq
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, p: &DVector<f64>) -> DVector<f64> {
        (self.map)(p)
    }

    pub fn tangent(&self, p: &DVector<f64>) -> DMatrix<f64> {
        if let Some(t) = &self.tangent {
            return t(p);
        }
        let h = fd_step(p);
        let mut m = DMatrix::zeros(self.dim, self.n_eq);
        for j in 0..self.n_eq {
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[j] += h;
            pm[j] -= h;
            m.set_column(j, &((self.point(&pp) - self.point(&pm)) / (2.0 * h)));
        }
        m
    }

    /// Checks that F vanishes at the given parameter samples.
    pub fn validate(&self, spec: &SystemSpec, params: &[DVector<f64>]) -> Result<()> {
        for p in params {
            let u = self.point(p);
            let f = spec.f(&u).norm();
            if f > 1e-8 * (1.0 + u.norm()) {
                return Err(Error::InvalidInput(format!(
                    "equilibrium manifold point {:?} has |F| = {f:e}",
                    u.as_slice()
                )));
            }
        }
        Ok(())
    }
}

/// Gauss–Newton with minimum-norm steps on (F, [ζ]) = 0.
fn project_equilibrium(spec: &SystemSpec, mut u: DVector<f64>, with_zeta: Option<()>) -> DVector<f64> {
    let d = spec.dim();
    for _ in 0..50 {
        let f = spec.f(&u);
        let j = spec.jacobian(&u);
        let (res, jac) = if with_zeta.is_some() {
            let z = spec.zeta(&u);
            let g = spec.grad_zeta(&u);
            let mut r = DVector::zeros(d + 1);
            r.rows_mut(0, d).copy_from(&f);
            r[d] = z;
            let mut m = DMatrix::zeros(d + 1, d);
            m.view_mut((0, 0), (d, d)).copy_from(&j);
            m.row_mut(d).copy_from(&g.transpose());
            (r, m)
        } else {
            (f, j)
        };
        if res.norm() < 1e-15 {
            break;
        }
        let step = min_norm_solve(&jac, &res);
        u -= &step;
        if step.norm() < 1e-16 * (1.0 + u.norm()) {
            break;
        }
    }
    u
}

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    a.as_slice().partial_cmp(b.as_slice()).unwrap_or(Ordering::Equal)
}

/// Index of the largest statistic, ties broken by lexicographic state order.
fn worst(stats: &[(DVector<f64>, f64)]) -> Option<usize> {
    (0..stats.len()).max_by(|&i, &j| {
        stats[i]
            .1
            .partial_cmp(&stats[j].1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| lex_cmp(&stats[j].0, &stats[i].0))
    })
}

/// States on S obtained by Newton projection along ∇ζ from a grid of seeds.
pub fn sample_singular_set(spec: &SystemSpec, bx: &StateBox, n: usize, tol_s: f64) -> Result<Vec<DVector<f64>>> {
    spec.check_dim(&bx.center)?;
    let seeds = bx.seeds(n);
    let found: Vec<DVector<f64>> = seeds
        .par_iter()
        .filter_map(|seed| {
            let mut u = seed.clone();
            for _ in 0..50 {
                let z = spec.zeta(&u);
                if z.abs() <= tol_s {
                    break;
                }
                let g = spec.grad_zeta(&u);
                let n2 = g.norm_squared();
                if n2 == 0.0 || !n2.is_finite() {
                    return None;
                }
                u -= g * (z / n2);
            }
            (spec.zeta(&u).abs() <= tol_s && bx.contains(&u, 2.0)).then_some(u)
        })
        .collect();
    if found.is_empty() {
        return Err(Error::SeedingFailed);
    }
    Ok(found)
}

/// H1: ∇ζ at the distinguished point is nonzero.
pub fn check_h1(spec: &SystemSpec, opts: &HypothesisOptions) -> Check {
    let g = spec.grad_zeta(spec.origin()).norm();
    if g > opts.tol_grad {
        Check::pass(g)
    } else {
        Check::fail(g, spec.origin(), g)
    }
}

/// G = (∇ζ·F)/ζ off S, continued onto S by the quotient of derivatives
/// along ∇ζ.
pub fn extended_g(spec: &SystemSpec, u: &DVector<f64>, opts: &HypothesisOptions) -> Result<f64> {
    spec.check_dim(u)?;
    let zeta = spec.zeta(u);
    let flux = spec.zeta_flux(u);
    if zeta.abs() > opts.tol_s {
        return Ok(flux / zeta);
    }
    let f = spec.f(u);
    if flux.abs() > opts.tol_h4 * (1.0 + f.norm()) {
        return Err(Error::ExtensionUndefined {
            reason: format!("∇ζ·F = {flux:e} does not vanish on S, so G has a pole"),
        });
    }
    let g = spec.grad_zeta(u);
    let n2 = g.norm_squared();
    if n2 == 0.0 {
        return Err(Error::ExtensionUndefined {
            reason: "∇ζ vanishes, S is not a hypersurface here".into(),
        });
    }
    let dflux = spec.flux_gradient(u);
    let value = dflux.dot(&g) / n2;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let d = u.len();
    let mut tried = 0;
    while tried < opts.n_directions {
        let v = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        let dz = g.dot(&v);
        if dz.abs() < 0.1 * g.norm() * v.norm() {
            continue;
        }
        tried += 1;
        let q = dflux.dot(&v) / dz;
        if (q - value).abs() > opts.tol_ext * (1.0 + value.abs()) {
            return Err(Error::ExtensionUndefined {
                reason: format!("directional quotients disagree: {q} vs {value}"),
            });
        }
    }
    Ok(value)
}

/// H4: ∇ζ·F = 0 on S.
pub fn check_h4(spec: &SystemSpec, s_samples: &[DVector<f64>], opts: &HypothesisOptions) -> Check {
    let stats: Vec<(DVector<f64>, f64)> = s_samples
        .par_iter()
        .map(|u| (u.clone(), spec.zeta_flux(u).abs() / (1.0 + spec.f(u).norm())))
        .collect();
    let Some(i) = worst(&stats) else {
        return Check::inconclusive();
    };
    let (w, m) = &stats[i];
    if *m <= opts.tol_h4 {
        Check::pass(*m)
    } else {
        Check::fail(*m, w, *m)
    }
}

/// Equilibria on S near the samples, plus the distinguished point.
pub fn singular_equilibria(spec: &SystemSpec, s_samples: &[DVector<f64>], opts: &HypothesisOptions) -> Vec<DVector<f64>> {
    let mut eqs: Vec<DVector<f64>> = s_samples
        .par_iter()
        .map(|u| project_equilibrium(spec, u.clone(), Some(())))
        .filter(|u| spec.zeta(u).abs() <= opts.tol_s && spec.f(u).norm() <= opts.tol_eq)
        .collect();
    eqs.push(spec.origin().clone());
    eqs
}

/// H5: G = 0 at equilibria on S. Errors with `ExtensionUndefined` when G
/// cannot be continued at one of them.
pub fn check_h5(spec: &SystemSpec, s_samples: &[DVector<f64>], opts: &HypothesisOptions) -> Result<Check> {
    let eqs = singular_equilibria(spec, s_samples, opts);
    let stats: Vec<(DVector<f64>, f64)> = eqs
        .par_iter()
        .map(|u| extended_g(spec, u, opts).map(|g| (u.clone(), g.abs())))
        .collect::<Result<_>>()?;
    let i = worst(&stats).expect("origin is always included");
    let (w, m) = &stats[i];
    Ok(if *m <= opts.tol_h5 {
        Check::pass(*m)
    } else {
        Check::fail(*m, w, *m)
    })
}

/// H3: M^eq meets S transversally.
pub fn check_h3(spec: &SystemSpec, eq: &EquilibriumManifold, bx: &StateBox, opts: &HypothesisOptions) -> Result<Check> {
    let seeds = grid_points(eq.n_eq(), opts.half_width, opts.n_samples);
    eq.validate(spec, &seeds)?;
    let d = spec.dim();
    let points: Vec<(DVector<f64>, DMatrix<f64>)> = seeds
        .par_iter()
        .filter_map(|seed| {
            let mut p = seed.clone();
            for _ in 0..50 {
                let u = eq.point(&p);
                let z = spec.zeta(&u);
                if z.abs() <= opts.tol_s {
                    break;
                }
                let gp = eq.tangent(&p).transpose() * spec.grad_zeta(&u);
                let n2 = gp.norm_squared();
                if n2 == 0.0 {
                    return None;
                }
                p -= gp * (z / n2);
            }
            let u = eq.point(&p);
            (spec.zeta(&u).abs() <= opts.tol_s && bx.contains(&u, 2.0)).then(|| (u, eq.tangent(&p)))
        })
        .collect();
    if points.is_empty() {
        return Err(Error::NoIntersection);
    }
    let stats: Vec<(DVector<f64>, f64, usize)> = points
        .iter()
        .map(|(u, t)| {
            let g = spec.grad_zeta(u);
            let n2 = g.norm_squared();
            let proj = if n2 > 0.0 {
                DMatrix::identity(d, d) - &g * g.transpose() / n2
            } else {
                DMatrix::identity(d, d)
            };
            let stacked = crate::linalg::hstack(&[t, &proj]);
            let (rank, sv) = numerical_rank(&stacked, opts.tol_rank);
            let smax = sv.max();
            let mut sorted: Vec<f64> = sv.iter().copied().collect();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
            let sigma_d = sorted.get(d - 1).copied().unwrap_or(0.0);
            (u.clone(), if smax > 0.0 { sigma_d / smax } else { 0.0 }, rank)
        })
        .collect();
    let worst_idx = (0..stats.len())
        .min_by(|&i, &j| {
            stats[i]
                .1
                .partial_cmp(&stats[j].1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| lex_cmp(&stats[i].0, &stats[j].0))
        })
        .expect("nonempty");
    let (w, margin, rank) = &stats[worst_idx];
    Ok(if *rank == d {
        Check::pass(*margin)
    } else {
        Check::fail(*margin, w, (d - rank) as f64)
    })
}

/// H2: every point of M^c ∩ S is an equilibrium. With no center manifold
/// the check passes vacuously.
pub fn check_h2(spec: &SystemSpec, cm: Option<&TaylorManifold>, opts: &HypothesisOptions) -> Check {
    let Some(cm) = cm else {
        return Check::pass(0.0);
    };
    let radius = opts.half_width;
    let xs = cm.singular_intersections(spec, radius, opts.n_samples, opts.tol_s);
    let stats: Vec<(DVector<f64>, f64, f64)> = xs
        .par_iter()
        .map(|x| {
            let u = cm.point(x);
            let f = spec.f(&u).norm();
            let allowed = opts.tol_eq * (1.0 + x.norm()) + 10.0 * cm.invariance_defect(spec, x);
            (u, f, allowed)
        })
        .collect();
    let margin = stats.iter().map(|s| s.1).fold(0.0, f64::max);
    let violations: Vec<(DVector<f64>, f64)> = stats
        .iter()
        .filter(|s| s.1 > s.2)
        .map(|s| (s.0.clone(), s.1))
        .collect();
    match worst(&violations) {
        None => Check::pass(margin),
        Some(i) => Check::fail(margin, &violations[i].0, violations[i].1),
    }
}

/// Runs H1..H5 on a box around the distinguished point.
///
/// Without `eq` the equilibrium manifold is built from ker DF.
pub fn audit(spec: &SystemSpec, eq: Option<&EquilibriumManifold>, opts: &HypothesisOptions) -> Result<HypothesisReport> {
    let bx = StateBox::around(spec.origin(), opts.half_width);
    let h1 = check_h1(spec, opts);
    let samples = if h1.passed() {
        sample_singular_set(spec, &bx, opts.n_samples, opts.tol_s)?
    } else {
        Vec::new()
    };
    let cm = match center_manifold_with(spec, opts.cm_order, opts.tol_center) {
        Ok(cm) => Some(cm),
        Err(Error::NoCenterDirections) => None,
        Err(e) => return Err(e),
    };
    let h2 = if h1.passed() { check_h2(spec, cm.as_ref(), opts) } else { Check::inconclusive() };
    let owned_eq;
    let eq = match eq {
        Some(e) => Some(e),
        None => {
            owned_eq = EquilibriumManifold::from_kernel(spec).ok();
            owned_eq.as_ref()
        }
    };
    let h3 = match eq {
        Some(eq) if h1.passed() => match check_h3(spec, eq, &bx, opts) {
            Ok(c) => c,
            Err(Error::NoIntersection) => Check::inconclusive(),
            Err(e) => return Err(e),
        },
        _ => Check::inconclusive(),
    };
    let h4 = if samples.is_empty() { Check::inconclusive() } else { check_h4(spec, &samples, opts) };
    let h5 = if h4.passed() {
        match check_h5(spec, &samples, opts) {
            Ok(c) => c,
            Err(Error::ExtensionUndefined { .. }) => {
                let bad = singular_equilibria(spec, &samples, opts)
                    .into_iter()
                    .find(|u| extended_g(spec, u, opts).is_err())
                    .expect("an equilibrium failed to extend");
                Check::fail(f64::INFINITY, &bad, f64::INFINITY)
            }
            Err(e) => return Err(e),
        }
    } else {
        Check::inconclusive()
    };
    Ok(HypothesisReport {
        h1,
        h2,
        h3,
        h4,
        h5,
        s_samples: samples.iter().map(|u| u.iter().copied().collect()).collect(),
    })
}
