use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotheses::EquilibriumManifold;
use crate::linalg::{canonical_basis, hstack, spectral_split, SpectralSplit};
use crate::manifolds::taylor::{solve_graph, ManifoldRecord, TaylorManifold};
use crate::manifolds::{center_manifold_with, DEFAULT_ORDER, TOL_CENTER};
use crate::singular::{integrate_desingularized, Output, SingularOptions};
use crate::system::SystemSpec;

#[derive(Debug, Clone)]
pub struct StableOptions {
    pub order: usize,
    pub tol_center: f64,
    /// Half-width of the parameter box sampled on E.
    pub param_half_width: f64,
    /// τ-window used to fit decay rates.
    pub window: (f64, f64),
    pub slack: f64,
    /// Distance of validation probes from the base point.
    pub probe_radius: f64,
    pub validate: bool,
}

impl Default for StableOptions {
    fn default() -> Self {
        StableOptions {
            order: DEFAULT_ORDER,
            tol_center: TOL_CENTER,
            param_half_width: 0.1,
            window: (0.5, 3.0),
            slack: 0.2,
            probe_radius: 1e-3,
            validate: true,
        }
    }
}

/// A stable fiber over one base point of E.
#[derive(Debug, Clone)]
pub struct Fiber {
    pub param: DVector<f64>,
    pub base: DVector<f64>,
    pub zeta: f64,
    pub stable_dim: usize,
    /// min −Re λ over stable eigenvalues, in τ.
    pub decay_rate: f64,
    /// Slowest decay seen by the validation probes, in τ.
    pub measured_rate: Option<f64>,
    pub manifold: TaylorManifold,
}

/// First base point (in order of decreasing ζ) where the stable dimension
/// changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Boundary {
    pub param: Vec<f64>,
    pub base: Vec<f64>,
    pub stable_dim: usize,
}

#[derive(Debug, Clone)]
pub struct StableFiberBundle {
    pub eq: EquilibriumManifold,
    pub fibers: Vec<Fiber>,
    pub boundary: Option<Boundary>,
    /// Center manifold at the distinguished point.
    pub center: Option<TaylorManifold>,
    /// Stable spectrum at the distinguished point: min −Re λ, in τ.
    pub fast_rate: Option<f64>,
    pub tol_center: f64,
    pub param_half_width: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiberRecord {
    pub param: Vec<f64>,
    pub zeta: f64,
    pub stable_dim: usize,
    pub decay_rate: f64,
    pub measured_rate: Option<f64>,
    pub manifold: ManifoldRecord,
}

impl StableFiberBundle {
    pub fn records(&self) -> Vec<FiberRecord> {
        self.fibers
            .iter()
            .map(|f| FiberRecord {
                param: f.param.iter().copied().collect(),
                zeta: f.zeta,
                stable_dim: f.stable_dim,
                decay_rate: f.decay_rate,
                measured_rate: f.measured_rate,
                manifold: f.manifold.to_record(),
            })
            .collect()
    }

    /// Stable subspace of DF at the point of E with parameter `p`.
    pub fn linear_fiber_split(&self, spec: &SystemSpec, p: &DVector<f64>) -> Result<(DVector<f64>, SpectralSplit)> {
        let b = self.eq.point(p);
        let split = spectral_split(&spec.jacobian(&b), self.tol_center)?;
        Ok((b, split))
    }
}

fn stable_rate(split: &SpectralSplit) -> Option<f64> {
    split
        .stable_eigs
        .iter()
        .map(|&(re, _)| -re)
        .min_by(|a, b| a.partial_cmp(b).expect("finite"))
}

/// Least-squares slope of ln(dist) against τ.
pub(crate) fn fit_log_slope(tau: &[f64], dist: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = tau
        .iter()
        .zip(dist)
        .filter(|(_, &d)| d > 0.0)
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if var == 0.0 {
        None
    } else {
        Some(cov / var)
    }
}

fn validate_fiber(spec: &SystemSpec, fiber: &Fiber, opts: &StableOptions) -> Result<Option<f64>> {
    let (lo, hi) = opts.window;
    let sopts = SingularOptions::with_tolerances(1e-12, 1e-16)
        .output(Output::Uniform(0.05))
        .without_equilibrium_stop();
    let k = fiber.stable_dim;
    let mut slowest: Option<f64> = None;
    for j in 0..k {
        for s in [1.0, -1.0] {
            let mut x = DVector::zeros(k);
            x[j] = s * opts.probe_radius;
            let u0 = fiber.manifold.point(&x);
            let traj = integrate_desingularized(spec, &u0, hi, &sopts)?;
            let floor = 1e-11 * opts.probe_radius;
            let (tau, dist): (Vec<f64>, Vec<f64>) = traj
                .samples
                .iter()
                .filter(|smp| smp.tau >= lo - 1e-12)
                .map(|smp| (smp.tau, (&smp.u - &fiber.base).norm()))
                .filter(|&(_, d)| d > floor)
                .unzip();
            let Some(slope) = fit_log_slope(&tau, &dist) else {
                continue;
            };
            let rate = -slope;
            if rate < fiber.decay_rate * (1.0 - opts.slack) {
                return Err(Error::ValidationFailure {
                    measured: rate,
                    predicted: fiber.decay_rate,
                });
            }
            slowest = Some(slowest.map_or(rate, |r: f64| r.min(rate)));
        }
    }
    Ok(slowest)
}

fn build_fiber(spec: &SystemSpec, p: DVector<f64>, base: DVector<f64>, opts: &StableOptions) -> Result<Fiber> {
    let split = spectral_split(&spec.jacobian(&base), opts.tol_center)?;
    let zeta = spec.zeta(&base);
    let stable_dim = split.stable.ncols();
    if stable_dim == 0 {
        return Err(Error::NoStableDirections {
            base: base.iter().copied().collect(),
        });
    }
    let codomain = canonical_basis(&hstack(&[&split.center, &split.unstable]));
    let manifold = solve_graph(spec, &base, &split.stable, &codomain, opts.order)?;
    let decay_rate = stable_rate(&split).expect("stable_dim > 0");
    Ok(Fiber {
        param: p,
        base,
        zeta,
        stable_dim,
        decay_rate,
        measured_rate: None,
        manifold,
    })
}

/// Stable fiber through a single equilibrium, without validation probes.
pub fn stable_fiber(spec: &SystemSpec, base: &DVector<f64>, opts: &StableOptions) -> Result<Fiber> {
    spec.check_dim(base)?;
    build_fiber(spec, DVector::zeros(0), base.clone(), opts)
}

/// Base parameters on E with ζ ≥ 0, ordered by decreasing ζ.
fn base_params(spec: &SystemSpec, eq: &EquilibriumManifold, n_base: usize, hw: f64) -> Vec<DVector<f64>> {
    let n_eq = eq.n_eq();
    let per_axis = (((2 * n_base - 1) as f64).powf(1.0 / n_eq as f64).ceil() as usize).max(2) | 1;
    let mut params = Vec::new();
    let total = per_axis.pow(n_eq as u32);
    for mut idx in 0..total {
        let p = DVector::from_fn(n_eq, |_, _| {
            let i = idx % per_axis;
            idx /= per_axis;
            -hw + 2.0 * hw * i as f64 / (per_axis - 1) as f64
        });
        params.push(p);
    }
    let mut scored: Vec<(f64, DVector<f64>)> = params
        .into_iter()
        .map(|p| (spec.zeta(&eq.point(&p)), p))
        .filter(|(z, _)| *z >= -1e-10)
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite ζ")
            .then_with(|| a.1.as_slice().partial_cmp(b.1.as_slice()).expect("finite"))
    });
    scored.into_iter().take(n_base).map(|(_, p)| p).collect()
}

/// Stable fibers over base points of E with ζ ≥ 0.
pub fn uniformly_stable_manifold(
    spec: &SystemSpec,
    eq: &EquilibriumManifold,
    n_base: usize,
    opts: &StableOptions,
) -> Result<StableFiberBundle> {
    if n_base == 0 {
        return Err(Error::InvalidInput("n_base must be positive".into()));
    }
    let params = base_params(spec, eq, n_base, opts.param_half_width);
    if params.is_empty() {
        return Err(Error::NoIntersection);
    }
    eq.validate(spec, &params)?;
    let dims: Vec<usize> = params
        .par_iter()
        .map(|p| {
            spectral_split(&spec.jacobian(&eq.point(p)), opts.tol_center)
                .map(|s| s.stable.ncols())
                .unwrap_or(0)
        })
        .collect();
    let mut cut = params.len();
    for (i, &dim) in dims.iter().enumerate().skip(1) {
        if dim != dims[0] {
            cut = i;
            break;
        }
    }
    let boundary = (cut < params.len()).then(|| Boundary {
        param: params[cut].iter().copied().collect(),
        base: eq.point(&params[cut]).iter().copied().collect(),
        stable_dim: dims[cut],
    });
    let fibers: Vec<Fiber> = params[..cut]
        .par_iter()
        .map(|p| {
            let mut fiber = build_fiber(spec, p.clone(), eq.point(p), opts)?;
            if opts.validate {
                fiber.measured_rate = validate_fiber(spec, &fiber, opts)?;
            }
            Ok(fiber)
        })
        .collect::<Result<_>>()?;

    let origin_split = spectral_split(&spec.jacobian(spec.origin()), opts.tol_center)?;
    let fast_rate = stable_rate(&origin_split);
    let center = match center_manifold_with(spec, opts.order, opts.tol_center) {
        Ok(cm) => Some(cm),
        Err(Error::NoCenterDirections) => None,
        Err(e) => return Err(e),
    };
    Ok(StableFiberBundle {
        eq: eq.clone(),
        fibers,
        boundary,
        center,
        fast_rate,
        tol_center: opts.tol_center,
        param_half_width: opts.param_half_width,
    })
}
