use std::io::{self, Write};

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifolds::slow::reduced_slow_field;
use crate::manifolds::stable::{fit_log_slope, StableFiberBundle};
use crate::singular::{fmt_num, Termination, Trajectory};
use crate::system::SystemSpec;

#[derive(Debug, Clone)]
pub struct DecomposeOptions {
    /// Relative distance to the nearest linear fiber accepted as "on M^us".
    pub tol_mfd: f64,
    pub slack: f64,
    /// τ-window for the fast decay fit.
    pub window: (f64, f64),
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            tol_mfd: 1e-2,
            slack: 0.2,
            window: (0.5, 3.0),
        }
    }
}

/// U = slow + fast + pert at every sample of an orbit.
#[derive(Debug, Clone)]
pub struct OrbitDecomposition {
    pub t: Vec<f64>,
    pub tau: Vec<f64>,
    pub slow: Vec<DVector<f64>>,
    pub fast: Vec<DVector<f64>>,
    pub pert: Vec<DVector<f64>>,
    /// max|pert| / (|fast(0)|·ζ(U(0))).
    pub c_estimate: f64,
    pub max_pert: f64,
    /// Fitted decay of |fast| in τ, when enough samples were above the floor.
    pub fast_decay_rate: Option<f64>,
    /// Distance of U(0) to the nearest linear stable fiber.
    pub fiber_distance: f64,
}

impl OrbitDecomposition {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.slow.first().map_or(0, |v| v.len());
        let mut header = vec!["t".to_string(), "tau".to_string()];
        for part in ["slow", "fast", "pert"] {
            header.extend((0..d).map(|i| format!("{part}_{i}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.t.len() {
            let mut row = vec![fmt_num(self.t[i]), fmt_num(self.tau[i])];
            for part in [&self.slow, &self.fast, &self.pert] {
                row.extend(part[i].iter().map(|v| fmt_num(*v)));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        writeln!(w, "# c_estimate={}", fmt_num(self.c_estimate))
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// min over base parameters θ of the distance from `u` to the linear stable
/// fiber through E(θ), relative to 1 + |u − E(θ)|.
fn fiber_distance(spec: &SystemSpec, bundle: &StableFiberBundle, u: &DVector<f64>) -> f64 {
    let n_eq = bundle.eq.n_eq();
    let dist = |p: &DVector<f64>| -> f64 {
        match bundle.linear_fiber_split(spec, p) {
            Ok((b, split)) => {
                let s = &split.stable;
                let w = u - &b;
                let r = &w - s * (s.transpose() * &w);
                r.norm() / (1.0 + w.norm())
            }
            Err(_) => f64::INFINITY,
        }
    };
    let reach = bundle.param_half_width.max((u - spec.origin()).norm());
    let mut candidates: Vec<DVector<f64>> = bundle.fibers.iter().map(|f| f.param.clone()).collect();
    let per_axis = if n_eq == 1 { 81 } else { 9 };
    let total = (per_axis as usize).pow(n_eq as u32);
    for mut idx in 0..total {
        candidates.push(DVector::from_fn(n_eq, |_, _| {
            let i = idx % per_axis;
            idx /= per_axis;
            -reach + 2.0 * reach * i as f64 / (per_axis - 1) as f64
        }));
    }
    let (best, best_d) = candidates
        .iter()
        .map(|p| (p.clone(), dist(p)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        .expect("candidates are nonempty");
    if n_eq != 1 {
        return best_d;
    }
    let step = 2.0 * reach / (per_axis - 1) as f64;
    let (_, refined) = golden_min(
        |s| dist(&DVector::from_element(1, s)),
        best[0] - step,
        best[0] + step,
    );
    refined.min(best_d)
}

/// Splits an orbit on M^us into slow, fast and perturbation parts.
///
/// slow is the reduced flow on the center manifold at the distinguished
/// point started from the center coordinates of U(0); fast is the offset of
/// U from that manifold along the hyperbolic directions.
pub fn decompose_orbit(
    spec: &SystemSpec,
    bundle: &StableFiberBundle,
    traj: &Trajectory,
    opts: &DecomposeOptions,
) -> Result<OrbitDecomposition> {
    let first = traj
        .samples
        .first()
        .ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
    spec.check_dim(&first.u)?;
    if let Some(s) = traj.samples.iter().find(|s| !(s.zeta > 0.0)) {
        return Err(Error::InvalidInitialState { zeta: s.zeta });
    }
    let cm = bundle.center.as_ref().ok_or(Error::NoCenterDirections)?;
    let u0 = &first.u;
    let distance = fiber_distance(spec, bundle, u0);
    if distance > opts.tol_mfd {
        return Err(Error::NotOnManifold { distance });
    }

    let last = traj.last();
    let f0 = spec.f(u0).norm();
    let f_end = spec.f(&last.u).norm();
    if f_end > 0.1 * f0 && f_end > 0.0 {
        return Err(Error::NoAsymptoticEquilibrium {
            reason: format!("|F| only fell from {f0:e} to {f_end:e}"),
        });
    }
    if traj.termination == Termination::SingularityReached {
        return Err(Error::NoAsymptoticEquilibrium {
            reason: "orbit reached the singular set".into(),
        });
    }

    let slow_field = reduced_slow_field(spec, cm)?;
    let times: Vec<f64> = traj.samples.iter().map(|s| s.t - first.t).collect();
    let (x0, _) = cm.coords(u0);
    let xs = slow_field.flow(&x0, &times)?;
    let slow: Vec<DVector<f64>> = xs.iter().map(|x| cm.point(x)).collect();
    let fast: Vec<DVector<f64>> = traj.samples.iter().map(|s| cm.offset(&s.u)).collect();
    let pert: Vec<DVector<f64>> = traj
        .samples
        .iter()
        .zip(slow.iter().zip(&fast))
        .map(|(s, (sl, fa))| &s.u - sl - fa)
        .collect();

    let fast0 = fast[0].norm();
    let tau0 = first.tau;
    let fast_decay_rate = if fast0 > 1e-14 {
        let (lo, hi) = opts.window;
        let (tau, mag): (Vec<f64>, Vec<f64>) = traj
            .samples
            .iter()
            .zip(&fast)
            .map(|(s, f)| (s.tau - tau0, f.norm()))
            .filter(|&(t, m)| t >= lo && t <= hi && m > 1e-10 * fast0)
            .unzip();
        fit_log_slope(&tau, &mag).map(|s| -s)
    } else {
        None
    };
    if let (Some(measured), Some(expected)) = (fast_decay_rate, bundle.fast_rate) {
        if measured < expected * (1.0 - opts.slack) {
            return Err(Error::NoAsymptoticEquilibrium {
                reason: format!("fast part decays at rate {measured} in τ, expected at least {expected}"),
            });
        }
    }
    let max_pert = pert.iter().map(|p| p.amax()).fold(0.0, f64::max);
    let denom = fast0 * first.zeta;
    let c_estimate = if denom > 0.0 { max_pert / denom } else { 0.0 };
    Ok(OrbitDecomposition {
        t: traj.samples.iter().map(|s| s.t).collect(),
        tau: traj.samples.iter().map(|s| s.tau).collect(),
        slow,
        fast,
        pert,
        c_estimate,
        max_pert,
        fast_decay_rate,
        fiber_distance: distance,
    })
}

/// Outcome of the ζ sign audit along a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct SignCheck {
    pub preserved: bool,
    pub min_zeta: f64,
    /// (sample index, t, ζ) of the first sample on or past S.
    pub first_violation: Option<(usize, f64, f64)>,
}

/// Passes iff ζ > 0 at every sample and the orbit did not stop on S.
pub fn verify_sign_preservation(traj: &Trajectory) -> SignCheck {
    let min_zeta = traj.samples.iter().map(|s| s.zeta).fold(f64::INFINITY, f64::min);
    let mut first_violation = traj
        .samples
        .iter()
        .enumerate()
        .find(|(_, s)| !(s.zeta > 0.0))
        .map(|(i, s)| (i, s.t, s.zeta));
    if first_violation.is_none() && traj.termination == Termination::SingularityReached {
        let i = traj.samples.len() - 1;
        let s = &traj.samples[i];
        first_violation = Some((i, s.t, s.zeta));
    }
    SignCheck {
        preserved: first_violation.is_none(),
        min_zeta,
        first_violation,
    }
}
