//! Monitored integration of dU/dt = F(U)/ζ(U) in the original time t and of
//! the desingularized field dU/dτ = F(U), plus the sampled map t ↔ τ.

use std::fmt;
use std::io::{self, Write};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{dopri5, Finish, Flow, StageFailure, StepControl};
use crate::system::SystemSpec;

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    HorizonReached,
    SingularityReached,
    EquilibriumReached,
    StepFailure,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::HorizonReached => "horizon_reached",
            Termination::SingularityReached => "singularity_reached",
            Termination::EquilibriumReached => "equilibrium_reached",
            Termination::StepFailure => "step_failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub tau: f64,
    pub u: DVector<f64>,
    pub zeta: f64,
    /// |F(U)| / |ζ(U)|
    pub rhs_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub termination: Termination,
}

/// Which states end up in the trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Output {
    /// Every accepted step.
    #[default]
    Steps,
    /// A uniform grid with the given spacing (steps are clamped onto it).
    Uniform(f64),
    /// Exactly these times (sorted, after the start time).
    Times(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SingularOptions {
    /// Singular floor: |ζ| ≤ eps_zeta counts as on S.
    pub eps_zeta: f64,
    /// Blow-up is flagged once |F|/ζ exceeds 1/eps_blowup.
    pub eps_blowup: f64,
    /// Equilibrium threshold on |F|/max(ζ, eps_zeta).
    pub tol_eq: f64,
    /// Consecutive accepted steps below `tol_eq` before stopping.
    pub equilibrium_window: usize,
    pub detect_equilibrium: bool,
    /// On step underflow, a linear time-to-S estimate ζ/|dζ/dt| below this
    /// value classifies the stop as a blow-up.
    pub singular_horizon: f64,
    pub step: StepControl,
    pub output: Output,
}

impl Default for SingularOptions {
    fn default() -> Self {
        SingularOptions {
            eps_zeta: 1e-12,
            eps_blowup: 1e-8,
            tol_eq: 1e-10,
            equilibrium_window: 5,
            detect_equilibrium: true,
            singular_horizon: 1e-8,
            step: StepControl::default(),
            output: Output::Steps,
        }
    }
}

impl SingularOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        SingularOptions {
            step: StepControl::with_tolerances(rtol, atol),
            ..Default::default()
        }
    }

    pub fn output(mut self, output: Output) -> Self {
        self.output = output;
        self
    }

    pub fn without_equilibrium_stop(mut self) -> Self {
        self.detect_equilibrium = false;
        self
    }
}

/// F(U)/ζ(U).
pub fn eval_singular_rhs(spec: &SystemSpec, u: &DVector<f64>, eps_zeta: f64) -> Result<DVector<f64>> {
    spec.check_dim(u)?;
    let zeta = spec.zeta(u);
    if zeta.abs() <= eps_zeta {
        return Err(Error::SingularEvaluation { zeta });
    }
    Ok(spec.f(u) / zeta)
}

/// F(U): the field in the rescaled time τ.
pub fn desingularized_rhs(spec: &SystemSpec, u: &DVector<f64>) -> Result<DVector<f64>> {
    spec.check_dim(u)?;
    Ok(spec.f(u))
}

fn output_grid(output: &Output, t0: f64, horizon: f64) -> Option<Vec<f64>> {
    match output {
        Output::Steps => None,
        Output::Uniform(dt) => {
            let n = ((horizon - t0) / dt).round() as usize;
            let mut g: Vec<f64> = (1..=n).map(|i| t0 + i as f64 * dt).collect();
            g.retain(|&t| t <= horizon + 1e-12 * horizon.abs().max(1.0));
            if let Some(last) = g.last_mut() {
                if (*last - horizon).abs() <= 1e-12 * horizon.abs().max(1.0) {
                    *last = horizon;
                }
            }
            Some(g)
        }
        Output::Times(ts) => Some(ts.iter().copied().filter(|&t| t > t0).collect()),
    }
}

struct Recorder<'a> {
    spec: &'a SystemSpec,
    dim: usize,
    samples: Vec<Sample>,
    record_all: bool,
    below_eq: usize,
    termination: Option<Termination>,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, tau: f64, u: DVector<f64>) -> (f64, f64) {
        let zeta = self.spec.zeta(&u);
        let f_norm = self.spec.f(&u).norm();
        let rhs_norm = f_norm / zeta.abs();
        self.samples.push(Sample {
            t,
            tau,
            u,
            zeta,
            rhs_norm,
        });
        (zeta, f_norm)
    }
}

/// Integrates dU/dt = F/ζ together with dτ/dt = 1/ζ from `u0` at t = τ = 0.
pub fn integrate_singular(
    spec: &SystemSpec,
    u0: &DVector<f64>,
    horizon: f64,
    opts: &SingularOptions,
) -> Result<Trajectory> {
    spec.check_dim(u0)?;
    let zeta0 = spec.zeta(u0);
    if !(zeta0 > opts.eps_zeta) {
        return Err(Error::InvalidInitialState { zeta: zeta0 });
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let d = spec.dim();
    let mut y0 = u0.as_slice().to_vec();
    y0.push(0.0);

    let rhs = |_t: f64, y: &[f64]| -> std::result::Result<Vec<f64>, StageFailure> {
        let u = &y[..d];
        let zeta = spec.zeta_slice(u);
        if !(zeta > opts.eps_zeta) {
            return Err(StageFailure);
        }
        let mut out: Vec<f64> = spec.f_slice(u).into_iter().map(|v| v / zeta).collect();
        out.push(1.0 / zeta);
        Ok(out)
    };

    let grid = output_grid(&opts.output, 0.0, horizon);
    let mut rec = Recorder {
        spec,
        dim: d,
        samples: Vec::new(),
        record_all: grid.is_none(),
        below_eq: 0,
        termination: None,
    };
    rec.push(0.0, 0.0, u0.clone());
    let blowup = 1.0 / opts.eps_blowup;

    let outcome = dopri5(
        rhs,
        0.0,
        &y0,
        horizon,
        &opts.step,
        grid.as_deref(),
        |t, y, on_grid| {
            let u = DVector::from_column_slice(&y[..rec.dim]);
            let zeta = spec.zeta(&u);
            let f_norm = spec.f(&u).norm();
            let rhs_norm = f_norm / zeta.abs();
            let mut stop = None;
            if zeta <= opts.eps_zeta || rhs_norm >= blowup {
                stop = Some(Termination::SingularityReached);
            } else if opts.detect_equilibrium {
                if f_norm / zeta.max(opts.eps_zeta) < opts.tol_eq {
                    rec.below_eq += 1;
                } else {
                    rec.below_eq = 0;
                }
                if rec.below_eq >= opts.equilibrium_window {
                    stop = Some(Termination::EquilibriumReached);
                }
            }
            if rec.record_all || on_grid || stop.is_some() {
                rec.push(t, y[rec.dim], u);
            }
            match stop {
                Some(term) => {
                    rec.termination = Some(term);
                    Flow::Stop
                }
                None => Flow::Continue,
            }
        },
    );

    let termination = match outcome.finish {
        Finish::Completed => Termination::HorizonReached,
        Finish::Stopped => rec.termination.unwrap_or(Termination::HorizonReached),
        Finish::Underflow { h, singular } => {
            let u = DVector::from_column_slice(&outcome.y[..d]);
            let zeta = spec.zeta(&u);
            let dzeta = spec.zeta_flux(&u).abs() / zeta.abs().max(opts.eps_zeta);
            let time_to_s = if dzeta > 0.0 { zeta.abs() / dzeta } else { f64::INFINITY };
            if singular || time_to_s <= opts.singular_horizon {
                if rec.samples.last().map(|s| s.t) != Some(outcome.t) {
                    rec.push(outcome.t, outcome.y[d], u);
                }
                Termination::SingularityReached
            } else {
                return Err(Error::StepFailure { t: outcome.t, h });
            }
        }
        Finish::MaxSteps => {
            return Err(Error::StepFailure {
                t: outcome.t,
                h: 0.0,
            })
        }
    };
    Ok(Trajectory {
        samples: rec.samples,
        termination,
    })
}

/// Integrates the regular field dU/dτ = F(U) over τ ∈ [0, tau_end], with
/// dt/dτ = ζ co-integrated so samples carry both clocks.
pub fn integrate_desingularized(
    spec: &SystemSpec,
    u0: &DVector<f64>,
    tau_end: f64,
    opts: &SingularOptions,
) -> Result<Trajectory> {
    spec.check_dim(u0)?;
    let d = spec.dim();
    let mut y0 = u0.as_slice().to_vec();
    y0.push(0.0);
    let rhs = |_tau: f64, y: &[f64]| -> std::result::Result<Vec<f64>, StageFailure> {
        let u = &y[..d];
        let mut out = spec.f_slice(u);
        out.push(spec.zeta_slice(u));
        Ok(out)
    };
    let grid = output_grid(&opts.output, 0.0, tau_end);
    let record_all = grid.is_none();
    let mut samples = Vec::new();
    let mut push = |tau: f64, t: f64, u: DVector<f64>| {
        let zeta = spec.zeta(&u);
        let rhs_norm = spec.f(&u).norm() / zeta.abs();
        samples.push(Sample {
            t,
            tau,
            u,
            zeta,
            rhs_norm,
        });
    };
    push(0.0, 0.0, u0.clone());
    let mut below = 0usize;
    let mut stopped_eq = false;
    let outcome = dopri5(rhs, 0.0, &y0, tau_end, &opts.step, grid.as_deref(), |tau, y, on_grid| {
        let u = DVector::from_column_slice(&y[..d]);
        let mut stop = false;
        if opts.detect_equilibrium {
            if spec.f(&u).norm() < opts.tol_eq {
                below += 1;
            } else {
                below = 0;
            }
            stop = below >= opts.equilibrium_window;
        }
        if record_all || on_grid || stop {
            push(tau, y[d], u);
        }
        if stop {
            stopped_eq = true;
            Flow::Stop
        } else {
            Flow::Continue
        }
    });
    let termination = match outcome.finish {
        Finish::Completed => Termination::HorizonReached,
        Finish::Stopped if stopped_eq => Termination::EquilibriumReached,
        Finish::Stopped => Termination::HorizonReached,
        Finish::Underflow { h, .. } => return Err(Error::StepFailure { t: outcome.t, h }),
        Finish::MaxSteps => return Err(Error::StepFailure { t: outcome.t, h: 0.0 }),
    };
    Ok(Trajectory {
        samples,
        termination,
    })
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.u.len())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.dim();
        let mut header = vec!["t".to_string(), "tau".to_string()];
        header.extend((0..d).map(|i| format!("u_{i}")));
        header.push("zeta".into());
        header.push("rhs_norm".into());
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![fmt_num(s.t), fmt_num(s.tau)];
            row.extend(s.u.iter().map(|v| fmt_num(*v)));
            row.push(fmt_num(s.zeta));
            row.push(fmt_num(s.rhs_norm));
            writeln!(w, "{}", row.join(","))?;
        }
        writeln!(w, "# termination={}", self.termination)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v:.17e}")
}

/// Sampled monotone map between t and τ.
#[derive(Debug, Clone)]
pub struct TimeMap {
    t: Vec<f64>,
    tau: Vec<f64>,
    zeta: Vec<f64>,
}

/// Builds the sampled diffeomorphism t ↔ τ of a trajectory.
pub fn time_rescale(traj: &Trajectory) -> Result<TimeMap> {
    if traj.samples.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    for (i, s) in traj.samples.iter().enumerate() {
        if !(s.zeta > 0.0) {
            return Err(Error::NotDiffeomorphism {
                index: i,
                zeta: s.zeta,
            });
        }
    }
    for (i, w) in traj.samples.windows(2).enumerate() {
        if !(w[1].t > w[0].t && w[1].tau > w[0].tau) {
            return Err(Error::NotDiffeomorphism {
                index: i + 1,
                zeta: w[1].zeta,
            });
        }
    }
    let t0 = traj.samples[0].t;
    let tau0 = traj.samples[0].tau;
    Ok(TimeMap {
        t: traj.samples.iter().map(|s| s.t - t0).collect(),
        tau: traj.samples.iter().map(|s| s.tau - tau0).collect(),
        zeta: traj.samples.iter().map(|s| s.zeta).collect(),
    })
}

fn hermite(x: &[f64], y: &[f64], dy: &[f64], q: f64) -> f64 {
    let n = x.len();
    if n == 1 || q <= x[0] {
        return y[0] + dy[0] * (q - x[0]);
    }
    if q >= x[n - 1] {
        return y[n - 1] + dy[n - 1] * (q - x[n - 1]);
    }
    let i = match x.binary_search_by(|v| v.partial_cmp(&q).expect("finite times")) {
        Ok(i) => return y[i],
        Err(i) => i - 1,
    };
    let h = x[i + 1] - x[i];
    let s = (q - x[i]) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    h00 * y[i] + h10 * h * dy[i] + h01 * y[i + 1] + h11 * h * dy[i + 1]
}

impl TimeMap {
    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// τ(t) by cubic Hermite interpolation with dτ/dt = 1/ζ.
    pub fn tau_at(&self, t: f64) -> f64 {
        let d: Vec<f64> = self.zeta.iter().map(|z| 1.0 / z).collect();
        hermite(&self.t, &self.tau, &d, t)
    }

    /// t(τ) by cubic Hermite interpolation with dt/dτ = ζ.
    pub fn t_at(&self, tau: f64) -> f64 {
        hermite(&self.tau, &self.t, &self.zeta, tau)
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.t.windows(2).all(|w| w[1] > w[0]) && self.tau.windows(2).all(|w| w[1] > w[0])
    }
}
