//! Dormand–Prince 5(4) stepping with rejection and stage-failure handling.
//!
//! Stage evaluations may fail (the caller's right-hand side returns
//! [`StageFailure`]); such steps are rejected and the step shrinks. The
//! driver reports an underflow instead of erroring so callers can decide
//! whether the underflow is a blow-up or a genuine failure.

/// Right-hand side could not be evaluated at a stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageFailure;

#[derive(Debug, Clone)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Minimum step, relative to max(1, |t|).
    pub h_min: f64,
    pub h_max: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-10,
            atol: 1e-12,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            h_init: None,
            max_steps: 5_000_000,
        }
    }
}

impl StepControl {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        StepControl {
            rtol,
            atol,
            ..Default::default()
        }
    }
}

/// Observer verdict after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Finish {
    /// Reached `t_end`.
    Completed,
    /// Observer asked to stop.
    Stopped,
    /// Step fell below the minimum; `singular` is true when the last
    /// rejection came from a failed stage evaluation.
    Underflow { h: f64, singular: bool },
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub t: f64,
    pub y: Vec<f64>,
    pub finish: Finish,
    pub accepted: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn err_norm(err: &[f64], y0: &[f64], y1: &[f64], ctl: &StepControl) -> f64 {
    let n = err.len().max(1) as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = ctl.atol + ctl.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

fn initial_step<R>(rhs: &mut R, t0: f64, y0: &[f64], f0: &[f64], span: f64, ctl: &StepControl) -> f64
where
    R: FnMut(f64, &[f64]) -> Result<Vec<f64>, StageFailure>,
{
    let sc: Vec<f64> = y0.iter().map(|y| ctl.atol + ctl.rtol * y.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        let n = v.len().max(1) as f64;
        (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let h = match rhs(t0 + h0, &y1) {
        Ok(f1) => {
            let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
            let d2 = rms(&diff) / h0;
            let h1 = if d1.max(d2) <= 1e-15 {
                (h0 * 1e-3).max(1e-6)
            } else {
                (0.01 / d1.max(d2)).powf(0.2)
            };
            (100.0 * h0).min(h1)
        }
        Err(_) => h0,
    };
    h.min(span).min(ctl.h_max)
}

/// Integrates y' = rhs(t, y) forward from `t0` to `t_end`.
///
/// When `grid` is given (sorted, inside (t0, t_end]), steps are clamped so
/// that every grid time is hit exactly. `observer(t, y, on_grid)` runs after
/// every accepted step.
pub fn dopri5<R, O>(
    mut rhs: R,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    ctl: &StepControl,
    grid: Option<&[f64]>,
    mut observer: O,
) -> Outcome
where
    R: FnMut(f64, &[f64]) -> Result<Vec<f64>, StageFailure>,
    O: FnMut(f64, &[f64], bool) -> Flow,
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut accepted = 0;
    let mut rejected = 0;
    let span = t_end - t0;
    if span <= 0.0 {
        return Outcome {
            t,
            y,
            finish: Finish::Completed,
            accepted,
            rejected,
        };
    }
    let mut k1 = match rhs(t, &y) {
        Ok(f) => f,
        Err(_) => {
            return Outcome {
                t,
                y,
                finish: Finish::Underflow {
                    h: 0.0,
                    singular: true,
                },
                accepted,
                rejected,
            }
        }
    };
    let mut h = ctl
        .h_init
        .unwrap_or_else(|| initial_step(&mut rhs, t0, &y, &k1, span, ctl));
    let mut grid_idx = 0usize;
    let grid = grid.unwrap_or(&[]);
    while grid_idx < grid.len() && grid[grid_idx] <= t0 {
        grid_idx += 1;
    }
    let mut last_singular = false;
    let mut just_rejected = false;
    let mut k = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];

    loop {
        if t >= t_end {
            return Outcome {
                t,
                y,
                finish: Finish::Completed,
                accepted,
                rejected,
            };
        }
        if accepted + rejected >= ctl.max_steps {
            return Outcome {
                t,
                y,
                finish: Finish::MaxSteps,
                accepted,
                rejected,
            };
        }
        let h_min = ctl.h_min * t.abs().max(1.0);
        h = h.min(ctl.h_max);
        // clamp onto the next target (grid point or end)
        let target = if grid_idx < grid.len() {
            grid[grid_idx].min(t_end)
        } else {
            t_end
        };
        let h_proposed = h;
        let mut landing = false;
        if t + h >= target - 1e-13 * target.abs().max(1.0) {
            h = target - t;
            landing = true;
        }
        if h < h_min && !landing {
            return Outcome {
                t,
                y,
                finish: Finish::Underflow {
                    h,
                    singular: last_singular,
                },
                accepted,
                rejected,
            };
        }

        k[0].copy_from_slice(&k1);
        let mut stage_failed = false;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            match rhs(t + C[s] * h, &ytmp) {
                Ok(f) if f.iter().all(|v| v.is_finite()) => k[s] = f,
                _ => {
                    stage_failed = true;
                    break;
                }
            }
        }
        if stage_failed {
            rejected += 1;
            last_singular = true;
            just_rejected = true;
            if landing && h < h_min {
                return Outcome {
                    t,
                    y,
                    finish: Finish::Underflow { h, singular: true },
                    accepted,
                    rejected,
                };
            }
            h *= 0.25;
            continue;
        }
        // stage 7 was evaluated at y_new (FSAL)
        let ynew = ytmp.clone();
        let errv: Vec<f64> = (0..n)
            .map(|i| h * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>())
            .collect();
        let err = err_norm(&errv, &y, &ynew, ctl);
        if err <= 1.0 || (landing && h < h_min) {
            t = if landing { target } else { t + h };
            y = ynew;
            k1 = k[6].clone();
            accepted += 1;
            last_singular = false;
            let on_grid = landing && grid_idx < grid.len() && target == grid[grid_idx].min(t_end);
            if on_grid {
                grid_idx += 1;
            }
            if observer(t, &y, on_grid) == Flow::Stop {
                return Outcome {
                    t,
                    y,
                    finish: Finish::Stopped,
                    accepted,
                    rejected,
                };
            }
            let mut fac = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
            fac = fac.clamp(0.2, 5.0);
            if just_rejected {
                fac = fac.min(1.0);
            }
            just_rejected = false;
            h = if landing {
                h_proposed.max(h * fac)
            } else {
                h * fac
            };
        } else {
            rejected += 1;
            last_singular = false;
            just_rejected = true;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_accuracy() {
        let ctl = StepControl::with_tolerances(1e-11, 1e-14);
        let out = dopri5(
            |_, y| Ok(vec![-y[0], -3.0 * y[1]]),
            0.0,
            &[1.0, 2.0],
            2.0,
            &ctl,
            None,
            |_, _, _| Flow::Continue,
        );
        assert_eq!(out.finish, Finish::Completed);
        assert!((out.t - 2.0).abs() < 1e-15);
        assert!((out.y[0] - (-2.0f64).exp()).abs() < 1e-10);
        assert!((out.y[1] - 2.0 * (-6.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn grid_points_are_hit_exactly() {
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 * 0.1).collect();
        let mut seen = Vec::new();
        let out = dopri5(
            |_, y| Ok(vec![y[0]]),
            0.0,
            &[1.0],
            1.0,
            &StepControl::default(),
            Some(&grid),
            |t, _, on_grid| {
                if on_grid {
                    seen.push(t);
                }
                Flow::Continue
            },
        );
        assert_eq!(out.finish, Finish::Completed);
        assert_eq!(seen, grid);
    }

    #[test]
    fn stage_failure_leads_to_singular_underflow() {
        // y' = -1/(2y), y(0)=1 reaches y=0 at t=1
        let out = dopri5(
            |_, y| {
                if y[0] <= 1e-12 {
                    Err(StageFailure)
                } else {
                    Ok(vec![-0.5 / y[0]])
                }
            },
            0.0,
            &[1.0],
            2.0,
            &StepControl::default(),
            None,
            |_, _, _| Flow::Continue,
        );
        match out.finish {
            Finish::Underflow { .. } => {}
            other => panic!("unexpected finish {other:?}"),
        }
        assert!((out.t - 1.0).abs() < 1e-6);
    }

    #[test]
    fn observer_can_stop() {
        let out = dopri5(
            |_, y| Ok(vec![y[0]]),
            0.0,
            &[1.0],
            10.0,
            &StepControl::default(),
            None,
            |t, _, _| if t > 1.0 { Flow::Stop } else { Flow::Continue },
        );
        assert_eq!(out.finish, Finish::Stopped);
        assert!(out.t > 1.0 && out.t < 10.0);
    }
}
