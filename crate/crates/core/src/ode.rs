//! Dormand–Prince 5(4) with Hairer's fourth-order continuous extension.
//!
//! Integration stops at the end point, at the first sign change of an
//! optional event function, when a component exceeds the blow-up bound, or
//! when the right-hand side cannot be evaluated.

use crate::expr::ExprError;

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), ExprError>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dopri5Options {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
    pub blow_up: f64,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Dopri5Options { atol: 1e-12, rtol: 1e-12, max_steps: 1_000_000, blow_up: 1e8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stop {
    Reached,
    /// The event function crossed from positive to non-positive at `t`.
    Event {
        t: f64,
    },
    BlowUp {
        t: f64,
    },
    Domain {
        t: f64,
        message: String,
    },
    StepLimit {
        t: f64,
    },
    StepTooSmall {
        t: f64,
    },
}

#[derive(Clone, Debug)]
struct Segment {
    t0: f64,
    h: f64,
    /// Five coefficient vectors of length `dim`, stored back to back.
    cont: Vec<f64>,
}

/// Accepted steps with their dense-output polynomials.
#[derive(Clone, Debug)]
pub struct Trajectory {
    dim: usize,
    t_start: f64,
    y_start: Vec<f64>,
    segments: Vec<Segment>,
    pub t_end: f64,
    pub y_end: Vec<f64>,
    pub stop: Stop,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.segments.len()
    }

    /// Step end points `(t, y)` including the initial point.
    pub fn nodes(&self) -> Vec<(f64, Vec<f64>)> {
        let mut out = vec![(self.t_start, self.y_start.clone())];
        for s in &self.segments {
            out.push((s.t0 + s.h, self.interpolate(s, 1.0)));
        }
        if let Some(last) = out.last_mut() {
            if self.t_end < last.0 {
                *last = (self.t_end, self.y_end.clone());
            }
        }
        out
    }

    fn interpolate(&self, s: &Segment, theta: f64) -> Vec<f64> {
        let d = self.dim;
        let th1 = 1.0 - theta;
        (0..d)
            .map(|i| {
                let c = |k: usize| s.cont[k * d + i];
                c(0) + theta * (c(1) + th1 * (c(2) + theta * (c(3) + th1 * c(4))))
            })
            .collect()
    }

    /// Dense output at `t` within `[t_start, t_end]`.
    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        let span = (self.t_end - self.t_start).abs().max(1.0);
        if t < self.t_start - 1e-14 * span || t > self.t_end + 1e-14 * span {
            return None;
        }
        if self.segments.is_empty() || t <= self.t_start {
            return Some(self.y_start.clone());
        }
        let idx = self.segments.partition_point(|s| s.t0 + s.h < t).min(self.segments.len() - 1);
        let s = &self.segments[idx];
        let theta = ((t - s.t0) / s.h).clamp(0.0, 1.0);
        Some(self.interpolate(s, theta))
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Event function for [`integrate`].
pub type Event<'a> = &'a dyn Fn(&[f64]) -> f64;

/// Integrates `sys` from `(t0, y0)` towards `t_end > t0`.
///
/// When `event` is given, integration stops at the first point where it
/// changes from positive to non-positive; the crossing is located on the
/// dense output to near machine precision.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &Dopri5Options,
    event: Option<Event>,
) -> Trajectory {
    let d = sys.dim();
    let mut traj = Trajectory {
        dim: d,
        t_start: t0,
        y_start: y0.to_vec(),
        segments: Vec::new(),
        t_end: t0,
        y_end: y0.to_vec(),
        stop: Stop::Reached,
    };
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; d]; 7];
    if let Err(e) = sys.rhs(t0, y0, &mut k[0]) {
        traj.stop = Stop::Domain { t: t0, message: e.to_string() };
        return traj;
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let span = t_end - t0;
    let mut h = initial_step(sys, t0, y0, &k[0], opts, span);
    let mut y_new = vec![0.0; d];
    let mut stage = vec![0.0; d];
    let mut err_old: f64 = 1e-4;
    let mut g_old = event.map(|g| g(y0));

    for _ in 0..opts.max_steps {
        if t >= t_end {
            break;
        }
        if h < 1e-15 * t.abs().max(span.abs()) {
            traj.stop = Stop::StepTooSmall { t };
            return traj;
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let mut domain_error = None;
        for s in 1..7 {
            for i in 0..d {
                let acc: f64 = (0..s).map(|j| A[s][j] * k[j][i]).sum();
                stage[i] = y[i] + h * acc;
            }
            if let Err(e) = sys.rhs(t + C[s] * h, &stage, &mut k[s]) {
                domain_error = Some(e);
                break;
            }
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
        }
        if let Some(err) = domain_error {
            // A trial step may leave the domain while the solution does not.
            h *= 0.25;
            if h < 1e-15 * t.abs().max(span.abs()) {
                traj.stop = Stop::Domain { t, message: err.to_string() };
                return traj;
            }
            continue;
        }
        let mut err = 0.0;
        for i in 0..d {
            let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / d as f64).sqrt();
        if !err.is_finite() {
            h *= 0.25;
            continue;
        }
        if err <= 1.0 {
            let mut cont = vec![0.0; 5 * d];
            for i in 0..d {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                cont[i] = y[i];
                cont[d + i] = ydiff;
                cont[2 * d + i] = bspl;
                cont[3 * d + i] = ydiff - h * k[6][i] - bspl;
                cont[4 * d + i] = h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>();
            }
            traj.segments.push(Segment { t0: t, h, cont });
            let t_next = if last { t_end } else { t + h };

            if let (Some(g), Some(g0)) = (event, g_old) {
                let g1 = g(&y_new);
                if g0 > 0.0 && g1 <= 0.0 {
                    let seg = traj.segments.last().unwrap().clone();
                    let (mut lo, mut hi) = (0.0f64, 1.0f64);
                    for _ in 0..100 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        if g(&traj.interpolate(&seg, mid)) > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    traj.t_end = seg.t0 + hi * seg.h;
                    traj.y_end = traj.interpolate(&seg, hi);
                    traj.stop = Stop::Event { t: traj.t_end };
                    return traj;
                }
                g_old = Some(g1);
            }

            t = t_next;
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
            traj.t_end = t;
            traj.y_end = y.clone();
            if y.iter().any(|v| !v.is_finite() || v.abs() > opts.blow_up) {
                traj.stop = Stop::BlowUp { t };
                return traj;
            }
            // PI step control
            let fac = 0.9 * err.max(1e-10).powf(-0.17) * err_old.powf(0.04);
            err_old = err.max(1e-4);
            h *= fac.clamp(0.2, 10.0);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    if t < t_end {
        traj.stop = Stop::StepLimit { t };
    }
    traj
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    opts: &Dopri5Options,
    span: f64,
) -> f64 {
    let d = y0.len() as f64;
    let sc: Vec<f64> = y0.iter().map(|y| opts.atol + opts.rtol * y.abs()).collect();
    let norm = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / d).sqrt();
    let d0 = norm(y0);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span.abs());
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    if sys.rhs(t0 + h0, &y1, &mut f1).is_err() {
        return h0 * 1e-3;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), ExprError> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        }
    }

    #[test]
    fn harmonic_oscillator_and_dense_output() {
        let opts = Dopri5Options { atol: 1e-12, rtol: 1e-12, ..Default::default() };
        let traj = integrate(&Oscillator, 0.0, &[0.0, 1.0], 10.0, &opts, None);
        assert_eq!(traj.stop, Stop::Reached);
        assert!((traj.y_end[0] - 10f64.sin()).abs() < 1e-10);
        for i in 0..=100 {
            let t = 0.1 * i as f64;
            let y = traj.eval(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-10, "t={t}");
            assert!((y[1] - t.cos()).abs() < 1e-10, "t={t}");
        }
        assert!(traj.eval(10.5).is_none());
    }

    #[test]
    fn event_locates_first_zero() {
        let opts = Dopri5Options::default();
        let g = |y: &[f64]| y[0];
        let traj = integrate(&Oscillator, 0.0, &[1.0, 0.0], 10.0, &opts, Some(&g));
        match traj.stop {
            Stop::Event { t } => assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-11),
            ref other => panic!("unexpected stop {other:?}"),
        }
    }

    struct Riccati;
    impl OdeSystem for Riccati {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), ExprError> {
            dy[0] = y[0] * y[0];
            Ok(())
        }
    }

    #[test]
    fn finite_time_blow_up_is_a_stop_reason() {
        let opts = Dopri5Options { blow_up: 1e8, ..Default::default() };
        let traj = integrate(&Riccati, 0.0, &[1.0], 2.0, &opts, None);
        match traj.stop {
            Stop::BlowUp { t } => assert!(t < 1.0 && t > 0.999),
            ref other => panic!("unexpected stop {other:?}"),
        }
    }
}
