//! Event-driven integration of the perturbed piecewise systems and
//! Poincaré-return limit-cycle detection.
//!
//! The integrator is an adaptive Dormand–Prince 5(4) pair with dense output;
//! section crossings (y = 0) are located on the dense interpolant and the
//! active half-plane field switches there. The Poincaré section is the
//! family of left crossings x_a, where the unperturbed field points into
//! y > 0 for both systems; one revolution runs the upper branch first, then
//! the lower branch. To first order in ε one revolution changes H by ε·M(h),
//! so at the left crossing (where H_x < 0) the return displacement
//! x_return − x_start has sign −sign(ε·M).

use crate::error::{Error, Result};
use crate::systems::{
    hamiltonian, unperturbed_field, vector_field_compiled, CompiledPerturbation, Perturbation,
    PlanarState, Side, SystemId,
};

/// Integrator and event-localization settings.
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub rtol: f64,
    pub atol: f64,
    /// |y| threshold for a located crossing.
    pub event_tol: f64,
    /// |y| the trajectory must reach before crossing detection arms.
    pub arm_threshold: f64,
    /// Minimum |dy/dt| at a crossing; below this the crossing counts as
    /// tangential and the integration refuses to continue.
    pub tangency_tol: f64,
    pub max_steps: usize,
    /// Record the full trajectory (events are always recorded).
    pub record_points: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            rtol: 1e-10,
            atol: 1e-12,
            event_tol: 1e-12,
            arm_threshold: 1e-8,
            tangency_tol: 1e-7,
            max_steps: 5_000_000,
            record_points: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub side: Side,
}

/// One located section crossing.
#[derive(Debug, Clone, Copy)]
pub struct SectionCrossing {
    pub t: f64,
    pub x: f64,
    /// Side the trajectory arrived from.
    pub from: Side,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub events: Vec<SectionCrossing>,
    pub final_state: PlanarState,
    pub final_time: f64,
}

/// One full revolution of the return map on the section y = 0.
#[derive(Debug, Clone, Copy)]
pub struct ReturnMapSample {
    pub x_start: f64,
    pub x_return: f64,
    pub h_start: f64,
    pub h_return: f64,
}

/// A fixed point of the return map located by bisection.
#[derive(Debug, Clone, Copy)]
pub struct LimitCycleFinding {
    pub eps: f64,
    pub fixed_x: f64,
    pub h_cycle: f64,
    pub residual: f64,
}

// Dormand–Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
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
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

type V2 = [f64; 2];

fn axpy(y: V2, h: f64, terms: &[(f64, V2)]) -> V2 {
    let mut out = y;
    for &(c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Dense-output polynomial of one accepted step.
struct DenseSegment {
    t0: f64,
    h: f64,
    cont: [V2; 5],
}

impl DenseSegment {
    fn eval(&self, t: f64) -> V2 {
        let theta = (t - self.t0) / self.h;
        let th1 = 1.0 - theta;
        let mut out = [0.0; 2];
        for c in 0..2 {
            out[c] = self.cont[0][c]
                + theta
                    * (self.cont[1][c]
                        + th1 * (self.cont[2][c] + theta * (self.cont[3][c] + th1 * self.cont[4][c])));
        }
        out
    }
}

struct Stepper<'a> {
    sys: SystemId,
    eps: f64,
    p: &'a CompiledPerturbation,
    side: Side,
    opts: &'a SimOptions,
}

impl<'a> Stepper<'a> {
    fn f(&self, s: V2) -> Result<V2> {
        let (dx, dy) = vector_field_compiled(self.sys, s[0], s[1], self.side, self.eps, self.p)?;
        Ok([dx, dy])
    }

    /// One attempted step; returns (y1, error norm, k1, k7) and the dense
    /// segment when accepted by the caller.
    fn step(&self, t: f64, y0: V2, h: f64, k1: V2) -> Result<(V2, f64, V2, DenseSegment)> {
        let k2 = self.f(axpy(y0, h, &[(A2[0], k1)]))?;
        let k3 = self.f(axpy(y0, h, &[(A3[0], k1), (A3[1], k2)]))?;
        let k4 = self.f(axpy(y0, h, &[(A4[0], k1), (A4[1], k2), (A4[2], k3)]))?;
        let k5 = self.f(axpy(y0, h, &[(A5[0], k1), (A5[1], k2), (A5[2], k3), (A5[3], k4)]))?;
        let k6 = self.f(axpy(
            y0,
            h,
            &[(A6[0], k1), (A6[1], k2), (A6[2], k3), (A6[3], k4), (A6[4], k5)],
        ))?;
        let y1 = axpy(y0, h, &[(B[0], k1), (B[2], k3), (B[3], k4), (B[4], k5), (B[5], k6)]);
        let k7 = self.f(y1)?;

        let ks = [k1, k2, k3, k4, k5, k6, k7];
        let mut err: f64 = 0.0;
        for c in 0..2 {
            let e: f64 = (0..7).map(|i| E[i] * ks[i][c]).sum();
            let sc = self.opts.atol + self.opts.rtol * y0[c].abs().max(y1[c].abs());
            err = err.max((h * e / sc).abs());
        }

        let mut cont = [[0.0; 2]; 5];
        for c in 0..2 {
            let ydiff = y1[c] - y0[c];
            let bspl = h * k1[c] - ydiff;
            cont[0][c] = y0[c];
            cont[1][c] = ydiff;
            cont[2][c] = bspl;
            cont[3][c] = ydiff - h * k7[c] - bspl;
            cont[4][c] = h * (0..7).map(|i| D[i] * ks[i][c]).sum::<f64>();
        }
        Ok((y1, err, k7, DenseSegment { t0: t, h, cont }))
    }
}

fn side_sign(side: Side) -> f64 {
    match side {
        Side::Upper => 1.0,
        Side::Lower => -1.0,
        Side::OnSection => 0.0,
    }
}

fn in_bounds(sys: SystemId, s: V2) -> bool {
    match sys {
        SystemId::Lv => s[0] > 1.0 / 3.0 + 1e-3 && s[0] < 100.0 && s[1].abs() < 100.0,
        SystemId::Bt => s[0].abs() < 2.5 && s[1].abs() < 4.0,
    }
}

/// Adaptive integration of the piecewise field with section-crossing events.
///
/// The state starts strictly off the section (or with the side resolved by
/// the caller); each located y = 0 crossing switches the active field and
/// counts as one event. Integration ends after `max_events` events.
pub fn integrate_piecewise(
    sys: SystemId,
    p: &Perturbation,
    eps: f64,
    start: PlanarState,
    max_events: usize,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if eps.abs() > 0.1 {
        return Err(Error::Precondition(format!("|eps| = {} exceeds 0.1", eps.abs())));
    }
    let side = match start.side {
        Side::OnSection => {
            return Err(Error::Precondition(
                "start lies on the switching line; resolve the side first".into(),
            ))
        }
        s => s,
    };
    let compiled = p.compile();
    integrate_compiled(sys, &compiled, eps, [start.x, start.y], side, max_events, opts)
}

fn integrate_compiled(
    sys: SystemId,
    compiled: &CompiledPerturbation,
    eps: f64,
    mut state: V2,
    mut side: Side,
    max_events: usize,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let mut t = 0.0;
    let mut points = Vec::new();
    let mut events: Vec<SectionCrossing> = Vec::new();
    let mut armed = state[1].abs() > opts.arm_threshold;
    let mut h: f64 = 1e-6;

    if opts.record_points {
        points.push(TrajectoryPoint { t, x: state[0], y: state[1], side });
    }

    let mut steps = 0usize;
    'outer: while events.len() < max_events {
        let stepper = Stepper { sys, eps, p: compiled, side, opts };
        let mut k1 = stepper.f(state)?;
        loop {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Consistency(format!(
                    "step budget of {} exhausted at t = {t}",
                    opts.max_steps
                )));
            }
            if h.abs() < 1e-15 * (1.0 + t.abs()) {
                return Err(Error::StepUnderflow { t, step: h });
            }
            let (y1, err, k7, dense) = stepper.step(t, state, h, k1)?;
            if err > 1.0 {
                h *= (0.9 * err.powf(-0.2)).max(0.2);
                continue;
            }
            let h_next = h * (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);

            if !armed && y1[1].abs() > opts.arm_threshold {
                armed = true;
            }

            // crossing: sign of y leaves the active side
            if armed && y1[1] * side_sign(side) <= 0.0 {
                let (mut lo, mut hi) = (t, t + h);
                let mut mid = hi;
                for _ in 0..200 {
                    mid = 0.5 * (lo + hi);
                    let ym = dense.eval(mid)[1];
                    if ym.abs() <= opts.event_tol {
                        break;
                    }
                    if ym * side_sign(side) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let cross = dense.eval(mid);
                let x_star = cross[0];
                let from = side;
                let new_side = if side == Side::Upper { Side::Lower } else { Side::Upper };
                // the outgoing field must carry the trajectory into the new
                // side; anything else is a tangency or the onset of sliding
                let (_, ydot_out) =
                    vector_field_compiled(sys, x_star, 0.0, new_side, eps, compiled)?;
                if ydot_out.abs() < opts.tangency_tol || ydot_out * side_sign(new_side) < 0.0 {
                    return Err(Error::Tangency { x: x_star, ydot: ydot_out });
                }
                t = mid;
                state = [x_star, 0.0];
                side = new_side;
                armed = false;
                events.push(SectionCrossing { t, x: x_star, from });
                if opts.record_points {
                    points.push(TrajectoryPoint { t, x: x_star, y: 0.0, side });
                }
                h = h_next.min(h).max(1e-9);
                continue 'outer;
            }

            t += h;
            state = y1;
            k1 = k7;
            h = h_next;
            if opts.record_points {
                points.push(TrajectoryPoint { t, x: state[0], y: state[1], side });
            }
            if !in_bounds(sys, state) {
                return Err(Error::Escape { x: state[0], y: state[1] });
            }
        }
    }

    Ok(Trajectory {
        points,
        events,
        final_state: PlanarState { x: state[0], y: state[1], side },
        final_time: t,
    })
}

/// Section segment swept by the period annulus on the left-crossing side,
/// shrunk by the given energy guard at both ends.
pub fn section_interval(sys: SystemId, h_guard: f64) -> Result<(f64, f64)> {
    let (lo, hi) = sys.energy_interval();
    let near_center = crate::systems::oval_endpoints(sys, lo + h_guard)?;
    let near_saddle = crate::systems::oval_endpoints(sys, hi - h_guard)?;
    // x_a decreases as h grows; return an increasing interval
    Ok((near_saddle.x_a, near_center.x_a))
}

/// One full revolution (upper branch, then lower branch) of the return map
/// from a left-crossing start.
pub fn poincare_return(
    sys: SystemId,
    p: &Perturbation,
    eps: f64,
    x_start: f64,
    opts: &SimOptions,
) -> Result<ReturnMapSample> {
    let ydot = unperturbed_field(sys, x_start, 0.0).1;
    if ydot <= 0.0 {
        return Err(Error::Precondition(format!(
            "x_start = {x_start} is not on the left-crossing section (unperturbed dy/dt = {ydot})"
        )));
    }
    let h_start = hamiltonian(sys, x_start, 0.0)?;
    sys.check_interior(h_start)?;

    let compiled = p.compile();
    let traj = integrate_compiled(sys, &compiled, eps, [x_start, 0.0], Side::Upper, 2, opts)?;
    if traj.events.len() != 2 {
        return Err(Error::Consistency(format!(
            "expected 2 section crossings, found {}",
            traj.events.len()
        )));
    }
    let x_return = traj.events[1].x;
    Ok(ReturnMapSample {
        x_start,
        x_return,
        h_start,
        h_return: hamiltonian(sys, x_return, 0.0)?,
    })
}

/// Brackets sign changes of the return displacement over sampled starts and
/// refines each to a fixed point of the return map.
pub fn find_limit_cycles(
    sys: SystemId,
    p: &Perturbation,
    eps: f64,
    x_interval: (f64, f64),
    samples: usize,
    opts: &SimOptions,
) -> Result<Vec<LimitCycleFinding>> {
    if eps == 0.0 {
        return Err(Error::Precondition("eps must be nonzero for a cycle search".into()));
    }
    if samples < 2 || x_interval.0 >= x_interval.1 {
        return Err(Error::Precondition("need an increasing interval and at least 2 samples".into()));
    }
    let disp = |x: f64| -> Result<f64> {
        let s = poincare_return(sys, p, eps, x, opts)?;
        Ok(s.x_return - s.x_start)
    };
    let xs: Vec<f64> = (0..samples)
        .map(|k| x_interval.0 + (x_interval.1 - x_interval.0) * k as f64 / (samples - 1) as f64)
        .collect();
    let ds: Vec<f64> = xs.iter().map(|&x| disp(x)).collect::<Result<_>>()?;

    let mut findings = Vec::new();
    for k in 0..samples - 1 {
        if ds[k] == 0.0 || ds[k] * ds[k + 1] >= 0.0 {
            continue;
        }
        let (mut lo, mut hi, mut dlo) = (xs[k], xs[k + 1], ds[k]);
        let mut mid = 0.5 * (lo + hi);
        let mut dmid = disp(mid)?;
        for _ in 0..80 {
            if (hi - lo).abs() < 1e-11 || dmid.abs() < 1e-13 {
                break;
            }
            if dmid.signum() == dlo.signum() {
                lo = mid;
                dlo = dmid;
            } else {
                hi = mid;
            }
            mid = 0.5 * (lo + hi);
            dmid = disp(mid)?;
        }
        findings.push(LimitCycleFinding {
            eps,
            fixed_x: mid,
            h_cycle: hamiltonian(sys, mid, 0.0)?,
            residual: dmid.abs(),
        });
    }
    Ok(findings)
}
