//! Explicit Runge–Kutta integrators over flat complex buffers.
//!
//! Both integrators land exactly on every requested output time and hand the
//! state to an observer there, so long trajectories never need to be stored.

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// `out = y + h Σ c_j k_j`.
fn stage(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    out.copy_from_slice(y);
    for &(c, k) in terms {
        if c == 0.0 {
            continue;
        }
        let hc = h * c;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += ki * hc;
        }
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty output grid".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "output grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Adaptive Dormand–Prince 5(4) with a max-norm mixed error test
/// `|err_i| ≤ abs_tol + rel_tol·max(|y_i|, |y_new_i|)`.
///
/// `y` holds the state at `t_grid[0]` on entry and at the last grid time on
/// return. The observer sees every grid time, including the first.
#[allow(clippy::too_many_arguments)]
pub fn dormand_prince<F, O>(
    mut rhs: F,
    y: &mut [C64],
    t_grid: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_step: f64,
    mut observer: O,
) -> Result<StepStats>
where
    F: FnMut(&[C64], &mut [C64]),
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    check_grid(t_grid)?;
    let n = y.len();
    let zero = C64::new(0.0, 0.0);
    let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![zero; n]).collect();
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut stats = StepStats::default();

    let mut t = t_grid[0];
    observer(0, t, y)?;
    if t_grid.len() == 1 {
        return Ok(stats);
    }
    let mut h = max_step.min(1e-2).min(t_grid[t_grid.len() - 1] - t);
    rhs(y, &mut k[0]);
    stats.rhs_evals += 1;

    for (idx, &t_out) in t_grid.iter().enumerate().skip(1) {
        while t < t_out {
            let remaining = t_out - t;
            let landing = h >= remaining;
            let h_try = if landing { remaining } else { h };
            if h_try <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, h: h_try });
            }

            {
                let (k1, rest) = k.split_at_mut(1);
                let k1 = &k1[0];
                stage(&mut tmp, y, h_try, &[(A21, k1)]);
                rhs(&tmp, &mut rest[0]);
                stage(&mut tmp, y, h_try, &[(A31, k1), (A32, &rest[0])]);
                rhs(&tmp, &mut rest[1]);
                stage(
                    &mut tmp,
                    y,
                    h_try,
                    &[(A41, k1), (A42, &rest[0]), (A43, &rest[1])],
                );
                rhs(&tmp, &mut rest[2]);
                stage(
                    &mut tmp,
                    y,
                    h_try,
                    &[(A51, k1), (A52, &rest[0]), (A53, &rest[1]), (A54, &rest[2])],
                );
                rhs(&tmp, &mut rest[3]);
                stage(
                    &mut tmp,
                    y,
                    h_try,
                    &[
                        (A61, k1),
                        (A62, &rest[0]),
                        (A63, &rest[1]),
                        (A64, &rest[2]),
                        (A65, &rest[3]),
                    ],
                );
                rhs(&tmp, &mut rest[4]);
                stage(
                    &mut y_new,
                    y,
                    h_try,
                    &[
                        (B1, k1),
                        (B3, &rest[1]),
                        (B4, &rest[2]),
                        (B5, &rest[3]),
                        (B6, &rest[4]),
                    ],
                );
                rhs(&y_new, &mut rest[5]);
            }
            stats.rhs_evals += 6;

            let mut err: f64 = 0.0;
            for i in 0..n {
                let e = (k[0][i] * E1
                    + k[2][i] * E3
                    + k[3][i] * E4
                    + k[4][i] * E5
                    + k[5][i] * E6
                    + k[6][i] * E7)
                    * h_try;
                // squared moduli avoid a hypot per entry
                let scale = abs_tol + rel_tol * y[i].norm_sqr().max(y_new[i].norm_sqr()).sqrt();
                err = err.max(e.norm_sqr() / (scale * scale));
            }
            let err = err.sqrt();
            if !err.is_finite() {
                return Err(Error::NonFinite(t));
            }

            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if err <= 1.0 {
                y.copy_from_slice(&y_new);
                k.swap(0, 6);
                t = if landing { t_out } else { t + h_try };
                stats.accepted += 1;
                // a shortened landing step does not shrink the proposal
                h = if landing {
                    h.max(h_try * factor)
                } else {
                    h_try * factor
                };
                h = h.min(max_step);
            } else {
                stats.rejected += 1;
                h = h_try * factor.min(1.0);
            }
        }
        observer(idx, t, y)?;
    }
    Ok(stats)
}

/// Classical fixed-step fourth-order Runge–Kutta. Each output interval is
/// split into the smallest number of equal substeps not exceeding `step`.
pub fn rk4_fixed<F, O>(
    mut rhs: F,
    y: &mut [C64],
    t_grid: &[f64],
    step: f64,
    mut observer: O,
) -> Result<StepStats>
where
    F: FnMut(&[C64], &mut [C64]),
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    check_grid(t_grid)?;
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step must be positive, got {step}"
        )));
    }
    let n = y.len();
    let zero = C64::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let mut tmp = vec![zero; n];
    let mut stats = StepStats::default();

    observer(0, t_grid[0], y)?;
    for (idx, w) in t_grid.windows(2).enumerate() {
        let span = w[1] - w[0];
        let substeps = (span / step).ceil().max(1.0) as usize;
        let h = span / substeps as f64;
        for _ in 0..substeps {
            rhs(y, &mut k1);
            stage(&mut tmp, y, h, &[(0.5, &k1)]);
            rhs(&tmp, &mut k2);
            stage(&mut tmp, y, h, &[(0.5, &k2)]);
            rhs(&tmp, &mut k3);
            stage(&mut tmp, y, h, &[(1.0, &k3)]);
            rhs(&tmp, &mut k4);
            let h6 = h / 6.0;
            for i in 0..n {
                y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * h6;
            }
            stats.accepted += 1;
            stats.rhs_evals += 4;
        }
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(w[1]));
        }
        observer(idx + 1, w[1], y)?;
    }
    Ok(stats)
}
