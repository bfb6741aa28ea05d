//! Dormand-Prince 5(4) pair with a PI step-size controller.

use crate::{Error, Point, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

pub(crate) struct Trial {
    pub y: Point,
    /// Derivative at the new point (first-same-as-last).
    pub f: Point,
    /// Max-norm of the error estimate scaled by `atol + rtol·max(|y|, |y_new|)`.
    pub err: f64,
}

/// One trial step from `(t, y)` with known `f0 = f(t, y)`.
pub(crate) fn trial<F>(f: &mut F, t: f64, y: &Point, f0: &Point, h: f64, atol: f64, rtol: f64) -> Result<Trial>
where
    F: FnMut(f64, &Point) -> Result<Point>,
{
    let mut k: Vec<Point> = Vec::with_capacity(7);
    k.push(f0.clone());
    for (i, row) in A.iter().enumerate().skip(1) {
        let mut yi = y.clone();
        for (j, a) in row.iter().enumerate() {
            if *a != 0.0 {
                yi.axpy(h * a, &k[j], 1.0);
            }
        }
        if i == 6 {
            // Row 7 of A is the fifth-order solution itself.
            let f_new = f(t + h, &yi)?;
            k.push(f_new);
            let mut err = 0.0f64;
            for c in 0..y.len() {
                let e: f64 = (0..7).map(|j| E[j] * k[j][c]).sum::<f64>() * h;
                let sc = atol + rtol * y[c].abs().max(yi[c].abs());
                err = err.max((e / sc).abs());
            }
            let f_last = k.pop().expect("seven stages");
            return Ok(Trial { y: yi, f: f_last, err });
        }
        k.push(f(t + C[i] * h, &yi)?);
    }
    unreachable!("tableau has seven rows")
}

/// Starting step by the usual two-derivative heuristic.
pub(crate) fn initial_step<F>(f: &mut F, t: f64, y: &Point, f0: &Point, atol: f64, rtol: f64, h_max: f64) -> Result<f64>
where
    F: FnMut(f64, &Point) -> Result<Point>,
{
    let rms = |v: &Point| -> f64 {
        let n = v.len().max(1) as f64;
        (v.iter().zip(y.iter()).map(|(a, b)| (a / (atol + rtol * b.abs())).powi(2)).sum::<f64>() / n).sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(h_max);
    let y1 = y + f0 * h0;
    let f1 = f(t + h0, &y1)?;
    let d2 = rms(&(&f1 - f0)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    Ok((100.0 * h0).min(h1).min(h_max))
}

/// PI controller in the form used by the classic DOPRI5 code.
pub(crate) struct Controller {
    fac_old: f64,
}

impl Controller {
    const BETA: f64 = 0.04;
    const EXPO: f64 = 0.2 - Self::BETA * 0.75;
    const SAFETY: f64 = 0.9;
    const MIN_SHRINK: f64 = 0.2;
    const MAX_GROW: f64 = 10.0;

    pub fn new() -> Self {
        Self { fac_old: 1e-4 }
    }

    /// Returns the next step size and whether the trial is accepted.
    pub fn next(&mut self, h: f64, err: f64) -> (f64, bool) {
        if !err.is_finite() {
            return (h * Self::MIN_SHRINK, false);
        }
        let fac11 = err.powf(Self::EXPO);
        if err <= 1.0 {
            let fac = (fac11 / self.fac_old.powf(Self::BETA) / Self::SAFETY)
                .clamp(1.0 / Self::MAX_GROW, 1.0 / Self::MIN_SHRINK);
            self.fac_old = err.max(1e-4);
            (h / fac, true)
        } else {
            (h / (fac11 / Self::SAFETY).min(1.0 / Self::MIN_SHRINK), false)
        }
    }
}

pub(crate) fn check_underflow(t: f64, h: f64) -> Result<()> {
    if h < 16.0 * f64::EPSILON * t.abs().max(1.0) {
        Err(Error::StepSizeUnderflow { t, h })
    } else {
        Ok(())
    }
}
