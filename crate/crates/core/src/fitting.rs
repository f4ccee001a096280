//! Exponential distance law `EQC(d) = E0 + C0 exp(-gamma d)` and the
//! effective radius `r = 1/gamma + 1/2`.
//!
//! The fit is weighted least squares with weights `1/std_error^2`. For fixed
//! `gamma` the model is linear in `(E0, C0)`, so the profile cost over
//! `ln gamma` is scanned on a fixed grid, refined by golden section and then
//! polished with damped Gauss-Newton steps on all three parameters.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analytic::golden_section;
use crate::error::{Error, Result};

pub const GAMMA_MIN: f64 = 0.01;
pub const GAMMA_MAX: f64 = 50.0;
pub const MAX_ITERATIONS: usize = 200;
const SCAN_POINTS: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub d: f64,
    pub mean: f64,
    pub std_error: f64,
}

impl CurvePoint {
    pub fn new(d: f64, mean: f64, std_error: f64) -> Self {
        CurvePoint { d, mean, std_error }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// `C0 > 0`: the curve approaches `E0` from above.
    Attractive,
    /// `C0 < 0`: the curve approaches `E0` from below.
    Repulsive,
    /// The curve is flat from the first point on, so `gamma` is only bounded
    /// from below.
    LowerBoundedGamma,
    /// Gauss-Newton polishing hit the iteration cap; the profile optimum is
    /// reported.
    IterationCap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub gamma: f64,
    pub radius: f64,
    pub residual_rms: f64,
    pub flags: Vec<FitFlag>,
}

impl FitResult {
    pub fn has(&self, flag: FitFlag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn predict(&self, d: f64) -> f64 {
        self.e0 + self.c0 * libm::exp(-self.gamma * d)
    }
}

pub fn radius(gamma: f64) -> Result<f64> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(1.0 / gamma + 0.5)
    } else {
        Err(Error::OutOfDomain {
            value: gamma,
            lo: 0.0,
            hi: f64::INFINITY,
        })
    }
}

/// Divides every mean and error by the mean at `anchor_d`.
pub fn relative_curve(curve: &[CurvePoint], anchor_d: f64) -> Result<Vec<CurvePoint>> {
    let anchor = curve
        .iter()
        .find(|c| c.d == anchor_d)
        .ok_or_else(|| Error::DegenerateCurve(alloc::format!("no point at d = {anchor_d}")))?;
    if anchor.mean == 0.0 {
        return Err(Error::DegenerateCurve("anchor mean is zero".into()));
    }
    let s = anchor.mean;
    Ok(curve
        .iter()
        .map(|c| CurvePoint::new(c.d, c.mean / s, c.std_error / libm::fabs(s)))
        .collect())
}

struct Weighted<'a> {
    curve: &'a [CurvePoint],
    w: Vec<f64>,
}

impl Weighted<'_> {
    /// Weighted linear solve for `(E0, C0)` at fixed `gamma`, with its cost.
    fn profile(&self, gamma: f64) -> Option<(f64, f64, f64)> {
        let (mut s, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (c, &w) in self.curve.iter().zip(&self.w) {
            let x = libm::exp(-gamma * c.d);
            s += w;
            sx += w * x;
            sxx += w * x * x;
            sy += w * c.mean;
            sxy += w * x * c.mean;
        }
        let det = s * sxx - sx * sx;
        if det.is_nan() || det.abs() <= 1e-300 {
            return None;
        }
        let c0 = (s * sxy - sx * sy) / det;
        let e0 = (sy - c0 * sx) / s;
        Some((e0, c0, self.cost(e0, c0, gamma)))
    }

    fn cost(&self, e0: f64, c0: f64, gamma: f64) -> f64 {
        self.curve
            .iter()
            .zip(&self.w)
            .map(|(c, &w)| {
                let r = c.mean - e0 - c0 * libm::exp(-gamma * c.d);
                w * r * r
            })
            .sum()
    }

    /// Levenberg-Marquardt on `(E0, C0, ln gamma)`; returns the polished
    /// parameters and whether the step tolerance was reached.
    fn polish(&self, mut params: [f64; 3]) -> ([f64; 3], bool) {
        let eta_bounds = (libm::log(GAMMA_MIN), libm::log(GAMMA_MAX));
        let mut lambda = 1e-3;
        let mut cost = self.cost(params[0], params[1], libm::exp(params[2]));
        for _ in 0..MAX_ITERATIONS {
            let gamma = libm::exp(params[2]);
            let mut jtj = [[0.0; 3]; 3];
            let mut jtr = [0.0; 3];
            for (c, &w) in self.curve.iter().zip(&self.w) {
                let x = libm::exp(-gamma * c.d);
                let r = c.mean - params[0] - params[1] * x;
                let j = [1.0, x, -params[1] * x * c.d * gamma];
                for a in 0..3 {
                    jtr[a] += w * j[a] * r;
                    for b in 0..3 {
                        jtj[a][b] += w * j[a] * j[b];
                    }
                }
            }
            let mut damped = jtj;
            for (a, row) in damped.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(1e-12);
            }
            let Some(step) = solve3(damped, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = [
                params[0] + step[0],
                params[1] + step[1],
                params[2] + step[2],
            ];
            trial[2] = trial[2].clamp(eta_bounds.0, eta_bounds.1);
            let trial_cost = self.cost(trial[0], trial[1], libm::exp(trial[2]));
            if trial_cost <= cost {
                let small = step
                    .iter()
                    .zip(&params)
                    .all(|(s, p)| libm::fabs(*s) <= 1e-12 * (1.0 + libm::fabs(*p)));
                params = trial;
                cost = trial_cost;
                lambda = (lambda * 0.1).max(1e-12);
                if small {
                    return (params, true);
                }
            } else {
                lambda *= 10.0;
                if lambda > 1e12 {
                    return (params, true);
                }
            }
        }
        (params, false)
    }
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    if d.is_nan() || libm::fabs(d) <= 1e-300 {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        *o = det(&m) / d;
    }
    Some(out)
}

/// Weighted fit of `E0 + C0 exp(-gamma d)`.
pub fn fit_exponential(curve: &[CurvePoint]) -> Result<FitResult> {
    let mut ds: Vec<f64> = curve.iter().map(|c| c.d).collect();
    ds.sort_by(f64::total_cmp);
    ds.dedup();
    if ds.len() < 4 {
        return Err(Error::DegenerateCurve(alloc::format!(
            "{} distinct distances, need at least 4",
            ds.len()
        )));
    }
    if curve.iter().any(|c| {
        !(c.d.is_finite() && c.mean.is_finite() && c.std_error.is_finite() && c.std_error >= 0.0)
    }) {
        return Err(Error::DegenerateCurve("non-finite point".into()));
    }
    let min_positive = curve
        .iter()
        .map(|c| c.std_error)
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let w = curve
        .iter()
        .map(|c| {
            if min_positive.is_infinite() {
                1.0
            } else {
                let s = if c.std_error > 0.0 {
                    c.std_error
                } else {
                    min_positive
                };
                1.0 / (s * s)
            }
        })
        .collect();
    let problem = Weighted { curve, w };

    let (lo, hi) = (libm::log(GAMMA_MIN), libm::log(GAMMA_MAX));
    let step = (hi - lo) / SCAN_POINTS as f64;
    let profile_cost = |eta: f64| {
        problem
            .profile(libm::exp(eta))
            .map_or(f64::INFINITY, |p| p.2)
    };
    let best = (0..=SCAN_POINTS)
        .map(|i| lo + i as f64 * step)
        .min_by(|a, b| profile_cost(*a).total_cmp(&profile_cost(*b)))
        .unwrap_or(0.0);
    let eta = golden_section(
        profile_cost,
        (best - step).max(lo),
        (best + step).min(hi),
        1e-13,
    );
    let (e0, c0, _) = problem.profile(libm::exp(eta)).ok_or(Error::FitDiverged {
        iterations: 0,
        residual_rms: f64::NAN,
    })?;

    let (params, converged) = problem.polish([e0, c0, eta]);
    let [e0, c0, eta] = params;
    let gamma = libm::exp(eta);
    let residual_rms = libm::sqrt(
        curve
            .iter()
            .map(|c| {
                let r = c.mean - e0 - c0 * libm::exp(-gamma * c.d);
                r * r
            })
            .sum::<f64>()
            / curve.len() as f64,
    );
    if ![e0, c0, gamma, residual_rms].iter().all(|v| v.is_finite()) {
        return Err(Error::FitDiverged {
            iterations: MAX_ITERATIONS,
            residual_rms,
        });
    }

    let mut flags = Vec::new();
    if c0 > 0.0 {
        flags.push(FitFlag::Attractive);
    } else if c0 < 0.0 {
        flags.push(FitFlag::Repulsive);
    }
    if eta >= hi - step || first_drop_is_noise(curve) {
        flags.push(FitFlag::LowerBoundedGamma);
    }
    if !converged {
        flags.push(FitFlag::IterationCap);
    }
    Ok(FitResult {
        e0,
        c0,
        gamma,
        radius: radius(gamma)?,
        residual_rms,
        flags,
    })
}

/// Whether the change between the two smallest distances is within two
/// combined standard errors.
fn first_drop_is_noise(curve: &[CurvePoint]) -> bool {
    let mut sorted: Vec<&CurvePoint> = curve.iter().collect();
    sorted.sort_by(|a, b| a.d.total_cmp(&b.d));
    let (a, b) = (sorted[0], sorted[1]);
    let sigma = libm::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
    sigma > 0.0 && libm::fabs(a.mean - b.mean) <= 2.0 * sigma
}
