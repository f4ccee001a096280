//! Closed-form long-distance EQC estimate.
//!
//! A terminal owns `b` internal bonds. Far apart, the channels between two
//! parties of `k` terminals are limited by how many of their `b k` internal
//! bonds can be paired, `EX(p) = E[min(X, Y)]` with `X, Y ~ Bin(b k, p)`.
//! Each paired bond must also escape into the medium, which contributes the
//! factor `(1 - (1 - p)^m)^alpha` with a lattice-dependent medium index
//! `alpha`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::lattice::LatticeKind;

/// Largest `b k` accepted by [`pairing_expectation`].
pub const MAX_PAIRING_BONDS: usize = 512;

/// Below this many bonds the binomial coefficients are exact integers.
const EXACT_BINOMIAL_LIMIT: usize = 20;

pub const ALPHA_SQUARE: f64 = 2.6;
pub const ALPHA_TRIANGLE: f64 = 0.9;
pub const ALPHA_HEXAGON: f64 = 2.8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeIndex {
    /// Internal bonds of one terminal.
    pub b: u32,
    /// Peripheral escape bonds per internal neighbor.
    pub m: u32,
    pub alpha: f64,
    /// Bond percolation threshold; the model is only advertised well above it.
    pub threshold: f64,
}

impl LatticeIndex {
    pub fn new(b: u32, m: u32, alpha: f64, threshold: f64) -> Result<Self> {
        if b == 0 || m == 0 || alpha.is_nan() || alpha < 0.0 {
            return Err(Error::InvalidScenario(alloc::format!(
                "invalid lattice index b={b} m={m} alpha={alpha}"
            )));
        }
        Ok(LatticeIndex {
            b,
            m,
            alpha,
            threshold,
        })
    }

    pub fn square(alpha: f64) -> Self {
        LatticeIndex {
            b: 4,
            m: 3,
            alpha,
            threshold: 0.5,
        }
    }

    pub fn triangle(alpha: f64) -> Self {
        LatticeIndex {
            b: 6,
            m: 5,
            alpha,
            threshold: 0.347_296_355_333_860_7,
        }
    }

    pub fn hexagon(alpha: f64) -> Self {
        LatticeIndex {
            b: 3,
            m: 2,
            alpha,
            threshold: 0.652_703_644_666_139_3,
        }
    }

    /// Index for a single-bond lattice with the reported medium index.
    pub fn for_kind(kind: LatticeKind) -> Option<Self> {
        match kind {
            LatticeKind::Square => Some(Self::square(ALPHA_SQUARE)),
            LatticeKind::Triangle => Some(Self::triangle(ALPHA_TRIANGLE)),
            LatticeKind::Hexagon => Some(Self::hexagon(ALPHA_HEXAGON)),
            _ => None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Smallest `p` at which values are not tagged as extrapolated.
    pub fn validity_floor(&self) -> f64 {
        self.threshold + 0.1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingExpectation {
    pub value: f64,
}

fn ln_choose(n: usize, i: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(i as f64 + 1.0) - libm::lgamma((n - i) as f64 + 1.0)
}

fn exact_choose(n: usize, i: usize) -> u64 {
    let i = i.min(n - i);
    (0..i).fold(1u64, |acc, t| acc * (n - t) as u64 / (t + 1) as u64)
}

/// Binomial(n, p) probability mass for `0..=n`.
pub(crate) fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut pmf = alloc::vec![0.0; n + 1];
    if p == 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p == 1.0 {
        pmf[n] = 1.0;
        return pmf;
    }
    let q = 1.0 - p;
    if n <= EXACT_BINOMIAL_LIMIT {
        for (i, w) in pmf.iter_mut().enumerate() {
            *w = exact_choose(n, i) as f64 * libm::pow(p, i as f64) * libm::pow(q, (n - i) as f64);
        }
    } else {
        let (lp, lq) = (libm::log(p), libm::log1p(-p));
        for (i, w) in pmf.iter_mut().enumerate() {
            *w = libm::exp(ln_choose(n, i) + i as f64 * lp + (n - i) as f64 * lq);
        }
    }
    pmf
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `sum_{1<=i,j<=bk} min(i,j) C(bk,i) C(bk,j) p^(i+j) (1-p)^(2bk-i-j)`.
pub fn pairing_expectation(b: u32, p: f64, k: u32) -> Result<PairingExpectation> {
    check_probability(p)?;
    let n = b as usize * k as usize;
    if n == 0 {
        return Err(Error::InvalidScenario("b and k must be positive".into()));
    }
    if n > MAX_PAIRING_BONDS {
        return Err(Error::PairingOverflow(n, MAX_PAIRING_BONDS));
    }
    let pmf = binomial_pmf(n, p);
    let mut acc = Compensated::default();
    for i in 1..=n {
        for j in 1..=n {
            acc.add(i.min(j) as f64 * pmf[i] * pmf[j]);
        }
    }
    Ok(PairingExpectation { value: acc.total() })
}

/// `EX(p) / (b k) * (1 - (1 - p)^m)^alpha`.
pub fn analytic_e0(index: &LatticeIndex, p: f64, k: u32) -> Result<f64> {
    let ex = pairing_expectation(index.b, p, k)?.value;
    let escape = 1.0 - libm::pow(1.0 - p, f64::from(index.m));
    Ok(ex / f64::from(index.b * k) * libm::pow(escape, index.alpha))
}

/// An analytic value plus whether `p` lies below the validity floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPoint {
    pub p: f64,
    pub e0: f64,
    pub extrapolated: bool,
}

pub fn analytic_point(index: &LatticeIndex, p: f64, k: u32) -> Result<AnalyticPoint> {
    Ok(AnalyticPoint {
        p,
        e0: analytic_e0(index, p, k)?,
        extrapolated: p < index.validity_floor(),
    })
}

const ALPHA_MAX: f64 = 50.0;
const ALPHA_GRID: usize = 1000;

/// Least-squares medium index for a measured `(p, E0)` curve.
///
/// Points at `p = 1` (and `p = 0`) do not depend on `alpha` and are ignored;
/// at least three informative points at two or more distinct `p` are needed.
pub fn fit_alpha(b: u32, m: u32, curve: &[(f64, f64)]) -> Result<f64> {
    let mut terms = Vec::with_capacity(curve.len());
    for &(p, e0) in curve {
        check_probability(p)?;
        if p > 0.0 && p < 1.0 {
            let base = pairing_expectation(b, p, 1)?.value / f64::from(b);
            let escape = 1.0 - libm::pow(1.0 - p, f64::from(m));
            terms.push((base, libm::log(escape), e0));
        }
    }
    if terms.len() < 3 {
        return Err(Error::DegenerateCurve(alloc::format!(
            "{} points with 0 < p < 1, need at least 3",
            terms.len()
        )));
    }
    let p0 = curve
        .iter()
        .find(|c| c.0 > 0.0 && c.0 < 1.0)
        .map(|c| c.0)
        .unwrap_or(0.0);
    if curve
        .iter()
        .filter(|c| c.0 > 0.0 && c.0 < 1.0)
        .all(|c| c.0 == p0)
    {
        return Err(Error::DegenerateCurve("all p values are equal".into()));
    }
    let cost = |alpha: f64| -> f64 {
        terms
            .iter()
            .map(|&(base, ln_escape, y)| {
                let r = base * libm::exp(alpha * ln_escape) - y;
                r * r
            })
            .sum()
    };
    let step = ALPHA_MAX / ALPHA_GRID as f64;
    let best = (0..=ALPHA_GRID)
        .map(|i| i as f64 * step)
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .unwrap_or(0.0);
    Ok(golden_section(
        cost,
        (best - step).max(0.0),
        (best + step).min(ALPHA_MAX),
        1e-12,
    ))
}

/// Minimizer of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}
