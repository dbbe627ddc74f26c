//! Exponent family of the hodograph representation near a critical point.
//!
//! For the Stoilow index `n` and the exponent `p` the modes `k = n+1, n+2, ...`
//! carry the growth exponents
//!
//! ```text
//! lambda_k = (-n p + sqrt(4 k^2 (p - 1) + (p - 2)^2)) / 2
//! eps_k    = (lambda_k + n - k) / (lambda_k + n + k)
//! ```
//!
//! and the second-derivative regularity is governed by
//! `gamma_n / n = (sqrt(4 (1 + 1/n)^2 (p - 1) + (p - 2)^2) - p) / 2`.
//!
//! Thresholds (the Hölder-C² range endpoints and the criticality threshold
//! `lambda_{n+2} / lambda_{n+1}^2 = 1`) are found by scanning for a sign change
//! and bisecting, never from closed forms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower end of the scanned `p` range (just above 1).
pub const SCAN_LO: f64 = 1.0 + 1e-9;
/// Upper end of the scanned `p` range.
pub const SCAN_HI: f64 = 64.0;
/// Number of scan points used to bracket a threshold.
pub const SCAN_POINTS: usize = 2048;
/// Bisection width used for the Hölder-range endpoints.
pub const RANGE_TOL: f64 = 1e-12;
/// Default root-finding tolerance.
pub const ROOT_TOL: f64 = 1e-9;

/// The exponent `p` of the p-Laplacian and the Stoilow index `n` of the
/// critical point (`f = chi^n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PLaplaceParams<T> {
    p: T,
    n: u32,
}

impl<T: Scalar> PLaplaceParams<T> {
    pub fn new(p: T, n: u32) -> Result<Self> {
        if !p.is_finite() || p <= T::one() {
            return Err(Error::invalid(
                "p",
                format!("must satisfy 1 < p < inf, got {p}"),
            ));
        }
        if n == 0 {
            return Err(Error::invalid("n", "Stoilow index must be >= 1"));
        }
        Ok(Self { p, n })
    }

    #[inline]
    pub fn p(&self) -> T {
        self.p
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }

    fn check_mode(&self, k: u32) -> Result<()> {
        if k <= self.n {
            Err(Error::ModeIndex { k, n: self.n })
        } else {
            Ok(())
        }
    }

    /// `lambda_k` without the mode-range check.
    pub(crate) fn lambda_unchecked(&self, k: u32) -> T {
        let p = self.p;
        let two = T::lit(2.0);
        let kk = T::from_u32(k).unwrap();
        let n = T::from_u32(self.n).unwrap();
        let surd = (T::lit(4.0) * kk * kk * (p - T::one()) + (p - two) * (p - two)).sqrt();
        (surd - n * p) / two
    }

    pub(crate) fn epsilon_unchecked(&self, k: u32) -> T {
        let lambda = self.lambda_unchecked(k);
        let kk = T::from_u32(k).unwrap();
        let n = T::from_u32(self.n).unwrap();
        (lambda + n - kk) / (lambda + n + kk)
    }
}

/// Growth exponent of mode `k`.
pub fn lambda_k<T: Scalar>(params: &PLaplaceParams<T>, k: u32) -> Result<T> {
    params.check_mode(k)?;
    Ok(params.lambda_unchecked(k))
}

/// Mixing coefficient of the anti-analytic part of mode `k`.
///
/// Lies in `(-1, 1)` exactly when `lambda_k > -n`, which always holds for
/// `n = 1`. For `n >= 2` and large `p` it can leave the interval; callers that
/// need a valid series check [`ExponentTable::epsilon_in_range`].
pub fn epsilon_k<T: Scalar>(params: &PLaplaceParams<T>, k: u32) -> Result<T> {
    params.check_mode(k)?;
    Ok(params.epsilon_unchecked(k))
}

/// `n / gamma_n`. Second derivatives are Hölder continuous when this exceeds 1.
pub fn gamma_ratio<T: Scalar>(params: &PLaplaceParams<T>) -> T {
    let p = params.p;
    let two = T::lit(2.0);
    let n = T::from_u32(params.n).unwrap();
    let a = T::one() + T::one() / n;
    let gamma_over_n =
        ((T::lit(4.0) * a * a * (p - T::one()) + (p - two) * (p - two)).sqrt() - p) / two;
    T::one() / gamma_over_n
}

/// Open interval of `p` on which `n / gamma_n > 1`.
///
/// The upper end is `T::infinity()` when no crossing exists up to the scan
/// limit.
pub fn holder_c2_range<T: Scalar>(n: u32) -> Result<(T, T)> {
    if n == 0 {
        return Err(Error::invalid("n", "Stoilow index must be >= 1"));
    }
    let excess = |p: T| gamma_ratio(&PLaplaceParams { p, n }) - T::one();
    let hi = match first_downward_crossing(excess) {
        Some((lo, hi)) => bisect(excess, lo, hi, T::tol_or_ulps(RANGE_TOL), None).value,
        None => T::infinity(),
    };
    Ok((T::one(), hi))
}

/// Criticality ratio `lambda_{n+2} / lambda_{n+1}^2` with the two exponents it
/// was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Criticality<T> {
    pub ratio: T,
    pub lambda_main: T,
    pub lambda_next: T,
}

impl<T: Scalar> Criticality<T> {
    /// `false` flags the regime (reachable for `n = 2`, `p > ~9.55`) where the
    /// main exponent is not positive and the ratio no longer describes a
    /// decaying perturbation.
    pub fn main_exponent_positive(&self) -> bool {
        self.lambda_main > T::zero()
    }

    /// The mean value argument applies when the ratio exceeds one.
    pub fn exceeds_one(&self) -> bool {
        self.ratio > T::one()
    }
}

pub fn criticality<T: Scalar>(params: &PLaplaceParams<T>) -> Result<Criticality<T>> {
    let n = params.n;
    let lambda_main = params.lambda_unchecked(n + 1);
    let lambda_next = params.lambda_unchecked(n + 2);
    if lambda_main == T::zero() {
        return Err(Error::DegenerateDenominator {
            p: params.p.as_f64(),
        });
    }
    Ok(Criticality {
        ratio: lambda_next / (lambda_main * lambda_main),
        lambda_main,
        lambda_next,
    })
}

/// `lambda_{n+2} / lambda_{n+1}^2`; for `n = 1` this is `lambda_3 / lambda_2^2`.
pub fn criticality_ratio<T: Scalar>(params: &PLaplaceParams<T>) -> Result<T> {
    criticality(params).map(|c| c.ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdResult<T> {
    pub value: T,
    pub bracket: (T, T),
    /// `criticality_ratio(value) - 1`.
    pub residual: T,
    pub iterations: u32,
    /// Sign of `lambda_{n+1}` at the root; `false` is reported, not rejected.
    pub main_exponent_positive: bool,
}

/// Root of `criticality_ratio(p, n) = 1` where the ratio drops through one.
///
/// The scan covers `(1 + 1e-9, 64]` and takes the first downward crossing;
/// for `n = 2` this skips the upward crossing near `p ~ 1.1` where both
/// exponents are still negative.
pub fn solve_threshold<T: Scalar>(n: u32, tol: T) -> Result<ThresholdResult<T>> {
    if !(1..=2).contains(&n) {
        return Err(Error::UnsupportedIndex(n));
    }
    if !(tol > T::zero()) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let excess = |p: T| {
        let params = PLaplaceParams { p, n };
        match criticality(&params) {
            Ok(c) => c.ratio - T::one(),
            Err(_) => T::nan(),
        }
    };
    let (lo, hi) = first_downward_crossing(excess).ok_or(Error::BracketFailure {
        n,
        lo: SCAN_LO,
        hi: SCAN_HI,
    })?;
    let root = bisect(excess, lo, hi, tol, Some(tol));
    let params = PLaplaceParams { p: root.value, n };
    Ok(ThresholdResult {
        value: root.value,
        bracket: (root.lo, root.hi),
        residual: root.residual,
        iterations: root.iterations,
        main_exponent_positive: params.lambda_unchecked(n + 1) > T::zero(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentRow<T> {
    pub k: u32,
    pub lambda: T,
    pub epsilon: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentTable<T> {
    pub params: PLaplaceParams<T>,
    pub rows: Vec<ExponentRow<T>>,
}

impl<T: Scalar> ExponentTable<T> {
    pub fn lambda_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].lambda < w[1].lambda)
    }

    pub fn epsilon_in_range(&self) -> bool {
        self.rows.iter().all(|r| r.epsilon.abs() < T::one())
    }

    pub fn lambda(&self, k: u32) -> Option<T> {
        self.rows.iter().find(|r| r.k == k).map(|r| r.lambda)
    }
}

/// Rows `k = n+1 ..= k_max`.
pub fn exponent_table<T: Scalar>(
    params: &PLaplaceParams<T>,
    k_max: u32,
) -> Result<ExponentTable<T>> {
    if k_max <= params.n {
        return Err(Error::ModeIndex {
            k: k_max,
            n: params.n,
        });
    }
    let rows = (params.n + 1..=k_max)
        .map(|k| ExponentRow {
            k,
            lambda: params.lambda_unchecked(k),
            epsilon: params.epsilon_unchecked(k),
        })
        .collect();
    Ok(ExponentTable {
        params: *params,
        rows,
    })
}

fn scan_point<T: Scalar>(i: usize) -> T {
    let lo = T::lit(SCAN_LO);
    let hi = T::lit(SCAN_HI);
    lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(SCAN_POINTS - 1)
}

/// First adjacent pair of scan points where `g` goes from positive to
/// non-positive. Non-finite samples break the chain.
fn first_downward_crossing<T: Scalar>(g: impl Fn(T) -> T) -> Option<(T, T)> {
    let mut prev: Option<(T, T)> = None;
    for i in 0..SCAN_POINTS {
        let p = scan_point::<T>(i);
        let v = g(p);
        if !v.is_finite() {
            prev = None;
            continue;
        }
        if let Some((pp, pv)) = prev {
            if pv > T::zero() && v <= T::zero() {
                return Some((pp, p));
            }
        }
        prev = Some((p, v));
    }
    None
}

struct Bisection<T> {
    value: T,
    lo: T,
    hi: T,
    residual: T,
    iterations: u32,
}

/// Bisection on a bracket with `g(lo) > 0 >= g(hi)`. Stops once the bracket is
/// narrower than `width_tol` and, when given, `|g(mid)| <= residual_tol`, or
/// when the bracket can no longer shrink in `T`.
fn bisect<T: Scalar>(
    g: impl Fn(T) -> T,
    mut lo: T,
    mut hi: T,
    width_tol: T,
    residual_tol: Option<T>,
) -> Bisection<T> {
    let two = T::lit(2.0);
    let mut iterations = 0;
    loop {
        let mid = (lo + hi) / two;
        let gm = g(mid);
        let narrow = hi - lo <= width_tol;
        let small = residual_tol.is_none_or(|t| gm.abs() <= t);
        if (narrow && small) || mid <= lo || mid >= hi || iterations >= 200 {
            return Bisection {
                value: mid,
                lo,
                hi,
                residual: gm,
                iterations,
            };
        }
        if gm > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
}
