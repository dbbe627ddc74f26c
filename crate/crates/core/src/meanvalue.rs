//! Disk statistics of scalar fields and the remainder of the asymptotic mean
//! value expansion
//!
//! ```text
//! u(x) = (p-2)/(p+2) * midrange_{B(x,eps)} u + 4/(p+2) * mean_{B(x,eps)} u + o(eps^2)
//! ```
//!
//! measured across a geometric ladder of radii. The `o(eps^2)` claim is
//! checked through the fitted log-log slope of the remainder: a slope above 2
//! (by [`SLOPE_MARGIN`]) or a remainder indistinguishable from numerical noise
//! counts as verified.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hodograph::HodographSeries;
use crate::scalar::{pairwise_sum, Scalar};

/// Smallest admissible quadrature resolution.
pub const MIN_RESOLUTION: usize = 16;
/// A slope must exceed `2 + SLOPE_MARGIN` to count as `o(eps^2)`.
pub const SLOPE_MARGIN: f64 = 0.05;
/// Remainders below this many quadrature-error estimates are noise.
pub const QUADRATURE_FLOOR_FACTOR: f64 = 10.0;
/// Roundoff floor in ulps of the field scale.
pub const ROUNDOFF_FLOOR_ULPS: f64 = 64.0;

const REFINE_CANDIDATES: usize = 4;
const GOLDEN_ITERATIONS: usize = 80;

/// A real field on the plane.
pub trait ScalarField<T: Scalar>: Sync {
    fn value(&self, z: Complex<T>) -> Result<T>;

    /// `true` when the maximum principle places disk extrema on the boundary
    /// circle, so interior sampling can be skipped.
    fn is_p_harmonic(&self) -> bool {
        false
    }
}

impl<T: Scalar> ScalarField<T> for HodographSeries<T> {
    fn value(&self, z: Complex<T>) -> Result<T> {
        self.eval_u_at_z(z)
    }

    fn is_p_harmonic(&self) -> bool {
        true
    }
}

/// Closure-backed field.
pub struct FnField<F> {
    f: F,
    p_harmonic: bool,
}

impl<F> FnField<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            p_harmonic: false,
        }
    }

    /// Marks the field as satisfying the maximum principle.
    pub fn p_harmonic(f: F) -> Self {
        Self {
            f,
            p_harmonic: true,
        }
    }
}

impl<T: Scalar, F: Fn(Complex<T>) -> T + Sync> ScalarField<T> for FnField<F> {
    fn value(&self, z: Complex<T>) -> Result<T> {
        Ok((self.f)(z))
    }

    fn is_p_harmonic(&self) -> bool {
        self.p_harmonic
    }
}

/// `x^{4/3} - y^{4/3}` with the 4/3-power extended oddly to negative arguments.
#[derive(Debug, Clone, Copy, Default)]
pub struct AronssonField;

impl<T: Scalar> ScalarField<T> for AronssonField {
    fn value(&self, z: Complex<T>) -> Result<T> {
        Ok(aronsson_field(z))
    }
}

pub fn aronsson_field<T: Scalar>(point: Complex<T>) -> T {
    let e = T::lit(4.0 / 3.0);
    let odd_pow = |t: T| t.signum() * t.abs().powf(e);
    if point.re == T::zero() && point.im == T::zero() {
        return T::zero();
    }
    odd_pow(point.re) - odd_pow(point.im)
}

fn evaluate<T: Scalar>(field: &dyn ScalarField<T>, z: Complex<T>) -> Result<T> {
    field.value(z).map_err(|e| Error::FieldEvaluation {
        re: z.re.as_f64(),
        im: z.im.as_f64(),
        source: Box::new(e),
    })
}

/// Mean, extrema and midrange of a field over a closed disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiskStatistics<T> {
    pub center: (T, T),
    pub radius: T,
    pub mean: T,
    pub max: T,
    pub min: T,
    pub midrange: T,
    /// `|mean(resolution) - mean(resolution / 2)|`.
    pub quadrature_error_estimate: T,
    /// Largest magnitude among the extrema, used for the roundoff floor.
    pub scale: T,
}

struct Extreme<T> {
    value: T,
    at: Complex<T>,
}

struct QuadratureOutcome<T> {
    mean: T,
    interior_max: Extreme<T>,
    interior_min: Extreme<T>,
}

/// Midpoint rule in polar coordinates: `shells` radial midpoints and
/// `4 * shells` angular midpoints per shell, area weighted.
fn polar_mean<T: Scalar>(
    field: &dyn ScalarField<T>,
    center: Complex<T>,
    radius: T,
    shells: usize,
) -> Result<QuadratureOutcome<T>> {
    let angular = 4 * shells;
    let dr = radius / T::from_usize_lossy(shells);
    let dtheta = T::TAU() / T::from_usize_lossy(angular);
    let half = T::lit(0.5);
    let per_shell: Vec<(T, T, Extreme<T>, Extreme<T>)> = (0..shells)
        .into_par_iter()
        .map(|i| {
            let r = (T::from_usize_lossy(i) + half) * dr;
            let mut values = Vec::with_capacity(angular);
            let mut hi = Extreme {
                value: T::neg_infinity(),
                at: center,
            };
            let mut lo = Extreme {
                value: T::infinity(),
                at: center,
            };
            for j in 0..angular {
                let theta = (T::from_usize_lossy(j) + half) * dtheta;
                let z = center + Complex::from_polar(r, theta);
                let v = evaluate(field, z)?;
                if v > hi.value {
                    hi = Extreme { value: v, at: z };
                }
                if v < lo.value {
                    lo = Extreme { value: v, at: z };
                }
                values.push(v);
            }
            Ok((r, pairwise_sum(&values), hi, lo))
        })
        .collect::<Result<_>>()?;
    let weighted: Vec<T> = per_shell.iter().map(|(r, s, _, _)| *r * *s).collect();
    let radii: Vec<T> = per_shell.iter().map(|(r, _, _, _)| *r).collect();
    let mean = pairwise_sum(&weighted) / (pairwise_sum(&radii) * T::from_usize_lossy(angular));
    let mut interior_max = Extreme {
        value: T::neg_infinity(),
        at: center,
    };
    let mut interior_min = Extreme {
        value: T::infinity(),
        at: center,
    };
    for (_, _, hi, lo) in per_shell {
        if hi.value > interior_max.value {
            interior_max = hi;
        }
        if lo.value < interior_min.value {
            interior_min = lo;
        }
    }
    Ok(QuadratureOutcome {
        mean,
        interior_max,
        interior_min,
    })
}

/// Golden-section search for the maximum of `g` on `[a, b]`, returning the best
/// value seen (never below `start`).
fn golden_max<T: Scalar>(
    g: &impl Fn(T) -> Result<T>,
    mut a: T,
    mut b: T,
    start: (T, T),
) -> Result<(T, T)> {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut best = start;
    let mut x1 = b - (b - a) * inv_phi;
    let mut x2 = a + (b - a) * inv_phi;
    let mut f1 = g(x1)?;
    let mut f2 = g(x2)?;
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 > best.1 {
            best = (x1, f1);
        }
        if f2 > best.1 {
            best = (x2, f2);
        }
        if b - a <= T::epsilon() * (T::one() + a.abs().max(b.abs())) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + (b - a) * inv_phi;
            f2 = g(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - (b - a) * inv_phi;
            f1 = g(x1)?;
        }
    }
    Ok(best)
}

/// Maximum of `sign * field` on the boundary circle: dense sampling, then
/// golden-section refinement of the best few local maxima.
fn boundary_extreme<T: Scalar>(
    field: &dyn ScalarField<T>,
    center: Complex<T>,
    radius: T,
    samples: usize,
    sign: T,
) -> Result<Extreme<T>> {
    let dtheta = T::TAU() / T::from_usize_lossy(samples);
    let values: Vec<T> = (0..samples)
        .into_par_iter()
        .map(|j| {
            let theta = T::from_usize_lossy(j) * dtheta;
            evaluate(field, center + Complex::from_polar(radius, theta)).map(|v| v * sign)
        })
        .collect::<Result<_>>()?;
    let mut peaks: Vec<usize> = (0..samples)
        .filter(|&j| {
            let prev = values[(j + samples - 1) % samples];
            let next = values[(j + 1) % samples];
            values[j] >= prev && values[j] >= next
        })
        .collect();
    peaks.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    peaks.truncate(REFINE_CANDIDATES);
    let g =
        |theta: T| evaluate(field, center + Complex::from_polar(radius, theta)).map(|v| v * sign);
    let refined: Vec<(T, T)> = peaks
        .par_iter()
        .map(|&j| {
            let theta = T::from_usize_lossy(j) * dtheta;
            golden_max(&g, theta - dtheta, theta + dtheta, (theta, values[j]))
        })
        .collect::<Result<_>>()?;
    let (theta, value) = refined
        .into_iter()
        .fold((T::zero(), T::neg_infinity()), |acc, c| {
            if c.1 > acc.1 {
                c
            } else {
                acc
            }
        });
    Ok(Extreme {
        value: value * sign,
        at: center + Complex::from_polar(radius, theta),
    })
}

/// Compass search for the maximum of `sign * field` over the closed disk,
/// started from an interior sample.
fn interior_refine<T: Scalar>(
    field: &dyn ScalarField<T>,
    center: Complex<T>,
    radius: T,
    start: Extreme<T>,
    step: T,
    sign: T,
) -> Result<Extreme<T>> {
    let mut at = start.at;
    let mut best = start.value * sign;
    let mut step = step;
    let stop = radius * T::lit(1e-12);
    let dirs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];
    while step > stop {
        let mut moved = false;
        for (dx, dy) in dirs {
            let mut cand = at + Complex::new(T::lit(dx), T::lit(dy)) * step;
            let off = cand - center;
            if off.norm() > radius {
                cand = center + off * (radius / off.norm());
            }
            let v = evaluate(field, cand)? * sign;
            if v > best {
                best = v;
                at = cand;
                moved = true;
                break;
            }
        }
        if !moved {
            step = step * T::lit(0.5);
        }
    }
    Ok(Extreme {
        value: best * sign,
        at,
    })
}

fn validate_disk<T: Scalar>(center: Complex<T>, radius: T, resolution: usize) -> Result<()> {
    if !(radius > T::zero()) || !radius.is_finite() {
        return Err(Error::invalid(
            "radius",
            format!("must be positive, got {radius}"),
        ));
    }
    if !(center.re.is_finite() && center.im.is_finite()) {
        return Err(Error::invalid("center", "not finite"));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::invalid(
            "resolution",
            format!("must be >= {MIN_RESOLUTION}, got {resolution}"),
        ));
    }
    Ok(())
}

/// Mean (polar midpoint quadrature), extrema and midrange over the closed
/// disk `B(center, radius)`.
///
/// Extrema come from `16 * resolution` boundary samples with golden-section
/// refinement. Fields that are not flagged p-harmonic are also scanned on the
/// interior quadrature nodes and refined by compass search when an interior
/// node beats the boundary.
pub fn disk_statistics<T: Scalar>(
    field: &dyn ScalarField<T>,
    center: Complex<T>,
    radius: T,
    resolution: usize,
) -> Result<DiskStatistics<T>> {
    validate_disk(center, radius, resolution)?;
    let fine = polar_mean(field, center, radius, resolution)?;
    let coarse = polar_mean(field, center, radius, resolution / 2)?;
    let samples = 16 * resolution;
    let one = T::one();
    let mut max = boundary_extreme(field, center, radius, samples, one)?;
    let mut min = boundary_extreme(field, center, radius, samples, -one)?;
    if !field.is_p_harmonic() {
        let step = radius / T::from_usize_lossy(resolution);
        if fine.interior_max.value > max.value {
            max = interior_refine(field, center, radius, fine.interior_max, step, one)?;
        }
        if fine.interior_min.value < min.value {
            min = interior_refine(field, center, radius, fine.interior_min, step, -one)?;
        }
    }
    let (max, min) = (max.value, min.value);
    Ok(DiskStatistics {
        center: (center.re, center.im),
        radius,
        mean: fine.mean,
        max,
        min,
        midrange: (max + min) / T::lit(2.0),
        quadrature_error_estimate: (fine.mean - coarse.mean).abs(),
        scale: max.abs().max(min.abs()),
    })
}

/// Remainder of one expansion at one radius, with its noise floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemainderSample<T> {
    pub radius: T,
    pub remainder: T,
    pub noise_floor: T,
    pub stats: DiskStatistics<T>,
    pub center_value: T,
}

impl<T: Scalar> RemainderSample<T> {
    pub fn above_floor(&self) -> bool {
        self.remainder.abs() >= self.noise_floor
    }
}

/// Weights `((p-2)/(p+2), 4/(p+2))` of midrange and mean in the plane.
pub fn amv_weights<T: Scalar>(p: T) -> (T, T) {
    let two = T::lit(2.0);
    ((p - two) / (p + two), T::lit(4.0) / (p + two))
}

/// Weights `((p-2)/(p+N), (2+N)/(p+N))` in dimension `N`; shown for reference.
pub fn amv_weights_in_dimension<T: Scalar>(p: T, dim: u32) -> (T, T) {
    let n = T::from_u32(dim).unwrap();
    let two = T::lit(2.0);
    ((p - two) / (p + n), (two + n) / (p + n))
}

fn roundoff_floor<T: Scalar>(scale: T, center_value: T) -> T {
    T::lit(ROUNDOFF_FLOOR_ULPS) * T::epsilon() * scale.max(center_value.abs())
}

/// Remainder sample for `1 < p < inf` (`Some(p)`) or the midrange-only
/// formula (`None`).
pub fn remainder_sample<T: Scalar>(
    field: &dyn ScalarField<T>,
    p: Option<T>,
    center: Complex<T>,
    radius: T,
    resolution: usize,
) -> Result<RemainderSample<T>> {
    if let Some(p) = p {
        if !(p > T::one()) || !p.is_finite() {
            return Err(Error::invalid(
                "p",
                format!("must satisfy 1 < p < inf, got {p}"),
            ));
        }
    }
    let stats = disk_statistics(field, center, radius, resolution)?;
    let center_value = evaluate(field, center)?;
    let roundoff = roundoff_floor(stats.scale, center_value);
    let (remainder, noise_floor) = match p {
        Some(p) => {
            let (wm, wa) = amv_weights(p);
            let floor = (T::lit(QUADRATURE_FLOOR_FACTOR) * wa * stats.quadrature_error_estimate)
                .max(roundoff);
            (wm * stats.midrange + wa * stats.mean - center_value, floor)
        }
        None => (stats.midrange - center_value, roundoff),
    };
    Ok(RemainderSample {
        radius,
        remainder,
        noise_floor,
        stats,
        center_value,
    })
}

/// `(p-2)/(p+2) * midrange + 4/(p+2) * mean - u(center)`.
pub fn amv_remainder<T: Scalar>(
    field: &dyn ScalarField<T>,
    p: T,
    center: Complex<T>,
    radius: T,
    resolution: usize,
) -> Result<T> {
    remainder_sample(field, Some(p), center, radius, resolution).map(|s| s.remainder)
}

/// `midrange - u(center)`, the `p = inf` expansion.
pub fn midrange_remainder<T: Scalar>(
    field: &dyn ScalarField<T>,
    center: Complex<T>,
    radius: T,
    resolution: usize,
) -> Result<T> {
    remainder_sample(field, None, center, radius, resolution).map(|s| s.remainder)
}

/// Least-squares fit of `|value| = c * radius^s` in log-log coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit<T> {
    pub exponent: T,
    /// Signed: carries the sign of the mean of the fitted values.
    pub coefficient: T,
    /// RMS of the log residuals.
    pub residual: T,
    pub points: usize,
}

pub fn fit_power_law<T: Scalar>(radii: &[T], values: &[T]) -> Option<PowerLawFit<T>> {
    let pts: Vec<(T, T)> = radii
        .iter()
        .zip(values)
        .filter(|(r, v)| **r > T::zero() && v.abs() > T::zero())
        .map(|(r, v)| (r.ln(), v.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = T::from_usize_lossy(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / m;
    let my = pts.iter().map(|p| p.1).sum::<T>() / m;
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
    if sxx == T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum::<T>()
        / m)
        .sqrt();
    let sign = values.iter().copied().sum::<T>().signum();
    Some(PowerLawFit {
        exponent: slope,
        coefficient: sign * intercept.exp(),
        residual,
        points: pts.len(),
    })
}

/// Ladder geometry: radii `eps_max * ratio^j` for `j < rungs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderConfig<T> {
    pub eps_max: T,
    pub rungs: usize,
    pub ratio: T,
    pub resolution: usize,
}

impl<T: Scalar> LadderConfig<T> {
    pub fn new(eps_max: T, rungs: usize, ratio: T, resolution: usize) -> Result<Self> {
        let cfg = Self {
            eps_max,
            rungs,
            ratio,
            resolution,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_max > T::zero()) || !self.eps_max.is_finite() {
            return Err(Error::invalid("eps_max", "must be positive"));
        }
        if self.rungs < 4 {
            return Err(Error::invalid(
                "rungs",
                format!("need at least 4, got {}", self.rungs),
            ));
        }
        if !(self.ratio > T::zero() && self.ratio < T::one()) {
            return Err(Error::invalid(
                "ratio",
                format!("must lie in (0, 1), got {}", self.ratio),
            ));
        }
        if self.resolution < MIN_RESOLUTION {
            return Err(Error::invalid(
                "resolution",
                format!("must be >= {MIN_RESOLUTION}, got {}", self.resolution),
            ));
        }
        Ok(())
    }

    pub fn radii(&self) -> Vec<T> {
        (0..self.rungs)
            .map(|j| self.eps_max * self.ratio.powi(j as i32))
            .collect()
    }
}

/// Remainders across a radius ladder and their fitted decay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayLadderReport<T> {
    pub radii: Vec<T>,
    pub remainders: Vec<T>,
    pub noise_floors: Vec<T>,
    pub used_in_fit: Vec<bool>,
    /// NaN when fewer than two rungs are above the floor.
    pub fitted_exponent: T,
    pub fitted_coefficient: T,
    /// Infinite when fewer than three rungs are above the floor.
    pub fit_residual: T,
    /// Every rung is at the noise floor: the remainder vanishes numerically.
    pub floor_hit: bool,
}

/// Outcome of a ladder against the `o(eps^2)` criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Remainder identically at the noise floor.
    FloorHit,
    /// Reliable fit with slope above `2 + SLOPE_MARGIN`.
    Verified,
    NotVerified,
}

/// JSON summary `{exponent, coefficient, residual, floor_hit}`; a non-finite
/// value is written as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderSummary {
    pub exponent: Option<f64>,
    pub coefficient: Option<f64>,
    pub residual: Option<f64>,
    pub floor_hit: bool,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl<T: Scalar> DecayLadderReport<T> {
    pub fn from_samples(radii: Vec<T>, remainders: Vec<T>, noise_floors: Vec<T>) -> Self {
        let used_in_fit: Vec<bool> = remainders
            .iter()
            .zip(&noise_floors)
            .map(|(r, f)| r.abs() >= *f && r.abs() > T::zero())
            .collect();
        let (fr, fv): (Vec<T>, Vec<T>) = radii
            .iter()
            .zip(&remainders)
            .zip(&used_in_fit)
            .filter(|(_, u)| **u)
            .map(|((r, v), _)| (*r, *v))
            .unzip();
        let fit = fit_power_law(&fr, &fv);
        let (fitted_exponent, fitted_coefficient, mut fit_residual) = match fit {
            Some(f) => (f.exponent, f.coefficient, f.residual),
            None => (T::nan(), T::nan(), T::infinity()),
        };
        if fr.len() < 3 {
            fit_residual = T::infinity();
        }
        let floor_hit = used_in_fit.iter().all(|u| !u);
        Self {
            radii,
            remainders,
            noise_floors,
            used_in_fit,
            fitted_exponent,
            fitted_coefficient,
            fit_residual,
            floor_hit,
        }
    }

    /// At least three rungs above the floor.
    pub fn reliable(&self) -> bool {
        self.fit_residual.is_finite()
    }

    pub fn verdict(&self) -> Verdict {
        if self.floor_hit {
            Verdict::FloorHit
        } else if self.reliable() && self.fitted_exponent > T::lit(2.0 + SLOPE_MARGIN) {
            Verdict::Verified
        } else {
            Verdict::NotVerified
        }
    }

    pub fn summary(&self) -> LadderSummary {
        LadderSummary {
            exponent: finite(self.fitted_exponent.as_f64()),
            coefficient: finite(self.fitted_coefficient.as_f64()),
            residual: finite(self.fit_residual.as_f64()),
            floor_hit: self.floor_hit,
        }
    }

    /// CSV with columns `radius,remainder,noise_floor,used_in_fit`, numbers in
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,remainder,noise_floor,used_in_fit\n");
        for i in 0..self.radii.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{}\n",
                self.radii[i].as_f64(),
                self.remainders[i].as_f64(),
                self.noise_floors[i].as_f64(),
                self.used_in_fit[i]
            ));
        }
        out
    }
}

/// Evaluates the remainder (`Some(p)`: mean value expansion, `None`: the
/// `p = inf` midrange formula) on every rung and fits its decay.
pub fn decay_ladder<T: Scalar>(
    field: &dyn ScalarField<T>,
    p: Option<T>,
    center: Complex<T>,
    config: &LadderConfig<T>,
) -> Result<DecayLadderReport<T>> {
    config.validate()?;
    let radii = config.radii();
    let mut remainders = Vec::with_capacity(radii.len());
    let mut floors = Vec::with_capacity(radii.len());
    for &r in &radii {
        let s = remainder_sample(field, p, center, r, config.resolution)?;
        remainders.push(s.remainder);
        floors.push(s.noise_floor);
    }
    Ok(DecayLadderReport::from_samples(radii, remainders, floors))
}
