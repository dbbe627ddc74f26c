//! Hodograph series `z = H(zeta)` near a critical point and the p-harmonic
//! function it generates.
//!
//! Mode `k` of the series is
//!
//! ```text
//! H_k(zeta) = (A_k zeta^k + eps_k conj(A_k) conj(zeta)^k) zeta^-n |zeta|^(lambda_k + n - k)
//!           = r^lambda_k (A_k w^(k-n) + eps_k conj(A_k) conj(w)^(k+n)),   zeta = r w, |w| = 1
//! ```
//!
//! so every term is positively homogeneous of degree `lambda_k`. The complex
//! gradient of the generated function is `f(H(zeta)) = zeta^n`, and
//! integrating `du = Re(2 zeta^n dH)` along the ray from 0 gives
//!
//! ```text
//! u(H(zeta)) = sum_k 2 lambda_k / (lambda_k + n) Re(zeta^n H_k(zeta))
//!            = sum_k 2 lambda_k (1 + eps_k) / (lambda_k + n) r^(n + lambda_k) Re(A_k w^k)
//! ```
//!
//! with the normalization `u(0) = 0`.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exponents::PLaplaceParams;
use crate::scalar::Scalar;

/// A point of the `z`- or `zeta`-plane.
pub type ComplexValue<T> = Complex<T>;

const NEWTON_BUDGET: usize = 80;
const BACKTRACK_STEPS: usize = 40;
const POLISH_STEPS: usize = 3;
const CONTINUATION_STEPS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Term<T> {
    k: u32,
    a: Complex<T>,
    lambda: T,
    epsilon: T,
}

impl<T: Scalar> Term<T> {
    /// Value of the term at `zeta = r w`.
    #[inline]
    fn eval_polar(&self, n: u32, r: T, w: Complex<T>) -> Complex<T> {
        let analytic = self.a * w.powi((self.k - n) as i32);
        let anti = self.a.conj() * w.conj().powi((self.k + n) as i32) * self.epsilon;
        (analytic + anti) * r.powf(self.lambda)
    }

    /// `(H_zeta, H_zetabar)` of the term at `zeta = r w`.
    fn wirtinger_polar(&self, n: u32, r: T, w: Complex<T>) -> (Complex<T>, Complex<T>) {
        let half = T::lit(0.5);
        let k = T::from_u32(self.k).unwrap();
        let nn = T::from_u32(n).unwrap();
        let lam = self.lambda;
        let scale = r.powf(lam - T::one()) * half;
        let wb = w.conj();
        let d_zeta = self.a * w.powi(self.k as i32 - n as i32 - 1) * (lam + k - nn)
            + self.a.conj() * wb.powi((self.k + n + 1) as i32) * (self.epsilon * (lam - nn - k));
        // eps_k (lambda + n + k) = lambda + n - k collapses both parts onto one factor.
        let d_zetabar = (self.a * w.powi((self.k - n + 1) as i32)
            + self.a.conj() * wb.powi((self.k + n - 1) as i32))
            * (lam + nn - k);
        (d_zeta * scale, d_zetabar * scale)
    }

    /// Coefficient `2 lambda (1 + eps) / (lambda + n)` of the closed-form u.
    fn u_weight(&self, n: u32) -> T {
        let nn = T::from_u32(n).unwrap();
        T::lit(2.0) * self.lambda * (T::one() + self.epsilon) / (self.lambda + nn)
    }
}

/// Coefficient `A_k` of mode `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode<T> {
    pub k: u32,
    pub coefficient: Complex<T>,
}

impl<T> Mode<T> {
    pub fn new(k: u32, coefficient: Complex<T>) -> Self {
        Self { k, coefficient }
    }
}

/// `(H_zeta, H_zetabar)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WirtingerPair<T> {
    pub d_zeta: Complex<T>,
    pub d_zetabar: Complex<T>,
}

impl<T: Scalar> WirtingerPair<T> {
    /// Real Jacobian determinant `|H_zeta|^2 - |H_zetabar|^2`.
    pub fn jacobian(&self) -> T {
        self.d_zeta.norm_sqr() - self.d_zetabar.norm_sqr()
    }

    /// Sense-preserving and locally injective.
    pub fn is_sense_preserving(&self) -> bool {
        self.d_zeta.norm() > self.d_zetabar.norm()
    }
}

/// Truncated hodograph series. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HodographSeries<T> {
    params: PLaplaceParams<T>,
    terms: Vec<Term<T>>,
    trust_radius: T,
    weighted_norm: T,
}

impl<T: Scalar> HodographSeries<T> {
    /// Builds a series from its modes. Modes are sorted by `k`; the main mode
    /// `k = n + 1` must be present and nonzero. `trust_radius = None` selects
    /// [`default_trust_radius`](Self::default_trust_radius).
    pub fn new(
        params: PLaplaceParams<T>,
        modes: Vec<Mode<T>>,
        trust_radius: Option<T>,
    ) -> Result<Self> {
        let n = params.n();
        let mut modes = modes;
        modes.sort_by_key(|m| m.k);
        if modes.windows(2).any(|w| w[0].k == w[1].k) {
            return Err(Error::invalid("modes", "duplicate mode index"));
        }
        let mut terms = Vec::with_capacity(modes.len());
        for m in &modes {
            if m.k <= n {
                return Err(Error::ModeIndex { k: m.k, n });
            }
            if !(m.coefficient.re.is_finite() && m.coefficient.im.is_finite()) {
                return Err(Error::invalid("modes", format!("A_{} is not finite", m.k)));
            }
            let lambda = params.lambda_unchecked(m.k);
            let epsilon = params.epsilon_unchecked(m.k);
            if !(lambda > T::zero()) || !(epsilon.abs() < T::one()) {
                return Err(Error::invalid(
                    "modes",
                    format!(
                        "mode {} has lambda = {lambda}, eps = {epsilon}; a valid mode needs lambda > 0 and |eps| < 1",
                        m.k
                    ),
                ));
            }
            terms.push(Term {
                k: m.k,
                a: m.coefficient,
                lambda,
                epsilon,
            });
        }
        match terms.first() {
            Some(t) if t.k == n + 1 && t.a.norm() > T::zero() => {}
            _ => {
                return Err(Error::invalid(
                    "modes",
                    format!("main mode A_{} must be present and nonzero", n + 1),
                ))
            }
        }
        let weighted_norm = terms
            .iter()
            .map(|t| T::from_u32(t.k).unwrap() * t.a.norm_sqr())
            .sum();
        let trust_radius = match trust_radius {
            Some(r) if r.is_finite() && r > T::zero() => r,
            Some(r) => {
                return Err(Error::invalid(
                    "trust_radius",
                    format!("must be positive, got {r}"),
                ))
            }
            None => dominance_radius(&terms),
        };
        Ok(Self {
            params,
            terms,
            trust_radius,
            weighted_norm,
        })
    }

    /// Heuristic radius within which the main term dominates the tail:
    /// `0.5 (|A_{n+1}| (1 - |eps_{n+1}|) / sum_{k>n+1} |A_k| (1 + |eps_k|))^(1/(lambda_{k1} - lambda_{n+1}))`
    /// with `k1` the first tail mode. Equals 1 for a single-mode series.
    pub fn default_trust_radius(&self) -> T {
        dominance_radius(&self.terms)
    }

    pub fn params(&self) -> &PLaplaceParams<T> {
        &self.params
    }

    pub fn trust_radius(&self) -> T {
        self.trust_radius
    }

    /// `sum_k k |A_k|^2`, finite by truncation.
    pub fn weighted_norm(&self) -> T {
        self.weighted_norm
    }

    pub fn modes(&self) -> Vec<Mode<T>> {
        self.terms.iter().map(|t| Mode::new(t.k, t.a)).collect()
    }

    pub fn mode_exponents(&self) -> Vec<(u32, T, T)> {
        self.terms
            .iter()
            .map(|t| (t.k, t.lambda, t.epsilon))
            .collect()
    }

    /// Exponent of the main term, `lambda_{n+1}`.
    pub fn main_exponent(&self) -> T {
        self.terms[0].lambda
    }

    /// Exponent of the first tail mode, if any.
    pub fn first_tail_exponent(&self) -> Option<T> {
        self.terms.get(1).map(|t| t.lambda)
    }

    pub fn is_single_mode(&self) -> bool {
        self.terms.len() == 1
    }

    /// The series reduced to its main term, which generates the special
    /// solution written 𝔄. Keeps the trust radius.
    pub fn main_term_series(&self) -> Self {
        let terms = vec![self.terms[0]];
        Self {
            params: self.params,
            weighted_norm: T::from_u32(terms[0].k).unwrap() * terms[0].a.norm_sqr(),
            terms,
            trust_radius: self.trust_radius,
        }
    }

    pub fn with_trust_radius(&self, trust_radius: T) -> Result<Self> {
        Self::new(self.params, self.modes(), Some(trust_radius))
    }

    fn check_trust(&self, zeta: Complex<T>) -> Result<()> {
        let r = zeta.norm();
        let slack = T::one() + T::lit(1e-12);
        if r.is_finite() && r <= self.trust_radius * slack {
            Ok(())
        } else {
            Err(Error::OutsideTrustRadius {
                radius: r.as_f64(),
                trust: self.trust_radius.as_f64(),
            })
        }
    }

    fn term(&self, k: u32) -> Result<&Term<T>> {
        self.terms
            .iter()
            .find(|t| t.k == k)
            .ok_or_else(|| Error::invalid("k", format!("mode {k} is not stored in the series")))
    }

    /// Mode `k` at `zeta`; zero at `zeta = 0` by continuity.
    pub fn eval_term(&self, k: u32, zeta: Complex<T>) -> Result<Complex<T>> {
        let term = self.term(k)?;
        let r = zeta.norm();
        if r == T::zero() {
            return Ok(Complex::new(T::zero(), T::zero()));
        }
        Ok(term.eval_polar(self.params.n(), r, zeta / r))
    }

    /// `(A(zeta), R(zeta))`: the main term and the sum of all later modes.
    pub fn split_main_remainder(&self, zeta: Complex<T>) -> Result<(Complex<T>, Complex<T>)> {
        self.check_trust(zeta)?;
        Ok(self.split_unchecked(zeta))
    }

    fn split_unchecked(&self, zeta: Complex<T>) -> (Complex<T>, Complex<T>) {
        let zero = Complex::new(T::zero(), T::zero());
        let r = zeta.norm();
        if r == T::zero() {
            return (zero, zero);
        }
        let w = zeta / r;
        let n = self.params.n();
        let main = self.terms[0].eval_polar(n, r, w);
        let rest = self.terms[1..]
            .iter()
            .fold(zero, |acc, t| acc + t.eval_polar(n, r, w));
        (main, rest)
    }

    /// `H(zeta)`, equal to `main + remainder` of [`split_main_remainder`](Self::split_main_remainder).
    pub fn eval_h(&self, zeta: Complex<T>) -> Result<Complex<T>> {
        self.check_trust(zeta)?;
        Ok(self.eval_h_unchecked(zeta))
    }

    fn eval_h_unchecked(&self, zeta: Complex<T>) -> Complex<T> {
        let (main, rest) = self.split_unchecked(zeta);
        main + rest
    }

    /// `(H_zeta, H_zetabar)`; undefined at the critical point.
    pub fn wirtinger_derivatives(&self, zeta: Complex<T>) -> Result<WirtingerPair<T>> {
        self.check_trust(zeta)?;
        self.wirtinger_unchecked(zeta)
    }

    fn wirtinger_unchecked(&self, zeta: Complex<T>) -> Result<WirtingerPair<T>> {
        let r = zeta.norm();
        if r == T::zero() {
            return Err(Error::SingularPoint);
        }
        let w = zeta / r;
        let n = self.params.n();
        let zero = Complex::new(T::zero(), T::zero());
        let (d_zeta, d_zetabar) = self.terms.iter().fold((zero, zero), |(a, b), t| {
            let (da, db) = t.wirtinger_polar(n, r, w);
            (a + da, b + db)
        });
        Ok(WirtingerPair { d_zeta, d_zetabar })
    }

    /// Dominance constant `(1 - |eps_k1|) |A_k1|` of the first tail mode: a
    /// lower bound for `|R(zeta)| / |zeta|^lambda_k1` up to the later modes.
    pub fn dominance_lower_bound(&self) -> Option<T> {
        self.terms
            .get(1)
            .map(|t| (T::one() - t.epsilon.abs()) * t.a.norm())
    }

    /// Modulus of the normalized tail beyond the first remainder mode,
    /// `|sum_{k > k1} H_k(zeta) / |zeta|^lambda_k1|`.
    pub fn normalized_tail(&self, zeta: Complex<T>) -> Result<T> {
        self.check_trust(zeta)?;
        let r = zeta.norm();
        if self.terms.len() < 3 || r == T::zero() {
            return Ok(T::zero());
        }
        let w = zeta / r;
        let n = self.params.n();
        let lead = self.terms[1].lambda;
        let zero = Complex::new(T::zero(), T::zero());
        let s = self.terms[2..]
            .iter()
            .fold(zero, |acc, t| acc + t.eval_polar(n, r, w));
        Ok(s.norm() / r.powf(lead))
    }

    /// Cauchy-type majorant for [`normalized_tail`](Self::normalized_tail):
    /// `sqrt(16 sum |A_k|^2 sum |zeta|^(2 (lambda_k - lambda_k1)))` over `k > k1`.
    pub fn cauchy_tail_bound(&self, zeta: Complex<T>) -> Result<T> {
        self.check_trust(zeta)?;
        if self.terms.len() < 3 {
            return Ok(T::zero());
        }
        let r = zeta.norm();
        let lead = self.terms[1].lambda;
        let tail = &self.terms[2..];
        let coeffs: T = tail.iter().map(|t| t.a.norm_sqr()).sum();
        let powers: T = tail
            .iter()
            .map(|t| r.powf(T::lit(2.0) * (t.lambda - lead)))
            .sum();
        Ok((T::lit(16.0) * coeffs * powers).sqrt())
    }

    /// Exact inverse of the main term alone. The angular equation
    /// `arg A(e^{i theta}) = arg z` is monotone in theta and solved by
    /// bisection; the radius follows from homogeneity.
    pub fn invert_main_term(&self, z: Complex<T>) -> Complex<T> {
        let zero = Complex::new(T::zero(), T::zero());
        let rho = z.norm();
        if rho == T::zero() {
            return zero;
        }
        let main = &self.terms[0];
        let n = self.params.n();
        let m = (2 * n + 2) as i32;
        let arg_a = main.a.arg();
        // c = eps conj(A) / A, so g(theta) = A e^{i theta} (1 + c e^{-i m theta}).
        let c = main.a.conj() / main.a * main.epsilon;
        let psi = |theta: T| {
            let w = Complex::from_polar(T::one(), -theta * T::from_i32(m).unwrap());
            theta + arg_a + (Complex::new(T::one(), T::zero()) + c * w).arg()
        };
        let target = z.arg();
        let spread = main.epsilon.abs().min(T::one()).asin() + T::lit(1e-3);
        let mut lo = target - arg_a - spread;
        let mut hi = target - arg_a + spread;
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if psi(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = (lo + hi) * T::lit(0.5);
        let w = Complex::from_polar(T::one(), theta);
        let g = main.eval_polar(n, T::one(), w);
        let r = (rho / g.norm()).powf(T::one() / main.lambda);
        w * r
    }

    fn residual_tol(z: Complex<T>) -> T {
        T::tol_or_ulps(1e-12) * z.norm().max(T::one())
    }

    /// Damped Newton for `H(zeta) = z` from `seed`. Returns the iterate with
    /// the smallest residual and whether it met the tolerance.
    fn newton(&self, z: Complex<T>, seed: Complex<T>) -> (Complex<T>, T, bool) {
        let tol = Self::residual_tol(z);
        let limit = self.trust_radius * T::lit(1.5);
        let mut zeta = seed;
        let mut res = (self.eval_h_unchecked(zeta) - z).norm();
        let mut polish = 0;
        for _ in 0..NEWTON_BUDGET {
            if res <= tol {
                polish += 1;
                if polish > POLISH_STEPS || res == T::zero() {
                    break;
                }
            }
            let pair = match self.wirtinger_unchecked(zeta) {
                Ok(p) => p,
                Err(_) => break,
            };
            let det = pair.jacobian();
            if !(det.abs() > T::zero()) || !det.is_finite() {
                break;
            }
            // Solve H_zeta d + H_zetabar conj(d) = -F for d.
            let f = z - self.eval_h_unchecked(zeta);
            let step = (pair.d_zeta.conj() * f - pair.d_zetabar * f.conj()) / det;
            let mut scale = T::one();
            let mut accepted = false;
            for _ in 0..BACKTRACK_STEPS {
                let cand = zeta + step * scale;
                if cand.norm() > T::zero() && cand.norm() <= limit {
                    let r = (self.eval_h_unchecked(cand) - z).norm();
                    if r < res {
                        zeta = cand;
                        res = r;
                        accepted = true;
                        break;
                    }
                }
                scale = scale * T::lit(0.5);
            }
            if !accepted {
                break;
            }
        }
        (zeta, res, res <= tol)
    }

    /// `zeta = chi(z)`, the inverse of `H`. Newton is seeded from `guess` or
    /// from the exact inverse of the main term; if it stalls, the target is
    /// approached along the ray `s z`, `s -> 1`.
    pub fn invert_h(&self, z: Complex<T>, guess: Option<Complex<T>>) -> Result<Complex<T>> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::invalid("z", "not finite"));
        }
        if z.norm() == T::zero() {
            return Ok(Complex::new(T::zero(), T::zero()));
        }
        let seed = match guess {
            Some(g) if g.norm() > T::zero() && g.re.is_finite() && g.im.is_finite() => g,
            _ => self.invert_main_term(z),
        };
        let (zeta, res, ok) = self.newton(z, seed);
        let zeta = if ok {
            zeta
        } else {
            self.continuation(z).ok_or(Error::InversionFailed {
                re: z.re.as_f64(),
                im: z.im.as_f64(),
                residual: res.as_f64(),
            })?
        };
        self.check_trust(zeta)?;
        Ok(zeta)
    }

    fn continuation(&self, z: Complex<T>) -> Option<Complex<T>> {
        let mut s = T::lit(1.0 / 64.0);
        let mut ds = s;
        let (mut zeta, _, ok) = self.newton(z * s, self.invert_main_term(z * s));
        if !ok {
            return None;
        }
        let min_ds = T::lit(1e-9);
        for _ in 0..CONTINUATION_STEPS {
            if s >= T::one() {
                return Some(zeta);
            }
            let next = (s + ds).min(T::one());
            let (cand, _, ok) = self.newton(z * next, zeta);
            if ok {
                zeta = cand;
                s = next;
                ds = ds * T::lit(2.0);
            } else {
                ds = ds * T::lit(0.5);
                if ds < min_ds {
                    return None;
                }
            }
        }
        None
    }

    /// `u(H(zeta))`, normalized by `u(0) = 0`.
    pub fn eval_u(&self, zeta: Complex<T>) -> Result<T> {
        self.check_trust(zeta)?;
        Ok(self.eval_u_unchecked(zeta))
    }

    fn eval_u_unchecked(&self, zeta: Complex<T>) -> T {
        let r = zeta.norm();
        if r == T::zero() {
            return T::zero();
        }
        let w = zeta / r;
        let n = self.params.n();
        let nn = T::from_u32(n).unwrap();
        self.terms
            .iter()
            .map(|t| t.u_weight(n) * r.powf(nn + t.lambda) * (t.a * w.powi(t.k as i32)).re)
            .fold(T::zero(), |acc, v| acc + v)
    }

    /// `u(z)`: inversion followed by [`eval_u`](Self::eval_u).
    pub fn eval_u_at_z(&self, z: Complex<T>) -> Result<T> {
        let zeta = self.invert_h(z, None)?;
        Ok(self.eval_u_unchecked(zeta))
    }

    /// `(u_x, u_y) = (2 Re zeta^n, -2 Im zeta^n)` at `zeta = chi(z)`.
    pub fn gradient_at_z(&self, z: Complex<T>) -> Result<(T, T)> {
        let zeta = self.invert_h(z, None)?;
        let f = zeta.powi(self.params.n() as i32);
        let two = T::lit(2.0);
        Ok((two * f.re, -two * f.im))
    }

    /// `u` at many points in parallel; output order follows input order.
    pub fn eval_u_at_points(&self, points: &[Complex<T>]) -> Vec<Result<T>> {
        points.par_iter().map(|&z| self.eval_u_at_z(z)).collect()
    }

    /// `min |H|` over `samples` points of the trust circle: the disk of this
    /// radius about 0 lies inside the image of the trust disk.
    pub fn image_inradius(&self, samples: usize) -> T {
        let samples = samples.max(8);
        let r = self.trust_radius;
        (0..samples)
            .map(|j| {
                let theta = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(samples);
                self.eval_h_unchecked(Complex::from_polar(r, theta)).norm()
            })
            .fold(T::infinity(), T::min)
    }
}

fn dominance_radius<T: Scalar>(terms: &[Term<T>]) -> T {
    let main = &terms[0];
    let Some(first_tail) = terms.get(1) else {
        return T::one();
    };
    let tail: T = terms[1..]
        .iter()
        .map(|t| t.a.norm() * (T::one() + t.epsilon.abs()))
        .sum();
    if tail == T::zero() {
        return T::one();
    }
    let lead = main.a.norm() * (T::one() - main.epsilon.abs());
    let gap = first_tail.lambda - main.lambda;
    T::lit(0.5) * (lead / tail).powf(T::one() / gap)
}

/// One mode of a [`SeriesDocument`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeDocument {
    pub k: u32,
    pub re: f64,
    pub im: f64,
}

/// JSON interchange form:
/// `{"p": real, "n": int, "modes": [{"k": int, "re": real, "im": real}], "trust_radius": real}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDocument {
    pub p: f64,
    pub n: u32,
    pub modes: Vec<ModeDocument>,
    pub trust_radius: f64,
}

impl SeriesDocument {
    /// Parses and validates a document, reporting the JSON path of the first
    /// offending field. A missing `trust_radius` selects the default radius.
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::SeriesDocument {
            path: "$".into(),
            reason: e.to_string(),
        })?;
        let obj = value
            .as_object()
            .ok_or_else(|| doc_err("$", "expected an object"))?;
        let p = number_at(obj.get("p"), "$.p")?;
        let n = integer_at(obj.get("n"), "$.n")?;
        let modes_value = obj
            .get("modes")
            .ok_or_else(|| doc_err("$.modes", "missing"))?;
        let modes_array = modes_value
            .as_array()
            .ok_or_else(|| doc_err("$.modes", "expected an array"))?;
        let mut modes = Vec::with_capacity(modes_array.len());
        for (i, m) in modes_array.iter().enumerate() {
            let base = format!("$.modes[{i}]");
            let mo = m
                .as_object()
                .ok_or_else(|| doc_err(&base, "expected an object"))?;
            modes.push(ModeDocument {
                k: integer_at(mo.get("k"), &format!("{base}.k"))?,
                re: number_at(mo.get("re"), &format!("{base}.re"))?,
                im: number_at(mo.get("im"), &format!("{base}.im"))?,
            });
        }
        let trust_radius = match obj.get("trust_radius") {
            None | Some(Value::Null) => f64::NAN,
            Some(v) => number_at(Some(v), "$.trust_radius")?,
        };
        let doc = SeriesDocument {
            p,
            n,
            modes,
            trust_radius,
        };
        doc.build::<f64>()?;
        Ok(doc)
    }

    /// Converts to a series, mapping construction errors onto document paths.
    pub fn build<T: Scalar>(&self) -> Result<HodographSeries<T>> {
        let params = PLaplaceParams::new(T::lit(self.p), self.n).map_err(|e| match e {
            Error::InvalidParameter { name, reason } => doc_err(&format!("$.{name}"), &reason),
            other => other,
        })?;
        for (i, m) in self.modes.iter().enumerate() {
            if m.k <= self.n {
                return Err(doc_err(
                    &format!("$.modes[{i}].k"),
                    &format!("k = {} must be >= n + 1 = {}", m.k, self.n + 1),
                ));
            }
        }
        let modes = self
            .modes
            .iter()
            .map(|m| Mode::new(m.k, Complex::new(T::lit(m.re), T::lit(m.im))))
            .collect();
        let trust = if self.trust_radius.is_nan() {
            None
        } else {
            Some(T::lit(self.trust_radius))
        };
        HodographSeries::new(params, modes, trust).map_err(|e| match e {
            Error::InvalidParameter { name, reason } => doc_err(&format!("$.{name}"), &reason),
            other => other,
        })
    }

    pub fn from_series<T: Scalar>(series: &HodographSeries<T>) -> Self {
        SeriesDocument {
            p: series.params.p().as_f64(),
            n: series.params.n(),
            modes: series
                .terms
                .iter()
                .map(|t| ModeDocument {
                    k: t.k,
                    re: t.a.re.as_f64(),
                    im: t.a.im.as_f64(),
                })
                .collect(),
            trust_radius: series.trust_radius.as_f64(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("series document serializes")
    }
}

fn doc_err(path: &str, reason: &str) -> Error {
    Error::SeriesDocument {
        path: path.to_string(),
        reason: reason.to_string(),
    }
}

fn number_at(v: Option<&Value>, path: &str) -> Result<f64> {
    let v = v.ok_or_else(|| doc_err(path, "missing"))?;
    let x = v
        .as_f64()
        .ok_or_else(|| doc_err(path, "expected a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(doc_err(path, "not finite"))
    }
}

fn integer_at(v: Option<&Value>, path: &str) -> Result<u32> {
    let v = v.ok_or_else(|| doc_err(path, "missing"))?;
    v.as_u64()
        .and_then(|x| u32::try_from(x).ok())
        .ok_or_else(|| doc_err(path, "expected a non-negative integer"))
}

/// Named series used throughout the tests and the CLI.
pub mod presets {
    use super::*;

    /// `p = 2`, `A_2 = 1`: the harmonic function `Re z^2` near its saddle.
    pub fn harmonic<T: Scalar>() -> HodographSeries<T> {
        let params = PLaplaceParams::new(T::lit(2.0), 1).unwrap();
        HodographSeries::new(
            params,
            vec![Mode::new(2, Complex::new(T::one(), T::zero()))],
            None,
        )
        .unwrap()
    }

    /// `n = 1`, `A_2 = 1`, `A_3 = 0.3`: the main term plus the worst remainder mode.
    pub fn worst_case<T: Scalar>(p: T) -> Result<HodographSeries<T>> {
        let params = PLaplaceParams::new(p, 1)?;
        HodographSeries::new(
            params,
            vec![
                Mode::new(2, Complex::new(T::one(), T::zero())),
                Mode::new(3, Complex::new(T::lit(0.3), T::zero())),
            ],
            None,
        )
    }

    /// `n = 1`, `A_2 = 1` only: generates the special solution 𝔄.
    pub fn main_term<T: Scalar>(p: T) -> Result<HodographSeries<T>> {
        let params = PLaplaceParams::new(p, 1)?;
        HodographSeries::new(
            params,
            vec![Mode::new(2, Complex::new(T::one(), T::zero()))],
            None,
        )
    }

    /// `n = 2`, `A_3 = 1`, `A_4 = 0.2`.
    pub fn n2<T: Scalar>(p: T) -> Result<HodographSeries<T>> {
        let params = PLaplaceParams::new(p, 2)?;
        HodographSeries::new(
            params,
            vec![
                Mode::new(3, Complex::new(T::one(), T::zero())),
                Mode::new(4, Complex::new(T::lit(0.2), T::zero())),
            ],
            None,
        )
    }
}
