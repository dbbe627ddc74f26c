//! Grid solvers for the p-Laplace Dirichlet problem on a uniform square grid:
//! a minimizer of the discrete p-energy and a fixed-point iteration of the
//! mean value formula. Each cross-checks the other and the hodograph values.
//!
//! The discrete energy of a 2x2 cell averages `|grad u|^p` over its four
//! corners, each corner using the forward differences along the two cell
//! edges that meet there. Every edge difference enters, so the energy is
//! strictly convex in the interior values and reduces to the five-point
//! Laplacian at `p = 2`.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::meanvalue::{amv_weights, ScalarField};
use crate::scalar::{pairwise_sum, Scalar};

/// Regularization of `|grad u|` for `p < 2` at the first sweep.
pub const DELTA_START: f64 = 1e-10;
pub const BINARY_VERSION: u32 = 1;
const NODE_ITERATIONS: usize = 100;
const NESTED_MIN_SIZE: usize = 33;
const RESIDUAL_EVERY: usize = 4;

/// `x^e`, by multiplication when `e` is a small non-negative integer.
#[inline]
fn pow_real<T: Scalar>(x: T, e: T) -> T {
    if e.fract() == T::zero() && e >= T::zero() && e <= T::lit(16.0) {
        x.powi(e.to_i32().unwrap_or(0))
    } else {
        x.powf(e)
    }
}

/// `(b + d)^e - b^e` for `b > 0`, `b + d >= 0`, without cancellation.
#[inline]
fn pow_change<T: Scalar>(b: T, d: T, e: T) -> T {
    if e.fract() == T::zero() && e >= T::one() && e <= T::lit(16.0) {
        let m = e.to_i32().unwrap_or(1);
        let a = b + d;
        let mut sum = T::zero();
        let mut ai = T::one();
        for i in 0..m {
            sum = sum + ai * b.powi(m - 1 - i);
            ai = ai * a;
        }
        d * sum
    } else {
        b.powf(e) * (e * (d / b).ln_1p()).exp_m1()
    }
}

/// Scalar values on a uniform grid; node `(i, j)` sits at
/// `origin + spacing * (i + i j)` and is stored at `j * width + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    pub origin: Complex<T>,
    pub spacing: T,
    pub width: usize,
    pub height: usize,
    pub values: Vec<T>,
    pub boundary_mask: Vec<bool>,
}

impl<T: Scalar> GridField<T> {
    /// Zero field whose boundary is the outer ring of nodes.
    pub fn new(origin: Complex<T>, spacing: T, width: usize, height: usize) -> Result<Self> {
        Self::with_strip(origin, spacing, width, height, 1)
    }

    /// Zero field whose boundary is every node within `strip` nodes of the edge.
    pub fn with_strip(
        origin: Complex<T>,
        spacing: T,
        width: usize,
        height: usize,
        strip: usize,
    ) -> Result<Self> {
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        if !(origin.re.is_finite() && origin.im.is_finite()) {
            return Err(Error::InvalidGrid("origin not finite".into()));
        }
        if width < 3 || height < 3 {
            return Err(Error::InvalidGrid(format!(
                "grid {width}x{height} too small"
            )));
        }
        if strip == 0 || 2 * strip >= width.min(height) {
            return Err(Error::InvalidGrid(format!(
                "boundary strip {strip} leaves no interior in {width}x{height}"
            )));
        }
        let mut boundary_mask = vec![false; width * height];
        for j in 0..height {
            for i in 0..width {
                let edge = i.min(j).min(width - 1 - i).min(height - 1 - j);
                boundary_mask[j * width + i] = edge < strip;
            }
        }
        Ok(Self {
            origin,
            spacing,
            width,
            height,
            values: vec![T::zero(); width * height],
            boundary_mask,
        })
    }

    /// Square grid of odd `size` centered at `center` with the given half-width.
    pub fn centered_square(
        center: Complex<T>,
        half_width: T,
        size: usize,
        strip: usize,
    ) -> Result<Self> {
        if size % 2 == 0 {
            return Err(Error::InvalidGrid(format!("size must be odd, got {size}")));
        }
        if !(half_width > T::zero()) {
            return Err(Error::InvalidGrid("half width must be positive".into()));
        }
        let spacing = half_width * T::lit(2.0) / T::from_usize_lossy(size - 1);
        let origin = center - Complex::new(half_width, half_width);
        Self::with_strip(origin, spacing, size, size, strip)
    }

    /// Same geometry and mask, values from `field` at every node.
    pub fn sampled(&self, field: &dyn ScalarField<T>) -> Result<Self> {
        let values: Vec<T> = (0..self.values.len())
            .into_par_iter()
            .map(|k| {
                let z = self.point(k % self.width, k / self.width);
                field.value(z).map_err(|e| Error::FieldEvaluation {
                    re: z.re.as_f64(),
                    im: z.im.as_f64(),
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    /// Same geometry and mask, values `f(z)`.
    pub fn map_points(&self, f: impl Fn(Complex<T>) -> T) -> Self {
        let mut out = self.clone();
        for j in 0..self.height {
            for i in 0..self.width {
                out.values[j * self.width + i] = f(self.point(i, j));
            }
        }
        out
    }

    /// Same values, boundary widened to every node within `strip` of the edge.
    pub fn with_boundary_strip(&self, strip: usize) -> Result<Self> {
        let shape = Self::with_strip(self.origin, self.spacing, self.width, self.height, strip)?;
        let mut out = self.clone();
        for (m, s) in out.boundary_mask.iter_mut().zip(shape.boundary_mask) {
            *m = *m || s;
        }
        Ok(out)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> T {
        self.values[self.index(i, j)]
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        self.boundary_mask[self.index(i, j)]
    }

    pub fn point(&self, i: usize, j: usize) -> Complex<T> {
        self.origin
            + Complex::new(
                T::from_usize_lossy(i) * self.spacing,
                T::from_usize_lossy(j) * self.spacing,
            )
    }

    pub fn interior_count(&self) -> usize {
        self.boundary_mask.iter().filter(|b| !**b).count()
    }

    pub fn same_geometry(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.spacing == other.spacing
            && self.origin == other.origin
    }

    /// Outer ring must be boundary, lengths must match, values finite.
    pub fn validate(&self) -> Result<()> {
        let n = self.width * self.height;
        if self.values.len() != n || self.boundary_mask.len() != n {
            return Err(Error::InvalidGrid(format!(
                "expected {n} values and mask entries, got {} and {}",
                self.values.len(),
                self.boundary_mask.len()
            )));
        }
        if self.width < 3 || self.height < 3 {
            return Err(Error::InvalidGrid(format!(
                "grid {}x{} too small",
                self.width, self.height
            )));
        }
        for j in 0..self.height {
            for i in 0..self.width {
                let edge = i == 0 || j == 0 || i == self.width - 1 || j == self.height - 1;
                if edge && !self.is_boundary(i, j) {
                    return Err(Error::InvalidGrid(format!(
                        "edge node ({i}, {j}) is not marked as boundary"
                    )));
                }
            }
        }
        self.validate_boundary_values()?;
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite value".into()));
        }
        Ok(())
    }

    fn validate_boundary_values(&self) -> Result<()> {
        for (k, (v, b)) in self.values.iter().zip(&self.boundary_mask).enumerate() {
            if *b && !v.is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "boundary value at ({}, {}) is not finite",
                    k % self.width,
                    k / self.width
                )));
            }
        }
        Ok(())
    }

    /// CSV with columns `x,y,value,is_boundary`, row-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * self.values.len() + 32);
        out.push_str("x,y,value,is_boundary\n");
        for j in 0..self.height {
            for i in 0..self.width {
                let z = self.point(i, j);
                out.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{}\n",
                    z.re.as_f64(),
                    z.im.as_f64(),
                    self.value(i, j).as_f64(),
                    u8::from(self.is_boundary(i, j))
                ));
            }
        }
        out
    }

    /// Reads the CSV layout of [`to_csv`](Self::to_csv). Values and mask are
    /// exact; spacing is recovered from the coordinate extent.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, why: &str| Error::InvalidGrid(format!("csv line {line}: {why}"));
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(bad(ln + 1, "expected 4 columns"));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(ln + 1, "not a number"))
            };
            let mask = match cols[3].trim() {
                "0" => false,
                "1" => true,
                _ => return Err(bad(ln + 1, "is_boundary must be 0 or 1")),
            };
            rows.push((num(cols[0])?, num(cols[1])?, num(cols[2])?, mask));
        }
        if rows.is_empty() {
            return Err(Error::InvalidGrid("csv has no nodes".into()));
        }
        let y0 = rows[0].1;
        let width = rows.iter().take_while(|r| r.1 == y0).count();
        if width < 2 || rows.len() % width != 0 {
            return Err(Error::InvalidGrid(
                "csv is not a rectangular row-major grid".into(),
            ));
        }
        let height = rows.len() / width;
        let spacing = (rows[width - 1].0 - rows[0].0) / (width - 1) as f64;
        let mut grid = Self {
            origin: Complex::new(T::lit(rows[0].0), T::lit(y0)),
            spacing: T::lit(spacing),
            width,
            height,
            values: rows.iter().map(|r| T::lit(r.2)).collect(),
            boundary_mask: rows.iter().map(|r| r.3).collect(),
        };
        grid.spacing = T::lit(spacing);
        Ok(grid)
    }

    /// Little-endian layout: `u32` width, height, version, mask flag; `f64`
    /// origin x, origin y, spacing; row-major `f64` values; then, when the
    /// flag is 1, one mask byte per node.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        for v in [self.width as u32, self.height as u32, BINARY_VERSION, 1] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [self.origin.re, self.origin.im, self.spacing] {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
        let mask: Vec<u8> = self.boundary_mask.iter().map(|b| u8::from(*b)).collect();
        w.write_all(&mask)?;
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut u = [0u8; 4];
        let mut header = [0u32; 4];
        for h in &mut header {
            r.read_exact(&mut u)?;
            *h = u32::from_le_bytes(u);
        }
        let [width, height, version, flag] = header;
        if version != BINARY_VERSION || flag > 1 {
            return Err(Error::InvalidGrid(format!(
                "unsupported binary version {version} flag {flag}"
            )));
        }
        let (width, height) = (width as usize, height as usize);
        let mut d = [0u8; 8];
        let mut read_f64 = |r: &mut dyn Read| -> Result<f64> {
            r.read_exact(&mut d)?;
            Ok(f64::from_le_bytes(d))
        };
        let ox = read_f64(&mut r)?;
        let oy = read_f64(&mut r)?;
        let spacing = read_f64(&mut r)?;
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidGrid("grid dimensions overflow".into()))?;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(T::lit(read_f64(&mut r)?));
        }
        let boundary_mask = if flag == 1 {
            let mut m = vec![0u8; n];
            r.read_exact(&mut m)?;
            m.into_iter().map(|b| b != 0).collect()
        } else {
            Self::new(Complex::new(T::zero(), T::zero()), T::one(), width, height)?.boundary_mask
        };
        Ok(Self {
            origin: Complex::new(T::lit(ox), T::lit(oy)),
            spacing: T::lit(spacing),
            width,
            height,
            values,
            boundary_mask,
        })
    }

    /// Writes CSV for a `.csv` path, the binary layout otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        if path.extension().is_some_and(|e| e == "csv") {
            std::fs::write(path, self.to_csv())?;
        } else {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            self.write_binary(&mut f)?;
            f.flush()?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e == "csv") {
            Self::from_csv(&std::fs::read_to_string(path)?)
        } else {
            Self::read_binary(std::io::BufReader::new(std::fs::File::open(path)?))
        }
    }
}

/// Outcome of a grid solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport<T> {
    pub iterations: usize,
    /// Variational: max `|dE/du|` over interior nodes divided by `h^2`.
    /// Mean value iteration: sup-norm change of the last sweep.
    pub final_residual: T,
    /// Discrete p-energy of the returned field (variational solver only).
    pub energy: Option<T>,
    pub converged: bool,
    /// Energy before the first sweep and after each sweep (variational only).
    #[serde(skip)]
    pub energy_history: Vec<T>,
}

fn check_p<T: Scalar>(p: T) -> Result<()> {
    if !(p > T::one()) || !p.is_finite() {
        return Err(Error::invalid(
            "p",
            format!("must satisfy 1 < p < inf, got {p}"),
        ));
    }
    Ok(())
}

/// Corner gradients of a cell as pairs of local node indices
/// (`0 = (0,0), 1 = (1,0), 2 = (0,1), 3 = (1,1)`): `gx = v[a] - v[b]`,
/// `gy = v[c] - v[d]`.
const CORNERS: [[usize; 4]; 4] = [[1, 0, 2, 0], [1, 0, 3, 1], [3, 2, 2, 0], [3, 2, 3, 1]];

fn cell_energy<T: Scalar>(v: [T; 4], p: T) -> T {
    let mut s = T::zero();
    for c in CORNERS {
        let gx = v[c[0]] - v[c[1]];
        let gy = v[c[2]] - v[c[3]];
        s = s + pow_real(gx * gx + gy * gy, p / T::lit(2.0));
    }
    s
}

#[inline]
fn cell_values<T: Scalar>(u: &[T], width: usize, ci: usize, cj: usize) -> [T; 4] {
    let k = cj * width + ci;
    [u[k], u[k + 1], u[k + width], u[k + width + 1]]
}

/// Sum over cells of the corner-averaged `|grad u|^p` times the cell area.
pub fn p_energy<T: Scalar>(grid: &GridField<T>, p: T) -> Result<T> {
    check_p(p)?;
    Ok(energy_of(
        &grid.values,
        grid.width,
        grid.height,
        grid.spacing,
        p,
    ))
}

fn energy_of<T: Scalar>(u: &[T], width: usize, height: usize, h: T, p: T) -> T {
    let rows: Vec<T> = (0..height - 1)
        .into_par_iter()
        .map(|cj| {
            let cells: Vec<T> = (0..width - 1)
                .map(|ci| cell_energy(cell_values(u, width, ci, cj), p))
                .collect();
            pairwise_sum(&cells)
        })
        .collect();
    // Each corner carries a quarter of the cell area; differences are unscaled.
    pairwise_sum(&rows) * h.powi(2) / T::lit(4.0) / h.powf(p)
}

/// One difference vector `g(t) = g0 + dg * t` of the local energy of a node.
#[derive(Clone, Copy)]
struct LocalTerm<T> {
    g0: [T; 2],
    dg: [T; 2],
}

/// The part of the discrete energy that depends on a single node value.
struct LocalEnergy<T> {
    terms: [LocalTerm<T>; 12],
    len: usize,
    p: T,
}

impl<T: Scalar> LocalEnergy<T> {
    fn gather(u: &[T], width: usize, height: usize, i: usize, j: usize, p: T) -> Self {
        let zero = LocalTerm {
            g0: [T::zero(); 2],
            dg: [T::zero(); 2],
        };
        let mut out = Self {
            terms: [zero; 12],
            len: 0,
            p,
        };
        for (di, dj) in [(0usize, 0usize), (1, 0), (0, 1), (1, 1)] {
            // Cell with lower-left (i - di, j - dj); the node is its local corner (di, dj).
            if i < di || j < dj || i - di + 1 >= width || j - dj + 1 >= height {
                continue;
            }
            let (ci, cj) = (i - di, j - dj);
            let me = di + 2 * dj;
            let mut v = cell_values(u, width, ci, cj);
            v[me] = T::zero();
            for c in CORNERS {
                let sx = T::from_i32(i32::from(c[0] == me) - i32::from(c[1] == me)).unwrap();
                let sy = T::from_i32(i32::from(c[2] == me) - i32::from(c[3] == me)).unwrap();
                if sx == T::zero() && sy == T::zero() {
                    continue;
                }
                out.terms[out.len] = LocalTerm {
                    g0: [v[c[0]] - v[c[1]], v[c[2]] - v[c[3]]],
                    dg: [sx, sy],
                };
                out.len += 1;
            }
        }
        out
    }

    fn terms(&self) -> &[LocalTerm<T>] {
        &self.terms[..self.len]
    }

    /// Change of the local energy from `t0` to `t1`, without cancellation: per term
    /// `|g1|^p - |g0|^p = |g0|^p expm1(p/2 ln1p((|g1|^2 - |g0|^2) / |g0|^2))`.
    fn change(&self, t0: T, t1: T) -> T {
        let half_p = self.p / T::lit(2.0);
        let d = t1 - t0;
        let mut total = T::zero();
        for s in self.terms() {
            let gx = s.g0[0] + s.dg[0] * t0;
            let gy = s.g0[1] + s.dg[1] * t0;
            let b = gx * gx + gy * gy;
            let dd = s.dg[0] * s.dg[0] + s.dg[1] * s.dg[1];
            let diff = d * (T::lit(2.0) * (gx * s.dg[0] + gy * s.dg[1]) + dd * d);
            total = total
                + if b == T::zero() {
                    pow_real(diff.max(T::zero()), half_p)
                } else {
                    pow_change(b, diff, half_p)
                };
        }
        total
    }

    /// First and second derivative of the energy with `|g|^2` replaced by
    /// `|g|^2 + delta^2`. A term with `g = 0` and `p < 2` contributes 0 to the
    /// first derivative.
    fn derivatives(&self, t: T, delta: T) -> (T, T) {
        let p = self.p;
        let two = T::lit(2.0);
        let mut d1 = T::zero();
        let mut d2 = T::zero();
        for s in self.terms() {
            let gx = s.g0[0] + s.dg[0] * t;
            let gy = s.g0[1] + s.dg[1] * t;
            let q = gx * gx + gy * gy + delta * delta;
            let gd = gx * s.dg[0] + gy * s.dg[1];
            let dd = s.dg[0] * s.dg[0] + s.dg[1] * s.dg[1];
            if q == T::zero() {
                if p == two {
                    d2 = d2 + p * dd;
                } else if p < two {
                    d2 = T::infinity();
                }
                continue;
            }
            let w = pow_real(q, (p - two) / two);
            d1 = d1 + p * w * gd;
            d2 = d2 + p * (w * dd + (p - two) * w / q * gd * gd);
        }
        (d1, d2)
    }

    /// Minimizer of the regularized local energy in `[lo, hi]` by safeguarded
    /// Newton on the derivative.
    fn minimize(&self, lo: T, hi: T, start: T, delta: T) -> T {
        if !(hi > lo) {
            return lo;
        }
        let (mut a, mut b) = (lo, hi);
        let mut t = start.max(a).min(b);
        let scale = a.abs().max(b.abs()).max(b - a);
        for _ in 0..NODE_ITERATIONS {
            let (d1, d2) = self.derivatives(t, delta);
            if d1 == T::zero() {
                return t;
            }
            if d1 > T::zero() {
                b = t;
            } else {
                a = t;
            }
            let newton = t - d1 / d2;
            let next = if d2 > T::zero() && d2.is_finite() && newton > a && newton < b {
                newton
            } else {
                (a + b) / T::lit(2.0)
            };
            let step = (next - t).abs();
            t = next;
            if step <= T::lit(4.0) * T::epsilon() * scale
                || b - a <= T::lit(2.0) * T::epsilon() * scale
            {
                break;
            }
        }
        t
    }
}

fn edge_neighbors<T: Scalar>(u: &[T], width: usize, i: usize, j: usize) -> (T, T) {
    let k = j * width + i;
    let nb = [u[k - 1], u[k + 1], u[k - width], u[k + width]];
    let lo = nb.iter().copied().fold(T::infinity(), T::min);
    let hi = nb.iter().copied().fold(T::neg_infinity(), T::max);
    (lo, hi)
}

/// Transfinite interpolation of the outer ring into the rectangle; boundary
/// nodes keep their data.
fn initial_guess<T: Scalar>(grid: &GridField<T>) -> Vec<T> {
    let (w, h) = (grid.width, grid.height);
    let v = |i: usize, j: usize| grid.value(i, j);
    let mut u = grid.values.clone();
    for j in 0..h {
        let s = T::from_usize_lossy(j) / T::from_usize_lossy(h - 1);
        for i in 0..w {
            if grid.is_boundary(i, j) {
                continue;
            }
            let r = T::from_usize_lossy(i) / T::from_usize_lossy(w - 1);
            let one = T::one();
            let edges =
                (one - r) * v(0, j) + r * v(w - 1, j) + (one - s) * v(i, 0) + s * v(i, h - 1);
            let corners = (one - r) * (one - s) * v(0, 0)
                + r * (one - s) * v(w - 1, 0)
                + (one - r) * s * v(0, h - 1)
                + r * s * v(w - 1, h - 1);
            u[j * w + i] = edges - corners;
        }
    }
    u
}

fn is_ring_mask<T: Scalar>(grid: &GridField<T>) -> bool {
    (0..grid.height).all(|j| {
        (0..grid.width).all(|i| {
            let edge = i == 0 || j == 0 || i == grid.width - 1 || j == grid.height - 1;
            grid.is_boundary(i, j) == edge
        })
    })
}

/// Every other node of an odd grid with a ring boundary.
fn coarsen<T: Scalar>(grid: &GridField<T>) -> Option<GridField<T>> {
    let ok = grid.width % 2 == 1
        && grid.height % 2 == 1
        && grid.width.min(grid.height) >= NESTED_MIN_SIZE
        && is_ring_mask(grid);
    if !ok {
        return None;
    }
    let (w, h) = (grid.width.div_ceil(2), grid.height.div_ceil(2));
    let mut coarse = GridField::new(grid.origin, grid.spacing * T::lit(2.0), w, h).ok()?;
    for j in 0..h {
        for i in 0..w {
            coarse.values[j * w + i] = grid.value(2 * i, 2 * j);
        }
    }
    Some(coarse)
}

/// Bilinear prolongation of a coarse solution onto the interior of `fine`.
fn prolong<T: Scalar>(coarse: &GridField<T>, fine: &GridField<T>) -> Vec<T> {
    let mut u = fine.values.clone();
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    for j in 0..fine.height {
        for i in 0..fine.width {
            if fine.is_boundary(i, j) {
                continue;
            }
            let (ci, cj) = (i / 2, j / 2);
            let c = |a: usize, b: usize| coarse.value(a, b);
            u[j * fine.width + i] = match (i % 2, j % 2) {
                (0, 0) => c(ci, cj),
                (1, 0) => half * (c(ci, cj) + c(ci + 1, cj)),
                (0, 1) => half * (c(ci, cj) + c(ci, cj + 1)),
                _ => quarter * (c(ci, cj) + c(ci + 1, cj) + c(ci, cj + 1) + c(ci + 1, cj + 1)),
            };
        }
    }
    u
}

fn variational_residual<T: Scalar>(grid: &GridField<T>, u: &[T], p: T) -> T {
    let (w, h) = (grid.width, grid.height);
    let scale = grid.spacing.powi(2) / T::lit(4.0) / grid.spacing.powf(p);
    let mut r = T::zero();
    for j in 1..h - 1 {
        for i in 1..w - 1 {
            if grid.is_boundary(i, j) {
                continue;
            }
            let local = LocalEnergy::gather(u, w, h, i, j, p);
            let (d1, _) = local.derivatives(u[j * w + i], T::zero());
            r = r.max((d1 * scale).abs());
        }
    }
    r / grid.spacing.powi(2)
}

/// Minimizes the discrete p-energy over the interior values by nonlinear
/// Gauss-Seidel with over-relaxation.
///
/// Each node update minimizes the local energy exactly (safeguarded Newton in
/// the range of the four edge neighbors), then tries the over-relaxed value
/// and keeps it only if the local energy does not increase, so the total
/// energy never increases between sweeps. For `p < 2` the gradient norm is
/// regularized by `delta = 1e-10`, halved each sweep. Odd grids with a ring
/// boundary start from the solution on the grid of every other node.
///
/// Interior values of `boundary` are ignored.
pub fn solve_dirichlet_variational<T: Scalar>(
    boundary: &GridField<T>,
    p: T,
    tol: T,
    max_iter: usize,
) -> Result<(GridField<T>, SolveReport<T>)> {
    check_p(p)?;
    boundary.validate_shape()?;
    if !(tol > T::zero()) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let mut u = match coarsen(boundary) {
        Some(coarse) => {
            let (sol, _) = solve_dirichlet_variational(&coarse, p, tol, max_iter)?;
            prolong(&sol, boundary)
        }
        None => initial_guess(boundary),
    };
    let (w, h) = (boundary.width, boundary.height);
    let n = w.max(h) as f64;
    let omega = T::lit(2.0 / (1.0 + (std::f64::consts::PI / n).sin()));
    let energy = |u: &[T]| energy_of(u, w, h, boundary.spacing, p);
    let mut history = vec![energy(&u)];
    let mut delta = if p < T::lit(2.0) {
        T::lit(DELTA_START)
    } else {
        T::zero()
    };
    let mut residual = variational_residual(boundary, &u, p);
    let mut iterations = 0;
    while residual > tol && iterations < max_iter {
        for j in 1..h - 1 {
            for i in 1..w - 1 {
                if boundary.is_boundary(i, j) {
                    continue;
                }
                let k = j * w + i;
                let local = LocalEnergy::gather(&u, w, h, i, j, p);
                let (lo, hi) = edge_neighbors(&u, w, i, j);
                let old = u[k];
                let best = local.minimize(lo, hi, old, delta);
                let relaxed = old + omega * (best - old);
                u[k] = if local.change(old, relaxed) <= T::zero() {
                    relaxed
                } else if local.change(old, best) <= T::zero() {
                    best
                } else {
                    old
                };
            }
        }
        iterations += 1;
        delta = delta * T::lit(0.5);
        history.push(energy(&u));
        if iterations % RESIDUAL_EVERY == 0 || iterations == max_iter {
            residual = variational_residual(boundary, &u, p);
        }
    }
    let mut out = boundary.clone();
    out.values = u;
    let report = SolveReport {
        iterations,
        final_residual: residual,
        energy: history.last().copied(),
        converged: residual <= tol,
        energy_history: history,
    };
    Ok((out, report))
}

impl<T: Scalar> GridField<T> {
    fn validate_shape(&self) -> Result<()> {
        let mut probe = self.clone();
        for (v, b) in probe.values.iter_mut().zip(&self.boundary_mask) {
            if !*b {
                *v = T::zero();
            }
        }
        probe.validate()
    }
}

/// Node offsets `(di, dj)` with `di^2 + dj^2 <= r^2`, row-major.
pub fn disk_offsets(radius_nodes: usize) -> Vec<(isize, isize)> {
    let r = radius_nodes as isize;
    let mut out = Vec::new();
    for dj in -r..=r {
        for di in -r..=r {
            if di * di + dj * dj <= r * r {
                out.push((di, dj));
            }
        }
    }
    out
}

/// Jacobi iteration of `u(x) <- (p-2)/(p+2) midrange + 4/(p+2) mean` over the
/// nodes within `eps_nodes` of each interior node, until the sup-norm change
/// of a sweep is at most `tol`.
///
/// Every disk must fit inside the grid: interior nodes need at least
/// `eps_nodes` nodes to the edge (see [`GridField::with_boundary_strip`]).
pub fn solve_dirichlet_amv<T: Scalar>(
    boundary: &GridField<T>,
    p: T,
    eps_nodes: usize,
    tol: T,
    max_iter: usize,
) -> Result<(GridField<T>, SolveReport<T>)> {
    check_p(p)?;
    if p < T::lit(2.0) {
        return Err(Error::invalid(
            "p",
            format!("the mean value iteration needs p >= 2, got {p}"),
        ));
    }
    if eps_nodes < 2 {
        return Err(Error::invalid(
            "eps_nodes",
            format!("must be >= 2, got {eps_nodes}"),
        ));
    }
    if !(tol > T::zero()) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    boundary.validate_shape()?;
    let (w, h) = (boundary.width, boundary.height);
    for j in 0..h {
        for i in 0..w {
            let edge = i.min(j).min(w - 1 - i).min(h - 1 - j);
            if !boundary.is_boundary(i, j) && edge < eps_nodes {
                return Err(Error::InvalidGrid(format!(
                    "interior node ({i}, {j}) is within {eps_nodes} nodes of the edge"
                )));
            }
        }
    }
    let offsets: Vec<isize> = disk_offsets(eps_nodes)
        .into_iter()
        .map(|(di, dj)| dj * w as isize + di)
        .collect();
    let (wm, wa) = amv_weights(p);
    let inv_count = T::one() / T::from_usize_lossy(offsets.len());
    let use_midrange = wm != T::zero();
    let mut u = initial_guess(boundary);
    let mut next = u.clone();
    let mut change = T::infinity();
    let mut iterations = 0;
    while iterations < max_iter {
        let rows: Vec<T> = next
            .par_chunks_mut(w)
            .enumerate()
            .map(|(j, row)| {
                let mut row_change = T::zero();
                for (i, slot) in row.iter_mut().enumerate() {
                    let k = j * w + i;
                    if boundary.boundary_mask[k] {
                        continue;
                    }
                    let mut sum = T::zero();
                    let mut hi = T::neg_infinity();
                    let mut lo = T::infinity();
                    for off in &offsets {
                        let v = u[(k as isize + off) as usize];
                        sum = sum + v;
                        if use_midrange {
                            hi = hi.max(v);
                            lo = lo.min(v);
                        }
                    }
                    let mean = sum * inv_count;
                    let val = if use_midrange {
                        wm * (hi + lo) / T::lit(2.0) + wa * mean
                    } else {
                        mean
                    };
                    row_change = row_change.max((val - u[k]).abs());
                    *slot = val;
                }
                row_change
            })
            .collect();
        std::mem::swap(&mut u, &mut next);
        iterations += 1;
        change = rows.into_iter().fold(T::zero(), T::max);
        if change <= tol {
            break;
        }
    }
    let mut out = boundary.clone();
    out.values = u;
    Ok((
        out,
        SolveReport {
            iterations,
            final_residual: change,
            energy: None,
            converged: change <= tol,
            energy_history: Vec::new(),
        },
    ))
}

/// Differences over nodes interior to either field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison<T> {
    pub max_abs: T,
    /// `||a - b|| / ||b||` in the discrete l2 norm.
    pub rel_l2: T,
    pub nodes: usize,
}

pub fn compare_fields<T: Scalar>(a: &GridField<T>, b: &GridField<T>) -> Result<Comparison<T>> {
    if !a.same_geometry(b) {
        return Err(Error::GeometryMismatch(format!(
            "{}x{} spacing {} origin {} vs {}x{} spacing {} origin {}",
            a.width, a.height, a.spacing, a.origin, b.width, b.height, b.spacing, b.origin
        )));
    }
    let mut diff2 = Vec::new();
    let mut ref2 = Vec::new();
    let mut max_abs = T::zero();
    for k in 0..a.values.len() {
        if a.boundary_mask[k] && b.boundary_mask[k] {
            continue;
        }
        let d = a.values[k] - b.values[k];
        max_abs = max_abs.max(d.abs());
        diff2.push(d * d);
        ref2.push(b.values[k] * b.values[k]);
    }
    let num = pairwise_sum(&diff2).sqrt();
    let den = pairwise_sum(&ref2).sqrt();
    let rel_l2 = if num == T::zero() {
        T::zero()
    } else if den == T::zero() {
        T::infinity()
    } else {
        num / den
    };
    Ok(Comparison {
        max_abs,
        rel_l2,
        nodes: diff2.len(),
    })
}
