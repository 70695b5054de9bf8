//! Gram matrices `⟨π(j,γ)ψ, π(j',γ')ψ⟩` over a window and the Parseval
//! prerequisites for minimally supported frequency (MSF) wavelets.
//!
//! Three kinds of systems are supported:
//!
//! - dyadic MSF wavelets on `L²(ℝ)` with `ψ̂ = 1_E`, evaluated in closed form
//!   from exact rational interval intersections,
//! - explicit vector systems, one vector per window point,
//! - sampled functions on a 2D grid acted on by the shearlet or the
//!   Heisenberg multiplicity-one representation of `G(a, b, H)`.
//!
//! Inner products are linear in the first argument.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::group::{Gamma0Element, LatticePoint, MonomorphismSpec, Window};
use crate::linalg::{CMatrix, CVector, C64, ZERO};

/// Finite union of disjoint half-open intervals `[a, b)` with rational ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalSet {
    intervals: Vec<(BigRational, BigRational)>,
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if let Ok(r) = BigRational::from_str(s) {
        return Ok(r);
    }
    // plain decimals such as "0.125"
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches('-'), frac);
        if let Ok(n) = BigInt::from_str(&digits) {
            let den = BigInt::from(10).pow(frac.len() as u32);
            let r = BigRational::new(n, den);
            return Ok(if neg { -r } else { r });
        }
    }
    Err(Error::Parse(format!("'{s}' is not a rational number")))
}

fn pow2(j: i64) -> BigRational {
    let p = BigInt::one() << j.unsigned_abs();
    if j >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

fn midpoint(a: &BigRational, b: &BigRational) -> BigRational {
    (a + b) / BigRational::from_integer(BigInt::from(2))
}

impl IntervalSet {
    /// Sorts the intervals and merges touching ones; overlapping or empty
    /// intervals are rejected.
    pub fn new(mut intervals: Vec<(BigRational, BigRational)>) -> Result<Self> {
        if let Some((a, b)) = intervals.iter().find(|(a, b)| a >= b) {
            return Err(Error::InvalidArgument(format!(
                "interval [{a}, {b}) is empty"
            )));
        }
        intervals.sort();
        let mut merged: Vec<(BigRational, BigRational)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match merged.last_mut() {
                Some(last) if a < last.1 => {
                    return Err(Error::InvalidArgument(format!(
                        "intervals overlap near {a}"
                    )))
                }
                Some(last) if a == last.1 => last.1 = b,
                _ => merged.push((a, b)),
            }
        }
        Ok(IntervalSet { intervals: merged })
    }

    pub fn parse(pairs: &[(String, String)]) -> Result<Self> {
        let iv = pairs
            .iter()
            .map(|(a, b)| Ok((parse_rational(a)?, parse_rational(b)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(iv)
    }

    /// `±[lo, hi)`.
    pub fn symmetric(lo: BigRational, hi: BigRational) -> Result<Self> {
        Self::new(vec![(-hi.clone(), -lo.clone()), (lo, hi)])
    }

    pub fn empty() -> Self {
        IntervalSet {
            intervals: Vec::new(),
        }
    }

    pub fn intervals(&self) -> &[(BigRational, BigRational)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn measure(&self) -> BigRational {
        self.intervals
            .iter()
            .map(|(a, b)| b - a)
            .fold(BigRational::zero(), |s, x| s + x)
    }

    pub fn scale(&self, c: &BigRational) -> IntervalSet {
        assert!(c.is_positive(), "scale factor must be positive");
        IntervalSet {
            intervals: self
                .intervals
                .iter()
                .map(|(a, b)| (a * c, b * c))
                .collect(),
        }
    }

    pub fn shift(&self, t: &BigRational) -> IntervalSet {
        IntervalSet {
            intervals: self
                .intervals
                .iter()
                .map(|(a, b)| (a + t, b + t))
                .collect(),
        }
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a, b) = &self.intervals[i];
            let (c, d) = &other.intervals[j];
            let lo = a.max(c);
            let hi = b.min(d);
            if lo < hi {
                out.push((lo.clone(), hi.clone()));
            }
            if b < d {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet { intervals: out }
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        self.intervals.iter().any(|(a, b)| a <= x && x < b)
    }

    /// `sup E − inf E`.
    pub fn diameter(&self) -> BigRational {
        match (self.intervals.first(), self.intervals.last()) {
            (Some(f), Some(l)) => &l.1 - &f.0,
            _ => BigRational::zero(),
        }
    }
}

/// `x` reduced into `[0, 2)`.
fn mod2(x: &BigRational) -> BigRational {
    let two = BigRational::from_integer(BigInt::from(2));
    let q = (x / &two).floor();
    x - q * two
}

/// `sin(πx)`, exact at multiples of 1/2.
fn sin_pi(x: &BigRational) -> f64 {
    let r = mod2(x);
    if r.is_integer() {
        return 0.0;
    }
    let twice = &r * BigInt::from(2);
    if twice.is_integer() {
        return if twice.to_integer() == BigInt::from(1) {
            1.0
        } else {
            -1.0
        };
    }
    (PI * r.to_f64().expect("reduced value is small")).sin()
}

/// `cos(πx)`, exact at multiples of 1/2.
fn cos_pi(x: &BigRational) -> f64 {
    sin_pi(&(x + BigRational::new(BigInt::one(), BigInt::from(2))))
}

/// `2^{-s/2}`.
fn half_power(s: i64) -> f64 {
    let q = s.div_euclid(2);
    let base = 2f64.powi(-(q as i32));
    if s.rem_euclid(2) == 1 {
        base * FRAC_1_SQRT_2
    } else {
        base
    }
}

/// Pieces `[a, b)` of `2^j E ∩ 2^{j'} E` stored as `(a + b, b − a)`.
type Pieces = Vec<(BigRational, BigRational)>;

fn pieces(e: &IntervalSet, j: i64, jp: i64) -> Pieces {
    e.scale(&pow2(j))
        .intersect(&e.scale(&pow2(jp)))
        .intervals
        .into_iter()
        .map(|(a, b)| (&a + &b, b - a))
        .collect()
}

fn msf_entry(pieces: &Pieces, j: i64, k: &BigInt, jp: i64, kp: &BigInt) -> C64 {
    if pieces.is_empty() {
        return ZERO;
    }
    let omega = BigRational::from_integer(k.clone()) * pow2(-j)
        - BigRational::from_integer(kp.clone()) * pow2(-jp);
    let mut acc = ZERO;
    if omega.is_zero() {
        for (_, len) in pieces {
            acc.re += len.to_f64().unwrap_or(f64::NAN);
        }
    } else {
        let w = omega.to_f64().unwrap_or(f64::NAN);
        for (sum, len) in pieces {
            let x = &omega * sum;
            let amp = sin_pi(&(&omega * len)) / (PI * w);
            // ∫_a^b e^{-2πiωξ} dξ = e^{-iπω(a+b)} sin(πω(b−a)) / (πω)
            acc += C64::new(cos_pi(&x), -sin_pi(&x)) * amp;
        }
    }
    acc * half_power(j + jp)
}

fn dyadic_translation(p: &LatticePoint) -> Result<&BigInt> {
    match &p.gamma {
        Gamma0Element::IntVector(v) if v.len() == 1 => Ok(&v[0]),
        _ => Err(Error::InvalidArgument(
            "dyadic MSF systems need Γ₀ = ℤ".into(),
        )),
    }
}

/// `⟨ψ_{j,k}, ψ_{j',k'}⟩` for `ψ̂ = 1_E`, `ψ_{j,k}(x) = 2^{j/2} ψ(2ʲx − k)`.
pub fn msf_inner_product(e: &IntervalSet, p: &LatticePoint, q: &LatticePoint) -> Result<C64> {
    let k = dyadic_translation(p)?;
    let kp = dyadic_translation(q)?;
    Ok(msf_entry(&pieces(e, p.j, q.j), p.j, k, q.j, kp))
}

/// Sum of `1_{2^j E}` over `j` in `j_range`, checked on every cell of the
/// exact breakpoint subdivision of `[1,2) ∪ [−2,−1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CalderonResult {
    /// `max |Σ_j 1_{2^j E}(ξ) − 1|` over cells.
    pub deviation: u64,
    pub cells: usize,
}

pub fn calderon_check(e: &IntervalSet, j_range: (i64, i64)) -> CalderonResult {
    let one = BigRational::one();
    let two = BigRational::from_integer(BigInt::from(2));
    let domains = [(one.clone(), two.clone()), (-two.clone(), -one.clone())];
    let scaled: Vec<IntervalSet> = (j_range.0..=j_range.1).map(|j| e.scale(&pow2(j))).collect();
    let mut deviation = 0u64;
    let mut cells = 0usize;
    for (lo, hi) in &domains {
        let mut cuts = vec![lo.clone(), hi.clone()];
        for s in &scaled {
            for (a, b) in s.intervals() {
                for x in [a, b] {
                    if lo < x && x < hi {
                        cuts.push(x.clone());
                    }
                }
            }
        }
        cuts.sort();
        cuts.dedup();
        for w in cuts.windows(2) {
            let mid = midpoint(&w[0], &w[1]);
            let count = scaled.iter().filter(|s| s.contains(&mid)).count() as i64;
            deviation = deviation.max((count - 1).unsigned_abs());
            cells += 1;
        }
    }
    CalderonResult { deviation, cells }
}

/// `max_ξ |t_q(ξ)|` over odd `0 < |q| ≤ q_max`, where
/// `t_q(ξ) = Σ_{j≥0} 1_E(2ʲξ) 1_E(2ʲ(ξ + q))`.
pub fn translation_orthogonality_check(e: &IntervalSet, q_max: u64) -> u64 {
    let diam = e.diameter();
    let mut worst = 0u64;
    for q in (1..=q_max as i64).step_by(2).flat_map(|q| [q, -q]) {
        let mut parts: Vec<(BigRational, BigRational)> = Vec::new();
        let mut j = 0i64;
        loop {
            let step = BigRational::from_integer(BigInt::from(q)) * pow2(j);
            if step.abs() >= diam {
                break;
            }
            let overlap = e.intersect(&e.shift(&-step)).scale(&pow2(-j));
            parts.extend(overlap.intervals);
            j += 1;
        }
        let mut cuts: Vec<BigRational> = parts
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect();
        cuts.sort();
        cuts.dedup();
        for w in cuts.windows(2) {
            let mid = midpoint(&w[0], &w[1]);
            let count = parts.iter().filter(|(a, b)| *a <= mid && mid < *b).count();
            worst = worst.max(count as u64);
        }
    }
    worst
}

/// Uniform tensor grid `x₁ = x1_min + i·h1`, `x₂ = x2_min + k·h2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D {
    pub x1_min: f64,
    pub x2_min: f64,
    pub h1: f64,
    pub h2: f64,
    pub n1: usize,
    pub n2: usize,
}

impl Grid2D {
    pub fn new(x1_min: f64, x2_min: f64, h1: f64, h2: f64, n1: usize, n2: usize) -> Result<Self> {
        let finite = [x1_min, x2_min, h1, h2].iter().all(|x| x.is_finite());
        if !finite || h1 <= 0.0 || h2 <= 0.0 || n1 < 2 || n2 < 2 {
            return Err(Error::InvalidArgument(
                "grid needs finite origin, positive steps and at least 2×2 nodes".into(),
            ));
        }
        Ok(Grid2D {
            x1_min,
            x2_min,
            h1,
            h2,
            n1,
            n2,
        })
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, i: usize, k: usize) -> (f64, f64) {
        (
            self.x1_min + i as f64 * self.h1,
            self.x2_min + k as f64 * self.h2,
        )
    }
}

/// Complex samples on a grid, row `i` (the `x₁` index) major.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampled2D {
    pub grid: Grid2D,
    pub values: Vec<C64>,
}

impl Sampled2D {
    pub fn new(grid: Grid2D, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "grid has {} nodes but {} samples were given",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("generator samples must be finite".into()));
        }
        Ok(Sampled2D { grid, values })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> C64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n1 {
            for k in 0..grid.n2 {
                let (x1, x2) = grid.node(i, k);
                values.push(f(x1, x2));
            }
        }
        Sampled2D { grid, values }
    }

    pub fn at(&self, i: usize, k: usize) -> C64 {
        self.values[i * self.grid.n2 + k]
    }

    /// Bilinear interpolation; zero outside the grid rectangle.
    pub fn interpolate(&self, x1: f64, x2: f64) -> C64 {
        let g = &self.grid;
        let u = (x1 - g.x1_min) / g.h1;
        let v = (x2 - g.x2_min) / g.h2;
        let (umax, vmax) = ((g.n1 - 1) as f64, (g.n2 - 1) as f64);
        if !(0.0..=umax).contains(&u) || !(0.0..=vmax).contains(&v) {
            return ZERO;
        }
        let i = (u.floor() as usize).min(g.n1 - 2);
        let k = (v.floor() as usize).min(g.n2 - 2);
        let (s, t) = (u - i as f64, v - k as f64);
        self.at(i, k) * ((1.0 - s) * (1.0 - t))
            + self.at(i + 1, k) * (s * (1.0 - t))
            + self.at(i, k + 1) * ((1.0 - s) * t)
            + self.at(i + 1, k + 1) * (s * t)
    }

    /// `⟨f, g⟩ ≈ h₁h₂ Σ f conj(g)`.
    pub fn inner(&self, other: &Sampled2D) -> C64 {
        let s: C64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        s * (self.grid.h1 * self.grid.h2)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.h1 * self.grid.h2
    }
}

/// Representations of `G(a, b, H)` on `L²(ℝ²)` for sampled generators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rep2D {
    /// `t₁ ↦ T₁`, `t₂ ↦ T₂`, `t₃ ↦ M` with `T₁f(x) = f(x₁−1, x₂)`,
    /// `T₂f(x) = f(x₁, x₂−1)`, `Mf(x) = f(x₁−x₂, x₂)` and
    /// `Df(x) = a^{-3/2} f(a^{-2}x₁, a^{-1}x₂)`; needs `b = a`.
    Shearlet { a: i64 },
    /// On functions of `(λ, t)`: `t₁ ↦ e^{2πiλ}`, `t₂ ↦ M`, `t₃ ↦ T` with
    /// `Mf(λ,t) = e^{-2πiλt} f(λ,t)`, `Tf(λ,t) = f(λ,t−1)` and
    /// `Df(λ,t) = √b f(abλ, t/a)`.
    HeisenbergMult1 { a: i64, b: i64 },
}

impl Rep2D {
    pub fn check_group(&self, spec: &MonomorphismSpec) -> Result<()> {
        let (ea, eb) = match *self {
            Rep2D::Shearlet { a } => (a, a),
            Rep2D::HeisenbergMult1 { a, b } => (a, b),
        };
        match spec {
            MonomorphismSpec::Heisenberg { a, b } if *a == BigInt::from(ea) && *b == BigInt::from(eb) => {
                Ok(())
            }
            _ => Err(Error::InvalidArgument(format!(
                "representation needs the heisenberg group with a={ea}, b={eb}"
            ))),
        }
    }
}

fn heis_exponents(gamma: &Gamma0Element) -> Result<(f64, f64, f64)> {
    match gamma {
        Gamma0Element::HeisTriple { m, l, k } => {
            let f = |x: &BigInt| {
                x.to_f64()
                    .filter(|v| v.abs() < 1e15)
                    .ok_or_else(|| Error::InvalidArgument("exponent too large for sampling".into()))
            };
            Ok((f(m)?, f(l)?, f(k)?))
        }
        _ => Err(Error::InvalidArgument(
            "sampled 2D systems need heisenberg group elements".into(),
        )),
    }
}

/// `π(uʲγ) f` resampled on the grid of `f`.
pub fn apply_rep(rep: Rep2D, point: &LatticePoint, f: &Sampled2D) -> Result<Sampled2D> {
    let (m, l, k) = heis_exponents(&point.gamma)?;
    let j = point.j;
    let grid = f.grid.clone();
    let out = match rep {
        Rep2D::Shearlet { a } => {
            let a = a as f64;
            let amp = a.powf(-1.5 * j as f64);
            let (s1, s2) = (a.powi(-2 * j as i32), a.powi(-(j as i32)));
            Sampled2D::from_fn(grid, |x1, x2| {
                let (y1, y2) = (s1 * x1, s2 * x2);
                f.interpolate(y1 - m - k * (y2 - l), y2 - l) * amp
            })
        }
        Rep2D::HeisenbergMult1 { a, b } => {
            let (a, b) = (a as f64, b as f64);
            let amp = b.powf(0.5 * j as f64);
            let (s1, s2) = ((a * b).powi(j as i32), a.powi(-(j as i32)));
            Sampled2D::from_fn(grid, |lam, t| {
                let (y1, y2) = (s1 * lam, s2 * t);
                let phase = 2.0 * PI * (m * y1 - l * y1 * y2);
                f.interpolate(y1, y2 - k) * C64::from_polar(amp, phase)
            })
        }
    };
    Ok(out)
}

/// Source of the analyzing system.
#[derive(Clone, Debug)]
pub enum FrameSystemSpec {
    MsfDyadic {
        support: IntervalSet,
    },
    ExplicitVectors {
        dim: usize,
        vectors: HashMap<LatticePoint, CVector>,
    },
    BandLimited2D {
        rep: Rep2D,
        generator: Sampled2D,
    },
}

impl FrameSystemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            FrameSystemSpec::MsfDyadic { .. } => "msf_dyadic",
            FrameSystemSpec::ExplicitVectors { .. } => "explicit_vectors",
            FrameSystemSpec::BandLimited2D { .. } => "band_limited_2d",
        }
    }
}

fn fill_hermitian(
    n: usize,
    parallel: bool,
    entry: impl Fn(usize, usize) -> Result<C64> + Sync,
) -> Result<CMatrix> {
    let row = |i: usize| -> Result<Vec<C64>> { (i..n).map(|j| entry(i, j)).collect() };
    let rows: Vec<Vec<C64>> = if parallel {
        (0..n).into_par_iter().map(row).collect::<Result<_>>()?
    } else {
        (0..n).map(row).collect::<Result<_>>()?
    };
    let mut g = CMatrix::zeros(n, n);
    for (i, r) in rows.into_iter().enumerate() {
        for (off, z) in r.into_iter().enumerate() {
            let j = i + off;
            if i == j {
                g[(i, i)] = C64::new(z.re, 0.0);
            } else {
                g[(i, j)] = z;
                g[(j, i)] = z.conj();
            }
        }
    }
    Ok(g)
}

/// Gram matrix `G[x, y] = ⟨π(x)ψ, π(y)ψ⟩` in window order.
///
/// Entries are computed independently, so the parallel path is bitwise equal
/// to the serial one.
pub fn gram_matrix(
    system: &FrameSystemSpec,
    spec: &MonomorphismSpec,
    window: &Window,
    parallel: bool,
) -> Result<CMatrix> {
    let n = window.len();
    match system {
        FrameSystemSpec::MsfDyadic { support } => {
            if support.is_empty() {
                return Err(Error::InvalidArgument("MSF support must be nonempty".into()));
            }
            let ks: Vec<&BigInt> = window
                .points()
                .iter()
                .map(dyadic_translation)
                .collect::<Result<_>>()?;
            let mut cache = HashMap::new();
            for j in window.j_min()..=window.j_max() {
                for jp in j..=window.j_max() {
                    cache.insert((j, jp), pieces(support, j, jp));
                }
            }
            fill_hermitian(n, parallel, |i, k| {
                let (p, q) = (window.point(i), window.point(k));
                Ok(msf_entry(&cache[&(p.j, q.j)], p.j, ks[i], q.j, ks[k]))
            })
        }
        FrameSystemSpec::ExplicitVectors { dim, vectors } => {
            let cols: Vec<&CVector> = window
                .points()
                .iter()
                .map(|p| {
                    vectors.get(p).ok_or_else(|| {
                        Error::InvalidArgument(format!("no vector given for point {p}"))
                    })
                })
                .collect::<Result<_>>()?;
            if let Some(v) = cols.iter().find(|v| v.len() != *dim) {
                return Err(Error::InvalidArgument(format!(
                    "vector of length {} in a system of dimension {dim}",
                    v.len()
                )));
            }
            fill_hermitian(n, parallel, |i, k| Ok(cols[k].dotc(cols[i])))
        }
        FrameSystemSpec::BandLimited2D { rep, generator } => {
            rep.check_group(spec)?;
            let samples: Vec<Sampled2D> = if parallel {
                window
                    .points()
                    .par_iter()
                    .map(|p| apply_rep(*rep, p, generator))
                    .collect::<Result<_>>()?
            } else {
                window
                    .points()
                    .iter()
                    .map(|p| apply_rep(*rep, p, generator))
                    .collect::<Result<_>>()?
            };
            fill_hermitian(n, parallel, |i, k| Ok(samples[i].inner(&samples[k])))
        }
    }
}

/// Named demonstration generators for the sampled 2D systems.
///
/// These are smooth, compactly supported bumps; they are not claimed to
/// generate Parseval frames.
pub fn generator_preset(name: &str, grid: Grid2D) -> Result<Sampled2D> {
    fn bump(x: f64, c: f64, r: f64) -> f64 {
        let u = (x - c) / r;
        if u.abs() >= 1.0 {
            0.0
        } else {
            (0.5 * PI * u).cos().powi(2)
        }
    }
    match name {
        "cosine_bump" => Ok(Sampled2D::from_fn(grid, |x1, x2| {
            C64::new(bump(x1, 0.0, 1.0) * bump(x2, 0.0, 1.0), 0.0)
        })),
        "modulated_bump" => Ok(Sampled2D::from_fn(grid, |x1, x2| {
            C64::from_polar(bump(x1, 0.5, 0.5) * bump(x2, 0.0, 1.0), PI * x2)
        })),
        _ => Err(Error::InvalidArgument(format!(
            "unknown generator preset '{name}' (expected cosine_bump or modulated_bump)"
        ))),
    }
}
