//! Exact arithmetic in `Γ₀`, the monomorphism `α`, the pseudo-lattice
//! `Γ = Γ₁Γ₀` and reduced words `u^{-m} γ uⁿ` of the ascending HNN extension
//! `G(α, Γ₀)`.
//!
//! Three families of `(Γ₀, α)` are supported:
//!
//! - `FreeAbelian`: `Γ₀ = ℤⁿ`, `α(v) = A·v` for an integer matrix with
//!   `det A ≠ 0` (column `j` of `A` is the image of `t_j`).
//! - `Heisenberg`: the discrete Heisenberg group with normal form
//!   `t₁ᵐ t₂ˡ t₃ᵏ`, relation `t₃t₂ = t₁t₂t₃`, and
//!   `α(t₃) = t₃ᵃ, α(t₂) = t₂ᵇ, α(t₁) = t₁ᵃᵇ`.
//! - `FreeNilpotent`: the free two-step nilpotent group on `t₁..tₙ` with
//!   central `z_ij` (`i < j`), relation `t_i t_j = z_ij t_j t_i`, normal form
//!   `t₁^{e₁}⋯tₙ^{eₙ} ∏ z_ij^{c_ij}` and `α(t_k) = t_k^{a_k}`,
//!   `α(z_ij) = z_ij^{a_i a_j}`.
//!
//! All exponents are big integers: iterates of `α` grow geometrically.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    FreeAbelian,
    Heisenberg,
    FreeNilpotent,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::FreeAbelian => "free-abelian",
            Family::Heisenberg => "heisenberg",
            Family::FreeNilpotent => "free-nilpotent",
        }
    }
}

/// The monomorphism `α : Γ₀ → Γ₀` together with the family of `Γ₀`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MonomorphismSpec {
    FreeAbelian {
        matrix: Vec<Vec<BigInt>>,
        det: BigInt,
        inverse: Vec<Vec<BigRational>>,
    },
    Heisenberg {
        a: BigInt,
        b: BigInt,
    },
    FreeNilpotent {
        exps: Vec<BigInt>,
    },
}

/// An element of `Γ₀` in normal form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gamma0Element {
    IntVector(Vec<BigInt>),
    /// `t₁ᵐ t₂ˡ t₃ᵏ`.
    HeisTriple { m: BigInt, l: BigInt, k: BigInt },
    /// `t` exponents followed by `z_ij` exponents for `i < j` in row order.
    NilElement { t: Vec<BigInt>, z: Vec<BigInt> },
}

/// The pseudo-lattice element `uʲγ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint {
    pub j: i64,
    pub gamma: Gamma0Element,
}

impl LatticePoint {
    pub fn new(j: i64, gamma: Gamma0Element) -> Self {
        LatticePoint { j, gamma }
    }
}

/// The element `u^{-m} γ uⁿ` of `G(α, Γ₀)`.
///
/// Reduced when `m = 0`, `n = 0`, or `γ` has no `α`-preimage.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupWord {
    pub m: u64,
    pub gamma: Gamma0Element,
    pub n: u64,
}

fn big(v: i64) -> BigInt {
    BigInt::from(v)
}

fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of `z_ij` (`i < j`, zero based) in the flattened z-exponent list.
fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

fn bareiss_det(matrix: &[Vec<BigInt>]) -> BigInt {
    let n = matrix.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut m: Vec<Vec<BigInt>> = matrix.to_vec();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&r| !m[r][k].is_zero()) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = v / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

fn rational_inverse(matrix: &[Vec<BigInt>]) -> Option<Vec<Vec<BigRational>>> {
    let n = matrix.len();
    let mut aug: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            let mut row: Vec<BigRational> = matrix[i]
                .iter()
                .map(|x| BigRational::from_integer(x.clone()))
                .collect();
            row.extend((0..n).map(|j| {
                if i == j {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }));
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !aug[r][col].is_zero())?;
        aug.swap(col, pivot);
        let p = aug[col][col].clone();
        for v in aug[col].iter_mut() {
            *v = &*v / &p;
        }
        for r in 0..n {
            if r != col && !aug[r][col].is_zero() {
                let f = aug[r][col].clone();
                for c in 0..2 * n {
                    let d = &f * &aug[col][c];
                    aug[r][c] = &aug[r][c] - d;
                }
            }
        }
    }
    Some(aug.into_iter().map(|row| row[n..].to_vec()).collect())
}

impl MonomorphismSpec {
    pub fn free_abelian(matrix: Vec<Vec<i64>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 || matrix.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument(
                "free-abelian matrix must be square and non-empty".into(),
            ));
        }
        let matrix: Vec<Vec<BigInt>> = matrix
            .into_iter()
            .map(|row| row.into_iter().map(big).collect())
            .collect();
        let det = bareiss_det(&matrix);
        if det.is_zero() {
            return Err(Error::SingularMatrix);
        }
        let inverse = rational_inverse(&matrix).ok_or(Error::SingularMatrix)?;
        Ok(MonomorphismSpec::FreeAbelian {
            matrix,
            det,
            inverse,
        })
    }

    /// `BS(1,2) = G(α, ℤ)` with `α(1) = 2`.
    pub fn baumslag_solitar_1_2() -> Self {
        Self::free_abelian(vec![vec![2]]).expect("[2] is invertible over Q")
    }

    pub fn heisenberg(a: i64, b: i64) -> Result<Self> {
        if a < 1 || b < 1 {
            return Err(Error::InvalidArgument(format!(
                "heisenberg exponents must be >= 1, got a={a}, b={b}"
            )));
        }
        Ok(MonomorphismSpec::Heisenberg {
            a: big(a),
            b: big(b),
        })
    }

    pub fn free_nilpotent(exps: Vec<i64>) -> Result<Self> {
        if exps.is_empty() || exps.iter().any(|&e| e < 1) {
            return Err(Error::InvalidArgument(
                "free-nilpotent exponents must be non-empty and >= 1".into(),
            ));
        }
        Ok(MonomorphismSpec::FreeNilpotent {
            exps: exps.into_iter().map(big).collect(),
        })
    }

    pub fn family(&self) -> Family {
        match self {
            MonomorphismSpec::FreeAbelian { .. } => Family::FreeAbelian,
            MonomorphismSpec::Heisenberg { .. } => Family::Heisenberg,
            MonomorphismSpec::FreeNilpotent { .. } => Family::FreeNilpotent,
        }
    }

    /// Number of generators `t_k` (3 for Heisenberg).
    pub fn rank(&self) -> usize {
        match self {
            MonomorphismSpec::FreeAbelian { matrix, .. } => matrix.len(),
            MonomorphismSpec::Heisenberg { .. } => 3,
            MonomorphismSpec::FreeNilpotent { exps } => exps.len(),
        }
    }

    /// Length of the exponent tuple of a normal-form element.
    pub fn exponent_len(&self) -> usize {
        match self {
            MonomorphismSpec::FreeNilpotent { exps } => exps.len() + pair_count(exps.len()),
            _ => self.rank(),
        }
    }

    pub fn identity(&self) -> Gamma0Element {
        match self {
            MonomorphismSpec::FreeAbelian { matrix, .. } => {
                Gamma0Element::IntVector(vec![BigInt::zero(); matrix.len()])
            }
            MonomorphismSpec::Heisenberg { .. } => Gamma0Element::HeisTriple {
                m: BigInt::zero(),
                l: BigInt::zero(),
                k: BigInt::zero(),
            },
            MonomorphismSpec::FreeNilpotent { exps } => Gamma0Element::NilElement {
                t: vec![BigInt::zero(); exps.len()],
                z: vec![BigInt::zero(); pair_count(exps.len())],
            },
        }
    }

    /// Generators of `Γ₀` in canonical order: `t1..tn` for the abelian and
    /// Heisenberg families, `t1..tn` then `z_ij` (`i < j`) for `F_n`.
    pub fn generators(&self) -> Vec<Gamma0Element> {
        let len = self.exponent_len();
        (0..len)
            .map(|i| {
                let mut e = vec![BigInt::zero(); len];
                e[i] = BigInt::one();
                self.from_exponents(e).expect("length matches")
            })
            .collect()
    }

    pub fn generator_names(&self) -> Vec<String> {
        match self {
            MonomorphismSpec::FreeNilpotent { exps } => {
                let n = exps.len();
                let mut names: Vec<String> = (1..=n).map(|k| format!("t{k}")).collect();
                for i in 0..n {
                    for j in i + 1..n {
                        names.push(format!("z{}_{}", i + 1, j + 1));
                    }
                }
                names
            }
            _ => (1..=self.rank()).map(|k| format!("t{k}")).collect(),
        }
    }

    /// Builds an element from its normal-form exponent tuple.
    pub fn from_exponents(&self, e: Vec<BigInt>) -> Result<Gamma0Element> {
        if e.len() != self.exponent_len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} exponents, got {}",
                self.exponent_len(),
                e.len()
            )));
        }
        Ok(match self {
            MonomorphismSpec::FreeAbelian { .. } => Gamma0Element::IntVector(e),
            MonomorphismSpec::Heisenberg { .. } => {
                let mut it = e.into_iter();
                Gamma0Element::HeisTriple {
                    m: it.next().unwrap(),
                    l: it.next().unwrap(),
                    k: it.next().unwrap(),
                }
            }
            MonomorphismSpec::FreeNilpotent { exps } => {
                let mut t = e;
                let z = t.split_off(exps.len());
                Gamma0Element::NilElement { t, z }
            }
        })
    }

    pub fn from_i64_exponents(&self, e: &[i64]) -> Result<Gamma0Element> {
        self.from_exponents(e.iter().map(|&x| big(x)).collect())
    }

    fn check(&self, x: &Gamma0Element) -> Result<()> {
        let ok = match (self, x) {
            (MonomorphismSpec::FreeAbelian { matrix, .. }, Gamma0Element::IntVector(v)) => {
                v.len() == matrix.len()
            }
            (MonomorphismSpec::Heisenberg { .. }, Gamma0Element::HeisTriple { .. }) => true,
            (MonomorphismSpec::FreeNilpotent { exps }, Gamma0Element::NilElement { t, z }) => {
                t.len() == exps.len() && z.len() == pair_count(exps.len())
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::FamilyMismatch {
                expected: self.family().name(),
            })
        }
    }

    /// Group product in normal form.
    pub fn mul(&self, x: &Gamma0Element, y: &Gamma0Element) -> Result<Gamma0Element> {
        self.check(x)?;
        self.check(y)?;
        Ok(match (x, y) {
            (Gamma0Element::IntVector(a), Gamma0Element::IntVector(b)) => {
                Gamma0Element::IntVector(a.iter().zip(b).map(|(p, q)| p + q).collect())
            }
            (
                Gamma0Element::HeisTriple { m, l, k },
                Gamma0Element::HeisTriple {
                    m: m2,
                    l: l2,
                    k: k2,
                },
            ) => Gamma0Element::HeisTriple {
                // t₃ᵏ t₂ˡ' = t₁^{k·l'} t₂ˡ' t₃ᵏ
                m: m + m2 + k * l2,
                l: l + l2,
                k: k + k2,
            },
            (Gamma0Element::NilElement { t, z }, Gamma0Element::NilElement { t: t2, z: z2 }) => {
                let n = t.len();
                let mut zz: Vec<BigInt> = z.iter().zip(z2).map(|(p, q)| p + q).collect();
                // moving t_i^{t2_i} left past t_j^{t_j} (j > i) emits z_ij^{-t_j·t2_i}
                for i in 0..n {
                    for j in i + 1..n {
                        zz[pair_index(n, i, j)] -= &t[j] * &t2[i];
                    }
                }
                Gamma0Element::NilElement {
                    t: t.iter().zip(t2).map(|(p, q)| p + q).collect(),
                    z: zz,
                }
            }
            _ => unreachable!("checked above"),
        })
    }

    pub fn inv(&self, x: &Gamma0Element) -> Result<Gamma0Element> {
        self.check(x)?;
        Ok(match x {
            Gamma0Element::IntVector(v) => Gamma0Element::IntVector(v.iter().map(|p| -p).collect()),
            Gamma0Element::HeisTriple { m, l, k } => Gamma0Element::HeisTriple {
                m: -m + k * l,
                l: -l,
                k: -k,
            },
            Gamma0Element::NilElement { t, z } => {
                let n = t.len();
                let mut zz: Vec<BigInt> = z.iter().map(|p| -p).collect();
                for i in 0..n {
                    for j in i + 1..n {
                        zz[pair_index(n, i, j)] -= &t[j] * &t[i];
                    }
                }
                Gamma0Element::NilElement {
                    t: t.iter().map(|p| -p).collect(),
                    z: zz,
                }
            }
        })
    }

    pub fn is_identity(&self, x: &Gamma0Element) -> bool {
        x.exponents().iter().all(|e| e.is_zero())
    }

    /// `α(x)`.
    pub fn apply(&self, x: &Gamma0Element) -> Result<Gamma0Element> {
        self.check(x)?;
        Ok(match (self, x) {
            (MonomorphismSpec::FreeAbelian { matrix, .. }, Gamma0Element::IntVector(v)) => {
                Gamma0Element::IntVector(
                    matrix
                        .iter()
                        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
                        .collect(),
                )
            }
            (MonomorphismSpec::Heisenberg { a, b }, Gamma0Element::HeisTriple { m, l, k }) => {
                Gamma0Element::HeisTriple {
                    m: a * b * m,
                    l: b * l,
                    k: a * k,
                }
            }
            (MonomorphismSpec::FreeNilpotent { exps }, Gamma0Element::NilElement { t, z }) => {
                let n = exps.len();
                let mut zz = z.clone();
                for i in 0..n {
                    for j in i + 1..n {
                        zz[pair_index(n, i, j)] *= &exps[i] * &exps[j];
                    }
                }
                Gamma0Element::NilElement {
                    t: t.iter().zip(exps).map(|(e, a)| e * a).collect(),
                    z: zz,
                }
            }
            _ => unreachable!("checked above"),
        })
    }

    /// The unique `y` with `α(y) = x`, or `None` when `x ∉ α(Γ₀)`.
    pub fn unapply(&self, x: &Gamma0Element) -> Result<Option<Gamma0Element>> {
        self.check(x)?;
        fn div_exact(p: &BigInt, q: &BigInt) -> Option<BigInt> {
            let (d, r) = p.div_rem(q);
            r.is_zero().then_some(d)
        }
        Ok(match (self, x) {
            (MonomorphismSpec::FreeAbelian { inverse, .. }, Gamma0Element::IntVector(v)) => {
                let mut out = Vec::with_capacity(v.len());
                for row in inverse {
                    let s: BigRational = row
                        .iter()
                        .zip(v)
                        .map(|(b, x)| b * BigRational::from_integer(x.clone()))
                        .sum();
                    if !s.is_integer() {
                        return Ok(None);
                    }
                    out.push(s.to_integer());
                }
                Some(Gamma0Element::IntVector(out))
            }
            (MonomorphismSpec::Heisenberg { a, b }, Gamma0Element::HeisTriple { m, l, k }) => {
                (|| {
                    Some(Gamma0Element::HeisTriple {
                        m: div_exact(m, &(a * b))?,
                        l: div_exact(l, b)?,
                        k: div_exact(k, a)?,
                    })
                })()
            }
            (MonomorphismSpec::FreeNilpotent { exps }, Gamma0Element::NilElement { t, z }) => {
                (|| {
                    let n = exps.len();
                    let tt: Option<Vec<BigInt>> =
                        t.iter().zip(exps).map(|(e, a)| div_exact(e, a)).collect();
                    let mut zz = Vec::with_capacity(z.len());
                    for i in 0..n {
                        for j in i + 1..n {
                            zz.push(div_exact(&z[pair_index(n, i, j)], &(&exps[i] * &exps[j]))?);
                        }
                    }
                    Some(Gamma0Element::NilElement { t: tt?, z: zz })
                })()
            }
            _ => unreachable!("checked above"),
        })
    }

    /// `αᵖ(x)`; negative `p` iterates [`unapply`](Self::unapply).
    pub fn power(&self, p: i64, x: &Gamma0Element) -> Result<Option<Gamma0Element>> {
        let mut cur = x.clone();
        self.check(&cur)?;
        for _ in 0..p.unsigned_abs() {
            cur = if p > 0 {
                self.apply(&cur)?
            } else {
                match self.unapply(&cur)? {
                    Some(y) => y,
                    None => return Ok(None),
                }
            };
        }
        Ok(Some(cur))
    }

    /// `(j,γ)(j',γ') = (j+j', α^{-j'}(γ)γ')`, or `None` when `α^{-j'}(γ)`
    /// does not exist.
    pub fn lattice_mul(&self, p: &LatticePoint, q: &LatticePoint) -> Result<Option<LatticePoint>> {
        self.check(&q.gamma)?;
        let Some(moved) = self.power(-q.j, &p.gamma)? else {
            return Ok(None);
        };
        Ok(Some(LatticePoint::new(p.j + q.j, self.mul(&moved, &q.gamma)?)))
    }

    fn reduce(&self, mut w: GroupWord) -> Result<GroupWord> {
        while w.m > 0 && w.n > 0 {
            match self.unapply(&w.gamma)? {
                Some(g) => {
                    w = GroupWord {
                        m: w.m - 1,
                        gamma: g,
                        n: w.n - 1,
                    }
                }
                None => break,
            }
        }
        Ok(w)
    }

    pub fn word(&self, m: u64, gamma: Gamma0Element, n: u64) -> Result<GroupWord> {
        self.check(&gamma)?;
        self.reduce(GroupWord { m, gamma, n })
    }

    pub fn identity_word(&self) -> GroupWord {
        GroupWord {
            m: 0,
            gamma: self.identity(),
            n: 0,
        }
    }

    /// The word for `u`.
    pub fn u(&self) -> GroupWord {
        GroupWord {
            m: 0,
            gamma: self.identity(),
            n: 1,
        }
    }

    /// Product of reduced words, reduced.
    pub fn word_mul(&self, w: &GroupWord, v: &GroupWord) -> Result<GroupWord> {
        self.check(&w.gamma)?;
        self.check(&v.gamma)?;
        let out = if w.n >= v.m {
            let shifted = self
                .power((w.n - v.m) as i64, &v.gamma)?
                .expect("forward powers exist");
            GroupWord {
                m: w.m,
                gamma: self.mul(&w.gamma, &shifted)?,
                n: w.n - v.m + v.n,
            }
        } else {
            let shifted = self
                .power((v.m - w.n) as i64, &w.gamma)?
                .expect("forward powers exist");
            GroupWord {
                m: w.m + v.m - w.n,
                gamma: self.mul(&shifted, &v.gamma)?,
                n: v.n,
            }
        };
        self.reduce(out)
    }

    pub fn word_inv(&self, w: &GroupWord) -> Result<GroupWord> {
        self.reduce(GroupWord {
            m: w.n,
            gamma: self.inv(&w.gamma)?,
            n: w.m,
        })
    }

    /// Reduced word of the lattice point `uʲγ`.
    pub fn embed(&self, p: &LatticePoint) -> Result<GroupWord> {
        self.check(&p.gamma)?;
        if p.j >= 0 {
            let g = self.power(p.j, &p.gamma)?.expect("forward powers exist");
            self.reduce(GroupWord {
                m: 0,
                gamma: g,
                n: p.j as u64,
            })
        } else {
            self.reduce(GroupWord {
                m: p.j.unsigned_abs(),
                gamma: p.gamma.clone(),
                n: 0,
            })
        }
    }

    /// All `Γ₀` elements with exponent sup-norm `≤ radius`, in lexicographic
    /// exponent order, at every level `j_min ≤ j ≤ j_max`.
    pub fn enumerate_window(&self, j_min: i64, j_max: i64, radius: u64) -> Result<Window> {
        let len = self.exponent_len();
        let r = radius as i64;
        let side = 2 * r + 1;
        let count = (side as u128).checked_pow(len as u32).filter(|&c| c <= 50_000_000);
        let Some(count) = count else {
            return Err(Error::InvalidArgument(format!(
                "window radius {radius} with {len} exponents is too large"
            )));
        };
        let mut gammas = Vec::with_capacity(count as usize);
        let mut idx = vec![-r; len];
        for _ in 0..count {
            gammas.push(self.from_i64_exponents(&idx)?);
            for d in (0..len).rev() {
                if idx[d] < r {
                    idx[d] += 1;
                    break;
                }
                idx[d] = -r;
            }
        }
        let mut w = Window::new(self, j_min, j_max, gammas)?;
        w.radius = Some(radius);
        Ok(w)
    }

    pub fn format_element(&self, x: &Gamma0Element) -> String {
        let names = self.generator_names();
        let parts: Vec<String> = x
            .exponents()
            .iter()
            .zip(&names)
            .filter(|(e, _)| !e.is_zero())
            .map(|(e, name)| format!("{name}^{e}"))
            .collect();
        if parts.is_empty() {
            "e".to_string()
        } else {
            parts.join(" ")
        }
    }

    /// Canonical text form, e.g. `u^-1 t1^2 u^1`.
    pub fn format_word(&self, w: &GroupWord) -> String {
        let mut parts = Vec::new();
        if w.m > 0 {
            parts.push(format!("u^-{}", w.m));
        }
        if !self.is_identity(&w.gamma) || (w.m == 0 && w.n == 0) {
            parts.push(self.format_element(&w.gamma));
        }
        if w.n > 0 {
            parts.push(format!("u^{}", w.n));
        }
        parts.join(" ")
    }

    /// Parses any product of `u^p`, `tK^p`, `zI_J^p` and `e` tokens and
    /// returns its reduced word.
    pub fn parse_word(&self, text: &str) -> Result<GroupWord> {
        let names = self.generator_names();
        let gens = self.generators();
        let mut acc = self.identity_word();
        for token in text.split_whitespace() {
            if token == "e" {
                continue;
            }
            let (name, exp) = match token.split_once('^') {
                Some((n, e)) => (
                    n,
                    BigInt::from_str(e)
                        .map_err(|_| Error::Parse(format!("bad exponent in '{token}'")))?,
                ),
                None => (token, BigInt::one()),
            };
            let factor = if name == "u" {
                let p = exp
                    .to_i64()
                    .ok_or_else(|| Error::Parse(format!("u exponent too large in '{token}'")))?;
                GroupWord {
                    m: if p < 0 { p.unsigned_abs() } else { 0 },
                    gamma: self.identity(),
                    n: if p > 0 { p as u64 } else { 0 },
                }
            } else {
                let pos = names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::Parse(format!("unknown generator '{name}'")))?;
                GroupWord {
                    m: 0,
                    gamma: self.gamma_power(&gens[pos], &exp)?,
                    n: 0,
                }
            };
            acc = self.word_mul(&acc, &factor)?;
        }
        Ok(acc)
    }

    /// `xᵖ` for an integer `p`.
    pub fn gamma_power(&self, x: &Gamma0Element, p: &BigInt) -> Result<Gamma0Element> {
        let mut base = if p.is_negative() {
            self.inv(x)?
        } else {
            x.clone()
        };
        let mut e = p.abs();
        let mut acc = self.identity();
        let two = BigInt::from(2);
        while !e.is_zero() {
            if e.is_odd() {
                acc = self.mul(&acc, &base)?;
            }
            base = self.mul(&base, &base)?;
            e /= &two;
        }
        Ok(acc)
    }
}

impl Gamma0Element {
    /// Normal-form exponent tuple.
    pub fn exponents(&self) -> Vec<&BigInt> {
        match self {
            Gamma0Element::IntVector(v) => v.iter().collect(),
            Gamma0Element::HeisTriple { m, l, k } => vec![m, l, k],
            Gamma0Element::NilElement { t, z } => t.iter().chain(z.iter()).collect(),
        }
    }

    pub fn sup_norm(&self) -> BigInt {
        self.exponents()
            .into_iter()
            .map(|e| e.abs())
            .max()
            .unwrap_or_default()
    }

    /// Exponents as `i64`, when they all fit.
    pub fn small_exponents(&self) -> Option<Vec<i64>> {
        self.exponents().into_iter().map(|e| e.to_i64()).collect()
    }
}

impl fmt::Display for Gamma0Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e: Vec<String> = self.exponents().iter().map(|x| x.to_string()).collect();
        write!(f, "({})", e.join(","))
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.j, self.gamma)
    }
}

/// Finite truncation `{(j, γ) : j_min ≤ j ≤ j_max, γ ∈ gammas}` of the
/// pseudo-lattice, indexed lexicographically on `(j, exponents)`.
#[derive(Clone, Debug)]
pub struct Window {
    j_min: i64,
    j_max: i64,
    radius: Option<u64>,
    gammas: Vec<Gamma0Element>,
    points: Vec<LatticePoint>,
    index: HashMap<LatticePoint, usize>,
}

impl Window {
    pub fn new(
        spec: &MonomorphismSpec,
        j_min: i64,
        j_max: i64,
        mut gammas: Vec<Gamma0Element>,
    ) -> Result<Self> {
        if j_min > 0 || j_max < 0 {
            return Err(Error::InvalidArgument(format!(
                "window needs j_min <= 0 <= j_max, got [{j_min}, {j_max}]"
            )));
        }
        for g in &gammas {
            spec.check(g)?;
        }
        gammas.sort();
        gammas.dedup();
        let identity = spec.identity();
        if gammas.binary_search(&identity).is_err() {
            return Err(Error::InvalidArgument(
                "window must contain the identity of Γ₀".into(),
            ));
        }
        let points: Vec<LatticePoint> = (j_min..=j_max)
            .flat_map(|j| gammas.iter().map(move |g| LatticePoint::new(j, g.clone())))
            .collect();
        let index = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        Ok(Window {
            j_min,
            j_max,
            radius: None,
            gammas,
            points,
            index,
        })
    }

    pub fn j_min(&self) -> i64 {
        self.j_min
    }

    pub fn j_max(&self) -> i64 {
        self.j_max
    }

    pub fn radius(&self) -> Option<u64> {
        self.radius
    }

    pub fn gammas(&self) -> &[Gamma0Element] {
        &self.gammas
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn point(&self, i: usize) -> &LatticePoint {
        &self.points[i]
    }

    /// Index range of the points at level `j`.
    pub fn level_range(&self, j: i64) -> std::ops::Range<usize> {
        if j < self.j_min || j > self.j_max {
            return 0..0;
        }
        let per = self.gammas.len();
        let start = (j - self.j_min) as usize * per;
        start..start + per
    }

    /// For each point `(j,γ)`, the index of `(j+1,γ)` when it lies in the window.
    pub fn shift_map(&self) -> Vec<Option<usize>> {
        let per = self.gammas.len();
        (0..self.len())
            .map(|i| (self.points[i].j < self.j_max).then_some(i + per))
            .collect()
    }

    /// For each point `(j,γ)` with `j ≤ 0`, the index of
    /// `(j, α^{-j}(γ₀)γ)` when it lies in the window.
    pub fn translation_map(
        &self,
        spec: &MonomorphismSpec,
        gamma0: &Gamma0Element,
    ) -> Result<Vec<Option<usize>>> {
        let mut moved_by_level = HashMap::new();
        for j in self.j_min..=0.min(self.j_max) {
            let g = spec.power(-j, gamma0)?.expect("forward powers exist");
            moved_by_level.insert(j, g);
        }
        self.points
            .iter()
            .map(|p| {
                if p.j > 0 {
                    return Ok(None);
                }
                let g = &moved_by_level[&p.j];
                let target = LatticePoint::new(p.j, spec.mul(g, &p.gamma)?);
                Ok(self.index_of(&target))
            })
            .collect()
    }

    /// Points whose level lies in `[j_lo, j_hi]` and whose exponent sup-norm
    /// is at most `radius`.
    pub fn sub_window_indices(&self, j_lo: i64, j_hi: i64, radius: u64) -> Vec<usize> {
        let r = BigInt::from(radius);
        (0..self.len())
            .filter(|&i| {
                let p = &self.points[i];
                p.j >= j_lo && p.j <= j_hi && p.gamma.sup_norm() <= r
            })
            .collect()
    }
}
