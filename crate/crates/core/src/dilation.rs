//! Complement kernel, Kolmogorov factorization and the dilating
//! representation `τ` with its dilation vector `η`.
//!
//! Given a Gram matrix `G` over a window, `K = I − G` is factored as
//! `K(x, y) = ⟨v(x), v(y)⟩` with `v(x) ∈ ℂʳ`. The shift `D` and the
//! translations `T(g)` are unitaries on `ℂʳ` with `D v(j,γ) = v(j+1,γ)` and
//! `T(γ₀) v(j,γ) = v(j, α^{-j}(γ₀)γ)` wherever both points lie in the window.
//!
//! `ℂʳ` is split into the chain `𝒦_j = span{v(i,·) : i ≤ j} ⊖ span{v(i,·) : i < j}`.
//! `T` is block diagonal on the chain: fitted on `𝒦₀`, pulled back through
//! `D` on negative levels and obtained as an `α`-root of `D T D*` on positive
//! levels, so `D T(g) = T(α(g)) D` holds on every level below the top one.

use std::collections::{BTreeMap, HashMap};

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Family, Gamma0Element, GroupWord, LatticePoint, MonomorphismSpec, Window};
use crate::linalg::{
    hermitian_defect, hermitian_eigen, hermitian_eigen_refined, identity, isometric_fit, mul_sparse_left,
    mul_sparse_right, norm1, orthonormal_complement, pivoted_orthonormalize, unitarity_defect,
    unitary_power, CMatrix, CVector, C64, ZERO,
};
use crate::roots::{abelian_alpha_root, fn_alpha_root, heisenberg_alpha_root};

/// Relative singular-value cut used when fitting isometries.
const FIT_RTOL: f64 = 1e-8;
/// Relative residual below which a chain candidate counts as dependent.
const CHAIN_RTOL: f64 = 1e-9;

/// Tolerances of the pipeline; all positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub hermitian: f64,
    pub psd: f64,
    pub rank: f64,
    pub k_relation: f64,
    pub factorization: f64,
    pub constraint: f64,
    pub unitarity: f64,
    pub leakage: f64,
    pub relation: f64,
    pub reconstruction: f64,
    pub dilation: f64,
    pub invariance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian: 1e-12,
            psd: 1e-10,
            rank: 1e-10,
            k_relation: 1e-10,
            factorization: 1e-10,
            constraint: 1e-8,
            unitarity: 1e-10,
            leakage: 1e-8,
            relation: 1e-6,
            reconstruction: 1e-6,
            dilation: 1e-6,
            invariance: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn as_map(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([
            ("hermitian", self.hermitian),
            ("psd", self.psd),
            ("rank", self.rank),
            ("k_relation", self.k_relation),
            ("factorization", self.factorization),
            ("constraint", self.constraint),
            ("unitarity", self.unitarity),
            ("leakage", self.leakage),
            ("relation", self.relation),
            ("reconstruction", self.reconstruction),
            ("dilation", self.dilation),
            ("invariance", self.invariance),
        ])
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.as_map() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "tolerance '{name}' must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// `K = I − G`.
pub fn complement_kernel(g: &CMatrix) -> CMatrix {
    identity(g.nrows()) - g
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KRelationReport {
    /// `max |K((j+1,γ),(j'+1,γ')) − K((j,γ),(j',γ'))|`.
    pub shift_residual: f64,
    pub shift_pairs: usize,
    pub shift_candidates: usize,
    /// `max |K((j,α^{-j}(γ₀)γ),(j',α^{-j'}(γ₀)γ')) − K((j,γ),(j',γ'))|` over
    /// `j, j' ≤ 0` and generators `γ₀`.
    pub translation_residual: f64,
    pub translation_pairs: usize,
    pub translation_candidates: usize,
}

impl KRelationReport {
    pub fn shift_fraction(&self) -> f64 {
        ratio(self.shift_pairs, self.shift_candidates)
    }

    pub fn translation_fraction(&self) -> f64 {
        ratio(self.translation_pairs, self.translation_candidates)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Residuals of the two covariance relations of `K` over all checkable pairs.
pub fn check_k_relations(
    k: &CMatrix,
    window: &Window,
    spec: &MonomorphismSpec,
) -> Result<KRelationReport> {
    let n = window.len();
    let mut rep = KRelationReport {
        shift_candidates: n * n,
        ..Default::default()
    };
    let shift = window.shift_map();
    let sources: Vec<(usize, usize)> = shift
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|t| (i, t)))
        .collect();
    for &(y, sy) in &sources {
        for &(x, sx) in &sources {
            rep.shift_residual = rep.shift_residual.max((k[(sx, sy)] - k[(x, y)]).norm());
        }
    }
    rep.shift_pairs = sources.len() * sources.len();

    let low: Vec<usize> = (0..n).filter(|&i| window.point(i).j <= 0).collect();
    for g in spec.generators() {
        rep.translation_candidates += low.len() * low.len();
        let map = window.translation_map(spec, &g)?;
        let pairs: Vec<(usize, usize)> = low
            .iter()
            .filter_map(|&i| map[i].map(|t| (i, t)))
            .collect();
        for &(y, ty) in &pairs {
            for &(x, tx) in &pairs {
                rep.translation_residual =
                    rep.translation_residual.max((k[(tx, ty)] - k[(x, y)]).norm());
            }
        }
        rep.translation_pairs += pairs.len() * pairs.len();
    }
    Ok(rep)
}

/// Smallest eigenvalue of a Hermitian kernel.
pub fn psd_check(k: &CMatrix) -> Result<f64> {
    let eig = hermitian_eigen(k)?;
    Ok(eig.values.last().copied().unwrap_or(0.0))
}

/// `K(x, y) = ⟨v(x), v(y)⟩` with `v(x)` the columns of `V = Λ_r^{1/2} Q_rᵀ`.
#[derive(Clone, Debug)]
pub struct KolmogorovModel {
    pub rank: usize,
    /// `r × N`, column `x` is `v(x)`.
    pub v: CMatrix,
    /// All eigenvalues of `K`, descending.
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    /// `max |K(x,y) − ⟨v(x), v(y)⟩|`.
    pub residual: f64,
}

impl KolmogorovModel {
    pub fn vector(&self, i: usize) -> CVector {
        self.v.column(i).into_owned()
    }
}

/// `⟨V_x, V_y⟩` for all column pairs, linear in the first argument.
pub fn column_gram(v: &CMatrix) -> CMatrix {
    mul_sparse_right(&v.transpose(), &v.map(|z| z.conj()))
}

/// Rank-revealing eigenfactorization of a positive semidefinite kernel.
///
/// Fails with [`Error::IndefiniteKernel`] when the smallest eigenvalue lies
/// below `−psd_tol`.
pub fn kolmogorov_factorize(k: &CMatrix, psd_tol: f64, rank_tol: f64) -> Result<KolmogorovModel> {
    let n = k.nrows();
    let eig = hermitian_eigen_refined(k)?;
    let min_eigenvalue = eig.values.last().copied().unwrap_or(0.0);
    if min_eigenvalue < -psd_tol {
        return Err(Error::IndefiniteKernel {
            min_eigenvalue,
            tolerance: psd_tol,
        });
    }
    let lmax = eig.values.first().copied().unwrap_or(0.0);
    let rank = if lmax > 0.0 {
        eig.values.iter().filter(|&&l| l > rank_tol * lmax).count()
    } else {
        0
    };
    let mut v = CMatrix::zeros(rank, n);
    for kk in 0..rank {
        let s = eig.values[kk].sqrt();
        for x in 0..n {
            v[(kk, x)] = eig.vectors[(x, kk)] * s;
        }
    }
    let residual = if n == 0 {
        0.0
    } else {
        let g = column_gram(&v);
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((k[(i, j)] - g[(i, j)]).norm());
            }
        }
        worst
    };
    Ok(KolmogorovModel {
        rank,
        v,
        eigenvalues: eig.values,
        min_eigenvalue,
        residual,
    })
}

fn columns_of(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
}

fn max_column_residual(a: &CMatrix, b: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| (a.column(j) - b.column(j)).norm())
        .fold(0.0, f64::max)
}

/// Unitary `D` with `D v(j,γ) = v(j+1,γ)` on the constrained pairs.
#[derive(Clone, Debug)]
pub struct ShiftOperator {
    pub d: CMatrix,
    /// Window points `x` for which `D v(x) = v(x + 1)` was imposed.
    pub mask: Vec<bool>,
    pub fitted_rank: usize,
    /// `max ‖D v(j,γ) − v(j+1,γ)‖` over constrained pairs.
    pub residual: f64,
}

pub fn build_shift(model: &KolmogorovModel, window: &Window, tol: &Tolerances) -> Result<ShiftOperator> {
    let shift = window.shift_map();
    let (src, tgt): (Vec<usize>, Vec<usize>) = shift
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|t| (i, t)))
        .unzip();
    let mut mask = vec![false; window.len()];
    for &i in &src {
        mask[i] = true;
    }
    if model.rank == 0 {
        return Ok(ShiftOperator {
            d: CMatrix::zeros(0, 0),
            mask,
            fitted_rank: 0,
            residual: 0.0,
        });
    }
    let fit = isometric_fit(&columns_of(&model.v, &src), &columns_of(&model.v, &tgt), FIT_RTOL)?;
    if fit.residual > tol.relation {
        return Err(Error::RelationViolation {
            what: "shift constraints D v(j,γ) = v(j+1,γ)".into(),
            residual: fit.residual,
            tolerance: tol.relation,
        });
    }
    Ok(ShiftOperator {
        d: fit.unitary,
        mask,
        fitted_rank: fit.rank,
        residual: fit.residual,
    })
}

/// Orthonormal bases of `𝒦_j`, one block per window level.
#[derive(Clone, Debug)]
pub struct SubspaceChain {
    pub levels: Vec<i64>,
    /// `r × dim 𝒦_j`.
    pub blocks: Vec<CMatrix>,
    /// Directions not reached by any `v`, appended to the top block.
    pub leftover: usize,
}

impl SubspaceChain {
    pub fn block_index(&self, level: i64) -> Option<usize> {
        self.levels.iter().position(|&l| l == level)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.ncols()).collect()
    }

    /// All blocks side by side.
    pub fn basis(&self) -> CMatrix {
        let r = self.blocks.first().map_or(0, |b| b.nrows());
        let total: usize = self.dims().iter().sum();
        let mut out = CMatrix::zeros(r, total);
        let mut c = 0;
        for b in &self.blocks {
            out.view_mut((0, c), (r, b.ncols())).copy_from(b);
            c += b.ncols();
        }
        out
    }

    /// `‖BᵀB − I‖₁` for the concatenated basis.
    pub fn orthogonality_defect(&self) -> f64 {
        unitarity_defect(&self.basis())
    }
}

/// Level-by-level pivoted Gram-Schmidt of the `v`'s.
pub fn subspace_chain(model: &KolmogorovModel, window: &Window) -> SubspaceChain {
    let r = model.rank;
    let scale = (0..model.v.ncols())
        .map(|i| model.v.column(i).norm())
        .fold(0.0, f64::max);
    let mut acc = CMatrix::zeros(r, 0);
    let mut levels = Vec::new();
    let mut blocks = Vec::new();
    for j in window.j_min()..=window.j_max() {
        let idx: Vec<usize> = window.level_range(j).collect();
        let cand = columns_of(&model.v, &idx);
        let (new, _) = if r == 0 {
            (CMatrix::zeros(0, 0), Vec::new())
        } else {
            pivoted_orthonormalize(&cand, Some(&acc), CHAIN_RTOL * scale, r - acc.ncols())
        };
        let mut next = CMatrix::zeros(r, acc.ncols() + new.ncols());
        next.view_mut((0, 0), (r, acc.ncols())).copy_from(&acc);
        next.view_mut((0, acc.ncols()), (r, new.ncols())).copy_from(&new);
        acc = next;
        levels.push(j);
        blocks.push(new);
    }
    let mut leftover = 0;
    if acc.ncols() < r {
        let extra = orthonormal_complement(&acc);
        leftover = extra.ncols();
        let top = blocks.last_mut().expect("window has at least one level");
        let mut grown = CMatrix::zeros(r, top.ncols() + leftover);
        grown.view_mut((0, 0), (r, top.ncols())).copy_from(top);
        grown.view_mut((0, top.ncols()), (r, leftover)).copy_from(&extra);
        *top = grown;
    }
    SubspaceChain {
        levels,
        blocks,
        leftover,
    }
}

/// Exponents of a `Γ₀` element as `i64`.
fn small_exponents(g: &Gamma0Element) -> Result<Vec<i64>> {
    g.small_exponents()
        .ok_or_else(|| Error::Numerical("group element exponent exceeds i64".into()))
}

/// `T(γ)·c` for block matrices `gens` of one level, `γ` given by its
/// normal-form exponents (product of generator powers in order).
fn apply_exponents(gens: &[CMatrix], exps: &[i64], c: &CMatrix) -> CMatrix {
    let mut out = c.clone();
    for (g, &e) in gens.iter().zip(exps).rev() {
        if e == 0 || g.nrows() == 0 {
            continue;
        }
        if e.unsigned_abs() <= 8 {
            let step = if e > 0 { g.clone() } else { g.adjoint() };
            for _ in 0..e.unsigned_abs() {
                out = &step * out;
            }
        } else {
            out = unitary_power(g, e) * out;
        }
    }
    out
}

fn evaluate_exponents(gens: &[CMatrix], exps: &[i64], dim: usize) -> CMatrix {
    apply_exponents(gens, exps, &identity(dim))
}

/// `‖X − B(BᵀX)‖₁`: how far the columns of `X` leave the span of `B`.
fn leakage(b: &CMatrix, x: &CMatrix) -> f64 {
    let coef = mul_sparse_left(&b.adjoint(), x);
    norm1(&(x - mul_sparse_right(b, &coef)))
}

/// The dilating representation restricted to the window.
#[derive(Clone, Debug)]
pub struct DilationModel {
    pub d: CMatrix,
    pub chain: SubspaceChain,
    pub generator_names: Vec<String>,
    /// `t_blocks[b][g]`: `T(g)` on chain block `b` in block coordinates.
    pub t_blocks: Vec<Vec<CMatrix>>,
    /// `T(g)` on `ℂʳ`.
    pub t_full: Vec<CMatrix>,
    pub eta: CVector,
    /// Lowest and highest chain level on which `η` has a component.
    pub eta_levels: Option<(i64, i64)>,
    /// Largest off-block leakage met while assembling `T`.
    pub leakage: f64,
    /// Residual of fitting `T(g)` on `𝒦₀`, per generator.
    pub block_fit_residuals: Vec<f64>,
    pub root_residuals: BTreeMap<String, f64>,
    pub seed: u64,
}

/// Which chain levels a vector touches.
fn level_support(chain: &SubspaceChain, x: &CVector) -> Option<(i64, i64)> {
    let scale = x.norm();
    if scale == 0.0 {
        return None;
    }
    let mut lo = None;
    let mut hi = None;
    for (b, l) in chain.blocks.iter().zip(&chain.levels) {
        if b.ncols() == 0 {
            continue;
        }
        if (b.adjoint() * x).norm() > 1e-12 * scale {
            lo = lo.or(Some(*l));
            hi = Some(*l);
        }
    }
    lo.zip(hi)
}

fn wrap_root(level: i64, e: Error) -> Error {
    match e {
        Error::AlphaRootFailure { .. } => e,
        other => Error::AlphaRootFailure {
            level,
            detail: other.to_string(),
        },
    }
}

/// Builds `D`-compatible `T` on every chain block and returns the model.
///
/// `𝒦₀`: unitary fit of `P v(0,γ) ↦ P v(0, γ₀γ)` (`P` the projection onto
/// `𝒦₀`). `𝒦_j`, `j < 0`: `T_j(g) = D* T_{j+1}(α(g)) D`. `𝒦_n`, `n > 0`:
/// `α`-root of `ρ_n(g) = D T_{n−1}(g) D*`.
pub fn build_tau(
    model: &KolmogorovModel,
    window: &Window,
    spec: &MonomorphismSpec,
    chain: &SubspaceChain,
    shift: &ShiftOperator,
    tol: &Tolerances,
    seed: u64,
) -> Result<DilationModel> {
    let gens = spec.generators();
    let names = spec.generator_names();
    let ng = gens.len();
    let r = model.rank;
    let nb = chain.blocks.len();
    let d = &shift.d;
    let alpha_exps: Vec<Vec<i64>> = gens
        .iter()
        .map(|g| small_exponents(&spec.apply(g)?))
        .collect::<Result<_>>()?;

    let mut t_blocks: Vec<Option<Vec<CMatrix>>> = vec![None; nb];
    let mut worst_leak = 0.0f64;
    let mut root_residuals = BTreeMap::new();
    let zero_block = chain
        .block_index(0)
        .ok_or_else(|| Error::InvalidArgument("window has no level 0".into()))?;

    // level 0: fit on projected level-0 pairs
    let b0 = &chain.blocks[zero_block];
    let mut fits = Vec::with_capacity(ng);
    let mut level0 = Vec::with_capacity(ng);
    for g in &gens {
        let map = window.translation_map(spec, g)?;
        let (src, tgt): (Vec<usize>, Vec<usize>) = window
            .level_range(0)
            .filter_map(|i| map[i].map(|t| (i, t)))
            .unzip();
        let ps = b0.adjoint() * columns_of(&model.v, &src);
        let pt = b0.adjoint() * columns_of(&model.v, &tgt);
        let fit = isometric_fit(&ps, &pt, FIT_RTOL)?;
        if fit.residual > tol.relation {
            return Err(Error::RelationViolation {
                what: format!("translation constraints on level 0 for {}", spec.format_element(g)),
                residual: fit.residual,
                tolerance: tol.relation,
            });
        }
        fits.push(fit.residual);
        level0.push(fit.unitary);
    }
    t_blocks[zero_block] = Some(level0);

    // negative levels by pullback through D
    for b in (0..zero_block).rev() {
        let (lo, hi) = (&chain.blocks[b], &chain.blocks[b + 1]);
        let dlo = mul_sparse_left(d, lo);
        worst_leak = worst_leak.max(leakage(hi, &dlo));
        let into = hi.adjoint() * &dlo;
        let upper = t_blocks[b + 1].as_ref().expect("built above");
        let blocks = alpha_exps
            .iter()
            .map(|e| into.adjoint() * evaluate_exponents(upper, e, hi.ncols()) * &into)
            .collect();
        t_blocks[b] = Some(blocks);
    }
    if worst_leak > tol.leakage {
        return Err(Error::BlockLeakage {
            level: window.j_min(),
            leakage: worst_leak,
            tolerance: tol.leakage,
        });
    }

    // positive levels as alpha-roots
    for b in zero_block + 1..nb {
        let level = chain.levels[b];
        let (lo, hi) = (&chain.blocks[b - 1], &chain.blocks[b]);
        let leak = leakage(hi, &mul_sparse_left(d, lo)).max(leakage(lo, &mul_sparse_left(&d.adjoint(), hi)));
        worst_leak = worst_leak.max(leak);
        if leak > tol.leakage {
            return Err(Error::BlockLeakage {
                level,
                leakage: leak,
                tolerance: tol.leakage,
            });
        }
        let into = hi.adjoint() * mul_sparse_left(d, lo);
        let lower = t_blocks[b - 1].as_ref().expect("built above");
        let rho: Vec<CMatrix> = lower
            .iter()
            .map(|t| &into * t * into.adjoint())
            .collect();
        let dim = hi.ncols();
        let roots = if dim == 0 {
            rho.clone()
        } else {
            level_root(spec, &rho, level, seed, tol, &mut root_residuals)?
        };
        t_blocks[b] = Some(roots);
    }
    let t_blocks: Vec<Vec<CMatrix>> = t_blocks.into_iter().map(|b| b.expect("all levels built")).collect();

    let t_full: Vec<CMatrix> = (0..ng)
        .map(|g| {
            let mut t = CMatrix::zeros(r, r);
            for (b, basis) in chain.blocks.iter().enumerate() {
                if basis.ncols() > 0 {
                    let tb = mul_sparse_right(basis, &t_blocks[b][g]);
                    t += mul_sparse_right(&tb, &basis.adjoint());
                }
            }
            t
        })
        .collect();

    let eta = match window.index_of(&LatticePoint::new(0, spec.identity())) {
        Some(i) if r > 0 => model.vector(i),
        _ => CVector::zeros(r),
    };
    let eta_levels = level_support(chain, &eta);
    Ok(DilationModel {
        d: d.clone(),
        chain: chain.clone(),
        generator_names: names,
        t_blocks,
        t_full,
        eta,
        eta_levels,
        leakage: worst_leak,
        block_fit_residuals: fits,
        root_residuals,
        seed,
    })
}

fn level_root(
    spec: &MonomorphismSpec,
    rho: &[CMatrix],
    level: i64,
    seed: u64,
    tol: &Tolerances,
    residuals: &mut BTreeMap<String, f64>,
) -> Result<Vec<CMatrix>> {
    let fail = |detail: String| Error::AlphaRootFailure { level, detail };
    match spec {
        MonomorphismSpec::FreeAbelian { .. } => {
            let root = abelian_alpha_root(rho, spec, seed.wrapping_add(level as u64))
                .map_err(|e| wrap_root(level, e))?;
            for (k, v) in &root.residuals {
                residuals.insert(format!("level_{level}.{k}"), *v);
            }
            let res = root.residuals["alpha_relation"];
            if !(res <= tol.relation) {
                return Err(fail(format!("T(α(t_j)) residual {res:e}")));
            }
            Ok(root.matrices)
        }
        MonomorphismSpec::Heisenberg { a, b } => {
            let (a, b) = (
                a.to_u64().ok_or_else(|| fail("exponent too large".into()))?,
                b.to_u64().ok_or_else(|| fail("exponent too large".into()))?,
            );
            let root = heisenberg_alpha_root(&rho[2], &rho[1], &rho[0], a, b)
                .map_err(|e| wrap_root(level, e))?;
            residuals.insert(format!("level_{level}.r1_commutator_power"), root.r1);
            residuals.insert(format!("level_{level}.r2_u_commutes_w"), root.r2);
            residuals.insert(format!("level_{level}.r3_v_commutes_w"), root.r3);
            let worst = root.r1.max(root.r2).max(root.r3);
            if !(worst <= tol.relation) {
                return Err(fail(format!(
                    "commutator residuals r1={:e} r2={:e} r3={:e}",
                    root.r1, root.r2, root.r3
                )));
            }
            Ok(vec![root.w, root.v, root.u])
        }
        MonomorphismSpec::FreeNilpotent { exps } => {
            let n = exps.len();
            let ex: Vec<u64> = exps
                .iter()
                .map(|e| e.to_u64().ok_or_else(|| fail("exponent too large".into())))
                .collect::<Result<_>>()?;
            let root = fn_alpha_root(&rho[..n], &rho[n..], &ex).map_err(|e| wrap_root(level, e))?;
            for (k, v) in &root.residuals {
                residuals.insert(format!("level_{level}.{k}"), *v);
            }
            let worst = root.residuals.values().fold(0.0f64, |a, &b| a.max(b));
            if !(worst <= tol.relation) {
                return Err(fail(format!("nilpotent root residual {worst:e}")));
            }
            Ok(root.matrices)
        }
    }
}

impl DilationModel {
    pub fn rank(&self) -> usize {
        self.d.nrows()
    }

    /// `T(γ)·X` applied block by block.
    pub fn apply_gamma(&self, gamma: &Gamma0Element, x: &CMatrix) -> Result<CMatrix> {
        let exps = small_exponents(gamma)?;
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        for (b, basis) in self.chain.blocks.iter().enumerate() {
            if basis.ncols() == 0 {
                continue;
            }
            let c = mul_sparse_left(&basis.adjoint(), x);
            let c = apply_exponents(&self.t_blocks[b], &exps, &c);
            out += mul_sparse_right(basis, &c);
        }
        Ok(out)
    }

    /// `‖(D T(g) − T(α(g)) D) B‖₁` with `B` the chain blocks below the top
    /// level, for every generator `g`.
    pub fn relation_residuals(&self, spec: &MonomorphismSpec) -> Result<Vec<f64>> {
        let nb = self.chain.blocks.len();
        let dom: Vec<&CMatrix> = self.chain.blocks[..nb.saturating_sub(1)].iter().collect();
        let r = self.rank();
        let width: usize = dom.iter().map(|b| b.ncols()).sum();
        let mut bd = CMatrix::zeros(r, width);
        let mut c = 0;
        for b in &dom {
            bd.view_mut((0, c), (r, b.ncols())).copy_from(b);
            c += b.ncols();
        }
        let dbd = mul_sparse_left(&self.d, &bd);
        spec.generators()
            .iter()
            .map(|g| {
                let lhs = mul_sparse_left(&self.d, &self.apply_gamma(g, &bd)?);
                let rhs = self.apply_gamma(&spec.apply(g)?, &dbd)?;
                Ok(norm1(&(lhs - rhs)))
            })
            .collect()
    }

    /// Defining relations of `Γ₀` evaluated on the full matrices `T(g)`.
    pub fn gamma0_relation_residual(&self, spec: &MonomorphismSpec) -> f64 {
        let t = &self.t_full;
        let comm = |a: &CMatrix, b: &CMatrix| {
            norm1(&(mul_sparse_right(a, b) - mul_sparse_right(b, a)))
        };
        let mut worst = 0.0f64;
        match spec.family() {
            Family::FreeAbelian => {
                for i in 0..t.len() {
                    for j in i + 1..t.len() {
                        worst = worst.max(comm(&t[i], &t[j]));
                    }
                }
            }
            Family::Heisenberg => {
                // t3 t2 = t1 t2 t3, t1 central
                let lhs = mul_sparse_right(&t[2], &t[1]);
                let rhs = mul_sparse_right(&mul_sparse_right(&t[0], &t[1]), &t[2]);
                worst = norm1(&(lhs - rhs))
                    .max(comm(&t[0], &t[1]))
                    .max(comm(&t[0], &t[2]));
            }
            Family::FreeNilpotent => {
                let n = spec.rank();
                let mut idx = n;
                for i in 0..n {
                    for j in i + 1..n {
                        let lhs = mul_sparse_right(&t[i], &t[j]);
                        let rhs =
                            mul_sparse_right(&mul_sparse_right(&t[idx], &t[j]), &t[i]);
                        worst = worst.max(norm1(&(lhs - rhs)));
                        for m in t {
                            worst = worst.max(comm(&t[idx], m));
                        }
                        idx += 1;
                    }
                }
            }
        }
        worst
    }

    pub fn max_t_unitarity_defect(&self) -> f64 {
        self.t_full
            .iter()
            .map(unitarity_defect)
            .fold(0.0, f64::max)
    }

    /// `τ(u^{-m} γ uⁿ) η = D*ᵐ T(γ) Dⁿ η`, or `None` when the word leaves the
    /// levels on which `D` and `T` are defined.
    pub fn apply_word_to_eta(&self, word: &GroupWord) -> Result<Option<CVector>> {
        let Some((lo, hi)) = self.eta_levels else {
            return Ok(Some(CVector::zeros(self.rank())));
        };
        let j_min = *self.chain.levels.first().expect("non-empty chain");
        let j_max = *self.chain.levels.last().expect("non-empty chain");
        let (m, n) = (word.m as i64, word.n as i64);
        if hi + n > j_max || lo + n - m < j_min {
            return Ok(None);
        }
        let mut x = CMatrix::from_column_slice(self.rank(), 1, self.eta.as_slice());
        for _ in 0..n {
            x = &self.d * x;
        }
        x = self.apply_gamma(&word.gamma, &x)?;
        let da = self.d.adjoint();
        for _ in 0..m {
            x = &da * x;
        }
        Ok(Some(x.column(0).into_owned()))
    }

    /// `Dʲ T(γ) η`, or `None` outside the defined levels.
    pub fn reconstruct(&self, p: &LatticePoint) -> Result<Option<CVector>> {
        let Some((lo, hi)) = self.eta_levels else {
            return Ok(Some(CVector::zeros(self.rank())));
        };
        let j_min = *self.chain.levels.first().expect("non-empty chain");
        let j_max = *self.chain.levels.last().expect("non-empty chain");
        if hi + p.j > j_max || lo + p.j < j_min {
            return Ok(None);
        }
        let x = CMatrix::from_column_slice(self.rank(), 1, self.eta.as_slice());
        let mut x = self.apply_gamma(&p.gamma, &x)?;
        let step = if p.j >= 0 { self.d.clone() } else { self.d.adjoint() };
        for _ in 0..p.j.unsigned_abs() {
            x = &step * x;
        }
        Ok(Some(x.column(0).into_owned()))
    }
}

/// `max ‖T(γ₀) v(j,γ) − v(j, α^{-j}(γ₀)γ)‖` over `j ≤ 0` pairs in the window,
/// per generator, with the number of pairs.
pub fn translation_constraint_residuals(
    model: &KolmogorovModel,
    window: &Window,
    spec: &MonomorphismSpec,
    tau: &DilationModel,
) -> Result<Vec<(f64, usize)>> {
    spec.generators()
        .iter()
        .map(|g| {
            let map = window.translation_map(spec, g)?;
            let (src, tgt): (Vec<usize>, Vec<usize>) = (0..window.len())
                .filter_map(|i| map[i].map(|t| (i, t)))
                .unzip();
            if model.rank == 0 || src.is_empty() {
                return Ok((0.0, src.len()));
            }
            let moved = tau.apply_gamma(g, &columns_of(&model.v, &src))?;
            Ok((max_column_residual(&moved, &columns_of(&model.v, &tgt)), src.len()))
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvarianceResult {
    pub residual: f64,
    pub sampled: usize,
    pub skipped: usize,
}

/// `max |K_{τ,η}(sx, sy) − K_{τ,η}(x, y)|` with `K_{τ,η}(x,y) = ⟨τ(x)η, τ(y)η⟩`.
pub fn invariance_sample(
    tau: &DilationModel,
    spec: &MonomorphismSpec,
    words: &[GroupWord],
    points: &[(LatticePoint, LatticePoint)],
) -> Result<InvarianceResult> {
    let mut cache: HashMap<GroupWord, Option<CVector>> = HashMap::new();
    let mut eval = |w: GroupWord| -> Result<Option<CVector>> {
        if let Some(v) = cache.get(&w) {
            return Ok(v.clone());
        }
        let v = tau.apply_word_to_eta(&w)?;
        cache.insert(w, v.clone());
        Ok(v)
    };
    let mut out = InvarianceResult::default();
    for s in words {
        for (x, y) in points {
            let wx = spec.embed(x)?;
            let wy = spec.embed(y)?;
            let vals = (
                eval(spec.word_mul(s, &wx)?)?,
                eval(spec.word_mul(s, &wy)?)?,
                eval(wx)?,
                eval(wy)?,
            );
            match vals {
                (Some(sx), Some(sy), Some(vx), Some(vy)) => {
                    let lhs = sy.dotc(&sx);
                    let rhs = vy.dotc(&vx);
                    out.residual = out.residual.max((lhs - rhs).norm());
                    out.sampled += 1;
                }
                _ => out.skipped += 1,
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DilationCertificate {
    /// `max ‖Dʲ T(γ) η − v(j,γ)‖` on the core.
    pub reconstruction: f64,
    /// `max |G̃ − I|` with `G̃ = G + ⟨τ(x)η, τ(y)η⟩`.
    pub dilated_gram: f64,
    /// `max |⟨τ(x)η, τ(y)η⟩ − K(x,y)|`.
    pub kernel_agreement: f64,
    pub core_points: usize,
    pub skipped: usize,
}

/// Orthonormality of the dilated system `π(x)ψ ⊕ τ(x)η` on the core points
/// (window indices).
pub fn assemble_dilation(
    gram: &CMatrix,
    kernel: &CMatrix,
    model: &KolmogorovModel,
    tau: &DilationModel,
    spec: &MonomorphismSpec,
    window: &Window,
    core: &[usize],
) -> Result<DilationCertificate> {
    let mut cert = DilationCertificate::default();
    let mut vecs: Vec<(usize, CVector)> = Vec::new();
    for &i in core {
        let p = window.point(i);
        match tau.apply_word_to_eta(&spec.embed(p)?)? {
            Some(v) => {
                if let Some(rec) = tau.reconstruct(p)? {
                    let target = if model.rank == 0 {
                        CVector::zeros(0)
                    } else {
                        model.vector(i)
                    };
                    cert.reconstruction = cert.reconstruction.max((rec - target).norm());
                }
                vecs.push((i, v));
            }
            None => cert.skipped += 1,
        }
    }
    for (x, vx) in &vecs {
        for (y, vy) in &vecs {
            let k = vy.dotc(vx);
            cert.kernel_agreement = cert.kernel_agreement.max((k - kernel[(*x, *y)]).norm());
            let delta = if x == y { 1.0 } else { 0.0 };
            let g = gram[(*x, *y)] + k - C64::new(delta, 0.0);
            cert.dilated_gram = cert.dilated_gram.max(g.norm());
        }
    }
    cert.core_points = vecs.len();
    Ok(cert)
}

/// Everything produced by a successful dilation run.
#[derive(Clone, Debug)]
pub struct DilationRun {
    pub kernel: CMatrix,
    pub k_relations: KRelationReport,
    pub model: KolmogorovModel,
    pub shift: ShiftOperator,
    pub chain: SubspaceChain,
    pub tau: DilationModel,
}

/// `K = I − G`, checked Hermitian within `tol.hermitian`.
pub fn kernel_from_gram(g: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    let defect = hermitian_defect(g);
    if !(defect <= tol.hermitian) {
        return Err(Error::RelationViolation {
            what: "Gram matrix Hermitian symmetry".into(),
            residual: defect,
            tolerance: tol.hermitian,
        });
    }
    Ok(complement_kernel(g))
}

/// Zero vector helper for empty models.
pub fn zero_vector(n: usize) -> CVector {
    CVector::from_element(n, ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn bs() -> MonomorphismSpec {
        MonomorphismSpec::baumslag_solitar_1_2()
    }

    #[test]
    fn zero_kernel_has_rank_zero() {
        let k = CMatrix::zeros(4, 4);
        let m = kolmogorov_factorize(&k, 1e-10, 1e-10).unwrap();
        assert_eq!(m.rank, 0);
        assert_eq!(m.residual, 0.0);
        assert_eq!(psd_check(&k).unwrap(), 0.0);
    }

    #[test]
    fn identity_kernel_gives_orthonormal_vectors() {
        let k = identity(5);
        let m = kolmogorov_factorize(&k, 1e-10, 1e-10).unwrap();
        assert_eq!(m.rank, 5);
        assert!(max_abs(&(column_gram(&m.v) - identity(5))) < 1e-14);
    }

    #[test]
    fn indefinite_kernel_rejected() {
        let k = identity(2) * C64::new(-1.0, 0.0);
        assert_eq!(psd_check(&k).unwrap(), -1.0);
        assert!(matches!(
            kolmogorov_factorize(&k, 1e-10, 1e-10),
            Err(Error::IndefiniteKernel { .. })
        ));
    }

    #[test]
    fn complement_of_identity_is_zero() {
        assert_eq!(complement_kernel(&identity(3)), CMatrix::zeros(3, 3));
    }

    #[test]
    fn shift_on_two_orthogonal_points() {
        let spec = bs();
        let w = spec.enumerate_window(0, 1, 0).unwrap();
        let m = kolmogorov_factorize(&identity(2), 1e-10, 1e-10).unwrap();
        let tol = Tolerances::default();
        let s = build_shift(&m, &w, &tol).unwrap();
        assert!(s.residual < 1e-14);
        assert!(unitarity_defect(&s.d) < 1e-14);
        let dv = &s.d * m.vector(0);
        assert!((dv - m.vector(1)).norm() < 1e-14);
        let chain = subspace_chain(&m, &w);
        assert_eq!(chain.dims(), vec![1, 1]);
    }

    #[test]
    fn chain_dims_for_identity_kernel() {
        let spec = bs();
        let w = spec.enumerate_window(-1, 1, 1).unwrap();
        let m = kolmogorov_factorize(&identity(w.len()), 1e-10, 1e-10).unwrap();
        let chain = subspace_chain(&m, &w);
        assert_eq!(chain.dims(), vec![3, 3, 3]);
        assert_eq!(chain.leftover, 0);
        assert!(chain.orthogonality_defect() < 1e-14);
    }

    #[test]
    fn k_relations_of_zero_kernel() {
        let spec = bs();
        let w = spec.enumerate_window(-1, 1, 2).unwrap();
        let rep = check_k_relations(&CMatrix::zeros(15, 15), &w, &spec).unwrap();
        assert_eq!(rep.shift_residual, 0.0);
        assert_eq!(rep.translation_residual, 0.0);
        assert!(rep.shift_fraction() > 0.0);
        assert!(rep.translation_fraction() > 0.0);
    }

    #[test]
    fn trivial_tau_for_orthonormal_input() {
        let spec = bs();
        let w = spec.enumerate_window(-1, 1, 1).unwrap();
        let tol = Tolerances::default();
        let k = CMatrix::zeros(w.len(), w.len());
        let m = kolmogorov_factorize(&k, tol.psd, tol.rank).unwrap();
        let s = build_shift(&m, &w, &tol).unwrap();
        let chain = subspace_chain(&m, &w);
        let tau = build_tau(&m, &w, &spec, &chain, &s, &tol, 0).unwrap();
        assert_eq!(tau.eta.len(), 0);
        assert_eq!(tau.eta_levels, None);
        let g = identity(w.len());
        let all: Vec<usize> = (0..w.len()).collect();
        let cert = assemble_dilation(&g, &k, &m, &tau, &spec, &w, &all).unwrap();
        assert_eq!(cert.dilated_gram, 0.0);
        let inv = invariance_sample(&tau, &spec, &[spec.u()], &[(w.point(0).clone(), w.point(1).clone())])
            .unwrap();
        assert_eq!(inv.residual, 0.0);
    }

    #[test]
    fn identity_kernel_window_relations() {
        // K = I on a window: every v orthonormal, so D and T permute them
        let spec = bs();
        let w = spec.enumerate_window(-1, 1, 2).unwrap();
        let tol = Tolerances::default();
        let k = identity(w.len());
        let m = kolmogorov_factorize(&k, tol.psd, tol.rank).unwrap();
        let s = build_shift(&m, &w, &tol).unwrap();
        let chain = subspace_chain(&m, &w);
        let tau = build_tau(&m, &w, &spec, &chain, &s, &tol, 0).unwrap();
        assert!(unitarity_defect(&tau.d) < 1e-10);
        assert!(tau.max_t_unitarity_defect() < 1e-10);
        for r in tau.relation_residuals(&spec).unwrap() {
            assert!(r < 1e-8, "relation residual {r}");
        }
    }
}
