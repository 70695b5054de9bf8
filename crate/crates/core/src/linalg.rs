//! Dense complex linear algebra with fixed gauge conventions.
//!
//! Every decomposition here is deterministic: eigenvalues come out sorted
//! descending, each eigenvector's largest-magnitude entry is made real
//! positive, and matrices whose exact-zero pattern splits into independent
//! blocks are decomposed block by block.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use twofloat::TwoFloat;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `‖U*U − I‖₁`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    if u.is_empty() {
        return 0.0;
    }
    norm1(&(mul_sparse_right(&u.adjoint(), u) - identity(u.ncols())))
}

/// `max |M − M*|` entrywise.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `‖AB − BA‖₁`.
pub fn commutator_norm(a: &CMatrix, b: &CMatrix) -> f64 {
    norm1(&(a * b - b * a))
}

/// `A·B`, skipping exact zeros of `B`.
///
/// Bitwise equal to a column-axpy product; much faster when `B` is block
/// structured.
pub fn mul_sparse_right(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "dimension mismatch");
    let mut c = CMatrix::zeros(a.nrows(), b.ncols());
    for j in 0..b.ncols() {
        for k in 0..b.nrows() {
            let s = b[(k, j)];
            if s != ZERO {
                c.column_mut(j).axpy(s, &a.column(k), ONE);
            }
        }
    }
    c
}

/// `A·B`, skipping exact zeros of `A`.
pub fn mul_sparse_left(a: &CMatrix, b: &CMatrix) -> CMatrix {
    mul_sparse_right(&b.adjoint(), &a.adjoint()).adjoint()
}

/// `Uᵖ` for a unitary `U` (negative powers use `U*`).
pub fn unitary_power(u: &CMatrix, p: i64) -> CMatrix {
    let mut base = if p < 0 { u.adjoint() } else { u.clone() };
    let mut e = p.unsigned_abs();
    let mut acc = identity(u.nrows());
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    acc
}

/// Connected components of the symmetric nonzero pattern of a square matrix,
/// each sorted, listed by smallest index.
pub fn components(m: &CMatrix) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)] != ZERO {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    group_by_root(n, |x| find(&mut parent, x))
}

fn group_by_root(n: usize, mut root: impl FnMut(usize) -> usize) -> Vec<Vec<usize>> {
    let mut slot = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = root(i);
        if slot[r] == usize::MAX {
            slot[r] = out.len();
            out.push(Vec::new());
        }
        out[slot[r]].push(i);
    }
    out
}

fn submatrix(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Makes the largest-magnitude entry of each column real positive (first
/// index wins ties).
pub fn gauge_columns(q: &mut CMatrix) {
    for mut col in q.column_iter_mut() {
        let mut best = 0usize;
        let mut best_norm = -1.0f64;
        for (i, z) in col.iter().enumerate() {
            let n = z.norm();
            if n > best_norm {
                best = i;
                best_norm = n;
            }
        }
        if best_norm > 0.0 {
            let phase = col[best].conj() / best_norm;
            col.iter_mut().for_each(|z| *z *= phase);
            col[best] = C64::new(col[best].re, 0.0);
        }
    }
}

#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, gauge fixed.
    pub vectors: CMatrix,
}

/// Eigendecomposition of a Hermitian matrix, block by block over the
/// exact-zero components.
pub fn hermitian_eigen(m: &CMatrix) -> Result<HermitianEigen> {
    eigen_blocks(m, false)
}

/// [`hermitian_eigen`] with every block's eigenpairs polished in
/// double-double arithmetic, treating the f64 entries of `m` as exact.
///
/// Eigenvectors of eigenvalues near `ε‖m‖` come out accurate, so a
/// factorization built from them inherits any exact structure of `m`
/// (such as bitwise Toeplitz blocks) to working precision.
pub fn hermitian_eigen_refined(m: &CMatrix) -> Result<HermitianEigen> {
    eigen_blocks(m, true)
}

fn eigen_blocks(m: &CMatrix, refine: bool) -> Result<HermitianEigen> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }
    let mut pairs: Vec<(f64, usize, CVector)> = Vec::with_capacity(n);
    for comp in components(m) {
        let block = submatrix(m, &comp, &comp);
        let block = (&block + block.adjoint()) * C64::new(0.5, 0.0);
        let eig = block.clone().symmetric_eigen();
        let (values, vectors) = if refine {
            refine_eigenpairs(&block, &eig.eigenvectors)
        } else {
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
        };
        for (k, &lambda) in values.iter().enumerate() {
            let mut v = CVector::zeros(n);
            for (i, &row) in comp.iter().enumerate() {
                v[row] = vectors[(i, k)];
            }
            pairs.push((lambda, pairs.len(), v));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let values = pairs.iter().map(|p| p.0).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, p) in pairs.iter().enumerate() {
        vectors.set_column(k, &p.2);
    }
    gauge_columns(&mut vectors);
    Ok(HermitianEigen { values, vectors })
}

type Dd = TwoFloat;
type CDd = Complex<TwoFloat>;

fn dd(x: f64) -> Dd {
    Dd::from(x)
}

/// `a / b` to double-double accuracy; the crate's own quotient is only
/// f64-accurate.
fn dd_div(a: Dd, b: Dd) -> Dd {
    let mut q = dd(a.hi() / b.hi());
    for _ in 0..2 {
        let r = a - b * q;
        q += dd(r.hi() / b.hi());
    }
    q
}

/// Scalars the double-double polish runs over: real for real blocks,
/// complex otherwise.
trait Polish: Copy + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> + std::ops::Mul<Output = Self> {
    fn lift(z: C64) -> Self;
    fn lower(self) -> C64;
    fn from_dd(x: Dd) -> Self;
    fn conj(self) -> Self;
    fn scale(self, x: Dd) -> Self;
    fn abs2(self) -> Dd;
    fn re(self) -> Dd;
    /// `z / |z|` given `|z|`.
    fn phase(self, mag: Dd) -> Self;
}

impl Polish for Dd {
    fn lift(z: C64) -> Self {
        dd(z.re)
    }
    fn lower(self) -> C64 {
        C64::new(f64::from(self), 0.0)
    }
    fn from_dd(x: Dd) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn scale(self, x: Dd) -> Self {
        self * x
    }
    fn abs2(self) -> Dd {
        self * self
    }
    fn re(self) -> Dd {
        self
    }
    fn phase(self, mag: Dd) -> Self {
        dd_div(self, mag)
    }
}

impl Polish for CDd {
    fn lift(z: C64) -> Self {
        CDd::new(dd(z.re), dd(z.im))
    }
    fn lower(self) -> C64 {
        C64::new(f64::from(self.re), f64::from(self.im))
    }
    fn from_dd(x: Dd) -> Self {
        CDd::new(x, dd(0.0))
    }
    fn conj(self) -> Self {
        Complex::conj(&self)
    }
    fn scale(self, x: Dd) -> Self {
        CDd::new(self.re * x, self.im * x)
    }
    fn abs2(self) -> Dd {
        self.re * self.re + self.im * self.im
    }
    fn re(self) -> Dd {
        self.re
    }
    fn phase(self, mag: Dd) -> Self {
        CDd::new(dd_div(self.re, mag), dd_div(self.im, mag))
    }
}

/// Sweep cap of the double-double Jacobi polish.
const POLISH_SWEEPS: usize = 10;

/// Polishes approximate eigenvectors `q` of the Hermitian `b`.
///
/// `q` is re-orthonormalized by a Newton–Schulz step, then cyclic Jacobi
/// rotations diagonalize `q* b q`; all in double-double.
fn refine_eigenpairs(b: &CMatrix, q: &CMatrix) -> (Vec<f64>, CMatrix) {
    if b.iter().chain(q.iter()).all(|z| z.im == 0.0) {
        polish::<Dd>(b, q)
    } else {
        polish::<CDd>(b, q)
    }
}

fn polish<T: Polish>(b: &CMatrix, q: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = b.nrows();
    let lift = |m: &CMatrix| -> Vec<T> { m.iter().map(|&z| T::lift(z)).collect() };
    // column-major n×n buffers
    let bd = lift(b);
    let q = lift(q);
    let at = |m: &[T], i: usize, j: usize| m[i + j * n];
    let zero = T::from_dd(dd(0.0));
    let mul = |l: &[T], r: &[T], adj: bool| -> Vec<T> {
        let mut out = vec![zero; n * n];
        for j in 0..n {
            for i in 0..n {
                let mut acc = zero;
                for k in 0..n {
                    let lik = if adj { at(l, k, i).conj() } else { at(l, i, k) };
                    acc = acc + lik * at(r, k, j);
                }
                out[i + j * n] = acc;
            }
        }
        out
    };
    // X ← X (3I − X*X) / 2
    let g = mul(&q, &q, true);
    let corr: Vec<T> = (0..n * n)
        .map(|idx| {
            let d = if idx % n == idx / n { dd(3.0) } else { dd(0.0) };
            (T::from_dd(d) - g[idx]).scale(dd(0.5))
        })
        .collect();
    let mut x = mul(&q, &corr, false);
    let mut a = mul(&x, &mul(&bd, &x, false), true);
    let scale = (0..n).fold(dd(0.0), |s, i| s.max(a[i + i * n].re().abs())).max(dd(f64::MIN_POSITIVE));
    let tiny = scale * dd(1e-28);
    for _ in 0..POLISH_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for r in p + 1..n {
                let beta = a[p + r * n];
                let mag = beta.abs2().sqrt();
                if mag <= tiny {
                    continue;
                }
                rotated = true;
                // W = [[c, s], [−s·ē, c·ē]] with e = β/|β| zeroes a[p][r]
                let e = beta.phase(mag);
                let tau = dd_div(a[r + r * n].re() - a[p + p * n].re(), dd(2.0) * mag);
                let t = if tau == dd(0.0) {
                    dd(1.0)
                } else {
                    let sgn = if tau > dd(0.0) { dd(1.0) } else { dd(-1.0) };
                    dd_div(sgn, tau.abs() + (dd(1.0) + tau * tau).sqrt())
                };
                let c = dd_div(dd(1.0), (dd(1.0) + t * t).sqrt());
                let s = t * c;
                let ce = e.conj();
                for i in 0..n {
                    let (ap, ar) = (a[i + p * n], a[i + r * n] * ce);
                    a[i + p * n] = ap.scale(c) - ar.scale(s);
                    a[i + r * n] = ap.scale(s) + ar.scale(c);
                }
                for j in 0..n {
                    let (ap, ar) = (a[p + j * n], a[r + j * n] * e);
                    a[p + j * n] = ap.scale(c) - ar.scale(s);
                    a[r + j * n] = ap.scale(s) + ar.scale(c);
                }
                a[p + r * n] = zero;
                a[r + p * n] = zero;
                for k in [p, r] {
                    a[k + k * n] = T::from_dd(a[k + k * n].re());
                }
                for i in 0..n {
                    let (xp, xr) = (x[i + p * n], x[i + r * n] * ce);
                    x[i + p * n] = xp.scale(c) - xr.scale(s);
                    x[i + r * n] = xp.scale(s) + xr.scale(c);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let values = (0..n).map(|k| f64::from(a[k + k * n].re())).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| x[i + j * n].lower());
    (values, vectors)
}

/// Thin SVD `M = U Σ W*` with singular values sorted descending; only
/// values above `rtol·σ_max` are kept.
pub struct ThinSvd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub w: CMatrix,
}

pub fn thin_svd(m: &CMatrix, rtol: f64) -> Result<ThinSvd> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(ThinSvd {
            u: CMatrix::zeros(r, 0),
            sigma: Vec::new(),
            w: CMatrix::zeros(c, 0),
        });
    }
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u = svd.u.expect("requested");
    let w = svd.v_t.expect("requested").adjoint();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let smax = order.first().map_or(0.0, |&i| svd.singular_values[i]);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > rtol * smax)
        .collect();
    let mut uk = CMatrix::zeros(r, keep.len());
    let mut wk = CMatrix::zeros(c, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        uk.set_column(k, &u.column(i));
        wk.set_column(k, &w.column(i));
    }
    Ok(ThinSvd {
        u: uk,
        sigma: keep.iter().map(|&i| svd.singular_values[i]).collect(),
        w: wk,
    })
}

/// Isometric polar factor `U W*` of `A = U Σ W*` (`A` tall or square).
pub fn polar(a: &CMatrix) -> Result<CMatrix> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return Ok(CMatrix::zeros(r, c));
    }
    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    Ok(svd.u.expect("requested") * svd.v_t.expect("requested"))
}

/// Rows of `m` holding at least one nonzero entry.
fn touched_rows(m: &CMatrix) -> Vec<bool> {
    let mut t = vec![false; m.nrows()];
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != ZERO {
                t[i] = true;
            }
        }
    }
    t
}

/// Column-pivoted modified Gram-Schmidt with re-orthogonalization.
///
/// Orthonormalizes the columns of `cand` against `against` (orthonormal
/// columns) and against each other, always taking the candidate with the
/// largest residual norm (ties by index). Stops after `limit` vectors or when
/// the largest residual drops to `tol`. Returns the new vectors and the
/// candidate index each came from.
pub fn pivoted_orthonormalize(
    cand: &CMatrix,
    against: Option<&CMatrix>,
    tol: f64,
    limit: usize,
) -> (CMatrix, Vec<usize>) {
    let n = cand.nrows();
    let mut res = cand.clone();
    if let Some(q) = against.filter(|q| q.ncols() > 0) {
        for _ in 0..2 {
            let coef = mul_sparse_left(&q.adjoint(), &res);
            res -= mul_sparse_right(q, &coef);
        }
    }
    let mut used = vec![false; res.ncols()];
    let mut basis: Vec<CVector> = Vec::new();
    let mut pivots = Vec::new();
    while basis.len() < limit {
        let mut best = None;
        let mut best_norm = tol;
        for (j, col) in res.column_iter().enumerate() {
            if used[j] {
                continue;
            }
            let nrm = col.norm();
            if nrm > best_norm {
                best = Some(j);
                best_norm = nrm;
            }
        }
        let Some(p) = best else { break };
        used[p] = true;
        let mut q: CVector = res.column(p) / C64::new(best_norm, 0.0);
        // second pass against everything accepted so far
        if let Some(prev) = against.filter(|q| q.ncols() > 0) {
            let c = prev.adjoint() * &q;
            q -= prev * c;
        }
        for b in &basis {
            let c = b.dotc(&q);
            q.axpy(-c, b, ONE);
        }
        let nq = q.norm();
        if nq <= tol {
            continue;
        }
        q /= C64::new(nq, 0.0);
        for j in 0..res.ncols() {
            if !used[j] {
                let c = q.dotc(&res.column(j));
                if c != ZERO {
                    res.column_mut(j).axpy(-c, &q, ONE);
                }
            }
        }
        basis.push(q);
        pivots.push(p);
    }
    let mut out = CMatrix::zeros(n, basis.len());
    for (k, b) in basis.iter().enumerate() {
        out.set_column(k, b);
    }
    (out, pivots)
}

/// Canonical orthonormal complement of the orthonormal columns `q` in `ℂⁿ`.
///
/// Standard basis vectors untouched by `q` are taken as they are; the rest
/// of the complement comes from pivoted Gram-Schmidt on the projected
/// standard basis of the touched rows. Columns are ordered by the index of
/// the standard basis vector they were pivoted from.
pub fn orthonormal_complement(q: &CMatrix) -> CMatrix {
    let n = q.nrows();
    let k = q.ncols();
    let touched = touched_rows(q);
    let rows: Vec<usize> = (0..n).filter(|&i| touched[i]).collect();
    let mut cols: Vec<(usize, CVector)> = (0..n)
        .filter(|&i| !touched[i])
        .map(|i| {
            let mut e = CVector::zeros(n);
            e[i] = ONE;
            (i, e)
        })
        .collect();
    let need = rows.len().saturating_sub(k);
    if need > 0 {
        let qt = submatrix(q, &rows, &(0..k).collect::<Vec<_>>());
        let (extra, piv) = pivoted_orthonormalize(&identity(rows.len()), Some(&qt), 1e-8, need);
        for (c, &p) in piv.iter().enumerate() {
            let mut v = CVector::zeros(n);
            for (i, &row) in rows.iter().enumerate() {
                v[row] = extra[(i, c)];
            }
            cols.push((rows[p], v));
        }
    }
    cols.sort_by_key(|c| c.0);
    let mut out = CMatrix::zeros(n, cols.len());
    for (j, (_, v)) in cols.iter().enumerate() {
        out.set_column(j, v);
    }
    out
}

/// Result of fitting a unitary `Y` to `Y·src ≈ tgt`.
#[derive(Clone, Debug)]
pub struct IsometricFit {
    pub unitary: CMatrix,
    /// Dimension of the fitted source span.
    pub rank: usize,
    /// Largest column residual `‖Y src_c − tgt_c‖`.
    pub residual: f64,
}

/// Unitary `Y` on `ℂʳ` with `Y·src ≈ tgt` column by column.
///
/// On the column span of `src` (singular values above `rtol·σ_max`) `Y` is
/// the polar factor of `tgt·W·Σ⁻¹`; the orthogonal complement is mapped onto
/// the complement of the image by the canonical complements in order.
/// Columns are grouped into independent problems when they share no nonzero
/// row in either `src` or `tgt`.
pub fn isometric_fit(src: &CMatrix, tgt: &CMatrix, rtol: f64) -> Result<IsometricFit> {
    let r = src.nrows();
    if tgt.shape() != src.shape() {
        return Err(Error::InvalidArgument(
            "isometric fit needs matching source and target shapes".into(),
        ));
    }
    let p = src.ncols();
    // union-find over columns linked through shared rows
    let mut parent: Vec<usize> = (0..p).collect();
    fn find(par: &mut [usize], mut x: usize) -> usize {
        while par[x] != x {
            par[x] = par[par[x]];
            x = par[x];
        }
        x
    }
    for m in [src, tgt] {
        let mut owner = vec![usize::MAX; r];
        for j in 0..p {
            for i in 0..r {
                if m[(i, j)] != ZERO {
                    if owner[i] == usize::MAX {
                        owner[i] = j;
                    } else {
                        let (a, b) = (find(&mut parent, owner[i]), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    let groups = group_by_root(p, |x| find(&mut parent, x));
    let smax = (0..p).map(|j| src.column(j).norm()).fold(0.0, f64::max);
    let mut src_basis: Vec<CVector> = Vec::new();
    let mut tgt_basis: Vec<CVector> = Vec::new();
    for cols in groups {
        let rows_of = |m: &CMatrix| -> Vec<usize> {
            (0..r)
                .filter(|&i| cols.iter().any(|&j| m[(i, j)] != ZERO))
                .collect()
        };
        let (rs, rt) = (rows_of(src), rows_of(tgt));
        if rs.is_empty() {
            continue;
        }
        let s = submatrix(src, &rs, &cols);
        let t = submatrix(tgt, &rt, &cols);
        let svd = thin_svd(&s, rtol)?;
        let keep = svd
            .sigma
            .iter()
            .take_while(|&&x| x > rtol * smax)
            .count();
        if keep == 0 {
            continue;
        }
        let w = svd.w.columns(0, keep);
        let inv_sigma = CMatrix::from_diagonal(&CVector::from_iterator(
            keep,
            svd.sigma[..keep].iter().map(|&x| C64::new(1.0 / x, 0.0)),
        ));
        let a = &t * w * inv_sigma;
        let y = polar(&a)?;
        for k in 0..keep {
            let mut vs = CVector::zeros(r);
            for (i, &row) in rs.iter().enumerate() {
                vs[row] = svd.u[(i, k)];
            }
            let mut vt = CVector::zeros(r);
            for (i, &row) in rt.iter().enumerate() {
                vt[row] = y[(i, k)];
            }
            src_basis.push(vs);
            tgt_basis.push(vt);
        }
    }
    let rank = src_basis.len();
    if rank > r {
        return Err(Error::Numerical("fitted span exceeds dimension".into()));
    }
    let mut us = CMatrix::zeros(r, rank);
    let mut ut = CMatrix::zeros(r, rank);
    for k in 0..rank {
        us.set_column(k, &src_basis[k]);
        ut.set_column(k, &tgt_basis[k]);
    }
    let cs = orthonormal_complement(&us);
    let ct = orthonormal_complement(&ut);
    if cs.ncols() != r - rank || ct.ncols() != r - rank {
        return Err(Error::Numerical(format!(
            "complement dimensions {} / {} do not match {}",
            cs.ncols(),
            ct.ncols(),
            r - rank
        )));
    }
    let unitary =
        mul_sparse_right(&ut, &us.adjoint()) + mul_sparse_right(&ct, &cs.adjoint());
    let fitted = mul_sparse_left(&unitary, src);
    let residual = (0..p)
        .map(|j| (fitted.column(j) - tgt.column(j)).norm())
        .fold(0.0, f64::max);
    Ok(IsometricFit {
        unitary,
        rank,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        random_matrix(rng, n, n).qr().q()
    }

    #[test]
    fn norms() {
        let m = CMatrix::from_row_slice(2, 2, &[ONE, -ONE, C64::new(0.0, 2.0), ZERO]);
        assert_eq!(norm1(&m), 3.0);
        assert_eq!(max_abs(&m), 2.0);
        assert_eq!(norm1(&CMatrix::zeros(0, 0)), 0.0);
        assert_eq!(unitarity_defect(&identity(4)), 0.0);
    }

    #[test]
    fn eigen_sorted_and_gauged() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 12, 12);
        let h = &a + a.adjoint();
        let e = hermitian_eigen(&h).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            12,
            e.values.iter().map(|&x| C64::new(x, 0.0)),
        ));
        let recon = &e.vectors * d * e.vectors.adjoint();
        assert!(max_abs(&(recon - &h)) < 1e-12);
        assert!(unitarity_defect(&e.vectors) < 1e-12);
        for col in e.vectors.column_iter() {
            let (i, _) = col
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
            assert_eq!(col[i].im, 0.0);
            assert!(col[i].re > 0.0);
        }
    }

    #[test]
    fn eigen_blockwise_keeps_blocks_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 3, 3);
        let b = random_matrix(&mut rng, 2, 2);
        let mut h = CMatrix::zeros(5, 5);
        // interleave: block a on {0,2,4}, block b on {1,3}
        let ia = [0, 2, 4];
        let ib = [1, 3];
        let ha = &a + a.adjoint();
        let hb = &b + b.adjoint();
        for i in 0..3 {
            for j in 0..3 {
                h[(ia[i], ia[j])] = ha[(i, j)];
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                h[(ib[i], ib[j])] = hb[(i, j)];
            }
        }
        assert_eq!(components(&h), vec![vec![0, 2, 4], vec![1, 3]]);
        let e = hermitian_eigen(&h).unwrap();
        for col in e.vectors.column_iter() {
            let on_a = ia.iter().any(|&i| col[i] != ZERO);
            let on_b = ib.iter().any(|&i| col[i] != ZERO);
            assert!(on_a != on_b);
        }
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_unitary(&mut rng, 6).columns(0, 2).into_owned();
        let mut big = CMatrix::zeros(9, 2);
        big.view_mut((0, 0), (6, 2)).copy_from(&q);
        let c = orthonormal_complement(&big);
        assert_eq!(c.ncols(), 7);
        assert!(unitarity_defect(&c) < 1e-12);
        assert!(max_abs(&(big.adjoint() * &c)) < 1e-12);
        // untouched rows come back as standard basis vectors
        assert_eq!(c[(6, 4)], ONE);
    }

    #[test]
    fn isometric_fit_recovers_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(&mut rng, 8);
        let src = random_matrix(&mut rng, 8, 5);
        let tgt = &u * &src;
        let fit = isometric_fit(&src, &tgt, 1e-10).unwrap();
        assert_eq!(fit.rank, 5);
        assert!(fit.residual < 1e-12);
        assert!(unitarity_defect(&fit.unitary) < 1e-12);
    }

    #[test]
    fn isometric_fit_two_point_swap() {
        // v(0) = e0 mapped to v(1) = e1; the completion sends e1 to e0
        let src = CMatrix::from_column_slice(2, 1, &[ONE, ZERO]);
        let tgt = CMatrix::from_column_slice(2, 1, &[ZERO, ONE]);
        let fit = isometric_fit(&src, &tgt, 1e-10).unwrap();
        let expect = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        assert!(max_abs(&(fit.unitary - expect)) < 1e-15);
    }

    #[test]
    fn sparse_products_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 4, 5);
        let mut b = random_matrix(&mut rng, 5, 3);
        b[(1, 1)] = ZERO;
        assert!(max_abs(&(mul_sparse_right(&a, &b) - &a * &b)) < 1e-15);
        assert!(max_abs(&(mul_sparse_left(&a, &b) - &a * &b)) < 1e-15);
    }

    #[test]
    fn unitary_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_unitary(&mut rng, 5);
        assert!(max_abs(&(unitary_power(&u, 3) - &u * &u * &u)) < 1e-13);
        assert!(max_abs(&(unitary_power(&u, -1) * &u - identity(5))) < 1e-13);
        assert_eq!(unitary_power(&u, 0), identity(5));
    }

    #[test]
    fn refined_complex_eigenpairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 12;
        let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let h = &a + a.adjoint();
        let plain = hermitian_eigen(&h).unwrap();
        let eig = hermitian_eigen_refined(&h).unwrap();
        assert!(unitarity_defect(&eig.vectors) <= 1e-15);
        for (k, (x, y)) in eig.values.iter().zip(&plain.values).enumerate() {
            assert!((x - y).abs() <= 1e-13);
            let v = eig.vectors.column(k);
            let r = &h * v - v * C64::new(*x, 0.0);
            assert!(r.iter().all(|z| z.norm() <= 1e-14), "eigenpair {k}");
        }
    }

    #[test]
    fn pivoting_prefers_largest_residual() {
        let cand = CMatrix::from_column_slice(2, 2, &[ONE, ZERO, C64::new(3.0, 0.0), ONE]);
        let (q, piv) = pivoted_orthonormalize(&cand, None, 1e-12, 2);
        assert_eq!(piv, vec![1, 0]);
        assert!(unitarity_defect(&q) < 1e-15);
    }
}
