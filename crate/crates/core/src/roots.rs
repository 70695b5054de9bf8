//! `α`-roots of finite-dimensional unitary representations.
//!
//! A representation `T` of `Γ₀` is an `α`-root of `ρ` when `T∘α = ρ`. Roots
//! are built spectrally: principal `a`-th roots of unitaries, simultaneous
//! diagonalization of commuting families, and commutator constructions for
//! the Heisenberg and free two-step nilpotent families.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::linalg::Schur;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::group::MonomorphismSpec;
use crate::linalg::{
    commutator_norm, hermitian_eigen, identity, norm1, unitarity_defect,
    unitary_power, CMatrix, CVector, C64, ONE, ZERO,
};

/// Input unitaries must satisfy `‖U*U − I‖₁ ≤ UNITARY_TOL`.
pub const UNITARY_TOL: f64 = 1e-8;
/// Eigenvalues closer than this on the unit circle share a branch.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Default bound on commutators and relation residuals of inputs.
pub const RELATION_TOL: f64 = 1e-8;

/// Generators of a representation with named residuals.
#[derive(Clone, Debug)]
pub struct RepresentationTable {
    pub names: Vec<String>,
    pub matrices: Vec<CMatrix>,
    pub residuals: BTreeMap<String, f64>,
}

fn check_unitary(u: &CMatrix) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(Error::InvalidArgument(format!(
            "expected a square matrix, got {}×{}",
            u.nrows(),
            u.ncols()
        )));
    }
    let defect = unitarity_defect(u);
    if !(defect <= UNITARY_TOL) {
        return Err(Error::NonUnitary { defect });
    }
    Ok(())
}

/// Arguments in `(−π, π]` for unit-modulus eigenvalues, consistent on
/// clusters: members of a cluster are measured from the cluster's mean
/// direction, so a cluster straddling `−1` is never split across the cut.
pub fn branch_angles(eigs: &[C64]) -> Vec<f64> {
    let n = eigs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigs[a].arg().total_cmp(&eigs[b].arg()).then(a.cmp(&b)));
    // single-linkage clusters along the circle
    let mut cluster = vec![0usize; n];
    let mut id = 0;
    for w in 1..n {
        if (eigs[order[w]] - eigs[order[w - 1]]).norm() > CLUSTER_TOL {
            id += 1;
        }
        cluster[order[w]] = id;
    }
    if n > 1 && id > 0 && (eigs[order[0]] - eigs[order[n - 1]]).norm() <= CLUSTER_TOL {
        // wrap-around: merge the last cluster into the first
        let last = cluster[order[n - 1]];
        for c in cluster.iter_mut() {
            if *c == last {
                *c = 0;
            }
        }
    }
    let groups = id + 1;
    let mut mean = vec![ZERO; groups];
    for i in 0..n {
        mean[cluster[i]] += eigs[i];
    }
    let rep: Vec<f64> = mean
        .iter()
        .map(|m| {
            let t = if m.norm() > 0.0 { m.arg() } else { 0.0 };
            if t <= -PI + CLUSTER_TOL {
                PI
            } else {
                t
            }
        })
        .collect();
    (0..n)
        .map(|i| {
            let base = rep[cluster[i]];
            base + (eigs[i] * C64::from_polar(1.0, -base)).arg()
        })
        .collect()
}

const SCHUR_MAX_ITER: usize = 60;

/// Principal `a`-th root `S` of a unitary `U` (`Sᵃ = U`).
///
/// Eigenvalues `e^{iθ}` with `θ ∈ (−π, π]` map to `e^{i(θ + 2π oₖ)/a}`,
/// where the optional `offsets` apply to eigenvalues in increasing order of
/// `θ` (all zero by default).
pub fn principal_root(u: &CMatrix, a: u64, offsets: Option<&[i64]>) -> Result<CMatrix> {
    check_unitary(u)?;
    if a == 0 {
        return Err(Error::InvalidArgument("root order must be >= 1".into()));
    }
    let n = u.nrows();
    if let Some(o) = offsets {
        if o.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} branch offsets given for dimension {n}",
                o.len()
            )));
        }
    }
    if n == 0 || (a == 1 && offsets.is_none()) {
        return Ok(u.clone());
    }
    // shifted QR stalls on exact cyclic permutations; fall back to the
    // Hermitian-parts eigensolver there
    let (q, eigs) = match Schur::try_new(u.clone(), f64::EPSILON, SCHUR_MAX_ITER * n) {
        Some(schur) => {
            let (q, t) = schur.unpack();
            let eigs: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
            (q, eigs)
        }
        None => {
            let jd = joint_diagonalize(std::slice::from_ref(u), 0)?;
            let eigs = jd.eigenvalues.into_iter().next().unwrap_or_default();
            (jd.basis, eigs)
        }
    };
    let theta = branch_angles(&eigs);
    let mut shift = vec![0i64; n];
    if let Some(o) = offsets {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| theta[x].total_cmp(&theta[y]).then(x.cmp(&y)));
        for (rank, &k) in order.iter().enumerate() {
            shift[k] = o[rank];
        }
    }
    let d = CVector::from_iterator(
        n,
        (0..n).map(|k| {
            let ang = (theta[k] + 2.0 * PI * shift[k] as f64) / a as f64;
            C64::from_polar(eigs[k].norm().powf(1.0 / a as f64), ang)
        }),
    );
    Ok(&q * CMatrix::from_diagonal(&d) * q.adjoint())
}

/// Common eigenbasis of pairwise commuting unitaries.
#[derive(Clone, Debug)]
pub struct JointDiagonalization {
    pub basis: CMatrix,
    /// `eigenvalues[i][k] = (Q* Uᵢ Q)[k, k]`.
    pub eigenvalues: Vec<Vec<C64>>,
    /// Largest off-diagonal entry of any `Q* Uᵢ Q`.
    pub residual: f64,
    pub seed: u64,
}

fn max_offdiag(m: &CMatrix) -> f64 {
    let mut w = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                w = w.max(m[(i, j)].norm());
            }
        }
    }
    w
}

/// Simultaneous diagonalization of commuting unitaries.
///
/// Diagonalizes a random real combination of the Hermitian parts, then
/// re-diagonalizes every degenerate cluster with fresh coefficients until the
/// family is diagonal on it.
pub fn joint_diagonalize(us: &[CMatrix], seed: u64) -> Result<JointDiagonalization> {
    let Some(first) = us.first() else {
        return Err(Error::InvalidArgument("empty matrix family".into()));
    };
    let n = first.nrows();
    for u in us {
        check_unitary(u)?;
        if u.nrows() != n {
            return Err(Error::InvalidArgument("matrices differ in size".into()));
        }
    }
    let mut worst = 0.0f64;
    for i in 0..us.len() {
        for j in i + 1..us.len() {
            worst = worst.max(commutator_norm(&us[i], &us[j]));
        }
    }
    if worst > RELATION_TOL {
        return Err(Error::CommutationViolation {
            residual: worst,
            tolerance: RELATION_TOL,
        });
    }
    let half = C64::new(0.5, 0.0);
    let minus_half_i = C64::new(0.0, -0.5);
    let parts: Vec<CMatrix> = us
        .iter()
        .flat_map(|u| {
            let ua = u.adjoint();
            [(u + &ua) * half, (u - &ua) * minus_half_i]
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<CVector> = Vec::with_capacity(n);
    let mut stack: Vec<(CMatrix, u32)> = vec![(identity(n), 0)];
    while let Some((sub, depth)) = stack.pop() {
        let m = sub.ncols();
        if m == 1 {
            columns.push(sub.column(0).into_owned());
            continue;
        }
        let mut h = CMatrix::zeros(n, n);
        for p in &parts {
            h += p * C64::new(rng.random::<f64>() * 2.0 - 1.0, 0.0);
        }
        let restricted = sub.adjoint() * h * &sub;
        let eig = hermitian_eigen(&restricted)?;
        let rotated = &sub * &eig.vectors;
        let scale = eig.values.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        let mut start = 0;
        let mut clusters = Vec::new();
        for k in 1..=m {
            if k == m || eig.values[k - 1] - eig.values[k] > CLUSTER_TOL * scale {
                clusters.push(start..k);
                start = k;
            }
        }
        // push in reverse so clusters are emitted in eigenvalue order
        for range in clusters.into_iter().rev() {
            let block = rotated.columns(range.start, range.len()).into_owned();
            let settled = range.len() == 1
                || depth >= 8
                || us.iter().all(|u| {
                    let r = block.adjoint() * u * &block;
                    max_offdiag(&r) <= CLUSTER_TOL
                });
            if settled && range.len() > 1 {
                for c in block.column_iter().rev() {
                    stack.push((CMatrix::from_iterator(n, 1, c.iter().copied()), depth + 1));
                }
            } else {
                stack.push((block, depth + 1));
            }
        }
    }
    let mut basis = CMatrix::zeros(n, n);
    for (k, c) in columns.iter().enumerate() {
        basis.set_column(k, c);
    }
    let mut residual = 0.0f64;
    let eigenvalues = us
        .iter()
        .map(|u| {
            let d = basis.adjoint() * u * &basis;
            residual = residual.max(max_offdiag(&d));
            (0..n).map(|k| d[(k, k)]).collect()
        })
        .collect();
    Ok(JointDiagonalization {
        basis,
        eigenvalues,
        residual,
        seed,
    })
}

/// `α`-root of a representation of `ℤⁿ` for `α(v) = A·v`:
/// `T(t_j) = Q diag(exp(i Σᵢ θᵢ b_ij)) Q*` with `B = A⁻¹` and `θᵢ` the
/// eigenvalue arguments of `ρ(tᵢ)` in a common eigenbasis `Q`.
pub fn abelian_alpha_root(
    rho: &[CMatrix],
    spec: &MonomorphismSpec,
    seed: u64,
) -> Result<RepresentationTable> {
    let MonomorphismSpec::FreeAbelian {
        matrix, inverse, ..
    } = spec
    else {
        return Err(Error::FamilyMismatch {
            expected: "free-abelian",
        });
    };
    let n = matrix.len();
    if rho.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} generator matrices, got {}",
            rho.len()
        )));
    }
    let names = spec.generator_names();
    let d = rho[0].nrows();
    let mut residuals = BTreeMap::new();
    if d == 0 {
        residuals.insert("alpha_relation".into(), 0.0);
        return Ok(RepresentationTable {
            names,
            matrices: rho.to_vec(),
            residuals,
        });
    }
    let jd = joint_diagonalize(rho, seed)?;
    let theta: Vec<Vec<f64>> = jd.eigenvalues.iter().map(|e| branch_angles(e)).collect();
    let b: Vec<Vec<f64>> = inverse
        .iter()
        .map(|row| row.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
        .collect();
    let q = &jd.basis;
    let matrices: Vec<CMatrix> = (0..n)
        .map(|j| {
            let diag = CVector::from_iterator(
                d,
                (0..d).map(|k| {
                    let phase: f64 = (0..n).map(|i| theta[i][k] * b[i][j]).sum();
                    C64::from_polar(1.0, phase)
                }),
            );
            q * CMatrix::from_diagonal(&diag) * q.adjoint()
        })
        .collect();
    let mut worst = 0.0f64;
    for j in 0..n {
        let mut img = identity(d);
        for (k, row) in matrix.iter().enumerate() {
            let p = row[j].to_i64().ok_or_else(|| {
                Error::InvalidArgument("matrix entries must fit in i64".into())
            })?;
            img *= unitary_power(&matrices[k], p);
        }
        worst = worst.max(norm1(&(img - &rho[j])));
    }
    residuals.insert("alpha_relation".into(), worst);
    residuals.insert("joint_diagonalization".into(), jd.residual);
    Ok(RepresentationTable {
        names,
        matrices,
        residuals,
    })
}

/// Output of the commutator construction for the Heisenberg group.
#[derive(Clone, Debug)]
pub struct HeisenbergRoot {
    pub u: CMatrix,
    pub v: CMatrix,
    pub w: CMatrix,
    /// `‖W^{ab} − C‖₁`.
    pub r1: f64,
    /// `‖UW − WU‖₁`.
    pub r2: f64,
    /// `‖VW − WV‖₁`.
    pub r3: f64,
}

/// Residuals of the Heisenberg relations `AB = CBA`, `AC = CA`, `BC = CB`.
pub fn heisenberg_relation_residual(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> f64 {
    norm1(&(a * b - c * b * a))
        .max(commutator_norm(a, c))
        .max(commutator_norm(b, c))
}

/// `U = A^{1/a}`, `V = B^{1/b}`, `W = UVU⁻¹V⁻¹` with residuals.
///
/// `A, B, C` stand for the images of `t₃, t₂, t₁`. The residuals are reported
/// as computed; nothing is asserted about them.
pub fn heisenberg_alpha_root(
    a_mat: &CMatrix,
    b_mat: &CMatrix,
    c_mat: &CMatrix,
    a: u64,
    b: u64,
) -> Result<HeisenbergRoot> {
    for m in [a_mat, b_mat, c_mat] {
        check_unitary(m)?;
    }
    if b_mat.nrows() != a_mat.nrows() || c_mat.nrows() != a_mat.nrows() {
        return Err(Error::InvalidArgument("matrices differ in size".into()));
    }
    let rel = heisenberg_relation_residual(a_mat, b_mat, c_mat);
    if rel > RELATION_TOL {
        return Err(Error::RelationViolation {
            what: "heisenberg relations AB = CBA, AC = CA, BC = CB".into(),
            residual: rel,
            tolerance: RELATION_TOL,
        });
    }
    let u = principal_root(a_mat, a, None)?;
    let v = principal_root(b_mat, b, None)?;
    let w = &u * &v * u.adjoint() * v.adjoint();
    let r1 = norm1(&(unitary_power(&w, (a * b) as i64) - c_mat));
    let r2 = commutator_norm(&u, &w);
    let r3 = commutator_norm(&v, &w);
    Ok(HeisenbergRoot { u, v, w, r1, r2, r3 })
}

/// Root of a representation of the free two-step nilpotent group:
/// `T(t_k) = ρ(t_k)^{1/a_k}` and `T(z_ij) = T(t_i)T(t_j)T(t_i)⁻¹T(t_j)⁻¹`.
///
/// `t` holds `ρ(t₁..tₙ)`, `z` holds `ρ(z_ij)` for `i < j` in row order.
pub fn fn_alpha_root(t: &[CMatrix], z: &[CMatrix], exps: &[u64]) -> Result<RepresentationTable> {
    let n = exps.len();
    if t.len() != n || z.len() != n * n.saturating_sub(1) / 2 {
        return Err(Error::InvalidArgument(format!(
            "expected {n} t-matrices and {} z-matrices",
            n * n.saturating_sub(1) / 2
        )));
    }
    for m in t.iter().chain(z) {
        check_unitary(m)?;
    }
    let mut rel = 0.0f64;
    let mut idx = 0;
    for i in 0..n {
        for j in i + 1..n {
            rel = rel.max(norm1(&(&t[i] * &t[j] - &z[idx] * &t[j] * &t[i])));
            for m in t.iter().chain(z) {
                rel = rel.max(commutator_norm(&z[idx], m));
            }
            idx += 1;
        }
    }
    if rel > RELATION_TOL {
        return Err(Error::RelationViolation {
            what: "free nilpotent relations".into(),
            residual: rel,
            tolerance: RELATION_TOL,
        });
    }
    let us: Vec<CMatrix> = t
        .iter()
        .zip(exps)
        .map(|(m, &a)| principal_root(m, a, None))
        .collect::<Result<_>>()?;
    let mut ws = Vec::new();
    let mut power = 0.0f64;
    let mut central = 0.0f64;
    let mut idx = 0;
    for i in 0..n {
        for j in i + 1..n {
            let w = &us[i] * &us[j] * us[i].adjoint() * us[j].adjoint();
            let p = (exps[i] * exps[j]) as i64;
            power = power.max(norm1(&(unitary_power(&w, p) - &z[idx])));
            for u in &us {
                central = central.max(commutator_norm(&w, u));
            }
            ws.push(w);
            idx += 1;
        }
    }
    let names = (1..=n)
        .map(|k| format!("t{k}"))
        .chain((0..n).flat_map(|i| (i + 1..n).map(move |j| format!("z{}_{}", i + 1, j + 1))))
        .collect();
    let mut residuals = BTreeMap::new();
    residuals.insert("commutator_power".into(), power);
    residuals.insert("centrality".into(), central);
    Ok(RepresentationTable {
        names,
        matrices: us.into_iter().chain(ws).collect(),
        residuals,
    })
}

/// `e^{2πi x/N}` with exact values at quarter turns.
pub fn root_of_unity(x: i64, n: u64) -> C64 {
    let n = n as i64;
    let r = x.rem_euclid(n);
    if 4 * r % n == 0 {
        return match 4 * r / n {
            0 => ONE,
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
    }
    C64::from_polar(1.0, 2.0 * PI * r as f64 / n as f64)
}

/// Shift `T eₓ = e_{x+1}`, modulation `M = diag(ωˣ)` and `C = ω⁻¹I` on `ℂᴺ`
/// with `ω = e^{2πi/N}`, so that `TM = C·MT`.
pub fn finite_heisenberg_rep(n: usize) -> Result<(CMatrix, CMatrix, CMatrix)> {
    if n < 2 {
        return Err(Error::InvalidArgument("dimension must be >= 2".into()));
    }
    let mut t = CMatrix::zeros(n, n);
    for x in 0..n {
        t[((x + 1) % n, x)] = ONE;
    }
    let m = CMatrix::from_diagonal(&CVector::from_iterator(
        n,
        (0..n).map(|x| root_of_unity(x as i64, n as u64)),
    ));
    let c = identity(n) * root_of_unity(-1, n as u64);
    Ok((t, m, c))
}

/// `max |offdiag|` helper re-exported for diagnostics.
pub fn offdiagonal(m: &CMatrix) -> f64 {
    max_offdiag(m)
}

/// `‖Sᵃ − U‖₁`.
pub fn root_residual(s: &CMatrix, u: &CMatrix, a: u64) -> f64 {
    norm1(&(unitary_power(s, a as i64) - u))
}
