use std::collections::HashMap;

use dilatekit::linalg::{hermitian_eigen, hermitian_eigen_refined, identity, max_abs, CMatrix, C64};

const ORACLE: &str = include_str!("oracles/toeplitz_eigen.txt");

fn oracle() -> (CMatrix, Vec<f64>) {
    let mut g = HashMap::new();
    let mut ev = Vec::new();
    for l in ORACLE.lines().filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = l.split_whitespace().collect();
        match f[0] {
            "g" => {
                g.insert(f[1].parse::<i64>().unwrap(), f[2].parse::<f64>().unwrap());
            }
            _ => ev.push(f[1].parse::<f64>().unwrap()),
        }
    }
    let n = ev.len();
    let k = CMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        C64::new(d - g[&(j as i64 - i as i64)], 0.0)
    });
    (k, ev)
}

#[test]
fn refined_eigenvalues_match_extended_precision_oracle() {
    let (k, want) = oracle();
    let eig = hermitian_eigen_refined(&k).unwrap();
    let mut got = eig.values.clone();
    got.reverse();
    let dev = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dev <= 1e-20, "refined eigenvalue deviation {dev:e}");
    let plain = hermitian_eigen(&k).unwrap();
    let mut p = plain.values.clone();
    p.reverse();
    let plain_dev = p.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(plain_dev > dev);
    let q = &eig.vectors;
    assert!(max_abs(&(q.adjoint() * q - identity(k.nrows()))) <= 1e-15);
}

#[test]
fn refined_factor_is_shift_covariant() {
    // the truncated factor of a Toeplitz kernel maps v(i) to v(i+1) by an
    // isometry; refinement makes that hold far below sqrt(eps)
    let (k, _) = oracle();
    let n = k.nrows();
    let resid = |refined: bool| {
        let eig = if refined { hermitian_eigen_refined(&k) } else { hermitian_eigen(&k) }.unwrap();
        let r = eig.values.iter().filter(|&&l| l > 1e-14).count();
        let v = CMatrix::from_fn(r, n, |a, x| eig.vectors[(x, a)] * eig.values[a].sqrt());
        let src = v.columns(0, n - 1).into_owned();
        let tgt = v.columns(1, n - 1).into_owned();
        let fit = dilatekit::linalg::isometric_fit(&src, &tgt, 1e-8).unwrap();
        max_abs(&(&fit.unitary * &src - &tgt))
    };
    let (plain, refined) = (resid(false), resid(true));
    eprintln!("shift fit residual: plain {plain:e}, refined {refined:e}");
    assert!(refined < 1e-8 && refined < plain);
}
