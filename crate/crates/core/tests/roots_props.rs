use dilatekit::group::MonomorphismSpec;
use dilatekit::linalg::{identity, norm1, unitarity_defect, CMatrix, CVector, C64};
use dilatekit::roots::{
    abelian_alpha_root, finite_heisenberg_rep, heisenberg_alpha_root, principal_root, root_residual,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FROZEN: &str = include_str!("oracles/heisenberg_residuals.txt");

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .qr()
        .q()
}

fn diag_phases(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        n,
        (0..n).map(|_| C64::from_polar(1.0, rng.random_range(-3.2..3.2))),
    ))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn principal_root_round_trip(seed in any::<u64>(), d in 1usize..=64, a in 2u64..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(&mut rng, d);
        let s = principal_root(&u, a, None).unwrap();
        prop_assert!(root_residual(&s, &u, a) <= 1e-10);
        prop_assert!(unitarity_defect(&s) <= 1e-10);
    }

    #[test]
    fn principal_root_of_degenerate_spectrum(seed in any::<u64>(), d in 2usize..=24, a in 2u64..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_unitary(&mut rng, d);
        let phases: Vec<C64> = (0..3).map(|_| C64::from_polar(1.0, rng.random_range(-3.0..3.0))).collect();
        let diag = CVector::from_iterator(d, (0..d).map(|k| phases[k % 3]));
        let u = &q * CMatrix::from_diagonal(&diag) * q.adjoint();
        let s = principal_root(&u, a, None).unwrap();
        prop_assert!(root_residual(&s, &u, a) <= 1e-10);
        // the root is a function of u, so it commutes with it
        prop_assert!(norm1(&(&s * &u - &u * &s)) <= 1e-10);
    }

    #[test]
    fn abelian_root_of_commuting_pairs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = MonomorphismSpec::free_abelian(vec![vec![2, 1], vec![0, 2]]).unwrap();
        let q = random_unitary(&mut rng, 16);
        let rho: Vec<CMatrix> = (0..2).map(|_| &q * diag_phases(&mut rng, 16) * q.adjoint()).collect();
        let table = abelian_alpha_root(&rho, &spec, seed).unwrap();
        prop_assert!(table.residuals["alpha_relation"] <= 1e-8);
        for m in &table.matrices {
            prop_assert!(unitarity_defect(m) <= 1e-10);
        }
    }
}

#[test]
fn cyclic_shifts_have_roots() {
    for n in [2usize, 3, 8, 16, 32] {
        let (t, m, _) = finite_heisenberg_rep(n).unwrap();
        for a in [2u64, 3] {
            for u in [&t, &m] {
                let s = principal_root(u, a, None).unwrap();
                assert!(root_residual(&s, u, a) <= 1e-10, "n={n} a={a}");
            }
        }
    }
}

#[test]
fn trivial_heisenberg_exponents_are_exact() {
    for n in [2usize, 5, 8, 16] {
        let (a, b, c) = finite_heisenberg_rep(n).unwrap();
        let r = heisenberg_alpha_root(&a, &b, &c, 1, 1).unwrap();
        assert!(r.r1 <= 1e-12 && r.r2 <= 1e-12 && r.r3 <= 1e-12, "n={n}: {} {} {}", r.r1, r.r2, r.r3);
    }
}

#[test]
fn heisenberg_residuals_match_closed_form_oracle() {
    let mut rows = 0;
    for line in FROZEN.lines().filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let n: usize = f[0].parse().unwrap();
        let (a, b): (u64, u64) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        let want: Vec<f64> = f[3..6].iter().map(|x| x.parse().unwrap()).collect();
        let (am, bm, cm) = finite_heisenberg_rep(n).unwrap();
        let r = heisenberg_alpha_root(&am, &bm, &cm, a, b).unwrap();
        for (got, want) in [r.r1, r.r2, r.r3].into_iter().zip(want) {
            assert!((got - want).abs() <= 1e-10, "n={n}: {got} vs {want}");
        }
        rows += 1;
    }
    assert_eq!(rows, 3);
}

#[test]
fn abelian_root_of_identity_family_is_identity() {
    let spec = MonomorphismSpec::free_abelian(vec![vec![2, 1], vec![0, 2]]).unwrap();
    let rho = vec![identity(4), identity(4)];
    let table = abelian_alpha_root(&rho, &spec, 1).unwrap();
    for m in &table.matrices {
        assert!(norm1(&(m - identity(4))) <= 1e-12);
    }
}
