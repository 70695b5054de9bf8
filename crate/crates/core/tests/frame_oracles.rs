use dilatekit::frame::{
    calderon_check, gram_matrix, msf_inner_product, parse_rational, translation_orthogonality_check,
    FrameSystemSpec, IntervalSet,
};
use dilatekit::group::{LatticePoint, MonomorphismSpec};
use dilatekit::linalg::{hermitian_defect, identity, max_abs};

const QUADRATURE: &str = include_str!("oracles/msf_gram_quadrature.txt");

fn symmetric(lo: &str, hi: &str) -> IntervalSet {
    IntervalSet::symmetric(parse_rational(lo).unwrap(), parse_rational(hi).unwrap()).unwrap()
}

fn point(spec: &MonomorphismSpec, j: i64, k: i64) -> LatticePoint {
    LatticePoint::new(j, spec.from_i64_exponents(&[k]).unwrap())
}

#[test]
fn analytic_gram_matches_quadrature() {
    let spec = MonomorphismSpec::baumslag_solitar_1_2();
    let e = symmetric("1/8", "1/4");
    let mut worst = 0.0f64;
    let mut rows = 0;
    for line in QUADRATURE.lines().filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let i = |n: usize| f[n].parse::<i64>().unwrap();
        let x = |n: usize| f[n].parse::<f64>().unwrap();
        let g = msf_inner_product(&e, &point(&spec, i(0), i(1)), &point(&spec, i(2), i(3))).unwrap();
        worst = worst.max((g.re - x(4)).abs()).max((g.im - x(5)).abs());
        rows += 1;
    }
    assert_eq!(rows, 45 * 45);
    assert!(worst <= 1e-8, "max deviation from quadrature {worst:e}");
}

#[test]
fn neighbour_entry_has_closed_form() {
    let spec = MonomorphismSpec::baumslag_solitar_1_2();
    let e = symmetric("1/8", "1/4");
    let g = msf_inner_product(&e, &point(&spec, 0, 0), &point(&spec, 0, 1)).unwrap();
    let exact = (1.0 - std::f64::consts::SQRT_2 / 2.0) / std::f64::consts::PI;
    assert!((g.re - exact).abs() <= 1e-12 && g.im.abs() <= 1e-12);
}

#[test]
fn parseval_gate_on_exact_supports() {
    let sub = symmetric("1/8", "1/4");
    assert_eq!(calderon_check(&sub, (-16, 16)).deviation, 0);
    assert_eq!(translation_orthogonality_check(&sub, 64), 0);
    let shannon = symmetric("1/2", "1");
    assert_eq!(calderon_check(&shannon, (-16, 16)).deviation, 0);
    let short = symmetric("1/8", "3/16");
    assert!(calderon_check(&short, (-16, 16)).deviation >= 1);
}

#[test]
fn shannon_gram_is_identity() {
    let spec = MonomorphismSpec::baumslag_solitar_1_2();
    let window = spec.enumerate_window(-2, 2, 16).unwrap();
    let frame = FrameSystemSpec::MsfDyadic {
        support: symmetric("1/2", "1"),
    };
    let g = gram_matrix(&frame, &spec, &window, false).unwrap();
    assert!(max_abs(&(g - identity(window.len()))) <= 1e-10);
}

#[test]
fn sub_shannon_gram_is_hermitian_and_toeplitz_per_level() {
    let spec = MonomorphismSpec::baumslag_solitar_1_2();
    let window = spec.enumerate_window(-1, 1, 8).unwrap();
    let frame = FrameSystemSpec::MsfDyadic {
        support: symmetric("1/8", "1/4"),
    };
    let g = gram_matrix(&frame, &spec, &window, false).unwrap();
    assert!(hermitian_defect(&g) <= 1e-12);
    let r = window.level_range(0);
    for a in r.clone().skip(1) {
        for b in r.clone().skip(1) {
            assert_eq!(g[(a, b)], g[(a - 1, b - 1)]);
        }
    }
}

#[test]
fn parallel_assembly_is_bitwise_equal() {
    let spec = MonomorphismSpec::baumslag_solitar_1_2();
    let window = spec.enumerate_window(-2, 2, 10).unwrap();
    let frame = FrameSystemSpec::MsfDyadic {
        support: symmetric("1/8", "1/4"),
    };
    let a = gram_matrix(&frame, &spec, &window, false).unwrap();
    let b = gram_matrix(&frame, &spec, &window, true).unwrap();
    assert_eq!(a, b);
}
