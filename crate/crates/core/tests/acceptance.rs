//! Acceptance suite. Prints one PASS/FAIL line per criterion; tolerances are
//! pinned below. Lines go straight to stderr so they show without
//! `--nocapture`.

use std::io::Write;
use std::path::PathBuf;

use dilatekit::cli::{resolve, RunArgs, RunConfig};
use dilatekit::dilation::kolmogorov_factorize;
use dilatekit::frame::{calderon_check, msf_inner_product, parse_rational, translation_orthogonality_check, IntervalSet};
use dilatekit::group::{GroupWord, LatticePoint, MonomorphismSpec};
use dilatekit::linalg::{identity, max_abs, CMatrix, CVector, C64};
use dilatekit::pipeline::{run_pipeline, PipelineOutput};
use dilatekit::report::Report;
use dilatekit::roots::{abelian_alpha_root, finite_heisenberg_rep, heisenberg_alpha_root, principal_root, root_residual};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QUADRATURE_TOL: f64 = 1e-8;
const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const K_RELATION_TOL: f64 = 1e-10;
const FACTORIZATION_TOL: f64 = 1e-10;
const CONSTRAINT_TOL: f64 = 1e-8;
const UNITARITY_TOL: f64 = 1e-10;
const DILATION_TOL: f64 = 1e-6;
const ROOT_TOL: f64 = 1e-10;
const ABELIAN_ROOT_TOL: f64 = 1e-8;
const TRIVIAL_HEISENBERG_TOL: f64 = 1e-12;
const FROZEN_TOL: f64 = 1e-10;
const GROUP_CASES: u32 = 1000;

const QUADRATURE: &str = include_str!("oracles/msf_gram_quadrature.txt");
const FROZEN_HEISENBERG: &str = include_str!("oracles/heisenberg_residuals.txt");

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn line(o: &Outcome) {
    let mark = if o.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {:>2} {mark}  {}: {}", o.id, o.title, o.detail);
}

fn preset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name)
}

fn run_preset(name: &str) -> PipelineOutput {
    let path = preset(name);
    let cfg = RunConfig::load(&path).unwrap();
    let args = RunArgs {
        config: path.clone(),
        out: None,
        seed: None,
        parallel: false,
    };
    let r = resolve(&cfg, &args, path.parent().unwrap()).unwrap();
    run_pipeline(&r.input).unwrap()
}

fn value(rep: &Report, section: &str, name: &str) -> f64 {
    rep.check(section, name)
        .unwrap_or_else(|| panic!("missing check {section}/{name}"))
        .value
}

/// Largest value over checks in `section` whose name starts with `prefix`.
fn worst(rep: &Report, section: &str, prefix: &str) -> (f64, usize) {
    let s = rep.section(section).unwrap();
    let vals: Vec<f64> = s.checks.iter().filter(|c| c.name.starts_with(prefix)).map(|c| c.value).collect();
    (vals.iter().copied().fold(0.0, f64::max), vals.len())
}

fn symmetric(lo: &str, hi: &str) -> IntervalSet {
    IntervalSet::symmetric(parse_rational(lo).unwrap(), parse_rational(hi).unwrap()).unwrap()
}

fn criterion_1() -> Outcome {
    let sub = symmetric("1/8", "1/4");
    let dev = calderon_check(&sub, (-16, 16)).deviation;
    let orth = translation_orthogonality_check(&sub, 64);
    let short = calderon_check(&symmetric("1/8", "3/16"), (-16, 16)).deviation;
    Outcome {
        id: 1,
        title: "Parseval gate",
        pass: dev == 0 && orth == 0 && short >= 1,
        detail: format!("deviation {dev}, orthogonality {orth}, short support deviation {short} (>= 1)"),
    }
}

fn criterion_2() -> Outcome {
    let spec = MonomorphismSpec::baumslag_solitar_1_2();
    let e = symmetric("1/8", "1/4");
    let pt = |j: i64, k: i64| LatticePoint::new(j, spec.from_i64_exponents(&[k]).unwrap());
    let mut dev = 0.0f64;
    let mut entries = 0;
    for l in QUADRATURE.lines().filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = l.split_whitespace().collect();
        let i = |n: usize| f[n].parse::<i64>().unwrap();
        let want = C64::new(f[4].parse().unwrap(), f[5].parse().unwrap());
        let g = msf_inner_product(&e, &pt(i(0), i(1)), &pt(i(2), i(3))).unwrap();
        dev = dev.max((g - want).norm());
        entries += 1;
    }
    let g01 = msf_inner_product(&e, &pt(0, 0), &pt(0, 1)).unwrap();
    let exact = (1.0 - std::f64::consts::SQRT_2 / 2.0) / std::f64::consts::PI;
    let closed = (g01 - C64::new(exact, 0.0)).norm();
    Outcome {
        id: 2,
        title: "analytic Gram vs quadrature",
        pass: entries == 2025 && dev <= QUADRATURE_TOL && closed <= QUADRATURE_TOL,
        detail: format!("{entries} entries, max deviation {dev:.2e}, closed-form entry {closed:.2e} (tol {QUADRATURE_TOL:e})"),
    }
}

fn criterion_3(rep: &Report) -> Outcome {
    let herm = value(rep, "k_relations", "kernel_hermitian_defect");
    let min_eig = value(rep, "psd", "min_eigenvalue");
    let shift = value(rep, "k_relations", "shift_relation");
    let trans = value(rep, "k_relations", "translation_relation");
    let fs = value(rep, "k_relations", "shift_checkable_fraction");
    let ft = value(rep, "k_relations", "translation_checkable_fraction");
    Outcome {
        id: 3,
        title: "kernel certification",
        pass: herm <= HERMITIAN_TOL
            && min_eig >= -PSD_TOL
            && shift <= K_RELATION_TOL
            && trans <= K_RELATION_TOL
            && fs > 0.0
            && ft > 0.0,
        detail: format!(
            "hermitian {herm:.2e}, min eigenvalue {min_eig:.2e}, relations {shift:.2e}/{trans:.2e}, checkable fractions {fs:.4}/{ft:.4}"
        ),
    }
}

fn criterion_4(rep: &Report) -> Outcome {
    let res = value(rep, "factorization", "factorization_residual");
    let rank = value(rep, "factorization", "rank");
    let zero = kolmogorov_factorize(&CMatrix::zeros(6, 6), PSD_TOL, 1e-10).unwrap();
    let unit = kolmogorov_factorize(&identity(6), PSD_TOL, 1e-10).unwrap();
    let ortho = max_abs(&(unit.v.adjoint() * &unit.v - identity(6)));
    Outcome {
        id: 4,
        title: "factorization",
        pass: res <= FACTORIZATION_TOL && zero.rank == 0 && unit.rank == 6 && ortho <= FACTORIZATION_TOL,
        detail: format!(
            "residual {res:.2e} at rank {rank}, zero kernel rank {}, identity kernel orthonormality {ortho:.2e}",
            zero.rank
        ),
    }
}

fn criterion_5(rep: &Report) -> Outcome {
    let shift = value(rep, "operator_residuals", "shift_constraint_residual");
    let (trans, nt) = worst(rep, "operator_residuals", "translation_constraint_residual.");
    let (fit, _) = worst(rep, "operator_residuals", "level0_fit_residual.");
    let ud = value(rep, "operator_residuals", "shift_unitarity_defect");
    let ut = value(rep, "operator_residuals", "translation_unitarity_defect")
        .max(value(rep, "operator_residuals", "translation_block_unitarity_defect"));
    Outcome {
        id: 5,
        title: "operator construction",
        pass: nt > 0
            && shift <= CONSTRAINT_TOL
            && trans <= CONSTRAINT_TOL
            && fit <= CONSTRAINT_TOL
            && ud <= UNITARITY_TOL
            && ut <= UNITARITY_TOL,
        detail: format!(
            "shift constraint {shift:.2e}, translation constraint {trans:.2e}, level-0 fit {fit:.2e} (tol {CONSTRAINT_TOL:e}); unitarity D {ud:.2e}, T {ut:.2e}"
        ),
    }
}

fn criterion_6(rep: &Report, shannon: &Report) -> Outcome {
    let rec = value(rep, "dilation_certification", "reconstruction");
    let gram = value(rep, "dilation_certification", "dilated_gram_deviation");
    let core = value(rep, "dilation_certification", "certified_points");
    let (cov, _) = worst(rep, "operator_residuals", "shift_covariance_residual.");
    let (inv, ni) = worst(rep, "dilation_certification", "invariance[");
    let shannon_rank = value(shannon, "factorization", "rank");
    Outcome {
        id: 6,
        title: "end-to-end dilation",
        pass: core == 15.0
            && rec <= DILATION_TOL
            && gram <= DILATION_TOL
            && cov <= DILATION_TOL
            && ni > 0
            && inv <= DILATION_TOL
            && shannon_rank == 0.0
            && shannon.pass,
        detail: format!(
            "reconstruction {rec:.2e}, dilated Gram {gram:.2e}, covariance {cov:.2e}, invariance {inv:.2e} on {core} core points; Shannon rank {shannon_rank}, pass {}",
            shannon.pass
        ),
    }
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .qr()
        .q()
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut principal = 0.0f64;
    for _ in 0..100 {
        let d = rng.random_range(1..=64);
        let a = rng.random_range(2..=8u64);
        let u = random_unitary(&mut rng, d);
        principal = principal.max(root_residual(&principal_root(&u, a, None).unwrap(), &u, a));
    }
    let spec = MonomorphismSpec::free_abelian(vec![vec![2, 1], vec![0, 2]]).unwrap();
    let mut abelian = 0.0f64;
    for trial in 0..20 {
        let q = random_unitary(&mut rng, 16);
        let rho: Vec<CMatrix> = (0..2)
            .map(|_| {
                let d = CVector::from_iterator(16, (0..16).map(|_| C64::from_polar(1.0, rng.random_range(-3.2..3.2))));
                &q * CMatrix::from_diagonal(&d) * q.adjoint()
            })
            .collect();
        abelian = abelian.max(abelian_alpha_root(&rho, &spec, trial).unwrap().residuals["alpha_relation"]);
    }
    let mut trivial = 0.0f64;
    for n in [2usize, 4, 8, 16] {
        let (a, b, c) = finite_heisenberg_rep(n).unwrap();
        let r = heisenberg_alpha_root(&a, &b, &c, 1, 1).unwrap();
        trivial = trivial.max(r.r1).max(r.r2).max(r.r3);
    }
    Outcome {
        id: 7,
        title: "roots",
        pass: principal <= ROOT_TOL && abelian <= ABELIAN_ROOT_TOL && trivial <= TRIVIAL_HEISENBERG_TOL,
        detail: format!("principal {principal:.2e}, abelian {abelian:.2e}, heisenberg a=b=1 {trivial:.2e}"),
    }
}

fn criterion_8() -> Outcome {
    let mut dev = 0.0f64;
    let mut rows = Vec::new();
    for l in FROZEN_HEISENBERG.lines().filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = l.split_whitespace().collect();
        let n: usize = f[0].parse().unwrap();
        let (a, b): (u64, u64) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        let (am, bm, cm) = finite_heisenberg_rep(n).unwrap();
        let r = heisenberg_alpha_root(&am, &bm, &cm, a, b).unwrap();
        for (got, want) in [r.r1, r.r2, r.r3].iter().zip(&f[3..6]) {
            dev = dev.max((got - want.parse::<f64>().unwrap()).abs());
        }
        rows.push(format!("N={n} ({:.6}, {:.6}, {:.6})", r.r1, r.r2, r.r3));
    }
    Outcome {
        id: 8,
        title: "Heisenberg residuals vs frozen oracle",
        pass: rows.len() == 3 && dev <= FROZEN_TOL,
        detail: format!("{}; max deviation {dev:.2e}", rows.join(", ")),
    }
}

fn group_case(spec: &MonomorphismSpec, raw: &[i64], w: [(u64, u64); 3]) -> Result<(), TestCaseError> {
    let el = |o: usize| {
        let e: Vec<i64> = (0..spec.exponent_len()).map(|i| raw[(o + i) % raw.len()]).collect();
        spec.from_i64_exponents(&e).unwrap()
    };
    let (x, y, z) = (el(0), el(1), el(2));
    let xy_z = spec.mul(&spec.mul(&x, &y).unwrap(), &z).unwrap();
    prop_assert_eq!(xy_z, spec.mul(&x, &spec.mul(&y, &z).unwrap()).unwrap());
    prop_assert!(spec.is_identity(&spec.mul(&x, &spec.inv(&x).unwrap()).unwrap()));
    prop_assert_eq!(spec.mul(&x, &spec.identity()).unwrap(), x.clone());
    let hom = spec.apply(&spec.mul(&x, &y).unwrap()).unwrap();
    prop_assert_eq!(hom, spec.mul(&spec.apply(&x).unwrap(), &spec.apply(&y).unwrap()).unwrap());
    if x != y {
        prop_assert_ne!(spec.apply(&x).unwrap(), spec.apply(&y).unwrap());
    }
    let words: Vec<GroupWord> = [&x, &y, &z]
        .iter()
        .zip(w)
        .map(|(g, (m, n))| spec.word(m, (*g).clone(), n).unwrap())
        .collect();
    let l = spec.word_mul(&spec.word_mul(&words[0], &words[1]).unwrap(), &words[2]).unwrap();
    let r = spec.word_mul(&words[0], &spec.word_mul(&words[1], &words[2]).unwrap()).unwrap();
    prop_assert_eq!(l, r);
    Ok(())
}

fn criterion_9() -> Outcome {
    let specs = vec![
        MonomorphismSpec::baumslag_solitar_1_2(),
        MonomorphismSpec::free_abelian(vec![vec![2, 1], vec![0, 2]]).unwrap(),
        MonomorphismSpec::heisenberg(2, 3).unwrap(),
        MonomorphismSpec::free_nilpotent(vec![2, 3]).unwrap(),
    ];
    let mut runner = TestRunner::new(Config {
        cases: GROUP_CASES,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (
        0..specs.len(),
        prop::collection::vec(-30i64..=30, 9),
        prop::array::uniform3((0u64..4, 0u64..4)),
        -500i64..=500,
    );
    let bs = MonomorphismSpec::baumslag_solitar_1_2();
    let result = runner.run(&strategy, |(s, raw, w, k)| {
        group_case(&specs[s], &raw, w)?;
        let t = |e: i64| bs.word(0, bs.from_i64_exponents(&[e]).unwrap(), 0).unwrap();
        let u = bs.u();
        let lhs = bs.word_mul(&bs.word_mul(&bs.word_inv(&u).unwrap(), &t(2 * k)).unwrap(), &u).unwrap();
        prop_assert_eq!(lhs, t(k));
        Ok(())
    });
    Outcome {
        id: 9,
        title: "group algebra properties",
        pass: result.is_ok(),
        detail: match result {
            Ok(()) => format!("{GROUP_CASES} cases, 0 failures"),
            Err(e) => format!("failure: {e}"),
        },
    }
}

fn criterion_10(first: &Report) -> Outcome {
    let second = run_preset("bs12_sub_shannon.json").report;
    let (a, b) = (first.to_json().unwrap(), second.to_json().unwrap());
    Outcome {
        id: 10,
        title: "reproducibility",
        pass: a == b,
        detail: format!("two single-threaded runs, {} bytes, identical: {}", a.len(), a == b),
    }
}

#[test]
fn acceptance_criteria() {
    let sub = run_preset("bs12_sub_shannon.json");
    let shannon = run_preset("shannon.json");
    let rep = &sub.report;
    let outcomes = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(rep),
        criterion_4(rep),
        criterion_5(rep),
        criterion_6(rep, &shannon.report),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(rep),
    ];
    for o in &outcomes {
        line(o);
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    let _ = writeln!(std::io::stderr(), "acceptance: {passed}/{} criteria pass", outcomes.len());
    for o in &outcomes {
        assert!(o.pass, "criterion {} failed: {}", o.id, o.detail);
    }
    let failing: Vec<String> = rep
        .sections
        .iter()
        .flat_map(|(s, sec)| sec.checks.iter().filter(|c| !c.pass).map(move |c| format!("{s}/{}", c.name)))
        .collect();
    assert!(failing.is_empty(), "failing checks: {failing:?}");
}
