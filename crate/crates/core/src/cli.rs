//! Command-line front end: configuration documents and the subcommands
//! `parseval`, `gram`, `dilate`, `roots` and `verify`.
//!
//! A configuration is one JSON document:
//!
//! ```json
//! {
//!   "group": { "family": "free_abelian", "matrix": [[2]] },
//!   "frame": { "kind": "msf_dyadic", "support": [["-1/4", "-1/8"], ["1/8", "1/4"]] },
//!   "window": { "j_min": -3, "j_max": 3, "radius": 64 },
//!   "core": { "j_min": -1, "j_max": 1, "radius": 2 },
//!   "tolerances": { "rank": 1e-14 },
//!   "parseval": { "j_min": -16, "j_max": 16, "q_max": 64 },
//!   "seed": 0,
//!   "output": "out/sub_shannon"
//! }
//! ```
//!
//! Relative paths inside a configuration resolve against its directory.
//! Exit codes: 0 all checks pass, 1 a check failed, 2 invalid input,
//! 3 internal numerical failure.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::dilation::Tolerances;
use crate::error::{Error, Result};
use crate::frame::{generator_preset, gram_matrix, FrameSystemSpec, Grid2D, IntervalSet, Rep2D, Sampled2D};
use crate::group::{Gamma0Element, LatticePoint, MonomorphismSpec, Window};
use crate::linalg::{hermitian_defect, unitarity_defect, CMatrix, CVector, C64};
use crate::matrix_io::{read_matrix, write_matrix};
use crate::pipeline::{parseval_section, run_pipeline, window_meta, CoreWindow, ParsevalSettings, PipelineInput};
use crate::report::{emit_report, read_report, Check, Metadata, Report, Section, WindowMeta};
use crate::roots::{abelian_alpha_root, finite_heisenberg_rep, heisenberg_alpha_root, principal_root, root_residual};

#[derive(Debug, Parser)]
#[command(name = "dilatekit", version, about = "Orthonormal group dilations of Parseval wavelet frames")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact Calderón and translation-orthogonality checks of an MSF frame.
    Parseval(RunArgs),
    /// Gram matrix of the frame system over the window.
    Gram(RunArgs),
    /// Full dilation pipeline; writes the report and the model matrices.
    Dilate(RunArgs),
    /// Unitary roots on matrix files.
    Roots(RootsArgs),
    /// Re-certify model matrices written by `dilate`.
    Verify(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Configuration document (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the configuration's `output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed; overrides the configuration's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Assemble the Gram matrix on all cores.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct RootsArgs {
    #[command(subcommand)]
    pub op: RootsOp,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for the joint diagonalization.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum RootsOp {
    /// `S` with `Sᵃ = U`; writes `root.txt`.
    Principal {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        order: u64,
    },
    /// `α`-root of commuting unitaries `ρ(t₁), …, ρ(tₙ)`; writes `t<i>.txt`.
    Abelian {
        /// One file per generator, in order.
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Integer matrix of `α` as JSON, e.g. `[[2,1],[0,2]]`.
        #[arg(long)]
        alpha: String,
    },
    /// `U = A^{1/a}`, `V = B^{1/b}`, `W = UVU⁻¹V⁻¹`; writes `u.txt`, `v.txt`,
    /// `w.txt`.
    Heisenberg {
        #[arg(long, conflicts_with = "finite_rep", requires_all = ["b_matrix", "c_matrix"])]
        a_matrix: Option<PathBuf>,
        #[arg(long)]
        b_matrix: Option<PathBuf>,
        #[arg(long)]
        c_matrix: Option<PathBuf>,
        /// Use the shift/clock representation on `ℂᴺ` instead of files.
        #[arg(long)]
        finite_rep: Option<usize>,
        #[arg(long)]
        a: u64,
        #[arg(long)]
        b: u64,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupConfig {
    FreeAbelian { matrix: Vec<Vec<i64>> },
    Heisenberg { a: i64, b: i64 },
    FreeNilpotent { exps: Vec<i64> },
}

impl GroupConfig {
    pub fn build(&self) -> Result<MonomorphismSpec> {
        match self {
            GroupConfig::FreeAbelian { matrix } => MonomorphismSpec::free_abelian(matrix.clone()),
            GroupConfig::Heisenberg { a, b } => MonomorphismSpec::heisenberg(*a, *b),
            GroupConfig::FreeNilpotent { exps } => MonomorphismSpec::free_nilpotent(exps.clone()),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorEntry {
    pub j: i64,
    pub gamma: Vec<i64>,
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomVectors {
    /// Entries are uniform in `[−scale, scale]` (real and imaginary parts).
    pub scale: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RepConfig {
    Shearlet { a: i64 },
    HeisenbergMult1 { a: i64, b: i64 },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x1_min: f64,
    pub x2_min: f64,
    pub h1: f64,
    pub h2: f64,
    pub n1: usize,
    pub n2: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorConfig {
    /// A named generator from [`generator_preset`].
    Preset(String),
    /// An `n1 × n2` matrix file of samples.
    File(PathBuf),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrameConfig {
    MsfDyadic {
        support: Vec<(String, String)>,
    },
    ExplicitVectors {
        dim: usize,
        #[serde(default)]
        vectors: Vec<VectorEntry>,
        #[serde(default)]
        random: Option<RandomVectors>,
    },
    #[serde(rename = "band_limited_2d")]
    BandLimited2d {
        rep: RepConfig,
        grid: GridConfig,
        generator: GeneratorConfig,
    },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub j_min: i64,
    pub j_max: i64,
    pub radius: u64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParsevalConfig {
    pub j_min: i64,
    pub j_max: i64,
    pub q_max: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub group: GroupConfig,
    pub frame: FrameConfig,
    pub window: WindowConfig,
    #[serde(default)]
    pub core: Option<WindowConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub parseval: Option<ParsevalConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Everything a run needs, resolved from a configuration and the flags.
pub struct Resolved {
    pub input: PipelineInput,
    pub out: PathBuf,
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn build_frame(
    cfg: &FrameConfig,
    spec: &MonomorphismSpec,
    window: &Window,
    seed: u64,
    base: &Path,
) -> Result<FrameSystemSpec> {
    match cfg {
        FrameConfig::MsfDyadic { support } => Ok(FrameSystemSpec::MsfDyadic {
            support: IntervalSet::parse(support)?,
        }),
        FrameConfig::ExplicitVectors { dim, vectors, random } => {
            let mut map = HashMap::new();
            match (random, vectors.is_empty()) {
                (Some(r), true) => {
                    if !(r.scale.is_finite() && r.scale > 0.0) {
                        return Err(Error::InvalidArgument("random scale must be positive".into()));
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    for p in window.points() {
                        let v = CVector::from_iterator(
                            *dim,
                            (0..*dim).map(|_| {
                                C64::new(
                                    rng.random_range(-r.scale..=r.scale),
                                    rng.random_range(-r.scale..=r.scale),
                                )
                            }),
                        );
                        map.insert(p.clone(), v);
                    }
                }
                (None, false) => {
                    for e in vectors {
                        let gamma = spec.from_i64_exponents(&e.gamma)?;
                        let im = e.im.clone().unwrap_or_else(|| vec![0.0; e.re.len()]);
                        if e.re.len() != *dim || im.len() != *dim {
                            return Err(Error::InvalidArgument(format!(
                                "vector at level {} has the wrong length (dimension {dim})",
                                e.j
                            )));
                        }
                        let v = CVector::from_iterator(
                            *dim,
                            e.re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)),
                        );
                        if map.insert(LatticePoint::new(e.j, gamma), v).is_some() {
                            return Err(Error::InvalidArgument(format!(
                                "duplicate vector at level {}",
                                e.j
                            )));
                        }
                    }
                }
                _ => {
                    return Err(Error::InvalidArgument(
                        "explicit_vectors needs exactly one of 'vectors' or 'random'".into(),
                    ))
                }
            }
            Ok(FrameSystemSpec::ExplicitVectors {
                dim: *dim,
                vectors: map,
            })
        }
        FrameConfig::BandLimited2d { rep, grid, generator } => {
            let rep = match *rep {
                RepConfig::Shearlet { a } => Rep2D::Shearlet { a },
                RepConfig::HeisenbergMult1 { a, b } => Rep2D::HeisenbergMult1 { a, b },
            };
            let grid = Grid2D::new(grid.x1_min, grid.x2_min, grid.h1, grid.h2, grid.n1, grid.n2)?;
            let generator = match generator {
                GeneratorConfig::Preset(name) => generator_preset(name, grid)?,
                GeneratorConfig::File(p) => {
                    let m = read_matrix(&resolve_path(base, p))?;
                    if m.nrows() != grid.n1 || m.ncols() != grid.n2 {
                        return Err(Error::InvalidArgument(format!(
                            "generator file is {}×{}, grid is {}×{}",
                            m.nrows(),
                            m.ncols(),
                            grid.n1,
                            grid.n2
                        )));
                    }
                    let values = (0..grid.n1)
                        .flat_map(|i| (0..grid.n2).map(move |k| (i, k)))
                        .map(|(i, k)| m[(i, k)])
                        .collect();
                    Sampled2D::new(grid, values)?
                }
            };
            Ok(FrameSystemSpec::BandLimited2D { rep, generator })
        }
    }
}

pub fn resolve(cfg: &RunConfig, args: &RunArgs, base: &Path) -> Result<Resolved> {
    let seed = args.seed.unwrap_or(cfg.seed);
    let spec = cfg.group.build()?;
    let w = cfg.window;
    let window = spec.enumerate_window(w.j_min, w.j_max, w.radius)?;
    let frame = build_frame(&cfg.frame, &spec, &window, seed, base)?;
    let core = cfg.core.map_or_else(CoreWindow::default, |c| CoreWindow {
        j_min: c.j_min,
        j_max: c.j_max,
        radius: c.radius,
    });
    let parseval = cfg.parseval.map_or_else(ParsevalSettings::default, |p| ParsevalSettings {
        j_range: (p.j_min, p.j_max),
        q_max: p.q_max,
    });
    cfg.tolerances.validate()?;
    let out = match (&args.out, &cfg.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => resolve_path(base, o),
        (None, None) => PathBuf::from("dilatekit-out"),
    };
    Ok(Resolved {
        input: PipelineInput {
            spec,
            frame,
            window,
            core,
            tolerances: cfg.tolerances.clone(),
            parseval,
            seed,
            parallel: args.parallel,
        },
        out,
    })
}

fn load_run(args: &RunArgs) -> Result<Resolved> {
    let cfg = RunConfig::load(&args.config)?;
    let base = args
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    resolve(&cfg, args, &base)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn finish_report(report: &Report, out: &Path, file: &str) -> Result<Report> {
    create_dir(out)?;
    emit_report(report, &out.join(file))?;
    println!(
        "{}: {} ({})",
        report.metadata.command,
        if report.pass { "pass" } else { "FAIL" },
        out.join(file).display()
    );
    for (name, s) in &report.sections {
        for c in s.checks.iter().filter(|c| !c.pass) {
            println!("  failed {name}/{}: {:e}", c.name, c.value);
        }
        if let Some(e) = &s.error {
            println!("  {name}: {e}");
        }
    }
    Ok(report.clone())
}

fn base_metadata(command: &str, input: &PipelineInput) -> Metadata {
    let mut meta = Metadata::new(command, input.seed);
    meta.window = Some(window_meta(&input.window));
    meta.tolerances = input
        .tolerances
        .as_map()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    meta
}

pub fn cmd_parseval(args: &RunArgs) -> Result<Report> {
    let r = load_run(args)?;
    if !matches!(r.input.frame, FrameSystemSpec::MsfDyadic { .. }) {
        return Err(Error::InvalidArgument("parseval needs an msf_dyadic frame".into()));
    }
    let mut report = Report::new(base_metadata("parseval", &r.input));
    report.insert("parseval_checks", parseval_section(&r.input.frame, &r.input.parseval));
    finish_report(&report, &r.out, "parseval_report.json")
}

pub fn cmd_gram(args: &RunArgs) -> Result<Report> {
    let r = load_run(args)?;
    let g = gram_matrix(&r.input.frame, &r.input.spec, &r.input.window, r.input.parallel)?;
    create_dir(&r.out)?;
    write_matrix(&r.out.join("gram.txt"), &g)?;
    let mut report = Report::new(base_metadata("gram", &r.input));
    let mut s = Section::new();
    s.push(Check::count("window_points", r.input.window.len()));
    s.push(Check::max("gram_hermitian_defect", hermitian_defect(&g), r.input.tolerances.hermitian));
    report.insert("input_summary", s);
    finish_report(&report, &r.out, "gram_report.json")
}

pub fn cmd_dilate(args: &RunArgs) -> Result<Report> {
    let r = load_run(args)?;
    let out = run_pipeline(&r.input)?;
    create_dir(&r.out)?;
    if let Some(tau) = &out.artifacts.tau {
        write_matrix(&r.out.join("shift.txt"), &tau.d)?;
        for (name, t) in tau.generator_names.iter().zip(&tau.t_full) {
            write_matrix(&r.out.join(format!("translation_{name}.txt")), t)?;
        }
        let eta = CMatrix::from_column_slice(tau.eta.len(), 1, tau.eta.as_slice());
        write_matrix(&r.out.join("eta.txt"), &eta)?;
    }
    finish_report(&out.report, &r.out, "report.json")
}

/// Reloads `shift.txt`, `translation_*.txt` and `eta.txt` from the output
/// directory, recomputes the Gram matrix and certifies the dilated system
/// on the core window with full matrices. Also recomputes every pass flag of
/// the stored `report.json`.
pub fn cmd_verify(args: &RunArgs) -> Result<Report> {
    let r = load_run(args)?;
    let input = &r.input;
    let spec = &input.spec;
    let tol = &input.tolerances;
    let dir = &r.out;
    let d = read_matrix(&dir.join("shift.txt"))?;
    let names = spec.generator_names();
    let ts: Vec<CMatrix> = names
        .iter()
        .map(|n| read_matrix(&dir.join(format!("translation_{n}.txt"))))
        .collect::<Result<_>>()?;
    let eta_m = read_matrix(&dir.join("eta.txt"))?;
    let rank = d.nrows();
    if d.ncols() != rank
        || ts.iter().any(|t| t.nrows() != rank || t.ncols() != rank)
        || eta_m.nrows() != rank
        || eta_m.ncols() != 1
    {
        return Err(Error::InvalidArgument("model matrices have inconsistent sizes".into()));
    }
    let stored = read_report(&dir.join("report.json"))?;

    let mut meta = base_metadata("verify", input);
    let core = input.core;
    let window = &input.window;
    let core_idx = window.sub_window_indices(core.j_min, core.j_max, core.radius);
    meta.core = Some(WindowMeta {
        j_min: core.j_min,
        j_max: core.j_max,
        radius: Some(core.radius),
        points: core_idx.len(),
    });
    let mut report = Report::new(meta);

    let mut s = Section::new();
    s.push(Check::count("rank", rank));
    let flag_mismatches = stored
        .sections
        .values()
        .flat_map(|sec| sec.checks.iter())
        .filter(|c| c.pass != c.evaluate())
        .count();
    s.push(Check::max("stored_flag_mismatches", flag_mismatches as f64, 0.0));
    let overall_mismatch = (stored.pass != stored.evaluate()) as u8;
    s.push(Check::max("stored_overall_mismatch", overall_mismatch as f64, 0.0));
    s.push(Check::info("stored_report_pass", stored.pass as u8 as f64));
    report.insert("input_summary", s);

    let mut ops = Section::new();
    ops.push(Check::max("shift_unitarity_defect", unitarity_defect(&d), tol.unitarity));
    for (n, t) in names.iter().zip(&ts) {
        ops.push(Check::max(format!("translation_unitarity_defect.{n}"), unitarity_defect(t), tol.unitarity));
    }
    report.insert("operator_residuals", ops);

    let g = gram_matrix(&input.frame, spec, window, input.parallel)?;
    let eta = CMatrix::from_column_slice(rank, 1, eta_m.as_slice());
    let apply_gamma = |gamma: &Gamma0Element, x: &CMatrix| -> Result<CMatrix> {
        let exps = gamma
            .small_exponents()
            .ok_or_else(|| Error::Numerical("exponent exceeds i64".into()))?;
        let mut y = x.clone();
        for (t, &e) in ts.iter().zip(&exps).rev() {
            if e != 0 {
                y = apply_power(t, e, y);
            }
        }
        Ok(y)
    };
    let mut vecs = Vec::with_capacity(core_idx.len());
    for &i in &core_idx {
        let p = window.point(i);
        let y = apply_gamma(&p.gamma, &eta)?;
        vecs.push((i, apply_power(&d, p.j, y)));
    }
    let mut dev = 0.0f64;
    for (x, vx) in &vecs {
        for (y, vy) in &vecs {
            let k = vy.column(0).dotc(&vx.column(0));
            let delta = if x == y { 1.0 } else { 0.0 };
            dev = dev.max((g[(*x, *y)] + k - C64::new(delta, 0.0)).norm());
        }
    }
    let mut cert = Section::new();
    cert.push(Check::max("dilated_gram_deviation", dev, tol.dilation));
    cert.push(Check::count("certified_points", vecs.len()));
    report.insert("dilation_certification", cert);
    finish_report(&report, dir, "verify_report.json")
}

/// `Uᵉ x` by repeated products with `U` or `U*`.
fn apply_power(u: &CMatrix, e: i64, mut x: CMatrix) -> CMatrix {
    for _ in 0..e.unsigned_abs() {
        x = if e < 0 { u.ad_mul(&x) } else { u * &x };
    }
    x
}

fn parse_alpha(text: &str) -> Result<Vec<Vec<i64>>> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("--alpha: {e}")))
}

pub fn cmd_roots(args: &RootsArgs) -> Result<Report> {
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("dilatekit-out"));
    let seed = args.seed.unwrap_or(0);
    let mut meta = Metadata::new("roots", seed);
    meta.tolerances.insert("relation".into(), Tolerances::default().relation);
    let tol = Tolerances::default().relation;
    let mut report = Report::new(meta);
    let mut s = Section::new();
    create_dir(&out)?;
    match &args.op {
        RootsOp::Principal { input, order } => {
            let u = read_matrix(input)?;
            let root = principal_root(&u, *order, None)?;
            s.push(Check::max("root_residual", root_residual(&root, &u, *order), tol));
            s.push(Check::max("root_unitarity_defect", unitarity_defect(&root), tol));
            write_matrix(&out.join("root.txt"), &root)?;
        }
        RootsOp::Abelian { input, alpha } => {
            let spec = MonomorphismSpec::free_abelian(parse_alpha(alpha)?)?;
            let rho: Vec<CMatrix> = input.iter().map(|p| read_matrix(p)).collect::<Result<_>>()?;
            let table = abelian_alpha_root(&rho, &spec, seed)?;
            for (k, v) in &table.residuals {
                s.push(Check::max(k.clone(), *v, tol));
            }
            for (name, m) in table.names.iter().zip(&table.matrices) {
                write_matrix(&out.join(format!("{name}.txt")), m)?;
            }
        }
        RootsOp::Heisenberg {
            a_matrix,
            b_matrix,
            c_matrix,
            finite_rep,
            a,
            b,
        } => {
            let (am, bm, cm) = match (finite_rep, a_matrix, b_matrix, c_matrix) {
                (Some(n), None, _, _) => finite_heisenberg_rep(*n)?,
                (None, Some(pa), Some(pb), Some(pc)) => (read_matrix(pa)?, read_matrix(pb)?, read_matrix(pc)?),
                _ => {
                    return Err(Error::InvalidArgument(
                        "give either --finite-rep or all of --a-matrix, --b-matrix, --c-matrix".into(),
                    ))
                }
            };
            let root = heisenberg_alpha_root(&am, &bm, &cm, *a, *b)?;
            // r1..r3 are explored, not asserted
            s.push(Check::info("r1_commutator_power", root.r1));
            s.push(Check::info("r2_u_commutes_w", root.r2));
            s.push(Check::info("r3_v_commutes_w", root.r3));
            s.push(Check::max("u_root_residual", root_residual(&root.u, &am, *a), tol));
            s.push(Check::max("v_root_residual", root_residual(&root.v, &bm, *b), tol));
            println!("r1 = {:e}\nr2 = {:e}\nr3 = {:e}", root.r1, root.r2, root.r3);
            write_matrix(&out.join("u.txt"), &root.u)?;
            write_matrix(&out.join("v.txt"), &root.v)?;
            write_matrix(&out.join("w.txt"), &root.w)?;
        }
    }
    report.insert("root_residuals", s);
    finish_report(&report, &out, "roots_report.json")
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Parseval(a) => cmd_parseval(a),
        Command::Gram(a) => cmd_gram(a),
        Command::Dilate(a) => cmd_dilate(a),
        Command::Roots(a) => cmd_roots(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(report) => {
            info!("overall pass: {}", report.pass);
            if report.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sub_shannon_config() {
        let cfg = RunConfig::parse(
            r#"{
                "group": {"family": "free_abelian", "matrix": [[2]]},
                "frame": {"kind": "msf_dyadic", "support": [["-1/4","-1/8"],["1/8","1/4"]]},
                "window": {"j_min": -1, "j_max": 1, "radius": 4},
                "tolerances": {"rank": 1e-14}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.tolerances.rank, 1e-14);
        assert_eq!(cfg.tolerances.psd, 1e-10);
        let args = RunArgs {
            config: PathBuf::from("x.json"),
            out: None,
            seed: Some(5),
            parallel: false,
        };
        let r = resolve(&cfg, &args, Path::new(".")).unwrap();
        assert_eq!(r.input.seed, 5);
        assert_eq!(r.input.window.len(), 27);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_tolerances() {
        assert!(RunConfig::parse(r#"{"group": {"family": "free_abelian", "matrix": [[2]]}, "bogus": 1}"#).is_err());
        let cfg = RunConfig::parse(
            r#"{
                "group": {"family": "heisenberg", "a": 2, "b": 2},
                "frame": {"kind": "explicit_vectors", "dim": 2, "random": {"scale": 1.0}},
                "window": {"j_min": 0, "j_max": 0, "radius": 0},
                "tolerances": {"psd": -1.0}
            }"#,
        )
        .unwrap();
        let args = RunArgs {
            config: PathBuf::from("x.json"),
            out: None,
            seed: None,
            parallel: false,
        };
        assert!(matches!(resolve(&cfg, &args, Path::new(".")), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn random_vectors_are_seeded() {
        let cfg = RunConfig::parse(
            r#"{
                "group": {"family": "free_abelian", "matrix": [[2]]},
                "frame": {"kind": "explicit_vectors", "dim": 3, "random": {"scale": 1.0}},
                "window": {"j_min": 0, "j_max": 1, "radius": 1}
            }"#,
        )
        .unwrap();
        let args = RunArgs {
            config: PathBuf::from("x.json"),
            out: None,
            seed: Some(9),
            parallel: false,
        };
        let a = resolve(&cfg, &args, Path::new(".")).unwrap();
        let b = resolve(&cfg, &args, Path::new(".")).unwrap();
        let ga = gram_matrix(&a.input.frame, &a.input.spec, &a.input.window, false).unwrap();
        let gb = gram_matrix(&b.input.frame, &b.input.spec, &b.input.window, false).unwrap();
        assert_eq!(ga, gb);
    }
}
