//! End-to-end dilation run: Gram matrix, complement kernel, checks,
//! factorization, operators, certification and the report.
//!
//! Failed numerical checks stop the run at the section where they occur;
//! that section is marked failed, the later ones not run. Invalid input and
//! internal failures are returned as errors instead.

use log::info;

use crate::dilation::{
    assemble_dilation, build_shift, build_tau, check_k_relations, complement_kernel,
    invariance_sample, kolmogorov_factorize, subspace_chain, translation_constraint_residuals,
    DilationModel, KolmogorovModel, ShiftOperator, SubspaceChain, Tolerances,
};
use crate::error::{Error, Result};
use crate::frame::{calderon_check, gram_matrix, translation_orthogonality_check, FrameSystemSpec};
use crate::group::{GroupWord, LatticePoint, MonomorphismSpec, Window};
use crate::linalg::{hermitian_defect, unitarity_defect, CMatrix};
use crate::report::{Check, Metadata, Report, Section, WindowMeta, SECTION_NAMES};

/// Core sub-window on which the dilated system is certified.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoreWindow {
    pub j_min: i64,
    pub j_max: i64,
    pub radius: u64,
}

impl Default for CoreWindow {
    fn default() -> Self {
        CoreWindow {
            j_min: -1,
            j_max: 1,
            radius: 2,
        }
    }
}

/// Level range and translation bound of the exact Parseval checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParsevalSettings {
    pub j_range: (i64, i64),
    pub q_max: u64,
}

impl Default for ParsevalSettings {
    fn default() -> Self {
        ParsevalSettings {
            j_range: (-16, 16),
            q_max: 64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineInput {
    pub spec: MonomorphismSpec,
    pub frame: FrameSystemSpec,
    pub window: Window,
    pub core: CoreWindow,
    pub tolerances: Tolerances,
    pub parseval: ParsevalSettings,
    pub seed: u64,
    pub parallel: bool,
}

/// Intermediate objects of a run; later fields are `None` when the run
/// stopped before producing them.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub gram: Option<CMatrix>,
    pub kernel: Option<CMatrix>,
    pub model: Option<KolmogorovModel>,
    pub shift: Option<ShiftOperator>,
    pub chain: Option<SubspaceChain>,
    pub tau: Option<DilationModel>,
}

pub struct PipelineOutput {
    pub report: Report,
    pub artifacts: Artifacts,
}

pub fn window_meta(w: &Window) -> WindowMeta {
    WindowMeta {
        j_min: w.j_min(),
        j_max: w.j_max(),
        radius: w.radius(),
        points: w.len(),
    }
}

fn stops_run(e: &Error) -> bool {
    matches!(
        e,
        Error::IndefiniteKernel { .. }
            | Error::RelationViolation { .. }
            | Error::BlockLeakage { .. }
            | Error::AlphaRootFailure { .. }
            | Error::CommutationViolation { .. }
    )
}

/// Parseval gate for dyadic MSF systems; other systems get a note only.
pub fn parseval_section(frame: &FrameSystemSpec, settings: &ParsevalSettings) -> Section {
    match frame {
        FrameSystemSpec::MsfDyadic { support } => {
            let cal = calderon_check(support, settings.j_range);
            let orth = translation_orthogonality_check(support, settings.q_max);
            let mut s = Section::new();
            s.push(Check::max("calderon_deviation", cal.deviation as f64, 0.0));
            s.push(Check::count("calderon_cells", cal.cells));
            s.push(Check::max("translation_orthogonality", orth as f64, 0.0));
            s
        }
        other => Section::new().with_note(format!(
            "exact Parseval checks apply to msf_dyadic frames only, not {}",
            other.kind()
        )),
    }
}

/// Words `u`, each generator, and `u⁻¹ t u` for each generator `t`.
pub fn invariance_words(spec: &MonomorphismSpec) -> Result<Vec<GroupWord>> {
    let u = spec.u();
    let u_inv = spec.word_inv(&u)?;
    let mut words = vec![u.clone()];
    for g in spec.generators() {
        let t = spec.word(0, g, 0)?;
        let conj = spec.word_mul(&spec.word_mul(&u_inv, &t)?, &u)?;
        words.push(t);
        words.push(conj);
    }
    Ok(words)
}

struct Run {
    report: Report,
    artifacts: Artifacts,
}

impl Run {
    /// Records `section`, or on a check-type error marks it failed and
    /// reports whether the run must stop.
    fn finish(&mut self, name: &str, mut section: Section, outcome: Result<()>) -> Result<bool> {
        match outcome {
            Ok(()) => {
                self.report.insert(name, section);
                Ok(true)
            }
            Err(e) if stops_run(&e) => {
                info!("{name}: {e}");
                section.fail(&e);
                self.report.insert(name, section);
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }
}

pub fn run_pipeline(input: &PipelineInput) -> Result<PipelineOutput> {
    input.tolerances.validate()?;
    let tol = &input.tolerances;
    let window = &input.window;
    let spec = &input.spec;
    let core = input.core;
    if core.j_min < window.j_min() || core.j_max > window.j_max() {
        return Err(Error::InvalidArgument(format!(
            "core levels [{}, {}] exceed the window [{}, {}]",
            core.j_min,
            core.j_max,
            window.j_min(),
            window.j_max()
        )));
    }
    let core_idx = window.sub_window_indices(core.j_min, core.j_max, core.radius);

    let mut meta = Metadata::new("dilate", input.seed);
    meta.window = Some(window_meta(window));
    meta.core = Some(WindowMeta {
        j_min: core.j_min,
        j_max: core.j_max,
        radius: Some(core.radius),
        points: core_idx.len(),
    });
    meta.tolerances = tol.as_map().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let mut run = Run {
        report: Report::new(meta),
        artifacts: Artifacts::default(),
    };
    for name in SECTION_NAMES {
        run.report.insert(name, Section::not_run());
    }

    info!("gram matrix over {} points", window.len());
    let g = gram_matrix(&input.frame, spec, window, input.parallel)?;
    let mut summary = Section::new();
    summary.push(Check::count("window_points", window.len()));
    summary.push(Check::count("core_points", core_idx.len()));
    summary.push(Check::count("generators", spec.generators().len()));
    summary.push(Check::max("gram_hermitian_defect", hermitian_defect(&g), tol.hermitian));
    run.report.insert("input_summary", summary);
    run.report.insert("parseval_checks", parseval_section(&input.frame, &input.parseval));

    let k = complement_kernel(&g);
    run.artifacts.gram = Some(g);
    info!("kernel relations");
    let rel = check_k_relations(&k, window, spec)?;
    let mut s = Section::new();
    s.push(Check::max("kernel_hermitian_defect", hermitian_defect(&k), tol.hermitian));
    s.push(Check::max("shift_relation", rel.shift_residual, tol.k_relation));
    s.push(Check::count("shift_checkable_pairs", rel.shift_pairs));
    s.push(Check::info("shift_checkable_fraction", rel.shift_fraction()));
    s.push(Check::max("translation_relation", rel.translation_residual, tol.k_relation));
    s.push(Check::count("translation_checkable_pairs", rel.translation_pairs));
    s.push(Check::info("translation_checkable_fraction", rel.translation_fraction()));
    run.report.insert("k_relations", s);

    info!("factorization");
    let fact = kolmogorov_factorize(&k, tol.psd, tol.rank);
    run.artifacts.kernel = Some(k);
    let model = match fact {
        Ok(m) => {
            let mut s = Section::new();
            s.push(Check::min("min_eigenvalue", m.min_eigenvalue, -tol.psd));
            run.report.insert("psd", s);
            m
        }
        Err(e) => {
            let mut s = Section::new();
            if let Error::IndefiniteKernel { min_eigenvalue, .. } = e {
                s.push(Check::min("min_eigenvalue", min_eigenvalue, -tol.psd));
            }
            run.finish("psd", s, Err(e))?;
            return Ok(run.into_output());
        }
    };
    let mut s = Section::new();
    s.push(Check::count("rank", model.rank));
    s.push(Check::info(
        "max_eigenvalue",
        model.eigenvalues.first().copied().unwrap_or(0.0),
    ));
    s.push(Check::max("factorization_residual", model.residual, tol.factorization));
    run.report.insert("factorization", s);
    run.artifacts.model = Some(model);
    let model = run.artifacts.model.as_ref().expect("just stored");

    info!("operators, rank {}", model.rank);
    let mut ops = Section::new();
    let shift = match build_shift(model, window, tol) {
        Ok(s) => s,
        Err(e) => {
            run.finish("operator_residuals", ops, Err(e))?;
            return Ok(run.into_output());
        }
    };
    ops.push(Check::max("shift_constraint_residual", shift.residual, tol.constraint));
    ops.push(Check::count("shift_fitted_rank", shift.fitted_rank));
    ops.push(Check::max("shift_unitarity_defect", unitarity_defect(&shift.d), tol.unitarity));
    let chain = subspace_chain(model, window);
    ops.push(Check::max(
        "chain_orthogonality_defect",
        chain.orthogonality_defect(),
        tol.unitarity,
    ));
    for (l, d) in chain.levels.iter().zip(chain.dims()) {
        ops.push(Check::count(format!("chain_dim.level_{l}"), d));
    }
    ops.push(Check::count("chain_leftover_dims", chain.leftover));
    let tau = match build_tau(model, window, spec, &chain, &shift, tol, input.seed) {
        Ok(t) => t,
        Err(e) => {
            run.artifacts.shift = Some(shift);
            run.artifacts.chain = Some(chain);
            let root_failure = matches!(e, Error::AlphaRootFailure { .. });
            if root_failure {
                run.report.insert("operator_residuals", ops);
                run.finish("root_residuals", Section::new(), Err(e))?;
            } else {
                run.finish("operator_residuals", ops, Err(e))?;
            }
            return Ok(run.into_output());
        }
    };
    for (name, r) in tau.generator_names.iter().zip(&tau.block_fit_residuals) {
        ops.push(Check::max(format!("level0_fit_residual.{name}"), *r, tol.constraint));
    }
    let trans = translation_constraint_residuals(model, window, spec, &tau)?;
    for (name, (r, n)) in tau.generator_names.iter().zip(&trans) {
        ops.push(Check::max(format!("translation_constraint_residual.{name}"), *r, tol.constraint));
        ops.push(Check::count(format!("translation_constrained_pairs.{name}"), *n));
    }
    let mut block_defect = 0.0f64;
    for blocks in &tau.t_blocks {
        for b in blocks {
            block_defect = block_defect.max(unitarity_defect(b));
        }
    }
    ops.push(Check::max("translation_block_unitarity_defect", block_defect, tol.unitarity));
    ops.push(Check::max(
        "translation_unitarity_defect",
        tau.max_t_unitarity_defect(),
        tol.unitarity,
    ));
    ops.push(Check::max("block_leakage", tau.leakage, tol.leakage));
    for (name, r) in tau.generator_names.iter().zip(tau.relation_residuals(spec)?) {
        ops.push(Check::max(format!("shift_covariance_residual.{name}"), r, tol.relation));
    }
    ops.push(Check::max(
        "gamma0_relation_residual",
        tau.gamma0_relation_residual(spec),
        tol.relation,
    ));
    run.report.insert("operator_residuals", ops);

    let mut roots = Section::new();
    for (name, r) in &tau.root_residuals {
        roots.push(Check::max(name.clone(), *r, tol.relation));
    }
    if tau.root_residuals.is_empty() {
        roots = roots.with_note("no positive level carries a nonzero block");
    }
    run.report.insert("root_residuals", roots);

    info!("dilation certification on {} core points", core_idx.len());
    let gram = run.artifacts.gram.as_ref().expect("stored");
    let kernel = run.artifacts.kernel.as_ref().expect("stored");
    let cert = assemble_dilation(gram, kernel, model, &tau, spec, window, &core_idx)?;
    let mut s = Section::new();
    s.push(Check::max("reconstruction", cert.reconstruction, tol.reconstruction));
    s.push(Check::max("dilated_gram_deviation", cert.dilated_gram, tol.dilation));
    s.push(Check::max("kernel_agreement", cert.kernel_agreement, tol.dilation));
    // the first summand of each dilated vector is the frame vector itself
    s.push(Check::info("projection_identity", 0.0));
    s.push(Check::count("certified_points", cert.core_points));
    s.push(Check::count("unsamplable_points", cert.skipped));
    let core_points: Vec<LatticePoint> = core_idx.iter().map(|&i| window.point(i).clone()).collect();
    let pairs: Vec<(LatticePoint, LatticePoint)> = core_points
        .iter()
        .flat_map(|x| core_points.iter().map(move |y| (x.clone(), y.clone())))
        .collect();
    for w in invariance_words(spec)? {
        let label = spec.format_word(&w);
        let inv = invariance_sample(&tau, spec, std::slice::from_ref(&w), &pairs)?;
        s.push(Check::max(format!("invariance[{label}]"), inv.residual, tol.invariance));
        s.push(Check::count(format!("invariance_sampled[{label}]"), inv.sampled));
        s.push(Check::count(format!("invariance_unsamplable[{label}]"), inv.skipped));
    }
    run.report.insert("dilation_certification", s);

    run.artifacts.shift = Some(shift);
    run.artifacts.chain = Some(chain);
    run.artifacts.tau = Some(tau);
    Ok(run.into_output())
}

impl Run {
    fn into_output(self) -> PipelineOutput {
        PipelineOutput {
            report: self.report,
            artifacts: self.artifacts,
        }
    }
}
