//! Run configuration, deterministic sampling and per-point check dispatch.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connection::{frame_bracket, riemann_oracle, AdaptedField};
use crate::deformed::{
    alpha_spread, beta_one_gap, build_deformed, deformed_axioms, diagnostics_4_14_17, theorem41_check,
};
use crate::error::{Error, Result};
use crate::framed::{df_checks, framed_axioms, FrameContext, FrameField, Stencil};
use crate::geometry::{validate_finsler_axioms, Family, FinslerSpec};
use crate::nijenhuis::{
    a_tensor_closed, a_tensor_generic, check_cr, d_eta, d_eta_components, flag_fit, flag_fit_with_mu,
    nijenhuis_closed, nijenhuis_generic, nijenhuis_structure_forms, nijenhuis_vv_printed, normality_residual,
    torsion_s, vv_nijenhuis_norm, PRINTED_SCALE,
};
use crate::point::PhasePoint;
use crate::report::{CheckRecord, CheckReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckId {
    FinslerAxioms,
    FramedAxioms,
    DfBasis,
    StructureIdentities,
    OracleEquivalence,
    BracketSpray,
    ATensor,
    NijenhuisDualPath,
    Torsion,
    Cr,
    FlagFit,
    Normality,
    StructureForms,
    DeformedAxioms,
    Theorem41,
    #[serde(rename = "diagnostics-4")]
    Diagnostics4,
}

impl CheckId {
    pub const ALL: [CheckId; 16] = [
        CheckId::FinslerAxioms,
        CheckId::FramedAxioms,
        CheckId::DfBasis,
        CheckId::StructureIdentities,
        CheckId::OracleEquivalence,
        CheckId::BracketSpray,
        CheckId::ATensor,
        CheckId::NijenhuisDualPath,
        CheckId::Torsion,
        CheckId::Cr,
        CheckId::FlagFit,
        CheckId::Normality,
        CheckId::StructureForms,
        CheckId::DeformedAxioms,
        CheckId::Theorem41,
        CheckId::Diagnostics4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::FinslerAxioms => "finsler-axioms",
            CheckId::FramedAxioms => "framed-axioms",
            CheckId::DfBasis => "df-basis",
            CheckId::StructureIdentities => "structure-identities",
            CheckId::OracleEquivalence => "oracle-equivalence",
            CheckId::BracketSpray => "bracket-spray",
            CheckId::ATensor => "a-tensor",
            CheckId::NijenhuisDualPath => "nijenhuis-dual-path",
            CheckId::Torsion => "torsion",
            CheckId::Cr => "cr",
            CheckId::FlagFit => "flag-fit",
            CheckId::Normality => "normality",
            CheckId::StructureForms => "structure-forms",
            CheckId::DeformedAxioms => "deformed-axioms",
            CheckId::Theorem41 => "theorem41",
            CheckId::Diagnostics4 => "diagnostics-4",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            CheckId::FinslerAxioms => "homogeneity, Euler identity, positive definiteness of g",
            CheckId::FramedAxioms => "framed f-structure and metric axioms for phi",
            CheckId::DfBasis => "rank and orthogonality of the D_F basis",
            CheckId::StructureIdentities => "y_i R^i_jk = 0, homogeneity of N",
            CheckId::OracleEquivalence => "spray curvature against the Levi-Civita contraction",
            CheckId::BracketSpray => "[Gamma, S] = S and frame brackets against finite differences",
            CheckId::ATensor => "A tensor closed form, eta annihilation",
            CheckId::NijenhuisDualPath => "closed-form N_Psi against finite-difference brackets",
            CheckId::Torsion => "S = N_Psi on D_F, d eta two ways",
            CheckId::Cr => "CR stability and Nijenhuis conditions on D_F",
            CheckId::FlagFit => "scalar flag curvature fit",
            CheckId::Normality => "D-normality of the vertical block",
            CheckId::StructureForms => "structural forms of N_Psi under scalar flag curvature",
            CheckId::DeformedAxioms => "framed axioms for the deformed structure",
            CheckId::Theorem41 => "hypotheses and conclusions of the beta theorem",
            CheckId::Diagnostics4 => "eigen conditions and the Euclidean obstruction",
        }
    }

    fn needs_stencil(self) -> bool {
        matches!(
            self,
            CheckId::BracketSpray | CheckId::ATensor | CheckId::NijenhuisDualPath | CheckId::Torsion | CheckId::Cr
        )
    }

    fn needs_beta(self) -> bool {
        matches!(self, CheckId::DeformedAxioms | CheckId::Theorem41 | CheckId::Diagnostics4)
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        CheckId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown check id '{s}'"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_jet")]
    pub jet_exact: f64,
    #[serde(default = "default_bracket")]
    pub bracket: f64,
}

fn default_jet() -> f64 {
    1e-8
}

fn default_bracket() -> f64 {
    1e-5
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            jet_exact: default_jet(),
            bracket: default_bracket(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec: FinslerSpec,
    #[serde(default = "default_points")]
    pub n_points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_betas")]
    pub beta_values: Vec<f64>,
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckId>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_points() -> usize {
    10
}

fn default_betas() -> Vec<f64> {
    vec![2.0]
}

fn default_checks() -> Vec<CheckId> {
    CheckId::ALL.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("finsler-cr-report")
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Spec(#[from] Error),
}

impl RunConfig {
    pub fn new(spec: FinslerSpec) -> Self {
        RunConfig {
            spec,
            n_points: default_points(),
            seed: 0,
            tolerances: Tolerances::default(),
            beta_values: default_betas(),
            checks: default_checks(),
            output: default_output(),
        }
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, ConfigError> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without [`RunConfig::validate`], for callers that apply
    /// overrides first. Unknown fields and check ids are still rejected.
    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if self.n_points == 0 {
            return Err(ConfigError::Invalid("n_points must be at least 1".into()));
        }
        let t = &self.tolerances;
        if !(t.jet_exact > 0.0 && t.bracket > 0.0) {
            return Err(ConfigError::Invalid("tolerances must be positive".into()));
        }
        if let Some(b) = self.beta_values.iter().find(|&&b| !(b > 0.5 && b.is_finite())) {
            return Err(ConfigError::Invalid(format!("beta = {b} must exceed 1/2")));
        }
        if self.checks.is_empty() {
            return Err(ConfigError::Invalid("no checks selected".into()));
        }
        self.spec.validate()?;
        Ok(())
    }
}

/// Point `index` of the stream keyed by `seed`: x uniform in the ball of
/// 80% of the chart radius, y with uniform direction and `|y|` uniform in
/// `[0.5, 2]`. Independent of how many other points are drawn.
pub fn sample_point(spec: &FinslerSpec, seed: u64, index: usize) -> Result<PhasePoint> {
    let m = spec.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let radius = 0.8 * spec.chart_radius();
    let x = unit_vector(&mut rng, m) * (radius * rng.gen::<f64>().powf(1.0 / m as f64));
    let y = unit_vector(&mut rng, m) * rng.gen_range(0.5..=2.0);
    let p = PhasePoint::new(x.as_slice().to_vec(), y.as_slice().to_vec())?;
    spec.check_point(&p)?;
    Ok(p)
}

pub fn sample_points(spec: &FinslerSpec, n: usize, seed: u64) -> Result<Vec<PhasePoint>> {
    (0..n).map(|i| sample_point(spec, seed, i)).collect()
}

fn unit_vector(rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
    loop {
        // rejection from the cube keeps the direction uniform
        let v = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..=1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Outcome of a run; `status` is 0 when every record passed or was skipped.
#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub report: CheckReport,
    pub notes: Vec<String>,
}

impl SuiteResult {
    pub fn status(&self) -> i32 {
        if self.report.all_passed() {
            0
        } else {
            1
        }
    }
}

pub fn run_suite(cfg: &RunConfig) -> std::result::Result<SuiteResult, ConfigError> {
    cfg.validate()?;
    let points = sample_points(&cfg.spec, cfg.n_points, cfg.seed)?;
    let per_point: Vec<(CheckReport, Option<f64>)> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let r = run_point(cfg, p);
            (r.0.at_point(i), r.1)
        })
        .collect();
    let mut report = CheckReport::new();
    let mut lambdas = Vec::new();
    for (r, lambda) in per_point {
        report.merge(r);
        lambdas.extend(lambda);
    }
    report.normalize();
    let mut notes = vec![format!(
        "{}: {} points, seed {}",
        cfg.spec.label(),
        cfg.n_points,
        cfg.seed
    )];
    if !lambdas.is_empty() {
        let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        notes.push(format!("fitted flag curvature lambda in [{lo:.9}, {hi:.9}]"));
    }
    Ok(SuiteResult { report, notes })
}

/// All selected checks at one point; failures to evaluate become failing
/// records. Also returns the fitted λ when flag-fit ran.
pub fn run_point(cfg: &RunConfig, p: &PhasePoint) -> (CheckReport, Option<f64>) {
    let mut report = CheckReport::new();
    let mut lambda = None;
    let stencil = if cfg.checks.iter().any(|c| c.needs_stencil()) {
        Some(Stencil::new(&cfg.spec, p))
    } else {
        None
    };
    let owned;
    let ctx = match &stencil {
        Some(Ok(st)) => Ok(&st.center),
        Some(Err(e)) => Err(e.clone()),
        None => {
            owned = FrameContext::new(&cfg.spec, p);
            owned.as_ref().map_err(|e| e.clone())
        }
    };
    for &id in &cfg.checks {
        let betas: Vec<Option<f64>> = if id.needs_beta() {
            cfg.beta_values.iter().map(|&b| Some(b)).collect()
        } else {
            vec![None]
        };
        for beta in betas {
            let result = match (&ctx, &stencil) {
                (Err(e), _) => Err(e.clone()),
                (Ok(ctx), st) => {
                    let st = st.as_ref().and_then(|s| s.as_ref().ok());
                    run_check(id, cfg, p, ctx, st, beta, &mut lambda)
                }
            };
            let suffix = beta.map(|b| format!("@beta={b}")).unwrap_or_default();
            match result {
                Ok(r) => {
                    for mut rec in r.records().iter().cloned() {
                        rec.check_id = format!("{}{suffix}", rec.check_id);
                        report.push(rec);
                    }
                }
                Err(_) => {
                    // NaN never passes
                    report.push(CheckRecord::new(format!("{id}.evaluation{suffix}"), f64::NAN, 0.0));
                }
            }
        }
    }
    (report, lambda)
}

fn run_check(
    id: CheckId,
    cfg: &RunConfig,
    p: &PhasePoint,
    ctx: &FrameContext,
    st: Option<&Stencil>,
    beta: Option<f64>,
    lambda: &mut Option<f64>,
) -> Result<CheckReport> {
    let tj = cfg.tolerances.jet_exact;
    let tb = cfg.tolerances.bracket;
    let st = || st.ok_or(Error::InvalidPoint("finite-difference stencil unavailable".into()));
    let beta = beta.unwrap_or(1.0);
    match id {
        CheckId::FinslerAxioms => validate_finsler_axioms(&cfg.spec, p, 2.0, tj),
        CheckId::FramedAxioms => Ok(framed_axioms(ctx, tj)),
        CheckId::DfBasis => Ok(df_checks(ctx, tj)),
        CheckId::StructureIdentities => structure_identities(cfg, p, ctx, tj),
        CheckId::OracleEquivalence => oracle_equivalence(&cfg.spec, p, ctx),
        CheckId::BracketSpray => bracket_spray(st()?, tb),
        CheckId::ATensor => a_tensor_checks(st()?, tj, tb),
        CheckId::NijenhuisDualPath => nijenhuis_dual(st()?, tj, tb),
        CheckId::Torsion => torsion_checks(st()?, tb),
        CheckId::Cr => check_cr(st()?, tj, tb),
        CheckId::FlagFit => {
            let (r, l) = flag_checks(&cfg.spec, ctx, tj);
            *lambda = Some(l);
            Ok(r)
        }
        CheckId::Normality => Ok(normality_checks(ctx)),
        CheckId::StructureForms => Ok(nijenhuis_structure_forms(ctx, tj)),
        CheckId::DeformedAxioms => {
            let d = build_deformed(ctx, beta)?;
            let mut r = deformed_axioms(ctx, &d, tj);
            r.check("deformed.beta_one", beta_one_gap(ctx)?, 1e-12);
            r.check("deformed.alpha_spread", alpha_spread(ctx, beta, &[0.5, 1.0, 2.0])?, 1e-12);
            Ok(r)
        }
        CheckId::Theorem41 => theorem41_check(ctx, beta, tj),
        CheckId::Diagnostics4 => diagnostics_4_14_17(ctx, beta, tb),
    }
}

fn structure_identities(cfg: &RunConfig, p: &PhasePoint, ctx: &FrameContext, tol: f64) -> Result<CheckReport> {
    let mut r = CheckReport::new();
    let c = ctx.geometry.curvature();
    let y_low = &ctx.frame.y_low;
    let m = ctx.frame.dim;
    let mut yr: f64 = 0.0;
    for j in 0..m {
        for k in 0..m {
            let s: f64 = (0..m).map(|i| y_low[i] * c.r.get(i, j, k)).sum();
            yr = yr.max(s.abs());
        }
    }
    r.check("identity.y_r", yr / (1.0 + c.r.norm() * y_low.norm()), tol);
    let n = &ctx.geometry.connection.n;
    let scaled = FrameContext::connection_only(&cfg.spec, &p.scale_y(2.0)?)?;
    let hom = (&scaled.geometry.connection.n - n * 2.0).amax() / (1.0 + n.amax());
    r.check("identity.n_homogeneity", hom, tol);
    r.check("identity.phi_y", (&c.phi * &ctx.frame.y).amax() / (1.0 + c.phi.amax() * ctx.frame.y.amax()), tol);
    Ok(r)
}

fn oracle_equivalence(spec: &FinslerSpec, p: &PhasePoint, ctx: &FrameContext) -> Result<CheckReport> {
    let mut r = CheckReport::new();
    let tol = 1e-7;
    if !spec.is_riemannian() {
        r.push(CheckRecord::skipped(
            "oracle.curvature",
            tol,
            format!("{} has no Levi-Civita oracle", spec.family.name()),
        ));
        return Ok(r);
    }
    let expected = riemann_oracle(spec, p)?;
    let diff = ctx.geometry.curvature().r.sub(&expected).norm();
    let rel = if diff == 0.0 { 0.0 } else { diff / expected.norm().max(f64::MIN_POSITIVE) };
    r.check("oracle.curvature", rel, tol);
    Ok(r)
}

fn bracket_spray(st: &Stencil, tol: f64) -> Result<CheckReport> {
    let ctx = &st.center;
    let m = ctx.frame.dim;
    let mut r = CheckReport::new();
    let gs = st.bracket(&FrameField::Liouville, &FrameField::Spray)?;
    let s = &ctx.structure.xi1;
    r.check("bracket.liouville_spray", (gs - s).amax() / (1.0 + s.amax()), tol);
    let mut worst: f64 = 0.0;
    for j in 0..m {
        for k in 0..m {
            for (a, fa) in [(AdaptedField::Horizontal(j), FrameField::Delta(j)), (AdaptedField::Vertical(j), FrameField::Del(j))] {
                for (b, fb) in [(AdaptedField::Horizontal(k), FrameField::Delta(k)), (AdaptedField::Vertical(k), FrameField::Del(k))] {
                    let exact = frame_bracket(&ctx.geometry, a, b);
                    let fd = st.bracket(&fa, &fb)?;
                    worst = worst.max((fd - &exact).amax() / (1.0 + exact.amax()));
                }
            }
        }
    }
    r.check("bracket.frame", worst, tol);
    Ok(r)
}

fn frame_fields(m: usize) -> Vec<FrameField> {
    (0..m).map(FrameField::Delta).chain((0..m).map(FrameField::Del)).collect()
}

fn a_tensor_checks(st: &Stencil, tj: f64, tb: f64) -> Result<CheckReport> {
    let ctx = &st.center;
    let fields = frame_fields(ctx.frame.dim);
    let mut eta: f64 = 0.0;
    let mut dual: f64 = 0.0;
    for x in &fields {
        for y in &fields {
            let (xv, yv) = (x.eval(ctx)?, y.eval(ctx)?);
            let closed = a_tensor_closed(ctx, &xv, &yv);
            for a in 1..=2 {
                eta = eta.max(ctx.structure.eta(a).dot(&closed).abs() / (1.0 + closed.amax()));
            }
            let generic = a_tensor_generic(st, x, y)?;
            dual = dual.max((generic - &closed).amax() / (1.0 + closed.amax()));
        }
    }
    let mut r = CheckReport::new();
    r.check("a.eta_annihilation", eta, tj);
    r.check("a.dual_path", dual, tb);
    Ok(r)
}

fn nijenhuis_dual(st: &Stencil, tj: f64, tb: f64) -> Result<CheckReport> {
    let ctx = &st.center;
    let m = ctx.frame.dim;
    let mut pairs: Vec<(FrameField, FrameField)> = Vec::new();
    for a in 0..m {
        pairs.push((FrameField::Liouville, FrameField::V(a)));
        for b in a + 1..m {
            pairs.push((FrameField::V(a), FrameField::V(b)));
            pairs.push((FrameField::Delta(a), FrameField::Delta(b)));
        }
        for b in 0..m {
            pairs.push((FrameField::Delta(a), FrameField::Del(b)));
        }
    }
    let mut dual: f64 = 0.0;
    for (x, y) in &pairs {
        let closed = nijenhuis_closed(ctx, &x.eval(ctx)?, &y.eval(ctx)?);
        let generic = nijenhuis_generic(st, x, y)?;
        dual = dual.max((generic - &closed).amax() / (1.0 + closed.amax()));
    }
    let mut printed: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            let closed = nijenhuis_closed(ctx, &ctx.frame.v_field(a), &ctx.frame.v_field(b));
            let p = nijenhuis_vv_printed(ctx, a, b) * PRINTED_SCALE;
            printed = printed.max((closed - &p).amax() / (1.0 + p.amax()));
        }
    }
    let mut r = CheckReport::new();
    r.check("nijenhuis.dual_path", dual, tb);
    r.check("nijenhuis.printed_vv", printed, tj);
    Ok(r)
}

fn torsion_checks(st: &Stencil, tol: f64) -> Result<CheckReport> {
    let ctx = &st.center;
    let fields = crate::framed::df_fields(&ctx.frame);
    let mut s_gap: f64 = 0.0;
    for (i, x) in fields.iter().enumerate() {
        for y in &fields[i + 1..] {
            let s = torsion_s(st, x, y)?;
            let n = nijenhuis_closed(ctx, &x.eval(ctx)?, &y.eval(ctx)?);
            s_gap = s_gap.max((s - &n).amax() / (1.0 + n.amax()));
        }
    }
    let m = ctx.frame.dim;
    let mut deta: f64 = 0.0;
    for a in 1..=2 {
        for i in 0..m {
            for j in 0..m {
                let (x, y) = (FrameField::H(i), FrameField::V(j));
                let def = d_eta(st, a, &x, &y)?;
                let comp = d_eta_components(st, a, &x.eval(ctx)?, &y.eval(ctx)?)?;
                deta = deta.max((def - comp).abs() / (1.0 + comp.abs()));
            }
        }
    }
    let mut r = CheckReport::new();
    r.check("torsion.s_equals_n", s_gap, tol);
    r.check("torsion.d_eta_dual", deta, tol);
    Ok(r)
}

fn flag_checks(spec: &FinslerSpec, ctx: &FrameContext, tol: f64) -> (CheckReport, f64) {
    let geom = &ctx.geometry;
    let fit = flag_fit(geom, tol);
    let mut r = CheckReport::new();
    r.check("flag.misfit", fit.residual, tol);
    match fit.phi_residual {
        Some(v) => r.check("flag.phi", v, tol),
        None => r.push(CheckRecord::skipped("flag.phi", tol, "flag fit rejected")),
    }
    let fam = flag_fit_with_mu(geom, 2.0, tol);
    r.check("flag.family", fam.family_residual.unwrap_or(f64::NAN), tol);
    r.check("flag.compatibility", fam.compatibility_residual.unwrap_or(f64::NAN), tol);
    if let Family::RiemannianSpaceForm { curvature } = spec.family {
        r.check("flag.lambda_vs_curvature", (fit.lambda - curvature).abs(), 1e-6);
    }
    (r, fit.lambda)
}

fn normality_checks(ctx: &FrameContext) -> CheckReport {
    let tol = 1e-6;
    let normal = normality_residual(&ctx.geometry);
    let vv = vv_nijenhuis_norm(ctx);
    let mut r = CheckReport::new();
    r.check("normality.residual", normal, tol);
    r.check("normality.equivalence", if (normal < tol) == (vv < tol) { 0.0 } else { 1.0 }, 0.5);
    r
}
