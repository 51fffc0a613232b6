//! The spec document format: TOML with one `[[run]]` table per run plus
//! optional `checks`, `[output]` and `[[slope_window]]` sections. Unknown
//! keys are rejected; omitted keys take documented defaults and are echoed
//! back by [`render_spec`], so `parse_spec(render_spec(s)) == s`.
//!
//! ```toml
//! checks = ["grad_bound", "theorem_bound"]
//!
//! [output]
//! dir = "out"
//! formats = ["csv", "json"]
//!
//! [[slope_window]]
//! t_min = 10
//! t_max = 1000
//!
//! [[run]]
//! algorithm = "md"                  # md | amd | omd | mp | smd
//! objective = "rank_one_quadratic"  # logistic_kernel | logistic_regression |
//!                                   # rank_one_quadratic | appendix_mix
//! geometry = "entropy_simplex"      # entropy_simplex | euclidean_ball
//! n = 20                            # dimension (rank_one/appendix; optional
//!                                   # for logistic kinds, where w sets it)
//! T = 1000
//! eta = "paper_default"             # or a number subject to the cap
//! seed = 0                          # smd only; seeds = "0..19" sweeps
//! # w = [...], b = 0.0, c = 1.0     # logistic parameters
//! # radius = 2.0, center = [...]    # euclidean_ball parameters
//! # [run.noise]                     # smd only
//! # sigma_coeffs = [0.5, 0.5]
//! # shape = "coordinate_pair"       # or sign_flip
//! # [run.link]                      # link override (family-specific keys)
//! # family = "affine"; l0 = 1e-12; l1 = 2.0
//! ```

use serde::{Deserialize, Serialize};

use crate::geometry::Geometry;
use crate::noise::{NoiseModel, NoiseShape};
use crate::objectives::{Objective, ObjectiveKind};
use crate::optimizers::{Algorithm, EtaName, EtaPolicy, RunConfig};
use crate::smoothness::LinkFunction;

use super::{CheckKind, ExperimentSpec, HResult, HarnessError, OutputFormat, OutputSpec};

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    checks: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<RawOutput>,
    #[serde(default, rename = "slope_window", skip_serializing_if = "Vec::is_empty")]
    slope_windows: Vec<RawWindow>,
    #[serde(default, rename = "run", skip_serializing_if = "Vec::is_empty")]
    runs: Vec<RawRun>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    formats: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWindow {
    t_min: u64,
    t_max: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
enum RawEta {
    Name(String),
    Value(f64),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    algorithm: String,
    objective: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    geometry: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(rename = "T")]
    t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<RawEta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seeds: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise: Option<RawNoise>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    link: Option<RawLink>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    sigma_coeffs: Vec<f64>,
    shape: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
}

/// Parse and validate a spec document.
pub fn parse_spec(text: &str) -> HResult<ExperimentSpec> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
    build_spec(raw)
}

/// Canonical document for a spec, with every default filled in explicitly.
pub fn render_spec(spec: &ExperimentSpec) -> String {
    let raw = RawSpec {
        checks: spec.checks.iter().map(|c| c.id().to_string()).collect(),
        output: Some(RawOutput {
            dir: Some(spec.output.dir.to_string_lossy().into_owned()),
            formats: Some(
                spec.output
                    .formats
                    .iter()
                    .map(|f| match f {
                        OutputFormat::Csv => "csv".to_string(),
                        OutputFormat::Json => "json".to_string(),
                    })
                    .collect(),
            ),
        }),
        slope_windows: spec
            .slope_windows
            .iter()
            .map(|&(t_min, t_max)| RawWindow { t_min, t_max })
            .collect(),
        runs: spec.runs.iter().map(render_run).collect(),
    };
    toml::to_string_pretty(&raw).expect("spec serialization cannot fail")
}

fn render_run(cfg: &RunConfig) -> RawRun {
    let (geometry, radius, center) = match &cfg.geometry.domain {
        crate::geometry::Domain::Simplex { .. } => ("entropy_simplex".to_string(), None, None),
        crate::geometry::Domain::Ball { radius, center, .. } => {
            ("euclidean_ball".to_string(), Some(*radius), Some(center.clone()))
        }
    };
    let (w, b, c, n) = match &cfg.objective.kind {
        ObjectiveKind::LogisticKernel { w, b, c } => (Some(w.clone()), Some(*b), Some(*c), None),
        ObjectiveKind::LogisticRegression { w, c } => (Some(w.clone()), None, Some(*c), None),
        ObjectiveKind::RankOneQuadratic { n } => (None, None, None, Some(*n)),
        ObjectiveKind::AppendixMix { n } => (None, None, None, Some(*n)),
    };
    RawRun {
        algorithm: cfg.algorithm.id().to_string(),
        objective: cfg.objective.preset_id().to_string(),
        geometry: Some(geometry),
        n,
        t: cfg.t_max,
        eta: Some(match cfg.eta_policy {
            EtaPolicy::Named(EtaName::PaperDefault) => RawEta::Name("paper_default".to_string()),
            EtaPolicy::Explicit(v) => RawEta::Value(v),
        }),
        seed: Some(cfg.seed),
        seeds: None,
        radius,
        center,
        w,
        b,
        c,
        noise: cfg.noise.as_ref().map(|nm| RawNoise {
            sigma_coeffs: nm.sigma_coeffs.clone(),
            shape: match nm.shape {
                NoiseShape::SignFlip => "sign_flip".to_string(),
                NoiseShape::CoordinatePair => "coordinate_pair".to_string(),
            },
        }),
        link: cfg.link.as_ref().map(render_link),
    }
}

fn render_link(link: &LinkFunction) -> RawLink {
    let empty = RawLink {
        family: String::new(),
        l: None,
        l0: None,
        l1: None,
        c: None,
        beta: None,
    };
    match link {
        LinkFunction::Constant { l } => RawLink { family: "constant".into(), l: Some(*l), ..empty },
        LinkFunction::Affine { l0, l1 } => RawLink {
            family: "affine".into(),
            l0: Some(*l0),
            l1: Some(*l1),
            ..empty
        },
        LinkFunction::Power { c, beta } => RawLink {
            family: "power".into(),
            c: Some(*c),
            beta: Some(*beta),
            ..empty
        },
        LinkFunction::Tabulated { .. } => {
            unreachable!("tabulated links are not expressible in spec documents")
        }
    }
}

fn build_spec(raw: RawSpec) -> HResult<ExperimentSpec> {
    let mut checks = Vec::new();
    for c in &raw.checks {
        let kind = CheckKind::from_id(c)
            .ok_or_else(|| HarnessError::Validation(format!("unknown check '{c}'")))?;
        if !checks.contains(&kind) {
            checks.push(kind);
        }
    }

    let output = match raw.output {
        None => OutputSpec::default(),
        Some(o) => {
            let mut formats = Vec::new();
            for f in o.formats.unwrap_or_else(|| vec!["csv".into(), "json".into()]) {
                let fmt = match f.as_str() {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    other => {
                        return Err(HarnessError::Validation(format!("unknown output format '{other}'")))
                    }
                };
                if !formats.contains(&fmt) {
                    formats.push(fmt);
                }
            }
            OutputSpec {
                dir: o.dir.unwrap_or_else(|| "out".to_string()).into(),
                formats,
            }
        }
    };

    let mut slope_windows = Vec::new();
    for w in &raw.slope_windows {
        if w.t_min < 1 || w.t_max <= w.t_min {
            return Err(HarnessError::Validation(format!(
                "slope window needs 1 <= t_min < t_max, got [{}, {}]",
                w.t_min, w.t_max
            )));
        }
        slope_windows.push((w.t_min, w.t_max));
    }

    let mut runs = Vec::new();
    for (idx, r) in raw.runs.iter().enumerate() {
        for cfg in expand_run(r).map_err(|e| prefix_run(idx, e))? {
            runs.push(cfg);
        }
    }

    let spec = ExperimentSpec { runs, checks, output, slope_windows };
    validate_applicability(&spec)?;
    Ok(spec)
}

fn prefix_run(idx: usize, e: HarnessError) -> HarnessError {
    match e {
        HarnessError::Validation(m) => HarnessError::Validation(format!("run {idx}: {m}")),
        other => other,
    }
}

fn expand_run(raw: &RawRun) -> HResult<Vec<RunConfig>> {
    let algorithm = match raw.algorithm.as_str() {
        "md" => Algorithm::Md,
        "amd" => Algorithm::Amd,
        "omd" => Algorithm::Omd,
        "mp" => Algorithm::Mp,
        "smd" => Algorithm::Smd,
        other => return Err(HarnessError::Validation(format!("unknown algorithm '{other}'"))),
    };
    if raw.t < 1 {
        return Err(HarnessError::Validation("T must be >= 1".into()));
    }

    let objective = build_objective(raw)?;
    let n = objective_dim(&objective);

    let geometry = match raw.geometry.as_deref().unwrap_or("entropy_simplex") {
        "entropy_simplex" => {
            if raw.radius.is_some() || raw.center.is_some() {
                return Err(HarnessError::Validation(
                    "radius/center only apply to euclidean_ball".into(),
                ));
            }
            Geometry::entropy_simplex(n)
        }
        "euclidean_ball" => {
            let radius = raw.radius.ok_or_else(|| {
                HarnessError::Validation("euclidean_ball needs a radius".into())
            })?;
            if !(radius >= 0.0) || !radius.is_finite() {
                return Err(HarnessError::Validation("radius must be finite and >= 0".into()));
            }
            let center = raw.center.clone().unwrap_or_else(|| vec![0.0; n]);
            if center.len() != n {
                return Err(HarnessError::Validation(format!(
                    "center has dimension {}, objective has {n}",
                    center.len()
                )));
            }
            if center.iter().any(|v| !v.is_finite()) {
                return Err(HarnessError::Validation("center must be finite".into()));
            }
            Geometry::euclidean_ball(radius, center)
        }
        other => return Err(HarnessError::Validation(format!("unknown geometry '{other}'"))),
    };

    let eta_policy = match &raw.eta {
        None => EtaPolicy::paper_default(),
        Some(RawEta::Name(s)) if s == "paper_default" => EtaPolicy::paper_default(),
        Some(RawEta::Name(s)) => {
            return Err(HarnessError::Validation(format!("unknown eta policy '{s}'")))
        }
        Some(RawEta::Value(v)) => {
            if !(*v > 0.0) || !v.is_finite() {
                return Err(HarnessError::Validation("explicit eta must be positive and finite".into()));
            }
            EtaPolicy::Explicit(*v)
        }
    };

    let noise = match &raw.noise {
        None => None,
        Some(rn) => {
            if algorithm != Algorithm::Smd {
                return Err(HarnessError::Validation("noise applies to smd runs only".into()));
            }
            let shape = match rn.shape.as_str() {
                "sign_flip" => NoiseShape::SignFlip,
                "coordinate_pair" => NoiseShape::CoordinatePair,
                other => {
                    return Err(HarnessError::Validation(format!("unknown noise shape '{other}'")))
                }
            };
            Some(NoiseModel::new(rn.sigma_coeffs.clone(), shape).map_err(HarnessError::Core)?)
        }
    };
    if algorithm == Algorithm::Smd && noise.is_none() {
        return Err(HarnessError::Validation("smd runs need a [run.noise] table".into()));
    }

    let link = raw.link.as_ref().map(build_link).transpose()?;

    let seeds: Vec<u64> = match (&raw.seeds, raw.seed) {
        (Some(_), Some(_)) => {
            return Err(HarnessError::Validation("give either seed or seeds, not both".into()))
        }
        (Some(range), None) => {
            if algorithm != Algorithm::Smd {
                return Err(HarnessError::Validation("seed sweeps apply to smd runs only".into()));
            }
            parse_seed_range(range)?
        }
        (None, Some(s)) => vec![s],
        (None, None) => vec![0],
    };

    Ok(seeds
        .into_iter()
        .map(|seed| RunConfig {
            algorithm,
            objective: objective.clone(),
            geometry: geometry.clone(),
            t_max: raw.t,
            eta_policy,
            seed,
            noise: noise.clone(),
            link: link.clone(),
        })
        .collect())
}

fn parse_seed_range(s: &str) -> HResult<Vec<u64>> {
    let parts: Vec<&str> = s.split("..").collect();
    if parts.len() != 2 {
        return Err(HarnessError::Validation(format!(
            "seeds must look like \"a..b\" (inclusive), got '{s}'"
        )));
    }
    let a: u64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| HarnessError::Validation(format!("bad seed range start '{}'", parts[0])))?;
    let b: u64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| HarnessError::Validation(format!("bad seed range end '{}'", parts[1])))?;
    if b < a {
        return Err(HarnessError::Validation("seed range end precedes start".into()));
    }
    if b - a >= 1_000_000 {
        return Err(HarnessError::Validation("seed sweeps are capped at 1e6 runs".into()));
    }
    Ok((a..=b).collect())
}

fn build_objective(raw: &RawRun) -> HResult<Objective> {
    let need_w = || -> HResult<Vec<f64>> {
        let w = raw
            .w
            .clone()
            .ok_or_else(|| HarnessError::Validation(format!("objective '{}' needs w", raw.objective)))?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(HarnessError::Validation("w must be finite".into()));
        }
        Ok(w)
    };
    let c = raw.c.unwrap_or(1.0);
    let b = raw.b.unwrap_or(0.0);
    if c == 0.0 || !c.is_finite() || !b.is_finite() {
        return Err(HarnessError::Validation("need finite b and nonzero finite c".into()));
    }
    match raw.objective.as_str() {
        "logistic_kernel" => {
            let w = need_w()?;
            check_dim_consistency(raw, w.len())?;
            Ok(Objective::logistic_kernel(w, b, c))
        }
        "logistic_regression" => {
            if raw.b.is_some() {
                return Err(HarnessError::Validation("logistic_regression has no b parameter".into()));
            }
            let w = need_w()?;
            check_dim_consistency(raw, w.len())?;
            Ok(Objective::logistic_regression(w, c))
        }
        "rank_one_quadratic" | "appendix_mix" => {
            if raw.w.is_some() || raw.b.is_some() || raw.c.is_some() {
                return Err(HarnessError::Validation(format!(
                    "objective '{}' takes only n",
                    raw.objective
                )));
            }
            let n = raw.n.ok_or_else(|| {
                HarnessError::Validation(format!("objective '{}' needs n", raw.objective))
            })?;
            if n < 2 {
                return Err(HarnessError::Validation("n must be >= 2".into()));
            }
            Ok(if raw.objective == "rank_one_quadratic" {
                Objective::rank_one_quadratic(n)
            } else {
                Objective::appendix_mix(n)
            })
        }
        other => Err(HarnessError::Validation(format!("unknown objective '{other}'"))),
    }
}

fn check_dim_consistency(raw: &RawRun, dim: usize) -> HResult<()> {
    if let Some(n) = raw.n {
        if n != dim {
            return Err(HarnessError::Validation(format!(
                "n = {n} conflicts with w of length {dim}"
            )));
        }
    }
    if dim == 0 {
        return Err(HarnessError::Validation("w must be non-empty".into()));
    }
    Ok(())
}

fn build_link(raw: &RawLink) -> HResult<LinkFunction> {
    let get = |v: Option<f64>, key: &str| {
        v.ok_or_else(|| HarnessError::Validation(format!("link family '{}' needs {key}", raw.family)))
    };
    let link = match raw.family.as_str() {
        "constant" => LinkFunction::constant(get(raw.l, "l")?),
        "affine" => LinkFunction::affine(get(raw.l0, "l0")?, get(raw.l1, "l1")?),
        "power" => LinkFunction::power(get(raw.c, "c")?, get(raw.beta, "beta")?),
        other => return Err(HarnessError::Validation(format!("unknown link family '{other}'"))),
    };
    link.map_err(HarnessError::Core)
}

fn objective_dim(obj: &Objective) -> usize {
    use crate::oracle::Oracle;
    obj.dim()
}

/// Every requested check must be applicable to at least one run.
fn validate_applicability(spec: &ExperimentSpec) -> HResult<()> {
    for check in &spec.checks {
        let applicable = spec.runs.iter().any(|r| check_applicable(*check, r));
        if !applicable {
            return Err(HarnessError::Validation(format!(
                "check '{}' applies to no run in the spec",
                check.id()
            )));
        }
    }
    Ok(())
}

pub(super) fn check_applicable(check: CheckKind, cfg: &RunConfig) -> bool {
    let has_link = cfg.link.is_some()
        || cfg.objective.analytic_link(cfg.geometry.norm_pair).is_ok();
    match check {
        CheckKind::GradBound => true,
        CheckKind::Descent => matches!(cfg.algorithm, Algorithm::Md | Algorithm::Mp),
        CheckKind::ESeq => cfg.algorithm == Algorithm::Amd,
        CheckKind::TheoremBound => cfg.algorithm != Algorithm::Smd,
        CheckKind::SelfBounding | CheckKind::LocalSmooth => has_link,
        CheckKind::ProxOracle => cfg.geometry.dim() <= 5,
    }
}
