use std::fs;
use std::path::{Path, PathBuf};

use evalcomplexity::analysis::{
    check_crs_membership, check_malpha_membership, estimate_smoothness, fit_complexity_slope, matching_setup,
    verify_against, ClassTrace, CrsParams, KappaLambda, LowerBoundReport, MAlphaParams, MatchOptions, Sampling,
};
use evalcomplexity::generators::{
    gen_crs, gen_malpha, gen_newton2d, gen_sd, CrsConfig, Family, GroundTruthTrace, MAlphaConfig, Newton2dConfig,
};
use evalcomplexity::hermite::PiecewiseObjective;
use evalcomplexity::io::{
    method_trace_csv, objective_to_json, read_class_trace, read_objective, write_atomic, write_ground_truth,
    ObjectiveMeta,
};
use evalcomplexity::methods::{run as run_method, MethodKind};
use evalcomplexity::parallel::Execution;
use evalcomplexity::plot::{render_svg, PlotOptions};
use evalcomplexity::{Error, Result};
use serde_json::json;

use crate::settings::Settings;
use crate::{FamilyArgs, GenerateArgs, PlotArgs, RunArgs, SweepArgs, VerifyArgs};

pub enum Verdict {
    Pass,
    Mismatch,
}

impl Verdict {
    fn from(passed: bool) -> Self {
        if passed {
            Verdict::Pass
        } else {
            Verdict::Mismatch
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        return 3;
    }
    match e {
        Error::InvalidConfig(_)
        | Error::InvalidInput(_)
        | Error::Parse(_)
        | Error::UnsupportedPairing { .. }
        | Error::TooFewPoints { .. }
        | Error::DimensionMismatch { .. }
        | Error::IncompleteTrace(_)
        | Error::Json(_)
        | Error::Csv(_) => 2,
        _ => 1,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum LambdaPreset {
    Newton,
    Figure,
    Regularization,
}

/// Resolved family choice with its generator parameters.
struct FamilyChoice {
    family: Family,
    preset: LambdaPreset,
    sigma: f64,
    sigma_bar: f64,
    kappa_rg: f64,
    eta: f64,
}

impl FamilyChoice {
    fn resolve(args: &FamilyArgs, s: &Settings) -> Result<Self> {
        let family: Family = s.require(args.family.clone(), "family")?.parse()?;
        let preset = match s.pick(args.lambda_preset.clone(), "lambda_preset")?.as_deref() {
            None | Some("newton") => LambdaPreset::Newton,
            Some("figure") => LambdaPreset::Figure,
            Some("regularization") => LambdaPreset::Regularization,
            Some(other) => return Err(Error::InvalidConfig(format!("unknown lambda preset `{other}`"))),
        };
        if preset != LambdaPreset::Newton && family != Family::MAlpha {
            return Err(Error::InvalidConfig("lambda presets apply to the malpha family only".into()));
        }
        Ok(Self {
            family,
            preset,
            sigma: s.pick(args.sigma, "sigma")?.unwrap_or(1.0),
            sigma_bar: s.pick(args.sigma_bar, "sigma_bar")?.unwrap_or(1.0),
            kappa_rg: s.pick(args.kappa_rg, "kappa_rg")?.unwrap_or(0.0),
            eta: s.pick(args.eta, "eta")?.unwrap_or(0.5),
        })
    }

    fn match_options(&self) -> MatchOptions {
        MatchOptions {
            figure_preset: self.preset == LambdaPreset::Figure,
            sigma: self.sigma,
            crs_sigma_bar: self.sigma_bar,
            crs_kappa_rg: self.kappa_rg,
            crs_eta: self.eta,
        }
    }

    fn preset_name(&self) -> Option<String> {
        match self.preset {
            LambdaPreset::Newton => None,
            LambdaPreset::Figure => Some("figure".into()),
            LambdaPreset::Regularization => Some(format!("regularization(sigma={})", self.sigma)),
        }
    }

    fn generate(&self, eps: f64, alpha: f64) -> Result<(PiecewiseObjective, GroundTruthTrace)> {
        match self.family {
            Family::MAlpha => {
                let cfg = match self.preset {
                    LambdaPreset::Newton => MAlphaConfig::new(eps, alpha),
                    LambdaPreset::Figure => MAlphaConfig::figure_preset(eps, alpha),
                    LambdaPreset::Regularization => MAlphaConfig::regularization_preset(eps, alpha, self.sigma),
                };
                gen_malpha(&MAlphaConfig { kappa_rg: self.kappa_rg, ..cfg })
            }
            Family::Newton2d => gen_newton2d(&Newton2dConfig { kappa_rg: self.kappa_rg, ..Newton2dConfig::new(eps) }),
            Family::SteepestDescent => gen_sd(eps),
            Family::Crs => gen_crs(&CrsConfig::new(eps, self.sigma_bar, self.kappa_rg, self.eta)),
        }
    }
}

fn out_dir(flag: &Option<PathBuf>, s: &Settings) -> Result<PathBuf> {
    let dir = s.pick(flag.clone(), "out")?.unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn meta_for(trace: &GroundTruthTrace, choice: &FamilyChoice) -> ObjectiveMeta {
    ObjectiveMeta { preset: choice.preset_name(), ..ObjectiveMeta::from_trace(trace) }
}

fn figure(obj: &PiecewiseObjective, meta: Option<&ObjectiveMeta>) -> Result<String> {
    let opts = PlotOptions {
        eps: meta.map(|m| m.eps),
        title: meta.map(|m| format!("{} eps={} alpha={}", m.family, m.eps, m.alpha)),
        ..PlotOptions::default()
    };
    render_svg(obj, &opts)
}

pub fn generate(args: &GenerateArgs, s: &Settings) -> Result<Verdict> {
    let choice = FamilyChoice::resolve(&args.family, s)?;
    let eps = s.require(args.eps, "eps")?;
    let alpha = s.pick(args.alpha, "alpha")?.unwrap_or(1.0);
    let (obj, trace) = choice.generate(eps, choice.family.effective_alpha(alpha))?;
    let dir = out_dir(&args.out, s)?;
    let meta = meta_for(&trace, &choice);
    write_atomic(&dir.join("fn.json"), objective_to_json(&obj, Some(&meta))?.as_bytes())?;
    let trace_path = s.pick(args.trace.clone(), "trace")?.unwrap_or_else(|| dir.join("trace.csv"));
    write_ground_truth(&trace_path, &trace)?;
    if let Some(svg) = s.pick(args.svg.clone(), "svg")? {
        write_atomic(&svg, figure(&obj, Some(&meta))?.as_bytes())?;
    }
    println!(
        "{} eps={} alpha={}: k_target={} segments={}",
        choice.family,
        eps,
        trace.alpha,
        trace.k_target,
        obj.segments().len()
    );
    Ok(Verdict::Pass)
}

fn summary(report: &LowerBoundReport) -> String {
    format!(
        "{} on {} eps={} alpha={}: {} iterations (predicted {}), final gradient norm {} [{}]",
        report.method,
        report.family,
        report.eps,
        report.alpha,
        report.termination_index,
        report.predicted,
        report.final_gradient_norm,
        if report.passed { "pass" } else { "MISMATCH" }
    )
}

pub fn run(args: &RunArgs, s: &Settings) -> Result<Verdict> {
    let choice = FamilyChoice::resolve(&args.family, s)?;
    let method: MethodKind = s.require(args.method.clone(), "method")?.parse()?;
    let eps = s.require(args.eps, "eps")?;
    let alpha = s.pick(args.alpha, "alpha")?.unwrap_or(1.0);
    let mut setup = matching_setup(choice.family, method, eps, alpha, &choice.match_options())?;
    s.apply_method_params(&mut setup.config)?;
    if let Some(eps_h) = s.pick(args.eps_h, "eps_h")? {
        setup.config.royer_wright.eps_h = Some(eps_h);
    }
    let trace = run_method(&setup.config, &setup.objective, &setup.x0)?;
    let report = verify_against(&setup, &trace);

    let dir = out_dir(&args.out, s)?;
    let trace_path = s.pick(args.trace.clone(), "trace")?.unwrap_or_else(|| dir.join("trace.csv"));
    write_atomic(&trace_path, &method_trace_csv(&trace)?)?;
    let doc = json!({
        "report": report,
        "failure": trace.failure,
    });
    write_atomic(&dir.join("report.json"), format!("{}\n", serde_json::to_string_pretty(&doc)?).as_bytes())?;
    println!("{}", summary(&report));
    if !report.passed {
        eprintln!(
            "count mismatch: method stopped at {} ({}), construction predicts {}",
            report.termination_index, report.reason, report.predicted
        );
    }
    Ok(Verdict::from(report.passed))
}

pub fn verify(args: &VerifyArgs, s: &Settings) -> Result<Verdict> {
    let (obj, meta) = read_objective(&args.function)?;
    let trace: ClassTrace = read_class_trace(&args.trace)?;
    let alpha = match s.pick(args.alpha, "alpha")? {
        Some(a) => a,
        None => meta
            .as_ref()
            .map(|m| m.alpha)
            .ok_or_else(|| Error::InvalidConfig("alpha is not stored in the objective; pass --alpha".into()))?,
    };
    let default_class = match meta.as_ref().map(|m| m.family.as_str()) {
        Some("crs") => "crs",
        _ => "malpha",
    };
    let class = s.pick(args.class.clone(), "class")?.unwrap_or_else(|| default_class.into());
    let kappa_rg = s.pick(args.kappa_rg, "kappa_rg")?.unwrap_or(0.0);

    let membership = match class.as_str() {
        "malpha" => {
            let params = MAlphaParams {
                kappa_rg,
                kappa_rs: s.pick(args.kappa_rs, "kappa_rs")?.unwrap_or(1.0),
                kappa_lambda: match s.pick(args.kappa_lambda, "kappa_lambda")? {
                    Some(v) => KappaLambda::Fixed(v),
                    None => KappaLambda::FromTrace,
                },
                kappa_s: s.pick(args.kappa_s, "kappa_s")?.unwrap_or(1.0),
                ..MAlphaParams::default()
            };
            check_malpha_membership(&trace, alpha, &params)?
        }
        "crs" => {
            let params = CrsParams {
                kappa1: s.pick(args.kappa1, "kappa1")?.unwrap_or(0.0),
                kappa2: s.pick(args.kappa2, "kappa2")?.unwrap_or(0.0),
                ..CrsParams::new(
                    s.pick(args.sigma_bar, "sigma_bar")?.unwrap_or(1.0),
                    kappa_rg,
                    s.pick(args.eta, "eta")?.unwrap_or(0.5),
                )
            };
            check_crs_membership(&trace, &params)?
        }
        other => return Err(Error::InvalidConfig(format!("unknown class `{other}`"))),
    };
    let continuity = obj.check_knot_continuity(1e-10);
    let smoothness = estimate_smoothness(&obj, alpha, &Sampling::default(), Execution::default());
    let passed = membership.passed && continuity.passed && smoothness.certified;
    let doc = json!({
        "passed": passed,
        "membership": membership,
        "continuity": continuity,
        "smoothness": smoothness,
    });
    let text = format!("{}\n", serde_json::to_string_pretty(&doc)?);
    match s.pick(args.out.clone(), "out")? {
        Some(path) => write_atomic(&path, text.as_bytes())?,
        None => print!("{text}"),
    }
    eprintln!(
        "membership ({}): {}; knot continuity: {}; smoothness certificate: {}",
        class,
        if membership.passed { "pass" } else { "FAIL" },
        if continuity.passed { "pass" } else { "FAIL" },
        if smoothness.certified { "pass" } else { "FAIL" }
    );
    if let Some(k) = membership.first_violation {
        eprintln!("first violation at iteration {k}");
    }
    Ok(Verdict::from(passed))
}

struct Cell {
    method: MethodKind,
    eps: f64,
    alpha: f64,
}

pub fn sweep(args: &SweepArgs, s: &Settings) -> Result<Verdict> {
    let choice = FamilyChoice::resolve(&args.family, s)?;
    let methods: Vec<MethodKind> = s
        .require(args.method.clone(), "method")?
        .split(',')
        .map(|m| m.trim().parse())
        .collect::<Result<_>>()?;
    let mut eps_list = s.list(&args.eps, "eps")?;
    let mut alphas: Vec<f64> = s.list(&args.alpha, "alpha")?;
    if alphas.is_empty() {
        alphas.push(1.0);
    }
    for a in &mut alphas {
        *a = choice.family.effective_alpha(*a);
    }
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    eps_list.sort_by(|a, b| b.total_cmp(a));
    eps_list.dedup();
    if eps_list.len() < 3 {
        return Err(Error::TooFewPoints { found: eps_list.len() });
    }
    let seed: u64 = s.pick(None, "seed")?.unwrap_or(0);
    let exec = if args.sequential || s.pick(None::<bool>, "sequential")?.unwrap_or(false) {
        Execution::Sequential
    } else {
        Execution::default()
    };

    let mut cells = Vec::new();
    for &method in &methods {
        for &alpha in &alphas {
            for &eps in &eps_list {
                cells.push(Cell { method, eps, alpha });
            }
        }
    }
    let opts = choice.match_options();
    let reports = exec
        .map(&cells, |c| -> Result<LowerBoundReport> {
            let mut setup = matching_setup(choice.family, c.method, c.eps, c.alpha, &opts)?;
            s.apply_method_params(&mut setup.config)?;
            let trace = run_method(&setup.config, &setup.objective, &setup.x0)?;
            Ok(verify_against(&setup, &trace))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let dir = out_dir(&args.out, s)?;
    let mut csv = String::from("method,eps,alpha,count,predicted,ratio,passed,slope,intercept\n");
    let mut fits = Vec::new();
    let mut all_passed = true;
    for &method in &methods {
        for &alpha in &alphas {
            let group: Vec<&LowerBoundReport> = reports
                .iter()
                .zip(&cells)
                .filter(|(_, c)| c.method == method && c.alpha == alpha)
                .map(|(r, _)| r)
                .collect();
            let points: Vec<(f64, usize)> = group.iter().map(|r| (r.eps, r.termination_index)).collect();
            let fit = fit_complexity_slope(&points, alpha)?;
            for r in &group {
                all_passed &= r.passed;
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.method,
                    r.eps,
                    r.alpha,
                    r.termination_index,
                    r.predicted,
                    r.termination_index as f64 / r.predicted as f64,
                    r.passed,
                    fit.slope,
                    fit.intercept
                ));
            }
            println!(
                "{} alpha={}: slope {:.4} (predicted {:.4}), count/predicted in [{}, {}]",
                method,
                alpha,
                fit.slope,
                (2.0 + alpha) / (1.0 + alpha),
                fit.min_ratio,
                fit.max_ratio
            );
            fits.push(json!({ "method": method.name(), "alpha": alpha, "fit": fit }));
        }
    }
    write_atomic(&dir.join("sweep.csv"), csv.as_bytes())?;
    let doc = json!({
        "grid": {
            "family": choice.family.name(),
            "methods": methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "eps": eps_list,
            "alpha": alphas,
            "preset": choice.preset_name(),
            "seed": seed,
        },
        "fits": fits,
        "passed": all_passed,
    });
    write_atomic(&dir.join("sweep.json"), format!("{}\n", serde_json::to_string_pretty(&doc)?).as_bytes())?;
    if args.svg {
        for &alpha in &alphas {
            for &eps in &eps_list {
                let (obj, trace) = choice.generate(eps, alpha)?;
                let meta = meta_for(&trace, &choice);
                let name = format!("fn_eps{eps}_alpha{alpha}.svg");
                write_atomic(&dir.join(name), figure(&obj, Some(&meta))?.as_bytes())?;
            }
        }
    }
    Ok(Verdict::from(all_passed))
}

fn parse_range(text: &str) -> Result<Option<(f64, f64)>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(None);
    }
    let bad = || Error::InvalidConfig(format!("range must look like lo:hi, got `{text}`"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    Ok(Some((lo, hi)))
}

fn default_svg_path(function: &Path) -> PathBuf {
    function.with_extension("svg")
}

pub fn plot(args: &PlotArgs, s: &Settings) -> Result<Verdict> {
    let (obj, meta) = read_objective(&args.function)?;
    let range = match s.pick(args.range.clone(), "range")? {
        Some(r) => parse_range(&r)?,
        None => None,
    };
    let defaults = PlotOptions::default();
    let opts = PlotOptions {
        range,
        zoom_iterations: s.pick(args.zoom, "zoom")?.unwrap_or(defaults.zoom_iterations),
        eps: s.pick(args.eps, "eps")?.or(meta.as_ref().map(|m| m.eps)),
        title: meta.as_ref().map(|m| format!("{} eps={} alpha={}", m.family, m.eps, m.alpha)),
        ..defaults
    };
    let svg = render_svg(&obj, &opts)?;
    let path = s.pick(args.svg.clone(), "svg")?.unwrap_or_else(|| default_svg_path(&args.function));
    write_atomic(&path, svg.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(Verdict::Pass)
}
