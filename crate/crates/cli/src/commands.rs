//! Execution of each subcommand.

use hypokit::decay::{fit_generator, propagator_norm_curve, stability_check, uniform_grid};
use hypokit::gallery::{make_example, ExampleSpec};
use hypokit::index::{equivalence_audit, IndexOptions, DEFAULT_RANK_TOL};
use hypokit::io::{csv_table, matrix_to_json, parse_matrix};
use hypokit::lorentz::{
    short_time_constants, cubic_bound_verify, kappa_limit, kappa_truncated, lambda0, lyapunov_margin, random_field,
    simulate_series, z_block, LorentzField, SimulationReport, DEFAULT_ALPHA,
};
use hypokit::operator::{hermitian_split, min_eig_hermitian, ComplexMatrix};
use hypokit::random::seeded_rng;
use hypokit::staircase::{build_staircase, verify_staircase};
use hypokit::{HypoError, Result};
use serde_json::json;

use crate::{Command, Format, GalleryName, LorentzCommand, Options, Report};

/// Time at which `analyze` checks stability unless `--tmax` is given.
const DEFAULT_STABILITY_TIME: f64 = 100.0;
const DEFAULT_DECAY_TMAX: f64 = 10.0;
const DEFAULT_DECAY_STEPS: usize = 200;
const DEFAULT_KAPPA_M: usize = 200;
const DEFAULT_LYAPUNOV_M: usize = 64;
const DEFAULT_LYAPUNOV_N: usize = 50;
const LYAPUNOV_TOL: f64 = 1e-10;
const DEFAULT_CONSTANTS_M: usize = 128;
const DEFAULT_VERIFY_N: usize = 20;
const DEFAULT_VERIFY_M: usize = 64;
const DEFAULT_VERIFY_SAMPLES: usize = 50;
const DEFAULT_SIMULATE_N: usize = 16;
const DEFAULT_SIMULATE_M: usize = 32;
const DEFAULT_SIMULATE_TMAX: f64 = 30.0;
const DEFAULT_SIMULATE_STEPS: usize = 19;
/// Staircase structural check tolerance.
const STAIRCASE_TOL: f64 = 1e-10;

fn read_input(opts: &Options) -> Result<String> {
    let path = opts
        .input
        .as_ref()
        .ok_or_else(|| HypoError::Parameter("this command requires --input".into()))?;
    Ok(std::fs::read_to_string(path)?)
}

fn read_matrix(opts: &Options) -> Result<ComplexMatrix> {
    parse_matrix(&read_input(opts)?)
}

fn positive(name: &str, value: Option<f64>, default: f64) -> Result<f64> {
    match value {
        Some(v) if !(v > 0.0 && v.is_finite()) => Err(HypoError::Parameter(format!("{name} must be positive, got {v}"))),
        Some(v) => Ok(v),
        None => Ok(default),
    }
}

fn format_or(opts: &Options, default: Format, supported: &[Format]) -> Result<Format> {
    let format = opts.format.unwrap_or(default);
    if supported.contains(&format) {
        Ok(format)
    } else {
        Err(HypoError::Parameter(format!("format {format:?} is not available for this command").to_lowercase()))
    }
}

fn json_text(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    text
}

fn ok(text: String) -> Report {
    Report { text, violation: false }
}

pub fn run(command: &Command, opts: &Options) -> Result<Report> {
    match command {
        Command::Analyze => analyze(opts),
        Command::Staircase => staircase(opts),
        Command::Decay => decay(opts),
        Command::Lorentz { command } => match command {
            LorentzCommand::Kappa => kappa(opts),
            LorentzCommand::Lyapunov => lyapunov(opts),
            LorentzCommand::Constants => constants(opts),
            LorentzCommand::Verify => verify(opts),
            LorentzCommand::Simulate => simulate(opts),
        },
        Command::Gallery { name, size } => gallery(opts, *name, *size),
    }
}

fn analyze(opts: &Options) -> Result<Report> {
    format_or(opts, Format::Json, &[Format::Json])?;
    let c = read_matrix(opts)?;
    let dec = hermitian_split(&c)?;
    let mut index_opts = IndexOptions::defaults(&dec);
    if let Some(k) = opts.tol_kappa {
        index_opts.kappa_threshold = positive("--tol-kappa", Some(k), k)?;
    }
    if let Some(m) = opts.m_max {
        index_opts.m_max = m;
    }
    let rank_tol = positive("--tol-rank", opts.tol_rank, DEFAULT_RANK_TOL)?;
    let audit = equivalence_audit(&dec, index_opts, rank_tol)?;
    let t0 = positive("--tmax", opts.tmax, DEFAULT_STABILITY_TIME)?;
    let stability = stability_check(&c, t0)?;
    let (fit, fit_error) = match fit_generator(&c) {
        Ok((_, fit)) => (serde_json::to_value(fit)?, serde_json::Value::Null),
        Err(e @ (HypoError::NoDecay(_) | HypoError::Precondition(_))) => (serde_json::Value::Null, json!(e.to_string())),
        Err(e) => return Err(e),
    };
    let value = json!({
        "dimension": dec.dim(),
        "index": audit.index(),
        "audit": audit,
        "stability_time": t0,
        "stability": stability,
        "short_time_fit": fit,
        "short_time_fit_error": fit_error,
    });
    Ok(ok(json_text(&value)))
}

fn staircase(opts: &Options) -> Result<Report> {
    format_or(opts, Format::Json, &[Format::Json])?;
    let dec = hermitian_split(&read_matrix(opts)?)?;
    let (r, j) = (dec.dissipative(), dec.conservative());
    let rank_tol = positive("--tol-rank", opts.tol_rank, DEFAULT_RANK_TOL)?;
    let form = build_staircase(r, j, rank_tol)?;
    let report = verify_staircase(&form, r, j, STAIRCASE_TOL);
    let mut value = form.to_json();
    value["report"] = serde_json::to_value(&report)?;
    Ok(Report { text: json_text(&value), violation: !report.passed() })
}

fn decay(opts: &Options) -> Result<Report> {
    let format = format_or(opts, Format::Csv, &[Format::Csv, Format::Json])?;
    let c = read_matrix(opts)?;
    let tmax = positive("--tmax", opts.tmax, DEFAULT_DECAY_TMAX)?;
    let steps = opts.steps.unwrap_or(DEFAULT_DECAY_STEPS).max(1);
    let curve = propagator_norm_curve(&c, &uniform_grid(tmax, steps))?;
    Ok(ok(match format {
        Format::Csv => curve.to_csv(),
        Format::Json => json_text(&serde_json::to_value(&curve)?),
    }))
}

fn kappa(opts: &Options) -> Result<Report> {
    let format = format_or(opts, Format::Json, &[Format::Json, Format::Csv])?;
    let m = opts.velocity_cutoff.unwrap_or(DEFAULT_KAPPA_M);
    let kappa = kappa_truncated(m)?;
    Ok(ok(match format {
        Format::Csv => csv_table(&["M", "kappa"], [vec![m as f64, kappa]]),
        Format::Json => json_text(&json!({ "M": m, "kappa": kappa, "limit": kappa_limit() })),
    }))
}

fn lyapunov(opts: &Options) -> Result<Report> {
    let format = format_or(opts, Format::Json, &[Format::Json, Format::Csv])?;
    let m = opts.velocity_cutoff.unwrap_or(DEFAULT_LYAPUNOV_M);
    let n_max = opts.spatial_cutoff.unwrap_or(DEFAULT_LYAPUNOV_N);
    let rate = lambda0();
    let margins = (1..=n_max)
        .map(|n| lyapunov_margin(n as f64, DEFAULT_ALPHA, rate, m))
        .collect::<Result<Vec<f64>>>()?;
    let z_min = min_eig_hermitian(&z_block(1.0)?)?;
    let violation = margins.iter().any(|&v| v < -LYAPUNOV_TOL);
    let text = match format {
        Format::Csv => csv_table(&["n", "margin"], margins.iter().enumerate().map(|(i, v)| vec![(i + 1) as f64, *v])),
        Format::Json => json_text(&json!({
            "M": m,
            "alpha": DEFAULT_ALPHA,
            "lambda0": rate,
            "margins": margins,
            "min_margin": margins.iter().copied().fold(f64::INFINITY, f64::min),
            "z1_min_eigenvalue": z_min,
            "certified": !violation,
        })),
    };
    Ok(Report { text, violation })
}

fn constants(opts: &Options) -> Result<Report> {
    format_or(opts, Format::Json, &[Format::Json])?;
    let k = short_time_constants(opts.velocity_cutoff.unwrap_or(DEFAULT_CONSTANTS_M))?;
    let mut value = serde_json::to_value(&k)?;
    value["relation_residual"] = json!(k.relation_residual());
    value["all_positive"] = json!(k.all_positive());
    Ok(Report { text: json_text(&value), violation: !k.all_positive() || k.relation_residual() > 0.0 })
}

fn verify(opts: &Options) -> Result<Report> {
    format_or(opts, Format::Json, &[Format::Json])?;
    let k = short_time_constants(DEFAULT_CONSTANTS_M)?;
    let n = opts.spatial_cutoff.unwrap_or(DEFAULT_VERIFY_N);
    let m = opts.velocity_cutoff.unwrap_or(DEFAULT_VERIFY_M);
    let samples = opts.steps.unwrap_or(DEFAULT_VERIFY_SAMPLES);
    let report = cubic_bound_verify(n, m, &k, samples)?;
    let value = json!({ "constants_M": DEFAULT_CONSTANTS_M, "c": k.c, "tau": k.tau, "report": report });
    Ok(Report { text: json_text(&value), violation: !report.passed })
}

fn simulate(opts: &Options) -> Result<Report> {
    let format = format_or(opts, Format::Csv, &[Format::Csv, Format::Json])?;
    let field0 = match &opts.input {
        Some(_) => LorentzField::from_json(&read_input(opts)?)?,
        None => {
            let n = opts.spatial_cutoff.unwrap_or(DEFAULT_SIMULATE_N);
            let m = opts.velocity_cutoff.unwrap_or(DEFAULT_SIMULATE_M);
            random_field(&mut seeded_rng(opts.seed), n, m)?
        }
    };
    let tmax = positive("--tmax", opts.tmax, DEFAULT_SIMULATE_TMAX)?;
    let steps = opts.steps.unwrap_or(DEFAULT_SIMULATE_STEPS).max(1);
    let reports = simulate_series(&field0, &uniform_grid(tmax, steps))?;
    let violation = reports.iter().any(|r| !r.within_bound);
    let text = match format {
        Format::Csv => SimulationReport::csv(&reports),
        Format::Json => json_text(&json!({ "N": field0.n, "M": field0.m, "reports": reports })),
    };
    Ok(Report { text, violation })
}

fn gallery(opts: &Options, name: GalleryName, size: usize) -> Result<Report> {
    format_or(opts, Format::Json, &[Format::Json])?;
    let spec = match name {
        GalleryName::Ck => ExampleSpec::Ck { k: size },
        GalleryName::Ek => ExampleSpec::Ek { k: size },
        GalleryName::UniformBlockFamily => ExampleSpec::UniformBlockFamily { blocks: size },
        GalleryName::CompactRFamily => ExampleSpec::CompactRFamily { dim: size },
        GalleryName::EkBlockdiag => ExampleSpec::EkBlockdiag { k_max: size },
        GalleryName::EkRescaled => ExampleSpec::EkRescaled { k_max: size },
    };
    let mut text = matrix_to_json(&make_example(spec)?);
    text.push('\n');
    Ok(ok(text))
}
