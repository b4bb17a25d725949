use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use nlslope_core::pipeline::analyze;
use nlslope_core::sim::{replicate_statistics, summarize, StreamPurpose};
use nlslope_core::{
    Analysis, BandwidthReport, Calibration, Example, ExperimentRow, SimSpec, SlopeEstimate, TestConfig, TestReport,
};

use crate::input::load_group;
use crate::output::{create_dir, fmt_opt, path_string, resolve_seed, write_csv, write_json, Manifest, SCHEMA};
use crate::{CliError, ConfigArgs, CurvesArgs, InputArgs, SimulateArgs, TestArgs};

fn read_json(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: line {}: {e}", path.display(), e.line())))
}

/// Test configuration from defaults, an optional config file and the flags,
/// in increasing precedence. Also returns where the seed came from.
fn test_config(config: Option<&Path>, settings: &ConfigArgs) -> Result<(TestConfig, &'static str), CliError> {
    let (mut cfg, file_seed) = match config {
        Some(path) => {
            let value = read_json(path)?;
            let has_seed = value.get("seed").is_some();
            let cfg: TestConfig =
                serde_json::from_value(value).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let seed = has_seed.then_some(cfg.seed);
            (cfg, seed)
        }
        None => (TestConfig::default(), None),
    };
    settings.apply(&mut cfg)?;
    let (seed, source) = resolve_seed(settings.seed, file_seed);
    cfg.seed = seed;
    cfg.validate()?;
    Ok((cfg, source))
}

fn input_paths(inputs: &InputArgs) -> BTreeMap<&'static str, String> {
    BTreeMap::from([
        ("group1_curves", path_string(&inputs.group1_curves)),
        ("group1_y", path_string(&inputs.group1_y)),
        ("group2_curves", path_string(&inputs.group2_curves)),
        ("group2_y", path_string(&inputs.group2_y)),
    ])
}

fn run_analysis(inputs: &InputArgs, cfg: &TestConfig, calibration: Calibration) -> Result<Analysis, CliError> {
    let g1 = load_group(&inputs.group1_curves, &inputs.group1_y)?;
    let g2 = load_group(&inputs.group2_curves, &inputs.group2_y)?;
    Ok(analyze(&g1, &g2, cfg, calibration)?)
}

#[derive(Serialize)]
struct SlopeCurve<'a> {
    kappa: usize,
    t: &'a [f64],
    beta: &'a [f64],
}

impl<'a> From<&'a SlopeEstimate> for SlopeCurve<'a> {
    fn from(s: &'a SlopeEstimate) -> Self {
        SlopeCurve { kappa: s.kappa, t: &s.grid, beta: &s.values }
    }
}

#[derive(Serialize)]
struct TestOutput<'a> {
    schema: &'static str,
    report: &'a TestReport,
    bandwidth: &'a Option<BandwidthReport>,
    beta1: SlopeCurve<'a>,
    beta2: SlopeCurve<'a>,
}

pub fn test(args: &TestArgs) -> Result<(), CliError> {
    let (mut cfg, seed_source) = test_config(args.config.as_deref(), &args.settings)?;
    if let Some(b) = args.bootstrap {
        cfg.bootstrap_reps = b;
    }
    if let Some(s) = args.bootstrap_scheme {
        cfg.bootstrap_scheme = s.scheme();
    }
    cfg.validate()?;
    let calibration = if args.asymptotic {
        if args.draws == 0 {
            return Err(CliError::Input("--draws must be positive".into()));
        }
        Calibration::Asymptotic { draws: args.draws }
    } else {
        Calibration::Bootstrap
    };

    create_dir(&args.run.out)?;
    let analysis = run_analysis(&args.inputs, &cfg, calibration)?;
    write_json(
        &args.run.out.join("report.json"),
        &TestOutput {
            schema: SCHEMA,
            report: &analysis.report,
            bandwidth: &analysis.bandwidth,
            beta1: (&analysis.beta1).into(),
            beta2: (&analysis.beta2).into(),
        },
    )?;
    write_json(
        &args.run.out.join("manifest.json"),
        &Manifest {
            schema: SCHEMA,
            command: "test",
            version: env!("CARGO_PKG_VERSION"),
            config: &cfg,
            calibration: Some(calibration),
            inputs: input_paths(&args.inputs),
            output: path_string(&args.run.out),
            seed_source,
            files: vec!["report.json"],
        },
    )
}

pub fn curves(args: &CurvesArgs) -> Result<(), CliError> {
    let (cfg, seed_source) = test_config(args.config.as_deref(), &args.settings)?;
    create_dir(&args.run.out)?;
    let analysis = run_analysis(&args.inputs, &cfg, Calibration::None)?;
    let out = &args.run.out;

    for (name, col, est) in [("beta1.csv", "beta1", &analysis.beta1), ("beta2.csv", "beta2", &analysis.beta2)] {
        let rows = est.grid.iter().zip(&est.values).map(|(t, b)| [t.to_string(), b.to_string()]);
        write_csv(&out.join(name), &["t", col], rows)?;
    }
    let report = &analysis.report;
    let rows = report.eval_points.iter().zip(&report.g2_curve).map(|(v, g2)| {
        let flag = if g2.is_some() { "ok" } else { "degenerate" };
        [v.to_string(), fmt_opt(*g2), flag.to_string()]
    });
    write_csv(&out.join("g2.csv"), &["v", "g2", "flag"], rows)?;

    write_json(
        &out.join("manifest.json"),
        &Manifest {
            schema: SCHEMA,
            command: "curves",
            version: env!("CARGO_PKG_VERSION"),
            config: &cfg,
            calibration: Some(Calibration::None),
            inputs: input_paths(&args.inputs),
            output: path_string(out),
            seed_source,
            files: vec!["beta1.csv", "beta2.csv", "g2.csv"],
        },
    )
}

fn sim_spec(args: &SimulateArgs) -> Result<(SimSpec, &'static str), CliError> {
    let mut spec = match &args.config {
        Some(path) => {
            let value = read_json(path)?;
            serde_json::from_value::<SimSpec>(value).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => {
            let id = args.example.ok_or_else(|| CliError::Input("--example is required without --config".into()))?;
            SimSpec::new(Example::from_id(id)?, 500, 1.0, 200, 0)
        }
    };
    let file_seed = args.config.is_some().then_some(spec.seed);
    if let Some(id) = args.example {
        spec.example = Example::from_id(id)?;
    }
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(a) = args.alpha0 {
        spec.alpha0 = a;
    }
    if let Some(r) = args.reps {
        spec.reps = r;
    }
    if let Some(c) = args.covariates {
        spec.covariates = c.design();
    }
    args.settings.apply(&mut spec.cfg)?;
    let (seed, source) = resolve_seed(args.settings.seed, file_seed);
    spec.seed = seed;
    spec.validate()?;
    Ok((spec, source))
}

#[derive(Serialize)]
struct SimOutput<'a> {
    schema: &'static str,
    row: &'a ExperimentRow,
}

fn tn_rows(values: &[Option<f64>]) -> impl Iterator<Item = [String; 2]> + '_ {
    values.iter().enumerate().map(|(rep, t)| [rep.to_string(), fmt_opt(*t)])
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let (spec, seed_source) = sim_spec(args)?;
    create_dir(&args.run.out)?;
    let out = &args.run.out;

    let observed = replicate_statistics(&spec, StreamPurpose::Observed)?;
    let null = replicate_statistics(&spec.null_counterpart(), StreamPurpose::NullCalibration)?;
    let row = summarize(&spec, &observed, &null)?;

    write_json(&out.join("row.json"), &SimOutput { schema: SCHEMA, row: &row })?;
    write_csv(&out.join("tn.csv"), &["rep", "tn"], tn_rows(&observed))?;
    write_csv(&out.join("null_tn.csv"), &["rep", "tn"], tn_rows(&null))?;
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            schema: SCHEMA,
            command: "simulate",
            version: env!("CARGO_PKG_VERSION"),
            config: &spec,
            calibration: None,
            inputs: BTreeMap::new(),
            output: path_string(out),
            seed_source,
            files: vec!["row.json", "tn.csv", "null_tn.csv"],
        },
    )
}
