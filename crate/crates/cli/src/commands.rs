use std::fs::{self, File};
use std::path::{Path, PathBuf};

use dthazard::bandwidth::{default_h_grid, normal_reference_bandwidth, select_bandwidth, BandwidthSearch, LscvCache, LscvOptions, DEFAULT_H_GRID_POINTS};
use dthazard::bootstrap::{biasing_bands, confidence_bands, BandReport, BootstrapConfig};
use dthazard::data::read_csv;
use dthazard::graph::{check_existence, largest_valid_subsample, ExistenceReport};
use dthazard::kernel::{biasing_curve, default_grid, hazard_naive, hazard_np, hazard_sp, near_boundary, Curve, EstimatorKind, Kernel};
use dthazard::npmle::{fit_npmle, NpmleFit, NpmleOptions, NpmleSummary};
use dthazard::parametric::{fit_spmle, resolve_design, spmle_cdf, Family, SpmleFit, SpmleOptions, SpmleSummary, WindowDesign};
use dthazard::quadrature::{geomspace, linspace};
use dthazard::simulation::{bias_variance_at_quartiles, run_mise_study, ModelId, ModelSpec, MiseStudy, QuartileStudy, StudyConfig};
use dthazard::{Correction, Observation, Sample};
use serde::Serialize;

use crate::args::{usage, BandwidthArgs, BootArgs, CheckArgs, FitArgs, GfunArgs, GridArgs, HazardArgs, InputArgs, ModelArgs, SimulateArgs, SmoothingArgs};
use crate::output::{csv_text, hazard_csv, json_text, plain_curve_csv, sample_csv, write_summary, write_text, Meta};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn load(input: &InputArgs) -> Result<Sample> {
    let file = File::open(&input.input).map_err(|source| CliError::Input { path: input.input.clone(), source })?;
    let sample = read_csv(file)?;
    Ok(match input.transform {
        Some((a, b)) => sample.affine_rescale(a, b)?,
        None => sample,
    })
}

fn design(input: &InputArgs) -> Option<WindowDesign> {
    match (input.tau, input.width_range) {
        (Some(tau), _) => Some(WindowDesign::Interval { tau }),
        (None, Some((lo, hi))) => Some(WindowDesign::UniformWidth { lo, hi }),
        (None, None) => None,
    }
}

fn family(model: &ModelArgs) -> Result<Family> {
    let f = match model.family.to_ascii_lowercase().as_str() {
        "beta" => Family::Beta,
        "beta1" => Family::BetaOne,
        "uniform" => Family::Uniform { fixed: model.fix },
        other => return Err(usage(format!("unknown family '{other}' (expected beta, beta1 or uniform)"))),
    };
    if model.fix.is_some() && !matches!(f, Family::Uniform { .. }) {
        return Err(usage("--fix only applies to the uniform family"));
    }
    Ok(f)
}

fn kind(model: &ModelArgs) -> Result<EstimatorKind> {
    match model.kind.parse::<EstimatorKind>() {
        Ok(EstimatorKind::Oracle) => Err(usage("the oracle estimator needs a known model; use `simulate`")),
        Ok(k) => Ok(k),
        Err(_) => Err(usage(format!("unknown kind '{}' (expected np, sp or naive)", model.kind))),
    }
}

fn kernel(name: &str) -> Result<Kernel> {
    name.parse().map_err(|_| usage(format!("unknown kernel '{name}' (expected epanechnikov or gaussian)")))
}

enum Fitted {
    Np(NpmleFit),
    Sp(SpmleFit),
    /// The uncorrected estimator, carried as an NPMLE over windows that cover every lifetime.
    Naive(NpmleFit),
}

/// Same lifetimes with one window covering all of them, so that every correction is trivial.
fn untruncated(sample: &Sample) -> Result<Sample> {
    let xs = sample.lifetimes();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = (hi - lo).max(1.0);
    Ok(Sample::new(xs.iter().map(|&x| Observation::new(lo - pad, x, hi + pad)).collect())?)
}

fn spmle_options(model: &ModelArgs) -> SpmleOptions {
    SpmleOptions { restarts: model.restarts, seed: model.seed, ..Default::default() }
}

fn fit_model(sample: &Sample, kind: EstimatorKind, model: &ModelArgs, input: &InputArgs) -> Result<Fitted> {
    Ok(match kind {
        EstimatorKind::Np => {
            let report = check_existence(sample);
            if !report.exists_unique {
                eprintln!("hint: run `dthazard check --extract-largest` or use --kind sp");
                return Err(dthazard::Error::NonExistence { scc_count: report.scc_count }.into());
            }
            Fitted::Np(fit_npmle(sample, NpmleOptions::default())?)
        }
        EstimatorKind::Sp => Fitted::Sp(fit_spmle(sample, family(model)?, design(input), &spmle_options(model))?),
        EstimatorKind::Naive => Fitted::Naive(fit_npmle(&untruncated(sample)?, NpmleOptions::default())?),
        EstimatorKind::Oracle => unreachable!("rejected by kind()"),
    })
}

fn correction(kind: EstimatorKind, model: &ModelArgs, input: &InputArgs) -> Result<Correction> {
    match kind {
        EstimatorKind::Np => Ok(Correction::Nonparametric),
        EstimatorKind::Sp => Ok(Correction::Semiparametric { family: family(model)?, design: design(input) }),
        _ => Err(usage("bootstrap bands need --kind np or --kind sp")),
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum FitSummary {
    Np(NpmleSummary),
    Sp(SpmleSummary),
}

fn fit_summary(fitted: &Fitted) -> Option<FitSummary> {
    match fitted {
        Fitted::Np(f) => Some(FitSummary::Np(f.summary())),
        Fitted::Sp(f) => Some(FitSummary::Sp(f.summary())),
        Fitted::Naive(_) => None,
    }
}

fn resolved_design(sample: &Sample, kind: EstimatorKind, input: &InputArgs) -> Option<WindowDesign> {
    match kind {
        EstimatorKind::Sp => resolve_design(sample, design(input)).ok(),
        _ => design(input),
    }
}

fn grid(sample: &Sample, args: &GridArgs) -> Result<(Vec<f64>, (f64, f64, usize))> {
    let g = match args.grid {
        Some((lo, hi, k)) => linspace(lo, hi, k),
        None => {
            if args.grid_points < 2 {
                return Err(usage("--grid-points must be at least 2"));
            }
            default_grid(sample, args.grid_points)
        }
    };
    let spec = (g[0], g[g.len() - 1], g.len());
    Ok((g, spec))
}

fn lscv(fitted: &Fitted, sample: &Sample, smoothing: &SmoothingArgs, kernel: Kernel) -> Result<BandwidthSearch> {
    let h_grid = match smoothing.h_grid {
        Some((lo, hi, k)) => {
            if !(lo > 0.0) {
                return Err(usage("--h-grid must be positive"));
            }
            geomspace(lo, hi, k)
        }
        None => default_h_grid(sample, DEFAULT_H_GRID_POINTS)?,
    };
    let options = LscvOptions { range: smoothing.range, ..Default::default() };
    let mut search = match fitted {
        Fitted::Np(f) => select_bandwidth(&LscvCache::nonparametric(f, &options)?, kernel, &h_grid)?,
        Fitted::Sp(f) => select_bandwidth(&LscvCache::semiparametric(f, &options)?, kernel, &h_grid)?,
        Fitted::Naive(f) => {
            let mut s = select_bandwidth(&LscvCache::nonparametric(f, &options)?, kernel, &h_grid)?;
            s.kind = EstimatorKind::Naive;
            s
        }
    };
    if search.at_endpoint {
        eprintln!("warning: cross-validation minimum at the edge of the bandwidth grid (h = {}); widen --h-grid", search.h_star);
    }
    search.h_grid = h_grid;
    Ok(search)
}

fn boot_config(boot: &BootArgs, replicates: usize, sample: &Sample, seed: u64) -> BootstrapConfig {
    let h0 = boot.pilot_h0.unwrap_or_else(|| normal_reference_bandwidth(&sample.lifetimes()));
    let mut c = BootstrapConfig::new(replicates, h0, seed);
    c.level = boot.level;
    c
}

#[derive(Serialize)]
struct ResolvedInput<'a> {
    input: &'a Path,
    transform: Option<(f64, f64)>,
    n: usize,
    design: Option<WindowDesign>,
}

fn resolved_input<'a>(input: &'a InputArgs, sample: &Sample, kind: EstimatorKind) -> ResolvedInput<'a> {
    ResolvedInput { input: &input.input, transform: input.transform, n: sample.len(), design: resolved_design(sample, kind, input) }
}

pub fn check(args: CheckArgs) -> Result<()> {
    let sample = load(&args.input)?;
    let report = check_existence(&sample);
    let meta = Meta::new("check", None, ResolvedInput { input: &args.input.input, transform: args.input.transform, n: sample.len(), design: None });

    #[derive(Serialize)]
    struct CheckResult {
        report: ExistenceReport,
        removed_indices: Option<Vec<usize>>,
        extracted_to: Option<PathBuf>,
    }
    let mut result = CheckResult { report, removed_indices: None, extracted_to: None };
    if let Some(path) = &args.extract_largest {
        let (reduced, removed) = largest_valid_subsample(&sample)?;
        let mut text = sample_csv(&meta, &reduced);
        let removed_line = format!("# removed: {}\n", removed.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
        let insert_at = text.find("u,x,v\n").expect("header present");
        text.insert_str(insert_at, &removed_line);
        write_text(Some(path), &text)?;
        result.removed_indices = Some(removed);
        result.extracted_to = Some(path.clone());
    }
    write_text(args.output.as_deref(), &json_text(&meta, &result))?;
    if result.report.exists_unique {
        Ok(())
    } else {
        Err(CliError::Existence)
    }
}

pub fn fit(args: FitArgs) -> Result<()> {
    let sample = load(&args.input)?;
    let kind = kind(&args.model)?;
    if kind == EstimatorKind::Naive {
        return Err(usage("fit supports --kind np or --kind sp"));
    }
    let fitted = fit_model(&sample, kind, &args.model, &args.input)?;
    let (grid, grid_spec) = grid(&sample, &args.grid)?;

    #[derive(Serialize)]
    struct Config<'a> {
        #[serde(flatten)]
        input: ResolvedInput<'a>,
        kind: EstimatorKind,
        family: Option<&'a str>,
        restarts: usize,
        grid: (f64, f64, usize),
    }
    let config = Config {
        input: resolved_input(&args.input, &sample, kind),
        kind,
        family: (kind == EstimatorKind::Sp).then_some(args.model.family.as_str()),
        restarts: args.model.restarts,
        grid: grid_spec,
    };
    let meta = Meta::new("fit", Some(args.model.seed), &config);

    #[derive(Serialize)]
    struct FitResult {
        kind: EstimatorKind,
        existence: ExistenceReport,
        fit: Option<FitSummary>,
    }
    let result = FitResult { kind, existence: check_existence(&sample), fit: fit_summary(&fitted) };
    if let Some(path) = &args.curve {
        let values: Vec<f64> = match &fitted {
            Fitted::Np(f) => grid.iter().map(|&x| f.cdf(x)).collect(),
            Fitted::Sp(f) => grid.iter().map(|&x| spmle_cdf(f, x)).collect(),
            Fitted::Naive(_) => unreachable!(),
        };
        write_text(Some(path), &plain_curve_csv(&meta, &Curve { grid, values, bands: None }))?;
    }
    write_text(args.output.as_deref(), &json_text(&meta, &result))
}

pub fn hazard(args: HazardArgs, command: &'static str) -> Result<()> {
    let sample = load(&args.input)?;
    let kind = kind(&args.model)?;
    let kernel = kernel(&args.smoothing.kernel)?;
    let fitted = fit_model(&sample, kind, &args.model, &args.input)?;
    let (grid, grid_spec) = grid(&sample, &args.grid)?;

    let (h, search) = if args.smoothing.h.eq_ignore_ascii_case("auto") {
        let s = lscv(&fitted, &sample, &args.smoothing, kernel)?;
        (s.h_star, Some(s))
    } else {
        let h: f64 = args.smoothing.h.parse().map_err(|_| usage(format!("--h must be a number or `auto`, got '{}'", args.smoothing.h)))?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(usage("--h must be positive"));
        }
        (h, None)
    };

    let boot = args.boot.bands.map(|b| boot_config(&args.boot, b, &sample, args.model.seed));
    let (curve, band_report): (_, Option<BandReport>) = match &boot {
        Some(config) => {
            let corr = correction(kind, &args.model, &args.input)?;
            let (c, r) = confidence_bands(&sample, &corr, h, kernel, &grid, config)?;
            (c, Some(r))
        }
        None => {
            let c = match &fitted {
                Fitted::Np(f) => hazard_np(f, h, kernel, &grid)?,
                Fitted::Sp(f) => hazard_sp(f, h, kernel, &grid)?,
                Fitted::Naive(_) => hazard_naive(&sample, h, kernel, &grid)?,
            };
            (c, None)
        }
    };
    let boundary = near_boundary(&grid, &sample, h);
    if boundary {
        eprintln!("warning: grid points within one bandwidth of the lifetime range ends are affected by boundary bias");
    }

    #[derive(Serialize)]
    struct Config<'a> {
        #[serde(flatten)]
        input: ResolvedInput<'a>,
        kind: EstimatorKind,
        family: Option<&'a str>,
        fix: Option<(f64, f64)>,
        restarts: usize,
        kernel: Kernel,
        h: f64,
        h_source: &'static str,
        h_grid: Option<(f64, f64, usize)>,
        range: Option<(f64, f64)>,
        grid: (f64, f64, usize),
        bootstrap: Option<&'a BootstrapConfig>,
    }
    let config = Config {
        input: resolved_input(&args.input, &sample, kind),
        kind,
        family: (kind == EstimatorKind::Sp).then_some(args.model.family.as_str()),
        fix: args.model.fix,
        restarts: args.model.restarts,
        kernel,
        h,
        h_source: if search.is_some() { "lscv" } else { "user" },
        h_grid: search.as_ref().map(|s| (s.h_grid[0], s.h_grid[s.h_grid.len() - 1], s.h_grid.len())),
        range: search.as_ref().map(|s| s.integration_range),
        grid: grid_spec,
        bootstrap: boot.as_ref(),
    };
    let meta = Meta::new(command, Some(args.model.seed), &config);
    write_text(args.output.output.as_deref(), &hazard_csv(&meta, &curve))?;

    #[derive(Serialize)]
    struct HazardResult {
        kind: EstimatorKind,
        bandwidth: f64,
        boundary_warning: bool,
        lscv: Option<BandwidthSearch>,
        bands: Option<BandReport>,
        fit: Option<FitSummary>,
    }
    let result = HazardResult { kind, bandwidth: h, boundary_warning: boundary, lscv: search, bands: band_report, fit: fit_summary(&fitted) };
    write_summary(args.output.summary.as_deref(), args.output.output.as_deref(), &json_text(&meta, &result))
}

pub fn gfun(args: GfunArgs) -> Result<()> {
    let sample = load(&args.input)?;
    let kind = kind(&args.model)?;
    let kernel = kernel(&args.kernel)?;
    let (grid, grid_spec) = grid(&sample, &args.grid)?;
    let fitted = fit_model(&sample, kind, &args.model, &args.input)?;
    let boot = args.boot.bands.map(|b| boot_config(&args.boot, b, &sample, args.model.seed));
    let (curve, band_report) = match (&boot, &fitted) {
        (Some(config), _) => {
            let corr = correction(kind, &args.model, &args.input)?;
            let (c, r) = biasing_bands(&sample, &corr, kernel, &grid, config)?;
            (c, Some(r))
        }
        (None, Fitted::Np(f)) => (biasing_curve(f, &grid)?, None),
        (None, Fitted::Sp(f)) => (biasing_curve(f, &grid)?, None),
        (None, Fitted::Naive(_)) => (Curve { values: vec![1.0; grid.len()], grid, bands: None }, None),
    };

    #[derive(Serialize)]
    struct Config<'a> {
        #[serde(flatten)]
        input: ResolvedInput<'a>,
        kind: EstimatorKind,
        family: Option<&'a str>,
        fix: Option<(f64, f64)>,
        restarts: usize,
        grid: (f64, f64, usize),
        bootstrap: Option<&'a BootstrapConfig>,
        bootstrap_kernel: Option<Kernel>,
    }
    let config = Config {
        input: resolved_input(&args.input, &sample, kind),
        kind,
        family: (kind == EstimatorKind::Sp).then_some(args.model.family.as_str()),
        fix: args.model.fix,
        restarts: args.model.restarts,
        grid: grid_spec,
        bootstrap: boot.as_ref(),
        bootstrap_kernel: boot.as_ref().map(|_| kernel),
    };
    let meta = Meta::new("gfun", Some(args.model.seed), &config);
    write_text(args.output.output.as_deref(), &plain_curve_csv(&meta, &curve))?;

    #[derive(Serialize)]
    struct GfunResult {
        kind: EstimatorKind,
        bands: Option<BandReport>,
        fit: Option<FitSummary>,
    }
    let result = GfunResult { kind, bands: band_report, fit: fit_summary(&fitted) };
    write_summary(args.output.summary.as_deref(), args.output.output.as_deref(), &json_text(&meta, &result))
}

pub fn bandwidth(args: BandwidthArgs) -> Result<()> {
    if !args.smoothing.h.eq_ignore_ascii_case("auto") {
        return Err(usage("bandwidth always cross-validates; drop --h"));
    }
    let sample = load(&args.input)?;
    let kind = kind(&args.model)?;
    let kernel = kernel(&args.smoothing.kernel)?;
    let fitted = fit_model(&sample, kind, &args.model, &args.input)?;
    let search = lscv(&fitted, &sample, &args.smoothing, kernel)?;

    #[derive(Serialize)]
    struct Config<'a> {
        #[serde(flatten)]
        input: ResolvedInput<'a>,
        kind: EstimatorKind,
        family: Option<&'a str>,
        fix: Option<(f64, f64)>,
        restarts: usize,
        kernel: Kernel,
        h_grid: (f64, f64, usize),
        range: (f64, f64),
    }
    let config = Config {
        input: resolved_input(&args.input, &sample, kind),
        kind,
        family: (kind == EstimatorKind::Sp).then_some(args.model.family.as_str()),
        fix: args.model.fix,
        restarts: args.model.restarts,
        kernel,
        h_grid: (search.h_grid[0], search.h_grid[search.h_grid.len() - 1], search.h_grid.len()),
        range: search.integration_range,
    };
    let meta = Meta::new("bandwidth", Some(args.model.seed), &config);
    let text = csv_text(&meta, "x,value", search.h_grid.iter().zip(&search.scores).map(|(h, s)| format!("{h},{s}")));
    write_text(args.output.output.as_deref(), &text)?;
    write_summary(args.output.summary.as_deref(), args.output.output.as_deref(), &json_text(&meta, &search))
}

fn study_models(args: &SimulateArgs) -> Result<Vec<ModelSpec>> {
    let ids: Vec<ModelId> = if args.model.eq_ignore_ascii_case("misspec") {
        if args.a.is_empty() {
            return Err(usage("--model misspec needs --a"));
        }
        args.a.iter().map(|&a| ModelId::Misspec(a)).collect()
    } else {
        if !args.a.is_empty() {
            return Err(usage("--a only applies to --model misspec"));
        }
        vec![ModelId::parse(&args.model, None).map_err(|e| usage(e.to_string()))?]
    };
    ids.into_iter().map(|id| ModelSpec::new(id).map_err(|e| usage(e.to_string()))).collect()
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let models = study_models(&args)?;
    let kernel = kernel(&args.kernel)?;
    let kinds = args
        .kinds
        .iter()
        .map(|k| k.parse::<EstimatorKind>().map_err(|_| usage(format!("unknown kind '{k}'"))))
        .collect::<Result<Vec<_>>>()?;
    if args.n == 0 || args.reps == 0 {
        return Err(usage("--n and --reps must be at least 1"));
    }
    let (lo, hi, k) = args.h_grid;
    if !(lo > 0.0) {
        return Err(usage("--h-grid must be positive"));
    }
    let h_grid = geomspace(lo, hi, k);
    let config = StudyConfig { kernel, ise_points: args.ise_points, ..StudyConfig::new(args.n, args.reps, args.seed) };

    let mut studies: Vec<(MiseStudy, Option<QuartileStudy>)> = Vec::new();
    for model in &models {
        let mise = run_mise_study(model, &h_grid, &kinds, &config)?;
        if mise.dropped > 0 {
            eprintln!("{}: dropped {} of {} replicates (fit failures)", model.id, mise.dropped, mise.reps);
        }
        let quartiles = if args.quartiles {
            let bandwidths: Vec<(EstimatorKind, f64)> = mise.kinds.iter().map(|k| (k.kind, k.h_opt)).collect();
            Some(bias_variance_at_quartiles(model, &bandwidths, &config)?)
        } else {
            None
        };
        studies.push((mise, quartiles));
    }

    fs::create_dir_all(&args.out_dir).map_err(|source| CliError::Output { path: args.out_dir.clone(), source })?;
    let meta = Meta::new("simulate", Some(args.seed), &args);
    let out = |name: &str| args.out_dir.join(name);

    let mut rows = Vec::new();
    for (s, _) in &studies {
        for k in &s.kinds {
            rows.push(format!("{},{},{},{},{},{},{},{}", s.model, s.n, k.kind.name(), k.h_opt, k.min_mise, s.reps, s.used, s.dropped));
        }
    }
    write_text(Some(&out("mise.csv")), &csv_text(&meta, "model,n,kind,h_opt,min_mise,reps,used,dropped", rows))?;

    let mut rows = Vec::new();
    for (s, _) in &studies {
        for (j, h) in s.h_grid.iter().enumerate() {
            let mut row = format!("{},{},{h}", s.model, s.n);
            for k in &s.kinds {
                row.push_str(&format!(",{},{}", k.mean_ise[j], k.std_error[j]));
            }
            match &s.ratio_sp_np {
                Some(r) => row.push_str(&format!(",{}", r[j])),
                None => row.push(','),
            }
            rows.push(row);
        }
    }
    let mut header = String::from("model,n,h");
    for kind in &kinds {
        header.push_str(&format!(",mise_{0},se_{0}", kind.name()));
    }
    header.push_str(",ratio_sp_np");
    write_text(Some(&out("mise_by_h.csv")), &csv_text(&meta, &header, rows))?;

    if args.quartiles {
        let mut rows = Vec::new();
        for (_, q) in &studies {
            let q = q.as_ref().expect("computed when requested");
            for c in &q.cells {
                for (j, p) in [0.25, 0.5, 0.75].iter().enumerate() {
                    rows.push(format!(
                        "{},{},{},{},{p},{},{},{},{}",
                        q.model,
                        q.n,
                        c.kind.name(),
                        c.h,
                        c.points[j],
                        c.truth[j],
                        c.bias[j],
                        c.variance[j]
                    ));
                }
            }
        }
        write_text(Some(&out("quartiles.csv")), &csv_text(&meta, "model,n,kind,h,quantile,x,truth,bias,variance", rows))?;
    }

    #[derive(Serialize)]
    struct SimulateResult<'a> {
        model_definitions: Vec<&'a ModelSpec>,
        mise: Vec<&'a MiseStudy>,
        quartiles: Vec<&'a QuartileStudy>,
    }
    let result = SimulateResult {
        model_definitions: models.iter().collect(),
        mise: studies.iter().map(|s| &s.0).collect(),
        quartiles: studies.iter().filter_map(|s| s.1.as_ref()).collect(),
    };
    write_text(Some(&out("summary.json")), &json_text(&meta, &result))
}
