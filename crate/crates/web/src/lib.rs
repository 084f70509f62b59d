//! WebAssembly bindings for the browser demo. Every export returns a JSON
//! string; the plain `*_json` functions hold the logic so they can be
//! tested natively.

use dthazard::bandwidth::{default_h_grid, select_bandwidth, LscvCache, LscvOptions};
use dthazard::bootstrap::replicate_rng;
use dthazard::graph::{check_existence, ExistenceReport};
use dthazard::kernel::{biasing_curve, default_grid, hazard_naive, hazard_np, hazard_sp, Kernel};
use dthazard::npmle::{fit_npmle, NpmleOptions};
use dthazard::parametric::{fit_spmle, Family, SpmleOptions};
use dthazard::quadrature::linspace;
use dthazard::simulation::{generate_sample, ise, true_g_curve, true_g_mc, ModelId, ModelSpec};
use dthazard::Sample;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const GRID_POINTS: usize = 200;
const LSCV_POINTS: usize = 20;

/// One estimated curve, or why it is missing.
#[derive(Debug, Serialize)]
pub struct Estimate {
    pub values: Option<Vec<f64>>,
    pub h: Option<f64>,
    pub ise: Option<f64>,
    pub error: Option<String>,
}

impl Estimate {
    fn failed(e: impl ToString) -> Self {
        Self { values: None, h: None, ise: None, error: Some(e.to_string()) }
    }

    fn ok(values: Vec<f64>, h: Option<f64>) -> Self {
        Self { values: Some(values), h, ise: None, error: None }
    }
}

fn model(name: &str, a: f64) -> Result<ModelSpec, String> {
    let id = ModelId::parse(name, Some(a)).map_err(|e| e.to_string())?;
    ModelSpec::new(id).map_err(|e| e.to_string())
}

fn kernel(name: &str) -> Result<Kernel, String> {
    name.parse().map_err(|e: dthazard::Error| e.to_string())
}

/// `h` when positive, else the cross-validated choice for this fit.
fn bandwidth(h: f64, cache: impl FnOnce() -> dthazard::Result<LscvCache>, sample: &Sample, k: Kernel) -> dthazard::Result<f64> {
    if h > 0.0 {
        return Ok(h);
    }
    let grid = default_h_grid(sample, LSCV_POINTS)?;
    Ok(select_bandwidth(&cache()?, k, &grid)?.h_star)
}

fn np_estimate(sample: &Sample, h: f64, k: Kernel, grid: &[f64]) -> Estimate {
    let run = || -> dthazard::Result<Estimate> {
        let report = check_existence(sample);
        if !report.exists_unique {
            return Err(dthazard::Error::NonExistence { scc_count: report.scc_count });
        }
        let fit = fit_npmle(sample, NpmleOptions::default())?;
        let h = bandwidth(h, || LscvCache::nonparametric(&fit, &LscvOptions::default()), sample, k)?;
        Ok(Estimate::ok(hazard_np(&fit, h, k, grid)?.values, Some(h)))
    };
    run().unwrap_or_else(Estimate::failed)
}

/// SPMLE hazard with the family placed on `(t + shift) / scale`; results are mapped back.
fn sp_estimate(sample: &Sample, family: Family, (shift, scale): (f64, f64), h: f64, k: Kernel, grid: &[f64]) -> Estimate {
    let run = || -> dthazard::Result<Estimate> {
        let scaled = sample.affine_rescale(shift, scale)?;
        let fit = fit_spmle(&scaled, family, None, &SpmleOptions::default())?;
        let h = bandwidth(h / scale, || LscvCache::semiparametric(&fit, &LscvOptions::default()), &scaled, k)?;
        let grid: Vec<f64> = grid.iter().map(|t| (t + shift) / scale).collect();
        let values = hazard_sp(&fit, h, k, &grid)?.values.iter().map(|v| v / scale).collect();
        Ok(Estimate::ok(values, Some(h * scale)))
    };
    run().unwrap_or_else(Estimate::failed)
}

fn naive_estimate(sample: &Sample, h: f64, k: Kernel, grid: &[f64]) -> Estimate {
    let h = if h > 0.0 { h } else { dthazard::bandwidth::normal_reference_bandwidth(&sample.lifetimes()) };
    match hazard_naive(sample, h, k, grid) {
        Ok(c) => Estimate::ok(c.values, Some(h)),
        Err(e) => Estimate::failed(e),
    }
}

#[derive(Debug, Serialize)]
pub struct SimulatedHazards {
    pub model: String,
    pub n: usize,
    pub alpha: f64,
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub np: Estimate,
    pub sp: Estimate,
    pub naive: Estimate,
}

/// Draws one sample from a simulation model and compares the three hazard
/// estimators with the true hazard over the central part of the lifetime law.
pub fn simulate_hazards_json(model_name: &str, a: f64, n: usize, seed: u32, h: f64, kernel_name: &str) -> Result<String, String> {
    let m = model(model_name, a)?;
    let k = kernel(kernel_name)?;
    if !(1..=20_000).contains(&n) {
        return Err("n must be between 1 and 20000".into());
    }
    let sample = generate_sample(&m, n, &mut replicate_rng(seed as u64, 0)).map_err(|e| e.to_string())?;
    let range = m.ise_range();
    let grid = linspace(range.0, range.1, GRID_POINTS);
    let truth: Vec<f64> = grid.iter().map(|&x| m.hazard(x)).collect();
    let with_ise = |mut e: Estimate, kind| {
        if let Some(v) = &e.values {
            let curve = dthazard::kernel::HazardCurve { grid: grid.clone(), values: v.clone(), bandwidth: e.h.unwrap_or(h), kernel: k, kind, bands: None };
            e.ise = ise(&curve, |x| m.hazard(x), range).ok();
        }
        e
    };
    use dthazard::kernel::EstimatorKind as K;
    let out = SimulatedHazards {
        model: m.id.to_string(),
        n,
        alpha: m.alpha(),
        np: with_ise(np_estimate(&sample, h, k, &grid), K::Np),
        sp: with_ise(sp_estimate(&sample, Family::BetaOne, m.truncation_scale(), h, k, &grid), K::Sp),
        naive: with_ise(naive_estimate(&sample, h, k, &grid), K::Naive),
        grid,
        truth,
    };
    Ok(serde_json::to_string(&out).expect("serializable"))
}

#[derive(Debug, Serialize)]
pub struct BiasingFunctions {
    pub model: String,
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub monte_carlo: Vec<f64>,
    pub np: Estimate,
    pub sp: Estimate,
}

/// True, Monte Carlo (20000 untruncated draws) and estimated biasing functions.
pub fn biasing_functions_json(model_name: &str, a: f64, n: usize, seed: u32) -> Result<String, String> {
    let m = model(model_name, a)?;
    if !(1..=20_000).contains(&n) {
        return Err("n must be between 1 and 20000".into());
    }
    let grid = linspace(0.25, 1.0, GRID_POINTS);
    let truth = true_g_curve(&m, &grid).values;
    let monte_carlo = true_g_mc(&m, 20_000, &grid, &mut replicate_rng(seed as u64, 1)).values;
    let sample = generate_sample(&m, n, &mut replicate_rng(seed as u64, 0)).map_err(|e| e.to_string())?;
    let np = if check_existence(&sample).exists_unique {
        fit_npmle(&sample, NpmleOptions::default())
            .and_then(|f| biasing_curve(&f, &grid))
            .map_or_else(Estimate::failed, |c| Estimate::ok(c.values, None))
    } else {
        Estimate::failed("the NPMLE does not exist for this sample")
    };
    let (shift, scale) = m.truncation_scale();
    let scaled_grid: Vec<f64> = grid.iter().map(|t| (t + shift) / scale).collect();
    let sp = m
        .fit_working_spmle(&sample, &SpmleOptions::default())
        .and_then(|f| biasing_curve(&f, &scaled_grid))
        .map_or_else(Estimate::failed, |c| Estimate::ok(c.values, None));
    let out = BiasingFunctions { model: m.id.to_string(), grid, truth, monte_carlo, np, sp };
    Ok(serde_json::to_string(&out).expect("serializable"))
}

#[derive(Debug, Serialize)]
pub struct CsvAnalysis {
    pub n: usize,
    pub tau: Option<f64>,
    pub existence: ExistenceReport,
    pub grid: Vec<f64>,
    pub np: Estimate,
    pub sp: Estimate,
    pub naive: Estimate,
    pub g_np: Estimate,
    pub g_sp: Estimate,
}

/// Hazard and biasing-function estimates for pasted `u,x,v` data.
/// `scale <= 0` skips the `(t + shift) / scale` transform and `h <= 0` cross-validates.
pub fn analyze_csv_json(text: &str, shift: f64, scale: f64, family_name: &str, h: f64, kernel_name: &str) -> Result<String, String> {
    let k = kernel(kernel_name)?;
    let family = match family_name {
        "beta" => Family::Beta,
        "beta1" => Family::BetaOne,
        "uniform" => Family::Uniform { fixed: None },
        other => return Err(format!("unknown family '{other}'")),
    };
    let mut sample = dthazard::data::read_csv(text.as_bytes()).map_err(|e| e.to_string())?;
    if scale > 0.0 {
        sample = sample.affine_rescale(shift, scale).map_err(|e| e.to_string())?;
    }
    let grid = default_grid(&sample, GRID_POINTS);
    let existence = check_existence(&sample);
    let g_np = if existence.exists_unique {
        fit_npmle(&sample, NpmleOptions::default())
            .and_then(|f| biasing_curve(&f, &grid))
            .map_or_else(Estimate::failed, |c| Estimate::ok(c.values, None))
    } else {
        Estimate::failed("the NPMLE does not exist for this sample")
    };
    let g_sp = fit_spmle(&sample, family, None, &SpmleOptions::default())
        .and_then(|f| biasing_curve(&f, &grid))
        .map_or_else(Estimate::failed, |c| Estimate::ok(c.values, None));
    let out = CsvAnalysis {
        n: sample.len(),
        tau: sample.tau(),
        np: np_estimate(&sample, h, k, &grid),
        sp: sp_estimate(&sample, family, (0.0, 1.0), h, k, &grid),
        naive: naive_estimate(&sample, h, k, &grid),
        existence,
        g_np,
        g_sp,
        grid,
    };
    Ok(serde_json::to_string(&out).expect("serializable"))
}

#[wasm_bindgen]
pub fn simulate_hazards(model: &str, a: f64, n: usize, seed: u32, h: f64, kernel: &str) -> Result<String, JsValue> {
    simulate_hazards_json(model, a, n, seed, h, kernel).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn biasing_functions(model: &str, a: f64, n: usize, seed: u32) -> Result<String, JsValue> {
    biasing_functions_json(model, a, n, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn analyze_csv(text: &str, shift: f64, scale: f64, family: &str, h: f64, kernel: &str) -> Result<String, JsValue> {
    analyze_csv_json(text, shift, scale, family, h, kernel).map_err(|e| JsValue::from_str(&e))
}
