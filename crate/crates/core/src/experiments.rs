//! Monte Carlo comparison of IFS estimators against the empirical
//! distribution function, and the window-censoring experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine_maps::{
    build_quantile_maps, build_wavelet_maps_w1, build_wavelet_maps_w2, MapKind, SupportInterval,
};
use crate::baselines::{beta_cdf_clamped, beta_pdf, beta_sample, BetaParams, Edf, KernelDensity, RngSeed};
use crate::error::{invalid, IfsError, Result};
use crate::ifs_operator::{evaluate_cdf, fixed_point_cdf_on_grid, IfsModel, PiecewiseCdf, DEFAULT_GRID, DEFAULT_ITERATIONS};
use crate::inverse_problem::{assemble_quadratic_problem, solve_box_constrained, ProbabilityVector, SolverConfig, SolverReport};
use crate::moments::{empirical_moments, transfer_matrix, Sample};
use crate::spectral::{density_on_support, fit_density, FourierDensity, DEFAULT_MAX_TERMS};

pub const DEFAULT_MOMENT_ORDER: usize = 50;
pub const DEFAULT_EVAL_GRID: usize = 512;

/// How a single estimator is fitted and evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub w1_i_star: u32,
    pub w2_i_star: u32,
    /// Number of quantile maps; `None` means `n / 2`.
    pub quantile_maps: Option<usize>,
    pub moment_order: usize,
    pub iterations: usize,
    pub grid: usize,
    pub solver: SolverConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            w1_i_star: 5,
            w2_i_star: 8,
            quantile_maps: None,
            moment_order: DEFAULT_MOMENT_ORDER,
            iterations: DEFAULT_ITERATIONS,
            grid: DEFAULT_GRID,
            solver: SolverConfig::default(),
        }
    }
}

/// A fitted model, its solver diagnostics (absent for Q1) and its CDF.
#[derive(Debug, Clone)]
pub struct IfsFit {
    pub model: IfsModel,
    pub report: Option<SolverReport>,
    pub cdf: PiecewiseCdf,
}

impl IfsFit {
    /// `F(x)` on the original support.
    pub fn cdf_at(&self, x: f64) -> f64 {
        evaluate_cdf(&self.model, &self.cdf, x)
    }
}

/// Builds the maps of `kind` for `sample` and sets the probabilities: merge
/// counts over `N` for Q1, the moment-matching program otherwise.
pub fn fit_ifs(sample: &Sample, kind: MapKind, config: &FitConfig) -> Result<IfsModel> {
    fit_ifs_with_report(sample, kind, config).map(|(model, _)| model)
}

pub fn fit_ifs_with_report(sample: &Sample, kind: MapKind, config: &FitConfig) -> Result<(IfsModel, Option<SolverReport>)> {
    let family = match kind {
        MapKind::W1 => build_wavelet_maps_w1(config.w1_i_star)?,
        MapKind::W2 => build_wavelet_maps_w2(config.w2_i_star)?,
        MapKind::Q1 | MapKind::Q2 => {
            let count = config.quantile_maps.unwrap_or(sample.len() / 2).max(1);
            build_quantile_maps(sample, count)?.with_kind(kind)
        }
    };
    let (p, report) = if kind == MapKind::Q1 {
        let weights: Vec<f64> = family.counts().iter().map(|&c| c as f64).collect();
        (ProbabilityVector::from_weights(&weights)?, None)
    } else {
        let g = empirical_moments(sample, config.moment_order)?;
        let qp = assemble_quadratic_problem(&transfer_matrix(&family, &g), &g)?;
        let report = solve_box_constrained(&qp, &config.solver)?;
        (report.solution.clone(), Some(report))
    };
    let model = IfsModel::new(family, p, sample.support())?.with_sample_size(sample.len());
    Ok((model, report))
}

/// Fits and iterates `T` to get the CDF estimate.
pub fn estimate(sample: &Sample, kind: MapKind, config: &FitConfig) -> Result<IfsFit> {
    let (model, report) = fit_ifs_with_report(sample, kind, config)?;
    let cdf = fixed_point_cdf_on_grid(&model, config.iterations, config.grid)?.cdf;
    Ok(IfsFit { model, report, cdf })
}

/// The `grid_size` equispaced interior points `alpha + w j / (G + 1)`, `j = 1..=G`.
pub fn interior_grid(support: SupportInterval, grid_size: usize) -> Vec<f64> {
    (1..=grid_size)
        .map(|j| support.from_unit(j as f64 / (grid_size + 1) as f64))
        .collect()
}

/// Mean of `(F_hat - F)^2` over the interior grid.
pub fn amse(estimate: impl Fn(f64) -> f64, truth: impl Fn(f64) -> f64, support: SupportInterval, grid_size: usize) -> f64 {
    let xs = interior_grid(support, grid_size);
    xs.iter().map(|&x| (estimate(x) - truth(x)).powi(2)).sum::<f64>() / xs.len() as f64
}

/// Max of `|F_hat - F|` over the interior grid.
pub fn sup_distance(estimate: impl Fn(f64) -> f64, truth: impl Fn(f64) -> f64, support: SupportInterval, grid_size: usize) -> f64 {
    interior_grid(support, grid_size)
        .iter()
        .map(|&x| (estimate(x) - truth(x)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "AMSE")]
    Amse,
    #[serde(rename = "SUP")]
    Sup,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Amse => "AMSE",
            Metric::Sup => "SUP",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    /// Beta shape pairs `[a, b]`.
    pub distributions: Vec<[f64; 2]>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub families: Vec<MapKind>,
    pub seed: u64,
    pub eval_grid_size: usize,
    pub fit: FitConfig,
}

impl Default for BenchmarkConfig {
    /// The full tables: eight laws, six sample sizes, four families, 100 runs.
    fn default() -> Self {
        Self {
            distributions: BetaParams::table_laws()
                .iter()
                .map(|p| [p.shape_a(), p.shape_b()])
                .collect(),
            sample_sizes: vec![10, 20, 30, 50, 100, 250],
            replications: 100,
            families: MapKind::ALL.to_vec(),
            seed: RngSeed::DEFAULT.0,
            eval_grid_size: DEFAULT_EVAL_GRID,
            fit: FitConfig::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<Vec<BetaParams>> {
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        if self.sample_sizes.iter().any(|&n| n < 2) {
            return Err(invalid("sample sizes must be at least 2"));
        }
        if self.families.is_empty() || self.distributions.is_empty() || self.sample_sizes.is_empty() {
            return Err(invalid("benchmark needs at least one law, size and family"));
        }
        if self.eval_grid_size == 0 {
            return Err(invalid("evaluation grid must be nonempty"));
        }
        self.distributions
            .iter()
            .map(|[a, b]| BetaParams::new(*a, *b))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub distribution: String,
    pub n: usize,
    pub family: MapKind,
    pub metric: Metric,
    /// Mean over successful replications of `100 * IFS metric / EDF metric`.
    pub ratio_percent: f64,
    pub failures: usize,
}

/// Per-replication ratios `(AMSE ratio, SUP ratio)` for each requested family.
fn replicate(law: BetaParams, n: usize, seed: RngSeed, config: &BenchmarkConfig) -> Result<Vec<Option<(f64, f64)>>> {
    let sample = beta_sample(law, n, seed)?;
    let truth = |x: f64| beta_cdf_clamped(law, x).0;
    let edf = Edf::new(&sample);
    let support = sample.support();
    let grid = config.eval_grid_size;
    let edf_amse = amse(|x| edf.eval(x), truth, support, grid);
    let edf_sup = sup_distance(|x| edf.eval(x), truth, support, grid);
    Ok(config
        .families
        .iter()
        .map(|&kind| {
            let fit = estimate(&sample, kind, &config.fit).ok()?;
            let ifs_amse = amse(|x| fit.cdf_at(x), truth, support, grid);
            let ifs_sup = sup_distance(|x| fit.cdf_at(x), truth, support, grid);
            let ratios = (100.0 * ifs_amse / edf_amse, 100.0 * ifs_sup / edf_sup);
            (ratios.0.is_finite() && ratios.1.is_finite()).then_some(ratios)
        })
        .collect())
}

/// Relative efficiency (IFS / EDF) for every law, size and family.
///
/// Replication `r` of law `d` at size index `s` draws its sample from
/// `seed.split(d).split(s).split(r)`, so results do not depend on scheduling.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<Vec<EfficiencyRow>> {
    let laws = config.validate()?;
    let master = RngSeed(config.seed);
    let mut rows = Vec::new();
    for (d, &law) in laws.iter().enumerate() {
        for (s, &n) in config.sample_sizes.iter().enumerate() {
            let cell_seed = master.split(d as u64).split(s as u64);
            let per_rep: Vec<Vec<Option<(f64, f64)>>> = (0..config.replications)
                .into_par_iter()
                .map(|r| replicate(law, n, cell_seed.split(r as u64), config))
                .collect::<Result<_>>()?;
            for (f, &family) in config.families.iter().enumerate() {
                let ok: Vec<(f64, f64)> = per_rep.iter().filter_map(|rep| rep[f]).collect();
                let failures = config.replications - ok.len();
                if failures * 20 > config.replications {
                    return Err(IfsError::TooManyFailures {
                        failed: failures,
                        total: config.replications,
                    });
                }
                let count = ok.len() as f64;
                let mean_amse = ok.iter().map(|r| r.0).sum::<f64>() / count;
                let mean_sup = ok.iter().map(|r| r.1).sum::<f64>() / count;
                for (metric, ratio) in [(Metric::Amse, mean_amse), (Metric::Sup, mean_sup)] {
                    rows.push(EfficiencyRow {
                        distribution: law.label(),
                        n,
                        family,
                        metric,
                        ratio_percent: ratio,
                        failures,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// CSV with header `distribution,n,family,metric,ratio_percent,failures`.
pub fn efficiency_csv(rows: &[EfficiencyRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("in-memory csv write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory csv flush")).expect("utf8 csv")
}

/// Disjoint open windows in which observations are visible.
#[derive(Debug, Clone, PartialEq)]
pub struct CensorWindows {
    windows: Vec<(f64, f64)>,
}

impl CensorWindows {
    pub fn new(mut windows: Vec<(f64, f64)>, support: SupportInterval) -> Result<Self> {
        if windows.is_empty() {
            return Err(invalid("at least one window is required"));
        }
        windows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(lo, hi) in &windows {
            if !(lo < hi) || lo < support.alpha() || hi > support.beta() {
                return Err(invalid(format!("window ({lo}, {hi}) is empty or outside the support")));
            }
        }
        if windows.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(invalid("windows must be disjoint"));
        }
        Ok(Self { windows })
    }

    /// `(.1, .15) U (.37, .43) U (.7, .8)` on `[0, 1]`.
    pub fn reference() -> Self {
        Self {
            windows: vec![(0.1, 0.15), (0.37, 0.43), (0.7, 0.8)],
        }
    }

    pub fn windows(&self) -> &[(f64, f64)] {
        &self.windows
    }

    pub fn contains(&self, x: f64) -> bool {
        self.windows.iter().any(|&(lo, hi)| lo < x && x < hi)
    }

    /// The closed gaps of `support` left unobserved, in order.
    pub fn gaps(&self, support: SupportInterval) -> Vec<(f64, f64)> {
        let mut gaps = Vec::new();
        let mut start = support.alpha();
        for &(lo, hi) in &self.windows {
            if lo > start {
                gaps.push((start, lo));
            }
            start = hi;
        }
        if support.beta() > start {
            gaps.push((start, support.beta()));
        }
        gaps
    }
}

/// Keeps the observations inside any window; the declared support is unchanged.
pub fn apply_window_censoring(sample: &Sample, windows: &CensorWindows) -> Result<Sample> {
    let kept: Vec<f64> = sample
        .values()
        .iter()
        .copied()
        .filter(|&x| windows.contains(x))
        .collect();
    if kept.is_empty() {
        return Err(IfsError::NoData);
    }
    Sample::new(kept, sample.support())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfCurveRow {
    pub x: f64,
    pub true_cdf: f64,
    pub edf: f64,
    pub ifs_cdf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdfCurveRow {
    pub x: f64,
    pub true_pdf: f64,
    pub kernel: f64,
    pub ifs_pdf: f64,
}

#[derive(Debug, Clone)]
pub struct MissingDataReport {
    pub original_size: usize,
    pub censored: Sample,
    pub fit: IfsFit,
    pub density: FourierDensity,
    pub amse_ratio_percent: f64,
    pub sup_ratio_percent: f64,
    pub cdf_curve: Vec<CdfCurveRow>,
    pub pdf_curve: Vec<PdfCurveRow>,
}

impl MissingDataReport {
    pub fn cdf_csv(&self) -> String {
        rows_csv(&self.cdf_curve)
    }

    pub fn pdf_csv(&self) -> String {
        rows_csv(&self.pdf_curve)
    }
}

fn rows_csv<T: Serialize>(rows: &[T]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("in-memory csv write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory csv flush")).expect("utf8 csv")
}

/// Beta(2, 2) data seen only through the reference windows, fitted with W1.
pub fn run_missing_data_experiment(n: usize, seed: RngSeed, config: &FitConfig) -> Result<MissingDataReport> {
    let law = BetaParams::new(2.0, 2.0)?;
    let full = beta_sample(law, n, seed)?;
    let censored = apply_window_censoring(&full, &CensorWindows::reference())?;
    let fit = estimate(&censored, MapKind::W1, config)?;
    let density = fit_density(&fit.model, censored.len(), DEFAULT_MAX_TERMS)?;
    let kernel = KernelDensity::new(&censored)?;

    let truth = |x: f64| beta_cdf_clamped(law, x).0;
    let edf = Edf::new(&censored);
    let support = censored.support();
    let grid = DEFAULT_EVAL_GRID;
    let amse_ratio_percent = 100.0 * amse(|x| fit.cdf_at(x), truth, support, grid)
        / amse(|x| edf.eval(x), truth, support, grid);
    let sup_ratio_percent = 100.0 * sup_distance(|x| fit.cdf_at(x), truth, support, grid)
        / sup_distance(|x| edf.eval(x), truth, support, grid);

    let xs: Vec<f64> = (0..=200).map(|i| support.from_unit(i as f64 / 200.0)).collect();
    let cdf_curve = xs
        .iter()
        .map(|&x| CdfCurveRow {
            x,
            true_cdf: truth(x),
            edf: edf.eval(x),
            ifs_cdf: fit.cdf_at(x),
        })
        .collect();
    let pdf_curve = xs
        .iter()
        .map(|&x| PdfCurveRow {
            x,
            true_pdf: beta_pdf(law, x),
            kernel: kernel.eval(x),
            ifs_pdf: density_on_support(&fit.model, &density, x),
        })
        .collect();
    Ok(MissingDataReport {
        original_size: n,
        censored,
        fit,
        density,
        amse_ratio_percent,
        sup_ratio_percent,
        cdf_curve,
        pdf_curve,
    })
}
