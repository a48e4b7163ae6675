mod args;
mod input;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use ifs_core::baselines::RngSeed;
use ifs_core::experiments::{
    efficiency_csv, fit_ifs_with_report, run_benchmark, run_missing_data_experiment, BenchmarkConfig,
    EfficiencyRow, FitConfig, Metric,
};
use ifs_core::ifs_operator::{evaluate_cdf, fixed_point_cdf_on_grid};
use ifs_core::spectral::{density_on_support, fit_density, FourierDensity, DEFAULT_MAX_TERMS};
use ifs_core::{IfsError, IfsModel, MapKind, Sample, SupportInterval};

use args::{BenchmarkArgs, Cli, Command, EvalArgs, FitArgs, GlobalOpts, MissingDemoArgs};

enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<IfsError> for CliError {
    fn from(e: IfsError) -> Self {
        let msg = e.to_string();
        match e {
            IfsError::NumericalFailure(_)
            | IfsError::NonConvergence(_)
            | IfsError::NonInvertible
            | IfsError::TooManyFailures { .. } => CliError::Numerical(msg),
            IfsError::InvalidArgument(_) | IfsError::DegenerateSample(_) | IfsError::NoData | IfsError::Schema(_) => {
                CliError::Data(msg)
            }
        }
    }
}

type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(&cli.global, a),
        Command::Eval(a) => cmd_eval(&cli.global, a),
        Command::Benchmark(a) => cmd_benchmark(&cli.global, a),
        Command::MissingDemo(a) => cmd_missing_demo(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn fit_config(global: &GlobalOpts) -> Result<FitConfig, CliError> {
    let mut config = FitConfig::default();
    if let Some(m) = global.moments {
        if m < 1 {
            return Err(CliError::Usage("--moments must be at least 1".into()));
        }
        config.moment_order = m;
    }
    if let Some(g) = global.grid {
        if g < 2 {
            return Err(CliError::Usage("--grid must be at least 2".into()));
        }
        config.grid = g;
    }
    if let Some(k) = global.iterations {
        if k < 1 {
            return Err(CliError::Usage("--iterations must be at least 1".into()));
        }
        config.iterations = k;
    }
    Ok(config)
}

fn reject_support(global: &GlobalOpts, command: &str) -> CliResult {
    match global.support {
        Some(_) => Err(CliError::Usage(format!("--support does not apply to `{command}`"))),
        None => Ok(()),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_sample(path: &Path, support: Option<(f64, f64)>) -> Result<Sample, CliError> {
    let values = input::parse_column(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if values.is_empty() {
        return Err(CliError::Data(format!("{}: no observations", path.display())));
    }
    let sample = match support {
        Some((a, b)) => Sample::new(values, SupportInterval::new(a, b)?)?,
        None if values.iter().all(|v| (0.0..=1.0).contains(v)) => Sample::new(values, SupportInterval::UNIT)?,
        None => {
            let sample = Sample::with_range_support(values)?;
            let s = sample.support();
            eprintln!(
                "warning: no --support given and the data leave [0, 1]; using the sample range [{}, {}]. \
                 The estimate is then of a distribution with exactly that support.",
                s.alpha(),
                s.beta()
            );
            sample
        }
    };
    Ok(sample)
}

fn format_vector(p: &[f64]) -> String {
    let shown: Vec<String> = p.iter().take(16).map(|v| format!("{v:.6}")).collect();
    let tail = if p.len() > 16 { format!(", ... ({} total)", p.len()) } else { String::new() };
    format!("({}{tail})", shown.join(", "))
}

fn cmd_fit(global: &GlobalOpts, args: &FitArgs) -> CliResult {
    let kind = MapKind::from(args.family);
    let mut config = fit_config(global)?;
    match (kind, args.i_star, args.quantiles) {
        (MapKind::W1, Some(k), _) => config.w1_i_star = k,
        (MapKind::W2, Some(k), _) => config.w2_i_star = k,
        (MapKind::Q1 | MapKind::Q2, Some(_), _) => {
            return Err(CliError::Usage("--i-star applies to the w1 and w2 families".into()))
        }
        (MapKind::W1 | MapKind::W2, _, Some(_)) => {
            return Err(CliError::Usage("--quantiles applies to the q1 and q2 families".into()))
        }
        (_, None, q) => config.quantile_maps = q,
    }
    if config.quantile_maps == Some(0) {
        return Err(CliError::Usage("--quantiles must be at least 1".into()));
    }
    let sample = load_sample(&args.input, global.support)?;
    let (model, report) = fit_ifs_with_report(&sample, kind, &config)?;

    eprintln!("family {kind}: {} maps, n = {}", model.family().len(), sample.len());
    match &report {
        None => eprintln!("quantile family: p fixed at 1/N"),
        Some(r) => {
            eprintln!("S(p*) = {:.6e}", r.objective);
            eprintln!(
                "solver: {} iterations, converged = {}, lambda = {:.1e}, |sum p - 1| before renormalization = {:.3e}",
                r.iterations, r.converged, r.lambda, r.penalty_residual
            );
        }
    }
    eprintln!("p = {}", format_vector(model.probabilities()));

    let json = model.to_json();
    match &args.out {
        Some(path) => write(path, &json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn density_for(model: &IfsModel, n: Option<usize>) -> Result<FourierDensity, CliError> {
    let n = n.or(model.sample_size()).ok_or_else(|| {
        CliError::Usage("the model records no sample size; pass --n for the density term rule".into())
    })?;
    let fd = fit_density(model, n, DEFAULT_MAX_TERMS)?;
    eprintln!("density: {} Fourier terms", fd.num_terms());
    if fd.truncated {
        eprintln!("warning: no two consecutive small coefficients; using {} terms", fd.num_terms());
    }
    if !fd.char_fn_converged {
        eprintln!("warning: characteristic function iteration did not reach its tolerance");
    }
    Ok(fd)
}

fn cmd_eval(global: &GlobalOpts, args: &EvalArgs) -> CliResult {
    reject_support(global, "eval")?;
    if args.at.is_empty() && args.grid_out.is_none() {
        return Err(CliError::Usage("eval needs --at or --grid-out".into()));
    }
    let config = fit_config(global)?;
    let model = IfsModel::from_json(&read(&args.model)?)?;
    let cdf = fixed_point_cdf_on_grid(&model, config.iterations, config.grid)?.cdf;
    let fd = if args.density { Some(density_for(&model, args.n)?) } else { None };

    for &x in &args.at {
        let f = evaluate_cdf(&model, &cdf, x);
        match &fd {
            Some(fd) => println!("{x}\t{f}\t{}", density_on_support(&model, fd, x)),
            None => println!("{x}\t{f}"),
        }
    }
    if let Some(path) = &args.grid_out {
        let support = model.support();
        let mut out = String::from(if fd.is_some() { "x,cdf,density\n" } else { "x,cdf\n" });
        for j in 0..=config.grid {
            let x = support.from_unit(j as f64 / config.grid as f64);
            let f = evaluate_cdf(&model, &cdf, x);
            match &fd {
                Some(fd) => writeln!(out, "{x},{f},{}", density_on_support(&model, fd, x)),
                None => writeln!(out, "{x},{f}"),
            }
            .expect("write to string");
        }
        write(path, &out)?;
    }
    Ok(())
}

fn summary_table(rows: &[EfficiencyRow], families: &[MapKind]) -> String {
    let mut out = format!("{:<14} {:>5}", "law", "n");
    for f in families {
        write!(out, " {:>9} {:>9}", format!("{f} AMSE"), format!("{f} SUP")).expect("write to string");
    }
    out.push('\n');
    let per_line = 2 * families.len();
    for chunk in rows.chunks(per_line) {
        write!(out, "{:<14} {:>5}", chunk[0].distribution, chunk[0].n).expect("write to string");
        for f in families {
            for metric in [Metric::Amse, Metric::Sup] {
                let r = chunk.iter().find(|r| r.family == *f && r.metric == metric).expect("row per family");
                write!(out, " {:>9.2}", r.ratio_percent).expect("write to string");
            }
        }
        out.push('\n');
    }
    let failures: usize = rows.iter().filter(|r| r.metric == Metric::Amse).map(|r| r.failures).sum();
    if failures > 0 {
        writeln!(out, "{failures} failed fits excluded").expect("write to string");
    }
    out
}

fn cmd_benchmark(global: &GlobalOpts, args: &BenchmarkArgs) -> CliResult {
    reject_support(global, "benchmark")?;
    let mut config = match &args.config {
        Some(path) => toml::from_str::<BenchmarkConfig>(&read(path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None => BenchmarkConfig::default(),
    };
    let fit = fit_config(global)?;
    if global.moments.is_some() {
        config.fit.moment_order = fit.moment_order;
    }
    if global.grid.is_some() {
        config.fit.grid = fit.grid;
    }
    if global.iterations.is_some() {
        config.fit.iterations = fit.iterations;
    }
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(r) = args.replications {
        config.replications = r;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let rows = run_benchmark(&config)?;
    let table = summary_table(&rows, &config.families);
    let csv = efficiency_csv(&rows);
    match &args.out {
        Some(path) => {
            write(path, &csv)?;
            print!("{table}");
        }
        None => {
            print!("{csv}");
            eprint!("{table}");
        }
    }
    Ok(())
}

fn cmd_missing_demo(global: &GlobalOpts, args: &MissingDemoArgs) -> CliResult {
    reject_support(global, "missing-demo")?;
    let config = fit_config(global)?;
    let seed = RngSeed(global.seed.unwrap_or(RngSeed::DEFAULT.0));
    let report = run_missing_data_experiment(args.n, seed, &config)?;

    let dir = &args.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let summary = format!(
        "observed {} of {} points\nAMSE ratio (IFS/EDF) {:.2}%\nSUP ratio (IFS/EDF) {:.2}%\ndensity terms {}\n",
        report.censored.len(),
        report.original_size,
        report.amse_ratio_percent,
        report.sup_ratio_percent,
        report.density.num_terms()
    );
    write(&dir.join("cdf.csv"), &report.cdf_csv())?;
    write(&dir.join("pdf.csv"), &report.pdf_csv())?;
    write(&dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}
