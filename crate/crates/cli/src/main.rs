use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use funlp::covops::{InverseMode, Panel, TauRule};
use funlp::fiv::{iv_irf, IvData};
use funlp::flp::{estimate, irf_profile, Bandwidth, EstimateOptions, HacSpec, IrfInference, Kernel, LpData};
use funlp::fsvar::{estimate_rfvar, fof_estimate, fof_inference, fof_scores, identify_structural, sirf, FofData, Scheme};
use funlp::hilbert::{BasisSpec, FunctionElement, ProductElement};
use funlp::ingest::{
    default_probs, fmt_sig, read_scalar_csv, read_wide_csv, smooth_to_basis, write_irf_csv, write_plot_csv, write_scalar_csv,
    write_wide_csv, FunctionSpec, FunctionalSeries, Period, PlotSeries, RawPanel,
};
use funlp::simlab::{
    rep_rng, run_bias_variance, run_coverage, run_mape, write_coverage_csv, write_mape_csv, Dgp, Estimator, ExperimentA,
    ExperimentAConfig, ExperimentB, ExperimentBConfig, McSettings,
};
use funlp::{Error, ErrorClass, Execution};
use nalgebra::{DMatrix, DVector};

#[derive(Parser)]
#[command(name = "funlp", version, about = "Functional local projections and structural impulse responses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the horizon-h coefficient (alpha, beta).
    Estimate(EstimateArgs),
    /// Impulse-response profile with pointwise confidence intervals.
    Irf(IrfArgs),
    /// Instrumental-variable impulse-response profile.
    IvEstimate(IvArgs),
    /// Structural responses from a reduced-form functional VAR(1).
    SvarIrf(SvarArgs),
    /// Response of the functional variable to a scalar shock, projected on --theta.
    FofIrf(FofArgs),
    /// Simulate the projection design.
    SimulateA(SimArgs),
    /// Simulate the SVAR design.
    SimulateB(SimArgs),
    /// Monte Carlo coverage of the confidence intervals.
    Coverage(CoverageArgs),
    /// Monte Carlo bias and variance against baseline estimators.
    BiasVariance(BiasArgs),
    /// Rolling-window median absolute prediction errors.
    Mape(MapeArgs),
    /// Build quantile curves from a raw (timestamp, value) panel.
    IngestQuantiles(IngestArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Functional series: wide CSV with `t` then g000.. (values on an equispaced
    /// grid over [0, 1]) or c000.. (Fourier coefficients).
    #[arg(long)]
    x: PathBuf,
    /// Scalar outcome CSV `(t, y)`.
    #[arg(long)]
    y: PathBuf,
    /// Scalar controls CSV `(t, w1..wm)`; defaults to the outcome itself.
    #[arg(long)]
    w: Option<PathBuf>,
    /// Odd Fourier dimension used to smooth grid-valued input.
    #[arg(long, default_value_t = 31)]
    basis_dim: usize,
}

#[derive(Args, Clone)]
struct RegArgs {
    /// Fixed cutoff on squared eigenvalues.
    #[arg(long, group = "rule")]
    tau: Option<f64>,
    /// Data-driven cutoff.
    #[arg(long, value_enum, group = "rule")]
    tau_rule: Option<TauRuleArg>,
    /// Retain exactly this many components.
    #[arg(long, group = "rule")]
    fixed_k: Option<usize>,
    #[arg(long, value_enum, default_value = "schur")]
    mode: ModeArg,
    /// Skip demeaning.
    #[arg(long)]
    no_demean: bool,
}

#[derive(Args, Clone)]
struct InfArgs {
    #[arg(long, value_enum, default_value = "bartlett")]
    kernel: KernelArg,
    /// Integer bandwidth or `auto`.
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth)]
    bandwidth: Bandwidth,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Direction: const:<c> | slope:<a,b> | file:<path>.
    #[arg(long, default_value = "const:1")]
    zeta: FunctionSpec,
}

#[derive(Clone, Copy, ValueEnum)]
enum TauRuleArg {
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Schur,
    Pca,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Bartlett,
    Parzen,
    Trunc,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Beta12Zero,
    Beta21Zero,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    A,
    B,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    reg: RegArgs,
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IrfArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    reg: RegArgs,
    #[command(flatten)]
    inf: InfArgs,
    /// Largest horizon; responses are computed for 1..=H.
    #[arg(long, default_value_t = 12)]
    horizons: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Long-format plot data `(series, x, y, lo, hi)`.
    #[arg(long)]
    plot_out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct IvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    reg: RegArgs,
    #[command(flatten)]
    inf: InfArgs,
    /// Functional instrument, same layout as --x.
    #[arg(long)]
    z: PathBuf,
    /// Scalar instruments `(t, z1..zm)`; defaults to the scalar controls.
    #[arg(long)]
    zw: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    horizons: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SvarArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    reg: RegArgs,
    #[arg(long, value_enum, default_value = "beta12-zero")]
    scheme: SchemeArg,
    #[arg(long, default_value_t = 12)]
    horizons: usize,
    /// Functional shock direction.
    #[arg(long, default_value = "const:1")]
    zeta: FunctionSpec,
    /// Grid points for the function-valued response.
    #[arg(long, default_value_t = 101)]
    grid_points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FofArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    reg: RegArgs,
    #[command(flatten)]
    inf: InfArgs,
    /// Functional the response is projected on.
    #[arg(long, default_value = "const:1")]
    theta: FunctionSpec,
    #[arg(long, default_value_t = 12)]
    horizons: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// TOML file overriding the synthetic defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replication index selecting the random stream.
    #[arg(long, default_value_t = 0)]
    rep: u64,
    /// Sample size, overriding the config.
    #[arg(long)]
    t: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long, value_enum, default_value = "a")]
    experiment: ExperimentArg,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    reg: RegArgs,
    #[command(flatten)]
    inf: InfArgs,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "250")]
    t: Vec<usize>,
    /// Horizons, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    horizons: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct BiasArgs {
    #[arg(long, value_enum, default_value = "b")]
    experiment: ExperimentArg,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    horizons: Vec<usize>,
    /// Number of components for the fixed-K and principal-component baselines.
    #[arg(long, default_value_t = 1)]
    fixed_k: usize,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct MapeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.6,0.7")]
    test_fractions: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    horizons: usize,
    #[arg(long, default_value_t = 2)]
    fixed_k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct IngestArgs {
    /// CSV `(timestamp, value)` with a header row.
    #[arg(long)]
    input: PathBuf,
    /// `monthly` or `chunk:<n>`.
    #[arg(long, default_value = "monthly", value_parser = parse_period)]
    period: Period,
    /// Number of probability grid points in [0.005, 0.995].
    #[arg(long, default_value_t = 101)]
    probs: usize,
    /// Fail on periods with too few observations instead of skipping them.
    #[arg(long)]
    strict: bool,
    /// Wide CSV of quantile values (g columns on the probability grid).
    #[arg(long)]
    out: PathBuf,
    /// Also write Fourier coefficients of this dimension to --coeffs-out.
    #[arg(long, requires = "coeffs_out")]
    smooth: Option<usize>,
    #[arg(long)]
    coeffs_out: Option<PathBuf>,
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth, String> {
    if s == "auto" {
        return Ok(Bandwidth::Auto);
    }
    s.parse().map(Bandwidth::Fixed).map_err(|_| "expected an integer or `auto`".into())
}

fn parse_period(s: &str) -> Result<Period, String> {
    if s == "monthly" {
        return Ok(Period::Monthly);
    }
    s.strip_prefix("chunk:")
        .and_then(|n| n.parse().ok())
        .map(Period::Chunk)
        .ok_or_else(|| "expected `monthly` or `chunk:<n>`".into())
}

impl RegArgs {
    fn options(&self) -> EstimateOptions {
        let rule = match (self.tau, self.fixed_k) {
            (Some(t), _) => TauRule::Fixed(t),
            (_, Some(k)) => TauRule::FixedK(k),
            _ => TauRule::Auto,
        };
        let mode = match self.mode {
            ModeArg::Schur => InverseMode::Schur,
            ModeArg::Pca => InverseMode::Pca,
        };
        EstimateOptions { tau_rule: rule, mode, demean: !self.no_demean, ..Default::default() }
    }
}

impl InfArgs {
    fn hac(&self) -> HacSpec {
        let kernel = match self.kernel {
            KernelArg::Bartlett => Kernel::Bartlett,
            KernelArg::Parzen => Kernel::Parzen,
            KernelArg::Trunc => Kernel::Truncated,
        };
        HacSpec { kernel, bandwidth: self.bandwidth }
    }
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn open(path: &Path) -> funlp::Result<File> {
    File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn output(path: &Option<PathBuf>) -> funlp::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

/// Functional series in a Fourier basis, smoothing grid values when needed.
fn load_functional(path: &Path, args: &DataArgs) -> funlp::Result<FunctionalSeries> {
    let series = read_wide_csv(open(path)?, None)?;
    match series.basis.as_ref() {
        BasisSpec::Fourier { .. } => Ok(series),
        BasisSpec::RawGrid { .. } => smooth_to_basis(&series, args.basis_dim),
    }
}

struct Loaded {
    y: DVector<f64>,
    w: DMatrix<f64>,
    x: FunctionalSeries,
    w_is_y: bool,
}

fn load(args: &DataArgs) -> funlp::Result<Loaded> {
    let x = load_functional(&args.x, args)?;
    let (ylab, ym) = read_scalar_csv(open(&args.y)?)?;
    if ym.ncols() != 1 {
        return Err(Error::Data("outcome CSV must have exactly one value column".into()));
    }
    check_labels(&x.labels, &ylab, "outcome")?;
    let y = ym.column(0).into_owned();
    let (w, w_is_y) = match &args.w {
        Some(p) => {
            let (wlab, w) = read_scalar_csv(open(p)?)?;
            check_labels(&x.labels, &wlab, "controls")?;
            (w, false)
        }
        None => (ym, true),
    };
    Ok(Loaded { y, w, x, w_is_y })
}

fn check_labels(a: &[String], b: &[String], what: &str) -> funlp::Result<()> {
    if a != b {
        return Err(Error::Data(format!("{what} dates do not match the functional series")));
    }
    Ok(())
}

impl Loaded {
    fn lp(&self) -> funlp::Result<LpData> {
        let panel = Panel::new(self.x.basis.clone(), &self.w, &self.x.coeffs)?;
        let data = LpData::new(self.y.clone(), panel)?;
        Ok(if self.w_is_y { data.with_y_lag_column(0) } else { data })
    }

    fn basis(&self) -> Arc<BasisSpec> {
        self.x.basis.clone()
    }

    fn zeta(&self, spec: &FunctionSpec) -> funlp::Result<ProductElement> {
        Ok(ProductElement::functional(self.w.ncols(), spec.to_element(&self.basis())?))
    }
}

fn cmd_estimate(a: &EstimateArgs) -> funlp::Result<()> {
    let data = load(&a.data)?;
    let est = estimate(&data.lp()?, a.horizon, &a.reg.options())?;
    let mut w = csv::Writer::from_writer(output(&a.out)?);
    w.write_record(["component", "index", "r", "value"])?;
    w.write_record(["intercept", "0", "", &fmt_sig(est.intercept)])?;
    for (i, v) in est.alpha().iter().enumerate() {
        w.write_record(["alpha", &i.to_string(), "", &fmt_sig(*v)])?;
    }
    for (i, r) in BasisSpec::equispaced(0.0, 1.0, 101).into_iter().enumerate() {
        w.write_record(["beta", &i.to_string(), &fmt_sig(r), &fmt_sig(est.beta().eval(r))])?;
    }
    w.flush()?;
    log::info!("h={} K={} tau={}", est.horizon, est.k, fmt_sig(est.tau));
    Ok(())
}

fn emit_profile(rows: &[IrfInference], out: &Option<PathBuf>, plot: &Option<PathBuf>, svg: &Option<PathBuf>) -> funlp::Result<()> {
    write_irf_csv(rows, output(out)?)?;
    let series = [PlotSeries::from_irf("irf", rows)];
    if let Some(p) = plot {
        write_plot_csv(&series, File::create(p)?)?;
    }
    if let Some(s) = svg {
        std::fs::write(s, funlp::ingest::render_svg(&series))?;
    }
    Ok(())
}

fn cmd_irf(a: &IrfArgs) -> funlp::Result<()> {
    let data = load(&a.data)?;
    let zeta = data.zeta(&a.inf.zeta)?;
    let horizons: Vec<usize> = (1..=a.horizons).collect();
    let rows = irf_profile(&data.lp()?, &horizons, &zeta, a.inf.level, &a.reg.options(), &a.inf.hac(), exec(a.sequential))?;
    emit_profile(&rows, &a.out, &a.plot_out, &a.svg)
}

fn cmd_iv(a: &IvArgs) -> funlp::Result<()> {
    let data = load(&a.data)?;
    let z = load_functional(&a.z, &a.data)?;
    check_labels(&data.x.labels, &z.labels, "instrument")?;
    let zw = match &a.zw {
        Some(p) => {
            let (lab, m) = read_scalar_csv(open(p)?)?;
            check_labels(&data.x.labels, &lab, "scalar instrument")?;
            m
        }
        None => data.w.clone(),
    };
    let inst = Panel::new(z.basis.clone(), &zw, &z.coeffs)?;
    let iv = IvData::new(data.lp()?, inst)?;
    let zeta = data.zeta(&a.inf.zeta)?;
    let rows = (1..=a.horizons)
        .map(|h| iv_irf(&iv, h, &zeta, a.inf.level, &a.reg.options(), &a.inf.hac()).map(|r| r.1))
        .collect::<funlp::Result<Vec<_>>>()?;
    write_irf_csv(&rows, output(&a.out)?)
}

fn cmd_svar(a: &SvarArgs) -> funlp::Result<()> {
    let data = load(&a.data)?;
    let rf = estimate_rfvar(&data.y, &data.x.coeffs, data.basis(), &a.reg.options())?;
    let scheme = match a.scheme {
        SchemeArg::Beta12Zero => Scheme::Beta12Zero,
        SchemeArg::Beta21Zero => Scheme::Beta21Zero,
    };
    let id = identify_structural(&rf.model, scheme, None)?;
    if id.unidentified_dim > 0 {
        log::warn!("{} functional directions are not identified", id.unidentified_dim);
    }
    let table = sirf(&rf.model, &id.b_inv, a.horizons)?;
    let zeta = a.zeta.to_element(&data.basis())?;
    let grid = BasisSpec::equispaced(0.0, 1.0, a.grid_points);
    let mut w = csv::Writer::from_writer(output(&a.out)?);
    w.write_record(["h", "component", "r", "value"])?;
    for h in 0..=a.horizons {
        w.write_record([h.to_string(), "irf11".into(), String::new(), fmt_sig(table.irf11(h))])?;
        w.write_record([h.to_string(), "irf12_zeta".into(), String::new(), fmt_sig(table.irf12(h).inner(&zeta)?)])?;
        let f = table.irf21(h);
        for r in &grid {
            w.write_record([h.to_string(), "irf21".into(), fmt_sig(*r), fmt_sig(f.eval(*r))])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_fof(a: &FofArgs) -> funlp::Result<()> {
    let data = load(&a.data)?;
    let basis = data.basis();
    let theta = a.theta.to_element(&basis)?.coords();
    let unit = ProductElement::new(DVector::from_vec(vec![1.0, 0.0]), FunctionElement::zeros(basis.clone()));
    let opts = a.reg.options();
    let rows = (0..a.horizons)
        .map(|h| {
            let fd = FofData::scalar_shock_design(&data.y, &data.x.coeffs, basis.clone(), h)?;
            let est = fof_estimate(&fd, &opts)?;
            let lam = funlp::flp::hac_longrun(&fof_scores(&est, &theta)?, &a.inf.hac())?;
            fof_inference(&est, &lam, &unit, &theta, a.inf.level)
        })
        .collect::<funlp::Result<Vec<_>>>()?;
    write_irf_csv(&rows, output(&a.out)?)
}

fn read_config<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> funlp::Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("config {}: {e}", p.display())))
        }
    }
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn write_coeffs(dir: &Path, x: &DMatrix<f64>, basis: Arc<BasisSpec>) -> funlp::Result<()> {
    let series = FunctionalSeries { labels: labels(x.nrows()), basis, coeffs: x.clone(), method: "simulated".into(), residual_norms: None };
    write_wide_csv(&series, File::create(dir.join("x.csv"))?)
}

fn cmd_simulate_a(a: &SimArgs) -> funlp::Result<()> {
    let mut cfg: ExperimentAConfig = read_config(&a.config)?;
    if let Some(t) = a.t {
        cfg.t = t;
    }
    let dgp = ExperimentA::new(cfg)?;
    let path = dgp.simulate(&mut rep_rng(a.seed, a.rep))?;
    std::fs::create_dir_all(&a.out)?;
    write_coeffs(&a.out, &path.x, dgp.basis())?;
    for (i, y) in path.y.iter().enumerate() {
        let m = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
        write_scalar_csv(&labels(y.len()), &["y"], &m, File::create(a.out.join(format!("y_h{}.csv", i + 1)))?)?;
    }
    Ok(())
}

fn cmd_simulate_b(a: &SimArgs) -> funlp::Result<()> {
    let mut cfg: ExperimentBConfig = read_config(&a.config)?;
    if let Some(t) = a.t {
        cfg.t = t;
    }
    let dgp = ExperimentB::new(cfg)?;
    let path = dgp.simulate(&mut rep_rng(a.seed, a.rep))?;
    std::fs::create_dir_all(&a.out)?;
    write_coeffs(&a.out, &path.x, dgp.basis())?;
    let m = DMatrix::from_column_slice(path.y.len(), 1, path.y.as_slice());
    write_scalar_csv(&labels(path.y.len()), &["y"], &m, File::create(a.out.join("y.csv"))?)
}

fn cmd_coverage(a: &CoverageArgs) -> funlp::Result<()> {
    let mut cells = Vec::new();
    let mc = McSettings { reps: a.reps, master_seed: a.seed, exec: exec(a.sequential) };
    for &t in &a.t {
        let run = match a.experiment {
            ExperimentArg::A => {
                let mut cfg: ExperimentAConfig = read_config(&a.config)?;
                cfg.t = t;
                let dgp = ExperimentA::new(cfg)?;
                let zeta = ProductElement::functional(1, a.inf.zeta.to_element(&dgp.basis())?);
                run_coverage(&dgp, t, &a.horizons, &zeta, a.inf.level, &a.reg.options(), &a.inf.hac(), mc)?
            }
            ExperimentArg::B => {
                let mut cfg: ExperimentBConfig = read_config(&a.config)?;
                cfg.t = t;
                let dgp = ExperimentB::new(cfg)?;
                let zeta = ProductElement::functional(1, a.inf.zeta.to_element(&dgp.basis())?);
                run_coverage(&dgp, t, &a.horizons, &zeta, a.inf.level, &a.reg.options(), &a.inf.hac(), mc)?
            }
        };
        cells.extend(run);
    }
    write_coverage_csv(&cells, output(&a.out)?)
}

fn cmd_bias(a: &BiasArgs) -> funlp::Result<()> {
    let k = a.fixed_k;
    let estimators = [Estimator::ScInv, Estimator::ScInvFixedK(k), Estimator::PcaFr(k), Estimator::PcaSvar(k)];
    let mc = McSettings { reps: a.reps, master_seed: a.seed, exec: exec(a.sequential) };
    let opts = EstimateOptions::default();
    let report = match a.experiment {
        ExperimentArg::A => {
            let cfg: ExperimentAConfig = read_config(&a.config)?;
            let t = cfg.t;
            run_bias_variance(&ExperimentA::new(cfg)?, t, &a.horizons, &estimators, &opts, mc)?
        }
        ExperimentArg::B => {
            let cfg: ExperimentBConfig = read_config(&a.config)?;
            let t = cfg.t;
            run_bias_variance(&ExperimentB::new(cfg)?, t, &a.horizons, &estimators, &opts, mc)?
        }
    };
    report.write_csv(output(&a.out)?)
}

fn cmd_mape(a: &MapeArgs) -> funlp::Result<()> {
    let data = load(&a.data)?;
    let k = a.fixed_k;
    let estimators = [Estimator::ScInv, Estimator::ScInvFixedK(k), Estimator::PcaFr(k), Estimator::PcaSvar(k)];
    let horizons: Vec<usize> = (1..=a.horizons).collect();
    let rows = run_mape(&data.lp()?, &estimators, &a.test_fractions, &horizons, &EstimateOptions::default(), exec(a.sequential))?;
    write_mape_csv(&rows, output(&a.out)?)
}

fn cmd_ingest(a: &IngestArgs) -> funlp::Result<()> {
    let panel = RawPanel::read_long_csv(open(&a.input)?)?;
    let probs = if a.probs == 101 { default_probs() } else { BasisSpec::equispaced(0.005, 0.995, a.probs) };
    let series = funlp::ingest::build_quantile_curves(&panel, a.period, &probs, a.strict)?;
    write_wide_csv(&series, File::create(&a.out)?)?;
    if let (Some(j), Some(path)) = (a.smooth, &a.coeffs_out) {
        write_wide_csv(&smooth_to_basis(&series, j)?, File::create(path)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> funlp::Result<()> {
    match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Irf(a) => cmd_irf(a),
        Command::IvEstimate(a) => cmd_iv(a),
        Command::SvarIrf(a) => cmd_svar(a),
        Command::FofIrf(a) => cmd_fof(a),
        Command::SimulateA(a) => cmd_simulate_a(a),
        Command::SimulateB(a) => cmd_simulate_b(a),
        Command::Coverage(a) => cmd_coverage(a),
        Command::BiasVariance(a) => cmd_bias(a),
        Command::Mape(a) => cmd_mape(a),
        Command::IngestQuantiles(a) => cmd_ingest(a),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if code != 0 {
                let line = serde_json::json!({ "error": "usage", "code": 2, "message": e.to_string().lines().next().unwrap_or("") });
                eprintln!("{line}");
            }
            let _ = e.print();
            return ExitCode::from(if code == 0 { 0 } else { 2 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let line = serde_json::json!({ "error": e.kind(), "code": code, "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(code)
        }
    }
}
