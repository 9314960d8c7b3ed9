mod ingest;
mod report;
mod simulate;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ingest::{Dataset, IngestOptions};
use report::{Format, Report};
use robust_mct::contrast::{linear_estimates, max_t_inference};
use robust_mct::mlt::{colr_dunnett_with, fit_mlt, mlt_dunnett_with, CovarianceKind, Link};
use robust_mct::mmm::{mmm_dunnett_with, stack_models};
use robust_mct::mvt::MvtOptions;
use robust_mct::nparm::{npar_dunnett_opts, Transform};
use robust_mct::robust::Psi;
use robust_mct::sim::{self, Procedure, RowBlock};
use robust_mct::{dunnett_contrasts, GroupedSample, Tail, VarianceMethod};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "robust-mct", version, about = "Many-to-one comparisons against a control group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dunnett test with a pooled variance.
    Dunnett(Common),
    /// Group-specific variances with Satterthwaite df.
    Satterthwaite(Common),
    /// HC3 sandwich covariance.
    Sandwich {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "asymptotic")]
        df: DfMode,
    },
    /// M-estimated group locations.
    Robust {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "huber")]
        psi: PsiKind,
        /// Tuning constant; defaults to 1.345 (huber) or 4.685 (bisquare).
        #[arg(long)]
        tuning: Option<f64>,
    },
    /// Relative effects against the control.
    Npar {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "probit", value_parser = parse_transform)]
        transform: Transform,
    },
    /// Transformation model shifts.
    Mlt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "normal")]
        link: LinkKind,
    },
    /// Continuous outcome logistic regression with odds ratios.
    Colr {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Joint test over several endpoints (give --response more than once).
    Mmm {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "logistic")]
        link: LinkKind,
    },
    /// Size and power simulation grid.
    Sim(SimArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    input: PathBuf,
    /// Column holding the group (dose) labels.
    #[arg(long, default_value = "Dose")]
    group: String,
    /// Response column(s); comma-separated or repeated.
    #[arg(long, required = true, value_delimiter = ',')]
    response: Vec<String>,
    /// Control group label; defaults to the lowest dose.
    #[arg(long)]
    control: Option<String>,
    /// two-sided, greater or less. One-sided tests usually suit toxicological safety endpoints.
    #[arg(long, default_value = "two-sided", value_parser = parse_tail)]
    tail: Tail,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
    /// Skip rows with a missing group or response instead of failing.
    #[arg(long)]
    drop_missing: bool,
    /// Write per-group points, means and SDs to this CSV file.
    #[arg(long, value_name = "PATH")]
    emit_plot_data: Option<PathBuf>,
    /// Seed of the randomized lattice rule used for correlations without factor structure.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ModelArgs {
    /// Order of the Bernstein polynomial.
    #[arg(long, default_value_t = 5)]
    order: usize,
    /// Reference distribution: normal, t with N - (k+1) df, or t with the mean model
    /// parameter count (mmm only, its default).
    #[arg(long, value_enum)]
    df: Option<DfMode>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DfMode {
    Asymptotic,
    LinearModel,
    Parameters,
}

#[derive(Clone, Copy, ValueEnum)]
enum PsiKind {
    Huber,
    Bisquare,
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkKind {
    Normal,
    Logistic,
}

impl From<LinkKind> for Link {
    fn from(l: LinkKind) -> Link {
        match l {
            LinkKind::Normal => Link::Normal,
            LinkKind::Logistic => Link::Logistic,
        }
    }
}

#[derive(Args)]
struct SimArgs {
    /// TOML file with runs, seed, alpha, effect, procedures, rows and threads.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    /// Master seed; every replicate stream derives from it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_alpha)]
    alpha: Option<f64>,
    /// Comma-separated: dun, sat, saw, rob, mlt, rel.
    #[arg(long, value_delimiter = ',', value_parser = parse_procedure)]
    procedures: Option<Vec<Procedure>>,
    /// Comma-separated: h0-normal, h1-normal, h0-mixture, h1-mixture.
    #[arg(long, value_delimiter = ',', value_parser = parse_rows)]
    rows: Option<Vec<RowBlock>>,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

fn parse_tail(s: &str) -> Result<Tail, String> {
    s.parse().map_err(|_| format!("expected two-sided, greater or less, got `{s}`"))
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(a) if a > 0.0 && a < 1.0 => Ok(a),
        _ => Err(format!("alpha must be a number in (0, 1), got `{s}`")),
    }
}

fn parse_transform(s: &str) -> Result<Transform, String> {
    s.parse().map_err(|e: robust_mct::Error| e.to_string())
}

fn parse_procedure(s: &str) -> Result<Procedure, String> {
    s.parse().map_err(|e: robust_mct::Error| e.to_string())
}

fn parse_rows(s: &str) -> Result<RowBlock, String> {
    s.parse().map_err(|e: robust_mct::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).is_err() {
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type Outcome = Result<String, String>;

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Dunnett(c) => classical(&c, VarianceMethod::Pooled),
        Command::Satterthwaite(c) => classical(&c, VarianceMethod::Satterthwaite),
        Command::Sandwich { common, df } => {
            let data = load(&common, false)?;
            let df = match df {
                DfMode::Asymptotic => None,
                DfMode::LinearModel => Some(linear_model_df(&data.samples[0])),
                DfMode::Parameters => return Err("--df parameters applies to mmm only".into()),
            };
            finish(&common, &data, |s, o| contrast_test(s, VarianceMethod::Sandwich { df }, &common, o))
        }
        Command::Robust { common, psi, tuning } => {
            let psi = match (psi, tuning) {
                (PsiKind::Huber, None) => Psi::HUBER,
                (PsiKind::Bisquare, None) => Psi::BISQUARE,
                (PsiKind::Huber, Some(c)) => Psi::Huber(c),
                (PsiKind::Bisquare, Some(c)) => Psi::Bisquare(c),
            };
            classical(&common, VarianceMethod::Robust(psi))
        }
        Command::Npar { common, transform } => {
            let data = load(&common, false)?;
            finish(&common, &data, |s, o| {
                let r = npar_dunnett_opts(s, transform, common.tail, common.alpha, o).map_err(|e| e.to_string())?;
                Ok(Report::from_test(&r.test).with_relative_effects(&r.intervals))
            })
        }
        Command::Mlt { common, model, link } => {
            let data = load(&common, false)?;
            let df = model_df(&data.samples[0], model.df.unwrap_or(DfMode::Asymptotic), None)?;
            finish(&common, &data, |s, o| {
                let m = fit(s, model.order, link.into())?;
                let t = mlt_dunnett_with(&m, df, CovarianceKind::ObservedInformation, common.tail, common.alpha, o)
                    .map_err(|e| e.to_string())?;
                Ok(Report::from_test(&t))
            })
        }
        Command::Colr { common, model } => {
            let data = load(&common, false)?;
            let df = model_df(&data.samples[0], model.df.unwrap_or(DfMode::Asymptotic), None)?;
            finish(&common, &data, |s, o| {
                let r = colr_dunnett_with(s, model.order, df, common.tail, common.alpha, o).map_err(|e| e.to_string())?;
                check_converged(r.model.diagnostics.converged)?;
                let mut rep = Report::from_test(&r.test).with_odds_ratios(&r.odds_ratios);
                rep.meta.push(("scale".into(), "log odds ratio; OR > 1 means larger responses than control".into()));
                Ok(rep)
            })
        }
        Command::Mmm { common, model, link } => mmm(&common, &model, link),
        Command::Sim(a) => {
            let file = simulate::load(a.config.as_deref())?;
            let cfg = simulate::grid_config(
                file,
                simulate::Overrides {
                    runs: a.runs,
                    seed: a.seed,
                    alpha: a.alpha,
                    procedures: a.procedures,
                    rows: a.rows,
                },
            )?;
            let results = sim::run_grid(&cfg).map_err(|e| e.to_string())?;
            Ok(simulate::render(&results, a.format))
        }
    }
}

fn load(c: &Common, multi: bool) -> Result<Dataset, String> {
    if !multi && c.response.len() != 1 {
        return Err("this method takes exactly one --response column".into());
    }
    let data = ingest::read_csv(
        &c.input,
        &IngestOptions {
            group: &c.group,
            responses: &c.response,
            control: c.control.as_deref(),
            drop_missing: c.drop_missing,
        },
    )
    .map_err(|e| format!("{}: {e}", c.input.display()))?;
    if let Some(path) = &c.emit_plot_data {
        write_plot_data(path, &data)?;
    }
    Ok(data)
}

fn options(c: &Common) -> MvtOptions {
    let mut o = MvtOptions::default();
    if let Some(s) = c.seed {
        o.seed = s;
    }
    o
}

fn linear_model_df(s: &GroupedSample) -> f64 {
    (s.total() - s.groups().len()) as f64
}

fn model_df(s: &GroupedSample, mode: DfMode, parameters: Option<f64>) -> Result<Option<f64>, String> {
    match mode {
        DfMode::Asymptotic => Ok(None),
        DfMode::LinearModel => Ok(Some(linear_model_df(s))),
        DfMode::Parameters => parameters.map(Some).ok_or_else(|| "--df parameters applies to mmm only".into()),
    }
}

fn fit(s: &GroupedSample, order: usize, link: Link) -> Result<robust_mct::mlt::TransformationModel, String> {
    let m = fit_mlt(s, order, link).map_err(|e| e.to_string())?;
    check_converged(m.diagnostics.converged)?;
    Ok(m)
}

fn check_converged(ok: bool) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err("transformation model fit did not converge".into())
    }
}

fn contrast_test(s: &GroupedSample, method: VarianceMethod, c: &Common, o: &MvtOptions) -> Result<Report, String> {
    let contrasts = dunnett_contrasts(s.k()).map_err(|e| e.to_string())?.with_group_labels(s);
    let est = linear_estimates(s, &contrasts, method).map_err(|e| e.to_string())?;
    let mut t = max_t_inference(&est, c.tail, c.alpha, o).map_err(|e| e.to_string())?;
    t.method = method.name().into();
    Ok(Report::from_test(&t))
}

fn classical(c: &Common, method: VarianceMethod) -> Outcome {
    let data = load(c, false)?;
    finish(c, &data, |s, o| contrast_test(s, method, c, o))
}

fn finish(c: &Common, data: &Dataset, analyse: impl Fn(&GroupedSample, &MvtOptions) -> Result<Report, String>) -> Outcome {
    let mut rep = analyse(&data.samples[0], &options(c))?;
    rep.meta.insert(0, ("response".into(), data.responses[0].clone()));
    Ok(decorate(rep, c, data))
}

fn decorate(mut rep: Report, c: &Common, data: &Dataset) -> String {
    rep.meta.insert(0, ("control".into(), data.samples[0].control().label.clone()));
    if !data.dropped_rows.is_empty() {
        let lines: Vec<String> = data.dropped_rows.iter().map(u64::to_string).collect();
        rep.notes.push(format!("dropped rows with missing values at lines {}", lines.join(", ")));
    }
    if c.tail == Tail::TwoSided && c.format == Format::Human {
        rep.notes.push("two-sided test; one-sided alternatives (--tail greater|less) usually suit safety endpoints".into());
    }
    rep.render(c.format)
}

fn mmm(c: &Common, model: &ModelArgs, link: LinkKind) -> Outcome {
    if c.response.len() < 2 {
        return Err("mmm needs at least two --response columns".into());
    }
    let data = load(c, true)?;
    let models = data
        .samples
        .iter()
        .map(|s| fit(s, model.order, link.into()))
        .collect::<Result<Vec<_>, _>>()?;
    let stacked = stack_models(data.responses.clone(), models).map_err(|e| e.to_string())?;
    let df = model_df(&data.samples[0], model.df.unwrap_or(DfMode::Parameters), Some(stacked.df))?;
    let r = mmm_dunnett_with(&stacked, Some(df.unwrap_or(f64::INFINITY)), c.tail, c.alpha, &options(c))
        .map_err(|e| e.to_string())?;
    let mut rep = Report::from_test(&r.test);
    if matches!(link, LinkKind::Logistic) {
        rep = rep.with_odds_ratios(&r.odds_ratios);
    }
    rep.meta.insert(0, ("responses".into(), data.responses.join(", ")));
    Ok(decorate(rep, c, &data))
}

fn write_plot_data(path: &Path, data: &Dataset) -> Result<(), String> {
    let io = |e: csv::Error| format!("{}: {e}", path.display());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["response", "group", "kind", "value"]).map_err(io)?;
    for (name, s) in data.responses.iter().zip(&data.samples) {
        for g in s.groups() {
            for &y in &g.responses {
                w.write_record([name, &g.label, "point", &report::num(y)]).map_err(io)?;
            }
            w.write_record([name, &g.label, "mean", &report::num(g.mean())]).map_err(io)?;
            w.write_record([name, &g.label, "sd", &report::num(g.variance().sqrt())]).map_err(io)?;
        }
    }
    w.flush().map_err(|e| format!("{}: {e}", path.display()))
}
