//! Monte Carlo size and power study: one control and three dose groups, normal or
//! contaminated responses, heteroscedastic top dose.

use crate::contrast::{dunnett_contrasts, global_pvalue, linear_estimates, ContrastMatrix, LinearEstimates, VarianceMethod};
use crate::error::{Error, Result};
use crate::mlt::{fit_mlt, shift_estimates, CovarianceKind, Link};
use crate::mvt::{dunnett_correlation, equicoordinate_quantile_with, CorrelationMatrix, MvtOptions, Tail};
use crate::nparm::{relative_effects, transformed_estimates, Transform};
use crate::robust::Psi;
use crate::sample::{Group, GroupedSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Location of the clean response distribution.
pub const MU: f64 = 100.0;
/// Standard deviation of the clean response distribution.
pub const SIGMA: f64 = 10.0;
/// Upward shift of the contaminating component, in units of `SIGMA`.
pub const CONTAMINATION_SHIFT: f64 = 3.0;
/// Dose-group shift under H1, in units of `SIGMA`; calibrated so that the pooled Dunnett
/// test has power 0.84 at `xi = 1` with ten animals per group (see [`calibrate_effect`]).
pub const DEFAULT_EFFECT: f64 = 1.235_961_914_062_5;
pub const DEFAULT_SEED: u64 = 20_190_417;
pub const DEFAULT_RUNS: usize = 10_000;
/// Bernstein order of the transformation models fitted in the study.
pub const MLT_ORDER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Distribution {
    Normal,
    Mixture10,
    Mixture20,
}

impl Distribution {
    pub fn contamination(&self) -> f64 {
        match self {
            Distribution::Normal => 0.0,
            Distribution::Mixture10 => 0.1,
            Distribution::Mixture20 => 0.2,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Distribution::Normal => "N",
            Distribution::Mixture10 => "M10",
            Distribution::Mixture20 => "M20",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Procedure {
    Dun,
    Sat,
    SaW,
    Rob,
    Mlt,
    Rel,
}

impl Procedure {
    pub const ALL: [Procedure; 6] = [
        Procedure::Dun,
        Procedure::Sat,
        Procedure::SaW,
        Procedure::Rob,
        Procedure::Mlt,
        Procedure::Rel,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Procedure::Dun => "Dun",
            Procedure::Sat => "Sat",
            Procedure::SaW => "SaW",
            Procedure::Rob => "Rob",
            Procedure::Mlt => "MLT",
            Procedure::Rel => "Rel",
        }
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Procedure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Procedure::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown procedure `{s}` (valid: {})",
                    Procedure::ALL.map(|p| p.name().to_lowercase()).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub id: String,
    pub distribution: Distribution,
    /// Normal rows: factor on the top-dose SD. Mixture rows: factor on the SD of the
    /// contaminating component.
    pub xi: f64,
    pub sample_sizes: [usize; 4],
    pub hypothesis: Hypothesis,
    /// Dose-group shift under H1 in units of `SIGMA`.
    pub effect: f64,
    pub runs: usize,
    pub alpha: f64,
    pub seed: u64,
    pub procedures: Vec<Procedure>,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 1.0) {
            return Err(Error::InvalidArgument(format!("xi must be at least 1, got {}", self.xi)));
        }
        if self.runs < 100 {
            return Err(Error::InvalidArgument(format!("at least 100 runs are required, got {}", self.runs)));
        }
        if self.sample_sizes.iter().any(|&n| n < 2) {
            return Err(Error::InvalidDesign("every group needs at least two observations".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.procedures.is_empty() {
            return Err(Error::InvalidArgument("no procedures selected".into()));
        }
        Ok(())
    }
}

/// Draws one data set. Group 0 is the control, group 3 the top dose.
pub fn generate_sample<R: Rng + ?Sized>(scenario: &SimScenario, rng: &mut R) -> GroupedSample {
    let pi = scenario.distribution.contamination();
    let groups = scenario
        .sample_sizes
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let mu = if g > 0 && scenario.hypothesis == Hypothesis::H1 {
                MU + scenario.effect * SIGMA
            } else {
                MU
            };
            let sd = if pi == 0.0 && g == 3 { scenario.xi * SIGMA } else { SIGMA };
            let responses = (0..n).map(|_| draw_response(rng, mu, sd, pi, scenario.xi).0).collect();
            Group::new(g.to_string(), responses)
        })
        .collect();
    GroupedSample::new(groups).expect("simulated groups are valid")
}

/// One response from the clean component `N(mu, sd^2)` or, with probability `pi`, from the
/// contaminating component `N(mu + 3 SIGMA, (xi SIGMA)^2)`. Also reports which one was used.
pub fn draw_response<R: Rng + ?Sized>(rng: &mut R, mu: f64, sd: f64, pi: f64, xi: f64) -> (f64, bool) {
    let z: f64 = rng.sample(StandardNormal);
    if pi > 0.0 && rng.random::<f64>() < pi {
        (mu + CONTAMINATION_SHIFT * SIGMA + xi * SIGMA * z, true)
    } else {
        (mu + sd * z, false)
    }
}

/// Per-replicate random stream, independent of scheduling.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcedureResult {
    pub procedure: Procedure,
    pub rejections: usize,
    /// Replicates with a usable result.
    pub runs: usize,
    pub failures: usize,
    pub proportion: f64,
    pub mcse: f64,
    /// More than 5% of the replicates failed.
    pub unreliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub scenario: SimScenario,
    pub results: Vec<ProcedureResult>,
}

impl SimResult {
    pub fn get(&self, p: Procedure) -> Option<&ProcedureResult> {
        self.results.iter().find(|r| r.procedure == p)
    }
}

/// Shared, data-independent pieces of a scenario.
struct Context {
    contrasts: ContrastMatrix,
    /// Critical value of the pooled and robust tests (both use the Dunnett correlation
    /// and `N - 4` degrees of freedom).
    dunnett_critical: f64,
    mlt_df: f64,
    opts: MvtOptions,
    alpha: f64,
}

impl Context {
    fn new(scenario: &SimScenario) -> Result<Self> {
        let opts = MvtOptions::default();
        let n: usize = scenario.sample_sizes.iter().sum();
        let df = (n - 4) as f64;
        let corr = dunnett_correlation(&scenario.sample_sizes)?;
        Ok(Self {
            contrasts: dunnett_contrasts(3)?,
            dunnett_critical: equicoordinate_quantile_with(&corr, df, scenario.alpha, Tail::TwoSided, &opts)?,
            mlt_df: df,
            opts,
            alpha: scenario.alpha,
        })
    }

    fn max_abs(est: &LinearEstimates) -> f64 {
        est.statistics().iter().fold(0.0, |m, t| m.max(t.abs()))
    }

    fn by_pvalue(&self, est: &LinearEstimates) -> Result<bool> {
        let stats = est.statistics();
        let corr = CorrelationMatrix::from_covariance(&est.covariance)?;
        Ok(global_pvalue(&stats, &corr, est.df, Tail::TwoSided, &self.opts)? < self.alpha)
    }

    /// Whether `p` rejects at least one hypothesis on `sample`.
    fn rejects(&self, p: Procedure, sample: &GroupedSample) -> Result<bool> {
        match p {
            Procedure::Dun => {
                let est = linear_estimates(sample, &self.contrasts, VarianceMethod::Pooled)?;
                Ok(Self::max_abs(&est) > self.dunnett_critical)
            }
            Procedure::Rob => {
                let est = linear_estimates(sample, &self.contrasts, VarianceMethod::Robust(Psi::HUBER))?;
                Ok(Self::max_abs(&est) > self.dunnett_critical)
            }
            Procedure::Sat => self.by_pvalue(&linear_estimates(sample, &self.contrasts, VarianceMethod::Satterthwaite)?),
            Procedure::SaW => {
                self.by_pvalue(&linear_estimates(sample, &self.contrasts, VarianceMethod::Sandwich { df: None })?)
            }
            Procedure::Mlt => {
                let model = fit_mlt(sample, MLT_ORDER, Link::Normal)?;
                if !model.diagnostics.converged {
                    return Err(Error::NumericDomain("transformation model did not converge".into()));
                }
                self.by_pvalue(&shift_estimates(&model, Some(self.mlt_df), CovarianceKind::ObservedInformation)?)
            }
            Procedure::Rel => {
                let eff = relative_effects(sample)?;
                self.by_pvalue(&transformed_estimates(sample, &eff, Transform::Probit))
            }
        }
    }
}

#[derive(Clone, Default)]
struct Tally {
    rejections: Vec<usize>,
    failures: Vec<usize>,
}

impl Tally {
    fn new(k: usize) -> Self {
        Self {
            rejections: vec![0; k],
            failures: vec![0; k],
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.rejections.iter_mut().zip(other.rejections) {
            *a += b;
        }
        for (a, b) in self.failures.iter_mut().zip(other.failures) {
            *a += b;
        }
        self
    }
}

/// Worker count from `ROBUST_MCT_THREADS`, if set.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("ROBUST_MCT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n| n > 0)
}

pub fn run_scenario(scenario: &SimScenario) -> Result<SimResult> {
    run_scenario_with(scenario, threads_from_env())
}

/// Runs every replicate of `scenario`; `threads = None` uses the global rayon pool.
pub fn run_scenario_with(scenario: &SimScenario, threads: Option<usize>) -> Result<SimResult> {
    scenario.validate()?;
    let ctx = Context::new(scenario)?;
    let procs = &scenario.procedures;
    let work = || {
        (0..scenario.runs as u64)
            .into_par_iter()
            .fold(
                || Tally::new(procs.len()),
                |mut t, rep| {
                    let mut rng = replicate_rng(scenario.seed, rep);
                    let sample = generate_sample(scenario, &mut rng);
                    for (i, &p) in procs.iter().enumerate() {
                        match ctx.rejects(p, &sample) {
                            Ok(true) => t.rejections[i] += 1,
                            Ok(false) => {}
                            Err(_) => t.failures[i] += 1,
                        }
                    }
                    t
                },
            )
            .reduce(|| Tally::new(procs.len()), Tally::merge)
    };
    let tally = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let results = procs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let failures = tally.failures[i];
            let runs = scenario.runs - failures;
            let proportion = if runs > 0 { tally.rejections[i] as f64 / runs as f64 } else { f64::NAN };
            ProcedureResult {
                procedure: p,
                rejections: tally.rejections[i],
                runs,
                failures,
                proportion,
                mcse: (proportion * (1.0 - proportion) / runs as f64).sqrt(),
                unreliable: failures as f64 > 0.05 * scenario.runs as f64,
            }
        })
        .collect();
    Ok(SimResult {
        scenario: scenario.clone(),
        results,
    })
}

/// Row groups of the study grid, for filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowBlock {
    H0Normal,
    H1Normal,
    H0Mixture,
    H1Mixture,
}

impl RowBlock {
    pub const ALL: [RowBlock; 4] = [RowBlock::H0Normal, RowBlock::H1Normal, RowBlock::H0Mixture, RowBlock::H1Mixture];

    pub fn name(&self) -> &'static str {
        match self {
            RowBlock::H0Normal => "h0-normal",
            RowBlock::H1Normal => "h1-normal",
            RowBlock::H0Mixture => "h0-mixture",
            RowBlock::H1Mixture => "h1-mixture",
        }
    }

    pub fn of(s: &SimScenario) -> RowBlock {
        match (s.distribution, s.hypothesis) {
            (Distribution::Normal, Hypothesis::H0) => RowBlock::H0Normal,
            (Distribution::Normal, Hypothesis::H1) => RowBlock::H1Normal,
            (_, Hypothesis::H0) => RowBlock::H0Mixture,
            (_, Hypothesis::H1) => RowBlock::H1Mixture,
        }
    }
}

impl FromStr for RowBlock {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RowBlock::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown row block `{s}` (valid: {})",
                    RowBlock::ALL.map(|b| b.name()).join(", ")
                ))
            })
    }
}

/// Settings shared by every row of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub runs: usize,
    pub seed: u64,
    pub alpha: f64,
    pub effect: f64,
    pub procedures: Vec<Procedure>,
    /// Empty means every block.
    pub rows: Vec<RowBlock>,
    pub threads: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            runs: DEFAULT_RUNS,
            seed: DEFAULT_SEED,
            alpha: 0.05,
            effect: DEFAULT_EFFECT,
            procedures: Procedure::ALL.to_vec(),
            rows: Vec::new(),
            threads: None,
        }
    }
}

/// The study grid: `(distribution, hypothesis, xi, n0, n_dose)` per row.
pub fn grid_rows() -> Vec<(Distribution, Hypothesis, f64, usize, usize)> {
    use Distribution::*;
    use Hypothesis::*;
    let mut rows = Vec::new();
    for h in [H0, H1] {
        for xi in [1.0, 2.0, 3.0, 4.0] {
            rows.push((Normal, h, xi, 10, 10));
        }
    }
    for (n0, n) in [(20, 10), (5, 20)] {
        for h in [H0, H1] {
            for xi in [1.0, 4.0] {
                rows.push((Normal, h, xi, n0, n));
            }
        }
    }
    for h in [H0, H1] {
        for xi in [1.0, 2.0, 3.0, 4.0] {
            rows.push((Mixture10, h, xi, 20, 10));
        }
    }
    for h in [H0, H1] {
        for xi in [1.0, 4.0] {
            rows.push((Mixture20, h, xi, 5, 20));
        }
    }
    rows
}

pub fn grid_scenarios(config: &GridConfig) -> Vec<SimScenario> {
    grid_rows()
        .into_iter()
        .map(|(d, h, xi, n0, n)| SimScenario {
            id: format!("{}-{:?}-xi{}-{}-{}", d.code(), h, xi, n0, n),
            distribution: d,
            xi,
            sample_sizes: [n0, n, n, n],
            hypothesis: h,
            effect: config.effect,
            runs: config.runs,
            alpha: config.alpha,
            seed: config.seed,
            procedures: config.procedures.clone(),
        })
        .filter(|s| config.rows.is_empty() || config.rows.contains(&RowBlock::of(s)))
        .collect()
}

pub fn run_grid(config: &GridConfig) -> Result<Vec<SimResult>> {
    grid_scenarios(config)
        .iter()
        .map(|s| run_scenario_with(s, config.threads.or_else(threads_from_env)))
        .collect()
}

/// Header of the machine-readable grid.
pub const CSV_HEADER: [&str; 14] = [
    "scenario_id",
    "procedure",
    "hypothesis",
    "distribution",
    "xi",
    "n0",
    "n1",
    "n2",
    "n3",
    "rejections",
    "runs",
    "proportion",
    "mcse",
    "failures",
];

/// One CSV record per procedure.
pub fn csv_records(result: &SimResult) -> Vec<Vec<String>> {
    let s = &result.scenario;
    result
        .results
        .iter()
        .map(|r| {
            let mut rec = vec![
                s.id.clone(),
                r.procedure.name().to_string(),
                format!("{:?}", s.hypothesis),
                s.distribution.code().to_string(),
                s.xi.to_string(),
            ];
            rec.extend(s.sample_sizes.iter().map(|n| n.to_string()));
            rec.extend([
                r.rejections.to_string(),
                r.runs.to_string(),
                format!("{:.6}", r.proportion),
                format!("{:.6}", r.mcse),
                r.failures.to_string(),
            ]);
            rec
        })
        .collect()
}

/// Human-readable grid with one column per procedure.
pub fn format_table(results: &[SimResult]) -> String {
    let mut procs: Vec<Procedure> = results.iter().flat_map(|r| r.results.iter().map(|p| p.procedure)).collect();
    procs.sort();
    procs.dedup();
    let mut out = format!("{:<5} {:>4} {:>3} {:>3}", "Hyp", "xi", "n0", "ni");
    for p in &procs {
        out.push_str(&format!(" {:>6}", p.name()));
    }
    out.push('\n');
    for r in results {
        let s = &r.scenario;
        out.push_str(&format!(
            "{:<5} {:>4} {:>3} {:>3}",
            format!("{},{:?}", &s.distribution.code()[..1], s.hypothesis),
            s.xi,
            s.sample_sizes[0],
            s.sample_sizes[1]
        ));
        for p in &procs {
            match r.get(*p) {
                Some(x) if x.unreliable => out.push_str(&format!(" {:>5.3}*", x.proportion)),
                Some(x) => out.push_str(&format!(" {:>6.3}", x.proportion)),
                None => out.push_str(&format!(" {:>6}", "")),
            }
        }
        out.push('\n');
    }
    out
}

/// Finds the H1 shift giving the pooled Dunnett test power `target` at `xi = 1` with
/// ten observations per group. Common random numbers make the estimated power monotone in
/// the shift, so plain bisection applies.
pub fn calibrate_effect(target: f64, runs: usize, seed: u64) -> Result<f64> {
    let base = SimScenario {
        id: "calibration".into(),
        distribution: Distribution::Normal,
        xi: 1.0,
        sample_sizes: [10; 4],
        hypothesis: Hypothesis::H1,
        effect: 0.0,
        runs,
        alpha: 0.05,
        seed,
        procedures: vec![Procedure::Dun],
    };
    let power = |effect: f64| -> Result<f64> {
        let s = SimScenario { effect, ..base.clone() };
        Ok(run_scenario_with(&s, threads_from_env())?.results[0].proportion)
    };
    let (mut lo, mut hi) = (0.0, 4.0);
    for _ in 0..14 {
        let mid = 0.5 * (lo + hi);
        if power(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(d: Distribution, xi: f64, h: Hypothesis) -> SimScenario {
        SimScenario {
            id: "t".into(),
            distribution: d,
            xi,
            sample_sizes: [10; 4],
            hypothesis: h,
            effect: DEFAULT_EFFECT,
            runs: 200,
            alpha: 0.05,
            seed: 7,
            procedures: Procedure::ALL.to_vec(),
        }
    }

    #[test]
    fn procedure_names_round_trip() {
        for p in Procedure::ALL {
            assert_eq!(p.name().to_lowercase().parse::<Procedure>().unwrap(), p);
        }
        let err = "steel".parse::<Procedure>().unwrap_err().to_string();
        assert!(err.contains("dun, sat, saw, rob, mlt, rel"), "{err}");
    }

    #[test]
    fn validation() {
        let mut s = scenario(Distribution::Normal, 0.5, Hypothesis::H0);
        assert!(s.validate().is_err());
        s.xi = 1.0;
        s.runs = 50;
        assert!(s.validate().is_err());
    }

    #[test]
    fn grid_shape() {
        let rows = grid_rows();
        assert_eq!(rows.len(), 28);
        let cfg = GridConfig {
            rows: vec![RowBlock::H0Normal],
            ..GridConfig::default()
        };
        assert_eq!(grid_scenarios(&cfg).len(), 8);
    }

    #[test]
    fn null_rows_are_homogeneous() {
        let s = scenario(Distribution::Normal, 1.0, Hypothesis::H0);
        let mut rng = replicate_rng(1, 0);
        let x = generate_sample(&s, &mut rng);
        assert_eq!(x.sizes(), vec![10; 4]);
        let h1 = scenario(Distribution::Normal, 1.0, Hypothesis::H1);
        let a = generate_sample(&s, &mut replicate_rng(3, 9));
        let b = generate_sample(&h1, &mut replicate_rng(3, 9));
        // same draws, dose groups shifted
        assert_eq!(a.groups()[0].responses, b.groups()[0].responses);
        let d = b.groups()[2].responses[4] - a.groups()[2].responses[4];
        assert!((d - DEFAULT_EFFECT * SIGMA).abs() < 1e-9);
    }
}
