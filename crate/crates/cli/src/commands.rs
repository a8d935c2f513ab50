use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use birthrace_core::dispersion::{shift_fuzz, FuzzSummary, Verdict};
use birthrace_core::increments::FeedbackFunction;
use birthrace_core::montecarlo::{run_experiment_to, write_csv, ExperimentSpec, ResultSet, RunError, Summary};
use birthrace_core::race::{simulate_race, write_trajectory, DumpFormat, RaceConfig};
use birthrace_core::ranking::{factorial, Permutation};
use birthrace_core::rng::stream;
use birthrace_core::urn::{run_urn, UrnCsvWriter, UrnState};
use serde::{Deserialize, Serialize};

use crate::config::{read_file, resolve, to_toml, Layer};
use crate::{Common, CoupleArgs, CoverageArgs, FuzzArgs, PetrovArgs, RaceArgs, RegimeArgs, UrnArgs, XiArgs};

/// Largest distance, in standard errors, of a ranking-weight mean from
/// `1 / A!` accepted by `xi --check`.
const XI_TOLERANCE_SE: f64 = 3.0;
const COUPLING_MIN_P: f64 = 0.001;
const PETROV_MAX_SPREAD: f64 = 2.0;
const COVERAGE_MIN_COMPLETE: f64 = 0.99;

struct Output {
    dir: PathBuf,
    report: String,
}

impl Output {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            report: String::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
    }

    fn create_file(&self, name: &str) -> Result<BufWriter<File>> {
        let p = self.path(name);
        Ok(BufWriter::new(
            File::create(&p).with_context(|| format!("creating {}", p.display()))?,
        ))
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.report.push_str(text.as_ref());
        self.report.push('\n');
    }

    fn finish(self) -> Result<()> {
        print!("{}", self.report);
        self.write("summary.txt", &self.report)
    }
}

fn starting_counts(agents: Option<usize>, initial: Option<Vec<u64>>, fill: u64) -> Result<Option<Vec<u64>>> {
    match (agents, initial) {
        (Some(a), Some(v)) if a != v.len() => {
            bail!("--agents {a} disagrees with {} starting values", v.len())
        }
        (_, Some(v)) => Ok(Some(v)),
        (Some(a), None) => Ok(Some(vec![fill; a])),
        (None, None) => Ok(None),
    }
}

fn model_flag(model: Option<String>, feedback: Option<String>) -> Option<String> {
    model.or_else(|| feedback.map(|f| format!("exponential feedback={f}")))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Resolve, persist, and summarize a replicated experiment.
fn experiment(common: &Common, kind: &str, defaults: Layer, mut flags: Layer) -> Result<(ResultSet, Output)> {
    let file = read_file(common.config.as_deref())?;
    flags.set("master_seed", common.seed)?;
    let spec: ExperimentSpec = resolve(defaults, file, flags, Some(kind))?;
    spec.validate().context("invalid configuration")?;
    let mut out = Output::create(&common.out)?;
    out.write("config.toml", to_toml(&spec)?)?;
    let results = match run_experiment_to(&spec, common.workers.map(|w| w as usize), &out.path("results.jsonl")) {
        Ok(r) => r,
        Err(RunError::Compute(e)) => return Err(e.into()),
        Err(RunError::Persist { results, error }) => {
            if let Ok(s) = serde_json::to_string_pretty(&results.summary) {
                eprintln!("{s}");
            }
            return Err(error).context("saving results");
        }
    };
    write_csv(&results, out.create_file("results.csv")?)?;
    out.write("summary.json", serde_json::to_string_pretty(&results.summary)?)?;
    out.line(format!(
        "{kind}: {} replicates, seed {}, spec {}",
        spec.replicates,
        spec.master_seed,
        &results.header.spec_hash[..12]
    ));
    Ok((results, out))
}

#[derive(Serialize, Deserialize)]
struct RaceRun {
    #[serde(flatten)]
    race: RaceConfig,
    #[serde(default = "default_format")]
    format: DumpFormat,
}

fn default_format() -> DumpFormat {
    DumpFormat::Jsonl
}

pub fn race(a: RaceArgs) -> Result<bool> {
    let mut defaults = Layer::new();
    defaults.set("model", Some("exponential feedback=const:1"))?;
    let mut flags = Layer::new();
    flags
        .set("initial_values", starting_counts(a.agents, a.initial, 0)?)?
        .set("model", model_flag(a.model, a.feedback))?
        .set("event_cap", a.event_cap)?
        .set("format", a.format)?
        .set("seed", a.common.seed)?;
    if let Some(t) = a.t {
        flags.set("horizon", Some(toml::toml! { time = t }))?;
    }
    if let Some(n) = a.events {
        flags.set("horizon", Some(toml::toml! { events = (n as i64) }))?;
    }
    let run: RaceRun = resolve(defaults, read_file(a.common.config.as_deref())?, flags, None)?;
    run.race.validate().context("invalid configuration")?;
    let traj = simulate_race(&run.race, &mut stream(run.race.seed, 0))?;
    let mut out = Output::create(&a.common.out)?;
    out.write("config.toml", to_toml(&run)?)?;
    let name = match run.format {
        DumpFormat::Jsonl => "trajectory.jsonl",
        DumpFormat::Csv => "trajectory.csv",
    };
    write_trajectory(&traj, out.create_file(name)?, run.format)?;
    out.line(format!(
        "race: {} agents, {} events, final values {}",
        traj.num_agents(),
        traj.events().len(),
        join(&traj.final_values())
    ));
    if traj.exploded() {
        out.line(format!("exploded: event cap reached at time {}", traj.horizon()));
    }
    out.finish()?;
    Ok(true)
}

#[derive(Serialize, Deserialize)]
struct UrnRun {
    initial: Vec<u64>,
    feedback: FeedbackFunction,
    steps: u64,
    #[serde(default)]
    seed: u64,
}

pub fn urn(a: UrnArgs) -> Result<bool> {
    let mut flags = Layer::new();
    flags
        .set("initial", starting_counts(a.agents, a.initial, 1)?)?
        .set("feedback", a.feedback)?
        .set("steps", a.steps)?
        .set("seed", a.common.seed)?;
    let run: UrnRun = resolve(Layer::new(), read_file(a.common.config.as_deref())?, flags, None)?;
    let start = UrnState::new(run.initial.clone()).context("invalid configuration")?;
    let mut out = Output::create(&a.common.out)?;
    out.write("config.toml", to_toml(&run)?)?;
    let mut csv = UrnCsvWriter::new(out.create_file("urn.csv")?, run.initial.len())?;
    let mut io_error = None;
    let end = run_urn(start, &run.feedback, run.steps, &mut stream(run.seed, 0), |s| {
        if io_error.is_none() {
            io_error = csv.row(s).err();
        }
    })?;
    if let Some(e) = io_error {
        return Err(e).context("writing urn.csv");
    }
    csv.finish()?;
    out.line(format!(
        "urn: {} steps, final counts {}, leader {}",
        end.step(),
        join(end.counts()),
        end.leader()
    ));
    out.finish()?;
    Ok(true)
}

pub fn coverage(a: CoverageArgs) -> Result<bool> {
    let mut defaults = Layer::new();
    defaults
        .set("replicates", Some(100u64))?
        .set("master_seed", Some(0u64))?;
    let mut flags = Layer::new();
    flags
        .set("initial", starting_counts(a.agents, a.initial, 1)?)?
        .set("feedback", a.feedback)?
        .set("steps", a.steps)?
        .set("policy", a.policy)?
        .set("replicates", a.replicates)?;
    let (results, mut out) = experiment(&a.common, "coverage", defaults, flags)?;
    let Some(Summary::Coverage {
        merged,
        permutations_seen,
        complete,
    }) = &results.summary
    else {
        bail!("unexpected summary");
    };
    out.line(format!(
        "orderings seen across all replicates: {}/{}",
        merged.bits_set, merged.total
    ));
    out.line(format!(
        "mean orderings seen per replicate: {:.4} (95% CI {:.4}..{:.4})",
        permutations_seen.mean, permutations_seen.ci_low, permutations_seen.ci_high
    ));
    out.line(format!(
        "replicates seeing every ordering: {}/{} ({:.4}, 95% CI {:.4}..{:.4})",
        complete.successes, complete.trials, complete.fraction, complete.ci_low, complete.ci_high
    ));
    let pass = complete.fraction >= COVERAGE_MIN_COMPLETE;
    if a.common.check {
        out.line(format!(
            "check (>= {COVERAGE_MIN_COMPLETE} complete): {}",
            verdict(pass)
        ));
    }
    out.finish()?;
    Ok(!a.common.check || pass)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn xi(a: XiArgs) -> Result<bool> {
    let mut defaults = Layer::new();
    defaults
        .set("replicates", Some(10_000u64))?
        .set("master_seed", Some(0u64))?
        .set("model", Some("exponential feedback=const:1"))?;
    let mut flags = Layer::new();
    flags
        .set("agents", a.agents)?
        .set("times", a.times)?
        .set("shifts", a.shifts)?
        .set("model", model_flag(a.model, a.feedback))?
        .set("replicates", a.replicates)?
        .set("confidence", a.confidence)?
        .set("event_cap", a.event_cap)?;
    let (results, mut out) = experiment(&a.common, "xi_convergence", defaults, flags)?;
    let Some(Summary::XiConvergence(report)) = &results.summary else {
        bail!("unexpected summary");
    };
    let target = 1.0 / factorial(report.agents).context("agent count")? as f64;
    let mut pass = true;
    out.line(format!(
        "target 1/{}! = {target:.6}; excluded replicates {}",
        report.agents, report.excluded
    ));
    for e in &report.estimates {
        let z = e.z_distance(target);
        pass &= z <= XI_TOLERANCE_SE;
        out.line(format!(
            "t={} pi={} mean={:.6} se={:.6} ci={:.6}..{:.6} z={:.2}",
            e.time,
            Permutation::new(e.permutation.clone())?,
            e.mean,
            e.std_err,
            e.ci_low,
            e.ci_high,
            z
        ));
    }
    if a.common.check {
        out.line(format!(
            "check (every mean within {XI_TOLERANCE_SE} se of the target): {}",
            verdict(pass)
        ));
    }
    out.finish()?;
    Ok(!a.common.check || pass)
}

pub fn couple(a: CoupleArgs) -> Result<bool> {
    let mut defaults = Layer::new();
    defaults
        .set("replicates", Some(100_000u64))?
        .set("master_seed", Some(0u64))?;
    let mut flags = Layer::new();
    flags
        .set("feedback", a.feedback)?
        .set("initial", a.initial)?
        .set("k", a.k)?
        .set("replicates", a.replicates)?;
    let (results, mut out) = experiment(&a.common, "coupling", defaults, flags)?;
    let Some(Summary::Coupling(report)) = &results.summary else {
        bail!("unexpected summary");
    };
    out.line("sequence exact observed_frequency");
    for row in &report.rows {
        let exact = row
            .exact_rational
            .clone()
            .unwrap_or_else(|| format!("{:.6}", row.exact));
        out.line(format!(
            "{} {} {:.6}",
            join(&row.sequence),
            exact,
            row.observed_frequency
        ));
    }
    let chi = &report.chi_square;
    out.line(format!(
        "chi-square {:.4} on {} df, p = {:.4}",
        chi.statistic, chi.degrees_of_freedom, chi.p_value
    ));
    let pass = chi.p_value > COUPLING_MIN_P;
    if a.common.check {
        out.line(format!("check (p > {COUPLING_MIN_P}): {}", verdict(pass)));
    }
    out.finish()?;
    Ok(!a.common.check || pass)
}

pub fn regime(a: RegimeArgs) -> Result<bool> {
    let mut defaults = Layer::new();
    defaults
        .set("replicates", Some(100u64))?
        .set("master_seed", Some(0u64))?;
    let mut flags = Layer::new();
    flags
        .set("feedback", a.feedback)?
        .set("lambdas", a.lambdas)?
        .set("j_max", a.j_max)?
        .set("initial", starting_counts(a.agents, a.initial, 1)?)?
        .set("checkpoints", a.checkpoints)?
        .set("replicates", a.replicates)?;
    let (results, mut out) = experiment(&a.common, "regime", defaults, flags)?;
    let Some(Summary::Regime {
        classifications,
        fixation,
    }) = &results.summary
    else {
        bail!("unexpected summary");
    };
    let first = classifications.first().context("no classification")?.verdict;
    let mut pass = true;
    out.line(format!("verdict: {}", verdict_name(first)));
    for c in classifications {
        let e = &c.evidence;
        pass &= c.verdict == first && c.verdict != Verdict::Inconclusive;
        if let Some(exact) = e.exact_verdict {
            pass &= e.numeric_verdict == exact;
        }
        out.line(format!(
            "lambda={} verdict={} numeric={} slope={:.4} r2={:.4} top_decade_growth={:.4}",
            c.lambda,
            verdict_name(c.verdict),
            verdict_name(e.numeric_verdict),
            e.slope,
            e.r_squared,
            e.top_decade_growth
        ));
        out.line(format!("  {}", e.description));
    }
    if let Some(f) = fixation {
        out.line(format!(
            "leader unchanged across checkpoints: {}/{} ({:.4}, 95% CI {:.4}..{:.4})",
            f.successes, f.trials, f.fraction, f.ci_low, f.ci_high
        ));
    }
    if a.common.check {
        out.line(format!(
            "check (one conclusive verdict, numeric agrees with exact rule): {}",
            verdict(pass)
        ));
    }
    out.finish()?;
    Ok(!a.common.check || pass)
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Diverges => "diverges",
        Verdict::Converges => "converges",
        Verdict::Inconclusive => "inconclusive",
    }
}

pub fn petrov(a: PetrovArgs) -> Result<bool> {
    let mut defaults = Layer::new();
    defaults
        .set("replicates", Some(1u64))?
        .set("master_seed", Some(0u64))?
        .set("model", Some("exponential feedback=const:1"))?
        .set("n_grid", Some(vec![100u64, 1000, 10_000]))?
        .set("samples", Some(100_000u64))?;
    let mut flags = Layer::new();
    flags
        .set("model", model_flag(a.model, a.feedback))?
        .set("n_grid", a.n_grid)?
        .set("lambda", a.lambda)?
        .set("samples", a.samples)?
        .set("mode", a.mode)?
        .set("replicates", a.replicates)?;
    let (results, mut out) = experiment(&a.common, "petrov", defaults, flags)?;
    let Some(Summary::Petrov { spreads }) = &results.summary else {
        bail!("unexpected summary");
    };
    out.line("replicate n q_hat d_sum product");
    for r in &results.records {
        if let birthrace_core::montecarlo::ReplicateRecord::Petrov { replicate, table } = r {
            for row in &table.rows {
                let product = row.product.map_or("vacuous".to_string(), |p| format!("{p:.6}"));
                out.line(format!(
                    "{replicate} {} {:.6} {:.6} {product}",
                    row.n, row.q_hat, row.d_sum
                ));
            }
        }
    }
    let mut pass = true;
    for (i, s) in spreads.iter().enumerate() {
        match s {
            Some(s) => {
                pass &= *s <= PETROV_MAX_SPREAD;
                out.line(format!("replicate {i}: max/min product {s:.4}"));
            }
            None => {
                pass = false;
                out.line(format!("replicate {i}: fewer than two non-vacuous rows"));
            }
        }
    }
    if a.common.check {
        out.line(format!(
            "check (products within a factor {PETROV_MAX_SPREAD}): {}",
            verdict(pass)
        ));
    }
    out.finish()?;
    Ok(!a.common.check || pass)
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Shape {
    Increasing,
    Unimodal,
    Both,
}

#[derive(Serialize, Deserialize)]
struct FuzzRun {
    trials: u64,
    shape: Shape,
    #[serde(default)]
    seed: u64,
}

pub fn unimodal_fuzz(a: FuzzArgs) -> Result<bool> {
    let mut defaults = Layer::new();
    defaults.set("trials", Some(10_000u64))?.set("shape", Some("both"))?;
    let mut flags = Layer::new();
    flags
        .set("trials", a.trials)?
        .set("shape", a.shape)?
        .set("seed", a.common.seed)?;
    let run: FuzzRun = resolve(defaults, read_file(a.common.config.as_deref())?, flags, None)?;
    let shapes: &[bool] = match run.shape {
        Shape::Increasing => &[false],
        Shape::Unimodal => &[true],
        Shape::Both => &[false, true],
    };
    let mut out = Output::create(&a.common.out)?;
    out.write("config.toml", to_toml(&run)?)?;
    let summaries: Vec<FuzzSummary> = shapes
        .iter()
        .map(|&u| shift_fuzz(run.trials, u, run.seed))
        .collect::<birthrace_core::Result<_>>()?;
    out.write("fuzz.json", serde_json::to_string_pretty(&summaries)?)?;
    let mut pass = true;
    for s in &summaries {
        pass &= s.violations == 0;
        out.line(format!(
            "{}: {} trials, {} violations, worst |lhs|/bound {:.6}",
            if s.unimodal { "unimodal" } else { "increasing" },
            s.trials,
            s.violations,
            s.worst_ratio
        ));
    }
    if a.common.check {
        out.line(format!("check (no violations): {}", verdict(pass)));
    }
    out.finish()?;
    Ok(!a.common.check || pass)
}
