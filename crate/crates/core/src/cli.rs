//! Command-line driver.
//!
//! Every command stages its files in a temporary directory next to `--out`
//! and moves them into place only after all of them are written, so a
//! failing run leaves the output directory untouched.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::{
    bounds_from_posterior, class_posteriors, decide, decision_string, misclassification_report,
    unidentifiable_attributes, zeta_rates, Decision, MasteryBounds,
};
use crate::estimate::{em_fit, EmOptions, FitReport, FitResult, Variant};
use crate::exec::Exec;
use crate::io;
use crate::model::{prior_class_probs, ItemParams, ModelSpec, PriorSpec, ResponseMatrix};
use crate::qspace::{is_complete, partition_with, Link, Partition, Profile, QMatrix};
use crate::simulate::{builtin_scenario, builtin_scenarios, Scenario, ScenarioFile};
use crate::tmatrix::{rank_check_for, t_matrix_for, RankCheck, MAX_TMATRIX_ITEMS};

/// Exit status for bad input.
pub const EXIT_INPUT: i32 = 2;
/// Exit status when some fit did not converge but its output was written.
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "niad", version, about = "Identifiability-aware DINA/DINO analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition the profile space of a Q-matrix into equivalence classes.
    Partition(PartitionArgs),
    /// Validate inputs and print a short identifiability summary.
    Check(CheckArgs),
    /// Generate responses and true profiles from a scenario.
    Simulate(SimulateArgs),
    /// Fit one or all model variants by EM.
    Fit(FitArgs),
    /// Three-way classification of every respondent.
    Classify(ClassifyArgs),
    /// Marginal identifiability rates and an identifiability audit.
    Evaluate(EvaluateArgs),
    /// Comparison table from saved fit reports.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct QArgs {
    /// Q-matrix CSV (J rows of K 0/1 values).
    #[arg(long)]
    pub q: Option<PathBuf>,
    /// The Q-matrix CSV starts with a row of attribute names.
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value_t = Link::Dina)]
    pub link: Link,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Response CSV (N rows of J 0/1 values).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// True profiles, one per respondent.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Built-in scenario name or scenario JSON path; supplies whatever
    /// of Q, data, and truth is not given explicitly.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EmArgs {
    #[arg(long, default_value = "niad")]
    pub variant: String,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long = "max-iter", default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// JSON with `slip` and `guess` arrays; holds item parameters fixed.
    #[arg(long = "fixed-items")]
    pub fixed_items: Option<PathBuf>,
    /// Run the data-parallel loops on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[command(flatten)]
    pub q: QArgs,
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub q: QArgs,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Respondent count; defaults to the scenario's.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub q: QArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub em: EmArgs,
    /// Also write the T-matrix of each fitted model (J <= 20).
    #[arg(long = "emit-tmatrix")]
    pub emit_tmatrix: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub q: QArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub em: EmArgs,
    /// Saved fit report; without it a NIAD model is fitted first.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub cutoff: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub q: QArgs,
    /// Saved fit report supplying class proportions and item parameters.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Scenario supplying true proportions when no fit is given.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Fit report JSON files, or directories holding `fit-*.json`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Files collected by a command, moved into the output directory on success.
struct Staging {
    dir: tempfile::TempDir,
    out: PathBuf,
    files: Vec<String>,
}

impl Staging {
    fn new(out: &Path) -> anyhow::Result<Self> {
        if out.exists() && !out.is_dir() {
            bail!("output path {} is not a directory", out.display());
        }
        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)
            .with_context(|| format!("creating {}", parent.display()))?;
        let dir = tempfile::Builder::new()
            .prefix(".niad-staging-")
            .tempdir_in(&parent)
            .with_context(|| format!("staging next to {}", out.display()))?;
        Ok(Staging {
            dir,
            out: out.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
        fs::write(self.dir.path().join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn commit(self) -> anyhow::Result<()> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        for name in &self.files {
            fs::rename(self.dir.path().join(name), self.out.join(name))
                .with_context(|| format!("moving {name} into {}", self.out.display()))?;
        }
        Ok(())
    }
}

fn json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn load_scenario(name: &str, seed: Option<u64>) -> anyhow::Result<Scenario> {
    let sc = match builtin_scenario(name) {
        Some(sc) => sc,
        None => {
            let path = Path::new(name);
            if !path.exists() {
                let names: Vec<String> = builtin_scenarios().into_iter().map(|s| s.name).collect();
                bail!(
                    "unknown scenario {name:?}: not a file and not one of {}",
                    names.join(", ")
                );
            }
            Scenario::from_json_file(path).with_context(|| format!("reading scenario {name}"))?
        }
    };
    Ok(match seed {
        Some(s) => sc.with_seed(s),
        None => sc,
    })
}

/// Q-matrix, responses, and optional truth resolved from explicit files and a scenario.
struct Inputs {
    q: QMatrix,
    link: Link,
    data: Option<ResponseMatrix>,
    truth: Option<Vec<Profile>>,
}

fn resolve_inputs(q: &QArgs, d: &DataArgs) -> anyhow::Result<Inputs> {
    let scenario = d
        .scenario
        .as_deref()
        .map(|s| load_scenario(s, d.seed))
        .transpose()?;
    let (qm, link) = match (&q.q, &scenario) {
        (Some(path), _) => (io::read_q_csv(path, q.header)?, q.link),
        (None, Some(sc)) => (sc.q.clone(), sc.link),
        (None, None) => bail!("a Q-matrix is required (--q or --scenario)"),
    };
    let mut data = d.data.as_deref().map(|p| io::read_responses_csv(p, false)).transpose()?;
    let mut truth = d.truth.as_deref().map(|p| io::read_truth_csv(p, false)).transpose()?;
    if let Some(sc) = &scenario {
        if data.is_none() {
            let (profiles, responses) = sc.generate()?;
            data = Some(responses);
            if truth.is_none() {
                truth = Some(profiles);
            }
        }
    }
    if let Some(data) = &data {
        if data.n_items() != qm.n_items() {
            bail!(
                "responses have {} items but the Q-matrix has {}",
                data.n_items(),
                qm.n_items()
            );
        }
        if let Some(truth) = &truth {
            if truth.len() != data.n_respondents() {
                bail!(
                    "{} true profiles for {} respondents",
                    truth.len(),
                    data.n_respondents()
                );
            }
        }
    }
    if let Some(truth) = &truth {
        if truth.iter().any(|p| p.len() != qm.n_attributes()) {
            bail!("true profiles do not have {} attributes", qm.n_attributes());
        }
    }
    Ok(Inputs {
        q: qm,
        link,
        data,
        truth,
    })
}

fn variants(tag: &str) -> anyhow::Result<Vec<Variant>> {
    if tag == "all" {
        return Ok(Variant::ALL.to_vec());
    }
    Ok(vec![tag.parse().map_err(|e: crate::Error| anyhow!(e))?])
}

/// Seed for one variant; independent of which other variants are fitted.
fn variant_seed(seed: u64, variant: Variant) -> u64 {
    let stream = match variant {
        Variant::Niad => 0,
        Variant::Ho => 1,
        Variant::Rho => 2,
        Variant::Ind => 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(16 + stream);
    rng.next_u64()
}

fn em_options(em: &EmArgs, seed: u64, link: Link, n_items: usize) -> anyhow::Result<EmOptions> {
    let items = em
        .fixed_items
        .as_deref()
        .map(|p| -> anyhow::Result<ItemParams> {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let items: ItemParams = serde_json::from_str(&text)
                .with_context(|| format!("parsing item parameters in {}", p.display()))?;
            Ok(items)
        })
        .transpose()?;
    let opts = EmOptions {
        max_iterations: em.max_iter,
        tolerance: em.tol,
        restarts: em.restarts,
        seed,
        estimate_items: items.is_none(),
        items,
        link,
        exec: if em.sequential { Exec::Sequential } else { Exec::default() },
    };
    opts.validate(n_items)?;
    Ok(opts)
}

fn fit_variants(inputs: &Inputs, em: &EmArgs, seed: u64, which: &[Variant]) -> anyhow::Result<Vec<FitResult>> {
    let data = inputs
        .data
        .as_ref()
        .ok_or_else(|| anyhow!("responses are required (--data or --scenario)"))?;
    which
        .iter()
        .map(|&v| {
            let opts = em_options(em, variant_seed(seed, v), inputs.link, inputs.q.n_items())?;
            Ok(em_fit(data, &inputs.q, v, &opts)?)
        })
        .collect()
}

pub fn comparison_table(reports: &[FitReport]) -> String {
    let mut out = format!(
        "{:<10} {:>8} {:>12} {:>12} {:>12} {:>9}\n",
        "variant", "n_params", "loglik", "AIC", "BIC", "converged"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>12.2} {:>12.2} {:>12.2} {:>9}",
            r.variant.label(r.link),
            r.n_params,
            r.loglik,
            r.aic,
            r.bic,
            if r.converged { "yes" } else { "no" }
        );
    }
    if let Some(r) = reports.iter().find(|r| r.n_params_unreduced.is_some()) {
        let _ = writeln!(
            out,
            "unreduced saturated count (2J + 2^K): {}",
            r.n_params_unreduced.unwrap_or_default()
        );
    }
    out
}

/// Per-class proportions side by side, one column per report.
pub fn nu_table(reports: &[FitReport]) -> String {
    let mut out = format!("{:<12}", "class");
    for r in reports {
        let _ = write!(out, " {:>10}", r.variant.label(r.link));
    }
    out.push('\n');
    if let Some(first) = reports.first() {
        for class in first.nu_by_class.keys() {
            let _ = write!(out, "{:<12}", format!("[{class}]"));
            for r in reports {
                let _ = write!(out, " {:>10.2}", r.nu_by_class.get(class).copied().unwrap_or(f64::NAN));
            }
            out.push('\n');
        }
    }
    out
}

fn cmd_partition(args: &PartitionArgs) -> anyhow::Result<i32> {
    let (q, link) = match (&args.q.q, &args.scenario) {
        (Some(path), _) => (io::read_q_csv(path, args.q.header)?, args.q.link),
        (None, Some(name)) => {
            let sc = load_scenario(name, None)?;
            (sc.q, sc.link)
        }
        (None, None) => bail!("a Q-matrix is required (--q or --scenario)"),
    };
    let part = partition_with(&q, link, true)?;
    let table = io::partition_table(&part, None);
    if let Some(out) = &args.out {
        let mut stage = Staging::new(out)?;
        stage.write("partition.json", io::partition_json(&part)? + "\n")?;
        stage.write("partition.txt", &table)?;
        stage.commit()?;
    }
    print!("{table}");
    Ok(0)
}

fn identifiability_summary(q: &QMatrix, part: &Partition) -> String {
    format!(
        "J = {}, K = {}, L = {} classes ({} singletons) of {} profiles; Q-matrix is {}\n",
        q.n_items(),
        q.n_attributes(),
        part.len(),
        part.singletons(),
        q.n_profiles(),
        if is_complete(q) { "complete" } else { "incomplete" }
    )
}

fn cmd_check(args: &CheckArgs) -> anyhow::Result<i32> {
    let inputs = resolve_inputs(&args.q, &args.data)?;
    let part = partition_with(&inputs.q, inputs.link, true)?;
    print!("{}", identifiability_summary(&inputs.q, &part));
    if let Some(data) = &inputs.data {
        let pooled = data.pooled();
        println!(
            "responses: N = {}, {} distinct patterns",
            data.n_respondents(),
            pooled.patterns.len()
        );
    }
    if let Some(truth) = &inputs.truth {
        println!("truth: {} profiles", truth.len());
    }
    Ok(0)
}

fn cmd_simulate(args: &SimulateArgs) -> anyhow::Result<i32> {
    let mut sc = load_scenario(&args.scenario, args.seed)?;
    if let Some(n) = args.n {
        if n == 0 {
            bail!("--n must be at least 1");
        }
        sc = sc.with_n(n);
    }
    let (profiles, data) = sc.generate()?;
    let mut stage = Staging::new(&args.out)?;
    let mut buf = Vec::new();
    io::write_responses_csv(&data, &mut buf)?;
    stage.write("responses.csv", &buf)?;
    buf.clear();
    io::write_truth_csv(&profiles, &mut buf)?;
    stage.write("truth.csv", &buf)?;
    buf.clear();
    io::write_q_csv(&sc.q, &mut buf)?;
    stage.write("q.csv", &buf)?;
    #[derive(Serialize)]
    struct Meta<'a> {
        #[serde(flatten)]
        scenario: ScenarioFile,
        notes: &'a [String],
    }
    stage.write(
        "scenario.json",
        json(&Meta {
            scenario: ScenarioFile::from(&sc),
            notes: &sc.notes,
        })?,
    )?;
    stage.commit()?;
    println!(
        "{}: N = {}, J = {}, K = {}, seed = {}",
        sc.name,
        sc.n,
        sc.q.n_items(),
        sc.q.n_attributes(),
        sc.seed
    );
    for note in &sc.notes {
        println!("note: {note}");
    }
    Ok(0)
}

fn cmd_fit(args: &FitArgs) -> anyhow::Result<i32> {
    let inputs = resolve_inputs(&args.q, &args.data)?;
    let which = variants(&args.em.variant)?;
    if args.emit_tmatrix && inputs.q.n_items() > MAX_TMATRIX_ITEMS {
        bail!(crate::Error::TooManyItems(inputs.q.n_items()));
    }
    let seed = args.data.seed.unwrap_or(0);
    let fits = fit_variants(&inputs, &args.em, seed, &which)?;
    let mut stage = Staging::new(&args.out)?;
    let reports: Vec<FitReport> = fits.iter().map(|f| f.report()).collect();
    for (fit, report) in fits.iter().zip(&reports) {
        stage.write(&format!("fit-{}.json", fit.variant.tag()), json(report)?)?;
        if args.emit_tmatrix {
            let t = t_matrix_for(&fit.spec.partition, &fit.spec.items)?;
            let name = format!("tmatrix-{}.csv", fit.variant.tag());
            let file = fs::File::create(stage.path(&name))?;
            t.write_csv(&fit.spec.partition, std::io::BufWriter::new(file))?;
            stage.files.push(name);
        }
    }
    let table = comparison_table(&reports);
    stage.write("comparison.txt", &table)?;
    stage.commit()?;
    print!("{table}");
    report_warnings(&fits);
    Ok(if fits.iter().all(|f| f.converged) { 0 } else { EXIT_NOT_CONVERGED })
}

fn report_warnings(fits: &[FitResult]) {
    for fit in fits {
        if !fit.converged {
            eprintln!(
                "warning: {} did not converge in {} iterations",
                fit.variant.label(fit.spec.link),
                fit.n_iterations
            );
        }
        for w in &fit.warnings {
            eprintln!("warning: {}: {w}", fit.variant.label(fit.spec.link));
        }
    }
}

fn load_report(path: &Path) -> anyhow::Result<FitReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing fit report {}", path.display()))
}

/// Per-attribute rates in the `misclassified (unclassified)` layout.
pub fn rates_line(mis: Option<&[f64]>, unclassified: &[f64]) -> String {
    unclassified
        .iter()
        .enumerate()
        .map(|(k, u)| match mis {
            Some(m) => format!("{:.2} ({:.2})", m[k], u),
            None => format!("({u:.2})"),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn cmd_classify(args: &ClassifyArgs) -> anyhow::Result<i32> {
    crate::classify::check_cutoff(args.cutoff)?;
    let mut inputs = resolve_inputs(&args.q, &args.data)?;
    let (spec, fitted): (ModelSpec, Option<FitResult>) = match &args.fit {
        Some(path) => {
            let spec = load_report(path)?.to_spec()?;
            if spec.q != inputs.q {
                bail!("the fit report was made with a different Q-matrix");
            }
            (spec, None)
        }
        None => {
            let seed = args.data.seed.unwrap_or(0);
            let mut fits = fit_variants(&inputs, &args.em, seed, &[Variant::Niad])?;
            let fit = fits.pop().expect("one fit");
            (fit.spec.clone(), Some(fit))
        }
    };
    let data = inputs
        .data
        .take()
        .ok_or_else(|| anyhow!("responses are required (--data or --scenario)"))?;
    let posteriors = class_posteriors(&data, &spec, Exec::default())?;
    let bounds: Vec<MasteryBounds> = posteriors
        .iter()
        .map(|p| bounds_from_posterior(p, &spec.partition))
        .collect();
    let decisions: Vec<Vec<Decision>> = bounds.iter().map(|b| decide(b, args.cutoff)).collect();

    let n = data.n_respondents() as f64;
    let k = spec.q.n_attributes();
    let unclassified: Vec<f64> = (0..k)
        .map(|a| decisions.iter().filter(|d| d[a] == Decision::Unclassified).count() as f64 / n)
        .collect();
    let report = inputs
        .truth
        .as_deref()
        .map(|t| misclassification_report(t, &decisions))
        .transpose()?;
    let zero_pattern = data
        .rows()
        .position(|r| r.iter().all(|&v| v == 0))
        .map(|i| decision_string(&decisions[i]));

    let mut summary = String::new();
    let _ = writeln!(summary, "respondents: {}", data.n_respondents());
    let _ = writeln!(summary, "cutoff: {:.2}", args.cutoff);
    match &report {
        Some(r) => {
            let _ = writeln!(
                summary,
                "misclassified (unclassified) by attribute: {}",
                rates_line(Some(&r.misclassification_rate), &r.unclassified_rate)
            );
        }
        None => {
            let _ = writeln!(summary, "unclassified by attribute: {}", rates_line(None, &unclassified));
        }
    }
    if let Some(z) = zero_pattern {
        let _ = writeln!(summary, "all-incorrect response pattern: {z}");
    }

    #[derive(Serialize)]
    struct Summary<'a> {
        n_respondents: usize,
        cutoff: f64,
        unclassified_rate: &'a [f64],
        #[serde(skip_serializing_if = "Option::is_none")]
        misclassification_rate: Option<&'a [f64]>,
    }
    let mut stage = Staging::new(&args.out)?;
    let mut buf = Vec::new();
    io::write_classification_csv(&decisions, &bounds, &mut buf)?;
    stage.write("classification.csv", &buf)?;
    stage.write(
        "classification-summary.json",
        json(&Summary {
            n_respondents: data.n_respondents(),
            cutoff: args.cutoff,
            unclassified_rate: &unclassified,
            misclassification_rate: report.as_ref().map(|r| r.misclassification_rate.as_slice()),
        })?,
    )?;
    stage.write("classification-summary.txt", &summary)?;
    if let Some(fit) = &fitted {
        stage.write("fit-niad.json", json(&fit.report())?)?;
    }
    stage.commit()?;
    print!("{summary}");
    if let Some(fit) = &fitted {
        report_warnings(std::slice::from_ref(fit));
        if !fit.converged {
            return Ok(EXIT_NOT_CONVERGED);
        }
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
struct Audit {
    complete: bool,
    n_classes: usize,
    singletons: usize,
    zeta: std::collections::BTreeMap<usize, f64>,
    /// 1-based attributes that are not identifiable in some class with positive mass.
    never_identifiable: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rank_check: Option<RankAudit>,
}

#[derive(Debug, Serialize)]
struct RankAudit {
    rank: usize,
    n_classes: usize,
    identifiable: bool,
}

impl From<RankCheck> for RankAudit {
    fn from(r: RankCheck) -> Self {
        RankAudit {
            rank: r.rank,
            n_classes: r.n_classes,
            identifiable: r.identifiable,
        }
    }
}

fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<i32> {
    let (q, link, nu, items) = match (&args.fit, &args.scenario) {
        (Some(path), _) => {
            let spec = load_report(path)?.to_spec()?;
            if let Some(qpath) = &args.q.q {
                if io::read_q_csv(qpath, args.q.header)? != spec.q {
                    bail!("the fit report was made with a different Q-matrix");
                }
            }
            let nu = spec.class_probs()?;
            (spec.q, spec.link, nu, spec.items)
        }
        (None, Some(name)) => {
            let sc = load_scenario(name, None)?;
            let q = match &args.q.q {
                Some(path) => io::read_q_csv(path, args.q.header)?,
                None => sc.q.clone(),
            };
            if q.n_items() != sc.items.len() || q.n_attributes() != sc.q.n_attributes() {
                bail!("the Q-matrix does not match the scenario's dimensions");
            }
            let part = partition_with(&q, sc.link, true)?;
            let profile = sc.profile_probs()?;
            let nu: Vec<f64> = part
                .classes
                .iter()
                .map(|c| c.members.iter().map(|m| profile[m.bits() as usize]).sum())
                .collect();
            // Through the prior machinery so both paths share validation.
            let nu = prior_class_probs(&PriorSpec::Saturated { nu }, &part)?;
            (q, sc.link, nu, sc.items)
        }
        (None, None) => bail!("evaluate needs --fit or --scenario"),
    };
    let part = partition_with(&q, link, true)?;
    let zeta = zeta_rates(&part, &nu)?;
    let rank_check = if q.n_items() <= MAX_TMATRIX_ITEMS {
        Some(rank_check_for(&part, &items, Exec::default())?)
    } else {
        None
    };
    let audit = Audit {
        complete: is_complete(&q),
        n_classes: part.len(),
        singletons: part.singletons(),
        zeta: zeta.to_map(),
        never_identifiable: unidentifiable_attributes(&part, &nu, 0.0)
            .into_iter()
            .map(|k| k + 1)
            .collect(),
        rank_check: rank_check.map(RankAudit::from),
    };

    let mut text = identifiability_summary(&q, &part);
    let _ = writeln!(
        text,
        "zeta: {}",
        zeta.zeta
            .iter()
            .map(|z| format!("{z:.2}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    match &rank_check {
        Some(r) => {
            let _ = writeln!(
                text,
                "T-matrix rank {} of {} ({})",
                r.rank,
                r.n_classes,
                if r.identifiable { "class proportions identifiable" } else { "rank deficient" }
            );
        }
        None => {
            let _ = writeln!(text, "T-matrix rank check skipped (J > {MAX_TMATRIX_ITEMS})");
        }
    }
    let _ = writeln!(
        text,
        "attributes not always identifiable: {}",
        if audit.never_identifiable.is_empty() {
            "none".to_string()
        } else {
            audit
                .never_identifiable
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        }
    );
    if let Some(out) = &args.out {
        let mut stage = Staging::new(out)?;
        stage.write("zeta.json", io::zeta_json(&zeta)? + "\n")?;
        stage.write("audit.json", json(&audit)?)?;
        stage.write("audit.txt", &text)?;
        stage.commit()?;
    }
    print!("{text}");
    Ok(0)
}

fn cmd_report(args: &ReportArgs) -> anyhow::Result<i32> {
    let mut paths = Vec::new();
    for input in &args.inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("fit-") && n.ends_with(".json"))
                })
                .collect();
            found.sort();
            paths.extend(found);
        } else {
            paths.push(input.clone());
        }
    }
    if paths.is_empty() {
        bail!("no fit reports found");
    }
    let mut reports = paths
        .iter()
        .map(|p| load_report(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    reports.sort_by_key(|r| Variant::ALL.iter().position(|&v| v == r.variant));
    let text = format!("{}\n{}", comparison_table(&reports), nu_table(&reports));
    if let Some(out) = &args.out {
        let mut stage = Staging::new(out)?;
        stage.write("report.txt", &text)?;
        stage.commit()?;
    }
    print!("{text}");
    Ok(0)
}

/// Runs a parsed command and returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Partition(a) => cmd_partition(a),
        Command::Check(a) => cmd_check(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}
