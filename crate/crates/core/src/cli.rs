//! The `stripsim` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 input or parse error, 3
//! generation failure, 4 verification mismatch.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::attack::{parse_strip_list, sample_plan, AttackPlan, PlanError, SamplerConfig, SeverityLevel, StripSpec};
use crate::bayer::BayerPattern;
use crate::dataset::{self, Engine, GenerateConfig, SubcategoryFilter};
use crate::image::{load_image, save_image, ImageError};
use crate::stats::{self, DegradationReport, MetricKind, TTestKind};
use crate::verify::{detect_heuristic_with_pattern, verify_against_original, DEFAULT_THRESHOLD};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_GENERATION: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "stripsim", version, about = "Simulate, verify and analyse color-strip attacks on camera images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attack one image and write a `<output>.plan.json` sidecar.
    Attack(AttackArgs),
    /// Build a severity-split attacked dataset from a corpus.
    Batch(BatchArgs),
    /// Check attacked outputs against their plans (manifest or sidecar).
    Verify(VerifyArgs),
    /// Degradation tables and t-tests from metric CSVs.
    Stats(StatsArgs),
    /// Run the no-reference strip detector; prints a JSON report.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    /// Smallest strip height in rows (even).
    #[arg(long, default_value_t = SamplerConfig::default().min_strip_height)]
    pub min_strip_height: usize,
    /// Largest strip height in rows (even).
    #[arg(long, default_value_t = SamplerConfig::default().max_strip_height)]
    pub max_strip_height: usize,
    /// Height redraws before giving up on a plan.
    #[arg(long, default_value_t = SamplerConfig::default().max_placement_attempts)]
    pub max_placement_attempts: usize,
}

impl SamplerArgs {
    fn config(&self) -> SamplerConfig {
        SamplerConfig {
            min_strip_height: self.min_strip_height,
            max_strip_height: self.max_strip_height,
            max_placement_attempts: self.max_placement_attempts,
        }
    }
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Source image (PNG or binary PPM).
    #[arg(long)]
    pub input: PathBuf,
    /// Attacked image; `.ppm` writes PPM, anything else PNG.
    #[arg(long)]
    pub output: PathBuf,
    /// mild, moderate or severe (unattacked copies the input).
    #[arg(long)]
    pub severity: SeverityLevel,
    /// Explicit strips "s0-e0,s1-e1,..." (half-open rows); bypasses the
    /// severity's count range.
    #[arg(long)]
    pub strips: Option<String>,
    /// Plan seed; required unless --strips is given.
    #[arg(long)]
    pub seed: Option<u64>,
    /// swap or packet.
    #[arg(long, default_value = "swap")]
    pub engine: Engine,
    /// rggb, grbg, gbrg or bggr.
    #[arg(long, default_value = "rggb")]
    pub pattern: BayerPattern,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Directory holding the corpus images.
    #[arg(long)]
    pub corpus: PathBuf,
    /// JSON array of {name, attributes: {weather, scene, timeofday}}.
    #[arg(long)]
    pub attributes: PathBuf,
    /// Output directory (images/, manifest.jsonl, summary.json, summary.txt).
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed.
    #[arg(long)]
    pub seed: u64,
    /// swap or packet.
    #[arg(long, default_value = "swap")]
    pub engine: Engine,
    /// rggb, grbg, gbrg or bggr.
    #[arg(long, default_value = "rggb")]
    pub pattern: BayerPattern,
    /// Worker threads (0 = all cores). Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Drop subcategories with fewer images than this.
    #[arg(long, default_value_t = 0)]
    pub min_images: usize,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Batch manifest (manifest.jsonl).
    #[arg(long, conflicts_with = "sidecar", required_unless_present = "sidecar")]
    pub manifest: Option<PathBuf>,
    /// Corpus directory for --manifest; defaults to the one in summary.json.
    #[arg(long, requires = "manifest")]
    pub corpus: Option<PathBuf>,
    /// Sidecar plan written by `attack`.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Metrics CSV: group,subcategory,model,metric,no_attack,mild,moderate,severe.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Directory for ds_report/dm_report (.csv, .txt) and ttest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Two sample files; prints the t-test result as JSON.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub ttest: Option<Vec<PathBuf>>,
    /// welch, pooled or paired.
    #[arg(long, default_value = "welch")]
    pub ttest_kind: TTestKind,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Image to scan.
    #[arg(long)]
    pub input: PathBuf,
    /// Peak score a strip must exceed (0..1).
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// rggb, grbg, gbrg or bggr.
    #[arg(long, default_value = "rggb")]
    pub pattern: BayerPattern,
}

/// Plan sidecar written next to a single attacked image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub source: String,
    pub output: String,
    pub severity: SeverityLevel,
    pub seed: u64,
    pub strips: Vec<StripSpec>,
    pub width: usize,
    pub height: usize,
    pub engine: Engine,
    pub pattern: BayerPattern,
}

impl Sidecar {
    pub fn plan(&self) -> AttackPlan {
        AttackPlan {
            severity: self.severity,
            seed: self.seed,
            strips: self.strips.clone(),
            image_height: self.height,
            image_width: self.width,
        }
    }
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".plan.json");
    PathBuf::from(s)
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl std::fmt::Display) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

fn image_failure(e: ImageError) -> Failure {
    fail(EXIT_INPUT, e)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Attack(a) => cmd_attack(&a),
        Command::Batch(a) => cmd_batch(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Inspect(a) => cmd_inspect(&a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("stripsim: {}", f.message);
            f.code
        }
    }
}

fn cmd_attack(a: &AttackArgs) -> Result<i32, Failure> {
    let sampler = a.sampler.config();
    sampler.validate().map_err(|e| fail(EXIT_USAGE, e))?;
    let strips = a
        .strips
        .as_deref()
        .map(parse_strip_list)
        .transpose()
        .map_err(|e| fail(EXIT_USAGE, format!("--strips: {e}")))?;
    let seed = match (a.seed, &strips) {
        (Some(s), _) => s,
        (None, Some(_)) => 0,
        (None, None) => return Err(fail(EXIT_USAGE, "--seed is required unless --strips is given")),
    };
    let img = load_image(&a.input).map_err(image_failure)?;
    let (w, h) = (img.width(), img.height());
    let plan = match strips {
        Some(strips) => AttackPlan::explicit(a.severity, seed, w, h, strips).map_err(|e| fail(EXIT_INPUT, e))?,
        None => sample_plan(a.severity, w, h, seed, &sampler).map_err(|e| match e {
            PlanError::ImageTooSmall { .. } => fail(EXIT_GENERATION, e),
            other => fail(EXIT_INPUT, other),
        })?,
    };
    if plan.strips.is_empty() {
        fs::copy(&a.input, &a.output).map_err(|e| fail(EXIT_GENERATION, format!("{}: {e}", a.output.display())))?;
    } else {
        let out = a.engine.apply(&img, &plan, a.pattern).map_err(|e| fail(EXIT_GENERATION, e))?;
        save_image(&out, &a.output).map_err(|e| fail(EXIT_GENERATION, e))?;
    }
    let sidecar = Sidecar {
        source: a.input.display().to_string(),
        output: a.output.display().to_string(),
        severity: plan.severity,
        seed: plan.seed,
        strips: plan.strips.clone(),
        width: w,
        height: h,
        engine: a.engine,
        pattern: a.pattern,
    };
    let path = sidecar_path(&a.output);
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&path, json + "\n").map_err(|e| fail(EXIT_GENERATION, format!("{}: {e}", path.display())))?;
    eprintln!(
        "{}: {} strip(s), {} rows impacted",
        a.output.display(),
        plan.strips.len(),
        plan.impacted_rows()
    );
    Ok(EXIT_OK)
}

fn cmd_batch(a: &BatchArgs) -> Result<i32, Failure> {
    let sampler = a.sampler.config();
    sampler.validate().map_err(|e| fail(EXIT_USAGE, e))?;
    let config = GenerateConfig {
        master_seed: a.seed,
        engine: a.engine,
        pattern: a.pattern,
        filter: SubcategoryFilter {
            min_images: a.min_images,
            ..Default::default()
        },
        sampler,
        jobs: a.jobs,
    };
    let result = dataset::generate(&a.corpus, &a.attributes, &a.out, &config).map_err(|e| match e {
        dataset::DatasetError::Io { ref path, .. } if Path::new(path).starts_with(&a.out) => fail(EXIT_GENERATION, e),
        dataset::DatasetError::Config(_) => fail(EXIT_USAGE, e),
        other => fail(EXIT_INPUT, other),
    })?;
    eprint!("{}", result.summary.render_text());
    if result.summary.failed > 0 {
        eprintln!(
            "warning: {} image(s) failed; see the error field in {}",
            result.summary.failed,
            result.manifest_path.display()
        );
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct VerifyOutcome {
    checked: usize,
    skipped_failed: usize,
    mismatched: Vec<String>,
}

fn verify_pair(source: &Path, output: &Path, plan: &AttackPlan) -> Result<(), String> {
    if plan.strips.is_empty() {
        let (a, b) = (
            fs::read(source).map_err(|e| format!("{}: {e}", source.display()))?,
            fs::read(output).map_err(|e| format!("{}: {e}", output.display()))?,
        );
        return if a == b { Ok(()) } else { Err("unattacked output differs from its source".into()) };
    }
    let orig = load_image(source).map_err(|e| e.to_string())?;
    let out = load_image(output).map_err(|e| e.to_string())?;
    if (orig.width(), orig.height()) != (plan.image_width, plan.image_height) {
        return Err("source size differs from the recorded plan".into());
    }
    let report = verify_against_original(&orig, &out, plan).map_err(|e| e.to_string())?;
    if report.matched == Some(true) {
        Ok(())
    } else {
        Err(format!("missed {:?}, spurious {:?}", report.missed, report.spurious))
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32, Failure> {
    let mut outcome = VerifyOutcome {
        checked: 0,
        skipped_failed: 0,
        mismatched: Vec::new(),
    };
    if let Some(manifest) = &a.manifest {
        let records = dataset::read_manifest(manifest).map_err(|e| fail(EXIT_INPUT, e))?;
        let root = manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
        let corpus = match &a.corpus {
            Some(c) => c.clone(),
            None => {
                let summary = dataset::read_summary(&root.join(dataset::SUMMARY_FILE))
                    .map_err(|e| fail(EXIT_INPUT, format!("{e} (pass --corpus)")))?;
                PathBuf::from(summary.corpus)
            }
        };
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(&r.source) {
                continue;
            }
            if r.error.is_some() {
                outcome.skipped_failed += 1;
                continue;
            }
            outcome.checked += 1;
            if let Err(why) = verify_pair(&corpus.join(&r.source), &root.join(&r.output), &r.plan()) {
                eprintln!("{}: {why}", r.output);
                outcome.mismatched.push(r.output.clone());
            }
        }
    } else if let Some(path) = &a.sidecar {
        let text = fs::read_to_string(path).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))?;
        let sc: Sidecar =
            serde_json::from_str(&text).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))?;
        outcome.checked = 1;
        if let Err(why) = verify_pair(Path::new(&sc.source), Path::new(&sc.output), &sc.plan()) {
            eprintln!("{}: {why}", sc.output);
            outcome.mismatched.push(sc.output.clone());
        }
    }
    println!("{}", serde_json::to_string_pretty(&outcome).expect("serializes"));
    Ok(if outcome.mismatched.is_empty() { EXIT_OK } else { EXIT_MISMATCH })
}

fn cmd_stats(a: &StatsArgs) -> Result<i32, Failure> {
    if a.metrics.is_none() && a.ttest.is_none() {
        return Err(fail(EXIT_USAGE, "nothing to do: give --metrics and/or --ttest"));
    }
    fs::create_dir_all(&a.out).map_err(|e| fail(EXIT_GENERATION, format!("{}: {e}", a.out.display())))?;
    if let Some(path) = &a.metrics {
        let table = stats::load_metrics_csv(path).map_err(|e| fail(EXIT_INPUT, e))?;
        let reports: Vec<DegradationReport> = table
            .metrics()
            .into_iter()
            .map(|m: MetricKind| DegradationReport::build(&table, m))
            .collect::<Result<_, _>>()
            .map_err(|e| fail(EXIT_INPUT, e))?;
        stats::emit_report(&reports, &a.out).map_err(|e| fail(EXIT_GENERATION, e))?;
        eprint!("{}\n{}", stats::render_ds_text(&reports), stats::render_dm_text(&reports));
    }
    if let Some(files) = &a.ttest {
        let a_vals = stats::load_sample_csv(&files[0]).map_err(|e| fail(EXIT_INPUT, e))?;
        let b_vals = stats::load_sample_csv(&files[1]).map_err(|e| fail(EXIT_INPUT, e))?;
        let r = stats::ttest_with(&a_vals, &b_vals, a.ttest_kind).map_err(|e| fail(EXIT_INPUT, e))?;
        let json = serde_json::to_string_pretty(&r).expect("serializes");
        fs::write(a.out.join("ttest.json"), format!("{json}\n"))
            .map_err(|e| fail(EXIT_GENERATION, e))?;
        println!("{json}");
    }
    Ok(EXIT_OK)
}

fn cmd_inspect(a: &InspectArgs) -> Result<i32, Failure> {
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(fail(EXIT_USAGE, "--threshold must be in [0, 1]"));
    }
    let img = load_image(&a.input).map_err(image_failure)?;
    let report = detect_heuristic_with_pattern(&img, a.threshold, a.pattern);
    println!("{}", serde_json::to_string_pretty(&report).expect("serializes"));
    Ok(EXIT_OK)
}
