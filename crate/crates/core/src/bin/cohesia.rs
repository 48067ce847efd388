use std::{
    fs::{self, File},
    io::{self, BufWriter, Write},
    path::{Path, PathBuf},
    process::ExitCode,
};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cohesia::{
    chiaa_report::render_report,
    config::{ExtractorMode, ENDPOINT_ENV},
    eval_harness::{self, HarnessError},
    pipeline,
    semantics::{RemoteProvider, SemanticProvider, SurrogateProvider},
    Config, Error, InputFormat, ProviderChoice, ReportFormat, ThresholdScope,
};

#[derive(Parser)]
#[command(name = "cohesia", version, about = "Lexical cohesion analysis of structured documents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one document and write a cohesion report.
    Analyze(AnalyzeArgs),
    /// Run corpus experiments over a manifest of categorized documents.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Surrogate,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Section,
    Document,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputArg {
    Json,
    Plain,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleArg {
    All,
    Documents,
    Sections,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "surrogate")]
    provider: ProviderArg,
    /// Sidecar base URL for the remote provider.
    #[arg(long, env = ENDPOINT_ENV)]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "section")]
    threshold_scope: ScopeArg,
    /// Newline-separated key-entity list replacing the heuristic extractor.
    #[arg(long, value_name = "FILE")]
    entities: Option<PathBuf>,
    /// Disable the six-sentence / four-node section filters.
    #[arg(long)]
    no_filters: bool,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    input_format: Option<InputArg>,
    /// Strip headings, captions and equation lines before segmentation.
    #[arg(long)]
    clean: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    path: PathBuf,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also export the pruned metagraph as JSON.
    #[arg(long, value_name = "FILE")]
    metagraph: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    manifest: PathBuf,
    #[command(flatten)]
    common: Common,
    /// CSV of external indices keyed by doc_id, section_index.
    #[arg(long, value_name = "CSV")]
    external: Option<PathBuf>,
    /// Directory for contingency.csv, correlations.csv and metrics.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Category balancing for the contingency test.
    #[arg(long, value_enum, default_value = "all")]
    sample: SampleArg,
}

impl Common {
    fn config(&self, format: ReportFormat) -> Result<Config, Error> {
        let provider = match self.provider {
            ProviderArg::Surrogate => ProviderChoice::Surrogate,
            ProviderArg::Remote => ProviderChoice::resolve("remote", self.endpoint.as_deref())?,
        };
        Ok(Config {
            provider,
            threshold_scope: match self.threshold_scope {
                ScopeArg::Section => ThresholdScope::Section,
                ScopeArg::Document => ThresholdScope::Document,
            },
            extractor: self
                .entities
                .clone()
                .map_or(ExtractorMode::Heuristic, ExtractorMode::ExternalList),
            seed: self.seed,
            filters: !self.no_filters,
            format,
            input_format: self.input_format.map(|f| match f {
                InputArg::Json => InputFormat::Json,
                InputArg::Plain => InputFormat::Plain,
            }),
            clean: self.clean,
        })
    }
}

fn provider(config: &Config) -> Result<Box<dyn SemanticProvider>, Error> {
    Ok(match &config.provider {
        ProviderChoice::Surrogate => Box::new(SurrogateProvider::new()),
        ProviderChoice::Remote(url) => Box::new(RemoteProvider::connect(url)?),
    })
}

/// Exit status: 0 clean, 2 completed with warnings.
#[derive(PartialEq)]
enum Outcome {
    Clean,
    Warnings,
}

fn write_output(path: Option<&Path>, body: &str) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, body),
        None => io::stdout().lock().write_all(body.as_bytes()),
    }
}

fn run_analyze(args: &AnalyzeArgs) -> Result<Outcome, Error> {
    let format = match args.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Md => ReportFormat::Markdown,
    };
    let config = args.common.config(format)?;
    let doc = pipeline::load(&args.path, &config)?;
    let provider = provider(&config)?;
    let analysis = pipeline::analyze(&doc, &config, provider.as_ref())?;
    write_output(args.output.as_deref(), &render_report(&analysis.report, config.format))?;
    if let Some(path) = &args.metagraph {
        fs::write(path, analysis.pruned.to_json())?;
    }
    Ok(if analysis.has_warnings() { Outcome::Warnings } else { Outcome::Clean })
}

fn run_eval(args: &EvalArgs) -> Result<Outcome, Error> {
    let config = args.common.config(ReportFormat::Json)?;
    let entries = eval_harness::load_manifest(&args.manifest)?;
    let provider = provider(&config)?;
    let run = eval_harness::analyze_corpus(&entries, &config, provider.as_ref());
    let mut outcome = Outcome::Clean;
    let mut out = io::stdout().lock();

    for (path, err) in &run.failures {
        eprintln!("warning: {}: {err}", path.display());
        outcome = Outcome::Warnings;
    }
    fs::create_dir_all(&args.out_dir)?;
    if run.records.is_empty() {
        return Err(HarnessError::NoRecords.into());
    }
    eval_harness::export_metrics_csv(&run.records, BufWriter::new(File::create(args.out_dir.join("metrics.csv"))?))?;
    writeln!(out, "documents analyzed: {}", run.records.len())?;
    writeln!(out, "seed: {}", config.seed)?;

    let samples = match args.sample {
        SampleArg::All => eval_harness::section_samples(&run.records, config.filters),
        SampleArg::Documents => eval_harness::section_samples(
            &eval_harness::balance_documents(&run.records, config.seed),
            config.filters,
        ),
        SampleArg::Sections => eval_harness::balance_sections(
            &eval_harness::section_samples(&run.records, config.filters),
            config.seed,
        ),
    };

    match eval_harness::component_contingency(&samples) {
        Ok(c) => {
            eval_harness::write_contingency_csv(&c, File::create(args.out_dir.join("contingency.csv"))?)?;
            writeln!(out, "\ncomponents\t{}\t{}", c.categories[0], c.categories[1])?;
            writeln!(out, "multiple\t{}\t{}", c.table[0][0], c.table[0][1])?;
            writeln!(out, "single\t{}\t{}", c.table[1][0], c.table[1][1])?;
            writeln!(
                out,
                "chi-square = {:.6}, dof = {}, p = {:.6e}",
                c.chi_square.statistic, c.chi_square.dof, c.chi_square.p_value
            )?;
            for line in c.probability_lines() {
                writeln!(out, "P(multiple) {line}")?;
            }
        }
        Err(e @ HarnessError::DegenerateTable(_)) => {
            eprintln!("warning: {e}");
            outcome = Outcome::Warnings;
        }
        Err(e) => return Err(e.into()),
    }

    writeln!(out, "\nSLIC\tmin\tq1\tmedian\tq3\tmax")?;
    for (cat, s) in eval_harness::slic_summaries(&samples) {
        writeln!(out, "{cat}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}", s.min, s.q1, s.median, s.q3, s.max)?;
    }

    if let Some(csv_path) = &args.external {
        let all = eval_harness::section_samples(&run.records, config.filters);
        let rows = eval_harness::correlate_external(&all, File::open(csv_path)?)?;
        eval_harness::write_correlations_csv(&rows, File::create(args.out_dir.join("correlations.csv"))?)?;
        writeln!(out, "\nindex\tpearson_r\tn")?;
        for r in &rows {
            writeln!(out, "{}\t{:.4}\t{}", r.index_name, r.pearson_r, r.n)?;
        }
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Eval(e) => run_eval(e),
    };
    match result {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Warnings) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
