use std::ffi::OsStr;
use std::fs;
use std::io::{self, Write};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;
use manifestscope_core::fingerprints::{load_signatures, SignatureDb};
use manifestscope_core::report::{
    aggregate_reports, app_error_json, app_report_json, render, render_apps, AppError, AppReport,
    CohortLabeling, OutputFormat,
};
use manifestscope_core::{Analyzer, RiskPolicy};
use walkdir::WalkDir;

const EXIT_USAGE: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

#[derive(Parser)]
#[command(
    name = "manifestscope",
    version,
    about = "Static privacy-exposure analysis for Android APKs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze APK files or directories of APKs.
    Analyze(AnalyzeArgs),
    /// Aggregate per-app JSON reports into a cohort report.
    Report(ReportArgs),
    /// Inspect the SDK signature database.
    Fingerprints {
        #[command(subcommand)]
        command: FingerprintsCommand,
    },
}

#[derive(Args)]
struct DbArg {
    /// Signature database (TSV). Defaults to the bundled database.
    #[arg(long, value_name = "PATH", env = "MANIFESTSCOPE_DB")]
    db: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    db: DbArg,
    /// Risk threshold overrides (key=value lines).
    #[arg(long, value_name = "PATH")]
    policy: Option<PathBuf>,
    /// Write one JSON file per app into this directory instead of stdout.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json", value_parser = parse_format)]
    format: OutputFormat,
    /// Replace app ids with App1..AppN by input position.
    #[arg(long)]
    anonymize: bool,
    /// Worker threads. Defaults to the number of CPUs.
    #[arg(long, value_name = "N")]
    jobs: Option<NonZeroUsize>,
    #[arg(required = true, value_name = "INPUT")]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV with header `app_id,cohort`.
    #[arg(long, value_name = "CSV")]
    labels: Option<PathBuf>,
    #[arg(long, default_value = "markdown", value_parser = parse_format)]
    format: OutputFormat,
    report_dir: PathBuf,
}

#[derive(Subcommand)]
enum FingerprintsCommand {
    /// Print every signature as TSV.
    List(DbArg),
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse()
}

/// A failure carrying its exit status.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn load_db(arg: &DbArg) -> Result<SignatureDb, Failure> {
    match &arg.db {
        None => Ok(SignatureDb::bundled().clone()),
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            load_signatures(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
        }
    }
}

fn is_apk(path: &Path) -> bool {
    path.extension()
        .and_then(OsStr::to_str)
        .is_some_and(|e| e.eq_ignore_ascii_case("apk"))
}

/// Files are taken as given; directories contribute their `.apk` files,
/// recursively, sorted by path.
fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = WalkDir::new(input)
                .sort_by_file_name()
                .into_iter()
                .filter_map(|e| match e {
                    Ok(e) => Some(e),
                    Err(err) => {
                        warn!("{err}");
                        None
                    }
                })
                .filter(|e| e.file_type().is_file() && is_apk(e.path()))
                .map(|e| e.into_path())
                .collect();
            if found.is_empty() {
                warn!("{}: no .apk files", input.display());
            }
            out.append(&mut found);
        } else if input.exists() {
            out.push(input.clone());
        } else {
            return Err(usage(format!(
                "{}: no such file or directory",
                input.display()
            )));
        }
    }
    if out.is_empty() {
        return Err(usage("no APK inputs found"));
    }
    Ok(out)
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<u8, Failure> {
    let db = load_db(&args.db)?;
    let policy = match &args.policy {
        None => RiskPolicy::default(),
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            RiskPolicy::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
    };
    let paths = expand_inputs(&args.inputs)?;
    let jobs = args
        .jobs
        .or_else(|| std::thread::available_parallelism().ok())
        .map_or(1, NonZeroUsize::get);

    let results = Analyzer::new(db, policy).analyze_batch(&paths, jobs, args.anonymize);
    let failures = results.iter().filter(|r| r.is_err()).count();

    let mut reports: Vec<AppReport> = Vec::new();
    let mut errors: Vec<(usize, AppError)> = Vec::new();
    for (i, (path, result)) in paths.iter().zip(results).enumerate() {
        match result {
            Ok(r) => reports.push(r),
            Err(e) => {
                let source = path.file_name().map_or_else(
                    || path.display().to_string(),
                    |n| n.to_string_lossy().into_owned(),
                );
                warn!("{}: {e}", path.display());
                errors.push((
                    i,
                    AppError {
                        source,
                        error: e.to_string(),
                    },
                ));
            }
        }
    }

    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
            for r in &reports {
                write_file(
                    &dir.join(format!("{}.json", file_safe(&r.app_id))),
                    &app_report_json(r),
                )?;
            }
            let mut used = std::collections::HashSet::new();
            for (i, e) in &errors {
                let stem = Path::new(&e.source)
                    .file_stem()
                    .map_or_else(|| format!("input{i}"), |s| file_safe(&s.to_string_lossy()));
                let name = if used.insert(stem.clone()) {
                    stem
                } else {
                    format!("{stem}-{i}")
                };
                write_file(&dir.join(format!("{name}.error.json")), &app_error_json(e))?;
            }
            match args.format {
                OutputFormat::Json => {}
                OutputFormat::Csv => {
                    write_file(&dir.join("apps.csv"), &render_apps(&reports, args.format))?
                }
                OutputFormat::Markdown => {
                    write_file(&dir.join("apps.md"), &render_apps(&reports, args.format))?
                }
            }
        }
        None => {
            let mut stdout = io::stdout().lock();
            let result = stdout
                .write_all(&render_apps(&reports, args.format))
                .and_then(|_| {
                    if args.format == OutputFormat::Json {
                        for (_, e) in &errors {
                            serde_json::to_writer(&mut stdout, e)?;
                            stdout.write_all(b"\n")?;
                        }
                    }
                    stdout.flush()
                });
            if let Err(e) = result {
                return Err(usage(format!("stdout: {e}")));
            }
        }
    }
    Ok(if failures > 0 { EXIT_PARTIAL } else { 0 })
}

fn cmd_report(args: ReportArgs) -> Result<u8, Failure> {
    let labeling = match &args.labels {
        None => {
            warn!("no labeling file; all apps grouped as unlabeled");
            CohortLabeling::default()
        }
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("MissingLabeling: {}: {e}", path.display())))?;
            CohortLabeling::parse_csv(&text)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
    };
    let dir = &args.report_dir;
    let entries = fs::read_dir(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension() == Some(OsStr::new("json")))
        .collect();
    files.sort();

    let mut reports = Vec::new();
    let mut bad = 0;
    let mut failed_inputs = 0;
    for path in files {
        if path.to_string_lossy().ends_with(".error.json") {
            failed_inputs += 1;
            continue;
        }
        let parsed = fs::read(&path)
            .map_err(|e| e.to_string())
            .and_then(|b| serde_json::from_slice::<AppReport>(&b).map_err(|e| e.to_string()));
        match parsed {
            Ok(r) => reports.push(r),
            Err(e) => {
                warn!("{}: {e}", path.display());
                bad += 1;
            }
        }
    }
    if failed_inputs > 0 {
        warn!("{failed_inputs} input(s) failed analysis and are not counted");
    }
    let (report, warnings) = aggregate_reports(&reports, &labeling).map_err(|e| Failure {
        code: EXIT_PARTIAL,
        message: e.to_string(),
    })?;
    for w in warnings {
        warn!("{w}");
    }
    let mut stdout = io::stdout().lock();
    stdout
        .write_all(&render(&report, args.format))
        .and_then(|_| stdout.flush())
        .map_err(|e| usage(format!("stdout: {e}")))?;
    Ok(if bad > 0 { EXIT_PARTIAL } else { 0 })
}

fn cmd_fingerprints_list(arg: DbArg) -> Result<u8, Failure> {
    let db = load_db(&arg)?;
    let mut out = format!("# version: {}\n", db.version_label());
    for s in &db.signatures {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            s.vendor, s.category, s.match_kind, s.pattern
        ));
    }
    io::stdout()
        .write_all(out.as_bytes())
        .map_err(|e| usage(format!("stdout: {e}")))?;
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Report(args) => cmd_report(args),
        Command::Fingerprints {
            command: FingerprintsCommand::List(arg),
        } => cmd_fingerprints_list(arg),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
