//! `tash`: seeded experiment runs and LLRP document generation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tash_core::experiments::{CorpusKind, ExperimentConfig, ExperimentKind, run_experiment};
use tash_core::llrp::{
    ReaderProfile, encode_provisioning, encode_table_build, lint, render_aospec, render_rospec,
};
use tash_core::tash::{TashChainSpec, TashOp};
use tash_core::{Error, apps::KnownEpcs};

const BUILD_ID: &str = env!("TASH_CLI_BUILD_ID");

#[derive(Parser)]
#[command(name = "tash", version = BUILD_ID, about = "Analog on-tag hashing experiments and LLRP encoding")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chi-square uniformity of digest slices over a grouped corpus.
    Randomness(RunArgs),
    /// Per-entry spread of tables built under many seeds.
    Balance(RunArgs),
    /// Air time of full tables against the table dimension.
    GatherTime(RunArgs),
    /// Two-seed OR: separate tables, one-stop chain, one-stop with truncation.
    Operator(RunArgs),
    /// Cardinality estimation error over fresh populations.
    Estimate(RunArgs),
    /// Missing-tag detection recall and false-positive rate.
    Missing(RunArgs),
    /// Write ROSpec and AOSpec XML for one table build.
    Encode(EncodeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Population sizes.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Table dimensions.
    #[arg(long, value_delimiter = ',')]
    l: Vec<u32>,
    /// Seed offsets into the digest.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Timing-model file (`key = value` lines).
    #[arg(long)]
    timing: Option<PathBuf>,
    /// CSV output path; the JSON report goes next to it. Stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full EPC replies instead of one-bit truncated ones.
    #[arg(long)]
    no_truncate: bool,
    /// Digest bits the seeds may range over.
    #[arg(long)]
    window: Option<usize>,
    /// Missing-tag counts.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    /// Seeds per detection table.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Target false-positive rate used to size the detection table.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    corpus: Option<Corpus>,
    /// File of hex EPCs, one per line, used instead of a synthetic corpus.
    #[arg(long)]
    corpus_file: Option<PathBuf>,
    #[arg(long)]
    corpus_size: Option<usize>,
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long)]
    significance: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Corpus {
    Sgtin,
    Uniform,
    Constant,
}

#[derive(Clone, Copy, ValueEnum)]
enum Op {
    And,
    Or,
    Xor,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    l: u32,
    /// Seed offsets; the first starts the chain, the rest join with `--op`.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<usize>,
    #[arg(long, value_enum, default_value = "or")]
    op: Op,
    #[arg(long, default_value = "gen2")]
    reader_profile: String,
    /// Extra reader-profile TOML to search before the bundled ones.
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Leave out the one-bit truncate filter.
    #[arg(long)]
    no_truncate: bool,
    /// Hex EPCs to provision; the AOSpec is empty without them.
    #[arg(long)]
    epcs: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn apply_overrides(kind: ExperimentKind, a: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut c = match &a.config {
        Some(path) => {
            let c = ExperimentConfig::load(path)?;
            if c.experiment != kind {
                return Err(Error::Config(format!(
                    "{} configures {}, not {kind}",
                    path.display(),
                    c.experiment
                )));
            }
            c
        }
        None => ExperimentConfig::new(kind),
    };
    let set_list = |dst: &mut Vec<usize>, src: &[usize]| {
        if !src.is_empty() {
            *dst = src.to_vec();
        }
    };
    set_list(&mut c.n, &a.n);
    set_list(&mut c.seeds, &a.seeds);
    set_list(&mut c.m, &a.m);
    set_list(&mut c.k, &a.k);
    if !a.l.is_empty() {
        c.l = a.l.clone();
    }
    if a.trials.is_some() {
        c.trials = a.trials;
    }
    if let Some(s) = a.master_seed {
        c.master_seed = s;
    }
    if a.timing.is_some() {
        c.timing = a.timing.clone();
    }
    if a.out.is_some() {
        c.output = a.out.clone();
    }
    if a.no_truncate {
        c.truncate = Some(false);
    }
    macro_rules! take {
        ($($f:ident),*) => {$( if a.$f.is_some() { c.$f = a.$f.clone(); } )*};
    }
    take!(window, gamma, alpha, beta, corpus_file, corpus_size, groups, significance);
    if let Some(k) = a.corpus {
        c.corpus = Some(match k {
            Corpus::Sgtin => CorpusKind::Sgtin,
            Corpus::Uniform => CorpusKind::Uniform,
            Corpus::Constant => CorpusKind::Constant,
        });
    }
    Ok(c)
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<(), Error> {
    let config = apply_overrides(kind, args)?;
    let mut report = run_experiment(&config)?;
    report.build_id = BUILD_ID.to_string();
    let csv = report.to_csv()?;
    let json = report.to_json()?;
    match &report.config.output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, csv)?;
            let json_path = path.with_extension("json");
            fs::write(&json_path, json)?;
            eprintln!("wrote {} and {}", path.display(), json_path.display());
        }
        None => print!("{csv}"),
    }
    for (key, value) in &report.summary {
        eprintln!("{key} = {value:.6}");
    }
    Ok(())
}

fn profile(args: &EncodeArgs) -> Result<ReaderProfile, Error> {
    if let Some(path) = &args.profiles {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(p) = ReaderProfile::parse_table(&text)?.remove(&args.reader_profile) {
            return Ok(p);
        }
    }
    ReaderProfile::named(&args.reader_profile)
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<(), Error> {
    let path = dir.join(name);
    fs::write(&path, body)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn encode(args: &EncodeArgs) -> Result<(), Error> {
    let profile = profile(args)?;
    let op = match args.op {
        Op::And => TashOp::And,
        Op::Or => TashOp::Or,
        Op::Xor => TashOp::Xor,
    };
    let (first, rest) = args.seeds.split_first().expect("clap requires seeds");
    let chain = rest.iter().fold(TashChainSpec::single(*first), |c, &s| c.then(op, s));
    let docs = encode_table_build(args.l, &chain, &profile, !args.no_truncate)?;
    for warning in lint(&docs, &profile) {
        eprintln!("warning: {warning}");
    }
    let known = match &args.epcs {
        Some(path) => KnownEpcs::load(path)?,
        None => {
            eprintln!("warning: no --epcs given; aospec.xml has no write jobs");
            KnownEpcs::default()
        }
    };
    let rendered = docs.iter().map(render_rospec).collect::<Result<Vec<_>, _>>()?;
    let aospec = render_aospec(&encode_provisioning(known.epcs()))?;
    fs::create_dir_all(&args.out)?;
    for (doc, xml) in docs.iter().zip(&rendered) {
        write_file(&args.out, &format!("rospec_{:03}.xml", doc.rospec_id), xml)?;
    }
    write_file(&args.out, "aospec.xml", &aospec)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Infeasible(_) | Error::DeviceLimit(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Randomness(a) => run(ExperimentKind::Randomness, a),
        Command::Balance(a) => run(ExperimentKind::Balance, a),
        Command::GatherTime(a) => run(ExperimentKind::GatherTime, a),
        Command::Operator(a) => run(ExperimentKind::OperatorOr, a),
        Command::Estimate(a) => run(ExperimentKind::Estimate, a),
        Command::Missing(a) => run(ExperimentKind::Missing, a),
        Command::Encode(a) => encode(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
