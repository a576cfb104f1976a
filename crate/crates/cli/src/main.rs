mod config;

use std::io::Write as _;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use rrt_core::experiments::{self, check, ExperimentKind, ExperimentOutput, ExperimentPlan};
use rrt_core::metrics::Series;
use rrt_core::space::{uniform_sample, Point, RngStream};
use rrt_core::tree::io::{read_tree, write_tree, TreeHeader};
use rrt_core::tree::Tree;

use config::{required, CheckArgs, Cli, Command, CouponArgs, ExperimentArgs, FileConfig, Format, GrowArgs, GrowKind};

/// Censored-trial fraction above which a run exits non-zero.
const CENSOR_LIMIT: f64 = 0.01;
const DEFAULT_COUPLED: u64 = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Failed(_) => 1,
        }
    }

    /// Parameter problems reported by the core library are usage errors.
    fn usage(e: rrt_core::Error) -> Self {
        match e {
            rrt_core::Error::InvalidDimension(_) => CliError::Usage(format!("invalid value for `d`: {e}")),
            rrt_core::Error::GridTooLarge { .. } => CliError::Usage(format!("memory guard: {e}")),
            other => CliError::Usage(other.to_string()),
        }
    }

    fn runtime(e: rrt_core::Error) -> Self {
        match e {
            rrt_core::Error::Io { path, reason } => CliError::Io { path, reason },
            other => CliError::Failed(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Grow(args) => grow(args),
        Command::HitTime(args) => experiment(ExperimentKind::HitTime, args),
        Command::CoverTime(args) => experiment(ExperimentKind::CoverTime, args),
        Command::PostCover(args) => experiment(ExperimentKind::PostCover, args),
        Command::NntStats(args) => experiment(ExperimentKind::NntStats, args),
        Command::Coupon(args) => coupon(args),
        Command::Check(args) => run_check(args),
    }
}

/// Writes `contents` to a temporary sibling of `path`, then renames it into
/// place so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("output path {} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(contents.as_bytes())?;
            f.sync_all()
        })
        .and_then(|()| std::fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(io_err(e));
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn jobs(flag: Option<usize>, file: Option<usize>) -> Result<usize, CliError> {
    let jobs = flag.or(file).unwrap_or(1);
    if jobs == 0 {
        return Err(CliError::Usage("invalid value for `jobs`: must be at least 1".into()));
    }
    Ok(jobs)
}

/// Emits the aggregate table and optional raw table, prints the summary, and
/// fails if too many trials were censored.
fn emit(
    output: &ExperimentOutput,
    name: &str,
    out: Option<&Path>,
    raw: Option<&Path>,
    format: Format,
) -> Result<(), CliError> {
    let table = match format {
        Format::Csv => output.aggregate_csv(),
        Format::Json => output.aggregate_json() + "\n",
    };
    if let Some(path) = raw {
        write_atomic(path, &output.raw_csv())?;
    }
    let summary = format!(
        "{name}: {} rows, {} trials, {} censored",
        output.rows.len(),
        output.total_trials,
        output.censored_trials
    );
    match out {
        Some(path) => {
            write_atomic(path, &table)?;
            println!("{summary}, wrote {}", path.display());
        }
        None => {
            print!("{table}");
            eprintln!("{summary}");
        }
    }
    if output.censored_fraction() > CENSOR_LIMIT {
        return Err(CliError::Failed(format!(
            "{:.2}% of trials hit the step cap (limit {}%); raise --max-steps",
            100.0 * output.censored_fraction(),
            100.0 * CENSOR_LIMIT
        )));
    }
    Ok(())
}

fn experiment(kind: ExperimentKind, args: ExperimentArgs) -> Result<(), CliError> {
    let file = FileConfig::for_common(&args.common)?;
    let d = required(args.d, file.d, "d")?;
    let epsilons = required(args.epsilons, file.epsilons, "epsilons")?;
    let trials = required(args.trials, file.trials, "trials")?;
    let seed = required(args.common.seed, file.seed, "seed")?;
    let mut plan = ExperimentPlan::new(kind, d, epsilons, trials, seed);
    if matches!(kind, ExperimentKind::PostCover | ExperimentKind::NntStats) {
        plan.max_steps = 100_000;
    }
    if let Some(m) = args.max_steps.or(file.max_steps) {
        plan.max_steps = m;
    }
    if let Some(t) = args.threshold.or(file.threshold) {
        plan.stop_threshold = t;
    }
    if let Some(p) = args.probes.or(file.probes) {
        plan.probes = p;
    }
    let out = args.out.or(file.out);
    plan.out_path = out.as_ref().map(|p| p.display().to_string());
    plan.validate().map_err(CliError::usage)?;
    let jobs = jobs(args.common.jobs, file.jobs)?;
    let output = experiments::run(&plan, jobs).map_err(CliError::runtime)?;
    let format = args.format.or(file.format).unwrap_or(Format::Csv);
    emit(&output, kind.as_str(), out.as_deref(), args.raw.or(file.raw).as_deref(), format)
}

fn coupon(args: CouponArgs) -> Result<(), CliError> {
    let file = FileConfig::for_common(&args.common)?;
    let n = required(args.n, file.n, "n")?;
    let trials = required(args.trials, file.trials, "trials")?;
    let seed = required(args.common.seed, file.seed, "seed")?;
    let mut plan = ExperimentPlan::new(ExperimentKind::Coupon, 1, Vec::new(), trials, seed);
    plan.coupons = n;
    plan.validate().map_err(CliError::usage)?;
    let jobs = jobs(args.common.jobs, file.jobs)?;
    let output = experiments::run(&plan, jobs).map_err(CliError::runtime)?;
    let format = args.format.or(file.format).unwrap_or(Format::Csv);
    let out = args.out.or(file.out);
    emit(&output, "coupon", out.as_deref(), args.raw.or(file.raw).as_deref(), format)
}

fn grow_stream(seed: u64, tree: &Tree) -> RngStream {
    let label = format!(
        "grow|{}|d={}|eps={:016x}",
        tree.kind().as_str(),
        tree.dim(),
        tree.epsilon().unwrap_or(0.0).to_bits()
    );
    RngStream::new(seed, experiments::stream_index(&label, tree.len() as u64))
}

fn grow(args: GrowArgs) -> Result<(), CliError> {
    let file = FileConfig::for_common(&args.common)?;
    let load = args.load.or(file.load);
    let out = args.out.or(file.out);
    let kind_flag = args.kind.or(file.kind);
    let d_flag = args.d.or(file.d);
    let eps_flag = args.epsilon.or(file.epsilon);

    let (mut tree, loaded_header) = match &load {
        Some(path) => {
            if out.is_some() {
                return Err(CliError::Usage("`out` cannot be combined with `load`".into()));
            }
            let (tree, header) = read_tree(&read_file(path)?).map_err(|e| CliError::Io {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
            if d_flag.is_some_and(|d| d != tree.dim()) {
                return Err(CliError::Usage(format!("`d` differs from the loaded tree (d={})", tree.dim())));
            }
            (tree, Some(header))
        }
        None => {
            let kind = required(kind_flag, None, "kind")?;
            let d = required(d_flag, None, "d")?;
            rrt_core::space::check_dim(d).map_err(CliError::usage)?;
            let tree = match kind {
                GrowKind::Rrt => {
                    let eps = required(eps_flag, None, "epsilon")?;
                    Tree::rrt(Point::centre(d).map_err(CliError::usage)?, eps).map_err(CliError::usage)?
                }
                GrowKind::Nnt => {
                    let seed = required(args.common.seed, file.seed, "seed")?;
                    Tree::nnt(uniform_sample(&mut RngStream::new(seed, u64::MAX), d))
                }
            };
            (tree, None)
        }
    };
    let steps = match load {
        Some(_) => args.steps.or(file.steps).unwrap_or(0),
        None => required(args.steps, file.steps, "steps")?,
    };

    let header = if let (0, Some(header)) = (steps, loaded_header) {
        header
    } else {
        let seed = required(args.common.seed, file.seed, "seed")?;
        let mut rng = grow_stream(seed, &tree);
        let header = TreeHeader::for_tree(&tree, seed, rng.stream_index());
        let mut idx = tree.build_index().map_err(CliError::runtime)?;
        let mut series = Series::full();
        for _ in 0..steps {
            let step = tree.step(&mut idx, &mut rng).map_err(CliError::runtime)?;
            if out.is_some() {
                series.record_step(&tree, step.new_vertex).map_err(CliError::runtime)?;
            }
        }
        if let Some(path) = &out {
            write_atomic(path, &series.to_csv())?;
        }
        header
    };
    let dump = args.dump.or(file.dump);
    if let Some(path) = &dump {
        write_atomic(path, &write_tree(&tree, &header))?;
    }
    print!(
        "grow: {} d={} nodes={} height={}",
        tree.kind().as_str(),
        tree.dim(),
        tree.len(),
        tree.height()
    );
    if let Some(path) = dump {
        print!(", wrote {}", path.display());
    }
    println!();
    Ok(())
}

fn run_check(args: CheckArgs) -> Result<(), CliError> {
    let file = FileConfig::for_common(&args.common)?;
    let d = required(args.d, file.d, "d")?;
    let epsilon = required(args.epsilon, file.epsilon, "epsilon")?;
    let steps = required(args.steps, file.steps, "steps")?;
    let seed = required(args.common.seed, file.seed, "seed")?;
    let coupled = args.coupled.or(file.coupled).unwrap_or(DEFAULT_COUPLED);
    rrt_core::space::check_dim(d).map_err(CliError::usage)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(CliError::Usage(format!("invalid value for `epsilon`: {epsilon}")));
    }
    rrt_core::cover::check_grid(d, epsilon).map_err(CliError::usage)?;
    let label = format!("check|d={d}|eps={:016x}", epsilon.to_bits());
    let mut rng = RngStream::new(seed, experiments::stream_index(&label, 0));
    let report = check::run_check(d, epsilon, steps, coupled, &mut rng).map_err(CliError::runtime)?;
    let cover = report
        .cover_step
        .map_or_else(|| "not covered".to_string(), |s| format!("covered at step {s}"));
    let coupling = match (&report.coupling, report.coupled_steps) {
        (_, 0) => "coupling skipped".to_string(),
        (None, n) => format!("coupling ok over {n} nodes"),
        (Some(v), _) => format!("coupling violated: {v:?}"),
    };
    println!(
        "check: {} steps, {} step-size / {} adoption / {} cell violations, {cover}, {coupling}",
        report.steps, report.step_size_violations, report.adoption_violations, report.cell_violations
    );
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Failed("pathwise checks failed".into()))
    }
}
