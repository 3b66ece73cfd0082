//! `schedsim`: run scheduling experiments and write CSV results.
//!
//! Exit status is 0 when every result converged to the CI target, 3 when
//! some point hit `--reps-max` first, 1 on error and 2 on usage errors.

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

use schedsim::experiment::{
    run_plan_with, sweep_with, write_records, write_summary, ExperimentPlan, RepOutcome,
    SweepAxis, TraceSource, WorkloadSource,
};
use schedsim::workload::{SwimColumns, TraceFormat, TraceOptions};
use schedsim::{PolicyKind, SizeDist, WorkloadSpec};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SizeDistArg {
    Weibull,
    Pareto,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TraceFormatArg {
    #[value(name = "two_column")]
    TwoColumn,
    #[value(name = "swim_tsv")]
    SwimTsv,
}

#[derive(Debug, Parser)]
#[command(name = "schedsim", version, about = "Single-server scheduling experiments under job-size estimation errors")]
struct Args {
    /// Policy to run (repeatable): fifo, ps, las, srpt, srpte, fspe, fspe+ps. Default: all.
    #[arg(long = "policy", value_parser = parse_policy)]
    policies: Vec<PolicyKind>,

    /// Weibull shape of the job size distribution.
    #[arg(long, default_value_t = 0.25)]
    shape: f64,

    /// Sigma of the log-normal estimation error.
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,

    /// Weibull shape of the inter-arrival distribution.
    #[arg(long, default_value_t = 1.0)]
    timeshape: f64,

    #[arg(long, default_value_t = 0.9)]
    load: f64,

    #[arg(long, default_value_t = 10_000)]
    njobs: usize,

    #[arg(long, value_enum, default_value_t = SizeDistArg::Weibull)]
    size_dist: SizeDistArg,

    /// Pareto (Lomax) tail index, used with --size-dist pareto.
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,

    /// Base seed; repetition r uses seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 30)]
    reps_min: usize,

    #[arg(long, default_value_t = 5000)]
    reps_max: usize,

    /// Stop once every CI half-width is below this fraction of its mean.
    #[arg(long, default_value_t = 0.05)]
    ci_target: f64,

    /// Parameter to sweep: sigma, shape, timeshape, load, njobs, alpha.
    #[arg(long, requires = "values", value_parser = parse_axis)]
    sweep: Option<SweepAxis>,

    /// Comma-separated sweep values.
    #[arg(long, requires = "sweep", value_delimiter = ',')]
    values: Vec<f64>,

    /// Replay a trace instead of generating jobs.
    #[arg(long)]
    trace: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = TraceFormatArg::TwoColumn)]
    trace_format: TraceFormatArg,

    /// SWIM column indices: timestamp,input,shuffle,output (0-based).
    #[arg(long, value_delimiter = ',', num_args = 4)]
    swim_columns: Option<Vec<usize>>,

    /// Drop zero-size trace jobs instead of failing.
    #[arg(long)]
    skip_empty_jobs: bool,

    /// Offered load the trace is scaled to.
    #[arg(long, default_value_t = 0.9)]
    target_load: f64,

    /// Output directory; the summary goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write per-job records for every (policy, repetition).
    #[arg(long, requires = "out")]
    per_job: bool,
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse()
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse()
}

impl Args {
    fn plan(&self) -> Result<ExperimentPlan> {
        let source = match &self.trace {
            Some(path) => {
                let format = match self.trace_format {
                    TraceFormatArg::TwoColumn => TraceFormat::TwoColumn,
                    TraceFormatArg::SwimTsv => TraceFormat::SwimTsv(match &self.swim_columns {
                        Some(c) => SwimColumns {
                            timestamp: c[0],
                            input: c[1],
                            shuffle: c[2],
                            output: c[3],
                        },
                        None => SwimColumns::default(),
                    }),
                };
                WorkloadSource::Trace(TraceSource {
                    path: path.clone(),
                    format,
                    options: TraceOptions {
                        skip_empty_jobs: self.skip_empty_jobs,
                    },
                    target_load: self.target_load,
                    sigma: self.sigma,
                })
            }
            None => WorkloadSource::Synthetic(WorkloadSpec {
                njobs: self.njobs,
                size_dist: match self.size_dist {
                    SizeDistArg::Weibull => SizeDist::Weibull { shape: self.shape },
                    SizeDistArg::Pareto => SizeDist::Pareto { alpha: self.alpha },
                },
                timeshape: self.timeshape,
                load: self.load,
                sigma: self.sigma,
                seed: self.seed,
            }),
        };
        let policies = if self.policies.is_empty() {
            PolicyKind::ALL.to_vec()
        } else {
            self.policies.clone()
        };
        let plan = ExperimentPlan {
            source,
            policies,
            reps_min: self.reps_min,
            reps_max: self.reps_max,
            ci_target: self.ci_target,
            base_seed: self.seed,
        };
        plan.validate()?;
        Ok(plan)
    }
}

fn dump_reps(dir: &Path, rep: &RepOutcome) -> schedsim::experiment::Result<()> {
    fs::create_dir_all(dir)?;
    for (policy, records) in &rep.runs {
        let file = File::create(dir.join(format!("{policy}_rep{}.csv", rep.rep)))?;
        write_records(records, BufWriter::new(file))?;
    }
    Ok(())
}

fn run(args: &Args) -> Result<bool> {
    let plan = args.plan()?;
    if let Some(out) = &args.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    }
    let jobs_dir = args.out.as_ref().filter(|_| args.per_job).map(|o| o.join("jobs"));

    let (rows, converged) = match args.sweep {
        Some(axis) => {
            if args.values.is_empty() {
                bail!("--sweep needs at least one value");
            }
            let points = sweep_with(&plan, axis, &args.values, |i, rep| match &jobs_dir {
                Some(dir) => dump_reps(&dir.join(format!("{axis}={}", args.values[i])), rep),
                None => Ok(()),
            })?;
            let converged = points.iter().all(|p| p.result.converged);
            let rows = points.into_iter().flat_map(|p| p.result.rows).collect::<Vec<_>>();
            (rows, converged)
        }
        None => {
            let result = run_plan_with(&plan, |rep| match &jobs_dir {
                Some(dir) => dump_reps(dir, rep),
                None => Ok(()),
            })?;
            (result.rows, result.converged)
        }
    };

    match &args.out {
        Some(out) => {
            let path = out.join("summary.csv");
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_summary(&rows, BufWriter::new(file))?;
        }
        None => write_summary(&rows, io::stdout().lock())?,
    }
    Ok(converged)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: reps-max reached before the CI target for at least one result");
            ExitCode::from(3)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
