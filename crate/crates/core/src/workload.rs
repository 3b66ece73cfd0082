//! Job streams: synthetic generation and trace replay.
//!
//! Synthetic workloads use a unit-rate server: sizes have mean 1 and
//! inter-arrival gaps have mean `1 / load`. Every random draw comes from a
//! ChaCha8 generator seeded with `seed`; sizes, arrivals and estimation
//! errors each use their own stream (0, 1 and 2), so changing `sigma` leaves
//! sizes and arrivals untouched. Uniform variates are mapped to `(0, 1]`
//! and fed through closed-form inverse CDFs; normal variates come from
//! `rand_distr::StandardNormal` (ziggurat).

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scalar::Scalar;

/// Random generator used for every workload draw.
pub type SimRng = ChaCha8Rng;

const SIZE_STREAM: u64 = 0;
const ARRIVAL_STREAM: u64 = 1;
const ERROR_STREAM: u64 = 2;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("failed to read trace {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: job size {size} is not positive")]
    NonPositiveSize { line: usize, size: f64 },
    #[error("trace contains no jobs")]
    NoJobs,
    #[error("load scaling needs at least 2 jobs, got {0}")]
    TooFewJobs(usize),
    #[error("submission schedule has zero span; load is undefined")]
    ZeroSpan,
}

type Result<T, E = WorkloadError> = std::result::Result<T, E>;

/// Job identifier: the 0-based position of the job in arrival order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId(pub usize);

impl JobId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One job: when it arrives, how much work it really needs, and how much
/// work the scheduler is told it needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JobSpec<T> {
    pub id: JobId,
    pub arrival: T,
    pub size: T,
    pub estimate: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SizeDist {
    Weibull { shape: f64 },
    /// Pareto type II (Lomax) with support starting at 0.
    Pareto { alpha: f64 },
}

impl fmt::Display for SizeDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizeDist::Weibull { .. } => f.write_str("weibull"),
            SizeDist::Pareto { .. } => f.write_str("pareto"),
        }
    }
}

/// Parameters of a synthetic workload.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkloadSpec {
    pub njobs: usize,
    pub size_dist: SizeDist,
    /// Weibull shape of the inter-arrival distribution.
    pub timeshape: f64,
    pub load: f64,
    /// Standard deviation of the log-normal estimation error.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            njobs: 10_000,
            size_dist: SizeDist::Weibull { shape: 0.25 },
            timeshape: 1.0,
            load: 0.9,
            sigma: 0.5,
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        match self.size_dist {
            SizeDist::Weibull { shape } => positive("shape", shape)?,
            SizeDist::Pareto { alpha } => positive("alpha", alpha)?,
        }
        positive("timeshape", self.timeshape)?;
        check_load(self.load)?;
        check_sigma(self.sigma)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Synthetic(WorkloadSpec),
    Trace {
        path: PathBuf,
        target_load: Option<f64>,
    },
}

/// A job stream, sorted by arrival with consecutive ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Workload<T> {
    pub jobs: Vec<JobSpec<T>>,
    pub provenance: Provenance,
}

impl<T: Scalar> Workload<T> {
    /// Builds a workload from `(arrival, size, estimate)` triples, sorting
    /// them by arrival (stable) and numbering them in that order.
    pub fn from_triples(
        triples: impl IntoIterator<Item = (T, T, T)>,
        provenance: Provenance,
    ) -> Self {
        let mut triples: Vec<_> = triples.into_iter().collect();
        triples.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("NaN arrival"));
        let jobs = triples
            .into_iter()
            .enumerate()
            .map(|(i, (arrival, size, estimate))| JobSpec {
                id: JobId(i),
                arrival,
                size,
                estimate,
            })
            .collect();
        Workload { jobs, provenance }
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn total_size(&self) -> T {
        self.jobs.iter().map(|j| j.size).sum()
    }

    /// Converts every time and size to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Workload<U> {
        Workload {
            jobs: self
                .jobs
                .iter()
                .map(|j| JobSpec {
                    id: j.id,
                    arrival: U::of(j.arrival.as_f64()),
                    size: U::of(j.size.as_f64()),
                    estimate: U::of(j.estimate.as_f64()),
                })
                .collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Rescales sizes and estimates so that a unit-rate server sees offered
    /// load `target_load`, where load is the total size divided by the span
    /// between the first and last arrival.
    pub fn scale_to_load(&self, target_load: f64) -> Result<Self> {
        check_load(target_load)?;
        if self.jobs.len() < 2 {
            return Err(WorkloadError::TooFewJobs(self.jobs.len()));
        }
        let span = self.jobs[self.jobs.len() - 1].arrival - self.jobs[0].arrival;
        if span <= T::zero() {
            return Err(WorkloadError::ZeroSpan);
        }
        let rate = self.total_size() / (T::of(target_load) * span);
        let provenance = match &self.provenance {
            Provenance::Trace { path, .. } => Provenance::Trace {
                path: path.clone(),
                target_load: Some(target_load),
            },
            other => other.clone(),
        };
        // Already at the target: leave sizes bit-identical.
        if (rate - T::one()).abs() <= T::of(4.0) * T::epsilon() {
            return Ok(Workload {
                jobs: self.jobs.clone(),
                provenance,
            });
        }
        let jobs = self
            .jobs
            .iter()
            .map(|j| JobSpec {
                size: j.size / rate,
                estimate: j.estimate / rate,
                ..*j
            })
            .collect();
        Ok(Workload { jobs, provenance })
    }
}

impl Workload<f64> {
    /// Replaces every estimate with `size * X`, `X ~ LogNormal(0, sigma^2)`,
    /// drawn from the error stream of `seed`.
    pub fn with_error(&self, sigma: f64, seed: u64) -> Result<Self> {
        let sizes: Vec<f64> = self.jobs.iter().map(|j| j.size).collect();
        let estimates = apply_error(&sizes, sigma, &mut stream(seed, ERROR_STREAM))?;
        let jobs = self
            .jobs
            .iter()
            .zip(estimates)
            .map(|(j, estimate)| JobSpec { estimate, ..*j })
            .collect();
        Ok(Workload {
            jobs,
            provenance: self.provenance.clone(),
        })
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(WorkloadError::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

fn check_load(load: f64) -> Result<()> {
    if load > 0.0 && load <= 1.0 {
        Ok(())
    } else {
        Err(WorkloadError::InvalidParameter {
            name: "load",
            value: load,
            reason: "must lie in (0, 1]",
        })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(WorkloadError::InvalidParameter {
            name: "sigma",
            value: sigma,
            reason: "must be non-negative and finite",
        })
    }
}

fn stream(seed: u64, id: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Uniform variate on `(0, 1]`, safe to take the logarithm of.
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Scale `λ` of a Weibull with the given shape `k` and mean 1:
/// `λ = 1 / Γ(1 + 1/k)`.
pub fn weibull_scale_for_unit_mean(shape: f64) -> Result<f64> {
    positive("shape", shape)?;
    Ok(1.0 / libm::tgamma(1.0 + 1.0 / shape))
}

fn weibull_variate<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    scale * (-open_unit(rng).ln()).powf(1.0 / shape)
}

/// Draws `njobs` job sizes. Weibull sizes have mean 1; Lomax sizes have
/// mean 1 when `alpha > 1` and unit scale otherwise.
pub fn sample_sizes<R: Rng + ?Sized>(spec: &WorkloadSpec, rng: &mut R) -> Result<Vec<f64>> {
    spec.validate()?;
    let sizes = match spec.size_dist {
        SizeDist::Weibull { shape } => {
            let scale = weibull_scale_for_unit_mean(shape)?;
            (0..spec.njobs)
                .map(|_| weibull_variate(rng, shape, scale))
                .collect()
        }
        SizeDist::Pareto { alpha } => {
            let scale = if alpha > 1.0 { alpha - 1.0 } else { 1.0 };
            (0..spec.njobs)
                .map(|_| scale * (open_unit(rng).powf(-1.0 / alpha) - 1.0))
                .collect::<Vec<_>>()
        }
    };
    Ok(sizes)
}

/// Draws `njobs` arrival times whose Weibull gaps have mean `1 / load`.
/// The first arrival is the first gap.
pub fn sample_arrivals<R: Rng + ?Sized>(
    timeshape: f64,
    load: f64,
    njobs: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_load(load)?;
    let scale = (1.0 / load) * weibull_scale_for_unit_mean(timeshape)?;
    let mut now = 0.0;
    Ok((0..njobs)
        .map(|_| {
            now += weibull_variate(rng, timeshape, scale);
            now
        })
        .collect())
}

/// Multiplies every size by an independent `LogNormal(0, sigma^2)` factor.
pub fn apply_error<R: Rng + ?Sized>(sizes: &[f64], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(sizes.to_vec());
    }
    Ok(sizes
        .iter()
        .map(|&s| {
            let z: f64 = rng.sample(StandardNormal);
            s * (sigma * z).exp()
        })
        .collect())
}

/// Generates the synthetic workload described by `spec`. The result is a
/// pure function of `spec`.
pub fn generate(spec: &WorkloadSpec) -> Result<Workload<f64>> {
    spec.validate()?;
    let sizes = sample_sizes(spec, &mut stream(spec.seed, SIZE_STREAM))?;
    let arrivals = sample_arrivals(
        spec.timeshape,
        spec.load,
        spec.njobs,
        &mut stream(spec.seed, ARRIVAL_STREAM),
    )?;
    let estimates = apply_error(&sizes, spec.sigma, &mut stream(spec.seed, ERROR_STREAM))?;
    let jobs = arrivals
        .into_iter()
        .zip(sizes)
        .zip(estimates)
        .enumerate()
        .map(|(i, ((arrival, size), estimate))| JobSpec {
            id: JobId(i),
            arrival,
            size,
            estimate,
        })
        .collect();
    Ok(Workload {
        jobs,
        provenance: Provenance::Synthetic(*spec),
    })
}

/// Zero-based column indices of a SWIM-style TSV trace.
///
/// Defaults follow the SWIM FB-2010 samples: `job_id, submit_time,
/// inter_arrival_gap, map_input_bytes, shuffle_bytes, reduce_output_bytes`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SwimColumns {
    pub timestamp: usize,
    pub input: usize,
    pub shuffle: usize,
    pub output: usize,
}

impl Default for SwimColumns {
    fn default() -> Self {
        SwimColumns {
            timestamp: 1,
            input: 3,
            shuffle: 4,
            output: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceFormat {
    /// `arrival size` per line; space, tab or comma separated.
    TwoColumn,
    /// Tab-separated; size is input + shuffle + output bytes.
    SwimTsv(SwimColumns),
}

impl FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "two_column" => Ok(TraceFormat::TwoColumn),
            "swim_tsv" => Ok(TraceFormat::SwimTsv(SwimColumns::default())),
            other => Err(format!(
                "unknown trace format '{other}' (expected two_column or swim_tsv)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TraceOptions {
    /// Drop jobs whose size is zero instead of failing.
    pub skip_empty_jobs: bool,
}

/// Reads a trace file. Sizes stay in raw trace units and estimates equal
/// sizes; see [`Workload::scale_to_load`] and [`Workload::with_error`].
pub fn ingest_trace(path: &Path, format: TraceFormat) -> Result<Workload<f64>> {
    ingest_trace_with(path, format, TraceOptions::default())
}

pub fn ingest_trace_with(
    path: &Path,
    format: TraceFormat,
    options: TraceOptions,
) -> Result<Workload<f64>> {
    let file = fs::File::open(path).map_err(|source| WorkloadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trace(file, format, options, path)
}

/// Parses trace contents from any reader; `path` is only recorded as
/// provenance.
pub fn parse_trace<R: Read>(
    reader: R,
    format: TraceFormat,
    options: TraceOptions,
    path: &Path,
) -> Result<Workload<f64>> {
    let mut triples = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| WorkloadError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (arrival, size) = match format {
            TraceFormat::TwoColumn => parse_two_column(trimmed, lineno)?,
            TraceFormat::SwimTsv(cols) => parse_swim(&line, cols, lineno)?,
        };
        if size <= 0.0 || size.is_nan() {
            if options.skip_empty_jobs && size == 0.0 {
                continue;
            }
            return Err(WorkloadError::NonPositiveSize { line: lineno, size });
        }
        triples.push((arrival, size, size));
    }
    if triples.is_empty() {
        return Err(WorkloadError::NoJobs);
    }
    Ok(Workload::from_triples(
        triples,
        Provenance::Trace {
            path: path.to_path_buf(),
            target_load: None,
        },
    ))
}

fn parse_number(field: &str, what: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| WorkloadError::Parse {
            line,
            message: format!("cannot parse {what} from '{field}'"),
        })
}

fn parse_two_column(line: &str, lineno: usize) -> Result<(f64, f64)> {
    let fields: Vec<&str> = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .collect();
    if fields.len() != 2 {
        return Err(WorkloadError::Parse {
            line: lineno,
            message: format!("expected 2 fields, found {}", fields.len()),
        });
    }
    Ok((
        parse_number(fields[0], "arrival", lineno)?,
        parse_number(fields[1], "size", lineno)?,
    ))
}

fn parse_swim(line: &str, cols: SwimColumns, lineno: usize) -> Result<(f64, f64)> {
    let fields: Vec<&str> = line.split('\t').collect();
    let field = |idx: usize, what: &str| -> Result<f64> {
        let raw = fields.get(idx).ok_or_else(|| WorkloadError::Parse {
            line: lineno,
            message: format!("missing {what} column {idx}"),
        })?;
        parse_number(raw, what, lineno)
    };
    let arrival = field(cols.timestamp, "timestamp")?;
    let size = field(cols.input, "input bytes")?
        + field(cols.shuffle, "shuffle bytes")?
        + field(cols.output, "output bytes")?;
    Ok((arrival, size))
}
