//! Repeated, paired experiments and parameter sweeps.
//!
//! Repetition `r` of a plan uses seed `base_seed + r`; every policy in the
//! plan runs on that same workload. Repetitions continue until every
//! policy's MST has a 95% confidence half-width within `ci_target` of its
//! mean (and at least `reps_min` have run), or until `reps_max`.
//! Repetitions run in parallel batches, but results are consumed in
//! repetition order, so output does not depend on scheduling.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{run_simulation, CompletionRecord, EngineError};
use crate::metrics::{ci95, mean_sojourn, MetricsError};
use crate::policy::PolicyKind;
use crate::workload::{
    generate, ingest_trace_with, SizeDist, TraceFormat, TraceOptions, Workload, WorkloadError,
    WorkloadSpec,
};

/// Seed distance between consecutive sweep points.
pub const SWEEP_SEED_STRIDE: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("{policy}: {source}")]
    Engine {
        policy: PolicyKind,
        #[source]
        source: EngineError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub struct TraceSource {
    pub path: PathBuf,
    pub format: TraceFormat,
    pub options: TraceOptions,
    pub target_load: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorkloadSource {
    /// The spec's seed is ignored; each repetition sets its own.
    Synthetic(WorkloadSpec),
    Trace(TraceSource),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub source: WorkloadSource,
    pub policies: Vec<PolicyKind>,
    pub reps_min: usize,
    pub reps_max: usize,
    /// Target CI half-width relative to the mean.
    pub ci_target: f64,
    pub base_seed: u64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            source: WorkloadSource::Synthetic(WorkloadSpec::default()),
            policies: PolicyKind::ALL.to_vec(),
            reps_min: 30,
            reps_max: 5000,
            ci_target: 0.05,
            base_seed: 0,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ExperimentError::InvalidPlan(m.to_string()));
        if self.policies.is_empty() {
            return bad("at least one policy is required");
        }
        if self.reps_min < 1 {
            return bad("reps_min must be at least 1");
        }
        if self.reps_max < self.reps_min {
            return bad("reps_max must be at least reps_min");
        }
        if !(self.ci_target > 0.0 && self.ci_target < 1.0) {
            return bad("ci_target must lie in (0, 1)");
        }
        match &self.source {
            WorkloadSource::Synthetic(spec) => spec.validate()?,
            WorkloadSource::Trace(t) => {
                WorkloadSpec {
                    load: t.target_load,
                    sigma: t.sigma,
                    ..WorkloadSpec::default()
                }
                .validate()?;
            }
        }
        Ok(())
    }

    fn params(&self) -> ParamEcho {
        match &self.source {
            WorkloadSource::Synthetic(spec) => {
                let (shape, alpha) = match spec.size_dist {
                    SizeDist::Weibull { shape } => (Some(shape), None),
                    SizeDist::Pareto { alpha } => (None, Some(alpha)),
                };
                ParamEcho {
                    size_dist: spec.size_dist.to_string(),
                    shape,
                    alpha,
                    sigma: spec.sigma,
                    timeshape: Some(spec.timeshape),
                    load: spec.load,
                    njobs: Some(spec.njobs),
                    trace: None,
                }
            }
            WorkloadSource::Trace(t) => ParamEcho {
                size_dist: "trace".into(),
                shape: None,
                alpha: None,
                sigma: t.sigma,
                timeshape: None,
                load: t.target_load,
                njobs: None,
                trace: Some(t.path.display().to_string()),
            },
        }
    }
}

/// Workload parameters echoed into every result row.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamEcho {
    pub size_dist: String,
    pub shape: Option<f64>,
    pub alpha: Option<f64>,
    pub sigma: f64,
    pub timeshape: Option<f64>,
    pub load: f64,
    pub njobs: Option<usize>,
    pub trace: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub params: ParamEcho,
    pub policy: PolicyKind,
    pub mst: f64,
    /// NaN when only one repetition ran.
    pub ci_halfwidth: f64,
    /// MST of this policy over the MST of each plan policy, same reps.
    pub normalized: Vec<(PolicyKind, f64)>,
    pub reps: usize,
    pub converged: bool,
}

/// Completion records of every policy for one repetition.
#[derive(Clone, Debug)]
pub struct RepOutcome {
    pub rep: usize,
    pub seed: u64,
    pub runs: Vec<(PolicyKind, Vec<CompletionRecord<f64>>)>,
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    pub rows: Vec<ResultRow>,
    pub reps: usize,
    pub converged: bool,
    /// Per-repetition MST, one series per plan policy.
    pub mst_samples: Vec<(PolicyKind, Vec<f64>)>,
}

/// Builds the workload for repetition `rep`.
fn rep_workload(plan: &ExperimentPlan, base: Option<&Workload<f64>>, seed: u64) -> Result<Workload<f64>> {
    match &plan.source {
        WorkloadSource::Synthetic(spec) => Ok(generate(&WorkloadSpec { seed, ..*spec })?),
        WorkloadSource::Trace(t) => Ok(base.expect("trace loaded").with_error(t.sigma, seed)?),
    }
}

fn run_rep(plan: &ExperimentPlan, base: Option<&Workload<f64>>, rep: usize) -> Result<RepOutcome> {
    let seed = plan.base_seed.wrapping_add(rep as u64);
    let workload = rep_workload(plan, base, seed)?;
    let runs = plan
        .policies
        .iter()
        .map(|&kind| {
            let mut policy = kind.build::<f64>();
            run_simulation(&workload, &mut policy)
                .map(|records| (kind, records))
                .map_err(|source| ExperimentError::Engine { policy: kind, source })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RepOutcome { rep, seed, runs })
}

fn converged(samples: &[Vec<f64>], plan: &ExperimentPlan) -> bool {
    let n = samples[0].len();
    if n < plan.reps_min.max(2) {
        return false;
    }
    samples.iter().all(|s| {
        ci95(s).is_ok_and(|ci| ci.halfwidth <= plan.ci_target * ci.mean)
    })
}

/// Runs the plan and returns its summary rows.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanResult> {
    run_plan_with(plan, |_| Ok(()))
}

/// Runs the plan, handing every repetition's records to `sink` in
/// repetition order.
pub fn run_plan_with<F>(plan: &ExperimentPlan, mut sink: F) -> Result<PlanResult>
where
    F: FnMut(&RepOutcome) -> Result<()>,
{
    plan.validate()?;
    let base = match &plan.source {
        WorkloadSource::Trace(t) => {
            Some(ingest_trace_with(&t.path, t.format, t.options)?.scale_to_load(t.target_load)?)
        }
        WorkloadSource::Synthetic(_) => None,
    };
    let batch = (2 * rayon::current_num_threads()).max(1);
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); plan.policies.len()];
    let mut done = false;
    let mut next = 0;
    while !done && next < plan.reps_max {
        let end = (next + batch).min(plan.reps_max);
        let outcomes: Vec<Result<RepOutcome>> = (next..end)
            .into_par_iter()
            .map(|rep| run_rep(plan, base.as_ref(), rep))
            .collect();
        for outcome in outcomes {
            let outcome = outcome?;
            for (series, (_, records)) in samples.iter_mut().zip(&outcome.runs) {
                series.push(mean_sojourn(records)?);
            }
            sink(&outcome)?;
            next = outcome.rep + 1;
            if converged(&samples, plan) {
                done = true;
                break;
            }
        }
    }

    let reps = samples[0].len();
    let params = plan.params();
    let means: Vec<f64> = samples.iter().map(|s| s.iter().sum::<f64>() / s.len() as f64).collect();
    let rows = plan
        .policies
        .iter()
        .zip(&samples)
        .zip(&means)
        .map(|((&policy, series), &mst)| ResultRow {
            params: params.clone(),
            policy,
            mst,
            ci_halfwidth: ci95(series).map_or(f64::NAN, |ci| ci.halfwidth),
            normalized: plan
                .policies
                .iter()
                .zip(&means)
                .map(|(&b, &m)| (b, mst / m))
                .collect(),
            reps,
            converged: done,
        })
        .collect();
    Ok(PlanResult {
        rows,
        reps,
        converged: done,
        mst_samples: plan.policies.iter().copied().zip(samples).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Sigma,
    Shape,
    Timeshape,
    Load,
    Njobs,
    Alpha,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Sigma => "sigma",
            SweepAxis::Shape => "shape",
            SweepAxis::Timeshape => "timeshape",
            SweepAxis::Load => "load",
            SweepAxis::Njobs => "njobs",
            SweepAxis::Alpha => "alpha",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        use SweepAxis::*;
        [Sigma, Shape, Timeshape, Load, Njobs, Alpha]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                format!("unknown sweep axis '{s}' (expected sigma, shape, timeshape, load, njobs or alpha)")
            })
    }
}

/// The plan for sweep point `index`, whose `axis` parameter is `value`.
pub fn plan_for_point(
    plan: &ExperimentPlan,
    axis: SweepAxis,
    value: f64,
    index: usize,
) -> Result<ExperimentPlan> {
    let mut out = plan.clone();
    out.base_seed = plan
        .base_seed
        .wrapping_add((index as u64).wrapping_mul(SWEEP_SEED_STRIDE));
    let unsupported = || {
        Err(ExperimentError::InvalidPlan(format!(
            "axis {axis} does not apply to trace workloads"
        )))
    };
    match (&mut out.source, axis) {
        (WorkloadSource::Synthetic(spec), _) => match axis {
            SweepAxis::Sigma => spec.sigma = value,
            SweepAxis::Shape => spec.size_dist = SizeDist::Weibull { shape: value },
            SweepAxis::Alpha => spec.size_dist = SizeDist::Pareto { alpha: value },
            SweepAxis::Timeshape => spec.timeshape = value,
            SweepAxis::Load => spec.load = value,
            SweepAxis::Njobs => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(ExperimentError::InvalidPlan(format!(
                        "njobs must be a non-negative integer, got {value}"
                    )));
                }
                spec.njobs = value as usize;
            }
        },
        (WorkloadSource::Trace(t), SweepAxis::Sigma) => t.sigma = value,
        (WorkloadSource::Trace(t), SweepAxis::Load) => t.target_load = value,
        (WorkloadSource::Trace(_), _) => return unsupported(),
    }
    out.validate()?;
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub value: f64,
    pub result: PlanResult,
}

pub fn sweep(plan: &ExperimentPlan, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    sweep_with(plan, axis, values, |_, _| Ok(()))
}

/// Runs one plan per value; `sink` receives the point index and each
/// repetition's records.
pub fn sweep_with<F>(
    plan: &ExperimentPlan,
    axis: SweepAxis,
    values: &[f64],
    mut sink: F,
) -> Result<Vec<SweepPoint>>
where
    F: FnMut(usize, &RepOutcome) -> Result<()>,
{
    let plans = values
        .iter()
        .enumerate()
        .map(|(i, &v)| plan_for_point(plan, axis, v, i))
        .collect::<Result<Vec<_>>>()?;
    plans
        .iter()
        .zip(values)
        .enumerate()
        .map(|(i, (p, &value))| {
            let result = run_plan_with(p, |rep| sink(i, rep))?;
            Ok(SweepPoint { axis, value, result })
        })
        .collect()
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

/// Writes summary rows as CSV. Normalized columns follow the policy order
/// of the first row.
pub fn write_summary<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let baselines: Vec<PolicyKind> = rows
        .first()
        .map(|r| r.normalized.iter().map(|n| n.0).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = [
        "size_dist", "shape", "alpha", "sigma", "timeshape", "load", "njobs", "trace", "policy",
        "mst", "ci_halfwidth", "reps", "converged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(baselines.iter().map(|b| format!("norm_{b}")));
    w.write_record(&header)?;
    for row in rows {
        let p = &row.params;
        let mut rec = vec![
            p.size_dist.clone(),
            opt(&p.shape),
            opt(&p.alpha),
            p.sigma.to_string(),
            opt(&p.timeshape),
            p.load.to_string(),
            opt(&p.njobs),
            opt(&p.trace),
            row.policy.to_string(),
            row.mst.to_string(),
            row.ci_halfwidth.to_string(),
            row.reps.to_string(),
            row.converged.to_string(),
        ];
        rec.extend(row.normalized.iter().map(|n| n.1.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes per-job records as CSV.
pub fn write_records<W: Write>(records: &[CompletionRecord<f64>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "id", "arrival", "size", "estimate", "completion", "sojourn", "slowdown",
    ])?;
    for r in records {
        w.write_record(&[
            r.id.to_string(),
            r.arrival.to_string(),
            r.size.to_string(),
            r.estimate.to_string(),
            r.completion.to_string(),
            r.sojourn.to_string(),
            r.slowdown.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(policies: Vec<PolicyKind>) -> ExperimentPlan {
        ExperimentPlan {
            source: WorkloadSource::Synthetic(WorkloadSpec {
                njobs: 200,
                ..WorkloadSpec::default()
            }),
            policies,
            reps_min: 5,
            reps_max: 5,
            ..ExperimentPlan::default()
        }
    }

    #[test]
    fn plan_validation() {
        assert!(ExperimentPlan::default().validate().is_ok());
        let bad = [
            ExperimentPlan { policies: vec![], ..Default::default() },
            ExperimentPlan { reps_min: 0, ..Default::default() },
            ExperimentPlan { reps_max: 10, ..Default::default() },
            ExperimentPlan { ci_target: 1.0, ..Default::default() },
        ];
        for p in bad {
            assert!(matches!(p.validate(), Err(ExperimentError::InvalidPlan(_))));
        }
    }

    #[test]
    fn single_job_fifo_mst_is_mean_size() {
        let plan = ExperimentPlan {
            source: WorkloadSource::Synthetic(WorkloadSpec {
                njobs: 1,
                ..WorkloadSpec::default()
            }),
            policies: vec![PolicyKind::Fifo],
            reps_min: 30,
            reps_max: 30,
            ..ExperimentPlan::default()
        };
        let mut sizes = Vec::new();
        let res = run_plan_with(&plan, |rep| {
            sizes.push(rep.runs[0].1[0].size);
            Ok(())
        })
        .unwrap();
        assert_eq!(res.reps, 30);
        let mean_size = sizes.iter().sum::<f64>() / 30.0;
        assert!((res.rows[0].mst - mean_size).abs() < 1e-9);
    }

    #[test]
    fn zero_sigma_fspe_variants_match() {
        let mut plan = small(vec![PolicyKind::Fspe, PolicyKind::FspePs]);
        if let WorkloadSource::Synthetic(spec) = &mut plan.source {
            spec.sigma = 0.0;
        }
        let res = run_plan_with(&plan, |rep| {
            let a = mean_sojourn(&rep.runs[0].1).unwrap();
            let b = mean_sojourn(&rep.runs[1].1).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12);
            Ok(())
        })
        .unwrap();
        assert!((res.rows[1].normalized[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn summary_is_reproducible() {
        let plan = small(vec![PolicyKind::Srpt, PolicyKind::Ps]);
        let render = || {
            let mut buf = Vec::new();
            write_summary(&run_plan(&plan).unwrap().rows, &mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let a = render();
        assert_eq!(a, render());
        assert!(a.starts_with("size_dist,shape,alpha,sigma,timeshape,load,njobs,trace,policy,mst,ci_halfwidth,reps,converged,norm_srpt,norm_ps\n"));
        assert_eq!(a.lines().count(), 3);
    }

    #[test]
    fn stops_once_converged() {
        let plan = ExperimentPlan {
            source: WorkloadSource::Synthetic(WorkloadSpec {
                njobs: 200,
                size_dist: SizeDist::Weibull { shape: 4.0 },
                ..WorkloadSpec::default()
            }),
            policies: vec![PolicyKind::Fifo],
            reps_min: 3,
            reps_max: 1000,
            ci_target: 0.2,
            ..ExperimentPlan::default()
        };
        let res = run_plan(&plan).unwrap();
        assert!(res.converged);
        assert!(res.reps >= 3 && res.reps < 1000);
        let ci = ci95(&res.mst_samples[0].1).unwrap();
        assert!(ci.halfwidth <= 0.2 * ci.mean);
    }

    #[test]
    fn reports_non_convergence() {
        let mut plan = small(vec![PolicyKind::Ps]);
        plan.ci_target = 1e-6;
        let res = run_plan(&plan).unwrap();
        assert!(!res.converged && !res.rows[0].converged);
        assert_eq!(res.reps, 5);
    }

    #[test]
    fn sweep_points_and_axes() {
        let plan = small(vec![PolicyKind::Ps]);
        let pts = sweep(&plan, SweepAxis::Sigma, &[0.5, 1.0]).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].result.rows[0].params.sigma, 1.0);
        assert_eq!(pts[1].result.rows[0].params.njobs, Some(200));
        let p = plan_for_point(&plan, SweepAxis::Alpha, 2.0, 3).unwrap();
        assert_eq!(p.base_seed, 3 * SWEEP_SEED_STRIDE);
        assert!(plan_for_point(&plan, SweepAxis::Njobs, 1.5, 0).is_err());
        assert!("speed".parse::<SweepAxis>().is_err());
        assert_eq!("timeshape".parse::<SweepAxis>().unwrap(), SweepAxis::Timeshape);
    }

    #[test]
    fn records_csv_columns() {
        let plan = small(vec![PolicyKind::Fifo]);
        let mut buf = Vec::new();
        run_plan_with(&plan, |rep| {
            if rep.rep == 0 {
                write_records(&rep.runs[0].1, &mut buf)?;
            }
            Ok(())
        })
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,arrival,size,estimate,completion,sojourn,slowdown\n"));
        assert_eq!(text.lines().count(), 201);
    }
}
