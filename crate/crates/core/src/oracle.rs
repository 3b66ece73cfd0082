//! Fixed-step reference simulator used to cross-check the event engine.
//!
//! Every tick the allocation is rebuilt from scratch from each policy's
//! plain rule, then `dt * fraction` of service is applied. Nothing here is
//! shared with [`crate::engine`] or [`crate::policy`]: FSPE's virtual
//! system is emulated by solving the processor-sharing queue over
//! estimates directly, and a job is late once its virtual finish time has
//! passed. Ticks are shortened so that arrivals and virtual finishes fall
//! on tick boundaries; real completions are interpolated inside the tick.

use crate::engine::CompletionRecord;
use crate::policy::PolicyKind;
use crate::workload::{JobId, Workload};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub dt: f64,
    /// Accepted completion-time deviation from the event engine.
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            dt: 1e-3,
            tolerance: 1e-2,
        }
    }
}

/// Warns when `dt` is coarse compared to the smallest job.
pub fn coarse_dt_warning(workload: &Workload<f64>, dt: f64) -> Option<String> {
    let min_size = workload.jobs.iter().map(|j| j.size).fold(f64::INFINITY, f64::min);
    (dt > min_size / 10.0)
        .then(|| format!("dt = {dt} exceeds a tenth of the smallest job size {min_size}"))
}

/// Finish time of every job in a processor-sharing queue, computed
/// event by event.
pub fn ps_finish_times(arrivals: &[f64], sizes: &[f64]) -> Vec<f64> {
    let n = arrivals.len();
    let mut finish = vec![f64::NAN; n];
    let mut active: Vec<(usize, f64)> = Vec::new();
    let mut next = 0;
    let mut t: f64 = 0.0;
    while next < n || !active.is_empty() {
        if active.is_empty() {
            t = t.max(arrivals[next]);
        }
        while next < n && arrivals[next] <= t {
            active.push((next, sizes[next]));
            next += 1;
        }
        let k = active.len() as f64;
        let least = active.iter().map(|a| a.1).fold(f64::INFINITY, f64::min);
        let t_done = t + least * k;
        let t_arr = if next < n { arrivals[next] } else { f64::INFINITY };
        if t_arr < t_done {
            let dec = (t_arr - t) / k;
            active.iter_mut().for_each(|a| a.1 -= dec);
            t = t_arr;
        } else {
            active.iter_mut().for_each(|a| a.1 -= least);
            t = t_done;
            for &(j, rem) in &active {
                if rem <= 1e-12 {
                    finish[j] = t;
                }
            }
            active.retain(|a| a.1 > 1e-12);
        }
    }
    finish
}

/// Runs `policy` over `workload` with time step `dt`.
pub fn discretized_run(
    workload: &Workload<f64>,
    policy: PolicyKind,
    dt: f64,
) -> Vec<CompletionRecord<f64>> {
    assert!(dt > 0.0, "dt must be positive");
    if let Some(w) = coarse_dt_warning(workload, dt) {
        eprintln!("warning: {w}");
    }
    let jobs = &workload.jobs;
    let n = jobs.len();
    let arrivals: Vec<f64> = jobs.iter().map(|j| j.arrival).collect();
    let estimates: Vec<f64> = jobs.iter().map(|j| j.estimate).collect();
    let virtual_finish = ps_finish_times(&arrivals, &estimates);

    let mut remaining: Vec<f64> = jobs.iter().map(|j| j.size).collect();
    let mut attained = vec![0.0; n];
    let mut done = vec![false; n];
    let mut records = Vec::with_capacity(n);
    let mut t: f64 = 0.0;

    while records.len() < n {
        let present: Vec<usize> = (0..n)
            .filter(|&j| !done[j] && arrivals[j] <= t)
            .collect();
        let next_arrival = (0..n)
            .filter(|&j| arrivals[j] > t)
            .map(|j| arrivals[j])
            .fold(f64::INFINITY, f64::min);
        if present.is_empty() {
            t = next_arrival;
            continue;
        }
        let mut step = dt.min(next_arrival - t);
        if matches!(policy, PolicyKind::Fspe | PolicyKind::FspePs) {
            for &j in &present {
                if virtual_finish[j] > t {
                    step = step.min(virtual_finish[j] - t);
                }
            }
        }

        let shares = rule(policy, &present, t, dt, &remaining, &attained, &estimates, &virtual_finish);
        for (j, f) in shares {
            let work = f * step;
            if remaining[j] <= work {
                let completion = t + remaining[j] / f;
                done[j] = true;
                remaining[j] = 0.0;
                let job = &jobs[j];
                records.push(CompletionRecord {
                    id: job.id,
                    arrival: job.arrival,
                    size: job.size,
                    estimate: job.estimate,
                    completion,
                    sojourn: completion - job.arrival,
                    slowdown: (completion - job.arrival) / job.size,
                });
            } else {
                remaining[j] -= work;
                attained[j] += work;
            }
        }
        t += step;
    }
    records.sort_by(|a, b| a.completion.total_cmp(&b.completion).then(a.id.cmp(&b.id)));
    records
}

fn lowest_by<F: Fn(usize) -> f64>(present: &[usize], key: F) -> usize {
    *present
        .iter()
        .min_by(|&&a, &&b| key(a).total_cmp(&key(b)).then(a.cmp(&b)))
        .expect("non-empty")
}

#[allow(clippy::too_many_arguments)]
fn rule(
    policy: PolicyKind,
    present: &[usize],
    t: f64,
    dt: f64,
    remaining: &[f64],
    attained: &[f64],
    estimates: &[f64],
    virtual_finish: &[f64],
) -> Vec<(usize, f64)> {
    let all = |set: &[usize]| -> Vec<(usize, f64)> {
        let f = 1.0 / set.len() as f64;
        set.iter().map(|&j| (j, f)).collect()
    };
    match policy {
        PolicyKind::Fifo => vec![(present[0], 1.0)],
        PolicyKind::Ps => all(present),
        PolicyKind::Las => {
            let least = present.iter().map(|&j| attained[j]).fold(f64::INFINITY, f64::min);
            let tied: Vec<usize> = present
                .iter()
                .copied()
                .filter(|&j| attained[j] <= least + dt)
                .collect();
            all(&tied)
        }
        PolicyKind::Srpt => vec![(lowest_by(present, |j| remaining[j]), 1.0)],
        PolicyKind::Srpte => vec![(lowest_by(present, |j| estimates[j] - attained[j]), 1.0)],
        PolicyKind::Fspe | PolicyKind::FspePs => {
            let late: Vec<usize> = present
                .iter()
                .copied()
                .filter(|&j| virtual_finish[j] <= t)
                .collect();
            if late.is_empty() {
                vec![(lowest_by(present, |j| virtual_finish[j]), 1.0)]
            } else if policy == PolicyKind::FspePs {
                all(&late)
            } else {
                vec![(lowest_by(&late, |j| virtual_finish[j]), 1.0)]
            }
        }
    }
}

/// Completion time of each job, indexed by id.
pub fn completions_by_id(records: &[CompletionRecord<f64>]) -> Vec<f64> {
    let mut out = vec![f64::NAN; records.len()];
    for r in records {
        let JobId(i) = r.id;
        out[i] = r.completion;
    }
    out
}
