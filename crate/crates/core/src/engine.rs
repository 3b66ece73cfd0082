//! Event-driven single-server simulation.
//!
//! The server has rate 1. Between two events the policy's allocation is
//! constant, so each allocated job's true remaining work falls linearly and
//! the next real completion can be computed exactly. At equal timestamps
//! events are dispatched in the order real completion, policy-internal,
//! arrival; a departing job therefore never shares the server with a job
//! arriving at the same instant.

use std::fmt;

use thiserror::Error;

use crate::policy::PolicyError;
use crate::scalar::Scalar;
use crate::workload::{JobId, Workload};

/// Service fractions handed out by a policy; piecewise constant between
/// events.
#[derive(Clone, Debug, PartialEq)]
pub struct Allocation<T> {
    entries: Vec<(JobId, T)>,
}

impl<T> Default for Allocation<T> {
    fn default() -> Self {
        Allocation {
            entries: Vec::new(),
        }
    }
}

impl<T: Scalar> Allocation<T> {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(job: JobId) -> Self {
        Allocation {
            entries: vec![(job, T::one())],
        }
    }

    /// Splits the server evenly among `jobs`.
    pub fn shared(jobs: impl IntoIterator<Item = JobId>) -> Self {
        let mut entries: Vec<(JobId, T)> = jobs.into_iter().map(|j| (j, T::zero())).collect();
        let share = T::one() / T::from_count(entries.len().max(1));
        for e in &mut entries {
            e.1 = share;
        }
        Allocation { entries }
    }

    pub fn from_entries(entries: Vec<(JobId, T)>) -> Self {
        Allocation { entries }
    }

    pub fn entries(&self) -> &[(JobId, T)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (JobId, T)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> T {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn fraction_of(&self, job: JobId) -> Option<T> {
        self.entries.iter().find(|e| e.0 == job).map(|e| e.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Arrival,
    RealCompletion,
    PolicyInternal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineEvent<T> {
    pub kind: EventKind,
    pub time: T,
    pub job: Option<JobId>,
}

impl<T: fmt::Display> fmt::Display for EngineEvent<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at t={}", self.kind, self.time)?;
        if let Some(job) = self.job {
            write!(f, " (job {job})")?;
        }
        Ok(())
    }
}

/// Outcome of one job.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompletionRecord<T> {
    pub id: JobId,
    pub arrival: T,
    pub size: T,
    pub estimate: T,
    pub completion: T,
    pub sojourn: T,
    pub slowdown: T,
}

/// The engine's only coupling to a scheduling discipline.
///
/// Policies are told about arrivals together with a size hint (the
/// estimate, or the true size when [`Policy::uses_exact_sizes`] is true),
/// real completions and their own internal events. After every event the
/// engine calls [`Policy::allocate`]. Policies that track attained service
/// do so from the `now` passed with each notification and the allocation
/// they last returned.
pub trait Policy<T: Scalar> {
    fn name(&self) -> &'static str;

    /// Whether arrival hints carry the true size instead of the estimate.
    fn uses_exact_sizes(&self) -> bool {
        false
    }

    fn on_arrival(&mut self, now: T, job: JobId, size_hint: T) -> Result<(), PolicyError>;

    fn on_real_completion(&mut self, now: T, job: JobId) -> Result<(), PolicyError>;

    fn next_internal_event(&self) -> Option<T> {
        None
    }

    fn on_internal_event(&mut self, _now: T) -> Result<(), PolicyError> {
        Ok(())
    }

    fn allocate(&mut self) -> Allocation<T>;
}

impl<T: Scalar, P: Policy<T> + ?Sized> Policy<T> for Box<P> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn uses_exact_sizes(&self) -> bool {
        (**self).uses_exact_sizes()
    }
    fn on_arrival(&mut self, now: T, job: JobId, size_hint: T) -> Result<(), PolicyError> {
        (**self).on_arrival(now, job, size_hint)
    }
    fn on_real_completion(&mut self, now: T, job: JobId) -> Result<(), PolicyError> {
        (**self).on_real_completion(now, job)
    }
    fn next_internal_event(&self) -> Option<T> {
        (**self).next_internal_event()
    }
    fn on_internal_event(&mut self, now: T) -> Result<(), PolicyError> {
        (**self).on_internal_event(now)
    }
    fn allocate(&mut self) -> Allocation<T> {
        (**self).allocate()
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("policy returned an invalid allocation after {event}: {reason}")]
    InvalidAllocation { event: String, reason: String },
    #[error("policy failed while handling {event}: {source}")]
    Policy {
        event: String,
        #[source]
        source: PolicyError,
    },
    #[error("allocated job {0} has no remaining work on record")]
    UnknownJob(JobId),
    #[error("server idle at t={time} with {present} job(s) present and no pending events")]
    Stalled { time: f64, present: usize },
}

/// True remaining work of every job currently in the system, indexed by id.
#[derive(Clone, Debug, Default)]
pub struct RemainingWork<T> {
    slots: Vec<Option<T>>,
    present: usize,
}

impl<T: Scalar> RemainingWork<T> {
    pub fn with_capacity(njobs: usize) -> Self {
        RemainingWork {
            slots: vec![None; njobs],
            present: 0,
        }
    }

    pub fn insert(&mut self, job: JobId, work: T) {
        if job.0 >= self.slots.len() {
            self.slots.resize(job.0 + 1, None);
        }
        if self.slots[job.0].replace(work).is_none() {
            self.present += 1;
        }
    }

    pub fn remove(&mut self, job: JobId) -> Option<T> {
        let out = self.slots.get_mut(job.0).and_then(Option::take);
        if out.is_some() {
            self.present -= 1;
        }
        out
    }

    pub fn get(&self, job: JobId) -> Option<T> {
        self.slots.get(job.0).copied().flatten()
    }

    pub fn contains(&self, job: JobId) -> bool {
        self.get(job).is_some()
    }

    /// Number of jobs in the system.
    pub fn len(&self) -> usize {
        self.present
    }

    pub fn is_empty(&self) -> bool {
        self.present == 0
    }
}

impl<T: Scalar> FromIterator<(JobId, T)> for RemainingWork<T> {
    fn from_iter<I: IntoIterator<Item = (JobId, T)>>(iter: I) -> Self {
        let mut out = RemainingWork::with_capacity(0);
        for (job, work) in iter {
            out.insert(job, work);
        }
        out
    }
}

/// Earliest real completion under `alloc`, ties broken by lowest job id.
pub fn next_real_completion<T: Scalar>(
    alloc: &Allocation<T>,
    remaining: &RemainingWork<T>,
    now: T,
) -> Result<Option<(JobId, T)>, EngineError> {
    let mut best: Option<(JobId, T)> = None;
    for (job, fraction) in alloc.iter() {
        let left = remaining.get(job).ok_or(EngineError::UnknownJob(job))?;
        let at = now + left.max(T::zero()) / fraction;
        best = match best {
            Some((bj, bt)) if bt < at || (bt == at && bj < job) => Some((bj, bt)),
            _ => Some((job, at)),
        };
    }
    Ok(best)
}

/// Applies `alloc` from `now` to `until`, clamping remaining work at zero.
pub fn advance<T: Scalar>(now: T, until: T, alloc: &Allocation<T>, remaining: &mut RemainingWork<T>) {
    let dt = until - now;
    if dt <= T::zero() {
        return;
    }
    for (job, fraction) in alloc.iter() {
        if let Some(slot) = remaining.slots.get_mut(job.0).and_then(Option::as_mut) {
            *slot = (*slot - fraction * dt).max(T::zero());
        }
    }
}

/// Runs `policy` over `workload` and returns one record per job, in
/// completion order.
pub fn run_simulation<T, P>(
    workload: &Workload<T>,
    policy: &mut P,
) -> Result<Vec<CompletionRecord<T>>, EngineError>
where
    T: Scalar,
    P: Policy<T> + ?Sized,
{
    run_observed(workload, policy, |_, _| {})
}

/// Like [`run_simulation`], calling `observe` with every dispatched event
/// and the allocation the policy chose in response.
pub fn run_observed<T, P, F>(
    workload: &Workload<T>,
    policy: &mut P,
    mut observe: F,
) -> Result<Vec<CompletionRecord<T>>, EngineError>
where
    T: Scalar,
    P: Policy<T> + ?Sized,
    F: FnMut(&EngineEvent<T>, &Allocation<T>),
{
    let jobs = &workload.jobs;
    let tol = T::time_tolerance();
    let exact = policy.uses_exact_sizes();
    let mut remaining = RemainingWork::with_capacity(jobs.len());
    let mut records = Vec::with_capacity(jobs.len());
    let mut alloc = Allocation::empty();
    let mut seen = vec![usize::MAX; jobs.len()];
    let mut next_arrival = 0usize;
    let mut now = T::zero();
    let mut dispatched = 0usize;

    loop {
        let arrival_at = jobs.get(next_arrival).map(|j| j.arrival);
        let completion = next_real_completion(&alloc, &remaining, now)?;
        let internal_at = policy.next_internal_event();

        let earliest = [arrival_at, completion.map(|c| c.1), internal_at]
            .into_iter()
            .flatten()
            .reduce(T::min);
        let Some(earliest) = earliest else {
            if remaining.is_empty() {
                break;
            }
            return Err(EngineError::Stalled {
                time: now.as_f64(),
                present: remaining.len(),
            });
        };

        let event = match (completion, internal_at) {
            (Some((job, at)), _) if at <= earliest + tol => EngineEvent {
                kind: EventKind::RealCompletion,
                time: at,
                job: Some(job),
            },
            (_, Some(at)) if at <= earliest + tol => EngineEvent {
                kind: EventKind::PolicyInternal,
                time: at,
                job: None,
            },
            _ => EngineEvent {
                kind: EventKind::Arrival,
                time: earliest,
                job: Some(jobs[next_arrival].id),
            },
        };
        let event = EngineEvent {
            time: event.time.max(now),
            ..event
        };

        advance(now, event.time, &alloc, &mut remaining);
        now = event.time;

        let outcome = match event.kind {
            EventKind::RealCompletion => {
                let id = event.job.expect("completion names a job");
                remaining.remove(id);
                let job = &jobs[id.0];
                let sojourn = now - job.arrival;
                records.push(CompletionRecord {
                    id,
                    arrival: job.arrival,
                    size: job.size,
                    estimate: job.estimate,
                    completion: now,
                    sojourn,
                    slowdown: sojourn / job.size,
                });
                policy.on_real_completion(now, id)
            }
            EventKind::PolicyInternal => policy.on_internal_event(now),
            EventKind::Arrival => {
                let job = &jobs[next_arrival];
                next_arrival += 1;
                remaining.insert(job.id, job.size);
                let hint = if exact { job.size } else { job.estimate };
                policy.on_arrival(now, job.id, hint)
            }
        };
        outcome.map_err(|source| EngineError::Policy {
            event: event.to_string(),
            source,
        })?;

        alloc = policy.allocate();
        validate(&alloc, &remaining, &mut seen, dispatched)
            .map_err(|reason| EngineError::InvalidAllocation {
                event: event.to_string(),
                reason,
            })?;
        dispatched += 1;
        observe(&event, &alloc);
    }
    Ok(records)
}

fn validate<T: Scalar>(
    alloc: &Allocation<T>,
    remaining: &RemainingWork<T>,
    seen: &mut [usize],
    stamp: usize,
) -> Result<(), String> {
    for (job, fraction) in alloc.iter() {
        if !(fraction > T::zero() && fraction <= T::one() + T::allocation_tolerance()) {
            return Err(format!("job {job} has fraction {fraction} outside (0, 1]"));
        }
        if !remaining.contains(job) {
            return Err(format!("job {job} is not in the system"));
        }
        if seen[job.0] == stamp {
            return Err(format!("job {job} allocated twice"));
        }
        seen[job.0] = stamp;
    }
    let total = alloc.total();
    if total > T::one() + T::allocation_tolerance() {
        return Err(format!("fractions sum to {total} > 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn remaining(pairs: &[(usize, f64)]) -> RemainingWork<f64> {
        pairs.iter().map(|&(j, w)| (JobId(j), w)).collect()
    }

    #[test]
    fn next_completion_single() {
        let alloc = Allocation::from_entries(vec![(JobId(0), 0.5)]);
        let got = next_real_completion(&alloc, &remaining(&[(0, 2.0)]), 10.0).unwrap();
        assert_eq!(got, Some((JobId(0), 14.0)));
    }

    #[test]
    fn next_completion_picks_earliest() {
        let alloc = Allocation::shared([JobId(0), JobId(1)]);
        let got = next_real_completion(&alloc, &remaining(&[(0, 1.0), (1, 3.0)]), 0.0).unwrap();
        assert_eq!(got, Some((JobId(0), 2.0)));
    }

    #[test]
    fn next_completion_ties_lowest_id() {
        let alloc = Allocation::shared([JobId(3), JobId(1)]);
        let got = next_real_completion(&alloc, &remaining(&[(1, 1.0), (3, 1.0)]), 0.0).unwrap();
        assert_eq!(got, Some((JobId(1), 2.0)));
    }

    #[test]
    fn next_completion_empty_and_unknown() {
        let empty: Allocation<f64> = Allocation::empty();
        assert_eq!(next_real_completion(&empty, &remaining(&[]), 0.0).unwrap(), None);
        let alloc = Allocation::single(JobId(4));
        assert!(matches!(
            next_real_completion(&alloc, &remaining(&[(0, 1.0)]), 0.0),
            Err(EngineError::UnknownJob(JobId(4)))
        ));
    }

    #[test]
    fn advance_cases() {
        let alloc = Allocation::single(JobId(0));
        let mut rem = remaining(&[(0, 5.0)]);
        advance(1.0, 1.0, &alloc, &mut rem);
        assert_eq!(rem.get(JobId(0)), Some(5.0));
        advance(1.0, 4.0, &alloc, &mut rem);
        assert_eq!(rem.get(JobId(0)), Some(2.0));

        let alloc = Allocation::shared([JobId(0), JobId(1)]);
        let mut rem = remaining(&[(0, 3.0), (1, 5.0)]);
        advance(0.0, 4.0, &alloc, &mut rem);
        assert_eq!((rem.get(JobId(0)), rem.get(JobId(1))), (Some(1.0), Some(3.0)));
    }

    #[test]
    fn remaining_work_bookkeeping() {
        let mut rem = RemainingWork::with_capacity(2);
        rem.insert(JobId(0), 1.0);
        rem.insert(JobId(5), 2.0);
        assert_eq!(rem.len(), 2);
        assert_eq!(rem.remove(JobId(0)), Some(1.0));
        assert_eq!(rem.remove(JobId(0)), None);
        assert_eq!(rem.len(), 1);
    }

    #[test]
    fn shared_allocation_splits_evenly() {
        let a: Allocation<f64> = Allocation::shared((0..4).map(JobId));
        assert!(a.iter().all(|(_, f)| f == 0.25));
        assert_eq!(a.total(), 1.0);
        assert_eq!(a.fraction_of(JobId(2)), Some(0.25));
        let e: Allocation<f64> = Allocation::shared([]);
        assert!(e.is_empty());
    }

    /// Grabs the server for a job that is not in the system.
    struct Rogue;

    impl Policy<f64> for Rogue {
        fn name(&self) -> &'static str {
            "rogue"
        }
        fn on_arrival(&mut self, _: f64, _: JobId, _: f64) -> Result<(), PolicyError> {
            Ok(())
        }
        fn on_real_completion(&mut self, _: f64, _: JobId) -> Result<(), PolicyError> {
            Ok(())
        }
        fn allocate(&mut self) -> Allocation<f64> {
            Allocation::single(JobId(7))
        }
    }

    /// Hands out more than the whole server.
    struct Greedy(Vec<JobId>);

    impl Policy<f64> for Greedy {
        fn name(&self) -> &'static str {
            "greedy"
        }
        fn on_arrival(&mut self, _: f64, job: JobId, _: f64) -> Result<(), PolicyError> {
            self.0.push(job);
            Ok(())
        }
        fn on_real_completion(&mut self, _: f64, job: JobId) -> Result<(), PolicyError> {
            self.0.retain(|&j| j != job);
            Ok(())
        }
        fn allocate(&mut self) -> Allocation<f64> {
            Allocation::from_entries(self.0.iter().map(|&j| (j, 1.0)).collect())
        }
    }

    /// Never serves anything.
    struct Idle;

    impl Policy<f64> for Idle {
        fn name(&self) -> &'static str {
            "idle"
        }
        fn on_arrival(&mut self, _: f64, _: JobId, _: f64) -> Result<(), PolicyError> {
            Ok(())
        }
        fn on_real_completion(&mut self, _: f64, _: JobId) -> Result<(), PolicyError> {
            Ok(())
        }
        fn allocate(&mut self) -> Allocation<f64> {
            Allocation::empty()
        }
    }

    fn two_jobs() -> Workload<f64> {
        Workload::from_triples(
            [(0.0, 4.0, 4.0), (0.0, 2.0, 2.0)],
            crate::workload::Provenance::Trace {
                path: "mem".into(),
                target_load: None,
            },
        )
    }

    #[test]
    fn contract_violations_are_reported() {
        let err = run_simulation(&two_jobs(), &mut Rogue).unwrap_err();
        match err {
            EngineError::InvalidAllocation { event, .. } => assert!(event.contains("Arrival")),
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(
            run_simulation(&two_jobs(), &mut Greedy(vec![])),
            Err(EngineError::InvalidAllocation { .. })
        ));
        assert!(matches!(
            run_simulation(&two_jobs(), &mut Idle),
            Err(EngineError::Stalled { present: 2, .. })
        ));
    }
}
