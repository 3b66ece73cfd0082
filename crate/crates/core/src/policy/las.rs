use std::collections::{BTreeMap, BTreeSet};

use super::{check_time, PolicyError};
use crate::engine::{Allocation, Policy};
use crate::scalar::{OrdScalar, Scalar};
use crate::workload::JobId;

/// Least attained service: the jobs with the least service received so far
/// share the server equally.
///
/// The served group always has a common attained level. Jobs outside it are
/// grouped by their (frozen) attained service. An internal event fires when
/// the served group's level catches up with the lowest waiting group, which
/// then joins it.
#[derive(Clone, Debug)]
pub struct Las<T> {
    clock: T,
    level: T,
    served: BTreeSet<JobId>,
    waiting: BTreeMap<OrdScalar<T>, Vec<JobId>>,
}

impl<T: Scalar> Default for Las<T> {
    fn default() -> Self {
        Las {
            clock: T::zero(),
            level: T::zero(),
            served: BTreeSet::new(),
            waiting: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> Las<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Service received so far by `job`, as of the last notification.
    pub fn attained(&self, job: JobId) -> Option<T> {
        if self.served.contains(&job) {
            return Some(self.level);
        }
        self.waiting
            .iter()
            .find(|(_, jobs)| jobs.contains(&job))
            .map(|(level, _)| level.0)
    }

    fn advance_to(&mut self, now: T) -> Result<(), PolicyError> {
        check_time(now, self.clock)?;
        let now = now.max(self.clock);
        if !self.served.is_empty() {
            self.level = self.level + (now - self.clock) / T::from_count(self.served.len());
        }
        self.clock = now;
        Ok(())
    }

    fn promote_lowest_group(&mut self) -> bool {
        match self.waiting.pop_first() {
            Some((level, jobs)) => {
                self.level = level.0;
                self.served.extend(jobs);
                true
            }
            None => false,
        }
    }
}

impl<T: Scalar> Policy<T> for Las<T> {
    fn name(&self) -> &'static str {
        "las"
    }

    fn on_arrival(&mut self, now: T, job: JobId, _hint: T) -> Result<(), PolicyError> {
        self.advance_to(now)?;
        if self.attained(job).is_some() {
            return Err(PolicyError::DuplicateJob(job));
        }
        if self.served.is_empty() || self.level <= T::time_tolerance() {
            if self.served.is_empty() {
                self.level = T::zero();
            }
            self.served.insert(job);
            return Ok(());
        }
        let group = std::mem::take(&mut self.served);
        self.waiting
            .entry(OrdScalar(self.level))
            .or_default()
            .extend(group);
        self.served.insert(job);
        self.level = T::zero();
        Ok(())
    }

    fn on_real_completion(&mut self, now: T, job: JobId) -> Result<(), PolicyError> {
        self.advance_to(now)?;
        if self.served.remove(&job) {
            if self.served.is_empty() {
                self.promote_lowest_group();
            }
            return Ok(());
        }
        let key = self
            .waiting
            .iter()
            .find(|(_, jobs)| jobs.contains(&job))
            .map(|(k, _)| *k)
            .ok_or(PolicyError::UnknownJob(job))?;
        let group = self.waiting.get_mut(&key).expect("group exists");
        group.retain(|&j| j != job);
        if group.is_empty() {
            self.waiting.remove(&key);
        }
        Ok(())
    }

    fn next_internal_event(&self) -> Option<T> {
        if self.served.is_empty() {
            return None;
        }
        let (next, _) = self.waiting.first_key_value()?;
        let gap = (next.0 - self.level).max(T::zero());
        Some(self.clock + gap * T::from_count(self.served.len()))
    }

    fn on_internal_event(&mut self, now: T) -> Result<(), PolicyError> {
        self.advance_to(now)?;
        if !self.promote_lowest_group() {
            return Err(PolicyError::NoPendingEvent(now.as_f64()));
        }
        // Groups that the level has reached as well.
        while let Some((next, _)) = self.waiting.first_key_value() {
            let lag = (next.0 - self.level) * T::from_count(self.served.len());
            if lag > T::time_tolerance() {
                break;
            }
            self.promote_lowest_group();
        }
        Ok(())
    }

    fn allocate(&mut self) -> Allocation<T> {
        Allocation::shared(self.served.iter().copied())
    }
}
