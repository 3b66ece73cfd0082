use std::collections::BTreeSet;

use super::{check_time, PolicyError};
use crate::engine::{Allocation, Policy};
use crate::scalar::{OrdScalar, Scalar};
use crate::workload::JobId;

/// Shortest remaining processing time on estimated sizes.
///
/// The job with the smallest estimated remaining work runs; ties go to the
/// earlier arrival (lower id). Estimated remaining work may drop to zero or
/// below while the job still needs real service: such a late job sorts
/// below any fresh arrival and therefore keeps the server until it really
/// completes.
///
/// Built with [`Srpte::exact`], the policy receives true sizes and is SRPT.
#[derive(Clone, Debug)]
pub struct Srpte<T> {
    exact: bool,
    clock: T,
    running: Option<(JobId, T)>,
    waiting: BTreeSet<(OrdScalar<T>, JobId)>,
}

impl<T: Scalar> Default for Srpte<T> {
    fn default() -> Self {
        Srpte {
            exact: false,
            clock: T::zero(),
            running: None,
            waiting: BTreeSet::new(),
        }
    }
}

impl<T: Scalar> Srpte<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// SRPT: same rule, fed true sizes by the engine.
    pub fn exact() -> Self {
        Srpte {
            exact: true,
            ..Self::default()
        }
    }

    /// Estimated remaining work of `job` as of the last notification.
    pub fn est_remaining(&self, job: JobId) -> Option<T> {
        match self.running {
            Some((j, rem)) if j == job => Some(rem),
            _ => self
                .waiting
                .iter()
                .find(|(_, j)| *j == job)
                .map(|(rem, _)| rem.0),
        }
    }

    fn advance_to(&mut self, now: T) -> Result<(), PolicyError> {
        check_time(now, self.clock)?;
        let now = now.max(self.clock);
        if let Some((_, rem)) = self.running.as_mut() {
            *rem = *rem - (now - self.clock);
        }
        self.clock = now;
        Ok(())
    }
}

impl<T: Scalar> Policy<T> for Srpte<T> {
    fn name(&self) -> &'static str {
        if self.exact {
            "srpt"
        } else {
            "srpte"
        }
    }

    fn uses_exact_sizes(&self) -> bool {
        self.exact
    }

    fn on_arrival(&mut self, now: T, job: JobId, size_hint: T) -> Result<(), PolicyError> {
        self.advance_to(now)?;
        if self.est_remaining(job).is_some() {
            return Err(PolicyError::DuplicateJob(job));
        }
        let incoming = (OrdScalar(size_hint), job);
        match self.running {
            None => self.running = Some((job, size_hint)),
            Some((cur, rem)) if incoming < (OrdScalar(rem), cur) => {
                self.waiting.insert((OrdScalar(rem), cur));
                self.running = Some((job, size_hint));
            }
            Some(_) => {
                self.waiting.insert(incoming);
            }
        }
        Ok(())
    }

    fn on_real_completion(&mut self, now: T, job: JobId) -> Result<(), PolicyError> {
        self.advance_to(now)?;
        if matches!(self.running, Some((j, _)) if j == job) {
            self.running = self.waiting.pop_first().map(|(rem, j)| (j, rem.0));
            return Ok(());
        }
        let entry = self
            .waiting
            .iter()
            .find(|(_, j)| *j == job)
            .copied()
            .ok_or(PolicyError::UnknownJob(job))?;
        self.waiting.remove(&entry);
        Ok(())
    }

    fn allocate(&mut self) -> Allocation<T> {
        self.running
            .map_or_else(Allocation::empty, |(j, _)| Allocation::single(j))
    }
}
