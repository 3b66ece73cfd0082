use std::collections::BTreeSet;

use super::PolicyError;
use crate::engine::{Allocation, Policy};
use crate::scalar::Scalar;
use crate::workload::JobId;

/// First in, first out. Job ids follow arrival order, so the smallest id
/// present is the earliest arrival.
#[derive(Clone, Debug, Default)]
pub struct Fifo {
    present: BTreeSet<JobId>,
}

impl Fifo {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<T: Scalar> Policy<T> for Fifo {
    fn name(&self) -> &'static str {
        "fifo"
    }

    fn on_arrival(&mut self, _now: T, job: JobId, _hint: T) -> Result<(), PolicyError> {
        if !self.present.insert(job) {
            return Err(PolicyError::DuplicateJob(job));
        }
        Ok(())
    }

    fn on_real_completion(&mut self, _now: T, job: JobId) -> Result<(), PolicyError> {
        if !self.present.remove(&job) {
            return Err(PolicyError::UnknownJob(job));
        }
        Ok(())
    }

    fn allocate(&mut self) -> Allocation<T> {
        self.present
            .first()
            .map_or_else(Allocation::empty, |&j| Allocation::single(j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serves_earliest_arrival() {
        let mut p = Fifo::new();
        assert!(Policy::<f64>::allocate(&mut p).is_empty());
        p.on_arrival(0.0, JobId(0), 9.0).unwrap();
        p.on_arrival(1.0, JobId(1), 1.0).unwrap();
        assert_eq!(Policy::<f64>::allocate(&mut p), Allocation::single(JobId(0)));
        p.on_real_completion(9.0, JobId(0)).unwrap();
        assert_eq!(Policy::<f64>::allocate(&mut p), Allocation::single(JobId(1)));
        assert!(p.on_real_completion(9.0, JobId(0)).is_err());
    }
}
