use std::collections::BTreeSet;

use super::PolicyError;
use crate::engine::{Allocation, Policy};
use crate::scalar::Scalar;
use crate::workload::JobId;

/// Processor sharing: every job present gets an equal share.
#[derive(Clone, Debug, Default)]
pub struct Ps {
    present: BTreeSet<JobId>,
}

impl Ps {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<T: Scalar> Policy<T> for Ps {
    fn name(&self) -> &'static str {
        "ps"
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
        Allocation::shared(self.present.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_shares() {
        let mut p = Ps::new();
        assert!(Policy::<f64>::allocate(&mut p).is_empty());
        p.on_arrival(0.0, JobId(0), 1.0).unwrap();
        assert_eq!(Policy::<f64>::allocate(&mut p), Allocation::single(JobId(0)));
        for j in 1..4 {
            p.on_arrival(0.0, JobId(j), 1.0).unwrap();
        }
        let a: Allocation<f64> = p.allocate();
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|(_, f)| f == 0.25));
        assert!(p.on_arrival(0.0, JobId(2), 1.0).is_err());
    }
}
