//! FSPE and FSPE+PS.
//!
//! Both emulate a processor-sharing system fed with *estimated* sizes and
//! serve, in the real system, the job that would finish first there. A job
//! that finishes in the emulation while still needing real service is
//! *late*. FSPE serves late jobs one at a time in the order they became
//! late; FSPE+PS shares the server among all of them.
//!
//! The emulated queue is kept as a list of `(job, w, active)` entries sorted
//! by virtual remaining work `w`. Since elapsed virtual time lowers every
//! `w` by the same amount, entries store a finish tag `w + served` against a
//! running counter `served` of per-job virtual service; advancing time only
//! bumps the counter and the ordering never has to be touched.

use std::collections::{BTreeMap, HashMap};

use super::{check_time, PolicyError};
use crate::engine::{Allocation, Policy};
use crate::scalar::{OrdScalar, Scalar};
use crate::workload::JobId;

/// How late jobs share the server.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LateMode {
    /// FSPE: the earliest late job runs alone until it really completes.
    Sequential,
    /// FSPE+PS: all late jobs share the server equally.
    Shared,
}

/// One entry of the emulated processor-sharing queue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VirtualEntry<T> {
    pub job: JobId,
    /// Virtual remaining work.
    pub remaining: T,
    /// Whether the job is still present in the real system.
    pub active: bool,
}

type Slot<T> = (OrdScalar<T>, u64);

/// Virtual queue, late set and virtual clock.
#[derive(Clone, Debug)]
pub struct FspeState<T> {
    queue: BTreeMap<Slot<T>, (JobId, bool)>,
    slots: HashMap<JobId, Slot<T>>,
    served: T,
    clock: T,
    late: BTreeMap<u64, JobId>,
    late_order: HashMap<JobId, u64>,
    seq: u64,
}

impl<T: Scalar> Default for FspeState<T> {
    fn default() -> Self {
        FspeState {
            queue: BTreeMap::new(),
            slots: HashMap::new(),
            served: T::zero(),
            clock: T::zero(),
            late: BTreeMap::new(),
            late_order: HashMap::new(),
            seq: 0,
        }
    }
}

impl<T: Scalar> FspeState<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Time of the last virtual update.
    pub fn time(&self) -> T {
        self.clock
    }

    /// The virtual queue in order of increasing remaining work.
    pub fn entries(&self) -> Vec<VirtualEntry<T>> {
        self.queue
            .iter()
            .map(|((tag, _), &(job, active))| VirtualEntry {
                job,
                remaining: tag.0 - self.served,
                active,
            })
            .collect()
    }

    /// Late jobs in the order they became late.
    pub fn late_jobs(&self) -> Vec<JobId> {
        self.late.values().copied().collect()
    }

    pub fn is_late(&self, job: JobId) -> bool {
        self.late_order.contains_key(&job)
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    /// Lowers every virtual remaining work by `(s - t) / |O|` and moves the
    /// virtual clock to `s`.
    pub fn update_virtual_time(&mut self, s: T) -> Result<(), PolicyError> {
        check_time(s, self.clock)?;
        let s = s.max(self.clock);
        if !self.queue.is_empty() {
            self.served = self.served + (s - self.clock) / T::from_count(self.queue.len());
        }
        self.clock = s;
        Ok(())
    }

    /// Inserts `job` with estimated size `w` after any entries with equal
    /// remaining work.
    pub fn job_arrival(&mut self, s: T, job: JobId, w: T) -> Result<(), PolicyError> {
        self.update_virtual_time(s)?;
        if self.slots.contains_key(&job) || self.is_late(job) {
            return Err(PolicyError::DuplicateJob(job));
        }
        let slot = (OrdScalar(self.served + w), self.next_seq());
        self.queue.insert(slot, (job, true));
        self.slots.insert(job, slot);
        Ok(())
    }

    /// When the head of the virtual queue finishes: `t + w_0 * |O|`.
    pub fn next_virtual_completion(&self) -> Option<T> {
        let ((tag, _), _) = self.queue.first_key_value()?;
        let head = (tag.0 - self.served).max(T::zero());
        Some(self.clock + head * T::from_count(self.queue.len()))
    }

    /// Removes the head of the virtual queue at time `s`; if it is still
    /// present in the real system it becomes late.
    pub fn virtual_completion(&mut self, s: T) -> Result<(), PolicyError> {
        self.update_virtual_time(s)?;
        let Some(((tag, _), (job, active))) = self.queue.pop_first() else {
            return Err(PolicyError::NoPendingEvent(s.as_f64()));
        };
        let remaining = tag.0 - self.served;
        if remaining.abs() > T::virtual_tolerance() {
            return Err(PolicyError::VirtualInconsistency {
                time: s.as_f64(),
                job,
                remaining: remaining.as_f64(),
            });
        }
        self.slots.remove(&job);
        if active {
            let seq = self.next_seq();
            self.late.insert(seq, job);
            self.late_order.insert(job, seq);
        }
        if self.queue.is_empty() {
            self.served = T::zero();
        }
        Ok(())
    }

    /// Marks `job` as really completed: a queued entry is kept but flagged
    /// inactive, a late job leaves the late set.
    pub fn real_completion(&mut self, job: JobId) -> Result<(), PolicyError> {
        if let Some(slot) = self.slots.get(&job) {
            let entry = self.queue.get_mut(slot).expect("slot index in sync");
            if !entry.1 {
                return Err(PolicyError::UnknownJob(job));
            }
            entry.1 = false;
            return Ok(());
        }
        let seq = self
            .late_order
            .remove(&job)
            .ok_or(PolicyError::UnknownJob(job))?;
        self.late.remove(&seq);
        Ok(())
    }

    /// The allocation for the current state.
    pub fn process_job(&self, mode: LateMode) -> Allocation<T> {
        if !self.late.is_empty() {
            return match mode {
                LateMode::Shared => Allocation::shared(self.late.values().copied()),
                LateMode::Sequential => {
                    Allocation::single(*self.late.values().next().expect("non-empty"))
                }
            };
        }
        self.queue
            .values()
            .find(|(_, active)| *active)
            .map_or_else(Allocation::empty, |&(job, _)| Allocation::single(job))
    }
}

/// FSPE (sequential late jobs) or FSPE+PS (shared late jobs).
#[derive(Clone, Debug)]
pub struct Fspe<T> {
    state: FspeState<T>,
    mode: LateMode,
}

impl<T: Scalar> Fspe<T> {
    pub fn new(mode: LateMode) -> Self {
        Fspe {
            state: FspeState::new(),
            mode,
        }
    }

    pub fn state(&self) -> &FspeState<T> {
        &self.state
    }
}

impl<T: Scalar> Policy<T> for Fspe<T> {
    fn name(&self) -> &'static str {
        match self.mode {
            LateMode::Sequential => "fspe",
            LateMode::Shared => "fspe+ps",
        }
    }

    fn on_arrival(&mut self, now: T, job: JobId, size_hint: T) -> Result<(), PolicyError> {
        self.state.job_arrival(now, job, size_hint)
    }

    fn on_real_completion(&mut self, now: T, job: JobId) -> Result<(), PolicyError> {
        check_time(now, self.state.clock)?;
        self.state.real_completion(job)
    }

    fn next_internal_event(&self) -> Option<T> {
        self.state.next_virtual_completion()
    }

    fn on_internal_event(&mut self, now: T) -> Result<(), PolicyError> {
        self.state.virtual_completion(now)
    }

    fn allocate(&mut self) -> Allocation<T> {
        self.state.process_job(self.mode)
    }
}
