//! Scheduling disciplines behind the [`Policy`](crate::engine::Policy)
//! contract.
//!
//! Size-oblivious: [`Fifo`], [`Ps`], [`Las`]. Size-based: [`Srpte`] (and
//! SRPT, which is SRPTE fed true sizes), and [`Fspe`] in its two late-job
//! modes, FSPE and FSPE+PS.

mod fifo;
mod fspe;
mod las;
mod ps;
mod srpte;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use fifo::Fifo;
pub use fspe::{Fspe, FspeState, LateMode, VirtualEntry};
pub use las::Las;
pub use ps::Ps;
pub use srpte::Srpte;

use crate::engine::Policy;
use crate::scalar::Scalar;
use crate::workload::JobId;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("job {0} is not known to the policy")]
    UnknownJob(JobId),
    #[error("job {0} arrived twice")]
    DuplicateJob(JobId),
    #[error("time went backwards: {now} < {last}")]
    TimeReversal { now: f64, last: f64 },
    #[error("virtual completion at t={time}: head job {job} still has {remaining} virtual work left")]
    VirtualInconsistency {
        time: f64,
        job: JobId,
        remaining: f64,
    },
    #[error("internal event at t={0} but none is pending")]
    NoPendingEvent(f64),
}

/// Canonical policy names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Fifo,
    Ps,
    Las,
    Srpt,
    Srpte,
    Fspe,
    FspePs,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Fifo,
        PolicyKind::Ps,
        PolicyKind::Las,
        PolicyKind::Srpt,
        PolicyKind::Srpte,
        PolicyKind::Fspe,
        PolicyKind::FspePs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Fifo => "fifo",
            PolicyKind::Ps => "ps",
            PolicyKind::Las => "las",
            PolicyKind::Srpt => "srpt",
            PolicyKind::Srpte => "srpte",
            PolicyKind::Fspe => "fspe",
            PolicyKind::FspePs => "fspe+ps",
        }
    }

    pub fn build<T: Scalar>(self) -> Box<dyn Policy<T> + Send> {
        match self {
            PolicyKind::Fifo => Box::new(Fifo::new()),
            PolicyKind::Ps => Box::new(Ps::new()),
            PolicyKind::Las => Box::new(Las::new()),
            PolicyKind::Srpt => Box::new(Srpte::exact()),
            PolicyKind::Srpte => Box::new(Srpte::new()),
            PolicyKind::Fspe => Box::new(Fspe::new(LateMode::Sequential)),
            PolicyKind::FspePs => Box::new(Fspe::new(LateMode::Shared)),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                format!("unknown policy '{s}' (expected fifo, ps, las, srpt, srpte, fspe, fspe+ps)")
            })
    }
}

fn check_time<T: Scalar>(now: T, last: T) -> Result<(), PolicyError> {
    if now < last - T::time_tolerance() {
        Err(PolicyError::TimeReversal {
            now: now.as_f64(),
            last: last.as_f64(),
        })
    } else {
        Ok(())
    }
}
