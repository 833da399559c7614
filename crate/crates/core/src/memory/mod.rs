//! Generation-time memory planning: the greedy placement manager, the shared
//! bank model and the index algebra of the kernel layouts.

mod banks;
mod layout;
mod manager;

pub use banks::{bank_of, conflict_count, extra_transactions, ideal_transactions, BANK_WIDTH, NUM_BANKS};
pub use layout::{
    deconflict_layout, global_element, lines_index, planar_lane, ElementLayout, MAX_LINES_VARS,
};
pub use manager::{
    LineRegister, Location, LogEvent, ManagerState, Priority, SharedPartitions, SlotRecord, Space,
    VarId,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("shared address {0} is not 4-byte aligned")]
    Misaligned(usize),
    #[error("index outside its range")]
    IndexRange,
    #[error("elements per block must be positive")]
    ZeroElements,
    #[error("{m} points per line exceed the warp size {warp_size}")]
    LineTooLong { m: usize, warp_size: usize },
    #[error("no padding below one bank sweep removes every conflict")]
    NoPadding,
    #[error("padded layout needs {needed} bytes, capacity is {capacity}")]
    Capacity { needed: usize, capacity: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum ManagerError {
    #[error("unknown variable {0}")]
    UnknownVariable(VarId),
    #[error("variable {0} is not resident in shared memory")]
    NotShared(VarId),
    #[error("cannot move variable {var} from {from:?} to {to:?} in this direction")]
    Direction { var: VarId, from: Priority, to: Priority },
}
