//! Passive entity components.
//!
//! An entity has no thread of control. It is confined to its host's context
//! and every access runs there, one at a time. Concurrent readers are not
//! supported either: access is exclusive.

use crate::ids::ContextId;
use crate::runtime::{current_context, ComponentHandle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("entity hosted on {host} accessed from {found:?}")]
pub struct WrongContext {
    pub host: ContextId,
    pub found: Option<ContextId>,
}

#[derive(Debug)]
pub struct PassiveEntity<S> {
    state: S,
    host: ContextId,
    depth: u32,
    max_depth: u32,
    accesses: u64,
}

impl<S> PassiveEntity<S> {
    /// An entity confined to the context of `host`.
    pub fn new(state: S, host: &ComponentHandle) -> Self {
        Self::hosted_on(state, host.context)
    }

    pub fn hosted_on(state: S, host: ContextId) -> Self {
        PassiveEntity {
            state,
            host,
            depth: 0,
            max_depth: 0,
            accesses: 0,
        }
    }

    pub fn host(&self) -> ContextId {
        self.host
    }

    /// Apply `action` to the state and return its result. Must be called
    /// from the host's context.
    pub fn access<R>(&mut self, action: impl FnOnce(&mut S) -> R) -> Result<R, WrongContext> {
        let found = current_context();
        if found != Some(self.host) {
            return Err(WrongContext {
                host: self.host,
                found,
            });
        }
        self.depth += 1;
        self.max_depth = self.max_depth.max(self.depth);
        let result = action(&mut self.state);
        self.depth -= 1;
        self.accesses += 1;
        Ok(result)
    }

    /// Highest number of simultaneously active accesses ever seen.
    pub fn max_reentrancy(&self) -> u32 {
        self.max_depth
    }

    pub fn access_count(&self) -> u64 {
        self.accesses
    }

    pub fn into_inner(self) -> S {
        self.state
    }
}
