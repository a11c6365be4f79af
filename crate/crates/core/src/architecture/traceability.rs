//! Mapping between design elements and the runtime objects built for them.

use std::collections::{BTreeMap, BTreeSet};

use crate::ids::ObjectId;
use crate::runtime::{SystemTrace, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("trace event {seq} comes from {id}, which no design element owns")]
pub struct UnknownObject {
    pub id: ObjectId,
    pub seq: u64,
}

/// Forward: design name → runtime objects. Backward: object → design name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceabilityMap {
    forward: BTreeMap<String, BTreeSet<ObjectId>>,
    backward: BTreeMap<ObjectId, String>,
}

impl TraceabilityMap {
    /// Declare a design element, possibly with no objects yet.
    pub fn declare(&mut self, name: &str) {
        self.forward.entry(name.to_owned()).or_default();
    }

    /// Record that `id` realizes `name`.
    ///
    /// Panics if `id` is already attributed to a different element: the
    /// backward map is single-valued by construction.
    pub fn insert(&mut self, name: &str, id: ObjectId) {
        if let Some(prev) = self.backward.insert(id, name.to_owned()) {
            assert_eq!(prev, name, "{id} mapped to both `{prev}` and `{name}`");
        }
        self.forward.entry(name.to_owned()).or_default().insert(id);
    }

    pub fn forward(&self, name: &str) -> Option<&BTreeSet<ObjectId>> {
        self.forward.get(name)
    }

    pub fn backward(&self, id: ObjectId) -> Option<&str> {
        self.backward.get(&id).map(String::as_str)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.forward.keys().map(String::as_str)
    }

    pub fn objects(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.backward.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.backward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backward.is_empty()
    }

    /// Forward sets are pairwise disjoint and agree with the backward map.
    pub fn is_consistent(&self) -> bool {
        let total: usize = self.forward.values().map(BTreeSet::len).sum();
        total == self.backward.len()
            && self
                .forward
                .iter()
                .all(|(name, ids)| ids.iter().all(|id| self.backward(*id) == Some(name)))
    }
}

/// Split a trace into one event stream per design element. Every declared
/// element gets a stream, empty if it emitted nothing.
pub fn trace_to_design(
    map: &TraceabilityMap,
    trace: &SystemTrace,
) -> Result<BTreeMap<String, Vec<TraceEvent>>, UnknownObject> {
    let mut streams: BTreeMap<String, Vec<TraceEvent>> =
        map.names().map(|n| (n.to_owned(), Vec::new())).collect();
    for e in trace.iter() {
        let name = map.backward(e.source).ok_or(UnknownObject {
            id: e.source,
            seq: e.seq,
        })?;
        streams
            .get_mut(name)
            .expect("backward names are declared")
            .push(e.clone());
    }
    Ok(streams)
}
