//! Design-level description of a system and its canonical text form.

use std::collections::BTreeMap;
use std::fmt;

use crate::connectors::ConnectorKind;
use crate::runtime::{ConcurrencyType, End, RoleStereotype};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectorSpec {
    pub name: String,
    pub kind: ConnectorKind,
    pub capacity: Option<usize>,
    /// Key into the message-type registry.
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindingSpec {
    pub port: String,
    pub connector: String,
    pub end: End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentSpec {
    pub name: String,
    pub role: RoleStereotype,
    pub concurrency: ConcurrencyType,
    pub host: Option<String>,
    pub bindings: Vec<BindingSpec>,
    pub params: BTreeMap<String, String>,
}

impl ComponentSpec {
    pub fn new(
        name: impl Into<String>,
        role: RoleStereotype,
        concurrency: ConcurrencyType,
    ) -> Self {
        ComponentSpec {
            name: name.into(),
            role,
            concurrency,
            host: None,
            bindings: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn is_passive(&self) -> bool {
        !self.concurrency.is_active()
    }

    pub fn bind(mut self, port: &str, connector: &str, end: End) -> Self {
        self.bindings.push(BindingSpec {
            port: port.to_owned(),
            connector: connector.to_owned(),
            end,
        });
        self
    }

    pub fn hosted_by(mut self, host: &str) -> Self {
        self.host = Some(host.to_owned());
        self
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_owned(), value.to_string());
        self
    }

    pub fn binding(&self, port: &str) -> Option<&BindingSpec> {
        self.bindings.iter().find(|b| b.port == port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArchitectureSpec {
    pub connectors: Vec<ConnectorSpec>,
    pub components: Vec<ComponentSpec>,
}

impl ArchitectureSpec {
    pub fn connector(&self, name: &str) -> Option<&ConnectorSpec> {
        self.connectors.iter().find(|c| c.name == name)
    }

    pub fn component(&self, name: &str) -> Option<&ComponentSpec> {
        self.components.iter().find(|c| c.name == name)
    }

    /// Every binding to `connector` on the given end, as `(component, binding)`.
    pub fn bindings_to<'a>(
        &'a self,
        connector: &'a str,
        end: End,
    ) -> impl Iterator<Item = (&'a ComponentSpec, &'a BindingSpec)> + 'a {
        self.components.iter().flat_map(move |c| {
            c.bindings
                .iter()
                .filter(move |b| b.connector == connector && b.end == end)
                .map(move |b| (c, b))
        })
    }

    pub fn active_count(&self) -> usize {
        self.components.iter().filter(|c| !c.is_passive()).count()
    }

    /// Conduit objects an instantiation creates.
    pub fn conduit_count(&self) -> usize {
        self.connectors.iter().map(|c| c.kind.conduit_count()).sum()
    }
}

/// Canonical form: connectors first, then components, properties in a fixed
/// order, params sorted by key.
impl fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut gap = |f: &mut fmt::Formatter<'_>| {
            if !std::mem::take(&mut first) {
                writeln!(f)?;
            }
            Ok::<_, fmt::Error>(())
        };
        for c in &self.connectors {
            gap(f)?;
            writeln!(f, "connector {} {{", c.name)?;
            writeln!(f, "    kind {}", c.kind)?;
            if let Some(cap) = c.capacity {
                writeln!(f, "    capacity {cap}")?;
            }
            writeln!(f, "    message {}", c.message)?;
            writeln!(f, "}}")?;
        }
        for c in &self.components {
            gap(f)?;
            writeln!(f, "component {} {{", c.name)?;
            writeln!(f, "    role {}", c.role)?;
            writeln!(f, "    concurrency {}", c.concurrency)?;
            if let Some(host) = &c.host {
                writeln!(f, "    host {host}")?;
            }
            for b in &c.bindings {
                writeln!(f, "    bind {} -> {} as {}", b.port, b.connector, b.end)?;
            }
            for (k, v) in &c.params {
                writeln!(f, "    param {k} = {v}")?;
            }
            writeln!(f, "}}")?;
        }
        Ok(())
    }
}
