use std::sync::Arc;

use super::Array;
use crate::error::{Error, Result};
use crate::Scalar;

pub type ParamId = usize;

/// Named, ordered collection of learnable arrays.
///
/// Values sit behind `Arc` so graphs can bind them without copying; updates go
/// through [`ParamStore::get_mut`], which clones only if a graph still holds a
/// reference.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<S> {
    names: Vec<String>,
    values: Vec<Arc<Array<S>>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array<S>) -> ParamId {
        self.names.push(name.into());
        self.values.push(Arc::new(value));
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Array<S> {
        &self.values[id]
    }

    pub(crate) fn get_arc(&self, id: ParamId) -> Arc<Array<S>> {
        Arc::clone(&self.values[id])
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array<S> {
        Arc::make_mut(&mut self.values[id])
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array<S>)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().map(|v| &**v))
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Replaces the value of `name`, checking the shape.
    pub fn set(&mut self, name: &str, value: Array<S>) -> Result<()> {
        let id = self
            .id(name)
            .ok_or_else(|| Error::invalid(format!("unknown parameter {name}")))?;
        if self.values[id].shape() != value.shape() {
            return Err(Error::shape(
                "ParamStore::set",
                self.values[id].shape(),
                value.shape(),
            ));
        }
        self.values[id] = Arc::new(value);
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
