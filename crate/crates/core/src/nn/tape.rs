use crate::error::{Error, Result};

/// Holds the cache of the most recent forward pass until backward consumes it.
#[derive(Debug)]
pub struct Tape<C> {
    cache: Option<C>,
}

impl<C> Default for Tape<C> {
    fn default() -> Self {
        Self { cache: None }
    }
}

impl<C> Tape<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, cache: C) {
        self.cache = Some(cache);
    }

    pub fn is_recorded(&self) -> bool {
        self.cache.is_some()
    }

    /// Takes the recorded cache; fails with [`Error::State`] when backward
    /// runs before forward.
    pub fn take(&mut self) -> Result<C> {
        self.cache.take().ok_or(Error::State)
    }
}
