use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Partition of the coordinates 0..d into contiguous named blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    ids: Vec<String>,
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockSpec {
    pub fn new<S: Into<String>>(blocks: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut ids = Vec::new();
        let mut dims = Vec::new();
        let mut offsets = Vec::new();
        let mut total = 0;
        for (id, d) in blocks {
            let id = id.into();
            if d == 0 {
                return Err(Error::Domain(format!("block '{id}' has dimension 0")));
            }
            if ids.contains(&id) {
                return Err(Error::Domain(format!("duplicate block id '{id}'")));
            }
            offsets.push(total);
            total += d;
            ids.push(id);
            dims.push(d);
        }
        if ids.is_empty() {
            return Err(Error::Domain("a block spec needs at least one block".into()));
        }
        Ok(BlockSpec { ids, dims, offsets })
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.offsets.last().unwrap() + self.dims.last().unwrap()
    }

    pub fn dim(&self, block: usize) -> usize {
        self.dims[block]
    }

    pub fn id(&self, block: usize) -> &str {
        &self.ids[block]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|b| b == id)
    }

    pub fn range(&self, block: usize) -> std::ops::Range<usize> {
        self.offsets[block]..self.offsets[block] + self.dims[block]
    }

    /// Block that owns coordinate `k`.
    pub fn block_of(&self, k: usize) -> Option<usize> {
        if k >= self.total_dim() {
            return None;
        }
        Some(self.offsets.partition_point(|&o| o <= k) - 1)
    }
}
