//! Exhaustive exact inner-product search.

use alloc::string::String;
use alloc::vec::Vec;

use crate::mat::dot_f32;
use crate::{CoreError, Result};

use super::{SearchResult, TopAccumulator};

#[derive(Debug, Clone)]
pub struct FlatIndex {
    d: usize,
    ids: Vec<String>,
    matrix: Vec<f32>,
}

impl FlatIndex {
    pub(crate) fn new(ids: Vec<String>, matrix: Vec<f32>, d: usize) -> Self {
        debug_assert_eq!(matrix.len(), ids.len() * d);
        FlatIndex { d, ids, matrix }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Exact top-`depth` of one query over every stored row.
    pub fn search_one(&self, query: &[f32], depth: usize) -> Result<SearchResult> {
        let mut acc = TopAccumulator::new(depth);
        for (r, id) in self.ids.iter().enumerate() {
            let row = &self.matrix[r * self.d..(r + 1) * self.d];
            let score = dot_f32(query, row);
            if !score.is_finite() {
                return Err(CoreError::NonFiniteScore);
            }
            acc.push(score, id);
        }
        Ok(acc.into_hits())
    }
}
