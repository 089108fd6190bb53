use std::collections::BTreeMap;

use crate::{NDArray, Result};

/// Gradients of the total loss with respect to named streams.
/// Contributions from several consumers of one stream are summed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradTable {
    entries: BTreeMap<String, NDArray>,
}

impl GradTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(&mut self, stream: &str, grad: NDArray) -> Result<()> {
        match self.entries.get_mut(stream) {
            Some(existing) => existing.add_assign(&grad)?,
            None => {
                self.entries.insert(stream.to_string(), grad);
            }
        }
        Ok(())
    }

    pub fn get(&self, stream: &str) -> Option<&NDArray> {
        self.entries.get(stream)
    }

    pub fn contains(&self, stream: &str) -> bool {
        self.entries.contains_key(stream)
    }

    pub fn streams(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contributions_sum() {
        let mut g = GradTable::new();
        g.accumulate("x", NDArray::from_vec(vec![2], vec![1.0, 2.0]).unwrap())
            .unwrap();
        g.accumulate("x", NDArray::from_vec(vec![2], vec![0.5, -2.0]).unwrap())
            .unwrap();
        assert_eq!(g.get("x").unwrap().data(), &[1.5, 0.0]);
        assert!(g.accumulate("x", NDArray::zeros(vec![3]).unwrap()).is_err());
    }
}
