use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One observed node transition from an elite trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSample {
    pub node: usize,
    pub observation: Vec<f64>,
    pub next_node: usize,
}

/// The transitions harvested from one iteration's elite trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationBundle {
    pub iteration: u64,
    pub samples: Vec<TransitionSample>,
}

impl ObservationBundle {
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        for s in &self.samples {
            for node in [s.node, s.next_node] {
                if node >= n_nodes {
                    return Err(Error::NodeOutOfRange { node, n_nodes });
                }
            }
        }
        Ok(())
    }
}

/// Bounded first-in first-out store of the most recent bundles.
#[derive(Debug, Clone, PartialEq)]
pub struct FifoKernelQueue {
    capacity: usize,
    bundles: VecDeque<ObservationBundle>,
}

/// A sample located in the queue: its 1-based bundle position (oldest = 1)
/// and a key stable across pushes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueuedSample<'a> {
    pub position: usize,
    pub key: SampleKey,
    pub sample: &'a TransitionSample,
}

/// Identifies a sample by its bundle's iteration and index in the bundle.
pub type SampleKey = (u64, u32);

impl FifoKernelQueue {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("capacity", "must be at least 1"));
        }
        Ok(FifoKernelQueue {
            capacity,
            bundles: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    /// Appends a bundle, evicting and returning the oldest when full.
    pub fn push(&mut self, bundle: ObservationBundle) -> Option<ObservationBundle> {
        let evicted = if self.bundles.len() == self.capacity {
            self.bundles.pop_front()
        } else {
            None
        };
        self.bundles.push_back(bundle);
        evicted
    }

    /// Bundles from oldest to newest.
    pub fn bundles(&self) -> impl Iterator<Item = &ObservationBundle> {
        self.bundles.iter()
    }

    /// All samples leaving `node`, oldest bundle first.
    pub fn samples_for_node(&self, node: usize) -> impl Iterator<Item = QueuedSample<'_>> {
        self.bundles.iter().enumerate().flat_map(move |(b, bundle)| {
            bundle
                .samples
                .iter()
                .enumerate()
                .filter(move |(_, s)| s.node == node)
                .map(move |(i, s)| QueuedSample {
                    position: b + 1,
                    key: (bundle.iteration, i as u32),
                    sample: s,
                })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(iteration: u64, obs: f64) -> ObservationBundle {
        ObservationBundle {
            iteration,
            samples: vec![
                TransitionSample {
                    node: 0,
                    observation: vec![obs],
                    next_node: 1,
                },
                TransitionSample {
                    node: 1,
                    observation: vec![obs],
                    next_node: 0,
                },
            ],
        }
    }

    #[test]
    fn evicts_oldest() {
        let mut q = FifoKernelQueue::new(2).unwrap();
        assert!(q.push(bundle(0, 0.0)).is_none());
        assert!(q.push(bundle(1, 1.0)).is_none());
        let ev = q.push(bundle(2, 2.0)).unwrap();
        assert_eq!(ev.iteration, 0);
        assert_eq!(q.len(), 2);
        let pos: Vec<_> = q
            .samples_for_node(0)
            .map(|s| (s.position, s.sample.observation[0]))
            .collect();
        assert_eq!(pos, vec![(1, 1.0), (2, 2.0)]);
    }

    #[test]
    fn zero_capacity_rejected() {
        assert!(FifoKernelQueue::new(0).is_err());
    }

    #[test]
    fn bundle_node_range() {
        assert!(bundle(0, 0.0).validate(2).is_ok());
        assert!(bundle(0, 0.0).validate(1).is_err());
    }
}
