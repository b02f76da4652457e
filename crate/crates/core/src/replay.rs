//! Fixed-capacity FIFO experience replay shared by all agents.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::JointConfig;
use crate::error::{Error, Result};

pub const DEFAULT_CAPACITY: usize = 50_000;

/// One decision step: `(I_j, C_j, R_{j+1}, I_{j+1}, terminal)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub joint_action: JointConfig,
    /// Combined extrinsic and intrinsic reward.
    pub reward: f64,
    /// Per-agent rewards, present only when agents are rewarded separately.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_rewards: Option<[f64; 4]>,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

impl Transition {
    /// Reward seen by agent `k`.
    pub fn reward_for(&self, k: usize) -> f64 {
        self.agent_rewards.map_or(self.reward, |r| r[k])
    }

    pub fn is_finite(&self) -> bool {
        self.reward.is_finite()
            && self.agent_rewards.map_or(true, |r| r.iter().all(|x| x.is_finite()))
            && self.state.iter().chain(&self.next_state).all(|x| x.is_finite())
    }
}

/// An item tagged with its insertion sequence number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tagged<T> {
    pub seq: u64,
    pub item: T,
}

/// Ring buffer: once full, each push replaces the oldest element.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T = Transition> {
    slots: Vec<Tagged<T>>,
    capacity: usize,
    cursor: usize,
    next_seq: u64,
}

impl<T: Clone> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidInput("replay capacity must be >= 1".into()));
        }
        Ok(Self {
            slots: Vec::with_capacity(capacity.min(4096)),
            capacity,
            cursor: 0,
            next_seq: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Total number of pushes so far.
    pub fn pushed(&self) -> u64 {
        self.next_seq
    }

    pub fn push(&mut self, item: T) {
        let tagged = Tagged {
            seq: self.next_seq,
            item,
        };
        self.next_seq += 1;
        if self.slots.len() < self.capacity {
            self.slots.push(tagged);
        } else {
            self.slots[self.cursor] = tagged;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Items from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Tagged<T>> {
        let split = if self.slots.len() < self.capacity { 0 } else { self.cursor };
        self.slots[split..].iter().chain(self.slots[..split].iter())
    }

    pub fn oldest(&self) -> Option<&Tagged<T>> {
        self.iter().next()
    }

    /// `n` items drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Tagged<T>>> {
        if self.slots.is_empty() {
            return Err(Error::InvalidInput("cannot sample an empty replay buffer".into()));
        }
        Ok((0..n).map(|_| &self.slots[rng.random_range(0..self.slots.len())]).collect())
    }
}

impl<T: Clone + Serialize> ReplayBuffer<T> {
    /// Writes the buffer oldest-first as JSON lines.
    pub fn dump_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for t in self.iter() {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn push_and_evict() {
        let mut b = ReplayBuffer::new(3).unwrap();
        b.push(1);
        assert_eq!(b.len(), 1);
        for i in 2..=4 {
            b.push(i);
        }
        let items: Vec<i32> = b.iter().map(|t| t.item).collect();
        assert_eq!(items, vec![2, 3, 4]);
        assert_eq!(b.oldest().unwrap().seq, 1);
    }

    #[test]
    fn sample_edge_cases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut b = ReplayBuffer::new(4).unwrap();
        assert!(b.sample(1, &mut rng).is_err());
        b.push(7);
        assert!(b.sample(5, &mut rng).unwrap().iter().all(|t| t.item == 7));
        assert!(b.sample(0, &mut rng).unwrap().is_empty());
        assert!(ReplayBuffer::<i32>::new(0).is_err());
    }

    #[test]
    fn dump_is_oldest_first() {
        let mut b = ReplayBuffer::new(2).unwrap();
        for i in 0..3 {
            b.push(i);
        }
        let mut out = Vec::new();
        b.dump_jsonl(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "{\"seq\":1,\"item\":1}\n{\"seq\":2,\"item\":2}\n");
    }
}
