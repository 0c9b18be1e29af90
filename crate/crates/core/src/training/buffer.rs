use crate::agents::ActionLayout;
use crate::env::{ID_OBS_WIDTH, UAV_OBS_WIDTH};
use crate::error::{contract, Error, Result};
use crate::numkit::Rng;

/// One stored slot. All vectors are padded to `n_max` device slots.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Transition {
    /// Checks widths, that masked slots are exactly zero and that the reward
    /// is finite.
    pub fn validate(&self, layout: &ActionLayout) -> Result<()> {
        let n = layout.n_max;
        let sw = UAV_OBS_WIDTH + ID_OBS_WIDTH * n;
        contract!(
            self.mask.len() == n
                && self.state.len() == sw
                && self.next_state.len() == sw
                && self.action.len() == layout.width(),
            "transition widths do not match {n} slots"
        );
        contract!(self.reward.is_finite(), "non-finite reward {}", self.reward);
        for j in (0..n).filter(|&j| !self.mask[j]) {
            let s = UAV_OBS_WIDTH + ID_OBS_WIDTH * j..UAV_OBS_WIDTH + ID_OBS_WIDTH * (j + 1);
            let a = [layout.cpu_index(j), layout.offload_index(j)];
            let zero = self.state[s.clone()].iter().all(|&x| x == 0.0)
                && self.next_state[s].iter().all(|&x| x == 0.0)
                && a.iter().all(|&i| self.action[i] == 0.0)
                && self.action[layout.uplink_range(j)].iter().all(|&x| x == 0.0)
                && self.action[layout.downlink_range(j)].iter().all(|&x| x == 0.0);
            contract!(zero, "masked slot {j} is not zero");
        }
        Ok(())
    }
}

/// Fixed-capacity FIFO replay memory with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    layout: ActionLayout,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, layout: ActionLayout) -> Result<Self> {
        contract!(capacity > 0, "replay capacity must be positive");
        Ok(Self {
            capacity,
            layout,
            items: Vec::new(),
            next: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Validates and stores `t`, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        t.validate(&self.layout)?;
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    /// `count` draws, uniform with replacement.
    pub fn sample(&self, count: usize, rng: &mut Rng) -> Result<Vec<&Transition>> {
        if self.items.is_empty() {
            return Err(Error::State("cannot sample from an empty replay buffer".into()));
        }
        Ok((0..count).map(|_| &self.items[rng.index(self.items.len())]).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(r: f64) -> Transition {
        Transition {
            state: vec![r; 10],
            action: vec![0.5; 5],
            reward: r,
            next_state: vec![r; 10],
            mask: vec![true],
        }
    }

    fn buffer(cap: usize) -> ReplayBuffer {
        ReplayBuffer::new(cap, ActionLayout::solution_only(1)).unwrap()
    }

    #[test]
    fn single_item() {
        let mut b = buffer(1);
        b.push(item(1.0)).unwrap();
        let s = b.sample(3, &mut Rng::new(0)).unwrap();
        assert!(s.iter().all(|t| t.reward == 1.0));
    }

    #[test]
    fn fifo_eviction() {
        let mut b = buffer(3);
        for i in 0..4 {
            b.push(item(i as f64)).unwrap();
        }
        let r: Vec<f64> = b.iter().map(|t| t.reward).collect();
        assert_eq!(b.len(), 3);
        assert!(!r.contains(&0.0));
    }

    #[test]
    fn empty_sample_is_state_error() {
        assert!(matches!(buffer(2).sample(1, &mut Rng::new(0)), Err(Error::State(_))));
    }

    #[test]
    fn rejects_nonzero_masked_slot() {
        let mut b = ReplayBuffer::new(4, ActionLayout::solution_only(2)).unwrap();
        let mut t = Transition {
            state: vec![0.1; 17],
            action: vec![0.0; 7],
            reward: -1.0,
            next_state: vec![0.0; 17],
            mask: vec![true, false],
        };
        assert!(b.push(t.clone()).is_err());
        for x in &mut t.state[10..] {
            *x = 0.0;
        }
        b.push(t.clone()).unwrap();
        t.reward = f64::NAN;
        assert!(b.push(t).is_err());
    }

    #[test]
    fn uniform_chi_square() {
        let mut b = buffer(10);
        for i in 0..10 {
            b.push(item(i as f64)).unwrap();
        }
        let mut rng = Rng::new(42);
        let mut counts = [0usize; 10];
        for t in b.sample(100_000, &mut rng).unwrap() {
            counts[t.reward as usize] += 1;
        }
        let expected = 10_000.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99th percentile of χ² with 9 degrees of freedom.
        assert!(chi2 < 21.666, "χ² = {chi2}");
    }
}
