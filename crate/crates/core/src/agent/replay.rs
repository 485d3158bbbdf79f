use rand::Rng;

/// One stored step with encoded states.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0 }
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `n` distinct transitions drawn uniformly (fewer if the buffer is smaller).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        let n = n.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), n).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(r: f64) -> Transition {
        Transition { state: vec![], action: 0, reward: r, next: vec![], terminal: false }
    }

    #[test]
    fn overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        (0..5).for_each(|i| b.push(t(i as f64)));
        let mut r: Vec<f64> = b.items.iter().map(|x| x.reward).collect();
        r.sort_by(f64::total_cmp);
        assert_eq!(r, vec![2.0, 3.0, 4.0]);
    }

    proptest! {
        #[test]
        fn size_bounded_and_samples_distinct(cap in 1usize..50, pushes in 0usize..200, n in 1usize..60, seed: u64) {
            let mut b = ReplayBuffer::new(cap);
            (0..pushes).for_each(|i| b.push(t(i as f64)));
            prop_assert!(b.len() <= cap);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = b.sample(n, &mut rng);
            prop_assert_eq!(s.len(), n.min(b.len()));
            let mut seen: Vec<f64> = s.iter().map(|x| x.reward).collect();
            seen.sort_by(f64::total_cmp);
            seen.dedup();
            prop_assert_eq!(seen.len(), s.len());
        }
    }
}
