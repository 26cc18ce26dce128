use super::QueryToken;
use std::collections::VecDeque;

/// FIFO of per-frame top-K query sets.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryQueue {
    depth: usize,
    k: usize,
    slots: VecDeque<Vec<QueryToken>>,
}

impl Default for MemoryQueue {
    fn default() -> Self {
        MemoryQueue::new(3, 256)
    }
}

impl MemoryQueue {
    pub fn new(depth: usize, k: usize) -> Self {
        MemoryQueue {
            depth,
            k,
            slots: VecDeque::with_capacity(depth + 1),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Keep the `k` most confident tokens of `frame` (ties keep input order;
    /// missing confidence ranks as 0), then enqueue, evicting the oldest frame
    /// once more than `depth` are held.
    pub fn push(&mut self, frame: Vec<QueryToken>) {
        self.slots.push_back(top_k(frame, self.k));
        while self.slots.len() > self.depth {
            self.slots.pop_front();
        }
    }

    /// Stored frames oldest first, then `current`.
    pub fn context(&self, current: &[QueryToken]) -> Vec<QueryToken> {
        self.slots
            .iter()
            .flatten()
            .chain(current)
            .cloned()
            .collect()
    }

    pub fn slots(&self) -> impl Iterator<Item = &[QueryToken]> {
        self.slots.iter().map(|s| s.as_slice())
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn clear(&mut self) {
        self.slots.clear();
    }
}

/// Highest-confidence `k` tokens in descending confidence, stable on ties.
pub fn top_k(mut frame: Vec<QueryToken>, k: usize) -> Vec<QueryToken> {
    let conf = |q: &QueryToken| q.confidence.unwrap_or(0.0);
    frame.sort_by(|a, b| conf(b).total_cmp(&conf(a)));
    frame.truncate(k);
    frame
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(tag: f64, confs: &[f64]) -> Vec<QueryToken> {
        confs
            .iter()
            .map(|&c| QueryToken::new(vec![tag], [0.0; 3], Some(c)))
            .collect()
    }

    #[test]
    fn keeps_largest_k() {
        let confs: Vec<f64> = (0..300).map(|i| ((i * 37) % 300) as f64 / 300.0).collect();
        let mut q = MemoryQueue::default();
        q.push(frame(0.0, &confs));
        let stored = q.slots().next().unwrap();
        assert_eq!(stored.len(), 256);
        let mut sorted = confs.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let got: Vec<f64> = stored.iter().map(|t| t.confidence.unwrap()).collect();
        assert_eq!(got, sorted[..256]);
    }

    #[test]
    fn fifo_eviction() {
        let mut q = MemoryQueue::new(3, 4);
        for i in 1..=5 {
            q.push(frame(i as f64, &[0.5]));
        }
        let tags: Vec<f64> = q.slots().map(|s| s[0].embedding[0]).collect();
        assert_eq!(tags, vec![3.0, 4.0, 5.0]);
    }

    #[test]
    fn empty_frame_occupies_slot() {
        let mut q = MemoryQueue::new(2, 4);
        q.push(frame(1.0, &[0.1]));
        q.push(vec![]);
        q.push(vec![]);
        assert_eq!(q.len(), 2);
        assert!(q.context(&[]).is_empty());
    }

    #[test]
    fn context_order() {
        let mut q = MemoryQueue::new(3, 8);
        assert_eq!(q.context(&frame(9.0, &[0.2])).len(), 1);
        q.push(frame(1.0, &[0.3, 0.9]));
        q.push(frame(2.0, &[0.1]));
        let ctx = q.context(&frame(9.0, &[0.2]));
        let tags: Vec<f64> = ctx.iter().map(|t| t.embedding[0]).collect();
        assert_eq!(tags, vec![1.0, 1.0, 2.0, 9.0]);
    }

    #[test]
    fn ties_keep_input_order() {
        let toks: Vec<QueryToken> = (0..5)
            .map(|i| QueryToken::new(vec![i as f64], [0.0; 3], Some(0.5)))
            .collect();
        let kept = top_k(toks, 3);
        let ids: Vec<f64> = kept.iter().map(|t| t.embedding[0]).collect();
        assert_eq!(ids, vec![0.0, 1.0, 2.0]);
    }
}
