//! FIFO of capture ids waiting for analysis, drained by a fixed number of
//! workers. An id is never pending and in flight at the same time.

use std::collections::{HashSet, VecDeque};
use std::sync::Mutex;

use tokio::sync::Notify;

#[derive(Default)]
struct State {
    pending: VecDeque<String>,
    in_flight: HashSet<String>,
}

pub struct JobQueue {
    state: Mutex<State>,
    ready: Notify,
    workers: usize,
}

impl JobQueue {
    pub fn new(workers: usize) -> Self {
        JobQueue {
            state: Mutex::new(State::default()),
            ready: Notify::new(),
            workers: workers.max(1),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Queues `id` unless it is already pending or running. Returns whether
    /// it was added.
    pub fn enqueue(&self, id: &str) -> bool {
        let mut s = self.state.lock().unwrap();
        if s.in_flight.contains(id) || s.pending.iter().any(|p| p == id) {
            return false;
        }
        s.pending.push_back(id.to_string());
        drop(s);
        self.ready.notify_one();
        true
    }

    /// Waits for the next id and marks it in flight.
    pub async fn next(&self) -> String {
        loop {
            if let Some(id) = self.try_next() {
                return id;
            }
            self.ready.notified().await;
        }
    }

    pub fn try_next(&self) -> Option<String> {
        let mut s = self.state.lock().unwrap();
        let id = s.pending.pop_front()?;
        s.in_flight.insert(id.clone());
        let more = !s.pending.is_empty();
        drop(s);
        if more {
            // pass the wake-up on to another idle worker
            self.ready.notify_one();
        }
        Some(id)
    }

    pub fn finish(&self, id: &str) {
        self.state.lock().unwrap().in_flight.remove(id);
    }

    pub fn pending(&self) -> Vec<String> {
        self.state.lock().unwrap().pending.iter().cloned().collect()
    }

    pub fn in_flight(&self) -> Vec<String> {
        let mut v: Vec<String> = self.state.lock().unwrap().in_flight.iter().cloned().collect();
        v.sort();
        v
    }

    pub fn is_idle(&self) -> bool {
        let s = self.state.lock().unwrap();
        s.pending.is_empty() && s.in_flight.is_empty()
    }
}
