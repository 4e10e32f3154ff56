//! Bounded per-position transition queues shared by actors and the learner.

use ddz_model::Position;
use parking_lot::{Condvar, Mutex};
use rand::Rng;

use crate::episode::Transition;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub produced: u64,
    pub consumed: u64,
    pub resident: u64,
}

#[derive(Default)]
struct Inner {
    queues: [Vec<Transition>; 6],
    produced: [u64; 6],
    consumed: [u64; 6],
    closed: bool,
}

impl Inner {
    fn full(&self, capacity: usize) -> bool {
        self.queues.iter().any(|q| q.len() >= capacity)
    }

    fn ready(&self, batch: usize) -> Option<Position> {
        Position::ALL.into_iter().find(|p| self.queues[p.index()].len() >= batch)
    }
}

/// Six queues behind one lock. Producers block while any queue is at
/// capacity; since capacity is at least one batch, a full queue is always
/// drainable and the pair cannot deadlock.
pub struct TrajectoryBuffer {
    capacity: usize,
    inner: Mutex<Inner>,
    space: Condvar,
    data: Condvar,
}

impl TrajectoryBuffer {
    pub fn new(capacity: usize) -> Self {
        TrajectoryBuffer {
            capacity: capacity.max(1),
            inner: Mutex::new(Inner::default()),
            space: Condvar::new(),
            data: Condvar::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends one game's transitions, waiting for room first. Returns
    /// `false` without storing anything once the buffer is closed.
    pub fn push_episode(&self, transitions: Vec<Transition>) -> bool {
        let mut inner = self.inner.lock();
        while !inner.closed && inner.full(self.capacity) {
            self.space.wait(&mut inner);
        }
        if inner.closed {
            return false;
        }
        for t in transitions {
            let i = t.position.index();
            inner.produced[i] += 1;
            inner.queues[i].push(t);
        }
        self.data.notify_all();
        true
    }

    /// Removes `batch` transitions chosen uniformly without replacement from
    /// `position`'s queue; the rest keep their arrival order.
    pub fn take(&self, position: Position, batch: usize, rng: &mut impl Rng) -> Option<Vec<Transition>> {
        let mut inner = self.inner.lock();
        let out = take_from(&mut inner, position, batch, rng)?;
        self.space.notify_all();
        Some(out)
    }

    /// Waits until some position holds a full batch and takes it. Positions
    /// are scanned in fixed order. `None` once closed and nothing is ready.
    pub fn take_ready(&self, batch: usize, rng: &mut impl Rng) -> Option<(Position, Vec<Transition>)> {
        let mut inner = self.inner.lock();
        loop {
            if let Some(p) = inner.ready(batch) {
                let out = take_from(&mut inner, p, batch, rng).expect("queue holds a batch");
                self.space.notify_all();
                return Some((p, out));
            }
            if inner.closed {
                return None;
            }
            self.data.wait(&mut inner);
        }
    }

    pub fn ready(&self, batch: usize) -> Option<Position> {
        self.inner.lock().ready(batch)
    }

    pub fn close(&self) {
        self.inner.lock().closed = true;
        self.space.notify_all();
        self.data.notify_all();
    }

    pub fn counters(&self, position: Position) -> Counters {
        let inner = self.inner.lock();
        let i = position.index();
        Counters {
            produced: inner.produced[i],
            consumed: inner.consumed[i],
            resident: inner.queues[i].len() as u64,
        }
    }
}

fn take_from(inner: &mut Inner, position: Position, batch: usize, rng: &mut impl Rng) -> Option<Vec<Transition>> {
    let i = position.index();
    let queue = &mut inner.queues[i];
    if batch == 0 || queue.len() < batch {
        return None;
    }
    let order = rand::seq::index::sample(rng, queue.len(), batch).into_vec();
    let mut slot = vec![usize::MAX; queue.len()];
    for (s, &j) in order.iter().enumerate() {
        slot[j] = s;
    }
    let mut out: Vec<Option<Transition>> = (0..batch).map(|_| None).collect();
    for (j, t) in std::mem::take(queue).into_iter().enumerate() {
        match slot[j] {
            usize::MAX => queue.push(t),
            s => out[s] = Some(t),
        }
    }
    inner.consumed[i] += batch as u64;
    Some(out.into_iter().map(|t| t.expect("every slot filled")).collect())
}
