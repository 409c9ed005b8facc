//! Best-first branch and bound with depth-first dives.
//!
//! Each popped node is dived depth-first along its cheaper half until it is
//! pruned, closed by a feasible cheapest completion, or fully decided; the
//! other half of every split goes back to the frontier. With several workers,
//! they share the incumbent and race on independently ordered searches.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicBool, AtomicI64, AtomicU64, Ordering as Mem};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::propagate::{Outcome, Propagator, State, UNBOUNDED};
use super::{CfModel, Solution, Status};
use crate::bitset::BitSet;
use crate::scalar::Scalar;
use crate::space::COST_SCALE;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<u64>,
    /// Portfolio size; worker 0 always runs the deterministic ordering.
    pub threads: usize,
    pub seed: u64,
    /// Frontier size beyond which new nodes are explored depth-first.
    pub frontier_limit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit: None,
            node_limit: None,
            threads: 1,
            seed: 0,
            frontier_limit: 200_000,
        }
    }
}

impl SolveOptions {
    pub fn with_time_limit(secs: f64) -> Self {
        SolveOptions {
            time_limit: Some(Duration::from_secs_f64(secs)),
            ..Self::default()
        }
    }
}

/// Single-threaded solve under a wall-clock budget.
pub fn solve<T: Scalar>(model: &CfModel<'_, T>, budget: Duration) -> Solution<T> {
    solve_with(
        model,
        &SolveOptions {
            time_limit: Some(budget),
            ..SolveOptions::default()
        },
    )
}

pub fn solve_with<T: Scalar>(model: &CfModel<'_, T>, opts: &SolveOptions) -> Solution<T> {
    let start = Instant::now();
    let shared = Shared {
        ub: AtomicI64::new(UNBOUNDED),
        best: Mutex::new(Best {
            values: None,
            point: None,
            q: UNBOUNDED,
            trace: Vec::new(),
        }),
        bound: Mutex::new((0, vec![(0.0, 0.0)])),
        stop: AtomicBool::new(false),
        timed_out: AtomicBool::new(false),
        start,
        deadline: opts.time_limit.map(|d| start + d),
        nodes: AtomicU64::new(0),
        node_limit: opts.node_limit,
    };
    let threads = opts.threads.max(1);
    let proved = if threads == 1 {
        Worker::new(model, &shared, opts, 0).run()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|k| {
                    let shared = &shared;
                    s.spawn(move || Worker::new(model, shared, opts, k).run())
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).fold(false, |a, b| a | b)
        })
    };

    let best = shared.best.into_inner().expect("poisoned");
    let (bound_q, mut bound_trace) = shared.bound.into_inner().expect("poisoned");
    let solve_time = start.elapsed().as_secs_f64();
    let status = match (proved, best.values.is_some()) {
        (true, true) => Status::Optimal,
        (true, false) => Status::Infeasible,
        (false, has) if !shared.timed_out.load(Mem::Relaxed) && has => Status::Feasible,
        _ => Status::Timeout,
    };
    let bound = match status {
        Status::Optimal => best.q as f64 / COST_SCALE,
        Status::Infeasible => f64::INFINITY,
        _ => bound_q as f64 / COST_SCALE,
    };
    if bound_trace.last().is_none_or(|&(_, b)| b < bound) {
        bound_trace.push((solve_time, bound));
    }
    Solution {
        status,
        objective: best.values.as_ref().map(|v| model.space.cost_of(v)),
        objective_quantized: best.values.as_ref().map(|_| best.q),
        values: best.values,
        point: best.point,
        bound,
        trace: best.trace,
        bound_trace,
        nodes: shared.nodes.load(Mem::Relaxed),
        build_time: model.build_time.as_secs_f64(),
        solve_time,
    }
}

struct Best<T> {
    values: Option<Vec<usize>>,
    point: Option<Vec<T>>,
    q: i64,
    trace: Vec<(f64, f64)>,
}

struct Shared<T> {
    ub: AtomicI64,
    best: Mutex<Best<T>>,
    /// Best proven bound (quantized) and its trace in cost units.
    bound: Mutex<(i64, Vec<(f64, f64)>)>,
    stop: AtomicBool,
    timed_out: AtomicBool,
    start: Instant,
    deadline: Option<Instant>,
    nodes: AtomicU64,
    node_limit: Option<u64>,
}

impl<T> Shared<T> {
    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn raise_bound(&self, q: i64) {
        let mut b = self.bound.lock().expect("poisoned");
        if q > b.0 {
            b.0 = q;
            let t = self.elapsed();
            b.1.push((t, q as f64 / COST_SCALE));
        }
    }
}

struct Pending {
    lb: i64,
    depth: usize,
    seq: u64,
    domains: Vec<BitSet>,
}

impl PartialEq for Pending {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Pending {
    /// Max-heap order: lowest bound, then deepest, then oldest.
    fn cmp(&self, o: &Self) -> Ordering {
        o.lb.cmp(&self.lb)
            .then(self.depth.cmp(&o.depth))
            .then(o.seq.cmp(&self.seq))
    }
}

struct Worker<'s, 'm, 'a, T> {
    model: &'m CfModel<'a, T>,
    prop: Propagator<'m, 'a, T>,
    shared: &'s Shared<T>,
    rng: Option<ChaCha8Rng>,
    heap: BinaryHeap<Pending>,
    stack: Vec<Pending>,
    seq: u64,
    counts: Vec<usize>,
    alive: Vec<BitSet>,
    frontier_limit: usize,
}

impl<'s, 'm, 'a, T: Scalar> Worker<'s, 'm, 'a, T> {
    fn new(model: &'m CfModel<'a, T>, shared: &'s Shared<T>, opts: &SolveOptions, k: usize) -> Self {
        Worker {
            model,
            prop: Propagator::new(model),
            shared,
            rng: (k > 0).then(|| ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64))),
            heap: BinaryHeap::new(),
            stack: Vec::new(),
            seq: 0,
            counts: vec![0; model.n_vars()],
            alive: Vec::new(),
            frontier_limit: opts.frontier_limit.max(1),
        }
    }

    /// Returns true when the search space was exhausted.
    fn run(&mut self) -> bool {
        let mut root = State::root(self.model);
        if self.prop.propagate(&mut root, UNBOUNDED) == Outcome::Conflict {
            return true;
        }
        self.alive = root.alive;
        self.push(0, 0, root.domains);
        loop {
            if self.shared.stop.load(Mem::Relaxed) {
                return false;
            }
            let node = match self.stack.pop() {
                Some(n) => n,
                None => match self.heap.pop() {
                    Some(n) => n,
                    None => break,
                },
            };
            if node.lb >= self.shared.ub.load(Mem::Relaxed) {
                continue;
            }
            if self.stack.is_empty() {
                let frontier = self.heap.peek().map_or(i64::MAX, |p| p.lb).min(node.lb);
                self.shared.raise_bound(frontier.min(self.shared.ub.load(Mem::Relaxed)));
            }
            self.dive(node);
        }
        self.shared.stop.store(true, Mem::Relaxed);
        let ub = self.shared.ub.load(Mem::Relaxed);
        if ub < UNBOUNDED {
            self.shared.raise_bound(ub);
        }
        true
    }

    fn push(&mut self, lb: i64, depth: usize, domains: Vec<BitSet>) {
        self.seq += 1;
        let p = Pending {
            lb,
            depth,
            seq: self.seq,
            domains,
        };
        if self.heap.len() < self.frontier_limit {
            self.heap.push(p);
        } else {
            self.stack.push(p);
        }
    }

    /// Counts a node; false when a budget is exhausted.
    fn tick(&self) -> bool {
        let n = self.shared.nodes.fetch_add(1, Mem::Relaxed) + 1;
        if self.shared.stop.load(Mem::Relaxed) {
            return false;
        }
        if self.shared.node_limit.is_some_and(|l| n > l) {
            self.shared.stop.store(true, Mem::Relaxed);
            return false;
        }
        if self.shared.deadline.is_some_and(|d| Instant::now() >= d) {
            self.shared.timed_out.store(true, Mem::Relaxed);
            self.shared.stop.store(true, Mem::Relaxed);
            return false;
        }
        true
    }

    fn dive(&mut self, node: Pending) {
        let mut st = State {
            domains: node.domains,
            alive: self.alive.clone(),
        };
        let mut lb = node.lb;
        let mut depth = node.depth;
        loop {
            if !self.tick() {
                // Keep the unexplored node so the frontier bound stays valid.
                self.push(lb, depth, st.domains);
                return;
            }
            let ub = self.shared.ub.load(Mem::Relaxed);
            if lb >= ub || self.prop.propagate(&mut st, ub) == Outcome::Conflict {
                return;
            }
            let Some(b) = self.prop.bound(&st) else { return };
            lb = lb.max(b);
            if lb >= ub {
                return;
            }
            if let Some((values, q)) = self.prop.completion(&st) {
                if self.prop.feasible(&st, &values) && self.offer(values, q) {
                    return;
                }
            }
            self.prop.undecided(&st, &mut self.counts);
            let Some(v) = self.pick() else { return };
            let (near, far) = self.split(v, &st.domains[v]);
            let mut other = st.domains.clone();
            other[v] = far;
            self.push(lb, depth + 1, other);
            st.domains[v] = near;
            depth += 1;
        }
    }

    /// Validates a completion against the reference evaluator and records it.
    fn offer(&self, values: Vec<usize>, q: i64) -> bool {
        let Ok(point) = self.model.space.realize(&values) else {
            return false;
        };
        if !self.model.validates(&point) {
            return false;
        }
        let mut best = self.shared.best.lock().expect("poisoned");
        if q < best.q {
            best.q = q;
            let t = self.shared.elapsed();
            best.trace.push((t, self.model.space.cost_of(&values)));
            best.values = Some(values);
            best.point = Some(point);
            self.shared.ub.fetch_min(q, Mem::Relaxed);
        }
        true
    }

    /// Variable with the most undecided live conditions, ties by static split count.
    fn pick(&mut self) -> Option<usize> {
        let vars = &self.model.space.vars;
        let mut best: Option<usize> = None;
        for (v, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => (c, vars[v].splits) > (self.counts[b], vars[b].splits),
            };
            if better {
                best = Some(v);
            }
        }
        if let Some(rng) = self.rng.as_mut() {
            if rng.gen_bool(0.3) {
                let cands: Vec<usize> = (0..self.counts.len()).filter(|&v| self.counts[v] > 0).collect();
                if !cands.is_empty() {
                    return Some(cands[rng.gen_range(0..cands.len())]);
                }
            }
        }
        best
    }

    /// Splits a domain into its cheaper and dearer halves.
    fn split(&mut self, v: usize, dom: &BitSet) -> (BitSet, BitSet) {
        let var = &self.model.space.vars[v];
        let mut order: Vec<usize> = dom.iter().collect();
        order.sort_by_key(|&a| (var.qcost[a], a.abs_diff(var.home), a));
        let n = order.len();
        let cut = match self.rng.as_mut() {
            Some(rng) if n > 2 => rng.gen_range(1..n),
            _ => n.div_ceil(2).min(n - 1).max(1),
        };
        let mut near = BitSet::empty(var.n_values);
        let mut far = BitSet::empty(var.n_values);
        for (i, &a) in order.iter().enumerate() {
            if i < cut {
                near.insert(a);
            } else {
                far.insert(a);
            }
        }
        (near, far)
    }
}
