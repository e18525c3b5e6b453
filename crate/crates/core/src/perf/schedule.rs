//! Resource-constrained list scheduling by discrete-event simulation.
//!
//! Each resource runs one task at a time. Whenever a resource is idle it
//! starts the lowest-index task whose dependencies have all finished.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::PerfError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub name: String,
    pub resource: usize,
    pub duration: f64,
    pub deps: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskGraph {
    pub resources: Vec<String>,
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub resource: String,
    pub start: f64,
    pub end: f64,
    pub task: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub end_to_end: f64,
    pub start: Vec<f64>,
    pub finish: Vec<f64>,
    /// Ordered by start time, then task index.
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Time(f64);

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl TaskGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_resource(&mut self, name: impl Into<String>) -> usize {
        self.resources.push(name.into());
        self.resources.len() - 1
    }

    pub fn add_task(&mut self, name: impl Into<String>, resource: usize, duration: f64, deps: Vec<usize>) -> usize {
        self.tasks.push(Task { name: name.into(), resource, duration, deps });
        self.tasks.len() - 1
    }

    fn check(&self) -> Result<(), PerfError> {
        let n = self.tasks.len();
        let mut indeg = vec![0usize; n];
        let mut succ = vec![Vec::new(); n];
        for (i, t) in self.tasks.iter().enumerate() {
            if t.resource >= self.resources.len() {
                return Err(PerfError::Invalid(format!("task {} uses unknown resource {}", t.name, t.resource)));
            }
            if !(t.duration >= 0.0) || !t.duration.is_finite() {
                return Err(PerfError::Invalid(format!("task {} has duration {}", t.name, t.duration)));
            }
            for &d in &t.deps {
                if d >= n {
                    return Err(PerfError::Invalid(format!("task {} depends on unknown task {d}", t.name)));
                }
                indeg[i] += 1;
                succ[d].push(i);
            }
        }
        let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = stack.pop() {
            seen += 1;
            for &s in &succ[i] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    stack.push(s);
                }
            }
        }
        if seen == n {
            Ok(())
        } else {
            Err(PerfError::Cycle)
        }
    }

    pub fn simulate(&self) -> Result<Schedule, PerfError> {
        self.check()?;
        let n = self.tasks.len();
        let r = self.resources.len();
        let mut remaining: Vec<usize> = self.tasks.iter().map(|t| t.deps.len()).collect();
        let mut succ = vec![Vec::new(); n];
        for (i, t) in self.tasks.iter().enumerate() {
            for &d in &t.deps {
                succ[d].push(i);
            }
        }
        // Ready tasks per resource, lowest index first.
        let mut ready: Vec<BinaryHeap<Reverse<usize>>> = vec![BinaryHeap::new(); r];
        for i in (0..n).filter(|&i| remaining[i] == 0) {
            ready[self.tasks[i].resource].push(Reverse(i));
        }
        let mut busy = vec![false; r];
        let mut start = vec![0.0; n];
        let mut finish = vec![0.0; n];
        let mut events: BinaryHeap<Reverse<(Time, usize)>> = BinaryHeap::new();
        let mut now = 0.0;
        loop {
            for res in 0..r {
                if busy[res] {
                    continue;
                }
                if let Some(Reverse(i)) = ready[res].pop() {
                    busy[res] = true;
                    start[i] = now;
                    finish[i] = now + self.tasks[i].duration;
                    events.push(Reverse((Time(finish[i]), i)));
                }
            }
            let Some(Reverse((Time(t), first))) = events.pop() else { break };
            now = t;
            let mut done = vec![first];
            while let Some(&Reverse((Time(t2), j))) = events.peek() {
                if t2 != t {
                    break;
                }
                events.pop();
                done.push(j);
            }
            for i in done {
                busy[self.tasks[i].resource] = false;
                for &s in &succ[i] {
                    remaining[s] -= 1;
                    if remaining[s] == 0 {
                        ready[self.tasks[s].resource].push(Reverse(s));
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| start[a].total_cmp(&start[b]).then(a.cmp(&b)));
        let trace = order
            .into_iter()
            .map(|i| TraceEntry {
                resource: self.resources[self.tasks[i].resource].clone(),
                start: start[i],
                end: finish[i],
                task: self.tasks[i].name.clone(),
            })
            .collect();
        Ok(Schedule {
            end_to_end: finish.iter().copied().fold(0.0, f64::max),
            start,
            finish,
            trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_chain() {
        let mut g = TaskGraph::new();
        let d = g.add_resource("dev");
        let a = g.add_task("a", d, 1.0, vec![]);
        let b = g.add_task("b", d, 2.0, vec![a]);
        g.add_task("c", d, 3.0, vec![b]);
        assert_eq!(g.simulate().unwrap().end_to_end, 6.0);
    }

    #[test]
    fn resource_contention() {
        let mut g = TaskGraph::new();
        let d = g.add_resource("dev");
        g.add_task("a", d, 2.0, vec![]);
        g.add_task("b", d, 3.0, vec![]);
        assert_eq!(g.simulate().unwrap().end_to_end, 5.0);

        let mut g = TaskGraph::new();
        let d0 = g.add_resource("d0");
        let d1 = g.add_resource("d1");
        g.add_task("a", d0, 2.0, vec![]);
        g.add_task("b", d1, 3.0, vec![]);
        assert_eq!(g.simulate().unwrap().end_to_end, 3.0);
    }

    #[test]
    fn two_stage_pipeline() {
        let mut g = TaskGraph::new();
        let s0 = g.add_resource("s0");
        let s1 = g.add_resource("s1");
        for mb in 0..4 {
            let a = g.add_task(format!("f0.{mb}"), s0, 1.0, vec![]);
            g.add_task(format!("f1.{mb}"), s1, 1.0, vec![a]);
        }
        assert_eq!(g.simulate().unwrap().end_to_end, 5.0);
    }

    #[test]
    fn cycle_rejected() {
        let mut g = TaskGraph::new();
        let d = g.add_resource("dev");
        g.add_task("a", d, 1.0, vec![1]);
        g.add_task("b", d, 1.0, vec![0]);
        assert!(matches!(g.simulate(), Err(PerfError::Cycle)));
    }

    #[test]
    fn trace_has_no_overlap() {
        let mut g = TaskGraph::new();
        let d = g.add_resource("dev");
        let e = g.add_resource("net");
        let a = g.add_task("a", d, 1.5, vec![]);
        let b = g.add_task("b", e, 0.5, vec![a]);
        g.add_task("c", d, 1.0, vec![]);
        g.add_task("d", d, 1.0, vec![b]);
        let s = g.simulate().unwrap();
        for r in &g.resources {
            let mut iv: Vec<_> = s.trace.iter().filter(|t| &t.resource == r).collect();
            iv.sort_by(|x, y| x.start.total_cmp(&y.start));
            for w in iv.windows(2) {
                assert!(w[0].end <= w[1].start);
            }
        }
        assert_eq!(s.end_to_end, 3.5);
    }
}
