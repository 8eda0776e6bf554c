use serde::{Deserialize, Serialize};

use super::sim::{EventKind, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub t: f64,
    pub physician: usize,
    pub patient: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchLabel {
    pub patient: u64,
    pub physician: usize,
    pub batched: bool,
    pub batch_size: u32,
}

/// Labels each assignment with the length of its chain: consecutive
/// assignments by the same physician at most `window` apart belong to one
/// batch. Output follows the input order.
pub fn classify_assignments(assignments: &[Assignment], window: f64) -> Vec<BatchLabel> {
    let mut order: Vec<usize> = (0..assignments.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&assignments[a], &assignments[b]);
        x.physician
            .cmp(&y.physician)
            .then(x.t.total_cmp(&y.t))
            .then(a.cmp(&b))
    });

    let mut sizes = vec![1u32; assignments.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() {
            let (prev, cur) = (&assignments[order[end - 1]], &assignments[order[end]]);
            if cur.physician != prev.physician || cur.t - prev.t > window {
                break;
            }
            end += 1;
        }
        for k in &order[start..end] {
            sizes[*k] = (end - start) as u32;
        }
        start = end;
    }

    assignments
        .iter()
        .zip(sizes)
        .map(|(a, b)| BatchLabel {
            patient: a.patient,
            physician: a.physician,
            batched: b >= 2,
            batch_size: b,
        })
        .collect()
}

pub fn assignments(traj: &Trajectory) -> Vec<Assignment> {
    traj.events
        .iter()
        .filter(|e| e.kind == EventKind::Assignment)
        .filter_map(|e| {
            Some(Assignment {
                t: e.t,
                physician: e.physician?,
                patient: e.patient?,
            })
        })
        .collect()
}

pub fn classify_batches(traj: &Trajectory, window: f64) -> Vec<BatchLabel> {
    classify_assignments(&assignments(traj), window)
}
