//! Frame-by-frame dynamic programming over the integer pixel grid.
//!
//! `cost[i + 1][j] = min_k cost[i][k] + |j - (k + F_i(k))|^2`, with parent
//! pointers for path recovery. Two step kernels share the driver: an exact
//! all-pairs minimum and a lower-envelope transform that is linear-time per
//! frame up to a sort.

use super::envelope::LowerEnvelope;
use crate::par;
use crate::trackstore::{FlowField, FlowVolume};

/// Integer pixel cell, `(x, y)`.
pub type Cell = (usize, usize);

/// Which per-frame kernel the driver runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kernel {
    Exact,
    Bounded,
}

/// Where parent pointers live during the solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParentStorage {
    /// One `u32` per (frame, cell) for the whole segment.
    #[default]
    Full,
    /// Keeps only cost checkpoints every `interval` frames and recomputes
    /// parents chunk by chunk while backtracking.
    Checkpointed { interval: usize },
}

struct Step {
    cost: Vec<f64>,
    parent: Vec<u32>,
}

/// Exact step: for every target cell, scan every reachable source cell in
/// row-major order and keep the first strict minimum, so ties go to the
/// lexicographically smallest `(y, x)` predecessor.
fn exact_step(field: &FlowField, prev: &[f64]) -> Step {
    let (w, h) = (field.width, field.height);
    let sources: Vec<(usize, f64, f64, f64)> = prev
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_finite())
        .map(|(k, &c)| {
            let [u, v] = field.at(k % w, k / w);
            (k, c, (k % w) as f64 + u, (k / w) as f64 + v)
        })
        .collect();
    let best = par::map_range(w * h, |j| {
        let (jx, jy) = ((j % w) as f64, (j / w) as f64);
        let mut best = (f64::INFINITY, u32::MAX);
        for &(k, c, cx, cy) in &sources {
            let dx = jx - cx;
            let dy = jy - cy;
            let total = c + (dx * dx + dy * dy);
            if total < best.0 {
                best = (total, k as u32);
            }
        }
        best
    });
    let (cost, parent) = best.into_iter().unzip();
    Step { cost, parent }
}

struct Center {
    cx: f64,
    row: i64,
    cost: f64,
    cell: u32,
}

/// Envelope step: each source's displaced center keeps its exact x and is
/// placed on the two integer rows bracketing its y, with the exact vertical
/// offset folded into its height. That makes the minimum separable: a lower
/// envelope along x per occupied row, then along y per column. The per-row
/// cost never exceeds the true transition cost and equals it whenever the
/// target row is one of the brackets. Exact when every flow vector is
/// integer-valued.
fn envelope_step(field: &FlowField, prev: &[f64]) -> Step {
    let (w, h) = (field.width, field.height);
    let mut centers: Vec<Center> = Vec::with_capacity(2 * prev.len());
    for (k, &cost) in prev.iter().enumerate() {
        if !cost.is_finite() {
            continue;
        }
        let [u, v] = field.at(k % w, k / w);
        let cx = (k % w) as f64 + u;
        let cy = (k / w) as f64 + v;
        let lo = cy.floor();
        for r in [lo, lo + 1.0] {
            let d = r - cy;
            centers.push(Center {
                cx,
                row: r as i64,
                cost: cost + d * d,
                cell: k as u32,
            });
            if cy == lo {
                break;
            }
        }
    }
    if centers.is_empty() {
        return Step {
            cost: vec![f64::INFINITY; w * h],
            parent: vec![u32::MAX; w * h],
        };
    }
    centers.sort_by(|a, b| {
        a.row
            .cmp(&b.row)
            .then(a.cx.total_cmp(&b.cx))
            .then(a.cell.cmp(&b.cell))
    });

    // Row groups as ranges into `centers`.
    let mut groups: Vec<(i64, usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=centers.len() {
        if i == centers.len() || centers[i].row != centers[start].row {
            groups.push((centers[start].row, start, i));
            start = i;
        }
    }

    // Pass 1: per occupied row, envelope along x.
    let row_pass: Vec<Vec<(f64, usize)>> = par::map_slice(&groups, |&(_, lo, hi)| {
        let pos: Vec<f64> = centers[lo..hi].iter().map(|c| c.cx).collect();
        let hts: Vec<f64> = centers[lo..hi].iter().map(|c| c.cost).collect();
        let mut out = vec![(0.0, 0usize); w];
        LowerEnvelope::new().evaluate(&pos, &hts, &mut out);
        for o in &mut out {
            o.1 = centers[lo + o.1].cell as usize;
        }
        out
    });

    // Pass 2: per column, envelope along y over the occupied rows.
    let row_pos: Vec<f64> = groups.iter().map(|g| g.0 as f64).collect();
    let columns: Vec<Vec<(f64, u32)>> = par::map_range(w, |x| {
        let hts: Vec<f64> = row_pass.iter().map(|r| r[x].0).collect();
        let mut out = vec![(0.0, 0usize); h];
        LowerEnvelope::new().evaluate(&row_pos, &hts, &mut out);
        out.into_iter()
            .map(|(c, g)| (c, row_pass[g][x].1 as u32))
            .collect()
    });

    let mut cost = vec![0.0; w * h];
    let mut parent = vec![0u32; w * h];
    for (x, col) in columns.into_iter().enumerate() {
        for (y, (c, p)) in col.into_iter().enumerate() {
            cost[y * w + x] = c;
            parent[y * w + x] = p;
        }
    }
    Step { cost, parent }
}

/// Pruning data for [`bounded_step`].
struct Bound {
    /// Largest cost-so-far plus cost-to-go that can still be optimal.
    limit: f64,
    end: Cell,
    t: usize,
    /// `reach[i]`: summed largest flow magnitude over frames `i..t`.
    reach: Vec<f64>,
}

impl Bound {
    fn new(flow: &FlowVolume, s: usize, t: usize, end: Cell, upper: f64) -> Bound {
        let mut reach = vec![0.0; t + 1];
        for i in (s..t).rev() {
            let fmax = flow.fields[i]
                .data
                .iter()
                .map(|&[u, v]| (u as f64).hypot(v as f64))
                .fold(0.0, f64::max);
            reach[i] = reach[i + 1] + fmax;
        }
        Bound {
            limit: upper + 1e-9 * (1.0 + upper),
            end,
            t,
            reach,
        }
    }

    /// Lower bound on the cost of reaching `end` from `(x, y)` at frame `i`.
    /// Each step moves at most its flow magnitude plus its residual, and the
    /// residuals' squared sum is at least `(sum of residuals)^2 / steps`.
    fn to_go(&self, i: usize, x: usize, y: usize) -> f64 {
        let dist = (x as f64 - self.end.0 as f64).hypot(y as f64 - self.end.1 as f64);
        let steps = self.t - i;
        if steps == 0 {
            return if dist == 0.0 { 0.0 } else { f64::INFINITY };
        }
        let slack = (dist - self.reach[i]).max(0.0);
        slack * slack / steps as f64
    }
}

/// Exact step over the states that can still lie on an optimal path.
///
/// Sources costing more than the bound are dropped. For each target row, the
/// surviving sources whose vertical term keeps them under the bound enter a
/// lower envelope along x with that term folded into their height. Targets
/// whose cost plus cost-to-go exceeds the bound are set to infinity.
fn bounded_step(field: &FlowField, prev: &[f64], i: usize, bound: &Bound) -> Step {
    let (w, h) = (field.width, field.height);
    let limit = bound.limit;
    let mut sites: Vec<(f64, f64, f64, u32)> = prev
        .iter()
        .enumerate()
        .filter(|(_, c)| **c <= limit)
        .map(|(k, &c)| {
            let [u, v] = field.at(k % w, k / w);
            ((k % w) as f64 + u, (k / w) as f64 + v, c, k as u32)
        })
        .collect();
    sites.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.3.cmp(&b.3)));

    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); h];
    for (n, &(_, cy, c, _)) in sites.iter().enumerate() {
        let r = (limit - c).sqrt();
        let lo = (cy - r).ceil().max(0.0);
        let hi = (cy + r).floor().min((h - 1) as f64);
        if lo <= hi {
            for row in &mut rows[lo as usize..=hi as usize] {
                row.push(n as u32);
            }
        }
    }

    let rows_out: Vec<Vec<(f64, u32)>> = par::map_range(h, |jy| {
        let members = &rows[jy];
        let mut out = vec![(f64::INFINITY, u32::MAX); w];
        if members.is_empty() {
            return out;
        }
        let pos: Vec<f64> = members.iter().map(|&n| sites[n as usize].0).collect();
        let hts: Vec<f64> = members
            .iter()
            .map(|&n| {
                let (_, cy, c, _) = sites[n as usize];
                let d = jy as f64 - cy;
                c + d * d
            })
            .collect();
        let mut env = vec![(0.0, 0usize); w];
        LowerEnvelope::new().evaluate(&pos, &hts, &mut env);
        for (jx, (o, (c, m))) in out.iter_mut().zip(env).enumerate() {
            if c + bound.to_go(i + 1, jx, jy) <= limit {
                *o = (c, sites[members[m] as usize].3);
            }
        }
        out
    });

    let mut cost = Vec::with_capacity(w * h);
    let mut parent = Vec::with_capacity(w * h);
    for row in rows_out {
        for (c, p) in row {
            cost.push(c);
            parent.push(p);
        }
    }
    Step { cost, parent }
}

/// Minimum-cost grid path from `start` at frame `s` to `end` at frame `t`.
/// Returns the cells for frames `s..=t`.
pub(crate) fn shortest_grid_path(
    flow: &FlowVolume,
    s: usize,
    t: usize,
    start: Cell,
    end: Cell,
    kernel: Kernel,
    storage: ParentStorage,
) -> Vec<Cell> {
    match kernel {
        Kernel::Exact => drive(flow, s, t, start, end, storage, &|i, prev| {
            exact_step(&flow.fields[i], prev)
        }),
        Kernel::Bounded => {
            let guess = drive(flow, s, t, start, end, storage, &|i, prev| {
                envelope_step(&flow.fields[i], prev)
            });
            let bound = Bound::new(flow, s, t, end, grid_path_cost(flow, s, &guess));
            drive(flow, s, t, start, end, storage, &|i, prev| {
                bounded_step(&flow.fields[i], prev, i, &bound)
            })
        }
    }
}

fn drive(
    flow: &FlowVolume,
    s: usize,
    t: usize,
    start: Cell,
    end: Cell,
    storage: ParentStorage,
    step: &(dyn Fn(usize, &[f64]) -> Step + Sync),
) -> Vec<Cell> {
    debug_assert!(s < t && t < flow.num_frames());
    let w = flow.width;
    let n = w * flow.height;
    let index = |c: Cell| c.1 * w + c.0;
    let cell = |k: usize| (k % w, k / w);

    let mut init = vec![f64::INFINITY; n];
    init[index(start)] = 0.0;

    let interval = match storage {
        ParentStorage::Full => usize::MAX,
        ParentStorage::Checkpointed { interval } => interval.max(1),
    };

    // Forward pass. `checkpoints` holds (frame, cost) at chunk starts.
    let mut parents: Vec<Vec<u32>> = Vec::new();
    let mut checkpoints: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut cost = init;
    for i in s..t {
        if storage != ParentStorage::Full && (i - s) % interval == 0 {
            checkpoints.push((i, cost.clone()));
        }
        let st = step(i, &cost);
        if storage == ParentStorage::Full {
            parents.push(st.parent);
        }
        cost = st.cost;
    }
    debug_assert!(cost[index(end)].is_finite());

    let mut path = vec![(0, 0); t - s + 1];
    path[t - s] = end;
    let mut current = index(end);
    match storage {
        ParentStorage::Full => {
            for i in (s..t).rev() {
                current = parents[i - s][current] as usize;
                path[i - s] = cell(current);
            }
        }
        ParentStorage::Checkpointed { .. } => {
            for (c, (frame, start_cost)) in checkpoints.iter().enumerate().rev() {
                let chunk_end = checkpoints.get(c + 1).map_or(t, |n| n.0);
                let mut local = Vec::with_capacity(chunk_end - frame);
                let mut cst = start_cost.clone();
                for i in *frame..chunk_end {
                    let st = step(i, &cst);
                    local.push(st.parent);
                    cst = st.cost;
                }
                for i in (*frame..chunk_end).rev() {
                    current = local[i - frame][current] as usize;
                    path[i - s] = cell(current);
                }
            }
        }
    }
    path
}

/// Sum of squared flow discrepancies along a grid path starting at frame `s`.
pub fn grid_path_cost(flow: &FlowVolume, s: usize, cells: &[Cell]) -> f64 {
    cells
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let [u, v] = flow.fields[s + k].at(w[0].0, w[0].1);
            let dx = (w[1].0 as f64 - w[0].0 as f64) - u;
            let dy = (w[1].1 as f64 - w[0].1 as f64) - v;
            dx * dx + dy * dy
        })
        .fold(0.0, |acc, c| acc + c)
}
