//! Exhaustive enumeration of integer-grid paths.

use tapkit_core::FlowVolume;

/// Cost of the path `cells` (frames `s..`) under forward flow at grid cells.
pub fn path_cost(flow: &FlowVolume, s: usize, cells: &[(usize, usize)]) -> f64 {
    let mut total = 0.0;
    for i in 0..cells.len() - 1 {
        let (x0, y0) = cells[i];
        let (x1, y1) = cells[i + 1];
        let [u, v] = flow.fields[s + i].data[y0 * flow.width + x0];
        let ex = (x1 as f64 - x0 as f64) - u as f64;
        let ey = (y1 as f64 - y0 as f64) - v as f64;
        total += ex * ex + ey * ey;
    }
    total
}

/// Tries every assignment of interior cells. Returns the minimum cost and
/// the first minimizing path in row-major enumeration order.
pub fn enumerate_best_path(
    flow: &FlowVolume,
    s: usize,
    t: usize,
    start: (usize, usize),
    end: (usize, usize),
) -> (f64, Vec<(usize, usize)>) {
    let n = flow.width * flow.height;
    let interior = t - s - 1;
    let mut idx = vec![0usize; interior];
    let mut best = (f64::INFINITY, Vec::new());
    loop {
        let mut cells = Vec::with_capacity(t - s + 1);
        cells.push(start);
        cells.extend(idx.iter().map(|&k| (k % flow.width, k / flow.width)));
        cells.push(end);
        let c = path_cost(flow, s, &cells);
        if c < best.0 {
            best = (c, cells);
        }
        // Odometer increment, last frame fastest.
        let mut pos = interior;
        loop {
            if pos == 0 {
                return best;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}
