//! Exact minimum-cost assignment on square matrices.
//!
//! The solver is the O(n^3) potentials formulation of the Hungarian method.
//! Stream and speaker mapping problems are small (a handful of rows), so the
//! lexicographic variant can afford to re-solve once per candidate cell.

/// Solve a square min-cost assignment. Returns (column per row, total cost).
///
/// Costs must be finite. Ties are broken deterministically by scan order.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    debug_assert!(cost.iter().all(|row| row.len() == n));

    // 1-based arrays; p[j] holds the row matched to column j, 0 when free.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    let total = row_to_col.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (row_to_col, total)
}

/// Among all optimal assignments, return the lexicographically smallest one:
/// row 0 takes the smallest column it can hold while staying optimal, then
/// row 1, and so on. Used where mapping ties must break deterministically.
pub fn lexicographic_min_cost_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    let (_, best) = min_cost_assignment(cost);
    let tol = 1e-9 * (1.0 + best.abs());

    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let mut free_cols: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let fixed_cost: f64 = chosen.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        for (slot, &j) in free_cols.iter().enumerate() {
            let remaining_cols: Vec<usize> =
                free_cols.iter().copied().filter(|&c| c != j).collect();
            let sub: Vec<Vec<f64>> = (i + 1..n)
                .map(|r| remaining_cols.iter().map(|&c| cost[r][c]).collect())
                .collect();
            let (_, sub_total) = min_cost_assignment(&sub);
            if fixed_cost + cost[i][j] + sub_total <= best + tol {
                chosen.push(j);
                free_cols.remove(slot);
                break;
            }
        }
        debug_assert_eq!(chosen.len(), i + 1, "some column must keep the optimum");
    }
    let total = chosen.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    (chosen, total)
}
