//! Dense linear assignment by shortest augmenting paths (Hungarian method
//! with row and column potentials), `O(n^3)`.

/// Optimal assignment with dual potentials certifying optimality:
/// `u[i] + v[j] <= cost[i][j]` everywhere, with equality on the assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// `col_of_row[i]` is the column matched to row `i`.
    pub col_of_row: Vec<usize>,
    pub total: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Assignment {
    /// Worst violation of dual feasibility and the duality gap.
    pub fn certificate_residual(&self, cost: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in cost.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                worst = worst.max(self.u[i] + self.v[j] - c);
            }
        }
        let dual: f64 = self.u.iter().sum::<f64>() + self.v.iter().sum::<f64>();
        worst.max((dual - self.total).abs())
    }
}

/// Minimum-cost perfect matching of a square cost matrix.
pub fn solve(cost: &[Vec<f64>]) -> Assignment {
    let n = cost.len();
    // 1-based potentials; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
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
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0usize; n];
    for j in 1..=n {
        if row_of_col[j] > 0 {
            col_of_row[row_of_col[j] - 1] = j - 1;
        }
    }
    let total = col_of_row.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Assignment { col_of_row, total, u: u[1..].to_vec(), v: v[1..].to_vec() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_known_instance() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = solve(&c);
        assert_eq!(a.total, 5.0);
        assert!(a.certificate_residual(&c) < 1e-12);
    }

    #[test]
    fn empty_and_single() {
        assert_eq!(solve(&[]).total, 0.0);
        let a = solve(&[vec![3.5]]);
        assert_eq!(a.col_of_row, vec![0]);
        assert_eq!(a.total, 3.5);
    }
}
