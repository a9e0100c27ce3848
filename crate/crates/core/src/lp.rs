//! Phase-1 simplex for dense feasibility problems `A x = b, x >= 0`.
//!
//! One artificial variable is added per row and their sum is minimized.
//! The optimum is zero exactly when the system is feasible. Pivoting uses
//! Bland's rule, so degenerate problems terminate.

/// Pivot and reduced-cost threshold.
const PIVOT_EPS: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOneOutcome {
    /// Values of the structural variables at termination.
    pub x: Vec<f64>,
    /// Sum of the artificial variables at termination.
    pub infeasibility: f64,
    pub pivots: usize,
}

/// Solves the phase-1 problem for the row-major `rows × cols` matrix `a`.
pub fn phase_one(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> PhaseOneOutcome {
    assert_eq!(a.len(), rows * cols, "matrix shape");
    assert_eq!(b.len(), rows, "rhs length");

    // Tableau columns: structural | artificial | rhs
    let width = cols + rows + 1;
    let rhs = width - 1;
    let mut t = vec![0.0; rows * width];
    for r in 0..rows {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        let row = &mut t[r * width..(r + 1) * width];
        for c in 0..cols {
            row[c] = sign * a[r * cols + c];
        }
        row[cols + r] = 1.0;
        row[rhs] = sign * b[r];
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    // Reduced costs of the phase-1 objective (minimize sum of artificials).
    let mut cost = vec![0.0; width];
    for r in 0..rows {
        for c in 0..cols {
            cost[c] -= t[r * width + c];
        }
        cost[rhs] -= t[r * width + rhs];
    }

    let max_pivots = 50 * (rows + cols) + 1000;
    let mut pivots = 0;
    while pivots < max_pivots {
        let Some(enter) = (0..rhs).find(|&c| cost[c] < -PIVOT_EPS) else {
            break;
        };

        let mut leave: Option<(usize, f64)> = None;
        for r in 0..rows {
            let coef = t[r * width + enter];
            if coef > PIVOT_EPS {
                let ratio = t[r * width + rhs] / coef;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best, best_ratio)) => {
                        if ratio < best_ratio - 1e-15
                            || ((ratio - best_ratio).abs() <= 1e-15 && basis[r] < basis[best])
                        {
                            Some((r, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
        }
        // The objective is bounded below by zero, so an entering column
        // always has a positive entry somewhere.
        let Some((pivot_row, _)) = leave else {
            break;
        };

        pivot(&mut t, width, pivot_row, enter);
        let factor = cost[enter];
        if factor != 0.0 {
            let row = &t[pivot_row * width..(pivot_row + 1) * width];
            for (c, v) in cost.iter_mut().enumerate() {
                *v -= factor * row[c];
            }
        }
        basis[pivot_row] = enter;
        pivots += 1;
    }

    let mut x = vec![0.0; cols];
    let mut infeasibility = 0.0;
    for (r, &var) in basis.iter().enumerate() {
        let value = t[r * width + rhs].max(0.0);
        if var < cols {
            x[var] = value;
        } else {
            infeasibility += value;
        }
    }
    PhaseOneOutcome {
        x,
        infeasibility,
        pivots,
    }
}

fn pivot(t: &mut [f64], width: usize, pivot_row: usize, col: usize) {
    let rows = t.len() / width;
    let p = t[pivot_row * width + col];
    for v in &mut t[pivot_row * width..(pivot_row + 1) * width] {
        *v /= p;
    }
    let pivot_vals: Vec<f64> = t[pivot_row * width..(pivot_row + 1) * width].to_vec();
    for r in 0..rows {
        if r == pivot_row {
            continue;
        }
        let factor = t[r * width + col];
        if factor == 0.0 {
            continue;
        }
        let row = &mut t[r * width..(r + 1) * width];
        for (v, &pv) in row.iter_mut().zip(&pivot_vals) {
            *v -= factor * pv;
        }
        row[col] = 0.0;
    }
}
