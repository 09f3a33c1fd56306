//! Linear systems `x = b + Q x` over a subset of model states.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::dtmc::DtmcModel;
use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;
/// Systems up to this many unknowns use dense LU; larger ones sparse LU.
pub const DENSE_LIMIT: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Solver {
    /// Direct elimination.
    #[default]
    Exact,
    /// Gauss–Seidel until the largest relative successive change is below
    /// `tolerance`.
    Iterative {
        tolerance: f64,
        max_iterations: usize,
    },
}

impl Solver {
    pub fn iterative() -> Self {
        Solver::Iterative {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// Solution vectors (one per right-hand side, indexed like `unknowns`).
pub(crate) struct Solution {
    pub values: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// Solves `x_j = b_j + Σ_c P(u_j, u_c) x_c` where the sum ranges over
/// transitions that stay inside `unknowns`. `pos[state]` maps a model state
/// to its row in the system.
pub(crate) fn solve(
    model: &DtmcModel,
    unknowns: &[usize],
    pos: &[Option<usize>],
    rhs: &[Vec<f64>],
    solver: Solver,
) -> Result<Solution> {
    if unknowns.is_empty() {
        return Ok(Solution {
            values: vec![Vec::new(); rhs.len()],
            iterations: 0,
        });
    }
    match solver {
        Solver::Exact if unknowns.len() <= DENSE_LIMIT => dense(model, unknowns, pos, rhs),
        Solver::Exact => sparse(model, unknowns, pos, rhs),
        Solver::Iterative {
            tolerance,
            max_iterations,
        } => gauss_seidel(model, unknowns, pos, rhs, tolerance, max_iterations),
    }
}

fn rhs_matrix(rhs: &[Vec<f64>], n: usize) -> Mat<f64> {
    Mat::from_fn(n, rhs.len(), |i, j| rhs[j][i])
}

fn columns(x: &Mat<f64>) -> Result<Vec<Vec<f64>>> {
    let out: Vec<Vec<f64>> = (0..x.ncols())
        .map(|j| (0..x.nrows()).map(|i| x[(i, j)]).collect())
        .collect();
    if out.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve(
            "non-finite solution (singular system)".into(),
        ));
    }
    Ok(out)
}

fn dense(
    model: &DtmcModel,
    unknowns: &[usize],
    pos: &[Option<usize>],
    rhs: &[Vec<f64>],
) -> Result<Solution> {
    let n = unknowns.len();
    let mut a = Mat::<f64>::identity(n, n);
    for (row, &s) in unknowns.iter().enumerate() {
        for tr in model.transitions(s) {
            if let Some(col) = pos[tr.target] {
                a[(row, col)] -= tr.probability;
            }
        }
    }
    let x = a.partial_piv_lu().solve(rhs_matrix(rhs, n));
    Ok(Solution {
        values: columns(&x)?,
        iterations: 0,
    })
}

fn sparse(
    model: &DtmcModel,
    unknowns: &[usize],
    pos: &[Option<usize>],
    rhs: &[Vec<f64>],
) -> Result<Solution> {
    let n = unknowns.len();
    let mut triplets = Vec::new();
    for (row, &s) in unknowns.iter().enumerate() {
        let mut diag = 1.0;
        for tr in model.transitions(s) {
            match pos[tr.target] {
                Some(col) if col == row => diag -= tr.probability,
                Some(col) => triplets.push(Triplet::new(row, col, -tr.probability)),
                None => {}
            }
        }
        triplets.push(Triplet::new(row, row, diag));
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    let mut x = rhs_matrix(rhs, n);
    lu.solve_in_place(x.as_mut());
    Ok(Solution {
        values: columns(&x)?,
        iterations: 0,
    })
}

fn gauss_seidel(
    model: &DtmcModel,
    unknowns: &[usize],
    pos: &[Option<usize>],
    rhs: &[Vec<f64>],
    tolerance: f64,
    max_iterations: usize,
) -> Result<Solution> {
    let n = unknowns.len();
    // Internal rows: (off-diagonal entries, self-loop probability).
    let rows: Vec<(Vec<(usize, f64)>, f64)> = unknowns
        .iter()
        .map(|&s| {
            let mut self_loop = 0.0;
            let mut off = Vec::new();
            for tr in model.transitions(s) {
                match pos[tr.target] {
                    Some(c) if unknowns[c] == s => self_loop += tr.probability,
                    Some(c) => off.push((c, tr.probability)),
                    None => {}
                }
            }
            (off, self_loop)
        })
        .collect();
    let order = sweep_order(&rows, unknowns, model, pos);
    let mut values = Vec::with_capacity(rhs.len());
    let mut iterations = 0;
    for b in rhs {
        let mut x = vec![0.0; n];
        let mut converged = false;
        let mut it = 0;
        while it < max_iterations {
            it += 1;
            let mut change: f64 = 0.0;
            for &j in &order {
                let (off, self_loop) = &rows[j];
                let acc = b[j] + off.iter().map(|&(c, p)| p * x[c]).sum::<f64>();
                let next = acc / (1.0 - self_loop);
                let diff = (next - x[j]).abs();
                change = change.max(if next != 0.0 { diff / next.abs() } else { diff });
                x[j] = next;
            }
            if !change.is_finite() {
                break;
            }
            if change <= tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            let residual = rows
                .iter()
                .enumerate()
                .map(|(j, (off, self_loop))| {
                    let fx =
                        b[j] + off.iter().map(|&(c, p)| p * x[c]).sum::<f64>() + self_loop * x[j];
                    (fx - x[j]).abs()
                })
                .fold(0.0, f64::max);
            return Err(Error::NotConverged {
                iterations: it,
                residual,
            });
        }
        iterations = iterations.max(it);
        values.push(x);
    }
    Ok(Solution { values, iterations })
}

/// Rows sorted by backward distance from the rows that leave the system,
/// so one sweep carries known values as far upstream as possible.
fn sweep_order(
    rows: &[(Vec<(usize, f64)>, f64)],
    unknowns: &[usize],
    model: &DtmcModel,
    pos: &[Option<usize>],
) -> Vec<usize> {
    let n = rows.len();
    let mut pred = vec![Vec::new(); n];
    for (j, (off, _)) in rows.iter().enumerate() {
        for &(c, _) in off {
            pred[c].push(j);
        }
    }
    let mut seen = vec![false; n];
    let mut order: Vec<usize> = (0..n)
        .filter(|&j| {
            model
                .transitions(unknowns[j])
                .iter()
                .any(|tr| pos[tr.target].is_none())
        })
        .collect();
    for &j in &order {
        seen[j] = true;
    }
    let mut head = 0;
    while head < order.len() {
        let j = order[head];
        head += 1;
        for &q in &pred[j] {
            if !seen[q] {
                seen[q] = true;
                order.push(q);
            }
        }
    }
    order.extend((0..n).filter(|&j| !seen[j]));
    order
}
