//! Sparse solves with the killed generator `I - P_V`.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use thiserror::Error;

use crate::chains::{BaseChain, VertexId};

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("sparse factorization failed: {0}")]
    Factor(String),
}

/// `I - P_V` as a sparse matrix. If `pinned` is given its row is replaced by
/// the identity row, which turns `A h = e_z` into the hitting problem for `z`.
pub fn killed_generator(chain: &BaseChain, pinned: Option<VertexId>) -> SparseColMat<usize, f64> {
    let n = chain.num_vertices();
    let mut entries = Vec::with_capacity(n * 6);
    for v in chain.vertices() {
        entries.push(Triplet::new(v.index(), v.index(), 1.0));
        if Some(v) == pinned {
            continue;
        }
        for e in chain.edges(v) {
            if !e.target.is_sink() {
                let p = e.weight as f64 / chain.denominator(v) as f64;
                entries.push(Triplet::new(v.index(), e.target.index(), -p));
            }
        }
    }
    SparseColMat::try_new_from_triplets(n, n, &entries).expect("valid triplets")
}

/// Solves `A X = B` with `A = killed_generator(chain, pinned)`. Returns the
/// solution and the max-norm residual, computed directly from the chain.
pub fn solve(chain: &BaseChain, pinned: Option<VertexId>, rhs: &Mat<f64>) -> Result<(Mat<f64>, f64), LinalgError> {
    let a = killed_generator(chain, pinned);
    let lu = a.sp_lu().map_err(|e| LinalgError::Factor(format!("{e:?}")))?;
    let x = lu.solve(rhs);
    let residual = residual(chain, pinned, &x, rhs);
    Ok((x, residual))
}

fn residual(chain: &BaseChain, pinned: Option<VertexId>, x: &Mat<f64>, rhs: &Mat<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..rhs.ncols() {
        for v in chain.vertices() {
            let mut r = x[(v.index(), j)] - rhs[(v.index(), j)];
            if Some(v) != pinned {
                for e in chain.edges(v) {
                    if !e.target.is_sink() {
                        r -= e.weight as f64 / chain.denominator(v) as f64 * x[(e.target.index(), j)];
                    }
                }
            }
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Expected absorption times `E_v tau` for every vertex, with the residual.
pub fn absorption_times(chain: &BaseChain) -> Result<(Vec<f64>, f64), LinalgError> {
    let n = chain.num_vertices();
    let (x, res) = solve(chain, None, &Mat::from_fn(n, 1, |_, _| 1.0))?;
    Ok(((0..n).map(|i| x[(i, 0)]).collect(), res))
}

/// Green function of the killed chain, `(I - P_V)^{-1}`, with the residual.
pub fn green_matrix(chain: &BaseChain) -> Result<(Mat<f64>, f64), LinalgError> {
    let n = chain.num_vertices();
    solve(chain, None, &Mat::identity(n, n))
}

/// `P_y(tau_z < tau_sink)` for all `y`, from the Dirichlet problem with
/// `h(z) = 1`, `h` harmonic on `V \ {z}` and zero at the sink.
pub fn hitting_probabilities(chain: &BaseChain, z: VertexId) -> Result<(Vec<f64>, f64), LinalgError> {
    let n = chain.num_vertices();
    let (x, res) = solve(chain, Some(z), &Mat::from_fn(n, 1, |i, _| if i == z.index() { 1.0 } else { 0.0 }))?;
    Ok(((0..n).map(|i| x[(i, 0)]).collect(), res))
}
