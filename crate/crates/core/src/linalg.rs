//! Absorbing-chain linear algebra shared by the potential-theory and
//! domination modules: a slot-based adjacency of the killed walk, dense LU
//! solves for small systems and matrix-free conjugate gradients for large
//! ones. `(I - P)` is symmetric positive definite for every strictly
//! substochastic restriction of the walk, so CG applies directly.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::lattice::{Geometry, Point, Region};

/// Where one step from an interior state lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Another interior state.
    State(u32),
    /// A point of the absorbing target set (index into the caller's target list).
    Target(u32),
    /// Outside the domain entirely (killed).
    Killed,
}

/// One-step structure of the walk restricted to an ordered state list. Each
/// state has exactly `2 (d+1)` slots, one per direction, so the N = 2 torus
/// multi-edges keep their correct weight.
pub struct Adjacency {
    pub states: Vec<Point>,
    pub degree: usize,
    pub slots: Vec<Slot>,
}

impl Adjacency {
    /// Build the killed-walk adjacency on `domain` (a deterministic, sorted
    /// enumeration), with steps into `targets` earmarked separately.
    pub fn build(g: &Geometry, domain: &Region, targets: Option<&Region>) -> Adjacency {
        let states = domain.sorted_points();
        let index: HashMap<&Point, u32> =
            states.iter().enumerate().map(|(i, p)| (p, i as u32)).collect();
        let target_pts: Vec<Point> = targets.map(|t| t.sorted_points()).unwrap_or_default();
        let tmap: HashMap<&Point, u32> =
            target_pts.iter().enumerate().map(|(i, p)| (p, i as u32)).collect();

        let degree = g.degree();
        let mut slots = Vec::with_capacity(states.len() * degree);
        for p in &states {
            for dir in 0..degree {
                let mut c: Vec<i64> = p.coords().to_vec();
                let axis = dir / 2;
                let sign = if dir % 2 == 0 { 1 } else { -1 };
                c[axis] += sign;
                let q = g.normalize(&c);
                if let Some(&i) = index.get(&q) {
                    slots.push(Slot::State(i));
                } else if let Some(&t) = tmap.get(&q) {
                    slots.push(Slot::Target(t));
                } else {
                    slots.push(Slot::Killed);
                }
            }
        }
        Adjacency { states, degree, slots }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn slots_of(&self, state: usize) -> &[Slot] {
        &self.slots[state * self.degree..(state + 1) * self.degree]
    }

    /// y <- (I - P) x, matrix-free.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let inv_deg = 1.0 / self.degree as f64;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for s in self.slots_of(i) {
                if let Slot::State(j) = s {
                    acc += x[*j as usize];
                }
            }
            *yi = x[i] - inv_deg * acc;
        }
    }

    /// One-step probability of stepping from `state` into target index `t`.
    pub fn step_to_target(&self, state: usize, t: u32) -> f64 {
        let hits = self.slots_of(state).iter().filter(|s| **s == Slot::Target(t)).count();
        hits as f64 / self.degree as f64
    }

    /// Right-hand side `b(y) = P(y -> any target)`.
    pub fn target_mass_rhs(&self) -> Vec<f64> {
        let inv_deg = 1.0 / self.degree as f64;
        (0..self.len())
            .map(|i| {
                self.slots_of(i).iter().filter(|s| matches!(s, Slot::Target(_))).count() as f64
                    * inv_deg
            })
            .collect()
    }

    /// Right-hand side `b(y) = P(y -> killed)` (one-step escape mass).
    pub fn killed_mass_rhs(&self) -> Vec<f64> {
        let inv_deg = 1.0 / self.degree as f64;
        (0..self.len())
            .map(|i| {
                self.slots_of(i).iter().filter(|s| matches!(s, Slot::Killed)).count() as f64
                    * inv_deg
            })
            .collect()
    }

    fn dense_system(&self) -> DMatrix<f64> {
        let n = self.len();
        let inv_deg = 1.0 / self.degree as f64;
        let mut m = DMatrix::identity(n, n);
        for i in 0..n {
            for s in self.slots_of(i) {
                if let Slot::State(j) = s {
                    m[(i, *j as usize)] -= inv_deg;
                }
            }
        }
        m
    }
}

/// Hard ceiling for dense direct solves.
pub const DENSE_STATE_LIMIT: usize = 20_000;
/// Above this the generic solvers switch from LU to CG.
pub const DENSE_SWITCH: usize = 4_000;

/// Full Green matrix `(I - P)^{-1}` by dense LU.
pub fn dense_green(adj: &Adjacency) -> Result<DMatrix<f64>> {
    let n = adj.len();
    if n > DENSE_STATE_LIMIT {
        return Err(CoreError::RegionTooLarge { states: n, limit: DENSE_STATE_LIMIT });
    }
    let m = adj.dense_system();
    m.try_inverse().ok_or_else(|| CoreError::Solve("singular killed-walk system".into()))
}

/// Solve `(I - P) X = B` for several right-hand sides by dense LU.
pub fn dense_solve(adj: &Adjacency, rhs: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = adj.len();
    if n > DENSE_STATE_LIMIT {
        return Err(CoreError::RegionTooLarge { states: n, limit: DENSE_STATE_LIMIT });
    }
    let lu = adj.dense_system().lu();
    lu.solve(&rhs).ok_or_else(|| CoreError::Solve("singular killed-walk system".into()))
}

/// Conjugate gradients on `(I - P) x = b`, matrix-free and deterministic.
pub fn cg_solve(adj: &Adjacency, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = adj.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let b_norm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    for _ in 0..max_iter {
        if rs.sqrt() <= rel_tol * b_norm {
            return Ok(x);
        }
        adj.apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(CoreError::Solve("CG lost positive definiteness".into()));
        }
        let alpha = rs / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rs.sqrt() <= rel_tol * b_norm * 100.0 {
        // accept a near-converged answer rather than fail on a tight tolerance
        return Ok(x);
    }
    Err(CoreError::Solve(format!(
        "CG did not converge in {max_iter} iterations (residual {:.3e})",
        rs.sqrt() / b_norm
    )))
}

/// Solve `(I - P) x = b` choosing LU or CG by system size.
pub fn solve_auto(adj: &Adjacency, b: &[f64]) -> Result<Vec<f64>> {
    if adj.len() <= DENSE_SWITCH {
        let rhs = DMatrix::from_column_slice(adj.len(), 1, b);
        let x = dense_solve(adj, rhs)?;
        Ok(x.column(0).iter().copied().collect())
    } else {
        cg_solve(adj, b, 1e-13, 200_000)
    }
}

/// Solve `(I - P) x = b` for many right-hand sides, sharing one LU
/// factorization when dense is affordable.
pub fn solve_many(adj: &Adjacency, bs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = adj.len();
    if n <= DENSE_SWITCH {
        let mut rhs = DMatrix::zeros(n, bs.len());
        for (c, b) in bs.iter().enumerate() {
            rhs.column_mut(c).copy_from_slice(b);
        }
        let x = dense_solve(adj, rhs)?;
        Ok((0..bs.len()).map(|c| x.column(c).iter().copied().collect()).collect())
    } else {
        bs.iter().map(|b| cg_solve(adj, b, 1e-13, 200_000)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice;

    #[test]
    fn green_of_single_point_is_one() {
        let g = Geometry::lattice(3).unwrap();
        let u = Region::from_points(g, [Point::origin(&g)]);
        let adj = Adjacency::build(&g, &u, None);
        let green = dense_green(&adj).unwrap();
        assert!((green[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cg_matches_dense_on_random_region() {
        let g = Geometry::lattice(3).unwrap();
        let u = lattice::make_box(&Point::origin(&g), 2, &g).unwrap();
        let adj = Adjacency::build(&g, &u, None);
        let b = adj.killed_mass_rhs();
        let x_cg = cg_solve(&adj, &b, 1e-13, 10_000).unwrap();
        let x_lu = {
            let rhs = DMatrix::from_column_slice(adj.len(), 1, &b);
            dense_solve(&adj, rhs).unwrap()
        };
        for i in 0..adj.len() {
            assert!((x_cg[i] - x_lu[(i, 0)]).abs() < 1e-10);
        }
    }
}
