//! Exact potential theory on finite regions: killed Green functions,
//! equilibrium measures and capacities, hitting probabilities and laws, and
//! whole-space limits on `Z^{d+1}` through growing finite windows.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::lattice::{self, Geometry, Point, Region};
use crate::linalg::{self, Adjacency, Slot};

/// Green function `g_U` of the walk killed outside `U`, as a dense matrix
/// indexed by the sorted enumeration of `U`.
pub struct KilledWalkSolve {
    region: Region,
    points: Vec<Point>,
    index: HashMap<Point, usize>,
    green: DMatrix<f64>,
}

impl KilledWalkSolve {
    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// `g_U(x, x')`; zero when either point lies outside `U`.
    pub fn green(&self, x: &Point, xp: &Point) -> f64 {
        match (self.index.get(x), self.index.get(xp)) {
            (Some(&i), Some(&j)) => self.green[(i, j)],
            _ => 0.0,
        }
    }

    /// Worst asymmetry `max |g(x,x') - g(x',x)|`, a cheap self-check.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.points.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.green[(i, j)] - self.green[(j, i)]).abs());
            }
        }
        worst
    }
}

/// Expected visit counts `g_U = (I - P_U)^{-1}` by a dense solve.
pub fn solve_killed(u: &Region) -> Result<KilledWalkSolve> {
    if u.is_empty() {
        return Err(CoreError::InvalidParams("solve_killed: empty region".into()));
    }
    let g = *u.geometry();
    let adj = Adjacency::build(&g, u, None);
    let green = linalg::dense_green(&adj)?;
    let points = adj.states;
    let index = points.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
    let solve = KilledWalkSolve { region: u.clone(), points, index, green };
    let asym = solve.max_asymmetry();
    if asym > 1e-10 {
        return Err(CoreError::Solve(format!("Green matrix asymmetry {asym:.3e} exceeds 1e-10")));
    }
    Ok(solve)
}

/// Equilibrium measure of `K` relative to `U` and its total mass.
pub struct EquilibriumResult {
    /// `(x, e_{K,U}(x))` over the sorted points of `K` (zeros kept).
    pub measure: Vec<(Point, f64)>,
    pub capacity: f64,
}

impl EquilibriumResult {
    pub fn mass_at(&self, x: &Point) -> f64 {
        self.measure.iter().find(|(p, _)| p == x).map(|(_, m)| *m).unwrap_or(0.0)
    }
}

/// `e_{K,U}(x) = P_x[H~_K > T_U]` for `x` in `K`, by one linear solve on `U \ K`.
pub fn equilibrium(k: &Region, u: &Region) -> Result<EquilibriumResult> {
    if !k.is_subset_of(u) {
        return Err(CoreError::InvalidParams("equilibrium: K must be a subset of U".into()));
    }
    if k.is_empty() {
        return Err(CoreError::InvalidParams("equilibrium: empty K".into()));
    }
    let g = *u.geometry();
    let outside = u.minus(k);
    // h(y) = P_y[T_U < H_K] on U \ K; escape in one step feeds the rhs,
    // steps into K absorb at zero.
    let (adj, h) = if outside.is_empty() {
        (None, HashMap::new())
    } else {
        let adj = Adjacency::build(&g, &outside, Some(k));
        let b = adj.killed_mass_rhs();
        let x = linalg::solve_auto(&adj, &b)?;
        let map: HashMap<Point, f64> =
            adj.states.iter().cloned().zip(x.iter().copied()).collect();
        (Some(adj), map)
    };
    drop(adj);

    let deg = g.degree() as f64;
    let mut measure = Vec::with_capacity(k.len());
    let mut capacity = 0.0;
    for x in k.sorted_points() {
        let mut acc = 0.0;
        for dir in 0..g.degree() {
            let mut c: Vec<i64> = x.coords().to_vec();
            c[dir / 2] += if dir % 2 == 0 { 1 } else { -1 };
            let q = g.normalize(&c);
            if k.contains(&q) {
                // immediate return to K
            } else if u.contains(&q) {
                acc += h.get(&q).copied().unwrap_or(0.0);
            } else {
                acc += 1.0;
            }
        }
        let e = acc / deg;
        capacity += e;
        measure.push((x, e));
    }
    Ok(EquilibriumResult { measure, capacity })
}

/// `P_x[H_K < T_U]` computed two independent ways, with the sandwich bounds.
pub struct HitProb {
    /// Via the Green-function identity against the equilibrium measure.
    pub via_green: f64,
    /// Via a direct absorbing solve on `U \ K`.
    pub via_direct: f64,
    /// Sandwich lower bound: sum of Green values over K, normalized by the
    /// largest such sum from within K.
    pub lower: f64,
    /// Same numerator over the smallest such sum from within K.
    pub upper: f64,
}

pub fn hit_prob(x: &Point, k: &Region, u: &Region, solve: &KilledWalkSolve) -> Result<HitProb> {
    if !k.is_subset_of(u) || !u.contains(x) {
        return Err(CoreError::InvalidParams("hit_prob: need K ⊆ U and x ∈ U".into()));
    }
    let eq = equilibrium(k, u)?;
    let via_green: f64 = eq.measure.iter().map(|(xp, e)| solve.green(x, xp) * e).sum();

    let g = *u.geometry();
    let via_direct = if k.contains(x) {
        1.0
    } else {
        let outside = u.minus(k);
        let adj = Adjacency::build(&g, &outside, Some(k));
        let b = adj.target_mass_rhs();
        let w = linalg::solve_auto(&adj, &b)?;
        let idx = adj.states.iter().position(|p| p == x).unwrap();
        w[idx]
    };

    let num: f64 = k.sorted_points().iter().map(|xp| solve.green(x, xp)).sum();
    let sums: Vec<f64> = k
        .sorted_points()
        .iter()
        .map(|y| k.sorted_points().iter().map(|xp| solve.green(y, xp)).sum())
        .collect();
    let sup = sums.iter().cloned().fold(f64::MIN, f64::max);
    let inf = sums.iter().cloned().fold(f64::MAX, f64::min);
    Ok(HitProb { via_green, via_direct, lower: num / sup, upper: (num / inf).min(1.0) })
}

/// Exact law of the entry point `X_{H_K}` on `{H_K < T_U}` together with the
/// mass of the complementary event `{T_U < H_K}`.
pub struct HittingLaw {
    /// `(k, P_x[H_K < T_U, X_{H_K} = k])` over the sorted points of K.
    pub atoms: Vec<(Point, f64)>,
    pub exit_mass: f64,
}

impl HittingLaw {
    pub fn atom(&self, p: &Point) -> f64 {
        self.atoms.iter().find(|(q, _)| q == p).map(|(_, m)| *m).unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|(_, m)| m).sum::<f64>() + self.exit_mass
    }
}

pub fn hitting_law(x: &Point, k: &Region, u: &Region) -> Result<HittingLaw> {
    if !k.is_subset_of(u) || !u.contains(x) {
        return Err(CoreError::InvalidParams("hitting_law: need K ⊆ U and x ∈ U".into()));
    }
    let g = *u.geometry();
    let k_pts = k.sorted_points();
    if k.contains(x) {
        let atoms =
            k_pts.into_iter().map(|p| { let m = if p == *x { 1.0 } else { 0.0 }; (p, m) }).collect();
        return Ok(HittingLaw { atoms, exit_mass: 0.0 });
    }
    let outside = u.minus(k);
    let adj = Adjacency::build(&g, &outside, Some(k));
    let start = adj.states.iter().position(|p| p == x).unwrap();
    // law(t) = sum_y g_{U\K}(x, y) p(y -> t); one row of the Green matrix
    // suffices, obtained from the transposed system by symmetry.
    let row = {
        let mut b = vec![0.0; adj.len()];
        b[start] = 1.0;
        linalg::solve_auto(&adj, &b)?
    };
    let inv_deg = 1.0 / adj.degree as f64;
    let mut atom_mass = vec![0.0; k_pts.len()];
    let mut exit_mass = 0.0;
    for i in 0..adj.len() {
        for s in adj.slots_of(i) {
            match s {
                Slot::Target(t) => atom_mass[*t as usize] += row[i] * inv_deg,
                Slot::Killed => exit_mass += row[i] * inv_deg,
                Slot::State(_) => {}
            }
        }
    }
    let atoms = k_pts.into_iter().zip(atom_mass).collect();
    Ok(HittingLaw { atoms, exit_mass })
}

/// Window-limit approximation of the whole-space equilibrium measure and
/// capacity of a finite `K` in `Z^{d+1}`.
pub struct WholeSpaceResult {
    /// `(R, cap_{B(0,R)}(K))`, monotone decreasing in R.
    pub caps: Vec<(i64, f64)>,
    /// Equilibrium measure at the largest window.
    pub measure: Vec<(Point, f64)>,
    /// Capacity at the largest window.
    pub capacity: f64,
    /// Reported error bound: `cap_R(K) * max_{x in S(0,R)} P_x[H_K < T_{B(0,2R)}]`.
    pub error: f64,
    /// Richardson-style `cap + a/R` extrapolation from the last two windows
    /// (absent with a single radius).
    pub extrapolated: Option<f64>,
}

pub fn whole_space(k: &Region, radii: &[i64]) -> Result<WholeSpaceResult> {
    let g = *k.geometry();
    let dim = match g {
        Geometry::Lattice { dim } => dim as usize,
        _ => return Err(CoreError::InvalidParams("whole_space needs lattice geometry".into())),
    };
    if radii.is_empty() || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoreError::InvalidParams("whole_space: radii must be increasing".into()));
    }
    let origin = Point::origin(&g);
    let r_span = k.circumradius(&origin);
    if r_span >= radii[0] {
        return Err(CoreError::InvalidParams(format!(
            "whole_space: K (circumradius {r_span}) not inside B(0,{})",
            radii[0]
        )));
    }

    let mut caps = Vec::new();
    let mut measure = Vec::new();
    let mut capacity = 0.0;
    for &r in radii {
        let (m, c) = box_equilibrium(&g, dim, k, r)?;
        caps.push((r, c));
        measure = m;
        capacity = c;
    }
    let r_last = *radii.last().unwrap();
    let reach = box_hit_from_sphere(&g, dim, k, r_last)?;
    let extrapolated = if caps.len() >= 2 {
        // model cap_R = cap + a/R through the last two windows
        let (r1, c1) = caps[caps.len() - 2];
        let (r2, c2) = caps[caps.len() - 1];
        let a = (c2 - c1) / (1.0 / r2 as f64 - 1.0 / r1 as f64);
        Some(c2 - a / r2 as f64)
    } else {
        None
    };
    Ok(WholeSpaceResult { caps, measure, capacity, error: capacity * reach, extrapolated })
}

/// Dense per-point solves would not scale to the windows used here, so the
/// box solves below run matrix-free CG on a flat grid indexing of B(0,R).
struct BoxGrid {
    dim: usize,
    r: i64,
    side: i64,
}

impl BoxGrid {
    fn new(dim: usize, r: i64) -> BoxGrid {
        BoxGrid { dim, r, side: 2 * r + 1 }
    }

    fn len(&self) -> usize {
        (self.side as usize).pow(self.dim as u32)
    }

    fn index(&self, coords: &[i64]) -> usize {
        let mut idx = 0usize;
        for &c in coords.iter().rev() {
            idx = idx * self.side as usize + (c + self.r) as usize;
        }
        idx
    }

    fn coords(&self, mut idx: usize) -> Vec<i64> {
        let mut c = vec![0i64; self.dim];
        for v in c.iter_mut() {
            *v = (idx % self.side as usize) as i64 - self.r;
            idx /= self.side as usize;
        }
        c
    }
}

/// Roles of grid cells in the absorbing solve.
const ROLE_STATE: u8 = 0;
const ROLE_TARGET: u8 = 1;

fn grid_roles(grid: &BoxGrid, k: &Region) -> Vec<u8> {
    let mut roles = vec![ROLE_STATE; grid.len()];
    for p in k.iter() {
        roles[grid.index(p.coords())] = ROLE_TARGET;
    }
    roles
}

/// CG solve of `(I - P) w = b` on the grid with `K` absorbing and killing
/// outside the box; `b` is chosen by `rhs` from the one-step target / killed
/// masses of each state.
fn grid_solve(
    grid: &BoxGrid,
    roles: &[u8],
    rhs: impl Fn(usize, usize) -> f64,
) -> Result<Vec<f64>> {
    let n = grid.len();
    let deg = 2 * grid.dim;
    let inv_deg = 1.0 / deg as f64;

    // Precompute neighbor lists once; u32::MAX marks a step off the box.
    let mut nbrs = vec![u32::MAX; n * deg];
    let mut b = vec![0.0; n];
    for i in 0..n {
        if roles[i] != ROLE_STATE {
            continue;
        }
        let c = grid.coords(i);
        let mut t_hits = 0usize;
        let mut k_hits = 0usize;
        for axis in 0..grid.dim {
            for (s, slot) in [(1i64, 2 * axis), (-1, 2 * axis + 1)] {
                let v = c[axis] + s;
                if v.abs() > grid.r {
                    k_hits += 1;
                    continue;
                }
                let j = (i as i64 + s * (grid.side.pow(axis as u32))) as usize;
                if roles[j] == ROLE_TARGET {
                    t_hits += 1;
                } else {
                    nbrs[i * deg + slot] = j as u32;
                }
            }
        }
        b[i] = rhs(t_hits, k_hits) * inv_deg;
    }

    // CG on states only (target cells held at zero).
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            if roles[i] != ROLE_STATE {
                y[i] = 0.0;
                continue;
            }
            let mut acc = 0.0;
            for s in 0..deg {
                let j = nbrs[i * deg + s];
                if j != u32::MAX {
                    acc += x[j as usize];
                }
            }
            y[i] = x[i] - inv_deg * acc;
        }
    };

    let b_norm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    for _ in 0..100_000 {
        if rs.sqrt() <= 1e-13 * b_norm {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
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
    Err(CoreError::Solve("box CG did not converge".into()))
}

/// Equilibrium measure and capacity of K relative to B(0,R).
fn box_equilibrium(
    g: &Geometry,
    dim: usize,
    k: &Region,
    r: i64,
) -> Result<(Vec<(Point, f64)>, f64)> {
    let grid = BoxGrid::new(dim, r);
    let roles = grid_roles(&grid, k);
    // h(y) = P_y[T_box < H_K]
    let h = grid_solve(&grid, &roles, |_t, killed| killed as f64)?;
    let deg = 2 * dim;
    let mut measure = Vec::with_capacity(k.len());
    let mut capacity = 0.0;
    for x in k.sorted_points() {
        let mut acc = 0.0;
        for q in lattice::neighbors(&x, g) {
            let c = q.coords();
            if c.iter().any(|v| v.abs() > r) {
                acc += 1.0;
            } else if !k.contains(&q) {
                acc += h[grid.index(c)];
            }
        }
        let e = acc / deg as f64;
        capacity += e;
        measure.push((x, e));
    }
    Ok((measure, capacity))
}

/// `max_{x in S(0,R)} P_x[H_K < T_{B(0,2R)}]`, used both for the window
/// error bound above and as a truncation-leakage factor by the
/// interlacement sampler.
pub fn hit_from_sphere(k: &Region, r: i64) -> Result<f64> {
    let g = *k.geometry();
    let dim = match g {
        Geometry::Lattice { dim } => dim as usize,
        _ => return Err(CoreError::InvalidParams("hit_from_sphere needs lattice geometry".into())),
    };
    if k.circumradius(&Point::origin(&g)) >= r {
        return Err(CoreError::InvalidParams("hit_from_sphere: K not inside B(0,R)".into()));
    }
    box_hit_from_sphere(&g, dim, k, r)
}

fn box_hit_from_sphere(g: &Geometry, dim: usize, k: &Region, r: i64) -> Result<f64> {
    let grid = BoxGrid::new(dim, 2 * r);
    let roles = grid_roles(&grid, k);
    let w = grid_solve(&grid, &roles, |t, _k| t as f64)?;
    let mut best: f64 = 0.0;
    // scan the sphere S(0,R)
    let sphere = lattice::make_sphere(&Point::origin(g), r, g)?;
    for p in sphere.iter() {
        best = best.max(w[grid.index(p.coords())]);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_box;

    #[test]
    fn green_single_point() {
        let g = Geometry::lattice(3).unwrap();
        let u = Region::from_points(g, [Point::origin(&g)]);
        let s = solve_killed(&u).unwrap();
        let o = Point::origin(&g);
        assert!((s.green(&o, &o) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn green_symmetric_on_ball() {
        let g = Geometry::cylinder(2, 5).unwrap();
        let u = make_box(&Point::origin(&g), 2, &g).unwrap();
        let s = solve_killed(&u).unwrap();
        assert!(s.max_asymmetry() < 1e-10);
        assert!(s.points().iter().all(|p| s.green(p, p) >= 1.0));
    }

    #[test]
    fn equilibrium_singleton_inverse_green() {
        // K = {x}: e(x) = 1 / g_U(x,x), forced by the hitting identity.
        let g = Geometry::lattice(3).unwrap();
        let u = make_box(&Point::origin(&g), 3, &g).unwrap();
        let s = solve_killed(&u).unwrap();
        let o = Point::origin(&g);
        let k = Region::from_points(g, [o.clone()]);
        let eq = equilibrium(&k, &u).unwrap();
        assert!((eq.capacity - 1.0 / s.green(&o, &o)).abs() < 1e-10);
    }

    #[test]
    fn equilibrium_k_equals_u() {
        let g = Geometry::lattice(2).unwrap();
        let u = make_box(&Point::origin(&g), 1, &g).unwrap();
        let eq = equilibrium(&u, &u).unwrap();
        // corner of a 3x3 square exits in one step with prob 2/4
        let corner = Point::new(&g, &[1, 1]);
        assert!((eq.mass_at(&corner) - 0.5).abs() < 1e-12);
        let center = Point::origin(&g);
        assert_eq!(eq.mass_at(&center), 0.0);
    }

    #[test]
    fn equilibrium_supported_on_inner_boundary() {
        let g = Geometry::lattice(3).unwrap();
        let u = make_box(&Point::origin(&g), 4, &g).unwrap();
        let k = make_box(&Point::origin(&g), 2, &g).unwrap();
        let eq = equilibrium(&k, &u).unwrap();
        let (_, inner) = lattice::boundaries(&k);
        for (p, m) in &eq.measure {
            if !inner.contains(p) {
                assert_eq!(*m, 0.0, "interior point {p:?} carries mass");
            }
        }
        assert!(eq.capacity <= k.len() as f64);
    }

    #[test]
    fn green_1d_segment() {
        // three-site segment: the center is visited twice on average
        let g = Geometry::lattice(1).unwrap();
        let u = Region::from_points(
            g,
            (-1..=1).map(|z| Point::new(&g, &[z])),
        );
        let s = solve_killed(&u).unwrap();
        let o = Point::origin(&g);
        assert!((s.green(&o, &o) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hit_prob_gamblers_ruin_1d() {
        // U = (-h, h), K = {0}: P_z[hit 0 before leaving] = 1 - |z|/h
        let g = Geometry::lattice(1).unwrap();
        let h = 9i64;
        let u = Region::from_points(g, (-h + 1..h).map(|z| Point::new(&g, &[z])));
        let k = Region::from_points(g, [Point::origin(&g)]);
        let s = solve_killed(&u).unwrap();
        for z in [-6i64, -2, 0, 3, 8] {
            let hp = hit_prob(&Point::new(&g, &[z]), &k, &u, &s).unwrap();
            let exact = 1.0 - z.abs() as f64 / h as f64;
            assert!((hp.via_green - exact).abs() < 1e-9, "z={z}");
            assert!((hp.via_direct - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn hit_prob_identity_and_sandwich() {
        let g = Geometry::lattice(3).unwrap();
        let u = make_box(&Point::origin(&g), 3, &g).unwrap();
        let k = make_box(&Point::origin(&g), 1, &g).unwrap();
        let s = solve_killed(&u).unwrap();
        let inside = hit_prob(&Point::origin(&g), &k, &u, &s).unwrap();
        assert!((inside.via_green - 1.0).abs() < 1e-9);
        let x = Point::new(&g, &[3, 0, 0]);
        let hp = hit_prob(&x, &k, &u, &s).unwrap();
        assert!((hp.via_green - hp.via_direct).abs() < 1e-9);
        assert!(hp.lower <= hp.via_green + 1e-12 && hp.via_green <= hp.upper + 1e-12);
    }

    #[test]
    fn identity_and_sandwich_on_random_instances() {
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut rng = crate::rng::RngStream::new(11, 0).rng();
        let g = Geometry::lattice(3).unwrap();
        for _ in 0..20 {
            let ru = rng.gen_range(2..=3);
            let u = make_box(&Point::origin(&g), ru, &g).unwrap();
            let k_seed = make_box(&Point::origin(&g), 1, &g).unwrap().sorted_points();
            let npick = rng.gen_range(1..=4);
            let picks: Vec<Point> = k_seed.choose_multiple(&mut rng, npick).cloned().collect();
            let k = Region::from_points(g, picks);
            let s = solve_killed(&u).unwrap();
            let x = u.sorted_points().choose(&mut rng).unwrap().clone();
            let hp = hit_prob(&x, &k, &u, &s).unwrap();
            assert!((hp.via_green - hp.via_direct).abs() < 1e-9);
            assert!(hp.lower <= hp.via_green + 1e-12);
            assert!(hp.via_green <= hp.upper + 1e-12);
        }
    }

    #[test]
    fn hitting_law_normalizes_and_concentrates() {
        let g = Geometry::lattice(2).unwrap();
        let u = make_box(&Point::origin(&g), 4, &g).unwrap();
        let o = Point::origin(&g);
        let k = Region::from_points(g, [o.clone()]);
        let x = Point::new(&g, &[2, 1]);
        let law = hitting_law(&x, &k, &u).unwrap();
        assert!((law.total() - 1.0).abs() < 1e-10);
        assert!(law.atom(&o) > 0.0);
        assert_eq!(law.atoms.len(), 1);
    }

    #[test]
    fn hitting_law_symmetry() {
        let g = Geometry::lattice(2).unwrap();
        let u = make_box(&Point::origin(&g), 3, &g).unwrap();
        let k = make_box(&Point::origin(&g), 1, &g).unwrap();
        let x = Point::new(&g, &[0, 3]);
        let law = hitting_law(&x, &k, &u).unwrap();
        // mirror symmetry in the first coordinate
        for (p, m) in &law.atoms {
            let c = p.coords();
            let mirror = Point::new(&g, &[-c[0], c[1]]);
            assert!((law.atom(&mirror) - m).abs() < 1e-10);
        }
    }

    #[test]
    fn whole_space_monotone_and_capacity_origin() {
        let g = Geometry::lattice(3).unwrap();
        let k = Region::from_points(g, [Point::origin(&g)]);
        let ws = whole_space(&k, &[4, 8, 16]).unwrap();
        for w in ws.caps.windows(2) {
            assert!(w[0].1 >= w[1].1);
        }
        // cap({0}) = escape probability of the 3D walk, about 0.6595
        assert!((ws.capacity - 0.6595).abs() < 0.02);
        assert!(ws.error >= 0.0 && ws.error < 0.2);
        let extr = ws.extrapolated.unwrap();
        assert!((extr - 0.6595).abs() < 2e-3, "extrapolated {extr}");
    }
}
