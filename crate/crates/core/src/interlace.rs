//! Sampling the trace of random interlacements in a finite lattice box:
//! Poisson clouds of forward trajectories launched from the equilibrium
//! measure of a base set, vacant-set checks against the exact void
//! probability, and planar *-path decay estimation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::lattice::{Geometry, Point, Region};
use crate::potential::{self, WholeSpaceResult};
use crate::rng::RngStream;
use crate::walk::{self, PathSample};

/// A sampled Poisson cloud of killed forward trajectories; its ranges
/// intersected with a window approximate the interlacement set at level `u`.
pub struct TrajectoryCloud {
    pub u: f64,
    pub trajectories: Vec<PathSample>,
    pub r_kill: i64,
    /// Certified bound on the probability that a single trajectory,
    /// truncated at `r_kill`, would have revisited the base set afterwards.
    pub leakage: f64,
    pub cap: f64,
    pub cap_error: f64,
}

/// Reusable per-base-set state: capacity, normalized equilibrium measure,
/// kill radius and its leakage bound.
pub struct CloudSampler {
    geometry: Geometry,
    r_kill: i64,
    /// Poisson intensity per unit level: the extrapolated whole-space cap.
    cap: f64,
    cap_error: f64,
    leakage: f64,
    /// `(start point, cumulative window equilibrium mass)` for inverse-CDF
    /// draws; the total differs slightly from `cap` by the window error.
    cdf: Vec<(Point, f64)>,
    cdf_total: f64,
}

impl CloudSampler {
    /// `r_kill` defaults to five times the circumradius of `K`; `radii`
    /// overrides the capacity-extrapolation windows.
    pub fn new(k: &Region, r_kill: Option<i64>, radii: Option<&[i64]>) -> Result<CloudSampler> {
        let g = *k.geometry();
        if !matches!(g, Geometry::Lattice { .. }) {
            return Err(CoreError::InvalidParams("CloudSampler needs lattice geometry".into()));
        }
        let c = k.circumradius(&Point::origin(&g)).max(1);
        let r_kill = r_kill.unwrap_or(5 * c);
        if r_kill <= c {
            return Err(CoreError::InvalidParams(format!(
                "r_kill = {r_kill} must exceed the circumradius {c} of K"
            )));
        }
        let r1 = (2 * c).max(c + 3);
        let default_radii = [r1, 2 * r1];
        let ws: WholeSpaceResult = potential::whole_space(k, radii.unwrap_or(&default_radii))?;
        let mut cdf = Vec::with_capacity(ws.measure.len());
        let mut acc = 0.0;
        for (p, m) in &ws.measure {
            acc += m;
            cdf.push((p.clone(), acc));
        }
        let p1 = potential::hit_from_sphere(k, r_kill.min(48))?;
        let leakage = if p1 < 1.0 { p1 / (1.0 - p1) } else { 1.0 };
        Ok(CloudSampler {
            geometry: g,
            r_kill,
            cap: ws.extrapolated.unwrap_or(ws.capacity),
            cap_error: ws.error,
            leakage,
            cdf_total: acc,
            cdf,
        })
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn r_kill(&self) -> i64 {
        self.r_kill
    }

    fn sample_start(&self, rng: &mut ChaCha8Rng) -> Point {
        let target = rng.gen::<f64>() * self.cdf_total;
        for (p, acc) in &self.cdf {
            if target <= *acc {
                return p.clone();
            }
        }
        self.cdf.last().unwrap().0.clone()
    }

    fn run_trajectory(&self, start: Point, rng: &mut ChaCha8Rng) -> PathSample {
        let r = self.r_kill;
        walk::run_until(
            &self.geometry,
            start,
            |p| p.last().coords().iter().any(|c| c.abs() > r),
            rng,
            walk::DEFAULT_STEP_CAP,
        )
        .expect("killed trajectory exceeds step cap")
    }

    /// A cloud at level `u`: Poisson(u cap K) trajectories from `e_K / cap K`.
    pub fn sample_cloud(&self, u: f64, rng: &mut ChaCha8Rng) -> TrajectoryCloud {
        let mut trajectories = Vec::new();
        let mean = u * self.cap;
        if mean > 0.0 {
            let count = Poisson::new(mean).unwrap().sample(rng) as u64;
            for _ in 0..count {
                let start = self.sample_start(rng);
                trajectories.push(self.run_trajectory(start, rng));
            }
        }
        TrajectoryCloud {
            u,
            trajectories,
            r_kill: self.r_kill,
            leakage: self.leakage,
            cap: self.cap,
            cap_error: self.cap_error,
        }
    }

    /// Superposition coupling: extend `cloud` (level u) to level `u2 >= u`
    /// by appending an independent Poisson((u2-u) cap K) batch. The returned
    /// cloud contains every trajectory of the input, which makes the trace
    /// monotone in the level pathwise.
    pub fn extend_cloud(
        &self,
        cloud: &TrajectoryCloud,
        u2: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<TrajectoryCloud> {
        if u2 < cloud.u {
            return Err(CoreError::InvalidParams("extend_cloud: u2 below the cloud level".into()));
        }
        let mut out = TrajectoryCloud {
            u: u2,
            trajectories: cloud.trajectories.clone(),
            r_kill: cloud.r_kill,
            leakage: cloud.leakage,
            cap: cloud.cap,
            cap_error: cloud.cap_error,
        };
        let mean = (u2 - cloud.u) * self.cap;
        if mean > 0.0 {
            let count = Poisson::new(mean).unwrap().sample(rng) as u64;
            for _ in 0..count {
                let start = self.sample_start(rng);
                out.trajectories.push(self.run_trajectory(start, rng));
            }
        }
        Ok(out)
    }
}

/// Union of the trajectory ranges intersected with the window `A`.
pub fn trace(cloud: &TrajectoryCloud, a: &Region) -> Region {
    let g = *a.geometry();
    let mut out = Region::empty(g);
    for t in &cloud.trajectories {
        for p in t.points() {
            if a.contains(p) {
                out.insert(p.clone());
            }
        }
    }
    out
}

/// Empirical vs exact void probability of `K'` under clouds based on `K`.
pub struct VacantReport {
    pub frequency: f64,
    pub target: f64,
    pub stderr: f64,
    pub zscore: f64,
    pub reps: u64,
    pub leakage: f64,
}

/// Exact exit distribution of the walk started at the centre of the cube
/// `[-s, s]^dim`: offsets to the exit points paired with a cumulative
/// distribution for inverse-CDF draws. Substituting one draw for the
/// corresponding run of single steps leaves the law of (exit point, events
/// outside the cube) unchanged.
struct CubeKernel {
    s: i64,
    offsets: Vec<Vec<i64>>,
    cdf: Vec<f64>,
}

impl CubeKernel {
    fn build(dim: usize, s: i64) -> CubeKernel {
        let w = (2 * s - 1) as usize; // interior width, coords in [-(s-1), s-1]
        let full = (2 * s + 1) as usize; // full cube width, coords in [-s, s]
        let n_int = w.pow(dim as u32);
        let n_full = full.pow(dim as u32);
        let mut mass = vec![0.0f64; n_int];
        let mut next = vec![0.0f64; n_int];
        let mut boundary = vec![0.0f64; n_full];
        // centre index in both indexings
        let centre_int: usize = (0..dim).map(|i| (s - 1) as usize * w.pow(i as u32)).sum();
        mass[centre_int] = 1.0;
        let step = 1.0 / (2 * dim) as f64;
        let mut remaining = 1.0;
        while remaining > 1e-15 {
            for v in next.iter_mut() {
                *v = 0.0;
            }
            for (idx, &m) in mass.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let share = m * step;
                // decode mixed-radix interior index
                let mut rem = idx;
                let mut coords = [0i64; 8];
                for c in coords.iter_mut().take(dim) {
                    *c = (rem % w) as i64 - (s - 1);
                    rem /= w;
                }
                for axis in 0..dim {
                    let stride = w.pow(axis as u32);
                    for dir in [1i64, -1] {
                        let c = coords[axis] + dir;
                        if c.abs() <= s - 1 {
                            next[(idx as i64 + dir * stride as i64) as usize] += share;
                        } else {
                            // exit point: full-cube index
                            let mut fidx = 0usize;
                            for (i, &cc) in coords.iter().enumerate().take(dim) {
                                let v = if i == axis { c } else { cc };
                                fidx += (v + s) as usize * full.pow(i as u32);
                            }
                            boundary[fidx] += share;
                        }
                    }
                }
            }
            std::mem::swap(&mut mass, &mut next);
            remaining = mass.iter().sum();
        }
        let total: f64 = boundary.iter().sum();
        let mut offsets = Vec::new();
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        for (fidx, &m) in boundary.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let mut rem = fidx;
            let mut coords = vec![0i64; dim];
            for c in coords.iter_mut() {
                *c = (rem % full) as i64 - s;
                rem /= full;
            }
            acc += m / total;
            offsets.push(coords);
            cdf.push(acc);
        }
        CubeKernel { s, offsets, cdf }
    }

    fn jump(&self, c: &mut [i64], rng: &mut ChaCha8Rng) {
        let t = rng.gen::<f64>();
        let i = self.cdf.partition_point(|&a| a < t).min(self.offsets.len() - 1);
        for (x, d) in c.iter_mut().zip(&self.offsets[i]) {
            *x += d;
        }
    }
}

/// Allocation-free trajectory: does a walk from `start` enter `kset` before
/// leaving `B(0, r_kill)`? Membership is only probed inside `B(0, k_radius)`.
/// When the walk is at sup-distance more than `kernel.s` from both `K'` and
/// the kill sphere, a whole cube-exit block of steps is drawn at once.
fn fast_hits_before_exit(
    start: &[i64],
    r_kill: i64,
    kset: &std::collections::HashSet<Vec<i64>>,
    k_radius: i64,
    kernel: Option<&CubeKernel>,
    rng: &mut ChaCha8Rng,
) -> bool {
    let dim = start.len();
    let mut c = start.to_vec();
    if c.iter().all(|x| x.abs() <= k_radius) && kset.contains(&c) {
        return true;
    }
    loop {
        if let Some(k) = kernel {
            let sup = c.iter().map(|x| x.abs()).max().unwrap();
            if sup > k_radius + k.s && sup + k.s <= r_kill {
                k.jump(&mut c, rng);
                continue;
            }
        }
        let dir = rng.gen_range(0..2 * dim);
        let axis = dir / 2;
        c[axis] += if dir % 2 == 0 { 1 } else { -1 };
        if c[axis].abs() > r_kill {
            return false;
        }
        if c.iter().all(|x| x.abs() <= k_radius) && kset.contains(&c) {
            return true;
        }
    }
}

/// Frequency over `reps` clouds (base `K`, level `u`) of the event that no
/// trajectory meets `K'`, against `exp(-u cap(K'))` with the capacity taken
/// from the extrapolated window limit. With `K' = K` this is the Poisson
/// void probability; with `K'` strictly smaller it exercises the
/// compatibility of the sampler under restriction. `r_kill` defaults to 384;
/// the attached leakage figure is the estimated truncation bias of the
/// frequency (trajectories cut before a late return to `K'`).
pub fn vacant_check(
    kprime: &Region,
    k: &Region,
    u: f64,
    reps: u64,
    r_kill: Option<i64>,
    stream: RngStream,
) -> Result<VacantReport> {
    if !kprime.is_subset_of(k) {
        return Err(CoreError::InvalidParams("vacant_check: K' must be inside K".into()));
    }
    let g = *k.geometry();
    let origin = Point::origin(&g);
    let ck = k.circumradius(&origin).max(1);
    let rk1 = (6 * ck).max(12);
    let sampler = CloudSampler::new(k, None, Some(&[rk1, 2 * rk1]))?;
    let r_kill = r_kill.unwrap_or(384).max(2 * ck);
    let c = kprime.circumradius(&origin).max(1);
    let r1 = (4 * c).max(c + 8);
    let ws_prime = potential::whole_space(kprime, &[r1, 2 * r1])?;
    let cap_prime = ws_prime.extrapolated.unwrap_or(ws_prime.capacity);
    let target = (-u * cap_prime).exp();
    // Estimated truncation bias: every trajectory reaches the kill sphere,
    // from where a late hit of K' has probability ~ cap(K') g(r) ~ C / r.
    // Anchor the constant at a window we can solve exactly.
    let r_anchor = (3 * r1).min(48);
    let leakage = u
        * sampler.cap()
        * potential::hit_from_sphere(kprime, r_anchor)?
        * (r_anchor as f64 / r_kill as f64);

    let kset: std::collections::HashSet<Vec<i64>> =
        kprime.iter().map(|p| p.coords().to_vec()).collect();
    let dim = origin.coords().len();
    let kernel = match dim {
        0..=3 if r_kill > 4 * 10 => Some(CubeKernel::build(dim, 10)),
        4 if r_kill > 4 * 5 => Some(CubeKernel::build(dim, 5)),
        _ => None,
    };
    let hits: u64 = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream.replicate(r).rng();
            let mean = u * sampler.cap();
            let count =
                if mean > 0.0 { Poisson::new(mean).unwrap().sample(&mut rng) as u64 } else { 0 };
            let mut vacant = true;
            for _ in 0..count {
                let start = sampler.sample_start(&mut rng);
                if fast_hits_before_exit(start.coords(), r_kill, &kset, c, kernel.as_ref(), &mut rng)
                {
                    vacant = false;
                    break;
                }
            }
            u64::from(vacant)
        })
        .sum();
    let frequency = hits as f64 / reps as f64;
    let stderr = (target * (1.0 - target) / reps as f64).sqrt();
    let zscore = if stderr > 0.0 { (frequency - target) / stderr } else { 0.0 };
    Ok(VacantReport { frequency, target, stderr, zscore, reps, leakage })
}

/// One row of the planar decay table.
pub struct DecayRow {
    pub l: i64,
    pub p_hat: f64,
    pub stderr: f64,
}

pub struct DecayTable {
    pub u: f64,
    pub rows: Vec<DecayRow>,
    pub reps: u64,
    /// Least-squares slope of log p against log L over rows with p > 0,
    /// when at least two such rows exist.
    pub exponent: Option<f64>,
}

/// For each `L`, the empirical probability that the interlacement trace in
/// the plane `Z e_1 + Z e_{d+1}` contains a *-path from the origin to
/// `S(0, L)`. One cloud per replicate serves every `L` at once.
pub fn planar_star_decay(
    u: f64,
    ls: &[i64],
    reps: u64,
    stream: RngStream,
) -> Result<DecayTable> {
    if ls.is_empty() || ls.iter().any(|&l| l < 1) {
        return Err(CoreError::InvalidParams("planar_star_decay: need L >= 1".into()));
    }
    let l_max = *ls.iter().max().unwrap();
    let g = Geometry::lattice(3)?;
    let base = crate::lattice::make_box(&Point::origin(&g), l_max, &g)?;
    let sampler = CloudSampler::new(&base, None, None)?;

    let reached: Vec<i64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream.replicate(r).rng();
            let cloud = sampler.sample_cloud(u, &mut rng);
            planar_reach(&cloud, l_max)
        })
        .collect();

    let mut rows = Vec::with_capacity(ls.len());
    for &l in ls {
        let hits = reached.iter().filter(|&&m| m >= l).count() as f64;
        let p_hat = hits / reps as f64;
        let stderr = (p_hat * (1.0 - p_hat) / reps as f64).sqrt();
        rows.push(DecayRow { l, p_hat, stderr });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.p_hat > 0.0)
        .map(|r| ((r.l as f64).ln(), r.p_hat.ln()))
        .collect();
    let exponent = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
    } else {
        None
    };
    Ok(DecayTable { u, rows, reps, exponent })
}

/// Largest `L` such that the plane restriction of the cloud's trace holds a
/// *-path from the origin to S(0, L); -1 when the origin itself is vacant.
fn planar_reach(cloud: &TrajectoryCloud, l_max: i64) -> i64 {
    use std::collections::HashSet;
    let mut plane: HashSet<(i64, i64)> = HashSet::new();
    for t in &cloud.trajectories {
        for p in t.points() {
            let c = p.coords();
            if c[1] == 0 && c[0].abs() <= l_max && c[2].abs() <= l_max {
                plane.insert((c[0], c[2]));
            }
        }
    }
    if !plane.contains(&(0, 0)) {
        return -1;
    }
    let mut frontier = vec![(0i64, 0i64)];
    let mut seen: HashSet<(i64, i64)> = frontier.iter().cloned().collect();
    let mut best = 0i64;
    while let Some((x, z)) = frontier.pop() {
        best = best.max(x.abs().max(z.abs()));
        for dx in -1..=1 {
            for dz in -1..=1 {
                if dx == 0 && dz == 0 {
                    continue;
                }
                let q = (x + dx, z + dz);
                if plane.contains(&q) && seen.insert(q) {
                    frontier.push(q);
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_box;
    use crate::stats;

    fn ball(r: i64) -> Region {
        let g = Geometry::lattice(3).unwrap();
        make_box(&Point::origin(&g), r, &g).unwrap()
    }

    #[test]
    fn zero_level_cloud_is_empty() {
        let sampler = CloudSampler::new(&ball(1), None, None).unwrap();
        let mut rng = RngStream::new(20, 0).rng();
        let cloud = sampler.sample_cloud(0.0, &mut rng);
        assert!(cloud.trajectories.is_empty());
        let a = ball(2);
        assert!(trace(&cloud, &a).is_empty());
    }

    #[test]
    fn starts_follow_equilibrium_measure() {
        let g = Geometry::lattice(3).unwrap();
        let k = ball(1);
        let sampler = CloudSampler::new(&k, None, None).unwrap();
        let mut rng = RngStream::new(21, 0).rng();
        let draws = 10_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            let p = sampler.sample_start(&mut rng);
            *counts.entry(p).or_insert(0u64) += 1;
        }
        let (_, inner) = crate::lattice::boundaries(&k);
        assert!(counts.keys().all(|p| inner.contains(p)));
        let ws = potential::whole_space(&k, &[4, 8]).unwrap();
        let mut obs = Vec::new();
        let mut exp = Vec::new();
        for (p, m) in &ws.measure {
            if *m > 0.0 {
                obs.push(counts.get(p).copied().unwrap_or(0));
                exp.push(m / ws.capacity * draws as f64);
            }
        }
        let (_, pval) = stats::chi_square(&obs, &exp);
        assert!(pval > 1e-4, "p = {pval}");
        let _ = g;
    }

    #[test]
    fn void_probability_matches_capacity() {
        let k = ball(1);
        let sampler = CloudSampler::new(&k, None, None).unwrap();
        let u = 0.5;
        let reps = 20_000u64;
        let empty: u64 = (0..reps)
            .map(|r| {
                let mut rng = RngStream::new(22, r).rng();
                u64::from(sampler.sample_cloud(u, &mut rng).trajectories.is_empty())
            })
            .sum();
        let target = (-u * sampler.cap()).exp();
        let phat = empty as f64 / reps as f64;
        let sigma = (target * (1.0 - target) / reps as f64).sqrt();
        assert!((phat - target).abs() < 3.0 * sigma, "phat={phat} target={target}");
    }

    #[test]
    fn superposition_monotone() {
        let k = ball(1);
        let a = ball(3);
        let sampler = CloudSampler::new(&k, None, None).unwrap();
        let mut rng = RngStream::new(23, 0).rng();
        for _ in 0..30 {
            let c1 = sampler.sample_cloud(0.8, &mut rng);
            let c2 = sampler.extend_cloud(&c1, 2.0, &mut rng).unwrap();
            let t1 = trace(&c1, &a);
            let t2 = trace(&c2, &a);
            assert!(t1.is_subset_of(&t2));
        }
    }

    #[test]
    fn leakage_decreases_with_kill_radius() {
        let k = ball(1);
        let near = CloudSampler::new(&k, Some(4), None).unwrap();
        let far = CloudSampler::new(&k, Some(10), None).unwrap();
        assert!(far.leakage() < near.leakage());
        assert!(far.leakage() > 0.0);
    }

    #[test]
    fn vacant_check_singleton_in_ball() {
        let g = Geometry::lattice(3).unwrap();
        let kprime = Region::from_points(g, [Point::origin(&g)]);
        let k = ball(2);
        let rep =
            vacant_check(&kprime, &k, 0.5, 5_000, Some(384), RngStream::new(24, 0)).unwrap();
        // exp(-u cap({0})) with cap({0}) ~ 0.6595
        assert!((rep.target - (-0.5f64 * 0.6595).exp()).abs() < 0.002, "target {}", rep.target);
        assert!(rep.leakage < 0.005, "leakage {}", rep.leakage);
        assert!(rep.zscore.abs() < 3.5, "z = {}", rep.zscore);
    }

    #[test]
    fn star_decay_zero_level_and_monotone() {
        let table = planar_star_decay(0.0, &[1, 3], 200, RngStream::new(25, 0)).unwrap();
        assert!(table.rows.iter().all(|r| r.p_hat == 0.0));
        assert!(table.exponent.is_none());

        let table = planar_star_decay(0.05, &[3, 10], 4_000, RngStream::new(26, 0)).unwrap();
        let p3 = &table.rows[0];
        let p10 = &table.rows[1];
        assert!(p3.p_hat >= p10.p_hat);
        let sigma = (p3.stderr.powi(2) + p10.stderr.powi(2)).sqrt();
        assert!(p3.p_hat - p10.p_hat > 3.0 * sigma, "{} vs {}", p3.p_hat, p10.p_hat);
    }
}
