//! Seeded simple random walk on the cylinder and on `Z^{d+1}`: stopping
//! rules, the excursion decomposition between the slabs `B(z)` and `B~(z)`,
//! special and conditioned excursions, and the vertical skeleton with its
//! local times.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::lattice::{vertical_scales, Geometry, Point};

/// Default guard against runaway simulations.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

/// A realized trajectory; consecutive points are adjacent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSample {
    geometry: Geometry,
    points: Vec<Point>,
}

impl PathSample {
    pub fn new(geometry: Geometry, start: Point) -> PathSample {
        PathSample { geometry, points: vec![start] }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn push(&mut self, p: Point) {
        self.points.push(p);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last(&self) -> &Point {
        self.points.last().unwrap()
    }

    pub fn heights(&self) -> impl Iterator<Item = i64> + '_ {
        self.points.iter().map(|p| p.height())
    }

    /// Canonical byte encoding, for reproducibility checks.
    pub fn bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.points.len() * 8);
        for p in &self.points {
            for &c in p.coords() {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out
    }
}

/// One uniform nearest-neighbor step.
pub fn step_point(g: &Geometry, p: &Point, rng: &mut ChaCha8Rng) -> Point {
    let dir = rng.gen_range(0..g.degree());
    let mut c: Vec<i64> = p.coords().to_vec();
    c[dir / 2] += if dir % 2 == 0 { 1 } else { -1 };
    g.normalize(&c)
}

/// Run from `start` until `stop` first holds (checked on the initial
/// one-point path as well).
pub fn run_until(
    g: &Geometry,
    start: Point,
    mut stop: impl FnMut(&PathSample) -> bool,
    rng: &mut ChaCha8Rng,
    step_cap: u64,
) -> Result<PathSample> {
    let mut path = PathSample::new(*g, start);
    if stop(&path) {
        return Ok(path);
    }
    for _ in 0..step_cap {
        let next = step_point(g, path.last(), rng);
        path.points.push(next);
        if stop(&path) {
            return Ok(path);
        }
    }
    Err(CoreError::StepCapExceeded { cap: step_cap })
}

/// Initial distributions of the walk on the cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialDist {
    /// `q_z`: uniform on the torus level `T x {z}`.
    Level(i64),
    /// `q = (q_{r_N} + q_{-r_N}) / 2`.
    Sym,
}

pub fn sample_initial(g: &Geometry, dist: InitialDist, rng: &mut ChaCha8Rng) -> Result<Point> {
    let (d, n) = match g {
        Geometry::Cylinder { d, n } => (*d as usize, *n as i64),
        _ => return Err(CoreError::InvalidParams("sample_initial needs a cylinder".into())),
    };
    let z = match dist {
        InitialDist::Level(z) => z,
        InitialDist::Sym => {
            let (r_n, _) = vertical_scales(n as u32);
            if rng.gen_bool(0.5) {
                r_n
            } else {
                -r_n
            }
        }
    };
    let mut c = Vec::with_capacity(d + 1);
    for _ in 0..d {
        c.push(rng.gen_range(0..n));
    }
    c.push(z);
    Ok(Point::new(g, &c))
}

/// Return/departure times of the excursions between `B(z)` and `B~(z)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcursionTimes {
    pub z: i64,
    /// `R_1 <= D_1 < R_2 < D_2 < ...` interleaved as (R_k, D_k) pairs.
    pub returns: Vec<u64>,
    pub departures: Vec<u64>,
    /// Heights at the `R_k` (in `{z - r_N, z + r_N}`, or the start height
    /// when the walk starts inside `B(z)`).
    pub entry_heights: Vec<i64>,
    /// Heights at the `D_k` (always in `{z - h_N, z + h_N}`).
    pub exit_heights: Vec<i64>,
}

/// Incremental recognizer of the return/departure times; feed it the height
/// at every step.
pub struct ExcursionTracker {
    z: i64,
    r_n: i64,
    h_n: i64,
    in_excursion: bool,
    times: ExcursionTimes,
}

impl ExcursionTracker {
    pub fn new(g: &Geometry, z: i64) -> Result<ExcursionTracker> {
        let n = match g {
            Geometry::Cylinder { n, .. } => *n,
            _ => return Err(CoreError::InvalidParams("excursions need a cylinder".into())),
        };
        let (r_n, h_n) = vertical_scales(n);
        Ok(ExcursionTracker {
            z,
            r_n,
            h_n,
            in_excursion: false,
            times: ExcursionTimes {
                z,
                returns: Vec::new(),
                departures: Vec::new(),
                entry_heights: Vec::new(),
                exit_heights: Vec::new(),
            },
        })
    }

    /// Number of completed excursions so far.
    pub fn completed(&self) -> usize {
        self.times.departures.len()
    }

    pub fn observe(&mut self, step: u64, height: i64) {
        let dz = height - self.z;
        if self.in_excursion {
            if dz.abs() >= self.h_n {
                self.times.departures.push(step);
                self.times.exit_heights.push(height);
                self.in_excursion = false;
            }
        } else if dz.abs() <= self.r_n {
            self.times.returns.push(step);
            self.times.entry_heights.push(height);
            self.in_excursion = true;
        }
    }

    pub fn finish(self) -> ExcursionTimes {
        self.times
    }
}

/// First `count` excursion pairs of a walk started at `start`; the walk is
/// extended lazily until `D_count` is realized and each visited point is
/// handed to `visit`.
pub fn run_excursions(
    g: &Geometry,
    start: Point,
    z: i64,
    count: usize,
    rng: &mut ChaCha8Rng,
    step_cap: u64,
    mut visit: impl FnMut(u64, &Point),
) -> Result<ExcursionTimes> {
    if count == 0 {
        return Ok(ExcursionTracker::new(g, z)?.finish());
    }
    let mut tracker = ExcursionTracker::new(g, z)?;
    let mut pos = start;
    visit(0, &pos);
    tracker.observe(0, pos.height());
    let mut step = 0u64;
    while tracker.completed() < count {
        if step >= step_cap {
            return Err(CoreError::StepCapExceeded { cap: step_cap });
        }
        pos = step_point(g, &pos, rng);
        step += 1;
        visit(step, &pos);
        tracker.observe(step, pos.height());
    }
    Ok(tracker.finish())
}

/// Same times from an already-realized path.
pub fn excursions_from_path(path: &PathSample, z: i64, count: usize) -> Result<ExcursionTimes> {
    let mut tracker = ExcursionTracker::new(path.geometry(), z)?;
    for (step, h) in path.heights().enumerate() {
        tracker.observe(step as u64, h);
        if tracker.completed() >= count {
            break;
        }
    }
    if tracker.completed() < count {
        return Err(CoreError::InvalidParams(format!(
            "path realizes only {} of {count} excursions",
            tracker.completed()
        )));
    }
    Ok(tracker.finish())
}

/// A walk started from `q` and stopped on leaving `B~(0)`.
pub fn special_excursion(g: &Geometry, rng: &mut ChaCha8Rng, step_cap: u64) -> Result<PathSample> {
    let n = match g {
        Geometry::Cylinder { n, .. } => *n,
        _ => return Err(CoreError::InvalidParams("special_excursion needs a cylinder".into())),
    };
    let (_, h_n) = vertical_scales(n);
    let start = sample_initial(g, InitialDist::Sym, rng)?;
    run_until(g, start, |p| p.last().height().abs() >= h_n, rng, step_cap)
}

/// A walk from `q_{z1}` stopped on leaving `B~(0)`, conditioned to exit at
/// height `z2` (one of the two exit levels), by rejection. Returns the path
/// and the number of attempts consumed.
pub fn conditioned_excursion(
    g: &Geometry,
    z1: i64,
    z2: i64,
    rng: &mut ChaCha8Rng,
    step_cap: u64,
) -> Result<(PathSample, u64)> {
    let n = match g {
        Geometry::Cylinder { n, .. } => *n,
        _ => return Err(CoreError::InvalidParams("conditioned_excursion needs a cylinder".into())),
    };
    let (_, h_n) = vertical_scales(n);
    if z2.abs() != h_n {
        return Err(CoreError::InvalidParams(format!("exit height must be ±{h_n}, got {z2}")));
    }
    if z1.abs() >= h_n {
        return Err(CoreError::InvalidParams("start level must lie strictly inside B~".into()));
    }
    let mut attempts = 0u64;
    loop {
        attempts += 1;
        let start = sample_initial(g, InitialDist::Level(z1), rng)?;
        let path = run_until(g, start, |p| p.last().height().abs() >= h_n, rng, step_cap)?;
        if path.last().height() == z2 {
            return Ok((path, attempts));
        }
    }
}

/// Times of vertical displacement and the time-changed height walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerticalSkeleton {
    /// `rho_0 = 0 < rho_1 < ...`: step indices where the height moves.
    pub rho: Vec<u64>,
    /// `Zhat_m`, the height at `rho_m`; a ±1-step walk.
    pub zhat: Vec<i64>,
}

impl VerticalSkeleton {
    /// Local time `Lhat^z_k`: visits of `Zhat` to `z` before index `k`.
    pub fn local_time(&self, z: i64, k: usize) -> u64 {
        self.zhat.iter().take(k).filter(|&&h| h == z).count() as u64
    }
}

pub fn vertical_skeleton(path: &PathSample) -> VerticalSkeleton {
    let mut rho = vec![0u64];
    let heights: Vec<i64> = path.heights().collect();
    let mut zhat = vec![heights[0]];
    for (i, &h) in heights.iter().enumerate().skip(1) {
        if h != *zhat.last().unwrap() {
            rho.push(i as u64);
            zhat.push(h);
        }
    }
    VerticalSkeleton { rho, zhat }
}

/// `gamma^z_u`: the first displacement time `rho_k` whose local time at `z`
/// has reached `u`, or None if the path never gets there.
pub fn gamma_level_time(skel: &VerticalSkeleton, z: i64, u: u64) -> Option<u64> {
    let mut visits = 0u64;
    for (k, &h) in skel.zhat.iter().enumerate() {
        if visits >= u {
            return Some(skel.rho[k]);
        }
        if h == z {
            visits += 1;
        }
    }
    // the local time may first reach u only past the last recorded
    // displacement; that time is not observable within this path
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::stats;

    fn cyl(d: u32, n: u32) -> Geometry {
        Geometry::cylinder(d, n).unwrap()
    }

    #[test]
    fn exit_heights_of_wide_slab() {
        let g = cyl(2, 4);
        let (_, h_n) = vertical_scales(4);
        let mut rng = RngStream::new(5, 0).rng();
        for _ in 0..20 {
            let p = special_excursion(&g, &mut rng, DEFAULT_STEP_CAP).unwrap();
            assert_eq!(p.points()[0].height().abs(), 4);
            assert_eq!(p.last().height().abs(), h_n);
            // strictly inside before the end
            assert!(p.heights().take(p.len() - 1).all(|h| h.abs() < h_n));
        }
    }

    #[test]
    fn return_time_semantics() {
        // stopping on a revisit of the start forces length >= 2
        let g = cyl(2, 3);
        let start = Point::origin(&g);
        let mut rng = RngStream::new(6, 0).rng();
        let s2 = start.clone();
        let p = run_until(
            &g,
            start,
            move |p| p.len() > 1 && *p.last() == s2,
            &mut rng,
            DEFAULT_STEP_CAP,
        )
        .unwrap();
        assert!(p.len() >= 3); // leave and come back
    }

    #[test]
    fn gamblers_ruin_exit_probability() {
        // P[exit (-h, h) through +h from z] = (z + h) / 2h
        let g = cyl(2, 4);
        let (r_n, h_n) = vertical_scales(4);
        let z = r_n;
        let reps = 100_000u32;
        let mut rng = RngStream::new(7, 0).rng();
        let mut hits = 0u32;
        for _ in 0..reps {
            let start = sample_initial(&g, InitialDist::Level(z), &mut rng).unwrap();
            let p =
                run_until(&g, start, |p| p.last().height().abs() >= h_n, &mut rng, u64::MAX)
                    .unwrap();
            if p.last().height() == h_n {
                hits += 1;
            }
        }
        let p_exact = (z + h_n) as f64 / (2 * h_n) as f64;
        let phat = hits as f64 / reps as f64;
        let sigma = (p_exact * (1.0 - p_exact) / reps as f64).sqrt();
        assert!((phat - p_exact).abs() < 3.0 * sigma, "phat={phat} exact={p_exact}");
    }

    #[test]
    fn initial_distribution_marginals() {
        let g = cyl(2, 6);
        let (r_n, _) = vertical_scales(6);
        let mut rng = RngStream::new(8, 0).rng();
        let draws = 10_000;
        let mut plus = 0u64;
        let mut torus_counts = vec![0u64; 36];
        for _ in 0..draws {
            let p = sample_initial(&g, InitialDist::Sym, &mut rng).unwrap();
            assert!(p.height().abs() == r_n);
            if p.height() > 0 {
                plus += 1;
            }
            let t = p.torus();
            torus_counts[(t[0] * 6 + t[1]) as usize] += 1;
        }
        let exp_half = [plus, draws - plus];
        let (_, p_half) = stats::chi_square(&exp_half, &[draws as f64 / 2.0; 2]);
        assert!(p_half > 1e-4);
        let expected = vec![draws as f64 / 36.0; 36];
        let (_, p_torus) = stats::chi_square(&torus_counts, &expected);
        assert!(p_torus > 1e-4);
    }

    #[test]
    fn excursion_ordering_and_gap() {
        let g = cyl(2, 4);
        let (r_n, _) = vertical_scales(4);
        let mut rng = RngStream::new(9, 0).rng();
        let start = sample_initial(&g, InitialDist::Level(0), &mut rng).unwrap();
        let mut heights = Vec::new();
        let times = run_excursions(&g, start, 0i64, 4, &mut rng, u64::MAX, |_, p| {
            heights.push(p.height())
        })
        .unwrap();
        // start inside B(0) => R_1 = 0
        assert_eq!(times.returns[0], 0);
        assert_eq!(times.returns.len(), 4);
        assert_eq!(times.departures.len(), 4);
        for k in 0..4 {
            assert!(times.returns[k] <= times.departures[k]);
            if k > 0 {
                assert!(times.departures[k - 1] < times.returns[k]);
                // between D_k and R_{k+1} the height stays outside (-r_N, r_N)
                for s in (times.departures[k - 1] as usize)..(times.returns[k] as usize) {
                    assert!(heights[s].abs() >= r_n);
                }
            }
        }
        for (&d, &h) in times.departures.iter().zip(&times.exit_heights) {
            assert_eq!(heights[d as usize], h);
            assert_eq!(h.abs(), vertical_scales(4).1);
        }
    }

    #[test]
    fn conditioned_exit_and_acceptance_rate() {
        let g = cyl(2, 4);
        let (r_n, h_n) = vertical_scales(4);
        let mut rng = RngStream::new(10, 0).rng();
        let trials = 10_000u64;
        let mut attempts_total = 0u64;
        for _ in 0..trials {
            let (p, a) =
                conditioned_excursion(&g, r_n, h_n, &mut rng, DEFAULT_STEP_CAP).unwrap();
            assert_eq!(p.last().height(), h_n);
            attempts_total += a;
        }
        let acc = (h_n + r_n) as f64 / (2 * h_n) as f64;
        // attempts are geometric with mean 1/acc
        let mean_attempts = attempts_total as f64 / trials as f64;
        let sigma = ((1.0 - acc) / (acc * acc) / trials as f64).sqrt();
        assert!((mean_attempts - 1.0 / acc).abs() < 3.0 * sigma);
    }

    #[test]
    fn skeleton_steps_and_geometric_gaps() {
        let g = cyl(2, 4);
        let mut rng = RngStream::new(11, 0).rng();
        let start = Point::origin(&g);
        let p = run_until(&g, start, |p| p.len() >= 100_000, &mut rng, u64::MAX).unwrap();
        let sk = vertical_skeleton(&p);
        for w in sk.zhat.windows(2) {
            assert_eq!((w[1] - w[0]).abs(), 1);
        }
        // gaps ~ Geometric(1/(d+1)), mean d+1 = 3
        let gaps: Vec<f64> =
            sk.rho.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        let (mean, se) = stats::mean_stderr(&gaps);
        assert!((mean - 3.0).abs() < 4.0 * se, "mean gap {mean}");
        // each step moves the height with probability 1/(d+1)
        let moves = sk.rho.len() - 1;
        let steps = p.len() - 1;
        let phat = moves as f64 / steps as f64;
        let sigma = ((1.0 / 3.0) * (2.0 / 3.0) / steps as f64).sqrt();
        assert!((phat - 1.0 / 3.0).abs() < 4.0 * sigma);
    }

    #[test]
    fn gamma_level_time_consistency() {
        let g = cyl(2, 3);
        let mut rng = RngStream::new(12, 0).rng();
        let p = run_until(&g, Point::origin(&g), |p| p.len() >= 5000, &mut rng, u64::MAX)
            .unwrap();
        let sk = vertical_skeleton(&p);
        assert_eq!(gamma_level_time(&sk, 0, 0), Some(0));
        for u in [1u64, 3, 7] {
            if let Some(t) = gamma_level_time(&sk, 0, u) {
                let k = sk.rho.iter().position(|&r| r == t).unwrap();
                assert!(sk.local_time(0, k) >= u);
                if k > 0 {
                    assert!(sk.local_time(0, k - 1) < u);
                }
            }
        }
    }

    #[test]
    fn determinism_same_stream_same_bytes() {
        let g = cyl(2, 5);
        let mk = || {
            let mut rng = RngStream::new(99, 4).rng();
            run_until(&g, Point::origin(&g), |p| p.len() >= 1000, &mut rng, u64::MAX).unwrap()
        };
        assert_eq!(mk().bytes(), mk().bytes());
    }
}
