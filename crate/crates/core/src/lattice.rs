//! Geometry of the discrete cylinder `(Z/NZ)^d x Z` and of `Z^{d+1}`:
//! points, nearest-neighbor and `*`-adjacency, boxes, slabs, boundaries,
//! and the identification of small cylinder boxes with lattice boxes.

use std::collections::HashSet;

use smallvec::SmallVec;

use crate::error::{CoreError, Result};

/// Which graph we are working on.
///
/// `Cylinder { d, n }` is `(Z/nZ)^d x Z`; `Lattice { dim }` is `Z^dim`.
/// The cylinder requires `d >= 2` and `n >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    Cylinder { d: u32, n: u32 },
    Lattice { dim: u32 },
}

impl Geometry {
    pub fn cylinder(d: u32, n: u32) -> Result<Self> {
        if d < 2 {
            return Err(CoreError::InvalidParams(format!("cylinder needs d >= 2, got {d}")));
        }
        if n < 2 {
            return Err(CoreError::InvalidParams(format!("cylinder needs N >= 2, got {n}")));
        }
        Ok(Geometry::Cylinder { d, n })
    }

    /// `dim = d+1` in the cylinder correspondence; dim 1 and 2 are also
    /// allowed so low-dimensional closed forms can serve as oracles.
    pub fn lattice(dim: u32) -> Result<Self> {
        if dim < 1 {
            return Err(CoreError::InvalidParams("lattice needs dim >= 1".into()));
        }
        Ok(Geometry::Lattice { dim })
    }

    /// Number of coordinates of a point (d+1 on the cylinder).
    pub fn ncoords(&self) -> usize {
        match self {
            Geometry::Cylinder { d, .. } => (*d + 1) as usize,
            Geometry::Lattice { dim } => *dim as usize,
        }
    }

    /// Vertex degree as a multigraph: always `2 * ncoords`, even when N = 2
    /// collapses antipodal torus neighbors onto the same vertex.
    pub fn degree(&self) -> usize {
        2 * self.ncoords()
    }

    pub fn is_cylinder(&self) -> bool {
        matches!(self, Geometry::Cylinder { .. })
    }

    /// Reduce a coordinate vector into canonical form (torus coords in `[0, N)`).
    pub fn normalize(&self, coords: &[i64]) -> Point {
        let mut c: Coords = coords.iter().copied().collect();
        if let Geometry::Cylinder { d, n } = self {
            let n = *n as i64;
            for v in c.iter_mut().take(*d as usize) {
                *v = v.rem_euclid(n);
            }
        }
        Point { c }
    }
}

type Coords = SmallVec<[i64; 4]>;

/// A vertex of the cylinder or of `Z^{d+1}`. Torus coordinates are kept
/// reduced in `[0, N)`; the height (last coordinate) is unbounded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    c: Coords,
}

impl Point {
    pub fn new(g: &Geometry, coords: &[i64]) -> Point {
        assert_eq!(coords.len(), g.ncoords(), "coordinate count mismatch");
        g.normalize(coords)
    }

    pub fn origin(g: &Geometry) -> Point {
        Point { c: std::iter::repeat(0).take(g.ncoords()).collect() }
    }

    pub fn coords(&self) -> &[i64] {
        &self.c
    }

    /// Height, i.e. the last coordinate (projection pi_Z on the cylinder).
    pub fn height(&self) -> i64 {
        *self.c.last().unwrap()
    }

    /// Torus projection pi_T (all but the last coordinate).
    pub fn torus(&self) -> &[i64] {
        &self.c[..self.c.len() - 1]
    }

    pub fn translate(&self, g: &Geometry, delta: &[i64]) -> Point {
        let c: Coords = self.c.iter().zip(delta).map(|(a, b)| a + b).collect();
        g.normalize(&c)
    }

    /// l-infinity distance, torus-aware on the cylinder.
    pub fn linf_dist(&self, other: &Point, g: &Geometry) -> i64 {
        let mut best = 0i64;
        for (i, (a, b)) in self.c.iter().zip(other.c.iter()).enumerate() {
            let mut diff = (a - b).abs();
            if let Geometry::Cylinder { d, n } = g {
                if i < *d as usize {
                    let n = *n as i64;
                    diff = diff.min(n - diff);
                }
            }
            best = best.max(diff);
        }
        best
    }
}

/// Nearest neighbors of `p` (duplicates from an N = 2 torus wrap collapsed).
pub fn neighbors(p: &Point, g: &Geometry) -> Vec<Point> {
    let mut out = Vec::with_capacity(g.degree());
    let k = g.ncoords();
    for i in 0..k {
        for s in [1i64, -1] {
            let mut c = p.c.clone();
            c[i] += s;
            let q = g.normalize(&c);
            if !out.contains(&q) {
                out.push(q);
            }
        }
    }
    out
}

/// `*`-neighbors of `p`: the points at l-infinity distance 1 (diagonal
/// steps allowed), torus wrap collapsed.
pub fn star_neighbors(p: &Point, g: &Geometry) -> Vec<Point> {
    let k = g.ncoords();
    let mut out = Vec::new();
    let mut delta = vec![-1i64; k];
    loop {
        if delta.iter().any(|&v| v != 0) {
            let c: Coords = p.c.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let q = g.normalize(&c);
            if q != *p && !out.contains(&q) {
                out.push(q);
            }
        }
        // odometer over {-1,0,1}^k
        let mut i = 0;
        loop {
            if i == k {
                return out;
            }
            delta[i] += 1;
            if delta[i] > 1 {
                delta[i] = -1;
                i += 1;
            } else {
                break;
            }
        }
    }
}

/// A finite vertex set together with its geometry. Membership is O(1);
/// boxes additionally carry their descriptor.
#[derive(Debug, Clone)]
pub struct Region {
    geometry: Geometry,
    set: HashSet<Point>,
    box_desc: Option<(Point, i64)>,
}

impl Region {
    pub fn from_points(g: Geometry, pts: impl IntoIterator<Item = Point>) -> Region {
        Region { geometry: g, set: pts.into_iter().collect(), box_desc: None }
    }

    pub fn empty(g: Geometry) -> Region {
        Region { geometry: g, set: HashSet::new(), box_desc: None }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.set.contains(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point> {
        self.set.iter()
    }

    /// Deterministic (lexicographically sorted) enumeration; the index
    /// maps used by the solvers are built from this order.
    pub fn sorted_points(&self) -> Vec<Point> {
        let mut v: Vec<Point> = self.set.iter().cloned().collect();
        v.sort();
        v
    }

    pub fn box_descriptor(&self) -> Option<&(Point, i64)> {
        self.box_desc.as_ref()
    }

    pub fn insert(&mut self, p: Point) {
        self.box_desc = None;
        self.set.insert(p);
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut set = self.set.clone();
        set.extend(other.set.iter().cloned());
        Region { geometry: self.geometry, set, box_desc: None }
    }

    pub fn intersect(&self, other: &Region) -> Region {
        let set = self.set.intersection(&other.set).cloned().collect();
        Region { geometry: self.geometry, set, box_desc: None }
    }

    pub fn minus(&self, other: &Region) -> Region {
        let set = self.set.difference(&other.set).cloned().collect();
        Region { geometry: self.geometry, set, box_desc: None }
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.set.is_subset(&other.set)
    }

    /// Largest l-infinity distance from `center` to a point of the region.
    pub fn circumradius(&self, center: &Point) -> i64 {
        self.set.iter().map(|p| p.linf_dist(center, &self.geometry)).max().unwrap_or(0)
    }
}

/// Outer boundary `∂U` and interior boundary `∂_int U`.
pub fn boundaries(u: &Region) -> (Region, Region) {
    let g = *u.geometry();
    let mut outer = HashSet::new();
    let mut inner = HashSet::new();
    for p in u.iter() {
        for q in neighbors(p, &g) {
            if !u.contains(&q) {
                outer.insert(q);
                inner.insert(p.clone());
            }
        }
    }
    (Region::from_points(g, outer), Region::from_points(g, inner))
}

/// Closed l-infinity ball `B(center, r)`. On the cylinder, errors out when
/// `2r + 1 > N` (the box would wrap onto itself).
pub fn make_box(center: &Point, r: i64, g: &Geometry) -> Result<Region> {
    assert!(r >= 0);
    if let Geometry::Cylinder { n, .. } = g {
        if 2 * r + 1 > *n as i64 {
            return Err(CoreError::BoxWraps { r, n: *n });
        }
    }
    let k = g.ncoords();
    let mut set = HashSet::new();
    let mut delta = vec![-r; k];
    'outer: loop {
        let c: Coords = center.c.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
        set.insert(g.normalize(&c));
        let mut i = 0;
        loop {
            if i == k {
                break 'outer;
            }
            delta[i] += 1;
            if delta[i] > r {
                delta[i] = -r;
                i += 1;
            } else {
                break;
            }
        }
    }
    let mut reg = Region::from_points(*g, set);
    reg.box_desc = Some((center.clone(), r));
    Ok(reg)
}

/// The l-infinity sphere `S(center, r)`.
pub fn make_sphere(center: &Point, r: i64, g: &Geometry) -> Result<Region> {
    let ball = make_box(center, r, g)?;
    if r == 0 {
        return Ok(ball);
    }
    let inner = make_box(center, r - 1, g)?;
    Ok(ball.minus(&inner))
}

/// Vertical scales of the excursion decomposition: `r_N = N` and
/// `h_N = [N (2 + (log N)^2)]`.
pub fn vertical_scales(n: u32) -> (i64, i64) {
    let nf = n as f64;
    let h = (nf * (2.0 + nf.ln().powi(2))).floor() as i64;
    (n as i64, h)
}

/// The named regions around height `z`: the slab `B(z) = T x (z + [-r_N, r_N])`,
/// the larger slab `B~(z) = T x (z + (-h_N, h_N))`, the central box
/// `C~ = B(0, N/4)`, and the planar strip `[-2 sqrt(N), 2 sqrt(N)] e_1 + Z e_{d+1}`
/// truncated to `strip_heights`.
pub struct StandardRegions {
    pub slab: Region,
    pub wide_slab: Region,
    pub central_box: Region,
    pub strip: Region,
    pub r_n: i64,
    pub h_n: i64,
}

pub fn standard_regions(g: &Geometry, z: i64, strip_heights: (i64, i64)) -> Result<StandardRegions> {
    let (d, n) = match g {
        Geometry::Cylinder { d, n } => (*d, *n),
        _ => return Err(CoreError::InvalidParams("standard_regions needs a cylinder".into())),
    };
    let (r_n, h_n) = vertical_scales(n);
    let slab = slab_region(g, z - r_n, z + r_n);
    let wide_slab = slab_region(g, z - h_n + 1, z + h_n - 1);
    let central_box = make_box(&Point::origin(g), (n / 4) as i64, g)?;
    let w = (n as f64).sqrt().floor() as i64;
    let mut strip = HashSet::new();
    let k = (d + 1) as usize;
    for x1 in -2 * w..=2 * w {
        for h in strip_heights.0..=strip_heights.1 {
            let mut c = vec![0i64; k];
            c[0] = x1;
            c[k - 1] = h;
            strip.insert(g.normalize(&c));
        }
    }
    Ok(StandardRegions {
        slab,
        wide_slab,
        central_box,
        strip: Region::from_points(*g, strip),
        r_n,
        h_n,
    })
}

/// Full torus slab `T x [zmin, zmax]` of the cylinder.
pub fn slab_region(g: &Geometry, zmin: i64, zmax: i64) -> Region {
    let (d, n) = match g {
        Geometry::Cylinder { d, n } => (*d as usize, *n as i64),
        _ => panic!("slab_region needs a cylinder"),
    };
    let mut set = HashSet::new();
    let mut torus = vec![0i64; d];
    'outer: loop {
        for z in zmin..=zmax {
            let mut c = torus.clone();
            c.push(z);
            set.insert(g.normalize(&c));
        }
        let mut i = 0;
        loop {
            if i == d {
                break 'outer;
            }
            torus[i] += 1;
            if torus[i] >= n {
                torus[i] = 0;
                i += 1;
            } else {
                break;
            }
        }
    }
    Region::from_points(*g, set)
}

/// Torus representative in `(-N/2, N/2]`, the convention used by `embed`.
pub fn torus_representative(v: i64, n: i64) -> i64 {
    let r = v.rem_euclid(n);
    if 2 * r > n {
        r - n
    } else {
        r
    }
}

/// Identify a cylinder point inside a non-wrapping window with a point of
/// `Z^{d+1}`; torus coordinates go to their representatives in `(-N/2, N/2]`.
pub fn embed(p: &Point, g: &Geometry, window: &Region) -> Result<Point> {
    let (d, n) = match g {
        Geometry::Cylinder { d, n } => (*d as usize, *n as i64),
        _ => return Err(CoreError::InvalidParams("embed expects a cylinder point".into())),
    };
    let r = match window.box_descriptor() {
        Some((_, r)) => *r,
        None => window.circumradius(&Point::origin(g)),
    };
    if 2 * r + 1 >= n {
        return Err(CoreError::EmbedTooLarge { r, n: n as u32 });
    }
    let lat = Geometry::lattice(d as u32 + 1)?;
    let mut c: Vec<i64> = p.coords().to_vec();
    for v in c.iter_mut().take(d) {
        *v = torus_representative(*v, n);
    }
    Ok(Point::new(&lat, &c))
}

/// Inverse of `embed` on the window.
pub fn unembed(p: &Point, g: &Geometry) -> Point {
    g.normalize(p.coords())
}

/// Re-interpret an entire embedded-window region as a lattice region.
pub fn embed_region(reg: &Region, window: &Region) -> Result<Region> {
    let g = *reg.geometry();
    let lat = Geometry::lattice(g.ncoords() as u32)?;
    let mut pts = Vec::with_capacity(reg.len());
    for p in reg.iter() {
        pts.push(embed(p, &g, window)?);
    }
    let mut out = Region::from_points(lat, pts);
    out.box_desc = reg.box_desc.as_ref().map(|(c, r)| (embed(c, &g, window).unwrap(), *r));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbors_wraps_torus() {
        let g = Geometry::cylinder(2, 5).unwrap();
        let p = Point::new(&g, &[0, 0, 0]);
        let ns = neighbors(&p, &g);
        assert_eq!(ns.len(), 6);
        assert!(ns.contains(&Point::new(&g, &[4, 0, 0])));
    }

    #[test]
    fn neighbors_lattice_dim3() {
        let g = Geometry::lattice(3).unwrap();
        let ns = neighbors(&Point::origin(&g), &g);
        assert_eq!(ns.len(), 6);
        for e in [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]] {
            assert!(ns.contains(&Point::new(&g, &e)));
        }
    }

    #[test]
    fn neighbors_n2_collapse() {
        // N = 2 wrap makes +e_1 and -e_1 coincide; duplicates collapse.
        let g = Geometry::cylinder(2, 2).unwrap();
        let p = Point::new(&g, &[0, 0, 7]);
        let ns = neighbors(&p, &g);
        assert_eq!(ns.len(), 4);
        assert_eq!(ns.iter().filter(|q| q.coords() == [1, 0, 7]).count(), 1);
    }

    #[test]
    fn star_neighbors_counts() {
        let g = Geometry::cylinder(2, 5).unwrap();
        assert_eq!(star_neighbors(&Point::origin(&g), &g).len(), 26);
        let g3 = Geometry::cylinder(2, 3).unwrap();
        assert_eq!(star_neighbors(&Point::origin(&g3), &g3).len(), 26);
        let plane = Geometry::lattice(2).unwrap();
        assert_eq!(star_neighbors(&Point::origin(&plane), &plane).len(), 8);
    }

    #[test]
    fn boundaries_single_point_and_ball() {
        let g = Geometry::lattice(3).unwrap();
        let u = Region::from_points(g, [Point::origin(&g)]);
        let (outer, inner) = boundaries(&u);
        assert_eq!(outer.len(), 6);
        assert_eq!(inner.len(), 1);

        let ball = make_box(&Point::origin(&g), 1, &g).unwrap();
        assert_eq!(ball.len(), 27);
        let (_, inner) = boundaries(&ball);
        assert_eq!(inner.len(), 26);
    }

    #[test]
    fn boundaries_full_slab() {
        let g = Geometry::cylinder(2, 4).unwrap();
        let u = slab_region(&g, 0, 0);
        let (outer, inner) = boundaries(&u);
        assert_eq!(inner.len(), u.len());
        assert_eq!(outer.len(), 2 * 16);
        assert!(outer.iter().all(|p| p.height().abs() == 1));
    }

    #[test]
    fn box_sizes() {
        let g = Geometry::lattice(3).unwrap();
        let o = Point::origin(&g);
        assert_eq!(make_box(&o, 0, &g).unwrap().len(), 1);
        assert_eq!(make_sphere(&o, 1, &g).unwrap().len(), 26);
        // A = B(0, [N^{1-eps}]) with N = 16, eps = 0.5: radius 4, 9^3 points.
        let r = (16f64).powf(0.5).floor() as i64;
        assert_eq!(r, 4);
        assert_eq!(make_box(&o, r, &g).unwrap().len(), 9 * 9 * 9);
    }

    #[test]
    fn box_wrap_error() {
        let g = Geometry::cylinder(2, 5).unwrap();
        assert!(make_box(&Point::origin(&g), 3, &g).is_err());
    }

    #[test]
    fn scales_match_formula() {
        assert_eq!(vertical_scales(10), (10, 73));
        assert_eq!(vertical_scales(4), (4, 15));
    }

    #[test]
    fn wide_slab_has_open_interval_heights() {
        let g = Geometry::cylinder(2, 4).unwrap();
        let regs = standard_regions(&g, 0, (-1, 1)).unwrap();
        let h = regs.h_n;
        let mut heights: Vec<i64> = regs.wide_slab.iter().map(|p| p.height()).collect();
        heights.sort();
        heights.dedup();
        assert_eq!(heights.len() as i64, 2 * h - 1);
    }

    #[test]
    fn embed_roundtrip_and_convention() {
        let g = Geometry::cylinder(2, 10).unwrap();
        let window = make_box(&Point::origin(&g), 3, &g).unwrap();
        let p = Point::new(&g, &[7, 1, -2]);
        let q = embed(&p, &g, &window).unwrap();
        assert_eq!(q.coords(), [-3, 1, -2]);
        assert_eq!(unembed(&q, &g), p);
    }

    #[test]
    fn embed_preserves_adjacency() {
        let g = Geometry::cylinder(2, 10).unwrap();
        let lat = Geometry::lattice(3).unwrap();
        let window = make_box(&Point::origin(&g), 3, &g).unwrap();
        for p in window.iter() {
            let pe = embed(p, &g, &window).unwrap();
            for q in neighbors(p, &g) {
                if window.contains(&q) {
                    let qe = embed(&q, &g, &window).unwrap();
                    assert!(neighbors(&pe, &lat).contains(&qe));
                }
            }
            for q in star_neighbors(p, &g) {
                if window.contains(&q) {
                    let qe = embed(&q, &g, &window).unwrap();
                    assert_eq!(pe.linf_dist(&qe, &lat), 1);
                }
            }
        }
    }

    #[test]
    fn adjacency_symmetric() {
        let g = Geometry::cylinder(2, 3).unwrap();
        for coords in [[0i64, 0, 0], [2, 1, 5], [1, 2, -3]] {
            let p = Point::new(&g, &coords);
            for q in neighbors(&p, &g) {
                assert!(neighbors(&q, &g).contains(&p));
            }
            for q in star_neighbors(&p, &g) {
                assert!(star_neighbors(&q, &g).contains(&p));
            }
        }
    }
}
