//! Inverse maps by barycentric interpolation on the image of the grid
//! triangulation.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::{orient, ComplexField, GridSpec, MapField};

/// Point location in the image of the grid mesh (two triangles per cell).
pub(crate) struct MeshLocator<'a> {
    points: &'a [C64],
    n: usize,
    origin: C64,
    width: f64,
    side: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl<'a> MeshLocator<'a> {
    /// `cell_ok(r, c)` selects the cells whose triangles are indexed.
    pub(crate) fn new(points: &'a [C64], n: usize, cell_ok: impl Fn(usize, usize) -> bool) -> Self {
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in points {
            xmin = xmin.min(p.re);
            xmax = xmax.max(p.re);
            ymin = ymin.min(p.im);
            ymax = ymax.max(p.im);
        }
        let side = n.max(1);
        let width = ((xmax - xmin).max(ymax - ymin) / side as f64).max(f64::MIN_POSITIVE);
        let origin = C64::new(xmin, ymin);
        let mut loc = MeshLocator {
            points,
            n,
            origin,
            width,
            side,
            starts: vec![0; side * side + 1],
            items: Vec::new(),
        };
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        for r in 0..n - 1 {
            for c in 0..n - 1 {
                if !cell_ok(r, c) {
                    continue;
                }
                for t in 0..2 {
                    let id = ((r * (n - 1) + c) * 2 + t) as u32;
                    let tri = loc.triangle(id);
                    let (lo, hi) = tri.iter().fold((C64::new(f64::MAX, f64::MAX), C64::new(f64::MIN, f64::MIN)), |(lo, hi), &k| {
                        let p = points[k];
                        (C64::new(lo.re.min(p.re), lo.im.min(p.im)), C64::new(hi.re.max(p.re), hi.im.max(p.im)))
                    });
                    let (bx0, by0) = loc.bucket(lo);
                    let (bx1, by1) = loc.bucket(hi);
                    for by in by0..=by1 {
                        for bx in bx0..=bx1 {
                            pairs.push(((by * side + bx) as u32, id));
                        }
                    }
                }
            }
        }
        for &(b, _) in &pairs {
            loc.starts[b as usize + 1] += 1;
        }
        for k in 1..loc.starts.len() {
            loc.starts[k] += loc.starts[k - 1];
        }
        let mut fill = loc.starts.clone();
        loc.items = vec![0; pairs.len()];
        for &(b, id) in &pairs {
            loc.items[fill[b as usize] as usize] = id;
            fill[b as usize] += 1;
        }
        loc
    }

    fn bucket(&self, p: C64) -> (usize, usize) {
        let s = (p - self.origin) / self.width;
        let clamp = |v: f64| (v.max(0.0) as usize).min(self.side - 1);
        (clamp(s.re), clamp(s.im))
    }

    fn triangle(&self, id: u32) -> [usize; 3] {
        let id = id as usize;
        let cell = id / 2;
        let (r, c) = (cell / (self.n - 1), cell % (self.n - 1));
        let n = self.n;
        let a = r * n + c;
        let b = r * n + c + 1;
        let cc = (r + 1) * n + c + 1;
        let d = (r + 1) * n + c;
        if id % 2 == 0 {
            [a, b, cc]
        } else {
            [a, cc, d]
        }
    }

    /// Vertex indices and barycentric weights of a triangle containing `w`.
    pub(crate) fn locate(&self, w: C64) -> Option<([usize; 3], [f64; 3])> {
        let s = (w - self.origin) / self.width;
        if s.re < -1e-9 || s.im < -1e-9 || s.re > self.side as f64 + 1e-9 || s.im > self.side as f64 + 1e-9 {
            return None;
        }
        let (bx, by) = self.bucket(w);
        let b = by * self.side + bx;
        for &id in &self.items[self.starts[b] as usize..self.starts[b + 1] as usize] {
            let tri = self.triangle(id);
            let [p0, p1, p2] = tri.map(|k| self.points[k]);
            let area = orient(p0, p1, p2);
            if area == 0.0 {
                continue;
            }
            let l0 = orient(w, p1, p2) / area;
            let l1 = orient(p0, w, p2) / area;
            let l2 = 1.0 - l0 - l1;
            let tol = -1e-10;
            if l0 >= tol && l1 >= tol && l2 >= tol {
                return Some((tri, [l0, l1, l2]));
            }
        }
        None
    }
}

/// Sampled inverse map; nodes outside the image hull are marked missing.
#[derive(Clone, Debug)]
pub struct InverseMap {
    pub map: MapField,
    pub valid: Vec<bool>,
    pub missing: usize,
    /// `max |g(f(z)) - z|` over source nodes whose image has a valid stencil.
    pub round_trip_error: f64,
}

/// `true` when samples are pairwise distinct and at least 99.9% of the grid
/// triangles keep their orientation.
pub fn homeomorphic_proxy(f: &MapField) -> bool {
    f.min_separation() > 0.0 && f.positive_triangle_fraction() >= 0.999
}

/// Inverts `f` on the nodes of `target`.
pub fn invert_map(f: &MapField, target: GridSpec) -> Result<InverseMap> {
    if !homeomorphic_proxy(f) {
        return Err(Error::precondition("map samples are not injective (homeomorphism proxy failed)"));
    }
    let spec = *f.spec();
    let n = spec.n();
    let locator = MeshLocator::new(f.values(), n, |_, _| true);
    let mut values = Vec::with_capacity(target.len());
    let mut valid = Vec::with_capacity(target.len());
    for w in target.nodes() {
        match locator.locate(w) {
            Some((tri, bary)) => {
                let z = tri
                    .iter()
                    .zip(bary)
                    .fold(C64::new(0.0, 0.0), |acc, (&k, l)| acc + spec.node_at(k) * l);
                values.push(z);
                valid.push(true);
            }
            None => {
                values.push(C64::new(0.0, 0.0));
                valid.push(false);
            }
        }
    }
    let missing = valid.iter().filter(|v| !**v).count();
    let g = ComplexField::new(target, values)?;
    let round_trip_error = round_trip(&g, &valid, f, 0.0);
    Ok(InverseMap {
        map: MapField::new(g, false),
        valid,
        missing,
        round_trip_error,
    })
}

/// `max |g(f(z)) - z|` over source nodes `z` with `|z - center| >= skip` whose
/// image falls in a fully valid bilinear stencil of `g`.
pub(crate) fn round_trip(g: &ComplexField, valid: &[bool], f: &MapField, skip: f64) -> f64 {
    let tspec = *g.spec();
    let tn = tspec.n();
    let src = *f.spec();
    f.values()
        .iter()
        .enumerate()
        .filter_map(|(k, &w)| {
            let z = src.node_at(k);
            if (z - src.center()).norm() < skip {
                return None;
            }
            let (r, c, _, _) = tspec.bilinear_stencil(w)?;
            let ok = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)]
                .iter()
                .all(|&(a, b)| valid[a * tn + b]);
            ok.then(|| (g.sample_bilinear(w).unwrap() - z).norm())
        })
        .fold(0.0, f64::max)
}
