//! Grids, sampled fields and the pointwise calculus shared by every other
//! module: Wirtinger derivatives, Jacobians, complex dilatation and the
//! chordal metric of the Riemann sphere.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell-centered square grid covering `[center - L, center + L]^2`.
///
/// Node `(row, col)` sits at the center of its cell; rows run along the
/// imaginary axis, columns along the real axis, storage is row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    center: C64,
    half_width: f64,
    n: usize,
}

impl GridSpec {
    pub const MIN_RESOLUTION: usize = 16;

    pub fn new(center: C64, half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if n < Self::MIN_RESOLUTION || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "resolution must be even and at least {}, got {n}",
                Self::MIN_RESOLUTION
            )));
        }
        if !(center.re.is_finite() && center.im.is_finite()) {
            return Err(Error::InvalidGrid("center must be finite".into()));
        }
        Ok(GridSpec {
            center,
            half_width,
            n,
        })
    }

    /// Grid centered at the origin.
    pub fn centered(half_width: f64, n: usize) -> Result<Self> {
        Self::new(C64::new(0.0, 0.0), half_width, n)
    }

    pub fn center(&self) -> C64 {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    fn origin(&self) -> (f64, f64) {
        let h = self.spacing();
        (
            self.center.re - self.half_width + 0.5 * h,
            self.center.im - self.half_width + 0.5 * h,
        )
    }

    pub fn node(&self, row: usize, col: usize) -> C64 {
        let h = self.spacing();
        let (x0, y0) = self.origin();
        C64::new(x0 + col as f64 * h, y0 + row as f64 * h)
    }

    pub fn node_at(&self, idx: usize) -> C64 {
        self.node(idx / self.n, idx % self.n)
    }

    pub fn nodes(&self) -> impl Iterator<Item = C64> + '_ {
        (0..self.len()).map(move |k| self.node_at(k))
    }

    /// Fractional (row, col) position of `z` in node units.
    pub fn fractional_index(&self, z: C64) -> (f64, f64) {
        let h = self.spacing();
        let (x0, y0) = self.origin();
        ((z.im - y0) / h, (z.re - x0) / h)
    }

    /// Index of the node nearest to `z`, if `z` lies inside the covered square.
    pub fn nearest_node(&self, z: C64) -> Option<usize> {
        let (fr, fc) = self.fractional_index(z);
        let r = fr.round();
        let c = fc.round();
        let last = (self.n - 1) as f64;
        if !(-0.5..=last + 0.5).contains(&fr) || !(-0.5..=last + 0.5).contains(&fc) {
            return None;
        }
        Some(r.clamp(0.0, last) as usize * self.n + c.clamp(0.0, last) as usize)
    }

    /// Bilinear stencil `(row, col, t_row, t_col)` for `z`, when `z` lies within
    /// the hull of the nodes.
    pub fn bilinear_stencil(&self, z: C64) -> Option<(usize, usize, f64, f64)> {
        let (fr, fc) = self.fractional_index(z);
        let last = (self.n - 1) as f64;
        let eps = 1e-9;
        if !(fr >= -eps && fr <= last + eps && fc >= -eps && fc <= last + eps) {
            return None;
        }
        let fr = fr.clamp(0.0, last);
        let fc = fc.clamp(0.0, last);
        let r = (fr.floor() as usize).min(self.n - 2);
        let c = (fc.floor() as usize).min(self.n - 2);
        Some((r, c, fr - r as f64, fc - c as f64))
    }

    /// Distance from `z` to the nearest edge of the covered square (negative outside).
    pub fn inset(&self, z: C64) -> f64 {
        let dx = self.half_width - (z.re - self.center.re).abs();
        let dy = self.half_width - (z.im - self.center.im).abs();
        dx.min(dy)
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.n == other.n
            && (self.half_width - other.half_width).abs() <= 1e-12 * self.half_width
            && (self.center - other.center).norm() <= 1e-12 * self.half_width
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Area fraction of every node's cell covered by the closed disk `B(c, r)`.
    ///
    /// Cells cut by the circle are resolved with an 8x8 sub-sample; the result
    /// only lists nodes with nonzero coverage.
    pub fn disk_coverage(&self, c: C64, r: f64) -> Vec<(usize, f64)> {
        const SUB: usize = 8;
        let h = self.spacing();
        let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
        let (fr_lo, fc_lo) = self.fractional_index(c - C64::new(r, r));
        let (fr_hi, fc_hi) = self.fractional_index(c + C64::new(r, r));
        let clamp = |v: f64| v.clamp(0.0, (self.n - 1) as f64) as usize;
        let (r0, r1) = (clamp(fr_lo.floor() - 1.0), clamp(fr_hi.ceil() + 1.0));
        let (c0, c1) = (clamp(fc_lo.floor() - 1.0), clamp(fc_hi.ceil() + 1.0));
        let mut out = Vec::new();
        if r <= 0.0 {
            return out;
        }
        for row in r0..=r1 {
            for col in c0..=c1 {
                let z = self.node(row, col);
                let d = (z - c).norm();
                let w = if d + half_diag <= r {
                    1.0
                } else if d - half_diag > r {
                    0.0
                } else {
                    let mut hits = 0usize;
                    for a in 0..SUB {
                        for b in 0..SUB {
                            let p = z + C64::new(
                                ((b as f64 + 0.5) / SUB as f64 - 0.5) * h,
                                ((a as f64 + 0.5) / SUB as f64 - 0.5) * h,
                            );
                            if (p - c).norm() <= r {
                                hits += 1;
                            }
                        }
                    }
                    hits as f64 / (SUB * SUB) as f64
                };
                if w > 0.0 {
                    out.push((row * self.n + col, w));
                }
            }
        }
        out
    }
}

/// Complex samples on a [`GridSpec`], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    spec: GridSpec,
    values: Vec<C64>,
}

impl ComplexField {
    pub fn new(spec: GridSpec, values: Vec<C64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                spec.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::precondition(format!("non-finite sample at node {k}")));
        }
        Ok(ComplexField { spec, values })
    }

    pub(crate) fn from_parts_unchecked(spec: GridSpec, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        ComplexField { spec, values }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        ComplexField {
            spec,
            values: vec![C64::new(0.0, 0.0); spec.len()],
        }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(C64) -> C64) -> Result<Self> {
        let values = spec.nodes().map(f).collect();
        Self::new(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.values[row * self.spec.n + col]
    }

    pub fn sample_bilinear(&self, z: C64) -> Option<C64> {
        let (r, c, tr, tc) = self.spec.bilinear_stencil(z)?;
        let n = self.spec.n;
        let v00 = self.values[r * n + c];
        let v01 = self.values[r * n + c + 1];
        let v10 = self.values[(r + 1) * n + c];
        let v11 = self.values[(r + 1) * n + c + 1];
        Some((v00 * (1.0 - tc) + v01 * tc) * (1.0 - tr) + (v10 * (1.0 - tc) + v11 * tc) * tr)
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Discrete L2 norm with cell-area weights.
    pub fn l2_norm(&self) -> f64 {
        let h = self.spec.spacing();
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt() * h
    }

    pub fn map(&self, f: impl Fn(C64, C64) -> C64) -> ComplexField {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(self.spec.node_at(k), v))
            .collect();
        ComplexField::from_parts_unchecked(self.spec, values)
    }
}

/// Real samples on a [`GridSpec`], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                spec.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::precondition(format!("non-finite sample at node {k}")));
        }
        Ok(RealField { spec, values })
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(C64) -> f64) -> Result<Self> {
        let values = spec.nodes().map(f).collect();
        Self::new(spec, values)
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        RealField {
            spec,
            values: vec![value; spec.len()],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample_bilinear(&self, z: C64) -> Option<f64> {
        let (r, c, tr, tc) = self.spec.bilinear_stencil(z)?;
        let n = self.spec.n;
        let v00 = self.values[r * n + c];
        let v01 = self.values[r * n + c + 1];
        let v10 = self.values[(r + 1) * n + c];
        let v11 = self.values[(r + 1) * n + c + 1];
        Some((v00 * (1.0 - tc) + v01 * tc) * (1.0 - tr) + (v10 * (1.0 - tc) + v11 * tc) * tr)
    }
}

/// Measurable coefficient of the Beltrami equation, compactly supported in
/// the closed disk of radius `support_radius` around the grid center.
#[derive(Clone, Debug, PartialEq)]
pub struct DilatationField {
    field: ComplexField,
    support_radius: f64,
    k_max: f64,
}

impl DilatationField {
    pub fn new(field: ComplexField, support_radius: f64) -> Result<Self> {
        let spec = *field.spec();
        if !(support_radius > 0.0 && support_radius < spec.half_width()) {
            return Err(Error::precondition(format!(
                "support radius {support_radius} must lie in (0, {})",
                spec.half_width()
            )));
        }
        let mut k_max = 0.0f64;
        for (k, v) in field.values().iter().enumerate() {
            let m = v.norm();
            if m >= 1.0 {
                return Err(Error::Degenerate(m));
            }
            if m > 0.0 && (spec.node_at(k) - spec.center()).norm() > support_radius {
                return Err(Error::precondition(format!(
                    "dilatation nonzero at node {k} outside the support radius"
                )));
            }
            k_max = k_max.max(m);
        }
        Ok(DilatationField {
            field,
            support_radius,
            k_max,
        })
    }

    /// Samples `mu` at the nodes inside the support disk; zero elsewhere.
    pub fn from_fn(spec: GridSpec, support_radius: f64, mu: impl Fn(C64) -> C64) -> Result<Self> {
        let c = spec.center();
        let field = ComplexField::from_fn(spec, |z| {
            if (z - c).norm() <= support_radius {
                mu(z)
            } else {
                C64::new(0.0, 0.0)
            }
        })?;
        Self::new(field, support_radius)
    }

    pub fn zero(spec: GridSpec) -> Self {
        DilatationField {
            field: ComplexField::zeros(spec),
            support_radius: spec.spacing(),
            k_max: 0.0,
        }
    }

    /// Wraps a field whose support radius is inferred from its nonzero nodes.
    pub fn from_field(field: ComplexField) -> Result<Self> {
        let spec = *field.spec();
        let r = field
            .values()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > 0.0)
            .map(|(k, _)| (spec.node_at(k) - spec.center()).norm())
            .fold(0.0, f64::max);
        if r == 0.0 {
            return Ok(Self::zero(spec));
        }
        Self::new(field, r)
    }

    pub fn field(&self) -> &ComplexField {
        &self.field
    }

    pub fn spec(&self) -> &GridSpec {
        self.field.spec()
    }

    pub fn values(&self) -> &[C64] {
        self.field.values()
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn is_zero(&self) -> bool {
        self.k_max == 0.0
    }
}

/// Sampled values of a candidate solution `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct MapField {
    field: ComplexField,
    hydrodynamic: bool,
    support_radius: Option<f64>,
}

impl MapField {
    pub fn new(field: ComplexField, hydrodynamic: bool) -> Self {
        MapField {
            field,
            hydrodynamic,
            support_radius: None,
        }
    }

    /// Records the radius outside of which the map is expected to be conformal.
    pub fn with_support_radius(mut self, r: f64) -> Self {
        self.support_radius = Some(r);
        self
    }

    pub fn identity(spec: GridSpec) -> Self {
        let field = ComplexField::from_parts_unchecked(spec, spec.nodes().collect());
        MapField::new(field, true)
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(C64) -> C64) -> Result<Self> {
        Ok(MapField::new(ComplexField::from_fn(spec, f)?, false))
    }

    pub fn field(&self) -> &ComplexField {
        &self.field
    }

    pub fn spec(&self) -> &GridSpec {
        self.field.spec()
    }

    pub fn values(&self) -> &[C64] {
        self.field.values()
    }

    pub fn is_hydrodynamic(&self) -> bool {
        self.hydrodynamic
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    /// `sup |f(z) - z|` over nodes with `|z - center| >= radius`.
    pub fn tail_residual(&self, radius: f64) -> f64 {
        let spec = self.spec();
        self.values()
            .iter()
            .enumerate()
            .filter_map(|(k, &v)| {
                let z = spec.node_at(k);
                ((z - spec.center()).norm() >= radius).then(|| (v - z).norm())
            })
            .fold(0.0, f64::max)
    }

    /// Smallest distance between the images of two distinct nodes (exact when
    /// below the mean node spacing of the image, a lower bound otherwise).
    pub fn min_separation(&self) -> f64 {
        min_pairwise_distance(self.values())
    }

    /// Fraction of the grid triangles (two per cell) with positive orientation.
    pub fn positive_triangle_fraction(&self) -> f64 {
        let n = self.spec().n();
        let v = self.values();
        let mut pos = 0usize;
        let mut total = 0usize;
        for r in 0..n - 1 {
            for c in 0..n - 1 {
                let a = v[r * n + c];
                let b = v[r * n + c + 1];
                let cc = v[(r + 1) * n + c + 1];
                let d = v[(r + 1) * n + c];
                for (p, q, s) in [(a, b, cc), (a, cc, d)] {
                    total += 1;
                    if orient(p, q, s) > 0.0 {
                        pos += 1;
                    }
                }
            }
        }
        pos as f64 / total as f64
    }
}

pub(crate) fn orient(a: C64, b: C64, c: C64) -> f64 {
    ((b - a).conj() * (c - a)).im
}

fn min_pairwise_distance(points: &[C64]) -> f64 {
    if points.len() < 2 {
        return f64::INFINITY;
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in points {
        xmin = xmin.min(p.re);
        xmax = xmax.max(p.re);
        ymin = ymin.min(p.im);
        ymax = ymax.max(p.im);
    }
    let side = (points.len() as f64).sqrt().ceil().max(1.0) as usize;
    let w = ((xmax - xmin).max(ymax - ymin) / side as f64).max(f64::MIN_POSITIVE);
    let key = |p: &C64| {
        let bx = (((p.re - xmin) / w) as usize).min(side - 1);
        let by = (((p.im - ymin) / w) as usize).min(side - 1);
        (by, bx)
    };
    let mut counts = vec![0usize; side * side + 1];
    for p in points {
        let (by, bx) = key(p);
        counts[by * side + bx + 1] += 1;
    }
    for k in 1..counts.len() {
        counts[k] += counts[k - 1];
    }
    let mut fill = counts.clone();
    let mut order = vec![0usize; points.len()];
    for (i, p) in points.iter().enumerate() {
        let (by, bx) = key(p);
        order[fill[by * side + bx]] = i;
        fill[by * side + bx] += 1;
    }
    let mut best = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let (by, bx) = key(p);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (ny, nx) = (by as i64 + dy, bx as i64 + dx);
                if ny < 0 || nx < 0 || ny >= side as i64 || nx >= side as i64 {
                    continue;
                }
                let b = ny as usize * side + nx as usize;
                for &j in &order[counts[b]..counts[b + 1]] {
                    if j > i {
                        best = best.min((points[j] - p).norm());
                    }
                }
            }
        }
    }
    // Exact below the bucket width, a lower bound above it.
    best.min(w)
}

/// A point of the extended plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExtendedPoint {
    Finite(C64),
    Infinity,
}

impl From<C64> for ExtendedPoint {
    fn from(z: C64) -> Self {
        ExtendedPoint::Finite(z)
    }
}

/// Chordal distance on the Riemann sphere; lies in `[0, 1]`.
pub fn chordal_distance(x: ExtendedPoint, y: ExtendedPoint) -> f64 {
    use ExtendedPoint::*;
    match (x, y) {
        (Infinity, Infinity) => 0.0,
        (Finite(a), Infinity) | (Infinity, Finite(a)) => 1.0 / (1.0 + a.norm_sqr()).sqrt(),
        (Finite(a), Finite(b)) => {
            (a - b).norm() / ((1.0 + a.norm_sqr()).sqrt() * (1.0 + b.norm_sqr()).sqrt())
        }
    }
}

/// Largest pairwise chordal distance. Sets above 10^4 points are thinned by
/// uniform striding before the pairwise scan.
pub fn chordal_diameter(points: &[ExtendedPoint]) -> Result<f64> {
    const EXACT_LIMIT: usize = 10_000;
    if points.is_empty() {
        return Err(Error::Empty("chordal diameter of an empty set"));
    }
    let thinned: Vec<ExtendedPoint>;
    let pts = if points.len() > EXACT_LIMIT {
        let stride = points.len() as f64 / EXACT_LIMIT as f64;
        thinned = (0..EXACT_LIMIT)
            .map(|k| points[((k as f64 * stride) as usize).min(points.len() - 1)])
            .collect();
        &thinned[..]
    } else {
        points
    };
    let mut best = 0.0f64;
    for (i, &a) in pts.iter().enumerate() {
        for &b in &pts[i + 1..] {
            best = best.max(chordal_distance(a, b));
        }
    }
    Ok(best)
}

/// Second-order finite differences along x (`along_rows`) or y, one-sided at the edges.
fn partial(values: &[C64], n: usize, h: f64, along_rows: bool) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    let (line_stride, step) = if along_rows { (n, 1) } else { (1, n) };
    let inv = 1.0 / (2.0 * h);
    for line in 0..n {
        let base = line * line_stride;
        let at = |k: usize| values[base + k * step];
        out[base] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) * inv;
        for k in 1..n - 1 {
            out[base + k * step] = (at(k + 1) - at(k - 1)) * inv;
        }
        out[base + (n - 1) * step] = (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) * inv;
    }
    out
}

/// Wirtinger derivatives `(f_z, f_zbar)` from central differences.
pub fn wirtinger_derivatives(f: &ComplexField) -> (ComplexField, ComplexField) {
    let spec = *f.spec();
    let n = spec.n();
    let h = spec.spacing();
    let fx = partial(f.values(), n, h, true);
    let fy = partial(f.values(), n, h, false);
    let i = C64::new(0.0, 1.0);
    let fz = fx.iter().zip(&fy).map(|(&a, &b)| 0.5 * (a - i * b)).collect();
    let fzb = fx.iter().zip(&fy).map(|(&a, &b)| 0.5 * (a + i * b)).collect();
    (
        ComplexField::from_parts_unchecked(spec, fz),
        ComplexField::from_parts_unchecked(spec, fzb),
    )
}

/// `|f_z|^2 - |f_zbar|^2` at every node.
pub fn jacobian(f: &ComplexField) -> RealField {
    let (fz, fzb) = wirtinger_derivatives(f);
    let values = fz
        .values()
        .iter()
        .zip(fzb.values())
        .map(|(a, b)| a.norm_sqr() - b.norm_sqr())
        .collect();
    RealField {
        spec: *f.spec(),
        values,
    }
}

/// Pointwise dilatation estimate of a sampled map.
#[derive(Clone, Debug)]
pub struct DilatationEstimate {
    pub mu: ComplexField,
    pub k_max: f64,
    /// Nodes with positive Jacobian where `|mu| >= 1` (inconsistent samples).
    pub inconsistent_nodes: usize,
}

impl DilatationEstimate {
    pub fn is_consistent(&self) -> bool {
        self.inconsistent_nodes == 0
    }

    /// Converts into a solver-ready coefficient; fails if `|mu| >= 1` anywhere or
    /// the support reaches the grid edge.
    pub fn into_dilatation_field(self) -> Result<DilatationField> {
        DilatationField::from_field(self.mu)
    }
}

/// `mu = f_zbar / f_z` where `|f_z| > zero_tolerance`, else 0. The default
/// tolerance is `1e-12` times the largest `|f_z|`.
pub fn complex_dilatation(f: &ComplexField, zero_tolerance: Option<f64>) -> Result<DilatationEstimate> {
    let (fz, fzb) = wirtinger_derivatives(f);
    let tol = match zero_tolerance {
        Some(t) if t > 0.0 => t,
        Some(t) => return Err(Error::precondition(format!("zero tolerance must be positive, got {t}"))),
        None => (1e-12 * fz.max_norm()).max(f64::MIN_POSITIVE),
    };
    let mut k_max = 0.0f64;
    let mut inconsistent = 0;
    let values = fz
        .values()
        .iter()
        .zip(fzb.values())
        .map(|(&a, &b)| {
            if a.norm() > tol {
                let m = b / a;
                let k = m.norm();
                k_max = k_max.max(k);
                if k >= 1.0 && a.norm_sqr() > b.norm_sqr() {
                    inconsistent += 1;
                }
                m
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(DilatationEstimate {
        mu: ComplexField::from_parts_unchecked(*f.spec(), values),
        k_max,
        inconsistent_nodes: inconsistent,
    })
}

/// `K = (1 + |mu|) / (1 - |mu|)`.
pub fn max_dilatation(mu: C64) -> Result<f64> {
    let k = mu.norm();
    if !(k < 1.0) {
        return Err(Error::Degenerate(k));
    }
    Ok((1.0 + k) / (1.0 - k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(GridSpec::centered(1.0, 15).is_err());
        assert!(GridSpec::centered(1.0, 17).is_err());
        assert!(GridSpec::centered(0.0, 32).is_err());
        let g = GridSpec::centered(2.0, 32).unwrap();
        assert_eq!(g.spacing(), 0.125);
        assert_abs_diff_eq!(g.node(0, 0).re, -2.0 + 0.0625);
        assert_abs_diff_eq!(g.node(31, 31).im, 2.0 - 0.0625);
    }

    #[test]
    fn chordal_examples() {
        let inf = ExtendedPoint::Infinity;
        let z = |x: f64| ExtendedPoint::Finite(c(x, 0.0));
        assert_abs_diff_eq!(chordal_distance(z(0.0), inf), 1.0);
        assert_abs_diff_eq!(chordal_distance(z(0.0), z(1.0)), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(chordal_distance(z(1.0), z(-1.0)), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn chordal_diameter_examples() {
        let inf = ExtendedPoint::Infinity;
        let z = |x: f64| ExtendedPoint::Finite(c(x, 0.0));
        assert!(chordal_diameter(&[]).is_err());
        assert_eq!(chordal_diameter(&[z(0.0)]).unwrap(), 0.0);
        assert_abs_diff_eq!(chordal_diameter(&[z(0.0), inf]).unwrap(), 1.0);
        // brute force over the six pairs of {0, 1, -1, inf}
        let pts = [z(0.0), z(1.0), z(-1.0), inf];
        let mut brute = 0.0f64;
        for a in &pts {
            for b in &pts {
                brute = brute.max(chordal_distance(*a, *b));
            }
        }
        assert_abs_diff_eq!(brute, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(chordal_diameter(&pts).unwrap(), brute);
    }

    #[test]
    fn wirtinger_of_identity_and_conjugate() {
        let g = GridSpec::centered(1.0, 32).unwrap();
        let id = ComplexField::from_fn(g, |z| z).unwrap();
        let (fz, fzb) = wirtinger_derivatives(&id);
        for (a, b) in fz.values().iter().zip(fzb.values()) {
            assert_abs_diff_eq!((a - c(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(b.norm(), 0.0, epsilon = 1e-12);
        }
        let conj = ComplexField::from_fn(g, |z| z.conj()).unwrap();
        let (fz, fzb) = wirtinger_derivatives(&conj);
        for (a, b) in fz.values().iter().zip(fzb.values()) {
            assert_abs_diff_eq!(a.norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!((b - c(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn wirtinger_of_square_is_second_order() {
        let g = GridSpec::centered(1.0, 256).unwrap();
        let h = g.spacing();
        let f = ComplexField::from_fn(g, |z| z * z).unwrap();
        let (fz, fzb) = wirtinger_derivatives(&f);
        let err = g
            .nodes()
            .zip(fz.values())
            .map(|(z, d)| (d - 2.0 * z).norm())
            .fold(0.0, f64::max);
        assert!(err <= 10.0 * h * h, "err {err}");
        assert!(fzb.max_norm() <= 10.0 * h * h);
    }

    #[test]
    fn jacobian_examples() {
        let g = GridSpec::centered(1.0, 16).unwrap();
        for (f, expect) in [
            (Box::new(|z: C64| z) as Box<dyn Fn(C64) -> C64>, 1.0),
            (Box::new(|z: C64| z.conj()), -1.0),
            (Box::new(|z: C64| 2.0 * z), 4.0),
        ] {
            let j = jacobian(&ComplexField::from_fn(g, f).unwrap());
            for v in j.values() {
                assert_abs_diff_eq!(*v, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dilatation_of_linear_maps() {
        let g = GridSpec::centered(1.0, 32).unwrap();
        let est = complex_dilatation(&ComplexField::from_fn(g, |z| z).unwrap(), None).unwrap();
        assert_eq!(est.k_max, 0.0);
        let est = complex_dilatation(&ComplexField::from_fn(g, |z| z + 0.5 * z.conj()).unwrap(), None).unwrap();
        for v in est.mu.values() {
            assert_abs_diff_eq!((v - c(0.5, 0.0)).norm(), 0.0, epsilon = 1e-12);
        }
        assert!(est.is_consistent());
        assert!(complex_dilatation(&ComplexField::zeros(g), Some(0.0)).is_err());
    }

    #[test]
    fn dilatation_of_radial_stretch() {
        // f = z|z| on the unit disk has mu = z/(3 zbar)
        let g = GridSpec::centered(1.0, 256).unwrap();
        let h = g.spacing();
        let f = ComplexField::from_fn(g, |z| z * z.norm()).unwrap();
        let est = complex_dilatation(&f, None).unwrap();
        let err = g
            .nodes()
            .zip(est.mu.values())
            .filter(|(z, _)| z.norm() > 0.1 && z.norm() < 1.0 - 2.0 * h)
            .map(|(z, m)| (m - z / z.conj() / 3.0).norm())
            .fold(0.0, f64::max);
        assert!(err <= 20.0 * h, "err {err}");
    }

    #[test]
    fn max_dilatation_examples() {
        assert_eq!(max_dilatation(c(0.0, 0.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(max_dilatation(c(1.0 / 3.0, 0.0)).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(max_dilatation(c(0.0, 0.5)).unwrap(), 3.0, epsilon = 1e-15);
        assert!(matches!(max_dilatation(c(1.0, 0.0)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn dilatation_field_invariants() {
        let g = GridSpec::centered(2.0, 32).unwrap();
        assert!(DilatationField::from_fn(g, 1.0, |_| c(0.5, 0.0)).is_ok());
        assert!(DilatationField::from_fn(g, 1.0, |_| c(1.0, 0.0)).is_err());
        assert!(DilatationField::from_fn(g, 2.5, |_| c(0.5, 0.0)).is_err());
        let raw = ComplexField::from_fn(g, |_| c(0.1, 0.0)).unwrap();
        assert!(DilatationField::new(raw, 1.0).is_err());
    }

    #[test]
    fn disk_coverage_area() {
        let g = GridSpec::centered(1.5, 128).unwrap();
        let h = g.spacing();
        let area: f64 = g.disk_coverage(c(0.0, 0.0), 1.0).iter().map(|(_, w)| w * h * h).sum();
        assert_abs_diff_eq!(area, std::f64::consts::PI, epsilon = 1e-3);
    }

    #[test]
    fn separation_and_orientation() {
        let g = GridSpec::centered(1.0, 32).unwrap();
        let id = MapField::identity(g);
        let sep = id.min_separation();
        assert!(sep > 0.9 * g.spacing() && sep <= g.spacing() + 1e-12);
        assert_eq!(id.positive_triangle_fraction(), 1.0);
        let flip = MapField::from_fn(g, |z| z.conj()).unwrap();
        assert_eq!(flip.positive_triangle_fraction(), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn chordal_is_dominated_by_euclidean(ax in -50.0..50.0f64, ay in -50.0..50.0f64,
                                                 bx in -50.0..50.0f64, by in -50.0..50.0f64) {
                let (a, b) = (c(ax, ay), c(bx, by));
                let d = chordal_distance(a.into(), b.into());
                prop_assert!(d <= (a - b).norm() + 1e-15);
                prop_assert!((0.0..=1.0 + 1e-15).contains(&d));
                prop_assert!((d - chordal_distance(b.into(), a.into())).abs() < 1e-15);
            }

            #[test]
            fn chordal_triangle_inequality(p in proptest::collection::vec((-20.0..20.0f64, -20.0..20.0f64), 3),
                                           use_inf in 0usize..4) {
                let mut pts: Vec<ExtendedPoint> = p.iter().map(|&(x, y)| c(x, y).into()).collect();
                if use_inf < 3 {
                    pts[use_inf] = ExtendedPoint::Infinity;
                }
                let d = |i: usize, j: usize| chordal_distance(pts[i], pts[j]);
                prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
            }

            #[test]
            fn max_dilatation_matches_derivative_form(fz_re in 0.5..2.0f64, fz_im in -1.0..1.0f64,
                                                      t in 0.0..0.95f64, ang in 0.0..6.28f64) {
                let fz = c(fz_re, fz_im);
                let fzb = fz.norm() * t * C64::from_polar(1.0, ang);
                let k_mu = max_dilatation(fzb / fz).unwrap();
                let k_der = (fz.norm() + fzb.norm()) / (fz.norm() - fzb.norm());
                prop_assert!((k_mu - k_der).abs() <= 1e-10 * k_der);
            }
        }
    }
}
