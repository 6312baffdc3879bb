//! Principal solutions `f = z + P[h]` of `f_zbar = mu f_z` and the geometric
//! checks run on them.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::admissibility::{membership_ae, SetConstraint};
use crate::field::{complex_dilatation, jacobian, wirtinger_derivatives, ComplexField, DilatationField, GridSpec, MapField};
use crate::inverse::{homeomorphic_proxy, invert_map, InverseMap};
use crate::transforms::TransformPlan;

/// Largest admissible `sup |mu|` for the Neumann iteration.
pub const K_MAX_CAP: f64 = 0.97;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stopping threshold on the L2 norm of the Neumann increment.
    pub residual_tol: f64,
    pub plan: TransformPlan,
}

impl SolverConfig {
    pub fn new(plan: TransformPlan) -> Self {
        SolverConfig {
            max_iterations: 1000,
            residual_tol: 1e-10,
            plan,
        }
    }

    pub fn for_grid(spec: GridSpec) -> Result<Self> {
        Ok(SolverConfig::new(TransformPlan::new(spec)?))
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.residual_tol = tol;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.residual_tol >= 1e-14) {
            return Err(Error::precondition(format!(
                "residual tolerance must be at least 1e-14, got {}",
                self.residual_tol
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::precondition("max_iterations must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassFlags {
    pub hydrodynamic: bool,
    pub homeomorphic_proxy: bool,
    pub regular_proxy: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolutionReport {
    pub converged: bool,
    pub iterations_used: usize,
    pub final_residual: f64,
    /// L2 norms of the successive Neumann increments.
    pub increments: Vec<f64>,
    pub k_max: f64,
    pub support_radius: f64,
    /// `sup |f(z) - z|` over `|z| >= 2 r_supp`.
    pub tail_residual: f64,
    pub min_interior_jacobian: f64,
    pub positive_jacobian_fraction: f64,
    pub koebe_verdict: bool,
    pub class_flags: ClassFlags,
}

impl SolutionReport {
    /// Ratios of successive increments.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.increments
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Solves `h = mu (1 + S h)` by Neumann iteration and returns `f = z + P[h]`.
pub fn solve_principal(mu: &DilatationField, cfg: &SolverConfig) -> Result<(MapField, SolutionReport)> {
    solve_with_density(mu, cfg).map(|(f, report, _)| (f, report))
}

/// As [`solve_principal`], also returning the density `h = f_zbar`.
pub(crate) fn solve_with_density(mu: &DilatationField, cfg: &SolverConfig) -> Result<(MapField, SolutionReport, Vec<C64>)> {
    cfg.validate()?;
    let spec = *mu.spec();
    cfg.plan.spec().ensure_same(&spec)?;
    if mu.k_max() > K_MAX_CAP {
        return Err(Error::precondition(format!(
            "sup |mu| = {} exceeds the cap {K_MAX_CAP}",
            mu.k_max()
        )));
    }
    let (h, converged, increments) = neumann(mu, cfg)?;
    let iterations_used = increments.len();
    let final_residual = *increments.last().unwrap();
    if !converged {
        return Err(Error::NonConvergence {
            iterations: iterations_used,
            residual: final_residual,
        });
    }
    let p = cfg.plan.cauchy_unchecked(&h);
    let values: Vec<C64> = spec.nodes().zip(p).map(|(z, v)| z + v).collect();
    let field = ComplexField::new(spec, values)?;
    let r_supp = mu.support_radius();
    let f = MapField::new(field, true).with_support_radius(r_supp);
    let report = build_report(&f, mu, converged, increments);
    Ok((f, report, h))
}

fn neumann(mu: &DilatationField, cfg: &SolverConfig) -> Result<(Vec<C64>, bool, Vec<f64>)> {
    let spec = *mu.spec();
    let n = spec.n();
    let m = mu.values();
    let edge = (0..n).any(|k| {
        [0, 1, n - 2, n - 1]
            .iter()
            .any(|&e| m[e * n + k].norm_sqr() != 0.0 || m[k * n + e].norm_sqr() != 0.0)
    });
    if edge {
        return Err(Error::precondition("support of mu must stay two cells inside the grid"));
    }
    let area = spec.spacing() * spec.spacing();
    let l2 = |v: &[C64]| (v.iter().map(|x| x.norm_sqr()).sum::<f64>() * area).sqrt();
    let rows = match (0..n).position(|r| m[r * n..(r + 1) * n].iter().any(|v| v.norm_sqr() != 0.0)) {
        Some(first) => {
            let last = (0..n)
                .rev()
                .find(|&r| m[r * n..(r + 1) * n].iter().any(|v| v.norm_sqr() != 0.0))
                .unwrap();
            first..last + 1
        }
        None => 0..0,
    };
    let mut total = m.to_vec();
    let mut inc = m.to_vec();
    let mut increments = vec![l2(&inc)];
    loop {
        let last = *increments.last().unwrap();
        if last <= cfg.residual_tol {
            return Ok((total, true, increments));
        }
        if increments.len() >= cfg.max_iterations || !last.is_finite() {
            return Ok((total, false, increments));
        }
        let s = cfg.plan.beurling_rows(&inc, rows.clone());
        for (k, (d, sv)) in inc.iter_mut().zip(&s).enumerate() {
            *d = m[k] * sv;
            total[k] += *d;
        }
        increments.push(l2(&inc));
    }
}

fn build_report(f: &MapField, mu: &DilatationField, converged: bool, increments: Vec<f64>) -> SolutionReport {
    let r_supp = mu.support_radius();
    let tail_residual = f.tail_residual(2.0 * r_supp);
    let (min_j, pos_frac) = interior_jacobian(f);
    let homeo = homeomorphic_proxy(f);
    let hydro = hydrodynamic_flag(f, r_supp);
    let koebe_verdict = koebe_report(f, r_supp).map(|k| k.verdict).unwrap_or(false);
    SolutionReport {
        converged,
        iterations_used: increments.len(),
        final_residual: *increments.last().unwrap(),
        increments,
        k_max: mu.k_max(),
        support_radius: r_supp,
        tail_residual,
        min_interior_jacobian: min_j,
        positive_jacobian_fraction: pos_frac,
        koebe_verdict,
        class_flags: ClassFlags {
            hydrodynamic: hydro,
            homeomorphic_proxy: homeo,
            regular_proxy: pos_frac >= 0.99,
        },
    }
}

/// Minimum Jacobian and fraction of positive Jacobians over nodes at least two
/// cells from the grid boundary.
pub fn interior_jacobian(f: &MapField) -> (f64, f64) {
    let n = f.spec().n();
    let j = jacobian(f.field());
    let mut min = f64::INFINITY;
    let mut pos = 0usize;
    let mut total = 0usize;
    for r in 2..n - 2 {
        for c in 2..n - 2 {
            let v = j.values()[r * n + c];
            min = min.min(v);
            total += 1;
            if v > 0.0 {
                pos += 1;
            }
        }
    }
    (min, pos as f64 / total.max(1) as f64)
}

fn hydrodynamic_flag(f: &MapField, r_supp: f64) -> bool {
    match tail_report(f, r_supp) {
        Ok(t) => t.tail_sup <= 0.1 * r_supp && (t.decay_exponent <= -0.9 || t.tail_sup <= 1e-12),
        Err(_) => f.is_hydrodynamic(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KoebeReport {
    pub r0_inv: f64,
    /// `max |f(z)|` over nodes with `|z| < r0_inv`.
    pub inner_max: f64,
    pub inner_ok: bool,
    pub mesh_points: usize,
    /// Largest distance from a mesh point of the outer annulus to the image of
    /// `{|z| >= r0_inv}`.
    pub coverage_gap: f64,
    pub outer_ok: bool,
    pub verdict: bool,
}

/// Checks `f(B(0, r)) ⊂ B(0, 4r)` and that images of `{|z| >= r}` cover
/// `{4r <= |w| <= L}` up to one grid cell.
pub fn koebe_report(f: &MapField, r0_inv: f64) -> Result<KoebeReport> {
    if !(r0_inv > 0.0) {
        return Err(Error::precondition("r0_inv must be positive"));
    }
    if let Some(r) = f.support_radius() {
        if r > r0_inv {
            return Err(Error::precondition(format!(
                "support radius {r} exceeds r0_inv = {r0_inv}"
            )));
        }
    }
    let spec = *f.spec();
    let h = spec.spacing();
    let o = spec.center();
    let mut inner_max: f64 = 0.0;
    let mut outer: Vec<C64> = Vec::new();
    for (z, &w) in spec.nodes().zip(f.values()) {
        if (z - o).norm() < r0_inv {
            inner_max = inner_max.max((w - o).norm());
        } else {
            outer.push(w);
        }
    }
    let inner_ok = inner_max < 4.0 * r0_inv;

    let r_lo = 4.0 * r0_inv;
    let r_hi = spec.half_width() - 2.0 * h;
    let mesh: Vec<C64> = if r_hi > r_lo {
        let k = ((2.0 * r_hi) / h).ceil() as i64;
        (-k..=k)
            .flat_map(|a| (-k..=k).map(move |b| o + C64::new(b as f64 * h, a as f64 * h)))
            .filter(|w| {
                let d = (w - o).norm();
                d >= r_lo && d <= r_hi
            })
            .collect()
    } else {
        Vec::new()
    };
    let index = PointIndex::new(&outer, h);
    let coverage_gap = mesh
        .iter()
        .map(|&w| index.nearest_within(w, 2.0 * h).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let outer_ok = coverage_gap <= h;
    Ok(KoebeReport {
        r0_inv,
        inner_max,
        inner_ok,
        mesh_points: mesh.len(),
        coverage_gap,
        outer_ok,
        verdict: inner_ok && outer_ok,
    })
}

/// Uniform bucket index for nearest-point queries within a small radius.
struct PointIndex {
    origin: C64,
    width: f64,
    nx: usize,
    ny: usize,
    starts: Vec<usize>,
    points: Vec<C64>,
}

impl PointIndex {
    fn new(points: &[C64], width: f64) -> Self {
        if points.is_empty() {
            return PointIndex {
                origin: C64::new(0.0, 0.0),
                width,
                nx: 0,
                ny: 0,
                starts: vec![0],
                points: Vec::new(),
            };
        }
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo = C64::new(lo.re.min(p.re), lo.im.min(p.im));
            hi = C64::new(hi.re.max(p.re), hi.im.max(p.im));
        }
        let nx = ((hi.re - lo.re) / width) as usize + 1;
        let ny = ((hi.im - lo.im) / width) as usize + 1;
        let key = |p: &C64| {
            let bx = ((p.re - lo.re) / width) as usize;
            let by = ((p.im - lo.im) / width) as usize;
            by.min(ny - 1) * nx + bx.min(nx - 1)
        };
        let mut starts = vec![0usize; nx * ny + 1];
        for p in points {
            starts[key(p) + 1] += 1;
        }
        for k in 1..starts.len() {
            starts[k] += starts[k - 1];
        }
        let mut fill = starts.clone();
        let mut sorted = vec![C64::new(0.0, 0.0); points.len()];
        for p in points {
            let b = key(p);
            sorted[fill[b]] = *p;
            fill[b] += 1;
        }
        PointIndex {
            origin: lo,
            width,
            nx,
            ny,
            starts,
            points: sorted,
        }
    }

    fn nearest_within(&self, w: C64, radius: f64) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let reach = (radius / self.width).ceil() as i64;
        let s = (w - self.origin) / self.width;
        let (bx, by) = (s.re.floor() as i64, s.im.floor() as i64);
        let mut best: Option<f64> = None;
        for y in by - reach..=by + reach {
            for x in bx - reach..=bx + reach {
                if x < 0 || y < 0 || x >= self.nx as i64 || y >= self.ny as i64 {
                    continue;
                }
                let b = y as usize * self.nx + x as usize;
                for p in &self.points[self.starts[b]..self.starts[b + 1]] {
                    let d = (p - w).norm();
                    if d <= radius && best.map_or(true, |b| d < b) {
                        best = Some(d);
                    }
                }
            }
        }
        best
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    /// Least-squares slope of `log |f - z|` against `log |z|`; `-inf` when the
    /// tail vanishes.
    #[serde(serialize_with = "crate::report::finite_or_null")]
    pub decay_exponent: f64,
    pub tail_sup: f64,
    pub samples: usize,
}

/// Fits the decay of `|f(z) - z|` over `2 r_supp <= |z| <= L/1.5`.
pub fn tail_report(f: &MapField, r_supp: f64) -> Result<TailReport> {
    let spec = *f.spec();
    let l = spec.half_width();
    if l < 4.0 * r_supp {
        return Err(Error::precondition(format!(
            "grid half-width {l} must be at least 4 r_supp = {}",
            4.0 * r_supp
        )));
    }
    let (lo, hi) = (2.0 * r_supp, l / 1.5);
    let o = spec.center();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut tail_sup: f64 = 0.0;
    for (z, &w) in spec.nodes().zip(f.values()) {
        let d = (z - o).norm();
        if d < lo {
            continue;
        }
        let t = (w - z).norm();
        tail_sup = tail_sup.max(t);
        if d <= hi {
            pts.push((d, t));
        }
    }
    if pts.len() < 16 {
        return Err(Error::Empty("too few samples in the tail annulus"));
    }
    let samples = pts.len();
    if tail_sup <= 1e-12 {
        return Ok(TailReport {
            decay_exponent: f64::NEG_INFINITY,
            tail_sup,
            samples,
        });
    }
    let floor = 1e-300;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(d, t) in &pts {
        let (x, y) = (d.ln(), t.max(floor).ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let k = samples as f64;
    let slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    Ok(TailReport {
        decay_exponent: slope,
        tail_sup,
        samples,
    })
}

/// Empirical membership in the class of regular principal solutions whose
/// dilatation takes values in a set constraint.
#[derive(Clone, Debug, Serialize)]
pub struct MembershipFlags {
    pub hydrodynamic: bool,
    pub positive_jacobian_fraction: f64,
    /// Jacobian positive on at least 99% of interior nodes.
    pub regular: bool,
    /// Fraction of nodes with `mu(z) ∉ M(z)`.
    pub violating_fraction: f64,
    /// `mu(z) ∈ M(z)` on at least 99.9% of nodes.
    pub membership: bool,
    pub member: bool,
}

pub fn class_membership_check(f: &MapField, mu: &DilatationField, constraint: &SetConstraint) -> Result<MembershipFlags> {
    f.spec().ensure_same(mu.spec())?;
    let hydrodynamic = hydrodynamic_flag(f, mu.support_radius());
    let (_, positive_jacobian_fraction) = interior_jacobian(f);
    let m = membership_ae(mu, constraint)?;
    let regular = positive_jacobian_fraction >= 0.99;
    Ok(MembershipFlags {
        hydrodynamic,
        positive_jacobian_fraction,
        regular,
        violating_fraction: m.violating_fraction,
        membership: m.verdict,
        member: hydrodynamic && regular && m.verdict,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InverseDilatationReport {
    /// `max |mu_g(w) + (f_z / conj f_z)(g(w)) mu(g(w))|` over compared nodes.
    pub max_deviation: f64,
    pub compared_nodes: usize,
}

/// Compares the dilatation of the inverse `g = f^-1` with the transformed
/// coefficient `-(f_z / conj f_z) mu` at `g(w)`.
///
/// Nodes whose preimage lies within `margin` of a place where the difference
/// quotient of `mu` between neighbouring nodes exceeds `max_gradient` are
/// skipped (this covers jumps at every resolution), as are nodes next to
/// missing inverse values.
pub fn inverse_dilatation_check(
    f: &MapField,
    mu: &DilatationField,
    inverse: &InverseMap,
    margin: f64,
    max_gradient: f64,
) -> Result<InverseDilatationReport> {
    f.spec().ensure_same(mu.spec())?;
    let spec = *mu.spec();
    let n = spec.n();
    let h = spec.spacing();
    let m = mu.values();
    let mut rough = vec![false; spec.len()];
    for r in 0..n {
        for c in 0..n {
            let k = r * n + c;
            let jump = |q: usize| (m[k] - m[q]).norm() > max_gradient * h;
            if (c + 1 < n && jump(k + 1)) || (r + 1 < n && jump(k + n)) {
                rough[k] = true;
                if c + 1 < n {
                    rough[k + 1] = true;
                }
                if r + 1 < n {
                    rough[k + n] = true;
                }
            }
        }
    }
    let reach = (margin / h).ceil() as isize;
    let mut near = vec![false; spec.len()];
    for (k, _) in rough.iter().enumerate().filter(|(_, &b)| b) {
        let (r, c) = ((k / n) as isize, (k % n) as isize);
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let (rr, cc) = (r + dr, c + dc);
                if rr < 0 || cc < 0 || rr >= n as isize || cc >= n as isize {
                    continue;
                }
                if ((dr * dr + dc * dc) as f64).sqrt() * h <= margin {
                    near[rr as usize * n + cc as usize] = true;
                }
            }
        }
    }

    let (fz, _) = wirtinger_derivatives(f.field());
    let g = inverse.map.field();
    let tspec = *g.spec();
    let tn = tspec.n();
    let mu_g = complex_dilatation(g, None)?.mu;
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for r in 1..tn - 1 {
        for c in 1..tn - 1 {
            let k = r * tn + c;
            if ![k, k - 1, k + 1, k - tn, k + tn].iter().all(|&q| inverse.valid[q]) {
                continue;
            }
            let z = g.values()[k];
            let Some(idx) = spec.nearest_node(z) else { continue };
            if near[idx] || spec.inset(z) < 2.0 * h {
                continue;
            }
            let (Some(mz), Some(d)) = (mu.field().sample_bilinear(z), fz.sample_bilinear(z)) else {
                continue;
            };
            let phase = if d.norm() > 0.0 { d / d.conj() } else { C64::new(1.0, 0.0) };
            worst = worst.max((mu_g.values()[k] + phase * mz).norm());
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("inverse dilatation comparison nodes"));
    }
    Ok(InverseDilatationReport {
        max_deviation: worst,
        compared_nodes: count,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyReport {
    pub c0_radius: f64,
    /// `∫_{C0} |g_w|^2 dm` for the inverse `g`.
    pub lhs: f64,
    /// `sup_{C0} |g|`.
    pub image_radius: f64,
    /// `∫_{B(0, A+1)} 1 / (1 - |mu|^2) dm`.
    pub rhs: f64,
    pub verdict: bool,
}

/// Dirichlet energy of `f^-1` on `C0 = B(0, c0_radius)` against the
/// dilatation integral over `B(0, A + 1)`, with 10% slack.
pub fn inverse_energy_check(f: &MapField, mu: &DilatationField, c0_radius: f64) -> Result<EnergyReport> {
    f.spec().ensure_same(mu.spec())?;
    let spec = *f.spec();
    let h = spec.spacing();
    if !(c0_radius > 2.0 * h) {
        return Err(Error::precondition(format!("C0 radius {c0_radius} is below two grid cells")));
    }
    let cells = (2.0 * (c0_radius + 3.0 * h) / h).ceil() as usize;
    let target = GridSpec::new(spec.center(), 0.5 * (cells + cells % 2) as f64 * h, cells + cells % 2)?;
    let inv = invert_map(f, target)?;
    let cover = target.disk_coverage(target.center(), c0_radius);
    let (gw, _) = wirtinger_derivatives(inv.map.field());
    let mut lhs = 0.0;
    let mut image_radius = 0.0f64;
    for &(k, frac) in &cover {
        let (r, c) = (k / target.n(), k % target.n());
        let stencil = [k, k - 1, k + 1, k - target.n(), k + target.n()];
        if r == 0 || c == 0 || r + 1 == target.n() || c + 1 == target.n() || !stencil.iter().all(|&q| inv.valid[q]) {
            return Err(Error::precondition("image of the grid does not cover C0"));
        }
        lhs += gw.values()[k].norm_sqr() * frac * h * h;
        image_radius = image_radius.max((inv.map.values()[k] - spec.center()).norm());
    }
    let big = image_radius + 1.0;
    let mut rhs = 0.0;
    let mut covered = 0.0;
    for (k, frac) in spec.disk_coverage(spec.center(), big) {
        let a = frac * h * h;
        rhs += a / (1.0 - mu.values()[k].norm_sqr());
        covered += a;
    }
    // mu vanishes off the grid
    rhs += (std::f64::consts::PI * big * big - covered).max(0.0);
    Ok(EnergyReport {
        c0_radius,
        lhs,
        image_radius,
        rhs,
        verdict: lhs <= 1.1 * rhs,
    })
}
