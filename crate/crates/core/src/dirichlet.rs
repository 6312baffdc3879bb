//! Dirichlet problem `Re f = phi` on the unit circle for `f_zbar = mu f_z` in
//! the unit disk, solved as `f = F o G` with `G` a quasiconformal
//! self-homeomorphism of the disk and `F` analytic.
//!
//! `G` is built by conjugating with a Cayley transform `C` onto the upper half
//! plane, reflecting the transported dilatation across the real axis, solving
//! the principal problem there and pulling back: `G = M o C^-1 o Phi o C` with
//! a disk automorphism `M` fixing the normalization.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::beltrami::{solve_with_density, SolverConfig};
use crate::error::{Error, Result};
use crate::field::{complex_dilatation, jacobian, ComplexField, DilatationField, GridSpec, MapField};
use crate::inverse::MeshLocator;
use crate::mobius::DiskAutomorphism;
use crate::transforms::CauchyMultipole;

/// Uniform boundary samples `phi(e^{i theta_j})`, `theta_j = 2 pi j / m`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    samples: Vec<f64>,
}

impl BoundaryData {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        let m = samples.len();
        if m < 128 || !m.is_power_of_two() {
            return Err(Error::precondition(format!(
                "boundary sample count must be a power of two >= 128, got {m}"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("boundary samples must be finite"));
        }
        Ok(BoundaryData { samples })
    }

    pub fn from_fn(m: usize, phi: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..m).map(|j| phi(TAU * j as f64 / m as f64)).collect())
    }

    /// Builds uniform samples from `(theta, phi)` rows. Rows already on the
    /// uniform grid are used as is; anything else is resampled by periodic
    /// linear interpolation onto `max(128, next power of two)` angles.
    pub fn from_pairs(rows: &[(f64, f64)]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("boundary data"));
        }
        let m = rows.len();
        let uniform = m.is_power_of_two()
            && m >= 128
            && rows
                .iter()
                .enumerate()
                .all(|(j, &(t, _))| (t - TAU * j as f64 / m as f64).abs() <= 1e-9);
        if uniform {
            return Self::new(rows.iter().map(|r| r.1).collect());
        }
        let target = m.next_power_of_two().max(128);
        let mut out = Vec::with_capacity(target);
        for j in 0..target {
            let t = TAU * j as f64 / target as f64;
            let k = rows.partition_point(|r| r.0 <= t);
            let (t0, v0) = if k == 0 {
                let r = rows[m - 1];
                (r.0 - TAU, r.1)
            } else {
                rows[k - 1]
            };
            let (t1, v1) = if k == m {
                let r = rows[0];
                (r.0 + TAU, r.1)
            } else {
                rows[k]
            };
            let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
            out.push(v0 + s * (v1 - v0));
        }
        Self::new(out)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn angle(&self, j: usize) -> f64 {
        TAU * j as f64 / self.samples.len() as f64
    }

    /// Largest jump between cyclically adjacent samples.
    pub fn max_jump(&self) -> f64 {
        let m = self.samples.len();
        (0..m)
            .map(|j| (self.samples[(j + 1) % m] - self.samples[j]).abs())
            .fold(0.0, f64::max)
    }

    /// Errors when some adjacent jump exceeds `bound`.
    pub fn check_modulus(&self, bound: f64) -> Result<()> {
        let jump = self.max_jump();
        if jump > bound {
            return Err(Error::precondition(format!(
                "adjacent boundary jump {jump} exceeds the declared modulus {bound}"
            )));
        }
        Ok(())
    }

    fn oscillation(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        hi - lo
    }

    /// Forward Fourier coefficients `u_k = (1/m) sum_j u_j e^{-i k theta_j}`.
    fn fourier(&self) -> Vec<C64> {
        let m = self.samples.len();
        let mut buf: Vec<C64> = self.samples.iter().map(|&v| C64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        for v in &mut buf {
            *v /= m as f64;
        }
        buf
    }

    /// Trigonometric interpolant of the samples at an arbitrary angle.
    pub fn interpolate(&self, theta: f64) -> f64 {
        TrigInterpolant::new(self).eval(theta)
    }
}

struct TrigInterpolant {
    coeffs: Vec<C64>,
}

impl TrigInterpolant {
    fn new(data: &BoundaryData) -> Self {
        TrigInterpolant {
            coeffs: data.fourier(),
        }
    }

    fn eval(&self, theta: f64) -> f64 {
        let m = self.coeffs.len();
        let half = m / 2;
        let step = C64::from_polar(1.0, theta);
        let mut e = step;
        let mut acc = self.coeffs[0].re;
        for k in 1..half {
            acc += 2.0 * (self.coeffs[k] * e).re;
            e *= step;
        }
        // Nyquist term, symmetrized so the interpolant stays real
        acc + (self.coeffs[half] * C64::new((half as f64 * theta).cos(), 0.0)).re
    }
}

/// Taylor coefficients `a_0..a_{m/2}` of the analytic part `F`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyticPart {
    coeffs: Vec<C64>,
}

impl AnalyticPart {
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Empty("Taylor coefficients"));
        }
        if coeffs[0].im.abs() > 1e-10 {
            return Err(Error::precondition("Im F(0) must vanish"));
        }
        Ok(AnalyticPart { coeffs })
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Polynomial value without the domain check.
    fn eval_raw(&self, y: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * y + a)
    }

    fn derivative_raw(&self, y: C64) -> C64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, (k, &a)| acc * y + a * k as f64)
    }

    pub fn derivative(&self, y: C64) -> Result<C64> {
        check_inside(y)?;
        Ok(self.derivative_raw(y))
    }
}

fn check_inside(y: C64) -> Result<()> {
    if !(y.norm() <= 1.0 - 1e-6) {
        return Err(Error::precondition(format!("|y| = {} is too close to the unit circle", y.norm())));
    }
    Ok(())
}

/// Schwarz integral of boundary data in Fourier form: `a_0 = Re u_0`,
/// `a_k = 2 u_k` for `0 < k < m/2` and `a_{m/2} = u_{m/2}`, so that
/// `Re F(e^{i theta_j}) = u_j` exactly.
pub fn schwarz_reconstruct(u: &BoundaryData) -> AnalyticPart {
    let hat = u.fourier();
    let m = hat.len();
    let half = m / 2;
    let mut coeffs = Vec::with_capacity(half + 1);
    coeffs.push(C64::new(hat[0].re, 0.0));
    for k in 1..half {
        coeffs.push(2.0 * hat[k]);
    }
    coeffs.push(C64::new(hat[half].re, 0.0));
    AnalyticPart { coeffs }
}

/// `F(y)` by Horner evaluation of the Taylor polynomial.
pub fn evaluate_analytic(f: &AnalyticPart, y: C64) -> Result<C64> {
    check_inside(y)?;
    Ok(f.eval_raw(y))
}

/// `Re F(y)` by trapezoid quadrature of the Poisson integral of the samples.
pub fn poisson_real_part(u: &BoundaryData, y: C64) -> Result<f64> {
    check_inside(y)?;
    let (r, psi) = (y.norm(), y.arg());
    let m = u.len();
    let acc: f64 = u
        .samples()
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let c = (u.angle(j) - psi).cos();
            v * (1.0 - r * r) / (1.0 - 2.0 * r * c + r * r)
        })
        .sum();
    Ok(acc / m as f64)
}

/// `sup_{|t|=1, |y|<=R0} |(t + y)/(t - y)| = (1 + R0)/(1 - R0)`.
pub fn kernel_bound(r0: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r0) {
        return Err(Error::precondition(format!("R0 = {r0} must lie in [0, 1)")));
    }
    Ok((1.0 + r0) / (1.0 - r0))
}

/// Extends `mu` from the unit disk to the plane by the reflection
/// `mu(z) = conj(mu(1/zbar)) z^2 / zbar^2` for `|z| > 1`, truncated to the disk
/// of radius `L - 2h`.
pub fn reflect_extend(mu: &DilatationField) -> Result<DilatationField> {
    let spec = *mu.spec();
    let h = spec.spacing();
    if spec.center().norm() > 0.0 {
        return Err(Error::precondition("reflection needs a grid centered at the origin"));
    }
    if mu.support_radius() > 1.0 - 2.0 * h {
        return Err(Error::precondition("support of mu touches the unit circle"));
    }
    let reach = spec.half_width() - 2.0 * h;
    let zero = C64::new(0.0, 0.0);
    let values = spec
        .nodes()
        .enumerate()
        .map(|(k, z)| {
            let r = z.norm();
            if r < 1.0 {
                mu.values()[k]
            } else if r <= reach {
                let zeta = 1.0 / z.conj();
                let m = mu.field().sample_bilinear(zeta).unwrap_or(zero);
                m.conj() * (z / z.conj()).powi(2)
            } else {
                zero
            }
        })
        .collect();
    DilatationField::new(ComplexField::new(spec, values)?, reach.max(mu.support_radius()))
}

/// Resolution and solver settings for [`solve_disk_homeomorphism_with`].
#[derive(Clone, Debug)]
pub struct DiskSolverOptions {
    /// Nodes per side of the half-plane grid; defaults to the input grid size.
    pub resolution: Option<usize>,
    pub residual_tol: f64,
    pub max_iterations: usize,
}

impl Default for DiskSolverOptions {
    fn default() -> Self {
        DiskSolverOptions {
            resolution: None,
            residual_tol: 1e-10,
            max_iterations: 1000,
        }
    }
}

/// Principal half-plane map `Phi(w) = w + P[h](w)` with off-grid evaluation.
#[derive(Clone, Debug)]
struct HalfPlaneMap {
    tail: ComplexField,
    multipole: CauchyMultipole,
    center: C64,
    far_radius: f64,
}

impl HalfPlaneMap {
    fn eval(&self, w: C64) -> C64 {
        if (w - self.center).norm() >= self.far_radius {
            return w + self.multipole.eval(w);
        }
        w + bicubic(&self.tail, w).unwrap_or_else(|| self.multipole.eval(w))
    }
}

/// Keys cubic convolution, falling back to bilinear next to the grid edge.
fn bicubic(field: &ComplexField, z: C64) -> Option<C64> {
    let spec = field.spec();
    let n = spec.n();
    let (fr, fc) = spec.fractional_index(z);
    let (r, c) = (fr.floor(), fc.floor());
    if r < 1.0 || c < 1.0 || r + 2.0 > (n - 1) as f64 || c + 2.0 > (n - 1) as f64 {
        return field.sample_bilinear(z);
    }
    let weights = |t: f64| {
        let a = -0.5;
        let w = |x: f64| {
            let x = x.abs();
            if x <= 1.0 {
                (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
            } else {
                a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
            }
        };
        [w(1.0 + t), w(t), w(1.0 - t), w(2.0 - t)]
    };
    let (wr, wc) = (weights(fr - r), weights(fc - c));
    let (r, c) = (r as usize, c as usize);
    let v = field.values();
    let mut acc = C64::new(0.0, 0.0);
    for (i, wi) in wr.iter().enumerate() {
        let row = (r + i - 1) * n;
        for (j, wj) in wc.iter().enumerate() {
            acc += v[row + c + j - 1] * (wi * wj);
        }
    }
    Some(acc)
}

/// Quasiconformal self-map `G` of the unit disk with `G(z0) = 0`, `G(1) > 0`.
#[derive(Clone, Debug)]
pub struct DiskHomeomorphism {
    map: MapField,
    b: C64,
    phi: Option<HalfPlaneMap>,
    normalizer: DiskAutomorphism,
    z0: C64,
    /// `max ||G(e^{i theta})| - 1|` over 256 boundary samples.
    pub boundary_deviation: f64,
}

impl DiskHomeomorphism {
    /// Node values on the input grid (meaningful on the whole grid: outside
    /// the disk they follow the reflection-symmetric extension).
    pub fn map(&self) -> &MapField {
        &self.map
    }

    pub fn z0(&self) -> C64 {
        self.z0
    }

    /// Boundary point whose Cayley image is infinity.
    pub fn cayley_pole(&self) -> C64 {
        self.b
    }

    fn pre(&self, z: C64) -> C64 {
        let Some(phi) = &self.phi else {
            return z;
        };
        let d = self.b - z;
        if d.norm() < 1e-14 {
            return self.b;
        }
        let i = C64::new(0.0, 1.0);
        let w = i * (self.b + z) / d;
        let p = phi.eval(w);
        self.b * (p - i) / (p + i)
    }

    /// `G(z)` at an arbitrary point.
    pub fn eval(&self, z: C64) -> C64 {
        self.normalizer.apply(self.pre(z))
    }
}

/// `G` with default options.
pub fn solve_disk_homeomorphism(mu: &DilatationField, z0: C64) -> Result<DiskHomeomorphism> {
    solve_disk_homeomorphism_with(mu, z0, &DiskSolverOptions::default())
}

pub fn solve_disk_homeomorphism_with(mu: &DilatationField, z0: C64, opts: &DiskSolverOptions) -> Result<DiskHomeomorphism> {
    let spec = *mu.spec();
    let h = spec.spacing();
    if spec.center().norm() > 0.0 {
        return Err(Error::precondition("the disk problem needs a grid centered at the origin"));
    }
    if spec.half_width() < 1.0 + 3.0 * h {
        return Err(Error::precondition("grid must cover the closed unit disk with a margin of three cells"));
    }
    if !(z0.norm() < 1.0 - 3.0 * h) {
        return Err(Error::precondition(format!("|z0| = {} must stay three cells inside the disk", z0.norm())));
    }
    if mu.k_max() > crate::beltrami::K_MAX_CAP {
        return Err(Error::precondition(format!("sup |mu| = {} exceeds the solver cap", mu.k_max())));
    }
    let support: Vec<usize> = (0..spec.len()).filter(|&k| mu.values()[k].norm_sqr() > 0.0).collect();
    if support.iter().any(|&k| spec.node_at(k).norm() > 1.0 - 2.0 * h) {
        return Err(Error::precondition("support of mu must stay two cells inside the unit circle"));
    }

    let (b, phi) = if support.is_empty() {
        (C64::new(1.0, 0.0), None)
    } else {
        let b = cayley_pole(&spec, &support);
        (b, Some(half_plane_map(mu, &support, b, opts)?))
    };
    let mut g = DiskHomeomorphism {
        map: MapField::identity(spec),
        b,
        phi,
        normalizer: DiskAutomorphism::identity(),
        z0,
        boundary_deviation: 0.0,
    };
    let w0 = g.pre(z0);
    let centering = DiskAutomorphism::centering(w0)?;
    let one = centering.apply(g.pre(C64::new(1.0, 0.0)));
    g.normalizer = centering.rotated(-one.arg());

    let values: Vec<C64> = spec.nodes().map(|z| g.eval(z)).collect();
    g.map = MapField::new(ComplexField::new(spec, values)?, false);
    g.boundary_deviation = (0..256)
        .map(|j| (g.eval(C64::from_polar(1.0, TAU * j as f64 / 256.0)).norm() - 1.0).abs())
        .fold(0.0, f64::max);
    if g.boundary_deviation > 2.0 * h {
        return Err(Error::precondition(format!(
            "G moves the unit circle by {} (more than two cells)",
            g.boundary_deviation
        )));
    }
    Ok(g)
}

/// Boundary point farthest from the support (ties resolved towards `b = 1`).
fn cayley_pole(spec: &GridSpec, support: &[usize]) -> C64 {
    let mut best = (f64::MIN, C64::new(1.0, 0.0));
    for j in 0..64 {
        let b = C64::from_polar(1.0, TAU * j as f64 / 64.0);
        let d = support
            .iter()
            .map(|&k| (spec.node_at(k) - b).norm())
            .fold(f64::INFINITY, f64::min);
        if d > best.0 + 1e-12 {
            best = (d, b);
        }
    }
    best.1
}

fn half_plane_map(mu: &DilatationField, support: &[usize], b: C64, opts: &DiskSolverOptions) -> Result<HalfPlaneMap> {
    let spec = *mu.spec();
    let h = spec.spacing();
    let i = C64::new(0.0, 1.0);
    let cayley = |z: C64| i * (b + z) / (b - z);
    let dcayley = |z: C64| 2.0 * i * b / ((b - z) * (b - z));
    // Bounding box of the transported support and its mirror image.
    let (mut xlo, mut xhi, mut ymax) = (f64::MAX, f64::MIN, 0.0f64);
    for &k in support {
        let z = spec.node_at(k);
        let w = cayley(z);
        let pad = 2.0 * h * dcayley(z).norm();
        xlo = xlo.min(w.re - pad);
        xhi = xhi.max(w.re + pad);
        ymax = ymax.max(w.im + pad);
    }
    let center = C64::new(0.5 * (xlo + xhi), 0.0);
    let radius = C64::new(0.5 * (xhi - xlo), ymax).norm();
    let far_radius = 1.5 * radius;
    let n_w = opts.resolution.unwrap_or(spec.n());
    let n_w = n_w + n_w % 2;
    let half_width = 1.6 * radius * n_w as f64 / (n_w as f64 - 8.0);
    let wspec = GridSpec::new(center, half_width, n_w)?;

    let zero = C64::new(0.0, 0.0);
    let nu_at = |w: C64| {
        let upper = if w.im >= 0.0 { w } else { w.conj() };
        let z = b * (upper - i) / (upper + i);
        let m = mu.field().sample_bilinear(z).unwrap_or(zero);
        if m == zero {
            return zero;
        }
        let d = dcayley(z);
        let v = m * d / d.conj();
        if w.im >= 0.0 {
            v
        } else {
            v.conj()
        }
    };
    let nu = DilatationField::from_field(ComplexField::from_fn(wspec, nu_at)?)?;
    let cfg = SolverConfig::for_grid(wspec)?
        .with_tolerance(opts.residual_tol)
        .with_max_iterations(opts.max_iterations);
    let (f, _, density) = solve_with_density(&nu, &cfg)?;
    let tail_values: Vec<C64> = wspec.nodes().zip(f.values()).map(|(w, v)| v - w).collect();
    let tail = ComplexField::new(wspec, tail_values)?;
    let density = ComplexField::new(wspec, density)?;
    let multipole = CauchyMultipole::new(&density, center, radius, 80);
    Ok(HalfPlaneMap {
        tail,
        multipole,
        center,
        far_radius,
    })
}

/// Boundary correspondence `theta_j -> G^-1(e^{i theta_j})`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryTrace {
    pub theta: Vec<f64>,
    pub preimage: Vec<C64>,
    /// Unwrapped arguments of the preimages.
    pub preimage_angle: Vec<f64>,
}

/// Inverts `G` on `m` uniform boundary points through the triangulated image.
pub fn boundary_trace(g: &MapField, m: usize) -> Result<BoundaryTrace> {
    if m < 3 {
        return Err(Error::precondition("need at least three boundary points"));
    }
    let spec = *g.spec();
    let locator = MeshLocator::new(g.values(), spec.n(), |_, _| true);
    let mut theta = Vec::with_capacity(m);
    let mut preimage = Vec::with_capacity(m);
    for j in 0..m {
        let t = TAU * j as f64 / m as f64;
        let (tri, bary) = locator
            .locate(C64::from_polar(1.0, t))
            .ok_or_else(|| Error::precondition("unit circle not covered by the image of G"))?;
        let z = tri
            .iter()
            .zip(bary)
            .fold(C64::new(0.0, 0.0), |acc, (&k, l)| acc + spec.node_at(k) * l);
        theta.push(t);
        preimage.push(z);
    }
    let mut preimage_angle = Vec::with_capacity(m);
    let mut prev = preimage[0].arg();
    preimage_angle.push(prev);
    for z in &preimage[1..] {
        let mut a = z.arg();
        while a - prev > PI {
            a -= TAU;
        }
        while a - prev < -PI {
            a += TAU;
        }
        if a <= prev {
            return Err(Error::precondition("boundary correspondence is not monotone"));
        }
        preimage_angle.push(a);
        prev = a;
    }
    let wrap = preimage_angle[0] + TAU - prev;
    if wrap <= 0.0 || (preimage_angle[m - 1] + wrap - preimage_angle[0] - TAU).abs() > 1e-9 {
        return Err(Error::precondition("boundary correspondence does not wind once"));
    }
    Ok(BoundaryTrace {
        theta,
        preimage,
        preimage_angle,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DirichletReport {
    /// `max_j |Re f(e^{i theta_j}) - phi_j|`.
    pub boundary_residual: f64,
    pub im_f_z0: f64,
    /// `max |mu_f - mu_G|` over interior nodes with `|F'(G)| > 1e-3`.
    pub chain_rule_deviation: Option<f64>,
    pub chain_rule_nodes: usize,
    /// Size in cells of the largest connected set of interior nodes with
    /// `jacobian(f) <= 0`.
    pub max_degenerate_cluster: usize,
    pub g_boundary_deviation: f64,
    pub constant_solution: bool,
}

#[derive(Clone, Debug)]
pub struct DirichletSolution {
    pub g: Option<DiskHomeomorphism>,
    pub analytic: AnalyticPart,
    /// `F o G` at nodes inside the unit disk, zero outside.
    pub f: MapField,
    pub disk_mask: Vec<bool>,
    pub z0: C64,
    pub boundary_correspondence: Option<BoundaryTrace>,
    pub report: DirichletReport,
}

/// Solves `Re f = phi` on the circle with `Im f(z0) = 0`.
pub fn solve_dirichlet(mu: &DilatationField, phi: &BoundaryData, z0: C64) -> Result<DirichletSolution> {
    solve_dirichlet_with(mu, phi, z0, &DiskSolverOptions::default())
}

pub fn solve_dirichlet_with(
    mu: &DilatationField,
    phi: &BoundaryData,
    z0: C64,
    opts: &DiskSolverOptions,
) -> Result<DirichletSolution> {
    let spec = *mu.spec();
    let disk_mask: Vec<bool> = spec.nodes().map(|z| z.norm() < 1.0).collect();
    let m = phi.len();

    if phi.oscillation() <= 1e-14 * phi.samples()[0].abs().max(1.0) {
        let analytic = schwarz_reconstruct(phi);
        let a0 = analytic.coeffs()[0];
        let values = disk_mask.iter().map(|&inside| if inside { a0 } else { C64::new(0.0, 0.0) }).collect();
        let residual = phi.samples().iter().map(|v| (v - a0.re).abs()).fold(0.0, f64::max);
        return Ok(DirichletSolution {
            g: None,
            analytic,
            f: MapField::new(ComplexField::new(spec, values)?, false),
            disk_mask,
            z0,
            boundary_correspondence: None,
            report: DirichletReport {
                boundary_residual: residual,
                im_f_z0: a0.im,
                chain_rule_deviation: None,
                chain_rule_nodes: 0,
                max_degenerate_cluster: 0,
                g_boundary_deviation: 0.0,
                constant_solution: true,
            },
        });
    }

    let g = solve_disk_homeomorphism_with(mu, z0, opts).map_err(|e| e.at_stage("disk homeomorphism"))?;
    let trace = boundary_trace(g.map(), m).map_err(|e| e.at_stage("boundary trace"))?;
    let interp = TrigInterpolant::new(phi);
    let u = BoundaryData::new(trace.preimage_angle.iter().map(|&a| interp.eval(a)).collect())?;
    let analytic = schwarz_reconstruct(&u);

    let values: Vec<C64> = g
        .map()
        .values()
        .iter()
        .zip(&disk_mask)
        .map(|(&w, &inside)| if inside { analytic.eval_raw(w) } else { C64::new(0.0, 0.0) })
        .collect();
    let f = MapField::new(ComplexField::new(spec, values)?, false);

    let boundary_residual = (0..m)
        .map(|j| {
            let w = g.eval(C64::from_polar(1.0, phi.angle(j)));
            let w = w / w.norm().max(1.0);
            (analytic.eval_raw(w).re - phi.samples()[j]).abs()
        })
        .fold(0.0, f64::max);
    let im_f_z0 = analytic.eval_raw(g.eval(z0)).im;
    let (dev, nodes) = chain_rule_deviation(&f, g.map(), &analytic)?;
    let report = DirichletReport {
        boundary_residual,
        im_f_z0,
        chain_rule_deviation: dev,
        chain_rule_nodes: nodes,
        max_degenerate_cluster: degenerate_cluster(&f),
        g_boundary_deviation: g.boundary_deviation,
        constant_solution: false,
    };
    Ok(DirichletSolution {
        g: Some(g),
        analytic,
        f,
        disk_mask,
        z0,
        boundary_correspondence: Some(trace),
        report,
    })
}

/// Largest 4-connected cluster of nodes three cells inside the disk where
/// the discrete Jacobian of `f` is not positive.
pub fn degenerate_cluster(f: &MapField) -> usize {
    let spec = *f.spec();
    let n = spec.n();
    let h = spec.spacing();
    let jac = jacobian(f.field());
    let mut bad: Vec<bool> = spec
        .nodes()
        .zip(jac.values())
        .map(|(z, &j)| z.norm() < 1.0 - 3.0 * h && j <= 0.0)
        .collect();
    let mut best = 0;
    let mut stack = Vec::new();
    for start in 0..bad.len() {
        if !bad[start] {
            continue;
        }
        bad[start] = false;
        stack.push(start);
        let mut size = 0;
        while let Some(k) = stack.pop() {
            size += 1;
            let (r, c) = (k / n, k % n);
            let mut visit = |q: usize| {
                if bad[q] {
                    bad[q] = false;
                    stack.push(q);
                }
            };
            if r > 0 {
                visit(k - n);
            }
            if r + 1 < n {
                visit(k + n);
            }
            if c > 0 {
                visit(k - 1);
            }
            if c + 1 < n {
                visit(k + 1);
            }
        }
        best = best.max(size);
    }
    best
}

/// `max |mu_f - mu_G|` at nodes three cells inside the disk where
/// `|F'(G(z))| > 1e-3`.
fn chain_rule_deviation(f: &MapField, g: &MapField, analytic: &AnalyticPart) -> Result<(Option<f64>, usize)> {
    let spec = *f.spec();
    let h = spec.spacing();
    let mu_f = complex_dilatation(f.field(), None)?.mu;
    let mu_g = complex_dilatation(g.field(), None)?.mu;
    let mut worst: Option<f64> = None;
    let mut count = 0usize;
    for (k, z) in spec.nodes().enumerate() {
        if z.norm() >= 1.0 - 3.0 * h {
            continue;
        }
        let w = g.values()[k];
        if analytic.derivative_raw(w).norm() <= 1e-3 {
            continue;
        }
        let d = (mu_f.values()[k] - mu_g.values()[k]).norm();
        worst = Some(worst.map_or(d, |x: f64| x.max(d)));
        count += 1;
    }
    Ok((worst, count))
}
