//! Disk-valued set constraints `M(z) = B(c(z), rho(z))`, the majorant
//! `Q_M = (1 + q_M)/(1 - q_M)` and finite-scale FMO / divergence diagnostics.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ComplexField, DilatationField, GridSpec, RealField};

/// Slack used when testing `|nu - c| <= rho` on closed disks.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SetConstraint {
    center: ComplexField,
    radius: RealField,
    safety: f64,
    support_radius: f64,
}

impl SetConstraint {
    /// Validates `|c| + rho <= 1 - safety` and `c = rho = 0` outside the
    /// support disk.
    pub fn new(center: ComplexField, radius: RealField, safety: f64, support_radius: f64) -> Result<Self> {
        let spec = *center.spec();
        spec.ensure_same(radius.spec())?;
        if !(safety > 0.0 && safety < 1.0) {
            return Err(Error::precondition(format!("safety {safety} must lie in (0, 1)")));
        }
        for (k, (c, &rho)) in center.values().iter().zip(radius.values()).enumerate() {
            if rho < 0.0 {
                return Err(Error::precondition(format!("negative radius at node {k}")));
            }
            if c.norm() + rho > 1.0 - safety {
                return Err(Error::precondition(format!(
                    "constraint disk at node {k} leaves the safe disk: |c| + rho = {}",
                    c.norm() + rho
                )));
            }
            let outside = (spec.node_at(k) - spec.center()).norm() > support_radius;
            if outside && (c.norm() > 0.0 || rho > 0.0) {
                return Err(Error::precondition(format!(
                    "constraint nonzero at node {k} outside the support radius"
                )));
            }
        }
        Ok(SetConstraint {
            center,
            radius,
            safety,
            support_radius,
        })
    }

    /// Constant disk `B(c, rho)` on `|z - center| <= support_radius`.
    pub fn disk(spec: GridSpec, c: C64, rho: f64, support_radius: f64, safety: f64) -> Result<Self> {
        Self::from_fn(spec, support_radius, safety, |_| (c, rho))
    }

    pub fn from_fn(spec: GridSpec, support_radius: f64, safety: f64, f: impl Fn(C64) -> (C64, f64)) -> Result<Self> {
        let o = spec.center();
        let inside = |z: C64| (z - o).norm() <= support_radius;
        let center = ComplexField::from_fn(spec, |z| if inside(z) { f(z).0 } else { C64::new(0.0, 0.0) })?;
        let radius = RealField::from_fn(spec, |z| if inside(z) { f(z).1 } else { 0.0 })?;
        Self::new(center, radius, safety, support_radius)
    }

    pub fn spec(&self) -> &GridSpec {
        self.center.spec()
    }

    pub fn center(&self) -> &ComplexField {
        &self.center
    }

    pub fn radius(&self) -> &RealField {
        &self.radius
    }

    pub fn safety(&self) -> f64 {
        self.safety
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// `nu ∈ M(z_k)` for the closed disk at node `k`.
    pub fn contains(&self, k: usize, nu: C64) -> bool {
        (nu - self.center.values()[k]).norm() <= self.radius.values()[k] + MEMBERSHIP_TOL
    }
}

/// `q_M(z) = sup_{nu ∈ M(z)} |nu| = |c(z)| + rho(z)`.
pub fn q_sup(constraint: &SetConstraint) -> RealField {
    let values = constraint
        .center
        .values()
        .iter()
        .zip(constraint.radius.values())
        .map(|(c, r)| c.norm() + r)
        .collect();
    RealField::new(*constraint.spec(), values).expect("finite by construction")
}

/// Majorant `Q >= 1` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct QProfile {
    values: RealField,
}

impl QProfile {
    pub fn new(values: RealField) -> Result<Self> {
        if let Some(k) = values.values().iter().position(|&q| !(q >= 1.0)) {
            return Err(Error::precondition(format!(
                "Q must be at least 1, got {} at node {k}",
                values.values()[k]
            )));
        }
        Ok(QProfile { values })
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(C64) -> f64) -> Result<Self> {
        Self::new(RealField::from_fn(spec, f)?)
    }

    /// Radial profile `Q(z) = q(|z - z0|)` with `|z - z0|` clamped below by
    /// `cap_radius`, so singular profiles stay finite at the grid scale.
    pub fn radial(spec: GridSpec, z0: C64, cap_radius: f64, q: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(spec, |z| q((z - z0).norm().max(cap_radius)))
    }

    pub fn spec(&self) -> &GridSpec {
        self.values.spec()
    }

    pub fn values(&self) -> &[f64] {
        self.values.values()
    }

    pub fn field(&self) -> &RealField {
        &self.values
    }
}

/// `Q = (1 + q)/(1 - q)` pointwise.
pub fn profile_from_q(q: &RealField) -> Result<QProfile> {
    let mut out = Vec::with_capacity(q.values().len());
    for (k, &v) in q.values().iter().enumerate() {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::precondition(format!("q = {v} at node {k} is outside [0, 1)")));
        }
        out.push((1.0 + v) / (1.0 - v));
    }
    QProfile::new(RealField::new(*q.spec(), out)?)
}

/// Mean of `Q` over the circle `|z - z0| = t` (bilinear trapezoid rule).
pub fn circle_average(q: &QProfile, z0: C64, t: f64) -> Result<f64> {
    let h = q.spec().spacing();
    if !(t > 2.0 * h) {
        return Err(Error::precondition(format!(
            "radius {t} must exceed two grid spacings ({})",
            2.0 * h
        )));
    }
    let samples = ((2.0 * PI * t / h).ceil() as usize).max(64);
    let mut acc = 0.0;
    for j in 0..samples {
        let z = z0 + C64::from_polar(t, 2.0 * PI * j as f64 / samples as f64);
        acc += q
            .field()
            .sample_bilinear(z)
            .ok_or_else(|| Error::precondition("circle leaves the grid"))?;
    }
    Ok(acc / samples as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceVerdict {
    Diverges,
    Converges,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct DivergenceReport {
    pub verdict: DivergenceVerdict,
    /// `(tau, I(tau))` with `I(tau) = ∫_tau^delta0 dt / (t q(t))`.
    pub table: Vec<(f64, f64)>,
}

/// Increments whose ratio stays above this value count as non-saturating.
const GEOMETRIC_RATIO: f64 = 0.75;

/// Divergence diagnostic for the circle means of `Q` around `z0`.
pub fn divergence_check(q: &QProfile, z0: C64, delta0: f64, t_min: f64) -> Result<DivergenceReport> {
    let h = q.spec().spacing();
    if !(t_min > 0.0 && t_min < delta0) {
        return Err(Error::precondition("need 0 < t_min < delta0"));
    }
    if t_min < 2.0 * h {
        return Err(Error::precondition(format!(
            "t_min = {t_min} is below two grid spacings ({}); scales are unresolved",
            2.0 * h
        )));
    }
    // Circle means need t > 2h strictly; the first octave node sits at t_min.
    let guard = 2.0 * h * (1.0 + 1e-12);
    let mut err = None;
    let report = divergence_check_profile(
        |t| match circle_average(q, z0, t.max(guard)) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                1.0
            }
        },
        delta0,
        t_min,
    );
    match err {
        Some(e) => Err(e),
        None => report,
    }
}

/// Divergence diagnostic for an explicit circle-mean function `q(t)`.
pub fn divergence_check_profile(mut q: impl FnMut(f64) -> f64, delta0: f64, t_min: f64) -> Result<DivergenceReport> {
    if !(t_min > 0.0 && t_min < delta0) {
        return Err(Error::precondition("need 0 < t_min < delta0"));
    }
    const SUB: usize = 16;
    let octaves = (delta0 / t_min).log2().floor() as usize;
    let mut table = vec![(delta0, 0.0)];
    let mut total = 0.0;
    let ln2 = std::f64::consts::LN_2;
    for j in 0..octaves {
        // Simpson in s = ln t over [ln delta0 - (j+1) ln 2, ln delta0 - j ln 2].
        let s_hi = delta0.ln() - j as f64 * ln2;
        let ds = ln2 / SUB as f64;
        let mut acc = 0.0;
        for i in 0..=SUB {
            let w = if i == 0 || i == SUB {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w / q((s_hi - i as f64 * ds).exp());
        }
        total += acc * ds / 3.0;
        table.push((delta0 * 0.5f64.powi(j as i32 + 1), total));
    }
    let increments: Vec<f64> = table.windows(2).map(|w| w[1].1 - w[0].1).collect();
    // The last decade spans log2(10) ~ 3.3 octaves, i.e. three increment ratios.
    let window = 3usize;
    let verdict = if increments.len() < window + 1 {
        DivergenceVerdict::Inconclusive
    } else {
        let tail = &increments[increments.len() - window - 1..];
        let ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();
        if ratios.iter().all(|&r| r > GEOMETRIC_RATIO) {
            DivergenceVerdict::Diverges
        } else if ratios.iter().all(|&r| r <= GEOMETRIC_RATIO) {
            DivergenceVerdict::Converges
        } else {
            DivergenceVerdict::Inconclusive
        }
    };
    Ok(DivergenceReport { verdict, table })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FmoVerdict {
    #[serde(rename = "FMO-consistent")]
    Consistent,
    #[serde(rename = "FMO-violated (empirical)")]
    Violated,
}

#[derive(Clone, Debug, Serialize)]
pub struct FmoRow {
    pub eps: f64,
    pub mean: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FmoReport {
    pub table: Vec<FmoRow>,
    pub limsup_estimate: f64,
    /// `limsup_estimate` relative to the deviation on the largest disk.
    pub growth_ratio: f64,
    pub verdict: FmoVerdict,
}

/// Deviation sequences whose late maximum exceeds the first value by this
/// factor are flagged.
const GROWTH_LIMIT: f64 = 2.0;

/// Default schedule: 12 geometric radii from `L/8` down to `4h`.
pub fn default_eps_schedule(spec: &GridSpec) -> Vec<f64> {
    let hi = spec.half_width() / 8.0;
    let lo = 4.0 * spec.spacing();
    (0..12).map(|k| hi * (lo / hi).powf(k as f64 / 11.0)).collect()
}

/// Mean oscillation of `Q` on shrinking disks around `z0`.
pub fn fmo_estimate(q: &QProfile, z0: C64, eps_schedule: &[f64]) -> Result<FmoReport> {
    let spec = *q.spec();
    let h = spec.spacing();
    if eps_schedule.len() < 4 {
        return Err(Error::precondition("eps schedule needs at least 4 radii"));
    }
    if eps_schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::precondition("eps schedule must be strictly decreasing"));
    }
    if eps_schedule.iter().any(|&e| e < 4.0 * h * (1.0 - 1e-12)) {
        return Err(Error::precondition("eps schedule resolves fewer than four grid cells"));
    }
    if spec.inset(z0) < eps_schedule[0] {
        return Err(Error::precondition("largest disk leaves the grid"));
    }
    let vals = q.values();
    let mut table = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        let cover = spec.disk_coverage(z0, eps);
        let w: f64 = cover.iter().map(|&(_, w)| w).sum();
        let mean = cover.iter().map(|&(k, c)| c * vals[k]).sum::<f64>() / w;
        let dev = cover.iter().map(|&(k, c)| c * (vals[k] - mean).abs()).sum::<f64>() * h * h / (PI * eps * eps);
        table.push(FmoRow {
            eps,
            mean,
            deviation: dev,
        });
    }
    let half = &table[table.len() / 2..];
    let limsup_estimate = half.iter().map(|r| r.deviation).fold(0.0, f64::max);
    let first = table[0].deviation;
    let growth_ratio = if limsup_estimate <= 1e-12 {
        0.0
    } else if first <= 1e-12 {
        f64::INFINITY
    } else {
        limsup_estimate / first
    };
    let verdict = if growth_ratio > GROWTH_LIMIT {
        FmoVerdict::Violated
    } else {
        FmoVerdict::Consistent
    };
    Ok(FmoReport {
        table,
        limsup_estimate,
        growth_ratio,
        verdict,
    })
}

pub(crate) fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n, sy / n);
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    num / den
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    Disk { center: C64, radius: f64 },
    Full,
}

/// Cell-quadrature integral of `Q` over a region.
pub fn integrability_check(q: &QProfile, region: Region) -> Result<f64> {
    let spec = *q.spec();
    let area = spec.spacing() * spec.spacing();
    let vals = q.values();
    match region {
        Region::Full => Ok(vals.iter().sum::<f64>() * area),
        Region::Disk { center, radius } => {
            if spec.inset(center) < radius {
                return Err(Error::precondition("integration disk leaves the grid"));
            }
            Ok(spec
                .disk_coverage(center, radius)
                .iter()
                .map(|&(k, w)| w * vals[k])
                .sum::<f64>()
                * area)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipReport {
    pub violating_fraction: f64,
    pub violating_nodes: usize,
    pub verdict: bool,
}

/// Fraction of nodes with `mu(z) ∉ M(z)`; verdict holds up to 0.1%.
pub fn membership_ae(mu: &DilatationField, constraint: &SetConstraint) -> Result<MembershipReport> {
    mu.spec().ensure_same(constraint.spec())?;
    let bad = mu
        .values()
        .iter()
        .enumerate()
        .filter(|&(k, &v)| !constraint.contains(k, v))
        .count();
    let frac = bad as f64 / mu.values().len() as f64;
    Ok(MembershipReport {
        violating_fraction: frac,
        violating_nodes: bad,
        verdict: frac <= 1e-3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::max_dilatation;
    use crate::mobius::DiskAutomorphism;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec() -> GridSpec {
        GridSpec::centered(2.0, 64).unwrap()
    }

    #[test]
    fn q_sup_examples() {
        let c = SetConstraint::disk(spec(), C64::new(0.0, 0.0), 0.5, 1.0, 0.1).unwrap();
        let q = q_sup(&c);
        for (z, v) in spec().nodes().zip(q.values()) {
            assert_eq!(*v, if z.norm() <= 1.0 { 0.5 } else { 0.0 });
        }
        let c = SetConstraint::disk(spec(), C64::new(0.2, 0.0), 0.1, 1.0, 0.1).unwrap();
        assert_abs_diff_eq!(q_sup(&c).values().iter().cloned().fold(0.0, f64::max), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn constraint_validation() {
        assert!(SetConstraint::disk(spec(), C64::new(0.5, 0.0), 0.45, 1.0, 0.1).is_err());
        assert!(SetConstraint::disk(spec(), C64::new(0.0, 0.0), -0.1, 1.0, 0.1).is_err());
        let center = ComplexField::from_fn(spec(), |_| C64::new(0.1, 0.0)).unwrap();
        let radius = RealField::constant(spec(), 0.1);
        assert!(SetConstraint::new(center, radius, 0.1, 1.0).is_err());
    }

    #[test]
    fn q_sup_matches_sampled_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = GridSpec::centered(2.0, 16).unwrap();
        let c = SetConstraint::from_fn(spec, 1.5, 0.05, |z| (C64::new(0.3 * z.re.sin(), 0.2 * z.im.cos()), 0.2 + 0.1 * z.re.cos())).unwrap();
        let q = q_sup(&c);
        for k in 0..spec.len() {
            let (cc, r) = (c.center().values()[k], c.radius().values()[k]);
            let mut best: f64 = 0.0;
            for _ in 0..10_000 {
                // the supremum sits on the boundary circle, so sample there
                let nu = cc + C64::from_polar(r, rng.random_range(0.0..2.0 * PI));
                assert!(c.contains(k, nu));
                best = best.max(nu.norm());
            }
            assert!((q.values()[k] - best).abs() <= 1e-3 + 1e-3 * r, "node {k}");
            assert!(best <= q.values()[k] + 1e-12);
        }
    }

    #[test]
    fn profile_from_q_examples() {
        let s = spec();
        let p = profile_from_q(&RealField::constant(s, 0.0)).unwrap();
        assert!(p.values().iter().all(|&v| v == 1.0));
        let p = profile_from_q(&RealField::constant(s, 1.0 / 3.0)).unwrap();
        assert!(p.values().iter().all(|&v| (v - 2.0).abs() < 1e-15));
        assert!(profile_from_q(&RealField::constant(s, 1.0)).is_err());
        assert!(QProfile::new(RealField::constant(s, 0.5)).is_err());
    }

    proptest! {
        #[test]
        fn q_round_trip(q0 in 1.0..1e6f64) {
            let s = GridSpec::centered(1.0, 16).unwrap();
            let q = RealField::constant(s, (q0 - 1.0) / (q0 + 1.0));
            let back = profile_from_q(&q).unwrap().values()[0];
            prop_assert!((back - q0).abs() <= 1e-12 * q0.max(1.0) * 1e2);
        }

        #[test]
        fn dilatation_bounded_by_majorant(cr in 0.0..0.5f64, ct in 0.0..6.3f64, rho in 0.0..0.4f64, u in 0.0..1.0f64, th in 0.0..6.3f64) {
            let c = C64::from_polar(cr, ct);
            let nu = c + C64::from_polar(rho * u, th);
            let q = c.norm() + rho;
            prop_assume!(q < 0.95);
            let big_q = (1.0 + q) / (1.0 - q);
            prop_assert!(max_dilatation(nu).unwrap() <= big_q * (1.0 + 1e-12));
        }

        #[test]
        fn automorphic_images_of_disks_are_convex(ar in 0.0..0.9f64, at in 0.0..6.3f64, rot in 0.0..6.3f64, cr in 0.0..0.5f64, ct in 0.0..6.3f64, rho in 0.01..0.4f64) {
            let g = DiskAutomorphism::new(C64::from_polar(ar, at), rot).unwrap();
            let c = C64::from_polar(cr, ct);
            prop_assume!(cr + rho < 0.95);
            let pts: Vec<C64> = (0..1000).map(|j| g.apply(c + C64::from_polar(rho, 2.0 * PI * j as f64 / 1000.0))).collect();
            // the image is a disk; recover it and test every pairwise midpoint
            let (mut lo, mut hi) = (pts[0], pts[0]);
            for p in &pts {
                lo = C64::new(lo.re.min(p.re), lo.im.min(p.im));
                hi = C64::new(hi.re.max(p.re), hi.im.max(p.im));
            }
            let center = (lo + hi) / 2.0;
            let radius = pts.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
            for (i, p) in pts.iter().enumerate().step_by(7) {
                for q in pts.iter().skip(i) {
                    prop_assert!(((p + q) / 2.0 - center).norm() <= radius * (1.0 + 1e-6));
                }
            }
        }
    }

    #[test]
    fn circle_average_examples() {
        let s = GridSpec::centered(0.3, 512).unwrap();
        let q = QProfile::from_fn(s, |_| 3.0).unwrap();
        assert_abs_diff_eq!(circle_average(&q, C64::new(0.0, 0.0), 0.1).unwrap(), 3.0, epsilon = 1e-14);
        let q = QProfile::from_fn(s, |z| 1.0 + z.norm_sqr()).unwrap();
        let t = 0.2;
        assert_abs_diff_eq!(circle_average(&q, C64::new(0.0, 0.0), t).unwrap(), 1.0 + t * t, epsilon = 1e-6);
        let q = QProfile::from_fn(s, |z| 1.0 + z.re.abs() + z.re).unwrap();
        let even = circle_average(&q, C64::new(0.0, 0.0), t).unwrap();
        let q_abs = QProfile::from_fn(s, |z| 1.0 + z.re.abs()).unwrap();
        assert_abs_diff_eq!(even, circle_average(&q_abs, C64::new(0.0, 0.0), t).unwrap(), epsilon = 1e-6);
        assert!(circle_average(&q, C64::new(0.0, 0.0), 0.35).is_err());
        assert!(circle_average(&q, C64::new(0.0, 0.0), s.spacing()).is_err());
    }

    #[test]
    fn divergence_on_closed_form_profiles() {
        let d0 = 0.5;
        let tmin = d0 / 1024.0;
        let r = divergence_check_profile(|_| 1.0, d0, tmin).unwrap();
        assert_eq!(r.verdict, DivergenceVerdict::Diverges);
        for &(tau, i) in &r.table {
            assert_abs_diff_eq!(i, (d0 / tau).ln(), epsilon = 1e-12);
        }
        let e = std::f64::consts::E;
        let r = divergence_check_profile(|t| (e * d0 / t).ln(), d0, tmin).unwrap();
        assert_eq!(r.verdict, DivergenceVerdict::Diverges);
        for &(tau, i) in &r.table {
            assert_abs_diff_eq!(i, (e * d0 / tau).ln().ln(), epsilon = 1e-6);
        }
        let r = divergence_check_profile(|t| d0 / t, d0, tmin).unwrap();
        assert_eq!(r.verdict, DivergenceVerdict::Converges);
        for &(tau, i) in &r.table {
            assert_abs_diff_eq!(i, (d0 - tau) / d0, epsilon = 1e-7);
        }
        let r = divergence_check_profile(|_| 2.0, d0, tmin).unwrap();
        let r1 = divergence_check_profile(|_| 1.0, d0, tmin).unwrap();
        for (a, b) in r.table.iter().zip(&r1.table) {
            assert_abs_diff_eq!(a.1, 0.5 * b.1, epsilon = 1e-12);
        }
        assert!(divergence_check_profile(|_| 1.0, d0, d0).is_err());
    }

    #[test]
    fn divergence_rejects_unresolved_scales() {
        let s = GridSpec::centered(1.0, 256).unwrap();
        let q = QProfile::from_fn(s, |_| 1.0).unwrap();
        assert!(divergence_check(&q, C64::new(0.0, 0.0), 0.5, s.spacing()).is_err());
        let r = divergence_check(&q, C64::new(0.0, 0.0), 0.5, 2.0 * s.spacing()).unwrap();
        assert_eq!(r.verdict, DivergenceVerdict::Diverges);
    }

    #[test]
    fn fmo_constant_profile() {
        let s = GridSpec::centered(1.0, 128).unwrap();
        let q = QProfile::from_fn(s, |_| 4.0).unwrap();
        let r = fmo_estimate(&q, C64::new(0.0, 0.0), &default_eps_schedule(&s)).unwrap();
        assert_eq!(r.verdict, FmoVerdict::Consistent);
        assert!(r.table.iter().all(|row| row.deviation.abs() < 1e-12));
        assert!(fmo_estimate(&q, C64::new(0.0, 0.0), &[0.1, 0.05, 0.01, 0.001]).is_err());
        assert!(fmo_estimate(&q, C64::new(0.0, 0.0), &[0.1, 0.2, 0.3, 0.4]).is_err());
    }

    #[test]
    fn fmo_singular_profiles() {
        let s = GridSpec::centered(1.0, 512).unwrap();
        let z0 = C64::new(0.0, 0.0);
        let cap = 2.0 * s.spacing();
        let sched = default_eps_schedule(&s);
        let log = QProfile::radial(s, z0, cap, |r| 1.0 + (1.0 / r).ln().max(0.0)).unwrap();
        let r = fmo_estimate(&log, z0, &sched).unwrap();
        assert_eq!(r.verdict, FmoVerdict::Consistent, "{r:?}");
        // the means blow up while the oscillation stays bounded
        assert!(r.table.last().unwrap().mean > r.table[0].mean + 1.5);
        let inv = QProfile::radial(s, z0, cap, |r| (1.0 / r).max(1.0)).unwrap();
        let r = fmo_estimate(&inv, z0, &sched).unwrap();
        assert_eq!(r.verdict, FmoVerdict::Violated, "{:?}", r);
    }

    #[test]
    fn divergence_on_grid_profiles() {
        let s = GridSpec::centered(0.5, 512).unwrap();
        let z0 = C64::new(0.0, 0.0);
        let h = s.spacing();
        let cap = 2.0 * h;
        let d0 = 0.4;
        let tmin = 2.0 * h;
        let e = std::f64::consts::E;
        let cases = [
            (QProfile::from_fn(s, |_| 1.0).unwrap(), DivergenceVerdict::Diverges),
            (QProfile::radial(s, z0, cap, |t| (e * d0 / t).ln().max(1.0)).unwrap(), DivergenceVerdict::Diverges),
            (QProfile::radial(s, z0, cap, |t| (d0 / t).max(1.0)).unwrap(), DivergenceVerdict::Converges),
        ];
        for (q, want) in cases {
            let r = divergence_check(&q, z0, d0, tmin).unwrap();
            assert_eq!(r.verdict, want, "{:?}", r);
        }
    }

    #[test]
    fn integrability_examples() {
        let s = GridSpec::centered(2.0, 512).unwrap();
        let one = QProfile::from_fn(s, |_| 1.0).unwrap();
        let disk = Region::Disk {
            center: C64::new(0.0, 0.0),
            radius: 1.0,
        };
        assert_abs_diff_eq!(integrability_check(&one, disk).unwrap(), PI, epsilon = 1e-2);
        let two = QProfile::from_fn(s, |_| 2.0).unwrap();
        assert_abs_diff_eq!(integrability_check(&two, disk).unwrap(), 2.0 * PI, epsilon = 2e-2);
        assert_abs_diff_eq!(integrability_check(&one, Region::Full).unwrap(), 16.0, epsilon = 1e-12);
    }

    #[test]
    fn membership_examples() {
        let s = spec();
        let c = SetConstraint::disk(s, C64::new(0.0, 0.0), 0.3, 1.0, 0.1).unwrap();
        let r = membership_ae(&DilatationField::zero(s), &c).unwrap();
        assert_eq!(r.violating_fraction, 0.0);
        assert!(r.verdict);
        let mu = DilatationField::from_fn(s, 1.0, |_| C64::new(0.4, 0.0)).unwrap();
        let r = membership_ae(&mu, &c).unwrap();
        let support = s.nodes().filter(|z| z.norm() <= 1.0).count();
        assert_eq!(r.violating_nodes, support);
        assert!(!r.verdict);
        let boundary = DilatationField::from_fn(s, 1.0, |_| C64::new(0.0, 0.3)).unwrap();
        assert_eq!(membership_ae(&boundary, &c).unwrap().violating_nodes, 0);
        let other = DilatationField::zero(GridSpec::centered(2.0, 32).unwrap());
        assert!(membership_ae(&other, &c).is_err());
    }
}
