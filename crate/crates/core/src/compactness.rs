//! Sampled solution families and the finite-n diagnostics of compactness:
//! equicontinuity moduli, Cauchy chains and limit checks.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admissibility::{fit_slope, membership_ae, MembershipReport, SetConstraint};
use crate::beltrami::{solve_principal, SolutionReport, SolverConfig};
use crate::dirichlet::{solve_dirichlet_with, BoundaryData, DirichletSolution, DiskSolverOptions};
use crate::error::{Error, Result};
use crate::field::{chordal_distance, ComplexField, DilatationField, GridSpec, MapField};
use crate::report::SCHEMA;

pub use crate::beltrami::{inverse_dilatation_check, inverse_energy_check};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SamplingMode {
    /// `mu = c + rho e^{i theta}` with a smooth pseudo-random phase.
    BoundaryExtremal,
    /// `mu = c + rho sqrt(s) e^{i theta}` with smooth pseudo-random `s, theta`.
    UniformInDisk,
    /// `mu = c + rho e^{i index frequency |z|}`.
    OscillatingPhase { frequency: f64 },
}

/// Reproducible family of dilatations drawn from a set constraint.
#[derive(Clone, Debug)]
pub struct FamilySampler {
    pub constraint: SetConstraint,
    pub mode: SamplingMode,
    pub seed: u64,
    pub count: usize,
    /// Lattice spacing of the value noise behind the random fields.
    pub correlation_length: f64,
}

impl FamilySampler {
    pub fn new(constraint: SetConstraint, mode: SamplingMode, seed: u64, count: usize) -> Self {
        FamilySampler {
            constraint,
            mode,
            seed,
            count,
            correlation_length: 0.25,
        }
    }

    pub fn sample(&self, index: usize) -> Result<DilatationField> {
        if index >= self.count {
            return Err(Error::precondition(format!("sample index {index} >= count {}", self.count)));
        }
        let spec = *self.constraint.spec();
        let centers = self.constraint.center().values();
        let radii = self.constraint.radius().values();
        let phase = ValueNoise::new(self.seed, index as u64, 0, &spec, self.correlation_length);
        let modulus = ValueNoise::new(self.seed, index as u64, 1, &spec, self.correlation_length);
        let values = spec
            .nodes()
            .enumerate()
            .map(|(k, z)| {
                let (c, rho) = (centers[k], radii[k]);
                if rho == 0.0 {
                    return c;
                }
                match self.mode {
                    SamplingMode::BoundaryExtremal => c + C64::from_polar(rho, 2.0 * TAU * phase.eval(z)),
                    SamplingMode::UniformInDisk => {
                        c + C64::from_polar(rho * modulus.eval(z).sqrt(), 2.0 * TAU * phase.eval(z))
                    }
                    SamplingMode::OscillatingPhase { frequency } => {
                        c + C64::from_polar(rho, index as f64 * frequency * (z - spec.center()).norm())
                    }
                }
            })
            .collect();
        let field = ComplexField::new(spec, values)?;
        if field.values().iter().all(|v| v.norm_sqr() == 0.0) {
            return Ok(DilatationField::zero(spec));
        }
        DilatationField::new(field, self.constraint.support_radius())
    }
}

/// Smooth value noise in `[0, 1)` on a square lattice; lattice values come
/// from a ChaCha stream keyed by `(seed, index, channel)` at a word position
/// fixed by the lattice point, so they do not depend on evaluation order.
struct ValueNoise {
    origin: C64,
    spacing: f64,
    side: usize,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(seed: u64, index: u64, channel: u64, spec: &GridSpec, spacing: f64) -> Self {
        let side = (2.0 * spec.half_width() / spacing).ceil() as usize + 2;
        let origin = spec.center() - C64::new(spec.half_width(), spec.half_width());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index * 4 + channel);
        let mut values = Vec::with_capacity(side * side);
        for i in 0..side {
            for j in 0..side {
                // two 32-bit words per lattice point
                rng.set_word_pos(2 * (i * side + j) as u128);
                values.push((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64);
            }
        }
        ValueNoise {
            origin,
            spacing,
            side,
            values,
        }
    }

    fn eval(&self, z: C64) -> f64 {
        let s = (z - self.origin) / self.spacing;
        let (fx, fy) = (s.re.clamp(0.0, (self.side - 1) as f64), s.im.clamp(0.0, (self.side - 1) as f64));
        let (i, j) = ((fy as usize).min(self.side - 2), (fx as usize).min(self.side - 2));
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (ty, tx) = (smooth(fy - i as f64), smooth(fx - j as f64));
        let v = |a: usize, b: usize| self.values[a * self.side + b];
        let top = v(i, j) * (1.0 - tx) + v(i, j + 1) * tx;
        let bottom = v(i + 1, j) * (1.0 - tx) + v(i + 1, j + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// Boundary-value problem solved for each sample.
#[derive(Clone, Debug)]
pub enum Problem {
    Plane,
    Dirichlet { phi: BoundaryData, z0: C64 },
}

#[derive(Clone, Debug)]
pub enum Solved {
    Plane { f: MapField, report: SolutionReport },
    Dirichlet(Box<DirichletSolution>),
}

impl Solved {
    pub fn map(&self) -> &MapField {
        match self {
            Solved::Plane { f, .. } => f,
            Solved::Dirichlet(s) => &s.f,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Member {
    pub index: usize,
    pub mu: DilatationField,
    pub solution: std::result::Result<Solved, String>,
}

#[derive(Clone, Debug)]
pub struct SequenceRun {
    pub members: Vec<Member>,
    pub failures: usize,
}

impl SequenceRun {
    /// Successful members in index order.
    pub fn solved(&self) -> impl Iterator<Item = (&Member, &Solved)> {
        self.members
            .iter()
            .filter_map(|m| m.solution.as_ref().ok().map(|s| (m, s)))
    }
}

/// Solves every sample of the family in parallel; results keep index order.
pub fn run_sequence(sampler: &FamilySampler, cfg: &SolverConfig, problem: &Problem) -> Result<SequenceRun> {
    if sampler.count == 0 {
        return Err(Error::Empty("solution sequence"));
    }
    let members: Vec<Member> = (0..sampler.count)
        .into_par_iter()
        .map(|index| -> Result<Member> {
            let mu = sampler.sample(index)?;
            let solution = solve_one(&mu, cfg, problem).map_err(|e| e.to_string());
            Ok(Member { index, mu, solution })
        })
        .collect::<Result<_>>()?;
    let failures = members.iter().filter(|m| m.solution.is_err()).count();
    if failures * 5 > sampler.count {
        return Err(Error::precondition(format!(
            "{failures} of {} solves failed (budget 20%)",
            sampler.count
        )));
    }
    Ok(SequenceRun { members, failures })
}

fn solve_one(mu: &DilatationField, cfg: &SolverConfig, problem: &Problem) -> Result<Solved> {
    match problem {
        Problem::Plane => {
            let (f, report) = solve_principal(mu, cfg)?;
            Ok(Solved::Plane { f, report })
        }
        Problem::Dirichlet { phi, z0 } => {
            let opts = DiskSolverOptions {
                resolution: None,
                residual_tol: cfg.residual_tol,
                max_iterations: cfg.max_iterations,
            };
            Ok(Solved::Dirichlet(Box::new(solve_dirichlet_with(mu, phi, *z0, &opts)?)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Compact {
    pub center: C64,
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquicontinuityReport {
    pub compact: Compact,
    pub deltas: Vec<f64>,
    /// `omega(delta)` per map, in input order.
    pub per_map: Vec<Vec<f64>>,
    pub family: Vec<f64>,
    /// Linear extrapolation of the family modulus to `delta = 0`.
    pub omega_zero: f64,
    /// Log-log slope of the family modulus over the delta grid.
    #[serde(serialize_with = "crate::report::finite_or_null")]
    pub holder_exponent: f64,
}

/// `omega(delta) = max chordal(f(z), f(z'))` over node pairs of the compact
/// with `|z - z'| <= delta`, per map and over the family.
pub fn equicontinuity_modulus(maps: &[&MapField], compact: Compact, deltas: &[f64]) -> Result<EquicontinuityReport> {
    let first = maps.first().ok_or(Error::Empty("solution list"))?;
    if deltas.is_empty() {
        return Err(Error::Empty("delta grid"));
    }
    if deltas.windows(2).any(|w| !(w[1] > w[0])) || !(deltas[0] > 0.0) {
        return Err(Error::precondition("delta grid must be positive and increasing"));
    }
    let spec = *first.spec();
    for m in maps {
        spec.ensure_same(m.spec())?;
    }
    if spec.inset(compact.center) < compact.radius {
        return Err(Error::precondition("compact leaves the solution grid"));
    }
    let h = spec.spacing();
    let n = spec.n();
    let dmax = *deltas.last().unwrap();
    let reach = (dmax / h).floor() as isize;
    let mut offsets: Vec<(isize, isize, f64)> = Vec::new();
    for dr in 0..=reach {
        for dc in -reach..=reach {
            if dr == 0 && dc <= 0 {
                continue;
            }
            let d = ((dr * dr + dc * dc) as f64).sqrt() * h;
            if d <= dmax * (1.0 + 1e-12) {
                offsets.push((dr, dc, d));
            }
        }
    }
    let inside: Vec<bool> = spec.nodes().map(|z| (z - compact.center).norm() <= compact.radius).collect();
    let per_map: Vec<Vec<f64>> = maps
        .par_iter()
        .map(|m| {
            let v = m.values();
            let per_offset: Vec<f64> = offsets
                .iter()
                .map(|&(dr, dc, _)| {
                    let mut best = 0.0f64;
                    for r in 0..n as isize - dr {
                        for c in 0..n as isize {
                            let c2 = c + dc;
                            if c2 < 0 || c2 >= n as isize {
                                continue;
                            }
                            let (a, b) = ((r * n as isize + c) as usize, ((r + dr) * n as isize + c2) as usize);
                            if inside[a] && inside[b] {
                                best = best.max(chordal_distance(v[a].into(), v[b].into()));
                            }
                        }
                    }
                    best
                })
                .collect();
            deltas
                .iter()
                .map(|&delta| {
                    offsets
                        .iter()
                        .zip(&per_offset)
                        .filter(|((_, _, d), _)| *d <= delta * (1.0 + 1e-12))
                        .map(|(_, &w)| w)
                        .fold(0.0, f64::max)
                })
                .collect()
        })
        .collect();
    let family: Vec<f64> = (0..deltas.len())
        .map(|i| per_map.iter().map(|row| row[i]).fold(0.0, f64::max))
        .collect();
    let omega_zero = if deltas.len() >= 2 {
        let (d1, d2, w1, w2) = (deltas[0], deltas[1], family[0], family[1]);
        (w1 - (w2 - w1) * d1 / (d2 - d1)).max(0.0)
    } else {
        family[0]
    };
    let pts: Vec<(f64, f64)> = deltas
        .iter()
        .zip(&family)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&d, &w)| (d.ln(), w.ln()))
        .collect();
    let holder_exponent = if pts.len() >= 2 { fit_slope(&pts) } else { f64::NAN };
    Ok(EquicontinuityReport {
        compact,
        deltas: deltas.to_vec(),
        per_map,
        family,
        omega_zero,
        holder_exponent,
    })
}

/// Distances at or below this count as identical maps.
pub const PLATEAU: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    /// Pairwise sup-chordal distances on the compact.
    pub distances: Vec<Vec<f64>>,
    /// Single-linkage cluster label of each map at the plateau scale.
    pub clusters: Vec<usize>,
    pub chain: Vec<usize>,
    pub chain_distances: Vec<f64>,
    pub plateau_reached: bool,
    /// A chain with at least one halving step (or a plateau) was found.
    pub converged: bool,
    pub limit_index: Option<usize>,
}

/// Pairwise distances, clusters and the longest greedy chain whose successive
/// distances at least halve (or stay on the plateau).
pub fn uniform_cauchy_check(maps: &[&MapField], compact: Compact) -> Result<ConvergenceReport> {
    let n_maps = maps.len();
    if n_maps < 3 {
        return Err(Error::precondition("need at least three solutions"));
    }
    let spec = *maps[0].spec();
    for m in maps {
        spec.ensure_same(m.spec())?;
    }
    let nodes: Vec<usize> = spec
        .nodes()
        .enumerate()
        .filter(|(_, z)| (z - compact.center).norm() <= compact.radius)
        .map(|(k, _)| k)
        .collect();
    if nodes.is_empty() {
        return Err(Error::Empty("compact contains no nodes"));
    }
    let pairs: Vec<(usize, usize)> = (0..n_maps).flat_map(|i| (i + 1..n_maps).map(move |j| (i, j))).collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (maps[i].values(), maps[j].values());
            nodes
                .iter()
                .map(|&k| chordal_distance(a[k].into(), b[k].into()))
                .fold(0.0, f64::max)
        })
        .collect();
    let mut distances = vec![vec![0.0; n_maps]; n_maps];
    for (&(i, j), &d) in pairs.iter().zip(&dists) {
        distances[i][j] = d;
        distances[j][i] = d;
    }

    let mut clusters: Vec<usize> = (0..n_maps).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for &(i, j) in &pairs {
        if distances[i][j] <= PLATEAU {
            let (a, b) = (root(&mut clusters, i), root(&mut clusters, j));
            clusters[a.max(b)] = a.min(b);
        }
    }
    let mut labels = Vec::with_capacity(n_maps);
    let mut seen: Vec<usize> = Vec::new();
    for i in 0..n_maps {
        let r = root(&mut clusters, i);
        let label = seen.iter().position(|&s| s == r).unwrap_or_else(|| {
            seen.push(r);
            seen.len() - 1
        });
        labels.push(label);
    }

    let mut best: (Vec<usize>, Vec<f64>) = (vec![0], Vec::new());
    for start in 0..n_maps {
        let mut chain = vec![start];
        let mut steps = Vec::new();
        let mut bound = f64::INFINITY;
        let mut cur = start;
        loop {
            let next = (cur + 1..n_maps)
                .filter(|&j| distances[cur][j] <= bound)
                .min_by(|&a, &b| distances[cur][a].total_cmp(&distances[cur][b]).then(a.cmp(&b)));
            let Some(j) = next else { break };
            let d = distances[cur][j];
            chain.push(j);
            steps.push(d);
            bound = if d <= PLATEAU { PLATEAU } else { 0.5 * d };
            cur = j;
        }
        if chain.len() > best.0.len() {
            best = (chain, steps);
        }
    }
    let (chain, chain_distances) = best;
    let plateau_reached = chain_distances.last().is_some_and(|&d| d <= PLATEAU);
    let converged = chain.len() >= 3 || plateau_reached;
    let limit_index = converged.then(|| *chain.last().unwrap());
    Ok(ConvergenceReport {
        distances,
        clusters: labels,
        chain,
        chain_distances,
        plateau_reached,
        converged,
        limit_index,
    })
}

/// Membership of a limit dilatation in `M`; disks are invariantly convex, so
/// the hull step is the identity.
pub fn limit_membership(limit_mu: &DilatationField, constraint: &SetConstraint) -> Result<MembershipReport> {
    membership_ae(limit_mu, constraint)
}

#[derive(Clone, Debug, Serialize)]
pub struct HydrodynamicLimitReport {
    pub limit_tail_sup: f64,
    pub max_member_tail_sup: f64,
    pub verdict: bool,
}

/// Tail of the limit outside `2 r_supp` against twice the worst chain member.
pub fn hydrodynamic_limit_check(chain: &[&MapField], limit: &MapField, r_supp: f64) -> HydrodynamicLimitReport {
    let limit_tail_sup = limit.tail_residual(2.0 * r_supp);
    let max_member_tail_sup = chain.iter().map(|m| m.tail_residual(2.0 * r_supp)).fold(0.0, f64::max);
    HydrodynamicLimitReport {
        limit_tail_sup,
        max_member_tail_sup,
        verdict: limit_tail_sup <= 2.0 * max_member_tail_sup + 1e-12,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryLimitReport {
    pub limit_residual: f64,
    pub max_member_residual: f64,
    pub verdict: bool,
}

pub fn dirichlet_limit_check(chain: &[&DirichletSolution], limit: &DirichletSolution) -> BoundaryLimitReport {
    let limit_residual = limit.report.boundary_residual;
    let max_member_residual = chain.iter().map(|s| s.report.boundary_residual).fold(0.0, f64::max);
    BoundaryLimitReport {
        limit_residual,
        max_member_residual,
        verdict: limit_residual <= 2.0 * max_member_residual + 1e-12,
    }
}

/// Dirichlet variant of a compactness experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirichletSetup {
    pub phi: Vec<f64>,
    pub z0: C64,
}

/// Everything needed to reproduce a compactness experiment. Missing keys take
/// their default values when deserialized.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid_n: usize,
    pub half_width: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub mode: SamplingMode,
    pub constraint_center: C64,
    pub constraint_radius: f64,
    pub support_radius: f64,
    /// Nested prefixes of the sample sequence to report on; the largest is
    /// the number of solves.
    pub sample_counts: Vec<usize>,
    pub compact: Compact,
    pub deltas: Vec<f64>,
    /// Delta at which the family modulus is compared across sample counts.
    pub probe_delta: f64,
    pub dirichlet: Option<DirichletSetup>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            grid_n: 256,
            half_width: 4.0,
            tol: 1e-10,
            max_iterations: 1000,
            seed: 1,
            mode: SamplingMode::BoundaryExtremal,
            constraint_center: C64::new(0.0, 0.0),
            constraint_radius: 0.3,
            support_radius: 1.0,
            sample_counts: vec![8, 32],
            compact: Compact {
                center: C64::new(0.0, 0.0),
                radius: 2.0,
            },
            deltas: vec![0.05, 0.1, 0.2, 0.4],
            probe_delta: 0.05,
            dirichlet: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MemberSummary {
    pub index: usize,
    pub k_max: f64,
    pub converged: bool,
    pub iterations: Option<usize>,
    pub koebe_verdict: Option<bool>,
    pub tail_residual: Option<f64>,
    pub boundary_residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitChecks {
    pub membership: MembershipReport,
    pub hydrodynamic: Option<HydrodynamicLimitReport>,
    pub boundary: Option<BoundaryLimitReport>,
    pub verdict: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompactnessReport {
    pub schema: &'static str,
    pub kind: &'static str,
    pub config: ExperimentConfig,
    pub members: Vec<MemberSummary>,
    pub failures: usize,
    /// One equicontinuity report per entry of `sample_counts`.
    pub equicontinuity: Vec<(usize, EquicontinuityReport)>,
    /// Family modulus at `probe_delta` for each sample count.
    pub probe_omega: Vec<(usize, f64)>,
    /// `|omega_last - omega_first| / omega_first` at the probe delta.
    pub probe_relative_change: f64,
    pub equicontinuity_stable: bool,
    pub convergence: ConvergenceReport,
    pub limit: Option<LimitChecks>,
    pub verdict: bool,
}

/// Samples, solves and reports on one family.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<CompactnessReport> {
    let total = *cfg
        .sample_counts
        .iter()
        .max()
        .ok_or(Error::Empty("sample counts"))?;
    if !cfg.deltas.iter().any(|&d| (d - cfg.probe_delta).abs() <= 1e-12 * d) {
        return Err(Error::precondition("probe delta must belong to the delta grid"));
    }
    let spec = GridSpec::centered(cfg.half_width, cfg.grid_n)?;
    let constraint = SetConstraint::disk(spec, cfg.constraint_center, cfg.constraint_radius, cfg.support_radius, 1e-3)?;
    let sampler = FamilySampler::new(constraint.clone(), cfg.mode, cfg.seed, total);
    let solver = SolverConfig::for_grid(spec)?
        .with_tolerance(cfg.tol)
        .with_max_iterations(cfg.max_iterations);
    let problem = match &cfg.dirichlet {
        None => Problem::Plane,
        Some(d) => Problem::Dirichlet {
            phi: BoundaryData::new(d.phi.clone())?,
            z0: d.z0,
        },
    };
    let run = run_sequence(&sampler, &solver, &problem)?;

    let members = run
        .members
        .iter()
        .map(|m| {
            let mut s = MemberSummary {
                index: m.index,
                k_max: m.mu.k_max(),
                converged: m.solution.is_ok(),
                iterations: None,
                koebe_verdict: None,
                tail_residual: None,
                boundary_residual: None,
                error: None,
            };
            match &m.solution {
                Ok(Solved::Plane { report, .. }) => {
                    s.iterations = Some(report.iterations_used);
                    s.koebe_verdict = Some(report.koebe_verdict);
                    s.tail_residual = Some(report.tail_residual);
                }
                Ok(Solved::Dirichlet(d)) => s.boundary_residual = Some(d.report.boundary_residual),
                Err(e) => s.error = Some(e.clone()),
            }
            s
        })
        .collect();

    let mut sorted = cfg.sample_counts.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let mut equicontinuity = Vec::new();
    for &count in &sorted {
        let maps: Vec<&MapField> = run
            .solved()
            .filter(|(m, _)| m.index < count)
            .map(|(_, s)| s.map())
            .collect();
        equicontinuity.push((count, equicontinuity_modulus(&maps, cfg.compact, &cfg.deltas)?));
    }
    let probe = cfg
        .deltas
        .iter()
        .position(|&d| (d - cfg.probe_delta).abs() <= 1e-12 * d)
        .unwrap();
    let probe_omega: Vec<(usize, f64)> = equicontinuity.iter().map(|(c, r)| (*c, r.family[probe])).collect();
    let (w_first, w_last) = (probe_omega[0].1, probe_omega[probe_omega.len() - 1].1);
    let probe_relative_change = if w_first > 0.0 {
        (w_last - w_first).abs() / w_first
    } else if w_last == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let equicontinuity_stable = probe_relative_change <= 0.1;

    let solved: Vec<(&Member, &Solved)> = run.solved().collect();
    let maps: Vec<&MapField> = solved.iter().map(|(_, s)| s.map()).collect();
    let convergence = uniform_cauchy_check(&maps, cfg.compact)?;
    let limit = match convergence.limit_index {
        None => None,
        Some(li) => {
            let (member, sol) = solved[li];
            let membership = limit_membership(&member.mu, &constraint)?;
            let chain_maps: Vec<&MapField> = convergence.chain.iter().map(|&i| maps[i]).collect();
            let (hydrodynamic, boundary) = match sol {
                Solved::Plane { f, .. } => (Some(hydrodynamic_limit_check(&chain_maps, f, cfg.support_radius)), None),
                Solved::Dirichlet(d) => {
                    let chain: Vec<&DirichletSolution> = convergence
                        .chain
                        .iter()
                        .filter_map(|&i| match solved[i].1 {
                            Solved::Dirichlet(s) => Some(&**s),
                            Solved::Plane { .. } => None,
                        })
                        .collect();
                    (None, Some(dirichlet_limit_check(&chain, d)))
                }
            };
            let verdict = membership.verdict
                && hydrodynamic.as_ref().is_none_or(|h| h.verdict)
                && boundary.as_ref().is_none_or(|b| b.verdict);
            Some(LimitChecks {
                membership,
                hydrodynamic,
                boundary,
                verdict,
            })
        }
    };
    let verdict = equicontinuity_stable && limit.as_ref().is_none_or(|l| l.verdict);
    Ok(CompactnessReport {
        schema: SCHEMA,
        kind: "compactness",
        config: cfg.clone(),
        members,
        failures: run.failures,
        equicontinuity,
        probe_omega,
        probe_relative_change,
        equicontinuity_stable,
        convergence,
        limit,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::MapField;

    fn disk_constraint(spec: GridSpec, rho: f64) -> SetConstraint {
        SetConstraint::disk(spec, C64::new(0.0, 0.0), rho, 1.0, 0.01).unwrap()
    }

    #[test]
    fn sampler_examples() {
        let spec = GridSpec::centered(2.0, 64).unwrap();
        let c = C64::new(0.1, -0.2);
        let degenerate = SetConstraint::disk(spec, c, 0.0, 1.0, 0.01).unwrap();
        let s = FamilySampler::new(degenerate, SamplingMode::UniformInDisk, 3, 4);
        for i in 0..4 {
            let mu = s.sample(i).unwrap();
            for (z, v) in spec.nodes().zip(mu.values()) {
                assert_eq!(*v, if z.norm() <= 1.0 { c } else { C64::new(0.0, 0.0) });
            }
        }
        assert!(s.sample(4).is_err());

        let s = FamilySampler::new(disk_constraint(spec, 0.3), SamplingMode::BoundaryExtremal, 9, 5);
        let mu = s.sample(2).unwrap();
        for (z, v) in spec.nodes().zip(mu.values()) {
            if z.norm() <= 1.0 {
                assert!((v.norm() - 0.3).abs() < 1e-15);
            }
        }
        assert_eq!(mu.values(), s.sample(2).unwrap().values());
        assert_ne!(mu.values(), s.sample(3).unwrap().values());

        for mode in [
            SamplingMode::BoundaryExtremal,
            SamplingMode::UniformInDisk,
            SamplingMode::OscillatingPhase { frequency: 3.0 },
        ] {
            let s = FamilySampler::new(disk_constraint(spec, 0.6), mode, 1, 6);
            for i in 0..6 {
                let m = membership_ae(&s.sample(i).unwrap(), &s.constraint).unwrap();
                assert_eq!(m.violating_nodes, 0);
            }
        }
    }

    #[test]
    fn phase_field_is_order_independent() {
        let spec = GridSpec::centered(1.0, 32).unwrap();
        let a = ValueNoise::new(5, 7, 0, &spec, 0.25);
        let b = ValueNoise::new(5, 7, 0, &spec, 0.25);
        let c = ValueNoise::new(5, 8, 0, &spec, 0.25);
        let z = C64::new(0.123, -0.456);
        assert_eq!(a.eval(z), b.eval(z));
        assert_ne!(a.eval(z), c.eval(z));
        assert!(a.values.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn zero_constraint_gives_identities() {
        let spec = GridSpec::centered(2.0, 64).unwrap();
        let s = FamilySampler::new(disk_constraint(spec, 0.0), SamplingMode::BoundaryExtremal, 1, 4);
        let run = run_sequence(&s, &SolverConfig::for_grid(spec).unwrap(), &Problem::Plane).unwrap();
        assert_eq!(run.failures, 0);
        for (_, sol) in run.solved() {
            for (z, w) in spec.nodes().zip(sol.map().values()) {
                assert!((z - w).norm() < 1e-12);
            }
        }
        let phi = BoundaryData::from_fn(128, |t| t.cos()).unwrap();
        let dspec = GridSpec::centered(1.125, 64).unwrap();
        let s = FamilySampler::new(
            SetConstraint::disk(dspec, C64::new(0.0, 0.0), 0.0, 0.8, 0.01).unwrap(),
            SamplingMode::BoundaryExtremal,
            1,
            3,
        );
        let problem = Problem::Dirichlet {
            phi,
            z0: C64::new(0.0, 0.0),
        };
        let run = run_sequence(&s, &SolverConfig::for_grid(dspec).unwrap(), &problem).unwrap();
        for (_, sol) in run.solved() {
            for (z, w) in dspec.nodes().zip(sol.map().values()) {
                if z.norm() < 1.0 {
                    assert!((z - w).norm() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn boundary_extremal_family_solves_with_koebe() {
        let spec = GridSpec::centered(4.0, 128).unwrap();
        let s = FamilySampler::new(disk_constraint(spec, 0.6), SamplingMode::BoundaryExtremal, 11, 8);
        let run = run_sequence(&s, &SolverConfig::for_grid(spec).unwrap(), &Problem::Plane).unwrap();
        assert_eq!(run.failures, 0);
        for (_, sol) in run.solved() {
            let Solved::Plane { report, .. } = sol else { unreachable!() };
            assert!(report.koebe_verdict);
        }
    }

    #[test]
    fn too_many_failures_is_an_error() {
        let spec = GridSpec::centered(2.0, 32).unwrap();
        let s = FamilySampler::new(disk_constraint(spec, 0.9), SamplingMode::BoundaryExtremal, 1, 3);
        let cfg = SolverConfig::for_grid(spec).unwrap().with_max_iterations(2);
        assert!(run_sequence(&s, &cfg, &Problem::Plane).is_err());
    }

    #[test]
    fn identity_and_stretch_moduli() {
        let spec = GridSpec::centered(2.0, 128).unwrap();
        let id = MapField::identity(spec);
        let compact = Compact {
            center: C64::new(0.0, 0.0),
            radius: 1.0,
        };
        let deltas = [0.05, 0.1, 0.2, 0.4];
        let rep = equicontinuity_modulus(&[&id], compact, &deltas).unwrap();
        for (w, d) in rep.family.iter().zip(&deltas) {
            assert!(*w <= *d + 1e-12);
        }
        assert!(rep.family.windows(2).all(|w| w[0] <= w[1]));

        let stretch = MapField::from_fn(spec, |z| if z.norm() < 1.0 { z * z.norm() } else { z }).unwrap();
        let both = equicontinuity_modulus(&[&id, &stretch], compact, &deltas).unwrap();
        let h = spec.spacing();
        for (w, d) in both.family.iter().zip(&deltas) {
            assert!(*w <= 2.0 * d.sqrt() + 3.0 * h);
        }
        for (a, b) in rep.family.iter().zip(&both.family) {
            assert!(b >= a);
        }
        assert!(equicontinuity_modulus(&[], compact, &deltas).is_err());
    }

    #[test]
    fn cauchy_chains() {
        let spec = GridSpec::centered(2.0, 32).unwrap();
        let compact = Compact {
            center: C64::new(0.0, 0.0),
            radius: 1.0,
        };
        let same: Vec<MapField> = (0..4).map(|_| MapField::identity(spec)).collect();
        let refs: Vec<&MapField> = same.iter().collect();
        let rep = uniform_cauchy_check(&refs, compact).unwrap();
        assert_eq!(rep.chain, vec![0, 1, 2, 3]);
        assert!(rep.plateau_reached && rep.converged);
        assert!(rep.clusters.iter().all(|&c| c == 0));

        let a = MapField::from_fn(spec, |z| z + 0.5).unwrap();
        let b = MapField::identity(spec);
        let alt: Vec<MapField> = (0..6).map(|i| if i % 2 == 0 { a.clone() } else { b.clone() }).collect();
        let refs: Vec<&MapField> = alt.iter().collect();
        let rep = uniform_cauchy_check(&refs, compact).unwrap();
        assert_eq!(rep.clusters, vec![0, 1, 0, 1, 0, 1]);
        let cluster = rep.clusters[rep.chain[0]];
        assert!(rep.chain.iter().all(|&i| rep.clusters[i] == cluster));
        assert!(rep.plateau_reached);
        for i in 0..6 {
            assert_eq!(rep.distances[i][i], 0.0);
            for j in 0..6 {
                assert_eq!(rep.distances[i][j], rep.distances[j][i]);
            }
        }

        let seq: Vec<MapField> = (1..=8)
            .map(|n| MapField::from_fn(spec, |z| z * (1.0 + 3.0f64.powi(-n))).unwrap())
            .collect();
        let refs: Vec<&MapField> = seq.iter().collect();
        let rep = uniform_cauchy_check(&refs, compact).unwrap();
        assert!(rep.converged && rep.chain.len() >= 3);
        assert!(rep.chain_distances.windows(2).all(|w| w[1] <= 0.5 * w[0]));
        assert!(uniform_cauchy_check(&refs[..2], compact).is_err());
    }

    #[test]
    fn limit_checks() {
        let spec = GridSpec::centered(2.0, 64).unwrap();
        let k = disk_constraint(spec, 0.3);
        assert!(limit_membership(&DilatationField::zero(spec), &k).unwrap().verdict);
        let out = DilatationField::from_fn(spec, 1.0, |_| C64::new(0.35, 0.0)).unwrap();
        let m = limit_membership(&out, &k).unwrap();
        let support = out.values().iter().filter(|v| v.norm() > 0.0).count() as f64 / spec.len() as f64;
        assert!(!m.verdict && (m.violating_fraction - support).abs() < 1e-12);

        let id = MapField::identity(spec);
        let r = hydrodynamic_limit_check(&[&id, &id], &id, 0.5);
        assert!(r.verdict && r.limit_tail_sup == 0.0);
    }

    #[test]
    fn identity_energy() {
        let spec = GridSpec::centered(2.0, 256).unwrap();
        let e = inverse_energy_check(&MapField::identity(spec), &DilatationField::zero(spec), 1.0).unwrap();
        assert!((e.lhs - std::f64::consts::PI).abs() < 1e-3, "lhs {}", e.lhs);
        assert!((e.image_radius - 1.0).abs() < spec.spacing());
        let big = e.image_radius + 1.0;
        assert!((e.rhs - std::f64::consts::PI * big * big).abs() < 1e-2, "rhs {}", e.rhs);
        assert!(e.verdict);
    }
}
