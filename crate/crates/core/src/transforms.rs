//! Discrete Cauchy transform `P[h] = -(1/pi) ∬ h(ζ)/(ζ - z) dm(ζ)` and Beurling
//! transform `S[h] = -(1/pi) p.v.∬ h(ζ)/(ζ - z)^2 dm(ζ)` on zero-padded grids.
//!
//! `P` is an aperiodic convolution with the exact cell integrals of the
//! Cauchy kernel, so it is exact for piecewise-constant data. `S` is the
//! Fourier multiplier `conj(ξ)/ξ` on the padded torus, which keeps the
//! discrete operator an L2 contraction.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{ComplexField, GridSpec};

/// Reusable FFT plan and precomputed kernel spectra for one grid.
#[derive(Clone)]
pub struct TransformPlan {
    spec: GridSpec,
    pad_factor: usize,
    m: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    cauchy_hat: Arc<Vec<C64>>,
    beurling_hat: Arc<Vec<C64>>,
}

impl fmt::Debug for TransformPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformPlan")
            .field("spec", &self.spec)
            .field("pad_factor", &self.pad_factor)
            .finish()
    }
}

impl TransformPlan {
    pub const DEFAULT_PAD: usize = 2;

    pub fn new(spec: GridSpec) -> Result<Self> {
        Self::with_padding(spec, Self::DEFAULT_PAD)
    }

    pub fn with_padding(spec: GridSpec, pad_factor: usize) -> Result<Self> {
        if pad_factor < 2 {
            return Err(Error::precondition(format!(
                "pad factor must be at least 2, got {pad_factor}"
            )));
        }
        let m = pad_factor * spec.n();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let ifft = planner.plan_fft_inverse(m);
        let h = spec.spacing();
        let half = (m / 2) as i64;
        let offset = |q: usize| {
            let q = q as i64;
            if q < half {
                q
            } else {
                q - m as i64
            }
        };

        let mut kernel = vec![C64::new(0.0, 0.0); m * m];
        for a in 0..m {
            for b in 0..m {
                let (da, db) = (offset(a), offset(b));
                if da == -half || db == -half {
                    continue;
                }
                kernel[a * m + b] = cauchy_cell_kernel(C64::new(db as f64 * h, da as f64 * h), h);
            }
        }
        let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(&mut kernel, &mut scratch);
        let mut cauchy_hat = transpose(&kernel, m);
        fft.process_with_scratch(&mut cauchy_hat, &mut scratch);

        // Multiplier laid out like `cauchy_hat`: row index = x frequency.
        let mut beurling_hat = vec![C64::new(0.0, 0.0); m * m];
        let dk = 2.0 * PI / (m as f64 * h);
        for bx in 0..m {
            for ay in 0..m {
                let (kx, ky) = (offset(bx), offset(ay));
                if kx == -half || ky == -half || (kx == 0 && ky == 0) {
                    continue;
                }
                let xi = C64::new(kx as f64 * dk, ky as f64 * dk);
                beurling_hat[bx * m + ay] = xi.conj() / xi;
            }
        }

        Ok(TransformPlan {
            spec,
            pad_factor,
            m,
            fft,
            ifft,
            cauchy_hat: Arc::new(cauchy_hat),
            beurling_hat: Arc::new(beurling_hat),
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn pad_factor(&self) -> usize {
        self.pad_factor
    }

    fn check_input(&self, h: &ComplexField) -> Result<()> {
        self.spec.ensure_same(h.spec())?;
        let n = self.spec.n();
        let v = h.values();
        let touches = (0..n).any(|k| {
            [0, 1, n - 2, n - 1].iter().any(|&e| {
                v[e * n + k].norm_sqr() != 0.0 || v[k * n + e].norm_sqr() != 0.0
            })
        });
        if touches {
            return Err(Error::precondition(
                "transform input must vanish within two cells of the grid boundary",
            ));
        }
        Ok(())
    }

    /// Cauchy transform `P[h]`; `dbar P[h] = h`.
    pub fn cauchy(&self, h: &ComplexField) -> Result<ComplexField> {
        self.check_input(h)?;
        let values = self.convolve(h.values(), 0..self.spec.n(), &self.cauchy_hat);
        Ok(ComplexField::from_parts_unchecked(self.spec, values))
    }

    /// Beurling transform `S[h]`; `S[h] = d P[h]`.
    pub fn beurling(&self, h: &ComplexField) -> Result<ComplexField> {
        self.check_input(h)?;
        let values = self.convolve(h.values(), 0..self.spec.n(), &self.beurling_hat);
        Ok(ComplexField::from_parts_unchecked(self.spec, values))
    }

    /// `S[values]` on the rows in `out_rows` only (zero elsewhere). Inputs are
    /// assumed to satisfy the support precondition.
    pub(crate) fn beurling_rows(&self, values: &[C64], out_rows: Range<usize>) -> Vec<C64> {
        self.convolve(values, out_rows, &self.beurling_hat)
    }

    pub(crate) fn cauchy_unchecked(&self, values: &[C64]) -> Vec<C64> {
        self.convolve(values, 0..self.spec.n(), &self.cauchy_hat)
    }

    fn convolve(&self, input: &[C64], out_rows: Range<usize>, spectrum: &[C64]) -> Vec<C64> {
        let n = self.spec.n();
        let m = self.m;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        let Some(in_rows) = nonzero_rows(input, n) else {
            return out;
        };
        let mut buf = vec![C64::new(0.0, 0.0); m * m];
        for r in in_rows.clone() {
            buf[r * m..r * m + n].copy_from_slice(&input[r * n..r * n + n]);
        }
        let scratch_len = self
            .fft
            .get_inplace_scratch_len()
            .max(self.ifft.get_inplace_scratch_len());
        let mut scratch = vec![C64::new(0.0, 0.0); scratch_len];
        self.fft
            .process_with_scratch(&mut buf[in_rows.start * m..in_rows.end * m], &mut scratch);
        let mut cols = transpose(&buf, m);
        self.fft.process_with_scratch(&mut cols, &mut scratch);
        for (v, s) in cols.iter_mut().zip(spectrum) {
            *v *= s;
        }
        self.ifft.process_with_scratch(&mut cols, &mut scratch);
        let scale = 1.0 / (m * m) as f64;
        let mut row = vec![C64::new(0.0, 0.0); m];
        for r in out_rows {
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = cols[c * m + r];
            }
            self.ifft.process_with_scratch(&mut row, &mut scratch);
            for c in 0..n {
                out[r * n + c] = row[c] * scale;
            }
        }
        out
    }
}

fn nonzero_rows(values: &[C64], n: usize) -> Option<Range<usize>> {
    let nz = |r: &usize| values[r * n..(r + 1) * n].iter().any(|v| v.norm_sqr() != 0.0);
    let first = (0..n).find(nz)?;
    let last = (0..n).rev().find(nz)?;
    Some(first..last + 1)
}

fn transpose(a: &[C64], m: usize) -> Vec<C64> {
    const B: usize = 32;
    let mut out = vec![C64::new(0.0, 0.0); m * m];
    for rb in (0..m).step_by(B) {
        for cb in (0..m).step_by(B) {
            for r in rb..(rb + B).min(m) {
                for c in cb..(cb + B).min(m) {
                    out[c * m + r] = a[r * m + c];
                }
            }
        }
    }
    out
}

/// `-(1/pi) ∬_Q dm(η) / (η - d)` over the square `Q = [-h/2, h/2]^2`.
///
/// Near cells use the closed-form boundary integral
/// `∬_Q dm/(η - d) = (1/2i) ∮ conj(η - d)/(η - d) dη`; distant cells use the
/// two-term far-field series, whose next term is `O((h/|d|)^8)`.
pub fn cauchy_cell_kernel(d: C64, h: f64) -> C64 {
    if d.norm() > 24.0 * h {
        let inv = 1.0 / d;
        let h2 = h * h;
        return (h2 * inv - h2 * h2 * h2 / 60.0 * inv.powi(5)) / PI;
    }
    let a = 0.5 * h;
    let corners = [
        C64::new(-a, -a),
        C64::new(a, -a),
        C64::new(a, a),
        C64::new(-a, a),
    ];
    let mut total = C64::new(0.0, 0.0);
    for k in 0..4 {
        let p0 = corners[k] - d;
        let p1 = corners[(k + 1) % 4] - d;
        let len = (p1 - p0).norm();
        let e = (p1 - p0) / len;
        let local = e.conj() * p0;
        let (alpha, beta) = (local.re, local.im);
        let prim = |tau: f64| {
            let log = C64::new(0.5 * (tau * tau + beta * beta).ln(), beta.atan2(tau));
            C64::new(tau, 0.0) - C64::new(0.0, 2.0 * beta) * log
        };
        let seg = if beta == 0.0 {
            C64::new(len, 0.0)
        } else {
            prim(alpha + len) - prim(alpha)
        };
        total += e.conj() * seg;
    }
    // (1/2i) ∮ ... then the -(1/pi) prefactor
    -(total / C64::new(0.0, 2.0)) / PI
}

/// Far-field expansion of `P[h]` for points outside the support of `h`.
#[derive(Clone, Debug)]
pub struct CauchyMultipole {
    center: C64,
    radius: f64,
    moments: Vec<C64>,
}

impl CauchyMultipole {
    /// Moments of `h` about `center`, normalized by `radius^k`.
    pub fn new(h: &ComplexField, center: C64, radius: f64, order: usize) -> Self {
        let spec = h.spec();
        let cell = spec.spacing();
        let h2 = cell * cell;
        let q4 = -h2 * h2 * h2 / 60.0;
        let mut moments = vec![C64::new(0.0, 0.0); order + 1];
        for (k, &v) in h.values().iter().enumerate() {
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let s = (spec.node_at(k) - center) / radius;
            let mut pw = C64::new(1.0, 0.0);
            // (s + η/R)^j with the square's only nonvanishing low moments
            // ∬η^0 = h^2 and ∬η^4 = -h^6/60.
            let mut pw_m4: Vec<C64> = Vec::with_capacity(order + 1);
            for j in 0..=order {
                pw_m4.push(pw);
                let mut cell_moment = pw * h2;
                if j >= 4 {
                    let binom = (j * (j - 1) * (j - 2) * (j - 3)) as f64 / 24.0;
                    cell_moment += pw_m4[j - 4] * binom * q4 / radius.powi(4);
                }
                moments[j] += v * cell_moment;
                pw *= s;
            }
        }
        for m in &mut moments {
            *m /= PI;
        }
        CauchyMultipole {
            center,
            radius,
            moments,
        }
    }

    /// `P[h](w) = sum_k M_k R^k / (w - c)^(k+1)`.
    pub fn eval(&self, w: C64) -> C64 {
        let u = w - self.center;
        let t = self.radius / u;
        let mut acc = C64::new(0.0, 0.0);
        for m in self.moments.iter().rev() {
            acc = acc * t + m;
        }
        acc / u
    }
}

/// Cauchy transform of a compactly supported field.
pub fn cauchy_transform(h: &ComplexField, plan: &TransformPlan) -> Result<ComplexField> {
    plan.cauchy(h)
}

/// Beurling transform of a compactly supported field.
pub fn beurling_transform(h: &ComplexField, plan: &TransformPlan) -> Result<ComplexField> {
    plan.beurling(h)
}
