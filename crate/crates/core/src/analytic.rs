//! Closed-form lossless dynamics.
//!
//! Without losses the photon numbers are conserved and the evolution
//! factorizes into an optical Kerr phase and a photon-number-conditioned
//! mechanical displacement. Tracing out the resonator multiplies each optical
//! coherence `|k⟩⟨l|` by a decoherence coefficient `c_{k,l}(t)` that revives to
//! one after every mechanical period.
//!
//! Every closed form here has an independent counterpart: the decoherence
//! coefficients are re-evaluated as explicit matrix traces in a truncated
//! mechanical space, and the averaged gate fidelity is computed both from the
//! published four-group expression and from a generic fourth-moment
//! contraction.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{QubitAmplitudes, SystemParams};
use crate::operators::{displacement, displacement_complex, thermal_state, thermal_tail};
use crate::C64;

/// Largest thermal tail tolerated by the matrix-trace oracles.
pub const ORACLE_TAIL_TOL: f64 = 1e-8;

/// Largest imaginary residue tolerated before a fidelity is reported as real.
pub const IMAG_RESIDUE_TOL: f64 = 1e-12;

/// Mechanical displacements `f_k` conditioned on the logical photon content.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementTable {
    pub f: [f64; 4],
}

impl DisplacementTable {
    pub fn new(params: &SystemParams) -> Self {
        let f1 = params.g1 / params.omega_m;
        let f2 = params.g2 / params.omega_m;
        Self {
            f: [0.0, f1, f2, f1 + f2],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.f.iter().fold(0.0, |a, f| a.max(f.abs()))
    }
}

fn check_index(k: usize) -> Result<()> {
    if k > 3 {
        Err(Error::IndexOutOfRange(k))
    } else {
        Ok(())
    }
}

fn require_default_detunings(params: &SystemParams) -> Result<()> {
    if params.uses_default_detunings() {
        Ok(())
    } else {
        Err(Error::Unsupported(
            "closed forms assume the self-Kerr cancelling detunings Δ_j = g_j²/ω_m".into(),
        ))
    }
}

fn coeff(f: &[f64; 4], k: usize, l: usize, wt: f64, nbar: f64) -> C64 {
    let (fk, fl) = (f[k], f[l]);
    let re = -(fk - fl).powi(2) * (1.0 - wt.cos()) * (2.0 * nbar + 1.0);
    let im = (fl * fl - fk * fk) * wt.sin();
    C64::new(re, im).exp()
}

/// Decoherence coefficient
/// `c_{k,l}(t) = exp[−(f_k−f_l)²(1−cos ω_m t)(2n̄+1) + i(f_l²−f_k²) sin ω_m t]`
/// at the thermal occupation `params.nbar`.
pub fn decoherence_coeff(k: usize, l: usize, t: f64, params: &SystemParams) -> Result<C64> {
    check_index(k)?;
    check_index(l)?;
    let table = DisplacementTable::new(params);
    Ok(coeff(&table.f, k, l, params.omega_m * t, params.nbar))
}

/// Matrix-trace evaluation of the decoherence coefficients in a truncated
/// mechanical space:
/// `c_{k,l}(t) = Tr[D†(f_l) U_b†(t) D(f_l) D†(f_k) U_b(t) D(f_k) ρ_th]`
/// with `U_b(t) = exp(−i ω_m t b†b)`.
///
/// The displacement matrices are built once, so evaluating many times is
/// cheap.
#[derive(Debug, Clone)]
pub struct DecoherenceOracle {
    omega_m: f64,
    displacements: [DMatrix<C64>; 4],
    populations: Vec<f64>,
}

impl DecoherenceOracle {
    pub fn new(params: &SystemParams, mech_dim: usize) -> Result<Self> {
        params.validate()?;
        let tail = thermal_tail(params.nbar, mech_dim);
        if tail > ORACLE_TAIL_TOL {
            return Err(Error::TruncationInsufficient(format!(
                "thermal tail {tail:e} at dimension {mech_dim} exceeds {ORACLE_TAIL_TOL:e}"
            )));
        }
        let table = DisplacementTable::new(params);
        let d = |k: usize| displacement(table.f[k], mech_dim).map(|op| op.into_matrix());
        let displacements = [d(0)?, d(1)?, d(2)?, d(3)?];
        let th = thermal_state(params.nbar, mech_dim)?;
        let populations = (0..mech_dim).map(|n| th.matrix()[(n, n)].re).collect();
        Ok(Self {
            omega_m: params.omega_m,
            displacements,
            populations,
        })
    }

    pub fn mech_dim(&self) -> usize {
        self.populations.len()
    }

    /// `D†(f_k) U_b(t) D(f_k)` for each logical `k`.
    fn conditioned_evolutions(&self, t: f64) -> [DMatrix<C64>; 4] {
        let n = self.mech_dim();
        let phases: Vec<C64> = (0..n)
            .map(|p| C64::new(0.0, -self.omega_m * t * p as f64).exp())
            .collect();
        std::array::from_fn(|k| {
            let d = &self.displacements[k];
            let mut ud = d.clone();
            for (p, mut row) in ud.row_iter_mut().enumerate() {
                row *= phases[p];
            }
            d.adjoint() * ud
        })
    }

    /// All sixteen coefficients at time `t`, indexed `[k][l]`.
    pub fn coefficients(&self, t: f64) -> [[C64; 4]; 4] {
        let u = self.conditioned_evolutions(t);
        let n = self.mech_dim();
        let mut out = [[C64::new(0.0, 0.0); 4]; 4];
        for k in 0..4 {
            for l in 0..4 {
                // Tr[U_l† U_k ρ] = Σ_p ρ_pp Σ_q conj(U_l[q,p]) U_k[q,p]
                let mut acc = C64::new(0.0, 0.0);
                for p in 0..n {
                    let col: C64 = u[l]
                        .column(p)
                        .iter()
                        .zip(u[k].column(p).iter())
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    acc += col * self.populations[p];
                }
                out[k][l] = acc;
            }
        }
        out
    }

    pub fn coefficient(&self, k: usize, l: usize, t: f64) -> Result<C64> {
        check_index(k)?;
        check_index(l)?;
        Ok(self.coefficients(t)[k][l])
    }
}

/// One-shot matrix-trace evaluation of `c_{k,l}(t)`; see [`DecoherenceOracle`].
pub fn decoherence_coeff_oracle(
    k: usize,
    l: usize,
    t: f64,
    params: &SystemParams,
    mech_dim: usize,
) -> Result<C64> {
    DecoherenceOracle::new(params, mech_dim)?.coefficient(k, l, t)
}

/// Thermal expectation of a displacement operator:
/// `⟨D(α)⟩_th = exp[−|α|²(n̄ + ½)]`.
pub fn thermal_displacement_average(alpha: C64, nbar: f64) -> f64 {
    (-alpha.norm_sqr() * (nbar + 0.5)).exp()
}

/// `Tr[D(α) ρ_th]` by explicit matrices in a `dim`-level truncation.
pub fn thermal_displacement_trace(alpha: C64, nbar: f64, dim: usize) -> Result<C64> {
    let d = displacement_complex(alpha, dim)?;
    let th = thermal_state(nbar, dim)?;
    Ok((0..dim)
        .map(|n| d.matrix()[(n, n)] * th.matrix()[(n, n)])
        .sum())
}

/// Conditional phase `2 g₁ g₂ t / ω_m` accumulated by `|1⟩₁|1⟩₂`.
pub fn nonlinear_phase(t: f64, params: &SystemParams) -> f64 {
    2.0 * params.g1 * params.g2 * t / params.omega_m
}

fn delta3(k: usize) -> f64 {
    if k == 3 {
        1.0
    } else {
        0.0
    }
}

/// Reduced optical state (logical basis) of a lossless evolution started from
/// `|ψ⟩⟨ψ| ⊗ ρ_th`.
pub fn reduced_optical_state_analytic(
    alpha: &QubitAmplitudes,
    t: f64,
    params: &SystemParams,
) -> Result<DMatrix<C64>> {
    require_default_detunings(params)?;
    let table = DisplacementTable::new(params);
    let wt = params.omega_m * t;
    let phi = nonlinear_phase(t, params);
    Ok(DMatrix::from_fn(4, 4, |k, l| {
        let phase = C64::new(0.0, phi * (delta3(k) - delta3(l))).exp();
        coeff(&table.f, k, l, wt, params.nbar) * alpha[k] * alpha[l].conj() * phase
    }))
}

/// Overlap of the lossless reduced state with the ideal π-gate target.
pub fn state_fidelity_analytic(
    alpha: &QubitAmplitudes,
    t: f64,
    params: &SystemParams,
) -> Result<f64> {
    require_default_detunings(params)?;
    let table = DisplacementTable::new(params);
    let wt = params.omega_m * t;
    let detune = nonlinear_phase(t, params) - PI;
    let w: Vec<f64> = alpha.as_array().iter().map(|a| a.norm_sqr()).collect();
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..4 {
        for l in 0..4 {
            let phase = C64::new(0.0, detune * (delta3(k) - delta3(l))).exp();
            acc += coeff(&table.f, k, l, wt, params.nbar) * (w[k] * w[l]) * phase;
        }
    }
    debug_assert!(
        acc.im.abs() <= IMAG_RESIDUE_TOL,
        "imaginary residue {}",
        acc.im
    );
    Ok(acc.re)
}

/// Fourth moment `E[α_k α_l α_m α_n]` of a uniformly random real unit
/// 4-vector: `(δ_kl δ_mn + δ_km δ_ln + δ_kn δ_lm) / 24`.
pub fn moment(k: usize, l: usize, m: usize, n: usize) -> f64 {
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    (d(k, l) * d(m, n) + d(k, m) * d(l, n) + d(k, n) * d(l, m)) / 24.0
}

/// Published four-group closed form of the averaged gate fidelity.
pub fn gate_fidelity_closed_form(t: f64, params: &SystemParams) -> f64 {
    let w = params.omega_m;
    let (g1, g2, nbar) = (params.g1, params.g2, params.nbar);
    let wt = w * t;
    let (one_minus_cos, sin) = (1.0 - wt.cos(), wt.sin());
    let damp = |x: f64| (-x * one_minus_cos * (2.0 * nbar + 1.0)).exp();
    let shift = PI - 2.0 * g1 * g2 * t / w;
    let (s1, s2) = (g1 * g1 / (w * w), g2 * g2 / (w * w));
    let cross = 2.0 * g1 * g2 / (w * w);
    let diff = ((g1 - g2) / w).powi(2);
    let sum = ((g1 + g2) / w).powi(2);

    let group1 = damp(s1) * ((s1 * sin).cos() + ((s1 + cross) * sin + shift).cos());
    let group2 = damp(s2) * ((s2 * sin).cos() + ((s2 + cross) * sin + shift).cos());
    let group3 = damp(diff) * ((s2 - s1) * sin).cos();
    let group4 = damp(sum) * (sum * sin + shift).cos();
    0.5 + (group1 + group2 + group3 + group4) / 12.0
}

/// Gate fidelity as the moment-weighted sum
/// `Σ_{k,l} E[α_k² α_l²] Re[c_{k,l} e^{i(φ−π)(δ_k3 − δ_l3)}]`.
pub fn gate_fidelity_moment_sum(t: f64, params: &SystemParams) -> f64 {
    let table = DisplacementTable::new(params);
    let wt = params.omega_m * t;
    let detune = nonlinear_phase(t, params) - PI;
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..4 {
        for l in 0..4 {
            let phase = C64::new(0.0, detune * (delta3(k) - delta3(l))).exp();
            acc += coeff(&table.f, k, l, wt, params.nbar) * phase * moment(k, k, l, l);
        }
    }
    acc.re
}

/// Averaged gate fidelity of the lossless gate.
///
/// Evaluates the four-group closed form and cross-checks it against
/// [`gate_fidelity_moment_sum`].
pub fn gate_fidelity_analytic(t: f64, params: &SystemParams) -> Result<f64> {
    require_default_detunings(params)?;
    let closed = gate_fidelity_closed_form(t, params);
    let generic = gate_fidelity_moment_sum(t, params);
    assert!(
        (closed - generic).abs() <= 1e-12,
        "closed form {closed} disagrees with moment sum {generic}"
    );
    Ok(closed)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            n_samples: n,
        }
    }

    /// Distance from `value` in units of the standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        (self.mean - value).abs() / self.stderr
    }
}

/// Deterministic uniform samples from the real unit sphere in four
/// dimensions (normalized Gaussian vectors).
pub fn sample_real_unit_vectors(n: usize, seed: u64) -> Vec<QubitAmplitudes> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let a = v.map(|x| C64::new(x / norm, 0.0));
            out.push(QubitAmplitudes::new(a).expect("normalized by construction"));
        }
    }
    out
}

/// Monte Carlo average of [`state_fidelity_analytic`] over random real inputs.
pub fn monte_carlo_gate_fidelity_analytic(
    t: f64,
    params: &SystemParams,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let samples = sample_real_unit_vectors(n_samples, seed)
        .iter()
        .map(|a| state_fidelity_analytic(a, t, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_samples(&samples))
}
