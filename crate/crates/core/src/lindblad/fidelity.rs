//! Averaged gate fidelity of the dissipative gate.
//!
//! The channel is linear, so the ten evolutions of `|k⟩⟨l| ⊗ ρ_th` with
//! `k ≤ l` determine the output for every input; the remaining six follow
//! from `E(X†) = E(X)†`. Contracting their reduced optical states with the
//! fourth-moment tensor of [`moment`] and the target phases gives the average
//! over real input states.

use rayon::prelude::*;

use super::{evolve_blocks, BlockState, EvolutionConfig, StepStats};
use crate::analytic::{moment, sample_real_unit_vectors, McEstimate, IMAG_RESIDUE_TOL};
use crate::error::{Error, Result};
use crate::model::{t_pi, QubitAmplitudes, SystemParams};
use crate::operators::{min_eigenvalue, thermal_state};
use crate::C64;
use nalgebra::DMatrix;

type Optical = [[C64; 4]; 4];

/// Target phases `e^{iπδ_{k3}}`.
const SIGN: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

fn zero_optical() -> Optical {
    [[C64::new(0.0, 0.0); 4]; 4]
}

fn adjoint(m: &Optical) -> Optical {
    let mut out = zero_optical();
    for (a, row) in out.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v = m[b][a].conj();
        }
    }
    out
}

/// Gate fidelity over time with per-time diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityTrace {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    /// `max_k |Tr ρ_kk(t) − Tr ρ_kk(0)|`.
    pub trace_err: Vec<f64>,
    /// `max_k ‖ρ_kk(t) − ρ_kk(t)†‖_max`.
    pub herm_err: Vec<f64>,
    /// Smallest eigenvalue of the input-averaged reduced optical state.
    pub min_eig: Vec<f64>,
    pub stats: StepStats,
}

impl FidelityTrace {
    /// Fidelity at the output time closest to `t`.
    pub fn at(&self, t: f64) -> Option<f64> {
        let i = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        Some(self.fidelity[i])
    }
}

/// Reduced optical images `Tr_b E_t(|k⟩⟨l| ⊗ ρ_th)` for all sixteen logical
/// pairs at every output time.
#[derive(Debug, Clone)]
pub struct BasisEvolution {
    times: Vec<f64>,
    /// `images[i][k][l]` is the logical 4×4 matrix at time `i`.
    images: Vec<[[Optical; 4]; 4]>,
    trace_err: Vec<f64>,
    herm_err: Vec<f64>,
    stats: StepStats,
}

struct PairRun {
    k: usize,
    l: usize,
    images: Vec<Optical>,
    trace_err: Vec<f64>,
    herm_err: Vec<f64>,
    stats: StepStats,
}

fn run_pair(
    k: usize,
    l: usize,
    mech: &DMatrix<C64>,
    params: &SystemParams,
    cfg: &EvolutionConfig,
) -> Result<PairRun> {
    let state = BlockState::logical_block(k, l, mech)?;
    let tr0 = state.trace();
    let n_out = cfg.t_grid.len();
    let mut run = PairRun {
        k,
        l,
        images: Vec::with_capacity(n_out),
        trace_err: Vec::with_capacity(n_out),
        herm_err: Vec::with_capacity(n_out),
        stats: StepStats::default(),
    };
    let (_, stats) = evolve_blocks(state, params, cfg, |_, _, s| {
        run.images.push(s.reduced_optical());
        if k == l {
            run.trace_err.push((s.trace() - tr0).norm());
            run.herm_err.push(s.hermiticity_error());
        }
        Ok(())
    })?;
    run.stats = stats;
    Ok(run)
}

impl BasisEvolution {
    /// Evolve the logical basis blocks. With `adjoint_shortcut` only the ten
    /// pairs `k ≤ l` are integrated; otherwise all sixteen are.
    pub fn run(
        params: &SystemParams,
        cfg: &EvolutionConfig,
        adjoint_shortcut: bool,
    ) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        let mech = thermal_state(params.nbar, cfg.mech_dim)?.into_matrix();
        let pairs: Vec<(usize, usize)> = (0..4)
            .flat_map(|k| (0..4).map(move |l| (k, l)))
            .filter(|&(k, l)| !adjoint_shortcut || k <= l)
            .collect();
        let runs = pairs
            .par_iter()
            .map(|&(k, l)| run_pair(k, l, &mech, params, cfg))
            .collect::<Result<Vec<_>>>()?;

        let n_out = cfg.t_grid.len();
        let mut images = vec![[[zero_optical(); 4]; 4]; n_out];
        let mut trace_err = vec![0.0f64; n_out];
        let mut herm_err = vec![0.0f64; n_out];
        let mut stats = StepStats::default();
        for run in &runs {
            for i in 0..n_out {
                images[i][run.k][run.l] = run.images[i];
                if adjoint_shortcut && run.k != run.l {
                    images[i][run.l][run.k] = adjoint(&run.images[i]);
                }
                if run.k == run.l {
                    trace_err[i] = trace_err[i].max(run.trace_err[i]);
                    herm_err[i] = herm_err[i].max(run.herm_err[i]);
                }
            }
            stats.accepted += run.stats.accepted;
            stats.rejected += run.stats.rejected;
            stats.rhs_evals += run.stats.rhs_evals;
        }
        Ok(Self {
            times: cfg.t_grid.clone(),
            images,
            trace_err,
            herm_err,
            stats,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `Tr_b E_t(|k⟩⟨l| ⊗ ρ_th)` at output index `i`.
    pub fn image(&self, i: usize, k: usize, l: usize) -> &Optical {
        &self.images[i][k][l]
    }

    /// Reduced optical state at output `i` for the pure input `α`.
    pub fn reduced_state(&self, alpha: &QubitAmplitudes, i: usize) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(4, 4);
        for k in 0..4 {
            for l in 0..4 {
                let w = alpha[k] * alpha[l].conj();
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                let img = &self.images[i][k][l];
                for m in 0..4 {
                    for n in 0..4 {
                        out[(m, n)] += img[m][n] * w;
                    }
                }
            }
        }
        out
    }

    /// `⟨ψ_tgt| ρ_opt(t_i) |ψ_tgt⟩` for the pure input `α`.
    pub fn state_fidelity(&self, alpha: &QubitAmplitudes, i: usize) -> f64 {
        let rho = self.reduced_state(alpha, i);
        let tgt: Vec<C64> = (0..4).map(|m| alpha[m] * SIGN[m]).collect();
        let mut acc = C64::new(0.0, 0.0);
        for m in 0..4 {
            for n in 0..4 {
                acc += tgt[m].conj() * rho[(m, n)] * tgt[n];
            }
        }
        acc.re
    }

    /// Moment-tensor average of the state fidelity at output `i`:
    /// `Σ E[α_kα_lα_mα_n] s_m s_n ⟨m|Tr_b ρ_kl(t)|n⟩`.
    pub fn gate_fidelity(&self, i: usize) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..4 {
            for l in 0..4 {
                let img = &self.images[i][k][l];
                for m in 0..4 {
                    for n in 0..4 {
                        let w = moment(k, l, m, n);
                        if w != 0.0 {
                            acc += img[m][n] * (w * SIGN[m] * SIGN[n]);
                        }
                    }
                }
            }
        }
        debug_assert!(
            acc.im.abs() <= IMAG_RESIDUE_TOL,
            "imaginary residue {}",
            acc.im
        );
        acc.re
    }

    /// Input-averaged reduced state `Σ E[α_kα_l] Tr_b ρ_kl = ¼ Σ_k Tr_b ρ_kk`.
    pub fn averaged_state(&self, i: usize) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(4, 4);
        for k in 0..4 {
            let img = &self.images[i][k][k];
            for m in 0..4 {
                for n in 0..4 {
                    out[(m, n)] += img[m][n] * 0.25;
                }
            }
        }
        out
    }

    pub fn to_trace(&self) -> FidelityTrace {
        let n = self.times.len();
        FidelityTrace {
            times: self.times.clone(),
            fidelity: (0..n).map(|i| self.gate_fidelity(i)).collect(),
            trace_err: self.trace_err.clone(),
            herm_err: self.herm_err.clone(),
            min_eig: (0..n)
                .map(|i| min_eigenvalue(&self.averaged_state(i)))
                .collect(),
            stats: self.stats,
        }
    }
}

/// Averaged gate fidelity of the dissipative dynamics on `cfg.t_grid`.
pub fn gate_fidelity_dissipative(
    params: &SystemParams,
    cfg: &EvolutionConfig,
) -> Result<FidelityTrace> {
    Ok(BasisEvolution::run(params, cfg, true)?.to_trace())
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < 100 {
        Err(Error::InvalidParameter(format!(
            "need at least 100 Monte Carlo samples, got {n_samples}"
        )))
    } else {
        Ok(())
    }
}

/// Monte Carlo gate fidelity at time `t`: each random real input
/// `|ψ⟩⟨ψ| ⊗ ρ_th` is integrated on its own.
pub fn monte_carlo_gate_fidelity(
    t: f64,
    params: &SystemParams,
    cfg: &EvolutionConfig,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_samples(n_samples)?;
    let cfg = cfg.clone().with_grid(vec![0.0, t]);
    cfg.validate()?;
    let mech = thermal_state(params.nbar, cfg.mech_dim)?.into_matrix();
    let inputs = sample_real_unit_vectors(n_samples, seed);
    let samples = inputs
        .par_iter()
        .map(|alpha| {
            let state = BlockState::pure_input(alpha.as_array(), &mech)?;
            let (fin, _) = evolve_blocks(state, params, &cfg, |_, _, _| Ok(()))?;
            let rho = fin.reduced_optical();
            let tgt: Vec<C64> = (0..4).map(|m| alpha[m] * SIGN[m]).collect();
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..4 {
                for n in 0..4 {
                    acc += tgt[m].conj() * rho[m][n] * tgt[n];
                }
            }
            Ok(acc.re)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_samples(&samples))
}

/// Monte Carlo gate fidelity at time `t` using linearity: all sixteen basis
/// blocks are integrated independently (no adjoint shortcut, no moment
/// tensor) and each sampled input is assembled from them.
pub fn monte_carlo_gate_fidelity_superposed(
    t: f64,
    params: &SystemParams,
    cfg: &EvolutionConfig,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_samples(n_samples)?;
    let cfg = cfg.clone().with_grid(vec![0.0, t]);
    let basis = BasisEvolution::run(params, &cfg, false)?;
    let samples: Vec<f64> = sample_real_unit_vectors(n_samples, seed)
        .iter()
        .map(|a| basis.state_fidelity(a, 1))
        .collect();
    Ok(McEstimate::from_samples(&samples))
}

/// Sensitivity of `ℱ(t_π)` to the mechanical truncation and to the
/// integrator tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub t_pi: f64,
    pub mech_dim: usize,
    pub rel_tol: f64,
    pub baseline: Option<f64>,
    pub doubled_dim: Option<f64>,
    pub tightened_tol: Option<f64>,
    /// `|ℱ(2N) − ℱ(N)|`, infinite if either run failed.
    pub delta_dim: f64,
    /// `|ℱ(tol/10) − ℱ(tol)|`, infinite if either run failed.
    pub delta_tol: f64,
    pub threshold: f64,
    pub errors: Vec<String>,
    pub passed: bool,
}

/// Threshold on both deltas of a [`ConvergenceReport`].
pub const CONVERGENCE_THRESHOLD: f64 = 1e-5;

pub fn convergence_report(
    params: &SystemParams,
    cfg: &EvolutionConfig,
) -> Result<ConvergenceReport> {
    let tp = t_pi(params)?;
    let base = cfg.clone().with_grid(vec![0.0, tp]);
    let variants = [
        base.clone(),
        base.clone().with_mech_dim(2 * cfg.mech_dim),
        base.clone()
            .with_tolerances(cfg.rel_tol / 10.0, cfg.abs_tol / 10.0),
    ];
    let mut errors = Vec::new();
    let values: Vec<Option<f64>> = variants
        .iter()
        .map(|c| match gate_fidelity_dissipative(params, c) {
            Ok(tr) => Some(tr.fidelity[1]),
            Err(e) => {
                errors.push(format!("mech_dim {}, tol {:e}: {e}", c.mech_dim, c.rel_tol));
                None
            }
        })
        .collect();
    let delta = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => f64::INFINITY,
    };
    let delta_dim = delta(values[1], values[0]);
    let delta_tol = delta(values[2], values[0]);
    Ok(ConvergenceReport {
        t_pi: tp,
        mech_dim: cfg.mech_dim,
        rel_tol: cfg.rel_tol,
        baseline: values[0],
        doubled_dim: values[1],
        tightened_tol: values[2],
        delta_dim,
        delta_tol,
        threshold: CONVERGENCE_THRESHOLD,
        passed: delta_dim < CONVERGENCE_THRESHOLD && delta_tol < CONVERGENCE_THRESHOLD,
        errors,
    })
}
