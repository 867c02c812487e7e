//! Dissipative dynamics under the Born–Markov master equation
//!
//! ```text
//! dρ/dt = −i[H, ρ] + Σ_j (κ_j/2)(2a_jρa_j† − a_j†a_jρ − ρa_j†a_j)
//!         + (γ_m/2)(n̄+1)(2bρb† − b†bρ − ρb†b) + (γ_m/2)n̄(2b†ρb − bb†ρ − ρbb†)
//! ```
//!
//! [`lindblad_rhs`] evaluates it with dense operator products on any gate
//! layout. The integrators use the equivalent [`BlockLindblad`], which only
//! touches the photon-number blocks an initial state can reach.

mod blocks;
mod fidelity;
pub mod integrate;

pub use blocks::{support_closure, BlockLindblad, BlockState};
pub use fidelity::{
    convergence_report, gate_fidelity_dissipative, monte_carlo_gate_fidelity,
    monte_carlo_gate_fidelity_superposed, BasisEvolution, ConvergenceReport, FidelityTrace,
};
pub use integrate::StepStats;

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, SystemParams};
use crate::operators::{annihilation, embed, thermal_tail, DensityMatrix, Op, SpaceLayout};
use crate::C64;

/// Default relative and absolute integrator tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default bound on the thermal weight discarded by truncation.
pub const DEFAULT_TRUNC_TOL: f64 = 1e-7;
/// Extra mechanical levels kept above the thermal cutoff for the
/// photon-conditioned displacements.
pub const DISPLACEMENT_PADDING: usize = 16;
/// Number of top mechanical levels monitored for leakage.
pub const EDGE_LEVELS: usize = 3;
/// Largest `|hλ|` kept inside the Dormand–Prince stability region.
///
/// The region meets the imaginary axis near `0.95`; beyond it the undamped
/// high-phonon coherences grow slowly and only the error controller holds
/// them at tolerance level, which shows up as Hermiticity drift.
pub const DP5_STABILITY_RADIUS: f64 = 0.9;
/// Largest `|hλ|` accepted for classical RK4 (imaginary-axis limit `2√2`).
pub const RK4_STABILITY_RADIUS: f64 = 2.8;

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    /// Adaptive Dormand–Prince 5(4) at the configured tolerances.
    DormandPrince,
    /// Classical RK4 with substeps no longer than `step`.
    Rk4 { step: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Output times in units of `1/ω_m`, strictly increasing from 0.
    pub t_grid: Vec<f64>,
    pub mech_dim: usize,
    pub trunc_tol: f64,
    pub max_step: f64,
    pub integrator: Integrator,
}

fn thermal_cutoff(nbar: f64, trunc_tol: f64) -> usize {
    if nbar <= 0.0 {
        1
    } else {
        let r = nbar / (nbar + 1.0);
        (trunc_tol.ln() / r.ln()).ceil().max(1.0) as usize
    }
}

/// Smallest `M` with `P(n ≥ M) ≤ tol` for a Poisson distribution of mean `mu`.
fn poisson_cutoff(mu: f64, tol: f64) -> usize {
    let mut p = (-mu).exp();
    let mut cdf = 0.0;
    let mut m = 0;
    while 1.0 - cdf > tol && m < 100_000 {
        cdf += p;
        m += 1;
        p *= mu / m as f64;
    }
    m
}

/// Smallest `N` with `(n̄/(n̄+1))^N ≤ trunc_tol`, plus
/// [`DISPLACEMENT_PADDING`] levels.
pub fn default_mech_dim(nbar: f64, trunc_tol: f64) -> usize {
    thermal_cutoff(nbar, trunc_tol) + DISPLACEMENT_PADDING
}

/// Truncation that also holds the largest lab-frame displacement.
///
/// Starting from the thermal state the resonator conditioned on `|k⟩` is
/// displaced by up to `2|f_k|`. Near the ground state this displacement, not
/// the thermal tail, sets the cutoff, so the base level count is the larger of
/// the thermal cutoff and the Poisson cutoff of the coherent state `|2 f_max⟩`.
pub fn mech_dim_for(params: &SystemParams, trunc_tol: f64) -> usize {
    mech_dim_floor(params, trunc_tol) + DISPLACEMENT_PADDING
}

/// [`mech_dim_for`] without the padding: the fewest levels that hold both the
/// thermal state and the largest displaced vacuum to `trunc_tol`.
pub fn mech_dim_floor(params: &SystemParams, trunc_tol: f64) -> usize {
    let f_max = (params.g1.abs() + params.g2.abs()) / params.omega_m;
    let coherent = poisson_cutoff((2.0 * f_max).powi(2), trunc_tol);
    thermal_cutoff(params.nbar, trunc_tol).max(coherent)
}

impl EvolutionConfig {
    /// Defaults for thermal occupation `nbar`: tolerances `1e-9`, truncation
    /// from [`default_mech_dim`].
    pub fn new(t_grid: Vec<f64>, nbar: f64) -> Self {
        Self {
            rel_tol: DEFAULT_TOL,
            abs_tol: DEFAULT_TOL,
            t_grid,
            mech_dim: default_mech_dim(nbar, DEFAULT_TRUNC_TOL),
            trunc_tol: DEFAULT_TRUNC_TOL,
            max_step: 0.25,
            integrator: Integrator::DormandPrince,
        }
    }

    /// Defaults with the truncation from [`mech_dim_for`].
    pub fn for_params(t_grid: Vec<f64>, params: &SystemParams) -> Self {
        let mut cfg = Self::new(t_grid, params.nbar);
        cfg.mech_dim = mech_dim_for(params, cfg.trunc_tol);
        cfg
    }

    /// `n_points` evenly spaced times on `[0, t_end]`.
    pub fn uniform(t_end: f64, n_points: usize, nbar: f64) -> Self {
        let grid = if n_points < 2 {
            vec![0.0]
        } else {
            (0..n_points)
                .map(|i| t_end * i as f64 / (n_points - 1) as f64)
                .collect()
        };
        Self::new(grid, nbar)
    }

    pub fn with_grid(mut self, t_grid: Vec<f64>) -> Self {
        self.t_grid = t_grid;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_mech_dim(mut self, mech_dim: usize) -> Self {
        self.mech_dim = mech_dim;
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    /// Thermal weight above the truncation.
    pub fn thermal_tail(&self, nbar: f64) -> f64 {
        thermal_tail(nbar, self.mech_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) || !(self.trunc_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "tolerances must be positive".into(),
            ));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter("max_step must be positive".into()));
        }
        if let Integrator::Rk4 { step } = self.integrator {
            if !(step > 0.0) {
                return Err(Error::InvalidParameter("RK4 step must be positive".into()));
            }
        }
        if self.mech_dim < 2 {
            return Err(Error::InvalidDimension(format!(
                "mechanical dimension must be at least 2, got {}",
                self.mech_dim
            )));
        }
        match self.t_grid.first() {
            None => return Err(Error::InvalidParameter("empty time grid".into())),
            Some(&t0) if t0 != 0.0 => {
                return Err(Error::InvalidParameter(format!(
                    "time grid must start at 0, starts at {t0}"
                )))
            }
            _ => {}
        }
        if self.t_grid.iter().any(|t| !t.is_finite())
            || self.t_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidParameter(
                "time grid must be finite and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Errors if the thermal tail at this truncation exceeds `trunc_tol`.
    pub fn check_truncation(&self, nbar: f64) -> Result<()> {
        let tail = self.thermal_tail(nbar);
        if tail > self.trunc_tol {
            Err(Error::TruncationInsufficient(format!(
                "thermal tail {tail:e} at mech_dim {} exceeds {:e}",
                self.mech_dim, self.trunc_tol
            )))
        } else {
            Ok(())
        }
    }
}

/// Master-equation right-hand side by dense operator products.
///
/// Linear in `rho`; applied unchanged to non-Hermitian coherence blocks.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    params: &SystemParams,
    layout: &SpaceLayout,
) -> Result<DensityMatrix> {
    params.validate()?;
    let mech = layout.require_gate()?;
    if rho.layout() != layout {
        return Err(Error::InvalidLayout(format!(
            "state layout {:?} does not match {:?}",
            rho.layout().dims(),
            layout.dims()
        )));
    }
    let h = build_hamiltonian(params, layout)?;
    let a1 = embed(&annihilation(2)?, 0, layout)?;
    let a2 = embed(&annihilation(2)?, 1, layout)?;
    let b = embed(&annihilation(mech)?, 2, layout)?;
    let r = rho.matrix();

    let dissipator = |l: &Op, rate: f64| {
        let lm = l.matrix();
        let ld = lm.adjoint();
        let ldl = &ld * lm;
        (lm * r * &ld * C64::new(2.0, 0.0) - &ldl * r - r * &ldl) * C64::new(rate / 2.0, 0.0)
    };

    let mut out = (h.matrix() * r - r * h.matrix()) * C64::new(0.0, -1.0);
    if params.kappa1 != 0.0 {
        out += dissipator(&a1, params.kappa1);
    }
    if params.kappa2 != 0.0 {
        out += dissipator(&a2, params.kappa2);
    }
    let gamma = params.gamma_m();
    if gamma != 0.0 {
        out += dissipator(&b, gamma * (params.nbar + 1.0));
        if params.nbar != 0.0 {
            out += dissipator(&b.dagger(), gamma * params.nbar);
        }
    }
    DensityMatrix::new(layout.clone(), out, false)
}

/// States of a trajectory at the configured output times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub stats: StepStats,
}

/// Integrate a block state, calling `observer` at every output time.
/// Returns the final state.
pub fn evolve_blocks<O>(
    state: BlockState,
    params: &SystemParams,
    cfg: &EvolutionConfig,
    mut observer: O,
) -> Result<(BlockState, StepStats)>
where
    O: FnMut(usize, f64, &BlockState) -> Result<()>,
{
    cfg.validate()?;
    params.validate()?;
    if state.mech_dim() != cfg.mech_dim {
        return Err(Error::InvalidLayout(format!(
            "state mechanical dimension {} differs from configured {}",
            state.mech_dim(),
            cfg.mech_dim
        )));
    }
    let lind = BlockLindblad::new(params, &state)?;
    let leak_limit = 10.0 * cfg.trunc_tol;
    let mut y = state.data().to_vec();
    let mut observe = |i: usize, t: f64, y: &[C64]| {
        let snapshot = state.with_data(y.to_vec());
        if !snapshot.is_finite() {
            return Err(Error::NonFinite(t));
        }
        let leak = snapshot.edge_population(EDGE_LEVELS);
        if leak > leak_limit {
            return Err(Error::TruncationInsufficient(format!(
                "population {leak:e} in the top {EDGE_LEVELS} of {} mechanical levels at t = {t}",
                cfg.mech_dim
            )));
        }
        observer(i, t, &snapshot)
    };
    let rhs = |y: &[C64], dy: &mut [C64]| lind.apply(y, dy);
    let radius = lind.spectral_radius();
    let stats = match cfg.integrator {
        Integrator::DormandPrince => integrate::dormand_prince(
            rhs,
            &mut y,
            &cfg.t_grid,
            cfg.rel_tol,
            cfg.abs_tol,
            cfg.max_step.min(DP5_STABILITY_RADIUS / radius),
            &mut observe,
        )?,
        Integrator::Rk4 { step } => {
            if step * radius > RK4_STABILITY_RADIUS {
                return Err(Error::InvalidParameter(format!(
                    "RK4 step {step} exceeds the stability limit {:e}",
                    RK4_STABILITY_RADIUS / radius
                )));
            }
            integrate::rk4_fixed(rhs, &mut y, &cfg.t_grid, step, &mut observe)?
        }
    };
    Ok((state.with_data(y), stats))
}

/// Integrate a dense gate-layout state and return dense snapshots at every
/// output time. Intended for small truncations; large runs should use
/// [`evolve_blocks`] with an observer.
pub fn evolve(
    rho0: &DensityMatrix,
    params: &SystemParams,
    cfg: &EvolutionConfig,
) -> Result<Trajectory> {
    let state = BlockState::from_dense(rho0)?;
    let hermitian = rho0.is_hermitian();
    let mut times = Vec::with_capacity(cfg.t_grid.len());
    let mut states = Vec::with_capacity(cfg.t_grid.len());
    let (_, stats) = evolve_blocks(state, params, cfg, |_, t, s| {
        times.push(t);
        states.push(s.to_dense(false)?);
        Ok(())
    })?;
    if hermitian {
        for s in states.iter_mut() {
            *s = DensityMatrix::new(s.layout().clone(), s.matrix().clone(), true)?;
        }
    }
    Ok(Trajectory {
        times,
        states,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::logical_block;
    use crate::operators::{number, thermal_state};
    use nalgebra::DMatrix;

    fn random_block_state(mech: usize, seed: u64) -> DensityMatrix {
        // deterministic pseudo-random dense matrix (LCG), non-Hermitian
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let n = 4 * mech;
        let m = DMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        DensityMatrix::new(SpaceLayout::gate(mech).unwrap(), m, false).unwrap()
    }

    fn lossy() -> SystemParams {
        SystemParams::new(0.45, 0.3)
            .with_losses(0.07, 0.02, 50.0)
            .with_nbar(1.3)
    }

    #[test]
    fn block_rhs_matches_dense_rhs() {
        let mech = 7;
        let layout = SpaceLayout::gate(mech).unwrap();
        let p = lossy().with_detunings(0.11, -0.05);
        let rho = random_block_state(mech, 3);
        let dense = lindblad_rhs(&rho, &p, &layout).unwrap();

        let blocks = BlockState::from_dense(&rho).unwrap();
        assert_eq!(blocks.support().len(), 16);
        let lind = BlockLindblad::new(&p, &blocks).unwrap();
        let mut dy = vec![C64::new(0.0, 0.0); lind.len()];
        lind.apply(blocks.data(), &mut dy);
        let fast = blocks.with_data(dy).to_dense(false).unwrap();
        let diff = (dense.matrix() - fast.matrix())
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn rhs_is_trace_free() {
        let mech = 6;
        let layout = SpaceLayout::gate(mech).unwrap();
        for seed in 0..5 {
            let rho = random_block_state(mech, seed);
            let d = lindblad_rhs(&rho, &lossy(), &layout).unwrap();
            assert!(d.trace().norm() < 1e-12);
        }
    }

    #[test]
    fn thermal_vacuum_is_stationary() {
        let mech = 12;
        let layout = SpaceLayout::gate(mech).unwrap();
        let nbar = 0.8;
        let p = SystemParams::new(0.0, 0.0)
            .with_detunings(0.0, 0.0)
            .with_losses(0.1, 0.1, 20.0)
            .with_nbar(nbar);
        let rho = logical_block(0, 0, &thermal_state(nbar, mech).unwrap()).unwrap();
        let d = lindblad_rhs(&rho, &p, &layout).unwrap();
        assert!(d.matrix().iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn rhs_rejects_bad_layout() {
        let th = thermal_state(0.0, 4).unwrap();
        let layout = SpaceLayout::new(vec![3, 2, 4]).unwrap();
        assert!(lindblad_rhs(&th, &SystemParams::ideal(), &layout).is_err());
    }

    #[test]
    fn cavity_decay_is_exponential() {
        let mech = 4;
        let kappa = 0.3;
        let p = SystemParams::new(0.0, 0.0)
            .with_detunings(0.0, 0.0)
            .with_losses(kappa, 0.0, f64::INFINITY);
        let rho0 = logical_block(3, 3, &thermal_state(0.0, mech).unwrap()).unwrap();
        let cfg = EvolutionConfig::new(vec![0.0, 1.0, 2.5, 4.0], 0.0).with_mech_dim(mech);
        let traj = evolve(&rho0, &p, &cfg).unwrap();
        let layout = SpaceLayout::gate(mech).unwrap();
        let n1 = embed(&number(2).unwrap(), 0, &layout).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let mean = (n1.matrix() * s.matrix()).trace().re;
            assert!((mean - (-kappa * t).exp()).abs() < 1e-8, "t={t}: {mean}");
            assert!((s.trace().re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn evolve_checks_dimensions() {
        let rho0 = logical_block(0, 0, &thermal_state(0.0, 5).unwrap()).unwrap();
        let cfg = EvolutionConfig::new(vec![0.0, 1.0], 0.0).with_mech_dim(6);
        assert!(matches!(
            evolve(&rho0, &SystemParams::ideal(), &cfg),
            Err(Error::InvalidLayout(_))
        ));
    }

    #[test]
    fn config_validation() {
        let ok = EvolutionConfig::new(vec![0.0, 1.0], 0.0);
        assert!(ok.validate().is_ok());
        assert!(ok.clone().with_grid(vec![]).validate().is_err());
        assert!(ok.clone().with_grid(vec![0.5, 1.0]).validate().is_err());
        assert!(ok
            .clone()
            .with_grid(vec![0.0, 1.0, 1.0])
            .validate()
            .is_err());
        assert!(ok.clone().with_tolerances(0.0, 1e-9).validate().is_err());
        assert!(ok.with_mech_dim(1).validate().is_err());
    }

    #[test]
    fn default_truncation() {
        assert_eq!(default_mech_dim(0.0, 1e-7), 17);
        assert_eq!(poisson_cutoff(0.0, 1e-7), 1);
        // vacuum displaced by 2: Poisson(4) tail below 1e-7 needs 19 levels
        let ideal = SystemParams::ideal();
        let m = poisson_cutoff(4.0, 1e-7);
        assert_eq!(mech_dim_for(&ideal, 1e-7), m + DISPLACEMENT_PADDING);
        assert_eq!(m, 19);
        assert_eq!(
            mech_dim_for(&ideal.with_nbar(10.0), 1e-7),
            default_mech_dim(10.0, 1e-7)
        );
        let n = default_mech_dim(10.0, 1e-7);
        assert!(thermal_tail(10.0, n - DISPLACEMENT_PADDING) <= 1e-7);
        assert!(thermal_tail(10.0, n - DISPLACEMENT_PADDING - 1) > 1e-7);
        assert_eq!(n - DISPLACEMENT_PADDING, 170);
    }
}
