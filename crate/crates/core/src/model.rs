//! Physical model: parameters, the rotating-frame Hamiltonian and the logical
//! two-qubit basis.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::operators::{
    annihilation, embed, number, DensityMatrix, Op, SpaceLayout, LOGICAL_TO_OPTICAL,
};
use crate::C64;

/// Reduced Planck constant in J·s (exact SI value).
pub const HBAR_SI: f64 = 1.054_571_817e-34;

/// Largest coherent amplitude accepted by [`coherent_product_amplitudes`].
pub const WEAK_FIELD_LIMIT: f64 = 0.3;

/// Tolerance used to decide whether detunings take their self-Kerr
/// cancelling values.
const DETUNING_TOL: f64 = 1e-12;

/// Rates and couplings of the optomechanical system, in units where `ħ = 1`.
///
/// `kappa1`, `kappa2` are the cavity energy decay rates appearing in the
/// dissipator `(κ/2)(2aρa† − a†aρ − ρa†a)`. The mechanical damping rate is
/// derived as `omega_m / q_m`; `q_m = ∞` switches mechanical damping off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub g1: f64,
    pub g2: f64,
    pub omega_m: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub q_m: f64,
    pub nbar: f64,
}

impl SystemParams {
    /// Lossless system at zero temperature with detunings `Δ_j = g_j²/ω_m`.
    pub fn new(g1: f64, g2: f64) -> Self {
        Self {
            g1,
            g2,
            omega_m: 1.0,
            delta1: g1 * g1,
            delta2: g2 * g2,
            kappa1: 0.0,
            kappa2: 0.0,
            q_m: f64::INFINITY,
            nbar: 0.0,
        }
    }

    /// Couplings `g1 = g2 = ω_m/2`, satisfying `g1 g2 = ω_m²/4`.
    pub fn ideal() -> Self {
        Self::new(0.5, 0.5)
    }

    pub fn with_nbar(mut self, nbar: f64) -> Self {
        self.nbar = nbar;
        self
    }

    pub fn with_losses(mut self, kappa1: f64, kappa2: f64, q_m: f64) -> Self {
        self.kappa1 = kappa1;
        self.kappa2 = kappa2;
        self.q_m = q_m;
        self
    }

    pub fn with_detunings(mut self, delta1: f64, delta2: f64) -> Self {
        self.delta1 = delta1;
        self.delta2 = delta2;
        self
    }

    /// Reset the detunings to the self-Kerr cancelling choice
    /// `Δ_j = g_j²/ω_m`.
    pub fn with_default_detunings(mut self) -> Self {
        self.delta1 = self.g1 * self.g1 / self.omega_m;
        self.delta2 = self.g2 * self.g2 / self.omega_m;
        self
    }

    /// Mechanical damping rate `γ_m = ω_m / Q_m`.
    pub fn gamma_m(&self) -> f64 {
        self.omega_m / self.q_m
    }

    pub fn uses_default_detunings(&self) -> bool {
        (self.delta1 - self.g1 * self.g1 / self.omega_m).abs() <= DETUNING_TOL
            && (self.delta2 - self.g2 * self.g2 / self.omega_m).abs() <= DETUNING_TOL
    }

    pub fn is_lossless(&self) -> bool {
        self.kappa1 == 0.0 && self.kappa2 == 0.0 && self.gamma_m() == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.g1, self.g2, self.omega_m, self.delta1, self.delta2];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "couplings, frequency and detunings must be finite".into(),
            ));
        }
        if !(self.omega_m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega_m must be positive, got {}",
                self.omega_m
            )));
        }
        for (name, v) in [
            ("g1", self.g1),
            ("g2", self.g2),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("nbar", self.nbar),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if !(self.q_m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "q_m must be positive, got {}",
                self.q_m
            )));
        }
        Ok(())
    }
}

/// Amplitudes `α_k` of a two-qubit input state in the logical basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitAmplitudes {
    alpha: [C64; 4],
}

impl QubitAmplitudes {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(alpha: [C64; 4]) -> Result<Self> {
        let norm: f64 = alpha.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::InvalidState(format!(
                "amplitudes must be normalized, got Σ|α|² = {norm}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn from_real(alpha: [f64; 4]) -> Result<Self> {
        Self::new(alpha.map(|a| C64::new(a, 0.0)))
    }

    /// Rescale arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(alpha: [C64; 4]) -> Result<Self> {
        let norm = alpha.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Self::new(alpha.map(|a| a / norm))
    }

    pub fn basis(k: usize) -> Result<Self> {
        if k > 3 {
            return Err(Error::IndexOutOfRange(k));
        }
        let mut alpha = [C64::new(0.0, 0.0); 4];
        alpha[k] = C64::new(1.0, 0.0);
        Ok(Self { alpha })
    }

    pub fn as_array(&self) -> &[C64; 4] {
        &self.alpha
    }

    /// Amplitudes reordered to the Kronecker cavity ordering
    /// `(|00⟩, |01⟩, |10⟩, |11⟩)`.
    pub fn to_kronecker(&self) -> [C64; 4] {
        let mut out = [C64::new(0.0, 0.0); 4];
        for (k, &a) in self.alpha.iter().enumerate() {
            out[LOGICAL_TO_OPTICAL[k]] = a;
        }
        out
    }
}

impl std::ops::Index<usize> for QubitAmplitudes {
    type Output = C64;
    fn index(&self, k: usize) -> &C64 {
        &self.alpha[k]
    }
}

/// Rotating-frame Hamiltonian
/// `H = Δ₁n̂₁ + Δ₂n̂₂ + ω_m b†b + (g₁n̂₁ + g₂n̂₂)(b + b†)`.
pub fn build_hamiltonian(params: &SystemParams, layout: &SpaceLayout) -> Result<Op> {
    let mech = layout.require_gate()?;
    let n1 = embed(&number(2)?, 0, layout)?;
    let n2 = embed(&number(2)?, 1, layout)?;
    let b = embed(&annihilation(mech)?, 2, layout)?;
    let bd = b.dagger();
    let nb = &bd * &b;
    let x = &b + &bd;
    let re = |v: f64| C64::new(v, 0.0);

    let optical = &n1.scale(re(params.delta1)) + &n2.scale(re(params.delta2));
    let coupling = &n1.scale(re(params.g1)) + &n2.scale(re(params.g2));
    let h = &(&optical + &nb.scale(re(params.omega_m))) + &(&coupling * &x);
    Ok(h)
}

/// Optical part of the logical basis state `|k⟩` as a 4-vector in the
/// Kronecker cavity ordering.
pub fn logical_state(k: usize) -> Result<DVector<C64>> {
    if k > 3 {
        return Err(Error::IndexOutOfRange(k));
    }
    let mut v = DVector::zeros(4);
    v[LOGICAL_TO_OPTICAL[k]] = C64::new(1.0, 0.0);
    Ok(v)
}

/// `|k⟩⟨l| ⊗ mech` on the gate layout.
pub fn logical_block(k: usize, l: usize, mech: &DensityMatrix) -> Result<DensityMatrix> {
    let ket = logical_state(k)?;
    let bra = logical_state(l)?;
    let optical = DensityMatrix::new(SpaceLayout::new(vec![2, 2])?, ket * bra.adjoint(), k == l)?;
    optical.kron(mech)
}

/// `|ψ⟩⟨ψ| ⊗ mech` for a two-qubit input `ψ`.
pub fn input_state(alpha: &QubitAmplitudes, mech: &DensityMatrix) -> Result<DensityMatrix> {
    let psi = DVector::from_row_slice(&alpha.to_kronecker());
    DensityMatrix::from_pure(SpaceLayout::new(vec![2, 2])?, &psi)?.kron(mech)
}

/// Target of the π phase gate: `(α₀, α₁, α₂, −α₃)` in logical ordering.
pub fn target_state(alpha: &QubitAmplitudes) -> [C64; 4] {
    let a = alpha.as_array();
    [a[0], a[1], a[2], -a[3]]
}

/// Interaction time giving a conditional phase of π:
/// `t_π = π ω_m / (2 g₁ g₂)`.
pub fn t_pi(params: &SystemParams) -> Result<f64> {
    let prod = params.g1 * params.g2;
    if !(prod > 0.0) {
        return Err(Error::UndefinedGateTime(prod));
    }
    Ok(PI * params.omega_m / (2.0 * prod))
}

/// `g₁g₂ − ω_m²/4`; zero exactly when the gate time `t_π` is also a full
/// mechanical period.
pub fn ideal_condition_residual(params: &SystemParams) -> f64 {
    params.g1 * params.g2 - params.omega_m * params.omega_m / 4.0
}

/// Intracavity coherent amplitude for a weak drive, in SI units:
/// `α = √(2Pκ / [ħω_L(κ² + Δ²)])`.
pub fn drive_amplitude(power: f64, kappa: f64, detuning: f64, omega_l: f64) -> Result<f64> {
    if !(power >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "power must be nonnegative, got {power}"
        )));
    }
    if !(kappa > 0.0) || !(omega_l > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa and omega_L must be positive, got {kappa}, {omega_l}"
        )));
    }
    Ok((2.0 * power * kappa / (HBAR_SI * omega_l * (kappa * kappa + detuning * detuning))).sqrt())
}

/// Single-photon coupling `g = (dω/dx) x_zpf` with `x_zpf = √(ħ/2mω_m)`,
/// in SI units.
pub fn coupling_from_zpf(dw_dx: f64, mass: f64, omega_m: f64) -> Result<f64> {
    if !(mass > 0.0) || !(omega_m > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mass and omega_m must be positive, got {mass}, {omega_m}"
        )));
    }
    Ok(dw_dx * (HBAR_SI / (2.0 * mass * omega_m)).sqrt())
}

/// Two weak coherent states truncated to the qubit subspace:
/// `(|0⟩ + α_d1|1⟩)₁(|0⟩ + α_d2|1⟩)₂`, normalized.
///
/// In logical ordering the unnormalized amplitudes are
/// `(1, α_d1, α_d2, α_d1 α_d2)`.
pub fn coherent_product_amplitudes(alpha_d1: C64, alpha_d2: C64) -> Result<QubitAmplitudes> {
    for a in [alpha_d1, alpha_d2] {
        if a.norm() >= WEAK_FIELD_LIMIT {
            return Err(Error::ApproximationDomain(a.norm(), WEAK_FIELD_LIMIT));
        }
    }
    QubitAmplitudes::normalized([C64::new(1.0, 0.0), alpha_d1, alpha_d2, alpha_d1 * alpha_d2])
}

/// Photon-number-conditioned displacement `Σ_k |k⟩⟨k| ⊗ D(f_k)` with
/// `f_k = (g₁n₁ + g₂n₂)/ω_m`, on the gate layout.
pub fn polaron_displacement(params: &SystemParams, layout: &SpaceLayout) -> Result<Op> {
    let mech = layout.require_gate()?;
    let mut m = DMatrix::zeros(4 * mech, 4 * mech);
    for o in 0..4 {
        let (n1, n2) = (o / 2, o % 2);
        let f = (params.g1 * n1 as f64 + params.g2 * n2 as f64) / params.omega_m;
        let d = crate::operators::displacement(f, mech)?;
        m.view_mut((o * mech, o * mech), (mech, mech))
            .copy_from(d.matrix());
    }
    Op::new(layout.clone(), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn hamiltonian_is_hermitian_and_conserves_photons() {
        let layout = SpaceLayout::gate(10).unwrap();
        let p = SystemParams::new(0.37, 0.61);
        let h = build_hamiltonian(&p, &layout).unwrap();
        assert!(h.hermiticity_error() < 1e-12);
        for mode in 0..2 {
            let n = embed(&number(2).unwrap(), mode, &layout).unwrap();
            assert!(h.commutator(&n).max_abs() < 1e-12);
        }
    }

    #[test]
    fn vacuum_block_is_free_oscillator() {
        let mech = 9;
        let layout = SpaceLayout::gate(mech).unwrap();
        let h = build_hamiltonian(&SystemParams::ideal(), &layout).unwrap();
        let block = h.matrix().view((0, 0), (mech, mech)).into_owned();
        let mut eig: Vec<f64> = SymmetricEigen::new(block)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eig.sort_by(f64::total_cmp);
        for (k, e) in eig.iter().enumerate() {
            assert!((e - k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn uncoupled_hamiltonian_has_no_optical_part() {
        let mech = 5;
        let layout = SpaceLayout::gate(mech).unwrap();
        let p = SystemParams::new(0.0, 0.0).with_detunings(0.0, 0.0);
        let h = build_hamiltonian(&p, &layout).unwrap();
        for o in 0..4 {
            for p in 0..mech {
                for q in 0..mech {
                    let i = o * mech + p;
                    let expect = if p == q { p as f64 } else { 0.0 };
                    assert!((h.matrix()[(i, o * mech + q)] - c(expect)).norm() < 1e-14);
                }
            }
        }
        // and block diagonal in the optical index
        for i in 0..4 * mech {
            for j in 0..4 * mech {
                if i / mech != j / mech {
                    assert_eq!(h.matrix()[(i, j)], c(0.0));
                }
            }
        }
    }

    /// Largest deviation of `D H D†` from `H_opt + ω_m b†b` over the lowest
    /// `cut` mechanical levels of every photon-number block.
    fn polaron_residual(p: &SystemParams, mech: usize, cut: usize) -> f64 {
        let layout = SpaceLayout::gate(mech).unwrap();
        let h = build_hamiltonian(p, &layout).unwrap();
        let d = polaron_displacement(p, &layout).unwrap();
        let transformed = &(&d * &h) * &d.dagger();
        let mut worst: f64 = 0.0;
        for o in 0..4 {
            // Δ₁n₁ + Δ₂n₂ − (g₁n₁ + g₂n₂)²/ω_m
            let (n1, n2) = ((o / 2) as f64, (o % 2) as f64);
            let e_opt = p.delta1 * n1 + p.delta2 * n2 - (p.g1 * n1 + p.g2 * n2).powi(2);
            for r in 0..cut {
                for s in 0..cut {
                    let expect = if r == s { e_opt + r as f64 } else { 0.0 };
                    let got = transformed.matrix()[(o * mech + r, o * mech + s)];
                    worst = worst.max((got - c(expect)).norm());
                }
            }
        }
        worst
    }

    #[test]
    fn polaron_transform_separates_hamiltonian() {
        let weak = SystemParams::new(0.2, 0.15);
        // on (2,2,12) only levels well below the edge are exact
        assert!(polaron_residual(&weak, 12, 4) < 1e-8);
        // f₃ = 1 at ideal couplings needs more headroom above the checked levels
        assert!(polaron_residual(&SystemParams::ideal(), 40, 12) < 1e-8);
        // |1⟩₁|1⟩₂ carries −2 g₁g₂/ω_m = −1/2
        let p = SystemParams::ideal();
        let e3 = p.delta1 + p.delta2 - (p.g1 + p.g2).powi(2);
        assert!((e3 + 0.5).abs() < 1e-15);
    }

    #[test]
    fn logical_states() {
        assert!(matches!(logical_state(4), Err(Error::IndexOutOfRange(4))));
        // k=1 is |1⟩₁|0⟩₂, Kronecker index 2
        let v = logical_state(1).unwrap();
        assert_eq!(v[2], c(1.0));
        assert_eq!(logical_state(0).unwrap()[0], c(1.0));
        assert_eq!(logical_state(3).unwrap()[3], c(1.0));
        assert_eq!(logical_state(2).unwrap()[1], c(1.0));
    }

    #[test]
    fn target_states() {
        let t = target_state(&QubitAmplitudes::basis(0).unwrap());
        assert_eq!(t, [c(1.0), c(0.0), c(0.0), c(0.0)]);
        let t = target_state(&QubitAmplitudes::basis(3).unwrap());
        assert_eq!(t, [c(0.0), c(0.0), c(0.0), c(-1.0)]);
        let u = QubitAmplitudes::from_real([0.5; 4]).unwrap();
        assert_eq!(target_state(&u), [c(0.5), c(0.5), c(0.5), c(-0.5)]);
        assert!(matches!(
            QubitAmplitudes::from_real([0.5, 0.5, 0.5, 0.6]),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn gate_time() {
        let tp = t_pi(&SystemParams::ideal()).unwrap();
        assert!((tp - 2.0 * PI).abs() < 1e-15);
        let tp1 = t_pi(&SystemParams::new(1.0, 1.0)).unwrap();
        assert!((tp1 - PI / 2.0).abs() < 1e-15);
        let base = t_pi(&SystemParams::new(0.3, 0.7)).unwrap();
        let doubled = t_pi(&SystemParams::new(0.6, 1.4)).unwrap();
        assert!((doubled - base / 4.0).abs() < 1e-15);
        assert!(matches!(
            t_pi(&SystemParams::new(0.0, 0.5)),
            Err(Error::UndefinedGateTime(_))
        ));
    }

    #[test]
    fn ideal_residual() {
        assert_eq!(ideal_condition_residual(&SystemParams::ideal()), 0.0);
        assert_eq!(ideal_condition_residual(&SystemParams::new(1.0, 0.25)), 0.0);
        assert_eq!(ideal_condition_residual(&SystemParams::new(1.0, 1.0)), 0.75);
    }

    #[test]
    fn residual_zero_implies_pi_phase_at_one_period() {
        for &(g1, g2) in &[(0.5, 0.5), (1.0, 0.25), (0.2, 1.25)] {
            let p = SystemParams::new(g1, g2);
            assert!(ideal_condition_residual(&p).abs() < 1e-15);
            let tp = t_pi(&p).unwrap();
            assert!((2.0 * g1 * g2 * tp - PI).abs() < 1e-12);
            assert!((tp - 2.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn drive_amplitudes() {
        assert_eq!(drive_amplitude(0.0, 1e6, 0.0, 1e15).unwrap(), 0.0);
        let (p, k, wl) = (2e-15, 3e6, 1.7e15);
        let expect = (2.0 * p / (HBAR_SI * wl * k)).sqrt();
        assert!((drive_amplitude(p, k, 0.0, wl).unwrap() / expect - 1.0).abs() < 1e-14);
        // 40-digit evaluation of the same formula
        let k = 2.0 * PI * 1e6;
        let v = drive_amplitude(1e-15, k, k, 2.0 * PI * 282e12).unwrap();
        assert!((v / 0.029_184_852_120_114_117 - 1.0).abs() < 1e-13);
        assert!(drive_amplitude(1e-15, 0.0, 0.0, 1.0).is_err());
        assert!(drive_amplitude(1e-15, 1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn zero_point_coupling() {
        assert_eq!(coupling_from_zpf(0.0, 1e-15, 1e9).unwrap(), 0.0);
        let g = coupling_from_zpf(1e19, 1e-15, 3e10).unwrap();
        let g4 = coupling_from_zpf(1e19, 4e-15, 3e10).unwrap();
        assert!((g4 - g / 2.0).abs() < 1e-12 * g);
        // 40-digit evaluation: 2π·10 GHz/nm, 1 fg... (1e-15 kg), ω_m = 2π·5 GHz
        let g = coupling_from_zpf(2.0 * PI * 10e9 / 1e-9, 1e-15, 2.0 * PI * 5e9).unwrap();
        assert!((g / 81_400.676_569_301_8 - 1.0).abs() < 1e-13);
        assert!(coupling_from_zpf(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn coherent_products() {
        let z = C64::new(0.0, 0.0);
        let a = coherent_product_amplitudes(z, z).unwrap();
        assert_eq!(a.as_array(), &[c(1.0), z, z, z]);

        let a = coherent_product_amplitudes(c(0.1), z).unwrap();
        let n = (1.0f64 + 0.01).sqrt();
        assert!((a[0] - c(1.0 / n)).norm() < 1e-15);
        assert!((a[1] - c(0.1 / n)).norm() < 1e-15);
        assert_eq!(a[2], z);
        // Kronecker ordering (|00⟩, |01⟩, |10⟩, |11⟩) puts α_d1 third.
        assert!((a.to_kronecker()[2] - c(0.1 / n)).norm() < 1e-15);

        let a = coherent_product_amplitudes(c(0.1), c(0.1)).unwrap();
        assert!((a[3] / a[0] - c(0.01)).norm() < 1e-15);

        assert!(matches!(
            coherent_product_amplitudes(c(0.5), z),
            Err(Error::ApproximationDomain(..))
        ));
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::ideal().validate().is_ok());
        assert!(SystemParams::ideal().with_nbar(-1.0).validate().is_err());
        assert!(SystemParams::ideal()
            .with_losses(-0.1, 0.0, 1e6)
            .validate()
            .is_err());
        assert!(SystemParams::ideal()
            .with_losses(0.0, 0.0, 0.0)
            .validate()
            .is_err());
        let p = SystemParams::ideal().with_losses(0.01, 0.01, 1e6);
        assert!((p.gamma_m() - 1e-6).abs() < 1e-20);
        assert_eq!(SystemParams::ideal().gamma_m(), 0.0);
        assert!(p.uses_default_detunings());
        assert!(!p.with_detunings(0.0, 0.0).uses_default_detunings());
    }
}
