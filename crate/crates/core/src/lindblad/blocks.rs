//! Photon-number block representation of gate-layout states.
//!
//! A `(2, 2, N)` operator splits into sixteen `N×N` mechanical blocks
//! `R_{mn} = ⟨m|ρ|n⟩` labelled by logical optical indices. The Hamiltonian is
//! block diagonal in the photon numbers and the only optical dissipators are
//! cavity decays, so the set of nonzero blocks reachable from an initial
//! state is its closure under lowering both labels by one photon in the same
//! mode. Evolving only that support keeps every right-hand-side evaluation at
//! `O(N²)` per block, since all mechanical operators are tridiagonal.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::operators::{logical_photons, DensityMatrix, SpaceLayout, LOGICAL_TO_OPTICAL};
use crate::C64;

/// Logical label with one photon removed from cavity `mode` (0 or 1), if
/// that cavity is occupied.
pub(crate) fn lower(k: usize, mode: usize) -> Option<usize> {
    match (mode, k) {
        (0, 1) => Some(0),
        (0, 3) => Some(2),
        (1, 2) => Some(0),
        (1, 3) => Some(1),
        _ => None,
    }
}

/// Closure of `seed` under simultaneous lowering of both labels, in
/// deterministic order.
pub fn support_closure(seed: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut present = [[false; 4]; 4];
    let mut stack: Vec<(usize, usize)> = seed.to_vec();
    while let Some((m, n)) = stack.pop() {
        if present[m][n] {
            continue;
        }
        present[m][n] = true;
        for mode in 0..2 {
            if let (Some(a), Some(b)) = (lower(m, mode), lower(n, mode)) {
                stack.push((a, b));
            }
        }
    }
    let mut out = Vec::new();
    for (m, row) in present.iter().enumerate() {
        for (n, &p) in row.iter().enumerate() {
            if p {
                out.push((m, n));
            }
        }
    }
    out
}

/// A gate-layout operator stored as its nonzero mechanical blocks.
///
/// Blocks are row-major `N×N` slices of one contiguous buffer so that the
/// integrators can treat the state as a flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockState {
    mech_dim: usize,
    support: Vec<(usize, usize)>,
    index: [[Option<usize>; 4]; 4],
    data: Vec<C64>,
}

impl BlockState {
    /// Zero state on the closure of `seed`.
    pub fn zeros(mech_dim: usize, seed: &[(usize, usize)]) -> Result<Self> {
        if mech_dim < 2 {
            return Err(Error::InvalidDimension(format!(
                "mechanical dimension must be at least 2, got {mech_dim}"
            )));
        }
        if let Some(&(m, n)) = seed.iter().find(|&&(m, n)| m > 3 || n > 3) {
            return Err(Error::IndexOutOfRange(m.max(n)));
        }
        let support = support_closure(seed);
        let mut index = [[None; 4]; 4];
        for (i, &(m, n)) in support.iter().enumerate() {
            index[m][n] = Some(i);
        }
        let data = vec![C64::new(0.0, 0.0); support.len() * mech_dim * mech_dim];
        Ok(Self {
            mech_dim,
            support,
            index,
            data,
        })
    }

    /// `|k⟩⟨l| ⊗ mech` without materializing the full matrix.
    pub fn logical_block(k: usize, l: usize, mech: &DMatrix<C64>) -> Result<Self> {
        let n = mech.nrows();
        if mech.ncols() != n {
            return Err(Error::InvalidDimension(
                "mechanical factor must be square".into(),
            ));
        }
        let mut s = Self::zeros(n, &[(k, l)])?;
        s.block_from_matrix(k, l, mech);
        Ok(s)
    }

    /// `|ψ⟩⟨ψ| ⊗ mech` for logical amplitudes `alpha`.
    pub fn pure_input(alpha: &[C64; 4], mech: &DMatrix<C64>) -> Result<Self> {
        let seed: Vec<(usize, usize)> = (0..4)
            .flat_map(|k| (0..4).map(move |l| (k, l)))
            .filter(|&(k, l)| alpha[k].norm() > 0.0 && alpha[l].norm() > 0.0)
            .collect();
        let mut s = Self::zeros(mech.nrows(), &seed)?;
        for &(k, l) in &seed {
            s.block_from_matrix(k, l, &(mech * (alpha[k] * alpha[l].conj())));
        }
        Ok(s)
    }

    fn block_from_matrix(&mut self, k: usize, l: usize, m: &DMatrix<C64>) {
        let n = self.mech_dim;
        let blk = self.block_mut(k, l).expect("block in support");
        for p in 0..n {
            for q in 0..n {
                blk[p * n + q] = m[(p, q)];
            }
        }
    }

    /// Split a dense gate-layout matrix into blocks.
    pub fn from_dense(rho: &DensityMatrix) -> Result<Self> {
        let n = rho.layout().require_gate()?;
        let m = rho.matrix();
        let block_of = |k: usize, l: usize| {
            m.view(
                (LOGICAL_TO_OPTICAL[k] * n, LOGICAL_TO_OPTICAL[l] * n),
                (n, n),
            )
        };
        let seed: Vec<(usize, usize)> = (0..4)
            .flat_map(|k| (0..4).map(move |l| (k, l)))
            .filter(|&(k, l)| block_of(k, l).iter().any(|z| z.norm() > 0.0))
            .collect();
        let mut s = Self::zeros(n, &seed)?;
        for &(k, l) in &s.support.clone() {
            s.block_from_matrix(k, l, &block_of(k, l).into_owned());
        }
        Ok(s)
    }

    pub fn to_dense(&self, hermitian: bool) -> Result<DensityMatrix> {
        let n = self.mech_dim;
        let mut m = DMatrix::zeros(4 * n, 4 * n);
        for &(k, l) in &self.support {
            let blk = self.block(k, l).expect("support block");
            let (r0, c0) = (LOGICAL_TO_OPTICAL[k] * n, LOGICAL_TO_OPTICAL[l] * n);
            for p in 0..n {
                for q in 0..n {
                    m[(r0 + p, c0 + q)] = blk[p * n + q];
                }
            }
        }
        DensityMatrix::new(SpaceLayout::gate(n)?, m, hermitian)
    }

    pub fn mech_dim(&self) -> usize {
        self.mech_dim
    }

    pub fn support(&self) -> &[(usize, usize)] {
        &self.support
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn block(&self, m: usize, n: usize) -> Option<&[C64]> {
        let nn = self.mech_dim * self.mech_dim;
        self.index
            .get(m)?
            .get(n)?
            .map(|i| &self.data[i * nn..(i + 1) * nn])
    }

    pub fn block_mut(&mut self, m: usize, n: usize) -> Option<&mut [C64]> {
        let nn = self.mech_dim * self.mech_dim;
        let i = (*self.index.get(m)?.get(n)?)?;
        Some(&mut self.data[i * nn..(i + 1) * nn])
    }

    /// Same support and dimension, different buffer.
    pub(crate) fn with_data(&self, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            mech_dim: self.mech_dim,
            support: self.support.clone(),
            index: self.index,
            data,
        }
    }

    /// Mechanical partial trace: the 4×4 logical matrix `Tr_b ⟨m|ρ|n⟩`.
    pub fn reduced_optical(&self) -> [[C64; 4]; 4] {
        let n = self.mech_dim;
        let mut out = [[C64::new(0.0, 0.0); 4]; 4];
        for &(k, l) in &self.support {
            let blk = self.block(k, l).expect("support block");
            out[k][l] = (0..n).map(|p| blk[p * n + p]).sum();
        }
        out
    }

    pub fn trace(&self) -> C64 {
        let r = self.reduced_optical();
        (0..4).map(|k| r[k][k]).sum()
    }

    /// `‖ρ − ρ†‖_max`, treating blocks outside the support as zero.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.mech_dim;
        let zero = C64::new(0.0, 0.0);
        let mut err: f64 = 0.0;
        for &(k, l) in &self.support {
            let a = self.block(k, l).expect("support block");
            let b = self.block(l, k);
            for p in 0..n {
                for q in 0..n {
                    let other = b.map_or(zero, |b| b[q * n + p]);
                    err = err.max((a[p * n + q] - other.conj()).norm());
                }
            }
        }
        err
    }

    /// Sum of `|⟨p|R|p⟩|` over the top `levels` mechanical levels, maximized
    /// over support blocks.
    pub fn edge_population(&self, levels: usize) -> f64 {
        let n = self.mech_dim;
        let start = n.saturating_sub(levels);
        self.support
            .iter()
            .map(|&(k, l)| {
                let blk = self.block(k, l).expect("support block");
                (start..n).map(|p| blk[p * n + p].norm()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Coefficients of a single support block's equation of motion.
#[derive(Debug, Clone)]
struct BlockTerms {
    /// Constant diagonal part: `−i(E_m − E_n) − decay`.
    diag: C64,
    /// `−i λ_m`, acting on the row (left) index.
    left_hop: C64,
    /// `+i λ_n`, acting on the column (right) index.
    right_hop: C64,
    /// Jump feeds `(source block index, rate)`.
    feeds: Vec<(usize, f64)>,
}

/// Block-structured right-hand side of the master equation on the gate
/// layout.
///
/// Equivalent to [`super::lindblad_rhs`] restricted to the support of a
/// [`BlockState`].
#[derive(Debug, Clone)]
pub struct BlockLindblad {
    n: usize,
    sqrt: Vec<f64>,
    /// Per mechanical level: `−iωp − γ(n̄+1)p/2 − γn̄ d_p/2` (row) and the
    /// conjugate-frequency analogue for columns.
    row_diag: Vec<C64>,
    col_diag: Vec<C64>,
    down: f64,
    up: f64,
    terms: Vec<BlockTerms>,
    spectral_radius: f64,
}

/// Spectrum of the truncated mechanical Hamiltonian `ω b†b + λ(b + b†)`.
fn mechanical_spectrum(omega: f64, hop: f64, n: usize) -> (f64, f64) {
    let h = DMatrix::<f64>::from_fn(n, n, |p, q| {
        if p == q {
            omega * p as f64
        } else if p.abs_diff(q) == 1 {
            hop * (p.max(q) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = h.symmetric_eigenvalues();
    (eig.min(), eig.max())
}

impl BlockLindblad {
    pub fn new(params: &SystemParams, state: &BlockState) -> Result<Self> {
        params.validate()?;
        let n = state.mech_dim;
        let w = params.omega_m;
        let gamma = params.gamma_m();
        let down = gamma * (params.nbar + 1.0);
        let up = gamma * params.nbar;
        let sqrt: Vec<f64> = (0..=n)
            .map(|j| if j < n { (j as f64).sqrt() } else { 0.0 })
            .collect();
        // diagonal of the truncated b b†
        let bbd = |p: usize| if p + 1 < n { (p + 1) as f64 } else { 0.0 };
        let row_diag = (0..n)
            .map(|p| C64::new(-0.5 * down * p as f64 - 0.5 * up * bbd(p), -w * p as f64))
            .collect();
        let col_diag = (0..n)
            .map(|q| C64::new(-0.5 * down * q as f64 - 0.5 * up * bbd(q), w * q as f64))
            .collect();

        let energy = |k: usize| {
            let (n1, n2) = logical_photons(k);
            params.delta1 * n1 as f64 + params.delta2 * n2 as f64
        };
        let hop = |k: usize| {
            let (n1, n2) = logical_photons(k);
            params.g1 * n1 as f64 + params.g2 * n2 as f64
        };
        let kappa = [params.kappa1, params.kappa2];
        let mut spectra: [Option<(f64, f64)>; 4] = [None; 4];
        for &(m, l) in &state.support {
            for k in [m, l] {
                if spectra[k].is_none() {
                    let (lo, hi) = mechanical_spectrum(w, hop(k), n);
                    spectra[k] = Some((lo + energy(k), hi + energy(k)));
                }
            }
        }
        // Coherent part from exact sector spectra; dissipative part bounded
        // by row sums of the mechanical dissipator.
        let spectral_radius = state
            .support
            .iter()
            .map(|&(m, l)| {
                let (lo_m, hi_m) = spectra[m].expect("filled above");
                let (lo_l, hi_l) = spectra[l].expect("filled above");
                let im = (hi_m - lo_l).max(hi_l - lo_m);
                let (pm, pl) = (logical_photons(m), logical_photons(l));
                let re = 0.5 * (kappa[0] * (pm.0 + pl.0) as f64 + kappa[1] * (pm.1 + pl.1) as f64)
                    + 2.0 * (down + up) * n as f64;
                im.hypot(re)
            })
            .fold(0.0, f64::max);
        let terms = state
            .support
            .iter()
            .map(|&(m, l)| {
                let (pm, pl) = (logical_photons(m), logical_photons(l));
                let decay =
                    0.5 * (kappa[0] * (pm.0 + pl.0) as f64 + kappa[1] * (pm.1 + pl.1) as f64);
                let mut feeds = Vec::new();
                // a_j ρ a_j† moves ⟨m+e_j|ρ|l+e_j⟩ into ⟨m|·|l⟩
                for mode in 0..2 {
                    if kappa[mode] == 0.0 {
                        continue;
                    }
                    let raised = |k: usize| (0..4).find(|&r| lower(r, mode) == Some(k));
                    if let (Some(a), Some(b)) = (raised(m), raised(l)) {
                        if let Some(src) = state.index[a][b] {
                            feeds.push((src, kappa[mode]));
                        }
                    }
                }
                BlockTerms {
                    diag: C64::new(-decay, -(energy(m) - energy(l))),
                    left_hop: C64::new(0.0, -hop(m)),
                    right_hop: C64::new(0.0, hop(l)),
                    feeds,
                }
            })
            .collect();
        Ok(Self {
            n,
            sqrt,
            row_diag,
            col_diag,
            down,
            up,
            terms,
            spectral_radius,
        })
    }

    /// Upper bound on the modulus of the generator's eigenvalues.
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// Number of complex amplitudes in a compatible state buffer.
    pub fn len(&self) -> usize {
        self.terms.len() * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `dy = L(y)` for flat block buffers.
    pub fn apply(&self, y: &[C64], dy: &mut [C64]) {
        let n = self.n;
        let nn = n * n;
        let s = &self.sqrt;
        let zero = C64::new(0.0, 0.0);
        let zeros = vec![zero; n];
        for (bi, term) in self.terms.iter().enumerate() {
            let r = &y[bi * nn..(bi + 1) * nn];
            let d = &mut dy[bi * nn..(bi + 1) * nn];
            for p in 0..n {
                let row = &r[p * n..(p + 1) * n];
                // absent neighbours read as zero rows so the loop is branch-free
                let next = if p + 1 < n {
                    &r[(p + 1) * n..(p + 2) * n]
                } else {
                    &zeros[..]
                };
                let prev = if p > 0 {
                    &r[(p - 1) * n..p * n]
                } else {
                    &zeros[..]
                };
                let out = &mut d[p * n..(p + 1) * n];
                let rd = term.diag + self.row_diag[p];
                let (sp, sp1) = (s[p], s[p + 1]);
                // −iλ_m (b + b†) R
                let (hop_next, hop_prev) = (term.left_hop * sp1, term.left_hop * sp);
                // b R b† and b† R b
                let (jump_down, jump_up) = (self.down * sp1, self.up * sp);
                let rh = term.right_hop;
                let entry = |q: usize| {
                    let mut acc =
                        (rd + self.col_diag[q]) * row[q] + hop_next * next[q] + hop_prev * prev[q];
                    // +iλ_n R (b + b†)
                    if q > 0 {
                        acc += rh * (row[q - 1] * s[q]) + prev[q - 1] * (jump_up * s[q]);
                    }
                    if q + 1 < n {
                        acc += rh * (row[q + 1] * s[q + 1]) + next[q + 1] * (jump_down * s[q + 1]);
                    }
                    acc
                };
                if n < 3 {
                    for (q, o) in out.iter_mut().enumerate() {
                        *o = entry(q);
                    }
                    continue;
                }
                out[0] = entry(0);
                out[n - 1] = entry(n - 1);
                let m = n - 2;
                let (x_m, x_0, x_p) = (&row[..m], &row[1..m + 1], &row[2..]);
                let (nx_0, nx_p) = (&next[1..m + 1], &next[2..]);
                let (pv_m, pv_0) = (&prev[..m], &prev[1..m + 1]);
                let (s_0, s_p) = (&s[1..m + 1], &s[2..m + 2]);
                let cd = &self.col_diag[1..m + 1];
                let o = &mut out[1..m + 1];
                for j in 0..m {
                    o[j] = (rd + cd[j]) * x_0[j]
                        + rh * (x_m[j] * s_0[j] + x_p[j] * s_p[j])
                        + hop_next * nx_0[j]
                        + hop_prev * pv_0[j]
                        + nx_p[j] * (jump_down * s_p[j])
                        + pv_m[j] * (jump_up * s_0[j]);
                }
            }
            for &(src, rate) in &term.feeds {
                let from = &y[src * nn..(src + 1) * nn];
                for (o, f) in d.iter_mut().zip(from) {
                    *o += f * rate;
                }
            }
        }
    }
}
