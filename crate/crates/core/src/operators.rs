//! Truncated Fock-space linear algebra.
//!
//! All composite spaces use the fixed Kronecker ordering
//! `cavity 1 ⊗ cavity 2 ⊗ mechanical`: the cavity-1 index varies slowest and
//! the mechanical index fastest. Operators are stored densely.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::C64;

/// Tolerance on `‖ρ − ρ†‖_max` for matrices flagged Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Optical Kronecker index (`n1·2 + n2`) of each logical label.
///
/// Logical labels: `0 = |0⟩₁|0⟩₂`, `1 = |1⟩₁|0⟩₂`, `2 = |0⟩₁|1⟩₂`,
/// `3 = |1⟩₁|1⟩₂`.
pub const LOGICAL_TO_OPTICAL: [usize; 4] = [0, 2, 1, 3];

/// Photon numbers `(n1, n2)` carried by logical label `k`.
pub fn logical_photons(k: usize) -> (usize, usize) {
    [(0, 0), (1, 0), (0, 1), (1, 1)][k]
}

/// Per-mode truncation dimensions of a tensor-product space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpaceLayout {
    dims: Vec<usize>,
}

impl SpaceLayout {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::InvalidLayout(format!(
                "expected 1 to 3 modes, got {}",
                dims.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension(format!(
                "every mode dimension must be at least 2, got {d}"
            )));
        }
        Ok(Self { dims })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    /// The gate layout: two qubit-sized cavities and a mechanical mode.
    pub fn gate(mech_dim: usize) -> Result<Self> {
        Self::new(vec![2, 2, mech_dim])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Mechanical dimension of a three-mode layout.
    pub fn mech_dim(&self) -> Option<usize> {
        (self.dims.len() == 3).then(|| self.dims[2])
    }

    /// Errors unless this is a three-mode layout with qubit-sized cavities.
    pub fn require_gate(&self) -> Result<usize> {
        match self.dims.as_slice() {
            [2, 2, m] => Ok(*m),
            _ => Err(Error::InvalidLayout(format!(
                "expected (2, 2, N) layout, got {:?}",
                self.dims
            ))),
        }
    }
}

/// A complex square matrix acting on a truncated tensor-product space.
#[derive(Debug, Clone, PartialEq)]
pub struct Op {
    layout: SpaceLayout,
    matrix: DMatrix<C64>,
}

impl Op {
    pub fn new(layout: SpaceLayout, matrix: DMatrix<C64>) -> Result<Self> {
        let n = layout.total_dim();
        if matrix.shape() != (n, n) {
            return Err(Error::InvalidDimension(format!(
                "matrix shape {:?} does not match layout dimension {n}",
                matrix.shape()
            )));
        }
        Ok(Self { layout, matrix })
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        let n = layout.total_dim();
        Self {
            layout,
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(layout: SpaceLayout) -> Self {
        let n = layout.total_dim();
        Self {
            layout,
            matrix: DMatrix::zeros(n, n),
        }
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            layout: self.layout.clone(),
            matrix: &self.matrix * s,
        }
    }

    pub fn commutator(&self, other: &Op) -> Self {
        &(self * other) - &(other * self)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    /// Kronecker product `self ⊗ other`, concatenating the layouts.
    pub fn kron(&self, other: &Op) -> Result<Self> {
        let mut dims = self.layout.dims.clone();
        dims.extend_from_slice(&other.layout.dims);
        Op::new(
            SpaceLayout::new(dims)?,
            self.matrix.kronecker(&other.matrix),
        )
    }
}

impl Mul for &Op {
    type Output = Op;
    fn mul(self, rhs: &Op) -> Op {
        assert_eq!(
            self.layout, rhs.layout,
            "layout mismatch in operator product"
        );
        Op {
            layout: self.layout.clone(),
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

impl Add for &Op {
    type Output = Op;
    fn add(self, rhs: &Op) -> Op {
        assert_eq!(self.layout, rhs.layout, "layout mismatch in operator sum");
        Op {
            layout: self.layout.clone(),
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &Op {
    type Output = Op;
    fn sub(self, rhs: &Op) -> Op {
        assert_eq!(
            self.layout, rhs.layout,
            "layout mismatch in operator difference"
        );
        Op {
            layout: self.layout.clone(),
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

/// A density matrix, or a non-Hermitian coherence block `|k⟩⟨l| ⊗ ρ` when
/// `hermitian` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: SpaceLayout,
    matrix: DMatrix<C64>,
    hermitian: bool,
}

impl DensityMatrix {
    pub fn new(layout: SpaceLayout, matrix: DMatrix<C64>, hermitian: bool) -> Result<Self> {
        let n = layout.total_dim();
        if matrix.shape() != (n, n) {
            return Err(Error::InvalidDimension(format!(
                "matrix shape {:?} does not match layout dimension {n}",
                matrix.shape()
            )));
        }
        if hermitian {
            let err = hermiticity_error(&matrix);
            if err > HERMITICITY_TOL {
                return Err(Error::InvalidState(format!(
                    "matrix flagged Hermitian deviates by {err:e}"
                )));
            }
        }
        Ok(Self {
            layout,
            matrix,
            hermitian,
        })
    }

    /// Projector `|ψ⟩⟨ψ|` (no normalization applied).
    pub fn from_pure(layout: SpaceLayout, psi: &DVector<C64>) -> Result<Self> {
        Self::new(layout, psi * psi.adjoint(), true)
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    pub fn dagger(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }

    /// `self ⊗ other`; Hermitian iff both factors are.
    pub fn kron(&self, other: &DensityMatrix) -> Result<Self> {
        let mut dims = self.layout.dims.clone();
        dims.extend_from_slice(&other.layout.dims);
        Ok(Self {
            layout: SpaceLayout::new(dims)?,
            matrix: self.matrix.kronecker(&other.matrix),
            hermitian: self.hermitian && other.hermitian,
        })
    }

    /// Smallest eigenvalue of the Hermitian part `(ρ + ρ†)/2`.
    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    /// Linear combination `a·self + b·other` of matrices on the same layout.
    pub fn combine(&self, a: C64, other: &DensityMatrix, b: C64) -> Result<Self> {
        if self.layout != other.layout {
            return Err(Error::InvalidLayout("layout mismatch".into()));
        }
        let hermitian = self.hermitian && other.hermitian && a.im == 0.0 && b.im == 0.0;
        Ok(Self {
            layout: self.layout.clone(),
            matrix: &self.matrix * a + &other.matrix * b,
            hermitian,
        })
    }
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub(crate) fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut err: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

pub(crate) fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(herm).eigenvalues.min()
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(Error::InvalidDimension(format!(
            "mode dimension must be at least 2, got {dim}"
        )))
    } else {
        Ok(())
    }
}

/// Single-mode identity.
pub fn identity(dim: usize) -> Result<Op> {
    Ok(Op::identity(SpaceLayout::single(dim)?))
}

/// Truncated annihilation operator: `a[n−1, n] = √n`.
pub fn annihilation(dim: usize) -> Result<Op> {
    check_dim(dim)?;
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Op::new(SpaceLayout::single(dim)?, m)
}

/// Truncated creation operator, the adjoint of [`annihilation`].
pub fn creation(dim: usize) -> Result<Op> {
    Ok(annihilation(dim)?.dagger())
}

/// Number operator `diag(0, 1, …, dim−1)`.
pub fn number(dim: usize) -> Result<Op> {
    check_dim(dim)?;
    let m = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            C64::new(i as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Op::new(SpaceLayout::single(dim)?, m)
}

/// Embed a single-mode operator into `layout` at `mode_index`, with the
/// identity on every other factor.
pub fn embed(op: &Op, mode_index: usize, layout: &SpaceLayout) -> Result<Op> {
    if op.layout.n_modes() != 1 {
        return Err(Error::InvalidDimension(
            "only single-mode operators can be embedded".into(),
        ));
    }
    let Some(&target) = layout.dims.get(mode_index) else {
        return Err(Error::InvalidLayout(format!(
            "mode index {mode_index} out of range for {} modes",
            layout.n_modes()
        )));
    };
    if op.dim() != target {
        return Err(Error::InvalidDimension(format!(
            "operator dimension {} does not match mode {mode_index} dimension {target}",
            op.dim()
        )));
    }
    let before: usize = layout.dims[..mode_index].iter().product();
    let after: usize = layout.dims[mode_index + 1..].iter().product();
    let m = DMatrix::<C64>::identity(before, before)
        .kronecker(&op.matrix)
        .kronecker(&DMatrix::<C64>::identity(after, after));
    Op::new(layout.clone(), m)
}

/// Displacement operator `D(f) = exp[f(b† − b)]` for real `f`.
///
/// Computed from the eigendecomposition of the Hermitian generator
/// `G = i(b† − b)`: `D(f) = V exp(−i f Λ) V†`.
pub fn displacement(f: f64, dim: usize) -> Result<Op> {
    check_dim(dim)?;
    let a = annihilation(dim)?.into_matrix();
    let gen = (a.adjoint() - &a) * C64::new(0.0, 1.0);
    let eig = SymmetricEigen::new(gen);
    let phases = DVector::from_iterator(
        dim,
        eig.eigenvalues
            .iter()
            .map(|&lam| C64::new(0.0, -f * lam).exp()),
    );
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    Op::new(SpaceLayout::single(dim)?, scaled * v.adjoint())
}

/// Displacement `D(α) = exp(α b† − α* b)` for complex `α`, obtained by
/// rotating the real displacement `D(|α|)` with `exp(iθ b†b)`.
pub fn displacement_complex(alpha: C64, dim: usize) -> Result<Op> {
    let real = displacement(alpha.norm(), dim)?;
    let theta = alpha.arg();
    let rot: Vec<C64> = (0..dim)
        .map(|n| C64::new(0.0, theta * n as f64).exp())
        .collect();
    let m = DMatrix::from_fn(dim, dim, |i, j| {
        rot[i] * real.matrix[(i, j)] * rot[j].conj()
    });
    Op::new(SpaceLayout::single(dim)?, m)
}

/// Probability of Fock level `n` in a thermal state with mean occupation
/// `nbar`.
pub fn thermal_population(nbar: f64, n: usize) -> f64 {
    if nbar == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let r = nbar / (1.0 + nbar);
    r.powi(n as i32) / (1.0 + nbar)
}

/// Probability weight lost by truncating a thermal state to `dim` levels:
/// `(n̄/(n̄+1))^dim`.
pub fn thermal_tail(nbar: f64, dim: usize) -> f64 {
    if nbar == 0.0 {
        0.0
    } else {
        (nbar / (1.0 + nbar)).powi(dim as i32)
    }
}

/// Thermal state truncated to `dim` levels. The populations are not
/// renormalized; `1 − trace` equals [`thermal_tail`].
pub fn thermal_state(nbar: f64, dim: usize) -> Result<DensityMatrix> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "mean thermal occupation must be finite and nonnegative, got {nbar}"
        )));
    }
    check_dim(dim)?;
    let m = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            C64::new(thermal_population(nbar, i), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    DensityMatrix::new(SpaceLayout::single(dim)?, m, true)
}

/// Trace out the mechanical mode of a `(2, 2, N)` state.
///
/// The result is a 4×4 matrix in the logical basis `|0⟩..|3⟩` (see
/// [`LOGICAL_TO_OPTICAL`]) with a single-register layout `[4]`.
pub fn partial_trace_mechanical(rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.layout.n_modes() != 3 {
        return Err(Error::InvalidLayout(format!(
            "partial trace needs three modes, got {}",
            rho.layout.n_modes()
        )));
    }
    let mech = rho.layout.require_gate()?;
    let m = DMatrix::from_fn(4, 4, |k, l| {
        let (ok, ol) = (LOGICAL_TO_OPTICAL[k] * mech, LOGICAL_TO_OPTICAL[l] * mech);
        (0..mech).map(|p| rho.matrix[(ok + p, ol + p)]).sum()
    });
    Ok(DensityMatrix {
        layout: SpaceLayout::single(4)?,
        matrix: m,
        hermitian: rho.hermitian,
    })
}
