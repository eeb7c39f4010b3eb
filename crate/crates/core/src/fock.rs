//! Linear algebra on fixed photon-number sectors of the two-mode Fock space.
//!
//! The `n`-photon sector has dimension `n + 1`. Index `i` of a sector matrix
//! is the occupation state `|n - i, i>` of the declared basis: `n - i`
//! photons in mode 0 and `i` photons in mode 1. Unless a [`SectorState`]
//! says otherwise, matrices are written in the z-basis occupation states.
//!
//! Joint matrices on Alice's qubit and Bob's sector are ordered with Alice's
//! index major: row `a * (n + 1) + i`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalarmath::{theta, MismatchEta};

pub type CMatrix = DMatrix<Complex64>;

/// Eigenvalues below this are treated as zero inside entropies.
pub const EIGEN_CLIP: f64 = 1e-14;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detection {
    /// Both detectors fire on any photon.
    Perfect,
    /// Detector 1 fires on each photon with probability `eta`.
    Imperfect,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

pub fn diag(entries: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        entries.len(),
        entries.iter().map(|&x| c(x)),
    ))
}

/// Real part of `Tr(a b)`.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.transpose().iter())
        .map(|(x, y)| (x * y).re)
        .sum()
}

pub fn real_trace(m: &CMatrix) -> f64 {
    m.trace().re
}

/// Matrix of the z-to-x occupation basis change on the `n`-photon sector.
///
/// Column `k` holds the z-basis amplitudes of `|n - k, k>_x`, obtained by
/// expanding `(c_z0† + c_z1†)^(n-k) (c_z0† - c_z1†)^k / (2^(n/2) sqrt((n-k)! k!))`.
/// The matrix is real orthogonal and squares to the identity.
pub fn basis_change(n: usize) -> CMatrix {
    let norm = 2f64.powf(n as f64 / 2.0);
    let mut u = CMatrix::zeros(n + 1, n + 1);
    for k in 0..=n {
        let (n0, n1) = (n - k, k);
        let col_norm = (factorial(n0) * factorial(n1)).sqrt() * norm;
        for j in 0..=n0 {
            for l in 0..=n1 {
                let m = j + l;
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                let amp = sign
                    * binomial(n0, j)
                    * binomial(n1, l)
                    * (factorial(n - m) * factorial(m)).sqrt()
                    / col_norm;
                u[(m, k)] += c(amp);
            }
        }
    }
    u
}

/// The four detection outcomes on one photon-number sector.
#[derive(Debug, Clone)]
pub struct PovmSet {
    pub n: usize,
    pub basis: Basis,
    /// No click.
    pub empty: CMatrix,
    /// Only detector 0 fires.
    pub click0: CMatrix,
    /// Only detector 1 fires.
    pub click1: CMatrix,
    /// Both fire.
    pub double: CMatrix,
}

impl PovmSet {
    pub fn elements(&self) -> [&CMatrix; 4] {
        [&self.empty, &self.click0, &self.click1, &self.double]
    }

    /// Outcome probabilities `[empty, click0, click1, double]` for `rho`
    /// written in the z-basis occupation states.
    pub fn probabilities(&self, rho: &CMatrix) -> [f64; 4] {
        self.elements().map(|p| trace_product(rho, p))
    }

    /// `I - P_empty`: any click.
    pub fn detect(&self) -> CMatrix {
        CMatrix::identity(self.n + 1, self.n + 1) - &self.empty
    }
}

/// Diagonal weights `[empty, click0, click1, double]` in the measuring
/// basis's own occupation states.
fn povm_diagonals(n: usize, eta: MismatchEta) -> [Vec<f64>; 4] {
    let loss = 1.0 - eta.value();
    let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n + 1]);
    for i in 0..=n {
        // i photons reach detector 1; each is missed with probability 1 - eta.
        let miss = loss.powi(i as i32);
        if i == n {
            out[0][i] = miss;
            out[2][i] = theta(eta, i as u32);
        } else {
            out[1][i] = miss;
            if i >= 1 {
                out[3][i] = theta(eta, i as u32);
            }
        }
    }
    out
}

/// Detection POVM on the `n`-photon sector for a measurement in `basis`,
/// returned in the z-basis occupation states.
pub fn build_povm(n: usize, eta: MismatchEta, basis: Basis, detection: Detection) -> PovmSet {
    let eta = match detection {
        Detection::Perfect => MismatchEta::perfect(),
        Detection::Imperfect => eta,
    };
    let diagonals = povm_diagonals(n, eta);
    let mut mats = diagonals.map(|d| diag(&d));
    if basis == Basis::X {
        let u = basis_change(n);
        let ut = u.adjoint();
        mats = mats.map(|m| &u * m * &ut);
    }
    let [empty, click0, click1, double] = mats;
    PovmSet {
        n,
        basis,
        empty,
        click0,
        click1,
        double,
    }
}

/// `G_n = sqrt(I - P_empty^(z))`: identity except `sqrt(theta_n)` on `|0, n>_z`.
pub fn attenuation_operator(n: usize, eta: MismatchEta) -> CMatrix {
    let mut d = vec![1.0; n + 1];
    d[n] = theta(eta, n as u32).sqrt();
    diag(&d)
}

/// Hermitian, PSD and trace checks shared by every state type.
pub fn validate_density(m: &CMatrix, max_trace: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let dev = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let tr = real_trace(m);
    if !(tr >= -TRACE_TOL && tr <= max_trace + TRACE_TOL) {
        return Err(Error::Trace(tr));
    }
    let min_eig = hermitian_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_TOL {
        return Err(Error::NotPsd(min_eig));
    }
    Ok(())
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    hermitize(m).symmetric_eigenvalues().iter().copied().collect()
}

/// An `n`-photon block of Bob's state.
#[derive(Debug, Clone)]
pub struct SectorState {
    n: usize,
    basis: Basis,
    matrix: CMatrix,
}

impl SectorState {
    pub fn new(n: usize, basis: Basis, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != n + 1 {
            return Err(Error::Dimension {
                expected: n + 1,
                got: matrix.nrows(),
            });
        }
        validate_density(&matrix, 1.0)?;
        Ok(SectorState {
            n,
            basis,
            matrix: hermitize(&matrix),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        real_trace(&self.matrix)
    }

    /// The same state written in the occupation states of `basis`.
    pub fn in_basis(&self, basis: Basis) -> SectorState {
        if basis == self.basis {
            return self.clone();
        }
        let u = basis_change(self.n);
        let matrix = match basis {
            // rho_x = U† rho_z U
            Basis::X => u.adjoint() * &self.matrix * &u,
            Basis::Z => &u * &self.matrix * u.adjoint(),
        };
        SectorState {
            n: self.n,
            basis,
            matrix: hermitize(&matrix),
        }
    }

    /// Outcome probabilities `[empty, click0, click1, double]`.
    pub fn click_probabilities(&self, povm: &PovmSet) -> [f64; 4] {
        povm.probabilities(self.in_basis(Basis::Z).matrix())
    }
}

/// Offsets of the photon-number sectors inside a truncated Fock space
/// holding `0..=max_n` photons.
#[derive(Debug, Clone)]
pub struct FockLayout {
    max_n: usize,
    offsets: Vec<usize>,
}

impl FockLayout {
    pub fn new(max_n: usize) -> Self {
        let mut offsets = Vec::with_capacity(max_n + 2);
        let mut acc = 0;
        for n in 0..=max_n {
            offsets.push(acc);
            acc += n + 1;
        }
        offsets.push(acc);
        FockLayout { max_n, offsets }
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    /// Dimension of Bob's truncated space.
    pub fn dim(&self) -> usize {
        self.offsets[self.max_n + 1]
    }

    pub fn offset(&self, n: usize) -> usize {
        self.offsets[n]
    }

    /// Photon number of Bob's basis index `f`.
    pub fn photon_number(&self, f: usize) -> usize {
        self.offsets.partition_point(|&o| o <= f) - 1
    }
}

/// Pinching `rho -> sum_n Pi_n rho Pi_n` on `A (dim_a) ⊗ truncated Fock space`.
///
/// Zeroes every entry that couples different photon numbers on Bob's side.
pub fn decohere_photon_number(rho: &CMatrix, layout: &FockLayout, dim_a: usize) -> Result<CMatrix> {
    let dim = dim_a * layout.dim();
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: rho.nrows(),
        });
    }
    let db = layout.dim();
    let mut out = rho.clone();
    for r in 0..dim {
        for col in 0..dim {
            if layout.photon_number(r % db) != layout.photon_number(col % db) {
                out[(r, col)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    Ok(out)
}

/// A state on Alice's qubit and Bob's Fock space that is block diagonal in
/// Bob's photon number. Each block is `2(n+1) x 2(n+1)`, Alice-major, with
/// Alice in her z basis and Bob in the z occupation basis.
#[derive(Debug, Clone, Default)]
pub struct JointState {
    blocks: BTreeMap<usize, CMatrix>,
}

impl JointState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the `n`-photon block after validating it.
    pub fn with_block(mut self, n: usize, block: CMatrix) -> Result<Self> {
        self.insert_block(n, block)?;
        Ok(self)
    }

    pub fn insert_block(&mut self, n: usize, block: CMatrix) -> Result<()> {
        if block.nrows() != 2 * (n + 1) {
            return Err(Error::Dimension {
                expected: 2 * (n + 1),
                got: block.nrows(),
            });
        }
        validate_density(&block, 1.0)?;
        self.blocks.insert(n, hermitize(&block));
        let total = self.trace();
        if total > 1.0 + TRACE_TOL {
            return Err(Error::Trace(total));
        }
        Ok(())
    }

    pub fn blocks(&self) -> impl Iterator<Item = (usize, &CMatrix)> {
        self.blocks.iter().map(|(&n, m)| (n, m))
    }

    pub fn block(&self, n: usize) -> Option<&CMatrix> {
        self.blocks.get(&n)
    }

    pub fn trace(&self) -> f64 {
        self.blocks.values().map(real_trace).sum()
    }

    /// Decoheres a full matrix on `A ⊗ F(<= max_n)` and splits it into blocks.
    pub fn from_full(rho: &CMatrix, layout: &FockLayout) -> Result<Self> {
        let pinched = decohere_photon_number(rho, layout, 2)?;
        let db = layout.dim();
        let mut state = JointState::new();
        for n in 0..=layout.max_n() {
            let d = n + 1;
            let off = layout.offset(n);
            let block = CMatrix::from_fn(2 * d, 2 * d, |r, col| {
                let (a, i) = (r / d, r % d);
                let (b, j) = (col / d, col % d);
                pinched[(a * db + off + i, b * db + off + j)]
            });
            if real_trace(&block) > 0.0 {
                state.insert_block(n, block)?;
            }
        }
        Ok(state)
    }

    /// Reassembles the block-diagonal full matrix on `A ⊗ F(<= max_n)`.
    pub fn to_full(&self, layout: &FockLayout) -> CMatrix {
        let db = layout.dim();
        let mut out = CMatrix::zeros(2 * db, 2 * db);
        for (&n, block) in &self.blocks {
            let d = n + 1;
            let off = layout.offset(n);
            for r in 0..2 * d {
                for col in 0..2 * d {
                    out[((r / d) * db + off + r % d, (col / d) * db + off + col % d)] = block[(r, col)];
                }
            }
        }
        out
    }
}

/// Trace over the first factor of `rho` on `C^dim_a ⊗ C^dim_b`.
pub fn partial_trace_first(rho: &CMatrix, dim_a: usize) -> CMatrix {
    let db = rho.nrows() / dim_a;
    CMatrix::from_fn(db, db, |i, j| (0..dim_a).map(|a| rho[(a * db + i, a * db + j)]).sum())
}

/// `<v| rho |v>` on Alice's factor for a qubit vector `v`, leaving Bob's block.
pub fn alice_conditional(rho: &CMatrix, v: [f64; 2]) -> CMatrix {
    let db = rho.nrows() / 2;
    CMatrix::from_fn(db, db, |i, j| {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                acc += c(v[a] * v[b]) * rho[(a * db + i, b * db + j)];
            }
        }
        acc
    })
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
pub const PLUS: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
pub const MINUS: [f64; 2] = [FRAC_1_SQRT_2, -FRAC_1_SQRT_2];
pub const ZERO: [f64; 2] = [1.0, 0.0];
pub const ONE: [f64; 2] = [0.0, 1.0];

/// Alice measures her qubit in the x basis. The result is block diagonal in
/// the register order `(+, -)`.
pub fn measure_alice_x(rho: &CMatrix) -> CMatrix {
    classical_quantum(&[alice_conditional(rho, PLUS), alice_conditional(rho, MINUS)])
}

/// `sum_x |x><x| ⊗ blocks[x]`.
pub fn classical_quantum(blocks: &[CMatrix]) -> CMatrix {
    let db = blocks[0].nrows();
    let mut out = CMatrix::zeros(blocks.len() * db, blocks.len() * db);
    for (x, b) in blocks.iter().enumerate() {
        out.view_mut((x * db, x * db), (db, db)).copy_from(b);
    }
    out
}

/// `(I_dim_a ⊗ op) rho (I_dim_a ⊗ op)†`.
pub fn apply_on_bob(rho: &CMatrix, op: &CMatrix, dim_a: usize) -> CMatrix {
    let full = kron(&CMatrix::identity(dim_a, dim_a), op);
    &full * rho * full.adjoint()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Von Neumann entropy in bits; eigenvalues below [`EIGEN_CLIP`] count as zero.
pub fn von_neumann_entropy(rho: &CMatrix) -> f64 {
    hermitian_eigenvalues(rho)
        .into_iter()
        .filter(|&l| l > EIGEN_CLIP)
        .map(|l| -l * l.log2())
        .sum()
}

/// `H(X|B) = S(rho_XB) - S(rho_B)` for a normalized state on `C^dim_x ⊗ B`.
pub fn conditional_entropy_xb(rho: &CMatrix, dim_x: usize) -> Result<f64> {
    if !rho.nrows().is_multiple_of(dim_x) {
        return Err(Error::Dimension {
            expected: dim_x,
            got: rho.nrows(),
        });
    }
    let tr = real_trace(rho);
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(Error::Trace(tr));
    }
    let dev = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let rho_b = partial_trace_first(rho, dim_x);
    Ok(von_neumann_entropy(rho) - von_neumann_entropy(&rho_b))
}
