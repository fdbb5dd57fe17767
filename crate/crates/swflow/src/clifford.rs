//! Gamma matrices and half-spinor conventions.
//!
//! Euclidean Clifford generators with {γ_j, γ_k} = 2δ_jk·I, built by the
//! standard tensor-product recursion from the Pauli matrices.  In even
//! dimension the normalized volume element Γ = (-i)^{m/2} γ_1⋯γ_m splits the
//! fiber into chirality halves; the flow itself only consumes the fiber
//! dimension, so this module pins conventions and nothing else.

use num_complex::Complex64;

use crate::error::{Result, SwError};

/// Dense complex matrix, row-major.  Sized for gamma matrices (N ≤ 16),
/// not for general linear algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix rows must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.data[i * n + k];
                if aik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aik * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (o, b) in out.data.iter_mut().zip(&other.data) {
            *o += b;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (o, b) in out.data.iter_mut().zip(&other.data) {
            *o -= b;
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= c;
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    /// Kronecker product self ⊗ other.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = (self.n, other.n);
        let n = p * q;
        let mut out = Self::zeros(n);
        for i in 0..p {
            for j in 0..p {
                let a = self.data[i * p + j];
                for k in 0..q {
                    for l in 0..q {
                        out.data[(i * q + k) * n + (j * q + l)] = a * other.data[k * q + l];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    /// Largest entrywise modulus; the metric used by all algebra checks.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Concrete Clifford representation: m Hermitian unitary generators on a
/// 2^⌊m/2⌋-dimensional fiber.
#[derive(Clone, Debug)]
pub struct CliffordRep {
    pub m: usize,
    pub fiber: usize,
    pub gammas: Vec<ComplexMatrix>,
}

fn pauli() -> [ComplexMatrix; 3] {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let s1 = ComplexMatrix::from_rows(&[&[z, one], &[one, z]]);
    let s2 = ComplexMatrix::from_rows(&[&[z, -i], &[i, z]]);
    let s3 = ComplexMatrix::from_rows(&[&[one, z], &[z, -one]]);
    [s1, s2, s3]
}

/// Normalized volume element (-i)^{m/2} γ_1⋯γ_m of an even-dimensional
/// representation; squares to the identity and anticommutes with every γ_j.
fn volume_element(gammas: &[ComplexMatrix]) -> ComplexMatrix {
    let k = gammas.len() / 2;
    let mut prod = ComplexMatrix::identity(gammas[0].dim());
    for g in gammas {
        prod = prod.mul(g);
    }
    // (-i)^k
    let phase = match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    };
    prod.scale(phase)
}

/// Build the m Euclidean gamma matrices on the fiber C^{2^⌊m/2⌋}.
///
/// Recursion: γ_j ↦ γ_j ⊗ σ_3 plus the two fresh generators I ⊗ σ_1 and
/// I ⊗ σ_2 raise the dimension by two; odd dimensions append the volume
/// element of the even block below.
pub fn gamma_matrices(m: usize) -> Result<CliffordRep> {
    if !(2..=8).contains(&m) {
        return Err(SwError::Config(format!(
            "gamma matrices require 2 <= m <= 8, got {m}"
        )));
    }
    let [s1, s2, _s3] = pauli();
    let mut gammas = vec![s1, s2];
    let mut even = 2;
    while even + 2 <= m {
        let [s1, s2, s3] = pauli();
        let prev_dim = gammas[0].dim();
        let mut next: Vec<ComplexMatrix> = gammas.iter().map(|g| g.kron(&s3)).collect();
        next.push(ComplexMatrix::identity(prev_dim).kron(&s1));
        next.push(ComplexMatrix::identity(prev_dim).kron(&s2));
        gammas = next;
        even += 2;
    }
    if m % 2 == 1 {
        gammas.push(volume_element(&gammas));
    }
    let fiber = gammas[0].dim();
    debug_assert_eq!(fiber, 1 << (m / 2));
    Ok(CliffordRep { m, fiber, gammas })
}

/// Projector P = (I + Γ)/2 onto the positive-chirality half of the fiber.
///
/// Only defined in even dimension; odd dimensions have no half-spinor split.
pub fn chirality_projector(rep: &CliffordRep) -> Result<ComplexMatrix> {
    if rep.m % 2 != 0 {
        return Err(SwError::Unsupported(format!(
            "chirality projector requires even dimension, got m = {}",
            rep.m
        )));
    }
    let gamma = volume_element(&rep.gammas);
    let id = ComplexMatrix::identity(rep.fiber);
    Ok(id.add(&gamma).scale(Complex64::new(0.5, 0.0)))
}

/// Fiber dimension of the (half-)spinor bundle: 2^{m/2-1} for the chirality
/// half in even dimension, 2^⌊m/2⌋ for the full fiber.
pub fn fiber_dimension(m: usize, half: bool) -> Result<usize> {
    if !(4..=7).contains(&m) {
        return Err(SwError::Config(format!(
            "fiber dimension defined for 4 <= m <= 7, got {m}"
        )));
    }
    if half {
        if m % 2 != 0 {
            return Err(SwError::Unsupported(format!(
                "half-spinor fiber undefined in odd dimension m = {m}"
            )));
        }
        Ok(1 << (m / 2 - 1))
    } else {
        Ok(1 << (m / 2))
    }
}
