//! Truncated Jaynes–Cummings Hilbert space: a two-level emitter (g, e)
//! coupled to a single cavity mode with Fock states |0⟩ … |n_fock⟩.
//!
//! Basis ordering is emitter-major: index = s·(n_fock+1) + n for the product
//! state |s, n⟩ with s ∈ {g = 0, e = 1}. All operators are dense complex
//! matrices of dimension 2·(n_fock+1).

use crate::linalg::{identity, kron, C64, C_ONE, C_ZERO};
use crate::{Error, Result};
use alloc::format;
use ndarray::Array2;
#[allow(unused_imports)] // f64 math methods in no_std builds
use num_traits::Float;

/// Size of the truncated Hilbert space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertConfig {
    /// Highest retained Fock state of the cavity mode (≥ 1).
    pub n_fock: usize,
}

impl HilbertConfig {
    pub fn new(n_fock: usize) -> Result<Self> {
        if n_fock < 1 {
            return Err(Error::invalid(
                "n_fock",
                format!("need at least one photon state, got {n_fock}"),
            ));
        }
        Ok(HilbertConfig { n_fock })
    }

    /// Number of cavity levels, n_fock + 1.
    pub fn cavity_levels(&self) -> usize {
        self.n_fock + 1
    }

    /// Total dimension 2·(n_fock + 1).
    pub fn dim(&self) -> usize {
        2 * self.cavity_levels()
    }

    /// Index of the product state |s, n⟩ (s: 0 = ground, 1 = excited).
    pub fn index(&self, s: usize, n: usize) -> usize {
        debug_assert!(s < 2 && n <= self.n_fock);
        s * self.cavity_levels() + n
    }

    /// Cavity annihilation operator a on the joint space.
    pub fn annihilation(&self) -> Array2<C64> {
        let m = self.cavity_levels();
        let mut a = Array2::from_elem((m, m), C_ZERO);
        for n in 1..m {
            a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        kron(&identity(2), &a)
    }

    /// Cavity creation operator a† on the joint space.
    pub fn creation(&self) -> Array2<C64> {
        crate::linalg::dagger(&self.annihilation())
    }

    /// Photon number operator a†a on the joint space.
    pub fn number(&self) -> Array2<C64> {
        let m = self.cavity_levels();
        let mut n_op = Array2::from_elem((m, m), C_ZERO);
        for n in 0..m {
            n_op[(n, n)] = C64::new(n as f64, 0.0);
        }
        kron(&identity(2), &n_op)
    }

    /// Emitter lowering operator σ⁻ = |g⟩⟨e| on the joint space.
    pub fn sigma_minus(&self) -> Array2<C64> {
        let mut s = Array2::from_elem((2, 2), C_ZERO);
        s[(0, 1)] = C_ONE;
        kron(&s, &identity(self.cavity_levels()))
    }

    /// Emitter raising operator σ⁺ = |e⟩⟨g| on the joint space.
    pub fn sigma_plus(&self) -> Array2<C64> {
        crate::linalg::dagger(&self.sigma_minus())
    }

    /// Excited-state projector σ⁺σ⁻ = |e⟩⟨e| on the joint space.
    pub fn excited_projector(&self) -> Array2<C64> {
        let mut p = Array2::from_elem((2, 2), C_ZERO);
        p[(1, 1)] = C_ONE;
        kron(&p, &identity(self.cavity_levels()))
    }

    /// Identity on the joint space.
    pub fn identity(&self) -> Array2<C64> {
        identity(self.dim())
    }

    /// Basis ket |s, n⟩ as a dense column vector.
    pub fn ket(&self, s: usize, n: usize) -> ndarray::Array1<C64> {
        let mut v = ndarray::Array1::from_elem(self.dim(), C_ZERO);
        v[self.index(s, n)] = C_ONE;
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, dagger, trace};
    use approx::assert_relative_eq;

    #[test]
    fn rejects_empty_cavity() {
        assert!(HilbertConfig::new(0).is_err());
        assert!(HilbertConfig::new(1).is_ok());
    }

    #[test]
    fn dimensions_and_indexing() {
        let h = HilbertConfig::new(2).unwrap();
        assert_eq!(h.dim(), 6);
        assert_eq!(h.index(0, 0), 0);
        assert_eq!(h.index(0, 2), 2);
        assert_eq!(h.index(1, 0), 3);
        assert_eq!(h.index(1, 2), 5);
    }

    #[test]
    fn annihilation_matrix_elements() {
        let h = HilbertConfig::new(2).unwrap();
        let a = h.annihilation();
        // ⟨g,0|a|g,1⟩ = 1, ⟨g,1|a|g,2⟩ = √2, and the e-block mirrors it.
        assert_relative_eq!(a[(h.index(0, 0), h.index(0, 1))].re, 1.0);
        assert_relative_eq!(a[(h.index(0, 1), h.index(0, 2))].re, 2.0_f64.sqrt());
        assert_relative_eq!(a[(h.index(1, 0), h.index(1, 1))].re, 1.0);
        // No cross-emitter elements.
        assert_eq!(a[(h.index(0, 0), h.index(1, 1))], C_ZERO);
    }

    #[test]
    fn number_operator_equals_adag_a() {
        let h = HilbertConfig::new(3).unwrap();
        let n_direct = h.number();
        let n_built = dagger(&h.annihilation()).dot(&h.annihilation());
        for (x, y) in n_direct.iter().zip(n_built.iter()) {
            assert_relative_eq!(x.re, y.re, epsilon = 1e-14);
            assert_relative_eq!(x.im, y.im, epsilon = 1e-14);
        }
    }

    #[test]
    fn truncated_commutation_relation() {
        // [a, a†] = 1 on all Fock states below the truncation edge.
        let h = HilbertConfig::new(4).unwrap();
        let a = h.annihilation();
        let comm = commutator(&a, &dagger(&a));
        for n in 0..4 {
            assert_relative_eq!(comm[(h.index(0, n), h.index(0, n))].re, 1.0, epsilon = 1e-14);
        }
        // Truncation shows up only on the edge state.
        assert_relative_eq!(
            comm[(h.index(0, 4), h.index(0, 4))].re,
            -4.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn sigma_algebra() {
        let h = HilbertConfig::new(1).unwrap();
        let sp = h.sigma_plus();
        let sm = h.sigma_minus();
        let proj = h.excited_projector();
        let built = sp.dot(&sm);
        for (x, y) in built.iter().zip(proj.iter()) {
            assert_eq!(x, y);
        }
        // σ⁻ annihilates the ground state: σ⁻|g,n⟩ = 0.
        let g0 = h.ket(0, 0);
        let out = sm.dot(&g0);
        assert!(out.iter().all(|z| z.norm() == 0.0));
        // Projector trace = number of cavity levels.
        assert_relative_eq!(trace(&proj).re, 2.0);
    }
}
