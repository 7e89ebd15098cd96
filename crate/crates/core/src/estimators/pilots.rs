use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{dot_h, CMat, C64};

/// Pilot sequences as the columns of a `τ_p x K` matrix, each with energy `τ_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotBook {
    phi: CMat,
}

impl PilotBook {
    /// First `k` columns of the `τ x τ` DFT matrix.
    pub fn dft(tau: usize, k: usize) -> Self {
        assert!(k <= tau, "need tau_p >= K for orthogonal DFT pilots");
        let phi = CMat::from_fn(tau, k, |n, col| C64::from_polar(1.0, -2.0 * PI * (n * col) as f64 / tau as f64));
        Self { phi }
    }

    /// Wraps an arbitrary book after checking `||φ_k||^2 = τ_p`.
    pub fn from_matrix(phi: CMat) -> Result<Self> {
        let tau = phi.nrows() as f64;
        for (k, col) in phi.column_iter().enumerate() {
            let e = col.norm_squared();
            if (e - tau).abs() > 1e-9 * tau {
                return Err(Error::InvalidArgument(format!("pilot {k} has energy {e}, expected {tau}")));
            }
        }
        Ok(Self { phi })
    }

    pub fn matrix(&self) -> &CMat {
        &self.phi
    }

    pub fn tau(&self) -> usize {
        self.phi.nrows()
    }

    pub fn users(&self) -> usize {
        self.phi.ncols()
    }

    pub fn column(&self, k: usize) -> Vec<C64> {
        self.phi.column(k).iter().copied().collect()
    }

    pub fn is_orthogonal(&self) -> bool {
        let tau = self.tau() as f64;
        (0..self.users()).all(|a| {
            let pa = self.column(a);
            (a + 1..self.users()).all(|b| dot_h(&pa, &self.column(b)).norm() <= 1e-9 * tau)
        })
    }

    /// `φ_k^H y` for every `k`.
    pub fn despread(&self, y: &[C64]) -> Vec<C64> {
        (0..self.users())
            .map(|k| self.phi.column(k).iter().zip(y).map(|(p, v)| p.conj() * v).sum())
            .collect()
    }
}
