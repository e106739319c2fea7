//! Dense complex helpers: seeded Haar unitaries and orthonormal range
//! bases.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Standard complex Gaussian variates drawn from ChaCha20 seeded with
/// `seed_from_u64`. Each variate consumes two standard normals, real part
/// first.
pub struct GaussianStream {
    rng: ChaCha20Rng,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn next_complex(&mut self) -> Complex64 {
        let re: f64 = StandardNormal.sample(&mut self.rng);
        let im: f64 = StandardNormal.sample(&mut self.rng);
        Complex64::new(re, im)
    }

    /// `n × n` Gaussian matrix filled in row-major order.
    pub fn gaussian_matrix(&mut self, n: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = self.next_complex();
            }
        }
        m
    }

    /// Haar-distributed unitary: QR of a Gaussian matrix with the diagonal
    /// of `R` rotated onto the positive reals.
    pub fn unitary(&mut self, n: usize) -> CMatrix {
        if n == 0 {
            return CMatrix::zeros(0, 0);
        }
        let qr = self.gaussian_matrix(n).qr();
        let (mut q, r) = (qr.q(), qr.r());
        for c in 0..n {
            let d = r[(c, c)];
            let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
            q.column_mut(c).scale_mut_complex(phase);
        }
        q
    }
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, s: Complex64);
}

impl<S> ScaleComplex for nalgebra::Matrix<Complex64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<Complex64, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_complex(&mut self, s: Complex64) {
        for x in self.iter_mut() {
            *x *= s;
        }
    }
}

/// Rank thresholds for [`orthonormal_range`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankPolicy {
    /// Pivots below this norm are treated as zero.
    pub cutoff: f64,
    /// Pivots inside `[low, high]` make the rank decision unreliable.
    pub unstable_low: f64,
    pub unstable_high: f64,
}

impl Default for RankPolicy {
    fn default() -> Self {
        Self {
            cutoff: 1e-10,
            unstable_low: 1e-12,
            unstable_high: 1e-8,
        }
    }
}

fn inner(a: &CVector, b: &CVector) -> Complex64 {
    a.dotc(b)
}

/// Orthonormal basis of the column space of `m`, by column-pivoted
/// modified Gram-Schmidt with one re-orthogonalization pass per vector.
pub fn orthonormal_range(m: &CMatrix, policy: &RankPolicy) -> Result<Vec<CVector>> {
    let mut residual: Vec<CVector> = m.column_iter().map(|c| c.into_owned()).collect();
    let mut basis: Vec<CVector> = Vec::new();
    loop {
        let pivot = residual
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((k, norm)) = pivot else { break };
        if norm >= policy.unstable_low && norm <= policy.unstable_high {
            return Err(Error::Degenerate(format!(
                "pivot norm {norm:e} inside the unstable band [{:e}, {:e}]",
                policy.unstable_low, policy.unstable_high
            )));
        }
        if norm < policy.cutoff {
            break;
        }
        let mut q = residual[k].unscale(norm);
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &q);
                q -= b * c;
            }
        }
        let n = q.norm();
        q.unscale_mut(n);
        for col in residual.iter_mut() {
            let c = inner(&q, col);
            *col -= &q * c;
        }
        residual[k].fill(Complex64::new(0.0, 0.0));
        basis.push(q);
    }
    Ok(basis)
}

/// Real matrix lifted to complex entries.
pub fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Matrix whose columns are the given vectors.
pub fn columns(vectors: &[CVector], rows: usize) -> CMatrix {
    let mut m = CMatrix::zeros(rows, vectors.len());
    for (c, v) in vectors.iter().enumerate() {
        m.set_column(c, v);
    }
    m
}
