//! `int int g(x) g(y) |x - y|^{-lambda} dx dy` on a lattice in three
//! dimensions, by zero-padded FFT convolution.

use super::ScalarField;
use crate::error::{Error, Result};
use crate::fft::NdFft;
use crate::quadrature::unit_cube_power_integral;
use crate::spectral::GridSpec;
use num_complex::Complex64;

/// Transformed kernel for one lattice and exponent, reusable across data.
pub struct HlsKernel {
    grid: GridSpec,
    lambda: f64,
    plan: NdFft,
    khat: Vec<Complex64>,
}

impl HlsKernel {
    /// `lambda` in `[0, 3)`. The kernel sample at the origin is the cell
    /// average of `|z|^{-lambda}`, so the diagonal is integrated exactly.
    pub fn new(grid: GridSpec, lambda: f64) -> Result<Self> {
        if grid.d() != 3 {
            return Err(Error::InvalidGrid(format!("Riesz form needs a 3-d lattice, got d = {}", grid.d())));
        }
        if !(0.0..3.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} outside [0, 3)")));
        }
        let n = grid.n();
        let m = 2 * n;
        let h = grid.spacing();
        let offset = |k: usize| if k < n { k as f64 } else { k as f64 - m as f64 };
        let mut khat = vec![Complex64::new(0.0, 0.0); m * m * m];
        for (i, v) in khat.iter_mut().enumerate() {
            let (a, b, c) = (offset(i / (m * m)), offset((i / m) % m), offset(i % m));
            let r2 = a * a + b * b + c * c;
            let k = if r2 == 0.0 {
                unit_cube_power_integral(lambda) * h.powf(-lambda)
            } else {
                (r2 * h * h).powf(-0.5 * lambda)
            };
            *v = Complex64::new(k, 0.0);
        }
        let plan = NdFft::new(m, 3);
        plan.process(&mut khat, false);
        Ok(HlsKernel { grid, lambda, plan, khat })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `int g (|.|^{-lambda} * g)`.
    pub fn form(&self, g: &ScalarField) -> Result<f64> {
        if g.grid != self.grid {
            return Err(Error::GridMismatch("datum lattice differs from the kernel lattice".into()));
        }
        let n = self.grid.n();
        let m = 2 * n;
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m * m];
        for (i, a) in g.values.iter().enumerate() {
            let (x, y, z) = (i / (n * n), (i / n) % n, i % n);
            buf[(x * m + y) * m + z] = Complex64::new(*a, 0.0);
        }
        self.plan.process(&mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.khat) {
            *b *= k;
        }
        self.plan.process(&mut buf, true);
        let norm = 1.0 / (m * m * m) as f64;
        let mut total = 0.0;
        for (i, a) in g.values.iter().enumerate() {
            let (x, y, z) = (i / (n * n), (i / n) % n, i % n);
            total += a * buf[(x * m + y) * m + z].re;
        }
        let cell = self.grid.cell_volume();
        Ok(total * norm * cell * cell)
    }
}

/// One-off evaluation of the Riesz form; build an [`HlsKernel`] to reuse it.
pub fn hls_form(g: &ScalarField, lambda: f64) -> Result<f64> {
    HlsKernel::new(g.grid, lambda)?.form(g)
}
