//! Small quadrature helpers: Gauss-Legendre rules and the integral of
//! `|x|^{-lambda}` over a lattice cell centred on the singularity.

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `int_{[-1/2, 1/2]^3} |x|^{-lambda} dx` for `lambda < 3`.
///
/// The cube splits into six pyramids over its faces; in each, the radial
/// variable integrates in closed form and leaves a smooth face integral.
pub fn unit_cube_power_integral(lambda: f64) -> f64 {
    let (x, w) = gauss_legendre(48);
    let mut face = 0.0;
    for (u, wu) in x.iter().zip(&w) {
        for (v, wv) in x.iter().zip(&w) {
            face += wu * wv * (1.0 + u * u + v * v).powf(-0.5 * lambda);
        }
    }
    // pyramid over the face x1 = 1 of [-1, 1]^3: int_0^1 s^{2-lambda} ds * face
    let full = 6.0 * face / (3.0 - lambda);
    full * 0.5f64.powf(3.0 - lambda)
}

/// Same integral over a square cell `[-1/2, 1/2]^2` in the plane.
pub fn unit_square_power_integral(lambda: f64) -> f64 {
    let (x, w) = gauss_legendre(64);
    let mut edge = 0.0;
    for (u, wu) in x.iter().zip(&w) {
        edge += wu * (1.0 + u * u).powf(-0.5 * lambda);
    }
    let full = 4.0 * edge / (2.0 - lambda);
    full * 0.5f64.powf(2.0 - lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rules_integrate_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((m - 2.0 / 19.0).abs() < 1e-14);
        let (x1, w1) = gauss_legendre(1);
        assert_eq!((x1[0], w1[0]), (0.0, 2.0));
    }

    #[test]
    fn cell_integrals() {
        // lambda = 0 is the volume
        assert!((unit_cube_power_integral(0.0) - 1.0).abs() < 1e-13);
        assert!((unit_square_power_integral(0.0) - 1.0).abs() < 1e-13);
        // lambda = -2: int |x|^2 over the unit cube is 3 * 1/12
        assert!((unit_cube_power_integral(-2.0) - 0.25).abs() < 1e-13);
        // known value of int_{[-1/2,1/2]^3} 1/|x|
        assert!((unit_cube_power_integral(1.0) - 2.380077).abs() < 1e-5);
    }
}
