use nalgebra::Complex;

use crate::error::{Error, Result};

/// A point `(t, z)` of the Heisenberg group `H_m = R x C^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint {
    pub t: f64,
    pub z: Vec<Complex<f64>>,
}

impl GroupPoint {
    pub fn new(t: f64, z: Vec<Complex<f64>>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::domain("Heisenberg group needs m >= 1"));
        }
        Ok(GroupPoint { t, z })
    }

    pub fn identity(m: usize) -> Self {
        GroupPoint {
            t: 0.0,
            z: vec![Complex::new(0.0, 0.0); m],
        }
    }

    pub fn m(&self) -> usize {
        self.z.len()
    }

    pub fn inverse(&self) -> Self {
        GroupPoint {
            t: -self.t,
            z: self.z.iter().map(|c| -c).collect(),
        }
    }

    /// Real coordinates `(t, x_1..x_m, y_1..y_m)`.
    pub fn coordinates(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.m() + 1);
        out.push(self.t);
        out.extend(self.z.iter().map(|c| c.re));
        out.extend(self.z.iter().map(|c| c.im));
        out
    }
}

/// Symplectic form `sum_k Im(z_k * conj(w_k))`.
fn symplectic(z: &[Complex<f64>], w: &[Complex<f64>]) -> f64 {
    z.iter().zip(w).map(|(a, b)| (a * b.conj()).im).sum()
}

/// Group law `(t, z)(t', z') = (t + t' + 2 omega(z, z'), z + z')`.
pub fn heisenberg_compose(g: &GroupPoint, h: &GroupPoint) -> Result<GroupPoint> {
    if g.m() != h.m() {
        return Err(Error::Dimension {
            expected: g.m(),
            got: h.m(),
        });
    }
    Ok(GroupPoint {
        t: g.t + h.t + 2.0 * symplectic(&g.z, &h.z),
        z: g.z.iter().zip(&h.z).map(|(a, b)| a + b).collect(),
    })
}

/// Anisotropic dilation `(t, z) -> (s^2 t, s z)`.
pub fn dilate(s: f64, g: &GroupPoint) -> Result<GroupPoint> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::domain(format!("dilation factor must be positive, got {s}")));
    }
    Ok(GroupPoint {
        t: s * s * g.t,
        z: g.z.iter().map(|c| c * s).collect(),
    })
}

/// `(t^2 + |z|^4)^(1/4)`.
pub fn homogeneous_norm(g: &GroupPoint) -> f64 {
    let z2: f64 = g.z.iter().map(|c| c.norm_sqr()).sum();
    (g.t * g.t + z2 * z2).sqrt().sqrt()
}
