//! Complete elliptic integral of the first kind and the Jacobi `sn` function.
//!
//! Both use the modulus convention: `k` is the modulus, not the parameter `k^2`.

use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_2;

const MAX_ITER: usize = 64;
const AGM_TOL: f64 = 1e-15;

/// Complete elliptic integral `K(k)` for modulus `0 <= k < 1`, via the arithmetic-geometric mean.
pub fn ellipk(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::InvalidParameter(format!("elliptic modulus {k} outside [0,1)")));
    }
    let mut a = 1.0_f64;
    let mut b = ((1.0 - k) * (1.0 + k)).sqrt();
    for _ in 0..MAX_ITER {
        if (a - b).abs() <= AGM_TOL * a {
            return Ok(FRAC_PI_2 / a);
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    Err(Error::EllipticConvergence)
}

/// Jacobi elliptic function `sn(u, k)` for modulus `0 <= k < 1`.
///
/// Descending Landen (AGM) sequence followed by the backward phase recursion.
pub fn sn(u: f64, k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::InvalidParameter(format!("elliptic modulus {k} outside [0,1)")));
    }
    let mut a = vec![1.0_f64];
    let mut c = vec![k];
    let mut b = ((1.0 - k) * (1.0 + k)).sqrt();
    while c.last().unwrap().abs() > AGM_TOL {
        if a.len() > MAX_ITER {
            return Err(Error::EllipticConvergence);
        }
        let an = *a.last().unwrap();
        c.push(0.5 * (an - b));
        a.push(0.5 * (an + b));
        b = (an * b).sqrt();
    }
    let n = a.len() - 1;
    let mut phi = 2f64.powi(n as i32) * a[n] * u;
    for i in (1..=n).rev() {
        phi = 0.5 * (phi + (c[i] / a[i] * phi.sin()).clamp(-1.0, 1.0).asin());
    }
    Ok(phi.sin())
}
