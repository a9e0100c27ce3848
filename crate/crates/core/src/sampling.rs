//! Seeded random streams and sphere sampling.
//!
//! The transformations here are part of the output contract: changing them
//! changes every seeded Monte Carlo number the crate reports.
//!
//! * A stream is ChaCha8 seeded with `seed_from_u64(seed)` and switched to
//!   stream number `stream` (`set_stream`).
//! * A uniform draw is `((next_u64() >> 11) + 1) · 2^-53`, in `(0, 1]`.
//! * A point on the sphere uses four uniforms `u0..u3`:
//!   `g0 = r0 cos(2π u1)`, `g1 = r0 sin(2π u1)`, `g2 = r2 cos(2π u3)` with
//!   `r = sqrt(-2 ln u)` (Box–Muller), then `(g0, g1, g2) / |g|`. The draw is
//!   repeated in the (never observed) case `|g| < 1e-150`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::zigzag::UnitVector3;

/// Deterministic random stream for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn uniform_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform point on the unit sphere.
pub fn sphere_point<R: RngCore + ?Sized>(rng: &mut R) -> UnitVector3 {
    use std::f64::consts::TAU;
    loop {
        let (u0, u1, u2, u3) = (
            uniform_open(rng),
            uniform_open(rng),
            uniform_open(rng),
            uniform_open(rng),
        );
        let r0 = (-2.0 * u0.ln()).sqrt();
        let r2 = (-2.0 * u2.ln()).sqrt();
        let g = [
            r0 * (TAU * u1).cos(),
            r0 * (TAU * u1).sin(),
            r2 * (TAU * u3).cos(),
        ];
        if let Some(v) = UnitVector3::normalized(g) {
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4)
            .map({
                let mut r = stream(7, 0);
                move |_| r.next_u64()
            })
            .collect();
        let b: Vec<u64> = (0..4)
            .map({
                let mut r = stream(7, 0);
                move |_| r.next_u64()
            })
            .collect();
        let c: Vec<u64> = (0..4)
            .map({
                let mut r = stream(7, 1);
                move |_| r.next_u64()
            })
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_is_in_open_closed_unit_interval() {
        let mut r = stream(1, 0);
        for _ in 0..10_000 {
            let u = uniform_open(&mut r);
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn sphere_moments() {
        let mut r = stream(5, 0);
        let n = 200_000;
        let mut mean = [0.0; 3];
        let mut second = [0.0; 3];
        for _ in 0..n {
            let v = sphere_point(&mut r);
            assert!((v.norm() - 1.0).abs() < 1e-12);
            for i in 0..3 {
                mean[i] += v.0[i] / n as f64;
                second[i] += v.0[i] * v.0[i] / n as f64;
            }
        }
        // uniform on the sphere: E[v_i] = 0, E[v_i^2] = 1/3
        for i in 0..3 {
            assert!(mean[i].abs() < 0.01, "{mean:?}");
            assert!((second[i] - 1.0 / 3.0).abs() < 0.01, "{second:?}");
        }
    }
}
