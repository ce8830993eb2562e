use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::assembly::{ScalarFn, SeparableForcing};
use crate::{Error, Result};

/// A function of one variable with its derivatives up to order four.
#[derive(Clone)]
pub struct Profile {
    /// `derivs[k]` is the `k`-th derivative.
    pub derivs: [ScalarFn; 5],
}

impl Profile {
    pub fn new(derivs: [ScalarFn; 5]) -> Self {
        Self { derivs }
    }

    #[inline]
    pub fn d(&self, k: usize, x: f64) -> f64 {
        (self.derivs[k])(x)
    }

    /// `sin²(π x)`.
    pub fn sin_squared() -> Self {
        Self::new([
            Arc::new(|x: f64| {
                let s = (PI * x).sin();
                s * s
            }),
            Arc::new(|x: f64| PI * (2.0 * PI * x).sin()),
            Arc::new(|x: f64| 2.0 * PI * PI * (2.0 * PI * x).cos()),
            Arc::new(|x: f64| -4.0 * PI * PI * PI * (2.0 * PI * x).sin()),
            Arc::new(|x: f64| -8.0 * PI.powi(4) * (2.0 * PI * x).cos()),
        ])
    }

    /// `t²`.
    pub fn t_squared() -> Self {
        Self::new([
            Arc::new(|t: f64| t * t),
            Arc::new(|t: f64| 2.0 * t),
            Arc::new(|_| 2.0),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
        ])
    }
}

/// Exact solution `u(x, t) = g(t) Π_l s_l(x_l)` of `u_tt + Δ²u = f`, with
/// the forcing obtained by differentiating the factors.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub time: Profile,
    pub space: Vec<Profile>,
    pub forcing: SeparableForcing,
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .finish()
    }
}

/// Names accepted by [`manufactured_case`].
pub const CASE_NAMES: [&str; 2] = ["square2d", "line1d"];

/// `square2d`: `t² sin²(πx) sin²(πy)` on the unit square;
/// `line1d`: `t² sin²(πx)` on the unit interval.
pub fn manufactured_case(name: &str) -> Result<ManufacturedCase> {
    match name {
        "square2d" => ManufacturedCase::separable(
            name,
            Profile::t_squared(),
            vec![Profile::sin_squared(), Profile::sin_squared()],
        ),
        "line1d" => {
            ManufacturedCase::separable(name, Profile::t_squared(), vec![Profile::sin_squared()])
        }
        other => Err(Error::UnknownCase(other.into())),
    }
}

impl ManufacturedCase {
    pub fn separable(name: &str, time: Profile, space: Vec<Profile>) -> Result<Self> {
        if space.is_empty() || space.len() > 2 {
            return Err(Error::Parameter(format!(
                "{name}: spatial dimension must be 1 or 2"
            )));
        }
        let d = |p: &Profile, k: usize| p.derivs[k].clone();
        let mut forcing =
            SeparableForcing::zero().term(d(&time, 2), space.iter().map(|s| d(s, 0)).collect());
        // Δ²(Π s_l) = Σ_l Σ_m s_l'' s_m'' (l ≠ m) + Σ_l s_l'''' Π_{m≠l} s_m.
        let dim = space.len();
        for l in 0..dim {
            for m in 0..dim {
                let fac: Vec<ScalarFn> = (0..dim)
                    .map(|j| {
                        if l == m {
                            d(&space[j], if j == l { 4 } else { 0 })
                        } else if j == l || j == m {
                            d(&space[j], 2)
                        } else {
                            d(&space[j], 0)
                        }
                    })
                    .collect();
                forcing = forcing.term(d(&time, 0), fac);
            }
        }
        Ok(Self {
            name: name.into(),
            time,
            space,
            forcing,
        })
    }

    pub fn dim(&self) -> usize {
        self.space.len()
    }

    fn prod(&self, x: &[f64], derivs: &[usize]) -> f64 {
        self.space
            .iter()
            .zip(x)
            .zip(derivs)
            .map(|((s, &xi), &k)| s.d(k, xi))
            .product()
    }

    pub fn u(&self, x: &[f64], t: f64) -> f64 {
        self.time.d(0, t) * self.prod(x, &[0, 0])
    }

    pub fn u_t(&self, x: &[f64], t: f64) -> f64 {
        self.time.d(1, t) * self.prod(x, &[0, 0])
    }

    /// Spatial gradient; unused components are zero.
    pub fn grad(&self, x: &[f64], t: f64) -> [f64; 2] {
        let g = self.time.d(0, t);
        let mut out = [0.0; 2];
        for (l, o) in out.iter_mut().enumerate().take(self.dim()) {
            let mut k = [0, 0];
            k[l] = 1;
            *o = g * self.prod(x, &k);
        }
        out
    }

    pub fn laplacian(&self, x: &[f64], t: f64) -> f64 {
        let g = self.time.d(0, t);
        (0..self.dim())
            .map(|l| {
                let mut k = [0, 0];
                k[l] = 2;
                g * self.prod(x, &k)
            })
            .sum()
    }

    /// `Δ²u` from the fourth derivatives.
    pub fn bilaplacian(&self, x: &[f64], t: f64) -> f64 {
        let g = self.time.d(0, t);
        let dim = self.dim();
        let mut s = 0.0;
        for l in 0..dim {
            for m in 0..dim {
                let mut k = [0, 0];
                if l == m {
                    k[l] = 4;
                } else {
                    k[l] = 2;
                    k[m] = 2;
                }
                s += self.prod(x, &k);
            }
        }
        g * s
    }

    pub fn forcing_at(&self, x: &[f64], t: f64) -> f64 {
        self.forcing.eval(x, t)
    }
}
