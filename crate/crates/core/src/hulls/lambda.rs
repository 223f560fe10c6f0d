//! Upper bounds for the constrained envelope `g_λ` from two-gradient laminates.
//!
//! A zero-mean oscillation added to the slope `p` that takes the values
//! `p + a` on a fraction `θ` and `p + b` on the rest needs `θa + (1-θ)b = 0`,
//! i.e. `θ = -b / (a - b)`, and its mean square is `θa² + (1-θ)b² = -ab`.
//! The averaged flux defect of such a laminate is
//! `θ|σ(p+a) - β|² + (1-θ)|σ(p+b) - β|²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::FluxModel;

/// Two-point laminate reproducing a mean slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaminateCertificate {
    /// Slopes taken by the laminate (already shifted by `p`).
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub achieved_p: f64,
    pub achieved_beta: f64,
    /// `|θσ(a) + (1-θ)σ(b) - β|`
    pub residual: f64,
}

impl LaminateCertificate {
    pub fn new(flux: &FluxModel, a: f64, b: f64, theta: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::OutOfRange { what: "laminate weight", value: theta, lo: 0.0, hi: 1.0 });
        }
        let mean_flux = theta * flux.eval(a)? + (1.0 - theta) * flux.eval(b)?;
        Ok(Self {
            a,
            b,
            theta,
            achieved_p: theta * a + (1.0 - theta) * b,
            achieved_beta: mean_flux,
            residual: (mean_flux - beta).abs(),
        })
    }

    /// Mean square deviation of the slope from its average.
    pub fn oscillation_l2(&self) -> f64 {
        let da = self.a - self.achieved_p;
        let db = self.b - self.achieved_p;
        self.theta * da * da + (1.0 - self.theta) * db * db
    }
}

/// Search box for the laminate offsets `a, b ∈ [-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaminateSearch {
    pub half_width: f64,
    pub n: usize,
}

impl Default for LaminateSearch {
    fn default() -> Self {
        Self { half_width: 6.0, n: 601 }
    }
}

/// Upper bound for `g_λ(p, β)` over two-gradient laminates with
/// `θa² + (1-θ)b² < λ²`, with the witnessing certificate.
///
/// Falls back to the unlaminated value `|σ(p) - β|²` when no pair on the
/// search grid is feasible.
pub fn g_lambda_upper(
    flux: &FluxModel,
    p: f64,
    beta: f64,
    lambda: f64,
    search: LaminateSearch,
) -> Result<(f64, LaminateCertificate)> {
    if !(lambda > 0.0) {
        return Err(Error::OutOfRange { what: "lambda", value: lambda, lo: 0.0, hi: f64::INFINITY });
    }
    if search.n < 3 || !(search.half_width > 0.0) {
        return Err(Error::InvalidGrid(format!("laminate search {search:?}")));
    }
    let defect = |q: f64| -> Result<f64> {
        let d = flux.eval(q)? - beta;
        Ok(d * d)
    };
    let trivial = defect(p)?;
    let mut best = (trivial, 0.0, 0.0);

    let step = 2.0 * search.half_width / (search.n - 1) as f64;
    let pos: Vec<f64> = (1..search.n).map(|k| k as f64 * step).filter(|&a| a <= search.half_width * (1.0 + 1e-12)).collect();
    let f_pos = pos.iter().map(|&a| defect(p + a)).collect::<Result<Vec<_>>>()?;
    let f_neg = pos.iter().map(|&a| defect(p - a)).collect::<Result<Vec<_>>>()?;
    let lam2 = lambda * lambda;
    for (i, &a) in pos.iter().enumerate() {
        for (k, &mb) in pos.iter().enumerate() {
            if a * mb >= lam2 {
                break;
            }
            let theta = mb / (a + mb);
            let v = theta * f_pos[i] + (1.0 - theta) * f_neg[k];
            if v < best.0 {
                best = (v, a, -mb);
            }
        }
    }

    let (mut value, mut a, mut b) = best;
    if a != 0.0 {
        // compass polish inside the feasible region
        let eval = |a: f64, b: f64| -> Result<Option<f64>> {
            if a <= 0.0 || b >= 0.0 || -a * b >= lam2 {
                return Ok(None);
            }
            let theta = -b / (a - b);
            Ok(Some(theta * defect(p + a)? + (1.0 - theta) * defect(p + b)?))
        };
        let mut h = step;
        while h > 1e-12 * (1.0 + search.half_width) {
            let mut moved = false;
            for (da, db) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
                if let Some(v) = eval(a + da, b + db)? {
                    if v < value {
                        value = v;
                        a += da;
                        b += db;
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                h *= 0.5;
            }
        }
    }

    let theta = if a == 0.0 { 1.0 } else { -b / (a - b) };
    let cert = LaminateCertificate::new(flux, p + a, p + b, theta, beta)?;
    Ok((value, cert))
}
