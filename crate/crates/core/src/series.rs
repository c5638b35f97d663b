//! Truncated real power series and Abelian-limit extrapolation.
//!
//! Generating functions show up here in two roles: the Green function
//! `G(x,y|z) = Σ p^(n)(x,y) zⁿ` and the first-passage function
//! `F(x,y|z) = Σ f^(n)(x,y) zⁿ`, linked by `G = δ_{xy} + F·G`. Arithmetic is
//! plain coefficient arithmetic truncated to the shorter operand, so the
//! result of any operation is exact in the coefficients it retains.
//!
//! The Abelian limit `lim_{z→1⁻} g(z)` is estimated on the dyadic grid
//! `z_k = 1 − 2^{−k}`; for the non-negative-coefficient series in scope the
//! sampled values are monotone, making the last-samples acceptance test
//! meaningful rather than hopeful.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("division by series with constant term {0:e} (|c₀| must exceed {DIV_FLOOR:e})")]
    DivisionByNonUnit(f64),
    #[error("abelian sample g({z}) is not finite")]
    NonFiniteSample { z: f64 },
}

/// Divisor constant terms at or below this magnitude are rejected; series
/// division multiplies by 1/b₀ at every order, so anything smaller turns
/// rounding noise into the leading signal.
pub const DIV_FLOOR: f64 = 1e-12;

/// Coefficients `c_0..c_N` of a real power series truncated at order `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSeries {
    coeffs: Vec<f64>,
}

impl TruncatedSeries {
    /// Wraps raw coefficients; an empty vector becomes the zero series of
    /// order 0 so that `order()` is always defined.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            TruncatedSeries { coeffs: vec![0.0] }
        } else {
            TruncatedSeries { coeffs }
        }
    }

    pub fn zero(order: usize) -> Self {
        TruncatedSeries {
            coeffs: vec![0.0; order + 1],
        }
    }

    /// The series `1` at the given order.
    pub fn one(order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = 1.0;
        TruncatedSeries { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    /// Coefficient-wise sum up to the shorter order.
    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    /// Coefficient-wise difference up to the shorter order.
    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        TruncatedSeries {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = self.coeffs.len().min(other.coeffs.len());
        TruncatedSeries {
            coeffs: (0..n).map(|i| f(self.coeffs[i], other.coeffs[i])).collect(),
        }
    }

    /// Cauchy product truncated to the shorter operand's order.
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.coeffs.len().min(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, &a) in self.coeffs.iter().take(n).enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().take(n - i).enumerate() {
                out[i + j] += a * b;
            }
        }
        TruncatedSeries { coeffs: out }
    }

    /// Series quotient `q` with `q·b = a` coefficient-wise:
    /// `q_n = (a_n − Σ_{k<n} q_k b_{n−k}) / b_0`.
    pub fn div(&self, other: &Self) -> Result<Self, SeriesError> {
        let b0 = other.coeffs[0];
        if b0.abs() <= DIV_FLOOR {
            return Err(SeriesError::DivisionByNonUnit(b0));
        }
        let n = self.coeffs.len().min(other.coeffs.len());
        let mut q = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.coeffs[i];
            for (k, &qk) in q.iter().enumerate().take(i) {
                let b = other.coeff(i - k);
                if b != 0.0 {
                    acc -= qk * b;
                }
            }
            q[i] = acc / b0;
        }
        Ok(TruncatedSeries { coeffs: q })
    }

    /// Horner evaluation of the truncated polynomial. For non-negative
    /// coefficients and `z ∈ [0,1)` this is a lower bound for the full sum.
    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    }
}

/// Result of sampling `g(z)` along the dyadic approach to `z = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbelianEstimate {
    /// Last accepted sample, or `+∞` when the samples diverge monotonically
    /// past [`DIVERGENCE_CUTOFF`]. Serialized as the string `"+inf"` in that
    /// case since JSON has no infinity literal.
    #[serde(with = "serde_extended_f64")]
    pub value: f64,
    pub converged: bool,
    /// The `(z, g(z))` pairs actually used, in increasing `z`.
    pub samples: Vec<(f64, f64)>,
}

impl AbelianEstimate {
    pub fn is_divergent(&self) -> bool {
        self.value.is_infinite()
    }
}

/// Grid exponents: `z_k = 1 − 2^{−k}` for `k = 3..=20`. The first few z are
/// coarse enough to be cheap, the last ones sit 1e-6 from the boundary.
pub const ABELIAN_GRID: std::ops::RangeInclusive<u32> = 3..=20;

/// Relative agreement required of the last three samples.
pub const ABELIAN_REL_TOL: f64 = 1e-3;

/// Monotone samples beyond this are declared a divergence to `+∞`.
pub const DIVERGENCE_CUTOFF: f64 = 1e9;

/// Estimates `lim_{z→1⁻} g(z)` on the dyadic grid.
///
/// Accepts when the last three samples agree within [`ABELIAN_REL_TOL`]
/// relative; flags `+∞` when the samples increase monotonically beyond
/// [`DIVERGENCE_CUTOFF`]. Anything else is reported unconverged with the
/// last sample as the best available value.
pub fn abelian_limit(g: impl Fn(f64) -> f64) -> Result<AbelianEstimate, SeriesError> {
    let mut samples = Vec::with_capacity(18);
    for k in ABELIAN_GRID {
        let z = 1.0 - 0.5f64.powi(k as i32);
        let v = g(z);
        if !v.is_finite() {
            return Err(SeriesError::NonFiniteSample { z });
        }
        samples.push((z, v));
    }
    let n = samples.len();
    let last = samples[n - 1].1;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-12);
    let settled = rel(samples[n - 3].1, last) <= ABELIAN_REL_TOL
        && rel(samples[n - 2].1, last) <= ABELIAN_REL_TOL;
    if settled {
        return Ok(AbelianEstimate {
            value: last,
            converged: true,
            samples,
        });
    }
    let monotone_up = samples.windows(2).all(|w| w[1].1 >= w[0].1);
    if monotone_up && last > DIVERGENCE_CUTOFF {
        return Ok(AbelianEstimate {
            value: f64::INFINITY,
            converged: true,
            samples,
        });
    }
    Ok(AbelianEstimate {
        value: last,
        converged: false,
        samples,
    })
}

/// Serializes f64 infinities as strings (`"+inf"`, `"-inf"`) so report JSON
/// round-trips; finite values stay plain numbers.
pub mod serde_extended_f64 {
    use serde::de::{self, Deserializer, Unexpected};
    use serde::ser::Serializer;
    use serde::Deserialize;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("+inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.as_str() {
                "+inf" | "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::invalid_value(
                    Unexpected::Str(other),
                    &"a number, \"+inf\", or \"-inf\"",
                )),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn geometric(order: usize) -> TruncatedSeries {
        TruncatedSeries::from_coeffs(vec![1.0; order + 1])
    }

    #[test]
    fn add_sub_scale_basics() {
        let a = TruncatedSeries::from_coeffs(vec![1.0, 0.0, 1.0]);
        let b = TruncatedSeries::from_coeffs(vec![0.0, 1.0, 0.0]);
        assert_eq!(a.add(&b).coeffs(), &[1.0, 1.0, 1.0]);
        assert_eq!(a.sub(&a).coeffs(), &[0.0, 0.0, 0.0]);
        assert_eq!(
            TruncatedSeries::from_coeffs(vec![1.0, 2.0]).scale(0.5).coeffs(),
            &[0.5, 1.0]
        );
    }

    #[test]
    fn mul_matches_known_squares() {
        // (Σ zⁿ)² has coefficients 1, 2, 3, ...
        let sq = geometric(6).mul(&geometric(6));
        assert_eq!(sq.coeffs(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        // z² · 1/(1−z²) = z² + z⁴ + ...
        let z2 = TruncatedSeries::from_coeffs(vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let even = TruncatedSeries::from_coeffs(vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(z2.mul(&even).coeffs(), &[0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        // Multiplying by 1 is the identity.
        let one = TruncatedSeries::one(6);
        assert_eq!(even.mul(&one).coeffs(), even.coeffs());
    }

    #[test]
    fn div_produces_geometric_and_round_trips() {
        let one = TruncatedSeries::from_coeffs(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let lin = TruncatedSeries::from_coeffs(vec![1.0, -1.0, 0.0, 0.0, 0.0]);
        let q = one.div(&lin).unwrap();
        assert_eq!(q.coeffs(), &[1.0, 1.0, 1.0, 1.0, 1.0]);

        // G/G = 1 for the alternating Green series.
        let g = TruncatedSeries::from_coeffs(vec![1.0, 0.0, 1.0, 0.0, 1.0]);
        let unit = g.div(&g).unwrap();
        assert_eq!(unit.coeffs(), &[1.0, 0.0, 0.0, 0.0, 0.0]);

        // q·b = a after division (checked via multiply-back).
        let a = TruncatedSeries::from_coeffs(vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        let b = TruncatedSeries::from_coeffs(vec![1.0, 0.0, 1.0, 0.0, 1.0]);
        let q = a.div(&b).unwrap();
        assert_eq!(q.coeffs(), &[0.0, 0.0, 1.0, 0.0, -1.0]);
        let back = q.mul(&b);
        for (lhs, rhs) in back.coeffs().iter().zip(a.coeffs()) {
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn div_rejects_vanishing_constant_term() {
        let a = TruncatedSeries::from_coeffs(vec![1.0, 1.0]);
        let b = TruncatedSeries::from_coeffs(vec![0.0, 1.0]);
        assert!(matches!(a.div(&b), Err(SeriesError::DivisionByNonUnit(_))));
    }

    #[test]
    fn eval_matches_closed_forms() {
        // Σ z^{2n} with 100 terms at z = 0.5 ≈ 1/(1 − 0.25).
        let mut c = vec![0.0; 201];
        for i in (0..=200).step_by(2) {
            c[i] = 1.0;
        }
        let s = TruncatedSeries::from_coeffs(c);
        assert_abs_diff_eq!(s.eval(0.5), 1.0 / 0.75, epsilon = 1e-9);
        assert_eq!(s.eval(0.0), 1.0);
        let z2 = TruncatedSeries::from_coeffs(vec![0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(z2.eval(0.9), 0.81, epsilon = 1e-15);
    }

    #[test]
    fn abelian_limit_constant_and_closed_forms() {
        let c = abelian_limit(|_| 3.0).unwrap();
        assert!(c.converged);
        assert_eq!(c.value, 3.0);

        // (1−z)·G for the period-2 swap chain: G = 1/(1−z²), so the limit of
        // 1/(1+z) is 1/2.
        let g = abelian_limit(|z| 1.0 / (1.0 + z)).unwrap();
        assert!(g.converged);
        assert_abs_diff_eq!(g.value, 0.5, epsilon = 1e-3);

        // (1−F)/(1−z) with F = z²: limit 2 (the mean return time).
        let tau = abelian_limit(|z| 1.0 + z).unwrap();
        assert!(tau.converged);
        assert_abs_diff_eq!(tau.value, 2.0, epsilon = 2e-3);

        // 1/(1−z) grows without settling, but its largest sample (2²⁰) stays
        // under the divergence cutoff: reported unconverged, not +∞.
        let slow = abelian_limit(|z| 1.0 / (1.0 - z)).unwrap();
        assert!(!slow.converged && !slow.is_divergent());
        assert_abs_diff_eq!(slow.value, 2f64.powi(20), epsilon = 1e-3);

        // A fourth-power blowup does cross the cutoff monotonically: +∞.
        let div = abelian_limit(|z| (1.0 - z).powi(-4)).unwrap();
        assert!(div.converged && div.is_divergent());

        // Oscillation neither settles nor diverges.
        let osc = abelian_limit(|z| if z < 0.99 { 0.0 } else { (1e4 * z).sin() }).unwrap();
        assert!(!osc.converged);
    }

    #[test]
    fn abelian_samples_ordered_and_error_on_nan() {
        let est = abelian_limit(|z| z).unwrap();
        assert!(est.samples.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(est.samples.len(), 18);
        assert!(abelian_limit(|z| (0.5 - z).sqrt()).is_err());
    }

    #[test]
    fn extended_f64_round_trips_through_json() {
        let est = AbelianEstimate {
            value: f64::INFINITY,
            converged: true,
            samples: vec![(0.5, 1.0)],
        };
        let text = serde_json::to_string(&est).unwrap();
        assert!(text.contains("+inf"));
        let back: AbelianEstimate = serde_json::from_str(&text).unwrap();
        assert!(back.value.is_infinite());
        let finite = AbelianEstimate {
            value: 3.5,
            converged: true,
            samples: vec![],
        };
        let back: AbelianEstimate =
            serde_json::from_str(&serde_json::to_string(&finite).unwrap()).unwrap();
        assert_eq!(back.value, 3.5);
    }
}
