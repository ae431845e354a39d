use std::str::FromStr;

use crate::corpus::F0Contour;
use crate::error::{Error, Result};

use super::stats::pearson;

/// Guard below which F0 values are clamped before taking logs.
pub const LOG_FLOOR_HZ: f64 = 1e-8;
/// Smallest voiced value produced by [`perturb_inverse`].
pub const INVERSE_FLOOR_HZ: f64 = 1.0;

fn co_voiced(reference: &F0Contour, hypothesis: &F0Contour) -> Result<Vec<(f64, f64)>> {
    if reference.len() != hypothesis.len() {
        return Err(Error::validation(format!(
            "F0 contours differ in length: {} vs {} frames",
            reference.len(),
            hypothesis.len()
        )));
    }
    Ok(reference
        .values()
        .iter()
        .zip(hypothesis.values())
        .filter(|(r, h)| **r > 0.0 && **h > 0.0)
        .map(|(r, h)| (*r, *h))
        .collect())
}

/// RMSE over frames voiced in both contours, optionally on natural-log F0.
pub fn f0_rmse(reference: &F0Contour, hypothesis: &F0Contour, log_domain: bool) -> Result<f64> {
    let pairs = co_voiced(reference, hypothesis)?;
    if pairs.is_empty() {
        return Err(Error::validation("no frames are voiced in both contours"));
    }
    let f = |v: f64| if log_domain { v.max(LOG_FLOOR_HZ).ln() } else { v };
    let sse: f64 = pairs.iter().map(|&(r, h)| (f(r) - f(h)).powi(2)).sum();
    Ok((sse / pairs.len() as f64).sqrt())
}

/// Pearson correlation over frames voiced in both contours.
pub fn f0_corr(reference: &F0Contour, hypothesis: &F0Contour) -> Result<f64> {
    let pairs = co_voiced(reference, hypothesis)?;
    if pairs.len() < 2 {
        return Err(Error::validation("F0 correlation needs at least 2 co-voiced frames"));
    }
    let (r, h): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    pearson(&r, &h)
}

/// Reflects voiced values around their mean (`2·mean − f`), clamped at
/// [`INVERSE_FLOOR_HZ`]. Unvoiced frames stay 0.
pub fn perturb_inverse(f0: &F0Contour) -> Result<F0Contour> {
    let mean = f0
        .voiced_mean()
        .ok_or_else(|| Error::validation("cannot invert an all-unvoiced F0 contour"))?;
    let values = f0
        .values()
        .iter()
        .map(|&v| {
            if v > 0.0 {
                (2.0 * mean - v).max(INVERSE_FLOOR_HZ)
            } else {
                0.0
            }
        })
        .collect();
    F0Contour::new(values)
}

/// Reverses the contour in time, unvoiced markers included.
pub fn perturb_flip(f0: &F0Contour) -> F0Contour {
    let mut values = f0.values().to_vec();
    values.reverse();
    F0Contour::new(values).expect("reversal keeps values valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbKind {
    Inverse,
    Flip,
}

impl FromStr for PerturbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse" => Ok(Self::Inverse),
            "flip" => Ok(Self::Flip),
            other => Err(Error::Config(format!(
                "unknown perturbation `{other}` (expected inverse or flip)"
            ))),
        }
    }
}

pub fn perturb(f0: &F0Contour, kind: PerturbKind) -> Result<F0Contour> {
    match kind {
        PerturbKind::Inverse => perturb_inverse(f0),
        PerturbKind::Flip => Ok(perturb_flip(f0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: &[f64]) -> F0Contour {
        F0Contour::new(v.to_vec()).unwrap()
    }

    #[test]
    fn inverse_clamps_and_keeps_unvoiced() {
        let out = perturb_inverse(&c(&[0.0, 1.0, 1.0, 400.0])).unwrap();
        assert_eq!(out.values(), &[0.0, 267.0, 267.0, INVERSE_FLOOR_HZ]);
        assert!(perturb_inverse(&c(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn length_mismatch_and_no_overlap() {
        assert!(f0_rmse(&c(&[100.0]), &c(&[100.0, 0.0]), false).is_err());
        assert!(f0_rmse(&c(&[100.0, 0.0]), &c(&[0.0, 100.0]), false).is_err());
        assert!(f0_corr(&c(&[100.0, 110.0]), &c(&[100.0, 0.0])).is_err());
    }

    #[test]
    fn log_domain() {
        let r = f0_rmse(&c(&[100.0, 200.0]), &c(&[200.0, 200.0]), true).unwrap();
        assert!((r - std::f64::consts::LN_2 / 2f64.sqrt()).abs() < 1e-12);
    }
}
