use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Separation {
    None,
    /// Classes split by x except for ties at the boundary value.
    Quasi,
    /// A threshold on x splits the classes perfectly.
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub alpha: f64,
    pub beta: f64,
    pub converged: bool,
    pub separation: Separation,
    pub iterations: usize,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    pub max_iter: usize,
    /// Relative deviance change that ends iteration.
    pub tol: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^eta)` without overflow.
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

pub fn log_likelihood(x: &[f64], y: &[u8], alpha: f64, beta: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let eta = alpha + beta * xi;
            f64::from(yi) * eta - softplus(eta)
        })
        .sum()
}

/// Gradient of the log-likelihood with respect to (alpha, beta).
pub fn score(x: &[f64], y: &[u8], alpha: f64, beta: f64) -> (f64, f64) {
    x.iter().zip(y).fold((0.0, 0.0), |(ga, gb), (&xi, &yi)| {
        let r = f64::from(yi) - sigmoid(alpha + beta * xi);
        (ga + r, gb + r * xi)
    })
}

fn separation(x: &[f64], y: &[u8]) -> Separation {
    let range = |class: u8| {
        x.iter()
            .zip(y)
            .filter(|(_, &c)| c == class)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| {
                (lo.min(v), hi.max(v))
            })
    };
    let (lo0, hi0) = range(0);
    let (lo1, hi1) = range(1);
    if hi0 < lo1 || hi1 < lo0 {
        Separation::Complete
    } else if hi0 == lo1 || hi1 == lo0 {
        Separation::Quasi
    } else {
        Separation::None
    }
}

/// Fits `P(y = 1 | x) = 1 / (1 + exp(-(alpha + beta x)))` by iteratively
/// reweighted least squares.
///
/// Under separation the maximum likelihood estimate does not exist; the
/// iterate after `max_iter` steps (or after the weights underflow) is
/// reported with the separation flag and `converged = false`.
pub fn logistic_fit(x: &[f64], y: &[u8], opts: LogisticOptions) -> Result<LogisticFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientRows {
            needed: 2,
            got: x.len(),
        });
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidConfig("responses must be 0 or 1".into()));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass);
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::DegenerateDesign);
    }
    let sep = separation(x, y);
    let (mut alpha, mut beta) = (0.0, 0.0);
    let mut dev_old = -2.0 * log_likelihood(x, y, alpha, beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let (mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0);
        for &xi in x {
            let p = sigmoid(alpha + beta * xi);
            let w = p * (1.0 - p);
            h00 += w;
            h01 += w * xi;
            h11 += w * xi * xi;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det > f64::MIN_POSITIVE) || !det.is_finite() {
            break;
        }
        let (ga, gb) = score(x, y, alpha, beta);
        let (da, db) = ((h11 * ga - h01 * gb) / det, (h00 * gb - h01 * ga) / det);
        if !(da.is_finite() && db.is_finite()) {
            break;
        }
        alpha += da;
        beta += db;
        iterations += 1;
        let dev = -2.0 * log_likelihood(x, y, alpha, beta);
        if sep == Separation::None && (dev - dev_old).abs() / (dev.abs() + 0.1) < opts.tol {
            converged = true;
            break;
        }
        dev_old = dev;
    }
    Ok(LogisticFit {
        alpha,
        beta,
        converged,
        separation: sep,
        iterations,
        log_likelihood: log_likelihood(x, y, alpha, beta),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub pi_hat: f64,
}

/// Fitted probability on a grid of x values.
pub fn logistic_curve(fit: &LogisticFit, grid: &[f64]) -> Vec<CurvePoint> {
    grid.iter()
        .map(|&x| CurvePoint {
            x,
            pi_hat: sigmoid(fit.alpha + fit.beta * x),
        })
        .collect()
}

/// Writes `x,pi_hat,method` for one or more labeled curves.
pub fn write_curves_csv<W: Write>(curves: &[(&str, &[CurvePoint])], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["x", "pi_hat", "method"])?;
    for (method, points) in curves {
        for p in *points {
            w.write_record([p.x.to_string(), p.pi_hat.to_string(), method.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
