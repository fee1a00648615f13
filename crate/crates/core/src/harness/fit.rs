use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `y = c * x^exponent` with one-sigma uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub c: f64,
    pub exponent: f64,
    pub c_err: f64,
    pub exponent_err: f64,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.c * x.powf(self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedExponentFit {
    pub c: f64,
    pub c_err: f64,
    pub exponent: f64,
}

/// Log-space points with weights `1 / sigma_log^2`, or unit weights when no
/// point carries an error bar.
fn log_points(points: &[(f64, f64, f64)]) -> Result<Vec<(f64, f64, f64)>> {
    if points.iter().any(|&(x, y, e)| !(x > 0.0) || !(y > 0.0) || !(e >= 0.0)) {
        return Err(Error::DegenerateFit("need x > 0, y > 0, y_err >= 0".into()));
    }
    let weighted = points.iter().all(|p| p.2 > 0.0);
    Ok(points
        .iter()
        .map(|&(x, y, e)| {
            let w = if weighted { (y / e).powi(2) } else { 1.0 };
            (x.ln(), y.ln(), w)
        })
        .collect())
}

/// Weighted least squares of `ln y` against `ln x`.
///
/// Uncertainties are scaled by the reduced chi-square of the fit.
pub fn fit_power_law(points: &[(f64, f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit("need at least 3 points".into()));
    }
    let lp = log_points(points)?;
    let sw: f64 = lp.iter().map(|p| p.2).sum();
    let mx = lp.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = lp.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = lp.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    if !(sxx > 1e-300) {
        return Err(Error::DegenerateFit("all x values are equal".into()));
    }
    let sxy: f64 = lp.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let chi2: f64 = lp.iter().map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2)).sum();
    let scale = chi2 / (lp.len() - 2) as f64;
    let var_slope = scale / sxx;
    let var_intercept = scale * (1.0 / sw + mx * mx / sxx);
    let c = intercept.exp();
    Ok(PowerLawFit {
        c,
        exponent: slope,
        c_err: c * var_intercept.sqrt(),
        exponent_err: var_slope.sqrt(),
    })
}

/// Proportionality constant of `y = c * x^exponent` for a given exponent.
pub fn fit_fixed_exponent(points: &[(f64, f64, f64)], exponent: f64) -> Result<FixedExponentFit> {
    if points.is_empty() {
        return Err(Error::DegenerateFit("no points".into()));
    }
    let lp = log_points(points)?;
    let sw: f64 = lp.iter().map(|p| p.2).sum();
    let resid: Vec<(f64, f64)> = lp.iter().map(|p| (p.1 - exponent * p.0, p.2)).collect();
    let mean = resid.iter().map(|r| r.0 * r.1).sum::<f64>() / sw;
    let c = mean.exp();
    let c_err = if lp.len() > 1 {
        let chi2: f64 = resid.iter().map(|r| r.1 * (r.0 - mean).powi(2)).sum();
        c * (chi2 / (lp.len() - 1) as f64 / sw).sqrt()
    } else {
        0.0
    };
    Ok(FixedExponentFit { c, c_err, exponent })
}
