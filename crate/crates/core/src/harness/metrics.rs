use crate::error::{invalid, Error, Result};
use crate::protocol::TrajectoryRecord;

/// Root-mean-square waveform error over the whole record.
///
/// The truth is piecewise constant between its samples and each estimate is
/// held until the next one. Time before the first estimate is excluded.
pub fn waveform_error(record: &TrajectoryRecord) -> Result<f64> {
    waveform_error_after(record, f64::NEG_INFINITY)
}

/// [`waveform_error`] restricted to `[max(start, first estimate), t_end]`.
///
/// If that window has zero length the RMS of the instantaneous errors of the
/// estimates inside it is returned instead.
pub fn waveform_error_after(record: &TrajectoryRecord, start: f64) -> Result<f64> {
    let rows = &record.rows;
    let first = rows.first().ok_or(Error::EmptyRecord)?;
    let t0 = start.max(first.t);
    let t_end = record.t_end.max(rows.last().unwrap().t);

    let mut truth: Vec<(f64, f64)> = record
        .truth
        .iter()
        .copied()
        .chain(rows.iter().map(|r| (r.t, r.f_true)))
        .collect();
    truth.sort_by(|a, b| a.0.total_cmp(&b.0));

    if !(t_end > t0) {
        let errs: Vec<f64> = rows
            .iter()
            .filter(|r| r.t >= t0)
            .map(|r| (r.f_true - r.f_hat).powi(2))
            .collect();
        if errs.is_empty() {
            return Err(Error::EmptyRecord);
        }
        return Ok((errs.iter().sum::<f64>() / errs.len() as f64).sqrt());
    }

    let Some(mut ti) = truth.partition_point(|p| p.0 <= t0).checked_sub(1) else {
        return invalid("no truth sample at the start of the scored window");
    };
    let mut ei = rows.partition_point(|r| r.t <= t0) - 1;

    let mut acc = 0.0;
    let mut lo = t0;
    loop {
        let next_truth = truth.get(ti + 1).map_or(f64::INFINITY, |p| p.0);
        let next_est = rows.get(ei + 1).map_or(f64::INFINITY, |r| r.t);
        let hi = next_truth.min(next_est).min(t_end);
        let err = truth[ti].1 - rows[ei].f_hat;
        acc += err * err * (hi - lo);
        if hi >= t_end {
            break;
        }
        lo = hi;
        while truth.get(ti + 1).is_some_and(|p| p.0 <= lo) {
            ti += 1;
        }
        while rows.get(ei + 1).is_some_and(|r| r.t <= lo) {
            ei += 1;
        }
    }
    Ok((acc / (t_end - t0)).sqrt())
}

/// Ratio of the non-tracking to the tracking waveform error.
pub fn eta(eps_non_tracking: f64, eps_tracking: f64) -> Result<f64> {
    if !(eps_non_tracking > 0.0) || !(eps_tracking > 0.0) {
        return invalid("eta needs two positive errors");
    }
    Ok(eps_non_tracking / eps_tracking)
}
