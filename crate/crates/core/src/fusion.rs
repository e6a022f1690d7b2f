//! Incoherent broadband fusion, DOA extraction and RMSE scoring.

use crate::array::DoaGrid;
use crate::beamformers::NarrowbandSpectrum;
use crate::error::{Error, Result};

/// Broadband spatial spectrum after normalized incoherent fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadbandSpectrum {
    pub values: Vec<f64>,
    pub beta: f64,
    pub bin_lo: usize,
    pub bin_hi: usize,
    /// Bins dropped because their narrowband spectrum was identically zero.
    pub skipped_bins: usize,
}

/// `P(theta) = sum_f P(f,theta) / (max_theta P(f,theta))^beta`, summed in
/// ascending bin order so fused values are bit-reproducible.
///
/// Bins whose spectrum is identically zero cannot be normalized and are
/// skipped (counted in `skipped_bins`).
pub fn fuse(spectra: &[NarrowbandSpectrum], beta: f64) -> Result<BroadbandSpectrum> {
    if spectra.is_empty() {
        return Err(Error::InvalidParameter(
            "nothing to fuse: no narrowband spectra".into(),
        ));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "fusion exponent beta must lie in [0, 1], got {beta}"
        )));
    }
    let len = spectra[0].values.len();
    if spectra.iter().any(|s| s.values.len() != len) {
        return Err(Error::DimensionMismatch(
            "narrowband spectra must share one grid".into(),
        ));
    }

    let mut order: Vec<usize> = (0..spectra.len()).collect();
    order.sort_by_key(|&i| spectra[i].bin);

    let mut values = vec![0.0; len];
    let mut skipped = 0usize;
    for &i in &order {
        let s = &spectra[i];
        let max = s.values.iter().cloned().fold(f64::MIN, f64::max);
        if !(max > 0.0) {
            skipped += 1;
            continue;
        }
        let norm = max.powf(beta);
        for (acc, v) in values.iter_mut().zip(&s.values) {
            *acc += v / norm;
        }
    }

    // Phase-only spectra can dip below zero in deep nulls; the fused spectrum
    // is power-like and clamps there.
    for v in &mut values {
        *v = v.max(0.0);
    }

    Ok(BroadbandSpectrum {
        values,
        beta,
        bin_lo: spectra[order[0]].bin,
        bin_hi: spectra[*order.last().unwrap()].bin,
        skipped_bins: skipped,
    })
}

/// DOA estimates extracted from a broadband spectrum, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaEstimate {
    pub angles_deg: Vec<f64>,
    pub peak_values: Vec<f64>,
}

/// Pick `n_sources` DOAs from the spectrum.
///
/// One source: the global argmax, ties broken toward the smallest angle.
/// Several: greedy peak picking, repeatedly taking the largest local maximum
/// at least `min_separation_deg` away from every accepted peak.
pub fn locate(
    spectrum: &BroadbandSpectrum,
    grid: &DoaGrid,
    n_sources: usize,
    min_separation_deg: f64,
) -> Result<DoaEstimate> {
    if n_sources == 0 {
        return Err(Error::InvalidParameter("source count must be >= 1".into()));
    }
    let angles = grid.angles_deg();
    if spectrum.values.len() != angles.len() {
        return Err(Error::DimensionMismatch(format!(
            "spectrum has {} values but grid has {} angles",
            spectrum.values.len(),
            angles.len()
        )));
    }
    if spectrum.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "broadband spectrum contains non-finite values".into(),
        ));
    }
    let span = angles[angles.len() - 1] - angles[0];
    if span <= (n_sources as f64 - 1.0) * min_separation_deg {
        return Err(Error::InvalidParameter(format!(
            "grid span {span} deg cannot hold {n_sources} peaks {min_separation_deg} deg apart"
        )));
    }
    let values = &spectrum.values;

    if n_sources == 1 {
        let mut best = 0;
        for (i, v) in values.iter().enumerate() {
            if *v > values[best] {
                best = i;
            }
        }
        return Ok(DoaEstimate {
            angles_deg: vec![angles[best]],
            peak_values: vec![values[best]],
        });
    }

    // Local maxima (endpoints count against their single neighbor).
    let last = values.len() - 1;
    let mut candidates: Vec<usize> = (0..values.len())
        .filter(|&i| {
            let left_ok = i == 0 || values[i] > values[i - 1];
            let right_ok = i == last || values[i] >= values[i + 1];
            left_ok && right_ok
        })
        .collect();
    candidates.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap()
            .then(angles[a].partial_cmp(&angles[b]).unwrap())
    });

    let mut picked: Vec<usize> = Vec::with_capacity(n_sources);
    for &i in &candidates {
        if picked
            .iter()
            .all(|&j| (angles[i] - angles[j]).abs() >= min_separation_deg)
        {
            picked.push(i);
            if picked.len() == n_sources {
                break;
            }
        }
    }
    if picked.len() < n_sources {
        let mut found: Vec<f64> = picked.iter().map(|&i| angles[i]).collect();
        found.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return Err(Error::TooFewPeaks {
            requested: n_sources,
            found: picked.len(),
            peaks_deg: found,
        });
    }
    picked.sort_by(|&a, &b| angles[a].partial_cmp(&angles[b]).unwrap());
    Ok(DoaEstimate {
        angles_deg: picked.iter().map(|&i| angles[i]).collect(),
        peak_values: picked.iter().map(|&i| values[i]).collect(),
    })
}

/// Squared estimate-truth mismatches after nearest assignment (both lists
/// sorted ascending, then paired index-wise).
pub(crate) fn matched_squared_errors(estimates: &[f64], truths: &[f64]) -> Vec<f64> {
    let mut est = estimates.to_vec();
    let mut tru = truths.to_vec();
    est.sort_by(|a, b| a.partial_cmp(b).unwrap());
    tru.sort_by(|a, b| a.partial_cmp(b).unwrap());
    est.iter().zip(&tru).map(|(e, t)| (e - t).powi(2)).collect()
}

/// Root mean square error in degrees; multisource estimates are matched to
/// truths by nearest assignment on the sorted lists.
pub fn rmse(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.is_empty() || truths.is_empty() {
        return Err(Error::InvalidParameter(
            "RMSE of empty estimate list".into(),
        ));
    }
    if estimates.len() != truths.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates vs {} truths",
            estimates.len(),
            truths.len()
        )));
    }
    if estimates.iter().chain(truths).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("RMSE inputs must be finite".into()));
    }
    let sq = matched_squared_errors(estimates, truths);
    Ok((sq.iter().sum::<f64>() / sq.len() as f64).sqrt())
}
