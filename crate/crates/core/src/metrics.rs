//! Image quality metrics and mask-based component scores.

use crate::error::{Error, Result};
use crate::geometry::Image;

fn check_sizes(x: &Image, reference: &Image) -> Result<()> {
    if x.size() != reference.size() {
        return Err(Error::Dimension(format!("image sizes {} and {} differ", x.size(), reference.size())));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB with peak `max(reference)`. Identical
/// images give `f64::INFINITY`.
pub fn psnr(x: &Image, reference: &Image) -> Result<f64> {
    check_sizes(x, reference)?;
    let n = x.data().len() as f64;
    let mse = x.data().iter().zip(reference.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    let peak = reference.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(psnr_from(peak, mse))
}

/// PSNR restricted to pixels where `mask` is set.
pub fn psnr_masked(x: &Image, reference: &Image, mask: &[bool]) -> Result<f64> {
    check_sizes(x, reference)?;
    if mask.len() != x.data().len() {
        return Err(Error::Dimension("mask length does not match image".into()));
    }
    let (mut se, mut n, mut peak) = (0.0, 0usize, f64::NEG_INFINITY);
    for ((a, b), &m) in x.data().iter().zip(reference.data()).zip(mask) {
        if m {
            se += (a - b) * (a - b);
            n += 1;
            peak = peak.max(*b);
        }
    }
    if n == 0 {
        return Err(Error::EmptyData("mask selects no pixels".into()));
    }
    Ok(psnr_from(peak, se / n as f64))
}

fn psnr_from(peak: f64, mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

fn mean_where(values: impl Iterator<Item = f64>, select: impl Iterator<Item = bool>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (v, s) in values.zip(select) {
        if s {
            sum += v;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ratio of the mean deviation of `component` from its background level
/// inside the crack mask to the same mean over the rest of the support.
///
/// The background level is the median of `component` over non-crack
/// support pixels. A component holding the cracks on a flat background
/// scores high; one with no crack signature scores about 1.
pub fn crack_capture(component: &Image, crack: &[bool], support: &[bool]) -> Result<f64> {
    let n = component.data().len();
    if crack.len() != n || support.len() != n {
        return Err(Error::Dimension("mask length does not match image".into()));
    }
    let background: Vec<f64> = component
        .data()
        .iter()
        .zip(crack.iter().zip(support))
        .filter(|(_, (&c, &s))| s && !c)
        .map(|(v, _)| *v)
        .collect();
    if background.is_empty() {
        return Err(Error::EmptyData("no background pixels".into()));
    }
    let level = median(background);
    let dev = || component.data().iter().map(move |v| (v - level).abs());
    let inside = mean_where(dev(), crack.iter().zip(support).map(|(&c, &s)| c && s))
        .ok_or_else(|| Error::EmptyData("crack mask selects no pixels".into()))?;
    let outside = mean_where(dev(), crack.iter().zip(support).map(|(&c, &s)| !c && s)).unwrap_or(0.0);
    Ok(if outside == 0.0 { f64::INFINITY } else { inside / outside })
}

/// Mean of `|component|` over the crack mask divided by the mean over the
/// rest of the support.
pub fn abs_mean_ratio(component: &Image, crack: &[bool], support: &[bool]) -> Result<f64> {
    let n = component.data().len();
    if crack.len() != n || support.len() != n {
        return Err(Error::Dimension("mask length does not match image".into()));
    }
    let abs = || component.data().iter().map(|v| v.abs());
    let inside = mean_where(abs(), crack.iter().zip(support).map(|(&c, &s)| c && s))
        .ok_or_else(|| Error::EmptyData("crack mask selects no pixels".into()))?;
    let outside = mean_where(abs(), crack.iter().zip(support).map(|(&c, &s)| !c && s)).unwrap_or(0.0);
    Ok(if outside == 0.0 { f64::INFINITY } else { inside / outside })
}

/// How strongly a fibre component shows the cracks: the mean of
/// `fibre_truth - component` over the crack mask minus its mean over the
/// rest of the support. Zero when the component ignores the cracks; close
/// to the fibre level when it reproduces them.
pub fn crack_signal(component: &Image, fibre_truth: &Image, crack: &[bool], support: &[bool]) -> Result<f64> {
    check_sizes(component, fibre_truth)?;
    let diff = || component.data().iter().zip(fibre_truth.data()).map(|(u, f)| f - u);
    let inside = mean_where(diff(), crack.iter().zip(support).map(|(&c, &s)| c && s))
        .ok_or_else(|| Error::EmptyData("crack mask selects no pixels".into()))?;
    let outside = mean_where(diff(), crack.iter().zip(support).map(|(&c, &s)| !c && s)).unwrap_or(0.0);
    Ok(inside - outside)
}
