//! Fits and profile statistics reported by runs.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::exec::Parallelism;
use crate::fields::{NestField, NestKind, ScalarField};
use crate::microsim::build_switch_rates;
use crate::params::ModelParams;

/// A fitted quantity with its 95% confidence interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fit {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

/// Least-squares line through `(x, y)`: `(slope, intercept, slope standard error)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Some((slope, intercept, se))
}

fn fit_from(value: f64, se: f64, n: usize) -> Fit {
    let half = if n > 2 && se.is_finite() {
        let t = StudentsT::new(0.0, 1.0, (n - 2) as f64)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::INFINITY);
        t * se
    } else {
        f64::INFINITY
    };
    Fit {
        value,
        ci_low: value - half,
        ci_high: value + half,
        points: n,
    }
}

/// Potential that decreases along the streaker heading: the distance to a
/// point nest, or the coordinate along a uniform `b`.
pub fn nest_potential(nest: &NestField, p: [f64; 2]) -> f64 {
    match nest.kind {
        NestKind::Point(x) => {
            let d = nest.b.grid.displacement(x, p);
            d[0].hypot(d[1])
        }
        NestKind::Uniform(d) => {
            let n = d[0].hypot(d[1]);
            (p[0] * d[0] + p[1] * d[1]) / n
        }
    }
}

/// `(s, mass)` bins of width one cell along the nest potential, where
/// `s = origin - potential` grows towards the nest. Cells in the nest
/// exclusion zone and in wall cells are skipped. On a closed grid with a
/// uniform nest the band within the exclusion radius of the nest-side wall
/// is where leaders land, and it is skipped too.
fn bin_along_nest(field: &ScalarField, nest: &NestField, origin: f64, keep: impl Fn(usize) -> bool) -> Vec<(f64, f64)> {
    let g = field.grid;
    let h = g.hx().min(g.hy());
    let closed = g.boundary == crate::fields::Boundary::Outflow;
    let landing = match nest.kind {
        NestKind::Uniform(_) if closed => {
            (0..g.len())
                .map(|k| nest_potential(nest, g.center_of(k)))
                .fold(f64::INFINITY, f64::min)
                + nest.exclusion_radius
        }
        _ => f64::NEG_INFINITY,
    };
    let mut bins: Vec<f64> = Vec::new();
    for k in 0..g.len() {
        let (i, j) = g.coords(k);
        if closed && (i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1) {
            continue;
        }
        let p = g.center_of(k);
        let phi = nest_potential(nest, p);
        if (matches!(nest.kind, NestKind::Point(_)) && phi < nest.exclusion_radius) || phi < landing {
            continue;
        }
        let s = origin - phi;
        if s < 0.0 || !keep(k) {
            continue;
        }
        let b = (s / h) as usize;
        if bins.len() <= b {
            bins.resize(b + 1, 0.0);
        }
        bins[b] += field.data[k] * g.cell_area();
    }
    bins.into_iter()
        .enumerate()
        .map(|(b, m)| ((b as f64 + 0.5) * h, m))
        .collect()
}

/// Exponential decay rate of the streaker mass beyond the front edge.
///
/// The front edge is the nest-most cell with `rho_f >= inside_fraction *
/// max(rho_f)`. Streaker mass is summed in one-cell bins of the nest
/// potential, the first `skip` length is dropped, and `ln(mass)` is fitted
/// down to `floor * max(mass)`. The value is the rate `1 / length`.
pub fn front_decay_fit(
    rho_f: &ScalarField,
    rho_s: &ScalarField,
    nest: &NestField,
    params: &ModelParams,
    skip: f64,
    floor: f64,
) -> Option<Fit> {
    let g = rho_f.grid;
    let cut = params.rates.inside_fraction * rho_f.max();
    let front = (0..g.len())
        .filter(|&k| rho_f.data[k] > 0.0 && rho_f.data[k] >= cut)
        .map(|k| nest_potential(nest, g.center_of(k)))
        .fold(f64::INFINITY, f64::min);
    if !front.is_finite() {
        return None;
    }
    let bins = bin_along_nest(rho_s, nest, front, |k| rho_f.data[k] < cut);
    let top = bins.iter().filter(|b| b.0 >= skip).map(|b| b.1).fold(0.0, f64::max);
    if !(top > 0.0) {
        return None;
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &(s, m) in bins.iter().filter(|b| b.0 >= skip) {
        if !(m > floor * top) {
            break;
        }
        xs.push(s);
        ys.push(m.ln());
    }
    if xs.len() < 4 {
        return None;
    }
    let (slope, _, se) = linear_fit(&xs, &ys)?;
    Some(fit_from(-slope, se, xs.len()))
}

/// Speed of a moving center of mass, fitted along its net displacement.
pub fn pulse_speed_fit(times: &[f64], centers: &[[f64; 2]]) -> Option<Fit> {
    if times.len() < 2 || centers.len() != times.len() {
        return None;
    }
    let (a, b) = (centers[0], centers[centers.len() - 1]);
    let d = [b[0] - a[0], b[1] - a[1]];
    let n = d[0].hypot(d[1]);
    let dir = if n > 0.0 { [d[0] / n, d[1] / n] } else { [1.0, 0.0] };
    let s: Vec<f64> = centers.iter().map(|c| (c[0] - a[0]) * dir[0] + (c[1] - a[1]) * dir[1]).collect();
    let (slope, _, se) = linear_fit(times, &s)?;
    Some(fit_from(slope, se, times.len()))
}

/// Streaker-to-passive conversion flux `R_sp rho_s` summed in one-cell bins
/// along the nest potential, ordered towards the nest.
pub fn conversion_profile(
    rho_f: &ScalarField,
    rho_s: &ScalarField,
    nest: &NestField,
    params: &ModelParams,
    par: Parallelism,
) -> Vec<(f64, f64)> {
    let g = rho_f.grid;
    let rates = build_switch_rates(rho_f, &nest.b, params, par);
    let flux = ScalarField {
        grid: g,
        data: (0..g.len()).map(|k| rates.r_sp.data[k] * rho_s.data[k]).collect(),
    };
    let top = (0..g.len())
        .map(|k| nest_potential(nest, g.center_of(k)))
        .fold(f64::NEG_INFINITY, f64::max);
    bin_along_nest(&flux, nest, top, |_| true)
}

/// Number of local maxima whose topographic prominence is at least
/// `rel * max(values)`.
pub fn count_peaks(values: &[f64], rel: f64) -> usize {
    let top = values.iter().copied().fold(0.0, f64::max);
    if !(top > 0.0) {
        return 0;
    }
    let n = values.len();
    let mut count = 0;
    let mut i = 0;
    while i < n {
        // a plateau counts once
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let v = values[i];
        let left_ok = i == 0 || values[i - 1] < v;
        let right_ok = j == n - 1 || values[j + 1] < v;
        if left_ok && right_ok && v > 0.0 {
            // ties go to the leftmost of equal peaks; an empty side has no saddle
            let base = |range: &mut dyn Iterator<Item = usize>, stop_at_equal: bool| {
                let mut low: Option<f64> = None;
                for k in range {
                    if values[k] > v || (stop_at_equal && values[k] == v) {
                        return Some(low.unwrap_or(v));
                    }
                    low = Some(low.map_or(values[k], |l: f64| l.min(values[k])));
                }
                low
            };
            let left = base(&mut (0..i).rev(), true);
            let right = base(&mut (j + 1..n), false);
            let saddle = match (left, right) {
                (Some(a), Some(b)) => a.max(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => 0.0,
            };
            if v - saddle >= rel * top {
                count += 1;
            }
        }
        i = j + 1;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_line_is_recovered() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let (s, i, se) = linear_fit(&x, &y).unwrap();
        assert_relative_eq!(s, -0.5, epsilon = 1e-12);
        assert_relative_eq!(i, 3.0, epsilon = 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn noisy_line_interval_matches_t_quantile() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 1.1, 1.9, 3.0];
        let (s, _, se) = linear_fit(&x, &y).unwrap();
        let f = fit_from(s, se, 4);
        // t(0.975, 2) = 4.302652729911275
        assert_relative_eq!(f.ci_high - f.value, 4.302652729911275 * se, max_relative = 1e-9);
    }

    #[test]
    fn peaks_by_prominence() {
        assert_eq!(count_peaks(&[0.0, 1.0, 0.0, 1.0, 0.0], 0.25), 2);
        assert_eq!(count_peaks(&[0.0, 1.0, 0.9, 1.0, 0.0], 0.25), 1);
        assert_eq!(count_peaks(&[0.0, 2.0, 2.0, 0.0], 0.25), 1);
        assert_eq!(count_peaks(&[0.0; 5], 0.25), 0);
        assert_eq!(count_peaks(&[3.0, 2.0, 1.0], 0.25), 1);
    }

    proptest! {
        #[test]
        fn single_bump_has_one_peak(c in 5usize..45, w in 1.0f64..6.0) {
            let v: Vec<f64> = (0..50).map(|i| (-((i as f64 - c as f64) / w).powi(2)).exp()).collect();
            prop_assert_eq!(count_peaks(&v, 0.25), 1);
        }
    }
}
