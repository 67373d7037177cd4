//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use chrono::{DateTime, Timelike, Utc};
use nalgebra::{DMatrix, DVector};

/// Solar zenith in degrees from the NOAA solar calculator (Meeus series,
/// no refraction).
pub fn noaa_zenith_deg(time: DateTime<Utc>, lat: f64, lon: f64) -> f64 {
    let jd = time.timestamp() as f64 / 86_400.0 + 2_440_587.5;
    let jc = (jd - 2_451_545.0) / 36_525.0;
    let l0 = (280.466_46 + jc * (36_000.769_83 + jc * 0.000_303_2)).rem_euclid(360.0);
    let m = 357.529_11 + jc * (35_999.050_29 - 0.000_153_7 * jc);
    let e = 0.016_708_634 - jc * (0.000_042_037 + 0.000_000_126_7 * jc);
    let mr = m.to_radians();
    let c = mr.sin() * (1.914_602 - jc * (0.004_817 + 0.000_014 * jc))
        + (2.0 * mr).sin() * (0.019_993 - 0.000_101 * jc)
        + (3.0 * mr).sin() * 0.000_289;
    let omega = (125.04 - 1934.136 * jc).to_radians();
    let app_long = (l0 + c - 0.005_69 - 0.004_78 * omega.sin()).to_radians();
    let mean_obliq = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.000_59 - jc * 0.001_813))) / 60.0) / 60.0;
    let obliq = (mean_obliq + 0.002_56 * omega.cos()).to_radians();
    let decl = (obliq.sin() * app_long.sin()).asin();
    let y = (obliq / 2.0).tan().powi(2);
    let l0r = l0.to_radians();
    let eot = 4.0
        * (y * (2.0 * l0r).sin() - 2.0 * e * mr.sin() + 4.0 * e * y * mr.sin() * (2.0 * l0r).cos()
            - 0.5 * y * y * (4.0 * l0r).sin()
            - 1.25 * e * e * (2.0 * mr).sin())
        .to_degrees();
    let minutes = f64::from(time.num_seconds_from_midnight()) / 60.0;
    let tst = (minutes + eot + 4.0 * lon).rem_euclid(1440.0);
    let ha = if tst / 4.0 < 0.0 { tst / 4.0 + 180.0 } else { tst / 4.0 - 180.0 }.to_radians();
    let phi = lat.to_radians();
    let cz = phi.sin() * decl.sin() + phi.cos() * decl.cos() * ha.cos();
    cz.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Cosine of incidence as the dot product of the unit sun vector and the
/// unit panel normal in an east-north-up frame. Azimuth 0 faces south and
/// positive azimuth turns west; positive hour angle is afternoon.
pub fn incidence_by_vectors(decl: f64, lat: f64, tilt: f64, azimuth: f64, hour_angle: f64) -> f64 {
    let sun = [
        -decl.cos() * hour_angle.sin(),
        lat.cos() * decl.sin() - lat.sin() * decl.cos() * hour_angle.cos(),
        lat.sin() * decl.sin() + lat.cos() * decl.cos() * hour_angle.cos(),
    ];
    let normal = [
        -tilt.sin() * azimuth.sin(),
        -tilt.sin() * azimuth.cos(),
        tilt.cos(),
    ];
    sun.iter().zip(&normal).map(|(a, b)| a * b).sum()
}

/// Modified Bessel function K1 from `∫₀^∞ exp(−x cosh t) cosh t dt`.
pub fn bessel_k1(x: f64) -> f64 {
    let (upper, steps) = (12.0, 24_000);
    let h = upper / steps as f64;
    let f = |t: f64| (-x * t.cosh()).exp() * t.cosh();
    let mut acc = 0.5 * (f(0.0) + f(upper));
    for k in 1..steps {
        acc += f(k as f64 * h);
    }
    acc * h
}

/// Matérn ν = 1 correlation at distance `d` with effective range `range`.
pub fn matern1_correlation(d: f64, range: f64) -> f64 {
    if d == 0.0 {
        return 1.0;
    }
    let x = 8f64.sqrt() / range * d;
    x * bessel_k1(x)
}

/// Latent conditional moments by generalised least squares in covariance
/// form. `sigma_u` is the prior covariance of the field, `design` maps the
/// field to observations, the intercept has prior variance `v0`.
/// Returns (field mean, field variances, intercept mean, intercept variance).
pub fn dense_gls(
    sigma_u: &DMatrix<f64>,
    design: &DMatrix<f64>,
    y: &[f64],
    noise_var: f64,
    v0: f64,
) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let m = y.len();
    let y = DVector::from_column_slice(y);
    let sb = sigma_u * design.transpose();
    let k0 = design * &sb + DMatrix::identity(m, m) * noise_var;
    let k0inv = k0.try_inverse().expect("observation covariance invertible");
    let ones = DVector::from_element(m, 1.0);
    let a = &k0inv * &ones;
    let c = ones.dot(&a);
    let beta_prec = 1.0 / v0 + c;
    let beta = a.dot(&y) / beta_prec;
    let resid = &y - &ones * beta;
    let mean = &sb * (&k0inv * resid);
    let g = &sb * &a;
    let reduce = &sb * &k0inv * sb.transpose();
    let var = (0..sigma_u.nrows())
        .map(|i| sigma_u[(i, i)] - reduce[(i, i)] + g[i] * g[i] / beta_prec)
        .collect();
    (mean.iter().copied().collect(), var, beta, 1.0 / beta_prec)
}

/// Reference scores: (rmse, mae, mbe, mape %, coverage).
pub fn brute_metrics(pred: &[f64], obs: &[f64], lo: &[f64], hi: &[f64], threshold: f64) -> (f64, f64, f64, Option<f64>, f64) {
    let n = pred.len() as f64;
    let mut sq = Vec::new();
    let mut abs = Vec::new();
    let mut signed = Vec::new();
    let mut pct = Vec::new();
    let mut inside = 0.0;
    for i in 0..pred.len() {
        let e = pred[i] - obs[i];
        sq.push(e * e);
        abs.push(e.abs());
        signed.push(e);
        if obs[i] > threshold {
            pct.push(100.0 * e.abs() / obs[i]);
        }
        if lo[i] <= obs[i] && obs[i] <= hi[i] {
            inside += 1.0;
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mape = if pct.is_empty() { None } else { Some(mean(&pct)) };
    (mean(&sq).sqrt(), mean(&abs), mean(&signed), mape, inside / n)
}
