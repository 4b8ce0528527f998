//! Shared numerical primitives: a Lanczos log-gamma and compensated sums.

use std::f64::consts::{E, PI};

/// Lanczos shift parameter paired with [`LANCZOS_COEFFS`].
const LANCZOS_R: f64 = 10.900511;

/// Lanczos partial-fraction coefficients for g = 10.900511, giving relative
/// accuracy near 1e-14 over the positive reals.
const LANCZOS_COEFFS: [f64; 11] = [
    2.48574089138753565546e-5,
    1.05142378581721974210,
    -3.45687097222016235469,
    4.51227709466894823700,
    -2.98285225323576655721,
    1.05639711577126713077,
    -1.95428773191645869583e-1,
    1.70970543404441224307e-2,
    -5.71926117404305781283e-4,
    4.63399473359905636708e-6,
    -2.71994908488607703910e-9,
];

/// ln(2 * sqrt(e / pi))
const LN_2_SQRT_E_OVER_PI: f64 = 0.6207822376352452223455184457816472122518527279025978;

/// ln(pi)
const LN_PI: f64 = 1.1447298858494001741434273513530587116472948129153;

/// Natural log of the gamma function for finite `x` that is not a
/// non-positive integer. Arguments below 1/2 go through the reflection
/// formula so small shape parameters keep full precision.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let s = LANCZOS_COEFFS
            .iter()
            .enumerate()
            .skip(1)
            .fold(LANCZOS_COEFFS[0], |acc, (k, c)| acc + c / (k as f64 - x));
        LN_PI
            - (PI * x).sin().ln()
            - s.ln()
            - LN_2_SQRT_E_OVER_PI
            - (0.5 - x) * ((0.5 - x + LANCZOS_R) / E).ln()
    } else {
        let s = LANCZOS_COEFFS
            .iter()
            .enumerate()
            .skip(1)
            .fold(LANCZOS_COEFFS[0], |acc, (k, c)| acc + c / (x - 1.0 + k as f64));
        s.ln() + LN_2_SQRT_E_OVER_PI + (x - 0.5) * ((x - 0.5 + LANCZOS_R) / E).ln()
    }
}

/// Kahan compensated accumulator. The running error stays near one ulp of
/// the total magnitude instead of growing with the term count.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

/// Turns log weights into a normalized probability vector via a max shift,
/// so any common scale (however extreme) cancels before exponentiation.
pub(crate) fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    debug_assert!(!log_w.is_empty());
    let shift = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = log_w.iter().map(|&x| (x - shift).exp()).collect();
    let mut total = KahanSum::new();
    for &x in &w {
        total.add(x);
    }
    let total = total.value();
    for x in &mut w {
        *x /= total;
    }
    w
}
