//! Log-gamma for positive real arguments.
//!
//! Three regimes: a Taylor expansion about the roots at 1 and 2 (where
//! `ln Gamma` vanishes and a relative bound needs care), the Lanczos
//! approximation with `g = 607/128` elsewhere on `[0.5, inf)`, and the
//! recurrence `ln Gamma(z) = ln Gamma(z + 1) - ln z` below 0.5.

use crate::error::{Error, Result};
use crate::math::{log, log1p, LN_SQRT_2PI};

const LANCZOS_G: f64 = 607.0 / 128.0;

const LANCZOS: [f64; 15] = [
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
];

const EULER_GAMMA: f64 = 0.57721566490153286061;

// zeta(k) for k = 2..=39
const ZETA: [f64; 38] = [
    1.6449340668482264365,
    1.2020569031595942854,
    1.0823232337111381915,
    1.0369277551433699263,
    1.0173430619844491397,
    1.0083492773819228268,
    1.0040773561979443394,
    1.0020083928260822144,
    1.0009945751278180853,
    1.0004941886041194646,
    1.0002460865533080483,
    1.0001227133475784891,
    1.0000612481350587048,
    1.0000305882363070205,
    1.0000152822594086519,
    1.0000076371976378998,
    1.0000038172932649998,
    1.0000019082127165539,
    1.0000009539620338728,
    1.0000004769329867878,
    1.0000002384505027277,
    1.0000001192199259653,
    1.0000000596081890513,
    1.0000000298035035147,
    1.0000000149015548284,
    1.0000000074507117898,
    1.0000000037253340248,
    1.0000000018626597235,
    1.0000000009313274324,
    1.0000000004656629065,
    1.0000000002328311834,
    1.0000000001164155017,
    1.0000000000582077209,
    1.0000000000291038504,
    1.0000000000145519219,
    1.0000000000072759598,
    1.0000000000036379795,
    1.0000000000018189897,
];

const TAYLOR_RADIUS: f64 = 0.2;

/// Natural log of the gamma function, `z > 0`.
///
/// Relative error is below `1e-13` on `(0, 5000]`, including the
/// neighbourhoods of the roots at 1 and 2.
pub fn ln_gamma(z: f64) -> Result<f64> {
    if z > 0.0 && z.is_finite() {
        Ok(ln_gamma_pos(z))
    } else {
        Err(Error::Domain { what: "ln_gamma argument", value: z })
    }
}

/// `ln_gamma` without the domain check. Caller guarantees `z > 0`.
pub(crate) fn ln_gamma_pos(z: f64) -> f64 {
    if z < 0.5 {
        return ln_gamma_pos(z + 1.0) - log(z);
    }
    let near_one = z - 1.0;
    if near_one.abs() < TAYLOR_RADIUS {
        return ln_gamma_1p(near_one);
    }
    let near_two = z - 2.0;
    if near_two.abs() < TAYLOR_RADIUS {
        return log1p(near_two) + ln_gamma_1p(near_two);
    }
    lanczos(z)
}

/// `ln Gamma(1 + e)` for small `|e|` via `-gamma e + sum (-1)^k zeta(k) e^k / k`.
fn ln_gamma_1p(e: f64) -> f64 {
    let mut acc = 0.0;
    // Horner from the tail so the smallest terms are added first.
    for (i, &zeta) in ZETA.iter().enumerate().rev() {
        let k = (i + 2) as f64;
        acc = acc * -e + zeta / k;
    }
    e * (-EULER_GAMMA + e * acc)
}

fn lanczos(z: f64) -> f64 {
    let zm1 = z - 1.0;
    let mut sum = LANCZOS[0];
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (zm1 + k as f64);
    }
    let t = zm1 + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (zm1 + 0.5) * log(t) - t + log(sum)
}

/// `ln B(a, b)`.
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma_pos(a) + ln_gamma_pos(b) - ln_gamma_pos(a + b)
}
