use std::fmt;

use crate::error::{Error, Result};

/// Integer or half-integer quantum number, stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn int(v: i32) -> Self {
        HalfInt(2 * v)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

fn ln_factorial(n: i32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Clebsch-Gordan coefficient <j1 m1 j2 m2 | j m> with the Condon-Shortley
/// phase (Racah's formula). Returns 0 when the triangle rule or `m = m1 + m2`
/// fails; mismatched integer/half-integer pairs are an error.
pub fn clebsch_gordan(j1: HalfInt, j2: HalfInt, m1: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> Result<f64> {
    let (tj1, tj2, tm1, tm2, tj, tm) = (j1.0, j2.0, m1.0, m2.0, j.0, m.0);
    if tj1 < 0 || tj2 < 0 || tj < 0 {
        return Err(Error::Domain("angular momenta must be nonnegative".into()));
    }
    for (jj, mm) in [(tj1, tm1), (tj2, tm2), (tj, tm)] {
        if (jj - mm).rem_euclid(2) != 0 {
            return Err(Error::Domain(format!(
                "projection {} incompatible with angular momentum {}",
                HalfInt(mm),
                HalfInt(jj)
            )));
        }
    }
    if (tj1 + tj2 + tj).rem_euclid(2) != 0 {
        return Err(Error::Domain(format!(
            "{} + {} cannot couple to {}",
            j1, j2, j
        )));
    }
    if tm1 + tm2 != tm || tm1.abs() > tj1 || tm2.abs() > tj2 || tm.abs() > tj {
        return Ok(0.0);
    }
    if tj > tj1 + tj2 || tj < (tj1 - tj2).abs() {
        return Ok(0.0);
    }
    // all combinations below are integers
    let a = (tj1 + tj2 - tj) / 2;
    let b = (tj1 - tj2 + tj) / 2;
    let c = (-tj1 + tj2 + tj) / 2;
    let d = (tj1 + tj2 + tj) / 2 + 1;
    let ln_delta = 0.5 * (ln_factorial(a) + ln_factorial(b) + ln_factorial(c) - ln_factorial(d));
    let ln_pref = 0.5
        * (((tj + 1) as f64).ln()
            + ln_factorial((tj1 + tm1) / 2)
            + ln_factorial((tj1 - tm1) / 2)
            + ln_factorial((tj2 + tm2) / 2)
            + ln_factorial((tj2 - tm2) / 2)
            + ln_factorial((tj + tm) / 2)
            + ln_factorial((tj - tm) / 2));
    let k_min = 0.max((tj2 - tj - tm1) / 2).max((tj1 - tj + tm2) / 2);
    let k_max = a.min((tj1 - tm1) / 2).min((tj2 + tm2) / 2);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let ln_den = ln_factorial(k)
            + ln_factorial(a - k)
            + ln_factorial((tj1 - tm1) / 2 - k)
            + ln_factorial((tj2 + tm2) / 2 - k)
            + ln_factorial((tj - tj2 + tm1) / 2 + k)
            + ln_factorial((tj - tj1 - tm2) / 2 + k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (ln_delta + ln_pref - ln_den).exp();
    }
    Ok(sum)
}
