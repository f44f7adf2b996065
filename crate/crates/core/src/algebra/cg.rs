//! Clebsch-Gordan coefficients via the Racah closed form.
//!
//! Factorials enter through a table of `ln n!`, which keeps every term of the
//! alternating sum in range for the spins used here (j up to ~30).

use std::sync::OnceLock;

use crate::error::{domain, Result};
use crate::HalfInt;

const LN_FACT_LEN: usize = 256;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_LEN);
        t.push(0.0);
        for n in 1..LN_FACT_LEN {
            t.push(t[n - 1] + (n as f64).ln());
        }
        t
    })
}

/// `ln(n!)` where `twice_n` is twice a nonnegative integer.
fn ln_fact(twice_n: i32) -> f64 {
    debug_assert!(twice_n >= 0 && twice_n % 2 == 0);
    ln_factorial_table()[(twice_n / 2) as usize]
}

fn check_pair(j: HalfInt, m: HalfInt) -> Result<()> {
    if !j.is_nonneg() {
        return domain(format!("negative angular momentum j = {j}"));
    }
    if m.twice().abs() > j.twice() {
        return domain(format!("projection m = {m} exceeds j = {j}"));
    }
    if (j.twice() - m.twice()) % 2 != 0 {
        return domain(format!("j = {j} and m = {m} differ by a half-integer"));
    }
    Ok(())
}

/// `<j1 m1; j2 m2 | J M>` in the Condon-Shortley convention.
///
/// Returns zero when `M != m1 + m2` or the triangle rule fails.
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Result<f64> {
    check_pair(j1, m1)?;
    check_pair(j2, m2)?;
    check_pair(j, m)?;
    Ok(clebsch_gordan_unchecked(j1, m1, j2, m2, j, m))
}

/// Same as [`clebsch_gordan`] for arguments already known to be valid.
pub(crate) fn clebsch_gordan_unchecked(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> f64 {
    if m1 + m2 != m || !HalfInt::triangle(j1, j2, j) {
        return 0.0;
    }
    let (j1, m1, j2, m2, j, m) = (j1.twice(), m1.twice(), j2.twice(), m2.twice(), j.twice(), m.twice());

    let ln_delta = ln_fact(j + j1 - j2) + ln_fact(j - j1 + j2) + ln_fact(j1 + j2 - j)
        - ln_fact(j1 + j2 + j + 2);
    let ln_norm = ln_fact(j + m)
        + ln_fact(j - m)
        + ln_fact(j1 - m1)
        + ln_fact(j1 + m1)
        + ln_fact(j2 - m2)
        + ln_fact(j2 + m2);
    let prefactor = 0.5 * (ln_delta + ln_norm);

    // k runs over all integers (twice-valued below) keeping every factorial argument >= 0.
    let k_min = 0.max(j2 - j - m1).max(j1 - j + m2);
    let k_max = (j1 + j2 - j).min(j1 - m1).min(j2 + m2);
    let mut sum = 0.0;
    let mut k = k_min;
    while k <= k_max {
        let ln_den = ln_fact(k)
            + ln_fact(j1 + j2 - j - k)
            + ln_fact(j1 - m1 - k)
            + ln_fact(j2 + m2 - k)
            + ln_fact(j - j2 + m1 + k)
            + ln_fact(j - j1 - m2 + k);
        let term = (prefactor - ln_den).exp();
        if (k / 2) % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        k += 2;
    }
    ((j + 1) as f64).sqrt() * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    #[test]
    fn two_spin_singlet() {
        let c = clebsch_gordan(h(1), h(1), h(1), h(-1), h(0), h(0)).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let c = clebsch_gordan(h(1), h(-1), h(1), h(1), h(0), h(0)).unwrap();
        assert!((c + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn stretched_state_is_one() {
        for t1 in 0..8 {
            for t2 in 0..8 {
                let c = clebsch_gordan(h(t1), h(t1), h(t2), h(t2), h(t1 + t2), h(t1 + t2)).unwrap();
                assert!((c - 1.0).abs() < 1e-13, "{t1} {t2} {c}");
            }
        }
    }

    #[test]
    fn vanishes_off_selection_rules() {
        assert_eq!(clebsch_gordan(h(2), h(0), h(2), h(0), h(2), h(2)).unwrap(), 0.0);
        assert_eq!(clebsch_gordan(h(2), h(0), h(2), h(0), h(6), h(0)).unwrap(), 0.0);
    }

    #[test]
    fn rejects_malformed_numbers() {
        assert!(clebsch_gordan(h(-1), h(1), h(1), h(0), h(0), h(0)).is_err());
        assert!(clebsch_gordan(h(1), h(3), h(1), h(-1), h(0), h(0)).is_err());
        assert!(clebsch_gordan(h(2), h(1), h(1), h(-1), h(0), h(0)).is_err());
    }
}
