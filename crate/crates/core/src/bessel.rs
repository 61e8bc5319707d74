//! Bessel functions of the first kind with integer order.
//!
//! Small and moderate arguments use the ascending series; beyond
//! [`SERIES_LIMIT`] the value comes from Miller's backward recurrence,
//! normalized with `J₀ + 2ΣJ₂ₖ = 1`.

const SERIES_LIMIT: f64 = 12.0;

/// `J_n(x)` for integer `n` and real `x`.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    let order = n.unsigned_abs();
    // J₋ₙ = (−1)ⁿ Jₙ and Jₙ(−x) = (−1)ⁿ Jₙ(x)
    let mut sign = 1.0;
    if n < 0 && order % 2 == 1 {
        sign = -sign;
    }
    if x < 0.0 && order % 2 == 1 {
        sign = -sign;
    }
    let ax = x.abs();
    let value = if ax <= SERIES_LIMIT { series(order, ax) } else { miller(order, ax) };
    sign * value
}

fn series(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / f64::from(k);
    }
    if term == 0.0 {
        return 0.0;
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 0u32;
    loop {
        k += 1;
        term *= -q / (f64::from(k) * f64::from(k + n));
        sum += term;
        // terms grow until k ≈ x/2, then decay monotonically
        if f64::from(k) > half && term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            break;
        }
        if k > 500 {
            break;
        }
    }
    sum
}

fn miller(n: u32, x: f64) -> f64 {
    let start = {
        let base = (n as f64).max(x);
        let extra = (40.0 * base).sqrt() + 20.0;
        let s = (base + extra) as u32;
        s + s % 2
    };
    let mut next = 0.0; // j_{k+1}
    let mut cur = 1e-30; // j_k
    let mut norm = 0.0;
    let mut wanted = 0.0;
    let mut k = start;
    while k > 0 {
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        if k == n {
            wanted = cur;
        }
        let prev = 2.0 * f64::from(k) / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
        k -= 1;
    }
    // cur now holds j_0
    norm += cur;
    if n == 0 {
        wanted = cur;
    }
    wanted / norm
}
