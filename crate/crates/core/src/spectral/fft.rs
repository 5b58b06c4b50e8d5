//! Complex-to-complex FFT engine: mixed radix (2/3/5) with a Bluestein
//! fallback for any remaining prime factor, so every length is supported.
//!
//! Transforms are unnormalized in both directions; callers apply 1/n on the
//! inverse. Plans (factorizations + twiddle tables) are cached per length
//! behind a mutex, so concurrent transforms are safe.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct C64 {
    pub re: f64,
    pub im: f64,
}

impl C64 {
    pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        C64 { re, im }
    }

    pub fn conj(self) -> Self {
        C64 { re: self.re, im: -self.im }
    }

    pub fn add(self, o: C64) -> Self {
        C64 { re: self.re + o.re, im: self.im + o.im }
    }

    pub fn mul(self, o: C64) -> Self {
        C64 {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    pub fn scale(self, s: f64) -> Self {
        C64 { re: self.re * s, im: self.im * s }
    }

    /// e^{i·theta}
    pub fn cis(theta: f64) -> Self {
        C64 { re: theta.cos(), im: theta.sin() }
    }
}

pub(crate) struct Plan {
    n: usize,
    /// Radix sequence whose product is n (empty when n == 1 or Bluestein).
    factors: Vec<usize>,
    /// tw[j] = e^{-2·pi·i·j/n}
    tw: Vec<C64>,
    bluestein: Option<Box<Bluestein>>,
}

struct Bluestein {
    m: usize,
    plan_m: Arc<Plan>,
    /// chirp[k] = e^{-i·pi·k^2/n}
    chirp: Vec<C64>,
    /// FFT_m of the circularly embedded conj-chirp (forward direction).
    b_fwd: Vec<C64>,
    /// Same for the inverse direction (chirp conjugated).
    b_inv: Vec<C64>,
}

fn smooth_factors(mut n: usize) -> (Vec<usize>, usize) {
    let mut factors = Vec::new();
    for &r in &[2usize, 3, 5] {
        while n % r == 0 {
            factors.push(r);
            n /= r;
        }
    }
    (factors, n)
}

impl Plan {
    fn new(n: usize) -> Plan {
        assert!(n >= 1);
        let (factors, leftover) = smooth_factors(n);
        let tw: Vec<C64> = (0..n)
            .map(|j| C64::cis(-2.0 * std::f64::consts::PI * j as f64 / n as f64))
            .collect();
        if leftover == 1 {
            return Plan { n, factors, tw, bluestein: None };
        }
        // Bluestein: X_k = c_k · IFFT_m(FFT_m(x·c) · FFT_m(conj-chirp))_k
        // with c_k = e^{-i·pi·k^2/n}; k^2 is reduced mod 2n in integers to
        // keep the angle argument small.
        let m = (2 * n - 1).next_power_of_two();
        let plan_m = Arc::new(Plan::new(m));
        let chirp: Vec<C64> = (0..n)
            .map(|k| {
                let sq = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
                C64::cis(-std::f64::consts::PI * sq / n as f64)
            })
            .collect();
        let embed = |dir_conj: bool| -> Vec<C64> {
            let mut b = vec![C64::ZERO; m];
            for j in 0..n {
                let v = if dir_conj { chirp[j].conj() } else { chirp[j] };
                b[j] = v;
                if j > 0 {
                    b[m - j] = v;
                }
            }
            let mut out = vec![C64::ZERO; m];
            fft(&plan_m, &b, &mut out, false);
            out
        };
        let b_fwd = embed(true);
        let b_inv = embed(false);
        Plan {
            n,
            factors,
            tw,
            bluestein: Some(Box::new(Bluestein { m, plan_m, chirp, b_fwd, b_inv })),
        }
    }
}

fn plan_cache() -> &'static Mutex<HashMap<usize, Arc<Plan>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plan>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub(crate) fn plan_for(n: usize) -> Arc<Plan> {
    let mut cache = plan_cache().lock().expect("fft plan cache poisoned");
    cache.entry(n).or_insert_with(|| Arc::new(Plan::new(n))).clone()
}

/// Out-of-place DFT of length `plan.n`. `inverse` flips the exponent sign;
/// no normalization is applied in either direction.
pub(crate) fn fft(plan: &Plan, input: &[C64], out: &mut [C64], inverse: bool) {
    debug_assert_eq!(input.len(), plan.n);
    debug_assert_eq!(out.len(), plan.n);
    if let Some(b) = &plan.bluestein {
        bluestein(plan, b, input, out, inverse);
        return;
    }
    rec(plan, input, 1, out, plan.n, 0, inverse);
}

/// Decimation-in-time: sub-transform q reads input offset q with stride r.
fn rec(plan: &Plan, input: &[C64], in_stride: usize, out: &mut [C64], n: usize, level: usize, inverse: bool) {
    if n == 1 {
        out[0] = input[0];
        return;
    }
    let r = plan.factors[level];
    let m = n / r;
    for q in 0..r {
        rec(plan, &input[q * in_stride..], in_stride * r, &mut out[q * m..(q + 1) * m], m, level + 1, inverse);
    }
    let step = plan.n / n;
    let mut tmp = [C64::ZERO; 5];
    for k1 in 0..m {
        for (q, t) in tmp.iter_mut().enumerate().take(r) {
            *t = out[q * m + k1];
        }
        for k2 in 0..r {
            let k = k2 * m + k1;
            let mut acc = tmp[0];
            for (q, &t) in tmp.iter().enumerate().take(r).skip(1) {
                let ix = (q * k * step) % plan.n;
                let w = if inverse { plan.tw[ix].conj() } else { plan.tw[ix] };
                acc = acc.add(w.mul(t));
            }
            out[k] = acc;
        }
    }
}

fn bluestein(plan: &Plan, b: &Bluestein, input: &[C64], out: &mut [C64], inverse: bool) {
    let n = plan.n;
    let chirp_at = |k: usize| if inverse { b.chirp[k].conj() } else { b.chirp[k] };
    let mut a = vec![C64::ZERO; b.m];
    for j in 0..n {
        a[j] = input[j].mul(chirp_at(j));
    }
    let mut fa = vec![C64::ZERO; b.m];
    fft(&b.plan_m, &a, &mut fa, false);
    let bspec = if inverse { &b.b_inv } else { &b.b_fwd };
    for (v, w) in fa.iter_mut().zip(bspec) {
        *v = v.mul(*w);
    }
    let mut conv = vec![C64::ZERO; b.m];
    fft(&b.plan_m, &fa, &mut conv, true);
    let scale = 1.0 / b.m as f64;
    for k in 0..n {
        out[k] = conv[k].scale(scale).mul(chirp_at(k));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(input: &[C64], inverse: bool) -> Vec<C64> {
        let n = input.len();
        let sign = if inverse { 1.0 } else { -1.0 };
        (0..n)
            .map(|k| {
                let mut acc = C64::ZERO;
                for (j, &x) in input.iter().enumerate() {
                    let ang = sign * 2.0 * std::f64::consts::PI * (j * k % n) as f64 / n as f64;
                    acc = acc.add(x.mul(C64::cis(ang)));
                }
                acc
            })
            .collect()
    }

    fn random_signal(n: usize, seed: u64) -> Vec<C64> {
        // Tiny deterministic LCG; quality is irrelevant here.
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        (0..n).map(|_| C64::new(next(), next())).collect()
    }

    #[test]
    fn matches_naive_all_small_sizes() {
        for n in 1..=32 {
            let x = random_signal(n, n as u64);
            let plan = plan_for(n);
            let mut out = vec![C64::ZERO; n];
            for &inv in &[false, true] {
                fft(&plan, &x, &mut out, inv);
                let want = naive(&x, inv);
                for (a, b) in out.iter().zip(&want) {
                    assert!((a.re - b.re).abs() < 1e-9 && (a.im - b.im).abs() < 1e-9, "n={n} inv={inv}");
                }
            }
        }
    }

    #[test]
    fn bluestein_hits_prime_sizes() {
        for &n in &[7usize, 11, 13, 17, 37, 97] {
            let plan = plan_for(n);
            assert!(plan.bluestein.is_some());
            let x = random_signal(n, n as u64);
            let mut out = vec![C64::ZERO; n];
            fft(&plan, &x, &mut out, false);
            let want = naive(&x, false);
            for (a, b) in out.iter().zip(&want) {
                assert!((a.re - b.re).abs() < 1e-8 && (a.im - b.im).abs() < 1e-8, "n={n}");
            }
        }
    }

    #[test]
    fn forward_then_inverse_round_trips() {
        for &n in &[1usize, 2, 6, 12, 45, 64, 96, 384] {
            let x = random_signal(n, 3 * n as u64 + 1);
            let plan = plan_for(n);
            let mut f = vec![C64::ZERO; n];
            let mut b = vec![C64::ZERO; n];
            fft(&plan, &x, &mut f, false);
            fft(&plan, &f, &mut b, true);
            for (a, orig) in b.iter().zip(&x) {
                assert!((a.re / n as f64 - orig.re).abs() < 1e-10);
                assert!((a.im / n as f64 - orig.im).abs() < 1e-10);
            }
        }
    }
}
