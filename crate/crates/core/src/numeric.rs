//! Small numerical utilities shared across modules: compensated summation,
//! adaptive quadrature, and least-squares line fits.

/// Kahan-Babuska compensated accumulator.
///
/// Summation order still matters for bit-level reproducibility; this only
/// removes the O(n) rounding growth of a naive running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sums a slice with compensation.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
///
/// Intended for smooth integrands; the recursion depth is capped, so an
/// integrand with sub-tolerance noise degrades accuracy instead of hanging.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    simpson_recurse(f, a, b, fa, fm, fb, whole, tol, 24)
}

/// Composite Simpson rule with `2 * half_panels` uniform panels. The
/// fixed-node form keeps the result a smooth function of the interval ends,
/// which matters when quadratures nest.
pub fn composite_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, half_panels: usize) -> f64 {
    let n = 2 * half_panels.max(1);
    let h = (b - a) / n as f64;
    let mut acc = KahanSum::new();
    acc.add(f(a));
    acc.add(f(b));
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc.add(w * f(a + i as f64 * h));
    }
    acc.value() * h / 3.0
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Ordinary least-squares fit `y = slope * x + intercept`.
///
/// Returns `None` when fewer than two distinct abscissas are given.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    assert_eq!(xs.len(), ys.len(), "mismatched fit input lengths");
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mean_x = compensated_sum(xs) / n as f64;
    let mean_y = compensated_sum(ys) / n as f64;
    let mut sxx = KahanSum::new();
    let mut sxy = KahanSum::new();
    for i in 0..n {
        let dx = xs[i] - mean_x;
        sxx.add(dx * dx);
        sxy.add(dx * (ys[i] - mean_y));
    }
    let sxx = sxx.value();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy.value() / sxx;
    Some((slope, mean_y - slope * mean_x))
}

/// Fits `|y| ~ A e^{-rate t}` by least squares on `ln |y|`, skipping
/// non-positive samples. Returns the decay rate (positive for decay).
pub fn fit_decay_rate(ts: &[f64], ys: &[f64]) -> Option<f64> {
    let mut xs = Vec::with_capacity(ts.len());
    let mut ls = Vec::with_capacity(ts.len());
    for (&t, &y) in ts.iter().zip(ys) {
        if y > 0.0 {
            xs.push(t);
            ls.push(y.ln());
        }
    }
    linear_fit(&xs, &ls).map(|(slope, _)| -slope)
}
