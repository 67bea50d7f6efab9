/// Illinois (modified regula falsi) root of `f` on a bracket where
/// `f(a)` and `f(b)` have opposite signs.
pub(crate) fn illinois(
    mut f: impl FnMut(f64) -> f64,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    xtol: f64,
    max_iter: usize,
) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    debug_assert!(fa.signum() != fb.signum(), "root is not bracketed");
    for _ in 0..max_iter {
        let mut c = b - fb * (b - a) / (fb - fa);
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if fc.signum() != fb.signum() {
            a = b;
            fa = fb;
        } else {
            fa *= 0.5;
        }
        b = c;
        fb = fc;
        if (b - a).abs() <= xtol {
            break;
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_roots_of_kinked_and_steep_functions() {
        let r = illinois(|x| x * x - 2.0, 0.0, -2.0, 2.0, 2.0, 1e-15, 200);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        let kink = |x: f64| (3.0 - x).max(0.0) + (1.0 - x).max(0.0) - 1.5;
        let r = illinois(kink, 0.0, kink(0.0), 5.0, kink(5.0), 1e-15, 200);
        assert!((r - 1.5).abs() < 1e-13);
        let steep = |x: f64| 1.0 / x - 1e6;
        let r = illinois(steep, 1e-9, steep(1e-9), 1.0, steep(1.0), 1e-20, 500);
        assert!((r - 1e-6).abs() < 1e-15);
    }
}
