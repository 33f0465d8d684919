//! Derivative-free minimizers used by the rate and estimation code.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    // The cap guards tolerances below the float spacing.
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimum of `f` on `[lo, hi]`: an evenly spaced pre-scan (endpoints
/// included) followed by golden-section refinement around the best sample.
pub fn minimize_scalar<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, prescan: usize, tol: f64) -> (f64, f64) {
    if hi - lo <= 1e-12 {
        let x = 0.5 * (lo + hi);
        return (x, f(x));
    }
    let n = prescan.max(3);
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let best = (0..n).min_by(|&i, &j| fs[i].total_cmp(&fs[j])).unwrap();
    let a = xs[best.saturating_sub(1)];
    let b = xs[(best + 1).min(n - 1)];
    let (x, fx) = golden_min(&mut f, a, b, tol);
    if fx < fs[best] {
        (x, fx)
    } else {
        (xs[best], fs[best])
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    /// Stop once every vertex lies within this distance of the best vertex.
    pub xtol: f64,
    pub max_iter: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { initial_step: 0.05, xtol: 1e-8, max_iter: 5000 }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex search. Infeasible points should map to `+∞`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    // Pull back vertices that start outside the feasible region.
    for i in 1..=n {
        let mut tries = 0;
        while !values[i].is_finite() && tries < 40 {
            for j in 0..n {
                simplex[i][j] = x0[j] + 0.5 * (simplex[i][j] - x0[j]);
            }
            values[i] = f(&simplex[i]);
            tries += 1;
        }
        if !values[i].is_finite() {
            // Try the opposite direction.
            simplex[i] = x0.to_vec();
            simplex[i][i - 1] -= opts.initial_step;
            values[i] = f(&simplex[i]);
        }
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let size = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < opts.xtol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for j in 0..n {
                centroid[j] += v[j] / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };

        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(-0.5);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            for (v, b) in simplex[i].iter_mut().zip(&best) {
                *v = b + 0.5 * (*v - b);
            }
            values[i] = f(&simplex[i]);
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    NelderMeadResult { x: simplex[best].clone(), fx: values[best], iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden_min(|x| (x - 0.3).powi(2) + 1.0, -1.0, 1.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-14);
    }

    #[test]
    fn prescan_catches_endpoint_minimum() {
        let (x, fx) = minimize_scalar(|x| x, 0.0, 1.0, 200, 1e-7);
        assert_eq!(x, 0.0);
        assert_eq!(fx, 0.0);
        let (x, _) = minimize_scalar(|x| (x - 0.5).powi(2), 0.5, 0.5, 200, 1e-7);
        assert_eq!(x, 0.5);
    }

    #[test]
    fn prescan_handles_two_wells() {
        let f = |x: f64| ((x + 0.6).powi(2) - 0.01).min((x - 0.7).powi(2) - 0.02);
        let (x, _) = minimize_scalar(f, -1.0, 1.0, 200, 1e-9);
        assert!((x - 0.7).abs() < 1e-7);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |v: &[f64]| (1.0 - v[0]).powi(2) + 100.0 * (v[1] - v[0] * v[0]).powi(2);
        let r = nelder_mead(f, &[-1.0, 1.0], &NelderMeadOptions { initial_step: 0.5, xtol: 1e-10, max_iter: 10000 });
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn nelder_mead_respects_barrier() {
        let f = |v: &[f64]| if v[0] < 0.2 { f64::INFINITY } else { v[0] * v[0] };
        let r = nelder_mead(f, &[1.0], &NelderMeadOptions::default());
        assert!((r.x[0] - 0.2).abs() < 1e-6);
    }
}
