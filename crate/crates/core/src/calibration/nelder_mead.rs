use serde::{Deserialize, Serialize};

use super::{CalibrationError, CalibrationResult};

const REFLECTION: f64 = 1.0;
const EXPANSION: f64 = 2.0;
const CONTRACTION: f64 = 0.5;
const SHRINK: f64 = 0.5;
/// Initial step for coordinates that start at zero on an unbounded axis.
const ZERO_STEP: f64 = 0.00025;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NelderMeadOptions {
    /// Converged once best and worst vertex values differ by less than this.
    pub tol: f64,
    pub max_evals: usize,
    /// Relative per-axis perturbation of `x0` for the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_evals: 400,
            initial_step: 0.05,
        }
    }
}

struct Budget<'a, F> {
    f: F,
    bounds: &'a [(f64, f64)],
    max_evals: usize,
    n_evals: usize,
    best: Option<(Vec<f64>, f64)>,
}

impl<F> Budget<'_, F>
where
    F: FnMut(&[f64]) -> Result<f64, CalibrationError>,
{
    fn project(&self, mut x: Vec<f64>) -> Vec<f64> {
        for (xi, (lo, hi)) in x.iter_mut().zip(self.bounds) {
            *xi = xi.clamp(*lo, *hi);
        }
        x
    }

    /// Projected point and its value; `None` once the budget is spent.
    fn eval(&mut self, x: Vec<f64>) -> Result<Option<(Vec<f64>, f64)>, CalibrationError> {
        if self.n_evals >= self.max_evals {
            return Ok(None);
        }
        let x = self.project(x);
        let mut v = (self.f)(&x)?;
        self.n_evals += 1;
        if v.is_nan() {
            v = f64::NEG_INFINITY;
        }
        if self.best.as_ref().is_none_or(|(_, b)| v > *b) {
            self.best = Some((x.clone(), v));
        }
        Ok(Some((x, v)))
    }
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect()
}

/// Maximizes `f` with the Nelder-Mead simplex method.
///
/// Every trial point is projected onto the box `bounds` before evaluation.
/// Running out of evaluations is not an error: the best point found so far
/// is returned with `converged = false`.
pub fn nelder_mead<F>(
    f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &NelderMeadOptions,
) -> Result<CalibrationResult, CalibrationError>
where
    F: FnMut(&[f64]) -> Result<f64, CalibrationError>,
{
    let n = x0.len();
    if n == 0 {
        return Err(CalibrationError::InvalidSpec("nothing to optimize: dimension 0".into()));
    }
    if bounds.len() != n {
        return Err(CalibrationError::InvalidSpec(format!(
            "{} bounds for {n} parameters",
            bounds.len()
        )));
    }
    for (i, ((lo, hi), x)) in bounds.iter().zip(x0).enumerate() {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(CalibrationError::InvalidSpec(format!("bounds[{i}]: need lo < hi")));
        }
        if !(x.is_finite() && x >= lo && x <= hi) {
            return Err(CalibrationError::InvalidSpec(format!(
                "x0[{i}] = {x} lies outside [{lo}, {hi}]"
            )));
        }
    }
    if opts.max_evals < n + 1 {
        return Err(CalibrationError::InvalidSpec(format!(
            "max_evals {} cannot fill the initial simplex of {} points",
            opts.max_evals,
            n + 1
        )));
    }

    let mut b = Budget {
        f,
        bounds,
        max_evals: opts.max_evals,
        n_evals: 0,
        best: None,
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push(b.eval(x0.to_vec())?.expect("budget covers the simplex"));
    for i in 0..n {
        let mut x = x0.to_vec();
        let (lo, hi) = bounds[i];
        let step = if x0[i] != 0.0 {
            opts.initial_step * x0[i]
        } else if (hi - lo).is_finite() {
            opts.initial_step * (hi - lo)
        } else {
            ZERO_STEP
        };
        x[i] += step;
        if x[i] > bounds[i].1 {
            x[i] = x0[i] - step;
        }
        simplex.push(b.eval(x)?.expect("budget covers the simplex"));
    }

    let mut trace = Vec::new();
    let mut n_iterations = 0;
    let mut n_shrinks = 0;
    let converged = loop {
        // Best first; the sort is stable so ties keep their age order.
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        trace.push(b.best.as_ref().expect("evaluated").1);
        let spread = simplex[0].1 - simplex[n].1;
        if spread < opts.tol || (simplex[0].1 == simplex[n].1) {
            break true;
        }
        if b.n_evals >= b.max_evals {
            break false;
        }
        n_iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let (f_best, f_second, f_worst) = (simplex[0].1, simplex[n - 1].1, simplex[n].1);
        let worst = simplex[n].0.clone();

        let Some(r) = b.eval(combine(&centroid, &worst, -REFLECTION))? else {
            break false;
        };
        if r.1 > f_best {
            let Some(e) = b.eval(combine(&centroid, &r.0, EXPANSION))? else {
                break false;
            };
            simplex[n] = if e.1 > r.1 { e } else { r };
            continue;
        }
        if r.1 > f_second {
            simplex[n] = r;
            continue;
        }
        let contracted = if r.1 > f_worst {
            let Some(c) = b.eval(combine(&centroid, &r.0, CONTRACTION))? else {
                break false;
            };
            (c.1 >= r.1).then_some(c)
        } else {
            let Some(c) = b.eval(combine(&centroid, &worst, CONTRACTION))? else {
                break false;
            };
            (c.1 > f_worst).then_some(c)
        };
        if let Some(c) = contracted {
            simplex[n] = c;
            continue;
        }
        n_shrinks += 1;
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let Some(v) = b.eval(combine(&best, &vertex.0, SHRINK))? else {
                break;
            };
            *vertex = v;
        }
    };
    let (best_params, best_loglik) = b.best.expect("evaluated");
    if trace.last() != Some(&best_loglik) {
        trace.push(best_loglik);
    }
    Ok(CalibrationResult {
        param_names: Vec::new(),
        best_params,
        best_loglik,
        n_evals: b.n_evals,
        n_iterations,
        n_shrinks,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FREE: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);

    fn bowl(x: &[f64]) -> Result<f64, CalibrationError> {
        Ok(-((x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2)))
    }

    #[test]
    fn quadratic_bowl() {
        let opts = NelderMeadOptions {
            tol: 1e-15,
            max_evals: 1000,
            ..Default::default()
        };
        let r = nelder_mead(bowl, &[0.0, 0.0], &[FREE, FREE], &opts).unwrap();
        assert!(r.converged);
        assert!((r.best_params[0] - 1.0).abs() < 1e-6 && (r.best_params[1] - 2.0).abs() < 1e-6, "{:?}", r.best_params);
    }

    #[test]
    fn start_at_optimum_converges_without_shrinking() {
        let r = nelder_mead(bowl, &[1.0, 2.0], &[FREE, FREE], &NelderMeadOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.n_iterations <= 3, "{} iterations", r.n_iterations);
        assert_eq!(r.n_shrinks, 0);
        assert_eq!(r.best_params, vec![1.0, 2.0]);
    }

    #[test]
    fn budget_exhaustion_returns_best_so_far() {
        let opts = NelderMeadOptions {
            tol: 0.0,
            max_evals: 10,
            ..Default::default()
        };
        let r = nelder_mead(bowl, &[-5.0, 7.0], &[FREE, FREE], &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.n_evals, 10);
        assert_eq!(*r.trace.last().unwrap(), r.best_loglik);
    }

    #[test]
    fn bounds_are_respected() {
        let bounds = [(-1.0, 0.5), (0.0, 1.5)];
        let mut seen = Vec::new();
        let r = nelder_mead(
            |x| {
                seen.push(x.to_vec());
                bowl(x)
            },
            &[0.0, 1.0],
            &bounds,
            &NelderMeadOptions {
                tol: 1e-12,
                max_evals: 500,
                ..Default::default()
            },
        )
        .unwrap();
        for x in &seen {
            assert!(x[0] >= -1.0 && x[0] <= 0.5 && x[1] >= 0.0 && x[1] <= 1.5);
        }
        assert!((r.best_params[0] - 0.5).abs() < 1e-4 && (r.best_params[1] - 1.5).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_inputs() {
        let o = NelderMeadOptions::default();
        assert!(nelder_mead(bowl, &[], &[], &o).is_err());
        assert!(nelder_mead(bowl, &[2.0, 0.0], &[(0.0, 1.0), FREE], &o).is_err());
        assert!(nelder_mead(bowl, &[0.0, 0.0], &[(1.0, 1.0), FREE], &o).is_err());
    }

    #[test]
    fn objective_errors_propagate() {
        let r = nelder_mead(
            |_| Err(CalibrationError::EmptySample("x".into())),
            &[0.0],
            &[FREE],
            &NelderMeadOptions::default(),
        );
        assert!(matches!(r, Err(CalibrationError::EmptySample(_))));
    }
}
