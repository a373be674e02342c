//! Derivative-free minimization: Nelder-Mead on two variables and an
//! exhaustive 2-D lattice search.

use crate::error::{Error, Result};

/// Outcome of a minimization run.
///
/// `trace` records the best point each time it improves (Nelder-Mead) or
/// every lattice evaluation (grid search; excluded points carry a NaN
/// objective).
#[derive(Debug, Clone)]
pub struct OptimResult {
    pub params: [f64; 2],
    pub objective: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub trace: Vec<([f64; 2], f64)>,
}

/// Nelder-Mead minimization of a function of two reals.
///
/// Non-finite objective values during the search are treated as worse than
/// every finite value, which drives the simplex to contract away from them;
/// they still count toward `max_evals`. A non-finite value at `start` is an
/// error.
pub fn nelder_mead_min(
    objective: impl Fn([f64; 2]) -> f64,
    start: [f64; 2],
    tol: f64,
    max_evals: usize,
) -> Result<OptimResult> {
    if !(tol > 0.0) {
        return Err(Error::domain("nelder_mead_min requires tol > 0"));
    }
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: [f64; 2]| -> f64 {
        evals.set(evals.get() + 1);
        let v = objective(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let f0 = {
        let v = eval(start);
        if !v.is_finite() {
            return Err(Error::domain(format!(
                "objective non-finite at start ({}, {})",
                start[0], start[1]
            )));
        }
        v
    };

    const STEP: f64 = 0.5;
    let mut simplex: Vec<([f64; 2], f64)> = vec![(start, f0)];
    for i in 0..2 {
        let mut x = start;
        x[i] += STEP;
        let fx = eval(x);
        simplex.push((x, fx));
    }

    let mut trace: Vec<([f64; 2], f64)> = Vec::new();
    let record_best = |simplex: &[([f64; 2], f64)], trace: &mut Vec<([f64; 2], f64)>| {
        let best = simplex
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        if trace.last().map_or(true, |last| best.1 < last.1) {
            trace.push(*best);
        }
    };
    record_best(&simplex, &mut trace);

    let mut converged = false;
    while evals.get() < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let diameter = simplex
            .iter()
            .flat_map(|(a, _)| simplex.iter().map(move |(b, _)| {
                (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
            }))
            .fold(0.0f64, f64::max);
        if diameter < tol {
            converged = true;
            break;
        }

        let (best, second, worst) = (simplex[0], simplex[1], simplex[2]);
        let centroid = [(best.0[0] + second.0[0]) / 2.0, (best.0[1] + second.0[1]) / 2.0];
        let reflect = |c: f64| {
            [
                centroid[0] + c * (centroid[0] - worst.0[0]),
                centroid[1] + c * (centroid[1] - worst.0[1]),
            ]
        };

        let xr = reflect(1.0);
        let fr = eval(xr);
        if fr < best.1 {
            let xe = reflect(2.0);
            let fe = eval(xe);
            simplex[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < second.1 {
            simplex[2] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = reflect(0.5);
                (x, eval(x))
            } else {
                let x = [
                    centroid[0] - 0.5 * (centroid[0] - worst.0[0]),
                    centroid[1] - 0.5 * (centroid[1] - worst.0[1]),
                ];
                (x, eval(x))
            };
            if fc < worst.1.min(fr) {
                simplex[2] = (xc, fc);
            } else {
                // shrink toward the best vertex
                for k in 1..3 {
                    let x = [
                        best.0[0] + 0.5 * (simplex[k].0[0] - best.0[0]),
                        best.0[1] + 0.5 * (simplex[k].0[1] - best.0[1]),
                    ];
                    let fx = eval(x);
                    simplex[k] = (x, fx);
                }
            }
        }
        record_best(&simplex, &mut trace);
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (params, objective_value) = simplex[0];
    if !objective_value.is_finite() {
        return Err(Error::NonConvergence("simplex collapsed on non-finite values".into()));
    }
    Ok(OptimResult { params, objective: objective_value, evaluations: evals.get(), converged, trace })
}

/// Exhaustive minimization over the square lattice
/// `{grid_lo, grid_lo + step, ...} x {...}` capped at `grid_hi`.
///
/// Exact ties are broken by the smallest coordinate sum, then the smallest
/// first coordinate. Lattice points with non-finite objective are excluded
/// from the search but recorded in the trace with a NaN objective.
pub fn grid_search_min(
    objective: impl Fn([f64; 2]) -> f64,
    grid_lo: f64,
    grid_hi: f64,
    step: f64,
) -> Result<OptimResult> {
    if !(grid_lo < grid_hi) || !(step > 0.0) {
        return Err(Error::domain("grid_search_min requires grid_lo < grid_hi and step > 0"));
    }
    let mut levels = Vec::new();
    let mut k = 0usize;
    loop {
        let v = grid_lo + k as f64 * step;
        if v > grid_hi + 1e-9 * step {
            break;
        }
        levels.push(v);
        k += 1;
    }

    let mut trace = Vec::with_capacity(levels.len() * levels.len());
    let mut best: Option<([f64; 2], f64)> = None;
    let mut evals = 0usize;
    for &a in &levels {
        for &b in &levels {
            let v = objective([a, b]);
            evals += 1;
            if !v.is_finite() {
                trace.push(([a, b], f64::NAN));
                continue;
            }
            trace.push(([a, b], v));
            let better = match best {
                None => true,
                Some((p, bv)) => {
                    v < bv
                        || (v == bv
                            && (a + b < p[0] + p[1] || (a + b == p[0] + p[1] && a < p[0])))
                }
            };
            if better {
                best = Some(([a, b], v));
            }
        }
    }
    let (params, objective_value) =
        best.ok_or_else(|| Error::NonConvergence("objective non-finite on entire lattice".into()))?;
    Ok(OptimResult { params, objective: objective_value, evaluations: evals, converged: true, trace })
}

/// Golden-section minimization on an interval. Returns the minimizer, its
/// value and the number of objective evaluations. Non-finite values are
/// treated as +infinity.
pub fn golden_section_min(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> (f64, f64, usize) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let clean = |v: f64| if v.is_finite() { v } else { f64::INFINITY };
    let mut evals = 0usize;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = clean(f(x1));
    let mut f2 = clean(f(x2));
    evals += 2;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = clean(f(x1));
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = clean(f(x2));
        }
        evals += 1;
    }
    let (x, v) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    (x, v, evals)
}

/// Log-parameter box used when optimizing beta hyperparameters: both shape
/// parameters are kept in roughly [0.05, 100] via a quadratic penalty.
pub const LOG_BOX_LO: f64 = -3.0;
pub const LOG_BOX_HI: f64 = 4.6;

pub fn log_box_penalty(u: [f64; 2]) -> f64 {
    let mut pen = 0.0;
    for c in u {
        if c < LOG_BOX_LO {
            pen += 1e4 * (LOG_BOX_LO - c).powi(2);
        } else if c > LOG_BOX_HI {
            pen += 1e4 * (c - LOG_BOX_HI).powi(2);
        }
    }
    pen
}

/// Four-restart Nelder-Mead over log-transformed beta hyperparameters.
///
/// Starts at (1,1), (10,1), (1,10) and (0.5,0.5) in natural space and
/// returns the best run, with `params` mapped back to natural space and
/// `evaluations` totalled across restarts. Errors when no restart converges.
pub fn minimize_beta_hyperparams(
    objective: impl Fn(f64, f64) -> f64,
    tol: f64,
    max_evals: usize,
) -> Result<OptimResult> {
    let wrapped = |u: [f64; 2]| objective(u[0].exp(), u[1].exp()) + log_box_penalty(u);
    let starts: [[f64; 2]; 4] = [[1.0, 1.0], [10.0, 1.0], [1.0, 10.0], [0.5, 0.5]];
    let mut best: Option<OptimResult> = None;
    let mut total_evals = 0usize;
    let mut any_converged = false;
    for s in starts {
        let start = [s[0].ln(), s[1].ln()];
        let run = nelder_mead_min(&wrapped, start, tol, max_evals)?;
        total_evals += run.evaluations;
        any_converged |= run.converged;
        if best.as_ref().map_or(true, |b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    let mut out = best.expect("at least one restart ran");
    if !any_converged {
        return Err(Error::NonConvergence(format!(
            "no Nelder-Mead restart converged; best objective {}",
            out.objective
        )));
    }
    out.params = [out.params[0].exp(), out.params[1].exp()];
    out.trace = out
        .trace
        .iter()
        .map(|(p, v)| ([p[0].exp(), p[1].exp()], *v))
        .collect();
    out.evaluations = total_evals;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = nelder_mead_min(
            |x| (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2),
            [0.0, 0.0],
            1e-7,
            2000,
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.params[0] - 1.0).abs() < 1e-4 && (r.params[1] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn constant_objective_converges_flat() {
        let r = nelder_mead_min(|_| 5.0, [0.3, -0.2], 1e-6, 2000).unwrap();
        assert!(r.converged);
        assert_eq!(r.objective, 5.0);
    }

    #[test]
    fn rosenbrock() {
        // oracle: dense grid refinement puts the minimum at (1, 1)
        let f = |x: [f64; 2]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead_min(f, [-1.2, 1.0], 1e-9, 4000).unwrap();
        assert!((r.params[0] - 1.0).abs() < 1e-3 && (r.params[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn trace_is_non_increasing() {
        let f = |x: [f64; 2]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead_min(f, [-1.2, 1.0], 1e-9, 4000).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
    }

    #[test]
    fn non_finite_at_start_is_an_error() {
        assert!(nelder_mead_min(|_| f64::NAN, [0.0, 0.0], 1e-6, 100).is_err());
    }

    #[test]
    fn grid_finds_lattice_minimum() {
        let r = grid_search_min(
            |x| (x[0] - 2.0).powi(2) + (x[1] - 5.0).powi(2),
            0.5,
            6.0,
            0.5,
        )
        .unwrap();
        assert_eq!(r.params, [2.0, 5.0]);
    }

    #[test]
    fn grid_tie_break_prefers_smallest() {
        let r = grid_search_min(|_| 3.0, 0.5, 6.0, 0.5).unwrap();
        assert_eq!(r.params, [0.5, 0.5]);
    }

    #[test]
    fn grid_excludes_non_finite_points() {
        let r = grid_search_min(
            |x| {
                if x[0] < 1.0 {
                    f64::NAN
                } else {
                    x[0] + x[1]
                }
            },
            0.5,
            2.0,
            0.5,
        )
        .unwrap();
        assert_eq!(r.params, [1.0, 0.5]);
        assert!(r.trace.iter().any(|(_, v)| v.is_nan()));
    }

    #[test]
    fn grid_stays_on_lattice() {
        let r = grid_search_min(|x| (x[0] - 1.77).powi(2) + x[1], 0.5, 6.0, 0.5).unwrap();
        for (p, _) in &r.trace {
            for c in p {
                let k = (c - 0.5) / 0.5;
                assert!((k - k.round()).abs() < 1e-12);
            }
        }
    }
}
