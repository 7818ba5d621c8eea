//! Perfect-CSI solver: outer golden-section search over the eavesdropper
//! SINR level `t`, inner linear program in the scalar power.

use std::time::Instant;

use crate::model::{secrecy_rate, EffectiveGains, ScenarioParams};

use super::SolveResult;

/// Interval-width threshold for the outer search, relative to `t_max`.
pub const DEFAULT_SEARCH_TOL: f64 = 1e-8;

/// `(sqrt(5) - 1) / 2`
const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Largest power allowed by the budget and the leakage cap.
pub fn power_cap(g: &EffectiveGains, sc: &ScenarioParams) -> f64 {
    if g.leak_gain > 0.0 {
        sc.max_power.min(sc.leakage_cap / g.leak_gain)
    } else {
        sc.max_power
    }
}

/// Inner problem at eavesdropper-SINR level `t`: returns `(f(t), P(t))`
/// where `P(t) = min(P_t, q / leak, t / b)` and `f(t) = 1 + a P(t)`.
pub fn inner_f(t: f64, g: &EffectiveGains, sc: &ScenarioParams) -> (f64, f64) {
    let cap = power_cap(g, sc);
    let p = if g.b > 0.0 { cap.min(t / g.b) } else { cap };
    (1.0 + g.a * p, p)
}

/// Analytic optimum: the objective ratio is monotone in the power, so the
/// optimum sits at the cap when `a > b` and at zero otherwise.
pub fn closed_form(g: &EffectiveGains, sc: &ScenarioParams) -> SolveResult {
    let start = Instant::now();
    let p_star = if g.a > g.b { power_cap(g, sc) } else { 0.0 };
    SolveResult {
        p_star,
        rate_star: secrecy_rate(p_star, g),
        t_star: 0.0,
        iterations: 0,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Golden-section maximization of `f(t) / (1 + t)` over `[0, t_max]` with
/// `t_max = b * power_cap`.
///
/// The search runs on `s = t / t_max` and stops once the bracket is no wider
/// than `tol`. The returned point is the best evaluated one among the final
/// probes and bracket ends, ties going to the smaller `t`.
pub fn golden_search(g: &EffectiveGains, sc: &ScenarioParams, tol: f64) -> SolveResult {
    assert!(tol > 0.0, "search tolerance must be positive");
    let start = Instant::now();
    let cap = power_cap(g, sc);
    if cap <= 0.0 {
        return SolveResult::zero(start.elapsed().as_secs_f64());
    }
    if g.b <= 0.0 {
        // f is flat in t; nothing to search.
        let mut res = closed_form(g, sc);
        res.wall_time = start.elapsed().as_secs_f64();
        return res;
    }

    let t_max = g.b * cap;
    let objective = |s: f64| {
        let t = s * t_max;
        inner_f(t, g, sc).0 / (1.0 + t)
    };

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut s1 = (1.0 - GOLDEN) * hi;
    let mut s2 = GOLDEN * hi;
    let mut f1 = objective(s1);
    let mut f2 = objective(s2);
    let mut iterations = 0;
    while hi - lo > tol {
        if f1 > f2 {
            hi = s2;
            s2 = s1;
            f2 = f1;
            s1 = lo + (1.0 - GOLDEN) * (hi - lo);
            f1 = objective(s1);
        } else {
            lo = s1;
            s1 = s2;
            f1 = f2;
            s2 = lo + GOLDEN * (hi - lo);
            f2 = objective(s2);
        }
        iterations += 1;
    }

    let mut best = (lo, objective(lo));
    for cand in [(s1, f1), (s2, f2), (hi, objective(hi))] {
        if cand.1 > best.1 || (cand.1 == best.1 && cand.0 < best.0) {
            best = cand;
        }
    }

    let t_star = best.0 * t_max;
    let (_, p_star) = inner_f(t_star, g, sc);
    SolveResult {
        p_star,
        rate_star: secrecy_rate(p_star, g),
        t_star,
        iterations,
        wall_time: start.elapsed().as_secs_f64(),
    }
}
