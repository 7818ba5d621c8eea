//! Robust solver for bounded channel errors.
//!
//! After the Charnes-Cooper substitution `p_bar = P / t` and the epigraph
//! variable `tau`, each semi-infinite constraint over an error disk
//! `|e| <= eps` becomes a 2x2 S-procedure block that is affine in its
//! multiplier `lambda`:
//!
//! ```text
//! M(lambda) = base + lambda * diag(1, -eps^2)  ⪰ 0,   lambda >= 0
//! ```
//!
//! * block 1, legitimate link:  `c1 p_bar (h_s + e)^2 + t >= tau`
//! * block 2, eavesdropper:     `t + c2 p_bar (h_e + e)^2 <= 1`
//! * block 3, leakage:          `p_bar (h_p + e)^2 <= t q`
//!
//! with `c1 = 1 / (P_p g_s^2 + sigma_s^2)` and `c2 = 1 / (P_p g_e^2 + sigma_e^2)`.
//!
//! Bisection runs on `tau - 1` rather than `tau` so that small secrecy rates
//! keep full relative precision.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::{effective_gains, ChannelInstance, ScenarioParams, SystemParams};

use super::perfect::power_cap;
use super::SolveResult;

/// Relative bisection tolerance on `tau - 1`.
pub const DEFAULT_BISECTION_TOL: f64 = 1e-9;

/// Tolerance used when re-verifying returned certificates.
pub const PSD_TOL: f64 = 1e-9;

/// Relative pull-back of the witness power from the cap. A constraint that is
/// tight with a zero error radius only admits an unbounded multiplier, so
/// every witness keeps a little slack in each block.
const WITNESS_BACKOFF: f64 = 1e-10;

/// Symmetric 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym2x2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl Sym2x2 {
    pub const IDENTITY: Self = Self {
        m11: 1.0,
        m12: 0.0,
        m22: 1.0,
    };

    pub fn new(m11: f64, m12: f64, m22: f64) -> Self {
        Self { m11, m12, m22 }
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }
}

/// Positive-semidefiniteness test with a small tolerance.
pub fn psd_2x2(m: &Sym2x2, tol: f64) -> bool {
    m.m11 >= -tol && m.m22 >= -tol && m.det() >= -tol * (m.m11 * m.m22).abs().max(1.0)
}

/// Decision variables of the transformed robust program together with the
/// S-procedure multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateVars {
    /// Scaled power `P / t` (mW).
    pub p_bar: f64,
    /// Charnes-Cooper scalar.
    pub t_cc: f64,
    /// Epigraph value, the certified lower bound on the SINR ratio.
    pub tau: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl CertificateVars {
    /// Transmit power recovered from the scaled variables.
    pub fn power(&self) -> f64 {
        self.p_bar / self.t_cc
    }
}

/// One S-procedure block as an affine family in its multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineBlock {
    /// Block value at `lambda = 0`.
    pub base: Sym2x2,
    /// Squared error radius.
    pub radius_sq: f64,
}

impl AffineBlock {
    pub fn at(&self, lambda: f64) -> Sym2x2 {
        Sym2x2 {
            m11: self.base.m11 + lambda,
            m12: self.base.m12,
            m22: self.base.m22 - lambda * self.radius_sq,
        }
    }
}

/// The three blocks at the given `(p_bar, t_cc, tau)`; multipliers in `v` are
/// ignored.
pub fn block_family(
    v: &CertificateVars,
    ch: &ChannelInstance,
    params: &SystemParams,
    sc: &ScenarioParams,
) -> [AffineBlock; 3] {
    let legit = v.p_bar / params.interference_su(ch.g_s);
    let eve = v.p_bar / params.interference_eve(ch.g_e);
    [
        AffineBlock {
            base: Sym2x2::new(
                legit,
                legit * ch.h_s,
                legit * ch.h_s * ch.h_s + v.t_cc - v.tau,
            ),
            radius_sq: ch.eps_s * ch.eps_s,
        },
        AffineBlock {
            base: Sym2x2::new(-eve, -eve * ch.h_e, 1.0 - v.t_cc - eve * ch.h_e * ch.h_e),
            radius_sq: ch.eps_e * ch.eps_e,
        },
        AffineBlock {
            base: Sym2x2::new(
                -v.p_bar,
                -v.p_bar * ch.h_p,
                v.t_cc * sc.leakage_cap - v.p_bar * ch.h_p * ch.h_p,
            ),
            radius_sq: ch.eps_p * ch.eps_p,
        },
    ]
}

/// The three S-procedure blocks evaluated at the multipliers stored in `v`.
pub fn build_lmis(
    v: &CertificateVars,
    ch: &ChannelInstance,
    params: &SystemParams,
    sc: &ScenarioParams,
) -> (Sym2x2, Sym2x2, Sym2x2) {
    let [b1, b2, b3] = block_family(v, ch, params, sc);
    (b1.at(v.lambda1), b2.at(v.lambda2), b3.at(v.lambda3))
}

/// Finds a multiplier `lambda >= 0` making the block PSD, if one exists.
///
/// With a positive radius the determinant is a concave quadratic in
/// `lambda`; its vertex, clamped to the range where both diagonal entries
/// stay nonnegative, maximizes it, so PSD at that point decides existence.
/// With a zero radius the determinant is affine and increasing whenever the
/// constraint has slack, and a finite multiplier exists only in that case.
pub fn certificate_exists(block: &AffineBlock, tol: f64) -> Option<f64> {
    let Sym2x2 {
        m11: alpha,
        m12: beta,
        m22: gamma,
    } = block.base;
    let r = block.radius_sq;
    let lower = (-alpha).max(0.0);

    let lambda = if r == 0.0 {
        if gamma > 0.0 {
            (2.0 * beta * beta / gamma - alpha).max(lower)
        } else {
            lower
        }
    } else {
        let upper = (gamma / r).max(lower);
        ((gamma - alpha * r) / (2.0 * r)).clamp(lower, upper)
    };

    let m = block.at(lambda);
    if psd_2x2(&m, tol) {
        return Some(lambda);
    }
    // Near-tangent roots: one retry with a wider tolerance.
    if m.det().abs() < 1e-12 && psd_2x2(&m, 10.0 * tol) {
        return Some(lambda);
    }
    None
}

/// Feasibility of the robust program at a fixed epigraph value `tau`.
///
/// Returns a verified certificate when feasible.
pub fn feasible_tau(
    tau: f64,
    ch: &ChannelInstance,
    params: &SystemParams,
    sc: &ScenarioParams,
) -> Option<CertificateVars> {
    feasible_excess(tau - 1.0, ch, params, sc)
}

/// Same as [`feasible_tau`] with `excess = tau - 1`.
fn feasible_excess(
    excess: f64,
    ch: &ChannelInstance,
    params: &SystemParams,
    sc: &ScenarioParams,
) -> Option<CertificateVars> {
    let wc = effective_gains(ch, params, true);
    let cap = power_cap(&wc, sc);
    let p = if wc.a > wc.b && cap > 0.0 {
        cap * (1.0 - WITNESS_BACKOFF)
    } else {
        0.0
    };

    // (1 + a P) / (1 + b P) >= 1 + excess, written to keep precision near 1.
    if (wc.a - wc.b) * p / (1.0 + wc.b * p) < excess && excess > 0.0 {
        return None;
    }

    // Range of Charnes-Cooper scalars for this power: block 1 needs
    // t (1 + a P) >= tau, block 2 needs t (1 + b P) <= 1.
    let tau = 1.0 + excess;
    let t_lo = tau / (1.0 + wc.a * p);
    let t_hi = 1.0 / (1.0 + wc.b * p);
    if t_lo > t_hi {
        return None;
    }
    let t_cc = 0.5 * (t_lo + t_hi);

    let mut v = CertificateVars {
        p_bar: p * t_cc,
        t_cc,
        tau,
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
    };
    let [b1, b2, b3] = block_family(&v, ch, params, sc);
    v.lambda1 = certificate_exists(&b1, PSD_TOL)?;
    v.lambda2 = certificate_exists(&b2, PSD_TOL)?;
    v.lambda3 = certificate_exists(&b3, PSD_TOL)?;

    let (m1, m2, m3) = build_lmis(&v, ch, params, sc);
    [m1, m2, m3]
        .iter()
        .all(|m| psd_2x2(m, PSD_TOL))
        .then_some(v)
}

/// Robust solve together with the certificate of the returned power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustSolution {
    pub result: SolveResult,
    pub certificate: CertificateVars,
}

/// Bisection on the epigraph value over `[1, 1 + a_wc * cap]`.
pub fn solve_robust(
    ch: &ChannelInstance,
    params: &SystemParams,
    sc: &ScenarioParams,
    tol: f64,
) -> SolveResult {
    solve_robust_certified(ch, params, sc, tol).result
}

/// [`solve_robust`] returning the final certificate as well.
pub fn solve_robust_certified(
    ch: &ChannelInstance,
    params: &SystemParams,
    sc: &ScenarioParams,
    tol: f64,
) -> RobustSolution {
    assert!(tol > 0.0, "bisection tolerance must be positive");
    let start = Instant::now();
    let wc = effective_gains(ch, params, true);
    let cap = power_cap(&wc, sc);

    let mut best = feasible_excess(0.0, ch, params, sc)
        .expect("zero excess is always certifiable with zero power");
    let (mut lo, mut hi) = (0.0_f64, wc.a * cap);
    let mut iterations = 0;
    if cap > 0.0 && wc.a > wc.b {
        while hi - lo > tol * lo && hi > f64::EPSILON {
            let mid = 0.5 * (lo + hi);
            match feasible_excess(mid, ch, params, sc) {
                Some(v) => {
                    lo = mid;
                    best = v;
                }
                None => hi = mid,
            }
            iterations += 1;
        }
    }

    let p_star = if lo > 0.0 { best.power() } else { 0.0 };
    let result = SolveResult {
        p_star,
        rate_star: (lo.ln_1p() / std::f64::consts::LN_2).max(0.0),
        t_star: best.t_cc,
        iterations,
        wall_time: start.elapsed().as_secs_f64(),
    };
    RobustSolution {
        result,
        certificate: best,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gen_channel, secrecy_rate, UncertaintyProfile};
    use crate::solver::closed_form;

    fn params() -> SystemParams {
        SystemParams::default()
    }

    fn channel(eps: f64) -> ChannelInstance {
        ChannelInstance {
            h_s: 0.3,
            h_p: 0.12,
            h_e: 0.05,
            g_s: 0.04,
            g_e: 0.06,
            eps_s: eps,
            eps_e: eps,
            eps_p: eps,
        }
    }

    /// Dense scan of `lambda` over a log grid: an independent route to the
    /// existence question.
    fn scan_lambda(block: &AffineBlock) -> bool {
        std::iter::once(0.0)
            .chain((-120..=120).map(|k| 10f64.powf(k as f64 / 10.0)))
            .any(|l| psd_2x2(&block.at(l), 1e-9))
    }

    /// Worst-case slack of each block's robust constraint (>= 0 means it
    /// holds for every error in the disk).
    fn worst_case_slack(
        v: &CertificateVars,
        ch: &ChannelInstance,
        sc: &ScenarioParams,
    ) -> [f64; 3] {
        let p = params();
        let h_s = (ch.h_s - ch.eps_s).max(0.0);
        let h_e = ch.h_e + ch.eps_e;
        let h_p = ch.h_p + ch.eps_p;
        [
            v.p_bar * h_s * h_s / p.interference_su(ch.g_s) + v.t_cc - v.tau,
            1.0 - v.t_cc - v.p_bar * h_e * h_e / p.interference_eve(ch.g_e),
            v.t_cc * sc.leakage_cap - v.p_bar * h_p * h_p,
        ]
    }

    #[test]
    fn psd_examples() {
        assert!(psd_2x2(&Sym2x2::IDENTITY, 0.0));
        assert!(!psd_2x2(&Sym2x2::new(1.0, 2.0, 1.0), 1e-9));
        assert!(psd_2x2(&Sym2x2::new(0.0, 0.0, 0.0), 0.0));
        assert!(!psd_2x2(&Sym2x2::new(-1.0, 0.0, 1.0), 1e-9));
    }

    #[test]
    fn zero_radius_blocks_reduce_to_nominal_inequalities() {
        let ch = channel(0.0);
        let sc = ScenarioParams::new(100.0, 2.0).unwrap();
        for (p_bar, t_cc, tau) in [
            (10.0, 0.5, 1.2),
            (40.0, 0.2, 3.0),
            (5.0, 0.9, 0.95),
            (0.0, 1.0, 1.0),
        ] {
            let v = CertificateVars {
                p_bar,
                t_cc,
                tau,
                lambda1: 0.0,
                lambda2: 0.0,
                lambda3: 0.0,
            };
            let (m1, m2, m3) = build_lmis(&v, &ch, &params(), &sc);
            let nominal = worst_case_slack(&v, &ch, &sc);
            // With zero radius and zero multipliers the (2,2) entry is the
            // nominal slack.
            for (m, slack) in [m1, m2, m3].iter().zip(nominal) {
                assert!((m.m22 - slack).abs() < 1e-12, "{m:?} vs {slack}");
            }
        }
    }

    #[test]
    fn huge_multiplier_breaks_block_one() {
        let ch = channel(0.1);
        let sc = ScenarioParams::new(100.0, 2.0).unwrap();
        let v = CertificateVars {
            p_bar: 10.0,
            t_cc: 0.5,
            tau: 1.0,
            lambda1: 1e9,
            lambda2: 0.0,
            lambda3: 0.0,
        };
        let (m1, _, _) = build_lmis(&v, &ch, &params(), &sc);
        assert!(m1.m22 < 0.0);
        assert!(!psd_2x2(&m1, PSD_TOL));
    }

    #[test]
    fn certificate_existence_matches_worst_case_and_scan() {
        let sc = ScenarioParams::new(100.0, 3.0).unwrap();
        let p = params();
        let mut checked = 0;
        for seed in 0..400u64 {
            let eps = [0.0, 0.05, 0.1, 0.15][(seed % 4) as usize];
            let ch = gen_channel(seed, &p, UncertaintyProfile::uniform(eps));
            // Deterministic pseudo-random point from the seed.
            let u = |k: u64| {
                ((seed.wrapping_mul(2654435761).wrapping_add(k * 97)) % 1000) as f64 / 1000.0
            };
            let v = CertificateVars {
                p_bar: 60.0 * u(1),
                t_cc: 0.05 + 0.95 * u(2),
                tau: 0.5 + 2.0 * u(3),
                lambda1: 0.0,
                lambda2: 0.0,
                lambda3: 0.0,
            };
            let slack = worst_case_slack(&v, &ch, &sc);
            for (k, block) in block_family(&v, &ch, &p, &sc).iter().enumerate() {
                // Points within rounding of the boundary are not informative.
                if slack[k].abs() < 1e-6 {
                    continue;
                }
                let analytic = certificate_exists(block, PSD_TOL).is_some();
                assert_eq!(analytic, slack[k] > 0.0, "seed {seed} block {k}");
                if scan_lambda(block) {
                    assert!(
                        analytic,
                        "scan found a multiplier the vertex rule missed: seed {seed} block {k}"
                    );
                }
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn unit_tau_is_always_feasible() {
        let sc = ScenarioParams::new(100.0, 1.0).unwrap();
        let v = feasible_tau(1.0, &channel(0.1), &params(), &sc).expect("feasible");
        assert!(v.t_cc > 0.0);
    }

    #[test]
    fn tau_beyond_ratio_bound_is_infeasible() {
        let ch = channel(0.05);
        let sc = ScenarioParams::new(100.0, 1.0).unwrap();
        let wc = effective_gains(&ch, &params(), true);
        let bound = 1.0 + wc.a * power_cap(&wc, &sc);
        assert!(feasible_tau(bound * 1.001, &ch, &params(), &sc).is_none());
    }

    #[test]
    fn feasibility_at_midpoint_matches_worst_case_oracle() {
        let p = params();
        let sc = ScenarioParams::new(100.0, 4.0).unwrap();
        for seed in 0..200u64 {
            let ch = gen_channel(seed, &p, UncertaintyProfile::uniform(0.05));
            let wc = effective_gains(&ch, &p, true);
            let best = closed_form(&wc, &sc);
            let ratio = |pw: f64| (1.0 + wc.a * pw) / (1.0 + wc.b * pw);
            let top = ratio(best.p_star);
            for tau in [0.5 * (1.0 + top), top * (1.0 + 1e-6), top * (1.0 - 1e-6)] {
                let expect = tau <= top;
                if (tau - 1.0).abs() < 1e-12 {
                    continue;
                }
                assert_eq!(
                    feasible_tau(tau, &ch, &p, &sc).is_some(),
                    expect,
                    "seed {seed} tau {tau}"
                );
            }
        }
    }

    #[test]
    fn zero_radius_matches_perfect_solver() {
        let p = params();
        let sc = ScenarioParams::new(100.0, 2.0).unwrap();
        for seed in 0..200u64 {
            let ch = gen_channel(seed, &p, UncertaintyProfile::PERFECT);
            let r = solve_robust(&ch, &p, &sc, DEFAULT_BISECTION_TOL);
            let cf = closed_form(&effective_gains(&ch, &p, false), &sc);
            assert!((r.p_star - cf.p_star).abs() <= 1e-6 * 100.0, "seed {seed}");
        }
    }

    #[test]
    fn radius_swallowing_legitimate_link_gives_zero() {
        let mut ch = channel(0.1);
        ch.eps_s = 0.35;
        let sc = ScenarioParams::new(100.0, 2.0).unwrap();
        let r = solve_robust(&ch, &params(), &sc, DEFAULT_BISECTION_TOL);
        assert_eq!((r.p_star, r.rate_star), (0.0, 0.0));
    }

    #[test]
    fn certified_solution_respects_leakage_and_matches_oracle() {
        let p = params();
        let sc = ScenarioParams::new(100.0, 3.0).unwrap();
        for seed in 0..300u64 {
            let ch = gen_channel(seed, &p, UncertaintyProfile::uniform(0.05));
            let sol = solve_robust_certified(&ch, &p, &sc, DEFAULT_BISECTION_TOL);
            let (m1, m2, m3) = build_lmis(&sol.certificate, &ch, &p, &sc);
            assert!([m1, m2, m3].iter().all(|m| psd_2x2(m, PSD_TOL)));
            let r = sol.result;
            assert!(r.p_star * (ch.h_p + ch.eps_p).powi(2) <= sc.leakage_cap + 1e-9);
            let wc = effective_gains(&ch, &p, true);
            let oracle = closed_form(&wc, &sc);
            assert!(
                (r.rate_star - oracle.rate_star).abs() <= 1e-4 * oracle.rate_star,
                "seed {seed}"
            );
            assert!(
                (secrecy_rate(r.p_star, &wc) - r.rate_star).abs() <= 1e-6 * (1.0 + r.rate_star)
            );
        }
    }
}
