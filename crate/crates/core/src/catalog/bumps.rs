//! One-dimensional odd cutoff profiles `s ↦ f(s)` used to build rotation gauges.

use crate::error::{Error, Result};

pub trait Bump: Send + Sync {
    /// `(f(s), f'(s), f''(s))`.
    fn eval(&self, s: f64) -> (f64, f64, f64);
    /// `f` vanishes for `|s| ≥ support()`.
    fn support(&self) -> f64;
    fn name(&self) -> String;
}

fn smoothstep5(u: f64) -> (f64, f64, f64) {
    let u2 = u * u;
    (
        u2 * u * (10.0 - 15.0 * u + 6.0 * u2),
        30.0 * u2 * (1.0 - u) * (1.0 - u),
        60.0 * u * (1.0 - u) * (1.0 - 2.0 * u),
    )
}

fn smoothstep3(u: f64) -> (f64, f64, f64) {
    (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u), 6.0 - 12.0 * u)
}

/// `ϕ(t) = t χ(|t|)` with `χ = 1` on `[0, 1]`, `χ = 0` on `[2, ∞)` and a
/// quintic smoothstep in between, so `ϕ` is C² and `ϕ(t) = t` for `|t| ≤ 1`.
/// Scaled as `φ_ε(s) = ε ϕ(s/ε)`.
#[derive(Clone, Copy, Debug)]
pub struct QuinticCutoff {
    pub eps: f64,
}

impl QuinticCutoff {
    pub fn unit(t: f64) -> (f64, f64, f64) {
        let r = t.abs();
        let (chi, chi1, chi2) = if r <= 1.0 {
            (1.0, 0.0, 0.0)
        } else if r >= 2.0 {
            (0.0, 0.0, 0.0)
        } else {
            let (s, s1, s2) = smoothstep5(r - 1.0);
            (1.0 - s, -s1, -s2)
        };
        let sg = if t < 0.0 { -1.0 } else { 1.0 };
        (t * chi, chi + r * chi1, sg * (2.0 * chi1 + r * chi2))
    }
}

impl Bump for QuinticCutoff {
    fn eval(&self, s: f64) -> (f64, f64, f64) {
        let (f, f1, f2) = Self::unit(s / self.eps);
        (self.eps * f, f1, f2 / self.eps)
    }

    fn support(&self) -> f64 {
        2.0 * self.eps
    }

    fn name(&self) -> String {
        format!("quintic-cutoff(eps={})", self.eps)
    }
}

/// Odd profile that is the identity on `[0, s0]`, turns over on
/// `[s0, s0 + w]` to slope `−δ`, descends linearly and lands at zero over a
/// width `μ`. Turn and landing use cubic smoothsteps of `f'`, so `f` is C².
#[derive(Clone, Copy, Debug)]
pub struct TwoScaleBump {
    pub s0: f64,
    pub w: f64,
    pub delta: f64,
    pub mu: f64,
    peak: f64,
    descent_end: f64,
}

impl TwoScaleBump {
    pub fn new(s0: f64, w: f64, delta: f64, mu: f64) -> Result<Self> {
        if !(s0 > 0.0 && w > 0.0 && delta > 0.0 && delta < 1.0 && mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "two-scale bump needs positive s0, w, mu and δ in (0,1), got {s0}, {w}, {delta}, {mu}"
            )));
        }
        let peak = s0 + 0.5 * w * (1.0 - delta);
        let run = (peak - 0.5 * delta * mu) / delta;
        if run < 0.0 {
            return Err(Error::InvalidParameter("landing width too large for the peak".into()));
        }
        Ok(Self { s0, w, delta, mu, peak, descent_end: s0 + w + run })
    }

    /// Example-2 profile: identity up to ε, slope bound `−2ε/(1−ε)`,
    /// turn width `1.5ε` (narrowed for large ε so the support stays ≤ 1),
    /// landing width 0.02.
    pub fn for_eps(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0 / 3.0) {
            return Err(Error::InvalidParameter(format!("example-2 ε must lie in (0, 1/3), got {eps}")));
        }
        let mu = 0.02;
        let delta = 2.0 * eps / (1.0 - eps);
        // support = (1+ε)/2 + w(1+ε)/(4ε) + μ/2
        let w_max = 2.0 * eps * (1.0 - eps - mu) / (1.0 + eps);
        let w = (1.5 * eps).min(0.95 * w_max);
        Self::new(eps, w, delta, mu)
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }
}

impl Bump for TwoScaleBump {
    fn eval(&self, s: f64) -> (f64, f64, f64) {
        let a = s.abs();
        let sg = if s < 0.0 { -1.0 } else { 1.0 };
        let (f, f1, f2) = if a <= self.s0 {
            (a, 1.0, 0.0)
        } else if a <= self.s0 + self.w {
            let u = (a - self.s0) / self.w;
            let (st, st1, _) = smoothstep3(u);
            let int = u * u * u - 0.5 * u.powi(4);
            (
                self.s0 + self.w * (u - (1.0 + self.delta) * int),
                1.0 - (1.0 + self.delta) * st,
                -(1.0 + self.delta) * st1 / self.w,
            )
        } else if a <= self.descent_end {
            (self.peak - self.delta * (a - self.s0 - self.w), -self.delta, 0.0)
        } else if a < self.descent_end + self.mu {
            let u = (a - self.descent_end) / self.mu;
            let (st, st1, _) = smoothstep3(u);
            let int = u * u * u - 0.5 * u.powi(4);
            let start = self.peak - self.delta * (self.descent_end - self.s0 - self.w);
            (
                start - self.delta * self.mu * (u - int),
                -self.delta * (1.0 - st),
                self.delta * st1 / self.mu,
            )
        } else {
            (0.0, 0.0, 0.0)
        };
        (sg * f, f1, sg * f2)
    }

    fn support(&self) -> f64 {
        self.descent_end + self.mu
    }

    fn name(&self) -> String {
        format!("two-scale(s0={}, w={}, delta={}, mu={})", self.s0, self.w, self.delta, self.mu)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpReport {
    pub max_abs: f64,
    pub min_slope: f64,
    pub max_slope: f64,
    pub max_abs_second: f64,
    /// `max |f(s) − s|` on `|s| ≤ identity_radius`.
    pub identity_defect: f64,
    pub support: f64,
}

/// Samples `f` densely on `[−1.2 support, 1.2 support]`.
pub fn inspect_bump(bump: &dyn Bump, identity_radius: f64, samples: usize) -> BumpReport {
    let half = 1.2 * bump.support();
    let mut rep = BumpReport {
        max_abs: 0.0,
        min_slope: f64::INFINITY,
        max_slope: f64::NEG_INFINITY,
        max_abs_second: 0.0,
        identity_defect: 0.0,
        support: bump.support(),
    };
    for k in 0..=samples {
        let s = -half + 2.0 * half * k as f64 / samples as f64;
        let (f, f1, f2) = bump.eval(s);
        rep.max_abs = rep.max_abs.max(f.abs());
        rep.min_slope = rep.min_slope.min(f1);
        rep.max_slope = rep.max_slope.max(f1);
        rep.max_abs_second = rep.max_abs_second.max(f2.abs());
        if s.abs() <= identity_radius {
            rep.identity_defect = rep.identity_defect.max((f - s).abs());
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_c2(b: &dyn Bump) {
        let h = 1e-6;
        let r = b.support();
        for k in 1..4000 {
            let s = -1.1 * r + 2.2 * r * k as f64 / 4000.0;
            let (_, f1, f2) = b.eval(s);
            let (fp, f1p, _) = b.eval(s + h);
            let (fm, f1m, _) = b.eval(s - h);
            assert!(((fp - fm) / (2.0 * h) - f1).abs() < 1e-5, "f' at {s}");
            assert!(((f1p - f1m) / (2.0 * h) - f2).abs() < 1e-3 * f2.abs().max(1.0), "f'' at {s}");
        }
    }

    #[test]
    fn quintic_cutoff_is_c2_and_bounded() {
        let b = QuinticCutoff { eps: 0.1 };
        assert_c2(&b);
        let rep = inspect_bump(&b, 0.1, 20_000);
        assert!(rep.max_abs <= 0.2 + 1e-12);
        assert!(rep.identity_defect < 1e-15);
        assert_eq!(b.eval(0.25), (0.0, 0.0, 0.0));
    }

    #[test]
    fn two_scale_profile_meets_slope_and_size_bounds() {
        for eps in [0.005, 0.01, 0.1, 0.3] {
            let b = TwoScaleBump::for_eps(eps).unwrap();
            assert_c2(&b);
            let rep = inspect_bump(&b, eps, 50_000);
            assert!(rep.support <= 1.0, "support {}", rep.support);
            assert!(rep.max_abs <= 2.0 * eps);
            assert!(rep.min_slope >= -2.0 * eps / (1.0 - eps) - 1e-12);
            assert!(rep.max_slope <= 1.0 + 1e-12);
            assert!(rep.identity_defect < 1e-15);
            let (f, _, _) = b.eval(b.support());
            assert!(f.abs() < 1e-14);
        }
    }
}
