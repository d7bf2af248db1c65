//! Verification reports: round trips from a realization through the
//! recovered potential and the numerical forward problem, sweeps of the
//! explicit-system identities, and scans of `|det Y₁(0, t)|`.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::forward::{
    det_y1, reflection_numeric, weyl_numeric, ExplicitPotential, ForwardConfig, Potential,
};
use crate::linalg::{fro, hermitian_eigenvalues, identity, inverse, signature, spectral_norm};
use crate::realization::Realization;
use crate::recovery::{build_with, ExplicitSystem};
use crate::{CMatrix, Error, Flavor, Result};

/// Where a check attained its worst value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Witness {
    X(f64),
    Z([f64; 2]),
}

impl Witness {
    pub fn z(z: Complex64) -> Self {
        Witness::Z([z.re, z.im])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl Check {
    /// Passes when `value ≤ tolerance` (NaN fails).
    pub fn at_most(
        name: impl Into<String>,
        value: f64,
        tolerance: f64,
        witness: Option<Witness>,
    ) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
            witness,
            message: None,
            elapsed: Duration::ZERO,
        }
    }

    /// Passes when `value > threshold`.
    pub fn above(
        name: impl Into<String>,
        value: f64,
        threshold: f64,
        witness: Option<Witness>,
    ) -> Self {
        Self {
            pass: value > threshold,
            ..Self::at_most(name, value, threshold, witness)
        }
    }

    pub fn failed(name: impl Into<String>, err: &Error) -> Self {
        Self {
            pass: false,
            message: Some(err.to_string()),
            ..Self::at_most(name, f64::NAN, 0.0, None)
        }
    }

    pub fn with_message(mut self, message: impl Into<String>) -> Self {
        self.message = Some(message.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub t: f64,
    pub abs_det: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub overall: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<Vec<ScanPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flagged: Option<Vec<f64>>,
}

impl VerificationReport {
    pub fn new(checks: Vec<Check>) -> Self {
        let overall = checks.iter().all(|c| c.pass);
        Self {
            checks,
            overall,
            scan: None,
            flagged: None,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One line per check; wall times are included only on request so the
    /// default text is reproducible.
    pub fn summary_text(&self, timings: bool) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!(
                "{status} {}: {:.3e} (tolerance {:.1e})",
                c.name, c.value, c.tolerance
            ));
            match c.witness {
                Some(Witness::X(x)) => out.push_str(&format!(" at x={x}")),
                Some(Witness::Z([re, im])) => out.push_str(&format!(" at z={re}{im:+}i")),
                None => {}
            }
            if let Some(m) = &c.message {
                out.push_str(&format!(" [{m}]"));
            }
            if timings {
                out.push_str(&format!(" ({:.3} s)", c.elapsed.as_secs_f64()));
            }
            out.push('\n');
        }
        out.push_str(if self.overall {
            "overall: PASS\n"
        } else {
            "overall: FAIL\n"
        });
        out
    }
}

type CheckGroup<'a> = Box<dyn Fn() -> Vec<Check> + Sync + 'a>;

/// Runs independent groups in parallel and merges their checks in order.
fn run_groups(groups: Vec<CheckGroup<'_>>) -> Vec<Check> {
    groups
        .par_iter()
        .map(|g| {
            let start = Instant::now();
            let mut checks = g();
            let per = start.elapsed() / checks.len().max(1) as u32;
            for c in &mut checks {
                c.elapsed = per;
            }
            checks
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Worst value of `f` over `items`, with its argument.
fn worst<T: Copy + Sync>(
    items: &[T],
    f: impl Fn(T) -> Result<f64> + Sync,
) -> Result<(f64, Option<T>)> {
    let values: Vec<Result<f64>> = items.par_iter().map(|&t| f(t)).collect();
    let mut best = (0.0, None);
    for (t, v) in items.iter().zip(values) {
        let v = v?;
        if v.is_nan() || best.1.is_none() || v > best.0 {
            best = (v, Some(*t));
            if v.is_nan() {
                break;
            }
        }
    }
    Ok(best)
}

/// `‖a - b‖ / max(1, ‖b‖)`.
fn deviation(a: &CMatrix, b: &CMatrix) -> f64 {
    fro(&(a - b)) / fro(b).max(1.0)
}

/// Realization → explicit potential → numerical reflection (real `z`) or Weyl
/// (upper half-plane `z`) values, compared with `𝒞 (z - 𝒜)⁻¹ ℬ`. Deviations
/// are measured relative to `max(1, ‖R(z)‖)`.
pub fn roundtrip(
    r: &Realization,
    flavor: Flavor,
    zs: &[Complex64],
    cfg: &ForwardConfig,
) -> VerificationReport {
    let start = Instant::now();
    let sys = match build_with(r, flavor, &cfg.tolerances) {
        Ok(sys) => sys,
        Err(e) => return VerificationReport::new(vec![Check::failed("build", &e)]),
    };
    let p = match ExplicitPotential::new(sys) {
        Ok(p) => p,
        Err(e) => return VerificationReport::new(vec![Check::failed("potential", &e)]),
    };
    let build_time = start.elapsed();
    let tol = cfg.tolerances.ode;
    let per_point: Vec<Check> = zs
        .par_iter()
        .map(|&z| {
            let start = Instant::now();
            let name = format!("roundtrip z={}{:+}i", z.re, z.im);
            let numeric = if z.im == 0.0 {
                reflection_numeric(&p, z.re, cfg)
            } else if z.im > 0.0 {
                weyl_numeric(&p, z, cfg)
            } else {
                Err(Error::Domain {
                    z,
                    reason: "round trips need Im z ≥ 0".into(),
                })
            };
            let check = match (numeric, r.eval(z)) {
                (Ok(num), Ok(exact)) => Check::at_most(
                    &name,
                    deviation(&num.value, &exact),
                    tol,
                    Some(Witness::z(z)),
                )
                .with_message(format!("error estimate {:.2e}", num.error_estimate)),
                (Err(e), _) | (_, Err(e)) => Check::failed(&name, &e),
            };
            Check {
                elapsed: start.elapsed(),
                ..check
            }
        })
        .collect();
    let mut checks = vec![Check {
        elapsed: build_time,
        ..Check::at_most(
            "build",
            p.system().riccati().relative_residual,
            cfg.tolerances.riccati,
            None,
        )
    }];
    let max = per_point.iter().map(|c| c.value).fold(0.0_f64, |a, b| {
        if b.is_nan() || a.is_nan() {
            f64::NAN
        } else {
            a.max(b)
        }
    });
    let witness = per_point
        .iter()
        .filter(|c| c.value == max)
        .find_map(|c| c.witness);
    checks.extend(per_point);
    checks.push(Check::at_most("roundtrip max deviation", max, tol, witness));
    VerificationReport::new(checks)
}

/// Evaluates the explicit-system identities and limit relations on the grids.
/// Real points of `zs` are also used for the transfer-matrix symmetry.
pub fn invariant_suite(sys: &ExplicitSystem, xs: &[f64], zs: &[Complex64]) -> VerificationReport {
    if sys.n() == 0 {
        return VerificationReport::new(vec![Check::at_most(
            "identity",
            0.0,
            sys.tolerances().identity,
            None,
        )
        .with_message("empty system")]);
    }
    let tol = *sys.tolerances();
    let x_last = xs.iter().copied().fold(0.0_f64, f64::max);
    let real_z: Vec<Complex64> = zs.iter().copied().filter(|z| z.im == 0.0).collect();

    let guard = |name: &'static str, r: Result<Vec<Check>>| -> Vec<Check> {
        r.unwrap_or_else(|e| vec![Check::failed(name, &e)])
    };

    let mut groups: Vec<CheckGroup<'_>> = Vec::new();
    groups.push(Box::new(|| {
        guard(
            "identity",
            (|| {
                let (v, x) = worst(xs, |x| sys.identity_residual(x))?;
                Ok(vec![Check::at_most(
                    "identity",
                    v,
                    tol.identity,
                    x.map(Witness::X),
                )])
            })(),
        )
    }));
    groups.push(Box::new(|| {
        guard(
            "transfer symmetry",
            (|| {
                let m = sys.m1() + sys.m2();
                let weight = match sys.flavor() {
                    Flavor::Sa => signature(sys.m1(), sys.m2()),
                    Flavor::Ssa => identity(m),
                };
                let pairs: Vec<(f64, Complex64)> = xs
                    .iter()
                    .flat_map(|&x| real_z.iter().map(move |&z| (x, z)))
                    .collect();
                let (v, at) = worst(&pairs, |(x, z)| {
                    let w = sys.transfer_matrix(x, z)?;
                    Ok(fro(&(w.adjoint() * &weight * &w - &weight)))
                })?;
                Ok(vec![Check::at_most(
                    "transfer symmetry",
                    v,
                    tol.identity,
                    at.map(|(_, z)| Witness::z(z)),
                )])
            })(),
        )
    }));
    groups.push(Box::new(|| {
        guard(
            "reflection formula",
            (|| {
                let usable: Vec<Complex64> = zs
                    .iter()
                    .copied()
                    .filter(|&z| sys.source().eval(z).is_ok())
                    .collect();
                let (v, at) = worst(&usable, |z| {
                    let c = sys.reflection_checked(z)?;
                    Ok(c.source_discrepancy.max(c.block_discrepancy.unwrap_or(0.0)))
                })?;
                Ok(vec![Check::at_most(
                    "reflection formula",
                    v,
                    tol.identity,
                    at.map(Witness::z),
                )])
            })(),
        )
    }));
    groups.push(Box::new(|| {
        guard("potential decay", potential_decay(sys, xs))
    }));
    match sys.flavor() {
        Flavor::Sa => {
            groups.push(Box::new(|| {
                guard("S(x) Loewner monotone", sa_monotone(sys, xs))
            }));
            groups.push(Box::new(|| guard("kappa_R", sa_limits(sys, x_last))));
        }
        Flavor::Ssa => {
            groups.push(Box::new(|| {
                guard("Q(x) nonincreasing", ssa_frames(sys, xs))
            }));
            groups.push(Box::new(|| guard("Q_inf", ssa_limit(sys, x_last))));
        }
    }
    VerificationReport::new(run_groups(groups))
}

fn potential_decay(sys: &ExplicitSystem, xs: &[f64]) -> Result<Vec<Check>> {
    let norms: Vec<Result<f64>> = xs
        .par_iter()
        .map(|&x| Ok(spectral_norm(&sys.potential(x)?)))
        .collect();
    let norms = norms.into_iter().collect::<Result<Vec<_>>>()?;
    let Some(&last) = norms.last() else {
        return Ok(vec![]);
    };
    let x_last = *xs.last().expect("nonempty");
    Ok(match sys.flavor() {
        Flavor::Ssa => {
            let peak = norms.iter().copied().fold(0.0_f64, f64::max);
            vec![Check::at_most(
                "potential decay",
                last / peak.max(f64::MIN_POSITIVE),
                1e-6,
                Some(Witness::X(x_last)),
            )]
        }
        Flavor::Sa => {
            // Trapezoid ∫‖v‖² over the grid and over its last tenth.
            let cut = xs[0] + 0.9 * (x_last - xs[0]);
            let (mut total, mut tail) = (0.0, 0.0);
            for k in 1..xs.len() {
                let piece =
                    0.5 * (norms[k] * norms[k] + norms[k - 1] * norms[k - 1]) * (xs[k] - xs[k - 1]);
                total += piece;
                if xs[k - 1] >= cut {
                    tail += piece;
                }
            }
            let fraction = if total > 0.0 { tail / total } else { 0.0 };
            vec![Check::at_most(
                "potential L2 tail",
                fraction,
                1e-6,
                Some(Witness::X(cut)),
            )]
        }
    })
}

fn sa_monotone(sys: &ExplicitSystem, xs: &[f64]) -> Result<Vec<Check>> {
    let s: Vec<Result<CMatrix>> = xs.par_iter().map(|&x| Ok(sys.s_matrix(x)?.s)).collect();
    let s = s.into_iter().collect::<Result<Vec<_>>>()?;
    let mut min_ratio = f64::INFINITY;
    let mut min_at = None;
    let mut drop: f64 = 0.0;
    let mut drop_at = None;
    for (k, m) in s.iter().enumerate() {
        let ev = hermitian_eigenvalues(m);
        let ratio = ev[0] / ev[ev.len() - 1];
        if ratio < min_ratio {
            min_ratio = ratio;
            min_at = Some(Witness::X(xs[k]));
        }
        if k > 0 {
            let gap = -hermitian_eigenvalues(&(m - &s[k - 1]))[0] / fro(m);
            if gap > drop {
                drop = gap;
                drop_at = Some(Witness::X(xs[k]));
            }
        }
    }
    Ok(vec![
        Check::above("S(x) positive definite", min_ratio, 0.0, min_at),
        Check::at_most(
            "S(x) Loewner monotone",
            drop,
            sys.tolerances().identity,
            drop_at,
        ),
    ])
}

fn sa_limits(sys: &ExplicitSystem, x_last: f64) -> Result<Vec<Check>> {
    let tol = sys.tolerances();
    let kappa = sys.kappa_r()?;
    let s0_inv = inverse(sys.s0().matrix(), "S(0)")?;
    let scale = fro(&s0_inv);
    let below = -hermitian_eigenvalues(kappa)[0] / scale;
    let above = -hermitian_eigenvalues(&(&s0_inv - kappa))[0] / scale;
    let frame = sys.frame(x_last)?;
    let kappa_gap = fro(&(&frame.r_inv - kappa)) / fro(kappa).max(f64::MIN_POSITIVE);
    Ok(vec![
        Check::at_most(
            "kappa_R Riccati relation",
            sys.kappa_residual(kappa),
            tol.kappa,
            None,
        ),
        Check::at_most(
            "kappa_R Loewner bounds",
            below.max(above).max(0.0),
            tol.kappa,
            None,
        ),
        Check::at_most(
            "R(x)^-1 -> kappa_R",
            kappa_gap,
            1e-6,
            Some(Witness::X(x_last)),
        ),
        Check::at_most(
            "Q(x)^-1 -> 0",
            spectral_norm(&frame.q_inv),
            1e-6,
            Some(Witness::X(x_last)),
        ),
    ])
}

fn ssa_frames(sys: &ExplicitSystem, xs: &[f64]) -> Result<Vec<Check>> {
    let frames: Vec<Result<(CMatrix, f64)>> = xs
        .par_iter()
        .map(|&x| {
            let f = sys.frame(x)?;
            Ok((f.balanced, f.condition))
        })
        .collect();
    let frames = frames.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rise: f64 = 0.0;
    let mut rise_at = None;
    let mut worst_condition: f64 = 0.0;
    let mut condition_at = None;
    for (k, (q, condition)) in frames.iter().enumerate() {
        if *condition > worst_condition {
            worst_condition = *condition;
            condition_at = Some(Witness::X(xs[k]));
        }
        if k > 0 {
            let prev = &frames[k - 1].0;
            let ev = hermitian_eigenvalues(&(q - prev));
            let up = ev[ev.len() - 1] / fro(prev);
            if up > rise {
                rise = up;
                rise_at = Some(Witness::X(xs[k]));
            }
        }
    }
    Ok(vec![
        Check::at_most(
            "Q(x) nonincreasing",
            rise,
            sys.tolerances().identity,
            rise_at,
        ),
        Check::at_most(
            "S(x) invertible (frame condition)",
            worst_condition,
            sys.tolerances().singular_condition,
            condition_at,
        ),
    ])
}

fn ssa_limit(sys: &ExplicitSystem, x_last: f64) -> Result<Vec<Check>> {
    let q = sys.q_infinity()?;
    let frame = sys.frame(x_last)?;
    let gap = fro(&(&frame.balanced - q.matrix())) / fro(q.matrix());
    Ok(vec![
        Check::at_most(
            "Q_inf Lyapunov residual",
            sys.q_infinity_residual(q),
            sys.tolerances().identity,
            None,
        ),
        Check::above("Q_inf positive definite", q.min_eigenvalue(), 0.0, None),
        Check::at_most("Q(x) -> Q_inf", gap, 1e-6, Some(Witness::X(x_last))),
    ])
}

/// Tabulates `|det Y₁(0, t)|` and flags values below the configured floor.
/// For sa every flag is a failure; for ssa flags must be isolated grid points.
pub fn det_y1_scan(p: &dyn Potential, ts: &[f64], cfg: &ForwardConfig) -> VerificationReport {
    let floor = cfg.tolerances.det_y1_floor;
    let values: Vec<(f64, Option<String>)> = ts
        .par_iter()
        .map(|&t| match det_y1(p, t, cfg) {
            Ok(d) => (d, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        })
        .collect();
    let scan: Vec<ScanPoint> = ts
        .iter()
        .zip(&values)
        .map(|(&t, (d, _))| ScanPoint { t, abs_det: *d })
        .collect();
    let is_flagged: Vec<bool> = scan.iter().map(|s| !(s.abs_det >= floor)).collect();
    let flagged: Vec<f64> = scan
        .iter()
        .zip(&is_flagged)
        .filter(|(_, f)| **f)
        .map(|(s, _)| s.t)
        .collect();
    let min = scan
        .iter()
        .min_by(|a, b| a.abs_det.total_cmp(&b.abs_det))
        .copied();
    let mut checks = Vec::new();
    if let Some(e) = values.iter().find_map(|(_, e)| e.clone()) {
        checks.push(Check::failed("scan evaluation", &Error::Config(e)));
    }
    let witness = min.map(|s| Witness::X(s.t));
    match p.flavor() {
        Flavor::Sa => checks.push(
            Check::at_most("no flagged points", flagged.len() as f64, 0.0, witness).with_message(
                format!("min |det Y1| = {:.3e}", min.map_or(f64::NAN, |s| s.abs_det)),
            ),
        ),
        Flavor::Ssa => {
            let clustered = is_flagged.windows(2).filter(|w| w[0] && w[1]).count();
            checks.push(
                Check::at_most("flagged points isolated", clustered as f64, 0.0, witness)
                    .with_message(format!("{} flagged point(s)", flagged.len())),
            );
        }
    }
    VerificationReport {
        scan: Some(scan),
        flagged: Some(flagged),
        ..VerificationReport::new(checks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::ZeroPotential;
    use crate::linalg::{c64, from_real_rows, from_rows, I};
    use crate::recovery::build;

    fn sech_realization() -> Realization {
        Realization::new(
            from_real_rows(1, 1, &[0.0]),
            from_real_rows(1, 1, &[1.0]),
            from_real_rows(1, 1, &[1.0]),
        )
        .unwrap()
    }

    fn sa_realization() -> Realization {
        Realization::new(
            from_rows(1, 1, &[c64(0.0, -1.0)]),
            from_real_rows(1, 1, &[1.0]),
            from_real_rows(1, 1, &[0.5]),
        )
        .unwrap()
    }

    fn grid(step: f64, end: f64) -> Vec<f64> {
        let n = (end / step).round() as usize;
        (0..=n).map(|k| k as f64 * step).collect()
    }

    #[test]
    fn roundtrip_examples() {
        let cfg = ForwardConfig::with_l(15.0, 2e-3);
        let rep = roundtrip(
            &sech_realization(),
            Flavor::Ssa,
            &[c64(2.0, 0.0), c64(-1.0, 0.0), c64(0.0, 2.0)],
            &cfg,
        );
        assert!(rep.overall, "{}", rep.summary_text(false));
        let rep = roundtrip(
            &sa_realization(),
            Flavor::Sa,
            &[c64(1.0, 0.0), c64(-2.0, 0.0), I],
            &cfg,
        );
        assert!(rep.overall, "{}", rep.summary_text(false));
        let rep = roundtrip(
            &Realization::zero(1, 1).unwrap(),
            Flavor::Sa,
            &[c64(1.0, 0.0), I],
            &cfg,
        );
        assert!(rep.overall);
        assert!(rep.checks.iter().all(|c| c.value == 0.0));
    }

    #[test]
    fn roundtrip_reports_build_failure() {
        let rep = roundtrip(
            &sech_realization(),
            Flavor::Sa,
            &[I],
            &ForwardConfig::default(),
        );
        assert!(!rep.overall);
        assert!(rep.checks[0]
            .message
            .as_deref()
            .unwrap()
            .contains("no admissible"));
    }

    #[test]
    fn invariant_suite_examples() {
        let zs: Vec<Complex64> = (0..10)
            .map(|k| c64(-2.5 + 0.5 * k as f64, 0.0))
            .chain([c64(0.5, 1.0)])
            .collect();
        let xs = grid(0.1, 10.0);
        let sech = build(&sech_realization(), Flavor::Ssa).unwrap();
        let rep = invariant_suite(&sech, &xs, &zs);
        assert!(rep.overall, "{}", rep.summary_text(false));
        let sa = build(&sa_realization(), Flavor::Sa).unwrap();
        let rep = invariant_suite(&sa, &xs, &zs);
        assert!(rep.overall, "{}", rep.summary_text(false));
        assert!(rep.check("kappa_R Riccati relation").unwrap().value <= 1e-9);
        let empty = build(&Realization::zero(1, 1).unwrap(), Flavor::Sa).unwrap();
        assert!(invariant_suite(&empty, &xs, &zs).overall);
    }

    #[test]
    fn scans() {
        let cfg = ForwardConfig::with_l(15.0, 1e-2);
        let ts = grid(0.5, 10.0)
            .into_iter()
            .map(|t| t - 5.0)
            .collect::<Vec<_>>();
        let zero = ZeroPotential {
            flavor: Flavor::Sa,
            m1: 1,
            m2: 1,
        };
        let rep = det_y1_scan(&zero, &ts, &cfg);
        assert!(rep
            .scan
            .as_ref()
            .unwrap()
            .iter()
            .all(|s| (s.abs_det - 1.0).abs() < 1e-12));

        let sa = ExplicitPotential::new(build(&sa_realization(), Flavor::Sa).unwrap()).unwrap();
        let rep = det_y1_scan(&sa, &ts, &cfg);
        assert!(rep.overall && rep.flagged.as_ref().unwrap().is_empty());

        let sech =
            ExplicitPotential::new(build(&sech_realization(), Flavor::Ssa).unwrap()).unwrap();
        let rep = det_y1_scan(&sech, &ts, &cfg);
        assert!(rep.overall, "{}", rep.summary_text(false));
    }

    #[test]
    fn report_serialization_skips_timings() {
        let rep = VerificationReport::new(vec![Check {
            elapsed: Duration::from_secs(3),
            ..Check::at_most("a", 1.0, 2.0, Some(Witness::X(0.5)))
        }]);
        let json = serde_json::to_string(&rep).unwrap();
        assert_eq!(
            json,
            r#"{"checks":[{"name":"a","value":1.0,"tolerance":2.0,"pass":true,"witness":{"x":0.5}}],"overall":true}"#
        );
        assert!(!rep.summary_text(false).contains("3.000 s"));
        assert!(rep.summary_text(true).contains("3.000 s"));
    }
}
