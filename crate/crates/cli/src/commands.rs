//! The four subcommands. Each returns its CSV or report text; the caller
//! decides where it goes.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use optoqpg::analytic::{
    decoherence_coeff, gate_fidelity_analytic, monte_carlo_gate_fidelity_analytic,
    thermal_displacement_average, thermal_displacement_trace, DecoherenceOracle,
};
use optoqpg::lindblad::{gate_fidelity_dissipative, mech_dim_floor, mech_dim_for};
use optoqpg::model::{ideal_condition_residual, t_pi};
use optoqpg::operators::thermal_tail;
use optoqpg::{Error, SystemParams, C64};

use crate::config::{ConfigError, RunConfig};

/// Largest tolerated gap between closed-form and matrix-trace oracles.
pub const ORACLE_TOL: f64 = 1e-6;
/// Largest tolerated deviation of the thermal displacement identity.
pub const THERMAL_IDENTITY_TOL: f64 = 1e-8;
/// `|g₁g₂ − ω_m²/4|` below which the ideal condition counts as met.
pub const IDEAL_RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug)]
pub enum CmdError {
    /// A check ran and failed; the report is still produced.
    CheckFailed(String),
    Config(String),
    Numerical(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::CheckFailed(_) => 1,
            CmdError::Config(_) => 2,
            CmdError::Numerical(_) => 3,
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e.0)
    }
}

impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        match e {
            Error::StepUnderflow { .. }
            | Error::NonFinite(_)
            | Error::TruncationInsufficient(_) => CmdError::Numerical(e.to_string()),
            _ => CmdError::Config(e.to_string()),
        }
    }
}

/// Full-precision decimal: 17 significant digits, locale independent.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn analytic_or_nan(t: f64, p: &SystemParams) -> f64 {
    gate_fidelity_analytic(t, p).unwrap_or(f64::NAN)
}

/// One row per grid time:
/// `omega_m_t,F_analytic,F_numeric,trace_err,herm_err,min_eig`.
///
/// `F_analytic` is the lossless closed form (`NaN` for detunings it does not
/// cover).
pub fn fidelity_curve(cfg: &RunConfig) -> Result<String, CmdError> {
    cfg.validate()?;
    let p = cfg.params();
    let grid = cfg.time_grid()?;
    let evo = cfg.evolution(&p, grid);
    let tr = gate_fidelity_dissipative(&p, &evo)?;
    let mut out = String::from("omega_m_t,F_analytic,F_numeric,trace_err,herm_err,min_eig\n");
    for i in 0..tr.times.len() {
        let t = tr.times[i];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(p.omega_m * t),
            num(analytic_or_nan(t, &p)),
            num(tr.fidelity[i]),
            num(tr.trace_err[i]),
            num(tr.herm_err[i]),
            num(tr.min_eig[i])
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct SweepPoint {
    kappa: f64,
    nbar: f64,
    g: Option<f64>,
    q_m: f64,
}

fn sweep_points(cfg: &RunConfig) -> Result<Vec<SweepPoint>, CmdError> {
    let kappas = cfg.sweep_kappa.clone();
    let nbars = cfg.sweep_nbar.clone().unwrap_or_else(|| vec![cfg.nbar]);
    let gs: Vec<Option<f64>> = match &cfg.sweep_g {
        Some(v) => v.iter().map(|&g| Some(g)).collect(),
        None => vec![None],
    };
    let qs = cfg.sweep_q_m.clone().unwrap_or_else(|| vec![cfg.q_m]);
    let n_kappa = kappas.as_ref().map_or(1, Vec::len);
    let total = n_kappa * nbars.len() * gs.len() * qs.len();
    if total > cfg.sweep_budget {
        return Err(CmdError::Config(format!(
            "sweep has {total} points, budget is {}",
            cfg.sweep_budget
        )));
    }
    // kappa outermost, q_m innermost
    let mut points = Vec::with_capacity(total);
    for ki in 0..n_kappa {
        let kappa = kappas.as_ref().map_or(f64::NAN, |v| v[ki]);
        for &nbar in &nbars {
            for &g in &gs {
                for &q_m in &qs {
                    points.push(SweepPoint {
                        kappa,
                        nbar,
                        g,
                        q_m,
                    });
                }
            }
        }
    }
    Ok(points)
}

/// One row per grid point, in deterministic grid order:
/// `kappa1,kappa2,nbar,g1,g2,q_m,mech_dim,omega_m_t_pi,F_t_pi,F_analytic_t_pi,trace_err,herm_err,min_eig`.
pub fn sweep(cfg: &RunConfig) -> Result<String, CmdError> {
    cfg.validate()?;
    let points = sweep_points(cfg)?;
    let rows = points
        .par_iter()
        .map(|pt| -> Result<String, CmdError> {
            let mut c = cfg.clone();
            if !pt.kappa.is_nan() {
                c.kappa1 = pt.kappa;
                c.kappa2 = pt.kappa;
            }
            c.nbar = pt.nbar;
            if let Some(g) = pt.g {
                c.g1 = g;
                c.g2 = g;
            }
            c.q_m = pt.q_m;
            let p = c.params();
            p.validate()?;
            let tp = t_pi(&p)?;
            let evo = c.evolution(&p, vec![0.0, tp]);
            let tr = gate_fidelity_dissipative(&p, &evo)?;
            Ok(format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                num(p.kappa1),
                num(p.kappa2),
                num(p.nbar),
                num(p.g1),
                num(p.g2),
                num(p.q_m),
                evo.mech_dim,
                num(p.omega_m * tp),
                num(tr.fidelity[1]),
                num(analytic_or_nan(tp, &p)),
                num(tr.trace_err[1]),
                num(tr.herm_err[1]),
                num(tr.min_eig[1])
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = String::from(
        "kappa1,kappa2,nbar,g1,g2,q_m,mech_dim,omega_m_t_pi,F_t_pi,F_analytic_t_pi,trace_err,herm_err,min_eig\n",
    );
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}

/// Largest `|c_closed − c_trace|` over all pairs at the given times.
fn oracle_deviation(p: &SystemParams, mech_dim: usize, times: &[f64]) -> Result<f64, Error> {
    let oracle = DecoherenceOracle::new(p, mech_dim)?;
    let mut worst: f64 = 0.0;
    for &t in times {
        let table = oracle.coefficients(t);
        for (k, row) in table.iter().enumerate() {
            for (l, c) in row.iter().enumerate() {
                worst = worst.max((decoherence_coeff(k, l, t, p)? - c).norm());
            }
        }
    }
    Ok(worst)
}

fn uniform(t_end: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
}

/// Text report of the ideal-gate condition, truncation adequacy and the
/// decoherence-coefficient oracle. Fails if any check fails; the residual
/// only counts with `strict_ideal`.
pub fn check(cfg: &RunConfig, strict_ideal: bool) -> (String, Result<(), CmdError>) {
    let mut report = String::new();
    let mut failures = Vec::new();
    if let Err(e) = cfg.validate() {
        return (report, Err(e.into()));
    }
    let p = cfg.params();

    let residual = ideal_condition_residual(&p);
    let ideal = residual.abs() <= IDEAL_RESIDUAL_TOL;
    let _ = writeln!(
        report,
        "ideal_condition_residual = {} ({})",
        num(residual),
        match (ideal, strict_ideal) {
            (true, _) => "ok",
            (false, true) => "FAIL",
            (false, false) => "nonzero, not enforced without --strict-ideal",
        }
    );
    if !ideal && strict_ideal {
        failures.push("ideal condition".to_string());
    }

    match t_pi(&p) {
        Ok(tp) => {
            let _ = writeln!(
                report,
                "t_pi = {} (omega_m t_pi = {}, 2pi multiple {})",
                num(tp),
                num(p.omega_m * tp),
                num(p.omega_m * tp / (2.0 * PI))
            );
        }
        Err(e) => {
            let _ = writeln!(report, "t_pi undefined: {e} (FAIL)");
            failures.push("gate time".to_string());
        }
    }

    let mech_dim = cfg
        .mech_dim
        .unwrap_or_else(|| mech_dim_for(&p, cfg.trunc_tol));
    let tail = thermal_tail(p.nbar, mech_dim);
    let floor = mech_dim_floor(&p, cfg.trunc_tol);
    let trunc_ok = tail <= cfg.trunc_tol && mech_dim >= floor;
    let _ = writeln!(
        report,
        "truncation: mech_dim = {mech_dim}, thermal tail = {} (tol {}), minimum {floor}, recommended {} ({})",
        num(tail),
        num(cfg.trunc_tol),
        mech_dim_for(&p, cfg.trunc_tol),
        if trunc_ok { "ok" } else { "FAIL" }
    );
    if !trunc_ok {
        failures.push("truncation".to_string());
    }

    let times = uniform(4.0 * PI / p.omega_m, 200);
    match oracle_deviation(&p, mech_dim, &times) {
        Ok(dev) => {
            let ok = dev <= ORACLE_TOL;
            let _ = writeln!(
                report,
                "decoherence oracle: max |c_closed - c_trace| = {} over 200 times (tol {}) ({})",
                num(dev),
                num(ORACLE_TOL),
                if ok { "ok" } else { "FAIL" }
            );
            if !ok {
                failures.push("decoherence oracle".to_string());
            }
        }
        Err(e) => {
            let _ = writeln!(report, "decoherence oracle: {e} (FAIL)");
            failures.push("decoherence oracle".to_string());
        }
    }

    let verdict = if failures.is_empty() {
        Ok(())
    } else {
        Err(CmdError::CheckFailed(format!(
            "failed: {}",
            failures.join(", ")
        )))
    };
    let _ = writeln!(
        report,
        "{}",
        if failures.is_empty() { "PASS" } else { "FAIL" }
    );
    (report, verdict)
}

/// Decoherence coefficients from both routes on the configured grid:
/// `omega_m_t,k,l,c_re,c_im,trace_re,trace_im,abs_dev`. The summary covers the
/// coefficient gap, the thermal displacement identity and a seeded Monte
/// Carlo average of the lossless state fidelity at `ω_m t = π` against the
/// closed form.
pub fn oracle(cfg: &RunConfig) -> (String, String, Result<(), CmdError>) {
    let mut csv = String::from("omega_m_t,k,l,c_re,c_im,trace_re,trace_im,abs_dev\n");
    let mut summary = String::new();
    let mut run = || -> Result<bool, CmdError> {
        cfg.validate()?;
        let p = cfg.params();
        let grid = cfg.time_grid()?;
        let mech_dim = cfg
            .mech_dim
            .unwrap_or_else(|| mech_dim_for(&p, cfg.trunc_tol));
        let oracle = DecoherenceOracle::new(&p, mech_dim)
            .map_err(|e| CmdError::CheckFailed(e.to_string()))?;
        let mut worst: f64 = 0.0;
        for &t in &grid {
            let table = oracle.coefficients(t);
            for (k, row) in table.iter().enumerate() {
                for (l, c) in row.iter().enumerate() {
                    let closed = decoherence_coeff(k, l, t, &p)?;
                    let dev = (closed - c).norm();
                    worst = worst.max(dev);
                    let _ = writeln!(
                        csv,
                        "{},{k},{l},{},{},{},{},{}",
                        num(p.omega_m * t),
                        num(closed.re),
                        num(closed.im),
                        num(c.re),
                        num(c.im),
                        num(dev)
                    );
                }
            }
        }
        let coeff_ok = worst <= ORACLE_TOL;
        let _ = writeln!(
            summary,
            "decoherence oracle: max deviation {} (tol {}) ({})",
            num(worst),
            num(ORACLE_TOL),
            if coeff_ok { "ok" } else { "FAIL" }
        );

        let mut ident: f64 = 0.0;
        for r in [0.0, 0.5, 1.0, 1.5] {
            for j in 0..8 {
                let a = C64::from_polar(r, PI * j as f64 / 4.0);
                let traced = thermal_displacement_trace(a, p.nbar, mech_dim)?;
                ident = ident.max((traced - thermal_displacement_average(a, p.nbar)).norm());
            }
        }
        let ident_ok = ident <= THERMAL_IDENTITY_TOL;
        let _ = writeln!(
            summary,
            "thermal displacement identity (|alpha| <= 1.5): max deviation {} (tol {}) ({})",
            num(ident),
            num(THERMAL_IDENTITY_TOL),
            if ident_ok { "ok" } else { "FAIL" }
        );

        if p.uses_default_detunings() && cfg.mc_samples >= 2 {
            // mid-period, where the fidelity is furthest from its revivals
            let t = PI / p.omega_m;
            let mc = monte_carlo_gate_fidelity_analytic(t, &p, cfg.mc_samples, cfg.seed)?;
            let exact = gate_fidelity_analytic(t, &p)?;
            let _ = writeln!(
                summary,
                "monte carlo ({} samples, seed {}): {} +- {} vs closed form {} (z = {:.3}, informational)",
                cfg.mc_samples,
                cfg.seed,
                num(mc.mean),
                num(mc.stderr),
                num(exact),
                mc.z_score(exact)
            );
        }
        Ok(coeff_ok && ident_ok)
    };
    let verdict = match run() {
        Ok(true) => Ok(()),
        Ok(false) => Err(CmdError::CheckFailed(
            "oracle deviation above tolerance".into(),
        )),
        Err(e) => Err(e),
    };
    (csv, summary, verdict)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_has_17_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(1.0), "1.0000000000000000e0");
        assert_eq!(num(-2.5e-300), "-2.5000000000000000e-300");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(f64::NAN), "NaN");
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, 5e-324] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn sweep_order_and_budget() {
        let mut cfg = RunConfig::default();
        cfg.set("sweep_kappa", "0, 0.1").unwrap();
        cfg.set("sweep_nbar", "0, 1, 2").unwrap();
        let pts = sweep_points(&cfg).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!((pts[0].kappa, pts[0].nbar), (0.0, 0.0));
        assert_eq!((pts[1].kappa, pts[1].nbar), (0.0, 1.0));
        assert_eq!((pts[3].kappa, pts[3].nbar), (0.1, 0.0));
        cfg.set("sweep_budget", "5").unwrap();
        assert_eq!(sweep_points(&cfg).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn error_classes() {
        assert_eq!(CmdError::from(Error::NonFinite(1.0)).exit_code(), 3);
        assert_eq!(
            CmdError::from(Error::StepUnderflow { t: 1.0, h: 0.0 }).exit_code(),
            3
        );
        assert_eq!(
            CmdError::from(Error::InvalidParameter("x".into())).exit_code(),
            2
        );
        assert_eq!(CmdError::from(Error::UndefinedGateTime(0.0)).exit_code(), 2);
    }

    #[test]
    fn check_ideal_and_strict() {
        let (report, verdict) = check(&RunConfig::default(), true);
        assert!(verdict.is_ok(), "{report}");
        assert!(report.contains("2pi multiple 1.0000000000000000e0"));

        let mut strong = RunConfig::default();
        strong.set("g", "1").unwrap();
        assert!(check(&strong, false).1.is_ok());
        assert_eq!(check(&strong, true).1.unwrap_err().exit_code(), 1);
    }

    #[test]
    fn check_flags_starved_truncation() {
        let mut cfg = RunConfig::preset("ideal-nbar10").unwrap();
        cfg.set("mech_dim", "8").unwrap();
        let (report, verdict) = check(&cfg, false);
        assert_eq!(verdict.unwrap_err().exit_code(), 1);
        assert!(report.contains("truncation") && report.contains("FAIL"));
    }
}
