//! Plain-text rendering. Only exit codes are a stable interface; this
//! layout may change.

use std::io::{self, Write};

use crate::bounds::{BoundReport, SampleSize};
use crate::domain::MetricKind;
use crate::sampling::PlanSpec;

use super::AuditReport;

fn plan_line(p: &PlanSpec) -> String {
    let mut s = format!("{} (budget {}", p.strategy, p.budget);
    if let Some(e) = p.eta {
        s.push_str(&format!(", eta {e}"));
    }
    if let Some(g) = p.gamma {
        s.push_str(&format!(", gamma {g}"));
    }
    s.push(')');
    s
}

/// Floats are printed in shortest round-trip form.
pub fn write_audit(r: &AuditReport, out: &mut dyn Write) -> io::Result<()> {
    let o = &r.outcome;
    writeln!(out, "decision     {}", o.decision)?;
    writeln!(out, "statistic    {}", o.statistic.f)?;
    writeln!(out, "threshold    {}", o.threshold)?;
    writeln!(out, "first order  {}", o.statistic.f1)?;
    writeln!(out, "second order {}", o.statistic.f2)?;
    writeln!(out, "metric       {}", r.metric)?;
    writeln!(out, "alpha        {}", r.alpha)?;
    writeln!(out, "epsilon      {}", r.epsilon)?;
    writeln!(out, "plan         {}", plan_line(&r.plan))?;
    writeln!(out)?;
    let width = r.groups.iter().map(|g| g.name.len()).max().unwrap_or(5).max(5);
    writeln!(out, "{:<width$}  {:>12}  {:>8}  {:>8}", "group", "weight", "count", "losses")?;
    for g in &r.groups {
        writeln!(out, "{:<width$}  {:>12.6}  {:>8}  {:>8}", g.name, g.weight, g.count, g.losses)?;
    }
    for g in &r.sparse_groups {
        writeln!(out, "warning: group `{g}` has fewer than 2 samples")?;
    }
    Ok(())
}

fn size(s: &SampleSize) -> String {
    if s.order_only {
        format!("{:.1} (order only)", s.value)
    } else {
        format!("{:.1}", s.value)
    }
}

pub fn write_bounds(r: &BoundReport, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "groups              {}", r.k)?;
    writeln!(out, "alpha               {}", r.alpha)?;
    writeln!(out, "epsilon             {}", r.epsilon)?;
    writeln!(out, "delta               {}", r.delta)?;
    writeln!(out, "H_2/3 (bits)        {:.6}", r.renyi_23)?;
    writeln!(out, "Shannon (bits)      {:.6}", r.shannon)?;
    writeln!(out, "2^(H_2/3 / 2)       {:.6}  (sqrt K = {:.6})", r.renyi_sqrt_term, (r.k as f64).sqrt())?;
    writeln!(out)?;
    writeln!(out, "samples for error <= delta")?;
    writeln!(
        out,
        "  weighted, v ~ w^(2/3)   {:.1}  (leading {:.1}, second {:.1})",
        r.n_weighted.value, r.n_weighted.leading, r.n_weighted.second
    )?;
    writeln!(out, "  attribute-specific      {}", size(&r.n_attr))?;
    writeln!(out, "  converse, max-gap       {}", size(&r.n_converse_maxgap))?;
    writeln!(out, "  converse, CVaR          {}", size(&r.n_converse_cvar))?;
    if !r.curve.is_empty() {
        writeln!(out)?;
        writeln!(out, "{:>12}  {:>14}  {:>14}  {:>12}", "n", "weighted", "attr", "le cam floor")?;
        for p in &r.curve {
            writeln!(
                out,
                "{:>12}  {:>14.6e}  {:>14.6e}  {:>12.6}",
                p.n, p.p_err_weighted.value, p.p_err_attr.value, p.le_cam_floor
            )?;
        }
    }
    Ok(())
}

/// An audit config matching a synthetic dataset written next to it.
pub fn audit_config_text(metric: MetricKind, alpha: f64, epsilon: f64, plan: &PlanSpec) -> String {
    let mut s = String::from("# written by fairaudit synth\n");
    s.push_str(&format!("metric = {}\nalpha = {alpha}\nepsilon = {epsilon}\nweights = file:weights.csv\n", metric.short_name()));
    s.push_str(&format!("plan = {}\nbudget = {}\n", plan.strategy, plan.budget));
    if let Some(e) = plan.eta {
        s.push_str(&format!("eta = {e}\n"));
    }
    if let Some(g) = plan.gamma {
        s.push_str(&format!("gamma = {g}\n"));
    }
    s
}
