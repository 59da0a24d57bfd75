//! One function per subcommand. Each returns the tables to write and the
//! checks that failed; nothing here touches the filesystem.

use gexpect::expectation::{GExpectation, MethodKind};
use gexpect::properties::{theorem_verdict, PropertyReport, Theorem, VerdictConfig};
use gexpect::representation::{
    default_eps_schedule, limit_equivalence_check, recover_generator, RecoveryMethod, RecoveryTarget,
};
use gexpect::risk::{classify, RiskConfig};
use gexpect::rng::CounterStream;

use crate::config::{Command, ExperimentConfig, MethodName};
use crate::error::{CliError, Result};
use crate::table::{emit_convergence_table, Cell, ConvergencePoint, Table};

/// Random recovery targets draw from streams `TARGET_STREAM + k`, clear of
/// the path and sampling streams used by the core.
const TARGET_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone)]
pub struct Artifact {
    /// File name inside the output directory.
    pub name: String,
    pub table: Table,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// Failed checks; non-empty means exit status 3.
    pub failures: Vec<String>,
    /// Solver warnings worth showing on stderr.
    pub notes: Vec<String>,
}

impl RunOutput {
    fn push(&mut self, name: String, table: Table) {
        self.artifacts.push(Artifact { name, table });
    }
}

pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.command {
        Command::Price => price(cfg),
        Command::Recover => recover(cfg),
        Command::CheckProperties => check_properties(cfg),
        Command::ClassifyRisk => classify_risk(cfg),
        Command::Converge => converge(cfg),
        Command::Equivalence => equivalence(cfg),
    }
}

/// `price.csv` with `suffix` spliced in before the extension.
fn sibling(primary: &str, suffix: &str) -> String {
    match primary.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}_{suffix}.{ext}"),
        None => format!("{primary}_{suffix}"),
    }
}

fn expectation(cfg: &ExperimentConfig, steps: Option<usize>) -> Result<GExpectation<f64>> {
    let grid = match steps {
        Some(n) => cfg.grid_with(n)?,
        None => cfg.time_grid()?,
    };
    GExpectation::new(cfg.generator_spec()?, grid, cfg.core_method(), cfg.core_mode())
        .map_err(CliError::core("generator"))
}

fn price(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let ge = expectation(cfg, None)?;
    let mut out = RunOutput { notes: ge.warnings().to_vec(), ..Default::default() };
    let mut t = Table::new(&[
        "claim[expr]",
        "method[text]",
        "horizon[time]",
        "steps[count]",
        "paths[count]",
        "value[claim]",
        "std_error[claim]",
    ]);
    for (i, claim) in cfg.claim_list()?.iter().enumerate() {
        let r = ge.evaluate(claim).map_err(CliError::core(format!("claim {i}")))?;
        let lsmc = r.method == MethodKind::Lsmc;
        t.push(vec![
            cfg.claims[i].as_str().into(),
            r.method.to_string().into(),
            ge.grid().horizon().into(),
            ge.grid().steps().into(),
            lsmc.then_some(cfg.lsmc.paths).into(),
            r.value.into(),
            lsmc.then_some(r.error_estimate).into(),
        ]);
    }
    out.push(cfg.output_name(), t);
    Ok(out)
}

/// Explicit targets first, then the random ones in `(time, k)` order.
fn targets(cfg: &ExperimentConfig) -> Vec<RecoveryTarget<f64>> {
    let Some(r) = cfg.recover.as_ref() else { return Vec::new() };
    let mut out: Vec<RecoveryTarget<f64>> = r
        .targets
        .iter()
        .map(|t| RecoveryTarget { t: t.t, y: t.y, z: t.z.clone() })
        .collect();
    if let Some(rand) = &r.random {
        let mut k = 0u64;
        for &t in &rand.times {
            for _ in 0..rand.count {
                let mut s = CounterStream::new(cfg.seed, TARGET_STREAM + k);
                let y = s.uniform_in(rand.y[0], rand.y[1]);
                let z = (0..cfg.generator.d).map(|_| s.uniform_in(rand.z[0], rand.z[1])).collect();
                out.push(RecoveryTarget { t, y, z });
                k += 1;
            }
        }
    }
    out
}

fn eps_schedule(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.recover
        .as_ref()
        .and_then(|r| r.eps.clone())
        .unwrap_or_else(|| default_eps_schedule(cfg.grid.horizon))
}

fn target_header(d: usize, tail: &[&str]) -> Vec<String> {
    let mut h = vec!["target[index]".to_string(), "t[time]".into(), "y[state]".into()];
    h.extend((1..=d).map(|j| format!("z{j}[state]")));
    h.extend(tail.iter().map(|s| s.to_string()));
    h
}

fn target_cells(k: usize, t: &RecoveryTarget<f64>) -> Vec<Cell> {
    let mut row: Vec<Cell> = vec![k.into(), t.t.into(), t.y.into()];
    row.extend(t.z.iter().map(|&z| Cell::from(z)));
    row
}

fn recover(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let g = cfg.generator_spec()?;
    let section = cfg.recover.as_ref().expect("validated");
    let eps = eps_schedule(cfg);
    let method = match cfg.method {
        MethodName::Lattice => RecoveryMethod::Lattice,
        MethodName::Lsmc => RecoveryMethod::Lsmc(cfg.lsmc_config()),
    };
    let tol = cfg.tolerances.recovery;
    let d = cfg.generator.d;
    let mut summary = Table::with_header(target_header(
        d,
        &["recovered[driver]", "g[driver]", "abs_error[driver]", "residual[driver]", "pass[bool]"],
    ));
    let mut slopes = Table::with_header(target_header(d, &["eps[time]", "slope[driver]", "std_error[driver]"]));
    let mut out = RunOutput::default();
    for (k, target) in targets(cfg).into_iter().enumerate() {
        let exact = g
            .eval_at(target.t, target.y, &target.z)
            .map_err(CliError::core(format!("target {k}")))?;
        let r = recover_generator(&g, target.clone(), cfg.grid.horizon, &eps, section.steps_per_eps, method)
            .map_err(CliError::core(format!("target {k}")))?;
        let err = (r.extrapolated - exact).abs();
        let pass = err <= tol;
        if !pass {
            out.failures.push(format!(
                "target {k} (t={}, y={}, z={:?}): |recovered - g| = {err:e} > {tol:e}",
                target.t, target.y, target.z
            ));
        }
        let mut row = target_cells(k, &target);
        row.extend([r.extrapolated.into(), exact.into(), err.into(), r.residual.into(), pass.into()]);
        summary.push(row);
        for ((&e, &s), &se) in r.eps_schedule.iter().zip(&r.raw_slopes).zip(&r.slope_std_errors) {
            let mut row = target_cells(k, &target);
            row.extend([e.into(), s.into(), se.into()]);
            slopes.push(row);
        }
    }
    let name = cfg.output_name();
    out.push(sibling(&name, "slopes"), slopes);
    out.push(name, summary);
    Ok(out)
}

fn equivalence(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let g = cfg.generator_spec()?;
    let section = cfg.recover.as_ref().expect("validated");
    let eps = eps_schedule(cfg);
    let tol = cfg.tolerances.equivalence;
    let d = cfg.generator.d;
    let mut t = Table::with_header(target_header(
        d,
        &["eps[time]", "slope[driver]", "average[driver]", "gap[driver]"],
    ));
    let mut limits = Table::with_header(target_header(
        d,
        &["slope_limit[driver]", "average_limit[driver]", "max_gap[driver]", "pass[bool]"],
    ));
    let mut out = RunOutput::default();
    for (k, target) in targets(cfg).into_iter().enumerate() {
        let r = limit_equivalence_check(&g, target.clone(), cfg.grid.horizon, &eps, section.steps_per_eps)
            .map_err(CliError::core(format!("target {k}")))?;
        for i in 0..r.eps_schedule.len() {
            let mut row = target_cells(k, &target);
            row.extend([r.eps_schedule[i].into(), r.slopes[i].into(), r.averages[i].into(), r.gaps[i].into()]);
            t.push(row);
        }
        let pass = r.max_gap <= tol;
        if !pass {
            out.failures
                .push(format!("target {k}: max |slope - average| = {:e} > {tol:e}", r.max_gap));
        }
        let mut row = target_cells(k, &target);
        row.extend([r.slope_limit.into(), r.average_limit.into(), r.max_gap.into(), pass.into()]);
        limits.push(row);
    }
    let name = cfg.output_name();
    out.push(sibling(&name, "limits"), limits);
    out.push(name, t);
    Ok(out)
}

/// `group` is the theorem name, or `axiom` / `generator` for risk reports.
const REPORT_HEADER: [&str; 8] = [
    "group[text]",
    "property[text]",
    "level[text]",
    "instance[text]",
    "violation[claim]",
    "tol[claim]",
    "instance_pass[bool]",
    "report_pass[bool]",
];

/// One row per instance; generator reports keep only their witness.
fn report_rows(t: &mut Table, group: &str, r: &PropertyReport<f64>) {
    for inst in &r.instances {
        t.push(vec![
            group.into(),
            r.property.name().into(),
            r.level.to_string().into(),
            inst.label.as_str().into(),
            inst.violation.into(),
            r.tol.into(),
            (inst.violation <= r.tol).into(),
            r.pass.into(),
        ]);
    }
}

fn describe_failure(group: &str, r: &PropertyReport<f64>) -> String {
    format!(
        "{group}: {} fails at {} level: violation {:e} > tol {:e} at {}",
        r.property.name(),
        r.level,
        r.max_violation,
        r.tol,
        r.witness.as_deref().unwrap_or("?")
    )
}

fn check_properties(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let ge = expectation(cfg, None)?;
    let mut vc = VerdictConfig::standard(cfg.grid.horizon);
    let battery = cfg.battery.clone().unwrap_or_default();
    if !cfg.claims.is_empty() {
        vc.claims = cfg.claim_list()?;
    }
    vc.constants = battery.constants.unwrap_or(vc.constants);
    vc.alphas = battery.alphas.unwrap_or(vc.alphas);
    vc.lambdas = battery.lambdas.unwrap_or(vc.lambdas);
    vc.samples = battery.samples.unwrap_or(vc.samples);
    vc.seed = cfg.seed;
    vc.generator_tol = cfg.tolerances.generator;
    vc.operator_tol = cfg.tolerances.operator;
    let theorems: Vec<Theorem> = match battery.theorems {
        Some(names) => names.iter().map(|n| Theorem::from_name(n).expect("validated")).collect(),
        None => Theorem::ALL.to_vec(),
    };

    let mut out = RunOutput { notes: ge.warnings().to_vec(), ..Default::default() };
    let mut rows = Table::new(&REPORT_HEADER);
    let mut verdicts = Table::new(&[
        "theorem[text]",
        "outcome[text]",
        "consistent[bool]",
        "generator_pass[bool]",
        "static_pass[bool]",
        "dynamic_pass[bool]",
        "max_static_violation[claim]",
        "static_witness[text]",
        "notes[text]",
    ]);
    for th in theorems {
        let v = theorem_verdict(th, &ge, &vc);
        let name = th.to_string();
        let reports = v.generator_side.iter().chain(&v.operator_side);
        for r in reports {
            report_rows(&mut rows, &name, r);
            if !r.pass {
                out.failures.push(describe_failure(&name, r));
            }
        }
        for n in &v.notes {
            out.failures.push(format!("{name}: {n}"));
        }
        let level = |i: usize| v.operator_side.get(i);
        verdicts.push(vec![
            name.as_str().into(),
            v.outcome.to_string().into(),
            v.consistent.into(),
            v.generator_side.as_ref().map(|r| r.pass).into(),
            level(0).map(|r| r.pass).into(),
            level(1).map(|r| r.pass).into(),
            level(0).map(|r| r.max_violation).into(),
            level(0).and_then(|r| r.witness.clone()).into(),
            v.notes.join("; ").into(),
        ]);
    }
    let name = cfg.output_name();
    out.push(sibling(&name, "verdicts"), verdicts);
    out.push(name, rows);
    Ok(out)
}

fn classify_risk(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let ge = expectation(cfg, None)?;
    let mut rc = RiskConfig::standard(cfg.grid.horizon);
    let battery = cfg.battery.clone().unwrap_or_default();
    if !cfg.claims.is_empty() {
        rc.positions = cfg.claim_list()?;
    }
    rc.constants = battery.constants.unwrap_or(rc.constants);
    rc.alphas = battery.alphas.unwrap_or(rc.alphas);
    rc.lambdas = battery.lambdas.unwrap_or(rc.lambdas);
    rc.samples = battery.samples.unwrap_or(rc.samples);
    rc.seed = cfg.seed;
    rc.generator_tol = cfg.tolerances.generator;
    rc.operator_tol = cfg.tolerances.operator;

    let c = classify(&ge, &rc).map_err(CliError::core("classification"))?;
    let mut out = RunOutput { notes: ge.warnings().to_vec(), ..Default::default() };
    let mut rows = Table::new(&REPORT_HEADER);
    for r in &c.axiom_reports {
        report_rows(&mut rows, "axiom", r);
    }
    for r in &c.generator_reports {
        report_rows(&mut rows, "generator", r);
    }
    let mut summary = Table::new(&[
        "monetary[bool]",
        "convex[bool]",
        "coherent[bool]",
        "class[text]",
        "static_class[text]",
        "dynamic_class[text]",
        "generator_class[text]",
        "static_implies_dynamic[bool]",
    ]);
    let class = c.verdicts().class();
    summary.push(vec![
        c.monetary.into(),
        c.convex.into(),
        c.coherent.into(),
        class.into(),
        c.static_verdicts.class().into(),
        c.dynamic_verdicts.class().into(),
        c.generator_route.class().into(),
        c.static_implies_dynamic.into(),
    ]);
    if !c.static_implies_dynamic {
        out.failures.push(format!(
            "static class {} is not kept at the dynamic level ({})",
            c.static_verdicts.class(),
            c.dynamic_verdicts.class()
        ));
    }
    if let Some(expected) = cfg.expect_class {
        if expected.name() != class {
            out.failures.push(format!("expected class {}, got {class}", expected.name()));
        }
    }
    let name = cfg.output_name();
    out.push(sibling(&name, "summary"), summary);
    out.push(name, rows);
    Ok(out)
}

fn converge(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let section = cfg.converge.as_ref().expect("validated");
    let claim = &cfg.claim_list()?[0];
    let mut out = RunOutput::default();
    let mut points = Vec::with_capacity(section.steps.len());
    for (i, &n) in section.steps.iter().enumerate() {
        let ge = expectation(cfg, Some(n)).map_err(|e| match e {
            CliError::Config { message, .. } => CliError::config(format!("/converge/N/{i}"), message),
            e => e,
        })?;
        if i == 0 {
            out.notes.extend_from_slice(ge.warnings());
        }
        let r = ge.evaluate(claim).map_err(CliError::core(format!("N = {n}")))?;
        points.push(ConvergencePoint { steps: n, value: r.value });
    }
    out.push(cfg.output_name(), emit_convergence_table(&points, section.oracle)?);
    Ok(out)
}
