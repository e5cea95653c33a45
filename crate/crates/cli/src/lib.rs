//! Experiment runner behind the `hardy-lab` binary.
//!
//! A run resolves a JSON [`config::RunConfig`] into explicit
//! [`config::Settings`], executes one subcommand and produces a [`RunReport`]
//! plus, for tabular subcommands, a CSV table.

pub mod commands;
pub mod config;

use std::path::PathBuf;
use std::time::Instant;

use clap::ValueEnum;
use hardy_core::{Domain, Exponent, PointSequence};
use serde::Serialize;

use commands::{
    BergmanResult, CarlesonResult, DualResult, ExtendResult, GleasonResult, InvariantCheck, KhintchineResult,
    NormsResult, ShResult,
};
use config::Settings;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hardy_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Exit status for a failed invariant check.
pub const EXIT_INVARIANT: u8 = 5;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use hardy_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Core(E::Capacity(_)) => 3,
            CliError::Core(E::Numeric(_) | E::IllConditioned { .. }) => 4,
            CliError::Core(E::Invariant(_)) => EXIT_INVARIANT,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    Norms,
    Sh,
    Carleson,
    Dual,
    Gleason,
    Extend,
    Khintchine,
    Bergman,
    /// Gleason separation, kernel norms, Carleson constants and, when
    /// exponents allow, the dual system and extension for one point set.
    Report,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Norms => "norms",
            Subcommand::Sh => "sh",
            Subcommand::Carleson => "carleson",
            Subcommand::Dual => "dual",
            Subcommand::Gleason => "gleason",
            Subcommand::Extend => "extend",
            Subcommand::Khintchine => "khintchine",
            Subcommand::Bergman => "bergman",
            Subcommand::Report => "report",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Results {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gleason: Option<GleasonResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norms: Option<NormsResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sh: Option<ShResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carleson: Option<CarlesonResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extend: Option<ExtendResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub khintchine: Option<KhintchineResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bergman: Option<BergmanResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: Subcommand,
    pub config: Settings,
    pub results: Results,
    pub invariants: Vec<InvariantCheck>,
    /// The only field that differs between identical runs.
    pub wall_clock_ms: u64,
}

impl RunReport {
    pub fn invariants_hold(&self) -> bool {
        self.invariants.iter().all(|c| c.holds)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }
}

pub fn run(subcommand: Subcommand, cfg: Settings) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut results = Results::default();
    let mut invariants = Vec::new();
    match subcommand {
        Subcommand::Norms => results.norms = Some(commands::norms(&cfg)?),
        Subcommand::Sh => results.sh = Some(commands::sh(&cfg)?),
        Subcommand::Carleson => results.carleson = Some(commands::carleson(&cfg)?),
        Subcommand::Gleason => results.gleason = Some(commands::gleason(&cfg)?),
        Subcommand::Dual => {
            let r = commands::dual(&cfg)?;
            invariants.extend(r.invariants());
            results.dual = Some(r);
        }
        Subcommand::Extend => {
            let r = commands::extend(&cfg)?;
            invariants.extend(r.invariants());
            results.extend = Some(r);
        }
        Subcommand::Khintchine => {
            let r = commands::khintchine(&cfg)?;
            invariants.extend(r.invariants());
            results.khintchine = Some(r);
        }
        Subcommand::Bergman => {
            let r = commands::bergman(&cfg)?;
            invariants.extend(r.invariants());
            results.bergman = Some(r);
        }
        Subcommand::Report => {
            results.gleason = Some(commands::gleason(&cfg)?);
            results.norms = Some(commands::norms(&cfg)?);
            results.carleson = Some(commands::carleson(&cfg)?);
            if cfg.p.is_some() {
                let r = commands::dual(&cfg)?;
                invariants.extend(r.invariants());
                results.dual = Some(r);
            }
            if cfg.s.is_some() && cfg.p.is_some() {
                let r = commands::extend(&cfg)?;
                invariants.extend(r.invariants());
                results.extend = Some(r);
            }
        }
    }
    if let Some(weak) = results.carleson.as_ref().and_then(|c| c.report.weak.as_ref()) {
        if weak.q == Exponent::TWO {
            invariants
                .push(InvariantCheck { name: "weak 2-Carleson bound".into(), holds: weak.constant <= 1.0 + 1e-10 });
        }
    }
    Ok(RunReport {
        tool: "hardy-lab",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        config: cfg,
        results,
        invariants,
        wall_clock_ms: start.elapsed().as_millis() as u64,
    })
}

fn coord_headers(domain: Domain) -> Vec<String> {
    (1..=domain.dim()).flat_map(|i| [format!("a{i}_re"), format!("a{i}_im")]).collect()
}

fn coord_fields(point: &hardy_core::InteriorPoint) -> Vec<String> {
    point.coords().iter().flat_map(|c| [num(c.re), num(c.im)]).collect()
}

fn exponent_field(p: Exponent) -> String {
    p.to_string()
}

/// Shortest round-trip form, switching to exponent notation for tiny values.
fn num(x: f64) -> String {
    format!("{x:?}")
}

/// A CSV table with a name used for its output file.
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn norms_table(r: &NormsResult, domain: Domain) -> Table {
    let mut header = coord_headers(domain);
    header.extend(strings(&["p", "norm", "kernel_at_self", "resolution", "residual"]));
    let rows = r
        .tables
        .iter()
        .flat_map(|t| {
            t.entries.iter().map(move |e| {
                let mut row = coord_fields(&t.point);
                let residual = t.convergence.map_or(f64::NAN, |c| c.residual);
                row.extend([
                    exponent_field(e.p),
                    num(e.norm),
                    num(t.kernel_at_self),
                    t.resolution.to_string(),
                    num(residual),
                ]);
                row
            })
        })
        .collect();
    Table { name: "norms".into(), header, rows }
}

fn sh_table(r: &ShResult, domain: Domain) -> Table {
    let mut header = coord_headers(domain);
    header.extend(strings(&["ratio", "hypothesis", "resolution", "residual", "converged"]));
    let rows = r
        .scans
        .iter()
        .flat_map(|scan| {
            scan.points.iter().chain(&scan.flagged).map(move |pt| {
                let mut row = coord_fields(&pt.point);
                row.extend([
                    num(pt.ratio),
                    scan.hypothesis.label(),
                    pt.convergence.resolution.to_string(),
                    num(pt.convergence.residual),
                    pt.convergence.converged.to_string(),
                ]);
                row
            })
        })
        .collect();
    Table { name: "sh".into(), header, rows }
}

fn gleason_table(r: &GleasonResult) -> Table {
    let rows = r
        .distances
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(move |(j, _)| *j > i)
                .map(move |(j, d)| vec![i.to_string(), j.to_string(), num(*d)])
        })
        .collect();
    Table { name: "gleason".into(), header: strings(&["i", "j", "distance"]), rows }
}

fn extend_table(r: &ExtendResult) -> Table {
    let mut header = strings(&["index"]);
    header.extend(coord_headers(r.points.domain()));
    header.extend(strings(&["nu_re", "nu_im", "target_norm", "residual"]));
    let rows = PointSequence::points(&r.points)
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut row = vec![i.to_string()];
            row.extend(coord_fields(a));
            row.extend([num(r.nu[i].re), num(r.nu[i].im), num(r.target_norms[i]), num(r.report.residuals[i])]);
            row
        })
        .collect();
    Table { name: "extend_residuals".into(), header, rows }
}

fn khintchine_table(r: &KhintchineResult) -> Table {
    let rows = r
        .rows
        .iter()
        .map(|row| {
            let method = match row.method {
                hardy_core::ExpectationMethod::Exact => "exact".to_string(),
                hardy_core::ExpectationMethod::MonteCarlo { samples, seed } => {
                    format!("monte_carlo(samples={samples};seed={seed})")
                }
            };
            vec![exponent_field(row.q), row.n.to_string(), num(row.ratio), method, num(row.stderr)]
        })
        .collect();
    Table { name: "khintchine".into(), header: strings(&["q", "N", "ratio", "method", "stderr"]), rows }
}

/// The CSV tables of a report, in a fixed order.
pub fn tables(report: &RunReport) -> Vec<Table> {
    let r = &report.results;
    let domain = report.config.domain;
    let mut out = Vec::new();
    if let Some(g) = &r.gleason {
        out.push(gleason_table(g));
    }
    if let Some(n) = &r.norms {
        out.push(norms_table(n, domain));
    }
    if let Some(s) = &r.sh {
        out.push(sh_table(s, domain));
    }
    if let Some(e) = &r.extend {
        out.push(extend_table(e));
    }
    if let Some(k) = &r.khintchine {
        out.push(khintchine_table(k));
    }
    out
}
