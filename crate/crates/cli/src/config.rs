use std::fs::File;
use std::path::{Path, PathBuf};

use hardy_core::exponent::complementary;
use hardy_core::sequences::DualMethod;
use hardy_core::{Complex64, Domain, Exponent, PointSequence};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Raw JSON configuration. Every field is optional; [`RunConfig::resolve`]
/// fills defaults and checks consistency.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Option<Domain>,
    /// Each point is a flat list `[re₁, im₁, re₂, im₂, …]`.
    pub points: Option<Vec<Vec<f64>>>,
    /// CSV file with `re, im` columns per coordinate, relative to the config file.
    pub points_csv: Option<PathBuf>,
    pub s: Option<Exponent>,
    pub p: Option<Exponent>,
    pub q: Option<Exponent>,
    pub dual_method: Option<DualMethod>,
    /// Interpolation target `[re, im]` per point; all ones by default.
    pub nu: Option<Vec<[f64; 2]>>,
    pub exponents: Option<Vec<Exponent>>,
    pub batch: Option<usize>,
    pub seed: Option<u64>,
    pub resolution: Option<usize>,
    pub hardy_resolution: Option<usize>,
    pub exact_limit: Option<usize>,
    pub mc_samples: Option<usize>,
    pub restarts: Option<usize>,
    pub tikhonov: Option<bool>,
    pub weight: Option<u32>,
    pub max_degree: Option<u32>,
    pub grid: Option<GridConfig>,
    pub khintchine: Option<KhintchineConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub max_radius: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KhintchineConfig {
    pub qs: Vec<Exponent>,
    pub sizes: Vec<usize>,
}

/// A validated configuration with every default made explicit. This is the
/// config echo written into each report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub domain: Domain,
    pub points: Option<PointSequence>,
    pub s: Option<Exponent>,
    pub p: Option<Exponent>,
    pub q: Option<Exponent>,
    pub dual_method: Option<DualMethod>,
    pub nu: Option<Vec<Complex64>>,
    pub exponents: Vec<Exponent>,
    pub batch: usize,
    pub seed: Option<u64>,
    pub resolution: usize,
    pub hardy_resolution: usize,
    pub exact_limit: usize,
    pub mc_samples: usize,
    pub restarts: usize,
    pub tikhonov: bool,
    pub weight: u32,
    pub max_degree: u32,
    pub grid: GridConfig,
    pub khintchine: KhintchineConfig,
}

/// Values given on the command line; they override the file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub resolution: Option<usize>,
}

pub fn default_resolution(domain: Domain) -> usize {
    match domain {
        Domain::UnitDisc => 1024,
        Domain::UnitBall2 => 32,
        Domain::Bidisc => 64,
    }
}

fn same(a: Exponent, b: Exponent) -> bool {
    if a.is_infinite() || b.is_infinite() {
        a.is_infinite() && b.is_infinite()
    } else {
        (a.value() - b.value()).abs() <= 1e-12 * a.value()
    }
}

fn config_err(e: hardy_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

type Triple = (Option<Exponent>, Option<Exponent>, Option<Exponent>);

/// Complete `(s, p, q)` from whichever two are given and check `1/s = 1/p + 1/q`.
fn exponent_triple(s: Option<Exponent>, p: Option<Exponent>, q: Option<Exponent>) -> Result<Triple, CliError> {
    match (s, p, q) {
        (Some(s), Some(p), q) => {
            let derived = complementary(s, p).map_err(config_err)?;
            if let Some(q) = q {
                if !same(q, derived) {
                    return Err(CliError::Config(format!(
                        "q = {q} contradicts 1/s = 1/p + 1/q, which gives q = {derived}"
                    )));
                }
            }
            Ok((Some(s), Some(p), Some(derived)))
        }
        (Some(s), None, Some(q)) => {
            let p = Exponent::from_recip(s.recip() - q.recip()).map_err(config_err)?;
            if s.value() >= p.value() {
                return Err(CliError::Config(format!("s = {s} and q = {q} leave no exponent p > s")));
            }
            Ok((Some(s), Some(p), Some(q)))
        }
        other => Ok(other),
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let (Some(csv), Some(dir)) = (&cfg.points_csv, path.parent()) {
            if csv.is_relative() {
                cfg.points_csv = Some(dir.join(csv));
            }
        }
        Ok(cfg)
    }

    pub fn resolve(self, overrides: Overrides) -> Result<Settings, CliError> {
        let domain = self.domain.unwrap_or(Domain::UnitDisc);
        let points = match (self.points, self.points_csv) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either points or points_csv, not both".into())),
            (Some(raw), None) => Some(inline_points(domain, &raw)?),
            (None, Some(path)) => {
                let file = File::open(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                Some(PointSequence::from_csv(domain, file).map_err(config_err)?)
            }
            (None, None) => None,
        };
        let (s, p, q) = exponent_triple(self.s, self.p, self.q)?;
        let nu = match self.nu {
            None => None,
            Some(raw) => {
                let n = points.as_ref().map(PointSequence::len);
                if n != Some(raw.len()) {
                    return Err(CliError::Config(format!("nu has {} entries but there are {n:?} points", raw.len())));
                }
                Some(raw.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
            }
        };
        let resolution = overrides.resolution.or(self.resolution).unwrap_or_else(|| default_resolution(domain));
        if resolution < 4 {
            return Err(CliError::Config(format!("resolution {resolution} is below 4")));
        }
        let grid = self.grid.unwrap_or(GridConfig { max_radius: 0.9, count: 10 });
        if !(0.0..1.0).contains(&grid.max_radius) || grid.count == 0 {
            return Err(CliError::Config("grid needs 0 <= max_radius < 1 and count >= 1".into()));
        }
        let khintchine = self.khintchine.unwrap_or(KhintchineConfig {
            qs: vec![Exponent::ONE, Exponent::TWO, Exponent::new(4.0).expect("valid")],
            sizes: vec![1, 2, 4, 8, 12],
        });
        if khintchine.sizes.contains(&0) || khintchine.qs.iter().any(|q| q.is_infinite()) {
            return Err(CliError::Config("khintchine sizes must be positive and exponents finite".into()));
        }
        Ok(Settings {
            domain,
            points,
            s,
            p,
            q,
            dual_method: self.dual_method,
            nu,
            exponents: self.exponents.unwrap_or_else(|| {
                ["1", "4/3", "2", "4", "inf"].iter().map(|e| e.parse().expect("valid exponent")).collect()
            }),
            batch: self.batch.unwrap_or(64),
            seed: overrides.seed.or(self.seed),
            resolution,
            hardy_resolution: self.hardy_resolution.unwrap_or(32),
            exact_limit: self.exact_limit.unwrap_or(12),
            mc_samples: self.mc_samples.unwrap_or(4096),
            restarts: self.restarts.unwrap_or(32),
            tikhonov: self.tikhonov.unwrap_or(false),
            weight: self.weight.unwrap_or(0),
            max_degree: self.max_degree.unwrap_or(6),
            grid,
            khintchine,
        })
    }
}

fn inline_points(domain: Domain, raw: &[Vec<f64>]) -> Result<PointSequence, CliError> {
    let width = 2 * domain.dim();
    let coords = raw
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != width {
                return Err(CliError::Config(format!("point {i} has {} numbers, {domain} needs {width}", row.len())));
            }
            Ok(row.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
        })
        .collect::<Result<Vec<Vec<Complex64>>, _>>()?;
    PointSequence::from_coords(domain, coords).map_err(config_err)
}

impl Settings {
    pub fn seed(&self, step: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config(format!("{step} is stochastic: set \"seed\" in the config or pass --seed")))
    }

    pub fn points(&self) -> Result<&PointSequence, CliError> {
        self.points.as_ref().ok_or_else(|| CliError::Config("this subcommand needs points or points_csv".into()))
    }

    pub fn require(&self, name: &str, value: Option<Exponent>) -> Result<Exponent, CliError> {
        value.ok_or_else(|| CliError::Config(format!("this subcommand needs the exponent {name}")))
    }

    /// The target, all ones unless configured.
    pub fn target(&self, n: usize) -> Vec<Complex64> {
        self.nu.clone().unwrap_or_else(|| vec![Complex64::new(1.0, 0.0); n])
    }
}
