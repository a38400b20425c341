//! Run configuration: an optional `key = value` file overridden by command-line flags.

use std::path::{Path, PathBuf};

use afw3d::config::{Tolerances, R_MAX};
use afw3d::mesh::{read_mesh, unit_cube_mesh, OrderMap, SimplicialMesh};
use afw3d::stability_lab::OrderPolicy;
use afw3d::tensor_ops::Material;
use clap::Args;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {path}: {message}")]
    File { path: String, message: String },
    #[error("invalid value for {key}: {message}")]
    Value { key: String, message: String },
    #[error("{0}")]
    Orders(String),
    #[error("mesh: {0}")]
    Mesh(String),
}

/// Flags shared by every subcommand; each overrides the same key of the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// Plain-text `key = value` file with defaults for the flags below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Mesh file (`afw3d-mesh v1`); the unit cube is used otherwise.
    #[arg(long, global = true)]
    pub mesh: Option<PathBuf>,
    /// Subdivisions per axis of the unit cube.
    #[arg(long, global = true)]
    pub n: Option<String>,
    /// Uniform polynomial order.
    #[arg(long, global = true)]
    pub r: Option<String>,
    /// Per-tet orders `0,1,2,...`, `mixed` or `random:LO-HI` (seeded by --seed).
    #[arg(long, global = true)]
    pub orders: Option<String>,
    #[arg(long, global = true)]
    pub lambda: Option<String>,
    #[arg(long, global = true)]
    pub mu: Option<String>,
    /// Refinement levels (including the base mesh).
    #[arg(long, global = true)]
    pub levels: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Output directory for CSV and JSON reports.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Multiplies every check tolerance.
    #[arg(long = "tol-scale", global = true)]
    pub tol_scale: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshSource {
    Cube { n: usize },
    File { path: String },
}

/// Everything a subcommand needs. Serialized into every report except the output path.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub policy: String,
    pub lame_lambda: f64,
    pub lame_mu: f64,
    pub levels: Option<usize>,
    pub seed: u64,
    pub tol_scale: f64,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    orders: Option<String>,
    #[serde(skip)]
    r: Option<u32>,
}

const KEYS: [&str; 10] = ["mesh", "n", "r", "orders", "lambda", "mu", "levels", "seed", "out", "tol-scale"];

fn read_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let err = |message: String| ConfigError::File {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("line {}: expected key = value", i + 1)))?;
        let k = k.trim().replace('_', "-");
        if !KEYS.contains(&k.as_str()) {
            return Err(err(format!("line {}: unknown key '{k}'", i + 1)));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.into(),
        message: format!("'{v}': {e}"),
    })
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, ConfigError> {
        let mut kv = match &flags.config {
            Some(p) => read_file(p)?,
            None => Vec::new(),
        };
        let overrides = [
            ("mesh", flags.mesh.as_ref().map(|p| p.display().to_string())),
            ("n", flags.n.clone()),
            ("r", flags.r.clone()),
            ("orders", flags.orders.clone()),
            ("lambda", flags.lambda.clone()),
            ("mu", flags.mu.clone()),
            ("levels", flags.levels.clone()),
            ("seed", flags.seed.clone()),
            ("out", flags.out.as_ref().map(|p| p.display().to_string())),
            ("tol-scale", flags.tol_scale.clone()),
        ];
        for (k, v) in overrides {
            if let Some(v) = v {
                kv.push((k.to_string(), v));
            }
        }
        let get = |key: &str| kv.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());

        let mesh = match (get("mesh"), get("n")) {
            (Some(p), _) => MeshSource::File { path: p.to_string() },
            (None, n) => {
                let n: usize = n.map_or(Ok(1), |v| parse("n", v))?;
                if n == 0 {
                    return Err(ConfigError::Value {
                        key: "n".into(),
                        message: "must be at least 1".into(),
                    });
                }
                MeshSource::Cube { n }
            }
        };
        let r: Option<u32> = get("r").map(|v| parse("r", v)).transpose()?;
        if let Some(r) = r {
            if r > R_MAX {
                return Err(ConfigError::Value {
                    key: "r".into(),
                    message: format!("{r} exceeds the cap {R_MAX}"),
                });
            }
        }
        let lame_lambda: f64 = get("lambda").map_or(Ok(1.0), |v| parse("lambda", v))?;
        let lame_mu: f64 = get("mu").map_or(Ok(1.0), |v| parse("mu", v))?;
        Material::new(lame_lambda, lame_mu).map_err(|e| ConfigError::Value {
            key: "lambda/mu".into(),
            message: e.to_string(),
        })?;
        let levels: Option<usize> = get("levels").map(|v| parse("levels", v)).transpose()?;
        let seed: u64 = get("seed").map_or(Ok(0), |v| parse("seed", v))?;
        let tol_scale: f64 = get("tol-scale").map_or(Ok(1.0), |v| parse("tol-scale", v))?;
        if !(tol_scale > 0.0 && tol_scale.is_finite()) {
            return Err(ConfigError::Value {
                key: "tol-scale".into(),
                message: format!("must be positive, got {tol_scale}"),
            });
        }
        let orders = get("orders").map(str::to_string);
        let mut cfg = Self {
            mesh,
            policy: String::new(),
            lame_lambda,
            lame_mu,
            levels,
            seed,
            tol_scale,
            out: PathBuf::from(get("out").unwrap_or("afw3d-out")),
            orders,
            r,
        };
        // Validates the order list early; the label needs the mesh only for file orders.
        cfg.policy = match cfg.explicit_policy()? {
            Some(p) => p.label(),
            None => "file".into(),
        };
        Ok(cfg)
    }

    pub fn material(&self) -> Material {
        Material {
            lame_lambda: self.lame_lambda,
            lame_mu: self.lame_mu,
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances::default().scaled(self.tol_scale)
    }

    /// Order policy given by flags or file keys; `None` defers to orders stored in the mesh file.
    fn explicit_policy(&self) -> Result<Option<OrderPolicy>, ConfigError> {
        if let Some(spec) = &self.orders {
            return parse_orders(spec, self.seed).map(Some);
        }
        if let Some(r) = self.r {
            return Ok(Some(OrderPolicy::Uniform(r)));
        }
        match self.mesh {
            MeshSource::Cube { .. } => Ok(Some(OrderPolicy::Uniform(0))),
            MeshSource::File { .. } => Ok(None),
        }
    }

    /// Base mesh and the order policy on it.
    pub fn load(&self) -> Result<(SimplicialMesh, OrderPolicy), ConfigError> {
        let (mesh, file_orders) = match &self.mesh {
            MeshSource::Cube { n } => (unit_cube_mesh(*n), None),
            MeshSource::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Mesh(format!("{path}: {e}")))?;
                read_mesh(&text).map_err(|e| ConfigError::Mesh(format!("{path}: {e}")))?
            }
        };
        let policy = match self.explicit_policy()? {
            Some(p) => p,
            None => OrderPolicy::PerTet(file_orders.unwrap_or_else(|| vec![0; mesh.num_tets()])),
        };
        self.orders_on(&mesh, &policy)?;
        Ok((mesh, policy))
    }

    pub fn orders_on(&self, mesh: &SimplicialMesh, policy: &OrderPolicy) -> Result<OrderMap, ConfigError> {
        policy.orders_for(mesh).map_err(|e| ConfigError::Orders(e.to_string()))
    }
}

/// Parses `mixed`, `random:LO-HI` or a comma-separated per-tet list.
pub fn parse_orders(spec: &str, seed: u64) -> Result<OrderPolicy, ConfigError> {
    let spec = spec.trim();
    if spec == "mixed" {
        return Ok(OrderPolicy::Mixed);
    }
    if let Some(range) = spec.strip_prefix("random:") {
        let bad = || ConfigError::Orders(format!("order range '{range}' must look like LO-HI"));
        let (lo, hi) = range.split_once('-').ok_or_else(bad)?;
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi || hi > R_MAX {
            return Err(ConfigError::Orders(format!("order range {lo}-{hi} must satisfy LO <= HI <= {R_MAX}")));
        }
        return Ok(OrderPolicy::Random { lo, hi, seed });
    }
    let mut list = Vec::new();
    for (t, tok) in spec.split(',').enumerate() {
        let tok = tok.trim();
        let r: u32 = tok
            .parse()
            .map_err(|_| ConfigError::Orders(format!("tet {t}: '{tok}' is not a nonnegative integer order")))?;
        if r > R_MAX {
            return Err(ConfigError::Orders(format!("tet {t}: order {r} exceeds the cap {R_MAX}")));
        }
        list.push(r);
    }
    Ok(OrderPolicy::PerTet(list))
}
