use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use dynbc_core::analysis::DecayObservable;
use dynbc_core::dynamics::{Bump, InitialKind, LateralBc, Scheme, SchemeConfig, TopBc};
use dynbc_core::grid::HalfPlaneGrid;
use dynbc_core::potential::{DoubleWellPotential, DEFAULT_DELTA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Steady,
    Evolve,
    LinearDecay,
    Spectral,
    Envelope,
    Energy,
    Convergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub out: Option<PathBuf>,
    pub grid: GridSpec,
    pub potential: PotentialSpec,
    pub scheme: SchemeSpec,
    pub steady: SteadySpec,
    pub evolve: EvolveSpec,
    pub linear: LinearSpec,
    pub spectral: SpectralSpec,
    pub envelope: EnvelopeSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Steady,
            out: None,
            grid: GridSpec::default(),
            potential: PotentialSpec::default(),
            scheme: SchemeSpec::default(),
            steady: SteadySpec::default(),
            evolve: EvolveSpec::default(),
            linear: LinearSpec::default(),
            spectral: SpectralSpec::default(),
            envelope: EnvelopeSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        let g = HalfPlaneGrid::desk_default();
        Self {
            lx: g.lx(),
            ly: g.ly(),
            nx: g.nx(),
            ny: g.ny(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKindSpec {
    Cosine,
    Quartic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKindSpec,
    pub path: Option<PathBuf>,
    pub delta: f64,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self {
            kind: PotentialKindSpec::Cosine,
            path: None,
            delta: DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSpec {
    pub kind: Scheme,
    pub dt: f64,
    pub bc_x: LateralBc,
    pub bc_top: TopBc,
}

impl Default for SchemeSpec {
    fn default() -> Self {
        Self {
            kind: Scheme::SemiImplicit,
            dt: 0.1,
            bc_x: LateralBc::ClampToProfile,
            bc_top: TopBc::ClampToProfile,
        }
    }
}

impl SchemeSpec {
    pub fn config(&self) -> SchemeConfig {
        SchemeConfig::new(self.dt, self.kind).with_bc(self.bc_x, self.bc_top)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadySpec {
    pub tol: f64,
    /// Pass threshold for the trace discrepancy against the closed form.
    pub threshold: f64,
}

impl Default for SteadySpec {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            threshold: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSpec {
    pub t_end: f64,
    pub record_every: f64,
    pub initial: InitialKind,
    /// Write a snapshot every this many records; 0 disables snapshots.
    pub snapshot_stride: usize,
    /// Pass threshold on the final sup distance (convergence experiment).
    pub eps_threshold: f64,
}

impl Default for EvolveSpec {
    fn default() -> Self {
        Self {
            t_end: 200.0,
            record_every: 2.0,
            initial: InitialKind::ShiftedPerturbed {
                xi: 2.0,
                bump: Bump::default(),
            },
            snapshot_stride: 10,
            eps_threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearData {
    /// Smooth plateau on the surface and in a thin bulk layer.
    Plateau,
    /// Bulk-only plateau vanishing on the boundary.
    Bulk,
    /// Surface trace `(1 + x^2)^{-1/2}` with a smooth cutoff.
    SlowTail,
    /// Narrow surface bump.
    Compact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSpec {
    pub mu: f64,
    pub t_end: f64,
    pub data: LinearData,
    pub half_width: f64,
    pub observable: DecayObservable,
    pub expected_exponent: f64,
    pub tolerance: f64,
}

impl Default for LinearSpec {
    fn default() -> Self {
        Self {
            mu: 1.0,
            t_end: 100.0,
            data: LinearData::Plateau,
            half_width: 40.0,
            observable: DecayObservable::TraceSup,
            expected_exponent: -1.5,
            tolerance: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSpec {
    pub mu: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub count: usize,
    /// Times at which the boundary kernel is tabulated.
    pub kernel_times: Vec<f64>,
    pub kernel_x_max: f64,
    pub kernel_points: usize,
}

impl Default for SpectralSpec {
    fn default() -> Self {
        Self {
            mu: 1.0,
            eta_min: 0.0,
            eta_max: 4.0,
            count: 41,
            kernel_times: vec![1.0, 10.0],
            kernel_x_max: 20.0,
            kernel_points: 81,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeSpec {
    pub c: f64,
    /// Explicit front speed; computed from the measured constants when absent.
    pub m: Option<f64>,
    pub t_min: f64,
    pub threshold: f64,
}

impl Default for EnvelopeSpec {
    fn default() -> Self {
        Self {
            c: 1.0,
            m: None,
            t_min: 1.0,
            threshold: 1e-2,
        }
    }
}

/// Parses `KEY=VAL` with a dotted key; the value is read as TOML, or as a
/// bare string when that fails.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form KEY=VAL"))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key `{key}` has an empty segment");
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override key `{key}`: `{part}` is not a section"))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

pub fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse(&text, overrides).with_context(|| format!("invalid config {}", path.display()))
}

pub fn parse(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table: toml::Table = text.parse()?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: ExperimentConfig = toml::Value::Table(table).try_into()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<HalfPlaneGrid> {
        let g = self.grid;
        HalfPlaneGrid::new(g.lx, g.ly, g.nx, g.ny).map_err(|e| anyhow!("field `grid`: {e}"))
    }

    pub fn potential(&self) -> Result<DoubleWellPotential> {
        match self.potential.kind {
            PotentialKindSpec::Cosine => Ok(DoubleWellPotential::cosine()),
            PotentialKindSpec::Quartic => {
                DoubleWellPotential::quartic_tabulated(601).map_err(|e| anyhow!("field `potential.kind`: {e}"))
            }
            PotentialKindSpec::Csv => {
                let path = self
                    .potential
                    .path
                    .as_ref()
                    .ok_or_else(|| anyhow!("field `potential.path`: required for kind = \"csv\""))?;
                if !path.exists() {
                    bail!("field `potential.path`: file not found: {}", path.display());
                }
                DoubleWellPotential::from_csv(path).map_err(|e| anyhow!("field `potential.path`: {e}"))
            }
        }
    }

    /// Range and consistency checks; each message names the offending field.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let grid = match self.grid() {
            Ok(g) => Some(g),
            Err(e) => {
                out.push(e.to_string());
                None
            }
        };
        let potential = match self.potential() {
            Ok(p) => Some(p),
            Err(e) => {
                out.push(e.to_string());
                None
            }
        };
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("field `{name}`: must be positive and finite, got {v}"));
            }
        };
        positive("scheme.dt", self.scheme.dt);
        positive("steady.tol", self.steady.tol);
        positive("evolve.t_end", self.evolve.t_end);
        positive("evolve.record_every", self.evolve.record_every);
        positive("linear.mu", self.linear.mu);
        positive("linear.t_end", self.linear.t_end);
        positive("linear.half_width", self.linear.half_width);
        positive("spectral.mu", self.spectral.mu);
        positive("envelope.c", self.envelope.c);
        positive("envelope.t_min", self.envelope.t_min);
        if !(self.potential.delta > 0.0 && self.potential.delta < 1.0) {
            out.push(format!("field `potential.delta`: must lie in (0, 1), got {}", self.potential.delta));
        }
        if let Some(m) = self.envelope.m {
            if !(m >= 0.0 && m.is_finite()) {
                out.push(format!("field `envelope.m`: must be nonnegative, got {m}"));
            }
        }
        if self.spectral.count < 2 || !(self.spectral.eta_max > self.spectral.eta_min && self.spectral.eta_min >= 0.0) {
            out.push("field `spectral`: need count >= 2 and 0 <= eta_min < eta_max".into());
        }
        if self.spectral.kernel_times.iter().any(|t| !(*t > 0.0)) {
            out.push("field `spectral.kernel_times`: times must be positive".into());
        }
        let bump = match self.evolve.initial {
            InitialKind::Perturbed { bump } | InitialKind::ShiftedPerturbed { bump, .. } => Some(bump),
            InitialKind::Shifted { .. } => None,
        };
        if let Some(b) = bump {
            if !(b.amplitude >= 0.0 && b.amplitude < 1.0) {
                out.push(format!("field `evolve.initial.bump.amplitude`: must lie in [0, 1), got {}", b.amplitude));
            }
        }
        let dynamic = !matches!(self.experiment, Experiment::Steady | Experiment::Spectral);
        if let (Some(g), Some(p), true) = (grid, potential.as_ref(), dynamic) {
            let slope = if self.experiment == Experiment::LinearDecay {
                self.linear.mu
            } else {
                p.max_curvature()
            };
            if let Err(e) = self.scheme.config().validate(&g, slope) {
                out.push(format!("field `scheme.dt`: {e}"));
            }
        }
        out
    }
}
