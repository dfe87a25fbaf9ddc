//! Command-line front end: JSON configs in, CSV/JSON artifacts plus a
//! manifest with SHA-256 digests out.

use crate::bands::{self, BlochK, RationalFlux};
use crate::classical::{self, ClassicalPotentialSpec, Frame, LabIntegrator, ManyBodyState};
use crate::dissipative::{self, InitialState, Interpolation};
use crate::error::{ensure, Error, Result};
use crate::grid::linspace;
use crate::interaction::{self, CustomPotential};
use crate::lattice::{self, ModelParams};
use crate::specfun::QuadratureSpec;
use crate::C64;
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Lattice,
    Bands,
    Butterfly,
    Chern,
    Eigq,
    Dissipate,
    Potential,
    Nbody,
    Crystal,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Lattice => "lattice",
            Command::Bands => "bands",
            Command::Butterfly => "butterfly",
            Command::Chern => "chern",
            Command::Eigq => "eigq",
            Command::Dissipate => "dissipate",
            Command::Potential => "potential",
            Command::Nbody => "nbody",
            Command::Crystal => "crystal",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "phasecrystal", version, about = "Kicked harmonic oscillators in phase-space lattices")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (falls back to PHASECRYSTAL_THREADS).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Replace existing outputs.
    #[arg(long)]
    pub overwrite: bool,
}

fn d_q0() -> u32 {
    4
}
fn d_one() -> f64 {
    1.0
}
fn d_three_body_k() -> f64 {
    -0.02 / PI
}
fn d_lattice_range() -> [f64; 2] {
    [-4.0 * PI, 4.0 * PI]
}
fn d_eigq_range() -> [f64; 2] {
    [-2.0 * PI, 2.0 * PI]
}
fn d_201() -> usize {
    201
}
fn d_101() -> usize {
    101
}
fn d_51() -> usize {
    51
}
fn d_q_max() -> u32 {
    12
}
fn d_samples() -> usize {
    8
}
fn d_chern_grid() -> usize {
    32
}
fn d_kicks() -> usize {
    3000
}
fn d_half_width() -> f64 {
    26.0
}
fn d_512() -> usize {
    512
}
fn d_true() -> bool {
    true
}
fn d_r_max() -> f64 {
    10.0
}
fn d_tolerance() -> f64 {
    1e-10
}
fn d_periods() -> usize {
    200
}
fn d_rwa_dt() -> f64 {
    classical::RWA_DT
}
fn d_rtol() -> f64 {
    1e-10
}
fn d_seven() -> usize {
    7
}
fn d_sigma() -> f64 {
    0.1
}
fn d_power() -> u32 {
    20
}
fn d_three_body_atoms() -> Vec<[f64; 2]> {
    let tp = 2.0 * PI;
    vec![[0.0, tp], [-tp, -tp], [tp, -tp]]
}
fn d_three_body_potential() -> PairPotential {
    PairPotential { kind: PairKind::Contact, eps: Some(0.194), a: None, sigma: 0.1, n: 20 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmd: Option<Command>,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(default = "d_q0")]
    pub q0: u32,
    #[serde(default = "d_one")]
    pub lambda: f64,
    #[serde(default = "d_lattice_range")]
    pub x_range: [f64; 2],
    #[serde(default = "d_lattice_range")]
    pub p_range: [f64; 2],
    #[serde(default = "d_201")]
    pub nx: usize,
    #[serde(default = "d_201")]
    pub np: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmd: Option<Command>,
    pub p: u32,
    pub q: u32,
    #[serde(rename = "K", default = "d_one")]
    pub k: f64,
    #[serde(default = "d_51")]
    pub nk: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ButterflyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmd: Option<Command>,
    #[serde(default = "d_q_max")]
    pub q_max: u32,
    #[serde(rename = "K", default = "d_one")]
    pub k: f64,
    #[serde(default = "d_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChernConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmd: Option<Command>,
    pub p: u32,
    pub q: u32,
    #[serde(rename = "K", default = "d_one")]
    pub k: f64,
    #[serde(default = "d_chern_grid")]
    pub grid: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigqConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmd: Option<Command>,
    pub p: u32,
    pub q: u32,
    #[serde(rename = "K", default = "d_one")]
    pub k: f64,
    #[serde(rename = "kX", default)]
    pub kx: f64,
    #[serde(rename = "kP", default)]
    pub kp: f64,
    #[serde(default)]
    pub band: usize,
    #[serde(default = "d_eigq_range")]
    pub x_range: [f64; 2],
    #[serde(default = "d_eigq_range")]
    pub p_range: [f64; 2],
    #[serde(default = "d_101")]
    pub nx: usize,
    #[serde(default = "d_101")]
    pub np: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmd: Option<Command>,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(default = "d_q0")]
    pub q0: u32,
    #[serde(default = "d_one")]
    pub lambda: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub n0: f64,
    #[serde(default = "d_kicks")]
    pub kicks: usize,
    /// Snapshot interval in kicks; 0 keeps only the final state.
    #[serde(default)]
    pub record_every: usize,
    #[serde(default = "d_half_width")]
    pub half_width: f64,
    #[serde(default = "d_512")]
    pub n: usize,
    /// Coherent initial state centre; the ground state when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<[f64; 2]>,
    #[serde(default)]
    pub interpolation: Interpolation,
    #[serde(default = "d_true")]
    pub write_char: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Contact,
    Hardcore,
    Gaussian,
    Table,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmd: Option<Command>,
    pub kind: PotentialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// CSV file of `x,V` rows (relative to the config file).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default = "d_one")]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default = "d_r_max")]
    pub r_max: f64,
    #[serde(default = "d_101")]
    pub r_points: usize,
    #[serde(default = "d_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Contact,
    Hardcore,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairPotential {
    pub kind: PairKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
    #[serde(default = "d_power")]
    pub n: u32,
}

impl PairPotential {
    fn lab(&self) -> Result<ClassicalPotentialSpec> {
        let spec = match self.kind {
            PairKind::Contact => ClassicalPotentialSpec::ContactSmoothed {
                eps: self.eps.ok_or_else(|| Error::Validation("contact potential needs eps".into()))?,
                sigma: self.sigma,
            },
            PairKind::Hardcore => ClassicalPotentialSpec::HardcorePowerLaw {
                a: self.a.ok_or_else(|| Error::Validation("hardcore potential needs a".into()))?,
                n: self.n,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NbodyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmd: Option<Command>,
    #[serde(rename = "K", default = "d_three_body_k")]
    pub k: f64,
    /// Initial `[X, P]` per atom.
    #[serde(default = "d_three_body_atoms")]
    pub atoms: Vec<[f64; 2]>,
    #[serde(default = "d_three_body_potential")]
    pub potential: PairPotential,
    #[serde(default = "d_periods")]
    pub periods: usize,
    #[serde(default = "d_rwa_dt")]
    pub dt: f64,
    #[serde(default = "d_true")]
    pub poincare: bool,
    #[serde(default = "d_rtol")]
    pub rtol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmd: Option<Command>,
    #[serde(rename = "K", default = "d_three_body_k")]
    pub k: f64,
    #[serde(default = "d_seven")]
    pub atoms: usize,
    #[serde(default = "d_three_body_potential")]
    pub potential: PairPotential,
    #[serde(default = "d_periods")]
    pub periods: usize,
}

/// A validated configuration for one subcommand.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum RunConfig {
    Lattice(LatticeConfig),
    Bands(BandsConfig),
    Butterfly(ButterflyConfig),
    Chern(ChernConfig),
    Eigq(EigqConfig),
    Dissipate(DissipateConfig),
    Potential(PotentialConfig),
    Nbody(NbodyConfig),
    Crystal(CrystalConfig),
}

impl RunConfig {
    pub fn command(&self) -> Command {
        match self {
            RunConfig::Lattice(_) => Command::Lattice,
            RunConfig::Bands(_) => Command::Bands,
            RunConfig::Butterfly(_) => Command::Butterfly,
            RunConfig::Chern(_) => Command::Chern,
            RunConfig::Eigq(_) => Command::Eigq,
            RunConfig::Dissipate(_) => Command::Dissipate,
            RunConfig::Potential(_) => Command::Potential,
            RunConfig::Nbody(_) => Command::Nbody,
            RunConfig::Crystal(_) => Command::Crystal,
        }
    }

    /// Checks every field against the preconditions of the module it feeds.
    pub fn validate(&self) -> Result<()> {
        match self {
            RunConfig::Lattice(c) => {
                ModelParams::new(c.k, c.q0, c.lambda)?;
                ensure(c.k != 0.0, || "K must be nonzero".into())?;
                ranges_ok(c.x_range, c.p_range, c.nx, c.np)
            }
            RunConfig::Bands(c) => {
                RationalFlux::new(c.p, c.q)?;
                ensure(c.nk >= 2, || "nk must be at least 2".into())
            }
            RunConfig::Butterfly(c) => {
                ensure(c.q_max >= 1, || "q_max must be at least 1".into())?;
                ensure(c.samples >= 2, || "samples must be at least 2".into())
            }
            RunConfig::Chern(c) => {
                RationalFlux::new(c.p, c.q)?;
                ensure(c.grid >= 4, || "grid must be at least 4".into())?;
                ensure(c.k != 0.0, || "K must be nonzero".into())
            }
            RunConfig::Eigq(c) => {
                let flux = RationalFlux::new(c.p, c.q)?;
                BlochK::new(&flux, c.kx, c.kp)?;
                ensure(c.band < c.q as usize, || format!("band {} out of range for q = {}", c.band, c.q))?;
                ranges_ok(c.x_range, c.p_range, c.nx, c.np)
            }
            RunConfig::Dissipate(c) => {
                ModelParams::new(c.k, c.q0, c.lambda)?.with_dissipation(c.kappa, c.n0)?;
                ensure(c.kicks >= 1, || "kicks must be at least 1".into())?;
                dissipative::CharGrid::zeros(c.half_width, c.n, c.lambda).map(|_| ())
            }
            RunConfig::Potential(c) => {
                ensure(c.lambda > 0.0, || format!("lambda must be positive, got {}", c.lambda))?;
                ensure(c.r_max >= 0.0 && c.r_points >= 2, || "need r_max >= 0 and r_points >= 2".into())?;
                ensure(c.tolerance > 0.0, || "tolerance must be positive".into())?;
                match c.kind {
                    PotentialKind::Contact => ensure(c.eps.is_some(), || "contact potential needs eps".into()),
                    PotentialKind::Hardcore => ensure(c.a.is_some_and(|a| a >= 0.0), || "hardcore potential needs a >= 0".into()),
                    PotentialKind::Gaussian => ensure(
                        c.amplitude.is_some() && c.width.is_some_and(|w| w > 0.0),
                        || "gaussian potential needs amplitude and width > 0".into(),
                    ),
                    PotentialKind::Table => ensure(c.table.is_some(), || "table potential needs a table file".into()),
                }
            }
            RunConfig::Nbody(c) => {
                ModelParams::new(c.k, 4, 1.0)?;
                ensure(!c.atoms.is_empty(), || "need at least one atom".into())?;
                ensure(c.dt > 0.0 && c.rtol > 0.0, || "dt and rtol must be positive".into())?;
                c.potential.lab().map(|_| ())
            }
            RunConfig::Crystal(c) => {
                ModelParams::new(c.k, 4, 1.0)?;
                ensure(c.k != 0.0, || "K must be nonzero".into())?;
                ensure(c.atoms >= 2, || "a chain needs at least two atoms".into())?;
                c.potential.lab().map(|_| ())
            }
        }
    }
}

fn ranges_ok(xr: [f64; 2], pr: [f64; 2], nx: usize, np: usize) -> Result<()> {
    ensure(xr[0] < xr[1] && pr[0] < pr[1], || "ranges must be increasing".into())?;
    ensure(nx >= 2 && np >= 2, || "need at least 2 points per axis".into())
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

fn typed<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(parse_error)
}

/// Parses and validates a JSON config. The `cmd` key, when present, must
/// agree with `command`; when `command` is `None` it selects the subcommand.
pub fn parse_config(text: &str, command: Option<Command>) -> Result<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(parse_error)?;
    ensure(value.is_object(), || "config must be a JSON object".into())?;
    let named = match value.get("cmd") {
        Some(v) => Some(
            serde_json::from_value::<Command>(v.clone())
                .map_err(|_| Error::Validation(format!("unknown cmd {v}")))?,
        ),
        None => None,
    };
    let cmd = match (named, command) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Validation(format!("config is for {} but {} was requested", a.name(), b.name())))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(Error::Validation("no subcommand given and config has no cmd".into())),
    };
    let cfg = match cmd {
        Command::Lattice => RunConfig::Lattice(typed(text)?),
        Command::Bands => RunConfig::Bands(typed(text)?),
        Command::Butterfly => RunConfig::Butterfly(typed(text)?),
        Command::Chern => RunConfig::Chern(typed(text)?),
        Command::Eigq => RunConfig::Eigq(typed(text)?),
        Command::Dissipate => RunConfig::Dissipate(typed(text)?),
        Command::Potential => RunConfig::Potential(typed(text)?),
        Command::Nbody => RunConfig::Nbody(typed(text)?),
        Command::Crystal => RunConfig::Crystal(typed(text)?),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub config: serde_json::Value,
    pub version: String,
    pub duration_seconds: f64,
    pub outputs: Vec<OutputDigest>,
    pub warnings: Vec<String>,
}

/// Why a run failed, with the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    Module(Error),
    OutputExists(PathBuf),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Module(Error::Validation(_) | Error::Parse { .. }) | Failure::OutputExists(_) => 2,
            Failure::Module(_) | Failure::Io(_) => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Failure::Module(e) => e.name(),
            Failure::OutputExists(_) => "OutputExists",
            Failure::Io(_) => "IoError",
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Module(e) => write!(f, "{e}"),
            Failure::OutputExists(p) => write!(f, "{} exists (use --overwrite)", p.display()),
            Failure::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Module(e)
    }
}

fn io(e: std::io::Error) -> Failure {
    Failure::Io(e.to_string())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes files into the output directory, remembering them for the
/// manifest or for cleanup.
struct Sink {
    dir: PathBuf,
    overwrite: bool,
    written: Vec<PathBuf>,
    digests: Vec<OutputDigest>,
}

impl Sink {
    fn write(&mut self, name: &str, bytes: &[u8]) -> std::result::Result<(), Failure> {
        let path = self.dir.join(name);
        if path.exists() && !self.overwrite {
            return Err(Failure::OutputExists(path));
        }
        std::fs::write(&path, bytes).map_err(io)?;
        self.written.push(path);
        self.digests.push(OutputDigest { file: name.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &str, body: String) -> std::result::Result<(), Failure> {
        let mut text = String::with_capacity(header.len() + body.len() + 1);
        text.push_str(header);
        text.push('\n');
        text.push_str(&body);
        self.write(name, text.as_bytes())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> std::result::Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn cleanup(&self) {
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
    }
}

/// Twelve significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

macro_rules! row {
    ($buf:expr, $($v:expr),+) => {{
        let cells: Vec<String> = vec![$($v),+];
        $buf.push_str(&cells.join(","));
        $buf.push('\n');
    }};
}

/// Runs a validated config, writing outputs and `manifest.json` into `out`.
/// On failure every file written by this run is removed.
pub fn run(cfg: &RunConfig, out: &Path, overwrite: bool, base: &Path) -> std::result::Result<RunManifest, Failure> {
    std::fs::create_dir_all(out).map_err(io)?;
    let manifest_path = out.join("manifest.json");
    if manifest_path.exists() && !overwrite {
        return Err(Failure::OutputExists(manifest_path));
    }
    let mut sink = Sink { dir: out.to_path_buf(), overwrite, written: Vec::new(), digests: Vec::new() };
    let start = Instant::now();
    let result = dispatch(cfg, &mut sink, base);
    let warnings = match result {
        Ok(w) => w,
        Err(e) => {
            sink.cleanup();
            return Err(e);
        }
    };
    let manifest = RunManifest {
        command: cfg.command(),
        config: serde_json::to_value(cfg).map_err(|e| Failure::Io(e.to_string()))?,
        version: env!("CARGO_PKG_VERSION").to_string(),
        duration_seconds: start.elapsed().as_secs_f64(),
        outputs: sink.digests.clone(),
        warnings,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Io(e.to_string()))? + "\n";
    if let Err(e) = std::fs::write(&manifest_path, text) {
        sink.cleanup();
        return Err(io(e));
    }
    Ok(manifest)
}

/// Recomputes the digests of a manifest's outputs; returns the mismatching files.
pub fn verify_manifest(dir: &Path, manifest: &RunManifest) -> Vec<String> {
    manifest
        .outputs
        .iter()
        .filter(|o| std::fs::read(dir.join(&o.file)).map(|b| sha256_hex(&b) != o.sha256).unwrap_or(true))
        .map(|o| o.file.clone())
        .collect()
}

fn dispatch(cfg: &RunConfig, sink: &mut Sink, base: &Path) -> std::result::Result<Vec<String>, Failure> {
    let mut warnings = Vec::new();
    match cfg {
        RunConfig::Lattice(c) => {
            let params = ModelParams::new(c.k, c.q0, c.lambda)?;
            let g = lattice::render_lattice(&params, (c.x_range[0], c.x_range[1]), (c.p_range[0], c.p_range[1]), c.nx, c.np)?;
            let mut body = String::new();
            for (i, &x) in g.xs.iter().enumerate() {
                for (j, &p) in g.ps.iter().enumerate() {
                    row!(body, fmt_num(x), fmt_num(p), fmt_num(g.get(i, j)));
                }
            }
            sink.csv("lattice.csv", "X,P,value", body)?;
        }
        RunConfig::Bands(c) => {
            let flux = RationalFlux::new(c.p, c.q)?;
            let spec = bands::band_surface(&flux, c.k, c.nk, c.nk)?;
            let mut body = String::new();
            for (i, &kx) in spec.kxs.iter().enumerate() {
                for (j, &kp) in spec.kps.iter().enumerate() {
                    for (b, &e) in spec.energies[i * spec.kps.len() + j].iter().enumerate() {
                        row!(body, fmt_num(kx), fmt_num(kp), b.to_string(), fmt_num(e));
                    }
                }
            }
            sink.csv("bands.csv", "kX,kP,b,E", body)?;
        }
        RunConfig::Butterfly(c) => {
            let entries = bands::butterfly(c.q_max, c.k, c.samples)?;
            let mut body = String::new();
            for e in &entries {
                for (b, &(lo, hi)) in e.bands.iter().enumerate() {
                    row!(body, e.p.to_string(), e.q.to_string(), fmt_num(e.lambda_over_2pi), b.to_string(), fmt_num(lo), fmt_num(hi));
                }
            }
            sink.csv("butterfly.csv", "p,q,lambda_over_2pi,band_index,E_min,E_max", body)?;
        }
        RunConfig::Chern(c) => {
            let flux = RationalFlux::new(c.p, c.q)?;
            let report = bands::chern_numbers(&flux, c.k, c.grid)?;
            let doc = serde_json::json!({
                "flux": { "p": report.p, "q": report.q },
                "grid": report.grid,
                "per_band": report.per_band,
                "gaps": report.gaps,
            });
            sink.json("chern.json", &doc)?;
        }
        RunConfig::Eigq(c) => {
            let flux = RationalFlux::new(c.p, c.q)?;
            let k = BlochK::new(&flux, c.kx, c.kp)?;
            let xs = linspace(c.x_range[0], c.x_range[1], c.nx);
            let ps = linspace(c.p_range[0], c.p_range[1], c.np);
            let g = bands::eigenstate_q_function(&flux, &k, c.band, c.k, xs, ps)?;
            let mut body = String::new();
            for (i, &x) in g.xs.iter().enumerate() {
                for (j, &p) in g.ps.iter().enumerate() {
                    row!(body, fmt_num(x), fmt_num(p), fmt_num(g.get(i, j)));
                }
            }
            sink.csv("eigq.csv", "X,P,Q", body)?;
        }
        RunConfig::Dissipate(c) => run_dissipate(c, sink, &mut warnings)?,
        RunConfig::Potential(c) => run_potential(c, sink, base, &mut warnings)?,
        RunConfig::Nbody(c) => run_nbody(c, sink)?,
        RunConfig::Crystal(c) => {
            let params = ModelParams::new(c.k, 4, 1.0)?;
            let pot = c.potential.lab()?.rwa_counterpart();
            let report = classical::crystal_run(c.atoms, &params, &pot, c.periods)?;
            sink.json("crystal.json", &report)?;
        }
    }
    Ok(warnings)
}

fn run_dissipate(c: &DissipateConfig, sink: &mut Sink, warnings: &mut Vec<String>) -> std::result::Result<(), Failure> {
    let params = ModelParams::new(c.k, c.q0, c.lambda)?.with_dissipation(c.kappa, c.n0)?;
    let kind = match c.initial {
        Some([x0, p0]) => InitialState::Coherent { x0, p0 },
        None => InitialState::Ground,
    };
    let mut g = dissipative::init_state(kind, c.half_width, c.n, c.lambda)?;
    let j_max = dissipative::kick_j_max(&params);
    let mut energy = String::new();
    let e = dissipative::mean_energy(&g);
    row!(energy, "0".to_string(), fmt_num(e.quadrature), fmt_num(e.number));
    let mut snapshots = vec![];
    if c.record_every > 0 {
        snapshots.push((0, g.clone()));
    }
    let mut worst_trace: f64 = 0.0;
    for kick in 1..=c.kicks {
        g = dissipative::kick_step(&dissipative::dissipative_step_with(&g, &params, c.interpolation), &params, j_max);
        worst_trace = worst_trace.max((g.trace() - 1.0).norm());
        let e = dissipative::mean_energy(&g);
        row!(energy, kick.to_string(), fmt_num(e.quadrature), fmt_num(e.number));
        if kick == c.kicks || (c.record_every > 0 && kick % c.record_every == 0) {
            snapshots.push((kick, g.clone()));
        }
    }
    sink.csv("energy.csv", "kick,Eq5_energy,number_energy", energy)?;
    for (kick, snap) in &snapshots {
        let q = dissipative::husimi_from_char(snap);
        let mut body = String::new();
        for (i, &x) in q.grid.xs.iter().enumerate() {
            for (j, &p) in q.grid.ps.iter().enumerate() {
                row!(body, fmt_num(x), fmt_num(p), fmt_num(q.grid.get(i, j)));
            }
        }
        sink.csv(&format!("q_{kick:06}.csv"), "X,P,Q", body)?;
        if c.write_char {
            let mut body = String::new();
            for i in 0..snap.n() {
                for j in 0..snap.n() {
                    let w = snap.at(i, j);
                    row!(body, fmt_num(snap.coord(i)), fmt_num(snap.coord(j)), fmt_num(w.re), fmt_num(w.im));
                }
            }
            sink.csv(&format!("w_{kick:06}.csv"), "s,k,Re(w),Im(w)", body)?;
        }
    }
    if worst_trace > 1e-9 {
        warnings.push(format!("trace drifted by {worst_trace:.3e}"));
    }
    let boundary = g.boundary_magnitude();
    if boundary > dissipative::BOUNDARY_TOL {
        warnings.push(format!("final state reaches the grid boundary (|w| = {boundary:.3e}); increase half_width"));
    }
    if (g.lambda() / g.spacing() - (c.lambda * c.n as f64 / (2.0 * c.half_width))).abs() > 1e-9 {
        warnings.push(format!("grid spacing adjusted to {} so that lambda/h is an integer", fmt_num(g.spacing())));
    }
    Ok(())
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<(f64, f64)> = match cells.as_slice() {
            [x, v] => x.parse().ok().zip(v.parse().ok()),
            _ => None,
        };
        match parsed {
            Some((x, v)) => {
                xs.push(x);
                vs.push(v);
            }
            // a non-numeric first line is a header
            None if xs.is_empty() && n == 0 => {}
            None => return Err(Error::Parse { line: n + 1, column: 1, message: format!("expected `x,V`, got `{line}`") }),
        }
    }
    Ok((xs, vs))
}

fn run_potential(c: &PotentialConfig, sink: &mut Sink, base: &Path, warnings: &mut Vec<String>) -> std::result::Result<(), Failure> {
    let lambda = c.lambda;
    let n_max = c.n_max.unwrap_or_else(|| interaction::series_n_max(c.r_max, lambda));
    let table = match c.kind {
        PotentialKind::Contact => interaction::contact_table(c.eps.unwrap_or(0.0), lambda, n_max),
        PotentialKind::Hardcore => {
            let a = c.a.unwrap_or(0.0);
            if let Some(w) = interaction::hardcore_validity_warning(a, lambda) {
                warnings.push(w);
            }
            interaction::hardcore_table(a, lambda, n_max)
        }
        PotentialKind::Gaussian | PotentialKind::Table => {
            let pot = if c.kind == PotentialKind::Gaussian {
                CustomPotential::gaussian(c.amplitude.unwrap_or(0.0), c.width.unwrap_or(1.0))
            } else {
                let path = c.table.as_ref().map(|p| base.join(p)).unwrap_or_default();
                let (xs, vs) = read_table(&path)?;
                CustomPotential::tabulated(xs, vs)?
            };
            let half = ((4.0 * n_max as f64 + 2.0).sqrt() + 12.0) / lambda.sqrt();
            let quad = QuadratureSpec::new(half, c.tolerance, 40)?;
            interaction::u_general(&pot, lambda, n_max, &quad)?
        }
    };
    let mut body = String::new();
    for (n, rn, u) in table.rows() {
        row!(body, n.to_string(), fmt_num(rn), fmt_num(u));
    }
    sink.csv("table.csv", "N,R_N,U_N", body)?;
    let mut body = String::new();
    for r in linspace(0.0, c.r_max, c.r_points) {
        let (uc, ue) = table.uc_ue(r)?;
        row!(body, fmt_num(r), fmt_num(uc), fmt_num(ue));
    }
    sink.csv("uc_ue.csv", "R,U_c,U_e", body)?;
    Ok(())
}

fn run_nbody(c: &NbodyConfig, sink: &mut Sink) -> std::result::Result<(), Failure> {
    let params = ModelParams::new(c.k, 4, 1.0)?;
    let lab = c.potential.lab()?;
    let rwa = lab.rwa_counterpart();
    let z0: Vec<C64> = c.atoms.iter().map(|a| C64::new(a[0], a[1])).collect();
    let steps_per_period = ((2.0 * PI / c.dt).round() as usize).max(1);
    let dt = 2.0 * PI / steps_per_period as f64;
    let traj = classical::rwa_evolve(
        &ManyBodyState::new(z0.clone(), Frame::Rotating)?,
        &params,
        &rwa,
        2.0 * PI * c.periods as f64,
        dt,
        steps_per_period,
    )?;
    let mut body = String::new();
    let mut lin = String::new();
    for st in &traj.states {
        let l = classical::linear_solution(&z0, &params, &rwa, st.t);
        for (i, z) in st.z.iter().enumerate() {
            row!(body, fmt_num(st.t), i.to_string(), fmt_num(z.re), fmt_num(z.im));
            row!(lin, fmt_num(st.t), i.to_string(), fmt_num(l[i].re), fmt_num(l[i].im));
        }
    }
    sink.csv("rwa.csv", "t,atom,X,P", body)?;
    sink.csv("linear.csv", "t,atom,X,P", lin)?;
    if c.poincare {
        let opts = LabIntegrator { rtol: c.rtol, ..LabIntegrator::default() };
        let samples = classical::poincare_evolve(&ManyBodyState::new(z0, Frame::Lab)?, &params, &lab, c.periods, &opts)?;
        let mut body = String::new();
        for (m, st) in samples.iter().enumerate() {
            for (i, z) in st.z.iter().enumerate() {
                row!(body, m.to_string(), i.to_string(), fmt_num(z.re), fmt_num(z.im));
            }
        }
        sink.csv("poincare.csv", "period,atom,x,p", body)?;
    }
    Ok(())
}

fn thread_count(flag: Option<usize>) -> std::result::Result<Option<usize>, Failure> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("PHASECRYSTAL_THREADS") {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                Failure::Module(Error::Validation(format!("PHASECRYSTAL_THREADS must be a positive integer, got `{v}`")))
            })?),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(Failure::Module(Error::Validation("thread count must be at least 1".into())));
    }
    Ok(n)
}

/// Parses the process arguments, runs, and returns the exit status.
pub fn main_entry() -> i32 {
    let args = Args::parse();
    match execute(&args) {
        Ok(m) => {
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}: wrote {} file(s) to {}", m.command.name(), m.outputs.len() + 1, args.out.display());
            0
        }
        Err(f) => {
            eprintln!("error: {}: {f}", f.name());
            f.exit_code()
        }
    }
}

pub fn execute(args: &Args) -> std::result::Result<RunManifest, Failure> {
    let threads = thread_count(args.threads)?;
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Module(Error::Validation(format!("cannot read {}: {e}", args.config.display()))))?;
    let cfg = parse_config(&text, Some(args.command))?;
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    run(&cfg, &args.out, args.overwrite, &base)
}
