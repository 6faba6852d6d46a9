//! Command-line front end.
//!
//! Every subcommand writes its primary output to `--out` (or stdout) and
//! exits with 0 on success, 2 on invalid configuration and 3 when the
//! numerics fail.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

use crate::analysis::{self, BZGrid, Tolerances};
use crate::bloch::{self, Momentum};
use crate::error::{Error, Result};
use crate::io::{self, pair};
use crate::lattice::{LatticeModel, ModelKind, Params};
use crate::phase::Phase;
use crate::realspace::{self, Boundary, Cell, RealLattice};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "flatband",
    version,
    about = "Flat bands and exceptional points in non-Hermitian three-sublattice lattices"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Built-in model: lieb-original, lieb-extended, tasaki, dice, kagome-modified.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Model JSON file (instead of --model and the parameter flags).
    #[arg(long, global = true)]
    pub model_file: Option<PathBuf>,
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    #[arg(long = "J", visible_alias = "j", global = true)]
    pub j: Option<f64>,
    /// Peierls phase in radians or as a fraction of pi ("pi/3", "2pi/3").
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub phi: Option<String>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Set gamma = J sin(phi).
    #[arg(long, global = true)]
    pub flatband: bool,
    #[arg(long, num_args = 2, value_names = ["NX", "NY"], global = true)]
    pub grid: Option<Vec<usize>>,
    #[arg(long, num_args = 2, value_names = ["M", "N"], global = true)]
    pub cells: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub boundary: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Worker threads for Brillouin-zone scans (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long = "tol-E", visible_alias = "tol-e", global = true)]
    pub tol_e: Option<f64>,
    #[arg(long = "cond-ep", global = true)]
    pub cond_ep: Option<f64>,
    #[arg(long = "tol-flat", global = true)]
    pub tol_flat: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Band surfaces over the Brillouin zone (CSV) plus a flatness summary (JSON).
    Spectrum,
    /// Intersection taxonomy of the flat band.
    Classify,
    /// Flat-band report.
    Flatness,
    /// Compact localized state on a finite lattice.
    Cls {
        /// Chiral state spread over the cells sharing one B site.
        #[arg(long)]
        three: bool,
        /// Anchor cell.
        #[arg(long, num_args = 2, value_names = ["M", "N"])]
        cell: Option<Vec<usize>>,
        /// Also write the state vector as JSON.
        #[arg(long)]
        state_out: Option<PathBuf>,
    },
    /// Time evolution on a finite lattice (trace CSV).
    Evolve {
        /// cls-single | cls-three | file:<path>
        #[arg(long, default_value = "cls-three")]
        init: String,
        #[arg(long, num_args = 2, value_names = ["M", "N"])]
        cell: Option<Vec<usize>>,
        #[arg(long = "t", default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Write every n-th time step.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Final state as JSON.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Time-reversal and chiral symmetry checks on sampled momenta.
    Symmetry {
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Real-space versus Bloch spectrum on a periodic lattice.
    Oracle {
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Print the model as JSON.
    Model,
}

/// Everything resolved from the flags.
pub struct RunConfig {
    pub model: LatticeModel,
    pub grid: BZGrid,
    pub cells: (usize, usize),
    pub boundary: Boundary,
    pub tolerances: Tolerances,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn pair_arg(v: &Option<Vec<usize>>, default: (usize, usize)) -> (usize, usize) {
    v.as_ref().map(|v| (v[0], v[1])).unwrap_or(default)
}

impl RunConfig {
    pub fn from_global(g: &Global) -> Result<RunConfig> {
        let model = match (&g.model, &g.model_file) {
            (Some(_), Some(_)) => return Err(config_err("give either --model or --model-file, not both")),
            (_, Some(path)) => {
                if g.kappa.is_some() || g.j.is_some() || g.phi.is_some() || g.gamma.is_some() || g.flatband {
                    return Err(config_err("parameter flags cannot be combined with --model-file"));
                }
                LatticeModel::from_json(&std::fs::read_to_string(path)?)?
            }
            (name, None) => {
                let kind: ModelKind = name.as_deref().unwrap_or("lieb-extended").parse()?;
                let phi: Phase = g.phi.as_deref().unwrap_or("0").parse()?;
                let j = g.j.unwrap_or(0.0);
                let gamma = match (g.flatband, g.gamma) {
                    (true, Some(_)) => return Err(config_err("--flatband sets gamma; do not pass --gamma too")),
                    (true, None) => j * phi.sin(),
                    (false, gamma) => gamma.unwrap_or(0.0),
                };
                kind.build(Params::new(g.kappa.unwrap_or(1.0), j, phi, gamma)?)?
            }
        };
        let (nx, ny) = pair_arg(&g.grid, (64, 64));
        let tolerances = Tolerances {
            tol_e: g.tol_e.unwrap_or(Tolerances::default().tol_e),
            cond_ep: g.cond_ep.unwrap_or(Tolerances::default().cond_ep),
            flat: g.tol_flat.unwrap_or(Tolerances::default().flat),
        };
        tolerances.validate()?;
        Ok(RunConfig {
            model,
            grid: BZGrid::new(nx, ny)?,
            cells: pair_arg(&g.cells, (8, 8)),
            boundary: g.boundary.as_deref().unwrap_or("open").parse()?,
            tolerances,
            format: g.format,
            out: g.out.clone(),
            seed: g.seed.unwrap_or(0),
        })
    }

    fn lattice(&self) -> Result<RealLattice> {
        realspace::assemble(&self.model, self.cells.0, self.cells.1, self.boundary)
    }

    fn model_json(&self) -> serde_json::Value {
        let p = &self.model.params;
        json!({
            "name": self.model.name,
            "params": {"kappa": p.kappa, "J": p.j, "phi": p.phi.radians(), "phi_text": p.phi.to_string(), "gamma": p.gamma},
        })
    }

    fn only_json(&self, cmd: &str) -> Result<()> {
        if self.format == Some(Format::Csv) {
            return Err(config_err(format!("{cmd} writes JSON only")));
        }
        Ok(())
    }
}

/// Primary output: `--out` when given, else stdout. Secondary output (a
/// summary next to a CSV) goes to stdout when the primary is a file and to
/// stderr otherwise.
struct Outputs<'a> {
    file: Option<BufWriter<File>>,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl<'a> Outputs<'a> {
    fn new(out: &Option<PathBuf>, stdout: &'a mut dyn Write, stderr: &'a mut dyn Write) -> Result<Outputs<'a>> {
        let file = out.as_ref().map(File::create).transpose()?.map(BufWriter::new);
        Ok(Outputs { file, stdout, stderr })
    }

    fn primary(&mut self) -> &mut dyn Write {
        match self.file.as_mut() {
            Some(f) => f,
            None => self.stdout,
        }
    }

    fn secondary(&mut self) -> &mut dyn Write {
        if self.file.is_some() {
            self.stdout
        } else {
            self.stderr
        }
    }

    fn finish(mut self) -> Result<()> {
        if let Some(f) = self.file.as_mut() {
            f.flush()?;
        }
        self.stdout.flush()?;
        Ok(())
    }
}

fn cell_arg(v: &Option<Vec<usize>>) -> Cell {
    pair_arg(v, (0, 0))
}

fn flatness_json(r: &analysis::FlatBandReport, tol_flat: f64) -> serde_json::Value {
    json!({
        "candidate_energy": pair(r.candidate_energy),
        "max_deviation": r.max_deviation,
        "condition_residual": r.condition_residual,
        "is_flat": r.is_flat,
        "tol_flat": tol_flat,
    })
}

fn cls_json(cfg: &RunConfig, lattice: &RealLattice, state: &realspace::CLSState, kind: &str, cells: &[Cell]) -> serde_json::Value {
    let sites: Vec<serde_json::Value> = state
        .support
        .iter()
        .map(|&i| {
            let s = lattice.site(i);
            json!({"m": s.m, "n": s.n, "sublattice": io::sublattice_name(s.sublattice), "amp": pair(state.amplitudes[i])})
        })
        .collect();
    let mut v = json!({
        "model": cfg.model_json(),
        "lattice": {"cells": [lattice.m, lattice.n], "boundary": lattice.boundary.to_string()},
        "kind": kind,
        "cells": cells.iter().map(|c| [c.0, c.1]).collect::<Vec<_>>(),
        "energy": pair(state.energy),
        "residual": state.residual,
        "sites": sites,
    });
    if kind == "three" {
        v["psi_B1"] = json!(pair(realspace::b_amplitude(state, lattice, cells[0])));
    }
    v
}

fn build_cls(cfg: &RunConfig, lattice: &RealLattice, three: bool, anchor: Cell) -> Result<(realspace::CLSState, Vec<Cell>)> {
    if three {
        let cells = realspace::cls_cells(&cfg.model, anchor, lattice)?;
        Ok((realspace::make_cls_three(&cfg.model, &cells, lattice)?, cells))
    } else {
        Ok((realspace::make_cls_single(&cfg.model, anchor, lattice)?, vec![anchor]))
    }
}

/// Runs one parsed command line.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::from_global(&cli.global)?;
    let pool = match cli.global.threads {
        Some(0) => return Err(config_err("--threads must be at least 1")),
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| config_err(format!("cannot start thread pool: {e}")))?,
        ),
        None => None,
    };
    dispatch(&cli.command, &cfg, pool.as_ref(), stdout, stderr)
}

/// Runs `f` on `pool`, or on the global pool.
fn parallel<T: Send>(pool: Option<&rayon::ThreadPool>, f: impl FnOnce() -> T + Send) -> T {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn dispatch(
    cmd: &Command,
    cfg: &RunConfig,
    pool: Option<&rayon::ThreadPool>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    let mut out = Outputs::new(&cfg.out, stdout, stderr)?;
    match cmd {
        Command::Spectrum => {
            let surface = parallel(pool, || analysis::scan(&cfg.model, cfg.grid))?;
            let report = analysis::flatness_of(&cfg.model, &surface, cfg.tolerances.flat)?;
            let summary = json!({
                "model": cfg.model_json(),
                "grid": io::grid_json(&cfg.grid),
                "flatness": flatness_json(&report, cfg.tolerances.flat),
            });
            match cfg.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    io::write_band_csv(out.primary(), &surface)?;
                    io::write_json(out.secondary(), &summary)?;
                }
                Format::Json => {
                    let points: Vec<serde_json::Value> = surface
                        .iter()
                        .map(|(k, b)| json!({"k": [k.kx, k.ky], "energies": b.energies.map(pair)}))
                        .collect();
                    let mut v = summary;
                    v["points"] = json!(points);
                    io::write_json(out.primary(), &v)?;
                }
            }
        }
        Command::Classify => {
            cfg.only_json("classify")?;
            let c = parallel(pool, || analysis::classify(&cfg.model, cfg.grid, &cfg.tolerances))?;
            io::write_json(out.primary(), &io::classification_json(&c))?;
        }
        Command::Flatness => {
            cfg.only_json("flatness")?;
            let r = parallel(pool, || analysis::flatness(&cfg.model, cfg.grid, cfg.tolerances.flat))?;
            let mut v = flatness_json(&r, cfg.tolerances.flat);
            v["model"] = cfg.model_json();
            v["grid"] = io::grid_json(&cfg.grid);
            io::write_json(out.primary(), &v)?;
        }
        Command::Cls { three, cell, state_out } => {
            cfg.only_json("cls")?;
            let lattice = cfg.lattice()?;
            let (state, cells) = build_cls(cfg, &lattice, *three, cell_arg(cell))?;
            let kind = if *three { "three" } else { "single" };
            io::write_json(out.primary(), &cls_json(cfg, &lattice, &state, kind, &cells))?;
            if let Some(path) = state_out {
                std::fs::write(path, io::state_to_json(&state.amplitudes) + "\n")?;
            }
        }
        Command::Evolve {
            init,
            cell,
            t_end,
            dt,
            stride,
            snapshot,
        } => {
            let lattice = cfg.lattice()?;
            let (psi0, support) = match init.as_str() {
                "cls-single" | "cls-three" => {
                    let (state, _) = build_cls(cfg, &lattice, init == "cls-three", cell_arg(cell))?;
                    (state.amplitudes, Some(state.support))
                }
                other => match other.strip_prefix("file:") {
                    Some(path) => (io::state_from_json(&std::fs::read_to_string(path)?)?, None),
                    None => return Err(config_err(format!("unknown --init '{other}' (cls-single|cls-three|file:<path>)"))),
                },
            };
            let trace = realspace::evolve(&lattice, &psi0, *t_end, *dt)?;
            let support: Vec<usize> = support.unwrap_or_else(|| (0..psi0.len()).filter(|&i| psi0[i] != Complex64::new(0.0, 0.0)).collect());
            let summary = json!({
                "model": cfg.model_json(),
                "lattice": {"cells": [lattice.m, lattice.n], "boundary": lattice.boundary.to_string()},
                "init": init,
                "t_end": t_end,
                "dt": dt,
                "steps": trace.times.len() - 1,
                "max_intensity_drift": trace.max_intensity_drift(),
                "max_off_support_intensity": trace.max_off_support(&support, *t_end),
                "initial_total_norm": trace.total_norm[0],
                "final_total_norm": trace.total_norm[trace.total_norm.len() - 1],
            });
            match cfg.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    io::write_trace_csv(out.primary(), &lattice, &trace, *stride)?;
                    io::write_json(out.secondary(), &summary)?;
                }
                Format::Json => io::write_json(out.primary(), &summary)?,
            }
            if let Some(path) = snapshot {
                std::fs::write(path, io::state_to_json(&trace.final_state) + "\n")?;
            }
        }
        Command::Symmetry { samples } => {
            cfg.only_json("symmetry")?;
            if *samples == 0 {
                return Err(config_err("--samples must be at least 1"));
            }
            let mut rng = StdRng::seed_from_u64(cfg.seed);
            let ks: Vec<Momentum> = (0..*samples)
                .map(|_| {
                    Momentum::new(
                        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                    )
                })
                .collect();
            let tr = bloch::time_reversal_residual(&cfg.model, &ks);
            let ch = bloch::chiral_residual(&cfg.model, &ks);
            let v = json!({
                "model": cfg.model_json(),
                "time_reversal": bloch::check_time_reversal(&cfg.model, &ks),
                "chiral": bloch::check_chiral(&cfg.model, &ks),
                "time_reversal_residual": tr,
                "chiral_residual": ch,
                "tolerance": bloch::SYMMETRY_TOL,
                "samples": samples,
                "seed": cfg.seed,
            });
            io::write_json(out.primary(), &v)?;
        }
        Command::Oracle { tol } => {
            cfg.only_json("oracle")?;
            let r = realspace::fourier_consistency(&cfg.model, cfg.cells.0, cfg.cells.1, *tol)?;
            let v = json!({
                "model": cfg.model_json(),
                "cells": [r.m, r.n],
                "max_distance": r.max_distance,
                "consistent": r.consistent,
                "tolerance": tol,
            });
            io::write_json(out.primary(), &v)?;
        }
        Command::Model => {
            cfg.only_json("model")?;
            let text = cfg.model.to_json()?;
            writeln!(out.primary(), "{text}")?;
        }
    }
    out.finish()
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_CONFIG
    }
}

/// Parses `args`, runs, reports errors on `stderr` and returns the exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    match run(&cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
