//! Command-line front end: reproducible experiments over the conformal
//! maps, moment quadrature, lattice aggregation models and shape metrics.
//!
//! Exit codes: 0 success, 2 usage/validation error, 3 step-cap truncation
//! (partial output retained with a `"truncated":true` header flag).
//! All outputs are written atomically (temp file + rename), and every
//! command is deterministic given its full flag set.

use clap::{Parser, Subcommand, ValueEnum};
use heleshaw::defaults;
use heleshaw::lattice::{
    self, BoundaryCondition, LatticeCluster, ModelKind, RotorInit, SimOptions,
};
use heleshaw::maps::{boundary_sample, write_boundary_csv, ConformalMap};
use heleshaw::moments::{
    moment_report_json, moment_suite, moment_suite_p, write_moment_csv, QuadratureGrid,
};
use heleshaw::shape::{
    canonical_rotation, compare_shapes, normalize_cluster, normalize_map_region,
    write_svg_overlay,
};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "heleshaw",
    version,
    about = "Hele-Shaw flow regions, harmonic moments, and lattice aggregation models",
    after_help = "Defaults for grids, tolerances and caps are listed per flag; \
                  see README.md for the full defaults table and file formats."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
    /// Cap the rayon worker count (also via the HELESHAW_THREADS variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MapArg {
    /// Killing on the negative half-axis (b = 1, closed form).
    Negaxis,
    /// Killing on the sides of an angle (hypergeometric; needs --b).
    Angle,
    /// Half-plane killing (b = 1/2, closed form).
    Halfplane,
    /// Doubled killing-reflecting map (b = 2, cut disk).
    Doubled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Idla,
    Rotor,
    Sandpile,
    Kpr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BcArg {
    /// Free aggregation, no boundary rule.
    None,
    /// Killing on the negative half-axis.
    Negaxis,
    /// Killing on the vertical axis, growth in the half-plane (b = 1/2).
    Halfplane,
    /// Killing outside the quarter plane (b = 1/4).
    Quarterplane,
    /// Reflect above / kill below the positive half-axis.
    Reflect,
    /// Killing-passing-reflecting with probability --p.
    Kpr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RotorInitArg {
    AllNorth,
    MirrorAxis,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a region boundary as CSV rows `theta,x,y`.
    Boundary {
        #[arg(long, value_enum)]
        map: MapArg,
        /// Angle parameter (required for --map angle; 0 < b ≤ 1).
        #[arg(long)]
        b: Option<f64>,
        /// Arc sample count.
        #[arg(long, default_value_t = defaults::BOUNDARY_SAMPLES)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Harmonic-moment table of a region (CSV, optional JSON report).
    Moments {
        #[arg(long, value_enum)]
        map: MapArg,
        #[arg(long)]
        b: Option<f64>,
        /// Largest n in the exponent family.
        #[arg(long, default_value_t = 3)]
        nmax: usize,
        /// Pass probability: use the n ± arccos(p)/2π exponent family.
        #[arg(long)]
        p: Option<f64>,
        /// Quadrature nodes per direction (doubled once for the error
        /// estimate).
        #[arg(long, default_value_t = defaults::MOMENT_GRID)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write a JSON report object.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run an aggregation model and write the cluster file.
    Simulate {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long, value_enum, default_value_t = BcArg::None)]
        bc: BcArg,
        /// Surviving-particle count (walk models).
        #[arg(long = "N", default_value_t = 10_000)]
        n: usize,
        /// Injected mass (sandpile).
        #[arg(long, default_value_t = 1000.0)]
        mass: f64,
        /// Pass probability for kpr.
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = defaults::STEP_CAP)]
        step_cap: u64,
        /// Sandpile termination threshold.
        #[arg(long, default_value_t = defaults::EPS_TOPPLE)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = RotorInitArg::AllNorth)]
        rotor_init: RotorInitArg,
        #[arg(long)]
        out: PathBuf,
        /// Also write a PBM raster of the cluster.
        #[arg(long)]
        pbm: Option<PathBuf>,
    },
    /// Compare a cluster file against an analytic region (JSON report).
    Compare {
        #[arg(long)]
        cluster: PathBuf,
        #[arg(long, value_enum)]
        map: MapArg,
        #[arg(long)]
        b: Option<f64>,
        /// Boundary samples for the analytic region.
        #[arg(long, default_value_t = 2048)]
        n_boundary: usize,
        /// Rotate the cluster by 180° (for comparisons against sources
        /// that put the killing ray on the positive half-axis).
        #[arg(long, default_value_t = false)]
        mirror: bool,
        #[arg(long)]
        out: PathBuf,
        /// Optional SVG overlay of the two boundaries.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Emission-count scaling: mean emitted vs N and the fitted exponent.
    Beurling {
        /// Comma-separated list of N values (need ≥ 3 distinct).
        #[arg(long = "Ns", value_delimiter = ',', required = true)]
        ns: Vec<usize>,
        /// Independent seeds per N.
        #[arg(long, default_value_t = 5)]
        seeds: u32,
        #[arg(long, value_enum, default_value_t = BcArg::Negaxis)]
        bc: BcArg,
        /// Pass probability when --bc kpr.
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = defaults::STEP_CAP)]
        step_cap: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

struct CmdError {
    code: u8,
    msg: String,
}

impl CmdError {
    fn usage(msg: impl Into<String>) -> CmdError {
        CmdError { code: 2, msg: msg.into() }
    }
}

impl From<heleshaw::Error> for CmdError {
    fn from(e: heleshaw::Error) -> CmdError {
        let code = match &e {
            heleshaw::Error::InvalidParameter { .. }
            | heleshaw::Error::Domain { .. }
            | heleshaw::Error::MalformedCluster(_) => 2,
            heleshaw::Error::StepCapExceeded { .. } => 3,
            _ => 1,
        };
        CmdError { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> CmdError {
        CmdError { code: 1, msg: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("HELESHAW_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

/// Write through a temp file in the same directory, then rename.
fn write_atomic(
    path: &Path,
    write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), CmdError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut file = std::io::BufWriter::new(fs::File::create(&tmp)?);
        write(&mut file)?;
        file.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn build_map(map: MapArg, b: Option<f64>) -> Result<(ConformalMap, f64, String), CmdError> {
    match map {
        MapArg::Negaxis => {
            if let Some(b) = b {
                if b != 1.0 {
                    return Err(CmdError::usage(format!("--b {b} conflicts with --map negaxis (b = 1)")));
                }
            }
            Ok((ConformalMap::neg_axis(), 1.0, "negaxis".into()))
        }
        MapArg::Halfplane => {
            if let Some(b) = b {
                if b != 0.5 {
                    return Err(CmdError::usage(format!(
                        "--b {b} conflicts with --map halfplane (b = 1/2)"
                    )));
                }
            }
            Ok((ConformalMap::half_plane(), 0.5, "halfplane".into()))
        }
        MapArg::Doubled => {
            if let Some(b) = b {
                if b != 2.0 {
                    return Err(CmdError::usage(format!("--b {b} conflicts with --map doubled (b = 2)")));
                }
            }
            Ok((ConformalMap::doubled_kill_reflect(), 2.0, "doubled".into()))
        }
        MapArg::Angle => {
            let b = b.ok_or_else(|| CmdError::usage("--map angle requires --b"))?;
            if !(b > 0.0 && b <= 1.0) {
                return Err(CmdError::usage(format!("--b must be in (0, 1] for --map angle, got {b}")));
            }
            let map = ConformalMap::angle(b)?;
            Ok((map, b, format!("angle(b={b})")))
        }
    }
}

fn build_bc(bc: BcArg, p: f64) -> Result<BoundaryCondition, CmdError> {
    let bc = match bc {
        BcArg::None => BoundaryCondition::None,
        BcArg::Negaxis => BoundaryCondition::KillNegAxis,
        BcArg::Halfplane => BoundaryCondition::KillAngleSides(lattice::AngleSides::Half),
        BcArg::Quarterplane => BoundaryCondition::KillAngleSides(lattice::AngleSides::Quarter),
        BcArg::Reflect => BoundaryCondition::KillReflect,
        BcArg::Kpr => BoundaryCondition::Kpr(p),
    };
    bc.validate()?;
    Ok(bc)
}

fn run(cmd: Command) -> Result<(), CmdError> {
    match cmd {
        Command::Boundary { map, b, n, out } => {
            if n < 3 {
                return Err(CmdError::usage(format!("--n must be at least 3, got {n}")));
            }
            let (map, _, _) = build_map(map, b)?;
            let pts = boundary_sample(&map, n)?;
            write_atomic(&out, |w| write_boundary_csv(&pts, w))?;
            println!("wrote {} boundary rows to {}", pts.len(), out.display());
            Ok(())
        }
        Command::Moments { map, b, nmax, p, grid, out, json } => {
            let (map, b, label) = build_map(map, b)?;
            let grid = QuadratureGrid::square(grid)?;
            let rows = match p {
                Some(p) => moment_suite_p(&map, p, nmax.max(1), &grid)?,
                None => moment_suite(&map, nmax, &grid)?,
            };
            write_atomic(&out, |w| write_moment_csv(&rows, w))?;
            if let Some(json_path) = json {
                let report = moment_report_json(&label, b, &grid, &rows);
                write_atomic(&json_path, |w| writeln!(w, "{}", serde_json::to_string_pretty(&report).unwrap()))?;
            }
            for r in &rows {
                println!(
                    "s = {:>8.5}{}  moment = {:+.3e}  (rel {:.3e}, grid err {:.1e})",
                    r.exponent,
                    if r.with_log { " (log)" } else { "      " },
                    r.value,
                    r.relative(),
                    r.error_estimate,
                );
            }
            Ok(())
        }
        Command::Simulate {
            model,
            bc,
            n,
            mass,
            p,
            seed,
            step_cap,
            eps,
            rotor_init,
            out,
            pbm,
        } => {
            let opts = SimOptions {
                step_cap,
                rotor_init: match rotor_init {
                    RotorInitArg::AllNorth => RotorInit::AllNorth,
                    RotorInitArg::MirrorAxis => RotorInit::MirrorAxis,
                },
                ..SimOptions::default()
            };
            let result: Result<LatticeCluster, heleshaw::Error> = match model {
                ModelArg::Idla => lattice::run_idla_with(n, build_bc(bc, p)?, seed, &opts),
                ModelArg::Rotor => lattice::run_rotor_router_with(n, build_bc(bc, p)?, &opts),
                ModelArg::Kpr => {
                    lattice::run_idla_with(n, build_bc(BcArg::Kpr, p)?, seed, &opts)
                }
                ModelArg::Sandpile => lattice::run_divisible_sandpile(mass, build_bc(bc, p)?, eps)
                    .map(|s| s.to_cluster()),
            };
            let (cluster, code) = match result {
                Ok(c) => (c, None),
                Err(heleshaw::Error::StepCapExceeded { partial, cap, settled }) => {
                    eprintln!("step cap {cap} exhausted after {settled} settled particles; writing partial cluster");
                    (*partial, Some(3u8))
                }
                Err(e) => return Err(e.into()),
            };
            write_atomic(&out, |w| lattice::write_cluster(&cluster, w))?;
            if let Some(pbm_path) = pbm {
                write_atomic(&pbm_path, |w| lattice::write_pbm(&cluster, w))?;
            }
            println!(
                "model={} bc={} N={} emitted={} seed={}{}",
                cluster.model,
                cluster.bc,
                cluster.n(),
                cluster.emitted,
                cluster.seed,
                if cluster.truncated { " (truncated)" } else { "" }
            );
            match code {
                Some(c) => Err(CmdError { code: c, msg: "step cap exhausted".into() }),
                None => Ok(()),
            }
        }
        Command::Compare { cluster, map, b, n_boundary, mirror, out, svg } => {
            let file = fs::File::open(&cluster).map_err(|e| {
                CmdError::usage(format!("--cluster {}: {e}", cluster.display()))
            })?;
            let parsed = lattice::read_cluster(std::io::BufReader::new(file))?;
            let (map, _, label) = build_map(map, b)?;
            let mut shape_c = normalize_cluster(&parsed)?;
            let rot = canonical_rotation(&parsed.bc);
            if rot != 0.0 {
                shape_c = shape_c.rotate(rot);
            }
            if mirror {
                shape_c = shape_c.rotate(std::f64::consts::PI);
            }
            let shape_m = normalize_map_region(&map, n_boundary)?;
            let report = compare_shapes(
                &format!("{} (N={}, seed={})", parsed.model, parsed.n(), parsed.seed),
                &label,
                &shape_c,
                &shape_m,
                vec![parsed.seed],
            );
            write_atomic(&out, |w| {
                writeln!(w, "{}", serde_json::to_string_pretty(&report).unwrap())
            })?;
            if let Some(svg_path) = svg {
                write_atomic(&svg_path, |w| write_svg_overlay(&shape_c, &shape_m, w))?;
            }
            println!(
                "sym_diff = {:.5}  hausdorff = {:.5}",
                report.sym_diff, report.hausdorff
            );
            Ok(())
        }
        Command::Beurling { ns, seeds, bc, p, seed, step_cap, out } => {
            let bc = build_bc(bc, p)?;
            let opts = SimOptions { step_cap, ..SimOptions::default() };
            let fit = lattice::beurling_fit(ModelKind::Idla, bc, &ns, seeds, seed, &opts)?;
            write_atomic(&out, |w| {
                writeln!(w, "N,mean_emitted,stderr")?;
                for pt in &fit.points {
                    writeln!(w, "{},{:.14e},{:.14e}", pt.n, pt.mean_emitted, pt.stderr)?;
                }
                writeln!(
                    w,
                    "# slope {:.6} stderr {:.6} ci {:.6} {:.6}",
                    fit.slope, fit.slope_stderr, fit.ci.0, fit.ci.1
                )
            })?;
            println!(
                "slope = {:.4} ± {:.4} (ci [{:.4}, {:.4}])",
                fit.slope, fit.slope_stderr, fit.ci.0, fit.ci.1
            );
            Ok(())
        }
    }
}
