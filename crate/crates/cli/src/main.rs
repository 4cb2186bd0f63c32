//! `grasscub` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 numerical
//! non-convergence (partial output is still written).

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use grasscub::cubature::{certify_cubature, minimize_ffp, MinimizeOptions};
use grasscub::grassmann::{sample_uniform, Projector, SymMatrix};
use grasscub::io::{read_atoms_csv, read_cubature, read_frames, read_moments_csv, write_cubature, write_frames};
use grasscub::moments::{
    build_minor_frame, default_minor_parameters, frame_rank_check, jl_distortion, lift_moments,
    project_moments, prony_recover_1d,
};
use grasscub::phase::{
    feasibility_pocs, measure, rank_one_extract, reconstruct_closed_form, relative_error_mod_sign,
    success_experiment, write_success_reports, PocsOptions, ProjectorSource,
};
use grasscub::quality::{
    covering_radius_estimate, integrate_with_cubature, integration_error_experiment, monte_carlo_reference,
    polish_covering, write_error_reports, ExperimentOptions,
};
use grasscub::rng::seeded;
use grasscub::zonal::{dim_pol_grassmannian, dim_pol_union, ffp_lower_bound, random_points_constant};
use grasscub::{Error, Rational, WeightedCubature64};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

/// Cubatures on Grassmannians.
#[derive(Parser, Debug)]
#[command(name = "grasscub", version)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "GRASSCUB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Construct, certify and evaluate cubatures.
    #[command(subcommand)]
    Cubature(CubatureCmd),
    /// Dimensions of polynomial spaces.
    #[command(subcommand)]
    Dims(DimsCmd),
    /// Prony recovery, minor frames, moment lifting and JL checks.
    #[command(subcommand)]
    Moments(MomentsCmd),
    /// Phase retrieval from projection magnitudes.
    #[command(subcommand)]
    Phase(PhaseCmd),
    /// Closed-form bounds.
    #[command(subcommand)]
    Bound(BoundCmd),
}

#[derive(Subcommand, Debug)]
enum CubatureCmd {
    /// Minimize the fusion frame potential.
    Minimize(MinimizeArgs),
    /// Compare the potential of a stored cubature with its lower bound.
    Certify(CertifyArgs),
    /// Estimate the covering radius of a stored cubature.
    Covering(CoveringArgs),
    /// Integrate a test function; several inputs produce an error report.
    Integrate(IntegrateArgs),
}

#[derive(Args, Debug, Serialize)]
struct MinimizeArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    t: u32,
    /// Number of points.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    g_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    cert_tol: f64,
    /// Rounds of weight re-optimization after the point descent.
    #[arg(long, default_value_t = 0)]
    weight_rounds: usize,
    /// Plain Armijo steps from 1.0 instead of Barzilai-Borwein trial steps.
    #[arg(long)]
    no_bb: bool,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long)]
    input: PathBuf,
    /// Degree to certify (default: the stored degree).
    #[arg(long)]
    t: Option<u32>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args, Debug)]
struct CoveringArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    n_probe: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hill-climb iterations from the worst probe.
    #[arg(long, default_value_t = 0)]
    polish: usize,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, Serialize)]
enum TestFunction {
    /// `trace(A P)^p`
    TracePower,
    /// `exp(trace(A P))`
    ExpTrace,
}

#[derive(Args, Debug)]
struct IntegrateArgs {
    /// Cubature files; repeat for a family.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = TestFunction::ExpTrace)]
    function: TestFunction,
    /// Diagonal of `A`, comma separated (default: `e_1`).
    #[arg(long, value_delimiter = ',')]
    diag: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    power: u32,
    /// Monte Carlo samples for the reference value.
    #[arg(long, default_value_t = 1_000_000)]
    mc_samples: usize,
    /// Random-baseline trials per input.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Probes for the covering column (0 to skip).
    #[arg(long, default_value_t = 0)]
    n_probe: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV report file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum DimsCmd {
    /// `dim Pol_t(G(k, d))`.
    Single {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        t: u32,
    },
    /// `dim Pol_t` on a union of Grassmannians.
    Union {
        #[arg(long)]
        d: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<usize>,
        #[arg(long)]
        t: u32,
    },
}

#[derive(Subcommand, Debug)]
enum MomentsCmd {
    /// Recover an m-atom measure on the line from power moments.
    Prony {
        /// CSV with a header and one moment per row.
        #[arg(long)]
        moments: PathBuf,
        #[arg(long)]
        m: usize,
    },
    /// Build a Vandermonde-minor frame.
    Frame {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        t: u32,
        /// Distinct positive nodes (default 1..=d).
        #[arg(long, value_delimiter = ',')]
        v: Vec<f64>,
        /// Distinct exponents (default 0..t+d-1).
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lift projected moments of an atom list back to monomial moments.
    Lift {
        #[arg(long)]
        frames: PathBuf,
        /// CSV `weight, x_1, ..., x_d` with a header.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        degree: u32,
    },
    /// Distance distortion of a random rank-k projection.
    Jl {
        /// CSV of points (header, one point per row).
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand, Debug)]
enum PhaseCmd {
    /// Closed-form reconstruction from a degree-2 cubature.
    Closed {
        #[arg(long)]
        input: PathBuf,
        /// Signal, comma separated (random if absent).
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Alternating-projection recovery from Haar-random projectors.
    Pocs {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        norm_known: bool,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 50_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Success rates over a range of measurement counts.
    Sweep {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Sample projectors from this cubature instead of Haar measure.
        #[arg(long)]
        cubature: Option<PathBuf>,
        #[arg(long)]
        norm_known: bool,
        #[arg(long, default_value_t = 5_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum BoundCmd {
    /// Lower bound of the t-fusion frame potential.
    Ffp {
        #[arg(long)]
        t: u32,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
        /// Print the exact rational value.
        #[arg(long)]
        exact: bool,
    },
    /// Expected worst-case error constant of random points.
    RandomConst {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1000)]
        cutoff: u32,
    },
}

/// Outcome of a successful dispatch.
enum Status {
    Done,
    NotConverged,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn load_cubature(path: &Path) -> Result<WeightedCubature64> {
    read_cubature(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn diag_matrix(diag: &[f64], d: usize) -> Result<DMatrix<f64>> {
    if diag.is_empty() {
        let mut a = DMatrix::zeros(d, d);
        a[(0, 0)] = 1.0;
        return Ok(a);
    }
    if diag.len() != d {
        bail!(Error::DimensionMismatch {
            expected: d,
            found: diag.len()
        });
    }
    Ok(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
}

fn minimize(a: &MinimizeArgs) -> Result<Status> {
    let opts = MinimizeOptions {
        g_tol: a.g_tol,
        max_iter: a.max_iter,
        restarts: a.restarts,
        cert_tol: a.cert_tol,
        weight_rounds: a.weight_rounds,
        bb_step: !a.no_bb,
        ..Default::default()
    };
    let c = minimize_ffp::<f64>(a.n, a.k, a.d, a.t, &opts, a.seed)?;
    let config = serde_json::json!({ "command": "cubature minimize", "args": a });
    let mut out = output(&a.out)?;
    write_cubature(&mut out, &c, config)?;
    writeln!(out)?;
    out.flush()?;
    eprintln!(
        "residual {:.3e}, iterations {}, gradient norm {:.3e}, converged {}",
        c.certificate_residual, c.metadata.iterations, c.metadata.grad_norm, c.metadata.converged
    );
    Ok(if c.metadata.converged {
        Status::Done
    } else {
        Status::NotConverged
    })
}

fn cubature(cmd: &CubatureCmd) -> Result<Status> {
    match cmd {
        CubatureCmd::Minimize(a) => minimize(a),
        CubatureCmd::Certify(a) => {
            let c = load_cubature(&a.input)?;
            let t = a.t.unwrap_or(c.degree());
            let cert = certify_cubature(&c, t, a.tol)?;
            println!(
                "{}",
                serde_json::json!({
                    "t": t,
                    "residual": cert.residual,
                    "tol": a.tol,
                    "certified": cert.certified,
                })
            );
            Ok(Status::Done)
        }
        CubatureCmd::Covering(a) => {
            let c = load_cubature(&a.input)?;
            let mut rng = seeded(a.seed);
            let mut est = covering_radius_estimate(c.points(), a.n_probe, &mut rng)?;
            let probe_value = est.rho_hat;
            if a.polish > 0 {
                est = polish_covering(c.points(), &est.worst_probe, a.polish, &mut rng)?;
            }
            println!(
                "{}",
                serde_json::json!({
                    "n": c.len(),
                    "n_probe": a.n_probe,
                    "seed": a.seed,
                    "rho_hat": probe_value,
                    "rho_polished": (a.polish > 0).then_some(est.rho_hat),
                })
            );
            Ok(Status::Done)
        }
        CubatureCmd::Integrate(a) => {
            let family = a.input.iter().map(|p| load_cubature(p)).collect::<Result<Vec<_>>>()?;
            let (d, k) = (family[0].dim(), family[0].rank());
            if family.iter().any(|c| c.dim() != d || c.rank() != k) {
                bail!(Error::Validation("all inputs must share d and k".into()));
            }
            let am = diag_matrix(&a.diag, d)?;
            let (function, power) = (a.function, a.power as i32);
            let f = move |p: &Projector<f64>| {
                let tr = (&am * p.as_matrix()).trace();
                match function {
                    TestFunction::TracePower => tr.powi(power),
                    TestFunction::ExpTrace => tr.exp(),
                }
            };
            let reference = monte_carlo_reference(&f, k, d, a.mc_samples, a.seed)?;
            let opts = ExperimentOptions {
                function: format!("{function:?}"),
                reference,
                trials: a.trials,
                n_probe: a.n_probe,
                seed: a.seed,
            };
            let reports = integration_error_experiment(&family, &f, &opts)?;
            for (c, r) in family.iter().zip(&reports) {
                eprintln!(
                    "n {}: cubature {:.12} reference {:.12} +- {:.1e}",
                    r.n,
                    integrate_with_cubature(c, &f),
                    reference.mean,
                    reference.std_err
                );
            }
            let mut out = output(&a.out)?;
            write_error_reports(&mut out, &reports)?;
            out.flush()?;
            Ok(Status::Done)
        }
    }
}

fn moments(cmd: &MomentsCmd) -> Result<Status> {
    match cmd {
        MomentsCmd::Prony { moments, m } => {
            let ms = read_moments_csv(open(moments)?)?;
            let rec = prony_recover_1d(&ms, *m)?;
            println!("node,weight");
            for (x, w) in rec.measure.nodes().iter().zip(rec.measure.weights()) {
                println!("{x},{w}");
            }
            eprintln!(
                "minimal separation {:.3e}, Hankel condition {:.3e}",
                rec.diagnostics.min_separation, rec.diagnostics.hankel_condition
            );
            Ok(Status::Done)
        }
        MomentsCmd::Frame { d, t, v, alpha, out } => {
            let (dv, da) = default_minor_parameters(*t, *d);
            let v = if v.is_empty() { dv } else { v.clone() };
            let alpha = if alpha.is_empty() { da } else { alpha.clone() };
            let f = build_minor_frame::<f64>(*t, *d, &v, &alpha)?;
            let rank = frame_rank_check(&f, *t);
            let mut w = output(out)?;
            write_frames(&mut w, &f, *t)?;
            writeln!(w)?;
            w.flush()?;
            eprintln!(
                "{} rows, rank {} of {}, sigma_min {:.3e}",
                f.len(),
                rank.rank,
                rank.required,
                rank.sigma_min
            );
            if !rank.full_rank {
                bail!(Error::Underdetermined {
                    degree: *t as usize,
                    rank: rank.rank,
                    required: rank.required
                });
            }
            Ok(Status::Done)
        }
        MomentsCmd::Lift { frames, data, degree } => {
            let (f, _) = read_frames::<f64, _>(open(frames)?)?;
            let atoms = read_atoms_csv(open(data)?)?;
            let projected = project_moments(&f, &atoms, *degree)?;
            let table = lift_moments(&f, &projected, *degree)?;
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            println!("exponent,lifted,direct");
            for (r, v) in &table.values {
                let key: Vec<String> = r.iter().map(|e| e.to_string()).collect();
                println!("{},{v},{}", key.join(" "), atoms.moment(r));
            }
            Ok(Status::Done)
        }
        MomentsCmd::Jl { points, k, seed } => {
            let rows = read_point_rows(points)?;
            let d = rows[0].len();
            let p = sample_uniform::<f64, _>(d, *k, &mut seeded(*seed))?;
            let pts: Vec<DVector<f64>> = rows.into_iter().map(DVector::from_vec).collect();
            let j = jl_distortion(&pts, &SymMatrix::from_matrix(p.as_matrix())?)?;
            println!(
                "{}",
                serde_json::json!({
                    "d": d, "k": k, "seed": seed,
                    "min_ratio": j.min_ratio, "max_ratio": j.max_ratio,
                    "duplicates": j.duplicates,
                })
            );
            Ok(Status::Done)
        }
    }
}

fn read_point_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let rows = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Format(e.to_string())))
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        bail!(Error::Format("points must be nonempty rows of equal length".into()));
    }
    Ok(rows)
}

fn random_unit(d: usize, rng: &mut impl Rng) -> DVector<f64> {
    let x = DVector::from_fn(d, |_, _| rng.random::<f64>() - 0.5);
    &x / x.norm()
}

fn phase(cmd: &PhaseCmd) -> Result<Status> {
    match cmd {
        PhaseCmd::Closed { input, x, seed } => {
            let c = load_cubature(input)?;
            let x = if x.is_empty() {
                random_unit(c.dim(), &mut seeded(*seed))
            } else {
                DVector::from_column_slice(x)
            };
            let ms = measure(&x, c.points().to_vec(), false)?;
            let cf = reconstruct_closed_form(&ms, c.weights())?;
            if let Some(w) = &cf.warning {
                eprintln!("warning: {w}");
            }
            let (xh, residual) = rank_one_extract(&cf.matrix);
            println!(
                "{}",
                serde_json::json!({
                    "x": xh.as_slice(),
                    "rank_one_residual": residual,
                    "relative_error": relative_error_mod_sign(&xh, &x),
                })
            );
            Ok(Status::Done)
        }
        PhaseCmd::Pocs { d, k, n, norm_known, tol, max_iter, seed } => {
            let mut rng = seeded(*seed);
            let projectors = (0..*n)
                .map(|_| sample_uniform::<f64, _>(*d, *k, &mut rng))
                .collect::<grasscub::Result<Vec<_>>>()?;
            let x = random_unit(*d, &mut rng);
            let ms = measure(&x, projectors, *norm_known)?;
            let opts = PocsOptions {
                tol: *tol,
                max_iter: *max_iter,
                record_distances: false,
            };
            let out = feasibility_pocs(&ms, &opts)?;
            let (xh, _) = rank_one_extract(&out.matrix);
            println!(
                "{}",
                serde_json::json!({
                    "d": d, "k": k, "n": n, "seed": seed,
                    "converged": out.converged,
                    "iterations": out.iterations,
                    "redundant": out.redundant,
                    "relative_error": relative_error_mod_sign(&xh, &x),
                })
            );
            Ok(if out.converged {
                Status::Done
            } else {
                Status::NotConverged
            })
        }
        PhaseCmd::Sweep { d, k, n, trials, cubature, norm_known, max_iter, seed, out } => {
            let c = cubature.as_deref().map(load_cubature).transpose()?;
            let source = match &c {
                Some(c) => ProjectorSource::Cubature(c),
                None => ProjectorSource::Haar,
            };
            let opts = PocsOptions {
                max_iter: *max_iter,
                ..Default::default()
            };
            let reports = n
                .iter()
                .map(|&n| success_experiment(*d, *k, n, source, *norm_known, *trials, &opts, *seed))
                .collect::<grasscub::Result<Vec<_>>>()?;
            let mut w = output(out)?;
            write_success_reports(&mut w, &reports)?;
            w.flush()?;
            Ok(Status::Done)
        }
    }
}

fn bound(cmd: &BoundCmd) -> Result<Status> {
    match cmd {
        BoundCmd::Ffp { t, k, d, exact } => {
            if *exact {
                println!("{}", ffp_lower_bound::<Rational>(*t, *k, *d)?);
            } else {
                println!("{}", ffp_lower_bound::<f64>(*t, *k, *d)?);
            }
        }
        BoundCmd::RandomConst { s, k, d, cutoff } => {
            let c = random_points_constant(*s, *k, *d, *cutoff)?;
            println!(
                "{}",
                serde_json::json!({ "value": c.value, "tail_bound": c.tail_bound, "cutoff": c.cutoff })
            );
        }
    }
    Ok(Status::Done)
}

fn dispatch(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Cubature(c) => cubature(c),
        Command::Dims(DimsCmd::Single { d, k, t }) => {
            println!("{}", dim_pol_grassmannian(*t, *k, *d)?);
            Ok(Status::Done)
        }
        Command::Dims(DimsCmd::Union { d, ranks, t }) => {
            println!("{}", dim_pol_union(ranks, *d, *t)?);
            Ok(Status::Done)
        }
        Command::Moments(m) => moments(m),
        Command::Phase(p) => phase(p),
        Command::Bound(b) => bound(b),
    }
}

/// Numerical failures map to 2, everything else to 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::IllConditioned { .. } | Error::SpuriousRoot { .. } | Error::Underdetermined { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("error: did not converge");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
