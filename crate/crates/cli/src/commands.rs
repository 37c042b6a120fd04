//! The four batch experiments and their CSV outputs.
//!
//! Layout: `out/<experiment>/<case>/<N>_<p>.csv` per run plus a combined
//! `summary.csv`; floats are written with 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use c0ripg::analysis::convergence_rates;
use c0ripg::driver::{self, MmsRun};
use c0ripg::heat::{self, BenchmarkCase, PicardOptions};
use c0ripg::mesh::{Rectangle, TriangularMesh};
use c0ripg::tracers::{advect_rk3, occupancy_stats, ParticleSet};
use std::sync::Arc;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(std::io::BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub struct MmsParams {
    pub divisions: Vec<usize>,
    pub degrees: Vec<usize>,
    pub delta: f64,
    pub out: PathBuf,
}

const MMS_HEADER: &str = "N,p,delta,dofs,h,L2_phi,L2_u,H1_u,DG";

fn mms_row(run: &MmsRun) -> String {
    let n = run.norms.expect("solved run");
    format!(
        "{},{},{},{},{},{},{},{},{}",
        run.n,
        run.degree,
        fmt(run.delta),
        run.dofs,
        fmt(run.h),
        fmt(n.l2_stream),
        fmt(n.l2_velocity),
        fmt(n.h1_velocity),
        fmt(n.dg)
    )
}

/// Manufactured-solution convergence study.
pub fn run_mms(params: &MmsParams) -> Result<()> {
    if params.delta <= c0ripg::stokes::DELTA_THRESHOLD {
        eprintln!(
            "warning: delta = {} is at or below the coercivity threshold sqrt(2); the solve may be unstable",
            params.delta
        );
    }
    let dir = params.out.join("mms").join("default");
    let mut summary = writer(&dir.join("summary.csv"))?;
    writeln!(summary, "{MMS_HEADER}")?;
    let mut rates = writer(&dir.join("rates.csv"))?;
    writeln!(rates, "p,norm,slope_finest3,slope_all,monotone")?;

    for &p in &params.degrees {
        let mut runs = Vec::new();
        for &n in &params.divisions {
            let t0 = std::time::Instant::now();
            let run = driver::run_mms_case(n, p, params.delta)?;
            if !run.spd {
                bail!("operator not SPD at N={n}, p={p}, delta={}", params.delta);
            }
            let mut f = writer(&dir.join(format!("{n}_{p}.csv")))?;
            writeln!(f, "{MMS_HEADER}")?;
            writeln!(f, "{}", mms_row(&run))?;
            writeln!(summary, "{}", mms_row(&run))?;
            let norms = run.norms.unwrap();
            println!(
                "mms N={n:4} p={p} dofs={:7} DG={:.3e} L2(u)={:.3e} L2(phi)={:.3e} [{:.2?}]",
                run.dofs, norms.dg, norms.l2_velocity, norms.l2_stream, t0.elapsed()
            );
            runs.push(run);
        }
        if runs.len() >= 3 {
            let table = |pick: &dyn Fn(&MmsRun) -> f64| -> Vec<(f64, f64)> {
                runs.iter().map(|r| (r.h, pick(r))).collect()
            };
            for (name, pick) in [
                ("L2_phi", (&|r: &MmsRun| r.norms.unwrap().l2_stream) as &dyn Fn(&MmsRun) -> f64),
                ("L2_u", &|r| r.norms.unwrap().l2_velocity),
                ("H1_u", &|r| r.norms.unwrap().h1_velocity),
                ("DG", &|r| r.norms.unwrap().dg),
            ] {
                let est = convergence_rates(&table(pick))?;
                writeln!(rates, "{p},{name},{},{},{}", fmt(est.slope), fmt(est.slope_all), est.monotone)?;
                println!("mms p={p} {name:<6} slope {:.3} (all levels {:.3})", est.slope, est.slope_all);
            }
        }
    }
    Ok(())
}

pub struct DeltaSweepParams {
    pub divisions: Vec<usize>,
    pub degrees: Vec<usize>,
    pub deltas: Vec<f64>,
    pub out: PathBuf,
}

/// Penalty-scaling stability sweep; indefinite operators are recorded, not
/// fatal.
pub fn run_delta_sweep(params: &DeltaSweepParams) -> Result<()> {
    let dir = params.out.join("delta_sweep").join("default");
    let header = "N,p,delta,spd,dofs,L2_phi,L2_u,H1_u,DG";
    let mut summary = writer(&dir.join("summary.csv"))?;
    writeln!(summary, "{header}")?;
    for &p in &params.degrees {
        for &n in &params.divisions {
            let mut f = writer(&dir.join(format!("{n}_{p}.csv")))?;
            writeln!(f, "{header}")?;
            for &delta in &params.deltas {
                let run = driver::run_mms_case(n, p, delta)?;
                let row = match run.norms {
                    Some(norms) => format!(
                        "{n},{p},{},{},{},{},{},{},{}",
                        fmt(delta),
                        run.spd,
                        run.dofs,
                        fmt(norms.l2_stream),
                        fmt(norms.l2_velocity),
                        fmt(norms.h1_velocity),
                        fmt(norms.dg)
                    ),
                    None => format!("{n},{p},{},{},,,,,", fmt(delta), run.spd),
                };
                writeln!(f, "{row}")?;
                writeln!(summary, "{row}")?;
                println!(
                    "delta-sweep N={n} p={p} delta={delta:<7} spd={}{}",
                    run.spd,
                    run.norms.map(|m| format!(" DG={:.3e}", m.dg)).unwrap_or_default()
                );
            }
        }
    }
    Ok(())
}

pub struct BenchmarkParams {
    pub case: BenchmarkCase,
    pub divisions: Vec<usize>,
    pub degrees: Vec<usize>,
    pub delta: f64,
    pub opts: PicardOptions,
    pub out: PathBuf,
}

const BENCH_HEADER: &str = "case,N,p,delta,dofs,converged,iterations,Nu,u_rms,W,Phi,Delta,eps_Nu,eps_urms";

/// Thermal convection benchmark over a mesh sequence.
pub fn run_benchmark(params: &BenchmarkParams) -> Result<()> {
    let case = &params.case;
    let dir = params.out.join("benchmark").join(case.name);
    let mut summary = writer(&dir.join("summary.csv"))?;
    writeln!(summary, "{BENCH_HEADER}")?;

    for &p in &params.degrees {
        let mut warm: Option<c0ripg::space::ScalarField> = None;
        for &n in &params.divisions {
            let t0 = std::time::Instant::now();
            let mesh = Arc::new(TriangularMesh::structured(Rectangle::unit(), n)?);
            let state = heat::solve_steady(case, mesh, p, params.delta, &params.opts, warm.as_ref())?;
            heat::write_trace_csv(&state.trace, &dir.join(format!("{n}_{p}_trace.csv")))?;
            let report = driver::benchmark_report(&state);
            let row = format!(
                "{},{n},{p},{},{},{},{},{},{},{},{},{},{},{}",
                case.name,
                fmt(params.delta),
                report.dofs,
                state.converged,
                state.iterations,
                fmt(report.nu),
                fmt(report.u_rms),
                fmt(report.work_rate),
                fmt(report.dissipation_rate),
                report.delta.map(fmt).unwrap_or_default(),
                fmt((report.nu - case.nu_ref).abs() / case.nu_ref),
                fmt((report.u_rms - case.u_rms_ref).abs() / case.u_rms_ref),
            );
            let mut f = writer(&dir.join(format!("{n}_{p}.csv")))?;
            writeln!(f, "{BENCH_HEADER}")?;
            writeln!(f, "{row}")?;
            writeln!(summary, "{row}")?;
            println!(
                "benchmark {} N={n} p={p}: {} after {} iterations, Nu={:.6} (ref {:.6}), u_rms={:.4} (ref {:.4}) [{:.2?}]",
                case.name,
                if state.converged { "converged" } else { "NOT CONVERGED" },
                state.iterations,
                report.nu,
                case.nu_ref,
                report.u_rms,
                case.u_rms_ref,
                t0.elapsed()
            );
            // Warm-start the next level either way; a stalled iterate is
            // still a better initial guess than the perturbed conduction
            // profile.
            warm = Some(state.temperature.clone());
        }
    }
    Ok(())
}

pub struct TracerParams {
    pub case: BenchmarkCase,
    pub division: usize,
    pub degree: usize,
    pub delta: f64,
    pub opts: PicardOptions,
    pub particles_per_side: usize,
    pub dt: f64,
    pub horizon: f64,
    pub snapshot_every: usize,
    pub out: PathBuf,
}

/// Tracer advection through a converged benchmark velocity field.
pub fn run_tracers(params: &TracerParams) -> Result<()> {
    let case = &params.case;
    let dir = params.out.join("tracers").join(case.name);
    let mesh = Arc::new(TriangularMesh::structured(Rectangle::unit(), params.division)?);
    println!(
        "tracers: solving {} at N={} p={} first...",
        case.name, params.division, params.degree
    );
    let state = heat::solve_steady(case, mesh.clone(), params.degree, params.delta, &params.opts, None)?;
    if !state.converged {
        bail!("benchmark solve did not converge; refusing to advect through an unconverged field");
    }

    let mut particles = ParticleSet::equidistant(mesh.domain, params.particles_per_side);
    let n_steps = (params.horizon / params.dt).round().max(1.0) as usize;

    let mut stats = writer(&dir.join(format!("stats_{}_{}.csv", params.division, params.degree)))?;
    writeln!(stats, "step,mean,std")?;
    let mut snapshots = writer(&dir.join(format!("snapshots_{}_{}.csv", params.division, params.degree)))?;
    writeln!(snapshots, "step,id,x,y")?;

    let (mean0, std0) = occupancy_stats(&particles, &mesh)?;
    writeln!(stats, "0,{},{}", fmt(mean0), fmt(std0))?;
    particles.write_snapshot(&mut snapshots, 0)?;
    println!("tracers: step 0 occupancy mean {mean0:.3} std {std0:.3}");

    let mut done = 0;
    while done < n_steps {
        let chunk = params.snapshot_every.min(n_steps - done).max(1);
        let report = advect_rk3(&mut particles, &state.stream, params.dt, chunk)?;
        done += chunk;
        if report.projected > 0 {
            eprintln!(
                "warning: {} particles projected back to the boundary (max escape {:.3e})",
                report.projected, report.max_escape
            );
        }
        let (mean, std) = occupancy_stats(&particles, &mesh)?;
        writeln!(stats, "{done},{},{}", fmt(mean), fmt(std))?;
        particles.write_snapshot(&mut snapshots, done)?;
        println!(
            "tracers: step {done}/{n_steps} (t = {:.4}) occupancy mean {mean:.3} std {std:.3}",
            done as f64 * params.dt
        );
    }
    Ok(())
}
