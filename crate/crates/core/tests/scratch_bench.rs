// Temporary development probe; removed before release.

use c0ripg::driver;
use c0ripg::heat::{BenchmarkCase, PicardOptions};

#[test]
#[ignore]
fn bb1a_small() {
    for (name, ns, p) in [("BB2a", vec![16usize, 32], 2usize), ("T2", vec![16, 32], 2), ("T4", vec![16, 32], 2)] {
        let case = BenchmarkCase::by_name(name).unwrap();
        let opts = PicardOptions::for_case(&case);
        let t0 = std::time::Instant::now();
        match driver::run_benchmark_sequence(&case, &ns, p, 2.0, &opts) {
            Ok(runs) => {
                for run in &runs {
                    let r = &run.report;
                    println!(
                        "{name} N={} iters={} conv={} Nu={:.6} (ref {:.6}) u_rms={:.6} (ref {:.6}) delta={:?}",
                        run.state.stream.space.mesh.divisions,
                        run.state.iterations,
                        run.state.converged,
                        r.nu,
                        case.nu_ref,
                        r.u_rms,
                        case.u_rms_ref,
                        r.delta,
                    );
                }
            }
            Err(e) => println!("{name}: ERROR {e}"),
        }
        println!("{name} elapsed {:?}", t0.elapsed());
    }
}
