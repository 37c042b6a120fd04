// Temporary development probe; replaced by the acceptance suite.

use c0ripg::driver;

#[test]
#[ignore]
fn mms_convergence_probe() {
    for p in [2usize, 3] {
        println!("p = {p}");
        let mut prev: Option<c0ripg::analysis::ErrorNorms> = None;
        for n in if p == 3 { vec![8usize, 16, 32, 64, 128] } else { vec![8usize, 16, 32, 64] } {
            let t0 = std::time::Instant::now();
            let run = driver::run_mms_case(n, p, 2.0).unwrap();
            let norms = run.norms.unwrap();
            let rates = prev
                .map(|q| {
                    format!(
                        "rates: phi {:.2} u {:.2} h1 {:.2} dg {:.2}",
                        (q.l2_stream / norms.l2_stream).log2(),
                        (q.l2_velocity / norms.l2_velocity).log2(),
                        (q.h1_velocity / norms.h1_velocity).log2(),
                        (q.dg / norms.dg).log2()
                    )
                })
                .unwrap_or_default();
            println!(
                "  N={n:3} dofs={:6} phi={:.3e} u={:.3e} h1={:.3e} dg={:.3e} {rates} [{:?}]",
                run.dofs, norms.l2_stream, norms.l2_velocity, norms.h1_velocity, norms.dg,
                t0.elapsed()
            );
            prev = Some(norms);
        }
    }
}
