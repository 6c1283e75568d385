use bethe_circuit::circuit::{build_circuit, simulate, verify_unitarity};
use bethe_circuit::states::cba_wavefunction;
use bethe_circuit::system::MagnonSystem;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let (mut worst_f, mut worst_u): (f64, f64) = (0.0, 0.0);
    let mut fails = 0u32;
    let mut count = 0u32;
    for n in 2..=10usize {
        for m in 1..n {
            for delta in [0.0f64, 0.5, 1.0, 2.0] {
                for draw in 0..20u64 {
                    let seed = (n as u64) * 1000 + (m as u64) * 100 + draw;
                    let sys = MagnonSystem::random(n, m, delta, seed);
                    let circ = match build_circuit(&sys) {
                        Ok(c) => c,
                        Err(e) => {
                            println!("BUILD FAIL n={n} m={m} delta={delta} draw={draw}: {e}");
                            fails += 1;
                            continue;
                        }
                    };
                    let out = simulate(&circ).unwrap();
                    let tuple: Vec<usize> = (1..=m).collect();
                    let oracle = cba_wavefunction(&tuple, n, &sys).unwrap();
                    let err = (out.fidelity(&oracle).unwrap() - 1.0).abs();
                    let uni = verify_unitarity(&circ, 1e-10).unwrap().max_residual;
                    if err > 1e-10 || uni > 1e-10 {
                        println!("MARGINAL n={n} m={m} delta={delta} draw={draw}: |1-F| {err:.3e} uni {uni:.3e}");
                    }
                    worst_f = worst_f.max(err);
                    worst_u = worst_u.max(uni);
                    count += 1;
                }
            }
        }
    }
    println!(
        "{count} ok, {fails} failed, {:?}; worst |1-F| {worst_f:.3e}; worst unitarity {worst_u:.3e}",
        t0.elapsed()
    );
}
