use pdq_core::poisson::{CPoly, PoissonStructure};
use pdq_core::quantize::{basis, RewriteSystem};
use pdq_core::scalar::Scalar;
use std::time::Instant;

fn main() {
    let x = |i: usize| CPoly::var(i);
    let lam = Scalar::param("lambda");
    let third = Scalar::rational(1, 3);
    let cubes = &(&x(1).pow(3) + &x(2).pow(3)) + &x(3).pow(3);
    let omega = &cubes.scale(&third) + &(&(&x(1) * &x(2)) * &x(3)).scale(&lam);
    let cs = PoissonStructure::from_potential(&omega).unwrap().structure_constants().unwrap();
    let t = Instant::now();
    let rs = RewriteSystem::derive(&cs, 6).unwrap();
    println!("built maxdeg 6 in {:?}", t.elapsed());
    for d in 1..6usize {
        let mut worst = 0usize;
        let mut worst_s = String::new();
        for v in basis(d) {
            for g in 1..=3u8 {
                if g > v.0[0] {
                    let nf = rs.apply_gen(g, &pdq_core::quantize::NCPoly::word(v.clone(), Scalar::one()));
                    for (_, c) in &nf.terms {
                        let s = c.to_string();
                        if s.len() > worst {
                            worst = s.len();
                            worst_s = s;
                        }
                    }
                }
            }
        }
        println!("degree {d}: worst coeff {} chars: {}", worst, &worst_s[..worst.min(300)]);
    }
}
