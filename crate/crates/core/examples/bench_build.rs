use pdq_core::poisson::{CPoly, PoissonStructure};
use pdq_core::quantize::RewriteSystem;
use pdq_core::scalar::Scalar;
use std::time::Instant;

fn main() {
    eprintln!("start");
    let x = |i: usize| CPoly::var(i);
    let lam = Scalar::param("lambda");
    let third = Scalar::rational(1, 3);
    eprintln!("scalars ok");
    let cubes = &(&x(1).pow(3) + &x(2).pow(3)) + &x(3).pow(3);
    eprintln!("cubes ok");
    let omega = &cubes.scale(&third) + &(&(&x(1) * &x(2)) * &x(3)).scale(&lam);
    eprintln!("omega ok");
    let ps = PoissonStructure::from_potential(&omega).unwrap();
    eprintln!("potential ok");
    let cs = ps.structure_constants().unwrap();
    eprintln!("constants ok");
    for maxdeg in 2..=7 {
        let t = Instant::now();
        let rs = RewriteSystem::derive(&cs, maxdeg).unwrap();
        eprintln!("case7 maxdeg {}: {:?}", maxdeg, t.elapsed());
        let _ = rs;
    }
}
