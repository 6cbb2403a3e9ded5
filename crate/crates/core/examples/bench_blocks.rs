use pdq_core::poisson::{CPoly, PoissonStructure};
use pdq_core::quantize::{debug_solve_degree, RewriteSystem};
use pdq_core::scalar::Scalar;

fn main() {
    let x = |i: usize| CPoly::var(i);
    let lam = Scalar::param("lambda");
    let third = Scalar::rational(1, 3);
    let cubes = &(&x(1).pow(3) + &x(2).pow(3)) + &x(3).pow(3);
    let omega = &cubes.scale(&third) + &(&(&x(1) * &x(2)) * &x(3)).scale(&lam);
    let cs = PoissonStructure::from_potential(&omega).unwrap().structure_constants().unwrap();
    let rs = RewriteSystem::derive(&cs, 3).unwrap();
    debug_solve_degree(&rs, 3);
}
