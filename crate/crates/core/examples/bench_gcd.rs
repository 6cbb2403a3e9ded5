use pdq_core::scalar::Scalar;
use std::time::Instant;

fn main() {
    let h = Scalar::hbar();
    let l = Scalar::param("lambda");
    let two = Scalar::from_int(2);
    let a = &two + &(&l * &h); // 2 + lh
    let b = &two - &(&l * &h); // 2 - lh
    // build (a^6 b^4 + h a^3 b^2)/(a^5 b^5) style fractions and add them
    let t = Instant::now();
    let mut acc = Scalar::zero();
    for k in 1..=6u32 {
        let num = &a.pow_int(k) + &(&h * &b.pow_int(k / 2));
        let den = &a.pow_int(7 - k) * &b.pow_int(k);
        let f = &num / &den;
        acc = &acc + &f;
    }
    println!("sum built in {:?}: num terms {}", t.elapsed(), format!("{acc}").len());
    let t = Instant::now();
    let p = &acc * &acc.inv().unwrap();
    println!("self-cancel in {:?}: is_one={}", t.elapsed(), p.is_one());
}
