//! Commutative polynomials in three variables with quadratic Poisson
//! structures: construction from cubic superpotentials, the biderivation
//! bracket, Jacobi verification and structure-constant extraction.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::{Bindings, Scalar};

/// Commutative polynomial: exponent triples with scalar coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CPoly {
    pub terms: BTreeMap<[u16; 3], Scalar>,
}

impl CPoly {
    pub fn zero() -> CPoly {
        CPoly::default()
    }

    pub fn one() -> CPoly {
        CPoly::monomial([0, 0, 0], Scalar::one())
    }

    /// The generator `x_i`, 1-based.
    pub fn var(i: usize) -> CPoly {
        assert!((1..=3).contains(&i));
        let mut e = [0u16; 3];
        e[i - 1] = 1;
        CPoly::monomial(e, Scalar::one())
    }

    pub fn monomial(exps: [u16; 3], coeff: Scalar) -> CPoly {
        let mut p = CPoly::zero();
        p.insert(exps, coeff);
        p
    }

    pub fn constant(c: Scalar) -> CPoly {
        CPoly::monomial([0, 0, 0], c)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn insert(&mut self, e: [u16; 3], c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = &*o.get() + &c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn scale(&self, c: &Scalar) -> CPoly {
        if c.is_zero() {
            return CPoly::zero();
        }
        let mut out = CPoly::zero();
        for (e, v) in &self.terms {
            out.insert(*e, v * c);
        }
        out
    }

    pub fn pow(&self, n: u16) -> CPoly {
        let mut out = CPoly::one();
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// Total degree if homogeneous, else None.
    pub fn homogeneous_degree(&self) -> Option<usize> {
        let mut deg = None;
        for e in self.terms.keys() {
            let d = (e[0] + e[1] + e[2]) as usize;
            match deg {
                None => deg = Some(d),
                Some(p) if p != d => return None,
                _ => {}
            }
        }
        deg.or(Some(0))
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|e| (e[0] + e[1] + e[2]) as usize).max().unwrap_or(0)
    }

    /// Partial derivative with respect to `x_i`, 1-based.
    pub fn partial(&self, i: usize) -> CPoly {
        let k = i - 1;
        let mut out = CPoly::zero();
        for (e, c) in &self.terms {
            if e[k] == 0 {
                continue;
            }
            let mut e2 = *e;
            e2[k] -= 1;
            out.insert(e2, c * &Scalar::from_int(e[k] as i64));
        }
        out
    }

    pub fn specialize(&self, b: &Bindings) -> Result<CPoly> {
        let mut out = CPoly::zero();
        for (e, c) in &self.terms {
            out.insert(*e, c.specialize(b)?);
        }
        Ok(out)
    }

    /// Coefficient of a monomial (zero if absent).
    pub fn coeff(&self, e: [u16; 3]) -> Scalar {
        self.terms.get(&e).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn display_with(&self, letter: char) -> CPolyDisplay<'_> {
        CPolyDisplay { poly: self, letter }
    }
}

impl Add for &CPoly {
    type Output = CPoly;
    fn add(self, rhs: &CPoly) -> CPoly {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.insert(*e, c.clone());
        }
        out
    }
}

impl Sub for &CPoly {
    type Output = CPoly;
    fn sub(self, rhs: &CPoly) -> CPoly {
        self + &-rhs
    }
}

impl Neg for &CPoly {
    type Output = CPoly;
    fn neg(self) -> CPoly {
        CPoly { terms: self.terms.iter().map(|(e, c)| (*e, -c)).collect() }
    }
}

impl Mul for &CPoly {
    type Output = CPoly;
    fn mul(self, rhs: &CPoly) -> CPoly {
        let mut out = CPoly::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
                out.insert(e, ca * cb);
            }
        }
        out
    }
}

pub struct CPolyDisplay<'a> {
    poly: &'a CPoly,
    letter: char,
}

impl fmt::Display for CPolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.poly.terms.iter().rev() {
            let mut factors: Vec<String> = Vec::new();
            if !c.is_one() || *e == [0, 0, 0] {
                factors.push(format!("{c:#}"));
            }
            for (i, &exp) in e.iter().enumerate() {
                if exp == 1 {
                    factors.push(format!("{}{}", self.letter, i + 1));
                } else if exp > 1 {
                    factors.push(format!("{}{}^{}", self.letter, i + 1, exp));
                }
            }
            let mut term = factors.join("*");
            if first {
                first = false;
            } else if let Some(rest) = term.strip_prefix('-') {
                // a plainly negated coefficient reads better as subtraction
                term = rest.to_string();
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            write!(f, "{term}")?;
        }
        Ok(())
    }
}

/// Quadratic Poisson structure on `k[x1,x2,x3]`, stored through the three
/// generator brackets; `{x_j,x_i}` for j>i is implicitly the negation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoissonStructure {
    pub bracket12: CPoly,
    pub bracket23: CPoly,
    pub bracket31: CPoly,
}

/// Structure constants: for each bracket pair, coefficients over the
/// quadratic monomials `x_k x_l` with k <= l (the k < l monomial carries the
/// full coefficient, no symmetric split).
pub type StructureConstants = BTreeMap<(u8, u8), BTreeMap<(u8, u8), Scalar>>;

impl PoissonStructure {
    /// Unimodular structure from a cubic superpotential: the brackets are the
    /// cyclic partial derivatives of omega.
    pub fn from_potential(omega: &CPoly) -> Result<PoissonStructure> {
        if !omega.is_zero() && omega.homogeneous_degree() != Some(3) {
            return Err(Error::NotHomogeneousDegree3);
        }
        Ok(PoissonStructure {
            bracket12: omega.partial(3),
            bracket23: omega.partial(1),
            bracket31: omega.partial(2),
        })
    }

    /// Raw construction; Jacobi is not checked here so that deliberately
    /// broken structures can be used in negative tests.
    pub fn from_brackets(bracket12: CPoly, bracket23: CPoly, bracket31: CPoly) -> PoissonStructure {
        PoissonStructure { bracket12, bracket23, bracket31 }
    }

    pub fn zero() -> PoissonStructure {
        PoissonStructure::from_brackets(CPoly::zero(), CPoly::zero(), CPoly::zero())
    }

    /// Bracket of arbitrary polynomials via the biderivation formula.
    pub fn bracket(&self, f: &CPoly, g: &CPoly) -> CPoly {
        let f1 = f.partial(1);
        let f2 = f.partial(2);
        let f3 = f.partial(3);
        let g1 = g.partial(1);
        let g2 = g.partial(2);
        let g3 = g.partial(3);
        let t12 = &(&f1 * &g2) - &(&f2 * &g1);
        let t23 = &(&f2 * &g3) - &(&f3 * &g2);
        let t31 = &(&f3 * &g1) - &(&f1 * &g3);
        &(&(&self.bracket12 * &t12) + &(&self.bracket23 * &t23)) + &(&self.bracket31 * &t31)
    }

    /// Cyclic Jacobi sum on the generators.
    pub fn jacobi_check(&self) -> bool {
        self.jacobiator().is_zero()
    }

    /// `{x1,{x2,x3}} + {x2,{x3,x1}} + {x3,{x1,x2}}`.
    pub fn jacobiator(&self) -> CPoly {
        let x1 = CPoly::var(1);
        let x2 = CPoly::var(2);
        let x3 = CPoly::var(3);
        let a = self.bracket(&x1, &self.bracket23);
        let b = self.bracket(&x2, &self.bracket31);
        let c = self.bracket(&x3, &self.bracket12);
        &(&a + &b) + &c
    }

    /// Extract structure constants; fails unless brackets are quadratic.
    pub fn structure_constants(&self) -> Result<StructureConstants> {
        let mut out = StructureConstants::new();
        for (pair, b) in [((1u8, 2u8), &self.bracket12), ((2, 3), &self.bracket23), ((3, 1), &self.bracket31)] {
            if !b.is_zero() && b.homogeneous_degree() != Some(2) {
                return Err(Error::NotQuadratic);
            }
            let mut row = BTreeMap::new();
            for (e, c) in &b.terms {
                let mut idx = Vec::with_capacity(2);
                for (i, &exp) in e.iter().enumerate() {
                    for _ in 0..exp {
                        idx.push(i as u8 + 1);
                    }
                }
                row.insert((idx[0], idx[1]), c.clone());
            }
            if !row.is_empty() {
                out.insert(pair, row);
            }
        }
        Ok(out)
    }

    /// Rebuild brackets from structure constants (inverse of extraction).
    pub fn from_constants(constants: &StructureConstants) -> PoissonStructure {
        let build = |pair: (u8, u8)| {
            let mut p = CPoly::zero();
            if let Some(row) = constants.get(&pair) {
                for (&(k, l), c) in row {
                    let mut e = [0u16; 3];
                    e[k as usize - 1] += 1;
                    e[l as usize - 1] += 1;
                    p.insert(e, c.clone());
                }
            }
            p
        };
        PoissonStructure { bracket12: build((1, 2)), bracket23: build((2, 3)), bracket31: build((3, 1)) }
    }

    pub fn specialize(&self, b: &Bindings) -> Result<PoissonStructure> {
        Ok(PoissonStructure {
            bracket12: self.bracket12.specialize(b)?,
            bracket23: self.bracket23.specialize(b)?,
            bracket31: self.bracket31.specialize(b)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> CPoly {
        CPoly::var(i)
    }

    #[test]
    fn potential_case_1() {
        let omega = x(1).pow(3);
        let ps = PoissonStructure::from_potential(&omega).unwrap();
        assert!(ps.bracket12.is_zero());
        assert_eq!(ps.bracket23, x(1).pow(2).scale(&Scalar::from_int(3)));
        assert!(ps.bracket31.is_zero());
    }

    #[test]
    fn potential_case_2() {
        let omega = &x(1).pow(2) * &x(2);
        let ps = PoissonStructure::from_potential(&omega).unwrap();
        assert!(ps.bracket12.is_zero());
        assert_eq!(ps.bracket23, (&x(1) * &x(2)).scale(&Scalar::from_int(2)));
        assert_eq!(ps.bracket31, x(1).pow(2));
    }

    #[test]
    fn potential_zero_and_errors() {
        let ps = PoissonStructure::from_potential(&CPoly::zero()).unwrap();
        assert!(ps.bracket12.is_zero() && ps.bracket23.is_zero() && ps.bracket31.is_zero());
        assert!(matches!(PoissonStructure::from_potential(&x(1).pow(2)), Err(Error::NotHomogeneousDegree3)));
    }

    #[test]
    fn bracket_leibniz_by_hand() {
        // case 2: {x3, x1^2} = 2 x1 {x3,x1} = 2 x1^3
        let ps = PoissonStructure::from_potential(&(&x(1).pow(2) * &x(2))).unwrap();
        let got = ps.bracket(&x(3), &x(1).pow(2));
        assert_eq!(got, x(1).pow(3).scale(&Scalar::from_int(2)));
    }

    #[test]
    fn bracket_case_3_generators() {
        let omega = (&(&x(1) * &x(2)) * &x(3)).scale(&Scalar::from_int(2));
        let ps = PoissonStructure::from_potential(&omega).unwrap();
        assert_eq!(ps.bracket(&x(1), &x(2)), (&x(1) * &x(2)).scale(&Scalar::from_int(2)));
    }

    #[test]
    fn bracket_antisymmetry() {
        let omega = &x(1).pow(2) * &x(2);
        let ps = PoissonStructure::from_potential(&omega).unwrap();
        let f = &x(1).pow(2) + &(&x(2) * &x(3));
        assert!(ps.bracket(&f, &f).is_zero());
    }

    #[test]
    fn jacobi_cases() {
        let zero = PoissonStructure::zero();
        assert!(zero.jacobi_check());

        // broken structure: {x1,x2}=x2^2, {x2,x3}=x3^2, {x3,x1}=0; jacobiator = -2 x2 x3^2
        let bad = PoissonStructure::from_brackets(x(2).pow(2), x(3).pow(2), CPoly::zero());
        assert!(!bad.jacobi_check());
        let expected = (&x(2) * &x(3).pow(2)).scale(&Scalar::from_int(-2));
        assert_eq!(bad.jacobiator(), expected);
    }

    #[test]
    fn jacobi_case_7_symbolic() {
        let lam = Scalar::param("lambda");
        let third = Scalar::rational(1, 3);
        let cubes = &(&x(1).pow(3) + &x(2).pow(3)) + &x(3).pow(3);
        let omega = &cubes.scale(&third) + &(&(&x(1) * &x(2)) * &x(3)).scale(&lam);
        let ps = PoissonStructure::from_potential(&omega).unwrap();
        assert!(ps.jacobi_check());
    }

    #[test]
    fn constants_roundtrip() {
        let lam = Scalar::param("lambda");
        let third = Scalar::rational(1, 3);
        let cubes = &(&x(1).pow(3) + &x(2).pow(3)) + &x(3).pow(3);
        let omega = &cubes.scale(&third) + &(&(&x(1) * &x(2)) * &x(3)).scale(&lam);
        let ps = PoissonStructure::from_potential(&omega).unwrap();
        let cs = ps.structure_constants().unwrap();
        // case 7: c[(1,2)][(3,3)] = 1, c[(1,2)][(1,2)] = lambda
        assert_eq!(cs[&(1, 2)][&(3, 3)], Scalar::one());
        assert_eq!(cs[&(1, 2)][&(1, 2)], Scalar::param("lambda"));
        assert_eq!(PoissonStructure::from_constants(&cs), ps);

        // case 1: only c[(2,3)][(1,1)] = 3
        let ps1 = PoissonStructure::from_potential(&x(1).pow(3)).unwrap();
        let cs1 = ps1.structure_constants().unwrap();
        assert_eq!(cs1.len(), 1);
        assert_eq!(cs1[&(2, 3)][&(1, 1)], Scalar::from_int(3));

        // zero structure: empty constants
        assert!(PoissonStructure::zero().structure_constants().unwrap().is_empty());

        // non-quadratic bracket rejected
        let bad = PoissonStructure::from_brackets(x(1).pow(3), CPoly::zero(), CPoly::zero());
        assert!(matches!(bad.structure_constants(), Err(Error::NotQuadratic)));
    }

    #[test]
    fn display() {
        let p = &x(1).pow(2) + &(&x(2) * &x(3)).scale(&Scalar::from_int(-3));
        assert_eq!(p.display_with('x').to_string(), "x1^2 - 3*x2*x3");
    }
}
