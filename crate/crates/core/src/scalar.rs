//! Exact coefficient field: rational functions in formal parameters over a
//! small cyclotomic extension of the rationals.
//!
//! A [`Scalar`] is a fraction whose numerator is an integer-coefficient
//! polynomial in declared parameters (`hbar`, `lambda`, `a`..`f`, ...) and a
//! primitive m-th root of unity `zeta{m}`, m in {1,2,3,4,6,8,12}, and whose
//! denominator is kept in factored form: a positive integer times a product
//! of primitive polynomial factors. Equality is decided by
//! cross-multiplication, so no polynomial gcd is needed; the reduction that
//! runs after every operation is cheap by construction (integer content,
//! per-factor exact division, cyclotomic order minimization), and factored
//! denominators keep long sums from compounding.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Interned parameter name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Param(u32);

struct Interner {
    names: Vec<String>,
}

fn interner() -> &'static Mutex<Interner> {
    static INTERNER: OnceLock<Mutex<Interner>> = OnceLock::new();
    INTERNER.get_or_init(|| {
        // Registered alphabetically so id order matches name order for the
        // standard parameters; custom names follow in first-use order.
        let names = ["a", "b", "c", "d", "e", "f", "hbar", "lambda", "xi"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        Mutex::new(Interner { names })
    })
}

impl Param {
    pub fn new(name: &str) -> Param {
        let mut it = interner().lock().unwrap();
        if let Some(i) = it.names.iter().position(|n| n == name) {
            Param(i as u32)
        } else {
            it.names.push(name.to_string());
            Param((it.names.len() - 1) as u32)
        }
    }

    pub fn id(&self) -> u32 {
        self.0
    }

    pub fn name(&self) -> String {
        interner().lock().unwrap().names[self.0 as usize].clone()
    }

    pub fn hbar() -> Param {
        Param::new("hbar")
    }
}

/// Supported cyclotomic orders: minimal polynomials of degree at most 4.
pub const SUPPORTED_ORDERS: [u32; 7] = [1, 2, 3, 4, 6, 8, 12];

fn phi_degree(m: u32) -> u32 {
    match m {
        1 | 2 => 1,
        3 | 4 | 6 => 2,
        8 | 12 => 4,
        _ => unreachable!("unsupported cyclotomic order"),
    }
}

/// Rewrite of zeta^deg(Phi_m) in the power basis, as (exponent, coefficient).
fn phi_reduction(m: u32) -> &'static [(u32, i64)] {
    match m {
        1 => &[(0, 1)],           // zeta = 1
        2 => &[(0, -1)],          // zeta = -1
        3 => &[(1, -1), (0, -1)], // zeta^2 = -zeta - 1
        4 => &[(0, -1)],          // zeta^2 = -1
        6 => &[(1, 1), (0, -1)],  // zeta^2 = zeta - 1
        8 => &[(0, -1)],          // zeta^4 = -1
        12 => &[(2, 1), (0, -1)], // zeta^4 = zeta^2 - 1
        _ => unreachable!(),
    }
}

/// zeta^e reduced below deg(Phi_m): list of (exponent, small coefficient).
fn reduce_zeta_power(e: u32, m: u32) -> Vec<(u32, i64)> {
    let d = phi_degree(m);
    if m == 1 {
        return vec![(0, 1)];
    }
    let e = e % m; // zeta^m = 1
    if e < d {
        return vec![(e, 1)];
    }
    let red = phi_reduction(m);
    let mut cur = vec![0i64; d as usize];
    for &(i, c) in red {
        cur[i as usize] = c;
    }
    let mut p = d;
    while p < e {
        let top = cur[d as usize - 1];
        let mut next = vec![0i64; d as usize];
        for i in (1..d as usize).rev() {
            next[i] = cur[i - 1];
        }
        if top != 0 {
            for &(i, c) in red {
                next[i as usize] += top * c;
            }
        }
        cur = next;
        p += 1;
    }
    cur.iter().enumerate().filter(|(_, &c)| c != 0).map(|(i, &c)| (i as u32, c)).collect()
}

/// Monomial in the parameters and zeta. Ordered graded-lexicographically on
/// parameter ids (standard names pre-registered alphabetically), zeta last.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    /// Sorted by parameter id, exponents nonzero.
    pub params: Vec<(Param, u32)>,
    pub zeta: u32,
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial::default()
    }

    pub fn param(p: Param, e: u32) -> Monomial {
        if e == 0 {
            Monomial::one()
        } else {
            Monomial { params: vec![(p, e)], zeta: 0 }
        }
    }

    pub fn degree(&self) -> u32 {
        self.params.iter().map(|&(_, e)| e).sum()
    }

    fn mul(&self, other: &Monomial) -> (Vec<(Param, u32)>, u32) {
        let mut out: Vec<(Param, u32)> = Vec::with_capacity(self.params.len() + other.params.len());
        let (mut i, mut j) = (0, 0);
        while i < self.params.len() && j < other.params.len() {
            match self.params[i].0.cmp(&other.params[j].0) {
                Ordering::Less => {
                    out.push(self.params[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.params[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.params[i].0, self.params[i].1 + other.params[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.params[i..]);
        out.extend_from_slice(&other.params[j..]);
        (out, self.zeta + other.zeta)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| {
                let (mut i, mut j) = (0, 0);
                loop {
                    match (self.params.get(i), other.params.get(j)) {
                        (None, None) => return Ordering::Equal,
                        (None, Some(_)) => return Ordering::Less,
                        (Some(_), None) => return Ordering::Greater,
                        (Some(&(pa, ea)), Some(&(pb, eb))) => match pa.cmp(&pb) {
                            // the earlier parameter with a positive exponent dominates
                            Ordering::Less => return Ordering::Greater,
                            Ordering::Greater => return Ordering::Less,
                            Ordering::Equal => match ea.cmp(&eb) {
                                Ordering::Equal => {
                                    i += 1;
                                    j += 1;
                                }
                                o => return o,
                            },
                        },
                    }
                }
            })
            .then_with(|| self.zeta.cmp(&other.zeta))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Integer-coefficient polynomial in the parameters and zeta.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct IntPoly {
    pub terms: BTreeMap<Monomial, BigInt>,
}

impl IntPoly {
    pub fn zero() -> IntPoly {
        IntPoly::default()
    }

    pub fn constant(c: BigInt) -> IntPoly {
        let mut p = IntPoly::zero();
        if !c.is_zero() {
            p.terms.insert(Monomial::one(), c);
        }
        p
    }

    pub fn one() -> IntPoly {
        IntPoly::constant(BigInt::one())
    }

    pub fn param_mono(p: Param, e: u32) -> IntPoly {
        IntPoly { terms: [(Monomial::param(p, e), BigInt::one())].into_iter().collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> Option<&BigInt> {
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            if m.params.is_empty() && m.zeta == 0 {
                return Some(c);
            }
        }
        None
    }

    fn insert(&mut self, m: Monomial, c: BigInt) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &IntPoly) -> IntPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> IntPoly {
        IntPoly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn sub(&self, other: &IntPoly) -> IntPoly {
        self.add(&other.neg())
    }

    /// Product with zeta powers reduced modulo Phi_m.
    pub fn mul(&self, other: &IntPoly, order: u32) -> IntPoly {
        let mut out = IntPoly::zero();
        let d = phi_degree(order);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let (params, zeta) = ma.mul(mb);
                let c = ca * cb;
                if zeta < d {
                    out.insert(Monomial { params, zeta }, c);
                } else {
                    for (ze, zc) in reduce_zeta_power(zeta, order) {
                        out.insert(Monomial { params: params.clone(), zeta: ze }, &c * BigInt::from(zc));
                    }
                }
            }
        }
        out
    }

    fn has_zeta(&self) -> bool {
        self.terms.keys().any(|m| m.zeta != 0)
    }

    /// Lift from order m to order n (m divides n), reducing below deg(Phi_n).
    fn lift(&self, m: u32, n: u32) -> IntPoly {
        if m == n {
            return self.clone();
        }
        let k = n / m;
        let d = phi_degree(n);
        let mut out = IntPoly::zero();
        for (mon, c) in &self.terms {
            let e = mon.zeta * k;
            if e < d {
                out.insert(Monomial { params: mon.params.clone(), zeta: e }, c.clone());
            } else {
                for (ze, zc) in reduce_zeta_power(e, n) {
                    out.insert(Monomial { params: mon.params.clone(), zeta: ze }, c * BigInt::from(zc));
                }
            }
        }
        out
    }

    fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in self.terms.values() {
            g = g.gcd(c);
            if g.is_one() {
                break;
            }
        }
        g
    }

    fn div_int(&self, g: &BigInt) -> IntPoly {
        IntPoly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c / g)).collect() }
    }

    fn mul_int(&self, g: &BigInt) -> IntPoly {
        if g.is_zero() {
            return IntPoly::zero();
        }
        IntPoly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * g)).collect() }
    }

    /// Minimum exponent of each parameter (and zeta) across all terms.
    fn min_exponents(&self) -> (BTreeMap<Param, u32>, u32) {
        let mut mins: Option<BTreeMap<Param, u32>> = None;
        let mut zmin = u32::MAX;
        for m in self.terms.keys() {
            zmin = zmin.min(m.zeta);
            let cur: BTreeMap<Param, u32> = m.params.iter().cloned().collect();
            mins = Some(match mins {
                None => cur,
                Some(prev) => prev
                    .into_iter()
                    .filter_map(|(p, e)| cur.get(&p).map(|&e2| (p, e.min(e2))))
                    .collect(),
            });
        }
        (mins.unwrap_or_default(), if zmin == u32::MAX { 0 } else { zmin })
    }

    fn div_monomial(&self, mins: &BTreeMap<Param, u32>, zmin: u32) -> IntPoly {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let params: Vec<(Param, u32)> = m
                    .params
                    .iter()
                    .filter_map(|&(p, e)| {
                        let off = mins.get(&p).copied().unwrap_or(0);
                        if e > off {
                            Some((p, e - off))
                        } else {
                            None
                        }
                    })
                    .collect();
                (Monomial { params, zeta: m.zeta - zmin }, c.clone())
            })
            .collect();
        IntPoly { terms }
    }

    fn min_param_exponent(&self, p: Param) -> u32 {
        self.terms
            .keys()
            .map(|m| m.params.iter().find(|&&(q, _)| q == p).map(|&(_, e)| e).unwrap_or(0))
            .min()
            .unwrap_or(0)
    }

    fn leading_coeff_negative(&self) -> bool {
        self.terms.iter().next_back().map(|(_, c)| c.is_negative()).unwrap_or(false)
    }

    /// Evaluation at a fixed integer point (zeta treated as a variable).
    /// Exact divisibility of polynomials forces divisibility of evaluations,
    /// which makes this a cheap pre-filter for exact division.
    fn eval_probe(&self) -> BigInt {
        let mut acc = BigInt::zero();
        for (m, c) in &self.terms {
            let mut v = c.clone();
            for &(p, e) in &m.params {
                let base = BigInt::from(7 + 6 * (p.0 as i64 % 17));
                v *= num_traits::pow::pow(base, e as usize);
            }
            if m.zeta > 0 {
                v *= num_traits::pow::pow(BigInt::from(5), m.zeta as usize);
            }
            acc += v;
        }
        acc
    }

    /// Plain polynomial product with zeta treated as an ordinary variable
    /// (no cyclotomic reduction); used inside exact division.
    fn mul_raw(&self, other: &IntPoly) -> IntPoly {
        let mut out = IntPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let (params, zeta) = ma.mul(mb);
                out.insert(Monomial { params, zeta }, ca * cb);
            }
        }
        out
    }

    /// Exact division in the plain polynomial ring (zeta as a variable).
    /// Safe for fraction reduction: a quotient here leaves the value in the
    /// cyclotomic quotient ring unchanged.
    fn div_exact_raw(&self, rhs: &IntPoly) -> Option<IntPoly> {
        if rhs.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(IntPoly::zero());
        }
        let re = rhs.eval_probe();
        if !re.is_zero() && !(self.eval_probe() % &re).is_zero() {
            return None;
        }
        let (lead_m, lead_c) = rhs.terms.iter().next_back()?;
        let mut rem = self.clone();
        let mut quot = IntPoly::zero();
        while !rem.is_zero() {
            let (m, c) = rem.terms.iter().next_back().map(|(m, c)| (m.clone(), c.clone()))?;
            if m.zeta < lead_m.zeta {
                return None;
            }
            let mut qparams: Vec<(Param, u32)> = Vec::new();
            let mut j = 0;
            for &(p, e) in &m.params {
                if j < lead_m.params.len() && lead_m.params[j].0 == p {
                    let e2 = lead_m.params[j].1;
                    if e < e2 {
                        return None;
                    }
                    if e > e2 {
                        qparams.push((p, e - e2));
                    }
                    j += 1;
                } else {
                    qparams.push((p, e));
                }
            }
            if j < lead_m.params.len() {
                return None;
            }
            let (qc, qr) = c.div_rem(lead_c);
            if !qr.is_zero() {
                return None;
            }
            let qmono = Monomial { params: qparams, zeta: m.zeta - lead_m.zeta };
            let qterm = IntPoly { terms: [(qmono, qc)].into_iter().collect() };
            rem = rem.sub(&qterm.mul_raw(rhs));
            quot = quot.add(&qterm);
        }
        Some(quot)
    }

    /// Exact division with cyclotomic reduction respected: raw division,
    /// verified under reduction when the divisor carries zeta.
    fn try_div_exact(&self, rhs: &IntPoly, order: u32) -> Option<IntPoly> {
        if let Some(c) = rhs.is_constant() {
            let mut out = IntPoly::zero();
            for (m, v) in &self.terms {
                let (q, r) = v.div_rem(c);
                if !r.is_zero() {
                    return None;
                }
                out.terms.insert(m.clone(), q);
            }
            return Some(out);
        }
        let q = self.div_exact_raw(rhs)?;
        if rhs.has_zeta() && q.mul(rhs, order) != *self {
            return None;
        }
        Some(q)
    }
}

/// Denominator in factored form: a positive integer times a product of
/// primitive, sign-normalized, non-constant polynomial factors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct FactoredDen {
    int: BigInt,
    /// Sorted by factor polynomial; exponents positive.
    factors: Vec<(IntPoly, u32)>,
}

impl FactoredDen {
    fn one() -> FactoredDen {
        FactoredDen { int: BigInt::one(), factors: Vec::new() }
    }

    fn is_one(&self) -> bool {
        self.int.is_one() && self.factors.is_empty()
    }

    fn expand(&self, order: u32) -> IntPoly {
        let mut out = IntPoly::constant(self.int.clone());
        for (f, e) in &self.factors {
            for _ in 0..*e {
                out = out.mul(f, order);
            }
        }
        out
    }

    fn mul_factor(&mut self, f: &IntPoly, e: u32) {
        if e == 0 {
            return;
        }
        match self.factors.binary_search_by(|(g, _)| g.cmp(f)) {
            Ok(i) => self.factors[i].1 += e,
            Err(i) => self.factors.insert(i, (f.clone(), e)),
        }
    }

    fn merge(&self, other: &FactoredDen) -> FactoredDen {
        let mut out = self.clone();
        out.int = &out.int * &other.int;
        for (f, e) in &other.factors {
            out.mul_factor(f, *e);
        }
        out
    }

    /// Factor-wise least common multiple with the complementary cofactors:
    /// returns (lcm, self-cofactor, other-cofactor) where
    /// lcm = self * self-cofactor = other * other-cofactor.
    fn lcm(&self, other: &FactoredDen) -> (FactoredDen, FactoredDen, FactoredDen) {
        let gi = self.int.gcd(&other.int);
        let mut lcm = FactoredDen { int: &self.int / &gi * &other.int, factors: Vec::new() };
        let mut co_self = FactoredDen { int: &other.int / &gi, factors: Vec::new() };
        let mut co_other = FactoredDen { int: &self.int / &gi, factors: Vec::new() };
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() || j < other.factors.len() {
            let pick = match (self.factors.get(i), other.factors.get(j)) {
                (Some((fa, ea)), Some((fb, eb))) => match fa.cmp(fb) {
                    Ordering::Equal => {
                        let m = (*ea).max(*eb);
                        lcm.mul_factor(fa, m);
                        co_self.mul_factor(fa, m - ea);
                        co_other.mul_factor(fa, m - eb);
                        i += 1;
                        j += 1;
                        None
                    }
                    Ordering::Less => Some(true),
                    Ordering::Greater => Some(false),
                },
                (Some(_), None) => Some(true),
                (None, Some(_)) => Some(false),
                (None, None) => None,
            };
            match pick {
                Some(true) => {
                    let (f, e) = &self.factors[i];
                    lcm.mul_factor(f, *e);
                    co_other.mul_factor(f, *e);
                    i += 1;
                }
                Some(false) => {
                    let (f, e) = &other.factors[j];
                    lcm.mul_factor(f, *e);
                    co_self.mul_factor(f, *e);
                    j += 1;
                }
                None => {}
            }
        }
        (lcm, co_self, co_other)
    }
}

/// Element of the coefficient field.
#[derive(Debug, Clone)]
pub struct Scalar {
    num: IntPoly,
    den: FactoredDen,
    order: u32,
}

/// Parameter bindings for specialization.
#[derive(Debug, Clone, Default)]
pub struct Bindings(pub BTreeMap<Param, Scalar>);

impl Bindings {
    pub fn new() -> Bindings {
        Bindings::default()
    }

    pub fn bind(mut self, name: &str, value: Scalar) -> Bindings {
        self.0.insert(Param::new(name), value);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Scalar {
    pub fn zero() -> Scalar {
        Scalar { num: IntPoly::zero(), den: FactoredDen::one(), order: 1 }
    }

    pub fn one() -> Scalar {
        Scalar { num: IntPoly::one(), den: FactoredDen::one(), order: 1 }
    }

    pub fn from_int(n: i64) -> Scalar {
        Scalar { num: IntPoly::constant(BigInt::from(n)), den: FactoredDen::one(), order: 1 }
    }

    pub fn from_bigint(n: BigInt) -> Scalar {
        Scalar { num: IntPoly::constant(n), den: FactoredDen::one(), order: 1 }
    }

    pub fn rational(p: i64, q: i64) -> Scalar {
        assert!(q != 0, "rational with zero denominator");
        let mut s = Scalar {
            num: IntPoly::constant(BigInt::from(p)),
            den: FactoredDen { int: BigInt::from(q), factors: Vec::new() },
            order: 1,
        };
        if s.den.int.is_negative() {
            s.den.int = -&s.den.int;
            s.num = s.num.neg();
        }
        s.normalize();
        s
    }

    pub fn param(name: &str) -> Scalar {
        Scalar {
            num: IntPoly::param_mono(Param::new(name), 1),
            den: FactoredDen::one(),
            order: 1,
        }
    }

    pub fn hbar() -> Scalar {
        Scalar::param("hbar")
    }

    /// Primitive m-th root of unity.
    pub fn zeta(m: u32) -> Result<Scalar> {
        if !SUPPORTED_ORDERS.contains(&m) {
            return Err(Error::UnsupportedCyclotomicOrder(m));
        }
        match m {
            1 => Ok(Scalar::one()),
            2 => Ok(Scalar::from_int(-1)),
            _ => {
                let mut s = Scalar {
                    num: IntPoly { terms: [(Monomial { params: vec![], zeta: 1 }, BigInt::one())].into_iter().collect() },
                    den: FactoredDen::one(),
                    order: m,
                };
                s.normalize();
                Ok(s)
            }
        }
    }

    /// sqrt(3) = zeta12 + zeta12^{-1} = 2*zeta12 - zeta12^3.
    pub fn sqrt3() -> Scalar {
        let z = Scalar::zeta(12).unwrap();
        &(&Scalar::from_int(2) * &z) - &z.pow_int(3)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_one() && self.num.is_constant().map(|c| c.is_one()).unwrap_or(false)
    }

    pub fn numerator(&self) -> &IntPoly {
        &self.num
    }

    /// Expanded denominator polynomial.
    pub fn denominator(&self) -> IntPoly {
        self.den.expand(self.order)
    }

    pub fn cyclo_order(&self) -> u32 {
        self.order
    }

    /// Rational value as (num, den) when parameter- and zeta-free.
    pub fn as_rational(&self) -> Option<(BigInt, BigInt)> {
        if self.num.is_zero() {
            return Some((BigInt::zero(), BigInt::one()));
        }
        if !self.den.factors.is_empty() {
            return None;
        }
        self.num.is_constant().map(|p| (p.clone(), self.den.int.clone()))
    }

    /// Insert a polynomial factor into the denominator, normalizing it:
    /// integer content and sign move into the fraction, monomial content
    /// splits off (zeta monomials are units and fold into the numerator).
    fn push_den_factor(&mut self, f: &IntPoly, e: u32) {
        if e == 0 {
            return;
        }
        let mut f = f.clone();
        assert!(!f.is_zero(), "zero denominator factor");
        // sign
        if f.leading_coeff_negative() {
            f = f.neg();
            if e % 2 == 1 {
                self.num = self.num.neg();
            }
        }
        // integer content
        let c = f.content();
        if !c.is_one() {
            f = f.div_int(&c);
            self.den.int *= num_traits::pow::pow(c, e as usize);
        }
        // monomial content
        let (mins, zmin) = f.min_exponents();
        if !mins.is_empty() || zmin > 0 {
            f = f.div_monomial(&mins, zmin);
            for (p, k) in mins {
                if k > 0 {
                    self.den.mul_factor(&IntPoly::param_mono(p, 1), k * e);
                }
            }
            if zmin > 0 {
                // zeta is a unit: 1/zeta^z = zeta^(m - z)
                let m = self.order;
                let inv_pow = (m - (zmin % m)) % m;
                let mut z = IntPoly::one();
                for _ in 0..(inv_pow * e) {
                    z = z.mul(
                        &IntPoly { terms: [(Monomial { params: vec![], zeta: 1 }, BigInt::one())].into_iter().collect() },
                        m,
                    );
                }
                self.num = self.num.mul(&z, m);
            }
        }
        if let Some(c) = f.is_constant() {
            debug_assert!(c.is_one());
            return;
        }
        self.den.mul_factor(&f, e);
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            *self = Scalar::zero();
            return;
        }
        // cancel denominator factors dividing the numerator
        let factors = std::mem::take(&mut self.den.factors);
        for (f, mut e) in factors {
            while e > 0 {
                match self.num.try_div_exact(&f, self.order) {
                    Some(q) => {
                        self.num = q;
                        e -= 1;
                    }
                    None => break,
                }
            }
            if e > 0 {
                self.den.mul_factor(&f, e);
            }
        }
        // numerator monomial content against pure monomial factors is already
        // covered by divisibility; integer content against the integer part
        let g = self.num.content().gcd(&self.den.int);
        if !g.is_one() {
            self.num = self.num.div_int(&g);
            self.den.int = &self.den.int / &g;
        }
        // minimize the cyclotomic order
        if self.order != 1 {
            if !self.num.has_zeta() && !self.den.factors.iter().any(|(f, _)| f.has_zeta()) {
                self.order = 1;
            } else {
                self.minimize_order();
            }
        }
    }

    /// Rewrite into the smallest supported cyclotomic field containing all
    /// stored polynomials.
    fn minimize_order(&mut self) {
        let m = self.order;
        for &d in SUPPORTED_ORDERS.iter() {
            if d >= m || m % d != 0 {
                continue;
            }
            let k = m / d;
            let fits = |p: &IntPoly| p.terms.keys().all(|mon| mon.zeta % k == 0 && mon.zeta / k < phi_degree(d));
            if fits(&self.num) && self.den.factors.iter().all(|(f, _)| fits(f)) {
                let shrink = |p: &IntPoly| IntPoly {
                    terms: p
                        .terms
                        .iter()
                        .map(|(mon, c)| (Monomial { params: mon.params.clone(), zeta: mon.zeta / k }, c.clone()))
                        .collect(),
                };
                self.num = shrink(&self.num);
                self.den.factors = self.den.factors.iter().map(|(f, e)| (shrink(f), *e)).collect();
                self.den.factors.sort_by(|(a, _), (b, _)| a.cmp(b));
                self.order = d;
                return;
            }
        }
    }

    fn lift_to(&self, n: u32) -> Scalar {
        if self.order == n {
            return self.clone();
        }
        let mut out = Scalar {
            num: self.num.lift(self.order, n),
            den: FactoredDen { int: self.den.int.clone(), factors: Vec::new() },
            order: n,
        };
        let factors = self.den.factors.clone();
        for (f, e) in factors {
            out.push_den_factor(&f.lift(self.order, n), e);
        }
        out
    }

    fn unify_orders(&self, other: &Scalar) -> Result<(Scalar, Scalar, u32)> {
        if self.order == other.order {
            return Ok((self.clone(), other.clone(), self.order));
        }
        let l = lcm_u32(self.order, other.order);
        if !SUPPORTED_ORDERS.contains(&l) {
            return Err(Error::UnsupportedCyclotomicOrder(l));
        }
        Ok((self.lift_to(l), other.lift_to(l), l))
    }

    pub fn try_add(&self, other: &Scalar) -> Result<Scalar> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        let (a, b, l) = self.unify_orders(other)?;
        let (den, co_a, co_b) = a.den.lcm(&b.den);
        let na = a.num.mul(&co_a.expand(l), l).mul_int(&co_a.int);
        let nb = b.num.mul(&co_b.expand(l), l).mul_int(&co_b.int);
        let mut s = Scalar { num: na.add(&nb), den, order: l };
        s.normalize();
        Ok(s)
    }

    pub fn try_sub(&self, other: &Scalar) -> Result<Scalar> {
        self.try_add(&other.neg_ref())
    }

    pub fn try_mul(&self, other: &Scalar) -> Result<Scalar> {
        if self.is_zero() || other.is_zero() {
            return Ok(Scalar::zero());
        }
        let (a, b, l) = self.unify_orders(other)?;
        let mut s = Scalar { num: a.num.mul(&b.num, l), den: a.den.merge(&b.den), order: l };
        s.normalize();
        Ok(s)
    }

    fn neg_ref(&self) -> Scalar {
        // negating the numerator preserves every invariant
        Scalar { num: self.num.neg(), den: self.den.clone(), order: self.order }
    }

    /// Multiplicative inverse.
    pub fn inv(&self) -> Result<Scalar> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut out = Scalar {
            num: IntPoly::constant(self.den.int.clone()),
            den: FactoredDen::one(),
            order: self.order,
        };
        for (f, e) in &self.den.factors {
            for _ in 0..*e {
                out.num = out.num.mul(f, self.order);
            }
        }
        out.push_den_factor(&self.num, 1);
        out.normalize();
        Ok(out)
    }

    pub fn try_div(&self, other: &Scalar) -> Result<Scalar> {
        self.try_mul(&other.inv()?)
    }

    pub fn pow_int(&self, e: u32) -> Scalar {
        let mut out = Scalar::one();
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    /// Field equality by cross-multiplication of expanded forms.
    pub fn eq_scalar(&self, other: &Scalar) -> bool {
        if self.order == other.order && self.num == other.num && self.den == other.den {
            return true;
        }
        match self.unify_orders(other) {
            Ok((a, b, l)) => {
                a.num.mul(&b.den.expand(l), l).mul_int(&b.den.int)
                    == b.num.mul(&a.den.expand(l), l).mul_int(&a.den.int)
            }
            // no supported common field: shared subfields were already
            // exposed by order minimization, so the values differ
            Err(_) => false,
        }
    }

    /// Substitute bound parameters; untouched parameters survive.
    pub fn specialize(&self, bindings: &Bindings) -> Result<Scalar> {
        let n = eval_poly(&self.num, self.order, bindings)?;
        let mut d = Scalar::from_bigint(self.den.int.clone());
        for (f, e) in &self.den.factors {
            let fe = eval_poly(f, self.order, bindings)?;
            if fe.is_zero() {
                return Err(Error::PoleAtSpecialization(PolyDisplay(f, self.order).to_string()));
            }
            d = d.try_mul(&fe.pow_int(*e))?;
        }
        if d.is_zero() {
            return Err(Error::PoleAtSpecialization(self.to_string()));
        }
        n.try_div(&d)
    }

    /// Valuation at a parameter: minimum exponent in the numerator minus the
    /// denominator's. Zero scalar has no valuation.
    pub fn param_valuation(&self, p: Param) -> Option<i64> {
        if self.is_zero() {
            return None;
        }
        let den_val: i64 = self
            .den
            .factors
            .iter()
            .map(|(f, e)| f.min_param_exponent(p) as i64 * *e as i64)
            .sum();
        Some(self.num.min_param_exponent(p) as i64 - den_val)
    }

    /// Exact division by a parameter; cancellation happens in normalize when
    /// the numerator is divisible.
    pub fn div_param(&self, p: Param) -> Scalar {
        let mut s = self.clone();
        s.push_den_factor(&IntPoly::param_mono(p, 1), 1);
        s.normalize();
        s
    }

    /// Parameters occurring in this scalar.
    pub fn params(&self) -> Vec<Param> {
        let mut out: Vec<Param> = Vec::new();
        let mut scan = |poly: &IntPoly| {
            for mon in poly.terms.keys() {
                for &(p, _) in &mon.params {
                    if !out.contains(&p) {
                        out.push(p);
                    }
                }
            }
        };
        scan(&self.num);
        for (f, _) in &self.den.factors {
            scan(f);
        }
        out.sort();
        out
    }
}

fn lcm_u32(a: u32, b: u32) -> u32 {
    a / gcd_u32(a, b) * b
}

fn gcd_u32(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd_u32(b, a % b)
    }
}

fn eval_poly(p: &IntPoly, order: u32, bindings: &Bindings) -> Result<Scalar> {
    let mut acc = Scalar::zero();
    for (mon, c) in &p.terms {
        let mut residual: Vec<(Param, u32)> = Vec::new();
        let mut factor = Scalar::from_bigint(c.clone());
        for &(q, e) in &mon.params {
            match bindings.0.get(&q) {
                Some(v) => factor = factor.try_mul(&v.pow_int(e))?,
                None => residual.push((q, e)),
            }
        }
        let term = Scalar {
            num: IntPoly {
                terms: [(Monomial { params: residual, zeta: mon.zeta }, BigInt::one())].into_iter().collect(),
            },
            den: FactoredDen::one(),
            order,
        };
        acc = acc.try_add(&factor.try_mul(&term)?)?;
    }
    Ok(acc)
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.eq_scalar(other)
    }
}

impl Eq for Scalar {}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident, $try:ident, $what:literal) => {
        impl $trait for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                self.$try(rhs).unwrap_or_else(|e| panic!(concat!("scalar ", $what, ": {}"), e))
            }
        }
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
    };
}

scalar_binop!(Add, add, try_add, "addition");
scalar_binop!(Sub, sub, try_sub, "subtraction");
scalar_binop!(Mul, mul, try_mul, "multiplication");
scalar_binop!(Div, div, try_div, "division");

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        self.neg_ref()
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        self.neg_ref()
    }
}

fn fmt_poly(p: &IntPoly, order: u32, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if p.is_zero() {
        return write!(f, "0");
    }
    for (i, (mon, c)) in p.terms.iter().rev().enumerate() {
        let neg = c.is_negative();
        let abs = c.abs();
        if i == 0 {
            if neg {
                write!(f, "-")?;
            }
        } else if neg {
            write!(f, " - ")?;
        } else {
            write!(f, " + ")?;
        }
        let mut factors: Vec<String> = Vec::new();
        if !abs.is_one() || (mon.params.is_empty() && mon.zeta == 0) {
            factors.push(abs.to_string());
        }
        for &(q, e) in &mon.params {
            if e == 1 {
                factors.push(q.name());
            } else {
                factors.push(format!("{}^{}", q.name(), e));
            }
        }
        if mon.zeta > 0 {
            if mon.zeta == 1 {
                factors.push(format!("zeta{order}"));
            } else {
                factors.push(format!("zeta{order}^{}", mon.zeta));
            }
        }
        write!(f, "{}", factors.join("*"))?;
    }
    Ok(())
}

/// An `IntPoly` rendered at a given cyclotomic order.
pub struct PolyDisplay<'a>(pub &'a IntPoly, pub u32);

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_poly(self.0, self.1, f)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            if self.num.terms.len() > 1 && f.alternate() {
                write!(f, "(")?;
                fmt_poly(&self.num, self.order, f)?;
                write!(f, ")")
            } else {
                fmt_poly(&self.num, self.order, f)
            }
        } else {
            write!(f, "(")?;
            fmt_poly(&self.num, self.order, f)?;
            write!(f, ")/(")?;
            let mut first = true;
            if !self.den.int.is_one() {
                write!(f, "{}", self.den.int)?;
                first = false;
            }
            for (poly, e) in &self.den.factors {
                if !first {
                    write!(f, "*")?;
                }
                first = false;
                write!(f, "(")?;
                fmt_poly(poly, self.order, f)?;
                write!(f, ")")?;
                if *e > 1 {
                    write!(f, "^{e}")?;
                }
            }
            write!(f, ")")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hb() -> Scalar {
        Scalar::hbar()
    }

    #[test]
    fn inverse_law() {
        // (2 + lambda*hbar) * inv(2 + lambda*hbar) = 1
        let u = &Scalar::from_int(2) + &(&Scalar::param("lambda") * &hb());
        assert!((&u * &u.inv().unwrap()).is_one());
    }

    #[test]
    fn zeta4_squares_to_minus_one() {
        let z = Scalar::zeta(4).unwrap();
        assert_eq!(&z * &z, Scalar::from_int(-1));
    }

    #[test]
    fn cross_multiplication_sum() {
        // (1-h)/(1+h) + 2h/(1+h) = 1
        let one = Scalar::one();
        let den = &one + &hb();
        let a = &(&one - &hb()) / &den;
        let b = &(&Scalar::from_int(2) * &hb()) / &den;
        assert!((&a + &b).is_one());
    }

    #[test]
    fn factorization_identity() {
        // (1-h^2)/(1+h) = 1-h
        let one = Scalar::one();
        let h2 = &hb() * &hb();
        let lhs = &(&one - &h2) / &(&one + &hb());
        assert_eq!(lhs, &one - &hb());
        assert!(!hb().eq_scalar(&Scalar::zero()));
    }

    #[test]
    fn square_of_inverse() {
        // 1/(2-h) * 1/(2-h) = 1/(4-4h+h^2)
        let d = &Scalar::from_int(2) - &hb();
        let lhs = &d.inv().unwrap() * &d.inv().unwrap();
        let four = Scalar::from_int(4);
        let rhs = (&(&four - &(&four * &hb())) + &(&hb() * &hb())).inv().unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn inv_zero_fails() {
        assert_eq!(Scalar::zero().inv(), Err(Error::DivisionByZero));
    }

    #[test]
    fn long_sums_stay_small() {
        // sums over a shared factored denominator must not compound
        let h = hb();
        let l = Scalar::param("lambda");
        let a = &Scalar::from_int(2) + &(&l * &h);
        let b = &Scalar::from_int(2) - &(&l * &h);
        let mut acc = Scalar::zero();
        for k in 1..=8u32 {
            let num = &a.pow_int(k) + &(&h * &b.pow_int(k / 2));
            let den = &a.pow_int(8 - k) * &b.pow_int(k);
            acc = &acc + &(&num / &den);
        }
        let s = acc.to_string();
        assert!(s.len() < 4000, "denominators compounded: {} chars", s.len());
        assert!((&acc * &acc.inv().unwrap()).is_one());
    }

    #[test]
    fn specialize_examples() {
        let one = Scalar::one();
        let s = &(&one - &hb()) / &(&one + &hb());
        let b = Bindings::new().bind("hbar", Scalar::from_int(1));
        assert!(s.specialize(&b).unwrap().is_zero());

        let pole = (&one + &hb()).inv().unwrap();
        let b = Bindings::new().bind("hbar", Scalar::from_int(-1));
        assert!(matches!(pole.specialize(&b), Err(Error::PoleAtSpecialization(_))));

        // 2h/(2 + lambda h) at h=1, lambda=2 -> 1/2
        let num = &Scalar::from_int(2) * &hb();
        let den = &Scalar::from_int(2) + &(&Scalar::param("lambda") * &hb());
        let s = &num / &den;
        let b = Bindings::new().bind("hbar", Scalar::from_int(1)).bind("lambda", Scalar::from_int(2));
        assert_eq!(s.specialize(&b).unwrap(), Scalar::rational(1, 2));
    }

    #[test]
    fn zeta_orders() {
        for m in SUPPORTED_ORDERS {
            let z = Scalar::zeta(m).unwrap();
            assert!(z.pow_int(m).is_one(), "zeta{m}^{m} != 1");
            for k in 1..m {
                assert!(!z.pow_int(k).is_one(), "zeta{m}^{k} == 1 (not primitive)");
            }
        }
        assert!(matches!(Scalar::zeta(5), Err(Error::UnsupportedCyclotomicOrder(5))));
        assert!(matches!(Scalar::zeta(24), Err(Error::UnsupportedCyclotomicOrder(24))));
    }

    #[test]
    fn sqrt3_squares_to_three() {
        let s = Scalar::sqrt3();
        assert_eq!(&s * &s, Scalar::from_int(3));
    }

    #[test]
    fn mixed_orders() {
        // zeta3 * zeta4 lives in order 12; zeta8 + zeta3 is unsupported
        let z3 = Scalar::zeta(3).unwrap();
        let z4 = Scalar::zeta(4).unwrap();
        let prod = z3.try_mul(&z4).unwrap();
        assert_eq!(prod.cyclo_order(), 12);
        assert!(prod.pow_int(12).is_one());
        let z8 = Scalar::zeta(8).unwrap();
        assert!(matches!(z8.try_add(&z3), Err(Error::UnsupportedCyclotomicOrder(24))));
    }

    #[test]
    fn order_minimization() {
        // zeta8^2 = i should compare equal to zeta4
        let z8 = Scalar::zeta(8).unwrap();
        let i1 = z8.pow_int(2);
        assert_eq!(i1.cyclo_order(), 4);
        assert_eq!(i1, Scalar::zeta(4).unwrap());
        // zeta12^3 = i as well, across representations
        let z12 = Scalar::zeta(12).unwrap();
        assert_eq!(z12.pow_int(3), Scalar::zeta(4).unwrap());
    }

    #[test]
    fn zeta_in_denominator() {
        // 1/zeta3 = zeta3^2
        let z = Scalar::zeta(3).unwrap();
        assert_eq!(z.inv().unwrap(), z.pow_int(2));
        // (1+hbar)/(zeta4) = -zeta4*(1+hbar)
        let num = &Scalar::one() + &hb();
        let z4 = Scalar::zeta(4).unwrap();
        let s = &num / &z4;
        assert_eq!(s, &(&-&z4 * &num).pow_int(1));
    }

    #[test]
    fn valuation_and_div_param() {
        let h = Param::hbar();
        let one = Scalar::one();
        // (2h + h^2)/(1+h): valuation 1
        let num = &(&Scalar::from_int(2) * &hb()) + &(&hb() * &hb());
        let s = &num / &(&one + &hb());
        assert_eq!(s.param_valuation(h), Some(1));
        let t = s.div_param(h);
        assert_eq!(t.param_valuation(h), Some(0));
        let at0 = t.specialize(&Bindings::new().bind("hbar", Scalar::zero())).unwrap();
        assert_eq!(at0, Scalar::from_int(2));
    }

    #[test]
    fn display_is_deterministic() {
        let s = &(&Scalar::one() - &hb()) / &(&Scalar::one() + &hb());
        assert_eq!(s.to_string(), "(-hbar + 1)/(hbar + 1)");
        assert_eq!(Scalar::rational(-1, 2).to_string(), "(-1)/(2)");
        assert_eq!(Scalar::from_int(7).to_string(), "7");
        let q = &Scalar::from_int(8) * &hb() / (&(&Scalar::from_int(2) + &hb()) * &(&Scalar::from_int(2) + &hb()));
        assert_eq!(q.to_string(), "(8*hbar)/((hbar + 2)^2)");
    }
}
