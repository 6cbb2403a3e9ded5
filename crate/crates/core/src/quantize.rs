//! The noncommutative engine: quantized rewrite rules derived from structure
//! constants, PBW normal forms computed through exact per-degree
//! multiplication operators, commutators and basis enumeration.
//!
//! Normal forms are not computed by naive term rewriting. For a generator g
//! and a normal word V, `nf(y_g V)` is treated as an unknown whenever
//! g > head(V); collecting all unknowns of one degree gives a linear system
//! over the normal basis which is solved exactly and cached. Rules whose
//! right-hand sides are not deg-lex smaller are handled uniformly this way,
//! and a PBW failure shows up as a singular system instead of a diverging
//! rewrite.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::poisson::StructureConstants;
use crate::scalar::{Bindings, Scalar};

/// Word in the letters 1,2,3; ordered by length first, then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn empty() -> Word {
        Word(Vec::new())
    }

    pub fn letter(g: u8) -> Word {
        Word(vec![g])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Letters never decrease left to right.
    pub fn is_normal(&self) -> bool {
        self.0.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Exponent triple of a normal word.
    pub fn exponents(&self) -> [u16; 3] {
        let mut e = [0u16; 3];
        for &g in &self.0 {
            e[g as usize - 1] += 1;
        }
        e
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let mut i = 0;
        let mut first = true;
        while i < self.0.len() {
            let g = self.0[i];
            let mut j = i;
            while j < self.0.len() && self.0[j] == g {
                j += 1;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if j - i == 1 {
                write!(f, "y{g}")?;
            } else {
                write!(f, "y{g}^{}", j - i)?;
            }
            i = j;
        }
        Ok(())
    }
}

/// Noncommutative polynomial: formal sum of words with scalar coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NCPoly {
    pub terms: BTreeMap<Word, Scalar>,
}

impl NCPoly {
    pub fn zero() -> NCPoly {
        NCPoly::default()
    }

    pub fn one() -> NCPoly {
        NCPoly::word(Word::empty(), Scalar::one())
    }

    /// The generator `y_i`, 1-based.
    pub fn var(i: usize) -> NCPoly {
        assert!((1..=3).contains(&i));
        NCPoly::word(Word::letter(i as u8), Scalar::one())
    }

    pub fn word(w: Word, c: Scalar) -> NCPoly {
        let mut p = NCPoly::zero();
        p.insert(w, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn insert(&mut self, w: Word, c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(w) {
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

    pub fn add(&self, other: &NCPoly) -> NCPoly {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.insert(w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &NCPoly) -> NCPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> NCPoly {
        NCPoly { terms: self.terms.iter().map(|(w, c)| (w.clone(), -c)).collect() }
    }

    pub fn scale(&self, c: &Scalar) -> NCPoly {
        if c.is_zero() {
            return NCPoly::zero();
        }
        NCPoly { terms: self.terms.iter().map(|(w, v)| (w.clone(), v * c)).collect() }
    }

    /// Free product: concatenates words, preserving order.
    pub fn mul(&self, other: &NCPoly) -> NCPoly {
        let mut out = NCPoly::zero();
        for (wa, ca) in &self.terms {
            for (wb, cb) in &other.terms {
                out.insert(wa.concat(wb), ca * cb);
            }
        }
        out
    }

    pub fn is_normal(&self) -> bool {
        self.terms.keys().all(Word::is_normal)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    pub fn homogeneous_degree(&self) -> Option<usize> {
        let mut deg = None;
        for w in self.terms.keys() {
            match deg {
                None => deg = Some(w.len()),
                Some(d) if d != w.len() => return None,
                _ => {}
            }
        }
        deg.or(Some(0))
    }

    pub fn coeff(&self, w: &Word) -> Scalar {
        self.terms.get(w).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn specialize(&self, b: &Bindings) -> Result<NCPoly> {
        let mut out = NCPoly::zero();
        for (w, c) in &self.terms {
            out.insert(w.clone(), c.specialize(b)?);
        }
        Ok(out)
    }

    pub fn pow(&self, n: u16) -> NCPoly {
        let mut out = NCPoly::one();
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }
}

impl fmt::Display for NCPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (w, c) in self.terms.iter().rev() {
            let mut term = if c.is_one() && !w.is_empty() {
                w.to_string()
            } else if w.is_empty() {
                format!("{c:#}")
            } else {
                format!("{c:#}*{w}")
            };
            if first {
                first = false;
            } else if let Some(rest) = term.strip_prefix('-') {
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

/// All normal words of a given degree in graded-lexicographic order.
pub fn basis(degree: usize) -> Vec<Word> {
    if degree == 0 {
        return vec![Word::empty()];
    }
    let mut out = Vec::with_capacity((degree + 1) * (degree + 2) / 2);
    let mut w = vec![1u8; degree];
    loop {
        out.push(Word(w.clone()));
        // next non-decreasing word in lex order
        match w.iter().rposition(|&g| g < 3) {
            None => break,
            Some(i) => {
                let g = w[i] + 1;
                for slot in w.iter_mut().skip(i) {
                    *slot = g;
                }
            }
        }
    }
    out
}

/// The quantized algebra's rewrite system: three degree-2 rules plus cached
/// per-degree left-multiplication operators over the normal bases.
#[derive(Debug, Clone)]
pub struct RewriteSystem {
    /// Normal forms of the descent words (2,1), (3,1), (3,2), in that order.
    rules: [NCPoly; 3],
    /// ops[d-1] maps (generator, normal word of degree d) to the normal form
    /// of the product, degree d+1.
    ops: Vec<HashMap<(u8, Word), NCPoly>>,
    maxdeg: usize,
}

fn rule_index(j: u8, i: u8) -> usize {
    match (j, i) {
        (2, 1) => 0,
        (3, 1) => 1,
        (3, 2) => 2,
        _ => panic!("not a descent pair: ({j},{i})"),
    }
}

impl RewriteSystem {
    /// Solve the degree-2 relation system for the three descent words and
    /// build multiplication operators for words up to `maxdeg`.
    ///
    /// For each bracket pair the relation `[y_i,y_j] = (hbar/2) sum c (y_k y_l
    /// + y_l y_k)` is rewritten over the six ordered words plus the three
    /// descent unknowns, and the resulting 3x3 system is solved exactly.
    pub fn derive(constants: &StructureConstants, maxdeg: usize) -> Result<RewriteSystem> {
        let hbar_half = Scalar::hbar() * Scalar::rational(1, 2);
        let mut mat = [
            [Scalar::zero(), Scalar::zero(), Scalar::zero()],
            [Scalar::zero(), Scalar::zero(), Scalar::zero()],
            [Scalar::zero(), Scalar::zero(), Scalar::zero()],
        ];
        let mut rhs = [NCPoly::zero(), NCPoly::zero(), NCPoly::zero()];
        // (pair, sign, descent unknown, ascending word)
        let layout: [((u8, u8), i64, (u8, u8), (u8, u8)); 3] =
            [((1, 2), -1, (2, 1), (1, 2)), ((2, 3), -1, (3, 2), (2, 3)), ((3, 1), 1, (3, 1), (1, 3))];
        for (pair, sign, desc, asc) in layout {
            let row = rule_index(desc.0, desc.1);
            mat[row][row] = Scalar::one();
            let sgn = Scalar::from_int(sign);
            rhs[row].insert(Word(vec![asc.0, asc.1]), Scalar::one());
            if let Some(cs) = constants.get(&pair) {
                for (&(k, l), c) in cs {
                    let coef = &(&sgn * &hbar_half) * c;
                    if k == l {
                        rhs[row].insert(Word(vec![k, k]), &coef * &Scalar::from_int(2));
                    } else {
                        rhs[row].insert(Word(vec![k, l]), coef.clone());
                        // the reversed word y_l y_k is the unknown u_{lk}
                        let col = rule_index(l, k);
                        mat[row][col] = &mat[row][col] - &coef;
                    }
                }
            }
        }
        // exact 3x3 Gaussian elimination with NCPoly right-hand sides
        for i in 0..3 {
            if mat[i][i].is_zero() {
                let swap = (i + 1..3).find(|&r| !mat[r][i].is_zero()).ok_or(Error::SingularRelationSystem)?;
                mat.swap(i, swap);
                rhs.swap(i, swap);
            }
            let inv = mat[i][i].inv().map_err(|_| Error::SingularRelationSystem)?;
            for k in 0..3 {
                mat[i][k] = &mat[i][k] * &inv;
            }
            rhs[i] = rhs[i].scale(&inv);
            for j in 0..3 {
                if j == i || mat[j][i].is_zero() {
                    continue;
                }
                let f = mat[j][i].clone();
                for k in 0..3 {
                    mat[j][k] = &mat[j][k] - &(&f * &mat[i][k]);
                }
                rhs[j] = rhs[j].sub(&rhs[i].scale(&f));
            }
        }
        let rules = [rhs[0].clone(), rhs[1].clone(), rhs[2].clone()];
        for r in &rules {
            debug_assert!(r.is_normal());
        }
        let mut rs = RewriteSystem { rules, ops: Vec::new(), maxdeg };
        rs.build_ops()?;
        Ok(rs)
    }

    /// Commutative sort rules (all structure constants zero).
    pub fn commutative(maxdeg: usize) -> RewriteSystem {
        RewriteSystem::derive(&StructureConstants::new(), maxdeg).expect("commutative rules")
    }

    pub fn maxdeg(&self) -> usize {
        self.maxdeg
    }

    /// Rewrite rule for the descent pair (j, i), j > i.
    pub fn rule(&self, j: u8, i: u8) -> &NCPoly {
        &self.rules[rule_index(j, i)]
    }

    fn build_ops(&mut self) -> Result<()> {
        let mut deg1 = HashMap::new();
        for g in 1..=3u8 {
            for v in 1..=3u8 {
                let nf = if g <= v {
                    NCPoly::word(Word(vec![g, v]), Scalar::one())
                } else {
                    self.rule(g, v).clone()
                };
                deg1.insert((g, Word::letter(v)), nf);
            }
        }
        self.ops.push(deg1);
        for d in 2..self.maxdeg {
            let ops = self.solve_degree(d)?;
            self.ops.push(ops);
        }
        Ok(())
    }

    /// Build the degree-d operators from the degree-(d-1) ones by solving the
    /// linear system over the descent unknowns of this degree.
    ///
    /// The dependency graph between unknowns is almost a DAG: most entries
    /// follow by direct substitution, and the genuine cycles (self-references
    /// like the `(1 - hbar^2) * unknown = known` pattern) form tiny strongly
    /// connected blocks. Solving block by block in topological order keeps
    /// coefficients in the same denominators the rules use instead of mixing
    /// unrelated rows.
    fn solve_degree(&self, d: usize) -> Result<HashMap<(u8, Word), NCPoly>> {
        let mut ops = HashMap::new();
        let words = basis(d);
        let mut unknowns: Vec<(u8, Word)> = Vec::new();
        for v in &words {
            for g in 1..=3u8 {
                if g <= v.0[0] {
                    let mut w = vec![g];
                    w.extend_from_slice(&v.0);
                    ops.insert((g, v.clone()), NCPoly::word(Word(w), Scalar::one()));
                } else {
                    unknowns.push((g, v.clone()));
                }
            }
        }
        let n = unknowns.len();
        let index: HashMap<(u8, Word), usize> =
            unknowns.iter().cloned().enumerate().map(|(i, u)| (u, i)).collect();
        // equation r: X_r = K_r + sum deps[r] coeff * X_col
        let mut deps: Vec<BTreeMap<usize, Scalar>> = vec![BTreeMap::new(); n];
        let mut known: Vec<NCPoly> = vec![NCPoly::zero(); n];
        for (r, (g, v)) in unknowns.iter().enumerate() {
            let h = v.0[0];
            let tail = Word(v.0[1..].to_vec());
            for (m, c) in &self.rule(*g, h).terms {
                let (u, w2) = (m.0[0], m.0[1]);
                // nf(y_{w2} * tail) is known from the previous degree
                let prev = self.apply_gen_word(w2, &tail);
                for (nw, e) in &prev.terms {
                    let coef = c * e;
                    if u <= nw.0[0] {
                        let mut full = vec![u];
                        full.extend_from_slice(&nw.0);
                        known[r].insert(Word(full), coef);
                    } else {
                        let col = index[&(u, nw.clone())];
                        let entry = deps[r].entry(col).or_insert_with(Scalar::zero);
                        *entry = &*entry + &coef;
                        if entry.is_zero() {
                            deps[r].remove(&col);
                        }
                    }
                }
            }
        }
        let mut solutions: Vec<Option<NCPoly>> = vec![None; n];
        for block in condensation_order(&deps) {
            if block.len() == 1 && !deps[block[0]].contains_key(&block[0]) {
                let r = block[0];
                let mut sol = known[r].clone();
                for (col, c) in &deps[r] {
                    let dep = solutions[*col].as_ref().expect("dependency solved first");
                    sol = sol.add(&dep.scale(c));
                }
                solutions[r] = Some(sol);
                continue;
            }
            // small cyclic block: substitute solved outside references, then
            // eliminate within the block
            let pos: HashMap<usize, usize> = block.iter().enumerate().map(|(i, &r)| (r, i)).collect();
            let m = block.len();
            let mut mat: Vec<BTreeMap<usize, Scalar>> = vec![BTreeMap::new(); m];
            let mut rhs: Vec<NCPoly> = Vec::with_capacity(m);
            for (i, &r) in block.iter().enumerate() {
                mat[i].insert(i, Scalar::one());
                let mut k = known[r].clone();
                for (col, c) in &deps[r] {
                    match pos.get(col) {
                        Some(&j) => {
                            let entry = mat[i].entry(j).or_insert_with(Scalar::zero);
                            *entry = &*entry - c;
                            if entry.is_zero() {
                                mat[i].remove(&j);
                            }
                        }
                        None => {
                            let dep = solutions[*col].as_ref().expect("dependency solved first");
                            k = k.add(&dep.scale(c));
                        }
                    }
                }
                rhs.push(k);
            }
            for i in 0..m {
                if mat[i].get(&i).map(Scalar::is_zero).unwrap_or(true) {
                    let swap = (i + 1..m)
                        .find(|&r| mat[r].get(&i).map(|s| !s.is_zero()).unwrap_or(false))
                        .ok_or(Error::SingularDegreeSystem { degree: d + 1 })?;
                    mat.swap(i, swap);
                    rhs.swap(i, swap);
                }
                let inv = mat[i][&i].inv().map_err(|_| Error::SingularDegreeSystem { degree: d + 1 })?;
                mat[i] = mat[i].iter().map(|(c, v)| (*c, v * &inv)).filter(|(_, v)| !v.is_zero()).collect();
                rhs[i] = rhs[i].scale(&inv);
                let prow = mat[i].clone();
                let prhs = rhs[i].clone();
                for j in 0..m {
                    if j == i {
                        continue;
                    }
                    let f = match mat[j].get(&i) {
                        Some(v) if !v.is_zero() => v.clone(),
                        _ => continue,
                    };
                    for (c, v) in &prow {
                        let entry = mat[j].entry(*c).or_insert_with(Scalar::zero);
                        *entry = &*entry - &(&f * v);
                        if entry.is_zero() {
                            mat[j].remove(c);
                        }
                    }
                    rhs[j] = rhs[j].sub(&prhs.scale(&f));
                }
            }
            for (i, &r) in block.iter().enumerate() {
                solutions[r] = Some(rhs[i].clone());
            }
        }
        for (r, key) in unknowns.into_iter().enumerate() {
            ops.insert(key, solutions[r].take().expect("all unknowns solved"));
        }
        Ok(ops)
    }

    /// nf(y_g * w) for a normal word w, from the cache.
    pub(crate) fn apply_gen_word(&self, g: u8, w: &Word) -> NCPoly {
        if w.is_empty() {
            return NCPoly::word(Word::letter(g), Scalar::one());
        }
        let d = w.len();
        assert!(
            d <= self.ops.len(),
            "word degree {} beyond operator cache (maxdeg {})",
            d + 1,
            self.maxdeg
        );
        self.ops[d - 1][&(g, w.clone())].clone()
    }

    /// nf(y_g * p) for a normal polynomial p.
    pub fn apply_gen(&self, g: u8, p: &NCPoly) -> NCPoly {
        let mut out = NCPoly::zero();
        for (w, c) in &p.terms {
            for (w2, c2) in &self.apply_gen_word(g, w).terms {
                out.insert(w2.clone(), c * c2);
            }
        }
        out
    }

    /// nf of a single word, folding the letters from the right.
    pub fn normal_form_word(&self, w: &Word) -> NCPoly {
        if w.is_normal() {
            return NCPoly::word(w.clone(), Scalar::one());
        }
        let mut p = NCPoly::one();
        for &g in w.0.iter().rev() {
            p = self.apply_gen(g, &p);
        }
        p
    }

    /// PBW normal form. Linear, idempotent, and the identity on normal input.
    ///
    /// Panics if the input degree exceeds the cache cap the system was built
    /// with; construct with a larger `maxdeg` for deeper words.
    pub fn normal_form(&self, p: &NCPoly) -> NCPoly {
        let mut out = NCPoly::zero();
        for (w, c) in &p.terms {
            if w.is_normal() {
                out.insert(w.clone(), c.clone());
            } else {
                for (w2, c2) in &self.normal_form_word(w).terms {
                    out.insert(w2.clone(), c * c2);
                }
            }
        }
        out
    }

    /// nf(f*g - g*f).
    pub fn commutator(&self, f: &NCPoly, g: &NCPoly) -> NCPoly {
        self.normal_form(&f.mul(g).sub(&g.mul(f)))
    }

    /// nf(f*g).
    pub fn nf_mul(&self, f: &NCPoly, g: &NCPoly) -> NCPoly {
        self.normal_form(&f.mul(g))
    }

    /// nf(g1^a * g2^b * g3^c) with intermediate normalization.
    pub fn nf_monomial(&self, gens: &[NCPoly; 3], exps: [u16; 3]) -> NCPoly {
        let mut out = NCPoly::one();
        for (i, &e) in exps.iter().enumerate() {
            for _ in 0..e {
                out = self.nf_mul(&out, &gens[i]);
            }
        }
        out
    }

    /// Specialize every rule coefficient (rejecting vanishing denominators)
    /// and rebuild the operator caches at the bound values.
    pub fn specialize(&self, b: &Bindings) -> Result<RewriteSystem> {
        let rules =
            [self.rules[0].specialize(b)?, self.rules[1].specialize(b)?, self.rules[2].specialize(b)?];
        let mut rs = RewriteSystem { rules, ops: Vec::new(), maxdeg: self.maxdeg };
        rs.build_ops()?;
        Ok(rs)
    }

    /// Consistency report: the overlap word reduced along both bracketings,
    /// associativity on a deterministic sample of word triples, and
    /// per-degree dimension counts.
    pub fn pbw_consistency(&self, maxdeg: usize, seed: u64) -> Result<PbwReport> {
        assert!((3..=self.maxdeg).contains(&maxdeg), "pbw_consistency needs 3 <= maxdeg <= cache cap");
        // (a) overlap y3 y2 y1 both ways
        let left = self.normal_form(&NCPoly::var(3).mul(self.rule(2, 1)));
        let right = self.normal_form(&self.rule(3, 2).mul(&NCPoly::var(1)));
        if left != right {
            return Err(Error::PbwViolation(format!("overlap y3*y2*y1: {left} vs {right}")));
        }
        // (b) associativity nf(nf(u v) w) = nf(u nf(v w)) on sampled triples
        let mut pool: Vec<Word> = Vec::new();
        fn gen_words(len: usize, cur: &mut Vec<u8>, out: &mut Vec<Word>) {
            if cur.len() == len {
                out.push(Word(cur.clone()));
                return;
            }
            for g in 1..=3 {
                cur.push(g);
                gen_words(len, cur, out);
                cur.pop();
            }
        }
        for d in 1..=2 {
            gen_words(d, &mut Vec::new(), &mut pool);
        }
        let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut triples: Vec<(usize, usize, usize)> = Vec::new();
        while triples.len() < 60 {
            let i = (next() as usize) % pool.len();
            let j = (next() as usize) % pool.len();
            let k = (next() as usize) % pool.len();
            if pool[i].len() + pool[j].len() + pool[k].len() <= maxdeg {
                triples.push((i, j, k));
            }
        }
        let mut checked = 0usize;
        for (i, j, k) in triples {
            let (u, v, w) = (&pool[i], &pool[j], &pool[k]);
            let pu = NCPoly::word(u.clone(), Scalar::one());
            let pv = NCPoly::word(v.clone(), Scalar::one());
            let pw = NCPoly::word(w.clone(), Scalar::one());
            let a = self.normal_form(&self.normal_form(&pu.mul(&pv)).mul(&pw));
            let b = self.normal_form(&pu.mul(&self.normal_form(&pv.mul(&pw))));
            let c = self.normal_form(&pu.mul(&pv).mul(&pw));
            if a != b || a != c {
                return Err(Error::PbwViolation(format!("associativity on ({u})*({v})*({w})")));
            }
            checked += 1;
        }
        // (c) dimensions and the projection property on the basis
        let mut dims = Vec::new();
        for d in 0..=maxdeg {
            let ws = basis(d);
            let expect = (d + 1) * (d + 2) / 2;
            if ws.len() != expect {
                return Err(Error::PbwViolation(format!("degree {d} basis has {} words", ws.len())));
            }
            for w in &ws {
                let p = NCPoly::word(w.clone(), Scalar::one());
                if self.normal_form(&p) != p {
                    return Err(Error::PbwViolation(format!("basis word {w} not fixed by nf")));
                }
            }
            dims.push((d, expect));
        }
        Ok(PbwReport { overlap_ok: true, assoc_checked: checked, dims })
    }
}

/// Diagnostic: print the dependency-block structure and per-block solve
/// timing for one degree. Temporary tool while tuning the solver.
pub fn debug_solve_degree(rs: &RewriteSystem, d: usize) {
    use std::time::Instant;
    let words = basis(d);
    let mut unknowns: Vec<(u8, Word)> = Vec::new();
    for v in &words {
        for g in 1..=3u8 {
            if g > v.0[0] {
                unknowns.push((g, v.clone()));
            }
        }
    }
    let n = unknowns.len();
    let index: std::collections::HashMap<(u8, Word), usize> =
        unknowns.iter().cloned().enumerate().map(|(i, u)| (u, i)).collect();
    let mut deps: Vec<BTreeMap<usize, Scalar>> = vec![BTreeMap::new(); n];
    let t0 = Instant::now();
    for (r, (g, v)) in unknowns.iter().enumerate() {
        let h = v.0[0];
        let tail = Word(v.0[1..].to_vec());
        for (m, c) in &rs.rule(*g, h).terms {
            let (u, w2) = (m.0[0], m.0[1]);
            let prev = rs.apply_gen_word(w2, &tail);
            for (nw, e) in &prev.terms {
                let coef = c * e;
                if u > nw.0[0] {
                    let col = index[&(u, nw.clone())];
                    let entry = deps[r].entry(col).or_insert_with(Scalar::zero);
                    *entry = &*entry + &coef;
                }
            }
        }
    }
    eprintln!("deps built in {:?}", t0.elapsed());
    let blocks = condensation_order(&deps);
    let sizes: Vec<usize> = blocks.iter().map(Vec::len).collect();
    eprintln!("degree {d}: {n} unknowns, {} blocks, sizes {:?}", blocks.len(), sizes);
    for b in blocks.iter().filter(|b| b.len() > 1) {
        let names: Vec<String> = b.iter().map(|&r| format!("({},{})", unknowns[r].0, unknowns[r].1)).collect();
        eprintln!("  cyclic block: {names:?}");
    }
}

/// Strongly connected components of the dependency graph, dependencies
/// first (Tarjan emission order), each component sorted for determinism.
fn condensation_order(deps: &[BTreeMap<usize, Scalar>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        deps: &'a [BTreeMap<usize, Scalar>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(s: &mut State, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        let nbrs: Vec<usize> = s.deps[v].keys().copied().collect();
        for w in nbrs {
            if s.index[w].is_none() {
                visit(s, w);
                s.low[v] = s.low[v].min(s.low[w]);
            } else if s.on_stack[w] {
                s.low[v] = s.low[v].min(s.index[w].unwrap());
            }
        }
        if s.low[v] == s.index[v].unwrap() {
            let mut comp = Vec::new();
            loop {
                let w = s.stack.pop().unwrap();
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            s.out.push(comp);
        }
    }
    let n = deps.len();
    let mut s = State {
        deps,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.out
}

/// Outcome of a successful PBW consistency run.
#[derive(Debug, Clone)]
pub struct PbwReport {
    pub overlap_ok: bool,
    pub assoc_checked: usize,
    /// (degree, dimension) pairs, dimension always (d+1)(d+2)/2.
    pub dims: Vec<(usize, usize)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson::{CPoly, PoissonStructure};

    fn constants_for(omega: &CPoly) -> StructureConstants {
        PoissonStructure::from_potential(omega).unwrap().structure_constants().unwrap()
    }

    fn case_omega(id: u8) -> CPoly {
        let x = |i| CPoly::var(i);
        match id {
            1 => x(1).pow(3),
            2 => &x(1).pow(2) * &x(2),
            3 => (&(&x(1) * &x(2)) * &x(3)).scale(&Scalar::from_int(2)),
            7 => {
                let lam = Scalar::param("lambda");
                let third = Scalar::rational(1, 3);
                let cubes = &(&x(1).pow(3) + &x(2).pow(3)) + &x(3).pow(3);
                &cubes.scale(&third) + &(&(&x(1) * &x(2)) * &x(3)).scale(&lam)
            }
            _ => panic!("only a few cases are spelled out in unit tests"),
        }
    }

    fn hb() -> Scalar {
        Scalar::hbar()
    }

    #[test]
    fn relations_case_1() {
        let rs = RewriteSystem::derive(&constants_for(&case_omega(1)), 4).unwrap();
        assert_eq!(rs.rule(2, 1), &NCPoly::word(Word(vec![1, 2]), Scalar::one()));
        assert_eq!(rs.rule(3, 1), &NCPoly::word(Word(vec![1, 3]), Scalar::one()));
        let mut expect = NCPoly::word(Word(vec![2, 3]), Scalar::one());
        expect.insert(Word(vec![1, 1]), &Scalar::from_int(-3) * &hb());
        assert_eq!(rs.rule(3, 2), &expect);
    }

    #[test]
    fn relations_case_3() {
        let rs = RewriteSystem::derive(&constants_for(&case_omega(3)), 4).unwrap();
        let one = Scalar::one();
        let q = &(&one - &hb()) / &(&one + &hb());
        assert_eq!(rs.rule(2, 1), &NCPoly::word(Word(vec![1, 2]), q.clone()));
        assert_eq!(rs.rule(3, 2), &NCPoly::word(Word(vec![2, 3]), q.clone()));
        assert_eq!(rs.rule(3, 1), &NCPoly::word(Word(vec![1, 3]), q.inv().unwrap()));
    }

    #[test]
    fn relations_zero_constants() {
        let rs = RewriteSystem::commutative(4);
        for (j, i) in [(2u8, 1u8), (3, 1), (3, 2)] {
            assert_eq!(rs.rule(j, i), &NCPoly::word(Word(vec![i, j]), Scalar::one()));
        }
    }

    #[test]
    fn normal_form_case_1() {
        let rs = RewriteSystem::derive(&constants_for(&case_omega(1)), 6).unwrap();
        let p = NCPoly::word(Word(vec![3, 2]), Scalar::one());
        let nf = rs.normal_form(&p);
        let mut expect = NCPoly::word(Word(vec![2, 3]), Scalar::one());
        expect.insert(Word(vec![1, 1]), &Scalar::from_int(-3) * &hb());
        assert_eq!(nf, expect);
        // already normal input is untouched
        let q = NCPoly::word(Word(vec![1, 2, 3]), Scalar::one());
        assert_eq!(rs.normal_form(&q), q);
    }

    #[test]
    fn normal_form_case_3_descending_word() {
        // y3 y2 y1 -> ((1-h)/(1+h)) y1 y2 y3: the q-factors from y3y2 and y3y1 cancel
        let rs = RewriteSystem::derive(&constants_for(&case_omega(3)), 6).unwrap();
        let one = Scalar::one();
        let q = &(&one - &hb()) / &(&one + &hb());
        let nf = rs.normal_form(&NCPoly::word(Word(vec![3, 2, 1]), Scalar::one()));
        assert_eq!(nf, NCPoly::word(Word(vec![1, 2, 3]), q));
    }

    #[test]
    fn commutator_examples() {
        let rs = RewriteSystem::derive(&constants_for(&case_omega(1)), 6).unwrap();
        // [w2, w3] with w2 = (a/2)y1 + y2, w3 = (d/2)y1 + y3 equals 3 hbar y1^2
        let a = Scalar::param("a");
        let d = Scalar::param("d");
        let mut w2 = NCPoly::var(2);
        w2.insert(Word::letter(1), &a * &Scalar::rational(1, 2));
        let mut w3 = NCPoly::var(3);
        w3.insert(Word::letter(1), &d * &Scalar::rational(1, 2));
        let c = rs.commutator(&w2, &w3);
        assert_eq!(c, NCPoly::word(Word(vec![1, 1]), &Scalar::from_int(3) * &hb()));
        // [f, f] = 0
        assert!(rs.commutator(&w2, &w2).is_zero());
    }

    #[test]
    fn basis_enumeration() {
        assert_eq!(basis(0), vec![Word::empty()]);
        assert_eq!(basis(1), vec![Word(vec![1]), Word(vec![2]), Word(vec![3])]);
        let b2 = basis(2);
        assert_eq!(
            b2,
            vec![
                Word(vec![1, 1]),
                Word(vec![1, 2]),
                Word(vec![1, 3]),
                Word(vec![2, 2]),
                Word(vec![2, 3]),
                Word(vec![3, 3])
            ]
        );
        for d in 0..=8 {
            assert_eq!(basis(d).len(), (d + 1) * (d + 2) / 2);
        }
    }

    #[test]
    fn pbw_consistency_runs() {
        for id in [1u8, 3] {
            let rs = RewriteSystem::derive(&constants_for(&case_omega(id)), 7).unwrap();
            let report = rs.pbw_consistency(6, 0).unwrap();
            assert!(report.overlap_ok);
            assert!(report.assoc_checked >= 50);
        }
        // commutative rules pass too
        let rs = RewriteSystem::commutative(7);
        assert!(rs.pbw_consistency(6, 0).is_ok());
        // symbolic lambda, lower degree
        let rs7 = RewriteSystem::derive(&constants_for(&case_omega(7)), 6).unwrap();
        assert!(rs7.pbw_consistency(5, 0).is_ok());
    }

    #[test]
    fn normal_form_is_projection() {
        let rs = RewriteSystem::derive(&constants_for(&case_omega(7)), 6).unwrap();
        let mut state = 12345u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..40 {
            let len = 1 + (next() as usize) % 4;
            let w: Vec<u8> = (0..len).map(|_| 1 + (next() % 3) as u8).collect();
            let c = Scalar::from_int((next() % 7) as i64 - 3);
            let p = NCPoly::word(Word(w), c);
            let nf = rs.normal_form(&p);
            assert!(nf.is_normal());
            assert_eq!(rs.normal_form(&nf), nf);
        }
    }

    #[test]
    fn hbar_zero_specialization_is_commutative_sort() {
        let rs = RewriteSystem::derive(&constants_for(&case_omega(1)), 5).unwrap();
        let at0 = rs.specialize(&Bindings::new().bind("hbar", Scalar::zero())).unwrap();
        let p = NCPoly::word(Word(vec![3, 2, 1]), Scalar::one());
        assert_eq!(at0.normal_form(&p), NCPoly::word(Word(vec![1, 2, 3]), Scalar::one()));
        // case 3 at hbar = -1 hits a pole
        let rs3 = RewriteSystem::derive(&constants_for(&case_omega(3)), 5).unwrap();
        assert!(matches!(
            rs3.specialize(&Bindings::new().bind("hbar", Scalar::from_int(-1))),
            Err(Error::PoleAtSpecialization(_))
        ));
    }

    #[test]
    fn word_display() {
        assert_eq!(Word(vec![1, 1, 2]).to_string(), "y1^2*y2");
        assert_eq!(Word::empty().to_string(), "1");
    }
}
