//! Polynomials over F_{q^2}, value tables, and the brute-force permutation
//! oracles that arbitrate every criterion check.

use thiserror::Error;

use crate::bitset::DenseBitSet;
use crate::field::{FieldCtx, FieldElem};
use crate::util::gcd;

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("invalid polynomial `{text}`: {reason}")]
    BadPoly { text: String, reason: String },
}

/// Polynomial over F_{q^2}; index = exponent, no trailing zero coefficients.
/// The zero polynomial has an empty coefficient vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    coeffs: Vec<FieldElem>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Poly::constant(FieldElem::ONE)
    }

    pub fn x() -> Self {
        Poly::monomial(1, FieldElem::ONE)
    }

    pub fn constant(c: FieldElem) -> Self {
        let mut p = Poly { coeffs: vec![c] };
        p.normalize();
        p
    }

    pub fn monomial(exp: u64, c: FieldElem) -> Self {
        if c.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![FieldElem::ZERO; exp as usize + 1];
        coeffs[exp as usize] = c;
        Poly { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<FieldElem>) -> Self {
        let mut p = Poly { coeffs };
        p.normalize();
        p
    }

    /// Builds from (exponent, coefficient) pairs; duplicate exponents add up.
    pub fn from_pairs(ctx: &FieldCtx, pairs: &[(u64, FieldElem)]) -> Self {
        let max = pairs.iter().map(|&(e, _)| e).max().unwrap_or(0);
        let mut coeffs = vec![FieldElem::ZERO; max as usize + 1];
        for &(e, c) in pairs {
            coeffs[e as usize] = ctx.add(coeffs[e as usize], c);
        }
        Poly::from_coeffs(coeffs)
    }

    fn normalize(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the polynomial; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u64> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() as u64 - 1)
        }
    }

    pub fn coeff(&self, exp: u64) -> FieldElem {
        self.coeffs
            .get(exp as usize)
            .copied()
            .unwrap_or(FieldElem::ZERO)
    }

    pub fn coeffs(&self) -> &[FieldElem] {
        &self.coeffs
    }

    /// Nonzero terms as (exponent, coefficient), ascending exponent.
    pub fn terms(&self) -> impl Iterator<Item = (u64, FieldElem)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(e, &c)| (e as u64, c))
    }

    /// Is the polynomial a constant equal to `c`?
    pub fn is_constant(&self, c: FieldElem) -> bool {
        if c.is_zero() {
            self.is_zero()
        } else {
            self.coeffs.len() == 1 && self.coeffs[0] == c
        }
    }

    /// True when every coefficient lies in the subfield F_q.
    pub fn has_subfield_coeffs(&self, ctx: &FieldCtx) -> bool {
        self.coeffs.iter().all(|&c| ctx.in_subfield(c))
    }

    /// Horner evaluation; inherits the pow conventions of the field.
    pub fn eval(&self, ctx: &FieldCtx, x: FieldElem) -> FieldElem {
        let mut acc = FieldElem::ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = ctx.add(ctx.mul(acc, x), c);
        }
        acc
    }

    /// Folds every positive exponent by e ↦ ((e−1) mod n) + 1. This preserves
    /// the induced function on {0} ∪ U_n (and on all of F_{q^2} when
    /// n = q²−1), because x^n = 1 on U_n and 0^e = 0 for every e ≥ 1.
    pub fn fold_exponents(&self, ctx: &FieldCtx, n: u64) -> Poly {
        let mut coeffs = vec![FieldElem::ZERO; (n as usize + 1).min(self.coeffs.len())];
        for (e, c) in self.terms() {
            let folded = if e == 0 { 0 } else { (e - 1) % n + 1 };
            if coeffs.len() <= folded as usize {
                coeffs.resize(folded as usize + 1, FieldElem::ZERO);
            }
            coeffs[folded as usize] = ctx.add(coeffs[folded as usize], c);
        }
        Poly::from_coeffs(coeffs)
    }

    /// Reduces mod x^{q²} − x: exponents e ≥ q² fold to ((e−1) mod (q²−1)) + 1,
    /// exponent 0 is untouched. The result agrees with the original as a
    /// function on all of F_{q^2}.
    pub fn reduce_mod(&self, ctx: &FieldCtx) -> Poly {
        self.fold_exponents(ctx, ctx.order())
    }

    /// Reduces φ's exponents mod d (the family normalization). Preserves
    /// every induced map the family machinery evaluates, since φ's argument
    /// ranges over {0} ∪ U relevant sets and θ^r kills the θ = 0 point.
    pub fn reduce_exponents_mod(&self, ctx: &FieldCtx, d: u64) -> Poly {
        let mut coeffs = vec![FieldElem::ZERO; (d as usize).min(self.coeffs.len())];
        for (e, c) in self.terms() {
            let folded = (e % d) as usize;
            if coeffs.len() <= folded {
                coeffs.resize(folded + 1, FieldElem::ZERO);
            }
            coeffs[folded] = ctx.add(coeffs[folded], c);
        }
        Poly::from_coeffs(coeffs)
    }

    pub fn add(&self, ctx: &FieldCtx, other: &Poly) -> Poly {
        let mut coeffs = vec![FieldElem::ZERO; self.coeffs.len().max(other.coeffs.len())];
        for (i, slot) in coeffs.iter_mut().enumerate() {
            *slot = ctx.add(self.coeff(i as u64), other.coeff(i as u64));
        }
        Poly::from_coeffs(coeffs)
    }

    pub fn scale(&self, ctx: &FieldCtx, c: FieldElem) -> Poly {
        Poly::from_coeffs(self.coeffs.iter().map(|&a| ctx.mul(a, c)).collect())
    }

    /// Schoolbook product.
    pub fn mul(&self, ctx: &FieldCtx, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![FieldElem::ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] = ctx.add(coeffs[i + j], ctx.mul(a, b));
            }
        }
        Poly::from_coeffs(coeffs)
    }

    /// P^e reduced mod x^{q²} − x after every multiplication, so intermediate
    /// degrees never exceed q²−1. Used by the polynomial-expansion oracles.
    pub fn pow_reduced(&self, ctx: &FieldCtx, mut e: u64) -> Poly {
        let mut result = Poly::one();
        let mut base = self.reduce_mod(ctx);
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(ctx, &base).reduce_mod(ctx);
            }
            base = base.mul(ctx, &base).reduce_mod(ctx);
            e >>= 1;
        }
        result
    }

    /// Canonical text: `e:coeff` pairs ascending, e.g. `0:[3,1], 1:1, 28:1`.
    pub fn format(&self, ctx: &FieldCtx) -> String {
        if self.is_zero() {
            return "0:0".to_string();
        }
        self.terms()
            .map(|(e, c)| format!("{e}:{}", ctx.format_elem(c)))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Parses the `exp:coeff` pair list; duplicate exponents add up.
    pub fn parse(ctx: &FieldCtx, text: &str) -> Result<Poly, PolyError> {
        let bad = |reason: &str| PolyError::BadPoly {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let t = text.trim();
        if t.is_empty() {
            return Ok(Poly::zero());
        }
        let mut pairs = Vec::new();
        for part in split_top_level(t) {
            let (e_str, c_str) = part.split_once(':').ok_or_else(|| bad("expected exp:coeff"))?;
            let e: u64 = e_str.trim().parse().map_err(|_| bad("bad exponent"))?;
            let c = ctx
                .parse_elem(c_str)
                .map_err(|err| bad(&err.to_string()))?;
            pairs.push((e, c));
        }
        if pairs.iter().any(|&(e, _)| e > 1 << 20) {
            return Err(bad("exponent too large"));
        }
        Ok(Poly::from_pairs(ctx, &pairs))
    }
}

/// Splits on commas that are not inside `[...]` coefficient lists.
fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, ch) in text.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

/// Total value table of a map over an explicit, duplicate-free domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuncTable {
    domain: Vec<FieldElem>,
    values: Vec<FieldElem>,
}

impl FuncTable {
    pub fn tabulate(domain: Vec<FieldElem>, f: impl FnMut(FieldElem) -> FieldElem) -> Self {
        let values = domain.iter().copied().map(f).collect();
        FuncTable { domain, values }
    }

    /// Tabulates over all of F_{q^2} in code order.
    pub fn over_field(ctx: &FieldCtx, f: impl FnMut(FieldElem) -> FieldElem) -> Self {
        Self::tabulate(ctx.elements().collect(), f)
    }

    pub fn from_poly(ctx: &FieldCtx, p: &Poly, domain: Vec<FieldElem>) -> Self {
        Self::tabulate(domain, |x| p.eval(ctx, x))
    }

    pub fn domain(&self) -> &[FieldElem] {
        &self.domain
    }

    pub fn values(&self) -> &[FieldElem] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (FieldElem, FieldElem)> + '_ {
        self.domain.iter().copied().zip(self.values.iter().copied())
    }

    /// Value at a domain element (linear scan; tables on subsets are small).
    pub fn value_at(&self, x: FieldElem) -> Option<FieldElem> {
        self.domain
            .iter()
            .position(|&d| d == x)
            .map(|i| self.values[i])
    }

    /// True iff the table is a bijection of F_{q^2} onto itself.
    /// Requires the domain to be all of F_{q^2}.
    pub fn is_permutation(&self, ctx: &FieldCtx) -> bool {
        assert_eq!(
            self.domain.len() as u64,
            ctx.q_sq(),
            "is_permutation requires the full field as domain"
        );
        let mut seen = DenseBitSet::new(ctx.q_sq() as usize);
        self.values.iter().all(|v| seen.insert(v.code() as usize))
    }

    /// True iff the image of the domain equals the domain as a set.
    pub fn permutes_domain(&self, ctx: &FieldCtx) -> bool {
        let mut member = DenseBitSet::new(ctx.q_sq() as usize);
        for d in &self.domain {
            member.insert(d.code() as usize);
        }
        let mut seen = DenseBitSet::new(ctx.q_sq() as usize);
        self.values
            .iter()
            .all(|v| member.contains(v.code() as usize) && seen.insert(v.code() as usize))
    }
}

/// Brute-force permutation check for a polynomial.
pub fn poly_is_permutation(ctx: &FieldCtx, p: &Poly) -> bool {
    let mut seen = DenseBitSet::new(ctx.q_sq() as usize);
    ctx.elements().all(|x| seen.insert(p.eval(ctx, x).code() as usize))
}

/// Complete permutation check: both P and P + x must permute F_{q^2}.
pub fn is_complete_permutation(ctx: &FieldCtx, p: &Poly) -> bool {
    poly_is_permutation(ctx, p) && poly_is_permutation(ctx, &p.add(ctx, &Poly::x()))
}

/// Pointwise equality of two polynomials as functions on F_{q^2}.
pub fn equal_as_functions(ctx: &FieldCtx, p: &Poly, q: &Poly) -> bool {
    ctx.elements().all(|x| p.eval(ctx, x) == q.eval(ctx, x))
}

/// x^k permutes F_{q^2} iff gcd(k, q²−1) = 1; kept next to the oracles since
/// several tests lean on it.
pub fn monomial_is_permutation(ctx: &FieldCtx, k: u64) -> bool {
    k > 0 && gcd(k, ctx.order()) == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldCtx;

    fn f9() -> FieldCtx {
        FieldCtx::new(3, 1).unwrap()
    }

    fn f169() -> FieldCtx {
        FieldCtx::new(13, 1).unwrap()
    }

    #[test]
    fn eval_basics() {
        let ctx = f169();
        let x = Poly::x();
        let c = Poly::constant(ctx.embed(5));
        for v in ctx.elements().take(20) {
            assert_eq!(x.eval(&ctx, v), v);
            assert_eq!(c.eval(&ctx, v), ctx.embed(5));
        }
        // x^28 at 2 → 3 in the prime subfield (independent integer oracle: 2^28 mod 13 = 3)
        let p = Poly::monomial(28, FieldElem::ONE);
        assert_eq!(p.eval(&ctx, ctx.embed(2)), ctx.embed(3));
        assert_eq!(Poly::zero().eval(&ctx, ctx.embed(7)), FieldElem::ZERO);
    }

    #[test]
    fn reduce_mod_folds_exponents() {
        let ctx = f9();
        // x^{q²} → x
        let p = Poly::monomial(9, FieldElem::ONE);
        assert_eq!(p.reduce_mod(&ctx), Poly::x());
        // x^r (x^{(q²−1)/d})^d → x^r  (r = 2, d = 4, m = 2)
        let p = Poly::monomial(2 + 8, FieldElem::ONE);
        assert_eq!(p.reduce_mod(&ctx), Poly::monomial(2, FieldElem::ONE));
        // exponent 0 untouched, low exponents untouched
        let p = Poly::from_pairs(&ctx, &[(0, ctx.embed(2)), (8, FieldElem::ONE)]);
        assert_eq!(p.reduce_mod(&ctx), p);
    }

    #[test]
    fn reduce_mod_preserves_function_and_is_idempotent() {
        let ctx = f9();
        let mut rng = crate::rng::SplitMix64::new(11);
        for _ in 0..50 {
            let pairs: Vec<(u64, FieldElem)> = (0..6)
                .map(|_| {
                    (
                        rng.below(64),
                        ctx.elem_from_code(rng.below(9)).unwrap(),
                    )
                })
                .collect();
            let p = Poly::from_pairs(&ctx, &pairs);
            let r = p.reduce_mod(&ctx);
            if let Some(d) = r.degree() {
                assert!(d < ctx.q_sq());
            }
            for x in ctx.elements() {
                assert_eq!(p.eval(&ctx, x), r.eval(&ctx, x));
            }
            assert_eq!(r.reduce_mod(&ctx), r);
        }
    }

    #[test]
    fn func_tables() {
        let ctx = FieldCtx::new(2, 1).unwrap();
        let id = FuncTable::over_field(&ctx, |x| x);
        for (x, y) in id.iter() {
            assert_eq!(x, y);
        }
        let cube = FuncTable::from_poly(&ctx, &Poly::monomial(3, FieldElem::ONE), ctx.elements().collect());
        for (x, y) in cube.iter() {
            if x.is_zero() {
                assert!(y.is_zero());
            } else {
                assert_eq!(y, FieldElem::ONE); // x^{q²−1} = 1
            }
        }
        // trace onto the subfield: x³ + x over F_9 has image exactly F_3
        let ctx9 = f9();
        let theta = Poly::from_pairs(&ctx9, &[(3, FieldElem::ONE), (1, FieldElem::ONE)]);
        let table = FuncTable::from_poly(&ctx9, &theta, ctx9.elements().collect());
        let mut image: Vec<FieldElem> = table.values().to_vec();
        image.sort_unstable();
        image.dedup();
        let mut subfield = ctx9.subfield();
        subfield.sort_unstable();
        assert_eq!(image, subfield);
    }

    #[test]
    fn permutation_oracle() {
        let ctx = FieldCtx::new(2, 1).unwrap();
        assert!(FuncTable::over_field(&ctx, |x| x).is_permutation(&ctx));
        let cube = FuncTable::from_poly(&ctx, &Poly::monomial(3, FieldElem::ONE), ctx.elements().collect());
        assert!(!cube.is_permutation(&ctx));
    }

    #[test]
    fn quadratic_plus_linear_permutes_f4() {
        // (x² + x) + x² + v·x with v outside the prime field permutes F_4,
        // even though the norm-gap condition fails; the norm test is
        // sufficient here, not necessary.
        let ctx = FieldCtx::new(2, 1).unwrap();
        let sub: Vec<FieldElem> = ctx
            .elements()
            .filter(|&x| !x.is_zero() && x != FieldElem::ONE)
            .collect();
        assert_eq!(sub.len(), 2);
        for v in sub {
            let p = Poly::from_pairs(
                &ctx,
                &[(2, FieldElem::ONE), (1, FieldElem::ONE), (2, FieldElem::ONE), (1, v)],
            );
            assert!(poly_is_permutation(&ctx, &p), "v = {:?}", v);
        }
    }

    #[test]
    fn monomials_permute_iff_coprime_exponent() {
        for (p, m) in [(3, 1), (2, 2), (5, 1)] {
            let ctx = FieldCtx::new(p, m).unwrap();
            for k in 1..ctx.q_sq() {
                let brute = poly_is_permutation(&ctx, &Poly::monomial(k, FieldElem::ONE));
                assert_eq!(
                    brute,
                    monomial_is_permutation(&ctx, k),
                    "x^{k} over q² = {}",
                    ctx.q_sq()
                );
            }
        }
    }

    #[test]
    fn permutes_domain_checks() {
        let ctx = f169();
        let u3 = ctx.roots_of_unity(3).unwrap();
        let omega = u3[1];
        // group translation y ↦ ω·y permutes U_3
        let t = FuncTable::tabulate(u3.clone(), |y| ctx.mul(omega, y));
        assert!(t.permutes_domain(&ctx));
        // squaring permutes U_3 (gcd(2,3) = 1)
        let t = FuncTable::tabulate(u3.clone(), |y| ctx.mul(y, y));
        assert!(t.permutes_domain(&ctx));
        // a constant map does not
        let t = FuncTable::tabulate(u3.clone(), |_| FieldElem::ONE);
        assert!(!t.permutes_domain(&ctx));
        // maps leaving the domain do not
        let t = FuncTable::tabulate(u3, |y| ctx.add(y, FieldElem::ONE));
        assert!(!t.permutes_domain(&ctx));
        // on the full field, permutes_domain agrees with is_permutation
        let full = FuncTable::over_field(&ctx, |x| ctx.add(x, FieldElem::ONE));
        assert!(full.is_permutation(&ctx) && full.permutes_domain(&ctx));
    }

    #[test]
    fn complete_permutations() {
        // x is a CPP exactly when 2 ≠ 0
        let ctx_odd = f9();
        assert!(is_complete_permutation(&ctx_odd, &Poly::x()));
        let ctx_even = FieldCtx::new(2, 1).unwrap();
        assert!(!is_complete_permutation(&ctx_even, &Poly::x()));
        assert!(!is_complete_permutation(&ctx_odd, &Poly::constant(ctx_odd.embed(1))));
    }

    #[test]
    fn complete_permutation_family_instance_q4() {
        // q = 4: (x^4 + x) + e·x over F_16 for e in F_4 \ F_2 is a CPP.
        let ctx = FieldCtx::new(2, 2).unwrap();
        let subfield = ctx.subfield();
        let candidates: Vec<FieldElem> = subfield
            .iter()
            .copied()
            .filter(|&e| !e.is_zero() && e != FieldElem::ONE)
            .collect();
        assert_eq!(candidates.len(), 2);
        for e in candidates {
            let p = Poly::from_pairs(&ctx, &[(4, FieldElem::ONE), (1, FieldElem::ONE), (1, e)]);
            assert!(is_complete_permutation(&ctx, &p));
        }
    }

    #[test]
    fn function_equality() {
        let ctx = f9();
        let p = Poly::from_pairs(&ctx, &[(10, ctx.embed(2)), (1, FieldElem::ONE)]);
        assert!(equal_as_functions(&ctx, &p, &p.reduce_mod(&ctx)));
        assert!(equal_as_functions(
            &ctx,
            &Poly::monomial(9, FieldElem::ONE),
            &Poly::x()
        ));
        assert!(!equal_as_functions(&ctx, &Poly::x(), &Poly::zero()));
    }

    #[test]
    fn linearized_power_identity_q5() {
        // (x^5 − x + c)^{(q²−1)/3+1} + x coincides with x^5 + c as a function
        // when c has zero trace (here the shift α = (−1)^{(5+1)/3} = 1).
        let ctx = FieldCtx::new(5, 1).unwrap();
        for c in ctx.trace_zero_set() {
            let base = Poly::from_pairs(
                &ctx,
                &[(5, FieldElem::ONE), (1, ctx.embed(-1)), (0, c)],
            );
            let f = base.pow_reduced(&ctx, 9).add(&ctx, &Poly::x());
            let lin = Poly::from_pairs(&ctx, &[(5, FieldElem::ONE), (0, c)]);
            assert!(equal_as_functions(&ctx, &f, &lin), "c = {:?}", c);
        }
    }

    #[test]
    fn poly_text_roundtrips() {
        let ctx = f9();
        let p = Poly::parse(&ctx, "28:1, 1:1, 0:[2,1]").unwrap();
        assert_eq!(p.coeff(28), FieldElem::ONE);
        assert_eq!(p.coeff(0), ctx.parse_elem("[2,1]").unwrap());
        let text = p.format(&ctx);
        assert_eq!(Poly::parse(&ctx, &text).unwrap(), p);
        // duplicate exponents accumulate
        let q = Poly::parse(&ctx, "2:1, 2:2").unwrap();
        assert_eq!(q, Poly::monomial(2, ctx.embed(3) /* = 0 mod 3 → zero */));
        assert!(q.is_zero());
        // zero polynomial round-trips through "0:0"
        assert_eq!(Poly::zero().format(&ctx), "0:0");
        assert!(Poly::parse(&ctx, "0:0").unwrap().is_zero());
        assert!(Poly::parse(&ctx, "").unwrap().is_zero());
        assert!(Poly::parse(&ctx, "x:1").is_err());
        assert!(Poly::parse(&ctx, "1").is_err());
        assert!(Poly::parse(&ctx, "1:[9").is_err());
    }

    #[test]
    fn mul_pow_agree_with_pointwise() {
        let ctx = f9();
        let a = Poly::from_pairs(&ctx, &[(3, FieldElem::ONE), (1, FieldElem::ONE), (0, ctx.embed(2))]);
        let b = Poly::from_pairs(&ctx, &[(2, ctx.embed(2)), (0, FieldElem::ONE)]);
        let prod = a.mul(&ctx, &b);
        let cube = a.pow_reduced(&ctx, 3);
        for x in ctx.elements() {
            assert_eq!(prod.eval(&ctx, x), ctx.mul(a.eval(&ctx, x), b.eval(&ctx, x)));
            assert_eq!(cube.eval(&ctx, x), ctx.pow(a.eval(&ctx, x), 3));
        }
    }
}
