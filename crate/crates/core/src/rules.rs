//! Registry of the closed-form permutation criteria for the family.
//!
//! Every entry carries its hypothesis predicate (with the first failing
//! clause as a diagnostic), its reduced condition (the "small side" that
//! replaces a full brute-force check), and its verdict semantics. All
//! entries are if-and-only-if criteria under their hypotheses except
//! `Cor5`, which only asserts sufficiency.
//!
//! Hypothesis clauses are evaluated in a fixed documented order (field
//! shape, d-conditions, coefficient conditions, (u, v) conditions, r
//! conditions, φ shape), so sweep diagnostics are diffable.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::families::{decompose, FamilyError, FamilyParams, ReducedMap};
use crate::field::{FieldCtx, FieldElem};
use crate::poly::Poly;
use crate::util::gcd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PP")]
    Pp,
    #[serde(rename = "NotPP")]
    NotPp,
    #[serde(rename = "NotApplicable")]
    NotApplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pp => write!(f, "PP"),
            Verdict::NotPp => write!(f, "NotPP"),
            Verdict::NotApplicable => write!(f, "NotApplicable"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleSemantics {
    /// Hypotheses ⟹ (condition ⟺ f permutes).
    Iff,
    /// Hypotheses ⟹ f permutes; no converse claimed.
    SufficientOnly,
}

/// Outcome of a hypothesis evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HypothesisCheck {
    pub ok: bool,
    pub failed_clause: Option<&'static str>,
}

impl HypothesisCheck {
    fn pass() -> Self {
        HypothesisCheck { ok: true, failed_clause: None }
    }

    fn fail(clause: &'static str) -> Self {
        HypothesisCheck { ok: false, failed_clause: Some(clause) }
    }
}

macro_rules! require {
    ($cond:expr, $clause:literal) => {
        if !$cond {
            return HypothesisCheck::fail($clause);
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleId {
    Thm1,
    Thm2,
    Cor1,
    Cor2,
    Thm3,
    Thm4,
    Cor3,
    Cor4,
    Cor5,
    Cor6,
    Cor7,
    Cor8,
    Thm5,
    Thm6,
    Cor9,
    Cor10,
    Thm7,
    Cor11,
    Cor12,
    Cor13,
    Thm8,
    Thm9,
    Cor14,
    Cor15,
}

pub const ALL_RULES: [RuleId; 24] = [
    RuleId::Thm1,
    RuleId::Thm2,
    RuleId::Cor1,
    RuleId::Cor2,
    RuleId::Thm3,
    RuleId::Thm4,
    RuleId::Cor3,
    RuleId::Cor4,
    RuleId::Cor5,
    RuleId::Cor6,
    RuleId::Cor7,
    RuleId::Cor8,
    RuleId::Thm5,
    RuleId::Thm6,
    RuleId::Cor9,
    RuleId::Cor10,
    RuleId::Thm7,
    RuleId::Cor11,
    RuleId::Cor12,
    RuleId::Cor13,
    RuleId::Thm8,
    RuleId::Thm9,
    RuleId::Cor14,
    RuleId::Cor15,
];

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleId::Thm1 => "thm1",
            RuleId::Thm2 => "thm2",
            RuleId::Cor1 => "cor1",
            RuleId::Cor2 => "cor2",
            RuleId::Thm3 => "thm3",
            RuleId::Thm4 => "thm4",
            RuleId::Cor3 => "cor3",
            RuleId::Cor4 => "cor4",
            RuleId::Cor5 => "cor5",
            RuleId::Cor6 => "cor6",
            RuleId::Cor7 => "cor7",
            RuleId::Cor8 => "cor8",
            RuleId::Thm5 => "thm5",
            RuleId::Thm6 => "thm6",
            RuleId::Cor9 => "cor9",
            RuleId::Cor10 => "cor10",
            RuleId::Thm7 => "thm7",
            RuleId::Cor11 => "cor11",
            RuleId::Cor12 => "cor12",
            RuleId::Cor13 => "cor13",
            RuleId::Thm8 => "thm8",
            RuleId::Thm9 => "thm9",
            RuleId::Cor14 => "cor14",
            RuleId::Cor15 => "cor15",
        };
        write!(f, "{s}")
    }
}

impl FromStr for RuleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let lower = s.to_ascii_lowercase();
        ALL_RULES
            .iter()
            .copied()
            .find(|r| r.to_string() == lower)
            .ok_or_else(|| format!("unknown rule `{s}` (expected thm1..thm9 or cor1..cor15)"))
    }
}

impl Serialize for RuleId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RuleId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl RuleId {
    pub fn semantics(self) -> RuleSemantics {
        match self {
            RuleId::Cor5 => RuleSemantics::SufficientOnly,
            _ => RuleSemantics::Iff,
        }
    }

    /// Whether the rule additionally asserts that f + x permutes
    /// (a complete-permutation family).
    pub fn claims_cpp(self) -> bool {
        matches!(self, RuleId::Cor5)
    }

    /// Evaluates the rule's hypothesis conjunction; on failure, names the
    /// first clause that failed.
    pub fn hypotheses(self, p: &FamilyParams) -> HypothesisCheck {
        let ctx = p.ctx();
        let q = ctx.q();
        match self {
            RuleId::Thm1 => triple(p),
            RuleId::Thm2 => {
                chain(triple(p), || {
                    require!(unity_index_ok(p), "i = j*gcd(q+1,d)");
                    uvr(p)
                })
            }
            RuleId::Cor1 => {
                require!(p.d >= 3, "d >= 3");
                require!(p.d % 2 == 1, "d odd");
                require!((q - 1) % p.d == 0, "d divides q-1");
                chain(triple(p), || uvr(p))
            }
            RuleId::Cor2 => {
                require!(p.d >= 2, "d >= 2");
                require!(p.d % 2 == 0, "d even");
                require!((q - 1) % p.d == 0, "d divides q-1");
                chain(triple(p), || uvr(p))
            }
            RuleId::Thm3 => {
                chain(triple(p), || {
                    require!(p.phi().is_constant(FieldElem::ONE), "phi = 1");
                    let t = p.reduced_coeff().expect("defined under the base hypotheses");
                    require!(
                        t.is_zero() || ctx.norm(p.u) == ctx.norm(p.v),
                        "B + A^(1-r)*B^(qr) = 0 or u^(q+1) = v^(q+1)"
                    );
                    HypothesisCheck::pass()
                })
            }
            RuleId::Thm4 => {
                chain(triple(p), || {
                    require!((q + 1) % p.d == 0, "d divides q+1");
                    HypothesisCheck::pass()
                })
            }
            RuleId::Cor8 => {
                chain(triple(p), || {
                    require!((q + 1) % p.d == 0, "d divides q+1");
                    require!(p.r == 1, "r = 1");
                    HypothesisCheck::pass()
                })
            }
            RuleId::Thm5 => {
                require!(p.d % 4 == 0, "d = 0 (mod 4)");
                require!((q + 1) % p.d == p.d / 2, "q+1 = d/2 (mod d)");
                chain(triple(p), || {
                    require!(index_multiple_of(p, p.d / 2), "i = j*d/2");
                    let h = uvr(p);
                    if !h.ok {
                        return h;
                    }
                    let folded = p.phi().fold_exponents(ctx, 2);
                    require!(folded.coeff(2).is_zero(), "phi = e0 + e1*x on {0} u U_2");
                    HypothesisCheck::pass()
                })
            }
            RuleId::Thm6 => {
                require!(p.d % 3 == 0, "3 divides d");
                require!(gcd(q + 1, p.d) == p.d / 3, "gcd(q+1,d) = d/3");
                require!(p.a == FieldElem::ONE, "a = 1");
                chain(triple(p), || {
                    require!(index_multiple_of(p, p.d / 3), "i = j*d/3");
                    monomial_tail(p, 3)
                })
            }
            RuleId::Cor9 => {
                require!((q - 1) % 3 == 0, "3 divides q-1");
                require!(p.d == 3, "d = 3");
                require!(p.a == FieldElem::ONE, "a = 1");
                chain(triple(p), || monomial_tail(p, 3))
            }
            RuleId::Cor10 => {
                require!((q + 1) % 6 == 2, "q+1 = 2 (mod 6)");
                require!(p.d == 6, "d = 6");
                require!(p.a == FieldElem::ONE, "a = 1");
                chain(triple(p), || {
                    require!(index_multiple_of(p, 2), "i even");
                    monomial_tail(p, 3)
                })
            }
            RuleId::Thm7 => {
                chain(odd_small_divisor(p), || {
                    chain(triple(p), || {
                        require!(ctx.norm(p.u) != ctx.norm(p.v), "u^(q+1) != v^(q+1)");
                        require!(p.r == 1, "r = 1");
                        require!(is_all_ones(p.phi(), p.d), "phi = 1 + x + ... + x^(d-1)");
                        HypothesisCheck::pass()
                    })
                })
            }
            RuleId::Cor11 => {
                chain(odd_small_divisor(p), || {
                    chain(triple(p), || {
                        let form1 = p.u == p.a && p.v.is_zero();
                        let form2 = p.u.is_zero() && p.v == ctx.neg(p.b);
                        require!(form1 || form2, "(u,v) = (a,0) or (0,-b)");
                        require!(ctx.norm(p.u) != ctx.norm(p.v), "u^(q+1) != v^(q+1)");
                        require!(p.r == 1, "r = 1");
                        require!(is_all_ones(p.phi(), p.d), "phi = 1 + x + ... + x^(d-1)");
                        HypothesisCheck::pass()
                    })
                })
            }
            RuleId::Cor12 => {
                require!(q % 2 == 1, "q odd");
                chain(odd_small_divisor(p), || {
                    require!(p.a == FieldElem::ONE, "a = 1");
                    chain(triple(p), || {
                        let e = match scaled_all_ones(ctx, p.phi(), p.d) {
                            Some(e) => e,
                            None => return HypothesisCheck::fail("phi = e*(1 + x + ... + x^(d-1))"),
                        };
                        require!(ctx.in_subfield(e) && !e.is_zero(), "e in F_q, e != 0");
                        require!(p.u == ctx.sub(FieldElem::ONE, e), "u = 1-e");
                        let expected_v = ctx.neg(ctx.mul(p.b, ctx.add(FieldElem::ONE, e)));
                        require!(p.v == expected_v, "v = -b(1+e)");
                        require!(p.r == 1, "r = 1");
                        HypothesisCheck::pass()
                    })
                })
            }
            RuleId::Cor13 => {
                chain(odd_small_divisor(p), || {
                    require!(p.a == FieldElem::ONE, "a = 1");
                    chain(triple(p), || {
                        let e = match scaled_all_ones(ctx, p.phi(), p.d) {
                            Some(e) => e,
                            None => return HypothesisCheck::fail("phi = e*(1 + x + ... + x^(d-1))"),
                        };
                        require!(ctx.in_subfield(e), "e in F_q");
                        let one_plus_2e = ctx.add(FieldElem::ONE, ctx.mul(ctx.embed(2), e));
                        require!(
                            !e.is_zero() && !one_plus_2e.is_zero(),
                            "e(1+2e) != 0"
                        );
                        require!(p.u == ctx.neg(e), "u = -e");
                        let expected_v = ctx.neg(ctx.mul(p.b, ctx.add(FieldElem::ONE, e)));
                        require!(p.v == expected_v, "v = -b(1+e)");
                        require!(p.r == 1, "r = 1");
                        HypothesisCheck::pass()
                    })
                })
            }
            RuleId::Thm8 => {
                require!((q - 1) % p.d == 0, "d divides q-1");
                chain(triple(p), || {
                    require!(p.phi().has_subfield_coeffs(ctx), "phi in F_q[x]");
                    let t = p.reduced_coeff().expect("defined under the base hypotheses");
                    require!(t.is_zero(), "B + A^(1-r)*B^(qr) = 0");
                    HypothesisCheck::pass()
                })
            }
            RuleId::Thm9 => {
                chain(triple(p), || {
                    require!(unity_index_ok(p), "i = j*gcd(q+1,d)");
                    require!(p.phi().has_subfield_coeffs(ctx), "phi in F_q[x]");
                    require!(ctx.norm(p.u) == ctx.norm(p.v), "u^(q+1) = v^(q+1)");
                    require!(gcd(p.r, p.m()) == 1, "gcd(r,(q^2-1)/d) = 1");
                    HypothesisCheck::pass()
                })
            }
            RuleId::Cor3 => {
                require!(q % 2 == 1, "q odd");
                require!(p.a == FieldElem::ONE, "a = 1");
                require!(p.b == FieldElem::ONE, "b = 1");
                require!(ctx.in_subfield(p.c), "c in F_q");
                require!(ctx.in_subfield(p.u), "u in F_q");
                require!(p.v == ctx.neg(p.u), "v = -u");
                require!(p.phi().is_constant(FieldElem::ONE), "phi = 1");
                HypothesisCheck::pass()
            }
            RuleId::Cor4 => {
                require!(p.a == FieldElem::ONE, "a = 1");
                require!(p.b == FieldElem::ONE, "b = 1");
                require!(ctx.in_subfield(p.c), "c in F_q");
                require!(ctx.in_subfield(p.u), "u in F_q");
                let e = ctx.sub(p.u, p.v);
                require!(ctx.has_zero_trace(e), "e = u-v has e + e^q = 0");
                require!(p.phi().is_constant(FieldElem::ONE), "phi = 1");
                HypothesisCheck::pass()
            }
            RuleId::Cor5 => {
                require!(ctx.p() == 2, "q = 2^k");
                require!(p.a == FieldElem::ONE, "a = 1");
                require!(p.b == FieldElem::ONE, "b = 1");
                require!(ctx.in_subfield(p.c), "c in F_q");
                require!(ctx.in_subfield(p.u), "u in F_q");
                let e = ctx.sub(p.v, p.u);
                require!(ctx.in_subfield(e), "e = v-u in F_q");
                require!(!e.is_zero(), "e != 0");
                require!(e != FieldElem::ONE, "e != 1");
                require!(p.phi().is_constant(FieldElem::ONE), "phi = 1");
                HypothesisCheck::pass()
            }
            RuleId::Cor6 => {
                require!(p.a == FieldElem::ONE, "a = 1");
                require!(p.b == ctx.neg(FieldElem::ONE), "b = -1");
                require!(ctx.has_zero_trace(p.c), "c + c^q = 0");
                let s = ctx.add(p.u, p.v);
                let sign = minus_one_pow(ctx, p.r);
                require!(
                    ctx.frobenius(s) == ctx.mul(sign, s),
                    "(u+v)^q = (-1)^r (u+v)"
                );
                require!(p.phi().is_constant(FieldElem::ONE), "phi = 1");
                HypothesisCheck::pass()
            }
            RuleId::Cor7 => {
                require!(p.a == FieldElem::ONE, "a = 1");
                require!(p.b == ctx.neg(FieldElem::ONE), "b = -1");
                require!(ctx.has_zero_trace(p.c), "c + c^q = 0");
                require!(ctx.norm(p.u) == ctx.norm(p.v), "u^(q+1) = v^(q+1)");
                require!(p.phi().is_constant(FieldElem::ONE), "phi = 1");
                HypothesisCheck::pass()
            }
            RuleId::Cor14 => {
                require!((q - 1) % p.d == 0, "d divides q-1");
                require!(p.a == FieldElem::ONE, "a = 1");
                require!(p.b == FieldElem::ONE, "b = 1");
                require!(ctx.in_subfield(p.c), "c in F_q");
                require!(ctx.in_subfield(p.u), "u in F_q");
                let e = ctx.sub(p.u, p.v);
                require!(ctx.has_zero_trace(e), "e = u-v has e + e^q = 0");
                require!(p.phi().has_subfield_coeffs(ctx), "phi in F_q[x]");
                HypothesisCheck::pass()
            }
            RuleId::Cor15 => {
                require!((q - 1) % p.d == 0, "d divides q-1");
                require!(p.a == FieldElem::ONE, "a = 1");
                require!(p.b == ctx.neg(FieldElem::ONE), "b = -1");
                require!(ctx.has_zero_trace(p.c), "c + c^q = 0");
                require!(ctx.in_subfield(p.u), "u in F_q");
                let e = ctx.sub(p.v, p.u);
                require!(ctx.in_subfield(e), "e = v-u in F_q");
                require!(p.r % 2 == 0, "r even");
                require!(p.phi().has_subfield_coeffs(ctx), "phi in F_q[x]");
                HypothesisCheck::pass()
            }
        }
    }

    /// Evaluates the rule's reduced condition (the small-side criterion).
    /// Requires the hypotheses to hold.
    pub fn reduced_condition(self, p: &FamilyParams) -> Result<bool, FamilyError> {
        let h = self.hypotheses(p);
        if !h.ok {
            return Err(FamilyError::Hypotheses {
                clause: h.failed_clause.unwrap_or("hypotheses"),
            });
        }
        let ctx = p.ctx();
        let q = ctx.q();
        match self {
            RuleId::Thm1 => match p.build_g()? {
                ReducedMap::Map(g) => Ok(g.permutes_domain(ctx)),
                ReducedMap::NotApplicable => Err(FamilyError::ReducedMapUndefined),
            },
            RuleId::Thm2 | RuleId::Cor1 => match p.build_h()? {
                ReducedMap::Map(h) => Ok(h.permutes_domain(ctx)),
                ReducedMap::NotApplicable => Err(FamilyError::ReducedMapUndefined),
            },
            RuleId::Cor2 => {
                let dec = decompose(ctx, p.a, p.b, p.c)?.expect("triple hypotheses hold");
                let domain = if dec.i % 2 == 0 {
                    ctx.roots_of_unity(p.d / 2)?
                } else {
                    // the coset U_d \ U_{d/2}: odd powers of ξ^{(q²−1)/d}
                    let step = ctx.order() / p.d;
                    (0..p.d / 2).map(|k| ctx.xi_pow(step * (2 * k + 1))).collect()
                };
                match p.build_h_on(domain)? {
                    ReducedMap::Map(h) => Ok(h.permutes_domain(ctx)),
                    ReducedMap::NotApplicable => Err(FamilyError::ReducedMapUndefined),
                }
            }
            RuleId::Thm3 => {
                let dc = p.derive_coeffs();
                thm3_closed_form(ctx, dc.aa, dc.bb, dc.uv_gap, p.r)
                    .ok_or(FamilyError::ReducedMapUndefined)
            }
            RuleId::Thm4 => {
                let dc = p.derive_coeffs();
                let w = p.phi().eval(ctx, dc.delta.expect("d | q+1"));
                if w.is_zero() {
                    // f collapses to u·x^q + v·x
                    return Ok(ctx.norm(p.u) != ctx.norm(p.v));
                }
                let scaled = FamilyParams::new(
                    ctx,
                    p.a,
                    p.b,
                    p.c,
                    ctx.div(p.u, w)?,
                    ctx.div(p.v, w)?,
                    p.r,
                    p.d,
                    Poly::one(),
                )?;
                match scaled.build_g()? {
                    ReducedMap::Map(g) => Ok(g.permutes_domain(ctx)),
                    ReducedMap::NotApplicable => Err(FamilyError::ReducedMapUndefined),
                }
            }
            RuleId::Cor8 => Ok(p.linearize()?.is_permutation(ctx)),
            RuleId::Thm5 => {
                let dc = p.derive_coeffs();
                let twist = p.twist().ok_or(FamilyError::ReducedMapUndefined)?;
                let folded = p.phi().fold_exponents(ctx, 2);
                let e0 = folded.coeff(0);
                let e1 = folded.coeff(1);
                let x_part = ctx.add(
                    ctx.add(ctx.mul(dc.bb, e0), ctx.mul(twist, ctx.frobenius(e0))),
                    dc.uv_gap,
                );
                let y_part = ctx.add(ctx.mul(dc.bb, e1), ctx.mul(twist, ctx.frobenius(e1)));
                let diff = ctx.sub(ctx.mul(x_part, x_part), ctx.mul(y_part, y_part));
                let sign = minus_one_pow(ctx, p.r + 1);
                Ok(ctx.pow(diff, p.m()) == sign)
            }
            RuleId::Thm6 => {
                let k = monomial_exponent(p, 3).expect("hypotheses pin the shape");
                let omega = ctx.xi_pow(ctx.order() / 3);
                let pair_at = |kk: u64| {
                    let w = ctx.pow(omega, kk);
                    let inner = ctx.sub(ctx.add(ctx.pow(omega, kk * q), w), FieldElem::ONE);
                    ctx.pow(inner, p.m())
                };
                let pair = (pair_at(k), pair_at(2 * k));
                Ok(pair == (FieldElem::ONE, FieldElem::ONE)
                    || pair == (omega, ctx.mul(omega, omega)))
            }
            RuleId::Cor9 | RuleId::Cor10 => {
                let k = monomial_exponent(p, 3).expect("hypotheses pin the shape");
                let omega = ctx.xi_pow(ctx.order() / 3);
                let expo = ctx.order() / p.d;
                let two = ctx.embed(2);
                let pair_at = |kk: u64| {
                    let inner = ctx.sub(ctx.mul(two, ctx.pow(omega, kk)), FieldElem::ONE);
                    ctx.pow(inner, expo)
                };
                let pair = (pair_at(k), pair_at(2 * k));
                Ok(pair == (FieldElem::ONE, FieldElem::ONE)
                    || pair == (omega, ctx.mul(omega, omega)))
            }
            RuleId::Thm7 => Ok(eq14_condition(p).expect("uv_gap != 0 under the hypotheses")),
            RuleId::Cor11 => {
                let form1 = p.u == p.a && p.v.is_zero();
                let base = if form1 {
                    ctx.embed(1 + 2 * p.d as i64)
                } else {
                    ctx.embed(1 - 2 * p.d as i64)
                };
                Ok(ctx.pow(base, p.m()) == FieldElem::ONE)
            }
            RuleId::Cor12 => {
                let base = ctx.embed(1 - p.d as i64);
                Ok(ctx.pow(base, p.m()) == FieldElem::ONE)
            }
            RuleId::Cor13 => {
                let e = scaled_all_ones(ctx, p.phi(), p.d).expect("hypotheses pin the shape");
                let two = ctx.embed(2);
                let denom = ctx.add(FieldElem::ONE, ctx.mul(two, e));
                let num = ctx.mul(ctx.mul(two, ctx.embed(p.d as i64)), e);
                let base = ctx.sub(FieldElem::ONE, ctx.div(num, denom)?);
                Ok(ctx.pow(base, p.m()) == FieldElem::ONE)
            }
            RuleId::Thm8 => Ok(ctx.norm(p.u) != ctx.norm(p.v)),
            RuleId::Thm9 => {
                let t = p.reduced_coeff().ok_or(FamilyError::ReducedMapUndefined)?;
                if t.is_zero() {
                    return Ok(false);
                }
                let domain = ctx.roots_of_unity(p.n())?;
                let m = p.m();
                let table = crate::poly::FuncTable::tabulate(domain, |y| {
                    ctx.mul(ctx.pow(y, p.r), ctx.pow(p.phi().eval(ctx, y), m))
                });
                Ok(table.permutes_domain(ctx))
            }
            RuleId::Cor3 => Ok(!p.u.is_zero() && gcd(p.r, q - 1) == 1),
            RuleId::Cor4 => Ok(!ctx.sub(p.u, p.v).is_zero()),
            RuleId::Cor5 => Ok(true),
            RuleId::Cor6 => Ok(ctx.norm(p.u) != ctx.norm(p.v)),
            RuleId::Cor7 => {
                // With a = 1, b = −1 the coefficient B + A^{1−r}B^{qr}
                // collapses to s^q − (−1)^r·s for s = u + v, so under
                // u^{q+1} = v^{q+1} the criterion is that this is nonzero
                // and gcd(r, q−1) = 1 (see tests::cor7_matches_brute_force).
                let s = ctx.add(p.u, p.v);
                let sign = minus_one_pow(ctx, p.r);
                Ok(gcd(p.r, q - 1) == 1 && ctx.frobenius(s) != ctx.mul(sign, s))
            }
            RuleId::Cor14 => Ok(!ctx.sub(p.u, p.v).is_zero()),
            RuleId::Cor15 => {
                let e = ctx.sub(p.v, p.u);
                let factor = ctx.add(ctx.mul(ctx.embed(2), p.u), e);
                Ok(!e.is_zero() && !ctx.mul(e, factor).is_zero())
            }
        }
    }

    /// Full verdict: NotApplicable when hypotheses fail; otherwise PP/NotPP
    /// per the rule's iff semantics (Cor5 asserts PP only). A = 0 under the
    /// base hypotheses short-circuits to NotPP (f is never injective on the
    /// θ-fibers there).
    pub fn predict(self, p: &FamilyParams) -> Verdict {
        if !self.hypotheses(p).ok {
            return Verdict::NotApplicable;
        }
        if self == RuleId::Cor5 {
            return Verdict::Pp;
        }
        if p.derive_coeffs().aa.is_zero() {
            return Verdict::NotPp;
        }
        match self.reduced_condition(p) {
            Ok(true) => Verdict::Pp,
            Ok(false) => Verdict::NotPp,
            Err(_) => Verdict::NotApplicable,
        }
    }
}

/// Geometric-sum closed form on raw coefficients:
/// (1 + d(B+B^q)/(u^{q+1}−v^{q+1}))^{(q²−1)/d} = 1.
/// `None` when u^{q+1} = v^{q+1}.
pub fn eq14_value(ctx: &FieldCtx, d: u64, bb: FieldElem, uv_gap: FieldElem) -> Option<bool> {
    if uv_gap.is_zero() {
        return None;
    }
    let num = ctx.mul(ctx.embed(d as i64), ctx.add(bb, ctx.frobenius(bb)));
    let t = ctx.add(FieldElem::ONE, ctx.div(num, uv_gap).expect("uv_gap != 0"));
    Some(ctx.pow(t, ctx.order() / d) == FieldElem::ONE)
}

/// The geometric-sum condition for a parameter set. Exposed separately
/// because for general d | q²−1 it is a sufficiency certificate even outside
/// the registry entry's iff region (d odd, d | q−1).
pub fn eq14_condition(p: &FamilyParams) -> Option<bool> {
    let dc = p.derive_coeffs();
    eq14_value(p.ctx(), p.d, dc.bb, dc.uv_gap)
}

/// Constant-φ closed form on raw coefficients, defined on the trigger region
/// (T = B + A^{1−r}B^{qr} = 0, or u^{q+1} = v^{q+1}):
/// T = 0 gives "permutation iff u^{q+1} ≠ v^{q+1}", equal norms give
/// "permutation iff T ≠ 0 and gcd(r, q−1) = 1". `None` outside the region
/// or when T is undefined.
pub fn thm3_closed_form(
    ctx: &FieldCtx,
    aa: FieldElem,
    bb: FieldElem,
    uv_gap: FieldElem,
    r: u64,
) -> Option<bool> {
    let t = ctx.add(bb, crate::families::twist_value(ctx, aa, bb, r)?);
    if t.is_zero() {
        Some(!uv_gap.is_zero())
    } else if uv_gap.is_zero() {
        Some(gcd(r, ctx.q() - 1) == 1)
    } else {
        None
    }
}

// ---- clause helpers ---------------------------------------------------------

fn triple(p: &FamilyParams) -> HypothesisCheck {
    match p.triple_hypotheses() {
        None => HypothesisCheck::pass(),
        Some(clause) => HypothesisCheck { ok: false, failed_clause: Some(clause) },
    }
}

fn uvr(p: &FamilyParams) -> HypothesisCheck {
    match p.uvr_hypothesis() {
        None => HypothesisCheck::pass(),
        Some(clause) => HypothesisCheck { ok: false, failed_clause: Some(clause) },
    }
}

fn chain(first: HypothesisCheck, rest: impl FnOnce() -> HypothesisCheck) -> HypothesisCheck {
    if first.ok {
        rest()
    } else {
        first
    }
}

/// d ≥ 3, odd, dividing q−1 (the region where the Theorem-7 closed form is
/// an iff criterion).
fn odd_small_divisor(p: &FamilyParams) -> HypothesisCheck {
    let q = p.ctx().q();
    require!(p.d >= 3, "d >= 3");
    require!(p.d % 2 == 1, "d odd");
    require!((q - 1) % p.d == 0, "d divides q-1");
    HypothesisCheck::pass()
}

/// Decomposition index divisible by gcd(q+1, d) (second-reduction shape).
fn unity_index_ok(p: &FamilyParams) -> bool {
    index_multiple_of(p, gcd(p.ctx().q() + 1, p.d))
}

fn index_multiple_of(p: &FamilyParams, g: u64) -> bool {
    match decompose(p.ctx(), p.a, p.b, p.c) {
        Ok(Some(dec)) => dec.i % g == 0,
        _ => false,
    }
}

/// (−1)^r as a field element.
fn minus_one_pow(ctx: &FieldCtx, r: u64) -> FieldElem {
    if r % 2 == 0 {
        FieldElem::ONE
    } else {
        ctx.neg(FieldElem::ONE)
    }
}

/// φ folds to x^k (k ∈ {1, 2}) as a function on {0} ∪ U_n; the tail shape of
/// the power-family entries (u = 0, v = −b, r = 1).
fn monomial_tail(p: &FamilyParams, n: u64) -> HypothesisCheck {
    let ctx = p.ctx();
    require!(p.u.is_zero(), "u = 0");
    require!(p.v == ctx.neg(p.b), "v = -b");
    require!(p.r == 1, "r = 1");
    require!(monomial_exponent(p, n).is_some(), "phi = x^k, k in {1,2}");
    HypothesisCheck::pass()
}

fn monomial_exponent(p: &FamilyParams, n: u64) -> Option<u64> {
    let folded = p.phi().fold_exponents(p.ctx(), n);
    for k in [1u64, 2] {
        if folded == Poly::monomial(k, FieldElem::ONE) {
            return Some(k);
        }
    }
    None
}

fn is_all_ones(phi: &Poly, d: u64) -> bool {
    phi.degree() == Some(d - 1)
        && (0..d).all(|e| phi.coeff(e) == FieldElem::ONE)
}

/// φ = e·(1 + x + … + x^{d−1}) for a nonzero e; returns e.
fn scaled_all_ones(_ctx: &FieldCtx, phi: &Poly, d: u64) -> Option<FieldElem> {
    let e = phi.coeff(0);
    if e.is_zero() || phi.degree() != Some(d - 1) {
        return None;
    }
    (0..d).all(|k| phi.coeff(k) == e).then_some(e)
}

/// The all-ones φ of degree d−1 (the geometric-sum family shape).
pub fn all_ones_phi(d: u64) -> Poly {
    Poly::from_coeffs(vec![FieldElem::ONE; d as usize])
}
