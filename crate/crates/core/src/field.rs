//! Table-driven exact arithmetic in F_{q^2} with q = p^m.
//!
//! A [`FieldCtx`] describes F_{q^2} as F_p[x]/(modulus) for a deterministic
//! modulus (the lexicographically smallest monic irreducible of degree 2m,
//! coefficients compared low-degree-first) and a deterministic primitive
//! element ξ (the generator with the smallest canonical coefficient vector in
//! the same ordering). Nonzero elements are manipulated through exp/log
//! tables; addition goes through the Zech logarithm table Z with
//! 1 + ξ^k = ξ^{Z(k)}.
//!
//! Elements are [`FieldElem`] values carrying the canonical code
//! Σ cᵢ·pⁱ of the coefficient vector (c₀, …, c_{2m−1}), so equality is code
//! equality and the zero element is code 0 in every field.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{gcd, is_prime, prime_factors};

/// Default cap on q² (table sizes stay desk-scale).
pub const DEFAULT_TABLE_BOUND: u64 = 1 << 16;

const LOG_ZERO: u32 = u32::MAX;
const ZECH_NONE: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("{0} is not prime (write prime powers as p^m, e.g. 2^2)")]
    NonPrime(u64),
    #[error("field too large: q² = {q_sq} exceeds the table bound {bound}")]
    BoundExceeded { q_sq: u64, bound: u64 },
    #[error("no irreducible polynomial of degree {0} found (internal error)")]
    NoIrreducible(u32),
    #[error("invalid field spec `{0}`: expected `p` or `p^m`")]
    BadSpec(String),
    #[error("invalid element `{text}`: {reason}")]
    BadElement { text: String, reason: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("{n} does not divide q²−1 = {order}")]
    NotUnityOrder { n: u64, order: u64 },
}

/// Element of F_{q^2}, stored as the canonical code of its coefficient vector.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Default, PartialOrd, Ord)]
pub struct FieldElem(u32);

impl FieldElem {
    pub const ZERO: FieldElem = FieldElem(0);
    pub const ONE: FieldElem = FieldElem(1);

    #[inline]
    pub fn code(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// Field size specification `p` or `p^m` (q = p^m; the context is F_{q^2}).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct FieldSpec {
    pub p: u64,
    pub m: u32,
}

impl FieldSpec {
    pub fn q(&self) -> u64 {
        self.p.pow(self.m)
    }

    pub fn build(&self) -> Result<FieldCtx, FieldError> {
        FieldCtx::new(self.p, self.m)
    }
}

impl FromStr for FieldSpec {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, FieldError> {
        let bad = || FieldError::BadSpec(s.to_string());
        let (p_str, m_str) = match s.split_once('^') {
            Some((p, m)) => (p, m),
            None => (s, "1"),
        };
        let p: u64 = p_str.trim().parse().map_err(|_| bad())?;
        let m: u32 = m_str.trim().parse().map_err(|_| bad())?;
        if m == 0 {
            return Err(bad());
        }
        Ok(FieldSpec { p, m })
    }
}

impl std::fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.m == 1 {
            write!(f, "{}", self.p)
        } else {
            write!(f, "{}^{}", self.p, self.m)
        }
    }
}

/// Immutable description of F_{q^2} with its subfield F_q.
#[derive(Debug, Clone)]
pub struct FieldCtx {
    p: u64,
    m: u32,
    q: u64,
    q_sq: u64,
    /// q² − 1, order of the multiplicative group.
    order: u64,
    /// Monic irreducible of degree 2m over F_p; index = degree.
    modulus: Vec<u64>,
    xi: FieldElem,
    exp_table: Vec<FieldElem>,
    log_table: Vec<u32>,
    zech_table: Vec<u32>,
    /// log(−1) = (q²−1)/2 for odd p; 0 in characteristic 2.
    neg_shift: u64,
}

impl FieldCtx {
    /// Builds F_{q^2} for q = p^m under the default table bound.
    pub fn new(p: u64, m: u32) -> Result<Self, FieldError> {
        Self::with_bound(p, m, DEFAULT_TABLE_BOUND)
    }

    /// Builds F_{q^2} with an explicit bound on q².
    pub fn with_bound(p: u64, m: u32, bound: u64) -> Result<Self, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NonPrime(p));
        }
        assert!(m >= 1, "extension degree m must be positive");
        let deg = 2 * m;
        let q_sq = p
            .checked_pow(deg)
            .filter(|&n| n <= bound)
            .ok_or_else(|| FieldError::BoundExceeded {
                q_sq: p.checked_pow(deg).unwrap_or(u64::MAX),
                bound,
            })?;
        let q = p.pow(m);
        let order = q_sq - 1;

        let modulus = smallest_irreducible(p, deg).ok_or(FieldError::NoIrreducible(deg))?;
        let xi = primitive_element(p, deg, &modulus, order);

        // exp/log tables by walking powers of ξ in coefficient representation.
        let mut exp_table = vec![FieldElem::ZERO; order as usize];
        let mut log_table = vec![LOG_ZERO; q_sq as usize];
        let xi_vec = decode_vec(xi.0 as u64, p, deg);
        let mut cur = vec![0u64; deg as usize];
        cur[0] = 1;
        for k in 0..order {
            let code = encode_vec(&cur, p);
            exp_table[k as usize] = FieldElem(code as u32);
            log_table[code as usize] = k as u32;
            cur = vec_mul_mod(&cur, &xi_vec, p, &modulus);
        }
        debug_assert_eq!(encode_vec(&cur, p), 1, "ξ^(q²−1) must be 1");

        // Zech table: 1 + ξ^k in coefficient form, then back to log form.
        let mut zech_table = vec![ZECH_NONE; order as usize];
        for k in 0..order as usize {
            let mut v = decode_vec(exp_table[k].0 as u64, p, deg);
            v[0] = (v[0] + 1) % p;
            let code = encode_vec(&v, p);
            zech_table[k] = if code == 0 { ZECH_NONE } else { log_table[code as usize] };
        }

        let neg_shift = if p == 2 { 0 } else { order / 2 };
        Ok(FieldCtx {
            p,
            m,
            q,
            q_sq,
            order,
            modulus,
            xi,
            exp_table,
            log_table,
            zech_table,
            neg_shift,
        })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn m(&self) -> u32 {
        self.m
    }

    #[inline]
    pub fn q(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn q_sq(&self) -> u64 {
        self.q_sq
    }

    /// q² − 1.
    #[inline]
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn spec(&self) -> FieldSpec {
        FieldSpec { p: self.p, m: self.m }
    }

    /// Defining modulus, coefficients by ascending degree (monic, degree 2m).
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    /// The canonical primitive element ξ.
    #[inline]
    pub fn xi(&self) -> FieldElem {
        self.xi
    }

    /// ξ^k.
    #[inline]
    pub fn xi_pow(&self, k: u64) -> FieldElem {
        self.exp_table[(k % self.order) as usize]
    }

    /// Discrete log of a nonzero element.
    #[inline]
    pub fn log(&self, x: FieldElem) -> Option<u64> {
        let l = self.log_table[x.0 as usize];
        (l != LOG_ZERO).then_some(l as u64)
    }

    /// All elements in code order (0, 1, …, q²−1).
    pub fn elements(&self) -> impl Iterator<Item = FieldElem> + '_ {
        (0..self.q_sq as u32).map(FieldElem)
    }

    pub fn elem_from_code(&self, code: u64) -> Option<FieldElem> {
        (code < self.q_sq).then_some(FieldElem(code as u32))
    }

    /// Embeds an integer as a prime-subfield constant (reduced mod p).
    pub fn embed(&self, n: i64) -> FieldElem {
        let p = self.p as i64;
        FieldElem(n.rem_euclid(p) as u32)
    }

    /// Element from a coefficient vector (low degree first, reduced mod p).
    pub fn elem_from_coeffs(&self, coeffs: &[i64]) -> Result<FieldElem, FieldError> {
        let deg = (2 * self.m) as usize;
        if coeffs.len() > deg {
            return Err(FieldError::BadElement {
                text: format!("{coeffs:?}"),
                reason: format!("expected at most {deg} coefficients"),
            });
        }
        let p = self.p as i64;
        let mut code = 0u64;
        for (i, &c) in coeffs.iter().enumerate() {
            code += (c.rem_euclid(p) as u64) * self.p.pow(i as u32);
        }
        Ok(FieldElem(code as u32))
    }

    /// Coefficient vector (c₀, …, c_{2m−1}) of an element.
    pub fn coeffs(&self, x: FieldElem) -> Vec<u64> {
        decode_vec(x.0 as u64, self.p, 2 * self.m)
    }

    /// Sort key realizing the canonical element order (coefficients compared
    /// low-degree-first, same ordering as the modulus selection).
    pub fn canon_key(&self, x: FieldElem) -> u64 {
        let deg = 2 * self.m;
        let v = decode_vec(x.0 as u64, self.p, deg);
        let mut key = 0u64;
        for c in v {
            key = key * self.p + c;
        }
        key
    }

    pub fn sort_canonical(&self, elems: &mut [FieldElem]) {
        elems.sort_by_key(|&x| self.canon_key(x));
    }

    // ---- arithmetic -------------------------------------------------------

    #[inline]
    fn reduce_log(&self, k: u64) -> u64 {
        if k >= self.order {
            k - self.order
        } else {
            k
        }
    }

    /// Addition through the Zech table.
    #[inline]
    pub fn add(&self, x: FieldElem, y: FieldElem) -> FieldElem {
        if x.is_zero() {
            return y;
        }
        if y.is_zero() {
            return x;
        }
        let i = self.log_table[x.0 as usize] as u64;
        let j = self.log_table[y.0 as usize] as u64;
        let k = self.reduce_log(j + self.order - i);
        let z = self.zech_table[k as usize];
        if z == ZECH_NONE {
            FieldElem::ZERO
        } else {
            self.exp_table[self.reduce_log(i + z as u64) as usize]
        }
    }

    /// Coefficient-vector addition; the independent route used to validate
    /// the Zech table.
    pub fn add_coeffwise(&self, x: FieldElem, y: FieldElem) -> FieldElem {
        let deg = 2 * self.m;
        let a = decode_vec(x.0 as u64, self.p, deg);
        let b = decode_vec(y.0 as u64, self.p, deg);
        let sum: Vec<u64> = a.iter().zip(&b).map(|(&u, &v)| (u + v) % self.p).collect();
        FieldElem(encode_vec(&sum, self.p) as u32)
    }

    #[inline]
    pub fn neg(&self, x: FieldElem) -> FieldElem {
        if self.p == 2 || x.is_zero() {
            return x;
        }
        let i = self.log_table[x.0 as usize] as u64;
        self.exp_table[self.reduce_log(i + self.neg_shift) as usize]
    }

    #[inline]
    pub fn sub(&self, x: FieldElem, y: FieldElem) -> FieldElem {
        self.add(x, self.neg(y))
    }

    #[inline]
    pub fn mul(&self, x: FieldElem, y: FieldElem) -> FieldElem {
        if x.is_zero() || y.is_zero() {
            return FieldElem::ZERO;
        }
        let i = self.log_table[x.0 as usize] as u64;
        let j = self.log_table[y.0 as usize] as u64;
        self.exp_table[self.reduce_log(i + j) as usize]
    }

    pub fn inv(&self, x: FieldElem) -> Result<FieldElem, FieldError> {
        if x.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        let i = self.log_table[x.0 as usize] as u64;
        Ok(self.exp_table[((self.order - i) % self.order) as usize])
    }

    pub fn div(&self, x: FieldElem, y: FieldElem) -> Result<FieldElem, FieldError> {
        Ok(self.mul(x, self.inv(y)?))
    }

    /// x^e with the conventions 0^0 = 1 and 0^e = 0 for e ≥ 1.
    #[inline]
    pub fn pow(&self, x: FieldElem, e: u64) -> FieldElem {
        if x.is_zero() {
            return if e == 0 { FieldElem::ONE } else { FieldElem::ZERO };
        }
        let i = self.log_table[x.0 as usize] as u64;
        self.exp_table[((i * (e % self.order)) % self.order) as usize]
    }

    /// x^(-e) for nonzero x.
    pub fn pow_neg(&self, x: FieldElem, e: u64) -> Result<FieldElem, FieldError> {
        Ok(self.pow(self.inv(x)?, e))
    }

    /// The conjugation x ↦ x^q (order-2 automorphism fixing F_q).
    #[inline]
    pub fn frobenius(&self, x: FieldElem) -> FieldElem {
        self.pow(x, self.q)
    }

    /// x^{q+1} ∈ F_q.
    #[inline]
    pub fn norm(&self, x: FieldElem) -> FieldElem {
        self.pow(x, self.q + 1)
    }

    /// x + x^q ∈ F_q.
    #[inline]
    pub fn trace(&self, x: FieldElem) -> FieldElem {
        self.add(x, self.frobenius(x))
    }

    #[inline]
    pub fn in_subfield(&self, x: FieldElem) -> bool {
        self.frobenius(x) == x
    }

    #[inline]
    pub fn has_zero_trace(&self, x: FieldElem) -> bool {
        self.trace(x).is_zero()
    }

    /// The subfield F_q = {0} ∪ {ξ^{(q+1)j}}, listed in canonical order.
    pub fn subfield(&self) -> Vec<FieldElem> {
        let mut out = Vec::with_capacity(self.q as usize);
        out.push(FieldElem::ZERO);
        for j in 0..self.q - 1 {
            out.push(self.xi_pow((self.q + 1) * j));
        }
        self.sort_canonical(&mut out);
        out
    }

    /// U_n, the n-th roots of unity, in ξ-power order
    /// (ξ^{k(q²−1)/n} for k = 0, …, n−1).
    pub fn roots_of_unity(&self, n: u64) -> Result<Vec<FieldElem>, FieldError> {
        if n == 0 || self.order % n != 0 {
            return Err(FieldError::NotUnityOrder { n, order: self.order });
        }
        let step = self.order / n;
        Ok((0..n).map(|k| self.xi_pow(step * k)).collect())
    }

    /// Elements with zero trace, in code order.
    pub fn trace_zero_set(&self) -> Vec<FieldElem> {
        self.elements().filter(|&x| self.has_zero_trace(x)).collect()
    }

    // ---- text format ------------------------------------------------------

    /// Canonical element text: prime-subfield constants print as integers,
    /// everything else as a `[c0,c1,...]` coefficient list.
    pub fn format_elem(&self, x: FieldElem) -> String {
        let v = self.coeffs(x);
        if v[1..].iter().all(|&c| c == 0) {
            return v[0].to_string();
        }
        let mut s = String::from("[");
        for (i, c) in v.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{c}");
        }
        s.push(']');
        s
    }

    /// Parses the element text format (integers may be negative).
    pub fn parse_elem(&self, text: &str) -> Result<FieldElem, FieldError> {
        let t = text.trim();
        let bad = |reason: &str| FieldError::BadElement {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        if let Some(inner) = t.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or_else(|| bad("missing `]`"))?;
            let mut coeffs = Vec::new();
            for part in inner.split(',') {
                let c: i64 = part.trim().parse().map_err(|_| bad("bad coefficient"))?;
                coeffs.push(c);
            }
            self.elem_from_coeffs(&coeffs)
        } else {
            let n: i64 = t.parse().map_err(|_| bad("expected integer or [c0,c1,...]"))?;
            Ok(self.embed(n))
        }
    }
}

// ---- construction helpers over F_p[x] --------------------------------------
//
// Polynomials here are dense coefficient vectors over F_p (index = degree),
// used only while building a context.

fn decode_vec(code: u64, p: u64, len: u32) -> Vec<u64> {
    let mut v = Vec::with_capacity(len as usize);
    let mut c = code;
    for _ in 0..len {
        v.push(c % p);
        c /= p;
    }
    v
}

fn encode_vec(v: &[u64], p: u64) -> u64 {
    let mut code = 0u64;
    for &c in v.iter().rev() {
        code = code * p + c;
    }
    code
}

/// Product of two coefficient vectors of length `deg`, reduced mod `modulus`.
fn vec_mul_mod(a: &[u64], b: &[u64], p: u64, modulus: &[u64]) -> Vec<u64> {
    let deg = a.len();
    let mut prod = vec![0u64; 2 * deg - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + ai * bj) % p;
        }
    }
    // Reduce by the monic modulus of degree `deg`.
    for k in (deg..prod.len()).rev() {
        let c = prod[k];
        if c == 0 {
            continue;
        }
        prod[k] = 0;
        for (i, &mi) in modulus.iter().enumerate().take(deg) {
            let idx = k - deg + i;
            prod[idx] = (prod[idx] + c * (p - mi % p)) % p;
        }
    }
    prod.truncate(deg);
    prod
}

fn vec_pow_mod(base: &[u64], mut e: u64, p: u64, modulus: &[u64]) -> Vec<u64> {
    let deg = base.len();
    let mut result = vec![0u64; deg];
    result[0] = 1;
    let mut acc = base.to_vec();
    while e > 0 {
        if e & 1 == 1 {
            result = vec_mul_mod(&result, &acc, p, modulus);
        }
        acc = vec_mul_mod(&acc, &acc, p, modulus);
        e >>= 1;
    }
    result
}

// Dense polynomial helpers (no modulus), for the irreducibility test.

fn poly_trim(v: &mut Vec<u64>) {
    while v.len() > 1 && *v.last().unwrap() == 0 {
        v.pop();
    }
}

fn poly_rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    poly_trim(&mut r);
    let mut divisor = b.to_vec();
    poly_trim(&mut divisor);
    let db = divisor.len() - 1;
    let lead_inv = mod_inv(divisor[db], p);
    loop {
        if r.len() == 1 && r[0] == 0 {
            break;
        }
        let dr = r.len() - 1;
        if dr < db {
            break;
        }
        let factor = (r[dr] * lead_inv) % p;
        for (i, &di) in divisor.iter().enumerate() {
            let idx = dr - db + i;
            r[idx] = (r[idx] + p - (factor * di) % p) % p;
        }
        poly_trim(&mut r);
    }
    r
}

fn poly_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    poly_trim(&mut x);
    poly_trim(&mut y);
    while !(y.len() == 1 && y[0] == 0) {
        let r = poly_rem(&x, &y, p);
        x = y;
        y = r;
    }
    x
}

fn mod_inv(a: u64, p: u64) -> u64 {
    // p is prime, so a^(p-2) works.
    let mut result = 1u64;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            result = result * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    result
}

/// x^(p^k) mod f, via x^e with e = p^k (exponents stay ≤ q² ≤ table bound).
fn x_power_mod(e: u64, p: u64, f: &[u64]) -> Vec<u64> {
    let deg = f.len() - 1;
    let mut x = vec![0u64; deg];
    if deg == 1 {
        // x ≡ -f[0] mod f for linear f; unused in practice (deg = 2m ≥ 2).
        x[0] = (p - f[0] % p) % p;
        return x;
    }
    x[1] = 1;
    vec_pow_mod(&x, e, p, f)
}

fn is_irreducible(f: &[u64], p: u64) -> bool {
    let n = (f.len() - 1) as u32;
    if n == 1 {
        return true;
    }
    // x^(p^n) must equal x mod f …
    let xq = x_power_mod(p.pow(n), p, f);
    let mut x_itself = vec![0u64; f.len() - 1];
    x_itself[1] = 1;
    if xq != x_itself {
        return false;
    }
    // … and gcd(x^(p^(n/ℓ)) − x, f) must be constant for every prime ℓ | n.
    for l in prime_factors(n as u64) {
        let e = p.pow(n / l as u32);
        let mut g = x_power_mod(e, p, f);
        g[1] = (g[1] + p - 1) % p;
        poly_trim(&mut g);
        let d = poly_gcd(f, &g, p);
        if d.len() > 1 {
            return false;
        }
    }
    true
}

/// Lexicographically smallest monic irreducible of degree `deg`
/// (coefficients compared low-degree-first).
fn smallest_irreducible(p: u64, deg: u32) -> Option<Vec<u64>> {
    let total = p.checked_pow(deg)?;
    for n in 0..total {
        // n encodes (c0, c1, …) with c0 the most significant digit, so the
        // scan order is exactly low-degree-first lexicographic.
        let mut f = vec![0u64; deg as usize + 1];
        let mut rest = n;
        for i in (0..deg as usize).rev() {
            // i runs from high to low degree; low-degree digits are the
            // most significant part of n.
            f[deg as usize - 1 - i] = rest / p.pow(i as u32);
            rest %= p.pow(i as u32);
        }
        f[deg as usize] = 1;
        if is_irreducible(&f, p) {
            return Some(f);
        }
    }
    None
}

/// Generator of F_{q^2}^× with the smallest canonical coefficient vector.
fn primitive_element(p: u64, deg: u32, modulus: &[u64], order: u64) -> FieldElem {
    let factors = prime_factors(order);
    let total = order + 1;
    // Enumerate candidates in canonical (low-degree-first) order.
    for n in 1..total {
        let mut v = vec![0u64; deg as usize];
        let mut rest = n;
        for i in (0..deg as usize).rev() {
            v[deg as usize - 1 - i] = rest / p.pow(i as u32);
            rest %= p.pow(i as u32);
        }
        if v.iter().all(|&c| c == 0) {
            continue;
        }
        let is_generator = factors.iter().all(|&l| {
            let e = order / l;
            let w = vec_pow_mod(&v, e, p, modulus);
            encode_vec(&w, p) != 1
        });
        if is_generator {
            return FieldElem(encode_vec(&v, p) as u32);
        }
    }
    unreachable!("the multiplicative group of a finite field is cyclic");
}

/// gcd for public consumers of the crate (rule hypotheses etc.).
pub fn gcd_u64(a: u64, b: u64) -> u64 {
    gcd(a, b)
}

/// Serialization-friendly verdict on `p` primality for the CLI.
pub fn check_prime(p: u64) -> bool {
    is_prime(p)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSummary {
    pub spec: String,
    pub p: u64,
    pub m: u32,
    pub q: u64,
    pub q_sq: u64,
    pub modulus: Vec<u64>,
    pub xi: String,
}

impl FieldCtx {
    pub fn summary(&self) -> FieldSummary {
        FieldSummary {
            spec: self.spec().to_string(),
            p: self.p,
            m: self.m,
            q: self.q,
            q_sq: self.q_sq,
            modulus: self.modulus.clone(),
            xi: self.format_elem(self.xi),
        }
    }
}
