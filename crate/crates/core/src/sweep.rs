//! Deterministic grid enumeration, cross-validation against the brute-force
//! oracle, and machine-readable reports.
//!
//! A [`GridSpec`] names per-parameter value lists (or shorthands like
//! `"subfield"`), which resolve into a [`TupleSpace`]: a mixed-radix index
//! space with d outermost, then a, b, c, u, v, r and φ innermost, so
//! consecutive indices share the (d, a, b, c, u, v) cell and the per-cell
//! θ/ψ tables amortize. Enumeration order (and therefore every report
//! stream) depends only on the grid and the seed, never on worker count.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::StampSet;
use crate::families::{triple_first_failure, FamilyEval, FamilyParams};
use crate::field::{FieldCtx, FieldElem};
use crate::poly::Poly;
use crate::rng::SplitMix64;
use crate::rules::{RuleId, RuleSemantics, Verdict};
use crate::util::divisors;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error("grid too large: {0} tuples (cap {1})")]
    TooLarge(u64, u64),
}

/// What a check evaluates: the brute-force oracle, the rule prediction, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    Brute,
    Rule,
    Both,
}

/// Outcome record for one (tuple, rule) check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub field: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleId>,
    pub a: String,
    pub b: String,
    pub c: String,
    pub u: String,
    pub v: String,
    pub r: u64,
    pub d: u64,
    pub phi: String,
    pub hypotheses_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_clause: Option<String>,
    pub reduced_condition: Option<bool>,
    pub predicted: Option<Verdict>,
    pub brute_force: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cpp_confirmed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagram_agrees: Option<bool>,
    pub agree: bool,
    pub elapsed_us: u64,
}

impl CheckReport {
    /// Fixed CSV column order, matching [`CheckReport::csv_row`].
    pub const CSV_HEADER: &'static str = "field,rule,a,b,c,u,v,r,d,phi,hypotheses_ok,failed_clause,reduced_condition,predicted,brute_force,cpp_confirmed,diagram_agrees,agree,elapsed_us";

    pub fn csv_row(&self) -> String {
        let opt = |o: &Option<String>| o.clone().unwrap_or_default();
        let optb = |o: &Option<bool>| o.map(|b| b.to_string()).unwrap_or_default();
        let optv = |o: &Option<Verdict>| o.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.field,
            self.rule.map(|r| r.to_string()).unwrap_or_default(),
            csv_quote(&self.a),
            csv_quote(&self.b),
            csv_quote(&self.c),
            csv_quote(&self.u),
            csv_quote(&self.v),
            self.r,
            self.d,
            csv_quote(&self.phi),
            self.hypotheses_ok,
            opt(&self.failed_clause),
            optb(&self.reduced_condition),
            optv(&self.predicted),
            optv(&self.brute_force),
            optb(&self.cpp_confirmed),
            optb(&self.diagram_agrees),
            self.agree,
            self.elapsed_us
        )
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') {
        format!("\"{s}\"")
    } else {
        s.to_string()
    }
}

/// Aggregated sweep outcome. `agreements + disagreements` equals
/// `hypotheses_satisfied`; tuples outside a rule's hypothesis region are
/// enumerated but not judged.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SweepSummary {
    pub tuples_enumerated: u64,
    pub hypotheses_satisfied: u64,
    pub agreements: u64,
    pub disagreements: u64,
    pub diagram_checks: u64,
    pub diagram_failures: u64,
    pub wall_ms: u64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub disagreement_reports: Vec<CheckReport>,
}

impl SweepSummary {
    fn absorb(&mut self, other: SweepSummary) {
        self.tuples_enumerated += other.tuples_enumerated;
        self.hypotheses_satisfied += other.hypotheses_satisfied;
        self.agreements += other.agreements;
        self.disagreements += other.disagreements;
        self.diagram_checks += other.diagram_checks;
        self.diagram_failures += other.diagram_failures;
        self.disagreement_reports.extend(other.disagreement_reports);
    }
}

// ---- grid language ----------------------------------------------------------

/// Element axis: a shorthand set name, one element, or an explicit list.
/// Shorthands: `all`, `units` (nonzero), `subfield`, `trace-zero`, `norm-one`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum AxisSpec {
    One(String),
    List(Vec<String>),
}

impl Default for AxisSpec {
    fn default() -> Self {
        AxisSpec::One("0".to_string())
    }
}

impl AxisSpec {
    fn resolve(&self, ctx: &FieldCtx) -> Result<Vec<FieldElem>, GridError> {
        let from_text = |t: &str| -> Result<Vec<FieldElem>, GridError> {
            match t {
                "all" => Ok(ctx.elements().collect()),
                "units" => Ok(ctx.elements().skip(1).collect()),
                "subfield" => Ok(ctx.subfield()),
                "trace-zero" => Ok(ctx.trace_zero_set()),
                "norm-one" => Ok(ctx
                    .roots_of_unity(ctx.q() + 1)
                    .expect("q+1 divides q²−1")),
                other => ctx
                    .parse_elem(other)
                    .map(|e| vec![e])
                    .map_err(|e| GridError::Invalid(e.to_string())),
            }
        };
        match self {
            AxisSpec::One(t) => from_text(t),
            AxisSpec::List(items) => {
                let mut out = Vec::new();
                for item in items {
                    out.extend(from_text(item)?);
                }
                if out.is_empty() {
                    return Err(GridError::Invalid("empty axis".into()));
                }
                Ok(out)
            }
        }
    }
}

/// Exponent axis: a list, a single value, `"units"` (r coprime to
/// (q²−1)/d, 1 ≤ r ≤ (q²−1)/d), or `{"max": K}` for 1..=K.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum RSpec {
    One(u64),
    List(Vec<u64>),
    Named(String),
    Max { max: u64 },
}

impl Default for RSpec {
    fn default() -> Self {
        RSpec::One(1)
    }
}

impl RSpec {
    fn resolve(&self, ctx: &FieldCtx, d: u64) -> Result<Vec<u64>, GridError> {
        let m = ctx.order() / d;
        match self {
            RSpec::One(r) => Ok(vec![*r]),
            RSpec::List(rs) => Ok(rs.clone()),
            RSpec::Max { max } => Ok((1..=*max).collect()),
            RSpec::Named(name) if name == "units" => {
                Ok((1..=m).filter(|&r| crate::util::gcd(r, m) == 1).collect())
            }
            RSpec::Named(other) => Err(GridError::Invalid(format!(
                "unknown r shorthand `{other}` (expected \"units\")"
            ))),
        }
    }
}

/// Divisor axis: a list, a single divisor, or `"all"` divisors of q²−1.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum DSpec {
    One(u64),
    List(Vec<u64>),
    Named(String),
}

impl Default for DSpec {
    fn default() -> Self {
        DSpec::One(1)
    }
}

impl DSpec {
    fn resolve(&self, ctx: &FieldCtx) -> Result<Vec<u64>, GridError> {
        let check = |ds: Vec<u64>| -> Result<Vec<u64>, GridError> {
            for &d in &ds {
                if d == 0 || ctx.order() % d != 0 {
                    return Err(GridError::Invalid(format!(
                        "d = {d} does not divide q²−1 = {}",
                        ctx.order()
                    )));
                }
            }
            Ok(ds)
        };
        match self {
            DSpec::One(d) => check(vec![*d]),
            DSpec::List(ds) => check(ds.clone()),
            DSpec::Named(name) if name == "all" => Ok(divisors(ctx.order())),
            DSpec::Named(other) => Err(GridError::Invalid(format!(
                "unknown d shorthand `{other}` (expected \"all\")"
            ))),
        }
    }
}

/// φ axis: explicit polynomial texts, or a coefficient span
/// `{"deg_lt": N, "coeffs": <element axis>}` enumerating every polynomial of
/// degree < N with coefficients drawn from the axis.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PhiSpec {
    One(String),
    List(Vec<String>),
    Span { deg_lt: u32, coeffs: AxisSpec },
}

impl Default for PhiSpec {
    fn default() -> Self {
        PhiSpec::One("0:1".to_string())
    }
}

const PHI_SPAN_CAP: u64 = 20_000_000;

impl PhiSpec {
    fn resolve(&self, ctx: &FieldCtx) -> Result<Vec<Poly>, GridError> {
        match self {
            PhiSpec::One(t) => Ok(vec![
                Poly::parse(ctx, t).map_err(|e| GridError::Invalid(e.to_string()))?
            ]),
            PhiSpec::List(items) => items
                .iter()
                .map(|t| Poly::parse(ctx, t).map_err(|e| GridError::Invalid(e.to_string())))
                .collect(),
            PhiSpec::Span { deg_lt, coeffs } => {
                let pool = coeffs.resolve(ctx)?;
                let count = (pool.len() as u64)
                    .checked_pow(*deg_lt)
                    .filter(|&n| n <= PHI_SPAN_CAP)
                    .ok_or(GridError::TooLarge(u64::MAX, PHI_SPAN_CAP))?;
                let mut out = Vec::with_capacity(count as usize);
                let width = *deg_lt as usize;
                let mut idx = vec![0usize; width];
                loop {
                    let coeffs: Vec<FieldElem> = idx.iter().map(|&i| pool[i]).collect();
                    out.push(Poly::from_coeffs(coeffs));
                    // odometer with the constant coefficient fastest
                    let mut k = 0;
                    loop {
                        if k == width {
                            return Ok(out);
                        }
                        idx[k] += 1;
                        if idx[k] < pool.len() {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                    }
                }
            }
        }
    }
}

/// Grid over the family parameters. Unspecified axes default to a = b = 1,
/// c = u = v = 0, r = 1, d = 1, φ = 1.
#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "one_axis")]
    pub a: AxisSpec,
    #[serde(default = "one_axis")]
    pub b: AxisSpec,
    #[serde(default)]
    pub c: AxisSpec,
    #[serde(default)]
    pub u: AxisSpec,
    #[serde(default)]
    pub v: AxisSpec,
    #[serde(default)]
    pub r: RSpec,
    #[serde(default)]
    pub d: DSpec,
    #[serde(default)]
    pub phi: PhiSpec,
}

fn one_axis() -> AxisSpec {
    AxisSpec::One("1".to_string())
}

impl GridSpec {
    pub fn from_json(text: &str) -> Result<Self, GridError> {
        serde_json::from_str(text).map_err(|e| GridError::Invalid(e.to_string()))
    }

    /// The grid used by `--exhaustive`: every a, b, c, u, v, every
    /// r ≤ (q²−1)/d, φ = 1, over the given divisors (default d = 1).
    pub fn exhaustive(d: DSpec) -> Self {
        GridSpec {
            a: AxisSpec::One("units".into()),
            b: AxisSpec::One("units".into()),
            c: AxisSpec::One("all".into()),
            u: AxisSpec::One("all".into()),
            v: AxisSpec::One("all".into()),
            r: RSpec::Named("units".into()),
            d,
            phi: PhiSpec::default(),
        }
    }

    pub fn resolve<'a>(&self, ctx: &'a FieldCtx) -> Result<TupleSpace<'a>, GridError> {
        let a = self.a.resolve(ctx)?;
        let b = self.b.resolve(ctx)?;
        let c = self.c.resolve(ctx)?;
        let u = self.u.resolve(ctx)?;
        let v = self.v.resolve(ctx)?;
        let phi = self.phi.resolve(ctx)?;
        let ds = self.d.resolve(ctx)?;
        let cell_count = (a.len() * b.len() * c.len() * u.len() * v.len()) as u64;
        let mut blocks = Vec::new();
        let mut offset = 0u64;
        for d in ds {
            let r_values = self.r.resolve(ctx, d)?;
            if r_values.is_empty() || r_values.iter().any(|&r| r == 0) {
                return Err(GridError::Invalid("r axis must be positive".into()));
            }
            let count = cell_count * r_values.len() as u64 * phi.len() as u64;
            blocks.push(DBlock { d, r_values, offset, count });
            offset += count;
        }
        Ok(TupleSpace { ctx, a, b, c, u, v, phi, blocks })
    }
}

#[derive(Debug, Clone)]
struct DBlock {
    d: u64,
    r_values: Vec<u64>,
    offset: u64,
    count: u64,
}

/// A resolved grid: an indexable tuple space with deterministic order.
#[derive(Debug, Clone)]
pub struct TupleSpace<'a> {
    ctx: &'a FieldCtx,
    a: Vec<FieldElem>,
    b: Vec<FieldElem>,
    c: Vec<FieldElem>,
    u: Vec<FieldElem>,
    v: Vec<FieldElem>,
    phi: Vec<Poly>,
    blocks: Vec<DBlock>,
}

/// One enumerated assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawTuple {
    pub d: u64,
    pub a: FieldElem,
    pub b: FieldElem,
    pub c: FieldElem,
    pub u: FieldElem,
    pub v: FieldElem,
    pub r: u64,
    pub phi_idx: usize,
}

/// The cell (shared θ/ψ tables) a tuple belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CellKey {
    d: u64,
    a: FieldElem,
    b: FieldElem,
    c: FieldElem,
    u: FieldElem,
    v: FieldElem,
}

impl<'a> TupleSpace<'a> {
    pub fn ctx(&self) -> &'a FieldCtx {
        self.ctx
    }

    pub fn len(&self) -> u64 {
        self.blocks.last().map(|b| b.offset + b.count).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn phi(&self, idx: usize) -> &Poly {
        &self.phi[idx]
    }

    pub fn get(&self, idx: u64) -> RawTuple {
        let block = self
            .blocks
            .iter()
            .rev()
            .find(|b| idx >= b.offset)
            .expect("index within space");
        let mut rest = idx - block.offset;
        let phi_len = self.phi.len() as u64;
        let r_len = block.r_values.len() as u64;
        let phi_idx = (rest % phi_len) as usize;
        rest /= phi_len;
        let r = block.r_values[(rest % r_len) as usize];
        rest /= r_len;
        let v = self.v[(rest % self.v.len() as u64) as usize];
        rest /= self.v.len() as u64;
        let u = self.u[(rest % self.u.len() as u64) as usize];
        rest /= self.u.len() as u64;
        let c = self.c[(rest % self.c.len() as u64) as usize];
        rest /= self.c.len() as u64;
        let b = self.b[(rest % self.b.len() as u64) as usize];
        rest /= self.b.len() as u64;
        let a = self.a[(rest % self.a.len() as u64) as usize];
        RawTuple { d: block.d, a, b, c, u, v, r, phi_idx }
    }
}

// ---- per-cell fused checker -------------------------------------------------

/// Scratch buffers reused across tuples by one worker. The diagram buffers
/// (fiber occupancy is q·q² slots) are only allocated on first use.
pub struct Workspace {
    occ: StampSet,
    f_values: Vec<FieldElem>,
    diagram: Option<DiagramScratch>,
}

struct DiagramScratch {
    g_occ: StampSet,
    fiber_occ: StampSet,
    g_values: Vec<FieldElem>,
}

impl Workspace {
    pub fn new(ctx: &FieldCtx) -> Self {
        let q_sq = ctx.q_sq() as usize;
        Workspace {
            occ: StampSet::new(q_sq),
            f_values: vec![FieldElem::ZERO; q_sq],
            diagram: None,
        }
    }

    fn diagram_scratch(&mut self, ctx: &FieldCtx) -> &mut DiagramScratch {
        self.diagram.get_or_insert_with(|| {
            let q_sq = ctx.q_sq() as usize;
            let q = ctx.q() as usize;
            DiagramScratch {
                g_occ: StampSet::new(q),
                fiber_occ: StampSet::new(q * q_sq),
                g_values: vec![FieldElem::ZERO; q],
            }
        })
    }
}

/// Per-cell state: θ, θ^m, ψ tables, the image set S with index maps, and the
/// pushed-forward coefficients, shared by every (r, φ) in the cell.
pub struct CellCheck<'a> {
    ctx: &'a FieldCtx,
    pub key_d: u64,
    eval: FamilyEval,
    triple_failure: Option<&'static str>,
    /// S in canonical order (only when the triple hypotheses hold).
    s: Vec<FieldElem>,
    /// code → index in S (u32::MAX outside S).
    s_index: Vec<u32>,
    /// per element x (code order): index of θ(x) in S.
    theta_s_idx: Vec<u32>,
    /// s^m for every s in S.
    s_m: Vec<FieldElem>,
    aa: FieldElem,
    bb: FieldElem,
    cc: FieldElem,
    uv_gap: FieldElem,
    theta_bar_surjective: std::cell::OnceCell<bool>,
}

impl<'a> CellCheck<'a> {
    pub fn new(
        ctx: &'a FieldCtx,
        d: u64,
        a: FieldElem,
        b: FieldElem,
        c: FieldElem,
        u: FieldElem,
        v: FieldElem,
    ) -> Self {
        let eval = FamilyEval::new(ctx, a, b, c, u, v, d);
        let triple_failure = triple_first_failure(ctx, a, b, c);
        let q = ctx.q();
        let aa = ctx.sub(ctx.mul(b, u), ctx.mul(a, v));
        let bb = ctx.sub(ctx.mul(a, ctx.pow(u, q)), ctx.mul(b, ctx.pow(v, q)));
        let uv_gap = ctx.sub(ctx.norm(u), ctx.norm(v));
        let cc = ctx.mul(uv_gap, c);

        let (s, s_index, theta_s_idx, s_m) = if triple_failure.is_none() {
            let q_sq = ctx.q_sq() as usize;
            let mut s_index = vec![u32::MAX; q_sq];
            let mut s = Vec::new();
            for idx in 0..q_sq {
                let t = eval.theta_at(idx);
                if s_index[t.code() as usize] == u32::MAX {
                    s_index[t.code() as usize] = 0; // placeholder
                    s.push(t);
                }
            }
            ctx.sort_canonical(&mut s);
            for (i, e) in s.iter().enumerate() {
                s_index[e.code() as usize] = i as u32;
            }
            let theta_s_idx: Vec<u32> = (0..q_sq)
                .map(|idx| s_index[eval.theta_at(idx).code() as usize])
                .collect();
            let m = ctx.order() / d;
            let s_m: Vec<FieldElem> = s.iter().map(|&e| ctx.pow(e, m)).collect();
            (s, s_index, theta_s_idx, s_m)
        } else {
            (Vec::new(), Vec::new(), Vec::new(), Vec::new())
        };

        CellCheck {
            ctx,
            key_d: d,
            eval,
            triple_failure,
            s,
            s_index,
            theta_s_idx,
            s_m,
            aa,
            bb,
            cc,
            uv_gap,
            theta_bar_surjective: std::cell::OnceCell::new(),
        }
    }

    /// θ̄ = aa·x^q + bb·x + cc must cover S (a precondition of the
    /// equivalence; holds under the hypotheses whenever aa ≠ 0). Computed on
    /// first diagram use and cached for the cell.
    fn theta_bar_covers_s(&self) -> bool {
        *self.theta_bar_surjective.get_or_init(|| {
            let ctx = self.ctx;
            let mut seen = StampSet::new(self.s.len());
            seen.reset();
            let mut hit = 0usize;
            for x in ctx.elements() {
                let tb = ctx.add(
                    ctx.add(ctx.mul(self.aa, ctx.frobenius(x)), ctx.mul(self.bb, x)),
                    self.cc,
                );
                let si = self.s_index[tb.code() as usize];
                if si != u32::MAX && seen.insert(si as usize) {
                    hit += 1;
                }
            }
            hit == self.s.len()
        })
    }

    pub fn from_tuple(ctx: &'a FieldCtx, t: &RawTuple) -> Self {
        Self::new(ctx, t.d, t.a, t.b, t.c, t.u, t.v)
    }

    pub fn triple_ok(&self) -> bool {
        self.triple_failure.is_none()
    }

    /// Brute-force bijectivity of f for (r, φ), aborting at the first
    /// collision when `fill` is false. When `fill` is true all values are
    /// stored in the workspace for the diagram checks.
    pub fn brute_is_pp(&self, r: u64, phi: &Poly, ws: &mut Workspace, fill: bool) -> bool {
        let ctx = self.ctx;
        let q_sq = ctx.q_sq() as usize;
        ws.occ.reset();
        let mut bijective = true;
        for idx in 0..q_sq {
            let fv = self.eval.f_at(ctx, idx, r, phi);
            if fill {
                ws.f_values[idx] = fv;
            }
            if !ws.occ.insert(fv.code() as usize) {
                bijective = false;
                if !fill {
                    return false;
                }
            }
        }
        bijective
    }

    /// Brute-force bijectivity of f + x (the complete-mapping check).
    pub fn brute_shifted_is_pp(&self, r: u64, phi: &Poly, ws: &mut Workspace) -> bool {
        let ctx = self.ctx;
        ws.occ.reset();
        for (idx, x) in ctx.elements().enumerate() {
            let fv = ctx.add(self.eval.f_at(ctx, idx, r, phi), x);
            if !ws.occ.insert(fv.code() as usize) {
                return false;
            }
        }
        true
    }

    /// The twist A^{1−r}B^{qr}; `None` when undefined (A = 0, r ≥ 2, B ≠ 0).
    fn twist(&self, r: u64) -> Option<FieldElem> {
        let ctx = self.ctx;
        if self.bb.is_zero() {
            return Some(FieldElem::ZERO);
        }
        let b_pow = ctx.pow(self.bb, ctx.q() * r);
        if r == 1 {
            return Some(b_pow);
        }
        if self.aa.is_zero() {
            return None;
        }
        let inv = ctx.inv(self.aa).expect("aa != 0");
        Some(ctx.mul(ctx.pow(inv, r - 1), b_pow))
    }

    /// Fused equivalence check of the first-reduction diagram for (r, φ):
    /// verifies commutativity and θ̄-surjectivity, computes both bijectivity
    /// sides independently (f on the field; g on S plus injectivity of f on
    /// every θ-fiber), and returns whether they agree.
    ///
    /// Requires a prior `brute_is_pp(.., fill = true)` call for the same
    /// (r, φ) so that `ws.f_values` is populated. Returns `None` when the
    /// diagram is unavailable (triple hypotheses fail or g is undefined).
    pub fn diagram_agrees(
        &self,
        r: u64,
        phi: &Poly,
        f_bijective: bool,
        ws: &mut Workspace,
    ) -> Option<bool> {
        if self.triple_failure.is_some() {
            return None;
        }
        if self.aa.is_zero() {
            // θ̄ collapses to a constant, so the surjectivity precondition
            // of the equivalence cannot hold; there is no valid diagram.
            return None;
        }
        let twist = match self.twist(r) {
            Some(t) => t,
            None => return None,
        };
        let ctx = self.ctx;
        let q_sq = ctx.q_sq() as usize;

        // g on S
        let s_len = self.s.len();
        {
            let scratch = ws.diagram_scratch(ctx);
            for i in 0..s_len {
                let w = phi.eval(ctx, self.s_m[i]);
                let head = ctx.add(ctx.mul(self.bb, w), ctx.mul(twist, ctx.frobenius(w)));
                scratch.g_values[i] = ctx.add(
                    ctx.mul(ctx.pow(self.s[i], r), head),
                    ctx.mul(self.uv_gap, self.s[i]),
                );
            }
        }

        // commutativity: θ̄(f(x)) = g(θ(x)) for all x
        let mut commutes = true;
        for idx in 0..q_sq {
            let fv = ws.f_values[idx];
            let tb = ctx.add(
                ctx.add(ctx.mul(self.aa, ctx.frobenius(fv)), ctx.mul(self.bb, fv)),
                self.cc,
            );
            let gv = ws.diagram.as_ref().expect("just initialized").g_values
                [self.theta_s_idx[idx] as usize];
            if tb != gv {
                commutes = false;
                break;
            }
        }
        if !commutes || !self.theta_bar_covers_s() {
            // Preconditions of the equivalence are violated; report as a
            // failed diagram so sweeps surface it loudly.
            return Some(false);
        }

        let scratch = ws.diagram.as_mut().expect("just initialized");

        // rhs, part 1: g bijective on S
        scratch.g_occ.reset();
        let mut g_bijective = true;
        for i in 0..s_len {
            let si = self.s_index[scratch.g_values[i].code() as usize];
            if si == u32::MAX || !scratch.g_occ.insert(si as usize) {
                g_bijective = false;
                break;
            }
        }

        // rhs, part 2: f injective on every θ-fiber
        scratch.fiber_occ.reset();
        let mut fiber_injective = true;
        for idx in 0..q_sq {
            let key = self.theta_s_idx[idx] as usize * q_sq + ws.f_values[idx].code() as usize;
            if !scratch.fiber_occ.insert(key) {
                fiber_injective = false;
                break;
            }
        }

        let rhs = g_bijective && fiber_injective;
        Some(f_bijective == rhs)
    }

    pub fn make_params(&self, t: &RawTuple, phi: Poly) -> FamilyParams<'a> {
        FamilyParams::new(self.ctx, t.a, t.b, t.c, t.u, t.v, t.r, t.d, phi)
            .expect("resolved grids only produce valid (r, d)")
    }
}

// ---- engine -----------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub mode: CheckMode,
    /// Run the first-reduction diagram equivalence alongside each in-region check.
    pub check_diagrams: bool,
    /// Seeded uniform subsample of the tuple space.
    pub budget: Option<u64>,
    pub seed: u64,
    /// Check f + x as well (complete mappings); implied by rules that claim it.
    pub cpp: bool,
    /// Run brute force even when the rule's hypotheses fail (single checks).
    pub brute_on_na: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            mode: CheckMode::Both,
            check_diagrams: false,
            budget: None,
            seed: 0,
            cpp: false,
            brute_on_na: false,
        }
    }
}

const CHUNK: u64 = 2048;
const MAX_ATTACHED_DISAGREEMENTS: usize = 4096;

/// Floyd's uniform sample of `budget` distinct indices in `0..total`
/// (bounded draws even when budget is close to total).
fn sampled_indices(total: u64, budget: u64, seed: u64) -> Vec<u64> {
    let mut rng = SplitMix64::new(seed);
    let mut picked = HashSet::with_capacity(budget as usize);
    for j in total - budget..total {
        let t = rng.below(j + 1);
        if !picked.insert(t) {
            picked.insert(j);
        }
    }
    let mut out: Vec<u64> = picked.into_iter().collect();
    out.sort_unstable();
    out
}

/// One (tuple, rule) evaluation against an already-built cell.
fn judge_tuple(
    cell: &CellCheck,
    tuple: &RawTuple,
    phi: &Poly,
    rule: Option<RuleId>,
    opts: &SweepOptions,
    ws: &mut Workspace,
) -> TupleOutcome {
    let params = cell.make_params(tuple, phi.clone());

    let (hyp_ok, failed_clause, predicted, reduced) = match (rule, opts.mode) {
        (Some(rule), CheckMode::Rule | CheckMode::Both) => {
            let h = rule.hypotheses(&params);
            if h.ok {
                let predicted = rule.predict(&params);
                let reduced = rule.reduced_condition(&params).ok();
                (true, None, Some(predicted), reduced)
            } else {
                (false, h.failed_clause, Some(Verdict::NotApplicable), None)
            }
        }
        _ => (true, None, None, None),
    };

    let want_brute = match opts.mode {
        CheckMode::Rule => false,
        CheckMode::Brute => true,
        CheckMode::Both => rule.is_none() || hyp_ok || opts.brute_on_na,
    };
    let want_diagram = opts.check_diagrams && hyp_ok && cell.triple_ok();
    let brute = if want_brute {
        Some(cell.brute_is_pp(tuple.r, phi, ws, want_diagram))
    } else {
        None
    };
    let cpp_wanted = opts.cpp || rule.map(|r| r.claims_cpp()).unwrap_or(false);
    let cpp = if cpp_wanted && want_brute {
        Some(brute == Some(true) && cell.brute_shifted_is_pp(tuple.r, phi, ws))
    } else {
        None
    };
    let diagram = if want_diagram {
        brute.and_then(|b| cell.diagram_agrees(tuple.r, phi, b, ws))
    } else {
        None
    };

    TupleOutcome {
        hyp_ok,
        failed_clause,
        predicted,
        reduced,
        brute: brute.map(|b| if b { Verdict::Pp } else { Verdict::NotPp }),
        cpp,
        diagram,
        agree: agreement(rule, predicted, brute, cpp),
    }
}

fn agreement(
    rule: Option<RuleId>,
    predicted: Option<Verdict>,
    brute: Option<bool>,
    cpp: Option<bool>,
) -> bool {
    let (Some(rule), Some(predicted), Some(brute)) = (rule, predicted, brute) else {
        return true;
    };
    let ok = match (rule.semantics(), predicted) {
        (_, Verdict::NotApplicable) => true,
        (RuleSemantics::Iff, Verdict::Pp) => brute,
        (RuleSemantics::Iff, Verdict::NotPp) => !brute,
        (RuleSemantics::SufficientOnly, Verdict::Pp) => brute,
        (RuleSemantics::SufficientOnly, Verdict::NotPp) => true,
    };
    // A CPP-claiming rule is also contradicted when f + x fails.
    let cpp_ok = !(rule.claims_cpp() && predicted == Verdict::Pp && cpp == Some(false));
    ok && cpp_ok
}

struct TupleOutcome {
    hyp_ok: bool,
    failed_clause: Option<&'static str>,
    predicted: Option<Verdict>,
    reduced: Option<bool>,
    brute: Option<Verdict>,
    cpp: Option<bool>,
    diagram: Option<bool>,
    agree: bool,
}

fn outcome_report(
    ctx: &FieldCtx,
    tuple: &RawTuple,
    phi: &Poly,
    rule: Option<RuleId>,
    outcome: &TupleOutcome,
    elapsed_us: u64,
) -> CheckReport {
    CheckReport {
        field: ctx.spec().to_string(),
        rule,
        a: ctx.format_elem(tuple.a),
        b: ctx.format_elem(tuple.b),
        c: ctx.format_elem(tuple.c),
        u: ctx.format_elem(tuple.u),
        v: ctx.format_elem(tuple.v),
        r: tuple.r,
        d: tuple.d,
        phi: phi.format(ctx),
        hypotheses_ok: outcome.hyp_ok,
        failed_clause: outcome.failed_clause.map(str::to_string),
        reduced_condition: outcome.reduced,
        predicted: outcome.predicted,
        brute_force: outcome.brute,
        cpp_confirmed: outcome.cpp,
        diagram_agrees: outcome.diagram,
        agree: outcome.agree,
        elapsed_us,
    }
}

/// Index stream: either the full range or a sampled, sorted subset.
enum IndexPlan {
    Full(u64),
    Sampled(Vec<u64>),
}

impl IndexPlan {
    fn len(&self) -> u64 {
        match self {
            IndexPlan::Full(n) => *n,
            IndexPlan::Sampled(v) => v.len() as u64,
        }
    }

    fn index(&self, pos: u64) -> u64 {
        match self {
            IndexPlan::Full(_) => pos,
            IndexPlan::Sampled(v) => v[pos as usize],
        }
    }
}

fn make_plan(space: &TupleSpace, opts: &SweepOptions) -> IndexPlan {
    let total = space.len();
    match opts.budget {
        Some(budget) if budget < total => {
            IndexPlan::Sampled(sampled_indices(total, budget, opts.seed))
        }
        _ => IndexPlan::Full(total),
    }
}

fn run_chunk(
    space: &TupleSpace,
    plan: &IndexPlan,
    rules: &[RuleId],
    opts: &SweepOptions,
    start: u64,
    end: u64,
    materialize: bool,
) -> (SweepSummary, Vec<CheckReport>) {
    let ctx = space.ctx();
    let mut ws = Workspace::new(ctx);
    let mut cell: Option<(CellKey, CellCheck)> = None;
    let mut summary = SweepSummary::default();
    let mut reports = Vec::new();

    for pos in start..end {
        let idx = plan.index(pos);
        let tuple = space.get(idx);
        let key = CellKey {
            d: tuple.d,
            a: tuple.a,
            b: tuple.b,
            c: tuple.c,
            u: tuple.u,
            v: tuple.v,
        };
        if cell.as_ref().map(|(k, _)| *k != key).unwrap_or(true) {
            cell = Some((key, CellCheck::from_tuple(ctx, &tuple)));
        }
        let cell_ref = &cell.as_ref().unwrap().1;
        let phi = space.phi(tuple.phi_idx);

        let run_one = |rule: Option<RuleId>,
                           summary: &mut SweepSummary,
                           reports: &mut Vec<CheckReport>,
                           ws: &mut Workspace| {
            let started = if materialize { Some(Instant::now()) } else { None };
            let outcome = judge_tuple(cell_ref, &tuple, phi, rule, opts, ws);
            summary.tuples_enumerated += 1;
            if outcome.hyp_ok && rule.is_some() {
                summary.hypotheses_satisfied += 1;
                if outcome.agree {
                    summary.agreements += 1;
                } else {
                    summary.disagreements += 1;
                }
            }
            if let Some(diagram) = outcome.diagram {
                summary.diagram_checks += 1;
                if !diagram {
                    summary.diagram_failures += 1;
                }
            }
            let anomalous = !outcome.agree || outcome.diagram == Some(false);
            if materialize || anomalous {
                let elapsed = started.map(|s| s.elapsed().as_micros() as u64).unwrap_or(0);
                let report = outcome_report(ctx, &tuple, phi, rule, &outcome, elapsed);
                if anomalous && summary.disagreement_reports.len() < MAX_ATTACHED_DISAGREEMENTS {
                    summary.disagreement_reports.push(report.clone());
                }
                if materialize {
                    reports.push(report);
                }
            }
        };

        if rules.is_empty() {
            run_one(None, &mut summary, &mut reports, &mut ws);
        } else {
            for &rule in rules {
                run_one(Some(rule), &mut summary, &mut reports, &mut ws);
            }
        }
    }
    (summary, reports)
}

/// Cross-validates the rules over the grid; summary only (per-check reports
/// are materialized only for disagreements and diagram failures).
pub fn crossval(space: &TupleSpace, rules: &[RuleId], opts: &SweepOptions) -> SweepSummary {
    let started = Instant::now();
    let plan = make_plan(space, opts);
    let total = plan.len();
    let chunks: Vec<(u64, u64)> = (0..total.div_ceil(CHUNK))
        .map(|i| (i * CHUNK, ((i + 1) * CHUNK).min(total)))
        .collect();
    let mut summary = chunks
        .par_iter()
        .map(|&(s, e)| run_chunk(space, &plan, rules, opts, s, e, false).0)
        .reduce(SweepSummary::default, |mut acc, part| {
            acc.absorb(part);
            acc
        });
    summary.wall_ms = started.elapsed().as_millis() as u64;
    summary
}

/// Cross-validates and streams every per-check report, in enumeration order,
/// independent of worker count.
pub fn crossval_with(
    space: &TupleSpace,
    rules: &[RuleId],
    opts: &SweepOptions,
    mut sink: impl FnMut(&CheckReport),
) -> SweepSummary {
    let started = Instant::now();
    let plan = make_plan(space, opts);
    let total = plan.len();
    let wave = CHUNK * (rayon::current_num_threads() as u64).max(1) * 2;
    let mut summary = SweepSummary::default();
    let mut wave_start = 0u64;
    while wave_start < total {
        let wave_end = (wave_start + wave).min(total);
        let chunk_bounds: Vec<(u64, u64)> = (wave_start..wave_end)
            .step_by(CHUNK as usize)
            .map(|s| (s, (s + CHUNK).min(wave_end)))
            .collect();
        let parts: Vec<(SweepSummary, Vec<CheckReport>)> = chunk_bounds
            .par_iter()
            .map(|&(s, e)| run_chunk(space, &plan, rules, opts, s, e, true))
            .collect();
        for (part, reports) in parts {
            summary.absorb(part);
            for report in &reports {
                sink(report);
            }
        }
        wave_start = wave_end;
    }
    summary.wall_ms = started.elapsed().as_millis() as u64;
    summary
}

/// Emits the tuples whose predicted-and-confirmed verdict is PP (CPP when
/// `opts.cpp`), in enumeration order, up to `limit`.
pub fn search(
    space: &TupleSpace,
    rule: RuleId,
    opts: &SweepOptions,
    limit: Option<u64>,
) -> (Vec<CheckReport>, SweepSummary) {
    let started = Instant::now();
    let plan = make_plan(space, opts);
    let total = plan.len();
    let mut found = Vec::new();
    let mut summary = SweepSummary::default();
    if limit == Some(0) {
        return (found, summary);
    }
    let wave = CHUNK * (rayon::current_num_threads() as u64).max(1) * 2;
    let mut wave_start = 0u64;
    'outer: while wave_start < total {
        let wave_end = (wave_start + wave).min(total);
        let chunk_bounds: Vec<(u64, u64)> = (wave_start..wave_end)
            .step_by(CHUNK as usize)
            .map(|s| (s, (s + CHUNK).min(wave_end)))
            .collect();
        let parts: Vec<(SweepSummary, Vec<CheckReport>)> = chunk_bounds
            .par_iter()
            .map(|&(s, e)| {
                let (part, mut reports) = run_chunk(space, &plan, &[rule], opts, s, e, true);
                reports.retain(|rep| {
                    rep.predicted == Some(Verdict::Pp)
                        && rep.brute_force == Some(Verdict::Pp)
                        && rep.agree
                        && (!opts.cpp || rep.cpp_confirmed == Some(true))
                });
                (part, reports)
            })
            .collect();
        for (part, reports) in parts {
            summary.absorb(part);
            for report in reports {
                found.push(report);
                if let Some(k) = limit {
                    if found.len() as u64 >= k {
                        break 'outer;
                    }
                }
            }
        }
        wave_start = wave_end;
    }
    summary.wall_ms = started.elapsed().as_millis() as u64;
    (found, summary)
}

/// Single-instance check (the `verify` command): evaluates the rule and/or
/// the brute-force oracle for one parameter tuple. Brute force runs even
/// when the rule is not applicable.
pub fn check_one(
    params: &FamilyParams,
    rule: Option<RuleId>,
    mode: CheckMode,
    cpp: bool,
) -> CheckReport {
    let ctx = params.ctx();
    let tuple = RawTuple {
        d: params.d,
        a: params.a,
        b: params.b,
        c: params.c,
        u: params.u,
        v: params.v,
        r: params.r,
        phi_idx: 0,
    };
    let cell = CellCheck::from_tuple(ctx, &tuple);
    let mut ws = Workspace::new(ctx);
    let opts = SweepOptions {
        mode,
        check_diagrams: false,
        budget: None,
        seed: 0,
        cpp,
        brute_on_na: true,
    };
    let started = Instant::now();
    let outcome = judge_tuple(&cell, &tuple, params.phi_raw(), rule, &opts, &mut ws);
    outcome_report(
        ctx,
        &tuple,
        params.phi_raw(),
        rule,
        &outcome,
        started.elapsed().as_micros() as u64,
    )
}
