//! Empirical checks of the commutative-diagram bijectivity criterion:
//! given finite sets R, S, S̄ with #S = #S̄ and maps f: R→R, θ: R→S,
//! θ̄: R→S̄, g: S→S̄ with θ̄ ∘ f = g ∘ θ and θ, θ̄ surjective,
//!
//! > f is bijective  ⟺  g is bijective and f is injective on every θ-fiber.
//!
//! Diagrams are materialized as index tables so the checks are flat array
//! walks; sets are whatever the caller indexed (field elements or abstract
//! labels).

use std::collections::HashMap;

use thiserror::Error;

use crate::bitset::StampSet;
use crate::field::FieldElem;
use crate::poly::FuncTable;
use crate::rng::SplitMix64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AgwError {
    #[error("#S = {s} but #S̄ = {sbar}; the criterion requires equal sizes")]
    SizeMismatch { s: usize, sbar: usize },
    #[error("map `{map}` is not total on its stated domain/codomain")]
    NotTotal { map: &'static str },
    #[error("domains of f, θ, θ̄ must agree elementwise")]
    DomainMismatch,
    #[error("diagram does not commute: θ̄∘f ≠ g∘θ")]
    NotCommutative,
    #[error("`{map}` is not surjective")]
    NotSurjective { map: &'static str },
}

/// Both sides of the bijectivity equivalence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EquivalenceSides {
    /// f is bijective on R.
    pub lhs: bool,
    /// g is bijective from S to S̄ and f is injective on every θ-fiber.
    pub rhs: bool,
    pub agree: bool,
}

/// A materialized diagram over index sets 0..r, 0..s, 0..s̄.
#[derive(Debug, Clone)]
pub struct Diagram {
    r_size: usize,
    s_size: usize,
    sbar_size: usize,
    f: Vec<u32>,
    theta: Vec<u32>,
    theta_bar: Vec<u32>,
    g: Vec<u32>,
}

impl Diagram {
    /// Builds a diagram from raw index maps.
    pub fn from_indexed(
        f: Vec<u32>,
        theta: Vec<u32>,
        theta_bar: Vec<u32>,
        g: Vec<u32>,
        s_size: usize,
        sbar_size: usize,
    ) -> Result<Self, AgwError> {
        if s_size != sbar_size {
            return Err(AgwError::SizeMismatch { s: s_size, sbar: sbar_size });
        }
        let r_size = f.len();
        if theta.len() != r_size || theta_bar.len() != r_size {
            return Err(AgwError::DomainMismatch);
        }
        if f.iter().any(|&v| v as usize >= r_size) {
            return Err(AgwError::NotTotal { map: "f" });
        }
        if theta.iter().any(|&v| v as usize >= s_size) {
            return Err(AgwError::NotTotal { map: "theta" });
        }
        if theta_bar.iter().any(|&v| v as usize >= sbar_size) {
            return Err(AgwError::NotTotal { map: "theta_bar" });
        }
        if g.len() != s_size || g.iter().any(|&v| v as usize >= sbar_size) {
            return Err(AgwError::NotTotal { map: "g" });
        }
        Ok(Diagram { r_size, s_size, sbar_size, f, theta, theta_bar, g })
    }

    /// Builds a diagram from element-valued tables. The f/θ/θ̄ tables must
    /// share their domain (R) elementwise; `s` and `s_bar` fix the index
    /// order of the small sets.
    pub fn from_tables(
        f: &FuncTable,
        theta: &FuncTable,
        theta_bar: &FuncTable,
        g: &FuncTable,
        s: &[FieldElem],
        s_bar: &[FieldElem],
    ) -> Result<Self, AgwError> {
        if s.len() != s_bar.len() {
            return Err(AgwError::SizeMismatch { s: s.len(), sbar: s_bar.len() });
        }
        if theta.domain() != f.domain() || theta_bar.domain() != f.domain() {
            return Err(AgwError::DomainMismatch);
        }
        if g.domain() != s {
            return Err(AgwError::NotTotal { map: "g" });
        }
        let r_index: HashMap<FieldElem, u32> = f
            .domain()
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, i as u32))
            .collect();
        let s_index: HashMap<FieldElem, u32> =
            s.iter().enumerate().map(|(i, &x)| (x, i as u32)).collect();
        let sbar_index: HashMap<FieldElem, u32> =
            s_bar.iter().enumerate().map(|(i, &x)| (x, i as u32)).collect();

        let map_values = |t: &FuncTable, idx: &HashMap<FieldElem, u32>, name: &'static str| {
            t.values()
                .iter()
                .map(|v| idx.get(v).copied().ok_or(AgwError::NotTotal { map: name }))
                .collect::<Result<Vec<u32>, AgwError>>()
        };
        let f_idx = map_values(f, &r_index, "f")?;
        let theta_idx = map_values(theta, &s_index, "theta")?;
        let theta_bar_idx = map_values(theta_bar, &sbar_index, "theta_bar")?;
        let g_idx = map_values(g, &sbar_index, "g")?;
        Self::from_indexed(f_idx, theta_idx, theta_bar_idx, g_idx, s.len(), s_bar.len())
    }

    pub fn r_size(&self) -> usize {
        self.r_size
    }

    pub fn s_size(&self) -> usize {
        self.s_size
    }

    /// θ̄ ∘ f = g ∘ θ on every point of R.
    pub fn check_commutes(&self) -> bool {
        (0..self.r_size).all(|i| {
            self.theta_bar[self.f[i] as usize] == self.g[self.theta[i] as usize]
        })
    }

    pub fn theta_surjective(&self) -> bool {
        surjective_indexed(&self.theta, self.s_size)
    }

    pub fn theta_bar_surjective(&self) -> bool {
        surjective_indexed(&self.theta_bar, self.sbar_size)
    }

    /// θ-fibers as r-index lists, indexed by S position. Their union is R and
    /// they are pairwise disjoint by construction.
    pub fn fibers(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.s_size];
        for (i, &s) in self.theta.iter().enumerate() {
            out[s as usize].push(i as u32);
        }
        out
    }

    /// Evaluates both sides of the equivalence without precondition checks.
    pub fn sides(&self) -> EquivalenceSides {
        let lhs = bijective_indexed(&self.f, self.r_size);
        let g_bij = self.s_size == self.sbar_size && bijective_indexed(&self.g, self.sbar_size);
        let fiber_inj = self.fiber_injective();
        let rhs = g_bij && fiber_inj;
        EquivalenceSides { lhs, rhs, agree: lhs == rhs }
    }

    /// f injective on every θ-fiber.
    pub fn fiber_injective(&self) -> bool {
        let mut seen = StampSet::new(self.r_size);
        let fibers = self.fibers();
        for fiber in fibers {
            seen.reset();
            for &i in &fiber {
                if !seen.insert(self.f[i as usize] as usize) {
                    return false;
                }
            }
        }
        true
    }

    /// The full criterion check: verifies the preconditions (commutativity
    /// and surjectivity of θ and θ̄), then evaluates both sides. Under the
    /// preconditions `agree` must come out true; a false `agree` here means
    /// the implementation that produced the diagram is broken.
    pub fn agw_equivalence(&self) -> Result<EquivalenceSides, AgwError> {
        if !self.check_commutes() {
            return Err(AgwError::NotCommutative);
        }
        if !self.theta_surjective() {
            return Err(AgwError::NotSurjective { map: "theta" });
        }
        if !self.theta_bar_surjective() {
            return Err(AgwError::NotSurjective { map: "theta_bar" });
        }
        Ok(self.sides())
    }
}

fn surjective_indexed(map: &[u32], codomain: usize) -> bool {
    let mut seen = StampSet::new(codomain);
    seen.reset();
    let mut hit = 0usize;
    for &v in map {
        if seen.insert(v as usize) {
            hit += 1;
        }
    }
    hit == codomain
}

fn bijective_indexed(map: &[u32], codomain: usize) -> bool {
    if map.len() != codomain {
        return false;
    }
    let mut seen = StampSet::new(codomain);
    seen.reset();
    map.iter().all(|&v| seen.insert(v as usize))
}

/// image(T) = codomain, for element-valued tables.
pub fn surjective(t: &FuncTable, codomain: &[FieldElem]) -> bool {
    let index: HashMap<FieldElem, usize> =
        codomain.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let mut seen = vec![false; codomain.len()];
    for v in t.values() {
        match index.get(v) {
            Some(&i) => seen[i] = true,
            None => return false,
        }
    }
    seen.iter().all(|&b| b)
}

/// Partition of the domain of θ by value: (value, fiber) pairs ordered by
/// value code. Fibers union to the domain and are pairwise disjoint.
pub fn fibers_of(theta: &FuncTable) -> Vec<(FieldElem, Vec<FieldElem>)> {
    let mut groups: HashMap<FieldElem, Vec<FieldElem>> = HashMap::new();
    for (x, v) in theta.iter() {
        groups.entry(v).or_default().push(x);
    }
    let mut out: Vec<(FieldElem, Vec<FieldElem>)> = groups.into_iter().collect();
    out.sort_by_key(|(v, _)| v.code());
    out
}

/// Seeded generator of valid diagrams (commuting, with surjective θ and θ̄)
/// over abstract index sets, used by the self-tests. `g` alternates between
/// a random bijection and an arbitrary random map so both directions of the
/// equivalence get exercised.
pub fn random_valid_diagram(rng: &mut SplitMix64, max_r: usize, force_bijective_g: bool) -> Diagram {
    let r_size = 1 + rng.below(max_r as u64) as usize;
    let s_size = 1 + rng.below(r_size as u64) as usize;

    let surjection = |rng: &mut SplitMix64| {
        // Distinct values on a shuffled prefix guarantee surjectivity.
        let mut slots: Vec<u32> = (0..r_size as u32).collect();
        rng.shuffle(&mut slots);
        let mut map = vec![0u32; r_size];
        for (v, &slot) in slots.iter().take(s_size).enumerate() {
            map[slot as usize] = v as u32;
        }
        for &slot in slots.iter().skip(s_size) {
            map[slot as usize] = rng.below(s_size as u64) as u32;
        }
        map
    };
    let theta = surjection(rng);
    let theta_bar = surjection(rng);

    let g: Vec<u32> = if force_bijective_g {
        let mut perm: Vec<u32> = (0..s_size as u32).collect();
        rng.shuffle(&mut perm);
        perm
    } else {
        (0..s_size).map(|_| rng.below(s_size as u64) as u32).collect()
    };

    // Preimage lists of θ̄, to pick f(x) within θ̄^{-1}(g(θ(x))).
    let mut preimages = vec![Vec::new(); s_size];
    for (i, &t) in theta_bar.iter().enumerate() {
        preimages[t as usize].push(i as u32);
    }
    let f: Vec<u32> = (0..r_size)
        .map(|i| {
            let target = g[theta[i] as usize] as usize;
            let pool = &preimages[target];
            pool[rng.below(pool.len() as u64) as usize]
        })
        .collect();

    Diagram::from_indexed(f, theta, theta_bar, g, s_size, s_size)
        .expect("generated diagram is structurally valid")
}
