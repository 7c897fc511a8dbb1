//! Exact arithmetic in the Grassmann algebra over the rationals.
//!
//! A [`Supernumber`] is a finite linear combination of monomials in
//! anticommuting generators `θ0, θ1, ...` with `BigRational` coefficients.
//! Monomials are kept in canonical form: generator indices strictly
//! ascending, signs absorbed into the coefficients, zero coefficients never
//! stored. The number of generators available to a computation is fixed by a
//! [`Context`]; a computation that would need a generator beyond the budget
//! fails loudly instead of silently truncating.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

/// Hard cap on generator budgets: monomials are stored as `u128` bit masks.
pub const MAX_GENERATORS: usize = 128;

/// Z2 grading. Odd quantities anticommute among themselves.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn from_usize(k: usize) -> Parity {
        if k % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn is_odd(self) -> bool {
        self == Parity::Odd
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Parity addition is mod 2; the parity of a product is the sum of parities.
impl Add for Parity {
    type Output = Parity;

    fn add(self, rhs: Parity) -> Parity {
        if self == rhs {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Even => write!(f, "even"),
            Parity::Odd => write!(f, "odd"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GrassmannError {
    /// Operands were built over different generator budgets.
    ContextMismatch { left: usize, right: usize },
    /// A generator index at or beyond the context budget was requested.
    GeneratorBudget { index: usize, budget: usize },
    /// Inversion of a supernumber with zero body.
    NotInvertible,
    /// An operation required an even (or homogeneous) element.
    ParityError,
}

impl fmt::Display for GrassmannError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrassmannError::ContextMismatch { left, right } => {
                write!(f, "generator context mismatch: {left} vs {right}")
            }
            GrassmannError::GeneratorBudget { index, budget } => {
                write!(f, "generator {index} out of budget {budget}")
            }
            GrassmannError::NotInvertible => write!(f, "supernumber has zero body"),
            GrassmannError::ParityError => write!(f, "operation requires an even supernumber"),
        }
    }
}

impl std::error::Error for GrassmannError {}

/// Generator budget shared by all values of one computation.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Context {
    generators: usize,
}

impl Context {
    /// A context with `generators` anticommuting generators (at most 128).
    pub fn new(generators: usize) -> Context {
        assert!(
            generators <= MAX_GENERATORS,
            "generator budget {generators} exceeds the hard cap {MAX_GENERATORS}"
        );
        Context { generators }
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    fn check_index(&self, index: usize) -> Result<(), GrassmannError> {
        if index < self.generators {
            Ok(())
        } else {
            Err(GrassmannError::GeneratorBudget {
                index,
                budget: self.generators,
            })
        }
    }

    fn check_same(&self, other: &Context) -> Result<(), GrassmannError> {
        if self == other {
            Ok(())
        } else {
            Err(GrassmannError::ContextMismatch {
                left: self.generators,
                right: other.generators,
            })
        }
    }
}

/// A product of distinct generators, stored as a bit mask.
///
/// Ordered by (degree, lexicographic on the ascending index sequence), which
/// is the canonical presentation order used for display and serialization.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(u128);

impl Monomial {
    pub const EMPTY: Monomial = Monomial(0);

    /// Monomial from strictly ascending generator indices.
    pub fn from_ascending(indices: &[usize]) -> Monomial {
        let mut mask = 0u128;
        let mut prev: Option<usize> = None;
        for &i in indices {
            assert!(i < MAX_GENERATORS, "generator index {i} out of range");
            if let Some(p) = prev {
                assert!(i > p, "generator indices must be strictly ascending");
            }
            prev = Some(i);
            mask |= 1u128 << i;
        }
        Monomial(mask)
    }

    pub fn degree(&self) -> u32 {
        self.0.count_ones()
    }

    pub fn parity(&self) -> Parity {
        Parity::from_usize(self.degree() as usize)
    }

    pub fn contains(&self, index: usize) -> bool {
        index < MAX_GENERATORS && self.0 & (1u128 << index) != 0
    }

    pub fn indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.degree() as usize);
        let mut mask = self.0;
        while mask != 0 {
            let i = mask.trailing_zeros() as usize;
            out.push(i);
            mask &= mask - 1;
        }
        out
    }

    pub fn max_index(&self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(127 - self.0.leading_zeros() as usize)
        }
    }

    fn disjoint(&self, other: &Monomial) -> bool {
        self.0 & other.0 == 0
    }

    fn union(&self, other: &Monomial) -> Monomial {
        Monomial(self.0 | other.0)
    }

    fn without(&self, index: usize) -> Monomial {
        Monomial(self.0 & !(1u128 << index))
    }

    /// Count of generators in `self` with index strictly below `index`.
    fn count_below(&self, index: usize) -> u32 {
        if index >= MAX_GENERATORS {
            self.degree()
        } else {
            (self.0 & ((1u128 << index) - 1)).count_ones()
        }
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Lexicographic order on ascending index sequences equals descending
        // order of the bit-reversed masks.
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.reverse_bits().cmp(&self.0.reverse_bits()))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Koszul sign of `a * b` as true = negative: parity of the number of pairs
/// `(i in a, j in b)` with `i > j`.
fn interleave_negative(a: u128, b: u128) -> bool {
    let mut count = 0u32;
    let mut rest = a;
    while rest != 0 {
        let i = rest.trailing_zeros();
        if i > 0 {
            count += (b & ((1u128 << i) - 1)).count_ones();
        }
        rest &= rest - 1;
    }
    count % 2 == 1
}

/// Element of the Grassmann algebra Λ[θ0..θN-1] over the rationals.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Supernumber {
    ctx: Context,
    terms: BTreeMap<Monomial, BigRational>,
}

impl Supernumber {
    pub fn zero(ctx: Context) -> Supernumber {
        Supernumber {
            ctx,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(ctx: Context) -> Supernumber {
        Supernumber::from_rational(ctx, BigRational::one())
    }

    pub fn from_rational(ctx: Context, value: BigRational) -> Supernumber {
        let mut terms = BTreeMap::new();
        if !value.is_zero() {
            terms.insert(Monomial::EMPTY, value);
        }
        Supernumber { ctx, terms }
    }

    pub fn from_int(ctx: Context, value: i64) -> Supernumber {
        Supernumber::from_rational(ctx, BigRational::from_integer(BigInt::from(value)))
    }

    /// The generator θ_index.
    pub fn generator(ctx: Context, index: usize) -> Result<Supernumber, GrassmannError> {
        ctx.check_index(index)?;
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::from_ascending(&[index]), BigRational::one());
        Ok(Supernumber { ctx, terms })
    }

    /// `coeff * θ_{i1} θ_{i2} ...` with strictly ascending indices.
    pub fn monomial(
        ctx: Context,
        indices: &[usize],
        coeff: BigRational,
    ) -> Result<Supernumber, GrassmannError> {
        for &i in indices {
            ctx.check_index(i)?;
        }
        let mono = Monomial::from_ascending(indices);
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(mono, coeff);
        }
        Ok(Supernumber { ctx, terms })
    }

    pub fn context(&self) -> Context {
        self.ctx
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of the empty monomial.
    pub fn body(&self) -> BigRational {
        self.terms
            .get(&Monomial::EMPTY)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// Everything except the body.
    pub fn soul(&self) -> Supernumber {
        let mut terms = self.terms.clone();
        terms.remove(&Monomial::EMPTY);
        Supernumber {
            ctx: self.ctx,
            terms,
        }
    }

    /// Exact coefficient of the canonical (ascending) monomial on the given
    /// generator set; zero when absent.
    pub fn coeff(&self, indices: &[usize]) -> BigRational {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), indices.len(), "duplicate generator index");
        let mono = Monomial::from_ascending(&sorted);
        self.terms.get(&mono).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    /// Common parity of all monomials, or `None` when zero or inhomogeneous.
    pub fn parity(&self) -> Option<Parity> {
        let mut it = self.terms.keys();
        let first = it.next()?.parity();
        for mono in it {
            if mono.parity() != first {
                return None;
            }
        }
        Some(first)
    }

    /// Zero counts as homogeneous of either parity.
    pub fn is_homogeneous(&self, parity: Parity) -> bool {
        self.terms.keys().all(|m| m.parity() == parity)
    }

    pub fn is_even(&self) -> bool {
        self.is_homogeneous(Parity::Even)
    }

    pub fn is_odd(&self) -> bool {
        self.is_homogeneous(Parity::Odd)
    }

    /// Largest generator index appearing in any monomial.
    pub fn max_generator(&self) -> Option<usize> {
        self.terms.keys().filter_map(|m| m.max_index()).max()
    }

    pub fn scale(&self, factor: &BigRational) -> Supernumber {
        if factor.is_zero() {
            return Supernumber::zero(self.ctx);
        }
        Supernumber {
            ctx: self.ctx,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (*m, c * factor))
                .collect(),
        }
    }

    fn add_term(terms: &mut BTreeMap<Monomial, BigRational>, mono: Monomial, coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        match terms.entry(mono) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    /// Checked product; the infix `*` panics on context mismatch instead.
    pub fn mul_checked(&self, rhs: &Supernumber) -> Result<Supernumber, GrassmannError> {
        self.ctx.check_same(&rhs.ctx)?;
        let mut terms = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                if !ma.disjoint(mb) {
                    continue;
                }
                let coeff = ca * cb;
                let coeff = if interleave_negative(ma.0, mb.0) {
                    -coeff
                } else {
                    coeff
                };
                Supernumber::add_term(&mut terms, ma.union(mb), coeff);
            }
        }
        Ok(Supernumber {
            ctx: self.ctx,
            terms,
        })
    }

    pub fn add_checked(&self, rhs: &Supernumber) -> Result<Supernumber, GrassmannError> {
        self.ctx.check_same(&rhs.ctx)?;
        let mut terms = self.terms.clone();
        for (m, c) in &rhs.terms {
            Supernumber::add_term(&mut terms, *m, c.clone());
        }
        Ok(Supernumber {
            ctx: self.ctx,
            terms,
        })
    }

    /// Exact inverse of an even supernumber with nonzero body, by the finite
    /// geometric series in the nilpotent part.
    pub fn inv(&self) -> Result<Supernumber, GrassmannError> {
        if !self.is_even() {
            return Err(GrassmannError::ParityError);
        }
        let body = self.body();
        if body.is_zero() {
            return Err(GrassmannError::NotInvertible);
        }
        let body_inv = body.recip();
        // x = b(1 + u) with u nilpotent; x^{-1} = b^{-1} sum (-u)^k.
        let minus_u = -self.soul().scale(&body_inv);
        let mut acc = Supernumber::one(self.ctx);
        let mut power = Supernumber::one(self.ctx);
        loop {
            power = power.mul_checked(&minus_u)?;
            if power.is_zero() {
                break;
            }
            acc = acc.add_checked(&power)?;
        }
        Ok(acc.scale(&body_inv))
    }

    /// Left coefficient of the odd generator θ_g: each canonical term
    /// `c·θ_S` with `g ∈ S` contributes `(-1)^{#(S below g)} c·θ_{S∖g}`,
    /// i.e. the term is rewritten with θ_g moved to the far left first.
    pub fn left_coefficient(&self, generator: usize) -> Supernumber {
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            if !m.contains(generator) {
                continue;
            }
            let neg = m.count_below(generator) % 2 == 1;
            let coeff = if neg { -c.clone() } else { c.clone() };
            Supernumber::add_term(&mut terms, m.without(generator), coeff);
        }
        Supernumber {
            ctx: self.ctx,
            terms,
        }
    }

    /// Coefficient of the even probe ε = θ_a θ_b with `a < b` adjacent fresh
    /// indices. ε is central, so no sign is picked up.
    pub fn pair_coefficient(&self, a: usize, b: usize) -> Supernumber {
        assert!(a < b, "probe pair must be ordered");
        debug_assert_eq!(b, a + 1, "even probes use adjacent generator indices");
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            if m.contains(a) && m.contains(b) {
                Supernumber::add_term(&mut terms, m.without(a).without(b), c.clone());
            }
        }
        Supernumber {
            ctx: self.ctx,
            terms,
        }
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&Supernumber> for &Supernumber {
            type Output = Supernumber;
            fn $method(self, rhs: &Supernumber) -> Supernumber {
                self.$checked(rhs).expect("supernumber context mismatch")
            }
        }

        impl $trait<Supernumber> for Supernumber {
            type Output = Supernumber;
            fn $method(self, rhs: Supernumber) -> Supernumber {
                (&self).$method(&rhs)
            }
        }

        impl $trait<&Supernumber> for Supernumber {
            type Output = Supernumber;
            fn $method(self, rhs: &Supernumber) -> Supernumber {
                (&self).$method(rhs)
            }
        }
    };
}

forward_binop!(Add, add, add_checked);
forward_binop!(Mul, mul, mul_checked);

impl Sub<&Supernumber> for &Supernumber {
    type Output = Supernumber;
    fn sub(self, rhs: &Supernumber) -> Supernumber {
        self.add_checked(&-rhs).expect("supernumber context mismatch")
    }
}

impl Sub<Supernumber> for Supernumber {
    type Output = Supernumber;
    fn sub(self, rhs: Supernumber) -> Supernumber {
        &self - &rhs
    }
}

impl Neg for &Supernumber {
    type Output = Supernumber;
    fn neg(self) -> Supernumber {
        Supernumber {
            ctx: self.ctx,
            terms: self.terms.iter().map(|(m, c)| (*m, -c.clone())).collect(),
        }
    }
}

impl Neg for Supernumber {
    type Output = Supernumber;
    fn neg(self) -> Supernumber {
        -&self
    }
}

impl fmt::Display for Supernumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            let negative = c.is_negative();
            let abs = c.abs();
            if first {
                if negative {
                    write!(f, "-")?;
                }
                first = false;
            } else if negative {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.degree() == 0 {
                write!(f, "{abs}")?;
            } else {
                if !abs.is_one() {
                    write!(f, "{abs}·")?;
                }
                for i in m.indices() {
                    write!(f, "θ{i}")?;
                }
            }
        }
        Ok(())
    }
}

/// Bump allocator for fresh generator indices inside one test instance.
///
/// Sampling draws argument generators first; derivative probes are allocated
/// above them with stack discipline (`mark`/`reset`), so a released probe
/// index can be reused by a sibling derivative without ever colliding with a
/// live value.
#[derive(Clone, Debug)]
pub struct GenArena {
    ctx: Context,
    next: usize,
}

impl GenArena {
    pub fn new(ctx: Context) -> GenArena {
        GenArena { ctx, next: 0 }
    }

    pub fn starting_at(ctx: Context, next: usize) -> GenArena {
        GenArena { ctx, next }
    }

    pub fn context(&self) -> Context {
        self.ctx
    }

    pub fn watermark(&self) -> usize {
        self.next
    }

    pub fn fresh(&mut self) -> Result<usize, GrassmannError> {
        self.ctx.check_index(self.next)?;
        let idx = self.next;
        self.next += 1;
        Ok(idx)
    }

    pub fn fresh_generator(&mut self) -> Result<Supernumber, GrassmannError> {
        let idx = self.fresh()?;
        Supernumber::generator(self.ctx, idx)
    }

    pub fn mark(&self) -> usize {
        self.next
    }

    pub fn reset(&mut self, mark: usize) {
        debug_assert!(mark <= self.next);
        self.next = mark;
    }
}

/// Convenience constructor for small rationals.
pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
