//! Coordinate-patch layer: polynomial functions on a superdomain, vector
//! fields, naive differential forms with the skew-commutative convention,
//! the differential on mixed form fields, the module action of naive forms,
//! and the Lie derivative.
//!
//! Conventions fixed here:
//!
//! * coordinates `x^0..x^{n-1}` are even, the remaining m are odd; odd
//!   coordinates square to zero in all function arithmetic;
//! * `dx^A` carries the same parity as `x^A`; two differentials flip with
//!   the factor `-(-1)^{A~B~}`, so even differentials anticommute with
//!   everything and odd differentials commute among themselves; a function
//!   moves past a differential with the plain parity sign;
//! * the differential is even and acts from the left: `df = dx^A (d_A f)`;
//! * all partial derivatives are left derivatives.

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use crate::autodiff::{deriv, deriv2, MultiPoint, Slot};
use crate::error::EvalError;
use crate::forms::{EvalResult, Form, FormSignature, Vector};
use crate::grassmann::{Context, GenArena, Parity, Supernumber};
use crate::operators::{e_cov_basis, sigma, FormOperator, Mutation};
use crate::supermatrix::{ParitySignature, SuperMatrix};

/// Dimensions of one coordinate patch: n even and m odd coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct CoordinatePatch {
    pub n: usize,
    pub m: usize,
}

impl CoordinatePatch {
    pub fn new(n: usize, m: usize) -> CoordinatePatch {
        CoordinatePatch { n, m }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn coords(&self) -> usize {
        self.n + self.m
    }

    pub fn coord_parity(&self, a: usize) -> Parity {
        if a < self.n {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn coord_sig(&self) -> ParitySignature {
        ParitySignature::standard(self.n, self.m)
    }
}

/// Monomial of a patch function: exponents of the even coordinates plus a
/// subset of the odd coordinates.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
struct PatchMonomial {
    evens: Vec<u16>,
    odds: u32,
}

impl PatchMonomial {
    fn constant(n: usize) -> PatchMonomial {
        PatchMonomial {
            evens: vec![0; n],
            odds: 0,
        }
    }

    fn parity(&self) -> Parity {
        Parity::from_usize(self.odds.count_ones() as usize)
    }
}

/// Negativity of the Koszul sign for interleaving two disjoint ascending
/// index sets.
fn interleave_negative_u32(a: u32, b: u32) -> bool {
    let mut count = 0u32;
    let mut rest = a;
    while rest != 0 {
        let i = rest.trailing_zeros();
        if i > 0 {
            count += (b & ((1u32 << i) - 1)).count_ones();
        }
        rest &= rest - 1;
    }
    count % 2 == 1
}

/// Exact polynomial in the patch coordinates: polynomial in the even
/// coordinates, Grassmann polynomial in the odd ones.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PatchFunction {
    patch: CoordinatePatch,
    terms: BTreeMap<PatchMonomial, BigRational>,
}

impl PatchFunction {
    pub fn zero(patch: CoordinatePatch) -> PatchFunction {
        PatchFunction {
            patch,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(patch: CoordinatePatch, value: BigRational) -> PatchFunction {
        let mut terms = BTreeMap::new();
        if !value.is_zero() {
            terms.insert(PatchMonomial::constant(patch.n), value);
        }
        PatchFunction { patch, terms }
    }

    pub fn one(patch: CoordinatePatch) -> PatchFunction {
        PatchFunction::constant(patch, BigRational::one())
    }

    /// The coordinate function x^a.
    pub fn coordinate(patch: CoordinatePatch, a: usize) -> PatchFunction {
        assert!(a < patch.coords(), "coordinate index out of range");
        let mut mono = PatchMonomial::constant(patch.n);
        if a < patch.n {
            mono.evens[a] = 1;
        } else {
            mono.odds = 1 << (a - patch.n);
        }
        let mut terms = BTreeMap::new();
        terms.insert(mono, BigRational::one());
        PatchFunction { patch, terms }
    }

    pub fn patch(&self) -> CoordinatePatch {
        self.patch
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn parity(&self) -> Option<Parity> {
        let mut it = self.terms.keys();
        let first = it.next()?.parity();
        for t in it {
            if t.parity() != first {
                return None;
            }
        }
        Some(first)
    }

    pub fn is_homogeneous(&self, parity: Parity) -> bool {
        self.terms.keys().all(|t| t.parity() == parity)
    }

    pub fn homogeneous_part(&self, parity: Parity) -> PatchFunction {
        PatchFunction {
            patch: self.patch,
            terms: self
                .terms
                .iter()
                .filter(|(t, _)| t.parity() == parity)
                .map(|(t, c)| (t.clone(), c.clone()))
                .collect(),
        }
    }

    fn add_term(&mut self, mono: PatchMonomial, coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(mono) {
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

    pub fn add(&self, rhs: &PatchFunction) -> PatchFunction {
        assert_eq!(self.patch, rhs.patch);
        let mut out = self.clone();
        for (t, c) in &rhs.terms {
            out.add_term(t.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> PatchFunction {
        PatchFunction {
            patch: self.patch,
            terms: self
                .terms
                .iter()
                .map(|(t, c)| (t.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &PatchFunction) -> PatchFunction {
        self.add(&rhs.neg())
    }

    pub fn scale(&self, factor: &BigRational) -> PatchFunction {
        if factor.is_zero() {
            return PatchFunction::zero(self.patch);
        }
        PatchFunction {
            patch: self.patch,
            terms: self
                .terms
                .iter()
                .map(|(t, c)| (t.clone(), c * factor))
                .collect(),
        }
    }

    pub fn mul(&self, rhs: &PatchFunction) -> PatchFunction {
        assert_eq!(self.patch, rhs.patch);
        let mut out = PatchFunction::zero(self.patch);
        for (ta, ca) in &self.terms {
            for (tb, cb) in &rhs.terms {
                if ta.odds & tb.odds != 0 {
                    continue;
                }
                let mut evens = ta.evens.clone();
                for (e, f) in evens.iter_mut().zip(tb.evens.iter()) {
                    *e += f;
                }
                let mono = PatchMonomial {
                    evens,
                    odds: ta.odds | tb.odds,
                };
                let coeff = ca * cb;
                let coeff = if interleave_negative_u32(ta.odds, tb.odds) {
                    -coeff
                } else {
                    coeff
                };
                out.add_term(mono, coeff);
            }
        }
        out
    }

    /// Left partial derivative with respect to coordinate `a`.
    pub fn partial(&self, a: usize) -> PatchFunction {
        assert!(a < self.patch.coords());
        let mut out = PatchFunction::zero(self.patch);
        if a < self.patch.n {
            for (t, c) in &self.terms {
                let e = t.evens[a];
                if e == 0 {
                    continue;
                }
                let mut mono = t.clone();
                mono.evens[a] = e - 1;
                out.add_term(mono, c * BigRational::from_integer((e as i64).into()));
            }
        } else {
            let bit = 1u32 << (a - self.patch.n);
            for (t, c) in &self.terms {
                if t.odds & bit == 0 {
                    continue;
                }
                let below = (t.odds & (bit - 1)).count_ones();
                let mut mono = t.clone();
                mono.odds &= !bit;
                let coeff = if below % 2 == 1 { -c.clone() } else { c.clone() };
                out.add_term(mono, coeff);
            }
        }
        out
    }

    /// Term list as (even exponents, odd-coordinate mask, coefficient), for
    /// serialization.
    pub fn term_list(&self) -> Vec<(Vec<u16>, u32, BigRational)> {
        self.terms
            .iter()
            .map(|(t, c)| (t.evens.clone(), t.odds, c.clone()))
            .collect()
    }

    /// Rebuilds a function from a [`term_list`](Self::term_list) dump.
    pub fn from_terms(
        patch: CoordinatePatch,
        terms: &[(Vec<u16>, u32, BigRational)],
    ) -> Result<PatchFunction, EvalError> {
        let mut out = PatchFunction::zero(patch);
        for (evens, odds, coeff) in terms {
            if evens.len() != patch.n || (*odds >> patch.m) != 0 {
                return Err(EvalError::Shape("term does not fit the patch".into()));
            }
            out.add_term(
                PatchMonomial {
                    evens: evens.clone(),
                    odds: *odds,
                },
                coeff.clone(),
            );
        }
        Ok(out)
    }

    /// Exact evaluation at coordinate values (even slots even supernumbers,
    /// odd slots odd supernumbers); the substitution is a homomorphism.
    pub fn eval(&self, values: &[Supernumber], ctx: Context) -> EvalResult {
        if values.len() != self.patch.coords() {
            return Err(EvalError::Shape(format!(
                "expected {} coordinate values, got {}",
                self.patch.coords(),
                values.len()
            )));
        }
        let mut acc = Supernumber::zero(ctx);
        for (t, c) in &self.terms {
            let mut term = Supernumber::from_rational(ctx, c.clone());
            for (a, &e) in t.evens.iter().enumerate() {
                for _ in 0..e {
                    term = term.mul_checked(&values[a])?;
                }
            }
            let mut odds = t.odds;
            while odds != 0 {
                let mu = odds.trailing_zeros() as usize;
                term = term.mul_checked(&values[self.patch.n + mu])?;
                odds &= odds - 1;
            }
            acc = acc.add_checked(&term)?;
        }
        Ok(acc)
    }
}

impl fmt::Display for PatchFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (t, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (a, &e) in t.evens.iter().enumerate() {
                if e > 0 {
                    write!(f, "·x{a}^{e}")?;
                }
            }
            let mut odds = t.odds;
            while odds != 0 {
                let mu = odds.trailing_zeros() as usize;
                write!(f, "·q{mu}")?;
                odds &= odds - 1;
            }
        }
        Ok(())
    }
}

/// Vector field with polynomial components; `parity(X^A) = X~ + A~`.
#[derive(Clone, Debug)]
pub struct VectorField {
    patch: CoordinatePatch,
    parity: Parity,
    components: Vec<PatchFunction>,
}

impl VectorField {
    pub fn new(
        patch: CoordinatePatch,
        parity: Parity,
        components: Vec<PatchFunction>,
    ) -> Result<VectorField, EvalError> {
        if components.len() != patch.coords() {
            return Err(EvalError::Shape(
                "vector field needs one component per coordinate".into(),
            ));
        }
        for (a, comp) in components.iter().enumerate() {
            let want = parity + patch.coord_parity(a);
            if !comp.is_homogeneous(want) {
                return Err(EvalError::Parity(format!(
                    "component {a} must be homogeneous of parity {want}"
                )));
            }
        }
        Ok(VectorField {
            patch,
            parity,
            components,
        })
    }

    pub fn zero(patch: CoordinatePatch) -> VectorField {
        VectorField {
            patch,
            parity: Parity::Even,
            components: vec![PatchFunction::zero(patch); patch.coords()],
        }
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn patch(&self) -> CoordinatePatch {
        self.patch
    }

    pub fn component(&self, a: usize) -> &PatchFunction {
        &self.components[a]
    }

    /// Componentwise value at a base point, as a row vector of parity X~.
    pub fn eval_at(&self, x: &SuperMatrix) -> Result<Vector, EvalError> {
        let values = base_point_values(x);
        let ctx = x.context();
        let comps: Vec<Supernumber> = self
            .components
            .iter()
            .map(|c| c.eval(&values, ctx))
            .collect::<Result<_, _>>()?;
        let mat = SuperMatrix::new(
            ctx,
            ParitySignature::new(vec![self.parity]),
            self.patch.coord_sig(),
            vec![comps],
        )?;
        Ok(Vector(mat))
    }
}

fn base_point_values(x: &SuperMatrix) -> Vec<Supernumber> {
    (0..x.cols()).map(|a| x.get(0, a).clone()).collect()
}

/// Differential monomial: a set of even differentials (which anticommute)
/// and exponents of odd differentials (which commute).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
struct DiffMonomial {
    evens: u32,
    odd_exps: Vec<u16>,
}

impl DiffMonomial {
    fn unit(m: usize) -> DiffMonomial {
        DiffMonomial {
            evens: 0,
            odd_exps: vec![0; m],
        }
    }

    fn degree(&self) -> usize {
        self.evens.count_ones() as usize + self.odd_count()
    }

    /// Parity: even differentials are even, odd differentials odd.
    fn parity(&self) -> Parity {
        Parity::from_usize(self.odd_count())
    }

    fn odd_count(&self) -> usize {
        self.odd_exps.iter().map(|&e| e as usize).sum()
    }
}

/// Naive differential form: polynomial in the coordinate differentials with
/// patch-function coefficients, written coefficient-left with even
/// differentials ascending first.
#[derive(Clone, PartialEq, Debug)]
pub struct NaiveForm {
    patch: CoordinatePatch,
    terms: BTreeMap<DiffMonomial, PatchFunction>,
}

impl NaiveForm {
    pub fn zero(patch: CoordinatePatch) -> NaiveForm {
        NaiveForm {
            patch,
            terms: BTreeMap::new(),
        }
    }

    /// Degree-0 form.
    pub fn from_function(f: &PatchFunction) -> NaiveForm {
        let patch = f.patch();
        let mut terms = BTreeMap::new();
        if !f.is_zero() {
            terms.insert(DiffMonomial::unit(patch.m), f.clone());
        }
        NaiveForm { patch, terms }
    }

    /// The coordinate differential dx^a as a 1-form.
    pub fn coordinate_differential(patch: CoordinatePatch, a: usize) -> NaiveForm {
        assert!(a < patch.coords());
        let mut mono = DiffMonomial::unit(patch.m);
        if a < patch.n {
            mono.evens = 1 << a;
        } else {
            mono.odd_exps[a - patch.n] = 1;
        }
        let mut terms = BTreeMap::new();
        terms.insert(mono, PatchFunction::one(patch));
        NaiveForm { patch, terms }
    }

    pub fn patch(&self) -> CoordinatePatch {
        self.patch
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|f| f.is_zero())
    }

    /// Common degree of all terms, or None when inhomogeneous or zero.
    pub fn degree(&self) -> Option<usize> {
        let mut degs = self
            .terms
            .iter()
            .filter(|(_, f)| !f.is_zero())
            .map(|(t, _)| t.degree());
        let first = degs.next()?;
        if degs.all(|d| d == first) {
            Some(first)
        } else {
            None
        }
    }

    fn add_term(&mut self, mono: DiffMonomial, coeff: PatchFunction) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(mono) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&coeff);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, rhs: &NaiveForm) -> NaiveForm {
        assert_eq!(self.patch, rhs.patch);
        let mut out = self.clone();
        for (t, f) in &rhs.terms {
            out.add_term(t.clone(), f.clone());
        }
        out
    }

    pub fn neg(&self) -> NaiveForm {
        NaiveForm {
            patch: self.patch,
            terms: self
                .terms
                .iter()
                .map(|(t, f)| (t.clone(), f.neg()))
                .collect(),
        }
    }

    pub fn scale_rational(&self, c: &BigRational) -> NaiveForm {
        NaiveForm {
            patch: self.patch,
            terms: self
                .terms
                .iter()
                .map(|(t, f)| (t.clone(), f.scale(c)))
                .collect(),
        }
    }

    /// Left multiplication by a function.
    pub fn scale_function(&self, f: &PatchFunction) -> NaiveForm {
        NaiveForm::from_function(f).wedge(self)
    }

    /// Wedge product under the convention signs.
    pub fn wedge(&self, rhs: &NaiveForm) -> NaiveForm {
        assert_eq!(self.patch, rhs.patch);
        let mut out = NaiveForm::zero(self.patch);
        for (ta, fa) in &self.terms {
            for (tb, fb) in &rhs.terms {
                if ta.evens & tb.evens != 0 {
                    continue;
                }
                // the right coefficient crosses the left monomial's
                // differentials: parity sign against the odd ones only
                for right_parity in [Parity::Even, Parity::Odd] {
                    let fb_part = fb.homogeneous_part(right_parity);
                    if fb_part.is_zero() {
                        continue;
                    }
                    let mut negative =
                        right_parity.is_odd() && ta.parity().is_odd();
                    // right factor's even differentials cross the left
                    // factor's odd differentials, one flip each
                    if (tb.evens.count_ones() as usize * ta.odd_count()) % 2 == 1 {
                        negative = !negative;
                    }
                    // merge the anticommuting even differentials
                    if interleave_negative_u32(ta.evens, tb.evens) {
                        negative = !negative;
                    }
                    let mut odd_exps = ta.odd_exps.clone();
                    for (e, f) in odd_exps.iter_mut().zip(tb.odd_exps.iter()) {
                        *e += f;
                    }
                    let mono = DiffMonomial {
                        evens: ta.evens | tb.evens,
                        odd_exps,
                    };
                    let coeff = fa.mul(&fb_part);
                    out.add_term(mono, if negative { coeff.neg() } else { coeff });
                }
            }
        }
        out
    }
}

/// Even exterior differential on the skew-commutative convention:
/// `d(g dxM) = (dg) dxM` with `dg = dx^A (d_A g)`, canonicalized to
/// coefficient-left form. Squares to zero.
pub fn naive_d(w: &NaiveForm) -> NaiveForm {
    let patch = w.patch;
    let mut out = NaiveForm::zero(patch);
    for (mono, g) in &w.terms {
        for g_parity in [Parity::Even, Parity::Odd] {
            let g_part = g.homogeneous_part(g_parity);
            if g_part.is_zero() {
                continue;
            }
            for a in 0..patch.coords() {
                let dg = g_part.partial(a);
                if dg.is_zero() {
                    continue;
                }
                // dg = sum_A (-1)^{A~(g~+A~)} (d_A g) dx^A
                let a_odd = patch.coord_parity(a).is_odd();
                let mut negative = a_odd && !g_parity.is_odd();
                // push dx^A from the front of dxM into canonical position
                let mut new_mono = mono.clone();
                if !a_odd {
                    let bit = 1u32 << a;
                    if mono.evens & bit != 0 {
                        continue;
                    }
                    if (mono.evens & (bit - 1)).count_ones() % 2 == 1 {
                        negative = !negative;
                    }
                    new_mono.evens |= bit;
                } else {
                    if mono.evens.count_ones() % 2 == 1 {
                        negative = !negative;
                    }
                    new_mono.odd_exps[a - patch.n] += 1;
                }
                out.add_term(new_mono, if negative { dg.neg() } else { dg });
            }
        }
    }
    out
}

pub type FieldEval = Rc<dyn Fn(&SuperMatrix, &SuperMatrix, &mut GenArena) -> EvalResult>;

/// A form whose evaluator additionally depends on a base point of the patch
/// (a 1 x (n+m) row of coordinate values).
#[derive(Clone)]
pub struct FormField {
    patch: CoordinatePatch,
    sig: FormSignature,
    eval: FieldEval,
}

impl FormField {
    pub fn new(
        patch: CoordinatePatch,
        sig: FormSignature,
        eval: FieldEval,
    ) -> Result<FormField, EvalError> {
        if sig.ambient != patch.dims() {
            return Err(EvalError::Shape(
                "form field signature must live on the patch dimensions".into(),
            ));
        }
        Ok(FormField { patch, sig, eval })
    }

    /// Base-point independent field.
    pub fn constant(patch: CoordinatePatch, form: &Form) -> Result<FormField, EvalError> {
        let inner = form.clone();
        FormField::new(
            patch,
            form.signature(),
            Rc::new(move |_x, args, arena| inner.evaluate(args, arena)),
        )
    }

    pub fn patch(&self) -> CoordinatePatch {
        self.patch
    }

    pub fn signature(&self) -> FormSignature {
        self.sig
    }

    pub fn evaluate(
        &self,
        x: &SuperMatrix,
        args: &SuperMatrix,
        arena: &mut GenArena,
    ) -> EvalResult {
        (self.eval)(x, args, arena)
    }

    /// Freeze the base point, producing an algebraic form.
    pub fn at(&self, x: &SuperMatrix) -> Form {
        let x = x.clone();
        let eval = self.eval.clone();
        Form::new(
            self.sig,
            Rc::new(move |args: &SuperMatrix, arena: &mut GenArena| eval(&x, args, arena)),
        )
    }

    /// Pointwise application of an algebraic operator.
    pub fn apply_pointwise(&self, op: &FormOperator) -> Result<FormField, EvalError> {
        let out_sig = op.signature_map(&self.sig)?;
        let field = self.clone();
        let op = op.clone();
        FormField::new(
            self.patch,
            out_sig,
            Rc::new(move |x, args, arena| {
                let frozen = field.at(x);
                op.apply(&frozen)?.evaluate(args, arena)
            }),
        )
    }

    /// Left multiplication by a patch function.
    pub fn scale_function(&self, f: &PatchFunction) -> Result<FormField, EvalError> {
        if f.patch() != self.patch {
            return Err(EvalError::Shape("patch mismatch".into()));
        }
        let field = self.clone();
        let f = f.clone();
        FormField::new(
            self.patch,
            self.sig,
            Rc::new(move |x, args, arena| {
                let fv = f.eval(&base_point_values(x), x.context())?;
                let v = field.evaluate(x, args, arena)?;
                Ok(fv.mul_checked(&v)?)
            }),
        )
    }

    pub fn add(&self, rhs: &FormField) -> Result<FormField, EvalError> {
        if self.sig != rhs.sig || self.patch != rhs.patch {
            return Err(EvalError::Shape("sum of incompatible form fields".into()));
        }
        let a = self.clone();
        let b = rhs.clone();
        FormField::new(
            self.patch,
            self.sig,
            Rc::new(move |x, args, arena| {
                let va = a.evaluate(x, args, arena)?;
                let vb = b.evaluate(x, args, arena)?;
                Ok(va.add_checked(&vb)?)
            }),
        )
    }

    pub fn neg(&self) -> FormField {
        let a = self.clone();
        FormField {
            patch: self.patch,
            sig: self.sig,
            eval: Rc::new(move |x, args, arena| Ok(-a.evaluate(x, args, arena)?)),
        }
    }
}

impl fmt::Debug for FormField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FormField({})", self.sig)
    }
}

/// Frame with patch-function entries; evaluating at a base point yields a
/// parity-consistent numeric frame.
#[derive(Clone, Debug)]
pub struct PatchFrame {
    patch: CoordinatePatch,
    row_sig: ParitySignature,
    col_sig: ParitySignature,
    entries: Vec<PatchFunction>, // row-major
}

impl PatchFrame {
    pub fn new(
        patch: CoordinatePatch,
        row_sig: ParitySignature,
        col_sig: ParitySignature,
        entries: Vec<Vec<PatchFunction>>,
    ) -> Result<PatchFrame, EvalError> {
        if entries.len() != row_sig.len() || entries.iter().any(|r| r.len() != col_sig.len()) {
            return Err(EvalError::Shape("frame entry grid has wrong shape".into()));
        }
        for (i, row) in entries.iter().enumerate() {
            for (j, f) in row.iter().enumerate() {
                if !f.is_homogeneous(row_sig.parity(i) + col_sig.parity(j)) {
                    return Err(EvalError::Parity(format!(
                        "frame entry ({i},{j}) has the wrong parity"
                    )));
                }
            }
        }
        Ok(PatchFrame {
            patch,
            row_sig,
            col_sig,
            entries: entries.into_iter().flatten().collect(),
        })
    }

    pub fn eval_at(&self, x: &SuperMatrix) -> Result<SuperMatrix, EvalError> {
        let values = base_point_values(x);
        let ctx = x.context();
        let cols = self.col_sig.len();
        let mut rows = Vec::with_capacity(self.row_sig.len());
        for i in 0..self.row_sig.len() {
            let mut row = Vec::with_capacity(cols);
            for j in 0..cols {
                row.push(self.entries[i * cols + j].eval(&values, ctx)?);
            }
            rows.push(row);
        }
        SuperMatrix::new(ctx, self.row_sig.clone(), self.col_sig.clone(), rows)
            .map_err(EvalError::from)
    }
}

/// Mixed Berezinian form field: a dual Berezinian form on the extended space
/// whose frame entries are patch functions (the extension members remain the
/// constant basis vectors), reinterpreted as a mixed form field.
pub fn mixed_ber_form_field(
    patch: CoordinatePatch,
    frame: &PatchFrame,
    extra: (usize, usize),
) -> Result<FormField, EvalError> {
    let (n, m) = patch.dims();
    let (r, s) = extra;
    let p = frame.row_sig.evens();
    let q = frame.row_sig.odds();
    if frame.col_sig != ParitySignature::standard(n + r, m + s) {
        return Err(EvalError::Shape(
            "frame columns must match the extended ambient space".into(),
        ));
    }
    let sig = FormSignature::mixed_or_dual(n, m, p, q, r, s);
    sig.validate()?;
    let frame = frame.clone();
    FormField::new(
        patch,
        sig,
        Rc::new(move |x, args, arena| {
            let numeric = frame.eval_at(x)?;
            let dual = crate::forms::make_dual_ber_form((n + r, m + s), &crate::forms::VectorFrame(numeric))?;
            let lifted = crate::forms::lift_to_mixed(&dual, (n, m), (r, s))?;
            lifted.evaluate(args, arena)
        }),
    )
}

/// The differential on mixed form fields:
///
/// `(dbar L)(x, args) = (-1)^r w_{r+1}^K (-1)^{A~K~} d/dx^A dL/dp_A^K`,
///
/// raising the even additional degree by one.
pub fn dbar(field: &FormField) -> Result<FormField, EvalError> {
    let sig = field.signature();
    let (p, q, r, s) = sig.as_mixed()?;
    let (n, m) = sig.ambient;
    let out_sig = FormSignature::mixed(n, m, p, q, r + 1, s);
    let _ = s;
    let inner = field.clone();
    FormField::new(
        field.patch(),
        out_sig,
        Rc::new(move |x: &SuperMatrix, args: &SuperMatrix, arena: &mut GenArena| {
            let new_row = n + m + r;
            let w_new = args.row(new_row);
            let base = args.remove_row(new_row);
            let mp = MultiPoint(vec![x.clone(), base]);
            let f = |pt: &MultiPoint, arena: &mut GenArena| -> EvalResult {
                inner.evaluate(&pt.0[0], &pt.0[1], arena)
            };
            let col_sig = ParitySignature::standard(p, q);
            let coord_sig = ParitySignature::standard(n, m);
            let mut acc = Supernumber::zero(args.context());
            for a in 0..n + m {
                for kcol in 0..p + q {
                    // the p-derivative is applied first, the x-derivative second
                    let d2 = deriv2(&f, &mp, Slot::new(0, 0, a), Slot::new(1, a, kcol), arena)?;
                    if d2.is_zero() {
                        continue;
                    }
                    let neg = (r % 2 == 1)
                        ^ (coord_sig.parity(a).is_odd() && col_sig.parity(kcol).is_odd());
                    let term = w_new.get(0, kcol).mul_checked(&d2)?;
                    acc = acc.add_checked(&if neg { -term } else { term })?;
                }
            }
            Ok(acc)
        }),
    )
}

/// e(X) on form fields: at each base point, the vector operator with
/// `u = X(x)`. The `mutation` switch is threaded through for the harness
/// integrity checks.
pub fn e_vec_field_with(
    x_field: &VectorField,
    field: &FormField,
    mutation: Mutation,
) -> Result<FormField, EvalError> {
    let sig = field.signature();
    let (p, q, r, s) = sig.as_mixed()?;
    let (n, m) = sig.ambient;
    let out_sig = FormSignature::mixed_or_dual(n, m, p + 1, q, r, s);
    let inner = field.clone();
    let xf = x_field.clone();
    FormField::new(
        field.patch(),
        out_sig,
        Rc::new(move |x, args, arena| {
            let u = xf.eval_at(x)?;
            let frozen = inner.at(x);
            crate::operators::e_vec_with(&u, mutation)
                .apply(&frozen)?
                .evaluate(args, arena)
        }),
    )
}

pub fn e_vec_field(x_field: &VectorField, field: &FormField) -> Result<FormField, EvalError> {
    e_vec_field_with(x_field, field, Mutation::none())
}

/// Action of a naive form on a mixed form field: functions act by left
/// multiplication, coordinate differentials act by `e(dx^A)`, extended
/// multiplicatively with the leftmost differential outermost.
///
/// The zero form is treated as degree 0; callers holding an identically
/// zero form of known degree should use [`module_action_of_degree`].
pub fn module_action(w: &NaiveForm, field: &FormField) -> Result<FormField, EvalError> {
    if w.degree().is_none() && !w.is_zero() {
        return Err(EvalError::Shape(
            "module action needs a degree-homogeneous naive form".into(),
        ));
    }
    let patch = field.patch();
    if w.patch() != patch {
        return Err(EvalError::Shape("patch mismatch".into()));
    }
    let (n, m) = patch.dims();
    let mut total: Option<FormField> = None;
    for (mono, g) in &w.terms {
        if g.is_zero() {
            continue;
        }
        let mut diff_indices: Vec<usize> = Vec::new();
        let mut evens = mono.evens;
        while evens != 0 {
            let a = evens.trailing_zeros() as usize;
            diff_indices.push(a);
            evens &= evens - 1;
        }
        for (mu, &e) in mono.odd_exps.iter().enumerate() {
            for _ in 0..e {
                diff_indices.push(n + mu);
            }
        }
        // rightmost differential acts first
        let mut acted = field.clone();
        for &a in diff_indices.iter().rev() {
            acted = acted.apply_pointwise(&e_cov_basis(n, m, a))?;
        }
        let term = acted.scale_function(g)?;
        total = Some(match total {
            None => term,
            Some(t) => t.add(&term)?,
        });
    }
    match total {
        Some(t) => Ok(t),
        None => {
            let k = w.degree().unwrap_or(0);
            let (pp, qq, rr, ss) = field.signature().as_mixed()?;
            let out_sig = FormSignature::mixed_or_dual(n, m, pp, qq, rr + k, ss);
            FormField::new(
                patch,
                out_sig,
                Rc::new(move |_x, args, _arena| Ok(Supernumber::zero(args.context()))),
            )
        }
    }
}

/// [`module_action`] with the degree shift made explicit, so an identically
/// zero naive form of known degree still lands in the right space.
pub fn module_action_of_degree(
    w: &NaiveForm,
    degree: usize,
    field: &FormField,
) -> Result<FormField, EvalError> {
    if let Some(d) = w.degree() {
        if d != degree {
            return Err(EvalError::Shape(format!(
                "naive form has degree {d}, expected {degree}"
            )));
        }
    }
    if !w.is_zero() {
        return module_action(w, field);
    }
    let patch = field.patch();
    let (n, m) = patch.dims();
    let (pp, qq, rr, ss) = field.signature().as_mixed()?;
    let out_sig = FormSignature::mixed_or_dual(n, m, pp, qq, rr + degree, ss);
    FormField::new(
        patch,
        out_sig,
        Rc::new(move |_x, args, _arena| Ok(Supernumber::zero(args.context()))),
    )
}

/// Lie derivative along X on mixed form fields:
///
/// `delta_X L = X^A dL/dx^A
///            - (-1)^{A~X~} (dX^B/dx^A) p_B^K dL/dp_A^K
///            + (-1)^{A~(X~+1)} (dX^A/dx^A) L`,
///
/// preserving all degrees; the operator parity equals the parity of X.
pub fn lie_derivative(x_field: &VectorField, field: &FormField) -> Result<FormField, EvalError> {
    let sig = field.signature();
    let (p, q, _r, _s) = sig.as_mixed()?;
    let (n, m) = sig.ambient;
    if x_field.patch().dims() != (n, m) {
        return Err(EvalError::Shape("vector field patch mismatch".into()));
    }
    let inner = field.clone();
    let xf = x_field.clone();
    FormField::new(
        field.patch(),
        sig,
        Rc::new(move |x, args, arena| {
            let ctx = x.context();
            let values = base_point_values(x);
            let mp = MultiPoint(vec![x.clone(), args.clone()]);
            let f = |pt: &MultiPoint, arena: &mut GenArena| -> EvalResult {
                inner.evaluate(&pt.0[0], &pt.0[1], arena)
            };
            let coord_sig = ParitySignature::standard(n, m);
            let x_odd = xf.parity().is_odd();
            let mut acc = Supernumber::zero(ctx);
            // X^A dL/dx^A
            for a in 0..n + m {
                let xa = xf.component(a).eval(&values, ctx)?;
                if xa.is_zero() {
                    continue;
                }
                let d = deriv(&f, &mp, Slot::new(0, 0, a), arena)?;
                acc = acc.add_checked(&xa.mul_checked(&d)?)?;
            }
            // -(-1)^{A~X~} (dX^B/dx^A) p_B^K dL/dp_A^K
            for a in 0..n + m {
                let a_odd = coord_sig.parity(a).is_odd();
                let neg = !(a_odd && x_odd);
                for kcol in 0..p + q {
                    let mut inner_sum = Supernumber::zero(ctx);
                    for b in 0..n + m {
                        let dxb = xf.component(b).partial(a).eval(&values, ctx)?;
                        if dxb.is_zero() {
                            continue;
                        }
                        let p_bk = args.get(b, kcol);
                        if p_bk.is_zero() {
                            continue;
                        }
                        inner_sum = inner_sum.add_checked(&dxb.mul_checked(p_bk)?)?;
                    }
                    if inner_sum.is_zero() {
                        continue;
                    }
                    let d = deriv(&f, &mp, Slot::new(1, a, kcol), arena)?;
                    if d.is_zero() {
                        continue;
                    }
                    let term = inner_sum.mul_checked(&d)?;
                    acc = acc.add_checked(&if neg { -term } else { term })?;
                }
            }
            // (-1)^{A~(X~+1)} (dX^A/dx^A) L
            let value = inner.evaluate(x, args, arena)?;
            for a in 0..n + m {
                let div = xf.component(a).partial(a).eval(&values, ctx)?;
                if div.is_zero() {
                    continue;
                }
                let a_odd = coord_sig.parity(a).is_odd();
                let neg = a_odd && !x_odd;
                let term = div.mul_checked(&value)?;
                acc = acc.add_checked(&if neg { -term } else { term })?;
            }
            Ok(acc)
        }),
    )
}

/// Checks the homotopy identity `dbar e(X) + e(X) dbar = delta_X sigma_{1|0}`
/// at sampled (base point, argument) pairs; exact equality.
pub fn cartan_check<R: Rng>(
    x_field: &VectorField,
    field: &FormField,
    arena: &mut GenArena,
    rng: &mut R,
    points: usize,
) -> Result<bool, EvalError> {
    let lhs = dbar(&e_vec_field(x_field, field)?)?.add(&e_vec_field(x_field, &dbar(field)?)?)?;
    let rhs = lie_derivative(x_field, &field.apply_pointwise(&sigma(1, 0))?)?;
    fields_agree(&lhs, &rhs, arena, rng, points)
}

/// Pointwise equality of two fields of equal signature at sampled admissible
/// (base point, argument) pairs.
pub fn fields_agree<R: Rng>(
    a: &FormField,
    b: &FormField,
    arena: &mut GenArena,
    rng: &mut R,
    points: usize,
) -> Result<bool, EvalError> {
    if a.signature() != b.signature() {
        return Err(EvalError::Shape(format!(
            "field signatures differ: {} vs {}",
            a.signature(),
            b.signature()
        )));
    }
    for _ in 0..points {
        let mark = arena.mark();
        let ok = crate::sample::retry_domain(arena, crate::sample::DOMAIN_RETRIES, |arena| {
            let x = sample_base_point(a.patch(), arena, rng)?;
            let args = crate::sample::sample_args(&a.signature(), arena, rng)?;
            let va = a.evaluate(&x, &args, arena)?;
            let vb = b.evaluate(&x, &args, arena)?;
            Ok(va == vb)
        })?;
        arena.reset(mark);
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Base point: even coordinates are small rationals, odd coordinates are
/// fresh generators.
pub fn sample_base_point<R: Rng>(
    patch: CoordinatePatch,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<SuperMatrix, EvalError> {
    crate::sample::sample_matrix(
        &ParitySignature::standard(1, 0),
        &patch.coord_sig(),
        arena,
        rng,
    )
}

/// Random polynomial with an optional parity constraint: a few monomials
/// with small nonzero rational coefficients, even degree at most `max_deg`.
/// An odd-parity request on a patch without odd coordinates yields zero.
pub fn sample_patch_function<R: Rng>(
    patch: CoordinatePatch,
    parity: Option<Parity>,
    max_deg: usize,
    rng: &mut R,
) -> PatchFunction {
    let mut out = PatchFunction::zero(patch);
    if parity == Some(Parity::Odd) && patch.m == 0 {
        return out;
    }
    for _ in 0..rng.gen_range(1..=3usize) {
        let mut evens = vec![0u16; patch.n];
        let mut budget = max_deg;
        for e in evens.iter_mut() {
            if budget == 0 {
                break;
            }
            let d = rng.gen_range(0..=budget.min(2));
            *e = d as u16;
            budget -= d;
        }
        let mut odds: u32 = if patch.m == 0 {
            0
        } else {
            rng.gen_range(0..(1u32 << patch.m))
        };
        if let Some(par) = parity {
            if Parity::from_usize(odds.count_ones() as usize) != par {
                // toggle the lowest odd coordinate to fix the parity
                odds ^= 1;
            }
        }
        let coeff = crate::sample::sample_nonzero_rational(rng);
        out.add_term(PatchMonomial { evens, odds }, coeff);
    }
    if out.is_zero() && parity != Some(Parity::Odd) {
        return PatchFunction::one(patch);
    }
    out
}

/// Random vector field of the given parity with polynomial components of
/// even degree at most `max_deg`.
pub fn sample_vector_field<R: Rng>(
    patch: CoordinatePatch,
    parity: Parity,
    max_deg: usize,
    rng: &mut R,
) -> Result<VectorField, EvalError> {
    let comps: Vec<PatchFunction> = (0..patch.coords())
        .map(|a| {
            let want = parity + patch.coord_parity(a);
            sample_patch_function(patch, Some(want), max_deg, rng)
        })
        .collect();
    VectorField::new(patch, parity, comps)
}

/// Random frame field for [`mixed_ber_form_field`]: extension members are
/// constant basis vectors, the other members have polynomial entries
/// supported on the V columns.
pub fn sample_patch_frame<R: Rng>(
    patch: CoordinatePatch,
    extra: (usize, usize),
    p: usize,
    q: usize,
    max_deg: usize,
    rng: &mut R,
) -> Result<PatchFrame, EvalError> {
    let (n, m) = patch.dims();
    let (r, s) = extra;
    if p < r || q < s {
        return Err(EvalError::Shape(
            "extension frame needs p >= r and q >= s".into(),
        ));
    }
    let row_sig = ParitySignature::standard(p, q);
    let col_sig = ParitySignature::standard(n + r, m + s);
    let mut entries: Vec<Vec<PatchFunction>> = Vec::with_capacity(p + q);
    for i in 0..p + q {
        let member_parity = row_sig.parity(i);
        let is_extension_even = i >= p - r && i < p;
        let is_extension_odd = i >= p + (q - s);
        let mut row = vec![PatchFunction::zero(patch); n + r + m + s];
        if is_extension_even || is_extension_odd {
            let ext_index = if is_extension_even {
                n + (i - (p - r))
            } else {
                (n + r) + m + (i - (p + (q - s)))
            };
            row[ext_index] = PatchFunction::one(patch);
        } else {
            for (j, slot) in row.iter_mut().enumerate() {
                let in_v = j < n || (j >= n + r && j < n + r + m);
                if !in_v {
                    continue;
                }
                let want = member_parity + col_sig.parity(j);
                let mut f = sample_patch_function(patch, Some(want), max_deg, rng);
                if want == Parity::Even {
                    // keep the body generically invertible
                    f = f.add(&PatchFunction::constant(
                        patch,
                        crate::sample::sample_nonzero_rational(rng),
                    ));
                }
                *slot = f;
            }
        }
        entries.push(row);
    }
    PatchFrame::new(patch, row_sig, col_sig, entries)
}
