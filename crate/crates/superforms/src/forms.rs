//! Form values and signatures, the Berezinian generating class, and checkers
//! for the defining equations of straight, dual and mixed forms.
//!
//! A form is represented extensionally: a signature plus an exact evaluator
//! from argument matrices to a supernumber (the coefficient of the value in
//! the trivialized volume space, with the standard coordinate volume element
//! as basis). Equality of forms is therefore always tested pointwise at
//! sampled rational points.
//!
//! Argument layout conventions, fixed once here and used everywhere:
//!
//! * straight degree r|s on V^(n|m): the argument is an (r+s) x (n+m) matrix
//!   whose rows are vectors, row parities `[even^r, odd^s]`, column parities
//!   `[even^n, odd^m]`;
//! * dual codegree p|q / mixed codegree p|q with additional degree r|s: the
//!   argument is an (n+m+r+s) x (p+q) matrix whose columns are covectors on
//!   V + R^(r|s), row parities `[even^n, odd^m, even^r, odd^s]` (the V block
//!   stacked over the R block), column parities `[even^p, odd^q]`.
//!
//! Within every index family, even indices precede odd indices.

use std::fmt;
use std::rc::Rc;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::autodiff::{deriv2, MultiPoint, Slot};
use crate::error::EvalError;
use crate::grassmann::{GenArena, Parity, Supernumber};
use crate::supermatrix::{ParitySignature, SuperMatrix};

/// Degree data of a form.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum FormKind {
    Straight { r: usize, s: usize },
    Dual { p: usize, q: usize },
    Mixed { p: usize, q: usize, r: usize, s: usize },
}

/// Ambient dimension plus degree data.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FormSignature {
    pub ambient: (usize, usize),
    pub kind: FormKind,
}

impl FormSignature {
    pub fn straight(n: usize, m: usize, r: usize, s: usize) -> FormSignature {
        FormSignature {
            ambient: (n, m),
            kind: FormKind::Straight { r, s },
        }
    }

    pub fn dual(n: usize, m: usize, p: usize, q: usize) -> FormSignature {
        FormSignature {
            ambient: (n, m),
            kind: FormKind::Dual { p, q },
        }
    }

    pub fn mixed(n: usize, m: usize, p: usize, q: usize, r: usize, s: usize) -> FormSignature {
        FormSignature {
            ambient: (n, m),
            kind: FormKind::Mixed { p, q, r, s },
        }
    }

    /// Degree bounds: straight forms need s <= m, dual forms q <= m, mixed
    /// forms s <= q <= m + s.
    pub fn validate(&self) -> Result<(), EvalError> {
        let (_, m) = self.ambient;
        match self.kind {
            FormKind::Straight { s, .. } if s > m => Err(EvalError::Shape(format!(
                "straight form with s = {s} > m = {m}"
            ))),
            FormKind::Dual { q, .. } if q > m => Err(EvalError::Shape(format!(
                "dual form with q = {q} > m = {m}"
            ))),
            FormKind::Mixed { q, s, .. } if q < s || q > m + s => Err(EvalError::Shape(format!(
                "mixed form with q = {q} outside [s, m+s] = [{s}, {}]",
                m + s
            ))),
            _ => Ok(()),
        }
    }

    /// Codegree and additional degree (p, q, r, s); a dual form is a mixed
    /// form with no additional degree.
    pub fn as_mixed(&self) -> Result<(usize, usize, usize, usize), EvalError> {
        match self.kind {
            FormKind::Dual { p, q } => Ok((p, q, 0, 0)),
            FormKind::Mixed { p, q, r, s } => Ok((p, q, r, s)),
            FormKind::Straight { .. } => {
                Err(EvalError::Shape("expected a dual or mixed form".into()))
            }
        }
    }

    /// Mixed signature with the given codegree/additional degree; collapses
    /// to the dual kind when r = s = 0.
    pub fn mixed_or_dual(
        n: usize,
        m: usize,
        p: usize,
        q: usize,
        r: usize,
        s: usize,
    ) -> FormSignature {
        if r == 0 && s == 0 {
            FormSignature::dual(n, m, p, q)
        } else {
            FormSignature::mixed(n, m, p, q, r, s)
        }
    }

    /// Stable degree k|l = r+n-p | s+m-q of a dual or mixed form.
    pub fn stable_degree(&self) -> Result<(i64, i64), EvalError> {
        let (p, q, r, s) = self.as_mixed()?;
        let (n, m) = self.ambient;
        Ok((
            r as i64 + n as i64 - p as i64,
            s as i64 + m as i64 - q as i64,
        ))
    }

    /// Row signature of the argument matrix.
    pub fn arg_row_sig(&self) -> ParitySignature {
        let (n, m) = self.ambient;
        match self.kind {
            FormKind::Straight { r, s } => ParitySignature::standard(r, s),
            FormKind::Dual { .. } => ParitySignature::standard(n, m),
            FormKind::Mixed { r, s, .. } => {
                ParitySignature::standard(n, m).concat(&ParitySignature::standard(r, s))
            }
        }
    }

    /// Column signature of the argument matrix.
    pub fn arg_col_sig(&self) -> ParitySignature {
        let (n, m) = self.ambient;
        match self.kind {
            FormKind::Straight { .. } => ParitySignature::standard(n, m),
            FormKind::Dual { p, q } | FormKind::Mixed { p, q, .. } => {
                ParitySignature::standard(p, q)
            }
        }
    }
}

impl fmt::Display for FormSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, m) = self.ambient;
        match self.kind {
            FormKind::Straight { r, s } => write!(f, "E^{r}|{s}({n}|{m})"),
            FormKind::Dual { p, q } => write!(f, "E_{p}|{q}({n}|{m})"),
            FormKind::Mixed { p, q, r, s } => write!(f, "E_{p}|{q}^{r}|{s}({n}|{m})"),
        }
    }
}

pub type EvalResult = Result<Supernumber, EvalError>;
pub type FormEval = Rc<dyn Fn(&SuperMatrix, &mut GenArena) -> EvalResult>;

/// A form: signature plus exact evaluator.
#[derive(Clone)]
pub struct Form {
    sig: FormSignature,
    eval: FormEval,
}

impl Form {
    pub fn new(sig: FormSignature, eval: FormEval) -> Form {
        Form { sig, eval }
    }

    pub fn signature(&self) -> FormSignature {
        self.sig
    }

    pub fn evaluate(&self, args: &SuperMatrix, arena: &mut GenArena) -> EvalResult {
        if *args.row_sig() != self.sig.arg_row_sig() || *args.col_sig() != self.sig.arg_col_sig() {
            return Err(EvalError::Shape(format!(
                "argument of shape {}x{} does not match signature {}",
                args.rows(),
                args.cols(),
                self.sig
            )));
        }
        (self.eval)(args, arena)
    }

    /// Evaluator access without the shape check, for operator internals that
    /// construct arguments by slicing valid ones.
    pub(crate) fn eval_raw(&self, args: &SuperMatrix, arena: &mut GenArena) -> EvalResult {
        (self.eval)(args, arena)
    }
}

impl fmt::Debug for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Form({})", self.sig)
    }
}

/// Array of covectors (columns) with declared parities: an (n+m) x count
/// matrix, column parities = member parities.
#[derive(Clone, Debug, PartialEq)]
pub struct CovectorFrame(pub SuperMatrix);

impl CovectorFrame {
    pub fn members(&self) -> usize {
        self.0.cols()
    }

    pub fn member(&self, i: usize) -> Covector {
        Covector(self.0.col(i))
    }
}

/// Array of vectors (rows) with declared parities: a count x (n+m) matrix,
/// row parities = member parities.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFrame(pub SuperMatrix);

impl VectorFrame {
    pub fn members(&self) -> usize {
        self.0.rows()
    }

    pub fn member(&self, i: usize) -> Vector {
        Vector(self.0.row(i))
    }
}

/// A single covector: column matrix with one declared parity.
#[derive(Clone, Debug, PartialEq)]
pub struct Covector(pub SuperMatrix);

impl Covector {
    pub fn parity(&self) -> Parity {
        self.0.col_sig().parity(0)
    }

    pub fn component(&self, a: usize) -> &Supernumber {
        self.0.get(a, 0)
    }
}

/// A single vector: row matrix with one declared parity.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector(pub SuperMatrix);

impl Vector {
    pub fn parity(&self) -> Parity {
        self.0.row_sig().parity(0)
    }

    pub fn component(&self, a: usize) -> &Supernumber {
        self.0.get(0, a)
    }
}

/// Straight Berezinian form: `L(v) = Ber(<v_F, alpha^G>)` for a covector
/// frame of shape r|s. For s = 0 this is the classical exterior product of
/// the frame, evaluated as a determinant.
pub fn make_straight_ber_form(
    ambient: (usize, usize),
    frame: &CovectorFrame,
) -> Result<Form, EvalError> {
    let (n, m) = ambient;
    let fmat = &frame.0;
    if fmat.rows() != n + m || *fmat.row_sig() != ParitySignature::standard(n, m) {
        return Err(EvalError::Shape(
            "covector frame rows must match the ambient space".into(),
        ));
    }
    if !fmat.col_sig().is_standard() {
        return Err(EvalError::Shape(
            "frame member parities must be listed evens first".into(),
        ));
    }
    let r = fmat.col_sig().evens();
    let s = fmat.col_sig().odds();
    let sig = FormSignature::straight(n, m, r, s);
    sig.validate()?;
    let fmat = fmat.clone();
    let eval: FormEval = Rc::new(move |v: &SuperMatrix, _arena: &mut GenArena| {
        let pairing_matrix = v.mul(&fmat)?;
        Ok(pairing_matrix.berezinian()?)
    });
    Ok(Form::new(sig, eval))
}

/// Dual Berezinian form: `Lambda(p) = Ber(<u_I, p^K>)` for a vector frame of
/// shape p|q.
pub fn make_dual_ber_form(
    ambient: (usize, usize),
    frame: &VectorFrame,
) -> Result<Form, EvalError> {
    let (n, m) = ambient;
    let fmat = &frame.0;
    if fmat.cols() != n + m || *fmat.col_sig() != ParitySignature::standard(n, m) {
        return Err(EvalError::Shape(
            "vector frame columns must match the ambient space".into(),
        ));
    }
    if !fmat.row_sig().is_standard() {
        return Err(EvalError::Shape(
            "frame member parities must be listed evens first".into(),
        ));
    }
    let p = fmat.row_sig().evens();
    let q = fmat.row_sig().odds();
    let sig = FormSignature::dual(n, m, p, q);
    sig.validate()?;
    let fmat = fmat.clone();
    let eval: FormEval = Rc::new(move |args: &SuperMatrix, _arena: &mut GenArena| {
        let pairing_matrix = fmat.mul(args)?;
        Ok(pairing_matrix.berezinian()?)
    });
    Ok(Form::new(sig, eval))
}

/// Row permutation taking a mixed argument (V block over R block) to the
/// standard dual layout on the extended space V + R^(r|s): all even
/// components first (n from V, then r from R), then all odd components.
fn mixed_to_extended_rows(n: usize, m: usize, r: usize, s: usize) -> Vec<usize> {
    let mut extended = Vec::with_capacity(n + m + r + s);
    extended.extend(0..n); // V even
    extended.extend(n + m..n + m + r); // R even
    extended.extend(n..n + m); // V odd
    extended.extend(n + m + r..n + m + r + s); // R odd
    extended
}

/// Interpret a dual form on V + R^(r|s) as a mixed form on V: the covector
/// components split as (p over w). Runs no sampling; use
/// [`lift_to_mixed_checked`] to also verify the shear/scale homogeneity law
/// on random instances.
pub fn lift_to_mixed(
    dual_on_extended: &Form,
    base_ambient: (usize, usize),
    extra: (usize, usize),
) -> Result<Form, EvalError> {
    let (n, m) = base_ambient;
    let (r, s) = extra;
    let (p, q, r0, s0) = dual_on_extended.signature().as_mixed()?;
    if (r0, s0) != (0, 0) {
        return Err(EvalError::Shape("lift expects a dual form".into()));
    }
    if dual_on_extended.signature().ambient != (n + r, m + s) {
        return Err(EvalError::Shape(format!(
            "dual form ambient {:?} does not extend {:?} by {:?}",
            dual_on_extended.signature().ambient,
            base_ambient,
            extra
        )));
    }
    let sig = FormSignature::mixed_or_dual(n, m, p, q, r, s);
    sig.validate()?;
    let inner = dual_on_extended.clone();
    let perm = mixed_to_extended_rows(n, m, r, s);
    let eval: FormEval = Rc::new(move |args: &SuperMatrix, arena: &mut GenArena| {
        let cols: Vec<usize> = (0..args.cols()).collect();
        let reordered = args.submatrix(&perm, &cols);
        inner.eval_raw(&reordered, arena)
    });
    Ok(Form::new(sig, eval))
}

/// [`lift_to_mixed`] followed by a sampled check of the shear/scale
/// homogeneity law; a violation is reported as [`EvalError::InvalidForm`].
pub fn lift_to_mixed_checked<R: rand::Rng>(
    dual_on_extended: &Form,
    base_ambient: (usize, usize),
    extra: (usize, usize),
    arena: &mut GenArena,
    rng: &mut R,
    trials: usize,
) -> Result<Form, EvalError> {
    let lifted = lift_to_mixed(dual_on_extended, base_ambient, extra)?;
    for _ in 0..trials {
        let mark = arena.mark();
        let ok = crate::sample::with_admissible_point(&lifted, arena, rng, |point, arena, rng| {
            let (g, a) = crate::sample::sample_shear_data(&lifted.signature(), arena, rng)?;
            check_homogeneity_shear(&lifted, &g, &a, point, arena)
        })?;
        arena.reset(mark);
        if !ok {
            return Err(EvalError::InvalidForm(
                "lifted form violates the shear/scale homogeneity law".into(),
            ));
        }
    }
    Ok(lifted)
}

/// Pointwise linear combination `sum c_i f_i` with supernumber coefficients
/// multiplied on the left.
pub fn linear_combination(coeffs: &[Supernumber], forms: &[Form]) -> Result<Form, EvalError> {
    if coeffs.len() != forms.len() || forms.is_empty() {
        return Err(EvalError::Shape(
            "linear combination needs matching, nonempty coefficient and form lists".into(),
        ));
    }
    let sig = forms[0].signature();
    if forms.iter().any(|f| f.signature() != sig) {
        return Err(EvalError::Shape(
            "linear combination of forms with different signatures".into(),
        ));
    }
    let coeffs = coeffs.to_vec();
    let forms = forms.to_vec();
    let eval: FormEval = Rc::new(move |args: &SuperMatrix, arena: &mut GenArena| {
        let mut acc = Supernumber::zero(args.context());
        for (c, f) in coeffs.iter().zip(forms.iter()) {
            let v = f.eval_raw(args, arena)?;
            acc = acc.add_checked(&c.mul_checked(&v)?)?;
        }
        Ok(acc)
    });
    Ok(Form::new(sig, eval))
}

/// Linear combination with rational coefficients (context-free).
pub fn linear_combination_rational(
    coeffs: &[BigRational],
    forms: &[Form],
) -> Result<Form, EvalError> {
    if coeffs.len() != forms.len() || forms.is_empty() {
        return Err(EvalError::Shape(
            "linear combination needs matching, nonempty coefficient and form lists".into(),
        ));
    }
    let sig = forms[0].signature();
    if forms.iter().any(|f| f.signature() != sig) {
        return Err(EvalError::Shape(
            "linear combination of forms with different signatures".into(),
        ));
    }
    let coeffs = coeffs.to_vec();
    let forms = forms.to_vec();
    let eval: FormEval = Rc::new(move |args: &SuperMatrix, arena: &mut GenArena| {
        let mut acc = Supernumber::zero(args.context());
        for (c, f) in coeffs.iter().zip(forms.iter()) {
            let v = f.eval_raw(args, arena)?;
            acc = acc.add_checked(&v.scale(c))?;
        }
        Ok(acc)
    });
    Ok(Form::new(sig, eval))
}

/// GL-homogeneity check at one point.
///
/// * straight L: `L(g v) = L(v) Ber g` for g in GL(r|s) acting on rows;
/// * dual/mixed Lambda: `Lambda(M h) = Lambda(M) Ber h` for h in GL(p|q)
///   acting on columns.
pub fn check_homogeneity(
    f: &Form,
    group_element: &SuperMatrix,
    point: &SuperMatrix,
    arena: &mut GenArena,
) -> Result<bool, EvalError> {
    let transformed = match f.signature().kind {
        FormKind::Straight { .. } => group_element.mul(point)?,
        FormKind::Dual { .. } | FormKind::Mixed { .. } => point.mul(group_element)?,
    };
    let lhs = f.evaluate(&transformed, arena)?;
    let val = f.evaluate(point, arena)?;
    let ber = group_element.berezinian()?;
    let rhs = val.mul_checked(&ber)?;
    Ok(lhs == rhs)
}

/// Shear/scale homogeneity of a mixed form at one point:
/// `Lambda(p + a w, g w) = Lambda(p, w) Ber g` for g in GL(r|s) and an
/// arbitrary parity-consistent shear a of shape (n+m) x (r+s).
pub fn check_homogeneity_shear(
    f: &Form,
    g: &SuperMatrix,
    shear: &SuperMatrix,
    point: &SuperMatrix,
    arena: &mut GenArena,
) -> Result<bool, EvalError> {
    let (_, _, r, s) = f.signature().as_mixed()?;
    if r + s == 0 {
        // no w block: the law degenerates to Lambda = Lambda Ber(empty) = Lambda
        let val = f.evaluate(point, arena)?;
        return Ok(val == val);
    }
    let (n, m) = f.signature().ambient;
    let v_rows: Vec<usize> = (0..n + m).collect();
    let r_rows: Vec<usize> = (n + m..n + m + r + s).collect();
    let cols: Vec<usize> = (0..point.cols()).collect();
    let p_block = point.submatrix(&v_rows, &cols);
    let w_block = point.submatrix(&r_rows, &cols);
    let p_new = p_block.add(&shear.mul(&w_block)?)?;
    let w_new = g.mul(&w_block)?;
    let transformed = p_new.vstack(&w_new)?;
    let lhs = f.evaluate(&transformed, arena)?;
    let rhs = f.evaluate(point, arena)?.mul_checked(&g.berezinian()?)?;
    Ok(lhs == rhs)
}

/// One slot pair of the second-derivative symmetry system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotPair {
    pub row1: usize,
    pub col1: usize,
    pub row2: usize,
    pub col2: usize,
}

/// Checks the defining second-derivative identity for one slot pair:
///
/// `D(r1,c1; r2,c2) + (-1)^(R1 R2 + (R1+R2) C2) D(r2,c1; r1,c2) = 0`
///
/// where `D(a,b; c,d)` applies the (c,d)-derivative first and the exponent
/// uses the row parities R1, R2 and the second column parity C2. One uniform
/// pattern covers the straight, dual and mixed systems: the swapped indices
/// are always the row indices of the argument matrix.
pub fn check_symmetry_pde(
    f: &Form,
    point: &SuperMatrix,
    pair: SlotPair,
    arena: &mut GenArena,
) -> Result<bool, EvalError> {
    let inner = f.clone();
    let eval = move |p: &MultiPoint, arena: &mut GenArena| inner.eval_raw(&p.0[0], arena);
    let mp = MultiPoint(vec![point.clone()]);
    let d_direct = deriv2(
        &eval,
        &mp,
        Slot::new(0, pair.row1, pair.col1),
        Slot::new(0, pair.row2, pair.col2),
        arena,
    )?;
    let d_swapped = deriv2(
        &eval,
        &mp,
        Slot::new(0, pair.row2, pair.col1),
        Slot::new(0, pair.row1, pair.col2),
        arena,
    )?;
    let r1 = point.row_sig().parity(pair.row1);
    let r2 = point.row_sig().parity(pair.row2);
    let c2 = point.col_sig().parity(pair.col2);
    let negative = (r1.is_odd() && r2.is_odd()) ^ ((r1 + r2).is_odd() && c2.is_odd());
    let combined = if negative {
        &d_direct - &d_swapped
    } else {
        &d_direct + &d_swapped
    };
    Ok(combined.is_zero())
}

/// All slot pairs of the symmetry system for this argument shape.
pub fn all_slot_pairs(rows: usize, cols: usize) -> Vec<SlotPair> {
    let mut out = Vec::new();
    for row1 in 0..rows {
        for row2 in 0..rows {
            for col1 in 0..cols {
                for col2 in 0..cols {
                    out.push(SlotPair {
                        row1,
                        col1,
                        row2,
                        col2,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{rat, Context};
    use crate::supermatrix::pairing;

    fn ctx() -> Context {
        Context::new(32)
    }

    fn sn(v: i64) -> Supernumber {
        Supernumber::from_int(ctx(), v)
    }

    fn basis_covector(n: usize, m: usize, index: usize) -> CovectorFrame {
        let parity = ParitySignature::standard(n, m).parity(index);
        let mut mat = SuperMatrix::zeros(
            ctx(),
            ParitySignature::standard(n, m),
            ParitySignature::new(vec![parity]),
        );
        mat = mat.with_entry(index, 0, Supernumber::one(ctx())).unwrap();
        CovectorFrame(mat)
    }

    #[test]
    fn straight_coordinate_form() {
        // r|s = 1|0, alpha = e^0 in dimension 1|0: L(v) = v^0
        let frame = basis_covector(1, 0, 0);
        let form = make_straight_ber_form((1, 0), &frame).unwrap();
        assert_eq!(form.signature(), FormSignature::straight(1, 0, 1, 0));
        let v = SuperMatrix::new(
            ctx(),
            ParitySignature::standard(1, 0),
            ParitySignature::standard(1, 0),
            vec![vec![sn(7)]],
        )
        .unwrap();
        let mut arena = GenArena::new(ctx());
        assert_eq!(form.evaluate(&v, &mut arena).unwrap(), sn(7));
    }

    #[test]
    fn straight_det_form_dim2() {
        // r|s = 2|0 with the standard dual frame in dimension 2|0:
        // L(v) = v_0^0 v_1^1 - v_0^1 v_1^0
        let sig = ParitySignature::standard(2, 0);
        let frame = CovectorFrame(SuperMatrix::identity(ctx(), sig.clone()));
        let form = make_straight_ber_form((2, 0), &frame).unwrap();
        let v = SuperMatrix::new(
            ctx(),
            sig.clone(),
            sig,
            vec![vec![sn(1), sn(2)], vec![sn(3), sn(4)]],
        )
        .unwrap();
        let mut arena = GenArena::new(ctx());
        assert_eq!(form.evaluate(&v, &mut arena).unwrap(), sn(-2));
    }

    #[test]
    fn straight_odd_form_is_berezinian_pole() {
        // r|s = 0|1 in dimension 1|1, alpha the odd basis covector: the value
        // is the inverse of the single odd-odd pairing entry.
        let frame = basis_covector(1, 1, 1);
        let form = make_straight_ber_form((1, 1), &frame).unwrap();
        assert_eq!(form.signature(), FormSignature::straight(1, 1, 0, 1));
        let mut arena = GenArena::new(ctx());
        let theta = arena.fresh_generator().unwrap();
        // odd vector row: components (odd, even) = (theta, 4)
        let v = SuperMatrix::new(
            ctx(),
            ParitySignature::standard(0, 1),
            ParitySignature::standard(1, 1),
            vec![vec![theta, sn(4)]],
        )
        .unwrap();
        let val = form.evaluate(&v, &mut arena).unwrap();
        assert_eq!(val, Supernumber::from_rational(ctx(), rat(1, 4)));

        // zero odd pairing: the pole is reported as a domain error
        let bad = SuperMatrix::new(
            ctx(),
            ParitySignature::standard(0, 1),
            ParitySignature::standard(1, 1),
            vec![vec![Supernumber::zero(ctx()), sn(0)]],
        )
        .unwrap();
        assert!(matches!(
            form.evaluate(&bad, &mut arena),
            Err(EvalError::Domain(_))
        ));
    }

    #[test]
    fn dual_coordinate_form() {
        // p|q = 1|0, u = e_0 in dimension 1|0: Lambda(p) = p_0^0
        let mat = SuperMatrix::new(
            ctx(),
            ParitySignature::standard(1, 0),
            ParitySignature::standard(1, 0),
            vec![vec![Supernumber::one(ctx())]],
        )
        .unwrap();
        let form = make_dual_ber_form((1, 0), &VectorFrame(mat)).unwrap();
        let p = SuperMatrix::new(
            ctx(),
            ParitySignature::standard(1, 0),
            ParitySignature::standard(1, 0),
            vec![vec![sn(9)]],
        )
        .unwrap();
        let mut arena = GenArena::new(ctx());
        assert_eq!(form.evaluate(&p, &mut arena).unwrap(), sn(9));
    }

    #[test]
    fn lift_identity_relabeling() {
        // r|s = 0|0: the lift is a relabeling
        let sig = ParitySignature::standard(1, 1);
        let frame = VectorFrame(SuperMatrix::identity(ctx(), sig.clone()));
        let dual = make_dual_ber_form((1, 1), &frame).unwrap();
        let lifted = lift_to_mixed(&dual, (1, 1), (0, 0)).unwrap();
        assert_eq!(lifted.signature(), FormSignature::dual(1, 1, 1, 1));
        let mut arena = GenArena::new(ctx());
        let theta0 = arena.fresh_generator().unwrap();
        let theta1 = arena.fresh_generator().unwrap();
        let p = SuperMatrix::new(
            ctx(),
            sig.clone(),
            sig,
            vec![vec![sn(3), theta0], vec![theta1, sn(5)]],
        )
        .unwrap();
        let a = dual.evaluate(&p, &mut arena).unwrap();
        let b = lifted.evaluate(&p, &mut arena).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_combination_pointwise() {
        let sig = ParitySignature::standard(2, 0);
        let frame = CovectorFrame(SuperMatrix::identity(ctx(), sig.clone()));
        let l1 = make_straight_ber_form((2, 0), &frame).unwrap();
        let mat2 = SuperMatrix::new(
            ctx(),
            sig.clone(),
            sig.clone(),
            vec![vec![sn(1), sn(1)], vec![sn(0), sn(1)]],
        )
        .unwrap();
        let l2 = make_straight_ber_form((2, 0), &CovectorFrame(mat2)).unwrap();
        let combo = linear_combination(&[sn(2), sn(3)], &[l1.clone(), l2.clone()]).unwrap();
        let v = SuperMatrix::new(
            ctx(),
            sig.clone(),
            sig.clone(),
            vec![vec![sn(1), sn(5)], vec![sn(2), sn(3)]],
        )
        .unwrap();
        let mut arena = GenArena::new(ctx());
        let lhs = combo.evaluate(&v, &mut arena).unwrap();
        let rhs = &(&sn(2) * &l1.evaluate(&v, &mut arena).unwrap())
            + &(&sn(3) * &l2.evaluate(&v, &mut arena).unwrap());
        assert_eq!(lhs, rhs);

        // 1·L + 0·L' = L and L - L = 0 pointwise
        let idcombo = linear_combination(&[sn(1), sn(0)], &[l1.clone(), l2]).unwrap();
        assert_eq!(
            idcombo.evaluate(&v, &mut arena).unwrap(),
            l1.evaluate(&v, &mut arena).unwrap()
        );
        let zero = linear_combination(&[sn(1), sn(-1)], &[l1.clone(), l1]).unwrap();
        assert!(zero.evaluate(&v, &mut arena).unwrap().is_zero());
    }

    #[test]
    fn homogeneity_with_identity_is_trivial() {
        let sig = ParitySignature::standard(2, 0);
        let frame = CovectorFrame(SuperMatrix::identity(ctx(), sig.clone()));
        let form = make_straight_ber_form((2, 0), &frame).unwrap();
        let v = SuperMatrix::new(
            ctx(),
            sig.clone(),
            sig.clone(),
            vec![vec![sn(1), sn(5)], vec![sn(2), sn(3)]],
        )
        .unwrap();
        let id = SuperMatrix::identity(ctx(), sig);
        let mut arena = GenArena::new(ctx());
        assert!(check_homogeneity(&form, &id, &v, &mut arena).unwrap());
    }

    #[test]
    fn det_form_symmetry_pde() {
        // identical row indices in the even-even case reduce the identity to
        // the 2*d2 = 0 pattern; all pairs pass on the determinant form
        let sig = ParitySignature::standard(2, 0);
        let frame = CovectorFrame(SuperMatrix::identity(ctx(), sig.clone()));
        let form = make_straight_ber_form((2, 0), &frame).unwrap();
        let v = SuperMatrix::new(
            ctx(),
            sig.clone(),
            sig,
            vec![vec![sn(1), sn(5)], vec![sn(2), sn(3)]],
        )
        .unwrap();
        let mut arena = GenArena::new(ctx());
        for pair in all_slot_pairs(2, 2) {
            assert!(check_symmetry_pde(&form, &v, pair, &mut arena).unwrap());
        }
    }

    #[test]
    fn zero_form_passes_all_checks() {
        let sig = FormSignature::dual(1, 1, 1, 1);
        let zero = Form::new(
            sig,
            Rc::new(|args: &SuperMatrix, _: &mut GenArena| Ok(Supernumber::zero(args.context()))),
        );
        let mut arena = GenArena::new(ctx());
        let t0 = arena.fresh_generator().unwrap();
        let t1 = arena.fresh_generator().unwrap();
        let rows = ParitySignature::standard(1, 1);
        let point = SuperMatrix::new(
            ctx(),
            rows,
            ParitySignature::standard(1, 1),
            vec![vec![sn(2), t0], vec![t1, sn(3)]],
        )
        .unwrap();
        for pair in all_slot_pairs(2, 2) {
            assert!(check_symmetry_pde(&zero, &point, pair, &mut arena).unwrap());
        }
    }

    #[test]
    fn pairing_consistency_of_frames() {
        // a frame column is a covector; pairing with a basis vector reads
        // off one component
        let frame = basis_covector(1, 1, 0);
        let e0 = SuperMatrix::new(
            ctx(),
            ParitySignature::standard(1, 0),
            ParitySignature::standard(1, 1),
            vec![vec![sn(1), Supernumber::zero(ctx())]],
        )
        .unwrap();
        let val = pairing(&e0, &frame.member(0).0).unwrap();
        assert_eq!(val, Supernumber::one(ctx()));
    }

    #[test]
    fn signature_validation() {
        assert!(FormSignature::straight(1, 1, 3, 2).validate().is_err());
        assert!(FormSignature::dual(1, 1, 2, 2).validate().is_err());
        assert!(FormSignature::mixed(1, 1, 1, 0, 0, 1).validate().is_err());
        assert!(FormSignature::mixed(1, 1, 1, 2, 0, 1).validate().is_ok());
        assert_eq!(
            FormSignature::mixed(1, 1, 2, 1, 0, 0)
                .stable_degree()
                .unwrap(),
            (-1, 0)
        );
    }
}
