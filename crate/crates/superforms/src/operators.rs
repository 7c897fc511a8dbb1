//! Operator-level content: the stability isomorphisms sigma and tau, the
//! exterior/contraction operators on mixed and straight forms, the
//! alternative expression for sigma, and the graded anticommutator harness.
//!
//! Every operator is a [`FormOperator`]: a name, a parity, a signature map
//! and an apply function. Degree shifts are always re-derived from the
//! operand's signature, never captured as constants, so iterated
//! applications see the enlarged index ranges.
//!
//! Sign conventions: all derivatives are left derivatives, and products are
//! evaluated in exactly the order the defining formulas write them.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::autodiff::deriv_entry;
use crate::error::EvalError;
use crate::forms::{
    linear_combination_rational, Covector, EvalResult, Form, FormEval, FormKind, FormSignature,
    Vector,
};
use crate::grassmann::{rat, GenArena, Parity, Supernumber};
use crate::supermatrix::{ParitySignature, SuperMatrix};

/// Debug switches that inject known sign errors into the operators, proving
/// the verification suites can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    /// Flip the overall sign of the covector operator e(alpha).
    pub flip_e_cov_sign: bool,
    /// Drop the w-derivative term of the vector operator e(u).
    pub drop_e_vec_third_term: bool,
}

impl Mutation {
    pub fn none() -> Mutation {
        Mutation::default()
    }
}

/// A transformation of forms with declared degree shift and parity.
#[derive(Clone)]
pub struct FormOperator {
    name: String,
    parity: Parity,
    map: Rc<dyn Fn(&FormSignature) -> Result<FormSignature, EvalError>>,
    apply_fn: Rc<dyn Fn(&Form) -> Result<Form, EvalError>>,
}

impl FormOperator {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn signature_map(&self, sig: &FormSignature) -> Result<FormSignature, EvalError> {
        (self.map)(sig)
    }

    pub fn apply(&self, f: &Form) -> Result<Form, EvalError> {
        let out = (self.apply_fn)(f)?;
        debug_assert_eq!(out.signature(), self.signature_map(&f.signature())?);
        Ok(out)
    }
}

impl std::fmt::Debug for FormOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FormOperator({})", self.name)
    }
}

/// Index bookkeeping for the block decomposition used by sigma: "first" and
/// "last" columns and R-rows in the super sense (within the even family and
/// the odd family separately).
struct SigmaBlocks {
    first_cols: Vec<usize>,
    last_cols: Vec<usize>,
    v_rows: Vec<usize>,
    r_first_rows: Vec<usize>,
    r_last_rows: Vec<usize>,
}

fn sigma_blocks(
    ambient: (usize, usize),
    base: (usize, usize, usize, usize),
    k: usize,
    l: usize,
) -> SigmaBlocks {
    let (n, m) = ambient;
    let (p, q, r, s) = base;
    let mut first_cols: Vec<usize> = (0..p).collect();
    first_cols.extend(p + k..p + k + q);
    let mut last_cols: Vec<usize> = (p..p + k).collect();
    last_cols.extend(p + k + q..p + k + q + l);
    let v_rows: Vec<usize> = (0..n + m).collect();
    let re = n + m; // start of R-even rows
    let ro = n + m + r + k; // start of R-odd rows
    let mut r_first_rows: Vec<usize> = (re..re + r).collect();
    r_first_rows.extend(ro..ro + s);
    let mut r_last_rows: Vec<usize> = (re + r..re + r + k).collect();
    r_last_rows.extend(ro + s..ro + s + l);
    SigmaBlocks {
        first_cols,
        last_cols,
        v_rows,
        r_first_rows,
        r_last_rows,
    }
}

/// Stability isomorphism sigma_{k|l}: E_{p|q}^{r|s} -> E_{p+k|q+l}^{r+k|s+l}.
///
/// (sigma L)(p1 p2 / w11 w12 / w21 w22)
///     = L(p1 - p2 w22^{-1} w21, w11 - w12 w22^{-1} w21) Ber(w22).
pub fn sigma(k: usize, l: usize) -> FormOperator {
    let map = move |sig: &FormSignature| -> Result<FormSignature, EvalError> {
        let (p, q, r, s) = sig.as_mixed()?;
        let (n, m) = sig.ambient;
        let out = FormSignature::mixed_or_dual(n, m, p + k, q + l, r + k, s + l);
        out.validate()?;
        Ok(out)
    };
    let apply = move |f: &Form| -> Result<Form, EvalError> {
        let sig = f.signature();
        let base = sig.as_mixed()?;
        let out_sig = map(&sig)?;
        let ambient = sig.ambient;
        let inner = f.clone();
        let eval: FormEval = Rc::new(move |args: &SuperMatrix, arena: &mut GenArena| {
            let bl = sigma_blocks(ambient, base, k, l);
            let p1 = args.submatrix(&bl.v_rows, &bl.first_cols);
            let p2 = args.submatrix(&bl.v_rows, &bl.last_cols);
            let w11 = args.submatrix(&bl.r_first_rows, &bl.first_cols);
            let w12 = args.submatrix(&bl.r_first_rows, &bl.last_cols);
            let w21 = args.submatrix(&bl.r_last_rows, &bl.first_cols);
            let w22 = args.submatrix(&bl.r_last_rows, &bl.last_cols);
            let w22_inv = w22.inv()?;
            let corr = w22_inv.mul(&w21)?;
            let new_p = p1.sub(&p2.mul(&corr)?)?;
            let new_w = w11.sub(&w12.mul(&corr)?)?;
            let inner_args = new_p.vstack(&new_w)?;
            let val = inner.eval_raw(&inner_args, arena)?;
            let ber = w22.berezinian()?;
            Ok(val.mul_checked(&ber)?)
        });
        Ok(Form::new(out_sig, eval))
    };
    FormOperator {
        name: format!("sigma_{k}|{l}"),
        parity: Parity::Even,
        map: Rc::new(map),
        apply_fn: Rc::new(apply),
    }
}

/// Inverse stability map sigma_{k|l}^{-1}: restriction of the argument to
/// (p 0 / w 0 / 0 1) — last k|l covector columns set to zero over the
/// identity block.
pub fn sigma_inv(k: usize, l: usize) -> FormOperator {
    let map = move |sig: &FormSignature| -> Result<FormSignature, EvalError> {
        let (bp, bq, br, bs) = sig.as_mixed()?;
        let (n, m) = sig.ambient;
        if bp < k || bq < l || br < k || bs < l {
            return Err(EvalError::Shape(format!(
                "sigma_inv_{k}|{l} undefined on {sig}"
            )));
        }
        let out = FormSignature::mixed_or_dual(n, m, bp - k, bq - l, br - k, bs - l);
        out.validate()?;
        Ok(out)
    };
    let apply = move |f: &Form| -> Result<Form, EvalError> {
        let sig = f.signature();
        let out_sig = map(&sig)?;
        let (p, q, r, s) = out_sig.as_mixed()?;
        let ambient = sig.ambient;
        let inner = f.clone();
        let eval: FormEval = Rc::new(move |args: &SuperMatrix, arena: &mut GenArena| {
            let (n, m) = ambient;
            let ctx = args.context();
            let bl = sigma_blocks(ambient, (p, q, r, s), k, l);
            let big_rows = ParitySignature::standard(n, m)
                .concat(&ParitySignature::standard(r + k, s + l));
            let big_cols = ParitySignature::standard(p + k, q + l);
            let mut big = SuperMatrix::zeros(ctx, big_rows, big_cols);
            // scatter p over w into the "first" blocks
            for (bi, &row) in bl.v_rows.iter().enumerate() {
                for (bj, &col) in bl.first_cols.iter().enumerate() {
                    big = big.with_entry(row, col, args.get(bi, bj).clone())?;
                }
            }
            for (bi, &row) in bl.r_first_rows.iter().enumerate() {
                for (bj, &col) in bl.first_cols.iter().enumerate() {
                    big = big.with_entry(row, col, args.get(n + m + bi, bj).clone())?;
                }
            }
            // identity in the last-rows x last-cols block
            for (d, (&row, &col)) in bl.r_last_rows.iter().zip(bl.last_cols.iter()).enumerate() {
                let _ = d;
                big = big.with_entry(row, col, Supernumber::one(ctx))?;
            }
            inner.eval_raw(&big, arena)
        });
        Ok(Form::new(out_sig, eval))
    };
    FormOperator {
        name: format!("sigma_inv_{k}|{l}"),
        parity: Parity::Even,
        map: Rc::new(map),
        apply_fn: Rc::new(apply),
    }
}

/// tau: E^{r|s} -> E_{n|m}^{r|s}, (tau L)(p over w) = L(w p^{-1}) Ber(p).
pub fn tau() -> FormOperator {
    let map = |sig: &FormSignature| -> Result<FormSignature, EvalError> {
        match sig.kind {
            FormKind::Straight { r, s } => {
                let (n, m) = sig.ambient;
                Ok(FormSignature::mixed(n, m, n, m, r, s))
            }
            _ => Err(EvalError::Shape("tau acts on straight forms".into())),
        }
    };
    let apply = move |f: &Form| -> Result<Form, EvalError> {
        let sig = f.signature();
        let out_sig = map(&sig)?;
        let (n, m) = sig.ambient;
        let inner = f.clone();
        let eval: FormEval = Rc::new(move |args: &SuperMatrix, arena: &mut GenArena| {
            let v_rows: Vec<usize> = (0..n + m).collect();
            let r_rows: Vec<usize> = (n + m..args.rows()).collect();
            let cols: Vec<usize> = (0..args.cols()).collect();
            let p_block = args.submatrix(&v_rows, &cols);
            let w_block = args.submatrix(&r_rows, &cols);
            let p_inv = p_block.inv()?;
            let v = w_block.mul(&p_inv)?;
            let val = inner.eval_raw(&v, arena)?;
            let ber = p_block.berezinian()?;
            Ok(val.mul_checked(&ber)?)
        });
        Ok(Form::new(out_sig, eval))
    };
    FormOperator {
        name: "tau".into(),
        parity: Parity::Even,
        map: Rc::new(map),
        apply_fn: Rc::new(apply),
    }
}

/// tau^{-1}: E_{n|m}^{r|s} -> E^{r|s}, (tau^{-1} L)(v) = L(1 over v).
pub fn tau_inv() -> FormOperator {
    let map = |sig: &FormSignature| -> Result<FormSignature, EvalError> {
        let (p, q, r, s) = sig.as_mixed()?;
        let (n, m) = sig.ambient;
        if (p, q) != (n, m) {
            return Err(EvalError::Shape(format!(
                "tau_inv needs codegree n|m, got {sig}"
            )));
        }
        Ok(FormSignature::straight(n, m, r, s))
    };
    let apply = move |f: &Form| -> Result<Form, EvalError> {
        let sig = f.signature();
        let out_sig = map(&sig)?;
        let (n, m) = sig.ambient;
        let inner = f.clone();
        let eval: FormEval = Rc::new(move |v: &SuperMatrix, arena: &mut GenArena| {
            let ident = SuperMatrix::identity(v.context(), ParitySignature::standard(n, m));
            let args = ident.vstack(v)?;
            inner.eval_raw(&args, arena)
        });
        Ok(Form::new(out_sig, eval))
    };
    FormOperator {
        name: "tau_inv".into(),
        parity: Parity::Even,
        map: Rc::new(map),
        apply_fn: Rc::new(apply),
    }
}

fn negate_if(cond: bool, x: Supernumber) -> Supernumber {
    if cond {
        -x
    } else {
        x
    }
}

/// e(alpha): E_{p|q}^{r|s} -> E_{p|q}^{r+1|s},
/// `e(alpha)L = (-1)^r alpha_A w_{r+1}^K (-1)^{alpha~ A~} dL/dp_A^K`.
pub fn e_cov(alpha: &Covector) -> FormOperator {
    e_cov_with(alpha, Mutation::none())
}

pub fn e_cov_with(alpha: &Covector, mutation: Mutation) -> FormOperator {
    let parity = alpha.parity();
    let alpha = alpha.clone();
    let dim = alpha.0.rows();
    let source: CovectorSource = Rc::new(move |ctx| {
        if alpha.0.context() != ctx {
            return Err(EvalError::Shape(
                "covector context differs from the argument context".into(),
            ));
        }
        Ok(alpha.clone())
    });
    e_cov_from_source(source, parity, Some(dim), mutation)
}

/// e(dx^index): the exterior action of a coordinate differential; the basis
/// covector is materialized in the argument's context at evaluation time.
pub fn e_cov_basis(n: usize, m: usize, index: usize) -> FormOperator {
    let sig = ParitySignature::standard(n, m);
    let parity = sig.parity(index);
    let source: CovectorSource = Rc::new(move |ctx| {
        let col = ParitySignature::new(vec![sig.parity(index)]);
        let mat = SuperMatrix::zeros(ctx, sig.clone(), col)
            .with_entry(index, 0, Supernumber::one(ctx))?;
        Ok(Covector(mat))
    });
    e_cov_from_source(source, parity, Some(n + m), Mutation::none())
}

type CovectorSource = Rc<dyn Fn(crate::grassmann::Context) -> Result<Covector, EvalError>>;

fn e_cov_from_source(
    source: CovectorSource,
    alpha_parity: Parity,
    dim: Option<usize>,
    mutation: Mutation,
) -> FormOperator {
    let map = move |sig: &FormSignature| -> Result<FormSignature, EvalError> {
        let (p, q, r, s) = sig.as_mixed()?;
        let (n, m) = sig.ambient;
        Ok(FormSignature::mixed(n, m, p, q, r + 1, s))
    };
    let apply = move |f: &Form| -> Result<Form, EvalError> {
        let sig = f.signature();
        let out_sig = map(&sig)?;
        let (n, m) = sig.ambient;
        if let Some(d) = dim {
            if d != n + m {
                return Err(EvalError::Shape("covector dimension mismatch".into()));
            }
        }
        let (p, q, r, _s) = sig.as_mixed()?;
        let inner = f.clone();
        let source = source.clone();
        let eval: FormEval = Rc::new(move |args: &SuperMatrix, arena: &mut GenArena| {
            let alpha = source(args.context())?;
            let new_row = n + m + r; // last even R-row of the enlarged argument
            let w_new = args.row(new_row);
            let base = args.remove_row(new_row);
            let inner_eval =
                |mat: &SuperMatrix, arena: &mut GenArena| -> EvalResult { inner.eval_raw(mat, arena) };
            let ambient_sig = ParitySignature::standard(n, m);
            let mut acc = Supernumber::zero(args.context());
            for a in 0..n + m {
                let alpha_a = alpha.component(a);
                if alpha_a.is_zero() {
                    continue;
                }
                let a_parity = ambient_sig.parity(a);
                for kcol in 0..p + q {
                    let d = deriv_entry(&inner_eval, &base, a, kcol, arena)?;
                    if d.is_zero() {
                        continue;
                    }
                    let term = alpha_a.mul_checked(&w_new.get(0, kcol).mul_checked(&d)?)?;
                    let neg = (r % 2 == 1) ^ (alpha_parity.is_odd() && a_parity.is_odd());
                    acc = acc.add_checked(&negate_if(neg, term))?;
                }
            }
            Ok(negate_if(mutation.flip_e_cov_sign, acc))
        });
        Ok(Form::new(out_sig, eval))
    };
    FormOperator {
        name: "e_cov".into(),
        parity: alpha_parity,
        map: Rc::new(map),
        apply_fn: Rc::new(apply),
    }
}

/// e(u): E_{p|q}^{r|s} -> E_{p+1|q}^{r|s},
/// `e(u)L = (-1)^r u^A (p_A^{p+1}
///            - (-1)^{B~K~} p_A^K p_B^{p+1} d/dp_B^K
///            - (-1)^{F~K~} p_A^K w_F^{p+1} d/dw_F^K) L`.
pub fn e_vec(u: &Vector) -> FormOperator {
    e_vec_with(u, Mutation::none())
}

pub fn e_vec_with(u: &Vector, mutation: Mutation) -> FormOperator {
    let u = u.clone();
    let u_parity = u.parity();
    let map = move |sig: &FormSignature| -> Result<FormSignature, EvalError> {
        let (p, q, r, s) = sig.as_mixed()?;
        let (n, m) = sig.ambient;
        Ok(FormSignature::mixed_or_dual(n, m, p + 1, q, r, s))
    };
    let u2 = u.clone();
    let apply = move |f: &Form| -> Result<Form, EvalError> {
        let sig = f.signature();
        let out_sig = map(&sig)?;
        let (n, m) = sig.ambient;
        if u2.0.cols() != n + m {
            return Err(EvalError::Shape("vector dimension mismatch".into()));
        }
        let (p, q, r, s) = sig.as_mixed()?;
        let inner = f.clone();
        let u = u2.clone();
        let eval: FormEval = Rc::new(move |args: &SuperMatrix, arena: &mut GenArena| {
            let new_col = p; // last even column of the enlarged argument
            let col_new = args.col(new_col);
            let base = args.remove_col(new_col);
            let inner_eval =
                |mat: &SuperMatrix, arena: &mut GenArena| -> EvalResult { inner.eval_raw(mat, arena) };
            let value = inner.eval_raw(&base, arena)?;
            let row_sig = base.row_sig().clone();
            let col_sig = base.col_sig().clone();
            // derivative tables, shared across the A-sum
            let mut d_p = vec![vec![Supernumber::zero(args.context()); p + q]; n + m];
            for b in 0..n + m {
                for kcol in 0..p + q {
                    d_p[b][kcol] = deriv_entry(&inner_eval, &base, b, kcol, arena)?;
                }
            }
            let mut d_w = vec![vec![Supernumber::zero(args.context()); p + q]; r + s];
            if !mutation.drop_e_vec_third_term {
                for fr in 0..r + s {
                    for kcol in 0..p + q {
                        d_w[fr][kcol] =
                            deriv_entry(&inner_eval, &base, n + m + fr, kcol, arena)?;
                    }
                }
            }
            let mut acc = Supernumber::zero(args.context());
            for a in 0..n + m {
                let u_a = u.component(a);
                if u_a.is_zero() {
                    continue;
                }
                let mut bracket = col_new.get(a, 0).mul_checked(&value)?;
                for kcol in 0..p + q 	{
                    let p_ak = base.get(a, kcol);
                    if p_ak.is_zero() {
                        continue;
                    }
                    let k_par = col_sig.parity(kcol);
                    for b in 0..n + m {
                        let d = &d_p[b][kcol];
                        if d.is_zero() {
                            continue;
                        }
                        let term = p_ak.mul_checked(&col_new.get(b, 0).mul_checked(d)?)?;
                        let neg = !(row_sig.parity(b).is_odd() && k_par.is_odd());
                        // minus sign of the formula combined with (-1)^{B~K~}
                        bracket = bracket.add_checked(&negate_if(neg, term))?;
                    }
                    if !mutation.drop_e_vec_third_term {
                        for fr in 0..r + s {
                            let d = &d_w[fr][kcol];
                            if d.is_zero() {
                                continue;
                            }
                            let term = p_ak
                                .mul_checked(&col_new.get(n + m + fr, 0).mul_checked(d)?)?;
                            let neg =
                                !(row_sig.parity(n + m + fr).is_odd() && k_par.is_odd());
                            bracket = bracket.add_checked(&negate_if(neg, term))?;
                        }
                    }
                }
                let contribution = u_a.mul_checked(&bracket)?;
                acc = acc.add_checked(&negate_if(r % 2 == 1, contribution))?;
            }
            Ok(acc)
        });
        Ok(Form::new(out_sig, eval))
    };
    FormOperator {
        name: "e_vec".into(),
        parity: u_parity,
        map: Rc::new(map),
        apply_fn: Rc::new(apply),
    }
}

/// e_alpha on straight forms: E^{r|s} -> E^{r+1|s},
/// `e_alpha = (-1)^r (v_{r+1}^A alpha_A
///             - (-1)^{alpha~ F~} v_F^A alpha_A v_{r+1}^B d/dv_F^B)`.
///
/// The sign exponent is stated for left derivatives with the derivative
/// value in the rightmost factor; it is pinned by the exact identity
/// `e(alpha) tau = tau e_alpha`, which the test suites check across all
/// parity combinations.
pub fn e_alpha_straight(alpha: &Covector) -> FormOperator {
    let alpha = alpha.clone();
    let alpha_parity = alpha.parity();
    let map = move |sig: &FormSignature| -> Result<FormSignature, EvalError> {
        match sig.kind {
            FormKind::Straight { r, s } => {
                let (n, m) = sig.ambient;
                Ok(FormSignature::straight(n, m, r + 1, s))
            }
            _ => Err(EvalError::Shape("e_alpha acts on straight forms".into())),
        }
    };
    let alpha2 = alpha.clone();
    let apply = move |f: &Form| -> Result<Form, EvalError> {
        let sig = f.signature();
        let out_sig = map(&sig)?;
        let (n, m) = sig.ambient;
        let (r, s) = match sig.kind {
            FormKind::Straight { r, s } => (r, s),
            _ => unreachable!(),
        };
        if alpha2.0.rows() != n + m {
            return Err(EvalError::Shape("covector dimension mismatch".into()));
        }
        let inner = f.clone();
        let alpha = alpha2.clone();
        let eval: FormEval = Rc::new(move |args: &SuperMatrix, arena: &mut GenArena| {
            let new_row = r; // last even row of the enlarged argument
            let v_new = args.row(new_row);
            let base = args.remove_row(new_row);
            let inner_eval =
                |mat: &SuperMatrix, arena: &mut GenArena| -> EvalResult { inner.eval_raw(mat, arena) };
            let value = inner.eval_raw(&base, arena)?;
            let row_sig = base.row_sig().clone();
            let mut acc = Supernumber::zero(args.context());
            // first term: v_{r+1}^A alpha_A L
            for a in 0..n + m {
                let alpha_a = alpha.component(a);
                if alpha_a.is_zero() {
                    continue;
                }
                let term = v_new
                    .get(0, a)
                    .mul_checked(&alpha_a.mul_checked(&value)?)?;
                acc = acc.add_checked(&term)?;
            }
            // second term: -(-1)^{alpha~ F~} <v_F, alpha> v_{r+1}^B dL/dv_F^B
            for fr in 0..r + s {
                let c_f = crate::supermatrix::pairing(&base.row(fr), &alpha.0)?;
                if c_f.is_zero() {
                    continue;
                }
                let f_par = row_sig.parity(fr);
                let neg = !(alpha_parity.is_odd() && f_par.is_odd());
                for b in 0..n + m {
                    let d = deriv_entry(&inner_eval, &base, fr, b, arena)?;
                    if d.is_zero() {
                        continue;
                    }
                    let term = c_f.mul_checked(&v_new.get(0, b).mul_checked(&d)?)?;
                    acc = acc.add_checked(&negate_if(neg, term))?;
                }
            }
            Ok(negate_if(r % 2 == 1, acc))
        });
        Ok(Form::new(out_sig, eval))
    };
    FormOperator {
        name: "e_alpha".into(),
        parity: alpha_parity,
        map: Rc::new(map),
        apply_fn: Rc::new(apply),
    }
}

/// i_u on straight forms: E^{r|s} -> E^{r-1|s} for r > 0,
/// `i_u = (-1)^{r-1} u^A d/dv_r^A`, substitution into the last even slot.
pub fn i_u_straight(u: &Vector) -> FormOperator {
    let u = u.clone();
    let u_parity = u.parity();
    let map = move |sig: &FormSignature| -> Result<FormSignature, EvalError> {
        match sig.kind {
            FormKind::Straight { r, s } => {
                if r == 0 {
                    return Err(EvalError::Degree(
                        "i_u needs at least one even slot".into(),
                    ));
                }
                let (n, m) = sig.ambient;
                Ok(FormSignature::straight(n, m, r - 1, s))
            }
            _ => Err(EvalError::Shape("i_u acts on straight forms".into())),
        }
    };
    let u2 = u.clone();
    let apply = move |f: &Form| -> Result<Form, EvalError> {
        let sig = f.signature();
        let out_sig = map(&sig)?;
        let (n, m) = sig.ambient;
        let r = match sig.kind {
            FormKind::Straight { r, .. } => r,
            _ => unreachable!(),
        };
        if u2.0.cols() != n + m {
            return Err(EvalError::Shape("vector dimension mismatch".into()));
        }
        let inner = f.clone();
        let u = u2.clone();
        let eval: FormEval = Rc::new(move |args: &SuperMatrix, arena: &mut GenArena| {
            let ctx = args.context();
            // straight forms are linear in each even row, so the derivative
            // with respect to the reinstated last even slot is evaluated at
            // a zero row
            let zero_row = SuperMatrix::zeros(
                ctx,
                ParitySignature::standard(1, 0),
                args.col_sig().clone(),
            );
            let base = args.insert_row(r - 1, &zero_row, Parity::Even)?;
            let inner_eval =
                |mat: &SuperMatrix, arena: &mut GenArena| -> EvalResult { inner.eval_raw(mat, arena) };
            let mut acc = Supernumber::zero(ctx);
            for a in 0..n + m {
                let u_a = u.component(a);
                if u_a.is_zero() {
                    continue;
                }
                let d = deriv_entry(&inner_eval, &base, r - 1, a, arena)?;
                acc = acc.add_checked(&u_a.mul_checked(&d)?)?;
            }
            Ok(negate_if(r % 2 == 0, acc))
        });
        Ok(Form::new(out_sig, eval))
    };
    FormOperator {
        name: "i_u".into(),
        parity: u_parity,
        map: Rc::new(map),
        apply_fn: Rc::new(apply),
    }
}

/// The operator on the right-hand side of the central Clifford relation:
///
/// `S L = (w_{r+1}^{p+1}
///         - (-1)^{B~K~} w_{r+1}^K p_B^{p+1} d/dp_B^K
///         - (-1)^{F~K~} w_{r+1}^K w_F^{p+1} d/dw_F^K) L`,
///
/// which gives another expression for sigma_{1|0}.
pub fn alt_sigma() -> FormOperator {
    let map = |sig: &FormSignature| -> Result<FormSignature, EvalError> {
        let (p, q, r, s) = sig.as_mixed()?;
        let (n, m) = sig.ambient;
        Ok(FormSignature::mixed(n, m, p + 1, q, r + 1, s))
    };
    let apply = move |f: &Form| -> Result<Form, EvalError> {
        let sig = f.signature();
        let out_sig = map(&sig)?;
        let (n, m) = sig.ambient;
        let (p, q, r, s) = sig.as_mixed()?;
        let inner = f.clone();
        let eval: FormEval = Rc::new(move |args: &SuperMatrix, arena: &mut GenArena| {
            let new_row = n + m + r;
            let new_col = p;
            let w_rp = args.get(new_row, new_col).clone();
            let stripped_row = args.remove_row(new_row);
            let base = stripped_row.remove_col(new_col);
            let col_new = stripped_row.col(new_col); // p_B^{p+1} over w_F^{p+1}
            let row_new = args.remove_col(new_col).row(new_row); // w_{r+1}^K
            let inner_eval =
                |mat: &SuperMatrix, arena: &mut GenArena| -> EvalResult { inner.eval_raw(mat, arena) };
            let value = inner.eval_raw(&base, arena)?;
            let row_sig = base.row_sig().clone();
            let col_sig = base.col_sig().clone();
            let mut acc = w_rp.mul_checked(&value)?;
            for kcol in 0..p + q {
                let w_k = row_new.get(0, kcol);
                if w_k.is_zero() {
                    continue;
                }
                let k_par = col_sig.parity(kcol);
                for b in 0..n + m {
                    let d = deriv_entry(&inner_eval, &base, b, kcol, arena)?;
                    if d.is_zero() {
                        continue;
                    }
                    let term = w_k.mul_checked(&col_new.get(b, 0).mul_checked(&d)?)?;
                    let neg = !(row_sig.parity(b).is_odd() && k_par.is_odd());
                    acc = acc.add_checked(&negate_if(neg, term))?;
                }
                for fr in 0..r + s {
                    let d = deriv_entry(&inner_eval, &base, n + m + fr, kcol, arena)?;
                    if d.is_zero() {
                        continue;
                    }
                    let term = w_k
                        .mul_checked(&col_new.get(n + m + fr, 0).mul_checked(&d)?)?;
                    let neg = !(row_sig.parity(n + m + fr).is_odd() && k_par.is_odd());
                    acc = acc.add_checked(&negate_if(neg, term))?;
                }
            }
            Ok(acc)
        });
        Ok(Form::new(out_sig, eval))
    };
    FormOperator {
        name: "alt_sigma".into(),
        parity: Parity::Even,
        map: Rc::new(map),
        apply_fn: Rc::new(apply),
    }
}

/// Graded anticommutator harness: `A B + (-1)^{A~B~} B A` applied pointwise.
pub fn anticommutator(a: &FormOperator, b: &FormOperator) -> FormOperator {
    let name = format!("{{{}, {}}}", a.name, b.name);
    let parity = a.parity + b.parity;
    let sign_negative = a.parity.is_odd() && b.parity.is_odd();
    let a1 = a.clone();
    let b1 = b.clone();
    let map = move |sig: &FormSignature| -> Result<FormSignature, EvalError> {
        let via_ab = a1.signature_map(&b1.signature_map(sig)?)?;
        let via_ba = b1.signature_map(&a1.signature_map(sig)?)?;
        if via_ab != via_ba {
            return Err(EvalError::Shape(format!(
                "anticommutator signature maps disagree: {via_ab} vs {via_ba}"
            )));
        }
        Ok(via_ab)
    };
    let a2 = a.clone();
    let b2 = b.clone();
    let apply = move |f: &Form| -> Result<Form, EvalError> {
        let ab = a2.apply(&b2.apply(f)?)?;
        let ba = b2.apply(&a2.apply(f)?)?;
        let sign = if sign_negative { rat(-1, 1) } else { rat(1, 1) };
        linear_combination_rational(&[rat(1, 1), sign], &[ab, ba])
    };
    FormOperator {
        name,
        parity,
        map: Rc::new(map),
        apply_fn: Rc::new(apply),
    }
}

/// Left scalar multiple of an operator result: `f -> c · (op f)`.
pub fn scaled(coeff: &Supernumber, op: &FormOperator) -> FormOperator {
    let coeff = coeff.clone();
    let op2 = op.clone();
    let map_op = op.clone();
    let coeff_parity = coeff.parity().unwrap_or(Parity::Even);
    let apply = move |f: &Form| -> Result<Form, EvalError> {
        let g = op2.apply(f)?;
        crate::forms::linear_combination(std::slice::from_ref(&coeff), std::slice::from_ref(&g))
    };
    FormOperator {
        name: format!("scaled({})", op.name),
        parity: coeff_parity + op.parity,
        map: Rc::new(move |sig| map_op.signature_map(sig)),
        apply_fn: Rc::new(apply),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{make_dual_ber_form, make_straight_ber_form, CovectorFrame};
    use crate::grassmann::Context;
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx() -> Context {
        Context::new(96)
    }

    fn sn(v: i64) -> Supernumber {
        Supernumber::from_int(ctx(), v)
    }

    fn dual_ber_11(arena: &mut GenArena, rng: &mut ChaCha8Rng) -> Form {
        let frame = sample::sample_vector_frame((1, 1), 1, 1, arena, rng).unwrap();
        make_dual_ber_form((1, 1), &frame).unwrap()
    }

    #[test]
    fn sigma_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut arena = GenArena::new(ctx());
        let form = dual_ber_11(&mut arena, &mut rng);
        let s00 = sigma(0, 0).apply(&form).unwrap();
        assert_eq!(s00.signature(), form.signature());
        for _ in 0..5 {
            let (args, val) =
                sample::sample_admissible_args(&form, &mut arena, &mut rng).unwrap();
            assert_eq!(s00.evaluate(&args, &mut arena).unwrap(), val);
        }
    }

    #[test]
    fn sigma_inverse_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut arena = GenArena::new(ctx());
        let form = dual_ber_11(&mut arena, &mut rng);
        for &(k, l) in &[(1usize, 0usize), (0, 1), (1, 1)] {
            let up = sigma(k, l).apply(&form).unwrap();
            let back = sigma_inv(k, l).apply(&up).unwrap();
            assert_eq!(back.signature(), form.signature());
            for _ in 0..3 {
                let (args, val) =
                    sample::sample_admissible_args(&form, &mut arena, &mut rng).unwrap();
                assert_eq!(back.evaluate(&args, &mut arena).unwrap(), val);
            }
        }
    }

    #[test]
    fn sigma_composes_additively() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut arena = GenArena::new(ctx());
        let form = dual_ber_11(&mut arena, &mut rng);
        let twice = sigma(1, 0).apply(&sigma(1, 0).apply(&form).unwrap()).unwrap();
        let once = sigma(2, 0).apply(&form).unwrap();
        assert_eq!(twice.signature(), once.signature());
        for _ in 0..5 {
            let mark = arena.mark();
            let cmp = sample::retry_domain(&mut arena, sample::DOMAIN_RETRIES, |arena| {
                let args = sample::sample_args(&once.signature(), arena, &mut rng)?;
                let a = twice.evaluate(&args, arena)?;
                let b = once.evaluate(&args, arena)?;
                Ok(a == b)
            })
            .unwrap();
            arena.reset(mark);
            assert!(cmp);
        }
    }

    #[test]
    fn tau_roundtrip_on_straight_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut arena = GenArena::new(ctx());
        let frame = sample::sample_covector_frame((2, 0), 1, 0, &mut arena, &mut rng).unwrap();
        let form = make_straight_ber_form((2, 0), &frame).unwrap();
        let roundtrip = tau_inv().apply(&tau().apply(&form).unwrap()).unwrap();
        for _ in 0..5 {
            let (args, val) = sample::sample_admissible_args(&form, &mut arena, &mut rng).unwrap();
            assert_eq!(roundtrip.evaluate(&args, &mut arena).unwrap(), val);
        }
    }

    #[test]
    fn tau_of_constant_is_berezinian() {
        // a degree-0|0 straight form with constant value c maps to c Ber(p)
        let c = sn(7);
        let c2 = c.clone();
        let constant = Form::new(
            FormSignature::straight(1, 1, 0, 0),
            Rc::new(move |args: &SuperMatrix, _: &mut GenArena| {
                Ok(Supernumber::from_int(args.context(), 7))
            }),
        );
        let image = tau().apply(&constant).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let mut arena = GenArena::new(ctx());
        for _ in 0..5 {
            let mark = arena.mark();
            let ok = sample::retry_domain(&mut arena, sample::DOMAIN_RETRIES, |arena| {
                let args = sample::sample_args(&image.signature(), arena, &mut rng)?;
                let lhs = image.evaluate(&args, arena)?;
                let v_rows: Vec<usize> = (0..2).collect();
                let cols: Vec<usize> = (0..args.cols()).collect();
                let p_block = args.submatrix(&v_rows, &cols);
                let rhs = c2.mul_checked(&p_block.berezinian()?)?;
                Ok(lhs == rhs)
            })
            .unwrap();
            arena.reset(mark);
            assert!(ok);
        }
    }

    #[test]
    fn e_cov_linear_in_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let mut arena = GenArena::new(ctx());
        let form = dual_ber_11(&mut arena, &mut rng);
        let al = sample::sample_covector((1, 1), Parity::Even, &mut arena, &mut rng).unwrap();
        let be = sample::sample_covector((1, 1), Parity::Even, &mut arena, &mut rng).unwrap();
        let sum = Covector(al.0.add(&be.0).unwrap());
        let lhs = e_cov(&sum).apply(&form).unwrap();
        let ra = e_cov(&al).apply(&form).unwrap();
        let rb = e_cov(&be).apply(&form).unwrap();
        let rhs = linear_combination_rational(&[rat(1, 1), rat(1, 1)], &[ra, rb]).unwrap();
        for _ in 0..5 {
            let mark = arena.mark();
            let ok = sample::retry_domain(&mut arena, sample::DOMAIN_RETRIES, |arena| {
                let args = sample::sample_args(&lhs.signature(), arena, &mut rng)?;
                Ok(lhs.evaluate(&args, arena)? == rhs.evaluate(&args, arena)?)
            })
            .unwrap();
            arena.reset(mark);
            assert!(ok);
        }
    }

    #[test]
    fn e_vec_on_dual_matches_truncated_formula() {
        // on dual forms the w-derivative sum is empty, so dropping it is a
        // no-op there
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let mut arena = GenArena::new(ctx());
        let form = dual_ber_11(&mut arena, &mut rng);
        let u = sample::sample_vector((1, 1), Parity::Even, &mut arena, &mut rng).unwrap();
        let full = e_vec(&u).apply(&form).unwrap();
        let dropped = e_vec_with(
            &u,
            Mutation {
                drop_e_vec_third_term: true,
                ..Mutation::none()
            },
        )
        .apply(&form)
        .unwrap();
        for _ in 0..5 {
            let mark = arena.mark();
            let ok = sample::retry_domain(&mut arena, sample::DOMAIN_RETRIES, |arena| {
                let args = sample::sample_args(&full.signature(), arena, &mut rng)?;
                Ok(full.evaluate(&args, arena)? == dropped.evaluate(&args, arena)?)
            })
            .unwrap();
            arena.reset(mark);
            assert!(ok);
        }
    }

    #[test]
    fn clifford_central_term_scalar_case() {
        // purely even 1-dimensional space, constant dual form: the graded
        // anticommutator of e(u) and e(alpha) equals <u, alpha> sigma
        let constant = Form::new(
            FormSignature::dual(1, 0, 0, 0),
            Rc::new(|args: &SuperMatrix, _: &mut GenArena| {
                Ok(Supernumber::from_int(args.context(), 3))
            }),
        );
        let mut arena = GenArena::new(ctx());
        let u = Vector(
            SuperMatrix::new(
                ctx(),
                ParitySignature::standard(1, 0),
                ParitySignature::standard(1, 0),
                vec![vec![sn(2)]],
            )
            .unwrap(),
        );
        let al = Covector(
            SuperMatrix::new(
                ctx(),
                ParitySignature::standard(1, 0),
                ParitySignature::standard(1, 0),
                vec![vec![sn(5)]],
            )
            .unwrap(),
        );
        let lhs_op = anticommutator(&e_vec(&u), &e_cov(&al));
        let lhs = lhs_op.apply(&constant).unwrap();
        let pairing_val = crate::supermatrix::pairing(&u.0, &al.0).unwrap();
        let rhs = scaled(&pairing_val, &sigma(1, 0)).apply(&constant).unwrap();
        assert_eq!(lhs.signature(), rhs.signature());
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let args = sample::sample_args(&lhs.signature(), &mut arena, &mut rng).unwrap();
            let a = lhs.evaluate(&args, &mut arena).unwrap();
            let b = rhs.evaluate(&args, &mut arena).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn anticommutator_even_operator_with_itself() {
        // for an even operator A the harness gives A A + A A = 2 A^2
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let mut arena = GenArena::new(ctx());
        let form = dual_ber_11(&mut arena, &mut rng);
        let u = sample::sample_vector((1, 1), Parity::Even, &mut arena, &mut rng).unwrap();
        let op = e_vec(&u);
        let anti = anticommutator(&op, &op);
        let sq = op.apply(&op.apply(&form).unwrap()).unwrap();
        let lhs = anti.apply(&form).unwrap();
        for _ in 0..5 {
            let mark = arena.mark();
            let ok = sample::retry_domain(&mut arena, sample::DOMAIN_RETRIES, |arena| {
                let args = sample::sample_args(&lhs.signature(), arena, &mut rng)?;
                let a = lhs.evaluate(&args, arena)?;
                let b = sq.evaluate(&args, arena)?.scale(&rat(2, 1));
                Ok(a == b)
            })
            .unwrap();
            arena.reset(mark);
            assert!(ok);
        }
    }

    #[test]
    fn degree_error_for_contraction_of_degree_zero() {
        let u = Vector(
            SuperMatrix::new(
                ctx(),
                ParitySignature::standard(1, 0),
                ParitySignature::standard(2, 0),
                vec![vec![sn(1), sn(0)]],
            )
            .unwrap(),
        );
        let frame = CovectorFrame(SuperMatrix::zeros(
            ctx(),
            ParitySignature::standard(2, 0),
            ParitySignature::standard(0, 0),
        ));
        let degree_zero = make_straight_ber_form((2, 0), &frame).unwrap();
        assert!(matches!(
            i_u_straight(&u).apply(&degree_zero),
            Err(EvalError::Degree(_))
        ));
    }

    #[test]
    fn e_alpha_prepends_to_even_frames() {
        // e_alpha on a Berezinian form with even frame (a^1..a^r) gives the
        // Berezinian form with frame (a, a^1, .., a^r)
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut arena = GenArena::new(ctx());
        let frame = sample::sample_covector_frame((2, 0), 1, 0, &mut arena, &mut rng).unwrap();
        let al = sample::sample_covector((2, 0), Parity::Even, &mut arena, &mut rng).unwrap();
        let form = make_straight_ber_form((2, 0), &frame).unwrap();
        let image = e_alpha_straight(&al).apply(&form).unwrap();

        // frame (alpha, old members)
        let mut cols = vec![al.0.clone()];
        for i in 0..frame.members() {
            cols.push(frame.member(i).0);
        }
        let mut big = cols[0].clone();
        for c in &cols[1..] {
            big = supermatrix_hconcat_for_tests(&big, c);
        }
        let extended = make_straight_ber_form((2, 0), &CovectorFrame(big)).unwrap();
        for _ in 0..5 {
            let args = sample::sample_args(&image.signature(), &mut arena, &mut rng).unwrap();
            let a = image.evaluate(&args, &mut arena).unwrap();
            let b = extended.evaluate(&args, &mut arena).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[cfg(test)]
pub(crate) use test_support::supermatrix_hconcat_for_tests;
