//! Deterministic samplers for desk-scale test instances.
//!
//! Even entries are small random rationals (numerators and denominators up
//! to 9); odd entries are plus/minus one fresh Grassmann generator each, so
//! every sampled instance stays within the generator budget and has enough
//! generic soul to exercise the sign bookkeeping. Evaluations that land
//! outside an evaluator's domain (a non-invertible block) are retried a
//! bounded number of times and then reported.

use num_rational::BigRational;
use rand::Rng;

use crate::error::EvalError;
use crate::forms::{Covector, CovectorFrame, Form, FormKind, FormSignature, Vector, VectorFrame};
use crate::grassmann::{GenArena, Parity, Supernumber};
use crate::supermatrix::{sample_gl, ParitySignature, SuperMatrix};

pub const DOMAIN_RETRIES: usize = 40;

/// Runs `body` with arena stack discipline, retrying on domain errors up to
/// `max_tries` times. Other errors propagate immediately.
pub fn retry_domain<T, F>(
    arena: &mut GenArena,
    max_tries: usize,
    mut body: F,
) -> Result<T, EvalError>
where
    F: FnMut(&mut GenArena) -> Result<T, EvalError>,
{
    let mark = arena.mark();
    for _ in 0..max_tries {
        match body(arena) {
            Ok(v) => return Ok(v),
            Err(EvalError::Domain(_)) => {
                arena.reset(mark);
            }
            Err(other) => return Err(other),
        }
    }
    Err(EvalError::Sampling(format!(
        "no admissible instance found in {max_tries} tries"
    )))
}

pub fn sample_rational<R: Rng>(rng: &mut R) -> BigRational {
    let num: i64 = rng.gen_range(-9..=9);
    let den: i64 = rng.gen_range(1..=9);
    BigRational::new(num.into(), den.into())
}

pub fn sample_nonzero_rational<R: Rng>(rng: &mut R) -> BigRational {
    loop {
        let q = sample_rational(rng);
        if !num_traits::Zero::is_zero(&q) {
            return q;
        }
    }
}

/// One entry of the given parity: a small rational when even, plus or minus
/// a fresh generator when odd.
pub fn sample_entry<R: Rng>(
    parity: Parity,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<Supernumber, EvalError> {
    match parity {
        Parity::Even => Ok(Supernumber::from_rational(
            arena.context(),
            sample_rational(rng),
        )),
        Parity::Odd => {
            let theta = arena.fresh_generator()?;
            Ok(if rng.gen() { theta } else { -theta })
        }
    }
}

/// Like [`sample_entry`] but with nonzero even entries; frames built from
/// such entries are generically non-degenerate.
fn sample_entry_nonzero<R: Rng>(
    parity: Parity,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<Supernumber, EvalError> {
    match parity {
        Parity::Even => Ok(Supernumber::from_rational(
            arena.context(),
            sample_nonzero_rational(rng),
        )),
        Parity::Odd => sample_entry(parity, arena, rng),
    }
}

fn sample_matrix_nonzero<R: Rng>(
    row_sig: &ParitySignature,
    col_sig: &ParitySignature,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<SuperMatrix, EvalError> {
    let ctx = arena.context();
    let mut rows = Vec::with_capacity(row_sig.len());
    for i in 0..row_sig.len() {
        let mut row = Vec::with_capacity(col_sig.len());
        for j in 0..col_sig.len() {
            row.push(sample_entry_nonzero(
                row_sig.parity(i) + col_sig.parity(j),
                arena,
                rng,
            )?);
        }
        rows.push(row);
    }
    SuperMatrix::new(ctx, row_sig.clone(), col_sig.clone(), rows).map_err(EvalError::from)
}

pub fn sample_matrix<R: Rng>(
    row_sig: &ParitySignature,
    col_sig: &ParitySignature,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<SuperMatrix, EvalError> {
    let ctx = arena.context();
    let mut rows = Vec::with_capacity(row_sig.len());
    for i in 0..row_sig.len() {
        let mut row = Vec::with_capacity(col_sig.len());
        for j in 0..col_sig.len() {
            row.push(sample_entry(
                row_sig.parity(i) + col_sig.parity(j),
                arena,
                rng,
            )?);
        }
        rows.push(row);
    }
    SuperMatrix::new(ctx, row_sig.clone(), col_sig.clone(), rows).map_err(EvalError::from)
}

/// Argument matrix for a form of the given signature.
pub fn sample_args<R: Rng>(
    sig: &FormSignature,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<SuperMatrix, EvalError> {
    sample_matrix(&sig.arg_row_sig(), &sig.arg_col_sig(), arena, rng)
}

/// Argument matrix at which the form evaluates (bounded retries on domain
/// errors), returned together with the value.
pub fn sample_admissible_args<R: Rng>(
    form: &Form,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<(SuperMatrix, Supernumber), EvalError> {
    retry_domain(arena, DOMAIN_RETRIES, |arena| {
        let args = sample_args(&form.signature(), arena, rng)?;
        let value = form.evaluate(&args, arena)?;
        Ok((args, value))
    })
}

/// Runs a check at an admissible point of the form, resampling the point on
/// domain errors raised anywhere inside the check.
pub fn with_admissible_point<T, R, F>(
    form: &Form,
    arena: &mut GenArena,
    rng: &mut R,
    mut check: F,
) -> Result<T, EvalError>
where
    R: Rng,
    F: FnMut(&SuperMatrix, &mut GenArena, &mut R) -> Result<T, EvalError>,
{
    retry_domain(arena, DOMAIN_RETRIES, |arena| {
        let args = sample_args(&form.signature(), arena, rng)?;
        form.evaluate(&args, arena)?;
        check(&args, arena, rng)
    })
}

/// Group element for the homogeneity law of the signature: GL(r|s) for a
/// straight form, GL(p|q) for a dual or mixed form.
pub fn sample_group_element<R: Rng>(
    sig: &FormSignature,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<SuperMatrix, EvalError> {
    let (e, o) = match sig.kind {
        FormKind::Straight { r, s } => (r, s),
        FormKind::Dual { p, q } | FormKind::Mixed { p, q, .. } => (p, q),
    };
    sample_gl(arena.context(), arena, rng, e, o).map_err(EvalError::from)
}

/// Shear datum for the mixed homogeneity law: g in GL(r|s) and an arbitrary
/// parity-consistent a of shape (n+m) x (r+s).
pub fn sample_shear_data<R: Rng>(
    sig: &FormSignature,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<(SuperMatrix, SuperMatrix), EvalError> {
    let (_, _, r, s) = sig.as_mixed()?;
    let (n, m) = sig.ambient;
    let g = sample_gl(arena.context(), arena, rng, r, s).map_err(EvalError::from)?;
    let a = sample_matrix(
        &ParitySignature::standard(n, m),
        &ParitySignature::standard(r, s),
        arena,
        rng,
    )?;
    Ok((g, a))
}

/// Row vector of the given parity on the ambient space.
pub fn sample_vector<R: Rng>(
    ambient: (usize, usize),
    parity: Parity,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<Vector, EvalError> {
    let (n, m) = ambient;
    let mat = sample_matrix_nonzero(
        &ParitySignature::new(vec![parity]),
        &ParitySignature::standard(n, m),
        arena,
        rng,
    )?;
    Ok(Vector(mat))
}

/// Column covector of the given parity on the ambient space.
pub fn sample_covector<R: Rng>(
    ambient: (usize, usize),
    parity: Parity,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<Covector, EvalError> {
    let (n, m) = ambient;
    let mat = sample_matrix_nonzero(
        &ParitySignature::standard(n, m),
        &ParitySignature::new(vec![parity]),
        arena,
        rng,
    )?;
    Ok(Covector(mat))
}

/// Covector frame of shape r|s on the ambient space.
pub fn sample_covector_frame<R: Rng>(
    ambient: (usize, usize),
    r: usize,
    s: usize,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<CovectorFrame, EvalError> {
    let (n, m) = ambient;
    let mat = sample_matrix_nonzero(
        &ParitySignature::standard(n, m),
        &ParitySignature::standard(r, s),
        arena,
        rng,
    )?;
    Ok(CovectorFrame(mat))
}

/// Vector frame of shape p|q on the ambient space.
pub fn sample_vector_frame<R: Rng>(
    ambient: (usize, usize),
    p: usize,
    q: usize,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<VectorFrame, EvalError> {
    let (n, m) = ambient;
    let mat = sample_matrix_nonzero(
        &ParitySignature::standard(p, q),
        &ParitySignature::standard(n, m),
        arena,
        rng,
    )?;
    Ok(VectorFrame(mat))
}

/// Vector frame on the extended space V + R^(r|s) whose last r even and last
/// s odd members are the extension basis vectors, while all other members
/// are supported on V only. Dual Berezinian forms over such frames satisfy
/// the shear/scale law of mixed forms, so they lift.
///
/// Requires p >= r and q >= s.
pub fn sample_extended_vector_frame<R: Rng>(
    base: (usize, usize),
    extra: (usize, usize),
    p: usize,
    q: usize,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<VectorFrame, EvalError> {
    let (n, m) = base;
    let (r, s) = extra;
    if p < r || q < s {
        return Err(EvalError::Shape(format!(
            "extension frame needs p >= r and q >= s, got p|q = {p}|{q}, r|s = {r}|{s}"
        )));
    }
    let ctx = arena.context();
    // extended ambient (n+r | m+s); even components: n from V then r from R,
    // odd components: m from V then s from R
    let ext_cols = ParitySignature::standard(n + r, m + s);
    let row_sig = ParitySignature::standard(p, q);
    let mut rows: Vec<Vec<Supernumber>> = Vec::with_capacity(p + q);
    for i in 0..p + q {
        let member_parity = row_sig.parity(i);
        let is_extension_even = i >= p - r && i < p;
        let is_extension_odd = i >= p + (q - s);
        if is_extension_even || is_extension_odd {
            let ext_index = if is_extension_even {
                n + (i - (p - r))
            } else {
                (n + r) + m + (i - (p + (q - s)))
            };
            let mut row = vec![Supernumber::zero(ctx); n + r + m + s];
            row[ext_index] = Supernumber::one(ctx);
            rows.push(row);
        } else {
            let mut row = Vec::with_capacity(n + r + m + s);
            for j in 0..n + r + m + s {
                let in_v = j < n || (j >= n + r && j < n + r + m);
                if in_v {
                    row.push(sample_entry_nonzero(member_parity + ext_cols.parity(j), arena, rng)?);
                } else {
                    row.push(Supernumber::zero(ctx));
                }
            }
            rows.push(row);
        }
    }
    let mat = SuperMatrix::new(ctx, row_sig, ext_cols, rows).map_err(EvalError::from)?;
    Ok(VectorFrame(mat))
}
