//! Serializable descriptions of generating-class forms and their data, so
//! verification suites can be replayed from a stored document.
//!
//! Rationals are serialized as `"num/den"` strings to keep the round trip
//! exact; supernumbers as term lists (generator index set plus coefficient);
//! matrices with explicit row and column parities. The top-level document is
//! versioned.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::forms::{
    lift_to_mixed, linear_combination, make_dual_ber_form, make_straight_ber_form, Covector,
    CovectorFrame, Form, FormKind, FormSignature, Vector, VectorFrame,
};
use crate::grassmann::{Context, GenArena, Parity, Supernumber};
use crate::operators::{
    e_alpha_straight, e_cov_with, e_vec_with, i_u_straight, sigma, sigma_inv, tau, tau_inv,
    Mutation,
};
use crate::sample;
use crate::supermatrix::{ParitySignature, SuperMatrix};

/// Document format version for all JSON emitted by this crate.
pub const FORMAT_VERSION: u32 = 1;

fn rational_to_string(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

fn rational_from_string(s: &str) -> Result<BigRational, EvalError> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let parse = |t: &str| {
        BigInt::from_str(t.trim())
            .map_err(|e| EvalError::Shape(format!("bad rational '{s}': {e}")))
    };
    let den = parse(den)?;
    if den == BigInt::from(0) {
        return Err(EvalError::Shape(format!("bad rational '{s}': zero denominator")));
    }
    Ok(BigRational::new(parse(num)?, den))
}

/// One supernumber term: ascending generator indices and an exact rational.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct TermRepr {
    pub gens: Vec<u8>,
    pub coeff: String,
}

/// Serialized supernumber.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct SupernumberRepr(pub Vec<TermRepr>);

impl SupernumberRepr {
    pub fn of(value: &Supernumber) -> SupernumberRepr {
        SupernumberRepr(
            value
                .terms()
                .map(|(m, c)| TermRepr {
                    gens: m.indices().iter().map(|&i| i as u8).collect(),
                    coeff: rational_to_string(c),
                })
                .collect(),
        )
    }

    pub fn build(&self, ctx: Context) -> Result<Supernumber, EvalError> {
        let mut acc = Supernumber::zero(ctx);
        for t in &self.0 {
            let idx: Vec<usize> = t.gens.iter().map(|&i| i as usize).collect();
            let coeff = rational_from_string(&t.coeff)?;
            acc = acc.add_checked(&Supernumber::monomial(ctx, &idx, coeff)?)?;
        }
        Ok(acc)
    }
}

/// Serialized parity-typed matrix.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct MatrixRepr {
    pub row_parities: Vec<Parity>,
    pub col_parities: Vec<Parity>,
    pub entries: Vec<Vec<SupernumberRepr>>,
}

impl MatrixRepr {
    pub fn of(m: &SuperMatrix) -> MatrixRepr {
        MatrixRepr {
            row_parities: m.row_sig().iter().collect(),
            col_parities: m.col_sig().iter().collect(),
            entries: (0..m.rows())
                .map(|i| (0..m.cols()).map(|j| SupernumberRepr::of(m.get(i, j))).collect())
                .collect(),
        }
    }

    pub fn build(&self, ctx: Context) -> Result<SuperMatrix, EvalError> {
        let rows: Vec<Vec<Supernumber>> = self
            .entries
            .iter()
            .map(|row| row.iter().map(|e| e.build(ctx)).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?;
        SuperMatrix::new(
            ctx,
            ParitySignature::new(self.row_parities.clone()),
            ParitySignature::new(self.col_parities.clone()),
            rows,
        )
        .map_err(EvalError::from)
    }
}

/// Serializable description of a generating-class form: Berezinian frames,
/// the isomorphisms, exterior/contraction images and linear combinations.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub enum FormRecipe {
    StraightBer {
        ambient: (usize, usize),
        frame: MatrixRepr,
    },
    DualBer {
        ambient: (usize, usize),
        frame: MatrixRepr,
    },
    /// Dual Berezinian form on the extended space, lifted to a mixed form.
    MixedBerLift {
        base: (usize, usize),
        extra: (usize, usize),
        frame: MatrixRepr,
    },
    Tau {
        inner: Box<FormRecipe>,
    },
    TauInv {
        inner: Box<FormRecipe>,
    },
    Sigma {
        k: usize,
        l: usize,
        inner: Box<FormRecipe>,
    },
    SigmaInv {
        k: usize,
        l: usize,
        inner: Box<FormRecipe>,
    },
    ECov {
        alpha: MatrixRepr,
        inner: Box<FormRecipe>,
    },
    EVec {
        u: MatrixRepr,
        inner: Box<FormRecipe>,
    },
    EAlpha {
        alpha: MatrixRepr,
        inner: Box<FormRecipe>,
    },
    IU {
        u: MatrixRepr,
        inner: Box<FormRecipe>,
    },
    LinComb {
        coeffs: Vec<SupernumberRepr>,
        parts: Vec<FormRecipe>,
    },
}

impl FormRecipe {
    /// Builds the form; operator mutations are threaded through so stored
    /// instances replay under the same debug configuration.
    pub fn build(&self, ctx: Context, mutation: Mutation) -> Result<Form, EvalError> {
        match self {
            FormRecipe::StraightBer { ambient, frame } => {
                make_straight_ber_form(*ambient, &CovectorFrame(frame.build(ctx)?))
            }
            FormRecipe::DualBer { ambient, frame } => {
                make_dual_ber_form(*ambient, &VectorFrame(frame.build(ctx)?))
            }
            FormRecipe::MixedBerLift { base, extra, frame } => {
                let (n, m) = *base;
                let (r, s) = *extra;
                let dual = make_dual_ber_form((n + r, m + s), &VectorFrame(frame.build(ctx)?))?;
                lift_to_mixed(&dual, *base, *extra)
            }
            FormRecipe::Tau { inner } => tau().apply(&inner.build(ctx, mutation)?),
            FormRecipe::TauInv { inner } => tau_inv().apply(&inner.build(ctx, mutation)?),
            FormRecipe::Sigma { k, l, inner } => sigma(*k, *l).apply(&inner.build(ctx, mutation)?),
            FormRecipe::SigmaInv { k, l, inner } => {
                sigma_inv(*k, *l).apply(&inner.build(ctx, mutation)?)
            }
            FormRecipe::ECov { alpha, inner } => {
                e_cov_with(&Covector(alpha.build(ctx)?), mutation)
                    .apply(&inner.build(ctx, mutation)?)
            }
            FormRecipe::EVec { u, inner } => {
                e_vec_with(&Vector(u.build(ctx)?), mutation).apply(&inner.build(ctx, mutation)?)
            }
            FormRecipe::EAlpha { alpha, inner } => {
                e_alpha_straight(&Covector(alpha.build(ctx)?)).apply(&inner.build(ctx, mutation)?)
            }
            FormRecipe::IU { u, inner } => {
                i_u_straight(&Vector(u.build(ctx)?)).apply(&inner.build(ctx, mutation)?)
            }
            FormRecipe::LinComb { coeffs, parts } => {
                let cs: Vec<Supernumber> = coeffs
                    .iter()
                    .map(|c| c.build(ctx))
                    .collect::<Result<_, _>>()?;
                let fs: Vec<Form> = parts
                    .iter()
                    .map(|p| p.build(ctx, mutation))
                    .collect::<Result<_, _>>()?;
                linear_combination(&cs, &fs)
            }
        }
    }
}

/// Versioned wrapper for stored recipes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecipeDoc {
    pub version: u32,
    pub signature: FormSignature,
    pub recipe: FormRecipe,
}

impl RecipeDoc {
    pub fn new(signature: FormSignature, recipe: FormRecipe) -> RecipeDoc {
        RecipeDoc {
            version: FORMAT_VERSION,
            signature,
            recipe,
        }
    }
}

/// Random generating-class recipe for the requested signature.
///
/// Mixed signatures with p >= r and q >= s use Berezinian lifts directly;
/// every other desk-scale signature is reached by conjugating a tau-image
/// with stability isomorphisms. With remaining depth, the recipe is wrapped
/// in exterior images or a linear combination.
pub fn sample_recipe<R: Rng>(
    sig: &FormSignature,
    depth: usize,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<FormRecipe, EvalError> {
    sig.validate()?;
    let (n, m) = sig.ambient;
    match sig.kind {
        FormKind::Straight { r, s } => {
            let wrap = depth > 0 && r > 0 && rng.gen_bool(0.4);
            if wrap {
                let inner_sig = FormSignature::straight(n, m, r - 1, s);
                let inner = sample_recipe(&inner_sig, depth - 1, arena, rng)?;
                let alpha = sample::sample_covector(
                    (n, m),
                    random_parity(rng),
                    arena,
                    rng,
                )?;
                return Ok(FormRecipe::EAlpha {
                    alpha: MatrixRepr::of(&alpha.0),
                    inner: Box::new(inner),
                });
            }
            if depth > 0 && rng.gen_bool(0.25) {
                let a = sample_recipe(&FormSignature::straight(n, m, r, s), 0, arena, rng)?;
                let b = sample_recipe(&FormSignature::straight(n, m, r, s), 0, arena, rng)?;
                return Ok(lin_comb_of(a, b, arena, rng)?);
            }
            let frame = sample::sample_covector_frame((n, m), r, s, arena, rng)?;
            Ok(FormRecipe::StraightBer {
                ambient: (n, m),
                frame: MatrixRepr::of(&frame.0),
            })
        }
        FormKind::Dual { .. } | FormKind::Mixed { .. } => {
            let (p, q, r, s) = sig.as_mixed()?;
            if depth > 0 && r > 0 && rng.gen_bool(0.3) {
                let inner_sig = FormSignature::mixed_or_dual(n, m, p, q, r - 1, s);
                if inner_sig.validate().is_ok() {
                    let inner = sample_recipe(&inner_sig, depth - 1, arena, rng)?;
                    let alpha = sample::sample_covector((n, m), random_parity(rng), arena, rng)?;
                    return Ok(FormRecipe::ECov {
                        alpha: MatrixRepr::of(&alpha.0),
                        inner: Box::new(inner),
                    });
                }
            }
            if depth > 0 && p > 0 && rng.gen_bool(0.3) {
                let inner_sig = FormSignature::mixed_or_dual(n, m, p - 1, q, r, s);
                if inner_sig.validate().is_ok() {
                    let inner = sample_recipe(&inner_sig, depth - 1, arena, rng)?;
                    let u = sample::sample_vector((n, m), random_parity(rng), arena, rng)?;
                    return Ok(FormRecipe::EVec {
                        u: MatrixRepr::of(&u.0),
                        inner: Box::new(inner),
                    });
                }
            }
            if depth > 0 && rng.gen_bool(0.2) {
                let a = base_mixed_recipe(sig, arena, rng)?;
                let b = base_mixed_recipe(sig, arena, rng)?;
                return Ok(lin_comb_of(a, b, arena, rng)?);
            }
            base_mixed_recipe(sig, arena, rng)
        }
    }
}

fn random_parity<R: Rng>(rng: &mut R) -> Parity {
    if rng.gen() {
        Parity::Even
    } else {
        Parity::Odd
    }
}

fn lin_comb_of<R: Rng>(
    a: FormRecipe,
    b: FormRecipe,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<FormRecipe, EvalError> {
    let ctx = arena.context();
    let c1 = Supernumber::from_rational(ctx, sample::sample_nonzero_rational(rng));
    let c2 = Supernumber::from_rational(ctx, sample::sample_nonzero_rational(rng));
    Ok(FormRecipe::LinComb {
        coeffs: vec![SupernumberRepr::of(&c1), SupernumberRepr::of(&c2)],
        parts: vec![a, b],
    })
}

/// Base route to a mixed signature, always yielding an evaluator defined on
/// a generic argument:
///
/// * p >= r (and the always-true q >= s): a Berezinian lift, sometimes
///   wrapped in forward sigma over a tau-image or in an inverse sigma over a
///   larger lift;
/// * p < r: an e(alpha)-chain over the lift of shape {p,q,p,s}.
///
/// Inverse-sigma-over-tau composites are never emitted: the inverse map
/// pins exactly the columns whose invertibility the tau evaluator needs, so
/// that composite has an empty evaluation domain even though the form it
/// represents is perfectly good.
fn base_mixed_recipe<R: Rng>(
    sig: &FormSignature,
    arena: &mut GenArena,
    rng: &mut R,
) -> Result<FormRecipe, EvalError> {
    let (n, m) = sig.ambient;
    let (p, q, r, s) = sig.as_mixed()?;
    if p < r {
        let inner_sig = FormSignature::mixed_or_dual(n, m, p, q, r - 1, s);
        let inner = base_mixed_recipe(&inner_sig, arena, rng)?;
        let alpha = sample::sample_covector((n, m), random_parity(rng), arena, rng)?;
        return Ok(FormRecipe::ECov {
            alpha: MatrixRepr::of(&alpha.0),
            inner: Box::new(inner),
        });
    }
    // forward tau-plus-sigma route, for variety
    if rng.gen_bool(0.25) {
        if let Some((r0, s0, dk, dl)) = tau_sigma_forward(sig) {
            let straight =
                sample_recipe(&FormSignature::straight(n, m, r0, s0), 0, arena, rng)?;
            let tau_image = FormRecipe::Tau {
                inner: Box::new(straight),
            };
            return Ok(if dk > 0 || dl > 0 {
                FormRecipe::Sigma {
                    k: dk as usize,
                    l: dl as usize,
                    inner: Box::new(tau_image),
                }
            } else {
                tau_image
            });
        }
    }
    // inverse sigma over a one-step-larger lift, for variety
    if rng.gen_bool(0.2) {
        let (k, l) = if rng.gen() { (1, 0) } else { (0, 1) };
        let big = FormSignature::mixed_or_dual(n, m, p + k, q + l, r + k, s + l);
        if big.validate().is_ok() {
            let frame =
                sample::sample_extended_vector_frame((n, m), (r + k, s + l), p + k, q + l, arena, rng)?;
            return Ok(FormRecipe::SigmaInv {
                k,
                l,
                inner: Box::new(FormRecipe::MixedBerLift {
                    base: (n, m),
                    extra: (r + k, s + l),
                    frame: MatrixRepr::of(&frame.0),
                }),
            });
        }
    }
    let frame = sample::sample_extended_vector_frame((n, m), (r, s), p, q, arena, rng)?;
    Ok(FormRecipe::MixedBerLift {
        base: (n, m),
        extra: (r, s),
        frame: MatrixRepr::of(&frame.0),
    })
}

/// Parameters of the forward tau-plus-sigma route to Mixed{p,q,r,s}: only
/// non-negative stability shifts qualify.
fn tau_sigma_forward(sig: &FormSignature) -> Option<(usize, usize, i64, i64)> {
    let (n, m) = sig.ambient;
    let (p, q, r, s) = sig.as_mixed().ok()?;
    let dk = p as i64 - n as i64;
    let dl = q as i64 - m as i64;
    if dk < 0 || dl < 0 {
        return None;
    }
    let r0 = r as i64 - dk;
    let s0 = s as i64 - dl;
    if r0 < 0 || s0 < 0 || s0 > m as i64 {
        return None;
    }
    Some((r0 as usize, s0 as usize, dk, dl))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx() -> Context {
        Context::new(128)
    }

    #[test]
    fn rational_strings_round_trip() {
        for s in ["3/4", "-7/2", "0/1", "12"] {
            let q = rational_from_string(s).unwrap();
            let t = rational_to_string(&q);
            assert_eq!(rational_from_string(&t).unwrap(), q);
        }
        assert!(rational_from_string("1/0").is_err());
        assert!(rational_from_string("x").is_err());
    }

    #[test]
    fn supernumber_repr_round_trip() {
        let mut arena = GenArena::new(ctx());
        let t0 = arena.fresh_generator().unwrap();
        let t1 = arena.fresh_generator().unwrap();
        let x = &Supernumber::from_rational(ctx(), crate::grassmann::rat(-3, 7)) + &(&t0 * &t1);
        let repr = SupernumberRepr::of(&x);
        let back = repr.build(ctx()).unwrap();
        assert_eq!(back, x);
        let json = serde_json::to_string(&repr).unwrap();
        let parsed: SupernumberRepr = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.build(ctx()).unwrap(), x);
    }

    #[test]
    fn recipes_round_trip_through_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut arena = GenArena::new(ctx());
        let sig = FormSignature::mixed(1, 1, 1, 1, 1, 0);
        let recipe = sample_recipe(&sig, 1, &mut arena, &mut rng).unwrap();
        let doc = RecipeDoc::new(sig, recipe.clone());
        let json = serde_json::to_string_pretty(&doc).unwrap();
        let parsed: RecipeDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.version, FORMAT_VERSION);
        assert_eq!(parsed.recipe, recipe);
        // both builds evaluate identically
        let f1 = recipe.build(ctx(), Mutation::none()).unwrap();
        let f2 = parsed.recipe.build(ctx(), Mutation::none()).unwrap();
        assert_eq!(f1.signature(), sig);
        for _ in 0..3 {
            let mark = arena.mark();
            let ok = sample::retry_domain(&mut arena, sample::DOMAIN_RETRIES, |arena| {
                let args = sample::sample_args(&sig, arena, &mut rng)?;
                Ok(f1.evaluate(&args, arena)? == f2.evaluate(&args, arena)?)
            })
            .unwrap();
            arena.reset(mark);
            assert!(ok);
        }
    }

    #[test]
    fn sampled_recipes_hit_requested_signatures() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let dims = [(1usize, 1usize), (2, 1), (2, 2)];
        for &(n, m) in &dims {
            for p in 0..=2usize {
                for r in 0..=2usize {
                    for s in 0..=m.min(2) {
                        for q in s..=(m + s).min(2) {
                            let sig = FormSignature::mixed_or_dual(n, m, p, q, r, s);
                            if sig.validate().is_err() {
                                continue;
                            }
                            let mut arena = GenArena::new(ctx());
                            let recipe =
                                sample_recipe(&sig, 1, &mut arena, &mut rng).unwrap();
                            let form = recipe.build(ctx(), Mutation::none()).unwrap();
                            assert_eq!(form.signature(), sig, "recipe for {sig}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn negative_stable_degree_form_is_nonzero() {
        // dual form with more even arguments than the even dimension:
        // codegree 2|0 on a 1|1 space has stable degree -1|1; the Berezinian
        // generating class produces a nonzero representative
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let mut arena = GenArena::new(ctx());
        let sig = FormSignature::dual(1, 1, 2, 0);
        assert_eq!(sig.stable_degree().unwrap(), (-1, 1));
        let frame = sample::sample_vector_frame((1, 1), 2, 0, &mut arena, &mut rng).unwrap();
        let form = make_dual_ber_form((1, 1), &frame).unwrap();
        let mut nonzero = false;
        for _ in 0..10 {
            let mark = arena.mark();
            let val = sample::retry_domain(&mut arena, sample::DOMAIN_RETRIES, |arena| {
                let args = sample::sample_args(&sig, arena, &mut rng)?;
                form.evaluate(&args, arena)
            })
            .unwrap();
            arena.reset(mark);
            if !val.is_zero() {
                nonzero = true;
                break;
            }
        }
        assert!(nonzero, "expected a nonzero negative-degree representative");
    }
}
