//! Exact directional derivatives of evaluators with respect to matrix
//! entries, via nilpotent probe elements inside the Grassmann context.
//!
//! All derivatives are LEFT derivatives. An even slot is probed with
//! `ε = θ_a θ_b` (even, ε² = 0), so a single evaluation at the perturbed
//! point captures the exact first derivative of any rational evaluator. An
//! odd slot is probed with a single fresh generator; the probe is moved to
//! the far left of each term before its coefficient is read off, which is
//! what makes the derivative a left derivative.
//!
//! Probes are allocated above every generator appearing in the arguments and
//! released with stack discipline, so nested derivatives never collide.

use crate::error::EvalError;
use crate::grassmann::{GenArena, Parity, Supernumber};
use crate::supermatrix::SuperMatrix;

/// Argument matrices of an evaluator; `Slot.mat` indexes into this list.
#[derive(Clone, Debug)]
pub struct MultiPoint(pub Vec<SuperMatrix>);

/// Positional identification of one matrix entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub mat: usize,
    pub row: usize,
    pub col: usize,
}

impl Slot {
    pub fn new(mat: usize, row: usize, col: usize) -> Slot {
        Slot { mat, row, col }
    }
}

pub type EvalResult = Result<Supernumber, EvalError>;

impl MultiPoint {
    pub fn slot_parity(&self, slot: Slot) -> Parity {
        self.0[slot.mat].entry_parity(slot.row, slot.col)
    }

    fn perturb(&self, slot: Slot, probe: &Supernumber) -> MultiPoint {
        let mut mats = self.0.clone();
        mats[slot.mat] = mats[slot.mat].with_entry_added(slot.row, slot.col, probe);
        MultiPoint(mats)
    }
}

enum Probe {
    Even(usize, usize),
    Odd(usize),
}

fn allocate_probe(
    arena: &mut GenArena,
    parity: Parity,
) -> Result<(Probe, Supernumber), EvalError> {
    match parity {
        Parity::Even => {
            let a = arena.fresh()?;
            let b = arena.fresh()?;
            let ta = Supernumber::generator(arena.context(), a)?;
            let tb = Supernumber::generator(arena.context(), b)?;
            Ok((Probe::Even(a, b), &ta * &tb))
        }
        Parity::Odd => {
            let a = arena.fresh()?;
            let t = Supernumber::generator(arena.context(), a)?;
            Ok((Probe::Odd(a), t))
        }
    }
}

fn extract(value: &Supernumber, probe: &Probe) -> Supernumber {
    match probe {
        Probe::Even(a, b) => value.pair_coefficient(*a, *b),
        Probe::Odd(a) => value.left_coefficient(*a),
    }
}

/// Left partial derivative of `f` with respect to the slot entry, evaluated
/// at `point`. Exact for evaluators that are polynomial-plus-rational in
/// their entries.
pub fn deriv<F>(f: &F, point: &MultiPoint, slot: Slot, arena: &mut GenArena) -> EvalResult
where
    F: Fn(&MultiPoint, &mut GenArena) -> EvalResult,
{
    let mark = arena.mark();
    let (probe, delta) = allocate_probe(arena, point.slot_parity(slot))?;
    let perturbed = point.perturb(slot, &delta);
    let value = f(&perturbed, arena)?;
    arena.reset(mark);
    Ok(extract(&value, &probe))
}

/// Iterated left derivative `∂_{slot1} ∂_{slot2} f` (slot2 applied first).
///
/// Both slots are perturbed with independent probes in a single evaluation;
/// the slot2 coefficient is extracted first, then the slot1 coefficient.
pub fn deriv2<F>(
    f: &F,
    point: &MultiPoint,
    slot1: Slot,
    slot2: Slot,
    arena: &mut GenArena,
) -> EvalResult
where
    F: Fn(&MultiPoint, &mut GenArena) -> EvalResult,
{
    let mark = arena.mark();
    let (probe1, delta1) = allocate_probe(arena, point.slot_parity(slot1))?;
    let (probe2, delta2) = allocate_probe(arena, point.slot_parity(slot2))?;
    let perturbed = point.perturb(slot1, &delta1).perturb(slot2, &delta2);
    let value = f(&perturbed, arena)?;
    arena.reset(mark);
    Ok(extract(&extract(&value, &probe2), &probe1))
}

/// Derivative of a single-matrix evaluator with respect to entry (row, col).
pub fn deriv_entry<F>(
    f: &F,
    point: &SuperMatrix,
    row: usize,
    col: usize,
    arena: &mut GenArena,
) -> EvalResult
where
    F: Fn(&SuperMatrix, &mut GenArena) -> EvalResult,
{
    let wrapped = |p: &MultiPoint, arena: &mut GenArena| f(&p.0[0], arena);
    deriv(
        &wrapped,
        &MultiPoint(vec![point.clone()]),
        Slot::new(0, row, col),
        arena,
    )
}
