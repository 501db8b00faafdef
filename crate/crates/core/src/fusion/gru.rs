use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::Rng;
use rayon::prelude::*;

use super::PackedBatch;
use crate::graph::EntityId;
use crate::{Error, Result};

/// GRU cell with separate input (`w`) and recurrent (`u`) matrices per gate.
///
/// ```text
/// z = sigmoid(W_z x + U_z h + b_z)
/// r = sigmoid(W_r x + U_r h + b_r)
/// n = tanh(W_n x + r * (U_n h) + b_n)
/// h' = (1 - z) * n + z * h
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct GruCell {
    /// Update, reset, candidate.
    w: [Array2<f64>; 3],
    u: [Array2<f64>; 3],
    b: [Array1<f64>; 3],
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl GruCell {
    pub fn new(w: [Array2<f64>; 3], u: [Array2<f64>; 3], b: [Array1<f64>; 3]) -> Result<Self> {
        let hidden = b[0].len();
        let input = w[0].ncols();
        for g in 0..3 {
            if w[g].dim() != (hidden, input) {
                return Err(Error::DimensionMismatch {
                    expected: hidden * input,
                    got: w[g].len(),
                });
            }
            if u[g].dim() != (hidden, hidden) {
                return Err(Error::DimensionMismatch {
                    expected: hidden * hidden,
                    got: u[g].len(),
                });
            }
            if b[g].len() != hidden {
                return Err(Error::DimensionMismatch {
                    expected: hidden,
                    got: b[g].len(),
                });
            }
        }
        let cell = Self { w, u, b };
        let finite = cell
            .w
            .iter()
            .chain(&cell.u)
            .all(|m| m.iter().all(|v| v.is_finite()))
            && cell.b.iter().all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::invalid("GRU parameters must be finite"));
        }
        Ok(cell)
    }

    /// Parameters uniform in `[-scale, scale]`.
    pub fn random(input: usize, hidden: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut mat = |r, c| Array2::from_shape_fn((r, c), |_| rng.random_range(-scale..=scale));
        let w = [mat(hidden, input), mat(hidden, input), mat(hidden, input)];
        let u = [mat(hidden, hidden), mat(hidden, hidden), mat(hidden, hidden)];
        let b = [
            mat(hidden, 1).column(0).to_owned(),
            mat(hidden, 1).column(0).to_owned(),
            mat(hidden, 1).column(0).to_owned(),
        ];
        Self { w, u, b }
    }

    pub fn input_dim(&self) -> usize {
        self.w[0].ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.b[0].len()
    }

    pub fn step(&self, x: &Array1<f64>, h: &Array1<f64>) -> Array1<f64> {
        let gate = |g: usize| self.w[g].dot(x) + &self.b[g];
        let z = (gate(0) + self.u[0].dot(h)).mapv(sigmoid);
        let r = (gate(1) + self.u[1].dot(h)).mapv(sigmoid);
        let n = (gate(2) + &r * &self.u[2].dot(h)).mapv(f64::tanh);
        (1.0 - &z) * &n + &z * h
    }

    /// Hidden state after every element of one sequence, from a zero state.
    pub fn forward_sequence(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut h = Array1::zeros(self.hidden_dim());
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            self.check_input(x)?;
            h = self.step(&Array1::from_vec(x.clone()), &h);
            out.push(h.to_vec());
        }
        Ok(out)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Runs the cell along each packed row. Where the slot-pair mask is 0 the
/// carried hidden state is zeroed before it reaches any gate, so each
/// sequence starts fresh. Padding slots produce no output.
///
/// `inputs` maps an entity to its per-step feature vectors; the result has
/// the same shape with hidden states.
pub fn gru_forward_masked(
    cell: &GruCell,
    batch: &PackedBatch,
    inputs: &HashMap<EntityId, Vec<Vec<f64>>>,
) -> Result<HashMap<EntityId, Vec<Vec<f64>>>> {
    let rows: Vec<Vec<(EntityId, usize, Vec<f64>)>> = batch
        .rows
        .par_iter()
        .enumerate()
        .map(|(r, row)| {
            let mut h = Array1::zeros(cell.hidden_dim());
            let mut out = Vec::new();
            for (p, slot) in row.iter().enumerate() {
                let Some(slot) = slot else {
                    h.fill(0.0);
                    continue;
                };
                let x = inputs
                    .get(&slot.entity)
                    .and_then(|xs| xs.get(slot.step))
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "missing input for entity {} step {}",
                            slot.entity, slot.step
                        ))
                    })?;
                cell.check_input(x)?;
                let m = if batch.carries_into(r, p) { 1.0 } else { 0.0 };
                let carry = &h * m;
                h = cell.step(&Array1::from_vec(x.clone()), &carry);
                out.push((slot.entity, slot.step, h.to_vec()));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut result: HashMap<EntityId, Vec<Vec<f64>>> = HashMap::new();
    for (entity, step, h) in rows.into_iter().flatten() {
        let seq = result.entry(entity).or_default();
        if seq.len() <= step {
            seq.resize(step + 1, Vec::new());
        }
        seq[step] = h;
    }
    Ok(result)
}
