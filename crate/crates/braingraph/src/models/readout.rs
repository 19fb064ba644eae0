//! Permutation-invariant graph readouts and the shared linear head.

use crate::error::Result;
use crate::models::{ForwardCtx, Readout};
use crate::numerics::{Tape, ValueId};

/// Pools node features [N x F] into a vector: mean -> F,
/// mean||max -> 2F, sum -> F. Invariant to node (row) permutation.
pub fn readout(tape: &mut Tape, nodes: ValueId, kind: Readout) -> Result<ValueId> {
    match kind {
        Readout::Mean => tape.mean(nodes, Some(0)),
        Readout::Sum => tape.sum(nodes, Some(0)),
        Readout::MeanCatMax => {
            let mean = tape.mean(nodes, Some(0))?;
            let max = tape.max(nodes, Some(0))?;
            tape.concat(mean, max)
        }
    }
}

/// The classification head every family shares: one linear layer from
/// the pooled vector to a single logit.
pub(crate) fn linear_head(tape: &mut Tape, ctx: &ForwardCtx, pooled: ValueId) -> Result<ValueId> {
    let w = ctx.param("head_w")?;
    let b = ctx.param("head_b")?;
    let weighted = tape.mul(pooled, w)?;
    let dot = tape.sum(weighted, None)?;
    tape.add(dot, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn readout_hand_values() {
        let mut tape = Tape::new();
        let x = tape
            .constant(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap())
            .unwrap();
        let mean = readout(&mut tape, x, Readout::Mean).unwrap();
        assert_eq!(tape.value(mean).values(), &[2.0, 3.0]);
        let both = readout(&mut tape, x, Readout::MeanCatMax).unwrap();
        assert_eq!(tape.value(both).values(), &[2.0, 3.0, 3.0, 4.0]);
        let sum = readout(&mut tape, x, Readout::Sum).unwrap();
        assert_eq!(tape.value(sum).values(), &[4.0, 6.0]);
    }

    #[test]
    fn readout_invariant_to_row_permutation() {
        let rows = [vec![0.3, -1.0, 2.0], vec![5.0, 0.1, -0.4], vec![1.5, 2.5, 0.0]];
        let orders: [[usize; 3]; 3] = [[0, 1, 2], [2, 0, 1], [1, 2, 0]];
        for kind in [Readout::Mean, Readout::MeanCatMax, Readout::Sum] {
            let mut outputs = Vec::new();
            for order in &orders {
                let mut tape = Tape::new();
                let data: Vec<f64> = order.iter().flat_map(|&i| rows[i].clone()).collect();
                let x = tape.constant(Tensor::new(vec![3, 3], data).unwrap()).unwrap();
                let r = readout(&mut tape, x, kind).unwrap();
                outputs.push(tape.value(r).values().to_vec());
            }
            assert_eq!(outputs[0], outputs[1]);
            assert_eq!(outputs[0], outputs[2]);
        }
    }
}
