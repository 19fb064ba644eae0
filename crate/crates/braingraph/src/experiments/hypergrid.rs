//! Finite hyperparameter grids and their exhaustive enumeration.

use crate::error::{Error, Result};
use crate::experiments::inputs::Candidate;
use crate::models::{Family, Readout, RowNormalizer};

/// Value lists per tunable axis. A family only reads the axes that
/// apply to it; the rest are ignored during enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub lr: Vec<f64>,
    pub hidden_dim: Vec<usize>,
    pub readout: Vec<Readout>,
    pub keep_fraction: Vec<f64>,
    pub dropout: Vec<f64>,
    pub weight_decay: Vec<f64>,
    pub heads: Vec<usize>,
    pub blocks: Vec<usize>,
    pub embedding_dim: Vec<usize>,
    pub normalizer: Vec<RowNormalizer>,
    pub svm_c: Vec<f64>,
    pub svm_gamma: Vec<f64>,
}

impl HyperGrid {
    /// Default search space; `input_dim` feeds the 1/P gamma heuristic.
    pub fn default_grid(input_dim: usize) -> HyperGrid {
        HyperGrid {
            lr: vec![1e-2, 1e-3, 1e-4],
            hidden_dim: vec![32, 64, 128],
            readout: vec![Readout::Mean, Readout::MeanCatMax, Readout::Sum],
            keep_fraction: vec![0.85, 0.70, 0.50, 0.25, 0.10],
            dropout: vec![0.0, 0.3],
            weight_decay: vec![0.0, 1e-4],
            heads: vec![1, 2, 4],
            blocks: vec![1, 2, 3],
            embedding_dim: vec![8, 16, 32],
            normalizer: vec![RowNormalizer::Softmax, RowNormalizer::Sparsemax],
            svm_c: vec![0.1, 1.0, 10.0, 100.0],
            svm_gamma: vec![1.0 / input_dim.max(1) as f64, 0.01, 0.001],
        }
    }

    /// A single-point grid around one candidate, for frozen-parameter
    /// protocols that still go through the search plumbing.
    pub fn singleton(c: &Candidate) -> HyperGrid {
        HyperGrid {
            lr: vec![c.lr],
            hidden_dim: vec![c.spec.hidden_dim],
            readout: vec![c.spec.readout],
            keep_fraction: vec![c.keep_fraction],
            dropout: vec![c.spec.dropout],
            weight_decay: vec![c.weight_decay],
            heads: vec![c.spec.heads],
            blocks: vec![c.spec.blocks],
            embedding_dim: vec![c.spec.embedding_dim],
            normalizer: vec![c.spec.row_normalizer],
            svm_c: vec![c.spec.svm_c],
            svm_gamma: vec![c.spec.svm_gamma],
        }
    }

    /// Every combination of the axes that apply to `family`, enumerated
    /// with axes in lexicographic name order (outermost first) and
    /// values in declared order. This enumeration order defines the
    /// tie-break in model selection.
    pub fn candidates(&self, family: Family) -> Result<Vec<Candidate>> {
        type Setter<'g> = Box<dyn Fn(&mut Candidate, usize) + 'g>;
        let mut axes: Vec<(&'static str, usize, Setter<'_>)> = Vec::new();

        if family.is_gradient_trained() {
            axes.push(("dropout", self.dropout.len(), Box::new(|c, i| c.spec.dropout = self.dropout[i])));
            axes.push((
                "hidden_dim",
                self.hidden_dim.len(),
                Box::new(|c, i| c.spec.hidden_dim = self.hidden_dim[i]),
            ));
            axes.push(("lr", self.lr.len(), Box::new(|c, i| c.lr = self.lr[i])));
            axes.push((
                "weight_decay",
                self.weight_decay.len(),
                Box::new(|c, i| c.weight_decay = self.weight_decay[i]),
            ));
        }
        if family.is_graph() {
            axes.push(("readout", self.readout.len(), Box::new(|c, i| c.spec.readout = self.readout[i])));
        }
        let keep_axis: (&'static str, usize, Setter<'_>) = (
            "keep_fraction",
            self.keep_fraction.len(),
            Box::new(|c, i| c.keep_fraction = self.keep_fraction[i]),
        );
        match family {
            Family::Gcn | Family::Gin => {
                axes.push(keep_axis);
            }
            Family::Gat => {
                axes.push(keep_axis);
                axes.push(("heads", self.heads.len(), Box::new(|c, i| c.spec.heads = self.heads[i])));
            }
            Family::Stgcn => {
                axes.push(keep_axis);
                axes.push(("blocks", self.blocks.len(), Box::new(|c, i| c.spec.blocks = self.blocks[i])));
            }
            Family::Astgcn => {
                axes.push(("blocks", self.blocks.len(), Box::new(|c, i| c.spec.blocks = self.blocks[i])));
                axes.push((
                    "embedding_dim",
                    self.embedding_dim.len(),
                    Box::new(|c, i| c.spec.embedding_dim = self.embedding_dim[i]),
                ));
                axes.push((
                    "normalizer",
                    self.normalizer.len(),
                    Box::new(|c, i| c.spec.row_normalizer = self.normalizer[i]),
                ));
            }
            Family::SvmRbf => {
                axes.push(("svm_c", self.svm_c.len(), Box::new(|c, i| c.spec.svm_c = self.svm_c[i])));
                axes.push((
                    "svm_gamma",
                    self.svm_gamma.len(),
                    Box::new(|c, i| c.spec.svm_gamma = self.svm_gamma[i]),
                ));
            }
            Family::Mlp | Family::Cnn1d => {}
        }

        if let Some((name, _, _)) = axes.iter().find(|(_, len, _)| *len == 0) {
            return Err(Error::Config(format!("empty grid axis {name} for {}", family.as_str())));
        }
        axes.sort_by_key(|(name, _, _)| *name);

        let total: usize = axes.iter().map(|(_, len, _)| *len).product();
        let mut out = Vec::with_capacity(total);
        for combo in 0..total {
            let mut candidate = Candidate::new(family);
            let mut rest = combo;
            for (_, len, set) in axes.iter().rev() {
                set(&mut candidate, rest % len);
                rest /= len;
            }
            candidate.validate()?;
            out.push(candidate);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> HyperGrid {
        HyperGrid {
            lr: vec![1e-2, 1e-3],
            hidden_dim: vec![8],
            readout: vec![Readout::Mean],
            keep_fraction: vec![0.5, 0.25],
            dropout: vec![0.0, 0.3],
            weight_decay: vec![0.0],
            heads: vec![1, 2],
            blocks: vec![1],
            embedding_dim: vec![4],
            normalizer: vec![RowNormalizer::Softmax, RowNormalizer::Sparsemax],
            svm_c: vec![1.0, 10.0],
            svm_gamma: vec![0.5],
        }
    }

    #[test]
    fn axis_counts_multiply() {
        let g = tiny();
        assert_eq!(g.candidates(Family::Gcn).unwrap().len(), 2 * 2 * 2); // dropout x keep x lr
        assert_eq!(g.candidates(Family::Gat).unwrap().len(), 2 * 2 * 2 * 2);
        assert_eq!(g.candidates(Family::Astgcn).unwrap().len(), 2 * 2 * 2);
        assert_eq!(g.candidates(Family::Mlp).unwrap().len(), 2 * 2);
        assert_eq!(g.candidates(Family::SvmRbf).unwrap().len(), 2);
    }

    #[test]
    fn lexicographic_axis_order() {
        // "dropout" < "keep_fraction" < "lr": dropout varies slowest,
        // lr fastest
        let c = tiny().candidates(Family::Gcn).unwrap();
        assert_eq!(
            c.iter().map(|x| x.spec.dropout).collect::<Vec<_>>(),
            [0.0, 0.0, 0.0, 0.0, 0.3, 0.3, 0.3, 0.3]
        );
        assert_eq!(
            c.iter().map(|x| x.keep_fraction).collect::<Vec<_>>(),
            [0.5, 0.5, 0.25, 0.25, 0.5, 0.5, 0.25, 0.25]
        );
        assert_eq!(
            c.iter().map(|x| x.lr).collect::<Vec<_>>(),
            [1e-2, 1e-3, 1e-2, 1e-3, 1e-2, 1e-3, 1e-2, 1e-3]
        );
    }

    #[test]
    fn singleton_grid_returns_one_candidate() {
        let mut base = Candidate::new(Family::Gat);
        base.spec.heads = 2;
        base.lr = 5e-3;
        base.keep_fraction = 0.7;
        let got = HyperGrid::singleton(&base).candidates(Family::Gat).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0], base);
    }

    #[test]
    fn svm_grid_ignores_gradient_axes() {
        let c = tiny().candidates(Family::SvmRbf).unwrap();
        assert!(c.iter().all(|x| x.lr == Candidate::new(Family::SvmRbf).lr));
        assert_eq!(c.iter().map(|x| x.spec.svm_c).collect::<Vec<_>>(), [1.0, 10.0]);
    }

    #[test]
    fn empty_axis_rejected() {
        let mut g = tiny();
        g.lr.clear();
        assert!(matches!(g.candidates(Family::Gcn), Err(Error::Config(_))));
        // an axis unused by the family does not block enumeration
        assert!(g.candidates(Family::SvmRbf).is_ok());
    }

    #[test]
    fn default_grid_gamma_includes_reciprocal_dim() {
        let g = HyperGrid::default_grid(1225);
        assert_eq!(g.svm_gamma[0], 1.0 / 1225.0);
        assert_eq!(g.candidates(Family::SvmRbf).unwrap().len(), 12);
    }
}
