use rand::seq::SliceRandom;

use super::{classify, ImportanceMethod, ImportanceReport, Predictor};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::{par, seed};

/// Mean drop in test accuracy when each feature column is shuffled.
///
/// Column `j` in repeat `r` is permuted with an RNG stream derived from
/// `(seed, j, r)`. Rows are rebuilt in a private buffer, so `test` is never
/// modified.
pub fn permutation_importance<P: Predictor + ?Sized>(
    model: &P,
    test: &LabeledDataset,
    seed: u64,
    repeats: usize,
) -> Result<ImportanceReport> {
    if repeats == 0 {
        return Err(Error::validation("repeats must be positive"));
    }
    let x = &test.x;
    let n = x.n_rows();
    let baseline = model.predict_class(x)?;
    let base_correct = baseline.iter().zip(&test.y).filter(|(p, y)| p == y).count();
    let base_acc = base_correct as f64 / n as f64;

    let scores = par::map_range(x.n_cols(), |j| {
        let mut buf = vec![0.0; x.n_cols()];
        let mut perm: Vec<usize> = (0..n).collect();
        let mut total = 0.0;
        for r in 0..repeats {
            perm.iter_mut().enumerate().for_each(|(i, p)| *p = i);
            let mut rng = seed::rng(seed, &[j as u64, r as u64]);
            perm.shuffle(&mut rng);
            let mut correct = 0usize;
            for i in 0..n {
                buf.copy_from_slice(x.row(i));
                buf[j] = x.value(perm[i], j);
                if classify(model.predict_row(&buf)) == test.y[i] {
                    correct += 1;
                }
            }
            total += base_acc - correct as f64 / n as f64;
        }
        total / repeats as f64
    });

    let mut report = ImportanceReport::new(ImportanceMethod::Permutation, test.feature_names(), scores)?;
    report.seed = Some(seed);
    report.repeats = Some(repeats);
    Ok(report)
}
