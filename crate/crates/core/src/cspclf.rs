//! Evaluation back end: Common Spatial Patterns feature extraction and a
//! closed-form linear discriminant classifier.
//!
//! CSP solves the generalized symmetric eigenproblem C1 w = lambda (C1+C2) w
//! by whitening: eigendecompose the composite covariance, map into the
//! whitened space, eigendecompose the whitened class-1 covariance there, and
//! pull the eigenvectors back as sensor-space filter rows.

use ndarray::{Array1, Array2, Axis};
use thiserror::Error;

use crate::linalg::{solve, sym_eigen};
use crate::par;
use crate::trialio::{ClassLabel, Trial, TrialSet};

#[derive(Debug, Error)]
pub enum CspError {
    #[error("no trials labeled {0}")]
    NoTrialsForLabel(ClassLabel),
    #[error("trial {0} is unlabeled")]
    UnlabeledTrial(String),
    #[error("composite covariance stayed singular after shrinkage up to 1e-2")]
    SingularComposite,
    #[error("cannot extract {k} filter pairs from {n_c} channels")]
    TooManyPairs { k: usize, n_c: usize },
    #[error("zero variance in spatially filtered trial {0}")]
    ZeroVariance(String),
    #[error("degenerate LDA fit: {0}")]
    DegenerateFit(String),
}

/// Spatial filters: `w` has `2k` rows (top-k then bottom-k generalized
/// eigenvectors); `eigenvalues` is the full descending whitened spectrum.
#[derive(Debug, Clone)]
pub struct CspModel {
    pub w: Array2<f64>,
    pub k: usize,
    pub class_order: (ClassLabel, ClassLabel),
    pub eigenvalues: Array1<f64>,
}

/// Linear discriminant in CSP feature space; predicts `class_order.0` when
/// `w . f + b >= 0` (ties go to the first class).
#[derive(Debug, Clone)]
pub struct LdaModel {
    pub w: Array1<f64>,
    pub b: f64,
    pub class_order: (ClassLabel, ClassLabel),
}

fn centered(data: &Array2<f64>) -> Array2<f64> {
    let means = data.mean_axis(Axis(1)).expect("nonempty trial");
    let mut out = data.clone();
    for (mut row, &m) in out.rows_mut().into_iter().zip(means.iter()) {
        row.mapv_inplace(|v| v - m);
    }
    out
}

/// Mean over same-label trials of the trace-normalized scatter
/// `X X^T / tr(X X^T)` after per-trial channel-mean removal.
pub fn class_covariance(set: &TrialSet, label: ClassLabel) -> Result<Array2<f64>, CspError> {
    let n_c = set.n_channels();
    let mut acc = Array2::<f64>::zeros((n_c, n_c));
    let mut count = 0usize;
    for trial in set.trials().iter().filter(|t| t.label == Some(label)) {
        let x = centered(&trial.data);
        let scatter = x.dot(&x.t());
        let trace: f64 = (0..n_c).map(|i| scatter[[i, i]]).sum();
        if trace <= 0.0 {
            return Err(CspError::ZeroVariance(trial.trial_id.clone()));
        }
        acc += &(&scatter / trace);
        count += 1;
    }
    if count == 0 {
        return Err(CspError::NoTrialsForLabel(label));
    }
    acc /= count as f64;
    Ok(acc)
}

const SHRINKAGE_STEPS: [f64; 5] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2];
const MAX_CONDITION: f64 = 1e10;

/// Whitening transform of a symmetric PSD matrix, with escalating shrinkage
/// toward `(tr/n) I` when the condition number exceeds 1e10.
fn whitener(composite: &Array2<f64>) -> Result<Array2<f64>, CspError> {
    let n = composite.nrows();
    let trace: f64 = (0..n).map(|i| composite[[i, i]]).sum();
    let mut attempt = composite.clone();
    let mut shrink_iter = SHRINKAGE_STEPS.iter();
    loop {
        let eig = sym_eigen(&attempt);
        let max = eig.values[0];
        let min = eig.values[n - 1];
        if min > 0.0 && max / min <= MAX_CONDITION {
            // P = diag(values^-1/2) U^T
            let mut p = eig.vectors.t().to_owned();
            for (mut row, &v) in p.rows_mut().into_iter().zip(eig.values.iter()) {
                let s = 1.0 / v.sqrt();
                row.mapv_inplace(|x| x * s);
            }
            return Ok(p);
        }
        match shrink_iter.next() {
            Some(&w) => {
                let target = trace / n as f64;
                attempt = composite * (1.0 - w);
                for i in 0..n {
                    attempt[[i, i]] += w * target;
                }
            }
            None => return Err(CspError::SingularComposite),
        }
    }
}

fn fix_row_signs(w: &mut Array2<f64>) {
    for mut row in w.rows_mut() {
        let lead = row
            .iter()
            .cloned()
            .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
            .unwrap_or(0.0);
        if lead < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }
}

/// Fits `k` pairs of spatial filters discriminating `Left` vs `Right`.
pub fn fit_csp(train: &TrialSet, k: usize) -> Result<CspModel, CspError> {
    let n_c = train.n_channels();
    if 2 * k > n_c {
        return Err(CspError::TooManyPairs { k, n_c });
    }
    let class_order = (ClassLabel::Left, ClassLabel::Right);
    let c1 = class_covariance(train, class_order.0)?;
    let c2 = class_covariance(train, class_order.1)?;
    let composite = &c1 + &c2;

    let p = whitener(&composite)?;
    let s1 = {
        let m = p.dot(&c1).dot(&p.t());
        (&m + &m.t()) * 0.5
    };
    let eig = sym_eigen(&s1);
    let w_full = eig.vectors.t().dot(&p);

    let mut rows = Vec::with_capacity(2 * k);
    rows.extend(0..k);
    rows.extend(n_c - k..n_c);
    let mut w = Array2::<f64>::zeros((2 * k, n_c));
    for (out, &src) in rows.iter().enumerate() {
        w.row_mut(out).assign(&w_full.row(src));
    }
    fix_row_signs(&mut w);

    Ok(CspModel {
        w,
        k,
        class_order,
        eigenvalues: eig.values,
    })
}

/// Normalized log-variance features: `f_j = ln(var_j / sum var)` of the
/// spatially filtered, channel-centered trial.
pub fn csp_features(model: &CspModel, trial: &Trial) -> Result<Array1<f64>, CspError> {
    let x = centered(&trial.data);
    let z = model.w.dot(&x);
    let t_len = z.ncols() as f64;
    let mut vars = Array1::<f64>::zeros(z.nrows());
    for (j, row) in z.rows().into_iter().enumerate() {
        let mean = row.sum() / t_len;
        vars[j] = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t_len;
    }
    let total = vars.sum();
    if total <= 0.0 || vars.iter().any(|&v| v <= 0.0) {
        return Err(CspError::ZeroVariance(trial.trial_id.clone()));
    }
    Ok(vars.mapv(|v| (v / total).ln()))
}

/// Closed-form two-class LDA with equal priors:
/// `w = S_pooled^-1 (mu1 - mu2)`, `b = -w.(mu1 + mu2)/2`.
pub fn fit_lda(features: &[(Array1<f64>, ClassLabel)]) -> Result<LdaModel, CspError> {
    let class_order = (ClassLabel::Left, ClassLabel::Right);
    let dim = features
        .first()
        .ok_or(CspError::DegenerateFit("no features".into()))?
        .0
        .len();

    let mut means = [Array1::<f64>::zeros(dim), Array1::<f64>::zeros(dim)];
    let mut counts = [0usize; 2];
    for (f, label) in features {
        let c = if *label == class_order.0 { 0 } else { 1 };
        means[c] += f;
        counts[c] += 1;
    }
    for c in 0..2 {
        if counts[c] == 0 {
            let label = if c == 0 { class_order.0 } else { class_order.1 };
            return Err(CspError::NoTrialsForLabel(label));
        }
        means[c] /= counts[c] as f64;
    }

    let mut scatter = Array2::<f64>::zeros((dim, dim));
    for (f, label) in features {
        let c = if *label == class_order.0 { 0 } else { 1 };
        let d = f - &means[c];
        for i in 0..dim {
            for j in 0..dim {
                scatter[[i, j]] += d[i] * d[j];
            }
        }
    }
    let denom = (counts[0] + counts[1]).saturating_sub(2).max(1) as f64;
    let pooled = scatter / denom;

    let diff = &means[0] - &means[1];
    let trace: f64 = (0..dim).map(|i| pooled[[i, i]]).sum();
    let mut attempt = pooled.clone();
    let mut shrink_iter = SHRINKAGE_STEPS.iter();
    let w = loop {
        if let Some(w) = solve(&attempt, &diff) {
            if w.iter().all(|v| v.is_finite()) {
                break w;
            }
        }
        match shrink_iter.next() {
            Some(&s) => {
                let target = (trace / dim as f64).max(1e-12);
                attempt = &pooled * (1.0 - s);
                for i in 0..dim {
                    attempt[[i, i]] += s * target;
                }
            }
            None => {
                return Err(CspError::DegenerateFit(
                    "pooled covariance singular after shrinkage".into(),
                ))
            }
        }
    };
    if w.iter().all(|&v| v == 0.0) {
        return Err(CspError::DegenerateFit("identical class means".into()));
    }
    let b = -0.5 * w.dot(&(&means[0] + &means[1]));
    Ok(LdaModel { w, b, class_order })
}

impl LdaModel {
    pub fn predict(&self, features: &Array1<f64>) -> ClassLabel {
        if self.w.dot(features) + self.b >= 0.0 {
            self.class_order.0
        } else {
            self.class_order.1
        }
    }
}

/// Test-set performance of CSP+LDA fitted on `train`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRecord {
    pub accuracy: f64,
    pub accuracy_left: f64,
    pub accuracy_right: f64,
    /// confusion[actual][predicted] with index 0 = Left, 1 = Right.
    pub confusion: [[usize; 2]; 2],
    pub n_test: usize,
}

fn labeled_features(
    model: &CspModel,
    set: &TrialSet,
) -> Result<Vec<(Array1<f64>, ClassLabel)>, CspError> {
    let rows = par::map_collect(set.trials(), |trial| -> Result<_, CspError> {
        let label = trial
            .label
            .ok_or_else(|| CspError::UnlabeledTrial(trial.trial_id.clone()))?;
        Ok((csp_features(model, trial)?, label))
    });
    rows.into_iter().collect()
}

/// Fits CSP (+LDA) on `train` and scores `test`.
pub fn evaluate(train: &TrialSet, test: &TrialSet, k: usize) -> Result<AccuracyRecord, CspError> {
    let csp = fit_csp(train, k)?;
    let train_features = labeled_features(&csp, train)?;
    let lda = fit_lda(&train_features)?;
    let test_features = labeled_features(&csp, test)?;

    let mut confusion = [[0usize; 2]; 2];
    for (f, label) in &test_features {
        let actual = if *label == ClassLabel::Left { 0 } else { 1 };
        let predicted = if lda.predict(f) == ClassLabel::Left { 0 } else { 1 };
        confusion[actual][predicted] += 1;
    }
    let n_test = test_features.len();
    let correct = confusion[0][0] + confusion[1][1];
    let left_total = confusion[0][0] + confusion[0][1];
    let right_total = confusion[1][0] + confusion[1][1];
    Ok(AccuracyRecord {
        accuracy: correct as f64 / n_test as f64,
        accuracy_left: if left_total > 0 {
            confusion[0][0] as f64 / left_total as f64
        } else {
            f64::NAN
        },
        accuracy_right: if right_total > 0 {
            confusion[1][1] as f64 / right_total as f64
        } else {
            f64::NAN
        },
        confusion,
        n_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trialio::{generate_synthetic, Session, SynthSpec};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn trial(id: &str, label: ClassLabel, data: Array2<f64>) -> Trial {
        Trial {
            data,
            sample_rate_hz: 250.0,
            label: Some(label),
            subject_id: "s".into(),
            trial_id: id.into(),
            session: Session::Train,
        }
    }

    fn gaussian_trial(
        id: &str,
        label: ClassLabel,
        n_c: usize,
        t_len: usize,
        scale_per_channel: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Trial {
        let data = Array2::from_shape_fn((n_c, t_len), |(i, _)| {
            scale_per_channel[i] * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        trial(id, label, data)
    }

    #[test]
    fn covariance_of_whitened_data_is_scaled_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = gaussian_trial("a", ClassLabel::Left, 3, 20000, &[1.0, 1.0, 1.0], &mut rng);
        let set = TrialSet::new(vec![t]).unwrap();
        let c = class_covariance(&set, ClassLabel::Left).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!((c[[i, j]] - want).abs() < 0.02, "c[{i}{j}] = {}", c[[i, j]]);
            }
        }
    }

    #[test]
    fn covariance_symmetric_unit_trace() {
        let set = generate_synthetic(&SynthSpec {
            n_c: 4,
            t_len: 64,
            trials_per_class: 3,
            salient_start: 0,
            salient_len: 64,
            seed: 5,
            ..SynthSpec::default()
        })
        .unwrap();
        let c = class_covariance(&set, ClassLabel::Right).unwrap();
        let trace: f64 = (0..4).map(|i| c[[i, i]]).sum();
        assert!((trace - 1.0).abs() < 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                assert!((c[[i, j]] - c[[j, i]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn covariance_unchanged_by_duplication() {
        let set = generate_synthetic(&SynthSpec {
            n_c: 3,
            t_len: 50,
            trials_per_class: 2,
            salient_start: 0,
            salient_len: 50,
            seed: 6,
            ..SynthSpec::default()
        })
        .unwrap();
        let c1 = class_covariance(&set, ClassLabel::Left).unwrap();
        let mut doubled = set.trials().to_vec();
        for (i, t) in set.trials().iter().enumerate() {
            let mut copy = t.clone();
            copy.trial_id = format!("copy{i}");
            doubled.push(copy);
        }
        let set2 = TrialSet::new(doubled).unwrap();
        let c2 = class_covariance(&set2, ClassLabel::Left).unwrap();
        for (a, b) in c1.iter().zip(c2.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn covariance_missing_label() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = gaussian_trial("a", ClassLabel::Left, 2, 50, &[1.0, 1.0], &mut rng);
        let set = TrialSet::new(vec![t]).unwrap();
        assert!(matches!(
            class_covariance(&set, ClassLabel::Right),
            Err(CspError::NoTrialsForLabel(ClassLabel::Right))
        ));
    }

    #[test]
    fn equal_classes_give_half_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut trials: Vec<Trial> = Vec::new();
        // identical generating process for both labels
        for i in 0..8 {
            let label = if i % 2 == 0 { ClassLabel::Left } else { ClassLabel::Right };
            let mut t = gaussian_trial(&format!("t{i}"), label, 3, 4000, &[1.0, 2.0, 0.5], &mut rng);
            // use literally the same data for a left/right pair
            if i % 2 == 1 {
                t.data = trials[i - 1].data.clone();
            }
            trials.push(t);
        }
        let set = TrialSet::new(trials).unwrap();
        let model = fit_csp(&set, 1).unwrap();
        for v in model.eigenvalues.iter() {
            assert!((v - 0.5).abs() < 1e-10, "eigenvalue {v}");
        }
    }

    #[test]
    fn axis_aligned_two_channel_case() {
        // class 1 variance on channel 0, class 2 on channel 1.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut trials = Vec::new();
        for i in 0..20 {
            trials.push(gaussian_trial(
                &format!("l{i}"),
                ClassLabel::Left,
                2,
                2000,
                &[3.0, 0.3],
                &mut rng,
            ));
            trials.push(gaussian_trial(
                &format!("r{i}"),
                ClassLabel::Right,
                2,
                2000,
                &[0.3, 3.0],
                &mut rng,
            ));
        }
        let set = TrialSet::new(trials).unwrap();
        let model = fit_csp(&set, 1).unwrap();
        // top filter ~ e0 direction, bottom ~ e1, up to scale
        let top = model.w.row(0);
        let bottom = model.w.row(1);
        assert!(top[0].abs() > 20.0 * top[1].abs(), "top filter {top}");
        assert!(bottom[1].abs() > 20.0 * bottom[0].abs(), "bottom filter {bottom}");
    }

    #[test]
    fn swapped_roles_pair_to_one() {
        let set = generate_synthetic(&SynthSpec {
            n_c: 4,
            t_len: 200,
            trials_per_class: 10,
            salient_start: 0,
            salient_len: 200,
            seed: 7,
            ..SynthSpec::default()
        })
        .unwrap();
        let model = fit_csp(&set, 2).unwrap();
        let flipped = TrialSet::new(
            set.trials()
                .iter()
                .map(|t| {
                    let mut c = t.clone();
                    c.label = Some(match t.label.unwrap() {
                        ClassLabel::Left => ClassLabel::Right,
                        ClassLabel::Right => ClassLabel::Left,
                    });
                    c
                })
                .collect(),
        )
        .unwrap();
        let swapped = fit_csp(&flipped, 2).unwrap();
        let n = model.eigenvalues.len();
        for i in 0..n {
            let paired = model.eigenvalues[i] + swapped.eigenvalues[n - 1 - i];
            assert!((paired - 1.0).abs() < 1e-10, "pair sum {paired}");
        }
    }

    #[test]
    fn filters_diagonalize_both_covariances() {
        let set = generate_synthetic(&SynthSpec {
            n_c: 4,
            t_len: 256,
            trials_per_class: 12,
            salient_start: 0,
            salient_len: 256,
            seed: 8,
            ..SynthSpec::default()
        })
        .unwrap();
        let c1 = class_covariance(&set, ClassLabel::Left).unwrap();
        let c2 = class_covariance(&set, ClassLabel::Right).unwrap();
        let model = fit_csp(&set, 2).unwrap();
        let d1 = model.w.dot(&c1).dot(&model.w.t());
        let d2 = model.w.dot(&c2).dot(&model.w.t());
        for (name, d) in [("c1", &d1), ("c2", &d2)] {
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        assert!(
                            d[[i, j]].abs() < 1e-8,
                            "{name} off-diagonal [{i},{j}] = {}",
                            d[[i, j]]
                        );
                    }
                }
            }
        }
        // and the two diagonals pair to 1 in the whitened metric
        for i in 0..4 {
            assert!((d1[[i, i]] + d2[[i, i]] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn too_many_pairs_rejected() {
        let set = generate_synthetic(&SynthSpec {
            n_c: 5,
            t_len: 64,
            trials_per_class: 4,
            salient_start: 0,
            salient_len: 64,
            seed: 9,
            ..SynthSpec::default()
        })
        .unwrap();
        assert!(matches!(
            fit_csp(&set, 3),
            Err(CspError::TooManyPairs { k: 3, n_c: 5 })
        ));
    }

    #[test]
    fn features_scale_and_offset_invariant() {
        let set = generate_synthetic(&SynthSpec {
            n_c: 4,
            t_len: 128,
            trials_per_class: 8,
            salient_start: 0,
            salient_len: 128,
            seed: 10,
            ..SynthSpec::default()
        })
        .unwrap();
        let model = fit_csp(&set, 2).unwrap();
        let t = &set.trials()[0];
        let f0 = csp_features(&model, t).unwrap();
        let scaled = t.with_data(&t.data * 7.3);
        let f1 = csp_features(&model, &scaled).unwrap();
        let mut shifted_data = t.data.clone();
        for (c, mut row) in shifted_data.rows_mut().into_iter().enumerate() {
            row.mapv_inplace(|v| v + 10.0 * (c as f64 + 1.0));
        }
        let f2 = csp_features(&model, &t.with_data(shifted_data)).unwrap();
        for i in 0..f0.len() {
            assert!((f0[i] - f1[i]).abs() < 1e-10);
            assert!((f0[i] - f2[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn features_hand_case() {
        // Identity filters, channel variances 3 and 1 -> (ln .75, ln .25).
        let model = CspModel {
            w: Array2::eye(2),
            k: 1,
            class_order: (ClassLabel::Left, ClassLabel::Right),
            eigenvalues: Array1::zeros(2),
        };
        let t_len = 10000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = gaussian_trial("h", ClassLabel::Left, 2, t_len, &[3f64.sqrt(), 1.0], &mut rng);
        let f = csp_features(&model, &t).unwrap();
        assert!((f[0] - 0.75f64.ln()).abs() < 0.02, "f0 = {}", f[0]);
        assert!((f[1] - 0.25f64.ln()).abs() < 0.04, "f1 = {}", f[1]);
    }

    #[test]
    fn lda_one_dimensional_boundary_at_zero() {
        let features = vec![
            (Array1::from_vec(vec![1.1]), ClassLabel::Left),
            (Array1::from_vec(vec![0.9]), ClassLabel::Left),
            (Array1::from_vec(vec![-1.1]), ClassLabel::Right),
            (Array1::from_vec(vec![-0.9]), ClassLabel::Right),
        ];
        let lda = fit_lda(&features).unwrap();
        // decision value at 0 is exactly 0 -> ties to Left
        let at_zero = lda.w[0] * 0.0 + lda.b;
        assert!(at_zero.abs() < 1e-12);
        assert_eq!(lda.predict(&Array1::from_vec(vec![0.0])), ClassLabel::Left);
        assert_eq!(lda.predict(&Array1::from_vec(vec![0.5])), ClassLabel::Left);
        assert_eq!(lda.predict(&Array1::from_vec(vec![-0.5])), ClassLabel::Right);
    }

    #[test]
    fn lda_separates_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut features = Vec::new();
        for i in 0..40 {
            let label = if i % 2 == 0 { ClassLabel::Left } else { ClassLabel::Right };
            let center = if label == ClassLabel::Left { 5.0 } else { -5.0 };
            let f = Array1::from_shape_fn(3, |_| {
                center + 0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            features.push((f, label));
        }
        let lda = fit_lda(&features).unwrap();
        for (f, label) in &features {
            assert_eq!(lda.predict(f), *label);
        }
    }

    #[test]
    fn lda_swapping_labels_negates_decision() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let features: Vec<(Array1<f64>, ClassLabel)> = (0..30)
            .map(|i| {
                let label = if i % 2 == 0 { ClassLabel::Left } else { ClassLabel::Right };
                let center = if label == ClassLabel::Left { 1.0 } else { -1.0 };
                (
                    Array1::from_shape_fn(2, |_| {
                        center + rng.sample::<f64, _>(rand_distr::StandardNormal)
                    }),
                    label,
                )
            })
            .collect();
        let swapped: Vec<(Array1<f64>, ClassLabel)> = features
            .iter()
            .map(|(f, l)| {
                (
                    f.clone(),
                    match l {
                        ClassLabel::Left => ClassLabel::Right,
                        ClassLabel::Right => ClassLabel::Left,
                    },
                )
            })
            .collect();
        let a = fit_lda(&features).unwrap();
        let b = fit_lda(&swapped).unwrap();
        for i in 0..2 {
            assert!((a.w[i] + b.w[i]).abs() < 1e-9);
        }
        assert!((a.b + b.b).abs() < 1e-9);
        for (f, _) in &features {
            let da = a.w.dot(f) + a.b;
            let db = b.w.dot(f) + b.b;
            assert!((da + db).abs() < 1e-9);
        }
    }

    #[test]
    fn evaluate_resubstitution_on_separable_data() {
        let set = generate_synthetic(&SynthSpec {
            n_c: 4,
            t_len: 250,
            trials_per_class: 20,
            salient_start: 0,
            salient_len: 250,
            snr_db: 10.0,
            seed: 14,
            ..SynthSpec::default()
        })
        .unwrap();
        let record = evaluate(&set, &set, 2).unwrap();
        assert_eq!(record.accuracy, 1.0);
        assert_eq!(record.n_test, 40);
    }

    #[test]
    fn evaluate_permuted_test_labels_near_chance() {
        // Predictions are uncorrelated with shuffled test labels, so the
        // score behaves like a Binomial(n, 1/2) draw; 0.15 is a generous
        // bound at n = 80.
        let spec = SynthSpec {
            n_c: 4,
            t_len: 200,
            trials_per_class: 40,
            salient_start: 0,
            salient_len: 200,
            snr_db: 5.0,
            seed: 15,
            ..SynthSpec::default()
        };
        let train = generate_synthetic(&spec).unwrap();
        let test = generate_synthetic(&SynthSpec { seed: 16, ..spec }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut labels: Vec<ClassLabel> = test.trials().iter().map(|t| t.label.unwrap()).collect();
        labels.shuffle(&mut rng);
        let shuffled = TrialSet::new(
            test.trials()
                .iter()
                .zip(labels)
                .map(|(t, l)| {
                    let mut c = t.clone();
                    c.label = Some(l);
                    c
                })
                .collect(),
        )
        .unwrap();
        let record = evaluate(&train, &shuffled, 2).unwrap();
        assert!(
            (record.accuracy - 0.5).abs() <= 0.15,
            "accuracy {} too far from chance",
            record.accuracy
        );
    }

    #[test]
    fn three_pairs_give_six_features() {
        let set = generate_synthetic(&SynthSpec {
            n_c: 8,
            t_len: 128,
            trials_per_class: 6,
            salient_start: 0,
            salient_len: 128,
            seed: 16,
            ..SynthSpec::default()
        })
        .unwrap();
        let model = fit_csp(&set, 3).unwrap();
        let f = csp_features(&model, &set.trials()[0]).unwrap();
        assert_eq!(f.len(), 6);
    }
}
