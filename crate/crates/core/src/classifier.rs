//! Multinomial logistic regression on extracted features, used to score
//! representation quality.

use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, exp_bounded, Matrix, RandomStream, Vector, EXP_BOUND};

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierConfig {
    pub classes: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Rescale each feature to zero mean and unit variance using training
    /// statistics before fitting.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            classes: 10,
            epochs: 60,
            learning_rate: 0.1,
            batch_size: 20,
            standardize: true,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "classes must be at least 2, got {}",
                self.classes
            )));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "classifier learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "classifier batch_size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxClassifier {
    /// classes × feature dim
    weights: Matrix,
    biases: Vector,
    /// Applied as `(x − shift) · scale` before scoring.
    shift: Vector,
    scale: Vector,
}

/// Gradient of the mean cross-entropy with respect to weights and biases.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierGradients {
    pub d_weights: Matrix,
    pub d_biases: Vector,
}

impl SoftmaxClassifier {
    /// Zero parameters, identity input transform.
    pub fn zeros(classes: usize, dim: usize) -> Result<Self> {
        Ok(SoftmaxClassifier {
            weights: Matrix::zeros(classes, dim)?,
            biases: Vector::zeros(classes),
            shift: Vector::zeros(dim),
            scale: Vector::from(vec![1.0; dim]),
        })
    }

    pub fn from_parts(weights: Matrix, biases: Vector) -> Result<Self> {
        if biases.len() != weights.rows() {
            return Err(Error::dim(
                "SoftmaxClassifier biases",
                weights.rows(),
                biases.len(),
            ));
        }
        let dim = weights.cols();
        Ok(SoftmaxClassifier {
            weights,
            biases,
            shift: Vector::zeros(dim),
            scale: Vector::from(vec![1.0; dim]),
        })
    }

    pub fn classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn biases(&self) -> &Vector {
        &self.biases
    }

    fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::dim("classifier input", self.dim(), x.len()));
        }
        Ok(x.iter()
            .zip(self.shift.iter())
            .zip(self.scale.iter())
            .map(|((v, m), s)| (v - m) * s)
            .collect())
    }

    fn scores_of(&self, z: &[f64]) -> Vec<f64> {
        self.weights
            .row_iter()
            .zip(self.biases.iter())
            .map(|(row, b)| dot(row, z) + b)
            .collect()
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vector> {
        Ok(Vector::from(self.scores_of(&self.transform(x)?)))
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vector> {
        Ok(Vector::from(softmax(&self.scores_of(&self.transform(x)?))))
    }

    /// Highest-scoring class, ties to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores_of(&self.transform(x)?)))
    }

    /// Fraction of samples misclassified.
    pub fn error_rate(&self, features: &[Vector], labels: &[u8]) -> Result<f64> {
        check_inputs(features, labels, self.classes())?;
        let mut wrong = 0usize;
        for (x, &y) in features.iter().zip(labels) {
            if self.predict(x)? != y as usize {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / features.len() as f64)
    }

    /// Mean cross-entropy over the samples.
    pub fn cross_entropy(&self, features: &[Vector], labels: &[u8]) -> Result<f64> {
        check_inputs(features, labels, self.classes())?;
        let mut sum = 0.0;
        for (x, &y) in features.iter().zip(labels) {
            let s = self.scores_of(&self.transform(x)?);
            sum += log_sum_exp(&s) - s[y as usize];
        }
        Ok(sum / features.len() as f64)
    }

    pub fn gradient<S: AsRef<[f64]>>(
        &self,
        features: &[S],
        labels: &[u8],
    ) -> Result<ClassifierGradients> {
        if features.is_empty() {
            return Err(Error::EmptyInput("classifier batch"));
        }
        if features.len() != labels.len() {
            return Err(Error::dim(
                "classifier labels",
                features.len(),
                labels.len(),
            ));
        }
        let mut g = ClassifierGradients {
            d_weights: Matrix::zeros(self.classes(), self.dim())?,
            d_biases: Vector::zeros(self.classes()),
        };
        let inv_n = 1.0 / features.len() as f64;
        for (x, &y) in features.iter().zip(labels) {
            let y = y as usize;
            if y >= self.classes() {
                return Err(Error::LabelOutOfRange {
                    label: y,
                    classes: self.classes(),
                });
            }
            let z = self.transform(x.as_ref())?;
            let mut p = softmax(&self.scores_of(&z));
            p[y] -= 1.0;
            for (c, &pc) in p.iter().enumerate() {
                axpy(pc * inv_n, &z, g.d_weights.row_mut(c));
                g.d_biases[c] += pc * inv_n;
            }
        }
        Ok(g)
    }

    fn step(&mut self, g: &ClassifierGradients, learning_rate: f64) {
        axpy(
            -learning_rate,
            g.d_weights.as_slice(),
            self.weights.as_mut_slice(),
        );
        axpy(-learning_rate, &g.d_biases, &mut self.biases);
    }
}

/// Fits by mini-batch gradient descent on mean cross-entropy from zero
/// parameters. Epoch `e` visits samples in the order drawn from
/// `RandomStream::new(cfg.seed).fork_indexed("epoch", e)`; the last batch of
/// an epoch may be short.
pub fn train_classifier(
    features: &[Vector],
    labels: &[u8],
    cfg: &ClassifierConfig,
) -> Result<SoftmaxClassifier> {
    cfg.validate()?;
    check_inputs(features, labels, cfg.classes)?;
    let dim = features[0].len();
    if let Some(x) = features.iter().find(|x| x.len() != dim) {
        return Err(Error::dim("classifier features", dim, x.len()));
    }
    let mut clf = SoftmaxClassifier::zeros(cfg.classes, dim)?;
    if cfg.standardize {
        let (shift, scale) = standardizer(features, dim);
        clf.shift = shift;
        clf.scale = scale;
    }
    let root = RandomStream::new(cfg.seed);
    let mut order: Vec<usize> = (0..features.len()).collect();
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        root.fork_indexed("epoch", epoch as u64).shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<&Vector> = chunk.iter().map(|&i| &features[i]).collect();
            let ys: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            let g = clf.gradient(&xs, &ys)?;
            clf.step(&g, cfg.learning_rate);
        }
    }
    Ok(clf)
}

fn standardizer(features: &[Vector], dim: usize) -> (Vector, Vector) {
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in features {
        axpy(1.0 / n, x, &mut mean);
    }
    let mut var = vec![0.0; dim];
    for x in features {
        for ((v, xi), m) in var.iter_mut().zip(x.iter()).zip(&mean) {
            *v += (xi - m) * (xi - m) / n;
        }
    }
    // constant features are centered but not scaled
    let scale: Vector = var
        .iter()
        .map(|&v| if v > 1e-24 { 1.0 / v.sqrt() } else { 1.0 })
        .collect();
    (Vector::from(mean), scale)
}

fn check_inputs(features: &[Vector], labels: &[u8], classes: usize) -> Result<()> {
    if features.is_empty() {
        return Err(Error::EmptyInput("classifier features"));
    }
    if features.len() != labels.len() {
        return Err(Error::dim(
            "classifier labels",
            features.len(),
            labels.len(),
        ));
    }
    if let Some(&y) = labels.iter().find(|&&y| y as usize >= classes) {
        return Err(Error::LabelOutOfRange {
            label: y as usize,
            classes,
        });
    }
    Ok(())
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores
        .iter()
        .map(|s| exp_bounded((s - max).max(-EXP_BOUND)))
        .collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores
        .iter()
        .map(|s| exp_bounded((s - max).max(-EXP_BOUND)))
        .sum::<f64>()
        .ln()
}

/// Index of the largest value, ties to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_blobs;
    use proptest::prelude::*;

    fn two_blobs() -> (Vec<Vector>, Vec<u8>) {
        let mut rng = RandomStream::new(4);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..80 {
            let c = (i % 2) as u8;
            let (cx, cy) = if c == 0 { (-2.0, -1.0) } else { (2.0, 1.5) };
            xs.push(Vector::from(vec![
                cx + rng.uniform_in(-0.5, 0.5),
                cy + rng.uniform_in(-0.5, 0.5),
            ]));
            ys.push(c);
        }
        (xs, ys)
    }

    fn cfg2() -> ClassifierConfig {
        ClassifierConfig {
            classes: 2,
            epochs: 50,
            learning_rate: 0.5,
            batch_size: 8,
            standardize: false,
            seed: 1,
        }
    }

    #[test]
    fn separable_blobs_are_learned() {
        let (xs, ys) = two_blobs();
        for standardize in [false, true] {
            let clf = train_classifier(
                &xs,
                &ys,
                &ClassifierConfig {
                    standardize,
                    ..cfg2()
                },
            )
            .unwrap();
            assert_eq!(clf.error_rate(&xs, &ys).unwrap(), 0.0);
            for (x, &y) in xs.iter().zip(&ys) {
                assert_eq!(clf.predict(x).unwrap(), y as usize);
            }
        }
    }

    #[test]
    fn clustered_ten_class_data() {
        let data = synthetic_blobs(16, 10, 400, 0.05, &mut RandomStream::new(9)).unwrap();
        let clf = train_classifier(
            data.base.samples(),
            &data.labels,
            &ClassifierConfig::default(),
        )
        .unwrap();
        assert_eq!(
            clf.error_rate(data.base.samples(), &data.labels).unwrap(),
            0.0
        );
    }

    #[test]
    fn zero_epochs_gives_uniform_predictions() {
        let (xs, ys) = two_blobs();
        let clf = train_classifier(
            &xs,
            &ys,
            &ClassifierConfig {
                epochs: 0,
                ..cfg2()
            },
        )
        .unwrap();
        assert_eq!(clf, SoftmaxClassifier::zeros(2, 2).unwrap());
        assert_eq!(clf.probabilities(&xs[0]).unwrap().as_ref(), &[0.5, 0.5]);
        assert_eq!(clf.predict(&xs[1]).unwrap(), 0);
    }

    #[test]
    fn same_seed_same_parameters() {
        let (xs, ys) = two_blobs();
        let a = train_classifier(&xs, &ys, &cfg2()).unwrap();
        let b = train_classifier(&xs, &ys, &cfg2()).unwrap();
        assert_eq!(a, b);
        let c = train_classifier(&xs, &ys, &ClassifierConfig { seed: 2, ..cfg2() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn argmax_ties_and_shift() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0; 4]), 0);
        let s = [0.3, -1.0, 2.5, 2.4];
        let shifted: Vec<f64> = s.iter().map(|v| v + 17.0).collect();
        assert_eq!(argmax(&s), argmax(&shifted));
    }

    #[test]
    fn error_rate_counts() {
        // class 1 iff x > 0
        let clf = SoftmaxClassifier::from_parts(
            Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
            Vector::zeros(2),
        )
        .unwrap();
        let xs: Vec<Vector> = [1.0, 2.0, -1.0, -2.0]
            .iter()
            .map(|&v| Vector::from(vec![v]))
            .collect();
        assert_eq!(clf.error_rate(&xs, &[1, 1, 0, 0]).unwrap(), 0.0);
        assert_eq!(clf.error_rate(&xs, &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(clf.error_rate(&xs, &[1, 0, 1, 0]).unwrap(), 0.5);
        assert!(clf.error_rate(&xs, &[1, 1]).is_err());
        assert!(clf.error_rate(&[], &[]).is_err());
        assert!(clf.error_rate(&xs, &[1, 1, 0, 2]).is_err());
        assert!(clf.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn training_rejects_bad_input() {
        let (xs, mut ys) = two_blobs();
        assert!(train_classifier(&[], &[], &cfg2()).is_err());
        assert!(train_classifier(&xs, &ys[..3], &cfg2()).is_err());
        ys[0] = 2;
        assert!(matches!(
            train_classifier(&xs, &ys, &cfg2()),
            Err(Error::LabelOutOfRange {
                label: 2,
                classes: 2
            })
        ));
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 0.0, -1000.0]);
        assert_eq!(p[0], 1.0);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    fn random_classifier(classes: usize, dim: usize, seed: u64) -> SoftmaxClassifier {
        let mut rng = RandomStream::new(seed);
        let w: Vec<f64> = (0..classes * dim)
            .map(|_| rng.uniform_in(-1.0, 1.0))
            .collect();
        let b: Vec<f64> = (0..classes).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        SoftmaxClassifier::from_parts(Matrix::new(classes, dim, w).unwrap(), Vector::from(b))
            .unwrap()
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(seed in any::<u64>(), dim in 1usize..6, classes in 2usize..8) {
            let clf = random_classifier(classes, dim, seed);
            let mut rng = RandomStream::new(seed ^ 1);
            let x: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-5.0, 5.0)).collect();
            let p = clf.probabilities(&x).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn gradient_matches_finite_differences(seed in any::<u64>(), dim in 1usize..5, classes in 2usize..5, n in 1usize..5) {
            let clf = random_classifier(classes, dim, seed);
            let mut rng = RandomStream::new(seed ^ 2);
            let xs: Vec<Vector> = (0..n).map(|_| (0..dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).collect();
            let ys: Vec<u8> = (0..n).map(|_| rng.below(classes) as u8).collect();
            let g = clf.gradient(&xs, &ys).unwrap();
            let eps = 1e-5;
            let analytic: Vec<f64> = g.d_weights.as_slice().iter().chain(g.d_biases.iter()).copied().collect();
            for (k, &a) in analytic.iter().enumerate() {
                let bump = |delta: f64| {
                    let mut c = clf.clone();
                    if k < classes * dim {
                        c.weights.as_mut_slice()[k] += delta;
                    } else {
                        c.biases[k - classes * dim] += delta;
                    }
                    c.cross_entropy(&xs, &ys).unwrap()
                };
                let numeric = (bump(eps) - bump(-eps)) / (2.0 * eps);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
                prop_assert!(rel < 1e-6, "component {} analytic {} numeric {}", k, a, numeric);
            }
        }

        #[test]
        fn error_rate_is_permutation_invariant(seed in any::<u64>()) {
            let clf = random_classifier(3, 2, seed);
            let mut rng = RandomStream::new(seed ^ 3);
            let xs: Vec<Vector> = (0..30).map(|_| Vector::from(vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)])).collect();
            let ys: Vec<u8> = (0..30).map(|_| rng.below(3) as u8).collect();
            let mut perm: Vec<usize> = (0..30).collect();
            rng.shuffle(&mut perm);
            let pxs: Vec<Vector> = perm.iter().map(|&i| xs[i].clone()).collect();
            let pys: Vec<u8> = perm.iter().map(|&i| ys[i]).collect();
            prop_assert_eq!(clf.error_rate(&xs, &ys).unwrap(), clf.error_rate(&pxs, &pys).unwrap());
        }
    }
}
