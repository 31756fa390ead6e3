//! L2-regularized multinomial logistic regression fitted with L-BFGS.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Code;

pub const MAX_ITERATIONS: usize = 1000;
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [1e-3, 1e-2, 1e-1, 1.0, 10.0];

/// Dense row-major matrix of features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Parameter(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Parameter("ragged feature rows".into()));
        }
        Ok(FeatureMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn select(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }
}

/// A fitted model. Class `classes[0]` is the reference class with an
/// implicit zero score; each other class has `cols` weights then an
/// intercept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaClassifier {
    pub classes: Vec<Code>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
}

impl MetaClassifier {
    pub fn feature_count(&self) -> usize {
        self.mean.len()
    }

    /// Class probabilities for one raw feature vector, in `classes` order.
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::Parameter(format!(
                "model expects {} features, got {}",
                self.mean.len(),
                x.len()
            )));
        }
        let z: Vec<f64> = x
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let mut p = vec![0.0; self.classes.len()];
        scores(&self.weights, &z, &mut p);
        softmax(&mut p);
        Ok(p)
    }

    /// Most probable class (ties to the lowest code) and the probability of
    /// class 1 (0 when 1 is not a class).
    pub fn predict(&self, x: &[f64]) -> Result<(Code, f64)> {
        let p = self.probabilities(x)?;
        let mut best = 0;
        for k in 1..p.len() {
            if p[k] > p[best] {
                best = k;
            }
        }
        let positive = self.classes.iter().position(|&c| c == 1).map_or(0.0, |k| p[k]);
        Ok((self.classes[best], positive))
    }

    /// Mean negative log-likelihood of `labels`; probabilities are floored
    /// at 1e-15 so unseen classes stay finite.
    pub fn log_loss(&self, x: &FeatureMatrix, labels: &[Code]) -> Result<f64> {
        let mut total = 0.0;
        for (i, y) in labels.iter().enumerate() {
            let p = self.probabilities(x.row(i))?;
            let py = self.classes.iter().position(|c| c == y).map_or(0.0, |k| p[k]);
            total -= py.max(1e-15).ln();
        }
        Ok(total / labels.len().max(1) as f64)
    }
}

/// Writes class scores into `out` (`out[0]` is the reference class).
fn scores(w: &[f64], z: &[f64], out: &mut [f64]) {
    let d = z.len() + 1;
    out[0] = 0.0;
    for k in 1..out.len() {
        let wk = &w[(k - 1) * d..k * d];
        out[k] = wk[..z.len()].iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + wk[z.len()];
    }
}

fn softmax(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Standardized design matrix and integer-coded labels.
pub(crate) struct Objective {
    z: Vec<f64>,
    rows: usize,
    cols: usize,
    y: Vec<usize>,
    classes: usize,
    lambda: f64,
}

impl Objective {
    pub(crate) fn dim(&self) -> usize {
        (self.classes - 1) * (self.cols + 1)
    }

    /// Mean loss plus `(λ/2)‖w‖²` (intercepts unpenalized); gradient into `g`.
    pub(crate) fn eval(&self, w: &[f64], g: &mut [f64]) -> f64 {
        let d = self.cols + 1;
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut loss = 0.0;
        let mut p = vec![0.0; self.classes];
        for i in 0..self.rows {
            let z = &self.z[i * self.cols..(i + 1) * self.cols];
            scores(w, z, &mut p);
            let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + p.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
            loss += lse - p[self.y[i]];
            for k in 1..self.classes {
                let r = (p[k] - lse).exp() - f64::from(u8::from(self.y[i] == k));
                let gk = &mut g[(k - 1) * d..k * d];
                for (gj, zj) in gk[..self.cols].iter_mut().zip(z) {
                    *gj += r * zj;
                }
                gk[self.cols] += r;
            }
        }
        let n = self.rows as f64;
        loss /= n;
        g.iter_mut().for_each(|v| *v /= n);
        for k in 1..self.classes {
            let off = (k - 1) * d;
            for j in 0..self.cols {
                loss += 0.5 * self.lambda * w[off + j] * w[off + j];
                g[off + j] += self.lambda * w[off + j];
            }
        }
        loss
    }
}

struct Prepared {
    objective: Objective,
    classes: Vec<Code>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

fn prepare(x: &FeatureMatrix, labels: &[Code], lambda: f64) -> Result<Prepared> {
    if x.rows != labels.len() {
        return Err(Error::Parameter(format!(
            "{} feature rows but {} labels",
            x.rows,
            labels.len()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least two classes, got {}",
            classes.len()
        )));
    }
    let (rows, cols) = (x.rows, x.cols);
    let mut mean = vec![0.0; cols];
    for i in 0..rows {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    let mut std = vec![0.0; cols];
    for i in 0..rows {
        for ((s, v), m) in std.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut std {
        *s = (*s / rows as f64).sqrt();
        if !(*s > 1e-12) {
            *s = 1.0;
        }
    }
    let mut z = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        z.extend(
            x.row(i)
                .iter()
                .zip(mean.iter().zip(&std))
                .map(|(v, (m, s))| (v - m) / s),
        );
    }
    let y = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label in classes"))
        .collect();
    Ok(Prepared {
        objective: Objective {
            z,
            rows,
            cols,
            y,
            classes: classes.len(),
            lambda,
        },
        classes,
        mean,
        std,
    })
}

/// The objective the fit minimizes, on standardized features, and its
/// gradient. `w` holds `cols + 1` entries per non-reference class.
pub fn logistic_loss_grad(x: &FeatureMatrix, labels: &[Code], lambda: f64, w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let obj = prepare(x, labels, lambda)?.objective;
    if w.len() != obj.dim() {
        return Err(Error::Parameter(format!(
            "expected {} weights, got {}",
            obj.dim(),
            w.len()
        )));
    }
    let mut g = vec![0.0; w.len()];
    let loss = obj.eval(w, &mut g);
    Ok((loss, g))
}

/// Fits on standardized features; deterministic given its inputs.
pub fn fit_logistic_l2(x: &FeatureMatrix, labels: &[Code], lambda: f64) -> Result<MetaClassifier> {
    fit_from(x, labels, lambda, None)
}

fn fit_from(x: &FeatureMatrix, labels: &[Code], lambda: f64, init: Option<&[f64]>) -> Result<MetaClassifier> {
    let prep = prepare(x, labels, lambda)?;
    let obj = &prep.objective;
    let w0 = match init {
        Some(w) if w.len() == obj.dim() => w.to_vec(),
        _ => vec![0.0; obj.dim()],
    };
    let fit = lbfgs(|w, g| obj.eval(w, g), w0, MAX_ITERATIONS, 1e-6);
    Ok(MetaClassifier {
        classes: prep.classes,
        mean: prep.mean,
        std: prep.std,
        weights: fit.x,
        lambda,
        iterations: fit.iterations,
    })
}

/// Chooses λ by validation log-loss (ties to the smaller λ) after fitting on
/// `train`, then refits on all rows.
pub fn select_and_fit(
    x: &FeatureMatrix,
    labels: &[Code],
    train: &[usize],
    validation: &[usize],
    grid: &[f64],
) -> Result<MetaClassifier> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty lambda grid".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    if grid.len() == 1 || validation.is_empty() {
        return fit_logistic_l2(x, labels, grid[0]);
    }
    let xt = x.select(train);
    let yt: Vec<Code> = train.iter().map(|&i| labels[i]).collect();
    let xv = x.select(validation);
    let yv: Vec<Code> = validation.iter().map(|&i| labels[i]).collect();
    let mut best: Option<(f64, f64)> = None;
    let mut warm: Option<Vec<f64>> = None;
    // Largest λ first: its solution is the smoothest warm start.
    for &lambda in grid.iter().rev() {
        let m = fit_from(&xt, &yt, lambda, warm.as_deref())?;
        let loss = m.log_loss(&xv, &yv)?;
        if best.map_or(true, |(_, b)| loss <= b) {
            best = Some((lambda, loss));
        }
        warm = Some(m.weights);
    }
    let (lambda, _) = best.expect("non-empty grid");
    fit_logistic_l2(x, labels, lambda)
}

pub(crate) struct LbfgsResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Loss after each iteration; only the descent tests read it.
    #[cfg_attr(not(test), allow(dead_code))]
    pub history: Vec<f64>,
}

/// Limited-memory BFGS with monotone Armijo backtracking.
pub(crate) fn lbfgs(
    mut f: impl FnMut(&[f64], &mut [f64]) -> f64,
    mut x: Vec<f64>,
    max_iter: usize,
    tol: f64,
) -> LbfgsResult {
    const MEMORY: usize = 10;
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut history = vec![fx];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut iterations = 0;
    while iterations < max_iter {
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < tol {
            break;
        }
        // Two-loop recursion.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alpha[i] = rho * dot(&s_hist[i], &d);
            axpy(-alpha[i], &y_hist[i], &mut d);
        }
        if k > 0 {
            let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &d);
            axpy(alpha[i] - beta, &s_hist[i], &mut d);
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            s_hist.clear();
            y_hist.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut step = if k == 0 { 1.0 / norm(&g).max(1.0) } else { 1.0 };
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                xn[i] = x[i] + step * d[i];
            }
            let fnew = f(&xn, &mut gn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * step * slope {
                let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
                if dot(&s, &y) > 1e-12 {
                    if s_hist.len() == MEMORY {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                    s_hist.push(s);
                    y_hist.push(y);
                }
                std::mem::swap(&mut x, &mut xn);
                std::mem::swap(&mut g, &mut gn);
                let decrease = fx - fnew;
                fx = fnew;
                accepted = true;
                if decrease <= 1e-12 * fx.abs().max(1.0) {
                    iterations += 1;
                    history.push(fx);
                    return LbfgsResult { x, iterations, history };
                }
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        history.push(fx);
        if !accepted {
            break;
        }
    }
    LbfgsResult { x, iterations, history }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::seed;

    fn random_problem(rows: usize, cols: usize, classes: u32, seed: u64) -> (FeatureMatrix, Vec<Code>) {
        let mut rng = seed::rng(seed);
        let data = (0..rows * cols).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut labels: Vec<Code> = (0..rows).map(|_| rng.gen_range(0..classes)).collect();
        labels[0] = 0;
        labels[1] = classes - 1;
        (FeatureMatrix::new(rows, cols, data).unwrap(), labels)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (classes, seed) in [(2, 1), (3, 2), (2, 3)] {
            let (x, y) = random_problem(40, 5, classes, seed);
            let prep = prepare(&x, &y, 0.3).unwrap();
            let obj = &prep.objective;
            let mut rng = seed::rng(seed + 100);
            let w: Vec<f64> = (0..obj.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut g = vec![0.0; obj.dim()];
            obj.eval(&w, &mut g);
            let mut scratch = vec![0.0; obj.dim()];
            let h = 1e-5;
            let mut worst = 0.0f64;
            for j in 0..obj.dim() {
                let mut wp = w.clone();
                wp[j] += h;
                let mut wm = w.clone();
                wm[j] -= h;
                let fd = (obj.eval(&wp, &mut scratch) - obj.eval(&wm, &mut scratch)) / (2.0 * h);
                worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1e-3));
            }
            assert!(worst < 1e-5, "relative error {worst}");
        }
    }

    #[test]
    fn separable_one_dimensional() {
        let x = FeatureMatrix::new(6, 1, vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]).unwrap();
        let y = [0, 0, 0, 1, 1, 1];
        let m = fit_logistic_l2(&x, &y, 0.01).unwrap();
        assert!(m.weights.iter().all(|w| w.is_finite()));
        for i in 0..6 {
            assert_eq!(m.predict(x.row(i)).unwrap().0, y[i]);
        }
    }

    #[test]
    fn constant_features_give_the_prior() {
        let x = FeatureMatrix::new(4, 2, vec![0.0; 8]).unwrap();
        let y = [1, 0, 1, 1];
        let m = fit_logistic_l2(&x, &y, 1.0).unwrap();
        let (pred, p1) = m.predict(&[0.0, 0.0]).unwrap();
        assert_eq!(pred, 1);
        assert!((p1 - 0.75).abs() < 1e-6, "{p1}");
        assert_eq!(m.weights[0], 0.0);
        assert_eq!(m.weights[1], 0.0);
    }

    #[test]
    fn zero_model_ties_to_the_lower_class() {
        let m = MetaClassifier {
            classes: vec![0, 1],
            mean: vec![0.0],
            std: vec![1.0],
            weights: vec![0.0, 0.0],
            lambda: 1.0,
            iterations: 0,
        };
        assert_eq!(m.predict(&[4.0]).unwrap(), (0, 0.5));
        assert!(m.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = FeatureMatrix::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            fit_logistic_l2(&x, &[1, 1, 1], 1.0),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let (x, y) = random_problem(60, 4, 3, 9);
        let m = fit_logistic_l2(&x, &y, 0.1).unwrap();
        for i in 0..x.rows {
            let p = m.probabilities(x.row(i)).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn loss_is_non_increasing() {
        let (x, y) = random_problem(80, 6, 2, 4);
        let prep = prepare(&x, &y, 0.01).unwrap();
        let obj = &prep.objective;
        let fit = lbfgs(|w, g| obj.eval(w, g), vec![0.0; obj.dim()], MAX_ITERATIONS, 1e-8);
        assert!(fit.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.iterations <= MAX_ITERATIONS);
    }

    #[test]
    fn single_value_grid_equals_direct_fit() {
        let (x, y) = random_problem(30, 3, 2, 5);
        let train: Vec<usize> = (0..20).collect();
        let val: Vec<usize> = (20..30).collect();
        let a = select_and_fit(&x, &y, &train, &val, &[0.1]).unwrap();
        let b = fit_logistic_l2(&x, &y, 0.1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn row_order_does_not_change_the_fit() {
        let (x, y) = random_problem(50, 3, 2, 6);
        let a = fit_logistic_l2(&x, &y, 0.1).unwrap();
        let order: Vec<usize> = (0..50).rev().collect();
        let yr: Vec<Code> = order.iter().map(|&i| y[i]).collect();
        let b = fit_logistic_l2(&x.select(&order), &yr, 0.1).unwrap();
        for (u, v) in a.weights.iter().zip(&b.weights) {
            assert!((u - v).abs() < 1e-4);
        }
    }
}
