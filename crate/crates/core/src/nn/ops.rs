use super::matrix::{dot, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Average over rows: one value per column.
    Rows,
    /// Average over columns: one value per row.
    Cols,
}

/// `w · x + b`.
///
/// # Panics
/// On shape mismatch.
pub fn affine(w: &Matrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(w.cols(), x.len(), "affine: weight cols vs input length");
    assert_eq!(w.rows(), b.len(), "affine: weight rows vs bias length");
    (0..w.rows()).map(|r| dot(w.row(r), x) + b[r]).collect()
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Upstream gradient masked by `x > 0`, where `x` is the pre-activation.
pub fn relu_backward(x: &[f64], upstream: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), upstream.len(), "relu_backward length mismatch");
    x.iter()
        .zip(upstream)
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect()
}

/// Logistic function, evaluated so that neither branch overflows.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| sigmoid_scalar(v)).collect()
}

pub fn tanh_act(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.tanh()).collect()
}

/// Max-shifted softmax.
///
/// # Panics
/// On empty input.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    assert!(!x.is_empty(), "softmax of an empty vector");
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Vector-Jacobian product of softmax given its output `y`.
pub fn softmax_backward(y: &[f64], upstream: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), upstream.len(), "softmax_backward length mismatch");
    let inner = dot(y, upstream);
    y.iter().zip(upstream).map(|(&p, &g)| p * (g - inner)).collect()
}

/// Arithmetic mean along `axis`.
///
/// # Panics
/// If the averaged axis has zero length.
pub fn mean_pool(m: &Matrix, axis: Axis) -> Vec<f64> {
    match axis {
        Axis::Rows => {
            assert!(m.rows() > 0, "mean_pool over zero rows");
            let mut out = vec![0.0; m.cols()];
            for r in 0..m.rows() {
                for (o, v) in out.iter_mut().zip(m.row(r)) {
                    *o += v;
                }
            }
            let n = m.rows() as f64;
            out.iter_mut().for_each(|o| *o /= n);
            out
        }
        Axis::Cols => {
            assert!(m.cols() > 0, "mean_pool over zero columns");
            let n = m.cols() as f64;
            (0..m.rows())
                .map(|r| m.row(r).iter().sum::<f64>() / n)
                .collect()
        }
    }
}

/// Same-length sliding-window convolution.
///
/// `input` is `n × c` (position-major), `filters` is `f × (c·s)` with each
/// filter laid out as `s` consecutive position blocks of width `c`. The input
/// is implicitly right-padded with `s − 1` zero positions, so the output is
/// `n × f`: row `h` holds every filter applied to positions `h..h+s`.
///
/// # Panics
/// If `n == 0`, `f == 0`, `s == 0` or the filter width is not `c·s`.
pub fn window_conv(input: &Matrix, filters: &Matrix, window: usize) -> Matrix {
    let (n, c) = input.shape();
    check_conv_shapes(n, c, filters, window);
    let f = filters.rows();
    let flat = input.as_slice();
    let mut out = Matrix::zeros(n, f);
    for h in 0..n {
        let len = window.min(n - h) * c;
        let x = &flat[h * c..h * c + len];
        let out_row = out.row_mut(h);
        for (j, o) in out_row.iter_mut().enumerate() {
            *o = dot(&filters.row(j)[..len], x);
        }
    }
    out
}

/// Backward pass of [`window_conv`]: returns `(d_input, d_filters)`.
pub fn window_conv_backward(
    input: &Matrix,
    filters: &Matrix,
    window: usize,
    upstream: &Matrix,
) -> (Matrix, Matrix) {
    let (n, c) = input.shape();
    check_conv_shapes(n, c, filters, window);
    assert_eq!(
        upstream.shape(),
        (n, filters.rows()),
        "window_conv_backward upstream shape"
    );
    let flat = input.as_slice();
    let mut d_input = Matrix::zeros(n, c);
    let mut d_filters = Matrix::zeros(filters.rows(), filters.cols());
    for h in 0..n {
        let len = window.min(n - h) * c;
        let x = &flat[h * c..h * c + len];
        for (j, &g) in upstream.row(h).iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (d, &xv) in d_filters.row_mut(j)[..len].iter_mut().zip(x) {
                *d += g * xv;
            }
            let dx = &mut d_input.as_mut_slice()[h * c..h * c + len];
            for (d, &w) in dx.iter_mut().zip(&filters.row(j)[..len]) {
                *d += g * w;
            }
        }
    }
    (d_input, d_filters)
}

fn check_conv_shapes(n: usize, c: usize, filters: &Matrix, window: usize) {
    assert!(window >= 1, "window_conv: window must be at least 1");
    assert!(n > 0, "window_conv: empty input sequence");
    assert!(filters.rows() > 0, "window_conv: zero filters");
    assert_eq!(
        filters.cols(),
        c * window,
        "window_conv: filter width must equal channels x window"
    );
}
