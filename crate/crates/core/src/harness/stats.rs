//! Small statistics helpers shared by the runner, benchmark, diagnostics,
//! and aggregation layers: mean / sample standard deviation and ordinary
//! least-squares line fits with Pearson correlation.

/// Mean and sample standard deviation (n−1 denominator). Zero or one sample
/// yields a standard deviation of 0, so a single seed produces a zero-width
/// uncertainty band rather than a NaN.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.max(0.0).sqrt())
}

/// Ordinary least-squares line fit of `ys` against `ts`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation; 0 when either coordinate is degenerate (fewer
    /// than two points or zero variance), keeping the value JSON-safe.
    pub correlation: f64,
}

pub fn fit_line(ts: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(ts.len(), ys.len(), "fit_line needs paired samples");
    let n = ts.len();
    if n < 2 {
        let intercept = ys.first().copied().unwrap_or(0.0);
        return LineFit { slope: 0.0, intercept, correlation: 0.0 };
    }
    let nf = n as f64;
    let mt = ts.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut stt = 0.0;
    let mut syy = 0.0;
    let mut sty = 0.0;
    for (t, y) in ts.iter().zip(ys) {
        let dt = t - mt;
        let dy = y - my;
        stt += dt * dt;
        syy += dy * dy;
        sty += dt * dy;
    }
    if stt <= 0.0 {
        return LineFit { slope: 0.0, intercept: my, correlation: 0.0 };
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let correlation = if syy <= 0.0 { 0.0 } else { sty / (stt.sqrt() * syy.sqrt()) };
    LineFit { slope, intercept, correlation }
}

/// Per-slot least-squares fit of a design-matrix eigenvalue trace.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SlotFit {
    /// 1-based slot number, matching CSV column naming.
    pub slot: usize,
    pub slope: f64,
    pub correlation: f64,
    pub samples: u64,
}
