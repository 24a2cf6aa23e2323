//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 48;

/// Depth after which a refinement that keeps `STALL_RATIO` of the parent's
/// error estimate ends the recursion.
const STALL_DEPTH: u32 = 12;
const STALL_RATIO: f64 = 0.75;

/// Error estimates below this fraction of `∫|f|` over a panel are treated as
/// evaluation noise.
const NOISE_LEVEL: f64 = 1e-14;

/// Absolute error estimates below this are treated as zero; subnormal
/// arithmetic cannot resolve them.
const TINY: f64 = 1e-280;

/// One 15-point Kronrod panel: returns (kronrod estimate, error estimate),
/// the error floored at the rounding level of the panel.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut magnitude = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (fl, fr) = (f(center - dx), f(center + dx));
        let pair = fl + fr;
        kronrod += WGK[j] * pair;
        magnitude += WGK[j] * (fl.abs() + fr.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let err = ((kronrod - gauss) * half).abs();
    let noise = NOISE_LEVEL * magnitude * half.abs();
    (kronrod * half, if err <= noise || err < TINY { 0.0 } else { err })
}

fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: (f64, f64),
    abs_tol: f64,
    depth: u32,
) -> f64 {
    let (value, err) = whole;
    if !err.is_finite() || err <= abs_tol || depth >= MAX_DEPTH || (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
        return value;
    }
    let mid = 0.5 * (a + b);
    let left = gk15(f, a, mid);
    let right = gk15(f, mid, b);
    // Halving that no longer shrinks the error estimate means the estimate is
    // dominated by evaluation noise rather than unresolved structure.
    if depth >= STALL_DEPTH && left.1 + right.1 >= STALL_RATIO * err {
        return left.0 + right.0;
    }
    adapt(f, a, mid, left, 0.5 * abs_tol, depth + 1)
        + adapt(f, mid, b, right, 0.5 * abs_tol, depth + 1)
}

/// Integrates `f` over `[a, b]` to roughly `rel_tol` relative accuracy.
///
/// `floor` is an absolute tolerance used when the integral is close to zero.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, floor: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = gk15(&f, a, b);
    let tol = (rel_tol * whole.0.abs()).max(floor);
    adapt(&f, a, b, whole, tol, 0)
}

/// Integrates over `[a, b]` split at the given interior breakpoints.
///
/// The tolerance is relative to the summed magnitude of all pieces and is
/// shared between them in proportion to their length, so a piece with a tiny
/// integral is not resolved to its own relative precision.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    rel_tol: f64,
    floor: f64,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut points: Vec<f64> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    points.push(a);
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let panels: Vec<(f64, f64, (f64, f64))> = points
        .windows(2)
        .map(|w| (w[0], w[1], gk15(&f, w[0], w[1])))
        .collect();
    let scale: f64 = panels.iter().map(|p| p.2 .0.abs()).sum();
    let tol = (rel_tol * scale).max(floor);
    let length = b - a;
    panels
        .into_iter()
        .map(|(lo, hi, whole)| adapt(&f, lo, hi, whole, tol * (hi - lo) / length, 0))
        .sum()
}
