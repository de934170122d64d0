//! Spearman rank correlation and the correlation-order extrapolation fit.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{GbsError, Result};

/// Largest sample size for which the exact permutation p-value is used.
pub const EXACT_PERMUTATION_MAX: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum PValueMethod {
    Permutation,
    StudentT,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpearmanResult {
    pub rho: f64,
    /// One-sided p-value for the alternative `rho > 0`; always in `(0, 1]`.
    pub p: f64,
    pub method: PValueMethod,
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

fn check_inputs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(GbsError::Argument(format!("lengths {} and {} differ", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(GbsError::Argument(format!("need at least 3 points, got {}", x.len())));
    }
    for v in [x, y] {
        if v.iter().any(|a| !a.is_finite()) {
            return Err(GbsError::Argument("non-finite input".into()));
        }
        if v.iter().all(|&a| a == v[0]) {
            return Err(GbsError::Degenerate("constant input vector".into()));
        }
    }
    Ok(())
}

/// Spearman's rho.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    check_inputs(x, y)?;
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// Fraction of all `n!` reorderings of `y`'s ranks whose rho is at least
/// the observed one.
pub fn spearman_permutation_p(x: &[f64], y: &[f64]) -> Result<f64> {
    check_inputs(x, y)?;
    let n = x.len();
    if n > EXACT_PERMUTATION_MAX {
        return Err(GbsError::Capacity(format!("exact permutation p-value limited to n <= {EXACT_PERMUTATION_MAX}")));
    }
    let rx = average_ranks(x);
    let mut ry = average_ranks(y);
    let observed = pearson(&rx, &ry);
    let tol = 1e-12;
    let mut hits = 0u64;
    let mut total = 0u64;
    // Heap's algorithm, iterative
    let mut c = vec![0usize; n];
    let mut visit = |ry: &[f64]| {
        total += 1;
        if pearson(&rx, ry) >= observed - tol {
            hits += 1;
        }
    };
    visit(&ry);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                ry.swap(0, i);
            } else {
                ry.swap(c[i], i);
            }
            visit(&ry);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

/// One-sided p-value from `t = rho sqrt((n-2)/(1-rho^2))` with `n-2`
/// degrees of freedom, floored at the smallest positive double.
pub fn spearman_t_p(rho: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(GbsError::Argument(format!("need at least 3 points, got {n}")));
    }
    let df = (n - 2) as f64;
    let p = if rho >= 1.0 {
        0.0
    } else if rho <= -1.0 {
        1.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| GbsError::Argument(e.to_string()))?;
        dist.sf(t)
    };
    Ok(p.clamp(f64::MIN_POSITIVE, 1.0))
}

/// Spearman's rho with a one-sided p-value: exact permutation for
/// `n <= 10`, Student t above.
pub fn spearman_test(x: &[f64], y: &[f64]) -> Result<SpearmanResult> {
    let rho = spearman_rho(x, y)?;
    if x.len() <= EXACT_PERMUTATION_MAX {
        Ok(SpearmanResult { rho, p: spearman_permutation_p(x, y)?, method: PValueMethod::Permutation })
    } else {
        Ok(SpearmanResult { rho, p: spearman_t_p(rho, x.len())?, method: PValueMethod::StudentT })
    }
}

/// Least-squares line `-ln(p)/L = intercept + slope * order` and the order
/// at which the predicted p-value reaches `level`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_se: f64,
    pub slope_se: f64,
    /// Order where the fitted line crosses `-ln(level)/L`.
    pub max_order: f64,
    pub max_order_se: f64,
    /// Points whose p-value was zero and was replaced by the floor.
    pub floored: Vec<bool>,
}

pub fn correlation_order_fit(orders: &[f64], p_values: &[f64], sample_count: usize, p_floor: f64, level: f64) -> Result<OrderFit> {
    if orders.len() != p_values.len() {
        return Err(GbsError::Argument("orders and p-values differ in length".into()));
    }
    if orders.len() < 3 {
        return Err(GbsError::Argument(format!("need at least 3 points, got {}", orders.len())));
    }
    if sample_count == 0 || !(p_floor > 0.0 && p_floor < 1.0) || !(level > 0.0 && level < 1.0) {
        return Err(GbsError::Argument("sample count, floor and level must be positive (floor, level < 1)".into()));
    }
    let l = sample_count as f64;
    let mut floored = Vec::with_capacity(p_values.len());
    let mut y = Vec::with_capacity(p_values.len());
    for (&o, &p) in orders.iter().zip(p_values) {
        if !o.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(GbsError::Argument(format!("point ({o}, {p}) is not a finite order with p in [0, 1]")));
        }
        floored.push(p == 0.0);
        y.push(-p.max(p_floor).ln() / l);
    }
    let n = orders.len() as f64;
    let mx = orders.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = orders.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(GbsError::Degenerate("all orders are equal".into()));
    }
    let sxy: f64 = orders.iter().zip(&y).map(|(x, yv)| (x - mx) * (yv - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = orders.iter().zip(&y).map(|(x, yv)| (yv - intercept - slope * x).powi(2)).sum();
    let s2 = if orders.len() > 2 { rss / (n - 2.0) } else { 0.0 };
    let var_slope = s2 / sxx;
    let var_intercept = s2 * (1.0 / n + mx * mx / sxx);
    let cov = -mx * s2 / sxx;
    let threshold = -level.ln() / l;
    let (max_order, max_order_se) = if slope == 0.0 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let x0 = (threshold - intercept) / slope;
        // delta method: dx0/da = -1/b, dx0/db = -x0/b
        let var = (var_intercept + x0 * x0 * var_slope + 2.0 * x0 * cov) / (slope * slope);
        (x0, var.max(0.0).sqrt())
    };
    Ok(OrderFit {
        intercept,
        slope,
        intercept_se: var_intercept.sqrt(),
        slope_se: var_slope.sqrt(),
        max_order,
        max_order_se,
        floored,
    })
}
