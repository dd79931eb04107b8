use statrs::distribution::{ContinuousCDF, StudentsT};

/// Least-squares line fit with a two-sided t-test of a zero slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeTest {
    pub slope: f64,
    pub intercept: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub df: f64,
}

pub fn ols_slope_test(xs: &[f64], ys: &[f64]) -> Option<SlopeTest> {
    let n = xs.len();
    if n != ys.len() || n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let df = nf - 2.0;
    let se = (sse / df / sxx).sqrt();
    let (t_statistic, p_value) = if se == 0.0 {
        if slope == 0.0 { (0.0, 1.0) } else { (f64::INFINITY.copysign(slope), 0.0) }
    } else {
        let t = slope / se;
        let dist = StudentsT::new(0.0, 1.0, df).ok()?;
        (t, 2.0 * (1.0 - dist.cdf(t.abs())))
    };
    Some(SlopeTest { slope, intercept, t_statistic, p_value, df })
}
