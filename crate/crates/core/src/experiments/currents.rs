use std::f64::consts::PI;

use crate::cem::CurrentPattern;
use crate::error::{Error, Result};

/// Trigonometric current patterns: the first `⌈count/2⌉` are
/// `cos(2πj(l−1)/L)`, the rest `sin(2πj'(l−1)/L)`, each projected to sum
/// zero and scaled to unit Euclidean norm.
pub fn generate_currents(l: usize, count: usize) -> Result<Vec<CurrentPattern>> {
    if count >= l {
        return Err(Error::Config(format!("{count} patterns need more than {l} electrodes")));
    }
    let n_cos = count.div_ceil(2);
    (1..=count)
        .map(|j| {
            let (freq, f): (usize, fn(f64) -> f64) = if j <= n_cos { (j, f64::cos) } else { (j - n_cos, f64::sin) };
            let mut v: Vec<f64> = (0..l).map(|e| f(2.0 * PI * (freq * e) as f64 / l as f64)).collect();
            let mean = v.iter().sum::<f64>() / l as f64;
            v.iter_mut().for_each(|x| *x -= mean);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(Error::Config(format!("pattern {j} vanishes for {l} electrodes")));
            }
            v.iter_mut().for_each(|x| *x /= norm);
            CurrentPattern::new(v)
        })
        .collect()
}
