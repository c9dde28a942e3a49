//! Brute-force reference: fixed-step RK4 on `x' = -L(t) q_eps(x)`, where
//! `q_eps` is `q` with each discontinuity replaced by a linear ramp of
//! half-width `eps`.

use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::graphkit::GraphSchedule;
use crate::quantizer::QuantizerSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedOptions {
    pub eps: f64,
    pub h: f64,
    pub t_end: f64,
    /// Report every `stride`-th step.
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
}

pub fn simulate_regularized(
    schedule: &GraphSchedule,
    quantizer: &QuantizerSpec,
    x0: &[f64],
    opts: &RegularizedOptions,
) -> Result<Vec<Sample>> {
    let n = schedule.n();
    if x0.len() != n {
        return Err(Error::InvalidInput(format!("x0 has length {}, expected {n}", x0.len())));
    }
    let gap = quantizer.min_gap();
    if !(opts.eps > 0.0 && opts.eps < gap / 4.0) {
        return Err(Error::InvalidInput(format!(
            "eps must lie in (0, {}), got {}",
            gap / 4.0,
            opts.eps
        )));
    }
    let h_max = opts.eps / (4.0 * n as f64 * schedule.a_high() * quantizer.max_gap());
    if !(opts.h > 0.0 && opts.h < h_max) {
        return Err(Error::InvalidInput(format!(
            "step must lie in (0, {h_max}) for eps = {}, got {}",
            opts.eps, opts.h
        )));
    }
    if !(opts.t_end >= 0.0 && opts.t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("bad end time {}", opts.t_end)));
    }
    let stride = opts.stride.max(1);

    // Solutions stay inside the initial level range widened by one gap.
    let margin = 2.0 * quantizer.max_gap();
    let lo = x0.iter().copied().fold(f64::INFINITY, f64::min) - margin;
    let hi = x0.iter().copied().fold(f64::NEG_INFINITY, f64::max) + margin;

    let rhs = |t: f64, x: &[f64], out: &mut [f64]| {
        let g = schedule.graph_at(t);
        let qx: Vec<f64> = x.iter().map(|&v| quantizer.smoothed(v, opts.eps)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            *o = g.out_edges(i).map(|(j, w)| w * (qx[j] - qx[i])).sum();
        }
    };

    let steps = (opts.t_end / opts.h).round() as usize;
    let mut x = x0.to_vec();
    let mut samples = vec![Sample { t: 0.0, x: x.clone() }];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let h = opts.h;
    for step in 0..steps {
        let t = step as f64 * h;
        rhs(t, &x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        rhs(t + h, &tmp, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = (step + 1) as f64 * h;
        if x.iter().any(|v| !(v.is_finite() && *v >= lo && *v <= hi)) {
            return Err(Error::Unstable { t: t_next, h });
        }
        if (step + 1) % stride == 0 || step + 1 == steps {
            samples.push(Sample { t: t_next, x: x.clone() });
        }
    }
    Ok(samples)
}

/// Sup-norm distance between an exact trajectory and oracle samples.
pub fn max_deviation(trajectory: &Trajectory, samples: &[Sample]) -> f64 {
    samples
        .iter()
        .map(|s| {
            trajectory
                .state_at(s.t)
                .iter()
                .zip(&s.x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate_with, SimulationOptions};
    use crate::graphkit::WeightedDigraph;

    fn line3() -> GraphSchedule {
        let g = WeightedDigraph::from_edges(3, [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)]).unwrap();
        GraphSchedule::constant(g, 1.0, 1.0).unwrap()
    }

    #[test]
    fn agrees_with_exact_line3() {
        let s = line3();
        let q = QuantizerSpec::uniform(1.0).unwrap();
        let x0 = [0.0, 1.0, 2.0];
        let opts = RegularizedOptions { eps: 1e-3, h: 1e-5, t_end: 1.0, stride: 1000 };
        let samples = simulate_regularized(&s, &q, &x0, &opts).unwrap();
        assert_eq!(samples.last().unwrap().t, 1.0);
        let exact = simulate_with(&s, &q, &x0, &SimulationOptions::default(), |_| false).unwrap();
        assert!(max_deviation(&exact, &samples) <= 5e-3);
    }

    #[test]
    fn rejects_bad_parameters() {
        let s = line3();
        let q = QuantizerSpec::uniform(1.0).unwrap();
        let bad_eps = RegularizedOptions { eps: 0.3, h: 1e-5, t_end: 1.0, stride: 1 };
        assert!(simulate_regularized(&s, &q, &[0.0; 3], &bad_eps).is_err());
        let bad_h = RegularizedOptions { eps: 1e-3, h: 1e-3, t_end: 1.0, stride: 1 };
        assert!(simulate_regularized(&s, &q, &[0.0; 3], &bad_h).is_err());
    }
}
