//! Sampled checks of the driver itself.

use rayon::prelude::*;

use super::{Instance, Level, Property, PropertyReport};
use crate::error::{Error, Result};
use crate::model::{GeneratorSpec, SampleBox};
use crate::rng::CounterStream;
use crate::scalar::Scalar;

/// Upper end of the sampled dilation factor in the homogeneity check.
const MAX_DILATION: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorReports<S> {
    /// `|g(t, y1, z) - g(t, y2, z)|`.
    pub independence_of_y: PropertyReport<S>,
    /// Positive part of `g(t, y, a z1 + (1-a) z2) - a g(t, y, z1) - (1-a) g(t, y, z2)`.
    pub convexity: PropertyReport<S>,
    /// Positive part of `g(t, y, z1 + z2) - g(t, y, z1) - g(t, y, z2)`.
    pub subadditivity: PropertyReport<S>,
    /// `|g(t, l y, l z) - l g(t, y, z)|` for `l in [0, 3]`.
    pub positive_homogeneity: PropertyReport<S>,
}

impl<S: Scalar> GeneratorReports<S> {
    pub fn all(&self) -> [&PropertyReport<S>; 4] {
        [
            &self.independence_of_y,
            &self.convexity,
            &self.subadditivity,
            &self.positive_homogeneity,
        ]
    }
}

fn fmt_vec<S: Scalar>(v: &[S]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(", "))
}

type Sample<S> = [(S, String); 4];

/// Sample `k` uses counter stream `k`, so results depend only on `(seed, box, n)`.
pub fn check_generator_side<S: Scalar>(
    g: &GeneratorSpec<S>,
    sample_box: &SampleBox<S>,
    n_samples: usize,
    seed: u64,
    tol: S,
) -> Result<GeneratorReports<S>> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    sample_box.validate()?;
    let d = g.dim();
    let samples: Vec<Sample<S>> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut stream = CounterStream::new(seed, k as u64);
            let (t, y1, z1) = sample_box.draw(&mut stream, d);
            let (_, y2, z2) = sample_box.draw(&mut stream, d);
            let a = stream.uniform_in(S::zero(), S::one());
            let l = stream.uniform_in(S::zero(), S::lit(MAX_DILATION));
            let ev = |y: S, z: &[S]| g.eval_at(t, y, z).map_err(|e| Error::instance(format!("sample {k}"), e));

            let g11 = ev(y1, &z1)?;
            let g21 = ev(y2, &z1)?;
            let g12 = ev(y1, &z2)?;
            let mix: Vec<S> = z1.iter().zip(&z2).map(|(&u, &v)| a * u + (S::one() - a) * v).collect();
            let sum: Vec<S> = z1.iter().zip(&z2).map(|(&u, &v)| u + v).collect();
            let scaled: Vec<S> = z1.iter().map(|&u| l * u).collect();
            let g_mix = ev(y1, &mix)?;
            let g_sum = ev(y1, &sum)?;
            let g_scaled = ev(l * y1, &scaled)?;

            let (zs1, zs2) = (fmt_vec(&z1), fmt_vec(&z2));
            Ok([
                ((g11 - g21).abs(), format!("t={t}, y1={y1}, y2={y2}, z={zs1}")),
                (
                    (g_mix - a * g11 - (S::one() - a) * g12).max(S::zero()),
                    format!("t={t}, y={y1}, z1={zs1}, z2={zs2}, alpha={a}"),
                ),
                (
                    (g_sum - g11 - g12).max(S::zero()),
                    format!("t={t}, y={y1}, z1={zs1}, z2={zs2}"),
                ),
                ((g_scaled - l * g11).abs(), format!("t={t}, y={y1}, z={zs1}, lambda={l}")),
            ])
        })
        .collect::<Result<_>>()?;

    let report = |idx: usize, property: Property| {
        let mut best: Option<&(S, String)> = None;
        for s in &samples {
            let cand = &s[idx];
            if best.is_none_or(|b| cand.0 > b.0) {
                best = Some(cand);
            }
        }
        let (v, label) = best.expect("at least one sample");
        let mut r = PropertyReport::from_instances(
            property,
            Level::Generator,
            vec![Instance {
                label: label.clone(),
                violation: *v,
            }],
            tol,
        );
        r.instances_tested = samples.len();
        r
    };
    Ok(GeneratorReports {
        independence_of_y: report(0, Property::IndependenceOfY),
        convexity: report(1, Property::Convexity),
        subadditivity: report(2, Property::Subadditivity),
        positive_homogeneity: report(3, Property::PositiveHomogeneity),
    })
}
