//! Seedable disturbance generators.
//!
//! Random draws are keyed on `(seed, t, node)` so every controller in a
//! paired comparison sees the same realisation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::UncertainNetwork;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceKind {
    Zero,
    /// I.i.d. zero-mean normal entries.
    Gaussian { variance: f64 },
    /// State feedback that makes node `i` look like candidate `target_index[i]`.
    Confusion {
        target_index: Vec<usize>,
        #[serde(default)]
        noise_scale: f64,
    },
    /// `amplitude * cos(frequency * t)`, identical at every node.
    Sinusoid { amplitude: f64, frequency: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    #[serde(flatten)]
    pub kind: DisturbanceKind,
    #[serde(default)]
    pub seed: u64,
}

impl DisturbanceSpec {
    pub fn zero() -> Self {
        Self {
            kind: DisturbanceKind::Zero,
            seed: 0,
        }
    }

    pub fn gaussian(variance: f64, seed: u64) -> Self {
        Self {
            kind: DisturbanceKind::Gaussian { variance },
            seed,
        }
    }

    pub fn confusion(target_index: Vec<usize>, noise_scale: f64, seed: u64) -> Self {
        Self {
            kind: DisturbanceKind::Confusion {
                target_index,
                noise_scale,
            },
            seed,
        }
    }

    /// Rejects negative variances/scales and target indices outside the candidate sets.
    pub fn check(&self, net: &UncertainNetwork) -> Result<()> {
        match &self.kind {
            DisturbanceKind::Zero => Ok(()),
            DisturbanceKind::Gaussian { variance } => {
                if *variance >= 0.0 && variance.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "variance must be non-negative, got {variance}"
                    )))
                }
            }
            DisturbanceKind::Confusion {
                target_index,
                noise_scale,
            } => {
                if !(*noise_scale >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "noise scale must be non-negative, got {noise_scale}"
                    )));
                }
                if target_index.len() != net.node_count() {
                    return Err(Error::DimensionMismatch {
                        expected: net.node_count(),
                        got: target_index.len(),
                    });
                }
                for (node, (&k, c)) in target_index.iter().zip(net.candidates()).enumerate() {
                    if k >= c.len() {
                        return Err(Error::InvalidParameter(format!(
                            "confusion target {k} out of range at node {node} ({} candidates)",
                            c.len()
                        )));
                    }
                }
                Ok(())
            }
            DisturbanceKind::Sinusoid {
                amplitude,
                frequency,
            } => {
                if amplitude.is_finite() && frequency.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("sinusoid parameters must be finite".into()))
                }
            }
        }
    }

    /// Disturbance vector at time `t` given the current state.
    pub fn sample(&self, t: usize, x_t: &[f64], net: &UncertainNetwork) -> Result<Vec<f64>> {
        let n = net.node_count();
        match &self.kind {
            DisturbanceKind::Zero => Ok(vec![0.0; n]),
            DisturbanceKind::Gaussian { variance } => {
                self.check(net)?;
                Ok(gaussian_disturbance(self.seed, *variance, t, n))
            }
            DisturbanceKind::Confusion { .. } => confusion_disturbance(self, x_t, net, t),
            DisturbanceKind::Sinusoid {
                amplitude,
                frequency,
            } => Ok(vec![amplitude * (frequency * t as f64).cos(); n]),
        }
    }
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard normal draw that depends only on `(seed, t, node)`.
pub fn keyed_normal(seed: u64, t: usize, node: usize) -> f64 {
    let key = mix(mix(mix(seed) ^ t as u64) ^ node as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    StandardNormal.sample(&mut rng)
}

pub fn gaussian_disturbance(seed: u64, variance: f64, t: usize, n: usize) -> Vec<f64> {
    if variance == 0.0 {
        return vec![0.0; n];
    }
    let sd = variance.sqrt();
    (0..n).map(|i| sd * keyed_normal(seed, t, i)).collect()
}

/// `w_i = (a_target - a_true) x_i + noise_scale * eta`.
///
/// With zero noise the transition is exactly what the target model predicts,
/// so the target candidate accumulates no evidence.
pub fn confusion_disturbance(
    spec: &DisturbanceSpec,
    x_t: &[f64],
    net: &UncertainNetwork,
    t: usize,
) -> Result<Vec<f64>> {
    let DisturbanceKind::Confusion {
        target_index,
        noise_scale,
    } = &spec.kind
    else {
        return Err(Error::InvalidParameter("not a confusion disturbance".into()));
    };
    spec.check(net)?;
    net.graph().check_len(x_t.len())?;
    let truth = net.true_parameters();
    Ok((0..net.node_count())
        .map(|i| {
            let target = net.candidates()[i].values()[target_index[i]];
            let mut w = (target - truth[i]) * x_t[i];
            if *noise_scale > 0.0 {
                // salt keeps confusion noise independent of the Gaussian stream
                w += noise_scale * keyed_normal(spec.seed ^ 0x5eed_c0f0, t, i);
            }
            w
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{CandidateSet, TrueModelRule};
    use crate::graph::{generate_line, generate_tree};

    fn small_net() -> UncertainNetwork {
        let g = generate_line(2).unwrap();
        let sets = vec![
            CandidateSet::new(vec![0.5, 0.8]).unwrap(),
            CandidateSet::new(vec![0.3, 0.6]).unwrap(),
        ];
        UncertainNetwork::new(g, 0.1, sets, vec![0, 1]).unwrap()
    }

    #[test]
    fn gaussian_zero_variance() {
        assert_eq!(gaussian_disturbance(5, 0.0, 3, 4), vec![0.0; 4]);
    }

    #[test]
    fn gaussian_statistics() {
        // 10^5 draws: mean and variance within 3 standard errors of (0, 0.1)
        let n = 1000;
        let draws: Vec<f64> = (0..100).flat_map(|t| gaussian_disturbance(42, 0.1, t, n)).collect();
        let m = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / m;
        let var = draws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (m - 1.0);
        assert!(mean.abs() < 3.0 * (0.1f64 / m).sqrt(), "mean {mean}");
        // var of sample variance for normals: 2 sigma^4 / (m - 1)
        assert!((var - 0.1).abs() < 3.0 * (2.0 * 0.01 / (m - 1.0)).sqrt(), "var {var}");
    }

    #[test]
    fn replay_is_bit_identical() {
        let a = gaussian_disturbance(9, 0.1, 17, 50);
        let b = gaussian_disturbance(9, 0.1, 17, 50);
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_ne!(a, gaussian_disturbance(9, 0.1, 18, 50));
        assert_ne!(a, gaussian_disturbance(10, 0.1, 17, 50));
        // prefix-stable across network sizes
        assert_eq!(&gaussian_disturbance(9, 0.1, 17, 80)[..50], &a[..]);
    }

    #[test]
    fn confusion_examples() {
        let net = small_net();
        // node 0: true 0.5, target 0.8; node 1: true 0.6, target 0.6
        let spec = DisturbanceSpec::confusion(vec![1, 1], 0.0, 0);
        assert_eq!(spec.sample(0, &[0.0, 0.0], &net).unwrap(), vec![0.0, 0.0]);
        let w = spec.sample(0, &[2.0, 1.0], &net).unwrap();
        assert!((w[0] - 0.6).abs() < 1e-15);
        assert_eq!(w[1], 0.0);

        let bad = DisturbanceSpec::confusion(vec![2, 0], 0.0, 0);
        assert!(bad.sample(0, &[1.0, 1.0], &net).is_err());
        let short = DisturbanceSpec::confusion(vec![0], 0.0, 0);
        assert!(short.check(&net).is_err());
    }

    #[test]
    fn confusion_noise_is_deterministic() {
        let g = generate_tree(20, 3).unwrap();
        let net =
            UncertainNetwork::sample(g, 0.1, 2, 0.1, 3, &TrueModelRule::Fixed { index: 0 }).unwrap();
        let spec = DisturbanceSpec::confusion(vec![1; 20], 0.2, 11);
        let x = vec![0.5; 20];
        assert_eq!(spec.sample(4, &x, &net).unwrap(), spec.sample(4, &x, &net).unwrap());
    }

    #[test]
    fn negative_variance_rejected() {
        let net = small_net();
        assert!(DisturbanceSpec::gaussian(-1.0, 0).sample(0, &[0.0, 0.0], &net).is_err());
    }
}
