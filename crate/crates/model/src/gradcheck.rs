//! Central finite-difference verification of the analytic gradients.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{FusionMode, ModelConfig, PrecisionMode};
use crate::data::PreparedExample;
use crate::net::{loss_and_gradients, loss_only};
use crate::params::Parameters;
use crate::{Error, Result};

/// Tensors larger than this are probed on a random 1% sample of their
/// elements instead of exhaustively.
const EXHAUSTIVE_LIMIT: usize = 512;

/// Differences below this are treated as zero; central differences carry
/// O(1e-10) floating-point noise that would otherwise dominate the
/// relative error of near-zero gradients.
const ABSOLUTE_FLOOR: f64 = 1e-7;

/// Compare analytic gradients of the full loss against central finite
/// differences and return the maximum relative error over all probes.
/// Requires high-precision mode; dropout is off by construction.
pub fn grad_check(
    params: &mut Parameters,
    config: &ModelConfig,
    example: &PreparedExample,
    mode: FusionMode,
    epsilon: f64,
    seed: u64,
) -> Result<f64> {
    if config.precision != PrecisionMode::High {
        return Err(Error::Argument(
            "gradient checking requires high-precision mode".into(),
        ));
    }
    let (_, analytic) = loss_and_gradients(params, config, example, mode, None)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_relative_error = 0.0f64;

    for (tensor_index, grad) in analytic.iter().enumerate() {
        let len = grad.len();
        let probes: Vec<usize> = if len <= EXHAUSTIVE_LIMIT {
            (0..len).collect()
        } else {
            let count = (len / 100).max(64);
            let mut picked: Vec<usize> = (0..count).map(|_| rng.gen_range(0..len)).collect();
            picked.sort_unstable();
            picked.dedup();
            picked
        };

        for index in probes {
            let original = params.tensors()[tensor_index].data[index];

            params.tensors_mut()[tensor_index].data[index] = original + epsilon;
            let loss_plus = loss_only(params, config, example, mode)?;
            params.tensors_mut()[tensor_index].data[index] = original - epsilon;
            let loss_minus = loss_only(params, config, example, mode)?;
            params.tensors_mut()[tensor_index].data[index] = original;

            let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
            let a = grad.data[index];
            if (a - numeric).abs() <= ABSOLUTE_FLOOR {
                continue;
            }
            let relative = (a - numeric).abs() / a.abs().max(numeric.abs());
            if relative > max_relative_error {
                max_relative_error = relative;
            }
        }
    }
    Ok(max_relative_error)
}
