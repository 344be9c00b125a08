use crate::dataset::Sequence;
use crate::network::{
    forward_with_tokens, select, selection_count, tokenize_image, ForwardTrace, ModelParams,
    Trainable, VisualTokens,
};
use crate::util::sigmoid;
use crate::{Error, Result};

use super::loss::{losses_from_values, LossBreakdown};

/// A sequence with its (frozen) visual tokens precomputed.
#[derive(Debug, Clone)]
pub struct Example {
    pub tokens: VisualTokens,
    pub proprio: Vec<f64>,
    pub v_applied: f64,
    pub mean_slip: f64,
}

impl Example {
    pub fn from_sequence(sequence: &Sequence, params: &ModelParams) -> Result<Self> {
        Ok(Example {
            tokens: tokenize_image(&sequence.image, params)?,
            proprio: sequence.proprio_f64(),
            v_applied: sequence.v_applied,
            mean_slip: sequence.mean_slip,
        })
    }
}

/// Forward pass, selection and losses for one mini-batch.
#[derive(Debug, Clone)]
pub struct BatchEval {
    pub traces: Vec<ForwardTrace>,
    /// Positions within the batch chosen by confidence.
    pub selected: Vec<usize>,
    pub losses: LossBreakdown,
}

pub fn evaluate_batch(
    params: &ModelParams,
    batch: &[&Example],
    selection_fraction: f64,
) -> Result<BatchEval> {
    let traces = batch
        .iter()
        .map(|e| forward_with_tokens(e.tokens.clone(), &e.proprio, e.mean_slip, params))
        .collect::<Result<Vec<_>>>()?;
    let selected = select(&traces, selection_count(batch.len(), selection_fraction));
    let v_hat: Vec<f64> = selected.iter().map(|&i| traces[i].v_hat).collect();
    let v_applied: Vec<f64> = selected.iter().map(|&i| batch[i].v_applied).collect();
    let slips: Vec<f64> = selected.iter().map(|&i| batch[i].mean_slip).collect();
    let losses = losses_from_values(&v_hat, &v_applied, &slips, params.alpha())?;
    Ok(BatchEval {
        traces,
        selected,
        losses,
    })
}

/// Exact gradient of the clamped total loss with respect to every trainable
/// parameter. The tokenizer is frozen and has no gradient.
///
/// Per-sequence contributions are accumulated in ascending batch position.
pub fn backward(eval: &BatchEval, batch: &[&Example], params: &ModelParams) -> Result<Trainable> {
    let c = params.config();
    let t = &params.trainable;
    let mut g = Trainable::zeros(c);
    if eval.losses.is_clamped() {
        return Ok(g);
    }
    let n = eval.selected.len() as f64;
    let inv_sqrt = 1.0 / (c.d_v as f64).sqrt();

    for &i in &eval.selected {
        let tr = &eval.traces[i];
        let act = &tr.activations;
        let d_vhat = 2.0 * (tr.v_hat - batch[i].v_applied) / n;

        // softplus output
        let d_out = d_vhat * sigmoid(act.head_out);
        g.head_b2[0] += d_out;
        let mut d_pre_head = vec![0.0; c.head_hidden];
        for k in 0..c.head_hidden {
            let h = act.head_hidden[k];
            g.head_w2[k] += d_out * h;
            d_pre_head[k] = d_out * t.head_w2[k] * (1.0 - h * h);
        }
        let mut d_ctx = vec![0.0; c.d_v];
        for k in 0..c.head_hidden {
            let dp = d_pre_head[k];
            g.head_b1[k] += dp;
            let row = &t.head_w1[k * c.d_v..(k + 1) * c.d_v];
            let grow = &mut g.head_w1[k * c.d_v..(k + 1) * c.d_v];
            for j in 0..c.d_v {
                grow[j] += dp * tr.context[j];
                d_ctx[j] += row[j] * dp;
            }
        }

        // context = sum_i a_i token_i, a = softmax(logits)
        let tokens = &tr.visual_tokens;
        let a = &tr.attention_weights;
        let d_a: Vec<f64> = (0..tokens.n_v)
            .map(|v| tokens.token(v).iter().zip(&d_ctx).map(|(x, y)| x * y).sum())
            .collect();
        let weighted: f64 = a.iter().zip(&d_a).map(|(x, y)| x * y).sum();
        let mut d_query = vec![0.0; c.d_v];
        for v in 0..tokens.n_v {
            let d_logit = a[v] * (d_a[v] - weighted) * inv_sqrt;
            for (dq, x) in d_query.iter_mut().zip(tokens.token(v)) {
                *dq += d_logit * x;
            }
        }

        // query = Wq f
        let f = &tr.proprio_features;
        let mut d_f = vec![0.0; c.d_p];
        for j in 0..c.d_v {
            let dq = d_query[j];
            let row = &t.query[j * c.d_p..(j + 1) * c.d_p];
            let grow = &mut g.query[j * c.d_p..(j + 1) * c.d_p];
            for m in 0..c.d_p {
                grow[m] += dq * f[m];
                d_f[m] += row[m] * dq;
            }
        }

        // f = tanh(W2 h + b2)
        let hid = &act.encoder_hidden;
        let mut d_hid = vec![0.0; c.encoder_hidden];
        for m in 0..c.d_p {
            let dp = d_f[m] * (1.0 - f[m] * f[m]);
            g.enc_b2[m] += dp;
            let row = &t.enc_w2[m * c.encoder_hidden..(m + 1) * c.encoder_hidden];
            let grow = &mut g.enc_w2[m * c.encoder_hidden..(m + 1) * c.encoder_hidden];
            for h in 0..c.encoder_hidden {
                grow[h] += dp * hid[h];
                d_hid[h] += row[h] * dp;
            }
        }

        // h = tanh(W1 x + b1)
        let x = &act.scaled_input;
        for h in 0..c.encoder_hidden {
            let dp = d_hid[h] * (1.0 - hid[h] * hid[h]);
            g.enc_b1[h] += dp;
            let grow = &mut g.enc_w1[h * c.d_p..(h + 1) * c.d_p];
            for p in 0..c.d_p {
                grow[p] += dp * x[p];
            }
        }
    }

    g.alpha_raw[0] = -eval.losses.slip_loss * sigmoid(t.alpha_raw[0]);

    if let Some(param) = g.first_non_finite() {
        return Err(Error::NumericFailure {
            param: param.to_string(),
            last_checkpoint: None,
        });
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ModelConfig;
    use crate::simworld::{Observation, OBSERVATION_LEN};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(params: &ModelParams, n: usize, seed: u64) -> Vec<Example> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let image = Observation {
                    data: (0..OBSERVATION_LEN).map(|_| rng.random::<f32>()).collect(),
                };
                let seq = Sequence {
                    image,
                    proprio: (0..60)
                        .map(|_| rng.random_range(-1.0f32..1.0) * 3.0)
                        .collect(),
                    v_applied: rng.random_range(0.3..2.5),
                    mean_slip: rng.random_range(0.0..0.5),
                    source: crate::dataset::SequenceSource {
                        run_id: 0,
                        window: 0,
                    },
                };
                Example::from_sequence(&seq, params).unwrap()
            })
            .collect()
    }

    #[test]
    fn clamped_batch_has_zero_gradient() {
        let mut params = ModelParams::new(ModelConfig::default()).unwrap();
        params.trainable.alpha_raw[0] = 9.0;
        let batch = random_batch(&params, 6, 1);
        let refs: Vec<&Example> = batch.iter().collect();
        let mut eval = evaluate_batch(&params, &refs, 0.5).unwrap();
        // force the clamp regardless of the random labels
        eval.losses = LossBreakdown::from_parts(0.01, 0.5, 1.0);
        let g = backward(&eval, &refs, &params).unwrap();
        assert!(g.is_all_zero());
    }

    #[test]
    fn unselected_sequences_do_not_contribute() {
        let params = ModelParams::new(ModelConfig::default()).unwrap();
        let mut batch = random_batch(&params, 4, 2);
        for (i, e) in batch.iter_mut().enumerate() {
            e.mean_slip = [0.05, 0.4, 0.1, 0.45][i];
        }
        let refs: Vec<&Example> = batch.iter().collect();
        let eval = evaluate_batch(&params, &refs, 0.5).unwrap();
        assert_eq!(eval.selected, vec![0, 2]);
        let g_full = backward(&eval, &refs, &params).unwrap();

        let mut changed = batch.clone();
        changed[1].v_applied += 1.0;
        changed[3].v_applied -= 0.2;
        let refs2: Vec<&Example> = changed.iter().collect();
        let eval2 = evaluate_batch(&params, &refs2, 0.5).unwrap();
        assert_eq!(backward(&eval2, &refs2, &params).unwrap(), g_full);
    }
}
