use super::params::ModelParams;
use crate::dataset::Sequence;
use crate::simworld::{Observation, ProprioState, IMAGE_CHANNELS, OBSERVATION_LEN};
use crate::util::softplus;
use crate::{Error, Result};

/// `n_v x d_v` visual tokens, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualTokens {
    pub n_v: usize,
    pub d_v: usize,
    pub data: Vec<f64>,
}

impl VisualTokens {
    pub fn token(&self, i: usize) -> &[f64] {
        &self.data[i * self.d_v..(i + 1) * self.d_v]
    }
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    /// Proprio input divided by its nominal scale.
    pub scaled_input: Vec<f64>,
    /// `tanh` output of the first encoder layer.
    pub encoder_hidden: Vec<f64>,
    pub query: Vec<f64>,
    /// `tanh` output of the head's hidden layer.
    pub head_hidden: Vec<f64>,
    /// Head output before the softplus.
    pub head_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub visual_tokens: VisualTokens,
    pub proprio_features: Vec<f64>,
    pub attention_weights: Vec<f64>,
    pub context: Vec<f64>,
    pub confidence: f64,
    pub v_hat: f64,
    /// Selection key; equal to `confidence`.
    pub score: f64,
    pub activations: Activations,
}

#[inline]
pub(crate) fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut Vec<f64>) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    out.clear();
    out.extend(
        w.chunks_exact(cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()),
    );
}

/// Splits the image into non-overlapping patches and projects each one.
pub fn tokenize_image(image: &Observation, params: &ModelParams) -> Result<VisualTokens> {
    if image.data.len() != OBSERVATION_LEN {
        return Err(Error::invalid(format!(
            "image must have {OBSERVATION_LEN} values, got {}",
            image.data.len()
        )));
    }
    let c = params.config();
    let side = c.patches_per_side();
    let patch_dim = c.patch_dim();
    let proj = params.tokenizer().projection();
    let mut data = Vec::with_capacity(c.n_v * c.d_v);
    let mut patch = Vec::with_capacity(patch_dim);
    let mut token = Vec::with_capacity(c.d_v);
    for pr in 0..side {
        for pc in 0..side {
            patch.clear();
            for py in 0..c.patch {
                let row = pr * c.patch + py;
                let start = (row * c.image_size + pc * c.patch) * IMAGE_CHANNELS;
                patch.extend(
                    image.data[start..start + c.patch * IMAGE_CHANNELS]
                        .iter()
                        .map(|&v| v as f64),
                );
            }
            matvec(proj, c.d_v, patch_dim, &patch, &mut token);
            data.extend_from_slice(&token);
        }
    }
    Ok(VisualTokens {
        n_v: c.n_v,
        d_v: c.d_v,
        data,
    })
}

/// Two `tanh` layers mapping the proprio vector to features of the same width.
///
/// Returns `(features, scaled_input, encoder_hidden)`.
pub fn encode_proprio(
    proprio: &[f64],
    params: &ModelParams,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let c = params.config();
    if proprio.len() != c.d_p {
        return Err(Error::invalid(format!(
            "proprio must have {} values, got {}",
            c.d_p,
            proprio.len()
        )));
    }
    if let Some(i) = proprio.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "proprio coordinate {i} is not finite"
        )));
    }
    let t = &params.trainable;
    let scale = ProprioState::nominal_scale();
    let scaled: Vec<f64> = proprio
        .iter()
        .zip(scale.iter())
        .map(|(v, s)| v / s)
        .collect();
    let mut hidden = Vec::new();
    matvec(&t.enc_w1, c.encoder_hidden, c.d_p, &scaled, &mut hidden);
    for (h, b) in hidden.iter_mut().zip(&t.enc_b1) {
        *h = (*h + b).tanh();
    }
    let mut features = Vec::new();
    matvec(&t.enc_w2, c.d_p, c.encoder_hidden, &hidden, &mut features);
    for (f, b) in features.iter_mut().zip(&t.enc_b2) {
        *f = (*f + b).tanh();
    }
    Ok((features, scaled, hidden))
}

/// Scaled dot-product attention of a projected proprio query over the visual tokens.
///
/// Returns `(attention_weights, context, query)`.
pub fn attend(
    proprio_features: &[f64],
    tokens: &VisualTokens,
    params: &ModelParams,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let c = params.config();
    if proprio_features.len() != c.d_p
        || tokens.d_v != c.d_v
        || tokens.data.len() != tokens.n_v * c.d_v
    {
        return Err(Error::invalid("attend: shape mismatch"));
    }
    let mut query = Vec::new();
    matvec(
        &params.trainable.query,
        c.d_v,
        c.d_p,
        proprio_features,
        &mut query,
    );
    let inv_sqrt = 1.0 / (c.d_v as f64).sqrt();
    let logits: Vec<f64> = (0..tokens.n_v)
        .map(|i| {
            tokens
                .token(i)
                .iter()
                .zip(&query)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                * inv_sqrt
        })
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut context = vec![0.0; c.d_v];
    for (i, w) in weights.iter().enumerate() {
        for (acc, v) in context.iter_mut().zip(tokens.token(i)) {
            *acc += w * v;
        }
    }
    Ok((weights, context, query))
}

pub(crate) fn confidence_from_slip(mean_slip: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&mean_slip) {
        return Err(Error::invalid(format!("slip {mean_slip} outside [0, 1]")));
    }
    Ok(1.0 - mean_slip)
}

/// `1 - mean_slip`: low slip means a trustworthy velocity label.
pub fn confidence(sequence: &Sequence) -> Result<f64> {
    confidence_from_slip(sequence.mean_slip)
}

/// Forward pass from precomputed visual tokens.
pub fn forward_with_tokens(
    tokens: VisualTokens,
    proprio: &[f64],
    mean_slip: f64,
    params: &ModelParams,
) -> Result<ForwardTrace> {
    let confidence = confidence_from_slip(mean_slip)?;
    let (features, scaled_input, encoder_hidden) = encode_proprio(proprio, params)?;
    let (attention, context, query) = attend(&features, &tokens, params)?;
    let c = params.config();
    let t = &params.trainable;
    let mut head_hidden = Vec::new();
    matvec(&t.head_w1, c.head_hidden, c.d_v, &context, &mut head_hidden);
    for (h, b) in head_hidden.iter_mut().zip(&t.head_b1) {
        *h = (*h + b).tanh();
    }
    let head_out = head_hidden
        .iter()
        .zip(&t.head_w2)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        + t.head_b2[0];
    Ok(ForwardTrace {
        visual_tokens: tokens,
        proprio_features: features,
        attention_weights: attention,
        context,
        confidence,
        v_hat: softplus(head_out),
        score: confidence,
        activations: Activations {
            scaled_input,
            encoder_hidden,
            query,
            head_hidden,
            head_out,
        },
    })
}

/// Full forward pass: tokenize, encode, attend, predict.
pub fn forward(sequence: &Sequence, params: &ModelParams) -> Result<ForwardTrace> {
    let tokens = tokenize_image(&sequence.image, params)?;
    forward_with_tokens(tokens, &sequence.proprio_f64(), sequence.mean_slip, params)
}

/// Number of sequences kept from a batch of `n` at the given fraction.
pub fn selection_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).ceil() as usize).clamp(1.min(n), n)
}

/// Positions of the `k` highest-scoring traces, ties going to the lower
/// position, returned in ascending order.
pub fn select(traces: &[ForwardTrace], k: usize) -> Vec<usize> {
    let scores: Vec<f64> = traces.iter().map(|t| t.score).collect();
    select_by_score(&scores, k)
}

pub fn select_by_score(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k.min(scores.len()));
    order.sort_unstable();
    order
}
