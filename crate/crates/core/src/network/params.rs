use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::simworld::{IMAGE_CHANNELS, IMAGE_SIZE, PROPRIO_DIM};
use crate::util::{round_f32, softplus, softplus_inv};
use crate::{Error, Result};

/// Initial value of the slip-penalty weight before any training.
pub(crate) const ALPHA_INIT: f64 = 0.1;
/// Upper bound kept on the slip-penalty weight during training.
pub const ALPHA_MAX: f64 = 10.0;

/// Shapes and seeds of a model. Hashed into every checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of visual tokens.
    pub n_v: usize,
    /// Visual token width.
    pub d_v: usize,
    /// Proprioceptive input width.
    pub d_p: usize,
    pub patch: usize,
    pub image_size: usize,
    pub encoder_hidden: usize,
    pub head_hidden: usize,
    pub tokenizer_seed: u64,
    pub param_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_v: 16,
            d_v: 64,
            d_p: PROPRIO_DIM,
            patch: 16,
            image_size: IMAGE_SIZE,
            encoder_hidden: 60,
            head_hidden: 32,
            tokenizer_seed: 0x7061_6e6f_735f_7476,
            param_seed: 1,
        }
    }
}

impl ModelConfig {
    pub fn patch_dim(&self) -> usize {
        self.patch * self.patch * IMAGE_CHANNELS
    }

    pub fn patches_per_side(&self) -> usize {
        self.image_size / self.patch
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch == 0 || !self.image_size.is_multiple_of(self.patch) {
            return Err(Error::invalid(
                "image size must be a multiple of the patch size",
            ));
        }
        if self.patches_per_side().pow(2) != self.n_v {
            return Err(Error::invalid(format!(
                "n_v = {} does not match {} patches",
                self.n_v,
                self.patches_per_side().pow(2)
            )));
        }
        if self.image_size != IMAGE_SIZE || self.d_p != PROPRIO_DIM {
            return Err(Error::invalid(
                "image size and d_p are fixed by the simulator",
            ));
        }
        if self.d_v == 0 || self.encoder_hidden == 0 || self.head_hidden == 0 {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("model config serializes");
        crate::util::sha256(&bytes)
    }

    pub fn config_hash_hex(&self) -> String {
        hex::encode(self.config_hash())
    }
}

/// Frozen linear patch projection (`d_v x patch_dim`, row-major), no offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Tokenizer {
    projection: Vec<f64>,
}

impl Tokenizer {
    pub fn seeded(config: &ModelConfig) -> Self {
        let fan_in = config.patch_dim();
        let bound = (3.0 / fan_in as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(config.tokenizer_seed);
        let projection = (0..config.d_v * fan_in)
            .map(|_| round_f32(rng.random_range(-bound..bound)))
            .collect();
        Tokenizer { projection }
    }

    pub(crate) fn from_raw(projection: Vec<f64>) -> Self {
        Tokenizer { projection }
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }
}

/// All trainable parameters; also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainable {
    /// `encoder_hidden x d_p`
    pub enc_w1: Vec<f64>,
    pub enc_b1: Vec<f64>,
    /// `d_p x encoder_hidden`
    pub enc_w2: Vec<f64>,
    pub enc_b2: Vec<f64>,
    /// `d_v x d_p`
    pub query: Vec<f64>,
    /// `head_hidden x d_v`
    pub head_w1: Vec<f64>,
    pub head_b1: Vec<f64>,
    pub head_w2: Vec<f64>,
    pub head_b2: Vec<f64>,
    /// Single value; the slip weight is `softplus(alpha_raw)`.
    pub alpha_raw: Vec<f64>,
}

impl Trainable {
    pub const BLOCK_NAMES: [&'static str; 10] = [
        "enc_w1",
        "enc_b1",
        "enc_w2",
        "enc_b2",
        "query",
        "head_w1",
        "head_b1",
        "head_w2",
        "head_b2",
        "alpha_raw",
    ];

    pub fn zeros(c: &ModelConfig) -> Self {
        Trainable {
            enc_w1: vec![0.0; c.encoder_hidden * c.d_p],
            enc_b1: vec![0.0; c.encoder_hidden],
            enc_w2: vec![0.0; c.d_p * c.encoder_hidden],
            enc_b2: vec![0.0; c.d_p],
            query: vec![0.0; c.d_v * c.d_p],
            head_w1: vec![0.0; c.head_hidden * c.d_v],
            head_b1: vec![0.0; c.head_hidden],
            head_w2: vec![0.0; c.head_hidden],
            head_b2: vec![0.0; 1],
            alpha_raw: vec![0.0; 1],
        }
    }

    pub fn blocks(&self) -> [(&'static str, &Vec<f64>); 10] {
        [
            ("enc_w1", &self.enc_w1),
            ("enc_b1", &self.enc_b1),
            ("enc_w2", &self.enc_w2),
            ("enc_b2", &self.enc_b2),
            ("query", &self.query),
            ("head_w1", &self.head_w1),
            ("head_b1", &self.head_b1),
            ("head_w2", &self.head_w2),
            ("head_b2", &self.head_b2),
            ("alpha_raw", &self.alpha_raw),
        ]
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut Vec<f64>); 10] {
        [
            ("enc_w1", &mut self.enc_w1),
            ("enc_b1", &mut self.enc_b1),
            ("enc_w2", &mut self.enc_w2),
            ("enc_b2", &mut self.enc_b2),
            ("query", &mut self.query),
            ("head_w1", &mut self.head_w1),
            ("head_b1", &mut self.head_b1),
            ("head_w2", &mut self.head_w2),
            ("head_b2", &mut self.head_b2),
            ("alpha_raw", &mut self.alpha_raw),
        ]
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fill(&mut self, value: f64) {
        for (_, b) in self.blocks_mut() {
            b.fill(value);
        }
    }

    /// Name of the first block holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.blocks()
            .into_iter()
            .find(|(_, b)| b.iter().any(|v| !v.is_finite()))
            .map(|(name, _)| name)
    }

    pub fn is_all_zero(&self) -> bool {
        self.blocks()
            .iter()
            .all(|(_, b)| b.iter().all(|&v| v == 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    tokenizer: Tokenizer,
    pub trainable: Trainable,
}

impl ModelParams {
    /// Seeded initialization: weights uniform in `+-1/sqrt(fan_in)`, zero biases.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let tokenizer = Tokenizer::seeded(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.param_seed);
        let mut t = Trainable::zeros(&config);
        let mut init = |w: &mut Vec<f64>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in w.iter_mut() {
                *v = round_f32(rng.random_range(-bound..bound));
            }
        };
        init(&mut t.enc_w1, config.d_p);
        init(&mut t.enc_w2, config.encoder_hidden);
        init(&mut t.query, config.d_p);
        init(&mut t.head_w1, config.d_v);
        init(&mut t.head_w2, config.head_hidden);
        t.alpha_raw[0] = round_f32(softplus_inv(ALPHA_INIT));
        Ok(ModelParams {
            config,
            tokenizer,
            trainable: t,
        })
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        tokenizer: Tokenizer,
        trainable: Trainable,
    ) -> Self {
        ModelParams {
            config,
            tokenizer,
            trainable,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn alpha(&self) -> f64 {
        softplus(self.trainable.alpha_raw[0])
    }
}
