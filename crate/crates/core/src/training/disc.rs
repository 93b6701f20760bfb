use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linearnet::{Bound, ParamStore, LEAKY_SLOPE};
use crate::scalar::Scalar;
use crate::tensor::{concat_channels, Checkpoint, Graph, Result, Var};

use crate::linearnet::params::Conv;

/// Image scales seen by the discriminator: full, 1/2, 1/4.
pub const DISC_SCALES: usize = 3;
/// Image plus the diffuse and specular Phong conditioning maps.
pub const DISC_INPUT_CHANNELS: usize = 9;
const DISC_CHANNELS: [usize; 3] = [16, 32, 64];

/// Multi-scale patch discriminator conditioned on Phong features. Each
/// scale has three strided convolutions with LeakyReLU and a one-channel
/// score layer.
pub struct Discriminator<S: Scalar> {
    pub store: ParamStore<S>,
    scales: Vec<[Conv; 4]>,
}

impl<S: Scalar> Discriminator<S> {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let scales = (0..DISC_SCALES)
            .map(|s| {
                let mut c_in = DISC_INPUT_CHANNELS;
                let mut layers = Vec::with_capacity(4);
                for (l, &c) in DISC_CHANNELS.iter().enumerate() {
                    layers.push(Conv::new(&mut store, &mut rng, &format!("disc.{s}.{l}"), c_in, c, 3, 2, Some(0.0)));
                    c_in = c;
                }
                layers.push(Conv::new(&mut store, &mut rng, &format!("disc.{s}.score"), c_in, 1, 3, 1, Some(0.0)));
                layers.try_into().expect("four layers")
            })
            .collect();
        Self { store, scales }
    }

    pub fn bind<'g>(&self, graph: &'g Graph<S>, trainable: bool) -> Bound<'g, S> {
        self.store.bind(graph, trainable)
    }

    /// One score map per scale for an image `[3, H, W]` and its Phong
    /// conditioning `[6, H, W]`; `H` and `W` must be divisible by 4.
    pub fn forward<'g>(&self, p: &Bound<'g, S>, image: Var<'g, S>, conditioning: Var<'g, S>) -> Result<Vec<Var<'g, S>>> {
        let mut x = concat_channels(&[image, conditioning])?;
        let mut out = Vec::with_capacity(DISC_SCALES);
        for (s, layers) in self.scales.iter().enumerate() {
            if s > 0 {
                x = x.avg_pool2x()?;
            }
            let mut h = x;
            for conv in &layers[..3] {
                h = conv.forward(p, h)?.leaky_relu(S::lit(LEAKY_SLOPE));
            }
            out.push(layers[3].forward(p, h)?);
        }
        Ok(out)
    }

    pub fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> std::result::Result<(), String> {
        self.store.load_records(&ckpt.records, "")
    }
}
