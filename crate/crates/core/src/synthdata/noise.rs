use rand::Rng;

/// Smooth lattice value noise on a periodic 256x256 grid.
pub(crate) struct ValueNoise {
    lattice: Vec<f64>,
}

const N: usize = 256;

impl ValueNoise {
    pub fn new(rng: &mut impl Rng) -> Self {
        Self {
            lattice: (0..N * N).map(|_| rng.gen::<f64>()).collect(),
        }
    }

    fn at(&self, x: i64, y: i64) -> f64 {
        let (x, y) = (x.rem_euclid(N as i64) as usize, y.rem_euclid(N as i64) as usize);
        self.lattice[y * N + x]
    }

    /// In `[0, 1]`.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let s = |t: f64| t * t * (3.0 - 2.0 * t);
        let (sx, sy) = (s(fx), s(fy));
        let (ix, iy) = (x0 as i64, y0 as i64);
        let top = self.at(ix, iy) * (1.0 - sx) + self.at(ix + 1, iy) * sx;
        let bottom = self.at(ix, iy + 1) * (1.0 - sx) + self.at(ix + 1, iy + 1) * sx;
        top * (1.0 - sy) + bottom * sy
    }

    /// Fractal sum normalised to `[0, 1]`.
    pub fn fbm(&self, x: f64, y: f64, octaves: u32) -> f64 {
        let (mut sum, mut norm, mut amp, mut freq) = (0.0, 0.0, 1.0, 1.0);
        for o in 0..octaves {
            // decorrelate octaves by offsetting the lattice
            let off = 37.0 * o as f64;
            sum += amp * self.sample(x * freq + off, y * freq - off);
            norm += amp;
            amp *= 0.5;
            freq *= 2.0;
        }
        sum / norm
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn noise_is_bounded_and_continuous() {
        let n = ValueNoise::new(&mut ChaCha8Rng::seed_from_u64(1));
        for i in 0..2000 {
            let (x, y) = (i as f64 * 0.173, i as f64 * 0.071);
            let v = n.fbm(x, y, 4);
            assert!((0.0..=1.0).contains(&v));
            assert!((n.sample(x, y) - n.sample(x + 1e-7, y)).abs() < 1e-5);
        }
    }
}
