//! Small end-to-end check: a 64-16-10 MLP on synthetic 8x8 digits, run with
//! exact integer MACs and with stochastic MACs through the engine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mac::{MacConfig, MacEngine, Term};

const GLYPHS: [[&str; 8]; 10] = [
    ["..####..", ".##..##.", ".##..##.", ".##..##.", ".##..##.", ".##..##.", "..####..", "........"],
    ["...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "..####..", "........"],
    ["..####..", ".##..##.", ".....##.", "....##..", "...##...", "..##....", ".######.", "........"],
    ["..####..", ".##..##.", ".....##.", "...###..", ".....##.", ".##..##.", "..####..", "........"],
    ["....##..", "...###..", "..####..", ".##.##..", ".######.", "....##..", "....##..", "........"],
    [".######.", ".##.....", ".#####..", ".....##.", ".....##.", ".##..##.", "..####..", "........"],
    ["..####..", ".##.....", ".#####..", ".##..##.", ".##..##.", ".##..##.", "..####..", "........"],
    [".######.", ".....##.", "....##..", "...##...", "..##....", "..##....", "..##....", "........"],
    ["..####..", ".##..##.", ".##..##.", "..####..", ".##..##.", ".##..##.", "..####..", "........"],
    ["..####..", ".##..##.", ".##..##.", "..#####.", ".....##.", "....##..", "..###...", "........"],
];

pub const INPUTS: usize = 64;
pub const HIDDEN: usize = 16;
pub const CLASSES: usize = 10;

/// One noisy 8-bit image: glyph shifted by up to one pixel, pixels flipped
/// with probability 0.05, intensities jittered.
fn sample(rng: &mut ChaCha8Rng, class: usize) -> [u8; INPUTS] {
    let dx: i32 = rng.gen_range(-1..=1);
    let dy: i32 = rng.gen_range(-1..=1);
    let mut img = [0u8; INPUTS];
    for y in 0..8i32 {
        for x in 0..8i32 {
            let (sx, sy) = (x - dx, y - dy);
            let on = (0..8).contains(&sx)
                && (0..8).contains(&sy)
                && GLYPHS[class][sy as usize].as_bytes()[sx as usize] == b'#';
            let on = on ^ rng.gen_bool(0.05);
            img[(y * 8 + x) as usize] =
                if on { rng.gen_range(170..=255) } else { rng.gen_range(0..=50) };
        }
    }
    img
}

pub fn dataset(n: usize, seed: u64) -> Vec<([u8; INPUTS], usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| (sample(&mut rng, i % CLASSES), i % CLASSES)).collect()
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub w1: Vec<[f64; INPUTS]>,
    pub b1: Vec<f64>,
    pub w2: Vec<[f64; HIDDEN]>,
    pub b2: Vec<f64>,
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}

impl Mlp {
    pub fn train(data: &[([u8; INPUTS], usize)], epochs: usize, lr: f64, seed: u64) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r1 = (6.0 / (INPUTS + HIDDEN) as f64).sqrt();
        let r2 = (6.0 / (HIDDEN + CLASSES) as f64).sqrt();
        let mut m = Mlp {
            w1: (0..HIDDEN).map(|_| std::array::from_fn(|_| rng.gen_range(-r1..r1))).collect(),
            b1: vec![0.0; HIDDEN],
            w2: (0..CLASSES).map(|_| std::array::from_fn(|_| rng.gen_range(-r2..r2))).collect(),
            b2: vec![0.0; CLASSES],
        };
        let mut order: Vec<usize> = (0..data.len()).collect();
        for _ in 0..epochs {
            for i in (1..order.len()).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            for &k in &order {
                let (img, y) = &data[k];
                let x: Vec<f64> = img.iter().map(|&p| p as f64 / 255.0).collect();
                let h: Vec<f64> = (0..HIDDEN)
                    .map(|j| {
                        (m.b1[j] + m.w1[j].iter().zip(&x).map(|(w, v)| w * v).sum::<f64>()).max(0.0)
                    })
                    .collect();
                let z: Vec<f64> = (0..CLASSES)
                    .map(|c| m.b2[c] + m.w2[c].iter().zip(&h).map(|(w, v)| w * v).sum::<f64>())
                    .collect();
                let zmax = z.iter().cloned().fold(f64::MIN, f64::max);
                let e: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
                let s: f64 = e.iter().sum();
                let dz: Vec<f64> =
                    (0..CLASSES).map(|c| e[c] / s - f64::from(u8::from(c == *y))).collect();
                let mut dh = [0.0; HIDDEN];
                for c in 0..CLASSES {
                    for j in 0..HIDDEN {
                        dh[j] += dz[c] * m.w2[c][j];
                        m.w2[c][j] -= lr * dz[c] * h[j];
                    }
                    m.b2[c] -= lr * dz[c];
                }
                for j in 0..HIDDEN {
                    if h[j] <= 0.0 {
                        continue;
                    }
                    for i in 0..INPUTS {
                        m.w1[j][i] -= lr * dh[j] * x[i];
                    }
                    m.b1[j] -= lr * dh[j];
                }
            }
        }
        m
    }

    pub fn predict(&self, img: &[u8; INPUTS]) -> usize {
        let x: Vec<f64> = img.iter().map(|&p| p as f64 / 255.0).collect();
        let h: Vec<f64> = (0..HIDDEN)
            .map(|j| (self.b1[j] + self.w1[j].iter().zip(&x).map(|(w, v)| w * v).sum::<f64>()).max(0.0))
            .collect();
        let z: Vec<f64> = (0..CLASSES)
            .map(|c| self.b2[c] + self.w2[c].iter().zip(&h).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        argmax(&z)
    }
}

/// Sign-magnitude 8-bit weights of one layer: `w ~ sign * q / scale`.
struct QLayer {
    q: Vec<Vec<(u32, i8)>>,
    scale: f64,
    bias: Vec<f64>,
}

fn quantize(rows: Vec<Vec<f64>>, bias: &[f64]) -> QLayer {
    let max = rows.iter().flatten().fold(0.0f64, |m, w| m.max(w.abs())).max(1e-12);
    let scale = 255.0 / max;
    let q = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|&w| ((w.abs() * scale).round().min(255.0) as u32, if w < 0.0 { -1 } else { 1 }))
                .collect()
        })
        .collect();
    QLayer { q, scale, bias: bias.to_vec() }
}

/// How a quantised dot product is evaluated; returns `sum(sign * x * q) / 256`.
trait Mac {
    fn dot(&mut self, x: &[u32], w: &[(u32, i8)]) -> Result<f64>;
}

struct Exact;

impl Mac for Exact {
    fn dot(&mut self, x: &[u32], w: &[(u32, i8)]) -> Result<f64> {
        Ok(x.iter().zip(w).map(|(&a, &(b, s))| s as f64 * (a * b) as f64).sum::<f64>() / 256.0)
    }
}

struct Stochastic(MacEngine);

impl Mac for Stochastic {
    fn dot(&mut self, x: &[u32], w: &[(u32, i8)]) -> Result<f64> {
        let terms: Vec<Term> =
            x.iter().zip(w).map(|(&a, &(b, s))| Term::signed(a, b, s)).collect();
        Ok(self.0.dot_product(&terms)?.value as f64)
    }
}

struct Quantized {
    l1: QLayer,
    l2: QLayer,
    /// Hidden activation mapped to 255.
    h_max: f64,
}

impl Quantized {
    fn new(m: &Mlp, calib: &[([u8; INPUTS], usize)]) -> Quantized {
        let l1 = quantize(m.w1.iter().map(|r| r.to_vec()).collect(), &m.b1);
        let l2 = quantize(m.w2.iter().map(|r| r.to_vec()).collect(), &m.b2);
        let mut q = Quantized { l1, l2, h_max: 1.0 };
        let mut h_max = 1e-9f64;
        for (img, _) in calib {
            let h = q.hidden(&mut Exact, img).expect("exact MAC is infallible");
            h_max = h.iter().cloned().fold(h_max, f64::max);
        }
        q.h_max = h_max;
        q
    }

    fn hidden(&self, mac: &mut dyn Mac, img: &[u8; INPUTS]) -> Result<Vec<f64>> {
        let x: Vec<u32> = img.iter().map(|&p| p as u32).collect();
        (0..HIDDEN)
            .map(|j| {
                let acc = mac.dot(&x, &self.l1.q[j])? * 256.0 / (255.0 * self.l1.scale);
                Ok((acc + self.l1.bias[j]).max(0.0))
            })
            .collect()
    }

    fn predict(&self, mac: &mut dyn Mac, img: &[u8; INPUTS]) -> Result<usize> {
        let h = self.hidden(mac, img)?;
        let hq: Vec<u32> =
            h.iter().map(|v| (v / self.h_max * 255.0).round().clamp(0.0, 255.0) as u32).collect();
        let z: Vec<f64> = (0..CLASSES)
            .map(|c| {
                let acc = mac.dot(&hq, &self.l2.q[c])? * 256.0 * self.h_max
                    / (255.0 * self.l2.scale);
                Ok(acc + self.l2.bias[c])
            })
            .collect::<Result<_>>()?;
        Ok(argmax(&z))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpReport {
    pub samples: usize,
    pub float_accuracy: f64,
    pub exact_accuracy: f64,
    pub sc_accuracy: f64,
}

impl MlpReport {
    /// Exact-MAC accuracy minus SC-MAC accuracy.
    pub fn drop(&self) -> f64 {
        self.exact_accuracy - self.sc_accuracy
    }
}

/// Trains on 1000 samples and evaluates 500 held-out samples with float,
/// exact 8-bit and stochastic 8-bit MACs. `cfg` is forced to signed mode.
pub fn mlp_check(seed: u64, cfg: &MacConfig) -> Result<MlpReport> {
    if cfg.width != 8 {
        return Err(Error::Config("the MLP check quantises to 8 bits".into()));
    }
    let train = dataset(1000, seed);
    let test = dataset(500, seed.wrapping_add(1));
    let model = Mlp::train(&train, 30, 0.02, seed);
    let q = Quantized::new(&model, &train);
    let mut sc_cfg = cfg.clone();
    sc_cfg.signed = true;
    let mut sc = Stochastic(MacEngine::new(sc_cfg)?);
    let (mut f, mut e, mut s) = (0, 0, 0);
    for (img, y) in &test {
        f += usize::from(model.predict(img) == *y);
        e += usize::from(q.predict(&mut Exact, img)? == *y);
        s += usize::from(q.predict(&mut sc, img)? == *y);
    }
    let n = test.len() as f64;
    Ok(MlpReport {
        samples: test.len(),
        float_accuracy: f as f64 / n,
        exact_accuracy: e as f64 / n,
        sc_accuracy: s as f64 / n,
    })
}
