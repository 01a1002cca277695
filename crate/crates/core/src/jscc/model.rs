use jscc_nn::{Graph, ParameterStore, Tensor, Var, ZERO_INDEX};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::frontend::CsiMode;
use crate::linalg::{ComplexMatrix, RngStream};

pub const LN_EPS: f64 = 1e-5;
/// Hidden width of the residual equalizer.
pub const RESIDUAL_HIDDEN: usize = 128;
const PRELU_INIT: f64 = 0.25;

struct Init<'a> {
    store: ParameterStore,
    rng: &'a mut RngStream,
}

impl Init<'_> {
    fn weight(&mut self, name: String, fan_in: usize, fan_out: usize) {
        let t = Tensor::uniform_fan_in(vec![fan_in, fan_out], fan_in, &mut *self.rng);
        self.store.insert(name, t);
    }

    fn bias(&mut self, name: String, n: usize) {
        self.store.insert(name, Tensor::zeros(vec![1, n]));
    }

    fn dense(&mut self, prefix: &str, fan_in: usize, fan_out: usize) {
        self.weight(format!("{prefix}.w"), fan_in, fan_out);
        self.bias(format!("{prefix}.b"), fan_out);
    }

    fn layer_norm(&mut self, prefix: &str, d: usize) {
        self.store
            .insert(format!("{prefix}.gamma"), Tensor::filled(vec![1, d], 1.0));
        self.store.insert(format!("{prefix}.beta"), Tensor::zeros(vec![1, d]));
    }

    fn transformer(&mut self, prefix: &str, cfg: &ModelConfig) {
        let (d, ds) = (cfg.d, cfg.d_head());
        for i in 0..cfg.depth {
            let p = format!("{prefix}.layers.{i}");
            self.layer_norm(&format!("{p}.ln1"), d);
            for h in 0..cfg.n_heads {
                for kind in ["q", "k", "v"] {
                    self.weight(format!("{p}.attn.{kind}.{h}"), d, ds);
                }
            }
            self.weight(format!("{p}.attn.out.w"), d, d);
            self.layer_norm(&format!("{p}.ln2"), d);
            self.dense(&format!("{p}.mlp.fc1"), d, cfg.mlp_hidden());
            self.dense(&format!("{p}.mlp.fc2"), cfg.mlp_hidden(), d);
        }
    }
}

/// Fresh parameters: weights uniform in `±1/√fan_in`, biases zero, layer-norm
/// gains one, PReLU slope 0.25.
pub fn init_params(cfg: &ModelConfig, rng: &mut RngStream) -> Result<ParameterStore> {
    cfg.validate()?;
    let mut init = Init {
        store: ParameterStore::new(),
        rng,
    };
    let (d, cols) = (cfg.d, cfg.cols());

    init.dense("enc.pos", 1, d);
    init.weight("enc.w0".into(), cfg.enc_in(), d);
    init.transformer("enc", cfg);
    init.weight("enc.head.w".into(), d, cols);

    init.dense("dec.siam.fc1", 2 * cols, d);
    init.dense("dec.siam.fc2", d, d);
    init.dense("dec.siam.merge", 2 * d, d);
    init.dense("dec.pos", 1, d);
    init.transformer("dec", cfg);
    init.dense("dec.out", d, cfg.c());

    if cfg.mode == CsiMode::Csir {
        let m = cfg.m_max;
        init.dense("res.fc1", 2 * m * m + 2 * m, RESIDUAL_HIDDEN);
        init.store
            .insert("res.prelu.alpha", Tensor::filled(vec![1, 1], PRELU_INIT));
        init.dense("res.fc2", RESIDUAL_HIDDEN, 2 * m);
    }
    Ok(init.store)
}

fn p(g: &mut Graph, s: &ParameterStore, name: &str) -> Result<Var> {
    Ok(g.param(s, name)?)
}

/// Pre-norm block: multi-head self-attention with residual, then a GeLU MLP
/// with residual.
pub fn transformer_layer(
    g: &mut Graph,
    s: &ParameterStore,
    prefix: &str,
    cfg: &ModelConfig,
    x: Var,
) -> Result<Var> {
    let (ga, be) = (p(g, s, &format!("{prefix}.ln1.gamma"))?, p(g, s, &format!("{prefix}.ln1.beta"))?);
    let h = g.layer_norm(x, ga, be, LN_EPS)?;
    let scale = 1.0 / (cfg.d as f64).sqrt();
    let mut heads = Vec::with_capacity(cfg.n_heads);
    for i in 0..cfg.n_heads {
        let wq = p(g, s, &format!("{prefix}.attn.q.{i}"))?;
        let wk = p(g, s, &format!("{prefix}.attn.k.{i}"))?;
        let wv = p(g, s, &format!("{prefix}.attn.v.{i}"))?;
        let q = g.matmul(h, wq)?;
        let k = g.matmul(h, wk)?;
        let v = g.matmul(h, wv)?;
        let scores = g.matmul_t(q, k)?;
        let scores = g.scale(scores, scale);
        let attn = g.softmax_rows(scores);
        heads.push(g.matmul(attn, v)?);
    }
    let cat = g.concat_cols(&heads)?;
    let wo = p(g, s, &format!("{prefix}.attn.out.w"))?;
    let proj = g.matmul(cat, wo)?;
    let a = g.add(x, proj)?;

    let (ga, be) = (p(g, s, &format!("{prefix}.ln2.gamma"))?, p(g, s, &format!("{prefix}.ln2.beta"))?);
    let h = g.layer_norm(a, ga, be, LN_EPS)?;
    let (w1, b1) = (p(g, s, &format!("{prefix}.mlp.fc1.w"))?, p(g, s, &format!("{prefix}.mlp.fc1.b"))?);
    let h = g.dense(h, w1, Some(b1))?;
    let h = g.gelu(h);
    let (w2, b2) = (p(g, s, &format!("{prefix}.mlp.fc2.w"))?, p(g, s, &format!("{prefix}.mlp.fc2.b"))?);
    let h = g.dense(h, w2, Some(b2))?;
    Ok(g.add(a, h)?)
}

fn positional(g: &mut Graph, s: &ParameterStore, prefix: &str, positions: &[f64]) -> Result<Var> {
    let idx = g.constant(positions.len(), 1, positions.to_vec())?;
    let (w, b) = (p(g, s, &format!("{prefix}.pos.w"))?, p(g, s, &format!("{prefix}.pos.b"))?);
    Ok(g.dense(idx, w, Some(b))?)
}

fn default_positions(l: usize) -> Vec<f64> {
    (0..l).map(|i| i as f64 / l as f64).collect()
}

/// Encoder output `Z_e` (`l × 2·m_max·k/l`, before power normalization).
///
/// `heatmap` must be given under CSIT and omitted under CSIR.
pub fn encode(
    g: &mut Graph,
    s: &ParameterStore,
    cfg: &ModelConfig,
    patches: Var,
    heatmap: Option<Var>,
) -> Result<Var> {
    encode_with_positions(g, s, cfg, patches, heatmap, &default_positions(cfg.l()))
}

/// [`encode`] with explicit normalized token positions.
pub fn encode_with_positions(
    g: &mut Graph,
    s: &ParameterStore,
    cfg: &ModelConfig,
    patches: Var,
    heatmap: Option<Var>,
    positions: &[f64],
) -> Result<Var> {
    let l = cfg.l();
    if g.shape(patches) != (l, cfg.c()) || positions.len() != l {
        return Err(Error::Dimension(format!(
            "encoder expects {l}x{} patches and {l} positions, got {:?} and {}",
            cfg.c(),
            g.shape(patches),
            positions.len()
        )));
    }
    let input = match (cfg.mode, heatmap) {
        (CsiMode::Csir, None) => patches,
        (CsiMode::Csit, Some(hm)) => g.concat_cols(&[patches, hm])?,
        (CsiMode::Csir, Some(_)) => {
            return Err(Error::Argument("the CSIR encoder takes no heatmap".into()))
        }
        (CsiMode::Csit, None) => {
            return Err(Error::Argument("the CSIT encoder needs a heatmap".into()))
        }
    };
    let w0 = p(g, s, "enc.w0")?;
    let f = g.matmul(input, w0)?;
    let pe = positional(g, s, "enc", positions)?;
    let mut f = g.add(f, pe)?;
    for i in 0..cfg.depth {
        f = transformer_layer(g, s, &format!("enc.layers.{i}"), cfg, f)?;
    }
    let wc = p(g, s, "enc.head.w")?;
    Ok(g.matmul(f, wc)?)
}

fn siamese_branch(g: &mut Graph, s: &ParameterStore, x: Var) -> Result<Var> {
    let (w1, b1) = (p(g, s, "dec.siam.fc1.w")?, p(g, s, "dec.siam.fc1.b")?);
    let h = g.dense(x, w1, Some(b1))?;
    let h = g.gelu(h);
    let (w2, b2) = (p(g, s, "dec.siam.fc2.w")?, p(g, s, "dec.siam.fc2.b")?);
    let h = g.dense(h, w2, Some(b2))?;
    Ok(g.gelu(h))
}

/// Decoder: equalized symbols and heatmap (both `l × cols`) to patches
/// (`l × c`), unclamped.
pub fn decode(
    g: &mut Graph,
    s: &ParameterStore,
    cfg: &ModelConfig,
    x_prime: Var,
    heatmap: Var,
) -> Result<Var> {
    let want = (cfg.l(), cfg.cols());
    if g.shape(x_prime) != want || g.shape(heatmap) != want {
        return Err(Error::Dimension(format!(
            "decoder expects {want:?} inputs, got {:?} and {:?}",
            g.shape(x_prime),
            g.shape(heatmap)
        )));
    }
    let sd = g.concat_cols(&[x_prime, heatmap])?;
    let pos = siamese_branch(g, s, sd)?;
    let neg_in = g.neg(sd);
    let neg = siamese_branch(g, s, neg_in)?;
    let both = g.concat_cols(&[pos, neg])?;
    let (wm, bm) = (p(g, s, "dec.siam.merge.w")?, p(g, s, "dec.siam.merge.b")?);
    let merged = g.dense(both, wm, Some(bm))?;
    let pe = positional(g, s, "dec", &default_positions(cfg.l()))?;
    let mut f = g.add(merged, pe)?;
    for i in 0..cfg.depth {
        f = transformer_layer(g, s, &format!("dec.layers.{i}"), cfg, f)?;
    }
    let (wo, bo) = (p(g, s, "dec.out.w")?, p(g, s, "dec.out.b")?);
    Ok(g.dense(f, wo, Some(bo))?)
}

/// Learned correction to the zero-forced symbols, one channel use at a time.
///
/// `h_est` is the `m_max×m_max` (zero-padded) channel estimate and `y` the
/// packed `m×2k` received block for the `m` active antennas. Returns the
/// packed `m×2k` compensation; padded antennas are fed as zeros and their
/// outputs dropped.
pub fn residual_compensation(
    g: &mut Graph,
    s: &ParameterStore,
    cfg: &ModelConfig,
    h_est: &ComplexMatrix,
    y: Var,
) -> Result<Var> {
    let mm = cfg.m_max;
    let (m, two_k) = g.shape(y);
    let k = two_k / 2;
    if h_est.shape() != (mm, mm) || m > mm || two_k != 2 * cfg.k {
        return Err(Error::Dimension(format!(
            "residual equalizer: estimate {:?}, received {:?}, m_max {mm}",
            h_est.shape(),
            g.shape(y)
        )));
    }
    let mut h_row = h_est.re_parts();
    h_row.extend(h_est.im_parts());
    let h_feat: Vec<f64> = (0..k).flat_map(|_| h_row.iter().copied()).collect();
    let h_feat = g.constant(k, 2 * mm * mm, h_feat)?;

    // Row j of the gathered matrix: (Re y[:, j], Im y[:, j]) over m_max antennas.
    let mut idx = Vec::with_capacity(k * 2 * mm);
    for j in 0..k {
        for imag in [false, true] {
            for a in 0..mm {
                idx.push(if a < m {
                    a * two_k + if imag { k } else { 0 } + j
                } else {
                    ZERO_INDEX
                });
            }
        }
    }
    let y_feat = g.gather(y, idx, k, 2 * mm)?;
    let feat = g.concat_cols(&[h_feat, y_feat])?;

    let (w1, b1) = (p(g, s, "res.fc1.w")?, p(g, s, "res.fc1.b")?);
    let h = g.dense(feat, w1, Some(b1))?;
    let alpha = p(g, s, "res.prelu.alpha")?;
    let h = g.prelu(h, alpha)?;
    let (w2, b2) = (p(g, s, "res.fc2.w")?, p(g, s, "res.fc2.b")?);
    let comp = g.dense(h, w2, Some(b2))?;

    let mut back = Vec::with_capacity(m * two_k);
    for a in 0..m {
        for imag in [false, true] {
            for j in 0..k {
                back.push(j * 2 * mm + if imag { mm } else { 0 } + a);
            }
        }
    }
    Ok(g.gather(comp, back, m, two_k)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_shapes() {
        let cfg = ModelConfig::tiny(CsiMode::Csir);
        let s = init_params(&cfg, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(s.get("enc.w0").unwrap().shape, vec![48, 32]);
        assert_eq!(s.get("enc.head.w").unwrap().shape, vec![32, 16]);
        assert_eq!(s.get("enc.layers.1.attn.q.1").unwrap().shape, vec![32, 16]);
        assert_eq!(s.get("dec.out.w").unwrap().shape, vec![32, 48]);
        assert_eq!(s.get("res.fc1.w").unwrap().shape, vec![12, 128]);
        assert_eq!(s.get("res.fc2.w").unwrap().shape, vec![128, 4]);
        let csit = init_params(&ModelConfig::tiny(CsiMode::Csit), &mut RngStream::new(0, 0)).unwrap();
        assert!(!csit.contains("res.fc1.w"));
        assert_eq!(csit.get("enc.w0").unwrap().shape, vec![64, 32]);
    }

    #[test]
    fn init_is_seeded() {
        let cfg = ModelConfig::tiny(CsiMode::Csir);
        let a = init_params(&cfg, &mut RngStream::new(4, 0)).unwrap();
        let b = init_params(&cfg, &mut RngStream::new(4, 0)).unwrap();
        let c = init_params(&cfg, &mut RngStream::new(5, 0)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn heatmap_presence_is_enforced() {
        let cfg = ModelConfig::tiny(CsiMode::Csir);
        let s = init_params(&cfg, &mut RngStream::new(0, 0)).unwrap();
        let mut g = Graph::new();
        let x = g.constant(4, 48, vec![0.5; 192]).unwrap();
        let hm = g.constant(4, 16, vec![0.0; 64]).unwrap();
        assert!(encode(&mut g, &s, &cfg, x, Some(hm)).is_err());
        let z = encode(&mut g, &s, &cfg, x, None).unwrap();
        assert_eq!(g.shape(z), (4, 16));
    }
}
