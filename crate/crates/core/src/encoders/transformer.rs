//! The trainable text encoder and the response decoder, expressed as tape
//! constructions so every use is differentiable.

use crate::nn::{causal_mask, ForwardPass, Init};
use crate::tape::NodeId;

use super::tokenizer::{self, BOS, EOS, VOCAB_SIZE};
use super::EncoderConfig;

/// Token + positional embeddings followed by pre-norm encoder blocks and a
/// final layer norm. Returns the per-token states; `None` for empty input.
pub fn encode_states(
    fp: &mut ForwardPass,
    prefix: &str,
    cfg: &EncoderConfig,
    text: &str,
) -> Option<NodeId> {
    let seq = tokenizer::tokenize(text, cfg.max_len);
    if seq.is_empty() {
        return None;
    }
    let ids: Vec<usize> = seq.ids.iter().map(|&i| i as usize).collect();
    let positions: Vec<usize> = (0..ids.len()).collect();
    let tok = fp.param(
        &format!("{prefix}.tok"),
        VOCAB_SIZE,
        cfg.dim,
        Init::Uniform { scale: 0.05 },
    );
    let pos = fp.param(
        &format!("{prefix}.pos"),
        cfg.max_len,
        cfg.dim,
        Init::Uniform { scale: 0.05 },
    );
    let te = fp.tape.gather_rows(tok, &ids);
    let pe = fp.tape.gather_rows(pos, &positions);
    let mut x = fp.tape.add(te, pe);
    for layer in 0..cfg.layers {
        x = fp.encoder_block(
            &format!("{prefix}.l{layer}"),
            x,
            cfg.dim,
            cfg.heads,
            cfg.ff_dim,
            None,
        );
    }
    Some(fp.layer_norm(&format!("{prefix}.out_ln"), x, cfg.dim))
}

/// Mean-pooled sentence vector; exact zero vector for empty text.
pub fn encode_pooled(
    fp: &mut ForwardPass,
    prefix: &str,
    cfg: &EncoderConfig,
    text: &str,
) -> NodeId {
    match encode_states(fp, prefix, cfg, text) {
        Some(states) => fp.tape.mean_rows(states),
        None => fp.tape.zeros(1, cfg.dim),
    }
}

/// Teacher-forced negative log-likelihood of `response` given encoder
/// states: inputs are `[BOS] ++ y`, targets `y ++ [EOS]`. Returns the
/// summed NLL node and the number of target tokens.
pub fn response_nll_sum(
    fp: &mut ForwardPass,
    prefix: &str,
    cfg: &EncoderConfig,
    enc_states: NodeId,
    response: &str,
) -> (NodeId, usize) {
    let mut y = tokenizer::tokenize(response, cfg.max_len.saturating_sub(1)).ids;
    let mut inputs = Vec::with_capacity(y.len() + 1);
    inputs.push(BOS as usize);
    inputs.extend(y.iter().map(|&t| t as usize));
    y.push(EOS);
    let targets: Vec<usize> = y.iter().map(|&t| t as usize).collect();

    let tok = fp.param(
        &format!("{prefix}.tok"),
        VOCAB_SIZE,
        cfg.dim,
        Init::Uniform { scale: 0.05 },
    );
    let pos = fp.param(
        &format!("{prefix}.pos"),
        cfg.max_len,
        cfg.dim,
        Init::Uniform { scale: 0.05 },
    );
    let positions: Vec<usize> = (0..inputs.len()).collect();
    let te = fp.tape.gather_rows(tok, &inputs);
    let pe = fp.tape.gather_rows(pos, &positions);
    let mut x = fp.tape.add(te, pe);
    let mask = causal_mask(inputs.len());
    for layer in 0..cfg.decoder_layers {
        x = fp.decoder_block(
            &format!("{prefix}.l{layer}"),
            x,
            enc_states,
            cfg.dim,
            cfg.heads,
            cfg.ff_dim,
            &mask,
        );
    }
    let x = fp.layer_norm(&format!("{prefix}.out_ln"), x, cfg.dim);
    let logits = fp.linear(&format!("{prefix}.out"), x, cfg.dim, VOCAB_SIZE, true);
    let nll = fp.tape.nll_sum(logits, &targets);
    (nll, targets.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamStore;

    fn tiny_cfg() -> EncoderConfig {
        EncoderConfig {
            dim: 16,
            layers: 1,
            heads: 2,
            ff_dim: 32,
            max_len: 32,
            decoder_layers: 1,
        }
    }

    #[test]
    fn empty_text_pools_to_exact_zero() {
        let mut store = ParamStore::new(2);
        let cfg = tiny_cfg();
        let mut fp = ForwardPass::eval(&mut store);
        let v = encode_pooled(&mut fp, "enc.problem", &cfg, "");
        assert!(fp.tape.value(v).iter().all(|&z| z == 0.0));
        assert_eq!(fp.tape.value(v).dim(), (1, 16));
    }

    #[test]
    fn same_text_same_vector_different_text_differs() {
        let mut store = ParamStore::new(2);
        let cfg = tiny_cfg();
        let run = |text: &str, store: &mut ParamStore| {
            let mut fp = ForwardPass::eval(store);
            let v = encode_pooled(&mut fp, "enc.problem", &cfg, text);
            fp.tape.value(v).clone()
        };
        let a1 = run("hello world", &mut store);
        let a2 = run("hello world", &mut store);
        let b = run("something else", &mut store);
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
        assert!(a1.iter().any(|&z| z != 0.0));
    }

    #[test]
    fn response_nll_is_positive_and_counts_tokens() {
        let mut store = ParamStore::new(2);
        let cfg = tiny_cfg();
        let mut fp = ForwardPass::eval(&mut store);
        let enc = encode_states(&mut fp, "enc.question", &cfg, "why fail?").unwrap();
        let (nll, n) = response_nll_sum(&mut fp, "dec", &cfg, enc, "use ==");
        assert_eq!(n, "use ==".len() + 1); // + EOS
        assert!(fp.tape.scalar(nll) > 0.0);
    }
}
