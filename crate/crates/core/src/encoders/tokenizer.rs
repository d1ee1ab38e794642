//! Byte-level tokenizer. Two reserved ids (BOS, EOS) then raw bytes shifted
//! by 2, so Korean, English, and code all tokenize without any
//! out-of-vocabulary path.

pub const BOS: u32 = 0;
pub const EOS: u32 = 1;
pub const BYTE_OFFSET: u32 = 2;
pub const VOCAB_SIZE: usize = 258;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub truncated: bool,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Deterministic byte-level tokenization truncated to `max_len`.
pub fn tokenize(text: &str, max_len: usize) -> TokenSequence {
    let bytes = text.as_bytes();
    let truncated = bytes.len() > max_len;
    let take = bytes.len().min(max_len);
    let ids = bytes[..take]
        .iter()
        .map(|&b| b as u32 + BYTE_OFFSET)
        .collect();
    TokenSequence { ids, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_empty_sequence() {
        let t = tokenize("", 16);
        assert!(t.is_empty());
        assert!(!t.truncated);
    }

    #[test]
    fn tokenization_is_deterministic() {
        let a = tokenize("print('안녕') # mixed", 64);
        let b = tokenize("print('안녕') # mixed", 64);
        assert_eq!(a, b);
    }

    #[test]
    fn long_input_truncates_and_flags() {
        let text = "x".repeat(100);
        let t = tokenize(&text, 10);
        assert_eq!(t.len(), 10);
        assert!(t.truncated);
    }

    #[test]
    fn ids_stay_below_vocab() {
        let t = tokenize("한국어 and code == 3", 256);
        assert!(t.ids.iter().all(|&id| (id as usize) < VOCAB_SIZE));
    }
}
