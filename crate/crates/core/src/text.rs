//! Tokenization shared by instructions, hints and the decoder vocabulary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const UNK: &str = "<unk>";
pub const END_OF_HINT: &str = "<eoh>";

/// Splits on whitespace and detaches "," and "." into their own tokens.
/// Case is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut cur = String::new();
        for ch in word.chars() {
            if ch == ',' || ch == '.' {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            } else {
                cur.push(ch);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

/// Inverse of [`tokenize`] for text produced by the hint templates.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for tok in tokens {
        let tok = tok.as_ref();
        if !out.is_empty() && tok != "," && tok != "." {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from token streams. Ids are assigned in sorted
    /// order after the two reserved tokens, so the result does not depend on
    /// corpus order.
    pub fn build<'a, I, S>(streams: I) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut seen = std::collections::BTreeSet::new();
        for stream in streams {
            for tok in stream {
                seen.insert(tok.as_ref().to_string());
            }
        }
        seen.remove(UNK);
        seen.remove(END_OF_HINT);
        let mut tokens = vec![UNK.to_string(), END_OF_HINT.to_string()];
        tokens.extend(seen);
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }

    /// Restores the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unk(&self) -> usize {
        0
    }

    pub fn end_of_hint(&self) -> usize {
        1
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map(String::as_str).unwrap_or(UNK)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_detaches_punctuation() {
        let toks = tokenize("However, wooden dining table, marble countertop are in the targeted view.");
        assert_eq!(toks[0], "However");
        assert_eq!(toks[1], ",");
        assert_eq!(toks.last().unwrap(), ".");
        assert_eq!(detokenize(&toks), "However, wooden dining table, marble countertop are in the targeted view.");
    }

    #[test]
    fn vocab_is_order_independent() {
        let a = vec!["b".to_string(), "a".to_string()];
        let b = vec!["c".to_string()];
        let v1 = Vocab::build([a.as_slice(), b.as_slice()]);
        let v2 = Vocab::build([b.as_slice(), a.as_slice()]);
        assert_eq!(v1, v2);
        assert_eq!(v1.id("zzz"), v1.unk());
        assert_eq!(v1.token(v1.id("c")), "c");
    }
}
