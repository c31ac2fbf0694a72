use super::LandmarkPhrase;
use crate::lexicon::{Lexicon, DIRECTION_WORDS};

/// Rule-based chunker: maximal `attribute* noun` runs whose noun is in the
/// lexicon, in order of appearance, deduplicated by normalized phrase.
pub fn extract_landmarks<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> Vec<LandmarkPhrase> {
    let mut out: Vec<LandmarkPhrase> = Vec::new();
    let mut consumed = 0;
    for (i, tok) in tokens.iter().enumerate() {
        let tok = tok.as_ref();
        if DIRECTION_WORDS.contains(&tok) {
            continue;
        }
        let Some(head) = lexicon.noun_of(tok) else {
            continue;
        };
        let mut start = i;
        while start > consumed && lexicon.is_attribute(tokens[start - 1].as_ref()) {
            start -= 1;
        }
        consumed = i + 1;
        let phrase = LandmarkPhrase {
            head_noun: head,
            attributes: tokens[start..i].iter().map(|t| t.as_ref().to_string()).collect(),
            source_span: start..i + 1,
        };
        if !out.iter().any(|p| p.normalized() == phrase.normalized()) {
            out.push(phrase);
        }
    }
    out
}
