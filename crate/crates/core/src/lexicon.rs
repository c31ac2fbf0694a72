//! Object lexicon: head nouns, the ambient subset that tends to be visible
//! from several directions at once, and attribute adjectives.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../data/lexicon.json");
pub const LEXICON_VERSION: u32 = 1;

/// Words that describe motion or direction. The chunker never returns them
/// even if a custom lexicon lists them.
pub const DIRECTION_WORDS: &[&str] =
    &["left", "right", "straight", "around", "forward", "back", "ahead", "turn", "up", "down"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lexicon {
    pub version: u32,
    pub ambient: Vec<String>,
    pub nouns: Vec<String>,
    pub attributes: Vec<String>,
    #[serde(skip)]
    noun_set: BTreeSet<String>,
    #[serde(skip)]
    attribute_set: BTreeSet<String>,
}

impl Lexicon {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut lex: Lexicon = serde_json::from_str(text)?;
        if lex.version != LEXICON_VERSION {
            return Err(Error::Schema { what: "lexicon", found: lex.version, expected: LEXICON_VERSION });
        }
        if lex.nouns.is_empty() && lex.ambient.is_empty() {
            return Err(Error::Invalid("lexicon has no nouns".into()));
        }
        lex.index();
        Ok(lex)
    }

    pub fn new(ambient: &[&str], nouns: &[&str], attributes: &[&str]) -> Self {
        let mut lex = Lexicon {
            version: LEXICON_VERSION,
            ambient: ambient.iter().map(|s| s.to_string()).collect(),
            nouns: nouns.iter().map(|s| s.to_string()).collect(),
            attributes: attributes.iter().map(|s| s.to_string()).collect(),
            noun_set: BTreeSet::new(),
            attribute_set: BTreeSet::new(),
        };
        lex.index();
        lex
    }

    fn index(&mut self) {
        self.noun_set = self
            .ambient
            .iter()
            .chain(self.nouns.iter())
            .filter(|w| !DIRECTION_WORDS.contains(&w.as_str()))
            .cloned()
            .collect();
        self.attribute_set = self.attributes.iter().cloned().collect();
    }

    /// The lexicon shipped with the crate.
    pub fn bundled() -> &'static Lexicon {
        static LEX: OnceLock<Lexicon> = OnceLock::new();
        LEX.get_or_init(|| Lexicon::from_json(BUNDLED).expect("bundled lexicon is valid"))
    }

    pub fn is_noun(&self, word: &str) -> bool {
        self.noun_set.contains(word)
    }

    pub fn is_attribute(&self, word: &str) -> bool {
        self.attribute_set.contains(word)
    }

    pub fn is_ambient(&self, word: &str) -> bool {
        self.ambient.iter().any(|a| a == word)
    }

    /// Maps a surface token to its lexicon noun, singularizing if needed.
    pub fn noun_of(&self, token: &str) -> Option<String> {
        if self.is_noun(token) {
            return Some(token.to_string());
        }
        let single = singularize(token);
        self.is_noun(&single).then_some(single)
    }

    pub fn all_nouns(&self) -> impl Iterator<Item = &str> {
        self.noun_set.iter().map(String::as_str)
    }
}

/// Suffix-rule singularization: "-ies" becomes "-y", a trailing "s" is
/// stripped unless the word ends in "ss".
pub fn singularize(word: &str) -> String {
    if let Some(stem) = word.strip_suffix("ies") {
        if !stem.is_empty() {
            return format!("{stem}y");
        }
    }
    if word.ends_with('s') && !word.ends_with("ss") && word.len() > 1 {
        return word[..word.len() - 1].to_string();
    }
    word.to_string()
}

/// Inverse of [`singularize`] for the nouns the generator pluralizes.
pub fn pluralize(word: &str) -> String {
    let bytes = word.as_bytes();
    if let Some(stem) = word.strip_suffix('y') {
        let before = bytes.len().checked_sub(2).map(|i| bytes[i]);
        if matches!(before, Some(c) if !b"aeiou".contains(&c)) {
            return format!("{stem}ies");
        }
    }
    format!("{word}s")
}
