use std::collections::HashMap;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOUNDARY: usize = 2;
pub const SPECIAL_COUNT: usize = 3;

const SPECIAL_TOKENS: [&str; SPECIAL_COUNT] = ["<pad>", "<unk>", "<bnd>"];

/// Token/id bijection. Ids `0..3` are reserved for [`PAD`], [`UNK`] and
/// [`BOUNDARY`]; corpus tokens start at [`SPECIAL_COUNT`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    min_count: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from tokenised documents. Tokens seen fewer than
    /// `min_count` times are left out (they encode to [`UNK`]). Ids are
    /// assigned by descending frequency, ties broken lexicographically.
    pub fn build<I, D, S>(documents: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = D>,
        D: AsRef<[S]>,
        S: AsRef<str>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let docs: Vec<D> = documents.into_iter().collect();
        for doc in &docs {
            for tok in doc.as_ref() {
                *counts.entry(tok.as_ref()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_count.max(1) && !SPECIAL_TOKENS.contains(&t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut vocab = Self::with_specials(min_count);
        for (tok, _) in kept {
            vocab.push(tok.to_string());
        }
        vocab
    }

    /// Rebuilds a vocabulary from its stored id order (specials included).
    pub fn from_tokens(tokens: Vec<String>, min_count: usize) -> Result<Self> {
        if tokens.len() < SPECIAL_COUNT || tokens[..SPECIAL_COUNT] != SPECIAL_TOKENS {
            return Err(Error::Data("vocabulary does not start with the special tokens".into()));
        }
        let mut vocab = Self::with_specials(min_count);
        for tok in tokens.into_iter().skip(SPECIAL_COUNT) {
            if vocab.token_to_id.contains_key(&tok) {
                return Err(Error::Data(format!("duplicate vocabulary token `{tok}`")));
            }
            vocab.push(tok);
        }
        Ok(vocab)
    }

    fn with_specials(min_count: usize) -> Self {
        let mut vocab = Vocabulary {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
            min_count,
        };
        for tok in SPECIAL_TOKENS {
            vocab.push(tok.to_string());
        }
        vocab
    }

    fn push(&mut self, tok: String) {
        self.token_to_id.insert(tok.clone(), self.id_to_token.len());
        self.id_to_token.push(tok);
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.len() == SPECIAL_COUNT
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    /// Number of ids available for corruption sampling.
    pub fn non_special_len(&self) -> usize {
        self.len() - SPECIAL_COUNT
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id
            .get(token)
            .copied()
            .filter(|&id| id >= SPECIAL_COUNT)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(UNK))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(SPECIAL_TOKENS[UNK]).to_string())
            .collect()
    }
}
