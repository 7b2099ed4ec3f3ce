//! Word/id interning with the reserved sentence and unknown-word tokens.

use std::collections::HashMap;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Bidirectional word <-> dense id mapping. Ids are contiguous from 0 and the
/// reserved tokens `<s>`, `</s>`, `<unk>` are always present.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Vocabulary {
            words: Vec::new(),
            ids: HashMap::new(),
        };
        v.intern(BOS);
        v.intern(EOS);
        v.intern(UNK);
        v
    }

    /// Id of a word, adding it if absent.
    pub fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(word.to_string());
        self.ids.insert(word.to_string(), id);
        id
    }

    /// Id of a word if present.
    pub fn id(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    /// Id of a word, mapping out-of-vocabulary words to `<unk>`.
    pub fn id_or_unk(&self, word: &str) -> u32 {
        self.id(word).unwrap_or_else(|| self.unk())
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved tokens are always present
    }

    pub fn bos(&self) -> u32 {
        self.ids[BOS]
    }

    pub fn eos(&self) -> u32 {
        self.ids[EOS]
    }

    pub fn unk(&self) -> u32 {
        self.ids[UNK]
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.contains_key(word)
    }

    /// All ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        0..self.words.len() as u32
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|s| s.as_str())
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}
