//! Token vocabulary with greedy longest-match encoding and byte fallback.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::template::Template;

pub type TokenId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Normal,
    /// Raw byte fallback, displayed as `<0xNN>`.
    Byte,
    /// Atomic template placeholder such as `<lobe>`.
    Special,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("special token {0:?} collides with an existing non-special token")]
    SpecialCollision(String),
}

#[derive(Debug, Clone, Default)]
struct ByteTrie {
    nodes: Vec<ByteNode>,
}

#[derive(Debug, Clone, Default)]
struct ByteNode {
    children: Vec<(u8, u32)>,
    token: Option<TokenId>,
}

impl ByteTrie {
    fn new() -> Self {
        ByteTrie {
            nodes: vec![ByteNode::default()],
        }
    }

    fn insert(&mut self, bytes: &[u8], id: TokenId) {
        let mut node = 0usize;
        for &b in bytes {
            node = match self.nodes[node].children.binary_search_by_key(&b, |c| c.0) {
                Ok(i) => self.nodes[node].children[i].1 as usize,
                Err(i) => {
                    let next = self.nodes.len() as u32;
                    self.nodes.push(ByteNode::default());
                    self.nodes[node].children.insert(i, (b, next));
                    next as usize
                }
            };
        }
        if self.nodes[node].token.is_none() {
            self.nodes[node].token = Some(id);
        }
    }

    /// Longest token matching at the start of `bytes`.
    fn longest(&self, bytes: &[u8]) -> Option<(TokenId, usize)> {
        let mut node = 0usize;
        let mut best = None;
        for (i, &b) in bytes.iter().enumerate() {
            match self.nodes[node].children.binary_search_by_key(&b, |c| c.0) {
                Ok(j) => node = self.nodes[node].children[j].1 as usize,
                Err(_) => break,
            }
            if let Some(t) = self.nodes[node].token {
                best = Some((t, i + 1));
            }
        }
        best
    }
}

/// Dense token table. Ids run `0..len()`; `lookup(entry(i)) == Some(i)` for
/// every entry that is not a duplicate of an earlier one.
#[derive(Debug, Clone)]
pub struct Vocab {
    bytes: Vec<Arc<[u8]>>,
    display: Vec<String>,
    kinds: Vec<TokenKind>,
    lookup: HashMap<String, TokenId>,
    byte_ids: Vec<TokenId>,
    trie: ByteTrie,
    /// Special token strings, longest first.
    specials: Vec<(String, TokenId)>,
}

fn byte_display(b: u8) -> String {
    format!("<0x{b:02X}>")
}

fn parse_byte_display(s: &str) -> Option<u8> {
    let hex = s.strip_prefix("<0x")?.strip_suffix('>')?;
    if hex.len() != 2 {
        return None;
    }
    u8::from_str_radix(hex, 16).ok()
}

impl Vocab {
    fn empty() -> Self {
        Vocab {
            bytes: Vec::new(),
            display: Vec::new(),
            kinds: Vec::new(),
            lookup: HashMap::new(),
            byte_ids: vec![TokenId::MAX; 256],
            trie: ByteTrie::new(),
            specials: Vec::new(),
        }
    }

    fn push(&mut self, display: String, bytes: Vec<u8>, kind: TokenKind) -> TokenId {
        let id = self.bytes.len() as TokenId;
        match kind {
            TokenKind::Normal if !bytes.is_empty() => self.trie.insert(&bytes, id),
            TokenKind::Byte => {
                if self.byte_ids[bytes[0] as usize] == TokenId::MAX {
                    self.byte_ids[bytes[0] as usize] = id;
                }
            }
            TokenKind::Special => {
                self.specials.push((display.clone(), id));
                self.specials
                    .sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
            }
            TokenKind::Normal => {}
        }
        self.lookup.entry(display.clone()).or_insert(id);
        self.bytes.push(bytes.into());
        self.display.push(display);
        self.kinds.push(kind);
        id
    }

    fn ensure_byte_fallback(&mut self) {
        for b in 0..=255u8 {
            if self.byte_ids[b as usize] == TokenId::MAX {
                self.push(byte_display(b), vec![b], TokenKind::Byte);
            }
        }
    }

    /// Builds a vocabulary from explicit token strings plus the 256 byte
    /// fallback tokens.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Vocab::empty();
        for t in tokens {
            let t = t.as_ref();
            match parse_byte_display(t) {
                Some(b) => v.push(t.to_string(), vec![b], TokenKind::Byte),
                None => v.push(t.to_string(), t.as_bytes().to_vec(), TokenKind::Normal),
            };
        }
        v.ensure_byte_fallback();
        v
    }

    /// Word-level vocabulary: every alphanumeric run and punctuation
    /// character found in `texts`, each with and without a leading space,
    /// plus digits, JSON punctuation, and byte fallback.
    pub fn word_level<'a, I>(texts: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut pieces: BTreeSet<String> = BTreeSet::new();
        for base in [
            " ", "\n", ".", ",", ":", "{", "}", "[", "]", "\"", "null", "\": ", "\": \"", ", \"",
            "\", \"", "{\"", "}, {\"", "}]",
        ] {
            pieces.insert(base.to_string());
        }
        for d in 0..10 {
            pieces.insert(d.to_string());
            pieces.insert(format!(" {d}"));
        }
        for text in texts {
            for piece in split_pieces(text) {
                pieces.insert(format!(" {piece}"));
                pieces.insert(piece);
            }
        }
        Vocab::from_tokens(pieces)
    }

    /// Word-level vocabulary covering a template's candidates, keys, and
    /// labels.
    pub fn for_template(t: &Template) -> Self {
        Vocab::word_level(template_texts(t).iter().map(String::as_str))
    }

    /// Vocabulary file: one token per line, line number = id. `\n`, `\t`,
    /// `\r` and `\\` are unescaped; `<0xNN>` lines are byte tokens. Missing
    /// byte tokens are appended after the file's entries.
    pub fn from_vocab_file(text: &str) -> Self {
        let mut v = Vocab::empty();
        let body = text.strip_suffix('\n').unwrap_or(text);
        let lines = if text.is_empty() {
            None
        } else {
            Some(body.split('\n'))
        };
        for line in lines.into_iter().flatten() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if let Some(b) = parse_byte_display(line) {
                v.push(line.to_string(), vec![b], TokenKind::Byte);
                continue;
            }
            let tok = unescape(line);
            v.push(tok.clone(), tok.into_bytes(), TokenKind::Normal);
        }
        v.ensure_byte_fallback();
        v
    }

    pub fn to_vocab_file(&self) -> String {
        let mut out = String::new();
        for (i, d) in self.display.iter().enumerate() {
            if self.kinds[i] == TokenKind::Byte {
                out.push_str(d);
            } else {
                out.push_str(&escape(d));
            }
            out.push('\n');
        }
        out
    }

    /// Adds one special token per feature of `t`. Already-registered
    /// specials keep their ids.
    pub fn register_special_tokens(&self, t: &Template) -> Result<Vocab, VocabError> {
        let mut v = self.clone();
        for (_, f) in t.features() {
            let s = f.special_token();
            match v.lookup.get(&s) {
                Some(&id) if v.kinds[id as usize] == TokenKind::Special => {}
                Some(_) => return Err(VocabError::SpecialCollision(s)),
                None => {
                    v.push(s.clone(), s.into_bytes(), TokenKind::Special);
                }
            }
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn entry(&self, id: TokenId) -> &str {
        &self.display[id as usize]
    }

    pub fn token_bytes(&self, id: TokenId) -> &[u8] {
        &self.bytes[id as usize]
    }

    pub fn kind(&self, id: TokenId) -> TokenKind {
        self.kinds[id as usize]
    }

    pub fn lookup(&self, s: &str) -> Option<TokenId> {
        self.lookup.get(s).copied()
    }

    pub fn special_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.specials.iter().map(|(_, id)| *id)
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        self.kinds[id as usize] == TokenKind::Special
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::new();
        self.encode_into(text, &mut out);
        out
    }

    pub fn encode_into(&self, text: &str, out: &mut Vec<TokenId>) {
        let bytes = text.as_bytes();
        let mut start = 0;
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] == b'<' {
                if let Some((s, id)) = self
                    .specials
                    .iter()
                    .find(|(s, _)| bytes[i..].starts_with(s.as_bytes()))
                {
                    self.encode_plain(&bytes[start..i], out);
                    out.push(*id);
                    i += s.len();
                    start = i;
                    continue;
                }
            }
            i += 1;
        }
        self.encode_plain(&bytes[start..], out);
    }

    fn encode_plain(&self, mut bytes: &[u8], out: &mut Vec<TokenId>) {
        while !bytes.is_empty() {
            match self.trie.longest(bytes) {
                Some((id, len)) => {
                    out.push(id);
                    bytes = &bytes[len..];
                }
                None => {
                    out.push(self.byte_ids[bytes[0] as usize]);
                    bytes = &bytes[1..];
                }
            }
        }
    }

    pub fn decode_bytes(&self, ids: &[TokenId]) -> Vec<u8> {
        let mut out = Vec::new();
        for &id in ids {
            out.extend_from_slice(&self.bytes[id as usize]);
        }
        out
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        String::from_utf8_lossy(&self.decode_bytes(ids)).into_owned()
    }
}

/// Alphanumeric runs and single non-space characters.
pub(crate) fn split_pieces(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.push(ch);
            continue;
        }
        if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_string());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Strings a template's decoding and rendering touch.
pub(crate) fn template_texts(t: &Template) -> Vec<String> {
    let mut out = Vec::new();
    for (_, f) in t.features() {
        out.push(f.name.clone());
        out.push(f.display_name.clone());
        out.push(f.label());
        out.extend(f.candidates.values().iter().cloned());
        if let Some(r) = f.candidates.range() {
            out.push(r.format_scaled(r.max_scaled));
        }
    }
    out.push(crate::template::NODULES_KEY.to_string());
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}
