//! Tokenization primitives: vocabulary, candidate tries, numeric acceptors.

mod numeric;
mod trie;
mod vocab;

pub use numeric::{format_decimal, NumState, NumericAutomaton};
pub use trie::{CandidateTrie, NodeId};
pub use vocab::{TokenId, TokenKind, Vocab, VocabError};
