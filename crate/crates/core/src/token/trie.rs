//! Token-level prefix tree over the tokenizations of an enumerated
//! candidate set.

use super::vocab::{TokenId, Vocab};
use crate::template::CandidateSet;

pub type NodeId = u32;

#[derive(Debug, Clone, Default)]
struct TrieNode {
    /// Sorted by token id.
    children: Vec<(TokenId, NodeId)>,
    terminal: Option<u32>,
}

/// Candidates that share a token prefix share nodes. A terminal node maps to
/// a candidate value; `None` stands for the null candidate.
#[derive(Debug, Clone)]
pub struct CandidateTrie {
    nodes: Vec<TrieNode>,
    values: Vec<Option<String>>,
}

impl CandidateTrie {
    pub const ROOT: NodeId = 0;

    /// Builds the trie for the distinct normalized candidates of `cs`, plus
    /// the literal `null` when the set is nullable.
    pub fn build(cs: &CandidateSet, vocab: &Vocab) -> Self {
        let mut trie = CandidateTrie {
            nodes: vec![TrieNode::default()],
            values: Vec::new(),
        };
        for value in cs.distinct_values() {
            if value.is_empty() {
                continue;
            }
            let tokens = vocab.encode(&value);
            trie.insert(&tokens, Some(value));
        }
        if cs.nullable {
            trie.insert(&vocab.encode("null"), None);
        }
        trie
    }

    /// Trie accepting only the literal `null`.
    pub fn null_only(vocab: &Vocab) -> Self {
        let mut trie = CandidateTrie {
            nodes: vec![TrieNode::default()],
            values: Vec::new(),
        };
        trie.insert(&vocab.encode("null"), None);
        trie
    }

    fn insert(&mut self, tokens: &[TokenId], value: Option<String>) {
        let mut node = Self::ROOT as usize;
        for &tok in tokens {
            node = match self.nodes[node]
                .children
                .binary_search_by_key(&tok, |c| c.0)
            {
                Ok(i) => self.nodes[node].children[i].1 as usize,
                Err(i) => {
                    let next = self.nodes.len() as NodeId;
                    self.nodes.push(TrieNode::default());
                    self.nodes[node].children.insert(i, (tok, next));
                    next as usize
                }
            };
        }
        if self.nodes[node].terminal.is_none() {
            self.nodes[node].terminal = Some(self.values.len() as u32);
            self.values.push(value);
        }
    }

    pub fn children(&self, node: NodeId) -> &[(TokenId, NodeId)] {
        &self.nodes[node as usize].children
    }

    pub fn allowed(&self, node: NodeId) -> impl Iterator<Item = TokenId> + '_ {
        self.children(node).iter().map(|c| c.0)
    }

    pub fn next(&self, node: NodeId, token: TokenId) -> Option<NodeId> {
        let children = self.children(node);
        children
            .binary_search_by_key(&token, |c| c.0)
            .ok()
            .map(|i| children[i].1)
    }

    pub fn is_terminal(&self, node: NodeId) -> bool {
        self.nodes[node as usize].terminal.is_some()
    }

    /// Value completed at `node`: `Some(None)` is the null candidate.
    pub fn value(&self, node: NodeId) -> Option<Option<&str>> {
        self.nodes[node as usize]
            .terminal
            .map(|i| self.values[i as usize].as_deref())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Every root-to-terminal token path with its value.
    pub fn paths(&self) -> Vec<(Vec<TokenId>, Option<String>)> {
        let mut out = Vec::new();
        let mut stack = vec![(Self::ROOT, Vec::new())];
        while let Some((node, path)) = stack.pop() {
            if let Some(v) = self.value(node) {
                out.push((path.clone(), v.map(str::to_string)));
            }
            for &(tok, child) in self.children(node) {
                let mut p = path.clone();
                p.push(tok);
                stack.push((child, p));
            }
        }
        out.sort();
        out
    }
}
