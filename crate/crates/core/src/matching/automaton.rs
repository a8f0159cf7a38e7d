//! Suffix automaton over integer symbols.
//!
//! Small alphabets use a dense transition table; larger ones keep each
//! state's out-edges as a singly linked list in a shared arena, which stays
//! linear in memory regardless of alphabet size.

use crate::Symbol;

const NONE: u32 = u32::MAX;

/// Alphabets up to this size get a dense `states × σ` table.
pub const DENSE_MAX_ALPHABET: usize = 8;

pub(crate) trait Transitions {
    fn with_capacity(states: usize, alphabet: usize) -> Self;
    fn add_state(&mut self);
    fn get(&self, state: u32, symbol: Symbol) -> u32;
    fn set(&mut self, state: u32, symbol: Symbol, target: u32);
    /// Gives `dst` (a fresh state) a copy of `src`'s edges.
    fn copy_edges(&mut self, src: u32, dst: u32);
}

pub(crate) struct Dense {
    alphabet: usize,
    table: Vec<u32>,
}

impl Transitions for Dense {
    fn with_capacity(states: usize, alphabet: usize) -> Self {
        Self { alphabet, table: Vec::with_capacity(states * alphabet) }
    }

    fn add_state(&mut self) {
        self.table.extend(std::iter::repeat(NONE).take(self.alphabet));
    }

    #[inline]
    fn get(&self, state: u32, symbol: Symbol) -> u32 {
        self.table[state as usize * self.alphabet + symbol as usize]
    }

    #[inline]
    fn set(&mut self, state: u32, symbol: Symbol, target: u32) {
        self.table[state as usize * self.alphabet + symbol as usize] = target;
    }

    fn copy_edges(&mut self, src: u32, dst: u32) {
        let (s, d) = (src as usize * self.alphabet, dst as usize * self.alphabet);
        self.table.copy_within(s..s + self.alphabet, d);
    }
}

pub(crate) struct Sparse {
    head: Vec<u32>,
    // (symbol, target, next edge)
    edges: Vec<(Symbol, u32, u32)>,
}

impl Transitions for Sparse {
    fn with_capacity(states: usize, _alphabet: usize) -> Self {
        Self { head: Vec::with_capacity(states), edges: Vec::with_capacity(3 * states / 2) }
    }

    fn add_state(&mut self) {
        self.head.push(NONE);
    }

    #[inline]
    fn get(&self, state: u32, symbol: Symbol) -> u32 {
        let mut e = self.head[state as usize];
        while e != NONE {
            let (s, t, next) = self.edges[e as usize];
            if s == symbol {
                return t;
            }
            e = next;
        }
        NONE
    }

    fn set(&mut self, state: u32, symbol: Symbol, target: u32) {
        let mut e = self.head[state as usize];
        while e != NONE {
            let edge = &mut self.edges[e as usize];
            if edge.0 == symbol {
                edge.1 = target;
                return;
            }
            e = edge.2;
        }
        self.edges.push((symbol, target, self.head[state as usize]));
        self.head[state as usize] = (self.edges.len() - 1) as u32;
    }

    fn copy_edges(&mut self, src: u32, dst: u32) {
        let mut e = self.head[src as usize];
        while e != NONE {
            let (s, t, next) = self.edges[e as usize];
            self.edges.push((s, t, self.head[dst as usize]));
            self.head[dst as usize] = (self.edges.len() - 1) as u32;
            e = next;
        }
    }
}

/// Suffix automaton of a text. Every state records `len` (longest string in
/// its class), the suffix link, and the end position of the first
/// occurrence of its strings in the text.
pub(crate) struct SuffixAutomaton<T> {
    len: Vec<u32>,
    link: Vec<u32>,
    first_end: Vec<u32>,
    next: T,
}

impl<T: Transitions> SuffixAutomaton<T> {
    pub fn build(text: &[Symbol], alphabet: usize) -> Self {
        let cap = 2 * text.len().max(1);
        let mut sam = Self {
            len: Vec::with_capacity(cap),
            link: Vec::with_capacity(cap),
            first_end: Vec::with_capacity(cap),
            next: T::with_capacity(cap, alphabet),
        };
        sam.push_state(0, NONE, 0);
        let mut last = 0u32;
        for (i, &c) in text.iter().enumerate() {
            last = sam.extend(last, c, i as u32);
        }
        sam
    }

    fn push_state(&mut self, len: u32, link: u32, first_end: u32) -> u32 {
        self.len.push(len);
        self.link.push(link);
        self.first_end.push(first_end);
        self.next.add_state();
        (self.len.len() - 1) as u32
    }

    fn extend(&mut self, last: u32, c: Symbol, pos: u32) -> u32 {
        let cur = self.push_state(self.len[last as usize] + 1, 0, pos);
        let mut p = last;
        while p != NONE && self.next.get(p, c) == NONE {
            self.next.set(p, c, cur);
            p = self.link[p as usize];
        }
        if p == NONE {
            self.link[cur as usize] = 0;
            return cur;
        }
        let q = self.next.get(p, c);
        if self.len[p as usize] + 1 == self.len[q as usize] {
            self.link[cur as usize] = q;
            return cur;
        }
        let clone = self.push_state(self.len[p as usize] + 1, self.link[q as usize], self.first_end[q as usize]);
        self.next.copy_edges(q, clone);
        while p != NONE && self.next.get(p, c) == q {
            self.next.set(p, c, clone);
            p = self.link[p as usize];
        }
        self.link[q as usize] = clone;
        self.link[cur as usize] = clone;
        cur
    }

    /// Longest substring of `pattern` that occurs in the text, as
    /// `(length, text_start, pattern_start)`; ties prefer the smallest text
    /// start, then the smallest pattern start.
    pub fn longest_common(&self, pattern: &[Symbol], alphabet: usize) -> (usize, usize, usize) {
        let (mut state, mut matched) = (0u32, 0u32);
        let (mut best_len, mut best_x, mut best_y) = (0u32, 0u32, 0u32);
        for (j, &c) in pattern.iter().enumerate() {
            if c as usize >= alphabet {
                state = 0;
                matched = 0;
                continue;
            }
            while state != 0 && self.next.get(state, c) == NONE {
                state = self.link[state as usize];
                matched = self.len[state as usize];
            }
            let t = self.next.get(state, c);
            if t == NONE {
                matched = 0;
                continue;
            }
            state = t;
            matched += 1;
            // The current match is a member of `state`, so its earliest
            // occurrence in the text ends at `first_end`.
            let x_start = self.first_end[state as usize] + 1 - matched;
            if matched > best_len || (matched == best_len && x_start < best_x) {
                best_len = matched;
                best_x = x_start;
                best_y = j as u32 + 1 - matched;
            }
        }
        (best_len as usize, best_x as usize, best_y as usize)
    }

    #[cfg(test)]
    pub fn state_count(&self) -> usize {
        self.len.len()
    }
}
