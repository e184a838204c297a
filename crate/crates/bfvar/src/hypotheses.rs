//! Constraint hypotheses over K groups: equality blocks plus a strict
//! partial order among blocks, parsed from strings like `1=2>(3,4,5=6)>7`.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr := term (('<'|'>') term)*
//! term := atom (',' atom)* | '(' term ')'
//! atom := index ('=' index)*
//! index := nonzero decimal integer (1-based group index)
//! ```
//!
//! `>` between terms distributes over every block of both terms; `<` is
//! normalized to the reversed `>`. Order relations compare precision mixture
//! weights rho; since rho is proportional to the precision tau at fixed
//! data, ordering rho and ordering tau (and hence reverse-ordering
//! variances) are the same statement.

use std::collections::BTreeSet;

use crate::error::{domain, validation, Error, Result};

/// Convention for turning a reported standard deviation into a sum of
/// squared deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdConvention {
    /// ss = (n - 1) * sd^2 (the usual sample standard deviation).
    Unbiased,
    /// ss = n * sd^2 (divisor-n maximum-likelihood standard deviation).
    Mle,
}

/// Per-group summary statistics: sample size and sum of squared deviations
/// from the group mean. Every formula in the library consumes only these.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    n: u64,
    ss: f64,
}

impl GroupStats {
    pub fn new(n: u64, ss: f64) -> Result<Self> {
        if n < 1 {
            return Err(domain("GroupStats requires n >= 1"));
        }
        if !ss.is_finite() || ss < 0.0 {
            return Err(domain(format!("GroupStats requires finite ss >= 0, got {ss}")));
        }
        if n == 1 && ss != 0.0 {
            return Err(domain("a single observation has zero sum of squares"));
        }
        Ok(GroupStats { n, ss })
    }

    /// Build from a reported standard deviation under the given convention.
    pub fn from_sd(n: u64, sd: f64, conv: SdConvention) -> Result<Self> {
        if !sd.is_finite() || sd < 0.0 {
            return Err(domain(format!("sd must be finite and >= 0, got {sd}")));
        }
        let ss = match conv {
            SdConvention::Unbiased => (n.saturating_sub(1)) as f64 * sd * sd,
            SdConvention::Mle => n as f64 * sd * sd,
        };
        if n == 1 && sd != 0.0 {
            return Err(domain("a single observation has zero standard deviation"));
        }
        GroupStats::new(n, ss)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn ss(&self) -> f64 {
        self.ss
    }

    /// Pool several groups into one (sums of n and ss).
    pub fn pooled(groups: &[GroupStats]) -> Result<Self> {
        if groups.is_empty() {
            return Err(domain("cannot pool zero groups"));
        }
        let n = groups.iter().map(|g| g.n).sum();
        let ss = groups.iter().map(|g| g.ss).sum();
        Ok(GroupStats { n, ss })
    }
}

/// A partition of the group indices into equality blocks plus a strict
/// partial order between blocks.
#[derive(Debug, Clone)]
pub struct HypothesisSpec {
    k: usize,
    /// 0-based group indices, each block sorted ascending, blocks in
    /// appearance order of the source string.
    blocks: Vec<Vec<usize>>,
    /// (greater, lesser) pairs of block indices; adjacency relations only,
    /// transitive consequences are implied.
    order: Vec<(usize, usize)>,
}

impl PartialEq for HypothesisSpec {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.canonical_key() == other.canonical_key()
    }
}

impl HypothesisSpec {
    /// Construct directly from blocks (0-based indices) and order pairs.
    pub fn new(k: usize, blocks: Vec<Vec<usize>>, order: Vec<(usize, usize)>) -> Result<Self> {
        let mut blocks: Vec<Vec<usize>> = blocks;
        for b in &mut blocks {
            b.sort_unstable();
        }
        let mut seen = vec![false; k];
        for b in &blocks {
            if b.is_empty() {
                return Err(validation("empty equality block"));
            }
            for &i in b {
                if i >= k {
                    return Err(validation(format!("group index {} out of 1..={k}", i + 1)));
                }
                if seen[i] {
                    return Err(validation(format!("group index {} appears more than once", i + 1)));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(validation(format!("group index {} missing from hypothesis", missing + 1)));
        }
        let mut dedup: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &(g, l) in &order {
            if g >= blocks.len() || l >= blocks.len() {
                return Err(validation("order relation references unknown block"));
            }
            if g == l {
                return Err(validation("order relation is reflexive"));
            }
            dedup.insert((g, l));
        }
        let order: Vec<(usize, usize)> = dedup.into_iter().collect();
        let spec = HypothesisSpec { k, blocks, order };
        if spec.has_cycle() {
            return Err(validation("order relation contains a cycle"));
        }
        Ok(spec)
    }

    /// Parse a hypothesis string against a group count.
    pub fn parse(text: &str, k: usize) -> Result<Self> {
        Parser::new(text, k).parse()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn order(&self) -> &[(usize, usize)] {
        &self.order
    }

    pub fn has_order(&self) -> bool {
        !self.order.is_empty()
    }

    pub fn is_single_block(&self) -> bool {
        self.blocks.len() == 1
    }

    fn canonical_key(&self) -> (Vec<Vec<usize>>, BTreeSet<(usize, usize)>) {
        let mut idx: Vec<usize> = (0..self.blocks.len()).collect();
        idx.sort_by_key(|&i| self.blocks[i][0]);
        let mut rank = vec![0usize; self.blocks.len()];
        for (new, &old) in idx.iter().enumerate() {
            rank[old] = new;
        }
        let blocks = idx.iter().map(|&i| self.blocks[i].clone()).collect();
        let order = self.order.iter().map(|&(g, l)| (rank[g], rank[l])).collect();
        (blocks, order)
    }

    fn has_cycle(&self) -> bool {
        let m = self.blocks.len();
        let mut adj = vec![Vec::new(); m];
        for &(g, l) in &self.order {
            adj[g].push(l);
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; m];
        fn dfs(v: usize, adj: &[Vec<usize>], state: &mut [u8]) -> bool {
            state[v] = 1;
            for &w in &adj[v] {
                if state[w] == 1 || (state[w] == 0 && dfs(w, adj, state)) {
                    return true;
                }
            }
            state[v] = 2;
            false
        }
        (0..m).any(|v| state[v] == 0 && dfs(v, &adj, &mut state))
    }

    /// True iff every ordered block pair is respected: each member of the
    /// greater block has strictly larger weight than each member of the
    /// lesser block. Equality blocks are structural and are not checked.
    pub fn satisfies_order(&self, rho: &[f64]) -> Result<bool> {
        if rho.len() != self.k {
            return Err(domain(format!("rho has length {}, expected {}", rho.len(), self.k)));
        }
        let sum: f64 = rho.iter().sum();
        if rho.iter().any(|&r| !(r > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(domain("rho must be strictly positive and sum to 1"));
        }
        Ok(self.order.iter().all(|&(g, l)| {
            self.blocks[g]
                .iter()
                .all(|&i| self.blocks[l].iter().all(|&j| rho[i] > rho[j]))
        }))
    }

    /// Order check on the collapsed simplex (one weight per block).
    pub(crate) fn satisfies_order_blocks(&self, block_rho: &[f64]) -> bool {
        self.order.iter().all(|&(g, l)| block_rho[g] > block_rho[l])
    }

    /// Pool stats per equality block and return the induced spec over the
    /// blocks (singleton partition, same order relations).
    pub fn collapse(&self, stats: &[GroupStats]) -> Result<(Vec<GroupStats>, HypothesisSpec)> {
        if stats.len() != self.k {
            return Err(domain(format!("expected {} groups, got {}", self.k, stats.len())));
        }
        let pooled: Vec<GroupStats> = self
            .blocks
            .iter()
            .map(|b| {
                let members: Vec<GroupStats> = b.iter().map(|&i| stats[i]).collect();
                GroupStats::pooled(&members)
            })
            .collect::<Result<_>>()?;
        let k2 = self.blocks.len();
        let induced = HypothesisSpec::new(k2, (0..k2).map(|i| vec![i]).collect(), self.order.clone())?;
        Ok((pooled, induced))
    }

    /// Canonical string form; round-trips through [`HypothesisSpec::parse`].
    ///
    /// Errors for orders that the grammar cannot express (the grammar only
    /// produces complete bipartite relations between consecutive levels).
    pub fn print(&self) -> Result<String> {
        let block_str = |b: &Vec<usize>| -> String {
            b.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join("=")
        };
        let level_str = |level: &mut Vec<usize>, multi_level: bool| -> String {
            level.sort_by_key(|&i| self.blocks[i][0]);
            let inner = level.iter().map(|&i| block_str(&self.blocks[i])).collect::<Vec<_>>().join(",");
            if level.len() > 1 && multi_level {
                format!("({inner})")
            } else {
                inner
            }
        };
        if self.order.is_empty() {
            let mut all: Vec<usize> = (0..self.blocks.len()).collect();
            return Ok(level_str(&mut all, false));
        }
        // longest-path strata
        let m = self.blocks.len();
        let mut level = vec![0usize; m];
        let mut changed = true;
        let mut iter = 0;
        while changed {
            changed = false;
            iter += 1;
            if iter > m + 1 {
                return Err(validation("order relation contains a cycle"));
            }
            for &(g, l) in &self.order {
                if level[l] < level[g] + 1 {
                    level[l] = level[g] + 1;
                    changed = true;
                }
            }
        }
        let depth = level.iter().max().unwrap() + 1;
        let mut strata: Vec<Vec<usize>> = vec![Vec::new(); depth];
        for (b, &lv) in level.iter().enumerate() {
            strata[lv].push(b);
        }
        // the grammar can express exactly "complete bipartite between
        // consecutive strata"
        let mut expected: BTreeSet<(usize, usize)> = BTreeSet::new();
        for w in strata.windows(2) {
            for &g in &w[0] {
                for &l in &w[1] {
                    expected.insert((g, l));
                }
            }
        }
        let actual: BTreeSet<(usize, usize)> = self.order.iter().cloned().collect();
        if expected != actual {
            return Err(validation("order relation is not expressible in the hypothesis grammar"));
        }
        Ok(strata
            .iter_mut()
            .map(|lv| level_str(lv, true))
            .collect::<Vec<_>>()
            .join(">"))
    }
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    k: usize,
}

type Term = Vec<Vec<usize>>; // blocks (atoms) of one term

impl<'a> Parser<'a> {
    fn new(text: &'a str, k: usize) -> Self {
        Parser { text: text.as_bytes(), pos: 0, k }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { position: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn parse(mut self) -> Result<HypothesisSpec> {
        if self.text.is_empty() {
            return Err(self.err("empty hypothesis string"));
        }
        let first = self.parse_term()?;
        let mut terms = vec![first];
        let mut rels: Vec<(usize, u8, usize)> = Vec::new();
        while let Some(c) = self.peek() {
            match c {
                b'>' | b'<' => {
                    self.bump();
                    let t = self.parse_term()?;
                    terms.push(t);
                    rels.push((terms.len() - 2, c, terms.len() - 1));
                }
                _ => return Err(self.err(format!("unexpected character '{}'", c as char))),
            }
        }
        // assemble blocks in appearance order
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut term_block_ids: Vec<Vec<usize>> = Vec::new();
        for term in &terms {
            let mut ids = Vec::new();
            for atom in term {
                ids.push(blocks.len());
                blocks.push(atom.clone());
            }
            term_block_ids.push(ids);
        }
        let mut order = Vec::new();
        for (t1, op, t2) in rels {
            for &a in &term_block_ids[t1] {
                for &b in &term_block_ids[t2] {
                    match op {
                        b'>' => order.push((a, b)),
                        _ => order.push((b, a)),
                    }
                }
            }
        }
        HypothesisSpec::new(self.k, blocks, order)
    }

    fn parse_term(&mut self) -> Result<Term> {
        if self.peek() == Some(b'(') {
            self.bump();
            let inner = self.parse_comma_list()?;
            if self.peek() != Some(b')') {
                return Err(self.err("expected ')'"));
            }
            self.bump();
            return Ok(inner);
        }
        self.parse_comma_list()
    }

    fn parse_comma_list(&mut self) -> Result<Term> {
        let mut atoms = vec![self.parse_atom()?];
        while self.peek() == Some(b',') {
            self.bump();
            atoms.push(self.parse_atom()?);
        }
        Ok(atoms)
    }

    fn parse_atom(&mut self) -> Result<Vec<usize>> {
        let mut ids = vec![self.parse_index()?];
        while self.peek() == Some(b'=') {
            self.bump();
            ids.push(self.parse_index()?);
        }
        Ok(ids)
    }

    fn parse_index(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a group index"));
        }
        let s = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
        let v: usize = s.parse().map_err(|_| self.err("index out of range"))?;
        if v == 0 {
            return Err(self.err("group indices are 1-based"));
        }
        if v > self.k {
            return Err(validation(format!("group index {v} out of 1..={}", self.k)));
        }
        Ok(v - 1)
    }
}
