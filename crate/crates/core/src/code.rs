//! (2,k)-regular non-binary mother codes and their multiplicatively repeated
//! extensions.
//!
//! A [`MotherCode`] is a sparse parity-check matrix over GF(2^p). A
//! [`RepCode`] appends repetition symbols `x[tN + n] = r[tN + n] * x[n]`
//! stage by stage; the repetition symbols never enter the message-passing
//! graph, so every decoder works on the mother code alone.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gf::{Field, Symbol};

/// One nonzero entry `h[check][symbol] = coef` of the parity-check matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub check: u32,
    pub symbol: u32,
    pub coef: Symbol,
}

/// Sparse parity-check matrix with Tanner adjacency in both directions.
///
/// Edges are stored sorted by `(check, symbol)`, so the edges of check `m`
/// are the contiguous range `check_edges(m)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotherCode {
    field: Field,
    n_symbols: usize,
    n_checks: usize,
    k: usize,
    seed: u64,
    edges: Vec<Edge>,
    check_ptr: Vec<usize>,
    // symbol n owns symbol_edges[symbol_ptr[n]..symbol_ptr[n + 1]]
    symbol_ptr: Vec<usize>,
    symbol_edges: Vec<usize>,
}

impl MotherCode {
    /// Progressive edge-growth construction specialised to symbol degree 2.
    ///
    /// With every symbol of degree 2, the Tanner graph is a multigraph on the
    /// checks with one graph edge per symbol, and a Tanner cycle of length 2l
    /// is a check-graph cycle of length l. Each new symbol joins the
    /// least-loaded check to the non-full check farthest from it (ties broken
    /// by load, then at random). `M = ceil(2N / k)`; when `k` does not divide
    /// `2N` the leftover capacity is left on at most `k - 1` checks.
    ///
    /// `girth_target` of 0 means "as large as the greedy search gets"; a
    /// positive target that is not met only logs a warning.
    pub fn build(field: Field, n: usize, k: usize, girth_target: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidCode(format!("check degree {k} < 2")));
        }
        if n < k {
            return Err(Error::InvalidCode(format!("length {n} smaller than check degree {k}")));
        }
        if n > u32::MAX as usize / 2 {
            return Err(Error::InvalidCode(format!("length {n} too large")));
        }
        let m = (2 * n).div_ceil(k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        // endpoints[s] = the two checks symbol s connects.
        let mut endpoints: Vec<[u32; 2]> = Vec::with_capacity(n);
        let mut degree = vec![0usize; m];
        let mut adj: Vec<Vec<(u32, u32)>> = vec![Vec::new(); m]; // (neighbour check, symbol)
        let mut dist = vec![usize::MAX; m];
        let mut queue = VecDeque::with_capacity(m);
        let mut candidates = Vec::with_capacity(m);

        for s in 0..n {
            let c1 = pick_min(&degree, k, (0..m).filter(|&c| degree[c] < k), &mut rng, &mut candidates)
                .expect("capacity m*k >= 2n leaves a free slot");

            dist.iter_mut().for_each(|d| *d = usize::MAX);
            dist[c1] = 0;
            queue.clear();
            queue.push_back(c1);
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &adj[u] {
                    let v = v as usize;
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            let farthest = (0..m).filter(|&c| c != c1 && degree[c] < k).map(|c| dist[c]).max();

            match farthest {
                Some(dmax) => {
                    let c2 = pick_min(
                        &degree,
                        k,
                        (0..m).filter(|&c| c != c1 && degree[c] < k && dist[c] == dmax),
                        &mut rng,
                        &mut candidates,
                    )
                    .unwrap();
                    connect(&mut endpoints, &mut adj, &mut degree, s, c1, c2);
                }
                None => {
                    // Only c1 has room left, and it needs two slots. Split an
                    // existing symbol (a, b) into (a, c1) and give the new
                    // symbol (c1, b); degrees of a and b are unchanged.
                    debug_assert!(k - degree[c1] >= 2);
                    let donors: Vec<usize> = (0..s)
                        .filter(|&t| endpoints[t][0] as usize != c1 && endpoints[t][1] as usize != c1)
                        .collect();
                    if donors.is_empty() {
                        return Err(Error::InvalidCode(format!(
                            "cannot place symbol {s}: N={n}, k={k} too small"
                        )));
                    }
                    let t = donors[rng.random_range(0..donors.len())];
                    let [a, b] = endpoints[t];
                    let (a, b) = (a as usize, b as usize);
                    adj[a].retain(|&(_, sym)| sym as usize != t);
                    adj[b].retain(|&(_, sym)| sym as usize != t);
                    endpoints[t] = [a as u32, c1 as u32];
                    adj[a].push((c1 as u32, t as u32));
                    adj[c1].push((a as u32, t as u32));
                    degree[b] -= 1;
                    degree[c1] += 1;
                    connect(&mut endpoints, &mut adj, &mut degree, s, c1, b);
                }
            }
        }

        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(2 * n);
        for (s, &[a, b]) in endpoints.iter().enumerate() {
            pairs.push((a, s as u32));
            pairs.push((b, s as u32));
        }
        pairs.sort_unstable();
        let q = field.order() as u32;
        let edges: Vec<Edge> = pairs
            .into_iter()
            .map(|(check, symbol)| Edge {
                check,
                symbol,
                coef: rng.random_range(1..q) as Symbol,
            })
            .collect();

        let code = Self::from_edges(field, n, m, k, seed, edges)?;
        if girth_target > 0 {
            match code.girth() {
                Some(g) if g < girth_target => {
                    log::warn!("girth {g} below target {girth_target} (N={n}, k={k}, seed={seed})")
                }
                _ => {}
            }
        }
        Ok(code)
    }

    /// Code from an explicit edge list. Only structural validity is checked
    /// (indices in range, nonzero coefficients, no repeated edge); the
    /// (2,k) profile is not enforced, so toy and tree-shaped graphs can be
    /// expressed too.
    pub fn from_edges(
        field: Field,
        n_symbols: usize,
        n_checks: usize,
        k: usize,
        seed: u64,
        mut edges: Vec<Edge>,
    ) -> Result<Self> {
        for e in &edges {
            if e.check as usize >= n_checks || e.symbol as usize >= n_symbols {
                return Err(Error::InvalidCode(format!(
                    "edge ({}, {}) outside {}x{} matrix",
                    e.check, e.symbol, n_checks, n_symbols
                )));
            }
            if e.coef == 0 || !field.contains(e.coef as u32) {
                return Err(Error::InvalidCode(format!(
                    "edge ({}, {}) has invalid coefficient {}",
                    e.check, e.symbol, e.coef
                )));
            }
        }
        edges.sort_unstable_by_key(|e| (e.check, e.symbol));
        if let Some(w) = edges
            .windows(2)
            .find(|w| w[0].check == w[1].check && w[0].symbol == w[1].symbol)
        {
            return Err(Error::InvalidCode(format!(
                "repeated edge ({}, {})",
                w[0].check, w[0].symbol
            )));
        }

        let mut check_ptr = vec![0usize; n_checks + 1];
        for e in &edges {
            check_ptr[e.check as usize + 1] += 1;
        }
        for i in 0..n_checks {
            check_ptr[i + 1] += check_ptr[i];
        }
        let mut symbol_ptr = vec![0usize; n_symbols + 1];
        for e in &edges {
            symbol_ptr[e.symbol as usize + 1] += 1;
        }
        for i in 0..n_symbols {
            symbol_ptr[i + 1] += symbol_ptr[i];
        }
        let mut fill = symbol_ptr.clone();
        let mut symbol_edges = vec![0usize; edges.len()];
        for (i, e) in edges.iter().enumerate() {
            let slot = &mut fill[e.symbol as usize];
            symbol_edges[*slot] = i;
            *slot += 1;
        }

        Ok(MotherCode {
            field,
            n_symbols,
            n_checks,
            k,
            seed,
            edges,
            check_ptr,
            symbol_ptr,
            symbol_edges,
        })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    /// N, the mother length in symbols.
    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    /// M, the number of checks (syndrome length).
    pub fn n_checks(&self) -> usize {
        self.n_checks
    }

    pub fn check_degree(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn check_edges(&self, m: usize) -> std::ops::Range<usize> {
        self.check_ptr[m]..self.check_ptr[m + 1]
    }

    /// Indices into [`MotherCode::edges`] of the edges touching symbol `n`.
    pub fn symbol_edges(&self, n: usize) -> &[usize] {
        &self.symbol_edges[self.symbol_ptr[n]..self.symbol_ptr[n + 1]]
    }

    /// Design rate (N - M) / N.
    pub fn rate(&self) -> f64 {
        (self.n_symbols as f64 - self.n_checks as f64) / self.n_symbols as f64
    }

    /// Histogram of check degrees: `hist[d]` checks have degree `d`.
    pub fn check_degree_histogram(&self) -> Vec<usize> {
        let mut hist = Vec::new();
        for m in 0..self.n_checks {
            let d = self.check_edges(m).len();
            if hist.len() <= d {
                hist.resize(d + 1, 0);
            }
            hist[d] += 1;
        }
        hist
    }

    pub fn symbol_degree_histogram(&self) -> Vec<usize> {
        let mut hist = Vec::new();
        for n in 0..self.n_symbols {
            let d = self.symbol_edges(n).len();
            if hist.len() <= d {
                hist.resize(d + 1, 0);
            }
            hist[d] += 1;
        }
        hist
    }

    /// True when every symbol has degree 2 and every check degree k, apart
    /// from at most k - 1 checks of degree k - 1 when k does not divide 2N.
    pub fn is_regular(&self) -> bool {
        if (0..self.n_symbols).any(|n| self.symbol_edges(n).len() != 2) {
            return false;
        }
        let short = (0..self.n_checks)
            .filter(|&m| self.check_edges(m).len() != self.k)
            .collect::<Vec<_>>();
        let deficit = self.n_checks * self.k - 2 * self.n_symbols;
        short.len() == deficit && short.len() < self.k && short.iter().all(|&m| self.check_edges(m).len() == self.k - 1)
    }

    /// Length of the shortest cycle in the Tanner graph, or `None` for a
    /// forest. Exhaustive BFS from every symbol node.
    pub fn girth(&self) -> Option<usize> {
        let n = self.n_symbols;
        let total = n + self.n_checks;
        let mut dist = vec![usize::MAX; total];
        let mut parent_edge = vec![usize::MAX; total];
        let mut touched = Vec::new();
        let mut queue = VecDeque::new();
        let mut best = usize::MAX;

        for root in 0..n {
            for &t in &touched {
                dist[t] = usize::MAX;
                parent_edge[t] = usize::MAX;
            }
            touched.clear();
            queue.clear();
            dist[root] = 0;
            touched.push(root);
            queue.push_back(root);
            while let Some(u) = queue.pop_front() {
                if 2 * dist[u] + 1 >= best {
                    break;
                }
                let neighbours: Vec<(usize, usize)> = if u < n {
                    self.symbol_edges(u)
                        .iter()
                        .map(|&e| (n + self.edges[e].check as usize, e))
                        .collect()
                } else {
                    self.check_edges(u - n)
                        .map(|e| (self.edges[e].symbol as usize, e))
                        .collect()
                };
                for (v, e) in neighbours {
                    if e == parent_edge[u] {
                        continue;
                    }
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        parent_edge[v] = e;
                        touched.push(v);
                        queue.push_back(v);
                    } else {
                        best = best.min(dist[u] + dist[v] + 1);
                    }
                }
            }
        }
        (best != usize::MAX).then_some(best)
    }

    /// `z = H x` over GF(q).
    pub fn syndrome(&self, x: &[Symbol]) -> Result<Vec<Symbol>> {
        if x.len() != self.n_symbols {
            return Err(Error::LengthMismatch {
                expected: self.n_symbols,
                actual: x.len(),
            });
        }
        Ok(self.syndrome_unchecked(x))
    }

    pub(crate) fn syndrome_unchecked(&self, x: &[Symbol]) -> Vec<Symbol> {
        (0..self.n_checks)
            .map(|m| {
                self.edges[self.check_edges(m)]
                    .iter()
                    .fold(0, |acc, e| acc ^ self.field.mul(e.coef, x[e.symbol as usize]))
            })
            .collect()
    }

    /// Number of checks where `H x != z`.
    pub fn unsatisfied_checks(&self, x: &[Symbol], z: &[Symbol]) -> usize {
        (0..self.n_checks)
            .filter(|&m| {
                let s = self.edges[self.check_edges(m)]
                    .iter()
                    .fold(0, |acc, e| acc ^ self.field.mul(e.coef, x[e.symbol as usize]));
                s != z[m]
            })
            .count()
    }
}

fn pick_min(
    degree: &[usize],
    k: usize,
    pool: impl Iterator<Item = usize>,
    rng: &mut ChaCha8Rng,
    scratch: &mut Vec<usize>,
) -> Option<usize> {
    scratch.clear();
    let mut best = k;
    for c in pool {
        match degree[c].cmp(&best) {
            std::cmp::Ordering::Less => {
                best = degree[c];
                scratch.clear();
                scratch.push(c);
            }
            std::cmp::Ordering::Equal => scratch.push(c),
            std::cmp::Ordering::Greater => {}
        }
    }
    match scratch.len() {
        0 => None,
        1 => Some(scratch[0]),
        len => Some(scratch[rng.random_range(0..len)]),
    }
}

fn connect(
    endpoints: &mut Vec<[u32; 2]>,
    adj: &mut [Vec<(u32, u32)>],
    degree: &mut [usize],
    s: usize,
    a: usize,
    b: usize,
) {
    debug_assert_eq!(endpoints.len(), s);
    endpoints.push([a as u32, b as u32]);
    adj[a].push((b as u32, s as u32));
    adj[b].push((a as u32, s as u32));
    degree[a] += 1;
    degree[b] += 1;
}

/// Mother code plus multiplicative repetition coefficients.
///
/// Repetition symbol `j` (0-based, after the N mother symbols) sits at word
/// position `N + j`, repeats mother symbol `j % N` and carries coefficient
/// `coefs[j]`, so stage `t = 1 + j / N` is filled in mother index order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepCode {
    mother: MotherCode,
    coefs: Vec<Symbol>,
}

impl RepCode {
    pub fn new(mother: MotherCode) -> Self {
        RepCode {
            mother,
            coefs: Vec::new(),
        }
    }

    /// `C_T` with all `T - 1` repetition stages full.
    pub fn with_stages(mother: MotherCode, stages: usize, seed: u64) -> Result<Self> {
        if stages == 0 {
            return Err(Error::InvalidParameter("repetition parameter T must be >= 1".into()));
        }
        let n = mother.n_symbols();
        RepCode::new(mother).extend_to((stages - 1) * n, seed)
    }

    pub fn from_parts(mother: MotherCode, coefs: Vec<Symbol>) -> Result<Self> {
        let q = mother.field().order();
        if let Some(j) = coefs.iter().position(|&c| c == 0 || c as usize >= q) {
            return Err(Error::InvalidCode(format!(
                "repetition coefficient {j} is {}, expected a nonzero element",
                coefs[j]
            )));
        }
        Ok(RepCode { mother, coefs })
    }

    /// Appends repetition symbols until there are `total` of them.
    ///
    /// The coefficient of repetition symbol `j` is the `j`-th uniform nonzero
    /// draw of a ChaCha8 stream seeded with `seed`, so extending in several
    /// steps with one seed gives the same code as extending once. Existing
    /// coefficients are kept whatever seed produced them.
    pub fn extend_to(&self, total: usize, seed: u64) -> Result<Self> {
        let have = self.coefs.len();
        if total < have {
            return Err(Error::InvalidParameter(format!(
                "cannot shrink from {have} to {total} repetition symbols"
            )));
        }
        let q = self.mother.field().order() as u32;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coefs = self.coefs.clone();
        coefs.reserve(total - have);
        for j in 0..total {
            let c = rng.random_range(1..q) as Symbol;
            if j >= have {
                coefs.push(c);
            }
        }
        Ok(RepCode {
            mother: self.mother.clone(),
            coefs,
        })
    }

    pub fn mother(&self) -> &MotherCode {
        &self.mother
    }

    pub fn field(&self) -> &Field {
        self.mother.field()
    }

    pub fn coefs(&self) -> &[Symbol] {
        &self.coefs
    }

    pub fn n_repetitions(&self) -> usize {
        self.coefs.len()
    }

    /// Transmitted length `(T - 1) N + extra` in symbols.
    pub fn len_symbols(&self) -> usize {
        self.mother.n_symbols() + self.coefs.len()
    }

    /// Transmitted length in bits.
    pub fn len_bits(&self) -> usize {
        self.len_symbols() * self.field().degree() as usize
    }

    /// Repetition parameter T (the last stage may be partial).
    pub fn stages(&self) -> usize {
        1 + self.coefs.len().div_ceil(self.mother.n_symbols())
    }

    /// Symbols in the last stage, in `1..=N`.
    pub fn extra(&self) -> usize {
        let n = self.mother.n_symbols();
        self.len_symbols() - (self.stages() - 1) * n
    }

    /// (N - M) / L.
    pub fn rate(&self) -> f64 {
        let m = &self.mother;
        (m.n_symbols() as f64 - m.n_checks() as f64) / self.len_symbols() as f64
    }

    /// Mother symbol repeated by repetition symbol `j`, and its coefficient.
    #[inline]
    pub fn repetition(&self, j: usize) -> (usize, Symbol) {
        (j % self.mother.n_symbols(), self.coefs[j])
    }

    pub fn syndrome(&self, x: &[Symbol]) -> Result<Vec<Symbol>> {
        self.mother.syndrome(x)
    }

    /// Full transmitted word `(x_1..x_N, r_{N+1} x_1, ...)`.
    pub fn encode(&self, x: &[Symbol]) -> Result<Vec<Symbol>> {
        let n = self.mother.n_symbols();
        if x.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        let f = self.field();
        let mut word = Vec::with_capacity(self.len_symbols());
        word.extend_from_slice(x);
        word.extend(self.coefs.iter().enumerate().map(|(j, &r)| f.mul(r, x[j % n])));
        Ok(word)
    }

    /// Checks `x[N + j] + r[N + j] x[j % N] = 0` for every repetition symbol.
    pub fn repetitions_consistent(&self, word: &[Symbol]) -> bool {
        let n = self.mother.n_symbols();
        word.len() == self.len_symbols()
            && self
                .coefs
                .iter()
                .enumerate()
                .all(|(j, &r)| word[n + j] ^ self.field().mul(r, word[j % n]) == 0)
    }

    /// Serialises to the `NBLDPC v1` text format:
    ///
    /// ```text
    /// NBLDPC v1
    /// q N M k seed poly
    /// m n h          (one line per edge, sorted by m then n, 0-based)
    /// T extra
    /// index r        (one line per repetition symbol, index = N + j)
    /// ```
    pub fn to_text(&self) -> String {
        let m = &self.mother;
        let mut out = String::new();
        out.push_str("NBLDPC v1\n");
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            m.field().order(),
            m.n_symbols(),
            m.n_checks(),
            m.check_degree(),
            m.seed(),
            m.field().modulus()
        );
        for e in m.edges() {
            let _ = writeln!(out, "{} {} {}", e.check, e.symbol, e.coef);
        }
        let _ = writeln!(out, "{} {}", self.stages(), self.extra());
        let n = m.n_symbols();
        for (j, &r) in self.coefs.iter().enumerate() {
            let _ = writeln!(out, "{} {}", n + j, r);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            })
        };

        let (ln, header) = next("header")?;
        if header != "NBLDPC v1" {
            return Err(Error::Parse {
                line: ln,
                msg: format!("bad header {header:?}"),
            });
        }
        let (ln, params) = next("parameter line")?;
        let params = parse_fields::<u64>(ln, params, 6)?;
        let (q, n, m, k, seed, poly) = (
            params[0] as usize,
            params[1] as usize,
            params[2] as usize,
            params[3] as usize,
            params[4],
            params[5] as u32,
        );
        if !q.is_power_of_two() || q < 2 {
            return Err(Error::Parse {
                line: ln,
                msg: format!("field order {q} is not a power of two"),
            });
        }
        let field = Field::with_modulus(q.trailing_zeros(), poly)?;

        let mut edges = Vec::new();
        let mut tail = None;
        for (ln, line) in lines.by_ref() {
            let f = parse_fields::<u64>(ln, line, 0)?;
            match f.len() {
                3 => edges.push(Edge {
                    check: f[0] as u32,
                    symbol: f[1] as u32,
                    coef: field.check(f[2] as u32)?,
                }),
                2 => {
                    tail = Some((ln, f[0] as usize, f[1] as usize));
                    break;
                }
                _ => {
                    return Err(Error::Parse {
                        line: ln,
                        msg: format!("expected 'm n h' or 'T extra', got {line:?}"),
                    })
                }
            }
        }
        let (ln, stages, extra) = tail.ok_or_else(|| Error::Parse {
            line: 0,
            msg: "missing 'T extra' line".into(),
        })?;
        if stages == 0 || extra == 0 || extra > n {
            return Err(Error::Parse {
                line: ln,
                msg: format!("invalid T={stages} extra={extra}"),
            });
        }
        let n_rep = (stages - 1) * n + extra - n;

        let mut coefs = Vec::with_capacity(n_rep);
        for (ln, line) in lines {
            let f = parse_fields::<u64>(ln, line, 2)?;
            if f[0] as usize != n + coefs.len() {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("expected index {}, got {}", n + coefs.len(), f[0]),
                });
            }
            coefs.push(field.check(f[1] as u32)?);
        }
        if coefs.len() != n_rep {
            return Err(Error::Parse {
                line: 0,
                msg: format!("expected {n_rep} repetition coefficients, got {}", coefs.len()),
            });
        }

        let mother = MotherCode::from_edges(field, n, m, k, seed, edges)?;
        RepCode::from_parts(mother, coefs)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn parse_fields<T: std::str::FromStr>(line_no: usize, line: &str, expect: usize) -> Result<Vec<T>> {
    let out = line
        .split(' ')
        .map(|tok| {
            tok.parse::<T>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad number {tok:?}"),
            })
        })
        .collect::<Result<Vec<T>>>()?;
    if expect != 0 && out.len() != expect {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("expected {expect} fields, got {}", out.len()),
        });
    }
    Ok(out)
}
