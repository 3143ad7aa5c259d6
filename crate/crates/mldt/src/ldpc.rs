//! Regular binary LDPC codes: seeded progressive-edge-growth construction,
//! systematic encoding via GF(2) elimination, and sum-product decoding.
//!
//! The workhorse is the (1008, 504) (3,6)-regular profile; the alist reader
//! accepts externally constructed matrices in the standard interchange
//! format.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::substream;

/// Internal message clamp for decoder LLRs. Chosen so tanh(MSG_CLAMP/2)
/// stays strictly below 1 in f64 and the linear-domain tuple decoder floor
/// 1/(1+e^MSG_CLAMP) maps to exactly the same saturation point.
pub const MSG_CLAMP: f64 = 36.0;

/// Sparse parity-check matrix with row and column adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityMatrix {
    n: usize,
    m: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
}

impl ParityMatrix {
    pub fn from_rows(n: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let m = rows.len();
        let mut cols = vec![Vec::new(); n];
        for (c, row) in rows.iter().enumerate() {
            for &v in row {
                if v >= n {
                    return Err(Error::dimension(format!("variable index {v} out of range for n={n}")));
                }
                cols[v].push(c);
            }
        }
        Ok(ParityMatrix { n, m, rows, cols })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Message length assuming full rank.
    pub fn k(&self) -> usize {
        self.n - self.m
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn cols(&self) -> &[Vec<usize>] {
        &self.cols
    }

    pub fn num_edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// True iff H b = 0 over GF(2).
    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        self.rows
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &v| acc ^ (bits[v] & 1)) == 0)
    }

    /// Number of check pairs shared by more than one variable (each such pair
    /// is a length-4 cycle).
    pub fn count_four_cycles(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut cycles = 0;
        for col in &self.cols {
            for i in 0..col.len() {
                for j in (i + 1)..col.len() {
                    let key = (col[i].min(col[j]), col[i].max(col[j]));
                    if !seen.insert(key) {
                        cycles += 1;
                    }
                }
            }
        }
        cycles
    }
}

/// Whether a (col_weight)-regular code with these dimensions can avoid
/// 4-cycles at all: every variable consumes C(col_weight, 2) distinct check
/// pairs out of C(m, 2).
fn girth_six_feasible(n: usize, m: usize, col_weight: usize) -> bool {
    let pairs_needed = n * col_weight * (col_weight - 1) / 2;
    let pairs_available = m * (m - 1) / 2;
    pairs_needed <= pairs_available
}

/// Construct a (col_weight, row_weight)-regular parity matrix by progressive
/// edge growth, deterministic under `seed`.
///
/// Girth >= 6 is enforced whenever the dimensions admit it; for tiny or very
/// high-rate instances where 4-cycles are unavoidable by counting, the best
/// PEG result is returned.
pub fn construct_regular(
    n: usize,
    m: usize,
    col_weight: usize,
    row_weight: usize,
    seed: u64,
) -> Result<ParityMatrix> {
    if col_weight == 0 || row_weight == 0 || n == 0 || m == 0 {
        return Err(Error::config("code dimensions and weights must be positive"));
    }
    if n * col_weight != m * row_weight {
        return Err(Error::config(format!(
            "infeasible regular profile: n*col_weight = {} but m*row_weight = {}",
            n * col_weight,
            m * row_weight
        )));
    }
    let enforce_girth = girth_six_feasible(n, m, col_weight);
    let attempts = 32;
    let mut best: Option<ParityMatrix> = None;
    for attempt in 0..attempts {
        let mut rng = substream(seed, 0x1dc0_0000 + attempt);
        let matrix = peg_construct(n, m, col_weight, row_weight, &mut rng);
        if !enforce_girth {
            return Ok(matrix);
        }
        if matrix.count_four_cycles() == 0 {
            return Ok(matrix);
        }
        best = Some(matrix);
    }
    let _ = best;
    Err(Error::Construction(format!(
        "girth-6 PEG construction failed after {attempts} attempts for ({n}, {m}) with weights ({col_weight}, {row_weight})"
    )))
}

fn peg_construct(
    n: usize,
    m: usize,
    col_weight: usize,
    row_weight: usize,
    rng: &mut ChaCha8Rng,
) -> ParityMatrix {
    let mut check_vars: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut var_checks: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        for t in 0..col_weight {
            let c = if t == 0 {
                pick_min_degree(&check_vars, row_weight, |_| true, rng)
            } else {
                select_distant_check(v, &check_vars, &var_checks, row_weight, rng)
            };
            check_vars[c].push(v);
            var_checks[v].push(c);
        }
    }
    ParityMatrix::from_rows(n, check_vars).expect("peg indices in range")
}

fn pick_min_degree(
    check_vars: &[Vec<usize>],
    row_weight: usize,
    allow: impl Fn(usize) -> bool,
    rng: &mut ChaCha8Rng,
) -> usize {
    let mut best_deg = usize::MAX;
    let mut ties: Vec<usize> = Vec::new();
    for (c, vars) in check_vars.iter().enumerate() {
        if vars.len() >= row_weight || !allow(c) {
            continue;
        }
        match vars.len().cmp(&best_deg) {
            std::cmp::Ordering::Less => {
                best_deg = vars.len();
                ties.clear();
                ties.push(c);
            }
            std::cmp::Ordering::Equal => ties.push(c),
            std::cmp::Ordering::Greater => {}
        }
    }
    ties[rng.gen_range(0..ties.len())]
}

/// BFS from variable `v` through the current bipartite graph; choose a
/// non-full check outside the deepest reachable neighborhood.
fn select_distant_check(
    v: usize,
    check_vars: &[Vec<usize>],
    var_checks: &[Vec<usize>],
    row_weight: usize,
    rng: &mut ChaCha8Rng,
) -> usize {
    let m = check_vars.len();
    let mut reached = vec![false; m];
    let mut var_seen = vec![false; var_checks.len()];
    var_seen[v] = true;
    let mut frontier: Vec<usize> = var_checks[v].clone();
    for &c in &frontier {
        reached[c] = true;
    }
    let any_unreached = |reached: &[bool]| {
        (0..m).any(|c| !reached[c] && check_vars[c].len() < row_weight)
    };
    let mut last_good = reached.clone();
    while any_unreached(&reached) {
        last_good = reached.clone();
        let mut next: Vec<usize> = Vec::new();
        for &c in &frontier {
            for &u in &check_vars[c] {
                if !var_seen[u] {
                    var_seen[u] = true;
                    for &c2 in &var_checks[u] {
                        if !reached[c2] {
                            reached[c2] = true;
                            next.push(c2);
                        }
                    }
                }
            }
        }
        if next.is_empty() {
            // Graph component exhausted; everything outside `reached` is at
            // infinite distance.
            last_good = reached.clone();
            break;
        }
        frontier = next;
    }
    if any_unreached(&reached) {
        pick_min_degree(check_vars, row_weight, |c| !reached[c], rng)
    } else if any_unreached(&last_good) {
        pick_min_degree(check_vars, row_weight, |c| !last_good[c], rng)
    } else {
        // All non-full checks are direct neighbors; a double edge or 4-cycle
        // is forced.
        pick_min_degree(check_vars, row_weight, |_| true, rng)
    }
}

/// Systematic encoder derived from one-time GF(2) elimination of H.
#[derive(Debug, Clone)]
pub struct Encoder {
    n: usize,
    /// Parity (pivot) column per eliminated row.
    pivot_cols: Vec<usize>,
    /// Systematic (non-pivot) columns, in ascending order.
    systematic_cols: Vec<usize>,
    /// Reduced rows restricted to systematic columns, bit-packed.
    parity_rows: Vec<Vec<u64>>,
}

impl Encoder {
    /// Gaussian elimination; fails if H is rank deficient.
    pub fn new(matrix: &ParityMatrix) -> Result<Self> {
        let (n, m) = (matrix.n(), matrix.m());
        let words = n.div_ceil(64);
        let mut dense: Vec<Vec<u64>> = vec![vec![0u64; words]; m];
        for (r, row) in matrix.rows().iter().enumerate() {
            for &v in row {
                dense[r][v / 64] ^= 1u64 << (v % 64);
            }
        }
        let mut pivot_cols = Vec::with_capacity(m);
        let mut row_of_pivot = Vec::with_capacity(m);
        let mut next_row = 0usize;
        for col in 0..n {
            let word = col / 64;
            let bit = 1u64 << (col % 64);
            let Some(pivot) = (next_row..m).find(|&r| dense[r][word] & bit != 0) else {
                continue;
            };
            dense.swap(next_row, pivot);
            for r in 0..m {
                if r != next_row && dense[r][word] & bit != 0 {
                    let (src, dst) = if r < next_row {
                        let (a, b) = dense.split_at_mut(next_row);
                        (&b[0], &mut a[r])
                    } else {
                        let (a, b) = dense.split_at_mut(r);
                        (&a[next_row], &mut b[0])
                    };
                    for w in 0..words {
                        dst[w] ^= src[w];
                    }
                }
            }
            pivot_cols.push(col);
            row_of_pivot.push(next_row);
            next_row += 1;
            if next_row == m {
                break;
            }
        }
        if pivot_cols.len() < m {
            return Err(Error::Construction(format!(
                "parity matrix rank {} < {m}; encoder needs full row rank",
                pivot_cols.len()
            )));
        }
        let pivot_set: std::collections::HashSet<usize> = pivot_cols.iter().copied().collect();
        let systematic_cols: Vec<usize> = (0..n).filter(|c| !pivot_set.contains(c)).collect();
        let k = systematic_cols.len();
        let kwords = k.div_ceil(64);
        let mut parity_rows = vec![vec![0u64; kwords]; m];
        for (r, row) in dense.iter().enumerate() {
            for (t, &col) in systematic_cols.iter().enumerate() {
                if row[col / 64] & (1u64 << (col % 64)) != 0 {
                    parity_rows[r][t / 64] ^= 1u64 << (t % 64);
                }
            }
        }
        Ok(Encoder {
            n,
            pivot_cols,
            systematic_cols,
            parity_rows,
        })
    }

    pub fn message_len(&self) -> usize {
        self.systematic_cols.len()
    }

    pub fn codeword_len(&self) -> usize {
        self.n
    }

    /// Columns carrying the message bits, ascending.
    pub fn systematic_cols(&self) -> &[usize] {
        &self.systematic_cols
    }

    /// Encode a message into a codeword with H b = 0.
    pub fn encode(&self, msg: &[u8]) -> Result<Vec<u8>> {
        let k = self.message_len();
        if msg.len() != k {
            return Err(Error::dimension(format!("message length {} != k = {k}", msg.len())));
        }
        let kwords = k.div_ceil(64);
        let mut packed = vec![0u64; kwords];
        for (t, &b) in msg.iter().enumerate() {
            if b & 1 != 0 {
                packed[t / 64] ^= 1u64 << (t % 64);
            }
        }
        let mut codeword = vec![0u8; self.n];
        for (t, &col) in self.systematic_cols.iter().enumerate() {
            codeword[col] = msg[t] & 1;
        }
        for (r, row) in self.parity_rows.iter().enumerate() {
            let mut acc = 0u32;
            for (w, &bits) in row.iter().enumerate() {
                acc ^= (bits & packed[w]).count_ones();
            }
            codeword[self.pivot_cols[r]] = (acc & 1) as u8;
        }
        Ok(codeword)
    }
}

/// Build matrix and encoder together, retrying the seeded construction if a
/// draw is rank deficient.
pub fn construct_with_encoder(
    n: usize,
    m: usize,
    col_weight: usize,
    row_weight: usize,
    seed: u64,
) -> Result<(ParityMatrix, Encoder)> {
    let mut last_err = None;
    for attempt in 0..16u64 {
        let matrix = construct_regular(n, m, col_weight, row_weight, seed.wrapping_add(attempt))?;
        match Encoder::new(&matrix) {
            Ok(enc) => return Ok((matrix, enc)),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Construction("encoder setup failed".into())))
}

/// Result of a sum-product decode.
#[derive(Debug, Clone)]
pub struct SpaOutput {
    pub hard: Vec<u8>,
    pub posterior: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Flooding-schedule sum-product decoding in the LLR domain with the exact
/// tanh rule at check nodes. Early exit on zero syndrome.
pub fn spa_decode(llrs: &[f64], matrix: &ParityMatrix, max_iter: usize) -> Result<SpaOutput> {
    spa_decode_with(llrs, matrix, max_iter, true)
}

/// As `spa_decode`, with the early exit controllable for strict fixed-budget
/// reproduction.
pub fn spa_decode_with(
    llrs: &[f64],
    matrix: &ParityMatrix,
    max_iter: usize,
    early_exit: bool,
) -> Result<SpaOutput> {
    if llrs.len() != matrix.n() {
        return Err(Error::dimension(format!(
            "LLR frame length {} != n = {}",
            llrs.len(),
            matrix.n()
        )));
    }
    if llrs.iter().any(|l| !l.is_finite()) {
        return Err(Error::config("input LLRs must be finite"));
    }
    let input: Vec<f64> = llrs.iter().map(|&l| l.clamp(-MSG_CLAMP, MSG_CLAMP)).collect();

    // Flat edge arrays.
    let mut edge_var: Vec<usize> = Vec::with_capacity(matrix.num_edges());
    let mut check_edges: Vec<Vec<usize>> = Vec::with_capacity(matrix.m());
    let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); matrix.n()];
    for row in matrix.rows() {
        let mut edges = Vec::with_capacity(row.len());
        for &v in row {
            let e = edge_var.len();
            edge_var.push(v);
            var_edges[v].push(e);
            edges.push(e);
        }
        check_edges.push(edges);
    }
    let num_edges = edge_var.len();
    let mut c2v = vec![0.0f64; num_edges];
    let mut v2c = vec![0.0f64; num_edges];
    let mut hard = vec![0u8; matrix.n()];
    let mut posterior = input.clone();
    let mut scratch: Vec<f64> = Vec::new();

    let mut iterations = 0;
    let mut converged = false;
    for iter in 1..=max_iter {
        iterations = iter;
        for (v, edges) in var_edges.iter().enumerate() {
            let total: f64 = input[v] + edges.iter().map(|&e| c2v[e]).sum::<f64>();
            for &e in edges {
                v2c[e] = (total - c2v[e]).clamp(-MSG_CLAMP, MSG_CLAMP);
            }
        }
        for edges in &check_edges {
            let d = edges.len();
            scratch.clear();
            scratch.extend(edges.iter().map(|&e| (v2c[e] / 2.0).tanh()));
            // forward/backward prefix products to exclude one edge at a time
            let mut fwd = vec![1.0f64; d + 1];
            for i in 0..d {
                fwd[i + 1] = fwd[i] * scratch[i];
            }
            let mut bwd = 1.0f64;
            for i in (0..d).rev() {
                let t = fwd[i] * bwd;
                c2v[edges[i]] = 2.0 * t.atanh();
                bwd *= scratch[i];
            }
        }
        for (v, edges) in var_edges.iter().enumerate() {
            posterior[v] = input[v] + edges.iter().map(|&e| c2v[e]).sum::<f64>();
            hard[v] = u8::from(posterior[v] < 0.0);
        }
        if matrix.syndrome_ok(&hard) {
            converged = true;
            if early_exit {
                break;
            }
        } else {
            converged = false;
        }
    }
    if max_iter == 0 {
        hard = posterior.iter().map(|&l| u8::from(l < 0.0)).collect();
        converged = matrix.syndrome_ok(&hard);
    }
    Ok(SpaOutput {
        hard,
        posterior,
        converged,
        iterations,
    })
}

/// Serialize in alist interchange format (1-indexed, zero padded).
pub fn to_alist(matrix: &ParityMatrix) -> String {
    let max_col = matrix.cols().iter().map(Vec::len).max().unwrap_or(0);
    let max_row = matrix.rows().iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", matrix.n(), matrix.m()));
    out.push_str(&format!("{max_col} {max_row}\n"));
    let col_degs: Vec<String> = matrix.cols().iter().map(|c| c.len().to_string()).collect();
    out.push_str(&col_degs.join(" "));
    out.push('\n');
    let row_degs: Vec<String> = matrix.rows().iter().map(|r| r.len().to_string()).collect();
    out.push_str(&row_degs.join(" "));
    out.push('\n');
    for col in matrix.cols() {
        let mut entries: Vec<String> = col.iter().map(|&c| (c + 1).to_string()).collect();
        entries.resize(max_col, "0".to_string());
        out.push_str(&entries.join(" "));
        out.push('\n');
    }
    for row in matrix.rows() {
        let mut entries: Vec<String> = row.iter().map(|&v| (v + 1).to_string()).collect();
        entries.resize(max_row, "0".to_string());
        out.push_str(&entries.join(" "));
        out.push('\n');
    }
    out
}

/// Parse an alist file body.
pub fn from_alist(text: &str) -> Result<ParityMatrix> {
    let mut tokens = text.split_whitespace().map(|t| {
        t.parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad alist token '{t}'")))
    });
    let mut next = |what: &str| {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("alist truncated at {what}")))?
    };
    let n = next("n")?;
    let m = next("m")?;
    let max_col = next("max col degree")?;
    let max_row = next("max row degree")?;
    let col_degs: Vec<usize> = (0..n).map(|_| next("col degree")).collect::<Result<_>>()?;
    let row_degs: Vec<usize> = (0..m).map(|_| next("row degree")).collect::<Result<_>>()?;
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (v, &deg) in col_degs.iter().enumerate() {
        for slot in 0..max_col {
            let entry = next("col adjacency")?;
            if slot < deg {
                if entry == 0 || entry > m {
                    return Err(Error::Parse(format!("check index {entry} out of range")));
                }
                rows[entry - 1].push(v);
            }
        }
    }
    // Row adjacency lists are redundant with the column lists; consume and
    // cross-check degrees if present.
    for _ in 0..m {
        for _ in 0..max_row {
            if tokens.next().is_none() {
                // Row section omitted entirely is tolerated.
                break;
            }
        }
    }
    for row in &mut rows {
        row.sort_unstable();
    }
    let matrix = ParityMatrix::from_rows(n, rows)?;
    for (r, &deg) in row_degs.iter().enumerate() {
        if matrix.rows()[r].len() != deg {
            return Err(Error::Parse(format!(
                "row {r} degree {} does not match declared {deg}",
                matrix.rows()[r].len()
            )));
        }
    }
    Ok(matrix)
}

pub fn write_alist(matrix: &ParityMatrix, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, to_alist(matrix))?;
    Ok(())
}

pub fn read_alist(path: &std::path::Path) -> Result<ParityMatrix> {
    let text = std::fs::read_to_string(path)?;
    from_alist(&text)
}
