//! Maximum-weight matching in general graphs via Edmonds' blossom method
//! with primal-dual weight updates, after Galil's formulation and Joris van
//! Rantwijk's reference implementation.
//!
//! Weights are integers, so all dual variables stay integral and the
//! optimum is exact. Vertex duals are stored premultiplied by two. The
//! algorithm runs in O(V^3); decoding instances keep V small by pruning, so
//! the cubic bound is not the bottleneck in practice.
//!
//! After [`MaxWeightMatching::solve`], the final dual variables and blossom
//! forest remain available through [`MaxWeightMatching::pair_slack`], which
//! lets callers certify that edges omitted from the instance could not have
//! improved the matching.

const NONE: usize = usize::MAX;

/// Edge as (vertex, vertex, weight).
pub type WeightedEdge = (u32, u32, i64);

/// Solver state for one matching instance.
pub struct MaxWeightMatching {
    nvertex: usize,
    nedge: usize,
    edges: Vec<WeightedEdge>,
    // endpoint p (0..2*nedge) belongs to edge p/2; endpoint(p) is the
    // vertex that endpoint is attached to.
    neighbend: Vec<Vec<usize>>,
    mate: Vec<usize>,
    label: Vec<u8>,
    labelend: Vec<usize>,
    inblossom: Vec<usize>,
    blossomparent: Vec<usize>,
    blossomchilds: Vec<Vec<usize>>,
    blossombase: Vec<usize>,
    blossomendps: Vec<Vec<usize>>,
    bestedge: Vec<usize>,
    blossombestedges: Vec<Vec<usize>>,
    unusedblossoms: Vec<usize>,
    dualvar: Vec<i64>,
    allowedge: Vec<bool>,
    queue: Vec<usize>,
}

impl MaxWeightMatching {
    /// Prepare a solver for `nvertex` vertices and the given edges. Vertices
    /// without edges simply stay unmatched.
    pub fn new(nvertex: usize, edges: Vec<WeightedEdge>) -> Self {
        let nedge = edges.len();
        let maxweight = edges.iter().map(|e| e.2).max().unwrap_or(0).max(0);
        let mut neighbend = vec![Vec::new(); nvertex];
        for (k, &(i, j, _)) in edges.iter().enumerate() {
            debug_assert!(i != j);
            neighbend[i as usize].push(2 * k + 1);
            neighbend[j as usize].push(2 * k);
        }
        let mut dualvar = vec![maxweight; nvertex];
        dualvar.extend(std::iter::repeat(0).take(nvertex));
        MaxWeightMatching {
            nvertex,
            nedge,
            edges,
            neighbend,
            mate: vec![NONE; nvertex],
            label: vec![0; 2 * nvertex],
            labelend: vec![NONE; 2 * nvertex],
            inblossom: (0..nvertex).collect(),
            blossomparent: vec![NONE; 2 * nvertex],
            blossomchilds: vec![Vec::new(); 2 * nvertex],
            blossombase: (0..nvertex).chain(std::iter::repeat(NONE).take(nvertex)).collect(),
            blossomendps: vec![Vec::new(); 2 * nvertex],
            bestedge: vec![NONE; 2 * nvertex],
            blossombestedges: vec![Vec::new(); 2 * nvertex],
            unusedblossoms: (nvertex..2 * nvertex).collect(),
            dualvar,
            allowedge: vec![false; nedge],
            queue: Vec::new(),
        }
    }

    fn endpoint(&self, p: usize) -> usize {
        let (i, j, _) = self.edges[p / 2];
        if p % 2 == 0 {
            i as usize
        } else {
            j as usize
        }
    }

    // 2 * slack of edge k (not meaningful inside blossoms).
    fn slack(&self, k: usize) -> i64 {
        let (i, j, wt) = self.edges[k];
        self.dualvar[i as usize] + self.dualvar[j as usize] - 2 * wt
    }

    fn blossom_leaves(&self, b: usize) -> Vec<usize> {
        let mut leaves = Vec::new();
        let mut stack = vec![b];
        while let Some(t) = stack.pop() {
            if t < self.nvertex {
                leaves.push(t);
            } else {
                stack.extend(self.blossomchilds[t].iter().copied());
            }
        }
        leaves
    }

    fn assign_label(&mut self, w: usize, t: u8, p: usize) {
        let b = self.inblossom[w];
        debug_assert!(self.label[w] == 0 && self.label[b] == 0);
        self.label[w] = t;
        self.label[b] = t;
        self.labelend[w] = p;
        self.labelend[b] = p;
        self.bestedge[w] = NONE;
        self.bestedge[b] = NONE;
        if t == 1 {
            let leaves = self.blossom_leaves(b);
            self.queue.extend(leaves);
        } else if t == 2 {
            let base = self.blossombase[b];
            debug_assert!(self.mate[base] != NONE);
            let mbase = self.mate[base];
            let ep = self.endpoint(mbase);
            self.assign_label(ep, 1, mbase ^ 1);
        }
    }

    // Trace back from v and w to find a new blossom's base or an augmenting
    // path (returns NONE for the latter).
    fn scan_blossom(&mut self, v: usize, w: usize) -> usize {
        let mut path = Vec::new();
        let mut base = NONE;
        let mut v = v;
        let mut w = w;
        loop {
            if v == NONE && w == NONE {
                break;
            }
            let mut b = self.inblossom[v];
            if self.label[b] & 4 != 0 {
                base = self.blossombase[b];
                break;
            }
            debug_assert!(self.label[b] == 1);
            path.push(b);
            self.label[b] = 5;
            debug_assert!(self.labelend[b] == self.mate[self.blossombase[b]]);
            if self.labelend[b] == NONE {
                v = NONE;
            } else {
                v = self.endpoint(self.labelend[b]);
                b = self.inblossom[v];
                debug_assert!(self.label[b] == 2);
                debug_assert!(self.labelend[b] != NONE);
                v = self.endpoint(self.labelend[b]);
            }
            if w != NONE {
                std::mem::swap(&mut v, &mut w);
            }
        }
        for b in path {
            self.label[b] = 1;
        }
        base
    }

    // Construct a new blossom with the given base, containing edge k which
    // connects a pair of S-vertices.
    fn add_blossom(&mut self, base: usize, k: usize) {
        let (v0, w0, _) = self.edges[k];
        let (mut v, mut w) = (v0 as usize, w0 as usize);
        let bb = self.inblossom[base];
        let mut bv = self.inblossom[v];
        let mut bw = self.inblossom[w];

        let b = self.unusedblossoms.pop().expect("blossom pool exhausted");
        self.blossombase[b] = base;
        self.blossomparent[b] = NONE;
        self.blossomparent[bb] = b;

        let mut childs = Vec::new();
        let mut endps = Vec::new();
        while bv != bb {
            self.blossomparent[bv] = b;
            childs.push(bv);
            endps.push(self.labelend[bv]);
            debug_assert!(
                self.label[bv] == 2
                    || (self.label[bv] == 1
                        && self.labelend[bv] == self.mate[self.blossombase[bv]])
            );
            debug_assert!(self.labelend[bv] != NONE);
            v = self.endpoint(self.labelend[bv]);
            bv = self.inblossom[v];
        }
        childs.push(bb);
        childs.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.blossomparent[bw] = b;
            childs.push(bw);
            endps.push(self.labelend[bw] ^ 1);
            debug_assert!(
                self.label[bw] == 2
                    || (self.label[bw] == 1
                        && self.labelend[bw] == self.mate[self.blossombase[bw]])
            );
            debug_assert!(self.labelend[bw] != NONE);
            w = self.endpoint(self.labelend[bw]);
            bw = self.inblossom[w];
        }
        self.blossomchilds[b] = childs;
        self.blossomendps[b] = endps;

        debug_assert!(self.label[bb] == 1);
        self.label[b] = 1;
        self.labelend[b] = self.labelend[bb];
        self.dualvar[b] = 0;

        for v in self.blossom_leaves(b) {
            if self.label[self.inblossom[v]] == 2 {
                self.queue.push(v);
            }
            self.inblossom[v] = b;
        }

        // Compute the least-slack edges to neighbouring S-blossoms.
        let mut bestedgeto = vec![NONE; 2 * self.nvertex];
        let childs = self.blossomchilds[b].clone();
        for bv in childs {
            let nblists: Vec<Vec<usize>> = if self.blossombestedges[bv].is_empty() {
                self.blossom_leaves(bv)
                    .into_iter()
                    .map(|v| self.neighbend[v].iter().map(|p| p / 2).collect())
                    .collect()
            } else {
                vec![self.blossombestedges[bv].clone()]
            };
            for nblist in nblists {
                for k in nblist {
                    let (i0, j0, _) = self.edges[k];
                    let (_i, j) = if self.inblossom[j0 as usize] == b {
                        (j0 as usize, i0 as usize)
                    } else {
                        (i0 as usize, j0 as usize)
                    };
                    let bj = self.inblossom[j];
                    if bj != b
                        && self.label[bj] == 1
                        && (bestedgeto[bj] == NONE || self.slack(k) < self.slack(bestedgeto[bj]))
                    {
                        bestedgeto[bj] = k;
                    }
                }
            }
            self.blossombestedges[bv] = Vec::new();
            self.bestedge[bv] = NONE;
        }
        let best: Vec<usize> = bestedgeto.into_iter().filter(|&k| k != NONE).collect();
        self.bestedge[b] = NONE;
        for &k in &best {
            if self.bestedge[b] == NONE || self.slack(k) < self.slack(self.bestedge[b]) {
                self.bestedge[b] = k;
            }
        }
        self.blossombestedges[b] = best;
    }

    // Expand the given top-level blossom.
    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        let childs = self.blossomchilds[b].clone();
        for s in childs {
            self.blossomparent[s] = NONE;
            if s < self.nvertex {
                self.inblossom[s] = s;
            } else if endstage && self.dualvar[s] == 0 {
                self.expand_blossom(s, endstage);
            } else {
                for v in self.blossom_leaves(s) {
                    self.inblossom[v] = s;
                }
            }
        }

        if !endstage && self.label[b] == 2 {
            debug_assert!(self.labelend[b] != NONE);
            let entrychild = self.inblossom[self.endpoint(self.labelend[b] ^ 1)];
            let childs = &self.blossomchilds[b];
            let nchilds = childs.len() as i64;
            let mut j = childs.iter().position(|&c| c == entrychild).unwrap() as i64;
            let (jstep, endptrick): (i64, usize) = if j & 1 != 0 {
                j -= nchilds;
                (1, 0)
            } else {
                (-1, 1)
            };
            let child_at = |s: &Self, idx: i64| -> usize {
                let len = s.blossomchilds[b].len() as i64;
                let i = if idx >= 0 { idx } else { len + idx };
                s.blossomchilds[b][i as usize]
            };
            let endp_at = |s: &Self, idx: i64| -> usize {
                let len = s.blossomendps[b].len() as i64;
                let i = if idx >= 0 { idx } else { len + idx };
                s.blossomendps[b][i as usize]
            };
            let mut p = self.labelend[b];
            while j != 0 {
                let ep = self.endpoint(p ^ 1);
                self.label[ep] = 0;
                let q = endp_at(self, j - endptrick as i64) ^ endptrick;
                let eq = self.endpoint(q ^ 1);
                self.label[eq] = 0;
                self.assign_label(ep, 2, p);
                self.allowedge[q / 2] = true;
                j += jstep;
                p = endp_at(self, j - endptrick as i64) ^ endptrick;
                self.allowedge[p / 2] = true;
                j += jstep;
            }
            let bv = child_at(self, j);
            let ep = self.endpoint(p ^ 1);
            self.label[ep] = 2;
            self.label[bv] = 2;
            self.labelend[ep] = p;
            self.labelend[bv] = p;
            self.bestedge[bv] = NONE;
            j += jstep;
            while child_at(self, j) != entrychild {
                let bv = child_at(self, j);
                if self.label[bv] == 1 {
                    j += jstep;
                    continue;
                }
                let mut v = NONE;
                for t in self.blossom_leaves(bv) {
                    v = t;
                    if self.label[t] != 0 {
                        break;
                    }
                }
                if v != NONE && self.label[v] != 0 {
                    debug_assert!(self.label[v] == 2);
                    debug_assert!(self.inblossom[v] == bv);
                    self.label[v] = 0;
                    let em = self.endpoint(self.mate[self.blossombase[bv]]);
                    self.label[em] = 0;
                    let lblend = self.labelend[v];
                    self.assign_label(v, 2, lblend);
                }
                j += jstep;
            }
        }

        self.label[b] = 0;
        self.labelend[b] = NONE;
        self.blossombase[b] = NONE;
        self.bestedge[b] = NONE;
        self.blossomchilds[b] = Vec::new();
        self.blossomendps[b] = Vec::new();
        self.blossombestedges[b] = Vec::new();
        self.unusedblossoms.push(b);
    }

    // Swap matched and unmatched edges over an alternating path through
    // blossom b between vertex v and the base vertex.
    fn augment_blossom(&mut self, b: usize, v: usize) {
        let mut t = v;
        while self.blossomparent[t] != b {
            t = self.blossomparent[t];
        }
        if t >= self.nvertex {
            self.augment_blossom(t, v);
        }
        let i = self.blossomchilds[b].iter().position(|&c| c == t).unwrap();
        let nchilds = self.blossomchilds[b].len() as i64;
        let mut j = i as i64;
        let (jstep, endptrick): (i64, usize) = if i & 1 != 0 {
            j -= nchilds;
            (1, 0)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let at = |list: &Vec<usize>, idx: i64| -> usize {
                let len = list.len() as i64;
                let k = if idx >= 0 { idx } else { len + idx };
                list[k as usize]
            };
            let mut t = at(&self.blossomchilds[b], j);
            let p = at(&self.blossomendps[b], j - endptrick as i64) ^ endptrick;
            if t >= self.nvertex {
                let ep = self.endpoint(p);
                self.augment_blossom(t, ep);
            }
            j += jstep;
            t = at(&self.blossomchilds[b], j);
            if t >= self.nvertex {
                let ep = self.endpoint(p ^ 1);
                self.augment_blossom(t, ep);
            }
            let e0 = self.endpoint(p);
            let e1 = self.endpoint(p ^ 1);
            self.mate[e0] = p ^ 1;
            self.mate[e1] = p;
        }
        self.blossomchilds[b].rotate_left(i);
        self.blossomendps[b].rotate_left(i);
        self.blossombase[b] = self.blossombase[self.blossomchilds[b][0]];
        debug_assert!(self.blossombase[b] == v);
    }

    // Swap matched and unmatched edges over an alternating path between two
    // single vertices, running through edge k between two S-vertices.
    fn augment_matching(&mut self, k: usize) {
        let (v, w, _) = self.edges[k];
        for (s0, p0) in [(v as usize, 2 * k + 1), (w as usize, 2 * k)] {
            let mut s = s0;
            let mut p = p0;
            loop {
                let bs = self.inblossom[s];
                debug_assert!(self.label[bs] == 1);
                debug_assert!(self.labelend[bs] == self.mate[self.blossombase[bs]]);
                if bs >= self.nvertex {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p;
                if self.labelend[bs] == NONE {
                    break;
                }
                let t = self.endpoint(self.labelend[bs]);
                let bt = self.inblossom[t];
                debug_assert!(self.label[bt] == 2);
                debug_assert!(self.labelend[bt] != NONE);
                s = self.endpoint(self.labelend[bt]);
                let j = self.endpoint(self.labelend[bt] ^ 1);
                debug_assert!(self.blossombase[bt] == t);
                if bt >= self.nvertex {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = self.labelend[bt];
                p = self.labelend[bt] ^ 1;
            }
        }
    }

    /// Run the algorithm. Returns `mate`: for each vertex, the matched
    /// partner or `None`.
    pub fn solve(&mut self) -> Vec<Option<u32>> {
        if self.nedge == 0 {
            return vec![None; self.nvertex];
        }
        for _ in 0..self.nvertex {
            self.label.iter_mut().for_each(|l| *l = 0);
            self.bestedge.iter_mut().for_each(|e| *e = NONE);
            for be in self.blossombestedges[self.nvertex..].iter_mut() {
                be.clear();
            }
            self.allowedge.iter_mut().for_each(|a| *a = false);
            self.queue.clear();

            for v in 0..self.nvertex {
                if self.mate[v] == NONE && self.label[self.inblossom[v]] == 0 {
                    self.assign_label(v, 1, NONE);
                }
            }

            let mut augmented = false;
            loop {
                while let Some(v) = self.queue.pop() {
                    debug_assert!(self.label[self.inblossom[v]] == 1);
                    for pi in 0..self.neighbend[v].len() {
                        let p = self.neighbend[v][pi];
                        let k = p / 2;
                        let w = self.endpoint(p);
                        if self.inblossom[v] == self.inblossom[w] {
                            continue;
                        }
                        let mut kslack = 0;
                        if !self.allowedge[k] {
                            kslack = self.slack(k);
                            if kslack <= 0 {
                                self.allowedge[k] = true;
                            }
                        }
                        if self.allowedge[k] {
                            if self.label[self.inblossom[w]] == 0 {
                                self.assign_label(w, 2, p ^ 1);
                            } else if self.label[self.inblossom[w]] == 1 {
                                let base = self.scan_blossom(v, w);
                                if base != NONE {
                                    self.add_blossom(base, k);
                                } else {
                                    self.augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if self.label[w] == 0 {
                                debug_assert!(self.label[self.inblossom[w]] == 2);
                                self.label[w] = 2;
                                self.labelend[w] = p ^ 1;
                            }
                        } else if self.label[self.inblossom[w]] == 1 {
                            let b = self.inblossom[v];
                            if self.bestedge[b] == NONE
                                || kslack < self.slack(self.bestedge[b])
                            {
                                self.bestedge[b] = k;
                            }
                        } else if self.label[w] == 0
                            && (self.bestedge[w] == NONE
                                || kslack < self.slack(self.bestedge[w]))
                        {
                            self.bestedge[w] = k;
                        }
                    }
                    if augmented {
                        break;
                    }
                }
                if augmented {
                    break;
                }

                // No augmenting path under the current duals: compute the
                // largest safe dual change.
                let mut deltatype = 1;
                let mut delta = *self.dualvar[..self.nvertex].iter().min().unwrap();
                let mut deltaedge = NONE;
                let mut deltablossom = NONE;

                for v in 0..self.nvertex {
                    if self.label[self.inblossom[v]] == 0 && self.bestedge[v] != NONE {
                        let d = self.slack(self.bestedge[v]);
                        if d < delta {
                            delta = d;
                            deltatype = 2;
                            deltaedge = self.bestedge[v];
                        }
                    }
                }
                for b in 0..2 * self.nvertex {
                    if self.blossomparent[b] == NONE
                        && self.label.get(b) == Some(&1)
                        && self.bestedge[b] != NONE
                    {
                        let d = self.slack(self.bestedge[b]) / 2;
                        if d < delta {
                            delta = d;
                            deltatype = 3;
                            deltaedge = self.bestedge[b];
                        }
                    }
                }
                for b in self.nvertex..2 * self.nvertex {
                    if self.blossombase[b] != NONE
                        && self.blossomparent[b] == NONE
                        && self.label[b] == 2
                        && self.dualvar[b] < delta
                    {
                        delta = self.dualvar[b];
                        deltatype = 4;
                        deltablossom = b;
                    }
                }

                for v in 0..self.nvertex {
                    match self.label[self.inblossom[v]] {
                        0 => {}
                        1 => self.dualvar[v] -= delta,
                        2 => self.dualvar[v] += delta,
                        _ => unreachable!(),
                    }
                }
                for b in self.nvertex..2 * self.nvertex {
                    if self.blossombase[b] != NONE && self.blossomparent[b] == NONE {
                        match self.label[b] {
                            0 => {}
                            1 => self.dualvar[b] += delta,
                            2 => self.dualvar[b] -= delta,
                            _ => unreachable!(),
                        }
                    }
                }

                match deltatype {
                    1 => break,
                    2 => {
                        self.allowedge[deltaedge] = true;
                        let (i, j, _) = self.edges[deltaedge];
                        let mut i = i as usize;
                        if self.label[self.inblossom[i]] == 0 {
                            i = j as usize;
                        }
                        debug_assert!(self.label[self.inblossom[i]] == 1);
                        self.queue.push(i);
                    }
                    3 => {
                        self.allowedge[deltaedge] = true;
                        let (i, _, _) = self.edges[deltaedge];
                        debug_assert!(self.label[self.inblossom[i as usize]] == 1);
                        self.queue.push(i as usize);
                    }
                    4 => {
                        self.expand_blossom(deltablossom, false);
                    }
                    _ => unreachable!(),
                }
            }

            if !augmented {
                break;
            }

            for b in self.nvertex..2 * self.nvertex {
                if self.blossomparent[b] == NONE
                    && self.blossombase[b] != NONE
                    && self.label[b] == 1
                    && self.dualvar[b] == 0
                {
                    self.expand_blossom(b, true);
                }
            }
        }

        (0..self.nvertex)
            .map(|v| {
                if self.mate[v] == NONE {
                    None
                } else {
                    Some(self.endpoint(self.mate[v]) as u32)
                }
            })
            .collect()
    }

    /// Post-solve slack of an arbitrary vertex pair with hypothetical weight
    /// `weight`, including dual contributions of any blossoms containing
    /// both vertices. Non-negative slack certifies that adding the edge
    /// could not improve the matching.
    pub fn pair_slack(&self, u: usize, v: usize, weight: i64) -> i64 {
        let mut s = self.dualvar[u] + self.dualvar[v] - 2 * weight;
        let chain = |mut b: usize| -> Vec<usize> {
            let mut out = vec![b];
            while self.blossomparent[b] != NONE {
                b = self.blossomparent[b];
                out.push(b);
            }
            out.reverse();
            out
        };
        let cu = chain(u);
        let cv = chain(v);
        for (bu, bv) in cu.iter().zip(cv.iter()) {
            if bu != bv {
                break;
            }
            if *bu >= self.nvertex {
                s += 2 * self.dualvar[*bu];
            }
        }
        s
    }

    /// Verify the primal-dual optimality conditions; panics on violation.
    /// Intended for tests.
    pub fn verify_optimum(&self) {
        for k in 0..self.nedge {
            let (i, j, _wt) = self.edges[k];
            let (i, j) = (i as usize, j as usize);
            let mut s = self.slack(k);
            let chain = |mut b: usize| -> Vec<usize> {
                let mut out = vec![b];
                while self.blossomparent[b] != NONE {
                    b = self.blossomparent[b];
                    out.push(b);
                }
                out.reverse();
                out
            };
            for (bi, bj) in chain(i).iter().zip(chain(j).iter()) {
                if bi != bj {
                    break;
                }
                if *bi >= self.nvertex {
                    s += 2 * self.dualvar[*bi];
                }
            }
            assert!(s >= 0, "negative slack on edge {k}");
            if self.mate[i] / 2 == k || self.mate[j] / 2 == k {
                assert_eq!(self.mate[i] / 2, k);
                assert_eq!(self.mate[j] / 2, k);
                assert_eq!(s, 0, "matched edge {k} has nonzero slack");
            }
        }
        for v in 0..self.nvertex {
            assert!(self.mate[v] != NONE || self.dualvar[v] == 0);
        }
    }
}

/// Convenience wrapper: solve a max-weight matching for the given edges.
pub fn max_weight_matching(nvertex: usize, edges: Vec<WeightedEdge>) -> Vec<Option<u32>> {
    MaxWeightMatching::new(nvertex, edges).solve()
}
