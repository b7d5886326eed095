use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

/// Multilinear polynomial over binary variables `b_j ∈ {0, 1}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PseudoBoolean {
    /// Sorted, duplicate-free variable sets → coefficient.
    pub terms: BTreeMap<Vec<usize>, f64>,
    pub constant: f64,
}

/// One Rosenberg substitution `y = b_i · b_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Substitution {
    pub ancilla: usize,
    pub left: usize,
    pub right: usize,
    pub penalty: f64,
}

impl PseudoBoolean {
    pub fn new() -> PseudoBoolean {
        PseudoBoolean::default()
    }

    /// Adds `c · Π_{j ∈ vars} b_j` (`b² = b`).
    pub fn add(&mut self, vars: &[usize], c: f64) {
        if c == 0.0 {
            return;
        }
        let mut key = vars.to_vec();
        key.sort_unstable();
        key.dedup();
        if key.is_empty() {
            self.constant += c;
            return;
        }
        match self.terms.entry(key) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == 0.0 {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn add_poly(&mut self, other: &PseudoBoolean, w: f64) {
        self.constant += w * other.constant;
        for (k, &c) in &other.terms {
            self.add(k, w * c);
        }
    }

    /// `self += w · a · b`.
    pub fn add_product(&mut self, a: &PseudoBoolean, b: &PseudoBoolean, w: f64) {
        let ta: Vec<(&[usize], f64)> = std::iter::once((&[][..], a.constant))
            .chain(a.terms.iter().map(|(k, &c)| (k.as_slice(), c)))
            .collect();
        let tb: Vec<(&[usize], f64)> = std::iter::once((&[][..], b.constant))
            .chain(b.terms.iter().map(|(k, &c)| (k.as_slice(), c)))
            .collect();
        for (ka, ca) in &ta {
            for (kb, cb) in &tb {
                let mut k = ka.to_vec();
                k.extend_from_slice(kb);
                self.add(&k, w * ca * cb);
            }
        }
    }

    /// Affine form `offset + Σ a_j b_j`.
    pub fn linear(coeffs: &[(usize, f64)], offset: f64) -> PseudoBoolean {
        let mut p = PseudoBoolean::new();
        p.constant = offset;
        for &(j, a) in coeffs {
            p.add(&[j], a);
        }
        p
    }

    pub fn max_order(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn num_vars(&self) -> usize {
        self.terms
            .keys()
            .filter_map(|k| k.last())
            .max()
            .map_or(0, |&m| m + 1)
    }

    pub fn eval(&self, bits: &[bool]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .filter(|(k, _)| k.iter().all(|&j| bits[j]))
                .map(|(_, c)| c)
                .sum::<f64>()
    }

    /// Exact multilinear form of a function of the bits `vars`, given as a
    /// table indexed by the bit pattern (bit `k` of the index ↔ `vars[k]`).
    pub fn add_table(&mut self, vars: &[usize], table: &[f64]) {
        debug_assert_eq!(table.len(), 1 << vars.len());
        let mut coef = table.to_vec();
        // Möbius transform over the subset lattice.
        for k in 0..vars.len() {
            for mask in 0..coef.len() {
                if mask & (1 << k) != 0 {
                    coef[mask] -= coef[mask ^ (1 << k)];
                }
            }
        }
        for (mask, &c) in coef.iter().enumerate() {
            if c.abs() > 1e-12 * table.iter().fold(1.0f64, |m, v| m.max(v.abs())) {
                let set: Vec<usize> = (0..vars.len())
                    .filter(|&k| mask & (1 << k) != 0)
                    .map(|k| vars[k])
                    .collect();
                self.add(&set, c);
            }
        }
    }

    /// Rosenberg reduction: while a term exceeds `k_max`, replace its most
    /// frequent variable pair `b_i b_j` by a fresh `y` (numbered from
    /// `next_var`) in every over-order term and add
    /// `M (b_i b_j − 2 b_i y − 2 b_j y + 3 y)` with `M` above the total
    /// weight of the rewritten terms.
    pub fn quadratize(&mut self, k_max: usize, next_var: &mut usize) -> Vec<Substitution> {
        assert!(k_max >= 2);
        let mut subs = Vec::new();
        loop {
            let high: Vec<Vec<usize>> = self
                .terms
                .keys()
                .filter(|k| k.len() > k_max)
                .cloned()
                .collect();
            if high.is_empty() {
                return subs;
            }
            let mut pairs: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            for k in &high {
                for a in 0..k.len() {
                    for b in a + 1..k.len() {
                        *pairs.entry((k[a], k[b])).or_default() += 1;
                    }
                }
            }
            let (&(i, j), _) = pairs
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .expect("over-order term has a pair");
            let y = *next_var;
            *next_var += 1;
            let mut weight = 0.0;
            for k in high.iter().filter(|k| k.contains(&i) && k.contains(&j)) {
                let c = self.terms.remove(k).unwrap();
                weight += c.abs();
                let mut nk: Vec<usize> = k.iter().copied().filter(|&v| v != i && v != j).collect();
                nk.push(y);
                self.add(&nk, c);
            }
            let m = 1.0 + weight;
            self.add(&[i, j], m);
            self.add(&[i, y], -2.0 * m);
            self.add(&[j, y], -2.0 * m);
            self.add(&[y], 3.0 * m);
            subs.push(Substitution { ancilla: y, left: i, right: j, penalty: m });
        }
    }

    /// Ising form under `b = (1 − z)/2` (bit 0 ↔ spin +1).
    pub fn to_spin(&self) -> (BTreeMap<Vec<usize>, f64>, f64) {
        let mut out: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        let mut constant = self.constant;
        for (k, &c) in &self.terms {
            let scale = c / (1u64 << k.len()) as f64;
            for mask in 0u32..(1 << k.len()) {
                let sub: Vec<usize> = (0..k.len()).filter(|&a| mask & (1 << a) != 0).map(|a| k[a]).collect();
                let sign = if sub.len() % 2 == 0 { 1.0 } else { -1.0 };
                if sub.is_empty() {
                    constant += scale;
                } else {
                    *out.entry(sub).or_insert(0.0) += sign * scale;
                }
            }
        }
        out.retain(|_, c| *c != 0.0);
        (out, constant)
    }
}
