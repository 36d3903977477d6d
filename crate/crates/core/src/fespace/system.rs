use std::collections::HashMap;

use super::assembly::CooBlock;

/// Names and sizes of the unknown blocks, laid out contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    names: Vec<String>,
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(blocks: &[(String, usize)]) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        let mut total = 0;
        for (_, n) in blocks {
            offsets.push(total);
            total += n;
        }
        offsets.push(total);
        BlockLayout {
            names: blocks.iter().map(|(s, _)| s.clone()).collect(),
            sizes: blocks.iter().map(|(_, n)| *n).collect(),
            offsets,
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, b: usize) -> usize {
        self.sizes[b]
    }

    pub fn offset(&self, b: usize) -> usize {
        self.offsets[b]
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn name(&self, b: usize) -> &str {
        &self.names[b]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Block containing global index `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.offsets.partition_point(|&o| o <= i) - 1
    }

    /// Slice of a global vector belonging to block `b`.
    pub fn slice<'a>(&self, x: &'a [f64], b: usize) -> &'a [f64] {
        &x[self.offsets[b]..self.offsets[b + 1]]
    }
}

/// Global sparse system over all blocks, assembled from triplets.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub layout: BlockLayout,
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    constraints: Vec<(usize, f64)>,
}

impl BlockSystem {
    pub fn new(layout: BlockLayout) -> Self {
        let n = layout.total();
        BlockSystem {
            layout,
            triplets: Vec::new(),
            rhs: vec![0.0; n],
            constraints: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.layout.total()
    }

    /// Adds `scale * block` at block position (row block, column block).
    pub fn add_block(&mut self, rb: usize, cb: usize, block: &CooBlock, scale: f64) {
        debug_assert_eq!(block.nrows, self.layout.size(rb), "rows of {}", self.layout.name(rb));
        debug_assert_eq!(block.ncols, self.layout.size(cb), "cols of {}", self.layout.name(cb));
        let (ro, co) = (self.layout.offset(rb), self.layout.offset(cb));
        self.triplets
            .extend(block.entries.iter().map(|&(i, j, v)| (ro + i, co + j, scale * v)));
    }

    /// Adds a dense row vector in row `row` of block `rb`, spanning block `cb`.
    pub fn add_row(&mut self, rb: usize, row: usize, cb: usize, values: &[f64], scale: f64) {
        let r = self.layout.offset(rb) + row;
        let co = self.layout.offset(cb);
        self.triplets
            .extend(values.iter().enumerate().map(|(j, &v)| (r, co + j, scale * v)));
    }

    /// Adds a dense column vector in column `col` of block `cb`.
    pub fn add_column(&mut self, rb: usize, cb: usize, col: usize, values: &[f64], scale: f64) {
        let c = self.layout.offset(cb) + col;
        let ro = self.layout.offset(rb);
        self.triplets
            .extend(values.iter().enumerate().map(|(i, &v)| (ro + i, c, scale * v)));
    }

    pub fn add_rhs(&mut self, rb: usize, values: &[f64], scale: f64) {
        let o = self.layout.offset(rb);
        for (i, v) in values.iter().enumerate() {
            self.rhs[o + i] += scale * v;
        }
    }

    /// Fixes dofs of block `rb` to the given values.
    pub fn constrain(&mut self, rb: usize, dofs: &[usize], values: &[f64]) {
        let o = self.layout.offset(rb);
        self.constraints
            .extend(dofs.iter().zip(values).map(|(&d, &v)| (o + d, v)));
    }

    pub fn constraints(&self) -> &[(usize, f64)] {
        &self.constraints
    }

    /// Applies the Dirichlet constraints by symmetric elimination:
    /// constrained columns move to the right-hand side, constrained rows
    /// become identity rows. The pattern of the result depends only on the
    /// incoming pattern and the constrained set.
    pub fn apply_dirichlet(&mut self) {
        if self.constraints.is_empty() {
            return;
        }
        let fixed: HashMap<usize, f64> = self.constraints.iter().copied().collect();
        let mut kept = Vec::with_capacity(self.triplets.len());
        for &(i, j, v) in &self.triplets {
            let row_fixed = fixed.contains_key(&i);
            match fixed.get(&j) {
                Some(&g) => {
                    if !row_fixed {
                        self.rhs[i] -= v * g;
                    }
                }
                None if !row_fixed => kept.push((i, j, v)),
                None => {}
            }
        }
        let mut fixed_sorted: Vec<(usize, f64)> = fixed.into_iter().collect();
        fixed_sorted.sort_unstable_by_key(|e| e.0);
        for (d, g) in fixed_sorted {
            kept.push((d, d, 1.0));
            self.rhs[d] = g;
        }
        self.triplets = kept;
        self.constraints.clear();
    }

    /// y = A x using the current triplets.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.size()];
        for &(i, j, v) in &self.triplets {
            y[i] += v * x[j];
        }
        y
    }
}
