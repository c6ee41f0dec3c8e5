use super::search::Search;
use super::{Mode, SolutionNode, SolutionTree};
use crate::tree::SubGoal;

/// First index of the maximal product among eligible entries. Index 0 (`Null`) is
/// always eligible.
pub fn choose_subgoal(products: &[f64], eligible: &[bool]) -> usize {
    let mut best = 0;
    for i in 1..products.len() {
        if eligible[i] && products[i] > products[best] {
            best = i;
        }
    }
    best
}

impl Search<'_> {
    /// Best-first extraction from the root, following only splits the search traversed.
    pub(super) fn extract(&mut self, si: usize, gi: usize) -> SolutionTree {
        let mut tree = SolutionTree::default();
        self.extract_node(&mut tree, si, gi, 0, true);
        tree
    }

    fn extract_node(&mut self, out: &mut SolutionTree, i: usize, k: usize, depth: usize, recurse: bool) -> usize {
        let key = crate::tree::OrKey::new(self.cells[i], self.cells[k]);
        let v_pi = self.vpi(i, k);
        let id = out.nodes.len();
        out.nodes.push(SolutionNode {
            key,
            subgoal: SubGoal::Null,
            depth,
            g: v_pi,
            v_pi,
            left: None,
            right: None,
        });
        let idx = match self.tree.node_index_by_states(i, k) {
            Some(idx) if recurse && depth < self.cfg.max_depth => idx,
            _ => return id,
        };
        let n = self.tree.candidates().len();
        let mut products = vec![0.0; n];
        let mut eligible = vec![false; n];
        products[0] = v_pi;
        eligible[0] = true;
        for c in 1..n {
            let j = c - 1;
            if j != i && j != k && self.tree.node_at(idx).and_visits(c) > 0 {
                eligible[c] = true;
                products[c] = self.product(i, k, c);
            }
        }
        let c = choose_subgoal(&products, &eligible);
        if c == 0 {
            return id;
        }
        let j = c - 1;
        let left_recurses = self.cfg.mode != Mode::SequentialRight;
        let l = self.extract_node(out, i, j, depth + 1, left_recurses);
        let r = self.extract_node(out, j, k, depth + 1, true);
        let g = out.nodes[l].g * out.nodes[r].g;
        let node = &mut out.nodes[id];
        node.subgoal = self.tree.candidates()[c];
        node.left = Some(l);
        node.right = Some(r);
        node.g = g;
        id
    }
}
