use std::collections::BTreeMap;

use crate::grid::{StateId, Task};
use crate::planner::SolutionTree;
use crate::tree::SubGoal;

/// Width of one rendered cell.
pub const TOKEN_WIDTH: usize = 3;

/// Sub-goals of `tree` with the 1-based depth at which each was chosen; a state chosen
/// more than once keeps its smallest depth.
pub fn subgoal_depths(tree: &SolutionTree) -> BTreeMap<StateId, usize> {
    let mut out = BTreeMap::new();
    for n in &tree.nodes {
        if let SubGoal::State(m) = n.subgoal {
            let d = n.depth + 1;
            out.entry(m).and_modify(|e: &mut usize| *e = (*e).min(d)).or_insert(d);
        }
    }
    out
}

/// Draws the maze with one 3-character token per cell: `###` walls, ` . ` empty
/// cells, ` S `/` G ` for start and goal, and sub-goals as their right-aligned depth.
pub fn render_plan(task: &Task, tree: &SolutionTree) -> String {
    let depths = subgoal_depths(tree);
    let maze = &task.maze;
    let mut out = String::with_capacity((maze.width() * TOKEN_WIDTH + 1) * maze.height());
    for r in 0..maze.height() {
        for c in 0..maze.width() {
            let s = StateId::new(r, c);
            let token = if let Some(d) = depths.get(&s) {
                format!("{:>3}", (*d).min(999))
            } else if maze.is_wall(s) {
                "###".to_string()
            } else if s == task.start {
                " S ".to_string()
            } else if s == task.goal {
                " G ".to_string()
            } else {
                " . ".to_string()
            };
            out.push_str(&token);
        }
        out.push('\n');
    }
    out
}
