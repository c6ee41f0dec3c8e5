//! Grid-world maze domain.
//!
//! Mazes are rectangular grids of wall and empty cells. Generated mazes always have a
//! wall border; their interior is a recursive-backtracker perfect maze with a seeded
//! fraction of walls knocked down. Density `d` is the fraction of the perfect maze's
//! interior walls that survive: `d = 1` is the perfect maze, `d = 0` an open room.

mod generate;
mod policy;
mod task;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::generate_maze;
pub use policy::{
    execute_plan, execute_plan_with, low_level_step_pi0, low_level_value_pi0, LowLevelPolicy,
    LowLevelValue, Pi0, StepLimit, TabulatedValue, Trajectory,
};
pub use task::{decode_task, encode_task, sample_task, CellLabel, Task, TaskEncoding};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId {
    pub row: u16,
    pub col: u16,
}

impl StateId {
    pub fn new(row: usize, col: usize) -> Self {
        StateId {
            row: row as u16,
            col: col as u16,
        }
    }

    pub fn row(self) -> usize {
        self.row as usize
    }

    pub fn col(self) -> usize {
        self.col as usize
    }

    pub fn manhattan(self, other: StateId) -> usize {
        self.row.abs_diff(other.row) as usize + self.col.abs_diff(other.col) as usize
    }

    pub fn is_adjacent(self, other: StateId) -> bool {
        self.manhattan(other) == 1
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.row, self.col)
    }
}

impl std::str::FromStr for StateId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (r, c) = s
            .split_once(',')
            .ok_or_else(|| format!("expected `row,col`, got `{s}`"))?;
        let row: u16 = r.trim().parse().map_err(|e| format!("bad row `{r}`: {e}"))?;
        let col: u16 = c.trim().parse().map_err(|e| format!("bad col `{c}`: {e}"))?;
        Ok(StateId { row, col })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Wall,
    Empty,
}

/// Generation parameters of a procedurally generated maze.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MazeOrigin {
    pub density: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Maze {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    origin: Option<MazeOrigin>,
}

const DIRECTIONS: [(i32, i32); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

impl Maze {
    pub fn from_cells(width: usize, height: usize, cells: Vec<Cell>) -> Result<Self> {
        if width == 0 || height == 0 || cells.len() != width * height {
            return Err(Error::Config(format!(
                "{} cells do not form a {width}x{height} grid",
                cells.len()
            )));
        }
        Ok(Maze {
            width,
            height,
            cells,
            origin: None,
        })
    }

    /// A grid without any walls, border included.
    pub fn open(width: usize, height: usize) -> Self {
        Maze {
            width,
            height,
            cells: vec![Cell::Empty; width * height],
            origin: None,
        }
    }

    pub(crate) fn with_origin(mut self, origin: MazeOrigin) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> Option<MazeOrigin> {
        self.origin
    }

    pub fn density(&self) -> Option<f64> {
        self.origin.map(|o| o.density)
    }

    pub fn seed(&self) -> Option<u64> {
        self.origin.map(|o| o.seed)
    }

    pub fn in_bounds(&self, s: StateId) -> bool {
        s.row() < self.height && s.col() < self.width
    }

    pub fn cell(&self, s: StateId) -> Cell {
        self.cells[s.row() * self.width + s.col()]
    }

    pub(crate) fn set_cell(&mut self, s: StateId, cell: Cell) {
        let w = self.width;
        self.cells[s.row() * w + s.col()] = cell;
    }

    pub fn is_empty(&self, s: StateId) -> bool {
        self.in_bounds(s) && self.cell(s) == Cell::Empty
    }

    pub fn is_wall(&self, s: StateId) -> bool {
        !self.is_empty(s)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn check_empty(&self, s: StateId) -> Result<()> {
        if !self.in_bounds(s) {
            return Err(Error::OutOfBounds(s, self.width, self.height));
        }
        if self.cell(s) == Cell::Wall {
            return Err(Error::WallCell(s));
        }
        Ok(())
    }

    /// Empty cells in row-major order.
    pub fn empty_cells(&self) -> Vec<StateId> {
        let mut out = Vec::new();
        for r in 0..self.height {
            for c in 0..self.width {
                if self.cells[r * self.width + c] == Cell::Empty {
                    out.push(StateId::new(r, c));
                }
            }
        }
        out
    }

    pub fn num_empty(&self) -> usize {
        self.cells.iter().filter(|c| **c == Cell::Empty).count()
    }

    pub fn wall_count(&self) -> usize {
        self.cells.len() - self.num_empty()
    }

    /// In-bounds 4-neighbours in the order up, down, left, right.
    pub fn neighbors(&self, s: StateId) -> impl Iterator<Item = StateId> + '_ {
        DIRECTIONS.iter().filter_map(move |&(dr, dc)| {
            let r = s.row() as i64 + dr as i64;
            let c = s.col() as i64 + dc as i64;
            (r >= 0 && c >= 0 && (r as usize) < self.height && (c as usize) < self.width)
                .then(|| StateId::new(r as usize, c as usize))
        })
    }

    pub fn empty_neighbors(&self, s: StateId) -> Vec<StateId> {
        self.neighbors(s).filter(|&n| self.cell(n) == Cell::Empty).collect()
    }

    /// Number of empty cells reachable from `from` under 4-adjacency.
    pub fn flood_fill_count(&self, from: StateId) -> usize {
        if !self.is_empty(from) {
            return 0;
        }
        let mut seen = vec![false; self.cells.len()];
        let mut stack = vec![from];
        seen[from.row() * self.width + from.col()] = true;
        let mut count = 0;
        while let Some(s) = stack.pop() {
            count += 1;
            for n in self.neighbors(s) {
                let i = n.row() * self.width + n.col();
                if !seen[i] && self.cells[i] == Cell::Empty {
                    seen[i] = true;
                    stack.push(n);
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        match self.empty_cells().first() {
            Some(&s) => self.flood_fill_count(s) == self.num_empty(),
            None => true,
        }
    }

    /// True when the empty cells form a tree under 4-adjacency, so every pair of empty
    /// cells is joined by exactly one simple path.
    pub fn is_perfect(&self) -> bool {
        let n = self.num_empty();
        let mut edges = 0;
        for s in self.empty_cells() {
            for n2 in [StateId::new(s.row() + 1, s.col()), StateId::new(s.row(), s.col() + 1)] {
                if self.is_empty(n2) {
                    edges += 1;
                }
            }
        }
        self.is_connected() && n > 0 && edges == n - 1
    }

    /// Breadth-first hop distances from `from` to every cell (`u32::MAX` when unreachable).
    pub fn bfs_distances(&self, from: StateId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.cells.len()];
        if !self.is_empty(from) {
            return dist;
        }
        let mut queue = std::collections::VecDeque::new();
        dist[from.row() * self.width + from.col()] = 0;
        queue.push_back(from);
        while let Some(s) = queue.pop_front() {
            let d = dist[s.row() * self.width + s.col()];
            for n in self.neighbors(s) {
                let i = n.row() * self.width + n.col();
                if self.cells[i] == Cell::Empty && dist[i] == u32::MAX {
                    dist[i] = d + 1;
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Serializes in the `maze v1` text format, optionally marking start and goal.
    pub fn to_text_with(&self, start: Option<StateId>, goal: Option<StateId>) -> String {
        let mut out = format!("maze v1 {} {}\n", self.width, self.height);
        for r in 0..self.height {
            for c in 0..self.width {
                let s = StateId::new(r, c);
                let ch = if Some(s) == start {
                    'S'
                } else if Some(s) == goal {
                    'G'
                } else if self.cell(s) == Cell::Wall {
                    '#'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        self.to_text_with(None, None)
    }
}

/// Contents of a maze file: the grid plus optional start and goal markers.
#[derive(Clone, Debug, PartialEq)]
pub struct MazeFile {
    pub maze: Maze,
    pub start: Option<StateId>,
    pub goal: Option<StateId>,
}

impl MazeFile {
    pub fn to_text(&self) -> String {
        self.maze.to_text_with(self.start, self.goal)
    }

    pub fn task(&self) -> Option<Result<Task>> {
        match (self.start, self.goal) {
            (Some(s), Some(g)) => Some(Task::new(self.maze.clone(), s, g)),
            _ => None,
        }
    }
}

pub fn parse_maze_text(text: &str) -> Result<MazeFile> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse(1, "empty maze file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "maze" || fields[1] != "v1" {
        return Err(Error::parse(1, format!("expected `maze v1 <width> <height>`, got `{header}`")));
    }
    let width: usize = fields[2]
        .parse()
        .map_err(|e| Error::parse(1, format!("bad width: {e}")))?;
    let height: usize = fields[3]
        .parse()
        .map_err(|e| Error::parse(1, format!("bad height: {e}")))?;
    if width == 0 || height == 0 || width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(Error::parse(1, "dimensions out of range"));
    }
    let mut cells = Vec::with_capacity(width * height);
    let (mut start, mut goal) = (None, None);
    for r in 0..height {
        let line_no = r + 2;
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(line_no, "missing maze row"))?;
        if line.chars().count() != width {
            return Err(Error::parse(line_no, format!("row has {} cells, expected {width}", line.chars().count())));
        }
        for (c, ch) in line.chars().enumerate() {
            let cell = match ch {
                '#' => Cell::Wall,
                '.' => Cell::Empty,
                'S' | 'G' => {
                    let slot = if ch == 'S' { &mut start } else { &mut goal };
                    if slot.is_some() {
                        return Err(Error::parse(line_no, format!("duplicate `{ch}` marker")));
                    }
                    *slot = Some(StateId::new(r, c));
                    Cell::Empty
                }
                other => return Err(Error::parse(line_no, format!("unexpected character `{other}`"))),
            };
            cells.push(cell);
        }
    }
    if let Some(extra) = lines.find(|l| !l.is_empty()) {
        return Err(Error::parse(height + 2, format!("trailing content `{extra}`")));
    }
    Ok(MazeFile {
        maze: Maze::from_cells(width, height, cells)?,
        start,
        goal,
    })
}
