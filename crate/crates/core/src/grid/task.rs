use rand::Rng;

use super::{Cell, Maze, StateId};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// A goal-directed task: reach `goal` from `start` in `maze`.
#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub maze: Maze,
    pub start: StateId,
    pub goal: StateId,
}

impl Task {
    pub fn new(maze: Maze, start: StateId, goal: StateId) -> Result<Self> {
        maze.check_empty(start)?;
        maze.check_empty(goal)?;
        if start == goal {
            return Err(Error::InvalidTask(format!("start and goal coincide at {start}")));
        }
        Ok(Task { maze, start, goal })
    }

    pub fn to_text(&self) -> String {
        self.maze.to_text_with(Some(self.start), Some(self.goal))
    }
}

/// Draws start and goal uniformly without replacement from the empty cells.
pub fn sample_task(maze: &Maze, seed: u64) -> Result<Task> {
    let cells = maze.empty_cells();
    if cells.len() < 2 {
        return Err(Error::TooFewEmptyCells(cells.len()));
    }
    let mut rng = rng_from_seed(seed);
    let i = rng.random_range(0..cells.len());
    let mut j = rng.random_range(0..cells.len() - 1);
    if j >= i {
        j += 1;
    }
    Task::new(maze.clone(), cells[i], cells[j])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellLabel {
    Empty,
    Wall,
    Start,
    Goal,
}

/// Categorical feature map of a task: one label per cell, plus wall prefix sums used by
/// feature extractors for constant-time rectangle and segment queries.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskEncoding {
    width: usize,
    height: usize,
    labels: Vec<CellLabel>,
    // (height + 1) x (width + 1) inclusive-exclusive 2-D prefix sums of walls.
    wall_prefix: Vec<u32>,
}

impl TaskEncoding {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[CellLabel] {
        &self.labels
    }

    pub fn label(&self, s: StateId) -> CellLabel {
        self.labels[s.row() * self.width + s.col()]
    }

    pub fn is_wall_at(&self, row: i64, col: i64) -> bool {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            return true;
        }
        self.labels[row as usize * self.width + col as usize] == CellLabel::Wall
    }

    pub fn count(&self, label: CellLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    /// Number of walls in the inclusive rectangle spanned by `a` and `b`.
    pub fn walls_in_rect(&self, a: StateId, b: StateId) -> u32 {
        let (r0, r1) = (a.row().min(b.row()), a.row().max(b.row()) + 1);
        let (c0, c1) = (a.col().min(b.col()), a.col().max(b.col()) + 1);
        let w = self.width + 1;
        let p = |r: usize, c: usize| self.wall_prefix[r * w + c];
        p(r1, c1) + p(r0, c0) - p(r0, c1) - p(r1, c0)
    }

    pub fn start(&self) -> StateId {
        self.find(CellLabel::Start)
    }

    pub fn goal(&self) -> StateId {
        self.find(CellLabel::Goal)
    }

    fn find(&self, label: CellLabel) -> StateId {
        let i = self
            .labels
            .iter()
            .position(|l| *l == label)
            .expect("encodings carry exactly one start and one goal");
        StateId::new(i / self.width, i % self.width)
    }
}

pub fn encode_task(task: &Task) -> TaskEncoding {
    let maze = &task.maze;
    let (width, height) = (maze.width(), maze.height());
    let mut labels: Vec<CellLabel> = maze
        .cells()
        .iter()
        .map(|c| match c {
            Cell::Wall => CellLabel::Wall,
            Cell::Empty => CellLabel::Empty,
        })
        .collect();
    labels[task.start.row() * width + task.start.col()] = CellLabel::Start;
    labels[task.goal.row() * width + task.goal.col()] = CellLabel::Goal;
    TaskEncoding::from_labels(width, height, labels)
}

impl TaskEncoding {
    fn from_labels(width: usize, height: usize, labels: Vec<CellLabel>) -> Self {
        let w = width + 1;
        let mut wall_prefix = vec![0u32; (height + 1) * w];
        for r in 0..height {
            for c in 0..width {
                let wall = (labels[r * width + c] == CellLabel::Wall) as u32;
                wall_prefix[(r + 1) * w + c + 1] =
                    wall + wall_prefix[r * w + c + 1] + wall_prefix[(r + 1) * w + c] - wall_prefix[r * w + c];
            }
        }
        TaskEncoding {
            width,
            height,
            labels,
            wall_prefix,
        }
    }

    /// Parses `width * height` label characters (`.`, `#`, `S`, `G`) in row-major order.
    pub fn from_label_text(width: usize, height: usize, text: &str) -> std::result::Result<Self, String> {
        let labels = text
            .chars()
            .map(|ch| match ch {
                '.' => Ok(CellLabel::Empty),
                '#' => Ok(CellLabel::Wall),
                'S' => Ok(CellLabel::Start),
                'G' => Ok(CellLabel::Goal),
                _ => Err(format!("bad label `{ch}`")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if labels.len() != width * height {
            return Err(format!("{} labels for a {width}x{height} grid", labels.len()));
        }
        let enc = TaskEncoding::from_labels(width, height, labels);
        if enc.count(CellLabel::Start) != 1 || enc.count(CellLabel::Goal) != 1 {
            return Err("encoding needs exactly one start and one goal".into());
        }
        Ok(enc)
    }
}

pub fn decode_task(encoding: &TaskEncoding) -> Result<Task> {
    let cells = encoding
        .labels
        .iter()
        .map(|l| if *l == CellLabel::Wall { Cell::Wall } else { Cell::Empty })
        .collect();
    if encoding.count(CellLabel::Start) != 1 || encoding.count(CellLabel::Goal) != 1 {
        return Err(Error::InvalidTask("encoding needs exactly one start and one goal".into()));
    }
    let maze = Maze::from_cells(encoding.width, encoding.height, cells)?;
    Task::new(maze, encoding.start(), encoding.goal())
}
