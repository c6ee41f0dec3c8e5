use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::{Cell, Maze, MazeOrigin, StateId};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Generates a bordered maze.
///
/// The interior starts as a recursive-backtracker perfect maze carved on the
/// odd-coordinate lattice. Walls are then opened in seeded random order until
/// `round(density * walls)` interior walls remain; a wall is only opened next to an
/// existing empty cell, so the result stays connected for every density.
pub fn generate_maze(width: usize, height: usize, density: f64, seed: u64) -> Result<Maze> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidDensity(density));
    }
    let lattice_w = width.saturating_sub(1) / 2;
    let lattice_h = height.saturating_sub(1) / 2;
    if width < 3 || height < 3 || lattice_w * lattice_h < 2 || width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(Error::MazeTooSmall { width, height });
    }

    let mut rng = rng_from_seed(seed);
    let mut maze = Maze::from_cells(width, height, vec![Cell::Wall; width * height])?;
    let lattice = |i: usize, j: usize| StateId::new(2 * i + 1, 2 * j + 1);

    // Recursive backtracker with an explicit stack.
    let mut visited = vec![false; lattice_w * lattice_h];
    let first = (rng.random_range(0..lattice_h), rng.random_range(0..lattice_w));
    visited[first.0 * lattice_w + first.1] = true;
    maze.set_cell(lattice(first.0, first.1), Cell::Empty);
    let mut stack = vec![first];
    while let Some(&(i, j)) = stack.last() {
        let mut next: Vec<(usize, usize)> = Vec::with_capacity(4);
        if i > 0 {
            next.push((i - 1, j));
        }
        if i + 1 < lattice_h {
            next.push((i + 1, j));
        }
        if j > 0 {
            next.push((i, j - 1));
        }
        if j + 1 < lattice_w {
            next.push((i, j + 1));
        }
        next.retain(|&(a, b)| !visited[a * lattice_w + b]);
        match next.choose(&mut rng) {
            Some(&(a, b)) => {
                visited[a * lattice_w + b] = true;
                maze.set_cell(lattice(a, b), Cell::Empty);
                maze.set_cell(StateId::new(i + a + 1, j + b + 1), Cell::Empty);
                stack.push((a, b));
            }
            None => {
                stack.pop();
            }
        }
    }

    let mut interior_walls: Vec<StateId> = Vec::new();
    for r in 1..height - 1 {
        for c in 1..width - 1 {
            let s = StateId::new(r, c);
            if maze.cell(s) == Cell::Wall {
                interior_walls.push(s);
            }
        }
    }
    let keep = (density * interior_walls.len() as f64).round() as usize;
    interior_walls.shuffle(&mut rng);
    // Walls are removed in shuffled order, skipping any that would open an isolated
    // cell; skipped walls are retried once a neighbour has been opened.
    let mut to_remove = interior_walls.len() - keep;
    let mut pending = interior_walls;
    while to_remove > 0 {
        let mut deferred = Vec::new();
        for s in pending {
            if to_remove > 0 && maze.neighbors(s).any(|n| maze.is_empty(n)) {
                maze.set_cell(s, Cell::Empty);
                to_remove -= 1;
            } else {
                deferred.push(s);
            }
        }
        pending = deferred;
    }
    assert!(maze.is_connected(), "wall removal cannot disconnect a maze");
    Ok(maze.with_origin(MazeOrigin { density, seed }))
}
