use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::costmap::OccupancyGrid;
use crate::kinematics::VehicleState;

use super::{RrtError, RrtParams};

/// Source of `q_rand` points for the planner.
pub trait Sampler {
    fn sample(&mut self) -> Result<(f64, f64), RrtError>;
}

/// Returns the same point forever.
#[derive(Debug, Clone, Copy)]
pub struct ConstantSampler(pub (f64, f64));

impl Sampler for ConstantSampler {
    fn sample(&mut self) -> Result<(f64, f64), RrtError> {
        Ok(self.0)
    }
}

const MAX_REJECTIONS: usize = 100_000;

/// Draws one point by rejection sampling: the goal position with probability
/// `goal_bias`, otherwise a uniform point inside a uniformly chosen free cell.
pub fn sample_free<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    goal: &VehicleState,
    params: &RrtParams,
    rng: &mut R,
) -> Result<(f64, f64), RrtError> {
    if params.goal_bias > 0.0 && rng.gen::<f64>() < params.goal_bias {
        return Ok(goal.position());
    }
    if grid.width() == 0 || grid.height() == 0 {
        return Err(RrtError::NoFreeSpace);
    }
    for _ in 0..MAX_REJECTIONS {
        let col = rng.gen_range(0..grid.width());
        let row = rng.gen_range(0..grid.height());
        if grid.cell(col, row).is_some_and(|c| c < params.occupied_threshold) {
            return Ok(grid.cell_point(col, row, rng.gen(), rng.gen()));
        }
    }
    Err(RrtError::NoFreeSpace)
}

/// Seeded free-space sampler used by the planner.
///
/// Draws from the same distribution as [`sample_free`], but picks among a
/// precomputed list of free cells so sparse maps never exhaust a rejection budget.
pub struct FreeSpaceSampler<'g> {
    grid: &'g OccupancyGrid,
    free: Vec<(usize, usize)>,
    goal: (f64, f64),
    goal_bias: f64,
    rng: ChaCha8Rng,
}

impl<'g> FreeSpaceSampler<'g> {
    pub fn new(
        grid: &'g OccupancyGrid,
        goal: &VehicleState,
        params: &RrtParams,
    ) -> Result<Self, RrtError> {
        let free = grid.free_cells(params.occupied_threshold);
        if free.is_empty() {
            return Err(RrtError::NoFreeSpace);
        }
        Ok(Self {
            grid,
            free,
            goal: goal.position(),
            goal_bias: params.goal_bias,
            rng: ChaCha8Rng::seed_from_u64(params.rng_seed),
        })
    }
}

impl Sampler for FreeSpaceSampler<'_> {
    fn sample(&mut self) -> Result<(f64, f64), RrtError> {
        if self.goal_bias > 0.0 && self.rng.gen::<f64>() < self.goal_bias {
            return Ok(self.goal);
        }
        let (col, row) = self.free[self.rng.gen_range(0..self.free.len())];
        Ok(self.grid.cell_point(col, row, self.rng.gen(), self.rng.gen()))
    }
}
