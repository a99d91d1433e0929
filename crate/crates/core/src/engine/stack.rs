//! The explicit control stack that replaces recursion.
//!
//! A frame stores only its stage, the midpoint residue it is iterating, and
//! its direction. Everything else about the call a frame belongs to (its
//! length, its residue pair and which blocks it reads and writes) is replayed
//! from the root whenever it is needed.

use std::fmt;

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub fn invert(self) -> Self {
        match self {
            Direction::Forward => Direction::Inverse,
            Direction::Inverse => Direction::Forward,
        }
    }
}

/// Which of the three sub-calls a frame is executing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Propagate `⌈ℓ/2⌉` from the input block into scratch.
    Compute,
    /// Propagate `⌊ℓ/2⌋` from scratch into the output block.
    Propagate,
    /// Undo the first sub-call.
    Uncompute,
}

impl Stage {
    pub fn number(self) -> u8 {
        match self {
            Stage::Compute => 1,
            Stage::Propagate => 2,
            Stage::Uncompute => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlFrame {
    pub stage: Stage,
    pub midpoint: usize,
    pub direction: Direction,
}

impl ControlFrame {
    pub fn new(direction: Direction) -> Self {
        Self {
            stage: Stage::Compute,
            midpoint: 0,
            direction,
        }
    }

    /// Direction of the sub-call issued at the current stage: the compute
    /// call always runs forward, the uncompute call always inverse, and the
    /// middle call follows the frame.
    pub fn child_direction(&self) -> Direction {
        match self.stage {
            Stage::Compute => Direction::Forward,
            Stage::Propagate => self.direction,
            Stage::Uncompute => Direction::Inverse,
        }
    }

    /// Moves to the next stage. Returns `false` once the last midpoint's
    /// uncompute stage has finished and the frame should be popped.
    pub fn advance(&mut self, k: usize) -> bool {
        match self.stage {
            Stage::Compute => self.stage = Stage::Propagate,
            Stage::Propagate => self.stage = Stage::Uncompute,
            Stage::Uncompute => {
                if self.midpoint + 1 < k {
                    self.midpoint += 1;
                    self.stage = Stage::Compute;
                } else {
                    return false;
                }
            }
        }
        true
    }
}

/// Tape layout `U, V, W_1, …, W_r` as block indices `0, 1, 2, …, r + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub r: usize,
}

impl BlockLayout {
    pub const U: usize = 0;
    pub const V: usize = 1;

    pub fn new(r: usize) -> Self {
        Self { r }
    }

    pub fn block_count(&self) -> usize {
        self.r + 2
    }

    /// Block index of `W_j`, `1 ≤ j ≤ r`.
    pub fn w(&self, j: usize) -> usize {
        assert!((1..=self.r).contains(&j), "W_{j} outside W_1..W_{}", self.r);
        j + 1
    }

    pub fn name(block: usize) -> String {
        match block {
            Self::U => "U".to_string(),
            Self::V => "V".to_string(),
            b => format!("W{}", b - 1),
        }
    }
}

/// Input, output and scratch blocks of one call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRoles {
    pub input: usize,
    pub output: usize,
    /// `None` once the depth has used up every `W` block; only base calls
    /// occur there.
    pub scratch: Option<usize>,
}

/// A call of the program family: length and residue pair, plus roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Call {
    pub length: usize,
    pub from_residue: usize,
    pub to_residue: usize,
    pub direction: Direction,
    pub roles: BlockRoles,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ControlStack {
    frames: Vec<ControlFrame>,
}

impl ControlStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_frames(frames: Vec<ControlFrame>) -> Self {
        Self { frames }
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[ControlFrame] {
        &self.frames
    }

    pub fn push(&mut self, frame: ControlFrame) {
        self.frames.push(frame);
    }

    pub fn pop(&mut self) -> Option<ControlFrame> {
        self.frames.pop()
    }

    pub fn top(&self) -> Option<&ControlFrame> {
        self.frames.last()
    }

    pub fn top_mut(&mut self) -> Option<&mut ControlFrame> {
        self.frames.last_mut()
    }

    /// Roles of the call the stack is about to issue.
    ///
    /// The frame at depth `d` (1-based) uses `W_{r-d+1}` as scratch. Its
    /// compute and uncompute children write that scratch block; its middle
    /// child reads it and writes the frame's own output block.
    pub fn block_roles(&self, layout: BlockLayout) -> Result<BlockRoles, EngineError> {
        let r = layout.r;
        if self.frames.len() > r {
            return Err(EngineError::MalformedStack {
                depth: self.frames.len(),
                max_depth: r,
            });
        }
        let (mut input, mut output) = (BlockLayout::U, BlockLayout::V);
        for (d, frame) in self.frames.iter().enumerate() {
            let scratch = layout.w(r - d);
            match frame.stage {
                Stage::Compute | Stage::Uncompute => output = scratch,
                Stage::Propagate => input = scratch,
            }
        }
        let depth = self.frames.len();
        Ok(BlockRoles {
            input,
            output,
            scratch: (depth < r).then(|| layout.w(r - depth)),
        })
    }

    /// Replays lengths and residues from the root call
    /// `(length, from, to)` and returns the call the top frame issues at
    /// its current stage (or the root call itself when the stack is empty).
    pub fn next_call(
        &self,
        layout: BlockLayout,
        length: usize,
        from_residue: usize,
        to_residue: usize,
        root_direction: Direction,
    ) -> Result<Call, EngineError> {
        let (mut length, mut from, mut to) = (length, from_residue, to_residue);
        for frame in &self.frames {
            if length < 2 {
                return Err(EngineError::MalformedStack {
                    depth: self.frames.len(),
                    max_depth: layout.r,
                });
            }
            match frame.stage {
                Stage::Compute | Stage::Uncompute => {
                    length = length.div_ceil(2);
                    to = frame.midpoint;
                }
                Stage::Propagate => {
                    length /= 2;
                    from = frame.midpoint;
                }
            }
        }
        let direction = self
            .top()
            .map_or(root_direction, ControlFrame::child_direction);
        Ok(Call {
            length,
            from_residue: from,
            to_residue: to,
            direction,
            roles: self.block_roles(layout)?,
        })
    }
}

impl fmt::Display for ControlStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (idx, frame) in self.frames.iter().enumerate() {
            if idx > 0 {
                f.write_str(" ")?;
            }
            let dir = match frame.direction {
                Direction::Forward => '+',
                Direction::Inverse => '-',
            };
            write!(f, "{}{}{}", frame.stage.number(), dir, frame.midpoint)?;
        }
        Ok(())
    }
}
