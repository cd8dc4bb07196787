//! Circuit IR, the builder surface used by reservoir hooks, validation,
//! the trajectory executor and the text renderer.

mod exec;
mod ir;
mod render;

pub use exec::{execute, ExecOptions, ShotTable};
pub(crate) use exec::ShotBatch;
pub use ir::{Circuit, CircuitBuilder, Instruction, Operation, Violation};
pub use render::render_text;
