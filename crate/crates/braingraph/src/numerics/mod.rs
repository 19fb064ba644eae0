//! Dense f64 tensors, a reverse-mode tape, Adam, and gradient checking.

pub mod gradcheck;
pub mod optim;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use optim::{init_tensor, Init, Optimizer};
pub use rng::Stream;
pub use tape::{sparsemax_row, Gradients, Tape, ValueId};
pub use tensor::Tensor;
