#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod io;
pub mod material;
pub mod mesh;
pub mod sparse;
pub mod tensor;
pub mod time;
pub mod verification;
pub mod vi;
