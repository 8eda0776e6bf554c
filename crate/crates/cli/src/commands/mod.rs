pub mod calibrate;
pub mod classify;
pub mod couple;
pub mod select;
pub mod serve;
pub mod simulate;
pub mod solve;
pub mod verify;
