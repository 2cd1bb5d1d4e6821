//! Problem-file front-end for `kummerwitt`: parsing, task dispatch,
//! deterministic reports and the acceptance corpus.

pub mod problem;
pub mod report;
pub mod scoreboard;
pub mod tasks;
