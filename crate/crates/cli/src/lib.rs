//! Library backing the `steerkit` command-line tool: scenario files, the
//! end-to-end verdict pipeline, figure emitters, and output helpers.

pub mod io;
pub mod pipeline;
pub mod scenario;
pub mod schema;
pub mod svg;
