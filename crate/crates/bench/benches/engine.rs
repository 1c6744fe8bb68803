//! Placeholder benchmark; filled in once the engine exists.

fn main() {}
