//! Holds the long-running acceptance target in `tests/acceptance.rs`.
