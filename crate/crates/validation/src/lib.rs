//! End-to-end acceptance checks for `sparse-rasch` live in `tests/acceptance.rs`.
