//! Holds the `acceptance` test target; there is no library code.
//!
//! ```sh
//! cargo test -p heatcast-validation --test acceptance
//! ```
