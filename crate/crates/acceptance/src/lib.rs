//! Holds the `acceptance` test target. Run it with
//! `cargo test -p ctxauth-acceptance --test acceptance`; pass a substring
//! (e.g. `-- roc`) to run only matching criteria.
