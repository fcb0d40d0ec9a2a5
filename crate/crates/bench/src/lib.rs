// SPDX-License-Identifier: Apache-2.0

//! Criterion benchmarks for `cnd-core`; see `benches/cnd.rs`.
