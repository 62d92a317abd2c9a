// SPDX-License-Identifier: Apache-2.0

//! Static noise analysis of coupled victim/aggressor clusters.

pub mod characterize;
pub mod cluster;
pub mod mor;
pub mod netlist;
pub mod reference;
pub mod simcore;
