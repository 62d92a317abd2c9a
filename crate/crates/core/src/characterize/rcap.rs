// SPDX-License-Identifier: Apache-2.0

use super::CharacterizeError;
use crate::netlist::{Circuit, ElementKind};

/// Gate capacitance seen at `in_pin`: `cgate * W * L` summed over every
/// transistor whose gate is on that node.
pub fn receiver_cap(receiver: &Circuit, in_pin: &str) -> Result<f64, CharacterizeError> {
    let node = receiver
        .find_node(in_pin)
        .ok_or_else(|| CharacterizeError::UnknownPin(in_pin.to_string()))?;
    let mut total = 0.0;
    let mut gates = 0;
    for e in receiver.elements() {
        if let ElementKind::Mosfet {
            g,
            model,
            width_m,
            length_m,
            ..
        } = &e.kind
        {
            if *g == node {
                let m = receiver.model(model).expect("validated at construction");
                total += m.cgate_f_per_m2 * width_m * length_m;
                gates += 1;
            }
        }
    }
    if gates == 0 {
        return Err(CharacterizeError::NoGate(in_pin.to_string()));
    }
    Ok(total)
}
