// SPDX-License-Identifier: Apache-2.0

//! Level-1 (square-law) drain current with channel-length modulation.

use crate::netlist::{MosfetModel, Polarity};

/// Drain current and its partial derivatives at one bias point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosfetEval {
    /// Current into the drain terminal, amps.
    pub id: f64,
    pub gm: f64,
    pub gds: f64,
}

/// Forward-biased NMOS equations, `vds >= 0`.
fn forward(beta: f64, vt: f64, lambda: f64, vgs: f64, vds: f64) -> MosfetEval {
    let vov = vgs - vt;
    if vov <= 0.0 {
        return MosfetEval {
            id: 0.0,
            gm: 0.0,
            gds: 0.0,
        };
    }
    let clm = 1.0 + lambda * vds;
    if vds < vov {
        let core = vov * vds - 0.5 * vds * vds;
        MosfetEval {
            id: beta * core * clm,
            gm: beta * vds * clm,
            gds: beta * ((vov - vds) * clm + lambda * core),
        }
    } else {
        let core = 0.5 * vov * vov;
        MosfetEval {
            id: beta * core * clm,
            gm: beta * vov * clm,
            gds: beta * core * lambda,
        }
    }
}

/// NMOS equations in both conduction directions: for `vds < 0` drain and
/// source swap roles.
fn nmos_like(beta: f64, vt: f64, lambda: f64, vgs: f64, vds: f64) -> MosfetEval {
    if vds >= 0.0 {
        forward(beta, vt, lambda, vgs, vds)
    } else {
        // id = -f(vgd, -vds), vgd = vgs - vds
        let r = forward(beta, vt, lambda, vgs - vds, -vds);
        MosfetEval {
            id: -r.id,
            gm: -r.gm,
            gds: r.gm + r.gds,
        }
    }
}

/// Evaluates a device given its terminal differences. PMOS maps onto the
/// NMOS equations with negated voltages and threshold.
pub fn mosfet_eval(model: &MosfetModel, width_m: f64, length_m: f64, vgs: f64, vds: f64) -> MosfetEval {
    let beta = model.kp_a_per_v2 * width_m / length_m;
    match model.polarity {
        Polarity::Nmos => nmos_like(beta, model.vt0_v, model.lambda_per_v, vgs, vds),
        Polarity::Pmos => {
            let r = nmos_like(beta, -model.vt0_v, model.lambda_per_v, -vgs, -vds);
            MosfetEval {
                id: -r.id,
                gm: r.gm,
                gds: r.gds,
            }
        }
    }
}

/// Drain current (into the drain terminal) of a level-1 device.
pub fn mosfet_current(model: &MosfetModel, width_m: f64, length_m: f64, vgs: f64, vds: f64) -> f64 {
    mosfet_eval(model, width_m, length_m, vgs, vds).id
}
