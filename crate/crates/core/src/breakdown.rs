//! Itemized architecture cost.

use serde::Serialize;

/// Total network cost split into access, backbone (or chain link) and node
/// equipment terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub local: f64,
    pub backbone: f64,
    pub node: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(local: f64, backbone: f64, node: f64) -> Self {
        Self {
            local,
            backbone,
            node,
            total: local + backbone + node,
        }
    }
}
