//! Transfer time of a routed edge.

/// `bytes` over the route's effective bandwidth plus per-hop latency.
pub fn edge_time(bytes: u64, effective_bandwidth: f64, hops: u64, latency: f64) -> f64 {
    let wire = if bytes == 0 { 0.0 } else { bytes as f64 * 8.0 / effective_bandwidth };
    wire + hops as f64 * latency
}

/// A collective hop pays the route latency once per sequential step.
pub fn collective_edge_time(
    bytes: u64,
    effective_bandwidth: f64,
    steps: u64,
    route_latency: f64,
) -> f64 {
    let wire = if bytes == 0 { 0.0 } else { bytes as f64 * 8.0 / effective_bandwidth };
    wire + steps as f64 * route_latency
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn throughput_division() {
        // 1 GB at 50 GB/s.
        assert!((edge_time(1_000_000_000, 400e9, 1, 0.0) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn empty_payload_is_latency() {
        assert_eq!(edge_time(0, 1e9, 3, 1e-6), 3e-6);
    }

    #[test]
    fn latency_dominated() {
        let t = edge_time(8, 1e12, 2, 1e-6);
        assert!((t - 2e-6).abs() < 1e-9);
    }

    #[test]
    fn steps_multiply_latency_only() {
        let one = collective_edge_time(1000, 8e3, 1, 1e-3);
        let four = collective_edge_time(1000, 8e3, 4, 1e-3);
        assert!((four - one - 3e-3).abs() < 1e-12);
    }
}
