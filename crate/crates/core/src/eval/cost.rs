/// Bytes per transmitted feature value or weight.
pub const BYTES_PER_VALUE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostInputs {
    pub n_clients: u64,
    pub n_features: u64,
    pub bytes_per_value: u64,
    pub periods: u64,
    pub n_weights: u64,
    pub epochs: u64,
    /// Joules per transmitted byte.
    pub per_byte_energy: f64,
    /// Joules spent on local training per node.
    pub train_energy: f64,
}

impl Default for CostInputs {
    fn default() -> Self {
        CostInputs {
            n_clients: 0,
            n_features: crate::FEATURE_COUNT as u64,
            bytes_per_value: BYTES_PER_VALUE as u64,
            periods: 0,
            n_weights: 0,
            epochs: 0,
            per_byte_energy: 0.0,
            train_energy: 0.0,
        }
    }
}

/// Bytes uploaded when every node ships its raw features: `N * F * S * Periods`.
pub fn cost_central(c: &CostInputs) -> u64 {
    c.n_clients * c.n_features * c.bytes_per_value * c.periods
}

/// Bytes exchanged by federation, weights down and up each epoch:
/// `2 * N * W * S * Epoch`.
pub fn cost_federated(c: &CostInputs) -> u64 {
    2 * c.n_clients * c.n_weights * c.bytes_per_value * c.epochs
}

/// `(E_com, E_total)` per node, with `E_com = W * S * Epoch * per_byte_energy`.
pub fn energy(c: &CostInputs) -> (f64, f64) {
    let e_com = (c.n_weights * c.bytes_per_value * c.epochs) as f64 * c.per_byte_energy;
    (e_com, c.train_energy + e_com)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central() -> CostInputs {
        CostInputs {
            n_clients: 50,
            periods: 720,
            ..CostInputs::default()
        }
    }

    #[test]
    fn central_cost_example() {
        assert_eq!(cost_central(&central()), 4_464_000);
        assert_eq!(cost_central(&CostInputs { periods: 0, ..central() }), 0);
        assert_eq!(cost_central(&CostInputs { periods: 1440, ..central() }), 2 * 4_464_000);
    }

    #[test]
    fn federated_cost_example() {
        let c = CostInputs {
            n_clients: 10,
            n_weights: 417,
            epochs: 100,
            ..CostInputs::default()
        };
        assert_eq!(cost_federated(&c), 3_336_000);
        assert_eq!(cost_federated(&CostInputs { epochs: 0, ..c }), 0);
    }

    #[test]
    fn costs_are_linear_in_each_factor() {
        let base = CostInputs {
            n_clients: 7,
            n_features: 31,
            bytes_per_value: 4,
            periods: 33,
            n_weights: 337,
            epochs: 12,
            ..CostInputs::default()
        };
        let doubled = [
            CostInputs { n_clients: 14, ..base },
            CostInputs { bytes_per_value: 8, ..base },
        ];
        for d in doubled {
            assert_eq!(cost_central(&d), 2 * cost_central(&base));
            assert_eq!(cost_federated(&d), 2 * cost_federated(&base));
        }
        assert_eq!(cost_central(&CostInputs { n_features: 62, ..base }), 2 * cost_central(&base));
        assert_eq!(cost_central(&CostInputs { periods: 66, ..base }), 2 * cost_central(&base));
        assert_eq!(cost_federated(&CostInputs { n_weights: 674, ..base }), 2 * cost_federated(&base));
        assert_eq!(cost_federated(&CostInputs { epochs: 24, ..base }), 2 * cost_federated(&base));
    }

    #[test]
    fn energy_example() {
        let c = CostInputs {
            n_weights: 337,
            epochs: 100,
            per_byte_energy: 1e-6,
            train_energy: 2.0,
            ..CostInputs::default()
        };
        let (e_com, e_total) = energy(&c);
        assert!((e_com - 0.1348).abs() < 1e-12);
        assert!((e_total - 2.1348).abs() < 1e-12);
        let silent = CostInputs { per_byte_energy: 0.0, ..c };
        assert_eq!(energy(&silent), (0.0, 2.0));
    }
}
