//! Path-loss × Rayleigh channel generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::{ChannelRealization, Matrix, NetworkInstance};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelModelParams {
    /// Path-loss exponent applied to the BS distance.
    pub pathloss_exp: f64,
    /// Side of the square coverage area; the BS is at its center.
    pub area_side: f64,
    /// `None` places every user uniformly over the whole square. `Some(f)`
    /// places `round(f·K)` users in the edge region (outside the centered
    /// square of half side) and the rest inside that central square.
    pub edge_fraction: Option<f64>,
    pub seed: u64,
}

impl Default for ChannelModelParams {
    fn default() -> Self {
        Self {
            pathloss_exp: 3.0,
            area_side: 1.0,
            edge_fraction: None,
            seed: 0,
        }
    }
}

impl ChannelModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exp.is_finite() && self.pathloss_exp >= 0.0) {
            return Err(Error::InvalidInstance(format!(
                "path-loss exponent {} is not usable",
                self.pathloss_exp
            )));
        }
        if !(self.area_side.is_finite() && self.area_side > 0.0) {
            return Err(Error::InvalidInstance("area side must be positive".into()));
        }
        if let Some(f) = self.edge_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidInstance(format!(
                    "edge fraction {f} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Raw random draws behind one realization: user positions and the
/// unit-mean exponential small-scale fading.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDraws {
    pub positions: Vec<[f64; 2]>,
    pub fading: Matrix,
}

impl ChannelDraws {
    pub fn sample<R: Rng + ?Sized>(
        params: &ChannelModelParams,
        users: usize,
        subcarriers: usize,
        rng: &mut R,
    ) -> Self {
        let side = params.area_side;
        let center = [side / 2.0, side / 2.0];
        let inner_lo = side / 4.0;
        let inner_hi = 3.0 * side / 4.0;
        let in_center = |p: &[f64; 2]| {
            (inner_lo..=inner_hi).contains(&p[0]) && (inner_lo..=inner_hi).contains(&p[1])
        };
        let edge_users = params
            .edge_fraction
            .map(|f| (f * users as f64).round() as usize);

        let mut positions = Vec::with_capacity(users);
        for k in 0..users {
            let pos = loop {
                let p = match edge_users {
                    None => [rng.random::<f64>() * side, rng.random::<f64>() * side],
                    Some(e) if k < e => loop {
                        let p = [rng.random::<f64>() * side, rng.random::<f64>() * side];
                        if !in_center(&p) {
                            break p;
                        }
                    },
                    Some(_) => [
                        inner_lo + rng.random::<f64>() * (side / 2.0),
                        inner_lo + rng.random::<f64>() * (side / 2.0),
                    ],
                };
                // A user exactly at the BS has no finite path loss; redraw.
                if p != center {
                    break p;
                }
            };
            positions.push(pos);
        }

        let fading = Matrix::from_fn(users, subcarriers, |_, _| rng.sample::<f64, _>(Exp1));
        Self { positions, fading }
    }

    pub fn distance(&self, user: usize, area_side: f64) -> f64 {
        let [x, y] = self.positions[user];
        let c = area_side / 2.0;
        ((x - c) * (x - c) + (y - c) * (y - c)).sqrt()
    }

    /// Combines the draws into `h = d^(-pathloss_exp) · s`.
    pub fn into_realization(self, pathloss_exp: f64, area_side: f64) -> Result<ChannelRealization> {
        let users = self.fading.rows();
        let large_scale: Vec<f64> = (0..users)
            .map(|k| self.distance(k, area_side).powf(-pathloss_exp))
            .collect();
        let gains = Matrix::from_fn(users, self.fading.cols(), |k, n| {
            large_scale[k] * self.fading[(k, n)]
        });
        ChannelRealization::new(self.positions, gains)
    }
}

/// Draws a channel realization for `topology` that is fully determined by
/// `params.seed`.
pub fn generate_instance(
    params: &ChannelModelParams,
    topology: &NetworkInstance,
) -> Result<ChannelRealization> {
    params.validate()?;
    topology.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    ChannelDraws::sample(params, topology.users, topology.subcarriers, &mut rng)
        .into_realization(params.pathloss_exp, params.area_side)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo(users: usize, subcarriers: usize) -> NetworkInstance {
        NetworkInstance::round_robin(users, subcarriers, 1, 0.0).unwrap()
    }

    #[test]
    fn central_placement_stays_inside_half_square() {
        let params = ChannelModelParams {
            edge_fraction: Some(0.0),
            seed: 7,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let draws = ChannelDraws::sample(&params, 200, 1, &mut rng);
        let limit = 2f64.sqrt() / 4.0;
        for k in 0..200 {
            assert!(draws.distance(k, 1.0) <= limit + 1e-15);
        }
    }

    #[test]
    fn edge_users_are_outside_central_square() {
        let params = ChannelModelParams {
            edge_fraction: Some(0.5),
            seed: 3,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let draws = ChannelDraws::sample(&params, 40, 1, &mut rng);
        for (k, [x, y]) in draws.positions.iter().enumerate() {
            let inside = (0.25..=0.75).contains(x) && (0.25..=0.75).contains(y);
            assert_eq!(inside, k >= 20, "user {k} at ({x}, {y})");
        }
    }

    #[test]
    fn unit_fading_without_pathloss_gives_unit_gains() {
        let draws = ChannelDraws {
            positions: vec![[0.1, 0.9], [0.3, 0.2], [0.7, 0.7]],
            fading: Matrix::filled(3, 4, 1.0),
        };
        let r = draws.into_realization(0.0, 1.0).unwrap();
        assert!(r.gains.iter().all(|&h| h == 1.0));
    }

    #[test]
    fn same_seed_same_realization() {
        let params = ChannelModelParams {
            seed: 99,
            ..Default::default()
        };
        let a = generate_instance(&params, &topo(6, 3)).unwrap();
        let b = generate_instance(&params, &topo(6, 3)).unwrap();
        assert_eq!(a, b);
        let c = generate_instance(
            &ChannelModelParams {
                seed: 100,
                ..params
            },
            &topo(6, 3),
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_params() {
        let p = ChannelModelParams {
            edge_fraction: Some(1.5),
            ..Default::default()
        };
        assert!(generate_instance(&p, &topo(2, 1)).is_err());
        let p = ChannelModelParams {
            area_side: 0.0,
            ..Default::default()
        };
        assert!(generate_instance(&p, &topo(2, 1)).is_err());
    }
}
