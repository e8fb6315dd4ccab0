//! The opaque network: topology, ECMP routing, per-link delay and link failures.
//!
//! Delays are computed analytically from a queueing-style link model. Nothing
//! in here is visible to the learning agents; they only ever see the
//! end-to-end delays that [`crate::env`] reports.

mod routing;
mod topology;

pub use routing::{accumulate_loads, ecmp_paths, end_to_end_delay, Network, PathSet, WeightedPath};
pub use topology::{fail_random_link, RandomTopology, Topology};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type LinkId = usize;

/// Default per-packet service time `w = 1/mu`, seconds.
pub const DEFAULT_SERVICE_WEIGHT: f64 = 0.001;
/// Default propagation delay, seconds.
pub const DEFAULT_PROPAGATION: f64 = 0.001;
/// Delay charged on a saturated link, seconds.
pub const DEFAULT_CONGESTION_DELAY: f64 = 1.0;

/// A directed link.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub src: NodeId,
    pub dst: NodeId,
    /// Capacity `C` in traffic units per step.
    pub capacity: f64,
    /// Service weight `w`, seconds.
    pub service_weight: f64,
    /// Propagation delay `p`, seconds.
    pub propagation: f64,
    /// Congestion delay `D`, seconds.
    pub congestion_delay: f64,
}

impl Link {
    /// A link with the default service weight, propagation and congestion delay.
    pub fn new(src: NodeId, dst: NodeId, capacity: f64) -> Self {
        Self {
            src,
            dst,
            capacity,
            service_weight: DEFAULT_SERVICE_WEIGHT,
            propagation: DEFAULT_PROPAGATION,
            congestion_delay: DEFAULT_CONGESTION_DELAY,
        }
    }

    pub fn with_service_weight(mut self, w: f64) -> Self {
        self.service_weight = w;
        self
    }

    pub fn with_propagation(mut self, p: f64) -> Self {
        self.propagation = p;
        self
    }

    pub fn with_congestion_delay(mut self, d: f64) -> Self {
        self.congestion_delay = d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.capacity.is_finite()
            && self.capacity > 0.0
            && self.service_weight.is_finite()
            && self.service_weight > 0.0
            && self.propagation.is_finite()
            && self.propagation >= 0.0
            && self.congestion_delay.is_finite()
            && self.congestion_delay > 0.0;
        if !ok {
            return Err(Error::Topology(format!(
                "link {}->{} has invalid parameters (C={}, w={}, p={}, D={})",
                self.src,
                self.dst,
                self.capacity,
                self.service_weight,
                self.propagation,
                self.congestion_delay
            )));
        }
        if self.src == self.dst {
            return Err(Error::Topology(format!("self-loop on node {}", self.src)));
        }
        Ok(())
    }

    /// Delay seen by traffic crossing this link under `load`.
    pub fn delay(&self, load: f64) -> f64 {
        link_delay(load, self)
    }
}

/// Per-link delay: `min(w / (1 - x/C), D) + p` below capacity, `D + p` at or above it.
pub fn link_delay(load: f64, link: &Link) -> f64 {
    if load < link.capacity {
        let queueing = link.service_weight / (1.0 - load / link.capacity);
        queueing.min(link.congestion_delay) + link.propagation
    } else {
        link.congestion_delay + link.propagation
    }
}

/// Convex, differentiable continuation of [`link_delay`].
///
/// Identical to the queueing model up to the knee `x = C (1 - w/D)` where the
/// queueing term reaches `D`; beyond it the delay grows linearly with the
/// model's slope at the knee instead of staying flat. Only the full-information
/// reference optimizer uses it, to get a usable gradient past saturation.
pub fn smoothed_link_delay(load: f64, link: &Link) -> f64 {
    let c = link.capacity;
    let w = link.service_weight;
    let d = link.congestion_delay;
    let knee = c * (1.0 - w / d).max(0.0);
    if load < knee {
        w / (1.0 - load / c) + link.propagation
    } else {
        let at_knee = (w / (1.0 - knee / c)).min(d);
        let slope = (w / c) / (1.0 - knee / c).powi(2);
        at_knee + slope * (load - knee) + link.propagation
    }
}

/// Which link delay function an evaluation uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayModel {
    /// The clamped queueing model, [`link_delay`].
    #[default]
    Queueing,
    /// [`smoothed_link_delay`].
    Smoothed,
}

impl DelayModel {
    pub fn delay(self, load: f64, link: &Link) -> f64 {
        match self {
            DelayModel::Queueing => link_delay(load, link),
            DelayModel::Smoothed => smoothed_link_delay(load, link),
        }
    }
}

/// Traffic carried by each link, indexed by [`LinkId`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinkLoadMap {
    load: Vec<f64>,
}

impl LinkLoadMap {
    pub fn zeros(n_links: usize) -> Self {
        Self {
            load: vec![0.0; n_links],
        }
    }

    pub fn from_vec(load: Vec<f64>) -> Self {
        debug_assert!(load.iter().all(|&x| x >= 0.0));
        Self { load }
    }

    pub fn get(&self, link: LinkId) -> f64 {
        self.load[link]
    }

    pub fn add(&mut self, link: LinkId, amount: f64) {
        self.load[link] += amount;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.load
    }

    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }

    /// Largest `load / capacity` over all links.
    pub fn max_utilization(&self, topology: &Topology) -> f64 {
        self.load
            .iter()
            .zip(topology.links())
            .map(|(x, l)| x / l.capacity)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(w: f64, c: f64, p: f64, d: f64) -> Link {
        Link::new(0, 1, c)
            .with_service_weight(w)
            .with_propagation(p)
            .with_congestion_delay(d)
    }

    #[test]
    fn zero_load_is_service_plus_propagation() {
        let l = link(0.01, 10.0, 0.005, 1.0);
        assert!((link_delay(0.0, &l) - 0.015).abs() < 1e-15);
    }

    #[test]
    fn saturated_link_pays_congestion_delay() {
        let l = link(0.01, 10.0, 0.005, 1.0);
        assert_eq!(link_delay(10.0, &l), 1.005);
        assert_eq!(link_delay(25.0, &l), 1.005);
    }

    #[test]
    fn half_load_doubles_service_time() {
        let l = link(0.01, 10.0, 0.0, 1.0);
        assert!((link_delay(5.0, &l) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn queueing_term_is_clamped_below_capacity() {
        let l = link(0.01, 10.0, 0.0, 1.0);
        // 0.01 / (1 - 9.999/10) = 100 s, clamped to D.
        assert_eq!(link_delay(9.999, &l), 1.0);
    }

    #[test]
    fn smoothed_model_matches_below_knee_and_keeps_rising() {
        let l = link(0.01, 10.0, 0.002, 1.0);
        for x in [0.0, 2.5, 5.0, 9.0, 9.89] {
            assert!((smoothed_link_delay(x, &l) - link_delay(x, &l)).abs() < 1e-12);
        }
        let knee = 10.0 * (1.0 - 0.01);
        assert!((smoothed_link_delay(knee, &l) - 1.002).abs() < 1e-9);
        assert!(smoothed_link_delay(10.5, &l) > smoothed_link_delay(10.0, &l));
        assert!(smoothed_link_delay(10.0, &l) > link_delay(10.0, &l));
    }

    #[test]
    fn invalid_links_are_rejected() {
        assert!(Link::new(0, 1, 0.0).validate().is_err());
        assert!(Link::new(2, 2, 1.0).validate().is_err());
        assert!(Link::new(0, 1, 1.0).with_propagation(-1.0).validate().is_err());
        assert!(Link::new(0, 1, 1.0).validate().is_ok());
    }
}
