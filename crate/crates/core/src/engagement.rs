//! Engagement branch: identity latent vectors for devices and services and
//! their interaction features `[v_d ∘ v_s, v_d, v_s]`.

use rand::Rng;

use crate::nn::{uniform_matrix, Gradients, ParamId, ParamStore};
use crate::Result;

#[derive(Clone, Debug)]
pub struct EngagementNet {
    dim: usize,
    pub device_latent: ParamId,
    pub service_latent: ParamId,
}

/// Row `device` of the device table and row `service` of the service table.
/// Row 0 of each table is the cold-start row.
///
/// # Panics
/// If an index is outside its table.
pub fn lookup_latent(store: &ParamStore, net: &EngagementNet, device: usize, service: usize) -> (Vec<f64>, Vec<f64>) {
    let d = store.value(net.device_latent);
    let s = store.value(net.service_latent);
    assert!(device < d.rows(), "device index {device} outside latent table");
    assert!(service < s.rows(), "service index {service} outside latent table");
    (d.row(device).to_vec(), s.row(service).to_vec())
}

pub fn engagement_features(v_dev: &[f64], v_srv: &[f64]) -> Vec<f64> {
    assert_eq!(v_dev.len(), v_srv.len(), "latent vectors differ in length");
    let mut out: Vec<f64> = v_dev.iter().zip(v_srv).map(|(a, b)| a * b).collect();
    out.extend_from_slice(v_dev);
    out.extend_from_slice(v_srv);
    out
}

impl EngagementNet {
    /// `n_devices`/`n_services` count known entities; each table gets one
    /// extra cold-start row at index 0.
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        n_devices: usize,
        n_services: usize,
        dim: usize,
        rng: &mut R,
        scale: f64,
    ) -> Result<Self> {
        Ok(EngagementNet {
            dim,
            device_latent: store.insert("engagement.device", uniform_matrix(rng, n_devices + 1, dim, scale), true)?,
            service_latent: store.insert("engagement.service", uniform_matrix(rng, n_services + 1, dim, scale), true)?,
        })
    }

    pub fn bind(store: &ParamStore) -> Option<Self> {
        let device_latent = store.id("engagement.device")?;
        Some(EngagementNet {
            dim: store.value(device_latent).cols(),
            device_latent,
            service_latent: store.id("engagement.service")?,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feature_dim(&self) -> usize {
        3 * self.dim
    }

    pub fn backward(
        &self,
        device: usize,
        service: usize,
        v_dev: &[f64],
        v_srv: &[f64],
        d_features: &[f64],
        grads: &mut Gradients,
    ) {
        let v = self.dim;
        assert_eq!(d_features.len(), 3 * v, "engagement gradient width");
        let d_dev: Vec<f64> = (0..v).map(|i| d_features[i] * v_srv[i] + d_features[v + i]).collect();
        let d_srv: Vec<f64> = (0..v).map(|i| d_features[i] * v_dev[i] + d_features[2 * v + i]).collect();
        grads.add_row(self.device_latent, device, &d_dev);
        grads.add_row(self.service_latent, service, &d_srv);
    }
}
