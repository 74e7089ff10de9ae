use crate::aiem::Params;
use crate::error::{Error, Result};

use super::config::{AdamConfig, Group, GroupConfigs, ParamGroupConfig};

/// Group of one tensor, by name.
pub fn group_of(name: &str) -> Result<Group> {
    if name.starts_with("aiem.") || name.starts_with("head.post_linear.") || name.starts_with("head.major.") {
        Ok(Group::Major)
    } else if name.starts_with("head.aux0.") || name.starts_with("head.aux1.") {
        Ok(Group::Aux)
    } else if name.starts_with("encoder.") {
        Ok(Group::Solid)
    } else {
        Err(Error::UnassignedTensor(name.to_string()))
    }
}

/// Group of every tensor of `params`, in tensor order.
pub fn assign_groups(params: &Params) -> Result<Vec<(&'static str, Group)>> {
    params.tensors().iter().map(|t| Ok((t.name, group_of(t.name)?))).collect()
}

/// Linear warmup to the group rate, constant after, zero from `max_update` on.
pub fn lr_schedule(group: &ParamGroupConfig, update: u64, max_update: u64) -> f64 {
    if update >= max_update {
        return 0.0;
    }
    if group.warmup_updates == 0 || update >= group.warmup_updates {
        return group.learning_rate;
    }
    group.learning_rate * update as f64 / group.warmup_updates as f64
}

/// Adam with decoupled weight decay, one rate per group.
#[derive(Debug, Clone)]
pub struct AdamW {
    config: AdamConfig,
    groups: Vec<Group>,
    m: Params,
    v: Params,
    step: u64,
}

impl AdamW {
    pub fn new(params: &Params, config: AdamConfig) -> Result<Self> {
        let groups = assign_groups(params)?.into_iter().map(|(_, g)| g).collect();
        Ok(AdamW {
            config,
            groups,
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update: `p -= lr · (m̂ / (√v̂ + ε) + wd · p)`.
    pub fn step(&mut self, params: &mut Params, grads: &Params, groups: &GroupConfigs, update: u64, max_update: u64) {
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let gs = grads.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for ((((_, p), g), (_, m)), ((_, v), group)) in params
            .tensors_mut()
            .into_iter()
            .zip(gs)
            .zip(ms)
            .zip(vs.into_iter().zip(&self.groups))
        {
            let cfg = groups.get(*group);
            let lr = lr_schedule(cfg, update, max_update);
            for i in 0..p.len() {
                let gi = g.data[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                if lr == 0.0 {
                    continue;
                }
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * (mhat / (vhat.sqrt() + eps) + cfg.weight_decay * p[i]);
            }
        }
    }
}
