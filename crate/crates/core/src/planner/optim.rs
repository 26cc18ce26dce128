use super::config::TrainConfig;
use super::params::Params;

/// Number of warm-up steps for a run of `total` steps; at least one whenever
/// warm-up is enabled so the first step runs at zero learning rate.
pub fn warmup_steps(total: usize, warmup_frac: f64) -> usize {
    if warmup_frac <= 0.0 || total == 0 {
        0
    } else {
        ((warmup_frac * total as f64).round() as usize).max(1)
    }
}

/// Linear warm-up from 0 to `peak`, then cosine decay to 0 at `total`.
pub fn lr_at(step: usize, total: usize, peak: f64, warmup_frac: f64) -> f64 {
    let warm = warmup_steps(total, warmup_frac);
    if step < warm {
        return peak * step as f64 / warm as f64;
    }
    let span = total.saturating_sub(warm).max(1) as f64;
    let progress = ((step - warm) as f64 / span).min(1.0);
    peak * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Adam moments with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: Params,
    v: Params,
    t: i32,
}

impl AdamW {
    pub fn new(like: &Params) -> Self {
        let mut m = like.clone();
        m.zero();
        AdamW {
            v: m.clone(),
            m,
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params, lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        let tensors = params.named_mut();
        let gs = grads.named();
        let ms = self.m.named_mut();
        let vs = self.v.named_mut();
        for ((((name, p), (_, g)), (_, m)), (_, v)) in tensors.into_iter().zip(gs).zip(ms).zip(vs) {
            let decay = if Params::no_decay(&name) { 0.0 } else { cfg.weight_decay };
            let pd = p.data_mut();
            let md = m.data_mut();
            let vd = v.data_mut();
            for (i, &gi) in g.data().iter().enumerate() {
                md[i] = cfg.beta1 * md[i] + (1.0 - cfg.beta1) * gi;
                vd[i] = cfg.beta2 * vd[i] + (1.0 - cfg.beta2) * gi * gi;
                let mh = md[i] / bc1;
                let vh = vd[i] / bc2;
                pd[i] -= lr * (mh / (vh.sqrt() + cfg.eps) + decay * pd[i]);
            }
        }
    }
}

/// Scale `grads` so their global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut Params, max_norm: f64) -> f64 {
    let norm = grads
        .named()
        .iter()
        .flat_map(|(_, m)| m.data().iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        for (_, m) in grads.named_mut() {
            m.scale(s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        let total = 1000;
        assert_eq!(lr_at(0, total, 1.0, 0.03), 0.0);
        assert_eq!(warmup_steps(total, 0.03), 30);
        assert!((lr_at(30, total, 1.0, 0.03) - 1.0).abs() < 1e-15);
        assert!((lr_at(15, total, 1.0, 0.03) - 0.5).abs() < 1e-15);
        assert!(lr_at(1000, total, 1.0, 0.03).abs() < 1e-15);
        let mid = lr_at(515, total, 1.0, 0.03);
        assert!((mid - 0.5).abs() < 1e-12);
        for s in 30..999 {
            assert!(lr_at(s + 1, total, 1.0, 0.03) <= lr_at(s, total, 1.0, 0.03));
        }
    }

    #[test]
    fn tiny_runs_still_warm_up() {
        assert_eq!(lr_at(0, 5, 2.0, 0.03), 0.0);
        assert_eq!(lr_at(1, 5, 2.0, 0.03), 2.0);
    }
}
