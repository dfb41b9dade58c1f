use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{streams, SimConfig, SimError};
use crate::event::{Event, EventStream, Micros, Polarity};

/// Adds background-activity noise over `[t0, t1]`: a Poisson number of
/// events with mean `noise_rate_hz * duration * pixels`, each at a uniform
/// pixel, time and polarity.
pub fn inject_noise(
    stream: EventStream,
    t0: Micros,
    t1: Micros,
    cfg: &SimConfig,
) -> Result<EventStream, SimError> {
    cfg.validate()?;
    if t1 < t0 {
        return Err(SimError::InvalidConfig(format!("noise range [{t0}, {t1}] is empty")));
    }
    if cfg.noise_rate_hz == 0.0 || t0 == t1 {
        return Ok(stream);
    }
    let (w, h) = (stream.width(), stream.height());
    let mean = cfg.noise_rate_hz * (t1 - t0) as f64 * 1e-6 * f64::from(w) * f64::from(h);
    let mut rng = cfg.rng(streams::NOISE);
    let n = Poisson::new(mean)
        .map_err(|e| SimError::InvalidConfig(format!("noise rate: {e}")))?
        .sample(&mut rng) as usize;
    let mut noise = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random_range(0..w);
        let y = rng.random_range(0..h);
        let t = rng.random_range(t0..=t1);
        let p = if rng.random::<bool>() { Polarity::Positive } else { Polarity::Negative };
        noise.push(Event::new(x, y, t, p));
    }
    noise.sort_by_key(|e| e.t);
    let noise = EventStream::new(w, h, noise).expect("noise events are in bounds");
    Ok(stream.merge(noise))
}
