use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};

use super::spec::{Study, ToyData, ToySpec};
use crate::densities::{envelope_max_2d, Density1D, Interval};
use crate::error::{Error, Result};

/// Generator used for every toy. ChaCha20 is counter based, so toys seeded
/// with neighbouring seeds draw independent streams.
pub type ToyRng = ChaCha20Rng;

/// Seed of toy `index` in an ensemble: `base + index` (wrapping).
pub fn toy_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

pub fn toy_rng(seed: u64) -> ToyRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Envelope factor over the density maximum used for accept-reject.
pub const ENVELOPE_FACTOR: f64 = 1.2;

fn event_count<R: Rng>(spec: &ToySpec, rng: &mut R) -> Result<usize> {
    if !spec.poisson {
        return Ok(spec.n_events);
    }
    let d = Poisson::new(spec.n_events as f64).map_err(|e| Error::input(e.to_string()))?;
    Ok(d.sample(rng) as usize)
}

fn pick<R: Rng>(fractions: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, f) in fractions.iter().enumerate() {
        acc += f;
        if u < acc {
            return k;
        }
    }
    // u beyond the rounded total: last component with nonzero fraction
    fractions.iter().rposition(|f| *f > 0.0).unwrap_or(0)
}

/// Generates the dataset described by `spec` with its own seed.
pub fn generate(spec: &ToySpec) -> Result<ToyData> {
    match spec.study {
        Study::Simple => generate_simple(spec),
        Study::Multicomponent => generate_multicomponent(spec),
        Study::Nonfactorising => generate_nonfactorising(spec),
    }
}

/// Two factorising components: signal `N(m) × Exp(t)`, background
/// `Exp(m) × N(t)`.
pub fn generate_simple(spec: &ToySpec) -> Result<ToyData> {
    if spec.study != Study::Simple {
        return Err(Error::input("generate_simple needs the simple study"));
    }
    spec.validate()?;
    let mut rng = toy_rng(spec.seed);
    let s = &spec.shapes;
    let (gs, gb, hs, hb) = (s.signal_m()?, s.background_m()?, s.signal_t()?, s.background_t()?);
    let z = spec.fractions();
    let n = event_count(spec, &mut rng)?;
    let mut d = ToyData::default();
    for _ in 0..n {
        let k = pick(&z, &mut rng);
        let (g, h) = if k == 0 { (&gs, &hs) } else { (&gb, &hb) };
        d.m.push(g.sample(&mut rng));
        d.t.push(h.sample(&mut rng));
        d.label.push(k);
    }
    Ok(d)
}

/// Shapes of the three-component study: `m` densities and the banded
/// control densities `(u, v)`.
pub struct MultiShapes {
    pub m: [Density1D; 3],
    pub u: [Density1D; 3],
    pub v: [Density1D; 3],
}

pub fn multicomponent_shapes() -> MultiShapes {
    let iv = Interval::unit();
    let n = |mu, s| Density1D::normal(mu, s, iv).unwrap();
    let flat = Density1D::uniform(iv);
    MultiShapes {
        m: [n(0.35, 0.06), n(0.55, 0.08), Density1D::exponential(2.0, iv).unwrap()],
        u: [n(0.25, 0.05), flat.clone(), flat.clone()],
        v: [flat.clone(), n(0.75, 0.05), flat],
    }
}

/// Three overlapping components in `m` on `[0, 1]`; `u` carries a band for
/// component 0, `v` one for component 1, component 2 is flat in both.
pub fn generate_multicomponent(spec: &ToySpec) -> Result<ToyData> {
    if spec.study != Study::Multicomponent {
        return Err(Error::input("generate_multicomponent needs the multicomponent study"));
    }
    spec.validate()?;
    let mut rng = toy_rng(spec.seed);
    let sh = multicomponent_shapes();
    let z = spec.fractions();
    let n = event_count(spec, &mut rng)?;
    let mut d = ToyData::default();
    for _ in 0..n {
        let k = pick(&z, &mut rng);
        d.m.push(sh.m[k].sample(&mut rng));
        d.u.push(sh.u[k].sample(&mut rng));
        d.v.push(sh.v[k].sample(&mut rng));
        d.label.push(k);
    }
    Ok(d)
}

/// Factorising signal and coupled background, kept with probability
/// `ε(m, t)` when the efficiency is on. The returned data carry the exact
/// efficiency used.
pub fn generate_nonfactorising(spec: &ToySpec) -> Result<ToyData> {
    if spec.study != Study::Nonfactorising {
        return Err(Error::input("generate_nonfactorising needs the nonfactorising study"));
    }
    spec.validate()?;
    let mut rng = toy_rng(spec.seed);
    let s = &spec.shapes;
    let (mi, ti) = (s.m_interval()?, s.t_interval()?);
    let (gs, hs) = (s.signal_m()?, s.signal_t()?);
    let envelope = ENVELOPE_FACTOR * envelope_max_2d(|m, t| spec.background_kernel(m, t), mi, ti);
    let eff = spec.active_efficiency();
    let z = spec.fractions();
    let n = event_count(spec, &mut rng)?;
    let mut d = ToyData {
        efficiency: eff.cloned(),
        ..ToyData::default()
    };
    while d.m.len() < n {
        let k = pick(&z, &mut rng);
        let (m, t) = if k == 0 {
            (gs.sample(&mut rng), hs.sample(&mut rng))
        } else {
            loop {
                let m = mi.lo + mi.width() * rng.random::<f64>();
                let t = ti.lo + ti.width() * rng.random::<f64>();
                let f = spec.background_kernel(m, t);
                if f > envelope {
                    return Err(Error::Envelope { value: f, envelope });
                }
                if rng.random::<f64>() * envelope <= f {
                    break (m, t);
                }
            }
        };
        if let Some(e) = eff {
            if rng.random::<f64>() > e.eval(m, t) {
                continue;
            }
        }
        d.m.push(m);
        d.t.push(t);
        d.label.push(k);
    }
    Ok(d)
}
