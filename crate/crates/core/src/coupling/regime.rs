//! Labeled-example couplings for the four lower-bound constructions.
//!
//! In every construction the two labels are one shared draw, so `y == y'`
//! bitwise.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::chain::{couple_sum_conditioned, reflect, RankOneChain};
use crate::error::{invalid, Error, Result};
use crate::gaussian::fill_sum_conditioned;
use crate::model::{
    make_big_eta_pair, make_interm_eta_pair, make_small_beta_pair, make_small_eta_pair,
    HypothesisPair, LabeledSample, Regime,
};
use crate::rng::RngStream;

/// One labeled example under each hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledPair {
    pub sample0: LabeledSample,
    pub sample1: LabeledSample,
}

impl CoupledPair {
    pub fn coordinate_disagreements(&self) -> usize {
        self.sample0
            .x
            .iter()
            .zip(&self.sample1.x)
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn label_disagrees(&self) -> bool {
        self.sample0.y != self.sample1.y
    }
}

/// Parameters of one regime coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum CouplingSpec {
    SmallBeta {
        d: usize,
        b: f64,
        sigma: f64,
        #[serde(default)]
        r: f64,
    },
    BigEta {
        d: usize,
        s: f64,
        #[serde(default)]
        sigma: f64,
    },
    IntermEta {
        d: usize,
        s: f64,
        eps: f64,
        #[serde(default)]
        sigma: f64,
    },
    SmallEta {
        d: usize,
        #[serde(rename = "B")]
        big_b: f64,
        #[serde(rename = "E")]
        e: f64,
        sigma: f64,
    },
}

impl CouplingSpec {
    pub fn d(&self) -> usize {
        match *self {
            CouplingSpec::SmallBeta { d, .. }
            | CouplingSpec::BigEta { d, .. }
            | CouplingSpec::IntermEta { d, .. }
            | CouplingSpec::SmallEta { d, .. } => d,
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            CouplingSpec::SmallBeta { sigma, .. }
            | CouplingSpec::BigEta { sigma, .. }
            | CouplingSpec::IntermEta { sigma, .. }
            | CouplingSpec::SmallEta { sigma, .. } => sigma,
        }
    }

    pub fn regime(&self) -> Regime {
        match self {
            CouplingSpec::SmallBeta { .. } => Regime::SmallBeta,
            CouplingSpec::BigEta { .. } => Regime::BigEta,
            CouplingSpec::IntermEta { .. } => Regime::IntermEta,
            CouplingSpec::SmallEta { .. } => Regime::SmallEta,
        }
    }

    /// The two regressors being coupled.
    pub fn hypothesis_pair(&self) -> Result<HypothesisPair> {
        let mut pair = match *self {
            CouplingSpec::SmallBeta { d, b, sigma, r } => make_small_beta_pair(d, b, sigma, r)?,
            CouplingSpec::BigEta { d, s, .. } => make_big_eta_pair(d, s)?,
            CouplingSpec::IntermEta { d, s, eps, .. } => make_interm_eta_pair(d, s, eps)?,
            CouplingSpec::SmallEta { d, big_b, e, .. } => make_small_eta_pair(d, big_b, e)?,
        };
        pair.sigma = self.sigma();
        Ok(pair)
    }

    /// Maximal runs of coordinates sharing one coefficient under both
    /// hypotheses. Permuting within a block leaves both laws unchanged.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let d = self.d();
        match *self {
            CouplingSpec::SmallBeta { r, .. } if r > 0.0 => vec![0..1, 1..d],
            CouplingSpec::SmallBeta { .. } | CouplingSpec::BigEta { .. } => vec![0..d],
            CouplingSpec::IntermEta { .. } | CouplingSpec::SmallEta { .. } => {
                vec![0..d / 2, d / 2..d]
            }
        }
    }

    /// Same spec with the separation parameter multiplied by `factor`.
    pub fn scaled_separation(&self, factor: f64) -> Self {
        let mut out = *self;
        match &mut out {
            CouplingSpec::SmallBeta { b, .. } => *b *= factor,
            CouplingSpec::BigEta { s, .. } => *s *= factor,
            CouplingSpec::IntermEta { eps, .. } => *eps = (*eps * factor).min(1.0),
            CouplingSpec::SmallEta { e, .. } => *e *= factor,
        }
        out
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    Ok(())
}

enum Prepared {
    SmallBeta {
        d: usize,
        start: usize,
        c: f64,
        denom: f64,
        r: f64,
        chain: Option<RankOneChain>,
    },
    BigEta {
        d: usize,
        s: f64,
        sigma: f64,
        sum_chain: RankOneChain,
    },
    IntermEta {
        h: usize,
        s: f64,
        eps: f64,
        sigma: f64,
        sum_chain: RankOneChain,
    },
    SmallEta {
        h: usize,
        sqrt_d: f64,
        big_b: f64,
        u: f64,
        var_y: f64,
        rho: f64,
        var_y1: f64,
        x2_chain: Option<RankOneChain>,
        sum_chain: RankOneChain,
    },
}

/// A coupling with its per-draw structures precomputed.
pub struct RegimeCoupler {
    spec: CouplingSpec,
    prepared: Prepared,
}

/// One coupled draw plus construction-internal diagnostics.
#[derive(Debug, Clone)]
pub struct DetailedDraw {
    pub pair: CoupledPair,
    /// Small-eta only: whether the first-half label contributions differ
    /// (equivalently `y2 != y2'`).
    pub aux_event: Option<bool>,
}

fn sum_chain(d: usize) -> Result<RankOneChain> {
    RankOneChain::new(vec![1.0; d.saturating_sub(1)], 1.0)
}

impl RegimeCoupler {
    pub fn new(spec: CouplingSpec) -> Result<Self> {
        // constructor checks parameter ranges
        spec.hypothesis_pair()?;
        check_sigma(spec.sigma())?;
        let prepared = match spec {
            CouplingSpec::SmallBeta { d, b, sigma, r } => {
                if sigma <= 0.0 {
                    return Err(Error::Regime(
                        "the small-beta coupling needs sigma > 0".into(),
                    ));
                }
                let start = usize::from(r > 0.0);
                let m = d - start;
                let c = b / (d as f64).sqrt();
                let denom = m as f64 * c * c + sigma * sigma;
                let chain = if b > 0.0 {
                    Some(RankOneChain::new(vec![c; m], sigma * sigma)?)
                } else {
                    None
                };
                Prepared::SmallBeta {
                    d,
                    start,
                    c,
                    denom,
                    r,
                    chain,
                }
            }
            CouplingSpec::BigEta { d, s, sigma } => Prepared::BigEta {
                d,
                s,
                sigma,
                sum_chain: sum_chain(d)?,
            },
            CouplingSpec::IntermEta { d, s, eps, sigma } => Prepared::IntermEta {
                h: d / 2,
                s,
                eps,
                sigma,
                sum_chain: sum_chain(d / 2)?,
            },
            CouplingSpec::SmallEta { d, big_b, e, sigma } => {
                if !(big_b > 0.0) {
                    return Err(invalid("the small-eta coupling needs B > 0"));
                }
                if sigma <= 0.0 {
                    return Err(Error::Regime(
                        "the small-eta coupling needs sigma > 0".into(),
                    ));
                }
                if e / sigma > 1.0 {
                    return Err(Error::Regime(format!("E/sigma = {} exceeds 1", e / sigma)));
                }
                let h = d / 2;
                let sqrt_d = (d as f64).sqrt();
                let u = e / sqrt_d;
                let a = h as f64 * u * u;
                let w2 = big_b * big_b / 2.0;
                let s2 = w2 + sigma * sigma;
                let x2_chain = if e > 0.0 {
                    Some(RankOneChain::new(vec![u; h], s2)?)
                } else {
                    None
                };
                Prepared::SmallEta {
                    h,
                    sqrt_d,
                    big_b,
                    u,
                    var_y: a + s2,
                    rho: w2 / s2,
                    var_y1: w2 * sigma * sigma / s2,
                    x2_chain,
                    sum_chain: sum_chain(h)?,
                }
            }
        };
        Ok(Self { spec, prepared })
    }

    pub fn spec(&self) -> &CouplingSpec {
        &self.spec
    }

    pub fn draw(&self, rng: &mut RngStream) -> CoupledPair {
        self.draw_detailed(rng).pair
    }

    pub fn draw_detailed(&self, rng: &mut RngStream) -> DetailedDraw {
        match &self.prepared {
            Prepared::SmallBeta {
                d,
                start,
                c,
                denom,
                r,
                chain,
            } => {
                let t0 = denom.sqrt() * rng.normal();
                let x1 = if *start == 1 { rng.normal() } else { 0.0 };
                let m = d - start;
                let mu0 = vec![t0 * c / denom; m];
                let mu1: Vec<f64> = mu0.iter().map(|v| -v).collect();
                let (b0, b1) = match chain {
                    Some(ch) => {
                        let b0 = ch.sample(&mu0, rng);
                        let b1 = ch.couple(&b0, &mu0, &mu1, rng);
                        (b0, b1)
                    }
                    None => {
                        let b0: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
                        (b0.clone(), b0)
                    }
                };
                let y = r * x1 + t0;
                let assemble = |block: Vec<f64>| {
                    let mut x = Vec::with_capacity(*d);
                    if *start == 1 {
                        x.push(x1);
                    }
                    x.extend(block);
                    LabeledSample { x, y }
                };
                DetailedDraw {
                    pair: CoupledPair {
                        sample0: assemble(b0),
                        sample1: assemble(b1),
                    },
                    aux_event: None,
                }
            }
            Prepared::BigEta {
                d,
                s,
                sigma,
                sum_chain,
            } => {
                let z = (*d as f64).sqrt() * rng.normal();
                let (x0, x1) = couple_sum_conditioned(sum_chain, *d, z, -z, rng);
                let y = s * z + sigma * rng.normal();
                DetailedDraw {
                    pair: CoupledPair {
                        sample0: LabeledSample { x: x0, y },
                        sample1: LabeledSample { x: x1, y },
                    },
                    aux_event: None,
                }
            }
            Prepared::IntermEta {
                h,
                s,
                eps,
                sigma,
                sum_chain,
            } => {
                let hf = *h as f64;
                let e2 = 1.0 + eps * eps;
                let z = (e2 * hf).sqrt() * rng.normal();
                let t = eps * z / e2 + (hf / e2).sqrt() * rng.normal();
                let tp = t - 2.0 * eps * z / e2;
                let (mut a0, a1) = couple_sum_conditioned(sum_chain, *h, t, tp, rng);
                let (b0, b1) =
                    couple_sum_conditioned(sum_chain, *h, z - eps * t, z + eps * tp, rng);
                let y = s * z + sigma * rng.normal();
                let mut x1 = a1;
                a0.extend(b0);
                x1.extend(b1);
                DetailedDraw {
                    pair: CoupledPair {
                        sample0: LabeledSample { x: a0, y },
                        sample1: LabeledSample { x: x1, y },
                    },
                    aux_event: None,
                }
            }
            Prepared::SmallEta {
                h,
                sqrt_d,
                big_b,
                u,
                var_y,
                rho,
                var_y1,
                x2_chain,
                sum_chain,
            } => {
                let y = var_y.sqrt() * rng.normal();
                // second half given the label: N(+-y u / var_y, I - u u'/var_y)
                let (x2, x2p) = match x2_chain {
                    Some(ch) => {
                        let mu = vec![y * u / var_y; *h];
                        let mup: Vec<f64> = mu.iter().map(|v| -v).collect();
                        let a = ch.sample(&mu, rng);
                        let b = ch.couple(&a, &mu, &mup, rng);
                        (a, b)
                    }
                    None => {
                        let a: Vec<f64> = (0..*h).map(|_| rng.normal()).collect();
                        (a.clone(), a)
                    }
                };
                // what the first half and the noise must jointly explain
                let resid = y - u * x2.iter().sum::<f64>();
                let residp = y + u * x2p.iter().sum::<f64>();
                let y1 = rho * resid + var_y1.sqrt() * rng.normal();
                let y1p = reflect(y1, rho * resid, rho * (residp - resid), *var_y1, rng);
                let scale = sqrt_d / big_b;
                let differs = y1 != y1p;
                let (x1, x1p) = if differs {
                    couple_sum_conditioned(sum_chain, *h, y1 * scale, y1p * scale, rng)
                } else {
                    let mut v: Vec<f64> = (0..*h).map(|_| rng.normal()).collect();
                    fill_sum_conditioned(&mut v, y1 * scale);
                    (v.clone(), v)
                };
                let mut x = x1;
                x.extend(x2);
                let mut xp = x1p;
                xp.extend(x2p);
                DetailedDraw {
                    pair: CoupledPair {
                        sample0: LabeledSample { x, y },
                        sample1: LabeledSample { x: xp, y },
                    },
                    aux_event: Some(differs),
                }
            }
        }
    }
}

/// Applies an independent uniform permutation inside each block to both
/// covariate vectors of `pair` (the same permutation on both sides).
pub fn permute_within_blocks(pair: &mut CoupledPair, blocks: &[Range<usize>], rng: &mut RngStream) {
    for block in blocks {
        let len = block.len();
        for i in (1..len).rev() {
            let j = rng.index(i + 1);
            pair.sample0.x.swap(block.start + i, block.start + j);
            pair.sample1.x.swap(block.start + i, block.start + j);
        }
    }
}

pub fn draw_small_beta_pair(
    d: usize,
    b: f64,
    sigma: f64,
    r: f64,
    rng: &mut RngStream,
) -> Result<CoupledPair> {
    Ok(RegimeCoupler::new(CouplingSpec::SmallBeta { d, b, sigma, r })?.draw(rng))
}

pub fn draw_big_eta_pair(d: usize, s: f64, sigma: f64, rng: &mut RngStream) -> Result<CoupledPair> {
    Ok(RegimeCoupler::new(CouplingSpec::BigEta { d, s, sigma })?.draw(rng))
}

pub fn draw_interm_eta_pair(
    d: usize,
    s: f64,
    eps: f64,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<CoupledPair> {
    Ok(RegimeCoupler::new(CouplingSpec::IntermEta { d, s, eps, sigma })?.draw(rng))
}

pub fn draw_small_eta_pair(
    d: usize,
    big_b: f64,
    e: f64,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<CoupledPair> {
    Ok(RegimeCoupler::new(CouplingSpec::SmallEta { d, big_b, e, sigma })?.draw(rng))
}
