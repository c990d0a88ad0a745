//! Mixed-radix enumeration of the randomness and base-vector spaces.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SessionShape;
use crate::rng::{labeled_rng, DrawLabel};

use super::AuditOptions;

/// Digit layout of one randomness realization: the local values of every
/// client, the free individual values of clients `1..M-2` by rank, and the
/// index of `c` in `1..L`.
#[derive(Debug, Clone)]
pub(crate) struct RandLayout {
    pub radices: Vec<u64>,
    pub s_off: Vec<usize>,
    pub free_off: usize,
    pub c_pos: usize,
    pub ranks: usize,
    pub correlating: usize,
    pub target: u64,
    pub modulus: u64,
}

impl RandLayout {
    pub fn new(shape: &SessionShape) -> Self {
        let l = shape.field.modulus();
        let mut radices = Vec::new();
        let mut s_off = Vec::new();
        for i in 0..shape.num_clients() {
            s_off.push(radices.len());
            radices.extend(std::iter::repeat_n(l, shape.eta(i)));
        }
        let free_off = radices.len();
        let correlating = shape.correlating_client();
        radices.extend(std::iter::repeat_n(l, correlating * shape.leader_set_size));
        let c_pos = radices.len();
        radices.push(l - 1);
        Self {
            radices,
            s_off,
            free_off,
            c_pos,
            ranks: shape.leader_set_size,
            correlating,
            target: shape.correlation_target(),
            modulus: l,
        }
    }

    pub fn local_positions(&self, client: usize) -> std::ops::Range<usize> {
        let end = self.s_off.get(client + 1).copied().unwrap_or(self.free_off);
        self.s_off[client]..end
    }

    pub fn free_positions(&self, client: usize) -> std::ops::Range<usize> {
        let start = self.free_off + client * self.ranks;
        start..start + self.ranks
    }

    pub fn size(&self) -> Option<u128> {
        product(&self.radices)
    }
}

pub(crate) fn product(radices: &[u64]) -> Option<u128> {
    radices.iter().try_fold(1u128, |acc, &r| acc.checked_mul(r as u128))
}

/// Advances `digits` at `positions` as an odometer. Returns false after the
/// last combination, leaving the positions back at zero.
pub(crate) fn advance(digits: &mut [u64], radices: &[u64], positions: impl IntoIterator<Item = usize>) -> bool {
    for p in positions {
        digits[p] += 1;
        if digits[p] < radices[p] {
            return true;
        }
        digits[p] = 0;
    }
    false
}

/// Calls `f` for every assignment of `positions`, other digits untouched.
pub(crate) fn for_each_inner(
    digits: &mut [u64],
    radices: &[u64],
    positions: &[usize],
    mut f: impl FnMut(&[u64]),
) {
    for &p in positions {
        digits[p] = 0;
    }
    loop {
        f(digits);
        if !advance(digits, radices, positions.iter().copied()) {
            break;
        }
    }
}

/// How much of the space a check visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Coverage {
    /// Every base-vector and randomness realization.
    Exhaustive { h_vectors: u128, randomness: u128 },
    /// Every randomness realization for each of a few seeded base vectors.
    SampledH { h_vectors: u128, randomness: u128 },
    /// Seeded samples of everything outside the inner variables.
    Sampled { samples: u128, inner: u128 },
    /// Nothing to check.
    Vacuous,
}

impl fmt::Display for Coverage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coverage::Exhaustive { h_vectors, randomness } => {
                write!(f, "exhaustive: {h_vectors} base vectors x {randomness} randomness")
            }
            Coverage::SampledH { h_vectors, randomness } => {
                write!(f, "{h_vectors} sampled base vectors x all {randomness} randomness")
            }
            Coverage::Sampled { samples, inner } => write!(f, "{samples} samples x {inner} inner"),
            Coverage::Vacuous => write!(f, "vacuous"),
        }
    }
}

impl Coverage {
    pub fn is_exhaustive(&self) -> bool {
        matches!(self, Coverage::Exhaustive { .. } | Coverage::Vacuous)
    }
}

/// Drives the outer loop of a check: base vectors (`h_len` digits of radix
/// `l`) and every randomness digit outside `inner`. The visitor enumerates
/// `inner` itself and returns false to stop early.
pub(crate) fn sweep(
    rand: &RandLayout,
    h_len: usize,
    inner: &[usize],
    opts: &AuditOptions,
    mut visit: impl FnMut(&[u64], &mut [u64]) -> bool,
) -> Result<Coverage> {
    let l = rand.modulus;
    let h_radices = vec![l; h_len];
    let h_space = product(&h_radices);
    let rand_space = rand.size();
    let inner_space = product(&inner.iter().map(|&p| rand.radices[p]).collect::<Vec<_>>()).unwrap_or(u128::MAX);
    if inner_space > opts.bound {
        return Err(Error::BoundExceeded {
            space: inner_space,
            bound: opts.bound,
        });
    }
    let outer: Vec<usize> = (0..rand.radices.len()).filter(|p| !inner.contains(p)).collect();
    let mut h = vec![0u64; h_len];
    let mut d = vec![0u64; rand.radices.len()];

    let total = h_space.zip(rand_space).and_then(|(a, b)| a.checked_mul(b));
    if let (Some(total), Some(hs), Some(rs)) = (total, h_space, rand_space) {
        if total <= opts.bound {
            'h: loop {
                d.iter_mut().for_each(|x| *x = 0);
                loop {
                    if !visit(&h, &mut d) {
                        break 'h;
                    }
                    if !advance(&mut d, &rand.radices, outer.iter().copied()) {
                        break;
                    }
                }
                if !advance(&mut h, &h_radices, 0..h_len) {
                    break;
                }
            }
            return Ok(Coverage::Exhaustive { h_vectors: hs, randomness: rs });
        }
    }
    if let Some(rs) = rand_space.filter(|&rs| rs <= opts.bound) {
        let n = (opts.bound / rs).clamp(1, opts.h_samples.max(1) as u128);
        'outer: for i in 0..n {
            let mut rng = labeled_rng(opts.seed, DrawLabel::Audit(i as u64));
            h.iter_mut().for_each(|x| *x = rng.random_range(0..l));
            d.iter_mut().for_each(|x| *x = 0);
            loop {
                if !visit(&h, &mut d) {
                    break 'outer;
                }
                if !advance(&mut d, &rand.radices, outer.iter().copied()) {
                    break;
                }
            }
        }
        return Ok(Coverage::SampledH { h_vectors: n, randomness: rs });
    }
    let samples = (opts.bound / inner_space).max(1);
    for i in 0..samples {
        let mut rng = labeled_rng(opts.seed, DrawLabel::Audit(i as u64));
        h.iter_mut().for_each(|x| *x = rng.random_range(0..l));
        for &p in &outer {
            d[p] = rng.random_range(0..rand.radices[p]);
        }
        if !visit(&h, &mut d) {
            break;
        }
    }
    Ok(Coverage::Sampled {
        samples,
        inner: inner_space,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PrimeField;
    use crate::model::{ClientShape, PartyId, Universe};

    fn shape(l: u64, r: usize, dbs: &[u32]) -> SessionShape {
        SessionShape::new(
            PrimeField::new(l).unwrap(),
            Universe::new(4).unwrap(),
            PartyId(dbs.len() as u32 + 1),
            r,
            dbs.iter()
                .enumerate()
                .map(|(i, &n)| ClientShape {
                    party: PartyId(i as u32 + 1),
                    num_databases: n,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn layout_sizes() {
        let s4 = RandLayout::new(&shape(3, 2, &[3, 3]));
        assert_eq!(s4.size(), Some(162));
        assert_eq!(s4.local_positions(1), 1..2);
        assert_eq!(s4.free_positions(0), 2..4);
        assert_eq!(s4.c_pos, 4);
        assert_eq!(RandLayout::new(&shape(2, 1, &[2])).size(), Some(2));
        assert_eq!(RandLayout::new(&shape(5, 3, &[2, 3, 5])).size(), Some(5u128.pow(12) * 4));
    }

    #[test]
    fn odometer_visits_everything_once() {
        let radices = [2, 3, 1, 2];
        let mut d = [0; 4];
        let mut seen = std::collections::BTreeSet::new();
        for_each_inner(&mut d, &radices, &[0, 1, 3], |x| {
            assert!(seen.insert(x.to_vec()));
        });
        assert_eq!(seen.len(), 12);
        assert_eq!(d, [0; 4]);
    }

    #[test]
    fn sweep_modes() {
        let rl = RandLayout::new(&shape(3, 2, &[3, 3]));
        let mut opts = AuditOptions::default();
        let mut count = 0u128;
        let cov = sweep(&rl, 2, &[], &opts, |_, _| {
            count += 1;
            true
        })
        .unwrap();
        assert_eq!(cov, Coverage::Exhaustive { h_vectors: 9, randomness: 162 });
        assert_eq!(count, 9 * 162);

        opts.bound = 200;
        count = 0;
        let cov = sweep(&rl, 2, &[], &opts, |_, _| {
            count += 1;
            true
        })
        .unwrap();
        assert_eq!(cov, Coverage::SampledH { h_vectors: 1, randomness: 162 });
        assert_eq!(count, 162);

        opts.bound = 10;
        count = 0;
        let cov = sweep(&rl, 2, &[rl.c_pos], &opts, |_, _| {
            count += 1;
            true
        })
        .unwrap();
        assert_eq!(cov, Coverage::Sampled { samples: 5, inner: 2 });
        assert_eq!(count, 5);

        opts.bound = 1;
        assert!(matches!(
            sweep(&rl, 2, &[0, 1], &opts, |_, _| true),
            Err(Error::BoundExceeded { space: 9, bound: 1 })
        ));
    }
}
