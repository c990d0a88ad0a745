//! Fast evaluation of every answer of a session for given base vectors and
//! randomness digits, on raw residues.

use crate::client::mask_raw;
use crate::error::Result;
use crate::field::PrimeField;
use crate::leader::{build_queries, make_partition_plan, Decoder, PartitionPlan};
use crate::model::{to_incidence, Endpoint, SessionShape};

use super::space::RandLayout;
use super::{Instance, Mutation};

#[derive(Debug, Clone)]
pub(crate) struct Slot {
    pub client: usize,
    pub dest: Endpoint,
    /// 0-based.
    pub partition: usize,
    pub target: Option<u32>,
    /// 0-based rank of `target`.
    pub rank: Option<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub field: PrimeField,
    pub shape: SessionShape,
    pub plan: PartitionPlan,
    pub decoder: Decoder,
    pub slots: Vec<Slot>,
    /// Incidence bits per client.
    pub incidence: Vec<Vec<u64>>,
    pub rand: RandLayout,
    pub universe_size: usize,
}

impl Layout {
    pub fn new(instance: &Instance) -> Result<Self> {
        let field = instance.field;
        let plan = make_partition_plan(&instance.leader, &instance.clients)?;
        let shape = plan.shape(field, instance.universe)?;
        let k = instance.universe.size() as usize;
        let zero = vec![vec![field.zero(); k]; shape.kappa()];
        let queries = build_queries(&plan, field, instance.universe, zero)?;
        let decoder = Decoder::new(&plan, &queries)?;
        let slots = queries
            .queries
            .iter()
            .map(|q| Slot {
                client: shape.client_index(q.dest.party).expect("query to a client"),
                dest: q.dest,
                partition: q.partition as usize - 1,
                target: q.target,
                rank: q.target.and_then(|e| plan.rank_of_element(e)).map(|r| r - 1),
            })
            .collect();
        let incidence = instance
            .clients
            .iter()
            .map(|c| Ok(to_incidence(c, &instance.universe)?.bits().iter().map(|&b| b as u64).collect()))
            .collect::<Result<_>>()?;
        Ok(Self {
            field,
            rand: RandLayout::new(&shape),
            shape,
            plan,
            decoder,
            slots,
            incidence,
            universe_size: k,
        })
    }

    /// Number of base-vector digits.
    pub fn h_len(&self) -> usize {
        self.shape.kappa() * self.universe_size
    }

    /// `⟨X_i, q⟩` for every slot; `h` is `κ` vectors laid end to end.
    pub fn inner_products(&self, h: &[u64], mutation: Mutation, out: &mut Vec<u64>) {
        let f = self.field;
        let k = self.universe_size;
        out.clear();
        for s in &self.slots {
            let x = &self.incidence[s.client];
            let mut acc = 0;
            if mutation != Mutation::ZeroQueryMask {
                let base = &h[s.partition * k..(s.partition + 1) * k];
                for (a, b) in x.iter().zip(base) {
                    acc += a * b;
                }
                acc %= f.modulus();
            }
            if let Some(e) = s.target {
                acc = f.add_raw(acc, x[e as usize - 1]);
            }
            out.push(acc);
        }
    }

    /// The query vector of `slot` as the database sees it.
    pub fn query_vector(&self, slot: usize, h: &[u64], mutation: Mutation) -> Vec<u64> {
        let s = &self.slots[slot];
        let k = self.universe_size;
        let mut v = if mutation == Mutation::ZeroQueryMask {
            vec![0; k]
        } else {
            h[s.partition * k..(s.partition + 1) * k].to_vec()
        };
        if let Some(e) = s.target {
            v[e as usize - 1] = self.field.add_raw(v[e as usize - 1], 1);
        }
        v
    }

    pub fn local(&self, d: &[u64], client: usize, partition: usize, mutation: Mutation) -> u64 {
        if mutation == Mutation::ZeroLocal {
            0
        } else {
            d[self.rand.s_off[client] + partition]
        }
    }

    pub fn global(&self, d: &[u64], mutation: Mutation) -> u64 {
        if mutation == Mutation::DisableGlobal {
            1
        } else {
            d[self.rand.c_pos] + 1
        }
    }

    /// `t̃_{i,k}` for every client and rank.
    pub fn individual(&self, d: &[u64], mutation: Mutation, out: &mut Vec<u64>) {
        let f = self.field;
        let r = &self.rand;
        out.clear();
        out.resize(self.shape.num_clients() * r.ranks, 0);
        if mutation == Mutation::ZeroIndividual {
            return;
        }
        let target = if mutation == Mutation::BreakCorrelation {
            f.add_raw(r.target, 1)
        } else {
            r.target
        };
        for k in 0..r.ranks {
            let mut acc = target;
            for i in 0..r.correlating {
                let v = d[r.free_off + i * r.ranks + k];
                out[i * r.ranks + k] = v;
                acc = f.sub_raw(acc, v);
            }
            out[r.correlating * r.ranks + k] = acc;
        }
    }

    /// `t_{i,j}(ℓ)` of a slot given [`individual`](Self::individual).
    pub fn slot_individual(&self, slot: usize, t: &[u64]) -> u64 {
        let s = &self.slots[slot];
        s.rank.map_or(0, |k| t[s.client * self.rand.ranks + k])
    }

    /// Every answer, in query order.
    pub fn answers(&self, ip: &[u64], d: &[u64], mutation: Mutation, t: &mut Vec<u64>, out: &mut Vec<u64>) {
        let f = self.field;
        self.individual(d, mutation, t);
        let c = self.global(d, mutation);
        out.clear();
        for (i, s) in self.slots.iter().enumerate() {
            let sv = self.local(d, s.client, s.partition, mutation);
            out.push(mask_raw(f, ip[i], sv, self.slot_individual(i, t), c));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leader::draw_base_vectors;
    use crate::orchestrator::{demo_config, run_in_memory, Message, Prepared};
    use crate::randomness::RandomDraws;

    #[test]
    fn evaluator_matches_the_protocol() {
        for name in ["sec4", "sec7_1", "sec7_2"] {
            for seed in 0..10 {
                let mut cfg = demo_config(name).unwrap();
                cfg.seed = seed;
                let inst = Instance::from_config(&cfg).unwrap();
                let layout = Layout::new(&inst).unwrap();
                let prep = Prepared::new(&cfg).unwrap();
                let t = run_in_memory(&prep).unwrap();

                let draws = RandomDraws::seeded(&layout.shape, seed);
                let mut d: Vec<u64> = draws.local.concat();
                d.extend(draws.free.concat());
                d.push(draws.global - 1);
                let h: Vec<u64> = draw_base_vectors(&layout.shape, seed)
                    .concat()
                    .iter()
                    .map(|v| v.value())
                    .collect();
                let (mut ip, mut tv, mut ans) = (Vec::new(), Vec::new(), Vec::new());
                layout.inner_products(&h, Mutation::None, &mut ip);
                layout.answers(&ip, &d, Mutation::None, &mut tv, &mut ans);

                let wire: Vec<(Endpoint, u32, u64)> = t
                    .messages
                    .iter()
                    .filter_map(|m| match &m.message {
                        Message::Answer(a) => Some((a.origin, a.partition, a.value.value())),
                        _ => None,
                    })
                    .collect();
                let ours: Vec<(Endpoint, u32, u64)> = layout
                    .slots
                    .iter()
                    .zip(&ans)
                    .map(|(s, &a)| (s.dest, s.partition as u32 + 1, a))
                    .collect();
                assert_eq!(wire, ours, "{name} seed {seed}");
                let decoded = layout.decoder.decode_values(&ans);
                assert_eq!(decoded, t.result);
            }
        }
    }
}
