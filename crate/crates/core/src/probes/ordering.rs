//! Block ordering: where `c` enters relative to the block results.
//!
//! Each vector places `c`, `t1` (position 1) and `t2` (position `N + 1`),
//! drawn from `{2^j, -2^j, 2^(j-p-3)}`. Outputs are predicted for every
//! ordering, pair of roundings and treatment of sub-grid bits inside a
//! block; only output tuples that a single ordering can produce become rows.

use std::collections::HashMap;

use super::{ClassifierRow, Probe, ProbeError, ProbeKind, ProbeVector, RoundingVerdict, VerdictValue};
use crate::formats::{round_to_format, Dyadic, FpFormat};
use crate::simulator::BlockOrdering;

/// Operands of one ordering vector by role.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Roles {
    c: Dyadic,
    t1: Dyadic,
    t2: Dyadic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Hypothesis {
    ordering: BlockOrdering,
    intra: RoundingVerdict,
    inter: RoundingVerdict,
    /// Whether a block drops a smaller addend's bits below the unit of the
    /// larger one before rounding.
    drop: bool,
}

/// Predicts outputs of ordering vectors and builds their classifier rows.
#[derive(Debug, Clone)]
pub struct OrderingClassifier {
    fout: FpFormat,
    roles: Vec<Roles>,
}

impl OrderingClassifier {
    fn round(&self, x: &Dyadic, rm: RoundingVerdict) -> Dyadic {
        round_to_format(x, &self.fout, rm.mode())
            .0
            .as_dyadic()
            .expect("ordering values stay finite")
    }

    fn block(&self, x: &Dyadic, y: &Dyadic, h: &Hypothesis) -> Dyadic {
        let (big, small) = if x.abs() >= y.abs() { (x, y) } else { (y, x) };
        let small = match (h.drop, big.lead_exponent(), small.lead_exponent()) {
            (true, Some(lead), Some(_)) => {
                let q = lead - (self.fout.precision as i64 - 1);
                // Role values are signed powers of two: a sub-grid addend
                // vanishes entirely.
                if small.exponent() < q {
                    Dyadic::zero()
                } else {
                    small.clone()
                }
            }
            _ => small.clone(),
        };
        self.round(&(big + &small), h.intra)
    }

    fn predict(&self, r: &Roles, h: &Hypothesis) -> Dyadic {
        let add = |x: &Dyadic, y: &Dyadic| self.round(&(x + y), h.inter);
        match h.ordering {
            BlockOrdering::CFirst => add(&self.block(&r.c, &r.t1, h), &r.t2),
            BlockOrdering::TreeThenC => add(&r.c, &add(&r.t1, &r.t2)),
            BlockOrdering::CWithLast => add(&self.block(&r.c, &r.t2, h), &r.t1),
        }
    }

    fn hypotheses() -> Vec<Hypothesis> {
        let mut out = Vec::new();
        for ordering in BlockOrdering::ALL {
            for intra in RoundingVerdict::ALL {
                for inter in RoundingVerdict::ALL {
                    for drop in [false, true] {
                        out.push(Hypothesis {
                            ordering,
                            intra,
                            inter,
                            drop,
                        });
                    }
                }
            }
        }
        out
    }

    /// Output tuples produced by exactly one ordering.
    pub fn rows(&self) -> Vec<ClassifierRow> {
        let mut seen: HashMap<Vec<Dyadic>, Option<BlockOrdering>> = HashMap::new();
        let mut order = Vec::new();
        for h in Self::hypotheses() {
            let tuple: Vec<Dyadic> = self.roles.iter().map(|r| self.predict(r, &h)).collect();
            match seen.get_mut(&tuple) {
                Some(slot) => {
                    if *slot != Some(h.ordering) {
                        *slot = None;
                    }
                }
                None => {
                    seen.insert(tuple.clone(), Some(h.ordering));
                    order.push(tuple);
                }
            }
        }
        order
            .into_iter()
            .filter_map(|t| {
                let o = seen[&t]?;
                Some(ClassifierRow::new(
                    t.into_iter().map(Some).collect(),
                    VerdictValue::Ordering(o),
                ))
            })
            .collect()
    }
}

fn build(
    fin: &FpFormat,
    fout: &FpFormat,
    n_fma: usize,
    label: &str,
    roles: Vec<Roles>,
) -> Result<Probe, ProbeError> {
    if n_fma == 0 {
        return Err(ProbeError::Precondition("FMA width must be known".into()));
    }
    let k = n_fma + 1;
    let mut vectors = Vec::new();
    for (i, r) in roles.iter().enumerate() {
        let mut prods = vec![Dyadic::zero(); k];
        prods[0] = r.t1.clone();
        prods[n_fma] = r.t2.clone();
        vectors.push(ProbeVector::from_products(
            format!("{label} N={n_fma} #{i}"),
            r.c.clone(),
            &prods,
            fin,
        )?);
    }
    let cls = OrderingClassifier {
        fout: fout.clone(),
        roles,
    };
    Ok(Probe {
        kind: ProbeKind::Ordering,
        label: format!("{label} N={n_fma}"),
        vectors,
        rows: cls.rows(),
    })
}

fn values(fout: &FpFormat, j: i64) -> [Dyadic; 3] {
    let p = fout.precision as i64;
    [Dyadic::pow2(j), -Dyadic::pow2(j), Dyadic::pow2(j - p - 3)]
}

fn with_negations(roles: Vec<Roles>) -> Vec<Roles> {
    let neg: Vec<Roles> = roles
        .iter()
        .map(|r| Roles {
            c: -&r.c,
            t1: -&r.t1,
            t2: -&r.t2,
        })
        .collect();
    roles.into_iter().chain(neg).collect()
}

/// `c = 2^j`, `t1 = -2^j`, `t2 = 2^(j-p-3)` and its negation.
pub fn ordering_primary(
    fin: &FpFormat,
    fout: &FpFormat,
    n_fma: usize,
    j: i64,
) -> Result<Probe, ProbeError> {
    let [c, t1, t2] = values(fout, j);
    build(fin, fout, n_fma, "ordering", with_negations(vec![Roles { c, t1, t2 }]))
}

/// Every assignment of the three values to the roles, both polarities.
pub fn ordering_permutations(
    fin: &FpFormat,
    fout: &FpFormat,
    n_fma: usize,
    j: i64,
) -> Result<Probe, ProbeError> {
    let v = values(fout, j);
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let roles = perms
        .iter()
        .map(|[a, b, c]| Roles {
            c: v[*a].clone(),
            t1: v[*b].clone(),
            t2: v[*c].clone(),
        })
        .collect();
    build(fin, fout, n_fma, "ordering permutations", with_negations(roles))
}
