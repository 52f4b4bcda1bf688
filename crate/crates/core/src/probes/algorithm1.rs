//! Search for the FMA width and the carry bits it implies.

use super::{Evidence, ProbeVector};
use crate::backend::{BackendError, Observation, Session};
use crate::formats::{Dyadic, FpFormat, Value};
use crate::simulator::carry_bits_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthResult {
    Exact(usize),
    /// No mismatch up to the largest `k` tried.
    AtLeast(usize),
}

/// Vectors issued for one candidate `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Algorithm1Iteration {
    pub k: usize,
    /// Positive and negative polarity of the width test.
    pub test_a: [ProbeVector; 2],
    /// Extra width tests, kept only when a single block returns them exactly.
    pub boundary: Vec<ProbeVector>,
    /// Carry test, when its exact result is representable.
    pub test_b: Option<ProbeVector>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Algorithm1Outcome {
    pub fma_width: WidthResult,
    /// Carry bits confirmed by the largest passing carry test.
    pub n_ecb: Option<u32>,
    pub evidence: Vec<Evidence>,
    pub notes: Vec<String>,
}

fn p2(e: i64) -> Dyadic {
    Dyadic::pow2(e)
}

fn place(k: usize, at: &[(usize, Dyadic)]) -> Vec<Dyadic> {
    let mut r = vec![Dyadic::zero(); k];
    for (i, x) in at {
        r[*i] = x.clone();
    }
    r
}

fn both(v: ProbeVector) -> [ProbeVector; 2] {
    let n = v.negated();
    [v, n]
}

/// `c = -1`, `r1 = 2 - 2e^2` and `r2 = 2e^2 (1 + x)(1 + y)` with `xy` one
/// unit of `fout`: `r1 + r2` crosses 2 and drops that unit when the two
/// products are summed before `c` is added.
fn tree_vector(fin: &FpFormat, fout: &FpFormat) -> Option<ProbeVector> {
    let (pi, po) = (fin.precision as i64, fout.precision as i64);
    let d = po - 2 * pi;
    if d < 0 {
        return None;
    }
    let e = p2(1 - pi);
    let one = Dyadic::one();
    let a1 = &one + &e;
    let b1 = (&one - &e).scale(1);
    let s = d + 2;
    let (s1, s2) = (s - s / 2, s / 2);
    let h = 3 - 2 * pi;
    let ha = h.div_euclid(2);
    let a2 = (&one + &p2(-s1)).scale(ha);
    let b2 = (&one + &p2(-s2)).scale(h - ha);
    if ![&a1, &b1, &a2, &b2].iter().all(|x| fin.represents(x)) {
        return None;
    }
    Some(ProbeVector {
        label: "algorithm1 k=2 tree".into(),
        c: -&one,
        a: vec![a1, a2],
        b: vec![b1, b2],
    })
}

/// Vectors for candidate width `k - 1` against `k` addends.
pub fn algorithm1_iteration(
    fin: &FpFormat,
    fout: &FpFormat,
    k: usize,
) -> Result<Algorithm1Iteration, super::ProbeError> {
    if k < 2 {
        return Err(super::ProbeError::Precondition(format!("k = {k} must be at least 2")));
    }
    let p = fout.precision as i64;
    let u = p2(1 - p);
    let e = p2(1 - fin.precision as i64);
    let one = Dyadic::one();
    let two = Dyadic::from_i64(2);
    let last = k - 1;
    let test_a = ProbeVector::from_products(
        format!("algorithm1 k={k} A"),
        &one + &u,
        &place(k, &[(0, one.clone()), (last, u.clone())]),
        fin,
    )?;
    let mut candidates = Vec::new();
    if k == 2 {
        let r1 = &one + &e;
        let r2 = -(&one - &e.scale(-1));
        let c = &one - &(&u.scale(1) + &u);
        candidates.push(ProbeVector::from_products(
            "algorithm1 k=2 S1",
            c.clone(),
            &[r1.clone(), r2.clone()],
            fin,
        ));
        candidates.push(ProbeVector::from_products("algorithm1 k=2 S2", c, &[r2, r1], fin));
        if let Some(v) = tree_vector(fin, fout) {
            candidates.push(Ok(v));
        }
    } else {
        let below_two = &two - &e;
        candidates.push(ProbeVector::from_products(
            format!("algorithm1 k={k} V1"),
            &one - &(&u.scale(1) + &u),
            &place(k, &[(0, -&below_two), (1, -&below_two), (last, below_two.clone())]),
            fin,
        ));
        candidates.push(ProbeVector::from_products(
            format!("algorithm1 k={k} V2"),
            &one - &u,
            &place(
                k,
                &[(0, -(&one + &e)), (1, -&below_two), (last, &u.scale(1) + &u)],
            ),
            fin,
        ));
    }
    let boundary = candidates
        .into_iter()
        .filter_map(Result::ok)
        .filter(|v| v.exact_on_plain_grid(fin, fout))
        .flat_map(both)
        .collect();
    let levels = usize::BITS - (k - 1).leading_zeros();
    let extra: Vec<i64> = (1..=levels as i64).map(|i| -p + i).collect();
    let below_two = &two - &e;
    let mut r = vec![below_two.clone(); k - 1];
    r.push(u);
    let test_b = ProbeVector::from_products(
        format!("algorithm1 k={k} B"),
        &below_two + &Dyadic::sum_of_pow2(&extra),
        &r,
        fin,
    )
    .ok()
    .filter(|v| v.encodable(fin, fout) && fout.represents(&v.exact()));
    Ok(Algorithm1Iteration {
        k,
        test_a: both(test_a),
        boundary,
        test_b,
    })
}

fn observe(
    session: &mut Session,
    fin: &FpFormat,
    fout: &FpFormat,
    v: &ProbeVector,
    evidence: &mut Vec<Evidence>,
) -> Result<Observation, BackendError> {
    let obs = session.run(fin, fout, v)?;
    evidence.push(Evidence::new(v, fin, fout, &obs));
    Ok(obs)
}

/// Grow `k` from 2 until some width test disagrees with the exact sum.
pub fn run_algorithm1(
    session: &mut Session,
    fin: &FpFormat,
    fout: &FpFormat,
    k_max: usize,
) -> Result<Algorithm1Outcome, BackendError> {
    let limit = k_max.min(session.info().kmax);
    let mut out = Algorithm1Outcome {
        fma_width: WidthResult::AtLeast(1),
        n_ecb: None,
        evidence: Vec::new(),
        notes: Vec::new(),
    };
    for k in 2..=limit {
        let it = match algorithm1_iteration(fin, fout, k) {
            Ok(it) => it,
            Err(e) => {
                out.notes.push(format!("k = {k}: {e}"));
                return Ok(out);
            }
        };
        let mut mismatch = None;
        for v in &it.test_a {
            let obs = observe(session, fin, fout, v, &mut out.evidence)?;
            let same = matches!(&obs.value, Value::Num(d) if d.abs() == v.exact().abs())
                || (obs.value.is_zero() && v.exact().is_zero());
            if !same {
                mismatch = Some(v.label.clone());
                break;
            }
        }
        if mismatch.is_none() {
            for v in &it.boundary {
                let obs = observe(session, fin, fout, v, &mut out.evidence)?;
                if obs.value.as_dyadic() != Some(v.exact()) {
                    mismatch = Some(v.label.clone());
                    break;
                }
            }
        }
        if let Some(label) = mismatch {
            out.fma_width = WidthResult::Exact(k - 1);
            out.notes.push(format!("mismatch on {label}"));
            if k == 2 {
                out.n_ecb = Some(0);
            }
            return Ok(out);
        }
        out.fma_width = WidthResult::AtLeast(k);
        if let Some(v) = &it.test_b {
            match session.run(fin, fout, v) {
                Ok(obs) => {
                    out.evidence.push(Evidence::new(v, fin, fout, &obs));
                    if obs.value.as_dyadic() == Some(v.exact()) {
                        out.n_ecb = Some(carry_bits_for(k, fin.precision));
                    }
                }
                Err(e @ (BackendError::Transport(_) | BackendError::Timeout(_))) => return Err(e),
                Err(e) => out.notes.push(format!("carry test k = {k}: {e}")),
            }
        }
    }
    if limit < 2 {
        out.notes.push(format!("kmax = {limit} leaves no width to test"));
    }
    Ok(out)
}
