use super::{ClassifierRow, Probe, ProbeError, ProbeKind, ProbeVector, RoundingVerdict, VerdictValue};
use crate::formats::{Dyadic, FpFormat};

fn p2(e: i64) -> Dyadic {
    Dyadic::pow2(e)
}

/// `2^(1 - p_out)`: one unit in the last place of values in `[1, 2)`.
fn ulp_one(fout: &FpFormat) -> Dyadic {
    p2(1 - fout.precision as i64)
}

fn row(expect: Vec<Dyadic>, verdict: VerdictValue) -> ClassifierRow {
    ClassifierRow::new(expect.into_iter().map(Some).collect(), verdict)
}

fn rounding(r: RoundingVerdict) -> VerdictValue {
    VerdictValue::Rounding(r)
}

/// Rows for a positive/negative pair whose exact result lies strictly
/// between `lo` and `hi` in magnitude.
fn rounding_pair_rows(lo: &Dyadic, hi: &Dyadic, ties_up: bool) -> Vec<ClassifierRow> {
    let nearest = if ties_up { hi } else { lo };
    vec![
        row(vec![lo.clone(), -lo], rounding(RoundingVerdict::Truncate)),
        row(vec![nearest.clone(), -nearest], rounding(RoundingVerdict::Rne)),
        row(vec![hi.clone(), -lo], rounding(RoundingVerdict::Ru)),
        row(vec![lo.clone(), -hi], rounding(RoundingVerdict::Rd)),
    ]
}

/// Smallest positive input times a power of two that lifts the product into
/// the normal range of `fout`.
pub fn subnormal_input(fin: &FpFormat, fout: &FpFormat) -> Result<Probe, ProbeError> {
    if !fin.subnormals {
        return Err(ProbeError::Precondition(format!("{fin} has no subnormals")));
    }
    let a = fin.min_positive();
    let lead = a.lead_exponent().expect("nonzero");
    let lift = (fout.emin() - lead).max(0);
    if lift > fin.emax() {
        return Err(ProbeError::Precondition(format!(
            "no {fin} power of two lifts {a} into the {fout} normal range"
        )));
    }
    let b = p2(lift);
    let expect = &a * &b;
    let v = ProbeVector {
        label: "subnormal_in".into(),
        c: Dyadic::zero(),
        a: vec![a],
        b: vec![b],
    };
    Ok(Probe {
        kind: ProbeKind::SubnormalIn,
        label: "subnormal_in".into(),
        vectors: vec![v],
        rows: vec![
            row(vec![expect], VerdictValue::Bool(true)),
            row(vec![Dyadic::zero()], VerdictValue::Bool(false)),
        ],
    })
}

/// An exact result three binades below the smallest normal of `fout`,
/// produced by a product when `fin` reaches it, else carried in by `c`.
pub fn subnormal_output(fin: &FpFormat, fout: &FpFormat) -> Result<Probe, ProbeError> {
    let target = fout.min_normal().scale(-3);
    if !fout.subnormals || !fout.represents(&target) {
        return Err(ProbeError::Precondition(format!(
            "{fout} cannot hold {target}"
        )));
    }
    let v = match super::factor_into_operands(&target, fin) {
        Ok((a, b)) => ProbeVector {
            label: "subnormal_out product".into(),
            c: Dyadic::zero(),
            a: vec![a],
            b: vec![b],
        },
        Err(_) => ProbeVector {
            label: "subnormal_out addend".into(),
            c: target.clone(),
            a: vec![Dyadic::zero()],
            b: vec![Dyadic::zero()],
        },
    };
    Ok(Probe {
        kind: ProbeKind::SubnormalOut,
        label: "subnormal_out".into(),
        vectors: vec![v],
        rows: vec![
            row(vec![target], VerdictValue::Bool(true)),
            row(vec![Dyadic::zero()], VerdictValue::Bool(false)),
        ],
    })
}

/// `c = 2^j`, `r1 = r2 = 2^j (2^(-p-n) + 2^(-p-n-1))`, both polarities.
/// Detects how bits shifted past the extra alignment bits are treated.
pub fn post_alignment_rounding(
    fin: &FpFormat,
    fout: &FpFormat,
    n_eab: u32,
    j: i64,
) -> Result<Probe, ProbeError> {
    if n_eab > 1 {
        return Err(ProbeError::Precondition(format!(
            "needs at most one extra alignment bit, have {n_eab}"
        )));
    }
    let p = fout.precision as i64;
    let n = n_eab as i64;
    let c = p2(j);
    let r = Dyadic::sum_of_pow2(&[-p + j - n, -p + j - n - 1]);
    let v = ProbeVector::from_products(
        format!("post_alignment n_eab={n_eab} j={j}"),
        c.clone(),
        &[r.clone(), r],
        fin,
    )?;
    let hi = &c + &p2(-p + j + 2 - n);
    Ok(Probe {
        kind: ProbeKind::PostAlignmentRounding,
        label: v.label.clone(),
        vectors: vec![v.clone(), v.negated()],
        rows: rounding_pair_rows(&c, &hi, true),
    })
}

/// `c = 2^j + 2^(-p+j+1) + 2^(-p+j+2)`, `r1..3 = 2^j`, both polarities.
/// The low bits of `c` decide the single block rounding.
pub fn rm_bfma(fin: &FpFormat, fout: &FpFormat, j: i64) -> Result<Probe, ProbeError> {
    let p = fout.precision as i64;
    let c = Dyadic::sum_of_pow2(&[j, -p + j + 1, -p + j + 2]);
    let v = ProbeVector::from_products(format!("rm_bfma j={j}"), c, &[p2(j), p2(j), p2(j)], fin)?;
    let lo = p2(j + 2);
    let hi = &lo + &p2(-p + j + 3);
    Ok(Probe {
        kind: ProbeKind::RmBfma,
        label: v.label.clone(),
        vectors: vec![v.clone(), v.negated()],
        rows: rounding_pair_rows(&lo, &hi, true),
    })
}

/// Whether at least `n` extra alignment bits are present.
///
/// The vector sums to exactly one unit of `c` when every bit is kept. The
/// variant depends on the block rounding, since dropped bits leave a
/// fraction of a unit that directed or nearest rounding may restore.
pub fn alignment_bits(
    fin: &FpFormat,
    fout: &FpFormat,
    n: u32,
    j: i64,
    rm: Option<RoundingVerdict>,
) -> Result<Probe, ProbeError> {
    if n == 0 {
        return Err(ProbeError::Precondition("n must be at least 1".into()));
    }
    let p = fout.precision as i64;
    let n = n as i64;
    let u = ulp_one(fout).scale(j);
    let one = p2(j);
    let label = format!("alignment_bits n={n} j={j}");
    let pass = VerdictValue::Bool(true);
    let fail = VerdictValue::Bool(false);
    if rm == Some(RoundingVerdict::Rne) {
        // c = 1 + u, r sums to u/2: a tie that only resolves upward when
        // every bit survives alignment.
        let mut r: Vec<Dyadic> = (1..n).map(|i| u.scale(-i - 1)).collect();
        r.push(u.scale(-n));
        let v = ProbeVector::from_products(format!("{label} tie"), &one + &u, &r, fin)?;
        let u2 = u.scale(1);
        return Ok(Probe {
            kind: ProbeKind::AlignmentBits,
            label,
            vectors: vec![v],
            rows: vec![row(vec![&one + &u2], pass), row(vec![&one + &u], fail)],
        });
    }
    let mut r: Vec<Dyadic> = (1..n).map(|i| p2(-p - i + j + 1)).collect();
    r.push(p2(-p + 1 - n + j));
    r.push(p2(-p + 1 - n + j));
    let v = ProbeVector::from_products(label.clone(), one.clone(), &r, fin)?;
    let up = &one + &u;
    let (vectors, rows) = match rm {
        // Negative results are never rounded up in magnitude by RU.
        Some(RoundingVerdict::Ru) => (
            vec![v.negated()],
            vec![row(vec![-&up], pass), row(vec![-&one], fail)],
        ),
        Some(RoundingVerdict::Rd) => (
            vec![v],
            vec![row(vec![up], pass), row(vec![one], fail)],
        ),
        _ => (
            vec![v.clone(), v.negated()],
            vec![
                row(vec![up.clone(), -&up], pass),
                row(vec![one.clone(), -&one], fail),
            ],
        ),
    };
    Ok(Probe {
        kind: ProbeKind::AlignmentBits,
        label,
        vectors,
        rows,
    })
}

/// Case with extra alignment bits but no carry bits: `c = 2 - u`,
/// `r1..3 = u`. `Bool(true)` means immediate normalisation.
pub fn normalisation_deferred_carry(fin: &FpFormat, fout: &FpFormat) -> Result<Probe, ProbeError> {
    let u = ulp_one(fout);
    let two = Dyadic::from_i64(2);
    let v = ProbeVector::from_products(
        "normalisation carry",
        &two - &u,
        &[u.clone(), u.clone(), u.clone()],
        fin,
    )?;
    Ok(Probe {
        kind: ProbeKind::Normalisation,
        label: v.label.clone(),
        vectors: vec![v],
        rows: vec![
            row(vec![two.clone()], VerdictValue::Bool(true)),
            row(vec![&two + &u.scale(1)], VerdictValue::Bool(false)),
        ],
    })
}

/// Case with both extra bit kinds: `c = 1 - 2^(-p+t)`,
/// `r1 = r2 = 2^(-p+t) + 2^(-p)`. `Bool(true)` means immediate.
pub fn normalisation_subtractive(fin: &FpFormat, fout: &FpFormat, t: i64) -> Result<Probe, ProbeError> {
    if t < 3 {
        return Err(ProbeError::Precondition(format!("t = {t} must be at least 3")));
    }
    let p = fout.precision as i64;
    let one = Dyadic::one();
    let r = Dyadic::sum_of_pow2(&[-p + t, -p]);
    let v = ProbeVector::from_products(
        format!("normalisation t={t}"),
        &one - &p2(-p + t),
        &[r.clone(), r],
        fin,
    )?;
    let base = &one + &p2(-p + t);
    Ok(Probe {
        kind: ProbeKind::Normalisation,
        label: v.label.clone(),
        vectors: vec![v],
        rows: vec![
            row(vec![base.clone()], VerdictValue::Bool(true)),
            row(vec![&base + &p2(-p + 2)], VerdictValue::Bool(true)),
            row(vec![&base + &p2(-p + 1)], VerdictValue::Bool(false)),
        ],
    })
}

/// Where the live product of the inter-block rounding probe goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbfmaPlacement {
    /// Position `N + 1`, the first slot of block two (`c` joins block one).
    SecondBlock,
    /// Position 1 (`c` joins the last block).
    FirstBlock,
}

/// Rounding of the addition that combines block results.
///
/// With `ties` the vectors are exact ties built from operands on the
/// alignment grid, for units whose every addition is already a normalised
/// two-operand sum and would drop the sub-unit bits of the plain vector.
pub fn rm_mbfma(
    fin: &FpFormat,
    fout: &FpFormat,
    n_fma: usize,
    placement: MbfmaPlacement,
    ties: bool,
) -> Result<Probe, ProbeError> {
    if n_fma == 0 {
        return Err(ProbeError::Precondition("FMA width must be known".into()));
    }
    let p = fout.precision as i64;
    let u = ulp_one(fout);
    let one = Dyadic::one();
    let k = n_fma + 1;
    let pos = match placement {
        MbfmaPlacement::SecondBlock => n_fma,
        MbfmaPlacement::FirstBlock => 0,
    };
    let build = |label: String, c: Dyadic, r: Dyadic| {
        let mut rs = vec![Dyadic::zero(); k];
        rs[pos] = r;
        ProbeVector::from_products(label, c, &rs, fin)
    };
    if ties {
        // (1 + u) + 1 keeps an even unit below the tie, (1 + 3u) + 1 an odd one.
        let even = build(format!("rm_mbfma ties even N={n_fma} pos={}", pos + 1), &one + &u, one.clone())?;
        let odd = build(
            format!("rm_mbfma ties odd N={n_fma} pos={}", pos + 1),
            &one + &(&u.scale(1) + &u),
            one.clone(),
        )?;
        let two = Dyadic::from_i64(2);
        let e0 = two.clone();
        let e1 = &two + &u.scale(1);
        let e2 = &two + &u.scale(2);
        let rows = vec![
            row(vec![e0.clone(), e1.clone(), -&e0, -&e1], rounding(RoundingVerdict::Truncate)),
            row(vec![e0.clone(), e2.clone(), -&e0, -&e2], rounding(RoundingVerdict::Rne)),
            row(vec![e1.clone(), e2.clone(), -&e0, -&e1], rounding(RoundingVerdict::Ru)),
            row(vec![e0, e1.clone(), -&e1, -&e2], rounding(RoundingVerdict::Rd)),
        ];
        return Ok(Probe {
            kind: ProbeKind::RmMbfma,
            label: format!("rm_mbfma ties N={n_fma}"),
            vectors: vec![even.clone(), odd.clone(), even.negated(), odd.negated()],
            rows,
        });
    }
    let c = &one + &u;
    let r = Dyadic::sum_of_pow2(&[-p, -p - 1]);
    let v = build(format!("rm_mbfma N={n_fma} pos={}", pos + 1), c.clone(), r)?;
    let hi = &one + &u.scale(1);
    Ok(Probe {
        kind: ProbeKind::RmMbfma,
        label: v.label.clone(),
        vectors: vec![v.clone(), v.negated()],
        rows: rounding_pair_rows(&c, &hi, true),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::Value;

    fn fp16() -> FpFormat {
        FpFormat::binary16()
    }
    fn fp32() -> FpFormat {
        FpFormat::binary32()
    }

    fn vals(xs: &[Dyadic]) -> Vec<Value> {
        xs.iter().cloned().map(Value::Num).collect()
    }

    #[test]
    fn every_operand_is_exact() {
        let (fin, fout) = (fp16(), fp32());
        let probes = vec![
            subnormal_input(&fin, &fout).unwrap(),
            subnormal_output(&fin, &fout).unwrap(),
            post_alignment_rounding(&fin, &fout, 1, 0).unwrap(),
            rm_bfma(&fin, &fout, 0).unwrap(),
            alignment_bits(&fin, &fout, 3, 0, None).unwrap(),
            alignment_bits(&fin, &fout, 3, 0, Some(RoundingVerdict::Rne)).unwrap(),
            normalisation_deferred_carry(&fin, &fout).unwrap(),
            normalisation_subtractive(&fin, &fout, 3).unwrap(),
            rm_mbfma(&fin, &fout, 8, MbfmaPlacement::SecondBlock, false).unwrap(),
            rm_mbfma(&fin, &fout, 8, MbfmaPlacement::SecondBlock, true).unwrap(),
        ];
        for p in probes {
            for v in &p.vectors {
                assert!(v.encodable(&fin, &fout), "{v}");
            }
        }
    }

    #[test]
    fn subnormal_vectors() {
        let p = subnormal_input(&fp16(), &fp32()).unwrap();
        assert_eq!(p.vectors[0].a[0], p2(-24));
        assert_eq!(p.vectors[0].b[0], Dyadic::one());
        let p = subnormal_input(&FpFormat::bfloat16(), &fp32()).unwrap();
        assert_eq!(p.vectors[0].b[0], p2(7));
        let p = subnormal_output(&FpFormat::bfloat16(), &fp32()).unwrap();
        assert_eq!(p.vectors[0].exact(), p2(-129));
        assert!(p.vectors[0].c.is_zero());
        let p = subnormal_output(&fp16(), &fp32()).unwrap();
        assert_eq!(p.vectors[0].c, p2(-129));
        assert_eq!(p.classify(&vals(&[p2(-129)])), VerdictValue::Bool(true));
        assert_eq!(p.classify(&[Value::NegZero]), VerdictValue::Bool(false));
    }

    #[test]
    fn post_alignment_rows() {
        let p = post_alignment_rounding(&fp16(), &fp32(), 1, 0).unwrap();
        assert_eq!(p.vectors[0].products()[0], Dyadic::sum_of_pow2(&[-25, -26]));
        let one = Dyadic::one();
        let hi = Dyadic::sum_of_pow2(&[0, -23]);
        let t = |a: &Dyadic, b: Dyadic| p.classify(&vals(&[a.clone(), b]));
        assert_eq!(t(&one, -&one), rounding(RoundingVerdict::Truncate));
        assert_eq!(t(&hi, -&hi), rounding(RoundingVerdict::Rne));
        assert_eq!(t(&hi, -&one), rounding(RoundingVerdict::Ru));
        assert_eq!(t(&one, -&hi), rounding(RoundingVerdict::Rd));
        assert!(post_alignment_rounding(&fp16(), &fp32(), 2, 0).is_err());
    }

    #[test]
    fn rm_bfma_values() {
        let p = rm_bfma(&fp16(), &fp32(), 0).unwrap();
        assert_eq!(p.vectors[0].c, Dyadic::sum_of_pow2(&[0, -23, -22]));
        let four = Dyadic::from_i64(4);
        let rne = &four + &p2(-21);
        assert_eq!(p.classify(&vals(&[rne.clone(), -&rne])), rounding(RoundingVerdict::Rne));
        assert_eq!(p.classify(&vals(&[four.clone(), -&four])), rounding(RoundingVerdict::Truncate));
        let half = rm_bfma(&fp16(), &fp16(), 0).unwrap();
        let rne16 = &four + &p2(-8);
        assert_eq!(half.classify(&vals(&[rne16.clone(), -&rne16])), rounding(RoundingVerdict::Rne));
    }

    #[test]
    fn alignment_vector_shapes() {
        let p = alignment_bits(&fp16(), &fp32(), 1, 0, None).unwrap();
        assert_eq!(p.vectors[0].products(), vec![p2(-24), p2(-24)]);
        let p = alignment_bits(&fp16(), &fp32(), 2, 0, None).unwrap();
        assert_eq!(p.vectors[0].products(), vec![p2(-24), p2(-25), p2(-25)]);
        for n in 1..6 {
            let p = alignment_bits(&fp16(), &fp32(), n, 0, None).unwrap();
            assert_eq!(p.vectors[0].exact(), Dyadic::sum_of_pow2(&[0, -23]));
            let t = alignment_bits(&fp16(), &fp32(), n, 0, Some(RoundingVerdict::Rne)).unwrap();
            assert_eq!(t.vectors[0].exact(), Dyadic::sum_of_pow2(&[0, -23, -24]));
            assert_eq!(t.vectors[0].k(), n as usize);
        }
    }

    #[test]
    fn normalisation_values() {
        let p = normalisation_subtractive(&fp16(), &fp32(), 3).unwrap();
        let deferred = Dyadic::sum_of_pow2(&[0, -21, -23]);
        assert_eq!(p.vectors[0].exact(), deferred);
        assert_eq!(p.classify(&vals(&[deferred])), VerdictValue::Bool(false));
        assert_eq!(
            p.classify(&vals(&[Dyadic::sum_of_pow2(&[0, -21])])),
            VerdictValue::Bool(true)
        );
        let q = normalisation_deferred_carry(&fp16(), &fp32()).unwrap();
        assert_eq!(q.classify(&vals(&[Dyadic::from_i64(2)])), VerdictValue::Bool(true));
    }

    #[test]
    fn mbfma_placement() {
        let p = rm_mbfma(&fp16(), &fp32(), 8, MbfmaPlacement::SecondBlock, false).unwrap();
        let r = p.vectors[0].products();
        assert_eq!(r.len(), 9);
        assert_eq!(r[8], Dyadic::sum_of_pow2(&[-24, -25]));
        assert!(r[..8].iter().all(Dyadic::is_zero));
        let q = rm_mbfma(&fp16(), &fp32(), 8, MbfmaPlacement::FirstBlock, false).unwrap();
        assert!(!q.vectors[0].products()[0].is_zero());
        let hi = Dyadic::sum_of_pow2(&[0, -22]);
        let lo = Dyadic::sum_of_pow2(&[0, -23]);
        assert_eq!(p.classify(&vals(&[lo.clone(), -&lo])), rounding(RoundingVerdict::Truncate));
        assert_eq!(p.classify(&vals(&[hi.clone(), -&hi])), rounding(RoundingVerdict::Rne));
        let half = rm_mbfma(&fp16(), &fp16(), 8, MbfmaPlacement::SecondBlock, false).unwrap();
        let hi16 = Dyadic::sum_of_pow2(&[0, -9]);
        assert_eq!(half.classify(&vals(&[hi16.clone(), -&hi16])), rounding(RoundingVerdict::Rne));
    }
}
