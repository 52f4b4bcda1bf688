//! Bit-exact model of a block FMA unit and of multi-block inner products.
//!
//! A block computes `c + a_1 b_1 + ... + a_k b_k` with exact products, a
//! shared alignment grid, limited carry headroom and either one deferred
//! normalisation or a normalisation after every addition.

mod accumulator;
mod config;

pub use accumulator::Accumulator;
pub use config::{
    carry_bits_for, AlignmentPolicy, BlockFmaConfig, BlockOrdering, CarryOverflow, NormPolicy,
};

use thiserror::Error;

use crate::formats::{round_to_format, Dyadic, FpFormat, RoundingMode, Special, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("format contract violated: {0}")]
    FormatContract(String),
    #[error("operand {value} is not representable in {format}")]
    NotRepresentable { value: String, format: String },
    #[error("accumulator carry overflow")]
    CarryOverflow,
    #[error("k = {k} exceeds the tile bound {max}")]
    SizeContract { k: usize, max: usize },
    #[error("operand lists differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("invalid config: {0}")]
    Config(String),
}

/// Exact `a_l * b_l`. Requires `2 p_in <= p_out`.
pub fn exact_products(
    a: &[Dyadic],
    b: &[Dyadic],
    fin: &FpFormat,
    fout: &FpFormat,
) -> Result<Vec<Dyadic>, SimError> {
    check_contract(fin, fout.precision)?;
    check_lengths(a.len(), b.len())?;
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            require_in(x, fin)?;
            require_in(y, fin)?;
            Ok(x * y)
        })
        .collect()
}

/// `c + sum a_l b_l` without any rounding.
pub fn exact_oracle(c: &Dyadic, a: &[Dyadic], b: &[Dyadic]) -> Dyadic {
    a.iter().zip(b).fold(c.clone(), |acc, (x, y)| &acc + &(x * y))
}

/// One block FMA: `a.len() <= cfg.fma_width`.
pub fn block_fma(
    c: &Value,
    a: &[Value],
    b: &[Value],
    cfg: &BlockFmaConfig,
    fin: &FpFormat,
    fout: &FpFormat,
) -> Result<Value, SimError> {
    cfg.validate()?;
    check_contract(fin, cfg.acc_precision.unwrap_or(fout.precision))?;
    check_lengths(a.len(), b.len())?;
    if a.len() > cfg.fma_width {
        return Err(SimError::SizeContract {
            k: a.len(),
            max: cfg.fma_width,
        });
    }
    let c = output_operand(c, fout)?;
    let products = products(a, b, cfg, fin)?;
    block_of(&c, &products, cfg, fout)
}

/// Inner product of length `k <= fma_width * blocks_per_tile` over one or
/// more blocks, combined according to `cfg.ordering`.
pub fn mma_dot(
    c: &Value,
    a: &[Value],
    b: &[Value],
    cfg: &BlockFmaConfig,
    fin: &FpFormat,
    fout: &FpFormat,
) -> Result<Value, SimError> {
    cfg.validate()?;
    check_contract(fin, cfg.acc_precision.unwrap_or(fout.precision))?;
    check_lengths(a.len(), b.len())?;
    if a.len() > cfg.max_k() {
        return Err(SimError::SizeContract {
            k: a.len(),
            max: cfg.max_k(),
        });
    }
    let c = output_operand(c, fout)?;
    let products = products(a, b, cfg, fin)?;
    if products.len() <= cfg.fma_width {
        return block_of(&c, &products, cfg, fout);
    }
    let blocks: Vec<&[Value]> = products.chunks(cfg.fma_width).collect();
    let zero = Value::zero();
    let combine = |x: &Value, y: &Value| add_rounded(x, y, cfg.rm_inter, cfg, fout);
    match cfg.ordering {
        BlockOrdering::CFirst => {
            let mut acc = block_of(&c, blocks[0], cfg, fout)?;
            for blk in &blocks[1..] {
                let t = block_of(&zero, blk, cfg, fout)?;
                acc = combine(&acc, &t);
            }
            Ok(acc)
        }
        BlockOrdering::TreeThenC => {
            let mut tree = block_of(&zero, blocks[0], cfg, fout)?;
            for blk in &blocks[1..] {
                let t = block_of(&zero, blk, cfg, fout)?;
                tree = combine(&tree, &t);
            }
            Ok(combine(&c, &tree))
        }
        BlockOrdering::CWithLast => {
            let (last, rest) = blocks.split_last().expect("at least two blocks");
            let mut acc = block_of(&c, last, cfg, fout)?;
            for blk in rest {
                let t = block_of(&zero, blk, cfg, fout)?;
                acc = combine(&acc, &t);
            }
            Ok(acc)
        }
    }
}

fn check_contract(fin: &FpFormat, p_acc: u32) -> Result<(), SimError> {
    if 2 * fin.precision > p_acc {
        return Err(SimError::FormatContract(format!(
            "products of {fin} need {} bits, accumulator has {p_acc}",
            2 * fin.precision
        )));
    }
    Ok(())
}

fn check_lengths(a: usize, b: usize) -> Result<(), SimError> {
    if a != b {
        return Err(SimError::LengthMismatch { a, b });
    }
    Ok(())
}

fn require_in(v: &Dyadic, fmt: &FpFormat) -> Result<(), SimError> {
    if fmt.represents(v) {
        Ok(())
    } else {
        Err(SimError::NotRepresentable {
            value: v.to_string(),
            format: fmt.name.clone(),
        })
    }
}

fn output_operand(c: &Value, fout: &FpFormat) -> Result<Value, SimError> {
    if let Value::Num(d) = c {
        require_in(d, fout)?;
    }
    Ok(c.clone())
}

fn products(
    a: &[Value],
    b: &[Value],
    cfg: &BlockFmaConfig,
    fin: &FpFormat,
) -> Result<Vec<Value>, SimError> {
    let input = |v: &Value| -> Result<Value, SimError> {
        match v {
            Value::Num(d) => {
                require_in(d, fin)?;
                if !cfg.subnormal_in && fin.is_subnormal(d) {
                    Ok(Value::signed_zero(d.is_negative()))
                } else {
                    Ok(v.clone())
                }
            }
            other => Ok(other.clone()),
        }
    };
    a.iter()
        .zip(b)
        .map(|(x, y)| Ok(multiply(&input(x)?, &input(y)?)))
        .collect()
}

fn multiply(x: &Value, y: &Value) -> Value {
    let negative = x.is_negative() != y.is_negative();
    match (x, y) {
        (Value::Special(Special::NaN), _) | (_, Value::Special(Special::NaN)) => nan(),
        (Value::Special(_), other) | (other, Value::Special(_)) => {
            if other.is_zero() {
                nan()
            } else {
                infinity(negative)
            }
        }
        _ if x.is_zero() || y.is_zero() => Value::signed_zero(negative),
        (Value::Num(p), Value::Num(q)) => Value::Num(p * q),
        _ => unreachable!("zeros and specials handled above"),
    }
}

fn nan() -> Value {
    Value::Special(Special::NaN)
}

fn infinity(negative: bool) -> Value {
    Value::Special(if negative {
        Special::NegInf
    } else {
        Special::PosInf
    })
}

/// IEEE-like result of summing terms when any is NaN or infinite.
fn special_sum(terms: &[&Value]) -> Option<Value> {
    let (mut pos, mut neg) = (false, false);
    for t in terms {
        match t {
            Value::Special(Special::NaN) => return Some(nan()),
            Value::Special(Special::PosInf) => pos = true,
            Value::Special(Special::NegInf) => neg = true,
            _ => {}
        }
    }
    match (pos, neg) {
        (true, true) => Some(nan()),
        (true, false) => Some(infinity(false)),
        (false, true) => Some(infinity(true)),
        (false, false) => None,
    }
}

/// The sum of exact zeros is `-0` only when every term is `-0`.
fn zero_sum(terms: &[&Value]) -> Value {
    Value::signed_zero(terms.iter().all(|t| t.is_negative()))
}

/// Round an exact sum into `fout`, flushing subnormal results if configured.
fn finish(v: &Dyadic, rm: RoundingMode, cfg: &BlockFmaConfig, fout: &FpFormat) -> Value {
    let (r, _) = round_to_format(v, fout, rm);
    match &r {
        Value::Num(d) if !cfg.subnormal_out && fout.is_subnormal(d) => {
            Value::signed_zero(d.is_negative())
        }
        _ => r,
    }
}

fn block_of(
    c: &Value,
    products: &[Value],
    cfg: &BlockFmaConfig,
    fout: &FpFormat,
) -> Result<Value, SimError> {
    match cfg.norm_policy {
        NormPolicy::Deferred => deferred_block(c, products, cfg, fout),
        NormPolicy::Immediate => Ok(products.iter().fold(c.clone(), |acc, r| {
            aligned_pair(&acc, r, cfg, fout)
        })),
    }
}

fn deferred_block(
    c: &Value,
    products: &[Value],
    cfg: &BlockFmaConfig,
    fout: &FpFormat,
) -> Result<Value, SimError> {
    let terms: Vec<&Value> = std::iter::once(c).chain(products).collect();
    if let Some(s) = special_sum(&terms) {
        return Ok(s);
    }
    let addends: Vec<Dyadic> = terms.iter().filter_map(|t| t.as_dyadic()).collect();
    let Some(mut acc) = Accumulator::for_addends(&addends, fout.precision, cfg.n_eab, cfg.n_ecb)
    else {
        return Ok(zero_sum(&terms));
    };
    for x in &addends {
        acc.add(x, cfg.alignment_policy);
    }
    let sum = acc.finish(cfg.carry_overflow)?;
    if sum.is_zero() {
        return Ok(Value::zero());
    }
    Ok(finish(&sum, cfg.rm_intra, cfg, fout))
}

/// One addition of an immediate-normalising unit: both operands on the
/// alignment grid of the larger, then normalised and rounded under rm_intra.
fn aligned_pair(x: &Value, y: &Value, cfg: &BlockFmaConfig, fout: &FpFormat) -> Value {
    let terms = [x, y];
    if let Some(s) = special_sum(&terms) {
        return s;
    }
    let addends = [x.as_dyadic().unwrap(), y.as_dyadic().unwrap()];
    let Some(mut acc) = Accumulator::for_addends(&addends, fout.precision, cfg.n_eab, 0) else {
        return zero_sum(&terms);
    };
    for a in &addends {
        acc.add(a, cfg.alignment_policy);
    }
    let sum = acc.finish_unbounded();
    if sum.is_zero() {
        return Value::zero();
    }
    finish(&sum, cfg.rm_intra, cfg, fout)
}

/// Standard two-operand addition in `fout`: exact sum, one rounding.
fn add_rounded(
    x: &Value,
    y: &Value,
    rm: RoundingMode,
    cfg: &BlockFmaConfig,
    fout: &FpFormat,
) -> Value {
    let terms = [x, y];
    if let Some(s) = special_sum(&terms) {
        return s;
    }
    if x.is_zero() && y.is_zero() {
        return zero_sum(&terms);
    }
    let sum = x.as_dyadic().unwrap() + y.as_dyadic().unwrap();
    if sum.is_zero() {
        return Value::zero();
    }
    finish(&sum, rm, cfg, fout)
}
