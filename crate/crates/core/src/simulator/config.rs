use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::formats::RoundingMode;

/// What happens to addend bits shifted past the last retained alignment bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlignmentPolicy {
    TruncateBits,
    #[serde(rename = "RNE")]
    Rne,
    #[serde(rename = "RU")]
    Ru,
    #[serde(rename = "RD")]
    Rd,
}

impl AlignmentPolicy {
    pub(crate) fn as_rounding(self) -> RoundingMode {
        match self {
            AlignmentPolicy::TruncateBits => RoundingMode::TruncateMagnitude,
            AlignmentPolicy::Rne => RoundingMode::Rne,
            AlignmentPolicy::Ru => RoundingMode::Ru,
            AlignmentPolicy::Rd => RoundingMode::Rd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormPolicy {
    Immediate,
    Deferred,
}

/// How block results of one inner product are combined with `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockOrdering {
    /// `((c + T1) + T2) + ...`, with `c` inside the first block.
    CFirst,
    /// `c + ((T1 + T2) + ...)`.
    TreeThenC,
    /// `((c + T_last) + T1) + ...`, with `c` inside the last block.
    CWithLast,
}

impl BlockOrdering {
    pub const ALL: [BlockOrdering; 3] = [
        BlockOrdering::CFirst,
        BlockOrdering::TreeThenC,
        BlockOrdering::CWithLast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlockOrdering::CFirst => "CFirst",
            BlockOrdering::TreeThenC => "TreeThenC",
            BlockOrdering::CWithLast => "CWithLast",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CarryOverflow {
    Wrap,
    Saturate,
    Error,
}

/// Parameters of a simulated block-FMA unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockFmaConfig {
    /// Products accumulated per block before normalisation.
    pub fma_width: usize,
    /// Fraction bits kept below the accumulator precision during alignment.
    pub n_eab: u32,
    /// Integer headroom bits for carries.
    pub n_ecb: u32,
    pub alignment_policy: AlignmentPolicy,
    pub norm_policy: NormPolicy,
    pub rm_intra: RoundingMode,
    pub rm_inter: RoundingMode,
    pub ordering: BlockOrdering,
    pub blocks_per_tile: usize,
    pub carry_overflow: CarryOverflow,
    pub subnormal_in: bool,
    pub subnormal_out: bool,
    /// Accumulator significand width; defaults to the output precision.
    /// Set it wider (24) to model binary32 accumulation with binary16 output.
    pub acc_precision: Option<u32>,
}

impl Default for BlockFmaConfig {
    fn default() -> Self {
        BlockFmaConfig {
            fma_width: 8,
            n_eab: 0,
            n_ecb: 3,
            alignment_policy: AlignmentPolicy::TruncateBits,
            norm_policy: NormPolicy::Deferred,
            rm_intra: RoundingMode::TruncateMagnitude,
            rm_inter: RoundingMode::TruncateMagnitude,
            ordering: BlockOrdering::CFirst,
            blocks_per_tile: 2,
            carry_overflow: CarryOverflow::Wrap,
            subnormal_in: true,
            subnormal_out: true,
            acc_precision: None,
        }
    }
}

/// `floor(log2(k * (2 - 2^(1 - p_in))))`: carries produced by `k` addends
/// each just below 2, the largest carry count observable with `k` terms.
pub fn carry_bits_for(k: usize, p_in: u32) -> u32 {
    use crate::formats::Dyadic;
    if k == 0 {
        return 0;
    }
    let below_two = Dyadic::from_i64(2) - Dyadic::pow2(1 - p_in as i64);
    let v = &Dyadic::from_i64(k as i64) * &below_two;
    v.lead_exponent().unwrap_or(0).max(0) as u32
}

impl BlockFmaConfig {
    /// Largest shared dimension the unit accepts in one tile.
    pub fn max_k(&self) -> usize {
        self.fma_width * self.blocks_per_tile
    }

    /// Deferred units need enough carry bits that a full block of maximal
    /// products cannot overflow.
    pub fn is_hardware_consistent(&self, p_in: u32) -> bool {
        self.fma_width >= 1
            && self.blocks_per_tile >= 1
            && (self.norm_policy == NormPolicy::Immediate
                || self.n_ecb >= carry_bits_for(self.fma_width, p_in))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.fma_width == 0 || self.blocks_per_tile == 0 {
            return Err(SimError::Config(
                "fma_width and blocks_per_tile must be at least 1".into(),
            ));
        }
        if matches!(self.acc_precision, Some(p) if p < 2) {
            return Err(SimError::Config("acc_precision must be at least 2".into()));
        }
        Ok(())
    }

    /// Flat `key = value` text, one field per line, keys named as the fields.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "fma_width = {}", self.fma_width);
        let _ = writeln!(s, "n_eab = {}", self.n_eab);
        let _ = writeln!(s, "n_ecb = {}", self.n_ecb);
        let _ = writeln!(s, "alignment_policy = {}", enum_name(&self.alignment_policy));
        let _ = writeln!(s, "norm_policy = {}", enum_name(&self.norm_policy));
        let _ = writeln!(s, "rm_intra = {}", self.rm_intra);
        let _ = writeln!(s, "rm_inter = {}", self.rm_inter);
        let _ = writeln!(s, "ordering = {}", self.ordering.name());
        let _ = writeln!(s, "blocks_per_tile = {}", self.blocks_per_tile);
        let _ = writeln!(s, "carry_overflow = {}", enum_name(&self.carry_overflow));
        let _ = writeln!(s, "subnormal_in = {}", self.subnormal_in);
        let _ = writeln!(s, "subnormal_out = {}", self.subnormal_out);
        if let Some(p) = self.acc_precision {
            let _ = writeln!(s, "acc_precision = {p}");
        }
        s
    }

    /// Parse the `key = value` text. Blank lines and `#` comments are
    /// skipped; keys not given keep their defaults.
    pub fn from_text(text: &str) -> Result<Self, SimError> {
        let mut cfg = BlockFmaConfig::default();
        let mut seen = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| SimError::Config(format!("line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(bad(format!("duplicate key `{key}`")));
            }
            seen.push(key);
            match key {
                "fma_width" => cfg.fma_width = parse_num(value).map_err(bad)?,
                "n_eab" => cfg.n_eab = parse_num(value).map_err(bad)?,
                "n_ecb" => cfg.n_ecb = parse_num(value).map_err(bad)?,
                "blocks_per_tile" => cfg.blocks_per_tile = parse_num(value).map_err(bad)?,
                "acc_precision" => cfg.acc_precision = Some(parse_num(value).map_err(bad)?),
                "alignment_policy" => cfg.alignment_policy = parse_enum(value).map_err(bad)?,
                "norm_policy" => cfg.norm_policy = parse_enum(value).map_err(bad)?,
                "carry_overflow" => cfg.carry_overflow = parse_enum(value).map_err(bad)?,
                "ordering" => cfg.ordering = parse_enum(value).map_err(bad)?,
                "rm_intra" => cfg.rm_intra = value.parse().map_err(bad)?,
                "rm_inter" => cfg.rm_inter = value.parse().map_err(bad)?,
                "subnormal_in" => cfg.subnormal_in = parse_num(value).map_err(bad)?,
                "subnormal_out" => cfg.subnormal_out = parse_num(value).map_err(bad)?,
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for BlockFmaConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N_FMA={} n_eab={} n_ecb={} align={} norm={} rm_intra={} rm_inter={} order={}",
            self.fma_width,
            self.n_eab,
            self.n_ecb,
            enum_name(&self.alignment_policy),
            enum_name(&self.norm_policy),
            self.rm_intra,
            self.rm_inter,
            self.ordering.name()
        )
    }
}

fn parse_num<T: FromStr>(value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}`"))
}

fn parse_enum<T: serde::de::DeserializeOwned>(value: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| format!("unknown value `{value}`"))
}

fn enum_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => unreachable!("unit enum serialises to a string"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn carry_bound_spot_values() {
        assert_eq!(carry_bits_for(8, 11), 3);
        assert_eq!(carry_bits_for(8, 8), 3);
        assert_eq!(carry_bits_for(4, 11), 2);
        assert_eq!(carry_bits_for(1, 11), 0);
        assert_eq!(carry_bits_for(2, 11), 1);
        assert_eq!(carry_bits_for(16, 11), 4);
    }

    #[test]
    fn text_round_trip() {
        let cfg = BlockFmaConfig {
            fma_width: 4,
            n_eab: 2,
            alignment_policy: AlignmentPolicy::Rne,
            norm_policy: NormPolicy::Immediate,
            rm_intra: RoundingMode::Ru,
            ordering: BlockOrdering::CWithLast,
            carry_overflow: CarryOverflow::Saturate,
            acc_precision: Some(24),
            ..Default::default()
        };
        assert_eq!(BlockFmaConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn text_errors() {
        assert!(BlockFmaConfig::from_text("fma_width = x").is_err());
        assert!(BlockFmaConfig::from_text("colour = red").is_err());
        assert!(BlockFmaConfig::from_text("n_eab = 1\nn_eab = 2").is_err());
        assert!(BlockFmaConfig::from_text("fma_width = 0").is_err());
        assert!(BlockFmaConfig::from_text("ordering").is_err());
        let cfg = BlockFmaConfig::from_text("# preset\n\nrm_intra = RNE # final\n").unwrap();
        assert_eq!(cfg.rm_intra, RoundingMode::Rne);
    }
}
