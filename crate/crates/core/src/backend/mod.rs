//! Evaluation backends: "given formats, k and operands, return d".

mod exec;
pub mod protocol;

use std::io::{self, BufRead, Write};
use std::time::Duration;

use thiserror::Error;

pub use exec::ExecBackend;
pub use protocol::{Handshake, MmaReply, MmaRequest, WireError, PROTOCOL_VERSION};

use crate::formats::{decode, encode, encode_exact, parse_hex, to_hex, Dyadic, FpFormat, RoundingMode, Value};
use crate::probes::ProbeVector;
use crate::simulator::{mma_dot, BlockFmaConfig, SimError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no reply within {0:?}")]
    Timeout(Duration),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("device error: {0}")]
    Device(String),
}

impl BackendError {
    /// Wire code used in error replies.
    pub fn code(&self) -> &'static str {
        match self {
            BackendError::Transport(_) => "transport",
            BackendError::Unsupported(_) => "unsupported",
            BackendError::Timeout(_) => "timeout",
            BackendError::Invalid(_) => "invalid",
            BackendError::Device(_) => "device",
        }
    }

    pub fn from_wire(e: &WireError) -> Self {
        let m = e.message.clone();
        match e.code.as_str() {
            "unsupported" => BackendError::Unsupported(m),
            "invalid" => BackendError::Invalid(m),
            "device" => BackendError::Device(m),
            other => BackendError::Transport(format!("{other}: {m}")),
        }
    }

    pub fn to_wire(&self) -> WireError {
        let message = match self {
            BackendError::Transport(m)
            | BackendError::Unsupported(m)
            | BackendError::Invalid(m)
            | BackendError::Device(m) => m.clone(),
            BackendError::Timeout(d) => format!("{d:?}"),
        };
        WireError {
            code: self.code().to_string(),
            message,
        }
    }
}

/// Something that evaluates one inner product `d = c + sum a_l b_l`.
pub trait Backend: Send {
    fn info(&self) -> &Handshake;

    /// Returns the hex encoding of `d` in `req.fout`.
    fn evaluate(&mut self, req: &MmaRequest) -> Result<String, BackendError>;
}

/// In-process backend running the simulator.
#[derive(Debug, Clone)]
pub struct SimBackend {
    cfg: BlockFmaConfig,
    info: Handshake,
}

impl SimBackend {
    pub fn new(cfg: BlockFmaConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let formats = FpFormat::builtin();
        let mut pairs = Vec::new();
        for fin in &formats {
            for fout in &formats {
                let p_acc = cfg.acc_precision.unwrap_or(fout.precision);
                if 2 * fin.precision <= p_acc {
                    pairs.push((fin.name.clone(), fout.name.clone()));
                }
            }
        }
        let info = Handshake {
            proto: PROTOCOL_VERSION,
            pairs,
            kmax: cfg.max_k(),
        };
        Ok(SimBackend { cfg, info })
    }

    pub fn config(&self) -> &BlockFmaConfig {
        &self.cfg
    }
}

impl Backend for SimBackend {
    fn info(&self) -> &Handshake {
        &self.info
    }

    fn evaluate(&mut self, req: &MmaRequest) -> Result<String, BackendError> {
        if !self.info.supports(&req.fin, &req.fout) {
            return Err(BackendError::Unsupported(format!(
                "format pair {} -> {}",
                req.fin, req.fout
            )));
        }
        if req.k > self.info.kmax {
            return Err(BackendError::Unsupported(format!(
                "k = {} exceeds {}",
                req.k, self.info.kmax
            )));
        }
        let (fin, fout, a, b, c) = decode_request(req)?;
        let d = mma_dot(&c, &a, &b, &self.cfg, &fin, &fout).map_err(|e| match e {
            SimError::CarryOverflow => BackendError::Device(e.to_string()),
            SimError::SizeContract { .. } | SimError::FormatContract(_) => {
                BackendError::Unsupported(e.to_string())
            }
            _ => BackendError::Invalid(e.to_string()),
        })?;
        let bits = encode_exact(&d, &fout).unwrap_or_else(|| encode(&d, &fout, RoundingMode::Rne).0);
        Ok(to_hex(bits, &fout))
    }
}

type Decoded = (FpFormat, FpFormat, Vec<Value>, Vec<Value>, Value);

fn decode_request(req: &MmaRequest) -> Result<Decoded, BackendError> {
    let invalid = |e: &dyn std::fmt::Display| BackendError::Invalid(e.to_string());
    let fin = FpFormat::by_name(&req.fin).map_err(|e| invalid(&e))?;
    let fout = FpFormat::by_name(&req.fout).map_err(|e| invalid(&e))?;
    if req.a.len() != req.k || req.b.len() != req.k {
        return Err(BackendError::Invalid(format!(
            "k = {} but {} a and {} b operands",
            req.k,
            req.a.len(),
            req.b.len()
        )));
    }
    let list = |xs: &[String]| -> Result<Vec<Value>, BackendError> {
        xs.iter()
            .map(|h| parse_hex(h, &fin).map(|bits| decode(bits, &fin)).map_err(|e| invalid(&e)))
            .collect()
    };
    let a = list(&req.a)?;
    let b = list(&req.b)?;
    let c = decode(parse_hex(&req.c, &fout).map_err(|e| invalid(&e))?, &fout);
    Ok((fin, fout, a, b, c))
}

/// One backend reply: decoded value plus its raw encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub value: Value,
    pub hex: String,
}

/// A backend with a request counter.
pub struct Session {
    backend: Box<dyn Backend>,
    next_id: u64,
}

impl Session {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Session { backend, next_id: 1 }
    }

    pub fn info(&self) -> &Handshake {
        self.backend.info()
    }

    pub fn evaluate(
        &mut self,
        fin: &FpFormat,
        fout: &FpFormat,
        a: &[Value],
        b: &[Value],
        c: &Value,
    ) -> Result<Observation, BackendError> {
        let hex_in = |v: &Value, fmt: &FpFormat| {
            encode_exact(v, fmt)
                .map(|bits| to_hex(bits, fmt))
                .ok_or_else(|| BackendError::Invalid(format!("{v} is not exact in {fmt}")))
        };
        let req = MmaRequest {
            id: self.next_id,
            fin: fin.name.clone(),
            fout: fout.name.clone(),
            k: a.len(),
            a: a.iter().map(|v| hex_in(v, fin)).collect::<Result<_, _>>()?,
            b: b.iter().map(|v| hex_in(v, fin)).collect::<Result<_, _>>()?,
            c: hex_in(c, fout)?,
        };
        self.next_id += 1;
        let hex = self.backend.evaluate(&req)?;
        let bits = parse_hex(&hex, fout)
            .map_err(|e| BackendError::Transport(format!("bad reply `{hex}`: {e}")))?;
        Ok(Observation {
            value: decode(bits, fout),
            hex,
        })
    }

    pub fn run(
        &mut self,
        fin: &FpFormat,
        fout: &FpFormat,
        v: &ProbeVector,
    ) -> Result<Observation, BackendError> {
        let wrap = |xs: &[Dyadic]| xs.iter().cloned().map(Value::Num).collect::<Vec<_>>();
        self.evaluate(fin, fout, &wrap(&v.a), &wrap(&v.b), &Value::Num(v.c.clone()))
    }
}

/// Answer requests from `input` on `output` until end of input.
pub fn serve<R: BufRead, W: Write>(
    backend: &mut dyn Backend,
    input: R,
    mut output: W,
) -> io::Result<()> {
    writeln!(output, "{}", backend.info().to_line())?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match MmaRequest::parse(&line) {
            Ok(req) => MmaReply {
                id: req.id,
                result: backend.evaluate(&req).map_err(|e| e.to_wire()),
            },
            Err(e) => MmaReply {
                id: 0,
                result: Err(BackendError::Invalid(e.to_string()).to_wire()),
            },
        };
        writeln!(output, "{}", reply.to_line())?;
        output.flush()?;
    }
    Ok(())
}

/// Full operand tiles holding one scalar test at position (1, 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    /// `m x k0`.
    pub a: Vec<Vec<Dyadic>>,
    /// `k0 x n`.
    pub b: Vec<Vec<Dyadic>>,
    /// `m x n`.
    pub c: Vec<Vec<Dyadic>>,
}

impl Tile {
    /// Operands of the inner product producing `D[i][j]` (0-based).
    pub fn element(&self, i: usize, j: usize) -> ProbeVector {
        ProbeVector {
            label: format!("tile[{i}][{j}]"),
            c: self.c[i][j].clone(),
            a: self.a[i].clone(),
            b: self.b.iter().map(|row| row[j].clone()).collect(),
        }
    }
}

/// Place a scalar test in row 1 of A, column 1 of B and `C[1][1]`, with
/// zeros appended after the live operands so block assignment is kept.
pub fn embed_scalar_test(
    probe: &ProbeVector,
    m: usize,
    n: usize,
    k0: usize,
) -> Result<Tile, SimError> {
    if probe.k() > k0 || m == 0 || n == 0 {
        return Err(SimError::SizeContract {
            k: probe.k(),
            max: k0,
        });
    }
    let zero = Dyadic::zero();
    let mut a = vec![vec![zero.clone(); k0]; m];
    let mut b = vec![vec![zero.clone(); n]; k0];
    let mut c = vec![vec![zero; n]; m];
    for (l, (x, y)) in probe.a.iter().zip(&probe.b).enumerate() {
        a[0][l] = x.clone();
        b[l][0] = y.clone();
    }
    c[0][0] = probe.c.clone();
    Ok(Tile { a, b, c })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_line_session(cfg: BlockFmaConfig) -> Session {
        Session::new(Box::new(SimBackend::new(cfg).unwrap()))
    }

    #[test]
    fn sim_evaluates_unit_product() {
        let mut s = one_line_session(BlockFmaConfig::default());
        let one = Value::Num(Dyadic::one());
        let obs = s
            .evaluate(&FpFormat::binary16(), &FpFormat::binary32(), &[one.clone()], &[one.clone()], &Value::zero())
            .unwrap();
        assert_eq!(obs.value, one);
        assert_eq!(obs.hex, "3f800000");
    }

    #[test]
    fn sim_rejects_oversized_k() {
        let mut b = SimBackend::new(BlockFmaConfig { fma_width: 2, ..Default::default() }).unwrap();
        let req = MmaRequest {
            id: 1,
            fin: "binary16".into(),
            fout: "binary32".into(),
            k: 5,
            a: vec!["0000".into(); 5],
            b: vec!["0000".into(); 5],
            c: "00000000".into(),
        };
        assert!(matches!(b.evaluate(&req), Err(BackendError::Unsupported(_))));
        let bad_pair = MmaRequest { fin: "binary32".into(), k: 1, a: vec!["0".into()], b: vec!["0".into()], ..req.clone() };
        assert!(matches!(b.evaluate(&bad_pair), Err(BackendError::Unsupported(_))));
        let short = MmaRequest { k: 2, a: vec!["0000".into()], ..req };
        assert!(matches!(b.evaluate(&short), Err(BackendError::Invalid(_))));
    }

    #[test]
    fn serve_answers_each_line() {
        let mut b = SimBackend::new(BlockFmaConfig::default()).unwrap();
        let input = concat!(
            r#"{"id":1,"fin":"binary16","fout":"binary32","k":1,"a":["3c00"],"b":["4000"],"c":"3f800000"}"#,
            "\nnot json\n"
        );
        let mut out = Vec::new();
        serve(&mut b, input.as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(Handshake::parse(lines[0]).is_ok());
        assert_eq!(lines[1], r#"{"id":1,"d":"40400000"}"#);
        assert_eq!(MmaReply::parse(lines[2]).unwrap().result.unwrap_err().code, "invalid");
    }

    #[test]
    fn embedding_pads_after_live_operands() {
        let v = ProbeVector {
            label: "t".into(),
            c: Dyadic::one(),
            a: vec![Dyadic::one(), Dyadic::from_i64(2)],
            b: vec![Dyadic::from_i64(3), Dyadic::one()],
        };
        let t = embed_scalar_test(&v, 16, 16, 16).unwrap();
        assert_eq!(&t.a[0][..2], &v.a[..]);
        assert!(t.a[0][2..].iter().all(Dyadic::is_zero));
        let e = t.element(0, 0);
        assert_eq!(e.exact(), Dyadic::from_i64(6));
        assert_eq!(e.k(), 16);
        assert!(embed_scalar_test(&v, 4, 4, 1).is_err());
    }
}
