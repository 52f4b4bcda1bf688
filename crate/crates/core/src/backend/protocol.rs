//! Newline-delimited JSON wire format between the driver and a harness.
//!
//! ```text
//! harness -> {"proto":1,"pairs":[["binary16","binary32"]],"kmax":16}
//! driver  -> {"id":1,"fin":"binary16","fout":"binary32","k":1,"a":["3c00"],"b":["3c00"],"c":"00000000"}
//! harness -> {"id":1,"d":"3f800000"}
//! harness -> {"id":2,"error":{"code":"unsupported","message":"k = 40 exceeds 16"}}
//! ```

use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Handshake {
    pub proto: u32,
    pub pairs: Vec<(String, String)>,
    pub kmax: usize,
}

impl Handshake {
    pub fn supports(&self, fin: &str, fout: &str) -> bool {
        self.pairs.iter().any(|(i, o)| i == fin && o == fout)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmaRequest {
    pub id: u64,
    pub fin: String,
    pub fout: String,
    pub k: usize,
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub c: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MmaReply {
    pub id: u64,
    pub result: Result<String, WireError>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplyLine {
    id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<WireError>,
}

impl Serialize for MmaReply {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let (d, error) = match &self.result {
            Ok(d) => (Some(d.clone()), None),
            Err(e) => (None, Some(e.clone())),
        };
        ReplyLine { id: self.id, d, error }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MmaReply {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let line = ReplyLine::deserialize(de)?;
        let result = match (line.d, line.error) {
            (Some(d), None) => Ok(d),
            (None, Some(e)) => Err(e),
            _ => {
                return Err(serde::de::Error::custom(
                    "reply needs exactly one of `d` and `error`",
                ))
            }
        };
        Ok(MmaReply { id: line.id, result })
    }
}

fn to_line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("protocol records always serialise")
}

impl Handshake {
    pub fn to_line(&self) -> String {
        to_line(self)
    }

    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end())
    }
}

impl MmaRequest {
    pub fn to_line(&self) -> String {
        to_line(self)
    }

    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end())
    }
}

impl MmaReply {
    pub fn to_line(&self) -> String {
        to_line(self)
    }

    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_line_round_trip() {
        let line = r#"{"id":7,"fin":"binary16","fout":"binary32","k":2,"a":["3c00","0000"],"b":["3c00","0000"],"c":"3f800000"}"#;
        let req = MmaRequest::parse(line).unwrap();
        assert_eq!(req.k, 2);
        assert_eq!(req.to_line(), line);
    }

    #[test]
    fn reply_lines() {
        let ok = r#"{"id":3,"d":"40000000"}"#;
        assert_eq!(MmaReply::parse(ok).unwrap().to_line(), ok);
        let err = r#"{"id":4,"error":{"code":"unsupported","message":"no"}}"#;
        let r = MmaReply::parse(err).unwrap();
        assert_eq!(r.result.as_ref().unwrap_err().code, "unsupported");
        assert_eq!(r.to_line(), err);
        assert!(MmaReply::parse(r#"{"id":1}"#).is_err());
        assert!(MmaReply::parse(r#"{"id":1,"d":"0","error":{"code":"x","message":"y"}}"#).is_err());
    }

    #[test]
    fn handshake_line() {
        let line = r#"{"proto":1,"pairs":[["binary16","binary32"]],"kmax":16}"#;
        let h = Handshake::parse(line).unwrap();
        assert!(h.supports("binary16", "binary32"));
        assert!(!h.supports("binary32", "binary16"));
        assert_eq!(h.to_line(), line);
    }
}
