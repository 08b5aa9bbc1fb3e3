//! Line-oriented JSON wire protocol shared by every transport.
//!
//! Request: `{"id": <int>, "image": "<path or base64 PNG>"}`.
//! Response: `{"id": <int>, "score": <float in [0,1]>}` or
//! `{"id": <int>, "error": "<msg>"}`. Scores are the probability that the
//! image is REAL. Both sides open with `{"hello": "facemt/1"}`.

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::imaging::{encode_png, Image, ImagingError};

pub const PROTOCOL_VERSION: &str = "facemt/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub hello: String,
}

impl Hello {
    pub fn current() -> Self {
        Hello {
            hello: PROTOCOL_VERSION.to_string(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("hello serialises")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub image: String,
}

impl Request {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serialises")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn score(id: u64, score: f64) -> Self {
        Response {
            id,
            score: Some(score),
            error: None,
        }
    }

    pub fn error(id: u64, msg: impl Into<String>) -> Self {
        Response {
            id,
            score: None,
            error: Some(msg.into()),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("response serialises")
    }

    /// The score if the response carries a valid one, else the server's
    /// message (or a description of what is wrong with the response).
    pub fn outcome(&self) -> Result<f64, String> {
        match (self.score, &self.error) {
            (_, Some(e)) => Err(e.clone()),
            (Some(s), None) if (0.0..=1.0).contains(&s) => Ok(s),
            (Some(s), None) => Err(format!("score {s} outside [0, 1]")),
            (None, None) => Err("response has neither score nor error".into()),
        }
    }
}

/// Any message a classifier may send.
#[derive(Debug, Clone, PartialEq)]
pub enum Incoming {
    Hello(Hello),
    Response(Response),
}

pub fn parse_incoming(line: &str) -> Result<Incoming, String> {
    let value: serde_json::Value = serde_json::from_str(line.trim()).map_err(|e| format!("malformed JSON: {e}"))?;
    if value.get("hello").is_some() {
        return serde_json::from_value(value).map(Incoming::Hello).map_err(|e| e.to_string());
    }
    serde_json::from_value(value).map(Incoming::Response).map_err(|e| format!("malformed response: {e}"))
}

/// Base64-encode an image as PNG for the `image` field.
pub fn encode_image_payload(image: &Image) -> Result<String, ImagingError> {
    Ok(base64::engine::general_purpose::STANDARD.encode(encode_png(image)?))
}

/// Interpret an `image` field: base64 PNG bytes if it decodes as such,
/// otherwise a filesystem path.
pub fn decode_image_payload(payload: &str) -> Result<Image, String> {
    if let Ok(bytes) = base64::engine::general_purpose::STANDARD.decode(payload) {
        if bytes.starts_with(b"\x89PNG") {
            return crate::imaging::decode_png(&bytes).map_err(|e| e.to_string());
        }
    }
    crate::imaging::load_png(std::path::Path::new(payload)).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Rgb;

    #[test]
    fn messages_have_the_documented_shape() {
        assert_eq!(Hello::current().to_line(), r#"{"hello":"facemt/1"}"#);
        assert_eq!(Request { id: 7, image: "a.png".into() }.to_line(), r#"{"id":7,"image":"a.png"}"#);
        assert_eq!(Response::score(7, 0.25).to_line(), r#"{"id":7,"score":0.25}"#);
        assert_eq!(Response::error(3, "bad").to_line(), r#"{"id":3,"error":"bad"}"#);
    }

    #[test]
    fn parses_incoming_messages() {
        assert_eq!(parse_incoming(r#"{"hello":"facemt/1"}"#).unwrap(), Incoming::Hello(Hello::current()));
        let Incoming::Response(r) = parse_incoming(r#"{"id":2,"score":1}"#).unwrap() else { panic!() };
        assert_eq!(r.outcome(), Ok(1.0));
        let Incoming::Response(r) = parse_incoming(r#"{"id":2,"score":1.5}"#).unwrap() else { panic!() };
        assert!(r.outcome().is_err());
        let Incoming::Response(r) = parse_incoming(r#"{"id":2,"error":"no"}"#).unwrap() else { panic!() };
        assert_eq!(r.outcome(), Err("no".into()));
        assert!(parse_incoming("nonsense").is_err());
        assert!(parse_incoming(r#"{"score":0.5}"#).is_err());
    }

    #[test]
    fn image_payload_round_trips() {
        let img = Image::filled(5, 3, Rgb::new(10, 20, 30)).unwrap();
        let payload = encode_image_payload(&img).unwrap();
        assert_eq!(decode_image_payload(&payload).unwrap(), img);
        assert!(decode_image_payload("/definitely/missing.png").is_err());
    }
}
