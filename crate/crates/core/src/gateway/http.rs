//! HTTP transport: `POST <base>/classify` with the line-protocol bodies.
//! The hello document is POSTed to the same path once before the first
//! request and must be answered with a matching hello.

use std::sync::Mutex;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use super::protocol::{parse_incoming, Hello, Incoming, Request, PROTOCOL_VERSION};
use super::{ClassifyError, Classifier, Query};

pub struct HttpClassifier {
    url: String,
    timeout: Duration,
    agent: ureq::Agent,
    greeted: Mutex<bool>,
    next_id: AtomicU64,
}

impl HttpClassifier {
    pub fn new(base: &str, timeout: Duration) -> Self {
        let trimmed = base.trim_end_matches('/');
        let url = if trimmed.ends_with("/classify") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/classify")
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpClassifier {
            url,
            timeout,
            agent,
            greeted: Mutex::new(false),
            next_id: AtomicU64::new(1),
        }
    }

    fn post(&self, body: &str) -> Result<Incoming, ClassifyError> {
        let response = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => ClassifyError::Timeout(self.timeout),
                other => ClassifyError::Transport(format!("{}: {other}", self.url)),
            })?;
        let status = response.status().as_u16();
        let text = response
            .into_body()
            .read_to_string()
            .map_err(|e| ClassifyError::Transport(format!("{}: reading body: {e}", self.url)))?;
        match parse_incoming(&text) {
            Ok(msg) => Ok(msg),
            Err(_) if status >= 500 => Err(ClassifyError::Transport(format!("{}: HTTP {status}", self.url))),
            Err(e) => Err(ClassifyError::Rejected(format!("HTTP {status}: {e}"))),
        }
    }
}

impl Classifier for HttpClassifier {
    fn describe(&self) -> String {
        format!("http:{} (timeout {:?})", self.url, self.timeout)
    }

    fn handshake(&self) -> Result<(), ClassifyError> {
        let mut greeted = self.greeted.lock().expect("hello lock");
        if *greeted {
            return Ok(());
        }
        match self.post(&Hello::current().to_line())? {
            Incoming::Hello(h) if h.hello == PROTOCOL_VERSION => {
                *greeted = true;
                Ok(())
            }
            Incoming::Hello(h) => Err(ClassifyError::Transport(format!(
                "server speaks `{}`, expected `{PROTOCOL_VERSION}`",
                h.hello
            ))),
            Incoming::Response(_) => Err(ClassifyError::Transport("server did not answer the hello".into())),
        }
    }

    fn classify(&self, query: &Query) -> Result<f64, ClassifyError> {
        self.handshake()?;
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let body = Request {
            id,
            image: query.payload()?,
        }
        .to_line();
        match self.post(&body)? {
            Incoming::Response(r) if r.id == id => r.outcome().map_err(ClassifyError::Rejected),
            Incoming::Response(r) => Err(ClassifyError::Rejected(format!("response id {} for request {id}", r.id))),
            Incoming::Hello(_) => Err(ClassifyError::Rejected("unexpected hello in response".into())),
        }
    }
}
