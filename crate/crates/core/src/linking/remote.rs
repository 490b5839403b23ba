//! HTTP client for an externally hosted relevance model.
//!
//! Request: `{"question": ..., "blocks": [TableBlock, ...]}`.
//! Response: `{"scores": [{"table_score": f, "column_scores": [f, ...]}, ...]}`
//! with one entry per block in request order.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::blocks::TableBlock;
use super::{BlockScore, LinkError, SchemaScorer};
use crate::http::{Transport, UreqTransport};

pub struct RemoteScorer {
    url: String,
    timeout: Duration,
    transport: Arc<dyn Transport>,
}

#[derive(Serialize)]
struct Request<'a> {
    question: &'a str,
    blocks: &'a [TableBlock],
}

#[derive(Deserialize)]
struct Response {
    scores: Vec<BlockScore>,
}

impl RemoteScorer {
    pub fn new(url: impl Into<String>) -> Self {
        Self::with_transport(url, Arc::new(UreqTransport))
    }

    pub fn with_transport(url: impl Into<String>, transport: Arc<dyn Transport>) -> Self {
        Self {
            url: url.into(),
            timeout: Duration::from_secs(30),
            transport,
        }
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl SchemaScorer for RemoteScorer {
    fn score_batch(&self, question: &str, blocks: &[TableBlock]) -> Result<Vec<BlockScore>, LinkError> {
        let body = serde_json::to_string(&Request { question, blocks })
            .map_err(|e| LinkError::ScorerFailure(e.to_string()))?;
        let reply = self
            .transport
            .post_json(&self.url, &[], &body, self.timeout)
            .map_err(|e| LinkError::ScorerFailure(e.to_string()))?;
        if reply.status != 200 {
            return Err(LinkError::ScorerFailure(format!("HTTP status {}", reply.status)));
        }
        let parsed: Response = serde_json::from_str(&reply.body)
            .map_err(|e| LinkError::ScorerFailure(format!("malformed response: {e}")))?;
        Ok(parsed.scores)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;
    use crate::http::{HttpReply, TransportError, TransportErrorKind};
    use crate::linking::{link, LinkConfig};
    use crate::schema::fixtures::stock_schema;

    struct Canned {
        reply: Result<HttpReply, TransportError>,
        seen: Mutex<Vec<String>>,
    }

    impl Transport for Canned {
        fn post_json(
            &self,
            _: &str,
            _: &[(String, String)],
            body: &str,
            _: Duration,
        ) -> Result<HttpReply, TransportError> {
            self.seen.lock().unwrap().push(body.to_string());
            self.reply.clone()
        }
    }

    fn scorer(reply: Result<HttpReply, TransportError>) -> (RemoteScorer, Arc<Canned>) {
        let t = Arc::new(Canned {
            reply,
            seen: Mutex::new(Vec::new()),
        });
        (RemoteScorer::with_transport("http://scorer", t.clone()), t)
    }

    #[test]
    fn posts_blocks_and_uses_scores() {
        let body = r#"{"scores":[
            {"table_score":0.2,"column_scores":[0.1,0.9,0.3,0.0]},
            {"table_score":0.8,"column_scores":[0.5,0.6,0.7]}]}"#;
        let (s, t) = scorer(Ok(HttpReply {
            status: 200,
            body: body.into(),
        }));
        let config = LinkConfig {
            k_tables: 1,
            m_columns: 2,
            ..LinkConfig::default()
        };
        let r = link("which industry", &stock_schema(), &s, &config).unwrap();
        assert_eq!(r.sub_schema.tables[0].name, "lc_exgindustry");
        let cols: Vec<_> = r.sub_schema.tables[0].columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(cols, ["firstindustryname", "infopubldate"]);
        let sent: serde_json::Value = serde_json::from_str(&t.seen.lock().unwrap()[0]).unwrap();
        assert_eq!(sent["question"], "which industry");
        assert_eq!(sent["blocks"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn failures_surface_as_scorer_failure() {
        let cases = [
            Ok(HttpReply {
                status: 500,
                body: String::new(),
            }),
            Ok(HttpReply {
                status: 200,
                body: "{}".into(),
            }),
            Ok(HttpReply {
                status: 200,
                body: r#"{"scores":[{"table_score":1.5,"column_scores":[0,0,0,0]},{"table_score":0,"column_scores":[0,0,0]}]}"#.into(),
            }),
            Err(TransportError {
                kind: TransportErrorKind::Timeout,
                message: "slow".into(),
            }),
        ];
        for reply in cases {
            let (s, _) = scorer(reply);
            let err = link("q", &stock_schema(), &s, &LinkConfig::default()).unwrap_err();
            assert!(matches!(err, LinkError::ScorerFailure(_)));
        }
    }
}
