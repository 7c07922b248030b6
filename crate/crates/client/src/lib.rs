//! Typed client for the qbaf HTTP service.

use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use qbaf_core::api::{
    ContestResponse, CreateSessionRequest, ErrorBody, ForkRequest, Health, SemanticsListing,
    SessionView, VerifyRequest, VerifyResponse,
};
use qbaf_core::contestation::ContestationEdit;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("service returned {status}: {message}")]
    Api {
        status: StatusCode,
        kind: String,
        message: String,
    },
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Transport(e) => e.status(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceClient {
    base: String,
    http: reqwest::Client,
}

impl ServiceClient {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_owned(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn send<B: Serialize, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<&B>,
    ) -> Result<T, ClientError> {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await.unwrap_or_default();
        let (kind, message) = match serde_json::from_str::<ErrorBody>(&text) {
            Ok(e) => (e.error, e.message),
            Err(_) => (String::new(), text),
        };
        Err(ClientError::Api {
            status,
            kind,
            message,
        })
    }

    pub async fn verify(&self, request: &VerifyRequest) -> Result<VerifyResponse, ClientError> {
        self.send(Method::POST, "/verify", Some(request)).await
    }

    pub async fn create_session(&self, request: &CreateSessionRequest) -> Result<SessionView, ClientError> {
        self.send(Method::POST, "/sessions", Some(request)).await
    }

    pub async fn session(&self, id: &str) -> Result<SessionView, ClientError> {
        self.send::<(), _>(Method::GET, &format!("/sessions/{id}"), None).await
    }

    pub async fn contest(&self, id: &str, edit: &ContestationEdit) -> Result<ContestResponse, ClientError> {
        self.send(Method::POST, &format!("/sessions/{id}/contest"), Some(edit)).await
    }

    pub async fn fork(&self, id: &str, history_len: usize) -> Result<SessionView, ClientError> {
        self.send(
            Method::POST,
            &format!("/sessions/{id}/fork"),
            Some(&ForkRequest { history_len }),
        )
        .await
    }

    pub async fn semantics(&self) -> Result<SemanticsListing, ClientError> {
        self.send::<(), _>(Method::GET, "/semantics", None).await
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.send::<(), _>(Method::GET, "/health", None).await
    }
}
