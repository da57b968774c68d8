use std::time::Duration;

use reqwest::blocking::{Client as Http, RequestBuilder};
use reqwest::Method;
use serde_json::Value;

use crate::error::CliError;

/// Blocking JSON client for the gateway; one request in flight at a time.
pub struct Client {
    base: String,
    token: Option<String>,
    http: Http,
}

impl Client {
    pub fn new(base: &str, token: Option<String>) -> Result<Self, CliError> {
        let http = Http::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| CliError::Connectivity(e.to_string()))?;
        Ok(Self {
            base: base.trim_end_matches('/').to_owned(),
            token,
            http,
        })
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        let req = self.http.request(method, format!("{}{path}", self.base));
        match &self.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        }
    }

    fn send(&self, req: RequestBuilder) -> Result<Option<Value>, CliError> {
        let resp = req.send().map_err(|e| CliError::Connectivity(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| CliError::Connectivity(e.to_string()))?;
        let body: Option<Value> = serde_json::from_str(&text).ok();
        if status.is_success() {
            return Ok(body);
        }
        let detail = body.as_ref().map(describe_error).unwrap_or(text);
        if status.is_server_error() {
            Err(CliError::Connectivity(format!("server error {status}: {detail}")))
        } else {
            Err(CliError::Rejected {
                status: status.as_u16(),
                detail,
            })
        }
    }

    pub fn get(&self, path: &str) -> Result<Value, CliError> {
        Ok(self.send(self.request(Method::GET, path))?.unwrap_or(Value::Null))
    }

    pub fn post(&self, path: &str, body: &Value) -> Result<Value, CliError> {
        Ok(self
            .send(self.request(Method::POST, path).json(body))?
            .unwrap_or(Value::Null))
    }

    pub fn post_text(&self, path: &str, body: String) -> Result<Value, CliError> {
        Ok(self
            .send(self.request(Method::POST, path).body(body))?
            .unwrap_or(Value::Null))
    }

    pub fn put(&self, path: &str, body: &Value) -> Result<Value, CliError> {
        Ok(self
            .send(self.request(Method::PUT, path).json(body))?
            .unwrap_or(Value::Null))
    }

    pub fn patch(&self, path: &str, body: &Value) -> Result<Value, CliError> {
        Ok(self
            .send(self.request(Method::PATCH, path).json(body))?
            .unwrap_or(Value::Null))
    }
}

/// `error` plus any violation list, on one line.
fn describe_error(body: &Value) -> String {
    let mut out = body["error"].as_str().unwrap_or("request failed").to_owned();
    if let Some(vs) = body["violations"].as_array() {
        let parts: Vec<String> = vs
            .iter()
            .map(|v| format!("{}: {}", v["field"].as_str().unwrap_or("?"), v["message"].as_str().unwrap_or("?")))
            .collect();
        out.push_str(&format!(" ({})", parts.join("; ")));
    }
    out
}
